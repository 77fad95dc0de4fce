//! Fading-averaged rate functions as weighted sums of logarithms.
//!
//! Every objective used by the optimizers has the form
//! `constant + sum_t w_t * log2(1 + a_t1 * P1(s_t) + a_t2 * P2(s_t))`,
//! where each term touches a single state `s_t`. Differences of logarithms
//! (treating interference as noise, rate splitting) are terms with negative
//! weights. The representation gives exact values, gradients and per-state
//! Hessian blocks.

use std::f64::consts::LN_2;

use crate::channel::{FadingProcess, PowerPolicy, Receiver};

/// `C(x) = log2(1 + x)`.
pub fn capacity(snr: f64) -> f64 {
    (1.0 + snr).log2()
}

/// One `w * log2(1 + a1 * P1 + a2 * P2)` term evaluated in state `state`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogTerm {
    pub state: usize,
    pub weight: f64,
    pub a: [f64; 2],
}

impl LogTerm {
    fn arg(&self, p1: f64, p2: f64) -> f64 {
        self.a[0] * p1 + self.a[1] * p2
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RateFunction {
    pub constant: f64,
    pub terms: Vec<LogTerm>,
}

impl RateFunction {
    pub fn constant(value: f64) -> Self {
        RateFunction {
            constant: value,
            terms: Vec::new(),
        }
    }

    /// Adds `weight * log2(1 + a1 P1 + a2 P2)` in `state`; zero terms are dropped.
    pub fn push(&mut self, state: usize, weight: f64, a1: f64, a2: f64) {
        if weight == 0.0 || (a1 == 0.0 && a2 == 0.0) {
            return;
        }
        self.terms.push(LogTerm {
            state,
            weight,
            a: [a1, a2],
        });
    }

    pub fn plus(mut self, other: &RateFunction) -> RateFunction {
        self.constant += other.constant;
        self.terms.extend(other.terms.iter().copied());
        self
    }

    pub fn scaled(mut self, c: f64) -> RateFunction {
        self.constant *= c;
        for t in &mut self.terms {
            t.weight *= c;
        }
        self
    }

    /// The terms of state `i` with the probability weight `prob` divided out.
    pub fn restricted_to_state(&self, i: usize, prob: f64) -> RateFunction {
        RateFunction {
            constant: 0.0,
            terms: self
                .terms
                .iter()
                .filter(|t| t.state == i)
                .map(|t| LogTerm {
                    weight: t.weight / prob,
                    ..*t
                })
                .collect(),
        }
    }

    /// Whether the power of user `k` in state `i` enters the function.
    pub fn uses(&self, k: usize, i: usize) -> bool {
        self.terms.iter().any(|t| t.state == i && t.a[k] != 0.0)
    }

    pub fn value(&self, policy: &PowerPolicy) -> f64 {
        self.value_at(&policy.p1, &policy.p2)
    }

    pub fn value_at(&self, p1: &[f64], p2: &[f64]) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|t| t.weight * capacity(t.arg(p1[t.state], p2[t.state])))
                .sum::<f64>()
    }

    /// Partial derivatives with respect to every `P_k(state)`.
    pub fn gradient(&self, policy: &PowerPolicy) -> [Vec<f64>; 2] {
        let n = policy.len();
        let mut g = [vec![0.0; n], vec![0.0; n]];
        self.add_gradient(&policy.p1, &policy.p2, 1.0, &mut g);
        g
    }

    /// Accumulates `scale * gradient` into `out`.
    pub fn add_gradient(&self, p1: &[f64], p2: &[f64], scale: f64, out: &mut [Vec<f64>; 2]) {
        for t in &self.terms {
            let u = 1.0 + t.arg(p1[t.state], p2[t.state]);
            let c = scale * t.weight / (u * LN_2);
            out[0][t.state] += c * t.a[0];
            out[1][t.state] += c * t.a[1];
        }
    }

    /// Accumulates `scale * Hessian` as per-state 2x2 blocks `[h11, h12, h22]`.
    pub fn add_hessian_blocks(&self, p1: &[f64], p2: &[f64], scale: f64, out: &mut [[f64; 3]]) {
        for t in &self.terms {
            let u = 1.0 + t.arg(p1[t.state], p2[t.state]);
            let c = -scale * t.weight / (u * u * LN_2);
            let b = &mut out[t.state];
            b[0] += c * t.a[0] * t.a[0];
            b[1] += c * t.a[0] * t.a[1];
            b[2] += c * t.a[1] * t.a[1];
        }
    }

    /// Smallest argument `1 + a.P` over all terms; positive on the feasible set.
    pub(crate) fn min_arg(&self, p1: &[f64], p2: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| 1.0 + t.arg(p1[t.state], p2[t.state]))
            .fold(f64::INFINITY, f64::min)
    }
}

/// `E[C(g_rx,tx P_tx)]`.
pub fn single_user(process: &FadingProcess, rx: usize, tx: usize) -> RateFunction {
    let mut f = RateFunction::default();
    for (i, (s, p)) in process.iter().enumerate() {
        let mut a = [0.0; 2];
        a[tx] = s.gain(rx, tx);
        f.push(i, p, a[0], a[1]);
    }
    f
}

/// `E[C(g_j1 P1 + g_j2 P2)]`, the sum-rate cap of the MAC seen at receiver `j`.
pub fn mac_sum(process: &FadingProcess, rx: Receiver) -> RateFunction {
    let j = rx.index();
    let mut f = RateFunction::default();
    for (i, (s, p)) in process.iter().enumerate() {
        f.push(i, p, s.gain(j, 0), s.gain(j, 1));
    }
    f
}

/// `sum_k E[C(g_kk P_k)]`: both users decoded over their direct links.
pub fn direct_sum(process: &FadingProcess) -> RateFunction {
    single_user(process, 0, 0).plus(&single_user(process, 1, 1))
}

/// `sum_k E[C(g_jk P_k)]`, `j != k`: both users decoded over their cross links.
pub fn cross_sum(process: &FadingProcess) -> RateFunction {
    single_user(process, 1, 0).plus(&single_user(process, 0, 1))
}

/// Treating-interference-as-noise sum rate where only receiver `rx` sees
/// interference and the other receiver is interference free:
/// for `Rx1`, `E[C(g11 P1 / (1 + g12 P2)) + C(g22 P2)]`; mirrored for `Rx2`.
pub fn weak_bound(process: &FadingProcess, rx: Receiver) -> RateFunction {
    let j = rx.index();
    let o = 1 - j;
    let mut f = RateFunction::default();
    for (i, (s, p)) in process.iter().enumerate() {
        // user j's signal against interference from user o at receiver j
        let mut num = [0.0; 2];
        num[j] = s.gain(j, j);
        num[o] = s.gain(j, o);
        let mut den = [0.0; 2];
        den[o] = s.gain(j, o);
        let mut own = [0.0; 2];
        own[o] = s.gain(o, o);
        f.push(i, p, num[0], num[1]);
        f.push(i, -p, den[0], den[1]);
        f.push(i, p, own[0], own[1]);
    }
    f
}

/// Rate-splitting bound `S1(alpha, P) = E[C(g11 P1 / (1 + g12 a P2))] + E[C(g22 P2)]`
/// for a channel whose only interference is at receiver 1.
pub fn split_direct_bound(process: &FadingProcess, alpha: &[f64]) -> RateFunction {
    let mut f = RateFunction::default();
    for (i, (s, p)) in process.iter().enumerate() {
        let private = s.g12 * alpha[i];
        f.push(i, p, s.g11, private);
        f.push(i, -p, 0.0, private);
        f.push(i, p, 0.0, s.g22);
    }
    f
}

/// Rate-splitting bound
/// `S2(alpha, P) = E[C(g22 a P2)] + E[C((g11 P1 + g12 (1-a) P2) / (1 + g12 a P2))]`.
pub fn split_joint_bound(process: &FadingProcess, alpha: &[f64]) -> RateFunction {
    let mut f = RateFunction::default();
    for (i, (s, p)) in process.iter().enumerate() {
        let private = s.g12 * alpha[i];
        f.push(i, p, 0.0, s.g22 * alpha[i]);
        f.push(i, p, s.g11, s.g12);
        f.push(i, -p, 0.0, private);
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{equiprobable, FadingState};

    fn st(g11: f64, g12: f64, g21: f64, g22: f64) -> FadingState {
        FadingState::new(g11, g12, g21, g22).unwrap()
    }

    #[test]
    fn families_on_single_state() {
        let p = equiprobable(vec![st(1.0, 4.0, 4.0, 1.0)]).unwrap();
        let pol = PowerPolicy::new(vec![1.0], vec![1.0]).unwrap();
        assert!((direct_sum(&p).value(&pol) - 2.0).abs() < 1e-15);
        assert!((cross_sum(&p).value(&pol) - 2.0 * 5f64.log2()).abs() < 1e-14);
        assert!((mac_sum(&p, Receiver::Rx1).value(&pol) - 6f64.log2()).abs() < 1e-14);
    }

    #[test]
    fn weak_bound_values() {
        let p = equiprobable(vec![st(1.0, 0.25, 0.0, 1.0)]).unwrap();
        let pol = PowerPolicy::new(vec![1.0], vec![1.0]).unwrap();
        let v = weak_bound(&p, Receiver::Rx1).value(&pol);
        assert!((v - (1.0 + 1.8f64.log2())).abs() < 1e-14);
        let m = equiprobable(vec![st(1.0, 4.0, 0.25, 1.0)]).unwrap();
        let v = weak_bound(&m, Receiver::Rx2).value(&pol);
        assert!((v - (1.0 + 1.8f64.log2())).abs() < 1e-14);
    }

    #[test]
    fn split_bounds_match_hand_values() {
        let p = equiprobable(vec![st(1.0, 0.25, 0.0, 1.0)]).unwrap();
        let pol = PowerPolicy::new(vec![1.0], vec![1.0]).unwrap();
        let s1 = split_direct_bound(&p, &[0.5]).value(&pol);
        let s2 = split_joint_bound(&p, &[0.5]).value(&pol);
        assert!((s1 - ((1.0 + 1.0 / 1.125f64).log2() + 1.0)).abs() < 1e-14);
        // log2(1 + a/2) + log2(1 + (1 + b/2)/(1 + b/2)) with a = g22, b = g12
        assert!((s2 - (1.5f64.log2() + 1.0)).abs() < 1e-14);
    }

    #[test]
    fn restriction_undoes_probability() {
        let p = equiprobable(vec![st(1.0, 0.0, 0.0, 1.0), st(3.0, 0.0, 0.0, 1.0)]).unwrap();
        let f = single_user(&p, 0, 0);
        let pol = PowerPolicy::new(vec![1.0, 1.0], vec![0.0, 0.0]).unwrap();
        let r = f.restricted_to_state(1, 0.5);
        assert!((r.value(&pol) - 2.0).abs() < 1e-15);
    }
}
