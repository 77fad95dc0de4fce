//! Power allocation under average power constraints.

mod barrier;
mod kkt;
pub mod rate;
mod supergradient;

use serde::Serialize;

use crate::channel::{validate_policy, FadingProcess, PowerBudget, PowerPolicy, Receiver};
use crate::error::{Error, Result};
use rate::{capacity, RateFunction};

/// Number of states up to which [`Method::Auto`] uses the interior-point solver.
pub const AUTO_BARRIER_MAX_STATES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Interior point for small channels, supergradient beyond
    /// [`AUTO_BARRIER_MAX_STATES`] states or if the interior point fails.
    Auto,
    Barrier,
    Supergradient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// KKT residual below which a solution counts as converged.
    pub tol: f64,
    pub method: Method,
    /// Iteration cap of the supergradient method.
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-6,
            method: Method::Auto,
            max_iterations: 50_000,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolverOptions {
            tol,
            ..SolverOptions::default()
        }
    }

    pub(crate) fn check(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::InvalidTolerance(self.tol));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaterfillResult {
    /// Power in each entry of the gain distribution.
    pub powers: Vec<f64>,
    pub water_level: f64,
    pub achieved_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizerReport {
    pub policy: PowerPolicy,
    pub value: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub converged: bool,
}

/// A term `c_g * min_m F_gm` of a separable objective.
#[derive(Debug, Clone, PartialEq)]
pub struct MinGroup {
    pub weight: f64,
    pub members: Vec<RateFunction>,
}

/// Single-user waterfilling `P(g) = (nu - 1/g)^+` with `E[P] = budget`.
pub fn waterfill(gain_dist: &[(f64, f64)], budget: f64) -> Result<WaterfillResult> {
    for (i, &(g, p)) in gain_dist.iter().enumerate() {
        if !g.is_finite() || g < 0.0 {
            return Err(Error::InvalidGain {
                state: i,
                field: "gain",
                value: g,
            });
        }
        if !p.is_finite() || p <= 0.0 {
            return Err(Error::InvalidProbability { state: i, value: p });
        }
    }
    if !budget.is_finite() || budget < 0.0 {
        return Err(Error::InvalidBudget {
            field: "budget",
            value: budget,
        });
    }
    let g_max = gain_dist.iter().map(|&(g, _)| g).fold(0.0, f64::max);
    if g_max <= 0.0 {
        return Err(Error::AllGainsZero);
    }
    let spend = |nu: f64| -> f64 {
        gain_dist
            .iter()
            .filter(|&&(g, _)| g > 0.0)
            .map(|&(g, p)| p * (nu - 1.0 / g).max(0.0))
            .sum()
    };

    let mut nu = 1.0 / g_max;
    if budget > 0.0 {
        let mass: f64 = gain_dist.iter().filter(|&&(g, _)| g > 0.0).map(|&(_, p)| p).sum();
        let inv_max = gain_dist
            .iter()
            .filter(|&&(g, _)| g > 0.0)
            .map(|&(g, _)| 1.0 / g)
            .fold(0.0, f64::max);
        let mut lo = 1.0 / g_max;
        let mut hi = budget / mass + inv_max;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if spend(mid) < budget {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        nu = 0.5 * (lo + hi);
        // exact level on the active set found by bisection
        for _ in 0..4 {
            let (mut num, mut den) = (budget, 0.0);
            for &(g, p) in gain_dist {
                if g > 0.0 && nu > 1.0 / g {
                    num += p / g;
                    den += p;
                }
            }
            if den == 0.0 {
                break;
            }
            let exact = num / den;
            let consistent = gain_dist
                .iter()
                .filter(|&&(g, _)| g > 0.0)
                .all(|&(g, _)| (exact > 1.0 / g) == (nu > 1.0 / g));
            nu = exact;
            if consistent {
                break;
            }
        }
    }
    let powers: Vec<f64> = gain_dist
        .iter()
        .map(|&(g, _)| if g > 0.0 { (nu - 1.0 / g).max(0.0) } else { 0.0 })
        .collect();
    let achieved_rate = gain_dist
        .iter()
        .zip(&powers)
        .map(|(&(g, p), &pw)| p * capacity(g * pw))
        .sum();
    Ok(WaterfillResult {
        powers,
        water_level: nu,
        achieved_rate,
    })
}

/// Waterfilling that returns zero power when every gain is zero.
pub(crate) fn waterfill_or_zero(gain_dist: &[(f64, f64)], budget: f64) -> Result<WaterfillResult> {
    match waterfill(gain_dist, budget) {
        Err(Error::AllGainsZero) => Ok(WaterfillResult {
            powers: vec![0.0; gain_dist.len()],
            water_level: 0.0,
            achieved_rate: 0.0,
        }),
        other => other,
    }
}

/// Each user waterfilling over its own link `(rx_k, k)`.
pub(crate) fn per_user_waterfill(
    process: &FadingProcess,
    budget: &PowerBudget,
    rx_of: [usize; 2],
) -> Result<PowerPolicy> {
    let mut policy = PowerPolicy::zeros(process.len());
    for k in 0..2 {
        let wf = waterfill_or_zero(&process.link_distribution(rx_of[k], k), budget.get(k))?;
        *policy.user_mut(k) = wf.powers;
    }
    Ok(policy)
}

const DUAL_LO: f64 = 1e-12;
const DUAL_HI: f64 = 1e12;
const DUAL_ITERATIONS: usize = 200;
const TIE_TOL: f64 = 1e-9;

struct MacState {
    g: [f64; 2],
    prob: f64,
}

enum MacAlloc {
    Off,
    Single(usize, f64),
    /// Both users reach the same received level; only the received power is fixed.
    Tie(f64),
}

/// Allocation in one state for multipliers `mu` (in nats per unit power).
fn mac_allocation(s: &MacState, mu: [f64; 2], enabled: [bool; 2], tie_tol: f64) -> MacAlloc {
    let r = [0, 1].map(|k| if enabled[k] && s.g[k] > 0.0 { s.g[k] / mu[k] } else { 0.0 });
    if r[0] <= 1.0 && r[1] <= 1.0 {
        return MacAlloc::Off;
    }
    let top = r[0].max(r[1]);
    if (r[0] - r[1]).abs() <= tie_tol * top {
        return MacAlloc::Tie(top - 1.0);
    }
    let k = if r[0] > r[1] { 0 } else { 1 };
    MacAlloc::Single(k, 1.0 / mu[k] - 1.0 / s.g[k])
}

/// Mean powers outside tied states and the mean power each user would need
/// to cover all tied states alone.
fn mac_spend(
    states: &[MacState],
    mu: [f64; 2],
    enabled: [bool; 2],
    tie_tol: f64,
) -> ([f64; 2], [f64; 2]) {
    let mut own = [0.0; 2];
    let mut tied = [0.0; 2];
    for s in states {
        match mac_allocation(s, mu, enabled, tie_tol) {
            MacAlloc::Off => {}
            MacAlloc::Single(k, p) => own[k] += s.prob * p,
            MacAlloc::Tie(recv) => {
                tied[0] += s.prob * recv / s.g[0];
                tied[1] += s.prob * recv / s.g[1];
            }
        }
    }
    (own, tied)
}

/// Fraction of the tied received power given to user 1 so that it spends `b1`.
fn tie_fraction(own: [f64; 2], tied: [f64; 2], b1: f64) -> f64 {
    if tied[0] > 0.0 {
        ((b1 - own[0]) / tied[0]).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Log-scale bisection for the multiplier at which `spend(mu)` meets `target`;
/// `spend` must be nonincreasing.
fn dual_bisect<F: Fn(f64) -> f64>(spend: F, target: f64) -> (f64, usize) {
    let (mut lo, mut hi) = (DUAL_LO.ln(), DUAL_HI.ln());
    let mut it = 0;
    while it < DUAL_ITERATIONS {
        it += 1;
        let mid = 0.5 * (lo + hi);
        if spend(mid.exp()) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 {
            break;
        }
    }
    ((0.5 * (lo + hi)).exp(), it)
}

/// Maximizes `E[C(g_j1 P1 + g_j2 P2)]` at receiver `j` by dual bisection on
/// the two power multipliers. Per state the user with the larger
/// multiplier-scaled gain transmits; tied states are shared.
pub fn mac_opportunistic_waterfill(
    process: &FadingProcess,
    receiver: Receiver,
    budget: &PowerBudget,
) -> Result<OptimizerReport> {
    let j = receiver.index();
    let states: Vec<MacState> = process
        .iter()
        .map(|(s, p)| MacState {
            g: [s.gain(j, 0), s.gain(j, 1)],
            prob: p,
        })
        .collect();
    let has_gain = [0, 1].map(|k| states.iter().any(|s| s.g[k] > 0.0));
    if !has_gain[0] && !has_gain[1] {
        return Err(Error::AllGainsZero);
    }
    let b = budget.as_array();
    let enabled = [0, 1].map(|k| has_gain[k] && b[k] > 0.0);
    let objective = rate::mac_sum(process, receiver);
    let n = process.len();
    if !enabled[0] && !enabled[1] {
        let policy = PowerPolicy::zeros(n);
        return Ok(report_single(process, budget, &objective, policy, 0, 1e-6));
    }

    let mut iterations = 0;
    let mut mu = [1.0, 1.0];
    // Only one user active: ordinary waterfilling.
    if enabled[0] != enabled[1] {
        let k = if enabled[0] { 0 } else { 1 };
        let (m, it) = dual_bisect(
            |x| {
                let mut m = [1.0; 2];
                m[k] = x;
                mac_spend(&states, m, enabled, TIE_TOL).0[k]
            },
            b[k],
        );
        mu[k] = m;
        iterations += it;
    } else {
        let inner = |mu2: f64| -> (f64, usize) {
            dual_bisect(
                |x| {
                    // exact ties only, so the bracket closes on the tie point itself
                    let (own, tied) = mac_spend(&states, [x, mu2], enabled, 0.0);
                    own[0] + tied[0]
                },
                b[0],
            )
        };
        // user 2's spend once user 1 meets its budget, ties split accordingly
        let (mu2, it) = dual_bisect(
            |x| {
                let (mu1, _) = inner(x);
                let (own, tied) = mac_spend(&states, [mu1, x], enabled, TIE_TOL);
                let theta = tie_fraction(own, tied, b[0]);
                own[1] + (1.0 - theta) * tied[1]
            },
            b[1],
        );
        let (mu1, it1) = inner(mu2);
        mu = [mu1, mu2];
        iterations += it * it1.max(1);
    }

    let mut policy = PowerPolicy::zeros(n);
    let (own, tied) = mac_spend(&states, mu, enabled, TIE_TOL);
    let theta = tie_fraction(own, tied, b[0]);
    for (i, s) in states.iter().enumerate() {
        match mac_allocation(s, mu, enabled, TIE_TOL) {
            MacAlloc::Off => {}
            MacAlloc::Single(k, p) => policy.user_mut(k)[i] = p,
            MacAlloc::Tie(recv) => {
                policy.p1[i] = theta * recv / s.g[0];
                policy.p2[i] = (1.0 - theta) * recv / s.g[1];
            }
        }
    }
    // Guard against bisection round-off pushing a mean above its budget.
    let mean = policy.mean_power(process);
    for k in 0..2 {
        if mean[k] > b[k] && mean[k] > 0.0 {
            let scale = b[k] / mean[k];
            policy.user_mut(k).iter_mut().for_each(|p| *p *= scale);
        }
    }
    Ok(report_single(
        process,
        budget,
        &objective,
        policy,
        iterations,
        1e-6,
    ))
}

fn report_single(
    process: &FadingProcess,
    budget: &PowerBudget,
    objective: &RateFunction,
    policy: PowerPolicy,
    iterations: usize,
    tol: f64,
) -> OptimizerReport {
    let residual = kkt_residual(process, &policy, objective, budget);
    OptimizerReport {
        value: objective.value(&policy),
        policy,
        iterations,
        kkt_residual: residual,
        converged: residual <= tol,
    }
}

/// KKT residual of `policy` for maximizing a single differentiable objective.
pub fn kkt_residual(
    process: &FadingProcess,
    policy: &PowerPolicy,
    objective: &RateFunction,
    budget: &PowerBudget,
) -> f64 {
    let grad = objective.gradient(policy);
    kkt::residual_from_gradient(process, policy, budget, &grad)
}

/// KKT residual of `policy` for maximizing `min_m F_m`, with the multipliers
/// on the binding objectives chosen to minimize the residual.
pub fn kkt_residual_min(
    process: &FadingProcess,
    policy: &PowerPolicy,
    objectives: &[RateFunction],
    budget: &PowerBudget,
) -> f64 {
    let groups = [MinGroup {
        weight: 1.0,
        members: objectives.to_vec(),
    }];
    kkt::best_weight_residual(process, policy, budget, &groups, None)
}

/// KKT residual for `sum_g c_g min_m F_gm`.
pub fn kkt_residual_groups(
    process: &FadingProcess,
    policy: &PowerPolicy,
    groups: &[MinGroup],
    budget: &PowerBudget,
) -> f64 {
    kkt::best_weight_residual(process, policy, budget, groups, None)
}

/// Value of `sum_g c_g min_m F_gm` at a policy.
pub fn groups_value(groups: &[MinGroup], policy: &PowerPolicy) -> f64 {
    supergradient::objective(groups, &policy.p1, &policy.p2)
}

/// Maximizes `min_m F_m(P)` over feasible policies; each `F_m` must be concave.
pub fn maximize_min_concave(
    process: &FadingProcess,
    objectives: &[RateFunction],
    budget: &PowerBudget,
    tol: f64,
) -> Result<OptimizerReport> {
    maximize_min_concave_with(process, objectives, budget, &SolverOptions::with_tol(tol))
}

pub fn maximize_min_concave_with(
    process: &FadingProcess,
    objectives: &[RateFunction],
    budget: &PowerBudget,
    options: &SolverOptions,
) -> Result<OptimizerReport> {
    if objectives.is_empty() {
        return Err(Error::InvalidArgument("no objectives given".into()));
    }
    let groups = [MinGroup {
        weight: 1.0,
        members: objectives.to_vec(),
    }];
    maximize_groups(process, &groups, budget, options)
}

/// Maximizes `sum_g c_g min_m F_gm(P)`; covers max-min problems (one group)
/// and expectations of per-state minima (one group per state).
pub fn maximize_groups(
    process: &FadingProcess,
    groups: &[MinGroup],
    budget: &PowerBudget,
    options: &SolverOptions,
) -> Result<OptimizerReport> {
    options.check()?;
    if groups.is_empty() || groups.iter().any(|g| g.members.is_empty()) {
        return Err(Error::InvalidArgument("empty objective group".into()));
    }
    for g in groups {
        if !(g.weight > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "group weight must be positive, got {}",
                g.weight
            )));
        }
        for f in &g.members {
            if let Some(t) = f.terms.iter().find(|t| t.state >= process.len()) {
                return Err(Error::ShapeMismatch {
                    expected: process.len(),
                    got: t.state + 1,
                });
            }
        }
    }
    let use_barrier = match options.method {
        Method::Barrier => true,
        Method::Supergradient => false,
        Method::Auto => process.len() <= AUTO_BARRIER_MAX_STATES,
    };
    if use_barrier {
        match barrier::solve(process, groups, budget) {
            Ok(sol) => {
                let mut residual =
                    kkt::weighted_residual(process, &sol.policy, budget, groups, &sol.member_weights);
                if residual > options.tol {
                    residual = residual.min(kkt::best_weight_residual(
                        process,
                        &sol.policy,
                        budget,
                        groups,
                        Some(&sol.member_weights),
                    ));
                }
                let converged = residual <= options.tol;
                if converged || options.method == Method::Barrier {
                    return Ok(finish(
                        process,
                        budget,
                        groups,
                        sol.policy,
                        sol.iterations,
                        residual,
                        options.tol,
                    ));
                }
            }
            Err(e) if options.method == Method::Barrier => return Err(e),
            Err(_) => {}
        }
    }
    let sol = supergradient::solve(process, groups, budget, options.max_iterations);
    let residual = kkt::best_weight_residual(process, &sol.policy, budget, groups, None);
    Ok(finish(
        process,
        budget,
        groups,
        sol.policy,
        sol.iterations,
        residual,
        options.tol,
    ))
}

fn finish(
    process: &FadingProcess,
    budget: &PowerBudget,
    groups: &[MinGroup],
    policy: PowerPolicy,
    iterations: usize,
    residual: f64,
    tol: f64,
) -> OptimizerReport {
    debug_assert!(validate_policy(process, &policy, budget)
        .map(|r| r.feasible())
        .unwrap_or(false));
    OptimizerReport {
        value: groups_value(groups, &policy),
        policy,
        iterations,
        kkt_residual: residual,
        converged: residual <= tol,
    }
}

/// Maximizes one concave rate function.
pub fn maximize_concave(
    process: &FadingProcess,
    objective: &RateFunction,
    budget: &PowerBudget,
    options: &SolverOptions,
) -> Result<OptimizerReport> {
    maximize_min_concave_with(process, std::slice::from_ref(objective), budget, options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{equiprobable, FadingState};

    fn st(g11: f64, g12: f64, g21: f64, g22: f64) -> FadingState {
        FadingState::new(g11, g12, g21, g22).unwrap()
    }

    #[test]
    fn waterfill_examples() {
        let r = waterfill(&[(1.0, 1.0)], 1.0).unwrap();
        assert!((r.powers[0] - 1.0).abs() < 1e-12);
        assert!((r.achieved_rate - 1.0).abs() < 1e-12);

        let r = waterfill(&[(1.0, 0.5), (4.0, 0.5)], 1.0).unwrap();
        assert!((r.water_level - 1.625).abs() < 1e-12);
        assert!((r.powers[0] - 0.625).abs() < 1e-12);
        assert!((r.powers[1] - 1.375).abs() < 1e-12);
        let expected = 0.5 * (1.625f64.log2() + 6.5f64.log2());
        assert!((r.achieved_rate - expected).abs() < 1e-12);

        let r = waterfill(&[(1.0, 0.5), (4.0, 0.5)], 0.1).unwrap();
        assert_eq!(r.powers[0], 0.0);
        assert!((r.powers[1] - 0.2).abs() < 1e-12);
        assert!((r.water_level - 0.45).abs() < 1e-12);

        assert!(matches!(waterfill(&[(0.0, 1.0)], 1.0), Err(Error::AllGainsZero)));
        let z = waterfill(&[(2.0, 1.0)], 0.0).unwrap();
        assert_eq!(z.powers, vec![0.0]);
    }

    #[test]
    fn mac_examples() {
        let p = equiprobable(vec![st(4.0, 1.0, 0.0, 0.0), st(1.0, 4.0, 0.0, 0.0)]).unwrap();
        let b = PowerBudget::new(1.0, 1.0).unwrap();
        let r = mac_opportunistic_waterfill(&p, Receiver::Rx1, &b).unwrap();
        assert!((r.policy.p1[0] - 2.0).abs() < 1e-9 && r.policy.p1[1] == 0.0);
        assert!((r.policy.p2[1] - 2.0).abs() < 1e-9 && r.policy.p2[0] == 0.0);
        assert!((r.value - 9f64.log2()).abs() < 1e-9);
        assert!(r.converged);

        let single = equiprobable(vec![st(1.0, 0.0, 0.0, 0.0)]).unwrap();
        let r = mac_opportunistic_waterfill(&single, Receiver::Rx1, &b).unwrap();
        assert!((r.policy.p1[0] - 1.0).abs() < 1e-9);
        assert!((r.value - 1.0).abs() < 1e-9);

        // equal gains pool the two budgets
        let same = equiprobable(vec![st(1.0, 1.0, 0.0, 0.0), st(3.0, 3.0, 0.0, 0.0)]).unwrap();
        let b = PowerBudget::new(1.0, 0.5).unwrap();
        let r = mac_opportunistic_waterfill(&same, Receiver::Rx1, &b).unwrap();
        let pooled = waterfill(&[(1.0, 0.5), (3.0, 0.5)], 1.5).unwrap();
        assert!((r.value - pooled.achieved_rate).abs() < 1e-9, "{:?} {:?}", r, pooled);
        assert!(validate_policy(&same, &r.policy, &b).unwrap().feasible());

        let none = equiprobable(vec![st(0.0, 0.0, 1.0, 1.0)]).unwrap();
        assert!(matches!(
            mac_opportunistic_waterfill(&none, Receiver::Rx1, &b),
            Err(Error::AllGainsZero)
        ));
    }

    #[test]
    fn min_concave_matches_waterfill() {
        let p = equiprobable(vec![st(1.0, 0.0, 0.0, 1.0), st(4.0, 0.0, 0.0, 1.0)]).unwrap();
        let b = PowerBudget::new(1.0, 1.0).unwrap();
        let r = maximize_min_concave(&p, &[rate::single_user(&p, 0, 0)], &b, 1e-6).unwrap();
        assert!(r.converged);
        assert!((r.value - 0.5 * (1.625f64.log2() + 6.5f64.log2())).abs() < 1e-6);

        let constant = RateFunction::constant(0.7);
        let r = maximize_min_concave(&p, &[constant], &b, 1e-6).unwrap();
        assert!((r.value - 0.7).abs() < 1e-15);
        assert!(validate_policy(&p, &r.policy, &b).unwrap().feasible());
    }

    #[test]
    fn kkt_examples() {
        let p = equiprobable(vec![st(1.0, 0.0, 0.0, 1.0), st(4.0, 0.0, 0.0, 1.0)]).unwrap();
        let b = PowerBudget::new(1.0, 0.0).unwrap();
        let f = rate::single_user(&p, 0, 0);
        let mut pol = PowerPolicy::zeros(2);
        pol.p1 = vec![0.625, 1.375];
        assert!(kkt_residual(&p, &pol, &f, &b) <= 1e-6);
        pol.p1 = vec![0.725, 1.275];
        assert!(kkt_residual(&p, &pol, &f, &b) > 1e-3);
        let zero = PowerBudget::new(0.0, 0.0).unwrap();
        assert_eq!(kkt_residual(&p, &PowerPolicy::zeros(2), &f, &zero), 0.0);
    }

    #[test]
    fn supergradient_agrees_with_barrier() {
        let p = equiprobable(vec![st(1.0, 2.0, 0.5, 1.5), st(2.0, 0.3, 3.0, 0.7)]).unwrap();
        let b = PowerBudget::new(1.0, 1.5).unwrap();
        let objectives = [
            rate::direct_sum(&p),
            rate::mac_sum(&p, Receiver::Rx1),
            rate::mac_sum(&p, Receiver::Rx2),
        ];
        let barrier = maximize_min_concave_with(
            &p,
            &objectives,
            &b,
            &SolverOptions {
                method: Method::Barrier,
                ..SolverOptions::default()
            },
        )
        .unwrap();
        let sg = maximize_min_concave_with(
            &p,
            &objectives,
            &b,
            &SolverOptions {
                method: Method::Supergradient,
                ..SolverOptions::default()
            },
        )
        .unwrap();
        assert!(barrier.converged);
        assert!((barrier.value - sg.value).abs() < 1e-3, "{} vs {}", barrier.value, sg.value);
        assert!(sg.value <= barrier.value + 1e-9);
    }
}
