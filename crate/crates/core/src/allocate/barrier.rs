//! Primal log-barrier interior-point method for
//! `max sum_g c_g min_m F_gm(P)` subject to `E[P_k] <= B_k`, `P >= 0`,
//! with every `F_gm` concave.
//!
//! The epigraph form `max sum_g c_g t_g` s.t. `F_gm(P) >= t_g` is solved along
//! the central path with damped Newton steps on dense matrices.

use nalgebra::{DMatrix, DVector};

use crate::allocate::MinGroup;
use crate::channel::{FadingProcess, PowerBudget, PowerPolicy};
use crate::error::{Error, Result};

/// Absolute duality-gap target in bits.
const GAP_TARGET: f64 = 1e-10;
const TAU_GROWTH: f64 = 20.0;
const MAX_NEWTON: usize = 3000;

pub(crate) struct BarrierSolution {
    pub policy: PowerPolicy,
    /// `w_gm = 1 / (tau u_gm)`; per group they sum to `c_g` on the central path.
    pub member_weights: Vec<Vec<f64>>,
    pub iterations: usize,
}

struct Layout<'a> {
    probs: &'a [f64],
    n_states: usize,
    vars: Vec<(usize, usize)>,
    user_vars: [Vec<usize>; 2],
    budget: [f64; 2],
    groups: &'a [MinGroup],
}

impl<'a> Layout<'a> {
    fn new(process: &'a FadingProcess, groups: &'a [MinGroup], budget: &PowerBudget) -> Self {
        let n_states = process.len();
        let budget = budget.as_array();
        let mut vars = Vec::new();
        let mut user_vars = [Vec::new(), Vec::new()];
        for (k, uv) in user_vars.iter_mut().enumerate() {
            if budget[k] <= 0.0 {
                continue;
            }
            for i in 0..n_states {
                let used = groups
                    .iter()
                    .any(|g| g.members.iter().any(|f| f.uses(k, i)));
                if used {
                    uv.push(vars.len());
                    vars.push((k, i));
                }
            }
        }
        Layout {
            probs: process.probs(),
            n_states,
            vars,
            user_vars,
            budget,
            groups,
        }
    }

    fn nv(&self) -> usize {
        self.vars.len()
    }

    fn dim(&self) -> usize {
        self.vars.len() + self.groups.len()
    }

    fn barrier_count(&self) -> usize {
        let members: usize = self.groups.iter().map(|g| g.members.len()).sum();
        let budgets = self.user_vars.iter().filter(|v| !v.is_empty()).count();
        members + self.nv() + budgets
    }

    fn powers(&self, z: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut p = [vec![0.0; self.n_states], vec![0.0; self.n_states]];
        for (v, &(k, i)) in self.vars.iter().enumerate() {
            p[k][i] = z[v];
        }
        let [p1, p2] = p;
        (p1, p2)
    }

    fn slack(&self, z: &[f64], k: usize) -> f64 {
        let used: f64 = self.user_vars[k]
            .iter()
            .map(|&v| self.probs[self.vars[v].1] * z[v])
            .sum();
        self.budget[k] - used
    }

    fn initial_point(&self) -> Vec<f64> {
        let mut z = vec![0.0; self.dim()];
        for (v, &(k, _)) in self.vars.iter().enumerate() {
            z[v] = 0.5 * self.budget[k];
        }
        let (p1, p2) = self.powers(&z);
        for (g, group) in self.groups.iter().enumerate() {
            let low = group
                .members
                .iter()
                .map(|f| f.value_at(&p1, &p2))
                .fold(f64::INFINITY, f64::min);
            z[self.nv() + g] = low - 1.0;
        }
        z
    }

    /// Barrier objective, `None` outside the open feasible set.
    fn phi(&self, z: &[f64], tau: f64) -> Option<f64> {
        let nv = self.nv();
        let mut total = 0.0;
        for &x in &z[..nv] {
            if x <= 0.0 {
                return None;
            }
            total += x.ln();
        }
        for k in 0..2 {
            if !self.user_vars[k].is_empty() {
                let s = self.slack(z, k);
                if s <= 0.0 {
                    return None;
                }
                total += s.ln();
            }
        }
        let (p1, p2) = self.powers(z);
        for (g, group) in self.groups.iter().enumerate() {
            let t = z[nv + g];
            total += tau * group.weight * t;
            for f in &group.members {
                if f.min_arg(&p1, &p2) <= 0.0 {
                    return None;
                }
                let u = f.value_at(&p1, &p2) - t;
                if u <= 0.0 || !u.is_finite() {
                    return None;
                }
                total += u.ln();
            }
        }
        Some(total)
    }

    fn derivatives(&self, z: &[f64], tau: f64) -> (DVector<f64>, DMatrix<f64>) {
        let nv = self.nv();
        let n = self.dim();
        let mut grad = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);
        let (p1, p2) = self.powers(z);

        let mut index = [vec![usize::MAX; self.n_states], vec![usize::MAX; self.n_states]];
        for (v, &(k, i)) in self.vars.iter().enumerate() {
            index[k][i] = v;
        }

        let mut fg = [vec![0.0; self.n_states], vec![0.0; self.n_states]];
        let mut blocks = vec![[0.0; 3]; self.n_states];
        let mut sparse: Vec<(usize, f64)> = Vec::new();
        for (g, group) in self.groups.iter().enumerate() {
            let tg = nv + g;
            grad[tg] += tau * group.weight;
            for f in &group.members {
                let u = f.value_at(&p1, &p2) - z[tg];
                for v in fg.iter_mut() {
                    v.iter_mut().for_each(|x| *x = 0.0);
                }
                blocks.iter_mut().for_each(|b| *b = [0.0; 3]);
                f.add_gradient(&p1, &p2, 1.0, &mut fg);
                f.add_hessian_blocks(&p1, &p2, 1.0, &mut blocks);

                sparse.clear();
                for (v, &(k, i)) in self.vars.iter().enumerate() {
                    if fg[k][i] != 0.0 {
                        sparse.push((v, fg[k][i]));
                    }
                }
                sparse.push((tg, -1.0));
                for &(a, va) in &sparse {
                    grad[a] += va / u;
                    for &(b, vb) in &sparse {
                        hess[(a, b)] -= va * vb / (u * u);
                    }
                }
                for (i, b) in blocks.iter().enumerate() {
                    let (i1, i2) = (index[0][i], index[1][i]);
                    if i1 != usize::MAX {
                        hess[(i1, i1)] += b[0] / u;
                    }
                    if i2 != usize::MAX {
                        hess[(i2, i2)] += b[2] / u;
                    }
                    if i1 != usize::MAX && i2 != usize::MAX {
                        hess[(i1, i2)] += b[1] / u;
                        hess[(i2, i1)] += b[1] / u;
                    }
                }
            }
        }
        for v in 0..nv {
            grad[v] += 1.0 / z[v];
            hess[(v, v)] -= 1.0 / (z[v] * z[v]);
        }
        for k in 0..2 {
            if self.user_vars[k].is_empty() {
                continue;
            }
            let s = self.slack(z, k);
            for &a in &self.user_vars[k] {
                let pa = self.probs[self.vars[a].1];
                grad[a] -= pa / s;
                for &b in &self.user_vars[k] {
                    let pb = self.probs[self.vars[b].1];
                    hess[(a, b)] -= pa * pb / (s * s);
                }
            }
        }
        (grad, hess)
    }
}

/// Solves `(-H) d = g` by Cholesky, adding diagonal regularization if needed.
fn newton_direction(grad: &DVector<f64>, hess: &DMatrix<f64>) -> Result<DVector<f64>> {
    let neg = -hess;
    let scale = (0..neg.nrows())
        .map(|i| neg[(i, i)].abs())
        .fold(0.0, f64::max)
        .max(1e-300);
    let mut shift = 0.0;
    for _ in 0..40 {
        let mut m = neg.clone();
        if shift > 0.0 {
            for i in 0..m.nrows() {
                m[(i, i)] += shift;
            }
        }
        if let Some(ch) = m.cholesky() {
            return Ok(ch.solve(grad));
        }
        shift = if shift == 0.0 { 1e-14 * scale } else { shift * 10.0 };
    }
    Err(Error::Singular)
}

pub(crate) fn solve(
    process: &FadingProcess,
    groups: &[MinGroup],
    budget: &PowerBudget,
) -> Result<BarrierSolution> {
    let layout = Layout::new(process, groups, budget);
    let m = layout.barrier_count() as f64;
    let mut z = layout.initial_point();
    let mut tau = 1.0;
    let mut iterations = 0;

    'outer: loop {
        loop {
            if iterations >= MAX_NEWTON {
                break 'outer;
            }
            iterations += 1;
            let (grad, hess) = layout.derivatives(&z, tau);
            let d = newton_direction(&grad, &hess)?;
            let decrement = grad.dot(&d);
            if !decrement.is_finite() {
                return Err(Error::NonConvergence {
                    what: "barrier Newton step",
                    iterations,
                });
            }
            if decrement * 0.5 <= 1e-10 {
                break;
            }
            let phi0 = layout.phi(&z, tau).ok_or(Error::NonConvergence {
                what: "barrier feasibility",
                iterations,
            })?;
            let mut step = 1.0;
            let mut accepted = false;
            let mut trial = z.clone();
            for _ in 0..80 {
                for (j, t) in trial.iter_mut().enumerate() {
                    *t = z[j] + step * d[j];
                }
                if let Some(phi) = layout.phi(&trial, tau) {
                    if phi >= phi0 + 0.01 * step * decrement {
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            let moved = trial
                .iter()
                .zip(&z)
                .any(|(a, b)| (a - b).abs() > 1e-15 * b.abs().max(1.0));
            if !accepted || !moved {
                // Round-off floor reached on this central-path segment.
                break;
            }
            std::mem::swap(&mut z, &mut trial);
        }
        if m / tau <= GAP_TARGET {
            break;
        }
        tau *= TAU_GROWTH;
    }

    let (p1, p2) = layout.powers(&z);
    let nv = layout.nv();
    let member_weights = groups
        .iter()
        .enumerate()
        .map(|(g, group)| {
            group
                .members
                .iter()
                .map(|f| 1.0 / (tau * (f.value_at(&p1, &p2) - z[nv + g])))
                .collect()
        })
        .collect();

    let mut policy = PowerPolicy { p1, p2 };
    snap_small_powers(&mut policy, budget);
    Ok(BarrierSolution {
        policy,
        member_weights,
        iterations,
    })
}

/// Zeroes powers left at barrier scale on inactive states.
pub(crate) fn snap_small_powers(policy: &mut PowerPolicy, budget: &PowerBudget) {
    for k in 0..2 {
        let floor = 1e-7 * budget.get(k).max(1.0);
        for p in policy.user_mut(k).iter_mut() {
            if *p < floor {
                *p = 0.0;
            }
        }
    }
}
