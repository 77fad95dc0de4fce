//! Projected supergradient ascent with iterate averaging for
//! `max sum_g c_g min_m F_gm(P)` over the average-power constraint set.

use crate::allocate::MinGroup;
use crate::channel::{FadingProcess, PowerBudget, PowerPolicy};

pub(crate) struct SupergradientSolution {
    pub policy: PowerPolicy,
    pub iterations: usize,
}

pub(crate) fn objective(groups: &[MinGroup], p1: &[f64], p2: &[f64]) -> f64 {
    groups
        .iter()
        .map(|g| {
            g.weight
                * g.members
                    .iter()
                    .map(|f| f.value_at(p1, p2))
                    .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

/// Supergradient of the objective: each group contributes the gradient of
/// its smallest member (lowest index on ties).
fn supergradient(groups: &[MinGroup], p1: &[f64], p2: &[f64], out: &mut [Vec<f64>; 2]) {
    for v in out.iter_mut() {
        v.iter_mut().for_each(|x| *x = 0.0);
    }
    for g in groups {
        let mut best = 0;
        let mut best_val = f64::INFINITY;
        for (m, f) in g.members.iter().enumerate() {
            let v = f.value_at(p1, p2);
            if v < best_val {
                best_val = v;
                best = m;
            }
        }
        if let Some(f) = g.members.get(best) {
            f.add_gradient(p1, p2, g.weight, out);
        }
    }
}

/// Projection onto `{y >= 0, sum_i pi_i y_i <= budget}` in the `pi`-weighted
/// norm: `y = (x - theta)^+` with the smallest feasible `theta >= 0`.
pub(crate) fn project(x: &mut [f64], probs: &[f64], mask: &[bool], budget: f64) {
    let used = |theta: f64, x: &[f64]| -> f64 {
        x.iter()
            .zip(probs)
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|((v, p), _)| p * (v - theta).max(0.0))
            .sum()
    };
    for (v, &m) in x.iter_mut().zip(mask) {
        if !m {
            *v = 0.0;
        }
    }
    if used(0.0, x) <= budget {
        for v in x.iter_mut() {
            *v = v.max(0.0);
        }
        return;
    }
    let mut lo = 0.0;
    let mut hi = x.iter().copied().fold(0.0, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if used(mid, x) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * hi.max(1.0) {
            break;
        }
    }
    for v in x.iter_mut() {
        *v = (*v - hi).max(0.0);
    }
}

pub(crate) fn solve(
    process: &FadingProcess,
    groups: &[MinGroup],
    budget: &PowerBudget,
    max_iterations: usize,
) -> SupergradientSolution {
    let n = process.len();
    let probs = process.probs();
    let b = budget.as_array();
    let mut mask = [vec![false; n], vec![false; n]];
    for (k, m) in mask.iter_mut().enumerate() {
        if b[k] <= 0.0 {
            continue;
        }
        for (i, flag) in m.iter_mut().enumerate() {
            *flag = groups
                .iter()
                .any(|g| g.members.iter().any(|f| f.uses(k, i)));
        }
    }
    let mut x = [vec![0.0; n], vec![0.0; n]];
    for k in 0..2 {
        for i in 0..n {
            if mask[k][i] {
                x[k][i] = b[k];
            }
        }
    }
    let c = b[0].max(b[1]);
    let mut avg = x.clone();
    let mut weight_sum = 0.0;
    let mut best = x.clone();
    let mut best_val = objective(groups, &x[0], &x[1]);
    let mut grad = [vec![0.0; n], vec![0.0; n]];
    let mut iterations = 0;
    if c <= 0.0 {
        return SupergradientSolution {
            policy: PowerPolicy {
                p1: x[0].clone(),
                p2: x[1].clone(),
            },
            iterations,
        };
    }

    for t in 1..=max_iterations {
        iterations = t;
        supergradient(groups, &x[0], &x[1], &mut grad);
        // ascent direction in the probability-weighted geometry
        let mut norm = 0.0;
        for k in 0..2 {
            for i in 0..n {
                grad[k][i] = if mask[k][i] { grad[k][i] / probs[i] } else { 0.0 };
                norm += probs[i] * grad[k][i] * grad[k][i];
            }
        }
        let norm = norm.sqrt();
        if norm == 0.0 {
            break;
        }
        let step = c / (t as f64).sqrt();
        for k in 0..2 {
            for i in 0..n {
                x[k][i] += step * grad[k][i] / norm;
            }
            project(&mut x[k], probs, &mask[k], b[k]);
        }
        weight_sum += step;
        for k in 0..2 {
            for i in 0..n {
                avg[k][i] += step / weight_sum * (x[k][i] - avg[k][i]);
            }
        }
        let v = objective(groups, &x[0], &x[1]);
        if v > best_val {
            best_val = v;
            best = x.clone();
        }
    }
    let avg_val = objective(groups, &avg[0], &avg[1]);
    let chosen = if avg_val >= best_val { avg } else { best };
    let [p1, p2] = chosen;
    SupergradientSolution {
        policy: PowerPolicy { p1, p2 },
        iterations,
    }
}
