//! KKT residuals for average-power-constrained maximization.
//!
//! With `d_k(i) = (dF/dP_k(i)) / pi_i`, optimality requires a multiplier
//! `lambda_k >= 0` with `d_k(i) = lambda_k` where `P_k(i) > 0`,
//! `d_k(i) <= lambda_k` where `P_k(i) = 0`, and `lambda_k (B_k - E[P_k]) = 0`.
//! The residual is the probability-weighted RMS violation of the first two
//! conditions plus the complementary-slackness and feasibility violations.

use crate::allocate::MinGroup;
use crate::channel::{FadingProcess, PowerBudget, PowerPolicy};

fn multiplier(d: &[f64], powers: &[f64], probs: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for ((di, &p), &pi) in d.iter().zip(powers).zip(probs) {
        if p > 0.0 {
            num += pi * di;
            den += pi;
        }
    }
    if den > 0.0 {
        (num / den).max(0.0)
    } else {
        d.iter().copied().fold(0.0, f64::max)
    }
}

fn stationarity(d: &[f64], powers: &[f64], probs: &[f64], lambda: f64) -> f64 {
    d.iter()
        .zip(powers)
        .zip(probs)
        .map(|((di, &p), &pi)| {
            let r = if p > 0.0 { di - lambda } else { (di - lambda).max(0.0) };
            pi * r * r
        })
        .sum()
}

/// Residual for the gradient `grad` of the (combined) objective at `policy`.
pub(crate) fn residual_from_gradient(
    process: &FadingProcess,
    policy: &PowerPolicy,
    budget: &PowerBudget,
    grad: &[Vec<f64>; 2],
) -> f64 {
    let probs = process.probs();
    let mut squared = 0.0;
    let mut extra = 0.0;
    for k in 0..2 {
        let powers = policy.user(k);
        let d: Vec<f64> = grad[k].iter().zip(probs).map(|(g, p)| g / p).collect();
        let lambda = multiplier(&d, powers, probs);
        squared += stationarity(&d, powers, probs, lambda);
        let mean: f64 = powers.iter().zip(probs).map(|(p, pi)| p * pi).sum();
        let slack = budget.get(k) - mean;
        extra += lambda * slack.max(0.0) + (-slack).max(0.0);
        extra += powers.iter().map(|p| (-p).max(0.0)).sum::<f64>();
    }
    squared.sqrt() + extra
}

/// Residual of a `max sum_g c_g min_m F_gm` problem with explicit member
/// weights, normalized to sum to `c_g` within each group.
pub(crate) fn weighted_residual(
    process: &FadingProcess,
    policy: &PowerPolicy,
    budget: &PowerBudget,
    groups: &[MinGroup],
    weights: &[Vec<f64>],
) -> f64 {
    let n = process.len();
    let mut grad = [vec![0.0; n], vec![0.0; n]];
    let mut gaps = 0.0;
    for (g, w) in groups.iter().zip(weights) {
        let total: f64 = w.iter().sum();
        if total <= 0.0 || g.members.is_empty() {
            continue;
        }
        let values: Vec<f64> = g.members.iter().map(|f| f.value(policy)).collect();
        let low = values.iter().copied().fold(f64::INFINITY, f64::min);
        for ((f, &wm), v) in g.members.iter().zip(w).zip(&values) {
            let wm = wm * g.weight / total;
            f.add_gradient(&policy.p1, &policy.p2, wm, &mut grad);
            gaps += wm * (v - low);
        }
    }
    residual_from_gradient(process, policy, budget, &grad) + gaps
}

/// Euclidean projection onto `{w >= 0, sum w = total}`.
fn project_simplex(w: &mut [f64], total: f64) {
    let mut sorted: Vec<f64> = w.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &s) in sorted.iter().enumerate() {
        cum += s;
        let t = (cum - total) / (j as f64 + 1.0);
        if s - t > 0.0 {
            theta = t;
        }
    }
    for x in w.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

/// Residual of a `max sum_g c_g min_m F_gm` problem, with the member weights
/// chosen to minimize the stationarity violation over the near-binding members.
/// `init` optionally warm-starts the weights (one vector per group).
pub(crate) fn best_weight_residual(
    process: &FadingProcess,
    policy: &PowerPolicy,
    budget: &PowerBudget,
    groups: &[MinGroup],
    init: Option<&[Vec<f64>]>,
) -> f64 {
    let n = process.len();
    let probs = process.probs();
    // near-binding members and their scaled gradients D = grad / pi
    let mut members: Vec<(usize, usize, [Vec<f64>; 2], f64)> = Vec::new();
    for (g, group) in groups.iter().enumerate() {
        let values: Vec<f64> = group.members.iter().map(|f| f.value(policy)).collect();
        let low = values.iter().copied().fold(f64::INFINITY, f64::min);
        let band = 1e-6 * low.abs().max(1.0);
        for (m, f) in group.members.iter().enumerate() {
            if values[m] - low <= band {
                let mut d = f.gradient(policy);
                for v in d.iter_mut() {
                    for (x, p) in v.iter_mut().zip(probs) {
                        *x /= p;
                    }
                }
                members.push((g, m, d, values[m] - low));
            }
        }
    }
    let mut w: Vec<f64> = members
        .iter()
        .map(|(g, m, _, _)| {
            let count = members.iter().filter(|(h, _, _, _)| h == g).count();
            match init {
                Some(init) => {
                    let total: f64 = init[*g].iter().sum();
                    if total > 0.0 {
                        init[*g][*m].max(0.0) * groups[*g].weight / total
                    } else {
                        groups[*g].weight / count as f64
                    }
                }
                None => groups[*g].weight / count as f64,
            }
        })
        .collect();
    let project = |w: &mut Vec<f64>| {
        for (g, group) in groups.iter().enumerate() {
            let idx: Vec<usize> = (0..members.len()).filter(|&j| members[j].0 == g).collect();
            let mut sub: Vec<f64> = idx.iter().map(|&j| w[j]).collect();
            project_simplex(&mut sub, group.weight);
            for (&j, v) in idx.iter().zip(sub) {
                w[j] = v;
            }
        }
    };
    project(&mut w);

    let active: [Vec<bool>; 2] = [
        policy.p1.iter().map(|&p| p > 0.0).collect(),
        policy.p2.iter().map(|&p| p > 0.0).collect(),
    ];
    let active_mass: [f64; 2] = [0, 1].map(|k| {
        active[k]
            .iter()
            .zip(probs)
            .filter(|(a, _)| **a)
            .map(|(_, p)| p)
            .sum()
    });

    let combined = |w: &[f64]| -> [Vec<f64>; 2] {
        let mut d = [vec![0.0; n], vec![0.0; n]];
        for (wm, (_, _, dm, _)) in w.iter().zip(&members) {
            for k in 0..2 {
                for i in 0..n {
                    d[k][i] += wm * dm[k][i];
                }
            }
        }
        d
    };
    let value = |w: &[f64]| -> f64 {
        let d = combined(w);
        (0..2)
            .map(|k| {
                let lambda = multiplier(&d[k], policy.user(k), probs);
                stationarity(&d[k], policy.user(k), probs, lambda)
            })
            .sum()
    };

    let lipschitz: f64 = 2.0
        * members
            .iter()
            .map(|(_, _, dm, _)| {
                (0..2)
                    .map(|k| dm[k].iter().zip(probs).map(|(x, p)| p * x * x).sum::<f64>())
                    .sum::<f64>()
            })
            .sum::<f64>()
            .max(1e-300);
    let step = 1.0 / lipschitz;

    let gradient = |w: &[f64]| -> Vec<f64> {
        let d = combined(w);
        let mut gw = vec![0.0; w.len()];
        for k in 0..2 {
            let powers = policy.user(k);
            let lambda_raw = if active_mass[k] > 0.0 {
                d[k].iter()
                    .zip(&active[k])
                    .zip(probs)
                    .filter(|((_, a), _)| **a)
                    .map(|((x, _), p)| p * x)
                    .sum::<f64>()
                    / active_mass[k]
            } else {
                0.0
            };
            let lambda = multiplier(&d[k], powers, probs);
            let clipped = active_mass[k] == 0.0 || lambda_raw < 0.0;
            for (j, (_, _, dm, _)) in members.iter().enumerate() {
                let dlam = if clipped {
                    0.0
                } else {
                    dm[k].iter()
                        .zip(&active[k])
                        .zip(probs)
                        .filter(|((_, a), _)| **a)
                        .map(|((x, _), p)| p * x)
                        .sum::<f64>()
                        / active_mass[k]
                };
                let mut acc = 0.0;
                for i in 0..n {
                    let r = d[k][i] - lambda;
                    if active[k][i] || r > 0.0 {
                        acc += 2.0 * probs[i] * r * (dm[k][i] - dlam);
                    }
                }
                gw[j] += acc;
            }
        }
        gw
    };

    // accelerated projected gradient, keeping the best iterate
    let mut best = w.clone();
    let mut best_value = value(&w);
    let mut prev = w.clone();
    let mut t = 1.0f64;
    let mut y = w.clone();
    let mut stall = 0;
    for _ in 0..5000 {
        let gw = gradient(&y);
        let mut next: Vec<f64> = y.iter().zip(&gw).map(|(x, g)| x - step * g).collect();
        project(&mut next);
        let nv = value(&next);
        if nv < best_value * (1.0 - 1e-12) {
            best_value = nv;
            best = next.clone();
            stall = 0;
        } else {
            stall += 1;
            if stall > 200 {
                break;
            }
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = next
            .iter()
            .zip(&prev)
            .map(|(a, b)| a + (t - 1.0) / t_next * (a - b))
            .collect();
        prev = next;
        t = t_next;
        if best_value <= 1e-30 {
            break;
        }
    }
    let w = best;

    let mut grad = [vec![0.0; n], vec![0.0; n]];
    let mut gaps = 0.0;
    for (wm, (_, _, dm, gap)) in w.iter().zip(&members) {
        for k in 0..2 {
            for i in 0..n {
                grad[k][i] += wm * dm[k][i] * probs[i];
            }
        }
        gaps += wm * gap;
    }
    residual_from_gradient(process, policy, budget, &grad) + gaps
}
