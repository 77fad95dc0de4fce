//! Compound multiple-access rate machinery.
//!
//! Both receivers decode both messages, so a rate pair is achievable with a
//! policy `P` when it lies in the intersection of the two receivers' MAC
//! pentagons. The largest sum rate in that intersection is
//! `min(S1, S2, S3a, S3b)`: both users over their direct links, both over
//! their cross links, and the two receivers' sum caps.

use std::fmt;

use serde::Serialize;

use crate::allocate::rate::{cross_sum, direct_sum, mac_sum, single_user, RateFunction};
use crate::allocate::{
    mac_opportunistic_waterfill, maximize_concave, maximize_min_concave_with, per_user_waterfill,
    MinGroup, SolverOptions,
};
use crate::channel::{FadingProcess, PowerBudget, PowerPolicy, Receiver};
use crate::error::{Error, Result};

/// Absolute tolerance on the equalities and strict inequalities of the case conditions.
pub const CASE_TOL: f64 = 1e-9;
/// Largest disagreement tolerated between the case algorithm and direct maximization.
pub const CROSS_CHECK_TOL: f64 = 1e-3;

/// Looser tolerances tried, in order, when no case matches at [`CASE_TOL`].
const CASE_TOL_LADDER: [f64; 4] = [CASE_TOL, 1e-8, 1e-7, 1e-6];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MacPentagon {
    pub r1_cap: f64,
    pub r2_cap: f64,
    pub sum_cap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum CaseLabel {
    C1,
    C2,
    C3a,
    C3b,
    C3c,
    B1_3a,
    B1_3b,
    B1_3c,
    B2_3a,
    B2_3b,
    B2_3c,
}

impl CaseLabel {
    /// Order in which the case algorithm tries the cases.
    pub const ORDER: [CaseLabel; 11] = [
        CaseLabel::C1,
        CaseLabel::C2,
        CaseLabel::C3a,
        CaseLabel::C3b,
        CaseLabel::C3c,
        CaseLabel::B1_3a,
        CaseLabel::B2_3a,
        CaseLabel::B1_3b,
        CaseLabel::B2_3b,
        CaseLabel::B1_3c,
        CaseLabel::B2_3c,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CaseLabel::C1 => "C1",
            CaseLabel::C2 => "C2",
            CaseLabel::C3a => "C3a",
            CaseLabel::C3b => "C3b",
            CaseLabel::C3c => "C3c",
            CaseLabel::B1_3a => "B1_3a",
            CaseLabel::B1_3b => "B1_3b",
            CaseLabel::B1_3c => "B1_3c",
            CaseLabel::B2_3a => "B2_3a",
            CaseLabel::B2_3b => "B2_3b",
            CaseLabel::B2_3c => "B2_3c",
        }
    }

    /// The bounds that are minimal (and equal) in this case.
    fn binding(self) -> &'static [Bound] {
        use Bound::*;
        match self {
            CaseLabel::C1 => &[S1],
            CaseLabel::C2 => &[S2],
            CaseLabel::C3a => &[S3a],
            CaseLabel::C3b => &[S3b],
            CaseLabel::C3c => &[S3a, S3b],
            CaseLabel::B1_3a => &[S1, S3a],
            CaseLabel::B2_3a => &[S2, S3a],
            CaseLabel::B1_3b => &[S1, S3b],
            CaseLabel::B2_3b => &[S2, S3b],
            CaseLabel::B1_3c => &[S1, S3a, S3b],
            CaseLabel::B2_3c => &[S2, S3a, S3b],
        }
    }
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightPair {
    pub mu1: f64,
    pub mu2: f64,
}

impl WeightPair {
    pub fn new(mu1: f64, mu2: f64) -> Result<Self> {
        for (name, v) in [("mu1", mu1), ("mu2", mu2)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "weight {name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(WeightPair { mu1, mu2 })
    }
}

/// The four sum-rate functions of the case taxonomy at one policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CaseRates {
    pub s1: f64,
    pub s2: f64,
    pub s3a: f64,
    pub s3b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bound {
    S1,
    S2,
    S3a,
    S3b,
}

impl Bound {
    fn index(self) -> usize {
        match self {
            Bound::S1 => 0,
            Bound::S2 => 1,
            Bound::S3a => 2,
            Bound::S3b => 3,
        }
    }
}

/// The sum-rate functions taking part in a max-min problem; absent functions
/// never bind.
#[derive(Debug, Clone)]
pub(crate) struct CaseSystem {
    funcs: [Option<RateFunction>; 4],
}

impl CaseSystem {
    pub(crate) fn full(process: &FadingProcess) -> Self {
        CaseSystem {
            funcs: [
                Some(direct_sum(process)),
                Some(cross_sum(process)),
                Some(mac_sum(process, Receiver::Rx2)),
                Some(mac_sum(process, Receiver::Rx1)),
            ],
        }
    }

    /// Drops the cross-link pair when `cross` is set, and the sum caps of
    /// receivers not listed.
    pub(crate) fn without(mut self, cross: bool, receivers: &[Receiver]) -> Self {
        if cross {
            self.funcs[Bound::S2.index()] = None;
        }
        if !receivers.contains(&Receiver::Rx2) {
            self.funcs[Bound::S3a.index()] = None;
        }
        if !receivers.contains(&Receiver::Rx1) {
            self.funcs[Bound::S3b.index()] = None;
        }
        self
    }

    fn get(&self, b: Bound) -> Option<&RateFunction> {
        self.funcs[b.index()].as_ref()
    }

    pub(crate) fn present(&self) -> Vec<RateFunction> {
        self.funcs.iter().flatten().cloned().collect()
    }

    fn values(&self, policy: &PowerPolicy) -> [f64; 4] {
        let mut v = [f64::INFINITY; 4];
        for (slot, f) in v.iter_mut().zip(&self.funcs) {
            if let Some(f) = f {
                *slot = f.value(policy);
            }
        }
        v
    }

    fn supports(&self, case: CaseLabel) -> bool {
        case.binding().iter().all(|b| self.get(*b).is_some())
    }
}

fn label_from_values(v: [f64; 4], tol: f64) -> Option<CaseLabel> {
    let low = v.iter().copied().fold(f64::INFINITY, f64::min);
    if !low.is_finite() {
        return None;
    }
    let set: Vec<bool> = v.iter().map(|&x| x <= low + tol).collect();
    CaseLabel::ORDER.into_iter().find(|c| {
        let b = c.binding();
        (0..4).all(|i| set[i] == b.iter().any(|x| x.index() == i))
    })
}

fn check_policy(process: &FadingProcess, policy: &PowerPolicy) -> Result<()> {
    policy.check_shape(process)?;
    for k in 0..2 {
        for (i, &p) in policy.user(k).iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidPolicy {
                    state: i,
                    field: if k == 0 { "p1" } else { "p2" },
                    value: p,
                });
            }
        }
    }
    Ok(())
}

/// Fading-averaged pentagon caps at receiver `rx`.
pub fn mac_bounds(process: &FadingProcess, policy: &PowerPolicy, rx: Receiver) -> Result<MacPentagon> {
    check_policy(process, policy)?;
    let j = rx.index();
    Ok(MacPentagon {
        r1_cap: single_user(process, j, 0).value(policy),
        r2_cap: single_user(process, j, 1).value(policy),
        sum_cap: mac_sum(process, rx).value(policy),
    })
}

/// Per-user caps `A = min_j r1_cap_j`, `B = min_j r2_cap_j` and `Cs = min_j sum_cap_j`.
fn polytope(process: &FadingProcess, policy: &PowerPolicy) -> Result<(f64, f64, f64)> {
    let p1 = mac_bounds(process, policy, Receiver::Rx1)?;
    let p2 = mac_bounds(process, policy, Receiver::Rx2)?;
    Ok((
        p1.r1_cap.min(p2.r1_cap),
        p1.r2_cap.min(p2.r2_cap),
        p1.sum_cap.min(p2.sum_cap),
    ))
}

/// Largest `R1 + R2` over the intersection of both receivers' pentagons.
pub fn sum_rate_fixed_policy(process: &FadingProcess, policy: &PowerPolicy) -> Result<f64> {
    let (a, b, cs) = polytope(process, policy)?;
    Ok(cs.min(a + b))
}

pub fn case_sum_rates(process: &FadingProcess, policy: &PowerPolicy) -> Result<CaseRates> {
    check_policy(process, policy)?;
    let v = CaseSystem::full(process).values(policy);
    Ok(CaseRates {
        s1: v[0],
        s2: v[1],
        s3a: v[2],
        s3b: v[3],
    })
}

/// The case whose binding set equals the set of minimal sum-rate functions.
pub fn identify_case(process: &FadingProcess, policy: &PowerPolicy) -> Result<CaseLabel> {
    check_policy(process, policy)?;
    let v = CaseSystem::full(process).values(policy);
    label_from_values(v, CASE_TOL).ok_or_else(|| Error::NoCaseMatched { gap: spread(v) })
}

fn spread(v: [f64; 4]) -> f64 {
    let finite: Vec<f64> = v.iter().copied().filter(|x| x.is_finite()).collect();
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    (hi - lo) / hi.abs().max(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SumCapacity {
    pub value: f64,
    pub policy: PowerPolicy,
    pub case: CaseLabel,
    /// Value of the direct max-min maximization used as a cross-check.
    pub direct_value: f64,
}

/// Sum-capacity of the compound MAC with the same statistics as the channel.
pub fn sum_capacity(process: &FadingProcess, budget: &PowerBudget) -> Result<SumCapacity> {
    sum_capacity_with(process, budget, &SolverOptions::default())
}

pub fn sum_capacity_with(
    process: &FadingProcess,
    budget: &PowerBudget,
    options: &SolverOptions,
) -> Result<SumCapacity> {
    solve_cases(process, budget, &CaseSystem::full(process), options)
}

/// Maximizes `(1 - nu) fa + nu fb`, bisecting `nu` until `fa = fb`, then
/// mixes the bracketing policies to meet the equality to round-off.
fn equalize(
    process: &FadingProcess,
    budget: &PowerBudget,
    fa: &RateFunction,
    fb: &RateFunction,
    options: &SolverOptions,
) -> Result<PowerPolicy> {
    let solve = |nu: f64| -> Result<(PowerPolicy, f64)> {
        let f = fa.clone().scaled(1.0 - nu).plus(&fb.clone().scaled(nu));
        let r = maximize_concave(process, &f, budget, options)?;
        let h = fa.value(&r.policy) - fb.value(&r.policy);
        Ok((r.policy, h))
    };
    let (p0, h0) = solve(0.0)?;
    if h0 <= 0.0 {
        return Ok(p0);
    }
    let (p1, h1) = solve(1.0)?;
    if h1 >= 0.0 {
        return Ok(p1);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let (mut p_lo, mut p_hi) = (p0, p1);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let (p, h) = solve(mid)?;
        if h.abs() <= 1e-12 {
            return Ok(p);
        }
        if h > 0.0 {
            lo = mid;
            p_lo = p;
        } else {
            hi = mid;
            p_hi = p;
        }
        if hi - lo <= 1e-12 {
            break;
        }
    }
    // h is continuous along the segment between the bracketing policies
    // theta = 0 gives p_lo (h > 0), theta = 1 gives p_hi (h < 0)
    let (mut a, mut b) = (0.0, 1.0);
    let mut best = (f64::INFINITY, p_lo.clone());
    for _ in 0..100 {
        let theta = 0.5 * (a + b);
        let p = p_hi.mix(&p_lo, theta);
        let h = fa.value(&p) - fb.value(&p);
        if h.abs() < best.0 {
            best = (h.abs(), p);
        }
        if h.abs() <= 1e-13 {
            break;
        }
        if h > 0.0 {
            a = theta;
        } else {
            b = theta;
        }
    }
    Ok(best.1)
}

fn case_candidate(
    process: &FadingProcess,
    budget: &PowerBudget,
    system: &CaseSystem,
    case: CaseLabel,
    options: &SolverOptions,
) -> Result<PowerPolicy> {
    let f = |b: Bound| system.get(b).expect("case supported by system");
    let opportunistic = |rx: Receiver| -> Result<PowerPolicy> {
        match mac_opportunistic_waterfill(process, rx, budget) {
            Ok(r) => Ok(r.policy),
            Err(Error::AllGainsZero) => Ok(PowerPolicy::zeros(process.len())),
            Err(e) => Err(e),
        }
    };
    let mut policy = match case {
        CaseLabel::C1 => per_user_waterfill(process, budget, [0, 1])?,
        CaseLabel::C2 => per_user_waterfill(process, budget, [1, 0])?,
        CaseLabel::C3a => opportunistic(Receiver::Rx2)?,
        CaseLabel::C3b => opportunistic(Receiver::Rx1)?,
        CaseLabel::C3c => equalize(process, budget, f(Bound::S3a), f(Bound::S3b), options)?,
        CaseLabel::B1_3a => equalize(process, budget, f(Bound::S1), f(Bound::S3a), options)?,
        CaseLabel::B2_3a => equalize(process, budget, f(Bound::S2), f(Bound::S3a), options)?,
        CaseLabel::B1_3b => equalize(process, budget, f(Bound::S1), f(Bound::S3b), options)?,
        CaseLabel::B2_3b => equalize(process, budget, f(Bound::S2), f(Bound::S3b), options)?,
        CaseLabel::B1_3c | CaseLabel::B2_3c => {
            let members: Vec<RateFunction> = case.binding().iter().map(|&b| f(b).clone()).collect();
            maximize_min_concave_with(process, &members, budget, options)?.policy
        }
    };
    spend_leftover(process, budget, &mut policy);
    Ok(policy)
}

/// Spreads unspent budget uniformly. Every bound is nondecreasing in both
/// powers, and a user only keeps budget back when the binding bounds ignore
/// it, so this lifts the slack bounds off the binding ones.
fn spend_leftover(process: &FadingProcess, budget: &PowerBudget, policy: &mut PowerPolicy) {
    let mean = policy.mean_power(process);
    for k in 0..2 {
        let left = budget.get(k) - mean[k];
        if left > 1e-9 * budget.get(k).max(1.0) {
            policy.user_mut(k).iter_mut().for_each(|p| *p += left);
        }
    }
}

pub(crate) fn solve_cases(
    process: &FadingProcess,
    budget: &PowerBudget,
    system: &CaseSystem,
    options: &SolverOptions,
) -> Result<SumCapacity> {
    options.check()?;
    let present = system.present();
    let direct = maximize_min_concave_with(process, &present, budget, options)?;

    let mut candidates = Vec::new();
    let mut accepted = None;
    'cases: for case in CaseLabel::ORDER {
        if !system.supports(case) {
            continue;
        }
        let policy = case_candidate(process, budget, system, case, options)?;
        let v = system.values(&policy);
        if label_from_values(v, CASE_TOL) == Some(case) {
            accepted = Some((case, policy, v));
            break 'cases;
        }
        candidates.push((case, policy, v));
    }
    if accepted.is_none() {
        // solver round-off can leave equalities just outside the tolerance
        'ladder: for &tol in &CASE_TOL_LADDER[1..] {
            for (case, policy, v) in &candidates {
                if label_from_values(*v, tol) == Some(*case) {
                    accepted = Some((*case, policy.clone(), *v));
                    break 'ladder;
                }
            }
        }
    }
    let Some((case, policy, v)) = accepted else {
        let best = candidates
            .iter()
            .map(|(_, _, v)| v.iter().copied().fold(f64::INFINITY, f64::min))
            .fold(f64::NEG_INFINITY, f64::max);
        return Err(Error::NoCaseMatched {
            gap: (direct.value - best).abs() / direct.value.abs().max(1.0),
        });
    };
    let value = v.iter().copied().fold(f64::INFINITY, f64::min);
    if (value - direct.value).abs() > CROSS_CHECK_TOL {
        return Err(Error::CrossCheck {
            case_value: value,
            direct_value: direct.value,
        });
    }
    Ok(SumCapacity {
        value,
        policy,
        case,
        direct_value: direct.value,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedPoint {
    pub r1: f64,
    pub r2: f64,
    pub value: f64,
}

/// Maximizer of `mu1 R1 + mu2 R2` over `{R1 <= A, R2 <= B, R1 + R2 <= Cs}`.
pub fn weighted_max_fixed_policy(
    process: &FadingProcess,
    policy: &PowerPolicy,
    weights: &WeightPair,
) -> Result<WeightedPoint> {
    let (a, b, cs) = polytope(process, policy)?;
    let (mu1, mu2) = (weights.mu1, weights.mu2);
    if mu1 == mu2 {
        let r2 = b.min(cs);
        let r1 = a.min(cs - r2).max(0.0);
        return Ok(WeightedPoint {
            r1,
            r2,
            value: mu1 * cs.min(a + b),
        });
    }
    let (r1, r2) = if mu1 < mu2 {
        let r2 = b.min(cs);
        (a.min(cs - r2).max(0.0), r2)
    } else {
        let r1 = a.min(cs);
        (r1, b.min(cs - r1).max(0.0))
    };
    Ok(WeightedPoint {
        r1,
        r2,
        value: mu1 * r1 + mu2 * r2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub mu: WeightPair,
    pub r1: f64,
    pub r2: f64,
    pub value: f64,
}

/// `mu_lo * min(S1, S2, S3a, S3b) + (mu_hi - mu_lo) * min(caps of the favoured user)`
/// written as a minimum of concave functions.
fn weighted_objectives(process: &FadingProcess, w: &WeightPair) -> Vec<RateFunction> {
    let sums = CaseSystem::full(process).present();
    let (lo, extra, k) = if w.mu1 <= w.mu2 {
        (w.mu1, w.mu2 - w.mu1, 1)
    } else {
        (w.mu2, w.mu1 - w.mu2, 0)
    };
    let mut favoured = vec![single_user(process, 0, k), single_user(process, 1, k)];
    favoured.push(mac_sum(process, Receiver::Rx1));
    favoured.push(mac_sum(process, Receiver::Rx2));
    if extra == 0.0 {
        return sums.into_iter().map(|s| s.scaled(lo)).collect();
    }
    let mut out = Vec::with_capacity(16);
    for s in &sums {
        for y in &favoured {
            out.push(s.clone().scaled(lo).plus(&y.clone().scaled(extra)));
        }
    }
    out
}

/// Boundary points of the compound-MAC capacity region for each weight pair,
/// ordered by increasing relative weight of user 1.
pub fn region_boundary(
    process: &FadingProcess,
    budget: &PowerBudget,
    weight_grid: &[WeightPair],
    options: &SolverOptions,
) -> Result<Vec<BoundaryPoint>> {
    if weight_grid.is_empty() {
        return Err(Error::InvalidArgument("weight grid is empty".into()));
    }
    let mut out = Vec::with_capacity(weight_grid.len());
    for w in weight_grid {
        let objectives = weighted_objectives(process, w);
        let groups = [MinGroup {
            weight: 1.0,
            members: objectives,
        }];
        let report = crate::allocate::maximize_groups(process, &groups, budget, options)?;
        if !report.converged {
            return Err(Error::NonConvergence {
                what: "weighted sum-rate maximization",
                iterations: report.iterations,
            });
        }
        let pt = weighted_max_fixed_policy(process, &report.policy, w)?;
        out.push(BoundaryPoint {
            mu: *w,
            r1: pt.r1,
            r2: pt.r2,
            value: pt.value,
        });
    }
    out.sort_by(|a, b| {
        let ra = a.mu.mu1 / (a.mu.mu1 + a.mu.mu2);
        let rb = b.mu.mu1 / (b.mu.mu1 + b.mu.mu2);
        ra.partial_cmp(&rb).unwrap()
    });
    Ok(out)
}
