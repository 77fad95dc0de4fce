//! Rate splitting on a one-sided channel (`g21 = 0` everywhere): user 2
//! sends a private part with power `alpha P2`, treated as noise at receiver 1,
//! and a common part decoded by both receivers.

use serde::Serialize;

use crate::allocate::rate::{capacity, split_direct_bound, split_joint_bound};
use crate::allocate::{maximize_groups, maximize_min_concave_with, per_user_waterfill, SolverOptions};
use crate::channel::{FadingProcess, PowerBudget, PowerPolicy};
use crate::error::{Error, Result};

use super::per_state_groups;

const MINIMAX_TOL: f64 = 1e-9;
/// Smallest private fraction tried for a weak state.
const ALPHA_MIN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HkAllocation {
    pub policy: PowerPolicy,
    /// Private-power fraction of user 2 in each state.
    pub alpha: Vec<f64>,
}

impl HkAllocation {
    pub fn new(policy: PowerPolicy, alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() != policy.len() {
            return Err(Error::ShapeMismatch {
                expected: policy.len(),
                got: alpha.len(),
            });
        }
        if let Some((i, &a)) = alpha
            .iter()
            .enumerate()
            .find(|(_, a)| !(0.0..=1.0).contains(*a))
        {
            return Err(Error::InvalidArgument(format!(
                "alpha in state {i} must lie in [0, 1], got {a}"
            )));
        }
        Ok(HkAllocation { policy, alpha })
    }

    fn check(&self, process: &FadingProcess) -> Result<()> {
        self.policy.check_shape(process)?;
        HkAllocation::new(self.policy.clone(), self.alpha.clone()).map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MinimaxCase {
    #[serde(rename = "Case1_S1smaller")]
    S1Smaller,
    #[serde(rename = "Case2_S2smaller")]
    S2Smaller,
    #[serde(rename = "Case3_equal")]
    Equal,
}

impl MinimaxCase {
    pub fn name(self) -> &'static str {
        match self {
            MinimaxCase::S1Smaller => "Case1_S1smaller",
            MinimaxCase::S2Smaller => "Case2_S2smaller",
            MinimaxCase::Equal => "Case3_equal",
        }
    }

    fn of(rates: &HkRates) -> Self {
        if rates.s1 < rates.s2 - MINIMAX_TOL {
            MinimaxCase::S1Smaller
        } else if rates.s2 < rates.s1 - MINIMAX_TOL {
            MinimaxCase::S2Smaller
        } else {
            MinimaxCase::Equal
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HkRates {
    pub s1: f64,
    pub s2: f64,
}

impl HkRates {
    pub fn sum_rate(&self) -> f64 {
        self.s1.min(self.s2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HkRegionBounds {
    pub r1_cap: f64,
    pub r2_cap_direct: f64,
    pub r2_cap_split: f64,
    pub sum_cap: f64,
}

fn require_one_sided(process: &FadingProcess) -> Result<()> {
    if process.states().iter().any(|s| s.g21 != 0.0) {
        return Err(Error::NotOneSided {
            expected: "g21 = 0 in every state (swap the users for the mirrored orientation)",
        });
    }
    Ok(())
}

pub fn hk_sum_rates(process: &FadingProcess, allocation: &HkAllocation) -> Result<HkRates> {
    require_one_sided(process)?;
    allocation.check(process)?;
    let p = &allocation.policy;
    Ok(HkRates {
        s1: split_direct_bound(process, &allocation.alpha).value(p),
        s2: split_joint_bound(process, &allocation.alpha).value(p),
    })
}

pub fn hk_region_bounds(process: &FadingProcess, allocation: &HkAllocation) -> Result<HkRegionBounds> {
    require_one_sided(process)?;
    allocation.check(process)?;
    let (p, a) = (&allocation.policy, &allocation.alpha);
    let mut b = HkRegionBounds {
        r1_cap: 0.0,
        r2_cap_direct: 0.0,
        r2_cap_split: 0.0,
        sum_cap: 0.0,
    };
    for (i, (s, pi)) in process.iter().enumerate() {
        let (p1, p2) = p.at(i);
        let private = 1.0 + s.g12 * a[i] * p2;
        let common = s.g12 * (1.0 - a[i]) * p2 / private;
        b.r1_cap += pi * capacity(s.g11 * p1 / private);
        b.r2_cap_direct += pi * capacity(s.g22 * p2);
        b.r2_cap_split += pi * (capacity(s.g22 * a[i] * p2) + capacity(common));
        b.sum_cap += pi * (capacity(s.g22 * a[i] * p2) + capacity(s.g11 * p1 / private + common));
    }
    Ok(b)
}

/// The private fraction forced by a state's interference strength:
/// `Some(0)` when strong, `Some(1)` without interference, `None` when weak.
fn forced_alpha(g12: f64, g22: f64) -> Option<f64> {
    if g12 == 0.0 {
        Some(1.0)
    } else if g12 >= g22 {
        Some(0.0)
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HkOptimum {
    pub value: f64,
    pub allocation: HkAllocation,
    pub case: MinimaxCase,
    pub rates: HkRates,
}

struct AlphaSearch<'a> {
    process: &'a FadingProcess,
    budget: &'a PowerBudget,
    base: Vec<f64>,
    weak: Vec<usize>,
    options: SolverOptions,
    evaluations: usize,
}

impl AlphaSearch<'_> {
    fn alpha(&self, free: &[f64]) -> Vec<f64> {
        let mut a = self.base.clone();
        for (&i, &x) in self.weak.iter().zip(free) {
            a[i] = x;
        }
        a
    }

    fn solve(&mut self, free: &[f64]) -> Result<(f64, PowerPolicy)> {
        self.evaluations += 1;
        let alpha = self.alpha(free);
        let objectives = [
            split_direct_bound(self.process, &alpha),
            split_joint_bound(self.process, &alpha),
        ];
        let r = maximize_min_concave_with(self.process, &objectives, self.budget, &self.options)?;
        Ok((r.value, r.policy))
    }
}

/// Maximizes `min(S1, S2)` over policies and private fractions. Strong states
/// get `alpha = 0`; weak states are searched on a grid in `(0, 1]`, highest
/// fraction first so that ties keep `alpha = 1`, then refined by pattern search.
pub fn hk_optimize(process: &FadingProcess, budget: &PowerBudget) -> Result<HkOptimum> {
    require_one_sided(process)?;
    let n = process.len();

    // very strong interference: decode it fully, no splitting
    let wf = per_user_waterfill(process, budget, [0, 1])?;
    let zero = HkAllocation {
        policy: wf,
        alpha: vec![0.0; n],
    };
    let at_zero = hk_sum_rates(process, &zero)?;
    if at_zero.s1 < at_zero.s2 {
        return Ok(HkOptimum {
            value: at_zero.s1,
            case: MinimaxCase::S1Smaller,
            rates: at_zero,
            allocation: zero,
        });
    }

    let mut base = vec![0.0; n];
    let mut weak = Vec::new();
    for (i, s) in process.states().iter().enumerate() {
        match forced_alpha(s.g12, s.g22) {
            Some(a) => base[i] = a,
            None => weak.push(i),
        }
    }
    let mut search = AlphaSearch {
        process,
        budget,
        base,
        weak,
        options: SolverOptions::default(),
        evaluations: 0,
    };
    let m = search.weak.len();
    let mut best_free = vec![1.0; m];
    let (mut best_value, mut best_policy) = search.solve(&best_free)?;

    let grid: Vec<f64> = (1..=10).rev().map(|j| j as f64 / 10.0).collect();
    if m > 0 && m <= 2 {
        let mut candidates: Vec<Vec<f64>> = grid.iter().map(|&a| vec![a]).collect();
        if m == 2 {
            candidates = grid
                .iter()
                .flat_map(|&a| grid.iter().map(move |&b| vec![a, b]))
                .collect();
        }
        for c in candidates.into_iter().skip(1) {
            let (v, p) = search.solve(&c)?;
            if v > best_value + 1e-12 {
                (best_value, best_policy, best_free) = (v, p, c);
            }
        }
    } else if m > 2 {
        // one coordinate at a time over the grid
        for _ in 0..2 {
            for j in 0..m {
                for &a in &grid {
                    let mut c = best_free.clone();
                    if c[j] == a {
                        continue;
                    }
                    c[j] = a;
                    let (v, p) = search.solve(&c)?;
                    if v > best_value + 1e-12 {
                        (best_value, best_policy, best_free) = (v, p, c);
                    }
                }
            }
        }
    }

    let mut step = 0.02;
    while m > 0 && step >= ALPHA_MIN {
        let mut improved = false;
        for j in 0..m {
            for dir in [1.0, -1.0] {
                let mut c = best_free.clone();
                c[j] = (c[j] + dir * step).clamp(ALPHA_MIN, 1.0);
                if c[j] == best_free[j] {
                    continue;
                }
                let (v, p) = search.solve(&c)?;
                if v > best_value + 1e-12 {
                    (best_value, best_policy, best_free) = (v, p, c);
                    improved = true;
                }
            }
        }
        if !improved {
            step /= 2.0;
        }
        if search.evaluations > 2000 {
            return Err(Error::NonConvergence {
                what: "private-fraction search",
                iterations: search.evaluations,
            });
        }
    }

    let allocation = HkAllocation {
        policy: best_policy,
        alpha: search.alpha(&best_free),
    };
    let rates = hk_sum_rates(process, &allocation)?;
    Ok(HkOptimum {
        value: rates.sum_rate(),
        case: MinimaxCase::of(&rates),
        rates,
        allocation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparableBaseline {
    pub value: f64,
    pub allocation: HkAllocation,
}

/// Independent coding in every state: interference treated as noise in weak
/// states and decoded in strong ones, with power allocated jointly.
pub fn separable_one_sided_baseline(
    process: &FadingProcess,
    budget: &PowerBudget,
) -> Result<SeparableBaseline> {
    require_one_sided(process)?;
    let alpha: Vec<f64> = process
        .states()
        .iter()
        .map(|s| forced_alpha(s.g12, s.g22).unwrap_or(1.0))
        .collect();
    let members = [
        split_direct_bound(process, &alpha),
        split_joint_bound(process, &alpha),
    ];
    let groups = per_state_groups(process, &members);
    let r = maximize_groups(process, &groups, budget, &SolverOptions::default())?;
    if !r.converged {
        return Err(Error::NonConvergence {
            what: "separable power allocation",
            iterations: r.iterations,
        });
    }
    Ok(SeparableBaseline {
        value: r.value,
        allocation: HkAllocation {
            policy: r.policy,
            alpha,
        },
    })
}
