//! Sum-rate results for the interference-channel sub-classes.

mod hk;

pub use hk::{
    hk_optimize, hk_region_bounds, hk_sum_rates, separable_one_sided_baseline, HkAllocation,
    HkOptimum, HkRates, HkRegionBounds, MinimaxCase, SeparableBaseline,
};

use serde::Serialize;

use crate::allocate::rate::{capacity, weak_bound, RateFunction};
use crate::allocate::{
    maximize_concave, maximize_groups, maximize_min_concave_with, per_user_waterfill,
    waterfill_or_zero, MinGroup, OptimizerReport, SolverOptions,
};
use crate::channel::{FadingProcess, PowerBudget, PowerPolicy, Receiver};
use crate::classify::{evs_condition, link_strong, sidedness, Sidedness};
use crate::cmac::{solve_cases, CaseSystem, SumCapacity};
use crate::error::{Error, Result};

/// `sum_k E[C(g_kk P_k^wf)]`: each user alone on its own link.
pub fn interference_free_outer_bound(process: &FadingProcess, budget: &PowerBudget) -> Result<f64> {
    let mut total = 0.0;
    for k in 0..2 {
        total += waterfill_or_zero(&process.link_distribution(k, k), budget.get(k))?.achieved_rate;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvsCapacity {
    pub value: f64,
    pub policy: PowerPolicy,
    /// Side lengths `E[C(g_kk P_k^wf)]` of the rectangular capacity region.
    pub rectangle: [f64; 2],
}

pub fn evs_sum_capacity(process: &FadingProcess, budget: &PowerBudget) -> Result<EvsCapacity> {
    let check = evs_condition(process, budget)?;
    if !check.holds {
        return Err(Error::NotEvs {
            lhs: check.lhs,
            rhs: check.rhs,
        });
    }
    let policy = per_user_waterfill(process, budget, [0, 1])?;
    let rectangle = [0, 1].map(|k| {
        process.expect_indexed(|i, s| capacity(s.direct(k) * policy.user(k)[i]))
    });
    Ok(EvsCapacity {
        value: rectangle[0] + rectangle[1],
        policy,
        rectangle,
    })
}

/// Users whose cross link must be strong, given the sidedness.
fn interfering_users(side: Sidedness) -> &'static [usize] {
    match side {
        Sidedness::TwoSided => &[0, 1],
        // only user 2 interferes (at receiver 1)
        Sidedness::OneSidedAtRx1 => &[1],
        Sidedness::OneSidedAtRx2 => &[0],
    }
}

fn require_strong(process: &FadingProcess) -> Result<Sidedness> {
    let side = sidedness(process);
    for (i, s) in process.states().iter().enumerate() {
        if !interfering_users(side).iter().all(|&k| link_strong(s, k)) {
            return Err(Error::NotUniformlyStrong { state: i });
        }
    }
    Ok(side)
}

/// Sum-capacity of a uniformly strong channel: both receivers decode both
/// messages, and on a one-sided channel the interference-free receiver only
/// decodes its own.
pub fn us_sum_capacity(process: &FadingProcess, budget: &PowerBudget) -> Result<SumCapacity> {
    us_sum_capacity_with(process, budget, &SolverOptions::default())
}

pub fn us_sum_capacity_with(
    process: &FadingProcess,
    budget: &PowerBudget,
    options: &SolverOptions,
) -> Result<SumCapacity> {
    let side = require_strong(process)?;
    let system = CaseSystem::full(process).without(true, side.interfered());
    solve_cases(process, budget, &system, options)
}

/// Per-state groups `pi_h * min_m F_m(h)` built from fading-averaged functions.
fn per_state_groups(process: &FadingProcess, members: &[RateFunction]) -> Vec<MinGroup> {
    process
        .probs()
        .iter()
        .enumerate()
        .map(|(i, &p)| MinGroup {
            weight: p,
            members: members.iter().map(|f| f.restricted_to_state(i, p)).collect(),
        })
        .collect()
}

/// Sum rate of coding separately in each state of a uniformly strong channel:
/// the expectation of the per-state minima.
pub fn us_separable_sum_rate(process: &FadingProcess, budget: &PowerBudget) -> Result<OptimizerReport> {
    let side = require_strong(process)?;
    let members = CaseSystem::full(process)
        .without(true, side.interfered())
        .present();
    let groups = per_state_groups(process, &members);
    maximize_groups(process, &groups, budget, &SolverOptions::default())
}

/// Sum-capacity of a uniformly weak one-sided channel whose interfered
/// receiver is `side`: treat interference as noise.
pub fn uw1_sum_capacity(
    process: &FadingProcess,
    budget: &PowerBudget,
    side: Receiver,
) -> Result<OptimizerReport> {
    let j = side.index();
    let o = 1 - j;
    if process.states().iter().any(|s| s.gain(o, j) != 0.0) {
        return Err(Error::NotOneSided {
            expected: match side {
                Receiver::Rx1 => "g21 = 0 in every state",
                Receiver::Rx2 => "g12 = 0 in every state",
            },
        });
    }
    if let Some(i) = process.states().iter().position(|s| link_strong(s, o)) {
        return Err(Error::NotUniformlyWeak { state: i });
    }
    maximize_concave(process, &weak_bound(process, side), budget, &SolverOptions::default())
}

/// Sum-capacity of a uniformly mixed channel: the receiver facing strong
/// interference decodes both messages, the other treats interference as noise.
pub fn um_sum_capacity(process: &FadingProcess, budget: &PowerBudget) -> Result<OptimizerReport> {
    let states = process.states();
    // user 2 strong at receiver 1, user 1 weak at receiver 2, or the mirror
    let first = &states[0];
    let strong_user = if !link_strong(first, 0) && link_strong(first, 1) {
        1
    } else if link_strong(first, 0) && !link_strong(first, 1) {
        0
    } else {
        return Err(Error::NotUniformlyMixed { state: 0 });
    };
    if let Some(i) = states
        .iter()
        .position(|s| !link_strong(s, strong_user) || link_strong(s, 1 - strong_user))
    {
        return Err(Error::NotUniformlyMixed { state: i });
    }
    let (joint_rx, tin_rx) = if strong_user == 1 {
        (Receiver::Rx1, Receiver::Rx2)
    } else {
        (Receiver::Rx2, Receiver::Rx1)
    };
    let objectives = [
        crate::allocate::rate::mac_sum(process, joint_rx),
        weak_bound(process, tin_rx),
    ];
    maximize_min_concave_with(process, &objectives, budget, &SolverOptions::default())
}

/// Upper bound on the sum-capacity of a uniformly weak two-sided channel:
/// each receiver alone sees interference in turn.
pub fn uw2_upper_bound(process: &FadingProcess, budget: &PowerBudget) -> Result<OptimizerReport> {
    if let Some(i) = process
        .states()
        .iter()
        .position(|s| link_strong(s, 0) || link_strong(s, 1))
    {
        return Err(Error::NotUniformlyWeak { state: i });
    }
    let objectives = [weak_bound(process, Receiver::Rx1), weak_bound(process, Receiver::Rx2)];
    maximize_min_concave_with(process, &objectives, budget, &SolverOptions::default())
}

/// Time-division baseline: each user transmits half the time at twice its
/// budget, with no interference.
pub fn tdm_baseline(process: &FadingProcess, budget: &PowerBudget) -> Result<f64> {
    Ok(0.5
        * process.expect(|s| {
            capacity(s.g11 * 2.0 * budget.p1) + capacity(s.g22 * 2.0 * budget.p2)
        }))
}
