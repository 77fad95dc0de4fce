//! Sweep datasets: the very-strong power threshold under Rayleigh cross
//! fading, joint versus separable coding on binary one-sided channels, and
//! the rate-splitting scheme on a hybrid binary channel.

use serde::Serialize;

use crate::channel::{
    make_discrete_channel, sample_rayleigh_channel, FadingProcess, FadingState, PowerBudget,
};
use crate::classify::evs_condition;
use crate::error::{Error, Result};
use crate::ifc::{
    evs_sum_capacity, hk_optimize, interference_free_outer_bound, separable_one_sided_baseline,
    tdm_baseline, us_sum_capacity,
};

/// Largest power tried by [`evs_max_power`].
pub const P_MAX_CAP: f64 = 100.0;
/// Absolute resolution of [`evs_max_power`].
pub const P_MAX_RESOLUTION: f64 = 1e-3;
/// Power added to the very-strong threshold in the hybrid sweep.
pub const HK_EXTRA_POWER: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvsThreshold {
    /// Largest symmetric budget found with the very-strong condition holding;
    /// 0 when it fails already at the resolution.
    pub p_max: f64,
    pub feasible: bool,
}

fn evs_holds(process: &FadingProcess, p: f64) -> Result<bool> {
    Ok(evs_condition(process, &PowerBudget::symmetric(p)?)?.holds)
}

/// Bisection for the largest symmetric budget `P <= P_MAX_CAP` at which the
/// very-strong condition holds.
pub fn evs_max_power(process: &FadingProcess) -> Result<EvsThreshold> {
    if !evs_holds(process, P_MAX_RESOLUTION)? {
        return Ok(EvsThreshold {
            p_max: 0.0,
            feasible: false,
        });
    }
    if evs_holds(process, P_MAX_CAP)? {
        return Ok(EvsThreshold {
            p_max: P_MAX_CAP,
            feasible: true,
        });
    }
    let (mut lo, mut hi) = (P_MAX_RESOLUTION, P_MAX_CAP);
    while hi - lo > P_MAX_RESOLUTION {
        let mid = 0.5 * (lo + hi);
        if evs_holds(process, mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(EvsThreshold {
        p_max: lo,
        feasible: true,
    })
}

/// One-sided channel with unit direct gains and cross gain `g12 = h.0` with
/// probability `p1`, `h.1` otherwise. Zero-probability states are left out.
pub fn one_sided_binary_channel(h: (f64, f64), p1: f64) -> Result<FadingProcess> {
    if !(0.0..=1.0).contains(&p1) {
        return Err(Error::InvalidArgument(format!("p1 must lie in [0, 1], got {p1}")));
    }
    let mut states = Vec::new();
    for (g, p) in [(h.0, p1), (h.1, 1.0 - p1)] {
        if p > 0.0 {
            states.push((FadingState::new(1.0, g, 0.0, 1.0)?, p));
        }
    }
    make_discrete_channel(states)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RayEvsRow {
    pub sigma2: f64,
    pub p_max: f64,
    pub feasible: bool,
    pub evs_sum_capacity: f64,
    pub tdm: f64,
}

/// Very-strong threshold on a sampled Rayleigh channel with unit direct gains,
/// with the sum-capacity and the time-division rate at that power.
pub fn ray_evs_row(sigma2: f64, samples: usize, seed: u64) -> Result<RayEvsRow> {
    let process = sample_rayleigh_channel(sigma2, (1.0, 1.0), samples, seed)?;
    let t = evs_max_power(&process)?;
    let budget = PowerBudget::symmetric(t.p_max)?;
    let evs = if t.feasible {
        evs_sum_capacity(&process, &budget)?.value
    } else {
        0.0
    };
    Ok(RayEvsRow {
        sigma2,
        p_max: t.p_max,
        feasible: t.feasible,
        evs_sum_capacity: evs,
        tdm: tdm_baseline(&process, &budget)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PairKind {
    #[serde(rename = "EVS")]
    Evs,
    #[serde(rename = "US")]
    Us,
}

impl PairKind {
    pub fn name(self) -> &'static str {
        match self {
            PairKind::Evs => "EVS",
            PairKind::Us => "US",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SepGapPair {
    pub kind: PairKind,
    pub h1: f64,
    pub h2: f64,
}

pub const DEFAULT_SEP_PAIRS: [SepGapPair; 4] = [
    SepGapPair { kind: PairKind::Evs, h1: 0.5, h2: 3.5 },
    SepGapPair { kind: PairKind::Evs, h1: 0.5, h2: 2.0 },
    SepGapPair { kind: PairKind::Us, h1: 1.25, h2: 1.75 },
    SepGapPair { kind: PairKind::Us, h1: 1.25, h2: 3.75 },
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SepGapRow {
    pub pair: SepGapPair,
    pub p1: f64,
    pub budget: f64,
    /// False when an EVS pair has no power at which the condition holds.
    pub feasible: bool,
    pub joint: f64,
    pub separable: f64,
}

/// Joint and separable sum rates at one `p1`. EVS pairs run at their
/// very-strong threshold, US pairs at `us_budget`.
pub fn sep_gap_row(pair: &SepGapPair, p1: f64, us_budget: f64) -> Result<SepGapRow> {
    let process = one_sided_binary_channel((pair.h1, pair.h2), p1)?;
    let (budget, feasible) = match pair.kind {
        PairKind::Evs => {
            let t = evs_max_power(&process)?;
            (t.p_max, t.feasible)
        }
        PairKind::Us => (us_budget, true),
    };
    let b = PowerBudget::symmetric(budget)?;
    let (joint, separable) = if !feasible {
        (0.0, 0.0)
    } else {
        let joint = match pair.kind {
            PairKind::Evs => evs_sum_capacity(&process, &b)?.value,
            PairKind::Us => us_sum_capacity(&process, &b)?.value,
        };
        (joint, separable_one_sided_baseline(&process, &b)?.value)
    };
    Ok(SepGapRow {
        pair: *pair,
        p1,
        budget,
        feasible,
        joint,
        separable,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HkHybridRow {
    pub p1: f64,
    pub budget: f64,
    pub r_hk: f64,
    pub r_ind: f64,
    pub r_outer: f64,
    /// `None` when the sweep point has no state of that kind.
    pub alpha_weak: Option<f64>,
    pub alpha_strong: Option<f64>,
}

/// Rate splitting against separable coding and the interference-free bound,
/// at `HK_EXTRA_POWER` above the very-strong threshold.
pub fn hk_hybrid_row(h: (f64, f64), p1: f64) -> Result<HkHybridRow> {
    let process = one_sided_binary_channel(h, p1)?;
    let budget = evs_max_power(&process)?.p_max + HK_EXTRA_POWER;
    let b = PowerBudget::symmetric(budget)?;
    let hk = hk_optimize(&process, &b)?;
    let sep = separable_one_sided_baseline(&process, &b)?;
    let mut alpha_weak = None;
    let mut alpha_strong = None;
    for (s, &a) in process.states().iter().zip(&hk.allocation.alpha) {
        if s.g12 >= s.g22 {
            alpha_strong = Some(a);
        } else {
            alpha_weak = Some(a);
        }
    }
    Ok(HkHybridRow {
        p1,
        budget,
        r_hk: hk.value,
        r_ind: sep.value,
        r_outer: interference_free_outer_bound(&process, &b)?,
        alpha_weak,
        alpha_strong,
    })
}
