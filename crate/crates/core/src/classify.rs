//! Strong/weak labelling of fading states and sub-class detection.
//!
//! User `k`'s cross link is *strong* in a state when its cross gain is at
//! least its direct gain (`g21 >= g11` for user 1, `g12 >= g22` for user 2)
//! and *weak* when strictly smaller.

use std::fmt;

use serde::Serialize;

use crate::allocate::per_user_waterfill;
use crate::allocate::rate::{capacity, mac_sum};
use crate::channel::{FadingProcess, FadingState, PowerBudget, PowerPolicy, Receiver};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum StateLabel {
    Strong,
    Weak,
    Mixed,
    OneSidedStrong,
    OneSidedWeak,
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Subclass {
    #[serde(rename = "EVS")]
    Evs,
    #[serde(rename = "US")]
    Us,
    #[serde(rename = "UW")]
    Uw,
    #[serde(rename = "UM")]
    Um,
    Hybrid,
    #[serde(rename = "OneSidedEVS")]
    OneSidedEvs,
    #[serde(rename = "OneSidedUS")]
    OneSidedUs,
    #[serde(rename = "OneSidedUW")]
    OneSidedUw,
    OneSidedHybrid,
}

impl Subclass {
    pub fn name(self) -> &'static str {
        match self {
            Subclass::Evs => "EVS",
            Subclass::Us => "US",
            Subclass::Uw => "UW",
            Subclass::Um => "UM",
            Subclass::Hybrid => "Hybrid",
            Subclass::OneSidedEvs => "OneSidedEVS",
            Subclass::OneSidedUs => "OneSidedUS",
            Subclass::OneSidedUw => "OneSidedUW",
            Subclass::OneSidedHybrid => "OneSidedHybrid",
        }
    }
}

impl fmt::Display for Subclass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which receivers see interference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Sidedness {
    TwoSided,
    /// `g21 = 0` in every state: only receiver 1 is interfered.
    /// Also used when both cross links vanish everywhere.
    OneSidedAtRx1,
    /// `g12 = 0` in every state: only receiver 2 is interfered.
    OneSidedAtRx2,
}

impl Sidedness {
    /// The interfered receivers.
    pub fn interfered(self) -> &'static [Receiver] {
        match self {
            Sidedness::TwoSided => &Receiver::BOTH,
            Sidedness::OneSidedAtRx1 => &[Receiver::Rx1],
            Sidedness::OneSidedAtRx2 => &[Receiver::Rx2],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvsCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub labels: Vec<StateLabel>,
    pub subclass: Subclass,
    pub evs_check: EvsCheck,
    pub sidedness: Sidedness,
}

/// Whether user `k`'s cross link is strong (`cross >= direct`, nonzero cross gain).
pub fn link_strong(s: &FadingState, k: usize) -> bool {
    s.cross(k) > 0.0 && s.cross(k) >= s.direct(k)
}

pub fn classify_state(s: &FadingState) -> StateLabel {
    match (s.g21 == 0.0, s.g12 == 0.0) {
        (true, true) => StateLabel::Degenerate,
        (true, false) | (false, true) => {
            let k = if s.g21 == 0.0 { 1 } else { 0 };
            if s.cross(k) >= s.direct(k) {
                StateLabel::OneSidedStrong
            } else {
                StateLabel::OneSidedWeak
            }
        }
        (false, false) => match (s.g21 >= s.g11, s.g12 >= s.g22) {
            (true, true) => StateLabel::Strong,
            (false, false) => StateLabel::Weak,
            _ => StateLabel::Mixed,
        },
    }
}

pub fn sidedness(process: &FadingProcess) -> Sidedness {
    let no21 = process.states().iter().all(|s| s.g21 == 0.0);
    let no12 = process.states().iter().all(|s| s.g12 == 0.0);
    match (no21, no12) {
        (true, _) => Sidedness::OneSidedAtRx1,
        (false, true) => Sidedness::OneSidedAtRx2,
        (false, false) => Sidedness::TwoSided,
    }
}

/// Fading-averaged very-strong check at per-link waterfilling.
///
/// `lhs = sum_k E[C(g_kk P_k^wf)]`, `rhs = min_j E[C(g_j1 P_1^wf + g_j2 P_2^wf)]`
/// over the interfered receivers; holds when `lhs < rhs`. On a one-sided
/// channel the interference-free receiver imposes no decoding requirement
/// beyond its own link and is left out of the minimum.
pub fn evs_condition(process: &FadingProcess, budget: &PowerBudget) -> Result<EvsCheck> {
    let policy = per_user_waterfill(process, budget, [0, 1])?;
    Ok(evs_check_at(process, &policy))
}

pub(crate) fn evs_check_at(process: &FadingProcess, policy: &PowerPolicy) -> EvsCheck {
    let lhs = process.expect_indexed(|i, s| {
        capacity(s.g11 * policy.p1[i]) + capacity(s.g22 * policy.p2[i])
    });
    let rhs = sidedness(process)
        .interfered()
        .iter()
        .map(|&rx| mac_sum(process, rx).value(policy))
        .fold(f64::INFINITY, f64::min);
    EvsCheck {
        lhs,
        rhs,
        holds: lhs < rhs,
    }
}

pub fn classify_channel(process: &FadingProcess, budget: &PowerBudget) -> Result<ClassificationReport> {
    let labels: Vec<StateLabel> = process.states().iter().map(classify_state).collect();
    let side = sidedness(process);
    let evs_check = evs_condition(process, budget)?;
    let states = process.states();
    let subclass = match side {
        Sidedness::TwoSided => {
            let pattern = |a: bool, b: bool| {
                states
                    .iter()
                    .all(|s| link_strong(s, 0) == a && link_strong(s, 1) == b)
            };
            if evs_check.holds {
                Subclass::Evs
            } else if pattern(true, true) {
                Subclass::Us
            } else if pattern(false, false) {
                Subclass::Uw
            } else if pattern(false, true) || pattern(true, false) {
                Subclass::Um
            } else {
                Subclass::Hybrid
            }
        }
        Sidedness::OneSidedAtRx1 | Sidedness::OneSidedAtRx2 => {
            let k = if side == Sidedness::OneSidedAtRx1 { 1 } else { 0 };
            if evs_check.holds {
                Subclass::OneSidedEvs
            } else if states.iter().all(|s| link_strong(s, k)) {
                Subclass::OneSidedUs
            } else if states.iter().all(|s| !link_strong(s, k)) {
                Subclass::OneSidedUw
            } else {
                Subclass::OneSidedHybrid
            }
        }
    };
    Ok(ClassificationReport {
        labels,
        subclass,
        evs_check,
        sidedness: side,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoisyInterferenceReport {
    pub per_state: Vec<bool>,
    pub holds: bool,
}

/// Per state: `h11 h12 (1 + g21 P1) + h22 h21 (1 + g12 P2) <= h11 h22`
/// with amplitudes `h_jk = sqrt(g_jk)`.
pub fn noisy_interference_condition(
    process: &FadingProcess,
    policy: &PowerPolicy,
) -> Result<NoisyInterferenceReport> {
    policy.check_shape(process)?;
    let per_state: Vec<bool> = process
        .states()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let (h11, h12, h21, h22) = (s.g11.sqrt(), s.g12.sqrt(), s.g21.sqrt(), s.g22.sqrt());
            let lhs = h11 * h12 * (1.0 + s.g21 * policy.p1[i]) + h22 * h21 * (1.0 + s.g12 * policy.p2[i]);
            lhs <= h11 * h22
        })
        .collect();
    let holds = per_state.iter().all(|&b| b);
    Ok(NoisyInterferenceReport { per_state, holds })
}
