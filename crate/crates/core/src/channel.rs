//! Ergodic fading channels as finite weighted collections of fading states.
//!
//! Every gain is a *power* gain `|H_jk|^2` with unit-variance noise; `g_jk` is
//! the gain from transmitter `k` to receiver `j`. Continuous fading laws are
//! reduced to an equiprobable Monte Carlo sample before anything downstream
//! touches them, so every fading average in the crate is a finite sum.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the probability sum accepted by [`make_discrete_channel`].
pub const PROBABILITY_SUM_TOL: f64 = 1e-6;

/// Absolute slack allowed on the average power constraints.
pub const POWER_TOL: f64 = 1e-9;

/// One of the two receivers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Receiver {
    Rx1,
    Rx2,
}

impl Receiver {
    pub fn index(self) -> usize {
        match self {
            Receiver::Rx1 => 0,
            Receiver::Rx2 => 1,
        }
    }

    pub fn other(self) -> Receiver {
        match self {
            Receiver::Rx1 => Receiver::Rx2,
            Receiver::Rx2 => Receiver::Rx1,
        }
    }

    pub const BOTH: [Receiver; 2] = [Receiver::Rx1, Receiver::Rx2];
}

/// The four link power gains of one sub-channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FadingState {
    pub g11: f64,
    pub g12: f64,
    pub g21: f64,
    pub g22: f64,
}

impl FadingState {
    pub fn new(g11: f64, g12: f64, g21: f64, g22: f64) -> Result<Self> {
        let state = FadingState { g11, g12, g21, g22 };
        state.validate(0)?;
        Ok(state)
    }

    /// Builds a state from nonnegative link amplitudes `|H_jk|`.
    pub fn from_amplitudes(h11: f64, h12: f64, h21: f64, h22: f64) -> Result<Self> {
        for (field, value) in [("h11", h11), ("h12", h12), ("h21", h21), ("h22", h22)] {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidGain {
                    state: 0,
                    field,
                    value,
                });
            }
        }
        FadingState::new(h11 * h11, h12 * h12, h21 * h21, h22 * h22)
    }

    pub(crate) fn validate(&self, state: usize) -> Result<()> {
        for (field, value) in [
            ("g11", self.g11),
            ("g12", self.g12),
            ("g21", self.g21),
            ("g22", self.g22),
        ] {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidGain {
                    state,
                    field,
                    value,
                });
            }
        }
        Ok(())
    }

    /// Gain from transmitter `tx` (0 or 1) to receiver `rx` (0 or 1).
    pub fn gain(&self, rx: usize, tx: usize) -> f64 {
        match (rx, tx) {
            (0, 0) => self.g11,
            (0, 1) => self.g12,
            (1, 0) => self.g21,
            (1, 1) => self.g22,
            _ => panic!("link index out of range: ({rx}, {tx})"),
        }
    }

    /// Direct gain of user `k`.
    pub fn direct(&self, k: usize) -> f64 {
        self.gain(k, k)
    }

    /// Gain of user `k` at the receiver it does not target.
    pub fn cross(&self, k: usize) -> f64 {
        self.gain(1 - k, k)
    }

    /// Relabels the users, exchanging the roles of transmitters and receivers 1 and 2.
    pub fn swapped(&self) -> FadingState {
        FadingState {
            g11: self.g22,
            g12: self.g21,
            g21: self.g12,
            g22: self.g11,
        }
    }
}

/// A finite ergodic fading law: states with strictly positive probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingProcess {
    states: Vec<FadingState>,
    probs: Vec<f64>,
}

impl FadingProcess {
    pub fn states(&self) -> &[FadingState] {
        &self.states
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FadingState, f64)> + '_ {
        self.states.iter().zip(self.probs.iter().copied())
    }

    /// Fading average `sum_i p_i f(state_i)`, accumulated in state order.
    pub fn expect<F>(&self, f: F) -> f64
    where
        F: Fn(&FadingState) -> f64,
    {
        self.iter().map(|(s, p)| p * f(s)).sum()
    }

    /// Like [`FadingProcess::expect`] but also passes the state index.
    pub fn expect_indexed<F>(&self, f: F) -> f64
    where
        F: Fn(usize, &FadingState) -> f64,
    {
        self.iter().enumerate().map(|(i, (s, p))| p * f(i, s)).sum()
    }

    /// The same law with users 1 and 2 relabelled.
    pub fn swap_users(&self) -> FadingProcess {
        FadingProcess {
            states: self.states.iter().map(FadingState::swapped).collect(),
            probs: self.probs.clone(),
        }
    }

    /// Distribution of one link gain as `(gain, probability)` pairs.
    pub fn link_distribution(&self, rx: usize, tx: usize) -> Vec<(f64, f64)> {
        self.iter().map(|(s, p)| (s.gain(rx, tx), p)).collect()
    }
}

/// Builds a process from `(state, probability)` pairs, keeping their order.
///
/// Probabilities are renormalized only when their sum is already within
/// [`PROBABILITY_SUM_TOL`] of one.
pub fn make_discrete_channel(states: Vec<(FadingState, f64)>) -> Result<FadingProcess> {
    if states.is_empty() {
        return Err(Error::EmptyChannel);
    }
    for (i, (s, p)) in states.iter().enumerate() {
        s.validate(i)?;
        if !p.is_finite() || *p <= 0.0 {
            return Err(Error::InvalidProbability {
                state: i,
                value: *p,
            });
        }
    }
    let total: f64 = states.iter().map(|(_, p)| p).sum();
    if (total - 1.0).abs() > PROBABILITY_SUM_TOL {
        return Err(Error::ProbabilitySum(total));
    }
    let (states, probs): (Vec<_>, Vec<_>) = states.into_iter().map(|(s, p)| (s, p / total)).unzip();
    Ok(FadingProcess { states, probs })
}

/// Equiprobable process from a list of states.
pub fn equiprobable(states: Vec<FadingState>) -> Result<FadingProcess> {
    let n = states.len() as f64;
    make_discrete_channel(states.into_iter().map(|s| (s, 1.0 / n)).collect())
}

/// Monte Carlo discretization of i.i.d. Rayleigh-faded cross links.
///
/// Cross power gains are exponential with mean `sigma2` (so `E|H|^2 = sigma2`);
/// the direct links are fixed to `direct_gains`. Per state the draw order is
/// `g12` then `g21`, from a ChaCha8 stream seeded with `seed`.
pub fn sample_rayleigh_channel(
    sigma2: f64,
    direct_gains: (f64, f64),
    n_samples: usize,
    seed: u64,
) -> Result<FadingProcess> {
    if n_samples == 0 {
        return Err(Error::ZeroSamples);
    }
    if !sigma2.is_finite() || sigma2 <= 0.0 {
        return Err(Error::InvalidVariance(sigma2));
    }
    let exp = Exp::new(1.0 / sigma2).map_err(|_| Error::InvalidVariance(sigma2))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let g12 = exp.sample(&mut rng);
        let g21 = exp.sample(&mut rng);
        let state = FadingState {
            g11: direct_gains.0,
            g12,
            g21,
            g22: direct_gains.1,
        };
        state.validate(i)?;
        states.push(state);
    }
    let p = 1.0 / n_samples as f64;
    Ok(FadingProcess {
        probs: vec![p; n_samples],
        states,
    })
}

/// Average power constraints `E[P_k(H)] <= p_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBudget {
    pub p1: f64,
    pub p2: f64,
}

impl PowerBudget {
    pub fn new(p1: f64, p2: f64) -> Result<Self> {
        for (field, value) in [("p1", p1), ("p2", p2)] {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidBudget { field, value });
            }
        }
        Ok(PowerBudget { p1, p2 })
    }

    pub fn symmetric(p: f64) -> Result<Self> {
        PowerBudget::new(p, p)
    }

    pub fn get(&self, k: usize) -> f64 {
        match k {
            0 => self.p1,
            1 => self.p2,
            _ => panic!("user index out of range: {k}"),
        }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.p1, self.p2]
    }

    pub fn swapped(&self) -> PowerBudget {
        PowerBudget {
            p1: self.p2,
            p2: self.p1,
        }
    }
}

/// Per-state transmit powers of both users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerPolicy {
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
}

impl PowerPolicy {
    pub fn new(p1: Vec<f64>, p2: Vec<f64>) -> Result<Self> {
        if p1.len() != p2.len() {
            return Err(Error::ShapeMismatch {
                expected: p1.len(),
                got: p2.len(),
            });
        }
        Ok(PowerPolicy { p1, p2 })
    }

    pub fn zeros(n: usize) -> Self {
        PowerPolicy {
            p1: vec![0.0; n],
            p2: vec![0.0; n],
        }
    }

    /// Constant policy spending exactly the budget in every state.
    pub fn uniform(n: usize, budget: &PowerBudget) -> Self {
        PowerPolicy {
            p1: vec![budget.p1; n],
            p2: vec![budget.p2; n],
        }
    }

    pub fn len(&self) -> usize {
        self.p1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p1.is_empty()
    }

    pub fn user(&self, k: usize) -> &[f64] {
        match k {
            0 => &self.p1,
            1 => &self.p2,
            _ => panic!("user index out of range: {k}"),
        }
    }

    pub fn user_mut(&mut self, k: usize) -> &mut Vec<f64> {
        match k {
            0 => &mut self.p1,
            1 => &mut self.p2,
            _ => panic!("user index out of range: {k}"),
        }
    }

    /// `(P1, P2)` in state `i`.
    pub fn at(&self, i: usize) -> (f64, f64) {
        (self.p1[i], self.p2[i])
    }

    pub fn mean_power(&self, process: &FadingProcess) -> [f64; 2] {
        [
            process.expect_indexed(|i, _| self.p1[i]),
            process.expect_indexed(|i, _| self.p2[i]),
        ]
    }

    pub fn swapped(&self) -> PowerPolicy {
        PowerPolicy {
            p1: self.p2.clone(),
            p2: self.p1.clone(),
        }
    }

    /// Convex combination `theta * self + (1 - theta) * other`.
    pub fn mix(&self, other: &PowerPolicy, theta: f64) -> PowerPolicy {
        let blend = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter()
                .zip(b)
                .map(|(x, y)| theta * x + (1.0 - theta) * y)
                .collect()
        };
        PowerPolicy {
            p1: blend(&self.p1, &other.p1),
            p2: blend(&self.p2, &other.p2),
        }
    }

    pub(crate) fn check_shape(&self, process: &FadingProcess) -> Result<()> {
        for v in [&self.p1, &self.p2] {
            if v.len() != process.len() {
                return Err(Error::ShapeMismatch {
                    expected: process.len(),
                    got: v.len(),
                });
            }
        }
        Ok(())
    }
}

/// Result of checking a policy against the average power constraints.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub mean_power: [f64; 2],
    pub within_budget: [bool; 2],
    /// `(state, user)` pairs holding a negative power.
    pub negative_entries: Vec<(usize, usize)>,
}

impl FeasibilityReport {
    pub fn feasible(&self) -> bool {
        self.within_budget.iter().all(|&b| b) && self.negative_entries.is_empty()
    }
}

pub fn validate_policy(
    process: &FadingProcess,
    policy: &PowerPolicy,
    budget: &PowerBudget,
) -> Result<FeasibilityReport> {
    policy.check_shape(process)?;
    let mut negative_entries = Vec::new();
    for i in 0..process.len() {
        for k in 0..2 {
            let p = policy.user(k)[i];
            if !p.is_finite() {
                return Err(Error::InvalidPolicy {
                    state: i,
                    field: if k == 0 { "p1" } else { "p2" },
                    value: p,
                });
            }
            if p < 0.0 {
                negative_entries.push((i, k));
            }
        }
    }
    let mean_power = policy.mean_power(process);
    let within_budget = [
        mean_power[0] <= budget.p1 + POWER_TOL,
        mean_power[1] <= budget.p2 + POWER_TOL,
    ];
    Ok(FeasibilityReport {
        mean_power,
        within_budget,
        negative_entries,
    })
}

/// One state entry of the channel JSON file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateRecord {
    pub g11: f64,
    pub g12: f64,
    pub g21: f64,
    pub g22: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetRecord {
    pub p1: f64,
    pub p2: f64,
}

/// On-disk channel description:
/// `{"states":[{"g11":..,"g12":..,"g21":..,"g22":..,"p":..}],"budget":{"p1":..,"p2":..}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelFile {
    pub states: Vec<StateRecord>,
    pub budget: BudgetRecord,
}

impl ChannelFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("channel file serializes")
    }

    pub fn build(&self) -> Result<(FadingProcess, PowerBudget)> {
        let states = self
            .states
            .iter()
            .map(|r| {
                (
                    FadingState {
                        g11: r.g11,
                        g12: r.g12,
                        g21: r.g21,
                        g22: r.g22,
                    },
                    r.p,
                )
            })
            .collect();
        let process = make_discrete_channel(states)?;
        let budget = PowerBudget::new(self.budget.p1, self.budget.p2)?;
        Ok((process, budget))
    }

    pub fn from_process(process: &FadingProcess, budget: &PowerBudget) -> Self {
        ChannelFile {
            states: process
                .iter()
                .map(|(s, p)| StateRecord {
                    g11: s.g11,
                    g12: s.g12,
                    g21: s.g21,
                    g22: s.g22,
                    p,
                })
                .collect(),
            budget: BudgetRecord {
                p1: budget.p1,
                p2: budget.p2,
            },
        }
    }
}

/// Parses a channel JSON document into a process and a budget.
pub fn parse_channel_json(text: &str) -> Result<(FadingProcess, PowerBudget)> {
    ChannelFile::from_json(text)?.build()
}
