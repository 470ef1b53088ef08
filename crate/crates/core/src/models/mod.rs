//! Parameterizations, intensities, compensators and likelihoods for the
//! homogeneous Poisson, exponential-kernel Hawkes, Markov-modulated Poisson
//! (MMPP) and Markov-modulated Hawkes (MMHP) models.
//!
//! The latent chain of the modulated models always has two states: state 0
//! is the quiet Poisson regime and state 1 the active regime.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod hawkes;
mod intensity;
mod modulated;

pub use hawkes::{
    excitation_sums, hawkes_compensator, hawkes_intensity, loglik_hawkes, loglik_poisson,
};
pub use intensity::{compensator, intensity_at, intensity_path, IntensityPiece, PiecewiseIntensity};
pub use modulated::{
    decode_latent_path, loglik_mmhp, loglik_mmhp_with_grid, loglik_mmpp, loglik_modulated, SubGrid,
};

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(format!("{name} must be finite and > 0, got {v}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoissonParams {
    pub(crate) lambda: f64,
}

impl PoissonParams {
    pub fn new(lambda: f64) -> Result<Self> {
        let p = PoissonParams { lambda };
        p.validate()?;
        Ok(p)
    }

    /// The boundary estimate λ = 0 produced by fitting an empty sequence.
    pub(crate) fn degenerate() -> Self {
        PoissonParams { lambda: 0.0 }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn validate(&self) -> Result<()> {
        positive("lambda", self.lambda)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HawkesParams {
    pub(crate) lambda1: f64,
    pub(crate) alpha: f64,
    pub(crate) beta: f64,
}

impl HawkesParams {
    pub fn new(lambda1: f64, alpha: f64, beta: f64) -> Result<Self> {
        let p = HawkesParams {
            lambda1,
            alpha,
            beta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Branching ratio α/β; below 1 the process is stationary. Reported,
    /// never enforced.
    pub fn branching_ratio(&self) -> f64 {
        self.alpha / self.beta
    }

    pub fn is_stationary(&self) -> bool {
        self.branching_ratio() < 1.0
    }

    pub fn validate(&self) -> Result<()> {
        positive("lambda1", self.lambda1)?;
        positive("alpha", self.alpha)?;
        positive("beta", self.beta)
    }
}

/// Generator of the two-state latent chain, stored as its two off-diagonal
/// rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorMatrix {
    pub(crate) q01: f64,
    pub(crate) q10: f64,
}

impl GeneratorMatrix {
    pub fn new(q01: f64, q10: f64) -> Result<Self> {
        let g = GeneratorMatrix { q01, q10 };
        g.validate()?;
        Ok(g)
    }

    pub fn q01(&self) -> f64 {
        self.q01
    }
    pub fn q10(&self) -> f64 {
        self.q10
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("q01", self.q01), ("q10", self.q10)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::validation(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn is_irreducible(&self) -> bool {
        self.q01 > 0.0 && self.q10 > 0.0
    }

    /// Rows sum to zero.
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        [[-self.q01, self.q01], [self.q10, -self.q10]]
    }

    /// Exit rate of `state`.
    pub fn exit_rate(&self, state: u8) -> f64 {
        if state == 0 {
            self.q01
        } else {
            self.q10
        }
    }

    /// Stationary distribution `(π₀, π₁)` with `π₀ = q10 / (q01 + q10)`.
    /// A chain with no transitions at all is given the uniform law.
    pub fn stationary(&self) -> [f64; 2] {
        let total = self.q01 + self.q10;
        if total == 0.0 {
            [0.5, 0.5]
        } else {
            let p0 = self.q10 / total;
            [p0, 1.0 - p0]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MmppParams {
    pub(crate) lambda0: f64,
    pub(crate) lambda1: f64,
    pub(crate) q: GeneratorMatrix,
}

impl MmppParams {
    pub fn new(lambda0: f64, lambda1: f64, q: GeneratorMatrix) -> Result<Self> {
        let p = MmppParams {
            lambda0,
            lambda1,
            q,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }
    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }
    pub fn q(&self) -> GeneratorMatrix {
        self.q
    }

    pub fn validate(&self) -> Result<()> {
        positive("lambda0", self.lambda0)?;
        positive("lambda1", self.lambda1)?;
        active_state_convention(self.lambda0, self.lambda1)?;
        self.q.validate()
    }

    /// Long-run event rate `π₀λ₀ + π₁λ₁`.
    pub fn mean_rate(&self) -> f64 {
        let pi = self.q.stationary();
        pi[0] * self.lambda0 + pi[1] * self.lambda1
    }
}

fn active_state_convention(lambda0: f64, lambda1: f64) -> Result<()> {
    if lambda1 < lambda0 {
        return Err(Error::validation(format!(
            "state 1 is the active state: lambda1 ({lambda1}) must not be below lambda0 ({lambda0})"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MmhpParams {
    pub(crate) lambda0: f64,
    pub(crate) lambda1: f64,
    pub(crate) alpha: f64,
    pub(crate) beta: f64,
    pub(crate) q: GeneratorMatrix,
}

impl MmhpParams {
    pub fn new(lambda0: f64, lambda1: f64, alpha: f64, beta: f64, q: GeneratorMatrix) -> Result<Self> {
        let p = MmhpParams {
            lambda0,
            lambda1,
            alpha,
            beta,
            q,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }
    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn q(&self) -> GeneratorMatrix {
        self.q
    }

    /// The Hawkes process followed while the chain sits in state 1.
    pub fn active_hawkes(&self) -> HawkesParams {
        HawkesParams {
            lambda1: self.lambda1,
            alpha: self.alpha,
            beta: self.beta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("lambda0", self.lambda0)?;
        positive("lambda1", self.lambda1)?;
        positive("alpha", self.alpha)?;
        positive("beta", self.beta)?;
        active_state_convention(self.lambda0, self.lambda1)?;
        self.q.validate()
    }
}

/// Tagged union of the supported models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Poisson(PoissonParams),
    Hawkes(HawkesParams),
    Mmpp(MmppParams),
    Mmhp(MmhpParams),
}

impl ModelSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Poisson(_) => ModelKind::Poisson,
            ModelSpec::Hawkes(_) => ModelKind::Hawkes,
            ModelSpec::Mmpp(_) => ModelKind::Mmpp,
            ModelSpec::Mmhp(_) => ModelKind::Mmhp,
        }
    }

    /// True for models whose intensity depends on the latent chain.
    pub fn is_modulated(&self) -> bool {
        matches!(self, ModelSpec::Mmpp(_) | ModelSpec::Mmhp(_))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Poisson(p) => p.validate(),
            ModelSpec::Hawkes(p) => p.validate(),
            ModelSpec::Mmpp(p) => p.validate(),
            ModelSpec::Mmhp(p) => p.validate(),
        }
    }

    /// Log-likelihood of `seq` under this model (marginal over the latent
    /// chain for the modulated models).
    pub fn loglik(&self, seq: &crate::EventSequence) -> Result<f64> {
        match self {
            ModelSpec::Poisson(p) => Ok(loglik_poisson(p, seq)),
            ModelSpec::Hawkes(p) => loglik_hawkes(p, seq),
            ModelSpec::Mmpp(p) => loglik_mmpp(p, seq),
            ModelSpec::Mmhp(p) => loglik_mmhp(p, seq),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Poisson,
    Hawkes,
    Mmpp,
    Mmhp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Poisson,
        ModelKind::Hawkes,
        ModelKind::Mmpp,
        ModelKind::Mmhp,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Poisson => "poisson",
            ModelKind::Hawkes => "hawkes",
            ModelKind::Mmpp => "mmpp",
            ModelKind::Mmhp => "mmhp",
        }
    }

    /// Fewest events a fit of this kind accepts.
    pub fn min_events(&self) -> usize {
        match self {
            ModelKind::Poisson => 0,
            ModelKind::Hawkes => 3,
            ModelKind::Mmpp => 5,
            ModelKind::Mmhp => 8,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "poisson" => Ok(ModelKind::Poisson),
            "hawkes" => Ok(ModelKind::Hawkes),
            "mmpp" => Ok(ModelKind::Mmpp),
            "mmhp" => Ok(ModelKind::Mmhp),
            other => Err(Error::validation(format!("unknown model kind {other:?}"))),
        }
    }
}

/// Piecewise-constant trajectory of the two-state chain on `(0, T]`.
///
/// `states[r]` holds on `(τ_{r-1}, τ_r]` with `τ_{-1} = 0` and
/// `τ_{last} = T`; the state at `t = 0` is `states[0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPath", into = "RawPath")]
pub struct LatentPath {
    transition_times: Vec<f64>,
    states: Vec<u8>,
    horizon: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPath {
    transition_times: Vec<f64>,
    states: Vec<u8>,
    horizon: f64,
}

impl TryFrom<RawPath> for LatentPath {
    type Error = Error;
    fn try_from(r: RawPath) -> Result<Self> {
        LatentPath::new(r.transition_times, r.states, r.horizon)
    }
}

impl From<LatentPath> for RawPath {
    fn from(p: LatentPath) -> Self {
        RawPath {
            transition_times: p.transition_times,
            states: p.states,
            horizon: p.horizon,
        }
    }
}

impl LatentPath {
    pub fn new(transition_times: Vec<f64>, states: Vec<u8>, horizon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::validation(format!("bad path horizon {horizon}")));
        }
        if states.len() != transition_times.len() + 1 {
            return Err(Error::validation(format!(
                "path has {} transitions but {} states",
                transition_times.len(),
                states.len()
            )));
        }
        if let Some(s) = states.iter().find(|&&s| s > 1) {
            return Err(Error::validation(format!("latent state {s} is not 0 or 1")));
        }
        if states.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::validation("consecutive path segments must differ in state"));
        }
        let mut prev = 0.0;
        for &t in &transition_times {
            if !(t > prev && t < horizon) {
                return Err(Error::validation(format!(
                    "transition time {t} not strictly increasing inside (0, {horizon})"
                )));
            }
            prev = t;
        }
        Ok(LatentPath {
            transition_times,
            states,
            horizon,
        })
    }

    pub fn constant(state: u8, horizon: f64) -> Result<Self> {
        Self::new(Vec::new(), vec![state], horizon)
    }

    pub fn transition_times(&self) -> &[f64] {
        &self.transition_times
    }

    pub fn states(&self) -> &[u8] {
        &self.states
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Z(t) using the segment `(τ_{r-1}, τ_r]` that contains `t`.
    pub fn state_at(&self, t: f64) -> u8 {
        let r = self.transition_times.partition_point(|&tau| tau < t);
        self.states[r]
    }

    /// `(start, end, state)` for each constant segment, tiling `(0, T]`.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, u8)> + '_ {
        let n = self.states.len();
        (0..n).map(move |r| {
            let start = if r == 0 { 0.0 } else { self.transition_times[r - 1] };
            let end = if r + 1 == n {
                self.horizon
            } else {
                self.transition_times[r]
            };
            (start, end, self.states[r])
        })
    }

    /// Total time spent in `state`.
    pub fn occupancy(&self, state: u8) -> f64 {
        self.segments()
            .filter(|s| s.2 == state)
            .map(|(a, b, _)| b - a)
            .sum()
    }
}
