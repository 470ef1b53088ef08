//! Forward filtering and Viterbi decoding for the two-state modulated
//! models.
//!
//! Between events the forward vector is propagated by `exp((Q − Λ) h)` with
//! `Λ = diag(λ₀, λ̄₁)`. For the MMPP `λ̄₁ = λ₁` and one step covers each
//! inter-event interval exactly. For the MMHP the state-1 intensity decays
//! between events, so each interval is cut into substeps and `λ̄₁` is the
//! exact average of the Hawkes intensity over the substep. The off-diagonal
//! entries carry the second Magnus term, which is also exact for an
//! exponentially decaying excitation, so the scheme is fourth order in the
//! substep length. At an event the
//! vector is multiplied by the state intensities. The running vector is
//! renormalized after every operation and the log normalizers accumulated.

use super::{LatentPath, MmhpParams, MmppParams, ModelSpec};
use crate::error::{Error, Result};
use crate::events::EventSequence;
use crate::linalg::scaled_exp_metzler;

/// Resolution of the substep grid used for MMHP interval propagators.
///
/// Only the Q part of the generator fails to commute with the decaying
/// state-1 intensity, and after the second Magnus term the local error of
/// a substep of length `h` starting at excitation `e` scales like
/// `e·(q01 + q10)·(βh)⁵/β²`. Substeps are sized so that this error per unit
/// time stays at `tolerance`:
/// `βh = (tolerance·β / (e·(q01 + q10)))^{1/4}`. Steps therefore lengthen
/// as the excitation decays, and an interval with no excitation, or a chain
/// that never switches, takes a single exact step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubGrid {
    pub tolerance: f64,
}

impl Default for SubGrid {
    fn default() -> Self {
        SubGrid { tolerance: 1e-4 }
    }
}

impl SubGrid {
    /// Grid whose substeps are `factor` times shorter.
    pub fn refined(self, factor: usize) -> Self {
        SubGrid {
            tolerance: self.tolerance / (factor as f64).powi(4),
        }
    }

    fn step(&self, rates: &Rates, excite: f64) -> f64 {
        let risk = excite * (rates.q01 + rates.q10);
        if risk <= 0.0 {
            return f64::INFINITY;
        }
        (self.tolerance * rates.beta / risk).powf(0.25) / rates.beta
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Rates {
    pub lambda0: f64,
    pub lambda1: f64,
    pub alpha: f64,
    pub beta: f64,
    pub q01: f64,
    pub q10: f64,
}

impl From<&MmppParams> for Rates {
    fn from(p: &MmppParams) -> Self {
        Rates {
            lambda0: p.lambda0,
            lambda1: p.lambda1,
            alpha: 0.0,
            beta: 1.0,
            q01: p.q.q01,
            q10: p.q.q10,
        }
    }
}

impl From<&MmhpParams> for Rates {
    fn from(p: &MmhpParams) -> Self {
        Rates {
            lambda0: p.lambda0,
            lambda1: p.lambda1,
            alpha: p.alpha,
            beta: p.beta,
            q01: p.q.q01,
            q10: p.q.q10,
        }
    }
}

impl Rates {
    fn stationary(&self) -> [f64; 2] {
        super::GeneratorMatrix {
            q01: self.q01,
            q10: self.q10,
        }
        .stationary()
    }

    fn propagator(&self, h: f64, mean1: f64, twist: f64) -> Result<(f64, [[f64; 2]; 2])> {
        if !(mean1.is_finite() && twist.is_finite()) {
            return Err(Error::numeric(0, "state-1 intensity overflowed"));
        }
        // Keep the off-diagonals non-negative for extreme excitation.
        let twist = twist.clamp(-h, h);
        Ok(scaled_exp_metzler(&[
            [-(self.q01 + self.lambda0) * h, self.q01 * (h + twist)],
            [self.q10 * (h - twist), -(self.q10 + mean1) * h],
        ]))
    }
}

pub(crate) enum Step {
    /// Propagate over `(end - h, end]` with state-1 mean intensity `mean1`
    /// and second-order Magnus coefficient `twist`; the state-1 excitation
    /// is `level` at the start of the step.
    Advance {
        end: f64,
        h: f64,
        level: f64,
        mean1: f64,
        twist: f64,
    },
    /// Event `index` with state-1 intensity `rate1` (state 0 has λ₀).
    Emit { index: usize, rate1: f64 },
}

/// Coefficient `w` of the second Magnus term `w·[[0, q01], [−q10, 0]]` for
/// a substep of length `h` on which the state-1 excitation decays from
/// `excite` at rate `beta`. Its magnitude is `excite·g(βh)/(2β²)` with
/// `g(x) = x − 2 + (2 + x)e^{−x} = x³/6 − x⁴/12 + …`.
fn magnus_twist(excite: f64, beta: f64, h: f64) -> f64 {
    if excite == 0.0 {
        return 0.0;
    }
    let x = beta * h;
    let g = if x < 0.1 {
        // Alternating series Σ_{n≥3} (−1)^{n+1} (n−2) xⁿ/n!.
        let mut term = x * x * x / 6.0;
        let mut sum = 0.0;
        for n in 3..12 {
            let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
            sum += sign * (n as f64 - 2.0) * term;
            term *= x / (n as f64 + 1.0);
        }
        sum
    } else {
        x - 2.0 + (2.0 + x) * (-x).exp()
    };
    TWIST_SIGN * excite * g / (2.0 * beta * beta)
}

const TWIST_SIGN: f64 = 1.0;

pub(crate) fn walk<F>(rates: &Rates, seq: &EventSequence, grid: &SubGrid, mut visit: F) -> Result<()>
where
    F: FnMut(Step) -> Result<()>,
{
    let times = seq.times();
    let horizon = seq.horizon();
    let beta = rates.beta;
    let mut prev = 0.0;
    let mut excite = 0.0;
    for k in 0..=times.len() {
        let end = if k < times.len() { times[k] } else { horizon };
        let tau = end - prev;
        let mut start = prev;
        let mut level = excite;
        while start < end {
            let target = grid.step(rates, level);
            let (sub_end, h) = if start + target >= end {
                (end, end - start)
            } else {
                (start + target, target)
            };
            let mean_excite = if level > 0.0 {
                level * -(-beta * h).exp_m1() / (beta * h)
            } else {
                0.0
            };
            visit(Step::Advance {
                end: sub_end,
                h,
                level,
                mean1: rates.lambda1 + mean_excite,
                twist: magnus_twist(level, beta, h),
            })?;
            level *= (-beta * h).exp();
            start = sub_end;
        }
        excite *= (-beta * tau).exp();
        if k < times.len() {
            visit(Step::Emit {
                index: k,
                rate1: rates.lambda1 + excite,
            })?;
            excite += rates.alpha;
        }
        prev = end;
    }
    Ok(())
}

pub(crate) fn forward_loglik(
    rates: &Rates,
    seq: &EventSequence,
    grid: &SubGrid,
    initial: [f64; 2],
) -> Result<f64> {
    let mut f = initial;
    let mut ll = 0.0;
    let mut interval = 0usize;
    walk(rates, seq, grid, |step| {
        match step {
            Step::Advance { h, mean1, twist, .. } => {
                let (log_scale, k) = rates.propagator(h, mean1, twist)?;
                f = [
                    f[0] * k[0][0] + f[1] * k[1][0],
                    f[0] * k[0][1] + f[1] * k[1][1],
                ];
                ll += log_scale;
            }
            Step::Emit { index, rate1 } => {
                f = [f[0] * rates.lambda0, f[1] * rate1];
                interval = index + 1;
            }
        }
        let s = f[0] + f[1];
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::numeric(
                interval,
                format!("forward probabilities vanished in interval {interval}"),
            ));
        }
        f = [f[0] / s, f[1] / s];
        ll += s.ln();
        Ok(())
    })?;
    if !ll.is_finite() {
        return Err(Error::numeric(interval, "non-finite modulated log-likelihood"));
    }
    Ok(ll)
}

/// Exact marginal log-likelihood of an MMPP, chain started from its
/// stationary law.
pub fn loglik_mmpp(params: &MmppParams, seq: &EventSequence) -> Result<f64> {
    let rates = Rates::from(params);
    forward_loglik(&rates, seq, &SubGrid::default(), rates.stationary())
}

/// Marginal log-likelihood of an MMHP on the default substep grid.
pub fn loglik_mmhp(params: &MmhpParams, seq: &EventSequence) -> Result<f64> {
    loglik_mmhp_with_grid(params, seq, &SubGrid::default())
}

pub fn loglik_mmhp_with_grid(params: &MmhpParams, seq: &EventSequence, grid: &SubGrid) -> Result<f64> {
    let rates = Rates::from(params);
    forward_loglik(&rates, seq, grid, rates.stationary())
}

/// Log-likelihood of a modulated model with an explicit initial law.
pub fn loglik_modulated(spec: &ModelSpec, seq: &EventSequence, initial: [f64; 2]) -> Result<f64> {
    let rates = modulated_rates(spec)?;
    forward_loglik(&rates, seq, &SubGrid::default(), initial)
}

fn modulated_rates(spec: &ModelSpec) -> Result<Rates> {
    match spec {
        ModelSpec::Mmpp(p) => Ok(Rates::from(p)),
        ModelSpec::Mmhp(p) => Ok(Rates::from(p)),
        other => Err(Error::Usage(format!(
            "{} has no latent chain to decode",
            other.kind()
        ))),
    }
}

fn ln0(x: f64) -> f64 {
    if x > 0.0 {
        x.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Maximum a posteriori latent path by a Viterbi pass over the same
/// propagators the likelihood uses. Transitions land on substep
/// boundaries; each substep carries the state the chain is in at its end.
pub fn decode_latent_path(spec: &ModelSpec, seq: &EventSequence) -> Result<LatentPath> {
    let rates = modulated_rates(spec)?;
    let pi = rates.stationary();
    let mut delta = [ln0(pi[0]), ln0(pi[1])];
    let mut steps: Vec<(f64, f64, f64)> = Vec::new();
    let mut back: Vec<[u8; 2]> = Vec::new();
    let log_l0 = ln0(rates.lambda0);
    walk(&rates, seq, &SubGrid::default(), |step| {
        match step {
            Step::Advance {
                end,
                h,
                level,
                mean1,
                twist,
            } => {
                let (log_scale, k) = rates.propagator(h, mean1, twist)?;
                let mut next = [0.0; 2];
                let mut ptr = [0u8; 2];
                for j in 0..2 {
                    let stay = delta[j] + ln0(k[j][j]);
                    let other = 1 - j;
                    let switch = delta[other] + ln0(k[other][j]);
                    if switch > stay {
                        next[j] = switch + log_scale;
                        ptr[j] = other as u8;
                    } else {
                        next[j] = stay + log_scale;
                        ptr[j] = j as u8;
                    }
                }
                // Shift to keep the scores bounded; only differences matter.
                let top = next[0].max(next[1]);
                if top.is_finite() {
                    next = [next[0] - top, next[1] - top];
                }
                delta = next;
                steps.push((end - h, end, level));
                back.push(ptr);
            }
            Step::Emit { index, rate1 } => {
                delta = [delta[0] + log_l0, delta[1] + ln0(rate1)];
                if !(delta[0].is_finite() || delta[1].is_finite()) {
                    return Err(Error::numeric(index, "no latent state can explain this event"));
                }
            }
        }
        Ok(())
    })?;
    if steps.is_empty() {
        return LatentPath::constant(if pi[1] > pi[0] { 1 } else { 0 }, seq.horizon());
    }
    // `ends_in[r]` is the state at the end of step r.
    let mut ends_in = vec![0u8; steps.len()];
    let mut state: u8 = if delta[1] > delta[0] { 1 } else { 0 };
    for r in (0..steps.len()).rev() {
        ends_in[r] = state;
        state = back[r][state as usize];
    }
    let mut initial = state;
    let mut times = Vec::new();
    let mut states = vec![initial];
    for (r, &(a, b, level)) in steps.iter().enumerate() {
        let from = if r == 0 { initial } else { ends_in[r - 1] };
        let to = ends_in[r];
        if from == to {
            continue;
        }
        let u = switch_time(&rates, from, a, b, level);
        if u <= 0.0 {
            initial = to;
            states = vec![initial];
        } else {
            times.push(u);
            states.push(to);
        }
    }
    LatentPath::new(times, states, seq.horizon())
}

/// Time in `[a, b)` of the single switch out of `from` that maximizes the
/// path density over a step starting with excitation `level`. A switch
/// that is best at the end of the step is placed just before `b`, so that
/// an event at `b` belongs to the new state.
fn switch_time(rates: &Rates, from: u8, a: f64, b: f64, level: f64) -> f64 {
    let h = b - a;
    let late = b - 1e-9 * h;
    // d/du of the log density of switching at u is ±(c0 − c1(u)) with the
    // total exit-plus-event rates c0 = q01 + λ₀ and
    // c1(u) = q10 + λ₁ + level·e^{−β(u−a)}.
    let c0 = rates.q01 + rates.lambda0;
    let c1 = |u: f64| rates.q10 + rates.lambda1 + level * (-rates.beta * (u - a)).exp();
    if from == 0 {
        // Concave: derivative c1(u) − c0 is non-increasing.
        if c1(a) <= c0 {
            return a;
        }
        if c1(b) >= c0 {
            return late;
        }
        let u = a - ((c0 - rates.q10 - rates.lambda1) / level).ln() / rates.beta;
        u.clamp(a, late)
    } else {
        // Convex: compare the two ends, `∫(c0 − c1)` over the step.
        let integral_c1 = (rates.q10 + rates.lambda1) * h
            + if rates.beta > 0.0 {
                level * -(-rates.beta * h).exp_m1() / rates.beta
            } else {
                0.0
            };
        if c0 * h - integral_c1 > 0.0 {
            late
        } else {
            a
        }
    }
}
