//! The fitted intensity of any model as a piecewise function of time, with
//! the latent path plugged in for the modulated models.

use super::{LatentPath, ModelSpec};
use crate::error::{Error, Result};
use crate::events::EventSequence;

/// One smooth stretch `(start, end]` of an intensity:
/// `λ(t) = base + excitation · exp(-decay · (t - start))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityPiece {
    pub start: f64,
    pub end: f64,
    pub base: f64,
    pub excitation: f64,
    pub decay: f64,
}

impl IntensityPiece {
    pub fn rate(&self, t: f64) -> f64 {
        if self.excitation == 0.0 {
            self.base
        } else {
            self.base + self.excitation * (-self.decay * (t - self.start)).exp()
        }
    }

    /// `∫_{start}^{t} λ(s) ds` for `t` inside the piece.
    pub fn integral_to(&self, t: f64) -> f64 {
        let dt = t - self.start;
        let mut v = self.base * dt;
        if self.excitation != 0.0 {
            v += self.excitation / self.decay * -(-self.decay * dt).exp_m1();
        }
        v
    }

    pub fn integral(&self) -> f64 {
        self.integral_to(self.end)
    }

    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// A model intensity for one event sequence, split at every event and
/// every latent transition.
#[derive(Debug, Clone)]
pub struct PiecewiseIntensity {
    pieces: Vec<IntensityPiece>,
    /// Index of the piece ending at each event.
    event_piece: Vec<usize>,
    horizon: f64,
}

impl PiecewiseIntensity {
    /// `path` is required exactly when the model is modulated.
    pub fn new(spec: &ModelSpec, seq: &EventSequence, path: Option<&LatentPath>) -> Result<Self> {
        let path = match (spec.is_modulated(), path) {
            (true, None) => {
                return Err(Error::Usage(format!(
                    "the {} intensity needs a latent path",
                    spec.kind()
                )))
            }
            (true, Some(p)) => {
                if (p.horizon() - seq.horizon()).abs() > 1e-9 * seq.horizon() {
                    return Err(Error::Usage(format!(
                        "latent path horizon {} differs from the event horizon {}",
                        p.horizon(),
                        seq.horizon()
                    )));
                }
                Some(p)
            }
            (false, _) => None,
        };
        // (base in state 0, base in state 1, alpha, beta, excitation active in state 0)
        let (b0, b1, alpha, beta, excite0) = match spec {
            ModelSpec::Poisson(p) => (p.lambda, p.lambda, 0.0, 1.0, false),
            ModelSpec::Hawkes(p) => (p.lambda1, p.lambda1, p.alpha, p.beta, true),
            ModelSpec::Mmpp(p) => (p.lambda0, p.lambda1, 0.0, 1.0, false),
            ModelSpec::Mmhp(p) => (p.lambda0, p.lambda1, p.alpha, p.beta, false),
        };
        let times = seq.times();
        let transitions: &[f64] = path.map(|p| p.transition_times()).unwrap_or(&[]);
        let states: &[u8] = path.map(|p| p.states()).unwrap_or(&[1]);
        let horizon = seq.horizon();

        let mut pieces = Vec::with_capacity(times.len() + transitions.len() + 1);
        let mut event_piece = Vec::with_capacity(times.len());
        let (mut ie, mut it) = (0usize, 0usize);
        let mut start = 0.0;
        let mut excite = 0.0; // total excitation at start+, whatever the state
        loop {
            let next_event = times.get(ie).copied().unwrap_or(f64::INFINITY);
            let next_trans = transitions.get(it).copied().unwrap_or(f64::INFINITY);
            let end = next_event.min(next_trans).min(horizon);
            if end > start {
                let state = states[it];
                let (base, on) = if state == 1 { (b1, true) } else { (b0, excite0) };
                pieces.push(IntensityPiece {
                    start,
                    end,
                    base,
                    excitation: if on { excite } else { 0.0 },
                    decay: beta,
                });
                excite *= (-beta * (end - start)).exp();
            }
            if end >= horizon && next_event > horizon {
                break;
            }
            if next_trans <= next_event {
                it += 1;
            }
            if next_event <= next_trans {
                event_piece.push(pieces.len().saturating_sub(1));
                excite += alpha;
                ie += 1;
            }
            start = end;
            if ie >= times.len() && it >= transitions.len() && start >= horizon {
                break;
            }
        }
        Ok(PiecewiseIntensity {
            pieces,
            event_piece,
            horizon,
        })
    }

    pub fn pieces(&self) -> &[IntensityPiece] {
        &self.pieces
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    fn piece_index(&self, t: f64) -> usize {
        // Piece with start < t <= end; t = 0 maps to the first piece.
        self.pieces
            .partition_point(|p| p.end < t)
            .min(self.pieces.len() - 1)
    }

    fn check(&self, t: f64) -> Result<()> {
        if t.is_nan() || t < 0.0 || t > self.horizon {
            return Err(Error::Range {
                t,
                horizon: self.horizon,
            });
        }
        Ok(())
    }

    /// Left-limit intensity λ(t), which excludes an event's own jump at its time.
    pub fn rate(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        let p = &self.pieces[self.piece_index(t)];
        Ok(p.rate(t.max(p.start)))
    }

    pub fn compensator(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        let mut total = 0.0;
        for p in &self.pieces {
            if p.end <= t {
                total += p.integral();
            } else {
                if p.start < t {
                    total += p.integral_to(t);
                }
                break;
            }
        }
        Ok(total)
    }

    /// Intensity at each event time.
    pub fn event_rates(&self) -> Vec<f64> {
        self.event_piece
            .iter()
            .map(|&k| {
                let p = &self.pieces[k];
                p.rate(p.end)
            })
            .collect()
    }

    /// Compensator increments between consecutive events, `t₀ = 0`.
    pub fn compensator_increments(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.event_piece.len());
        let mut acc = 0.0;
        let mut next = 0usize;
        for (k, p) in self.pieces.iter().enumerate() {
            acc += p.integral();
            while next < self.event_piece.len() && self.event_piece[next] == k {
                out.push(acc);
                acc = 0.0;
                next += 1;
            }
        }
        out
    }
}

/// Model intensity at `t` (left limit).
pub fn intensity_at(
    spec: &ModelSpec,
    seq: &EventSequence,
    path: Option<&LatentPath>,
    t: f64,
) -> Result<f64> {
    seq.check_time(t)?;
    PiecewiseIntensity::new(spec, seq, path)?.rate(t)
}

/// `∫₀ᵗ λ(s) ds` for any model, with `path` plugged in for Z(t).
pub fn compensator(
    spec: &ModelSpec,
    seq: &EventSequence,
    path: Option<&LatentPath>,
    t: f64,
) -> Result<f64> {
    seq.check_time(t)?;
    PiecewiseIntensity::new(spec, seq, path)?.compensator(t)
}

/// Pointwise intensity on a sorted grid inside `[0, T]`.
pub fn intensity_path(
    spec: &ModelSpec,
    seq: &EventSequence,
    path: Option<&LatentPath>,
    grid: &[f64],
) -> Result<Vec<f64>> {
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::validation("intensity grid must be sorted"));
    }
    let f = PiecewiseIntensity::new(spec, seq, path)?;
    grid.iter().map(|&t| f.rate(t)).collect()
}
