//! Samplers for every model, including the block-structured network
//! generator. All randomness comes from a [`RandomSource`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{EventSequence, NetworkEvent, NetworkEventLog, PairIndex, Partition};
use crate::models::{GeneratorMatrix, HawkesParams, LatentPath, MmhpParams, MmppParams};
use crate::rng::RandomSource;

/// Accepted-event count at which a sampler gives up.
pub const EXPLOSION_LIMIT: usize = 10_000_000;

fn check_horizon(horizon: f64) -> Result<()> {
    if horizon.is_finite() && horizon > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(format!("horizon must be finite and > 0, got {horizon}")))
    }
}

/// Homogeneous Poisson process by exponential inter-arrival times.
pub fn simulate_poisson(lambda: f64, horizon: f64, rng: &mut RandomSource) -> Result<EventSequence> {
    check_horizon(horizon)?;
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::validation(format!("Poisson rate must be > 0, got {lambda}")));
    }
    let mut times = Vec::new();
    let mut t = 0.0;
    loop {
        t += rng.exponential(lambda);
        if t > horizon {
            break;
        }
        times.push(t);
        if times.len() > EXPLOSION_LIMIT {
            return Err(Error::Explosion {
                limit: EXPLOSION_LIMIT,
            });
        }
    }
    EventSequence::new(times, horizon)
}

/// Two-state chain path by Gillespie sampling, started from the stationary
/// law.
pub fn simulate_ctmc(q: &GeneratorMatrix, horizon: f64, rng: &mut RandomSource) -> Result<LatentPath> {
    check_horizon(horizon)?;
    let pi = q.stationary();
    let mut state: u8 = if rng.uniform() < pi[0] { 0 } else { 1 };
    let mut states = vec![state];
    let mut times = Vec::new();
    let mut t = 0.0;
    loop {
        let rate = q.exit_rate(state);
        if rate == 0.0 {
            break;
        }
        t += rng.exponential(rate);
        if t >= horizon {
            break;
        }
        state = 1 - state;
        times.push(t);
        states.push(state);
    }
    LatentPath::new(times, states, horizon)
}

/// Ogata/Lewis thinning. Between events the exponential-kernel intensity
/// only decays, so the intensity just after the latest accepted event
/// bounds it until the next acceptance.
pub fn simulate_hawkes(params: &HawkesParams, horizon: f64, rng: &mut RandomSource) -> Result<EventSequence> {
    check_horizon(horizon)?;
    params.validate()?;
    let path = LatentPath::constant(1, horizon)?;
    let times = thin_modulated(
        params.lambda1,
        params.lambda1,
        params.alpha,
        params.beta,
        &path,
        rng,
    )?;
    EventSequence::new(times, horizon)
}

/// Chain path first, then piecewise Poisson sampling on its segments.
pub fn simulate_mmpp(
    params: &MmppParams,
    horizon: f64,
    rng: &mut RandomSource,
) -> Result<(EventSequence, LatentPath)> {
    params.validate()?;
    let path = simulate_ctmc(&params.q, horizon, rng)?;
    let mut times = Vec::new();
    for (start, end, state) in path.segments() {
        let rate = if state == 0 { params.lambda0 } else { params.lambda1 };
        let mut t = start;
        loop {
            t += rng.exponential(rate);
            if t > end {
                break;
            }
            times.push(t);
        }
        if times.len() > EXPLOSION_LIMIT {
            return Err(Error::Explosion {
                limit: EXPLOSION_LIMIT,
            });
        }
    }
    Ok((EventSequence::new(times, horizon)?, path))
}

/// Chain path first, then thinning against the state-dependent intensity.
/// In state 1 the Hawkes excitation counts every earlier event, including
/// those accepted while the chain was quiet.
pub fn simulate_mmhp(
    params: &MmhpParams,
    horizon: f64,
    rng: &mut RandomSource,
) -> Result<(EventSequence, LatentPath)> {
    params.validate()?;
    let path = simulate_ctmc(&params.q, horizon, rng)?;
    let times = thin_modulated(
        params.lambda0,
        params.lambda1,
        params.alpha,
        params.beta,
        &path,
        rng,
    )?;
    Ok((EventSequence::new(times, horizon)?, path))
}

/// Thinning on a fixed chain path. The bound is refreshed after every
/// accepted event and at every segment boundary.
fn thin_modulated(
    lambda0: f64,
    lambda1: f64,
    alpha: f64,
    beta: f64,
    path: &LatentPath,
    rng: &mut RandomSource,
) -> Result<Vec<f64>> {
    let mut times = Vec::new();
    let mut excite = 0.0; // α Σ exp(-β (t - t_m)) at the current time
    for (start, end, state) in path.segments() {
        let mut t = start;
        loop {
            let bound = if state == 1 { lambda1 + excite } else { lambda0 };
            let w = rng.exponential(bound);
            if t + w > end {
                excite *= (-beta * (end - t)).exp();
                break;
            }
            t += w;
            excite *= (-beta * w).exp();
            let rate = if state == 1 { lambda1 + excite } else { lambda0 };
            if rng.uniform() * bound <= rate {
                times.push(t);
                excite += alpha;
                if times.len() > EXPLOSION_LIMIT {
                    return Err(Error::Explosion {
                        limit: EXPLOSION_LIMIT,
                    });
                }
            }
        }
    }
    Ok(times)
}

/// Block-structured jump sizes: `within_alpha` when sender and receiver
/// share a block, `between_alpha` otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockAlphaSpec {
    pub partition: Partition,
    pub within_alpha: f64,
    pub between_alpha: f64,
}

impl BlockAlphaSpec {
    pub fn new(partition: Partition, within_alpha: f64, between_alpha: f64) -> Result<Self> {
        for (name, v) in [("within_alpha", within_alpha), ("between_alpha", between_alpha)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(BlockAlphaSpec {
            partition,
            within_alpha,
            between_alpha,
        })
    }

    pub fn alpha(&self, pair: PairIndex) -> f64 {
        if self.partition.same_block(pair) {
            self.within_alpha
        } else {
            self.between_alpha
        }
    }
}

/// MMHP parameters shared by every pair of a network; only α varies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkBaseParams {
    pub lambda0: f64,
    pub lambda1: f64,
    pub beta: f64,
    pub q: GeneratorMatrix,
}

impl NetworkBaseParams {
    pub fn with_alpha(&self, alpha: f64) -> Result<MmhpParams> {
        MmhpParams::new(self.lambda0, self.lambda1, alpha, self.beta, self.q)
    }
}

#[derive(Debug, Clone)]
pub struct NetworkSimulation {
    pub log: NetworkEventLog,
    /// Ground-truth chain path of every ordered pair, sender-major.
    pub paths: Vec<(PairIndex, LatentPath)>,
    /// Parameters each pair was simulated with, sender-major.
    pub params: Vec<(PairIndex, MmhpParams)>,
}

impl NetworkSimulation {
    pub fn path(&self, pair: PairIndex) -> Option<&LatentPath> {
        self.paths
            .binary_search_by(|(p, _)| p.cmp(&pair))
            .ok()
            .map(|i| &self.paths[i].1)
    }
}

/// Stream id of a pair for [`RandomSource::split`]: `(sender << 32) | receiver`.
pub fn pair_stream(pair: PairIndex) -> u64 {
    ((pair.sender() as u64) << 32) | pair.receiver() as u64
}

/// Independent MMHP per ordered pair with block-structured α and its own
/// chain, merged into one time-sorted log. Each pair draws from
/// `rng.split(pair_stream(pair))`, so the result does not depend on the
/// order in which pairs are simulated.
pub fn simulate_network(
    base: &NetworkBaseParams,
    alpha_spec: &BlockAlphaSpec,
    node_count: usize,
    horizon: f64,
    rng: &RandomSource,
) -> Result<NetworkSimulation> {
    check_horizon(horizon)?;
    if alpha_spec.partition.node_count() != node_count {
        return Err(Error::validation(format!(
            "block partition covers {} nodes, network has {node_count}",
            alpha_spec.partition.node_count()
        )));
    }
    let pairs: Vec<PairIndex> = PairIndex::all(node_count).collect();
    let results: Vec<Result<(PairIndex, MmhpParams, EventSequence, LatentPath)>> = pairs
        .par_iter()
        .map(|&pair| {
            let params = base.with_alpha(alpha_spec.alpha(pair))?;
            let mut stream = rng.split(pair_stream(pair));
            let (seq, path) = simulate_mmhp(&params, horizon, &mut stream)?;
            Ok((pair, params, seq, path))
        })
        .collect();
    let mut events = Vec::new();
    let mut paths = Vec::with_capacity(pairs.len());
    let mut params = Vec::with_capacity(pairs.len());
    for r in results {
        let (pair, p, seq, path) = r?;
        events.extend(seq.times().iter().map(|&time| NetworkEvent {
            time,
            sender: pair.sender(),
            receiver: pair.receiver(),
        }));
        paths.push((pair, path));
        params.push((pair, p));
    }
    let log = NetworkEventLog::new(node_count, events, horizon)?;
    Ok(NetworkSimulation { log, paths, params })
}
