use std::path::PathBuf;

use super::{file_name, SimulateArgs};
use crate::error::Result;
use crate::fit::NetworkFitResult;
use crate::io::{self, ModelFile, NetworkFitFile, Provenance, SimulateConfig, PROVENANCE_FILE};
use crate::models::ModelSpec;
use crate::rng::RandomSource;
use crate::simulate::{
    simulate_hawkes, simulate_mmhp, simulate_mmpp, simulate_network, simulate_poisson,
};

/// Writes `events.csv`, the ground-truth model (`true_model.json` or, for
/// networks, `true_fit.json`), the true latent path(s) of modulated models,
/// and `provenance.json`. Returns the written files.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<Vec<PathBuf>> {
    let config = SimulateConfig::read(&args.config)?;
    let hash = io::config_hash(&config);
    io::ensure_dir(&args.out)?;
    let out = |name: &str| args.out.join(name);
    let mut written = Vec::new();
    let mut rng = RandomSource::new(config.seed);
    let horizon = config.horizon;

    let node_count = match (&config.model, &config.network) {
        (Some(model), _) => {
            let (seq, path) = match model {
                ModelSpec::Poisson(p) => (simulate_poisson(p.lambda(), horizon, &mut rng)?, None),
                ModelSpec::Hawkes(p) => (simulate_hawkes(p, horizon, &mut rng)?, None),
                ModelSpec::Mmpp(p) => {
                    let (s, z) = simulate_mmpp(p, horizon, &mut rng)?;
                    (s, Some(z))
                }
                ModelSpec::Mmhp(p) => {
                    let (s, z) = simulate_mmhp(p, horizon, &mut rng)?;
                    (s, Some(z))
                }
            };
            io::write_sequence(&out("events.csv"), &seq)?;
            written.push(out("events.csv"));
            if let Some(z) = path {
                io::write_path(&out("latent_path.csv"), &z)?;
                written.push(out("latent_path.csv"));
            }
            io::write_json(&out("true_model.json"), &ModelFile::truth(*model, horizon))?;
            written.push(out("true_model.json"));
            None
        }
        (None, Some(net)) => {
            let base = net.base()?;
            let spec = net.alpha_spec()?;
            let sim = simulate_network(&base, &spec, net.node_count, horizon, &rng)?;
            io::write_network(&out("events.csv"), &sim.log)?;
            io::write_pair_paths(&out("latent_paths.csv"), sim.paths.iter().map(|(p, z)| (*p, z)))?;
            let truth = NetworkFitResult::from_truth(&base, &spec, &sim.log)?;
            io::write_json(&out("true_fit.json"), &NetworkFitFile::new("true", truth, horizon))?;
            written.extend(["events.csv", "latent_paths.csv", "true_fit.json"].map(out));
            Some(net.node_count)
        }
        (None, None) => unreachable!("validated config names a scenario"),
    };

    io::write_json(
        &out(PROVENANCE_FILE),
        &Provenance::new(config.seed, horizon, node_count, hash),
    )?;
    written.push(out(PROVENANCE_FILE));
    let names: Vec<String> = written.iter().map(|p| file_name(p)).collect();
    println!("wrote {} to {}", names.join(", "), args.out.display());
    Ok(written)
}
