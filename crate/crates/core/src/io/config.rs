use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{NodeId, Partition};
use crate::models::{GeneratorMatrix, ModelSpec};
use crate::simulate::{BlockAlphaSpec, NetworkBaseParams};

/// Parses a TOML file, rejecting unknown keys where the target type does.
/// Errors point at the offending line.
pub fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| {
        let line = e
            .span()
            .map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        Error::Parse {
            path: path.to_path_buf(),
            line,
            message: e.message().to_owned(),
        }
    })
}

/// Configuration of `ppdiag simulate`: exactly one of `model` (a single
/// stream) or `network`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub seed: u64,
    pub horizon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<NetworkSimConfig>,
}

/// A network of MMHP pairs sharing every parameter except α, which is
/// `within_alpha` inside a block and `between_alpha` across blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSimConfig {
    pub node_count: usize,
    pub lambda0: f64,
    pub lambda1: f64,
    pub beta: f64,
    pub q: GeneratorMatrix,
    pub within_alpha: f64,
    pub between_alpha: f64,
    /// Node ids of each block; one block holding every node when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<Vec<NodeId>>>,
}

impl NetworkSimConfig {
    pub fn partition(&self) -> Result<Partition> {
        match &self.blocks {
            Some(blocks) => Partition::new(blocks.clone(), self.node_count),
            None => Ok(Partition::single(self.node_count)),
        }
    }

    pub fn base(&self) -> Result<NetworkBaseParams> {
        let base = NetworkBaseParams {
            lambda0: self.lambda0,
            lambda1: self.lambda1,
            beta: self.beta,
            q: self.q,
        };
        base.with_alpha(self.within_alpha)?;
        base.with_alpha(self.between_alpha)?;
        Ok(base)
    }

    pub fn alpha_spec(&self) -> Result<BlockAlphaSpec> {
        BlockAlphaSpec::new(self.partition()?, self.within_alpha, self.between_alpha)
    }
}

impl SimulateConfig {
    pub fn read(path: &Path) -> Result<Self> {
        let config: SimulateConfig = read_toml(path)?;
        config.validate().map_err(|e| match e {
            Error::Validation(m) => Error::Validation(format!("{}: {m}", path.display())),
            other => other,
        })?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::validation(format!(
                "horizon must be finite and positive, got {}",
                self.horizon
            )));
        }
        match (&self.model, &self.network) {
            (Some(model), None) => model.validate(),
            (None, Some(net)) => {
                if net.node_count < 2 {
                    return Err(Error::validation(format!(
                        "network.node_count must be at least 2, got {}",
                        net.node_count
                    )));
                }
                net.base()?;
                net.alpha_spec().map(|_| ())
            }
            _ => Err(Error::validation(
                "config needs exactly one of a [model] or a [network] table",
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<SimulateConfig> {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, text).unwrap();
        SimulateConfig::read(&p)
    }

    const MMHP: &str = r#"
seed = 42
horizon = 100.0

[model]
kind = "mmhp"
lambda0 = 0.9
lambda1 = 1.1
alpha = 1.1
beta = 1.5
q = { q01 = 0.2, q10 = 0.2 }
"#;

    const NETWORK: &str = r#"
seed = 1
horizon = 500.0

[network]
node_count = 10
lambda0 = 0.05
lambda1 = 0.08
beta = 22.0
q = { q01 = 0.01, q10 = 0.04 }
within_alpha = 20.0
between_alpha = 0.5
blocks = [[1, 2, 3, 4], [5, 6, 7, 8, 9, 10]]
"#;

    #[test]
    fn univariate_config_parses() {
        let c = parse(MMHP).unwrap();
        assert!(matches!(c.model, Some(ModelSpec::Mmhp(_))));
        assert_eq!(c.seed, 42);
    }

    #[test]
    fn network_config_parses() {
        let c = parse(NETWORK).unwrap();
        let net = c.network.unwrap();
        assert_eq!(net.partition().unwrap().block_count(), 2);
    }

    #[test]
    fn unknown_keys_are_rejected_with_line() {
        let text = MMHP.replace("beta = 1.5", "beta = 1.5\ngamma = 2.0");
        match parse(&text) {
            Err(Error::Parse { line, message, .. }) => {
                assert!(line >= 5, "line {line}");
                assert!(message.contains("gamma"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
        let text = NETWORK.replace("seed = 1", "seed = 1\ncolour = 3");
        assert!(matches!(parse(&text), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn malformed_partition_is_rejected() {
        let text = NETWORK.replace("[5, 6, 7, 8, 9, 10]", "[5, 6, 7, 8, 9, 10, 11]");
        assert!(matches!(parse(&text), Err(Error::Validation(_))));
    }

    #[test]
    fn exactly_one_scenario_is_required() {
        assert!(parse("seed = 1\nhorizon = 2.0\n").is_err());
        let both = format!("{MMHP}\n{}", &NETWORK[NETWORK.find("[network]").unwrap()..]);
        assert!(parse(&both).is_err());
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(parse(&MMHP.replace("beta = 1.5", "beta = -1.5")).is_err());
        assert!(parse(&MMHP.replace("horizon = 100.0", "horizon = 0.0")).is_err());
    }
}
