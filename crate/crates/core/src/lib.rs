//! Point-process models, simulators, maximum-likelihood fitting and
//! goodness-of-fit diagnostics for event sequences and networks of
//! sender-receiver event streams.

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod events;
pub mod fit;
pub mod io;
pub mod linalg;
pub mod models;
pub mod netdiag;
pub mod optim;
pub mod quad;
pub mod rng;
pub mod simulate;
pub mod svg;

pub use error::{Error, Result};
pub use events::{EventSequence, NetworkEvent, NetworkEventLog, NodeId, PairIndex, Partition};
pub use models::{
    GeneratorMatrix, HawkesParams, LatentPath, MmhpParams, MmppParams, ModelKind, ModelSpec,
    PoissonParams,
};
pub use rng::RandomSource;
