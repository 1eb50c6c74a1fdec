//! Long-range dependence analysis and synthesis for packet traffic.
//!
//! The pipeline: ingest a packet trace ([`trace`]), bin it into a count
//! series, compute the variance-time curve ([`stats`]) and fit the Hurst
//! coefficient ([`hurst`]). Synthetic traffic comes from [`synth`];
//! [`shuffle`] produces surrogates with selected correlations removed, and
//! [`queue`] measures what those correlations do to a single-server queue.

pub mod cli;
pub mod fmt;
pub mod hurst;
pub mod queue;
pub mod shuffle;
pub mod stats;
pub mod synth;
pub mod trace;

pub use hurst::{Analysis, DependenceClass, HurstEstimate};
pub use queue::{Knee, QueueRunResult, SweepCurve};
pub use shuffle::{ShuffleKind, ShuffleSpec};
pub use synth::{Seed, TrainSourceParams};
pub use trace::{CountSeries, InterarrivalSeries, PacketRecord, Trace};
