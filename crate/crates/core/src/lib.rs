//! Federated edge learning over a multi-antenna uplink.
//!
//! Clients train locally, sparsify their model updates with error feedback,
//! compress them with random measurement matrices and transmit them as analog
//! samples. The base station either estimates every client channel and
//! separates the clients with the BLUE (zero-forcing) combiner, or estimates
//! only the sum channel and aggregates over the air. Both paths end in a
//! compressed-sensing recovery and a federated-averaging step.
//!
//! The crate is organised bottom-up:
//!
//! * [`channel`]: Rayleigh block fading and pilot reception.
//! * [`estimation`]: MMSE estimates of individual and sum channels.
//! * [`coding`]: packing, top-S sparsification with residuals, measurement matrices.
//! * [`airlink`]: power control and the uplink data model.
//! * [`combining`]: BLUE, sum-channel combining and the genie baseline.
//! * [`recovery`]: matching pursuit and iterative hard thresholding.
//! * [`learning`]: the networks, backpropagation, local SGD and global updates.
//! * [`harness`]: configuration, MNIST ingestion, round pipelines and metrics.

pub mod airlink;
pub mod channel;
pub mod coding;
pub mod combining;
mod error;
pub mod estimation;
pub mod harness;
pub mod learning;
pub mod linalg;
pub mod recovery;
pub mod rng;

pub use error::{Error, MnistError, Result};

/// Dense complex matrix used for channels, pilots and measurement matrices.
pub type CMat = nalgebra::DMatrix<num_complex::Complex64>;
/// Dense complex column vector.
pub type CVec = nalgebra::DVector<num_complex::Complex64>;
