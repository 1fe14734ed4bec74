//! Adaptive first-moment/second-moment optimizers and the tooling to benchmark them: stochastic
//! objectives, iterate averaging and an online-regret harness.
//!
//! Optimizer state, vectors and hyperparameters are generic over [`Scalar`] (`f32` or `f64`);
//! objectives and the regret harness work in `f64`.

pub mod averaging;
pub mod error;
pub mod hyper;
pub mod objectives;
pub mod optim;
pub mod regret;
pub mod rng;
pub mod scalar;
pub mod vector;

pub use averaging::{AveragerState, AveragingMode};
pub use error::{Error, Result};
pub use hyper::{AlphaSchedule, Beta1Schedule};
pub use optim::{OptimizerKind, StepReport};
pub use rng::SeededRng;
pub use scalar::Scalar;
pub use vector::{SparseGradient, Vector};

pub type ParamVector = Vector<f64>;
pub type GradVector = Vector<f64>;
pub type HyperParams = hyper::HyperParams<f64>;
pub type AdamState = optim::AdamState<f64>;
pub type AdaMaxState = optim::AdaMaxState<f64>;
pub type BaselineState = optim::BaselineState<f64>;
pub type Optimizer = optim::Optimizer<f64>;
pub type Averager = AveragerState<f64>;
