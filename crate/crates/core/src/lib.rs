//! Synthetic line-figure stimuli, small fully connected networks, and block
//! networks that grow new neurons beside frozen, previously trained bases.

pub mod block;
pub mod dataset;
pub mod geometry;
pub mod gradcheck;
pub mod harness;
pub mod kv;
pub mod linalg;
pub mod model_io;
pub mod net;
pub mod raster;
pub mod rng;
pub mod stimulus;
pub mod train;

pub use block::{compose, forward_block, train_block, BaseModel, BlockError, BlockNetwork, BlockSpec};
pub use dataset::{build_dataset, read_dataset, write_dataset, Dataset, DatasetError};
pub use geometry::{Point, Segment};
pub use linalg::Matrix;
pub use net::{backward, forward, init_network, mlp_specs, Activation, DenseLayer, NetError, Network};
pub use raster::{rasterize, Image};
pub use rng::Rng;
pub use stimulus::{gen_spec, verify_spec, Polarity, StimulusSpec, Task};
pub use train::{train, TrainConfig, TrainError, TrainLog};
