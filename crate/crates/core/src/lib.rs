pub mod asp;
pub mod dataset;
pub mod label;
pub mod learner;
pub mod metrics;
pub mod oracle;
pub mod pca;
pub mod pipeline;
pub mod sampling;

pub use label::Label;
