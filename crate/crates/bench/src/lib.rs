//! Shared fixtures for the benchmark targets.

use zdsc_core::gauss::{grids_with_counts, GridCounts};
use zdsc_core::{GridSet, SourceChannelModel, TabulatedEncoder};

/// The side-information benchmark model at a given transmit power.
pub fn benchmark_model(power: f64) -> SourceChannelModel {
    SourceChannelModel::new(1.0, 1.0, 0.99, 1.0, power).unwrap()
}

/// Default-sized grids covering a linear encoder at the given power.
pub fn benchmark_grids(model: &SourceChannelModel, power: f64) -> GridSet {
    grids_with_counts(model, 5.0 * power.sqrt() * 1.1, GridCounts::default()).unwrap()
}

/// The linear encoder tabulated on the benchmark grids.
pub fn linear_encoder(grids: &GridSet, power: f64) -> TabulatedEncoder {
    let a = power.sqrt();
    TabulatedEncoder::from_fn(grids.x_grid.clone(), move |x| a * x).unwrap()
}
