//! Fixtures shared by the benchmarks.

use perichannel::{ChannelGeometry, Discretization};

/// Resolutions benchmarked for every stage.
pub const SIZES: [usize; 3] = [8, 16, 32];

pub fn wavy() -> ChannelGeometry {
    ChannelGeometry::cosine(0.2, 1).expect("valid amplitude")
}

pub fn discretization(n: usize) -> Discretization {
    Discretization::new(&wavy(), n, n).expect("valid mesh")
}
