//! Reference networks shared by the benchmarks.

use qnet_core::closedform::critical_coupling;
use qnet_core::netcore::{build_parallel, build_series, lower_hybrid, validate, HybridSpec, SweepGrid};
use qnet_core::ValidatedNetwork;

/// Balanced, critically coupled chain of `n` degenerate states.
pub fn critical_chain(n: usize) -> ValidatedNetwork {
    let g = critical_coupling(1.0, 1.0);
    validate(&build_series(&vec![0.0; n], 1.0, 1.0, &vec![g; n - 1]).unwrap()).unwrap()
}

/// Balanced parallel network with unit spacing.
pub fn spaced_parallel(n: usize) -> ValidatedNetwork {
    let omegas: Vec<f64> = (0..n).map(|i| i as f64 - (n - 1) as f64 / 2.0).collect();
    validate(&build_parallel(&omegas, &vec![1.0; n], &vec![1.0; n]).unwrap()).unwrap()
}

/// `m` manifolds of `k` states spaced by 2.5, uniformly coupled.
pub fn layered_hybrid(m: usize, k: usize) -> HybridSpec {
    let manifold: Vec<f64> = (0..k).map(|i| 2.5 * (i as f64 - (k - 1) as f64 / 2.0)).collect();
    HybridSpec::homogeneous(vec![manifold; m], 1.0, 1.0, &vec![0.5; m - 1])
}

pub fn lowered(h: &HybridSpec) -> ValidatedNetwork {
    validate(&lower_hybrid(h).unwrap()).unwrap()
}

/// Uniform grid of `points` samples over `[-span, span]`.
pub fn grid(span: f64, points: usize) -> SweepGrid {
    SweepGrid::linspace(-span, span, points).unwrap()
}
