//! Dense multiport scattering solver.
//!
//! For a validated network the state amplitudes obey `A(ω)·c = −Kᵀ·v_in`
//! with
//!
//! ```text
//! A_ij(ω) = (√(γ_iγ_j) + √(Γ_iΓ_j) + Σ_s √(μ_i^s μ_j^s))/2 + i·g_ij − i·Δ_i·δ_ij
//! ```
//!
//! and `K` the port-coupling matrix whose rows are `√γ`, `√Γ`, `√μ^s`. The
//! multiport scattering matrix is `S(ω) = I − K·A(ω)⁻¹·Kᵀ`, in the fixed port
//! order input, output, side channels. This module is the reference every
//! closed form is checked against.

use std::ops::{Deref, Index};

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::netcore::{NetError, SweepGrid, ValidatedNetwork};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Smallest LU pivot, relative to the largest entry of `A(ω)`, accepted as
/// nonsingular.
const PIVOT_RATIO: f64 = 1e-13;

pub const PORT_INPUT: usize = 0;
pub const PORT_OUTPUT: usize = 1;

/// Index of side channel `m` in the port ordering.
pub const fn side_port(m: usize) -> usize {
    2 + m
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScatterError {
    #[error("system matrix is singular at omega = {omega}{}", index.map(|i| format!(" (grid point {i})")).unwrap_or_default())]
    SingularSystem { omega: f64, index: Option<usize> },
    #[error("eigenvalue iteration did not converge for an {0}x{0} matrix")]
    EigenFailure(usize),
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Dense square complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix(pub DMatrix<Complex64>);

impl ComplexMatrix {
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// Row-major copy of the entries.
    pub fn to_row_major(&self) -> Vec<Complex64> {
        self.0.transpose().as_slice().to_vec()
    }

    /// `max_ij |(M†M − I)_ij|`.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.dim();
        let p = self.0.adjoint() * &self.0 - DMatrix::<Complex64>::identity(n, n);
        p.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl Deref for ComplexMatrix {
    type Target = DMatrix<Complex64>;

    fn deref(&self) -> &DMatrix<Complex64> {
        &self.0
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, ij: (usize, usize)) -> &Complex64 {
        &self.0[ij]
    }
}

/// Frequency-independent pieces of the solve, built once per network.
#[derive(Debug, Clone)]
pub struct Prepared {
    /// `KᵀK/2 + i·G + i·diag(ω_i)`; `A(ω)` is this minus `i·ω·I`.
    stat: DMatrix<Complex64>,
    /// `P × N` port couplings.
    k: DMatrix<f64>,
    /// `N × P` complex copy of `Kᵀ`, the right-hand sides.
    kt: DMatrix<Complex64>,
}

impl Prepared {
    pub fn new(net: &ValidatedNetwork) -> Self {
        let n = net.len();
        let p = net.port_count();
        let mut k = DMatrix::<f64>::zeros(p, n);
        for i in 0..n {
            k[(PORT_INPUT, i)] = net.input_decays[i].sqrt();
            k[(PORT_OUTPUT, i)] = net.output_decays[i].sqrt();
            for (s, side) in net.side_decays.iter().enumerate() {
                k[(side_port(s), i)] = side[i].sqrt();
            }
        }
        let ktk = k.transpose() * &k;
        let stat = DMatrix::from_fn(n, n, |i, j| {
            let mut a = Complex64::new(ktk[(i, j)] / 2.0, net.coupling[i][j]);
            if i == j {
                a += I * net.resonances[i];
            }
            a
        });
        let kt = k.transpose().map(Complex64::from);
        Prepared { stat, k, kt }
    }

    pub fn system_matrix(&self, omega: f64) -> DMatrix<Complex64> {
        let mut a = self.stat.clone();
        for i in 0..a.nrows() {
            a[(i, i)] -= I * omega;
        }
        a
    }

    pub fn smatrix(&self, omega: f64) -> Result<ComplexMatrix, ScatterError> {
        let a = self.system_matrix(omega);
        let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let lu = a.lu();
        let min_pivot = lu.u().diagonal().iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        let singular = ScatterError::SingularSystem { omega, index: None };
        if min_pivot.is_nan() || min_pivot <= PIVOT_RATIO * scale {
            return Err(singular);
        }
        let x = lu.solve(&self.kt).ok_or_else(|| singular.clone())?;
        let p = self.k.nrows();
        let mut s = DMatrix::<Complex64>::identity(p, p);
        for r in 0..p {
            for c in 0..p {
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..x.nrows() {
                    acc += self.k[(r, i)] * x[(i, c)];
                }
                s[(r, c)] -= acc;
            }
        }
        if s.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(singular);
        }
        Ok(ComplexMatrix(s))
    }
}

/// `A(ω)` for the network.
pub fn system_matrix(net: &ValidatedNetwork, omega: f64) -> ComplexMatrix {
    ComplexMatrix(Prepared::new(net).system_matrix(omega))
}

/// Multiport scattering matrix at a single frequency.
pub fn smatrix(net: &ValidatedNetwork, omega: f64) -> Result<ComplexMatrix, ScatterError> {
    Prepared::new(net).smatrix(omega)
}

/// `T(ω) = S[output ← input]` at a single frequency.
pub fn transmission(net: &ValidatedNetwork, omega: f64) -> Result<Complex64, ScatterError> {
    Ok(smatrix(net, omega)?[(PORT_OUTPUT, PORT_INPUT)])
}

/// Scattering matrices over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringResponse {
    grid: SweepGrid,
    smatrices: Vec<ComplexMatrix>,
}

impl ScatteringResponse {
    /// Wraps precomputed matrices; one per grid point.
    pub fn new(grid: SweepGrid, smatrices: Vec<ComplexMatrix>) -> Result<Self, NetError> {
        if grid.len() != smatrices.len() {
            return Err(NetError::LengthMismatch {
                field: "smatrices".into(),
                expected: grid.len(),
                found: smatrices.len(),
            });
        }
        Ok(ScatteringResponse { grid, smatrices })
    }

    /// A two-port response with the given transmission and the real,
    /// nonnegative reflection that conserves flux where `|T| ≤ 1`.
    pub fn from_transmission(grid: SweepGrid, t: &[Complex64]) -> Result<Self, NetError> {
        let mats = t
            .iter()
            .map(|&t| {
                let r = Complex64::from((1.0 - t.norm_sqr()).max(0.0).sqrt());
                ComplexMatrix(DMatrix::from_row_slice(2, 2, &[r, t, t, r]))
            })
            .collect();
        ScatteringResponse::new(grid, mats)
    }

    pub fn grid(&self) -> &SweepGrid {
        &self.grid
    }

    pub fn frequencies(&self) -> &[f64] {
        self.grid.as_slice()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn port_count(&self) -> usize {
        self.smatrices[0].dim()
    }

    pub fn smatrix(&self, index: usize) -> &ComplexMatrix {
        &self.smatrices[index]
    }

    pub fn smatrices(&self) -> &[ComplexMatrix] {
        &self.smatrices
    }

    pub fn t(&self, index: usize) -> Complex64 {
        self.smatrices[index][(PORT_OUTPUT, PORT_INPUT)]
    }

    pub fn r(&self, index: usize) -> Complex64 {
        self.smatrices[index][(PORT_INPUT, PORT_INPUT)]
    }

    /// Amplitude into the monitored output from side channel `m`.
    pub fn d(&self, m: usize, index: usize) -> Complex64 {
        self.smatrices[index][(PORT_OUTPUT, side_port(m))]
    }

    pub fn transmission(&self) -> Vec<Complex64> {
        (0..self.len()).map(|j| self.t(j)).collect()
    }

    pub fn reflection(&self) -> Vec<Complex64> {
        (0..self.len()).map(|j| self.r(j)).collect()
    }

    pub fn transmission_probability(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.t(j).norm_sqr()).collect()
    }
}

/// Evaluates the scattering matrix at every grid point. Points are
/// independent and written to fixed slots, so the result does not depend on
/// scheduling. On failure the error for the lowest failing index is returned.
pub fn sweep(net: &ValidatedNetwork, grid: &SweepGrid) -> Result<ScatteringResponse, ScatterError> {
    let prep = Prepared::new(net);
    let results: Vec<Result<ComplexMatrix, ScatterError>> = grid
        .as_slice()
        .par_iter()
        .map(|&w| prep.smatrix(w))
        .collect();
    let mut mats = Vec::with_capacity(results.len());
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok(m) => mats.push(m),
            Err(ScatterError::SingularSystem { omega, .. }) => {
                return Err(ScatterError::SingularSystem { omega, index: Some(index) })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(ScatteringResponse {
        grid: grid.clone(),
        smatrices: mats,
    })
}

/// Largest deviation from one of the column norms of the input/output block
/// of `S(ω)`. Zero for a lossless network; with side channels it is the
/// flux leaked out of the two-port block.
pub fn flux_check(net: &ValidatedNetwork, omega: f64) -> Result<f64, ScatterError> {
    let s = smatrix(net, omega)?;
    Ok((0..2)
        .map(|c| (1.0 - s[(0, c)].norm_sqr() - s[(1, c)].norm_sqr()).abs())
        .fold(0.0, f64::max))
}

/// `max_ij |(S†S − I)_ij|` over all ports.
pub fn unitarity_defect(net: &ValidatedNetwork, omega: f64) -> Result<f64, ScatterError> {
    Ok(smatrix(net, omega)?.unitarity_defect())
}

fn eigenvalues(m: DMatrix<Complex64>) -> Result<Vec<Complex64>, ScatterError> {
    let n = m.nrows();
    if n == 1 {
        return Ok(vec![m[(0, 0)]]);
    }
    // QR iteration can stall on very symmetric matrices (uniform chains at
    // critical coupling); a scalar shift breaks the symmetry and is undone
    // exactly afterwards.
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let shifts = [Complex64::new(0.0, 0.0), Complex64::new(0.37, 0.11), Complex64::new(-0.23, 0.41)];
    let mut found = None;
    for shift in shifts.map(|s| s * scale) {
        let shifted = &m + DMatrix::<Complex64>::identity(n, n) * shift;
        if let Some(ev) = Schur::try_new(shifted, f64::EPSILON, 10_000 * n).and_then(|s| s.eigenvalues()) {
            found = Some(ev.map(|z| z - shift));
            break;
        }
    }
    let ev = found.ok_or(ScatterError::EigenFailure(n))?;
    let mut v: Vec<Complex64> = ev.iter().copied().collect();
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(v)
}

fn effective_hamiltonian(net: &ValidatedNetwork, sign: impl Fn(usize) -> f64) -> DMatrix<Complex64> {
    let prep = Prepared::new(net);
    let n = net.len();
    DMatrix::from_fn(n, n, |i, j| {
        let mut loss = 0.0;
        for p in 0..prep.k.nrows() {
            loss += sign(p) * prep.k[(p, i)] * prep.k[(p, j)];
        }
        let diag = if i == j { net.resonances[i] } else { 0.0 };
        Complex64::new(diag + net.coupling[i][j], -loss / 2.0)
    })
}

/// Poles of `S(ω)`: eigenvalues of `Ω + G − i·KᵀK/2`, sorted by real part.
/// Each contributes a resonance at `Re λ` with half-width `|Im λ|`.
pub fn poles(net: &ValidatedNetwork) -> Result<Vec<Complex64>, ScatterError> {
    eigenvalues(effective_hamiltonian(net, |_| 1.0))
}

/// Zeros of `R(ω)` continued into the complex plane. They are the
/// eigenvalues of the effective Hamiltonian with the sign of the input
/// coupling flipped; a real zero is a frequency of perfect transmission.
pub fn reflection_zeros(net: &ValidatedNetwork) -> Result<Vec<Complex64>, ScatterError> {
    eigenvalues(effective_hamiltonian(net, |p| if p == PORT_INPUT { -1.0 } else { 1.0 }))
}

/// How densely to sample around each pole.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoleRefinement {
    /// Half-span of each cluster in units of the pole half-width.
    pub half_span: f64,
    /// Samples per full width (twice the half-width).
    pub points_per_width: f64,
}

impl Default for PoleRefinement {
    fn default() -> Self {
        PoleRefinement {
            half_span: 10.0,
            points_per_width: 40.0,
        }
    }
}

/// A window `[lo, hi]` enclosing every pole by `pad` of the widest full
/// width.
pub fn auto_window(net: &ValidatedNetwork, pad: f64) -> Result<(f64, f64), ScatterError> {
    let poles = poles(net)?;
    let widest = poles.iter().map(|p| 2.0 * p.im.abs()).fold(0.0, f64::max);
    let lo = poles
        .iter()
        .map(|p| p.re)
        .chain(net.resonances.iter().copied())
        .fold(f64::INFINITY, f64::min);
    let hi = poles
        .iter()
        .map(|p| p.re)
        .chain(net.resonances.iter().copied())
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((lo - pad * widest, hi + pad * widest))
}

/// Uniform grid over `[lo, hi]` with `base_points` samples, merged with a
/// dense cluster around every pole whose cluster meets the window.
/// Resolves resonances far narrower than the base spacing.
pub fn resolving_grid(
    net: &ValidatedNetwork,
    lo: f64,
    hi: f64,
    base_points: usize,
    refine: PoleRefinement,
) -> Result<SweepGrid, ScatterError> {
    let base = SweepGrid::linspace(lo, hi, base_points)?;
    let mut w = base.as_slice().to_vec();
    for p in poles(net)? {
        let half = p.im.abs();
        if half == 0.0 {
            continue;
        }
        let step = 2.0 * half / refine.points_per_width;
        let count = (refine.half_span * half / step).ceil() as i64;
        for k in -count..=count {
            let x = p.re + k as f64 * step;
            if x >= lo && x <= hi {
                w.push(x);
            }
        }
    }
    let min_gap = (hi - lo) * 1e-13;
    Ok(SweepGrid::from_unsorted(w, min_gap)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcore::{build_parallel, build_series, validate, NetworkSpec};

    fn net(spec: NetworkSpec) -> ValidatedNetwork {
        validate(&spec).unwrap()
    }

    fn simple(g: f64, big_g: f64) -> ValidatedNetwork {
        net(build_parallel(&[0.0], &[g], &[big_g]).unwrap())
    }

    #[test]
    fn system_matrix_simple_model() {
        let n = simple(1.0, 1.0);
        assert_eq!(system_matrix(&n, 0.0)[(0, 0)], Complex64::new(1.0, 0.0));
        assert_eq!(system_matrix(&n, 1.0)[(0, 0)], Complex64::new(1.0, -1.0));
    }

    #[test]
    fn system_matrix_series_off_diagonal() {
        let n = net(build_series(&[0.0, 0.0], 1.0, 1.0, &[0.7]).unwrap());
        let a = system_matrix(&n, 0.3);
        assert_eq!(a[(0, 1)], Complex64::new(0.0, 0.7));
        assert_eq!(a[(1, 0)], Complex64::new(0.0, 0.7));
    }

    #[test]
    fn balanced_simple_model_transmits_on_resonance() {
        let s = smatrix(&simple(1.0, 1.0), 0.0).unwrap();
        assert!((s[(1, 0)].norm() - 1.0).abs() < 1e-15);
        assert!(s[(0, 0)].norm() < 1e-15);
    }

    #[test]
    fn unbalanced_simple_model() {
        let s = smatrix(&simple(1.0, 3.0), 0.0).unwrap();
        assert!((s[(1, 0)].norm_sqr() - 0.75).abs() < 1e-14);
    }

    #[test]
    fn reciprocity() {
        let mut spec = build_series(&[0.1, -0.4, 0.3], 0.7, 1.3, &[0.5, 0.9]).unwrap();
        spec.set_coupling(0, 2, 0.25);
        let s = smatrix(&net(spec), 0.17).unwrap();
        assert!((s[(0, 1)] - s[(1, 0)]).norm() < 1e-14);
    }

    #[test]
    fn flux_check_lossless_and_lossy() {
        assert!(flux_check(&simple(1.0, 1.0), 0.37).unwrap() <= 1e-12);
        let lossy = net(NetworkSpec::uncoupled(vec![0.0], vec![1.0], vec![1.0]).with_side_channel(vec![0.2]));
        let s = smatrix(&lossy, 0.1).unwrap();
        let leak = 1.0 - s[(0, 0)].norm_sqr() - s[(1, 0)].norm_sqr();
        assert!(leak > 0.0);
        assert!(flux_check(&lossy, 0.1).unwrap() >= leak - 1e-15);
        assert!(unitarity_defect(&lossy, 0.1).unwrap() < 1e-14);
    }

    #[test]
    fn degenerate_dark_state_is_singular_on_resonance() {
        let n = net(build_parallel(&[1.0, 1.0], &[1.0, 1.0], &[1.0, 1.0]).unwrap());
        assert!(matches!(
            smatrix(&n, 1.0),
            Err(ScatterError::SingularSystem { omega, .. }) if omega == 1.0
        ));
        let grid = SweepGrid::new(vec![0.0, 1.0, 2.0]).unwrap();
        assert!(matches!(
            sweep(&n, &grid),
            Err(ScatterError::SingularSystem { index: Some(1), .. })
        ));
    }

    #[test]
    fn sweep_matches_pointwise_solve() {
        let n = net(build_series(&[0.0, 0.5, -0.5], 1.0, 2.0, &[0.6, 0.8]).unwrap());
        let grid = SweepGrid::linspace(-3.0, 3.0, 101).unwrap();
        let resp = sweep(&n, &grid).unwrap();
        for (j, &w) in grid.as_slice().iter().enumerate() {
            assert_eq!(resp.smatrix(j), &smatrix(&n, w).unwrap());
        }
    }

    #[test]
    fn simple_model_pole() {
        let p = poles(&simple(1.0, 3.0)).unwrap();
        assert!((p[0] - Complex64::new(0.0, -2.0)).norm() < 1e-15);
    }

    #[test]
    fn reflection_zero_of_balanced_state_is_real() {
        let z = reflection_zeros(&simple(1.0, 1.0)).unwrap();
        assert!(z[0].norm() < 1e-15);
        let z = reflection_zeros(&simple(1.0, 3.0)).unwrap();
        assert!((z[0].im + 1.0).abs() < 1e-15);
    }

    #[test]
    fn resolving_grid_clusters_around_narrow_poles() {
        let n = net(build_parallel(&[0.0, 5.0], &[1.0, 1e-3], &[1.0, 1e-3]).unwrap());
        let grid = resolving_grid(&n, -10.0, 10.0, 21, PoleRefinement::default()).unwrap();
        let near = grid.as_slice().iter().filter(|w| (**w - 5.0).abs() <= 1e-3).count();
        assert!(near >= 40, "{near}");
    }
}
