//! Analytic transmission and reflection amplitudes.
//!
//! Every rational form with `1/Δ_i` terms is evaluated with denominators
//! cleared: for a set of states with weights `w_i` we carry
//! `P = Π Δ_i` and `Q = Σ_i w_i Π_{j≠i} Δ_j` so `Σ w_i/Δ_i = Q/P`, and exact
//! resonances are ordinary points. `P` and `Q` only ever appear as a ratio
//! (or, in continued fractions, up to an equivalence transform) so both are
//! rescaled freely to stay in range.
//!
//! Continued fractions are evaluated with the Wallis–Euler recurrences.
//! Reflection amplitudes follow the dense solver's convention exactly;
//! [`simple_t`] carries the opposite overall sign of the solver's `S[b←a]`,
//! which affects neither `|T|²` nor the group delay.

use num_complex::Complex64;
use thiserror::Error;

use crate::netcore::{HybridSpec, NetError};

const BIG: f64 = 1e150;
const SMALL: f64 = 1e-150;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClosedFormError {
    #[error("continued-fraction recursion left the floating-point range at step {step}")]
    RecursionOverflow { step: usize },
    #[error("invalid continued-fraction coefficients: {0}")]
    InvalidCoefficients(String),
    #[error("network is not homogeneous: {0}")]
    NotHomogeneous(String),
    #[error("hybrid network has no unbalance profile")]
    MissingUnbalanceProfile,
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Transmission of a single state coupled to both continua.
pub fn simple_t(gamma: f64, big_gamma: f64, detuning: f64) -> Complex64 {
    Complex64::from((gamma * big_gamma).sqrt()) / Complex64::new((gamma + big_gamma) / 2.0, -detuning)
}

/// Group delay of the single-state model; a Lorentzian of height
/// `2/(γ+Γ)`.
pub fn simple_group_delay(gamma: f64, big_gamma: f64, detuning: f64) -> f64 {
    let h = (gamma + big_gamma) / 2.0;
    h / (h * h + detuning * detuning)
}

/// Chain coupling at which a series network is critically coupled.
pub fn critical_coupling(gamma: f64, big_gamma: f64) -> f64 {
    (gamma * big_gamma).sqrt() / 2.0
}

/// `(P, Q)` with `P = Π Δ_i`, `Q = Σ w_i Π_{j≠i} Δ_j`, both scaled by the
/// same positive factor. When two or more `Δ_i` vanish exactly the common
/// factor `Δ^(z−1)` is divided out so the ratio keeps its limit.
pub fn cleared_sums(weights: &[f64], detunings: &[f64]) -> (f64, f64) {
    let zeros = detunings.iter().filter(|&&d| d == 0.0).count();
    if zeros >= 2 {
        let mut q: f64 = weights
            .iter()
            .zip(detunings)
            .filter(|(_, &d)| d == 0.0)
            .map(|(w, _)| w)
            .sum();
        for &d in detunings.iter().filter(|&&d| d != 0.0) {
            q *= d;
            q = rescale1(q);
        }
        return (0.0, q);
    }
    let (mut p, mut q) = (1.0, 0.0);
    for (&w, &d) in weights.iter().zip(detunings) {
        q = q * d + w * p;
        p *= d;
        let m = p.abs().max(q.abs());
        if m > BIG || (m < SMALL && m > 0.0) {
            p /= m;
            q /= m;
        }
    }
    (p, q)
}

fn rescale1(x: f64) -> f64 {
    if x.abs() > BIG || (x.abs() < SMALL && x != 0.0) {
        x.signum()
    } else {
        x
    }
}

/// Reflection of a parallel network with `Γ_i = k·γ_i`:
/// `R = [i − (k−1)Σγ_i/(2Δ_i)] / [i − (k+1)Σγ_i/(2Δ_i)]`.
pub fn parallel_r_unbalanced(gammas: &[f64], k: f64, detunings: &[f64]) -> Complex64 {
    let (p, q) = cleared_sums(gammas, detunings);
    ratio_form(p, q / 2.0, k - 1.0, k + 1.0)
}

/// Reflection of a parallel network with homogeneous decays:
/// `R = [i − ((Γ−γ)/2)Σ1/Δ_i] / [i − ((Γ+γ)/2)Σ1/Δ_i]`.
pub fn parallel_r_homogeneous(gamma: f64, big_gamma: f64, detunings: &[f64]) -> Complex64 {
    let ones = vec![1.0; detunings.len()];
    let (p, q) = cleared_sums(&ones, detunings);
    ratio_form(p, q, (big_gamma - gamma) / 2.0, (big_gamma + gamma) / 2.0)
}

/// `(iP − cn·Q)/(iP − cd·Q)`.
fn ratio_form(p: f64, q: f64, cn: f64, cd: f64) -> Complex64 {
    Complex64::new(-cn * q, p) / Complex64::new(-cd * q, p)
}

/// Reflection of a general two-state parallel network,
/// `[Π((Γ_i−γ_i)/2 − iΔ_i) − X₋] / [Π((Γ_i+γ_i)/2 − iΔ_i) − X₊]` with
/// `X± = ((√(Γ_1Γ_2) ± √(γ_1γ_2))/2)²`.
pub fn parallel_r_general_n2(
    gamma: [f64; 2],
    big_gamma: [f64; 2],
    detuning: [f64; 2],
) -> Complex64 {
    let sg = (gamma[0] * gamma[1]).sqrt();
    let sbg = (big_gamma[0] * big_gamma[1]).sqrt();
    let x_plus = ((sbg + sg) / 2.0).powi(2);
    let x_minus = ((sbg - sg) / 2.0).powi(2);
    let term = |c: f64, d: f64| Complex64::new(c / 2.0, -d);
    let num = term(big_gamma[0] - gamma[0], detuning[0]) * term(big_gamma[1] - gamma[1], detuning[1]) - x_minus;
    let den = term(big_gamma[0] + gamma[0], detuning[0]) * term(big_gamma[1] + gamma[1], detuning[1]) - x_plus;
    num / den
}

/// Coefficients of `b_0 + a_1/(b_1 + a_2/(b_2 + …))`.
#[derive(Debug, Clone, PartialEq)]
pub struct WallisEulerCoeffs {
    a: Vec<Complex64>,
    b: Vec<Complex64>,
}

impl WallisEulerCoeffs {
    pub fn new(a: Vec<Complex64>, b: Vec<Complex64>) -> Result<Self, ClosedFormError> {
        if a.len() != b.len() || a.is_empty() {
            return Err(ClosedFormError::InvalidCoefficients(format!(
                "need equal nonempty sequences, got {} and {}",
                a.len(),
                b.len()
            )));
        }
        if a[0] != Complex64::new(0.0, 0.0) {
            return Err(ClosedFormError::InvalidCoefficients("a_0 must be 0".into()));
        }
        Ok(WallisEulerCoeffs { a, b })
    }

    /// Coefficients of a nearest-neighbour chain:
    /// `a_1 = −γ`, `b_1 = γ/2 − iΔ_1`, `a_n = g²_{n−1,n}`, `b_n = −iΔ_n`, and
    /// `b_N = Γ/2 − iΔ_N`. A single state has `b_1 = (γ+Γ)/2 − iΔ_1`.
    pub fn series(gamma: f64, big_gamma: f64, detunings: &[f64], chain: &[f64]) -> Result<Self, ClosedFormError> {
        let n = detunings.len();
        if n == 0 {
            return Err(ClosedFormError::InvalidCoefficients("no states".into()));
        }
        if chain.len() != n - 1 {
            return Err(NetError::LengthMismatch {
                field: "chain_couplings".into(),
                expected: n - 1,
                found: chain.len(),
            }
            .into());
        }
        let mut a = vec![Complex64::new(0.0, 0.0), Complex64::from(-gamma)];
        let mut b = vec![Complex64::new(1.0, 0.0), Complex64::new(gamma / 2.0, -detunings[0])];
        for (&g, &d) in chain.iter().zip(&detunings[1..]) {
            a.push(Complex64::from(g * g));
            b.push(Complex64::new(0.0, -d));
        }
        b[n] += big_gamma / 2.0;
        WallisEulerCoeffs::new(a, b)
    }

    pub fn a(&self) -> &[Complex64] {
        &self.a
    }

    pub fn b(&self) -> &[Complex64] {
        &self.b
    }

    /// Number of levels `N` (sequences run over `0..=N`).
    pub fn depth(&self) -> usize {
        self.a.len() - 1
    }

    /// `A_N / B_N` from `A_n = b_n A_{n−1} + a_n A_{n−2}` (likewise `B`), with
    /// `A_{−1} = 1, B_{−1} = 0, A_0 = b_0, B_0 = 1`. All four running values
    /// are divided by a common factor whenever they leave `[1e−150, 1e150]`.
    pub fn evaluate(&self) -> Result<Complex64, ClosedFormError> {
        let (mut a_prev, mut b_prev) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        let (mut a_cur, mut b_cur) = (self.b[0], Complex64::new(1.0, 0.0));
        for n in 1..self.a.len() {
            let a_next = self.b[n] * a_cur + self.a[n] * a_prev;
            let b_next = self.b[n] * b_cur + self.a[n] * b_prev;
            a_prev = a_cur;
            b_prev = b_cur;
            a_cur = a_next;
            b_cur = b_next;
            let m = [a_prev, b_prev, a_cur, b_cur]
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            if !m.is_finite() {
                return Err(ClosedFormError::RecursionOverflow { step: n });
            }
            if m > BIG || (m < SMALL && m > 0.0) {
                a_prev /= m;
                b_prev /= m;
                a_cur /= m;
                b_cur /= m;
            }
        }
        let r = a_cur / b_cur;
        if r.re.is_finite() && r.im.is_finite() {
            Ok(r)
        } else {
            Err(ClosedFormError::RecursionOverflow { step: self.depth() })
        }
    }
}

/// Reflection of a series chain from its continued fraction.
pub fn series_r(
    gamma: f64,
    big_gamma: f64,
    detunings: &[f64],
    chain: &[f64],
) -> Result<Complex64, ClosedFormError> {
    WallisEulerCoeffs::series(gamma, big_gamma, detunings, chain)?.evaluate()
}

fn detunings(omega: f64, manifold: &[f64]) -> Vec<f64> {
    manifold.iter().map(|w| omega - w).collect()
}

fn common(values: &[f64], what: &str) -> Result<f64, ClosedFormError> {
    let first = values[0];
    if values.iter().all(|&v| (v - first).abs() <= 1e-12 * first.abs().max(f64::MIN_POSITIVE)) {
        Ok(first)
    } else {
        Err(ClosedFormError::NotHomogeneous(format!("{what} differ between states")))
    }
}

/// Reflection of a hybrid network whose first-manifold decays are all `γ`,
/// last-manifold decays all `Γ`, and each manifold pair shares one coupling
/// `g^(k,k+1)`. With `f^(k) = Σ_i 1/Δ_i^(k)`,
/// `R = 1 − γf¹/(γf¹/2 − i + g₁₂²f¹f²/(−i + … + g²f^(M−1)f^M/(Γf^M/2 − i)))`,
/// evaluated with denominators cleared.
pub fn hybrid_r_homogeneous(hybrid: &HybridSpec, omega: f64) -> Result<Complex64, ClosedFormError> {
    hybrid.validate()?;
    let gamma = common(&hybrid.input_decays, "input decays")?;
    let big_gamma = common(&hybrid.output_decays, "output decays")?;
    let couplings = hybrid
        .couplings
        .iter()
        .enumerate()
        .map(|(k, c)| {
            c.uniform_rate()
                .ok_or_else(|| ClosedFormError::NotHomogeneous(format!("couplings[{k}] is not uniform")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let sums: Vec<(f64, f64)> = hybrid
        .manifolds
        .iter()
        .map(|w| cleared_sums(&vec![1.0; w.len()], &detunings(omega, w)))
        .collect();
    let m = sums.len();
    if m == 1 {
        let (p, q) = sums[0];
        return Ok(ratio_form(p, q, (big_gamma - gamma) / 2.0, (big_gamma + gamma) / 2.0));
    }
    let zero = Complex64::new(0.0, 0.0);
    let mut a = vec![zero; m + 1];
    let mut b = vec![zero; m + 1];
    b[0] = Complex64::new(1.0, 0.0);
    let (p1, q1) = sums[0];
    a[1] = Complex64::from(-gamma * q1);
    b[1] = Complex64::new(gamma * q1 / 2.0, -p1);
    for k in 2..=m {
        let (pk, qk) = sums[k - 1];
        let g = couplings[k - 2];
        a[k] = Complex64::from(g * g * sums[k - 2].1 * qk);
        b[k] = Complex64::new(0.0, -pk);
    }
    b[m] += big_gamma * sums[m - 1].1 / 2.0;
    WallisEulerCoeffs::new(a, b)?.evaluate()
}

/// Reflection of a critically coupled, uniformly unbalanced hybrid network
/// (see [`HybridSpec::critical_unbalanced`]). With
/// `h^(k) = Σ_i γ_i^(k)/(2Δ_i^(k))` and ratios `k^(k)` the continued fraction
/// is `R = 1 − 2h¹/(h¹ − i + k¹h¹h²/(−i + … + k^(M−1)h^(M−1)h^M/(k^(M)h^M − i)))`,
/// evaluated with denominators cleared. The tail term carries the full ratio
/// `k^(M)`: the last manifold's output decay is `k^(M)·γ^(M)`.
pub fn hybrid_r_critical_unbalanced(hybrid: &HybridSpec, omega: f64) -> Result<Complex64, ClosedFormError> {
    hybrid.validate()?;
    let profile = hybrid.unbalance.as_ref().ok_or(ClosedFormError::MissingUnbalanceProfile)?;
    let sums: Vec<(f64, f64)> = hybrid
        .manifolds
        .iter()
        .zip(&profile.decays)
        .map(|(w, d)| cleared_sums(d, &detunings(omega, w)))
        .collect();
    let m = sums.len();
    let ratios = &profile.ratios;
    if m == 1 {
        let (p, q) = sums[0];
        let k = ratios[0];
        return Ok(ratio_form(p, q / 2.0, k - 1.0, k + 1.0));
    }
    let zero = Complex64::new(0.0, 0.0);
    let mut a = vec![zero; m + 1];
    let mut b = vec![zero; m + 1];
    b[0] = Complex64::new(1.0, 0.0);
    let (p1, q1) = sums[0];
    a[1] = Complex64::from(-2.0 * q1);
    b[1] = Complex64::new(q1, -2.0 * p1);
    for k in 2..=m {
        let (pk, qk) = sums[k - 1];
        a[k] = Complex64::from(ratios[k - 2] * sums[k - 2].1 * qk);
        b[k] = Complex64::new(0.0, -2.0 * pk);
    }
    b[m] += ratios[m - 1] * sums[m - 1].1;
    WallisEulerCoeffs::new(a, b)?.evaluate()
}

/// `|T|² = 1 − |R|²` for a lossless two-port.
pub fn transmission_probability(r: Complex64) -> f64 {
    1.0 - r.norm_sqr()
}
