//! Figures of merit derived from a transmission spectrum.
//!
//! Conventions: `φ(ω) = arg T(ω)` unwrapped, group delay `τ_g = dφ/dω`
//! (positive for a resonance: the transmission phase advances by `π` across
//! each one), spectral bandwidth `Γ̃ = (1/π)∫|T|²dω`, dispersion
//! `𝒯_g = ∫|dτ_g/dω||T|²dω`, and time signals
//! `ψ(t) = (1/√2π)∫ψ̃(ω)e^{−iωt}dω` with `∫|ψ̃|²dω = 1`.
//!
//! Derivatives use seven-point finite differences on the sample grid; no
//! analytic derivative of any closed form is assumed.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::netcore::{NetError, SweepGrid, ValidatedNetwork};
use crate::numeric::{bisect, derivative, golden_max, parabolic_max, trapezoid, trapezoid_weights, wrap};
use crate::scatter::{self, PoleRefinement, Prepared, ScatterError, ScatteringResponse, PORT_INPUT, PORT_OUTPUT};

/// Bisection depth used to resolve a phase jump between two samples.
const MAX_REFINE_DEPTH: usize = 10;
/// Adjacent samples whose wrapped phase difference exceeds this are refined.
const JUMP: f64 = PI / 2.0;
/// Relative amplitude below which a persistent jump is accepted as a zero.
const ZERO_AMPLITUDE: f64 = 1e-3;
/// Maxima (minima) separated by a dip (bump) shallower than this are one
/// extremum: the difference is rounding noise.
const PROMINENCE: f64 = 1e-10;
/// Largest share of the bandwidth integral allowed to come from the
/// extrapolated tails.
const MAX_TAIL_FRACTION: f64 = 0.005;
/// Normalisation tolerance for wavepackets.
const NORM_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("phase jump between omega = {lo} and omega = {hi} could not be resolved")]
    UnresolvablePhaseJump { lo: f64, hi: f64 },
    #[error("integration window too narrow: extrapolated tails carry {tail_fraction:.3e} of the bandwidth integral")]
    WindowTooNarrow { tail_fraction: f64 },
    #[error("wavepacket is not normalised: integral of |psi|^2 = {norm}")]
    NotNormalized { norm: f64 },
    #[error("wavepacket and response are sampled differently: {0}")]
    SupportMismatch(String),
    #[error("network is not a parallel network (states are coherently coupled)")]
    NotParallel,
    #[error("invalid detection window: {0}")]
    InvalidWindow(String),
    #[error(transparent)]
    Scatter(#[from] ScatterError),
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Anything that can evaluate `T(ω)` on demand; used to refine coarse
/// sampling near steep features.
pub trait TransmissionSource: Sync {
    fn transmission_at(&self, omega: f64) -> Result<Complex64, MetricsError>;
}

impl TransmissionSource for Prepared {
    fn transmission_at(&self, omega: f64) -> Result<Complex64, MetricsError> {
        Ok(self.smatrix(omega)?[(PORT_OUTPUT, PORT_INPUT)])
    }
}

impl TransmissionSource for ValidatedNetwork {
    fn transmission_at(&self, omega: f64) -> Result<Complex64, MetricsError> {
        Ok(scatter::transmission(self, omega)?)
    }
}

/// Wraps a closure as a [`TransmissionSource`].
pub struct FnSource<F>(pub F);

impl<F: Fn(f64) -> Complex64 + Sync> TransmissionSource for FnSource<F> {
    fn transmission_at(&self, omega: f64) -> Result<Complex64, MetricsError> {
        Ok((self.0)(omega))
    }
}

/// Unwrapped transmission phase on a (possibly refined) grid.
///
/// The phase is undefined at zeros of `T`; the domain is split there into
/// segments, each continuous on its own.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseProfile {
    pub frequencies: Vec<f64>,
    #[serde(skip)]
    pub transmission: Vec<Complex64>,
    /// `NaN` at samples where `T` vanishes exactly.
    pub phase: Vec<f64>,
    /// Half-open index ranges `[start, end)` of continuous segments.
    pub segments: Vec<(usize, usize)>,
    /// Position of each original grid point in the refined arrays.
    #[serde(skip)]
    pub grid_index: Vec<usize>,
}

impl PhaseProfile {
    pub fn segment_changes(&self) -> Vec<f64> {
        self.segments
            .iter()
            .map(|&(s, e)| self.phase[e - 1] - self.phase[s])
            .collect()
    }

    /// Sum of the per-segment phase changes.
    pub fn total_change(&self) -> f64 {
        self.segment_changes().iter().sum()
    }

    /// Picks the values at the original grid points out of a refined array.
    pub fn on_grid(&self, values: &[f64]) -> Vec<f64> {
        self.grid_index.iter().map(|&i| values[i]).collect()
    }

    pub fn transmission_probability(&self) -> Vec<f64> {
        self.transmission.iter().map(|t| t.norm_sqr()).collect()
    }
}

#[allow(clippy::too_many_arguments)]
fn refine_between(
    source: Option<&dyn TransmissionSource>,
    w0: f64,
    t0: Complex64,
    w1: f64,
    t1: Complex64,
    depth: usize,
    out_w: &mut Vec<f64>,
    out_t: &mut Vec<Complex64>,
) -> Result<(), MetricsError> {
    if t0.norm() == 0.0 || t1.norm() == 0.0 || wrap(t1.arg() - t0.arg()).abs() <= JUMP {
        return Ok(());
    }
    let Some(src) = source else {
        return Err(MetricsError::UnresolvablePhaseJump { lo: w0, hi: w1 });
    };
    let m = w0 + (w1 - w0) / 2.0;
    if depth == MAX_REFINE_DEPTH || m <= w0 || m >= w1 {
        return Ok(());
    }
    let tm = src.transmission_at(m)?;
    refine_between(source, w0, t0, m, tm, depth + 1, out_w, out_t)?;
    out_w.push(m);
    out_t.push(tm);
    refine_between(source, m, tm, w1, t1, depth + 1, out_w, out_t)
}

/// Unwraps `arg T` along the response grid.
///
/// Wherever adjacent samples differ in phase by more than `π/2`, the
/// interval is bisected (up to ten levels) using `source`. A jump that
/// survives refinement with `|T|` small at its ends is a zero of `T`: the
/// domain is split there. Without a source any such jump is an error, as is
/// a persistent jump where `|T|` is not small. The first sample's phase lies
/// in `(−π, π]`; later segments start at the branch nearest the previous
/// segment's end.
pub fn unwrap_phase(
    resp: &ScatteringResponse,
    source: Option<&dyn TransmissionSource>,
) -> Result<PhaseProfile, MetricsError> {
    let grid = resp.frequencies();
    let mut w = Vec::with_capacity(grid.len());
    let mut t = Vec::with_capacity(grid.len());
    let mut grid_index = Vec::with_capacity(grid.len());
    for (j, &wj) in grid.iter().enumerate() {
        let tj = resp.t(j);
        if j > 0 {
            refine_between(source, grid[j - 1], resp.t(j - 1), wj, tj, 0, &mut w, &mut t)?;
        }
        grid_index.push(w.len());
        w.push(wj);
        t.push(tj);
    }

    let t_max = t.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let n = w.len();
    let mut phase = vec![f64::NAN; n];
    let mut segments = Vec::new();
    let mut start: Option<usize> = None;
    // Phase at the end of the most recently closed segment.
    let mut anchor: Option<f64> = None;
    for i in 0..n {
        if t[i].norm() == 0.0 {
            if let Some(s) = start.take() {
                segments.push((s, i));
                anchor = Some(phase[i - 1]);
            }
            continue;
        }
        let a = t[i].arg();
        if let Some(s) = start {
            let d = wrap(a - t[i - 1].arg());
            if d.abs() <= JUMP {
                phase[i] = phase[i - 1] + d;
                continue;
            }
            if t[i].norm().min(t[i - 1].norm()) > ZERO_AMPLITUDE * t_max {
                return Err(MetricsError::UnresolvablePhaseJump { lo: w[i - 1], hi: w[i] });
            }
            segments.push((s, i));
            anchor = Some(phase[i - 1]);
        }
        phase[i] = match anchor {
            None => a,
            Some(prev) => a + 2.0 * PI * ((prev - a) / (2.0 * PI)).round(),
        };
        start = Some(i);
    }
    if let Some(s) = start {
        segments.push((s, n));
    }

    Ok(PhaseProfile {
        frequencies: w,
        transmission: t,
        phase,
        segments,
        grid_index,
    })
}

/// `τ_g = dφ/dω` at every profile sample, segment by segment; `NaN` at
/// exact zeros of `T`.
pub fn group_delay(profile: &PhaseProfile) -> Vec<f64> {
    let mut tau = vec![f64::NAN; profile.frequencies.len()];
    for &(s, e) in &profile.segments {
        let d = derivative(&profile.frequencies[s..e], &profile.phase[s..e]);
        tau[s..e].copy_from_slice(&d);
    }
    tau
}

/// `𝒯_g = ∫|dτ_g/dω||T|²dω` over the profile.
pub fn dispersion(profile: &PhaseProfile) -> f64 {
    let tau = group_delay(profile);
    let t2 = profile.transmission_probability();
    profile
        .segments
        .iter()
        .map(|&(s, e)| {
            let x = &profile.frequencies[s..e];
            let dtau = derivative(x, &tau[s..e]);
            let f: Vec<f64> = dtau.iter().zip(&t2[s..e]).map(|(d, t)| d.abs() * t).collect();
            trapezoid(x, &f)
        })
        .sum()
}

/// Integral of a power-law tail `f_out·(d/d_out)^(−p)` beyond `d_out`, with
/// `p` fitted through the two outermost samples.
fn tail(f_in: f64, d_in: f64, f_out: f64, d_out: f64) -> Option<f64> {
    if f_out == 0.0 {
        return Some(0.0);
    }
    if !(d_in > 0.0 && d_out > d_in && f_in > 0.0) {
        return None;
    }
    let p = (f_in / f_out).ln() / (d_out / d_in).ln();
    (p > 1.0).then(|| f_out * d_out / (p - 1.0))
}

/// `Γ̃ = (1/π)∫|T|²dω`: trapezoid over the response grid plus power-law tail
/// estimates beyond each end, measured from the transmission centroid.
/// Fails when the tails would carry more than 0.5% of the total.
pub fn spectral_bandwidth(resp: &ScatteringResponse) -> Result<f64, MetricsError> {
    let x = resp.frequencies();
    let f = resp.transmission_probability();
    let n = x.len();
    if n < 3 {
        return Err(MetricsError::WindowTooNarrow { tail_fraction: 1.0 });
    }
    let core = trapezoid(x, &f);
    if core == 0.0 {
        return Ok(0.0);
    }
    let xf: Vec<f64> = x.iter().zip(&f).map(|(x, f)| x * f).collect();
    let c = trapezoid(x, &xf) / core;
    let left = tail(f[1], c - x[1], f[0], c - x[0]);
    let right = tail(f[n - 2], x[n - 2] - c, f[n - 1], x[n - 1] - c);
    let (Some(left), Some(right)) = (left, right) else {
        return Err(MetricsError::WindowTooNarrow { tail_fraction: 1.0 });
    };
    let total = core + left + right;
    let tail_fraction = (left + right) / total;
    if tail_fraction > MAX_TAIL_FRACTION {
        return Err(MetricsError::WindowTooNarrow { tail_fraction });
    }
    Ok(total / PI)
}

/// A grid certified for [`spectral_bandwidth`]: dense around every pole,
/// then geometrically spaced out to `reach` pole-widths beyond the outermost
/// resonance.
pub fn bandwidth_grid(net: &ValidatedNetwork, reach: f64) -> Result<SweepGrid, MetricsError> {
    let poles = scatter::poles(net)?;
    let h_max = poles.iter().map(|p| p.im.abs()).fold(0.0, f64::max);
    let lo = poles.iter().map(|p| p.re).fold(f64::INFINITY, f64::min);
    let hi = poles.iter().map(|p| p.re).fold(f64::NEG_INFINITY, f64::max);
    let inner = 10.0 * h_max;
    let (core_lo, core_hi) = (lo - inner, hi + inner);
    let base = (((core_hi - core_lo) / (h_max / 10.0)).ceil() as usize).clamp(201, 20_001);
    let core = scatter::resolving_grid(net, core_lo, core_hi, base, PoleRefinement::default())?;
    let mut w = core.as_slice().to_vec();
    let mut d = inner;
    while d < reach * h_max {
        d *= 1.04;
        w.push(lo - d);
        w.push(hi + d);
    }
    Ok(SweepGrid::from_unsorted(w, 0.0)?)
}

/// [`spectral_bandwidth`] on automatically chosen grids, widening the window
/// until the tail estimate is certified.
pub fn certified_bandwidth(net: &ValidatedNetwork) -> Result<f64, MetricsError> {
    let mut reach = 300.0;
    let mut last = MetricsError::WindowTooNarrow { tail_fraction: 1.0 };
    for _ in 0..8 {
        let grid = bandwidth_grid(net, reach)?;
        let resp = scatter::sweep(net, &grid)?;
        match spectral_bandwidth(&resp) {
            Ok(b) => return Ok(b),
            Err(e @ MetricsError::WindowTooNarrow { .. }) => last = e,
            Err(e) => return Err(e),
        }
        reach *= 2.0;
    }
    Err(last)
}

/// A local extremum of `|T|²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extremum {
    pub omega: f64,
    pub value: f64,
}

/// Indices of raw local maxima of `f` (interior only), after merging
/// neighbours separated by less than [`PROMINENCE`].
fn raw_maxima(f: &[f64]) -> Vec<usize> {
    let n = f.len();
    let mut out: Vec<usize> = Vec::new();
    let mut j = 1;
    while j + 1 < n {
        if f[j] > f[j - 1] && f[j] >= f[j + 1] {
            let mut k = j;
            while k + 1 < n && f[k + 1] == f[j] {
                k += 1;
            }
            if k + 1 < n {
                let idx = j + (k - j) / 2;
                match out.last().copied() {
                    Some(prev) => {
                        let dip = f[prev..=idx].iter().copied().fold(f64::INFINITY, f64::min);
                        if f[prev].min(f[idx]) - dip < PROMINENCE {
                            if f[idx] > f[prev] {
                                *out.last_mut().unwrap() = idx;
                            }
                        } else {
                            out.push(idx);
                        }
                    }
                    None => out.push(idx),
                }
            }
            j = k + 1;
        } else {
            j += 1;
        }
    }
    out
}

fn extrema(
    resp: &ScatteringResponse,
    source: Option<&dyn TransmissionSource>,
    sign: f64,
) -> Result<Vec<Extremum>, MetricsError> {
    let x = resp.frequencies();
    let f: Vec<f64> = resp.transmission_probability().iter().map(|v| sign * v).collect();
    raw_maxima(&f)
        .into_iter()
        .map(|j| {
            let (omega, value) = match source {
                Some(src) => golden_max(x[j - 1], x[j + 1], |w| {
                    src.transmission_at(w).map(|t| sign * t.norm_sqr())
                })?,
                None => parabolic_max([x[j - 1], x[j], x[j + 1]], [f[j - 1], f[j], f[j + 1]]),
            };
            // Never report a polished value worse than the sample itself.
            let (omega, value) = if value >= f[j] { (omega, value) } else { (x[j], f[j]) };
            Ok(Extremum {
                omega,
                value: sign * value,
            })
        })
        .collect()
}

/// Interior local maxima of `|T|²`, refined by a parabola through three
/// samples or, when `source` is given, by golden-section search on `T`.
pub fn local_maxima(
    resp: &ScatteringResponse,
    source: Option<&dyn TransmissionSource>,
) -> Result<Vec<Extremum>, MetricsError> {
    extrema(resp, source, 1.0)
}

/// Interior local minima of `|T|²`; see [`local_maxima`].
pub fn local_minima(
    resp: &ScatteringResponse,
    source: Option<&dyn TransmissionSource>,
) -> Result<Vec<Extremum>, MetricsError> {
    extrema(resp, source, -1.0)
}

/// Frequencies of local maxima with `|T|² ≥ 1 − tol`.
pub fn find_unity_peaks(
    resp: &ScatteringResponse,
    tol: f64,
    source: Option<&dyn TransmissionSource>,
) -> Result<Vec<f64>, MetricsError> {
    Ok(local_maxima(resp, source)?
        .into_iter()
        .filter(|e| e.value >= 1.0 - tol)
        .map(|e| e.omega)
        .collect())
}

/// Frequencies of local minima with `|T|² ≤ threshold`.
pub fn find_dips(
    resp: &ScatteringResponse,
    threshold: f64,
    source: Option<&dyn TransmissionSource>,
) -> Result<Vec<f64>, MetricsError> {
    Ok(local_minima(resp, source)?
        .into_iter()
        .filter(|e| e.value <= threshold)
        .map(|e| e.omega)
        .collect())
}

/// Zeros of `T` of a parallel network: the roots of
/// `Σ_i √(γ_iΓ_i)/Δ_i = 0`, one between each pair of consecutive distinct
/// resonances (the sum falls monotonically from `+∞` to `−∞` there).
pub fn find_reflection_zeros(net: &ValidatedNetwork) -> Result<Vec<f64>, MetricsError> {
    if !net.is_uncoupled() {
        return Err(MetricsError::NotParallel);
    }
    let mut poles: Vec<(f64, f64)> = Vec::new();
    let mut states: Vec<(f64, f64)> = net
        .resonances
        .iter()
        .zip(net.input_decays.iter().zip(&net.output_decays))
        .map(|(&w, (&g, &gg))| (w, (g * gg).sqrt()))
        .filter(|&(_, k)| k > 0.0)
        .collect();
    states.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (w, k) in states {
        match poles.last_mut() {
            Some(last) if last.0 == w => last.1 += k,
            _ => poles.push((w, k)),
        }
    }
    let f = |omega: f64| poles.iter().map(|&(w, k)| k / (omega - w)).sum::<f64>();
    Ok(poles
        .windows(2)
        .map(|p| bisect(p[0].0, p[1].0, f))
        .collect())
}

/// Spectral amplitude `ψ̃(ω)` sampled on a grid, normalised so that
/// `∫|ψ̃|²dω = 1` under trapezoid quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct Wavepacket {
    grid: SweepGrid,
    amplitudes: Vec<Complex64>,
}

fn norm_sqr(grid: &SweepGrid, amplitudes: &[Complex64]) -> f64 {
    let f: Vec<f64> = amplitudes.iter().map(|a| a.norm_sqr()).collect();
    trapezoid(grid.as_slice(), &f)
}

impl Wavepacket {
    /// Accepts amplitudes that are already normalised.
    pub fn new(grid: SweepGrid, amplitudes: Vec<Complex64>) -> Result<Self, MetricsError> {
        if amplitudes.len() != grid.len() {
            return Err(NetError::LengthMismatch {
                field: "amplitudes".into(),
                expected: grid.len(),
                found: amplitudes.len(),
            }
            .into());
        }
        let norm = norm_sqr(&grid, &amplitudes);
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(MetricsError::NotNormalized { norm });
        }
        Ok(Wavepacket { grid, amplitudes })
    }

    /// Rescales arbitrary nonzero amplitudes to unit norm.
    pub fn normalized(grid: SweepGrid, mut amplitudes: Vec<Complex64>) -> Result<Self, MetricsError> {
        let norm = norm_sqr(&grid, &amplitudes);
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(MetricsError::NotNormalized { norm });
        }
        let s = norm.sqrt();
        amplitudes.iter_mut().for_each(|a| *a /= s);
        Wavepacket::new(grid, amplitudes)
    }

    /// Gaussian pulse with carrier `center`, spectral rms width `sigma`, and
    /// temporal centre `t0`: `ψ̃ ∝ exp(−(ω−center)²/(4σ²) + iωt0)`.
    pub fn gaussian(grid: SweepGrid, center: f64, sigma: f64, t0: f64) -> Result<Self, MetricsError> {
        let amps = grid
            .as_slice()
            .iter()
            .map(|&w| {
                let env = (-(w - center).powi(2) / (4.0 * sigma * sigma)).exp();
                Complex64::from_polar(env, w * t0)
            })
            .collect();
        Wavepacket::normalized(grid, amps)
    }

    pub fn grid(&self) -> &SweepGrid {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.grid, &self.amplitudes)
    }
}

/// Complex time samples on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSignal {
    pub times: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl TimeSignal {
    /// `∫|ψ(t)|²dt` by the trapezoid rule.
    pub fn energy(&self) -> f64 {
        let f: Vec<f64> = self.values.iter().map(|v| v.norm_sqr()).collect();
        trapezoid(&self.times, &f)
    }

    /// Time of the largest `|ψ|`.
    pub fn peak_time(&self) -> f64 {
        let (i, _) = self
            .values
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, v)| if v.norm() > acc.1 { (i, v.norm()) } else { acc });
        self.times[i]
    }
}

fn check_support(resp: &ScatteringResponse, psi: &Wavepacket) -> Result<(), MetricsError> {
    if resp.grid() != psi.grid() {
        return Err(MetricsError::SupportMismatch(format!(
            "response has {} samples on [{}, {}], wavepacket {} on [{}, {}]",
            resp.len(),
            resp.grid().first(),
            resp.grid().last(),
            psi.grid().len(),
            psi.grid().first(),
            psi.grid().last()
        )));
    }
    Ok(())
}

/// `F(ω) = T(ω)ψ̃(ω)` together with trapezoid weights.
fn filtered(resp: &ScatteringResponse, psi: &Wavepacket) -> (Vec<Complex64>, Vec<f64>) {
    let f = psi
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(j, a)| resp.t(j) * a)
        .collect();
    (f, trapezoid_weights(resp.frequencies()))
}

fn synthesize(omegas: &[f64], f: &[Complex64], weights: &[f64], t: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for ((&w, &a), &q) in omegas.iter().zip(f).zip(weights) {
        acc += a * q * Complex64::from_polar(1.0, -w * t);
    }
    acc / (2.0 * PI).sqrt()
}

/// Transmitted pulse `ψ_out(t) = (1/√2π)∫T(ω)ψ̃(ω)e^{−iωt}dω`.
///
/// The time grid spans one period `2π/δω` of the sampled transform
/// (`δω` the mean grid spacing) with twice as many samples as the frequency
/// grid, centred on the pulse's mean arrival time.
pub fn propagate_wavepacket(resp: &ScatteringResponse, psi: &Wavepacket) -> Result<TimeSignal, MetricsError> {
    check_support(resp, psi)?;
    let x = resp.frequencies();
    let n = x.len();
    if n < 2 {
        return Err(MetricsError::SupportMismatch("need at least two samples".into()));
    }
    let (f, q) = filtered(resp, psi);
    let re: Vec<f64> = f.iter().map(|z| z.re).collect();
    let im: Vec<f64> = f.iter().map(|z| z.im).collect();
    let (dre, dim) = (derivative(x, &re), derivative(x, &im));
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..n {
        let fp = Complex64::new(dre[j], dim[j]);
        num += q[j] * (f[j].conj() * (-Complex64::i() * fp)).re;
        den += q[j] * f[j].norm_sqr();
    }
    let centre = if den > 0.0 { num / den } else { 0.0 };

    let m = 2 * n;
    let period = 2.0 * PI * (n - 1) as f64 / (x[n - 1] - x[0]);
    let dt = period / m as f64;
    let times: Vec<f64> = (0..=m).map(|k| centre - period / 2.0 + k as f64 * dt).collect();
    let values = times.iter().map(|&t| synthesize(x, &f, &q, t)).collect();
    Ok(TimeSignal { times, values })
}

/// Long-window click probability `∫|ψ̃|²|T|²dω`.
pub fn long_time_click_probability(resp: &ScatteringResponse, psi: &Wavepacket) -> Result<f64, MetricsError> {
    check_support(resp, psi)?;
    let (f, q) = filtered(resp, psi);
    Ok(f.iter().zip(&q).map(|(f, q)| q * f.norm_sqr()).sum())
}

/// `P(τ) = ∫_{−τ}^{0}|ψ_out(t)|²dt` for every `τ` in `taus`.
///
/// `|ψ_out|²` is sampled once over `[−max τ, 0]` on panels of width at most
/// `π/(2B)`, `B` the half-span of the frequency grid, and integrated
/// cumulatively from `t = 0` by Simpson's rule; between panel ends the
/// panel's quadratic is integrated and clamped to the panel's total, so the
/// result is monotone in `τ`.
pub fn click_curve(resp: &ScatteringResponse, psi: &Wavepacket, taus: &[f64]) -> Result<Vec<f64>, MetricsError> {
    check_support(resp, psi)?;
    let norm = psi.norm_sqr();
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(MetricsError::NotNormalized { norm });
    }
    if let Some(bad) = taus.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(MetricsError::InvalidWindow(format!("tau = {bad} must be finite and nonnegative")));
    }
    let tau_max = taus.iter().copied().fold(0.0, f64::max);
    if tau_max == 0.0 {
        return Ok(vec![0.0; taus.len()]);
    }
    let x = resp.frequencies();
    let carrier = (x[0] + x[x.len() - 1]) / 2.0;
    let half_span = (x[x.len() - 1] - x[0]) / 2.0;
    let shifted: Vec<f64> = x.iter().map(|w| w - carrier).collect();
    let (f, q) = filtered(resp, psi);

    let steps = ((tau_max / (PI / (2.0 * half_span))).ceil() as usize).max(64);
    let dt = tau_max / steps as f64;
    // intensity[k] = |ψ_out(−k·dt/2)|²: panel ends and midpoints for Simpson.
    let intensity: Vec<f64> = (0..=2 * steps)
        .map(|k| synthesize(&shifted, &f, &q, -(k as f64) * dt / 2.0).norm_sqr())
        .collect();
    let panel = |k: usize| (intensity[2 * k], intensity[2 * k + 1], intensity[2 * k + 2]);
    let mut cumulative = vec![0.0; steps + 1];
    for k in 0..steps {
        let (a, b, c) = panel(k);
        cumulative[k + 1] = cumulative[k] + dt * (a + 4.0 * b + c) / 6.0;
    }
    Ok(taus
        .iter()
        .map(|&tau| {
            let pos = tau / dt;
            let k = (pos.floor() as usize).min(steps);
            if k == steps {
                return cumulative[steps];
            }
            // Integral of the quadratic through the panel's three samples.
            let u = pos - k as f64;
            let (a, b, c) = panel(k);
            let (u2, u3) = (u * u, u * u * u);
            let part = 2.0 * a * (u3 / 3.0 - 0.75 * u2 + u / 2.0) - 4.0 * b * (u3 / 3.0 - u2 / 2.0)
                + 2.0 * c * (u3 / 3.0 - u2 / 4.0);
            (cumulative[k] + dt * part).clamp(cumulative[k], cumulative[k + 1])
        })
        .collect())
}

/// Click probability for a single detection window `τ`.
pub fn click_probability(resp: &ScatteringResponse, psi: &Wavepacket, tau: f64) -> Result<f64, MetricsError> {
    Ok(click_curve(resp, psi, &[tau])?[0])
}

/// Summary of a network's transmission spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub bandwidth: f64,
    pub dispersion: f64,
    pub total_phase_change: f64,
    pub segment_phase_changes: Vec<f64>,
    pub unity_peaks: Vec<f64>,
    pub reflection_zeros: Vec<f64>,
    pub frequencies: Vec<f64>,
    pub phase: Vec<f64>,
    pub group_delay: Vec<f64>,
}

impl MetricsReport {
    /// Computes every metric. Phase, delay, peaks and dips come from `resp`
    /// (refined through `net` where needed); the bandwidth is certified on
    /// its own automatically chosen grid. Zeros of `T` are the exact roots
    /// for parallel networks and dips below `tol` otherwise.
    pub fn compute(net: &ValidatedNetwork, resp: &ScatteringResponse, tol: f64) -> Result<Self, MetricsError> {
        let prep = Prepared::new(net);
        let profile = unwrap_phase(resp, Some(&prep))?;
        let tau = group_delay(&profile);
        let reflection_zeros = if net.is_uncoupled() {
            find_reflection_zeros(net)?
        } else {
            find_dips(resp, tol, Some(&prep))?
        };
        Ok(MetricsReport {
            bandwidth: certified_bandwidth(net)?,
            dispersion: dispersion(&profile),
            total_phase_change: profile.total_change(),
            segment_phase_changes: profile.segment_changes(),
            unity_peaks: find_unity_peaks(resp, tol, Some(&prep))?,
            reflection_zeros,
            frequencies: resp.frequencies().to_vec(),
            phase: profile.on_grid(&profile.phase),
            group_delay: profile.on_grid(&tau),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closedform::{simple_group_delay, simple_t};
    use crate::netcore::{build_parallel, validate};
    use crate::scatter::sweep;

    fn simple_net(g: f64, gg: f64) -> ValidatedNetwork {
        validate(&build_parallel(&[0.0], &[g], &[gg]).unwrap()).unwrap()
    }

    #[test]
    fn constant_transmission_has_constant_phase() {
        let grid = SweepGrid::linspace(-1.0, 1.0, 11).unwrap();
        let resp = ScatteringResponse::from_transmission(grid, &[Complex64::new(0.0, 0.5); 11]).unwrap();
        let p = unwrap_phase(&resp, None).unwrap();
        assert!(p.phase.iter().all(|&v| (v - PI / 2.0).abs() < 1e-15));
        assert_eq!(p.total_change(), 0.0);
        assert!(group_delay(&p).iter().all(|&v| v.abs() < 1e-12));
        assert!(dispersion(&p).abs() < 1e-12);
    }

    #[test]
    fn simple_model_phase_and_delay() {
        let net = simple_net(1.0, 1.0);
        let grid = SweepGrid::linspace(-2000.0, 2000.0, 160_001).unwrap();
        let resp = sweep(&net, &grid).unwrap();
        let p = unwrap_phase(&resp, Some(&net)).unwrap();
        assert!((p.total_change() - PI).abs() < 1e-3);
        let tau = group_delay(&p);
        let mid = 80_000;
        assert!((tau[mid] - simple_group_delay(1.0, 1.0, 0.0)).abs() < 1e-6);
        assert!((p.phase[0]).abs() <= PI);
    }

    #[test]
    fn jump_without_source_is_an_error() {
        let grid = SweepGrid::linspace(-1.0, 1.0, 3).unwrap();
        let t = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(-1.0, 0.0)];
        let resp = ScatteringResponse::from_transmission(grid.clone(), &t).unwrap();
        assert!(unwrap_phase(&resp, None).is_ok());
        let t = [Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0), Complex64::new(-1.0, 0.0)];
        let resp = ScatteringResponse::from_transmission(grid, &t).unwrap();
        assert!(matches!(
            unwrap_phase(&resp, None),
            Err(MetricsError::UnresolvablePhaseJump { lo, hi }) if lo == -1.0 && hi == 0.0
        ));
    }

    #[test]
    fn zero_of_t_splits_domain() {
        // T = ω crosses zero between samples; the phase flips by π there.
        let src = FnSource(|w: f64| Complex64::new(w, 0.0));
        let grid = SweepGrid::linspace(-1.05, 0.95, 21).unwrap();
        let t: Vec<Complex64> = grid.as_slice().iter().map(|&w| Complex64::new(w, 0.0)).collect();
        let resp = ScatteringResponse::from_transmission(grid, &t).unwrap();
        let p = unwrap_phase(&resp, Some(&src)).unwrap();
        assert_eq!(p.segments.len(), 2);
        assert_eq!(p.total_change(), 0.0);
    }

    #[test]
    fn exact_zero_sample_is_nan_and_splits() {
        let grid = SweepGrid::linspace(-1.0, 1.0, 5).unwrap();
        let t: Vec<Complex64> = grid.as_slice().iter().map(|&w| Complex64::new(w, 0.0)).collect();
        let resp = ScatteringResponse::from_transmission(grid, &t).unwrap();
        let p = unwrap_phase(&resp, None).unwrap();
        assert!(p.phase[2].is_nan());
        assert_eq!(p.segments, vec![(0, 2), (3, 5)]);
    }

    #[test]
    fn bandwidth_of_simple_model() {
        let b = certified_bandwidth(&simple_net(1.0, 3.0)).unwrap();
        assert!((b - 2.0 * 3.0 / 4.0).abs() < 0.005 * 1.5, "{b}");
    }

    #[test]
    fn narrow_window_is_rejected() {
        let net = simple_net(1.0, 1.0);
        let resp = sweep(&net, &SweepGrid::linspace(-5.0, 5.0, 401).unwrap()).unwrap();
        assert!(matches!(spectral_bandwidth(&resp), Err(MetricsError::WindowTooNarrow { .. })));
    }

    #[test]
    fn peak_detection_on_lorentzian() {
        let grid = SweepGrid::linspace(-3.0, 3.0, 61).unwrap();
        let t: Vec<Complex64> = grid.as_slice().iter().map(|&w| simple_t(1.0, 1.0, w - 0.013)).collect();
        let resp = ScatteringResponse::from_transmission(grid, &t).unwrap();
        let src = FnSource(|w: f64| simple_t(1.0, 1.0, w - 0.013));
        let peaks = find_unity_peaks(&resp, 1e-6, Some(&src)).unwrap();
        assert_eq!(peaks.len(), 1);
        assert!((peaks[0] - 0.013).abs() < 1e-6);
        let rough = local_maxima(&resp, None).unwrap();
        assert_eq!(rough.len(), 1);
        assert!(rough[0].value > 0.999);
    }

    #[test]
    fn flat_noise_merges_into_one_peak() {
        let f = [0.0, 0.5, 1.0, 1.0 - 1e-13, 1.0, 0.5, 0.0];
        assert_eq!(raw_maxima(&f).len(), 1);
        let f = [0.0, 0.5, 1.0, 0.9, 1.0, 0.5, 0.0];
        assert_eq!(raw_maxima(&f), vec![2, 4]);
    }

    #[test]
    fn parallel_pair_zero_at_midpoint() {
        let net = validate(&build_parallel(&[-1.0, 3.0], &[1.0, 1.0], &[1.0, 1.0]).unwrap()).unwrap();
        let z = find_reflection_zeros(&net).unwrap();
        assert_eq!(z.len(), 1);
        assert!((z[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn gaussian_is_normalised_and_checked() {
        let grid = SweepGrid::linspace(-10.0, 10.0, 2001).unwrap();
        let psi = Wavepacket::gaussian(grid.clone(), 0.5, 1.0, -3.0).unwrap();
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-12);
        let bad = vec![Complex64::new(2.0, 0.0); grid.len()];
        assert!(matches!(Wavepacket::new(grid, bad), Err(MetricsError::NotNormalized { .. })));
    }

    #[test]
    fn identity_filter_preserves_pulse() {
        let grid = SweepGrid::linspace(-12.0, 12.0, 1201).unwrap();
        let psi = Wavepacket::gaussian(grid.clone(), 0.0, 1.0, -4.0).unwrap();
        let resp = ScatteringResponse::from_transmission(grid, &vec![Complex64::new(1.0, 0.0); 1201]).unwrap();
        let out = propagate_wavepacket(&resp, &psi).unwrap();
        assert!((out.energy() - 1.0).abs() < 1e-6);
        assert!((out.peak_time() + 4.0).abs() < 0.02);
        // Gaussian of temporal rms 1/(2σ) centred at t0.
        for (t, v) in out.times.iter().zip(&out.values) {
            let expected = (1.0 / (2.0 * PI * 0.25)).sqrt() * (-(t + 4.0).powi(2) / (2.0 * 0.25)).exp();
            assert!((v.norm_sqr() - expected).abs() < 1e-8, "{t}");
        }
    }

    #[test]
    fn click_probability_basics() {
        let grid = SweepGrid::linspace(-12.0, 12.0, 1201).unwrap();
        let psi = Wavepacket::gaussian(grid.clone(), 0.0, 1.0, -5.0).unwrap();
        let resp = ScatteringResponse::from_transmission(grid.clone(), &vec![Complex64::new(1.0, 0.0); 1201]).unwrap();
        assert_eq!(click_probability(&resp, &psi, 0.0).unwrap(), 0.0);
        assert!((click_probability(&resp, &psi, 10.0).unwrap() - 1.0).abs() < 1e-6);
        let other = SweepGrid::linspace(-12.0, 12.0, 1200).unwrap();
        let resp2 = ScatteringResponse::from_transmission(other, &vec![Complex64::new(1.0, 0.0); 1200]).unwrap();
        assert!(matches!(click_probability(&resp2, &psi, 1.0), Err(MetricsError::SupportMismatch(_))));
        assert!(click_probability(&resp, &psi, -1.0).is_err());
    }
}
