//! Parameter design for perfect transmission.
//!
//! Closed-form rules cover the critically coupled chain and the detuned
//! pair; [`tune`] handles everything else numerically.
//!
//! The tuner works on the zeros of `R(ω)` continued into the complex plane
//! (eigenvalues of the effective Hamiltonian with the input coupling
//! reversed, see [`scatter::reflection_zeros`]). A zero on the real axis is
//! a frequency of perfect transmission, so the search drives `|R|` at the
//! real parts of the `m` most promising zeros to zero: a brief simplex
//! stage locates a basin and Levenberg–Marquardt finishes it. The result is
//! then re-checked against the dense solver: at each claimed frequency
//! `|T|²` is maximised directly and the deficits `1 − |T|²` summed. Success
//! is only ever reported from that re-check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::closedform::critical_coupling;
use crate::netcore::{validate, NetError, NetworkSpec, ValidatedNetwork};
use crate::numeric::golden_max;
use crate::scatter::{self, Prepared, ScatterError, PORT_INPUT, PORT_OUTPUT};

/// Objective below which a design counts as perfect transmission.
pub const SUCCESS_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DesignError {
    #[error("balanced decays: the critical coupling of a detuned pair is infinite")]
    BalancedDecaysUnsupported,
    #[error("coupling radicand is negative ({0})")]
    NegativeRadicand(f64),
    #[error("invalid design problem: {0}")]
    InvalidProblem(String),
    #[error("no parameters reached the target; best objective {:.3e}", report.objective)]
    NoConvergence { report: Box<TuneReport> },
    #[error(transparent)]
    Scatter(#[from] ScatterError),
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Frequency and chain coupling at which a detuned two-state chain (input
/// decay `γ` on state 1, output decay `Γ` on state 2) transmits perfectly.
///
/// With `m = (ω₁+ω₂)/2` and `X = (Γ(ω₁−m) − γ(ω₂−m))/(Γ−γ)`:
/// `ω* = m + X`, `g = √(γΓ/4 + X² − (ω₁−ω₂)²/4)`. Written relative to the
/// midpoint the rule is invariant under a common shift of both resonances.
pub fn detuned_pair(gamma: f64, big_gamma: f64, omega1: f64, omega2: f64) -> Result<(f64, f64), DesignError> {
    if (gamma - big_gamma).abs() <= 1e-12 * gamma.abs().max(big_gamma.abs()) {
        return Err(DesignError::BalancedDecaysUnsupported);
    }
    let m = (omega1 + omega2) / 2.0;
    let x = (big_gamma * (omega1 - m) - gamma * (omega2 - m)) / (big_gamma - gamma);
    let radicand = gamma * big_gamma / 4.0 + x * x - (omega1 - omega2).powi(2) / 4.0;
    if radicand < 0.0 {
        return Err(DesignError::NegativeRadicand(radicand));
    }
    Ok((m + x, radicand.sqrt()))
}

/// Uniform critical chain couplings `√(γΓ)/2` for `n` states.
pub fn critical_series_params(gamma: f64, big_gamma: f64, n: usize) -> Vec<f64> {
    vec![critical_coupling(gamma, big_gamma); n.saturating_sub(1)]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Param {
    Coupling { i: usize, j: usize },
    InputDecay { i: usize },
    OutputDecay { i: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeParam {
    pub param: Param,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Target {
    /// Perfect transmission at one given frequency.
    AtFrequency { omega: f64 },
    /// Perfect transmission at (at least) this many distinct frequencies.
    AtLeast { count: usize },
}

/// A network with some of its rates left free. Hybrid networks are lowered
/// to a flat spec before design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignProblem {
    pub base: NetworkSpec,
    pub free: Vec<FreeParam>,
    pub target: Target,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_max_evals")]
    pub max_evals: usize,
}

fn default_restarts() -> usize {
    8
}

fn default_max_evals() -> usize {
    4000
}

impl DesignProblem {
    pub fn new(base: NetworkSpec, free: Vec<FreeParam>, target: Target) -> Self {
        DesignProblem {
            base,
            free,
            target,
            seed: 0,
            restarts: default_restarts(),
            max_evals: default_max_evals(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), DesignError> {
        let bad = |m: String| Err(DesignError::InvalidProblem(m));
        validate(&self.base)?;
        let n = self.base.len();
        if self.free.is_empty() {
            return bad("no free parameters".into());
        }
        if self.restarts == 0 || self.max_evals == 0 {
            return bad("restarts and max_evals must be positive".into());
        }
        for (k, f) in self.free.iter().enumerate() {
            if !(f.lo.is_finite() && f.hi.is_finite() && f.lo > 0.0 && f.hi > f.lo) {
                return bad(format!("free[{k}]: bounds [{}, {}] must be positive, finite and increasing", f.lo, f.hi));
            }
            let ok = match f.param {
                Param::Coupling { i, j } => i < n && j < n && i != j,
                Param::InputDecay { i } | Param::OutputDecay { i } => i < n,
            };
            if !ok {
                return bad(format!("free[{k}]: {:?} is out of range for {n} states", f.param));
            }
        }
        match self.target {
            Target::AtLeast { count } if count == 0 || count > n => {
                bad(format!("target count {count} must lie in 1..={n}"))
            }
            Target::AtFrequency { omega } if !omega.is_finite() => bad("target frequency is not finite".into()),
            _ => Ok(()),
        }
    }

    /// The base spec with `values` substituted for the free parameters.
    pub fn apply(&self, values: &[f64]) -> NetworkSpec {
        let mut spec = self.base.clone();
        for (f, &v) in self.free.iter().zip(values) {
            match f.param {
                Param::Coupling { i, j } => spec.set_coupling(i, j, v),
                Param::InputDecay { i } => spec.input_decays[i] = v,
                Param::OutputDecay { i } => spec.output_decays[i] = v,
            }
        }
        spec
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamValue {
    pub param: Param,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestartSummary {
    pub index: usize,
    pub objective: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuneReport {
    pub success: bool,
    /// Sum of `1 − |T|²` over the target frequencies, from the dense solver.
    pub objective: f64,
    pub params: Vec<ParamValue>,
    pub peak_frequencies: Vec<f64>,
    pub peak_transmission: Vec<f64>,
    pub best_restart: usize,
    pub evaluations: usize,
    pub restarts: Vec<RestartSummary>,
    pub network: NetworkSpec,
}

/// Signed search residuals and the zeros they were taken at.
///
/// For a fixed frequency these are `Re R(ω*)` and `Im R(ω*)`. Otherwise
/// each of the `m` chosen reflection zeros `z` contributes
/// `sign(Im z)·|R(Re z)|`, which vanishes exactly when the zero reaches the
/// real axis and stays smooth as it crosses. Without `track` the zeros with
/// the smallest `|R|` are chosen; with it, the zeros nearest the tracked ones.
fn residuals(problem: &DesignProblem, values: &[f64], track: Option<&[Complex64]>) -> Option<(Vec<f64>, Vec<Complex64>)> {
    let net = validate(&problem.apply(values)).ok()?;
    let prep = Prepared::new(&net);
    let refl = |w: f64| prep.smatrix(w).ok().map(|s| s[(PORT_INPUT, PORT_INPUT)]);
    match problem.target {
        Target::AtFrequency { omega } => {
            let r = refl(omega)?;
            Some((vec![r.re, r.im], Vec::new()))
        }
        Target::AtLeast { count } => {
            let zeros = scatter::reflection_zeros(&net).ok()?;
            let chosen: Vec<Complex64> = match track {
                Some(prev) => prev
                    .iter()
                    .map(|p| *zeros.iter().min_by(|a, b| (*a - p).norm().total_cmp(&(*b - p).norm())).unwrap())
                    .collect(),
                None => {
                    let mut scored: Vec<(f64, Complex64)> =
                        zeros.iter().map(|z| (refl(z.re).map_or(1.0, |r| r.norm()), *z)).collect();
                    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
                    scored[..count].iter().map(|s| s.1).collect()
                }
            };
            let r = chosen
                .iter()
                .map(|z| Some(refl(z.re)?.norm().copysign(z.im)))
                .collect::<Option<Vec<f64>>>()?;
            Some((r, chosen))
        }
    }
}

/// Search objective: the squared norm of [`residuals`].
fn surrogate(problem: &DesignProblem, values: &[f64]) -> f64 {
    residuals(problem, values, None).map_or(f64::INFINITY, |(r, _)| r.iter().map(|v| v * v).sum())
}

/// Dense-solver check of a candidate: the target frequencies, their `|T|²`,
/// and the summed deficit.
fn verify(problem: &DesignProblem, values: &[f64]) -> Result<(Vec<f64>, Vec<f64>, f64), DesignError> {
    let net = validate(&problem.apply(values))?;
    let prep = Prepared::new(&net);
    let t2 = |w: f64| -> Result<f64, ScatterError> { Ok(prep.smatrix(w)?[(PORT_OUTPUT, PORT_INPUT)].norm_sqr()) };
    match problem.target {
        Target::AtFrequency { omega } => {
            let v = t2(omega)?;
            Ok((vec![omega], vec![v], 1.0 - v))
        }
        Target::AtLeast { count } => {
            let r2 = |w: f64| prep.smatrix(w).map_or(1.0, |s| s[(PORT_INPUT, PORT_INPUT)].norm_sqr());
            let mut zeros = scatter::reflection_zeros(&net)?;
            zeros.sort_by(|a, b| r2(a.re).total_cmp(&r2(b.re)));
            zeros.truncate(count);
            zeros.sort_by(|a, b| a.re.total_cmp(&b.re));
            let scale = scatter::poles(&net)?.iter().map(|p| p.im.abs()).fold(0.0, f64::max);
            let mut freqs = Vec::with_capacity(count);
            let mut values = Vec::with_capacity(count);
            for (k, z) in zeros.iter().enumerate() {
                let mut reach = scale;
                if k > 0 {
                    reach = reach.min((z.re - zeros[k - 1].re) / 2.0);
                }
                if k + 1 < zeros.len() {
                    reach = reach.min((zeros[k + 1].re - z.re) / 2.0);
                }
                let at_zero = t2(z.re)?;
                let (w, v) = if reach > 0.0 {
                    golden_max(z.re - reach, z.re + reach, t2)?
                } else {
                    (z.re, at_zero)
                };
                let (w, v) = if v >= at_zero { (w, v) } else { (z.re, at_zero) };
                freqs.push(w);
                values.push(v);
            }
            // Coincident frequencies count once: the rest are unmet.
            let tol = 1e-9 * scale.max(f64::MIN_POSITIVE);
            let mut deficit = 0.0;
            for k in 0..freqs.len() {
                let duplicate = k > 0 && (freqs[k] - freqs[k - 1]).abs() <= tol;
                deficit += if duplicate { 1.0 } else { (1.0 - values[k]).max(0.0) };
            }
            Ok((freqs, values, deficit))
        }
    }
}

/// Reflects `x` into `[lo, hi]`.
fn reflect_into(mut x: f64, lo: f64, hi: f64) -> f64 {
    for _ in 0..4 {
        if x > hi {
            x = 2.0 * hi - x;
        } else if x < lo {
            x = 2.0 * lo - x;
        } else {
            return x;
        }
    }
    x.clamp(lo, hi)
}

struct Search<'a> {
    problem: &'a DesignProblem,
    lo: Vec<f64>,
    hi: Vec<f64>,
    evals: usize,
}

impl Search<'_> {
    fn eval(&mut self, x: &mut [f64]) -> f64 {
        for (k, xi) in x.iter_mut().enumerate() {
            *xi = reflect_into(*xi, self.lo[k], self.hi[k]);
        }
        self.evals += 1;
        let values: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        surrogate(self.problem, &values)
    }

    /// Levenberg–Marquardt refinement of `start` on the signed residuals,
    /// with a forward-difference Jacobian in log space. Steps take the
    /// minimum-norm form, since there are usually more parameters than
    /// residuals.
    fn polish(&mut self, start: &[f64], f_start: f64, budget: usize) -> (Vec<f64>, f64) {
        let d = start.len();
        let mut x = start.to_vec();
        let mut f = f_start;
        let mut lambda = 1e-3;
        let stop = self.evals + budget;
        while self.evals + d + 1 < stop && f > 1e-28 {
            let values: Vec<f64> = x.iter().map(|v| v.exp()).collect();
            self.evals += 1;
            let Some((r, zeros)) = residuals(self.problem, &values, None) else {
                break;
            };
            let m = r.len();
            let mut jac = DMatrix::<f64>::zeros(m, d);
            let mut usable = true;
            for k in 0..d {
                let h = 1e-7 * (1.0 + x[k].abs());
                let mut xp = x.clone();
                xp[k] += h;
                let vp: Vec<f64> = xp.iter().map(|v| v.exp()).collect();
                self.evals += 1;
                let Some((rp, _)) = residuals(self.problem, &vp, Some(&zeros)) else {
                    usable = false;
                    break;
                };
                for i in 0..m {
                    jac[(i, k)] = (rp[i] - r[i]) / h;
                }
            }
            if !usable {
                break;
            }
            let rv = DVector::from_vec(r);
            let jjt = &jac * jac.transpose();
            let mut accepted = false;
            while lambda < 1e12 && self.evals < stop {
                let damped = &jjt + DMatrix::<f64>::identity(m, m) * (lambda * (1.0 + jjt.diagonal().max()));
                let Some(y) = damped.lu().solve(&rv) else {
                    lambda *= 10.0;
                    continue;
                };
                let step = jac.transpose() * y;
                let mut xn: Vec<f64> = (0..d).map(|k| x[k] - step[k]).collect();
                let fnew = self.eval(&mut xn);
                if fnew < f {
                    x = xn;
                    f = fnew;
                    lambda = (lambda / 10.0).max(1e-12);
                    accepted = true;
                    break;
                }
                lambda *= 10.0;
            }
            if !accepted {
                break;
            }
        }
        (x, f)
    }

    /// One Nelder–Mead run from `start` with initial edge `step`.
    fn nelder_mead(&mut self, start: &[f64], step: &[f64], budget: usize) -> (Vec<f64>, f64) {
        let d = start.len();
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
        let mut x0 = start.to_vec();
        let f0 = self.eval(&mut x0);
        simplex.push((x0, f0));
        for k in 0..d {
            let mut x = start.to_vec();
            x[k] += step[k];
            if x[k] > self.hi[k] {
                x[k] = start[k] - step[k];
            }
            let f = self.eval(&mut x);
            simplex.push((x, f));
        }
        let stop = self.evals + budget;
        while self.evals < stop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let (best, worst) = (simplex[0].1, simplex[d].1);
            let size = (1..=d)
                .map(|k| (0..d).map(|i| (simplex[k].0[i] - simplex[0].0[i]).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if best < 1e-28 || size < 1e-13 || (worst - best).abs() <= 1e-16 * best.abs() {
                break;
            }
            let centroid: Vec<f64> = (0..d)
                .map(|i| simplex[..d].iter().map(|p| p.0[i]).sum::<f64>() / d as f64)
                .collect();
            let along = |t: f64| -> Vec<f64> {
                (0..d).map(|i| centroid[i] + t * (simplex[d].0[i] - centroid[i])).collect()
            };
            let mut xr = along(-1.0);
            let fr = self.eval(&mut xr);
            if fr < simplex[0].1 {
                let mut xe = along(-2.0);
                let fe = self.eval(&mut xe);
                simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[d - 1].1 {
                simplex[d] = (xr, fr);
            } else {
                let t = if fr < simplex[d].1 { -0.5 } else { 0.5 };
                let mut xc = along(t);
                let fc = self.eval(&mut xc);
                if fc < fr.min(simplex[d].1) {
                    simplex[d] = (xc, fc);
                } else {
                    let x_best = simplex[0].0.clone();
                    for p in simplex.iter_mut().skip(1) {
                        let mut x: Vec<f64> = (0..d).map(|i| x_best[i] + 0.5 * (p.0[i] - x_best[i])).collect();
                        let f = self.eval(&mut x);
                        *p = (x, f);
                    }
                }
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        simplex.swap_remove(0)
    }
}

struct RestartResult {
    index: usize,
    values: Vec<f64>,
    evaluations: usize,
    verified: Result<(Vec<f64>, Vec<f64>, f64), DesignError>,
}

fn run_restart(problem: &DesignProblem, index: usize) -> RestartResult {
    let lo: Vec<f64> = problem.free.iter().map(|f| f.lo.ln()).collect();
    let hi: Vec<f64> = problem.free.iter().map(|f| f.hi.ln()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(problem.seed.wrapping_add(index as u64));
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> { lo.iter().zip(&hi).map(|(&l, &h)| rng.random_range(l..=h)).collect() };
    let mut x = draw(&mut rng);
    let mut search = Search {
        problem,
        lo: lo.clone(),
        hi: hi.clone(),
        evals: 0,
    };
    // Each descent is a short simplex stage to find a basin, then
    // Levenberg–Marquardt. Restarting the simplex around the incumbent
    // recovers from collapse; a descent that stops gaining is abandoned for a
    // fresh draw while budget remains.
    let budget = problem.max_evals;
    let d = x.len();
    let mut best: Option<(Vec<f64>, f64)> = None;
    while search.evals < budget {
        let mut step_scale = 0.1;
        let mut f_cur = f64::INFINITY;
        while search.evals < budget {
            let step: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| step_scale * (h - l)).collect();
            let (xn, fnew) = search.nelder_mead(&x, &step, (budget - search.evals).min(30 * d));
            let polish_budget = budget.saturating_sub(search.evals).min(40 * (d + 2));
            let (xn, fnew) = search.polish(&xn, fnew, polish_budget);
            // Only rounds that gain an order of magnitude justify staying.
            let gained = fnew < 0.1 * f_cur;
            if fnew < f_cur {
                x = xn;
                f_cur = fnew;
            }
            if f_cur < 1e-28 || !gained {
                break;
            }
            step_scale *= 0.5;
        }
        if best.as_ref().is_none_or(|b| f_cur < b.1) {
            best = Some((x.clone(), f_cur));
        }
        if f_cur < 1e-20 {
            break;
        }
        x = draw(&mut rng);
    }
    let x = best.map_or(x, |b| b.0);
    let values: Vec<f64> = x.iter().map(|v| v.exp()).collect();
    let verified = verify(problem, &values);
    RestartResult {
        index,
        values,
        evaluations: search.evals,
        verified,
    }
}

fn coupling_sum(problem: &DesignProblem, values: &[f64]) -> f64 {
    let spec = problem.apply(values);
    let n = spec.len();
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| spec.coupling[i][j].abs()).sum()
}

/// Searches the free parameters for perfect transmission.
///
/// Runs `restarts` independent searches (Nelder–Mead, then
/// Levenberg–Marquardt) in log-parameter space
/// (bounds enforced by reflection), each seeded with `seed + index`, in
/// parallel. Every restart's best point is re-verified with the dense
/// solver; the winner has the smallest verified objective, ties broken by
/// smallest total coupling and then restart index. The outcome does not
/// depend on thread count.
pub fn tune(problem: &DesignProblem) -> Result<TuneReport, DesignError> {
    problem.validate()?;
    let results: Vec<RestartResult> = (0..problem.restarts)
        .into_par_iter()
        .map(|k| run_restart(problem, k))
        .collect();

    let summaries: Vec<RestartSummary> = results
        .iter()
        .map(|r| RestartSummary {
            index: r.index,
            objective: r.verified.as_ref().map_or(f64::INFINITY, |v| v.2),
            evaluations: r.evaluations,
        })
        .collect();
    let evaluations = summaries.iter().map(|s| s.evaluations).sum();

    let mut ok: Vec<&RestartResult> = results.iter().filter(|r| r.verified.is_ok()).collect();
    if ok.is_empty() {
        return Err(results.into_iter().next().and_then(|r| r.verified.err()).unwrap_or_else(|| {
            DesignError::InvalidProblem("no restarts ran".into())
        }));
    }
    let key = |r: &RestartResult| (r.verified.as_ref().unwrap().2, coupling_sum(problem, &r.values), r.index);
    ok.sort_by(|a, b| {
        let (ka, kb) = (key(a), key(b));
        ka.0.total_cmp(&kb.0).then(ka.1.total_cmp(&kb.1)).then(ka.2.cmp(&kb.2))
    });
    let best = ok[0];
    let (freqs, t2, objective) = best.verified.clone().unwrap();
    let report = TuneReport {
        success: objective < SUCCESS_THRESHOLD,
        objective,
        params: problem
            .free
            .iter()
            .zip(&best.values)
            .map(|(f, &value)| ParamValue { param: f.param, value })
            .collect(),
        peak_frequencies: freqs,
        peak_transmission: t2,
        best_restart: best.index,
        evaluations,
        restarts: summaries,
        network: problem.apply(&best.values),
    };
    if report.success {
        Ok(report)
    } else {
        Err(DesignError::NoConvergence { report: Box::new(report) })
    }
}

/// Validates the network a tuning run produced.
pub fn tuned_network(report: &TuneReport) -> Result<ValidatedNetwork, DesignError> {
    Ok(validate(&report.network)?)
}
