//! Input files, frequency grids and output formats behind the `qnet`
//! command.
//!
//! An input file is JSON:
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "rate_unit": 1.0,
//!   "network": { "type": "series", "N": 2, "gamma": 1, "Gamma": 2, "omegas": [0, 0.75], "g": [1.2747549] },
//!   "side_channels": [[0.0, 0.02]],
//!   "design": { "free": [...], "target": {...} },
//!   "wavepacket": { "center": 0.0, "sigma": 0.3, "t0": -10.0 }
//! }
//! ```
//!
//! `rate_unit` multiplies every rate and frequency in the file (and divides
//! `t0`); all command-line options and outputs are in the scaled unit.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use qnet_core::design::{tune, DesignError, DesignProblem, FreeParam, Target};
use qnet_core::metrics::{
    certified_bandwidth, click_curve, group_delay, propagate_wavepacket, unwrap_phase, MetricsError, MetricsReport,
};
use qnet_core::netcore::{
    build_parallel, build_series, lower_hybrid, validate, HybridSpec, ManifoldCoupling, NetError, NetworkSpec,
    SweepGrid, UnbalancedProfile, ValidatedNetwork,
};
use qnet_core::scatter::{poles, resolving_grid, sweep, PoleRefinement, Prepared, ScatterError};
use qnet_core::Wavepacket;

pub const SCHEMA_VERSION: u32 = 1;

/// Largest grid the command will build on its own.
const MAX_POINTS: usize = 2_000_000;

/// Where in the input a parse failed.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    /// Dotted path to the offending field, `.` for the document root.
    pub field: String,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}, field `{}`: {}", self.line, self.column, self.field, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("invalid network: {0}")]
    Validation(#[from] NetError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Scatter(#[from] ScatterError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// 1 for I/O, 2 for anything wrong with the input or options, 3 for a
    /// numerical failure on valid input.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Parse(_) | CliError::Validation(_) | CliError::Config(_) => 2,
            CliError::Scatter(ScatterError::Net(_)) | CliError::Metrics(MetricsError::Net(_)) => 2,
            CliError::Metrics(MetricsError::InvalidWindow(_)) => 2,
            CliError::Design(e) => match e {
                DesignError::NoConvergence { .. } | DesignError::Scatter(_) => 3,
                _ => 2,
            },
            CliError::Scatter(_) | CliError::Metrics(_) => 3,
        }
    }

    /// Output worth writing even though the command failed: the best design
    /// found when tuning does not converge.
    pub fn partial_output(&self) -> Option<String> {
        match self {
            CliError::Design(DesignError::NoConvergence { report }) => Some(to_json(report)),
            _ => None,
        }
    }
}

/// A scalar broadcast to every state, or one value per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Rates {
    Uniform(f64),
    List(Vec<f64>),
}

impl Rates {
    fn expand(&self, n: usize) -> Vec<f64> {
        match self {
            Rates::Uniform(v) => vec![*v; n],
            Rates::List(v) => v.clone(),
        }
    }
}

/// The `network` object. `type` selects the builder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum NetworkDef {
    Parallel {
        #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
        omegas: Vec<f64>,
        gamma: Rates,
        #[serde(rename = "Gamma")]
        big_gamma: Rates,
    },
    Series {
        #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
        omegas: Vec<f64>,
        gamma: f64,
        #[serde(rename = "Gamma")]
        big_gamma: f64,
        g: Rates,
    },
    Hybrid {
        manifolds: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<Rates>,
        #[serde(rename = "Gamma", default, skip_serializing_if = "Option::is_none")]
        big_gamma: Option<Rates>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        g: Option<Vec<ManifoldCoupling>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        unbalance: Option<UnbalancedProfile>,
    },
    General {
        omegas: Vec<f64>,
        g: Vec<Vec<f64>>,
        gamma: Vec<f64>,
        #[serde(rename = "Gamma")]
        big_gamma: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSection {
    pub free: Vec<FreeParam>,
    pub target: Target,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_evals: Option<usize>,
}

/// Gaussian input pulse: carrier `center`, spectral rms width `sigma`,
/// temporal centre `t0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WavepacketSection {
    pub center: f64,
    pub sigma: f64,
    pub t0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    schema_version: u32,
    #[serde(default = "unit")]
    rate_unit: f64,
    network: NetworkDef,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    side_channels: Vec<Rates>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    design: Option<DesignSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    wavepacket: Option<WavepacketSection>,
}

fn unit() -> f64 {
    1.0
}

/// The network as described in the file, before lowering and scaling.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Flat(NetworkSpec),
    Hybrid(HybridSpec),
}

/// A parsed input file. Everything except `model` is already in the scaled
/// unit.
#[derive(Debug, Clone)]
pub struct NetworkFile {
    pub model: Model,
    pub rate_unit: f64,
    pub network: ValidatedNetwork,
    pub design: Option<DesignSection>,
    pub wavepacket: Option<WavepacketSection>,
}

fn check_count(field: &str, declared: Option<usize>, found: usize) -> Result<(), CliError> {
    match declared {
        Some(n) if n != found => Err(NetError::LengthMismatch {
            field: field.into(),
            expected: n,
            found,
        }
        .into()),
        _ => Ok(()),
    }
}

fn lower(def: &NetworkDef) -> Result<Model, CliError> {
    Ok(match def {
        NetworkDef::Parallel { n, omegas, gamma, big_gamma } => {
            check_count("network.omegas", *n, omegas.len())?;
            let k = omegas.len();
            Model::Flat(build_parallel(omegas, &gamma.expand(k), &big_gamma.expand(k))?)
        }
        NetworkDef::Series { n, omegas, gamma, big_gamma, g } => {
            check_count("network.omegas", *n, omegas.len())?;
            let chain = g.expand(omegas.len().saturating_sub(1));
            Model::Flat(build_series(omegas, *gamma, *big_gamma, &chain)?)
        }
        NetworkDef::Hybrid { manifolds, gamma, big_gamma, g, unbalance } => {
            let hybrid = match (unbalance, gamma, big_gamma, g) {
                (Some(u), None, None, None) => {
                    HybridSpec::critical_unbalanced(manifolds.clone(), u.decays.clone(), u.ratios.clone())?
                }
                (None, Some(gamma), Some(big_gamma), Some(g)) => {
                    let first = manifolds.first().map_or(0, Vec::len);
                    let last = manifolds.last().map_or(0, Vec::len);
                    HybridSpec {
                        manifolds: manifolds.clone(),
                        input_decays: gamma.expand(first),
                        output_decays: big_gamma.expand(last),
                        couplings: g.clone(),
                        unbalance: None,
                    }
                }
                _ => {
                    return Err(CliError::Config(
                        "hybrid network needs either `unbalance` alone or all of `gamma`, `Gamma` and `g`".into(),
                    ))
                }
            };
            Model::Hybrid(hybrid)
        }
        NetworkDef::General { omegas, g, gamma, big_gamma } => Model::Flat(NetworkSpec {
            resonances: omegas.clone(),
            coupling: g.clone(),
            input_decays: gamma.clone(),
            output_decays: big_gamma.clone(),
            side_decays: Vec::new(),
        }),
    })
}

fn parse_error(field: String, e: &serde_json::Error) -> ParseError {
    // serde_json appends " at line L column C"; the position is kept separately.
    let full = e.to_string();
    let message = match full.rfind(" at line ") {
        Some(i) => full[..i].to_string(),
        None => full,
    };
    ParseError { field, line: e.line(), column: e.column(), message }
}

/// Parses and validates an input file's text.
pub fn parse_network_str(text: &str) -> Result<NetworkFile, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        parse_error(field, e.inner())
    })?;
    if raw.schema_version != SCHEMA_VERSION {
        return Err(ParseError {
            field: "schema_version".into(),
            line: 0,
            column: 0,
            message: format!("unsupported schema version {} (expected {SCHEMA_VERSION})", raw.schema_version),
        }
        .into());
    }
    let scale = raw.rate_unit;
    if !(scale.is_finite() && scale > 0.0) {
        return Err(CliError::Config(format!("rate_unit = {scale} must be positive and finite")));
    }
    let model = lower(&raw.network)?;
    let mut spec = match &model {
        Model::Flat(s) => s.clone(),
        Model::Hybrid(h) => lower_hybrid(h)?,
    };
    for side in &raw.side_channels {
        let rates = side.expand(spec.len());
        spec = spec.with_side_channel(rates);
    }
    let network = validate(&spec.scaled(scale))?;
    let design = raw.design.map(|mut d| {
        for f in &mut d.free {
            f.lo *= scale;
            f.hi *= scale;
        }
        if let Target::AtFrequency { omega } = &mut d.target {
            *omega *= scale;
        }
        d
    });
    let wavepacket = raw.wavepacket.map(|w| WavepacketSection {
        center: w.center * scale,
        sigma: w.sigma * scale,
        t0: w.t0 / scale,
    });
    Ok(NetworkFile { model, rate_unit: scale, network, design, wavepacket })
}

/// Reads, parses and validates an input file.
pub fn parse_network_file(path: &Path) -> Result<NetworkFile, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    parse_network_str(&text)
}

/// The file re-expressed as a `general` network in the scaled unit.
pub fn normalized_json(file: &NetworkFile) -> String {
    let spec = file.network.spec();
    let raw = RawFile {
        schema_version: SCHEMA_VERSION,
        rate_unit: 1.0,
        network: NetworkDef::General {
            omegas: spec.resonances.clone(),
            g: spec.coupling.clone(),
            gamma: spec.input_decays.clone(),
            big_gamma: spec.output_decays.clone(),
        },
        side_channels: spec.side_decays.iter().cloned().map(Rates::List).collect(),
        design: file.design.clone(),
        wavepacket: file.wavepacket,
    };
    to_json(&raw)
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serialisable");
    s.push('\n');
    s
}

/// Fixed 17-significant-digit scientific notation.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv(header: &str, rows: impl Iterator<Item = Vec<f64>>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(num).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// Lower end of the frequency window [default: resonance span − 20 linewidths]
    #[arg(long, allow_hyphen_values = true)]
    pub wmin: Option<f64>,
    /// Upper end of the frequency window [default: resonance span + 20 linewidths]
    #[arg(long, allow_hyphen_values = true)]
    pub wmax: Option<f64>,
    /// Exact number of uniformly spaced points (overrides --ppl)
    #[arg(long)]
    pub points: Option<usize>,
    /// Points per linewidth
    #[arg(long, default_value_t = 40.0)]
    pub ppl: f64,
}

#[derive(Debug, Clone, Args)]
pub struct Io {
    /// Network description file
    #[arg(long, short)]
    pub input: PathBuf,
    /// Output file [default: standard output]
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Check an input file and print it as a normalised `general` network
    Validate {
        #[command(flatten)]
        io: Io,
    },
    /// Transmission, reflection, phase and group delay on a frequency grid (CSV)
    Sweep {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Bandwidth, dispersion, phase, peaks and zeros (JSON)
    Metrics {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        grid: GridArgs,
        /// Unity-peak and zero tolerance
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Tune the free parameters in the file's `design` section (JSON)
    Design {
        #[command(flatten)]
        io: Io,
        /// Overrides the seed in the file
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Transmitted pulse for the file's `wavepacket` section (CSV)
    Wavepacket {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Click probability against detection window length (CSV)
    Povm {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        grid: GridArgs,
        /// Longest window [default: 50 / bandwidth]
        #[arg(long)]
        tau: Option<f64>,
        /// Number of window lengths from 0 to --tau
        #[arg(long, default_value_t = 100)]
        tau_points: usize,
    },
}

impl Command {
    pub fn io(&self) -> &Io {
        match self {
            Command::Validate { io }
            | Command::Sweep { io, .. }
            | Command::Metrics { io, .. }
            | Command::Design { io, .. }
            | Command::Wavepacket { io, .. }
            | Command::Povm { io, .. } => io,
        }
    }
}

/// Frequency-domain simulator for linear quantum networks.
#[derive(Debug, Parser)]
#[command(name = "qnet", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Worker threads for frequency sweeps
    #[arg(long, env = "QNET_THREADS", global = true)]
    pub threads: Option<usize>,
}

/// Smallest and largest pole half-widths, and the span of resonances and
/// pole centres.
fn scales(net: &ValidatedNetwork) -> Result<(f64, f64, f64, f64), CliError> {
    let ps = poles(net)?;
    let widths: Vec<f64> = ps.iter().map(|p| p.im.abs()).filter(|&h| h > 0.0).collect();
    if widths.is_empty() {
        return Err(CliError::Config("no state decays into a continuum".into()));
    }
    let h_min = widths.iter().copied().fold(f64::INFINITY, f64::min);
    let h_max = widths.iter().copied().fold(0.0, f64::max);
    let centres = ps.iter().map(|p| p.re).chain(net.resonances.iter().copied());
    let (lo, hi) = centres.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), w| (a.min(w), b.max(w)));
    Ok((h_min, h_max, lo, hi))
}

/// The frequency grid for a command.
///
/// With `--points`, exactly that many uniform samples. Otherwise, when
/// `uniform` is set (pulse propagation needs even spacing), `--ppl` samples
/// per narrowest linewidth across the window; else a uniform base at `--ppl`
/// per widest linewidth plus `--ppl` per linewidth around every pole.
/// `extra` widens the automatic window to cover an input spectrum.
pub fn frequency_grid(
    net: &ValidatedNetwork,
    args: &GridArgs,
    uniform: bool,
    extra: Option<(f64, f64)>,
) -> Result<SweepGrid, CliError> {
    let (h_min, h_max, lo, hi) = scales(net)?;
    let (mut auto_lo, mut auto_hi) = (lo - 20.0 * h_max, hi + 20.0 * h_max);
    if let Some((a, b)) = extra {
        auto_lo = auto_lo.min(a);
        auto_hi = auto_hi.max(b);
    }
    let wmin = args.wmin.unwrap_or(auto_lo);
    let wmax = args.wmax.unwrap_or(auto_hi);
    if !(wmin.is_finite() && wmax.is_finite() && wmin < wmax) {
        return Err(CliError::Config(format!("frequency window [{wmin}, {wmax}] is empty or not finite")));
    }
    if let Some(points) = args.points {
        if points < 2 {
            return Err(CliError::Config(format!("--points {points} must be at least 2")));
        }
        return Ok(SweepGrid::linspace(wmin, wmax, points)?);
    }
    if !(args.ppl.is_finite() && args.ppl > 0.0) {
        return Err(CliError::Config(format!("--ppl {} must be positive", args.ppl)));
    }
    let count = |h: f64| -> Result<usize, CliError> {
        let n = (args.ppl * (wmax - wmin) / h).ceil() + 1.0;
        if n > MAX_POINTS as f64 {
            return Err(CliError::Config(format!(
                "grid would need {n:.0} points; narrow the window or pass --points"
            )));
        }
        Ok((n as usize).max(2))
    };
    if uniform {
        return Ok(SweepGrid::linspace(wmin, wmax, count(h_min)?)?);
    }
    let refine = PoleRefinement { half_span: 10.0, points_per_width: 2.0 * args.ppl };
    Ok(resolving_grid(net, wmin, wmax, count(h_max)?, refine)?)
}

fn wavepacket_section(file: &NetworkFile) -> Result<WavepacketSection, CliError> {
    let w = file
        .wavepacket
        .ok_or_else(|| CliError::Config("input file has no `wavepacket` section".into()))?;
    if !(w.sigma.is_finite() && w.sigma > 0.0 && w.center.is_finite() && w.t0.is_finite()) {
        return Err(CliError::Config(format!(
            "wavepacket: sigma = {} must be positive and all fields finite",
            w.sigma
        )));
    }
    Ok(w)
}

fn pulse(file: &NetworkFile, grid: &GridArgs) -> Result<(qnet_core::ScatteringResponse, Wavepacket), CliError> {
    let w = wavepacket_section(file)?;
    let span = (w.center - 8.0 * w.sigma, w.center + 8.0 * w.sigma);
    let freqs = frequency_grid(&file.network, grid, true, Some(span))?;
    let resp = sweep(&file.network, &freqs)?;
    let psi = Wavepacket::gaussian(freqs, w.center, w.sigma, w.t0)?;
    Ok((resp, psi))
}

/// Runs a command on a parsed file and returns the text to write.
pub fn run(command: &Command, file: &NetworkFile) -> Result<String, CliError> {
    let net = &file.network;
    match command {
        Command::Validate { .. } => Ok(normalized_json(file)),
        Command::Sweep { grid, .. } => {
            let freqs = frequency_grid(net, grid, false, None)?;
            let resp = sweep(net, &freqs)?;
            let profile = unwrap_phase(&resp, Some(&Prepared::new(net)))?;
            let phase = profile.on_grid(&profile.phase);
            let tau = profile.on_grid(&group_delay(&profile));
            Ok(csv(
                "omega,ReT,ImT,absT2,ReR,ImR,phase_unwrapped,tau_g",
                (0..resp.len()).map(|j| {
                    let (t, r) = (resp.t(j), resp.r(j));
                    vec![freqs.as_slice()[j], t.re, t.im, t.norm_sqr(), r.re, r.im, phase[j], tau[j]]
                }),
            ))
        }
        Command::Metrics { grid, tol, .. } => {
            if !(tol.is_finite() && *tol > 0.0) {
                return Err(CliError::Config(format!("--tol {tol} must be positive")));
            }
            let freqs = frequency_grid(net, grid, false, None)?;
            let resp = sweep(net, &freqs)?;
            Ok(to_json(&MetricsReport::compute(net, &resp, *tol)?))
        }
        Command::Design { seed, .. } => {
            let d = file
                .design
                .as_ref()
                .ok_or_else(|| CliError::Config("input file has no `design` section".into()))?;
            let mut problem = DesignProblem::new(net.spec().clone(), d.free.clone(), d.target);
            problem.seed = seed.unwrap_or(d.seed);
            if let Some(r) = d.restarts {
                problem.restarts = r;
            }
            if let Some(m) = d.max_evals {
                problem.max_evals = m;
            }
            Ok(to_json(&tune(&problem)?))
        }
        Command::Wavepacket { grid, .. } => {
            let (resp, psi) = pulse(file, grid)?;
            let out = propagate_wavepacket(&resp, &psi)?;
            Ok(csv(
                "t,Re psi,Im psi,abs2",
                out.times.iter().zip(&out.values).map(|(&t, v)| vec![t, v.re, v.im, v.norm_sqr()]),
            ))
        }
        Command::Povm { grid, tau, tau_points, .. } => {
            if *tau_points < 2 {
                return Err(CliError::Config(format!("--tau-points {tau_points} must be at least 2")));
            }
            let tau_max = match tau {
                Some(t) if t.is_finite() && *t > 0.0 => *t,
                Some(t) => return Err(CliError::Config(format!("--tau {t} must be positive"))),
                None => 50.0 / certified_bandwidth(net)?,
            };
            let (resp, psi) = pulse(file, grid)?;
            let taus: Vec<f64> =
                (0..*tau_points).map(|i| tau_max * i as f64 / (*tau_points - 1) as f64).collect();
            let p = click_curve(&resp, &psi, &taus)?;
            Ok(csv("tau,click_probability", taus.iter().zip(&p).map(|(&t, &p)| vec![t, p])))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CHAIN: &str = r#"{
        "schema_version": 1,
        "network": { "type": "series", "N": 2, "gamma": 1, "Gamma": 2, "omegas": [0, 0.75], "g": [0.9601] }
    }"#;

    #[test]
    fn series_shorthand_lowers_to_chain() {
        let f = parse_network_str(CHAIN).unwrap();
        assert_eq!(f.network.coupling[0][1], 0.9601);
        assert_eq!(f.network.input_decays, vec![1.0, 0.0]);
        assert_eq!(f.network.output_decays, vec![0.0, 2.0]);
        assert!(matches!(f.model, Model::Flat(_)));
    }

    #[test]
    fn length_mismatch_is_a_validation_error() {
        let text = r#"{"schema_version": 1,
            "network": {"type": "parallel", "omegas": [0, 1], "gamma": [1, 1, 1], "Gamma": 1}}"#;
        let e = parse_network_str(text).unwrap_err();
        assert!(matches!(e, CliError::Validation(NetError::LengthMismatch { .. })), "{e}");
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn loop_in_general_network_is_accepted() {
        let text = r#"{"schema_version": 1, "network": {"type": "general",
            "omegas": [0, 0, 0], "g": [[0, 1, 0.3], [1, 0, 1], [0.3, 1, 0]],
            "gamma": [1, 0, 0], "Gamma": [0, 0, 1]}}"#;
        let f = parse_network_str(text).unwrap();
        assert_eq!(f.network.coupling[0][2], 0.3);
    }

    #[test]
    fn parse_errors_name_field_and_line() {
        let text = "{\"schema_version\": 1,\n \"network\": {\"type\": \"series\",\n \"omegas\": [0], \"gamma\": \"x\", \"Gamma\": 1, \"g\": []}}";
        match parse_network_str(text).unwrap_err() {
            CliError::Parse(p) => {
                assert!(p.field.starts_with("network"), "{p}");
                assert!(p.line >= 2, "{p}");
            }
            e => panic!("{e}"),
        }
        match parse_network_str("{\"schema_version\": 1,\n \"netwrk\": {}}").unwrap_err() {
            CliError::Parse(p) => assert!(p.message.contains("netwrk"), "{p}"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn rate_unit_scales_everything() {
        let text = r#"{"schema_version": 1, "rate_unit": 2.0,
            "network": {"type": "parallel", "omegas": [1], "gamma": 1, "Gamma": 3},
            "wavepacket": {"center": 1, "sigma": 0.5, "t0": -4}}"#;
        let f = parse_network_str(text).unwrap();
        assert_eq!(f.network.resonances, vec![2.0]);
        assert_eq!(f.network.output_decays, vec![6.0]);
        let w = f.wavepacket.unwrap();
        assert_eq!((w.center, w.sigma, w.t0), (2.0, 1.0, -2.0));
    }

    #[test]
    fn normalized_output_round_trips() {
        let text = r#"{"schema_version": 1, "rate_unit": 0.5,
            "network": {"type": "hybrid", "manifolds": [[-1, 1], [0]], "gamma": 1, "Gamma": 2, "g": [0.4]},
            "side_channels": [0.1]}"#;
        let f = parse_network_str(text).unwrap();
        let again = parse_network_str(&normalized_json(&f)).unwrap();
        assert_eq!(f.network.spec(), again.network.spec());
    }

    #[test]
    fn default_grid_resolves_every_pole() {
        let f = parse_network_str(CHAIN).unwrap();
        let args = GridArgs { wmin: None, wmax: None, points: None, ppl: 40.0 };
        let grid = frequency_grid(&f.network, &args, false, None).unwrap();
        let (h_min, ..) = scales(&f.network).unwrap();
        for p in poles(&f.network).unwrap() {
            let near = grid.as_slice().iter().filter(|w| (*w - p.re).abs() <= h_min).count();
            assert!(near >= 40, "{near} points within a half-width of {p}");
        }
    }

    #[test]
    fn empty_window_is_a_config_error() {
        let f = parse_network_str(CHAIN).unwrap();
        let args = GridArgs { wmin: Some(1.0), wmax: Some(1.0), points: None, ppl: 40.0 };
        let e = frequency_grid(&f.network, &args, false, None).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }
}
