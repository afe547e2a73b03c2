//! Network data model.
//!
//! A network is `N` discrete states with resonances `ω_i`, a real symmetric
//! coherent coupling matrix `g_ij` (zero diagonal), and incoherent decays to
//! the input continuum (`γ_i`), the monitored output continuum (`Γ_i`) and any
//! number of unmonitored side continua (`μ_i^(s)`). Every builder in this
//! module lowers to [`NetworkSpec`]; [`validate`] turns a spec into a
//! [`ValidatedNetwork`], which is what the solvers accept.
//!
//! All rates and frequencies share one unit (angular frequency).

use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance used when comparing rates and couplings for equality.
const REL_EQ: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Port {
    Input,
    Output,
}

impl fmt::Display for Port {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Port::Input => f.write_str("input"),
            Port::Output => f.write_str("output"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetError {
    #[error("coupling matrix is not symmetric: g[{i}][{j}] = {forward} but g[{j}][{i}] = {backward}")]
    AsymmetricCoupling {
        i: usize,
        j: usize,
        forward: f64,
        backward: f64,
    },
    #[error("{field}[{index}] = {value} is negative")]
    NegativeRate {
        field: String,
        index: usize,
        value: f64,
    },
    #[error("self coupling g[{index}][{index}] = {value} must be zero")]
    NonzeroSelfCoupling { index: usize, value: f64 },
    #[error("{field} has length {found}, expected {expected}")]
    LengthMismatch {
        field: String,
        expected: usize,
        found: usize,
    },
    #[error("no state couples to the {0} continuum")]
    NoPort(Port),
    #[error("{field}[{index}] = {value} is not finite")]
    NonFinite {
        field: String,
        index: usize,
        value: f64,
    },
    #[error("network has no states")]
    Empty,
    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),
    #[error("invalid hybrid network: {0}")]
    InvalidHybrid(String),
}

/// Non-fatal findings reported by [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "code", rename_all = "snake_case")]
pub enum Warning {
    /// Two mutually uncoupled states share a resonance. One combination of
    /// them is dark at that frequency and the system matrix may be singular
    /// exactly on resonance.
    DegenerateResonance { i: usize, j: usize, omega: f64 },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::DegenerateResonance { i, j, omega } => write!(
                f,
                "states {i} and {j} are uncoupled and degenerate at omega = {omega}"
            ),
        }
    }
}

/// Flat description of a network; the single source of truth every builder
/// lowers to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub resonances: Vec<f64>,
    pub coupling: Vec<Vec<f64>>,
    pub input_decays: Vec<f64>,
    pub output_decays: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub side_decays: Vec<Vec<f64>>,
}

impl NetworkSpec {
    /// A spec with no coherent couplings and no side channels.
    pub fn uncoupled(resonances: Vec<f64>, input_decays: Vec<f64>, output_decays: Vec<f64>) -> Self {
        let n = resonances.len();
        NetworkSpec {
            resonances,
            coupling: vec![vec![0.0; n]; n],
            input_decays,
            output_decays,
            side_decays: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.resonances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.resonances.is_empty()
    }

    /// Appends an unmonitored side continuum coupled at rates `rates`.
    pub fn with_side_channel(mut self, rates: Vec<f64>) -> Self {
        self.side_decays.push(rates);
        self
    }

    /// Sets a symmetric coupling `g_ij = g_ji = value`.
    pub fn set_coupling(&mut self, i: usize, j: usize, value: f64) {
        self.coupling[i][j] = value;
        self.coupling[j][i] = value;
    }

    /// Multiplies every rate and frequency by `scale` (the file format's
    /// `rate_unit`).
    pub fn scaled(mut self, scale: f64) -> Self {
        let mul = |v: &mut Vec<f64>| v.iter_mut().for_each(|x| *x *= scale);
        mul(&mut self.resonances);
        mul(&mut self.input_decays);
        mul(&mut self.output_decays);
        self.coupling.iter_mut().for_each(mul);
        self.side_decays.iter_mut().for_each(mul);
        self
    }

    /// True when no two states are coherently coupled.
    pub fn is_uncoupled(&self) -> bool {
        self.coupling.iter().flatten().all(|&g| g == 0.0)
    }
}

/// A [`NetworkSpec`] whose invariants have been checked.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidatedNetwork {
    spec: NetworkSpec,
    warnings: Vec<Warning>,
}

impl ValidatedNetwork {
    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn warnings(&self) -> &[Warning] {
        &self.warnings
    }

    pub fn into_spec(self) -> NetworkSpec {
        self.spec
    }

    /// Number of continua: input, output, then side channels in declaration
    /// order.
    pub fn port_count(&self) -> usize {
        2 + self.spec.side_decays.len()
    }
}

impl Deref for ValidatedNetwork {
    type Target = NetworkSpec;

    fn deref(&self) -> &NetworkSpec {
        &self.spec
    }
}

fn check_len(field: &str, found: usize, expected: usize) -> Result<(), NetError> {
    if found != expected {
        return Err(NetError::LengthMismatch {
            field: field.to_string(),
            expected,
            found,
        });
    }
    Ok(())
}

fn check_finite(field: &str, values: &[f64]) -> Result<(), NetError> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(NetError::NonFinite {
            field: field.to_string(),
            index,
            value: values[index],
        }),
        None => Ok(()),
    }
}

fn check_rates(field: &str, values: &[f64]) -> Result<(), NetError> {
    check_finite(field, values)?;
    match values.iter().position(|&v| v < 0.0) {
        Some(index) => Err(NetError::NegativeRate {
            field: field.to_string(),
            index,
            value: values[index],
        }),
        None => Ok(()),
    }
}

/// Checks every [`NetworkSpec`] invariant. Pure; validating the spec of an
/// already validated network returns an identical result.
pub fn validate(spec: &NetworkSpec) -> Result<ValidatedNetwork, NetError> {
    let n = spec.len();
    if n == 0 {
        return Err(NetError::Empty);
    }
    check_finite("resonances", &spec.resonances)?;
    check_len("coupling", spec.coupling.len(), n)?;
    for (i, row) in spec.coupling.iter().enumerate() {
        check_len(&format!("coupling[{i}]"), row.len(), n)?;
        check_finite(&format!("coupling[{i}]"), row)?;
    }
    check_len("input_decays", spec.input_decays.len(), n)?;
    check_len("output_decays", spec.output_decays.len(), n)?;
    for (s, side) in spec.side_decays.iter().enumerate() {
        check_len(&format!("side_decays[{s}]"), side.len(), n)?;
    }

    for i in 0..n {
        let gii = spec.coupling[i][i];
        if gii != 0.0 {
            return Err(NetError::NonzeroSelfCoupling { index: i, value: gii });
        }
        for j in (i + 1)..n {
            let (a, b) = (spec.coupling[i][j], spec.coupling[j][i]);
            if a != b {
                return Err(NetError::AsymmetricCoupling {
                    i,
                    j,
                    forward: a,
                    backward: b,
                });
            }
        }
    }

    check_rates("input_decays", &spec.input_decays)?;
    check_rates("output_decays", &spec.output_decays)?;
    for (s, side) in spec.side_decays.iter().enumerate() {
        check_rates(&format!("side_decays[{s}]"), side)?;
    }
    if spec.input_decays.iter().all(|&r| r == 0.0) {
        return Err(NetError::NoPort(Port::Input));
    }
    if spec.output_decays.iter().all(|&r| r == 0.0) {
        return Err(NetError::NoPort(Port::Output));
    }

    // States of one manifold: the same coherent neighbours and the same
    // continua. Degenerate pairs among them can form a dark combination.
    let links = |i: usize| -> Vec<bool> {
        let mut v: Vec<bool> = spec.coupling[i].iter().map(|&g| g != 0.0).collect();
        v.push(spec.input_decays[i] > 0.0);
        v.push(spec.output_decays[i] > 0.0);
        v.extend(spec.side_decays.iter().map(|s| s[i] > 0.0));
        v
    };
    let mut warnings = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let (wi, wj) = (spec.resonances[i], spec.resonances[j]);
            let scale = wi.abs().max(wj.abs()).max(1.0);
            if (wi - wj).abs() <= REL_EQ * scale && spec.coupling[i][j] == 0.0 && links(i) == links(j) {
                warnings.push(Warning::DegenerateResonance { i, j, omega: wi });
            }
        }
    }

    Ok(ValidatedNetwork {
        spec: spec.clone(),
        warnings,
    })
}

/// `N` mutually uncoupled states, each decaying into both continua.
pub fn build_parallel(
    resonances: &[f64],
    input_decays: &[f64],
    output_decays: &[f64],
) -> Result<NetworkSpec, NetError> {
    let n = resonances.len();
    check_len("input_decays", input_decays.len(), n)?;
    check_len("output_decays", output_decays.len(), n)?;
    let spec = NetworkSpec::uncoupled(
        resonances.to_vec(),
        input_decays.to_vec(),
        output_decays.to_vec(),
    );
    validate(&spec)?;
    Ok(spec)
}

/// A nearest-neighbour chain: state 0 decays into the input continuum at
/// `gamma_first`, state `N-1` into the output continuum at `gamma_last`, and
/// `chain[i]` couples states `i` and `i+1`.
pub fn build_series(
    resonances: &[f64],
    gamma_first: f64,
    gamma_last: f64,
    chain: &[f64],
) -> Result<NetworkSpec, NetError> {
    let n = resonances.len();
    if n == 0 {
        return Err(NetError::Empty);
    }
    check_len("chain_couplings", chain.len(), n - 1)?;
    let mut input = vec![0.0; n];
    let mut output = vec![0.0; n];
    input[0] = gamma_first;
    output[n - 1] = gamma_last;
    let mut spec = NetworkSpec::uncoupled(resonances.to_vec(), input, output);
    for (i, &g) in chain.iter().enumerate() {
        spec.set_coupling(i, i + 1, g);
    }
    validate(&spec)?;
    Ok(spec)
}

/// Coupling between two adjacent manifolds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ManifoldCoupling {
    /// Every state of manifold `k` couples to every state of manifold `k+1`
    /// at the same rate.
    Uniform(f64),
    /// `N_k × N_{k+1}` matrix of rates.
    Matrix(Vec<Vec<f64>>),
}

impl ManifoldCoupling {
    pub fn rate(&self, i: usize, j: usize) -> f64 {
        match self {
            ManifoldCoupling::Uniform(g) => *g,
            ManifoldCoupling::Matrix(m) => m[i][j],
        }
    }

    /// The common rate when all entries agree.
    pub fn uniform_rate(&self) -> Option<f64> {
        match self {
            ManifoldCoupling::Uniform(g) => Some(*g),
            ManifoldCoupling::Matrix(m) => {
                let first = *m.first()?.first()?;
                m.iter()
                    .flatten()
                    .all(|&g| approx_eq(g, first))
                    .then_some(first)
            }
        }
    }
}

/// Per-state decay profile for the critically coupled, uniformly unbalanced
/// hybrid family: manifold `k` has rates `decays[k][i]` toward the previous
/// stage and `ratios[k] · decays[k][i]` toward the next.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnbalancedProfile {
    pub decays: Vec<Vec<f64>>,
    pub ratios: Vec<f64>,
}

/// Manifolds of mutually uncoupled (already diagonalised) states placed in
/// series. Only the first manifold sees the input continuum and only the
/// last sees the output continuum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridSpec {
    pub manifolds: Vec<Vec<f64>>,
    pub input_decays: Vec<f64>,
    pub output_decays: Vec<f64>,
    pub couplings: Vec<ManifoldCoupling>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unbalance: Option<UnbalancedProfile>,
}

fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL_EQ * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

impl HybridSpec {
    /// Homogeneous decays within the end manifolds and one uniform rate per
    /// manifold pair.
    pub fn homogeneous(manifolds: Vec<Vec<f64>>, gamma: f64, big_gamma: f64, couplings: &[f64]) -> Self {
        let first = manifolds.first().map_or(0, Vec::len);
        let last = manifolds.last().map_or(0, Vec::len);
        HybridSpec {
            input_decays: vec![gamma; first],
            output_decays: vec![big_gamma; last],
            couplings: couplings.iter().map(|&g| ManifoldCoupling::Uniform(g)).collect(),
            manifolds,
            unbalance: None,
        }
    }

    /// Critically coupled, uniformly unbalanced family: the coupling between
    /// state `i` of manifold `k` and state `j` of manifold `k+1` is
    /// `sqrt(ratios[k] · decays[k][i] · decays[k+1][j]) / 2`, the input
    /// decays are `decays[0]` and the output decays are
    /// `ratios[M-1] · decays[M-1]`.
    pub fn critical_unbalanced(
        manifolds: Vec<Vec<f64>>,
        decays: Vec<Vec<f64>>,
        ratios: Vec<f64>,
    ) -> Result<Self, NetError> {
        let m = manifolds.len();
        if m == 0 {
            return Err(NetError::InvalidHybrid("no manifolds".into()));
        }
        check_len("unbalance.decays", decays.len(), m)?;
        check_len("unbalance.ratios", ratios.len(), m)?;
        for (k, (d, w)) in decays.iter().zip(&manifolds).enumerate() {
            check_len(&format!("unbalance.decays[{k}]"), d.len(), w.len())?;
        }
        let couplings = (0..m - 1)
            .map(|k| {
                let rows = decays[k]
                    .iter()
                    .map(|&di| {
                        decays[k + 1]
                            .iter()
                            .map(|&dj| (ratios[k] * di * dj).sqrt() / 2.0)
                            .collect()
                    })
                    .collect();
                ManifoldCoupling::Matrix(rows)
            })
            .collect();
        let spec = HybridSpec {
            input_decays: decays[0].clone(),
            output_decays: decays[m - 1].iter().map(|d| ratios[m - 1] * d).collect(),
            couplings,
            manifolds,
            unbalance: Some(UnbalancedProfile { decays, ratios }),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn manifold_sizes(&self) -> Vec<usize> {
        self.manifolds.iter().map(Vec::len).collect()
    }

    pub fn total_states(&self) -> usize {
        self.manifolds.iter().map(Vec::len).sum()
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let m = self.manifolds.len();
        if m == 0 {
            return Err(NetError::InvalidHybrid("no manifolds".into()));
        }
        if let Some(k) = self.manifolds.iter().position(Vec::is_empty) {
            return Err(NetError::InvalidHybrid(format!("manifold {k} is empty")));
        }
        for (k, w) in self.manifolds.iter().enumerate() {
            check_finite(&format!("manifolds[{k}]"), w)?;
        }
        check_len("input_decays", self.input_decays.len(), self.manifolds[0].len())?;
        check_len("output_decays", self.output_decays.len(), self.manifolds[m - 1].len())?;
        check_rates("input_decays", &self.input_decays)?;
        check_rates("output_decays", &self.output_decays)?;
        check_len("couplings", self.couplings.len(), m - 1)?;
        for (k, c) in self.couplings.iter().enumerate() {
            match c {
                ManifoldCoupling::Uniform(g) => check_finite(&format!("couplings[{k}]"), &[*g])?,
                ManifoldCoupling::Matrix(rows) => {
                    check_len(&format!("couplings[{k}]"), rows.len(), self.manifolds[k].len())?;
                    for (i, row) in rows.iter().enumerate() {
                        let field = format!("couplings[{k}][{i}]");
                        check_len(&field, row.len(), self.manifolds[k + 1].len())?;
                        check_finite(&field, row)?;
                    }
                }
            }
        }
        if let Some(profile) = &self.unbalance {
            check_len("unbalance.decays", profile.decays.len(), m)?;
            check_len("unbalance.ratios", profile.ratios.len(), m)?;
            check_rates("unbalance.ratios", &profile.ratios)?;
            for (k, d) in profile.decays.iter().enumerate() {
                check_len(&format!("unbalance.decays[{k}]"), d.len(), self.manifolds[k].len())?;
                check_rates(&format!("unbalance.decays[{k}]"), d)?;
            }
            let consistent = self
                .input_decays
                .iter()
                .zip(&profile.decays[0])
                .all(|(&a, &b)| approx_eq(a, b))
                && self
                    .output_decays
                    .iter()
                    .zip(&profile.decays[m - 1])
                    .all(|(&a, &b)| approx_eq(a, profile.ratios[m - 1] * b))
                && self.couplings.iter().enumerate().all(|(k, c)| {
                    profile.decays[k].iter().enumerate().all(|(i, &di)| {
                        profile.decays[k + 1].iter().enumerate().all(|(j, &dj)| {
                            approx_eq(c.rate(i, j), (profile.ratios[k] * di * dj).sqrt() / 2.0)
                        })
                    })
                });
            if !consistent {
                return Err(NetError::InvalidHybrid(
                    "decays and couplings disagree with the unbalance profile".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Flattens a hybrid network. States are numbered manifold by manifold;
/// adjacent manifolds are fully connected and states within a manifold are
/// uncoupled.
pub fn lower_hybrid(hybrid: &HybridSpec) -> Result<NetworkSpec, NetError> {
    hybrid.validate()?;
    let n = hybrid.total_states();
    let m = hybrid.manifolds.len();
    let offsets: Vec<usize> = hybrid
        .manifolds
        .iter()
        .scan(0, |acc, w| {
            let start = *acc;
            *acc += w.len();
            Some(start)
        })
        .collect();

    let resonances: Vec<f64> = hybrid.manifolds.iter().flatten().copied().collect();
    let mut input = vec![0.0; n];
    let mut output = vec![0.0; n];
    input[..hybrid.input_decays.len()].copy_from_slice(&hybrid.input_decays);
    output[offsets[m - 1]..].copy_from_slice(&hybrid.output_decays);

    let mut spec = NetworkSpec::uncoupled(resonances, input, output);
    for (k, c) in hybrid.couplings.iter().enumerate() {
        for i in 0..hybrid.manifolds[k].len() {
            for j in 0..hybrid.manifolds[k + 1].len() {
                spec.set_coupling(offsets[k] + i, offsets[k + 1] + j, c.rate(i, j));
            }
        }
    }
    validate(&spec)?;
    Ok(spec)
}

/// Strictly increasing, finite, nonempty list of angular frequencies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepGrid {
    frequencies: Vec<f64>,
}

impl SweepGrid {
    pub fn new(frequencies: Vec<f64>) -> Result<Self, NetError> {
        if frequencies.is_empty() {
            return Err(NetError::InvalidGrid("grid is empty".into()));
        }
        if let Some(i) = frequencies.iter().position(|w| !w.is_finite()) {
            return Err(NetError::InvalidGrid(format!("frequency {i} is not finite")));
        }
        if let Some(i) = frequencies.windows(2).position(|w| w[1] <= w[0]) {
            return Err(NetError::InvalidGrid(format!(
                "frequencies are not strictly increasing at index {}",
                i + 1
            )));
        }
        Ok(SweepGrid { frequencies })
    }

    /// `points` equally spaced frequencies from `lo` to `hi` inclusive.
    pub fn linspace(lo: f64, hi: f64, points: usize) -> Result<Self, NetError> {
        if points < 2 {
            return Err(NetError::InvalidGrid(format!("need at least 2 points, got {points}")));
        }
        if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
            return Err(NetError::InvalidGrid(format!("empty window [{lo}, {hi}]")));
        }
        let step = (hi - lo) / (points - 1) as f64;
        let mut w: Vec<f64> = (0..points).map(|i| lo + step * i as f64).collect();
        w[points - 1] = hi;
        SweepGrid::new(w)
    }

    /// Sorts and de-duplicates arbitrary samples; points closer than
    /// `min_gap` to their predecessor are dropped.
    pub fn from_unsorted(mut frequencies: Vec<f64>, min_gap: f64) -> Result<Self, NetError> {
        frequencies.retain(|w| w.is_finite());
        frequencies.sort_by(f64::total_cmp);
        let mut out: Vec<f64> = Vec::with_capacity(frequencies.len());
        for w in frequencies {
            match out.last() {
                Some(&prev) if w - prev <= min_gap => {}
                _ => out.push(w),
            }
        }
        SweepGrid::new(out)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.frequencies[0]
    }

    pub fn last(&self) -> f64 {
        self.frequencies[self.frequencies.len() - 1]
    }

    /// Detuning `Δ_i = ω − ω_i` of grid point `index` from `resonance`.
    pub fn detuning(&self, index: usize, resonance: f64) -> f64 {
        self.frequencies[index] - resonance
    }

    /// True when every spacing agrees with the mean spacing to `rel_tol`.
    pub fn is_uniform(&self, rel_tol: f64) -> bool {
        if self.len() < 3 {
            return true;
        }
        let mean = (self.last() - self.first()) / (self.len() - 1) as f64;
        self.frequencies
            .windows(2)
            .all(|w| ((w[1] - w[0]) - mean).abs() <= rel_tol * mean)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simple() -> NetworkSpec {
        NetworkSpec::uncoupled(vec![0.0], vec![1.0], vec![1.0])
    }

    #[test]
    fn minimal_simple_model_is_valid() {
        let v = validate(&simple()).unwrap();
        assert_eq!(v.len(), 1);
        assert!(v.warnings().is_empty());
        assert_eq!(v.port_count(), 2);
    }

    #[test]
    fn negative_rate_rejected() {
        let spec = NetworkSpec::uncoupled(vec![0.0], vec![-1.0], vec![1.0]);
        assert!(matches!(
            validate(&spec),
            Err(NetError::NegativeRate { index: 0, .. })
        ));
    }

    #[test]
    fn asymmetric_coupling_rejected() {
        let mut spec = NetworkSpec::uncoupled(vec![0.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0]);
        spec.coupling = vec![vec![0.0, 1.0], vec![2.0, 0.0]];
        assert!(matches!(
            validate(&spec),
            Err(NetError::AsymmetricCoupling { i: 0, j: 1, .. })
        ));
    }

    #[test]
    fn self_coupling_rejected() {
        let mut spec = simple();
        spec.coupling[0][0] = 0.1;
        assert!(matches!(validate(&spec), Err(NetError::NonzeroSelfCoupling { index: 0, .. })));
    }

    #[test]
    fn missing_ports_rejected() {
        let spec = NetworkSpec::uncoupled(vec![0.0], vec![0.0], vec![1.0]);
        assert_eq!(validate(&spec), Err(NetError::NoPort(Port::Input)));
        let spec = NetworkSpec::uncoupled(vec![0.0], vec![1.0], vec![0.0]);
        assert_eq!(validate(&spec), Err(NetError::NoPort(Port::Output)));
    }

    #[test]
    fn length_mismatch_rejected() {
        let spec = NetworkSpec::uncoupled(vec![0.0, 1.0], vec![1.0], vec![1.0, 1.0]);
        assert!(matches!(validate(&spec), Err(NetError::LengthMismatch { .. })));
        let spec = simple().with_side_channel(vec![0.1, 0.1]);
        assert!(matches!(validate(&spec), Err(NetError::LengthMismatch { .. })));
        assert!(matches!(
            build_parallel(&[0.0, 1.0], &[1.0], &[1.0, 1.0]),
            Err(NetError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn validate_is_idempotent() {
        let spec = build_series(&[0.0, 0.3, -0.2], 1.0, 2.0, &[0.5, 0.7]).unwrap();
        let once = validate(&spec).unwrap();
        let twice = validate(once.spec()).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn degenerate_parallel_states_warn() {
        let spec = build_parallel(&[1.0, 1.0, 2.0], &[1.0; 3], &[1.0; 3]).unwrap();
        let v = validate(&spec).unwrap();
        assert_eq!(v.warnings(), &[Warning::DegenerateResonance { i: 0, j: 1, omega: 1.0 }]);
    }

    #[test]
    fn degenerate_chain_does_not_warn() {
        let chain = build_series(&[0.0; 5], 1.0, 1.0, &[0.5; 4]).unwrap();
        assert!(validate(&chain).unwrap().warnings().is_empty());
        // Two states hanging off the same neighbour do.
        let mut spec = NetworkSpec::uncoupled(vec![0.0, 0.3, 0.3], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 1.0]);
        spec.set_coupling(0, 1, 0.5);
        spec.set_coupling(0, 2, 0.5);
        assert_eq!(validate(&spec).unwrap().warnings().len(), 1);
    }

    #[test]
    fn parallel_builder_has_zero_coupling() {
        let spec = build_parallel(&[0.0, 10.0], &[1.0, 1.0], &[1.0, 1.0]).unwrap();
        assert!(spec.is_uncoupled());
        let single = build_parallel(&[0.0], &[1.0], &[1.0]).unwrap();
        assert_eq!(single, simple());
    }

    #[test]
    fn series_builder_is_tridiagonal() {
        let spec = build_series(&[0.0; 3], 1.0, 1.0, &[0.4, 0.6]).unwrap();
        let nonzero = spec.coupling.iter().flatten().filter(|&&g| g != 0.0).count();
        assert_eq!(nonzero, 4);
        assert_eq!(spec.input_decays, vec![1.0, 0.0, 0.0]);
        assert_eq!(spec.output_decays, vec![0.0, 0.0, 1.0]);
        assert_eq!(build_series(&[0.0], 1.0, 1.0, &[]).unwrap(), simple());
        assert!(matches!(
            build_series(&[0.0; 3], 1.0, 1.0, &[0.4]),
            Err(NetError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn hybrid_reductions() {
        let w = vec![-2.0, -1.0, 0.0, 1.5, 3.0];
        let single = HybridSpec::homogeneous(vec![w.clone()], 1.0, 2.0, &[]);
        assert_eq!(
            lower_hybrid(&single).unwrap(),
            build_parallel(&w, &[1.0; 5], &[2.0; 5]).unwrap()
        );

        let chain = HybridSpec::homogeneous(vec![vec![0.1], vec![-0.3], vec![0.2]], 1.0, 2.0, &[0.5, 0.8]);
        assert_eq!(
            lower_hybrid(&chain).unwrap(),
            build_series(&[0.1, -0.3, 0.2], 1.0, 2.0, &[0.5, 0.8]).unwrap()
        );
    }

    #[test]
    fn hybrid_lowering_connects_adjacent_manifolds_only() {
        let w = vec![-2.5, 0.0, 2.5];
        let h = HybridSpec::homogeneous(vec![w.clone(), w.clone(), w], 1.0, 1.0, &[0.5, 0.5]);
        let spec = lower_hybrid(&h).unwrap();
        assert_eq!(spec.len(), 9);
        for i in 0..9 {
            for j in 0..9 {
                let adjacent = (i / 3usize).abs_diff(j / 3) == 1;
                assert_eq!(spec.coupling[i][j] != 0.0, adjacent, "({i},{j})");
            }
        }
        assert_eq!(&spec.input_decays[..3], &[1.0; 3]);
        assert!(spec.input_decays[3..].iter().all(|&r| r == 0.0));
        assert!(spec.output_decays[..6].iter().all(|&r| r == 0.0));
    }

    #[test]
    fn critical_unbalanced_builder_checks_profile() {
        let h = HybridSpec::critical_unbalanced(
            vec![vec![0.0, 1.0], vec![0.5]],
            vec![vec![1.0, 2.0], vec![0.5]],
            vec![2.0, 3.0],
        )
        .unwrap();
        assert_eq!(h.output_decays, vec![1.5]);
        assert!((h.couplings[0].rate(1, 0) - (2.0f64 * 2.0 * 0.5).sqrt() / 2.0).abs() < 1e-15);

        let mut broken = h.clone();
        broken.output_decays = vec![1.0];
        assert!(matches!(broken.validate(), Err(NetError::InvalidHybrid(_))));
    }

    #[test]
    fn grid_invariants() {
        assert!(SweepGrid::new(vec![]).is_err());
        assert!(SweepGrid::new(vec![0.0, 0.0]).is_err());
        assert!(SweepGrid::new(vec![0.0, f64::NAN]).is_err());
        assert!(SweepGrid::linspace(1.0, 1.0, 10).is_err());
        let g = SweepGrid::linspace(-1.0, 1.0, 5).unwrap();
        assert_eq!(g.as_slice(), &[-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert!(g.is_uniform(1e-12));
        assert_eq!(g.detuning(4, 0.25), 0.75);
        let merged = SweepGrid::from_unsorted(vec![1.0, 0.0, 0.5, 0.5 + 1e-15], 1e-12).unwrap();
        assert_eq!(merged.as_slice(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn rate_unit_scales_everything() {
        let spec = build_series(&[1.0, 2.0], 1.0, 2.0, &[0.5]).unwrap().scaled(2.0);
        assert_eq!(spec.resonances, vec![2.0, 4.0]);
        assert_eq!(spec.coupling[0][1], 1.0);
        assert_eq!(spec.output_decays, vec![0.0, 4.0]);
    }
}
