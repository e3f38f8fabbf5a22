//! Classical-shadow estimation from randomized single-qubit Pauli measurements.
//!
//! Shot data are stored per measurement setting as outcome weights (counts for
//! sampled data, probabilities for exact enumeration). Outcome keys put the bit
//! of qubit `i` at position `i`; bit value 0 is eigenvalue +1.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{ObservableSum, Pauli, PauliString};

/// How settings are assigned to shots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleMode {
    /// Each shot draws its bases independently per qubit.
    RandomPerShot,
    /// A fixed list of settings, each run for a set number of shots.
    FixedGrid,
}

impl FromStr for EnsembleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random-per-shot" => Ok(EnsembleMode::RandomPerShot),
            "fixed-grid" => Ok(EnsembleMode::FixedGrid),
            other => Err(Error::InvalidArgument(format!("unknown ensemble mode {other:?}"))),
        }
    }
}

/// Per-qubit measurement basis distribution, identical on every qubit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementEnsemble {
    pub bases: Vec<(Pauli, f64)>,
    pub mode: EnsembleMode,
}

impl MeasurementEnsemble {
    pub fn new(bases: Vec<(Pauli, f64)>, mode: EnsembleMode) -> Result<Self> {
        if bases.is_empty() {
            return Err(Error::InvalidArgument("ensemble has no bases".into()));
        }
        let mut seen = Vec::new();
        for &(b, w) in &bases {
            if b == Pauli::I {
                return Err(Error::InvalidArgument("identity is not a measurement basis".into()));
            }
            if seen.contains(&b) {
                return Err(Error::InvalidArgument(format!("basis {} repeated", b.as_char())));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidArgument(format!("basis weight {w} is not positive")));
            }
            seen.push(b);
        }
        let total: f64 = bases.iter().map(|b| b.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("basis weights sum to {total}, not 1")));
        }
        Ok(MeasurementEnsemble { bases, mode })
    }

    pub fn uniform_xyz(mode: EnsembleMode) -> Self {
        let w = 1.0 / 3.0;
        MeasurementEnsemble {
            bases: vec![(Pauli::X, w), (Pauli::Y, w), (Pauli::Z, w)],
            mode,
        }
    }

    pub fn uniform_xz(mode: EnsembleMode) -> Self {
        MeasurementEnsemble {
            bases: vec![(Pauli::X, 0.5), (Pauli::Z, 0.5)],
            mode,
        }
    }

    pub fn weight(&self, b: Pauli) -> f64 {
        self.bases.iter().find(|x| x.0 == b).map_or(0.0, |x| x.1)
    }

    pub fn supports(&self, b: Pauli) -> bool {
        b == Pauli::I || self.weight(b) > 0.0
    }

    /// All settings on `n` qubits with their product probabilities.
    pub fn settings(&self, n: usize) -> Vec<(Vec<Pauli>, f64)> {
        let mut out = vec![(Vec::new(), 1.0)];
        for _ in 0..n {
            out = out
                .into_iter()
                .flat_map(|(w, p)| {
                    self.bases.iter().map(move |&(b, q)| {
                        let mut w2 = w.clone();
                        w2.push(b);
                        (w2, p * q)
                    })
                })
                .collect();
        }
        out
    }
}

pub type Mat2 = [[Complex64; 2]; 2];

fn add(a: Mat2, b: Mat2, sb: f64) -> Mat2 {
    let mut o = a;
    for i in 0..2 {
        for j in 0..2 {
            o[i][j] += b[i][j] * sb;
        }
    }
    o
}

fn trace_with(p: Pauli, m: &Mat2) -> Complex64 {
    let pm = p.matrix();
    let mut t = Complex64::new(0.0, 0.0);
    for i in 0..2 {
        for j in 0..2 {
            t += pm[i][j] * m[j][i];
        }
    }
    t
}

/// Inverse of the single-qubit measurement channel of an ensemble, expressed
/// as a scaling of each traceless Pauli component (`None` where the forward
/// channel erases the component).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseChannel {
    pub scale: [Option<f64>; 3],
}

const XYZ: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

impl InverseChannel {
    /// The forward channel keeps the identity and multiplies the `σ_b`
    /// component by the probability of measuring in basis `b`.
    pub fn from_ensemble(e: &MeasurementEnsemble) -> Self {
        let mut scale = [None; 3];
        for (i, b) in XYZ.iter().enumerate() {
            let q = e.weight(*b);
            if q > 0.0 {
                scale[i] = Some(1.0 / q);
            }
        }
        InverseChannel { scale }
    }

    pub fn scale_of(&self, b: Pauli) -> Option<f64> {
        match b {
            Pauli::I => Some(1.0),
            other => self.scale[XYZ.iter().position(|x| *x == other).unwrap()],
        }
    }

    /// Applies the inverse channel to a 2x2 operator.
    pub fn apply(&self, a: &Mat2) -> Result<Mat2> {
        let tr = trace_with(Pauli::I, a);
        let mut out = add_c([[Complex64::new(0.0, 0.0); 2]; 2], Pauli::I.matrix(), tr * 0.5);
        for b in XYZ {
            let c = trace_with(b, a);
            if c.norm() < 1e-15 {
                continue;
            }
            let s = self.scale_of(b).ok_or_else(|| {
                Error::UnsupportedObservable(format!("component {} is not measured by the ensemble", b.as_char()))
            })?;
            out = add_c(out, b.matrix(), c * 0.5 * s);
        }
        Ok(out)
    }

    /// Applies the forward measurement channel (used to check inversion).
    pub fn forward(&self, a: &Mat2) -> Mat2 {
        let tr = trace_with(Pauli::I, a);
        let mut out = add_c([[Complex64::new(0.0, 0.0); 2]; 2], Pauli::I.matrix(), tr * 0.5);
        for b in XYZ {
            if let Some(s) = self.scale_of(b) {
                out = add_c(out, b.matrix(), trace_with(b, a) * 0.5 / s);
            }
        }
        out
    }
}

fn add_c(a: Mat2, b: Mat2, s: Complex64) -> Mat2 {
    let mut o = a;
    for i in 0..2 {
        for j in 0..2 {
            o[i][j] += b[i][j] * s;
        }
    }
    o
}

pub fn inverse_channel(e: &MeasurementEnsemble) -> InverseChannel {
    InverseChannel::from_ensemble(e)
}

/// Eigenprojector of `basis` for outcome bit `bit` (0 is the +1 eigenvalue).
pub fn eigenprojector(basis: Pauli, bit: bool) -> Result<Mat2> {
    if basis == Pauli::I {
        return Err(Error::InvalidArgument("identity is not a measurement basis".into()));
    }
    let s = if bit { -0.5 } else { 0.5 };
    Ok(add(
        add([[Complex64::new(0.0, 0.0); 2]; 2], Pauli::I.matrix(), 0.5),
        basis.matrix(),
        s,
    ))
}

/// Per-shot tensor-product snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotEstimator {
    pub setting: Vec<Pauli>,
    pub outcome: u64,
    pub factors: Vec<Mat2>,
}

impl SnapshotEstimator {
    /// `Tr(P · snapshot)` as a product of per-qubit traces.
    pub fn expectation(&self, p: &PauliString) -> Result<f64> {
        if p.n_qubits() != self.factors.len() {
            return Err(Error::Dimension {
                expected: self.factors.len(),
                found: p.n_qubits(),
            });
        }
        let mut v = Complex64::new(1.0, 0.0);
        for (q, f) in self.factors.iter().enumerate() {
            v *= trace_with(p.letter(q), f);
        }
        Ok(v.re)
    }
}

pub fn make_snapshot(setting: &[Pauli], outcome: u64, ch: &InverseChannel) -> Result<SnapshotEstimator> {
    let mut factors = Vec::with_capacity(setting.len());
    for (q, &b) in setting.iter().enumerate() {
        if ch.scale_of(b).is_none() || b == Pauli::I {
            return Err(Error::UnsupportedObservable(format!(
                "basis {} is outside the ensemble",
                b.as_char()
            )));
        }
        let proj = eigenprojector(b, (outcome >> q) & 1 == 1)?;
        factors.push(ch.apply(&proj)?);
    }
    Ok(SnapshotEstimator {
        setting: setting.to_vec(),
        outcome,
        factors,
    })
}

/// Outcome weights of a single measurement setting.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SettingData {
    pub outcomes: BTreeMap<u64, f64>,
}

impl SettingData {
    pub fn total(&self) -> f64 {
        self.outcomes.values().sum()
    }
}

/// Shot data grouped by setting word (e.g. `"XZ"`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShadowData {
    pub n_qubits: usize,
    pub settings: BTreeMap<String, SettingData>,
}

pub fn setting_word(bases: &[Pauli]) -> String {
    bases.iter().map(|b| b.as_char()).collect()
}

pub fn parse_setting(word: &str) -> Result<Vec<Pauli>> {
    word.chars()
        .map(|c| match Pauli::from_char(c) {
            Some(Pauli::I) | None => Err(Error::InvalidArgument(format!("bad setting letter {c:?} in {word:?}"))),
            Some(p) => Ok(p),
        })
        .collect()
}

impl ShadowData {
    pub fn new(n_qubits: usize) -> Self {
        ShadowData {
            n_qubits,
            settings: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, setting: &str, outcome: u64, weight: f64) {
        *self
            .settings
            .entry(setting.to_string())
            .or_default()
            .outcomes
            .entry(outcome)
            .or_insert(0.0) += weight;
    }

    pub fn total(&self) -> f64 {
        self.settings.values().map(|s| s.total()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() <= 0.0
    }

    fn check(&self, p: &PauliString) -> Result<()> {
        if p.n_qubits() != self.n_qubits {
            return Err(Error::Dimension {
                expected: self.n_qubits,
                found: p.n_qubits(),
            });
        }
        if p.phase_exponent() != 0 {
            return Err(Error::InvalidArgument(format!("{p} carries a phase")));
        }
        Ok(())
    }
}

/// A value with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

fn eigen_sign(outcome: u64, q: usize) -> f64 {
    if (outcome >> q) & 1 == 1 {
        -1.0
    } else {
        1.0
    }
}

/// Snapshot value `Tr(P ρ̂)` for one (setting, outcome) without building
/// matrices.
fn snapshot_value(p: &PauliString, setting: &[Pauli], outcome: u64, ch: &InverseChannel) -> f64 {
    let mut v = 1.0;
    for (q, &b) in setting.iter().enumerate() {
        let l = p.letter(q);
        if l == Pauli::I {
            continue;
        }
        if l != b {
            return 0.0;
        }
        v *= eigen_sign(outcome, q) * ch.scale_of(b).unwrap_or(0.0);
    }
    v
}

fn check_supported(p: &PauliString, e: &MeasurementEnsemble) -> Result<()> {
    for l in p.letters() {
        if !e.supports(l) {
            return Err(Error::UnsupportedObservable(format!(
                "{p}: letter {} is not measured by the ensemble",
                l.as_char()
            )));
        }
    }
    Ok(())
}

fn weighted_mean_se(values: impl Iterator<Item = (f64, f64)> + Clone) -> (f64, f64, f64) {
    let n: f64 = values.clone().map(|(_, w)| w).sum();
    if n <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let mean = values.clone().map(|(v, w)| v * w).sum::<f64>() / n;
    let ss: f64 = values.map(|(v, w)| w * (v - mean).powi(2)).sum();
    let var = if n > 1.0 { ss / (n - 1.0) } else { 0.0 };
    (mean, var, n)
}

/// Shadow estimate of `⟨P⟩` as the mean of per-snapshot values, with the
/// sample standard deviation over `√N` as standard error.
pub fn estimate_pauli(data: &ShadowData, p: &PauliString, e: &MeasurementEnsemble) -> Result<Estimate> {
    data.check(p)?;
    check_supported(p, e)?;
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    let ch = inverse_channel(e);
    let mut vals = Vec::new();
    for (word, sd) in &data.settings {
        let setting = parse_setting(word)?;
        for (&o, &w) in &sd.outcomes {
            vals.push((snapshot_value(p, &setting, o, &ch), w));
        }
    }
    let (mean, var, n) = weighted_mean_se(vals.iter().copied());
    Ok(Estimate {
        value: mean,
        std_error: (var / n).sqrt(),
    })
}

/// Median of `k` group means of per-shot snapshot values in acquisition order.
pub fn estimate_pauli_median_of_means(
    shots: &[(Vec<Pauli>, u64)],
    p: &PauliString,
    e: &MeasurementEnsemble,
    k: usize,
) -> Result<f64> {
    check_supported(p, e)?;
    if shots.is_empty() {
        return Err(Error::EmptyData);
    }
    if k == 0 || k > shots.len() {
        return Err(Error::InvalidArgument(format!("{k} groups for {} shots", shots.len())));
    }
    let ch = inverse_channel(e);
    let size = shots.len() / k;
    let mut means: Vec<f64> = (0..k)
        .map(|g| {
            let chunk = &shots[g * size..if g + 1 == k { shots.len() } else { (g + 1) * size }];
            chunk.iter().map(|(s, o)| snapshot_value(p, s, *o, &ch)).sum::<f64>() / chunk.len() as f64
        })
        .collect();
    means.sort_by(f64::total_cmp);
    Ok(if k % 2 == 1 {
        means[k / 2]
    } else {
        0.5 * (means[k / 2 - 1] + means[k / 2])
    })
}

/// Settings that measure every non-identity letter of `p` directly.
pub fn compatible_settings<'a>(data: &'a ShadowData, p: &PauliString) -> Vec<&'a str> {
    data.settings
        .keys()
        .filter(|w| {
            w.chars()
                .zip(p.letters())
                .all(|(c, l)| l == Pauli::I || Pauli::from_char(c) == Some(l))
        })
        .map(|w| w.as_str())
        .collect()
}

/// Pooled mean of the eigenvalue product of `p` over all compatible settings.
pub fn estimate_pauli_pooled(data: &ShadowData, p: &PauliString) -> Result<Option<(Estimate, Vec<String>, f64)>> {
    data.check(p)?;
    let compat = compatible_settings(data, p);
    let mut vals = Vec::new();
    for w in &compat {
        for (&o, &wt) in &data.settings[*w].outcomes {
            let v: f64 = (0..data.n_qubits)
                .filter(|&q| p.letter(q) != Pauli::I)
                .map(|q| eigen_sign(o, q))
                .product();
            vals.push((v, wt));
        }
    }
    let (mean, var, n) = weighted_mean_se(vals.iter().copied());
    if n <= 0.0 {
        return Ok(None);
    }
    Ok(Some((
        Estimate {
            value: mean,
            std_error: (var / n).sqrt(),
        },
        compat.iter().map(|s| s.to_string()).collect(),
        n,
    )))
}

/// Estimate of one Hamiltonian term with its data provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermEstimate {
    pub pauli: PauliString,
    pub coefficient: f64,
    pub value: f64,
    pub std_error: f64,
    pub settings: Vec<String>,
    pub shots: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyEstimate {
    pub energy: f64,
    pub std_error: f64,
    pub terms: Vec<TermEstimate>,
    /// Terms with no compatible data; they contribute zero.
    pub terms_without_data: Vec<PauliString>,
}

/// Energy `Σ c_P ⟨P⟩` from shot data under the ensemble's mode.
///
/// Fixed grid: each term is the pooled mean over compatible settings and the
/// standard error accounts for shots shared between terms. Random per shot:
/// each term is the snapshot mean and the standard error comes from the
/// per-snapshot energy values.
pub fn estimate_energy(data: &ShadowData, h: &ObservableSum, e: &MeasurementEnsemble) -> Result<EnergyEstimate> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    for (p, _) in h.terms() {
        data.check(p)?;
        check_supported(p, e)?;
    }
    match e.mode {
        EnsembleMode::FixedGrid => energy_pooled(data, h),
        EnsembleMode::RandomPerShot => energy_snapshots(data, h, e),
    }
}

fn energy_pooled(data: &ShadowData, h: &ObservableSum) -> Result<EnergyEstimate> {
    let mut energy = 0.0;
    let mut terms = Vec::new();
    let mut missing = Vec::new();
    for (p, c) in h.terms() {
        if p.is_identity() {
            energy += c;
            terms.push(TermEstimate {
                pauli: *p,
                coefficient: c,
                value: 1.0,
                std_error: 0.0,
                settings: vec![],
                shots: data.total(),
            });
            continue;
        }
        match estimate_pauli_pooled(data, p)? {
            Some((est, settings, n)) => {
                energy += c * est.value;
                terms.push(TermEstimate {
                    pauli: *p,
                    coefficient: c,
                    value: est.value,
                    std_error: est.std_error,
                    settings,
                    shots: n,
                });
            }
            None => missing.push(*p),
        }
    }
    // Each shot of setting s contributes f_s = Σ_P c_P v_P / N_P over the terms
    // it feeds; settings are independent.
    let mut variance = 0.0;
    for (word, sd) in &data.settings {
        let feeds: Vec<&TermEstimate> = terms
            .iter()
            .filter(|t| !t.pauli.is_identity() && t.settings.iter().any(|s| s == word))
            .collect();
        if feeds.is_empty() {
            continue;
        }
        let vals = sd.outcomes.iter().map(|(&o, &w)| {
            let f: f64 = feeds
                .iter()
                .map(|t| {
                    let v: f64 = (0..data.n_qubits)
                        .filter(|&q| t.pauli.letter(q) != Pauli::I)
                        .map(|q| eigen_sign(o, q))
                        .product();
                    t.coefficient * v / t.shots
                })
                .sum();
            (f, w)
        });
        let (_, var, n) = weighted_mean_se(vals);
        variance += n * var;
    }
    Ok(EnergyEstimate {
        energy,
        std_error: variance.sqrt(),
        terms,
        terms_without_data: missing,
    })
}

fn energy_snapshots(data: &ShadowData, h: &ObservableSum, e: &MeasurementEnsemble) -> Result<EnergyEstimate> {
    let ch = inverse_channel(e);
    let mut per_snapshot = Vec::new();
    for (word, sd) in &data.settings {
        let setting = parse_setting(word)?;
        for (&o, &w) in &sd.outcomes {
            let v: f64 = h.terms().map(|(p, c)| c * snapshot_value(p, &setting, o, &ch)).sum();
            per_snapshot.push((v, w));
        }
    }
    let (energy, var, n) = weighted_mean_se(per_snapshot.iter().copied());
    let mut terms = Vec::new();
    for (p, c) in h.terms() {
        let est = estimate_pauli(data, p, e)?;
        terms.push(TermEstimate {
            pauli: *p,
            coefficient: c,
            value: est.value,
            std_error: est.std_error,
            settings: data.settings.keys().cloned().collect(),
            shots: n,
        });
    }
    Ok(EnergyEstimate {
        energy,
        std_error: (var / n).sqrt(),
        terms,
        terms_without_data: vec![],
    })
}

impl fmt::Display for Estimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ± {}", self.value, self.std_error)
    }
}
