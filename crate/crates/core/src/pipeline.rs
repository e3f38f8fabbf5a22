//! Configuration-driven experiment: solve, simulate, decode, estimate,
//! bootstrap, and write result files.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bootstrap::{
    bootstrap_summary, prob_better, shot_sweep, sig12, sweep_csv, BootstrapConfig, BootstrapSummary, SweepPoint,
    SweepRecord,
};
use crate::c4::{build_encoded_circuit, build_unencoded_circuit_word, decode_shot, LogicalSetting, RejectionReason};
use crate::chem_io::parse_pauli_hamiltonian;
use crate::eigen::{ground_state, prepare_state, solve_prep_angles, PrepAngles};
use crate::error::{Error, Result};
use crate::pauli::{ObservableSum, Pauli, PauliString};
use crate::shadow::{
    estimate_energy, estimate_pauli, estimate_pauli_pooled, parse_setting, setting_word, EnsembleMode, Estimate,
    MeasurementEnsemble, ShadowData,
};
use crate::sim::{run_shots, NoiseModel, ShotRecord};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const CHEMICAL_ACCURACY_HA: f64 = 1.6e-3;
pub const EXPECTATION_TERMS: [&str; 8] = ["IX", "XI", "IZ", "ZI", "XX", "XZ", "ZX", "ZZ"];
pub const STORE_CSV_HEADER: &str = "index,setting,outcome,accepted,reason";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Unencoded,
    Encoded,
    Both,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Unencoded => "unencoded",
            Variant::Encoded => "encoded",
            Variant::Both => "both",
        }
    }

    /// Circuit variants to run, unencoded first.
    pub fn expand(&self) -> Vec<Variant> {
        match self {
            Variant::Both => vec![Variant::Unencoded, Variant::Encoded],
            v => vec![*v],
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unencoded" => Ok(Variant::Unencoded),
            "encoded" => Ok(Variant::Encoded),
            "both" => Ok(Variant::Both),
            other => Err(Error::Config(format!("unknown variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleKind {
    #[default]
    Xz,
    Xyz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeKind {
    #[default]
    FixedGrid,
    RandomPerShot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianConfig {
    pub path: PathBuf,
    #[serde(default = "default_format")]
    pub format: String,
}

fn default_format() -> String {
    "pauli".into()
}

/// `"solve"` or an explicit `[alpha, beta, gamma]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AngleSpec {
    Keyword(String),
    Explicit([f64; 3]),
}

impl Default for AngleSpec {
    fn default() -> Self {
        AngleSpec::Keyword("solve".into())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateConfig {
    #[serde(default)]
    pub angles: AngleSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub variant: Variant,
    /// Shots per setting on a fixed grid; total shots in random-per-shot mode.
    pub shots: u64,
    #[serde(default = "all_settings")]
    pub settings: Vec<LogicalSetting>,
    #[serde(default)]
    pub ensemble: EnsembleKind,
    #[serde(default)]
    pub mode: ModeKind,
    #[serde(default)]
    pub seed: u64,
}

fn all_settings() -> Vec<LogicalSetting> {
    LogicalSetting::ALL.to_vec()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub preset: Option<String>,
    pub p1: Option<f64>,
    pub p2: Option<f64>,
    pub pm: Option<f64>,
    pub p_prep: Option<f64>,
}

impl NoiseConfig {
    /// Preset (noiseless when absent) with explicit fields overriding it.
    pub fn model(&self) -> Result<NoiseModel> {
        let mut m = match &self.preset {
            Some(p) => NoiseModel::preset(p).map_err(|e| Error::Config(e.to_string()))?,
            None => NoiseModel::NONE,
        };
        if let Some(p) = self.p1 {
            m.p1 = p;
        }
        if let Some(p) = self.p2 {
            m.p2 = p;
        }
        if let Some(p) = self.pm {
            m.pm = p;
        }
        if let Some(p) = self.p_prep {
            m.p_prep = p;
        }
        m.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapSection {
    #[serde(default = "default_resamples")]
    pub resamples: usize,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "default_increment")]
    pub sweep_increment: usize,
    /// Compare variants on equal accepted-shot counts per setting.
    #[serde(default = "default_true")]
    pub matched_compare: bool,
}

fn default_resamples() -> usize {
    5000
}
fn default_level() -> f64 {
    0.95
}
fn default_increment() -> usize {
    20_000
}
fn default_true() -> bool {
    true
}

impl Default for BootstrapSection {
    fn default() -> Self {
        BootstrapSection {
            resamples: default_resamples(),
            level: default_level(),
            sweep_increment: default_increment(),
            matched_compare: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
    #[serde(default = "default_true")]
    pub sweep: bool,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_out(),
            sweep: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub hamiltonian: HamiltonianConfig,
    #[serde(default)]
    pub state: StateConfig,
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub bootstrap: BootstrapSection,
    #[serde(default)]
    pub output: OutputConfig,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml_str(&text, base)
    }

    pub fn hamiltonian_path(&self) -> PathBuf {
        self.base_dir.join(&self.hamiltonian.path)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.hamiltonian.format != "pauli" {
            return bad(format!("unsupported hamiltonian format {:?}", self.hamiltonian.format));
        }
        if !self.hamiltonian_path().is_file() {
            return bad(format!(
                "hamiltonian file {} not found",
                self.hamiltonian_path().display()
            ));
        }
        if let AngleSpec::Keyword(k) = &self.state.angles {
            if k != "solve" {
                return bad(format!("angles must be \"solve\" or three numbers, got {k:?}"));
            }
        }
        if self.experiment.shots == 0 {
            return bad("shots must be at least 1".into());
        }
        if self.experiment.settings.is_empty() {
            return bad("settings list is empty".into());
        }
        if self.experiment.ensemble == EnsembleKind::Xyz {
            if self.experiment.mode == ModeKind::FixedGrid {
                return bad("the fixed grid uses the X/Z ensemble".into());
            }
            if self.experiment.variant != Variant::Unencoded {
                return bad("the encoded circuit measures only X and Z logical bases".into());
            }
        }
        self.noise.model()?;
        BootstrapConfig {
            resamples: self.bootstrap.resamples,
            level: self.bootstrap.level,
            seed: 0,
        }
        .validate()
        .map_err(|e| Error::Config(e.to_string()))?;
        if self.bootstrap.sweep_increment == 0 {
            return bad("sweep_increment must be positive".into());
        }
        Ok(())
    }

    pub fn ensemble(&self) -> MeasurementEnsemble {
        let mode = match self.experiment.mode {
            ModeKind::FixedGrid => EnsembleMode::FixedGrid,
            ModeKind::RandomPerShot => EnsembleMode::RandomPerShot,
        };
        match self.experiment.ensemble {
            EnsembleKind::Xz => MeasurementEnsemble::uniform_xz(mode),
            EnsembleKind::Xyz => MeasurementEnsemble::uniform_xyz(mode),
        }
    }

    /// SHA-256 over the effective config (output location excluded) and the
    /// Hamiltonian file contents.
    pub fn hash(&self) -> Result<String> {
        let mut canon = self.clone();
        canon.output.dir = PathBuf::new();
        let text = toml::to_string(&canon).map_err(|e| Error::Config(e.to_string()))?;
        let path = self.hamiltonian_path();
        let ham = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let mut h = Sha256::new();
        h.update(text.as_bytes());
        h.update([0u8]);
        h.update(&ham);
        Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
    }
}

/// Per-purpose seed derived from the run seed.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(tag.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Config,
    Solve,
    Simulate,
    Estimate,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Solve => "solve",
            Stage::Simulate => "simulate",
            Stage::Estimate => "estimate",
            Stage::Output => "output",
        })
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed (config {config_hash}): {source}")]
pub struct PipelineError {
    pub stage: Stage,
    pub config_hash: String,
    #[source]
    pub source: Error,
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self.stage {
            Stage::Config => 2,
            Stage::Solve | Stage::Simulate => 3,
            Stage::Estimate => 4,
            Stage::Output => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub exact_energy: f64,
    pub amplitudes: Vec<f64>,
    pub spectral_gap: f64,
    pub degeneracy_flag: bool,
    pub angles: [f64; 3],
    pub fidelity: f64,
}

pub fn load_hamiltonian(cfg: &ExperimentConfig) -> Result<ObservableSum> {
    let path = cfg.hamiltonian_path();
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let h = parse_pauli_hamiltonian(&text)?;
    if h.n_qubits() != 2 {
        return Err(Error::Config(format!(
            "the two-qubit ansatz needs a 2-qubit Hamiltonian, got {}",
            h.n_qubits()
        )));
    }
    Ok(h)
}

pub fn solve(h: &ObservableSum) -> Result<SolveReport> {
    let g = ground_state(h)?;
    let angles = solve_prep_angles(&g.state)?;
    let fidelity = prepare_state(&angles).fidelity(&g.state)?;
    Ok(SolveReport {
        exact_energy: g.energy,
        amplitudes: g.state.amplitudes().iter().map(|a| a.re).collect(),
        spectral_gap: g.spectral_gap,
        degeneracy_flag: g.degeneracy_flag,
        angles: angles.as_array(),
        fidelity,
    })
}

/// One row of a snapshot store.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreRecord {
    pub index: u64,
    pub setting: String,
    /// Outcome key with qubit `i` at bit `i`; absent for rejected shots.
    pub outcome: Option<u64>,
    pub reason: RejectionReason,
}

impl StoreRecord {
    pub fn accepted(&self) -> bool {
        self.reason == RejectionReason::None
    }
}

fn outcome_string(key: u64, n: usize) -> String {
    (0..n).map(|q| if (key >> q) & 1 == 1 { '1' } else { '0' }).collect()
}

pub fn store_to_csv(records: &[StoreRecord]) -> String {
    let mut out = String::from(STORE_CSV_HEADER);
    out.push('\n');
    for r in records {
        let outcome = r
            .outcome
            .map(|k| outcome_string(k, r.setting.len()))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.index,
            r.setting,
            outcome,
            r.accepted() as u8,
            r.reason
        ));
    }
    out
}

pub fn store_from_csv(text: &str) -> Result<Vec<StoreRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == STORE_CSV_HEADER => {}
        _ => return Err(Error::parse(1, format!("expected header {STORE_CSV_HEADER:?}"))),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(Error::parse(line_no, format!("expected 5 fields, found {}", f.len())));
        }
        let index = f[0]
            .parse()
            .map_err(|_| Error::parse(line_no, format!("bad index {:?}", f[0])))?;
        parse_setting(f[1]).map_err(|e| Error::parse(line_no, e.to_string()))?;
        let reason: RejectionReason = f[4].parse().map_err(|e: Error| Error::parse(line_no, e.to_string()))?;
        let accepted = match f[3] {
            "1" => true,
            "0" => false,
            other => return Err(Error::parse(line_no, format!("bad accepted flag {other:?}"))),
        };
        if accepted != (reason == RejectionReason::None) {
            return Err(Error::parse(line_no, "accepted flag contradicts reason"));
        }
        let outcome = if accepted {
            if f[2].len() != f[1].len() {
                return Err(Error::parse(line_no, "outcome length does not match setting"));
            }
            let mut key = 0u64;
            for (q, c) in f[2].chars().enumerate() {
                match c {
                    '0' => {}
                    '1' => key |= 1 << q,
                    _ => return Err(Error::parse(line_no, format!("bad outcome {:?}", f[2]))),
                }
            }
            Some(key)
        } else {
            None
        };
        out.push(StoreRecord {
            index,
            setting: f[1].to_string(),
            outcome,
            reason,
        });
    }
    Ok(out)
}

pub fn read_store(path: impl AsRef<Path>) -> Result<Vec<StoreRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    store_from_csv(&text)
}

/// Accepted shots of a store as shadow data.
pub fn store_data(records: &[StoreRecord], n_qubits: usize) -> ShadowData {
    let mut d = ShadowData::new(n_qubits);
    for r in records {
        if let Some(o) = r.outcome {
            d.add(&r.setting, o, 1.0);
        }
    }
    d
}

fn sweep_records(records: &[StoreRecord]) -> Vec<SweepRecord> {
    records
        .iter()
        .map(|r| SweepRecord {
            setting: r.setting.clone(),
            outcome: r.outcome.unwrap_or(0),
            accepted: r.accepted(),
        })
        .collect()
}

pub fn resolve_angles(cfg: &ExperimentConfig, h: &ObservableSum) -> Result<PrepAngles> {
    match &cfg.state.angles {
        AngleSpec::Explicit([a, b, g]) => Ok(PrepAngles::new(*a, *b, *g)),
        AngleSpec::Keyword(_) => Ok(solve_prep_angles(&ground_state(h)?.state)?),
    }
}

fn run_setting(
    variant: Variant,
    bases: &[Pauli],
    angles: &PrepAngles,
    noise: &NoiseModel,
    seed: u64,
    shots: u64,
) -> Result<Vec<(Option<u64>, RejectionReason)>> {
    let word = setting_word(bases);
    let pair: [Pauli; 2] = bases
        .try_into()
        .map_err(|_| Error::InvalidArgument(format!("setting {word} is not two-qubit")))?;
    let tag_seed = derive_seed(seed, &format!("shots/{}/{word}", variant.as_str()));
    match variant {
        Variant::Unencoded => {
            let c = build_unencoded_circuit_word(angles, pair)?;
            Ok(run_shots(&c, noise, tag_seed, shots)?
                .iter()
                .map(|s: &ShotRecord| (Some(s.bits & 0b11), RejectionReason::None))
                .collect())
        }
        Variant::Encoded => {
            let setting = LogicalSetting::from_bases(pair)
                .ok_or_else(|| Error::InvalidArgument(format!("encoded setting {word} must use X/Z")))?;
            let (c, meta) = build_encoded_circuit(angles, setting);
            run_shots(&c, noise, tag_seed, shots)?
                .iter()
                .map(|s| decode_shot(s, &meta).map(|d| (d.logical_key(), d.reason)))
                .collect()
        }
        Variant::Both => Err(Error::InvalidArgument("run one circuit variant at a time".into())),
    }
}

/// Simulates one circuit variant and returns its store in acquisition order.
///
/// Fixed-grid settings are interleaved shot by shot; random-per-shot
/// settings are drawn up front and each setting group is run separately.
pub fn simulate(cfg: &ExperimentConfig, variant: Variant, angles: &PrepAngles) -> Result<Vec<StoreRecord>> {
    let noise = cfg.noise.model()?;
    let seed = cfg.experiment.seed;
    let shots = cfg.experiment.shots;
    let mut words: Vec<String> = Vec::new();
    let mut schedule: Vec<usize> = Vec::new();
    match cfg.experiment.mode {
        ModeKind::FixedGrid => {
            words = cfg.experiment.settings.iter().map(|s| s.as_str().to_string()).collect();
            for _ in 0..shots {
                schedule.extend(0..words.len());
            }
        }
        ModeKind::RandomPerShot => {
            let e = cfg.ensemble();
            let dist = WeightedIndex::new(e.bases.iter().map(|b| b.1)).map_err(|e| Error::Config(e.to_string()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("draw/{}", variant.as_str())));
            for _ in 0..shots {
                let w: String = (0..2).map(|_| e.bases[dist.sample(&mut rng)].0.as_char()).collect();
                let idx = match words.iter().position(|x| *x == w) {
                    Some(i) => i,
                    None => {
                        words.push(w);
                        words.len() - 1
                    }
                };
                schedule.push(idx);
            }
        }
    }
    let mut groups = Vec::with_capacity(words.len());
    for (j, w) in words.iter().enumerate() {
        let n = schedule.iter().filter(|&&s| s == j).count() as u64;
        groups.push(run_setting(variant, &parse_setting(w)?, angles, &noise, seed, n)?.into_iter());
    }
    let mut out = Vec::with_capacity(schedule.len());
    for (i, &j) in schedule.iter().enumerate() {
        let (outcome, reason) = groups[j].next().expect("group sized from schedule");
        out.push(StoreRecord {
            index: i as u64,
            setting: words[j].clone(),
            outcome,
            reason,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapStats {
    pub resamples: usize,
    pub level: f64,
    pub mean: f64,
    pub median: f64,
    pub ci: [f64; 2],
    pub iqr: [f64; 2],
}

impl From<&BootstrapSummary> for BootstrapStats {
    fn from(s: &BootstrapSummary) -> Self {
        BootstrapStats {
            resamples: s.resamples,
            level: s.level,
            mean: s.mean,
            median: s.median,
            ci: [s.ci.0, s.ci.1],
            iqr: [s.iqr.0, s.iqr.1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub variant: Variant,
    pub energy: f64,
    pub std_error: f64,
    pub energy_mha: f64,
    pub exact_energy: f64,
    pub error_mha: f64,
    pub chemical_accuracy: bool,
    pub bootstrap: BootstrapStats,
    pub accepted: u64,
    pub total: u64,
    pub acceptance_rate: f64,
    pub rejections: BTreeMap<String, u64>,
    /// The eight two-qubit expectations; `None` when no shot measures a term.
    pub expectations: BTreeMap<String, Option<Estimate>>,
    pub terms_without_data: Vec<String>,
    pub provenance: Provenance,
}

pub fn rejection_tallies(records: &[StoreRecord]) -> BTreeMap<String, u64> {
    let mut t: BTreeMap<String, u64> = RejectionReason::REJECTIONS
        .iter()
        .map(|r| (r.as_str().to_string(), 0))
        .collect();
    for r in records.iter().filter(|r| !r.accepted()) {
        *t.entry(r.reason.as_str().to_string()).or_insert(0) += 1;
    }
    t
}

fn expectations(data: &ShadowData, e: &MeasurementEnsemble) -> Result<BTreeMap<String, Option<Estimate>>> {
    let mut out = BTreeMap::new();
    for w in EXPECTATION_TERMS {
        let p: PauliString = w.parse()?;
        let est = match e.mode {
            EnsembleMode::FixedGrid => estimate_pauli_pooled(data, &p)?.map(|x| x.0),
            EnsembleMode::RandomPerShot => Some(estimate_pauli(data, &p, e)?),
        };
        out.insert(w.to_string(), est);
    }
    Ok(out)
}

/// Energy estimator used for point estimates and every resample.
pub fn energy_estimator<'a>(
    h: &'a ObservableSum,
    e: &'a MeasurementEnsemble,
) -> impl Fn(&ShadowData) -> Result<f64> + Sync + 'a {
    move |d| Ok(estimate_energy(d, h, e)?.energy)
}

/// Estimates energy, expectations and bootstrap statistics from a store.
pub fn estimate_store(
    cfg: &ExperimentConfig,
    variant: Variant,
    records: &[StoreRecord],
    h: &ObservableSum,
    exact_energy: f64,
    provenance: &Provenance,
) -> Result<(ResultRecord, BootstrapSummary)> {
    let e = cfg.ensemble();
    let data = store_data(records, 2);
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    let est = estimate_energy(&data, h, &e)?;
    let boot = BootstrapConfig {
        resamples: cfg.bootstrap.resamples,
        level: cfg.bootstrap.level,
        seed: derive_seed(cfg.experiment.seed, &format!("bootstrap/{}", variant.as_str())),
    };
    let summary = bootstrap_summary(&data, energy_estimator(h, &e), &boot)?;
    let accepted = records.iter().filter(|r| r.accepted()).count() as u64;
    let total = records.len() as u64;
    let error_mha = (est.energy - exact_energy) * 1e3;
    let record = ResultRecord {
        variant,
        energy: est.energy,
        std_error: est.std_error,
        energy_mha: est.energy * 1e3,
        exact_energy,
        error_mha,
        chemical_accuracy: (est.energy - exact_energy).abs() <= CHEMICAL_ACCURACY_HA,
        bootstrap: (&summary).into(),
        accepted,
        total,
        acceptance_rate: accepted as f64 / total as f64,
        rejections: rejection_tallies(records),
        expectations: expectations(&data, &e)?,
        terms_without_data: est.terms_without_data.iter().map(|p| p.to_string()).collect(),
        provenance: provenance.clone(),
    };
    Ok((record, summary))
}

pub fn sweep_store(
    cfg: &ExperimentConfig,
    variant: Variant,
    records: &[StoreRecord],
    h: &ObservableSum,
) -> Result<Vec<SweepPoint>> {
    let e = cfg.ensemble();
    let boot = BootstrapConfig {
        resamples: cfg.bootstrap.resamples,
        level: cfg.bootstrap.level,
        seed: derive_seed(cfg.experiment.seed, &format!("sweep/{}", variant.as_str())),
    };
    shot_sweep(
        &sweep_records(records),
        2,
        energy_estimator(h, &e),
        cfg.bootstrap.sweep_increment,
        &boot,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub truth: f64,
    /// Probability that the encoded estimate lands closer to the truth.
    pub prob_better: f64,
    pub matched: bool,
    pub encoded_shots: u64,
    pub unencoded_shots: u64,
    pub encoded: BootstrapStats,
    pub unencoded: BootstrapStats,
}

/// Keeps the first accepted shots of `records` per setting, up to the
/// accepted count of `reference` in that setting.
pub fn match_accepted(records: &[StoreRecord], reference: &[StoreRecord]) -> Vec<StoreRecord> {
    let mut quota: BTreeMap<&str, usize> = BTreeMap::new();
    for r in reference.iter().filter(|r| r.accepted()) {
        *quota.entry(r.setting.as_str()).or_insert(0) += 1;
    }
    let mut out = Vec::new();
    for r in records.iter().filter(|r| r.accepted()) {
        if let Some(q) = quota.get_mut(r.setting.as_str()) {
            if *q > 0 {
                *q -= 1;
                out.push(r.clone());
            }
        }
    }
    out
}

/// Paired bootstrap comparison of an encoded and an unencoded store.
pub fn compare_stores(
    cfg: &ExperimentConfig,
    encoded: &[StoreRecord],
    unencoded: &[StoreRecord],
    h: &ObservableSum,
    truth: f64,
) -> Result<Comparison> {
    let e = cfg.ensemble();
    let matched = cfg.bootstrap.matched_compare;
    let unenc: Vec<StoreRecord> = if matched {
        match_accepted(unencoded, encoded)
    } else {
        unencoded.to_vec()
    };
    let run = |recs: &[StoreRecord], tag: &str| {
        let boot = BootstrapConfig {
            resamples: cfg.bootstrap.resamples,
            level: cfg.bootstrap.level,
            seed: derive_seed(cfg.experiment.seed, tag),
        };
        let data = store_data(recs, 2);
        bootstrap_summary(&data, energy_estimator(h, &e), &boot).map(|s| (s, data.total() as u64))
    };
    let (enc_s, enc_n) = run(encoded, "compare/encoded")?;
    let (un_s, un_n) = run(&unenc, "compare/unencoded")?;
    Ok(Comparison {
        truth,
        prob_better: prob_better(&enc_s, &un_s, truth)?,
        matched,
        encoded_shots: enc_n,
        unencoded_shots: un_n,
        encoded: (&enc_s).into(),
        unencoded: (&un_s).into(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub complete: bool,
    pub provenance: Provenance,
    pub angles: [f64; 3],
    pub noise: NoiseModel,
    pub results: Vec<ResultRecord>,
    pub comparison: Option<Comparison>,
}

/// Everything a pipeline run produced, with the files it wrote.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub results: ResultsFile,
    pub stores: Vec<(Variant, Vec<StoreRecord>)>,
    pub sweeps: Vec<(Variant, Vec<SweepPoint>)>,
    pub files: Vec<PathBuf>,
}

fn round_value(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Number(n) if n.is_f64() => {
            if let Some(f) = n.as_f64().and_then(|f| serde_json::Number::from_f64(sig12(f))) {
                *n = f;
            }
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(round_value),
        serde_json::Value::Object(o) => o.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with every float rounded to 12 significant digits.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct Incomplete<'a> {
    complete: bool,
    stage: Stage,
    error: String,
    config_hash: &'a str,
    files: &'a [PathBuf],
}

/// Runs every stage and writes results, stores and sweeps to the output
/// directory. On failure an incomplete marker replaces `results.json`.
pub fn run_pipeline(cfg: &ExperimentConfig) -> std::result::Result<PipelineOutput, PipelineError> {
    let hash = cfg.hash().map_err(|source| PipelineError {
        stage: Stage::Config,
        config_hash: "unavailable".into(),
        source,
    })?;
    let mut files = Vec::new();
    match run_stages(cfg, &hash, &mut files) {
        Ok(out) => Ok(out),
        Err((stage, source)) => {
            let marker = Incomplete {
                complete: false,
                stage,
                error: source.to_string(),
                config_hash: &hash,
                files: &files,
            };
            if let Ok(text) = to_json(&marker) {
                let _ = write_file(&cfg.output.dir.join("results.json"), &text);
            }
            Err(PipelineError {
                stage,
                config_hash: hash,
                source,
            })
        }
    }
}

type StageResult<T> = std::result::Result<T, (Stage, Error)>;

fn at<T>(stage: Stage, r: Result<T>) -> StageResult<T> {
    r.map_err(|e| (stage, e))
}

fn run_stages(cfg: &ExperimentConfig, hash: &str, files: &mut Vec<PathBuf>) -> StageResult<PipelineOutput> {
    let h = at(Stage::Config, load_hamiltonian(cfg))?;
    let noise = at(Stage::Config, cfg.noise.model())?;
    let exact = at(Stage::Solve, ground_state(&h))?.energy;
    let angles = at(Stage::Solve, resolve_angles(cfg, &h))?;
    let provenance = Provenance {
        config_hash: hash.to_string(),
        seed: cfg.experiment.seed,
        version: VERSION.to_string(),
    };
    let dir = &cfg.output.dir;

    let mut stores = Vec::new();
    for v in cfg.experiment.variant.expand() {
        let records = at(Stage::Simulate, simulate(cfg, v, &angles))?;
        let path = dir.join(format!("store_{}.csv", v.as_str()));
        at(Stage::Output, write_file(&path, &store_to_csv(&records)))?;
        files.push(path);
        stores.push((v, records));
    }

    let mut results = Vec::new();
    for (v, records) in &stores {
        let (rec, _) = at(
            Stage::Estimate,
            estimate_store(cfg, *v, records, &h, exact, &provenance),
        )?;
        results.push(rec);
    }

    let mut sweeps = Vec::new();
    if cfg.output.sweep {
        for (v, records) in &stores {
            let pts = at(Stage::Estimate, sweep_store(cfg, *v, records, &h))?;
            let path = dir.join(format!("sweep_{}.csv", v.as_str()));
            at(Stage::Output, write_file(&path, &sweep_csv(&pts)))?;
            files.push(path);
            sweeps.push((*v, pts));
        }
    }

    let comparison = if stores.len() == 2 {
        Some(at(
            Stage::Estimate,
            compare_stores(cfg, &stores[1].1, &stores[0].1, &h, exact),
        )?)
    } else {
        None
    };

    let results = ResultsFile {
        complete: true,
        provenance,
        angles: angles.as_array(),
        noise,
        results,
        comparison,
    };
    let path = dir.join("results.json");
    at(Stage::Output, to_json(&results).and_then(|t| write_file(&path, &t)))?;
    files.push(path);
    Ok(PipelineOutput {
        results,
        stores,
        sweeps,
        files: files.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const H2: &str = "-1.99134 II\n-0.02882925 XI\n-0.02882925 IX\n0.0541175 ZI\n0.0541175 IZ\n0.01495595 XX\n0.000151287 XZ\n0.000151287 ZX\n0.05900925 ZZ\n";

    fn config(dir: &Path, body: &str) -> Result<ExperimentConfig> {
        fs::write(dir.join("h.txt"), H2).unwrap();
        let text = format!(
            "[hamiltonian]\npath = \"h.txt\"\n{body}\n[output]\ndir = {:?}\n",
            dir.join("out")
        );
        ExperimentConfig::from_toml_str(&text, dir)
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let d = tempfile::tempdir().unwrap();
        assert!(config(d.path(), "[experiment]\nvariant = \"both\"\nshots = 5\nbogus = 1").is_err());
        assert!(config(d.path(), "[experiment]\nvariant = \"both\"\nshots = 0").is_err());
        assert!(config(
            d.path(),
            "[experiment]\nvariant = \"both\"\nshots = 5\nsettings = [\"XY\"]"
        )
        .is_err());
        assert!(config(
            d.path(),
            "[experiment]\nvariant = \"encoded\"\nshots = 5\nensemble = \"xyz\"\nmode = \"random-per-shot\""
        )
        .is_err());
        assert!(config(
            d.path(),
            "[state]\nangles = \"guess\"\n[experiment]\nvariant = \"both\"\nshots = 5"
        )
        .is_err());
        let ok = config(d.path(), "[experiment]\nvariant = \"both\"\nshots = 5").unwrap();
        assert_eq!(ok.experiment.settings.len(), 4);
        assert_eq!(ok.bootstrap.resamples, 5000);
    }

    #[test]
    fn missing_hamiltonian_is_config_error() {
        let d = tempfile::tempdir().unwrap();
        let text = "[hamiltonian]\npath = \"nope.txt\"\n[experiment]\nvariant = \"unencoded\"\nshots = 3\n";
        assert!(matches!(
            ExperimentConfig::from_toml_str(text, d.path()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn store_round_trip() {
        let recs = vec![
            StoreRecord {
                index: 0,
                setting: "XZ".into(),
                outcome: Some(0b10),
                reason: RejectionReason::None,
            },
            StoreRecord {
                index: 1,
                setting: "ZZ".into(),
                outcome: None,
                reason: RejectionReason::FlagDisagree,
            },
        ];
        let csv = store_to_csv(&recs);
        assert!(csv.contains("0,XZ,01,1,none"));
        assert_eq!(store_from_csv(&csv).unwrap(), recs);
        assert!(store_from_csv("index,setting\n").is_err());
        assert!(store_from_csv(&format!("{STORE_CSV_HEADER}\n0,ZZ,0,1,none\n")).is_err());
    }

    #[test]
    fn round_sig_keeps_twelve_digits() {
        assert_eq!(sig12(-2.080_250_123_456_789), -2.08025012346);
        assert_eq!(sig12(0.0), 0.0);
    }

    #[test]
    fn degenerate_single_shot_run() {
        let d = tempfile::tempdir().unwrap();
        let cfg = config(
            d.path(),
            "[experiment]\nvariant = \"unencoded\"\nshots = 1\nsettings = [\"ZZ\"]\n[bootstrap]\nresamples = 100",
        )
        .unwrap();
        let out = run_pipeline(&cfg).unwrap();
        assert_eq!(out.results.results.len(), 1);
        assert_eq!(out.results.results[0].total, 1);
        assert!(out.results.results[0].terms_without_data.contains(&"XX".to_string()));
    }

    #[test]
    fn random_mode_interleaves_draws() {
        let d = tempfile::tempdir().unwrap();
        let cfg = config(
            d.path(),
            "[experiment]\nvariant = \"unencoded\"\nshots = 400\nensemble = \"xyz\"\nmode = \"random-per-shot\"",
        )
        .unwrap();
        let h = load_hamiltonian(&cfg).unwrap();
        let recs = simulate(&cfg, Variant::Unencoded, &resolve_angles(&cfg, &h).unwrap()).unwrap();
        assert_eq!(recs.len(), 400);
        let words: std::collections::BTreeSet<_> = recs.iter().map(|r| r.setting.as_str()).collect();
        assert_eq!(words.len(), 9);
    }

    #[test]
    fn matched_records_follow_reference_counts() {
        let rec = |setting: &str, ok: bool| StoreRecord {
            index: 0,
            setting: setting.into(),
            outcome: ok.then_some(0),
            reason: if ok {
                RejectionReason::None
            } else {
                RejectionReason::AlphaFrameNontrivial
            },
        };
        let reference = vec![rec("XX", true), rec("XX", false), rec("ZZ", true), rec("ZZ", true)];
        let pool = vec![
            rec("XX", true),
            rec("XX", true),
            rec("ZZ", true),
            rec("ZZ", true),
            rec("ZZ", true),
        ];
        let m = match_accepted(&pool, &reference);
        assert_eq!(m.iter().filter(|r| r.setting == "XX").count(), 1);
        assert_eq!(m.iter().filter(|r| r.setting == "ZZ").count(), 2);
    }
}
