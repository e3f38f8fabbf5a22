//! Unencoded and [[4,2,2]]-encoded experiment circuits, shot decoding with
//! Pauli-frame tracking and post-selection, and a single-fault audit.
//!
//! Physical rows of the encoded circuit are numbered 1..=13 in the templates
//! below and map to simulator qubit `row - 1`.
//!
//! | rows   | role                                             |
//! |--------|--------------------------------------------------|
//! | 1-4    | C4 data block                                    |
//! | 5, 6   | α teleport qubit and its readout copy            |
//! | 7, 8   | β teleport qubit and its readout copy            |
//! | 9, 10  | interleaved X-type and Z-type stabilizer checks  |
//! | 11, 12 | γ teleport qubit and its readout copy            |
//! | 13     | ancilla for the repeated mixed-basis measurement |

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::PrepAngles;
use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString};
use crate::sim::{enumerate_branches, total_variation, BranchDistribution, Circuit, Gate, ShotRecord};

/// Logical two-qubit measurement basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LogicalSetting {
    XX,
    XZ,
    ZX,
    ZZ,
}

impl LogicalSetting {
    pub const ALL: [LogicalSetting; 4] = [
        LogicalSetting::XX,
        LogicalSetting::XZ,
        LogicalSetting::ZX,
        LogicalSetting::ZZ,
    ];

    pub fn bases(&self) -> [Pauli; 2] {
        match self {
            LogicalSetting::XX => [Pauli::X, Pauli::X],
            LogicalSetting::XZ => [Pauli::X, Pauli::Z],
            LogicalSetting::ZX => [Pauli::Z, Pauli::X],
            LogicalSetting::ZZ => [Pauli::Z, Pauli::Z],
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            LogicalSetting::XX => "XX",
            LogicalSetting::XZ => "XZ",
            LogicalSetting::ZX => "ZX",
            LogicalSetting::ZZ => "ZZ",
        }
    }

    pub fn from_bases(bases: [Pauli; 2]) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.bases() == bases)
    }
}

impl fmt::Display for LogicalSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LogicalSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown setting {s:?}")))
    }
}

/// Qubit roles of the 13-qubit encoded circuit (0-based simulator indices).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct C4Layout {
    pub data: [usize; 4],
    /// Teleport qubit and readout copy for α, β and γ.
    pub rotation_pairs: [(usize, usize); 3],
    /// X-check, Z-check and mixed-basis measurement ancillas.
    pub ancillas: [usize; 3],
}

impl C4Layout {
    pub const STANDARD: C4Layout = C4Layout {
        data: [0, 1, 2, 3],
        rotation_pairs: [(4, 5), (6, 7), (10, 11)],
        ancillas: [8, 9, 12],
    };

    pub fn all_qubits(&self) -> Vec<usize> {
        let mut v = self.data.to_vec();
        for (a, b) in self.rotation_pairs {
            v.push(a);
            v.push(b);
        }
        v.extend(self.ancillas);
        v
    }

    pub fn n_qubits(&self) -> usize {
        self.all_qubits().len()
    }

    pub fn validate(&self) -> Result<()> {
        let mut q = self.all_qubits();
        q.sort_unstable();
        q.dedup();
        if q.len() != 13 {
            return Err(Error::InvalidCircuit(
                "layout indices are not 13 distinct qubits".into(),
            ));
        }
        Ok(())
    }
}

/// Logical operators on the data block in the frame after the logical CNOT
/// (qubits 2 and 4 relabeled), as physical words on rows 1..=4. Stabilizers are
/// XXXX and ZZZZ.
pub const LOGICAL_OPERATORS: [(&str, &str); 5] = [
    ("Z1", "IZIZ"),
    ("Z2", "IZZI"),
    ("X1", "XIIX"),
    ("X2", "XIXI"),
    // Logical I⊗Y applied by the γ gadget, controlled on row 11.
    ("Y2", "IYZX"),
];

pub fn logical_operator(name: &str) -> PauliString {
    let word = LOGICAL_OPERATORS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, w)| *w)
        .expect("known logical operator");
    word.parse().expect("valid word")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Angle {
    Alpha,
    Beta,
    Gamma,
}

/// Template instruction on 1-based physical rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    H(usize),
    S(usize),
    Rx(Angle, usize),
    Cnot(usize, usize),
    Cz(usize, usize),
    Cy(usize, usize),
    Measure(usize, &'static str),
    Reset(usize),
}

use Op::{Cnot, Cy, Cz, Measure, Reset, Rx, H, S};

/// Bell pairs (rows 2-5 and 3-7) with one half of each encoded into rows 1-4.
const PREP: &[Op] = &[
    H(2),
    H(3),
    H(4),
    Cnot(3, 7),
    Cnot(2, 5),
    Cnot(4, 2),
    Cnot(3, 1),
    Cnot(2, 1),
    Cnot(4, 3),
];

/// Interleaved measurement of X2X3X5X7 (row 9) and Z2Z3Z5Z7 (row 10).
const VERIFY: &[Op] = &[
    H(9),
    Cnot(9, 5),
    Cnot(7, 10),
    Cnot(9, 7),
    Cnot(5, 10),
    Cnot(9, 3),
    Cnot(2, 10),
    Cnot(9, 2),
    Cnot(3, 10),
    H(9),
    Measure(9, "chk_x"),
    Measure(10, "chk_z"),
];

const ROTATIONS: &[Op] = &[
    S(5),
    Rx(Angle::Alpha, 5),
    Cnot(5, 6),
    Measure(5, "alpha"),
    Measure(6, "alpha_copy"),
    S(7),
    Rx(Angle::Beta, 7),
    Cnot(7, 8),
    Measure(7, "beta"),
    Measure(8, "beta_copy"),
    H(11),
    Cnot(11, 4),
    Cz(11, 3),
    Cy(11, 2),
    Rx(Angle::Gamma, 11),
    Cnot(11, 12),
    Measure(11, "gamma"),
    Measure(12, "gamma_copy"),
];

const READ_DATA: &[Op] = &[Measure(1, "d1"), Measure(2, "d2"), Measure(3, "d3"), Measure(4, "d4")];

const ROTATE_DATA_X: &[Op] = &[H(1), H(2), H(3), H(4)];

const REPEAT_X1: &[Op] = &[
    H(13),
    Cnot(13, 1),
    Cnot(13, 4),
    H(13),
    Measure(13, "rep1"),
    Reset(13),
    H(13),
    Cnot(13, 1),
    Cnot(13, 4),
    H(13),
    Measure(13, "rep2"),
];

const REPEAT_X2: &[Op] = &[
    H(13),
    Cnot(13, 2),
    Cnot(13, 4),
    H(13),
    Measure(13, "rep1"),
    Reset(13),
    H(13),
    Cnot(13, 2),
    Cnot(13, 4),
    H(13),
    Measure(13, "rep2"),
];

fn measurement_template(setting: LogicalSetting) -> Vec<Op> {
    match setting {
        LogicalSetting::ZZ => READ_DATA.to_vec(),
        LogicalSetting::XX => [ROTATE_DATA_X, READ_DATA].concat(),
        LogicalSetting::XZ => [REPEAT_X1, READ_DATA].concat(),
        LogicalSetting::ZX => [REPEAT_X2, READ_DATA].concat(),
    }
}

/// Circuit section used by the fault audit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Block {
    Prep,
    Verify,
    Rotations,
    Measurement,
    All,
}

impl Block {
    pub const SECTIONS: [Block; 4] = [Block::Prep, Block::Verify, Block::Rotations, Block::Measurement];

    pub fn as_str(&self) -> &'static str {
        match self {
            Block::Prep => "prep",
            Block::Verify => "verify",
            Block::Rotations => "rotations",
            Block::Measurement => "measurement",
            Block::All => "all",
        }
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Block {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Block::Prep,
            Block::Verify,
            Block::Rotations,
            Block::Measurement,
            Block::All,
        ]
        .into_iter()
        .find(|b| b.as_str() == s)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown block {s:?}")))
    }
}

/// Everything the decoder needs to interpret the classical bits of an encoded
/// shot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeMeta {
    pub setting: LogicalSetting,
    pub n_bits: usize,
    /// Stabilizer check bits; each must read 0.
    pub checks: Vec<usize>,
    /// Final data bits whose parity is a stabilizer; must XOR to 0.
    pub parity: Vec<usize>,
    /// Teleport outcome and its copy; must agree.
    pub flag_pairs: Vec<(usize, usize)>,
    /// Repeated measurements of the same logical operator; must agree.
    pub repeat_pairs: Vec<(usize, usize)>,
    pub alpha_bit: usize,
    /// Bits XORed into logical bit 1 and logical bit 2.
    pub logical: [Vec<usize>; 2],
    /// Teleport bits and the logical frame each one contributes when set.
    pub frames: Vec<(usize, PauliString)>,
    /// Data-qubit relabeling that implements the logical CNOT.
    pub relabel: [usize; 4],
    /// Gate-index ranges of each circuit section.
    pub blocks: Vec<(Block, Range<usize>)>,
}

impl DecodeMeta {
    pub fn block_range(&self, block: Block) -> Range<usize> {
        match block {
            Block::All => {
                let start = self.blocks.first().map_or(0, |b| b.1.start);
                let end = self.blocks.last().map_or(0, |b| b.1.end);
                start..end
            }
            b => self
                .blocks
                .iter()
                .find(|(k, _)| *k == b)
                .map(|(_, r)| r.clone())
                .unwrap_or(0..0),
        }
    }
}

fn emit(c: &mut Circuit, ops: &[Op], angles: &PrepAngles) {
    let q = |row: usize| row - 1;
    for op in ops {
        match *op {
            H(r) => c.push(Gate::H(q(r))),
            S(r) => c.push(Gate::S(q(r))),
            Rx(a, r) => {
                let t = match a {
                    Angle::Alpha => angles.alpha,
                    Angle::Beta => angles.beta,
                    Angle::Gamma => angles.gamma,
                };
                c.push(Gate::Rx(q(r), t))
            }
            Cnot(a, b) => c.push(Gate::Cnot {
                control: q(a),
                target: q(b),
            }),
            Cz(a, b) => c.push(Gate::Cz(q(a), q(b))),
            Cy(a, b) => c.push(Gate::Cy {
                control: q(a),
                target: q(b),
            }),
            Reset(r) => c.push(Gate::Reset(q(r))),
            Measure(r, label) => {
                c.measure(q(r), label);
                continue;
            }
        };
    }
}

fn support_bits(c: &Circuit, word: &str) -> Vec<usize> {
    word.chars()
        .enumerate()
        .filter(|(_, ch)| *ch != 'I')
        .map(|(i, _)| c.bit_index(&format!("d{}", i + 1)).expect("data bit"))
        .collect()
}

/// Builds the 13-qubit encoded circuit and its decoding metadata.
pub fn build_encoded_circuit(angles: &PrepAngles, setting: LogicalSetting) -> (Circuit, DecodeMeta) {
    let layout = C4Layout::STANDARD;
    let mut c = Circuit::new(layout.n_qubits());
    let mut blocks = Vec::new();
    let sections: [(Block, Vec<Op>); 4] = [
        (Block::Prep, PREP.to_vec()),
        (Block::Verify, VERIFY.to_vec()),
        (Block::Rotations, ROTATIONS.to_vec()),
        (Block::Measurement, measurement_template(setting)),
    ];
    for (block, ops) in &sections {
        let start = c.gates().len();
        emit(&mut c, ops, angles);
        blocks.push((*block, start..c.gates().len()));
    }

    let bit = |name: &str| c.bit_index(name).expect("bit defined by template");
    let data_bits: Vec<usize> = (1..=4).map(|i| bit(&format!("d{i}"))).collect();
    let op_bits = |name: &str| support_bits(&c, LOGICAL_OPERATORS.iter().find(|(n, _)| *n == name).unwrap().1);
    let logical = match setting {
        LogicalSetting::ZZ => [op_bits("Z1"), op_bits("Z2")],
        LogicalSetting::XX => [op_bits("X1"), op_bits("X2")],
        LogicalSetting::XZ => [vec![bit("rep1")], op_bits("Z2")],
        LogicalSetting::ZX => [op_bits("Z1"), vec![bit("rep1")]],
    };
    let repeat_pairs = match setting {
        LogicalSetting::XZ | LogicalSetting::ZX => vec![(bit("rep1"), bit("rep2"))],
        _ => vec![],
    };
    let meta = DecodeMeta {
        setting,
        n_bits: c.n_bits(),
        checks: vec![bit("chk_x"), bit("chk_z")],
        parity: data_bits,
        flag_pairs: vec![
            (bit("alpha"), bit("alpha_copy")),
            (bit("beta"), bit("beta_copy")),
            (bit("gamma"), bit("gamma_copy")),
        ],
        repeat_pairs,
        alpha_bit: bit("alpha"),
        logical,
        frames: vec![
            (bit("beta"), "ZY".parse().expect("frame")),
            (bit("gamma"), "IY".parse().expect("frame")),
        ],
        relabel: [0, 3, 2, 1],
        blocks,
    };
    (c, meta)
}

/// Builds the two-qubit ansatz followed by a rotation of each qubit into the
/// requested basis and Z measurements into bits `m1`, `m2`.
pub fn build_unencoded_circuit_word(angles: &PrepAngles, bases: [Pauli; 2]) -> Result<Circuit> {
    let mut c = Circuit::new(2);
    c.push(Gate::Ry(0, angles.alpha))
        .push(Gate::Ry(1, angles.beta))
        .push(Gate::Cnot { control: 0, target: 1 })
        .push(Gate::Ry(1, angles.gamma));
    for (q, b) in bases.iter().enumerate() {
        match b {
            Pauli::Z => {}
            Pauli::X => {
                c.push(Gate::H(q));
            }
            Pauli::Y => {
                c.push(Gate::Sdg(q)).push(Gate::H(q));
            }
            Pauli::I => return Err(Error::InvalidArgument("measurement basis must be X, Y or Z".into())),
        }
    }
    c.measure(0, "m1");
    c.measure(1, "m2");
    Ok(c)
}

pub fn build_unencoded_circuit(angles: &PrepAngles, setting: LogicalSetting) -> Circuit {
    build_unencoded_circuit_word(angles, setting.bases()).expect("setting bases are X or Z")
}

/// Why a shot was discarded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RejectionReason {
    None,
    StabilizerDetect,
    FlagDisagree,
    RepeatedMeasureDisagree,
    AlphaFrameNontrivial,
}

impl RejectionReason {
    pub const REJECTIONS: [RejectionReason; 4] = [
        RejectionReason::StabilizerDetect,
        RejectionReason::FlagDisagree,
        RejectionReason::RepeatedMeasureDisagree,
        RejectionReason::AlphaFrameNontrivial,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            RejectionReason::None => "none",
            RejectionReason::StabilizerDetect => "stabilizer-detect",
            RejectionReason::FlagDisagree => "flag-disagree",
            RejectionReason::RepeatedMeasureDisagree => "repeated-measure-disagree",
            RejectionReason::AlphaFrameNontrivial => "alpha-frame-nontrivial",
        }
    }
}

impl fmt::Display for RejectionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RejectionReason {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [RejectionReason::None]
            .into_iter()
            .chain(Self::REJECTIONS)
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown rejection reason {s:?}")))
    }
}

/// Accumulated logical Pauli correction of one shot.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliFrame {
    pub frame: PauliString,
    /// Teleport bit index and its recorded value.
    pub outcomes: Vec<(usize, bool)>,
}

impl PauliFrame {
    pub fn from_bits(bits: u64, meta: &DecodeMeta) -> Self {
        let mut frame = PauliString::identity(2).expect("two qubits");
        let mut outcomes = Vec::new();
        for (b, p) in &meta.frames {
            let v = (bits >> b) & 1 == 1;
            outcomes.push((*b, v));
            if v {
                frame = frame.mul(p).expect("two-qubit frames").unsigned();
            }
        }
        PauliFrame { frame, outcomes }
    }

    /// Whether the frame flips the readout of logical qubit `q` in `basis`.
    pub fn flips(&self, q: usize, basis: Pauli) -> bool {
        let f = self.frame.letter(q);
        f != Pauli::I && f != basis
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DecodedShot {
    pub accepted: bool,
    pub reason: RejectionReason,
    /// Logical bits of qubits 1 and 2 when accepted.
    pub logical: Option<[u8; 2]>,
}

impl DecodedShot {
    /// Logical outcome packed as `b1 | b2 << 1`.
    pub fn logical_key(&self) -> Option<u64> {
        self.logical.map(|[a, b]| a as u64 | (b as u64) << 1)
    }
}

fn parity(bits: u64, idx: &[usize]) -> bool {
    idx.iter().fold(false, |acc, &i| acc ^ ((bits >> i) & 1 == 1))
}

/// Decodes packed classical bits of an encoded shot.
pub fn decode_bits(bits: u64, meta: &DecodeMeta) -> DecodedShot {
    let get = |i: usize| (bits >> i) & 1 == 1;
    let reject = |reason| DecodedShot {
        accepted: false,
        reason,
        logical: None,
    };
    if meta.checks.iter().any(|&b| get(b)) || parity(bits, &meta.parity) {
        return reject(RejectionReason::StabilizerDetect);
    }
    if meta.flag_pairs.iter().any(|&(a, b)| get(a) != get(b)) {
        return reject(RejectionReason::FlagDisagree);
    }
    if meta.repeat_pairs.iter().any(|&(a, b)| get(a) != get(b)) {
        return reject(RejectionReason::RepeatedMeasureDisagree);
    }
    if get(meta.alpha_bit) {
        return reject(RejectionReason::AlphaFrameNontrivial);
    }
    let frame = PauliFrame::from_bits(bits, meta);
    let bases = meta.setting.bases();
    let mut out = [0u8; 2];
    for q in 0..2 {
        let raw = parity(bits, &meta.logical[q]);
        out[q] = (raw ^ frame.flips(q, bases[q])) as u8;
    }
    DecodedShot {
        accepted: true,
        reason: RejectionReason::None,
        logical: Some(out),
    }
}

pub fn decode_shot(raw: &ShotRecord, meta: &DecodeMeta) -> Result<DecodedShot> {
    if raw.n_bits != meta.n_bits {
        return Err(Error::Dimension {
            expected: meta.n_bits,
            found: raw.n_bits,
        });
    }
    Ok(decode_bits(raw.bits, meta))
}

/// Accepted-conditional logical distribution of an exact branch distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct LogicalDistribution {
    pub accept_probability: f64,
    pub rejection: BTreeMap<RejectionReason, f64>,
    /// Conditional on acceptance; empty when nothing is accepted.
    pub conditional: BTreeMap<u64, f64>,
}

pub fn logical_distribution(raw: &BranchDistribution, meta: &DecodeMeta) -> LogicalDistribution {
    let mut accepted = BTreeMap::new();
    let mut rejection = BTreeMap::new();
    let mut total_accept = 0.0;
    for (&bits, &p) in raw {
        let d = decode_bits(bits, meta);
        match d.logical_key() {
            Some(k) => {
                *accepted.entry(k).or_insert(0.0) += p;
                total_accept += p;
            }
            None => *rejection.entry(d.reason).or_insert(0.0) += p,
        }
    }
    if total_accept > 0.0 {
        for v in accepted.values_mut() {
            *v /= total_accept;
        }
    }
    LogicalDistribution {
        accept_probability: total_accept,
        rejection,
        conditional: accepted,
    }
}

/// Gate tallies of a circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateCounts {
    pub total: usize,
    pub single_qubit: usize,
    pub two_qubit: usize,
    pub measurements: usize,
    pub resets: usize,
}

/// Reference two-qubit gate count for the mixed-basis settings.
pub const REFERENCE_TWO_QUBIT_GATES: usize = 24;

pub fn gate_counts(c: &Circuit) -> GateCounts {
    let g = c.gates();
    GateCounts {
        total: g.len(),
        single_qubit: g.iter().filter(|g| g.is_single_qubit_unitary()).count(),
        two_qubit: c.two_qubit_gate_count(),
        measurements: c.measurement_count(),
        resets: g.iter().filter(|g| matches!(g, Gate::Reset(_))).count(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultClass {
    Detected,
    Benign,
    UndetectedLogical,
}

impl FaultClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            FaultClass::Detected => "detected",
            FaultClass::Benign => "benign",
            FaultClass::UndetectedLogical => "undetected-logical",
        }
    }
}

/// One audited fault.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub block: Block,
    pub setting: LogicalSetting,
    /// Index of the gate the fault follows, `None` for the fault-free control.
    pub location: Option<usize>,
    pub gate: String,
    pub fault: String,
    pub class: FaultClass,
    pub accept_probability: f64,
    pub tvd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub control: AuditRow,
    pub rows: Vec<AuditRow>,
    pub detected: usize,
    pub benign: usize,
    pub undetected: usize,
}

impl AuditReport {
    pub const CSV_HEADER: &'static str = "block,setting,location,gate,fault,class,accept_probability,tvd";

    pub fn undetected_rows(&self) -> impl Iterator<Item = &AuditRow> {
        self.rows.iter().filter(|r| r.class == FaultClass::UndetectedLogical)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in std::iter::once(&self.control).chain(&self.rows) {
            let loc = r.location.map_or("none".to_string(), |l| l.to_string());
            out.push_str(&format!(
                "{},{},{},{},{},{},{:.12e},{:.12e}\n",
                r.block,
                r.setting,
                loc,
                r.gate,
                r.fault,
                r.class.as_str(),
                r.accept_probability,
                r.tvd
            ));
        }
        out
    }
}

/// Which faults to insert after each gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultSet {
    /// Also insert all 15 two-qubit Paulis after each two-qubit gate.
    pub two_qubit: bool,
}

/// Agreement threshold used when comparing accepted distributions.
pub const AUDIT_TVD_TOL: f64 = 1e-9;
const DETECT_TOL: f64 = 1e-12;

fn classify(dist: &BranchDistribution, meta: &DecodeMeta, ideal: &BTreeMap<u64, f64>) -> (FaultClass, f64, f64) {
    let ld = logical_distribution(dist, meta);
    if ld.accept_probability <= DETECT_TOL {
        return (FaultClass::Detected, ld.accept_probability, 0.0);
    }
    let tvd = total_variation(&ld.conditional, ideal);
    let class = if tvd <= AUDIT_TVD_TOL {
        FaultClass::Benign
    } else {
        FaultClass::UndetectedLogical
    };
    (class, ld.accept_probability, tvd)
}

fn faults_after(gate: &Gate, set: FaultSet) -> Vec<(String, Vec<Gate>)> {
    const LETTERS: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];
    let mut out = Vec::new();
    if let Gate::Measure { bit, .. } = *gate {
        out.push((format!("FLIP c{bit}"), vec![Gate::FlipBit(bit)]));
    }
    let qs = gate.qubits();
    for &q in &qs {
        for p in LETTERS {
            out.push((format!("{} q{}", p.as_char(), q + 1), vec![Gate::pauli(p, q).unwrap()]));
        }
    }
    if set.two_qubit && gate.is_two_qubit() {
        let all = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
        for a in all {
            for b in all {
                if a == Pauli::I || b == Pauli::I {
                    continue;
                }
                let gates = vec![Gate::pauli(a, qs[0]).unwrap(), Gate::pauli(b, qs[1]).unwrap()];
                out.push((
                    format!("{}{} q{} q{}", a.as_char(), b.as_char(), qs[0] + 1, qs[1] + 1),
                    gates,
                ));
            }
        }
    }
    out
}

/// Inserts every single fault of `set` after each gate of `block` and classifies
/// it by exact branch enumeration against the unencoded ideal distribution.
pub fn fault_audit(block: Block, setting: LogicalSetting, angles: &PrepAngles, set: FaultSet) -> Result<AuditReport> {
    let (c, meta) = build_encoded_circuit(angles, setting);
    let ideal = enumerate_branches(&build_unencoded_circuit(angles, setting))?;
    let baseline = enumerate_branches(&c)?;
    let (class, acc, tvd) = classify(&baseline, &meta, &ideal);
    let control = AuditRow {
        block,
        setting,
        location: None,
        gate: "none".into(),
        fault: "none".into(),
        class,
        accept_probability: acc,
        tvd,
    };

    let mut cases = Vec::new();
    for i in meta.block_range(block) {
        let g = c.gates()[i];
        for (label, gates) in faults_after(&g, set) {
            cases.push((i, g, label, gates));
        }
    }
    let rows: Vec<AuditRow> = cases
        .par_iter()
        .map(|(i, g, label, gates)| {
            let ins: Vec<_> = gates.iter().map(|x| (Some(*i), *x)).collect();
            let faulty = c.with_insertions(&ins);
            let dist = enumerate_branches(&faulty)?;
            let (class, acc, tvd) = classify(&dist, &meta, &ideal);
            Ok(AuditRow {
                block,
                setting,
                location: Some(*i),
                gate: g.to_string(),
                fault: label.clone(),
                class,
                accept_probability: acc,
                tvd,
            })
        })
        .collect::<Result<_>>()?;
    let count = |k| rows.iter().filter(|r| r.class == k).count();
    Ok(AuditReport {
        detected: count(FaultClass::Detected),
        benign: count(FaultClass::Benign),
        undetected: count(FaultClass::UndetectedLogical),
        control,
        rows,
    })
}

/// Pauli error tracked as x/z masks over the circuit's qubits, phase ignored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct PauliMask {
    x: u64,
    z: u64,
}

impl PauliMask {
    fn bit(n: usize, q: usize) -> u64 {
        1 << (n - 1 - q)
    }

    fn single(n: usize, q: usize, p: Pauli) -> Self {
        let b = Self::bit(n, q);
        let (x, z) = p.bits();
        PauliMask {
            x: if x { b } else { 0 },
            z: if z { b } else { 0 },
        }
    }

    fn mul(self, o: PauliMask) -> PauliMask {
        PauliMask {
            x: self.x ^ o.x,
            z: self.z ^ o.z,
        }
    }

    /// Conjugates the error through a Clifford gate.
    fn propagate(&mut self, g: &Gate, n: usize) -> Result<()> {
        let b = |q| Self::bit(n, q);
        let swap_xz = |m: &mut PauliMask, q| {
            let (bx, bz) = (m.x & b(q), m.z & b(q));
            m.x = (m.x & !b(q)) | bz;
            m.z = (m.z & !b(q)) | bx;
        };
        let phase_gate = |m: &mut PauliMask, q| {
            if m.x & b(q) != 0 {
                m.z ^= b(q);
            }
        };
        let cnot = |m: &mut PauliMask, c, t| {
            if m.x & b(c) != 0 {
                m.x ^= b(t);
            }
            if m.z & b(t) != 0 {
                m.z ^= b(c);
            }
        };
        match *g {
            Gate::H(q) => swap_xz(self, q),
            Gate::S(q) | Gate::Sdg(q) => phase_gate(self, q),
            Gate::Cnot { control, target } => cnot(self, control, target),
            Gate::Cz(a, c) => {
                let (xa, xc) = (self.x & b(a) != 0, self.x & b(c) != 0);
                if xc {
                    self.z ^= b(a);
                }
                if xa {
                    self.z ^= b(c);
                }
            }
            Gate::Cy { control, target } => {
                phase_gate(self, target);
                cnot(self, control, target);
                phase_gate(self, target);
            }
            Gate::Rx(..) | Gate::Ry(..) => return Err(Error::InvalidCircuit(format!("{g} is not a Clifford gate"))),
            _ => {}
        }
        Ok(())
    }
}

/// Residual error that one fault in the preparation or verification sections
/// leaves on the prepared six-qubit state (data rows 1-4 and Bell halves on
/// rows 5 and 7).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub block: Block,
    pub location: usize,
    pub gate: String,
    pub fault: String,
    /// A stabilizer check fired.
    pub detected: bool,
    /// Lowest-weight representative of the residual on rows 1-5 and 7.
    pub residual: String,
    pub min_weight: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub rows: Vec<ResidualRow>,
    /// Faults that pass both checks yet leave a residual of weight two or more.
    pub undetected_high_weight: usize,
}

/// Propagates every single fault of the preparation and verification sections
/// to the end of verification and reduces the surviving error modulo the
/// prepared state's stabilizer group.
pub fn prep_residual_audit(set: FaultSet) -> Result<ResidualReport> {
    let (c, meta) = build_encoded_circuit(&PrepAngles::new(0.0, 0.0, 0.0), LogicalSetting::ZZ);
    let n = c.n_qubits();
    let state_rows = [0usize, 1, 2, 3, 4, 6];
    let state_mask: u64 = state_rows.iter().map(|&q| PauliMask::bit(n, q)).sum();
    let prep = meta.block_range(Block::Prep);
    let verify = meta.block_range(Block::Verify);

    let mut generators = Vec::new();
    for &q in &state_rows {
        let mut m = PauliMask::single(n, q, Pauli::Z);
        for g in &c.gates()[prep.clone()] {
            m.propagate(g, n)?;
        }
        generators.push(m);
    }
    let group: Vec<PauliMask> = (0..1u32 << generators.len())
        .map(|sel| {
            generators
                .iter()
                .enumerate()
                .filter(|(i, _)| sel >> i & 1 == 1)
                .fold(PauliMask { x: 0, z: 0 }, |acc, (_, g)| acc.mul(*g))
        })
        .collect();

    let end = verify.end;
    let mut rows = Vec::new();
    for i in prep.start..end {
        let g = c.gates()[i];
        for (label, fault) in faults_after(&g, set) {
            let mut err = PauliMask { x: 0, z: 0 };
            let mut detected = false;
            for f in &fault {
                match *f {
                    Gate::FlipBit(_) => detected = true,
                    ref p => {
                        let q = p.qubits()[0];
                        let letter = match p {
                            Gate::X(_) => Pauli::X,
                            Gate::Y(_) => Pauli::Y,
                            _ => Pauli::Z,
                        };
                        err = err.mul(PauliMask::single(n, q, letter));
                    }
                }
            }
            for later in &c.gates()[i + 1..end] {
                if let Gate::Measure { qubit, .. } = *later {
                    if err.x & PauliMask::bit(n, qubit) != 0 {
                        detected = true;
                    }
                } else {
                    err.propagate(later, n)?;
                }
            }
            let best = group
                .iter()
                .map(|s| {
                    let r = err.mul(*s);
                    PauliMask {
                        x: r.x & state_mask,
                        z: r.z & state_mask,
                    }
                })
                .min_by_key(|r| ((r.x | r.z).count_ones(), r.x, r.z))
                .expect("group is non-empty");
            let word = PauliString::from_masks(n, best.x, best.z)?;
            let residual: String = state_rows.iter().map(|&q| word.letter(q).as_char()).collect();
            rows.push(ResidualRow {
                block: if prep.contains(&i) { Block::Prep } else { Block::Verify },
                location: i,
                gate: g.to_string(),
                fault: label,
                detected,
                residual,
                min_weight: (best.x | best.z).count_ones(),
            });
        }
    }
    let undetected_high_weight = rows.iter().filter(|r| !r.detected && r.min_weight >= 2).count();
    Ok(ResidualReport {
        rows,
        undetected_high_weight,
    })
}
