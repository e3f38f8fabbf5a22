//! Seeded statevector simulation with mid-circuit measurement, reset,
//! classically conditioned Paulis and stochastic Pauli noise, plus exact
//! enumeration of measurement branches.
//!
//! The simulator keeps measured (or never touched) qubits out of the dense
//! register as classical bits and only re-inserts them when a gate could
//! entangle them again. This is exact: a measured qubit is in a product
//! computational-basis state until the next non-classical gate acts on it.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt::{self, Write as _};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{Pauli, StateVector};

/// Maximum number of measurement gates accepted by [`enumerate_branches`].
pub const BRANCH_CAP: usize = 20;
/// Classical bits are packed into a `u64`.
pub const MAX_CLASSICAL_BITS: usize = 64;
/// Branches lighter than this are dropped during enumeration.
const PRUNE_PROBABILITY: f64 = 1e-24;
const UNDERFLOW_GUARD: f64 = 1e-300;

/// One circuit instruction. Qubits and classical bits are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Gate {
    /// Identity; a placeholder that still receives gate noise.
    I(usize),
    H(usize),
    S(usize),
    Sdg(usize),
    X(usize),
    Y(usize),
    Z(usize),
    Rx(usize, f64),
    Ry(usize, f64),
    Cnot {
        control: usize,
        target: usize,
    },
    /// Controlled-Y.
    Cy {
        control: usize,
        target: usize,
    },
    Cz(usize, usize),
    /// Z-basis measurement written into a classical bit.
    Measure {
        qubit: usize,
        bit: usize,
    },
    /// Projects onto the computational basis and re-prepares `|0⟩`.
    Reset(usize),
    /// Applies `pauli` to `qubit` when classical `bit` reads 1.
    CondPauli {
        pauli: Pauli,
        qubit: usize,
        bit: usize,
    },
    /// Classical flip of a recorded bit; used to inject readout faults.
    FlipBit(usize),
}

impl Gate {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::I(q)
            | Gate::H(q)
            | Gate::S(q)
            | Gate::Sdg(q)
            | Gate::X(q)
            | Gate::Y(q)
            | Gate::Z(q)
            | Gate::Rx(q, _)
            | Gate::Ry(q, _)
            | Gate::Reset(q) => vec![q],
            Gate::Cnot { control, target } | Gate::Cy { control, target } => vec![control, target],
            Gate::Cz(a, b) => vec![a, b],
            Gate::Measure { qubit, .. } | Gate::CondPauli { qubit, .. } => vec![qubit],
            Gate::FlipBit(_) => vec![],
        }
    }

    pub fn is_two_qubit(&self) -> bool {
        matches!(self, Gate::Cnot { .. } | Gate::Cy { .. } | Gate::Cz(..))
    }

    /// Unitary single-qubit gate (noise class `p1`).
    pub fn is_single_qubit_unitary(&self) -> bool {
        matches!(
            self,
            Gate::I(_)
                | Gate::H(_)
                | Gate::S(_)
                | Gate::Sdg(_)
                | Gate::X(_)
                | Gate::Y(_)
                | Gate::Z(_)
                | Gate::Rx(..)
                | Gate::Ry(..)
                | Gate::CondPauli { .. }
        )
    }

    pub fn pauli(pauli: Pauli, q: usize) -> Option<Gate> {
        match pauli {
            Pauli::I => None,
            Pauli::X => Some(Gate::X(q)),
            Pauli::Y => Some(Gate::Y(q)),
            Pauli::Z => Some(Gate::Z(q)),
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let q = |i: usize| i + 1;
        match *self {
            Gate::I(a) => write!(f, "I q{}", q(a)),
            Gate::H(a) => write!(f, "H q{}", q(a)),
            Gate::S(a) => write!(f, "S q{}", q(a)),
            Gate::Sdg(a) => write!(f, "SDG q{}", q(a)),
            Gate::X(a) => write!(f, "X q{}", q(a)),
            Gate::Y(a) => write!(f, "Y q{}", q(a)),
            Gate::Z(a) => write!(f, "Z q{}", q(a)),
            Gate::Rx(a, t) => write!(f, "RX({t:.12}) q{}", q(a)),
            Gate::Ry(a, t) => write!(f, "RY({t:.12}) q{}", q(a)),
            Gate::Cnot { control, target } => write!(f, "CNOT q{} q{}", q(control), q(target)),
            Gate::Cy { control, target } => write!(f, "CY q{} q{}", q(control), q(target)),
            Gate::Cz(a, b) => write!(f, "CZ q{} q{}", q(a), q(b)),
            Gate::Measure { qubit, bit } => write!(f, "MEASURE q{} -> c{bit}", q(qubit)),
            Gate::Reset(a) => write!(f, "RESET q{}", q(a)),
            Gate::CondPauli { pauli, qubit, bit } => {
                write!(f, "IF c{bit} {} q{}", pauli.as_char(), q(qubit))
            }
            Gate::FlipBit(b) => write!(f, "FLIP c{b}"),
        }
    }
}

/// Ordered gate list over `n_qubits` qubits and `n_bits` classical bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    n_qubits: usize,
    bit_labels: Vec<String>,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Circuit {
            n_qubits,
            bit_labels: Vec::new(),
            gates: Vec::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_bits(&self) -> usize {
        self.bit_labels.len()
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn bit_labels(&self) -> &[String] {
        &self.bit_labels
    }

    pub fn bit_index(&self, label: &str) -> Option<usize> {
        self.bit_labels.iter().position(|l| l == label)
    }

    /// Allocates a named classical bit.
    pub fn add_bit(&mut self, label: impl Into<String>) -> usize {
        self.bit_labels.push(label.into());
        self.bit_labels.len() - 1
    }

    pub fn push(&mut self, gate: Gate) -> &mut Self {
        self.gates.push(gate);
        self
    }

    /// Measures `qubit` into a freshly allocated bit named `label`.
    pub fn measure(&mut self, qubit: usize, label: impl Into<String>) -> usize {
        let bit = self.add_bit(label);
        self.gates.push(Gate::Measure { qubit, bit });
        bit
    }

    /// Copy with `extra` gates inserted after the gate at each given index
    /// (`None` inserts before the first gate).
    pub fn with_insertions(&self, insertions: &[(Option<usize>, Gate)]) -> Circuit {
        let mut gates = Vec::with_capacity(self.gates.len() + insertions.len());
        for (pos, g) in insertions {
            if pos.is_none() {
                gates.push(*g);
            }
        }
        for (i, g) in self.gates.iter().enumerate() {
            gates.push(*g);
            for (pos, extra) in insertions {
                if *pos == Some(i) {
                    gates.push(*extra);
                }
            }
        }
        Circuit {
            n_qubits: self.n_qubits,
            bit_labels: self.bit_labels.clone(),
            gates,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 {
            return Err(Error::InvalidCircuit("no qubits".into()));
        }
        if self.n_bits() > MAX_CLASSICAL_BITS {
            return Err(Error::InvalidCircuit(format!(
                "{} classical bits exceeds {MAX_CLASSICAL_BITS}",
                self.n_bits()
            )));
        }
        for (i, g) in self.gates.iter().enumerate() {
            let qs = g.qubits();
            for &q in &qs {
                if q >= self.n_qubits {
                    return Err(Error::IndexOutOfRange {
                        index: q,
                        limit: self.n_qubits,
                    });
                }
            }
            if qs.len() == 2 && qs[0] == qs[1] {
                return Err(Error::InvalidCircuit(format!("gate {i} ({g}) repeats a qubit")));
            }
            match *g {
                Gate::Rx(_, t) | Gate::Ry(_, t) if !t.is_finite() => {
                    return Err(Error::InvalidCircuit(format!("gate {i} has a non-finite angle")))
                }
                Gate::Measure { bit, .. } | Gate::CondPauli { bit, .. } | Gate::FlipBit(bit)
                    if bit >= self.n_bits() =>
                {
                    return Err(Error::IndexOutOfRange {
                        index: bit,
                        limit: self.n_bits(),
                    })
                }
                Gate::CondPauli { pauli: Pauli::I, .. } => {
                    return Err(Error::InvalidCircuit(format!("gate {i} conditions an identity")))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn measurement_count(&self) -> usize {
        self.gates.iter().filter(|g| matches!(g, Gate::Measure { .. })).count()
    }

    pub fn two_qubit_gate_count(&self) -> usize {
        self.gates.iter().filter(|g| g.is_two_qubit()).count()
    }

    /// Textual dump, one gate per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "QUBITS {}", self.n_qubits);
        for (i, l) in self.bit_labels.iter().enumerate() {
            let _ = writeln!(out, "BIT c{i} {l}");
        }
        for g in &self.gates {
            let _ = writeln!(out, "{g}");
        }
        out
    }
}

/// Per-gate-class error probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Depolarizing probability after each single-qubit gate. The channel is
    /// `ρ ↦ (1 - p)ρ + p·I/2`, so `p1 = 1` fully depolarizes.
    pub p1: f64,
    /// Two-qubit depolarizing probability `ρ ↦ (1 - p)ρ + p·I/4`.
    pub p2: f64,
    /// Classical flip probability of each recorded measurement.
    pub pm: f64,
    /// X-flip probability after each reset and after initial preparation.
    pub p_prep: f64,
}

impl NoiseModel {
    pub const NONE: NoiseModel = NoiseModel {
        p1: 0.0,
        p2: 0.0,
        pm: 0.0,
        p_prep: 0.0,
    };

    /// Stand-in error rates of a trapped-ion device; configuration values, not
    /// measured device data.
    pub const H1_LIKE: NoiseModel = NoiseModel {
        p1: 5e-5,
        p2: 2e-3,
        pm: 3e-3,
        p_prep: 3e-3,
    };

    pub fn preset(name: &str) -> Result<NoiseModel> {
        match name {
            "none" => Ok(Self::NONE),
            "h1-like" => Ok(Self::H1_LIKE),
            other => Err(Error::InvalidArgument(format!("unknown noise preset {other:?}"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("p1", self.p1),
            ("p2", self.p2),
            ("pm", self.pm),
            ("p_prep", self.p_prep),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!("{name} = {p} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        *self == Self::NONE
    }
}

/// Classical record of one shot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ShotRecord {
    pub bits: u64,
    pub n_bits: usize,
    pub seed: u64,
    pub shot: u64,
}

impl ShotRecord {
    pub fn bit(&self, i: usize) -> bool {
        (self.bits >> i) & 1 == 1
    }

    pub fn bit_vec(&self) -> Vec<u8> {
        (0..self.n_bits).map(|i| self.bit(i) as u8).collect()
    }

    /// Bits as text, classical bit 0 first.
    pub fn to_bit_string(&self) -> String {
        (0..self.n_bits).map(|i| if self.bit(i) { '1' } else { '0' }).collect()
    }
}

/// Exact outcome distribution keyed by packed classical bits.
pub type BranchDistribution = BTreeMap<u64, f64>;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Slot {
    Classical(bool),
    Quantum(usize),
}

/// Sparse-in-qubits register: qubits in a known basis state are held
/// classically, the rest in a dense vector. Position `p` of the dense part is
/// bit `p` of its index.
#[derive(Debug, Clone)]
pub struct Register {
    slots: Vec<Slot>,
    positions: Vec<usize>,
    amps: Vec<Complex64>,
}

type Mat2 = [[Complex64; 2]; 2];

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn gate_matrix(g: &Gate) -> Mat2 {
    let o = c(0.0, 0.0);
    let l = c(1.0, 0.0);
    match *g {
        Gate::H(_) => {
            let h = c(FRAC_1_SQRT_2, 0.0);
            [[h, h], [h, -h]]
        }
        Gate::S(_) => [[l, o], [o, c(0.0, 1.0)]],
        Gate::Sdg(_) => [[l, o], [o, c(0.0, -1.0)]],
        Gate::X(_) => Pauli::X.matrix(),
        Gate::Y(_) => Pauli::Y.matrix(),
        Gate::Z(_) => Pauli::Z.matrix(),
        Gate::Rx(_, t) => {
            let (s, co) = (t / 2.0).sin_cos();
            [[c(co, 0.0), c(0.0, -s)], [c(0.0, -s), c(co, 0.0)]]
        }
        Gate::Ry(_, t) => {
            let (s, co) = (t / 2.0).sin_cos();
            [[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]]
        }
        _ => unreachable!("not a single-qubit unitary"),
    }
}

impl Register {
    /// All qubits classical `|0⟩`.
    pub fn new(n_qubits: usize) -> Self {
        Register {
            slots: vec![Slot::Classical(false); n_qubits],
            positions: Vec::new(),
            amps: vec![c(1.0, 0.0)],
        }
    }

    pub fn from_state(state: &StateVector) -> Self {
        let n = state.n_qubits();
        // Qubit q is bit n-1-q of the state index, which is position n-1-q here.
        let slots = (0..n).map(|q| Slot::Quantum(n - 1 - q)).collect();
        let positions = (0..n).rev().collect();
        Register {
            slots,
            positions,
            amps: state.amplitudes().to_vec(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.slots.len()
    }

    pub fn active_qubits(&self) -> usize {
        self.positions.len()
    }

    /// Expands into a dense state vector under the crate's qubit ordering.
    pub fn to_state_vector(&self) -> StateVector {
        let n = self.n_qubits();
        let mut out = vec![c(0.0, 0.0); 1usize << n];
        let mut base = 0usize;
        for (q, s) in self.slots.iter().enumerate() {
            if let Slot::Classical(true) = s {
                base |= 1 << (n - 1 - q);
            }
        }
        for (i, a) in self.amps.iter().enumerate() {
            let mut idx = base;
            for (p, &q) in self.positions.iter().enumerate() {
                if (i >> p) & 1 == 1 {
                    idx |= 1 << (n - 1 - q);
                }
            }
            out[idx] = *a;
        }
        StateVector::from_amplitudes(out).expect("power-of-two length")
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn promote(&mut self, q: usize) -> usize {
        match self.slots[q] {
            Slot::Quantum(p) => p,
            Slot::Classical(b) => {
                let p = self.positions.len();
                let len = self.amps.len();
                let mut amps = vec![c(0.0, 0.0); 2 * len];
                let offset = if b { len } else { 0 };
                amps[offset..offset + len].copy_from_slice(&self.amps);
                self.amps = amps;
                self.positions.push(q);
                self.slots[q] = Slot::Quantum(p);
                p
            }
        }
    }

    fn apply_1q(&mut self, p: usize, m: &Mat2) {
        let stride = 1usize << p;
        let len = self.amps.len();
        let mut base = 0;
        while base < len {
            for i in base..base + stride {
                let a0 = self.amps[i];
                let a1 = self.amps[i + stride];
                self.amps[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amps[i + stride] = m[1][0] * a0 + m[1][1] * a1;
            }
            base += 2 * stride;
        }
    }

    /// Applies `m` to position `t` on the subspace where position `ctl` is 1.
    fn apply_controlled(&mut self, ctl: usize, t: usize, m: &Mat2) {
        let cm = 1usize << ctl;
        let tm = 1usize << t;
        for i in 0..self.amps.len() {
            if i & cm != 0 && i & tm == 0 {
                let j = i | tm;
                let a0 = self.amps[i];
                let a1 = self.amps[j];
                self.amps[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amps[j] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }

    fn single(&mut self, q: usize, g: &Gate) {
        match (self.slots[q], g) {
            (Slot::Classical(b), Gate::X(_) | Gate::Y(_)) => self.slots[q] = Slot::Classical(!b),
            (_, Gate::I(_)) | (Slot::Classical(_), Gate::Z(_)) => {}
            _ => {
                let p = self.promote(q);
                self.apply_1q(p, &gate_matrix(g));
            }
        }
    }

    /// Controlled Pauli `target_gate` with classical shortcuts where exact.
    fn controlled(&mut self, control: usize, target: usize, target_gate: Gate) {
        match self.slots[control] {
            Slot::Classical(false) => {}
            Slot::Classical(true) => self.single(target, &target_gate),
            Slot::Quantum(pc) => {
                if matches!(target_gate, Gate::Z(_)) {
                    if let Slot::Classical(b) = self.slots[target] {
                        if b {
                            self.apply_1q(pc, &gate_matrix(&Gate::Z(0)));
                        }
                        return;
                    }
                }
                let pt = self.promote(target);
                self.apply_controlled(pc, pt, &gate_matrix(&target_gate));
            }
        }
    }

    pub(crate) fn apply_unitary(&mut self, g: &Gate) {
        match *g {
            Gate::I(q)
            | Gate::H(q)
            | Gate::S(q)
            | Gate::Sdg(q)
            | Gate::X(q)
            | Gate::Y(q)
            | Gate::Z(q)
            | Gate::Rx(q, _)
            | Gate::Ry(q, _) => self.single(q, g),
            Gate::Cnot { control, target } => self.controlled(control, target, Gate::X(target)),
            Gate::Cy { control, target } => self.controlled(control, target, Gate::Y(target)),
            Gate::Cz(a, b) => {
                if let Slot::Classical(_) = self.slots[a] {
                    self.controlled(a, b, Gate::Z(b))
                } else {
                    self.controlled(b, a, Gate::Z(a))
                }
            }
            _ => unreachable!("not a unitary gate"),
        }
    }

    /// Probability of reading 0 and the total weight of the register.
    fn zero_probability(&self, q: usize) -> (f64, f64) {
        match self.slots[q] {
            Slot::Classical(b) => {
                let total = self.norm_sqr();
                (if b { 0.0 } else { total }, total)
            }
            Slot::Quantum(p) => {
                let m = 1usize << p;
                let (mut p0, mut p1) = (0.0, 0.0);
                for (i, a) in self.amps.iter().enumerate() {
                    if i & m == 0 {
                        p0 += a.norm_sqr();
                    } else {
                        p1 += a.norm_sqr();
                    }
                }
                (p0, p0 + p1)
            }
        }
    }

    /// Projects qubit `q` onto `outcome`, optionally renormalizing, and moves it
    /// to the classical part.
    fn collapse(&mut self, q: usize, outcome: bool, prob: f64, renormalize: bool) -> Result<()> {
        let Slot::Quantum(p) = self.slots[q] else {
            return Ok(());
        };
        if renormalize && prob < UNDERFLOW_GUARD {
            return Err(Error::Underflow(prob));
        }
        let scale = if renormalize { 1.0 / prob.sqrt() } else { 1.0 };
        let low = (1usize << p) - 1;
        let half = self.amps.len() / 2;
        let mut amps = Vec::with_capacity(half);
        for k in 0..half {
            let idx = (k & low) | ((k & !low) << 1) | ((outcome as usize) << p);
            amps.push(self.amps[idx] * scale);
        }
        self.amps = amps;
        self.positions.remove(p);
        for (pos, &qq) in self.positions.iter().enumerate().skip(p) {
            self.slots[qq] = Slot::Quantum(pos);
        }
        self.slots[q] = Slot::Classical(outcome);
        Ok(())
    }

    /// Samples a Z measurement of `q` using the uniform variate `u`.
    pub(crate) fn measure_with(&mut self, q: usize, u: f64) -> Result<bool> {
        let (p0, total) = self.zero_probability(q);
        let outcome = u * total >= p0;
        let prob = if outcome { total - p0 } else { p0 };
        self.collapse(q, outcome, prob / total, true)?;
        Ok(outcome)
    }

    pub(crate) fn set_classical(&mut self, q: usize, value: bool) {
        debug_assert!(matches!(self.slots[q], Slot::Classical(_)));
        self.slots[q] = Slot::Classical(value);
    }
}

/// Classical bit register used alongside a state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassicalBits(pub u64);

impl ClassicalBits {
    pub fn get(&self, i: usize) -> bool {
        (self.0 >> i) & 1 == 1
    }

    pub fn set(&mut self, i: usize, v: bool) {
        if v {
            self.0 |= 1 << i;
        } else {
            self.0 &= !(1 << i);
        }
    }
}

/// Applies one gate to a dense state. Measurement and reset draw their outcome
/// from `rng`; the measured bit is returned and written into `bits`.
pub fn apply_gate<R: Rng + ?Sized>(
    state: &mut StateVector,
    gate: &Gate,
    bits: &mut ClassicalBits,
    rng: &mut R,
) -> Result<Option<bool>> {
    for q in gate.qubits() {
        if q >= state.n_qubits() {
            return Err(Error::IndexOutOfRange {
                index: q,
                limit: state.n_qubits(),
            });
        }
    }
    let mut reg = Register::from_state(state);
    let out = step(&mut reg, gate, bits, &mut || rng.random::<f64>())?;
    *state = reg.to_state_vector();
    Ok(out)
}

/// Executes one gate on a register; `uniform` supplies measurement variates.
fn step(
    reg: &mut Register,
    gate: &Gate,
    bits: &mut ClassicalBits,
    uniform: &mut dyn FnMut() -> f64,
) -> Result<Option<bool>> {
    match *gate {
        Gate::Measure { qubit, bit } => {
            let b = reg.measure_with(qubit, uniform())?;
            bits.set(bit, b);
            Ok(Some(b))
        }
        Gate::Reset(q) => {
            reg.measure_with(q, uniform())?;
            reg.set_classical(q, false);
            Ok(None)
        }
        Gate::CondPauli { pauli, qubit, bit } => {
            if bits.get(bit) {
                if let Some(g) = Gate::pauli(pauli, qubit) {
                    reg.apply_unitary(&g);
                }
            }
            Ok(None)
        }
        Gate::FlipBit(b) => {
            bits.set(b, !bits.get(b));
            Ok(None)
        }
        ref g => {
            reg.apply_unitary(g);
            Ok(None)
        }
    }
}

const PAULIS: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

/// Applies a uniformly random Pauli on the support, identity included.
fn random_pauli_on(reg: &mut Register, qubits: &[usize], rng: &mut ChaCha8Rng) {
    let k = qubits.len() as u32;
    let choice = rng.random_range(0..4u32.pow(k));
    for (j, &q) in qubits.iter().enumerate() {
        let code = (choice >> (2 * j)) & 3;
        if code != 0 {
            let g = Gate::pauli(PAULIS[code as usize - 1], q).expect("non-identity");
            reg.apply_unitary(&g);
        }
    }
}

/// Per-shot random stream derived from `(seed, shot)`.
pub fn shot_rng(seed: u64, shot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shot);
    rng
}

/// Runs a single noisy trajectory.
pub fn run_single_shot(c: &Circuit, noise: &NoiseModel, seed: u64, shot: u64) -> Result<ShotRecord> {
    let mut rng = shot_rng(seed, shot);
    let mut reg = Register::new(c.n_qubits());
    let mut bits = ClassicalBits::default();
    if noise.p_prep > 0.0 {
        for q in 0..c.n_qubits() {
            if rng.random::<f64>() < noise.p_prep {
                reg.apply_unitary(&Gate::X(q));
            }
        }
    }
    for g in c.gates() {
        let mut draw = || rng.random::<f64>();
        step(&mut reg, g, &mut bits, &mut draw)?;
        match *g {
            Gate::Measure { bit, .. } => {
                if noise.pm > 0.0 && rng.random::<f64>() < noise.pm {
                    bits.set(bit, !bits.get(bit));
                }
            }
            Gate::Reset(q) => {
                if noise.p_prep > 0.0 && rng.random::<f64>() < noise.p_prep {
                    reg.apply_unitary(&Gate::X(q));
                }
            }
            Gate::FlipBit(_) => {}
            ref u if u.is_two_qubit() => {
                if noise.p2 > 0.0 && rng.random::<f64>() < noise.p2 {
                    random_pauli_on(&mut reg, &u.qubits(), &mut rng);
                }
            }
            ref u => {
                if noise.p1 > 0.0 && rng.random::<f64>() < noise.p1 {
                    random_pauli_on(&mut reg, &u.qubits(), &mut rng);
                }
            }
        }
    }
    Ok(ShotRecord {
        bits: bits.0,
        n_bits: c.n_bits(),
        seed,
        shot,
    })
}

/// Runs shots `first..first + count`; results are ordered by shot index and
/// independent of how rayon schedules them.
pub fn run_shot_range(c: &Circuit, noise: &NoiseModel, seed: u64, first: u64, count: u64) -> Result<Vec<ShotRecord>> {
    c.validate()?;
    noise.validate()?;
    (first..first + count)
        .into_par_iter()
        .map(|i| run_single_shot(c, noise, seed, i))
        .collect()
}

pub fn run_shots(c: &Circuit, noise: &NoiseModel, seed: u64, shots: u64) -> Result<Vec<ShotRecord>> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be at least 1".into()));
    }
    run_shot_range(c, noise, seed, 0, shots)
}

/// Exact outcome distribution of a noiseless circuit by depth-first branching on
/// every measurement and reset.
pub fn enumerate_branches(c: &Circuit) -> Result<BranchDistribution> {
    c.validate()?;
    let m = c.measurement_count();
    if m > BRANCH_CAP {
        return Err(Error::BranchCap {
            measurements: m,
            cap: BRANCH_CAP,
        });
    }
    let mut out = BranchDistribution::new();
    explore(
        c.gates(),
        Register::new(c.n_qubits()),
        ClassicalBits::default(),
        1.0,
        &mut out,
    )?;
    Ok(out)
}

fn explore(
    gates: &[Gate],
    mut reg: Register,
    mut bits: ClassicalBits,
    weight: f64,
    out: &mut BranchDistribution,
) -> Result<()> {
    for (i, g) in gates.iter().enumerate() {
        let q = match *g {
            Gate::Measure { qubit, .. } | Gate::Reset(qubit) => qubit,
            ref other => {
                step(&mut reg, other, &mut bits, &mut || 0.0)?;
                continue;
            }
        };
        let (p0, total) = reg.zero_probability(q);
        let p0 = p0 / total;
        let p1 = 1.0 - p0;
        let rest = &gates[i + 1..];
        let mut branch = |outcome: bool, p: f64, mut r: Register, mut b: ClassicalBits| -> Result<()> {
            r.collapse(q, outcome, p, true)?;
            match *g {
                Gate::Measure { bit, .. } => b.set(bit, outcome),
                _ => r.set_classical(q, false),
            }
            explore(rest, r, b, weight * p, out)
        };
        let take0 = weight * p0 > PRUNE_PROBABILITY;
        let take1 = weight * p1 > PRUNE_PROBABILITY;
        match (take0, take1) {
            (true, true) => {
                branch(false, p0, reg.clone(), bits)?;
                branch(true, p1, reg, bits)?;
            }
            (true, false) => branch(false, p0, reg, bits)?,
            (false, true) => branch(true, p1, reg, bits)?,
            (false, false) => {}
        }
        return Ok(());
    }
    *out.entry(bits.0).or_insert(0.0) += weight;
    Ok(())
}

/// Total-variation distance between two distributions over the same keys.
pub fn total_variation<K: Ord + Copy>(a: &BTreeMap<K, f64>, b: &BTreeMap<K, f64>) -> f64 {
    let mut keys: Vec<K> = a.keys().chain(b.keys()).copied().collect();
    keys.sort();
    keys.dedup();
    0.5 * keys
        .iter()
        .map(|k| (a.get(k).unwrap_or(&0.0) - b.get(k).unwrap_or(&0.0)).abs())
        .sum::<f64>()
}
