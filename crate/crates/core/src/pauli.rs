//! Multi-qubit Pauli algebra, real-weighted Pauli sums and dense state vectors.
//!
//! Qubit convention used throughout the crate: qubit 1 is the leftmost letter
//! of a Pauli word and the most significant bit of a basis-state index. In
//! code, qubits are 0-based, so qubit `q` of an `n`-qubit register owns bit
//! `n - 1 - q` of the index.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest register that may be expanded into a dense matrix.
pub const DENSE_LIMIT: usize = 12;

/// Pauli words are bit-packed into `u64` masks.
pub const MAX_PAULI_QUBITS: usize = 64;

const NORM_TOL: f64 = 1e-10;

/// Single-qubit Pauli letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    /// 2×2 matrix of the letter.
    pub fn matrix(self) -> [[Complex64; 2]; 2] {
        let o = Complex64::new(0.0, 0.0);
        let l = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        match self {
            Pauli::I => [[l, o], [o, l]],
            Pauli::X => [[o, l], [l, o]],
            Pauli::Y => [[o, -i], [i, o]],
            Pauli::Z => [[l, o], [o, -l]],
        }
    }
}

/// Signed multi-qubit Pauli operator `i^phase · P_1 ⊗ … ⊗ P_n`.
///
/// Letters are stored as an X mask and a Z mask (Y sets both); the phase is an
/// exponent of `i` modulo 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliString {
    n_qubits: usize,
    x: u64,
    z: u64,
    phase: u8,
}

impl PauliString {
    pub fn identity(n_qubits: usize) -> Result<Self> {
        check_width(n_qubits)?;
        Ok(PauliString {
            n_qubits,
            x: 0,
            z: 0,
            phase: 0,
        })
    }

    pub fn from_letters(letters: &[Pauli]) -> Result<Self> {
        let n = letters.len();
        check_width(n)?;
        let mut p = PauliString::identity(n)?;
        for (q, &l) in letters.iter().enumerate() {
            p.set(q, l);
        }
        Ok(p)
    }

    /// A single letter on qubit `q` of an `n`-qubit register.
    pub fn single(n_qubits: usize, q: usize, letter: Pauli) -> Result<Self> {
        let mut p = PauliString::identity(n_qubits)?;
        if q >= n_qubits {
            return Err(Error::IndexOutOfRange {
                index: q,
                limit: n_qubits,
            });
        }
        p.set(q, letter);
        Ok(p)
    }

    pub fn from_masks(n_qubits: usize, x: u64, z: u64) -> Result<Self> {
        check_width(n_qubits)?;
        let m = full_mask(n_qubits);
        if (x | z) & !m != 0 {
            return Err(Error::InvalidArgument(format!(
                "mask bits outside a {n_qubits}-qubit word"
            )));
        }
        Ok(PauliString {
            n_qubits,
            x,
            z,
            phase: 0,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    /// Phase as an exponent of `i` in `0..4`.
    pub fn phase_exponent(&self) -> u8 {
        self.phase
    }

    pub fn phase(&self) -> Complex64 {
        i_pow(self.phase)
    }

    pub fn with_phase(mut self, exponent: u8) -> Self {
        self.phase = exponent % 4;
        self
    }

    /// The same letters with phase `+1`.
    pub fn unsigned(self) -> Self {
        self.with_phase(0)
    }

    fn bit(&self, q: usize) -> u64 {
        1u64 << (self.n_qubits - 1 - q)
    }

    fn set(&mut self, q: usize, letter: Pauli) {
        let b = self.bit(q);
        let (x, z) = letter.bits();
        self.x = if x { self.x | b } else { self.x & !b };
        self.z = if z { self.z | b } else { self.z & !b };
    }

    pub fn letter(&self, q: usize) -> Pauli {
        let b = self.bit(q);
        Pauli::from_bits(self.x & b != 0, self.z & b != 0)
    }

    pub fn letters(&self) -> Vec<Pauli> {
        (0..self.n_qubits).map(|q| self.letter(q)).collect()
    }

    /// Number of non-identity letters.
    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// Group product `self · other`, phase included.
    pub fn mul(&self, other: &PauliString) -> Result<PauliString> {
        check_same(self.n_qubits, other.n_qubits)?;
        let x = self.x ^ other.x;
        let z = self.z ^ other.z;
        // Each letter is i^{x·z} X^x Z^z; moving Z^{z1} past X^{x2} costs (-1)^{|z1 & x2|}.
        let y1 = (self.x & self.z).count_ones();
        let y2 = (other.x & other.z).count_ones();
        let y3 = (x & z).count_ones();
        let swap = (self.z & other.x).count_ones();
        let e = self.phase as u32 + other.phase as u32 + y1 + y2 + 2 * swap + 4 * 64 - y3;
        Ok(PauliString {
            n_qubits: self.n_qubits,
            x,
            z,
            phase: (e % 4) as u8,
        })
    }

    pub fn commutes(&self, other: &PauliString) -> Result<bool> {
        check_same(self.n_qubits, other.n_qubits)?;
        let anti = (self.x & other.z).count_ones() + (self.z & other.x).count_ones();
        Ok(anti.is_multiple_of(2))
    }

    /// Applies the operator to basis state `index`: returns `(coefficient, image index)`.
    #[inline]
    pub fn act_on_basis(&self, index: usize) -> (Complex64, usize) {
        let y = (self.x & self.z).count_ones();
        let sign = (index as u64 & self.z).count_ones();
        let e = (self.phase as u32 + y + 2 * sign) % 4;
        (i_pow(e as u8), index ^ self.x as usize)
    }

    /// Dense `2^n × 2^n` matrix.
    pub fn to_matrix(&self) -> Result<DMatrix<Complex64>> {
        check_dense(self.n_qubits, DENSE_LIMIT)?;
        let dim = 1usize << self.n_qubits;
        let mut m = DMatrix::zeros(dim, dim);
        for col in 0..dim {
            let (c, row) = self.act_on_basis(col);
            m[(row, col)] += c;
        }
        Ok(m)
    }
}

impl Ord for PauliString {
    fn cmp(&self, other: &Self) -> Ordering {
        self.n_qubits
            .cmp(&other.n_qubits)
            .then_with(|| self.letters().cmp(&other.letters()))
            .then_with(|| self.phase.cmp(&other.phase))
    }
}

impl PartialOrd for PauliString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.phase {
            0 => "",
            1 => "i",
            2 => "-",
            _ => "-i",
        };
        f.write_str(prefix)?;
        for l in self.letters() {
            write!(f, "{}", l.as_char())?;
        }
        Ok(())
    }
}

impl serde::Serialize for PauliString {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for PauliString {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = <std::borrow::Cow<'de, str>>::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

impl FromStr for PauliString {
    type Err = Error;

    /// Parses an optional sign prefix (`+`, `-`, `i`, `+i`, `-i`) followed by letters.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (phase, body) = if let Some(rest) = s.strip_prefix("-i") {
            (3, rest)
        } else if let Some(rest) = s.strip_prefix("+i") {
            (1, rest)
        } else if let Some(rest) = s.strip_prefix('i') {
            (1, rest)
        } else if let Some(rest) = s.strip_prefix('-') {
            (2, rest)
        } else if let Some(rest) = s.strip_prefix('+') {
            (0, rest)
        } else {
            (0, s)
        };
        if body.is_empty() {
            return Err(Error::InvalidArgument("empty Pauli word".into()));
        }
        let letters = body
            .chars()
            .map(|c| Pauli::from_char(c).ok_or_else(|| Error::InvalidArgument(format!("bad Pauli letter {c:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(PauliString::from_letters(&letters)?.with_phase(phase))
    }
}

/// Real-weighted sum of un-phased Pauli words; Hermitian by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSum {
    n_qubits: usize,
    terms: BTreeMap<PauliString, f64>,
}

impl ObservableSum {
    pub fn new(n_qubits: usize) -> Result<Self> {
        check_width(n_qubits)?;
        if n_qubits == 0 {
            return Err(Error::InvalidArgument("zero-qubit observable".into()));
        }
        Ok(ObservableSum {
            n_qubits,
            terms: BTreeMap::new(),
        })
    }

    /// Builds a sum from `(coefficient, word)` pairs, merging duplicates.
    pub fn from_terms<'a, I>(terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, &'a str)>,
    {
        let mut out: Option<ObservableSum> = None;
        for (c, w) in terms {
            let p: PauliString = w.parse()?;
            let sum = match &mut out {
                Some(s) => s,
                None => out.insert(ObservableSum::new(p.n_qubits())?),
            };
            sum.add_term(p, c)?;
        }
        out.ok_or(Error::EmptyData)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Adds `coeff · word`. A phased word must carry a real phase (±1), which is
    /// folded into the coefficient.
    pub fn add_term(&mut self, word: PauliString, coeff: f64) -> Result<()> {
        check_same(self.n_qubits, word.n_qubits())?;
        if !coeff.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite coefficient for {word}")));
        }
        let sign = match word.phase_exponent() {
            0 => 1.0,
            2 => -1.0,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "imaginary phase on {word} breaks hermiticity"
                )))
            }
        };
        *self.terms.entry(word.unsigned()).or_insert(0.0) += sign * coeff;
        Ok(())
    }

    pub fn terms(&self) -> impl Iterator<Item = (&PauliString, f64)> {
        self.terms.iter().map(|(p, &c)| (p, c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, word: &PauliString) -> f64 {
        self.terms.get(&word.unsigned()).copied().unwrap_or(0.0)
    }

    /// `alpha · self + beta · other`.
    pub fn linear_combination(&self, alpha: f64, other: &ObservableSum, beta: f64) -> Result<Self> {
        check_same(self.n_qubits, other.n_qubits)?;
        let mut out = ObservableSum::new(self.n_qubits)?;
        for (p, c) in self.terms() {
            out.add_term(*p, alpha * c)?;
        }
        for (p, c) in other.terms() {
            out.add_term(*p, beta * c)?;
        }
        Ok(out)
    }

    pub fn to_matrix(&self) -> Result<DMatrix<Complex64>> {
        self.to_matrix_with_limit(DENSE_LIMIT)
    }

    pub fn to_matrix_with_limit(&self, limit: usize) -> Result<DMatrix<Complex64>> {
        check_dense(self.n_qubits, limit)?;
        let dim = 1usize << self.n_qubits;
        let mut m = DMatrix::zeros(dim, dim);
        for (p, c) in self.terms() {
            for col in 0..dim {
                let (ph, row) = p.act_on_basis(col);
                m[(row, col)] += ph * c;
            }
        }
        Ok(m)
    }
}

/// Dense amplitude vector over `n_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// `|0…0⟩`.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::basis(n_qubits, 0)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        check_dense(n_qubits, 30)?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::IndexOutOfRange { index, limit: dim });
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(StateVector { n_qubits, amplitudes })
    }

    /// Wraps raw amplitudes; the length must be a power of two. Normalization is
    /// not enforced here, see [`StateVector::is_normalized`].
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "amplitude count {len} is not a power of two ≥ 2"
            )));
        }
        Ok(StateVector {
            n_qubits: len.trailing_zeros() as usize,
            amplitudes,
        })
    }

    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        Self::from_amplitudes(amplitudes.iter().map(|&a| Complex64::new(a, 0.0)).collect())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_TOL
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::NotNormalized { norm_sqr: n * n });
        }
        for a in &mut self.amplitudes {
            *a /= n;
        }
        Ok(self)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        check_same(self.n_qubits, other.n_qubits)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    pub fn apply_pauli(&self, p: &PauliString) -> Result<StateVector> {
        check_same(self.n_qubits, p.n_qubits())?;
        let mut out = vec![Complex64::new(0.0, 0.0); self.amplitudes.len()];
        for (j, a) in self.amplitudes.iter().enumerate() {
            let (c, k) = p.act_on_basis(j);
            out[k] += c * a;
        }
        Ok(StateVector {
            n_qubits: self.n_qubits,
            amplitudes: out,
        })
    }

    /// Born probabilities of the computational basis states.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// `⟨ψ|P|ψ⟩` for a single (possibly phased) Pauli; complex in general.
pub fn pauli_expectation(psi: &StateVector, p: &PauliString) -> Result<Complex64> {
    check_same(psi.n_qubits(), p.n_qubits())?;
    let amps = psi.amplitudes();
    let mut acc = Complex64::new(0.0, 0.0);
    for (j, a) in amps.iter().enumerate() {
        let (c, k) = p.act_on_basis(j);
        acc += amps[k].conj() * c * a;
    }
    Ok(acc)
}

/// `⟨ψ|H|ψ⟩` for a normalized state.
pub fn expectation(psi: &StateVector, h: &ObservableSum) -> Result<f64> {
    check_same(h.n_qubits(), psi.n_qubits())?;
    if !psi.is_normalized() {
        return Err(Error::NotNormalized {
            norm_sqr: psi.norm_sqr(),
        });
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (p, c) in h.terms() {
        acc += pauli_expectation(psi, p)? * c;
    }
    if acc.im.abs() > NORM_TOL {
        return Err(Error::InvalidArgument(format!(
            "expectation has imaginary residual {:e}",
            acc.im
        )));
    }
    Ok(acc.re)
}

pub fn pauli_mul(a: &PauliString, b: &PauliString) -> Result<PauliString> {
    a.mul(b)
}

pub fn commutes(a: &PauliString, b: &PauliString) -> Result<bool> {
    a.commutes(b)
}

pub fn to_matrix(h: &ObservableSum) -> Result<DMatrix<Complex64>> {
    h.to_matrix()
}

pub(crate) fn i_pow(e: u8) -> Complex64 {
    match e % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

fn full_mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

fn check_width(n: usize) -> Result<()> {
    if n > MAX_PAULI_QUBITS {
        return Err(Error::Capacity {
            n_qubits: n,
            limit: MAX_PAULI_QUBITS,
        });
    }
    Ok(())
}

pub(crate) fn check_same(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::Dimension { expected, found });
    }
    Ok(())
}

pub(crate) fn check_dense(n: usize, limit: usize) -> Result<()> {
    if n > limit {
        return Err(Error::Capacity { n_qubits: n, limit });
    }
    Ok(())
}
