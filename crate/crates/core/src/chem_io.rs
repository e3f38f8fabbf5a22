//! Hamiltonian input formats and a diagnostic fermion-to-qubit mapping.
//!
//! The Pauli-term file is the canonical input of the pipeline:
//!
//! ```text
//! # comment
//! -1.99134     II
//! -0.02882925  XI
//! ```
//!
//! FCIDUMP files are read into a [`FermionIntegralTable`] for inspection and
//! for the Jordan–Wigner cross-check; they are never converted into a qubit
//! Hamiltonian behind the caller's back.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pauli::{ObservableSum, PauliString};

/// Parses `<coefficient> <word>` lines. `#` starts a comment; blank lines are skipped.
pub fn parse_pauli_hamiltonian(text: &str) -> Result<ObservableSum> {
    let mut sum: Option<ObservableSum> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw, '#').trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let (Some(coeff), Some(word), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::parse(line_no, "expected `<coefficient> <pauli word>`"));
        };
        let coeff: f64 = coeff
            .parse()
            .map_err(|_| Error::parse(line_no, format!("malformed coefficient {coeff:?}")))?;
        if !coeff.is_finite() {
            return Err(Error::parse(line_no, "non-finite coefficient"));
        }
        if word.starts_with(['+', '-', 'i']) {
            return Err(Error::parse(line_no, "Pauli words in files carry no sign"));
        }
        let p: PauliString = word.parse().map_err(|e| Error::parse(line_no, format!("{e}")))?;
        let sum = match &mut sum {
            Some(s) => s,
            None => sum.insert(ObservableSum::new(p.n_qubits()).map_err(|e| Error::parse(line_no, e.to_string()))?),
        };
        if p.n_qubits() != sum.n_qubits() {
            return Err(Error::parse(
                line_no,
                format!(
                    "word {word} has {} letters, previous words have {}",
                    p.n_qubits(),
                    sum.n_qubits()
                ),
            ));
        }
        sum.add_term(p, coeff)
            .map_err(|e| Error::parse(line_no, e.to_string()))?;
    }
    sum.ok_or_else(|| Error::parse(0, "no Hamiltonian terms found"))
}

/// Writes one term per line using the shortest round-trip representation of
/// each coefficient, so that [`parse_pauli_hamiltonian`] recovers the sum exactly.
pub fn emit_pauli_hamiltonian(h: &ObservableSum) -> String {
    let mut out = String::new();
    for (p, c) in h.terms() {
        let _ = writeln!(out, "{c:?} {p}");
    }
    out
}

/// How two-body lines of an FCIDUMP file are indexed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TwoBodyConvention {
    /// `value i j k l` is `(ij|kl)`.
    #[default]
    Chemists,
    /// `value i j k l` is `⟨ij|kl⟩ = (ik|jl)`.
    Physicists,
}

/// One- and two-body integrals of an active space. Two-body entries are
/// always held in chemists' notation `(pq|rs)`; indices are 1-based.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FermionIntegralTable {
    pub n_orbitals: usize,
    pub n_electrons: usize,
    pub ms2: i64,
    pub one_body: BTreeMap<(usize, usize), f64>,
    pub two_body: BTreeMap<(usize, usize, usize, usize), f64>,
    pub core_energy: f64,
}

const HERMITIAN_TOL: f64 = 1e-12;

impl FermionIntegralTable {
    /// Inserts `h_pq` and its transpose.
    pub fn set_one_body(&mut self, p: usize, q: usize, value: f64) -> Result<()> {
        self.check_index(p)?;
        self.check_index(q)?;
        self.one_body.insert((p, q), value);
        self.one_body.insert((q, p), value);
        Ok(())
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.n_orbitals {
            return Err(Error::IndexOutOfRange {
                index: i,
                limit: self.n_orbitals,
            });
        }
        Ok(())
    }

    /// Adds all eight real-orbital permutations of every two-body entry that
    /// are not already present.
    pub fn complete_two_body_symmetry(&mut self) {
        let entries: Vec<_> = self.two_body.iter().map(|(k, v)| (*k, *v)).collect();
        for ((p, q, r, s), v) in entries {
            for key in [
                (p, q, r, s),
                (q, p, r, s),
                (p, q, s, r),
                (q, p, s, r),
                (r, s, p, q),
                (s, r, p, q),
                (r, s, q, p),
                (s, r, q, p),
            ] {
                self.two_body.entry(key).or_insert(v);
            }
        }
    }

    /// `E_core + Σ h_pq a†_p a_q + ½ Σ (pq|rs) a†_p a†_r a_s a_q` over spatial
    /// orbitals treated as single fermionic modes.
    pub fn to_fermion_operator(&self) -> FermionOperator {
        let mut op = FermionOperator::default();
        if self.core_energy != 0.0 {
            op.add_term(Vec::new(), Complex64::new(self.core_energy, 0.0));
        }
        for (&(p, q), &v) in &self.one_body {
            op.add_term(vec![(p, true), (q, false)], Complex64::new(v, 0.0));
        }
        for (&(p, q, r, s), &v) in &self.two_body {
            op.add_term(
                vec![(p, true), (r, true), (s, false), (q, false)],
                Complex64::new(0.5 * v, 0.0),
            );
        }
        op
    }
}

/// Parses the FCIDUMP subset: a `&FCI … /` or `&FCI … &END` namelist header
/// (NORB and NELEC required, other keys read and ignored) followed by
/// `value i j k l` lines.
pub fn parse_fcidump(text: &str, convention: TwoBodyConvention) -> Result<FermionIntegralTable> {
    let lines: Vec<&str> = text.lines().collect();
    let mut header = String::new();
    let mut body_start = None;
    let mut in_header = false;
    for (idx, line) in lines.iter().enumerate() {
        let trimmed = line.trim();
        if !in_header {
            if trimmed.is_empty() {
                continue;
            }
            if !trimmed.to_ascii_uppercase().starts_with("&FCI") {
                return Err(Error::parse(idx + 1, "missing &FCI header"));
            }
            in_header = true;
            header.push_str(&trimmed[4..]);
        } else {
            header.push(' ');
            header.push_str(trimmed);
        }
        let upper = header.to_ascii_uppercase();
        if let Some(end) = upper.find("&END").or_else(|| upper.find('/')) {
            header.truncate(end);
            body_start = Some(idx + 1);
            break;
        }
    }
    let body_start = body_start.ok_or_else(|| Error::parse(lines.len(), "unterminated &FCI header"))?;
    let keys = parse_namelist(&header);
    let int_key = |k: &str| -> Result<Option<i64>> {
        match keys.get(k) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .next()
                .unwrap_or("")
                .trim()
                .parse::<i64>()
                .map(Some)
                .map_err(|_| Error::parse(1, format!("header key {k} is not an integer"))),
        }
    };
    let norb = int_key("NORB")?.ok_or_else(|| Error::parse(1, "header lacks NORB"))?;
    let nelec = int_key("NELEC")?.ok_or_else(|| Error::parse(1, "header lacks NELEC"))?;
    if norb <= 0 || nelec < 0 {
        return Err(Error::parse(1, "NORB must be positive and NELEC non-negative"));
    }
    let mut table = FermionIntegralTable {
        n_orbitals: norb as usize,
        n_electrons: nelec as usize,
        ms2: int_key("MS2")?.unwrap_or(0),
        ..Default::default()
    };

    let mut seen_one: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (idx, line) in lines.iter().enumerate().skip(body_start) {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(Error::parse(line_no, "expected `value i j k l`"));
        }
        let value: f64 = fields[0]
            .replace(['D', 'd'], "E")
            .parse()
            .map_err(|_| Error::parse(line_no, format!("non-numeric value {:?}", fields[0])))?;
        if !value.is_finite() {
            return Err(Error::parse(line_no, "non-finite value"));
        }
        let mut idxs = [0usize; 4];
        for (slot, f) in idxs.iter_mut().zip(&fields[1..]) {
            *slot = f
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad index {f:?}")))?;
            if *slot > table.n_orbitals {
                return Err(Error::parse(
                    line_no,
                    format!("index {} exceeds NORB = {}", slot, table.n_orbitals),
                ));
            }
        }
        match idxs {
            [0, 0, 0, 0] => table.core_energy = value,
            [i, j, 0, 0] if i != 0 && j != 0 => {
                if let Some(&prev) = seen_one.get(&(j, i)) {
                    if (prev - value).abs() > HERMITIAN_TOL {
                        return Err(Error::parse(
                            line_no,
                            format!("one-body ({i},{j}) = {value} contradicts ({j},{i}) = {prev}"),
                        ));
                    }
                }
                seen_one.insert((i, j), value);
            }
            [i, j, k, l] if i != 0 && j != 0 && k != 0 && l != 0 => {
                let key = match convention {
                    TwoBodyConvention::Chemists => (i, j, k, l),
                    TwoBodyConvention::Physicists => (i, k, j, l),
                };
                table.two_body.insert(key, value);
            }
            _ => return Err(Error::parse(line_no, format!("unsupported index pattern {idxs:?}"))),
        }
    }
    for ((i, j), v) in seen_one {
        table.one_body.insert((i, j), v);
        table.one_body.entry((j, i)).or_insert(v);
    }
    Ok(table)
}

/// Writes an FCIDUMP with 12 significant digits per value. One-body entries
/// are written for `p ≤ q` only; two-body entries in the requested convention.
pub fn emit_fcidump(table: &FermionIntegralTable, convention: TwoBodyConvention) -> String {
    let mut out = String::new();
    let orbsym = vec!["1"; table.n_orbitals].join(",");
    let _ = writeln!(
        out,
        " &FCI NORB={},NELEC={},MS2={},\n  ORBSYM={},\n  ISYM=1,\n &END",
        table.n_orbitals, table.n_electrons, table.ms2, orbsym
    );
    for (&(p, q, r, s), &v) in &table.two_body {
        let (i, j, k, l) = match convention {
            TwoBodyConvention::Chemists => (p, q, r, s),
            TwoBodyConvention::Physicists => (p, r, q, s),
        };
        let _ = writeln!(out, "{} {i:>4} {j:>4} {k:>4} {l:>4}", sig12(v));
    }
    for (&(p, q), &v) in &table.one_body {
        if p <= q {
            let _ = writeln!(out, "{} {p:>4} {q:>4} {:>4} {:>4}", sig12(v), 0, 0);
        }
    }
    let _ = writeln!(out, "{} {:>4} {:>4} {:>4} {:>4}", sig12(table.core_energy), 0, 0, 0, 0);
    out
}

fn sig12(v: f64) -> String {
    format!("{v:>20.11E}")
}

fn parse_namelist(header: &str) -> BTreeMap<String, String> {
    // Splits `KEY=v1,v2, KEY2=…` on the `=` signs.
    let mut out = BTreeMap::new();
    let parts: Vec<&str> = header.split('=').collect();
    let mut key = parts[0].trim().to_ascii_uppercase();
    for (n, part) in parts.iter().enumerate().skip(1) {
        let part = part.trim();
        let (value, next_key) = if n + 1 < parts.len() {
            match part.rfind([',', ' ']) {
                Some(pos) => (&part[..pos], part[pos + 1..].trim()),
                None => ("", part),
            }
        } else {
            (part, "")
        };
        out.insert(key.clone(), value.trim().trim_end_matches(',').to_string());
        key = next_key.to_ascii_uppercase();
    }
    out
}

fn strip_comment(line: &str, marker: char) -> &str {
    match line.find(marker) {
        Some(pos) => &line[..pos],
        None => line,
    }
}

/// Ladder operator: 1-based mode index and `true` for a creation operator.
pub type Ladder = (usize, bool);

/// Complex-weighted sum of products of ladder operators.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FermionOperator {
    terms: BTreeMap<Vec<Ladder>, Complex64>,
}

impl FermionOperator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_term(&mut self, ops: Vec<Ladder>, coeff: Complex64) {
        *self.terms.entry(ops).or_insert(Complex64::new(0.0, 0.0)) += coeff;
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[Ladder], Complex64)> {
        self.terms.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    pub fn max_mode(&self) -> usize {
        self.terms
            .keys()
            .flat_map(|k| k.iter().map(|&(m, _)| m))
            .max()
            .unwrap_or(0)
    }

    /// Product `self · other`.
    pub fn mul(&self, other: &FermionOperator) -> FermionOperator {
        let mut out = FermionOperator::default();
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                let mut ops = a.clone();
                ops.extend_from_slice(b);
                out.add_term(ops, ca * cb);
            }
        }
        out
    }

    /// Hermitian adjoint.
    pub fn adjoint(&self) -> FermionOperator {
        let mut out = FermionOperator::default();
        for (ops, c) in &self.terms {
            let rev: Vec<Ladder> = ops.iter().rev().map(|&(m, d)| (m, !d)).collect();
            out.add_term(rev, c.conj());
        }
        out
    }
}

/// Pauli sum with complex coefficients; the intermediate result of a mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexPauliSum {
    pub n_qubits: usize,
    pub terms: BTreeMap<PauliString, Complex64>,
}

impl ComplexPauliSum {
    fn new(n_qubits: usize) -> Self {
        ComplexPauliSum {
            n_qubits,
            terms: BTreeMap::new(),
        }
    }

    fn add(&mut self, p: PauliString, c: Complex64) {
        let c = c * p.phase();
        *self.terms.entry(p.unsigned()).or_insert(Complex64::new(0.0, 0.0)) += c;
    }

    fn mul(&self, other: &ComplexPauliSum) -> Result<ComplexPauliSum> {
        let mut out = ComplexPauliSum::new(self.n_qubits);
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                out.add(a.mul(b)?, ca * cb);
            }
        }
        Ok(out)
    }

    pub fn prune(&mut self, tol: f64) {
        self.terms.retain(|_, c| c.norm() > tol);
    }

    /// Converts to a real [`ObservableSum`], failing if any imaginary part exceeds `tol`.
    pub fn to_observable(&self, tol: f64) -> Result<ObservableSum> {
        let mut out = ObservableSum::new(self.n_qubits)?;
        for (p, c) in &self.terms {
            if c.im.abs() > tol {
                return Err(Error::UnsupportedObservable(format!(
                    "coefficient of {p} has imaginary part {:e}",
                    c.im
                )));
            }
            if c.re.abs() > tol {
                out.add_term(*p, c.re)?;
            }
        }
        if out.is_empty() {
            out.add_term(PauliString::identity(self.n_qubits)?, 0.0)?;
        }
        Ok(out)
    }

    pub fn to_matrix(&self) -> Result<nalgebra::DMatrix<Complex64>> {
        crate::pauli::check_dense(self.n_qubits, crate::pauli::DENSE_LIMIT)?;
        let dim = 1usize << self.n_qubits;
        let mut m = nalgebra::DMatrix::zeros(dim, dim);
        for (p, c) in &self.terms {
            for col in 0..dim {
                let (ph, row) = p.act_on_basis(col);
                m[(row, col)] += ph * c;
            }
        }
        Ok(m)
    }
}

/// Jordan–Wigner image of a single ladder operator:
/// `a_p → ½ (X_p + i Y_p) ⊗ Z` on all modes before `p` (creation uses `-i`).
fn jw_ladder(mode: usize, creation: bool, n_modes: usize) -> Result<ComplexPauliSum> {
    if mode == 0 || mode > n_modes {
        return Err(Error::IndexOutOfRange {
            index: mode,
            limit: n_modes,
        });
    }
    let q = mode - 1;
    let mut z_string = PauliString::identity(n_modes)?;
    for k in 0..q {
        z_string = z_string.mul(&PauliString::single(n_modes, k, crate::pauli::Pauli::Z)?)?;
    }
    let x = z_string.mul(&PauliString::single(n_modes, q, crate::pauli::Pauli::X)?)?;
    let y = z_string.mul(&PauliString::single(n_modes, q, crate::pauli::Pauli::Y)?)?;
    let sign = if creation { -1.0 } else { 1.0 };
    let mut out = ComplexPauliSum::new(n_modes);
    out.add(x, Complex64::new(0.5, 0.0));
    out.add(y, Complex64::new(0.0, 0.5 * sign));
    Ok(out)
}

pub fn jordan_wigner(op: &FermionOperator, n_modes: usize) -> Result<ComplexPauliSum> {
    if n_modes == 0 {
        return Err(Error::InvalidArgument("zero modes".into()));
    }
    let mut out = ComplexPauliSum::new(n_modes);
    for (ops, coeff) in op.terms() {
        let mut acc = ComplexPauliSum::new(n_modes);
        acc.add(PauliString::identity(n_modes)?, coeff);
        for &(mode, creation) in ops {
            acc = acc.mul(&jw_ladder(mode, creation, n_modes)?)?;
        }
        for (p, c) in acc.terms {
            out.add(p, c);
        }
    }
    out.prune(1e-15);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::Pauli;

    const H2_HAMILTONIAN: &str = "\
-1.99134 II
-0.02882925 XI
-0.02882925 IX
0.0541175 ZI
0.0541175 IZ
0.01495595 XX
0.000151287 XZ
0.000151287 ZX
0.05900925 ZZ
";

    #[test]
    fn parses_h2_hamiltonian() {
        let h = parse_pauli_hamiltonian(H2_HAMILTONIAN).unwrap();
        assert_eq!(h.n_qubits(), 2);
        assert_eq!(h.len(), 9);
        assert_eq!(h.coefficient(&"XZ".parse().unwrap()), 0.000151287);
    }

    #[test]
    fn single_term_and_merge() {
        let h = parse_pauli_hamiltonian("1.0 Z").unwrap();
        assert_eq!(h.n_qubits(), 1);
        assert_eq!(h.len(), 1);
        let h = parse_pauli_hamiltonian("0.5 XX\n0.5 XX").unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(h.coefficient(&"XX".parse().unwrap()), 1.0);
    }

    #[test]
    fn comments_and_blank_lines() {
        let h = parse_pauli_hamiltonian("# header\n\n 2.0 ZI # trailing\n").unwrap();
        assert_eq!(h.coefficient(&"ZI".parse().unwrap()), 2.0);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_pauli_hamiltonian("1.0 XX\nabc ZZ").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_pauli_hamiltonian("1.0 XX\n\n1.0 ZZZ").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert!(matches!(
            parse_pauli_hamiltonian("# nothing\n"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_pauli_hamiltonian("1.0 XQ"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    const H2_FCIDUMP: &str = "\
 &FCI NORB=2,NELEC=2,MS2=0,
  ORBSYM=1,1,
  ISYM=1,
 &END
  0.303   1 1 1 1
  0.002   1 2 1 1
  0.175   1 1 2 2
  0.015   1 2 1 2
  0.002   1 2 2 2
  0.283   2 2 2 2
 -1.172   1 1 0 0
 -0.031   2 1 0 0
 -1.054   2 2 0 0
";

    #[test]
    fn parses_fcidump_subset() {
        let t = parse_fcidump(H2_FCIDUMP, TwoBodyConvention::Chemists).unwrap();
        assert_eq!(t.n_orbitals, 2);
        assert_eq!(t.n_electrons, 2);
        assert_eq!(t.one_body[&(1, 1)], -1.172);
        assert_eq!(t.one_body[&(1, 2)], -0.031);
        assert_eq!(t.one_body[&(2, 1)], -0.031);
        assert_eq!(t.two_body[&(1, 1, 2, 2)], 0.175);
        assert_eq!(t.two_body.len(), 6);
        assert_eq!(t.core_energy, 0.0);
    }

    #[test]
    fn slash_terminated_header_and_fortran_exponents() {
        let t = parse_fcidump(
            "&FCI NORB=1, NELEC=1 /\n 1.5D-01 1 1 0 0\n 2.0 0 0 0 0\n",
            TwoBodyConvention::Chemists,
        )
        .unwrap();
        assert_eq!(t.one_body[&(1, 1)], 0.15);
        assert_eq!(t.core_energy, 2.0);
    }

    #[test]
    fn zero_body_only() {
        let t = parse_fcidump("&FCI NORB=2,NELEC=2 &END\n 0.0 0 0 0 0\n", TwoBodyConvention::Chemists).unwrap();
        assert_eq!(t.core_energy, 0.0);
        assert!(t.one_body.is_empty() && t.two_body.is_empty());
    }

    #[test]
    fn fcidump_errors() {
        let no_header = parse_fcidump(" 1.0 1 1 0 0\n", TwoBodyConvention::Chemists);
        assert!(matches!(no_header, Err(Error::Parse { line: 1, .. })));
        let no_norb = parse_fcidump("&FCI NELEC=2 &END\n", TwoBodyConvention::Chemists);
        assert!(no_norb.is_err());
        let out_of_range = parse_fcidump("&FCI NORB=2,NELEC=2 &END\n 1.0 3 1 0 0\n", TwoBodyConvention::Chemists);
        assert!(matches!(out_of_range, Err(Error::Parse { line: 2, .. })));
        let non_numeric = parse_fcidump(
            "&FCI NORB=2,NELEC=2 &END\n 1.0 1 1 0 0\n x 1 1 0 0\n",
            TwoBodyConvention::Chemists,
        );
        assert!(matches!(non_numeric, Err(Error::Parse { line: 3, .. })));
        let non_hermitian = parse_fcidump(
            "&FCI NORB=2,NELEC=2 &END\n 1.0 1 2 0 0\n 2.0 2 1 0 0\n",
            TwoBodyConvention::Chemists,
        );
        assert!(matches!(non_hermitian, Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn physicists_flag_reorders_indices() {
        let t = parse_fcidump(
            "&FCI NORB=2,NELEC=2 &END\n 0.5 1 2 1 2\n",
            TwoBodyConvention::Physicists,
        )
        .unwrap();
        assert_eq!(t.two_body[&(1, 1, 2, 2)], 0.5);
        let back = parse_fcidump(
            &emit_fcidump(&t, TwoBodyConvention::Physicists),
            TwoBodyConvention::Physicists,
        )
        .unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn emitted_table_reparses_identically() {
        let t = parse_fcidump(H2_FCIDUMP, TwoBodyConvention::Chemists).unwrap();
        let text = emit_fcidump(&t, TwoBodyConvention::Chemists);
        assert_eq!(parse_fcidump(&text, TwoBodyConvention::Chemists).unwrap(), t);
    }

    fn jw_of(terms: &[(&[Ladder], f64)], n: usize) -> ObservableSum {
        let mut op = FermionOperator::new();
        for (ops, c) in terms {
            op.add_term(ops.to_vec(), Complex64::new(*c, 0.0));
        }
        jordan_wigner(&op, n).unwrap().to_observable(1e-12).unwrap()
    }

    #[test]
    fn number_operator() {
        let h = jw_of(&[(&[(1, true), (1, false)], 1.0)], 2);
        let expected = ObservableSum::from_terms([(0.5, "II"), (-0.5, "ZI")]).unwrap();
        assert_eq!(h, expected);
    }

    #[test]
    fn hopping_term() {
        let h = jw_of(&[(&[(1, true), (2, false)], 1.0), (&[(2, true), (1, false)], 1.0)], 2);
        let expected = ObservableSum::from_terms([(0.5, "XX"), (0.5, "YY")]).unwrap();
        assert_eq!(h, expected);
    }

    #[test]
    fn constant_term() {
        let h = jw_of(&[(&[], 1.0)], 2);
        assert_eq!(h, ObservableSum::from_terms([(1.0, "II")]).unwrap());
    }

    #[test]
    fn mode_overflow() {
        let mut op = FermionOperator::new();
        op.add_term(vec![(3, true)], Complex64::new(1.0, 0.0));
        assert!(matches!(
            jordan_wigner(&op, 2),
            Err(Error::IndexOutOfRange { index: 3, .. })
        ));
    }

    #[test]
    fn symmetric_table_maps_to_real_sum() {
        let mut t = parse_fcidump(H2_FCIDUMP, TwoBodyConvention::Chemists).unwrap();
        t.complete_two_body_symmetry();
        let op = t.to_fermion_operator();
        let mapped = jordan_wigner(&op, t.n_orbitals).unwrap();
        let h = mapped.to_observable(1e-12).unwrap();
        let m = h.to_matrix().unwrap();
        let number = ObservableSum::from_terms([(1.0, "II"), (-0.5, "ZI"), (-0.5, "IZ")])
            .unwrap()
            .to_matrix()
            .unwrap();
        let comm = &m * &number - &number * &m;
        assert!(comm.iter().all(|z| z.norm() < 1e-12));
        // The diagnostic mapping conserves particle number, so it cannot produce
        // the single-X terms of the canonical qubit Hamiltonian.
        assert_eq!(h.coefficient(&PauliString::single(2, 0, Pauli::X).unwrap()), 0.0);
    }
}
