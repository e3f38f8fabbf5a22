//! Exact ground states of small qubit Hamiltonians and the two-qubit
//! real ansatz `R_Y(γ)₂ · CNOT₁₂ · (R_Y(α) ⊗ R_Y(β)) |00⟩`.

use std::f64::consts::{PI, TAU};

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{check_dense, ObservableSum, StateVector, DENSE_LIMIT};

const DEGENERACY_GAP: f64 = 1e-8;
const REAL_TOL: f64 = 1e-9;
const FIDELITY_TOL: f64 = 1e-9;

/// Minimum eigenpair of a Hamiltonian.
#[derive(Debug, Clone)]
pub struct GroundSolution {
    pub energy: f64,
    pub state: StateVector,
    /// Set when the gap to the next eigenvalue is below `1e-8`; the returned
    /// eigenvector is then an arbitrary member of the ground space.
    pub degeneracy_flag: bool,
    /// `‖H·state − energy·state‖₂`.
    pub residual: f64,
    pub spectral_gap: f64,
}

pub fn ground_state(h: &ObservableSum) -> Result<GroundSolution> {
    check_dense(h.n_qubits(), DENSE_LIMIT)?;
    let m = h.to_matrix()?;
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let k = order[0];
    let energy = eig.eigenvalues[k];
    let spectral_gap = order
        .get(1)
        .map(|&j| eig.eigenvalues[j] - energy)
        .unwrap_or(f64::INFINITY);

    let mut amps: Vec<Complex64> = eig.eigenvectors.column(k).iter().copied().collect();
    fix_phase(&mut amps);
    let state = StateVector::from_amplitudes(amps)?.normalized()?;

    let v = nalgebra::DVector::from_column_slice(state.amplitudes());
    let residual = (&m * &v - &v * Complex64::new(energy, 0.0)).norm();

    Ok(GroundSolution {
        energy,
        state,
        degeneracy_flag: spectral_gap < DEGENERACY_GAP,
        residual,
        spectral_gap,
    })
}

/// Rotates the global phase so the largest-magnitude amplitude is real and positive.
/// Ties go to the lowest index.
pub fn fix_phase(amps: &mut [Complex64]) {
    let mut best = 0;
    for (i, a) in amps.iter().enumerate() {
        if a.norm() > amps[best].norm() + 1e-12 {
            best = i;
        }
    }
    let pivot = amps[best];
    if pivot.norm() == 0.0 {
        return;
    }
    let rot = pivot.conj() / pivot.norm();
    for a in amps.iter_mut() {
        *a *= rot;
    }
}

/// Rotation angles of the two-qubit ansatz, each reported in `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrepAngles {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl PrepAngles {
    pub const REFERENCE: PrepAngles = PrepAngles {
        alpha: 2.08293,
        beta: 2.04776,
        gamma: 0.81221,
    };

    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        PrepAngles { alpha, beta, gamma }
    }

    /// Same angles reduced to `[0, 2π)`. Shifting an angle by 2π only flips
    /// the global sign of the prepared state.
    pub fn canonical(self) -> Self {
        PrepAngles {
            alpha: wrap(self.alpha),
            beta: wrap(self.beta),
            gamma: wrap(self.gamma),
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.alpha, self.beta, self.gamma]
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|a| a.is_finite())
    }
}

fn wrap(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Real amplitudes of the ansatz output:
/// `(cα cos((β+γ)/2), cα sin((β+γ)/2), sα sin((β−γ)/2), sα cos((β−γ)/2))`
/// with `cα = cos(α/2)`, `sα = sin(α/2)`.
fn ansatz_amplitudes(a: &PrepAngles) -> [f64; 4] {
    let (sa, ca) = (a.alpha / 2.0).sin_cos();
    let u = (a.beta + a.gamma) / 2.0;
    let v = (a.beta - a.gamma) / 2.0;
    [ca * u.cos(), ca * u.sin(), sa * v.sin(), sa * v.cos()]
}

pub fn prepare_state(angles: &PrepAngles) -> StateVector {
    StateVector::from_real(&ansatz_amplitudes(angles)).expect("four amplitudes")
}

/// Inverts the ansatz for a real two-qubit target.
///
/// The qubit-1 split fixes `α`; the two qubit-2 conditional directions fix
/// `β + γ` and `β − γ`. The closed form reproduces any real target exactly, so
/// the coordinate refinement only runs if rounding leaves the fidelity short.
pub fn solve_prep_angles(target: &StateVector) -> Result<PrepAngles> {
    if target.n_qubits() != 2 {
        return Err(Error::Dimension {
            expected: 2,
            found: target.n_qubits(),
        });
    }
    if !target.is_normalized() {
        return Err(Error::NotNormalized {
            norm_sqr: target.norm_sqr(),
        });
    }
    let mut amps = target.amplitudes().to_vec();
    fix_phase(&mut amps);
    if let Some(a) = amps.iter().find(|a| a.im.abs() > REAL_TOL) {
        return Err(Error::UnsupportedState(format!(
            "ansatz is real but target has imaginary amplitude {a}"
        )));
    }
    let t: Vec<f64> = amps.iter().map(|a| a.re).collect();

    let r0 = t[0].hypot(t[1]);
    let r1 = t[2].hypot(t[3]);
    let alpha = 2.0 * r1.atan2(r0);
    let u = if r0 > 0.0 { t[1].atan2(t[0]) } else { 0.0 };
    let v = if r1 > 0.0 { t[2].atan2(t[3]) } else { 0.0 };
    let mut angles = PrepAngles::new(alpha, u + v, u - v);

    if fidelity_real(&t, &angles) < 1.0 - FIDELITY_TOL {
        angles = refine(&t, angles);
    }
    Ok(angles.canonical())
}

fn fidelity_real(target: &[f64], angles: &PrepAngles) -> f64 {
    let s = ansatz_amplitudes(angles);
    let ov: f64 = target.iter().zip(s.iter()).map(|(a, b)| a * b).sum();
    ov * ov
}

/// Cyclic golden-section search on one angle at a time.
fn refine(target: &[f64], mut angles: PrepAngles) -> PrepAngles {
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    for _sweep in 0..50 {
        for which in 0..3 {
            let center = angles.as_array()[which];
            let eval = |x: f64| {
                let mut a = angles;
                match which {
                    0 => a.alpha = x,
                    1 => a.beta = x,
                    _ => a.gamma = x,
                }
                -fidelity_real(target, &a)
            };
            let (mut lo, mut hi) = (center - PI, center + PI);
            let mut x1 = hi - golden * (hi - lo);
            let mut x2 = lo + golden * (hi - lo);
            let (mut f1, mut f2) = (eval(x1), eval(x2));
            for _ in 0..80 {
                if f1 < f2 {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - golden * (hi - lo);
                    f1 = eval(x1);
                } else {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + golden * (hi - lo);
                    f2 = eval(x2);
                }
            }
            let best = 0.5 * (lo + hi);
            if eval(best) <= eval(center) {
                match which {
                    0 => angles.alpha = best,
                    1 => angles.beta = best,
                    _ => angles.gamma = best,
                }
            }
        }
        if fidelity_real(target, &angles) >= 1.0 - FIDELITY_TOL * 1e-3 {
            break;
        }
    }
    angles
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::expectation;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn h2_hamiltonian() -> ObservableSum {
        ObservableSum::from_terms([
            (-1.99134, "II"),
            (-0.02882925, "XI"),
            (-0.02882925, "IX"),
            (0.0541175, "ZI"),
            (0.0541175, "IZ"),
            (0.01495595, "XX"),
            (0.000151287, "XZ"),
            (0.000151287, "ZX"),
            (0.05900925, "ZZ"),
        ])
        .unwrap()
    }

    const GROUND_AMPS: [f64; 4] = [0.070866, 0.499955, 0.499955, 0.703611];

    #[test]
    fn h2_ground_state() {
        let g = ground_state(&h2_hamiltonian()).unwrap();
        assert!((g.energy + 2.08025).abs() < 1e-4, "{}", g.energy);
        for (a, e) in g.state.amplitudes().iter().zip(GROUND_AMPS) {
            assert!((a.re - e).abs() < 5e-5 && a.im.abs() < 1e-12, "{a} vs {e}");
        }
        assert!(g.residual < 1e-10);
        assert!(!g.degeneracy_flag);
    }

    #[test]
    fn degenerate_minus_zz() {
        let h = ObservableSum::from_terms([(-1.0, "ZZ")]).unwrap();
        let g = ground_state(&h).unwrap();
        assert!((g.energy + 1.0).abs() < 1e-12);
        assert!(g.degeneracy_flag);
        assert!(g.residual < 1e-10);
    }

    #[test]
    fn capacity_error() {
        let h = ObservableSum::from_terms([(1.0, "ZZZZZZZZZZZZZ")]).unwrap();
        assert!(matches!(ground_state(&h), Err(Error::Capacity { .. })));
    }

    #[test]
    fn prepare_trivial_angles() {
        let s = prepare_state(&PrepAngles::new(0.0, 0.0, 0.0));
        assert!((s.amplitudes()[0].re - 1.0).abs() < 1e-15);
        let s = prepare_state(&PrepAngles::new(PI, 0.0, 0.0));
        assert!((s.amplitudes()[3].re - 1.0).abs() < 1e-15);
        assert!(s.amplitudes()[..3].iter().all(|a| a.norm() < 1e-15));
    }

    #[test]
    fn reference_angles_prepare_ground_state() {
        let s = prepare_state(&PrepAngles::REFERENCE);
        for (a, e) in s.amplitudes().iter().zip(GROUND_AMPS) {
            assert!((a.re - e).abs() < 5e-5, "{a} vs {e}");
        }
        let h = h2_hamiltonian();
        let g = ground_state(&h).unwrap();
        let e = expectation(&s, &h).unwrap();
        assert!(e >= g.energy - 1e-9 && e <= g.energy + 1e-4);
    }

    #[test]
    fn solve_reference_angles() {
        let g = ground_state(&h2_hamiltonian()).unwrap();
        let a = solve_prep_angles(&g.state).unwrap();
        assert!((a.alpha - 2.08293).abs() < 1e-4, "{a:?}");
        assert!((a.beta - 2.04776).abs() < 1e-4, "{a:?}");
        assert!((a.gamma - 0.81221).abs() < 1e-4, "{a:?}");
    }

    #[test]
    fn solve_simple_targets() {
        let a = solve_prep_angles(&StateVector::zero(2).unwrap()).unwrap();
        assert_eq!(a.as_array(), [0.0, 0.0, 0.0]);
        let bell = StateVector::from_real(&[FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2]).unwrap();
        let a = solve_prep_angles(&bell).unwrap();
        assert!((a.alpha - PI / 2.0).abs() < 1e-12);
        assert!(a.beta.abs() < 1e-12 && a.gamma.abs() < 1e-12, "{a:?}");
    }

    #[test]
    fn complex_target_rejected() {
        let s = StateVector::from_amplitudes(vec![
            Complex64::new(FRAC_1_SQRT_2, 0.0),
            Complex64::new(0.0, FRAC_1_SQRT_2),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ])
        .unwrap();
        assert!(matches!(solve_prep_angles(&s), Err(Error::UnsupportedState(_))));
    }

    #[test]
    fn global_phase_is_removed_before_solving() {
        let rot = Complex64::from_polar(1.0, 0.7);
        let amps: Vec<Complex64> = GROUND_AMPS.iter().map(|&a| rot * a).collect();
        let s = StateVector::from_amplitudes(amps).unwrap().normalized().unwrap();
        let a = solve_prep_angles(&s).unwrap();
        assert!(s.fidelity(&prepare_state(&a)).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn refinement_recovers_from_perturbed_start() {
        let target = ansatz_amplitudes(&PrepAngles::REFERENCE);
        let start = PrepAngles::new(1.9, 2.2, 0.6);
        let refined = refine(&target, start);
        assert!(fidelity_real(&target, &refined) > 1.0 - 1e-9);
    }
}
