//! Direct-cause mechanisms: qubit unitaries, their Bloch-sphere rotations,
//! and mixed-unitary (unital) channels `ρ ↦ Σ a_m U_m ρ U_m†`.

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{Axis, CMat2, Mat3, C64};
use crate::states::validate_qubit;
use crate::tol;

/// A 2×2 unitary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Unitary2(CMat2);

impl Unitary2 {
    pub fn new(u: CMat2) -> Result<Self> {
        if !u.is_unitary(tol::UNITARY_TOL) {
            return Err(Error::validation("matrix is not unitary"));
        }
        Ok(Unitary2(u))
    }

    pub fn identity() -> Self {
        Unitary2(CMat2::identity())
    }

    pub fn pauli(axis: Axis) -> Self {
        Unitary2(axis.pauli())
    }

    /// `exp(−i·angle·(n·σ)/2)` for the unit vector `n` along `axis`.
    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Result<Self> {
        let norm = axis.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0) || !angle.is_finite() {
            return Err(Error::arg("rotation axis must be a nonzero finite vector"));
        }
        let (s, c) = (0.5 * angle).sin_cos();
        let mut u = CMat2::identity().scale_re(c);
        for j in Axis::ALL {
            u = u + j.pauli().scale(C64::new(0.0, -s * axis[j.idx()] / norm));
        }
        Ok(Unitary2(u))
    }

    pub fn matrix(&self) -> &CMat2 {
        &self.0
    }

    pub fn dagger(&self) -> Self {
        Unitary2(self.0.dagger())
    }

    pub fn compose(&self, other: &Unitary2) -> Self {
        Unitary2(self.0 * other.0)
    }

    pub fn with_phase(&self, phi: f64) -> Self {
        Unitary2(self.0.scale(C64::from_polar(1.0, phi)))
    }
}

/// Haar-distributed 2×2 unitary: Gram–Schmidt on a complex Ginibre matrix,
/// then each column multiplied by the phase of the matching diagonal entry
/// of the triangular factor.
pub fn haar_random_unitary<R: Rng + ?Sized>(rng: &mut R) -> Unitary2 {
    loop {
        let mut cols = [[C64::new(0.0, 0.0); 2]; 2];
        for z in cols.iter_mut().flatten() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *z = C64::new(re, im);
        }
        let mut q = [[C64::new(0.0, 0.0); 2]; 2];
        let mut degenerate = false;
        for i in 0..2 {
            let mut v = cols[i];
            for prev in q.iter().take(i) {
                let overlap: C64 = (0..2).map(|r| prev[r].conj() * cols[i][r]).sum();
                for r in 0..2 {
                    v[r] -= overlap * prev[r];
                }
            }
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm < 1e-12 {
                degenerate = true;
                break;
            }
            q[i] = v.map(|z| z / norm);
            // Diagonal of the triangular factor: r_ii = ⟨q_i, a_i⟩.
            let r_ii: C64 = (0..2).map(|r| q[i][r].conj() * cols[i][r]).sum();
            let phase = r_ii / r_ii.norm();
            q[i] = q[i].map(|z| z * phase);
        }
        if degenerate {
            continue;
        }
        let mut u = CMat2::zeros();
        for (c, col) in q.iter().enumerate() {
            for r in 0..2 {
                u.0[r][c] = col[r];
            }
        }
        return Unitary2(u);
    }
}

/// Bloch-sphere rotation of `u`: `R_jk = ½·Re tr(σ_j U σ_k U†)`.
pub fn rotation_of(u: &Unitary2) -> Mat3 {
    let paulis = Axis::ALL.map(Axis::pauli);
    let mut r = Mat3::zeros();
    for k in 0..3 {
        let rotated = paulis[k].conjugate_by(&u.0);
        for j in 0..3 {
            let t = paulis[j].trace_product(&rotated);
            assert!(
                t.im.abs() < tol::IMAG_TOL,
                "rotation trace has imaginary part {}; Pauli convention broken",
                t.im
            );
            r.0[j][k] = 0.5 * t.re;
        }
    }
    r
}

/// `ρ ↦ Σ a_m U_m ρ U_m†` with `a_m ≥ 0`, `Σ a_m = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedUnitaryChannel {
    weights: Vec<f64>,
    unitaries: Vec<Unitary2>,
}

impl MixedUnitaryChannel {
    /// Weights within [`tol::WEIGHT_RENORM_TOL`] of summing to one are
    /// rescaled (with a warning); larger deviations are rejected.
    pub fn new(weights: Vec<f64>, unitaries: Vec<Unitary2>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::arg("channel needs at least one term"));
        }
        if weights.len() != unitaries.len() {
            return Err(Error::arg(format!(
                "{} weights for {} unitaries",
                weights.len(),
                unitaries.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::arg(format!("channel weight {w} is not a non-negative number")));
        }
        let sum: f64 = weights.iter().sum();
        let dev = (sum - 1.0).abs();
        let weights = if dev <= tol::WEIGHT_SUM_TOL {
            weights
        } else if dev < tol::WEIGHT_RENORM_TOL {
            log::warn!("channel weights sum to {sum}; renormalizing");
            weights.into_iter().map(|w| w / sum).collect()
        } else {
            return Err(Error::arg(format!("channel weights sum to {sum}, expected 1")));
        };
        Ok(MixedUnitaryChannel { weights, unitaries })
    }

    pub fn unitary(u: Unitary2) -> Self {
        MixedUnitaryChannel { weights: vec![1.0], unitaries: vec![u] }
    }

    pub fn identity() -> Self {
        Self::unitary(Unitary2::identity())
    }

    /// Equal-weight mixture of `unitaries`.
    pub fn uniform(unitaries: Vec<Unitary2>) -> Result<Self> {
        let n = unitaries.len();
        Self::new(vec![1.0 / n as f64; n], unitaries)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn unitaries(&self) -> &[Unitary2] {
        &self.unitaries
    }

    pub fn terms(&self) -> impl Iterator<Item = (f64, &Unitary2)> {
        self.weights.iter().copied().zip(&self.unitaries)
    }

    /// Declared number of unitary terms.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// `N` Haar unitaries with Dirichlet(1,…,1) weights.
pub fn random_channel<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<MixedUnitaryChannel> {
    if n == 0 {
        return Err(Error::arg("channel needs at least one term"));
    }
    let unitaries: Vec<_> = (0..n).map(|_| haar_random_unitary(rng)).collect();
    let raw: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = raw.iter().sum();
    let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    // Push the rounding residue into the largest weight so the sum is 1 to the ulp.
    let resid = 1.0 - weights.iter().sum::<f64>();
    let imax = (0..n).max_by(|&a, &b| weights[a].total_cmp(&weights[b])).unwrap();
    weights[imax] += resid;
    MixedUnitaryChannel::new(weights, unitaries)
}

pub fn apply_channel(ch: &MixedUnitaryChannel, rho_a: &CMat2) -> Result<CMat2> {
    validate_qubit(rho_a)?;
    Ok(ch
        .terms()
        .fold(CMat2::zeros(), |acc, (a, u)| acc + rho_a.conjugate_by(u.matrix()).scale_re(a)))
}

/// `Σ a_m R(U_m)ᵀ`, the correlation matrix of the channel as a direct cause.
pub fn channel_correlation(ch: &MixedUnitaryChannel) -> Mat3 {
    ch.terms()
        .fold(Mat3::zeros(), |acc, (a, u)| acc + rotation_of(u).transpose().scale(a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::qubit_state;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn haar_samples_are_unitary_with_unit_determinant_rotations() {
        let mut r = rng(1);
        for _ in 0..1000 {
            let u = haar_random_unitary(&mut r);
            assert!(u.matrix().is_unitary(tol::UNITARY_TOL));
            let rot = rotation_of(&u);
            assert!(rot.is_so3(1e-9));
            assert!((rot.det() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn haar_second_moment() {
        // E|u00|² = 1/2 for the 2×2 Haar measure.
        let mut r = rng(2);
        let n = 10_000;
        let mean = (0..n)
            .map(|_| haar_random_unitary(&mut r).matrix().0[0][0].norm_sqr())
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.5).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn haar_fourth_moment() {
        // |u00|² is uniform on [0,1] for 2×2 Haar, so E|u00|⁴ = 1/3.
        let mut r = rng(3);
        let n = 20_000;
        let m4 = (0..n)
            .map(|_| haar_random_unitary(&mut r).matrix().0[0][0].norm_sqr().powi(2))
            .sum::<f64>()
            / n as f64;
        assert!((m4 - 1.0 / 3.0).abs() < 0.01, "m4 {m4}");
    }

    #[test]
    fn haar_left_invariance() {
        // Left-multiplying by a fixed unitary must not move the |u00|² mean.
        let fixed = Unitary2::from_axis_angle([1.0, 2.0, -0.5], 1.1).unwrap();
        let mut r = rng(4);
        let n = 20_000;
        let mean = (0..n)
            .map(|_| fixed.compose(&haar_random_unitary(&mut r)).matrix().0[0][0].norm_sqr())
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.5).abs() < 0.015, "mean {mean}");
    }

    #[test]
    fn rotation_examples() {
        assert!(rotation_of(&Unitary2::identity()).max_abs_diff(&Mat3::identity()) < 1e-15);
        assert!(rotation_of(&Unitary2::pauli(Axis::X)).max_abs_diff(&Mat3::diag([1.0, -1.0, -1.0])) < 1e-15);
        let rz = Unitary2::from_axis_angle([0.0, 0.0, 1.0], PI / 2.0).unwrap();
        let want = Mat3([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]);
        assert!(rotation_of(&rz).max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn axis_angle_matches_rodrigues() {
        let mut r = rng(9);
        for _ in 0..200 {
            let axis: [f64; 3] = [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
            let angle = r.random_range(-4.0..4.0);
            let u = Unitary2::from_axis_angle(axis, angle).unwrap();
            assert!(rotation_of(&u).max_abs_diff(&Mat3::rotation(axis, angle)) < 1e-12);
        }
        assert!(Unitary2::from_axis_angle([0.0; 3], 1.0).is_err());
    }

    #[test]
    fn rotation_homomorphism_and_phase_invariance() {
        let mut r = rng(5);
        for _ in 0..500 {
            let u = haar_random_unitary(&mut r);
            let v = haar_random_unitary(&mut r);
            let lhs = rotation_of(&u.compose(&v));
            let rhs = rotation_of(&u) * rotation_of(&v);
            assert!(lhs.max_abs_diff(&rhs) < 1e-9);

            let phi = r.random_range(0.0..2.0 * PI);
            assert!(rotation_of(&u.with_phase(phi)).max_abs_diff(&rotation_of(&u)) < 1e-14);
        }
    }

    #[test]
    fn apply_channel_examples() {
        let zero = qubit_state([0.0, 0.0, 1.0]).unwrap();
        let one = qubit_state([0.0, 0.0, -1.0]).unwrap();
        let id = MixedUnitaryChannel::identity();
        assert!(apply_channel(&id, &zero).unwrap().max_abs_diff(&zero) < 1e-15);
        let flip = MixedUnitaryChannel::unitary(Unitary2::pauli(Axis::X));
        assert!(apply_channel(&flip, &zero).unwrap().max_abs_diff(&one) < 1e-15);
        assert!(apply_channel(&id, &CMat2::identity()).is_err());
    }

    #[test]
    fn channels_are_unital() {
        let mut r = rng(6);
        let half = CMat2::identity().scale_re(0.5);
        for n in 1..=5 {
            for _ in 0..100 {
                let ch = random_channel(n, &mut r).unwrap();
                assert!(apply_channel(&ch, &half).unwrap().max_abs_diff(&half) < 1e-12);
            }
        }
    }

    #[test]
    fn channel_correlation_examples() {
        let c = channel_correlation(&MixedUnitaryChannel::identity());
        assert_eq!(c, Mat3::identity());
        assert_eq!(c.det(), 1.0);

        let half = MixedUnitaryChannel::uniform(vec![Unitary2::identity(), Unitary2::pauli(Axis::X)]).unwrap();
        let c = channel_correlation(&half);
        assert!(c.max_abs_diff(&Mat3::diag([1.0, 0.0, 0.0])) < 1e-15);
        assert_eq!(c.det(), 0.0);

        let paulis = MixedUnitaryChannel::uniform(Axis::ALL.map(Unitary2::pauli).to_vec()).unwrap();
        let c = channel_correlation(&paulis);
        assert!(c.max_abs_diff(&Mat3::identity().scale(-1.0 / 3.0)) < 1e-15);
        assert!((c.det() + 1.0 / 27.0).abs() < 1e-15);
    }

    #[test]
    fn single_unitary_correlation_is_inverse_rotation() {
        let mut r = rng(7);
        for _ in 0..200 {
            let u = haar_random_unitary(&mut r);
            let c = channel_correlation(&MixedUnitaryChannel::unitary(u));
            assert!(c.is_so3(1e-9));
            assert!((c * rotation_of(&u)).max_abs_diff(&Mat3::identity()) < 1e-12);
        }
    }

    #[test]
    fn determinant_ranges_by_term_count() {
        let mut r = rng(8);
        for _ in 0..2000 {
            let d1 = channel_correlation(&random_channel(1, &mut r).unwrap()).det();
            assert!((d1 - 1.0).abs() < 1e-9);
            let d2 = channel_correlation(&random_channel(2, &mut r).unwrap()).det();
            assert!((-1e-9..=1.0 + 1e-9).contains(&d2), "{d2}");
            let d3 = channel_correlation(&random_channel(3, &mut r).unwrap()).det();
            assert!((-1.0 / 27.0 - 1e-9..=1.0 + 1e-9).contains(&d3), "{d3}");
        }
    }

    #[test]
    fn weight_validation() {
        let us = vec![Unitary2::identity(), Unitary2::pauli(Axis::Z)];
        let ch = MixedUnitaryChannel::new(vec![0.5, 0.5 + 1e-8], us.clone()).unwrap();
        assert!((ch.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(MixedUnitaryChannel::new(vec![0.5, 0.6], us.clone()).is_err());
        assert!(MixedUnitaryChannel::new(vec![1.5, -0.5], us.clone()).is_err());
        assert!(MixedUnitaryChannel::new(vec![1.0], us).is_err());
        assert!(MixedUnitaryChannel::new(vec![], vec![]).is_err());
    }

    #[test]
    fn unitary_validation() {
        assert!(Unitary2::new(CMat2::identity().scale_re(1.1)).is_err());
        assert!(Unitary2::new(Axis::Y.pauli()).is_ok());
    }
}
