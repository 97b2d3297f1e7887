//! Two-qubit states: construction, validation and the generalized Bloch form
//! `ρ = (I⊗I + v_A·σ⊗I + I⊗v_B·σ + Σ m_jk σ_j⊗σ_k) / 4`.

use nalgebra::Matrix3;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, kron, Axis, CMat2, CMat4, Mat3, C64};
use crate::tol;

/// Validated two-qubit density matrix (Hermitian, unit trace, PSD).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoQubitState {
    rho: CMat4,
}

impl TwoQubitState {
    pub fn new(rho: CMat4) -> Result<Self> {
        if !rho.is_hermitian(tol::HERMITIAN_TOL) {
            return Err(Error::validation("density matrix is not Hermitian"));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > tol::TRACE_TOL || tr.im.abs() > tol::TRACE_TOL {
            return Err(Error::validation(format!("density matrix has trace {tr}, expected 1")));
        }
        let min_eigenvalue = hermitian_eigenvalues(&rho)?[0];
        if min_eigenvalue < -tol::POS_TOL {
            return Err(Error::NotPhysical { min_eigenvalue });
        }
        Ok(TwoQubitState { rho })
    }

    pub fn rho(&self) -> &CMat4 {
        &self.rho
    }

    pub fn maximally_mixed() -> Self {
        TwoQubitState { rho: CMat4::identity().scale_re(0.25) }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.rho).expect("validated state is Hermitian")
    }

    /// Reduced state of qubit A.
    pub fn marginal_a(&self) -> CMat2 {
        let r = &self.rho.0;
        let mut m = CMat2::zeros();
        for a in 0..2 {
            for a2 in 0..2 {
                m.0[a][a2] = (0..2).map(|b| r[2 * a + b][2 * a2 + b]).sum();
            }
        }
        m
    }

    /// Reduced state of qubit B.
    pub fn marginal_b(&self) -> CMat2 {
        let r = &self.rho.0;
        let mut m = CMat2::zeros();
        for b in 0..2 {
            for b2 in 0..2 {
                m.0[b][b2] = (0..2).map(|a| r[2 * a + b][2 * a + b2]).sum();
            }
        }
        m
    }
}

/// Local Bloch vectors and the correlation block of a two-qubit state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochForm {
    #[serde(rename = "vA")]
    pub v_a: [f64; 3],
    #[serde(rename = "vB")]
    pub v_b: [f64; 3],
    #[serde(rename = "M")]
    pub m: Mat3,
}

impl BlochForm {
    pub fn zeros() -> Self {
        BlochForm { v_a: [0.0; 3], v_b: [0.0; 3], m: Mat3::zeros() }
    }
}

fn real_trace(rho: &CMat4, op: &CMat4, what: &str) -> Result<f64> {
    let t = rho.trace_product(op);
    if t.im.abs() >= tol::IMAG_TOL {
        return Err(Error::validation(format!("trace for {what} has imaginary part {}", t.im)));
    }
    Ok(t.re)
}

pub fn bloch_decompose(state: &TwoQubitState) -> Result<BlochForm> {
    let id = CMat2::identity();
    let rho = state.rho();
    let mut form = BlochForm::zeros();
    for j in Axis::ALL {
        let s = j.pauli();
        form.v_a[j.idx()] = real_trace(rho, &kron(&s, &id), "v_A")?;
        form.v_b[j.idx()] = real_trace(rho, &kron(&id, &s), "v_B")?;
        for k in Axis::ALL {
            form.m[(j.idx(), k.idx())] = real_trace(rho, &kron(&s, &k.pauli()), "M")?;
        }
    }
    Ok(form)
}

/// Builds the density matrix of `form`; fails with
/// [`Error::NotPhysical`] when it has a negative eigenvalue.
pub fn bloch_compose(form: &BlochForm) -> Result<TwoQubitState> {
    let id = CMat2::identity();
    let mut rho = CMat4::identity();
    for j in Axis::ALL {
        let s = j.pauli();
        rho = rho + kron(&s, &id).scale_re(form.v_a[j.idx()]);
        rho = rho + kron(&id, &s).scale_re(form.v_b[j.idx()]);
        for k in Axis::ALL {
            rho = rho + kron(&s, &k.pauli()).scale_re(form.m[(j.idx(), k.idx())]);
        }
    }
    TwoQubitState::new(rho.scale_re(0.25))
}

/// The four Bell states, with `|0⟩ = |H⟩`, `|1⟩ = |V⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bell {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    /// `(|HV⟩ − |VH⟩)/√2`, the singlet.
    PsiMinus,
}

impl Bell {
    pub const ALL: [Bell; 4] = [Bell::PhiPlus, Bell::PhiMinus, Bell::PsiPlus, Bell::PsiMinus];

    pub fn from_index(index: usize) -> Result<Bell> {
        Bell::ALL
            .get(index)
            .copied()
            .ok_or_else(|| Error::arg(format!("Bell index must be in 0..=3, got {index}")))
    }

    pub fn amplitudes(self) -> [C64; 4] {
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let z = C64::new(0.0, 0.0);
        match self {
            Bell::PhiPlus => [h, z, z, h],
            Bell::PhiMinus => [h, z, z, -h],
            Bell::PsiPlus => [z, h, h, z],
            Bell::PsiMinus => [z, h, -h, z],
        }
    }

    pub fn state(self) -> TwoQubitState {
        TwoQubitState { rho: CMat4::projector(&self.amplitudes()) }
    }
}

/// Bell state by index: 0 = Φ⁺, 1 = Φ⁻, 2 = Ψ⁺, 3 = Ψ⁻.
pub fn bell_state(index: usize) -> Result<TwoQubitState> {
    Ok(Bell::from_index(index)?.state())
}

pub fn singlet() -> TwoQubitState {
    Bell::PsiMinus.state()
}

pub const WERNER_MIN: f64 = -1.0 / 3.0;
pub const WERNER_MAX: f64 = 1.0;

/// `(1−ω)·I/4 + ω·|Ψ⁻⟩⟨Ψ⁻|`, physical for `ω ∈ [−1/3, 1]`.
pub fn werner_state(omega: f64) -> Result<TwoQubitState> {
    if !omega.is_finite() || omega < WERNER_MIN - tol::RECON_TOL || omega > WERNER_MAX + tol::RECON_TOL {
        // Spectrum is {(1−ω)/4 ×3, (1+3ω)/4}.
        let min_eigenvalue = ((1.0 - omega) / 4.0).min((1.0 + 3.0 * omega) / 4.0);
        return Err(Error::NotPhysical { min_eigenvalue });
    }
    let rho = CMat4::identity().scale_re((1.0 - omega) / 4.0) + singlet().rho.scale_re(omega);
    Ok(TwoQubitState { rho })
}

/// Draws from the Hilbert–Schmidt ensemble: `ρ = G·G† / tr(G·G†)` with `G`
/// a 4×4 matrix of independent standard complex Gaussians.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R) -> TwoQubitState {
    let mut g = CMat4::zeros();
    for z in g.0.iter_mut().flatten() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *z = C64::new(re, im);
    }
    let ggd = g * g.dagger();
    let tr = ggd.trace().re;
    let mut rho = ggd.scale_re(1.0 / tr);
    // Scrub rounding asymmetry so the Hermitian check is exact.
    rho = (rho + rho.dagger()).scale_re(0.5);
    TwoQubitState { rho }
}

/// `(1−eps)·ρ + eps·I/4`.
pub fn depolarize(state: &TwoQubitState, eps: f64) -> Result<TwoQubitState> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::arg(format!("depolarizing strength must be in [0,1], got {eps}")));
    }
    let rho = state.rho.scale_re(1.0 - eps) + CMat4::identity().scale_re(eps / 4.0);
    Ok(TwoQubitState { rho })
}

/// `⟨ψ|ρ|ψ⟩` where `target = |ψ⟩⟨ψ|` must be pure.
pub fn fidelity_pure(target: &TwoQubitState, state: &TwoQubitState) -> Result<f64> {
    let ev = target.eigenvalues();
    let rank_one = (ev[3] - 1.0).abs() <= tol::POS_TOL && ev[..3].iter().all(|e| e.abs() <= tol::POS_TOL);
    if !rank_one {
        return Err(Error::arg(format!("fidelity target is not a pure state (spectrum {ev:?})")));
    }
    let f = target.rho.trace_product(&state.rho).re;
    Ok(f.clamp(0.0, 1.0))
}

/// `m = r_a · diag(t) · r_bᵀ` with `r_a`, `r_b` proper rotations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalDiagonalization {
    pub r_a: Mat3,
    pub r_b: Mat3,
    pub t: [f64; 3],
}

impl LocalDiagonalization {
    pub fn reconstruct(&self) -> Mat3 {
        self.r_a * Mat3::diag(self.t) * self.r_b.transpose()
    }
}

fn to_na(m: &Mat3) -> Matrix3<f64> {
    Matrix3::from_fn(|j, k| m.0[j][k])
}

fn from_na(m: &Matrix3<f64>) -> Mat3 {
    let mut out = Mat3::zeros();
    for j in 0..3 {
        for k in 0..3 {
            out.0[j][k] = m[(j, k)];
        }
    }
    out
}

/// Signed singular value decomposition with both factors in SO(3).
///
/// A factor with determinant −1 has its third column negated, and the
/// third signed value negated with it, so `det m = t₁t₂t₃` holds.
pub fn diagonalize_correlation(m: &Mat3) -> LocalDiagonalization {
    let svd = to_na(m).svd(true, true);
    let mut u = from_na(&svd.u.expect("u requested"));
    let mut v = from_na(&svd.v_t.expect("v_t requested").transpose());
    let mut t = [svd.singular_values[0], svd.singular_values[1], svd.singular_values[2]];
    for f in [&mut u, &mut v] {
        if f.det() < 0.0 {
            for row in f.0.iter_mut() {
                row[2] = -row[2];
            }
            t[2] = -t[2];
        }
    }
    LocalDiagonalization { r_a: u, r_b: v, t }
}

/// Single-qubit density matrix from its Bloch vector.
pub fn qubit_state(r: [f64; 3]) -> Result<CMat2> {
    let norm2: f64 = r.iter().map(|x| x * x).sum();
    if norm2 > 1.0 + tol::POS_TOL {
        return Err(Error::NotPhysical { min_eigenvalue: 0.5 * (1.0 - norm2.sqrt()) });
    }
    let mut m = CMat2::identity();
    for j in Axis::ALL {
        m = m + j.pauli().scale_re(r[j.idx()]);
    }
    Ok(m.scale_re(0.5))
}

/// Checks Hermitian, unit trace and PSD for a single-qubit density matrix.
pub fn validate_qubit(rho: &CMat2) -> Result<()> {
    if !rho.is_hermitian(tol::HERMITIAN_TOL) {
        return Err(Error::validation("qubit density matrix is not Hermitian"));
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > tol::TRACE_TOL || tr.im.abs() > tol::TRACE_TOL {
        return Err(Error::validation(format!("qubit density matrix has trace {tr}")));
    }
    let min_eigenvalue = hermitian_eigenvalues(rho)?[0];
    if min_eigenvalue < -tol::POS_TOL {
        return Err(Error::NotPhysical { min_eigenvalue });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn assert_mat3_close(a: &Mat3, b: &Mat3, tol: f64) {
        assert!(a.max_abs_diff(b) <= tol, "{a:?} vs {b:?}");
    }

    #[test]
    fn decompose_maximally_mixed() {
        let f = bloch_decompose(&TwoQubitState::maximally_mixed()).unwrap();
        assert_eq!(f, BlochForm::zeros());
    }

    #[test]
    fn decompose_product_zero_zero() {
        let mut rho = CMat4::zeros();
        rho.0[0][0] = C64::new(1.0, 0.0);
        let f = bloch_decompose(&TwoQubitState::new(rho).unwrap()).unwrap();
        assert_eq!(f.v_a, [0.0, 0.0, 1.0]);
        assert_eq!(f.v_b, [0.0, 0.0, 1.0]);
        assert_mat3_close(&f.m, &Mat3::diag([0.0, 0.0, 1.0]), 1e-15);
    }

    #[test]
    fn decompose_singlet() {
        let f = bloch_decompose(&singlet()).unwrap();
        assert_eq!(f.v_a, [0.0; 3]);
        assert_eq!(f.v_b, [0.0; 3]);
        assert_mat3_close(&f.m, &-Mat3::identity(), 1e-15);
    }

    #[test]
    fn compose_examples() {
        assert_eq!(bloch_compose(&BlochForm::zeros()).unwrap(), TwoQubitState::maximally_mixed());

        let s = bloch_compose(&BlochForm { m: -Mat3::identity(), ..BlochForm::zeros() }).unwrap();
        assert!(s.rho().max_abs_diff(singlet().rho()) < 1e-15);

        let err = bloch_compose(&BlochForm { m: Mat3::identity(), ..BlochForm::zeros() }).unwrap_err();
        match err {
            Error::NotPhysical { min_eigenvalue } => assert!((min_eigenvalue + 0.5).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bell_correlation_blocks() {
        let expect = [
            [1.0, -1.0, 1.0],
            [-1.0, 1.0, 1.0],
            [1.0, 1.0, -1.0],
            [-1.0, -1.0, -1.0],
        ];
        for (i, d) in expect.iter().enumerate() {
            let st = bell_state(i).unwrap();
            assert!(st.rho().trace_product(st.rho()).re > 1.0 - 1e-12, "pure");
            let f = bloch_decompose(&st).unwrap();
            assert_mat3_close(&f.m, &Mat3::diag(*d), 1e-15);
            assert_eq!(f.v_a, [0.0; 3]);
        }
        assert!(bell_state(4).is_err());
    }

    #[test]
    fn werner_examples() {
        assert!(werner_state(1.0).unwrap().rho().max_abs_diff(singlet().rho()) < 1e-15);
        assert_eq!(werner_state(0.0).unwrap(), TwoQubitState::maximally_mixed());

        let w = werner_state(-1.0 / 3.0).unwrap();
        let ev = w.eigenvalues();
        assert!(ev[0].abs() < 1e-12);
        assert_mat3_close(&bloch_decompose(&w).unwrap().m, &Mat3::identity().scale(1.0 / 3.0), 1e-12);

        assert!(matches!(werner_state(-0.34), Err(Error::NotPhysical { .. })));
        assert!(matches!(werner_state(1.01), Err(Error::NotPhysical { .. })));
    }

    #[test]
    fn werner_bloch_form_on_grid() {
        for i in 0..=40 {
            let omega = -1.0 / 3.0 + (4.0 / 3.0) * i as f64 / 40.0;
            let f = bloch_decompose(&werner_state(omega).unwrap()).unwrap();
            assert_mat3_close(&f.m, &Mat3::identity().scale(-omega), 1e-12);
            let ev = werner_state(omega).unwrap().eigenvalues();
            let mut want = [(1.0 - omega) / 4.0; 4];
            want[3] = (1.0 + 3.0 * omega) / 4.0;
            want.sort_by(f64::total_cmp);
            for (g, w) in ev.iter().zip(want) {
                assert!((g - w).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn random_states_are_valid_and_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let s = random_state(&mut rng);
            assert!((s.rho().trace().re - 1.0).abs() < 1e-10);
            let ev = s.eigenvalues();
            assert!(ev[0] >= -tol::POS_TOL);
            assert!((ev.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            let f = bloch_decompose(&s).unwrap();
            for x in f.v_a.iter().chain(&f.v_b).chain(f.m.0.iter().flatten()) {
                assert!(x.abs() <= 1.0 + 1e-12);
            }
            let back = bloch_compose(&f).unwrap();
            assert!(back.rho().max_abs_diff(s.rho()) <= tol::RECON_TOL);
        }
    }

    #[test]
    fn depolarize_examples() {
        let s = singlet();
        assert_eq!(depolarize(&s, 0.0).unwrap(), s);
        assert!(depolarize(&s, 1.0).unwrap().rho().max_abs_diff(TwoQubitState::maximally_mixed().rho()) < 1e-16);
        let noisy = depolarize(&s, 0.048).unwrap();
        assert!((fidelity_pure(&s, &noisy).unwrap() - 0.964).abs() < 1e-12);
        assert_mat3_close(&bloch_decompose(&noisy).unwrap().m, &Mat3::identity().scale(-0.952), 1e-12);
        assert!(depolarize(&s, -0.1).is_err());
        assert!(depolarize(&s, 1.1).is_err());
    }

    #[test]
    fn fidelity_examples() {
        let s = singlet();
        assert!((fidelity_pure(&s, &s).unwrap() - 1.0).abs() < 1e-12);
        assert!((fidelity_pure(&s, &TwoQubitState::maximally_mixed()).unwrap() - 0.25).abs() < 1e-12);
        for omega in [-1.0 / 3.0, -0.1, 0.2, 0.7, 1.0] {
            let f = fidelity_pure(&s, &werner_state(omega).unwrap()).unwrap();
            assert!((f - (1.0 + 3.0 * omega) / 4.0).abs() < 1e-12);
        }
        assert!(fidelity_pure(&werner_state(0.5).unwrap(), &s).is_err());
    }

    #[test]
    fn diagonalize_examples() {
        let d = diagonalize_correlation(&-Mat3::identity());
        assert_mat3_close(&d.reconstruct(), &-Mat3::identity(), 1e-12);
        assert!(d.r_a.is_so3(1e-10) && d.r_b.is_so3(1e-10));
        assert!((d.t.iter().product::<f64>() + 1.0).abs() < 1e-12);

        let m = Mat3::diag([1.0, -1.0, 1.0]);
        let d = diagonalize_correlation(&m);
        assert_mat3_close(&d.reconstruct(), &m, 1e-12);
        assert!((d.t.iter().product::<f64>() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonalize_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let m = bloch_decompose(&random_state(&mut rng)).unwrap().m;
            let d = diagonalize_correlation(&m);
            assert!(d.reconstruct().max_abs_diff(&m) < 1e-10);
            assert!(d.r_a.is_so3(1e-10) && d.r_b.is_so3(1e-10));
            assert!((m.det() - d.t.iter().product::<f64>()).abs() < 1e-10);
        }
    }

    #[test]
    fn diagonalize_rank_deficient() {
        let m = Mat3([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, -0.4]]);
        let d = diagonalize_correlation(&m);
        assert!(d.reconstruct().max_abs_diff(&m) < 1e-12);
        assert!(d.r_a.is_so3(1e-10) && d.r_b.is_so3(1e-10));
    }

    #[test]
    fn marginals() {
        let s = bell_state(0).unwrap();
        assert!(s.marginal_a().max_abs_diff(&CMat2::identity().scale_re(0.5)) < 1e-15);
        let mut rho = CMat4::zeros();
        rho.0[1][1] = C64::new(1.0, 0.0); // |0⟩|1⟩
        let s = TwoQubitState::new(rho).unwrap();
        assert_eq!(s.marginal_a().0[0][0].re, 1.0);
        assert_eq!(s.marginal_b().0[1][1].re, 1.0);
    }

    #[test]
    fn state_validation_errors() {
        let mut rho = CMat4::identity();
        assert!(matches!(TwoQubitState::new(rho), Err(Error::Validation(_))));
        rho = CMat4::identity().scale_re(0.25);
        rho.0[0][1] = C64::new(0.1, 0.0);
        assert!(matches!(TwoQubitState::new(rho), Err(Error::Validation(_))));
    }

    #[test]
    fn qubit_helpers() {
        assert!(validate_qubit(&qubit_state([0.0, 0.0, 1.0]).unwrap()).is_ok());
        assert!(qubit_state([1.0, 1.0, 0.0]).is_err());
        assert!(validate_qubit(&CMat2::identity()).is_err());
    }
}
