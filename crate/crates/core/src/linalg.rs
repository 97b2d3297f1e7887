//! Small dense matrices: complex 2×2 / 4×4 operators, real 3×3 correlation
//! and rotation matrices, and the Pauli toolkit.
//!
//! Pauli convention (used everywhere in the crate):
//! `σ1 = [[0,1],[1,0]]`, `σ2 = [[0,-i],[i,0]]`, `σ3 = [[1,0],[0,-1]]`.
//! Two-qubit operators are ordered with qubit A as the most significant
//! index, so `kron(a, b)` acts as `a` on A and `b` on B.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tol;

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Square complex matrix stored row-major.
#[derive(Clone, Copy, PartialEq)]
pub struct CMatrix<const N: usize>(pub [[C64; N]; N]);

pub type CMat2 = CMatrix<2>;
pub type CMat4 = CMatrix<4>;

impl<const N: usize> CMatrix<N> {
    pub fn zeros() -> Self {
        CMatrix([[ZERO; N]; N])
    }

    pub fn identity() -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            m.0[i][i] = ONE;
        }
        m
    }

    pub fn from_re_im(re: &[[f64; N]; N], im: &[[f64; N]; N]) -> Self {
        let mut m = Self::zeros();
        for j in 0..N {
            for k in 0..N {
                m.0[j][k] = C64::new(re[j][k], im[j][k]);
            }
        }
        m
    }

    /// Outer product `|ψ⟩⟨ψ|`.
    pub fn projector(psi: &[C64; N]) -> Self {
        let mut m = Self::zeros();
        for j in 0..N {
            for k in 0..N {
                m.0[j][k] = psi[j] * psi[k].conj();
            }
        }
        m
    }

    pub fn dagger(&self) -> Self {
        let mut m = Self::zeros();
        for j in 0..N {
            for k in 0..N {
                m.0[j][k] = self.0[k][j].conj();
            }
        }
        m
    }

    pub fn trace(&self) -> C64 {
        (0..N).map(|i| self.0[i][i]).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut m = *self;
        m.0.iter_mut().flatten().for_each(|z| *z *= s);
        m
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .flatten()
            .zip(other.0.iter().flatten())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.dagger()) <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        (*self * self.dagger()).max_abs_diff(&Self::identity()) <= tol
    }

    /// `trace(self · other)` without forming the product.
    pub fn trace_product(&self, other: &Self) -> C64 {
        let mut acc = ZERO;
        for j in 0..N {
            for k in 0..N {
                acc += self.0[j][k] * other.0[k][j];
            }
        }
        acc
    }

    /// `U · self · U†`.
    pub fn conjugate_by(&self, u: &Self) -> Self {
        *u * *self * u.dagger()
    }

    pub fn re(&self) -> [[f64; N]; N] {
        self.0.map(|row| row.map(|z| z.re))
    }

    pub fn im(&self) -> [[f64; N]; N] {
        self.0.map(|row| row.map(|z| z.im))
    }
}

impl<const N: usize> Index<(usize, usize)> for CMatrix<N> {
    type Output = C64;
    fn index(&self, (j, k): (usize, usize)) -> &C64 {
        &self.0[j][k]
    }
}

impl<const N: usize> IndexMut<(usize, usize)> for CMatrix<N> {
    fn index_mut(&mut self, (j, k): (usize, usize)) -> &mut C64 {
        &mut self.0[j][k]
    }
}

impl<const N: usize> Mul for CMatrix<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut m = Self::zeros();
        for j in 0..N {
            for k in 0..N {
                let mut acc = ZERO;
                for l in 0..N {
                    acc += self.0[j][l] * rhs.0[l][k];
                }
                m.0[j][k] = acc;
            }
        }
        m
    }
}

impl<const N: usize> Add for CMatrix<N> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self.0
            .iter_mut()
            .flatten()
            .zip(rhs.0.iter().flatten())
            .for_each(|(a, b)| *a += b);
        self
    }
}

impl<const N: usize> Sub for CMatrix<N> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + rhs.scale_re(-1.0)
    }
}

impl<const N: usize> fmt::Debug for CMatrix<N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix<{N}> [")?;
        for row in &self.0 {
            write!(f, "  ")?;
            for z in row {
                write!(f, "{:+.6}{:+.6}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Measurement axis; `X`, `Y`, `Z` correspond to `σ1`, `σ2`, `σ3`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    /// Zero-based row/column index into a 3×3 matrix.
    pub fn idx(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    /// One-based Pauli label (1, 2, 3).
    pub fn label(self) -> u8 {
        self.idx() as u8 + 1
    }

    pub fn from_label(label: u8) -> Result<Axis> {
        match label {
            1 => Ok(Axis::X),
            2 => Ok(Axis::Y),
            3 => Ok(Axis::Z),
            _ => Err(Error::arg(format!("axis label must be 1, 2 or 3, got {label}"))),
        }
    }

    pub fn pauli(self) -> CMat2 {
        pauli_unchecked(self.label() as usize)
    }
}

fn pauli_unchecked(index: usize) -> CMat2 {
    match index {
        0 => CMatrix([[ONE, ZERO], [ZERO, ONE]]),
        1 => CMatrix([[ZERO, ONE], [ONE, ZERO]]),
        2 => CMatrix([[ZERO, -I], [I, ZERO]]),
        3 => CMatrix([[ONE, ZERO], [ZERO, -ONE]]),
        _ => unreachable!(),
    }
}

/// Pauli operator by index: 0 is the identity, 1..=3 are `σ1..σ3`.
pub fn pauli(index: usize) -> Result<CMat2> {
    if index > 3 {
        return Err(Error::arg(format!("Pauli index must be in 0..=3, got {index}")));
    }
    Ok(pauli_unchecked(index))
}

/// Tensor product with `a`'s row index most significant.
pub fn kron(a: &CMat2, b: &CMat2) -> CMat4 {
    let mut m = CMat4::zeros();
    for (ar, br, r) in (0..2).flat_map(|ar| (0..2).map(move |br| (ar, br, 2 * ar + br))) {
        for (ac, bc, c) in (0..2).flat_map(|ac| (0..2).map(move |bc| (ac, bc, 2 * ac + bc))) {
            m.0[r][c] = a.0[ar][ac] * b.0[br][bc];
        }
    }
    m
}

/// Eigenvalues of a Hermitian matrix in ascending order.
///
/// 2×2 inputs use the closed form; larger ones run cyclic Jacobi on the
/// real symmetric embedding `[[Re H, -Im H], [Im H, Re H]]`, whose spectrum
/// is that of `H` with every eigenvalue doubled.
pub fn hermitian_eigenvalues<const N: usize>(h: &CMatrix<N>) -> Result<Vec<f64>> {
    if !h.is_hermitian(tol::HERMITIAN_TOL) {
        return Err(Error::arg("matrix is not Hermitian"));
    }
    if N == 1 {
        return Ok(vec![h.0[0][0].re]);
    }
    if N == 2 {
        let a = h.0[0][0].re;
        let d = h.0[1][1].re;
        let b = h.0[0][1];
        let mean = 0.5 * (a + d);
        let half_gap = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
        return Ok(vec![mean - half_gap, mean + half_gap]);
    }

    let n = 2 * N;
    let mut s = vec![vec![0.0; n]; n];
    for j in 0..N {
        for k in 0..N {
            let z = h.0[j][k];
            s[j][k] = z.re;
            s[j + N][k + N] = z.re;
            s[j][k + N] = -z.im;
            s[j + N][k] = z.im;
        }
    }
    let mut ev = jacobi_eigenvalues(s);
    ev.sort_by(f64::total_cmp);
    Ok(ev.into_iter().step_by(2).collect())
}

/// Cyclic Jacobi on a real symmetric matrix; returns the diagonal after
/// convergence (unsorted).
fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _ in 0..tol::JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|p| (0..n).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| a[p][q] * a[p][q])
            .sum::<f64>()
            .sqrt();
        if off < tol::JACOBI_TOL {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (akp, akq) = (row[p], row[q]);
                    row[p] = c * akp - s * akq;
                    row[q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

/// Real 3×3 matrix, row-major. Holds rotations, correlation blocks and
/// correlation matrices.
#[derive(Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const fn zeros() -> Self {
        Mat3([[0.0; 3]; 3])
    }

    pub const fn identity() -> Self {
        Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    pub const fn diag(d: [f64; 3]) -> Self {
        Mat3([[d[0], 0.0, 0.0], [0.0, d[1], 0.0], [0.0, 0.0, d[2]]])
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        Mat3([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    /// Cofactor expansion along the first row.
    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn scale(&self, s: f64) -> Self {
        Mat3(self.0.map(|row| row.map(|x| x * s)))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .flatten()
            .zip(other.0.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|x| x.abs()).fold(0.0, f64::max)
    }

    /// Orthogonal within `tol` (entrywise on `mᵀm - I`) with determinant
    /// `+1` within `tol`.
    pub fn is_so3(&self, tol: f64) -> bool {
        (self.transpose() * *self).max_abs_diff(&Mat3::identity()) <= tol
            && (self.det() - 1.0).abs() <= tol
    }

    /// Rotation by `angle` about `axis` (normalized internally); identity
    /// for a zero axis.
    pub fn rotation(axis: [f64; 3], angle: f64) -> Self {
        let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if norm == 0.0 {
            return Mat3::identity();
        }
        let [x, y, z] = axis.map(|a| a / norm);
        let (s, c) = angle.sin_cos();
        let v = 1.0 - c;
        Mat3([
            [c + x * x * v, x * y * v - z * s, x * z * v + y * s],
            [y * x * v + z * s, c + y * y * v, y * z * v - x * s],
            [z * x * v - y * s, z * y * v + x * s, c + z * z * v],
        ])
    }

    /// Rodrigues map from a rotation vector (direction = axis, length = angle).
    pub fn from_rotation_vector(v: [f64; 3]) -> Self {
        let angle = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        Mat3::rotation(v, angle)
    }
}

impl Index<(usize, usize)> for Mat3 {
    type Output = f64;
    fn index(&self, (j, k): (usize, usize)) -> &f64 {
        &self.0[j][k]
    }
}

impl IndexMut<(usize, usize)> for Mat3 {
    fn index_mut(&mut self, (j, k): (usize, usize)) -> &mut f64 {
        &mut self.0[j][k]
    }
}

impl Mul for Mat3 {
    type Output = Mat3;
    fn mul(self, rhs: Mat3) -> Mat3 {
        let mut m = Mat3::zeros();
        for j in 0..3 {
            for k in 0..3 {
                m.0[j][k] = (0..3).map(|l| self.0[j][l] * rhs.0[l][k]).sum();
            }
        }
        m
    }
}

impl Add for Mat3 {
    type Output = Mat3;
    fn add(self, rhs: Mat3) -> Mat3 {
        let mut m = self;
        for j in 0..3 {
            for k in 0..3 {
                m.0[j][k] += rhs.0[j][k];
            }
        }
        m
    }
}

impl Sub for Mat3 {
    type Output = Mat3;
    fn sub(self, rhs: Mat3) -> Mat3 {
        self + (-rhs)
    }
}

impl Neg for Mat3 {
    type Output = Mat3;
    fn neg(self) -> Mat3 {
        self.scale(-1.0)
    }
}

impl fmt::Debug for Mat3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mat3[")?;
        for (i, row) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{:+.9} {:+.9} {:+.9}", row[0], row[1], row[2])?;
        }
        write!(f, "]")
    }
}
