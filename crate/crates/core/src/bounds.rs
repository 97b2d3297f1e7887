//! Attainable ranges of Δ: closed-form ranges for the pure mechanisms and
//! numerically optimized boundary curves for mixtures.
//!
//! For a mixture with direct-cause weight `p` the correlation matrix is
//! `p·Σ a_m R_mᵀ + (1−p)·M`. Every physical correlation block is
//! `M = R_A·diag(t)·R_Bᵀ` with `t` in the Bell-diagonal tetrahedron, and
//! `det(R_A X R_Bᵀ) = det X`, so the search runs over
//! `det(p·Σ a_m Q_m + (1−p)·diag(t))` with free rotations `Q_m`: the local
//! frames are absorbed into the channel rotations.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::channels::{random_channel, MixedUnitaryChannel, Unitary2};
use crate::error::{Error, Result};
use crate::linalg::{Axis, Mat3};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::rng::{self, tag};
use crate::scenario::{exact_correlation, CausalScenario};
use crate::states::{bloch_compose, random_state, singlet, werner_state, BlochForm, WERNER_MIN};

/// Number of unitary terms allowed in the direct cause.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NdcClass {
    One,
    Two,
    ThreeOrMore,
}

impl NdcClass {
    pub const ALL: [NdcClass; 3] = [NdcClass::One, NdcClass::Two, NdcClass::ThreeOrMore];

    /// Terms used when searching this class. Three suffice for "three or
    /// more": any mixed-unitary correlation matrix is already a
    /// combination of a few rotations, and the tests cross-check against
    /// four and five.
    pub fn terms(self) -> usize {
        match self {
            NdcClass::One => 1,
            NdcClass::Two => 2,
            NdcClass::ThreeOrMore => 3,
        }
    }

    pub fn from_terms(n: usize) -> Result<Self> {
        match n {
            0 => Err(Error::arg("N must be at least 1")),
            1 => Ok(NdcClass::One),
            2 => Ok(NdcClass::Two),
            _ => Ok(NdcClass::ThreeOrMore),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            NdcClass::One => "1",
            NdcClass::Two => "2",
            NdcClass::ThreeOrMore => ">=3",
        }
    }
}

impl fmt::Display for NdcClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for NdcClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1" => Ok(NdcClass::One),
            "2" => Ok(NdcClass::Two),
            "3" | ">=3" | "≥3" | "3+" => Ok(NdcClass::ThreeOrMore),
            other => Err(Error::arg(format!("unknown N class {other:?} (expected 1, 2 or >=3)"))),
        }
    }
}

impl Serialize for NdcClass {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for NdcClass {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mechanism {
    /// Direct cause through a channel with this many unitary terms.
    Direct(usize),
    Common,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeInterval {
    pub lo: f64,
    pub hi: f64,
    pub attained_lo: String,
    pub attained_hi: String,
}

impl RangeInterval {
    pub fn contains(&self, x: f64, tol: f64) -> bool {
        x >= self.lo - tol && x <= self.hi + tol
    }
}

pub fn theoretical_range(m: Mechanism) -> Result<RangeInterval> {
    let (lo, hi, attained_lo, attained_hi) = match m {
        Mechanism::Direct(0) => return Err(Error::arg("N must be at least 1")),
        Mechanism::Direct(1) => (1.0, 1.0, "identity", "identity"),
        Mechanism::Direct(2) => (0.0, 1.0, "half-half mixture of identity and σ_x", "identity"),
        Mechanism::Direct(_) => (
            -1.0 / 27.0,
            1.0,
            "equal mixture of σ_x, σ_y, σ_z",
            "identity",
        ),
        Mechanism::Common => (-1.0, 1.0 / 27.0, "singlet", "Werner state with ω = −1/3"),
    };
    Ok(RangeInterval { lo, hi, attained_lo: attained_lo.into(), attained_hi: attained_hi.into() })
}

/// Scenarios attaining the `(lo, hi)` endpoints of [`theoretical_range`].
pub fn range_witnesses(m: Mechanism) -> Result<(CausalScenario, CausalScenario)> {
    let identity = || CausalScenario::direct(MixedUnitaryChannel::identity());
    let pauli = Unitary2::pauli;
    Ok(match m {
        Mechanism::Direct(0) => return Err(Error::arg("N must be at least 1")),
        Mechanism::Direct(1) => (identity(), identity()),
        Mechanism::Direct(2) => (
            CausalScenario::direct(MixedUnitaryChannel::uniform(vec![Unitary2::identity(), pauli(Axis::X)])?),
            identity(),
        ),
        Mechanism::Direct(_) => (
            CausalScenario::direct(MixedUnitaryChannel::uniform(vec![
                pauli(Axis::X),
                pauli(Axis::Y),
                pauli(Axis::Z),
            ])?),
            identity(),
        ),
        Mechanism::Common => (
            CausalScenario::common(singlet()),
            CausalScenario::common(werner_state(WERNER_MIN)?),
        ),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Max,
    Min,
}

/// Sign patterns of the four Bell states; their convex hull is the set of
/// attainable diagonal correlation vectors.
const TETRAHEDRON: [[f64; 3]; 4] = [[-1.0, -1.0, -1.0], [-1.0, 1.0, 1.0], [1.0, -1.0, 1.0], [1.0, 1.0, -1.0]];

/// A point of the reduced search space, i.e. a concrete mixture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureWitness {
    pub p: f64,
    pub weights: Vec<f64>,
    /// Rotation vectors (axis × angle) of `Q_m`.
    pub rotations: Vec<[f64; 3]>,
    pub t: [f64; 3],
}

impl MixtureWitness {
    fn decode(p: f64, terms: usize, x: &[f64]) -> Self {
        let rotations: Vec<[f64; 3]> = (0..terms).map(|m| [x[3 * m], x[3 * m + 1], x[3 * m + 2]]).collect();
        let mut rest = &x[3 * terms..];
        let weights = if terms > 1 {
            let w = squared_simplex(&rest[..terms]);
            rest = &rest[terms..];
            w
        } else {
            vec![1.0]
        };
        let lambda = squared_simplex(&rest[..4]);
        let mut t = [0.0; 3];
        for (l, v) in lambda.iter().zip(&TETRAHEDRON) {
            for i in 0..3 {
                t[i] += l * v[i];
            }
        }
        MixtureWitness { p, weights, rotations, t }
    }

    pub fn correlation(&self) -> Mat3 {
        let q = self
            .rotations
            .iter()
            .zip(&self.weights)
            .fold(Mat3::zeros(), |acc, (v, a)| acc + Mat3::from_rotation_vector(*v).scale(*a));
        q.scale(self.p) + Mat3::diag(self.t).scale(1.0 - self.p)
    }

    pub fn delta(&self) -> f64 {
        self.correlation().det()
    }

    /// The mixture as a full scenario: `U_m` rotates the Bloch sphere by
    /// `Q_mᵀ`, and the common cause is the Bell-diagonal state with
    /// correlations `t`.
    pub fn scenario(&self) -> Result<CausalScenario> {
        let unitaries = self
            .rotations
            .iter()
            .map(|v| {
                let angle = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                if angle == 0.0 {
                    Ok(Unitary2::identity())
                } else {
                    Unitary2::from_axis_angle([-v[0], -v[1], -v[2]], angle)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let channel = MixedUnitaryChannel::new(self.weights.clone(), unitaries)?;
        let state = bloch_compose(&BlochForm { m: Mat3::diag(self.t), ..BlochForm::zeros() })?;
        CausalScenario::mixture(self.p, channel, state)
    }
}

/// `λ_i = y_i² / Σ y²`, a smooth surjection onto the probability simplex.
fn squared_simplex(y: &[f64]) -> Vec<f64> {
    let total: f64 = y.iter().map(|v| v * v).sum();
    if !(total > 0.0) || !total.is_finite() {
        return vec![1.0 / y.len() as f64; y.len()];
    }
    y.iter().map(|v| v * v / total).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub restarts: usize,
    /// Settings for each simplex run.
    pub local: NelderMeadOptions,
    /// Maximum number of times a converged simplex is rebuilt around its
    /// best vertex; stops early once a rebuild no longer improves the value
    /// by more than `local.ftol`.
    pub polish: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { restarts: 64, local: NelderMeadOptions::default(), polish: 20 }
    }
}

/// Restarts ending within this distance of the best value count as hits.
pub const HIT_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryOptimum {
    pub value: f64,
    pub witness: MixtureWitness,
    /// Restarts that reached the best value within [`HIT_TOL`].
    pub hits: usize,
    /// Worst final value over restarts.
    pub worst: f64,
}

fn local_search<F: Fn(&[f64]) -> f64>(f: &F, x0: Vec<f64>, opts: &SearchOptions) -> (Vec<f64>, f64) {
    let mut best = nelder_mead(f, &x0, &opts.local);
    let mut step = opts.local.step;
    for _ in 0..opts.polish {
        step = (step * 0.5).max(1e-4);
        let again = nelder_mead(f, &best.x, &NelderMeadOptions { step, ..opts.local });
        let gain = best.f - again.f;
        if again.f < best.f {
            best = again;
        }
        if gain <= opts.local.ftol {
            break;
        }
    }
    (best.x, best.f)
}

/// Best extremum of Δ over mixtures with direct-cause weight `p` whose
/// channel has `class.terms()` unitaries, from `opts.restarts` random
/// starting points drawn from `rng`.
pub fn optimize_boundary<R: Rng + ?Sized>(
    class: NdcClass,
    p: f64,
    direction: Direction,
    opts: &SearchOptions,
    rng: &mut R,
) -> Result<BoundaryOptimum> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::arg(format!("mixing probability must be in [0,1], got {p}")));
    }
    if opts.restarts == 0 {
        return Err(Error::arg("at least one restart is required"));
    }
    let terms = class.terms();
    let dim = 3 * terms + if terms > 1 { terms } else { 0 } + 4;
    let sign = match direction {
        Direction::Max => -1.0,
        Direction::Min => 1.0,
    };
    let objective = |x: &[f64]| sign * MixtureWitness::decode(p, terms, x).delta();

    let mut finals = Vec::with_capacity(opts.restarts);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for _ in 0..opts.restarts {
        let mut x0 = Vec::with_capacity(dim);
        for _ in 0..terms {
            // Uniform in the ball of radius π covers SO(3).
            let v = loop {
                let v = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
                if v.iter().map(|c: &f64| c * c).sum::<f64>() <= 1.0 {
                    break v;
                }
            };
            x0.extend(v.map(|c| c * std::f64::consts::PI));
        }
        while x0.len() < dim {
            x0.push(rng.random_range(0.05..1.0));
        }
        let (x, f) = local_search(&objective, x0, opts);
        finals.push(f);
        if best.as_ref().is_none_or(|(_, fb)| f < *fb) {
            best = Some((x, f));
        }
    }
    let (x, f) = best.expect("restarts >= 1");
    let witness = MixtureWitness::decode(p, terms, &x);
    Ok(BoundaryOptimum {
        value: sign * f,
        witness,
        hits: finals.iter().filter(|v| **v - f <= HIT_TOL).count(),
        worst: sign * finals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Min and max of Δ over `samples` random mixtures (Haar unitaries,
/// Dirichlet weights, Hilbert–Schmidt states). An oracle for the optimizer
/// that does not share its parametrization.
pub fn empirical_range<R: Rng + ?Sized>(class: NdcClass, p: f64, samples: usize, rng: &mut R) -> Result<RangeInterval> {
    empirical_range_terms(class.terms(), p, samples, rng)
}

/// As [`empirical_range`] with an explicit number of channel terms.
pub fn empirical_range_terms<R: Rng + ?Sized>(terms: usize, p: f64, samples: usize, rng: &mut R) -> Result<RangeInterval> {
    if samples == 0 {
        return Err(Error::arg("at least one sample is required"));
    }
    let (mut lo, mut hi) = ((f64::INFINITY, 0), (f64::NEG_INFINITY, 0));
    for i in 0..samples {
        let ch = random_channel(terms, rng)?;
        let st = random_state(rng);
        let d = exact_correlation(&CausalScenario::mixture(p, ch, st)?)?.delta;
        if d < lo.0 {
            lo = (d, i);
        }
        if d > hi.0 {
            hi = (d, i);
        }
    }
    Ok(RangeInterval {
        lo: lo.0,
        hi: hi.0,
        attained_lo: format!("random sample {}", lo.1),
        attained_hi: format!("random sample {}", hi.1),
    })
}

/// Optimized lower and upper boundary curves of Δ against `p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTable {
    pub ndc_class: NdcClass,
    pub p_grid: Vec<f64>,
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
    pub restarts: usize,
    /// Function tolerance of the local search.
    pub tolerance: f64,
    pub seed: u64,
    #[serde(default)]
    pub upper_hits: Vec<usize>,
    #[serde(default)]
    pub lower_hits: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    p: f64,
    lower: f64,
    upper: f64,
    ndc_class: NdcClass,
}

/// `n` evenly spaced points from 0 to 1 inclusive.
pub fn p_grid(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::arg("p grid needs at least 2 points"));
    }
    let last = (n - 1) as f64;
    Ok((0..n).map(|i| i as f64 / last).collect())
}

fn class_code(class: NdcClass) -> u64 {
    class.terms() as u64
}

impl BoundaryTable {
    /// Optimizes both curves on `p_grid(p_steps)`. Each (grid point,
    /// direction) pair draws its restarts from its own stream, so the
    /// table does not depend on thread scheduling.
    pub fn compute(class: NdcClass, p_steps: usize, opts: &SearchOptions, seed: u64) -> Result<Self> {
        let grid = p_grid(p_steps)?;
        let jobs: Vec<(usize, Direction)> =
            (0..grid.len()).flat_map(|i| [(i, Direction::Max), (i, Direction::Min)]).collect();
        let results = jobs
            .par_iter()
            .map(|&(i, dir)| {
                let d = match dir {
                    Direction::Max => 0,
                    Direction::Min => 1,
                };
                let mut r = rng::stream(seed, &[tag::RESTART, class_code(class), i as u64, d]);
                optimize_boundary(class, grid[i], dir, opts, &mut r)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut table = BoundaryTable {
            ndc_class: class,
            upper: Vec::with_capacity(grid.len()),
            lower: Vec::with_capacity(grid.len()),
            upper_hits: Vec::with_capacity(grid.len()),
            lower_hits: Vec::with_capacity(grid.len()),
            p_grid: grid,
            restarts: opts.restarts,
            tolerance: opts.local.ftol,
            seed,
        };
        for pair in results.chunks(2) {
            table.upper.push(pair[0].value);
            table.upper_hits.push(pair[0].hits);
            table.lower.push(pair[1].value);
            table.lower_hits.push(pair[1].hits);
        }
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.p_grid.len();
        if n < 2 || self.upper.len() != n || self.lower.len() != n {
            return Err(Error::Data(format!(
                "boundary table needs matching p, lower, upper columns with at least 2 rows (got {}, {}, {})",
                n,
                self.lower.len(),
                self.upper.len()
            )));
        }
        if self.p_grid[0] != 0.0 || self.p_grid[n - 1] != 1.0 || self.p_grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Data("boundary table p grid must rise strictly from 0 to 1".into()));
        }
        for i in 0..n {
            if !(self.lower[i] <= self.upper[i]) || self.lower[i] < -1.0 - 1e-9 || self.upper[i] > 1.0 + 1e-9 {
                return Err(Error::Data(format!(
                    "boundary table row {i}: need −1 ≤ lower ≤ upper ≤ 1, got [{}, {}]",
                    self.lower[i], self.upper[i]
                )));
            }
        }
        Ok(())
    }

    /// Index `i` and fraction `s` with `p = (1−s)·p_i + s·p_{i+1}`.
    fn locate(&self, p: f64) -> (usize, f64) {
        let n = self.p_grid.len();
        let i = self.p_grid.partition_point(|&g| g <= p).clamp(1, n - 1) - 1;
        let (a, b) = (self.p_grid[i], self.p_grid[i + 1]);
        (i, ((p - a) / (b - a)).clamp(0.0, 1.0))
    }

    pub fn upper_at(&self, p: f64) -> f64 {
        let (i, s) = self.locate(p);
        (1.0 - s) * self.upper[i] + s * self.upper[i + 1]
    }

    pub fn lower_at(&self, p: f64) -> f64 {
        let (i, s) = self.locate(p);
        (1.0 - s) * self.lower[i] + s * self.lower[i + 1]
    }

    /// Largest grid spacing.
    pub fn resolution(&self) -> f64 {
        self.p_grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for i in 0..self.p_grid.len() {
            out.serialize(CsvRow { p: self.p_grid[i], lower: self.lower[i], upper: self.upper[i], ndc_class: self.ndc_class })
                .map_err(|e| Error::Data(e.to_string()))?;
        }
        out.flush().map_err(|e| Error::Data(e.to_string()))
    }

    /// Reads the CSV form, one table per class in order of appearance. The
    /// optimization metadata is not part of it and comes back as zeros.
    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Vec<Self>> {
        let mut tables: Vec<BoundaryTable> = Vec::new();
        for row in csv::Reader::from_reader(r).deserialize::<CsvRow>() {
            let row = row.map_err(|e| Error::Data(format!("boundary CSV: {e}")))?;
            let idx = match tables.iter().position(|t| t.ndc_class == row.ndc_class) {
                Some(i) => i,
                None => {
                    tables.push(BoundaryTable {
                        ndc_class: row.ndc_class,
                        p_grid: Vec::new(),
                        upper: Vec::new(),
                        lower: Vec::new(),
                        restarts: 0,
                        tolerance: 0.0,
                        seed: 0,
                        upper_hits: Vec::new(),
                        lower_hits: Vec::new(),
                    });
                    tables.len() - 1
                }
            };
            let t = &mut tables[idx];
            t.p_grid.push(row.p);
            t.lower.push(row.lower);
            t.upper.push(row.upper);
        }
        if tables.is_empty() {
            return Err(Error::Data("boundary CSV has no rows".into()));
        }
        for t in &tables {
            t.validate()?;
        }
        Ok(tables)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn quick() -> SearchOptions {
        SearchOptions { restarts: 8, ..Default::default() }
    }

    fn opt(class: NdcClass, p: f64, dir: Direction, seed: u64) -> BoundaryOptimum {
        optimize_boundary(class, p, dir, &quick(), &mut rng(seed)).unwrap()
    }

    #[test]
    fn theoretical_ranges() {
        let r = |m| {
            let r = theoretical_range(m).unwrap();
            (r.lo, r.hi)
        };
        assert_eq!(r(Mechanism::Direct(1)), (1.0, 1.0));
        assert_eq!(r(Mechanism::Direct(2)), (0.0, 1.0));
        assert_eq!(r(Mechanism::Direct(3)), (-1.0 / 27.0, 1.0));
        assert_eq!(r(Mechanism::Direct(7)), (-1.0 / 27.0, 1.0));
        assert_eq!(r(Mechanism::Common), (-1.0, 1.0 / 27.0));
        assert!(theoretical_range(Mechanism::Direct(0)).is_err());
    }

    #[test]
    fn witnesses_attain_endpoints() {
        for m in [Mechanism::Direct(1), Mechanism::Direct(2), Mechanism::Direct(3), Mechanism::Common] {
            let range = theoretical_range(m).unwrap();
            let (lo, hi) = range_witnesses(m).unwrap();
            let dlo = exact_correlation(&lo).unwrap().delta;
            let dhi = exact_correlation(&hi).unwrap().delta;
            assert!((dlo - range.lo).abs() < 1e-12, "{m:?}: {dlo}");
            assert!((dhi - range.hi).abs() < 1e-12, "{m:?}: {dhi}");
        }
    }

    #[test]
    fn ndc_class_parsing() {
        for c in NdcClass::ALL {
            assert_eq!(c.label().parse::<NdcClass>().unwrap(), c);
            assert_eq!(NdcClass::from_terms(c.terms()).unwrap(), c);
        }
        assert_eq!("3".parse::<NdcClass>().unwrap(), NdcClass::ThreeOrMore);
        assert_eq!(NdcClass::from_terms(9).unwrap(), NdcClass::ThreeOrMore);
        assert!("0".parse::<NdcClass>().is_err());
        assert_eq!(serde_json::to_string(&NdcClass::ThreeOrMore).unwrap(), "\">=3\"");
    }

    #[test]
    fn squared_simplex_is_a_distribution() {
        let w = squared_simplex(&[1.0, -2.0, 0.5]);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((w[1] - 4.0 / 5.25).abs() < 1e-15);
        assert_eq!(squared_simplex(&[0.0, 0.0]), vec![0.5, 0.5]);
    }

    #[test]
    fn decoded_points_are_physical_and_exact() {
        // The reduced objective must agree with the full simulator on the
        // reconstructed scenario.
        let mut r = rng(3);
        for terms in 1..=4 {
            let dim = 3 * terms + if terms > 1 { terms } else { 0 } + 4;
            for _ in 0..50 {
                let x: Vec<f64> = (0..dim).map(|_| r.random_range(-4.0..4.0)).collect();
                let p = r.random_range(0.0..=1.0);
                let w = MixtureWitness::decode(p, terms, &x);
                let sc = w.scenario().unwrap();
                let exact = exact_correlation(&sc).unwrap();
                assert!((exact.delta - w.delta()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn endpoints() {
        for class in NdcClass::ALL {
            assert!((opt(class, 1.0, Direction::Max, 1).value - 1.0).abs() < 1e-6);
            assert!((opt(class, 0.0, Direction::Max, 2).value - 1.0 / 27.0).abs() < 1e-6);
            assert!((opt(class, 0.0, Direction::Min, 3).value + 1.0).abs() < 1e-6);
        }
        assert!((opt(NdcClass::One, 1.0, Direction::Min, 4).value - 1.0).abs() < 1e-9);
        assert!(opt(NdcClass::Two, 1.0, Direction::Min, 5).value.abs() < 1e-6);
        assert!((opt(NdcClass::ThreeOrMore, 1.0, Direction::Min, 6).value + 1.0 / 27.0).abs() < 1e-6);
    }

    #[test]
    fn optimum_witness_is_exact() {
        let o = opt(NdcClass::ThreeOrMore, 0.4, Direction::Min, 9);
        let exact = exact_correlation(&o.witness.scenario().unwrap()).unwrap().delta;
        assert!((exact - o.value).abs() < 1e-12);
        assert!(o.hits >= 1 && o.worst >= o.value);
    }

    #[test]
    fn more_terms_do_not_extend_the_range() {
        // Guards the choice of three terms for the "three or more" class.
        for p in [0.3, 0.6, 0.9] {
            for dir in [Direction::Max, Direction::Min] {
                let three = opt(NdcClass::ThreeOrMore, p, dir, 11).value;
                let o = SearchOptions { restarts: 8, ..Default::default() };
                for terms in [4, 5] {
                    let more = optimize_terms(terms, p, dir, &o, &mut rng(12)).value;
                    let gain = match dir {
                        Direction::Max => more - three,
                        Direction::Min => three - more,
                    };
                    assert!(gain < 1e-6, "p={p} {dir:?} N={terms}: {more} vs {three}");
                }
            }
        }
    }

    /// `optimize_boundary` with an arbitrary term count, for the test above.
    fn optimize_terms(terms: usize, p: f64, dir: Direction, opts: &SearchOptions, r: &mut ChaCha8Rng) -> BoundaryOptimum {
        let dim = 4 * terms + 4;
        let sign = if dir == Direction::Max { -1.0 } else { 1.0 };
        let f = |x: &[f64]| sign * MixtureWitness::decode(p, terms, x).delta();
        let mut best: Option<(Vec<f64>, f64)> = None;
        for _ in 0..opts.restarts {
            let x0: Vec<f64> = (0..dim).map(|_| r.random_range(-2.0..2.0)).collect();
            let (x, v) = local_search(&f, x0, opts);
            if best.as_ref().is_none_or(|(_, b)| v < *b) {
                best = Some((x, v));
            }
        }
        let (x, v) = best.unwrap();
        BoundaryOptimum { value: sign * v, witness: MixtureWitness::decode(p, terms, &x), hits: 0, worst: 0.0 }
    }

    #[test]
    fn table_invariants_and_nesting() {
        let opts = quick();
        let tables: Vec<_> = NdcClass::ALL.iter().map(|&c| BoundaryTable::compute(c, 11, &opts, 5).unwrap()).collect();
        for t in &tables {
            t.validate().unwrap();
            assert!((t.upper[0] - 1.0 / 27.0).abs() < 1e-3);
            assert!((t.upper[10] - 1.0).abs() < 1e-3);
        }
        let last = &tables[2];
        assert!((last.lower[0] + 1.0).abs() < 1e-3 && (last.lower[10] + 1.0 / 27.0).abs() < 1e-3);
        for i in 0..11 {
            for w in tables.windows(2) {
                assert!(w[1].lower[i] <= w[0].lower[i] + 1e-6, "lower nesting at {i}");
                assert!(w[1].upper[i] >= w[0].upper[i] - 1e-6, "upper nesting at {i}");
            }
        }
    }

    #[test]
    fn table_is_deterministic_and_round_trips() {
        let opts = SearchOptions { restarts: 2, ..Default::default() };
        let a = BoundaryTable::compute(NdcClass::Two, 5, &opts, 1).unwrap();
        let b = BoundaryTable::compute(NdcClass::Two, 5, &opts, 1).unwrap();
        assert_eq!(a, b);
        let json: BoundaryTable = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(json, a);

        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("p,lower,upper,ndc_class\n"));
        let back = BoundaryTable::read_csv(&buf[..]).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!((&back[0].p_grid, &back[0].lower, &back[0].upper), (&a.p_grid, &a.lower, &a.upper));

        let c = BoundaryTable::compute(NdcClass::One, 3, &opts, 1).unwrap();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        // One header for both classes, as the CLI writes it.
        let header = "p,lower,upper,ndc_class\n";
        let single = format!("{header}{}", text.replace(header, ""));
        let both = BoundaryTable::read_csv(single.as_bytes()).unwrap();
        assert_eq!(both.iter().map(|t| t.ndc_class).collect::<Vec<_>>(), [NdcClass::Two, NdcClass::One]);
        assert_eq!(both[1].p_grid.len(), 3);
    }

    #[test]
    fn interpolation() {
        let t = BoundaryTable {
            ndc_class: NdcClass::One,
            p_grid: vec![0.0, 0.5, 1.0],
            upper: vec![0.0, 0.5, 1.0],
            lower: vec![-1.0, 0.0, 1.0],
            restarts: 1,
            tolerance: 1e-9,
            seed: 0,
            upper_hits: vec![],
            lower_hits: vec![],
        };
        assert_eq!(t.upper_at(0.25), 0.25);
        assert_eq!(t.lower_at(0.75), 0.5);
        assert_eq!(t.upper_at(1.0), 1.0);
        assert_eq!(t.lower_at(0.0), -1.0);
        assert_eq!(t.resolution(), 0.5);
    }

    #[test]
    fn oracle_inside_optimized_interval() {
        let mut r = rng(21);
        for class in NdcClass::ALL {
            let emp = empirical_range(class, 0.5, 2000, &mut r).unwrap();
            let hi = opt(class, 0.5, Direction::Max, 22).value;
            let lo = opt(class, 0.5, Direction::Min, 23).value;
            assert!(emp.lo >= lo - 1e-9 && emp.hi <= hi + 1e-9, "{class}: {emp:?} vs [{lo}, {hi}]");
        }
        let single = empirical_range(NdcClass::One, 1.0, 200, &mut r).unwrap();
        assert!((single.lo - 1.0).abs() < 1e-9 && (single.hi - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(optimize_boundary(NdcClass::One, 1.5, Direction::Max, &quick(), &mut rng(0)).is_err());
        let none = SearchOptions { restarts: 0, ..Default::default() };
        assert!(optimize_boundary(NdcClass::One, 0.5, Direction::Max, &none, &mut rng(0)).is_err());
        assert!(empirical_range(NdcClass::One, 0.5, 0, &mut rng(0)).is_err());
        assert!(p_grid(1).is_err());
    }
}
