//! Shot-level simulation of the nine-setting measurement protocol and
//! estimation of the correlation matrix, its determinant, and bootstrap
//! confidence intervals from the resulting counts.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::MixedUnitaryChannel;
use crate::error::{Error, Result};
use crate::linalg::{kron, Axis, CMat2, Mat3};
use crate::rng::{self, tag};
use crate::scenario::{CausalScenario, CorrelationMatrix};
use crate::schema::ScenarioSpec;
use crate::states::TwoQubitState;

/// Trials per independently seeded block.
pub const BLOCK_SHOTS: u64 = 1 << 16;

/// Outcome counts for σ_j on A and σ_k on B.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotCounts {
    pub j: u8,
    pub k: u8,
    pub npp: u64,
    pub npm: u64,
    pub nmp: u64,
    pub nmm: u64,
}

impl ShotCounts {
    pub fn empty(j: Axis, k: Axis) -> Self {
        ShotCounts { j: j.label(), k: k.label(), npp: 0, npm: 0, nmp: 0, nmm: 0 }
    }

    pub fn total(&self) -> u64 {
        self.npp + self.npm + self.nmp + self.nmm
    }

    fn record(&mut self, a_plus: bool, b_plus: bool) {
        match (a_plus, b_plus) {
            (true, true) => self.npp += 1,
            (true, false) => self.npm += 1,
            (false, true) => self.nmp += 1,
            (false, false) => self.nmm += 1,
        }
    }

    fn merge(mut self, other: &ShotCounts) -> Self {
        self.npp += other.npp;
        self.npm += other.npm;
        self.nmp += other.nmp;
        self.nmm += other.nmm;
        self
    }

    /// `(n_pp + n_mm − n_pm − n_mp) / n`.
    pub fn correlation(&self) -> Result<f64> {
        let n = self.total();
        if n == 0 {
            return Err(Error::Data(format!("setting ({}, {}) has no counts", self.j, self.k)));
        }
        let agree = (self.npp + self.nmm) as f64;
        let disagree = (self.npm + self.nmp) as f64;
        Ok((agree - disagree) / n as f64)
    }
}

/// Counts for all nine settings plus provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentData {
    pub scenario: serde_json::Value,
    pub shots: u64,
    pub seed: u64,
    pub records: Vec<ShotCounts>,
}

impl ExperimentData {
    /// Exactly nine records, one per `(j, k)`.
    pub fn validate(&self) -> Result<()> {
        if self.records.len() != 9 {
            return Err(Error::Data(format!("expected 9 settings, found {}", self.records.len())));
        }
        let mut seen = [[false; 3]; 3];
        for r in &self.records {
            let j = Axis::from_label(r.j).map_err(|e| Error::Data(e.to_string()))?;
            let k = Axis::from_label(r.k).map_err(|e| Error::Data(e.to_string()))?;
            if std::mem::replace(&mut seen[j.idx()][k.idx()], true) {
                return Err(Error::Data(format!("setting ({}, {}) appears twice", r.j, r.k)));
            }
        }
        Ok(())
    }

    pub fn record(&self, j: Axis, k: Axis) -> Option<&ShotCounts> {
        self.records.iter().find(|r| r.j == j.label() && r.k == k.label())
    }
}

/// The nine settings in row-major `(j, k)` order.
pub fn settings() -> impl Iterator<Item = (Axis, Axis)> {
    Axis::ALL.into_iter().flat_map(|j| Axis::ALL.into_iter().map(move |k| (j, k)))
}

fn projector(axis: Axis, outcome_plus: bool) -> CMat2 {
    let s = if outcome_plus { 1.0 } else { -1.0 };
    (CMat2::identity() + axis.pauli().scale_re(s)).scale_re(0.5)
}

fn born(rho: &CMat2, proj: &CMat2) -> f64 {
    rho.trace_product(proj).re.clamp(0.0, 1.0)
}

/// Born-rule probabilities for one setting, precomputed from the scenario.
#[derive(Clone, Debug)]
struct SettingModel {
    p_direct: f64,
    direct: Option<DirectModel>,
    /// Cumulative `p(+,+), p(+,−), p(−,+)` for the common cause.
    common_cdf: Option<[f64; 3]>,
}

#[derive(Clone, Debug)]
struct DirectModel {
    p_a_plus: f64,
    weights: Vec<f64>,
    /// Cumulative unitary-selection weights.
    weight_cdf: Vec<f64>,
    /// `p(o_B = +1 | o_A, m)`, indexed `[a_plus as usize][m]`.
    p_b_plus: [Vec<f64>; 2],
}

impl DirectModel {
    fn new(channel: &MixedUnitaryChannel, input: &CMat2, j: Axis, k: Axis) -> Self {
        let p_a_plus = born(input, &projector(j, true));
        let mut acc = 0.0;
        let weight_cdf = channel
            .weights()
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        let b_plus = projector(k, true);
        let p_b_plus = [false, true].map(|a_plus| {
            // After outcome a, A collapses onto the eigenprojector of σ_j.
            let post = projector(j, a_plus);
            channel
                .unitaries()
                .iter()
                .map(|u| born(&post.conjugate_by(u.matrix()), &b_plus))
                .collect()
        });
        DirectModel { p_a_plus, weights: channel.weights().to_vec(), weight_cdf, p_b_plus }
    }

    fn trial<R: Rng + ?Sized>(&self, rng: &mut R) -> (bool, bool) {
        let a_plus = rng.random::<f64>() < self.p_a_plus;
        let u: f64 = rng.random();
        let m = self
            .weight_cdf
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.weight_cdf.len() - 1);
        let b_plus = rng.random::<f64>() < self.p_b_plus[a_plus as usize][m];
        (a_plus, b_plus)
    }
}

fn common_cdf(state: &TwoQubitState, j: Axis, k: Axis) -> [f64; 3] {
    let p = |a, b| {
        state
            .rho()
            .trace_product(&kron(&projector(j, a), &projector(k, b)))
            .re
            .max(0.0)
    };
    let ppp = p(true, true);
    let ppm = p(true, false);
    let pmp = p(false, true);
    [ppp, ppp + ppm, ppp + ppm + pmp]
}

fn common_trial<R: Rng + ?Sized>(cdf: &[f64; 3], rng: &mut R) -> (bool, bool) {
    let u: f64 = rng.random();
    if u < cdf[0] {
        (true, true)
    } else if u < cdf[1] {
        (true, false)
    } else if u < cdf[2] {
        (false, true)
    } else {
        (false, false)
    }
}

impl SettingModel {
    fn new(sc: &CausalScenario, j: Axis, k: Axis) -> Self {
        match sc {
            CausalScenario::DirectCause { channel, input } => SettingModel {
                p_direct: 1.0,
                direct: Some(DirectModel::new(channel, input, j, k)),
                common_cdf: None,
            },
            CausalScenario::CommonCause { state } => SettingModel {
                p_direct: 0.0,
                direct: None,
                common_cdf: Some(common_cdf(state, j, k)),
            },
            CausalScenario::Mixture { p, channel, state, input } => SettingModel {
                p_direct: *p,
                direct: Some(DirectModel::new(channel, input, j, k)),
                common_cdf: Some(common_cdf(state, j, k)),
            },
        }
    }

    fn run<R: Rng + ?Sized>(&self, counts: &mut ShotCounts, shots: u64, rng: &mut R) {
        for _ in 0..shots {
            let (a, b) = match (&self.direct, &self.common_cdf) {
                (Some(d), None) => d.trial(rng),
                (None, Some(c)) => common_trial(c, rng),
                (Some(d), Some(c)) => {
                    // One Bernoulli(p) draw per trial picks the mechanism.
                    if rng.random::<f64>() < self.p_direct {
                        d.trial(rng)
                    } else {
                        common_trial(c, rng)
                    }
                }
                (None, None) => unreachable!(),
            };
            counts.record(a, b);
        }
    }
}

/// Exact `[p(+,+), p(+,−), p(−,+), p(−,−)]` for setting `(j, k)`, the
/// distribution each simulated trial is drawn from.
pub fn outcome_probabilities(sc: &CausalScenario, j: Axis, k: Axis) -> [f64; 4] {
    let model = SettingModel::new(sc, j, k);
    let mut out = [0.0; 4];
    if let Some(d) = &model.direct {
        for (a_idx, a_plus) in [(0, true), (1, false)] {
            let pa = if a_plus { d.p_a_plus } else { 1.0 - d.p_a_plus };
            for (m, w) in d.weights.iter().enumerate() {
                let pb = d.p_b_plus[a_plus as usize][m];
                out[2 * a_idx] += model.p_direct * pa * w * pb;
                out[2 * a_idx + 1] += model.p_direct * pa * w * (1.0 - pb);
            }
        }
    }
    if let Some(c) = &model.common_cdf {
        let q = 1.0 - model.p_direct;
        for (o, p) in out.iter_mut().zip([c[0], c[1] - c[0], c[2] - c[1], 1.0 - c[2]]) {
            *o += q * p;
        }
    }
    out
}

/// `C` from [`outcome_probabilities`]: `c_jk = p(agree) − p(disagree)`.
pub fn born_correlation(sc: &CausalScenario) -> Mat3 {
    let mut c = Mat3::zeros();
    for (j, k) in settings() {
        let [pp, pm, mp, mm] = outcome_probabilities(sc, j, k);
        c[(j.idx(), k.idx())] = (pp + mm) - (pm + mp);
    }
    c
}

/// Runs `shots` trials of setting `(j, k)` drawing from `rng`.
pub fn simulate_setting<R: Rng + ?Sized>(
    sc: &CausalScenario,
    j: Axis,
    k: Axis,
    shots: u64,
    rng: &mut R,
) -> ShotCounts {
    let mut counts = ShotCounts::empty(j, k);
    SettingModel::new(sc, j, k).run(&mut counts, shots, rng);
    counts
}

/// All nine settings, `shots_per_setting` trials each.
///
/// Trials are split into blocks of [`BLOCK_SHOTS`]; block `b` of setting
/// `s` draws from stream `(seed, SHOTS, s, b)`. Blocks run in parallel and
/// merge by addition, so the result depends only on the inputs.
pub fn run_experiment(sc: &CausalScenario, shots_per_setting: u64, seed: u64) -> Result<ExperimentData> {
    if shots_per_setting == 0 {
        return Err(Error::arg("shots per setting must be at least 1"));
    }
    let blocks = shots_per_setting.div_ceil(BLOCK_SHOTS);
    let records = settings()
        .enumerate()
        .map(|(s, (j, k))| {
            let model = SettingModel::new(sc, j, k);
            (0..blocks)
                .into_par_iter()
                .map(|b| {
                    let len = BLOCK_SHOTS.min(shots_per_setting - b * BLOCK_SHOTS);
                    let mut r = rng::stream(seed, &[tag::SHOTS, s as u64, b]);
                    let mut c = ShotCounts::empty(j, k);
                    model.run(&mut c, len, &mut r);
                    c
                })
                .reduce(|| ShotCounts::empty(j, k), |x, y| x.merge(&y))
        })
        .collect();
    let scenario = serde_json::to_value(ScenarioSpec::describe(sc))
        .map_err(|e| Error::Data(format!("cannot serialize scenario: {e}")))?;
    Ok(ExperimentData { scenario, shots: shots_per_setting, seed, records })
}

/// Point estimate of `C` with per-entry binomial standard errors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub correlation: CorrelationMatrix,
    /// `sqrt((1 − ĉ²)/n)` per entry.
    pub se: Mat3,
}

pub fn estimate_correlation(data: &ExperimentData) -> Result<Estimate> {
    data.validate()?;
    let mut c = Mat3::zeros();
    let mut se = Mat3::zeros();
    for r in &data.records {
        let (j, k) = ((r.j - 1) as usize, (r.k - 1) as usize);
        let cjk = r.correlation()?;
        c[(j, k)] = cjk;
        se[(j, k)] = ((1.0 - cjk * cjk).max(0.0) / r.total() as f64).sqrt();
    }
    Ok(Estimate { correlation: CorrelationMatrix::new(c), se })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub delta_hat: f64,
    /// 2.5 % and 97.5 % percentiles of the resampled determinants.
    pub ci: [f64; 2],
    pub resamples: usize,
}

pub const DEFAULT_RESAMPLES: usize = 1000;
pub const MIN_RESAMPLES: usize = 100;

/// Draws `n` trials over four cells with probabilities `probs`.
fn multinomial4<R: Rng + ?Sized>(n: u64, probs: [f64; 4], rng: &mut R) -> [u64; 4] {
    let mut out = [0u64; 4];
    let mut left = n;
    let mut mass = 1.0;
    for i in 0..3 {
        if left == 0 {
            break;
        }
        let q = if mass > 0.0 { (probs[i] / mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw = Binomial::new(left, q).expect("q in [0,1]").sample(rng);
        out[i] = draw;
        left -= draw;
        mass -= probs[i];
    }
    out[3] = left;
    out
}

/// Linear-interpolation percentile of sorted data.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Percentile bootstrap of `Δ`: each resample redraws every setting's four
/// cells from a multinomial with the observed frequencies. Resample `r`
/// draws from stream `(seed, BOOTSTRAP, r)`.
pub fn bootstrap_delta(data: &ExperimentData, resamples: usize, seed: u64) -> Result<BootstrapResult> {
    if resamples < MIN_RESAMPLES {
        return Err(Error::arg(format!("need at least {MIN_RESAMPLES} resamples, got {resamples}")));
    }
    let delta_hat = estimate_correlation(data)?.correlation.delta;
    let cells: Vec<(usize, usize, u64, [f64; 4])> = data
        .records
        .iter()
        .map(|r| {
            let n = r.total();
            let f = |x: u64| x as f64 / n as f64;
            ((r.j - 1) as usize, (r.k - 1) as usize, n, [f(r.npp), f(r.npm), f(r.nmp), f(r.nmm)])
        })
        .collect();
    let mut deltas: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|b| {
            let mut r = rng::stream(seed, &[tag::BOOTSTRAP, b as u64]);
            let mut c = Mat3::zeros();
            for &(j, k, n, probs) in &cells {
                let [pp, pm, mp, mm] = multinomial4(n, probs, &mut r);
                c[(j, k)] = ((pp + mm) as f64 - (pm + mp) as f64) / n as f64;
            }
            c.det()
        })
        .collect();
    deltas.sort_by(f64::total_cmp);
    Ok(BootstrapResult {
        delta_hat,
        ci: [percentile(&deltas, 0.025), percentile(&deltas, 0.975)],
        resamples,
    })
}
