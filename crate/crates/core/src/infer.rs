//! From a measured Δ (and optionally its confidence interval) to statements
//! about the causal structure.

use std::collections::BTreeMap;

use serde::{Serialize, Serializer};

use crate::bounds::BoundaryTable;
use crate::error::{Error, Result};

/// Δ above this requires a direct cause.
pub const DIRECT_THRESHOLD: f64 = 1.0 / 27.0;
/// Δ below this requires a common cause.
pub const COMMON_THRESHOLD: f64 = -1.0 / 27.0;

/// Slack when comparing Δ against the attainable range of a pure direct
/// cause, so that rounding in an exactly computed Δ cannot raise the
/// required number of unitary terms.
pub const NDC_EDGE_TOL: f64 = 1e-9;

/// Slack added to the boundary curves in [`p_range`]; covers the
/// optimizer's convergence tolerance.
pub const P_RANGE_SLACK: f64 = 1e-6;

/// How far outside [-1, 1] a Δ may fall from floating-point rounding before
/// it is rejected rather than clamped.
pub const DELTA_ROUND_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Presence {
    Yes,
    Undetermined,
}

/// Fewest unitary terms a pure direct cause needs to produce the data.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NdcMin {
    AtLeast(u8),
    NotPureDc,
}

impl Serialize for NdcMin {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            NdcMin::AtLeast(n) => s.serialize_u8(*n),
            NdcMin::NotPureDc => s.serialize_str("not pure DC possible"),
        }
    }
}

/// Mixing probabilities compatible with the data, as disjoint closed
/// intervals in increasing order. Empty means infeasible.
#[derive(Clone, Debug, PartialEq)]
pub struct PRange {
    pub pieces: Vec<[f64; 2]>,
    /// Grid spacing of the table the range was read from.
    pub resolution: f64,
}

impl PRange {
    pub fn is_infeasible(&self) -> bool {
        self.pieces.is_empty()
    }

    /// Smallest interval containing every piece.
    pub fn hull(&self) -> Option<[f64; 2]> {
        Some([self.pieces.first()?[0], self.pieces.last()?[1]])
    }

    pub fn contains(&self, p: f64) -> bool {
        self.pieces.iter().any(|[a, b]| *a <= p && p <= *b)
    }
}

impl Serialize for PRange {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        match self.hull() {
            None => s.serialize_str("infeasible"),
            Some(h) => {
                let mut m = s.serialize_map(Some(3))?;
                m.serialize_entry("interval", &h)?;
                m.serialize_entry("pieces", &self.pieces)?;
                m.serialize_entry("resolution", &self.resolution)?;
                m.end()
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Thresholds {
    pub direct: f64,
    pub common: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InferenceReport {
    pub delta: f64,
    pub ci: Option<[f64; 2]>,
    pub direct_cause_present: Presence,
    pub common_cause_present: Presence,
    pub ndc_min_pure_dc: NdcMin,
    /// Keyed by N class label.
    pub p_feasible: BTreeMap<String, PRange>,
    pub thresholds: Thresholds,
    /// Larger Δ means more direct-cause contribution; an ordinal score, not
    /// a calibrated weight.
    pub direct_cause_score: f64,
}

/// Validates the inputs and returns Δ with rounding overshoot clamped away.
fn check_inputs(delta: f64, ci: Option<[f64; 2]>) -> Result<f64> {
    if !(delta.abs() <= 1.0 + DELTA_ROUND_TOL) {
        return Err(Error::arg(format!("Δ must be in [-1, 1], got {delta}")));
    }
    if let Some([lo, hi]) = ci {
        if !(lo <= delta && delta <= hi) {
            return Err(Error::arg(format!("interval [{lo}, {hi}] does not contain Δ = {delta}")));
        }
    }
    Ok(delta.clamp(-1.0, 1.0))
}

/// Presence of each mechanism and the pure-direct-cause term bound. With an
/// interval, every claim is made from its least favourable end.
pub fn classify(delta: f64, ci: Option<[f64; 2]>) -> Result<InferenceReport> {
    let delta = check_inputs(delta, ci)?;
    let (lo, hi) = ci.map_or((delta, delta), |[a, b]| (a, b));
    let presence = |yes: bool| if yes { Presence::Yes } else { Presence::Undetermined };
    let ndc_min = if hi >= 1.0 - NDC_EDGE_TOL {
        NdcMin::AtLeast(1)
    } else if hi >= -NDC_EDGE_TOL {
        NdcMin::AtLeast(2)
    } else if hi >= COMMON_THRESHOLD - NDC_EDGE_TOL {
        NdcMin::AtLeast(3)
    } else {
        NdcMin::NotPureDc
    };
    Ok(InferenceReport {
        delta,
        ci,
        direct_cause_present: presence(lo > DIRECT_THRESHOLD),
        common_cause_present: presence(hi < COMMON_THRESHOLD),
        ndc_min_pure_dc: ndc_min,
        p_feasible: BTreeMap::new(),
        thresholds: Thresholds { direct: DIRECT_THRESHOLD, common: COMMON_THRESHOLD },
        direct_cause_score: delta,
    })
}

/// `{p : lower(p) ≤ Δ ≤ upper(p)}` with the curves linearly interpolated
/// between grid points.
pub fn p_range(delta: f64, table: &BoundaryTable) -> Result<PRange> {
    let delta = check_inputs(delta, None)?;
    p_range_interval([delta, delta], table)
}

/// `{p : [lower(p), upper(p)] meets [lo, hi]}`, the set of mixing
/// probabilities compatible with some Δ in the interval.
pub fn p_range_interval([lo, hi]: [f64; 2], table: &BoundaryTable) -> Result<PRange> {
    if !(lo <= hi) {
        return Err(Error::arg(format!("empty interval [{lo}, {hi}]")));
    }
    table.validate()?;
    let (hi, lo) = (hi + P_RANGE_SLACK, lo - P_RANGE_SLACK);
    let g = &table.p_grid;
    let mut pieces: Vec<[f64; 2]> = Vec::new();
    for i in 0..g.len() - 1 {
        // On the segment, with s ∈ [0,1]: lower(s) ≤ hi and upper(s) ≥ lo.
        let (mut s0, mut s1) = (0.0f64, 1.0f64);
        for (a, b, bound, below) in [
            (table.lower[i], table.lower[i + 1], hi, true),
            (table.upper[i], table.upper[i + 1], lo, false),
        ] {
            // Constraint a + s(b − a) ≤ bound (or ≥ when !below).
            let (a, b, bound) = if below { (a, b, bound) } else { (-a, -b, -bound) };
            let slope = b - a;
            if slope == 0.0 {
                if a > bound {
                    s1 = -1.0;
                }
            } else if slope > 0.0 {
                s1 = s1.min((bound - a) / slope);
            } else {
                s0 = s0.max((bound - a) / slope);
            }
        }
        if s0 > s1 {
            continue;
        }
        let (a, b) = (g[i] + s0 * (g[i + 1] - g[i]), g[i] + s1 * (g[i + 1] - g[i]));
        match pieces.last_mut() {
            Some(last) if a <= last[1] => last[1] = last[1].max(b),
            _ => pieces.push([a, b]),
        }
    }
    Ok(PRange { pieces, resolution: table.resolution() })
}

/// [`classify`] plus the feasible `p` for each supplied table.
pub fn infer(delta: f64, ci: Option<[f64; 2]>, tables: &[BoundaryTable]) -> Result<InferenceReport> {
    let mut report = classify(delta, ci)?;
    for t in tables {
        let r = p_range_interval(ci.unwrap_or([delta, delta]), t)?;
        report.p_feasible.insert(t.ndc_class.label().to_string(), r);
    }
    Ok(report)
}
