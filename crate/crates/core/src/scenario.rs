//! The three causal structures between qubits A and B and their exact
//! correlation matrices.

use serde::{Deserialize, Serialize};

use crate::channels::{channel_correlation, MixedUnitaryChannel};
use crate::error::{Error, Result};
use crate::linalg::{CMat2, Mat3};
use crate::states::{bloch_decompose, validate_qubit, TwoQubitState};

#[derive(Clone, Debug, PartialEq)]
pub enum CausalScenario {
    /// A's post-measurement state is carried to B by `channel`.
    DirectCause { channel: MixedUnitaryChannel, input: CMat2 },
    /// A and B are the two halves of `state`.
    CommonCause { state: TwoQubitState },
    /// Per trial, the direct cause acts with probability `p`, the common
    /// cause otherwise.
    Mixture { p: f64, channel: MixedUnitaryChannel, state: TwoQubitState, input: CMat2 },
}

pub fn maximally_mixed_qubit() -> CMat2 {
    CMat2::identity().scale_re(0.5)
}

impl CausalScenario {
    pub fn direct(channel: MixedUnitaryChannel) -> Self {
        CausalScenario::DirectCause { channel, input: maximally_mixed_qubit() }
    }

    pub fn direct_with_input(channel: MixedUnitaryChannel, input: CMat2) -> Result<Self> {
        validate_qubit(&input)?;
        Ok(CausalScenario::DirectCause { channel, input })
    }

    pub fn common(state: TwoQubitState) -> Self {
        CausalScenario::CommonCause { state }
    }

    pub fn mixture(p: f64, channel: MixedUnitaryChannel, state: TwoQubitState) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::arg(format!("mixing probability must be in [0,1], got {p}")));
        }
        Ok(CausalScenario::Mixture { p, channel, state, input: maximally_mixed_qubit() })
    }

    /// Probability that a trial is generated by the direct cause.
    pub fn direct_weight(&self) -> f64 {
        match self {
            CausalScenario::DirectCause { .. } => 1.0,
            CausalScenario::CommonCause { .. } => 0.0,
            CausalScenario::Mixture { p, .. } => *p,
        }
    }
}

/// A 3×3 correlation matrix together with its determinant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub c: Mat3,
    pub delta: f64,
}

impl CorrelationMatrix {
    pub fn new(c: Mat3) -> Self {
        CorrelationMatrix { c, delta: causal_determinant(&c) }
    }
}

pub fn causal_determinant(c: &Mat3) -> f64 {
    c.det()
}

pub fn exact_correlation(sc: &CausalScenario) -> Result<CorrelationMatrix> {
    let c = match sc {
        CausalScenario::DirectCause { channel, .. } => channel_correlation(channel),
        CausalScenario::CommonCause { state } => bloch_decompose(state)?.m,
        CausalScenario::Mixture { p, channel, state, .. } => {
            channel_correlation(channel).scale(*p) + bloch_decompose(state)?.m.scale(1.0 - p)
        }
    };
    Ok(CorrelationMatrix::new(c))
}
