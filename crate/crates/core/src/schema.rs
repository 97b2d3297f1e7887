//! JSON descriptors for states, channels and scenarios.
//!
//! ```json
//! {"type":"bell","index":3}
//! {"type":"werner","omega":0.5,"depolarize":0.048}
//! {"type":"mixed","terms":[{"weight":0.5,"unitary":{"axis":[1,0,0],"angle":3.14159}}, ...]}
//! {"type":"mixture","p":0.5,"channel":{...},"state":{...}}
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channels::{haar_random_unitary, MixedUnitaryChannel, Unitary2};
use crate::linalg::{Axis, CMat2, CMat4, Mat3};
use crate::rng::{self, tag};
use crate::scenario::CausalScenario;
use crate::states::{
    bell_state, bloch_compose, depolarize, qubit_state, werner_state, BlochForm, TwoQubitState,
};

#[derive(Debug, Error)]
pub enum SchemaError {
    /// Malformed JSON or a field that does not fit the schema.
    #[error("{}{msg}", location(.line, .column))]
    Parse { line: Option<usize>, column: Option<usize>, msg: String },
    /// Well-formed descriptor whose content is rejected.
    #[error(transparent)]
    Build(#[from] crate::Error),
}

fn location(line: &Option<usize>, column: &Option<usize>) -> String {
    match (line, column) {
        (Some(l), Some(c)) => format!("line {l} column {c}: "),
        _ => String::new(),
    }
}

/// Deserializes `text`. Errors carry a line/column: serde_json's own when it
/// has one, otherwise the first occurrence of the field named in the message
/// (tagged enums buffer their content and lose positions).
pub fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, SchemaError> {
    serde_json::from_str(text).map_err(|e| {
        let msg = e.to_string();
        let (line, column) = if e.line() > 0 {
            (Some(e.line()), Some(e.column()))
        } else {
            field_position(text, &msg).map_or((None, None), |(l, c)| (Some(l), Some(c)))
        };
        SchemaError::Parse { line, column, msg }
    })
}

fn field_position(text: &str, msg: &str) -> Option<(usize, usize)> {
    let start = msg.find('`')? + 1;
    let len = msg[start..].find('`')?;
    let needle = format!("\"{}\"", &msg[start..start + len]);
    let offset = text.find(&needle)?;
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = offset - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    Some((line, column))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum StateSpec {
    Bell {
        index: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        depolarize: Option<f64>,
    },
    Werner {
        omega: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        depolarize: Option<f64>,
    },
    Bloch {
        #[serde(rename = "vA")]
        v_a: [f64; 3],
        #[serde(rename = "vB")]
        v_b: [f64; 3],
        #[serde(rename = "M")]
        m: [[f64; 3]; 3],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        depolarize: Option<f64>,
    },
    Dense {
        re: [[f64; 4]; 4],
        im: [[f64; 4]; 4],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        depolarize: Option<f64>,
    },
}

impl StateSpec {
    pub fn build(&self) -> crate::Result<TwoQubitState> {
        let (base, eps) = match self {
            StateSpec::Bell { index, depolarize } => (bell_state(*index)?, depolarize),
            StateSpec::Werner { omega, depolarize } => (werner_state(*omega)?, depolarize),
            StateSpec::Bloch { v_a, v_b, m, depolarize } => {
                (bloch_compose(&BlochForm { v_a: *v_a, v_b: *v_b, m: Mat3(*m) })?, depolarize)
            }
            StateSpec::Dense { re, im, depolarize } => {
                (TwoQubitState::new(CMat4::from_re_im(re, im))?, depolarize)
            }
        };
        match eps {
            Some(eps) => depolarize(&base, *eps),
            None => Ok(base),
        }
    }

    pub fn dense(state: &TwoQubitState) -> Self {
        StateSpec::Dense { re: state.rho().re(), im: state.rho().im(), depolarize: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisAngle {
    pub axis: [f64; 3],
    pub angle: f64,
}

/// A single unitary: explicit matrix, `exp(−i·angle·(n·σ)/2)`, or a Pauli
/// operator by index (0 = identity).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum UnitarySpec {
    Matrix(MatrixSpec),
    AxisAngle(AxisAngle),
    Pauli(PauliSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub re: [[f64; 2]; 2],
    pub im: [[f64; 2]; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PauliSpec {
    pub pauli: usize,
}

impl UnitarySpec {
    pub fn build(&self) -> crate::Result<Unitary2> {
        match self {
            UnitarySpec::Matrix(m) => Unitary2::new(CMat2::from_re_im(&m.re, &m.im)),
            UnitarySpec::AxisAngle(a) => Unitary2::from_axis_angle(a.axis, a.angle),
            UnitarySpec::Pauli(p) => Unitary2::new(crate::linalg::pauli(p.pauli)?),
        }
    }

    pub fn matrix(u: &Unitary2) -> Self {
        UnitarySpec::Matrix(MatrixSpec { re: u.matrix().re(), im: u.matrix().im() })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub weight: f64,
    pub unitary: UnitarySpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum TaggedChannel {
    Unitary { matrix: UnitarySpec },
    Mixed { terms: Vec<TermSpec> },
    /// One Haar-random unitary drawn from the stream keyed by `seed`.
    Haar { seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChannelSpec {
    Tagged(TaggedChannel),
    /// Shorthand for a single rotation.
    AxisAngle(AxisAngle),
}

impl ChannelSpec {
    pub fn build(&self) -> crate::Result<MixedUnitaryChannel> {
        match self {
            ChannelSpec::Tagged(TaggedChannel::Unitary { matrix }) => {
                Ok(MixedUnitaryChannel::unitary(matrix.build()?))
            }
            ChannelSpec::Tagged(TaggedChannel::Mixed { terms }) => {
                let unitaries = terms.iter().map(|t| t.unitary.build()).collect::<crate::Result<_>>()?;
                MixedUnitaryChannel::new(terms.iter().map(|t| t.weight).collect(), unitaries)
            }
            ChannelSpec::Tagged(TaggedChannel::Haar { seed }) => {
                let mut r = rng::stream(*seed, &[tag::HAAR_SPEC]);
                Ok(MixedUnitaryChannel::unitary(haar_random_unitary(&mut r)))
            }
            ChannelSpec::AxisAngle(a) => {
                Ok(MixedUnitaryChannel::unitary(Unitary2::from_axis_angle(a.axis, a.angle)?))
            }
        }
    }

    /// Explicit-matrix description of `ch`.
    pub fn dense(ch: &MixedUnitaryChannel) -> Self {
        ChannelSpec::Tagged(TaggedChannel::Mixed {
            terms: ch
                .terms()
                .map(|(weight, u)| TermSpec { weight, unitary: UnitarySpec::matrix(u) })
                .collect(),
        })
    }

    pub fn pauli(axis: Axis) -> Self {
        ChannelSpec::Tagged(TaggedChannel::Unitary {
            matrix: UnitarySpec::Pauli(PauliSpec { pauli: axis.label() as usize }),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ScenarioSpec {
    Direct {
        channel: ChannelSpec,
        /// Bloch vector of A's input state; defaults to the maximally mixed
        /// state. Only shot sampling uses it.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        input: Option<[f64; 3]>,
    },
    Common {
        state: StateSpec,
    },
    Mixture {
        p: f64,
        channel: ChannelSpec,
        state: StateSpec,
    },
}

impl ScenarioSpec {
    pub fn build(&self) -> crate::Result<CausalScenario> {
        match self {
            ScenarioSpec::Direct { channel, input } => {
                let ch = channel.build()?;
                match input {
                    Some(r) => CausalScenario::direct_with_input(ch, qubit_state(*r)?),
                    None => Ok(CausalScenario::direct(ch)),
                }
            }
            ScenarioSpec::Common { state } => Ok(CausalScenario::common(state.build()?)),
            ScenarioSpec::Mixture { p, channel, state } => {
                CausalScenario::mixture(*p, channel.build()?, state.build()?)
            }
        }
    }

    /// Self-contained description of `sc` using explicit matrices.
    pub fn describe(sc: &CausalScenario) -> Self {
        match sc {
            CausalScenario::DirectCause { channel, input } => {
                let r = Axis::ALL.map(|a| input.trace_product(&a.pauli()).re);
                let is_mixed = r.iter().all(|x| *x == 0.0);
                ScenarioSpec::Direct { channel: ChannelSpec::dense(channel), input: (!is_mixed).then_some(r) }
            }
            CausalScenario::CommonCause { state } => ScenarioSpec::Common { state: StateSpec::dense(state) },
            CausalScenario::Mixture { p, channel, state, .. } => ScenarioSpec::Mixture {
                p: *p,
                channel: ChannelSpec::dense(channel),
                state: StateSpec::dense(state),
            },
        }
    }
}

pub fn parse_scenario(text: &str) -> Result<(ScenarioSpec, CausalScenario), SchemaError> {
    let spec: ScenarioSpec = parse(text)?;
    let sc = spec.build()?;
    Ok((spec, sc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::exact_correlation;

    fn delta(text: &str) -> f64 {
        exact_correlation(&parse_scenario(text).unwrap().1).unwrap().delta
    }

    #[test]
    fn common_cause_descriptors() {
        assert!((delta(r#"{"type":"common","state":{"type":"bell","index":3}}"#) + 1.0).abs() < 1e-14);
        assert!((delta(r#"{"type":"common","state":{"type":"werner","omega":0.5}}"#) + 0.125).abs() < 1e-14);
        let d = delta(r#"{"type":"common","state":{"type":"werner","omega":1,"depolarize":0.5}}"#);
        assert!((d + 0.125).abs() < 1e-14);
        let d = delta(
            r#"{"type":"common","state":{"type":"bloch","vA":[0,0,0],"vB":[0,0,0],"M":[[-1,0,0],[0,-1,0],[0,0,-1]]}}"#,
        );
        assert!((d + 1.0).abs() < 1e-14);
    }

    #[test]
    fn channel_descriptors() {
        assert_eq!(delta(r#"{"type":"direct","channel":{"type":"unitary","matrix":{"re":[[1,0],[0,1]],"im":[[0,0],[0,0]]}}}"#), 1.0);
        assert!((delta(r#"{"type":"direct","channel":{"axis":[1,1,0],"angle":0.7}}"#) - 1.0).abs() < 1e-12);
        assert!((delta(r#"{"type":"direct","channel":{"type":"haar","seed":7}}"#) - 1.0).abs() < 1e-12);
        let d = delta(
            r#"{"type":"direct","channel":{"type":"mixed","terms":[
                {"weight":0.5,"unitary":{"pauli":0}},
                {"weight":0.5,"unitary":{"pauli":1}}]}}"#,
        );
        assert_eq!(d, 0.0);
        let d = delta(
            r#"{"type":"direct","channel":{"type":"mixed","terms":[
                {"weight":0.3333333333333333,"unitary":{"pauli":1}},
                {"weight":0.3333333333333333,"unitary":{"pauli":2}},
                {"weight":0.3333333333333334,"unitary":{"pauli":3}}]}}"#,
        );
        assert!((d + 1.0 / 27.0).abs() < 1e-15);
    }

    #[test]
    fn mixture_descriptor() {
        let d = delta(
            r#"{"type":"mixture","p":0.5,"channel":{"type":"unitary","matrix":{"pauli":0}},
                "state":{"type":"bell","index":3}}"#,
        );
        assert!(d.abs() < 1e-15);
    }

    #[test]
    fn unknown_field_is_a_parse_error_with_path() {
        let err = parse_scenario(r#"{"type":"common","state":{"type":"werner","omgea":0.5}}"#).unwrap_err();
        match err {
            SchemaError::Parse { line, column, msg } => {
                assert!(msg.contains("omgea"), "{msg}");
                assert_eq!((line, column), (Some(1), Some(43)));
            }
            other => panic!("{other:?}"),
        }
        let err = parse_scenario("{\"type\":\"common\",\n").unwrap_err();
        assert!(matches!(err, SchemaError::Parse { line: Some(2), .. }), "{err}");
        assert!(matches!(parse_scenario(r#"{"type":"sideways"}"#), Err(SchemaError::Parse { .. })));
    }

    #[test]
    fn unphysical_inputs_are_build_errors() {
        let err = parse_scenario(r#"{"type":"common","state":{"type":"werner","omega":2}}"#).unwrap_err();
        assert!(matches!(err, SchemaError::Build(crate::Error::NotPhysical { .. })));
        let err = parse_scenario(
            r#"{"type":"common","state":{"type":"bloch","vA":[0,0,0],"vB":[0,0,0],"M":[[1,0,0],[0,1,0],[0,0,1]]}}"#,
        )
        .unwrap_err();
        assert!(matches!(err, SchemaError::Build(crate::Error::NotPhysical { .. })));
    }

    #[test]
    fn describe_round_trips() {
        let texts = [
            r#"{"type":"mixture","p":0.3,"channel":{"type":"haar","seed":3},"state":{"type":"werner","omega":0.2}}"#,
            r#"{"type":"direct","channel":{"type":"haar","seed":1},"input":[0,0,1]}"#,
            r#"{"type":"common","state":{"type":"bell","index":1}}"#,
        ];
        for t in texts {
            let (_, sc) = parse_scenario(t).unwrap();
            let json = serde_json::to_string(&ScenarioSpec::describe(&sc)).unwrap();
            let (_, back) = parse_scenario(&json).unwrap();
            assert_eq!(exact_correlation(&sc).unwrap(), exact_correlation(&back).unwrap());
            assert_eq!(sc.direct_weight(), back.direct_weight());
        }
    }
}
