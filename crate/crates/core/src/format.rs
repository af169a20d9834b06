//! JSON wire formats for systems and configurations.
//!
//! Integers are JSON numbers when they fit in 64 bits and decimal strings
//! otherwise; both spellings are accepted on input.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::exactmat::IntMatrix;
use crate::system::{
    AffineUpdate, Configuration, ControlState, CounterSystem, Guard, GuardRow, StateId,
    SystemError, TransitionRule,
};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("rule {rule}: {msg}")]
    Rule { rule: String, msg: String },
    #[error("configuration {0:?}: expected a state name followed by integers")]
    Configuration(String),
}

/// Arbitrary-precision integer with the mixed number/string encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Num(pub BigInt);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if let Ok(v) = i64::try_from(&self.0) {
            s.serialize_i64(v)
        } else {
            s.serialize_str(&self.0.to_string())
        }
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Num;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an integer or a decimal string")
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Num, E> {
                Ok(Num(v.into()))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Num, E> {
                Ok(Num(v.into()))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Num, E> {
                v.trim()
                    .parse()
                    .map(Num)
                    .map_err(|_| E::custom(format!("not an integer: {v:?}")))
            }
        }
        d.deserialize_any(V)
    }
}

fn nums(v: &[BigInt]) -> Vec<Num> {
    v.iter().cloned().map(Num).collect()
}

fn ints(v: Vec<Num>) -> Vec<BigInt> {
    v.into_iter().map(|n| n.0).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum GuardOp {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GuardRowDoc {
    pub coeffs: Vec<Num>,
    pub bound: Num,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub op: Option<GuardOp>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateDoc {
    pub id: String,
    #[serde(default)]
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleDoc {
    pub id: String,
    pub from: String,
    pub to: String,
    #[serde(default)]
    pub guard: Vec<GuardRowDoc>,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<Num>>>,
    #[serde(rename = "b", default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<Vec<Num>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemDoc {
    pub dimension: usize,
    pub states: Vec<StateDoc>,
    pub rules: Vec<RuleDoc>,
}

impl SystemDoc {
    pub fn from_system(s: &CounterSystem) -> Self {
        SystemDoc {
            dimension: s.dimension(),
            states: s
                .states()
                .iter()
                .map(|st| StateDoc {
                    id: st.name.clone(),
                    labels: st.labels.iter().cloned().collect(),
                })
                .collect(),
            rules: s
                .rules()
                .iter()
                .map(|r| RuleDoc {
                    id: r.name.clone(),
                    from: s.state(r.source).name.clone(),
                    to: s.state(r.target).name.clone(),
                    guard: r
                        .guard
                        .rows()
                        .iter()
                        .map(|g| GuardRowDoc {
                            coeffs: nums(&g.coeffs),
                            bound: Num(g.bound.clone()),
                            op: None,
                        })
                        .collect(),
                    matrix: Some(
                        r.update
                            .matrix
                            .to_rows()
                            .iter()
                            .map(|row| nums(row))
                            .collect(),
                    ),
                    offset: Some(nums(&r.update.offset)),
                })
                .collect(),
        }
    }

    /// `A` defaults to the identity and `b` to zero when omitted.
    pub fn into_system(self) -> Result<CounterSystem, FormatError> {
        let n = self.dimension;
        let states: Vec<ControlState> = self
            .states
            .iter()
            .map(|s| ControlState {
                name: s.id.clone(),
                labels: s.labels.iter().cloned().collect::<BTreeSet<_>>(),
            })
            .collect();
        let lookup = |name: &str| {
            states
                .iter()
                .position(|s| s.name == name)
                .map(StateId)
                .ok_or_else(|| SystemError::UnknownState(name.to_string()))
        };
        let mut rules = Vec::new();
        for r in self.rules {
            let rule_err = |msg: String| FormatError::Rule {
                rule: r.id.clone(),
                msg,
            };
            let matrix = match r.matrix {
                Some(rows) => IntMatrix::from_rows(rows.into_iter().map(ints).collect())
                    .map_err(|e| rule_err(e.to_string()))?,
                None => IntMatrix::identity(n),
            };
            // A 0x0 matrix reads back from `[]` as 0 x 0 already.
            let offset = r
                .offset
                .map(ints)
                .unwrap_or_else(|| vec![BigInt::from(0); n]);
            let mut rows = Vec::new();
            for g in r.guard {
                let coeffs = ints(g.coeffs);
                let bound = g.bound.0;
                let neg = || GuardRow::new(coeffs.iter().map(|c| -c).collect(), -bound.clone());
                match g.op.unwrap_or(GuardOp::Le) {
                    GuardOp::Le => rows.push(GuardRow::new(coeffs.clone(), bound.clone())),
                    GuardOp::Ge => rows.push(neg()),
                    GuardOp::Eq => {
                        rows.push(GuardRow::new(coeffs.clone(), bound.clone()));
                        rows.push(neg());
                    }
                }
            }
            rules.push(TransitionRule {
                source: lookup(&r.from)?,
                target: lookup(&r.to)?,
                name: r.id,
                guard: Guard::new(rows),
                update: AffineUpdate::new(matrix, offset),
            });
        }
        Ok(CounterSystem::new(n, states, rules)?)
    }
}

pub fn parse_system(json: &str) -> Result<CounterSystem, FormatError> {
    let doc: SystemDoc = serde_json::from_str(json)?;
    doc.into_system()
}

pub fn system_to_json(s: &CounterSystem) -> String {
    serde_json::to_string_pretty(&SystemDoc::from_system(s)).expect("serializable")
}

/// Parses `"q0 0 0 0"`: a state name followed by one integer per counter.
pub fn parse_configuration(s: &CounterSystem, text: &str) -> Result<Configuration, FormatError> {
    let mut parts = text.split_whitespace();
    let bad = || FormatError::Configuration(text.to_string());
    let state = s.state_by_name(parts.next().ok_or_else(bad)?)?;
    let values: Vec<BigInt> = parts
        .map(|p| p.parse().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    if values.len() != s.dimension() {
        return Err(SystemError::DimensionMismatch {
            what: "initial configuration".into(),
            expected: s.dimension(),
            found: values.len(),
        }
        .into());
    }
    Ok(Configuration::new(state, values))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigurationDoc {
    pub state: String,
    pub values: Vec<Num>,
}

impl ConfigurationDoc {
    pub fn new(s: &CounterSystem, c: &Configuration) -> Self {
        ConfigurationDoc {
            state: s.state(c.state).name.clone(),
            values: nums(&c.values),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::figure1;

    #[test]
    fn round_trip_figure1() {
        let s = figure1();
        let back = parse_system(&system_to_json(&s)).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn equality_and_big_numbers() {
        let json = r#"{
            "dimension": 2,
            "states": [{"id": "p", "labels": ["a"]}],
            "rules": [{"id": "l", "from": "p", "to": "p",
                       "guard": [{"coeffs": [1, -2], "bound": 0, "op": "="},
                                 {"coeffs": [0, 1], "bound": "123456789012345678901234567890"}],
                       "A": [[1, 0], [0, 1]], "b": ["-98765432109876543210", 1]}]
        }"#;
        let s = parse_system(json).unwrap();
        let r = &s.rules()[0];
        assert_eq!(r.guard.rows().len(), 3);
        assert_eq!(
            r.guard.rows()[1].coeffs,
            vec![BigInt::from(-1), BigInt::from(2)]
        );
        let out = system_to_json(&s);
        assert!(out.contains("\"123456789012345678901234567890\""));
        assert!(out.contains("\"-98765432109876543210\""));
        assert_eq!(parse_system(&out).unwrap(), s);
    }

    #[test]
    fn configuration_text() {
        let s = figure1();
        let c = parse_configuration(&s, "q1 3 -4 5").unwrap();
        assert_eq!(c.state, StateId(1));
        assert_eq!(c.values, crate::exactmat::int_vec(&[3, -4, 5]));
        assert!(parse_configuration(&s, "q1 3").is_err());
        assert!(parse_configuration(&s, "nowhere 0 0 0").is_err());
    }

    #[test]
    fn bad_dimension_is_rejected() {
        let json = r#"{"dimension": 2, "states": [{"id": "p"}],
            "rules": [{"id": "l", "from": "p", "to": "p", "guard": [], "A": [[1]], "b": [0]}]}"#;
        assert!(matches!(
            parse_system(json),
            Err(FormatError::System(SystemError::DimensionMismatch { .. }))
        ));
    }
}
