//! JSON scenario files.
//!
//! ```json
//! {
//!   "metadata": { "seed": 7, "tolerance": 1e-9 },
//!   "objects": {
//!     "rho": { "type": "state", "matrix": [[[0.5, 0], [0, 0]], [[0, 0], [0.5, 0]]] },
//!     "Z":   { "type": "observable", "outcomes": ["+", "-"], "effects": [ ... ] }
//!   }
//! }
//! ```
//!
//! Complex numbers are `[re, im]`, matrices are row-major nested arrays.
//! Object types: `state`, `effect`, `observable`, `operation`, `channel`,
//! `instrument` (`outcomes` plus `operations: [{"kraus": [...]}]`) and
//! `measurement_model` (`dim_h`, `dim_k` and the names of an `interaction`
//! instrument or channel and a `probe` observable).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channels::{Channel, Operation};
use crate::effects::{Effect, Observable, State};
use crate::error::{Error, Result};
use crate::instruments::Instrument;
use crate::matkernel::{CMatrix, Tolerance, C64};
use crate::measmodel::MeasurementModel;

type MatrixJson = Vec<Vec<[f64; 2]>>;

#[derive(Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct MetadataJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tolerance: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OperationJson {
    kraus: Vec<MatrixJson>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum ObjectJson {
    State {
        matrix: MatrixJson,
    },
    Effect {
        matrix: MatrixJson,
    },
    Observable {
        outcomes: Vec<String>,
        effects: Vec<MatrixJson>,
    },
    Operation {
        kraus: Vec<MatrixJson>,
    },
    Channel {
        kraus: Vec<MatrixJson>,
    },
    Instrument {
        outcomes: Vec<String>,
        operations: Vec<OperationJson>,
    },
    MeasurementModel {
        dim_h: usize,
        dim_k: usize,
        interaction: String,
        probe: String,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioJson {
    #[serde(default)]
    metadata: MetadataJson,
    objects: BTreeMap<String, ObjectJson>,
}

/// A measurement model together with the names it was assembled from.
#[derive(Clone, Debug, PartialEq)]
pub struct NamedModel {
    pub interaction: String,
    pub probe: String,
    pub model: MeasurementModel,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Object {
    State(State),
    Effect(Effect),
    Observable(Observable),
    Operation(Operation),
    Channel(Channel),
    Instrument(Instrument),
    MeasurementModel(NamedModel),
}

impl Object {
    pub fn type_name(&self) -> &'static str {
        match self {
            Object::State(_) => "state",
            Object::Effect(_) => "effect",
            Object::Observable(_) => "observable",
            Object::Operation(_) => "operation",
            Object::Channel(_) => "channel",
            Object::Instrument(_) => "instrument",
            Object::MeasurementModel(_) => "measurement_model",
        }
    }
}

/// A validated collection of named objects.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub seed: Option<u64>,
    pub tolerance: Tolerance,
    objects: BTreeMap<String, Object>,
}

impl Scenario {
    pub fn new(seed: Option<u64>, tolerance: Tolerance) -> Self {
        Scenario {
            seed,
            tolerance,
            objects: BTreeMap::new(),
        }
    }

    /// Adds or replaces an object. Measurement models must reference names already present.
    pub fn insert(&mut self, name: impl Into<String>, object: Object) -> Result<()> {
        let name = name.into();
        if let Object::MeasurementModel(m) = &object {
            for to in [&m.interaction, &m.probe] {
                if !self.objects.contains_key(to) {
                    return Err(Error::DanglingReference {
                        from: name,
                        to: to.clone(),
                    });
                }
            }
        }
        self.objects.insert(name, object);
        Ok(())
    }

    pub fn objects(&self) -> &BTreeMap<String, Object> {
        &self.objects
    }

    pub fn get(&self, name: &str) -> Result<&Object> {
        self.objects
            .get(name)
            .ok_or_else(|| Error::UnknownLabel(name.to_string()))
    }

    pub fn state(&self, name: &str) -> Result<&State> {
        match self.get(name)? {
            Object::State(s) => Ok(s),
            other => Err(wrong_type(name, "state", other)),
        }
    }

    pub fn observable(&self, name: &str) -> Result<&Observable> {
        match self.get(name)? {
            Object::Observable(o) => Ok(o),
            other => Err(wrong_type(name, "observable", other)),
        }
    }

    pub fn instrument(&self, name: &str) -> Result<&Instrument> {
        match self.get(name)? {
            Object::Instrument(i) => Ok(i),
            other => Err(wrong_type(name, "instrument", other)),
        }
    }

    pub fn measurement_model(&self, name: &str) -> Result<&MeasurementModel> {
        match self.get(name)? {
            Object::MeasurementModel(m) => Ok(&m.model),
            other => Err(wrong_type(name, "measurement_model", other)),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: ScenarioJson = serde_json::from_str(text)?;
        let tol = match raw.metadata.tolerance {
            Some(t) => Tolerance::new(t)?,
            None => Tolerance::from_env(),
        };
        let mut scenario = Scenario::new(raw.metadata.seed, tol);
        let mut models = Vec::new();
        for (name, obj) in raw.objects {
            match obj {
                ObjectJson::MeasurementModel {
                    dim_h,
                    dim_k,
                    interaction,
                    probe,
                } => models.push((name, dim_h, dim_k, interaction, probe)),
                other => {
                    let obj = decode(other, tol).map_err(|e| e.in_object(&name))?;
                    scenario.objects.insert(name, obj);
                }
            }
        }
        for (name, dim_h, dim_k, interaction, probe) in models {
            let model = scenario
                .resolve_model(&name, dim_h, dim_k, &interaction, &probe)
                .map_err(|e| match e {
                    e @ (Error::DanglingReference { .. } | Error::WrongType { .. }) => e,
                    e => e.in_object(&name),
                })?;
            scenario.objects.insert(
                name,
                Object::MeasurementModel(NamedModel {
                    interaction,
                    probe,
                    model,
                }),
            );
        }
        Ok(scenario)
    }

    fn resolve_model(
        &self,
        name: &str,
        dim_h: usize,
        dim_k: usize,
        interaction: &str,
        probe: &str,
    ) -> Result<MeasurementModel> {
        let dangling = |to: &str| Error::DanglingReference {
            from: name.to_string(),
            to: to.to_string(),
        };
        let ins = match self
            .objects
            .get(interaction)
            .ok_or_else(|| dangling(interaction))?
        {
            Object::Instrument(i) => i.clone(),
            Object::Channel(c) => Instrument::from_channel(c),
            other => return Err(wrong_type(interaction, "instrument", other)),
        };
        let probe = match self.objects.get(probe).ok_or_else(|| dangling(probe))? {
            Object::Observable(o) => o.clone(),
            other => return Err(wrong_type(probe, "observable", other)),
        };
        MeasurementModel::new(dim_h, dim_k, ins, probe, self.tolerance)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Scenario::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        let raw = ScenarioJson {
            metadata: MetadataJson {
                seed: self.seed,
                tolerance: Some(self.tolerance.atol()),
            },
            objects: self
                .objects
                .iter()
                .map(|(k, v)| (k.clone(), encode(v)))
                .collect(),
        };
        serde_json::to_string_pretty(&raw).expect("scenario serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string() + "\n")?;
        Ok(())
    }
}

/// Loads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    Scenario::load(path)
}

fn wrong_type(name: &str, expected: &'static str, found: &Object) -> Error {
    Error::WrongType {
        name: name.to_string(),
        expected,
        found: found.type_name().to_string(),
    }
}

fn matrix_from_json(m: &MatrixJson) -> Result<CMatrix> {
    let rows: Vec<Vec<C64>> = m
        .iter()
        .map(|r| r.iter().map(|&[re, im]| C64::new(re, im)).collect())
        .collect();
    CMatrix::from_rows(&rows)
}

fn matrix_to_json(m: &CMatrix) -> MatrixJson {
    m.to_rows()
        .iter()
        .map(|r| r.iter().map(|z| [z.re, z.im]).collect())
        .collect()
}

fn matrices_from_json(ms: &[MatrixJson]) -> Result<Vec<CMatrix>> {
    ms.iter().map(matrix_from_json).collect()
}

fn decode(obj: ObjectJson, tol: Tolerance) -> Result<Object> {
    Ok(match obj {
        ObjectJson::State { matrix } => Object::State(State::new(matrix_from_json(&matrix)?, tol)?),
        ObjectJson::Effect { matrix } => {
            Object::Effect(Effect::new(matrix_from_json(&matrix)?, tol)?)
        }
        ObjectJson::Observable { outcomes, effects } => Object::Observable(Observable::new(
            outcomes,
            matrices_from_json(&effects)?,
            tol,
        )?),
        ObjectJson::Operation { kraus } => {
            Object::Operation(Operation::new(matrices_from_json(&kraus)?, tol)?)
        }
        ObjectJson::Channel { kraus } => {
            Object::Channel(Channel::new(matrices_from_json(&kraus)?, tol)?)
        }
        ObjectJson::Instrument {
            outcomes,
            operations,
        } => {
            let kraus = operations
                .iter()
                .map(|op| matrices_from_json(&op.kraus))
                .collect::<Result<Vec<_>>>()?;
            Object::Instrument(Instrument::from_kraus(outcomes, kraus, tol)?)
        }
        ObjectJson::MeasurementModel { .. } => {
            unreachable!("models are resolved after the other objects")
        }
    })
}

fn encode_kraus(op: &Operation) -> Vec<MatrixJson> {
    op.kraus().iter().map(matrix_to_json).collect()
}

fn encode(obj: &Object) -> ObjectJson {
    match obj {
        Object::State(s) => ObjectJson::State {
            matrix: matrix_to_json(s.matrix()),
        },
        Object::Effect(e) => ObjectJson::Effect {
            matrix: matrix_to_json(e.matrix()),
        },
        Object::Observable(o) => ObjectJson::Observable {
            outcomes: o.outcomes().to_vec(),
            effects: o
                .effects()
                .iter()
                .map(|e| matrix_to_json(e.matrix()))
                .collect(),
        },
        Object::Operation(op) => ObjectJson::Operation {
            kraus: encode_kraus(op),
        },
        Object::Channel(ch) => ObjectJson::Channel {
            kraus: encode_kraus(ch.operation()),
        },
        Object::Instrument(ins) => ObjectJson::Instrument {
            outcomes: ins.outcomes().to_vec(),
            operations: ins
                .ops()
                .iter()
                .map(|op| OperationJson {
                    kraus: encode_kraus(op),
                })
                .collect(),
        },
        Object::MeasurementModel(m) => ObjectJson::MeasurementModel {
            dim_h: m.model.dim_h(),
            dim_k: m.model.dim_k(),
            interaction: m.interaction.clone(),
            probe: m.probe.clone(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MIXED: &str = r#"{
        "objects": {
            "rho": { "type": "state", "matrix": [[[0.5, 0], [0, 0]], [[0, 0], [0.5, 0]]] }
        }
    }"#;

    #[test]
    fn loads_maximally_mixed_qubit() {
        let sc = Scenario::from_json_str(MIXED).unwrap();
        let rho = sc.state("rho").unwrap();
        assert_eq!(rho, &State::maximally_mixed(2));
    }

    #[test]
    fn rejects_subnormalized_povm_by_name() {
        let text = r#"{ "objects": { "bad": { "type": "observable", "outcomes": ["a"],
            "effects": [[[[0.99, 0], [0, 0]], [[0, 0], [0.99, 0]]]] } } }"#;
        let err = Scenario::from_json_str(text).unwrap_err();
        assert_eq!(err.invariant_name(), Some("normalization"));
        assert!(err.to_string().contains("bad"));
    }

    #[test]
    fn dangling_and_wrong_type_references() {
        let text = r#"{ "objects": {
            "rho": { "type": "state", "matrix": [[[1, 0]]] },
            "m": { "type": "measurement_model", "dim_h": 1, "dim_k": 1, "interaction": "nope", "probe": "rho" } } }"#;
        assert!(matches!(
            Scenario::from_json_str(text).unwrap_err(),
            Error::DanglingReference { ref to, .. } if to == "nope"
        ));
        let text = text.replace("\"nope\"", "\"rho\"");
        assert!(matches!(
            Scenario::from_json_str(&text).unwrap_err(),
            Error::WrongType { .. }
        ));
    }

    #[test]
    fn parse_errors_surface() {
        assert!(matches!(
            Scenario::from_json_str("{").unwrap_err(),
            Error::Parse(_)
        ));
        let text = r#"{ "objects": { "x": { "type": "tensor" } } }"#;
        assert!(matches!(
            Scenario::from_json_str(text).unwrap_err(),
            Error::Parse(_)
        ));
        let ragged = r#"{ "objects": { "x": { "type": "effect", "matrix": [[[1, 0]], [[0, 0], [1, 0]]] } } }"#;
        assert!(Scenario::from_json_str(ragged).is_err());
    }
}
