//! Built-in models, registered by name and configurable through typed
//! parameters: `flocking`, `schelling3d` and `ising`.
//!
//! New models plug in by implementing [`GalleryModel`]; nothing here is
//! special-cased by the engine.

mod flocking;
mod ising;
mod schelling;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::probe::{Condition, PlotSpec};
use crate::record::{EntityClass, PropsToRecord};
use crate::value::{PropTable, PropType, PropValue};

pub use flocking::{calculate_direction, flocking_init, flocking_step, polarization, Flocking};
pub use ising::{ising_delta_e, ising_init, ising_step, knn_geometric_graph, magnetisation, Ising};
pub use schelling::{like_neighbor_fraction, schelling_init, schelling_step, Schelling3d};

/// One declared parameter of a gallery model.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParamDef {
    pub key: &'static str,
    pub default: PropValue,
    /// Structural parameters shape the model (population, size, graph) and
    /// only take effect on rebuild; the rest are read by the step rule.
    pub structural: bool,
    pub doc: &'static str,
}

impl ParamDef {
    pub fn prop_type(&self) -> PropType {
        self.default.prop_type()
    }
}

/// A slider over `lo, lo+step, ..., <= hi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlSpec {
    pub key: String,
    pub widget: String,
    pub lo: f64,
    pub step: f64,
    pub hi: f64,
    /// Integer-valued parameter.
    pub integer: bool,
}

impl ControlSpec {
    pub fn slider(key: &str, lo: f64, step: f64, hi: f64) -> Self {
        ControlSpec {
            key: key.to_string(),
            widget: "slider".into(),
            lo,
            step,
            hi,
            integer: false,
        }
    }

    pub fn int_slider(key: &str, lo: i64, hi: i64) -> Self {
        ControlSpec {
            integer: true,
            ..ControlSpec::slider(key, lo as f64, 1.0, hi as f64)
        }
    }

    /// Largest grid point not above `hi`.
    pub fn max_value(&self) -> f64 {
        let n = ((self.hi - self.lo) / self.step + 1e-9).floor();
        clean(self.lo + n * self.step)
    }

    /// Snaps `value` to the nearest grid point; values outside `[lo, hi]`
    /// are rejected.
    pub fn snap(&self, value: f64) -> Result<PropValue> {
        let tol = self.step * 1e-9;
        if !value.is_finite() || value < self.lo - tol || value > self.hi + tol {
            return Err(Error::InvalidArgument(format!(
                "`{}` = {value} is outside [{}, {}] (step {})",
                self.key, self.lo, self.hi, self.step
            )));
        }
        let k = ((value - self.lo) / self.step).round();
        let snapped = clean(self.lo + k * self.step).min(self.max_value());
        Ok(if self.integer {
            PropValue::Int(snapped.round() as i64)
        } else {
            PropValue::Real(snapped)
        })
    }
}

/// Removes accumulated binary noise from `lo + k*step` (e.g. 0.31000000000000005).
fn clean(v: f64) -> f64 {
    (v * 1e9).round() / 1e9
}

/// A named predicate usable with count queries (`counts:<name>`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedPredicate {
    pub name: String,
    pub target: EntityClass,
    pub condition: Condition,
}

pub trait GalleryModel: Send + Sync {
    fn name(&self) -> &'static str;

    fn description(&self) -> &'static str;

    fn params(&self) -> Vec<ParamDef>;

    /// Checks cross-parameter invariants on a fully resolved table.
    fn validate(&self, params: &PropTable) -> Result<()>;

    /// Creates the (uninitialised) model.
    fn build(&self, params: &PropTable) -> Result<Model>;

    fn props_to_record(&self) -> PropsToRecord {
        PropsToRecord::default()
    }

    fn init(&self, model: &mut Model) -> Result<()>;

    fn step(&self, model: &mut Model) -> Result<()>;

    fn default_steps(&self) -> u64;

    /// Frame budget of an interactive session.
    fn default_frames(&self) -> u64;

    fn controls(&self) -> Vec<ControlSpec>;

    fn plots(&self, params: &PropTable) -> Vec<PlotSpec>;

    fn predicates(&self, params: &PropTable) -> Vec<NamedPredicate>;
}

static FLOCKING: Flocking = Flocking;
static SCHELLING: Schelling3d = Schelling3d;
static ISING: Ising = Ising;

pub fn all() -> [&'static dyn GalleryModel; 3] {
    [&FLOCKING, &SCHELLING, &ISING]
}

pub fn lookup(name: &str) -> Result<&'static dyn GalleryModel> {
    all().into_iter().find(|m| m.name() == name).ok_or_else(|| Error::UnknownModel {
        name: name.to_string(),
        available: all().iter().map(|m| m.name()).collect::<Vec<_>>().join(", "),
    })
}

fn valid_keys(entry: &dyn GalleryModel) -> String {
    let mut keys: Vec<&str> = entry.params().iter().map(|p| p.key).collect();
    keys.push("seed");
    keys.join(", ")
}

/// Resolves typed overrides against the model's declared schema. The result
/// holds every declared parameter plus `seed`.
pub fn resolve_params(
    entry: &dyn GalleryModel,
    overrides: &BTreeMap<String, PropValue>,
    seed: u64,
) -> Result<PropTable> {
    let defs = entry.params();
    let mut table = PropTable::new();
    for d in &defs {
        table.set(d.key, d.default.clone())?;
    }
    for (key, value) in overrides {
        if key == "seed" {
            continue;
        }
        let def = defs.iter().find(|d| d.key == key).ok_or_else(|| Error::UnknownParam {
            key: key.clone(),
            valid: valid_keys(entry),
        })?;
        let value = match (def.prop_type(), value) {
            (PropType::Real, PropValue::Int(i)) => PropValue::Real(*i as f64),
            _ => value.clone(),
        };
        table.set(key, value)?;
    }
    let seed = match overrides.get("seed") {
        Some(PropValue::Int(s)) if *s >= 0 => *s,
        Some(other) => {
            return Err(Error::InvalidArgument(format!("`seed` must be a non-negative int, got {other}")))
        }
        None => seed as i64,
    };
    table.set("seed", seed)?;
    entry.validate(&table)?;
    Ok(table)
}

/// Parses `k=v` strings using each key's declared type.
pub fn parse_overrides(entry: &dyn GalleryModel, pairs: &[String]) -> Result<BTreeMap<String, PropValue>> {
    let defs = entry.params();
    let mut out = BTreeMap::new();
    for pair in pairs {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("expected key=value, got `{pair}`")))?;
        let k = k.trim();
        let ty = if k == "seed" {
            PropType::Int
        } else {
            defs.iter()
                .find(|d| d.key == k)
                .ok_or_else(|| Error::UnknownParam {
                    key: k.to_string(),
                    valid: valid_keys(entry),
                })?
                .prop_type()
        };
        out.insert(k.to_string(), PropValue::parse_as(ty, v)?);
    }
    Ok(out)
}

/// Converts a JSON value to the declared type of `key`. Accepts plain JSON
/// scalars (`0.3`, `8`, `"red"`) and the tagged form (`{"real": 0.3}`).
pub fn param_from_json(entry: &dyn GalleryModel, key: &str, value: &serde_json::Value) -> Result<PropValue> {
    use serde_json::Value;
    let ty = if key == "seed" {
        PropType::Int
    } else {
        entry
            .params()
            .iter()
            .find(|d| d.key == key)
            .ok_or_else(|| Error::UnknownParam {
                key: key.to_string(),
                valid: valid_keys(entry),
            })?
            .prop_type()
    };
    let bad = || Error::InvalidArgument(format!("`{key}` expects {ty}, got {value}"));
    let v = match value {
        Value::Object(_) => serde_json::from_value::<PropValue>(value.clone()).map_err(|_| bad())?,
        Value::Number(n) => match (ty, n.as_i64()) {
            (PropType::Int, Some(i)) => PropValue::Int(i),
            (PropType::Real, _) => PropValue::Real(n.as_f64().ok_or_else(bad)?),
            _ => return Err(bad()),
        },
        Value::Bool(b) => PropValue::Bool(*b),
        Value::String(s) => PropValue::parse_as(ty, s)?,
        _ => return Err(bad()),
    };
    match (ty, v) {
        (PropType::Real, PropValue::Int(i)) => Ok(PropValue::Real(i as f64)),
        (t, v) if v.prop_type() == t => Ok(v),
        _ => Err(bad()),
    }
}

/// Converts a JSON object of parameter values, see [`param_from_json`].
pub fn params_from_json(
    entry: &dyn GalleryModel,
    values: &serde_json::Map<String, serde_json::Value>,
) -> Result<BTreeMap<String, PropValue>> {
    values
        .iter()
        .map(|(k, v)| Ok((k.clone(), param_from_json(entry, k, v)?)))
        .collect()
}

/// Builds and initialises a gallery model from a resolved parameter table.
pub fn launch(entry: &dyn GalleryModel, params: &PropTable) -> Result<Model> {
    let mut model = entry.build(params)?;
    model.init_model(|m| entry.init(m), entry.props_to_record())?;
    Ok(model)
}

pub(crate) fn usize_param(params: &PropTable, key: &str) -> Result<usize> {
    let v = params.int(key)?;
    usize::try_from(v).map_err(|_| Error::InvalidArgument(format!("`{key}` must be non-negative, got {v}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapping_follows_the_grid() {
        let temp = ControlSpec::slider("temp", 0.05, 0.05, 5.0);
        assert_eq!(temp.snap(0.05).unwrap(), PropValue::Real(0.05));
        assert_eq!(temp.snap(0.07).unwrap(), PropValue::Real(0.05));
        assert_eq!(temp.snap(5.0).unwrap(), PropValue::Real(5.0));
        assert!(temp.snap(5.1).is_err());
        let min_dis = ControlSpec::slider("min_dis", 0.01, 0.1, 1.0);
        assert_eq!(min_dis.max_value(), 0.91);
        assert_eq!(min_dis.snap(0.3).unwrap(), PropValue::Real(0.31));
        assert_eq!(min_dis.snap(1.0).unwrap(), PropValue::Real(0.91));
        let min_alike = ControlSpec::int_slider("min_alike", 1, 12);
        assert_eq!(min_alike.snap(8.0).unwrap(), PropValue::Int(8));
        assert!(min_alike.snap(13.0).is_err());
        assert!(min_alike.snap(0.0).is_err());
    }

    #[test]
    fn overrides_are_typed() {
        let e = lookup("ising").unwrap();
        let o = parse_overrides(e, &["temp=0.1".into(), "nns=6".into()]).unwrap();
        assert_eq!(o["temp"], PropValue::Real(0.1));
        assert_eq!(o["nns"], PropValue::Int(6));
        assert!(parse_overrides(e, &["nns=6.5".into()]).is_err());
        match parse_overrides(e, &["bogus=1".into()]) {
            Err(Error::UnknownParam { valid, .. }) => assert!(valid.contains("temp")),
            other => panic!("{other:?}"),
        }
        let p = resolve_params(e, &o, 7).unwrap();
        assert_eq!(p.int("seed").unwrap(), 7);
        assert_eq!(p.real("coupl").unwrap(), 2.5);
    }

    #[test]
    fn json_params() {
        let e = lookup("schelling3d").unwrap();
        let j: serde_json::Value = serde_json::json!({"min_alike": 5, "color_a": "blue"});
        let o = params_from_json(e, j.as_object().unwrap()).unwrap();
        assert_eq!(o["min_alike"], PropValue::Int(5));
        assert_eq!(o["color_a"], PropValue::label("blue"));
        assert!(param_from_json(e, "min_alike", &serde_json::json!(5.5)).is_err());
        assert!(param_from_json(e, "min_alike", &serde_json::json!({"real": 5.0})).is_err());
        let f = lookup("flocking").unwrap();
        assert_eq!(param_from_json(f, "dt", &serde_json::json!(1)).unwrap(), PropValue::Real(1.0));
        assert_eq!(param_from_json(f, "dt", &serde_json::json!({"real": 0.2})).unwrap(), PropValue::Real(0.2));
        assert!(param_from_json(f, "bogus", &serde_json::json!(1)).is_err());
    }

    #[test]
    fn unknown_model_lists_available() {
        match lookup("boids") {
            Err(Error::UnknownModel { available, .. }) => assert!(available.contains("flocking")),
            _ => panic!(),
        }
    }
}
