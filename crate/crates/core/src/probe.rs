//! Small serializable expressions over entity snapshots, used for live plot
//! series and named count queries.

use serde::{Deserialize, Serialize};

use crate::datacollect;
use crate::error::{Error, Result};
use crate::record::{EntityClass, EntityView, Recorded};
use crate::value::PropValue;

/// A numeric read of one property (optionally one vector component).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selector {
    pub key: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component: Option<usize>,
}

impl Selector {
    pub fn new(key: &str) -> Self {
        Selector {
            key: key.to_string(),
            component: None,
        }
    }

    pub fn component(key: &str, c: usize) -> Self {
        Selector {
            key: key.to_string(),
            component: Some(c),
        }
    }

    pub fn eval(&self, view: &EntityView<'_>) -> Result<f64> {
        let v = view.get(&self.key)?;
        match (self.component, v) {
            (Some(c), PropValue::Vect(vec)) => vec.as_slice().get(c).copied().ok_or_else(|| {
                Error::InvalidArgument(format!("`{}` has no component {c}", self.key))
            }),
            (None, v) => v.as_real().ok_or_else(|| Error::WrongType {
                key: self.key.clone(),
                expected: crate::value::PropType::Real,
                found: v.prop_type(),
            }),
            (Some(_), v) => Err(Error::WrongType {
                key: self.key.clone(),
                expected: crate::value::PropType::Vect,
                found: v.prop_type(),
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Condition {
    Eq { key: String, value: PropValue },
    Lt { select: Selector, value: f64 },
    Gt { select: Selector, value: f64 },
}

impl Condition {
    pub fn eq(key: &str, value: impl Into<PropValue>) -> Self {
        Condition::Eq {
            key: key.to_string(),
            value: value.into(),
        }
    }

    pub fn eval(&self, view: &EntityView<'_>) -> Result<bool> {
        Ok(match self {
            Condition::Eq { key, value } => view.get(key)? == value,
            Condition::Lt { select, value } => select.eval(view)? < *value,
            Condition::Gt { select, value } => select.eval(view)? > *value,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reduce", rename_all = "snake_case")]
pub enum Reducer {
    /// Number of entities satisfying the condition.
    CountWhere { condition: Condition },
    /// Mean of the 0/1 indicator of the condition.
    FractionWhere { condition: Condition },
    MeanOf { select: Selector },
}

/// One live plot series: a label and a reduction over agents or nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotSpec {
    pub label: String,
    pub target: EntityClass,
    #[serde(flatten)]
    pub reducer: Reducer,
}

impl PlotSpec {
    /// Value of the series at `tick`, computed through the same per-tick
    /// reductions as the table queries in [`datacollect`].
    pub fn evaluate(&self, rec: &impl Recorded, tick: u64) -> Result<f64> {
        let records = rec.records();
        match &self.reducer {
            Reducer::CountWhere { condition } => {
                let n = datacollect::count_at(records, self.target, tick, &|v| condition.eval(v))?;
                Ok(n as f64)
            }
            Reducer::FractionWhere { condition } => {
                let f = |v: &EntityView<'_>| Ok(PropValue::Bool(condition.eval(v)?));
                Ok(datacollect::mean_at(records, self.target, tick, &f)?.real_or_nan())
            }
            Reducer::MeanOf { select } => {
                let f = |v: &EntityView<'_>| Ok(PropValue::Real(select.eval(v)?));
                Ok(datacollect::mean_at(records, self.target, tick, &f)?.real_or_nan())
            }
        }
    }
}
