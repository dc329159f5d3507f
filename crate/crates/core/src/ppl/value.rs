use serde::Serialize;

use crate::error::{Error, Result};

/// A value produced by a sample effect or returned from a model.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Value {
    Real(f64),
    Int(i64),
    Vector(Vec<f64>),
    List(Vec<Value>),
    Unit,
}

impl Value {
    pub fn as_real(&self) -> Result<f64> {
        match self {
            Value::Real(x) => Ok(*x),
            other => Err(Error::Type(format!("expected real, got {}", other.type_name()))),
        }
    }

    pub fn as_int(&self) -> Result<i64> {
        match self {
            Value::Int(k) => Ok(*k),
            other => Err(Error::Type(format!("expected integer, got {}", other.type_name()))),
        }
    }

    pub fn as_vector(&self) -> Result<&[f64]> {
        match self {
            Value::Vector(v) => Ok(v),
            other => Err(Error::Type(format!("expected vector, got {}", other.type_name()))),
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Real(_) => "real",
            Value::Int(_) => "int",
            Value::Vector(_) => "vector",
            Value::List(_) => "list",
            Value::Unit => "unit",
        }
    }

    /// Number of coordinates this value contributes when flattened into a
    /// surrogate input vector.
    pub fn flat_len(&self) -> usize {
        match self {
            Value::Real(_) | Value::Int(_) => 1,
            Value::Vector(v) => v.len(),
            Value::List(vs) => vs.iter().map(Value::flat_len).sum(),
            Value::Unit => 0,
        }
    }

    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        match self {
            Value::Real(x) => out.push(*x),
            Value::Int(k) => out.push(*k as f64),
            Value::Vector(v) => out.extend_from_slice(v),
            Value::List(vs) => vs.iter().for_each(|v| v.flatten_into(out)),
            Value::Unit => {}
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Real(x)
    }
}

impl From<i64> for Value {
    fn from(k: i64) -> Self {
        Value::Int(k)
    }
}

impl From<Vec<f64>> for Value {
    fn from(v: Vec<f64>) -> Self {
        Value::Vector(v)
    }
}

/// Optimization-variable values, ordered as the model declares its ids.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Theta(pub Vec<Value>);

impl Theta {
    pub fn new(values: Vec<Value>) -> Self {
        Theta(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, k: usize) -> &Value {
        &self.0[k]
    }

    pub fn values(&self) -> &[Value] {
        &self.0
    }

    /// Concatenates every component into one real vector (integers become
    /// reals, vectors are spliced in place).
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.flat_len());
        for v in &self.0 {
            v.flatten_into(&mut out);
        }
        out
    }

    pub fn flat_len(&self) -> usize {
        self.0.iter().map(Value::flat_len).sum()
    }

    /// Serializable view keyed by variable id, in declaration order.
    pub fn named<'a>(&'a self, ids: &'a [String]) -> NamedTheta<'a> {
        NamedTheta { ids, theta: self }
    }
}

pub struct NamedTheta<'a> {
    ids: &'a [String],
    theta: &'a Theta,
}

impl Serialize for NamedTheta<'_> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut m = s.serialize_map(Some(self.ids.len()))?;
        for (k, v) in self.ids.iter().zip(&self.theta.0) {
            m.serialize_entry(k, v)?;
        }
        m.end()
    }
}
