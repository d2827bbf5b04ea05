//! Mixed design spaces and their continuous relaxation.
//!
//! A [`DesignSpace`] is an ordered list of continuous, integer and categorical
//! variables. Integer variables are relaxed to a real interval, categorical
//! variables with `L` levels are relaxed to a block of `L` one-hot
//! coordinates, so the relaxed dimension is `d + ℓ + Σ L_j`.
//!
//! Variables may carry an activity rule: a conjunction of conditions of the
//! form "categorical variable `c` takes one of these levels". A variable whose
//! rule does not hold is inactive and is imputed with a fixed placeholder
//! (midpoint of its bounds, or level 0) so that equivalent designs share a
//! single encoding.

mod lhs;
mod schema;

pub use lhs::{lhs_sample, lhs_unit};
pub use schema::{ConditionDef, DesignSpaceDef, KindTag, VariableDef};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("variable `{name}`: {message}")]
    InvalidVariable { name: String, message: String },
    #[error("duplicate variable name `{0}`")]
    DuplicateName(String),
    #[error("design space has no variables")]
    Empty,
    #[error("expected {expected} values, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("variable `{name}`: value {value} out of range")]
    OutOfRange { name: String, value: String },
    #[error("variable `{name}`: value kind does not match declaration")]
    KindMismatch { name: String },
    #[error("relaxed vector has {got} coordinates, expected {expected}")]
    RelaxedArity { expected: usize, got: usize },
    #[error("{path}: {message}")]
    Field { path: String, message: String },
    #[error("invalid design-space document: {0}")]
    Parse(String),
}

/// Variable domain.
#[derive(Debug, Clone, PartialEq)]
pub enum VariableKind {
    Continuous { lower: f64, upper: f64 },
    Integer { lower: i64, upper: i64 },
    Categorical { levels: Vec<String> },
}

/// Activity condition: the referenced categorical variable is active and takes
/// one of `levels`.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub variable: String,
    pub levels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableSpec {
    pub name: String,
    pub kind: VariableKind,
    /// All conditions must hold for the variable to be active. Empty means
    /// always active.
    pub active_when: Vec<Condition>,
}

impl VariableSpec {
    pub fn continuous(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Self {
            name: name.into(),
            kind: VariableKind::Continuous { lower, upper },
            active_when: Vec::new(),
        }
    }

    pub fn integer(name: impl Into<String>, lower: i64, upper: i64) -> Self {
        Self {
            name: name.into(),
            kind: VariableKind::Integer { lower, upper },
            active_when: Vec::new(),
        }
    }

    pub fn categorical<S: AsRef<str>>(name: impl Into<String>, levels: &[S]) -> Self {
        Self {
            name: name.into(),
            kind: VariableKind::Categorical {
                levels: levels.iter().map(|s| s.as_ref().to_string()).collect(),
            },
            active_when: Vec::new(),
        }
    }

    /// Adds an activity condition (conjunctive with any existing one).
    pub fn active_when<S: AsRef<str>>(mut self, variable: impl Into<String>, levels: &[S]) -> Self {
        self.active_when.push(Condition {
            variable: variable.into(),
            levels: levels.iter().map(|s| s.as_ref().to_string()).collect(),
        });
        self
    }

    /// Number of relaxed coordinates this variable occupies.
    pub fn relaxed_width(&self) -> usize {
        match &self.kind {
            VariableKind::Categorical { levels } => levels.len(),
            _ => 1,
        }
    }
}

/// Coordinate span of one variable inside a relaxed vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub len: usize,
}

impl Span {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

/// A value in native mixed coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Real(f64),
    Int(i64),
    Level(usize),
}

impl Value {
    pub fn as_f64(&self) -> f64 {
        match *self {
            Value::Real(v) => v,
            Value::Int(v) => v as f64,
            Value::Level(v) => v as f64,
        }
    }
}

/// A design point in native coordinates, with per-variable activity flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedPoint {
    pub values: Vec<Value>,
    pub active: Vec<bool>,
}

impl MixedPoint {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A point in the relaxed space `Ω' ⊆ ℝ^{d'}`. The coordinate layout is owned
/// by the [`DesignSpace`] that produced it (see [`DesignSpace::layout`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxedVector(pub Vec<f64>);

impl RelaxedVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone)]
struct ResolvedCondition {
    variable: usize,
    allowed: Vec<bool>,
}

/// An ordered mixed design space.
#[derive(Debug, Clone)]
pub struct DesignSpace {
    name: String,
    variables: Vec<VariableSpec>,
    rules: Vec<Vec<ResolvedCondition>>,
    layout: Vec<Span>,
}

impl PartialEq for DesignSpace {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.variables == other.variables
    }
}

impl DesignSpace {
    pub fn new(name: impl Into<String>, variables: Vec<VariableSpec>) -> Result<Self, SpaceError> {
        if variables.is_empty() {
            return Err(SpaceError::Empty);
        }
        let mut rules = Vec::with_capacity(variables.len());
        let mut layout = Vec::with_capacity(variables.len());
        let mut offset = 0;
        for (i, var) in variables.iter().enumerate() {
            let invalid = |message: String| SpaceError::InvalidVariable {
                name: var.name.clone(),
                message,
            };
            if var.name.is_empty() {
                return Err(invalid("empty name".into()));
            }
            if variables[..i].iter().any(|v| v.name == var.name) {
                return Err(SpaceError::DuplicateName(var.name.clone()));
            }
            match &var.kind {
                VariableKind::Continuous { lower, upper } => {
                    if !(lower.is_finite() && upper.is_finite() && lower < upper) {
                        return Err(invalid(format!("bounds [{lower}, {upper}] must satisfy lower < upper")));
                    }
                }
                VariableKind::Integer { lower, upper } => {
                    if lower >= upper {
                        return Err(invalid(format!("bounds [{lower}, {upper}] must satisfy lower < upper")));
                    }
                }
                VariableKind::Categorical { levels } => {
                    if levels.len() < 2 {
                        return Err(invalid("categorical variable needs at least two levels".into()));
                    }
                    for (k, level) in levels.iter().enumerate() {
                        if levels[..k].contains(level) {
                            return Err(invalid(format!("duplicate level `{level}`")));
                        }
                    }
                }
            }
            let mut resolved = Vec::with_capacity(var.active_when.len());
            for cond in &var.active_when {
                let j = variables[..i]
                    .iter()
                    .position(|v| v.name == cond.variable)
                    .ok_or_else(|| {
                        invalid(format!(
                            "activity rule references `{}`, which is not a variable declared earlier",
                            cond.variable
                        ))
                    })?;
                let VariableKind::Categorical { levels } = &variables[j].kind else {
                    return Err(invalid(format!(
                        "activity rule references `{}`, which is not categorical",
                        cond.variable
                    )));
                };
                let mut allowed = vec![false; levels.len()];
                for level in &cond.levels {
                    let k = levels.iter().position(|l| l == level).ok_or_else(|| {
                        invalid(format!("activity rule level `{level}` is not a level of `{}`", cond.variable))
                    })?;
                    allowed[k] = true;
                }
                resolved.push(ResolvedCondition { variable: j, allowed });
            }
            rules.push(resolved);
            let len = var.relaxed_width();
            layout.push(Span { start: offset, len });
            offset += len;
        }
        Ok(Self {
            name: name.into(),
            variables,
            rules,
            layout,
        })
    }

    /// Parses the JSON design-space document (see [`DesignSpaceDef`]).
    pub fn from_json(text: &str) -> Result<Self, SpaceError> {
        let def: DesignSpaceDef = serde_json::from_str(text).map_err(|e| SpaceError::Parse(e.to_string()))?;
        def.build()
    }

    pub fn to_def(&self) -> DesignSpaceDef {
        DesignSpaceDef::from_space(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn layout(&self) -> &[Span] {
        &self.layout
    }

    pub fn n_continuous(&self) -> usize {
        self.count(|k| matches!(k, VariableKind::Continuous { .. }))
    }

    pub fn n_integer(&self) -> usize {
        self.count(|k| matches!(k, VariableKind::Integer { .. }))
    }

    pub fn n_categorical(&self) -> usize {
        self.count(|k| matches!(k, VariableKind::Categorical { .. }))
    }

    fn count(&self, pred: impl Fn(&VariableKind) -> bool) -> usize {
        self.variables.iter().filter(|v| pred(&v.kind)).count()
    }

    /// `d' = d + ℓ + Σ L_j`.
    pub fn relaxed_dimension(&self) -> usize {
        self.variables.iter().map(VariableSpec::relaxed_width).sum()
    }

    /// Box of the relaxed space: variable bounds for continuous/integer
    /// coordinates, `[0, 1]` for one-hot coordinates.
    pub fn relaxed_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let dim = self.relaxed_dimension();
        let mut lower = Vec::with_capacity(dim);
        let mut upper = Vec::with_capacity(dim);
        for var in &self.variables {
            match &var.kind {
                VariableKind::Continuous { lower: lo, upper: hi } => {
                    lower.push(*lo);
                    upper.push(*hi);
                }
                VariableKind::Integer { lower: lo, upper: hi } => {
                    lower.push(*lo as f64);
                    upper.push(*hi as f64);
                }
                VariableKind::Categorical { levels } => {
                    lower.extend(std::iter::repeat_n(0.0, levels.len()));
                    upper.extend(std::iter::repeat_n(1.0, levels.len()));
                }
            }
        }
        (lower, upper)
    }

    /// Index of a variable by name.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Builds a valid point from raw values: checks ranges, derives activity and
    /// imputes inactive variables.
    pub fn point(&self, values: Vec<Value>) -> Result<MixedPoint, SpaceError> {
        if values.len() != self.variables.len() {
            return Err(SpaceError::Arity {
                expected: self.variables.len(),
                got: values.len(),
            });
        }
        for (var, value) in self.variables.iter().zip(&values) {
            self.check_value(var, value)?;
        }
        let active = self.activity(&values);
        Ok(self.impute(&MixedPoint { values, active }))
    }

    fn check_value(&self, var: &VariableSpec, value: &Value) -> Result<(), SpaceError> {
        let out_of_range = || SpaceError::OutOfRange {
            name: var.name.clone(),
            value: format!("{value:?}"),
        };
        match (&var.kind, value) {
            (VariableKind::Continuous { lower, upper }, Value::Real(v)) => {
                if !(v.is_finite() && lower <= v && v <= upper) {
                    return Err(out_of_range());
                }
            }
            (VariableKind::Integer { lower, upper }, Value::Int(v)) => {
                if !(lower <= v && v <= upper) {
                    return Err(out_of_range());
                }
            }
            (VariableKind::Categorical { levels }, Value::Level(k)) => {
                if *k >= levels.len() {
                    return Err(out_of_range());
                }
            }
            _ => {
                return Err(SpaceError::KindMismatch {
                    name: var.name.clone(),
                })
            }
        }
        Ok(())
    }

    /// Checks that `p` is a valid point of this space: values in range, activity
    /// flags consistent with the rules and inactive variables imputed.
    pub fn validate(&self, p: &MixedPoint) -> Result<(), SpaceError> {
        if p.values.len() != self.variables.len() || p.active.len() != self.variables.len() {
            return Err(SpaceError::Arity {
                expected: self.variables.len(),
                got: p.values.len(),
            });
        }
        for (var, value) in self.variables.iter().zip(&p.values) {
            self.check_value(var, value)?;
        }
        let active = self.activity(&p.values);
        if active != p.active {
            return Err(SpaceError::Parse("activity flags inconsistent with activity rules".into()));
        }
        for (i, var) in self.variables.iter().enumerate() {
            if !active[i] && p.values[i] != placeholder(&var.kind) {
                return Err(SpaceError::OutOfRange {
                    name: var.name.clone(),
                    value: format!("{:?} (inactive variable must carry its placeholder)", p.values[i]),
                });
            }
        }
        Ok(())
    }

    /// Per-variable activity flags for the given values. Rules only reference
    /// earlier variables, so one forward pass suffices; a condition on an
    /// inactive variable does not hold.
    pub fn activity(&self, values: &[Value]) -> Vec<bool> {
        let mut active = vec![true; self.variables.len()];
        for (i, rule) in self.rules.iter().enumerate() {
            active[i] = rule.iter().all(|cond| {
                active[cond.variable]
                    && match values[cond.variable] {
                        Value::Level(k) => cond.allowed.get(k).copied().unwrap_or(false),
                        _ => false,
                    }
            });
        }
        active
    }

    /// Replaces inactive values by their placeholder: midpoint of the bounds for
    /// continuous variables, rounded midpoint for integers, level 0 for
    /// categorical variables. Active values are left untouched.
    pub fn impute(&self, p: &MixedPoint) -> MixedPoint {
        let values = self
            .variables
            .iter()
            .zip(p.values.iter().zip(&p.active))
            .map(|(var, (value, &active))| if active { *value } else { placeholder(&var.kind) })
            .collect();
        MixedPoint {
            values,
            active: p.active.clone(),
        }
    }

    /// One-hot relaxation of a valid point.
    pub fn encode(&self, p: &MixedPoint) -> Result<RelaxedVector, SpaceError> {
        if p.values.len() != self.variables.len() {
            return Err(SpaceError::Arity {
                expected: self.variables.len(),
                got: p.values.len(),
            });
        }
        let mut coords = vec![0.0; self.relaxed_dimension()];
        for ((var, value), span) in self.variables.iter().zip(&p.values).zip(&self.layout) {
            self.check_value(var, value)?;
            match value {
                Value::Real(v) => coords[span.start] = *v,
                Value::Int(v) => coords[span.start] = *v as f64,
                Value::Level(k) => coords[span.start + k] = 1.0,
            }
        }
        Ok(RelaxedVector(coords))
    }

    /// Maps any relaxed vector to a valid point: continuous values are clipped,
    /// integers rounded to the nearest in-bounds value, categorical levels taken
    /// as the arg-max of their block (ties toward the lowest level). Activity is
    /// recomputed and inactive variables imputed.
    pub fn decode(&self, v: &[f64]) -> Result<MixedPoint, SpaceError> {
        let dim = self.relaxed_dimension();
        if v.len() != dim {
            return Err(SpaceError::RelaxedArity {
                expected: dim,
                got: v.len(),
            });
        }
        let values: Vec<Value> = self
            .variables
            .iter()
            .zip(&self.layout)
            .map(|(var, span)| {
                let block = &v[span.range()];
                match &var.kind {
                    VariableKind::Continuous { lower, upper } => {
                        let x = block[0];
                        let x = if x.is_nan() { 0.5 * (lower + upper) } else { x };
                        Value::Real(x.clamp(*lower, *upper))
                    }
                    VariableKind::Integer { lower, upper } => {
                        let x = block[0];
                        let x = if x.is_nan() { 0.5 * (*lower as f64 + *upper as f64) } else { x };
                        Value::Int((x.round().clamp(*lower as f64, *upper as f64)) as i64)
                    }
                    VariableKind::Categorical { .. } => {
                        let mut best = 0;
                        for (k, &c) in block.iter().enumerate() {
                            // strict comparison keeps the lowest index on ties
                            if c > block[best] || block[best].is_nan() {
                                best = k;
                            }
                        }
                        Value::Level(best)
                    }
                }
            })
            .collect();
        let active = self.activity(&values);
        Ok(self.impute(&MixedPoint { values, active }))
    }

    /// Human-readable rendering of one value (categorical values as labels).
    pub fn format_value(&self, index: usize, value: &Value) -> String {
        match (&self.variables[index].kind, value) {
            (VariableKind::Categorical { levels }, Value::Level(k)) => {
                levels.get(*k).cloned().unwrap_or_else(|| k.to_string())
            }
            (_, Value::Real(v)) => v.to_string(),
            (_, Value::Int(v)) => v.to_string(),
            (_, Value::Level(k)) => k.to_string(),
        }
    }

    /// Inverse of [`format_value`](Self::format_value).
    pub fn parse_value(&self, index: usize, text: &str) -> Result<Value, SpaceError> {
        let var = &self.variables[index];
        let bad = || SpaceError::OutOfRange {
            name: var.name.clone(),
            value: text.to_string(),
        };
        match &var.kind {
            VariableKind::Continuous { .. } => text.trim().parse().map(Value::Real).map_err(|_| bad()),
            VariableKind::Integer { .. } => text.trim().parse().map(Value::Int).map_err(|_| bad()),
            VariableKind::Categorical { levels } => levels
                .iter()
                .position(|l| l == text)
                .map(Value::Level)
                .ok_or_else(bad),
        }
    }
}

/// Placeholder carried by an inactive variable.
pub fn placeholder(kind: &VariableKind) -> Value {
    match kind {
        VariableKind::Continuous { lower, upper } => Value::Real(0.5 * (lower + upper)),
        VariableKind::Integer { lower, upper } => Value::Int(((*lower as f64 + *upper as f64) / 2.0).round() as i64),
        VariableKind::Categorical { .. } => Value::Level(0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xzc() -> DesignSpace {
        DesignSpace::new(
            "toy",
            vec![
                VariableSpec::continuous("x", 0.0, 1.0),
                VariableSpec::integer("z", 1, 5),
                VariableSpec::categorical("c", &["A", "B"]),
            ],
        )
        .unwrap()
    }

    fn wing_space() -> DesignSpace {
        DesignSpace::new(
            "wings",
            vec![
                VariableSpec::categorical("share", &["yes", "no"]),
                VariableSpec::continuous("sweep", 30.0, 42.0).active_when("share", &["no"]),
                VariableSpec::integer("ribs", 1, 5).active_when("share", &["no"]),
                VariableSpec::categorical("mat", &["al", "cfrp", "ti"]).active_when("share", &["no"]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn relaxed_dimension_of_catalog_shaped_spaces() {
        let mut vars: Vec<VariableSpec> = (0..3).map(|i| VariableSpec::continuous(format!("x{i}"), 0.0, 1.0)).collect();
        vars.push(VariableSpec::categorical("obs", &["CONV", "MEA1", "MEA2", "AEA"]));
        assert_eq!(DesignSpace::new("t1", vars).unwrap().relaxed_dimension(), 7);

        let mut vars: Vec<VariableSpec> = (0..10).map(|i| VariableSpec::categorical(format!("c{i}"), &["y", "n"])).collect();
        vars.extend((0..9).map(|i| VariableSpec::continuous(format!("x{i}"), 0.0, 1.0)));
        assert_eq!(DesignSpace::new("t2", vars).unwrap().relaxed_dimension(), 29);

        let levels = [21, 21, 21, 21, 6, 5, 4, 5];
        let vars = levels
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                let names: Vec<String> = (0..l).map(|k| format!("l{k}")).collect();
                VariableSpec::categorical(format!("c{i}"), &names)
            })
            .collect();
        assert_eq!(DesignSpace::new("t3", vars).unwrap().relaxed_dimension(), 104);
    }

    #[test]
    fn encode_examples() {
        let space = DesignSpace::new(
            "s",
            vec![VariableSpec::continuous("x", 0.0, 1.0), VariableSpec::categorical("c", &["A", "B", "C"])],
        )
        .unwrap();
        let p = space.point(vec![Value::Real(0.5), Value::Level(1)]).unwrap();
        assert_eq!(space.encode(&p).unwrap().0, vec![0.5, 0.0, 1.0, 0.0]);

        let space_z = DesignSpace::new("z", vec![VariableSpec::integer("z", 1, 5)]).unwrap();
        let p = space_z.point(vec![Value::Int(3)]).unwrap();
        assert_eq!(space_z.encode(&p).unwrap().0, vec![3.0]);

        let space = xzc();
        let p = space.point(vec![Value::Real(0.2), Value::Int(2), Value::Level(0)]).unwrap();
        assert_eq!(space.encode(&p).unwrap().0, vec![0.2, 2.0, 1.0, 0.0]);
    }

    #[test]
    fn encode_rejects_out_of_range() {
        let space = xzc();
        let p = MixedPoint {
            values: vec![Value::Real(1.5), Value::Int(2), Value::Level(0)],
            active: vec![true; 3],
        };
        assert!(matches!(space.encode(&p), Err(SpaceError::OutOfRange { .. })));
        let p = MixedPoint {
            values: vec![Value::Real(0.5), Value::Int(2), Value::Level(2)],
            active: vec![true; 3],
        };
        assert!(space.encode(&p).is_err());
    }

    #[test]
    fn decode_examples() {
        let space = DesignSpace::new(
            "s",
            vec![VariableSpec::continuous("x", 0.0, 1.0), VariableSpec::categorical("c", &["A", "B", "C"])],
        )
        .unwrap();
        assert_eq!(space.decode(&[0.5, 0.0, 1.0, 0.0]).unwrap().values, vec![Value::Real(0.5), Value::Level(1)]);
        assert_eq!(space.decode(&[0.5, 0.4, 0.4, 0.2]).unwrap().values, vec![Value::Real(0.5), Value::Level(0)]);
        // total on the whole relaxed space
        let p = space.decode(&[7.0, -1.0, f64::NAN, -3.0]).unwrap();
        assert_eq!(p.values, vec![Value::Real(1.0), Value::Level(0)]);
        let p = xzc().decode(&[-0.3, 4.6, 0.1, 0.9]).unwrap();
        assert_eq!(p.values, vec![Value::Real(0.0), Value::Int(5), Value::Level(1)]);
        let p = xzc().decode(&[0.3, 9.9, 0.1, 0.9]).unwrap();
        assert_eq!(p.values[1], Value::Int(5));
    }

    #[test]
    fn impute_examples() {
        let space = wing_space();
        let p = space
            .point(vec![Value::Level(0), Value::Real(33.0), Value::Int(2), Value::Level(2)])
            .unwrap();
        assert_eq!(p.active, vec![true, false, false, false]);
        assert_eq!(p.values[1], Value::Real(36.0));
        assert_eq!(p.values[2], Value::Int(3));
        assert_eq!(p.values[3], Value::Level(0));

        let all_active = space
            .point(vec![Value::Level(1), Value::Real(33.0), Value::Int(2), Value::Level(2)])
            .unwrap();
        assert_eq!(space.impute(&all_active), all_active);
        assert_eq!(all_active.values[1], Value::Real(33.0));
    }

    #[test]
    fn nested_activity_follows_inactive_parents() {
        let space = DesignSpace::new(
            "nested",
            vec![
                VariableSpec::categorical("a", &["off", "on"]),
                VariableSpec::categorical("b", &["off", "on"]).active_when("a", &["on"]),
                VariableSpec::continuous("x", 0.0, 2.0).active_when("b", &["off"]),
            ],
        )
        .unwrap();
        // b is inactive and imputed to level 0 ("off"), but x must still be inactive
        let p = space.point(vec![Value::Level(0), Value::Level(1), Value::Real(0.3)]).unwrap();
        assert_eq!(p.active, vec![true, false, false]);
        assert_eq!(p.values, vec![Value::Level(0), Value::Level(0), Value::Real(1.0)]);
    }

    #[test]
    fn rejects_invalid_declarations() {
        assert!(matches!(
            DesignSpace::new("d", vec![VariableSpec::continuous("x", 1.0, 1.0)]),
            Err(SpaceError::InvalidVariable { .. })
        ));
        assert!(matches!(
            DesignSpace::new("d", vec![VariableSpec::continuous("x", 0.0, 1.0), VariableSpec::integer("x", 0, 2)]),
            Err(SpaceError::DuplicateName(_))
        ));
        assert!(DesignSpace::new("d", vec![VariableSpec::categorical("c", &["a", "a"])]).is_err());
        // forward reference is a cycle risk and is rejected
        assert!(DesignSpace::new(
            "d",
            vec![
                VariableSpec::continuous("x", 0.0, 1.0).active_when("c", &["a"]),
                VariableSpec::categorical("c", &["a", "b"]),
            ]
        )
        .is_err());
        assert!(DesignSpace::new(
            "d",
            vec![
                VariableSpec::continuous("y", 0.0, 1.0),
                VariableSpec::continuous("x", 0.0, 1.0).active_when("y", &["a"]),
            ]
        )
        .is_err());
        assert!(DesignSpace::new(
            "d",
            vec![
                VariableSpec::categorical("c", &["a", "b"]),
                VariableSpec::continuous("x", 0.0, 1.0).active_when("c", &["zzz"]),
            ]
        )
        .is_err());
    }

    #[test]
    fn validate_detects_non_imputed_inactive_values() {
        let space = wing_space();
        let bad = MixedPoint {
            values: vec![Value::Level(0), Value::Real(31.0), Value::Int(3), Value::Level(0)],
            active: vec![true, false, false, false],
        };
        assert!(space.validate(&bad).is_err());
        assert!(space.validate(&space.impute(&bad)).is_ok());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn raw_point(space: &DesignSpace) -> impl Strategy<Value = Vec<Value>> {
            space
                .variables()
                .iter()
                .map(|v| match &v.kind {
                    VariableKind::Continuous { lower, upper } => (*lower..=*upper).prop_map(Value::Real).boxed(),
                    VariableKind::Integer { lower, upper } => (*lower..=*upper).prop_map(Value::Int).boxed(),
                    VariableKind::Categorical { levels } => (0..levels.len()).prop_map(Value::Level).boxed(),
                })
                .collect::<Vec<_>>()
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(1000))]

            #[test]
            fn decode_inverts_encode(raw in raw_point(&wing_space())) {
                let space = wing_space();
                let p = space.point(raw).unwrap();
                let v = space.encode(&p).unwrap();
                prop_assert_eq!(space.decode(&v.0).unwrap(), p);
            }

            #[test]
            fn one_hot_blocks_sum_to_one(raw in raw_point(&xzc())) {
                let space = xzc();
                let v = space.encode(&space.point(raw).unwrap()).unwrap();
                let span = space.layout()[2];
                prop_assert_eq!(v.0[span.range()].iter().sum::<f64>(), 1.0);
            }

            #[test]
            fn impute_is_idempotent(raw in raw_point(&wing_space())) {
                let space = wing_space();
                let active = space.activity(&raw);
                let once = space.impute(&MixedPoint { values: raw, active });
                prop_assert_eq!(space.impute(&once), once.clone());
                prop_assert!(space.validate(&once).is_ok());
            }

            #[test]
            fn decode_is_total(v in proptest::collection::vec(-100.0f64..100.0, 7)) {
                let space = wing_space();
                let p = space.decode(&v).unwrap();
                prop_assert!(space.validate(&p).is_ok());
            }
        }
    }
}
