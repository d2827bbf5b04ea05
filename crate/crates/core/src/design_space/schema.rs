//! JSON form of a design space.
//!
//! ```json
//! {
//!   "name": "retrofit",
//!   "variables": [
//!     { "name": "bpr",  "kind": "continuous",  "bounds": [9.0, 15.0] },
//!     { "name": "n",    "kind": "integer",     "bounds": [1, 5] },
//!     { "name": "obs",  "kind": "categorical", "levels": ["CONV", "MEA1", "MEA2", "AEA"] },
//!     { "name": "flap", "kind": "continuous",  "bounds": [0.0, 1.0],
//!       "active_when": [ { "variable": "obs", "in": ["MEA1", "MEA2"] } ] }
//!   ]
//! }
//! ```
//!
//! * `kind` is one of `continuous`, `integer`, `categorical`.
//! * `bounds` is required for continuous and integer variables (integer bounds
//!   must be integral) and forbidden for categorical ones; `levels` is the
//!   reverse (at least two unique labels).
//! * `active_when` is optional. Each entry names a categorical variable
//!   declared earlier and the levels under which this variable is active; all
//!   entries must hold.
//! * Unknown fields are rejected everywhere.

use serde::{Deserialize, Serialize};

use super::{Condition, DesignSpace, SpaceError, VariableKind, VariableSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpaceDef {
    pub name: String,
    pub variables: Vec<VariableDef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableDef {
    pub name: String,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub active_when: Vec<ConditionDef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionDef {
    pub variable: String,
    #[serde(rename = "in")]
    pub levels: Vec<String>,
}

/// Recognised values of `kind`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KindTag {
    Continuous,
    Integer,
    Categorical,
}

impl KindTag {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "continuous" => Some(Self::Continuous),
            "integer" => Some(Self::Integer),
            "categorical" => Some(Self::Categorical),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Continuous => "continuous",
            Self::Integer => "integer",
            Self::Categorical => "categorical",
        }
    }
}

fn field(path: String, message: impl Into<String>) -> SpaceError {
    SpaceError::Field {
        path,
        message: message.into(),
    }
}

impl DesignSpaceDef {
    /// Validates the document and builds the space. Errors carry the JSON path
    /// of the offending field.
    pub fn build(&self) -> Result<DesignSpace, SpaceError> {
        if self.variables.is_empty() {
            return Err(field("variables".into(), "at least one variable is required"));
        }
        let mut specs = Vec::with_capacity(self.variables.len());
        for (i, var) in self.variables.iter().enumerate() {
            let at = |f: &str| format!("variables[{i}].{f}");
            if self.variables[..i].iter().any(|v| v.name == var.name) {
                return Err(field(at("name"), format!("duplicate variable name `{}`", var.name)));
            }
            let tag = KindTag::parse(&var.kind).ok_or_else(|| {
                field(
                    at("kind"),
                    format!("unknown kind `{}` (expected continuous, integer or categorical)", var.kind),
                )
            })?;
            let kind = match tag {
                KindTag::Continuous | KindTag::Integer => {
                    if var.levels.is_some() {
                        return Err(field(at("levels"), format!("not allowed for {} variables", tag.as_str())));
                    }
                    let [lo, hi] = var.bounds.ok_or_else(|| field(at("bounds"), "required"))?;
                    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                        return Err(field(at("bounds"), "must be finite with lower < upper"));
                    }
                    if tag == KindTag::Integer {
                        if lo.fract() != 0.0 || hi.fract() != 0.0 {
                            return Err(field(at("bounds"), "integer bounds must be integral"));
                        }
                        VariableKind::Integer {
                            lower: lo as i64,
                            upper: hi as i64,
                        }
                    } else {
                        VariableKind::Continuous { lower: lo, upper: hi }
                    }
                }
                KindTag::Categorical => {
                    if var.bounds.is_some() {
                        return Err(field(at("bounds"), "not allowed for categorical variables"));
                    }
                    let levels = var.levels.clone().ok_or_else(|| field(at("levels"), "required"))?;
                    if levels.len() < 2 {
                        return Err(field(at("levels"), "at least two levels are required"));
                    }
                    if let Some(k) = (1..levels.len()).find(|&k| levels[..k].contains(&levels[k])) {
                        return Err(field(format!("variables[{i}].levels[{k}]"), format!("duplicate level `{}`", levels[k])));
                    }
                    VariableKind::Categorical { levels }
                }
            };
            specs.push(VariableSpec {
                name: var.name.clone(),
                kind,
                active_when: var
                    .active_when
                    .iter()
                    .map(|c| Condition {
                        variable: c.variable.clone(),
                        levels: c.levels.clone(),
                    })
                    .collect(),
            });
        }
        DesignSpace::new(self.name.clone(), specs).map_err(|e| match e {
            SpaceError::InvalidVariable { name, message } => {
                let i = self.variables.iter().position(|v| v.name == name).unwrap_or(0);
                field(format!("variables[{i}].active_when"), message)
            }
            other => other,
        })
    }

    pub fn from_space(space: &DesignSpace) -> Self {
        Self {
            name: space.name().to_string(),
            variables: space
                .variables()
                .iter()
                .map(|v| {
                    let (kind, bounds, levels) = match &v.kind {
                        VariableKind::Continuous { lower, upper } => (KindTag::Continuous, Some([*lower, *upper]), None),
                        VariableKind::Integer { lower, upper } => {
                            (KindTag::Integer, Some([*lower as f64, *upper as f64]), None)
                        }
                        VariableKind::Categorical { levels } => (KindTag::Categorical, None, Some(levels.clone())),
                    };
                    VariableDef {
                        name: v.name.clone(),
                        kind: kind.as_str().to_string(),
                        bounds,
                        levels,
                        active_when: v
                            .active_when
                            .iter()
                            .map(|c| ConditionDef {
                                variable: c.variable.clone(),
                                levels: c.levels.clone(),
                            })
                            .collect(),
                    }
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = r#"{
        "name": "retrofit",
        "variables": [
            { "name": "bpr", "kind": "continuous", "bounds": [9.0, 15.0] },
            { "name": "n", "kind": "integer", "bounds": [1, 5] },
            { "name": "obs", "kind": "categorical", "levels": ["CONV", "MEA1", "MEA2", "AEA"] },
            { "name": "flap", "kind": "continuous", "bounds": [0.0, 1.0],
              "active_when": [ { "variable": "obs", "in": ["MEA1", "MEA2"] } ] }
        ]
    }"#;

    #[test]
    fn parses_documented_example() {
        let space = DesignSpace::from_json(DOC).unwrap();
        assert_eq!(space.relaxed_dimension(), 1 + 1 + 4 + 1);
        assert_eq!(space.n_continuous(), 2);
        assert_eq!(space.n_integer(), 1);
        assert_eq!(space.n_categorical(), 1);
        let again = DesignSpace::from_json(&serde_json::to_string(&space.to_def()).unwrap()).unwrap();
        assert_eq!(again, space);
    }

    fn error_of(doc: &str) -> SpaceError {
        DesignSpace::from_json(doc).unwrap_err()
    }

    #[test]
    fn rejects_unknown_kind() {
        let e = error_of(r#"{"name":"s","variables":[{"name":"x","kind":"ordinal","bounds":[0,1]}]}"#);
        assert!(matches!(&e, SpaceError::Field { path, .. } if path == "variables[0].kind"), "{e}");
    }

    #[test]
    fn rejects_duplicates_and_bad_fields() {
        let e = error_of(
            r#"{"name":"s","variables":[{"name":"x","kind":"continuous","bounds":[0,1]},{"name":"x","kind":"continuous","bounds":[0,1]}]}"#,
        );
        assert!(matches!(&e, SpaceError::Field { path, .. } if path == "variables[1].name"));
        let e = error_of(r#"{"name":"s","variables":[{"name":"x","kind":"continuous","bounds":[0,1],"step":1}]}"#);
        assert!(matches!(e, SpaceError::Parse(_)));
        let e = error_of(r#"{"name":"s","variables":[{"name":"z","kind":"integer","bounds":[0.5,3]}]}"#);
        assert!(matches!(&e, SpaceError::Field { path, .. } if path == "variables[0].bounds"));
        let e = error_of(r#"{"name":"s","variables":[{"name":"c","kind":"categorical","levels":["a","b","a"]}]}"#);
        assert!(matches!(&e, SpaceError::Field { path, .. } if path == "variables[0].levels[2]"));
        let e = error_of(r#"{"name":"s","variables":[{"name":"c","kind":"categorical"}]}"#);
        assert!(matches!(&e, SpaceError::Field { path, .. } if path == "variables[0].levels"));
        let e = error_of(
            r#"{"name":"s","variables":[{"name":"x","kind":"continuous","bounds":[0,1],"active_when":[{"variable":"c","in":["a"]}]}]}"#,
        );
        assert!(matches!(&e, SpaceError::Field { path, .. } if path == "variables[0].active_when"));
        assert!(matches!(error_of(r#"{"name":"s","variables":[]}"#), SpaceError::Field { .. }));
    }
}
