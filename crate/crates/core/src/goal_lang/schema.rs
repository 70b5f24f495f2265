use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SchemaError {
    #[error("schema file is not valid TOML: {0}")]
    Syntax(String),
    #[error("field `{0}` is declared more than once")]
    DuplicateField(String),
    #[error("field `{name}` has min {min} >= max {max}")]
    EmptyBounds { name: String, min: f64, max: f64 },
    #[error("schema declares no fields")]
    Empty,
}

/// One entry of the state vector with the estimated value range used for
/// robustness scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldDecl {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

/// Ordered description of the environment state vector.
///
/// On disk this is a TOML document with one `[[field]]` table per entry:
///
/// ```toml
/// [[field]]
/// name = "level"
/// min = 0.0
/// max = 1.0
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSchema {
    #[serde(rename = "field")]
    pub fields: Vec<FieldDecl>,
}

impl StateSchema {
    pub fn new(fields: Vec<FieldDecl>) -> Result<Self, SchemaError> {
        let schema = StateSchema { fields };
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_toml(text: &str) -> Result<Self, SchemaError> {
        let schema: StateSchema =
            toml::from_str(text).map_err(|e| SchemaError::Syntax(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("schema serializes")
    }

    fn validate(&self) -> Result<(), SchemaError> {
        if self.fields.is_empty() {
            return Err(SchemaError::Empty);
        }
        for (i, f) in self.fields.iter().enumerate() {
            if self.fields[..i].iter().any(|g| g.name == f.name) {
                return Err(SchemaError::DuplicateField(f.name.clone()));
            }
            if !(f.min < f.max) {
                return Err(SchemaError::EmptyBounds {
                    name: f.name.clone(),
                    min: f.min,
                    max: f.max,
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.fields.iter().map(|f| f.name.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_ordered_fields() {
        let schema = StateSchema::from_toml(
            r#"
            [[field]]
            name = "x"
            min = -1.0
            max = 1.0

            [[field]]
            name = "y"
            min = -2.0
            max = 2.0
            "#,
        )
        .unwrap();
        assert_eq!(schema.names().collect::<Vec<_>>(), ["x", "y"]);
        assert_eq!(schema.index_of("y"), Some(1));
        assert_eq!(StateSchema::from_toml(&schema.to_toml()).unwrap(), schema);
    }

    #[test]
    fn rejects_bad_schemas() {
        let dup = "[[field]]\nname='a'\nmin=0\nmax=1\n[[field]]\nname='a'\nmin=0\nmax=1\n";
        assert_eq!(
            StateSchema::from_toml(dup),
            Err(SchemaError::DuplicateField("a".into()))
        );
        let flat = "[[field]]\nname='a'\nmin=1.0\nmax=1.0\n";
        assert!(matches!(
            StateSchema::from_toml(flat),
            Err(SchemaError::EmptyBounds { .. })
        ));
        assert!(matches!(
            StateSchema::from_toml("field = 3"),
            Err(SchemaError::Syntax(_))
        ));
    }
}
