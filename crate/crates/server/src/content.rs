//! Editable subject-facing text with `{name}` placeholders.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::config::ConfigError;

const DEFAULT_CONTENT: &str = include_str!("../content/subject_text.toml");

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Content {
    pub instructions: String,
    pub payoff_task: String,
    pub price_task: String,
    pub bins_task: String,
    pub questionnaire: String,
    pub awaiting_payment: String,
    pub reveal: String,
    /// Messages keyed by session error code.
    pub errors: BTreeMap<String, String>,
}

impl Default for Content {
    fn default() -> Self {
        toml::from_str(DEFAULT_CONTENT).expect("built-in content parses")
    }
}

impl Content {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let doc = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Ok(toml::from_str(&doc)?)
    }

    /// Message for an error code, falling back to `fallback`.
    pub fn error(&self, code: &str, vars: &[(&str, String)], fallback: &str) -> String {
        self.errors.get(code).map_or_else(|| fallback.to_string(), |t| fill(t, vars))
    }
}

/// Replaces each `{name}` with its value; unknown names are left as is.
pub fn fill(template: &str, vars: &[(&str, String)]) -> String {
    let mut out = template.trim().to_string();
    for (k, v) in vars {
        out = out.replace(&format!("{{{k}}}"), v);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_content_has_every_error() {
        let c = Content::default();
        for code in ["irrational_switching", "duplicate_row", "out_of_order_row", "wrong_stage", "questionnaire_field"]
        {
            assert!(c.errors.contains_key(code), "{code}");
        }
        let msg = c.error("irrational_switching", &[("row", "3".into())], "");
        assert!(msg.contains("row 3") && !msg.contains('{'));
    }

    #[test]
    fn fill_leaves_unknown_names() {
        assert_eq!(fill("USD {fee} {x}", &[("fee", "5.00".into())]), "USD 5.00 {x}");
    }
}
