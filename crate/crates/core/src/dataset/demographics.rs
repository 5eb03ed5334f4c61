//! The 21-field socio-demographic questionnaire, columns `A` to `U`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Questionnaire field letters in column order.
pub const FIELD_LETTERS: [char; 21] =
    ['A', 'B', 'C', 'D', 'E', 'F', 'G', 'H', 'I', 'J', 'K', 'L', 'M', 'N', 'O', 'P', 'Q', 'R', 'S', 'T', 'U'];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("field {field}: missing")]
    Missing { field: char },
    #[error("field {field}: {value:?} is not a non-negative integer")]
    NotInteger { field: char, value: String },
    #[error("field {field}: code {value} outside {allowed}")]
    OutOfRange { field: char, value: u32, allowed: &'static str },
    #[error("field {field}: text must not be empty")]
    EmptyText { field: char },
}

impl FieldError {
    pub fn field(&self) -> char {
        match self {
            FieldError::Missing { field }
            | FieldError::NotInteger { field, .. }
            | FieldError::OutOfRange { field, .. }
            | FieldError::EmptyText { field } => *field,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DemographicRecord {
    #[serde(rename = "A")]
    pub birth_year: u32,
    #[serde(rename = "B")]
    pub gender: u32,
    #[serde(rename = "C")]
    pub race: u32,
    #[serde(rename = "D")]
    pub class_status: u32,
    #[serde(rename = "E")]
    pub college: u32,
    #[serde(rename = "F")]
    pub major: u32,
    #[serde(rename = "G")]
    pub credit_hours: u32,
    #[serde(rename = "H")]
    pub prior_experiments: u32,
    #[serde(rename = "I")]
    pub prior_lottery_experiments: u32,
    #[serde(rename = "J")]
    pub marital_status: u32,
    #[serde(rename = "K")]
    pub hours_worked: u32,
    #[serde(rename = "L")]
    pub hourly_earnings: u32,
    #[serde(rename = "M")]
    pub financial_dependency: u32,
    #[serde(rename = "N")]
    pub family_income: u32,
    #[serde(rename = "O")]
    pub household_size: u32,
    #[serde(rename = "P")]
    pub height: u32,
    #[serde(rename = "Q")]
    pub weight: u32,
    #[serde(rename = "R")]
    pub country: String,
    #[serde(rename = "S")]
    pub state: String,
    #[serde(rename = "T")]
    pub stated_attitude_general: u32,
    #[serde(rename = "U")]
    pub stated_attitude_lottery: u32,
}

/// Allowed codes per field; `None` means any non-negative integer.
fn allowed(field: char) -> Option<(&'static [u32], &'static str)> {
    const BIN: &[u32] = &[0, 1];
    const RACE: &[u32] = &[0, 1, 2, 3, 4, 5, 6];
    const CLASS: &[u32] = &[0, 1, 2, 3, 4, 5];
    const COLLEGE: &[u32] = &[0, 1, 2, 3, 4, 5, 6, 8, 9, 10, 11, 12];
    const MAJOR: &[u32] = &[0, 1, 2, 3, 4];
    const COUNT5: &[u32] = &[0, 1, 2, 3, 4, 5];
    const DEPEND: &[u32] = &[0, 1, 2];
    const INCOME: &[u32] = &[0, 1, 2, 3, 4, 5, 6, 7];
    const SCALE9: &[u32] = &[1, 2, 3, 4, 5, 6, 7, 8, 9];
    Some(match field {
        'B' | 'J' => (BIN, "{0, 1}"),
        'C' => (RACE, "0..=6"),
        'D' => (CLASS, "0..=5"),
        'E' => (COLLEGE, "{0..=6, 8..=12}"),
        'F' => (MAJOR, "0..=4"),
        'H' | 'I' => (COUNT5, "0..=5"),
        'M' => (DEPEND, "0..=2"),
        'N' => (INCOME, "0..=7"),
        'T' | 'U' => (SCALE9, "1..=9"),
        _ => return None,
    })
}

fn check_code(field: char, value: u32) -> Result<u32, FieldError> {
    if field == 'A' && !(1900..=2100).contains(&value) {
        return Err(FieldError::OutOfRange { field, value, allowed: "1900..=2100" });
    }
    if let Some((codes, desc)) = allowed(field) {
        if !codes.contains(&value) {
            return Err(FieldError::OutOfRange { field, value, allowed: desc });
        }
    }
    Ok(value)
}

impl DemographicRecord {
    /// Builds a record from text values looked up by field letter.
    pub fn from_fields<F>(get: F) -> Result<Self, FieldError>
    where
        F: Fn(char) -> Option<String>,
    {
        let int = |field: char| -> Result<u32, FieldError> {
            let raw = get(field).ok_or(FieldError::Missing { field })?;
            let t = raw.trim();
            if t.is_empty() {
                return Err(FieldError::Missing { field });
            }
            let v = t.parse::<u32>().map_err(|_| FieldError::NotInteger { field, value: raw.clone() })?;
            check_code(field, v)
        };
        let text = |field: char| -> Result<String, FieldError> {
            let raw = get(field).ok_or(FieldError::Missing { field })?;
            let t = raw.trim();
            if t.is_empty() {
                return Err(FieldError::EmptyText { field });
            }
            Ok(t.to_string())
        };
        Ok(DemographicRecord {
            birth_year: int('A')?,
            gender: int('B')?,
            race: int('C')?,
            class_status: int('D')?,
            college: int('E')?,
            major: int('F')?,
            credit_hours: int('G')?,
            prior_experiments: int('H')?,
            prior_lottery_experiments: int('I')?,
            marital_status: int('J')?,
            hours_worked: int('K')?,
            hourly_earnings: int('L')?,
            financial_dependency: int('M')?,
            family_income: int('N')?,
            household_size: int('O')?,
            height: int('P')?,
            weight: int('Q')?,
            country: text('R')?,
            state: text('S')?,
            stated_attitude_general: int('T')?,
            stated_attitude_lottery: int('U')?,
        })
    }

    /// Builds a record from the 21 column values in letter order.
    pub fn from_columns(cols: &[&str]) -> Result<Self, FieldError> {
        Self::from_fields(|c| {
            let i = FIELD_LETTERS.iter().position(|&l| l == c)?;
            cols.get(i).map(|s| s.to_string())
        })
    }

    /// Re-checks every coded field.
    pub fn validate(&self) -> Result<(), FieldError> {
        let cols = self.columns();
        Self::from_columns(&cols.iter().map(String::as_str).collect::<Vec<_>>()).map(|_| ())
    }

    /// Values in letter order, as written to the demographics table.
    pub fn columns(&self) -> Vec<String> {
        let n = |v: u32| v.to_string();
        vec![
            n(self.birth_year),
            n(self.gender),
            n(self.race),
            n(self.class_status),
            n(self.college),
            n(self.major),
            n(self.credit_hours),
            n(self.prior_experiments),
            n(self.prior_lottery_experiments),
            n(self.marital_status),
            n(self.hours_worked),
            n(self.hourly_earnings),
            n(self.financial_dependency),
            n(self.family_income),
            n(self.household_size),
            n(self.height),
            n(self.weight),
            self.country.clone(),
            self.state.clone(),
            n(self.stated_attitude_general),
            n(self.stated_attitude_lottery),
        ]
    }
}
