//! Bundled variable metadata: candidate regressors and prompt descriptions.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const VARIABLES: &str = include_str!("../data/variables.toml");
const DESCRIPTIONS: &str = include_str!("../data/prompt_descriptions.toml");

/// The nine food CPI target series.
pub const CATEGORIES: [&str; 9] = [
    "target_bakery",
    "target_dairy",
    "target_fish",
    "target_food",
    "target_fruit",
    "target_meat",
    "target_other",
    "target_restaurants",
    "target_vegetables",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub id: String,
    pub label: String,
    pub description: String,
}

#[derive(Deserialize)]
struct VariableFile {
    variable: Vec<Variable>,
}

pub fn parse_variables(text: &str) -> Result<Vec<Variable>> {
    let file: VariableFile =
        toml::from_str(text).map_err(|e| Error::Config(format!("variable list: {e}")))?;
    Ok(file.variable)
}

pub fn load_variables(path: impl AsRef<Path>) -> Result<Vec<Variable>> {
    let path = path.as_ref();
    parse_variables(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

pub fn bundled_variables() -> Vec<Variable> {
    parse_variables(VARIABLES).expect("bundled variable list is valid")
}

/// Series name → one-line description used in forecasting prompts.
pub type Descriptions = BTreeMap<String, String>;

pub fn parse_descriptions(text: &str) -> Result<Descriptions> {
    toml::from_str(text).map_err(|e| Error::Config(format!("descriptions: {e}")))
}

pub fn load_descriptions(path: impl AsRef<Path>) -> Result<Descriptions> {
    let path = path.as_ref();
    parse_descriptions(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

pub fn bundled_descriptions() -> Descriptions {
    parse_descriptions(DESCRIPTIONS).expect("bundled descriptions are valid")
}
