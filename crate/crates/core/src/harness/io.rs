use std::fmt;
use std::path::Path;

use super::HarnessError;
use crate::workloads::Scenario;

/// How unknown keys in a scenario file are treated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Strictness {
    #[default]
    Strict,
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: Option<usize>,
    pub field: Option<String>,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(l) = self.line {
            write!(f, "line {l}: ")?;
        }
        if let Some(k) = &self.field {
            write!(f, "field `{k}`: ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone)]
pub struct Parsed {
    pub scenario: Scenario,
    /// Unknown keys skipped in lenient mode.
    pub warnings: Vec<String>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn backticked(msg: &str) -> Option<String> {
    let start = msg.find('`')? + 1;
    let len = msg[start..].find('`')?;
    Some(msg[start..start + len].to_string())
}

/// Best-effort line of an unknown key: first line that assigns it or opens
/// a table named after it.
fn key_line(text: &str, path: &str) -> Option<usize> {
    let key = path.rsplit('.').next()?;
    text.lines().position(|l| {
        let l = l.trim_start();
        let bare = l.trim_start_matches('[').trim_end_matches(']');
        l.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
            || bare.rsplit('.').next() == Some(key)
    })
    .map(|i| i + 1)
}

fn from_toml(text: &str, e: &toml::de::Error) -> ParseError {
    let message = e.message().trim().to_string();
    ParseError { line: e.span().map(|s| line_of(text, s.start)), field: backticked(&message), message }
}

/// Parses and validates scenario text.
pub fn parse_scenario_str(text: &str, strictness: Strictness) -> Result<Parsed, HarnessError> {
    let mut unknown = Vec::new();
    let de = toml::Deserializer::new(text);
    let scenario: Scenario =
        serde_ignored::deserialize(de, |p| unknown.push(p.to_string())).map_err(|e| from_toml(text, &e))?;
    if strictness == Strictness::Strict {
        if let Some(first) = unknown.first() {
            return Err(ParseError {
                line: key_line(text, first),
                field: Some(first.clone()),
                message: format!("unknown key{} {}", if unknown.len() > 1 { "s" } else { "" }, unknown.join(", ")),
            }
            .into());
        }
    }
    scenario.validate()?;
    let warnings = unknown.into_iter().map(|k| format!("ignored unknown key {k}")).collect();
    Ok(Parsed { scenario, warnings })
}

pub fn parse_scenario_with(path: &Path, strictness: Strictness) -> Result<Parsed, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_scenario_str(&text, strictness)
}

/// Strict parse of a scenario file.
pub fn parse_scenario(path: &Path) -> Result<Scenario, HarnessError> {
    Ok(parse_scenario_with(path, Strictness::Strict)?.scenario)
}

/// Canonical text form: tables and keys in sorted order, defaults that
/// are skipped on output stay skipped.
pub fn emit_scenario(scenario: &Scenario) -> Result<String, HarnessError> {
    let value = toml::Value::try_from(scenario).map_err(|e| HarnessError::Emit(e.to_string()))?;
    toml::to_string_pretty(&value).map_err(|e| HarnessError::Emit(e.to_string()))
}

pub fn write_scenario(path: &Path, scenario: &Scenario) -> Result<(), HarnessError> {
    let text = emit_scenario(scenario)?;
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}
