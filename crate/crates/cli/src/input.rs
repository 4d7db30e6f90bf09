//! Input parsing: canvas / (n,γ)-system JSON files, rationals and
//! integer vectors from the command line.

use crate::CliError;
use pgn::lattice::{primitive, Direction, IntVec};
use pgn::rat::{self, Rat};
use pgn::systems::{Canvas, NGammaSystem};

pub enum InputFile {
    Canvas(Canvas),
    System(NGammaSystem),
}

pub fn parse_rat_arg(s: &str, what: &str) -> Result<Rat, CliError> {
    rat::parse_rat(s).map_err(|e| CliError::Parse(format!("{what}: {e}")))
}

pub fn parse_direction(s: &str) -> Result<Direction, CliError> {
    let v: IntVec = s
        .split([',', ' '])
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.trim()
                .parse::<i64>()
                .map(Into::into)
                .map_err(|e| CliError::Parse(format!("direction component {t:?}: {e}")))
        })
        .collect::<Result<_, _>>()?;
    if v.len() < 2 || v.iter().all(num::Zero::is_zero) {
        return Err(CliError::Parse(
            "direction needs ≥ 2 integer components, not all zero".into(),
        ));
    }
    Ok(Direction::ExactNormal(primitive(&v)))
}

pub fn parse_int_vec(s: &str) -> Result<IntVec, CliError> {
    let v: IntVec = s
        .split([',', ' '])
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.trim()
                .parse::<i64>()
                .map(Into::into)
                .map_err(|e| CliError::Parse(format!("vector component {t:?}: {e}")))
        })
        .collect::<Result<_, _>>()?;
    if v.is_empty() {
        return Err(CliError::Parse("empty vector".into()));
    }
    Ok(v)
}

/// Load a JSON file holding either a canvas (key "points") or an
/// (n,γ)-system (key "M"); parse errors report line and column.
pub fn load_input(path: &str) -> Result<InputFile, CliError> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| {
        CliError::Parse(format!("{path}: line {} column {}: {e}", e.line(), e.column()))
    })?;
    let obj = value
        .as_object()
        .ok_or_else(|| CliError::Parse(format!("{path}: expected a JSON object")))?;
    if obj.contains_key("points") {
        let c: Canvas = serde_json::from_value(value.clone()).map_err(|e| {
            CliError::Parse(format!("{path}: invalid canvas: {e}"))
        })?;
        Ok(InputFile::Canvas(c))
    } else if obj.contains_key("M") {
        let s: NGammaSystem = serde_json::from_value(value.clone()).map_err(|e| {
            CliError::Parse(format!("{path}: invalid system: {e}"))
        })?;
        Ok(InputFile::System(s))
    } else {
        Err(CliError::Parse(format!(
            "{path}: expected a canvas (\"points\") or a system (\"M\")"
        )))
    }
}

pub fn load_canvas(path: &str) -> Result<Canvas, CliError> {
    match load_input(path)? {
        InputFile::Canvas(c) => Ok(c),
        InputFile::System(_) => {
            Err(CliError::Parse(format!("{path}: expected a canvas file")))
        }
    }
}

pub fn load_system(path: &str) -> Result<NGammaSystem, CliError> {
    match load_input(path)? {
        InputFile::Canvas(_) => {
            Err(CliError::Parse(format!("{path}: expected a system file")))
        }
        InputFile::System(s) => Ok(s),
    }
}
