//! Flag value types and the `--config` overlay.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Comma-separated reals, e.g. `0.3,0.5,0.8`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ListRepr")]
pub struct FloatList(pub Vec<f64>);

/// Counts as `start:stop:step` (inclusive) or a comma list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ListRepr")]
pub struct CountList(pub Vec<usize>);

#[derive(Deserialize)]
#[serde(untagged)]
enum ListRepr {
    Text(String),
    Number(f64),
    Items(Vec<f64>),
}

impl FromStr for FloatList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let values = s
            .split(',')
            .map(|x| {
                let x = x.trim();
                x.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| format!("{x:?} is not a number"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(FloatList(values))
    }
}

impl TryFrom<ListRepr> for FloatList {
    type Error = String;

    fn try_from(r: ListRepr) -> Result<Self, String> {
        match r {
            ListRepr::Text(s) => s.parse(),
            ListRepr::Number(x) => Ok(FloatList(vec![x])),
            ListRepr::Items(xs) => Ok(FloatList(xs)),
        }
    }
}

fn count(x: &str) -> Result<usize, String> {
    x.trim()
        .parse()
        .map_err(|_| format!("{:?} is not a non-negative integer", x.trim()))
}

impl FromStr for CountList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [start, stop, step] => {
                let (start, stop, step) = (count(start)?, count(stop)?, count(step)?);
                if step == 0 {
                    return Err("range step must be positive".into());
                }
                if start > stop {
                    return Err(format!("range start {start} exceeds stop {stop}"));
                }
                Ok(CountList((start..=stop).step_by(step).collect()))
            }
            [single] => Ok(CountList(
                single.split(',').map(count).collect::<Result<_, _>>()?,
            )),
            _ => Err(format!("{s:?}: expected start:stop:step or a comma list")),
        }
    }
}

impl TryFrom<ListRepr> for CountList {
    type Error = String;

    fn try_from(r: ListRepr) -> Result<Self, String> {
        let whole = |x: f64| {
            if x >= 0.0 && x.fract() == 0.0 {
                Ok(x as usize)
            } else {
                Err(format!("{x} is not a non-negative integer"))
            }
        };
        match r {
            ListRepr::Text(s) => s.parse(),
            ListRepr::Number(x) => Ok(CountList(vec![whole(x)?])),
            ListRepr::Items(xs) => Ok(CountList(
                xs.into_iter().map(whole).collect::<Result<_, _>>()?,
            )),
        }
    }
}

impl fmt::Display for CountList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(usize::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

pub fn read_config(path: &Path) -> Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    match serde_json::from_str(&text)
        .with_context(|| format!("config file {} is not valid JSON", path.display()))?
    {
        Value::Object(map) => Ok(map),
        _ => bail!("config file {} must hold a JSON object", path.display()),
    }
}

/// Values given on the command line replace those from the file. A flag
/// counts as given when it is present (options) or set (switches).
pub fn overlay<T: Serialize + DeserializeOwned>(cli: &T, file: &Map<String, Value>) -> Result<T> {
    let mut merged = file.clone();
    let Value::Object(given) = serde_json::to_value(cli)? else {
        bail!("flags do not serialize to an object");
    };
    for (key, value) in given {
        if !value.is_null() && value != Value::Bool(false) {
            merged.insert(key, value);
        }
    }
    serde_json::from_value(Value::Object(merged)).context("invalid config file")
}
