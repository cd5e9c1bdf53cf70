//! `--config FILE` support: a JSON object whose keys mirror flag names.
//!
//! Values are spliced into argv right after the subcommand, skipping any flag
//! the user also passed, so command-line flags always win. Relative paths in
//! the file resolve against the file's directory.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use deskscale::{Error, Result};
use serde::Serialize;
use serde_json::{Map, Value};

/// Flags whose values are filesystem paths.
pub const PATH_KEYS: &[&str] = &[
    "data", "out", "manifest", "holdout", "lexicon", "stoplist", "grid", "movies", "reviews",
    "local", "distributed", "spec", "train-data", "synonyms",
];

pub const EFFECTIVE_CONFIG: &str = "effective-config.json";

fn config_path(args: &[OsString]) -> Result<Option<PathBuf>> {
    for (i, a) in args.iter().enumerate() {
        let Some(s) = a.to_str() else { continue };
        if s == "--" {
            break;
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Ok(Some(PathBuf::from(p)));
        }
        if s == "--config" {
            let p = args
                .get(i + 1)
                .ok_or_else(|| Error::Config("--config needs a file".into()))?;
            return Ok(Some(PathBuf::from(p)));
        }
    }
    Ok(None)
}

fn given(args: &[OsString], flag: &str) -> bool {
    let eq = format!("{flag}=");
    args.iter()
        .filter_map(|a| a.to_str())
        .any(|s| s == flag || s.starts_with(&eq))
}

fn scalar(key: &str, v: &Value, base: &Path) -> Result<Option<String>> {
    let text = match v {
        Value::Null => return Ok(None),
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        Value::Bool(_) | Value::Array(_) | Value::Object(_) => {
            return Err(Error::Config(format!("config key {key:?} has an unsupported value {v}")))
        }
    };
    if PATH_KEYS.contains(&key) && Path::new(&text).is_relative() {
        return Ok(Some(base.join(text).to_string_lossy().into_owned()));
    }
    Ok(Some(text))
}

/// Argv with config-file values injected.
pub fn expand(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    if argv.len() < 2 {
        return Ok(argv);
    }
    let user = &argv[2..];
    let Some(path) = config_path(user)? else {
        return Ok(argv);
    };
    let bad = |e: &dyn std::fmt::Display| Error::Config(format!("config file {}: {e}", path.display()));
    let text = fs::read_to_string(&path).map_err(|e| bad(&e))?;
    let obj: Map<String, Value> = serde_json::from_str(&text).map_err(|e| bad(&e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut injected = Vec::new();
    for (raw_key, value) in &obj {
        let key = raw_key.replace('_', "-");
        if key == "config" {
            continue;
        }
        let flag = format!("--{key}");
        if given(user, &flag) {
            continue;
        }
        match value {
            Value::Bool(true) => injected.push(OsString::from(&flag)),
            Value::Bool(false) => {}
            Value::Array(items) => {
                let parts = items
                    .iter()
                    .map(|v| scalar(&key, v, &base))
                    .collect::<Result<Vec<_>>>()?;
                let parts: Vec<String> = parts.into_iter().flatten().collect();
                if !parts.is_empty() {
                    injected.push(OsString::from(&flag));
                    injected.push(OsString::from(parts.join(",")));
                }
            }
            v => {
                if let Some(s) = scalar(&key, v, &base)? {
                    injected.push(OsString::from(&flag));
                    injected.push(OsString::from(s));
                }
            }
        }
    }
    let mut out = argv[..2].to_vec();
    out.extend(injected);
    out.extend_from_slice(user);
    Ok(out)
}

fn absolutize(v: &mut Value) {
    let abs = |s: &mut String| {
        if let Ok(p) = std::path::absolute(&*s) {
            *s = p.to_string_lossy().into_owned();
        }
    };
    match v {
        Value::String(s) => abs(s),
        Value::Array(items) => items.iter_mut().for_each(absolutize),
        _ => {}
    }
}

/// Serialized flags with nulls dropped and paths made absolute, so the file
/// can be fed back through `--config` from any directory.
pub fn effective(args: &impl Serialize) -> Result<Value> {
    let mut value = serde_json::to_value(args)?;
    if let Value::Object(map) = &mut value {
        map.retain(|_, v| !v.is_null());
        for (k, v) in map.iter_mut() {
            if PATH_KEYS.contains(&k.as_str()) {
                absolutize(v);
            }
        }
    }
    Ok(value)
}

pub fn write_effective(dir: &Path, args: &impl Serialize) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut text = serde_json::to_string_pretty(&effective(args)?)?;
    text.push('\n');
    fs::write(dir.join(EFFECTIVE_CONFIG), text)?;
    Ok(())
}
