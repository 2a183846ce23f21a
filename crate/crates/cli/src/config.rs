//! `key=value` config files, merged into the argument list as long flags.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

/// Path given by `--config PATH` or `--config=PATH`, if any.
pub fn config_path(args: &[String]) -> Option<String> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--" {
            break;
        }
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(v.to_string());
        }
    }
    None
}

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
/// Keys may use `_` or `-`.
pub fn parse(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| format!("line {}: expected key=value", i + 1))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() || key == "config" {
            return Err(format!("line {}: invalid key '{}'", i + 1, k.trim()));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

fn flag_names(args: &[String]) -> HashSet<String> {
    args.iter()
        .take_while(|a| a.as_str() != "--")
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a).to_string())
        .collect()
}

/// Appends config entries not already present as flags. `true` turns into a
/// bare switch and `false` drops the entry.
pub fn merge(args: &[String], entries: &[(String, String)]) -> Vec<String> {
    let given = flag_names(args);
    let mut out = args.to_vec();
    for (k, v) in entries {
        if given.contains(k) {
            continue;
        }
        match v.as_str() {
            "false" => {}
            "true" => out.push(format!("--{k}")),
            _ => {
                out.push(format!("--{k}"));
                out.push(v.clone());
            }
        }
    }
    out
}

pub fn load_and_merge(args: Vec<String>) -> Result<Vec<String>, String> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = fs::read_to_string(Path::new(&path)).map_err(|e| format!("config file {path}: {e}"))?;
    let entries = parse(&text).map_err(|e| format!("config file {path}: {e}"))?;
    Ok(merge(&args, &entries))
}
