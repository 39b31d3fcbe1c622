use std::ffi::OsString;
use std::fs;
use std::path::Path;

use serde_json::Value;

use crate::CliError;

/// Expands `--config FILE` into ordinary flags placed right after the
/// subcommand, so flags given on the command line still win. The file is a
/// JSON object keyed by long flag names (`"seed": 7`, `"families": ["lr"]`,
/// `"no-smote": true`).
pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(pos) = args.iter().position(|a| a == "--config") else {
        return Ok(args);
    };
    let path = args
        .get(pos + 1)
        .ok_or_else(|| CliError::Usage("--config needs a file path".into()))?
        .clone();
    let mut rest: Vec<OsString> = args[..pos].to_vec();
    rest.extend_from_slice(&args[pos + 2..]);
    let flags = flags_from_file(Path::new(&path))?;
    // Insert after the subcommand (first non-flag argument after the program name).
    let at = rest
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map_or(rest.len(), |i| i + 2);
    let mut out = rest[..at].to_vec();
    out.extend(flags);
    out.extend_from_slice(&rest[at..]);
    Ok(out)
}

fn flags_from_file(path: &Path) -> Result<Vec<OsString>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("config file {}: {e}", path.display())))?;
    let Value::Object(map) = value else {
        return Err(CliError::Usage(format!("config file {} must hold a JSON object", path.display())));
    };
    let mut flags = Vec::new();
    for (k, v) in map {
        let flag = OsString::from(format!("--{k}"));
        match v {
            Value::Bool(true) => flags.push(flag),
            Value::Bool(false) | Value::Null => {}
            Value::Array(items) => {
                for item in items {
                    flags.push(flag.clone());
                    flags.push(scalar(&item).into());
                }
            }
            other => {
                flags.push(flag);
                flags.push(scalar(&other).into());
            }
        }
    }
    Ok(flags)
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_flags_precede_command_line_flags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        fs::write(&cfg, r#"{"n": 100, "seed": 3, "families": ["lr", "dt"], "verbose": true}"#).unwrap();
        let args: Vec<OsString> = ["mortrisk", "generate", "--config", cfg.to_str().unwrap(), "--seed", "9"]
            .iter()
            .map(OsString::from)
            .collect();
        let out: Vec<String> = expand(args).unwrap().into_iter().map(|a| a.into_string().unwrap()).collect();
        assert_eq!(
            out,
            [
                "mortrisk", "generate", "--families", "lr", "--families", "dt", "--n", "100", "--seed", "3",
                "--verbose", "--seed", "9"
            ]
        );
    }
}
