//! `--config` files: TOML tables keyed by subcommand path whose entries act
//! as default flags.
//!
//! ```toml
//! [forge.demos]
//! profile = "A,B,C"
//! n = 1000
//! seed = 3
//!
//! [eval.run]
//! workers = 8
//! ```
//!
//! Flags given on the command line always win.

use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};

/// Finds `--config <path>` / `--config=<path>` and removes it from `args`.
fn take_config(args: &mut Vec<OsString>) -> Result<Option<OsString>> {
    let mut i = 0;
    while i < args.len() {
        let a = args[i].to_string_lossy().into_owned();
        if a == "--config" {
            if i + 1 >= args.len() {
                bail!("--config needs a file path");
            }
            let path = args.remove(i + 1);
            args.remove(i);
            return Ok(Some(path));
        }
        if let Some(p) = a.strip_prefix("--config=") {
            let path = OsString::from(p);
            args.remove(i);
            return Ok(Some(path));
        }
        i += 1;
    }
    Ok(None)
}

fn value_to_arg(key: &str, v: &toml::Value) -> Result<String> {
    Ok(match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(b) => b.to_string(),
        toml::Value::Array(items) => items
            .iter()
            .map(|i| value_to_arg(key, i))
            .collect::<Result<Vec<_>>>()?
            .join(","),
        other => bail!("config key `{key}`: unsupported value {other}"),
    })
}

/// Splices config defaults for the invoked subcommand into `args`.
///
/// The subcommand path is the run of leading non-flag words; defaults are
/// inserted right after it, and only for flags the user did not pass.
pub fn apply(mut args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = take_config(&mut args)? else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(Path::new(&path))
        .with_context(|| format!("reading config {}", Path::new(&path).display()))?;
    let root: toml::Table = text
        .parse()
        .with_context(|| format!("parsing config {}", Path::new(&path).display()))?;

    let words: Vec<String> = args
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .take_while(|a| !a.starts_with('-'))
        .collect();
    let mut table = &root;
    let mut depth = 0;
    for w in &words {
        match table.get(w) {
            Some(toml::Value::Table(t)) => {
                table = t;
                depth += 1;
            }
            _ => break,
        }
    }
    if depth == 0 {
        return Ok(args);
    }
    let given: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let mut extra = Vec::new();
    for (key, value) in table {
        if matches!(value, toml::Value::Table(_)) {
            continue;
        }
        let flag = format!("--{}", key.replace('_', "-"));
        if given.iter().any(|g| *g == flag || g.starts_with(&format!("{flag}="))) {
            continue;
        }
        match value {
            toml::Value::Boolean(true) => extra.push(OsString::from(flag)),
            toml::Value::Boolean(false) => {}
            v => {
                extra.push(OsString::from(flag));
                extra.push(OsString::from(value_to_arg(key, v)?));
            }
        }
    }
    let at = 1 + depth;
    args.splice(at..at, extra);
    Ok(args)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn defaults_fill_missing_flags() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(
            &p,
            "[forge.demos]\nprofile = [\"A\", \"B\"]\nn = 5\nseed = 3\n[bench.gen]\nn = 9\n",
        )
        .unwrap();
        let args = os(&[
            "oevla",
            "forge",
            "demos",
            "--config",
            p.to_str().unwrap(),
            "--n",
            "7",
            "--out",
            "x",
        ]);
        let out: Vec<String> = apply(args)
            .unwrap()
            .into_iter()
            .map(|a| a.into_string().unwrap())
            .collect();
        assert_eq!(&out[..3], ["oevla", "forge", "demos"]);
        assert!(out.windows(2).any(|w| w == ["--profile", "A,B"]));
        assert!(out.windows(2).any(|w| w == ["--seed", "3"]));
        assert!(out.windows(2).any(|w| w == ["--n", "7"]));
        assert!(!out.iter().any(|a| a == "5"));
    }

    #[test]
    fn no_config_is_identity() {
        let args = os(&["oevla", "codec", "stats"]);
        assert_eq!(apply(args.clone()).unwrap(), args);
        assert!(apply(os(&["oevla", "--config"])).is_err());
    }
}
