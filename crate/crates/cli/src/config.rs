//! Flat `key=value` config files merged into the command line.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

/// Parses `key=value` lines; blank lines and lines starting with `#` are skipped.
pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("config line {}: expected key=value, got `{line}`", i + 1);
        };
        let k = k.trim().trim_start_matches("--");
        if k.is_empty() {
            bail!("config line {}: empty key", i + 1);
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn given(args: &[String], key: &str) -> bool {
    let flag = format!("--{key}");
    args.iter()
        .any(|a| *a == flag || a.starts_with(&format!("{flag}=")))
}

/// Removes `--config <path>` from `args` and appends every config key not already on
/// the command line as a flag, so explicit flags always win.
pub fn merge(mut args: Vec<String>) -> Result<Vec<String>> {
    let Some(pos) = args
        .iter()
        .position(|a| a == "--config" || a.starts_with("--config="))
    else {
        return Ok(args);
    };
    let path = match args[pos].split_once('=') {
        Some((_, p)) => {
            let p = p.to_string();
            args.remove(pos);
            p
        }
        None => {
            if pos + 1 >= args.len() {
                bail!("--config needs a path");
            }
            args.remove(pos);
            args.remove(pos)
        }
    };
    let text =
        fs::read_to_string(Path::new(&path)).with_context(|| format!("reading config {path}"))?;
    for (k, v) in parse(&text)? {
        if given(&args, &k) {
            continue;
        }
        match v.as_str() {
            "true" => args.push(format!("--{k}")),
            "false" => {}
            _ => args.push(format!("--{k}={v}")),
        }
    }
    Ok(args)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_skips_comments() {
        let kv = parse("# c\n\nseed = 7\n--delta=0.1\n").unwrap();
        assert_eq!(
            kv,
            vec![("seed".into(), "7".into()), ("delta".into(), "0.1".into())]
        );
        assert!(parse("novalue\n").is_err());
    }

    #[test]
    fn explicit_flags_win() {
        let dir = std::env::temp_dir().join(format!("spikesync-config-{}", std::process::id()));
        fs::write(&dir, "seed=7\ndelta=0.2\nfull-scale=true\n").unwrap();
        let args: Vec<String> = [
            "bin",
            "power",
            "--config",
            dir.to_str().unwrap(),
            "--delta",
            "0.1",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let merged = merge(args).unwrap();
        fs::remove_file(&dir).unwrap();
        assert_eq!(
            merged,
            vec!["bin", "power", "--delta", "0.1", "--seed=7", "--full-scale"]
        );
    }
}
