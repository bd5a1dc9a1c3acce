use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Keys of a flat `key = value` file, in sorted order.
pub type ConfigMap = BTreeMap<String, String>;

/// Parses `key = value` lines. Blank lines and lines starting with `#` are
/// skipped; a key may appear once.
pub fn parse_config(text: &str) -> Result<ConfigMap> {
    let mut map = ConfigMap::new();
    for (index, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |reason: String| Error::Parse {
            line: index + 1,
            reason,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(format!("expected key=value, got `{line}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(parse_err("empty key".into()));
        }
        if map.insert(key.to_owned(), value.to_owned()).is_some() {
            return Err(parse_err(format!("duplicate key `{key}`")));
        }
    }
    Ok(map)
}

/// Comma separated list of positive numbers.
pub fn parse_eps_list(text: &str) -> Result<Vec<f64>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|item| {
            let item = item.trim();
            match item.parse::<f64>() {
                Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
                _ => Err(Error::invalid("eps", format!("`{item}` is not a positive number"))),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_files() {
        let map = parse_config("# sweep\ndim = 1\n\np=3\neps = 0.6, 0.5\n").unwrap();
        assert_eq!(map.len(), 3);
        assert_eq!(map["p"], "3");
        assert_eq!(parse_eps_list(&map["eps"]).unwrap(), vec![0.6, 0.5]);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(matches!(parse_config("dim 1"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_config("a=1\na=2"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_config("\n=2"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn eps_lists() {
        assert!(parse_eps_list("").unwrap().is_empty());
        assert!(parse_eps_list("0.5,x").is_err());
        assert!(parse_eps_list("0.5,-1").is_err());
    }
}
