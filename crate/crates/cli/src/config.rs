//! Flat key-value config files.
//!
//! ```text
//! # reference regime
//! delta = 0.7
//! kappa = 0.1
//! eps2 = 0.1
//! snr = 0.5            # or: sigma_z2 = 0.2
//! lambda1 = 0.1
//! lambda2 = 0.5
//! l = 0
//! u = 1
//! xi = 1e-3
//! prior.atoms = [(1.0, 1.0)]
//! ```
//!
//! `l`/`u` accept `inf`/`-inf`. `prior.atoms` is optional and defaults to the
//! unit atom (sparse-Bernoulli signals). Exactly one of `sigma_z2`/`snr` must
//! be present.

use std::collections::BTreeMap;

use boxen::{Config64, Prior64};

use crate::{CliError, CliResult};

pub const CONFIG_KEYS: &[&str] = &[
    "delta", "kappa", "eps2", "sigma_z2", "snr", "lambda1", "lambda2", "l", "u", "xi",
    "prior.atoms",
];

/// Parsed configuration: the scalar parameters plus the signal prior.
#[derive(Debug, Clone)]
pub struct FileConfig {
    pub cfg: Config64,
    pub prior: Prior64,
}

/// Splits config text into a key -> value map, rejecting unknown or duplicate
/// keys. Comments start with `#` and run to end of line.
pub fn parse_kv(text: &str) -> CliResult<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Validation(format!("config line {}: expected `key = value`", lineno + 1))
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(CliError::Validation(format!(
                "config line {}: unknown key `{key}`",
                lineno + 1
            )));
        }
        if map.insert(key.clone(), value).is_some() {
            return Err(CliError::Validation(format!("duplicate config key `{key}`")));
        }
    }
    Ok(map)
}

fn parse_float(key: &str, value: &str) -> CliResult<f64> {
    value
        .parse::<f64>()
        .map_err(|_| CliError::Validation(format!("config key `{key}`: cannot parse `{value}` as a number")))
}

fn parse_atoms(value: &str) -> CliResult<Vec<(f64, f64)>> {
    let inner = value
        .trim()
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| {
            CliError::Validation("prior.atoms: expected `[(value, prob), ...]`".into())
        })?;
    let mut atoms = Vec::new();
    let mut rest = inner.trim();
    while !rest.is_empty() {
        let open = rest.find('(').ok_or_else(|| {
            CliError::Validation("prior.atoms: expected `(value, prob)` pair".into())
        })?;
        let close = rest[open..].find(')').ok_or_else(|| {
            CliError::Validation("prior.atoms: unbalanced parenthesis".into())
        })? + open;
        let pair = &rest[open + 1..close];
        let (v, p) = pair.split_once(',').ok_or_else(|| {
            CliError::Validation("prior.atoms: pair needs two comma-separated numbers".into())
        })?;
        atoms.push((
            parse_float("prior.atoms", v.trim())?,
            parse_float("prior.atoms", p.trim())?,
        ));
        rest = rest[close + 1..].trim_start_matches([',', ' ', '\t']);
    }
    if atoms.is_empty() {
        return Err(CliError::Validation("prior.atoms: no atoms given".into()));
    }
    Ok(atoms)
}

/// Builds the validated configuration from a key -> value map.
pub fn build_config(map: &BTreeMap<String, String>) -> CliResult<FileConfig> {
    let need = |key: &'static str| -> CliResult<f64> {
        let raw = map
            .get(key)
            .ok_or_else(|| CliError::Validation(format!("config is missing `{key}`")))?;
        parse_float(key, raw)
    };

    let sigma_z2 = match (map.get("sigma_z2"), map.get("snr")) {
        (Some(raw), None) => parse_float("sigma_z2", raw)?,
        (None, Some(raw)) => {
            let snr = parse_float("snr", raw)?;
            if !snr.is_finite() || snr <= 0.0 {
                return Err(CliError::Validation(format!(
                    "config key `snr`: must be positive and finite, got {snr}"
                )));
            }
            need("kappa")? / snr
        }
        (Some(_), Some(_)) => {
            return Err(CliError::Validation(
                "config sets both `sigma_z2` and `snr`; give exactly one".into(),
            ))
        }
        (None, None) => {
            return Err(CliError::Validation(
                "config is missing `sigma_z2` (or `snr`)".into(),
            ))
        }
    };

    let cfg = Config64 {
        delta: need("delta")?,
        kappa: need("kappa")?,
        eps2: need("eps2")?,
        sigma_z2,
        lambda1: need("lambda1")?,
        lambda2: need("lambda2")?,
        box_lo: need("l")?,
        box_hi: need("u")?,
        xi: need("xi")?,
    };
    cfg.validate().map_err(CliError::from)?;

    let prior = match map.get("prior.atoms") {
        Some(raw) => Prior64::new(parse_atoms(raw)?).map_err(CliError::from)?,
        None => Prior64::bernoulli(),
    };
    prior
        .check_within_box(cfg.box_lo, cfg.box_hi)
        .map_err(CliError::from)?;

    Ok(FileConfig { cfg, prior })
}

pub fn load_config(path: &std::path::Path) -> CliResult<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Validation(format!("cannot read config `{}`: {e}", path.display()))
    })?;
    parse_kv(&text)
}

/// Applies `--set key=value` overrides. Setting one of `sigma_z2`/`snr`
/// drops the other so the pair stays unambiguous.
pub fn apply_overrides(
    map: &mut BTreeMap<String, String>,
    sets: &[(String, String)],
) -> CliResult<()> {
    for (key, value) in sets {
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(CliError::Validation(format!("--set: unknown key `{key}`")));
        }
        if key == "sigma_z2" {
            map.remove("snr");
        }
        if key == "snr" {
            map.remove("sigma_z2");
        }
        map.insert(key.clone(), value.clone());
    }
    Ok(())
}

fn fmt_bound(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

/// Canonical full-precision rendering; parsing it back reproduces the same
/// configuration bit-for-bit. Embedded in run manifests.
pub fn render_config(cfg: &Config64, prior: &Prior64) -> String {
    let atoms: Vec<String> = prior
        .atoms()
        .iter()
        .map(|(v, p)| format!("({v}, {p})"))
        .collect();
    format!(
        "delta = {}\nkappa = {}\neps2 = {}\nsigma_z2 = {}\nlambda1 = {}\nlambda2 = {}\nl = {}\nu = {}\nxi = {}\nprior.atoms = [{}]\n",
        cfg.delta,
        cfg.kappa,
        cfg.eps2,
        cfg.sigma_z2,
        cfg.lambda1,
        cfg.lambda2,
        fmt_bound(cfg.box_lo),
        fmt_bound(cfg.box_hi),
        cfg.xi,
        atoms.join(", ")
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const REFERENCE: &str = "\
# reference regime
delta = 0.7
kappa = 0.1
eps2 = 0.1
snr = 0.5
lambda1 = 0.1
lambda2 = 0.5
l = 0
u = 1
xi = 1e-3
prior.atoms = [(1.0, 1.0)]
";

    #[test]
    fn parses_the_reference_config() {
        let map = parse_kv(REFERENCE).unwrap();
        let fc = build_config(&map).unwrap();
        assert_eq!(fc.cfg.delta, 0.7);
        assert!((fc.cfg.sigma_z2 - 0.2).abs() < 1e-15);
        assert_eq!(fc.prior.atoms(), &[(1.0, 1.0)]);
    }

    #[test]
    fn missing_lambda1_is_named() {
        let text = REFERENCE.replace("lambda1 = 0.1\n", "");
        let err = build_config(&parse_kv(&text).unwrap()).unwrap_err();
        assert!(err.message().contains("lambda1"), "{}", err.message());
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        assert!(parse_kv("wat = 3\n").is_err());
        assert!(parse_kv("delta = 1\ndelta = 2\n").is_err());
        let both = format!("{REFERENCE}sigma_z2 = 0.2\n");
        assert!(build_config(&parse_kv(&both).unwrap()).is_err());
    }

    #[test]
    fn infinite_bounds_round_trip() {
        let text = REFERENCE.replace("l = 0", "l = -inf").replace("u = 1", "u = inf");
        let fc = build_config(&parse_kv(&text).unwrap()).unwrap();
        assert_eq!(fc.cfg.box_lo, f64::NEG_INFINITY);
        assert_eq!(fc.cfg.box_hi, f64::INFINITY);
        let rendered = render_config(&fc.cfg, &fc.prior);
        let fc2 = build_config(&parse_kv(&rendered).unwrap()).unwrap();
        assert_eq!(fc.cfg, fc2.cfg);
    }

    #[test]
    fn render_parse_is_identity() {
        let fc = build_config(&parse_kv(REFERENCE).unwrap()).unwrap();
        let rendered = render_config(&fc.cfg, &fc.prior);
        let fc2 = build_config(&parse_kv(&rendered).unwrap()).unwrap();
        assert_eq!(fc.cfg, fc2.cfg);
        assert_eq!(fc.prior, fc2.prior);
    }

    #[test]
    fn overrides_replace_and_disambiguate() {
        let mut map = parse_kv(REFERENCE).unwrap();
        apply_overrides(
            &mut map,
            &[("sigma_z2".into(), "0.3".into()), ("lambda2".into(), "1.0".into())],
        )
        .unwrap();
        let fc = build_config(&map).unwrap();
        assert_eq!(fc.cfg.sigma_z2, 0.3);
        assert_eq!(fc.cfg.lambda2, 1.0);
        let mut map = parse_kv(REFERENCE).unwrap();
        assert!(apply_overrides(&mut map, &[("nope".into(), "1".into())]).is_err());
    }

    #[test]
    fn multi_atom_priors_parse() {
        let text = REFERENCE.replace(
            "prior.atoms = [(1.0, 1.0)]",
            "prior.atoms = [(1.0, 0.5), (0.5, 0.5)]",
        );
        let fc = build_config(&parse_kv(&text).unwrap()).unwrap();
        assert_eq!(fc.prior.atoms().len(), 2);
        // atom outside the box is rejected
        let text = REFERENCE.replace(
            "prior.atoms = [(1.0, 1.0)]",
            "prior.atoms = [(2.0, 1.0)]",
        );
        assert!(build_config(&parse_kv(&text).unwrap()).is_err());
    }
}
