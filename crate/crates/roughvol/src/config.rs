//! Flat key-value configuration files and the small value grammars
//! (ψ specs, payoff specs, level lists) shared by the config parser and the
//! CLI flags.
//!
//! File format: one `key = value` per line, `#` comments, blank lines
//! ignored, later keys override earlier ones. Recognized keys:
//! `H, T, log2_n_ref, log2_n_list, M, seed, psi, payoffs, out, mem_budget_mb`.
//! Unknown keys are rejected so typos cannot silently fall back to defaults.

use crate::error::{Result, RoughVolError};
use crate::experiment::RunConfig;
use crate::payoff::Payoff;
use crate::real::Real;
use crate::scheme::PsiSpec;
use std::path::{Path, PathBuf};

pub const CONFIG_KEYS: [&str; 10] = [
    "H",
    "T",
    "log2_n_ref",
    "log2_n_list",
    "M",
    "seed",
    "psi",
    "payoffs",
    "out",
    "mem_budget_mb",
];

fn bad(msg: String) -> RoughVolError {
    RoughVolError::InvalidConfig(msg)
}

fn parse_f64_as<T: Real>(s: &str, what: &str) -> Result<T> {
    s.trim()
        .parse::<f64>()
        .map(T::lit)
        .map_err(|_| bad(format!("{what}: expected a number, got `{s}`")))
}

fn parse_usize(s: &str, what: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| bad(format!("{what}: expected a non-negative integer, got `{s}`")))
}

/// Comma-separated real list, e.g. `0.05,0.15`.
pub fn parse_real_list<T: Real>(s: &str, what: &str) -> Result<Vec<T>> {
    let vals: Result<Vec<T>> = s
        .split(',')
        .map(|tok| parse_f64_as(tok, what))
        .collect();
    let vals = vals?;
    if vals.is_empty() {
        return Err(bad(format!("{what}: empty list")));
    }
    Ok(vals)
}

/// Level list grammar: `1,2,3` or an inclusive range `1..6`.
pub fn parse_log2_list(s: &str) -> Result<Vec<u32>> {
    let s = s.trim();
    if let Some((lo, hi)) = s.split_once("..") {
        let lo: u32 = lo
            .trim()
            .parse()
            .map_err(|_| bad(format!("log2_n_list range start: `{lo}`")))?;
        let hi: u32 = hi
            .trim()
            .parse()
            .map_err(|_| bad(format!("log2_n_list range end: `{hi}`")))?;
        if lo > hi {
            return Err(bad(format!("log2_n_list range {lo}..{hi} is empty")));
        }
        return Ok((lo..=hi).collect());
    }
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse()
                .map_err(|_| bad(format!("log2_n_list entry: `{tok}`")))
        })
        .collect()
}

/// ψ grammar: `linear` or `rbergomi:<xi>,<eta>`.
pub fn parse_psi<T: Real>(s: &str) -> Result<PsiSpec<T>> {
    let s = s.trim();
    if s == "linear" {
        return Ok(PsiSpec::Linear);
    }
    if let Some(args) = s.strip_prefix("rbergomi:") {
        let parts: Vec<&str> = args.split(',').collect();
        if parts.len() != 2 {
            return Err(bad(format!(
                "psi `rbergomi` takes xi,eta — got `{args}`"
            )));
        }
        let xi: T = parse_f64_as(parts[0], "rbergomi xi")?;
        let eta: T = parse_f64_as(parts[1], "rbergomi eta")?;
        if xi < T::zero() {
            return Err(bad(format!(
                "rbergomi xi must be non-negative, got {}",
                xi.as_f64()
            )));
        }
        return Ok(PsiSpec::RBergomi { xi, eta });
    }
    Err(bad(format!(
        "unknown psi `{s}` (expected `linear` or `rbergomi:<xi>,<eta>`)"
    )))
}

/// Payoff grammar: `square | cube | heaviside | shifted_cube:<c> |
/// poly:<c0,c1,...> | call:<strike>`.
pub fn parse_payoff<T: Real>(s: &str) -> Result<Payoff<T>> {
    let s = s.trim();
    match s {
        "square" => return Ok(Payoff::Square),
        "cube" => return Ok(Payoff::Cube),
        "heaviside" => return Ok(Payoff::Heaviside),
        _ => {}
    }
    if let Some(arg) = s.strip_prefix("shifted_cube:") {
        return Ok(Payoff::ShiftedCube {
            shift: parse_f64_as(arg, "shifted_cube shift")?,
        });
    }
    if let Some(args) = s.strip_prefix("poly:") {
        let coeffs = parse_real_list(args, "poly coefficients")?;
        return Ok(Payoff::Polynomial { coeffs });
    }
    if let Some(arg) = s.strip_prefix("call:") {
        let strike: T = parse_f64_as(arg, "call strike")?;
        if !(strike > T::zero()) {
            return Err(bad(format!(
                "call strike must be positive, got {}",
                strike.as_f64()
            )));
        }
        return Ok(Payoff::Call { strike });
    }
    Err(bad(format!("unknown payoff `{s}`")))
}

/// Payoff lists separate entries with `;` or whitespace (payoff parameters
/// already use `,`): `square; shifted_cube:1.5; poly:0,0,1`.
pub fn parse_payoff_list<T: Real>(s: &str) -> Result<Vec<Payoff<T>>> {
    let toks: Vec<&str> = s
        .split(|c: char| c == ';' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .collect();
    if toks.is_empty() {
        return Err(bad("payoff list is empty".into()));
    }
    toks.into_iter().map(parse_payoff).collect()
}

/// Apply one `key = value` pair to a config. Used by both the file loader
/// and CLI flag overrides so the two stay in lockstep.
pub fn apply_key<T: Real>(config: &mut RunConfig<T>, key: &str, value: &str) -> Result<()> {
    match key {
        "H" => config.h_list = parse_real_list(value, "H")?,
        "T" => config.horizon = parse_f64_as(value, "T")?,
        "log2_n_ref" => {
            config.log2_n_ref = parse_usize(value, "log2_n_ref")? as u32;
        }
        "log2_n_list" => config.log2_n_list = parse_log2_list(value)?,
        "M" => config.m = parse_usize(value, "M")?,
        "seed" => {
            config.seed = value
                .trim()
                .parse()
                .map_err(|_| bad(format!("seed: expected an integer, got `{value}`")))?;
        }
        "psi" => config.psi = parse_psi(value)?,
        "payoffs" => config.payoffs = parse_payoff_list(value)?,
        "out" => {
            config.out = if value.trim() == "-" {
                None
            } else {
                Some(PathBuf::from(value.trim()))
            };
        }
        "mem_budget_mb" => config.mem_budget_mb = parse_usize(value, "mem_budget_mb")?,
        _ => {
            return Err(bad(format!(
                "unknown config key `{key}` (known keys: {})",
                CONFIG_KEYS.join(", ")
            )));
        }
    }
    Ok(())
}

/// Parse a config document into (key, value) pairs, rejecting malformed
/// lines with their line number.
pub fn parse_kv_text(text: &str, origin: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(RoughVolError::Parse {
                path: origin.to_string(),
                line: idx + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            });
        };
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

/// Load a config file on top of `base` (typically `RunConfig::default()`).
pub fn load_config_file<T: Real>(path: &Path, base: RunConfig<T>) -> Result<RunConfig<T>> {
    let text = std::fs::read_to_string(path).map_err(|source| RoughVolError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut config = base;
    for (key, value) in parse_kv_text(&text, &path.display().to_string())? {
        apply_key(&mut config, &key, &value)?;
    }
    Ok(config)
}
