//! Flat `key = value` configuration with a fixed key set.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

/// (key, default, meaning). `auto` defaults are materialized against the domain in use.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("anneal.enabled", "false", "run simulated annealing after repair"),
    ("anneal.polish", "true", "finish with best-improvement swap scans"),
    ("anneal.steps", "20000", "Metropolis steps with linear cooling"),
    ("anneal.t0", "0.3", "initial temperature relative to the mean interface |dE|"),
    ("anneal.tail", "5000", "zero-temperature steps after cooling"),
    ("check.c0", "auto", "lower density c0 (auto: the proof constant)"),
    ("check.c1", "auto", "upper density c1 (auto: 1 - c0)"),
    ("check.lambdaPrime", "auto", "monotonicity constant (auto: the empirical value of each profile)"),
    ("check.points", "4", "boundary points audited by density and monotonicity"),
    ("check.suite", "all", "suite run by `check` when --suite is absent"),
    ("check.trials", "200", "random perturbations tried by the stability check"),
    ("constants.lambda", "0", "almost-minimality constant"),
    ("constants.r0", "auto", "almost-minimality scale (auto: L/4)"),
    ("constants.xi", "auto", "covering constant (auto: 2, 19, 87 for n = 1, 2, 3)"),
    ("domain.L", "1", "side length of the box or torus"),
    ("domain.cells", "64", "cells per axis"),
    ("domain.mode", "periodic", "periodic or free"),
    ("domain.n", "2", "dimension, 1 to 3"),
    ("domain.s", "0.5", "fractional order in (0, 1)"),
    ("kernel.latticeCutoff", "auto", "image shells summed in periodic mode (auto: smallest within tolerance)"),
    ("kernel.tailTolerance", "1e-6", "relative bound on the periodization tail"),
    ("output.dir", "run", "experiment directory when --out is absent"),
    ("seed", "0", "seed of every random choice"),
    ("solver.binarize", "true", "round the relaxed fields to labels"),
    ("solver.centers", "auto", "ball centers, points separated by ';' and coordinates by spaces (auto: spread along the first axis)"),
    ("solver.concavity", "1", "weight of the concave penalty"),
    ("solver.energyTol", "1e-9", "relative objective decrease that counts as converged"),
    ("solver.init", "balls", "balls or random"),
    ("solver.maxIters", "300", "projected-gradient iterations"),
    ("solver.repair", "true", "restore exact cell counts after binarization"),
    ("solver.repairBudget", "0.05", "largest correctable count error as a fraction of the target"),
    ("solver.repairConstant", "100", "constant of the repair energy certificate"),
    ("solver.step", "1", "initial step as a multiple of 1/max row sum"),
    ("solver.volumes", "0.1", "chamber volumes, space separated"),
];

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

fn known(key: &str) -> bool {
    KEYS.iter().any(|(k, _, _)| *k == key)
}

impl Config {
    pub fn defaults() -> Self {
        Config { values: KEYS.iter().map(|(k, v, _)| (k.to_string(), v.to_string())).collect() }
    }

    /// Defaults, then the file, then `key=value` overrides, later entries winning.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut cfg = Config::defaults();
        if let Some(p) = path {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))?;
            cfg.merge_text(&text)?;
        }
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| CliError::Usage(format!("--set expects key=value, got {o:?}")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    #[cfg(test)]
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = Config::defaults();
        cfg.merge_text(text)?;
        Ok(cfg)
    }

    fn merge_text(&mut self, text: &str) -> Result<(), CliError> {
        let mut seen = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", no + 1)))?;
            let k = k.trim();
            if seen.contains(&k) {
                return Err(CliError::Usage(format!("config line {}: duplicate key {k}", no + 1)));
            }
            seen.push(k);
            self.set(k, v.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        if !known(key) {
            return Err(CliError::Usage(format!("unknown config key {key:?}")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> &str {
        debug_assert!(known(key), "{key}");
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn is_auto(&self, key: &str) -> bool {
        self.get(key) == "auto"
    }

    pub fn parsed<V: FromStr>(&self, key: &str) -> Result<V, CliError>
    where
        V::Err: Display,
    {
        let raw = self.get(key);
        raw.parse().map_err(|e| CliError::Usage(format!("config {key} = {raw:?}: {e}")))
    }

    /// `None` for `auto`.
    pub fn optional<V: FromStr>(&self, key: &str) -> Result<Option<V>, CliError>
    where
        V::Err: Display,
    {
        if self.is_auto(key) {
            Ok(None)
        } else {
            self.parsed(key).map(Some)
        }
    }

    pub fn list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        parse_list(self.get(key)).map_err(|e| CliError::Usage(format!("config {key}: {e}")))
    }

    /// Canonical text: every key, sorted, one `key = value` line each.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# fracperim resolved configuration\n");
        for (k, v) in &self.values {
            out += &format!("{k} = {v}\n");
        }
        out
    }
}

pub fn parse_list(raw: &str) -> Result<Vec<f64>, String> {
    raw.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_are_sorted_and_unique() {
        assert!(KEYS.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn comments_blanks_and_overrides() {
        let cfg = Config::parse("# x\n\ndomain.n = 1\n  seed=7  \n").unwrap();
        assert_eq!(cfg.get("domain.n"), "1");
        assert_eq!(cfg.parsed::<u64>("seed").unwrap(), 7);
        assert_eq!(cfg.get("domain.s"), "0.5");
    }

    #[test]
    fn rejects_unknown_duplicate_and_malformed_lines() {
        assert!(Config::parse("domain.q = 1").is_err());
        assert!(Config::parse("seed = 1\nseed = 2").is_err());
        assert!(Config::parse("seed 1").is_err());
    }

    #[test]
    fn lists_accept_commas_and_spaces() {
        assert_eq!(parse_list("0.1, 0.2 0.3").unwrap(), vec![0.1, 0.2, 0.3]);
        assert!(parse_list("0.1 x").is_err());
    }
}
