//! Layered `key = value` settings: config file first, command-line flags on top.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use lrd_core::regularization::{parse_key_values, RegularizationConfig};
use lrd_core::restore::{Normalization, ReferenceSource, RestoreOptions};
use lrd_core::solver::SolveOptions;
use lrd_core::{LrdError, Result};

const REGULARIZATION_KEYS: &[&str] = &["gamma", "zeta", "alpha", "gamma_m", "zeta_m", "delta_m", "dc_policy"];

pub fn config_error(msg: impl Into<String>) -> LrdError {
    LrdError::Config(msg.into())
}

pub struct Settings {
    values: BTreeMap<String, String>,
    used: RefCell<BTreeSet<String>>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let values = match path {
            Some(p) => parse_key_values(&std::fs::read_to_string(p)?)?,
            None => BTreeMap::new(),
        };
        Ok(Self {
            values,
            used: RefCell::new(BTreeSet::new()),
        })
    }

    /// Overrides `key` when the flag was given.
    pub fn set<V: Display>(&mut self, key: &str, value: Option<V>) {
        if let Some(v) = value {
            self.values.insert(key.to_string(), v.to_string());
        }
    }

    pub fn set_list<V: Display>(&mut self, key: &str, value: &Option<Vec<V>>) {
        if let Some(list) = value {
            let text = list.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
            self.values.insert(key.to_string(), text);
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.used.borrow_mut().insert(key.to_string());
        self.values.get(key).map(String::as_str)
    }

    pub fn get<V: FromStr>(&self, key: &str) -> Result<Option<V>>
    where
        V::Err: Display,
    {
        self.raw(key)
            .map(|s| {
                s.parse::<V>()
                    .map_err(|e| config_error(format!("{key}: cannot parse '{s}': {e}")))
            })
            .transpose()
    }

    pub fn get_or<V: FromStr>(&self, key: &str, default: V) -> Result<V>
    where
        V::Err: Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn list<V: FromStr>(&self, key: &str) -> Result<Option<Vec<V>>>
    where
        V::Err: Display,
    {
        self.raw(key)
            .map(|s| {
                s.split(',')
                    .map(str::trim)
                    .filter(|p| !p.is_empty())
                    .map(|p| {
                        p.parse::<V>()
                            .map_err(|e| config_error(format!("{key}: cannot parse '{p}': {e}")))
                    })
                    .collect()
            })
            .transpose()
    }

    /// Applies every regularization key present onto `cfg`.
    pub fn apply_regularization(&self, cfg: &mut RegularizationConfig<f64>) -> Result<()> {
        for key in REGULARIZATION_KEYS {
            if let Some(v) = self.raw(key) {
                cfg.apply_key_value(key, v)?;
            }
        }
        Ok(())
    }

    pub fn solve_options(&self) -> Result<SolveOptions> {
        let d = SolveOptions::default();
        let opts = SolveOptions {
            max_outer_iters: self.get_or("iters", d.max_outer_iters)?,
            rel_tol: self.get_or("rel_tol", d.rel_tol)?,
            seed: self.get_or("seed", d.seed)?,
            imag_purge_tol: self.get_or("imag_purge_tol", d.imag_purge_tol)?,
            exploit_symmetry: self.get_or("exploit_symmetry", d.exploit_symmetry)?,
        };
        opts.validate()?;
        Ok(opts)
    }

    pub fn restore_options(&self) -> Result<RestoreOptions> {
        let normalization = match self.raw("normalization").unwrap_or("percentile") {
            "percentile" => {
                let d = Normalization::default();
                let Normalization::PercentileAffine { low, high } = d else {
                    unreachable!()
                };
                let low = self.get_or("low_quantile", low)?;
                let high = self.get_or("high_quantile", high)?;
                if !(0.0 <= low && low < high && high <= 1.0) {
                    return Err(config_error(format!(
                        "quantiles must satisfy 0 <= low < high <= 1, got {low}, {high}"
                    )));
                }
                Normalization::PercentileAffine { low, high }
            }
            "clip" => Normalization::Clip,
            "none" => Normalization::Identity,
            other => return Err(config_error(format!("unknown normalization '{other}'"))),
        };
        let reference = match self.raw("reference").unwrap_or("unit") {
            "unit" => ReferenceSource::Unit,
            "input" => ReferenceSource::Input,
            other => return Err(config_error(format!("unknown reference '{other}'"))),
        };
        Ok(RestoreOptions {
            solve: self.solve_options()?,
            normalization,
            reference,
            keep_components: false,
        })
    }

    /// Fails on keys that no part of the command looked at.
    pub fn reject_unknown(&self) -> Result<()> {
        let used = self.used.borrow();
        let unknown: Vec<&str> = self
            .values
            .keys()
            .filter(|k| !used.contains(*k))
            .map(String::as_str)
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(config_error(format!("unknown setting(s): {}", unknown.join(", "))))
        }
    }
}
