//! Regularization weights and the objective breakdown.
//!
//! The restoration objective is
//!
//! ```text
//! 1/2 ||U - S||^2 + gamma/2 ||U||_TV^2 + zeta/2 ||U||_TI^2 + ridge
//! ```
//!
//! with `U = sum_m D_m * [[X_m]]`. When per-filter weights are present the
//! TV and TI terms are taken per filter instead,
//! `sum_m gamma_m/2 ||U_m||_TV^2 + zeta_m/2 ||U_m||_TI^2`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{LrdError, Result};
use crate::spectral::DcPolicy;
use crate::Scalar;

/// Ridge weight used by both application presets.
pub const DEFAULT_ALPHA: f64 = 1e-16;

#[derive(Clone, Debug, PartialEq)]
pub struct PerFilterWeights<T> {
    pub gamma: Vec<T>,
    pub zeta: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegularizationConfig<T> {
    /// Squared-TV weight.
    pub gamma: T,
    /// Squared-antiderivative weight.
    pub zeta: T,
    /// Ridge weight on the factor spectra; must be strictly positive.
    pub alpha: T,
    /// Per-filter `(gamma_m, zeta_m)`; switches TV/TI to the per-filter form.
    pub per_filter: Option<PerFilterWeights<T>>,
    /// Reconstruction gains used by detail enhancement.
    pub delta: Option<Vec<T>>,
    pub dc_policy: DcPolicy<T>,
}

fn check_weight<T: Scalar>(name: &str, v: T) -> Result<()> {
    if !v.is_finite() || v < T::zero() {
        return Err(LrdError::config(format!("{name} must be finite and >= 0, got {v}")));
    }
    Ok(())
}

fn check_list<T: Scalar>(name: &str, list: &[T], filters: Option<usize>) -> Result<()> {
    if let Some(m) = filters {
        if list.len() != m {
            return Err(LrdError::config(format!(
                "{name} has {} entries for {m} filters",
                list.len()
            )));
        }
    }
    for (m, &v) in list.iter().enumerate() {
        check_weight(&format!("{name}[{m}]"), v)?;
    }
    Ok(())
}

impl<T: Scalar> Default for RegularizationConfig<T> {
    fn default() -> Self {
        Self {
            gamma: T::zero(),
            zeta: T::zero(),
            alpha: T::of(DEFAULT_ALPHA),
            per_filter: None,
            delta: None,
            dc_policy: DcPolicy::Zero,
        }
    }
}

impl<T: Scalar> RegularizationConfig<T> {
    /// Checks all invariants; `filters` additionally pins list lengths.
    pub fn validate(&self, filters: Option<usize>) -> Result<()> {
        check_weight("gamma", self.gamma)?;
        check_weight("zeta", self.zeta)?;
        if !self.alpha.is_finite() || self.alpha <= T::zero() {
            return Err(LrdError::config(format!(
                "alpha must be finite and > 0, got {}",
                self.alpha
            )));
        }
        if let Some(pf) = &self.per_filter {
            if pf.gamma.len() != pf.zeta.len() {
                return Err(LrdError::config("gamma_m and zeta_m differ in length"));
            }
            check_list("gamma_m", &pf.gamma, filters)?;
            check_list("zeta_m", &pf.zeta, filters)?;
        }
        if let Some(d) = &self.delta {
            check_list("delta_m", d, filters)?;
        }
        if let DcPolicy::Epsilon(eps) = self.dc_policy {
            if !eps.is_finite() || eps <= T::zero() {
                return Err(LrdError::config("dc epsilon must be finite and > 0"));
            }
        }
        Ok(())
    }

    pub fn is_per_filter(&self) -> bool {
        self.per_filter.is_some()
    }

    /// `(gamma_m, zeta_m)` for filter `m` (the global pair when not per-filter).
    pub fn filter_weights(&self, m: usize) -> (T, T) {
        match &self.per_filter {
            Some(pf) => (pf.gamma[m], pf.zeta[m]),
            None => (self.gamma, self.zeta),
        }
    }

    /// Sets `delta_m = delta` for the first `split` filters and 0 after.
    pub fn with_split_delta(mut self, filters: usize, delta: T, split: usize) -> Result<Self> {
        check_split(filters, split)?;
        check_weight("delta", delta)?;
        self.delta = Some(
            (0..filters)
                .map(|m| if m < split { delta } else { T::zero() })
                .collect(),
        );
        Ok(self)
    }

    /// Flat `key = value` text; round-trips through [`Self::from_text`].
    pub fn to_text(&self) -> String {
        let list = |v: &[T]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let _ = writeln!(s, "gamma = {:e}", self.gamma);
        let _ = writeln!(s, "zeta = {:e}", self.zeta);
        let _ = writeln!(s, "alpha = {:e}", self.alpha);
        if let Some(pf) = &self.per_filter {
            let _ = writeln!(s, "gamma_m = {}", list(&pf.gamma));
            let _ = writeln!(s, "zeta_m = {}", list(&pf.zeta));
        }
        if let Some(d) = &self.delta {
            let _ = writeln!(s, "delta_m = {}", list(d));
        }
        match self.dc_policy {
            DcPolicy::Zero => s.push_str("dc_policy = zero\n"),
            DcPolicy::Epsilon(e) => {
                let _ = writeln!(s, "dc_policy = epsilon:{e:e}");
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let map = parse_key_values(text)?;
        let mut cfg = Self::default();
        for (k, v) in &map {
            if !cfg.apply_key_value(k, v)? {
                return Err(LrdError::config(format!("unknown key '{k}'")));
            }
        }
        cfg.validate(None)?;
        Ok(cfg)
    }

    /// Applies one setting; returns `Ok(false)` for keys this type does not own.
    pub fn apply_key_value(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "gamma" => self.gamma = parse_scalar(key, value)?,
            "zeta" => self.zeta = parse_scalar(key, value)?,
            "alpha" => self.alpha = parse_scalar(key, value)?,
            "gamma_m" | "zeta_m" => {
                let list = parse_list(key, value)?;
                let pf = self.per_filter.get_or_insert_with(|| PerFilterWeights {
                    gamma: Vec::new(),
                    zeta: Vec::new(),
                });
                if key == "gamma_m" {
                    pf.gamma = list;
                } else {
                    pf.zeta = list;
                }
            }
            "delta_m" => self.delta = Some(parse_list(key, value)?),
            "dc_policy" => self.dc_policy = parse_dc_policy(value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

fn check_split(filters: usize, split: usize) -> Result<()> {
    if split == 0 || split > filters {
        return Err(LrdError::config(format!("split {split} must lie in 1..={filters}")));
    }
    Ok(())
}

/// Denoising configuration: global squared TV, no antiderivative term.
pub fn denoise_preset<T: Scalar>(gamma: T, alpha: T) -> Result<RegularizationConfig<T>> {
    let cfg = RegularizationConfig {
        gamma,
        alpha,
        ..Default::default()
    };
    cfg.validate(None)?;
    Ok(cfg)
}

/// Detail-enhancement configuration: the first `split` filters carry the
/// antiderivative penalty `zeta`, the remaining ones the TV penalty `gamma`.
pub fn enhance_preset<T: Scalar>(filters: usize, gamma: T, zeta: T, split: usize) -> Result<RegularizationConfig<T>> {
    check_split(filters, split)?;
    let cfg = RegularizationConfig {
        gamma,
        zeta,
        per_filter: Some(PerFilterWeights {
            gamma: (0..filters)
                .map(|m| if m < split { T::zero() } else { gamma })
                .collect(),
            zeta: (0..filters).map(|m| if m < split { zeta } else { T::zero() }).collect(),
        }),
        ..Default::default()
    };
    cfg.validate(Some(filters))?;
    Ok(cfg)
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(LrdError::config(format!("line {}: expected 'key = value'", lineno + 1)));
        };
        let key = k.trim();
        if key.is_empty() {
            return Err(LrdError::config(format!("line {}: empty key", lineno + 1)));
        }
        if map.insert(key.to_string(), v.trim().to_string()).is_some() {
            return Err(LrdError::config(format!("line {}: duplicate key '{key}'", lineno + 1)));
        }
    }
    Ok(map)
}

fn parse_scalar<T: Scalar>(key: &str, value: &str) -> Result<T> {
    value
        .parse::<f64>()
        .map(T::of)
        .map_err(|e| LrdError::config(format!("{key}: cannot parse '{value}': {e}")))
}

fn parse_list<T: Scalar>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_scalar(key, s))
        .collect()
}

fn parse_dc_policy<T: Scalar>(value: &str) -> Result<DcPolicy<T>> {
    match value.split_once(':') {
        None if value == "zero" => Ok(DcPolicy::Zero),
        Some(("epsilon", eps)) => Ok(DcPolicy::Epsilon(parse_scalar("dc_policy", eps)?)),
        _ => Err(LrdError::config(format!("unknown dc_policy '{value}'"))),
    }
}

/// The four objective terms on the spatial-domain scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveBreakdown<T> {
    pub data: T,
    pub tv: T,
    pub ti: T,
    pub ridge: T,
    pub total: T,
}

impl<T: Scalar> ObjectiveBreakdown<T> {
    pub fn new(data: T, tv: T, ti: T, ridge: T) -> Self {
        Self {
            data,
            tv,
            ti,
            ridge,
            total: data + tv + ti + ridge,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.data, self.tv, self.ti, self.ridge, self.total]
            .iter()
            .all(|v| v.is_finite())
    }
}
