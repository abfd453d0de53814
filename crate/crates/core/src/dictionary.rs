//! Convolutional filter banks: file I/O and fixed analytic banks.
//!
//! Banks are stored as one stacked `.nt` tensor of shape `[M, L_1, .., L_N]`.

use std::fmt;
use std::path::{Path, PathBuf};

use crate::error::{LrdError, Result};
use crate::io::nt;
use crate::tensor::{validate_shape, DenseTensor};
use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BuiltinKind {
    /// Separable DCT-II atoms ordered by total frequency.
    Dct,
    /// Centered delta plus one forward difference per axis.
    Gradient,
    /// A single centered delta.
    Identity,
}

impl fmt::Display for BuiltinKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BuiltinKind::Dct => "dct",
            BuiltinKind::Gradient => "gradient",
            BuiltinKind::Identity => "identity",
        })
    }
}

impl std::str::FromStr for BuiltinKind {
    type Err = LrdError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dct" => Ok(BuiltinKind::Dct),
            "gradient" => Ok(BuiltinKind::Gradient),
            "identity" => Ok(BuiltinKind::Identity),
            other => Err(LrdError::config(format!("unknown dictionary kind '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DictionarySource {
    File(PathBuf),
    Builtin(BuiltinKind),
    InMemory,
}

/// `M` filters of common support.
#[derive(Clone, Debug, PartialEq)]
pub struct Dictionary<T> {
    filters: Vec<DenseTensor<T>>,
    name: String,
    source: DictionarySource,
}

impl<T: Scalar> Dictionary<T> {
    pub fn new(filters: Vec<DenseTensor<T>>, name: impl Into<String>, source: DictionarySource) -> Result<Self> {
        let Some(first) = filters.first() else {
            return Err(LrdError::domain("a dictionary needs at least one filter"));
        };
        let support = first.shape().to_vec();
        for (m, f) in filters.iter().enumerate() {
            if f.shape() != support.as_slice() {
                return Err(LrdError::domain(format!(
                    "filter {m} has support {:?}, expected {support:?}",
                    f.shape()
                )));
            }
            if f.data().iter().all(|&v| v == T::zero()) {
                return Err(LrdError::format(format!("filter {m} is all zeros")));
            }
            if f.data().iter().any(|v| !v.is_finite()) {
                return Err(LrdError::format(format!("filter {m} has non-finite entries")));
            }
        }
        Ok(Self {
            filters,
            name: name.into(),
            source,
        })
    }

    pub fn from_filters(filters: Vec<DenseTensor<T>>) -> Result<Self> {
        Self::new(filters, "custom", DictionarySource::InMemory)
    }

    pub fn filters(&self) -> &[DenseTensor<T>] {
        &self.filters
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    pub fn support(&self) -> &[usize] {
        self.filters[0].shape()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn source(&self) -> &DictionarySource {
        &self.source
    }

    /// Copy with every filter scaled to unit Frobenius norm.
    pub fn normalized(&self) -> Self {
        let filters = self
            .filters
            .iter()
            .map(|f| {
                let inv = T::one() / f.norm_sq().sqrt();
                f.map(|v| v * inv)
            })
            .collect();
        Self {
            filters,
            name: self.name.clone(),
            source: self.source.clone(),
        }
    }

    /// Stacked `[M, L_1, .., L_N]` tensor.
    pub fn to_stacked(&self) -> DenseTensor<T> {
        let mut shape = vec![self.len()];
        shape.extend_from_slice(self.support());
        let data = self.filters.iter().flat_map(|f| f.data().iter().copied()).collect();
        DenseTensor::new(shape, data).expect("consistent filter shapes")
    }

    pub fn from_stacked(stacked: &DenseTensor<T>, name: impl Into<String>, source: DictionarySource) -> Result<Self> {
        let shape = stacked.shape();
        if shape.len() < 2 {
            return Err(LrdError::format(format!(
                "stacked bank needs order >= 2, got shape {shape:?}"
            )));
        }
        let support = shape[1..].to_vec();
        let size: usize = support.iter().product();
        let filters = stacked
            .data()
            .chunks_exact(size)
            .map(|c| DenseTensor::new(support.clone(), c.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(filters, name, source)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        nt::save_real(path, &self.to_stacked())
    }
}

pub fn load_bank<T: Scalar>(path: impl AsRef<Path>) -> Result<Dictionary<T>> {
    let path = path.as_ref();
    let stacked = nt::load_real::<T>(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "bank".into());
    Dictionary::from_stacked(&stacked, name, DictionarySource::File(path.to_path_buf()))
}

pub fn save_bank<T: Scalar>(d: &Dictionary<T>, path: impl AsRef<Path>) -> Result<()> {
    d.save(path)
}

fn centered_delta<T: Scalar>(support: &[usize]) -> Result<DenseTensor<T>> {
    let center: Vec<usize> = support.iter().map(|&l| l / 2).collect();
    DenseTensor::from_fn(
        support,
        |idx| if idx == center.as_slice() { T::one() } else { T::zero() },
    )
}

fn dct_bank<T: Scalar>(support: &[usize], count: usize) -> Result<Vec<DenseTensor<T>>> {
    let total: usize = support.iter().product();
    if count > total {
        return Err(LrdError::domain(format!(
            "support {support:?} has only {total} DCT atoms, {count} requested"
        )));
    }
    let mut freqs: Vec<Vec<usize>> = Vec::with_capacity(total);
    let mut k = vec![0usize; support.len()];
    for _ in 0..total {
        freqs.push(k.clone());
        crate::tensor::increment_index(&mut k, support);
    }
    freqs.sort_by_key(|k| (k.iter().sum::<usize>(), k.clone()));
    freqs
        .into_iter()
        .take(count)
        .map(|k| {
            DenseTensor::from_fn(support, |l| {
                let v: f64 = (0..support.len())
                    .map(|d| {
                        let arg = std::f64::consts::PI * (2 * l[d] + 1) as f64 * k[d] as f64 / (2 * support[d]) as f64;
                        arg.cos()
                    })
                    .product();
                T::of(v)
            })
        })
        .collect()
}

fn gradient_bank<T: Scalar>(support: &[usize], count: usize) -> Result<Vec<DenseTensor<T>>> {
    let available = support.len() + 1;
    if count > available {
        return Err(LrdError::domain(format!(
            "gradient bank has {available} filters in {} dimensions, {count} requested",
            support.len()
        )));
    }
    if let Some(d) = support.iter().position(|&l| l < 2) {
        return Err(LrdError::domain(format!(
            "gradient filters need support >= 2 along every axis (axis {d} has {})",
            support[d]
        )));
    }
    let mut bank = vec![centered_delta(support)?];
    let center: Vec<usize> = support.iter().map(|&l| l / 2).collect();
    for d in 0..support.len() {
        // forward difference u(x + e_d) - u(x): +1 at offset -1, -1 at offset 0
        let mut f = DenseTensor::zeros(support)?;
        f.set(&center, -T::one());
        let mut prev = center.clone();
        prev[d] -= 1;
        f.set(&prev, T::one());
        bank.push(f);
    }
    bank.truncate(count);
    Ok(bank)
}

/// Deterministic analytic bank of `count` filters with the given support.
pub fn builtin_bank<T: Scalar>(kind: BuiltinKind, support: &[usize], count: usize) -> Result<Dictionary<T>> {
    validate_shape(support)?;
    if count == 0 {
        return Err(LrdError::domain("a dictionary needs at least one filter"));
    }
    let filters = match kind {
        BuiltinKind::Dct => dct_bank(support, count)?,
        BuiltinKind::Gradient => gradient_bank(support, count)?,
        BuiltinKind::Identity => {
            if count != 1 {
                return Err(LrdError::domain("the identity bank has exactly one filter"));
            }
            vec![centered_delta(support)?]
        }
    };
    let dims: Vec<String> = support.iter().map(usize::to_string).collect();
    Dictionary::new(
        filters,
        format!("{kind}-{}-{count}", dims.join("x")),
        DictionarySource::Builtin(kind),
    )
}
