use ndarray::Array2;

use super::unfold::mode_n_fold;
use super::{Element, Tensor};
use crate::error::{LrdError, Result};

/// Per-mode factor matrices of a rank-`R` CP (Kruskal) tensor.
///
/// `factors[n]` is `I_n x R`. The optional `weights` scale each rank-one
/// component; the solver always uses unit weights.
#[derive(Clone, Debug, PartialEq)]
pub struct KruskalFactors<E> {
    factors: Vec<Array2<E>>,
    weights: Option<Vec<E>>,
}

impl<E: Element> KruskalFactors<E> {
    pub fn new(factors: Vec<Array2<E>>) -> Result<Self> {
        Self::with_weights(factors, None)
    }

    pub fn with_weights(factors: Vec<Array2<E>>, weights: Option<Vec<E>>) -> Result<Self> {
        let Some(first) = factors.first() else {
            return Err(LrdError::domain("Kruskal factors need at least one mode"));
        };
        let rank = first.ncols();
        if rank == 0 {
            return Err(LrdError::domain("Kruskal rank must be at least 1"));
        }
        for (n, f) in factors.iter().enumerate() {
            if f.ncols() != rank {
                return Err(LrdError::domain(format!(
                    "factor {n} has {} columns, expected {rank}",
                    f.ncols()
                )));
            }
            if f.nrows() == 0 {
                return Err(LrdError::domain(format!("factor {n} has no rows")));
            }
        }
        if let Some(w) = &weights {
            if w.len() != rank {
                return Err(LrdError::domain(format!("{} weights for rank {rank}", w.len())));
            }
        }
        Ok(Self { factors, weights })
    }

    pub fn rank(&self) -> usize {
        self.factors[0].ncols()
    }

    pub fn ndim(&self) -> usize {
        self.factors.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.nrows()).collect()
    }

    pub fn factors(&self) -> &[Array2<E>] {
        &self.factors
    }

    pub fn factor(&self, n: usize) -> &Array2<E> {
        &self.factors[n]
    }

    pub fn factor_mut(&mut self, n: usize) -> &mut Array2<E> {
        &mut self.factors[n]
    }

    pub fn weights(&self) -> Option<&[E]> {
        self.weights.as_deref()
    }

    pub fn into_factors(self) -> Vec<Array2<E>> {
        self.factors
    }

    /// Concatenates the rank columns of two factor sets with equal shape.
    pub fn concat_rank(&self, other: &Self) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(LrdError::domain("cannot concatenate factors of different shapes"));
        }
        let factors = self
            .factors
            .iter()
            .zip(&other.factors)
            .map(|(a, b)| ndarray::concatenate(ndarray::Axis(1), &[a.view(), b.view()]).unwrap())
            .collect();
        let weights = match (&self.weights, &other.weights) {
            (None, None) => None,
            _ => {
                let mut w = self.weights.clone().unwrap_or(vec![E::one(); self.rank()]);
                w.extend(other.weights.clone().unwrap_or(vec![E::one(); other.rank()]));
                Some(w)
            }
        };
        Self::with_weights(factors, weights)
    }
}

/// Khatri-Rao (column-wise Kronecker) product of the matrices in list order.
///
/// Row index of the result: the last matrix's row index varies fastest.
pub fn khatri_rao<E: Element>(mats: &[&Array2<E>]) -> Result<Array2<E>> {
    let Some(first) = mats.first() else {
        return Err(LrdError::domain("Khatri-Rao product of an empty list"));
    };
    let rank = first.ncols();
    if let Some(bad) = mats.iter().position(|m| m.ncols() != rank) {
        return Err(LrdError::domain(format!(
            "matrix {bad} has {} columns, expected {rank}",
            mats[bad].ncols()
        )));
    }
    let mut acc: Array2<E> = (*first).clone();
    for m in &mats[1..] {
        let (ra, rb) = (acc.nrows(), m.nrows());
        let mut next = Array2::<E>::zeros((ra * rb, rank));
        for a in 0..ra {
            for b in 0..rb {
                for r in 0..rank {
                    next[[a * rb + b, r]] = acc[[a, r]] * m[[b, r]];
                }
            }
        }
        acc = next;
    }
    Ok(acc)
}

/// `X^(N-1) ⊙ .. ⊙ X^(n+1) ⊙ X^(n-1) ⊙ .. ⊙ X^(0)`: rows are indexed by the
/// mode-`n` unfolding's column index. An order-1 tensor yields a `1 x R`
/// row of ones.
pub fn complement_khatri_rao<E: Element>(factors: &[Array2<E>], n: usize) -> Result<Array2<E>> {
    if n >= factors.len() {
        return Err(LrdError::domain(format!(
            "mode {n} out of range for {} factors",
            factors.len()
        )));
    }
    let mats: Vec<&Array2<E>> = (0..factors.len())
        .rev()
        .filter(|&k| k != n)
        .map(|k| &factors[k])
        .collect();
    if mats.is_empty() {
        return Ok(Array2::from_elem((1, factors[n].ncols()), E::one()));
    }
    khatri_rao(&mats)
}

/// Dense reconstruction `sum_r mu_r v_r^(1) ∘ .. ∘ v_r^(N)`, computed as the
/// mode-0 unfolding `X^(0) diag(mu) Q^(0)^T` followed by folding.
pub fn kruskal_reconstruct<E: Element>(f: &KruskalFactors<E>) -> Tensor<E> {
    let q = complement_khatri_rao(f.factors(), 0).expect("validated factors");
    let mut x0 = f.factor(0).clone();
    if let Some(w) = f.weights() {
        for (mut col, &mu) in x0.columns_mut().into_iter().zip(w) {
            col.mapv_inplace(|v| v * mu);
        }
    }
    let unfolded = x0.dot(&q.t());
    mode_n_fold(&unfolded, 0, &f.shape()).expect("consistent shapes")
}

/// The matrix `[Q^(n) ⊗ I_{I_n}]` mapping `vec(X^(n))` to the column-stacked
/// mode-`n` unfolding of the reconstruction. Size `(Λ I_n) x (R I_n)`.
///
/// Materialized densely; meant for verification on small instances.
pub fn kruskal_vec_operator<E: Element>(f: &KruskalFactors<E>, n: usize) -> Result<Array2<E>> {
    let q = complement_khatri_rao(f.factors(), n)?;
    let i_n = f.factor(n).nrows();
    let (lambda, rank) = q.dim();
    let mut op = Array2::<E>::zeros((lambda * i_n, rank * i_n));
    for j in 0..lambda {
        for r in 0..rank {
            let v = q[[j, r]];
            for i in 0..i_n {
                op[[j * i_n + i, r * i_n + i]] = v;
            }
        }
    }
    Ok(op)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::mode_n_matricize;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_factors(shape: &[usize], rank: usize, rng: &mut ChaCha8Rng) -> KruskalFactors<f64> {
        KruskalFactors::new(
            shape
                .iter()
                .map(|&i| Array2::from_shape_fn((i, rank), |_| rng.gen_range(-1.0..1.0)))
                .collect(),
        )
        .unwrap()
    }

    /// Sum of outer products, straight from the definition.
    fn naive_reconstruct(f: &KruskalFactors<f64>) -> Tensor<f64> {
        Tensor::from_fn(&f.shape(), |idx| {
            (0..f.rank())
                .map(|r| {
                    let mu = f.weights().map_or(1.0, |w| w[r]);
                    idx.iter()
                        .enumerate()
                        .fold(mu, |acc, (n, &i)| acc * f.factor(n)[[i, r]])
                })
                .sum()
        })
        .unwrap()
    }

    #[test]
    fn khatri_rao_small() {
        let a = array![[1.0], [2.0]];
        let b = array![[3.0], [4.0]];
        assert_eq!(khatri_rao(&[&a, &b]).unwrap(), array![[3.0], [4.0], [6.0], [8.0]]);
        assert_eq!(khatri_rao(&[&a]).unwrap(), a);
        let c = array![[1.0, 2.0]];
        assert!(khatri_rao(&[&a, &c]).is_err());
    }

    #[test]
    fn rank_one_outer_product() {
        let f = KruskalFactors::new(vec![array![[1.0], [2.0]], array![[3.0], [4.0]]]).unwrap();
        assert_eq!(kruskal_reconstruct(&f).data(), &[3.0, 4.0, 6.0, 8.0]);
        let g = KruskalFactors::new(vec![array![[1.0, 0.0], [2.0, 0.0]], array![[3.0, 0.0], [4.0, 0.0]]]).unwrap();
        assert_eq!(kruskal_reconstruct(&g), kruskal_reconstruct(&f));
    }

    #[test]
    fn matches_naive_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_factors(&[4, 3, 2], 3, &mut rng);
        let fast = kruskal_reconstruct(&f);
        let slow = naive_reconstruct(&f);
        assert!(fast.max_abs_diff(&slow) < 1e-12);

        let w = KruskalFactors::with_weights(f.factors().to_vec(), Some(vec![0.5, -2.0, 3.0])).unwrap();
        assert!(kruskal_reconstruct(&w).max_abs_diff(&naive_reconstruct(&w)) < 1e-12);
    }

    #[test]
    fn unfolding_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = random_factors(&[3, 2, 2], 2, &mut rng);
        let dense = naive_reconstruct(&f);
        for n in 0..3 {
            let q = complement_khatri_rao(f.factors(), n).unwrap();
            let lhs = mode_n_matricize(&dense, n).unwrap();
            let rhs = f.factor(n).dot(&q.t());
            assert!((&lhs - &rhs).iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn vec_operator_special_cases() {
        let f = KruskalFactors::new(vec![array![[1.0], [2.0]], array![[1.0], [1.0], [1.0]]]).unwrap();
        let op = kruskal_vec_operator(&f, 0).unwrap();
        assert_eq!(op.dim(), (6, 2));
        for j in 0..3 {
            assert_eq!(op[[2 * j, 0]], 1.0);
            assert_eq!(op[[2 * j + 1, 1]], 1.0);
            assert_eq!(op[[2 * j, 1]], 0.0);
        }
        let g = KruskalFactors::new(vec![
            array![[1.0, 2.0], [3.0, 4.0]],
            array![[5.0, 6.0], [7.0, 8.0], [9.0, 1.0]],
        ])
        .unwrap();
        assert_eq!(complement_khatri_rao(g.factors(), 0).unwrap(), *g.factor(1));
    }

    #[test]
    fn vec_operator_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random_factors(&[3, 2, 2], 2, &mut rng);
        let dense = naive_reconstruct(&f);
        for n in 0..3 {
            let op = kruskal_vec_operator(&f, n).unwrap();
            let x = f.factor(n);
            // column-stacked vec(X^(n))
            let xv: Vec<f64> = x.t().iter().copied().collect();
            let y = op.dot(&ndarray::Array1::from(xv));
            let unfolded = mode_n_matricize(&dense, n).unwrap();
            let want: Vec<f64> = unfolded.t().iter().copied().collect();
            for (a, b) in y.iter().zip(&want) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn multilinear_in_first_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = random_factors(&[3, 4], 2, &mut rng);
        let mut scaled = f.clone();
        scaled.factor_mut(0).column_mut(1).mapv_inplace(|v| v * 2.5);
        let base0 = KruskalFactors::new(vec![
            f.factor(0).column(0).to_owned().insert_axis(ndarray::Axis(1)),
            f.factor(1).column(0).to_owned().insert_axis(ndarray::Axis(1)),
        ])
        .unwrap();
        let base1 = KruskalFactors::new(vec![
            f.factor(0).column(1).to_owned().insert_axis(ndarray::Axis(1)),
            f.factor(1).column(1).to_owned().insert_axis(ndarray::Axis(1)),
        ])
        .unwrap();
        let want = kruskal_reconstruct(&base0)
            .zip_with(&kruskal_reconstruct(&base1), |a, b| a + 2.5 * b)
            .unwrap();
        assert!(kruskal_reconstruct(&scaled).max_abs_diff(&want) < 1e-12);
    }

    #[test]
    fn rejects_inconsistent_factors() {
        assert!(KruskalFactors::<f64>::new(vec![]).is_err());
        assert!(KruskalFactors::new(vec![Array2::<f64>::zeros((2, 2)), Array2::zeros((3, 1))]).is_err());
        assert!(KruskalFactors::with_weights(vec![Array2::<f64>::zeros((2, 2))], Some(vec![1.0])).is_err());
    }
}
