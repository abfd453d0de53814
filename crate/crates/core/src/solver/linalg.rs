//! Dense Hermitian positive-definite factorization for the slice systems.
//!
//! Left-looking blocked Cholesky `A = L L^H` on row-major storage; the
//! block-column updates go through the scalar's complex gemm.
//!
//! With a tiny ridge the slice systems can be numerically singular (rank
//! deficient Gram matrices). For a positive semidefinite matrix a vanishing
//! Schur pivot implies a vanishing column, so pivots at or below
//! `n * eps * max_diag` are dropped: their column of `L` is zeroed and the
//! matching unknown is set to zero, which yields a basic solution of the
//! consistent system. Dropped pivots are counted in
//! [`HermitianCholesky::dropped_pivots`].

use num_complex::Complex;

use crate::Scalar;

const BLOCK: usize = 16;

/// `sum_k x_k conj(y_k)` with split accumulators.
#[inline]
fn dot_conj<T: Scalar>(x: &[Complex<T>], y: &[Complex<T>]) -> Complex<T> {
    let (mut re, mut im) = (T::zero(), T::zero());
    for (p, q) in x.iter().zip(y) {
        re = re + p.re * q.re + p.im * q.im;
        im = im + p.im * q.re - p.re * q.im;
    }
    Complex::new(re, im)
}

#[derive(Debug, Clone, PartialEq)]
pub enum CholeskyError {
    NonFinite { row: usize },
}

#[derive(Debug, Clone)]
pub struct HermitianCholesky<T> {
    n: usize,
    l: Vec<Complex<T>>,
    dropped: Vec<bool>,
}

#[inline]
fn czero<T: Scalar>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

impl<T: Scalar> HermitianCholesky<T> {
    /// Factors the `n x n` row-major matrix `a`; only its lower triangle is read.
    pub fn factor(mut a: Vec<Complex<T>>, n: usize) -> Result<Self, CholeskyError> {
        assert_eq!(a.len(), n * n, "matrix storage does not match n");
        let max_diag = (0..n).map(|i| a[i * n + i].re.abs()).fold(T::zero(), T::max);
        let floor = T::of(n.max(1) as f64) * T::epsilon() * max_diag;
        let floor = if floor > T::zero() {
            floor
        } else {
            T::min_positive_value()
        };
        let mut dropped = vec![false; n];
        let mut conj_panel: Vec<Complex<T>> = Vec::new();

        let mut jb = 0;
        while jb < n {
            let je = (jb + BLOCK).min(n);
            let bs = je - jb;

            if jb > 0 {
                // A[jb.., jb..je] -= L[jb.., ..jb] * L[jb..je, ..jb]^H
                conj_panel.clear();
                conj_panel.resize(jb * bs, czero());
                for c in 0..bs {
                    for k in 0..jb {
                        conj_panel[k * bs + c] = a[(jb + c) * n + k].conj();
                    }
                }
                let base = a.as_mut_ptr();
                // SAFETY: the A operand reads columns 0..jb, C writes columns
                // jb..je of the same buffer; the ranges are disjoint.
                unsafe {
                    T::complex_gemm(
                        n - jb,
                        jb,
                        bs,
                        Complex::new(-T::one(), T::zero()),
                        base.add(jb * n) as *const _,
                        n as isize,
                        1,
                        conj_panel.as_ptr(),
                        bs as isize,
                        1,
                        Complex::new(T::one(), T::zero()),
                        base.add(jb * n + jb),
                        n as isize,
                        1,
                    );
                }
            }

            // unblocked factorization of the diagonal block
            for i in jb..je {
                for j in jb..=i {
                    let s = a[i * n + j] - dot_conj(&a[i * n + jb..i * n + j], &a[j * n + jb..j * n + j]);
                    if i == j {
                        let d = s.re;
                        if !d.is_finite() {
                            return Err(CholeskyError::NonFinite { row: i });
                        }
                        dropped[i] = d <= floor;
                        let l = if dropped[i] { T::zero() } else { d.sqrt() };
                        a[i * n + i] = Complex::new(l, T::zero());
                    } else {
                        a[i * n + j] = if dropped[j] { czero() } else { s / a[j * n + j].re };
                    }
                }
            }

            // panel below the diagonal block: X L_bb^H = A
            for i in je..n {
                for c in 0..bs {
                    let col = jb + c;
                    if dropped[col] {
                        a[i * n + col] = czero();
                        continue;
                    }
                    let s = a[i * n + col] - dot_conj(&a[i * n + jb..i * n + col], &a[col * n + jb..col * n + col]);
                    a[i * n + col] = s / a[col * n + col].re;
                }
            }
            jb = je;
        }

        // clear the strict upper triangle so `l` holds exactly L
        for i in 0..n {
            for j in i + 1..n {
                a[i * n + j] = czero();
            }
        }
        Ok(Self { n, l: a, dropped })
    }

    pub fn dropped_pivots(&self) -> usize {
        self.dropped.iter().filter(|&&d| d).count()
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [Complex<T>]) {
        let n = self.n;
        let l = &self.l;
        for i in 0..n {
            let s = b[i]
                - l[i * n..i * n + i]
                    .iter()
                    .zip(&b[..i])
                    .map(|(p, q)| p * q)
                    .sum::<Complex<T>>();
            b[i] = if self.dropped[i] { czero() } else { s / l[i * n + i].re };
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s = s - l[k * n + i].conj() * b[k];
            }
            b[i] = if self.dropped[i] { czero() } else { s / l[i * n + i].re };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hpd(n: usize, seed: u64) -> Vec<Complex<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g: Vec<Complex<f64>> = (0..n * n)
            .map(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let mut a = vec![Complex::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    a[i * n + j] += g[k * n + i].conj() * g[k * n + j];
                }
            }
            a[i * n + i] += 0.5;
        }
        a
    }

    fn matvec(a: &[Complex<f64>], x: &[Complex<f64>], n: usize) -> Vec<Complex<f64>> {
        (0..n).map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum()).collect()
    }

    #[test]
    fn solves_small_and_blocked_sizes() {
        for n in [1, 3, 47, 48, 49, 130] {
            let a = random_hpd(n, n as u64);
            let x: Vec<Complex<f64>> = (0..n).map(|i| Complex::new(i as f64, 1.0 - i as f64 * 0.5)).collect();
            let b = matvec(&a, &x, n);
            let chol = HermitianCholesky::factor(a.clone(), n).unwrap();
            assert_eq!(chol.dropped_pivots(), 0);
            let mut sol = b.clone();
            chol.solve_in_place(&mut sol);
            let r = matvec(&a, &sol, n);
            let res: f64 = r.iter().zip(&b).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
            let bn: f64 = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            assert!(res <= 1e-10 * bn, "n={n} residual {res}");
        }
    }

    #[test]
    fn rank_deficient_systems_get_a_bounded_exact_solution() {
        // Gram matrices of 40 x n tall-thin and 30 x n short-fat factors
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (rows, n) in [(1, 3), (30, 75), (40, 75), (100, 130)] {
            let g: Vec<Complex<f64>> = (0..rows * n)
                .map(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let mut a = vec![Complex::new(0.0, 0.0); n * n];
            for i in 0..n {
                for j in 0..n {
                    for k in 0..rows {
                        a[i * n + j] += g[k * n + i].conj() * g[k * n + j];
                    }
                }
            }
            // b in the range of A
            let y: Vec<Complex<f64>> = (0..n).map(|i| Complex::new(1.0, i as f64 * 0.1)).collect();
            let b = matvec(&a, &y, n);
            let chol = HermitianCholesky::factor(a.clone(), n).unwrap();
            assert_eq!(chol.dropped_pivots(), n - rows.min(n));
            let mut x = b.clone();
            chol.solve_in_place(&mut x);
            let r = matvec(&a, &x, n);
            let res: f64 = r.iter().zip(&b).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
            let bn: f64 = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            assert!(res <= 1e-8 * bn, "rows {rows} n {n}: {res} vs {bn}");
            assert!(x.iter().all(|v| v.norm() < 1e6));
        }
    }

    #[test]
    fn nan_is_reported() {
        let a = vec![Complex::new(f64::NAN, 0.0)];
        assert_eq!(
            HermitianCholesky::factor(a, 1).unwrap_err(),
            CholeskyError::NonFinite { row: 0 }
        );
    }
}
