//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use lrd_core::dictionary::Dictionary;
use lrd_core::regularization::RegularizationConfig;
use lrd_core::solver::SolverState;
use lrd_core::spectral::{derivative_weights, integral_weights, FilterSpectrum, SpectralGrid};
use lrd_core::tensor::{kruskal_vec_operator, mode_n_matricize, DenseTensor, KruskalFactors};
use ndarray::Array2;
use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> DenseTensor<f64> {
    DenseTensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0)).unwrap()
}

/// Random shape with at most `max_order` modes, extents in `1..=max_extent`
/// and at most `max_size` entries.
pub fn random_shape(rng: &mut ChaCha8Rng, max_order: usize, max_extent: usize, max_size: usize) -> Vec<usize> {
    loop {
        let order = rng.gen_range(1..=max_order);
        let shape: Vec<usize> = (0..order).map(|_| rng.gen_range(1..=max_extent)).collect();
        if shape.iter().product::<usize>() <= max_size {
            return shape;
        }
    }
}

pub fn random_dictionary(rng: &mut ChaCha8Rng, shape: &[usize], count: usize) -> Dictionary<f64> {
    let support: Vec<usize> = shape.iter().map(|&e| rng.gen_range(1..=e.min(3))).collect();
    let filters = (0..count)
        .map(|_| {
            let mut f = random_tensor(rng, &support);
            f.data_mut()[0] += 2.0;
            f
        })
        .collect();
    Dictionary::from_filters(filters).unwrap()
}

/// Spatial `s = sum_l filter[l] signal[x - l + floor(L/2)]`, the naive
/// circular convolution with the filter centered at the origin.
pub fn naive_convolve(filter: &DenseTensor<f64>, signal: &DenseTensor<f64>) -> DenseTensor<f64> {
    let shape = signal.shape().to_vec();
    let fshape = filter.shape().to_vec();
    DenseTensor::from_fn(&shape, |x| {
        let mut acc = 0.0;
        let mut l = vec![0usize; fshape.len()];
        loop {
            let src: Vec<usize> = (0..shape.len())
                .map(|d| {
                    let shift = l[d] as isize - (fshape[d] / 2) as isize;
                    (x[d] as isize - shift).rem_euclid(shape[d] as isize) as usize
                })
                .collect();
            acc += filter.get(&l) * signal.get(&src);
            let mut d = fshape.len();
            loop {
                if d == 0 {
                    return acc;
                }
                d -= 1;
                l[d] += 1;
                if l[d] < fshape[d] {
                    break;
                }
                l[d] = 0;
            }
        }
    })
    .unwrap()
}

/// Naive outer-product sum of real Kruskal factors.
pub fn naive_kruskal(f: &KruskalFactors<f64>) -> DenseTensor<f64> {
    let shape = f.shape();
    DenseTensor::from_fn(&shape, |idx| {
        (0..f.rank())
            .map(|r| {
                let w = f.weights().map_or(1.0, |w| w[r]);
                w * idx
                    .iter()
                    .enumerate()
                    .map(|(n, &i)| f.factor(n)[[i, r]])
                    .product::<f64>()
            })
            .sum()
    })
    .unwrap()
}

pub fn psnr(x: &DenseTensor<f64>, reference: &DenseTensor<f64>, peak: f64) -> f64 {
    let mse = x
        .data()
        .iter()
        .zip(reference.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / x.len() as f64;
    10.0 * (peak * peak / mse).log10()
}

/// Dense complex Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Array2<C>, mut b: Vec<C>) -> Vec<C> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&x, &y| a[[x, k]].norm().total_cmp(&a[[y, k]].norm()))
            .unwrap();
        if p != k {
            for j in 0..n {
                a.swap([k, j], [p, j]);
            }
            b.swap(k, p);
        }
        let piv = a[[k, k]];
        for i in k + 1..n {
            let f = a[[i, k]] / piv;
            if f == C::new(0.0, 0.0) {
                continue;
            }
            for j in k..n {
                let v = a[[k, j]];
                a[[i, j]] -= f * v;
            }
            let bk = b[k];
            b[i] -= f * bk;
        }
    }
    let mut x = vec![C::new(0.0, 0.0); n];
    for i in (0..n).rev() {
        let s: C = (i + 1..n).map(|j| a[[i, j]] * x[j]).sum();
        x[i] = (b[i] - s) / a[[i, i]];
    }
    x
}

/// Fully materialized mode-`n` normal equations `(A, b)` over all
/// `M R I_n` unknowns, ordered `m R I_n + r I_n + i` (column stacking of
/// each `X_hat_m^(n)`).
pub struct DenseSystem {
    pub a: Array2<C>,
    pub b: Vec<C>,
    pub extent: usize,
}

fn vec_unfolding(t: &lrd_core::tensor::ComplexTensor<f64>, n: usize) -> Vec<C> {
    let u = mode_n_matricize(t, n).unwrap();
    let (rows, cols) = u.dim();
    let mut v = Vec::with_capacity(rows * cols);
    for j in 0..cols {
        for i in 0..rows {
            v.push(u[[i, j]]);
        }
    }
    v
}

/// `op^H diag(w) op` for a dense `P x K` operator.
fn weighted_gram(op: &Array2<C>, w: &[f64]) -> Array2<C> {
    let (p, k) = op.dim();
    Array2::from_shape_fn((k, k), |(a, b)| {
        (0..p).map(|l| op[[l, a]].conj() * op[[l, b]] * w[l]).sum()
    })
}

pub fn dense_system(state: &SolverState<f64>, n: usize) -> DenseSystem {
    let shape = state.shape().to_vec();
    let p: usize = shape.iter().product();
    let extent = shape[n];
    let rank = state.rank();
    let mcount = state.filter_count();
    let k = mcount * rank * extent;
    let cfg = state.config();

    // forward operator W_hat = [diag(d_m) (Q_m ⊗ I)]_m
    let mut w = Array2::<C>::zeros((p, k));
    let mut blocks = Vec::new();
    for m in 0..mcount {
        let fs = &state.factor_spectra()[m];
        let kf = KruskalFactors::new(fs.clone()).unwrap();
        let op = kruskal_vec_operator(&kf, n).unwrap();
        let d = vec_unfolding(state.filter_spectra().get(m), n);
        let mut block = Array2::<C>::zeros((p, rank * extent));
        for l in 0..p {
            for c in 0..rank * extent {
                block[[l, c]] = d[l] * op[[l, c]];
                w[[l, m * rank * extent + c]] = block[[l, c]];
            }
        }
        blocks.push(block);
    }

    let grid = SpectralGrid::<f64>::new(&shape).unwrap();
    let energy = |integral: bool| -> Vec<f64> {
        let mut e = vec![0.0; p];
        for d in 0..shape.len() {
            let wt = if integral {
                integral_weights(&grid, d, cfg.dc_policy).unwrap()
            } else {
                derivative_weights(&grid, d).unwrap()
            };
            for (acc, v) in e.iter_mut().zip(vec_unfolding(&wt, n)) {
                *acc += v.norm_sqr();
            }
        }
        e
    };
    let (tv, ti) = (energy(false), energy(true));

    let mut a = weighted_gram(&w, &vec![1.0; p]);
    match &cfg.per_filter {
        None => {
            let wt: Vec<f64> = (0..p).map(|l| cfg.gamma * tv[l] + cfg.zeta * ti[l]).collect();
            a = a + weighted_gram(&w, &wt);
        }
        Some(pf) => {
            for (m, block) in blocks.iter().enumerate() {
                let wt: Vec<f64> = (0..p).map(|l| pf.gamma[m] * tv[l] + pf.zeta[m] * ti[l]).collect();
                let g = weighted_gram(block, &wt);
                let off = m * rank * extent;
                for x in 0..rank * extent {
                    for y in 0..rank * extent {
                        a[[off + x, off + y]] += g[[x, y]];
                    }
                }
            }
        }
    }
    for d in 0..k {
        a[[d, d]] += cfg.alpha;
    }
    let s = vec_unfolding(state.signal_spectrum(), n);
    let b = (0..k).map(|c| (0..p).map(|l| w[[l, c]].conj() * s[l]).sum()).collect();
    DenseSystem { a, b, extent }
}

/// Current mode-`n` unknowns in the dense ordering.
pub fn dense_unknowns(state: &SolverState<f64>, n: usize) -> Vec<C> {
    let mut x = Vec::new();
    for set in state.factor_spectra() {
        let f = &set[n];
        for r in 0..f.ncols() {
            for i in 0..f.nrows() {
                x.push(f[[i, r]]);
            }
        }
    }
    x
}

pub fn rel_err(x: &[C], y: &[C]) -> f64 {
    let num: f64 = x.iter().zip(y).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    let den: f64 = y.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    num / den.max(1e-300)
}

/// Random small problem for oracle comparisons.
pub struct Instance {
    pub signal: DenseTensor<f64>,
    pub dict: Dictionary<f64>,
    pub rank: usize,
    pub config: RegularizationConfig<f64>,
}

pub fn random_instance(seed: u64, per_filter: bool) -> Instance {
    let mut r = rng(seed);
    let shape = random_shape(&mut r, 3, 5, 60);
    let mcount = r.gen_range(1..=3);
    let dict = random_dictionary(&mut r, &shape, mcount);
    let signal = random_tensor(&mut r, &shape);
    let rank = r.gen_range(1..=3);
    let mut config = RegularizationConfig {
        gamma: r.gen_range(0.0..0.1),
        zeta: r.gen_range(0.0..0.01),
        alpha: 10f64.powf(r.gen_range(-6.0..-2.0)),
        dc_policy: lrd_core::spectral::DcPolicy::Epsilon(1.0),
        ..Default::default()
    };
    if per_filter {
        config.per_filter = Some(lrd_core::regularization::PerFilterWeights {
            gamma: (0..mcount).map(|_| r.gen_range(0.0..0.1)).collect(),
            zeta: (0..mcount).map(|_| r.gen_range(0.0..0.01)).collect(),
        });
    }
    Instance {
        signal,
        dict,
        rank,
        config,
    }
}

pub fn filter_spectrum_of(dict: &Dictionary<f64>, shape: &[usize]) -> FilterSpectrum<f64> {
    FilterSpectrum::new(dict.filters(), shape).unwrap()
}
