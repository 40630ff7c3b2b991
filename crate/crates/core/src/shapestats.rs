//! Centroid size, principal components of aligned configurations and
//! two-group permutation tests.

use nalgebra::{DMatrix, DVector, Point3};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::correspondence::{centroid_size, gpa};
use crate::{Error, Result};

/// Aligned configurations with binary group labels and the centroid size of
/// each configuration before alignment.
#[derive(Debug, Clone)]
pub struct ShapeSample {
    pub aligned: Vec<Vec<Point3<f64>>>,
    pub labels: Vec<bool>,
    pub sizes: Vec<f64>,
}

impl ShapeSample {
    /// Generalised Procrustes alignment of `configs` (to unit size when
    /// `scale`), keeping the original sizes.
    pub fn from_configs(configs: &[Vec<Point3<f64>>], labels: Vec<bool>, scale: bool) -> Result<Self> {
        if labels.len() != configs.len() {
            return Err(Error::invalid(format!("{} labels for {} configurations", labels.len(), configs.len())));
        }
        let sizes: Vec<f64> = configs.iter().map(|c| centroid_size(c)).collect();
        let aligned = gpa(configs, scale)?.aligned;
        Ok(ShapeSample { aligned, labels, sizes })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PcaResult {
    pub mean: Vec<Point3<f64>>,
    /// Unit eigenvectors over the flattened coordinates (x1, y1, z1, x2, ...),
    /// one per column, in order of decreasing variance.
    pub components: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    /// Row i holds the scores of configuration i.
    pub scores: DMatrix<f64>,
    /// Cumulative fraction of the total variance explained.
    pub cumulative_variance: Vec<f64>,
}

impl PcaResult {
    /// Smallest number of components whose cumulative variance reaches
    /// `fraction`.
    pub fn components_for(&self, fraction: f64) -> usize {
        self.cumulative_variance.iter().position(|&c| c >= fraction - 1e-12).map_or(self.eigenvalues.len(), |i| i + 1)
    }

    /// Configuration rebuilt from the mean and its first `q` scores.
    pub fn reconstruct(&self, index: usize, q: usize) -> Vec<Point3<f64>> {
        let q = q.min(self.eigenvalues.len());
        let coords = self.components.columns(0, q) * self.scores.view((index, 0), (1, q)).transpose();
        self.mean
            .iter()
            .enumerate()
            .map(|(k, m)| Point3::new(m.x + coords[3 * k], m.y + coords[3 * k + 1], m.z + coords[3 * k + 2]))
            .collect()
    }

    pub fn component_scores(&self, k: usize) -> Vec<f64> {
        self.scores.column(k).iter().copied().collect()
    }

    /// First `q` score columns.
    pub fn leading_scores(&self, q: usize) -> DMatrix<f64> {
        self.scores.columns(0, q.min(self.scores.ncols())).into_owned()
    }
}

fn flatten_config(config: &[Point3<f64>]) -> impl Iterator<Item = f64> + '_ {
    config.iter().flat_map(|p| [p.x, p.y, p.z])
}

/// One-sided Jacobi SVD of the columns of `a` (tall or square). Returns the
/// column norms after orthogonalisation, the orthogonalised columns and the
/// accumulated rotation, so that `a · rotation = columns`.
fn jacobi_svd(mut a: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>, DMatrix<f64>) {
    let n = a.ncols();
    let mut rot = DMatrix::identity(n, n);
    for _ in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dot(&a.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for m in [&mut a, &mut rot] {
                    for r in 0..m.nrows() {
                        let (x, y) = (m[(r, p)], m[(r, q)]);
                        m[(r, p)] = c * x - s * y;
                        m[(r, q)] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms = a.column_iter().map(|c| c.norm()).collect();
    (norms, a, rot)
}

/// Principal components of the configurations about their mean, from the
/// singular value decomposition of the centred data matrix. Directions with
/// numerically zero variance are dropped. Each component is signed so its
/// largest-magnitude entry is positive.
pub fn pca(configs: &[Vec<Point3<f64>>]) -> Result<PcaResult> {
    let n = configs.len();
    if n < 2 {
        return Err(Error::invalid("principal components need at least two configurations"));
    }
    let k = configs[0].len();
    if k == 0 || configs.iter().any(|c| c.len() != k) {
        return Err(Error::invalid("configurations must be non-empty and equally long"));
    }
    let d = 3 * k;
    let mut data = DMatrix::from_row_iterator(n, d, configs.iter().flat_map(|c| flatten_config(c)));
    let mean_row = data.row_mean();
    for mut row in data.row_iter_mut() {
        row -= &mean_row;
    }
    let mean = (0..k).map(|j| Point3::new(mean_row[3 * j], mean_row[3 * j + 1], mean_row[3 * j + 2])).collect();

    // columns of the transposed data are the configurations; orthogonalising
    // them yields the principal directions scaled by the singular values
    let (sigma, directions, _) = jacobi_svd(data.transpose());
    let largest = sigma.iter().copied().fold(0.0, f64::max);
    let cutoff = largest * (n * d) as f64 * f64::EPSILON;
    let mut order: Vec<usize> = (0..n).filter(|&i| sigma[i] > cutoff).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));

    let mut components = DMatrix::zeros(d, order.len());
    for (col, &i) in order.iter().enumerate() {
        let mut v: DVector<f64> = directions.column(i) / sigma[i];
        let pivot = v.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(0.0);
        if pivot < 0.0 {
            v.neg_mut();
        }
        components.set_column(col, &v);
    }
    let eigenvalues: Vec<f64> = order.iter().map(|&i| sigma[i].powi(2) / (n - 1) as f64).collect();
    let scores = &data * &components;
    let total: f64 = eigenvalues.iter().sum();
    let mut running = 0.0;
    let cumulative_variance = eigenvalues
        .iter()
        .map(|&e| {
            running += e;
            running / total
        })
        .collect();
    Ok(PcaResult { mean, components, eigenvalues, scores, cumulative_variance })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PermutationTest {
    /// Observed statistic: |t| or Hotelling's T².
    pub statistic: f64,
    pub p_value: f64,
    pub n_perm: usize,
}

fn group_sizes(labels: &[bool]) -> Result<(usize, usize)> {
    let n1 = labels.iter().filter(|&&l| l).count();
    let n0 = labels.len() - n1;
    if n0 == 0 || n1 == 0 {
        return Err(Error::invalid(format!("both groups need members (sizes {n0} and {n1})")));
    }
    Ok((n0, n1))
}

/// Pooled-variance two-sample |t|.
fn t_statistic(values: &[f64], labels: &[bool]) -> f64 {
    let (mut s, mut ss, mut n) = ([0.0; 2], [0.0; 2], [0.0; 2]);
    for (&v, &l) in values.iter().zip(labels) {
        let g = l as usize;
        s[g] += v;
        n[g] += 1.0;
    }
    let m = [s[0] / n[0], s[1] / n[1]];
    for (&v, &l) in values.iter().zip(labels) {
        let g = l as usize;
        ss[g] += (v - m[g]).powi(2);
    }
    let df = n[0] + n[1] - 2.0;
    let diff = (m[1] - m[0]).abs();
    if df <= 0.0 {
        return if diff > 0.0 { f64::INFINITY } else { 0.0 };
    }
    let se = ((ss[0] + ss[1]) / df * (1.0 / n[0] + 1.0 / n[1])).sqrt();
    if se > 0.0 {
        diff / se
    } else if diff > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

fn hotelling_statistic(scores: &DMatrix<f64>, labels: &[bool]) -> Result<f64> {
    let q = scores.ncols();
    let mut means = [DVector::zeros(q), DVector::zeros(q)];
    let mut counts = [0.0; 2];
    for (row, &l) in scores.row_iter().zip(labels) {
        means[l as usize] += row.transpose();
        counts[l as usize] += 1.0;
    }
    means[0] /= counts[0];
    means[1] /= counts[1];
    let mut pooled = DMatrix::zeros(q, q);
    for (row, &l) in scores.row_iter().zip(labels) {
        let c = row.transpose() - &means[l as usize];
        pooled += &c * c.transpose();
    }
    pooled /= counts[0] + counts[1] - 2.0;
    let diff = &means[1] - &means[0];
    let chol = pooled.cholesky().ok_or_else(|| {
        Error::Singular(format!("pooled covariance of {q} components is singular; use fewer components"))
    })?;
    let w = chol.solve(&diff);
    Ok(counts[0] * counts[1] / (counts[0] + counts[1]) * diff.dot(&w))
}

/// Labels shuffled by permutation `index` of the stream for `seed`. Each
/// permutation has its own generator stream, so the result does not depend
/// on how permutations are scheduled.
fn permuted(labels: &[bool], seed: u64, index: usize) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let mut out = labels.to_vec();
    out.shuffle(&mut rng);
    out
}

fn permutation_p<F>(observed: f64, labels: &[bool], n_perm: usize, seed: u64, stat: F) -> Result<PermutationTest>
where
    F: Fn(&[bool]) -> Result<f64> + Sync,
{
    // guards against rounding when a permutation reproduces the observed split
    let threshold = observed - 1e-12 * observed.abs();
    let exceed = (0..n_perm)
        .into_par_iter()
        .map(|i| stat(&permuted(labels, seed, i)).map(|s| (s >= threshold) as usize))
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(PermutationTest { statistic: observed, p_value: (1 + exceed) as f64 / (n_perm + 1) as f64, n_perm })
}

/// Two-sided permutation test of a difference in group means (for example
/// centroid size) using the pooled two-sample t statistic.
pub fn perm_test_t(values: &[f64], labels: &[bool], n_perm: usize, seed: u64) -> Result<PermutationTest> {
    if values.len() != labels.len() {
        return Err(Error::invalid(format!("{} values for {} labels", values.len(), labels.len())));
    }
    group_sizes(labels)?;
    let observed = t_statistic(values, labels);
    permutation_p(observed, labels, n_perm, seed, |l| Ok(t_statistic(values, l)))
}

/// Permutation test of Hotelling's T² on the rows of `scores` (one row per
/// configuration, one column per component).
pub fn perm_test_hotelling(scores: &DMatrix<f64>, labels: &[bool], n_perm: usize, seed: u64) -> Result<PermutationTest> {
    if scores.nrows() != labels.len() {
        return Err(Error::invalid(format!("{} score rows for {} labels", scores.nrows(), labels.len())));
    }
    let q = scores.ncols();
    if q == 0 {
        return Err(Error::invalid("no components to test"));
    }
    let (n0, n1) = group_sizes(labels)?;
    if n0 <= q || n1 <= q {
        return Err(Error::invalid(format!("groups of {n0} and {n1} are too small for {q} components")));
    }
    let observed = hotelling_statistic(scores, labels)?;
    permutation_p(observed, labels, n_perm, seed, |l| hotelling_statistic(scores, l))
}

/// Permutation test on the scores of a single component.
pub fn perm_test_component(scores: &[f64], labels: &[bool], n_perm: usize, seed: u64) -> Result<PermutationTest> {
    perm_test_t(scores, labels, n_perm, seed)
}

/// Kolmogorov-Smirnov distance between `values` and the uniform distribution
/// on [0, 1].
pub fn ks_uniform(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            (x - i as f64 / n).max((i + 1) as f64 / n - x)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic one-sample KS critical distance at the 1% level.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.6276 / (n as f64).sqrt()
}
