//! Uniform cubic B-spline bases and penalised tensor-product surface fits
//! with a prescribed effective degrees of freedom.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::{Error, Result};

const DEGREE: usize = 3;

/// Cubic B-spline basis with equally spaced knots on `[lo, hi]`.
///
/// `nb` basis functions use `nb − 3` intervals of width `spacing`; the knot
/// sequence extends three spacings beyond each end.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BSplineBasis {
    lo: f64,
    hi: f64,
    nb: usize,
    spacing: f64,
}

impl BSplineBasis {
    pub fn new(lo: f64, hi: f64, nb: usize) -> Result<Self> {
        if nb < DEGREE + 1 {
            return Err(Error::invalid(format!("need at least 4 basis functions, got {nb}")));
        }
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid(format!("empty basis domain [{lo}, {hi}]")));
        }
        Ok(BSplineBasis {
            lo,
            hi,
            nb,
            spacing: (hi - lo) / (nb - DEGREE) as f64,
        })
    }

    pub fn len(&self) -> usize {
        self.nb
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn knot(&self, k: usize) -> f64 {
        self.lo + (k as f64 - DEGREE as f64) * self.spacing
    }

    pub fn knots(&self) -> Vec<f64> {
        (0..self.nb + DEGREE + 1).map(|k| self.knot(k)).collect()
    }

    /// Index `j` of the knot interval [t_j, t_{j+1}) containing `x`; the
    /// right end belongs to the last interval.
    fn interval(&self, x: f64) -> Result<usize> {
        let tol = 1e-12 * (self.hi - self.lo);
        if !(x >= self.lo - tol && x <= self.hi + tol) {
            return Err(Error::OutOfDomain {
                value: x,
                lo: self.lo,
                hi: self.hi,
            });
        }
        let cell = ((x - self.lo) / self.spacing).floor().max(0.0) as usize;
        Ok((cell + DEGREE).min(self.nb - 1))
    }

    /// Triangular table of all nonzero basis values of degree 0..=3 at `x`:
    /// `table[p][r]` is N_{j−p+r, p}(x) for r = 0..=p.
    fn table(&self, x: f64, j: usize) -> [[f64; DEGREE + 1]; DEGREE + 1] {
        let mut t = [[0.0; DEGREE + 1]; DEGREE + 1];
        t[0][0] = 1.0;
        for p in 1..=DEGREE {
            let denom = p as f64 * self.spacing;
            for r in 0..=p {
                let i = j + r - p;
                let left = if r >= 1 { t[p - 1][r - 1] } else { 0.0 };
                let right = if r < p { t[p - 1][r] } else { 0.0 };
                t[p][r] = (x - self.knot(i)) / denom * left
                    + (self.knot(i + p + 1) - x) / denom * right;
            }
        }
        t
    }

    /// First basis index and the four potentially nonzero values of the
    /// `order`-th derivative at `x`.
    pub fn local(&self, x: f64, order: usize) -> Result<(usize, [f64; DEGREE + 1])> {
        if order > DEGREE {
            return Err(Error::invalid(format!(
                "derivative order {order} exceeds spline degree {DEGREE}"
            )));
        }
        let j = self.interval(x)?;
        let t = self.table(x, j);
        let first = j - DEGREE;
        let low = DEGREE - order;
        // slot k holds N_{first+k, low}; indices beyond j vanish on this interval
        let mut vals = [0.0; 2 * DEGREE + 1];
        for r in 0..=low {
            vals[order + r] = t[low][r];
        }
        // φ'_{i,p} = (φ_{i,p−1} − φ_{i+1,p−1}) / h, applied `order` times
        for _ in 0..order {
            for k in 0..2 * DEGREE {
                vals[k] = (vals[k] - vals[k + 1]) / self.spacing;
            }
            vals[2 * DEGREE] = 0.0;
        }
        let mut out = [0.0; DEGREE + 1];
        out.copy_from_slice(&vals[..DEGREE + 1]);
        Ok((first, out))
    }

    /// All `nb` basis values at `x`.
    pub fn eval(&self, x: f64) -> Result<Vec<f64>> {
        self.deriv(x, 0)
    }

    /// All `nb` values of the `order`-th derivative at `x`.
    pub fn deriv(&self, x: f64, order: usize) -> Result<Vec<f64>> {
        let (first, vals) = self.local(x, order)?;
        let mut out = vec![0.0; self.nb];
        out[first..first + DEGREE + 1].copy_from_slice(&vals);
        Ok(out)
    }
}

/// Second-order difference operator on `n` coefficients, (n−2) × n.
pub fn difference_matrix(n: usize) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(n.saturating_sub(2), n);
    for r in 0..n.saturating_sub(2) {
        d[(r, r)] = 1.0;
        d[(r, r + 1)] = -2.0;
        d[(r, r + 2)] = 1.0;
    }
    d
}

/// DᵀD for the second-order difference operator.
pub fn difference_penalty(n: usize) -> DMatrix<f64> {
    let d = difference_matrix(n);
    d.transpose() * d
}

/// Isotropic tensor-product penalty DᵀD⊗I + I⊗DᵀD on `nb × nb` coefficients
/// stored with the first (s) index major.
pub fn tensor_penalty(nb: usize) -> DMatrix<f64> {
    let p = difference_penalty(nb);
    let eye = DMatrix::<f64>::identity(nb, nb);
    p.kronecker(&eye) + eye.kronecker(&p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceFitOptions {
    /// Basis functions per axis.
    pub nb: usize,
    /// Total effective degrees of freedom of the 2D fit.
    pub target_edf: f64,
    /// Accepted deviation of the achieved edf from the target.
    pub edf_tolerance: f64,
}

impl Default for SurfaceFitOptions {
    fn default() -> Self {
        SurfaceFitOptions {
            nb: 15,
            target_edf: 12.0,
            edf_tolerance: 0.1,
        }
    }
}

/// One scattered observation `value` at `(s, d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub s: f64,
    pub d: f64,
    pub value: f64,
}

/// Fitted tensor-product surface Σᵢⱼ βᵢⱼ φᵢ(s) φⱼ(d).
#[derive(Debug, Clone, Serialize)]
pub struct PSplineSurface {
    pub s_basis: BSplineBasis,
    pub d_basis: BSplineBasis,
    /// nb × nb, rows indexed by the s basis.
    pub coefficients: DMatrix<f64>,
    pub lambda: f64,
    pub edf: f64,
}

impl PSplineSurface {
    /// Surface value or derivative: `ds_order` in s, `dd_order` in d.
    pub fn eval(&self, s: f64, d: f64, ds_order: usize, dd_order: usize) -> Result<f64> {
        let (fs, bs) = self.s_basis.local(s, ds_order)?;
        let (fd, bd) = self.d_basis.local(d, dd_order)?;
        let mut acc = 0.0;
        for (a, ws) in bs.iter().enumerate() {
            for (b, wd) in bd.iter().enumerate() {
                acc += self.coefficients[(fs + a, fd + b)] * ws * wd;
            }
        }
        Ok(acc)
    }

    pub fn value(&self, s: f64, d: f64) -> Result<f64> {
        self.eval(s, d, 0, 0)
    }

    pub fn s_range(&self) -> (f64, f64) {
        self.s_basis.domain()
    }

    pub fn d_range(&self) -> (f64, f64) {
        self.d_basis.domain()
    }

    pub fn coefficients_csv(&self) -> String {
        let mut out = String::from("i,j,beta\n");
        for i in 0..self.coefficients.nrows() {
            for j in 0..self.coefficients.ncols() {
                out.push_str(&format!("{i},{j},{}\n", self.coefficients[(i, j)]));
            }
        }
        out
    }
}

/// Normal equations of a tensor-product least-squares problem, reusable
/// across smoothing parameters.
///
/// The system is held in the eigenbasis of the penalty, U = V⊗V with V the
/// eigenvectors of DᵀD, so the unpenalised directions stay separated from the
/// heavily penalised ones and large λ does not cost accuracy.
pub struct SurfaceProblem {
    s_basis: BSplineBasis,
    d_basis: BSplineBasis,
    eigvecs: DMatrix<f64>,
    eigvals: DVector<f64>,
    gram: DMatrix<f64>,
    rhs: DVector<f64>,
    gram_trace: f64,
    penalty_trace: f64,
    n_data: usize,
}

impl SurfaceProblem {
    pub fn new(samples: &[Sample], s_range: (f64, f64), d_range: (f64, f64), nb: usize) -> Result<Self> {
        let s_basis = BSplineBasis::new(s_range.0, s_range.1, nb)?;
        let d_basis = BSplineBasis::new(d_range.0, d_range.1, nb)?;
        let m = nb * nb;
        let mut gram = DMatrix::zeros(m, m);
        let mut rhs = DVector::zeros(m);
        for smp in samples {
            if !smp.value.is_finite() {
                return Err(Error::invalid(format!("non-finite sample at ({}, {})", smp.s, smp.d)));
            }
            let (fs, bs) = s_basis.local(smp.s, 0)?;
            let (fd, bd) = d_basis.local(smp.d, 0)?;
            let mut idx = [0usize; 16];
            let mut val = [0.0; 16];
            for a in 0..4 {
                for b in 0..4 {
                    idx[a * 4 + b] = (fs + a) * nb + fd + b;
                    val[a * 4 + b] = bs[a] * bd[b];
                }
            }
            for p in 0..16 {
                rhs[idx[p]] += val[p] * smp.value;
                for q in 0..16 {
                    gram[(idx[p], idx[q])] += val[p] * val[q];
                }
            }
        }
        let eig = difference_penalty(nb).symmetric_eigen();
        let scale = eig.eigenvalues.amax();
        let mu = eig.eigenvalues.map(|e| if e.abs() <= 1e-10 * scale { 0.0 } else { e });
        let eigvecs = eig.eigenvectors.kronecker(&eig.eigenvectors);
        let eigvals = DVector::from_fn(m, |k, _| mu[k / nb] + mu[k % nb]);
        let gram_trace = gram.trace();
        let gram_u = eigvecs.transpose() * &gram * &eigvecs;
        let rhs_u = eigvecs.transpose() * rhs;
        Ok(SurfaceProblem {
            s_basis,
            d_basis,
            eigvecs,
            penalty_trace: eigvals.sum(),
            eigvals,
            gram: gram_u,
            rhs: rhs_u,
            gram_trace,
            n_data: samples.len(),
        })
    }

    /// λ corresponding to the scale-free ρ = λ·tr(S)/tr(BᵀB).
    pub fn lambda_for(&self, rho: f64) -> f64 {
        rho * self.gram_trace / self.penalty_trace
    }

    fn factor(&self, lambda: f64) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
        let mut a = self.gram.clone();
        for k in 0..a.nrows() {
            a[(k, k)] += lambda * self.eigvals[k];
        }
        a.cholesky()
    }

    /// Trace of the influence operator, tr((BᵀB + λS)⁻¹BᵀB).
    pub fn edf(&self, lambda: f64) -> Option<f64> {
        let chol = self.factor(lambda)?;
        Some(chol.solve(&self.gram).trace())
    }

    pub fn fit(&self, lambda: f64) -> Result<PSplineSurface> {
        let chol = self
            .factor(lambda)
            .ok_or_else(|| Error::Singular(format!("penalised normal equations at lambda = {lambda:e}")))?;
        let beta = &self.eigvecs * chol.solve(&self.rhs);
        let edf = chol.solve(&self.gram).trace();
        let nb = self.s_basis.len();
        Ok(PSplineSurface {
            s_basis: self.s_basis.clone(),
            d_basis: self.d_basis.clone(),
            coefficients: DMatrix::from_row_slice(nb, nb, beta.as_slice()),
            lambda,
            edf,
        })
    }

    /// Fit with λ tuned by bisection on log ρ so the edf meets the target.
    pub fn fit_edf(&self, target: f64, tolerance: f64) -> Result<PSplineSurface> {
        let null_dim = 4.0;
        if target <= null_dim {
            return Err(Error::EdfBracket {
                target,
                min_edf: null_dim,
                max_edf: (self.s_basis.len() * self.d_basis.len()) as f64,
            });
        }
        let (mut lo, mut hi) = (-12.0f64, 12.0f64);
        let mut edf_lo = None;
        while lo < hi {
            if let Some(e) = self.edf(self.lambda_for(10f64.powf(lo))) {
                edf_lo = Some(e);
                break;
            }
            lo += 1.0;
        }
        let edf_hi = self.edf(self.lambda_for(10f64.powf(hi)));
        let (Some(max_edf), Some(min_edf)) = (edf_lo, edf_hi) else {
            return Err(Error::EdfBracket {
                target,
                min_edf: f64::NAN,
                max_edf: f64::NAN,
            });
        };
        if !(min_edf <= target && target <= max_edf) {
            return Err(Error::EdfBracket { target, min_edf, max_edf });
        }
        let mut best = (f64::INFINITY, lo);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let Some(e) = self.edf(self.lambda_for(10f64.powf(mid))) else {
                lo = mid;
                continue;
            };
            if (e - target).abs() < best.0 {
                best = ((e - target).abs(), mid);
            }
            if (e - target).abs() < 0.1 * tolerance {
                break;
            }
            if e > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let surface = self.fit(self.lambda_for(10f64.powf(best.1)))?;
        if (surface.edf - target).abs() > tolerance {
            return Err(Error::EdfBracket { target, min_edf, max_edf });
        }
        Ok(surface)
    }

    pub fn n_data(&self) -> usize {
        self.n_data
    }
}

/// Penalised fit of `samples` with the effective degrees of freedom fixed.
pub fn fit_surface(
    samples: &[Sample],
    s_range: (f64, f64),
    d_range: (f64, f64),
    opts: &SurfaceFitOptions,
) -> Result<PSplineSurface> {
    if (samples.len() as f64) < 2.0 * opts.target_edf {
        return Err(Error::invalid(format!(
            "{} samples cannot support {} effective degrees of freedom",
            samples.len(),
            opts.target_edf
        )));
    }
    if ((opts.nb * opts.nb) as f64) < opts.target_edf {
        return Err(Error::invalid(format!(
            "{}² coefficients cannot reach {} effective degrees of freedom",
            opts.nb, opts.target_edf
        )));
    }
    SurfaceProblem::new(samples, s_range, d_range, opts.nb)?.fit_edf(opts.target_edf, opts.edf_tolerance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Textbook recursion on an explicit knot vector.
    fn cox_de_boor(knots: &[f64], i: usize, p: usize, x: f64) -> f64 {
        if p == 0 {
            let last = knots[knots.len() - 4];
            return if (knots[i] <= x && x < knots[i + 1]) || (x == last && knots[i + 1] == last && knots[i] < last) {
                1.0
            } else {
                0.0
            };
        }
        let mut v = 0.0;
        let d1 = knots[i + p] - knots[i];
        if d1 > 0.0 {
            v += (x - knots[i]) / d1 * cox_de_boor(knots, i, p - 1, x);
        }
        let d2 = knots[i + p + 1] - knots[i + 1];
        if d2 > 0.0 {
            v += (knots[i + p + 1] - x) / d2 * cox_de_boor(knots, i + 1, p - 1, x);
        }
        v
    }

    #[test]
    fn knots_are_uniform() {
        let b = BSplineBasis::new(-1.0, 5.0, 15).unwrap();
        let k = b.knots();
        assert_eq!(k.len(), 19);
        for w in k.windows(2) {
            assert!((w[1] - w[0] - 0.5).abs() < 1e-12);
        }
        assert!((k[3] + 1.0).abs() < 1e-12 && (k[15] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn peak_value_at_centre_knot_is_two_thirds() {
        let b = BSplineBasis::new(0.0, 12.0, 15).unwrap();
        // φ_5 is supported on [t_5, t_9] and centred on t_7
        let v = b.eval(b.knot(7)).unwrap();
        assert!((v[5] - 2.0 / 3.0).abs() < 1e-15);
        assert!((v[4] - 1.0 / 6.0).abs() < 1e-15 && (v[6] - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn matches_recursive_definition() {
        let b = BSplineBasis::new(0.3, 4.1, 9).unwrap();
        let k = b.knots();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut xs = vec![0.3, 4.1 - 1e-9];
        xs.extend((0..50).map(|_| rng.gen_range(0.3..4.1)));
        for x in xs {
            let v = b.eval(x).unwrap();
            for i in 0..9 {
                assert!((v[i] - cox_de_boor(&k, i, 3, x)).abs() < 1e-12, "x={x} i={i}");
            }
        }
    }

    #[test]
    fn outside_domain_and_excess_order_are_errors() {
        let b = BSplineBasis::new(0.0, 1.0, 6).unwrap();
        assert!(matches!(b.eval(1.5), Err(Error::OutOfDomain { .. })));
        assert!(b.deriv(0.5, 4).is_err());
        assert!(b.eval(1.0).is_ok());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let b = BSplineBasis::new(0.0, 6.0, 12).unwrap();
        let h = 1e-6 * b.spacing();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let x = rng.gen_range(0.01..5.99);
            for order in 1..=2 {
                let d = b.deriv(x, order).unwrap();
                let (p, m) = (b.deriv(x + h, order - 1).unwrap(), b.deriv(x - h, order - 1).unwrap());
                for i in 0..12 {
                    let fd = (p[i] - m[i]) / (2.0 * h);
                    assert!((d[i] - fd).abs() <= 1e-6 * d[i].abs().max(1e-2), "order {order} x={x} i={i}");
                }
            }
            assert!(b.deriv(x, 1).unwrap().iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn quadratic_reproduction_has_constant_second_derivative() {
        let b = BSplineBasis::new(0.0, 3.0, 9).unwrap();
        let xs: Vec<f64> = (0..60).map(|i| i as f64 * 3.0 / 59.0).collect();
        let design = DMatrix::from_fn(xs.len(), 9, |r, c| b.eval(xs[r]).unwrap()[c]);
        let y = DVector::from_iterator(xs.len(), xs.iter().map(|x| x * x));
        let coef = design.clone().svd(true, true).solve(&y, 1e-12).unwrap();
        for x in [0.1, 0.77, 1.5, 2.2, 2.9] {
            let d2: f64 = b.deriv(x, 2).unwrap().iter().zip(coef.iter()).map(|(a, c)| a * c).sum();
            assert!((d2 - 2.0).abs() < 1e-8);
        }
    }

    #[test]
    fn difference_penalty_annihilates_affine_sequences() {
        let p = difference_penalty(10);
        let affine = DVector::from_fn(10, |i, _| 3.0 - 0.5 * i as f64);
        assert!((&p * affine).norm() < 1e-12);
        assert!((&p - p.transpose()).norm() == 0.0);
        assert!(p.symmetric_eigenvalues().iter().all(|&e| e > -1e-12));
        let s = tensor_penalty(6);
        let eig = s.symmetric_eigenvalues();
        assert_eq!(eig.iter().filter(|e| e.abs() < 1e-9).count(), 4);
    }

    fn grid_samples(n: usize, mut f: impl FnMut(f64, f64) -> f64) -> Vec<Sample> {
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let (s, d) = (10.0 * i as f64 / (n - 1) as f64, -3.0 + 6.0 * j as f64 / (n - 1) as f64);
                out.push(Sample { s, d, value: f(s, d) });
            }
        }
        out
    }

    #[test]
    fn constant_data_is_reproduced() {
        let data = grid_samples(20, |_, _| 0.37);
        let surf = fit_surface(&data, (0.0, 10.0), (-3.0, 3.0), &Default::default()).unwrap();
        for smp in &data {
            assert!((surf.value(smp.s, smp.d).unwrap() - 0.37).abs() < 1e-8);
        }
        assert!((surf.eval(5.0, 0.3, 0, 1).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn edf_hits_target_and_decreases_with_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let data = grid_samples(25, |s, d| (s / 3.0).sin() * (-d * d).exp() + rng.gen_range(-0.1..0.1));
        let surf = fit_surface(&data, (0.0, 10.0), (-3.0, 3.0), &Default::default()).unwrap();
        assert!((surf.edf - 12.0).abs() <= 0.1);
        let prob = SurfaceProblem::new(&data, (0.0, 10.0), (-3.0, 3.0), 15).unwrap();
        let mut prev = f64::INFINITY;
        for k in -8..=8 {
            let e = prob.edf(prob.lambda_for(10f64.powi(k))).unwrap();
            assert!(e < prev);
            prev = e;
        }
        // infinite smoothing leaves the four-dimensional null space
        assert!((prob.edf(prob.lambda_for(1e12)).unwrap() - 4.0).abs() < 1e-3);
        assert!(matches!(prob.fit_edf(4.0, 0.1), Err(Error::EdfBracket { .. })));
        assert!(matches!(prob.fit_edf(3.0, 0.1), Err(Error::EdfBracket { .. })));
    }

    #[test]
    fn smoothing_reduces_noise() {
        let truth = |s: f64, d: f64| (-(s - 5.0).powi(2) / 8.0 - d * d / 2.0).exp();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut data = grid_samples(30, truth);
        let mut noise_var = 0.0;
        for smp in &mut data {
            let e = rng.gen_range(-0.2..0.2);
            smp.value += e;
            noise_var += e * e;
        }
        noise_var /= data.len() as f64;
        let surf = fit_surface(&data, (0.0, 10.0), (-3.0, 3.0), &Default::default()).unwrap();
        let resid: f64 = data
            .iter()
            .map(|smp| (surf.value(smp.s, smp.d).unwrap() - truth(smp.s, smp.d)).powi(2))
            .sum::<f64>()
            / data.len() as f64;
        assert!(resid < noise_var, "{resid} vs {noise_var}");
    }

    #[test]
    fn near_interpolating_fit_reproduces_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let data = grid_samples(15, |_, _| rng.gen_range(0.0..1.0));
        let prob = SurfaceProblem::new(&data, (0.0, 10.0), (-3.0, 3.0), 15).unwrap();
        let surf = prob.fit(prob.lambda_for(1e-12)).unwrap();
        for smp in &data {
            assert!((surf.value(smp.s, smp.d).unwrap() - smp.value).abs() < 1e-4);
        }
    }

    #[test]
    fn d_derivative_matches_finite_differences() {
        let data = grid_samples(20, |s, d| (s / 2.0).cos() * (d + 0.3 * d * d * d));
        let surf = fit_surface(&data, (0.0, 10.0), (-3.0, 3.0), &Default::default()).unwrap();
        let h = 1e-6 * surf.d_basis.spacing();
        for (s, d) in [(1.0, 0.2), (4.4, -1.7), (9.1, 2.5)] {
            let an = surf.eval(s, d, 0, 1).unwrap();
            let fd = (surf.value(s, d + h).unwrap() - surf.value(s, d - h).unwrap()) / (2.0 * h);
            assert!((an - fd).abs() <= 1e-6 * an.abs().max(1e-3));
            let an2 = surf.eval(s, d, 0, 2).unwrap();
            let fd2 = (surf.eval(s, d + h, 0, 1).unwrap() - surf.eval(s, d - h, 0, 1).unwrap()) / (2.0 * h);
            assert!((an2 - fd2).abs() <= 1e-6 * an2.abs().max(1e-3));
        }
    }

    #[test]
    fn too_little_data_is_rejected() {
        let data = grid_samples(4, |_, _| 1.0);
        assert!(fit_surface(&data, (0.0, 10.0), (-3.0, 3.0), &Default::default()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn partition_of_unity(x in 0.0..7.0f64) {
            let b = BSplineBasis::new(0.0, 7.0, 15).unwrap();
            let v = b.eval(x).unwrap();
            prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(v.iter().filter(|&&w| w != 0.0).count() <= 4);
        }

        #[test]
        fn affine_functions_reproduced_for_any_lambda(
            a in -2.0..2.0f64, b in -1.0..1.0f64, c in -1.0..1.0f64, log_rho in -6.0..12.0f64,
        ) {
            let data = grid_samples(18, |s, d| a + b * s + c * d);
            let prob = SurfaceProblem::new(&data, (0.0, 10.0), (-3.0, 3.0), 15).unwrap();
            let surf = prob.fit(prob.lambda_for(10f64.powf(log_rho))).unwrap();
            for (s, d) in [(0.0, -3.0), (3.3, 1.1), (10.0, 3.0), (7.2, -0.4)] {
                prop_assert!((surf.value(s, d).unwrap() - (a + b * s + c * d)).abs() < 1e-8);
            }
        }
    }
}
