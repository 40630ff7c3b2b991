//! Penalised curvature-integral maximisation over curve offsets in the
//! flattened domain.
//!
//! The curve is r(s_k) = α_k on an equally spaced grid over [0, L], pinned at
//! both ends. The objective is
//! M(α) = (1/n) Σ_k ν(s_k, α_k) − λ αᵀPα with P = DᵀD, D the second-order
//! difference operator.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use nalgebra::Point2;

use crate::flatten::FlatDomain;
use crate::meshcore::SurfaceCurve;
use crate::psplines::{difference_penalty, PSplineSurface};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RidgeOptions {
    pub n_grid: usize,
    pub lambda: f64,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub max_halvings: usize,
}

impl Default for RidgeOptions {
    fn default() -> Self {
        RidgeOptions {
            n_grid: 51,
            lambda: 0.5,
            max_iterations: 100,
            gradient_tolerance: 1e-8,
            max_halvings: 30,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RidgeSolution {
    pub s: Vec<f64>,
    pub alpha: Vec<f64>,
    pub lambda: f64,
    /// Objective after each accepted iterate, starting with α = 0.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Iterations where the Hessian was not negative definite and a
    /// gradient step was taken instead.
    pub gradient_steps: usize,
    /// The line search could not improve M before the gradient tolerance
    /// was met.
    pub stalled: bool,
}

impl RidgeSolution {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace starts with the initial objective")
    }
}

/// The penalised objective on a fixed s-grid.
pub struct RidgeProblem<'a> {
    surface: &'a PSplineSurface,
    s: Vec<f64>,
    lambda: f64,
    /// DᵀD on all grid coordinates.
    penalty: DMatrix<f64>,
}

impl<'a> RidgeProblem<'a> {
    pub fn new(surface: &'a PSplineSurface, n_grid: usize, lambda: f64) -> Result<Self> {
        if n_grid < 3 {
            return Err(Error::invalid(format!("grid needs at least 3 points, got {n_grid}")));
        }
        if !(lambda >= 0.0) {
            return Err(Error::invalid(format!("penalty weight must be non-negative, got {lambda}")));
        }
        let (lo, hi) = surface.s_range();
        let s = (0..n_grid)
            .map(|k| lo + (hi - lo) * k as f64 / (n_grid - 1) as f64)
            .collect();
        Ok(RidgeProblem {
            surface,
            s,
            lambda,
            penalty: difference_penalty(n_grid),
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.s
    }

    pub fn n(&self) -> usize {
        self.s.len()
    }

    pub fn penalty(&self) -> &DMatrix<f64> {
        &self.penalty
    }

    /// P restricted to the free coordinates 1..n−1.
    pub fn free_penalty(&self) -> DMatrix<f64> {
        let m = self.n() - 2;
        self.penalty.view((1, 1), (m, m)).into_owned()
    }

    fn penalty_term(&self, alpha: &[f64]) -> f64 {
        let a = DVector::from_column_slice(alpha);
        a.dot(&(&self.penalty * &a))
    }

    fn check_len(&self, alpha: &[f64]) -> Result<()> {
        if alpha.len() != self.n() {
            return Err(Error::invalid(format!(
                "expected {} offsets, got {}",
                self.n(),
                alpha.len()
            )));
        }
        Ok(())
    }

    /// M(α) for the full offset vector (endpoints included).
    pub fn objective(&self, alpha: &[f64]) -> Result<f64> {
        self.check_len(alpha)?;
        let mut data = 0.0;
        for (s, a) in self.s.iter().zip(alpha) {
            data += self.surface.value(*s, *a)?;
        }
        Ok(data / self.n() as f64 - self.lambda * self.penalty_term(alpha))
    }

    /// Gradient and Hessian of M with respect to the free coordinates.
    pub fn gradient_hessian(&self, alpha: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        self.check_len(alpha)?;
        let n = self.n();
        let m = n - 2;
        let full = DVector::from_column_slice(alpha);
        let pa = &self.penalty * &full;
        let mut grad = DVector::zeros(m);
        let mut hess = self.free_penalty() * (-2.0 * self.lambda);
        for i in 0..m {
            let k = i + 1;
            let d1 = self.surface.eval(self.s[k], alpha[k], 0, 1)?;
            let d2 = self.surface.eval(self.s[k], alpha[k], 0, 2)?;
            grad[i] = d1 / n as f64 - 2.0 * self.lambda * pa[k];
            hess[(i, i)] += d2 / n as f64;
        }
        Ok((grad, hess))
    }

    /// Damped Newton ascent from α = 0.
    pub fn solve(&self, opts: &RidgeOptions) -> Result<RidgeSolution> {
        let n = self.n();
        let (dlo, dhi) = self.surface.d_range();
        let margin = 1e-9 * (dhi - dlo);
        let clip = |x: f64| x.clamp(dlo + margin, dhi - margin);

        let mut alpha = vec![0.0; n];
        let mut current = self.objective(&alpha)?;
        let mut trace = vec![current];
        let mut gradient_steps = 0;
        let mut stalled = false;
        let mut converged = false;
        let mut iterations = 0;
        let mut gnorm;
        loop {
            let (grad, hess) = self.gradient_hessian(&alpha)?;
            gnorm = grad.amax();
            if gnorm < opts.gradient_tolerance {
                converged = true;
                break;
            }
            if iterations >= opts.max_iterations {
                break;
            }
            let neg = -&hess;
            let step = match neg.clone().cholesky() {
                Some(chol) => chol.solve(&grad),
                None => {
                    gradient_steps += 1;
                    // initial gradient step moves at most a quarter of the d-range
                    &grad * (0.25 * (dhi - dlo) / gnorm)
                }
            };
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..=opts.max_halvings {
                let mut trial = alpha.clone();
                for i in 0..n - 2 {
                    trial[i + 1] = clip(alpha[i + 1] + t * step[i]);
                }
                let value = self.objective(&trial)?;
                if value >= current {
                    accepted = Some((trial, value));
                    break;
                }
                t *= 0.5;
            }
            iterations += 1;
            match accepted {
                Some((trial, value)) => {
                    let moved = trial != alpha;
                    alpha = trial;
                    current = value;
                    trace.push(current);
                    if !moved {
                        stalled = true;
                        break;
                    }
                }
                None if iterations == 1 => {
                    return Err(Error::Optimisation(format!(
                        "no ascent from the initial curve (gradient max-norm {gnorm:.3e})"
                    )));
                }
                None => {
                    stalled = true;
                    break;
                }
            }
        }
        Ok(RidgeSolution {
            s: self.s.clone(),
            alpha,
            lambda: self.lambda,
            objective_trace: trace,
            converged,
            iterations,
            gradient_norm: gnorm,
            gradient_steps,
            stalled,
        })
    }

    /// Global maximiser of M with every free α_k restricted to `levels`
    /// equally spaced values spanning the d-range, by dynamic programming
    /// over consecutive offset pairs. Returns the offsets and their M.
    pub fn exhaustive(&self, levels: usize) -> Result<(Vec<f64>, f64)> {
        let n = self.n();
        if n < 4 || levels < 2 {
            return Err(Error::invalid("exhaustive search needs at least 4 grid points and 2 levels"));
        }
        let (lo, hi) = self.surface.d_range();
        let d: Vec<f64> = (0..levels)
            .map(|l| lo + (hi - lo) * l as f64 / (levels - 1) as f64)
            .collect();
        let inv_n = 1.0 / n as f64;
        let mut data = vec![vec![0.0; levels]; n];
        for k in 1..n - 1 {
            for (l, &dl) in d.iter().enumerate() {
                data[k][l] = self.surface.value(self.s[k], dl)? * inv_n;
            }
        }
        let lam = self.lambda;
        let sq = |x: f64| x * x;
        let idx = |cur: usize, prev: usize| cur * levels + prev;

        // value[(α_k, α_{k−1})] = best partial objective through k
        let mut value = vec![f64::NEG_INFINITY; levels * levels];
        for a in 0..levels {
            for b in 0..levels {
                // α_0 = 0, α_1 = d[a], α_2 = d[b]
                value[idx(b, a)] = data[1][a] + data[2][b] - lam * (sq(-2.0 * d[a]) + sq(0.0 - 2.0 * d[a] + d[b]));
            }
        }
        let mut back: Vec<Vec<u16>> = Vec::with_capacity(n);
        for k in 3..n - 1 {
            let mut next = vec![f64::NEG_INFINITY; levels * levels];
            let mut arg = vec![0u16; levels * levels];
            for a in 0..levels {
                let row = &value[a * levels..(a + 1) * levels];
                for b in 0..levels {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_c = 0;
                    let base = d[b] - 2.0 * d[a];
                    for (c, &v) in row.iter().enumerate() {
                        let cand = v - lam * sq(d[c] + base);
                        if cand > best {
                            best = cand;
                            best_c = c;
                        }
                    }
                    next[idx(b, a)] = best + data[k][b];
                    arg[idx(b, a)] = best_c as u16;
                }
            }
            value = next;
            back.push(arg);
        }
        // closing rows involve α_{n−1} = 0
        let (mut best, mut state) = (f64::NEG_INFINITY, (0, 0));
        for a in 0..levels {
            for b in 0..levels {
                let v = value[idx(b, a)] - lam * (sq(d[a] - 2.0 * d[b]) + sq(d[b]));
                if v > best {
                    best = v;
                    state = (b, a);
                }
            }
        }
        let mut picks = vec![0usize; n];
        picks[n - 2] = state.0;
        picks[n - 3] = state.1;
        for k in (3..n - 1).rev() {
            let arg = &back[k - 3];
            picks[k - 2] = arg[idx(picks[k], picks[k - 1])] as usize;
        }
        let mut alpha = vec![0.0; n];
        for k in 1..n - 1 {
            alpha[k] = d[picks[k]];
        }
        let m = self.objective(&alpha)?;
        Ok((alpha, m))
    }
}

/// Solve on the grid and penalty given in `opts`.
pub fn solve(surface: &PSplineSurface, opts: &RidgeOptions) -> Result<RidgeSolution> {
    RidgeProblem::new(surface, opts.n_grid, opts.lambda)?.solve(opts)
}

/// Carry the ridge back onto the surface. The first and last grid points are
/// the landmarks; the rest are interpolated through the flattened mesh.
pub fn back_map(solution: &RidgeSolution, domain: &FlatDomain) -> Result<SurfaceCurve> {
    let path = domain.path().points();
    let n = solution.s.len();
    let mut points = Vec::with_capacity(n);
    let mut outside = Vec::new();
    for k in 0..n {
        let p = if k == 0 {
            Ok(path[0])
        } else if k == n - 1 {
            Ok(path[path.len() - 1])
        } else {
            domain.interpolate_to_3d(Point2::new(solution.s[k], solution.alpha[k]))
        };
        match p {
            Ok(p) => points.push(p),
            Err(Error::OutsideHull { .. }) => outside.push(k),
            Err(e) => return Err(e),
        }
    }
    if !outside.is_empty() {
        return Err(Error::BackMap { indices: outside });
    }
    SurfaceCurve::from_points(points)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::psplines::{fit_surface, Sample, SurfaceFitOptions};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// p-spline surface fitted to `f` sampled on a dense grid over
    /// [0, 10] × [−2, 2].
    pub(crate) fn surface_from(f: impl Fn(f64, f64) -> f64) -> PSplineSurface {
        let mut samples = Vec::new();
        for i in 0..41 {
            for j in 0..33 {
                let (s, d) = (i as f64 * 0.25, -2.0 + j as f64 * 0.125);
                samples.push(Sample { s, d, value: f(s, d) });
            }
        }
        fit_surface(&samples, (0.0, 10.0), (-2.0, 2.0), &SurfaceFitOptions::default()).unwrap()
    }

    pub(crate) fn sine_ridge(s: f64, d: f64) -> f64 {
        let c = 0.5 * (std::f64::consts::PI * s / 10.0).sin();
        (-(d - c).powi(2) / (2.0 * 0.4 * 0.4)).exp()
    }

    /// Objective recomputed by summing βᵢⱼ φᵢ φⱼ from full basis vectors.
    fn direct_objective(surface: &PSplineSurface, s: &[f64], alpha: &[f64], lambda: f64) -> f64 {
        let n = s.len();
        let mut data = 0.0;
        for k in 0..n {
            let bs = surface.s_basis.eval(s[k]).unwrap();
            let bd = surface.d_basis.eval(alpha[k]).unwrap();
            for i in 0..bs.len() {
                for j in 0..bd.len() {
                    data += surface.coefficients[(i, j)] * bs[i] * bd[j];
                }
            }
        }
        let mut pen = 0.0;
        for k in 0..n - 2 {
            pen += (alpha[k] - 2.0 * alpha[k + 1] + alpha[k + 2]).powi(2);
        }
        data / n as f64 - lambda * pen
    }

    fn random_alpha(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        let mut a: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect();
        a[0] = 0.0;
        a[n - 1] = 0.0;
        a
    }

    #[test]
    fn objective_at_zero_is_mean_strength() {
        let surf = surface_from(sine_ridge);
        let prob = RidgeProblem::new(&surf, 51, 0.5).unwrap();
        let zero = vec![0.0; 51];
        let mean: f64 = prob.grid().iter().map(|&s| surf.value(s, 0.0).unwrap()).sum::<f64>() / 51.0;
        assert!((prob.objective(&zero).unwrap() - mean).abs() < 1e-14);
    }

    #[test]
    fn objective_matches_direct_tensor_sum() {
        let surf = surface_from(sine_ridge);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for lambda in [0.0, 0.5, 3.0] {
            let prob = RidgeProblem::new(&surf, 51, lambda).unwrap();
            let a = random_alpha(&mut rng, 51);
            let m = prob.objective(&a).unwrap();
            assert!((m - direct_objective(&surf, prob.grid(), &a, lambda)).abs() < 1e-12);
        }
    }

    #[test]
    fn out_of_range_offset_is_an_error() {
        let surf = surface_from(sine_ridge);
        let prob = RidgeProblem::new(&surf, 11, 0.5).unwrap();
        let mut a = vec![0.0; 11];
        a[4] = 2.5;
        assert!(matches!(prob.objective(&a), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let surf = surface_from(sine_ridge);
        let prob = RidgeProblem::new(&surf, 51, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = 1e-6;
        for _ in 0..5 {
            let a = random_alpha(&mut rng, 51);
            let (g, hess) = prob.gradient_hessian(&a).unwrap();
            for i in 0..49 {
                let (mut p, mut m) = (a.clone(), a.clone());
                p[i + 1] += h;
                m[i + 1] -= h;
                let fd = (prob.objective(&p).unwrap() - prob.objective(&m).unwrap()) / (2.0 * h);
                assert!((g[i] - fd).abs() <= 1e-6 * g[i].abs().max(1e-4), "{} vs {}", g[i], fd);
            }
            let pfree = prob.free_penalty();
            for i in 0..49 {
                for j in 0..49 {
                    if i != j {
                        assert_eq!(hess[(i, j)], -2.0 * 0.5 * pfree[(i, j)]);
                    }
                }
            }
        }
    }

    #[test]
    fn penalty_only_gradient_is_exact() {
        let surf = surface_from(|_, _| 0.0);
        let prob = RidgeProblem::new(&surf, 21, 0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_alpha(&mut rng, 21);
        let (g, _) = prob.gradient_hessian(&a).unwrap();
        let pa = prob.penalty() * DVector::from_column_slice(&a);
        for i in 0..19 {
            assert!((g[i] + 2.0 * 0.7 * pa[i + 1]).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_valley_keeps_zero_curve() {
        let surf = surface_from(|_, d| (-d * d).exp());
        let sol = solve(&surf, &RidgeOptions::default()).unwrap();
        assert!(sol.converged);
        assert!(sol.alpha.iter().all(|a| a.abs() < 1e-9));
    }

    #[test]
    fn huge_penalty_pins_curve() {
        let surf = surface_from(sine_ridge);
        let sol = solve(&surf, &RidgeOptions { lambda: 1e6, ..Default::default() }).unwrap();
        let max = sol.alpha.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        assert!(max < 1e-3 * 4.0);
    }

    #[test]
    fn ascent_endpoints_and_convergence() {
        let surf = surface_from(sine_ridge);
        let sol = solve(&surf, &RidgeOptions::default()).unwrap();
        assert!(sol.converged, "{sol:?}");
        assert!(sol.gradient_norm < 1e-8);
        assert!(sol.objective_trace.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(sol.alpha[0].to_bits(), 0f64.to_bits());
        assert_eq!(sol.alpha[50].to_bits(), 0f64.to_bits());
    }

    #[test]
    fn newton_solution_tracks_exhaustive_search() {
        let surf = surface_from(sine_ridge);
        let prob = RidgeProblem::new(&surf, 51, 0.5).unwrap();
        let sol = prob.solve(&RidgeOptions::default()).unwrap();
        let (dp, m_dp) = prob.exhaustive(201).unwrap();
        for (a, b) in sol.alpha.iter().zip(&dp) {
            assert!((a - b).abs() < 0.05 * 4.0);
        }
        // the lattice optimum can never beat the continuous one
        assert!(m_dp <= sol.objective() + 1e-12);
    }

    #[test]
    fn exhaustive_search_is_exact_on_small_lattice() {
        // brute force over every lattice curve with 3 free points
        let surf = surface_from(sine_ridge);
        let prob = RidgeProblem::new(&surf, 5, 0.5).unwrap();
        let levels = 9;
        let (_, m_dp) = prob.exhaustive(levels).unwrap();
        let d: Vec<f64> = (0..levels).map(|l| -2.0 + 4.0 * l as f64 / 8.0).collect();
        let mut best = f64::NEG_INFINITY;
        for &x in &d {
            for &y in &d {
                for &z in &d {
                    best = best.max(prob.objective(&[0.0, x, y, z, 0.0]).unwrap());
                }
            }
        }
        assert!((best - m_dp).abs() < 1e-14);
    }

    fn plane_domain() -> FlatDomain {
        use crate::flatten::{flatten, FlattenOptions};
        use crate::refpath::{localize, plane_cut, RegionOptions};
        use crate::simlab::surfaces::height_field_rect;
        use nalgebra::Point3;
        let mesh = height_field_rect(41, 41, (-5.0, 5.0), (-5.0, 5.0), |x, y| 0.2 * x + 0.1 * y).unwrap();
        let l1 = mesh.closest_point(&Point3::new(-4.1, 0.3, 0.0)).point;
        let l2 = mesh.closest_point(&Point3::new(3.9, -0.2, 0.0)).point;
        let region = localize(&mesh, l1, l2, &RegionOptions::default()).unwrap();
        let cut = plane_cut(&region, 0.0).unwrap();
        let values = vec![0.0; region.mesh().vertex_count()];
        flatten(&region, &cut, &values, &FlattenOptions::default()).unwrap()
    }

    fn solution_with(s: Vec<f64>, alpha: Vec<f64>) -> RidgeSolution {
        RidgeSolution {
            s,
            alpha,
            lambda: 0.0,
            objective_trace: vec![],
            converged: true,
            iterations: 0,
            gradient_norm: 0.0,
            gradient_steps: 0,
            stalled: false,
        }
    }

    #[test]
    fn zero_offset_maps_onto_reference_path() {
        let dom = plane_domain();
        let n = 31;
        let s: Vec<f64> = (0..n).map(|k| dom.length() * k as f64 / (n - 1) as f64).collect();
        let curve = back_map(&solution_with(s.clone(), vec![0.0; n]), &dom).unwrap();
        let path = dom.path();
        assert_eq!(curve.points()[0], path.points()[0]);
        assert_eq!(curve.points()[n - 1], *path.points().last().unwrap());
        for (k, p) in curve.points().iter().enumerate() {
            assert!((p - path.point_at(s[k])).norm() < 1e-9, "k = {k}");
        }
    }

    #[test]
    fn offset_points_land_at_their_flat_coordinates() {
        let dom = plane_domain();
        let n = 21;
        let s: Vec<f64> = (0..n).map(|k| dom.length() * k as f64 / (n - 1) as f64).collect();
        let alpha: Vec<f64> = s.iter().map(|&t| 0.8 * (std::f64::consts::PI * t / dom.length()).sin()).collect();
        let curve = back_map(&solution_with(s.clone(), alpha.clone()), &dom).unwrap();
        for k in 1..n - 1 {
            let (ss, dd) = dom.map_point(&curve.points()[k]);
            assert!((ss - s[k]).abs() < 1e-9 && (dd - alpha[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn points_off_the_domain_are_reported() {
        let dom = plane_domain();
        let s = vec![0.0, 1.0, 2.0, 3.0, dom.length()];
        let alpha = vec![0.0, 50.0, 0.1, -60.0, 0.0];
        match back_map(&solution_with(s, alpha), &dom) {
            Err(Error::BackMap { indices }) => assert_eq!(indices, vec![1, 3]),
            other => panic!("unexpected {other:?}"),
        }
    }
}
