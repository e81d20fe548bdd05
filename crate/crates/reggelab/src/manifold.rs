//! Analytic Riemannian geometry on a single chart: metric field, Christoffel
//! symbols, geodesics (initial- and boundary-value problems), parallel
//! transport, curvature, and curvature integrals.
//!
//! A [`ChartManifold`] is a coordinate box with a smooth metric closure.
//! Periodic axes (tori, the azimuthal angle of a sphere chart) are handled by
//! working in the universal cover: path endpoints are lifted to the nearest
//! representative and the metric closure is evaluated through the wrap.

use crate::ode::{self, OdeOptions};
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;
use thiserror::Error;

pub type Point = DVector<f64>;
pub type MetricFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;
pub type ChristoffelFn = Arc<dyn Fn(&DVector<f64>) -> Vec<DMatrix<f64>> + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;

#[derive(Debug, Error)]
pub enum ManifoldError {
    #[error("point left the chart domain at {0:?}")]
    LeftDomain(Vec<f64>),
    #[error("point outside the chart domain: {0:?}")]
    OutOfDomain(Vec<f64>),
    #[error("ODE step failure at t={t}: {reason}")]
    StepFailure { t: f64, reason: String },
    #[error("shooting did not converge after {0} Newton steps (residual {1:.3e})")]
    NoConvergence(usize, f64),
    #[error("requested data outside the convex ball (norm {0:.6} vs hint {1:.6})")]
    OutOfConvexBall(f64, f64),
}

impl From<ode::StepFailure> for ManifoldError {
    fn from(e: ode::StepFailure) -> Self {
        ManifoldError::StepFailure {
            t: e.t,
            reason: e.reason,
        }
    }
}

/// Axis-aligned chart domain.
#[derive(Debug, Clone)]
pub struct DomainBox {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl DomainBox {
    pub fn contains(&self, x: &DVector<f64>, periodic: &[Option<f64>], slack: f64) -> bool {
        for i in 0..self.min.len() {
            if periodic[i].is_some() {
                continue;
            }
            if x[i] < self.min[i] - slack || x[i] > self.max[i] + slack {
                return false;
            }
        }
        true
    }

    pub fn scale(&self) -> f64 {
        self.min
            .iter()
            .zip(&self.max)
            .map(|(a, b)| b - a)
            .fold(0.0, f64::max)
    }
}

/// A tangent vector attached to a chart point.
#[derive(Debug, Clone)]
pub struct TangentVector {
    pub base: Point,
    pub components: DVector<f64>,
}

/// A linear map between two tangent spaces, produced by parallel transport
/// (smooth or polyhedral) or by differentials of maps between frames.
///
/// For smooth transports the matrix acts on chart components; polyhedral
/// transports (see the `regge` module) reuse the same container with the
/// matrix acting between the Euclidean frames of the two end simplices.
#[derive(Debug, Clone)]
pub struct FrameMap {
    pub source: Point,
    pub target: Point,
    pub matrix: DMatrix<f64>,
}

impl FrameMap {
    pub fn identity(x: &Point) -> Self {
        let n = x.len();
        FrameMap {
            source: x.clone(),
            target: x.clone(),
            matrix: DMatrix::identity(n, n),
        }
    }

    /// Largest violation of `g_target(Lu, Lv) = g_source(u, v)` over the
    /// orthonormality residual `L^T G_t L - G_s`.
    pub fn orthogonality_defect(&self, m: &ChartManifold) -> f64 {
        let gs = m.metric_at(&self.source);
        let gt = m.metric_at(&self.target);
        let r = self.matrix.transpose() * gt * &self.matrix - gs;
        r.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()))
    }
}

/// The full curvature tensor at a point, stored as `R^i_{jkl}` with the
/// convention `R(e_k, e_l) e_j = R^i_{jkl} e_i`.
#[derive(Debug, Clone)]
pub struct CurvatureTensor {
    pub base: Point,
    pub n: usize,
    comp: Vec<f64>,
    metric: DMatrix<f64>,
}

impl CurvatureTensor {
    #[inline]
    pub fn up(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let n = self.n;
        self.comp[((i * n + j) * n + k) * n + l]
    }

    /// Fully lowered `R_{ijkl} = g_im R^m_{jkl}`.
    pub fn lowered(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        (0..self.n).map(|m| self.metric[(i, m)] * self.up(m, j, k, l)).sum()
    }

    /// The curvature operator `w -> R(u, v) w` as a matrix on chart components.
    pub fn operator(&self, u: &DVector<f64>, v: &DVector<f64>) -> DMatrix<f64> {
        let n = self.n;
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    for l in 0..n {
                        acc += self.up(i, j, k, l) * u[k] * v[l];
                    }
                }
                m[(i, j)] = acc;
            }
        }
        m
    }

    /// Antisymmetry in the last two indices, as a max residual.
    pub fn antisymmetry_defect(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        worst = worst.max((self.up(i, j, k, l) + self.up(i, j, l, k)).abs());
                    }
                }
            }
        }
        worst
    }

    /// First Bianchi identity residual `R^i_{jkl} + R^i_{klj} + R^i_{ljk}`.
    pub fn bianchi_defect(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        worst = worst
                            .max((self.up(i, j, k, l) + self.up(i, k, l, j) + self.up(i, l, j, k)).abs());
                    }
                }
            }
        }
        worst
    }
}

/// Result of following a geodesic: endpoint (in cover coordinates, i.e. not
/// wrapped back into the fundamental domain) and arriving velocity.
#[derive(Debug, Clone)]
pub struct GeodesicEnd {
    pub point: Point,
    pub velocity: DVector<f64>,
}

/// An analytic Riemannian metric on a coordinate box.
pub struct ChartManifold {
    pub name: String,
    pub dim: usize,
    pub domain: DomainBox,
    /// Period per axis; `None` for non-periodic axes.
    pub periods: Vec<Option<f64>>,
    pub metric: MetricFn,
    pub christoffel: Option<ChristoffelFn>,
    /// Closed-form scalar curvature when available.
    pub scal: Option<ScalarFn>,
    /// User-supplied convexity radius: the trusted ball radius for geodesic
    /// boundary-value problems and barycenter solves.
    pub convexity_radius_hint: f64,
    /// Optional bound on the curvature operator norm.
    pub curvature_bound_hint: Option<f64>,
    /// Finite-difference step for metric derivatives.
    pub h_fd: f64,
    ode_opts: OdeOptions,
}

impl std::fmt::Debug for ChartManifold {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ChartManifold")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("domain", &self.domain)
            .field("periods", &self.periods)
            .field("convexity_radius_hint", &self.convexity_radius_hint)
            .finish()
    }
}

impl ChartManifold {
    pub fn new(
        name: impl Into<String>,
        domain: DomainBox,
        periods: Vec<Option<f64>>,
        metric: MetricFn,
        convexity_radius_hint: f64,
    ) -> Self {
        let dim = domain.min.len();
        let h_fd = 1e-5 * domain.scale().max(1.0);
        let m = Self {
            name: name.into(),
            dim,
            domain,
            periods,
            metric,
            christoffel: None,
            scal: None,
            convexity_radius_hint,
            curvature_bound_hint: None,
            h_fd,
            ode_opts: OdeOptions::default(),
        };
        m.spot_check_metric();
        m
    }

    pub fn with_christoffel(mut self, c: ChristoffelFn) -> Self {
        self.christoffel = Some(c);
        self
    }

    pub fn with_scal(mut self, s: ScalarFn) -> Self {
        self.scal = Some(s);
        self
    }

    pub fn with_curvature_bound(mut self, b: f64) -> Self {
        self.curvature_bound_hint = Some(b);
        self
    }

    /// Positive definiteness of the metric, sampled on a coarse grid.
    fn spot_check_metric(&self) {
        let n = self.dim;
        let steps = 3;
        let mut idx = vec![0usize; n];
        loop {
            let x = DVector::from_fn(n, |i, _| {
                let t = (idx[i] as f64 + 0.5) / steps as f64;
                self.domain.min[i] + t * (self.domain.max[i] - self.domain.min[i])
            });
            let g = (self.metric)(&x);
            let eig = g.symmetric_eigenvalues();
            let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(
                min > 0.0,
                "metric '{}' not positive definite at {:?} (min eig {min})",
                self.name,
                x.as_slice()
            );
            let mut carry = 0;
            while carry < n {
                idx[carry] += 1;
                if idx[carry] < steps {
                    break;
                }
                idx[carry] = 0;
                carry += 1;
            }
            if carry == n {
                break;
            }
        }
    }

    pub fn metric_at(&self, x: &Point) -> DMatrix<f64> {
        (self.metric)(x)
    }

    pub fn inner(&self, x: &Point, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        let g = self.metric_at(x);
        (u.transpose() * g * v)[(0, 0)]
    }

    pub fn norm(&self, x: &Point, u: &DVector<f64>) -> f64 {
        self.inner(x, u, u).max(0.0).sqrt()
    }

    /// Minimal-image difference `b - a`, wrapping periodic axes.
    pub fn wrap_diff(&self, a: &Point, b: &Point) -> DVector<f64> {
        DVector::from_fn(self.dim, |i, _| {
            let mut d = b[i] - a[i];
            if let Some(p) = self.periods[i] {
                d -= (d / p).round() * p;
            }
            d
        })
    }

    /// Wraps a point into the fundamental domain along periodic axes.
    pub fn wrap_point(&self, x: &Point) -> Point {
        DVector::from_fn(self.dim, |i, _| {
            if let Some(p) = self.periods[i] {
                let lo = self.domain.min[i];
                let mut v = (x[i] - lo).rem_euclid(p) + lo;
                if v >= lo + p {
                    v -= p;
                }
                v
            } else {
                x[i]
            }
        })
    }

    /// Lifts `p` to the representative nearest `reference`.
    pub fn lift_near(&self, reference: &Point, p: &Point) -> Point {
        reference + self.wrap_diff(reference, p)
    }

    pub fn check_in_domain(&self, x: &Point) -> Result<(), ManifoldError> {
        if self.domain.contains(x, &self.periods, 1e-9 * self.domain.scale()) {
            Ok(())
        } else {
            Err(ManifoldError::OutOfDomain(x.as_slice().to_vec()))
        }
    }

    /// Christoffel symbols `Gamma^i_{jk}` at `x`: the analytic closure when
    /// supplied, otherwise central finite differences of the metric.
    pub fn christoffel_at(&self, x: &Point) -> Result<Vec<DMatrix<f64>>, ManifoldError> {
        // Finite-difference stencils may poke slightly beyond the box; the
        // metric closures are formulas valid on a neighborhood, so only the
        // evaluation point itself is checked.
        self.check_in_domain(x)?;
        if let Some(c) = &self.christoffel {
            return Ok(c(x));
        }
        Ok(self.christoffel_fd(x))
    }

    /// Finite-difference Christoffels, also used to cross-check analytic ones.
    pub fn christoffel_fd(&self, x: &Point) -> Vec<DMatrix<f64>> {
        let n = self.dim;
        let h = self.h_fd;
        let g = self.metric_at(x);
        let ginv = g.clone().try_inverse().expect("metric invertible");
        // dg[k] = d g / d x^k
        let mut dg = Vec::with_capacity(n);
        for k in 0..n {
            let mut xp = x.clone();
            xp[k] += h;
            let mut xm = x.clone();
            xm[k] -= h;
            dg.push(((self.metric)(&xp) - (self.metric)(&xm)) / (2.0 * h));
        }
        let mut gamma = vec![DMatrix::zeros(n, n); n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut acc = 0.0;
                    for l in 0..n {
                        acc += ginv[(i, l)] * (dg[j][(l, k)] + dg[k][(l, j)] - dg[l][(j, k)]);
                    }
                    gamma[i][(j, k)] = 0.5 * acc;
                }
            }
        }
        gamma
    }

    #[inline]
    fn gamma_quadratic(gamma: &[DMatrix<f64>], a: &[f64], b: &[f64], out: &mut [f64]) {
        let n = gamma.len();
        for i in 0..n {
            let gi = &gamma[i];
            let mut acc = 0.0;
            for j in 0..n {
                for k in 0..n {
                    acc += gi[(j, k)] * a[j] * b[k];
                }
            }
            out[i] = acc;
        }
    }

    fn gamma_at_slice(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        let xv = DVector::from_column_slice(x);
        if let Some(c) = &self.christoffel {
            c(&xv)
        } else {
            self.christoffel_fd(&xv)
        }
    }

    /// Follows the geodesic with initial point `x` and initial velocity `v`
    /// for unit time. Fails with `LeftDomain` if the path exits the chart box.
    pub fn exp_map(&self, x: &Point, v: &DVector<f64>) -> Result<GeodesicEnd, ManifoldError> {
        let n = self.dim;
        self.check_in_domain(x)?;
        let mut y = vec![0.0; 2 * n];
        y[..n].copy_from_slice(x.as_slice());
        y[n..].copy_from_slice(v.as_slice());
        let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
            let gamma = self.gamma_at_slice(&y[..n]);
            dy[..n].copy_from_slice(&y[n..]);
            let mut acc = vec![0.0; n];
            Self::gamma_quadratic(&gamma, &y[n..], &y[n..], &mut acc);
            for i in 0..n {
                dy[n + i] = -acc[i];
            }
        };
        // Integrate in a few checkpoints so domain exits are caught.
        let segments = 8;
        for s in 0..segments {
            let t0 = s as f64 / segments as f64;
            let t1 = (s + 1) as f64 / segments as f64;
            ode::integrate(&rhs, t0, t1, &mut y, &self.ode_opts)?;
            let p = DVector::from_column_slice(&y[..n]);
            if !self.domain.contains(&p, &self.periods, 1e-9 * self.domain.scale()) {
                return Err(ManifoldError::LeftDomain(p.as_slice().to_vec()));
            }
        }
        Ok(GeodesicEnd {
            point: DVector::from_column_slice(&y[..n]),
            velocity: DVector::from_column_slice(&y[n..]),
        })
    }

    /// Joint integration of a geodesic and the parallel transport of a set of
    /// vectors (columns of `w`) along it. Returns the endpoint, arriving
    /// velocity and the transported columns.
    pub fn transport_along_geodesic(
        &self,
        x: &Point,
        v: &DVector<f64>,
        w: &DMatrix<f64>,
    ) -> Result<(GeodesicEnd, DMatrix<f64>), ManifoldError> {
        let n = self.dim;
        let cols = w.ncols();
        self.check_in_domain(x)?;
        let mut y = vec![0.0; 2 * n + n * cols];
        y[..n].copy_from_slice(x.as_slice());
        y[n..2 * n].copy_from_slice(v.as_slice());
        for c in 0..cols {
            for i in 0..n {
                y[2 * n + c * n + i] = w[(i, c)];
            }
        }
        let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
            let gamma = self.gamma_at_slice(&y[..n]);
            let vel = &y[n..2 * n];
            dy[..n].copy_from_slice(vel);
            let mut acc = vec![0.0; n];
            Self::gamma_quadratic(&gamma, vel, vel, &mut acc);
            for i in 0..n {
                dy[n + i] = -acc[i];
            }
            for c in 0..cols {
                let wc = &y[2 * n + c * n..2 * n + (c + 1) * n];
                Self::gamma_quadratic(&gamma, vel, wc, &mut acc);
                for i in 0..n {
                    dy[2 * n + c * n + i] = -acc[i];
                }
            }
        };
        ode::integrate(&rhs, 0.0, 1.0, &mut y, &self.ode_opts)?;
        let end = GeodesicEnd {
            point: DVector::from_column_slice(&y[..n]),
            velocity: DVector::from_column_slice(&y[n..2 * n]),
        };
        if !self
            .domain
            .contains(&end.point, &self.periods, 1e-9 * self.domain.scale())
        {
            return Err(ManifoldError::LeftDomain(end.point.as_slice().to_vec()));
        }
        let mut out = DMatrix::zeros(n, cols);
        for c in 0..cols {
            for i in 0..n {
                out[(i, c)] = y[2 * n + c * n + i];
            }
        }
        Ok((end, out))
    }

    /// Chart polyline along the geodesic with initial data (x, v): one
    /// integration with checkpoints at uniform parameter values, continuous
    /// in the cover.
    pub fn geodesic_polyline(
        &self,
        x: &Point,
        v: &DVector<f64>,
        samples: usize,
    ) -> Result<Vec<Point>, ManifoldError> {
        let n = self.dim;
        self.check_in_domain(x)?;
        let mut y = vec![0.0; 2 * n];
        y[..n].copy_from_slice(x.as_slice());
        y[n..].copy_from_slice(v.as_slice());
        let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
            let gamma = self.gamma_at_slice(&y[..n]);
            dy[..n].copy_from_slice(&y[n..]);
            let mut acc = vec![0.0; n];
            Self::gamma_quadratic(&gamma, &y[n..], &y[n..], &mut acc);
            for i in 0..n {
                dy[n + i] = -acc[i];
            }
        };
        let mut out = Vec::with_capacity(samples + 1);
        out.push(x.clone());
        for s in 0..samples {
            let t0 = s as f64 / samples as f64;
            let t1 = (s + 1) as f64 / samples as f64;
            ode::integrate(&rhs, t0, t1, &mut y, &self.ode_opts)?;
            let p = DVector::from_column_slice(&y[..n]);
            if !self
                .domain
                .contains(&p, &self.periods, 1e-9 * self.domain.scale())
            {
                return Err(ManifoldError::LeftDomain(p.as_slice().to_vec()));
            }
            out.push(p);
        }
        Ok(out)
    }

    /// Inverse exponential map by shooting: damped Newton on the initial
    /// velocity, starting from the chart straight line, with the Jacobian by
    /// finite differences of `exp_map`.
    pub fn log_map(&self, x: &Point, y: &Point) -> Result<TangentVector, ManifoldError> {
        self.log_map_warm(x, y, None)
    }

    pub fn log_map_warm(
        &self,
        x: &Point,
        y: &Point,
        warm: Option<&DVector<f64>>,
    ) -> Result<TangentVector, ManifoldError> {
        // Candidate cover lifts of the target. Near half a period the
        // minimal-image choice is ambiguous and may name the endpoint of a
        // longer, wound geodesic; in that zone both lifts are tried and the
        // shortest converged solution wins.
        let base = self.wrap_diff(x, y);
        let mut lift_choices: Vec<Vec<f64>> = vec![vec![]];
        for i in 0..self.dim {
            let mut next = Vec::new();
            let mut opts = vec![base[i]];
            if let Some(p) = self.periods[i] {
                if base[i].abs() > 0.35 * p {
                    opts.push(base[i] - base[i].signum() * p);
                }
            }
            for prefix in &lift_choices {
                for &o in &opts {
                    let mut v = prefix.clone();
                    v.push(o);
                    next.push(v);
                }
            }
            lift_choices = next;
        }
        let mut best: Option<TangentVector> = None;
        let mut last_err = ManifoldError::NoConvergence(0, f64::INFINITY);
        for delta in &lift_choices {
            let target = x + DVector::from_column_slice(delta);
            match self.solve_lift(x, &target, warm) {
                Ok(t) => {
                    let speed = self.norm(x, &t.components);
                    let better = match &best {
                        Some(b) => speed < self.norm(x, &b.components),
                        None => true,
                    };
                    if better {
                        best = Some(t);
                    }
                }
                Err(e) => last_err = e,
            }
        }
        best.ok_or(last_err)
    }

    /// Shooting toward one explicit cover lift, with a continuation fallback
    /// when the geodesic strays far from the chart straight line (e.g. near a
    /// coordinate pole).
    fn solve_lift(
        &self,
        x: &Point,
        target: &Point,
        warm: Option<&DVector<f64>>,
    ) -> Result<TangentVector, ManifoldError> {
        match self.log_newton(x, target, warm) {
            Ok(v) => Ok(v),
            Err(ManifoldError::NoConvergence(..)) => {
                let mut v: Option<DVector<f64>> = warm.cloned();
                for stages in [4usize, 12] {
                    let mut ok = true;
                    v = warm.cloned();
                    for s in 1..=stages {
                        let frac = s as f64 / stages as f64;
                        let inter = x + frac * (target - x);
                        match self.log_newton(x, &inter, v.as_ref()) {
                            Ok(t) => v = Some(t.components),
                            Err(_) => {
                                ok = false;
                                break;
                            }
                        }
                    }
                    if ok {
                        if let Some(vv) = v.as_ref() {
                            if let Ok(t) = self.log_newton(x, target, Some(vv)) {
                                return Ok(t);
                            }
                        }
                    }
                }
                self.log_newton(x, target, v.as_ref())
            }
            Err(e) => Err(e),
        }
    }

    /// Damped Newton shooting toward an explicit cover target.
    fn log_newton(
        &self,
        x: &Point,
        target_cover: &Point,
        warm: Option<&DVector<f64>>,
    ) -> Result<TangentVector, ManifoldError> {
        let n = self.dim;
        let target = target_cover.clone();
        let chart_gap = (&target - x).norm();
        let tol = 1e-12 * (1.0 + chart_gap);
        // Endpoint noise of the adaptive integrator bounds what the residual
        // can reliably resolve.
        let noise_floor = 3e-9 * (1.0 + chart_gap);
        let mut v = match warm {
            Some(w) => w.clone(),
            None => &target - x,
        };
        let mut residual = self.exp_map(x, &v)?.point - &target;
        let mut rnorm = residual.norm();
        let max_iter = 50;
        let mut best_v = v.clone();
        let mut best_r = rnorm;
        let mut stale = 0;
        for _ in 0..max_iter {
            if rnorm <= tol {
                break;
            }
            let hj = 1e-7 * (1.0 + v.norm());
            let mut jac = DMatrix::zeros(n, n);
            for k in 0..n {
                let mut vp = v.clone();
                vp[k] += hj;
                let rp = self.exp_map(x, &vp)?.point - &target;
                for i in 0..n {
                    jac[(i, k)] = (rp[i] - residual[i]) / hj;
                }
            }
            let delta = jac
                .lu()
                .solve(&residual)
                .ok_or(ManifoldError::NoConvergence(max_iter, rnorm))?;
            if rnorm < 1e-6 * (1.0 + chart_gap) {
                // Local phase: plain Newton steps; residual decreases are at
                // the integrator noise level, so no line search.
                v -= &delta;
                residual = self.exp_map(x, &v)?.point - &target;
                rnorm = residual.norm();
                if rnorm < best_r {
                    best_v = v.clone();
                    best_r = rnorm;
                    stale = 0;
                } else {
                    stale += 1;
                    if stale >= 3 {
                        break;
                    }
                }
            } else {
                let mut step = 1.0;
                let mut improved = false;
                for _ in 0..12 {
                    let vt = &v - step * &delta;
                    if let Ok(end) = self.exp_map(x, &vt) {
                        let rt = end.point - &target;
                        let rtn = rt.norm();
                        if rtn < rnorm {
                            v = vt;
                            residual = rt;
                            rnorm = rtn;
                            improved = true;
                            break;
                        }
                    }
                    step *= 0.5;
                }
                if improved {
                    if rnorm < best_r {
                        best_v = v.clone();
                        best_r = rnorm;
                    }
                } else {
                    break;
                }
            }
        }
        if best_r > tol.max(noise_floor) {
            return Err(ManifoldError::NoConvergence(max_iter, best_r));
        }
        let v = best_v;
        let speed = self.norm(x, &v);
        // Minimality guard: any chart path bounds the distance above, so a
        // solution clearly longer than the straight chart segment is a wound,
        // non-minimal geodesic; report it as a failed solve so callers retry.
        // The straight segment itself can BE the geodesic, so the slack must
        // dominate the quadrature error of the length estimate; windings are
        // long by half-period scales, far above 5 percent.
        let line_len = self.chart_segment_length(x, &target, 64);
        if speed > line_len * 1.05 + 1e-9 {
            return Err(ManifoldError::NoConvergence(max_iter, speed - line_len));
        }
        if speed > self.convexity_radius_hint * (1.0 + 1e-9) {
            return Err(ManifoldError::OutOfConvexBall(
                speed,
                self.convexity_radius_hint,
            ));
        }
        Ok(TangentVector {
            base: x.clone(),
            components: v,
        })
    }

    /// g-length of the straight chart segment from `a` to `b` (trapezoid rule).
    fn chart_segment_length(&self, a: &Point, b: &Point, samples: usize) -> f64 {
        let d = b - a;
        let mut acc = 0.0;
        for s in 0..samples {
            let t = (s as f64 + 0.5) / samples as f64;
            let xt = a + t * &d;
            acc += self.norm(&xt, &d) / samples as f64;
        }
        acc
    }

    /// Geodesic distance inside the convex ball: the g-norm of the log.
    pub fn distance(&self, x: &Point, y: &Point) -> Result<f64, ManifoldError> {
        let l = self.log_map(x, y)?;
        Ok(self.norm(x, &l.components))
    }

    pub fn distance_warm(
        &self,
        x: &Point,
        y: &Point,
        warm: Option<&DVector<f64>>,
    ) -> Result<(f64, DVector<f64>), ManifoldError> {
        let l = self.log_map_warm(x, y, warm)?;
        Ok((self.norm(x, &l.components), l.components))
    }

    /// Parallel transport of the full frame along a polyline given in cover
    /// coordinates (consecutive points must be nearest lifts of each other).
    pub fn parallel_transport_polyline(
        &self,
        path: &[Point],
    ) -> Result<FrameMap, ManifoldError> {
        let n = self.dim;
        assert!(path.len() >= 2, "need at least two path points");
        let mut frame = DMatrix::<f64>::identity(n, n);
        let mut y = vec![0.0; n * n];
        for seg in path.windows(2) {
            let a = &seg[0];
            let b = &seg[1];
            let d = b - a;
            if d.norm() == 0.0 {
                continue;
            }
            for c in 0..n {
                for i in 0..n {
                    y[c * n + i] = frame[(i, c)];
                }
            }
            let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
                let xs: Vec<f64> = (0..n).map(|i| a[i] + t * d[i]).collect();
                let gamma = self.gamma_at_slice(&xs);
                let mut acc = vec![0.0; n];
                let dv: Vec<f64> = (0..n).map(|i| d[i]).collect();
                for c in 0..n {
                    Self::gamma_quadratic(&gamma, &dv, &y[c * n..(c + 1) * n], &mut acc);
                    for i in 0..n {
                        dy[c * n + i] = -acc[i];
                    }
                }
            };
            ode::integrate(&rhs, 0.0, 1.0, &mut y, &self.ode_opts)?;
            for c in 0..n {
                for i in 0..n {
                    frame[(i, c)] = y[c * n + i];
                }
            }
        }
        Ok(FrameMap {
            source: path[0].clone(),
            target: path[path.len() - 1].clone(),
            matrix: frame,
        })
    }

    /// Samples a parametric curve into a cover-coordinate polyline, unwrapping
    /// periodic axes for continuity, then transports along it.
    pub fn parallel_transport_curve<F>(
        &self,
        curve: F,
        samples: usize,
    ) -> Result<FrameMap, ManifoldError>
    where
        F: Fn(f64) -> Point,
    {
        let path = self.sample_curve(curve, samples);
        self.parallel_transport_polyline(&path)
    }

    /// Fine polyline through a parametric curve, continuous in the cover.
    pub fn sample_curve<F>(&self, curve: F, samples: usize) -> Vec<Point>
    where
        F: Fn(f64) -> Point,
    {
        let mut path = Vec::with_capacity(samples + 1);
        let mut prev = curve(0.0);
        path.push(prev.clone());
        for s in 1..=samples {
            let t = s as f64 / samples as f64;
            let raw = curve(t);
            let lifted = self.lift_near(&prev, &raw);
            path.push(lifted.clone());
            prev = lifted;
        }
        path
    }

    /// Transports `v` along `curve` and returns the resulting vector.
    pub fn transport_vector<F>(
        &self,
        curve: F,
        samples: usize,
        v: &DVector<f64>,
    ) -> Result<DVector<f64>, ManifoldError>
    where
        F: Fn(f64) -> Point,
    {
        let fm = self.parallel_transport_curve(curve, samples)?;
        Ok(&fm.matrix * v)
    }

    /// Curvature tensor at `x` by differentiating the Christoffel field.
    pub fn curvature_at(&self, x: &Point) -> Result<CurvatureTensor, ManifoldError> {
        let n = self.dim;
        // Differentiating analytic Christoffels has no finite-difference
        // noise floor, so a small step is accurate; the nested-FD fallback
        // needs a larger one to stay above the metric-FD noise.
        let h = if self.christoffel.is_some() {
            self.h_fd
        } else {
            10.0 * self.h_fd
        };
        self.check_in_domain(x)?;
        let gamma0 = self.gamma_at_slice(x.as_slice());
        // dgamma[k][i][(j,l)] = d Gamma^i_{jl} / dx^k
        let mut dgamma = Vec::with_capacity(n);
        for k in 0..n {
            let mut xp = x.clone();
            xp[k] += h;
            let mut xm = x.clone();
            xm[k] -= h;
            let gp = self.gamma_at_slice(xp.as_slice());
            let gm = self.gamma_at_slice(xm.as_slice());
            let d: Vec<DMatrix<f64>> = gp
                .iter()
                .zip(&gm)
                .map(|(p, m)| (p - m) / (2.0 * h))
                .collect();
            dgamma.push(d);
        }
        let mut comp = vec![0.0; n * n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        // R^i_{jkl} = d_k G^i_{lj} - d_l G^i_{kj}
                        //           + G^i_{km} G^m_{lj} - G^i_{lm} G^m_{kj}
                        let mut r = dgamma[k][i][(l, j)] - dgamma[l][i][(k, j)];
                        for m in 0..n {
                            r += gamma0[i][(k, m)] * gamma0[m][(l, j)]
                                - gamma0[i][(l, m)] * gamma0[m][(k, j)];
                        }
                        comp[((i * n + j) * n + k) * n + l] = r;
                    }
                }
            }
        }
        Ok(CurvatureTensor {
            base: x.clone(),
            n,
            comp,
            metric: self.metric_at(x),
        })
    }

    /// Scalar curvature, normalized so the round sphere of radius R has
    /// `scal = n(n-1)/R^2`. Uses the closed form when the chart provides one.
    pub fn scalar_curvature(&self, x: &Point) -> Result<f64, ManifoldError> {
        if let Some(s) = &self.scal {
            return Ok(s(x));
        }
        let r = self.curvature_at(x)?;
        let g = self.metric_at(x);
        let ginv = g.try_inverse().expect("metric invertible");
        let n = self.dim;
        let mut scal = 0.0;
        for j in 0..n {
            for l in 0..n {
                let mut ric = 0.0;
                for k in 0..n {
                    ric += r.up(k, j, k, l);
                }
                scal += ginv[(j, l)] * ric;
            }
        }
        Ok(scal)
    }

    /// Integral of the scalar curvature against the Riemannian volume over a
    /// chart box, by tensor-product Gauss-Legendre quadrature refined until
    /// the relative change drops below 1e-6.
    pub fn integrate_scalar(&self, lo: &[f64], hi: &[f64]) -> Result<f64, ManifoldError> {
        let f = |x: &Point| -> Result<f64, ManifoldError> {
            let s = self.scalar_curvature(x)?;
            let g = self.metric_at(x);
            Ok(s * g.determinant().max(0.0).sqrt())
        };
        let mut order = 8;
        let mut prev = self.tensor_quadrature(lo, hi, order, &f)?;
        loop {
            order *= 2;
            let next = self.tensor_quadrature(lo, hi, order, &f)?;
            let denom = next.abs().max(1e-9);
            if (next - prev).abs() / denom < 1e-6 || order >= 128 {
                return Ok(next);
            }
            prev = next;
        }
    }

    /// Tensor-product Gauss-Legendre quadrature of an arbitrary integrand.
    pub fn tensor_quadrature<F>(
        &self,
        lo: &[f64],
        hi: &[f64],
        order: usize,
        f: &F,
    ) -> Result<f64, ManifoldError>
    where
        F: Fn(&Point) -> Result<f64, ManifoldError>,
    {
        let n = self.dim;
        let (nodes, weights) = gauss_legendre(order);
        let mut idx = vec![0usize; n];
        let mut acc = 0.0;
        loop {
            let mut w = 1.0;
            let x = DVector::from_fn(n, |i, _| {
                w *= weights[idx[i]] * 0.5 * (hi[i] - lo[i]);
                lo[i] + 0.5 * (hi[i] - lo[i]) * (nodes[idx[i]] + 1.0)
            });
            acc += w * f(&x)?;
            let mut carry = 0;
            while carry < n {
                idx[carry] += 1;
                if idx[carry] < order {
                    break;
                }
                idx[carry] = 0;
                carry += 1;
            }
            if carry == n {
                break;
            }
        }
        Ok(acc)
    }

    /// Jacobi-field defect `|P_s^{-1} d exp_x(su)(w) - w|_g`, measuring how far
    /// the differential of exp is from parallel transport at radius `|su|`.
    pub fn jacobi_defect(
        &self,
        x: &Point,
        u: &DVector<f64>,
        w: &DVector<f64>,
        s: f64,
    ) -> Result<f64, ManifoldError> {
        let su = s * u;
        let eps = 1e-6 / w.norm().max(1e-9);
        let plus = self.exp_map(x, &(&su + eps * w))?.point;
        let minus = self.exp_map(x, &(&su - eps * w))?.point;
        let dexp = (plus - minus) / (2.0 * eps);
        // Transport an identity frame along the geodesic and pull dexp back.
        let n = self.dim;
        let (_, frame) = self.transport_along_geodesic(x, &su, &DMatrix::identity(n, n))?;
        let pulled = frame
            .lu()
            .solve(&dexp)
            .ok_or(ManifoldError::NoConvergence(0, 0.0))?;
        Ok(self.norm(x, &(pulled - w)))
    }

    /// A g-orthonormal basis of the tangent space at `x` (columns).
    pub fn orthonormal_basis(&self, x: &Point) -> DMatrix<f64> {
        let g = self.metric_at(x);
        let chol = g.cholesky().expect("metric positive definite");
        let l_inv_t = chol
            .l()
            .transpose()
            .try_inverse()
            .expect("cholesky invertible");
        l_inv_t
    }

    /// Operator norm of a chart-components linear map `T_x -> T_y`, measured
    /// in the g-norms at the two base points.
    pub fn op_norm_g(&self, source: &Point, target: &Point, m: &DMatrix<f64>) -> f64 {
        let gx = self.metric_at(source);
        let gy = self.metric_at(target);
        let lx = gx.cholesky().expect("pd").l();
        let ly = gy.cholesky().expect("pd").l();
        let lx_inv_t = lx.transpose().try_inverse().expect("invertible");
        let a = ly.transpose() * m * lx_inv_t;
        a.svd(false, false).singular_values[0]
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on the
/// Legendre polynomial.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}
