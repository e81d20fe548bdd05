//! The convergence experiment: build a polyhedral approximation per level,
//! tabulate the Regge sum against the scalar-curvature integral, and track
//! deficits and the smooth-versus-polyhedral transport gap.

use super::catalog;
use super::config::ExperimentConfig;
use super::HarnessError;
use crate::holonomy;
use crate::manifold::{ChartManifold, Point};
use crate::numutil::fmt17;
use crate::polyhedron::{self, Polyhedron};
use crate::regge;
use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;
use std::time::Instant;

/// One row of the convergence table.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub level: usize,
    pub e: u32,
    pub rho: f64,
    pub bones_in_region: usize,
    pub regge_sum: f64,
    pub integral_scal: f64,
    pub ratio: f64,
    pub transport_gap: f64,
    pub max_abs_deficit: f64,
    pub wallclock: f64,
}

pub struct ConvergenceOutcome {
    pub rows: Vec<ConvergenceRow>,
    /// Per-level failures (level label, message); rows before the failure are
    /// still emitted.
    pub errors: Vec<(u32, String)>,
}

/// Region membership with periodic wrapping: the box may be given in
/// unwrapped coordinates (e.g. [-pi/2, pi/2] on a [0, 2 pi) axis).
pub fn region_contains(m: &ChartManifold, min: &[f64], max: &[f64], p: &Point) -> bool {
    for i in 0..m.dim {
        let lo = min[i];
        let hi = max[i];
        let x = p[i];
        match m.periods[i] {
            Some(period) => {
                let w = (x - lo).rem_euclid(period);
                if w > hi - lo + 1e-12 {
                    return false;
                }
            }
            None => {
                if x < lo - 1e-12 || x > hi + 1e-12 {
                    return false;
                }
            }
        }
    }
    true
}

/// A geodesic with precomputed chart polyline, reusable across levels.
pub struct SeededGeodesic {
    pub start: Point,
    pub velocity: DVector<f64>,
    pub polyline: Vec<Point>,
}

impl SeededGeodesic {
    /// Piecewise-linear chart interpolation of the polyline.
    pub fn curve(&self) -> impl Fn(f64) -> Point + Copy + '_ {
        move |t: f64| {
            let n = self.polyline.len() - 1;
            let x = t.clamp(0.0, 1.0) * n as f64;
            let i = (x.floor() as usize).min(n - 1);
            let f = x - i as f64;
            &self.polyline[i] * (1.0 - f) + &self.polyline[i + 1] * f
        }
    }
}

/// Builds `count` geodesics with seeded starts and directions inside a safe
/// band of the chart (the experiment region when one is given).
pub fn seeded_geodesics(
    m: &Arc<ChartManifold>,
    region: Option<(&[f64], &[f64])>,
    count: usize,
    seed: u64,
    length: f64,
    samples: usize,
) -> Result<Vec<SeededGeodesic>, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
    let n = m.dim;
    let (lo, hi): (Vec<f64>, Vec<f64>) = match region {
        Some((a, b)) => (a.to_vec(), b.to_vec()),
        None => {
            let mut lo = m.domain.min.clone();
            let mut hi = m.domain.max.clone();
            for i in 0..n {
                if m.periods[i].is_none() {
                    let span = hi[i] - lo[i];
                    lo[i] += 0.25 * span;
                    hi[i] -= 0.25 * span;
                }
            }
            (lo, hi)
        }
    };
    let length = if length > 0.0 {
        length
    } else {
        0.4 * m.convexity_radius_hint
    };
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > 200 * count {
            return Err(HarnessError::Config(
                "could not seed geodesics inside the region".into(),
            ));
        }
        let start = DVector::from_fn(n, |i, _| rng.gen_range(lo[i]..hi[i]));
        let dir = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0f64));
        let g = m.norm(&start, &dir);
        if g < 1e-6 {
            continue;
        }
        let v = dir * (length / g);
        match m.geodesic_polyline(&start, &v, samples) {
            Ok(polyline) => out.push(SeededGeodesic {
                start,
                velocity: v,
                polyline,
            }),
            Err(_) => continue,
        }
    }
    Ok(out)
}

/// Runs the full experiment. Levels are built incrementally when each level
/// is a power-of-two multiple of the previous one (warm refinement);
/// otherwise each level rebuilds from the base.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<ConvergenceOutcome, HarnessError> {
    super::init_threads();
    let m = catalog::catalog(&cfg.manifold.name, &cfg.manifold.params)?;
    let base = catalog::base_complex(&cfg.base_complex, &m)?;
    let region = cfg
        .region
        .as_ref()
        .map(|r| (r.min.clone(), r.max.clone()));
    let integral_scal = match &region {
        Some((lo, hi)) => m.integrate_scalar(lo, hi)?,
        None => m.integrate_scalar(&m.domain.min.clone(), &m.domain.max.clone())?,
    };
    let geodesics = seeded_geodesics(
        &m,
        region.as_ref().map(|(a, b)| (a.as_slice(), b.as_slice())),
        cfg.tolerances.geodesic_count,
        cfg.seed,
        cfg.tolerances.geodesic_length,
        cfg.tolerances.trace_samples,
    )?;
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    let mut current: Option<(u32, Polyhedron)> = None;
    for (li, &e) in cfg.levels.iter().enumerate() {
        let t0 = Instant::now();
        let built = match &current {
            Some((prev_e, poly)) if e % prev_e == 0 && (e / prev_e).is_power_of_two() => {
                let mut steps = e / prev_e;
                let mut work: Option<Polyhedron> = None;
                let mut err = None;
                while steps > 1 {
                    let source = work.as_ref().unwrap_or(poly);
                    match polyhedron::refine_once(source) {
                        Ok(next) => work = Some(next),
                        Err(x) => {
                            err = Some(x);
                            break;
                        }
                    }
                    steps /= 2;
                }
                match (work, err) {
                    (Some(w), None) => Ok(w),
                    (_, Some(x)) => Err(x),
                    _ => unreachable!("refinement steps"),
                }
            }
            _ => polyhedron::build_approximation(m.clone(), &base, e),
        };
        let poly = match built {
            Ok(p) => p,
            Err(err) => {
                errors.push((e, err.to_string()));
                continue;
            }
        };
        let level_result = (|| -> Result<ConvergenceRow, HarnessError> {
            let records = regge::deficit_table(&poly)?;
            let region_pred: Option<Box<dyn Fn(&Point) -> bool + Sync>> =
                region.as_ref().map(|(lo, hi)| {
                    let (lo, hi) = (lo.clone(), hi.clone());
                    let mm = m.clone();
                    Box::new(move |p: &Point| region_contains(&mm, &lo, &hi, p))
                        as Box<dyn Fn(&Point) -> bool + Sync>
                });
            let pred_ref: Option<&(dyn Fn(&Point) -> bool + Sync)> =
                region_pred.as_ref().map(|b| b.as_ref());
            let regge_sum = regge::regge_scalar(&records, &poly, pred_ref);
            let mut bones_in_region = 0usize;
            let mut max_abs_deficit = 0.0f64;
            for r in &records {
                let inside = match pred_ref {
                    Some(f) => f(&poly.face_centroid_chart(&r.bone.vertices)),
                    None => true,
                };
                if inside {
                    bones_in_region += 1;
                    max_abs_deficit = max_abs_deficit.max(r.alpha.abs());
                }
            }
            let mut transport_gap = 0.0f64;
            for geo in &geodesics {
                let cmp = holonomy::compare_transport(
                    &m,
                    &poly,
                    geo.curve(),
                    cfg.tolerances.trace_samples,
                )?;
                transport_gap = transport_gap.max(cmp.gap);
            }
            let ratio = if integral_scal.abs() > 1e-14 {
                regge_sum / integral_scal
            } else {
                f64::NAN
            };
            Ok(ConvergenceRow {
                level: li,
                e,
                rho: poly.mesh_rho,
                bones_in_region,
                regge_sum,
                integral_scal,
                ratio,
                transport_gap,
                max_abs_deficit,
                wallclock: t0.elapsed().as_secs_f64(),
            })
        })();
        match level_result {
            Ok(row) => rows.push(row),
            Err(err) => errors.push((e, err.to_string())),
        }
        current = Some((e, poly));
    }
    Ok(ConvergenceOutcome { rows, errors })
}

/// Versioned metadata header plus CSV rows with 17-significant-digit values.
pub fn convergence_csv(cfg: &ExperimentConfig, outcome: &ConvergenceOutcome) -> String {
    let mut s = String::new();
    s.push_str("# reggelab-converge v1\n");
    s.push_str(&format!("# manifold = {}\n", cfg.manifold.name));
    let mut keys: Vec<&String> = cfg.manifold.params.keys().collect();
    keys.sort();
    for k in keys {
        s.push_str(&format!("# param {} = {}\n", k, fmt17(cfg.manifold.params[k])));
    }
    s.push_str(&format!("# base_complex = {}\n", cfg.base_complex));
    s.push_str(&format!("# seed = {}\n", cfg.seed));
    if let Some(r) = &cfg.region {
        let mins: Vec<String> = r.min.iter().map(|&v| fmt17(v)).collect();
        let maxs: Vec<String> = r.max.iter().map(|&v| fmt17(v)).collect();
        s.push_str(&format!("# region_min = {}\n", mins.join(" ")));
        s.push_str(&format!("# region_max = {}\n", maxs.join(" ")));
    }
    for (e, msg) in &outcome.errors {
        s.push_str(&format!("# level_error E={e}: {msg}\n"));
    }
    s.push_str(
        "level,E,rho,bones_in_region,regge_sum,integral_scal,ratio,transport_gap,max_abs_deficit,wallclock\n",
    );
    for r in &outcome.rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.level,
            r.e,
            fmt17(r.rho),
            r.bones_in_region,
            fmt17(r.regge_sum),
            fmt17(r.integral_scal),
            fmt17(r.ratio),
            fmt17(r.transport_gap),
            fmt17(r.max_abs_deficit),
            fmt17(r.wallclock)
        ));
    }
    s
}

/// Tabular deficit export: one row per bone.
pub fn deficit_table_text(records: &[regge::DeficitRecord]) -> String {
    let mut s = String::new();
    s.push_str("# reggelab-deficits v1\n");
    s.push_str("bone_id ring_size beta_total alpha vol_nm2\n");
    for r in records {
        s.push_str(&format!(
            "{} {} {} {} {}\n",
            r.bone.face_id,
            r.bone.ring_cells.len(),
            fmt17(r.beta_total),
            fmt17(r.alpha),
            fmt17(r.vol_nm2)
        ));
    }
    s
}
