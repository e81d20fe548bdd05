//! Thin command-line front end over the library: every subcommand reads a
//! TOML config (see `configs/` in the repository for examples) and writes
//! tabular text, either to stdout or to the configured output path.

use nalgebra::{DMatrix, DVector};
use reggelab::euclid;
use reggelab::harness::{catalog, config::ExperimentConfig, config::KinematicConfig, convergence, kinematic, HarnessError};
use reggelab::holonomy;
use reggelab::numutil::fmt17;
use reggelab::polyhedron;
use reggelab::regge;
use std::process::ExitCode;

const USAGE: &str = "usage: reggelab <command> <config-or-input> [output]
commands:
  realize <distance-file>    Schoenberg check + canonical embedding
  approximate <config>       build the polyhedron at the last level, write it
  deficits <config>          deficit-angle table at the last level
  regge-sum <config>         Regge scalar over the region, per level
  transport <config>         smooth vs polyhedral transport gaps
  holonomy <config>          loop-transport identities on seeded squares
  converge <config>          full convergence table (CSV)
  kinematic <config>         Monte Carlo kinematic constants";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    if args.len() < 3 {
        eprintln!("{USAGE}");
        return ExitCode::from(64);
    }
    reggelab::harness::init_threads();
    let command = args[1].as_str();
    let input = args[2].as_str();
    let output = args.get(3).map(|s| s.as_str());
    let result = match command {
        "realize" => cmd_realize(input, output),
        "approximate" => cmd_approximate(input, output),
        "deficits" => cmd_deficits(input, output),
        "regge-sum" => cmd_regge_sum(input, output),
        "transport" => cmd_transport(input, output),
        "holonomy" => cmd_holonomy(input, output),
        "converge" => cmd_converge(input, output),
        "kinematic" => cmd_kinematic(input, output),
        _ => {
            eprintln!("unknown command '{command}'\n{USAGE}");
            return ExitCode::from(64);
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match &e {
                HarnessError::Config(_)
                | HarnessError::UnknownManifold(_)
                | HarnessError::UnknownBaseComplex(_)
                | HarnessError::Io(_) => 2,
                _ => 3,
            };
            ExitCode::from(code)
        }
    }
}

fn emit(output: Option<&str>, text: &str) -> Result<(), HarnessError> {
    match output {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Distance file: one row per point, whitespace-separated entries.
fn cmd_realize(input: &str, output: Option<&str>) -> Result<(), HarnessError> {
    let text = std::fs::read_to_string(input)?;
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(|l| l.trim())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<Result<Vec<f64>, _>>()
        })
        .collect::<Result<_, _>>()
        .map_err(|e| HarnessError::Config(format!("bad distance entry: {e}")))?;
    let m = rows.len();
    if m < 2 || rows.iter().any(|r| r.len() != m) {
        return Err(HarnessError::Config("need a square distance matrix".into()));
    }
    let d = DMatrix::from_fn(m, m, |i, j| rows[i][j]);
    let dm = euclid::DistanceMatrix::new(d)
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let rep = euclid::schoenberg_check(&dm);
    let mut out = String::new();
    out.push_str("# reggelab-realize v1\n");
    out.push_str(&format!("points = {}\n", m));
    out.push_str(&format!("realizable = {}\n", rep.realizable));
    out.push_str(&format!("min_eigenvalue = {}\n", fmt17(rep.min_eigenvalue)));
    if rep.realizable {
        let s = euclid::embed_simplex(&dm).map_err(|e| HarnessError::Config(e.to_string()))?;
        out.push_str(&format!("volume = {}\n", fmt17(s.volume())));
        out.push_str(&format!("thickness = {}\n", fmt17(euclid::thickness(&s))));
        out.push_str(&format!("openness = {}\n", fmt17(euclid::openness(&s))));
        out.push_str("[vertices]\n");
        for (i, v) in s.vertices.iter().enumerate() {
            let coords: Vec<String> = v.iter().map(|&c| fmt17(c)).collect();
            out.push_str(&format!("{} {}\n", i, coords.join(" ")));
        }
    }
    emit(output, &out)
}

fn build_last_level(
    cfg: &ExperimentConfig,
) -> Result<(std::sync::Arc<reggelab::manifold::ChartManifold>, polyhedron::Polyhedron), HarnessError> {
    let m = catalog::catalog(&cfg.manifold.name, &cfg.manifold.params)?;
    let base = catalog::base_complex(&cfg.base_complex, &m)?;
    let e = *cfg.levels.last().unwrap();
    let poly = polyhedron::build_approximation(m.clone(), &base, e)?;
    Ok((m, poly))
}

fn cmd_approximate(input: &str, output: Option<&str>) -> Result<(), HarnessError> {
    let cfg = ExperimentConfig::from_file(input)?;
    let (_, poly) = build_last_level(&cfg)?;
    let mut buf = Vec::new();
    polyhedron::write_polyhedron(&poly, &mut buf).map_err(HarnessError::from)?;
    let text = String::from_utf8(buf).expect("ascii output");
    let path = output.or(cfg.output.as_deref());
    emit(path, &text)
}

fn cmd_deficits(input: &str, output: Option<&str>) -> Result<(), HarnessError> {
    let cfg = ExperimentConfig::from_file(input)?;
    let (_, poly) = build_last_level(&cfg)?;
    let records = regge::deficit_table(&poly)?;
    let text = convergence::deficit_table_text(&records);
    emit(output.or(cfg.output.as_deref()), &text)
}

fn cmd_regge_sum(input: &str, output: Option<&str>) -> Result<(), HarnessError> {
    let cfg = ExperimentConfig::from_file(input)?;
    let outcome = convergence::run_convergence(&cfg)?;
    let mut text = String::from("# reggelab-regge-sum v1\nE,rho,bones_in_region,regge_sum,integral_scal,ratio\n");
    for r in &outcome.rows {
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.e,
            fmt17(r.rho),
            r.bones_in_region,
            fmt17(r.regge_sum),
            fmt17(r.integral_scal),
            fmt17(r.ratio)
        ));
    }
    for (e, msg) in &outcome.errors {
        text.push_str(&format!("# level_error E={e}: {msg}\n"));
    }
    emit(output.or(cfg.output.as_deref()), &text)
}

fn cmd_transport(input: &str, output: Option<&str>) -> Result<(), HarnessError> {
    let cfg = ExperimentConfig::from_file(input)?;
    let (m, poly) = build_last_level(&cfg)?;
    let region = cfg
        .region
        .as_ref()
        .map(|r| (r.min.as_slice(), r.max.as_slice()));
    let geos = convergence::seeded_geodesics(
        &m,
        region,
        cfg.tolerances.geodesic_count,
        cfg.seed,
        cfg.tolerances.geodesic_length,
        cfg.tolerances.trace_samples,
    )?;
    let mut text = String::from("# reggelab-transport v1\ngeodesic,gap,orthogonality_defect\n");
    for (i, g) in geos.iter().enumerate() {
        let cmp = holonomy::compare_transport(&m, &poly, g.curve(), cfg.tolerances.trace_samples)?;
        text.push_str(&format!(
            "{},{},{}\n",
            i,
            fmt17(cmp.gap),
            fmt17(cmp.smooth.orthogonality_defect(&m))
        ));
    }
    emit(output.or(cfg.output.as_deref()), &text)
}

fn cmd_holonomy(input: &str, output: Option<&str>) -> Result<(), HarnessError> {
    use rand::Rng;
    use rand::SeedableRng;
    let cfg = ExperimentConfig::from_file(input)?;
    let m = catalog::catalog(&cfg.manifold.name, &cfg.manifold.params)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xABCD);
    let n = m.dim;
    let mut text = String::from(
        "# reggelab-holonomy v1\nsquare,side,loop_defect,double_integral,residual,angle_plus_area\n",
    );
    let count = 5;
    let mut made = 0;
    while made < count {
        let mut lo = m.domain.min.clone();
        let mut hi = m.domain.max.clone();
        for i in 0..n {
            if m.periods[i].is_none() {
                let span = hi[i] - lo[i];
                lo[i] += 0.3 * span;
                hi[i] -= 0.3 * span;
            }
        }
        let x = DVector::from_fn(n, |i, _| rng.gen_range(lo[i]..hi[i]));
        let u = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0f64));
        let v = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0f64));
        let r = 0.2 * m.convexity_radius_hint;
        let sq = match holonomy::riemannian_square(&m, &x, &u, &v, r) {
            Ok(sq) => sq,
            Err(_) => continue,
        };
        let lhs = match holonomy::loop_defect(&m, &sq, cfg.tolerances.trace_samples.max(600)) {
            Ok(l) => l,
            Err(_) => continue,
        };
        let rhs = holonomy::curvature_double_integral(&m, &sq, 8)?;
        let xw = m.wrap_point(&sq.base);
        let residual = m.op_norm_g(&xw, &xw, &(&lhs - &rhs));
        let angle_area = if n == 2 {
            let (_, theta) = holonomy::generalized_angle(&m, &sq, 24, 800)?;
            // theta(1) + int K d area should vanish; report the sum.
            let mut area_k = 0.0;
            let q = 32;
            for i in 0..q {
                for j in 0..q {
                    let s = (i as f64 + 0.5) / q as f64;
                    let t = (j as f64 + 0.5) / q as f64;
                    let (ds, dt) = sq.partials(s, t);
                    let p = m.wrap_point(&sq.eval(s, t));
                    let g = m.metric_at(&p);
                    let e11 = (ds.transpose() * &g * &ds)[(0, 0)];
                    let e22 = (dt.transpose() * &g * &dt)[(0, 0)];
                    let e12 = (ds.transpose() * &g * &dt)[(0, 0)];
                    let darea = (e11 * e22 - e12 * e12).max(0.0).sqrt();
                    let k = 0.5 * m.scalar_curvature(&p)?;
                    area_k += k * darea / (q * q) as f64;
                }
            }
            theta.unwrap_or(0.0) + area_k
        } else {
            f64::NAN
        };
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            made,
            fmt17(r),
            fmt17(m.op_norm_g(&xw, &xw, &lhs)),
            fmt17(m.op_norm_g(&xw, &xw, &rhs)),
            fmt17(residual),
            fmt17(angle_area)
        ));
        made += 1;
    }
    emit(output.or(cfg.output.as_deref()), &text)
}

fn cmd_converge(input: &str, output: Option<&str>) -> Result<(), HarnessError> {
    let cfg = ExperimentConfig::from_file(input)?;
    let outcome = convergence::run_convergence(&cfg)?;
    let text = convergence::convergence_csv(&cfg, &outcome);
    emit(output.or(cfg.output.as_deref()), &text)
}

fn cmd_kinematic(input: &str, output: Option<&str>) -> Result<(), HarnessError> {
    let cfg = KinematicConfig::from_file(input)?;
    let k = kinematic::kinematic_c2(cfg.dimension, cfg.samples, cfg.seed);
    emit(output.or(cfg.output.as_deref()), &kinematic::kinematic_text(&k))
}
