//! Command implementations. All reports are columnar text with `#` headers
//! and are byte-identical across runs for identical inputs; the only
//! non-content line is the version footer.

use crate::checks::{self, CheckResult};
use fourier_interp::basis::{
    bound_report, coefficients, default_r_grid, HeightPolicy, QuadratureConfig,
};
use fourier_interp::hup::{hup_check, HupVerdict, HyperbolaCrossData};
use fourier_interp::interp::{reconstruct, NodeData, RadialTables};
use fourier_interp::modular::Sign;
use fourier_interp::{io, Error, Result};
use std::fmt::Write as _;
use std::path::PathBuf;

const FOOTER: &str = concat!("# footer: fourier-interp ", env!("CARGO_PKG_VERSION"));

fn parse_grid(spec: Option<String>) -> Result<Vec<f64>> {
    let spec = spec.unwrap_or_else(|| "8:400".to_string());
    let (max_s, pts_s) = spec
        .split_once(':')
        .ok_or_else(|| Error::Validation(format!("grid must be MAX:POINTS, got {spec}")))?;
    let r_max: f64 = max_s
        .parse()
        .map_err(|_| Error::Validation(format!("bad grid max {max_s}")))?;
    let points: usize = pts_s
        .parse()
        .map_err(|_| Error::Validation(format!("bad grid points {pts_s}")))?;
    if !(r_max > 0.0) || points < 16 {
        return Err(Error::Validation(
            "grid needs positive max and at least 16 points".into(),
        ));
    }
    Ok(default_r_grid(r_max, points))
}

fn ensure_dir(out: &PathBuf) -> Result<()> {
    std::fs::create_dir_all(out)?;
    Ok(())
}

fn quad_with_scale(tol_scale: f64) -> Result<QuadratureConfig> {
    if !(tol_scale > 0.0) {
        return Err(Error::Validation("tol-scale must be positive".into()));
    }
    let mut q = QuadratureConfig::default();
    q.target *= tol_scale;
    Ok(q)
}

pub fn cmd_basis(
    k: Option<String>,
    d: Option<u32>,
    eps_sign: Option<String>,
    n_max: Option<usize>,
    grid: Option<String>,
    out: PathBuf,
    tol_scale: f64,
) -> Result<bool> {
    // validate configuration fully before any computation
    let k = match (k, d) {
        (Some(ks), None) => io::parse_half_int(&ks)?,
        (None, Some(d)) => {
            if d == 0 {
                return Err(Error::Validation("d must be positive".into()));
            }
            fourier_interp::HalfInt::from_twice(d as i64)
        }
        (None, None) => return Err(Error::Validation("pass --k or --d".into())),
        (Some(_), Some(_)) => {
            return Err(Error::Validation("pass only one of --k / --d".into()))
        }
    };
    if k.twice() < 1 {
        return Err(Error::Validation("k must be at least 1/2".into()));
    }
    let signs = match eps_sign.as_deref() {
        None => vec![Sign::Plus, Sign::Minus],
        Some("+1") | Some("+") | Some("1") => vec![Sign::Plus],
        Some("-1") | Some("-") => vec![Sign::Minus],
        Some(other) => {
            return Err(Error::Validation(format!("bad --eps-sign {other}")))
        }
    };
    let r_grid = parse_grid(grid)?;
    let quad = quad_with_scale(tol_scale)?;
    let n_max = match n_max {
        Some(n) => n,
        None => {
            println!("# warning: empty index range, no tables generated");
            println!("{FOOTER}");
            return Ok(true);
        }
    };
    ensure_dir(&out)?;
    for sign in signs {
        let table = coefficients(k, sign, &r_grid, n_max, HeightPolicy::Auto, quad)?;
        let label = match sign {
            Sign::Plus => "plus",
            Sign::Minus => "minus",
        };
        let path = out.join(format!("basis_k{}_{}.table", k.twice(), label));
        io::write_basis_table(&table, &path)?;
        println!(
            "# wrote {} (n_max = {}, im residue {:.2e})",
            path.display(),
            n_max,
            table.meta.max_im_residue
        );
    }
    println!("{FOOTER}");
    Ok(true)
}

fn render_report(results: &[CheckResult], filter: &str) -> String {
    let mut text = String::new();
    let _ = writeln!(text, "# fourier-interp verification report");
    let _ = writeln!(text, "# suite filter: {filter}");
    let _ = writeln!(text, "check, measured, tolerance, status");
    for r in results {
        let _ = writeln!(
            text,
            "{}, {:.6e}, {:.6e}, {}",
            r.name,
            r.measured,
            r.tolerance,
            if r.passed() { "pass" } else { "FAIL" }
        );
    }
    text
}

pub fn cmd_verify(
    suite: Option<String>,
    tol_scale: f64,
    tables: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<bool> {
    if !(tol_scale > 0.0) {
        return Err(Error::Validation("tol-scale must be positive".into()));
    }
    let filter = suite.unwrap_or_default();
    let results = match tables {
        Some(dir) => checks::file_checks(&dir, &filter, tol_scale)?,
        None => checks::fresh_checks(&filter, tol_scale)?,
    };
    if results.is_empty() {
        return Err(Error::Validation(format!(
            "suite filter '{filter}' selected no checks"
        )));
    }
    let report = render_report(&results, if filter.is_empty() { "all" } else { &filter });
    print!("{report}");
    println!("{FOOTER}");
    if let Some(dir) = out {
        ensure_dir(&dir)?;
        std::fs::write(dir.join("verify_report.txt"), report)?;
    }
    Ok(results.iter().all(|r| r.passed()))
}

pub fn cmd_reconstruct(
    profile_path: PathBuf,
    data_path: Option<PathBuf>,
    n_max: Option<usize>,
    grid: Option<String>,
    out: PathBuf,
    tol_scale: f64,
) -> Result<bool> {
    let profile_text = std::fs::read_to_string(&profile_path)?;
    let profile = io::profile_from_string(&profile_text)?;
    let n_max = n_max.unwrap_or_else(|| profile.n_max());
    let r_grid = parse_grid(grid.or(Some("9:900".into())))?;
    let quad = quad_with_scale(tol_scale)?;
    ensure_dir(&out)?;

    let data = match data_path {
        Some(p) => {
            let text = std::fs::read_to_string(&p)?;
            let d = io::node_data_from_string(&text)?;
            if d.d != profile.d {
                return Err(Error::Validation(format!(
                    "data dimension {} != profile dimension {}",
                    d.d, profile.d
                )));
            }
            d
        }
        None => NodeData::sample(
            profile.d,
            &profile,
            |r| (-std::f64::consts::PI * r * r).exp(),
            |r| (-std::f64::consts::PI * r * r).exp(),
        )?,
    };
    let synthetic = data_path_is_none_marker(&data);
    let tables = RadialTables::build(profile.d, n_max.min(data.n_max), &r_grid, quad)?;
    let rec = reconstruct(&data, &profile, &tables, 80, 1e-10)?;

    let mut log_text = String::new();
    let _ = writeln!(log_text, "# reconstruction convergence log");
    let _ = writeln!(log_text, "# budget = {:.6e}", rec.budget);
    let _ = writeln!(log_text, "iteration, delta_norm, ratio");
    for row in &rec.log {
        let _ = writeln!(
            log_text,
            "{}, {:.6e}, {}",
            row.iteration,
            row.delta_norm,
            row.ratio.map(|r| format!("{r:.6e}")).unwrap_or_default()
        );
    }
    let _ = writeln!(log_text, "{FOOTER}");
    std::fs::write(out.join("reconstruct_log.txt"), &log_text)?;

    let mut data_text = String::new();
    let _ = writeln!(data_text, "# reconstructed radial function");
    let _ = writeln!(data_text, "r, value, hat");
    let mut sup_err: Option<f64> = synthetic.then_some(0.0);
    for (i, &r) in tables.r_grid().iter().enumerate() {
        let _ = writeln!(
            data_text,
            "{:.16e}, {:.16e}, {:.16e}",
            r, rec.result.values[i], rec.result.hat[i]
        );
        if let Some(s) = sup_err.as_mut() {
            if r <= 3.0 {
                *s = s.max((rec.result.values[i] - (-std::f64::consts::PI * r * r).exp()).abs());
            }
        }
    }
    let _ = writeln!(data_text, "{FOOTER}");
    std::fs::write(out.join("reconstruct_values.txt"), &data_text)?;

    println!("# budget = {:.6e}", rec.budget);
    println!("# iterations = {}", rec.log.len());
    println!("# converged = {}", rec.converged);
    if let Some(s) = sup_err {
        println!("# sup error vs Gaussian target on [0,3] = {s:.6e}");
    }
    println!("{FOOTER}");
    Ok(rec.converged)
}

fn data_path_is_none_marker(data: &NodeData) -> bool {
    // the synthetic path samples a self-dual Gaussian: detect by its n = 0
    // entries being equal and positive
    (data.f_vals[0] - data.fhat_vals[0]).abs() < 1e-15 && data.f_vals[0] > 0.0
}

pub fn cmd_hup(
    profile_path: PathBuf,
    cross_path: Option<PathBuf>,
    n_max: Option<usize>,
    out: PathBuf,
) -> Result<bool> {
    let profile_text = std::fs::read_to_string(&profile_path)?;
    let profile = io::profile_from_string(&profile_text)?;
    if profile.d != 4 {
        return Err(Error::Validation(
            "the hyperbola pipeline runs through d = 4".into(),
        ));
    }
    ensure_dir(&out)?;
    let density = checks::test_density()?;
    let cross = match cross_path {
        Some(p) => {
            let text = std::fs::read_to_string(&p)?;
            io::cross_data_from_string(&text)?
        }
        None => HyperbolaCrossData::from_profile(&density, profile.clone())?,
    };
    let n_max = n_max.unwrap_or_else(|| profile.n_max());
    let tables = RadialTables::build(
        4,
        n_max,
        &default_r_grid(9.0, 900),
        QuadratureConfig::default(),
    )?;
    let report = hup_check(&cross, &density, &tables)?;

    let mut text = String::new();
    let _ = writeln!(text, "# hyperbola uniqueness report");
    let _ = writeln!(
        text,
        "verdict = {}",
        match report.verdict {
            HupVerdict::ZeroCertified => "zero-certified",
            HupVerdict::Reconstructed => "reconstructed",
            HupVerdict::Inconsistent => "inconsistent",
        }
    );
    let _ = writeln!(text, "budget = {:.6e}", report.budget);
    let _ = writeln!(
        text,
        "equivalence_residual = {:.6e}",
        report.equivalence_residual
    );
    let _ = writeln!(
        text,
        "reconstruction_error = {:.6e}",
        report.reconstruction_error
    );
    let _ = writeln!(text, "reconstructed_norm = {:.6e}", report.reconstructed_norm);
    let _ = writeln!(text, "direct_norm = {:.6e}", report.direct_norm);
    let _ = writeln!(text, "iterations = {}", report.iterations);
    let _ = writeln!(text, "{FOOTER}");
    print!("{text}");
    std::fs::write(out.join("hup_report.txt"), text)?;
    Ok(report.verdict != HupVerdict::Inconsistent)
}

pub fn cmd_bounds(
    k: String,
    beta: f64,
    n_max: usize,
    grid: Option<String>,
    out: PathBuf,
) -> Result<bool> {
    let k = io::parse_half_int(&k)?;
    if beta < k.as_f64() * 2.0 + 2.0 {
        return Err(Error::Validation(format!(
            "beta must be at least 2k + 2 = {}",
            k.as_f64() * 2.0 + 2.0
        )));
    }
    let r_grid = parse_grid(grid)?;
    ensure_dir(&out)?;
    let quad = QuadratureConfig::default();
    let plus = coefficients(k, Sign::Plus, &r_grid, n_max, HeightPolicy::Auto, quad)?;
    let minus = coefficients(k, Sign::Minus, &r_grid, n_max, HeightPolicy::Auto, quad)?;
    let report = bound_report(k, beta, &plus, &minus)?;
    let mut text = String::new();
    let _ = writeln!(text, "# decay-bound report, k = {}, beta = {}", k, beta);
    let _ = writeln!(text, "# g_tilde(beta) = {:.16e}", report.g_tilde);
    let _ = writeln!(text, "# fitted constant = {:.6e}", report.fitted_constant);
    let _ = writeln!(text, "n, sup_weighted, shape, ratio, fitted_rate");
    for row in &report.rows {
        let _ = writeln!(
            text,
            "{}, {:.6e}, {:.6e}, {:.6e}, {}",
            row.n,
            row.sup_weighted,
            row.shape,
            row.ratio,
            row.fitted_rate
                .map(|c| format!("{c:.6e}"))
                .unwrap_or_default()
        );
    }
    let _ = writeln!(text, "# flagged: {:?}", report.flagged);
    let _ = writeln!(text, "{FOOTER}");
    print!("{text}");
    std::fs::write(out.join("bounds_report.txt"), text)?;
    Ok(report.flagged.is_empty())
}
