//! Columnar text serialization: `#`-prefixed headers, comma-separated rows,
//! 17 significant digits so every f64 round-trips exactly.

use crate::basis::{BasisTable, TableMeta};
use crate::error::{Error, Result};
use crate::hup::HyperbolaCrossData;
use crate::interp::{NodeData, PerturbationProfile};
use crate::modular::{HalfInt, Sign};
use crate::spaces::{Provenance, RadialFunction};
use std::fmt::Write as _;
use std::path::Path;

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

/// Parse a half-integer written as `3`, `3/2` or a decimal.
pub fn parse_half_int(s: &str) -> Result<HalfInt> {
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let n: i64 = num
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad numerator in {s}")))?;
        let d: i64 = den
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad denominator in {s}")))?;
        if d == 2 {
            return Ok(HalfInt::from_twice(n));
        }
        if d == 1 {
            return Ok(HalfInt::from_twice(2 * n));
        }
        return Err(Error::Parse(format!("{s} is not a half-integer")));
    }
    let v: f64 = s
        .parse()
        .map_err(|_| Error::Parse(format!("bad half-integer {s}")))?;
    HalfInt::try_from_f64(v)
}

fn parse_sign(s: &str) -> Result<Sign> {
    match s.trim() {
        "+1" | "1" | "+" => Ok(Sign::Plus),
        "-1" | "-" => Ok(Sign::Minus),
        other => Err(Error::Parse(format!("bad sign {other}"))),
    }
}

/// Render a basis table in the columnar layout
/// `# k=<k> eps=<+-1> n_max=<N> y=<y>` followed by `r, b_0(r), ..., b_N(r)`.
pub fn basis_table_to_string(t: &BasisTable) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# k={} eps={} n_max={} y={}",
        t.k,
        t.sign.label(),
        t.n_max,
        fmt_f(t.meta.y)
    );
    for (i, &r) in t.r_grid.iter().enumerate() {
        let mut row = fmt_f(r);
        for n in 0..=t.n_max {
            row.push_str(", ");
            row.push_str(&fmt_f(t.values[n][i]));
        }
        let _ = writeln!(out, "{row}");
    }
    out
}

/// Sidecar metadata in `key = value` lines.
pub fn table_meta_to_string(m: &TableMeta) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "y = {}", fmt_f(m.y));
    let _ = writeln!(out, "m_samples = {}", m.m_samples);
    let _ = writeln!(out, "max_im_residue = {}", fmt_f(m.max_im_residue));
    let _ = writeln!(out, "max_quad_error = {}", fmt_f(m.max_quad_error));
    let _ = writeln!(
        out,
        "suppressed_top_ratio = {}",
        fmt_f(m.suppressed_top_ratio)
    );
    let _ = writeln!(out, "quad_target = {}", fmt_f(m.quad_target));
    let _ = writeln!(out, "nudged_rows = {}", m.nudged_rows);
    out
}

pub fn write_basis_table(t: &BasisTable, path: &Path) -> Result<()> {
    std::fs::write(path, basis_table_to_string(t))?;
    let meta_path = path.with_extension("meta");
    std::fs::write(meta_path, table_meta_to_string(&t.meta))?;
    Ok(())
}

pub fn basis_table_from_string(text: &str) -> Result<BasisTable> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty table file".into()))?;
    if !header.starts_with('#') {
        return Err(Error::Parse("missing # header".into()));
    }
    let mut k = None;
    let mut sign = None;
    let mut n_max = None;
    let mut y = None;
    for field in header.trim_start_matches('#').split_whitespace() {
        if let Some((key, value)) = field.split_once('=') {
            match key {
                "k" => k = Some(parse_half_int(value)?),
                "eps" => sign = Some(parse_sign(value)?),
                "n_max" => {
                    n_max = Some(
                        value
                            .parse::<usize>()
                            .map_err(|_| Error::Parse("bad n_max".into()))?,
                    )
                }
                "y" => {
                    y = Some(
                        value
                            .parse::<f64>()
                            .map_err(|_| Error::Parse("bad y".into()))?,
                    )
                }
                _ => {}
            }
        }
    }
    let (k, sign, n_max, y) = match (k, sign, n_max, y) {
        (Some(k), Some(s), Some(n), Some(y)) => (k, s, n, y),
        _ => return Err(Error::Parse("incomplete table header".into())),
    };
    let mut r_grid = Vec::new();
    let mut values = vec![Vec::new(); n_max + 1];
    for line in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(|c| c.trim()).collect();
        if cells.len() != n_max + 2 {
            return Err(Error::Parse(format!(
                "row has {} cells, expected {}",
                cells.len(),
                n_max + 2
            )));
        }
        r_grid.push(
            cells[0]
                .parse::<f64>()
                .map_err(|_| Error::Parse("bad radius".into()))?,
        );
        for n in 0..=n_max {
            values[n].push(
                cells[n + 1]
                    .parse::<f64>()
                    .map_err(|_| Error::Parse("bad value".into()))?,
            );
        }
    }
    Ok(BasisTable {
        k,
        sign,
        n_max,
        r_grid,
        values,
        meta: TableMeta {
            y,
            m_samples: 0,
            max_im_residue: 0.0,
            max_quad_error: 0.0,
            suppressed_top_ratio: 0.0,
            quad_target: 0.0,
            nudged_rows: 0,
        },
    })
}

pub fn read_basis_table(path: &Path) -> Result<BasisTable> {
    let text = std::fs::read_to_string(path)?;
    basis_table_from_string(&text)
}

/// Radial function in the same columnar layout with header
/// `# d=<d> kind=radial-function`.
pub fn radial_function_to_string(f: &RadialFunction) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# d={} kind=radial-function", f.d);
    for (i, &r) in f.r_grid.iter().enumerate() {
        match &f.hat_values {
            Some(hat) => {
                let _ = writeln!(
                    out,
                    "{}, {}, {}",
                    fmt_f(r),
                    fmt_f(f.values[i]),
                    fmt_f(hat[i])
                );
            }
            None => {
                let _ = writeln!(out, "{}, {}", fmt_f(r), fmt_f(f.values[i]));
            }
        }
    }
    out
}

pub fn radial_function_from_string(text: &str) -> Result<RadialFunction> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty radial-function file".into()))?;
    let mut d = None;
    for field in header.trim_start_matches('#').split_whitespace() {
        if let Some(("d", value)) = field.split_once('=') {
            d = Some(
                value
                    .parse::<u32>()
                    .map_err(|_| Error::Parse("bad dimension".into()))?,
            );
        }
    }
    let d = d.ok_or_else(|| Error::Parse("missing dimension".into()))?;
    let mut grid = Vec::new();
    let mut values = Vec::new();
    let mut hat = Vec::new();
    for line in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(|c| c.trim()).collect();
        if cells.len() < 2 {
            return Err(Error::Parse("radial-function row too short".into()));
        }
        grid.push(cells[0].parse::<f64>().map_err(|_| Error::Parse("bad r".into()))?);
        values.push(
            cells[1]
                .parse::<f64>()
                .map_err(|_| Error::Parse("bad value".into()))?,
        );
        if cells.len() >= 3 {
            hat.push(
                cells[2]
                    .parse::<f64>()
                    .map_err(|_| Error::Parse("bad hat value".into()))?,
            );
        }
    }
    let f = RadialFunction::new(d, grid, values, Provenance::Table)?;
    if hat.is_empty() {
        Ok(f)
    } else {
        f.with_hat(hat)
    }
}

fn parse_f64_list(value: &str) -> Result<Vec<f64>> {
    value
        .split_whitespace()
        .map(|v| {
            v.parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number {v}")))
        })
        .collect()
}

fn list_to_string(values: &[f64]) -> String {
    values.iter().map(|v| fmt_f(*v)).collect::<Vec<_>>().join(" ")
}

/// Perturbation profile as key-value lines plus arrays.
pub fn profile_to_string(p: &PerturbationProfile) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "d = {}", p.d);
    let _ = writeln!(out, "s = {}", fmt_f(p.s));
    let _ = writeln!(out, "eta = {}", fmt_f(p.eta));
    let _ = writeln!(out, "delta = {}", fmt_f(p.delta));
    let _ = writeln!(out, "eps = {}", list_to_string(&p.eps));
    let _ = writeln!(out, "eps_hat = {}", list_to_string(&p.eps_hat));
    out
}

fn key_value_map(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|line| {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                return None;
            }
            line.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

fn lookup<'a>(map: &'a [(String, String)], key: &str) -> Result<&'a str> {
    map.iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| Error::Parse(format!("missing key {key}")))
}

pub fn profile_from_string(text: &str) -> Result<PerturbationProfile> {
    let map = key_value_map(text);
    let d: u32 = lookup(&map, "d")?
        .parse()
        .map_err(|_| Error::Parse("bad d".into()))?;
    let s: f64 = lookup(&map, "s")?
        .parse()
        .map_err(|_| Error::Parse("bad s".into()))?;
    let eta: f64 = lookup(&map, "eta")?
        .parse()
        .map_err(|_| Error::Parse("bad eta".into()))?;
    let delta: f64 = lookup(&map, "delta")?
        .parse()
        .map_err(|_| Error::Parse("bad delta".into()))?;
    let eps = parse_f64_list(lookup(&map, "eps")?)?;
    let eps_hat = parse_f64_list(lookup(&map, "eps_hat")?)?;
    PerturbationProfile::new(eps, eps_hat, s, eta, delta, d)
}

/// Node data mirrors the profile layout.
pub fn node_data_to_string(n: &NodeData) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "d = {}", n.d);
    let _ = writeln!(out, "n_max = {}", n.n_max);
    let _ = writeln!(out, "f_vals = {}", list_to_string(&n.f_vals));
    let _ = writeln!(out, "fhat_vals = {}", list_to_string(&n.fhat_vals));
    out
}

pub fn node_data_from_string(text: &str) -> Result<NodeData> {
    let map = key_value_map(text);
    let d: u32 = lookup(&map, "d")?
        .parse()
        .map_err(|_| Error::Parse("bad d".into()))?;
    let f_vals = parse_f64_list(lookup(&map, "f_vals")?)?;
    let fhat_vals = parse_f64_list(lookup(&map, "fhat_vals")?)?;
    NodeData::new(d, f_vals, fhat_vals)
}

/// Hyperbola cross data: the profile fields plus the two value arrays.
pub fn cross_data_to_string(c: &HyperbolaCrossData) -> String {
    let mut out = profile_to_string(&c.profile);
    let _ = writeln!(out, "mu_hat_x = {}", list_to_string(&c.mu_hat_x));
    let _ = writeln!(out, "mu_hat_y = {}", list_to_string(&c.mu_hat_y));
    out
}

pub fn cross_data_from_string(text: &str) -> Result<HyperbolaCrossData> {
    let profile = profile_from_string(text)?;
    let map = key_value_map(text);
    let mu_hat_x = parse_f64_list(lookup(&map, "mu_hat_x")?)?;
    let mu_hat_y = parse_f64_list(lookup(&map, "mu_hat_y")?)?;
    HyperbolaCrossData::new(mu_hat_x, mu_hat_y, profile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{coefficients, HeightPolicy, QuadratureConfig};

    #[test]
    fn half_int_parsing() {
        assert_eq!(parse_half_int("1/2").unwrap().twice(), 1);
        assert_eq!(parse_half_int("0.5").unwrap().twice(), 1);
        assert_eq!(parse_half_int("3").unwrap().twice(), 6);
        assert_eq!(parse_half_int("5/2").unwrap().twice(), 5);
        assert!(parse_half_int("0.3").is_err());
    }

    #[test]
    fn basis_table_roundtrip_exact() {
        let radii = vec![0.0, 0.5, 1.0, 1.7320508075688772, 2.5];
        let t = coefficients(
            HalfInt::from_twice(1),
            Sign::Plus,
            &radii,
            3,
            HeightPolicy::Auto,
            QuadratureConfig::default(),
        )
        .unwrap();
        let text = basis_table_to_string(&t);
        let back = basis_table_from_string(&text).unwrap();
        assert_eq!(back.k, t.k);
        assert_eq!(back.sign, t.sign);
        assert_eq!(back.n_max, t.n_max);
        for i in 0..radii.len() {
            assert_eq!(back.r_grid[i].to_bits(), t.r_grid[i].to_bits());
            for n in 0..=3 {
                assert_eq!(back.values[n][i].to_bits(), t.values[n][i].to_bits());
            }
        }
    }

    #[test]
    fn profile_roundtrip() {
        let p = PerturbationProfile::power_law(1e-3, 1.0, 0.5, 4, 12).unwrap();
        let text = profile_to_string(&p);
        let back = profile_from_string(&text).unwrap();
        assert_eq!(back.d, 4);
        for n in 0..=12 {
            assert_eq!(back.eps[n].to_bits(), p.eps[n].to_bits());
            assert_eq!(back.eps_hat[n].to_bits(), p.eps_hat[n].to_bits());
        }
    }

    #[test]
    fn radial_function_roundtrip() {
        let grid = vec![0.0, 1.0, 2.0, 3.0];
        let f = RadialFunction::new(
            2,
            grid.clone(),
            vec![1.0, 0.5, 0.25, 0.125],
            Provenance::Table,
        )
        .unwrap()
        .with_hat(vec![0.9, 0.4, 0.2, 0.1])
        .unwrap();
        let text = radial_function_to_string(&f);
        let back = radial_function_from_string(&text).unwrap();
        assert_eq!(back.d, 2);
        assert_eq!(back.values, f.values);
        assert_eq!(back.hat_values, f.hat_values);
    }
}
