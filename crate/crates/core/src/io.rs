//! File formats: grid snapshots, trajectory CSV, the run manifest, and
//! surface-patch ingestion.
//!
//! All numeric output uses 17 significant digits, which round-trips `f64`
//! losslessly, so write→read→write is byte-identical.

use ndarray::Array2;
use num_complex::Complex64;

use crate::diagnostics::DiagnosticsRecord;
use crate::error::NkError;
use crate::euclid::{Domain, SurfacePatch};
use crate::grid::{PolarGrid, SectionField};
use crate::slopes::compute_slopes;
use crate::Result;

fn fmt(x: f64) -> String {
    format!("{:.16e}", x)
}

/// Serialise a section snapshot:
///
/// ```text
/// # nk-snapshot v1 n_r n_theta R s
/// j k Re(ξ) Im(ξ) Re(F) Im(F) Re(σ) Im(σ) λ θ margin
/// ```
pub fn write_snapshot(section: &SectionField, s: f64) -> Result<String> {
    let grid = &section.grid;
    let slopes = compute_slopes(section)?;
    let margin = slopes.margin();
    let mut out = String::new();
    out.push_str(&format!(
        "# nk-snapshot v1 {} {} {} {}\n",
        grid.n_r,
        grid.n_theta,
        fmt(grid.r_outer),
        fmt(s)
    ));
    for j in 0..grid.n_r {
        for k in 0..grid.n_theta {
            let xi = grid.xi(j, k);
            let f = section.f[[j, k]];
            let sig = slopes.sigma[[j, k]];
            out.push_str(&format!(
                "{} {} {} {} {} {} {} {} {} {} {}\n",
                j,
                k,
                fmt(xi.re),
                fmt(xi.im),
                fmt(f.re),
                fmt(f.im),
                fmt(sig.re),
                fmt(sig.im),
                fmt(slopes.lambda[[j, k]]),
                fmt(slopes.theta_slope[[j, k]]),
                fmt(margin[[j, k]])
            ));
        }
    }
    Ok(out)
}

/// Parse a snapshot back into `(section, s)`.
pub fn read_snapshot(text: &str) -> Result<(SectionField, f64)> {
    let mut lines = text.lines();
    let header = lines.next().ok_or(NkError::FormatError {
        what: "snapshot",
        msg: "empty file".into(),
    })?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 7 || tokens[0] != "#" || tokens[1] != "nk-snapshot" || tokens[2] != "v1" {
        return Err(NkError::FormatError { what: "snapshot", msg: "bad header".into() });
    }
    let parse_f = |t: &str| {
        t.parse::<f64>().map_err(|_| NkError::FormatError {
            what: "snapshot",
            msg: format!("bad float {t}"),
        })
    };
    let n_r: usize = tokens[3].parse().map_err(|_| NkError::FormatError {
        what: "snapshot",
        msg: "bad n_r".into(),
    })?;
    let n_theta: usize = tokens[4].parse().map_err(|_| NkError::FormatError {
        what: "snapshot",
        msg: "bad n_theta".into(),
    })?;
    let r_outer = parse_f(tokens[5])?;
    let s = parse_f(tokens[6])?;
    let grid = PolarGrid::new(n_r, n_theta, r_outer)?;
    let mut f: Array2<Complex64> = Array2::zeros((n_r, n_theta));
    let mut seen = 0usize;
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 11 {
            return Err(NkError::FormatError {
                what: "snapshot",
                msg: format!("expected 11 columns, got {}", cols.len()),
            });
        }
        let j: usize = cols[0].parse().map_err(|_| NkError::FormatError {
            what: "snapshot",
            msg: "bad j".into(),
        })?;
        let k: usize = cols[1].parse().map_err(|_| NkError::FormatError {
            what: "snapshot",
            msg: "bad k".into(),
        })?;
        if j >= n_r || k >= n_theta {
            return Err(NkError::FormatError { what: "snapshot", msg: "index out of range".into() });
        }
        f[[j, k]] = Complex64::new(parse_f(cols[4])?, parse_f(cols[5])?);
        seen += 1;
    }
    if seen != n_r * n_theta {
        return Err(NkError::FormatError {
            what: "snapshot",
            msg: format!("expected {} rows, got {seen}", n_r * n_theta),
        });
    }
    Ok((SectionField::new(grid, f)?, s))
}

/// Trajectory CSV with the fixed diagnostic column set.
pub fn write_trajectory_csv(records: &[DiagnosticsRecord]) -> String {
    let mut out = String::from(DiagnosticsRecord::CSV_HEADER);
    out.push('\n');
    for rec in records {
        out.push_str(&rec.csv_row());
        out.push('\n');
    }
    out
}

/// Parse a trajectory CSV produced by [`write_trajectory_csv`].
pub fn read_trajectory_csv(text: &str) -> Result<Vec<DiagnosticsRecord>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or(NkError::FormatError {
        what: "trajectory",
        msg: "empty file".into(),
    })?;
    if header.trim() != DiagnosticsRecord::CSV_HEADER {
        return Err(NkError::FormatError { what: "trajectory", msg: "bad header".into() });
    }
    let mut out = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|t| {
                t.trim().parse::<f64>().map_err(|_| NkError::FormatError {
                    what: "trajectory",
                    msg: format!("bad float {t}"),
                })
            })
            .collect::<Result<_>>()?;
        if vals.len() != 10 {
            return Err(NkError::FormatError {
                what: "trajectory",
                msg: format!("expected 10 columns, got {}", vals.len()),
            });
        }
        out.push(DiagnosticsRecord {
            s: vals[0],
            area_g: vals[1],
            sup_abs_sigma: vals[2],
            sup_sigma2_over_lambda2: vals[3],
            sup_sigma2_over_margin: vals[4],
            compactness_value: vals[5],
            min_margin: vals[6],
            boundary_min_radius: vals[7],
            tilt_max: vals[8],
            curvature_k: vals[9],
        });
    }
    Ok(out)
}

/// Column names of the trajectory CSV, in order.
pub fn trajectory_columns() -> [&'static str; 10] {
    [
        "s",
        "area_g",
        "sup_abs_sigma",
        "sup_s2_l2",
        "sup_s2_margin",
        "compactness",
        "min_margin",
        "boundary_min_r",
        "tilt_max",
        "curvature_k",
    ]
}

/// Parse a surface-patch file:
///
/// ```text
/// # surface v1 type=graph
/// domain disc 0.4          (or: domain rect u0 u1 v0 v1)
/// 2 0 0.5                  (monomial rows: i j coeff for z = Σ c uⁱvʲ)
/// ...
/// ```
///
/// or `type=param` followed by `u v x y z` rows on a uniform lattice.
pub fn parse_surface(text: &str) -> Result<SurfacePatch> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(NkError::FormatError {
        what: "surface",
        msg: "empty file".into(),
    })?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 4 || tokens[0] != "#" || tokens[1] != "surface" || tokens[2] != "v1" {
        return Err(NkError::FormatError { what: "surface", msg: "bad header".into() });
    }
    let kind = tokens[3].strip_prefix("type=").ok_or(NkError::FormatError {
        what: "surface",
        msg: "missing type=".into(),
    })?;
    match kind {
        "graph" => {
            let mut domain = Domain::Disc { radius: 0.5 };
            let mut coeffs = Vec::new();
            for (lineno, line) in lines {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let cols: Vec<&str> = line.split_whitespace().collect();
                if cols[0] == "domain" {
                    domain = parse_domain(&cols, lineno)?;
                    continue;
                }
                if cols.len() != 3 {
                    return Err(NkError::ConfigError {
                        line: lineno + 1,
                        msg: "expected `i j coeff`".into(),
                    });
                }
                let i: u32 = cols[0].parse().map_err(|_| NkError::ConfigError {
                    line: lineno + 1,
                    msg: "bad power".into(),
                })?;
                let j: u32 = cols[1].parse().map_err(|_| NkError::ConfigError {
                    line: lineno + 1,
                    msg: "bad power".into(),
                })?;
                let c: f64 = cols[2].parse().map_err(|_| NkError::ConfigError {
                    line: lineno + 1,
                    msg: "bad coefficient".into(),
                })?;
                coeffs.push((i, j, c));
            }
            if coeffs.is_empty() {
                return Err(NkError::FormatError {
                    what: "surface",
                    msg: "no coefficients".into(),
                });
            }
            Ok(SurfacePatch::poly_graph(coeffs, domain, 48))
        }
        "param" => {
            let mut rows: Vec<(f64, f64, nalgebra::Vector3<f64>)> = Vec::new();
            for (lineno, line) in lines {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let vals: Vec<f64> = line
                    .split_whitespace()
                    .map(|t| {
                        t.parse::<f64>().map_err(|_| NkError::ConfigError {
                            line: lineno + 1,
                            msg: format!("bad float {t}"),
                        })
                    })
                    .collect::<Result<_>>()?;
                if vals.len() != 5 {
                    return Err(NkError::ConfigError {
                        line: lineno + 1,
                        msg: "expected `u v x y z`".into(),
                    });
                }
                rows.push((vals[0], vals[1], nalgebra::Vector3::new(vals[2], vals[3], vals[4])));
            }
            lattice_from_rows(rows)
        }
        other => Err(NkError::FormatError {
            what: "surface",
            msg: format!("unknown type {other}"),
        }),
    }
}

fn parse_domain(cols: &[&str], lineno: usize) -> Result<Domain> {
    let bad = |msg: &str| NkError::ConfigError { line: lineno + 1, msg: msg.into() };
    match cols.get(1).copied() {
        Some("disc") if cols.len() == 3 => {
            let r: f64 = cols[2].parse().map_err(|_| bad("bad radius"))?;
            Ok(Domain::Disc { radius: r })
        }
        Some("rect") if cols.len() == 6 => {
            let mut vals = [0.0; 4];
            for (slot, t) in vals.iter_mut().zip(&cols[2..6]) {
                *slot = t.parse().map_err(|_| bad("bad bound"))?;
            }
            Ok(Domain::Rect { u0: vals[0], u1: vals[1], v0: vals[2], v1: vals[3] })
        }
        _ => Err(bad("expected `domain disc R` or `domain rect u0 u1 v0 v1`")),
    }
}

fn lattice_from_rows(mut rows: Vec<(f64, f64, nalgebra::Vector3<f64>)>) -> Result<SurfacePatch> {
    if rows.len() < 9 {
        return Err(NkError::FormatError { what: "surface", msg: "lattice too small".into() });
    }
    rows.sort_by(|a, b| (a.0, a.1).partial_cmp(&(b.0, b.1)).unwrap());
    let mut us: Vec<f64> = rows.iter().map(|r| r.0).collect();
    us.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let mut vs: Vec<f64> = rows.iter().map(|r| r.1).collect();
    vs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vs.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let (nu, nv) = (us.len(), vs.len());
    if nu * nv != rows.len() {
        return Err(NkError::FormatError {
            what: "surface",
            msg: format!("rows ({}) do not fill a {}×{} lattice", rows.len(), nu, nv),
        });
    }
    let du = (us[nu - 1] - us[0]) / (nu - 1) as f64;
    let dv = (vs[nv - 1] - vs[0]) / (nv - 1) as f64;
    let mut points = Array2::from_elem((nu, nv), nalgebra::Vector3::zeros());
    for (u, v, p) in rows {
        let i = ((u - us[0]) / du).round() as usize;
        let j = ((v - vs[0]) / dv).round() as usize;
        points[[i, j]] = p;
    }
    Ok(SurfacePatch::Sampled { u0: us[0], v0: vs[0], du, dv, points, resolution: nu.max(nv) })
}

/// Write a matrix as plain-text rows, 17 significant digits.
pub fn write_matrix(m: &nalgebra::DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt(m[(i, j)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Read a plain-text matrix.
pub fn read_matrix(text: &str) -> Result<nalgebra::DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>().map_err(|_| NkError::ConfigError {
                    line: lineno + 1,
                    msg: format!("bad float {t}"),
                })
            })
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            if vals.len() != first.len() {
                return Err(NkError::FormatError {
                    what: "matrix",
                    msg: "ragged rows".into(),
                });
            }
        }
        rows.push(vals);
    }
    if rows.is_empty() {
        return Err(NkError::FormatError { what: "matrix", msg: "empty".into() });
    }
    let (nr, nc) = (rows.len(), rows[0].len());
    Ok(nalgebra::DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_roundtrip_is_byte_identical() {
        let grid = PolarGrid::new(9, 16, 0.3).unwrap();
        let sec = SectionField::from_fn(grid, |xi| {
            Complex64::new(0.0, -1.0) * xi + 0.1 * xi.conj().powu(2)
        })
        .unwrap();
        let first = write_snapshot(&sec, 0.125).unwrap();
        let (back, s) = read_snapshot(&first).unwrap();
        assert_eq!(s, 0.125);
        let second = write_snapshot(&back, s).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn trajectory_roundtrip() {
        let rec = DiagnosticsRecord {
            s: 0.1,
            area_g: 0.25,
            sup_abs_sigma: 1e-3,
            sup_sigma2_over_lambda2: 1e-6,
            sup_sigma2_over_margin: 2e-6,
            compactness_value: 0.5,
            min_margin: 0.9,
            boundary_min_radius: 0.2,
            tilt_max: 3.0,
            curvature_k: 0.0,
        };
        let text = write_trajectory_csv(&[rec]);
        let back = read_trajectory_csv(&text).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].s, rec.s);
        assert_eq!(back[0].tilt_max, rec.tilt_max);
        let text2 = write_trajectory_csv(&back);
        assert_eq!(text, text2);
    }

    #[test]
    fn parse_graph_surface() {
        let text = "# surface v1 type=graph\ndomain disc 0.4\n2 0 0.5\n0 2 0.5\n";
        let patch = parse_surface(text).unwrap();
        let jet = patch.jet2(0.1, 0.2);
        assert!((jet.p.z - 0.5 * (0.01 + 0.04)).abs() < 1e-14);
    }

    #[test]
    fn parse_param_surface() {
        let mut text = String::from("# surface v1 type=param\n");
        for i in 0..7 {
            for j in 0..7 {
                let u = -0.3 + 0.1 * i as f64;
                let v = -0.3 + 0.1 * j as f64;
                let z = 0.5 * (u * u + v * v);
                text.push_str(&format!("{u} {v} {u} {v} {z}\n"));
            }
        }
        let patch = parse_surface(&text).unwrap();
        let jet = patch.jet2(0.05, -0.05);
        assert!((jet.p.z - 0.5 * (0.0025 + 0.0025)).abs() < 1e-12);
        // quadratic fits are exact on a paraboloid
        assert!((jet.puu.z - 1.0).abs() < 1e-10);
    }

    #[test]
    fn bad_surface_headers_rejected() {
        assert!(parse_surface("# surface v2 type=graph\n").is_err());
        assert!(parse_surface("# surface v1 type=wavy\n1 1 1\n").is_err());
    }

    #[test]
    fn matrix_roundtrip() {
        let m = nalgebra::DMatrix::from_fn(3, 3, |i, j| (i * 3 + j) as f64 / 7.0);
        let text = write_matrix(&m);
        let back = read_matrix(&text).unwrap();
        assert_eq!(m, back);
    }
}
