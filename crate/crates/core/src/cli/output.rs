use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::CliError;
use crate::analysis::Spectrum;
use crate::dde::Trajectory;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "GIANT_EIT_OUT_DIR";

pub const SPECTRUM_HEADER: &str = "delta_31,T,re_t,im_t,lamb_shift,gamma_eff,shift_b,decay_b";

/// Flag, then config file, then environment, then the working directory.
pub fn resolve_out_dir(flag: Option<&Path>, config: Option<&Path>) -> PathBuf {
    if let Some(dir) = flag.or(config) {
        return dir.to_path_buf();
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => PathBuf::from("."),
    }
}

/// 17 significant digits, exponent form, independent of locale.
fn num(out: &mut String, x: f64) {
    write!(out, "{x:.16e}").expect("writing to a String cannot fail");
}

fn row(out: &mut String, values: &[f64]) {
    for (k, &v) in values.iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        num(out, v);
    }
    out.push('\n');
}

pub fn spectrum_csv(spectrum: &Spectrum) -> String {
    let mut out = String::with_capacity(64 + spectrum.points.len() * 200);
    out.push_str(SPECTRUM_HEADER);
    out.push('\n');
    for p in &spectrum.points {
        row(
            &mut out,
            &[
                p.delta_31,
                p.transmittance,
                p.t_complex.re,
                p.t_complex.im,
                p.lamb_shift,
                p.decay_eff,
                p.shift_b,
                p.decay_b,
            ],
        );
    }
    out
}

pub fn trajectory_header() -> String {
    let mut h = String::from("t");
    for i in 1..=3 {
        for j in 1..=3 {
            write!(h, ",re_rho{i}{j},im_rho{i}{j}").expect("writing to a String cannot fail");
        }
    }
    h
}

pub fn trajectory_csv(trajectory: &Trajectory) -> String {
    let mut out = trajectory_header();
    out.push('\n');
    let mut values = Vec::with_capacity(19);
    for (t, state) in trajectory.times.iter().zip(&trajectory.states) {
        values.clear();
        values.push(*t);
        for i in 1..=3 {
            for j in 1..=3 {
                let z = state.element(i, j);
                values.push(z.re);
                values.push(z.im);
            }
        }
        row(&mut out, &values);
    }
    out
}

pub fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialise to JSON");
    s.push('\n');
    s
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{sweep_spectrum, DetuningGrid};
    use crate::model::SystemParams;

    #[test]
    fn spectrum_table_layout() {
        let p = SystemParams::lossless_probe(2, 0.05, 0.0, 0.1);
        let s = sweep_spectrum(&p, &DetuningGrid::new(-1.0, 1.0, 3).unwrap()).unwrap();
        let csv = spectrum_csv(&s);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], SPECTRUM_HEADER);
        assert_eq!(lines.len(), 4);
        for line in &lines[1..] {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 8);
            for f in fields {
                let mantissa = f.split('e').next().unwrap().trim_start_matches('-');
                assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
                f.parse::<f64>().unwrap();
            }
        }
        assert!(lines[1].starts_with("-1.0000000000000000e0,"));
    }

    #[test]
    fn values_round_trip_through_text() {
        let mut s = String::new();
        for x in [0.1, -1.0 / 3.0, 6.02214076e23, 1e-300, std::f64::consts::PI] {
            s.clear();
            num(&mut s, x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested").join("out.csv");
        write_atomic(&path, "a\n").unwrap();
        write_atomic(&path, "b\n").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "b\n");
        let entries = std::fs::read_dir(path.parent().unwrap()).unwrap().count();
        assert_eq!(entries, 1);
    }

    #[test]
    fn trajectory_header_lists_all_entries() {
        let h = trajectory_header();
        assert_eq!(h.split(',').count(), 19);
        assert!(h.starts_with("t,re_rho11,im_rho11,re_rho12"));
    }
}
