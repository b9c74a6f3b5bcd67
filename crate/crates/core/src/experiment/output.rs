//! CSV emission. Floats use 17 significant digits so every value
//! round-trips exactly; missing values are empty fields.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use tempfile::NamedTempFile;

use crate::solvers::Trace;

use super::execute::{CheckRow, SlopeRow, SweepRow};
use super::ExperimentError;

pub const TRACE_HEADER: &str = "k,t,f_pred,grad_norm,gap,pred_seconds,corr_seconds,diverged";
pub const SWEEP_HEADER: &str = "h,solver,max_grad,mean_grad,max_gap,mean_gap";
pub const SLOPES_HEADER: &str = "solver,statistic,slope,intercept,max_abs_residual";
pub const CHECKS_HEADER: &str = "check,target,h,value,lower,upper,passed,note";

/// `{:.16e}`: one digit before the point and 16 after.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_float(x: Option<f64>) -> String {
    x.map(float).unwrap_or_default()
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), ExperimentError> {
    let io_error = |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(io_error)?;
    let mut tmp = NamedTempFile::new_in(dir).map_err(io_error)?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        body(&mut w).map_err(io_error)?;
        w.flush().map_err(io_error)?;
    }
    tmp.persist(path).map_err(|e| io_error(e.error))?;
    Ok(())
}

/// One row per recorded step, plus a final `diverged = 1` row holding the
/// values observed at the divergence step.
pub fn write_trace(w: &mut dyn Write, trace: &Trace) -> io::Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for r in &trace.records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},0",
            r.k,
            float(r.t),
            float(r.f_pred),
            float(r.grad_norm),
            opt_float(r.gap),
            float(r.pred_seconds),
            float(r.corr_seconds),
        )?;
    }
    if let Some(d) = &trace.divergence {
        writeln!(
            w,
            "{},{},{},{},,{},{},1",
            d.k,
            float(d.t),
            float(d.f_pred),
            float(d.grad_norm),
            float(0.0),
            float(0.0),
        )?;
    }
    Ok(())
}

pub fn write_sweep(w: &mut dyn Write, rows: &[SweepRow]) -> io::Result<()> {
    writeln!(w, "{SWEEP_HEADER}")?;
    for row in rows {
        let s = row.stats;
        writeln!(
            w,
            "{},{},{},{},{},{}",
            float(row.h),
            row.solver,
            opt_float(s.map(|s| s.max_grad)),
            opt_float(s.map(|s| s.mean_grad)),
            opt_float(s.and_then(|s| s.max_gap)),
            opt_float(s.and_then(|s| s.mean_gap)),
        )?;
    }
    Ok(())
}

pub fn write_slopes(w: &mut dyn Write, slopes: &[SlopeRow]) -> io::Result<()> {
    writeln!(w, "{SLOPES_HEADER}")?;
    for s in slopes {
        writeln!(
            w,
            "{},{},{},{},{}",
            s.solver,
            s.statistic,
            float(s.fit.slope),
            float(s.fit.intercept),
            float(s.fit.max_abs_residual),
        )?;
    }
    Ok(())
}

fn quoted(text: &str) -> String {
    format!("\"{}\"", text.replace('"', "\"\""))
}

pub fn write_checks(w: &mut dyn Write, rows: &[CheckRow]) -> io::Result<()> {
    writeln!(w, "{CHECKS_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.check.label(),
            r.target,
            opt_float(r.h),
            float(r.value),
            opt_float(r.lower),
            opt_float(r.upper),
            u8::from(r.passed),
            quoted(&r.note),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::{Algorithm, Divergence, DivergenceReason, StepRecord};

    #[test]
    fn floats_round_trip_with_17_digits() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, 0.0] {
            let s = float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17, "{s}");
        }
        assert_eq!(float(0.1), "1.0000000000000001e-1");
    }

    #[test]
    fn trace_rows_and_divergence_row() {
        let record = |k: usize| StepRecord {
            k,
            t: k as f64 * 0.5,
            f_pred: 1.0,
            f_corr: 0.5,
            grad_norm: 2.0,
            gap: None,
            pred_seconds: 0.0,
            corr_seconds: 0.0,
        };
        let mut trace = Trace {
            algorithm: Algorithm::Tvgd,
            h: 0.5,
            records: vec![record(0), record(1)],
            predicted: Vec::new(),
            corrected: Vec::new(),
            divergence: None,
        };
        let mut buf = Vec::new();
        write_trace(&mut buf, &trace).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], TRACE_HEADER);
        assert!(lines[2].starts_with("1,5.0000000000000000e-1,"));
        assert!(lines[2].ends_with(",,0.0000000000000000e0,0.0000000000000000e0,0"));

        trace.divergence = Some(Divergence {
            k: 2,
            t: 1.0,
            reason: DivergenceReason::NonFinite { phase: "prediction" },
            f_pred: f64::INFINITY,
            grad_norm: f64::NAN,
        });
        let mut buf = Vec::new();
        write_trace(&mut buf, &trace).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let last = text.lines().last().unwrap();
        assert!(last.starts_with("2,") && last.ends_with(",1"), "{last}");
        assert_eq!(last.split(',').count(), 8);
    }

    #[test]
    fn atomic_write_replaces_whole_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested").join("a.csv");
        write_atomic(&path, |w| writeln!(w, "first")).unwrap();
        write_atomic(&path, |w| writeln!(w, "second")).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "second\n");
        let leftovers = fs::read_dir(path.parent().unwrap()).unwrap().count();
        assert_eq!(leftovers, 1);
    }

    #[test]
    fn failed_body_leaves_no_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.csv");
        let result = write_atomic(&path, |_| Err(io::Error::other("boom")));
        assert!(result.is_err());
        assert!(!path.exists());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }
}
