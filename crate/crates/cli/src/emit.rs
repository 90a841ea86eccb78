//! Result serialization: CSV tables and JSON documents.
//!
//! CSV numbers are written with 17 significant digits (`{:.16e}`) and a `.`
//! decimal separator, enough to reproduce any IEEE double exactly. JSON is
//! pretty-printed `serde_json` output with alphabetically ordered keys, so
//! both formats are deterministic byte-for-byte.

use serde_json::{json, Value};

use sivsim_core::dynamics::Trajectory;
use sivsim_core::photophysics::DipoleResult;
use sivsim_core::protocols::{MollowResult, RabiResult, RamseyResult};
use sivsim_core::spectrum::TransitionTable;

/// Full-precision decimal form of one double.
pub fn fnum(v: f64) -> String {
    format!("{v:.16e}")
}

/// Join one CSV row from already-formatted cells.
pub fn row(cells: &[String]) -> String {
    cells.join(",")
}

/// Assemble a CSV document from a header line and data rows.
pub fn csv_document(header: &str, rows: &[String]) -> String {
    let mut out = String::with_capacity(rows.len() * 64 + header.len() + 1);
    out.push_str(header);
    out.push('\n');
    for r in rows {
        out.push_str(r);
        out.push('\n');
    }
    out
}

/// Pretty JSON text with a trailing newline.
pub fn json_document(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("JSON serialization cannot fail");
    s.push('\n');
    s
}

/// Header for transition tables.
pub const TRANSITION_HEADER: &str = "label,ground_index,excited_index,frequency_Hz,rel_intensity";

/// CSV rows of one transition table (optionally prefixed by a field column).
pub fn transition_rows(table: &TransitionTable, prefix: Option<&str>) -> Vec<String> {
    table
        .entries
        .iter()
        .map(|t| {
            let base = [
                t.label.clone(),
                t.ground_index.to_string(),
                t.excited_index.to_string(),
                fnum(t.frequency),
                fnum(t.rel_intensity),
            ];
            match prefix {
                Some(p) => {
                    let mut cells = vec![p.to_string()];
                    cells.extend(base);
                    row(&cells)
                }
                None => row(&base),
            }
        })
        .collect()
}

/// Header for time-resolved trajectories with `n` levels.
pub fn trajectory_header(n_levels: usize) -> String {
    let mut h = String::from("time_s");
    for i in 0..n_levels {
        h.push_str(&format!(",pop_{i}"));
    }
    h.push_str(",fluorescence");
    h
}

/// CSV rows of a density-matrix trajectory: time, level populations,
/// fluorescence rate.
pub fn trajectory_rows(traj: &Trajectory) -> Vec<String> {
    traj.times
        .iter()
        .zip(traj.populations.iter())
        .zip(traj.fluorescence.iter())
        .map(|((t, pops), fl)| {
            let mut cells = vec![fnum(*t)];
            cells.extend(pops.iter().map(|p| fnum(*p)));
            cells.push(fnum(*fl));
            row(&cells)
        })
        .collect()
}

/// Two-column CSV rows from paired slices.
pub fn xy_rows(xs: &[f64], ys: &[f64]) -> Vec<String> {
    xs.iter()
        .zip(ys.iter())
        .map(|(x, y)| row(&[fnum(*x), fnum(*y)]))
        .collect()
}

/// JSON for a Rabi-type result.
pub fn rabi_json(result: &RabiResult) -> Value {
    serde_json::to_value(result).expect("serializable")
}

/// JSON for a Ramsey-type result.
pub fn ramsey_json(result: &RamseyResult) -> Value {
    serde_json::to_value(result).expect("serializable")
}

/// Mollow summary rows: one line per detuning.
pub const MOLLOW_HEADER: &str = "detuning_Hz,peak_Hz,expected_Hz,bin_Hz";

/// Rows for the Mollow sideband summary table.
pub fn mollow_rows(result: &MollowResult) -> Vec<String> {
    result
        .runs
        .iter()
        .map(|r| {
            row(&[
                fnum(r.detuning),
                fnum(r.peak_hz),
                fnum(r.expected_hz),
                fnum(r.bin_hz),
            ])
        })
        .collect()
}

/// Mollow JSON without the bulky per-run spectra: detunings and located
/// peaks only.
pub fn mollow_json(result: &MollowResult) -> Value {
    let runs: Vec<Value> = result
        .runs
        .iter()
        .map(|r| {
            json!({
                "detuning_rad_per_s": r.detuning,
                "peak_hz": r.peak_hz,
                "expected_hz": r.expected_hz,
                "bin_hz": r.bin_hz,
            })
        })
        .collect();
    json!({ "runs": runs })
}

/// JSON for the photophysics chain.
pub fn dipole_json(result: &DipoleResult) -> Value {
    serde_json::to_value(result).expect("serializable")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnum_is_full_precision() {
        let v = 0.1 + 0.2;
        let parsed: f64 = fnum(v).parse().unwrap();
        assert_eq!(parsed.to_bits(), v.to_bits());
        assert!(fnum(1.0).contains('.'));
    }

    #[test]
    fn trajectory_rows_line_up() {
        let traj = Trajectory {
            times: vec![0.0, 1e-9],
            rho: Vec::new(),
            populations: vec![vec![1.0, 0.0], vec![0.5, 0.5]],
            fluorescence: vec![0.0, 0.25],
        };
        let header = trajectory_header(2);
        assert_eq!(header, "time_s,pop_0,pop_1,fluorescence");
        let rows = trajectory_rows(&traj);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].split(',').count(), 4);
        let doc = csv_document(&header, &rows);
        assert!(doc.ends_with('\n'));
        assert_eq!(doc.lines().count(), 3);
    }

    #[test]
    fn json_keys_are_sorted() {
        let v = json!({"zeta": 1, "alpha": 2});
        let text = json_document(&v);
        let za = text.find("zeta").unwrap();
        let al = text.find("alpha").unwrap();
        assert!(al < za);
        assert!(text.ends_with('\n'));
    }
}
