//! CSV readers and writers for every file the tool produces or consumes.
//!
//! Floats are written with `{:e}`, the shortest form that parses back to
//! the same bits, so a written file reads back exactly. Lines starting with
//! `#` are comments.

use std::borrow::Cow;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use spinbath_core::bath::PolarizationPoint;
use spinbath_core::datasets::{Center, Quantity, RelaxationDataset, Row};
use spinbath_core::fit::{FitResult, ModelSpec};
use spinbath_core::pulse::{DecayTrace, Sequence, T2ScanPoint};
use spinbath_core::spectra::{PeakReport, Spectrum};

use crate::{Error, Result, VERSION};

pub const SPECTRUM_HEADER: &str = "field_T,amplitude";
pub const PEAKS_HEADER: &str = "center_field_T,pp_width_T,pp_amplitude";
pub const TRACE_HEADER: &str = "delay_s,amplitude,std_error";
pub const DATASET_HEADER: &str = "temperature_K,value_s,error_s";
pub const FIT_HEADER: &str = "parameter,value,stderr,fixed";
pub const POLARIZATION_HEADER: &str = "temperature_K,polarization,flip_flop_factor";
pub const MODEL_EVAL_HEADER: &str = "temperature_K,rate,time";
pub const SCAN_HEADER: &str = "temperature_K,flip_flop_factor,rate_per_s,t2_s,t2_stderr_s";

/// `# spinbath <version> config_sha256=<hex> seed=<n>`
pub fn provenance(config_hash: &str, seed: u64) -> String {
    format!("# spinbath {VERSION} config_sha256={config_hash} seed={seed}\n")
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(path, contents).map_err(io)
}

pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn render_spectrum(spec: &Spectrum, header: &str) -> String {
    let mut s = String::with_capacity(48 * spec.amplitude.len());
    s.push_str(header);
    let _ = writeln!(s, "# frequency_Hz={:e} temperature_K={:e}", spec.meta.frequency, spec.meta.temperature);
    let _ = writeln!(s, "{SPECTRUM_HEADER}");
    for (b, a) in spec.field_grid.iter().zip(&spec.amplitude) {
        let _ = writeln!(s, "{b:e},{a:e}");
    }
    s
}

pub fn render_peaks(report: &PeakReport, header: &str) -> String {
    let mut s = String::from(header);
    let _ = writeln!(s, "{PEAKS_HEADER}");
    for p in &report.peaks {
        let _ = writeln!(s, "{:e},{:e},{:e}", p.center_field, p.pp_width, p.pp_amplitude);
    }
    s
}

pub fn render_trace(trace: &DecayTrace, header: &str) -> String {
    let mut s = String::from(header);
    let _ = writeln!(
        s,
        "# sequence={} n_realizations={} seed={}",
        trace.sequence.as_str(),
        trace.n_realizations,
        trace.seed
    );
    let _ = writeln!(s, "{TRACE_HEADER}");
    for i in 0..trace.delays.len() {
        let _ = writeln!(s, "{:e},{:e},{:e}", trace.delays[i], trace.amplitude[i], trace.std_error[i]);
    }
    s
}

struct Lines<'a> {
    path: &'a Path,
}

impl Lines<'_> {
    fn row_err(&self, line: usize, row: usize, column: &str, message: impl Into<String>) -> Error {
        Error::Row {
            path: self.path.to_path_buf(),
            line,
            row,
            column: column.to_string(),
            message: message.into(),
        }
    }

    fn number(&self, line: usize, row: usize, column: &str, field: Option<&str>) -> Result<f64> {
        let text = field.map(str::trim).unwrap_or("");
        if text.is_empty() {
            return Err(self.row_err(line, row, column, "missing value"));
        }
        text.parse()
            .map_err(|_| self.row_err(line, row, column, format!("`{text}` is not a number")))
    }

    fn header(&self, found: Option<&str>, expected: &str) -> Error {
        Error::Header {
            path: self.path.to_path_buf(),
            expected: expected.to_string(),
            found: found.unwrap_or("<end of file>").to_string(),
        }
    }
}

/// Read a trace written by [`render_trace`].
pub fn parse_trace(text: &str, path: &Path) -> Result<DecayTrace> {
    let ctx = Lines { path };
    let mut sequence = Sequence::HahnEcho;
    let mut n_realizations = 1;
    let mut seed = 0;
    let mut header_seen = false;
    let (mut delays, mut amplitude, mut std_error) = (Vec::new(), Vec::new(), Vec::new());
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if let Some(comment) = raw.strip_prefix('#') {
            for kv in comment.split_whitespace() {
                match kv.split_once('=') {
                    Some(("sequence", v)) => {
                        sequence = Sequence::parse(v)
                            .ok_or_else(|| ctx.row_err(line, 0, "sequence", format!("unknown sequence `{v}`")))?
                    }
                    Some(("n_realizations", v)) => {
                        n_realizations = v
                            .parse()
                            .map_err(|_| ctx.row_err(line, 0, "n_realizations", "not a count"))?
                    }
                    Some(("seed", v)) => {
                        seed = v.parse().map_err(|_| ctx.row_err(line, 0, "seed", "not an integer"))?
                    }
                    _ => {}
                }
            }
            continue;
        }
        if raw.trim().is_empty() {
            continue;
        }
        if !header_seen {
            if raw.trim() != TRACE_HEADER {
                return Err(ctx.header(Some(raw.trim()), TRACE_HEADER));
            }
            header_seen = true;
            continue;
        }
        let row = delays.len() + 1;
        let mut f = raw.split(',');
        delays.push(ctx.number(line, row, "delay_s", f.next())?);
        amplitude.push(ctx.number(line, row, "amplitude", f.next())?);
        std_error.push(ctx.number(line, row, "std_error", f.next())?);
        if f.next().is_some() {
            return Err(ctx.row_err(line, row, "", "too many columns"));
        }
    }
    if !header_seen {
        return Err(ctx.header(None, TRACE_HEADER));
    }
    Ok(DecayTrace {
        sequence,
        delays,
        amplitude,
        std_error,
        n_realizations,
        seed,
    })
}

fn center_name(c: Center) -> &'static str {
    c.as_str()
}

fn quantity_name(q: Quantity) -> &'static str {
    q.as_str()
}

/// Dataset CSV: comment lines (kept as metadata), an optional
/// `#! center=.. quantity=..` line, the header, then rows. The source
/// column is last so it may contain commas.
pub fn render_dataset(d: &RelaxationDataset) -> Result<String> {
    let mut s = String::new();
    for m in &d.metadata {
        if m.contains(['\n', '\r']) || m.starts_with('!') {
            return Err(Error::Core(spinbath_core::Error::Domain(
                "metadata lines cannot contain newlines or start with `!`".into(),
            )));
        }
        let _ = writeln!(s, "#{m}");
    }
    if d.center.is_some() || d.quantity.is_some() {
        s.push_str("#!");
        if let Some(c) = d.center {
            let _ = write!(s, " center={}", center_name(c));
        }
        if let Some(q) = d.quantity {
            let _ = write!(s, " quantity={}", quantity_name(q));
        }
        s.push('\n');
    }
    let _ = writeln!(s, "{DATASET_HEADER},source");
    for r in &d.rows {
        if r.source.contains(['\n', '\r']) {
            return Err(Error::Core(spinbath_core::Error::Domain("source tag contains a newline".into())));
        }
        let _ = writeln!(s, "{:e},{:e},{:e},{}", r.temperature, r.value, r.error, r.source);
    }
    Ok(s)
}

fn source_for(path: &Path) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    if name.is_empty() {
        "user data".to_string()
    } else {
        format!("user data: {name}")
    }
}

/// Parse a dataset file. `error_s` and `source` are optional columns; a
/// missing error is 0 and a missing source becomes `user data: <file>`.
pub fn parse_dataset(text: &str, path: &Path) -> Result<RelaxationDataset> {
    let ctx = Lines { path };
    let mut d = RelaxationDataset::default();
    let mut columns: Option<usize> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        if let Some(tags) = raw.strip_prefix("#!") {
            for kv in tags.split_whitespace() {
                match kv.split_once('=') {
                    Some(("center", "nv")) => d.center = Some(Center::Nv),
                    Some(("center", "n")) => d.center = Some(Center::N),
                    Some(("quantity", "t1")) => d.quantity = Some(Quantity::T1),
                    Some(("quantity", "t2")) => d.quantity = Some(Quantity::T2),
                    _ => return Err(ctx.row_err(line, 0, "#!", format!("unknown tag `{kv}`"))),
                }
            }
            continue;
        }
        if let Some(comment) = raw.strip_prefix('#') {
            d.metadata.push(comment.to_string());
            continue;
        }
        if raw.trim().is_empty() {
            continue;
        }
        let Some(ncol) = columns else {
            let h: Vec<&str> = raw.split(',').map(str::trim).collect();
            let ok = match h.as_slice() {
                ["temperature_K", "value_s"] => Some(2),
                ["temperature_K", "value_s", "error_s"] => Some(3),
                ["temperature_K", "value_s", "error_s", "source"] => Some(4),
                _ => None,
            };
            columns = Some(ok.ok_or_else(|| ctx.header(Some(raw.trim()), DATASET_HEADER))?);
            continue;
        };
        let row = d.rows.len() + 1;
        let f: Vec<&str> = raw.splitn(ncol, ',').collect();
        if f.len() < 2 {
            return Err(ctx.row_err(line, row, "value_s", "missing value"));
        }
        if ncol < 4 && raw.split(',').count() > ncol {
            return Err(ctx.row_err(line, row, "", format!("expected {ncol} columns")));
        }
        let temperature = ctx.number(line, row, "temperature_K", f.first().copied())?;
        let value = ctx.number(line, row, "value_s", f.get(1).copied())?;
        let error = match f.get(2).map(|s| s.trim()) {
            None | Some("") => 0.0,
            Some(e) => ctx.number(line, row, "error_s", Some(e))?,
        };
        let source = match f.get(3) {
            Some(s) if !s.trim().is_empty() => s.to_string(),
            _ => source_for(path),
        };
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(ctx.row_err(line, row, "temperature_K", format!("must be > 0, got {temperature}")));
        }
        if !(value.is_finite() && value > 0.0) {
            return Err(ctx.row_err(line, row, "value_s", format!("must be > 0, got {value}")));
        }
        if !(error.is_finite() && error >= 0.0) {
            return Err(ctx.row_err(line, row, "error_s", format!("must be >= 0, got {error}")));
        }
        d.rows.push(Row {
            temperature,
            value,
            error,
            source: Cow::Owned(source),
        });
    }
    if columns.is_none() {
        return Err(ctx.header(None, DATASET_HEADER));
    }
    Ok(d)
}

pub fn load_dataset(path: &Path) -> Result<RelaxationDataset> {
    parse_dataset(&read_file(path)?, path)
}

pub fn save_dataset(path: &Path, d: &RelaxationDataset) -> Result<()> {
    write_file(path, &render_dataset(d)?)
}

pub fn render_fit(result: &FitResult, model: &ModelSpec, header: &str) -> String {
    let mut s = String::from(header);
    let _ = writeln!(s, "# model={} converged={} chi2={:e}", model.name, result.converged, result.chi2);
    let _ = writeln!(s, "{FIT_HEADER}");
    for (j, p) in model.params.iter().enumerate() {
        let _ = writeln!(s, "{},{:e},{:e},{}", p.name, result.params[j], result.stderr[j], result.fixed[j]);
    }
    s
}

pub fn render_polarization(points: &[(PolarizationPoint, f64)], header: &str) -> String {
    let mut s = String::from(header);
    let _ = writeln!(s, "{POLARIZATION_HEADER}");
    for (p, f) in points {
        let _ = writeln!(s, "{:e},{:e},{:e}", p.temperature, p.polarization, f);
    }
    s
}

/// Rows of (T, rate, 1/rate) with the units in a comment line.
pub fn render_model_eval(rows: &[(f64, f64)], rate_unit: &str, header: &str) -> String {
    let mut s = String::from(header);
    let time_unit = match rate_unit {
        "1/us" => "us",
        "1/s" => "s",
        other => other,
    };
    let _ = writeln!(s, "# rate in {rate_unit}, time in {time_unit}");
    let _ = writeln!(s, "{MODEL_EVAL_HEADER}");
    for &(t, r) in rows {
        let _ = writeln!(s, "{t:e},{r:e},{:e}", 1.0 / r);
    }
    s
}

pub fn render_scan(points: &[T2ScanPoint], header: &str) -> String {
    let mut s = String::from(header);
    let _ = writeln!(s, "{SCAN_HEADER}");
    for p in points {
        let _ = writeln!(
            s,
            "{:e},{:e},{:e},{:e},{:e}",
            p.temperature, p.flip_flop_factor, p.rate, p.t2, p.t2_stderr
        );
    }
    s
}

/// Default file name inside an output directory.
pub fn output_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use spinbath_core::datasets::bundled;

    #[test]
    fn bundled_dataset_round_trips() {
        let d = bundled(Center::Nv, Quantity::T2);
        let text = render_dataset(&d).unwrap();
        let back = parse_dataset(&text, Path::new("x.csv")).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn minimal_file_gets_defaults() {
        let text = "# digitized\ntemperature_K,value_s\n300,6.7e-6\n20,8.3e-6\n";
        let d = parse_dataset(text, Path::new("fig3.csv")).unwrap();
        assert_eq!(d.rows.len(), 2);
        assert_eq!(d.rows[0].error, 0.0);
        assert_eq!(d.rows[1].source, "user data: fig3.csv");
        assert_eq!(d.metadata, [" digitized"]);
    }

    #[test]
    fn row_errors_name_row_and_column() {
        let text = "temperature_K,value_s,error_s\n300,6.7e-6,1e-7\n-1,5e-6,0\n";
        match parse_dataset(text, Path::new("d.csv")) {
            Err(Error::Row { row, line, column, .. }) => {
                assert_eq!((row, line, column.as_str()), (2, 3, "temperature_K"));
            }
            other => panic!("{other:?}"),
        }
        let text = "temperature_K,value_s,error_s\n300,abc,0\n";
        assert!(matches!(parse_dataset(text, Path::new("d.csv")), Err(Error::Row { column, .. }) if column == "value_s"));
        let text = "T,tau\n300,1\n";
        assert!(matches!(parse_dataset(text, Path::new("d.csv")), Err(Error::Header { .. })));
        assert!(matches!(parse_dataset("", Path::new("d.csv")), Err(Error::Header { .. })));
        let text = "temperature_K,value_s\n300,1,2\n";
        assert!(matches!(parse_dataset(text, Path::new("d.csv")), Err(Error::Row { .. })));
    }

    #[test]
    fn trace_round_trips() {
        let t = DecayTrace {
            sequence: Sequence::HahnEcho,
            delays: vec![0.0, 1e-6, 2.5e-6],
            amplitude: vec![1.0, 0.7, 0.1 + 0.2],
            std_error: vec![0.0, 0.01, 1.0 / 3.0],
            n_realizations: 100,
            seed: 7,
        };
        let text = render_trace(&t, &provenance("ab", 7));
        assert!(text.contains("# sequence=hahn_echo n_realizations=100 seed=7\n"));
        assert_eq!(parse_trace(&text, Path::new("t.csv")).unwrap(), t);
    }
}
