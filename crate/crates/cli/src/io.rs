//! CSV and text file formats.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use piconvae_core::model::{checkpoint, EpochRecord, PiConvAe};
use piconvae_core::scoring::{AnomalyReport, Confusion, Metrics};
use piconvae_core::telemetry::{MeasurementFrame, SeriesSet, INGEST_EPS};

use crate::error::{CliError, CliResult};

pub const SERIES_HEADER: [&str; 7] = ["t", "v", "i", "theta", "delta", "p", "q"];

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(CliError::io(path))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> CliResult<()> {
    w.flush().map_err(CliError::io(path))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

pub fn write_series(path: &Path, frames: &[MeasurementFrame]) -> CliResult<()> {
    let mut w = create(path)?;
    let io = CliError::io(path);
    let mut text = String::with_capacity(64 * (frames.len() + 1));
    text.push_str(&SERIES_HEADER.join(","));
    text.push('\n');
    for f in frames {
        let _ = writeln!(text, "{},{},{},{},{},{},{}", f.t, f.v, f.i, f.theta, f.delta, f.p, f.q);
    }
    w.write_all(text.as_bytes()).map_err(io)?;
    finish(w, path)
}

/// A series read from CSV, with one warning per frame whose power identities
/// are off by more than the ingest tolerance.
#[derive(Debug)]
pub struct Ingested {
    pub series: SeriesSet,
    pub warnings: Vec<String>,
}

pub fn read_series(path: &Path) -> CliResult<Ingested> {
    let file = File::open(path).map_err(CliError::io(path))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let name = path.display();
    let headers = rdr.headers().map_err(csv_err(path))?.clone();
    let mut cols = [0usize; 7];
    for (k, col) in SERIES_HEADER.iter().enumerate() {
        cols[k] = headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(col))
            .ok_or_else(|| CliError::Data(format!("{name}: missing column {col:?}")))?;
    }
    let mut frames = Vec::new();
    let mut warnings = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 1;
        let rec = rec.map_err(|e| CliError::Data(format!("{name}: row {row}: {e}")))?;
        let cell = |j: usize| {
            let col = SERIES_HEADER[j];
            rec.get(cols[j]).ok_or_else(|| CliError::Data(format!("{name}: row {row}: missing column {col:?}")))
        };
        let t: u64 = cell(0)?
            .parse()
            .map_err(|_| CliError::Data(format!("{name}: row {row}, column \"t\": not an integer: {:?}", rec.get(cols[0]).unwrap_or(""))))?;
        let mut vals = [0.0; 6];
        for (j, v) in vals.iter_mut().enumerate() {
            let raw = cell(j + 1)?;
            *v = raw.parse().ok().filter(|x: &f64| x.is_finite()).ok_or_else(|| {
                CliError::Data(format!("{name}: row {row}, column {:?}: not a finite number: {raw:?}", SERIES_HEADER[j + 1]))
            })?;
        }
        let f = MeasurementFrame::from_row(t, vals);
        let (rp, rq) = f.power_residuals();
        if rp.abs() > INGEST_EPS || rq.abs() > INGEST_EPS {
            let msg = format!("{name}: row {row} (t={t}): power identity off by P {rp:.3e}, Q {rq:.3e}");
            log::warn!("{msg}");
            warnings.push(msg);
        }
        frames.push(f);
    }
    if frames.is_empty() {
        return Err(CliError::Data(format!("{name}: no data rows")));
    }
    let series = SeriesSet::new(frames)?;
    Ok(Ingested { series, warnings })
}

/// `t,label` over the test split.
pub fn write_labels(path: &Path, series: &SeriesSet, labels: &[bool]) -> CliResult<()> {
    let frames = &series.frames()[series.test_range()];
    let mut text = String::from("t,label\n");
    for (f, &l) in frames.iter().zip(labels) {
        let _ = writeln!(text, "{},{}", f.t, u8::from(l));
    }
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).map_err(CliError::io(path))?;
    finish(w, path)
}

fn parse_flag(raw: &str) -> Option<bool> {
    match raw {
        "1" | "true" => Some(true),
        "0" | "false" => Some(false),
        _ => None,
    }
}

/// Reads labels for the test split of `series`; timestamps must match.
pub fn read_labels(path: &Path, series: &SeriesSet) -> CliResult<Vec<bool>> {
    let file = File::open(path).map_err(CliError::io(path))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let name = path.display();
    let headers = rdr.headers().map_err(csv_err(path))?.clone();
    let col = |c: &str| {
        headers
            .iter()
            .position(|h| h == c)
            .ok_or_else(|| CliError::Data(format!("{name}: missing column {c:?}")))
    };
    let (ct, cl) = (col("t")?, col("label")?);
    let frames = &series.frames()[series.test_range()];
    let mut labels = Vec::with_capacity(frames.len());
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 1;
        let rec = rec.map_err(|e| CliError::Data(format!("{name}: row {row}: {e}")))?;
        let t: u64 = rec
            .get(ct)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| CliError::Data(format!("{name}: row {row}, column \"t\": not an integer")))?;
        let l = rec
            .get(cl)
            .and_then(parse_flag)
            .ok_or_else(|| CliError::Data(format!("{name}: row {row}, column \"label\": expected 0 or 1")))?;
        match frames.get(k) {
            Some(f) if f.t == t => labels.push(l),
            Some(f) => {
                return Err(CliError::Data(format!(
                    "{name}: row {row}: t={t} but the test split has t={} here",
                    f.t
                )))
            }
            None => return Err(CliError::Data(format!("{name}: more labels than test samples ({})", frames.len()))),
        }
    }
    if labels.len() != frames.len() {
        return Err(CliError::Data(format!(
            "{name}: {} labels for {} test samples",
            labels.len(),
            frames.len()
        )));
    }
    Ok(labels)
}

/// `t,score,verdict,label`.
pub fn write_verdicts(path: &Path, series: &SeriesSet, report: &AnomalyReport) -> CliResult<()> {
    let frames = &series.frames()[report.start..report.start + report.aggregate.len()];
    let mut text = String::from("t,score,verdict,label\n");
    for (k, f) in frames.iter().enumerate() {
        let _ = writeln!(
            text,
            "{},{},{},{}",
            f.t,
            report.aggregate[k],
            u8::from(report.verdicts[k]),
            u8::from(report.labels[k])
        );
    }
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).map_err(CliError::io(path))?;
    finish(w, path)
}

/// A verdict file read back: `(score, verdict, label)` per row.
pub struct Verdicts {
    pub scores: Vec<f64>,
    pub verdicts: Vec<bool>,
    pub labels: Vec<bool>,
}

pub fn read_verdicts(path: &Path) -> CliResult<Verdicts> {
    let file = File::open(path).map_err(CliError::io(path))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let name = path.display();
    let headers = rdr.headers().map_err(csv_err(path))?.clone();
    let mut cols = [0usize; 3];
    for (k, c) in ["score", "verdict", "label"].iter().enumerate() {
        cols[k] = headers
            .iter()
            .position(|h| h == *c)
            .ok_or_else(|| CliError::Data(format!("{name}: missing column {c:?}")))?;
    }
    let mut out = Verdicts {
        scores: Vec::new(),
        verdicts: Vec::new(),
        labels: Vec::new(),
    };
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 1;
        let rec = rec.map_err(|e| CliError::Data(format!("{name}: row {row}: {e}")))?;
        let bad = |c: &str| CliError::Data(format!("{name}: row {row}, column {c:?}: malformed value"));
        out.scores.push(rec.get(cols[0]).and_then(|v| v.parse().ok()).ok_or_else(|| bad("score"))?);
        out.verdicts.push(rec.get(cols[1]).and_then(parse_flag).ok_or_else(|| bad("verdict"))?);
        out.labels.push(rec.get(cols[2]).and_then(parse_flag).ok_or_else(|| bad("label"))?);
    }
    if out.scores.is_empty() {
        return Err(CliError::Data(format!("{name}: no data rows")));
    }
    Ok(out)
}

/// Metrics summary as `key = value` lines.
pub fn metrics_text(c: &Confusion, m: &Metrics, extra: &[(&str, String)]) -> String {
    let mut s = String::new();
    for (k, v) in extra {
        let _ = writeln!(s, "{k} = {v}");
    }
    let _ = writeln!(s, "tp = {}", c.tp);
    let _ = writeln!(s, "tn = {}", c.tn);
    let _ = writeln!(s, "fp = {}", c.fp);
    let _ = writeln!(s, "fn = {}", c.fn_);
    let _ = writeln!(s, "acc = {}", m.acc);
    let _ = writeln!(s, "prec = {}", m.prec);
    let _ = writeln!(s, "rec = {}", m.rec);
    let _ = writeln!(s, "f1 = {}", m.f1);
    let _ = writeln!(s, "prec_undefined = {}", m.prec_undefined);
    let _ = writeln!(s, "rec_undefined = {}", m.rec_undefined);
    let _ = writeln!(s, "false_positive_rate = {}", c.false_positive_rate());
    s
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(CliError::io(path))
}

/// Per-epoch losses. Physics columns are left empty for the baseline.
pub fn write_losses(path: &Path, records: &[EpochRecord], physics: bool) -> CliResult<()> {
    let mut text = String::from(
        "epoch,lr,train_total,train_recon,train_reg,train_phy_p,train_phy_q,val_total,val_recon,val_reg,val_phy_p,val_phy_q\n",
    );
    let phy = |v: f64| if physics { v.to_string() } else { String::new() };
    for r in records {
        let _ = writeln!(
            text,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.epoch,
            r.learning_rate,
            r.train.total,
            r.train.recon,
            r.train.reg,
            phy(r.train.phy_p),
            phy(r.train.phy_q),
            r.val.total,
            r.val.recon,
            r.val.reg,
            phy(r.val.phy_p),
            phy(r.val.phy_q)
        );
    }
    write_text(path, &text)
}

pub fn write_checkpoint(path: &Path, model: &PiConvAe) -> CliResult<()> {
    std::fs::write(path, checkpoint::encode(model)).map_err(CliError::io(path))
}

pub fn read_checkpoint(path: &Path) -> CliResult<PiConvAe> {
    let bytes = std::fs::read(path).map_err(CliError::io(path))?;
    checkpoint::decode(&bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// One row of a sensitivity sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    pub metrics: Metrics,
    pub confusion: Confusion,
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> CliResult<()> {
    let mut text = String::from("alpha,acc,prec,rec,f1\n");
    for r in rows {
        let m = &r.metrics;
        let _ = writeln!(text, "{},{},{},{},{}", r.alpha, m.acc, m.prec, m.rec, m.f1);
    }
    write_text(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use piconvae_core::telemetry::{generate_synthetic, GeneratorConfig};

    fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn series_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let s = generate_synthetic(&GeneratorConfig {
            length: 50,
            ..GeneratorConfig::default()
        })
        .unwrap();
        let p = dir.path().join("d.csv");
        write_series(&p, s.frames()).unwrap();
        let back = read_series(&p).unwrap();
        assert!(back.warnings.is_empty());
        assert_eq!(back.series.frames(), s.frames());
    }

    #[test]
    fn three_rows_and_inconsistent_p() {
        let dir = tempfile::tempdir().unwrap();
        let good = MeasurementFrame::from_phasors(0, 1.0, 0.5, 0.1, -0.2);
        let mut rows = String::from("t,v,i,theta,delta,p,q\n");
        for t in 0..3 {
            let p = if t == 1 { good.p + 0.5 } else { good.p };
            rows += &format!("{t},{},{},{},{},{},{}\n", good.v, good.i, good.theta, good.delta, p, good.q);
        }
        let r = read_series(&write(dir.path(), "a.csv", &rows)).unwrap();
        assert_eq!(r.series.len(), 3);
        assert_eq!(r.warnings.len(), 1);
        // oracle: recompute v·i·cos(θ−δ) directly
        let f = r.series.frames()[1];
        assert!((f.p - f.v * f.i * (f.theta - f.delta).cos() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn parse_errors_name_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let e = read_series(&write(dir.path(), "h.csv", "t,v,i,theta,delta,p,q\n")).unwrap_err();
        assert!(e.to_string().contains("no data rows"), "{e}");
        let e = read_series(&write(dir.path(), "m.csv", "t,v,i,theta,delta,p\n0,1,1,0,0,1\n")).unwrap_err();
        assert!(e.to_string().contains("\"q\""), "{e}");
        let e = read_series(&write(dir.path(), "n.csv", "t,v,i,theta,delta,p,q\n0,1,1,0,0,1,0\n1,1,x,0,0,1,0\n")).unwrap_err();
        assert!(e.to_string().contains("row 2") && e.to_string().contains("\"i\""), "{e}");
        assert_eq!(e.exit_code(), 2);
    }
}
