//! Measurement record files (CSV) for homodyne, PNR, heterodyne and
//! multimode data.
//!
//! Lines starting with `#` are comments. Floats are written in shortest
//! round-trip form, so a written file re-reads to identical samples.

use std::f64::consts::PI;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::displaced::PnrSample;
use crate::error::{Error, Result};
use crate::homodyne::HomodyneSample;
use crate::multimode::{ModeOutcome, MultimodeSample};

pub const QUADRATURE_HEADER: &str = "theta,x";
pub const PNR_HEADER: &str = "n,alpha_re,alpha_im";
pub const HETERODYNE_HEADER: &str = "alpha_re,alpha_im";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Quadrature,
    Pnr,
    Heterodyne,
    MultimodeQuadrature { modes: usize },
    MultimodePnr { modes: usize },
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn multimode_header(kind: RecordKind) -> String {
    let (modes, fields): (usize, &[&str]) = match kind {
        RecordKind::MultimodeQuadrature { modes } => (modes, &["theta", "x"]),
        RecordKind::MultimodePnr { modes } => (modes, &["n", "alpha_re", "alpha_im"]),
        _ => unreachable!("not a multimode kind"),
    };
    (0..modes)
        .flat_map(|m| fields.iter().map(move |f| format!("mode{m}_{f}")))
        .collect::<Vec<_>>()
        .join(",")
}

fn header_for(kind: RecordKind) -> String {
    match kind {
        RecordKind::Quadrature => QUADRATURE_HEADER.into(),
        RecordKind::Pnr => PNR_HEADER.into(),
        RecordKind::Heterodyne => HETERODYNE_HEADER.into(),
        k => multimode_header(k),
    }
}

fn kind_from_header(header: &str) -> Option<RecordKind> {
    match header {
        QUADRATURE_HEADER => return Some(RecordKind::Quadrature),
        PNR_HEADER => return Some(RecordKind::Pnr),
        HETERODYNE_HEADER => return Some(RecordKind::Heterodyne),
        _ => {}
    }
    let cols = header.split(',').count();
    for (kind, width) in [
        (RecordKind::MultimodeQuadrature { modes: cols / 2 }, 2),
        (RecordKind::MultimodePnr { modes: cols / 3 }, 3),
    ] {
        if cols % width == 0 && cols > 0 && multimode_header(kind) == header {
            return Some(kind);
        }
    }
    None
}

/// Non-comment lines with their 1-based line numbers.
struct Rows {
    path: PathBuf,
    header: (u64, String),
    rows: Vec<(u64, Vec<String>)>,
}

fn read_rows(path: &Path) -> Result<Rows> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut header = None;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let fields: Vec<String> = rec.iter().map(str::to_string).collect();
        if fields.iter().all(|f| f.is_empty()) {
            continue;
        }
        if header.is_none() {
            header = Some((line, fields.join(",")));
        } else {
            rows.push((line, fields));
        }
    }
    let header = header.ok_or(Error::EmptySamples)?;
    Ok(Rows {
        path: path.to_path_buf(),
        header,
        rows,
    })
}

impl Rows {
    fn expect(&self, kind: RecordKind) -> Result<()> {
        let want = header_for(kind);
        if self.header.1 != want {
            return Err(parse_err(
                &self.path,
                self.header.0,
                format!("expected header \"{want}\", found \"{}\"", self.header.1),
            ));
        }
        if self.rows.is_empty() {
            return Err(Error::EmptySamples);
        }
        Ok(())
    }

    fn float(&self, line: u64, field: &str, name: &str) -> Result<f64> {
        let v: f64 = field
            .parse()
            .map_err(|_| parse_err(&self.path, line, format!("{name}: cannot parse \"{field}\" as a number")))?;
        if !v.is_finite() {
            return Err(parse_err(&self.path, line, format!("{name} is not finite")));
        }
        Ok(v)
    }

    fn count(&self, line: u64, field: &str) -> Result<usize> {
        field
            .parse()
            .map_err(|_| parse_err(&self.path, line, format!("n: \"{field}\" is not a non-negative integer")))
    }

    fn width(&self, line: u64, fields: &[String], width: usize) -> Result<()> {
        if fields.len() != width {
            return Err(parse_err(
                &self.path,
                line,
                format!("expected {width} fields, found {}", fields.len()),
            ));
        }
        Ok(())
    }

    fn homodyne(&self, line: u64, theta: &str, x: &str) -> Result<HomodyneSample> {
        let theta = self.float(line, theta, "theta")?;
        if !(0.0..PI).contains(&theta) {
            return Err(parse_err(&self.path, line, format!("theta {theta} outside [0, π)")));
        }
        let x = self.float(line, x, "x")?;
        Ok(HomodyneSample { theta, x })
    }

    fn pnr(&self, line: u64, n: &str, re: &str, im: &str) -> Result<PnrSample> {
        Ok(PnrSample {
            n: self.count(line, n)?,
            alpha: C64::new(self.float(line, re, "alpha_re")?, self.float(line, im, "alpha_im")?),
        })
    }
}

fn write_lines(path: &Path, header: &str, lines: impl Iterator<Item = String>) -> Result<()> {
    let mut f = std::io::BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    writeln!(f, "{header}").map_err(|e| io_err(path, e))?;
    for l in lines {
        writeln!(f, "{l}").map_err(|e| io_err(path, e))?;
    }
    f.flush().map_err(|e| io_err(path, e))
}

pub fn write_quadrature(path: &Path, samples: &[HomodyneSample]) -> Result<()> {
    write_lines(path, QUADRATURE_HEADER, samples.iter().map(|s| format!("{},{}", s.theta, s.x)))
}

pub fn read_quadrature(path: &Path) -> Result<Vec<HomodyneSample>> {
    let rows = read_rows(path)?;
    rows.expect(RecordKind::Quadrature)?;
    rows.rows
        .iter()
        .map(|(line, f)| {
            rows.width(*line, f, 2)?;
            rows.homodyne(*line, &f[0], &f[1])
        })
        .collect()
}

pub fn write_pnr(path: &Path, samples: &[PnrSample]) -> Result<()> {
    write_lines(
        path,
        PNR_HEADER,
        samples.iter().map(|s| format!("{},{},{}", s.n, s.alpha.re, s.alpha.im)),
    )
}

pub fn read_pnr(path: &Path) -> Result<Vec<PnrSample>> {
    let rows = read_rows(path)?;
    rows.expect(RecordKind::Pnr)?;
    rows.rows
        .iter()
        .map(|(line, f)| {
            rows.width(*line, f, 3)?;
            rows.pnr(*line, &f[0], &f[1], &f[2])
        })
        .collect()
}

pub fn write_heterodyne(path: &Path, samples: &[C64]) -> Result<()> {
    write_lines(path, HETERODYNE_HEADER, samples.iter().map(|a| format!("{},{}", a.re, a.im)))
}

pub fn read_heterodyne(path: &Path) -> Result<Vec<C64>> {
    let rows = read_rows(path)?;
    rows.expect(RecordKind::Heterodyne)?;
    rows.rows
        .iter()
        .map(|(line, f)| {
            rows.width(*line, f, 2)?;
            Ok(C64::new(
                rows.float(*line, &f[0], "alpha_re")?,
                rows.float(*line, &f[1], "alpha_im")?,
            ))
        })
        .collect()
}

pub fn write_multimode(path: &Path, samples: &[MultimodeSample]) -> Result<()> {
    let first = samples.first().ok_or(Error::EmptySamples)?;
    let modes = first.modes();
    let kind = match first.per_mode[0] {
        ModeOutcome::Homodyne(_) => RecordKind::MultimodeQuadrature { modes },
        ModeOutcome::Pnr(_) => RecordKind::MultimodePnr { modes },
    };
    let mut lines = Vec::with_capacity(samples.len());
    for s in samples {
        if s.modes() != modes {
            return Err(Error::DimensionMismatch("samples have different mode counts".into()));
        }
        let cols: Vec<String> = s
            .per_mode
            .iter()
            .map(|o| match o {
                ModeOutcome::Homodyne(h) => format!("{},{}", h.theta, h.x),
                ModeOutcome::Pnr(p) => format!("{},{},{}", p.n, p.alpha.re, p.alpha.im),
            })
            .collect();
        lines.push(cols.join(","));
    }
    write_lines(path, &header_for(kind), lines.into_iter())
}

pub fn read_multimode(path: &Path) -> Result<Vec<MultimodeSample>> {
    let rows = read_rows(path)?;
    let kind = kind_from_header(&rows.header.1).ok_or_else(|| {
        parse_err(path, rows.header.0, format!("unrecognized multimode header \"{}\"", rows.header.1))
    })?;
    rows.expect(kind)?;
    rows.rows
        .iter()
        .map(|(line, f)| {
            let per_mode = match kind {
                RecordKind::MultimodeQuadrature { modes } => {
                    rows.width(*line, f, 2 * modes)?;
                    f.chunks(2)
                        .map(|c| rows.homodyne(*line, &c[0], &c[1]).map(ModeOutcome::Homodyne))
                        .collect::<Result<Vec<_>>>()?
                }
                RecordKind::MultimodePnr { modes } => {
                    rows.width(*line, f, 3 * modes)?;
                    f.chunks(3)
                        .map(|c| rows.pnr(*line, &c[0], &c[1], &c[2]).map(ModeOutcome::Pnr))
                        .collect::<Result<Vec<_>>>()?
                }
                _ => unreachable!(),
            };
            Ok(MultimodeSample { per_mode })
        })
        .collect()
}

/// Reads only the header to identify the record kind.
pub fn detect_kind(path: &Path) -> Result<RecordKind> {
    let rows = read_rows(path)?;
    kind_from_header(&rows.header.1).ok_or_else(|| {
        parse_err(path, rows.header.0, format!("unrecognized header \"{}\"", rows.header.1))
    })
}

/// Count, θ coverage histogram (8 bins over [0, π)) and x range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSummary {
    pub count: usize,
    pub theta_histogram: Vec<u64>,
    pub x_min: f64,
    pub x_max: f64,
}

pub fn summarize_quadrature(samples: &[HomodyneSample]) -> Result<QuadratureSummary> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut hist = vec![0u64; 8];
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in samples {
        let bin = ((s.theta / PI * 8.0) as usize).min(7);
        hist[bin] += 1;
        lo = lo.min(s.x);
        hi = hi.max(s.x);
    }
    Ok(QuadratureSummary {
        count: samples.len(),
        theta_histogram: hist,
        x_min: lo,
        x_max: hi,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PnrSummary {
    pub count: usize,
    pub max_n: usize,
    pub mean_n: f64,
    pub max_abs_alpha: f64,
}

pub fn summarize_pnr(samples: &[PnrSample]) -> Result<PnrSummary> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    Ok(PnrSummary {
        count: samples.len(),
        max_n: samples.iter().map(|s| s.n).max().unwrap_or(0),
        mean_n: samples.iter().map(|s| s.n as f64).sum::<f64>() / samples.len() as f64,
        max_abs_alpha: samples.iter().map(|s| s.alpha.norm()).fold(0.0, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    fn line_of(e: Error) -> u64 {
        match e {
            Error::Parse { line, .. } => line,
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn quadrature_round_trip_and_comments() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "q.csv", "# lab run 3\ntheta,x\n0.1,0.5\n# mid comment\n1.2,-0.25\n3.0,2\n");
        let s = read_quadrature(&p).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s[1], HomodyneSample { theta: 1.2, x: -0.25 });
        let out = dir.path().join("out.csv");
        write_quadrature(&out, &s).unwrap();
        assert_eq!(read_quadrature(&out).unwrap(), s);
        let summary = summarize_quadrature(&s).unwrap();
        assert_eq!(summary.count, 3);
        assert_eq!(summary.theta_histogram.iter().sum::<u64>(), 3);
        assert_eq!((summary.x_min, summary.x_max), (-0.25, 2.0));
    }

    #[test]
    fn quadrature_rejections_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "theta,x\n4.0,0.1\n");
        assert_eq!(line_of(read_quadrature(&p).unwrap_err()), 2);
        let p = write(&dir, "b.csv", "theta,x\n0.1,0.1\n0.2,NaN\n");
        assert_eq!(line_of(read_quadrature(&p).unwrap_err()), 3);
        let p = write(&dir, "c.csv", "theta,x\n0.1,0.1\n0.2,abc\n");
        assert_eq!(line_of(read_quadrature(&p).unwrap_err()), 3);
        let p = write(&dir, "d.csv", "# c\ntheta,x\n-0.1,0.0\n");
        assert_eq!(line_of(read_quadrature(&p).unwrap_err()), 3);
        let p = write(&dir, "e.csv", "x,theta\n0.1,0.1\n");
        assert_eq!(line_of(read_quadrature(&p).unwrap_err()), 1);
        let p = write(&dir, "f.csv", "theta,x\n0.1\n");
        assert_eq!(line_of(read_quadrature(&p).unwrap_err()), 2);
        let p = write(&dir, "g.csv", "theta,x\n");
        assert!(matches!(read_quadrature(&p), Err(Error::EmptySamples)));
        let p = write(&dir, "h.csv", "");
        assert!(matches!(read_quadrature(&p), Err(Error::EmptySamples)));
        assert!(matches!(read_quadrature(&dir.path().join("missing.csv")), Err(Error::Io { .. })));
    }

    #[test]
    fn pnr_and_heterodyne_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "p.csv", "n,alpha_re,alpha_im\n0,0.5,-1\n3,1e-3,2\n");
        let s = read_pnr(&p).unwrap();
        assert_eq!(s[1].n, 3);
        assert_eq!(summarize_pnr(&s).unwrap().max_n, 3);
        let p = write(&dir, "p2.csv", "n,alpha_re,alpha_im\n0,0.5,-1\n-1,0,0\n");
        assert_eq!(line_of(read_pnr(&p).unwrap_err()), 3);
        let p = write(&dir, "p3.csv", "n,alpha_re,alpha_im\n1.5,0,0\n");
        assert_eq!(line_of(read_pnr(&p).unwrap_err()), 2);
        let h = dir.path().join("h.csv");
        let alphas = vec![C64::new(0.1, 0.2), C64::new(-3.0, 1.0 / 3.0)];
        write_heterodyne(&h, &alphas).unwrap();
        assert_eq!(read_heterodyne(&h).unwrap(), alphas);
        assert_eq!(detect_kind(&h).unwrap(), RecordKind::Heterodyne);
    }

    #[test]
    fn multimode_files() {
        let dir = tempfile::tempdir().unwrap();
        let s = vec![MultimodeSample::new(vec![
            ModeOutcome::Homodyne(HomodyneSample { theta: 0.3, x: 1.5 }),
            ModeOutcome::Homodyne(HomodyneSample { theta: 2.0, x: -0.1 }),
        ])
        .unwrap()];
        let p = dir.path().join("m.csv");
        write_multimode(&p, &s).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("mode0_theta,mode0_x,mode1_theta,mode1_x\n"));
        assert_eq!(read_multimode(&p).unwrap(), s);
        assert_eq!(detect_kind(&p).unwrap(), RecordKind::MultimodeQuadrature { modes: 2 });
        let p = write(&dir, "m2.csv", "mode0_n,mode0_alpha_re,mode0_alpha_im,mode1_n,mode1_alpha_re,mode1_alpha_im\n0,1,1,2,0,0\n");
        assert_eq!(read_multimode(&p).unwrap()[0].per_mode.len(), 2);
        let p = write(&dir, "m3.csv", "mode0_theta,mode0_x,mode1_theta,mode1_x\n0.1,0,0.2\n");
        assert_eq!(line_of(read_multimode(&p).unwrap_err()), 2);
    }

    proptest! {
        #[test]
        fn quadrature_files_round_trip(rows in proptest::collection::vec((0.0f64..3.14159, -1e3f64..1e3), 1..40)) {
            let dir = tempfile::tempdir().unwrap();
            let s: Vec<HomodyneSample> = rows.iter().map(|&(t, x)| HomodyneSample { theta: t, x }).collect();
            let p = dir.path().join("r.csv");
            write_quadrature(&p, &s).unwrap();
            prop_assert_eq!(read_quadrature(&p).unwrap(), s);
        }
    }
}
