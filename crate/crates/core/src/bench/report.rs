//! CSV and SVG emission.

use std::fmt::Write as _;
use std::path::Path;

use super::{BenchmarkRow, BenchmarkTable, FcBenchmark, ProfileCurve};
use crate::error::{Error, Result};
use crate::usolve::IterationRecord;

const RUNS_HEADER: [&str; 8] = [
    "problem",
    "solver",
    "run_index",
    "seed",
    "success",
    "iterations",
    "elapsed_seconds",
    "start_point",
];

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    let bytes = w.into_inner().expect("in-memory writer never fails");
    String::from_utf8(bytes).expect("csv output is UTF-8")
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().from_writer(Vec::new())
}

fn record<W: std::io::Write>(w: &mut csv::Writer<W>, fields: &[String]) {
    w.write_record(fields).expect("in-memory writer never fails");
}

fn join_point(p: &[f64]) -> String {
    p.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

/// Runs table as CSV.
pub fn runs_csv(table: &BenchmarkTable) -> String {
    let mut w = writer();
    w.write_record(RUNS_HEADER).expect("in-memory writer never fails");
    for r in &table.rows {
        record(
            &mut w,
            &[
                r.problem.clone(),
                r.solver.clone(),
                r.run_index.to_string(),
                r.seed.to_string(),
                r.success.to_string(),
                r.iterations.to_string(),
                r.elapsed_seconds.to_string(),
                join_point(&r.start_point),
            ],
        );
    }
    finish(w)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: usize) -> Result<T> {
    let raw = rec.get(i).ok_or_else(|| Error::Parse(format!("line {line}: missing column {}", RUNS_HEADER[i])))?;
    raw.parse()
        .map_err(|_| Error::Parse(format!("line {line}: bad {} {raw:?}", RUNS_HEADER[i])))
}

/// Inverse of [`runs_csv`].
pub fn parse_runs_csv(text: &str) -> Result<BenchmarkTable> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    if header.iter().ne(RUNS_HEADER.iter().copied()) {
        return Err(Error::Parse(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let point = rec.get(7).unwrap_or("");
        let start_point = if point.is_empty() {
            Vec::new()
        } else {
            point
                .split(';')
                .map(|v| v.parse::<f64>().map_err(|_| Error::Parse(format!("line {line}: bad start_point {v:?}"))))
                .collect::<Result<_>>()?
        };
        rows.push(BenchmarkRow {
            problem: field(&rec, 0, line)?,
            solver: field(&rec, 1, line)?,
            run_index: field(&rec, 2, line)?,
            seed: field(&rec, 3, line)?,
            success: field(&rec, 4, line)?,
            iterations: field(&rec, 5, line)?,
            elapsed_seconds: field(&rec, 6, line)?,
            start_point,
        });
    }
    Ok(BenchmarkTable { rows })
}

/// One row per `c` with mean iterations then mean seconds, per solver.
pub fn fc_summary_csv(bench: &FcBenchmark) -> String {
    let mut w = writer();
    let mut header = vec!["c".to_string()];
    header.extend(bench.solvers.iter().map(|s| format!("iter_{s}")));
    header.extend(bench.solvers.iter().map(|s| format!("time_{s}")));
    record(&mut w, &header);
    for row in &bench.summary {
        let mut fields = vec![row.c.to_string()];
        fields.extend(row.mean_iterations.iter().map(|v| v.to_string()));
        fields.extend(row.mean_seconds.iter().map(|v| v.to_string()));
        record(&mut w, &fields);
    }
    finish(w)
}

/// Profile curves as `solver,tau,fraction`.
pub fn profile_csv(curves: &[ProfileCurve]) -> String {
    let mut w = writer();
    record(&mut w, &["solver".into(), "tau".into(), "fraction".into()]);
    for c in curves {
        for (t, f) in &c.points {
            record(&mut w, &[c.solver.clone(), t.to_string(), f.to_string()]);
        }
    }
    finish(w)
}

/// Per-iteration trace as CSV.
pub fn trace_csv(trace: &[IterationRecord]) -> String {
    let mut w = writer();
    let header = [
        "k",
        "f_value",
        "grad_norm",
        "alpha",
        "q_k",
        "cos_theta",
        "condition_number",
        "fallback_count",
    ];
    record(&mut w, &header.map(String::from));
    for r in trace {
        record(
            &mut w,
            &[
                r.k.to_string(),
                r.f_value.to_string(),
                r.grad_norm.to_string(),
                r.alpha.to_string(),
                r.q_k.map(|q| q.to_string()).unwrap_or_default(),
                r.cos_theta.to_string(),
                r.condition_number.to_string(),
                r.fallback_count.to_string(),
            ],
        );
    }
    finish(w)
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Step-function plot of the curves against `log2(tau)`.
pub fn profile_svg(curves: &[ProfileCurve], title: &str) -> String {
    let (w, h) = (640.0, 420.0);
    let (left, right, top, bottom) = (60.0, 140.0, 40.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let max_log = curves
        .iter()
        .flat_map(|c| c.points.iter().map(|p| p.0.log2()))
        .fold(0.0_f64, f64::max)
        .max(1.0)
        * 1.05;
    let sx = |t: f64| left + pw * t.log2() / max_log;
    let sy = |f: f64| top + ph * (1.0 - f);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#, left + pw / 2.0, escape(title));
    let _ = writeln!(s, r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{f}</text>"#, left - 6.0, sy(f) + 4.0);
    }
    let ticks = max_log.floor() as i32;
    for k in 0..=ticks {
        let x = sx(2f64.powi(k));
        let _ = writeln!(s, r#"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="black"/>"#, top + ph, top + ph + 4.0);
        let _ = writeln!(s, r#"<text x="{x}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#, top + ph + 17.0, 2f64.powi(k));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">tau (log2 scale)</text>"#, left + pw / 2.0, h - 10.0);

    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut pts = Vec::new();
        let mut prev = None;
        for &(t, f) in &c.points {
            if let Some(pf) = prev {
                pts.push(format!("{:.2},{:.2}", sx(t), sy(pf)));
            }
            pts.push(format!("{:.2},{:.2}", sx(t), sy(f)));
            prev = Some(f);
        }
        if let Some(pf) = prev {
            pts.push(format!("{:.2},{:.2}", left + pw, sy(pf)));
        }
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, pts.join(" "));
        let ly = top + 16.0 + 18.0 * i as f64;
        let lx = left + pw + 14.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 22.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12">{}</text>"#, lx + 28.0, ly + 4.0, escape(&c.solver));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Write `content` to `path`, with the path in any error.
pub fn write_file(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{run_fc_benchmark, FcConfig};

    fn sample() -> BenchmarkTable {
        BenchmarkTable {
            rows: vec![
                BenchmarkRow {
                    problem: "branin".into(),
                    solver: "q2".into(),
                    run_index: 3,
                    seed: 18_446_744_073_709_551_615,
                    success: true,
                    iterations: 7,
                    elapsed_seconds: 0.000_123_456_789,
                    start_point: vec![std::f64::consts::PI, -0.1, 1e-300],
                },
                BenchmarkRow {
                    problem: "fc@0.3".into(),
                    solver: "bfgs".into(),
                    run_index: 0,
                    seed: 0,
                    success: false,
                    iterations: 10_000,
                    elapsed_seconds: 1.5,
                    start_point: vec![0.3, 1.9],
                },
            ],
        }
    }

    #[test]
    fn runs_round_trip() {
        let t = sample();
        let text = runs_csv(&t);
        assert!(text.starts_with("problem,solver,run_index,seed,success,iterations,elapsed_seconds,start_point\n"));
        assert_eq!(parse_runs_csv(&text).unwrap(), t);
    }

    #[test]
    fn empty_outputs_have_headers_only() {
        assert_eq!(profile_csv(&[]), "solver,tau,fraction\n");
        assert_eq!(runs_csv(&BenchmarkTable::default()).lines().count(), 1);
    }

    #[test]
    fn malformed_runs_are_rejected() {
        assert!(parse_runs_csv("a,b\n1,2\n").is_err());
        let bad = "problem,solver,run_index,seed,success,iterations,elapsed_seconds,start_point\nx,q1,zero,0,true,1,0.1,1\n";
        assert!(matches!(parse_runs_csv(bad), Err(Error::Parse(_))));
    }

    #[test]
    fn fc_summary_layout() {
        let b = run_fc_benchmark(&FcConfig::default()).unwrap();
        let text = fc_summary_csv(&b);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "c,iter_bfgs,iter_q1,iter_q2,iter_q3,time_bfgs,time_q1,time_q2,time_q3");
        assert_eq!(lines.len(), 11);
        assert!(lines[1..].iter().all(|l| l.split(',').count() == 9));
    }

    #[test]
    fn svg_has_one_polyline_per_curve() {
        let curves = vec![
            ProfileCurve {
                solver: "a".into(),
                points: vec![(1.0, 0.5), (2.0, 1.0)],
            },
            ProfileCurve {
                solver: "b".into(),
                points: vec![(1.0, 0.5), (2.0, 1.0)],
            },
        ];
        let svg = profile_svg(&curves, "iterations");
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains(">a</text>") && svg.contains(">b</text>"));
    }

    #[test]
    fn write_errors_name_the_path() {
        let err = write_file(Path::new("/nonexistent-dir/x.csv"), "x").unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x.csv"));
    }
}
