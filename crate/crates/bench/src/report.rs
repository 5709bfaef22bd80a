//! Report files: per-mixture CSV, aggregate CSV/JSON, error ledger,
//! scenario manifest and timings.

use std::fs;
use std::path::Path;

use sebench_core::metrics::MetricReport;
use sebench_core::mixer::MixtureScenario;

use crate::aggregate::{AggregateRow, AggregateSummary, Metric, NoiseAggregateRow};
use crate::pipeline::{ErrorEntry, Timing};
use crate::BenchError;

pub const REPORT_HEADER: [&str; 9] = [
    "clean_id", "noise_id", "snr_db", "algorithm", "stoi", "stoi_raw", "sdr_db", "si_sdr_db", "pesq",
];
pub const AGGREGATE_HEADER: [&str; 10] = [
    "algorithm", "snr_db", "metric", "mean", "variance", "median", "q1", "q3", "outliers", "n",
];

/// `%g` with 6 significant digits: fixed notation for exponents in
/// [-4, 6), scientific otherwise, trailing zeros removed.
pub fn fmt_g6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent in {:e} output");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let digits = (5 - exp) as usize;
        trim_zeros(&format!("{x:.digits$}")).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Shortest representation that parses back to the same value; `inf` for +inf.
pub fn fmt_full(x: f64) -> String {
    x.to_string()
}

fn parse_f64(field: &str, what: &str) -> Result<f64, BenchError> {
    field
        .parse()
        .map_err(|_| BenchError::Parse(format!("{what}: {field:?} is not a number")))
}

fn parse_usize(field: &str, what: &str) -> Result<usize, BenchError> {
    field
        .parse()
        .map_err(|_| BenchError::Parse(format!("{what}: {field:?} is not a count")))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), BenchError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| BenchError::io(path, e))
}

fn check_header(rdr: &mut csv::Reader<&[u8]>, expected: &[&str]) -> Result<(), BenchError> {
    let header = rdr.headers()?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(BenchError::Parse(format!(
            "expected header {}, got {}",
            expected.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>, BenchError> {
    w.into_inner()
        .map_err(|e| BenchError::Parse(format!("csv flush: {e}")))
}

pub fn reports_csv(reports: &[MetricReport]) -> Result<Vec<u8>, BenchError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(REPORT_HEADER)?;
    for r in reports {
        w.write_record([
            r.clean_id.clone(),
            r.noise_id.clone(),
            fmt_full(r.snr_db),
            r.algorithm.clone(),
            fmt_full(r.stoi),
            fmt_full(r.stoi_raw),
            fmt_full(r.sdr_db),
            fmt_full(r.si_sdr_db),
            r.pesq.map(fmt_full).unwrap_or_default(),
        ])?;
    }
    finish(w)
}

pub fn parse_reports_csv(bytes: &[u8]) -> Result<Vec<MetricReport>, BenchError> {
    let mut rdr = csv::Reader::from_reader(bytes);
    check_header(&mut rdr, &REPORT_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let f = |i: usize| rec.get(i).unwrap_or("");
        out.push(MetricReport {
            clean_id: f(0).to_string(),
            noise_id: f(1).to_string(),
            snr_db: parse_f64(f(2), "snr_db")?,
            algorithm: f(3).to_string(),
            stoi: parse_f64(f(4), "stoi")?,
            stoi_raw: parse_f64(f(5), "stoi_raw")?,
            sdr_db: parse_f64(f(6), "sdr_db")?,
            si_sdr_db: parse_f64(f(7), "si_sdr_db")?,
            pesq: match f(8) {
                "" => None,
                s => Some(parse_f64(s, "pesq")?),
            },
        });
    }
    Ok(out)
}

pub fn read_reports(path: &Path) -> Result<Vec<MetricReport>, BenchError> {
    let bytes = fs::read(path).map_err(|e| BenchError::io(path, e))?;
    parse_reports_csv(&bytes)
}

pub fn write_reports(path: &Path, reports: &[MetricReport]) -> Result<(), BenchError> {
    write_file(path, &reports_csv(reports)?)
}

fn stat_fields(r: &AggregateRow) -> [String; 10] {
    [
        r.algorithm.clone(),
        fmt_g6(r.snr_db),
        r.metric.as_str().to_string(),
        fmt_g6(r.mean),
        fmt_g6(r.variance),
        fmt_g6(r.median),
        fmt_g6(r.q1),
        fmt_g6(r.q3),
        r.outliers.to_string(),
        r.n.to_string(),
    ]
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> Result<Vec<u8>, BenchError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(AGGREGATE_HEADER)?;
    for r in rows {
        w.write_record(stat_fields(r))?;
    }
    finish(w)
}

fn parse_stat_fields(f: &dyn Fn(usize) -> String) -> Result<AggregateRow, BenchError> {
    let metric_name = f(2);
    Ok(AggregateRow {
        algorithm: f(0),
        snr_db: parse_f64(&f(1), "snr_db")?,
        metric: Metric::parse(&metric_name)
            .ok_or_else(|| BenchError::Parse(format!("unknown metric {metric_name:?}")))?,
        mean: parse_f64(&f(3), "mean")?,
        variance: parse_f64(&f(4), "variance")?,
        median: parse_f64(&f(5), "median")?,
        q1: parse_f64(&f(6), "q1")?,
        q3: parse_f64(&f(7), "q3")?,
        outliers: parse_usize(&f(8), "outliers")?,
        n: parse_usize(&f(9), "n")?,
    })
}

pub fn parse_aggregate_csv(bytes: &[u8]) -> Result<Vec<AggregateRow>, BenchError> {
    let mut rdr = csv::Reader::from_reader(bytes);
    check_header(&mut rdr, &AGGREGATE_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        out.push(parse_stat_fields(&|i| rec.get(i).unwrap_or("").to_string())?);
    }
    Ok(out)
}

pub fn aggregate_by_noise_csv(rows: &[NoiseAggregateRow]) -> Result<Vec<u8>, BenchError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["noise_id"];
    header.extend(AGGREGATE_HEADER);
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.noise_id.clone()];
        rec.extend(stat_fields(&r.row));
        w.write_record(&rec)?;
    }
    finish(w)
}

/// Pretty JSON of the aggregate rows and the excluded-inf counts, with the
/// same 6-significant-digit rounding as the CSV.
pub fn aggregate_json(summary: &AggregateSummary) -> Result<Vec<u8>, BenchError> {
    let round = |x: f64| -> f64 { fmt_g6(x).parse().expect("fmt_g6 output parses") };
    let rounded = AggregateSummary {
        rows: summary
            .rows
            .iter()
            .map(|r| AggregateRow {
                snr_db: round(r.snr_db),
                mean: round(r.mean),
                variance: round(r.variance),
                median: round(r.median),
                q1: round(r.q1),
                q3: round(r.q3),
                ..r.clone()
            })
            .collect(),
        excluded_inf: summary.excluded_inf.clone(),
    };
    let mut bytes = serde_json::to_vec_pretty(&rounded)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn errors_csv(entries: &[ErrorEntry]) -> Result<Vec<u8>, BenchError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["clean_id", "noise_id", "snr_db", "algorithm", "stage", "message"])?;
    for e in entries {
        w.write_record([
            e.clean_id.clone(),
            e.noise_id.clone(),
            fmt_full(e.snr_db),
            e.algorithm.clone(),
            e.stage.to_string(),
            e.message.clone(),
        ])?;
    }
    finish(w)
}

pub fn timings_csv(timings: &[Timing]) -> Result<Vec<u8>, BenchError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["scenario", "algorithm", "runtime_seconds"])?;
    for t in timings {
        w.write_record([t.scenario.clone(), t.algorithm.clone(), fmt_full(t.runtime_seconds)])?;
    }
    finish(w)
}

pub fn scenarios_jsonl(scenarios: &[MixtureScenario]) -> Result<Vec<u8>, BenchError> {
    let mut out = Vec::new();
    for s in scenarios {
        serde_json::to_writer(&mut out, s)?;
        out.push(b'\n');
    }
    Ok(out)
}

pub fn parse_scenarios_jsonl(bytes: &[u8]) -> Result<Vec<MixtureScenario>, BenchError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| BenchError::Parse(format!("scenario manifest is not UTF-8: {e}")))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(BenchError::from))
        .collect()
}

pub fn read_scenarios(path: &Path) -> Result<Vec<MixtureScenario>, BenchError> {
    let bytes = fs::read(path).map_err(|e| BenchError::io(path, e))?;
    parse_scenarios_jsonl(&bytes)
}

/// Write every aggregate artifact into `dir`.
pub fn write_aggregates(dir: &Path, reports: &[MetricReport]) -> Result<AggregateSummary, BenchError> {
    let summary = crate::aggregate(reports)?;
    let by_noise = crate::aggregate_by_noise(reports)?;
    write_file(&dir.join(AGGREGATE_CSV), &aggregate_csv(&summary.rows)?)?;
    write_file(&dir.join(AGGREGATE_JSON), &aggregate_json(&summary)?)?;
    write_file(&dir.join(AGGREGATE_BY_NOISE_CSV), &aggregate_by_noise_csv(&by_noise)?)?;
    Ok(summary)
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), BenchError> {
    write_file(path, bytes)
}

pub const REPORTS_CSV: &str = "reports.csv";
pub const AGGREGATE_CSV: &str = "aggregate.csv";
pub const AGGREGATE_JSON: &str = "aggregate.json";
pub const AGGREGATE_BY_NOISE_CSV: &str = "aggregate_by_noise.csv";
pub const ERRORS_CSV: &str = "errors.csv";
pub const TIMINGS_CSV: &str = "timings.csv";
pub const SCENARIOS_JSONL: &str = "scenarios.jsonl";
