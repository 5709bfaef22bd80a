//! Per-condition summary statistics over per-mixture reports.

use std::collections::BTreeMap;

use sebench_core::metrics::MetricReport;
use serde::{Deserialize, Serialize};

use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Stoi,
    Sdr,
    SiSdr,
    Pesq,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Stoi, Metric::Sdr, Metric::SiSdr, Metric::Pesq];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Stoi => "stoi",
            Metric::Sdr => "sdr",
            Metric::SiSdr => "si_sdr",
            Metric::Pesq => "pesq",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Metric::ALL.into_iter().find(|m| m.as_str() == s)
    }

    pub fn value(self, r: &MetricReport) -> Option<f64> {
        match self {
            Metric::Stoi => Some(r.stoi),
            Metric::Sdr => Some(r.sdr_db),
            Metric::SiSdr => Some(r.si_sdr_db),
            Metric::Pesq => r.pesq,
        }
    }
}

/// Mean, spread and boxplot summary of one metric for one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub algorithm: String,
    pub snr_db: f64,
    pub metric: Metric,
    pub mean: f64,
    /// Unbiased sample variance; 0 for a single value.
    pub variance: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    /// Values outside `[q1 - 1.5 IQR, q3 + 1.5 IQR]`.
    pub outliers: usize,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseAggregateRow {
    pub noise_id: String,
    #[serde(flatten)]
    pub row: AggregateRow,
}

/// Count of infinite values left out of one group's statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedInf {
    pub algorithm: String,
    pub snr_db: f64,
    pub metric: Metric,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateSummary {
    pub rows: Vec<AggregateRow>,
    pub excluded_inf: Vec<ExcludedInf>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub mean: f64,
    pub variance: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub outliers: usize,
    pub n: usize,
}

/// Linear interpolation between order statistics at position `(n - 1) p`.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * p;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Summary statistics of finite values; `None` when `values` is empty.
pub fn summarize(values: &[f64]) -> Option<Stats> {
    if values.is_empty() {
        return None;
    }
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &v) in values.iter().enumerate() {
        let delta = v - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (v - mean);
    }
    let n = values.len();
    let variance = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    // rounding in the running mean can step one ulp past the extremes
    let mean = mean.clamp(sorted[0], sorted[n - 1]);
    let q1 = quantile(&sorted, 0.25);
    let median = quantile(&sorted, 0.5);
    let q3 = quantile(&sorted, 0.75);
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let outliers = sorted.iter().filter(|&&v| v < lo || v > hi).count();
    Some(Stats {
        mean,
        variance,
        median,
        q1,
        q3,
        outliers,
        n,
    })
}

struct Group {
    values: Vec<f64>,
    excluded: usize,
}

/// Algorithms keep their first-appearance order; SNR levels ascend.
fn order_key(algorithms: &mut Vec<String>, name: &str) -> usize {
    match algorithms.iter().position(|a| a == name) {
        Some(i) => i,
        None => {
            algorithms.push(name.to_string());
            algorithms.len() - 1
        }
    }
}

type GroupKey = (usize, String, u64, Metric);

fn snr_key(snr: f64) -> u64 {
    // order-preserving map of f64 onto u64
    let bits = snr.to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | (1 << 63)
    }
}

fn collect_groups(
    reports: &[MetricReport],
    by_noise: bool,
) -> (Vec<String>, BTreeMap<GroupKey, (f64, Group)>) {
    let mut algorithms = Vec::new();
    let mut groups: BTreeMap<GroupKey, (f64, Group)> = BTreeMap::new();
    for r in reports {
        let a = order_key(&mut algorithms, &r.algorithm);
        let noise = if by_noise { r.noise_id.clone() } else { String::new() };
        for metric in Metric::ALL {
            let Some(v) = metric.value(r) else { continue };
            let (_, g) = groups
                .entry((a, noise.clone(), snr_key(r.snr_db), metric))
                .or_insert_with(|| {
                    (
                        r.snr_db,
                        Group {
                            values: Vec::new(),
                            excluded: 0,
                        },
                    )
                });
            if v.is_finite() {
                g.values.push(v);
            } else {
                g.excluded += 1;
            }
        }
    }
    (algorithms, groups)
}

fn row(algorithm: &str, snr_db: f64, metric: Metric, s: Stats) -> AggregateRow {
    AggregateRow {
        algorithm: algorithm.to_string(),
        snr_db,
        metric,
        mean: s.mean,
        variance: s.variance,
        median: s.median,
        q1: s.q1,
        q3: s.q3,
        outliers: s.outliers,
        n: s.n,
    }
}

/// Group by (algorithm, SNR, metric). Infinite values (a perfect SDR) are
/// left out and counted; a group with no finite value produces no row.
pub fn aggregate(reports: &[MetricReport]) -> Result<AggregateSummary, BenchError> {
    if reports.is_empty() {
        return Err(BenchError::EmptyInput);
    }
    let (algorithms, groups) = collect_groups(reports, false);
    let mut out = AggregateSummary {
        rows: Vec::new(),
        excluded_inf: Vec::new(),
    };
    for ((a, _, _, metric), (snr, g)) in groups {
        if g.excluded > 0 {
            out.excluded_inf.push(ExcludedInf {
                algorithm: algorithms[a].clone(),
                snr_db: snr,
                metric,
                count: g.excluded,
            });
        }
        if let Some(s) = summarize(&g.values) {
            out.rows.push(row(&algorithms[a], snr, metric, s));
        }
    }
    Ok(out)
}

/// Same statistics split additionally by noise type.
pub fn aggregate_by_noise(reports: &[MetricReport]) -> Result<Vec<NoiseAggregateRow>, BenchError> {
    if reports.is_empty() {
        return Err(BenchError::EmptyInput);
    }
    let (algorithms, groups) = collect_groups(reports, true);
    Ok(groups
        .into_iter()
        .filter_map(|((a, noise, _, metric), (snr, g))| {
            summarize(&g.values).map(|s| NoiseAggregateRow {
                noise_id: noise,
                row: row(&algorithms[a], snr, metric, s),
            })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn report(alg: &str, noise: &str, snr: f64, v: f64) -> MetricReport {
        MetricReport {
            clean_id: "c".into(),
            noise_id: noise.into(),
            snr_db: snr,
            algorithm: alg.into(),
            stoi: v.clamp(0.0, 1.0),
            stoi_raw: v,
            sdr_db: v,
            si_sdr_db: v,
            pesq: None,
        }
    }

    #[test]
    fn single_value() {
        let s = summarize(&[3.5]).unwrap();
        assert_eq!((s.mean, s.variance, s.median, s.q1, s.q3), (3.5, 0.0, 3.5, 3.5, 3.5));
        assert_eq!((s.outliers, s.n), (0, 1));
    }

    #[test]
    fn outlier_by_hand() {
        // q1 = 2, q3 = 4, upper fence 7
        let s = summarize(&[1.0, 2.0, 3.0, 4.0, 100.0]).unwrap();
        assert_eq!((s.q1, s.median, s.q3), (2.0, 3.0, 4.0));
        assert_eq!(s.outliers, 1);
        assert_eq!(s.mean, 22.0);
        let dev: f64 = [1.0f64, 2.0, 3.0, 4.0, 100.0].iter().map(|v| (v - 22.0).powi(2)).sum();
        assert!((s.variance - dev / 4.0).abs() < 1e-9);
    }

    #[test]
    fn interpolated_quartiles() {
        let s = summarize(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((s.q1, s.median, s.q3), (1.75, 2.5, 3.25));
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(aggregate(&[]), Err(BenchError::EmptyInput)));
        assert!(summarize(&[]).is_none());
    }

    #[test]
    fn inf_is_excluded_and_counted() {
        let mut a = report("identity", "n", 0.0, 1.0);
        a.sdr_db = f64::INFINITY;
        let b = report("identity", "n", 0.0, 3.0);
        let out = aggregate(&[a, b]).unwrap();
        let sdr = out.rows.iter().find(|r| r.metric == Metric::Sdr).unwrap();
        assert_eq!((sdr.n, sdr.mean), (1, 3.0));
        assert_eq!(out.excluded_inf.len(), 1);
        assert_eq!(out.excluded_inf[0].count, 1);
        assert!(out.rows.iter().all(|r| r.mean.is_finite()));
    }

    #[test]
    fn grouping_and_order() {
        let reports = vec![
            report("wiener", "a", 5.0, 1.0),
            report("identity", "a", 5.0, 2.0),
            report("wiener", "b", 0.0, 3.0),
            report("identity", "b", 0.0, 4.0),
            report("wiener", "a", -5.0, 5.0),
        ];
        let out = aggregate(&reports).unwrap();
        let keys: Vec<(&str, f64)> = out
            .rows
            .iter()
            .filter(|r| r.metric == Metric::Stoi)
            .map(|r| (r.algorithm.as_str(), r.snr_db))
            .collect();
        assert_eq!(
            keys,
            [("wiener", -5.0), ("wiener", 0.0), ("wiener", 5.0), ("identity", 0.0), ("identity", 5.0)]
        );
        // no pesq values, no pesq rows
        assert!(out.rows.iter().all(|r| r.metric != Metric::Pesq));
        let by_noise = aggregate_by_noise(&reports).unwrap();
        assert_eq!(by_noise.len(), 15);
    }

    proptest! {
        #[test]
        fn row_invariants(values in prop::collection::vec(-100.0f64..100.0, 1..60)) {
            let s = summarize(&values).unwrap();
            let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(lo <= s.mean && s.mean <= hi);
            prop_assert!(s.q1 <= s.median && s.median <= s.q3);
            prop_assert!(s.outliers <= s.n);
            prop_assert!(s.variance >= 0.0);
            let naive_mean = values.iter().sum::<f64>() / values.len() as f64;
            prop_assert!((s.mean - naive_mean).abs() <= 1e-9 * (1.0 + naive_mean.abs()));
        }
    }
}
