//! Percentile bootstrap over setting-stratified shot counts, paired
//! comparisons, and prefix sweeps.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shadow::{SettingData, ShadowData};

pub const MIN_RESAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            resamples: 5000,
            level: 0.95,
            seed: 0,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.resamples < MIN_RESAMPLES {
            return Err(Error::InvalidArgument(format!(
                "{} resamples is below the minimum of {MIN_RESAMPLES}",
                self.resamples
            )));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidArgument(format!("level {} outside (0, 1)", self.level)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    /// Estimator applied to the full data set.
    pub point: f64,
    pub resamples: usize,
    pub mean: f64,
    pub median: f64,
    pub iqr: (f64, f64),
    pub level: f64,
    pub ci: (f64, f64),
    /// Resample values in resample-index order.
    pub values: Vec<f64>,
}

/// Linear-interpolation quantile of sorted data (the common "type 7" rule).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn integer_count(w: f64) -> Result<u64> {
    if w < 0.0 || w.fract() != 0.0 || w > 9.007_199_254_740_992e15 {
        return Err(Error::InvalidArgument(format!(
            "outcome weight {w} is not a shot count"
        )));
    }
    Ok(w as u64)
}

/// Draws a multinomial resample of one stratum: `n` shots with replacement.
fn resample_stratum(sd: &SettingData, rng: &mut ChaCha8Rng) -> Result<SettingData> {
    let counts: Vec<(u64, u64)> = sd
        .outcomes
        .iter()
        .map(|(&k, &w)| integer_count(w).map(|c| (k, c)))
        .collect::<Result<_>>()?;
    let mut remaining_n: u64 = counts.iter().map(|c| c.1).sum();
    let mut remaining_mass = remaining_n;
    let mut out = SettingData::default();
    for (i, &(k, c)) in counts.iter().enumerate() {
        let draw = if i + 1 == counts.len() {
            remaining_n
        } else if remaining_n == 0 || c == 0 {
            0
        } else {
            let p = (c as f64 / remaining_mass as f64).min(1.0);
            Binomial::new(remaining_n, p)
                .map_err(|e| Error::InvalidArgument(e.to_string()))?
                .sample(rng)
        };
        remaining_n -= draw;
        remaining_mass -= c;
        if draw > 0 {
            out.outcomes.insert(k, draw as f64);
        }
    }
    Ok(out)
}

/// Resamples shots with replacement inside each setting.
pub fn resample(data: &ShadowData, rng: &mut ChaCha8Rng) -> Result<ShadowData> {
    let mut out = ShadowData::new(data.n_qubits);
    for (word, sd) in &data.settings {
        out.settings.insert(word.clone(), resample_stratum(sd, rng)?);
    }
    Ok(out)
}

fn resample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub fn summarize(point: f64, values: Vec<f64>, level: f64) -> BootstrapSummary {
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    BootstrapSummary {
        point,
        resamples: values.len(),
        mean: values.iter().sum::<f64>() / values.len() as f64,
        median: quantile(&sorted, 0.5),
        iqr: (quantile(&sorted, 0.25), quantile(&sorted, 0.75)),
        level,
        ci: (quantile(&sorted, tail), quantile(&sorted, 1.0 - tail)),
        values,
    }
}

/// Percentile bootstrap of `estimator` over stratified resamples of `data`.
pub fn bootstrap_summary<F>(data: &ShadowData, estimator: F, cfg: &BootstrapConfig) -> Result<BootstrapSummary>
where
    F: Fn(&ShadowData) -> Result<f64> + Sync,
{
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    let point = estimator(data)?;
    let values = (0..cfg.resamples)
        .into_par_iter()
        .map(|i| {
            let mut rng = resample_rng(cfg.seed, i);
            let r = resample(data, &mut rng)?;
            estimator(&r).map_err(|e| Error::Estimator {
                resample: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(summarize(point, values, cfg.level))
}

/// Fraction of index-paired resamples where `a` lands closer to `truth`.
pub fn prob_better(a: &BootstrapSummary, b: &BootstrapSummary, truth: f64) -> Result<f64> {
    if a.values.is_empty() || b.values.is_empty() {
        return Err(Error::EmptyData);
    }
    if a.values.len() != b.values.len() {
        return Err(Error::Dimension {
            expected: a.values.len(),
            found: b.values.len(),
        });
    }
    let wins = a
        .values
        .iter()
        .zip(&b.values)
        .filter(|(x, y)| (*x - truth).abs() < (*y - truth).abs())
        .count();
    Ok(wins as f64 / a.values.len() as f64)
}

/// One shot of a store, in acquisition order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub setting: String,
    pub outcome: u64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// Accepted shots in the prefix.
    pub shots: usize,
    /// Raw shots in the prefix.
    pub raw_shots: usize,
    pub summary: BootstrapSummary,
}

fn accepted_data(records: &[SweepRecord], n_qubits: usize) -> ShadowData {
    let mut d = ShadowData::new(n_qubits);
    for r in records.iter().filter(|r| r.accepted) {
        d.add(&r.setting, r.outcome, 1.0);
    }
    d
}

/// Bootstraps the estimator on store prefixes holding about `increment`,
/// `2·increment`, ... accepted shots, plus the full store.
///
/// Prefix cuts are placed on raw shots at `increment / acceptance rate`, so
/// post-selected stores land near, not on, the accepted-shot grid.
pub fn shot_sweep<F>(
    records: &[SweepRecord],
    n_qubits: usize,
    estimator: F,
    increment: usize,
    cfg: &BootstrapConfig,
) -> Result<Vec<SweepPoint>>
where
    F: Fn(&ShadowData) -> Result<f64> + Sync,
{
    if records.is_empty() {
        return Err(Error::EmptyData);
    }
    if increment == 0 {
        return Err(Error::InvalidArgument("sweep increment must be positive".into()));
    }
    let accepted = records.iter().filter(|r| r.accepted).count();
    if accepted == 0 {
        return Err(Error::EmptyData);
    }
    let rate = accepted as f64 / records.len() as f64;
    let step = ((increment as f64 / rate).round() as usize).max(1);
    let mut cuts: Vec<usize> = (1..=records.len() / step).map(|k| k * step).collect();
    if cuts.last() != Some(&records.len()) {
        cuts.push(records.len());
    }
    let mut out = Vec::with_capacity(cuts.len());
    for cut in cuts {
        let data = accepted_data(&records[..cut], n_qubits);
        if data.is_empty() {
            continue;
        }
        let summary = bootstrap_summary(&data, &estimator, cfg)?;
        out.push(SweepPoint {
            shots: data.total() as usize,
            raw_shots: cut,
            summary,
        });
    }
    if out.is_empty() {
        return Err(Error::EmptyData);
    }
    Ok(out)
}

/// `x` rounded to 12 significant digits.
pub fn sig12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

pub const SWEEP_CSV_HEADER: &str = "shots,estimate,median,iqr_low,iqr_high,ci_low,ci_high";

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for p in points {
        let s = &p.summary;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            p.shots,
            sig12(s.point),
            sig12(s.median),
            sig12(s.iqr.0),
            sig12(s.iqr.1),
            sig12(s.ci.0),
            sig12(s.ci.1)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bernoulli(n: u64, ones: u64) -> ShadowData {
        let mut d = ShadowData::new(1);
        d.add("Z", 0, (n - ones) as f64);
        d.add("Z", 1, ones as f64);
        d
    }

    fn mean_bit(d: &ShadowData) -> Result<f64> {
        let s = &d.settings["Z"];
        Ok(s.outcomes.get(&1).copied().unwrap_or(0.0) / s.total())
    }

    fn cfg(seed: u64) -> BootstrapConfig {
        BootstrapConfig {
            resamples: 5000,
            level: 0.95,
            seed,
        }
    }

    #[test]
    fn quantile_type7() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.25), 1.75);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_eq!(quantile(&[7.0], 0.3), 7.0);
    }

    #[test]
    fn constant_data_has_zero_width() {
        let d = bernoulli(500, 0);
        let s = bootstrap_summary(&d, mean_bit, &cfg(1)).unwrap();
        assert_eq!((s.ci, s.iqr, s.point), ((0.0, 0.0), (0.0, 0.0), 0.0));
    }

    #[test]
    fn resample_preserves_stratum_sizes() {
        let mut d = ShadowData::new(2);
        d.add("XX", 0, 30.0);
        d.add("XX", 3, 70.0);
        d.add("ZZ", 1, 11.0);
        let mut rng = resample_rng(4, 0);
        let r = resample(&d, &mut rng).unwrap();
        assert_eq!(r.settings["XX"].total(), 100.0);
        assert_eq!(r.settings["ZZ"].total(), 11.0);
    }

    #[test]
    fn bernoulli_ci_width_matches_binomial() {
        let n = 10_000u64;
        let s = bootstrap_summary(&bernoulli(n, n / 2), mean_bit, &cfg(2)).unwrap();
        let analytic = 2.0 * 1.96 * (0.25 / n as f64).sqrt();
        let width = s.ci.1 - s.ci.0;
        assert!((width / analytic - 1.0).abs() < 0.2, "{width} vs {analytic}");
        assert!(s.ci.0 <= s.point && s.point <= s.ci.1);
        assert!(s.ci.0 <= s.median && s.median <= s.ci.1);
    }

    #[test]
    fn width_scales_as_inverse_root_n() {
        let widths: Vec<f64> = [1_000u64, 10_000, 100_000]
            .iter()
            .map(|&n| {
                let s = bootstrap_summary(&bernoulli(n, n * 3 / 10), mean_bit, &cfg(3)).unwrap();
                s.ci.1 - s.ci.0
            })
            .collect();
        for w in widths.windows(2) {
            let ratio = w[0] / w[1] / 10f64.sqrt();
            assert!((1.0 / 1.3..1.3).contains(&ratio), "{ratio}");
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let d = bernoulli(2000, 700);
        let a = bootstrap_summary(&d, mean_bit, &cfg(9)).unwrap();
        let b = bootstrap_summary(&d, mean_bit, &cfg(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn prob_better_symmetry_and_disjoint() {
        let d = bernoulli(4000, 1800);
        let a = bootstrap_summary(&d, mean_bit, &cfg(10)).unwrap();
        let b = bootstrap_summary(&d, mean_bit, &cfg(11)).unwrap();
        let p = prob_better(&a, &b, 0.45).unwrap();
        assert!((0.4..=0.6).contains(&p), "{p}");
        let near = summarize(0.0, vec![0.0; 200], 0.95);
        let far = summarize(1.0, vec![1.0; 200], 0.95);
        assert_eq!(prob_better(&near, &far, 0.0).unwrap(), 1.0);
        let short = summarize(1.0, vec![1.0; 10], 0.95);
        assert!(prob_better(&near, &short, 0.0).is_err());
    }

    #[test]
    fn estimator_failure_reports_index() {
        let d = bernoulli(100, 50);
        let calls = std::sync::atomic::AtomicUsize::new(0);
        let err = bootstrap_summary(
            &d,
            |x| {
                if calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst) == 0 {
                    mean_bit(x)
                } else {
                    Err(Error::EmptyData)
                }
            },
            &cfg(0),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Estimator { .. }));
    }

    #[test]
    fn input_validation() {
        assert!(bootstrap_summary(&ShadowData::new(1), mean_bit, &cfg(0)).is_err());
        let low = BootstrapConfig {
            resamples: 50,
            ..cfg(0)
        };
        assert!(bootstrap_summary(&bernoulli(10, 5), mean_bit, &low).is_err());
        let mut frac = ShadowData::new(1);
        frac.add("Z", 0, 0.5);
        assert!(bootstrap_summary(&frac, mean_bit, &cfg(0)).is_err());
    }

    fn records(n: usize) -> Vec<SweepRecord> {
        (0..n)
            .map(|i| SweepRecord {
                setting: "Z".into(),
                outcome: (i % 3 == 0) as u64,
                accepted: i % 2 == 0,
            })
            .collect()
    }

    #[test]
    fn sweep_small_store_gives_one_point() {
        let pts = shot_sweep(&records(500), 1, mean_bit, 20_000, &cfg(5)).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!((pts[0].raw_shots, pts[0].shots), (500, 250));
    }

    #[test]
    fn sweep_counts_accepted_shots() {
        let pts = shot_sweep(&records(8_000), 1, mean_bit, 1_000, &cfg(5)).unwrap();
        assert_eq!(
            pts.iter().map(|p| p.shots).collect::<Vec<_>>(),
            vec![1000, 2000, 3000, 4000]
        );
        assert_eq!(
            pts.iter().map(|p| p.raw_shots).collect::<Vec<_>>(),
            vec![2000, 4000, 6000, 8000]
        );
        let csv = sweep_csv(&pts);
        assert!(csv.starts_with(SWEEP_CSV_HEADER));
        assert_eq!(csv.lines().count(), 5);
    }
}
