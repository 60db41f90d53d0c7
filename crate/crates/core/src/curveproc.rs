//! Expansion time-series preprocessing: neighbour-weighted smoothing,
//! threshold crossing, and the (failure time, slope) clustering features.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default smoothing weight on the original sample.
pub const DEFAULT_ALPHA: f64 = 0.3;
/// Default failure threshold, expansion percent.
pub const DEFAULT_THRESHOLD: f64 = 0.5;
/// Extrapolated failure times are capped here (years).
pub const CENSOR_CAP_YEARS: f64 = 200.0;

/// One specimen's expansion history. Times in years, expansion in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionSeries {
    pub mixture_id: String,
    times: Vec<f64>,
    values: Vec<f64>,
}

impl ExpansionSeries {
    pub fn new(mixture_id: impl Into<String>, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let mixture_id = mixture_id.into();
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "series '{mixture_id}': {} times, {} values",
                times.len(),
                values.len()
            )));
        }
        if times.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("series '{mixture_id}'")));
        }
        if times.first().is_some_and(|&t| t < 0.0) {
            return Err(Error::NegativeTime(times[0]));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::UnsortedTimes(mixture_id));
        }
        Ok(ExpansionSeries {
            mixture_id,
            times,
            values,
        })
    }

    pub fn from_samples(mixture_id: impl Into<String>, samples: &[(f64, f64)]) -> Result<Self> {
        let (times, values) = samples.iter().copied().unzip();
        ExpansionSeries::new(mixture_id, times, values)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.values.iter().copied())
    }

    /// Number of negative expansion readings (kept, but worth flagging).
    pub fn negative_count(&self) -> usize {
        self.values.iter().filter(|v| **v < 0.0).count()
    }

    /// Same time grid with new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        ExpansionSeries::new(self.mixture_id.clone(), self.times.clone(), values)
    }
}

/// Weights `(previous, current, next)` applied to an interior sample whose
/// left interval is `dt_prev` and right interval is `dt_next`.
///
/// The previous sample is weighted by the *right* interval and vice versa,
/// so a nearer neighbour counts for more.
pub fn smoothing_weights(dt_prev: f64, dt_next: f64, alpha: f64) -> [f64; 3] {
    let span = dt_prev + dt_next;
    [
        dt_next / span * (1.0 - alpha),
        alpha,
        dt_prev / span * (1.0 - alpha),
    ]
}

/// Smooths interior samples with the three-point interval-weighted average;
/// the first and last samples pass through unchanged.
pub fn smooth(series: &ExpansionSeries, alpha: f64) -> Result<ExpansionSeries> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidAlpha(alpha));
    }
    let n = series.len();
    if n < 3 {
        return Err(Error::TooFewSamples { found: n, needed: 3 });
    }
    let (t, s) = (&series.times, &series.values);
    let mut out = s.clone();
    for i in 1..n - 1 {
        let dt_prev = t[i] - t[i - 1];
        let dt_next = t[i + 1] - t[i];
        let f_prev = dt_next / (dt_prev + dt_next);
        // written as a correction to s[i] so constant runs are reproduced exactly
        let pull = f_prev * (s[i - 1] - s[i]) + (1.0 - f_prev) * (s[i + 1] - s[i]);
        out[i] = s[i] + (1.0 - alpha) * pull;
    }
    series.with_values(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FailurePoint {
    pub t_fail: f64,
    /// Expansion rate at failure, percent per year.
    pub slope: f64,
    /// True when the record never reached the threshold and `t_fail` was
    /// extrapolated from the terminal secant.
    pub censored: bool,
}

/// Locates the first threshold crossing by linear interpolation between the
/// bracketing samples. Records that never cross are extrapolated along the
/// secant through their last two samples, capped at [`CENSOR_CAP_YEARS`].
pub fn failure_point(series: &ExpansionSeries, threshold: f64) -> Result<FailurePoint> {
    let n = series.len();
    if n < 2 {
        return Err(Error::TooFewSamples { found: n, needed: 2 });
    }
    let (t, v) = (&series.times, &series.values);
    let secant = |i: usize| (v[i + 1] - v[i]) / (t[i + 1] - t[i]);

    match v.iter().position(|&x| x >= threshold) {
        Some(0) => Ok(FailurePoint {
            t_fail: t[0],
            slope: secant(0),
            censored: false,
        }),
        Some(i) => {
            let slope = secant(i - 1);
            // v[i - 1] < threshold <= v[i], so slope > 0
            let t_fail = t[i - 1] + (threshold - v[i - 1]) / slope;
            Ok(FailurePoint {
                t_fail: t_fail.min(t[i]),
                slope,
                censored: false,
            })
        }
        None => {
            let slope = secant(n - 2);
            if slope <= 0.0 {
                return Err(Error::NonPositiveTrend(series.mixture_id.clone()));
            }
            let t_fail = (t[n - 1] + (threshold - v[n - 1]) / slope).min(CENSOR_CAP_YEARS);
            Ok(FailurePoint {
                t_fail,
                slope,
                censored: true,
            })
        }
    }
}

/// Clustering features `(t_fail, slope)`. The expansion coordinate of the
/// failure point is left out: it equals the threshold for every crossing.
pub fn cluster_features(series: &ExpansionSeries, threshold: f64) -> Result<[f64; 2]> {
    let fp = failure_point(series, threshold)?;
    Ok([fp.t_fail, fp.slope])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(times: &[f64], values: &[f64]) -> ExpansionSeries {
        ExpansionSeries::new("s", times.to_vec(), values.to_vec()).unwrap()
    }

    fn ramp(rate: f64) -> ExpansionSeries {
        let t: Vec<f64> = (0..=8).map(|i| 5.0 * i as f64).collect();
        let v = t.iter().map(|t| rate * t).collect::<Vec<_>>();
        series(&t, &v)
    }

    #[test]
    fn constant_series_is_fixed() {
        let s = series(&[0.0, 0.5, 3.0, 3.1], &[0.2, 0.2, 0.2, 0.2]);
        for alpha in [0.0, 0.3, 0.5, 1.0] {
            assert_eq!(smooth(&s, alpha).unwrap(), s);
        }
    }

    #[test]
    fn uniform_spacing_middle_value() {
        let s = series(&[0.0, 1.0, 2.0], &[0.0, 1.0, 0.0]);
        let out = smooth(&s, 0.3).unwrap();
        assert!((out.values()[1] - 0.3).abs() < 1e-15);
        assert_eq!(out.values()[0], 0.0);
        assert_eq!(out.values()[2], 0.0);
    }

    #[test]
    fn non_uniform_weights_cross_over() {
        // t = (0, 1, 3): previous sample weighted by the right interval (2/3)
        let w = smoothing_weights(1.0, 2.0, 0.3);
        assert!((w[0] - 2.0 / 3.0 * 0.7).abs() < 1e-15);
        assert!((w[2] - 1.0 / 3.0 * 0.7).abs() < 1e-15);
        let out = smooth(&series(&[0.0, 1.0, 3.0], &[0.0, 1.0, 0.0]), 0.3).unwrap();
        assert!((out.values()[1] - 0.3).abs() < 1e-15);
        let out = smooth(&series(&[0.0, 1.0, 3.0], &[1.0, 0.0, 0.0]), 0.3).unwrap();
        assert!((out.values()[1] - 2.0 / 3.0 * 0.7).abs() < 1e-15);
    }

    #[test]
    fn smoothing_errors() {
        let short = series(&[0.0, 1.0], &[0.0, 1.0]);
        assert!(matches!(smooth(&short, 0.3), Err(Error::TooFewSamples { found: 2, .. })));
        let s = series(&[0.0, 1.0, 2.0], &[0.0, 1.0, 0.0]);
        assert!(matches!(smooth(&s, 1.5), Err(Error::InvalidAlpha(_))));
        assert!(matches!(smooth(&s, -0.1), Err(Error::InvalidAlpha(_))));
    }

    #[test]
    fn series_validation() {
        assert!(ExpansionSeries::new("x", vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(ExpansionSeries::new("x", vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(ExpansionSeries::new("x", vec![0.0, 1.0], vec![1.0, f64::NAN]).is_err());
        let s = series(&[0.0, 1.0, 2.0], &[-0.01, 0.02, -0.003]);
        assert_eq!(s.negative_count(), 2);
    }

    #[test]
    fn linear_ramp_crossing() {
        let fp = failure_point(&ramp(0.025), 0.5).unwrap();
        assert!((fp.t_fail - 20.0).abs() < 1e-12);
        assert!((fp.slope - 0.025).abs() < 1e-15);
        assert!(!fp.censored);
        let f = cluster_features(&ramp(0.1), 0.5).unwrap();
        assert!((f[0] - 5.0).abs() < 1e-12 && (f[1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn censored_extrapolation() {
        let s = series(&[30.0, 35.0, 40.0], &[0.3, 0.35, 0.4]);
        let fp = failure_point(&s, 0.5).unwrap();
        assert!(fp.censored);
        assert!((fp.t_fail - 50.0).abs() < 1e-9);
        assert!((fp.slope - 0.01).abs() < 1e-12);
        assert_eq!(cluster_features(&s, 0.5).unwrap().map(|x| (x * 1e6).round() / 1e6), [50.0, 0.01]);
    }

    #[test]
    fn censored_extrapolation_is_capped() {
        let s = series(&[0.0, 40.0], &[0.0, 0.0001]);
        assert_eq!(failure_point(&s, 0.5).unwrap().t_fail, CENSOR_CAP_YEARS);
    }

    #[test]
    fn crossing_before_record() {
        let s = series(&[1.0, 2.0, 4.0], &[0.6, 0.8, 1.0]);
        let fp = failure_point(&s, 0.5).unwrap();
        assert_eq!(fp.t_fail, 1.0);
        assert!((fp.slope - 0.2).abs() < 1e-15);
    }

    #[test]
    fn flat_record_has_no_trend() {
        let s = series(&[0.0, 1.0, 2.0], &[0.0, 0.0, 0.0]);
        assert!(matches!(failure_point(&s, 0.5), Err(Error::NonPositiveTrend(_))));
    }

    proptest! {
        #[test]
        fn weights_sum_to_one(dt_prev in 1e-3..50.0f64, dt_next in 1e-3..50.0f64, alpha in 0.0..=1.0f64) {
            let w = smoothing_weights(dt_prev, dt_next, alpha);
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }

        #[test]
        fn smoothing_keeps_grid(values in proptest::collection::vec(-1.0..5.0f64, 3..20), alpha in 0.0..=1.0f64) {
            let t: Vec<f64> = (0..values.len()).map(|i| (i * i) as f64 * 0.5 + i as f64).collect();
            let s = ExpansionSeries::new("p", t, values).unwrap();
            let out = smooth(&s, alpha).unwrap();
            prop_assert_eq!(out.times(), s.times());
            prop_assert_eq!(out.values()[0], s.values()[0]);
            prop_assert_eq!(out.values().last(), s.values().last());
        }

        #[test]
        fn affine_uniform_series_is_fixed(a in -1.0..1.0f64, b in -1.0..1.0f64, dt in 0.1..5.0f64, n in 3usize..15, alpha in 0.0..=1.0f64) {
            let t: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
            let v: Vec<f64> = t.iter().map(|t| a + b * t).collect();
            let s = ExpansionSeries::new("p", t, v).unwrap();
            let out = smooth(&s, alpha).unwrap();
            for (x, y) in out.values().iter().zip(s.values()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn raising_threshold_never_moves_failure_earlier(
            steps in proptest::collection::vec(0.0..0.2f64, 2..15),
            lo in 0.05..1.0f64,
            bump in 0.0..1.0f64,
        ) {
            let mut acc = 0.0;
            let v: Vec<f64> = steps.iter().map(|d| { acc += d; acc }).collect();
            let t: Vec<f64> = (0..v.len()).map(|i| i as f64).collect();
            let s = ExpansionSeries::new("m", t, v).unwrap();
            if let (Ok(a), Ok(b)) = (failure_point(&s, lo), failure_point(&s, lo + bump)) {
                prop_assert!(b.t_fail >= a.t_fail - 1e-12);
            }
        }
    }
}
