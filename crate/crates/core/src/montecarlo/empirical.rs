use serde::Serialize;

use crate::{Error, Result};

/// Empirical `(mean |S|^p)^{1/p}` with heavy-tail diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PnormEstimate {
    pub p: f64,
    pub value: f64,
    /// Standard error of the sample mean of `|S|^p`.
    pub std_error_of_pth_power: f64,
    /// `std_error_of_pth_power` relative to the mean of `|S|^p`.
    pub relative_std_error: f64,
    /// Delta-method standard error of `value`.
    pub value_std_error: f64,
    /// Share of `sum |S|^p` coming from the largest single sample.
    pub max_share: f64,
    pub unstable: bool,
}

/// Cells whose largest sample carries more than this share of the p-th
/// moment are flagged unstable.
pub const MAX_SHARE_LIMIT: f64 = 0.25;

pub fn empirical_pnorm(samples: &[f64], p: f64) -> Result<PnormEstimate> {
    if samples.is_empty() {
        return Err(Error::Domain("no samples".into()));
    }
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::Domain(format!(
            "moment order p must be a finite real >= 1, got {p}"
        )));
    }
    let m = samples.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let n = samples.len() as f64;
    if m == 0.0 {
        return Ok(PnormEstimate {
            p,
            value: 0.0,
            std_error_of_pth_power: 0.0,
            relative_std_error: 0.0,
            value_std_error: 0.0,
            max_share: 0.0,
            unstable: false,
        });
    }
    // Powers of |S|/max stay in [0, 1]; the largest term is exactly 1.
    let (mut s1, mut s2) = (0.0f64, 0.0f64);
    for x in samples {
        let y = (x.abs() / m).powf(p);
        s1 += y;
        s2 += y * y;
    }
    let mean = s1 / n;
    let var = if samples.len() > 1 {
        ((s2 - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    let rel = (var / n).sqrt() / mean;
    let value = m * mean.powf(1.0 / p);
    let max_share = 1.0 / s1;
    Ok(PnormEstimate {
        p,
        value,
        std_error_of_pth_power: m.powf(p) * (var / n).sqrt(),
        relative_std_error: rel,
        value_std_error: value * rel / p,
        max_share,
        unstable: max_share > MAX_SHARE_LIMIT,
    })
}

/// `|S|` sorted ascending, for survival queries.
#[derive(Clone, Debug)]
pub struct SortedMagnitudes(Vec<f64>);

impl SortedMagnitudes {
    pub fn new(samples: &[f64]) -> Self {
        let mut v: Vec<f64> = samples.iter().map(|x| x.abs()).collect();
        v.sort_by(f64::total_cmp);
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of samples with `|S| >= t`.
    pub fn exceedances(&self, t: f64) -> usize {
        self.0.len() - self.0.partition_point(|&x| x < t)
    }

    /// Empirical quantile at level `q` in `[0, 1]` (lower order statistic).
    pub fn quantile(&self, q: f64) -> f64 {
        let k = ((q * self.0.len() as f64).ceil() as usize).clamp(1, self.0.len());
        self.0[k - 1]
    }

    pub fn smallest_positive(&self) -> Option<f64> {
        self.0.iter().copied().find(|&x| x > 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailPoint {
    pub t: f64,
    pub survival: f64,
    pub std_error: f64,
    pub exceedances: usize,
}

/// Survival fractions `#{|S| >= t} / N` with binomial standard errors.
pub fn empirical_tail(samples: &[f64], thresholds: &[f64]) -> Result<Vec<TailPoint>> {
    if samples.is_empty() {
        return Err(Error::Domain("no samples".into()));
    }
    check_thresholds(thresholds)?;
    Ok(tail_from_sorted(
        &SortedMagnitudes::new(samples),
        thresholds,
    ))
}

pub(crate) fn check_thresholds(thresholds: &[f64]) -> Result<()> {
    if let Some(t) = thresholds.iter().find(|t| !t.is_finite() || **t < 0.0) {
        return Err(Error::Input(format!(
            "thresholds must be finite and nonnegative, got {t}"
        )));
    }
    if let Some(w) = thresholds.windows(2).find(|w| w[1] < w[0]) {
        return Err(Error::Input(format!(
            "thresholds must be sorted ascending; {} follows {}",
            w[1], w[0]
        )));
    }
    Ok(())
}

pub(crate) fn tail_from_sorted(sorted: &SortedMagnitudes, thresholds: &[f64]) -> Vec<TailPoint> {
    let n = sorted.len() as f64;
    thresholds
        .iter()
        .map(|&t| {
            let k = sorted.exceedances(t);
            let q = k as f64 / n;
            TailPoint {
                t,
                survival: q,
                std_error: (q * (1.0 - q) / n).sqrt(),
                exceedances: k,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{label, stream};
    use crate::Law;

    #[test]
    fn pnorm_examples() {
        for p in [1.0, 2.0, 7.5] {
            let e = empirical_pnorm(&[-3.0; 10], p).unwrap();
            assert!((e.value - 3.0).abs() < 1e-14);
            assert!((e.max_share - 0.1).abs() < 1e-14);
        }
        let e = empirical_pnorm(&[0.0, 2.0], 2.0).unwrap();
        assert!((e.value - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(e.max_share, 1.0);
        assert!(e.unstable);
        assert_eq!(empirical_pnorm(&[0.0, 0.0], 3.0).unwrap().value, 0.0);
        assert!(empirical_pnorm(&[], 2.0).is_err());
        assert!(empirical_pnorm(&[1.0], 0.5).is_err());
    }

    #[test]
    fn gaussian_fourth_moment() {
        let g = Law::gaussian();
        let s: Vec<f64> = (0..1_000_000u64)
            .map(|m| g.sample(&mut stream(0, label::PILOT, m)))
            .collect();
        let e = empirical_pnorm(&s, 4.0).unwrap();
        assert!(
            (e.value - 3f64.powf(0.25)).abs() < 3.0 * e.value_std_error,
            "{e:?}"
        );
        let p4 = e.value.powi(4);
        assert!((p4 - 3.0).abs() < 3.0 * e.std_error_of_pth_power);
        assert!(!e.unstable);
    }

    #[test]
    fn pnorms_nondecreasing_in_p() {
        let law = Law::weibull(0.5).unwrap();
        let s: Vec<f64> = (0..2000u64)
            .map(|m| law.sample(&mut stream(1, label::PILOT, m)))
            .collect();
        let mut prev = 0.0;
        for p in [1.0, 1.5, 2.0, 4.0, 8.0, 20.0, 60.0] {
            let v = empirical_pnorm(&s, p).unwrap().value;
            assert!(v >= prev * (1.0 - 1e-12));
            prev = v;
        }
    }

    #[test]
    fn tail_examples() {
        let s = [0.0, -1.0, 2.0, 3.0];
        let c = empirical_tail(&s, &[0.0, 1.0, 2.5, 10.0]).unwrap();
        let fr: Vec<f64> = c.iter().map(|p| p.survival).collect();
        assert_eq!(fr, vec![1.0, 0.75, 0.25, 0.0]);
        assert!(empirical_tail(&s, &[2.0, 1.0]).is_err());

        let law = Law::exponential();
        let s: Vec<f64> = (0..200_000u64)
            .map(|m| law.sample(&mut stream(2, label::PILOT, m)))
            .collect();
        let c = empirical_tail(&s, &[std::f64::consts::LN_2]).unwrap();
        assert!((c[0].survival - 0.5).abs() < 4.0 * c[0].std_error);
    }

    #[test]
    fn quantiles() {
        let m = SortedMagnitudes::new(&[4.0, -1.0, 3.0, 2.0]);
        assert_eq!(m.quantile(0.5), 2.0);
        assert_eq!(m.quantile(1.0), 4.0);
        assert_eq!(m.quantile(0.0), 1.0);
        assert_eq!(m.exceedances(3.0), 2);
    }
}
