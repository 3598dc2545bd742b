use std::io::Write;

use serde::{Deserialize, Serialize};

use super::empirical::{
    check_thresholds, empirical_pnorm, tail_from_sorted, PnormEstimate, SortedMagnitudes,
};
use super::{
    sample_decoupled, sample_decoupled_with, sample_undecoupled, tensor_hash, SampleConfig,
};
use crate::estimator::{check_p, evaluate, tail_exponents, EstimateForm, TailExponent};
use crate::laws::LawDescriptor;
use crate::rng::label;
use crate::{CoefTensor, Error, Law, LawGrid, NormConfig, NormTable, Result};

/// Tail points with fewer exceedances are excluded from domination checks
/// and slope fits.
pub const MIN_EXCEEDANCES: usize = 100;

const PILOT_SAMPLES: usize = 100_000;
const AUTO_THRESHOLDS: usize = 40;
const CPRIME_RANGE: (f64, f64) = (1e-6, 1e6);

/// What a report was computed from.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunHeader {
    pub seed: u64,
    pub n_samples: usize,
    pub batch_size: usize,
    pub order: usize,
    pub dim: usize,
    pub tensor_hash: String,
    /// One entry if every variable shares a law, one per mode if each mode is
    /// homogeneous, otherwise one per variable in mode-major order.
    pub laws: Vec<LawDescriptor>,
}

impl RunHeader {
    pub fn new(t: &CoefTensor<f64>, laws: &LawGrid, cfg: &SampleConfig) -> Self {
        let all = laws.laws();
        let descriptors: Vec<LawDescriptor> = if all.iter().all(|l| *l == all[0]) {
            vec![all[0].descriptor()]
        } else if let Some(per_mode) = laws.mode_laws() {
            per_mode.iter().map(Law::descriptor).collect()
        } else {
            all.iter().map(Law::descriptor).collect()
        };
        Self {
            seed: cfg.seed,
            n_samples: cfg.n_samples,
            batch_size: cfg.batch_size,
            order: t.order(),
            dim: t.dim(),
            tensor_hash: tensor_hash(t),
            laws: descriptors,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    #[default]
    Decoupled,
    Undecoupled,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SandwichCell {
    pub p: f64,
    pub estimate: f64,
    pub empirical: PnormEstimate,
    /// `empirical / estimate`; absent for the zero tensor.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SandwichReport {
    pub header: RunHeader,
    pub form: EstimateForm,
    pub sampling: Sampling,
    pub cells: Vec<SandwichCell>,
    /// `max ratio / min ratio` over stable cells.
    pub spread: Option<f64>,
    pub all_stable: bool,
    pub unconverged_norms: usize,
    pub warnings: Vec<String>,
}

#[derive(Serialize)]
struct SandwichCsvRow {
    p: f64,
    estimate: f64,
    empirical: f64,
    empirical_std_error: f64,
    ratio: Option<f64>,
    max_share: f64,
    unstable: bool,
}

impl SandwichReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_rows(
            w,
            self.cells.iter().map(|c| SandwichCsvRow {
                p: c.p,
                estimate: c.estimate,
                empirical: c.empirical.value,
                empirical_std_error: c.empirical.value_std_error,
                ratio: c.ratio,
                max_share: c.empirical.max_share,
                unstable: c.empirical.unstable,
            }),
        )
    }

    pub fn has_warnings(&self) -> bool {
        !self.warnings.is_empty()
    }
}

fn write_rows<W: Write, R: Serialize>(w: W, rows: impl IntoIterator<Item = R>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row)
            .map_err(|e| Error::Input(format!("csv output: {e}")))?;
    }
    out.flush()
        .map_err(|e| Error::Input(format!("csv output: {e}")))?;
    Ok(())
}

fn check_p_list(p_list: &[f64]) -> Result<()> {
    if p_list.is_empty() {
        return Err(Error::Input("empty list of moment orders".into()));
    }
    p_list.iter().try_for_each(|&p| check_p(p))
}

/// Empirical `||S||_p` against the deterministic estimate `form`, for every
/// `p` in `p_list`. The laws must have unit variance.
pub fn sandwich_experiment(
    t: &CoefTensor<f64>,
    laws: &LawGrid,
    p_list: &[f64],
    cfg: &SampleConfig,
    form: EstimateForm,
    sampling: Sampling,
    norm_cfg: &NormConfig,
) -> Result<SandwichReport> {
    check_p_list(p_list)?;
    cfg.validate()?;
    laws.check_shape(t.order(), t.dim())?;
    if let Some((k, law)) = laws
        .laws()
        .iter()
        .enumerate()
        .find(|(_, l)| !l.is_normalized(1e-9))
    {
        return Err(Error::Hypothesis(format!(
            "law of X_{}^{} has variance {}; the comparison assumes unit variance (use normalize)",
            k % laws.dim() + 1,
            k / laws.dim() + 1,
            law.variance()
        )));
    }
    let table = NormTable::compute(t, norm_cfg)?;
    let estimates = p_list
        .iter()
        .map(|&p| evaluate(form, &table, t, laws, p).map(|b| b.total))
        .collect::<Result<Vec<f64>>>()?;
    let samples = match sampling {
        Sampling::Decoupled => sample_decoupled(t, laws, cfg)?,
        Sampling::Undecoupled => sample_undecoupled(t, laws, cfg)?,
    };
    let zero = t.is_zero();
    let mut warnings = Vec::new();
    if zero {
        warnings.push("zero tensor: ratios skipped".to_string());
    }
    let mut cells = Vec::with_capacity(p_list.len());
    for (&p, &estimate) in p_list.iter().zip(&estimates) {
        let empirical = empirical_pnorm(&samples, p)?;
        if empirical.unstable {
            warnings.push(format!(
                "p = {p}: largest sample carries {:.3} of the empirical moment",
                empirical.max_share
            ));
        }
        cells.push(SandwichCell {
            p,
            estimate,
            empirical,
            ratio: (!zero).then(|| empirical.value / estimate),
        });
    }
    if table.unconverged() > 0 {
        warnings.push(format!(
            "{} iterative norms hit the iteration cap",
            table.unconverged()
        ));
    }
    let stable: Vec<f64> = cells
        .iter()
        .filter(|c| !c.empirical.unstable)
        .filter_map(|c| c.ratio)
        .collect();
    let spread = (!stable.is_empty()).then(|| {
        let hi = stable.iter().copied().fold(f64::MIN, f64::max);
        let lo = stable.iter().copied().fold(f64::MAX, f64::min);
        hi / lo
    });
    Ok(SandwichReport {
        header: RunHeader::new(t, laws, cfg),
        form,
        sampling,
        all_stable: cells.iter().all(|c| !c.empirical.unstable),
        cells,
        spread,
        unconverged_norms: table.unconverged(),
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecouplingCell {
    pub p: f64,
    pub undecoupled: PnormEstimate,
    pub decoupled: PnormEstimate,
    /// `||S||_p / ||S~||_p`.
    pub ratio: Option<f64>,
    pub ratio_std_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecouplingReport {
    pub header: RunHeader,
    /// `d!`, the number of orderings each unordered index set contributes.
    pub d_factorial: u64,
    pub cells: Vec<DecouplingCell>,
    pub warnings: Vec<String>,
}

#[derive(Serialize)]
struct DecouplingCsvRow {
    p: f64,
    undecoupled: f64,
    decoupled: f64,
    ratio: Option<f64>,
    ratio_std_error: Option<f64>,
    unstable: bool,
}

impl DecouplingReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_rows(
            w,
            self.cells.iter().map(|c| DecouplingCsvRow {
                p: c.p,
                undecoupled: c.undecoupled.value,
                decoupled: c.decoupled.value,
                ratio: c.ratio,
                ratio_std_error: c.ratio_std_error,
                unstable: c.undecoupled.unstable || c.decoupled.unstable,
            }),
        )
    }

    pub fn has_warnings(&self) -> bool {
        !self.warnings.is_empty()
    }
}

/// Empirical moments of the chaos in one sequence against its decoupled
/// version, same law in every mode. The tensor must be symmetric with a
/// vanishing generalized diagonal.
pub fn decoupling_experiment(
    t: &CoefTensor<f64>,
    law: Law,
    p_list: &[f64],
    cfg: &SampleConfig,
) -> Result<DecouplingReport> {
    if p_list.is_empty() {
        return Err(Error::Input("empty list of moment orders".into()));
    }
    if let Some(p) = p_list.iter().find(|p| !(**p >= 1.0) || !p.is_finite()) {
        return Err(Error::Domain(format!(
            "moment order p must be a finite real >= 1, got {p}"
        )));
    }
    let laws = LawGrid::broadcast(law, t.order(), t.dim());
    let undecoupled = sample_undecoupled(t, &laws, cfg)?;
    let decoupled = sample_decoupled(t, &laws, cfg)?;
    let zero = t.is_zero();
    let mut warnings = Vec::new();
    if zero {
        warnings.push("zero tensor: ratios skipped".to_string());
    }
    let mut cells = Vec::new();
    for &p in p_list {
        let u = empirical_pnorm(&undecoupled, p)?;
        let d = empirical_pnorm(&decoupled, p)?;
        if u.unstable || d.unstable {
            warnings.push(format!(
                "p = {p}: heavy-tail instability in the empirical moments"
            ));
        }
        let ratio = (!zero).then(|| u.value / d.value);
        let ratio_std_error = ratio.map(|r| {
            r * ((u.value_std_error / u.value).powi(2) + (d.value_std_error / d.value).powi(2))
                .sqrt()
        });
        cells.push(DecouplingCell {
            p,
            undecoupled: u,
            decoupled: d,
            ratio,
            ratio_std_error,
        });
    }
    Ok(DecouplingReport {
        header: RunHeader::new(t, &laws, cfg),
        d_factorial: (1..=t.order() as u64).product(),
        cells,
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum Thresholds {
    /// Geometric grid from the median to the 99.99th percentile of `|S|`
    /// in a pilot run.
    Auto,
    Given(Vec<f64>),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CprimeChoice {
    Fixed(f64),
    /// Smallest constant in `[1e-6, 1e6]` for which the bound dominates the
    /// empirical tail at every stable threshold.
    Calibrate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailRow {
    pub t: f64,
    pub empirical: f64,
    pub std_error: f64,
    pub exceedances: usize,
    pub bound: f64,
    /// At least [`MIN_EXCEEDANCES`] samples beyond `t`.
    pub stable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailReport {
    pub header: RunHeader,
    pub r: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "Cprime")]
    pub cprime: f64,
    pub calibrated: bool,
    pub calibration_note: Option<String>,
    pub rows: Vec<TailRow>,
    /// Bound at or above the empirical tail at every stable threshold.
    pub dominates: bool,
    /// Least-squares slope of `ln(-ln P)` against `ln t` over the top decade
    /// of stable thresholds.
    pub fitted_slope: Option<f64>,
    pub slope_points: usize,
    pub slope_note: Option<String>,
    /// Smallest `2r / (2|I| + r|J|)` over pairs with a nonzero slice.
    pub min_exponent: Option<f64>,
    pub exponents: Vec<TailExponent<f64>>,
    pub warnings: Vec<String>,
}

#[derive(Serialize)]
struct TailCsvRow {
    t: f64,
    empirical: f64,
    std_error: f64,
    exceedances: usize,
    bound: f64,
    stable: bool,
}

impl TailReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_rows(
            w,
            self.rows.iter().map(|r| TailCsvRow {
                t: r.t,
                empirical: r.empirical,
                std_error: r.std_error,
                exceedances: r.exceedances,
                bound: r.bound,
                stable: r.stable,
            }),
        )
    }

    pub fn has_warnings(&self) -> bool {
        !self.warnings.is_empty()
    }
}

fn auto_thresholds(t: &CoefTensor<f64>, laws: &LawGrid, cfg: &SampleConfig) -> Result<Vec<f64>> {
    let pilot_cfg = SampleConfig {
        n_samples: PILOT_SAMPLES,
        ..*cfg
    };
    let pilot = SortedMagnitudes::new(&sample_decoupled_with(t, laws, &pilot_cfg, label::PILOT)?);
    let hi = pilot.quantile(0.9999);
    let Some(smallest) = pilot.smallest_positive() else {
        return Ok(Vec::new());
    };
    let lo = pilot.quantile(0.5).max(smallest);
    if !(hi > lo) {
        return Ok(vec![lo]);
    }
    let ratio = (hi / lo).powf(1.0 / (AUTO_THRESHOLDS - 1) as f64);
    Ok((0..AUTO_THRESHOLDS)
        .map(|k| {
            if k + 1 == AUTO_THRESHOLDS {
                hi
            } else {
                lo * ratio.powi(k as i32)
            }
        })
        .collect())
}

fn fit_slope(rows: &[TailRow]) -> (Option<f64>, usize, Option<String>) {
    let usable: Vec<&TailRow> = rows
        .iter()
        .filter(|r| r.stable && r.t > 0.0 && r.empirical > 0.0 && r.empirical < 1.0)
        .collect();
    let Some(top) = usable.iter().map(|r| r.t).reduce(f64::max) else {
        return (
            None,
            0,
            Some(format!(
                "no threshold has {MIN_EXCEEDANCES} or more exceedances"
            )),
        );
    };
    let window: Vec<(f64, f64)> = usable
        .iter()
        .filter(|r| r.t >= top / 10.0)
        .map(|r| (r.t.ln(), (-r.empirical.ln()).ln()))
        .collect();
    let k = window.len();
    if k < 3 {
        return (
            None,
            k,
            Some(format!(
                "only {k} stable thresholds in the top decade; need 3"
            )),
        );
    }
    let mx = window.iter().map(|w| w.0).sum::<f64>() / k as f64;
    let my = window.iter().map(|w| w.1).sum::<f64>() / k as f64;
    let sxx: f64 = window.iter().map(|w| (w.0 - mx).powi(2)).sum();
    let sxy: f64 = window.iter().map(|w| (w.0 - mx) * (w.1 - my)).sum();
    if sxx <= 0.0 {
        return (None, k, Some("top-decade thresholds coincide".into()));
    }
    (Some(sxy / sxx), k, None)
}

/// Empirical tail of the decoupled chaos against
/// `2 exp(-min_{I,J} (t / (C' A^d max ||slice||_J))^{2r/(2|I|+r|J|)})`.
///
/// `a` defaults to `scale * r^{-1/r}`, for which `||X||_p <= a p^{1/r}` holds
/// for every `p >= r`.
#[allow(clippy::too_many_arguments)]
pub fn tail_experiment(
    t: &CoefTensor<f64>,
    law: Law,
    thresholds: &Thresholds,
    cfg: &SampleConfig,
    a: Option<f64>,
    cprime: CprimeChoice,
    norm_cfg: &NormConfig,
) -> Result<TailReport> {
    cfg.validate()?;
    let r = law.shape().ok_or_else(|| {
        Error::Unsupported("the tail comparison needs an exponential or Weibull law".into())
    })?;
    let a = a.unwrap_or(law.scale() * r.powf(-1.0 / r));
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::Domain(format!(
            "A must be a finite positive real, got {a}"
        )));
    }
    if let CprimeChoice::Fixed(c) = cprime {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::Domain(format!(
                "Cprime must be a finite positive real, got {c}"
            )));
        }
    }
    let laws = LawGrid::broadcast(law, t.order(), t.dim());
    let grid = match thresholds {
        Thresholds::Given(v) => {
            check_thresholds(v)?;
            if v.iter().any(|&x| x <= 0.0) {
                return Err(Error::Input("tail thresholds must be positive".into()));
            }
            v.clone()
        }
        Thresholds::Auto => auto_thresholds(t, &laws, cfg)?,
    };
    let table = NormTable::compute(t, norm_cfg)?;
    let exponents = tail_exponents(&table, r)?;
    let min_exponent = exponents
        .iter()
        .filter(|e| e.max_norm > 0.0)
        .map(|e| e.exponent)
        .reduce(f64::min);
    let sorted = SortedMagnitudes::new(&sample_decoupled(t, &laws, cfg)?);
    let points = tail_from_sorted(&sorted, &grid);
    let bound_at = |c: f64, x: f64| table.weibull_dominated_tail(r, a, c, x);
    let dominates_with = |c: f64| -> Result<bool> {
        for p in points.iter().filter(|p| p.exceedances >= MIN_EXCEEDANCES) {
            if bound_at(c, p.t)? < p.survival {
                return Ok(false);
            }
        }
        Ok(true)
    };

    let mut warnings = Vec::new();
    let (c_used, calibrated, calibration_note) = match cprime {
        CprimeChoice::Fixed(c) => (c, false, None),
        CprimeChoice::Calibrate => {
            let (mut lo, mut hi) = CPRIME_RANGE;
            if !points.iter().any(|p| p.exceedances >= MIN_EXCEEDANCES) {
                (
                    1.0,
                    false,
                    Some("no stable thresholds; Cprime left at 1".to_string()),
                )
            } else if dominates_with(lo)? {
                (
                    lo,
                    true,
                    Some("bound dominates at the bottom of the search range".to_string()),
                )
            } else if !dominates_with(hi)? {
                warnings.push("calibration failed: no Cprime up to 1e6 dominates".to_string());
                (
                    hi,
                    false,
                    Some("no Cprime in [1e-6, 1e6] dominates the empirical tail".to_string()),
                )
            } else {
                for _ in 0..60 {
                    let mid = (lo * hi).sqrt();
                    if dominates_with(mid)? {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                (hi, true, None)
            }
        }
    };

    let rows = points
        .iter()
        .map(|p| {
            Ok(TailRow {
                t: p.t,
                empirical: p.survival,
                std_error: p.std_error,
                exceedances: p.exceedances,
                bound: bound_at(c_used, p.t)?,
                stable: p.exceedances >= MIN_EXCEEDANCES,
            })
        })
        .collect::<Result<Vec<TailRow>>>()?;
    let dominates = rows
        .iter()
        .filter(|r| r.stable)
        .all(|r| r.bound >= r.empirical);
    if !dominates {
        warnings.push("bound falls below the empirical tail at a stable threshold".to_string());
    }
    let (fitted_slope, slope_points, slope_note) = fit_slope(&rows);
    if table.unconverged() > 0 {
        warnings.push(format!(
            "{} iterative norms hit the iteration cap",
            table.unconverged()
        ));
    }
    Ok(TailReport {
        header: RunHeader::new(t, &laws, cfg),
        r,
        a,
        cprime: c_used,
        calibrated,
        calibration_note,
        rows,
        dominates,
        fitted_slope,
        slope_points,
        slope_note,
        min_exponent,
        exponents,
        warnings,
    })
}
