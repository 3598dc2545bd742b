//! Deterministic moment estimates for decoupled chaoses
//! `S = sum_i a_i X^1_{i_1} ... X^d_{i_d}`.
//!
//! Every estimate is a combination, over subsets `I` of the modes, index
//! tuples `i_I` and partitions `J` of the complement, of the partition norms
//! of the slices `(a_i)_{i_{I^c}}` with `i_I` fixed. Those norms do not depend
//! on `p` or on the laws, so they are computed once into a [`NormTable`] and
//! shared by every form and every `p`.

mod closed_form;
mod tails;

pub use closed_form::{
    d2_estimate, hmso_estimate, nonhomogeneous_estimate, GaussianTerm, NonhomogeneousEstimate,
};
pub use tails::{
    interpolation_check, tail_exponents, tail_from_moments, tail_moment_grid,
    weibull_dominated_tail, InterpolationCheck, TailExponent,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::multiindex::{
    enumerate_partitions, enumerate_subsets, CoefTensor, IndexTuple, ModeSubset, Partition, BELL,
};
use crate::norms::{partition_norm, NormConfig};
use crate::scalar::lp_norm;
use crate::{Error, LawGrid, Result, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimateForm {
    /// Single p-th root of the grand sum over `(I, i_I, J)`.
    A,
    /// Sum over `(I, J)` of per-term p-th roots.
    B,
    /// Maximum over `i_I` in place of the p-th root aggregation.
    #[serde(rename = "max")]
    Max,
    /// Gaussian chaos: the `I = {}` terms only.
    #[serde(rename = "gaussian")]
    Gaussian,
    /// Order-two closed form.
    #[serde(rename = "d2")]
    D2,
    /// Order-one sum of independent variables.
    #[serde(rename = "hmso")]
    Hmso,
    /// Weibull(r) specialization with `p^{|I|/r}` in place of the law norms.
    #[serde(rename = "weibull")]
    Weibull,
    #[serde(rename = "weibull_max")]
    WeibullMax,
}

/// How the values over the fixed indices `i_I` are combined.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Sum,
    Max,
}

/// One `(I, J)` row of a breakdown: `contribution = prefactor * inner_value`,
/// where `prefactor` is the power of `p` and `inner_value` aggregates the
/// slice norms times the law norms over `i_I`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Term<T> {
    #[serde(rename = "I")]
    pub subset: ModeSubset,
    #[serde(rename = "J")]
    pub partition: Partition,
    pub prefactor: T,
    pub inner_value: T,
    pub contribution: T,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateBreakdown<T> {
    pub form: EstimateForm,
    pub p: T,
    pub terms: Vec<Term<T>>,
    pub total: T,
    pub norm_cfg: NormConfig,
}

impl<T: Scalar> EstimateBreakdown<T> {
    /// Sum of the contributions with `I = {}`.
    pub fn gaussian_part(&self) -> T {
        self.terms
            .iter()
            .filter(|t| t.subset.is_empty())
            .map(|t| t.contribution)
            .sum()
    }
}

/// Number of `(I, J)` pairs for order `d`: `sum_I Bell(d - |I|)`.
pub fn term_count(order: usize) -> usize {
    (0..=order)
        .map(|k| binomial(order, k) * BELL[order - k])
        .sum()
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

pub(crate) fn check_p<T: Scalar>(p: T) -> Result<()> {
    if !(p >= T::of(2.0)) || !p.is_finite() {
        return Err(Error::Domain(format!(
            "moment order p must be a finite real >= 2, got {p}"
        )));
    }
    Ok(())
}

/// Norms of all slices for one subset `I`.
#[derive(Clone, Debug)]
pub struct SubsetNorms<T> {
    pub subset: ModeSubset,
    /// `P(I^c)` in canonical order, labelled by the original modes.
    pub partitions: Vec<Partition>,
    /// `values[j][k]`: norm of slice number `k` (row-major over `i_I`) under
    /// `partitions[j]`.
    pub values: Vec<Vec<T>>,
}

impl<T: Scalar> SubsetNorms<T> {
    pub fn tuples(&self, dim: usize) -> impl Iterator<Item = IndexTuple> {
        IndexTuple::all(self.subset, dim)
    }
}

/// Every `||(a_i)_{i_{I^c}}||_J` for one tensor, in canonical `(I, J, i_I)` order.
#[derive(Clone, Debug)]
pub struct NormTable<T> {
    order: usize,
    dim: usize,
    cfg: NormConfig,
    subsets: Vec<SubsetNorms<T>>,
    unconverged: usize,
}

impl<T: Scalar> NormTable<T> {
    /// Evaluate all slice norms. Independent evaluations run on the current
    /// rayon pool; the table is assembled in canonical order.
    pub fn compute(t: &CoefTensor<T>, cfg: &NormConfig) -> Result<Self> {
        cfg.validate()?;
        let order = t.order();
        let dim = t.dim();
        let subsets = enumerate_subsets(order)?;
        let mut out = Vec::with_capacity(subsets.len());
        let mut unconverged = 0;
        for subset in subsets {
            let partitions = enumerate_partitions(&subset.complement())?;
            let compact: Vec<Partition> = partitions.iter().map(Partition::compact).collect();
            let tuples: Vec<IndexTuple> = IndexTuple::all(subset, dim).collect();
            let per_tuple: Vec<Result<Vec<(T, bool)>>> = tuples
                .par_iter()
                .map(|tuple| {
                    let slice = t.slice(tuple)?;
                    partitions
                        .iter()
                        .zip(&compact)
                        .map(|(orig, j)| {
                            partition_norm(&slice, j, cfg)
                                .map(|r| (r.value, r.converged || slice.is_zero()))
                                .map_err(|e| {
                                    e.within(&format!(
                                        "I={subset}, i_I=({}), J={orig}",
                                        tuple
                                            .values
                                            .iter()
                                            .map(|v| (v + 1).to_string())
                                            .collect::<Vec<_>>()
                                            .join(",")
                                    ))
                                })
                        })
                        .collect()
                })
                .collect();
            let mut values = vec![Vec::with_capacity(tuples.len()); partitions.len()];
            for row in per_tuple {
                for (j, (v, ok)) in row?.into_iter().enumerate() {
                    values[j].push(v);
                    if !ok {
                        unconverged += 1;
                    }
                }
            }
            out.push(SubsetNorms {
                subset,
                partitions,
                values,
            });
        }
        Ok(Self {
            order,
            dim,
            cfg: *cfg,
            subsets: out,
            unconverged,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn norm_cfg(&self) -> &NormConfig {
        &self.cfg
    }

    pub fn subsets(&self) -> &[SubsetNorms<T>] {
        &self.subsets
    }

    /// Count of iterative norms that hit the iteration cap.
    pub fn unconverged(&self) -> usize {
        self.unconverged
    }

    pub fn is_zero(&self) -> bool {
        self.subsets
            .iter()
            .all(|s| s.values.iter().all(|v| v.iter().all(|x| x.is_zero())))
    }

    /// `prod_{j in I} psi[j][i_j]` for every tuple of `subset`.
    fn law_weights(&self, subset: &ModeSubset, psi: &[Vec<T>]) -> Vec<T> {
        let modes: Vec<usize> = subset.members().collect();
        IndexTuple::all(*subset, self.dim)
            .map(|tuple| {
                modes
                    .iter()
                    .zip(&tuple.values)
                    .fold(T::one(), |acc, (&j, &i)| acc * psi[j][i])
            })
            .collect()
    }

    fn assemble(
        &self,
        form: EstimateForm,
        p: T,
        only_gaussian: bool,
        prefactor: impl Fn(&ModeSubset, &Partition) -> T,
        weights: impl Fn(&ModeSubset) -> Vec<T>,
        aggregation: Aggregation,
    ) -> EstimateBreakdown<T> {
        let mut terms = Vec::new();
        for sn in &self.subsets {
            if only_gaussian && !sn.subset.is_empty() {
                continue;
            }
            let w = weights(&sn.subset);
            for (j, partition) in sn.partitions.iter().enumerate() {
                let weighted: Vec<T> = sn.values[j].iter().zip(&w).map(|(&v, &x)| v * x).collect();
                let inner = match aggregation {
                    Aggregation::Sum => lp_norm(&weighted, p),
                    Aggregation::Max => weighted.iter().fold(T::zero(), |m, &x| m.max(x)),
                };
                let pre = prefactor(&sn.subset, partition);
                terms.push(Term {
                    subset: sn.subset,
                    partition: partition.clone(),
                    prefactor: pre,
                    inner_value: inner,
                    contribution: pre * inner,
                });
            }
        }
        let total = match form {
            EstimateForm::A => {
                let c: Vec<T> = terms.iter().map(|t| t.contribution).collect();
                lp_norm(&c, p)
            }
            _ => terms.iter().map(|t| t.contribution).sum(),
        };
        EstimateBreakdown {
            form,
            p,
            terms,
            total,
            norm_cfg: self.cfg,
        }
    }

    fn p_power(p: T, partition: &Partition) -> T {
        p.powf(T::of(0.5) * T::of_usize(partition.len()))
    }

    /// `(sum_{I, i_I, J} p^{p|J|/2} ||slice||_J^p prod_{j in I} psi_{i_j,j}^p)^{1/p}`.
    /// Terms hold the per-`(I, J)` p-th roots; the total is their l_p norm,
    /// whose p-th power is exactly the grand sum.
    pub fn form_a(&self, laws: &LawGrid, p: T) -> Result<EstimateBreakdown<T>> {
        check_p(p)?;
        laws.check_shape(self.order, self.dim)?;
        let psi = laws.pnorms(p)?;
        Ok(self.assemble(
            EstimateForm::A,
            p,
            false,
            |_, j| Self::p_power(p, j),
            |s| self.law_weights(s, &psi),
            Aggregation::Sum,
        ))
    }

    /// `sum_{I, J} p^{|J|/2} (sum_{i_I} ||slice||_J^p prod psi^p)^{1/p}`.
    pub fn form_b(&self, laws: &LawGrid, p: T) -> Result<EstimateBreakdown<T>> {
        check_p(p)?;
        laws.check_shape(self.order, self.dim)?;
        let psi = laws.pnorms(p)?;
        Ok(self.assemble(
            EstimateForm::B,
            p,
            false,
            |_, j| Self::p_power(p, j),
            |s| self.law_weights(s, &psi),
            Aggregation::Sum,
        ))
    }

    /// `sum_{I, J} p^{|J|/2} max_{i_I} ||slice||_J prod_{j in I} psi_j(p)`.
    /// Each mode must carry a single law.
    pub fn max_form(&self, laws: &LawGrid, p: T) -> Result<EstimateBreakdown<T>> {
        check_p(p)?;
        laws.check_shape(self.order, self.dim)?;
        if laws.mode_laws().is_none() {
            return Err(Error::Unsupported(
                "the max form needs one law per mode; got heterogeneous laws within a mode".into(),
            ));
        }
        let psi = laws.pnorms(p)?;
        Ok(self.assemble(
            EstimateForm::Max,
            p,
            false,
            |_, j| Self::p_power(p, j),
            |s| self.law_weights(s, &psi),
            Aggregation::Max,
        ))
    }

    /// `sum_{J in P([d])} p^{|J|/2} ||a||_J`.
    pub fn gaussian(&self, p: T) -> Result<EstimateBreakdown<T>> {
        check_p(p)?;
        Ok(self.assemble(
            EstimateForm::Gaussian,
            p,
            true,
            |_, j| Self::p_power(p, j),
            |_| vec![T::one()],
            Aggregation::Sum,
        ))
    }

    /// `sum_{I, J} p^{|I|/r + |J|/2}` times the l_p (sum) or max aggregation
    /// of the slice norms.
    pub fn weibull(&self, r: T, p: T, aggregation: Aggregation) -> Result<EstimateBreakdown<T>> {
        check_p(p)?;
        if !(r > T::zero() && r <= T::one()) {
            return Err(Error::Domain(format!(
                "Weibull shape r must lie in (0, 1], got {r}"
            )));
        }
        let form = match aggregation {
            Aggregation::Sum => EstimateForm::Weibull,
            Aggregation::Max => EstimateForm::WeibullMax,
        };
        let count = self.dim;
        Ok(self.assemble(
            form,
            p,
            false,
            |s, j| p.powf(T::of_usize(s.len()) / r + T::of(0.5) * T::of_usize(j.len())),
            |s| vec![T::one(); count.pow(s.len() as u32)],
            aggregation,
        ))
    }
}

/// Evaluate `form` from a precomputed table. `t` must be the tensor the table
/// was built from; the order-one and order-two closed forms read it directly.
/// The Weibull forms take their shape from `laws`, which must then be a single
/// Weibull-type law.
pub fn evaluate<T: Scalar>(
    form: EstimateForm,
    table: &NormTable<T>,
    t: &CoefTensor<T>,
    laws: &LawGrid,
    p: T,
) -> Result<EstimateBreakdown<T>> {
    match form {
        EstimateForm::A => table.form_a(laws, p),
        EstimateForm::B => table.form_b(laws, p),
        EstimateForm::Max => table.max_form(laws, p),
        EstimateForm::Gaussian => table.gaussian(p),
        EstimateForm::D2 => d2_estimate(t, laws, p, table.norm_cfg()),
        EstimateForm::Hmso => {
            if t.order() != 1 {
                return Err(Error::Domain(format!(
                    "the order-one estimate needs d = 1, got d = {}",
                    t.order()
                )));
            }
            laws.check_shape(1, t.dim())?;
            hmso_estimate(t.entries(), laws.column(0), p, GaussianTerm::Exact)
        }
        EstimateForm::Weibull | EstimateForm::WeibullMax => {
            let r = common_shape(laws)?;
            let aggregation = if form == EstimateForm::Weibull {
                Aggregation::Sum
            } else {
                Aggregation::Max
            };
            table.weibull(T::of(r), p, aggregation)
        }
    }
}

/// Shape `r` of a grid holding one Weibull-type law everywhere.
pub fn common_shape(laws: &LawGrid) -> Result<f64> {
    let first = laws.laws()[0];
    match first.shape() {
        Some(r) if laws.laws().iter().all(|l| *l == first) => Ok(r),
        _ => Err(Error::Unsupported(
            "the Weibull forms need a single exponential or Weibull law for every variable".into(),
        )),
    }
}

pub fn estimate_form_a<T: Scalar>(
    t: &CoefTensor<T>,
    laws: &LawGrid,
    p: T,
    cfg: &NormConfig,
) -> Result<EstimateBreakdown<T>> {
    check_p(p)?;
    NormTable::compute(t, cfg)?.form_a(laws, p)
}

pub fn estimate_form_b<T: Scalar>(
    t: &CoefTensor<T>,
    laws: &LawGrid,
    p: T,
    cfg: &NormConfig,
) -> Result<EstimateBreakdown<T>> {
    check_p(p)?;
    NormTable::compute(t, cfg)?.form_b(laws, p)
}

pub fn estimate_max_form<T: Scalar>(
    t: &CoefTensor<T>,
    laws: &LawGrid,
    p: T,
    cfg: &NormConfig,
) -> Result<EstimateBreakdown<T>> {
    check_p(p)?;
    NormTable::compute(t, cfg)?.max_form(laws, p)
}

pub fn gaussian_estimate<T: Scalar>(
    t: &CoefTensor<T>,
    p: T,
    cfg: &NormConfig,
) -> Result<EstimateBreakdown<T>> {
    check_p(p)?;
    NormTable::compute(t, cfg)?.gaussian(p)
}

pub fn weibull_estimate<T: Scalar>(
    t: &CoefTensor<T>,
    r: T,
    p: T,
    aggregation: Aggregation,
    cfg: &NormConfig,
) -> Result<EstimateBreakdown<T>> {
    check_p(p)?;
    NormTable::compute(t, cfg)?.weibull(r, p, aggregation)
}
