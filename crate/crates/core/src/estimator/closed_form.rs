//! Closed-form estimates that bypass the generic norm table: order two,
//! order one, and sums of chaoses of different orders.

use super::{check_p, EstimateBreakdown, EstimateForm, NormTable, Term};
use crate::multiindex::{CoefTensor, GroupedTensor, ModeSubset, Partition};
use crate::norms::{spectral_norm, NormConfig};
use crate::scalar::{l2_norm, lp_norm};
use crate::{Error, Law, LawGrid, Result, Scalar};

fn single_block(order: usize, members: &[usize]) -> Result<Partition> {
    let ground = ModeSubset::from_members(order, members)?;
    Partition::new(ground, vec![ground])
}

/// `p ||a||_op + sqrt(p) ||a||_HS + sqrt(p) (sum_i psi_i^p ||a_{i.}||^p)^{1/p}
/// + sqrt(p) (sum_j psi_j^p ||a_{.j}||^p)^{1/p} + (sum_{ij} |a_ij|^p psi_i^p psi_j^p)^{1/p}`.
///
/// Computed straight from the matrix, without the slice machinery.
pub fn d2_estimate<T: Scalar>(
    t: &CoefTensor<T>,
    laws: &LawGrid,
    p: T,
    cfg: &NormConfig,
) -> Result<EstimateBreakdown<T>> {
    if t.order() != 2 {
        return Err(Error::Domain(format!(
            "the order-two closed form needs d = 2, got d = {}",
            t.order()
        )));
    }
    check_p(p)?;
    laws.check_shape(2, t.dim())?;
    let n = t.dim();
    let psi = laws.pnorms(p)?;
    let a = t.entries();
    let sqrt_p = p.sqrt();

    let op = spectral_norm(&GroupedTensor::new(vec![n, n], a.to_vec())?, cfg)
        .map_err(|e| e.within("I={}, J={{1},{2}}"))?
        .value;
    let hs = l2_norm(a);
    let rows: Vec<T> = (0..n)
        .map(|i| psi[0][i] * l2_norm(&a[i * n..(i + 1) * n]))
        .collect();
    let cols: Vec<T> = (0..n)
        .map(|j| {
            let col: Vec<T> = (0..n).map(|i| a[i * n + j]).collect();
            psi[1][j] * l2_norm(&col)
        })
        .collect();
    let entries: Vec<T> = (0..n * n)
        .map(|k| a[k] * psi[0][k / n] * psi[1][k % n])
        .collect();

    let empty = ModeSubset::empty(2);
    let full = ModeSubset::full(2);
    let singles = Partition::new(
        full,
        vec![
            ModeSubset::from_members(2, &[0])?,
            ModeSubset::from_members(2, &[1])?,
        ],
    )?;
    let rows_set = ModeSubset::from_members(2, &[0])?;
    let cols_set = ModeSubset::from_members(2, &[1])?;
    let pieces = [
        (empty, singles, p, op),
        (empty, single_block(2, &[0, 1])?, sqrt_p, hs),
        (rows_set, single_block(2, &[1])?, sqrt_p, lp_norm(&rows, p)),
        (cols_set, single_block(2, &[0])?, sqrt_p, lp_norm(&cols, p)),
        (full, Partition::empty(2), T::one(), lp_norm(&entries, p)),
    ];
    let terms: Vec<Term<T>> = pieces
        .into_iter()
        .map(|(subset, partition, prefactor, inner_value)| Term {
            subset,
            partition,
            prefactor,
            inner_value,
            contribution: prefactor * inner_value,
        })
        .collect();
    let total = terms.iter().map(|t| t.contribution).sum();
    Ok(EstimateBreakdown {
        form: EstimateForm::D2,
        p,
        terms,
        total,
        norm_cfg: *cfg,
    })
}

/// Which value multiplies `||a||_2` in the order-one estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum GaussianTerm {
    /// `||g||_p` for a standard Gaussian `g`.
    #[default]
    Exact,
    /// `sqrt(p)`.
    SqrtP,
}

/// `(sum_i |a_i|^p ||X_i||_p^p)^{1/p} + c(p) ||a||_2` for unit-variance laws,
/// with `c(p)` chosen by `gaussian`.
pub fn hmso_estimate<T: Scalar>(
    a: &[T],
    laws: &[Law],
    p: T,
    gaussian: GaussianTerm,
) -> Result<EstimateBreakdown<T>> {
    check_p(p)?;
    if a.len() != laws.len() {
        return Err(Error::Dimension(format!(
            "{} coefficients but {} laws",
            a.len(),
            laws.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::Dimension("empty coefficient vector".into()));
    }
    if let Some((i, law)) = laws
        .iter()
        .enumerate()
        .find(|(_, l)| !l.is_normalized(1e-9))
    {
        return Err(Error::Hypothesis(format!(
            "law {} has variance {}, expected 1",
            i + 1,
            law.variance()
        )));
    }
    let weighted = a
        .iter()
        .zip(laws)
        .map(|(&x, l)| l.pnorm(p).map(|psi| x * psi))
        .collect::<Result<Vec<T>>>()?;
    let c = match gaussian {
        GaussianTerm::Exact => Law::gaussian().pnorm(p)?,
        GaussianTerm::SqrtP => p.sqrt(),
    };
    let full = ModeSubset::full(1);
    let terms = vec![
        Term {
            subset: ModeSubset::empty(1),
            partition: Partition::new(full, vec![full])?,
            prefactor: c,
            inner_value: l2_norm(a),
            contribution: c * l2_norm(a),
        },
        Term {
            subset: full,
            partition: Partition::empty(1),
            prefactor: T::one(),
            inner_value: lp_norm(&weighted, p),
            contribution: lp_norm(&weighted, p),
        },
    ];
    let total = terms.iter().map(|t| t.contribution).sum();
    Ok(EstimateBreakdown {
        form: EstimateForm::Hmso,
        p,
        terms,
        total,
        norm_cfg: NormConfig::default(),
    })
}

/// `constant` is `|a^0|`; `parts` holds one form-B breakdown per nonzero order,
/// in increasing order.
#[derive(Clone, Debug, PartialEq)]
pub struct NonhomogeneousEstimate<T> {
    pub constant: T,
    pub parts: Vec<EstimateBreakdown<T>>,
    pub total: T,
}

/// `|a^0| + sum_j B(a^j)` for coefficient tensors of distinct orders. The
/// order-`j` part is driven by the first `j` modes of `laws`.
pub fn nonhomogeneous_estimate<T: Scalar>(
    parts: &[CoefTensor<T>],
    laws: &LawGrid,
    p: T,
    cfg: &NormConfig,
) -> Result<NonhomogeneousEstimate<T>> {
    check_p(p)?;
    let mut seen = vec![false; laws.order() + 1];
    let mut constant = T::zero();
    let mut out = Vec::new();
    for part in parts {
        let j = part.order();
        if j > laws.order() {
            return Err(Error::Dimension(format!(
                "order-{j} part needs {j} law modes, grid has {}",
                laws.order()
            )));
        }
        if std::mem::replace(&mut seen[j], true) {
            return Err(Error::Input(format!("two parts of order {j}")));
        }
        if j == 0 {
            constant = part.entries()[0].abs();
            continue;
        }
        let sub = LawGrid::from_columns((0..j).map(|m| laws.column(m).to_vec()).collect())?;
        out.push(NormTable::compute(part, cfg)?.form_b(&sub, p)?);
    }
    out.sort_by_key(|b| b.terms.first().map_or(0, |t| t.subset.order()));
    let total = constant + out.iter().map(|b| b.total).sum::<T>();
    Ok(NonhomogeneousEstimate {
        constant,
        parts: out,
        total,
    })
}
