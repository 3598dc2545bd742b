//! Tail bounds derived from moment estimates, and the interpolation
//! inequality used to pass from sums to maxima.

use serde::Serialize;

use super::NormTable;
use crate::multiindex::{CoefTensor, ModeSubset, Partition};
use crate::norms::NormConfig;
use crate::scalar::{l2_norm, lp_norm};
use crate::{Error, Result, Scalar};

const GRID_RATIO: f64 = 1.1;

/// Geometric grid `2, 2.2, 2.42, ...` below `p_max`, then `p_max` itself.
pub fn tail_moment_grid<T: Scalar>(p_max: T) -> Result<Vec<T>> {
    if !(p_max >= T::of(2.0)) || !p_max.is_finite() {
        return Err(Error::Domain(format!(
            "p_max must be a finite real >= 2, got {p_max}"
        )));
    }
    let mut grid = Vec::new();
    let mut p = T::of(2.0);
    while p < p_max {
        grid.push(p);
        p = p * T::of(GRID_RATIO);
    }
    grid.push(p_max);
    Ok(grid)
}

/// `min(1, min { e^{-p} : e * est(p) <= t })` over [`tail_moment_grid`].
/// Every grid point is evaluated; `est` need not be monotone.
pub fn tail_from_moments<T: Scalar>(
    mut est: impl FnMut(T) -> Result<T>,
    t: T,
    p_max: T,
) -> Result<T> {
    if !(t > T::zero()) || !t.is_finite() {
        return Err(Error::Domain(format!(
            "threshold must be a finite positive real, got {t}"
        )));
    }
    let e = T::of(std::f64::consts::E);
    let mut best = T::one();
    for p in tail_moment_grid(p_max)? {
        if e * est(p)? <= t {
            best = best.min((-p).exp());
        }
    }
    Ok(best)
}

/// One `(I, J)` pair of the Weibull-type tail bound: the largest slice norm
/// `max_{i_I} ||slice||_J` and the exponent `2r / (2|I| + r|J|)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailExponent<T> {
    #[serde(rename = "I")]
    pub subset: ModeSubset,
    #[serde(rename = "J")]
    pub partition: Partition,
    pub max_norm: T,
    pub exponent: T,
}

pub fn tail_exponents<T: Scalar>(table: &NormTable<T>, r: T) -> Result<Vec<TailExponent<T>>> {
    check_shape_param(r)?;
    let two = T::of(2.0);
    let mut out = Vec::new();
    for sn in table.subsets() {
        for (j, partition) in sn.partitions.iter().enumerate() {
            let max_norm = sn.values[j].iter().fold(T::zero(), |m, &v| m.max(v));
            let denom = two * T::of_usize(sn.subset.len()) + r * T::of_usize(partition.len());
            out.push(TailExponent {
                subset: sn.subset,
                partition: partition.clone(),
                max_norm,
                exponent: two * r / denom,
            });
        }
    }
    Ok(out)
}

fn check_shape_param<T: Scalar>(r: T) -> Result<()> {
    if !(r > T::zero() && r <= T::one()) {
        return Err(Error::Domain(format!(
            "Weibull shape r must lie in (0, 1], got {r}"
        )));
    }
    Ok(())
}

impl<T: Scalar> NormTable<T> {
    /// `2 exp(-min_{I,J} (t / (C' A^d max_{i_I} ||slice||_J))^{2r/(2|I|+r|J|)})`,
    /// skipping pairs whose slices all vanish. Zero when every pair vanishes.
    pub fn weibull_dominated_tail(&self, r: T, a: T, cprime: T, t: T) -> Result<T> {
        check_shape_param(r)?;
        for (name, v) in [("A", a), ("Cprime", cprime), ("threshold", t)] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::Domain(format!(
                    "{name} must be a finite positive real, got {v}"
                )));
            }
        }
        let scale = cprime * a.powi(self.order() as i32);
        let exponent = tail_exponents(self, r)?
            .into_iter()
            .filter(|e| e.max_norm > T::zero())
            .map(|e| (t / (scale * e.max_norm)).powf(e.exponent))
            .fold(T::infinity(), T::min);
        Ok(T::of(2.0) * (-exponent).exp())
    }
}

pub fn weibull_dominated_tail<T: Scalar>(
    tensor: &CoefTensor<T>,
    r: T,
    a: T,
    cprime: T,
    t: T,
    cfg: &NormConfig,
) -> Result<T> {
    NormTable::compute(tensor, cfg)?.weibull_dominated_tail(r, a, cprime, t)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InterpolationCheck<T> {
    pub lhs: T,
    pub rhs: T,
    pub holds: bool,
}

/// `||x||_p <= e^{-gamma p} ||x||_2 + e^{6 gamma} ||x||_inf` for `p >= 3`.
pub fn interpolation_check<T: Scalar>(x: &[T], gamma: T, p: T) -> Result<InterpolationCheck<T>> {
    if x.is_empty() {
        return Err(Error::Domain(
            "interpolation check needs a nonempty vector".into(),
        ));
    }
    if !(gamma >= T::zero()) || !gamma.is_finite() {
        return Err(Error::Domain(format!(
            "gamma must be a finite real >= 0, got {gamma}"
        )));
    }
    if !(p >= T::of(3.0)) || !p.is_finite() {
        return Err(Error::Domain(format!(
            "p must be a finite real >= 3, got {p}"
        )));
    }
    let lhs = lp_norm(x, p);
    let sup = x.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let rhs = (-gamma * p).exp() * l2_norm(x) + (T::of(6.0) * gamma).exp() * sup;
    Ok(InterpolationCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + T::of(1e-12) * rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::erfc;
    use crate::{estimator::gaussian_estimate, Law};
    use proptest::prelude::*;

    #[test]
    fn grid_shape() {
        let g = tail_moment_grid(200.0f64).unwrap();
        assert_eq!(g[0], 2.0);
        assert_eq!(*g.last().unwrap(), 200.0);
        for w in g.windows(2).take(g.len() - 2) {
            assert!((w[1] / w[0] - 1.1).abs() < 1e-12);
        }
        assert_eq!(tail_moment_grid(2.0f64).unwrap(), vec![2.0]);
        assert!(tail_moment_grid(1.0f64).is_err());
    }

    #[test]
    fn moment_tail_examples() {
        let m = 3.0f64;
        let e = std::f64::consts::E;
        assert_eq!(
            tail_from_moments(|_| Ok(m), 0.5 * e * m, 200.0).unwrap(),
            1.0
        );
        let v = tail_from_moments(|_| Ok(m), e * m * 1.001, 200.0).unwrap();
        assert_eq!(v, (-200.0f64).exp());
        assert!(tail_from_moments(|_| Ok(m), 0.0, 200.0).is_err());
    }

    /// d = 1, a = e_1: S is a standard Gaussian; the moment bound must sit
    /// above the exact tail erfc(t / sqrt 2).
    #[test]
    fn moment_tail_dominates_exact_gaussian() {
        let g = Law::gaussian();
        for t in [3.0f64, 5.0, 10.0, 20.0] {
            let bound = tail_from_moments(|p| g.pnorm(p), t, 200.0).unwrap();
            let exact = erfc(t / std::f64::consts::SQRT_2);
            assert!(bound >= exact, "t={t}: {bound} < {exact}");
        }
        let e1 = CoefTensor::new(1, 2, vec![1.0, 0.0]).unwrap();
        let cfg = NormConfig::default();
        let b = tail_from_moments(
            |p| gaussian_estimate(&e1, p, &cfg).map(|b| b.total),
            10.0,
            200.0,
        )
        .unwrap();
        assert!(b >= erfc(10.0 / std::f64::consts::SQRT_2));
    }

    /// d = 1, a = e_1, r = 1, A = C' = 1: pairs ({1}, {}) with exponent 1
    /// and ({}, {{1}}) with exponent 2.
    #[test]
    fn weibull_tail_hand_enumeration() {
        let e1 = CoefTensor::new(1, 1, vec![1.0]).unwrap();
        let cfg = NormConfig::default();
        let table = NormTable::compute(&e1, &cfg).unwrap();
        let ex = tail_exponents(&table, 1.0).unwrap();
        let mut exps: Vec<f64> = ex.iter().map(|e| e.exponent).collect();
        exps.sort_by(f64::total_cmp);
        assert_eq!(exps, vec![1.0, 2.0]);
        for t in [0.3f64, 1.0, 4.0] {
            let want = 2.0 * (-(t.min(t * t))).exp();
            let got = weibull_dominated_tail(&e1, 1.0, 1.0, 1.0, t, &cfg).unwrap();
            assert!((got - want).abs() < 1e-14);
        }
        let near0 = weibull_dominated_tail(&e1, 1.0, 1.0, 1.0, 1e-12, &cfg).unwrap();
        assert!((near0 - 2.0).abs() < 1e-9);
        let z = CoefTensor::<f64>::zeros(2, 3).unwrap();
        assert_eq!(
            weibull_dominated_tail(&z, 0.5, 1.0, 1.0, 1.0, &cfg).unwrap(),
            0.0
        );
        assert!(weibull_dominated_tail(&e1, 0.0, 1.0, 1.0, 1.0, &cfg).is_err());
        assert!(weibull_dominated_tail(&e1, 1.0, 1.0, -1.0, 1.0, &cfg).is_err());
    }

    #[test]
    fn interpolation_examples() {
        for gamma in [0.0f64, 0.5, 2.0] {
            for p in [3.0f64, 7.0] {
                let c = interpolation_check(&[1.0, 0.0, 0.0], gamma, p).unwrap();
                assert_eq!(c.lhs, 1.0);
                assert!((c.rhs - ((-gamma * p).exp() + (6.0 * gamma).exp())).abs() < 1e-12 * c.rhs);
                assert!(c.holds);
            }
        }
        let n = 40.0f64;
        let c = interpolation_check(&vec![1.0; 40], 0.0, 4.0).unwrap();
        assert!((c.lhs - n.powf(0.25)).abs() < 1e-12);
        assert!((c.rhs - (n.sqrt() + 1.0)).abs() < 1e-12);
        assert!(interpolation_check::<f64>(&[], 0.0, 3.0).is_err());
        assert!(interpolation_check(&[1.0], 0.0, 2.5).is_err());
    }

    proptest! {
        #[test]
        fn moment_tail_nonincreasing_in_t(m in 0.1f64..10.0, slope in 0.0f64..2.0, t1 in 0.1f64..500.0, dt in 0.0f64..100.0) {
            let est = |p: f64| Ok(m * p.powf(slope));
            let a = tail_from_moments(est, t1, 200.0).unwrap();
            let b = tail_from_moments(est, t1 + dt, 200.0).unwrap();
            prop_assert!(b <= a);
            prop_assert!(a <= 1.0 && a > 0.0);
        }

        #[test]
        fn weibull_tail_nonincreasing_in_t(
            entries in proptest::collection::vec(-3.0f64..3.0, 4),
            r in 0.2f64..1.0,
            t1 in 0.01f64..50.0,
            dt in 0.0f64..50.0,
        ) {
            let x = CoefTensor::new(2, 2, entries).unwrap();
            let table = NormTable::compute(&x, &NormConfig::default()).unwrap();
            let a = table.weibull_dominated_tail(r, 1.0, 1.0, t1).unwrap();
            let b = table.weibull_dominated_tail(r, 1.0, 1.0, t1 + dt).unwrap();
            prop_assert!(b <= a);
        }

        #[test]
        fn interpolation_never_fails(
            x in proptest::collection::vec(-1e3f64..1e3, 1..64),
            gamma in 0.0f64..3.0,
            p in 3.0f64..60.0,
        ) {
            prop_assert!(interpolation_check(&x, gamma, p).unwrap().holds);
        }
    }
}
