//! Partition-indexed norms `||a||_J`: the supremum of the multilinear form
//! over unit vectors, one vector per block of `J`.
//!
//! One block is the Frobenius norm and two blocks the operator norm of the
//! regrouped matrix, both computed to tolerance. Three or more blocks use
//! alternating maximization (higher-order power iteration) with restarts,
//! which returns a value attained by its witness and therefore a lower bound.
//! [`brute_force_norm`] is a grid-search oracle for tiny instances.

use serde::{Deserialize, Serialize};

use crate::multiindex::{CoefTensor, GroupedTensor, Partition};
use crate::rng::{self, UniformSource};
use crate::scalar::{dot, l2_norm};
use crate::{Error, Result, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMethod {
    Frobenius,
    Spectral,
    PowerIteration,
    BruteForce,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormResult<T> {
    pub value: T,
    /// One unit vector per block.
    pub witness: Vec<Vec<T>>,
    pub method: NormMethod,
    pub converged: bool,
    pub iterations: usize,
    /// Brute force only: bound on `sup - value` from the grid spacing.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub discretization_error: Option<T>,
}

/// Tolerances and restart policy for the iterative norms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormConfig {
    pub restarts: usize,
    pub spectral_tol: f64,
    pub multilinear_tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for NormConfig {
    fn default() -> Self {
        Self {
            restarts: 16,
            spectral_tol: 1e-10,
            multilinear_tol: 1e-8,
            max_iter: 10_000,
            seed: 0,
        }
    }
}

impl NormConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::Domain("restarts must be at least 1".into()));
        }
        if !(self.spectral_tol > 0.0 && self.multilinear_tol > 0.0) {
            return Err(Error::Domain("norm tolerances must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Domain("iteration cap must be at least 1".into()));
        }
        Ok(())
    }
}

fn unit<T: Scalar>(len: usize, at: usize) -> Vec<T> {
    let mut v = vec![T::zero(); len];
    v[at] = T::one();
    v
}

fn ones_normalized<T: Scalar>(len: usize) -> Vec<T> {
    vec![T::one() / T::of_usize(len).sqrt(); len]
}

fn normalize<T: Scalar>(v: &mut [T]) -> T {
    let nrm = l2_norm(v);
    if nrm > T::zero() {
        v.iter_mut().for_each(|x| *x = *x / nrm);
    }
    nrm
}

fn random_unit<T: Scalar, U: UniformSource>(len: usize, src: &mut U) -> Vec<T> {
    loop {
        let mut v: Vec<T> = (0..len)
            .map(|_| T::of(crate::laws::Law::gaussian().sample(src)))
            .collect();
        if normalize(&mut v) > T::zero() {
            return v;
        }
    }
}

fn zero_result<T: Scalar>(dims: &[usize], method: NormMethod, converged: bool) -> NormResult<T> {
    NormResult {
        value: T::zero(),
        witness: dims.iter().map(|&m| unit(m, 0)).collect(),
        method,
        converged,
        iterations: 0,
        discretization_error: None,
    }
}

/// Square root of the sum of squared entries, with the normalized entry
/// array as the single witness block.
pub fn frobenius_norm<T: Scalar>(t: &CoefTensor<T>) -> NormResult<T> {
    let mut w = t.entries().to_vec();
    let value = normalize(&mut w);
    if value.is_zero() {
        return zero_result(&[t.len()], NormMethod::Frobenius, true);
    }
    NormResult {
        value,
        witness: vec![w],
        method: NormMethod::Frobenius,
        converged: true,
        iterations: 0,
        discretization_error: None,
    }
}

fn mat_vec<T: Scalar>(a: &[T], rows: usize, cols: usize, x: &[T]) -> Vec<T> {
    (0..rows)
        .map(|i| dot(&a[i * cols..(i + 1) * cols], x))
        .collect()
}

fn mat_t_vec<T: Scalar>(a: &[T], rows: usize, cols: usize, y: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); cols];
    for i in 0..rows {
        let yi = y[i];
        for (o, &aij) in out.iter_mut().zip(&a[i * cols..(i + 1) * cols]) {
            *o = *o + yi * aij;
        }
    }
    out
}

/// Symmetric `s x s` Gram matrix on the smaller side of `a`.
fn gram<T: Scalar>(a: &[T], rows: usize, cols: usize) -> (Vec<T>, bool) {
    let right = cols <= rows;
    let s = rows.min(cols);
    let mut g = vec![T::zero(); s * s];
    for p in 0..s {
        for q in p..s {
            let v: T = if right {
                (0..rows).map(|i| a[i * cols + p] * a[i * cols + q]).sum()
            } else {
                dot(&a[p * cols..(p + 1) * cols], &a[q * cols..(q + 1) * cols])
            };
            g[p * s + q] = v;
            g[q * s + p] = v;
        }
    }
    (g, right)
}

fn sym_square<T: Scalar>(h: &[T], s: usize) -> Vec<T> {
    let mut out = vec![T::zero(); s * s];
    for p in 0..s {
        for q in p..s {
            let v = dot(&h[p * s..(p + 1) * s], &h[q * s..(q + 1) * s]);
            out[p * s + q] = v;
            out[q * s + p] = v;
        }
    }
    let m = out.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    if m > T::zero() {
        out.iter_mut().for_each(|x| *x = *x / m);
    }
    out
}

/// Largest singular value of a 2-mode grouped tensor, by power iteration on
/// the Gram operator of the smaller side. The iteration operator is the Gram
/// matrix raised to the 8th power by repeated squaring (for sides up to 256),
/// the Rayleigh quotient is taken on the Gram matrix itself. Runs from the
/// normalized all-ones vector and from one seeded random start.
pub fn spectral_norm<T: Scalar>(m: &GroupedTensor<T>, cfg: &NormConfig) -> Result<NormResult<T>> {
    if m.order() != 2 {
        return Err(Error::Dimension(format!(
            "spectral norm needs a 2-mode tensor, got {} modes",
            m.order()
        )));
    }
    let (rows, cols) = (m.dims()[0], m.dims()[1]);
    if m.is_zero() {
        return Ok(zero_result(m.dims(), NormMethod::Spectral, true));
    }
    let a = m.entries();
    let (g, right) = gram(a, rows, cols);
    let s = rows.min(cols);
    let mut h = g.clone();
    if s <= 256 {
        for _ in 0..3 {
            h = sym_square(&h, s);
        }
    }
    let tol = T::of(cfg.spectral_tol);

    let mut src = rng::stream(cfg.seed, rng::label::NORM_RESTART, u64::MAX);
    let starts = [ones_normalized(s), random_unit(s, &mut src)];
    let mut best: Option<(T, Vec<T>, usize, bool)> = None;
    for start in starts {
        let mut v = start;
        let mut lambda = dot(&v, &mat_vec(&g, s, s, &v));
        let mut converged = false;
        let mut iterations = 0;
        for it in 1..=cfg.max_iter {
            iterations = it;
            let mut next = mat_vec(&h, s, s, &v);
            if normalize(&mut next).is_zero() {
                // Start orthogonal to the range; the other start covers it.
                break;
            }
            v = next;
            let updated = dot(&v, &mat_vec(&g, s, s, &v));
            let change = (updated - lambda).abs();
            lambda = updated;
            if it > 1 && change <= tol * lambda.abs() {
                converged = true;
                break;
            }
        }
        if best.as_ref().is_none_or(|b| lambda > b.0) {
            best = Some((lambda, v, iterations, converged));
        }
    }
    let (lambda, v, iterations, converged) = best.expect("two starts");
    if !converged {
        return Err(Error::Convergence {
            context: format!("spectral norm of a {rows}x{cols} matrix"),
            best: lambda.max(T::zero()).sqrt().as_f64(),
            iterations,
        });
    }
    // v is a unit singular vector on the Gram side; map it across and
    // normalize so the form at the witness equals ||A v||.
    let (x, y) = if right {
        let mut x = mat_vec(a, rows, cols, &v);
        normalize(&mut x);
        (x, v)
    } else {
        let mut y = mat_t_vec(a, rows, cols, &v);
        normalize(&mut y);
        (v, y)
    };
    let value = dot(&x, &mat_vec(a, rows, cols, &y));
    Ok(NormResult {
        value,
        witness: vec![x, y],
        method: NormMethod::Spectral,
        converged: true,
        iterations,
        discretization_error: None,
    })
}

struct Run<T> {
    value: T,
    vectors: Vec<Vec<T>>,
    iterations: usize,
    converged: bool,
}

/// Alternating maximization from `start`. `None` when a contraction vanishes.
fn hopm_run<T: Scalar>(
    t: &GroupedTensor<T>,
    mut x: Vec<Vec<T>>,
    tol: T,
    max_iter: usize,
) -> Option<Run<T>> {
    let k = t.order();
    let mut prev = T::neg_infinity();
    let mut obj = T::zero();
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=max_iter {
        iterations = it;
        for l in 0..k {
            let mut c = t.contract_except(&x, l);
            let nrm = normalize(&mut c);
            if nrm.is_zero() {
                return None;
            }
            x[l] = c;
            obj = nrm;
        }
        if (obj - prev).abs() <= tol * obj.max(T::min_positive_value()) {
            converged = true;
            break;
        }
        prev = obj;
    }
    let value = t.form(&x);
    Some(Run {
        value,
        vectors: x,
        iterations,
        converged,
    })
}

const MAX_DEGENERATE_RETRIES: usize = 8;

/// Higher-order power iteration with restarts. Runs, in order: the largest
/// entry's coordinate vectors, the normalized all-ones vectors, then
/// `restarts` seeded random starts. The first run attaining the maximum wins.
pub fn multilinear_norm<T: Scalar>(
    t: &GroupedTensor<T>,
    restarts: usize,
    tol: T,
    max_iter: usize,
    seed: u64,
) -> Result<NormResult<T>> {
    if restarts == 0 {
        return Err(Error::Domain("restarts must be at least 1".into()));
    }
    let dims = t.dims().to_vec();
    if t.is_zero() {
        return Ok(zero_result(&dims, NormMethod::PowerIteration, false));
    }
    let key = rng::stream_key(seed, rng::label::NORM_RESTART);
    let mut retry_counter = restarts as u64 + 1;

    let (argmax, _) = t
        .entries()
        .iter()
        .enumerate()
        .fold((0, T::zero()), |(bi, bv), (i, &v)| {
            if v.abs() > bv {
                (i, v.abs())
            } else {
                (bi, bv)
            }
        });
    let mut coord_start = Vec::with_capacity(dims.len());
    let mut rest = argmax;
    for &m in dims.iter().rev() {
        coord_start.push(unit::<T>(m, rest % m));
        rest /= m;
    }
    coord_start.reverse();
    if t.entries()[argmax] < T::zero() {
        coord_start[0].iter_mut().for_each(|e| *e = -*e);
    }

    let mut best: Option<Run<T>> = None;
    for run in 0..restarts + 2 {
        let mut start: Vec<Vec<T>> = match run {
            0 => coord_start.clone(),
            1 => dims.iter().map(|&m| ones_normalized(m)).collect(),
            r => {
                let mut src = rng::stream_from_key(&key, (r - 2) as u64);
                dims.iter().map(|&m| random_unit(m, &mut src)).collect()
            }
        };
        let mut outcome = None;
        for _ in 0..=MAX_DEGENERATE_RETRIES {
            if let Some(r) = hopm_run(t, start, tol, max_iter) {
                outcome = Some(r);
                break;
            }
            let mut src = rng::stream_from_key(&key, retry_counter);
            retry_counter += 1;
            start = dims.iter().map(|&m| random_unit(m, &mut src)).collect();
        }
        if let Some(r) = outcome {
            if best.as_ref().is_none_or(|b| r.value > b.value) {
                best = Some(r);
            }
        }
    }
    let best = best.ok_or_else(|| Error::Convergence {
        context: format!("power iteration on a {dims:?} tensor (all starts degenerate)"),
        best: 0.0,
        iterations: 0,
    })?;
    Ok(NormResult {
        value: best.value,
        witness: best.vectors,
        method: NormMethod::PowerIteration,
        converged: best.converged,
        iterations: best.iterations,
        discretization_error: None,
    })
}

/// Upper bound on the number of grid points [`brute_force_norm`] visits.
pub const BRUTE_FORCE_MAX_POINTS: f64 = 1e8;

/// Grid of unit vectors covering the sphere in `R^m` up to sign, with its
/// covering radius (geodesic, hence also chordal).
fn sphere_grid<T: Scalar>(m: usize, step: f64) -> (Vec<Vec<T>>, f64) {
    use std::f64::consts::{FRAC_PI_2, PI, TAU};
    match m {
        1 => (vec![vec![T::one()]], 0.0),
        2 => {
            let count = (PI / step).ceil() as usize;
            let pts = (0..count)
                .map(|i| {
                    let th = i as f64 * step;
                    vec![T::of(th.cos()), T::of(th.sin())]
                })
                .collect();
            (pts, step / 2.0)
        }
        _ => {
            let n_theta = (FRAC_PI_2 / step).ceil() as usize;
            let n_phi = (TAU / step).ceil() as usize;
            let mut pts = Vec::with_capacity((n_theta + 1) * n_phi);
            for i in 0..=n_theta {
                let th = (i as f64 * step).min(FRAC_PI_2);
                for j in 0..n_phi {
                    let ph = j as f64 * step;
                    pts.push(vec![
                        T::of(th.sin() * ph.cos()),
                        T::of(th.sin() * ph.sin()),
                        T::of(th.cos()),
                    ]);
                }
            }
            (pts, step)
        }
    }
}

/// Exhaustive grid search for tiny instances (at most 3 blocks, block sizes at
/// most 3). All but the last vector range over a spherical-angle grid of
/// spacing `step`; the last is chosen optimally. The best grid point is then
/// polished by alternating maximization. `discretization_error` bounds
/// `sup - value` by the Frobenius norm times the summed covering radii.
pub fn brute_force_norm<T: Scalar>(t: &GroupedTensor<T>, step: f64) -> Result<NormResult<T>> {
    let dims = t.dims().to_vec();
    let k = dims.len();
    if k > 3 || dims.iter().any(|&m| m > 3) {
        return Err(Error::Capacity(format!(
            "brute force supports at most 3 blocks of size <= 3, got {dims:?}"
        )));
    }
    if !(step > 0.0) {
        return Err(Error::Domain("grid step must be positive".into()));
    }
    let grids: Vec<(Vec<Vec<T>>, f64)> = dims[..k - 1]
        .iter()
        .map(|&m| sphere_grid(m, step))
        .collect();
    let points: f64 = grids.iter().map(|g| g.0.len() as f64).product();
    if points > BRUTE_FORCE_MAX_POINTS {
        return Err(Error::Capacity(format!(
            "{points:.3e} grid points exceed the cap of {BRUTE_FORCE_MAX_POINTS:e}"
        )));
    }
    let lipschitz = l2_norm(t.entries());
    let covering: f64 = grids.iter().map(|g| g.1).sum();
    let bound = lipschitz * T::of(covering);
    if t.is_zero() {
        let mut r = zero_result(&dims, NormMethod::BruteForce, true);
        r.discretization_error = Some(T::zero());
        return Ok(r);
    }

    let mut x: Vec<Vec<T>> = dims.iter().map(|&m| unit(m, 0)).collect();
    let mut best_val = T::neg_infinity();
    let mut best_x = x.clone();
    let mut counters = vec![0usize; k - 1];
    loop {
        for (l, g) in grids.iter().enumerate() {
            x[l] = g.0[counters[l]].clone();
        }
        let mut c = t.contract_except(&x, k - 1);
        let val = normalize(&mut c);
        if val > best_val {
            best_val = val;
            x[k - 1] = if val.is_zero() {
                unit(dims[k - 1], 0)
            } else {
                c
            };
            best_x = x.clone();
        }
        // odometer over the grids
        let mut l = 0;
        loop {
            if l == k - 1 {
                break;
            }
            counters[l] += 1;
            if counters[l] < grids[l].0.len() {
                break;
            }
            counters[l] = 0;
            l += 1;
        }
        if l == k - 1 {
            break;
        }
    }

    let polished = hopm_run(t, best_x.clone(), T::of(1e-14), 10_000);
    let (value, witness, iterations) = match polished {
        Some(r) if r.value >= best_val => (r.value, r.vectors, r.iterations),
        _ => (t.form(&best_x), best_x, 0),
    };
    Ok(NormResult {
        value,
        witness,
        method: NormMethod::BruteForce,
        converged: true,
        iterations,
        discretization_error: Some(bound),
    })
}

/// `||t||_J` for a partition of all of `t`'s modes. Dispatches on `|J|`:
/// 0 gives `|scalar|`, 1 Frobenius, 2 spectral, 3+ power iteration.
pub fn partition_norm<T: Scalar>(
    t: &CoefTensor<T>,
    partition: &Partition,
    cfg: &NormConfig,
) -> Result<NormResult<T>> {
    match partition.len() {
        0 => {
            if t.order() != 0 {
                return Err(Error::Partition(format!(
                    "empty partition applied to a {}-mode tensor",
                    t.order()
                )));
            }
            Ok(NormResult {
                value: t.entries()[0].abs(),
                witness: Vec::new(),
                method: NormMethod::Frobenius,
                converged: true,
                iterations: 0,
                discretization_error: None,
            })
        }
        1 => {
            t.group_flatten(partition)?;
            Ok(frobenius_norm(t))
        }
        2 => spectral_norm(&t.group_flatten(partition)?, cfg),
        _ => multilinear_norm(
            &t.group_flatten(partition)?,
            cfg.restarts,
            T::of(cfg.multilinear_tol),
            cfg.max_iter,
            cfg.seed,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiindex::{enumerate_partitions, ModeSubset};

    fn grouped(dims: &[usize], entries: Vec<f64>) -> GroupedTensor<f64> {
        GroupedTensor::new(dims.to_vec(), entries).unwrap()
    }

    fn cfg() -> NormConfig {
        NormConfig::default()
    }

    fn check_witness(t: &GroupedTensor<f64>, r: &NormResult<f64>) {
        for w in &r.witness {
            assert!((l2_norm(w) - 1.0).abs() < 1e-12);
        }
        let f = t.form(&r.witness);
        assert!(
            (f - r.value).abs() <= 1e-9 * r.value.max(1e-300),
            "{f} vs {}",
            r.value
        );
    }

    #[test]
    fn frobenius_examples() {
        let t = CoefTensor::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((frobenius_norm(&t).value - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(
            frobenius_norm(&CoefTensor::<f64>::zeros(2, 3).unwrap()).value,
            0.0
        );
        assert_eq!(
            frobenius_norm(&CoefTensor::new(1, 2, vec![3.0, 4.0]).unwrap()).value,
            5.0
        );
    }

    #[test]
    fn spectral_examples() {
        for (e, want) in [
            (vec![1.0, 0.0, 0.0, 1.0], 1.0),
            (vec![0.0, 1.0, 1.0, 0.0], 1.0),
            // sqrt of the larger eigenvalue of A^T A = [[10,14],[14,20]]: sqrt(15 + sqrt(221))
            (vec![1.0, 2.0, 3.0, 4.0], (15.0 + 221f64.sqrt()).sqrt()),
        ] {
            let m = grouped(&[2, 2], e);
            let r = spectral_norm(&m, &cfg()).unwrap();
            assert!((r.value - want).abs() < 1e-12, "{} vs {want}", r.value);
            check_witness(&m, &r);
        }
        assert!(((15.0 + 221f64.sqrt()).sqrt() - 5.464_985_704_219_043).abs() < 1e-12);
    }

    #[test]
    fn spectral_rectangular_and_negative() {
        let m = grouped(&[2, 3], vec![-3.0, 0.0, 0.0, 0.0, 0.0, -1.0]);
        let r = spectral_norm(&m, &cfg()).unwrap();
        assert!((r.value - 3.0).abs() < 1e-12);
        check_witness(&m, &r);
        let wide = grouped(&[3, 2], vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        let r = spectral_norm(&wide, &cfg()).unwrap();
        assert!((r.value - 6f64.sqrt()).abs() < 1e-12);
        check_witness(&wide, &r);
    }

    #[test]
    fn multilinear_rank_one() {
        let mut e = vec![0.0; 8];
        e[0] = 3.0;
        let t = grouped(&[2, 2, 2], e);
        let r = multilinear_norm(&t, 4, 1e-12, 1000, 0).unwrap();
        assert!((r.value - 3.0).abs() < 1e-12);
        check_witness(&t, &r);

        let u = [0.6, 0.8];
        let v = [1.0 / 2f64.sqrt(), -1.0 / 2f64.sqrt()];
        let w = [0.28, 0.96];
        let mut e = Vec::new();
        for a in u {
            for b in v {
                for c in w {
                    e.push(7.0 * a * b * c);
                }
            }
        }
        let t = grouped(&[2, 2, 2], e);
        let r = multilinear_norm(&t, 4, 1e-12, 1000, 3).unwrap();
        assert!((r.value - 7.0).abs() < 1e-10);
        check_witness(&t, &r);
    }

    #[test]
    fn multilinear_zero_tensor_convention() {
        let r = multilinear_norm(&grouped(&[2, 2, 2], vec![0.0; 8]), 2, 1e-8, 100, 0).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(!r.converged);
        assert_eq!(r.witness[0], vec![1.0, 0.0]);
    }

    /// Diagonal tensor: max of sum_i x_i y_i z_i over unit vectors is 1,
    /// attained at coordinate vectors; Holder gives the upper bound.
    #[test]
    fn brute_force_examples() {
        let step = std::f64::consts::PI / 1000.0;
        let id = grouped(&[2, 2], vec![1.0, 0.0, 0.0, 1.0]);
        let r = brute_force_norm(&id, step).unwrap();
        assert!((r.value - 1.0).abs() < 1e-4);

        let mut e = vec![0.0; 8];
        e[0] = 3.0;
        let r = brute_force_norm(&grouped(&[2, 2, 2], e), step).unwrap();
        assert!((r.value - 3.0).abs() < r.discretization_error.unwrap() + 1e-9);

        let mut diag = vec![0.0; 8];
        diag[0] = 1.0;
        diag[7] = 1.0;
        let t = grouped(&[2, 2, 2], diag);
        let r = brute_force_norm(&t, step).unwrap();
        assert!((r.value - 1.0).abs() < 1e-6);
        check_witness(&t, &r);
        // Holder: sum x_i y_i z_i <= max|z| * sum |x_i y_i| <= 1
        let cube = grouped(&[3, 3, 3], vec![0.5; 27]);
        assert!(brute_force_norm(&cube, std::f64::consts::PI / 40.0).is_ok());
        assert!(matches!(
            brute_force_norm(&grouped(&[4, 2], vec![1.0; 8]), 0.1),
            Err(Error::Capacity(_))
        ));
        assert!(matches!(
            brute_force_norm(&cube, 1e-3),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn brute_force_three_dimensional_blocks() {
        // all-0.5 3x3x3 tensor is rank one: 0.5 * (sqrt 3)^3
        let cube = grouped(&[3, 3, 3], vec![0.5; 27]);
        let r = brute_force_norm(&cube, std::f64::consts::PI / 60.0).unwrap();
        assert!((r.value - 0.5 * 27f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn partition_norm_dispatch() {
        let s = CoefTensor::scalar(-4.0, 3);
        assert_eq!(
            partition_norm(&s, &Partition::empty(0), &cfg())
                .unwrap()
                .value,
            4.0
        );

        let perm = CoefTensor::<f64>::new(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let op = partition_norm(&perm, &Partition::parse("1|2", 2).unwrap(), &cfg()).unwrap();
        assert!((op.value - 1.0).abs() < 1e-12);
        assert_eq!(op.method, NormMethod::Spectral);
        let hs = partition_norm(&perm, &Partition::parse("1,2", 2).unwrap(), &cfg()).unwrap();
        assert!((hs.value - 2f64.sqrt()).abs() < 1e-15);
        assert!(partition_norm(&perm, &Partition::empty(0), &cfg()).is_err());
    }

    #[test]
    fn rank_one_single_entry_all_partitions() {
        let mut e = vec![0.0f64; 27];
        e[13] = 2.0;
        let t = CoefTensor::new(3, 3, e).unwrap();
        for j in enumerate_partitions(&ModeSubset::full(3)).unwrap() {
            let r = partition_norm(&t, &j, &cfg()).unwrap();
            assert!((r.value - 2.0).abs() < 1e-12, "{j}: {}", r.value);
        }
    }

    #[test]
    fn scaling_is_exact_for_exact_methods() {
        let t = CoefTensor::from_fn(2, 3, |i| (i[0] as f64 + 1.0) * (i[1] as f64 - 0.7)).unwrap();
        for j in enumerate_partitions(&ModeSubset::full(2)).unwrap() {
            let a = partition_norm(&t, &j, &cfg()).unwrap().value;
            let b = partition_norm(&t.scaled(-2.5), &j, &cfg()).unwrap().value;
            assert!((b - 2.5 * a).abs() < 1e-12 * b);
        }
    }

    #[test]
    fn single_precision_norms() {
        let t = CoefTensor::new(2, 2, vec![1.0f32, 2.0, 3.0, 4.0]).unwrap();
        let c = NormConfig {
            spectral_tol: 1e-6,
            ..cfg()
        };
        let r = partition_norm(&t, &Partition::parse("1|2", 2).unwrap(), &c).unwrap();
        assert!((r.value - 5.464_986).abs() < 1e-4);
    }
}
