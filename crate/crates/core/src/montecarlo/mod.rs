//! Monte Carlo sampling of decoupled and undecoupled chaoses, empirical
//! moments and tails, and the verification experiments built on them.
//!
//! Sample `m` is computed from its own random stream keyed by `(seed, m)`, and
//! every reduction runs over the samples in index order, so results do not
//! depend on the size of the rayon pool.

mod empirical;
mod experiments;

pub use empirical::{
    empirical_pnorm, empirical_tail, PnormEstimate, SortedMagnitudes, TailPoint, MAX_SHARE_LIMIT,
};
pub use experiments::{
    decoupling_experiment, sandwich_experiment, tail_experiment, CprimeChoice, DecouplingCell,
    DecouplingReport, RunHeader, Sampling, SandwichCell, SandwichReport, TailReport, TailRow,
    Thresholds, MIN_EXCEEDANCES,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::rng::{label, stream, stream_from_key, stream_key};
use crate::{CoefTensor, Error, Law, LawGrid, Result};

fn default_batch() -> usize {
    4096
}

/// Sample count, seed and batch size. Batches bound the scratch memory per
/// task; they have no effect on the values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    pub n_samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
}

impl SampleConfig {
    pub fn new(n_samples: usize, seed: u64) -> Self {
        Self {
            n_samples,
            seed,
            batch_size: default_batch(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::Input("n_samples must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Input("batch_size must be at least 1".into()));
        }
        Ok(())
    }

    pub fn batches(&self) -> usize {
        self.n_samples.div_ceil(self.batch_size)
    }
}

/// Contract `buf` (length `n^k`, row-major) against one vector per mode,
/// last mode first. `scratch` must hold `n^{k-1}` values.
fn contract_all(buf: &[f64], vectors: &[&[f64]], n: usize, scratch: &mut Vec<f64>) -> f64 {
    let k = vectors.len();
    if k == 0 {
        return buf[0];
    }
    let mut len = buf.len() / n;
    scratch.clear();
    scratch.extend(buf.chunks_exact(n).map(|row| dot(row, vectors[k - 1])));
    for mode in (0..k - 1).rev() {
        len /= n;
        for i in 0..len {
            let v = dot(&scratch[i * n..(i + 1) * n], vectors[mode]);
            scratch[i] = v;
        }
        scratch.truncate(len);
    }
    scratch[0]
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn generate(
    cfg: &SampleConfig,
    stream_label: u64,
    draw: impl Fn(&mut rand_chacha::ChaCha8Rng, &mut Vec<f64>) -> f64 + Sync,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let key = stream_key(cfg.seed, stream_label);
    let mut out = vec![0.0; cfg.n_samples];
    out.par_chunks_mut(cfg.batch_size)
        .enumerate()
        .for_each(|(b, chunk)| {
            let mut scratch = Vec::new();
            let start = b * cfg.batch_size;
            for (k, slot) in chunk.iter_mut().enumerate() {
                let mut rng = stream_from_key(&key, (start + k) as u64);
                *slot = draw(&mut rng, &mut scratch);
            }
        });
    Ok(out)
}

/// Samples of `sum_i a_i X^1_{i_1} ... X^d_{i_d}` with `d` independent
/// sequences. Sample `m` draws `X^1_1, ..., X^1_n, X^2_1, ...` in that order
/// from stream `m`.
pub fn sample_decoupled(
    t: &CoefTensor<f64>,
    laws: &LawGrid,
    cfg: &SampleConfig,
) -> Result<Vec<f64>> {
    sample_decoupled_with(t, laws, cfg, label::DECOUPLED)
}

pub(crate) fn sample_decoupled_with(
    t: &CoefTensor<f64>,
    laws: &LawGrid,
    cfg: &SampleConfig,
    stream_label: u64,
) -> Result<Vec<f64>> {
    laws.check_shape(t.order(), t.dim())?;
    let (d, n) = (t.order(), t.dim());
    let entries = t.entries();
    let columns: Vec<&[Law]> = (0..d).map(|j| laws.column(j)).collect();
    generate(cfg, stream_label, |rng, scratch| {
        let xs: Vec<Vec<f64>> = columns
            .iter()
            .map(|col| col.iter().map(|law| law.sample(rng)).collect())
            .collect();
        let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        contract_all(entries, &refs, n, scratch)
    })
}

/// Samples of `sum_i a_i X_{i_1} ... X_{i_d}` with one sequence. The tensor
/// must be symmetric with a vanishing generalized diagonal, and every mode of
/// `laws` must carry the same column.
pub fn sample_undecoupled(
    t: &CoefTensor<f64>,
    laws: &LawGrid,
    cfg: &SampleConfig,
) -> Result<Vec<f64>> {
    laws.check_shape(t.order(), t.dim())?;
    if let Some(v) = t.hypothesis_violation(1e-12 * t.max_abs()) {
        return Err(Error::Hypothesis(v));
    }
    let column = laws.column(0);
    if (1..laws.order()).any(|j| laws.column(j) != column) {
        return Err(Error::Unsupported(
            "undecoupled sampling uses a single sequence; all modes need the same laws".into(),
        ));
    }
    let (d, n) = (t.order(), t.dim());
    let entries = t.entries();
    generate(cfg, label::UNDECOUPLED, |rng, scratch| {
        let x: Vec<f64> = column.iter().map(|law| law.sample(rng)).collect();
        let refs = vec![x.as_slice(); d];
        contract_all(entries, &refs, n, scratch)
    })
}

/// Tensor with independent standard Gaussian entries drawn from the tensor
/// stream of `seed`.
pub fn gaussian_tensor(order: usize, dim: usize, seed: u64) -> Result<CoefTensor<f64>> {
    let mut rng = stream(seed, label::TENSOR, 0);
    let g = Law::gaussian();
    CoefTensor::from_fn(order, dim, |_| g.sample(&mut rng))
}

/// Hex SHA-256 of `d`, `n` and the entries as little-endian bytes.
pub fn tensor_hash(t: &CoefTensor<f64>) -> String {
    let mut h = Sha256::new();
    h.update((t.order() as u64).to_le_bytes());
    h.update((t.dim() as u64).to_le_bytes());
    for x in t.entries() {
        h.update(x.to_le_bytes());
    }
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(t: &CoefTensor<f64>, xs: &[Vec<f64>]) -> f64 {
        (0..t.len())
            .map(|k| {
                let idx = t.unravel(k);
                idx.iter()
                    .enumerate()
                    .fold(t.entries()[k], |acc, (j, &i)| acc * xs[j][i])
            })
            .sum()
    }

    #[test]
    fn contraction_matches_tuple_sum() {
        let t = gaussian_tensor(3, 4, 5).unwrap();
        let xs: Vec<Vec<f64>> = (0..3)
            .map(|j| {
                (0..4)
                    .map(|i| (i as f64 + 1.0) * (j as f64 - 1.3))
                    .collect()
            })
            .collect();
        let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let got = contract_all(t.entries(), &refs, 4, &mut Vec::new());
        assert!((got - naive(&t, &xs)).abs() < 1e-12);
    }

    #[test]
    fn zero_tensor_samples_vanish() {
        let z = CoefTensor::<f64>::zeros(2, 3).unwrap();
        let laws = LawGrid::broadcast(Law::exponential(), 2, 3);
        let cfg = SampleConfig::new(100, 0);
        assert!(sample_decoupled(&z, &laws, &cfg)
            .unwrap()
            .iter()
            .all(|&x| x == 0.0));
        assert!(sample_undecoupled(&z, &laws, &cfg)
            .unwrap()
            .iter()
            .all(|&x| x == 0.0));
    }

    /// Order one, a = e_1: sample m is the first draw of stream m.
    #[test]
    fn order_one_reproduces_the_law() {
        let e1 = CoefTensor::new(1, 3, vec![1.0, 0.0, 0.0]).unwrap();
        let law = Law::weibull(0.5).unwrap();
        let laws = LawGrid::broadcast(law, 1, 3);
        let cfg = SampleConfig::new(50, 9);
        let s = sample_decoupled(&e1, &laws, &cfg).unwrap();
        for (m, v) in s.iter().enumerate() {
            let mut rng = stream(9, label::DECOUPLED, m as u64);
            assert_eq!(*v, law.sample(&mut rng));
        }
    }

    #[test]
    fn off_diagonal_entry_has_unit_second_moment() {
        let t = CoefTensor::new(2, 2, vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        let laws = LawGrid::broadcast(Law::exponential().normalized(), 2, 2);
        let s = sample_decoupled(&t, &laws, &SampleConfig::new(400_000, 1)).unwrap();
        let m2: f64 = s.iter().map(|x| x * x).sum::<f64>() / s.len() as f64;
        let m4: f64 = s.iter().map(|x| x.powi(4)).sum::<f64>() / s.len() as f64;
        let se = ((m4 - m2 * m2) / s.len() as f64).sqrt();
        assert!((m2 - 1.0).abs() < 4.0 * se, "{m2} +- {se}");
    }

    #[test]
    fn undecoupled_permutation_matrix_is_twice_the_product() {
        let t = CoefTensor::new(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let law = Law::gaussian();
        let laws = LawGrid::broadcast(law, 2, 2);
        let s = sample_undecoupled(&t, &laws, &SampleConfig::new(20, 3)).unwrap();
        for (m, v) in s.iter().enumerate() {
            let mut rng = stream(3, label::UNDECOUPLED, m as u64);
            let x1 = law.sample(&mut rng);
            let x2 = law.sample(&mut rng);
            assert!((v - 2.0 * x1 * x2).abs() < 1e-15);
        }
    }

    /// E S^2 = 2 sum_{i != j} a_ij^2 for symmetric zero-diagonal a.
    #[test]
    fn undecoupled_second_moment() {
        let t = gaussian_tensor(2, 5, 2)
            .unwrap()
            .symmetrize()
            .zero_generalized_diagonal();
        let exact: f64 = 2.0 * t.entries().iter().map(|a| a * a).sum::<f64>();
        let laws = LawGrid::broadcast(Law::gaussian(), 2, 5);
        let s = sample_undecoupled(&t, &laws, &SampleConfig::new(400_000, 4)).unwrap();
        let m2: f64 = s.iter().map(|x| x * x).sum::<f64>() / s.len() as f64;
        let m4: f64 = s.iter().map(|x| x.powi(4)).sum::<f64>() / s.len() as f64;
        let se = ((m4 - m2 * m2) / s.len() as f64).sqrt();
        assert!((m2 - exact).abs() < 4.0 * se, "{m2} vs {exact} +- {se}");
    }

    #[test]
    fn undecoupled_rejects_bad_tensors() {
        let laws = LawGrid::broadcast(Law::gaussian(), 2, 2);
        let cfg = SampleConfig::new(10, 0);
        let asym = CoefTensor::new(2, 2, vec![0.0, 1.0, 0.5, 0.0]).unwrap();
        assert!(matches!(
            sample_undecoupled(&asym, &laws, &cfg),
            Err(Error::Hypothesis(_))
        ));
        let diag = CoefTensor::new(2, 2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            sample_undecoupled(&diag, &laws, &cfg),
            Err(Error::Hypothesis(_))
        ));
        let perm = CoefTensor::new(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let mixed =
            LawGrid::from_columns(vec![vec![Law::gaussian(); 2], vec![Law::exponential(); 2]])
                .unwrap();
        assert!(matches!(
            sample_undecoupled(&perm, &mixed, &cfg),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn thread_count_does_not_change_samples() {
        let t = gaussian_tensor(3, 3, 0).unwrap();
        let laws = LawGrid::broadcast(Law::exponential(), 3, 3);
        let cfg = SampleConfig {
            n_samples: 5000,
            seed: 11,
            batch_size: 64,
        };
        let run = |k| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .unwrap()
                .install(|| sample_decoupled(&t, &laws, &cfg).unwrap())
        };
        let one = run(1);
        assert_eq!(one, run(7));
        let other_batches = sample_decoupled(
            &t,
            &laws,
            &SampleConfig {
                batch_size: 999,
                ..cfg
            },
        )
        .unwrap();
        assert_eq!(one, other_batches);
    }

    #[test]
    fn config_checks_and_hash() {
        assert!(SampleConfig::new(0, 0).validate().is_err());
        assert_eq!(
            SampleConfig {
                n_samples: 10,
                seed: 0,
                batch_size: 3
            }
            .batches(),
            4
        );
        let a = gaussian_tensor(2, 3, 0).unwrap();
        assert_eq!(a, gaussian_tensor(2, 3, 0).unwrap());
        assert_ne!(
            tensor_hash(&a),
            tensor_hash(&gaussian_tensor(2, 3, 1).unwrap())
        );
        assert_eq!(tensor_hash(&a).len(), 64);
    }
}
