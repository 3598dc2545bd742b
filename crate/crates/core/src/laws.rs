//! Symmetric laws with log-convex tails (exponential, Weibull with shape
//! `r <= 1`) and the standard Gaussian: exact moment norms, survival
//! functions, inverse-CDF samplers.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::rng::UniformSource;
use crate::special::{erfc, ln_gamma};
use crate::{Error, Result, Scalar};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LawKind {
    SymExponential,
    /// `P(|X| >= t) = exp(-t^r)` with `0 < r <= 1`.
    SymWeibull {
        r: f64,
    },
    StdGaussian,
}

/// A symmetric law, multiplied by `scale`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Law {
    kind: LawKind,
    scale: f64,
}

impl Law {
    pub fn new(kind: LawKind, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Domain(format!(
                "law scale must be positive, got {scale}"
            )));
        }
        if let LawKind::SymWeibull { r } = kind {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::Domain(format!(
                    "Weibull shape r must lie in (0, 1], got {r}"
                )));
            }
        }
        Ok(Self { kind, scale })
    }

    pub fn exponential() -> Self {
        Self {
            kind: LawKind::SymExponential,
            scale: 1.0,
        }
    }

    pub fn weibull(r: f64) -> Result<Self> {
        Self::new(LawKind::SymWeibull { r }, 1.0)
    }

    pub fn gaussian() -> Self {
        Self {
            kind: LawKind::StdGaussian,
            scale: 1.0,
        }
    }

    pub fn with_scale(self, scale: f64) -> Result<Self> {
        Self::new(self.kind, scale)
    }

    pub fn kind(&self) -> LawKind {
        self.kind
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Weibull shape, 1 for the exponential law, `None` for the Gaussian.
    pub fn shape(&self) -> Option<f64> {
        match self.kind {
            LawKind::SymExponential => Some(1.0),
            LawKind::SymWeibull { r } => Some(r),
            LawKind::StdGaussian => None,
        }
    }

    /// `(E|X|^p)^{1/p}` for `p >= 1`.
    pub fn pnorm<T: Scalar>(&self, p: T) -> Result<T> {
        if !(p >= T::one()) {
            return Err(Error::Domain(format!(
                "moment order p must be >= 1, got {p}"
            )));
        }
        let one = T::one();
        let log_moment = match self.kind {
            LawKind::SymExponential => ln_gamma(p + one),
            LawKind::SymWeibull { r } => ln_gamma(p / T::of(r) + one),
            LawKind::StdGaussian => {
                let half = T::of(0.5);
                half * p * T::of(std::f64::consts::LN_2) + ln_gamma((p + one) * half)
                    - half * T::of(std::f64::consts::PI.ln())
            }
        };
        Ok(T::of(self.scale) * (log_moment / p).exp())
    }

    pub fn variance(&self) -> f64 {
        let base = match self.kind {
            LawKind::SymExponential => 2.0,
            LawKind::SymWeibull { r } => ln_gamma(2.0 / r + 1.0).exp(),
            LawKind::StdGaussian => 1.0,
        };
        base * self.scale * self.scale
    }

    /// Same family, rescaled to unit variance.
    pub fn normalized(&self) -> Self {
        Self {
            kind: self.kind,
            scale: self.scale / self.variance().sqrt(),
        }
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.variance() - 1.0).abs() <= tol
    }

    /// `P(|X| >= t)`.
    pub fn tail<T: Scalar>(&self, t: T) -> T {
        if t <= T::zero() {
            return T::one();
        }
        let x = t / T::of(self.scale);
        match self.kind {
            LawKind::SymExponential => (-x).exp(),
            LawKind::SymWeibull { r } => (-x.powf(T::of(r))).exp(),
            LawKind::StdGaussian => erfc(x / T::of(std::f64::consts::SQRT_2)),
        }
    }

    /// Deterministic inverse-CDF map for the log-convex families: magnitude
    /// `(-ln u)^{1/r}` with the given sign, times scale. The Gaussian needs two
    /// uniforms and is only reachable through [`Law::sample`].
    pub fn from_uniform(&self, u: f64, negative: bool) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain(format!("uniform variate {u} outside (0, 1)")));
        }
        let magnitude = match self.kind {
            LawKind::SymExponential => -u.ln(),
            LawKind::SymWeibull { r } => (-u.ln()).powf(1.0 / r),
            LawKind::StdGaussian => {
                return Err(Error::Unsupported(
                    "the Gaussian sampler draws two uniforms".into(),
                ))
            }
        };
        let x = self.scale * magnitude;
        Ok(if negative { -x } else { x })
    }

    pub fn sample<U: UniformSource + ?Sized>(&self, src: &mut U) -> f64 {
        match self.kind {
            LawKind::StdGaussian => {
                let u1 = src.open01();
                let u2 = src.open01();
                self.scale * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
            }
            _ => {
                let negative = src.coin();
                let u = src.open01();
                self.from_uniform(u, negative)
                    .expect("open01 stays inside (0, 1)")
            }
        }
    }

    pub fn descriptor(&self) -> LawDescriptor {
        let (kind, r) = match self.kind {
            LawKind::SymExponential => (LawFamily::Exponential, None),
            LawKind::SymWeibull { r } => (LawFamily::Weibull, Some(r)),
            LawKind::StdGaussian => (LawFamily::Gaussian, None),
        };
        LawDescriptor {
            kind,
            r,
            scale: self.scale,
            normalize: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LawFamily {
    Exponential,
    Weibull,
    Gaussian,
}

fn default_scale() -> f64 {
    1.0
}

/// On-disk law description:
/// `{"kind": "weibull", "r": 0.5, "scale": 1.0, "normalize": true}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawDescriptor {
    pub kind: LawFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default)]
    pub normalize: bool,
}

impl LawDescriptor {
    pub fn resolve(&self) -> Result<Law> {
        let kind = match (self.kind, self.r) {
            (LawFamily::Exponential, None) => LawKind::SymExponential,
            (LawFamily::Gaussian, None) => LawKind::StdGaussian,
            (LawFamily::Weibull, Some(r)) => LawKind::SymWeibull { r },
            (LawFamily::Weibull, None) => {
                return Err(Error::Input(
                    "weibull law needs the shape field \"r\"".into(),
                ))
            }
            (_, Some(_)) => {
                return Err(Error::Input(
                    "field \"r\" only applies to the weibull law".into(),
                ))
            }
        };
        let law = Law::new(kind, self.scale)?;
        Ok(if self.normalize {
            law.normalized()
        } else {
            law
        })
    }
}

impl Serialize for Law {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.descriptor().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Law {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        LawDescriptor::deserialize(d)?
            .resolve()
            .map_err(D::Error::custom)
    }
}

/// One law per variable `X_i^j`, mode `j` by index `i`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LawGrid {
    order: usize,
    dim: usize,
    laws: Vec<Law>,
}

impl LawGrid {
    pub fn broadcast(law: Law, order: usize, dim: usize) -> Self {
        Self {
            order,
            dim,
            laws: vec![law; order * dim],
        }
    }

    /// `columns[j][i]` is the law of `X_i^j`.
    pub fn from_columns(columns: Vec<Vec<Law>>) -> Result<Self> {
        let order = columns.len();
        let dim = columns.first().map_or(0, Vec::len);
        if order == 0 || dim == 0 || columns.iter().any(|c| c.len() != dim) {
            return Err(Error::Dimension(
                "law grid must be a nonempty d x n array".into(),
            ));
        }
        Ok(Self {
            order,
            dim,
            laws: columns.into_iter().flatten().collect(),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, mode: usize, index: usize) -> &Law {
        &self.laws[mode * self.dim + index]
    }

    pub fn column(&self, mode: usize) -> &[Law] {
        &self.laws[mode * self.dim..(mode + 1) * self.dim]
    }

    pub fn laws(&self) -> &[Law] {
        &self.laws
    }

    pub fn check_shape(&self, order: usize, dim: usize) -> Result<()> {
        if self.order != order || self.dim != dim {
            return Err(Error::Dimension(format!(
                "law grid is {}x{}, tensor needs {order}x{dim}",
                self.order, self.dim
            )));
        }
        Ok(())
    }

    /// The single law of each mode, if every mode is homogeneous.
    pub fn mode_laws(&self) -> Option<Vec<Law>> {
        (0..self.order)
            .map(|j| {
                let col = self.column(j);
                col.iter().all(|l| l == &col[0]).then_some(col[0])
            })
            .collect()
    }

    /// `psi[j][i] = ||X_i^j||_p`.
    pub fn pnorms<T: Scalar>(&self, p: T) -> Result<Vec<Vec<T>>> {
        (0..self.order)
            .map(|j| self.column(j).iter().map(|l| l.pnorm(p)).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed(Vec<f64>, bool);

    impl UniformSource for Fixed {
        fn open01(&mut self) -> f64 {
            self.0.remove(0)
        }
        fn coin(&mut self) -> bool {
            self.1
        }
    }

    const P_GRID: [f64; 12] = [
        1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 24.0, 32.0, 64.0,
    ];

    fn families() -> Vec<Law> {
        vec![
            Law::exponential(),
            Law::weibull(1.0).unwrap(),
            Law::weibull(0.5).unwrap(),
            Law::weibull(0.3).unwrap(),
            Law::gaussian(),
        ]
    }

    #[test]
    fn pnorm_examples() {
        let e2: f64 = Law::exponential().pnorm(2.0).unwrap();
        assert!((e2 - 2f64.sqrt()).abs() < 1e-13);
        let g2: f64 = Law::gaussian().pnorm(2.0).unwrap();
        assert!((g2 - 1.0).abs() < 1e-13);
        let w: f64 = Law::weibull(0.5).unwrap().pnorm(2.0).unwrap();
        assert!((w - 24f64.sqrt()).abs() < 1e-12);
        let g4: f64 = Law::gaussian().pnorm(4.0).unwrap();
        assert!((g4 - 3f64.powf(0.25)).abs() < 1e-13);
        assert!(matches!(
            Law::gaussian().pnorm(0.5f64),
            Err(Error::Domain(_))
        ));
    }

    /// Weibull(1/2) second moment by composite Simpson quadrature of
    /// `2 t (1 - F(t))` over the survival function, independent of ln_gamma.
    #[test]
    fn weibull_second_moment_by_quadrature() {
        let law = Law::weibull(0.5).unwrap();
        let (a, b, steps) = (0.0f64, 2500.0f64, 400_000usize);
        let h = (b - a) / steps as f64;
        let f = |t: f64| 2.0 * t * law.tail(t);
        let mut s = f(a) + f(b);
        for k in 1..steps {
            s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        let m2 = s * h / 3.0;
        assert!((m2 - 24.0).abs() < 1e-6, "{m2}");
    }

    #[test]
    fn variances_and_normalization() {
        assert!((Law::exponential().variance() - 2.0).abs() < 1e-14);
        assert_eq!(Law::gaussian().variance(), 1.0);
        let w1 = Law::weibull(1.0)
            .unwrap()
            .with_scale(0.5f64.sqrt())
            .unwrap();
        assert!((w1.variance() - 1.0).abs() < 1e-14);

        assert!((Law::exponential().normalized().scale() - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(Law::gaussian().normalized(), Law::gaussian());
        let w = Law::weibull(0.5).unwrap().normalized();
        assert!((w.scale() - 1.0 / 24f64.sqrt()).abs() < 1e-14);
        for law in families() {
            assert!(law.normalized().is_normalized(1e-12));
        }
    }

    #[test]
    fn inverse_cdf_examples() {
        let e1 = (-1.0f64).exp();
        assert!((Law::weibull(1.0).unwrap().from_uniform(e1, false).unwrap() - 1.0).abs() < 1e-15);
        assert!((Law::weibull(0.5).unwrap().from_uniform(e1, true).unwrap() + 1.0).abs() < 1e-15);
        assert!(Law::exponential().from_uniform(0.0, false).is_err());
        assert!(Law::exponential().from_uniform(1.0, false).is_err());
        let x = Law::weibull(0.5)
            .unwrap()
            .sample(&mut Fixed(vec![e1], true));
        assert!((x + 1.0).abs() < 1e-15);
    }

    #[test]
    fn tails() {
        let w = Law::weibull(0.5).unwrap();
        assert!((w.tail(4.0f64) - (-2.0f64).exp()).abs() < 1e-15);
        for law in families() {
            assert_eq!(law.tail(0.0f64), 1.0);
        }
        assert!((Law::exponential().tail(2f64.ln()) - 0.5).abs() < 1e-15);
        let g: f64 = Law::gaussian().tail(1.959_963_984_540_054);
        assert!((g - 0.05).abs() < 1e-12);
    }

    #[test]
    fn pnorm_is_nondecreasing() {
        for law in families() {
            let vals: Vec<f64> = P_GRID.iter().map(|&p| law.pnorm(p).unwrap()).collect();
            assert!(
                vals.windows(2).all(|w| w[0] <= w[1] * (1.0 + 1e-14)),
                "{law:?}"
            );
        }
    }

    /// `ln P(|X| >= t)` is convex for the heavy-tailed families.
    #[test]
    fn tails_are_log_convex() {
        for law in families().into_iter().filter(|l| l.shape().is_some()) {
            for k in 1..200 {
                let (a, b) = (0.05 * k as f64, 0.05 * (k + 2) as f64);
                let mid = 0.5 * (a + b);
                let lhs = law.tail(mid).ln();
                let rhs = 0.5 * (law.tail(a).ln() + law.tail(b).ln());
                assert!(lhs <= rhs + 1e-12, "{law:?} at {mid}");
            }
        }
    }

    /// Moment growth at most exponential: `||X||_p <= alpha e^{beta p}`
    /// with `alpha = r^{-1/r}`, `beta = 1/r`.
    #[test]
    fn exponential_moment_growth() {
        for &r in &[1.0, 0.75, 0.5, 0.25, 0.1] {
            let law = Law::weibull(r).unwrap();
            let alpha = r.powf(-1.0 / r);
            for &p in P_GRID.iter().filter(|&&p| p >= 2.0) {
                let psi: f64 = law.pnorm(p).unwrap();
                assert!(psi <= alpha * (p / r).exp(), "r={r} p={p}");
                assert!(
                    psi <= alpha * p.powf(1.0 / r) * (1.0 + 1e-12),
                    "r={r} p={p}"
                );
            }
        }
    }

    #[test]
    fn sampler_matches_moments() {
        use crate::rng::stream;
        let n = 1_000_000;
        for law in [
            Law::exponential(),
            Law::weibull(0.5).unwrap(),
            Law::gaussian(),
        ] {
            let mut rng = stream(11, 0, 0);
            let xs: Vec<f64> = (0..n).map(|_| law.sample(&mut rng)).collect();
            if law == Law::exponential() {
                let mean_abs = xs.iter().map(|x| x.abs()).sum::<f64>() / n as f64;
                assert!((mean_abs - 1.0).abs() < 0.005, "{mean_abs}");
            }
            for &p in &[1.0f64, 2.0, 3.0] {
                let pw: Vec<f64> = xs.iter().map(|x| x.abs().powf(p)).collect();
                let mean = pw.iter().sum::<f64>() / n as f64;
                let var = pw.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
                let se = (var / n as f64).sqrt();
                let exact = law.pnorm(p).unwrap().powf(p);
                assert!(
                    (mean - exact).abs() < 3.0 * se,
                    "{law:?} p={p}: {mean} vs {exact} (se {se})"
                );
            }
        }
    }

    #[test]
    fn descriptor_round_trip() {
        let law: Law =
            serde_json::from_str(r#"{"kind":"weibull","r":0.5,"normalize":true}"#).unwrap();
        assert!(law.is_normalized(1e-12));
        let back: Law = serde_json::from_str(&serde_json::to_string(&law).unwrap()).unwrap();
        assert_eq!(back, law);
        assert!(serde_json::from_str::<Law>(r#"{"kind":"weibull"}"#).is_err());
        assert!(serde_json::from_str::<Law>(r#"{"kind":"gaussian","r":1}"#).is_err());
        assert!(serde_json::from_str::<Law>(r#"{"kind":"weibull","r":2}"#).is_err());
    }

    #[test]
    fn grid_shape_and_homogeneity() {
        let g = LawGrid::broadcast(Law::gaussian(), 2, 3);
        assert_eq!(g.mode_laws().unwrap(), vec![Law::gaussian(); 2]);
        let mixed = LawGrid::from_columns(vec![
            vec![Law::gaussian(), Law::exponential()],
            vec![Law::gaussian(); 2],
        ])
        .unwrap();
        assert!(mixed.mode_laws().is_none());
        assert!(mixed.check_shape(2, 3).is_err());
    }
}
