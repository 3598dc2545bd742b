//! Log-gamma and complementary error function.

use crate::Scalar;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of `|Γ(x)|` via the Lanczos approximation (g = 7, 9 terms),
/// with reflection below 1/2. Returns +inf at the poles.
pub fn ln_gamma<T: Scalar>(x: T) -> T {
    let half = T::of(0.5);
    let pi = T::of(std::f64::consts::PI);
    if x < half {
        let s = (pi * x).sin().abs();
        if s.is_zero() {
            return T::infinity();
        }
        return (pi / s).ln() - ln_gamma(T::one() - x);
    }
    let x = x - T::one();
    let mut acc = T::of(LANCZOS_COEF[0]);
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc = acc + T::of(c) / (x + T::of_usize(i));
    }
    let t = x + T::of(LANCZOS_G) + half;
    T::of(0.5 * (2.0 * std::f64::consts::PI).ln()) + (x + half) * t.ln() - t + acc.ln()
}

pub fn gamma<T: Scalar>(x: T) -> T {
    ln_gamma(x).exp()
}

/// Complementary error function, evaluated in `f64`.
pub fn erfc<T: Scalar>(x: T) -> T {
    T::of(libm::erfc(x.as_f64()))
}
