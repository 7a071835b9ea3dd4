//! Fixed-point phases (fractions of a full turn) and compensated complex
//! accumulation.
//!
//! A [`Phase`] stores `t mod 1` as a 64-bit fraction `frac / 2^64`. Addition
//! and multiplication by integers wrap mod `2^64`, which is exactly reduction
//! mod 1, so polynomial phases `x_1 n + ... + x_d n^d` are evaluated without
//! any rounding error once the coefficients are quantized.

use std::f64::consts::TAU;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

const TWO_POW_64: f64 = 18_446_744_073_709_551_616.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Phase(pub u64);

impl Phase {
    pub const ZERO: Phase = Phase(0);
    pub const HALF: Phase = Phase(1 << 63);
    pub const QUARTER: Phase = Phase(1 << 62);

    #[inline]
    pub const fn from_frac(frac: u64) -> Self {
        Phase(frac)
    }

    #[inline]
    pub const fn frac(self) -> u64 {
        self.0
    }

    /// The phase as a real number in `[0, 1)`.
    #[inline]
    pub fn to_f64(self) -> f64 {
        self.0 as f64 / TWO_POW_64
    }

    /// Nearest phase to `t mod 1`. Only used for data that is genuinely
    /// real-valued (offsets, random draws); rationals go through
    /// [`phase_from_rational`].
    pub fn from_f64(t: f64) -> Self {
        let r = t - t.floor();
        let scaled = (r * TWO_POW_64).round();
        if scaled >= TWO_POW_64 {
            Phase(0)
        } else {
            Phase(scaled as u64)
        }
    }

    /// Signed distance to zero on the circle, as a fraction of a turn in
    /// `[-1/2, 1/2)`.
    #[inline]
    pub fn signed(self) -> i64 {
        self.0 as i64
    }

    #[inline]
    pub fn wrapping_mul_int(self, n: u64) -> Self {
        Phase(self.0.wrapping_mul(n))
    }
}

impl Add for Phase {
    type Output = Phase;
    #[inline]
    fn add(self, rhs: Phase) -> Phase {
        Phase(self.0.wrapping_add(rhs.0))
    }
}

impl AddAssign for Phase {
    #[inline]
    fn add_assign(&mut self, rhs: Phase) {
        self.0 = self.0.wrapping_add(rhs.0);
    }
}

impl Sub for Phase {
    type Output = Phase;
    #[inline]
    fn sub(self, rhs: Phase) -> Phase {
        Phase(self.0.wrapping_sub(rhs.0))
    }
}

impl Neg for Phase {
    type Output = Phase;
    #[inline]
    fn neg(self) -> Phase {
        Phase(self.0.wrapping_neg())
    }
}

impl Mul<u64> for Phase {
    type Output = Phase;
    #[inline]
    fn mul(self, n: u64) -> Phase {
        self.wrapping_mul_int(n)
    }
}

/// Nearest representable phase to `(a mod q) / q`; the error is at most
/// `2^-65` of a turn.
pub fn phase_from_rational(a: i128, q: u64) -> Result<Phase> {
    if q == 0 {
        return Err(Error::InvalidDenominator);
    }
    let r = a.rem_euclid(q as i128) as u128;
    Ok(phase_of_residue(r as u64, q))
}

/// Same as [`phase_from_rational`] for a residue already reduced into `[0, q)`.
#[inline]
pub fn phase_of_residue(r: u64, q: u64) -> Phase {
    debug_assert!(q > 0 && r < q);
    let q = q as u128;
    let num = ((r as u128) << 64) + q / 2;
    Phase((num / q) as u64)
}

/// `x_1 n + x_2 n^2 + ... + x_d n^d mod 1`, exact for the quantized inputs.
#[inline]
pub fn poly_phase(x: &[Phase], n: u64) -> Phase {
    // Horner in the ring Z / 2^64.
    let mut acc = 0u64;
    for c in x.iter().rev() {
        acc = acc.wrapping_add(c.0).wrapping_mul(n);
    }
    Phase(acc)
}

/// `sum_j x_j n^{m_j} mod 1` for an arbitrary exponent vector.
#[inline]
pub fn sparse_poly_phase(x: &[Phase], exponents: &[u32], n: u64) -> Phase {
    debug_assert_eq!(x.len(), exponents.len());
    let mut acc = 0u64;
    for (c, &m) in x.iter().zip(exponents) {
        acc = acc.wrapping_add(c.0.wrapping_mul(n.wrapping_pow(m)));
    }
    Phase(acc)
}

/// `e(t) = exp(2 pi i t)`.
///
/// The top two bits select the quadrant, so multiples of a quarter turn map
/// to exactly `1, i, -1, -i`.
#[inline]
pub fn e_eval(t: Phase) -> Complex64 {
    let quadrant = t.0 >> 62;
    let rest = t.0 & ((1u64 << 62) - 1);
    let (s, c) = (rest as f64 / TWO_POW_64 * TAU).sin_cos();
    match quadrant {
        0 => Complex64::new(c, s),
        1 => Complex64::new(-s, c),
        2 => Complex64::new(-c, -s),
        _ => Complex64::new(s, -c),
    }
}

/// Neumaier-compensated sum of complex terms.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ComplexAcc {
    re: f64,
    re_comp: f64,
    im: f64,
    im_comp: f64,
}

#[inline]
fn neumaier(sum: &mut f64, comp: &mut f64, x: f64) {
    let t = *sum + x;
    if sum.abs() >= x.abs() {
        *comp += (*sum - t) + x;
    } else {
        *comp += (x - t) + *sum;
    }
    *sum = t;
}

impl ComplexAcc {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, z: Complex64) {
        neumaier(&mut self.re, &mut self.re_comp, z.re);
        neumaier(&mut self.im, &mut self.im_comp, z.im);
    }

    #[inline]
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re + self.re_comp, self.im + self.im_comp)
    }
}

impl Extend<Complex64> for ComplexAcc {
    fn extend<I: IntoIterator<Item = Complex64>>(&mut self, iter: I) {
        for z in iter {
            self.add(z);
        }
    }
}

impl FromIterator<Complex64> for ComplexAcc {
    fn from_iter<I: IntoIterator<Item = Complex64>>(iter: I) -> Self {
        let mut acc = ComplexAcc::new();
        acc.extend(iter);
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rational_dyadic_and_reduction() {
        assert_eq!(phase_from_rational(1, 2).unwrap().frac(), 1 << 63);
        assert_eq!(
            phase_from_rational(5, 4).unwrap(),
            phase_from_rational(1, 4).unwrap()
        );
        assert_eq!(
            phase_from_rational(-3, 4).unwrap(),
            phase_from_rational(1, 4).unwrap()
        );
        assert!(matches!(
            phase_from_rational(1, 0),
            Err(Error::InvalidDenominator)
        ));
    }

    #[test]
    fn one_third_rounds_to_nearest() {
        let t = phase_from_rational(1, 3).unwrap();
        // |frac/2^64 - 1/3| <= 2^-65  <=>  |3 frac - 2^64| <= 3/2
        let err = (3 * t.frac() as i128) - (1i128 << 64);
        assert!(err.abs() * 2 <= 3, "err = {err}");
    }

    #[test]
    fn poly_phase_examples() {
        let half = Phase::HALF;
        assert_eq!(poly_phase(&[half], 3), half);
        assert_eq!(poly_phase(&[Phase::ZERO, half], 2), Phase::ZERO);
        // exact residue path: 1*2 + 1*4 = 6 = 1 mod 5
        let fifth = phase_from_rational(1, 5).unwrap();
        let r = (2u64 + 4) % 5;
        assert_eq!(phase_of_residue(r, 5), fifth);
    }

    #[test]
    fn e_eval_quadrants_are_exact() {
        assert_eq!(e_eval(Phase::ZERO), Complex64::new(1.0, 0.0));
        assert_eq!(e_eval(Phase::HALF), Complex64::new(-1.0, 0.0));
        assert_eq!(e_eval(Phase::QUARTER), Complex64::new(0.0, 1.0));
        assert_eq!(e_eval(Phase(3 << 62)), Complex64::new(0.0, -1.0));
    }

    #[test]
    fn compensated_sum_of_ones_is_exact() {
        let acc: ComplexAcc = (0..1000).map(|_| Complex64::new(1.0, 0.0)).collect();
        assert_eq!(acc.value(), Complex64::new(1000.0, 0.0));
    }

    #[test]
    fn compensated_sum_beats_naive_on_cancelling_terms() {
        // sum of e(k/7) over 7 * 10^5 terms is exactly 0
        let q = 7u64;
        let mut acc = ComplexAcc::new();
        for k in 0..700_000u64 {
            acc.add(e_eval(phase_of_residue(k % q, q)));
        }
        let v = acc.value();
        assert!(v.norm() < 4.0 * 700_000.0 * f64::EPSILON, "{v}");
    }

    #[test]
    fn additive_character_on_1e5_pairs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100_000 {
            let (a, b) = (Phase(rng.gen()), Phase(rng.gen()));
            let lhs = e_eval(a + b);
            let rhs = e_eval(a) * e_eval(b);
            assert!((lhs.re - rhs.re).abs() <= 1e-10 && (lhs.im - rhs.im).abs() <= 1e-10);
        }
    }

    proptest! {
        #[test]
        fn unit_modulus(frac in any::<u64>()) {
            let z = e_eval(Phase(frac));
            prop_assert!((z.norm() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn wrapping_ops_commute_with_reduction(
            x in proptest::collection::vec(any::<u64>(), 1..5),
            n in 1u64..1_000_000,
            s in any::<u64>(),
        ) {
            let x: Vec<Phase> = x.into_iter().map(Phase).collect();
            // Horner vs explicit powers
            let mut direct = Phase::ZERO;
            let mut pw = n;
            for c in &x {
                direct += *c * pw;
                pw = pw.wrapping_mul(n);
            }
            prop_assert_eq!(poly_phase(&x, n), direct);
            let exps: Vec<u32> = (1..=x.len() as u32).collect();
            prop_assert_eq!(sparse_poly_phase(&x, &exps, n), direct);
            // (s + t) * n == s*n + t*n
            let t = x[0];
            prop_assert_eq!((Phase(s) + t) * n, Phase(s) * n + t * n);
        }

        #[test]
        fn additive_character(a in any::<u64>(), b in any::<u64>()) {
            let lhs = e_eval(Phase(a) + Phase(b));
            let rhs = e_eval(Phase(a)) * e_eval(Phase(b));
            prop_assert!((lhs.re - rhs.re).abs() <= 1e-10);
            prop_assert!((lhs.im - rhs.im).abs() <= 1e-10);
        }

        #[test]
        fn dyadic_rationals_are_exact(a in any::<u64>(), shift in 1u32..64, n in 1u64..10_000) {
            let q = 1u64 << shift;
            let r = a % q;
            let x = phase_of_residue(r, q);
            prop_assert_eq!(x.frac(), r << (64 - shift));
            let lhs = poly_phase(&[x, x], n);
            let res = ((r as u128 * n as u128 + r as u128 * (n as u128 * n as u128)) % q as u128) as u64;
            prop_assert_eq!(lhs, phase_of_residue(res, q));
        }
    }
}
