//! Arithmetic modulo q = 2^64 − 2^32 + 1.
//!
//! q − 1 = 2^32 · 3 · 5 · 17 · 257 · 65537, so the field has power-of-two
//! roots of unity up to order 2^32 and polynomial products can be done with
//! a radix-2 NTT. [`eval_geometric`] evaluates a polynomial at
//! `start · ratio^j` for many `j` with one convolution (chirp-z).

use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

/// The field modulus.
pub const MODULUS: u64 = 0xFFFF_FFFF_0000_0001;
/// A primitive root modulo [`MODULUS`].
pub const GENERATOR: u64 = 7;
const EPSILON: u64 = 0xFFFF_FFFF;
const TWO_ADICITY: u32 = 32;

/// A field element in canonical form `[0, q)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct Fp(u64);

impl Fp {
    pub const ZERO: Fp = Fp(0);
    pub const ONE: Fp = Fp(1);

    /// Reduces an arbitrary `u64`.
    pub const fn new(value: u64) -> Fp {
        if value >= MODULUS {
            Fp(value - MODULUS)
        } else {
            Fp(value)
        }
    }

    pub const fn value(self) -> u64 {
        self.0
    }

    pub fn from_i64(value: i64) -> Fp {
        if value >= 0 {
            Fp(value as u64)
        } else {
            -Fp(value.unsigned_abs())
        }
    }

    /// The representative in `(−q/2, q/2)`.
    pub fn to_signed(self) -> i64 {
        if self.0 > MODULUS / 2 {
            -((MODULUS - self.0) as i64)
        } else {
            self.0 as i64
        }
    }

    pub fn generator() -> Fp {
        Fp(GENERATOR)
    }

    pub fn pow(self, mut exp: u64) -> Fp {
        let mut base = self;
        let mut acc = Fp::ONE;
        while exp > 0 {
            if exp & 1 == 1 {
                acc *= base;
            }
            base *= base;
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inverse(self) -> Option<Fp> {
        if self.0 == 0 {
            None
        } else {
            Some(self.pow(MODULUS - 2))
        }
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// A primitive `2^log_n`-th root of unity.
    pub fn root_of_unity(log_n: u32) -> Fp {
        assert!(log_n <= TWO_ADICITY, "no root of unity of order 2^{log_n}");
        Fp(GENERATOR).pow((MODULUS - 1) >> log_n)
    }
}

impl TryFrom<u64> for Fp {
    type Error = String;
    fn try_from(value: u64) -> Result<Self, Self::Error> {
        if value < MODULUS {
            Ok(Fp(value))
        } else {
            Err(format!("{value} is not a canonical field element"))
        }
    }
}

impl From<Fp> for u64 {
    fn from(x: Fp) -> u64 {
        x.0
    }
}

impl fmt::Debug for Fp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Fp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[inline]
fn reduce128(x: u128) -> u64 {
    let lo = x as u64;
    let hi = (x >> 64) as u64;
    let hi_hi = hi >> 32;
    let hi_lo = hi & EPSILON;
    // 2^96 ≡ −1 and 2^64 ≡ 2^32 − 1.
    let (mut t0, borrow) = lo.overflowing_sub(hi_hi);
    if borrow {
        t0 = t0.wrapping_sub(EPSILON);
    }
    let t1 = hi_lo * EPSILON;
    let (sum, carry) = t0.overflowing_add(t1);
    let mut r = sum.wrapping_add(EPSILON * carry as u64);
    if r >= MODULUS {
        r -= MODULUS;
    }
    r
}

impl Add for Fp {
    type Output = Fp;
    #[inline]
    fn add(self, rhs: Fp) -> Fp {
        let (s, carry) = self.0.overflowing_add(rhs.0);
        if carry || s >= MODULUS {
            Fp(s.wrapping_sub(MODULUS))
        } else {
            Fp(s)
        }
    }
}

impl Sub for Fp {
    type Output = Fp;
    #[inline]
    fn sub(self, rhs: Fp) -> Fp {
        let (d, borrow) = self.0.overflowing_sub(rhs.0);
        if borrow {
            Fp(d.wrapping_add(MODULUS))
        } else {
            Fp(d)
        }
    }
}

impl Neg for Fp {
    type Output = Fp;
    #[inline]
    fn neg(self) -> Fp {
        if self.0 == 0 {
            self
        } else {
            Fp(MODULUS - self.0)
        }
    }
}

impl Mul for Fp {
    type Output = Fp;
    #[inline]
    fn mul(self, rhs: Fp) -> Fp {
        Fp(reduce128(self.0 as u128 * rhs.0 as u128))
    }
}

impl AddAssign for Fp {
    #[inline]
    fn add_assign(&mut self, rhs: Fp) {
        *self = *self + rhs;
    }
}

impl SubAssign for Fp {
    #[inline]
    fn sub_assign(&mut self, rhs: Fp) {
        *self = *self - rhs;
    }
}

impl MulAssign for Fp {
    #[inline]
    fn mul_assign(&mut self, rhs: Fp) {
        *self = *self * rhs;
    }
}

impl std::iter::Sum for Fp {
    fn sum<I: Iterator<Item = Fp>>(iter: I) -> Fp {
        iter.fold(Fp::ZERO, |a, b| a + b)
    }
}

/// Inverts every element in place with a single field inversion.
/// Panics if any element is zero.
pub fn batch_inverse(values: &mut [Fp]) {
    if values.is_empty() {
        return;
    }
    let mut prefix = Vec::with_capacity(values.len());
    let mut acc = Fp::ONE;
    for &v in values.iter() {
        prefix.push(acc);
        acc *= v;
    }
    let mut inv = acc.inverse().expect("batch_inverse on a zero element");
    for i in (0..values.len()).rev() {
        let v = values[i];
        values[i] = inv * prefix[i];
        inv *= v;
    }
}

fn bit_reverse(a: &mut [Fp]) {
    let n = a.len();
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            a.swap(i, j);
        }
    }
}

/// In-place NTT of a power-of-two length slice. `inverse` applies the
/// inverse transform including the 1/n scaling.
pub fn ntt(a: &mut [Fp], inverse: bool) {
    let n = a.len();
    assert!(n.is_power_of_two(), "NTT length must be a power of two");
    if n == 1 {
        return;
    }
    bit_reverse(a);
    let log_n = n.trailing_zeros();
    let mut twiddles = Vec::with_capacity(n / 2);
    let mut len = 2;
    for stage in 1..=log_n {
        let mut w = Fp::root_of_unity(stage);
        if inverse {
            w = w.inverse().expect("root of unity is nonzero");
        }
        let half = len / 2;
        twiddles.clear();
        let mut t = Fp::ONE;
        for _ in 0..half {
            twiddles.push(t);
            t *= w;
        }
        for chunk in a.chunks_exact_mut(len) {
            let (lo, hi) = chunk.split_at_mut(half);
            for ((x, y), &tw) in lo.iter_mut().zip(hi.iter_mut()).zip(&twiddles) {
                let u = *x;
                let v = *y * tw;
                *x = u + v;
                *y = u - v;
            }
        }
        len <<= 1;
    }
    if inverse {
        let scale = Fp::new(n as u64).inverse().expect("n is below the modulus");
        for x in a.iter_mut() {
            *x *= scale;
        }
    }
}

/// Schoolbook product; reference route for [`poly_mul`].
pub fn poly_mul_naive(a: &[Fp], b: &[Fp]) -> Vec<Fp> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![Fp::ZERO; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Polynomial product, by NTT once the operands are large enough.
pub fn poly_mul(a: &[Fp], b: &[Fp]) -> Vec<Fp> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    if a.len().min(b.len()) <= 32 {
        return poly_mul_naive(a, b);
    }
    let out_len = a.len() + b.len() - 1;
    let size = out_len.next_power_of_two();
    let mut fa = a.to_vec();
    fa.resize(size, Fp::ZERO);
    let mut fb = b.to_vec();
    fb.resize(size, Fp::ZERO);
    ntt(&mut fa, false);
    ntt(&mut fb, false);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= *y;
    }
    ntt(&mut fa, true);
    fa.truncate(out_len);
    fa
}

/// Horner evaluation.
pub fn poly_eval(coeffs: &[Fp], x: Fp) -> Fp {
    coeffs.iter().rev().fold(Fp::ZERO, |acc, &c| acc * x + c)
}

/// `out[j] = Σ_i coeffs[i] · (start · ratio^j)^i` for `j < count`, by direct
/// accumulation over the nonzero coefficients. Reference route for
/// [`eval_geometric`].
pub fn eval_geometric_direct(coeffs: &[Fp], start: Fp, ratio: Fp, count: usize) -> Vec<Fp> {
    let mut out = vec![Fp::ZERO; count];
    let mut start_pow = Fp::ONE;
    let mut ratio_pow = Fp::ONE;
    for &c in coeffs {
        if !c.is_zero() {
            let mut term = c * start_pow;
            for o in out.iter_mut() {
                *o += term;
                term *= ratio_pow;
            }
        }
        start_pow *= start;
        ratio_pow *= ratio;
    }
    out
}

/// Chirp-z route for [`eval_geometric`]. Uses
/// `ij = C(i+j, 2) − C(i, 2) − C(j, 2)` to turn the evaluation into a single
/// convolution. `ratio` must be nonzero.
pub fn eval_geometric_chirp(coeffs: &[Fp], start: Fp, ratio: Fp, count: usize) -> Vec<Fp> {
    let m = coeffs.len();
    if m == 0 || count == 0 {
        return vec![Fp::ZERO; count];
    }
    let ratio_inv = ratio.inverse().expect("chirp-z needs a nonzero ratio");
    // chirp[t] = ratio^C(t,2), chirp_inv[t] = ratio^-C(t,2)
    let total = m + count - 1;
    let mut chirp = Vec::with_capacity(total);
    let mut chirp_inv = Vec::with_capacity(m.max(count));
    let (mut c, mut ci) = (Fp::ONE, Fp::ONE);
    let (mut step, mut step_inv) = (Fp::ONE, Fp::ONE);
    for t in 0..total {
        chirp.push(c);
        if t < m.max(count) {
            chirp_inv.push(ci);
        }
        c *= step;
        ci *= step_inv;
        step *= ratio;
        step_inv *= ratio_inv;
    }
    // u[m-1-i] = coeffs[i] · start^i · ratio^-C(i,2), stored reversed so the
    // correlation with `chirp` becomes a convolution.
    let mut u = vec![Fp::ZERO; m];
    let mut start_pow = Fp::ONE;
    for i in 0..m {
        u[m - 1 - i] = coeffs[i] * start_pow * chirp_inv[i];
        start_pow *= start;
    }
    let conv = poly_mul(&u, &chirp);
    (0..count).map(|j| conv[m - 1 + j] * chirp_inv[j]).collect()
}

/// Evaluates the polynomial with coefficients `coeffs` at
/// `start · ratio^j` for `j < count`, choosing the cheaper of direct
/// accumulation and chirp-z.
pub fn eval_geometric(coeffs: &[Fp], start: Fp, ratio: Fp, count: usize) -> Vec<Fp> {
    let nonzero = coeffs.iter().filter(|c| !c.is_zero()).count();
    let direct_cost = nonzero as f64 * count as f64;
    let size = (2 * coeffs.len() + count).next_power_of_two() as f64;
    let chirp_cost = 3.0 * size * size.log2() + 4.0 * size;
    if direct_cost <= chirp_cost || ratio.is_zero() {
        eval_geometric_direct(coeffs, start, ratio, count)
    } else {
        eval_geometric_chirp(coeffs, start, ratio, count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn elems(v: &[u64]) -> Vec<Fp> {
        v.iter().map(|&x| Fp::new(x)).collect()
    }

    #[test]
    fn generator_is_primitive() {
        let g = Fp::generator();
        for p in [2u64, 3, 5, 17, 257, 65537] {
            assert_ne!(
                g.pow((MODULUS - 1) / p),
                Fp::ONE,
                "fails for prime factor {p}"
            );
        }
        assert_eq!(g.pow(MODULUS - 1), Fp::ONE);
    }

    #[test]
    fn roots_of_unity_have_exact_order() {
        for log_n in [1u32, 5, 20, 32] {
            let w = Fp::root_of_unity(log_n);
            assert_eq!(w.pow(1 << log_n), Fp::ONE);
            assert_ne!(w.pow(1 << (log_n - 1)), Fp::ONE);
        }
    }

    #[test]
    fn signed_round_trip() {
        for v in [
            0i64,
            1,
            -1,
            12345,
            -987654321,
            i64::MAX / 4,
            -(i64::MAX / 4),
        ] {
            assert_eq!(Fp::from_i64(v).to_signed(), v);
        }
    }

    #[test]
    fn ntt_round_trip_and_convolution() {
        let a = elems(&(0..100).map(|i| i * 31 + 7).collect::<Vec<_>>());
        let b = elems(&(0..77).map(|i| MODULUS - 1 - i * i).collect::<Vec<_>>());
        assert_eq!(poly_mul(&a, &b), poly_mul_naive(&a, &b));
        let mut x = a.clone();
        x.resize(128, Fp::ZERO);
        let orig = x.clone();
        ntt(&mut x, false);
        ntt(&mut x, true);
        assert_eq!(x, orig);
    }

    #[test]
    fn chirp_matches_direct_at_several_shapes() {
        let g = Fp::generator();
        for (m, count) in [
            (1usize, 1usize),
            (1, 9),
            (9, 1),
            (50, 300),
            (300, 50),
            (257, 257),
        ] {
            let coeffs: Vec<Fp> = (0..m as u64).map(|i| Fp::new(i * i + 3)).collect();
            let start = g.pow(11);
            let ratio = g.pow(3).inverse().unwrap();
            assert_eq!(
                eval_geometric_chirp(&coeffs, start, ratio, count),
                eval_geometric_direct(&coeffs, start, ratio, count),
                "m={m} count={count}"
            );
        }
    }

    proptest! {
        #[test]
        fn reduction_matches_u128_remainder(a in any::<u64>(), b in any::<u64>()) {
            let (x, y) = (Fp::new(a), Fp::new(b));
            let expected = ((x.value() as u128 * y.value() as u128) % MODULUS as u128) as u64;
            prop_assert_eq!((x * y).value(), expected);
            let sum = ((x.value() as u128 + y.value() as u128) % MODULUS as u128) as u64;
            prop_assert_eq!((x + y).value(), sum);
            prop_assert_eq!((x - y) + y, x);
        }

        #[test]
        fn reduce128_matches_remainder(x in any::<u128>()) {
            prop_assert_eq!(reduce128(x), (x % MODULUS as u128) as u64);
        }

        #[test]
        fn inverse_is_inverse(a in 1u64..MODULUS) {
            let x = Fp::new(a);
            prop_assert_eq!(x * x.inverse().unwrap(), Fp::ONE);
        }

        #[test]
        fn batch_inverse_agrees(vals in proptest::collection::vec(1u64..MODULUS, 1..40)) {
            let mut xs = elems(&vals);
            batch_inverse(&mut xs);
            for (&v, x) in vals.iter().zip(&xs) {
                prop_assert_eq!(Fp::new(v).inverse().unwrap(), *x);
            }
        }

        #[test]
        fn chirp_matches_direct(
            coeffs in proptest::collection::vec(any::<u64>(), 1..80),
            count in 1usize..120,
            s in 0u64..1000,
            r in 1u64..1000,
        ) {
            let c = elems(&coeffs);
            let start = Fp::generator().pow(s);
            let ratio = Fp::generator().pow(r);
            prop_assert_eq!(
                eval_geometric_chirp(&c, start, ratio, count),
                eval_geometric_direct(&c, start, ratio, count)
            );
        }
    }
}
