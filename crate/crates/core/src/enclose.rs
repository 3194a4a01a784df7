use num::bigint::BigInt;
use num::{BigRational, One, Signed, Zero};

use crate::error::{Error, Result};

/// Closed rational interval guaranteed to contain an exact real value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interval {
    pub lo: BigRational,
    pub hi: BigRational,
}

impl Interval {
    pub fn point(v: BigRational) -> Self {
        Interval { lo: v.clone(), hi: v }
    }

    pub fn new(lo: BigRational, hi: BigRational) -> Self {
        assert!(lo <= hi, "inverted interval");
        Interval { lo, hi }
    }

    pub fn width(&self) -> BigRational {
        &self.hi - &self.lo
    }

    pub fn add(&self, other: &Interval) -> Interval {
        Interval {
            lo: &self.lo + &other.lo,
            hi: &self.hi + &other.hi,
        }
    }

    pub fn contains(&self, v: &BigRational) -> bool {
        self.lo <= *v && *v <= self.hi
    }

    /// Rounds outward to the dyadic grid of spacing 2^-bits. Refining `bits`
    /// never widens the result.
    pub fn round_outward(&self, bits: u32) -> Interval {
        Interval {
            lo: dyadic_floor(&self.lo, bits),
            hi: dyadic_ceil(&self.hi, bits),
        }
    }
}

fn pow2(bits: u32) -> BigInt {
    BigInt::one() << bits as usize
}

pub fn dyadic_floor(v: &BigRational, bits: u32) -> BigRational {
    let scaled = v * BigRational::from_integer(pow2(bits));
    BigRational::new(scaled.floor().to_integer(), pow2(bits))
}

pub fn dyadic_ceil(v: &BigRational, bits: u32) -> BigRational {
    let scaled = v * BigRational::from_integer(pow2(bits));
    BigRational::new(scaled.ceil().to_integer(), pow2(bits))
}

// ln(m) for m in [1, 2] via 2*atanh(u), u = (m-1)/(m+1) in [0, 1/3]. The
// series has positive terms; the tail after the u^(2K+1) term is bounded by
// the next term divided by (1 - u^2).
fn ln_mantissa(m: &BigRational, bits: u32) -> Interval {
    let one = BigRational::one();
    if m.is_one() {
        return Interval::point(BigRational::zero());
    }
    let u = (m - &one) / (m + &one);
    let u2 = &u * &u;
    let tol = BigRational::new(BigInt::one(), pow2(bits + 2));
    let mut term = u.clone();
    let mut sum = BigRational::zero();
    let mut k: u64 = 0;
    loop {
        sum += &term / BigRational::from_integer(BigInt::from(2 * k + 1));
        term *= &u2;
        k += 1;
        // Tail bound: term/(2k+1) * 1/(1-u2), a geometric majorant.
        let tail = (&term / BigRational::from_integer(BigInt::from(2 * k + 1)))
            / (&one - &u2);
        if tail < tol {
            let two = BigRational::from_integer(BigInt::from(2));
            return Interval::new(&two * &sum, &two * (&sum + &tail));
        }
    }
}

/// Enclosure of ln 2.
pub fn ln2_interval(bits: u32) -> Interval {
    ln_mantissa(&BigRational::from_integer(BigInt::from(2)), bits)
}

/// Enclosure of log2(q) for q > 0. Exact (zero width) when q is a power of
/// two.
pub fn log2_interval(q: &BigRational, bits: u32) -> Result<Interval> {
    if !q.is_positive() {
        return Err(Error::DimensionMismatch(
            "log2 requires a positive argument".to_string(),
        ));
    }
    // q = 2^e * m with m in [1, 2).
    let mut e: i64 = 0;
    let two = BigRational::from_integer(BigInt::from(2));
    let one = BigRational::one();
    let mut m = q.clone();
    while m >= two {
        m /= &two;
        e += 1;
    }
    while m < one {
        m *= &two;
        e -= 1;
    }
    if m.is_one() {
        return Ok(Interval::point(BigRational::from_integer(BigInt::from(e))));
    }
    let ln_m = ln_mantissa(&m, bits + 4);
    let ln2 = ln2_interval(bits + 4);
    // ln_m >= 0 and ln2 > 0, so the quotient bounds come from opposite ends.
    let frac = Interval::new(&ln_m.lo / &ln2.hi, &ln_m.hi / &ln2.lo);
    let shift = BigRational::from_integer(BigInt::from(e));
    Ok(Interval::new(&shift + frac.lo, &shift + frac.hi))
}

// -t*log2(t) at a rational point t in [0, 1]; zero at both ends.
fn xlog2x_point(t: &BigRational, bits: u32) -> Result<Interval> {
    if t.is_zero() || t.is_one() {
        return Ok(Interval::point(BigRational::zero()));
    }
    let l = log2_interval(t, bits)?;
    // log2(t) <= 0 here, so -t*hi <= -t*log2(t) <= -t*lo.
    Ok(Interval::new(-(t * &l.hi), -(t * &l.lo)))
}

// Certified bounds around 1/e and the maximum of -t*log2(t) on [0, 1],
// attained at t = 1/e with value log2(e)/e = 0.53073...
fn inv_e_bracket() -> (BigRational, BigRational) {
    (
        BigRational::new(BigInt::from(3678), BigInt::from(10000)),
        BigRational::new(BigInt::from(3679), BigInt::from(10000)),
    )
}

fn xlog2x_max_bound() -> BigRational {
    BigRational::new(BigInt::from(5308), BigInt::from(10000))
}

/// Enclosure of -t*log2(t) over all t in [t_lo, t_hi] ∩ [0, 1].
pub fn xlog2x_interval(t_lo: &BigRational, t_hi: &BigRational, bits: u32) -> Result<Interval> {
    let zero = BigRational::zero();
    let one = BigRational::one();
    let a = t_lo.clone().max(zero.clone());
    let b = t_hi.clone().min(one.clone());
    if a > b {
        return Err(Error::DimensionMismatch(
            "probability interval outside [0, 1]".to_string(),
        ));
    }
    let fa = xlog2x_point(&a, bits)?;
    let fb = xlog2x_point(&b, bits)?;
    // The function rises to its single maximum at 1/e and falls after, so
    // the minimum over an interval sits at an endpoint.
    let lo = fa.lo.clone().min(fb.lo.clone());
    let (inv_e_lo, inv_e_hi) = inv_e_bracket();
    let hi = if a < inv_e_hi && b > inv_e_lo {
        xlog2x_max_bound()
    } else {
        fa.hi.max(fb.hi)
    };
    Ok(Interval::new(lo, hi.max(zero)))
}

/// Enclosure of the Shannon entropy (bits) of a pmf given per-cell
/// probability intervals. Cells are clamped to [0, 1]; the result is rounded
/// outward to the dyadic grid.
pub fn entropy_interval(cells: &[(BigRational, BigRational)], bits: u32) -> Result<Interval> {
    let extra = 3 + usize::BITS - cells.len().max(1).leading_zeros();
    let work = bits + extra;
    let mut total = Interval::point(BigRational::zero());
    for (lo, hi) in cells {
        if hi.is_zero() {
            continue;
        }
        let term = if lo == hi {
            xlog2x_point(lo, work)?
        } else {
            xlog2x_interval(lo, hi, work)?
        };
        total = total.add(&term);
    }
    Ok(total.round_outward(bits + 2))
}

// cos(z) by the alternating Taylor series. Once consecutive term magnitudes
// decrease, the partial sums bracket the limit.
fn cos_interval_inner(z: &BigRational, bits: u32) -> Interval {
    let z2 = z * z;
    let tol = BigRational::new(BigInt::one(), pow2(bits + 2));
    let mut term = BigRational::one(); // z^(2k) / (2k)!
    let mut sum = BigRational::zero();
    let mut k: u64 = 0;
    let mut sign = BigRational::one();
    loop {
        sum += &sign * &term;
        sign = -sign;
        let denom = BigRational::from_integer(BigInt::from((2 * k + 1) * (2 * k + 2)));
        let next = &term * &z2 / denom;
        k += 1;
        // Decreasing alternating tail: the limit lies between sum and
        // sum + sign*next.
        if next < term && next < tol {
            let other = &sum + &sign * &next;
            return if sum <= other {
                Interval::new(sum, other)
            } else {
                Interval::new(other, sum)
            };
        }
        term = next;
    }
}

/// Enclosure of cos(z) for rational z (radians).
pub fn cos_interval(z: &BigRational, bits: u32) -> Interval {
    let abs = z.abs();
    let raw = cos_interval_inner(&abs, bits);
    let one = BigRational::one();
    Interval::new(raw.lo.max(-one.clone()), raw.hi.min(one))
}

/// Enclosure of sin²(z) = (1 - cos(2z)) / 2.
pub fn sin2_interval(z: &BigRational, bits: u32) -> Interval {
    let c = cos_interval(&(z * BigRational::from_integer(BigInt::from(2))), bits + 2);
    let one = BigRational::one();
    let two = BigRational::from_integer(BigInt::from(2));
    let lo = (&one - &c.hi) / &two;
    let hi = (&one - &c.lo) / &two;
    Interval::new(lo.max(BigRational::zero()), hi.min(one))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn to_f64(v: &BigRational) -> f64 {
        use num::ToPrimitive;
        v.to_f64().unwrap()
    }

    #[test]
    fn log2_exact_on_powers_of_two() {
        for (q, expect) in [(rat(8, 1), 3), (rat(1, 4), -2), (rat(1, 1), 0)] {
            let i = log2_interval(&q, 50).unwrap();
            assert_eq!(i.lo, i.hi);
            assert_eq!(i.lo, rat(expect, 1));
        }
    }

    #[test]
    fn log2_of_three_brackets_reference() {
        let i = log2_interval(&rat(3, 1), 60).unwrap();
        assert!(to_f64(&i.lo) <= 1.584962500721156);
        assert!(to_f64(&i.hi) >= 1.584962500721156);
        assert!(i.width() < rat(1, 1 << 50));
    }

    #[test]
    fn entropy_uniform_is_exact() {
        let cells: Vec<_> = (0..4).map(|_| (rat(1, 4), rat(1, 4))).collect();
        let h = entropy_interval(&cells, 40).unwrap();
        assert_eq!(h.lo, rat(2, 1));
        assert_eq!(h.hi, rat(2, 1));
        let det = vec![(rat(1, 1), rat(1, 1)), (rat(0, 1), rat(0, 1))];
        let h = entropy_interval(&det, 40).unwrap();
        assert!(h.lo.is_zero() && h.hi.is_zero());
    }

    #[test]
    fn entropy_third_two_thirds() {
        let cells = vec![(rat(1, 3), rat(1, 3)), (rat(2, 3), rat(2, 3))];
        let h = entropy_interval(&cells, 40).unwrap();
        let reference = 0.9182958340544896f64;
        assert!(to_f64(&h.lo) <= reference && reference <= to_f64(&h.hi));
        assert!(h.width() <= rat(1, 1 << 40));
    }

    #[test]
    fn refinement_never_widens() {
        let cells = vec![
            (rat(1, 7), rat(1, 7)),
            (rat(2, 7), rat(2, 7)),
            (rat(4, 7), rat(4, 7)),
        ];
        let coarse = entropy_interval(&cells, 20).unwrap();
        let fine = entropy_interval(&cells, 40).unwrap();
        assert!(fine.lo >= coarse.lo);
        assert!(fine.hi <= coarse.hi);
        assert!(coarse.contains(&fine.lo) && coarse.contains(&fine.hi));
    }

    #[test]
    fn interval_cells_fold_the_function_maximum() {
        // An interval straddling 1/e must use the certified max bound.
        let i = xlog2x_interval(&rat(3, 10), &rat(2, 5), 40).unwrap();
        let max = 0.5307378454535579f64;
        assert!(to_f64(&i.hi) >= max);
        assert!(to_f64(&i.hi) <= 0.5309);
        let max_bound = xlog2x_max_bound();
        let inv_e = inv_e_bracket();
        assert!(to_f64(&inv_e.0) < 0.36787944117144233);
        assert!(to_f64(&inv_e.1) > 0.36787944117144233);
        assert!(to_f64(&max_bound) > max);
    }

    #[test]
    fn cos_and_sin2_match_reference() {
        // The enclosures are narrower than f64 resolution, so reference
        // comparisons need a few ulps of slack.
        let eps = 1e-12;
        for (num, den) in [(1i64, 10i64), (3, 10), (1, 5), (2, 5), (6, 5), (0, 1)] {
            let z = rat(num, den);
            let zf = num as f64 / den as f64;
            let c = cos_interval(&z, 60);
            assert!(to_f64(&c.lo) <= zf.cos() + eps && zf.cos() <= to_f64(&c.hi) + eps);
            assert!(c.width() < rat(1, 1 << 50));
            let s = sin2_interval(&z, 60);
            let sf = zf.sin() * zf.sin();
            assert!(to_f64(&s.lo) <= sf + eps && sf <= to_f64(&s.hi) + eps);
        }
        let neg = cos_interval(&rat(-1, 10), 60);
        let pos = cos_interval(&rat(1, 10), 60);
        assert_eq!(neg, pos);
    }

    #[test]
    fn dyadic_rounding_is_outward() {
        let i = Interval::new(rat(1, 3), rat(2, 3));
        let r = i.round_outward(10);
        assert!(r.lo <= rat(1, 3) && r.hi >= rat(2, 3));
        assert_eq!(r.lo, rat(341, 1024));
        assert_eq!(r.hi, rat(683, 1024));
    }
}
