//! Modular and p-adic integer arithmetic: valuations, inverses, square
//! roots and quadratic root-finding modulo prime powers.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModArithError {
    NotPrime(u64),
    NotAUnit { value: u64, modulus: u64 },
    ZeroModulus,
    MixedModuli,
    DegeneratePolynomial,
    Overflow,
}

impl fmt::Display for ModArithError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModArithError::NotPrime(p) => write!(f, "{} is not prime", p),
            ModArithError::NotAUnit { value, modulus } => {
                write!(f, "{} is not a unit modulo {}", value, modulus)
            }
            ModArithError::ZeroModulus => write!(f, "modulus exponent is zero"),
            ModArithError::MixedModuli => write!(f, "operands have different moduli"),
            ModArithError::DegeneratePolynomial => {
                write!(f, "polynomial vanishes identically modulo p^t")
            }
            ModArithError::Overflow => write!(f, "prime power exceeds u64 range"),
        }
    }
}

impl std::error::Error for ModArithError {}

/// A prime, checked by a deterministic Miller-Rabin test at construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Prime(u64);

impl Prime {
    pub fn new(p: u64) -> Result<Prime, ModArithError> {
        if is_prime_u64(p) {
            Ok(Prime(p))
        } else {
            Err(ModArithError::NotPrime(p))
        }
    }

    pub fn get(self) -> u64 {
        self.0
    }

    /// p^k, or an error if it does not fit in u64.
    pub fn pow(self, k: u32) -> Result<u64, ModArithError> {
        self.0.checked_pow(k).ok_or(ModArithError::Overflow)
    }
}

impl fmt::Display for Prime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Deterministic Miller-Rabin for u64 (fixed witness set).
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut s = 0u32;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a % n, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Inverse of `a` modulo `m` (extended Euclid); `None` if not a unit.
pub fn inv_mod_u64(a: u64, m: u64) -> Option<u64> {
    if m == 1 {
        return Some(0);
    }
    let (mut old_r, mut r) = (a as i128 % m as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    if old_r.abs() != 1 {
        return None;
    }
    let mut inv = old_s * old_r.signum();
    inv = inv.rem_euclid(m as i128);
    Some(inv as u64)
}

/// p-adic valuation of a nonzero u64.
pub fn val_u64(mut x: u64, p: u64) -> Option<u32> {
    if x == 0 {
        return None;
    }
    let mut v = 0;
    while x % p == 0 {
        x /= p;
        v += 1;
    }
    Some(v)
}

/// An integer modulo p^k, stored in the canonical range [0, p^k).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ResidueInt {
    value: u64,
    prime: Prime,
    modulus_exp: u32,
    modulus: u64,
}

impl ResidueInt {
    /// Reduces `value` into [0, p^k). Negative inputs wrap around.
    pub fn new(value: i64, prime: Prime, modulus_exp: u32) -> Result<Self, ModArithError> {
        let modulus = prime.pow(modulus_exp)?;
        let value = (value as i128).rem_euclid(modulus as i128) as u64;
        Ok(ResidueInt {
            value,
            prime,
            modulus_exp,
            modulus,
        })
    }

    pub fn from_u64(value: u64, prime: Prime, modulus_exp: u32) -> Result<Self, ModArithError> {
        let modulus = prime.pow(modulus_exp)?;
        Ok(ResidueInt {
            value: value % modulus,
            prime,
            modulus_exp,
            modulus,
        })
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn prime(&self) -> Prime {
        self.prime
    }

    pub fn modulus_exp(&self) -> u32 {
        self.modulus_exp
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn is_unit(&self) -> bool {
        self.modulus_exp == 0 || self.value % self.prime.get() != 0
    }
}

impl fmt::Display for ResidueInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (mod {}^{})",
            self.value,
            self.prime.get(),
            self.modulus_exp
        )
    }
}

/// A p-adic valuation: an integer or +infinity (the valuation of zero).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PAdicVal {
    Finite(i64),
    Infinity,
}

impl PAdicVal {
    pub fn is_nonneg(self) -> bool {
        match self {
            PAdicVal::Finite(v) => v >= 0,
            PAdicVal::Infinity => true,
        }
    }

    pub fn min(self, other: PAdicVal) -> PAdicVal {
        match (self, other) {
            (PAdicVal::Infinity, x) | (x, PAdicVal::Infinity) => x,
            (PAdicVal::Finite(a), PAdicVal::Finite(b)) => PAdicVal::Finite(a.min(b)),
        }
    }

    pub fn finite(self) -> Option<i64> {
        match self {
            PAdicVal::Finite(v) => Some(v),
            PAdicVal::Infinity => None,
        }
    }
}

impl std::ops::Add for PAdicVal {
    type Output = PAdicVal;
    fn add(self, other: PAdicVal) -> PAdicVal {
        match (self, other) {
            (PAdicVal::Finite(a), PAdicVal::Finite(b)) => PAdicVal::Finite(a + b),
            _ => PAdicVal::Infinity,
        }
    }
}

impl PartialOrd for PAdicVal {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PAdicVal {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        match (self, other) {
            (PAdicVal::Infinity, PAdicVal::Infinity) => std::cmp::Ordering::Equal,
            (PAdicVal::Infinity, _) => std::cmp::Ordering::Greater,
            (_, PAdicVal::Infinity) => std::cmp::Ordering::Less,
            (PAdicVal::Finite(a), PAdicVal::Finite(b)) => a.cmp(b),
        }
    }
}

fn val_bigint(x: &BigInt, p: u64) -> PAdicVal {
    if x.is_zero() {
        return PAdicVal::Infinity;
    }
    let p = BigInt::from(p);
    let mut x = x.clone();
    let mut v = 0i64;
    loop {
        let (q, r) = num_integer::Integer::div_rem(&x, &p);
        if r.is_zero() {
            x = q;
            v += 1;
        } else {
            return PAdicVal::Finite(v);
        }
    }
}

/// The exponent of p in a rational number; +infinity for zero.
pub fn padic_val(x: &BigRational, p: Prime) -> PAdicVal {
    if x.is_zero() {
        return PAdicVal::Infinity;
    }
    let num = val_bigint(x.numer(), p.get());
    let den = val_bigint(x.denom(), p.get());
    match (num, den) {
        (PAdicVal::Finite(a), PAdicVal::Finite(b)) => PAdicVal::Finite(a - b),
        _ => unreachable!("nonzero rational has finite valuations"),
    }
}

/// Inverse of a unit modulo p^k.
pub fn inv_mod(a: &ResidueInt) -> Result<ResidueInt, ModArithError> {
    if a.modulus_exp == 0 {
        return Err(ModArithError::ZeroModulus);
    }
    match inv_mod_u64(a.value, a.modulus) {
        Some(inv) => ResidueInt::from_u64(inv, a.prime, a.modulus_exp),
        None => Err(ModArithError::NotAUnit {
            value: a.value,
            modulus: a.modulus,
        }),
    }
}

/// All square roots of `a` modulo p^k, in increasing order.
///
/// Non-units are handled by valuation splitting: for v = val(a) even, the
/// roots are p^(v/2) times a unit root of a/p^v, each repeated across the
/// p^(v/2) translates that reduce to it. An empty result means `a` is not
/// a square.
pub fn sqrt_mod(a: &ResidueInt) -> Vec<ResidueInt> {
    let p = a.prime.get();
    let k = a.modulus_exp;
    let mk = |v: u64| ResidueInt::from_u64(v, a.prime, k).expect("modulus already validated");
    if k == 0 {
        return vec![mk(0)];
    }
    let pk = a.modulus;
    if a.value == 0 {
        // x^2 = 0 mod p^k  <=>  p^ceil(k/2) | x
        let step = p.pow((k + 1) / 2);
        return (0..pk / step).map(|j| mk(j * step)).collect();
    }
    let v = val_u64(a.value, p).expect("nonzero");
    if v % 2 != 0 {
        return Vec::new();
    }
    let half = p.pow(v / 2);
    let reduced_exp = k - v;
    let unit = a.value / p.pow(v);
    let unit_roots = sqrt_unit_mod(unit, p, reduced_exp);
    // Each unit root u mod p^(k-v) yields roots half*(u + j*p^(k-v)) mod p^k.
    let mut out = BTreeSet::new();
    let step = p.pow(reduced_exp);
    for u in unit_roots {
        for j in 0..p.pow(v / 2) {
            let x = (half as u128 * ((u + j * step) as u128) % pk as u128) as u64;
            out.insert(x);
        }
    }
    out.into_iter().map(mk).collect()
}

/// Square roots of a unit modulo p^k (k >= 1).
fn sqrt_unit_mod(a: u64, p: u64, k: u32) -> Vec<u64> {
    let pk = p.pow(k);
    let a = a % pk;
    if k == 0 {
        return vec![0];
    }
    if p == 2 {
        return match k {
            1 => vec![1],
            2 => {
                if a % 4 == 1 {
                    vec![1, 3]
                } else {
                    vec![]
                }
            }
            _ => {
                if a % 8 != 1 {
                    return vec![];
                }
                // Lift从 a root mod 8 upwards one bit at a time.
                let mut x = 1u64;
                for j in 3..k {
                    let m = 2u64.pow(j + 1);
                    if (mul_mod(x, x, m) + m - a % m) % m != 0 {
                        x += 2u64.pow(j - 1);
                    }
                }
                let mut roots = BTreeSet::new();
                for r in [x, pk - x, (x + pk / 2) % pk, (pk - x + pk / 2) % pk] {
                    roots.insert(r % pk);
                }
                roots.into_iter().collect()
            }
        };
    }
    // Odd p: solve mod p by Tonelli-Shanks, then Hensel (2x is a unit).
    let r0 = match tonelli_shanks(a % p, p) {
        Some(r) => r,
        None => return vec![],
    };
    let mut x = r0;
    let mut m = p;
    for _ in 1..k {
        let m2 = m * p;
        // Newton step: x <- x - (x^2 - a) / (2x) mod m2.
        let fx = (mul_mod(x, x, m2) + m2 - a % m2) % m2;
        let d = inv_mod_u64(mul_mod(2, x, m2), m2).expect("2x is a unit");
        x = (x + m2 - mul_mod(fx, d, m2)) % m2;
        m = m2;
    }
    let mut roots = vec![x, pk - x];
    roots.sort_unstable();
    roots.dedup();
    roots
}

/// Square root of a unit modulo an odd prime, or `None` for a non-residue.
fn tonelli_shanks(a: u64, p: u64) -> Option<u64> {
    if a == 0 {
        return Some(0);
    }
    if pow_mod(a, (p - 1) / 2, p) != 1 {
        return None;
    }
    if p % 4 == 3 {
        return Some(pow_mod(a, (p + 1) / 4, p));
    }
    let mut q = p - 1;
    let mut s = 0u32;
    while q % 2 == 0 {
        q /= 2;
        s += 1;
    }
    let mut z = 2;
    while pow_mod(z, (p - 1) / 2, p) != p - 1 {
        z += 1;
    }
    let mut m = s;
    let mut c = pow_mod(z, q, p);
    let mut t = pow_mod(a, q, p);
    let mut r = pow_mod(a, (q + 1) / 2, p);
    while t != 1 {
        let mut i = 0u32;
        let mut t2 = t;
        while t2 != 1 {
            t2 = mul_mod(t2, t2, p);
            i += 1;
        }
        let b = pow_mod(c, 1 << (m - i - 1), p);
        m = i;
        c = mul_mod(b, b, p);
        t = mul_mod(t, c, p);
        r = mul_mod(r, b, p);
    }
    Some(r)
}

/// All roots of A c^2 + B c + C = 0 modulo p^t, found by root-finding mod p
/// followed by level-by-level lifting that branches whenever the derivative
/// is not a unit. Complete for every coefficient pattern except the
/// identically-zero polynomial, which is reported as an error.
pub fn hensel_quadratic_roots(
    a: &ResidueInt,
    b: &ResidueInt,
    c: &ResidueInt,
) -> Result<Vec<ResidueInt>, ModArithError> {
    if a.prime != b.prime
        || a.prime != c.prime
        || a.modulus_exp != b.modulus_exp
        || a.modulus_exp != c.modulus_exp
    {
        return Err(ModArithError::MixedModuli);
    }
    let t = a.modulus_exp;
    if t == 0 {
        return Err(ModArithError::ZeroModulus);
    }
    if a.value == 0 && b.value == 0 && c.value == 0 {
        return Err(ModArithError::DegeneratePolynomial);
    }
    let p = a.prime.get();
    let eval = |x: u64, m: u64| -> u64 {
        let x = x % m;
        (mul_mod(mul_mod(a.value % m, x, m), x, m) + mul_mod(b.value % m, x, m) + c.value % m) % m
    };
    let deriv_is_unit = |x: u64| -> bool { (mul_mod(2 * (a.value % p), x, p) + b.value % p) % p != 0 };

    let mut level: Vec<u64> = (0..p).filter(|&x| eval(x, p) == 0).collect();
    let mut m = p;
    for _ in 1..t {
        let m2 = m * p;
        let mut next = BTreeSet::new();
        for &x in &level {
            if deriv_is_unit(x) {
                // Unique lift by a Newton step.
                let fx = eval(x, m2);
                let d = (mul_mod(2 * (a.value % m2), x, m2) + b.value % m2) % m2;
                let dinv = inv_mod_u64(d, m2).expect("unit derivative");
                next.insert((x + m2 - mul_mod(fx, dinv, m2)) % m2);
            } else {
                for j in 0..p {
                    let cand = x + j * m;
                    if eval(cand, m2) == 0 {
                        next.insert(cand);
                    }
                }
            }
        }
        level = next.into_iter().collect();
        m = m2;
    }
    level.sort_unstable();
    Ok(level
        .into_iter()
        .map(|x| ResidueInt::from_u64(x, a.prime, t).expect("validated"))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;
    use proptest::prelude::*;

    fn p(x: u64) -> Prime {
        Prime::new(x).unwrap()
    }

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn primality() {
        assert!(Prime::new(2).is_ok());
        assert!(Prime::new(3).is_ok());
        assert!(Prime::new(1).is_err());
        assert!(Prime::new(91).is_err());
        assert!(Prime::new(1_000_000_007).is_ok());
    }

    #[test]
    fn valuation_examples() {
        assert_eq!(padic_val(&rat(12, 1), p(2)), PAdicVal::Finite(2));
        assert_eq!(padic_val(&rat(5, 8), p(2)), PAdicVal::Finite(-3));
        assert_eq!(padic_val(&BigRational::zero(), p(7)), PAdicVal::Infinity);
    }

    #[test]
    fn inverse_examples() {
        let a = ResidueInt::new(3, p(2), 4).unwrap();
        assert_eq!(inv_mod(&a).unwrap().value(), 11);
        let one = ResidueInt::new(1, p(5), 3).unwrap();
        assert_eq!(inv_mod(&one).unwrap().value(), 1);
        let even = ResidueInt::new(2, p(2), 4).unwrap();
        assert!(matches!(
            inv_mod(&even),
            Err(ModArithError::NotAUnit { .. })
        ));
        let k0 = ResidueInt::new(0, p(3), 0).unwrap();
        assert!(matches!(inv_mod(&k0), Err(ModArithError::ZeroModulus)));
    }

    #[test]
    fn sqrt_examples() {
        let two = ResidueInt::new(2, p(7), 1).unwrap();
        let roots: Vec<u64> = sqrt_mod(&two).iter().map(|r| r.value()).collect();
        assert_eq!(roots, vec![3, 4]);

        for (q, k) in [(3u64, 2u32), (5, 3), (7, 2)] {
            let one = ResidueInt::new(1, p(q), k).unwrap();
            let roots: Vec<u64> = sqrt_mod(&one).iter().map(|r| r.value()).collect();
            assert_eq!(roots, vec![1, q.pow(k) - 1]);
        }

        let three = ResidueInt::new(3, p(5), 1).unwrap();
        assert!(sqrt_mod(&three).is_empty());
    }

    #[test]
    fn sqrt_matches_exhaustive_search() {
        for (q, kmax) in [(2u64, 6u32), (3, 6), (5, 4), (7, 3)] {
            for k in 1..=kmax {
                let pk = q.pow(k);
                for a in 0..pk {
                    let a_res = ResidueInt::from_u64(a, p(q), k).unwrap();
                    let got: Vec<u64> = sqrt_mod(&a_res).iter().map(|r| r.value()).collect();
                    let want: Vec<u64> =
                        (0..pk).filter(|&x| mul_mod(x, x, pk) == a).collect();
                    assert_eq!(got, want, "a={} mod {}^{}", a, q, k);
                }
            }
        }
    }

    #[test]
    fn hensel_examples() {
        let mk = |v: i64, q: u64, t: u32| ResidueInt::new(v, p(q), t).unwrap();
        let roots: Vec<u64> = hensel_quadratic_roots(&mk(1, 3, 2), &mk(0, 3, 2), &mk(-1, 3, 2))
            .unwrap()
            .iter()
            .map(|r| r.value())
            .collect();
        assert_eq!(roots, vec![1, 8]);

        assert!(hensel_quadratic_roots(&mk(1, 3, 2), &mk(0, 3, 2), &mk(1, 3, 2))
            .unwrap()
            .is_empty());

        let roots: Vec<u64> = hensel_quadratic_roots(&mk(0, 5, 3), &mk(1, 5, 3), &mk(0, 5, 3))
            .unwrap()
            .iter()
            .map(|r| r.value())
            .collect();
        assert_eq!(roots, vec![0]);

        assert!(matches!(
            hensel_quadratic_roots(&mk(0, 3, 2), &mk(0, 3, 2), &mk(0, 3, 2)),
            Err(ModArithError::DegeneratePolynomial)
        ));
    }

    proptest! {
        #[test]
        fn hensel_agrees_with_exhaustion(a in -40i64..40, b in -40i64..40, c in -40i64..40,
                                         t in 1u32..=4) {
            let q = p(3);
            let pt = 3u64.pow(t);
            let mk = |v: i64| ResidueInt::new(v, q, t).unwrap();
            let poly = (mk(a), mk(b), mk(c));
            let brute: Vec<u64> = (0..pt)
                .filter(|&x| {
                    (mul_mod(mul_mod(poly.0.value(), x, pt), x, pt)
                        + mul_mod(poly.1.value(), x, pt)
                        + poly.2.value())
                        % pt
                        == 0
                })
                .collect();
            match hensel_quadratic_roots(&poly.0, &poly.1, &poly.2) {
                Ok(roots) => {
                    let got: Vec<u64> = roots.iter().map(|r| r.value()).collect();
                    prop_assert_eq!(got, brute);
                }
                Err(ModArithError::DegeneratePolynomial) => {
                    prop_assert_eq!(brute.len() as u64, pt);
                }
                Err(e) => return Err(TestCaseError::fail(format!("{e}"))),
            }
        }

        #[test]
        fn valuation_is_additive(an in 1i64..500, ad in 1i64..500, bn in 1i64..500, bd in 1i64..500) {
            let q = p(3);
            let x = rat(an, ad);
            let y = rat(bn, bd);
            let vx = padic_val(&x, q).finite().unwrap();
            let vy = padic_val(&y, q).finite().unwrap();
            let vxy = padic_val(&(x * y), q).finite().unwrap();
            prop_assert_eq!(vxy, vx + vy);
        }

        #[test]
        fn inverse_is_involutive(a in 1i64..10_000, k in 1u32..=6) {
            let q = p(3);
            let r = ResidueInt::new(a, q, k).unwrap();
            prop_assume!(r.is_unit());
            let inv = inv_mod(&r).unwrap();
            prop_assert_eq!(inv_mod(&inv).unwrap(), r);
        }

        #[test]
        fn sqrt_postcondition(a in 0i64..3_000, q in prop_oneof![Just(2u64), Just(3), Just(5)], k in 1u32..=5) {
            let r = ResidueInt::new(a, p(q), k).unwrap();
            let pk = r.modulus();
            for x in sqrt_mod(&r) {
                prop_assert_eq!(mul_mod(x.value(), x.value(), pk), r.value());
            }
        }
    }

    #[test]
    fn bigint_valuation() {
        assert_eq!(val_bigint(&BigInt::from(54), 3), PAdicVal::Finite(3));
        assert_eq!(val_bigint(&BigInt::one(), 3), PAdicVal::Finite(0));
        assert_eq!(val_bigint(&BigInt::zero(), 3), PAdicVal::Infinity);
    }
}
