//! Stationary-phase evaluation of the quadratic orthogonal sum: for
//! exponents r >= 4 the full sum collapses to a bounded set of critical
//! points modulo p^t (t = floor(r/4)) where two derivative congruences
//! vanish, plus a small inner double sum when r is not divisible by 4.
//!
//! Any unmet hypothesis routes to the direct evaluator, with the reason
//! recorded in the result; the fast route is exact, never approximate.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;

use crate::closedsums::{s4_direct, S4Params, SumError};
use crate::cyclo::CycloSum;
use crate::modarith::{hensel_quadratic_roots, inv_mod_u64, sqrt_mod, Prime, ResidueInt};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FastError {
    DegenerateSystem { detail: String },
    UnmetHypothesis { detail: String },
}

impl fmt::Display for FastError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FastError::DegenerateSystem { detail } => {
                write!(f, "critical system is degenerate: {detail}")
            }
            FastError::UnmetHypothesis { detail } => write!(f, "hypothesis not met: {detail}"),
        }
    }
}

impl std::error::Error for FastError {}

/// The six reduction shapes, split by prime parity and by r mod 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Variant {
    OddR4t,
    OddR4t2,
    TwoR4t1,
    TwoR4t3,
    TwoEven4t,
    TwoEven4t2,
}

impl Variant {
    /// Whether the variant keeps a residual p x p double sum.
    pub fn has_inner_sum(self) -> bool {
        matches!(self, Variant::OddR4t2 | Variant::TwoR4t3 | Variant::TwoEven4t2)
    }
}

/// Classifies (p, r) into a reduction shape, with the critical modulus
/// exponent t and the phase modulus exponent (2t or 2t + 1).
pub fn classify_variant(p: Prime, r: u32) -> Option<(Variant, u32, u32)> {
    if p.get() % 4 == 3 {
        if r >= 4 && r % 4 == 0 {
            let t = r / 4;
            return Some((Variant::OddR4t, t, 2 * t));
        }
        if r >= 6 && r % 4 == 2 {
            let t = (r - 2) / 4;
            return Some((Variant::OddR4t2, t, 2 * t + 1));
        }
        return None;
    }
    if p.get() == 2 {
        return match r % 4 {
            1 if r >= 5 => {
                let t = (r - 1) / 4;
                Some((Variant::TwoR4t1, t, 2 * t))
            }
            3 if r >= 7 => {
                let t = (r - 3) / 4;
                Some((Variant::TwoR4t3, t, 2 * t + 1))
            }
            0 if r >= 8 => {
                let t = r / 4;
                Some((Variant::TwoEven4t, t, 2 * t))
            }
            2 if r >= 10 => {
                let t = (r - 2) / 4;
                Some((Variant::TwoEven4t2, t, 2 * t + 1))
            }
            _ => None,
        };
    }
    None
}

/// The critical-point data of one sum: the congruence pair f, g modulo
/// p^t whose simultaneous zeros carry the surviving contributions.
#[derive(Debug, Clone)]
pub struct CriticalSystem {
    pub variant: Variant,
    pub p: Prime,
    pub t: u32,
    pub phase_exp: u32,
    pub m2: i64,
    pub m3: i64,
    pub n2: i64,
    pub n3: i64,
}

impl CriticalSystem {
    pub fn new(params: &S4Params) -> Option<CriticalSystem> {
        let (variant, t, phase_exp) = classify_variant(params.p, params.r)?;
        Some(CriticalSystem {
            variant,
            p: params.p,
            t,
            phase_exp,
            m2: params.m2,
            m3: params.m3,
            n2: params.n2,
            n3: params.n3,
        })
    }

    fn pt(&self) -> u64 {
        self.p.pow(self.t).expect("fits")
    }

    /// Domain condition on a critical-point candidate, per variant.
    pub fn domain_ok(&self, a: u64, b: u64) -> bool {
        let p = self.p.get();
        match self.variant {
            Variant::OddR4t | Variant::OddR4t2 => !(a % p == 0 && b % p == 0),
            Variant::TwoR4t1 | Variant::TwoR4t3 => (a % 2 == 1) ^ (b % 2 == 1),
            Variant::TwoEven4t | Variant::TwoEven4t2 => a % 2 == 1 && b % 2 == 1,
        }
    }

    /// The inverted quantity entering f and g: the inverse modulo `m` of
    /// a^2 + b^2 (halved once for the even two-adic shapes).
    fn core_inverse(&self, a: u64, b: u64, m: u64) -> Option<u64> {
        let d = a as u128 * a as u128 + b as u128 * b as u128;
        let d = match self.variant {
            Variant::TwoEven4t | Variant::TwoEven4t2 => d / 2,
            _ => d,
        };
        inv_mod_u64((d % m as u128) as u64, m)
    }

    fn linear_factor(&self) -> u64 {
        match self.variant {
            Variant::OddR4t | Variant::OddR4t2 => 2,
            _ => 1,
        }
    }

    /// Evaluates the congruence pair (f, g) modulo p^t at a candidate.
    pub fn fg(&self, a: u64, b: u64) -> Option<(u64, u64)> {
        let pt = self.pt();
        if pt == 1 {
            return Some((0, 0));
        }
        let ibar = self.core_inverse(a, b, pt)?;
        let red = |x: i64| (x as i128).rem_euclid(pt as i128) as u64;
        let mul = |x: u64, y: u64| ((x as u128 * y as u128) % pt as u128) as u64;
        let fac = self.linear_factor();
        let (m2, m3, n2, n3) = (red(self.m2), red(self.m3), red(self.n2), red(self.n3));
        let m0 = (mul(m2, a % pt) + pt - mul(m3, b % pt)) % pt;
        let ibar2 = mul(ibar, ibar);
        // f = -fac*m2*ibar + mid*m0*a*ibar^2 + n2,
        // g =  fac*m3*ibar + mid*m0*b*ibar^2 + n3,
        // where mid = 2*fac except for the halved two-adic shapes, whose
        // perturbation of (a^2+b^2)/2 carries no extra factor of two.
        let mid = match self.variant {
            Variant::TwoEven4t | Variant::TwoEven4t2 => 1u64,
            _ => 2 * fac,
        };
        let lead = mul(mid % pt, mul(m0, ibar2));
        let f = (pt - mul(fac % pt, mul(m2, ibar)) + mul(lead, a % pt) + n2) % pt;
        let g = (mul(fac % pt, mul(m3, ibar)) + mul(lead, b % pt) + n3) % pt;
        Some((f, g))
    }

    /// Numerator of the surviving phase at an integer point (a, b),
    /// modulo p^phase_exp.
    pub fn phase_num(&self, a: u64, b: u64) -> u64 {
        let pp = self.p.pow(self.phase_exp).expect("fits");
        let ibar = self
            .core_inverse(a, b, pp)
            .expect("phase denominator is a unit on the domain");
        let red = |x: i64| (x as i128).rem_euclid(pp as i128) as u64;
        let mul = |x: u64, y: u64| ((x as u128 * y as u128) % pp as u128) as u64;
        let m0 = (mul(red(self.m2), a % pp) + pp - mul(red(self.m3), b % pp)) % pp;
        let lin = mul(self.linear_factor() % pp, mul(m0, ibar));
        (pp - lin + mul(red(self.n2), a % pp) + mul(red(self.n3), b % pp)) % pp
    }
}

/// All (a, b) modulo p^t in the variant's domain where f and g vanish,
/// found by solving the quadratic in c = b/a (or a/b) and recovering the
/// unit variable from a square root; every candidate is verified against
/// f and g before being accepted.
pub fn critical_points(sys: &CriticalSystem) -> Result<Vec<(u64, u64)>, FastError> {
    let p = sys.p;
    let t = sys.t;
    let pt = sys.pt();
    if pt == 1 {
        // Modulo p^0 there is a single residue pair, critical by
        // convention when it lies in the domain.
        let single = (0u64, 0u64);
        return Ok(if sys.domain_ok(single.0, single.1) {
            vec![single]
        } else {
            vec![]
        });
    }
    if sys.n2.rem_euclid(p.get() as i64) == 0 || sys.n3.rem_euclid(p.get() as i64) == 0 {
        return Err(FastError::UnmetHypothesis {
            detail: "n2 n3 must be prime to p".into(),
        });
    }
    if matches!(sys.variant, Variant::TwoEven4t | Variant::TwoEven4t2)
        && (sys.m2 % 2 == 0 || sys.m3 % 2 == 0)
    {
        return Err(FastError::UnmetHypothesis {
            detail: "m2 m3 must be odd for the even two-adic shapes".into(),
        });
    }
    let mut found: BTreeSet<(u64, u64)> = BTreeSet::new();
    let branches: Vec<(i64, i64, i64, i64, bool)> = match sys.variant {
        // Swapping the two variables maps the system onto itself with
        // (m2, m3, n2, n3) -> (-m3, -m2, n3, n2).
        Variant::TwoEven4t | Variant::TwoEven4t2 => {
            vec![(sys.m2, sys.m3, sys.n2, sys.n3, false)]
        }
        _ => vec![
            (sys.m2, sys.m3, sys.n2, sys.n3, false),
            (-sys.m3, -sys.m2, sys.n3, sys.n2, true),
        ],
    };
    for (m2, m3, n2, n3, swapped) in branches {
        let fac = sys.linear_factor() as i64;
        // c-quadratic: -fac*(m2 n3 - m3 n2) c^2 - 2 fac*(m2 n2 + m3 n3) c
        //              + fac*(m2 n3 - m3 n2) = 0 (mod p^t).
        let disc_a = -fac * (m2 * n3 - m3 * n2);
        let disc_b = -2 * fac * (m2 * n2 + m3 * n3);
        let disc_c = fac * (m2 * n3 - m3 * n2);
        let mk = |v: i64| ResidueInt::new(v, p, t).expect("modulus fits");
        let roots = match hensel_quadratic_roots(&mk(disc_a), &mk(disc_b), &mk(disc_c)) {
            Ok(roots) => roots,
            Err(crate::modarith::ModArithError::DegeneratePolynomial) => {
                return Err(FastError::DegenerateSystem {
                    detail: "quadratic in c vanishes identically".into(),
                })
            }
            Err(e) => {
                return Err(FastError::DegenerateSystem {
                    detail: e.to_string(),
                })
            }
        };
        for c_root in roots {
            let c = c_root.value();
            // Parity of c = b/a must match the variant's domain.
            match sys.variant {
                Variant::TwoR4t1 | Variant::TwoR4t3 => {
                    if c % 2 != 0 {
                        continue;
                    }
                }
                Variant::TwoEven4t | Variant::TwoEven4t2 => {
                    if c % 2 != 1 {
                        continue;
                    }
                }
                _ => {}
            }
            // The linear relation in the unit variable squared:
            // n2 * (1 + c^2)^2 * a^2 = rhs(c) (mod p^t), with the even
            // two-adic shapes using k = (1 + c^2)/2 instead of 1 + c^2.
            let red = |x: i64| (x as i128).rem_euclid(pt as i128) as u64;
            let mul = |x: u64, y: u64| ((x as u128 * y as u128) % pt as u128) as u64;
            let (coeff, rhs) = match sys.variant {
                Variant::OddR4t | Variant::OddR4t2 => {
                    let one_c2 = (1 + mul(c, c)) % pt;
                    let coeff = mul(red(n2), mul(one_c2, one_c2));
                    // rhs = 2 (m2 c^2 + 2 m3 c - m2)
                    let inner =
                        (mul(red(m2), mul(c, c)) + mul(2 % pt, mul(red(m3), c)) + pt - red(m2)) % pt;
                    (coeff, mul(2 % pt, inner))
                }
                Variant::TwoR4t1 | Variant::TwoR4t3 => {
                    let one_c2 = (1 + mul(c, c)) % pt;
                    let coeff = mul(red(n2), mul(one_c2, one_c2));
                    let rhs =
                        (mul(red(m2), mul(c, c)) + mul(2 % pt, mul(red(m3), c)) + pt - red(m2)) % pt;
                    (coeff, rhs)
                }
                Variant::TwoEven4t | Variant::TwoEven4t2 => {
                    // k = (1 + c^2)/2 from the integer representative.
                    let k = (((c as u128 * c as u128 + 1) / 2) % pt as u128) as u64;
                    let coeff = mul(red(n2), mul(k, k));
                    let rhs = (mul(red(m2), k) + mul(red(m3), c) + pt - red(m2)) % pt;
                    (coeff, rhs)
                }
            };
            let coeff_inv = match inv_mod_u64(coeff, pt) {
                Some(v) => v,
                None => continue, // 1 + c^2 not a unit cannot occur on valid roots
            };
            let a2 = mul(rhs, coeff_inv);
            for a_root in sqrt_mod(&ResidueInt::from_u64(a2, p, t).expect("fits")) {
                let a = a_root.value();
                if a % p.get() == 0 {
                    continue; // the branch variable must be a unit
                }
                let b = mul(c, a);
                let (aa, bb) = if swapped { (b, a) } else { (a, b) };
                if !sys.domain_ok(aa, bb) {
                    continue;
                }
                if let Some((f, g)) = sys.fg(aa, bb) {
                    if f == 0 && g == 0 {
                        found.insert((aa, bb));
                    }
                }
            }
        }
    }
    Ok(found.into_iter().collect())
}

/// The residual p x p double sum at one critical point: the exact sum of
/// e((phase(a + p^t x, b + p^t y) - phase(a, b)) / p^(2t+1)) over
/// x, y modulo p.
pub fn inner_quadratic_sum(
    sys: &CriticalSystem,
    a: u64,
    b: u64,
    term_count: &mut u64,
) -> CycloSum {
    debug_assert!(sys.variant.has_inner_sum());
    let p = sys.p.get();
    let pt = sys.pt();
    let pp = sys.p.pow(sys.phase_exp).expect("fits");
    let base = sys.phase_num(a, b);
    let mut acc = CycloSum::zero();
    for x in 0..p {
        for y in 0..p {
            let num = (sys.phase_num(a + pt * x, b + pt * y) + pp - base) % pp;
            *term_count += 1;
            acc = acc
                .add(&CycloSum::term(num as i64, sys.p, sys.phase_exp))
                .expect("same field");
        }
    }
    acc
}

/// How a fast evaluation was actually carried out.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub enum FastRoute {
    Fast {
        variant: Variant,
        critical_points: usize,
    },
    FellBack {
        reason: String,
    },
}

#[derive(Debug, Clone)]
pub struct S4FastResult {
    pub value: CycloSum,
    pub route: FastRoute,
    /// Number of cyclotomic term constructions performed (deterministic
    /// work measure; the direct route would construct one term per
    /// admissible summand).
    pub terms_constructed: u64,
}

impl S4FastResult {
    pub fn fell_back(&self) -> bool {
        matches!(self.route, FastRoute::FellBack { .. })
    }
}

/// Stationary-phase evaluation with fallback: exact in every case.
pub fn s4_fast(params: &S4Params) -> Result<S4FastResult, SumError> {
    if params.p.get() % 4 == 1 {
        return Err(SumError::BadPrime { p: params.p.get() });
    }
    let fall = |reason: String| -> Result<S4FastResult, SumError> {
        Ok(S4FastResult {
            value: s4_direct(params)?,
            route: FastRoute::FellBack { reason },
            terms_constructed: 0,
        })
    };
    let sys = match CriticalSystem::new(params) {
        Some(sys) => sys,
        None => return fall(format!("no reduction shape for r = {}", params.r)),
    };
    let points = match critical_points(&sys) {
        Ok(points) => points,
        Err(e) => return fall(e.to_string()),
    };
    let mut term_count = 0u64;
    let mut acc = CycloSum::zero();
    for &(a, b) in &points {
        let base = CycloSum::term(sys.phase_num(a, b) as i64, sys.p, sys.phase_exp);
        term_count += 1;
        let contribution = if sys.variant.has_inner_sum() {
            let inner = inner_quadratic_sum(&sys, a, b, &mut term_count);
            base.mul(&inner).expect("same field")
        } else {
            base
        };
        acc = acc.add(&contribution).expect("same field");
    }
    let prefactor = BigInt::from(sys.p.get()).pow(2 * sys.t);
    Ok(S4FastResult {
        value: acc.scale(&prefactor),
        route: FastRoute::Fast {
            variant: sys.variant,
            critical_points: points.len(),
        },
        terms_constructed: term_count,
    })
}
