//! The enumeration route: build each coset representative from its
//! Pluecker data, move it into the integral points with an explicit
//! unipotent factor, split off the Bruhat factors, evaluate the two
//! characters, and sum. This is the oracle every closed formula is
//! checked against.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde_json::json;

use crate::cyclo::CycloSum;
use crate::matlin::{in_unipotent, is_p_integral, p_pow, rat_int, unipotent, GroupId, MatQ, Rat};
use crate::modarith::{inv_mod_u64, mul_mod, padic_val, PAdicVal, Prime};
use crate::plucker::{enumerate_cell, CellParams, Letter, PluckerError, WeylWord, DEFAULT_BUDGET};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KloosterError {
    Plucker(PluckerError),
    BadPrime { p: u64 },
    BadPowers { detail: String },
    IntegralizationFailed { word: String, params: String },
    FactorizationMismatch { word: String, params: String },
    NotUnipotentForm,
    Overflow,
}

impl fmt::Display for KloosterError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KloosterError::Plucker(e) => e.fmt(f),
            KloosterError::BadPrime { p } => {
                write!(f, "p = {p} = 1 mod 4 is excluded for this group")
            }
            KloosterError::BadPowers { detail } => write!(f, "bad power parameters: {detail}"),
            KloosterError::IntegralizationFailed { word, params } => {
                write!(f, "integralization failed on cell {word}, params {params}")
            }
            KloosterError::FactorizationMismatch { word, params } => {
                write!(f, "factor identity failed on cell {word}, params {params}")
            }
            KloosterError::NotUnipotentForm => write!(f, "matrix is not in unipotent form"),
            KloosterError::Overflow => write!(f, "modulus exceeds u64 range"),
        }
    }
}

impl std::error::Error for KloosterError {}

impl From<PluckerError> for KloosterError {
    fn from(e: PluckerError) -> Self {
        KloosterError::Plucker(e)
    }
}

/// The three integers defining a character of the unipotent group through
/// its marked entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct CharacterTriple {
    pub m1: i64,
    pub m2: i64,
    pub m3: i64,
}

impl CharacterTriple {
    pub fn new(m1: i64, m2: i64, m3: i64) -> Self {
        CharacterTriple { m1, m2, m3 }
    }
}

/// The fixed monomial representative of a Weyl word at given powers.
#[derive(Debug, Clone)]
pub struct NormalizerRep {
    pub group: GroupId,
    pub word: WeylWord,
    pub r: u32,
    pub s: u32,
    pub matrix: MatQ,
}

/// A fully specified local sum: cell, prime, powers and both characters.
#[derive(Debug, Clone)]
pub struct KloostermanSpec {
    pub group: GroupId,
    pub word: WeylWord,
    pub prime: Prime,
    pub r: u32,
    pub s: Option<u32>,
    pub psi: CharacterTriple,
    pub psi_prime: CharacterTriple,
}

impl KloostermanSpec {
    pub fn validate(&self) -> Result<(), KloosterError> {
        if self.word.group() != self.group {
            return Err(KloosterError::Plucker(PluckerError::UnsupportedCell {
                group: self.group,
                word: self.word.name(),
            }));
        }
        if self.group == GroupId::So42 && self.prime.get() % 4 == 1 {
            return Err(KloosterError::BadPrime { p: self.prime.get() });
        }
        match (self.word.arity(), self.s) {
            (0, None) => {
                if self.r != 0 {
                    return Err(KloosterError::BadPowers {
                        detail: "the identity cell carries no power parameter".into(),
                    });
                }
            }
            (1, None) => {}
            (2, Some(s)) => {
                if !self.word.powers_ok(self.r, s) {
                    return Err(KloosterError::Plucker(
                        PluckerError::PowerConstraintViolated {
                            word: self.word.name(),
                            r: self.r,
                            s,
                        },
                    ));
                }
            }
            _ => {
                return Err(KloosterError::BadPowers {
                    detail: format!(
                        "word {} takes {} power parameter(s)",
                        self.word.name(),
                        self.word.arity()
                    ),
                })
            }
        }
        Ok(())
    }

}

/// The monomial matrices fixing the modulus of each sum, entry by entry.
pub fn normalizer_rep(
    g: GroupId,
    word: &WeylWord,
    p: Prime,
    r: u32,
    s: u32,
) -> Result<NormalizerRep, KloosterError> {
    use Letter::*;
    if word.group() != g {
        return Err(KloosterError::Plucker(PluckerError::UnsupportedCell {
            group: g,
            word: word.name(),
        }));
    }
    if !word.powers_ok(r, s) {
        return Err(KloosterError::Plucker(PluckerError::PowerConstraintViolated {
            word: word.name(),
            r,
            s,
        }));
    }
    let q = p.get();
    let r = r as i64;
    let s = s as i64;
    let pw = |e: i64| p_pow(q, e);
    // Entries are 1-based (row, col, power-exponent, sign).
    let data: Vec<(usize, usize, i64, i64)> = match (g, word.letters()) {
        (_, []) => {
            return Ok(NormalizerRep {
                group: g,
                word: word.clone(),
                r: 0,
                s: 0,
                matrix: MatQ::identity(),
            })
        }
        (GroupId::So33, [Alpha]) => vec![
            (1, 1, 0, 1),
            (2, 3, -r, 1),
            (3, 2, r, -1),
            (4, 4, 0, 1),
            (5, 6, r, 1),
            (6, 5, -r, -1),
        ],
        (GroupId::So33, [Beta]) => vec![
            (1, 2, -r, 1),
            (2, 1, r, -1),
            (3, 3, 0, 1),
            (4, 5, r, 1),
            (5, 4, -r, -1),
            (6, 6, 0, 1),
        ],
        (GroupId::So33, [Gamma]) => vec![
            (1, 1, 0, 1),
            (2, 6, -r, -1),
            (3, 5, -r, 1),
            (4, 4, 0, 1),
            (5, 3, r, -1),
            (6, 2, r, 1),
        ],
        (GroupId::So33, [Alpha, Beta]) => vec![
            (1, 2, -r, 1),
            (2, 3, r - s, 1),
            (3, 1, s, 1),
            (4, 5, r, 1),
            (5, 6, s - r, 1),
            (6, 4, -s, 1),
        ],
        (GroupId::So33, [Alpha, Gamma]) => vec![
            (1, 1, 0, 1),
            (2, 5, -r - s, -1),
            (3, 6, s - r, -1),
            (4, 4, 0, 1),
            (5, 2, r + s, -1),
            (6, 3, r - s, -1),
        ],
        (GroupId::So33, [Beta, Alpha]) => vec![
            (1, 3, -r, 1),
            (2, 1, r - s, -1),
            (3, 2, s, -1),
            (4, 6, r, 1),
            (5, 4, s - r, -1),
            (6, 5, -s, -1),
        ],
        (GroupId::So33, [Beta, Gamma]) => vec![
            (1, 6, -r, 1),
            (2, 1, r - s, 1),
            (3, 5, -s, 1),
            (4, 3, r, 1),
            (5, 4, s - r, 1),
            (6, 2, s, 1),
        ],
        (GroupId::So33, [Gamma, Beta]) => vec![
            (1, 2, -r, 1),
            (2, 6, r - s, -1),
            (3, 4, -s, 1),
            (4, 5, r, 1),
            (5, 3, s - r, -1),
            (6, 1, s, 1),
        ],
        (GroupId::So42, [Alpha]) => vec![
            (1, 1, 0, 1),
            (2, 6, -r, -1),
            (3, 3, 0, 1),
            (4, 4, 0, -1),
            (5, 5, 0, 1),
            (6, 2, r, -1),
        ],
        (GroupId::So42, [Beta]) => vec![
            (1, 2, -r, 1),
            (2, 1, r, -1),
            (3, 3, 0, 1),
            (4, 4, 0, 1),
            (5, 6, r, 1),
            (6, 5, -r, -1),
        ],
        _ => {
            return Err(KloosterError::Plucker(PluckerError::UnsupportedCell {
                group: g,
                word: word.name(),
            }))
        }
    };
    let mut m = MatQ::zero();
    for (i, j, e, sign) in data {
        m.set(i - 1, j - 1, pw(e) * rat_int(sign));
    }
    Ok(NormalizerRep {
        group: g,
        word: word.clone(),
        r: r as u32,
        s: s as u32,
        matrix: m,
    })
}

/// The displayed cell representative with the coset values substituted.
pub fn representative(
    g: GroupId,
    word: &WeylWord,
    p: Prime,
    params: &CellParams,
) -> Result<MatQ, KloosterError> {
    use Letter::*;
    let q = p.get();
    let r = params.r as i64;
    let s = params.s.unwrap_or(0) as i64;
    let pw = |e: i64| p_pow(q, e);
    let res = |name: &str| rat_int(params.residue(name) as i64);
    let mut m = MatQ::zero();
    let set = |m: &mut MatQ, i: usize, j: usize, v: Rat| m.set(i - 1, j - 1, v);
    match (g, word.letters()) {
        (_, []) => return Ok(MatQ::identity()),
        (GroupId::So33, [Alpha]) => {
            set(&mut m, 1, 1, Rat::one());
            set(&mut m, 2, 3, pw(-r));
            set(&mut m, 3, 2, -pw(r));
            set(&mut m, 3, 3, res("v45"));
            set(&mut m, 4, 4, Rat::one());
            set(&mut m, 5, 5, res("v45"));
            set(&mut m, 5, 6, pw(r));
            set(&mut m, 6, 5, -pw(-r));
        }
        (GroupId::So33, [Beta]) => {
            set(&mut m, 1, 2, pw(-r));
            set(&mut m, 2, 1, -pw(r));
            set(&mut m, 2, 2, res("v4"));
            set(&mut m, 3, 3, Rat::one());
            set(&mut m, 4, 4, res("v4"));
            set(&mut m, 4, 5, pw(r));
            set(&mut m, 5, 4, -pw(-r));
            set(&mut m, 6, 6, Rat::one());
        }
        (GroupId::So33, [Gamma]) => {
            set(&mut m, 1, 1, Rat::one());
            set(&mut m, 2, 6, -pw(-r));
            set(&mut m, 3, 5, pw(-r));
            set(&mut m, 4, 4, Rat::one());
            set(&mut m, 5, 3, -pw(r));
            set(&mut m, 5, 5, res("v45"));
            set(&mut m, 6, 2, pw(r));
            set(&mut m, 6, 6, res("v45"));
        }
        (GroupId::So33, [Alpha, Beta]) => {
            set(&mut m, 1, 2, pw(-r));
            set(&mut m, 2, 3, pw(r - s));
            set(&mut m, 3, 1, pw(s));
            set(&mut m, 3, 2, -(res("v4") * pw(s - r)));
            set(&mut m, 3, 3, res("v45"));
            set(&mut m, 4, 4, res("v4"));
            set(&mut m, 4, 5, pw(r));
            set(&mut m, 5, 4, -(res("v45") * pw(-r)));
            set(&mut m, 5, 6, pw(s - r));
            set(&mut m, 6, 4, pw(-s));
        }
        (GroupId::So33, [Alpha, Gamma]) => {
            let big_r = r + s;
            let big_s = 2 * r;
            set(&mut m, 1, 1, Rat::one());
            set(&mut m, 2, 5, -pw(-big_r));
            set(&mut m, 3, 5, res("v34") * pw(-big_s));
            set(&mut m, 3, 6, -pw(big_r - big_s));
            set(&mut m, 4, 4, Rat::one());
            set(&mut m, 5, 2, -pw(big_r));
            set(&mut m, 5, 3, -res("v34"));
            set(&mut m, 5, 5, -(res("v34") * res("v46") * pw(-big_r)));
            set(&mut m, 5, 6, res("v46"));
            set(&mut m, 6, 3, -pw(big_s - big_r));
            set(&mut m, 6, 5, -(res("v46") * pw(big_s - 2 * big_r)));
        }
        (GroupId::So33, [Beta, Alpha]) => {
            set(&mut m, 1, 3, pw(-r));
            set(&mut m, 2, 1, -pw(r - s));
            set(&mut m, 2, 3, res("v4") * pw(-s));
            set(&mut m, 3, 2, -pw(s));
            set(&mut m, 3, 3, res("v5") * pw(s - r));
            set(&mut m, 4, 4, res("v4"));
            set(&mut m, 4, 5, res("v5"));
            set(&mut m, 4, 6, pw(r));
            set(&mut m, 5, 4, -pw(s - r));
            set(&mut m, 6, 5, -pw(-s));
        }
        (GroupId::So33, [Beta, Gamma]) => {
            set(&mut m, 1, 6, pw(-r));
            set(&mut m, 2, 1, pw(r - s));
            set(&mut m, 2, 6, -(res("v4") * pw(-s)));
            set(&mut m, 3, 5, pw(-s));
            set(&mut m, 4, 3, pw(r));
            set(&mut m, 4, 4, res("v4"));
            set(&mut m, 4, 5, res("v5"));
            set(&mut m, 5, 4, pw(s - r));
            set(&mut m, 6, 2, pw(s));
            set(&mut m, 6, 6, -(res("v5") * pw(s - r)));
        }
        (GroupId::So33, [Gamma, Beta]) => {
            let t = 2 * s;
            set(&mut m, 1, 2, pw(-r));
            set(&mut m, 2, 6, -pw(r - s));
            set(&mut m, 3, 4, pw(-s));
            set(&mut m, 4, 4, res("v4"));
            set(&mut m, 4, 5, pw(r));
            set(&mut m, 5, 3, -pw(s - r));
            set(&mut m, 5, 4, -(res("v45") * pw(-r)));
            set(&mut m, 6, 1, pw(t - s));
            set(&mut m, 6, 2, -(res("v4") * pw(t - r - s)));
            set(&mut m, 6, 6, -(res("v45") * pw(t - 2 * s)));
        }
        (GroupId::So42, [Alpha]) => {
            let a = res("v35");
            let b = res("v45");
            let half = p_pow(2, -1);
            set(&mut m, 1, 1, Rat::one());
            set(&mut m, 2, 6, -pw(-r));
            set(&mut m, 3, 3, Rat::one());
            set(&mut m, 3, 6, -(&a * pw(-r)));
            set(&mut m, 4, 4, -Rat::one());
            set(&mut m, 4, 6, &b * pw(-r));
            set(&mut m, 5, 5, Rat::one());
            set(&mut m, 6, 2, -pw(r));
            set(&mut m, 6, 3, -a.clone());
            set(&mut m, 6, 4, -b.clone());
            set(&mut m, 6, 6, half * (&a * &a + &b * &b) * pw(-r));
        }
        (GroupId::So42, [Beta]) => {
            set(&mut m, 1, 2, pw(-r));
            set(&mut m, 2, 1, -pw(r));
            set(&mut m, 2, 2, res("v5"));
            set(&mut m, 3, 3, Rat::one());
            set(&mut m, 4, 4, Rat::one());
            set(&mut m, 5, 5, res("v5"));
            set(&mut m, 5, 6, pw(r));
            set(&mut m, 6, 5, -pw(-r));
        }
        _ => {
            return Err(KloosterError::Plucker(PluckerError::UnsupportedCell {
                group: g,
                word: word.name(),
            }))
        }
    }
    Ok(m)
}

/// Canonical inverse of `x` modulo p^k, or 0 when k = 0 or x is not a
/// unit. The zero convention matches the degenerate coset parameters.
fn inv0(x: u64, p: u64, k: u32) -> u64 {
    if k == 0 {
        return 0;
    }
    let pk = p.pow(k);
    match inv_mod_u64(x % pk, pk) {
        Some(v) => v,
        None => 0,
    }
}

/// The unipotent factor moving a cell representative into the integral
/// points, as the six free coordinates of the unipotent group.
fn integralizer_params(
    g: GroupId,
    word: &WeylWord,
    p: Prime,
    params: &CellParams,
) -> [Rat; 6] {
    use Letter::*;
    let q = p.get();
    let r = params.r;
    let s = params.s.unwrap_or(0);
    let r64 = r as i64;
    let s64 = s as i64;
    let pw = |e: i64| p_pow(q, e);
    let big = |x: u64| rat_int(x as i64);
    let mut par = [
        Rat::zero(),
        Rat::zero(),
        Rat::zero(),
        Rat::zero(),
        Rat::zero(),
        Rat::zero(),
    ];
    // Parameter slots: (x, y, z, t, u, v).
    match (g, word.letters()) {
        (_, []) => {}
        (GroupId::So33, [Alpha]) => {
            if r > 0 {
                let vbar = inv0(params.residue("v45"), q, r);
                par[4] = -(big(vbar) * pw(-r64));
            }
        }
        (GroupId::So33, [Beta]) => {
            if r > 0 {
                let vbar = inv0(params.residue("v4"), q, r);
                par[0] = -(big(vbar) * pw(-r64));
            }
        }
        (GroupId::So33, [Gamma]) => {
            if r > 0 {
                let vbar = inv0(params.residue("v45"), q, r);
                par[5] = big(vbar) * pw(-r64);
            }
        }
        (GroupId::So33, [Alpha, Beta]) => {
            if r == 0 {
                let vbar45 = inv0(params.residue("v45"), q, s);
                par[4] = -(big(vbar45) * pw(-s64));
            } else {
                let v4bar = inv0(params.residue("v4"), q, s);
                par[0] = -(big(v4bar) * big(params.residue("v45")) * pw(-r64));
                par[1] = big(v4bar) * pw(-s64);
                par[4] = -(big(inv0(params.residue("v45"), q, s)) * pw(r64 - s64));
            }
        }
        (GroupId::So33, [Alpha, Gamma]) => {
            // The two residues factor as p^r * z and p^s * w.
            let z = params.residue("v34") / q.pow(r);
            let w = params.residue("v46") / q.pow(s);
            par[4] = big(inv0(z, q, s)) * pw(-s64);
            par[5] = -(big(inv0(w, q, r)) * pw(-r64));
        }
        (GroupId::So33, [Beta, Alpha]) => {
            let v4 = params.residue("v4");
            let v5 = params.residue("v5");
            if s == 0 {
                if r > 0 {
                    par[0] = -(big(inv0(v4, q, r)) * pw(-r64));
                }
            } else if r == s {
                let ebar = inv0(v5, q, s);
                par[1] = -(big(ebar) * pw(-r64));
                par[4] = -(big(ebar) * big(v4) * pw(-r64));
            } else {
                let e = v5 / q.pow(r - s);
                let ebar = inv0(e, q, s);
                let v4bar = inv0(v4, q, r);
                par[0] = -(big(v4bar) * pw(s64 - r64));
                par[1] = big(ebar) * (big(v4bar) * big(v4) - Rat::one()) * pw(-r64);
                par[4] = -(big(ebar) * big(v4) * pw(-s64));
            }
        }
        (GroupId::So33, [Beta, Gamma]) => {
            let v4 = params.residue("v4");
            let v5 = params.residue("v5");
            let e = if r >= s && q.pow(r - s) > 0 {
                v5 / q.pow(r - s)
            } else {
                v5
            };
            let v4bar = inv0(v4, q, r);
            let ebar = inv0(e, q, s);
            par[0] = big(v4bar) * pw(s64 - r64);
            par[3] = big(ebar) * (Rat::one() - big(v4bar) * big(v4)) * pw(-r64);
            par[5] = -(big(ebar) * big(v4) * pw(-s64));
        }
        (GroupId::So33, [Gamma, Beta]) => {
            let v4 = params.residue("v4");
            let v45 = params.residue("v45");
            let v4bar = inv0(v4, q, r);
            par[0] = -(big(v4bar) * big(v45) * pw(-r64));
            par[3] = big(v4bar) * pw(-s64);
            par[5] = -(big(inv0(v45, q, s)) * pw(r64 - s64));
        }
        (GroupId::So42, [Alpha]) => {
            if r > 0 {
                let a = params.residue("v35") as i64;
                let b = params.residue("v45") as i64;
                let delta = rat_int(a * a + b * b);
                par[4] = rat_int(-2 * a) / delta.clone();
                par[5] = rat_int(2 * b) / delta;
            }
        }
        (GroupId::So42, [Beta]) => {
            if r > 0 {
                let vbar = inv0(params.residue("v5"), q, r);
                par[0] = -(big(vbar) * pw(-r64));
            }
        }
        _ => unreachable!("unsupported word was validated earlier"),
    }
    par
}

/// Moves the cell representative into the integral points: returns the
/// unipotent factor and the integral product.
pub fn integralize(
    a: &MatQ,
    g: GroupId,
    word: &WeylWord,
    p: Prime,
    params: &CellParams,
) -> Result<(MatQ, MatQ), KloosterError> {
    let gamma = unipotent(g, &integralizer_params(g, word, p, params));
    let b = gamma.mul(a);
    if !is_p_integral(&b, p) {
        return Err(KloosterError::IntegralizationFailed {
            word: word.name(),
            params: format!("{:?}", params),
        });
    }
    Ok((gamma, b))
}

/// The two unipotent Bruhat factors of an integral representative.
#[derive(Debug, Clone)]
pub struct BruhatFactors {
    pub u: MatQ,
    pub uprime: MatQ,
}

/// Splits `b = u * n * u'`, with `u'` read off the cell representative
/// (`rep = n * u'`) and `u` recovered by exact division. The identity is
/// verified by multiplication before returning.
pub fn bruhat_factor(
    b: &MatQ,
    n: &NormalizerRep,
    rep: &MatQ,
) -> Result<BruhatFactors, KloosterError> {
    let g = n.group;
    let n_inv = n
        .matrix
        .inverse()
        .map_err(|_| KloosterError::FactorizationMismatch {
            word: n.word.name(),
            params: "normalizer not invertible".into(),
        })?;
    let uprime = n_inv.mul(rep);
    let mismatch = || KloosterError::FactorizationMismatch {
        word: n.word.name(),
        params: String::new(),
    };
    if !in_unipotent(g, &uprime) {
        return Err(mismatch());
    }
    // The second factor must lie in the opposite-side slice attached to
    // the word: conjugating by the Weyl matrix lands in the opposite
    // unipotent subgroup, whose positional shape is the transpose of U.
    let w = n.word.matrix();
    let conj = w.mul(&uprime).mul(&w.inverse().map_err(|_| mismatch())?);
    if !in_unipotent(g, &conj.transpose()) {
        return Err(mismatch());
    }
    let u = b.mul(&rep.inverse().map_err(|_| mismatch())?);
    if !in_unipotent(g, &u) {
        return Err(mismatch());
    }
    if u.mul(&n.matrix).mul(&uprime) != *b {
        return Err(mismatch());
    }
    Ok(BruhatFactors { u, uprime })
}

/// The p-adic fractional part of a rational, as a reduced pair
/// (numerator, modulus exponent) with numerator in [0, p^k).
pub fn frac_exponent(q: &Rat, p: Prime) -> Result<(u64, u32), KloosterError> {
    match padic_val(q, p) {
        PAdicVal::Infinity => Ok((0, 0)),
        PAdicVal::Finite(v) if v >= 0 => Ok((0, 0)),
        PAdicVal::Finite(v) => {
            let k = (-v) as u32;
            let pk = p.pow(k).map_err(|_| KloosterError::Overflow)?;
            let pk_big = BigInt::from(pk);
            // q = numer / (p^k * d') with d' prime to p.
            let dprime: BigInt = q.denom() / BigInt::from(p.get()).pow(k);
            let num_mod = q.numer().mod_floor(&pk_big).to_u64().expect("reduced");
            let dp_mod = dprime.mod_floor(&pk_big).to_u64().expect("reduced");
            let inv = inv_mod_u64(dp_mod, pk).expect("prime-to-p denominator");
            Ok((mul_mod(num_mod, inv, pk), k))
        }
    }
}

/// e(q) for a rational with p-power-times-unit denominator.
pub fn e_frac(q: &Rat, p: Prime) -> Result<CycloSum, KloosterError> {
    let (num, k) = frac_exponent(q, p)?;
    Ok(CycloSum::term(num as i64, p, k))
}

/// The marked entries the characters read, in order (x, y, z).
fn marked_entries(g: GroupId, u: &MatQ) -> [Rat; 3] {
    match g {
        GroupId::So33 => [u.get(0, 1).clone(), u.get(1, 2).clone(), u.get(1, 5).clone()],
        GroupId::So42 => [u.get(0, 1).clone(), u.get(1, 2).clone(), u.get(1, 3).clone()],
    }
}

/// Character value on a unipotent matrix: e of the weighted sum of the
/// three marked entries, taken p-adically.
pub fn char_eval(
    chi: &CharacterTriple,
    u: &MatQ,
    g: GroupId,
    p: Prime,
) -> Result<CycloSum, KloosterError> {
    if !in_unipotent(g, u) {
        return Err(KloosterError::NotUnipotentForm);
    }
    let [x, y, z] = marked_entries(g, u);
    let arg = rat_int(chi.m1) * x + rat_int(chi.m2) * y + rat_int(chi.m3) * z;
    e_frac(&arg, p)
}

/// One fully processed coset element.
#[derive(Debug, Clone)]
pub struct SetElement {
    pub params: CellParams,
    pub rep: MatQ,
    pub u: MatQ,
    pub integral: MatQ,
    pub uprime: MatQ,
    /// Fractional parts of the marked entries of u and u', as reduced
    /// (numerator, exponent) pairs.
    pub u_fracs: [(u64, u32); 3],
    pub uprime_fracs: [(u64, u32); 3],
}

impl SetElement {
    pub fn to_json(&self, p: Prime) -> serde_json::Value {
        json!({
            "params": self.params,
            "u": self.u.to_json(),
            "uprime": self.uprime.to_json(),
            "integral": self.integral.to_json(),
            "u_fracs": self.u_fracs.iter().map(|(n, k)| json!([n, k, p.get()])).collect::<Vec<_>>(),
            "uprime_fracs": self.uprime_fracs.iter().map(|(n, k)| json!([n, k, p.get()])).collect::<Vec<_>>(),
        })
    }
}

/// The enumerated coset set of one cell, with every element factored and
/// its character data extracted.
#[derive(Debug, Clone)]
pub struct KloostermanSet {
    pub group: GroupId,
    pub word: WeylWord,
    pub prime: Prime,
    pub r: u32,
    pub s: Option<u32>,
    pub elements: Vec<SetElement>,
    /// Common modulus exponent for all character exponents in the set.
    pub k_exp: u32,
}

impl KloostermanSet {
    pub fn build(
        g: GroupId,
        word: &WeylWord,
        p: Prime,
        r: u32,
        s: Option<u32>,
        budget: u64,
    ) -> Result<KloostermanSet, KloosterError> {
        let s_val = s.unwrap_or(0);
        let n = normalizer_rep(g, word, p, r, s_val)?;
        let cells = enumerate_cell(g, word, p, r, s_val, budget)?;
        let mut elements = Vec::with_capacity(cells.len());
        let mut k_exp = 0u32;
        for params in cells {
            let rep = representative(g, word, p, &params)?;
            let (_, b) = integralize(&rep, g, word, p, &params)?;
            let factors = bruhat_factor(&b, &n, &rep)?;
            let mut u_fracs = [(0u64, 0u32); 3];
            let mut uprime_fracs = [(0u64, 0u32); 3];
            for (i, e) in marked_entries(g, &factors.u).iter().enumerate() {
                u_fracs[i] = frac_exponent(e, p)?;
                k_exp = k_exp.max(u_fracs[i].1);
            }
            for (i, e) in marked_entries(g, &factors.uprime).iter().enumerate() {
                uprime_fracs[i] = frac_exponent(e, p)?;
                k_exp = k_exp.max(uprime_fracs[i].1);
            }
            elements.push(SetElement {
                params,
                rep,
                u: factors.u,
                integral: b,
                uprime: factors.uprime,
                u_fracs,
                uprime_fracs,
            });
        }
        Ok(KloostermanSet {
            group: g,
            word: word.clone(),
            prime: p,
            r,
            s,
            elements,
            k_exp,
        })
    }

    /// Exponent of one element's term, modulo p^k_exp.
    fn element_exponent(
        &self,
        el: &SetElement,
        psi: &CharacterTriple,
        psi_prime: &CharacterTriple,
        pk: u64,
    ) -> u64 {
        let lift = |(num, k): (u64, u32)| num * self.prime.get().pow(self.k_exp - k);
        let reduce = |m: i64| (m as i128).rem_euclid(pk as i128) as u64;
        let mut e = 0u64;
        for (coef, frac) in [psi.m1, psi.m2, psi.m3].iter().zip(el.u_fracs.iter()) {
            e = (e + mul_mod(reduce(*coef), lift(*frac) % pk, pk)) % pk;
        }
        for (coef, frac) in [psi_prime.m1, psi_prime.m2, psi_prime.m3]
            .iter()
            .zip(el.uprime_fracs.iter())
        {
            e = (e + mul_mod(reduce(*coef), lift(*frac) % pk, pk)) % pk;
        }
        e
    }

    /// The sum of the two character values over the whole set.
    pub fn evaluate(&self, psi: &CharacterTriple, psi_prime: &CharacterTriple) -> CycloSum {
        let pk = self.prime.pow(self.k_exp).expect("modulus fits");
        if pk <= 1 << 22 {
            let mut hist = vec![0i64; pk as usize];
            for el in &self.elements {
                hist[self.element_exponent(el, psi, psi_prime, pk) as usize] += 1;
            }
            CycloSum::from_exponent_counts(self.prime, self.k_exp, &hist)
        } else {
            let mut acc = CycloSum::zero();
            for el in &self.elements {
                let e = self.element_exponent(el, psi, psi_prime, pk);
                acc = acc
                    .add(&CycloSum::term(e as i64, self.prime, self.k_exp))
                    .expect("same field");
            }
            acc
        }
    }

    /// Shards the element list round-robin, sums each shard separately and
    /// reduces; the result must not depend on the shard count.
    pub fn evaluate_sharded(
        &self,
        psi: &CharacterTriple,
        psi_prime: &CharacterTriple,
        shards: usize,
    ) -> CycloSum {
        let shards = shards.max(1);
        let pk = self.prime.pow(self.k_exp).expect("modulus fits");
        let mut partials = vec![CycloSum::zero(); shards];
        for (i, el) in self.elements.iter().enumerate() {
            let e = self.element_exponent(el, psi, psi_prime, pk);
            partials[i % shards] = partials[i % shards]
                .add(&CycloSum::term(e as i64, self.prime, self.k_exp))
                .expect("same field");
        }
        let mut acc = CycloSum::zero();
        for part in partials {
            acc = acc.add(&part).expect("same field");
        }
        acc
    }
}

/// The enumeration-based evaluator: builds the coset set and sums the
/// character values.
pub fn kloosterman_enumerate(spec: &KloostermanSpec, budget: u64) -> Result<CycloSum, KloosterError> {
    spec.validate()?;
    let set = KloostermanSet::build(spec.group, &spec.word, spec.prime, spec.r, spec.s, budget)?;
    Ok(set.evaluate(&spec.psi, &spec.psi_prime))
}

pub fn kloosterman_enumerate_default(spec: &KloostermanSpec) -> Result<CycloSum, KloosterError> {
    kloosterman_enumerate(spec, DEFAULT_BUDGET)
}

/// Independent rank-2 oracle: enumerates the integral coset pairs of the
/// 2x2 cell directly from its defining conditions and sums the two
/// character values.
pub fn gl2_bruteforce(m: i64, mprime: i64, p: Prime, r: u32) -> CycloSum {
    let pk = p.pow(r).expect("modulus fits");
    if r == 0 {
        return CycloSum::one();
    }
    let mut hist = vec![0i64; pk as usize];
    for x_num in 0..pk {
        for y_num in 0..pk {
            // x = x_num / p^r, y = y_num / p^r; the off-diagonal entry
            // -p^(-2r) + x y must land in p^(-r) Z_p.
            let xy_minus = rat_int(x_num as i64) * rat_int(y_num as i64)
                * p_pow(p.get(), -2 * r as i64)
                - p_pow(p.get(), -2 * (r as i64));
            if padic_val(&xy_minus, p) >= PAdicVal::Finite(-(r as i64)) {
                let e = (mul_mod(
                    (m as i128).rem_euclid(pk as i128) as u64,
                    x_num,
                    pk,
                ) + mul_mod(
                    (mprime as i128).rem_euclid(pk as i128) as u64,
                    y_num,
                    pk,
                )) % pk;
                hist[e as usize] += 1;
            }
        }
    }
    CycloSum::from_exponent_counts(p, r, &hist)
}

/// Euler phi of a prime power.
pub fn phi_prime_power(p: u64, r: u32) -> u64 {
    if r == 0 {
        1
    } else {
        p.pow(r) - p.pow(r - 1)
    }
}
