//! Exact 6x6 rational matrix algebra for the two orthogonal groups:
//! membership and integrality predicates, bottom-row minors, the
//! unipotent parametrizations, and Weyl-generator matrices.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::modarith::{padic_val, Prime};

pub type Rat = BigRational;

pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

pub fn rat_frac(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// p^e as an exact rational, for any sign of e.
pub fn p_pow(p: u64, e: i64) -> Rat {
    let mag = BigInt::from(p).pow(e.unsigned_abs() as u32);
    if e >= 0 {
        Rat::from_integer(mag)
    } else {
        Rat::new(BigInt::one(), mag)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatError {
    ShapeMismatch { detail: String },
    Singular,
}

impl fmt::Display for MatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatError::ShapeMismatch { detail } => write!(f, "shape mismatch: {detail}"),
            MatError::Singular => write!(f, "matrix is singular"),
        }
    }
}

impl std::error::Error for MatError {}

/// Which of the two 6x6 orthogonal groups a computation lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum GroupId {
    So33,
    So42,
}

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupId::So33 => write!(f, "so33"),
            GroupId::So42 => write!(f, "so42"),
        }
    }
}

/// An exact 6x6 rational matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatQ {
    entries: Vec<Rat>, // row-major, 36 entries
}

impl MatQ {
    pub fn zero() -> MatQ {
        MatQ {
            entries: vec![Rat::zero(); 36],
        }
    }

    pub fn identity() -> MatQ {
        let mut m = MatQ::zero();
        for i in 0..6 {
            m.set(i, i, Rat::one());
        }
        m
    }

    pub fn from_fn(f: impl Fn(usize, usize) -> Rat) -> MatQ {
        let mut m = MatQ::zero();
        for i in 0..6 {
            for j in 0..6 {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn from_i64_rows(rows: [[i64; 6]; 6]) -> MatQ {
        MatQ::from_fn(|i, j| rat_int(rows[i][j]))
    }

    /// Entry accessors are 0-based.
    pub fn get(&self, i: usize, j: usize) -> &Rat {
        &self.entries[i * 6 + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Rat) {
        self.entries[i * 6 + j] = v;
    }

    pub fn mul(&self, other: &MatQ) -> MatQ {
        let mut out = MatQ::zero();
        for i in 0..6 {
            for k in 0..6 {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..6 {
                    let b = other.get(k, j);
                    if !b.is_zero() {
                        let cur = out.get(i, j) + a * b;
                        out.set(i, j, cur);
                    }
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> MatQ {
        MatQ::from_fn(|i, j| self.get(j, i).clone())
    }

    pub fn det(&self) -> Rat {
        det_sub(&(0..6).collect::<Vec<_>>(), &(0..6).collect::<Vec<_>>(), self)
    }

    /// Exact inverse by Gauss-Jordan elimination.
    pub fn inverse(&self) -> Result<MatQ, MatError> {
        let mut a = self.entries.clone();
        let mut inv = MatQ::identity().entries;
        for col in 0..6 {
            let pivot = (col..6)
                .find(|&r| !a[r * 6 + col].is_zero())
                .ok_or(MatError::Singular)?;
            if pivot != col {
                for j in 0..6 {
                    a.swap(pivot * 6 + j, col * 6 + j);
                    inv.swap(pivot * 6 + j, col * 6 + j);
                }
            }
            let piv = a[col * 6 + col].clone();
            for j in 0..6 {
                a[col * 6 + j] /= &piv;
                inv[col * 6 + j] /= &piv;
            }
            for r in 0..6 {
                if r == col || a[r * 6 + col].is_zero() {
                    continue;
                }
                let factor = a[r * 6 + col].clone();
                for j in 0..6 {
                    let av = &a[col * 6 + j] * &factor;
                    a[r * 6 + j] -= av;
                    let iv = &inv[col * 6 + j] * &factor;
                    inv[r * 6 + j] -= iv;
                }
            }
        }
        Ok(MatQ { entries: inv })
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<Vec<String>> = (0..6)
            .map(|i| {
                (0..6)
                    .map(|j| {
                        let e = self.get(i, j);
                        format!("{}/{}", e.numer(), e.denom())
                    })
                    .collect()
            })
            .collect();
        json!(rows)
    }
}

impl fmt::Display for MatQ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..6 {
            write!(f, "[")?;
            for j in 0..6 {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", self.get(i, j))?;
            }
            writeln!(f, "]")?;
        }
        Ok(())
    }
}

/// Determinant of the submatrix on the given (0-based) rows and columns,
/// by cofactor expansion along the first selected row.
fn det_sub(rows: &[usize], cols: &[usize], m: &MatQ) -> Rat {
    if rows.is_empty() {
        return Rat::one();
    }
    if rows.len() == 1 {
        return m.get(rows[0], cols[0]).clone();
    }
    let mut acc = Rat::zero();
    let sub_rows = &rows[1..];
    for (idx, &c) in cols.iter().enumerate() {
        let a = m.get(rows[0], c);
        if a.is_zero() {
            continue;
        }
        let sub_cols: Vec<usize> = cols
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != idx)
            .map(|(_, &cc)| cc)
            .collect();
        let minor = det_sub(sub_rows, &sub_cols, m);
        let signed = if idx % 2 == 0 { a * &minor } else { -(a * &minor) };
        acc += signed;
    }
    acc
}

/// The fixed anti-diagonal-block bilinear form preserved by each group.
pub fn gram_matrix(g: GroupId) -> MatQ {
    match g {
        GroupId::So33 => MatQ::from_fn(|i, j| {
            if i + 3 == j || j + 3 == i {
                Rat::one()
            } else {
                Rat::zero()
            }
        }),
        GroupId::So42 => MatQ::from_fn(|i, j| {
            let pairs = [(0, 4), (1, 5), (4, 0), (5, 1), (2, 2), (3, 3)];
            if pairs.contains(&(i, j)) {
                Rat::one()
            } else {
                Rat::zero()
            }
        }),
    }
}

/// Exact membership: A M A^t = M and det A = 1.
pub fn is_in_group(a: &MatQ, g: GroupId) -> bool {
    let m = gram_matrix(g);
    a.mul(&m).mul(&a.transpose()) == m && a.det() == Rat::one()
}

/// True when every entry has nonnegative p-adic valuation.
pub fn is_p_integral(a: &MatQ, p: Prime) -> bool {
    a.entries.iter().all(|e| padic_val(e, p).is_nonneg())
}

/// Minor of `a` on the given rows and columns, both 1-based and strictly
/// increasing in the column set.
pub fn bottom_minor(a: &MatQ, rows: &[usize], cols: &[usize]) -> Result<Rat, MatError> {
    if rows.len() != cols.len() {
        return Err(MatError::ShapeMismatch {
            detail: format!("{} rows vs {} columns", rows.len(), cols.len()),
        });
    }
    for w in cols.windows(2) {
        if w[0] >= w[1] {
            return Err(MatError::ShapeMismatch {
                detail: "column set must be strictly increasing".into(),
            });
        }
    }
    for &ix in rows.iter().chain(cols.iter()) {
        if ix < 1 || ix > 6 {
            return Err(MatError::ShapeMismatch {
                detail: format!("index {ix} out of range"),
            });
        }
    }
    let rows0: Vec<usize> = rows.iter().map(|&r| r - 1).collect();
    let cols0: Vec<usize> = cols.iter().map(|&c| c - 1).collect();
    Ok(det_sub(&rows0, &cols0, a))
}

/// Upper unipotent element of SO(3,3) with the six free coordinates
/// (x, y, z, t, u, v).
pub fn u33(par: &[Rat; 6]) -> MatQ {
    let [x, y, z, t, u, v] = par;
    let mut m = MatQ::identity();
    m.set(0, 1, x.clone());
    m.set(0, 2, y.clone());
    m.set(0, 3, -(x * z) - y * t);
    m.set(0, 4, z.clone());
    m.set(0, 5, t.clone());
    m.set(1, 2, u.clone());
    m.set(1, 3, -z.clone() - y * v - t * u + u * v * x);
    m.set(1, 4, -(u * v));
    m.set(1, 5, v.clone());
    m.set(2, 3, -t.clone() + x * v);
    m.set(2, 4, -v.clone());
    m.set(4, 3, -x.clone());
    m.set(5, 3, x * u - y);
    m.set(5, 4, -u.clone());
    m
}

/// Upper unipotent element of SO(4,2) with the six free coordinates
/// (x, y, z, t, u, v).
pub fn u42(par: &[Rat; 6]) -> MatQ {
    let [x, y, z, t, u, v] = par;
    let half = rat_frac(1, 2);
    let mut m = MatQ::identity();
    m.set(0, 1, x.clone());
    m.set(0, 2, y.clone());
    m.set(0, 3, z.clone());
    m.set(0, 4, -(&half * (y * y + z * z)) - x * t);
    m.set(0, 5, t.clone());
    m.set(1, 2, u.clone());
    m.set(1, 3, v.clone());
    m.set(1, 4, &half * x * (u * u + v * v) - y * u - z * v - t);
    m.set(1, 5, -(&half * (u * u + v * v)));
    m.set(2, 4, x * u - y);
    m.set(2, 5, -u.clone());
    m.set(3, 4, x * v - z);
    m.set(3, 5, -v.clone());
    m.set(5, 4, -x.clone());
    m
}

pub fn unipotent(g: GroupId, par: &[Rat; 6]) -> MatQ {
    match g {
        GroupId::So33 => u33(par),
        GroupId::So42 => u42(par),
    }
}

/// Reads the six free coordinates back off a candidate matrix.
pub fn unipotent_params(g: GroupId, m: &MatQ) -> [Rat; 6] {
    match g {
        GroupId::So33 => [
            m.get(0, 1).clone(),
            m.get(0, 2).clone(),
            m.get(0, 4).clone(),
            m.get(0, 5).clone(),
            m.get(1, 2).clone(),
            m.get(1, 5).clone(),
        ],
        GroupId::So42 => [
            m.get(0, 1).clone(),
            m.get(0, 2).clone(),
            m.get(0, 3).clone(),
            m.get(0, 5).clone(),
            m.get(1, 2).clone(),
            m.get(1, 3).clone(),
        ],
    }
}

/// Positional membership test for the upper unipotent subgroup: extract
/// the free coordinates and compare against the rebuilt matrix.
pub fn in_unipotent(g: GroupId, m: &MatQ) -> bool {
    unipotent(g, &unipotent_params(g, m)) == *m
}

/// Weyl generator matrices, exactly as fixed for each group.
pub fn weyl_alpha(g: GroupId) -> MatQ {
    match g {
        GroupId::So33 => MatQ::from_i64_rows([
            [1, 0, 0, 0, 0, 0],
            [0, 0, 1, 0, 0, 0],
            [0, 1, 0, 0, 0, 0],
            [0, 0, 0, 1, 0, 0],
            [0, 0, 0, 0, 0, 1],
            [0, 0, 0, 0, 1, 0],
        ]),
        GroupId::So42 => MatQ::from_i64_rows([
            [1, 0, 0, 0, 0, 0],
            [0, 0, 0, 0, 0, 1],
            [0, 0, 1, 0, 0, 0],
            [0, 0, 0, -1, 0, 0],
            [0, 0, 0, 0, 1, 0],
            [0, 1, 0, 0, 0, 0],
        ]),
    }
}

pub fn weyl_beta(g: GroupId) -> MatQ {
    match g {
        GroupId::So33 => MatQ::from_i64_rows([
            [0, 1, 0, 0, 0, 0],
            [1, 0, 0, 0, 0, 0],
            [0, 0, 1, 0, 0, 0],
            [0, 0, 0, 0, 1, 0],
            [0, 0, 0, 1, 0, 0],
            [0, 0, 0, 0, 0, 1],
        ]),
        GroupId::So42 => MatQ::from_i64_rows([
            [0, 1, 0, 0, 0, 0],
            [1, 0, 0, 0, 0, 0],
            [0, 0, 1, 0, 0, 0],
            [0, 0, 0, 1, 0, 0],
            [0, 0, 0, 0, 0, 1],
            [0, 0, 0, 0, 1, 0],
        ]),
    }
}

/// The third generator, present only for SO(3,3).
pub fn weyl_gamma() -> MatQ {
    MatQ::from_i64_rows([
        [1, 0, 0, 0, 0, 0],
        [0, 0, 0, 0, 0, 1],
        [0, 0, 0, 0, 1, 0],
        [0, 0, 0, 1, 0, 0],
        [0, 0, 1, 0, 0, 0],
        [0, 1, 0, 0, 0, 0],
    ])
}

/// Deterministic pseudo-random integral group element: a product of
/// `word_length` generators drawn from the one-parameter unipotents (upper
/// and lower, integer parameters in [-3, 3]) and the Weyl generators.
/// Every output lies in G(Z), hence is p-integral for every p.
pub fn random_group_element(g: GroupId, _p: Prime, seed: u64, word_length: usize) -> MatQ {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = MatQ::identity();
    for _ in 0..word_length {
        let kind = rng.gen_range(0..3u8);
        let factor = match kind {
            0 | 1 => {
                let slot = rng.gen_range(0..6usize);
                // The quadratic entries of the second group carry a /2, so
                // those slots need even parameters to stay integral.
                let needs_even = g == GroupId::So42 && matches!(slot, 1 | 2 | 4 | 5);
                let delta = loop {
                    let d = rng.gen_range(-3i64..=3);
                    if d != 0 && (!needs_even || d % 2 == 0) {
                        break d;
                    }
                };
                let mut par = [
                    Rat::zero(),
                    Rat::zero(),
                    Rat::zero(),
                    Rat::zero(),
                    Rat::zero(),
                    Rat::zero(),
                ];
                par[slot] = rat_int(delta);
                let up = unipotent(g, &par);
                if kind == 0 {
                    up
                } else {
                    // The transpose of a group element is again one, and the
                    // transpose of an upper unipotent is lower unipotent.
                    up.transpose()
                }
            }
            _ => match (g, rng.gen_range(0..3u8)) {
                (GroupId::So33, 0) => weyl_alpha(g),
                (GroupId::So33, 1) => weyl_beta(g),
                (GroupId::So33, _) => weyl_gamma(),
                (GroupId::So42, x) => {
                    if x == 0 {
                        weyl_alpha(g)
                    } else {
                        weyl_beta(g)
                    }
                }
            },
        };
        acc = acc.mul(&factor);
    }
    acc
}

/// True when every entry is an integer (denominator 1 after reduction).
pub fn is_integer_matrix(a: &MatQ) -> bool {
    (0..6).all(|i| (0..6).all(|j| a.get(i, j).denom().abs() == BigInt::one()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pr(x: u64) -> Prime {
        Prime::new(x).unwrap()
    }

    #[test]
    fn gram_is_symmetric() {
        for g in [GroupId::So33, GroupId::So42] {
            let m = gram_matrix(g);
            assert_eq!(m, m.transpose());
            assert!(is_in_group(&MatQ::identity(), g));
        }
    }

    #[test]
    fn perturbed_identity_leaves_group() {
        let mut m = MatQ::identity();
        m.set(0, 3, rat_int(1));
        // Still determinant 1 but the form is no longer preserved.
        assert!(!is_in_group(&m, GroupId::So33));
    }

    #[test]
    fn integrality_predicate() {
        let mut m = MatQ::identity();
        assert!(is_p_integral(&m, pr(3)));
        m.set(2, 4, rat_frac(1, 3));
        assert!(!is_p_integral(&m, pr(3)));
        // A unit denominator does not spoil p-integrality.
        m.set(2, 4, rat_frac(2, 5));
        assert!(is_p_integral(&m, pr(3)));
    }

    #[test]
    fn minors() {
        let id = MatQ::identity();
        assert_eq!(
            bottom_minor(&id, &[4, 5, 6], &[4, 5, 6]).unwrap(),
            Rat::one()
        );
        // The (1,2) coordinate built from rows 4 and 5.
        let mut m = MatQ::zero();
        m.set(3, 0, rat_int(2));
        m.set(3, 1, rat_int(3));
        m.set(4, 0, rat_int(5));
        m.set(4, 1, rat_int(7));
        let v12 = bottom_minor(&m, &[4, 5], &[1, 2]).unwrap();
        assert_eq!(v12, rat_int(2 * 7 - 3 * 5));
        assert!(bottom_minor(&id, &[4, 5], &[3, 3]).is_err());
        assert!(bottom_minor(&id, &[4, 5, 6], &[1, 2]).is_err());
    }

    #[test]
    fn unipotent_parametrizations_lie_in_group() {
        let cases = [
            [1i64, -2, 3, 0, 2, -1],
            [0, 0, 0, 0, 0, 0],
            [2, 1, -1, 3, -2, 2],
        ];
        for par in cases {
            let pr: [Rat; 6] = std::array::from_fn(|i| rat_int(par[i]));
            for g in [GroupId::So33, GroupId::So42] {
                let m = unipotent(g, &pr);
                assert!(is_in_group(&m, g), "group {:?} params {:?}", g, par);
                assert!(in_unipotent(g, &m));
            }
        }
        // Rational parameters as well.
        let pr: [Rat; 6] = [
            rat_frac(1, 3),
            rat_frac(-2, 9),
            rat_int(0),
            rat_frac(1, 2),
            rat_frac(5, 3),
            rat_frac(-1, 6),
        ];
        for g in [GroupId::So33, GroupId::So42] {
            assert!(is_in_group(&unipotent(g, &pr), g));
        }
    }

    #[test]
    fn weyl_generators_lie_in_group() {
        assert!(is_in_group(&weyl_alpha(GroupId::So33), GroupId::So33));
        assert!(is_in_group(&weyl_beta(GroupId::So33), GroupId::So33));
        assert!(is_in_group(&weyl_gamma(), GroupId::So33));
        assert!(is_in_group(&weyl_alpha(GroupId::So42), GroupId::So42));
        assert!(is_in_group(&weyl_beta(GroupId::So42), GroupId::So42));
    }

    #[test]
    fn random_elements_are_integral_group_members() {
        for g in [GroupId::So33, GroupId::So42] {
            assert_eq!(random_group_element(g, pr(3), 7, 0), MatQ::identity());
            for seed in 0..20u64 {
                let m = random_group_element(g, pr(3), seed, 8);
                assert!(is_in_group(&m, g));
                assert!(is_integer_matrix(&m));
                assert_eq!(m.det(), Rat::one());
                assert!(is_p_integral(&m, pr(5)));
            }
        }
    }

    #[test]
    fn membership_closed_under_multiplication() {
        for g in [GroupId::So33, GroupId::So42] {
            for seed in 0..10u64 {
                let a = random_group_element(g, pr(3), seed, 5);
                let b = random_group_element(g, pr(3), seed + 100, 5);
                assert!(is_in_group(&a.mul(&b), g));
            }
        }
    }

    #[test]
    fn inverse_and_det() {
        let a = random_group_element(GroupId::So33, pr(3), 12, 6);
        let inv = a.inverse().unwrap();
        assert_eq!(a.mul(&inv), MatQ::identity());
        assert!(MatQ::zero().inverse().is_err());
    }

    #[test]
    fn minor_multilinearity_spot_check() {
        // Scaling one selected column scales the minor; swapping two
        // selected columns flips its sign.
        let a = random_group_element(GroupId::So33, pr(3), 3, 6);
        let base = bottom_minor(&a, &[4, 5, 6], &[1, 3, 5]).unwrap();
        let mut scaled = a.clone();
        for r in 0..6 {
            let v = scaled.get(r, 2) * rat_int(4);
            scaled.set(r, 2, v);
        }
        assert_eq!(
            bottom_minor(&scaled, &[4, 5, 6], &[1, 3, 5]).unwrap(),
            base.clone() * rat_int(4)
        );
        let mut swapped = a.clone();
        for r in 0..6 {
            let x = swapped.get(r, 0).clone();
            let y = swapped.get(r, 2).clone();
            swapped.set(r, 0, y);
            swapped.set(r, 2, x);
        }
        assert_eq!(
            bottom_minor(&swapped, &[4, 5, 6], &[1, 3, 5]).unwrap(),
            -base
        );
    }
}
