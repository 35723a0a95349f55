//! The 62-coordinate Pluecker map for both groups, cell classification
//! from minor-vanishing patterns, per-level coprimality, and literal
//! enumeration of the double-coset parameter sets attached to each
//! supported Weyl word.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::matlin::{
    bottom_minor, is_in_group, p_pow, rat_int, weyl_alpha, weyl_beta, weyl_gamma, GroupId, MatQ,
    Rat,
};
use crate::modarith::{padic_val, PAdicVal, Prime};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PluckerError {
    NotInGroup,
    NotIntegral { position: String },
    InconsistentPattern,
    UnsupportedCell { group: GroupId, word: String },
    PowerConstraintViolated { word: String, r: u32, s: u32 },
    BudgetExceeded { needed: u64, budget: u64 },
}

impl fmt::Display for PluckerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PluckerError::NotInGroup => write!(f, "matrix is not in the group"),
            PluckerError::NotIntegral { position } => {
                write!(f, "coordinate {position} is not p-integral")
            }
            PluckerError::InconsistentPattern => {
                write!(f, "vanishing pattern matches no cell of the group")
            }
            PluckerError::UnsupportedCell { group, word } => {
                write!(f, "cell {word} is not supported on {group}")
            }
            PluckerError::PowerConstraintViolated { word, r, s } => {
                write!(f, "power pair (r, s) = ({r}, {s}) violates the {word} constraint")
            }
            PluckerError::BudgetExceeded { needed, budget } => {
                write!(f, "enumeration needs {needed} candidates, budget is {budget}")
            }
        }
    }
}

impl std::error::Error for PluckerError {}

/// Simple reflections indexing the supported cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Letter {
    Alpha,
    Beta,
    Gamma,
}

/// A reduced word in the simple reflections of one of the two groups.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct WeylWord {
    group: GroupId,
    letters: Vec<Letter>,
}

impl WeylWord {
    pub fn new(group: GroupId, letters: &[Letter]) -> Result<WeylWord, PluckerError> {
        let w = WeylWord {
            group,
            letters: letters.to_vec(),
        };
        if supported_words(group).contains(&w) {
            Ok(w)
        } else {
            Err(PluckerError::UnsupportedCell {
                group,
                word: w.name(),
            })
        }
    }

    pub fn group(&self) -> GroupId {
        self.group
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Number of power parameters the cell carries (0, 1 or 2).
    pub fn arity(&self) -> usize {
        self.letters.len()
    }

    pub fn name(&self) -> String {
        if self.letters.is_empty() {
            return "e".to_string();
        }
        self.letters
            .iter()
            .map(|l| match l {
                Letter::Alpha => 'a',
                Letter::Beta => 'b',
                Letter::Gamma => 'g',
            })
            .collect()
    }

    pub fn parse(group: GroupId, name: &str) -> Result<WeylWord, PluckerError> {
        let letters: Vec<Letter> = if name == "e" {
            vec![]
        } else {
            name.chars()
                .map(|c| match c {
                    'a' => Ok(Letter::Alpha),
                    'b' => Ok(Letter::Beta),
                    'g' => Ok(Letter::Gamma),
                    _ => Err(PluckerError::UnsupportedCell {
                        group,
                        word: name.to_string(),
                    }),
                })
                .collect::<Result<_, _>>()?
        };
        WeylWord::new(group, &letters)
    }

    /// The monomial matrix representing the word: the product of the
    /// generator matrices.
    pub fn matrix(&self) -> MatQ {
        let mut acc = MatQ::identity();
        for l in &self.letters {
            let gen = match l {
                Letter::Alpha => weyl_alpha(self.group),
                Letter::Beta => weyl_beta(self.group),
                Letter::Gamma => weyl_gamma(),
            };
            acc = acc.mul(&gen);
        }
        acc
    }

    /// Row constraint the power pair must satisfy for this cell.
    pub fn powers_ok(&self, r: u32, s: u32) -> bool {
        use Letter::*;
        match (self.group, self.letters.as_slice()) {
            (GroupId::So33, [Alpha, Beta]) | (GroupId::So33, [Gamma, Beta]) => r <= s,
            (GroupId::So33, [Beta, Alpha]) | (GroupId::So33, [Beta, Gamma]) => r >= s,
            _ => true,
        }
    }
}

impl fmt::Display for WeylWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

/// All cells with worked-out coset data: length <= 2 on SO(3,3) and
/// length <= 1 on SO(4,2).
pub fn supported_words(group: GroupId) -> Vec<WeylWord> {
    use Letter::*;
    let raw: Vec<Vec<Letter>> = match group {
        GroupId::So33 => vec![
            vec![],
            vec![Alpha],
            vec![Beta],
            vec![Gamma],
            vec![Alpha, Beta],
            vec![Alpha, Gamma],
            vec![Beta, Alpha],
            vec![Beta, Gamma],
            vec![Gamma, Beta],
        ],
        GroupId::So42 => vec![vec![], vec![Alpha], vec![Beta]],
    };
    raw.into_iter()
        .map(|letters| WeylWord { group, letters })
        .collect()
}

// ---------------------------------------------------------------------
// Index bookkeeping: the 62 coordinates are the strictly increasing
// subsets of {1..6} of sizes 1..5, lexicographic within each level.
// ---------------------------------------------------------------------

fn all_subsets() -> &'static Vec<Vec<Vec<usize>>> {
    static CELL: OnceLock<Vec<Vec<Vec<usize>>>> = OnceLock::new();
    CELL.get_or_init(|| {
        fn rec(start: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if k == 0 {
                out.push(cur.clone());
                return;
            }
            for i in start..=6 {
                cur.push(i);
                rec(i + 1, k - 1, cur, out);
                cur.pop();
            }
        }
        (1..=5usize)
            .map(|k| {
                let mut out = Vec::new();
                rec(1, k, &mut Vec::new(), &mut out);
                out
            })
            .collect()
    })
}

/// Subsets of size `level`, in lexicographic order.
pub fn level_subsets(level: usize) -> &'static [Vec<usize>] {
    &all_subsets()[level - 1]
}

fn level_offset(level: usize) -> usize {
    [0usize, 6, 21, 41, 56][level - 1]
}

/// A coordinate label: the level and the (1-based, increasing) subset.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PluckerIndex {
    pub level: usize,
    pub subset: Vec<usize>,
}

impl PluckerIndex {
    /// Parses a label such as "245" into level 3, subset {2,4,5}.
    pub fn parse(label: &str) -> PluckerIndex {
        let subset: Vec<usize> = label
            .chars()
            .map(|c| c.to_digit(10).expect("digit") as usize)
            .collect();
        assert!(
            subset.windows(2).all(|w| w[0] < w[1]) && !subset.is_empty() && subset.len() <= 5,
            "bad coordinate label {label}"
        );
        PluckerIndex {
            level: subset.len(),
            subset,
        }
    }

    pub fn flat(&self) -> usize {
        let pos = level_subsets(self.level)
            .iter()
            .position(|s| *s == self.subset)
            .expect("subset exists");
        level_offset(self.level) + pos
    }
}

/// The full vector of 62 coordinates of a group element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PluckerVector {
    group: GroupId,
    coords: Vec<Rat>, // flat, 62 entries
}

impl PluckerVector {
    pub fn group(&self) -> GroupId {
        self.group
    }

    pub fn coords(&self) -> &[Rat] {
        &self.coords
    }

    pub fn get(&self, label: &str) -> &Rat {
        &self.coords[PluckerIndex::parse(label).flat()]
    }

    fn from_map(group: GroupId, entries: &[(&str, Rat)]) -> PluckerVector {
        let mut coords = vec![Rat::zero(); 62];
        for (label, value) in entries {
            coords[PluckerIndex::parse(label).flat()] = value.clone();
        }
        PluckerVector { group, coords }
    }

    /// Scales every coordinate at one level (test helper for the
    /// coprimality predicate).
    pub fn scaled_level(&self, level: usize, factor: &Rat) -> PluckerVector {
        let mut out = self.clone();
        let start = level_offset(level);
        let len = level_subsets(level).len();
        for c in out.coords[start..start + len].iter_mut() {
            *c *= factor;
        }
        out
    }
}

/// Row sets defining the coordinates: the two groups mark different rows
/// at levels 1 and 2; levels 3..5 are always the bottom rows.
fn level_rows(g: GroupId, level: usize) -> Vec<usize> {
    match (g, level) {
        (GroupId::So33, 1) => vec![4],
        (GroupId::So33, 2) => vec![4, 5],
        (GroupId::So42, 1) => vec![5],
        (GroupId::So42, 2) => vec![5, 6],
        (_, 3) => vec![4, 5, 6],
        (_, 4) => vec![3, 4, 5, 6],
        (_, 5) => vec![2, 3, 4, 5, 6],
        _ => unreachable!(),
    }
}

/// All 62 minors of a group element, per the group's row conventions.
pub fn plucker_map(a: &MatQ, g: GroupId) -> Result<PluckerVector, PluckerError> {
    if !is_in_group(a, g) {
        return Err(PluckerError::NotInGroup);
    }
    let mut coords = Vec::with_capacity(62);
    for level in 1..=5usize {
        let rows = level_rows(g, level);
        for subset in level_subsets(level) {
            coords.push(bottom_minor(a, &rows, subset).expect("validated shape"));
        }
    }
    Ok(PluckerVector { group: g, coords })
}

/// Per-level coprimality: at every level the minimum p-adic valuation of
/// the coordinates must be zero.
pub fn coprimality_check(v: &PluckerVector, p: Prime) -> Result<bool, PluckerError> {
    for level in 1..=5usize {
        let start = level_offset(level);
        let len = level_subsets(level).len();
        let mut min = PAdicVal::Infinity;
        for (i, c) in v.coords[start..start + len].iter().enumerate() {
            let val = padic_val(c, p);
            if !val.is_nonneg() {
                return Err(PluckerError::NotIntegral {
                    position: format!(
                        "{}",
                        level_subsets(level)[i]
                            .iter()
                            .map(|d| d.to_string())
                            .collect::<String>()
                    ),
                });
            }
            min = min.min(val);
        }
        if min != PAdicVal::Finite(0) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Classification outcome: one of the supported cells, or a well-formed
/// pattern belonging to a longer word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CellClass {
    Word(WeylWord),
    Unsupported,
}

/// Matches the zero/nonzero pattern (including the forced equalities
/// among coordinates) against the supported cell configurations.
pub fn classify_cell(v: &PluckerVector) -> Result<CellClass, PluckerError> {
    // A vector of an invertible matrix has a nonzero coordinate at every
    // level; anything else cannot come from a group element.
    for level in 1..=5usize {
        let start = level_offset(level);
        let len = level_subsets(level).len();
        if v.coords[start..start + len].iter().all(|c| c.is_zero()) {
            return Err(PluckerError::InconsistentPattern);
        }
    }
    for word in supported_words(v.group) {
        if matches_cell(v, &word) {
            return Ok(CellClass::Word(word));
        }
    }
    Ok(CellClass::Unsupported)
}

fn zero_outside(v: &PluckerVector, allowed: &[&str]) -> bool {
    let allowed: Vec<usize> = allowed.iter().map(|l| PluckerIndex::parse(l).flat()).collect();
    v.coords
        .iter()
        .enumerate()
        .all(|(i, c)| allowed.contains(&i) || c.is_zero())
}

/// The explicit coordinate configuration of each supported cell.
fn matches_cell(v: &PluckerVector, word: &WeylWord) -> bool {
    use Letter::*;
    let g = |l: &str| v.get(l).clone();
    let nz = |l: &str| !v.get(l).is_zero();
    match (v.group, word.letters.as_slice()) {
        (GroupId::So33, []) => {
            zero_outside(v, &["4", "45", "456", "3456", "23456"])
                && nz("4")
                && nz("45")
                && nz("456")
                && g("3456") == g("45")
                && g("23456") == g("4")
        }
        (GroupId::So33, [Alpha]) => {
            zero_outside(v, &["4", "45", "46", "456", "2456", "3456", "23456"])
                && nz("4")
                && nz("46")
                && nz("456")
                && g("2456") == -g("46")
                && g("3456") == g("45")
                && g("23456") == g("4")
        }
        (GroupId::So33, [Beta]) => {
            zero_outside(v, &["4", "5", "45", "456", "3456", "13456", "23456"])
                && nz("5")
                && nz("45")
                && nz("456")
                && g("3456") == g("45")
                && g("13456") == -g("5")
                && g("23456") == g("4")
        }
        (GroupId::So33, [Gamma]) => {
            zero_outside(
                v,
                &["4", "34", "45", "234", "245", "346", "456", "2345", "3456", "23456"],
            ) && nz("4")
                && nz("34")
                && nz("234")
                && g("245") * g("34") == g("45") * g("234")
                && g("346") * g("34") == g("45") * g("234")
                && g("456") * g("34") * g("34") == g("45") * g("45") * g("234")
                && g("2345") == -g("34")
                && g("3456") == g("45")
                && g("23456") == g("4")
        }
        (GroupId::So33, [Alpha, Beta]) => {
            zero_outside(
                v,
                &["4", "5", "45", "46", "56", "456", "1456", "2456", "3456", "13456", "23456"],
            ) && nz("5")
                && nz("56")
                && nz("456")
                && g("46") * g("5") == g("4") * g("56")
                && g("1456") == g("56")
                && g("2456") * g("5") == -(g("4") * g("56"))
                && g("3456") == g("45")
                && g("13456") == -g("5")
                && g("23456") == g("4")
        }
        (GroupId::So33, [Alpha, Gamma]) => {
            zero_outside(
                v,
                &[
                    "4", "24", "34", "45", "46", "234", "245", "346", "456", "2345", "2346",
                    "2456", "3456", "23456",
                ],
            ) && nz("4")
                && nz("24")
                && nz("234")
                && g("45") * g("24") == -(g("34") * g("46"))
                && g("245") * g("24") == -(g("46") * g("234"))
                && g("346") * g("24") == -(g("46") * g("234"))
                && g("456") * g("24") * g("24") == g("46") * g("46") * g("234")
                && g("2345") == -g("34")
                && g("2346") == g("24")
                && g("2456") == -g("46")
                && g("3456") * g("24") == -(g("34") * g("46"))
                && g("23456") == g("4")
        }
        (GroupId::So33, [Beta, Alpha]) => {
            zero_outside(
                v,
                &["4", "5", "6", "45", "46", "456", "2456", "3456", "12456", "13456", "23456"],
            ) && nz("6")
                && nz("46")
                && nz("456")
                && g("45") * g("6") == g("5") * g("46")
                && g("2456") == -g("46")
                && g("3456") * g("6") == g("5") * g("46")
                && g("12456") == g("6")
                && g("13456") == -g("5")
                && g("23456") == g("4")
        }
        (GroupId::So33, [Beta, Gamma]) => {
            zero_outside(
                v,
                &[
                    "3", "4", "5", "34", "45", "234", "245", "346", "456", "2345", "3456",
                    "12345", "13456", "23456",
                ],
            ) && nz("3")
                && nz("34")
                && nz("234")
                && g("45") * g("3") == -(g("5") * g("34"))
                && g("245") * g("3") == -(g("5") * g("234"))
                && g("346") * g("3") == -(g("5") * g("234"))
                && g("456") * g("3") * g("3") == g("5") * g("5") * g("234")
                && g("2345") == -g("34")
                && g("3456") * g("3") == -(g("5") * g("34"))
                && g("12345") == -g("3")
                && g("13456") == -g("5")
                && g("23456") == g("4")
        }
        (GroupId::So33, [Gamma, Beta]) => {
            zero_outside(
                v,
                &[
                    "4", "5", "34", "35", "45", "134", "135", "145", "234", "235", "245", "346",
                    "356", "456", "1345", "2345", "3456", "13456", "23456",
                ],
            ) && nz("5")
                && nz("35")
                && nz("135")
                && g("34") * g("5") == g("4") * g("35")
                && g("134") * g("5") == g("4") * g("135")
                && g("145") * g("35") == g("45") * g("135")
                && g("234") * g("5") * g("5") == -(g("4") * g("4") * g("135"))
                && g("235") * g("5") == -(g("4") * g("135"))
                && g("245") * g("5") * g("35") == -(g("4") * g("45") * g("135"))
                && g("346") * g("5") * g("35") == -(g("4") * g("45") * g("135"))
                && g("356") * g("35") == -(g("45") * g("135"))
                && g("456") * g("35") * g("35") == -(g("45") * g("45") * g("135"))
                && g("1345") == g("35")
                && g("2345") * g("5") == -(g("4") * g("35"))
                && g("3456") == g("45")
                && g("13456") == -g("5")
                && g("23456") == g("4")
        }
        (GroupId::So42, []) => {
            zero_outside(v, &["5", "56", "356", "456", "3456", "23456"])
                && nz("5")
                && nz("56")
                && g("356") * g("356") + g("456") * g("456") == g("56") * g("56")
                && g("3456") == g("56")
                && g("23456") == g("5")
        }
        (GroupId::So42, [Alpha]) => {
            let two = rat_int(2);
            zero_outside(
                v,
                &[
                    "5", "25", "35", "45", "56", "235", "245", "256", "345", "356", "456",
                    "2345", "2356", "2456", "3456", "23456",
                ],
            ) && nz("5")
                && nz("25")
                && g("235") * g("235") + g("245") * g("245") == g("25") * g("25")
                && &two * g("56") * g("25") == g("35") * g("35") + g("45") * g("45")
                && g("256") * g("25") == g("35") * g("235") + g("45") * g("245")
                && g("345") * g("25") == g("35") * g("245") - g("45") * g("235")
                && &two * g("356") * g("25") * g("25")
                    == g("235") * (g("35") * g("35") - g("45") * g("45"))
                        + &two * g("35") * g("45") * g("245")
                && &two * g("456") * g("25") * g("25")
                    == g("245") * (g("45") * g("45") - g("35") * g("35"))
                        + &two * g("35") * g("45") * g("235")
                && g("2345") == -g("25")
                && g("2356") == -g("45")
                && g("2456") == g("35")
                && g("3456") == g("56")
                && g("23456") == g("5")
        }
        (GroupId::So42, [Beta]) => {
            zero_outside(v, &["5", "6", "56", "356", "456", "3456", "13456", "23456"])
                && nz("6")
                && nz("56")
                && g("356") * g("356") + g("456") * g("456") == g("56") * g("56")
                && g("3456") == g("56")
                && g("13456") == -g("6")
                && g("23456") == g("5")
        }
        _ => false,
    }
}

// ---------------------------------------------------------------------
// Enumeration of the coset parameter sets.
// ---------------------------------------------------------------------

/// One enumerated coset representative: the power pair plus the named
/// free residues of the cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CellParams {
    pub r: u32,
    pub s: Option<u32>,
    pub residues: BTreeMap<String, u64>,
}

impl CellParams {
    pub fn residue(&self, name: &str) -> u64 {
        *self.residues.get(name).unwrap_or_else(|| {
            panic!("cell parameter {name} missing");
        })
    }
}

pub const DEFAULT_BUDGET: u64 = 10_000_000;

/// Valuation of an i128 (None encodes infinity).
fn val_i128(mut x: i128, p: u64) -> PAdicVal {
    if x == 0 {
        return PAdicVal::Infinity;
    }
    let p = p as i128;
    let mut v = 0i64;
    while x % p == 0 {
        x /= p;
        v += 1;
    }
    PAdicVal::Finite(v)
}

fn fin(v: i64) -> PAdicVal {
    PAdicVal::Finite(v)
}

fn ge(v: PAdicVal, bound: i64) -> bool {
    v >= fin(bound)
}

fn min_is_zero(vals: &[PAdicVal]) -> bool {
    vals.iter().copied().fold(PAdicVal::Infinity, PAdicVal::min) == fin(0)
}

/// Checks the literal divisibility/gcd conditions of a cell on one
/// candidate residue assignment. `r` and `s` are the cell-level powers;
/// cell-internal powers are derived from them per word.
fn cell_constraints_ok(g: GroupId, word: &WeylWord, p: u64, r: u32, s: u32, res: &BTreeMap<String, u64>) -> bool {
    use Letter::*;
    let val = |name: &str| val_i128(res[name] as i128, p);
    let r64 = r as i64;
    let s64 = s as i64;
    let unit_if_pos = |name: &str, power: u32| power == 0 || val_i128(res[name] as i128, p) == fin(0);
    match (g, word.letters.as_slice()) {
        (GroupId::So33, []) | (GroupId::So42, []) => true,
        (GroupId::So33, [Alpha]) => unit_if_pos("v45", r),
        (GroupId::So33, [Beta]) => unit_if_pos("v4", r),
        (GroupId::So33, [Gamma]) => {
            // Cell powers: p^r and p^(2r).
            let b = 2 * r64;
            ge(val("v45") + fin(b), r64)
                && ge(val("v45") + val("v45") + fin(b), 2 * r64)
                && min_is_zero(&[
                    fin(b),
                    val("v45") + fin(b - r64),
                    val("v45") + val("v45") + fin(b - 2 * r64),
                ])
                && unit_if_pos("v45", r)
        }
        (GroupId::So33, [Alpha, Beta]) => {
            ge(val("v4") + fin(s64), r64)
                && min_is_zero(&[val("v45"), val("v4") + fin(s64 - r64), fin(s64)])
                && unit_if_pos("v4", r)
        }
        (GroupId::So33, [Alpha, Gamma]) => {
            // Cell powers: p^(r+s) and p^(2r).
            let big_r = r64 + s64;
            let big_s = 2 * r64;
            ge(val("v34") + val("v46"), big_r)
                && ge(val("v46") + fin(big_s), big_r)
                && ge(val("v46") + val("v46") + fin(big_s), 2 * big_r)
                && min_is_zero(&[
                    fin(big_r),
                    val("v34"),
                    val("v46"),
                    val("v34") + val("v46") - fin(big_r),
                ])
                && min_is_zero(&[
                    fin(big_s),
                    val("v46") + fin(big_s - big_r),
                    val("v46") + val("v46") + fin(big_s - 2 * big_r),
                ])
        }
        (GroupId::So33, [Beta, Alpha]) => {
            ge(val("v5") + fin(s64), r64)
                && min_is_zero(&[val("v4"), val("v5"), fin(r64)])
                && min_is_zero(&[val("v5") + fin(s64 - r64), fin(s64)])
        }
        (GroupId::So33, [Beta, Gamma]) => {
            // Cell powers: p^r, p^s, p^(2s).
            let t64 = 2 * s64;
            ge(val("v5") + fin(s64), r64)
                && ge(val("v5") + fin(t64), r64)
                && ge(val("v5") + val("v5") + fin(t64), 2 * r64)
                && min_is_zero(&[fin(r64), val("v4"), val("v5")])
                && min_is_zero(&[fin(s64), val("v5") + fin(s64 - r64)])
                && min_is_zero(&[
                    fin(t64),
                    val("v5") + fin(t64 - r64),
                    val("v5") + val("v5") + fin(t64 - 2 * r64),
                ])
        }
        (GroupId::So33, [Gamma, Beta]) => {
            // Cell powers: p^r, p^s, p^(2s).
            let t64 = 2 * s64;
            ge(val("v4") + fin(s64), r64)
                && ge(val("v4") + fin(t64), r64)
                && ge(val("v45") + fin(t64), s64)
                && ge(val("v4") + val("v4") + fin(t64), 2 * r64)
                && ge(val("v4") + val("v45") + fin(t64), r64 + s64)
                && ge(val("v45") + val("v45") + fin(t64), 2 * s64)
                && min_is_zero(&[val("v4") + fin(s64 - r64), fin(s64), val("v45")])
                && min_is_zero(&[
                    val("v4") + fin(t64 - r64),
                    fin(t64),
                    val("v45") + fin(t64 - s64),
                    val("v4") + val("v4") + fin(t64 - 2 * r64),
                    val("v4") + val("v45") + fin(t64 - r64 - s64),
                    val("v45") + val("v45") + fin(t64 - 2 * s64),
                ])
                && unit_if_pos("v4", r)
        }
        (GroupId::So42, [Alpha]) => {
            let e2 = if p == 2 { 1i64 } else { 0 };
            let a = res["v35"] as i128;
            let b = res["v45"] as i128;
            let sum = val_i128(a * a + b * b, p);
            let diff = val_i128(a * a - b * b, p);
            let prod = val("v35") + val("v45");
            ge(sum, r64 + e2)
                && ge(diff, r64 + e2)
                && ge(prod, r64)
                && min_is_zero(&[fin(r64), val("v35"), val("v45"), sum - fin(r64 + e2)])
                && min_is_zero(&[
                    fin(r64),
                    val("v35"),
                    val("v45"),
                    prod - fin(r64),
                    diff - fin(r64 + e2),
                ])
        }
        (GroupId::So42, [Beta]) => unit_if_pos("v5", r),
        _ => unreachable!("unsupported word was validated earlier"),
    }
}

impl std::ops::Sub<PAdicVal> for PAdicVal {
    type Output = PAdicVal;
    fn sub(self, other: PAdicVal) -> PAdicVal {
        match (self, other) {
            (PAdicVal::Infinity, _) => PAdicVal::Infinity,
            (_, PAdicVal::Infinity) => panic!("cannot subtract an infinite valuation"),
            (PAdicVal::Finite(a), PAdicVal::Finite(b)) => PAdicVal::Finite(a - b),
        }
    }
}

/// Names and ranges (as modulus exponents in terms of r, s) of the free
/// residues of each cell, in enumeration order.
fn cell_residue_ranges(g: GroupId, word: &WeylWord, r: u32, s: u32) -> Vec<(&'static str, u32)> {
    use Letter::*;
    match (g, word.letters.as_slice()) {
        (GroupId::So33, []) | (GroupId::So42, []) => vec![],
        (GroupId::So33, [Alpha]) => vec![("v45", r)],
        (GroupId::So33, [Beta]) => vec![("v4", r)],
        (GroupId::So33, [Gamma]) => vec![("v45", r)],
        (GroupId::So33, [Alpha, Beta]) => vec![("v4", r), ("v45", s)],
        (GroupId::So33, [Alpha, Gamma]) => vec![("v34", r + s), ("v46", r + s)],
        (GroupId::So33, [Beta, Alpha]) => vec![("v4", r), ("v5", r)],
        (GroupId::So33, [Beta, Gamma]) => vec![("v4", r), ("v5", r)],
        (GroupId::So33, [Gamma, Beta]) => vec![("v4", r), ("v45", s)],
        (GroupId::So42, [Alpha]) => vec![("v35", r), ("v45", r)],
        (GroupId::So42, [Beta]) => vec![("v5", r)],
        _ => unreachable!(),
    }
}

fn validate_spec(g: GroupId, word: &WeylWord, p: Prime, r: u32, s: u32) -> Result<(), PluckerError> {
    if word.group() != g {
        return Err(PluckerError::UnsupportedCell {
            group: g,
            word: word.name(),
        });
    }
    if g == GroupId::So42 && p.get() % 4 == 1 {
        return Err(PluckerError::UnsupportedCell {
            group: g,
            word: format!("{} at p = {} (p = 1 mod 4 excluded)", word.name(), p),
        });
    }
    if !word.powers_ok(r, s) {
        return Err(PluckerError::PowerConstraintViolated {
            word: word.name(),
            r,
            s,
        });
    }
    Ok(())
}

/// Enumerates every admissible residue assignment of the cell, in
/// ascending lexicographic order of the canonical representatives.
pub fn enumerate_cell(
    g: GroupId,
    word: &WeylWord,
    p: Prime,
    r: u32,
    s: u32,
    budget: u64,
) -> Result<Vec<CellParams>, PluckerError> {
    validate_spec(g, word, p, r, s)?;
    let ranges = cell_residue_ranges(g, word, r, s);
    let mut space: u64 = 1;
    for (_, exp) in &ranges {
        let size = p.pow(*exp).map_err(|_| PluckerError::BudgetExceeded {
            needed: u64::MAX,
            budget,
        })?;
        space = space.checked_mul(size).ok_or(PluckerError::BudgetExceeded {
            needed: u64::MAX,
            budget,
        })?;
    }
    if space > budget {
        return Err(PluckerError::BudgetExceeded {
            needed: space,
            budget,
        });
    }
    let s_field = if word.arity() == 2 { Some(s) } else { None };
    let mut out = Vec::new();
    let mut cursor = vec![0u64; ranges.len()];
    loop {
        let residues: BTreeMap<String, u64> = ranges
            .iter()
            .zip(cursor.iter())
            .map(|((name, _), &v)| (name.to_string(), v))
            .collect();
        if cell_constraints_ok(g, word, p.get(), r, s, &residues) {
            out.push(CellParams {
                r,
                s: s_field,
                residues,
            });
        }
        // Advance the odometer, most significant variable first.
        let mut pos = ranges.len();
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            cursor[pos] += 1;
            if cursor[pos] < p.pow(ranges[pos].1).unwrap() {
                break;
            }
            cursor[pos] = 0;
        }
        if ranges.is_empty() {
            return Ok(out);
        }
    }
}

/// The coordinate vector a cell representative with these parameters
/// must have (exactly the listed coset data).
pub fn cell_vector(
    g: GroupId,
    word: &WeylWord,
    p: Prime,
    params: &CellParams,
) -> Result<PluckerVector, PluckerError> {
    use Letter::*;
    let r = params.r as i64;
    let s = params.s.unwrap_or(0) as i64;
    let pw = |e: i64| p_pow(p.get(), e);
    let res = |name: &str| rat_int(params.residue(name) as i64);
    let entries: Vec<(&str, Rat)> = match (g, word.letters.as_slice()) {
        (GroupId::So33, []) => vec![
            ("4", Rat::one()),
            ("45", Rat::one()),
            ("456", Rat::one()),
            ("3456", Rat::one()),
            ("23456", Rat::one()),
        ],
        (GroupId::So33, [Alpha]) => vec![
            ("4", Rat::one()),
            ("45", res("v45")),
            ("46", pw(r)),
            ("456", Rat::one()),
            ("2456", -pw(r)),
            ("3456", res("v45")),
            ("23456", Rat::one()),
        ],
        (GroupId::So33, [Beta]) => vec![
            ("4", res("v4")),
            ("5", pw(r)),
            ("45", Rat::one()),
            ("456", Rat::one()),
            ("3456", Rat::one()),
            ("13456", -pw(r)),
            ("23456", res("v4")),
        ],
        (GroupId::So33, [Gamma]) => {
            let v45 = res("v45");
            vec![
                ("4", Rat::one()),
                ("34", pw(r)),
                ("45", v45.clone()),
                ("234", pw(2 * r)),
                ("245", &v45 * pw(r)),
                ("346", &v45 * pw(r)),
                ("456", &v45 * &v45),
                ("2345", -pw(r)),
                ("3456", v45),
                ("23456", Rat::one()),
            ]
        }
        (GroupId::So33, [Alpha, Beta]) => {
            let v4 = res("v4");
            let v45 = res("v45");
            vec![
                ("4", v4.clone()),
                ("5", pw(r)),
                ("45", v45.clone()),
                ("46", &v4 * pw(s - r)),
                ("56", pw(s)),
                ("456", Rat::one()),
                ("1456", pw(s)),
                ("2456", -(&v4 * pw(s - r))),
                ("3456", v45),
                ("13456", -pw(r)),
                ("23456", v4),
            ]
        }
        (GroupId::So33, [Alpha, Gamma]) => {
            let big_r = r + s;
            let big_s = 2 * r;
            let v34 = res("v34");
            let v46 = res("v46");
            vec![
                ("4", Rat::one()),
                ("24", pw(big_r)),
                ("34", v34.clone()),
                ("45", -(&v34 * &v46 * pw(-big_r))),
                ("46", v46.clone()),
                ("234", pw(big_s)),
                ("245", -(&v46 * pw(big_s - big_r))),
                ("346", -(&v46 * pw(big_s - big_r))),
                ("456", &v46 * &v46 * pw(big_s - 2 * big_r)),
                ("2345", -v34.clone()),
                ("2346", pw(big_r)),
                ("2456", -v46.clone()),
                ("3456", -(&v34 * &v46 * pw(-big_r))),
                ("23456", Rat::one()),
            ]
        }
        (GroupId::So33, [Beta, Alpha]) => {
            let v4 = res("v4");
            let v5 = res("v5");
            vec![
                ("4", v4.clone()),
                ("5", v5.clone()),
                ("6", pw(r)),
                ("45", &v5 * pw(s - r)),
                ("46", pw(s)),
                ("456", Rat::one()),
                ("2456", -pw(s)),
                ("3456", &v5 * pw(s - r)),
                ("12456", pw(r)),
                ("13456", -v5),
                ("23456", v4),
            ]
        }
        (GroupId::So33, [Beta, Gamma]) => {
            let t = 2 * s;
            let v4 = res("v4");
            let v5 = res("v5");
            vec![
                ("3", pw(r)),
                ("4", v4.clone()),
                ("5", v5.clone()),
                ("34", pw(s)),
                ("45", -(&v5 * pw(s - r))),
                ("234", pw(t)),
                ("245", -(&v5 * pw(t - r))),
                ("346", -(&v5 * pw(t - r))),
                ("456", &v5 * &v5 * pw(t - 2 * r)),
                ("2345", -pw(s)),
                ("3456", -(&v5 * pw(s - r))),
                ("12345", -pw(r)),
                ("13456", -v5),
                ("23456", v4),
            ]
        }
        (GroupId::So33, [Gamma, Beta]) => {
            let t = 2 * s;
            let v4 = res("v4");
            let v45 = res("v45");
            vec![
                ("4", v4.clone()),
                ("5", pw(r)),
                ("34", &v4 * pw(s - r)),
                ("35", pw(s)),
                ("45", v45.clone()),
                ("134", &v4 * pw(t - r)),
                ("135", pw(t)),
                ("145", &v45 * pw(t - s)),
                ("234", -(&v4 * &v4 * pw(t - 2 * r))),
                ("235", -(&v4 * pw(t - r))),
                ("245", -(&v4 * &v45 * pw(t - r - s))),
                ("346", -(&v4 * &v45 * pw(t - r - s))),
                ("356", -(&v45 * pw(t - s))),
                ("456", -(&v45 * &v45 * pw(t - 2 * s))),
                ("1345", pw(s)),
                ("2345", -(&v4 * pw(s - r))),
                ("3456", v45),
                ("13456", -pw(r)),
                ("23456", v4),
            ]
        }
        (GroupId::So42, []) => vec![
            ("5", Rat::one()),
            ("56", Rat::one()),
            ("456", Rat::one()),
            ("3456", Rat::one()),
            ("23456", Rat::one()),
        ],
        (GroupId::So42, [Alpha]) => {
            let a = res("v35");
            let b = res("v45");
            let half = p_pow(2, -1);
            let sum = &half * (&a * &a + &b * &b) * pw(-r);
            let diff = &half * (&a * &a - &b * &b) * pw(-r);
            vec![
                ("5", Rat::one()),
                ("25", pw(r)),
                ("35", a.clone()),
                ("45", b.clone()),
                ("56", sum.clone()),
                ("245", pw(r)),
                ("256", b.clone()),
                ("345", a.clone()),
                ("356", &a * &b * pw(-r)),
                ("456", -diff),
                ("2345", -pw(r)),
                ("2356", -b),
                ("2456", a),
                ("3456", sum),
                ("23456", Rat::one()),
            ]
        }
        (GroupId::So42, [Beta]) => vec![
            ("5", res("v5")),
            ("6", pw(r)),
            ("56", Rat::one()),
            ("456", Rat::one()),
            ("3456", Rat::one()),
            ("13456", -pw(r)),
            ("23456", res("v5")),
        ],
        _ => {
            return Err(PluckerError::UnsupportedCell {
                group: g,
                word: word.name(),
            })
        }
    };
    Ok(PluckerVector::from_map(g, &entries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matlin::{random_group_element, rat_frac, unipotent, MatQ};

    fn pr(x: u64) -> Prime {
        Prime::new(x).unwrap()
    }

    fn word(g: GroupId, name: &str) -> WeylWord {
        WeylWord::parse(g, name).unwrap()
    }

    #[test]
    fn index_layout() {
        assert_eq!(level_subsets(1).len(), 6);
        assert_eq!(level_subsets(2).len(), 15);
        assert_eq!(level_subsets(3).len(), 20);
        assert_eq!(level_subsets(4).len(), 15);
        assert_eq!(level_subsets(5).len(), 6);
        assert_eq!(PluckerIndex::parse("12").flat(), 6);
        assert_eq!(PluckerIndex::parse("56").flat(), 20);
        assert_eq!(PluckerIndex::parse("23456").flat(), 61);
    }

    #[test]
    fn identity_vectors() {
        let v = plucker_map(&MatQ::identity(), GroupId::So33).unwrap();
        assert_eq!(classify_cell(&v).unwrap(), CellClass::Word(word(GroupId::So33, "e")));
        assert_eq!(*v.get("4"), Rat::one());
        assert_eq!(*v.get("45"), Rat::one());
        assert_eq!(*v.get("456"), Rat::one());

        let v = plucker_map(&MatQ::identity(), GroupId::So42).unwrap();
        assert_eq!(classify_cell(&v).unwrap(), CellClass::Word(word(GroupId::So42, "e")));
        assert_eq!(*v.get("5"), Rat::one());
        assert_eq!(*v.get("56"), Rat::one());
        assert_eq!(*v.get("456"), Rat::one());
    }

    #[test]
    fn rejects_non_members() {
        let mut m = MatQ::identity();
        m.set(0, 3, Rat::one());
        assert!(matches!(
            plucker_map(&m, GroupId::So33),
            Err(PluckerError::NotInGroup)
        ));
    }

    #[test]
    fn invariance_under_left_unipotent() {
        for g in [GroupId::So33, GroupId::So42] {
            for seed in 0..30u64 {
                let a = random_group_element(g, pr(3), seed, 6);
                let pars: [Rat; 6] = [
                    rat_frac(1, 3),
                    rat_frac(-2, 9),
                    rat_frac(5, 3),
                    rat_frac(-1, 2),
                    rat_frac(2, 7),
                    rat_frac(seed as i64 % 5, 3),
                ];
                let u = unipotent(g, &pars);
                assert_eq!(
                    plucker_map(&u.mul(&a), g).unwrap(),
                    plucker_map(&a, g).unwrap(),
                    "group {:?} seed {}",
                    g,
                    seed
                );
            }
        }
    }

    #[test]
    fn injectivity_on_coset_representatives() {
        // Equal coordinates force equal cosets: B A^-1 must be unipotent.
        use crate::matlin::in_unipotent;
        for g in [GroupId::So33, GroupId::So42] {
            for seed in 0..30u64 {
                let a = random_group_element(g, pr(3), seed, 6);
                let pars: [Rat; 6] = [
                    rat_frac(2, 3),
                    rat_frac(1, 9),
                    rat_frac(-1, 3),
                    rat_frac(1, 6),
                    rat_frac(-3, 2),
                    rat_frac(1, 4),
                ];
                let b = unipotent(g, &pars).mul(&a);
                assert_eq!(plucker_map(&a, g).unwrap(), plucker_map(&b, g).unwrap());
                let quotient = b.mul(&a.inverse().unwrap());
                assert!(in_unipotent(g, &quotient));
            }
        }
    }

    #[test]
    fn coprimality_necessity_on_integral_elements() {
        for g in [GroupId::So33, GroupId::So42] {
            for seed in 0..100u64 {
                let a = random_group_element(g, pr(3), seed, 7);
                let v = plucker_map(&a, g).unwrap();
                for q in [2u64, 3, 5] {
                    assert_eq!(coprimality_check(&v, pr(q)), Ok(true), "g {:?} seed {}", g, seed);
                }
            }
        }
    }

    #[test]
    fn coprimality_examples() {
        let v = cell_vector(
            GroupId::So33,
            &word(GroupId::So33, "e"),
            pr(3),
            &CellParams {
                r: 0,
                s: None,
                residues: BTreeMap::new(),
            },
        )
        .unwrap();
        assert_eq!(coprimality_check(&v, pr(3)), Ok(true));
        let scaled = v.scaled_level(2, &rat_int(3));
        assert_eq!(coprimality_check(&scaled, pr(3)), Ok(false));
        let bad = v.scaled_level(2, &rat_frac(1, 3));
        assert!(matches!(
            coprimality_check(&bad, pr(3)),
            Err(PluckerError::NotIntegral { .. })
        ));
    }

    #[test]
    fn classify_supported_cells_from_vectors() {
        // Every enumerated coset vector classifies back to its own word.
        for g in [GroupId::So33, GroupId::So42] {
            for w in supported_words(g) {
                let (r, s) = match w.arity() {
                    0 => (0u32, 0u32),
                    1 => (2, 0),
                    _ => {
                        if w.powers_ok(1, 2) {
                            (1, 2)
                        } else {
                            (2, 1)
                        }
                    }
                };
                let p = pr(3);
                for params in enumerate_cell(g, &w, p, r, s, DEFAULT_BUDGET).unwrap() {
                    let v = cell_vector(g, &w, p, &params).unwrap();
                    assert_eq!(
                        classify_cell(&v).unwrap(),
                        CellClass::Word(w.clone()),
                        "group {:?} word {} params {:?}",
                        g,
                        w.name(),
                        params
                    );
                    assert_eq!(coprimality_check(&v, p), Ok(true));
                }
            }
        }
    }

    #[test]
    fn enumeration_counts() {
        let p = pr(3);
        // Single-variable cells have phi(p^r) elements for r > 0.
        for r in 0..=3u32 {
            let n = enumerate_cell(GroupId::So33, &word(GroupId::So33, "b"), p, r, 0, DEFAULT_BUDGET)
                .unwrap()
                .len() as u64;
            let expect = if r == 0 { 1 } else { 3u64.pow(r) - 3u64.pow(r - 1) };
            assert_eq!(n, expect, "r = {}", r);
            let n = enumerate_cell(GroupId::So33, &word(GroupId::So33, "a"), p, r, 0, DEFAULT_BUDGET)
                .unwrap()
                .len() as u64;
            assert_eq!(n, expect, "r = {}", r);
        }
        // The quadratic cell on the second group: empty at p = 2, r = 1;
        // eight representatives at p = 3, r = 2.
        assert!(enumerate_cell(GroupId::So42, &word(GroupId::So42, "a"), pr(2), 1, 0, DEFAULT_BUDGET)
            .unwrap()
            .is_empty());
        assert_eq!(
            enumerate_cell(GroupId::So42, &word(GroupId::So42, "a"), pr(3), 2, 0, DEFAULT_BUDGET)
                .unwrap()
                .len(),
            8
        );
    }

    #[test]
    fn budget_guard() {
        let err = enumerate_cell(
            GroupId::So33,
            &word(GroupId::So33, "ag"),
            pr(5),
            4,
            4,
            1000,
        )
        .unwrap_err();
        assert!(matches!(err, PluckerError::BudgetExceeded { .. }));
    }

    #[test]
    fn power_constraints() {
        let err = enumerate_cell(
            GroupId::So33,
            &word(GroupId::So33, "ab"),
            pr(3),
            2,
            1,
            DEFAULT_BUDGET,
        )
        .unwrap_err();
        assert!(matches!(err, PluckerError::PowerConstraintViolated { .. }));
        // p = 1 mod 4 is rejected for the quasi-split group.
        let err = enumerate_cell(
            GroupId::So42,
            &word(GroupId::So42, "a"),
            pr(5),
            1,
            0,
            DEFAULT_BUDGET,
        )
        .unwrap_err();
        assert!(matches!(err, PluckerError::UnsupportedCell { .. }));
    }

    #[test]
    fn unsupported_patterns() {
        // A vector whose level pattern belongs to no supported cell: take
        // a random group element that lands in a longer cell.
        let g = GroupId::So33;
        let w3 = weyl_alpha(g).mul(&weyl_beta(g)).mul(&weyl_gamma());
        let v = plucker_map(&w3, g).unwrap();
        assert_eq!(classify_cell(&v).unwrap(), CellClass::Unsupported);

        // An all-zero level is inconsistent with any group element.
        let zero = PluckerVector {
            group: g,
            coords: vec![Rat::zero(); 62],
        };
        assert!(matches!(
            classify_cell(&zero),
            Err(PluckerError::InconsistentPattern)
        ));
    }
}
