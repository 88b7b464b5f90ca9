//! Exact arithmetic in a finite-dimensional Q-vector space of real constants.
//!
//! A [`SymbolTable`] declares basis constants that the user asserts to be
//! linearly independent over Q (together with `one`). A [`SymScalar`] is a
//! rational combination of those constants. Equality and rank questions are
//! answered on coefficients; signs are decided by interval evaluation of the
//! numeric embedding at escalating decimal precision.

use std::cmp::Ordering;
use std::collections::hash_map::DefaultHasher;
use std::collections::BTreeMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, Neg, Sub};

use num_bigint::{BigInt, Sign as BigSign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

pub type Rational = BigRational;

/// Default ceiling, in decimal digits, for interval sign evaluation.
pub const DEFAULT_PRECISION_CEILING: u32 = 256;

/// Digits kept when a symbol value is given as `sqrt(..)`.
const SQRT_DIGITS: u32 = 320;

/// Table id shared by purely rational scalars; compatible with every table.
const FREE_TABLE: u64 = 0;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScalarError {
    #[error("scalars belong to different symbol tables")]
    MismatchedTables,
    #[error("sign undecided at {digits} digits: interval still contains zero (ill-conditioned symbol table)")]
    PrecisionExhausted { digits: u32 },
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("cannot parse `{0}` as a rational")]
    BadRational(String),
    #[error("cannot parse expression `{0}`")]
    BadExpression(String),
    #[error("invalid symbol declaration `{name}`: {reason}")]
    BadSymbol { name: String, reason: String },
    #[error("division by zero")]
    DivisionByZero,
}

/// Three-way sign of a real number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Neg,
    Zero,
    Pos,
}

impl Neg for Sign {
    type Output = Sign;
    fn neg(self) -> Sign {
        match self {
            Sign::Neg => Sign::Pos,
            Sign::Zero => Sign::Zero,
            Sign::Pos => Sign::Neg,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Symbol {
    pub name: String,
    /// Declaration text as written (`sqrt(2)`, `1.4142...`).
    pub source: String,
    /// Exact rational reading of the declared decimal.
    pub value: Rational,
    pub independent: bool,
}

/// Ordered list of basis constants. Index 0 is always `one`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolTable {
    symbols: Vec<Symbol>,
    id: u64,
}

impl Default for SymbolTable {
    fn default() -> Self {
        Self::new()
    }
}

impl SymbolTable {
    pub fn new() -> Self {
        let mut t = SymbolTable {
            symbols: vec![Symbol {
                name: "one".into(),
                source: "1".into(),
                value: Rational::one(),
                independent: true,
            }],
            id: 0,
        };
        t.rehash();
        t
    }

    fn rehash(&mut self) {
        let mut h = DefaultHasher::new();
        for s in &self.symbols {
            s.name.hash(&mut h);
            s.source.hash(&mut h);
        }
        self.id = h.finish().max(1);
    }

    /// Declares a new basis constant. `source` is a decimal literal,
    /// a rational `p/q`, or `sqrt(r)` for a nonnegative rational `r`.
    pub fn declare(&mut self, name: &str, source: &str) -> Result<usize, ScalarError> {
        let bad = |reason: &str| ScalarError::BadSymbol {
            name: name.to_string(),
            reason: reason.to_string(),
        };
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(bad("names are alphanumeric"));
        }
        if name.chars().next().is_some_and(|c| c.is_ascii_digit()) {
            return Err(bad("names must not start with a digit"));
        }
        if self.index_of(name).is_some() {
            return Err(bad("duplicate name"));
        }
        let value = parse_value(source.trim()).map_err(|_| bad("unreadable value"))?;
        if value.is_zero() {
            return Err(bad("value must be nonzero"));
        }
        self.symbols.push(Symbol {
            name: name.to_string(),
            source: source.trim().to_string(),
            value,
            independent: true,
        });
        self.rehash();
        Ok(self.symbols.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s.name == name)
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    /// The basis constant at `index` as a scalar.
    pub fn symbol(&self, index: usize) -> SymScalar {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(index, Rational::one());
        SymScalar {
            table: if index == 0 { FREE_TABLE } else { self.id },
            coeffs,
        }
    }

    /// Parses a linear combination such as `3/2 + 1*alpha - q`.
    pub fn parse_expr(&self, text: &str) -> Result<SymScalar, ScalarError> {
        let bad = || ScalarError::BadExpression(text.to_string());
        let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(bad());
        }
        // Split into signed terms; a sign directly after another sign is folded.
        let mut terms: Vec<(bool, String)> = Vec::new();
        let mut negative = false;
        let mut current = String::new();
        let mut pending_sign = true;
        for c in compact.chars() {
            if (c == '+' || c == '-') && current.is_empty() {
                if c == '-' {
                    negative = !negative;
                }
                pending_sign = true;
                continue;
            }
            if (c == '+' || c == '-') && !current.ends_with(['e', 'E']) {
                terms.push((negative, std::mem::take(&mut current)));
                negative = c == '-';
                pending_sign = true;
                continue;
            }
            pending_sign = false;
            current.push(c);
        }
        if pending_sign || current.is_empty() {
            return Err(bad());
        }
        terms.push((negative, current));

        let mut acc = SymScalar::zero();
        for (neg, term) in terms {
            let (coeff, name) = match term.split_once('*') {
                Some((c, n)) => (parse_rational(c)?, Some(n)),
                None => match parse_rational(&term) {
                    Ok(r) => (r, None),
                    Err(_) => (Rational::one(), Some(term.as_str())),
                },
            };
            let coeff = if neg { -coeff } else { coeff };
            let basis = match name {
                None => SymScalar::rational(coeff),
                Some(n) => {
                    let idx = self
                        .index_of(n)
                        .ok_or_else(|| ScalarError::UnknownSymbol(n.to_string()))?;
                    self.symbol(idx).scale(&coeff)
                }
            };
            acc = acc.try_add(&basis)?;
        }
        Ok(acc)
    }

    /// Renders a scalar: rational part first, then `+ c*name` terms in table order.
    pub fn render(&self, s: &SymScalar) -> String {
        let mut parts = Vec::new();
        let rat = s.rational_part();
        let has_terms = s.coeffs.keys().any(|&k| k != 0);
        if !rat.is_zero() || !has_terms {
            parts.push(rat.to_string());
        }
        for (&k, c) in &s.coeffs {
            if k == 0 {
                continue;
            }
            let name = self
                .symbols
                .get(k)
                .map(|s| s.name.as_str())
                .unwrap_or("?");
            parts.push(format!("{c}*{name}"));
        }
        parts.join(" + ")
    }
}

/// Exact element of the Q-span of the declared constants. Absent
/// coefficients are zero; zero coefficients are never stored.
#[derive(Debug, Clone)]
pub struct SymScalar {
    table: u64,
    coeffs: BTreeMap<usize, Rational>,
}

impl PartialEq for SymScalar {
    fn eq(&self, other: &Self) -> bool {
        compatible(self.table, other.table).is_some() && self.coeffs == other.coeffs
    }
}

impl Eq for SymScalar {}

fn compatible(a: u64, b: u64) -> Option<u64> {
    match (a, b) {
        (FREE_TABLE, t) | (t, FREE_TABLE) => Some(t),
        (x, y) if x == y => Some(x),
        _ => None,
    }
}

impl SymScalar {
    pub fn zero() -> Self {
        SymScalar {
            table: FREE_TABLE,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn rational(r: Rational) -> Self {
        let mut coeffs = BTreeMap::new();
        if !r.is_zero() {
            coeffs.insert(0, r);
        }
        SymScalar {
            table: FREE_TABLE,
            coeffs,
        }
    }

    pub fn from_int(n: i64) -> Self {
        Self::rational(Rational::from_integer(BigInt::from(n)))
    }

    pub fn ratio(n: i64, d: i64) -> Self {
        Self::rational(Rational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn coeffs(&self) -> &BTreeMap<usize, Rational> {
        &self.coeffs
    }

    pub fn coeff(&self, index: usize) -> Rational {
        self.coeffs.get(&index).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn rational_part(&self) -> Rational {
        self.coeff(0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// True iff every non-`one` coefficient vanishes.
    pub fn is_rational(&self) -> bool {
        self.coeffs.keys().all(|&k| k == 0)
    }

    pub fn try_add(&self, other: &SymScalar) -> Result<SymScalar, ScalarError> {
        let table = compatible(self.table, other.table).ok_or(ScalarError::MismatchedTables)?;
        let mut coeffs = self.coeffs.clone();
        for (k, v) in &other.coeffs {
            let e = coeffs.entry(*k).or_insert_with(Rational::zero);
            *e += v;
        }
        coeffs.retain(|_, v| !v.is_zero());
        Ok(SymScalar { table, coeffs }.normalized())
    }

    pub fn try_sub(&self, other: &SymScalar) -> Result<SymScalar, ScalarError> {
        self.try_add(&-other.clone())
    }

    fn normalized(mut self) -> Self {
        if self.coeffs.keys().all(|&k| k == 0) {
            self.table = FREE_TABLE;
        }
        self
    }

    pub fn scale(&self, c: &Rational) -> SymScalar {
        if c.is_zero() {
            return SymScalar::zero();
        }
        SymScalar {
            table: self.table,
            coeffs: self.coeffs.iter().map(|(k, v)| (*k, v * c)).collect(),
        }
    }

    /// `self / other` when the quotient is rational (`self` a rational
    /// multiple of `other`), else `None`.
    pub fn rational_ratio(&self, other: &SymScalar) -> Option<Rational> {
        let (&k, pivot) = other.coeffs.iter().next()?;
        let r = self.coeff(k) / pivot;
        if other.scale(&r) == *self {
            Some(r)
        } else {
            None
        }
    }

    /// Sign of the numeric embedding, decided by interval evaluation at
    /// 16, 32, ... decimal digits up to `ceiling`.
    pub fn sign(&self, table: &SymbolTable, ceiling: u32) -> Result<Sign, ScalarError> {
        if self.is_zero() {
            return Ok(Sign::Zero);
        }
        if compatible(self.table, table.id).is_none() {
            return Err(ScalarError::MismatchedTables);
        }
        if self.is_rational() {
            return Ok(if self.rational_part().is_positive() {
                Sign::Pos
            } else {
                Sign::Neg
            });
        }
        let ceiling = ceiling.max(1);
        let mut digits = 16u32.min(ceiling);
        loop {
            let (lo, hi) = self.interval(table, digits);
            if lo.is_positive() {
                return Ok(Sign::Pos);
            }
            if hi.is_negative() {
                return Ok(Sign::Neg);
            }
            if digits >= ceiling {
                return Err(ScalarError::PrecisionExhausted { digits });
            }
            digits = (digits * 2).min(ceiling);
        }
    }

    /// Enclosure of the numeric value using symbol values truncated to `digits`.
    fn interval(&self, table: &SymbolTable, digits: u32) -> (Rational, Rational) {
        let scale = BigInt::from(10u32).pow(digits);
        let ulp = Rational::new(BigInt::one(), scale.clone());
        let mut lo = Rational::zero();
        let mut hi = Rational::zero();
        for (&k, c) in &self.coeffs {
            let v = &table.symbols[k].value;
            let scaled = v * Rational::from_integer(scale.clone());
            let (vlo, vhi) = if scaled.is_integer() {
                (v.clone(), v.clone())
            } else {
                let f = Rational::new(scaled.floor().to_integer(), scale.clone());
                (f.clone(), f + &ulp)
            };
            if c.is_positive() {
                lo += c * &vlo;
                hi += c * &vhi;
            } else {
                lo += c * &vhi;
                hi += c * &vlo;
            }
        }
        (lo, hi)
    }

    /// Nearest double to the numeric embedding.
    pub fn to_f64(&self, table: &SymbolTable) -> f64 {
        self.coeffs
            .iter()
            .map(|(&k, c)| {
                let v = table
                    .symbols
                    .get(k)
                    .map(|s| s.value.clone())
                    .unwrap_or_else(Rational::zero);
                rational_to_f64(&(c * v))
            })
            .sum()
    }

    pub fn cmp_with(
        &self,
        other: &SymScalar,
        table: &SymbolTable,
        ceiling: u32,
    ) -> Result<Ordering, ScalarError> {
        Ok(match self.try_sub(other)?.sign(table, ceiling)? {
            Sign::Neg => Ordering::Less,
            Sign::Zero => Ordering::Equal,
            Sign::Pos => Ordering::Greater,
        })
    }
}

impl Add for SymScalar {
    type Output = SymScalar;
    /// Panics on mismatched tables; use [`SymScalar::try_add`] to recover.
    fn add(self, rhs: SymScalar) -> SymScalar {
        self.try_add(&rhs).expect("mismatched symbol tables")
    }
}

impl<'a> Add<&'a SymScalar> for &'a SymScalar {
    type Output = SymScalar;
    fn add(self, rhs: &SymScalar) -> SymScalar {
        self.try_add(rhs).expect("mismatched symbol tables")
    }
}

impl Sub for SymScalar {
    type Output = SymScalar;
    fn sub(self, rhs: SymScalar) -> SymScalar {
        self.try_sub(&rhs).expect("mismatched symbol tables")
    }
}

impl<'a> Sub<&'a SymScalar> for &'a SymScalar {
    type Output = SymScalar;
    fn sub(self, rhs: &SymScalar) -> SymScalar {
        self.try_sub(rhs).expect("mismatched symbol tables")
    }
}

impl Neg for SymScalar {
    type Output = SymScalar;
    fn neg(self) -> SymScalar {
        SymScalar {
            table: self.table,
            coeffs: self.coeffs.into_iter().map(|(k, v)| (k, -v)).collect(),
        }
    }
}

impl fmt::Display for SymScalar {
    /// Table-free rendering using `s<index>` names; prefer [`SymbolTable::render`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in &self.coeffs {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if *k == 0 {
                write!(f, "{c}")?;
            } else {
                write!(f, "{c}*s{k}")?;
            }
        }
        Ok(())
    }
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    // Scale to keep both parts in range before the division.
    let n = r.numer();
    let d = r.denom();
    let shift = (n.bits().max(d.bits()) as i64 - 900).max(0) as usize;
    let n = (n >> shift).to_f64().unwrap_or(0.0);
    let d = (d >> shift).to_f64().unwrap_or(1.0);
    n / d
}

/// Parses `p/q`, an integer, or a plain decimal like `-0.125`, exactly.
pub fn parse_rational(text: &str) -> Result<Rational, ScalarError> {
    let t = text.trim();
    let bad = || ScalarError::BadRational(text.to_string());
    if t.is_empty() {
        return Err(bad());
    }
    if let Some((n, d)) = t.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(n, d));
    }
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    if body.is_empty() || !body.chars().all(|c| c.is_ascii_digit() || c == '.') {
        return Err(bad());
    }
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if frac.contains('.') || (int.is_empty() && frac.is_empty()) {
        return Err(bad());
    }
    let digits = format!("{int}{frac}");
    let n: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().map_err(|_| bad())?
    };
    let d = BigInt::from(10u32).pow(frac.len() as u32);
    let r = Rational::new(n, d);
    Ok(if neg { -r } else { r })
}

fn parse_value(text: &str) -> Result<Rational, ScalarError> {
    if let Some(inner) = text.strip_prefix("sqrt(").and_then(|s| s.strip_suffix(')')) {
        let r = parse_rational(inner)?;
        if r.is_negative() {
            return Err(ScalarError::BadRational(text.to_string()));
        }
        // floor(sqrt(r) * 10^D) / 10^D
        let scale = BigInt::from(10u32).pow(SQRT_DIGITS);
        let scaled = r * Rational::from_integer(&scale * &scale);
        let root = scaled.floor().to_integer().sqrt();
        return Ok(Rational::new(root, scale));
    }
    parse_rational(text)
}

/// Dimension of the Q-span of `vals`, by exact Gaussian elimination on the
/// coefficient matrix.
pub fn q_rank(vals: &[SymScalar]) -> usize {
    let mut rows: Vec<BTreeMap<usize, Rational>> = vals
        .iter()
        .filter(|v| !v.is_zero())
        .map(|v| v.coeffs.clone())
        .collect();
    let mut rank = 0;
    while let Some(pivot_row) = rows.pop() {
        let Some((&col, pv)) = pivot_row.iter().next() else {
            continue;
        };
        rank += 1;
        let pv = pv.clone();
        for row in rows.iter_mut() {
            if let Some(c) = row.get(&col).cloned() {
                let f = c / &pv;
                for (k, v) in &pivot_row {
                    let e = row.entry(*k).or_insert_with(Rational::zero);
                    *e -= &f * v;
                }
                row.retain(|_, v| !v.is_zero());
            }
        }
        rows.retain(|r| !r.is_empty());
    }
    rank
}

/// The subgroup of (R,+) generated by finitely many scalars, with exact
/// membership testing through an integer echelon form.
#[derive(Debug, Clone)]
pub struct Lattice {
    generators: Vec<SymScalar>,
}

impl Lattice {
    pub fn new(generators: Vec<SymScalar>) -> Self {
        Lattice { generators }
    }

    pub fn generators(&self) -> &[SymScalar] {
        &self.generators
    }

    /// Integer echelon basis of the lattice scaled by `denominator`,
    /// as (pivot column, row) pairs.
    fn echelon(&self, denominator: &BigInt) -> Vec<(usize, BTreeMap<usize, BigInt>)> {
        let mut rows: Vec<BTreeMap<usize, BigInt>> = self
            .generators
            .iter()
            .map(|g| scaled_integer_row(g, denominator))
            .filter(|r| !r.is_empty())
            .collect();
        let mut basis = Vec::new();
        loop {
            rows.retain(|r| !r.is_empty());
            let Some(col) = rows.iter().filter_map(|r| r.keys().next().copied()).min() else {
                break;
            };
            // Euclid on the rows with a leading entry in `col`.
            loop {
                let mut active: Vec<usize> = rows
                    .iter()
                    .enumerate()
                    .filter(|(_, r)| r.keys().next() == Some(&col))
                    .map(|(i, _)| i)
                    .collect();
                if active.len() <= 1 {
                    break;
                }
                active.sort_by_key(|&i| rows[i][&col].abs());
                let p = active[0];
                let pv = rows[p][&col].clone();
                let prow = rows[p].clone();
                for &i in &active[1..] {
                    let q = rows[i][&col].div_floor(&pv);
                    let row = &mut rows[i];
                    for (k, v) in &prow {
                        let e = row.entry(*k).or_insert_with(BigInt::zero);
                        *e -= &q * v;
                    }
                    row.retain(|_, v| !v.is_zero());
                }
            }
            let idx = rows
                .iter()
                .position(|r| r.keys().next() == Some(&col))
                .expect("pivot row present");
            let mut row = rows.swap_remove(idx);
            if row[&col].sign() == BigSign::Minus {
                for v in row.values_mut() {
                    *v = -v.clone();
                }
            }
            basis.push((col, row));
        }
        basis
    }

    pub fn contains(&self, target: &SymScalar) -> bool {
        let denominator = common_denominator(self.generators.iter().chain(std::iter::once(target)));
        let basis = self.echelon(&denominator);
        let mut t = scaled_integer_row(target, &denominator);
        for (col, row) in &basis {
            let Some(tv) = t.get(col).cloned() else {
                continue;
            };
            let pv = &row[col];
            if !tv.is_multiple_of(pv) {
                return false;
            }
            let q = tv / pv;
            for (k, v) in row {
                let e = t.entry(*k).or_insert_with(BigInt::zero);
                *e -= &q * v;
            }
            t.retain(|_, v| !v.is_zero());
        }
        t.is_empty()
    }

    /// For a lattice of Q-rank one, its positive generator.
    pub fn positive_generator(
        &self,
        table: &SymbolTable,
        ceiling: u32,
    ) -> Result<Option<SymScalar>, ScalarError> {
        if q_rank(&self.generators) != 1 {
            return Ok(None);
        }
        let denominator = common_denominator(self.generators.iter());
        let basis = self.echelon(&denominator);
        let (_, row) = basis.into_iter().next().expect("rank one lattice has a basis row");
        let d = Rational::from_integer(denominator);
        let mut coeffs = BTreeMap::new();
        for (k, v) in row {
            coeffs.insert(k, Rational::from_integer(v) / &d);
        }
        let table_id = if coeffs.keys().all(|&k| k == 0) {
            FREE_TABLE
        } else {
            table.id
        };
        let g = SymScalar {
            table: table_id,
            coeffs,
        };
        Ok(Some(match g.sign(table, ceiling)? {
            Sign::Neg => -g,
            _ => g,
        }))
    }
}

fn common_denominator<'a>(vals: impl Iterator<Item = &'a SymScalar>) -> BigInt {
    let mut d = BigInt::one();
    for v in vals {
        for c in v.coeffs.values() {
            d = d.lcm(c.denom());
        }
    }
    d
}

fn scaled_integer_row(v: &SymScalar, denominator: &BigInt) -> BTreeMap<usize, BigInt> {
    v.coeffs
        .iter()
        .map(|(k, c)| {
            let s = c * Rational::from_integer(denominator.clone());
            debug_assert!(s.is_integer());
            (*k, s.to_integer())
        })
        .filter(|(_, v)| !v.is_zero())
        .collect()
}
