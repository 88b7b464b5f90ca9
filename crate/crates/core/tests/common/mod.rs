#![allow(dead_code)]

use foliage::scalar::{Rational, SymScalar, SymbolTable};
use num_bigint::BigInt;
use num_traits::{One, Zero};

pub const ROOTS: [&str; 4] = ["sqrt(2)", "sqrt(3)", "sqrt(5)", "sqrt(7)"];

/// Table with `n` square-root symbols `s1..sn`, independent over Q together with 1.
pub fn table(n: usize) -> SymbolTable {
    let mut t = SymbolTable::new();
    for (i, r) in ROOTS.iter().take(n).enumerate() {
        t.declare(&format!("s{}", i + 1), r).unwrap();
    }
    t
}

pub fn q(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// `c[0] + Σ c[i]·s_i`.
pub fn scalar(t: &SymbolTable, c: &[(i64, i64)]) -> SymScalar {
    let mut s = SymScalar::zero();
    for (i, &(n, d)) in c.iter().enumerate() {
        s = s + t.symbol(i).scale(&q(n, d));
    }
    s
}

pub fn coefficient_row(s: &SymScalar, width: usize) -> Vec<Rational> {
    (0..width).map(|i| s.coeff(i)).collect()
}

fn det(m: &[Vec<Rational>]) -> Rational {
    let n = m.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut total = Rational::zero();
    loop {
        let inversions = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| perm[i] > perm[j])
            .count();
        let mut term = if inversions % 2 == 0 { Rational::one() } else { -Rational::one() };
        for (r, &c) in perm.iter().enumerate() {
            term *= &m[r][c];
        }
        total += term;
        // next permutation in lexicographic order
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| perm[i] < perm[i + 1]) else {
            break;
        };
        let j = (i + 1..n).rev().find(|&j| perm[j] > perm[i]).unwrap();
        perm.swap(i, j);
        perm[i + 1..].reverse();
    }
    total
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..(1 << n))
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|i| m & (1 << i) != 0).collect())
        .collect()
}

/// Rank as the size of the largest nonvanishing minor.
pub fn minor_rank(rows: &[Vec<Rational>]) -> usize {
    let (r, c) = (rows.len(), rows.first().map_or(0, |x| x.len()));
    for k in (1..=r.min(c)).rev() {
        for rs in subsets(r, k) {
            for cs in subsets(c, k) {
                let m: Vec<Vec<Rational>> = rs
                    .iter()
                    .map(|&i| cs.iter().map(|&j| rows[i][j].clone()).collect())
                    .collect();
                if !det(&m).is_zero() {
                    return k;
                }
            }
        }
    }
    0
}
