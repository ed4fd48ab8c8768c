//! Exact rational simplex for packing-form linear programs, plus the
//! `"p/q"` text form used for rationals in every report.

use num::{BigInt, BigRational, One, Signed, Zero};
use thiserror::Error;

pub type Rational = BigRational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LpError {
    #[error("the linear program is unbounded")]
    Unbounded,
    #[error("right-hand side must be non-negative")]
    NegativeBound,
    #[error("constraint row {0} has the wrong length")]
    RowLength(usize),
}

/// Optimal solution of a linear program.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LpSolution {
    pub value: Rational,
    pub x: Vec<Rational>,
}

/// Maximizes `objective · x` subject to `rows · x ≤ bounds` and `x ≥ 0`,
/// where every bound is non-negative (so the slack basis is feasible).
/// Pivoting follows Bland's rule.
pub fn maximize(
    objective: &[Rational],
    rows: &[Vec<Rational>],
    bounds: &[Rational],
) -> Result<LpSolution, LpError> {
    let n = objective.len();
    let m = rows.len();
    if bounds.iter().any(Signed::is_negative) {
        return Err(LpError::NegativeBound);
    }
    if let Some(i) = rows.iter().position(|r| r.len() != n) {
        return Err(LpError::RowLength(i));
    }
    let width = n + m + 1;
    // tableau rows: [coefficients | slacks | rhs]
    let mut tab: Vec<Vec<Rational>> = Vec::with_capacity(m);
    for (i, row) in rows.iter().enumerate() {
        let mut r = vec![Rational::zero(); width];
        r[..n].clone_from_slice(row);
        r[n + i] = Rational::one();
        r[width - 1] = bounds[i].clone();
        tab.push(r);
    }
    // reduced costs: z_j - c_j
    let mut cost = vec![Rational::zero(); width];
    for (j, c) in objective.iter().enumerate() {
        cost[j] = -c.clone();
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    loop {
        let Some(enter) = (0..width - 1).find(|&j| cost[j].is_negative()) else {
            break;
        };
        let mut leave: Option<(usize, Rational)> = None;
        for (i, row) in tab.iter().enumerate() {
            if row[enter].is_positive() {
                let ratio = &row[width - 1] / &row[enter];
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => ratio < *lr || (ratio == *lr && basis[i] < basis[*li]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let Some((pivot_row, _)) = leave else {
            return Err(LpError::Unbounded);
        };
        let pivot = tab[pivot_row][enter].clone();
        for v in tab[pivot_row].iter_mut() {
            *v = &*v / &pivot;
        }
        let prow = tab[pivot_row].clone();
        for (i, row) in tab.iter_mut().enumerate() {
            if i != pivot_row && !row[enter].is_zero() {
                let f = row[enter].clone();
                for (v, p) in row.iter_mut().zip(&prow) {
                    *v -= &f * p;
                }
            }
        }
        if !cost[enter].is_zero() {
            let f = cost[enter].clone();
            for (v, p) in cost.iter_mut().zip(&prow) {
                *v -= &f * p;
            }
        }
        basis[pivot_row] = enter;
    }

    let mut x = vec![Rational::zero(); n];
    for (i, &b) in basis.iter().enumerate() {
        if b < n {
            x[b] = tab[i][width - 1].clone();
        }
    }
    Ok(LpSolution {
        value: cost[width - 1].clone(),
        x,
    })
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(p: i64, q: i64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

/// `"p/q"`, always with a denominator (`"1/1"`, `"0/1"`).
pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Accepts `"p/q"` or a bare integer.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    match text.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().ok()?;
            let q: BigInt = q.trim().parse().ok()?;
            (!q.is_zero()).then(|| Rational::new(p, q))
        }
        None => text.parse::<BigInt>().ok().map(Rational::from_integer),
    }
}

/// Approximate value as a float, for reporting only.
pub fn to_f64(r: &Rational) -> f64 {
    use num::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}
