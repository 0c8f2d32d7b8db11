//! Probability that two digit sequences add up to a given number.
//!
//! Digits are given most significant first. The computation runs from the
//! least significant column upward, carrying a distribution over the carry
//! bit; each column costs `2 · 10 · 10` operations.

use crate::error::{Error, Result};

pub type DigitDist = [f64; 10];

const TOL: f64 = 1e-9;

fn check(a: &[DigitDist], b: &[DigitDist]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::Domain("empty digit sequence".into()));
    }
    for (i, d) in a.iter().chain(b).enumerate() {
        let s: f64 = d.iter().sum();
        if d.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (s - 1.0).abs() > TOL {
            return Err(Error::Domain(format!(
                "digit distribution {i} is not a probability vector (sum {s})"
            )));
        }
    }
    Ok(())
}

/// Target digit of column `j` (counted from the least significant) and the final carry.
fn target_digits(target: u64, n: usize) -> Option<(Vec<usize>, usize)> {
    let mut t = target;
    let mut digits = Vec::with_capacity(n);
    for _ in 0..n {
        digits.push((t % 10) as usize);
        t /= 10;
    }
    (t <= 1).then_some((digits, t as usize))
}

/// `P(A + B = target)` where `A` and `B` have independent digits distributed as `a` and `b`.
pub fn mnist_sum_probability(a: &[DigitDist], b: &[DigitDist], target: u64) -> Result<f64> {
    check(a, b)?;
    let n = a.len();
    let Some((digits, last)) = target_digits(target, n) else {
        return Ok(0.0);
    };
    let mut carry = [1.0, 0.0];
    for j in 0..n {
        let (pa, pb) = (&a[n - 1 - j], &b[n - 1 - j]);
        let mut next = [0.0; 2];
        for (cin, &m) in carry.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for (x, &px) in pa.iter().enumerate() {
                for (y, &py) in pb.iter().enumerate() {
                    let s = x + y + cin;
                    if s % 10 == digits[j] {
                        next[s / 10] += m * px * py;
                    }
                }
            }
        }
        carry = next;
    }
    Ok(carry[last])
}

/// The probability together with its gradient with respect to every digit
/// probability of `a` and `b`.
pub fn mnist_sum_probability_grad(
    a: &[DigitDist],
    b: &[DigitDist],
    target: u64,
) -> Result<(f64, Vec<DigitDist>, Vec<DigitDist>)> {
    check(a, b)?;
    let n = a.len();
    let mut ga = vec![[0.0; 10]; n];
    let mut gb = vec![[0.0; 10]; n];
    let Some((digits, last)) = target_digits(target, n) else {
        return Ok((0.0, ga, gb));
    };
    // forward[j]: carry mass entering column j
    let mut forward = vec![[0.0; 2]; n + 1];
    forward[0] = [1.0, 0.0];
    for j in 0..n {
        let (pa, pb) = (&a[n - 1 - j], &b[n - 1 - j]);
        for cin in 0..2 {
            let m = forward[j][cin];
            for x in 0..10 {
                for y in 0..10 {
                    let s = x + y + cin;
                    if s % 10 == digits[j] {
                        forward[j + 1][s / 10] += m * pa[x] * pb[y];
                    }
                }
            }
        }
    }
    // backward[j][c]: probability of completing the target from column j with carry c
    let mut backward = vec![[0.0; 2]; n + 1];
    backward[n][last] = 1.0;
    for j in (0..n).rev() {
        let (pa, pb) = (&a[n - 1 - j], &b[n - 1 - j]);
        let (ia, ib) = (n - 1 - j, n - 1 - j);
        for cin in 0..2 {
            let f = forward[j][cin];
            let mut acc = 0.0;
            for x in 0..10 {
                for y in 0..10 {
                    let s = x + y + cin;
                    if s % 10 == digits[j] {
                        let after = backward[j + 1][s / 10];
                        acc += pa[x] * pb[y] * after;
                        ga[ia][x] += f * pb[y] * after;
                        gb[ib][y] += f * pa[x] * after;
                    }
                }
            }
            backward[j][cin] = acc;
        }
    }
    Ok((forward[n][last], ga, gb))
}

/// Unconstrained column statistics of `A + B`, indexed from the least
/// significant column.
#[derive(Clone, Debug, PartialEq)]
pub struct CarryTables {
    pub len: usize,
    /// Distribution of the carry entering each column (length `len + 1`).
    pub carry: Vec<[f64; 2]>,
    /// Distribution of each column's sum digit.
    pub digit: Vec<[f64; 10]>,
    /// Joint mass of (sum digit, outgoing carry) per column.
    pub joint: Vec<[[f64; 2]; 10]>,
}

impl CarryTables {
    /// Largest deviation between a column's joint mass and its incoming carry mass.
    pub fn conservation_error(&self) -> f64 {
        (0..self.len)
            .map(|j| {
                let out: f64 = self.joint[j].iter().flatten().sum();
                let inc: f64 = self.carry[j].iter().sum();
                (out - inc).abs()
            })
            .fold(0.0, f64::max)
    }
}

pub fn carry_tables(a: &[DigitDist], b: &[DigitDist]) -> Result<CarryTables> {
    check(a, b)?;
    let n = a.len();
    let mut carry = vec![[0.0; 2]; n + 1];
    carry[0] = [1.0, 0.0];
    let mut digit = vec![[0.0; 10]; n];
    let mut joint = vec![[[0.0; 2]; 10]; n];
    for j in 0..n {
        let (pa, pb) = (&a[n - 1 - j], &b[n - 1 - j]);
        for cin in 0..2 {
            for x in 0..10 {
                for y in 0..10 {
                    let s = x + y + cin;
                    let m = carry[j][cin] * pa[x] * pb[y];
                    joint[j][s % 10][s / 10] += m;
                    digit[j][s % 10] += m;
                    carry[j + 1][s / 10] += m;
                }
            }
        }
    }
    Ok(CarryTables {
        len: n,
        carry,
        digit,
        joint,
    })
}
