//! Which digits can still complete an observed sum.
//!
//! Digits are chosen most significant first, alternating between the two
//! numbers. At position `pos` the caller knows the column total
//! `T = a_pos + b_pos + carry_in`, which is fixed by the full sum and the
//! digits already chosen (see [`column_total`]). A carry into the column is
//! possible unless the low digits of the full sum are all nines.

use crate::error::{Error, Result};

fn pow10(k: usize) -> u64 {
    10u64.pow(k as u32)
}

/// True when no carry can enter position `pos`: the `seq_len - pos - 1`
/// lowest digits of `full_sum` are all nines (trivially true at the last position).
pub fn max_suffix(full_sum: u64, remain_len: usize) -> bool {
    let r = pow10(remain_len);
    full_sum % r == r - 1
}

/// Column total `a_pos + b_pos + carry_in` implied by `full_sum` and the
/// already chosen higher digits of both numbers.
pub fn column_total(full_sum: u64, prefix_a: &[u8], prefix_b: &[u8], seq_len: usize) -> Result<u64> {
    let pos = prefix_a.len();
    if prefix_b.len() != pos || pos >= seq_len {
        return Err(Error::Domain(format!(
            "prefixes of length {}/{} for a {seq_len}-digit sum",
            prefix_a.len(),
            prefix_b.len()
        )));
    }
    let mut rest = full_sum as i128;
    for i in 0..pos {
        rest -= (prefix_a[i] as i128 + prefix_b[i] as i128) * pow10(seq_len - 1 - i) as i128;
    }
    if rest < 0 {
        return Err(Error::Domain("prefix exceeds the sum".into()));
    }
    Ok((rest as u64) / pow10(seq_len - 1 - pos))
}

/// `mask[d]` is true iff digit `d` keeps the observed sum reachable: for the
/// first number (`curr_no = 0`) some second digit and carry must remain, for
/// the second number (`curr_no = 1`) `prev + d` must leave a feasible carry.
pub fn digit_mask(
    pos: usize,
    seq_len: usize,
    sum_digit: u64,
    full_sum: u64,
    curr_no: u8,
    prev: u8,
) -> Result<[bool; 10]> {
    if pos >= seq_len {
        return Err(Error::Domain(format!(
            "position {pos} outside a {seq_len}-digit number"
        )));
    }
    if sum_digit > 19 {
        return Err(Error::Domain(format!("column total {sum_digit} exceeds 19")));
    }
    if curr_no > 1 || prev > 9 {
        return Err(Error::Domain(format!("number index {curr_no} / previous digit {prev}")));
    }
    let remain_len = seq_len - pos - 1;
    let carry_possible = !max_suffix(full_sum, remain_len);
    let t = sum_digit as i64;
    let mut mask = [false; 10];
    for (d, m) in mask.iter_mut().enumerate() {
        let d = d as i64;
        *m = if curr_no == 0 {
            let remain = t - d;
            let max_diff = if carry_possible { 10 } else { 9 };
            (0..=max_diff).contains(&remain)
        } else {
            let pred = prev as i64 + d;
            pred == t || (carry_possible && pred == t - 1)
        };
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn last_position_examples() {
        let m = digit_mask(1, 2, 5, 15, 0, 0).unwrap();
        assert_eq!(m, [true, true, true, true, true, true, false, false, false, false]);
        let m = digit_mask(1, 2, 7, 17, 1, 3).unwrap();
        assert_eq!(m.iter().filter(|x| **x).count(), 1);
        assert!(m[4]);
    }

    #[test]
    fn carry_widens_first_choice() {
        // 10 + 9x: the low digit 0 admits a carry into the tens column
        let t = column_total(100, &[], &[], 2).unwrap();
        assert_eq!(t, 10);
        let m = digit_mask(0, 2, t, 100, 0, 0).unwrap();
        assert!(m.iter().all(|x| *x));
        let m = digit_mask(0, 2, t, 100, 1, 1).unwrap();
        assert_eq!(m.iter().filter(|x| **x).count(), 2);
        assert!(m[9] && m[8]);
    }

    #[test]
    fn domain_errors() {
        assert!(digit_mask(2, 2, 5, 5, 0, 0).is_err());
        assert!(digit_mask(0, 2, 25, 5, 0, 0).is_err());
        assert!(digit_mask(0, 2, 5, 5, 2, 0).is_err());
    }
}
