//! Brute-force oracles over all σ-subsets (Gosper's hack) and all 2^σ sign patterns.

use std::cmp::Ordering;

use crate::instance::{objective, SilsInstance, SparseSignVector};
use crate::{Result, SilsError};

pub const DEFAULT_UNIQUENESS_TOL: f64 = 1e-9;
pub const ENUMERATION_BUDGET: f64 = 1e8;
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ExactResult {
    pub best_x: SparseSignVector,
    pub best_value: f64,
    pub unique: bool,
    /// +∞ when there is a single candidate.
    pub second_best_value: f64,
    /// Number of (support, sign) candidates visited.
    pub candidates: u64,
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// C(d, σ)·2^σ.
pub fn candidate_count(d: usize, sigma: usize) -> f64 {
    binomial(d, sigma) * 2f64.powi(sigma as i32)
}

fn check_budget(inst: &SilsInstance) -> Result<()> {
    let count = candidate_count(inst.d(), inst.sigma);
    if count > ENUMERATION_BUDGET || inst.d() > 63 {
        return Err(SilsError::Budget(count));
    }
    Ok(())
}

/// Visits every σ-subset of 0..d in increasing bitmask order.
fn for_each_support(d: usize, sigma: usize, mut f: impl FnMut(&[usize])) {
    let mut mask: u64 = (1u64 << sigma) - 1;
    let limit: u64 = 1u64 << d;
    let mut idx = Vec::with_capacity(sigma);
    while mask < limit {
        idx.clear();
        let mut m = mask;
        while m != 0 {
            idx.push(m.trailing_zeros() as usize);
            m &= m - 1;
        }
        f(&idx);
        // Gosper's hack: next integer with the same popcount.
        let c = mask & mask.wrapping_neg();
        let r = mask + c;
        mask = (((r ^ mask) >> 2) / c) | r;
    }
}

/// Sign pattern `bits` assigns −1 to position k when bit k is set.
#[inline]
fn sign(bits: u64, k: usize) -> f64 {
    if bits >> k & 1 == 1 {
        -1.0
    } else {
        1.0
    }
}

fn sign_key(bits: u64, sigma: usize) -> Vec<u8> {
    (0..sigma).map(|k| (bits >> k & 1) as u8).collect()
}

/// Lexicographic order on (support, signs) with + before −.
fn lex_cmp(a: &(Vec<usize>, u64), b: &(Vec<usize>, u64), sigma: usize) -> Ordering {
    a.0.cmp(&b.0).then_with(|| sign_key(a.1, sigma).cmp(&sign_key(b.1, sigma)))
}

pub fn solve_exact(inst: &SilsInstance, uniqueness_tol: f64) -> Result<ExactResult> {
    check_budget(inst)?;
    let (d, sigma) = (inst.d(), inst.sigma);
    let g = inst.gram();
    let h = inst.m.transpose() * &inst.b / inst.n() as f64;
    let c0 = inst.b.norm_squared() / inst.n() as f64;

    let mut best: Option<(f64, (Vec<usize>, u64))> = None;
    let mut second = f64::INFINITY;
    let mut count = 0u64;
    for_each_support(d, sigma, |s| {
        for bits in 0..(1u64 << sigma) {
            count += 1;
            let mut v = c0;
            for a in 0..sigma {
                let xa = sign(bits, a);
                v -= 2.0 * xa * h[s[a]];
                v += g[(s[a], s[a])];
                for bb in (a + 1)..sigma {
                    v += 2.0 * xa * sign(bits, bb) * g[(s[a], s[bb])];
                }
            }
            match &best {
                None => best = Some((v, (s.to_vec(), bits))),
                Some((bv, key)) => {
                    let cand = (s.to_vec(), bits);
                    let better = v < *bv || (v == *bv && lex_cmp(&cand, key, sigma) == Ordering::Less);
                    if better {
                        second = *bv;
                        best = Some((v, cand));
                    } else if v < second {
                        second = v;
                    }
                }
            }
        }
    });
    let (_, (support, bits)) = best.expect("at least one candidate");
    let mut x = vec![0i8; d];
    for (k, &i) in support.iter().enumerate() {
        x[i] = if bits >> k & 1 == 1 { -1 } else { 1 };
    }
    let best_x = SparseSignVector::new(x)?;
    let best_value = objective(inst, &best_x.to_vector())?;
    let second_best_value = second.max(best_value);
    Ok(ExactResult {
        unique: second_best_value - best_value > uniqueness_tol,
        best_x,
        best_value,
        second_best_value,
        candidates: count,
    })
}

/// Some σ-sparse sign vector with |Mx − b| ≤ 1e-9 entrywise, if one exists
/// (the first in enumeration order).
pub fn solve_sils0(inst: &SilsInstance) -> Result<Option<SparseSignVector>> {
    check_budget(inst)?;
    let (n, d, sigma) = (inst.n(), inst.d(), inst.sigma);
    let mut found: Option<SparseSignVector> = None;
    let mut r = vec![0.0; n];
    for_each_support(d, sigma, |s| {
        if found.is_some() {
            return;
        }
        for bits in 0..(1u64 << sigma) {
            for (i, ri) in r.iter_mut().enumerate() {
                *ri = -inst.b[i];
            }
            for (k, &j) in s.iter().enumerate() {
                let sg = sign(bits, k);
                for (i, ri) in r.iter_mut().enumerate() {
                    *ri += sg * inst.m[(i, j)];
                }
            }
            if r.iter().all(|v| v.abs() <= FEASIBILITY_TOL) {
                let mut x = vec![0i8; d];
                for (k, &j) in s.iter().enumerate() {
                    x[j] = sign(bits, k) as i8;
                }
                found = SparseSignVector::new(x).ok();
                return;
            }
        }
    });
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{Mat, Vector};

    #[test]
    fn identity_example() {
        let inst = SilsInstance::new(Mat::identity(3, 3), Vector::from_vec(vec![1.0, 0.0, 0.0]), 1).unwrap();
        let r = solve_exact(&inst, DEFAULT_UNIQUENESS_TOL).unwrap();
        assert_eq!(r.best_x.entries(), &[1, 0, 0]);
        assert_eq!(r.best_value, 0.0);
        assert!(r.unique);
        assert_eq!(r.candidates, 6);
    }

    #[test]
    fn zero_rhs_is_ambiguous() {
        let m = Mat::from_row_slice(2, 3, &[1.0, 2.0, 0.5, 0.0, 1.0, 0.5]);
        let inst = SilsInstance::new(m, Vector::zeros(2), 1).unwrap();
        let r = solve_exact(&inst, DEFAULT_UNIQUENESS_TOL).unwrap();
        assert!(!r.unique);
        assert!((r.best_value - 0.25).abs() < 1e-15);
        assert_eq!(r.best_x.entries(), &[0, 0, 1]);
    }

    #[test]
    fn gosper_visits_all_subsets() {
        let mut seen = Vec::new();
        for_each_support(5, 2, |s| seen.push(s.to_vec()));
        assert_eq!(seen.len(), 10);
        assert_eq!(seen[0], vec![0, 1]);
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 10);
    }

    #[test]
    fn sils0_unrepresentable() {
        let inst = SilsInstance::new(Mat::identity(2, 2), Vector::from_vec(vec![1.0, 2.0]), 1).unwrap();
        assert_eq!(solve_sils0(&inst).unwrap(), None);
    }

    #[test]
    fn budget_guard() {
        let inst = SilsInstance::new(Mat::identity(40, 40), Vector::zeros(40), 12).unwrap();
        assert!(matches!(solve_exact(&inst, 1e-9), Err(SilsError::Budget(_))));
    }
}
