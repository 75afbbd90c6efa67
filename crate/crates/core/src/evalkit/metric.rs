use crate::geometry::{Freq, FrequencySet};

use super::EvalError;

/// Score charged to a true frequency left without a recovered partner: the
/// mean wrap-around distance of a uniformly random guess per component.
pub const UNMATCHED_PENALTY: f64 = 0.25;

/// `(1/d) Σ_α min(|Δ_α|, 1 − |Δ_α|)`.
pub fn torus_distance(a: Freq, b: Freq, d: usize) -> f64 {
    let s: f64 = (0..3)
        .map(|ax| {
            let x = (a[ax] - b[ax]).rem_euclid(1.0);
            x.min(1.0 - x)
        })
        .sum();
    s / d.max(1) as f64
}

/// Minimum-cost assignment of every row to a distinct column of a
/// `rows × cols` cost matrix (`rows ≤ cols`), by shortest augmenting paths
/// with potentials. Returns the column chosen for each row.
pub fn assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return vec![];
    }
    let m = cost[0].len();
    assert!(n <= m, "assignment needs at least as many columns as rows");
    // 1-based arrays with a virtual column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=m {
        if owner[j] != 0 {
            out[owner[j] - 1] = j - 1;
        }
    }
    out
}

fn distance_matrix(rows: &[Freq], cols: &[Freq], d: usize) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|&r| cols.iter().map(|&c| torus_distance(r, c, d)).collect())
        .collect()
}

/// Mean torus distance over the optimal pairing of two equal-size sets.
pub fn frequency_error(recovered: &FrequencySet, truth: &FrequencySet, d: usize) -> Result<f64, EvalError> {
    if recovered.len() != truth.len() {
        return Err(EvalError::SizeMismatch {
            recovered: recovered.len(),
            truth: truth.len(),
        });
    }
    if truth.is_empty() {
        return Ok(0.0);
    }
    let cost = distance_matrix(truth.points(), recovered.points(), d);
    let pick = assignment(&cost);
    let total: f64 = pick.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    Ok(total / truth.len() as f64)
}

/// Error of one trial with explicit accounting for cardinality mismatches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub error: f64,
    /// Set when the recovered set did not have the true cardinality.
    pub mismatch: bool,
}

/// Optimal pairing of the true frequencies with recovered ones; surplus
/// recoveries are ignored and every true frequency left unpaired costs
/// [`UNMATCHED_PENALTY`]. The score is the mean over the true frequencies.
pub fn score_recovery(recovered: &[Freq], truth: &[Freq], d: usize) -> Score {
    let k = truth.len();
    if k == 0 {
        return Score {
            error: 0.0,
            mismatch: !recovered.is_empty(),
        };
    }
    let mut cost = distance_matrix(truth, recovered, d);
    let pad = k.saturating_sub(recovered.len());
    for row in cost.iter_mut() {
        row.extend(std::iter::repeat_n(UNMATCHED_PENALTY, pad));
    }
    let pick = assignment(&cost);
    let total: f64 = pick.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    Score {
        error: total / k as f64,
        mismatch: recovered.len() != k,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(cost: &[Vec<f64>]) -> f64 {
        fn go(i: usize, cost: &[Vec<f64>], used: &mut Vec<bool>) -> f64 {
            if i == cost.len() {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for j in 0..cost[i].len() {
                if !used[j] {
                    used[j] = true;
                    best = best.min(cost[i][j] + go(i + 1, cost, used));
                    used[j] = false;
                }
            }
            best
        }
        go(0, cost, &mut vec![false; cost[0].len()])
    }

    fn set(points: Vec<Freq>) -> FrequencySet {
        FrequencySet::new([true; 3], points).unwrap()
    }

    #[test]
    fn wrap_around_by_inspection() {
        let a = FrequencySet::new([false, false, true], vec![[0.0, 0.0, 0.99]]).unwrap();
        let b = FrequencySet::new([false, false, true], vec![[0.0, 0.0, 0.01]]).unwrap();
        assert!((frequency_error(&a, &b, 1).unwrap() - 0.02).abs() < 1e-12);
    }

    #[test]
    fn permutation_invariance_and_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<Freq> = (0..5).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
        let mut shuffled = pts.clone();
        shuffled.rotate_left(2);
        shuffled.swap(0, 3);
        assert_eq!(frequency_error(&set(pts.clone()), &set(pts.clone()), 3).unwrap(), 0.0);
        assert_eq!(frequency_error(&set(shuffled), &set(pts), 3).unwrap(), 0.0);
    }

    #[test]
    fn assignment_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let n = rng.gen_range(1..=4);
            let m = rng.gen_range(n..=5);
            let cost: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.gen()).collect()).collect();
            let pick = assignment(&cost);
            let mut cols = pick.clone();
            cols.sort();
            cols.dedup();
            assert_eq!(cols.len(), n);
            let total: f64 = pick.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
            assert!((total - brute_force(&cost)).abs() < 1e-12);
        }
    }

    #[test]
    fn size_mismatch_is_reported() {
        let a = set(vec![[0.1, 0.2, 0.3]]);
        let b = set(vec![[0.1, 0.2, 0.3], [0.4, 0.5, 0.6]]);
        assert_eq!(
            frequency_error(&a, &b, 3),
            Err(EvalError::SizeMismatch { recovered: 1, truth: 2 })
        );
        let s = score_recovery(a.points(), b.points(), 3);
        assert!(s.mismatch);
        assert!((s.error - UNMATCHED_PENALTY / 2.0).abs() < 1e-15);
        let s = score_recovery(b.points(), a.points(), 3);
        assert!(s.mismatch && s.error == 0.0);
        let s = score_recovery(&[], b.points(), 3);
        assert_eq!(s.error, UNMATCHED_PENALTY);
    }
}
