//! Summaries of an `m × N` score matrix (one row per surrogate).

use crate::error::{Error, Result};

/// Indices of the `k` largest scores, highest first; equal scores keep
/// ascending index order.
pub fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx.truncate(k);
    idx
}

pub fn column_means(scores: &[Vec<f64>]) -> Vec<f64> {
    let n = scores.first().map_or(0, Vec::len);
    let m = scores.len() as f64;
    (0..n).map(|j| scores.iter().map(|r| r[j]).sum::<f64>() / m).collect()
}

/// Per element, the fraction of rows that rank it in their top `k`.
pub fn tip(scores: &[Vec<f64>], k: usize) -> Result<Vec<f64>> {
    let n = scores.first().map_or(0, Vec::len);
    if k == 0 || k > n {
        return Err(Error::Config(format!("top-k needs 1 <= k <= {n}, got {k}")));
    }
    let mut hits = vec![0usize; n];
    for row in scores {
        for i in top_k(row, k) {
            hits[i] += 1;
        }
    }
    Ok(hits.into_iter().map(|h| h as f64 / scores.len() as f64).collect())
}

/// Percentile `q ∈ [0, 1]` of sorted data, interpolating linearly between
/// order statistics at position `(len − 1)·q`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Per column: interquartile range and the 5th/95th percentile interval.
pub fn iqr_ci(scores: &[Vec<f64>]) -> (Vec<f64>, Vec<[f64; 2]>) {
    let n = scores.first().map_or(0, Vec::len);
    let mut iqr = Vec::with_capacity(n);
    let mut ci = Vec::with_capacity(n);
    for j in 0..n {
        let mut col: Vec<f64> = scores.iter().map(|r| r[j]).collect();
        col.sort_by(f64::total_cmp);
        iqr.push(percentile(&col, 0.75) - percentile(&col, 0.25));
        ci.push([percentile(&col, 0.05), percentile(&col, 0.95)]);
    }
    (iqr, ci)
}

/// Fraction of base-graph class probabilities within `eps` of one half.
pub fn indecision_fraction(predictions: &[f64], eps: f64) -> f64 {
    if predictions.is_empty() {
        return 0.0;
    }
    predictions.iter().filter(|p| (*p - 0.5).abs() < eps).count() as f64 / predictions.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ties_break_towards_lower_index() {
        assert_eq!(top_k(&[0.5, 0.9, 0.5, 0.9], 3), vec![1, 3, 0]);
        assert_eq!(top_k(&[0.0; 4], 2), vec![0, 1]);
    }

    #[test]
    fn tip_counts() {
        let s = vec![vec![0.9, 0.1, 0.0], vec![0.8, 0.3, 0.1], vec![0.2, 0.5, 0.1], vec![0.7, 0.0, 0.2]];
        assert_eq!(tip(&s, 1).unwrap(), vec![0.75, 0.25, 0.0]);
        assert_eq!(tip(&s, 3).unwrap(), vec![1.0; 3]);
        assert!(tip(&s, 0).is_err() && tip(&s, 4).is_err());
    }

    #[test]
    fn quartiles_by_hand() {
        // positions 0.75 and 2.25 over {1,2,3,4}: 1.75 and 3.25
        let (iqr, ci) = iqr_ci(&[vec![1.0], vec![2.0], vec![3.0], vec![4.0]]);
        assert!((iqr[0] - 1.5).abs() < 1e-15);
        assert!((ci[0][0] - 1.15).abs() < 1e-12 && (ci[0][1] - 3.85).abs() < 1e-12);
        let (iqr, ci) = iqr_ci(&vec![vec![2.0]; 5]);
        assert_eq!((iqr[0], ci[0]), (0.0, [2.0, 2.0]));
        let (iqr, _) = iqr_ci(&[vec![7.0]]);
        assert_eq!(iqr[0], 0.0);
    }

    #[test]
    fn indecision_counting() {
        assert_eq!(indecision_fraction(&[0.9; 4], 0.1), 0.0);
        assert_eq!(indecision_fraction(&[0.5; 4], 0.1), 1.0);
        assert_eq!(indecision_fraction(&[0.45, 0.95, 0.45, 0.95], 0.1), 0.5);
    }

    fn matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (1usize..8, 1usize..10)
            .prop_flat_map(|(n, m)| prop::collection::vec(prop::collection::vec(0.0f64..1.0, n), m))
    }

    proptest! {
        #[test]
        fn aggregates_ignore_row_order(s in matrix(), k in 1usize..8, c in 0.1f64..10.0) {
            let n = s[0].len();
            let k = k.min(n);
            let mut r = s.clone();
            r.reverse();
            r.rotate_left(s.len() / 2);
            prop_assert_eq!(tip(&s, k).unwrap(), tip(&r, k).unwrap());
            prop_assert_eq!(iqr_ci(&s), iqr_ci(&r));
            let (a, b) = (column_means(&s), column_means(&r));
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
            let scaled: Vec<Vec<f64>> = s.iter().map(|row| row.iter().map(|v| v * c).collect()).collect();
            let (i1, _) = iqr_ci(&s);
            let (i2, _) = iqr_ci(&scaled);
            for (x, y) in i1.iter().zip(&i2) {
                prop_assert!((x * c - y).abs() <= 1e-9);
                prop_assert!(*x >= 0.0);
            }
            prop_assert!(tip(&s, k).unwrap().iter().all(|t| (0.0..=1.0).contains(t)));
        }
    }
}
