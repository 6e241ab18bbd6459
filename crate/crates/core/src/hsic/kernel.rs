//! Gaussian Gram matrices, centering and the normalized HSIC.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEGENERATE_NORM: f64 = 1e-12;

/// Either a fixed positive bandwidth or the median of pairwise absolute
/// differences (1.0 when that median is zero).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    Median,
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelConfig {
    pub input: Bandwidth,
    pub output: Bandwidth,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { input: Bandwidth::Median, output: Bandwidth::Median }
    }
}

impl Bandwidth {
    pub fn resolve(self, values: &[f64]) -> Result<f64> {
        match self {
            Bandwidth::Fixed(s) if s > 0.0 && s.is_finite() => Ok(s),
            Bandwidth::Fixed(s) => Err(Error::Config(format!("bandwidth must be positive, got {s}"))),
            Bandwidth::Median => Ok(median_bandwidth(values)),
        }
    }
}

pub fn median_bandwidth(values: &[f64]) -> f64 {
    let mut diffs = Vec::with_capacity(values.len() * values.len().saturating_sub(1) / 2);
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            diffs.push((values[i] - values[j]).abs());
        }
    }
    if diffs.is_empty() {
        return 1.0;
    }
    diffs.sort_by(f64::total_cmp);
    let h = diffs.len() / 2;
    let med = if diffs.len() % 2 == 1 { diffs[h] } else { 0.5 * (diffs[h - 1] + diffs[h]) };
    if med > 0.0 {
        med
    } else {
        1.0
    }
}

/// Symmetric `p × p` matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    size: usize,
    entries: Vec<f64>,
    normalized: bool,
    degenerate: bool,
}

impl GramMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Centering removed everything; the matrix is all zeros.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn frobenius(&self) -> f64 {
        self.entries.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

pub fn gaussian_gram(values: &[f64], sigma: f64) -> Result<GramMatrix> {
    if !(sigma > 0.0) {
        return Err(Error::Config(format!("bandwidth must be positive, got {sigma}")));
    }
    let p = values.len();
    let scale = 1.0 / (2.0 * sigma * sigma);
    let mut entries = vec![0.0; p * p];
    for i in 0..p {
        entries[i * p + i] = 1.0;
        for j in 0..i {
            let d = values[i] - values[j];
            let k = (-d * d * scale).exp();
            entries[i * p + j] = k;
            entries[j * p + i] = k;
        }
    }
    Ok(GramMatrix { size: p, entries, normalized: false, degenerate: false })
}

/// `H G H / ‖H G H‖_F` with `H = I − 11ᵀ/p`.
pub fn center_normalize(raw: &GramMatrix) -> GramMatrix {
    let p = raw.size;
    let row_means: Vec<f64> = raw.entries.chunks_exact(p.max(1)).map(|r| r.iter().sum::<f64>() / p as f64).collect();
    let grand = row_means.iter().sum::<f64>() / p as f64;
    let mut entries = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..=i {
            // symmetric input: column means equal row means
            let v = raw.entries[i * p + j] - row_means[i] - row_means[j] + grand;
            entries[i * p + j] = v;
            entries[j * p + i] = v;
        }
    }
    let norm = entries.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < DEGENERATE_NORM || !norm.is_finite() {
        return GramMatrix { size: p, entries: vec![0.0; p * p], normalized: true, degenerate: true };
    }
    entries.iter_mut().for_each(|x| *x /= norm);
    GramMatrix { size: p, entries, normalized: true, degenerate: false }
}

/// Normalized Gram of a value vector under the given bandwidth rule.
pub fn normalized_gram(values: &[f64], bandwidth: Bandwidth) -> Result<GramMatrix> {
    let sigma = bandwidth.resolve(values)?;
    Ok(center_normalize(&gaussian_gram(values, sigma)?))
}

/// `tr(K L)` for symmetric matrices of equal size.
pub fn hsic(k: &GramMatrix, l: &GramMatrix) -> Result<f64> {
    if k.size != l.size {
        return Err(Error::Dimension(format!("Gram sizes differ: {} vs {}", k.size, l.size)));
    }
    Ok(k.entries.iter().zip(&l.entries).map(|(a, b)| a * b).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn constant_vector_gives_ones_and_degenerates() {
        let g = gaussian_gram(&[0.3; 5], 0.7).unwrap();
        assert!(g.entries().iter().all(|&x| x == 1.0));
        let n = center_normalize(&g);
        assert!(n.is_degenerate());
        assert!(n.entries().iter().all(|&x| x == 0.0));
        let other = normalized_gram(&[0.0, 1.0, 0.0, 1.0, 1.0], Bandwidth::Median).unwrap();
        assert_eq!(hsic(&n, &other).unwrap(), 0.0);
    }

    #[test]
    fn analytic_off_diagonal() {
        let sigma = 0.8;
        let g = gaussian_gram(&[0.0, sigma * 2f64.sqrt()], sigma).unwrap();
        assert!((g.get(0, 1) - (-1f64).exp()).abs() < 1e-15);
        assert!((g.get(0, 1) - 0.367879).abs() < 1e-6);
        assert!(gaussian_gram(&[0.0], 0.0).is_err());
        assert!(Bandwidth::Fixed(-1.0).resolve(&[0.0]).is_err());
    }

    #[test]
    fn binary_column_has_two_levels() {
        let col = [1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0];
        let sigma = median_bandwidth(&col);
        // 12 of 21 pairs differ, so the median difference is 1
        assert_eq!(sigma, 1.0);
        let off = (-1.0 / (2.0 * sigma * sigma)).exp();
        let g = gaussian_gram(&col, sigma).unwrap();
        for i in 0..7 {
            for j in 0..7 {
                let want = if col[i] == col[j] { 1.0 } else { off };
                assert_eq!(g.get(i, j), want);
            }
        }
    }

    #[test]
    fn median_falls_back_when_mostly_equal() {
        assert_eq!(median_bandwidth(&[1.0, 1.0, 1.0, 1.0, 0.0]), 1.0);
        assert_eq!(median_bandwidth(&[1.0, 1.0, 1.0, 0.0]), 0.5);
        assert_eq!(median_bandwidth(&[0.0, 0.25, 0.75]), 0.5);
        assert_eq!(median_bandwidth(&[0.0, 0.5, 1.0, 3.0]), 1.5);
    }

    #[test]
    fn size_mismatch_is_an_error() {
        let a = normalized_gram(&[0.0, 1.0, 2.0], Bandwidth::Median).unwrap();
        let b = normalized_gram(&[0.0, 1.0], Bandwidth::Median).unwrap();
        assert!(matches!(hsic(&a, &b), Err(Error::Dimension(_))));
    }

    /// Monte-Carlo null: HSIC of independent binary/uniform columns at
    /// p = 200 over 40 draws stays below 0.25, while a column against
    /// itself scores 1.
    #[test]
    fn independent_columns_have_small_hsic() {
        let mut rng = seed::rng(17);
        let mut worst = 0.0f64;
        for _ in 0..40 {
            let x: Vec<f64> = (0..200).map(|_| f64::from(rng.random_bool(0.5) as u8)).collect();
            let y: Vec<f64> = (0..200).map(|_| rng.random::<f64>()).collect();
            let k = normalized_gram(&x, Bandwidth::Median).unwrap();
            let l = normalized_gram(&y, Bandwidth::Median).unwrap();
            worst = worst.max(hsic(&k, &l).unwrap().abs());
            assert!((hsic(&k, &k).unwrap() - 1.0).abs() < 1e-9);
        }
        assert!(worst < 0.25, "{worst}");
    }

    proptest! {
        #[test]
        fn normalized_gram_identities(values in prop::collection::vec(-3.0f64..3.0, 2..40), other_seed in any::<u64>()) {
            let k = normalized_gram(&values, Bandwidth::Median).unwrap();
            let p = values.len();
            for i in 0..p {
                let row: f64 = (0..p).map(|j| k.get(i, j)).sum();
                prop_assert!(row.abs() <= 1e-8);
                for j in 0..p {
                    prop_assert!((k.get(i, j) - k.get(j, i)).abs() <= 1e-12);
                }
            }
            if !k.is_degenerate() {
                prop_assert!((k.frobenius() - 1.0).abs() < 1e-9);
                prop_assert!((hsic(&k, &k).unwrap() - 1.0).abs() < 1e-9);
            }
            let mut rng = seed::rng(other_seed);
            let ys: Vec<f64> = (0..p).map(|_| rng.random::<f64>()).collect();
            let l = normalized_gram(&ys, Bandwidth::Median).unwrap();
            let (a, b) = (hsic(&k, &l).unwrap(), hsic(&l, &k).unwrap());
            prop_assert!((a - b).abs() <= 1e-12);
            prop_assert!(a.abs() <= 1.0 + 1e-9);
        }

        #[test]
        fn median_bandwidth_is_scale_covariant(values in prop::collection::vec(0.0f64..1.0, 3..30), c in 0.1f64..50.0) {
            let a = normalized_gram(&values, Bandwidth::Median).unwrap();
            let scaled: Vec<f64> = values.iter().map(|v| v * c).collect();
            let b = normalized_gram(&scaled, Bandwidth::Median).unwrap();
            for (x, y) in a.entries().iter().zip(b.entries()) {
                prop_assert!((x - y).abs() <= 1e-9);
            }
        }
    }
}
