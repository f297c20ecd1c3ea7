use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least 2 points, got {n}")]
    TooFew { n: usize },
    #[error("degenerate variance: {which} input is constant")]
    DegenerateVariance { which: &'static str },
    #[error("non-finite value in {which} input")]
    NonFinite { which: &'static str },
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<(), StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(StatsError::TooFew { n: x.len() });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite { which: "x" });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite { which: "y" });
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Centered second moments `(sxx, syy, sxy)`.
fn moments(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let (mx, my) = (mean(x), mean(y));
    x.iter()
        .zip(y)
        .fold((0.0, 0.0, 0.0), |(sxx, syy, sxy), (&a, &b)| {
            let (da, db) = (a - mx, b - my);
            (sxx + da * da, syy + db * db, sxy + da * db)
        })
}

/// Pearson product-moment correlation. Constant inputs are an error.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check_pair(x, y)?;
    let (sxx, syy, sxy) = moments(x, y);
    if sxx == 0.0 {
        return Err(StatsError::DegenerateVariance { which: "x" });
    }
    if syy == 0.0 {
        return Err(StatsError::DegenerateVariance { which: "y" });
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks with ties assigned their average rank.
pub fn rank(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && v[order[j]] == v[order[i]] {
            j += 1;
        }
        // positions i..j (0-based) share ranks i+1..=j
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

/// Spearman rank correlation: Pearson over average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check_pair(x, y)?;
    pearson(&rank(x), &rank(y))
}

/// Least-squares fit `y = slope * x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64), StatsError> {
    check_pair(x, y)?;
    let (sxx, _, sxy) = moments(x, y);
    if sxx == 0.0 {
        return Err(StatsError::DegenerateVariance { which: "x" });
    }
    let slope = sxy / sxx;
    Ok((slope, mean(y) - slope * mean(x)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Textbook single-pass formula, kept independent of the centered two-pass
    /// implementation above.
    fn pearson_textbook(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let sx: f64 = x.iter().sum();
        let sy: f64 = y.iter().sum();
        let sxx: f64 = x.iter().map(|a| a * a).sum();
        let syy: f64 = y.iter().map(|b| b * b).sum();
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
    }

    #[test]
    fn perfect_correlations() {
        assert_abs_diff_eq!(pearson(&[1., 2., 3.], &[1., 2., 3.]).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(pearson(&[1., 2., 3.], &[3., 2., 1.]).unwrap(), -1.0, epsilon = 1e-15);
    }

    #[test]
    fn textbook_oracle_case() {
        // x=(1,2,3,5), y=(2,2,4,5): n=4, sx=11, sy=13, sxx=39, syy=49, sxy=43
        // r = (172-143) / sqrt((156-121)(196-169)) = 29 / sqrt(945)
        let frozen = 29.0 / 945f64.sqrt();
        let x = [1., 2., 3., 5.];
        let y = [2., 2., 4., 5.];
        assert_abs_diff_eq!(pearson_textbook(&x, &y), frozen, epsilon = 1e-15);
        assert_abs_diff_eq!(pearson(&x, &y).unwrap(), frozen, epsilon = 1e-12);
        assert_abs_diff_eq!(frozen, 0.943_370_070_516_915_3, epsilon = 1e-15);
    }

    #[test]
    fn constant_input_is_an_error() {
        assert_eq!(
            pearson(&[2., 2., 2.], &[1., 2., 3.]),
            Err(StatsError::DegenerateVariance { which: "x" })
        );
        assert!(spearman(&[1., 2., 3.], &[4., 4., 4.]).is_err());
        assert!(matches!(pearson(&[1.], &[1.]), Err(StatsError::TooFew { n: 1 })));
        assert!(matches!(pearson(&[1., 2.], &[1.]), Err(StatsError::LengthMismatch { .. })));
        assert!(matches!(pearson(&[1., f64::NAN], &[1., 2.]), Err(StatsError::NonFinite { .. })));
    }

    #[test]
    fn average_ranks() {
        assert_eq!(rank(&[1., 2., 2., 3.]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(rank(&[5., 5., 5.]), vec![2.0, 2.0, 2.0]);
        assert_eq!(rank(&[3., 1., 2.]), vec![3.0, 1.0, 2.0]);
    }

    #[test]
    fn spearman_cases() {
        assert_abs_diff_eq!(spearman(&[1., 2., 3.], &[9., 4., 1.]).unwrap(), -1.0, epsilon = 1e-15);
        let x = [0.1, 0.5, 2.0, 7.0];
        let cubed: Vec<f64> = x.iter().map(|v| v * v * v + 4.0).collect();
        assert_abs_diff_eq!(spearman(&x, &cubed).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn spearman_ties_against_hand_ranks() {
        // ranks x = (1, 2.5, 2.5, 4), y = (1, 3, 2, 4); both mean 2.5
        // deviations x: (-1.5, 0, 0, 1.5), y: (-1.5, 0.5, -0.5, 1.5)
        // sxy = 4.5, sxx = 4.5, syy = 5 -> r = 4.5 / sqrt(22.5)
        let frozen = 4.5 / 22.5f64.sqrt();
        let x = [1., 2., 2., 3.];
        let y = [1., 3., 2., 4.];
        assert_abs_diff_eq!(pearson_textbook(&rank(&x), &rank(&y)), frozen, epsilon = 1e-15);
        assert_abs_diff_eq!(spearman(&x, &y).unwrap(), frozen, epsilon = 1e-12);
    }

    #[test]
    fn linear_fit_identity() {
        let (slope, intercept) = linear_fit(&[1., 2., 4.], &[1., 2., 4.]).unwrap();
        assert_abs_diff_eq!(slope, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(intercept, 0.0, epsilon = 1e-15);
        let (slope, intercept) = linear_fit(&[0., 1., 2.], &[1., 3., 5.]).unwrap();
        assert_abs_diff_eq!(slope, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(intercept, 1.0, epsilon = 1e-15);
    }

    fn vec_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (3usize..40).prop_flat_map(|n| {
            (
                prop::collection::vec(-100.0f64..100.0, n),
                prop::collection::vec(-100.0f64..100.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn pearson_symmetric((x, y) in vec_pair()) {
            if let (Ok(a), Ok(b)) = (pearson(&x, &y), pearson(&y, &x)) {
                prop_assert!((a - b).abs() < 1e-12);
                prop_assert!(a.abs() <= 1.0);
            }
        }

        #[test]
        fn pearson_affine_invariant((x, y) in vec_pair(), a in 0.01f64..50.0, b in -50.0f64..50.0) {
            if let Ok(r) = pearson(&x, &y) {
                let ax: Vec<f64> = x.iter().map(|v| a * v + b).collect();
                prop_assert!((pearson(&ax, &y).unwrap() - r).abs() < 1e-9);
                let ay: Vec<f64> = y.iter().map(|v| a * v + b).collect();
                prop_assert!((pearson(&x, &ay).unwrap() - r).abs() < 1e-9);
            }
        }

        #[test]
        fn spearman_is_pearson_of_ranks((x, y) in vec_pair()) {
            if let Ok(s) = spearman(&x, &y) {
                prop_assert_eq!(s, pearson(&rank(&x), &rank(&y)).unwrap());
            }
        }
    }
}
