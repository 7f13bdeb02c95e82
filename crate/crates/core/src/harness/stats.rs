/// Centered moving average over `±window` points, truncated at the edges.
pub fn smooth(series: &[f64], window: usize) -> Vec<f64> {
    let n = series.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for &v in series {
        prefix.push(prefix.last().copied().unwrap_or(0.0) + v);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(window);
            let hi = (i + window + 1).min(n);
            if window == 0 {
                series[i]
            } else {
                (prefix[hi] - prefix[lo]) / (hi - lo) as f64
            }
        })
        .collect()
}

/// Per-episode mean across seeds and one tenth of the population standard
/// deviation. Series are truncated to the shortest one.
pub fn band(per_seed: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let Some(len) = per_seed.iter().map(Vec::len).min() else {
        return (Vec::new(), Vec::new());
    };
    let k = per_seed.len() as f64;
    let mut mean = Vec::with_capacity(len);
    let mut spread = Vec::with_capacity(len);
    for i in 0..len {
        let m = per_seed.iter().map(|s| s[i]).sum::<f64>() / k;
        let var = per_seed.iter().map(|s| (s[i] - m).powi(2)).sum::<f64>() / k;
        mean.push(m);
        spread.push(0.1 * var.sqrt());
    }
    (mean, spread)
}

/// Mean of the last `count` entries (all of them if the series is shorter).
pub fn tail_mean(series: &[f64], count: usize) -> f64 {
    let tail = &series[series.len().saturating_sub(count)..];
    if tail.is_empty() {
        return f64::NAN;
    }
    tail.iter().sum::<f64>() / tail.len() as f64
}

/// Fixed-point text with 9 significant digits; byte-stable across runs.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0".into() } else { format!("{x}") };
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (8 - magnitude).clamp(0, 17) as usize;
    format!("{x:.decimals$}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn smoothing_examples() {
        assert_eq!(smooth(&[2.5; 40], 25), vec![2.5; 40]);
        let ramp: Vec<f64> = (0..=100).map(f64::from).collect();
        assert_eq!(smooth(&ramp, 0), ramp);
        let s = smooth(&ramp, 25);
        // mean(25..=75)
        assert!((s[50] - 50.0).abs() < 1e-12);
        // Truncated edge: mean(0..=25)
        assert!((s[0] - 12.5).abs() < 1e-12);
        assert!(smooth(&[], 3).is_empty());
    }

    #[test]
    fn band_examples() {
        let (m, b) = band(&[vec![1.0, 2.0], vec![1.0, 2.0]]);
        assert_eq!(m, vec![1.0, 2.0]);
        assert_eq!(b, vec![0.0, 0.0]);
        let (m, b) = band(&[vec![0.0], vec![2.0]]);
        assert_eq!(m, vec![1.0]);
        assert!((b[0] - 0.1).abs() < 1e-15);
        let (_, b) = band(&[vec![4.0, 5.0]]);
        assert_eq!(b, vec![0.0, 0.0]);
    }

    #[test]
    fn formatting_keeps_nine_significant_digits() {
        assert_eq!(fmt_sig(9.86), "9.86000000");
        assert_eq!(fmt_sig(-0.01), "-0.0100000000");
        assert_eq!(fmt_sig(1234.5), "1234.50000");
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(123456789012.0), "123456789012");
    }

    proptest! {
        #[test]
        fn band_is_non_negative(rows in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 5), 1..6)) {
            let (_, b) = band(&rows);
            prop_assert!(b.iter().all(|&v| v >= 0.0));
        }

        #[test]
        fn smoothing_stays_within_range(xs in prop::collection::vec(-10.0f64..10.0, 1..80), w in 0usize..30) {
            let s = smooth(&xs, w);
            let lo = xs.iter().copied().fold(f64::MAX, f64::min);
            let hi = xs.iter().copied().fold(f64::MIN, f64::max);
            prop_assert!(s.iter().all(|&v| v >= lo - 1e-9 && v <= hi + 1e-9));
        }
    }
}
