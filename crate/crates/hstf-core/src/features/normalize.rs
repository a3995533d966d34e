//! Statistical-value normalization: y = (1 - e^-x) / (1 + e^-x).
//! Maps [0, inf) into [0, 1), strictly monotone, zero at zero.

/// Normalize one statistical value. Mirrored around zero so large
/// negative inputs cannot overflow e^-x.
pub fn normalize_stat_scalar(x: f64) -> f64 {
    if x < 0.0 {
        -positive_branch(-x)
    } else {
        positive_branch(x)
    }
}

fn positive_branch(x: f64) -> f64 {
    let e = (-x).exp();
    (1.0 - e) / (1.0 + e)
}

/// Elementwise normalization; preserves length.
pub fn normalize_stat(values: &[f64]) -> Vec<f64> {
    values.iter().map(|&x| normalize_stat_scalar(x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_maps_to_zero() {
        assert_eq!(normalize_stat_scalar(0.0), 0.0);
    }

    #[test]
    fn unit_value() {
        // (1 - e^-1) / (1 + e^-1), evaluated independently.
        let e1 = (-1.0f64).exp();
        let expected = (1.0 - e1) / (1.0 + e1);
        assert!((expected - 0.46211715726000974).abs() < 1e-15);
        assert!((normalize_stat_scalar(1.0) - expected).abs() < 1e-15);
    }

    #[test]
    fn saturates_toward_one() {
        assert!((normalize_stat_scalar(200.0) - 1.0).abs() < 1e-12);
        assert!(normalize_stat_scalar(200.0) <= 1.0);
    }

    #[test]
    fn preserves_length() {
        let out = normalize_stat(&[0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(out.len(), 5);
    }

    proptest! {
        #[test]
        fn odd_function(x in -50.0f64..50.0) {
            prop_assert_eq!(normalize_stat_scalar(-x), -normalize_stat_scalar(x));
        }

        #[test]
        fn matches_half_angle_tanh(x in -50.0f64..50.0) {
            // Algebraic identity used as a cross-check oracle.
            prop_assert!((normalize_stat_scalar(x) - (x / 2.0).tanh()).abs() < 1e-12);
        }

        #[test]
        fn monotone_and_bounded(a in 0.0f64..500.0, d in 1e-9f64..10.0) {
            let ya = normalize_stat_scalar(a);
            let yb = normalize_stat_scalar(a + d);
            // Strictly below 1 mathematically; saturates to 1.0 in f64
            // once e^-x underflows past the 53-bit mantissa.
            prop_assert!(ya >= 0.0 && ya <= 1.0);
            prop_assert!(a >= 36.0 || ya < 1.0);
            prop_assert!(yb >= ya);
        }
    }
}
