//! Small numeric helpers shared across modules.

use std::f64::consts::PI;

/// Wrap an angle to the principal branch (-pi, pi].
pub(crate) fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Centered moving average with a window of `half + 1 + half` samples,
/// truncated at the ends of the series.
pub(crate) fn moving_average(values: &[f64], half: usize) -> Vec<f64> {
    let n = values.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let lo = i.saturating_sub(half);
        let hi = (i + half + 1).min(n);
        let sum: f64 = values[lo..hi].iter().sum();
        out.push(sum / (hi - lo) as f64);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_stays_on_principal_branch() {
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(0.1) - 0.1).abs() < 1e-15);
        assert!((wrap_angle(-0.1) + 0.1).abs() < 1e-15);
        assert!((wrap_angle(2.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn moving_average_truncates_at_ends() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        let m = moving_average(&v, 1);
        assert_eq!(m[0], 1.5);
        assert_eq!(m[2], 3.0);
        assert_eq!(m[4], 4.5);
    }
}
