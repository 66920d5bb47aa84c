//! Least-squares line fits in log-log coordinates.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
    pub n: usize,
}

/// Ordinary least squares `y ≈ slope·x + intercept`. Needs two distinct `x`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    Some(LineFit { slope, intercept, residual: (ss / nf).sqrt(), n })
}

/// Fit of `log v` against `log d` over pairs with `d, v > 0`.
pub fn fit_log_log(d: &[f64], v: &[f64]) -> Option<LineFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = d
        .iter()
        .zip(v)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0 && a.is_finite() && b.is_finite())
        .map(|(a, b)| (a.ln(), b.ln()))
        .unzip();
    fit_line(&xs, &ys)
}

/// `log10(max/min)` of the positive entries.
pub fn decades(d: &[f64]) -> f64 {
    let pos = d.iter().copied().filter(|x| *x > 0.0 && x.is_finite());
    let (lo, hi) = pos.fold((f64::INFINITY, 0.0f64), |(lo, hi), x| (lo.min(x), hi.max(x)));
    if hi > 0.0 {
        (hi / lo).log10()
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let d: Vec<f64> = (0..20).map(|k| 10f64.powf(-3.0 + k as f64 * 0.15)).collect();
        let v: Vec<f64> = d.iter().map(|x| 3.0 * x.powf(0.7)).collect();
        let f = fit_log_log(&d, &v).unwrap();
        assert!((f.slope - 0.7).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(f.residual < 1e-12);
        assert!((decades(&d) - 2.85).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(fit_line(&[1.0], &[2.0]).is_none());
        assert!(fit_line(&[1.0, 1.0], &[2.0, 3.0]).is_none());
        assert!(fit_log_log(&[1.0, 2.0], &[0.0, 0.0]).is_none());
    }
}
