use serde::{Deserialize, Serialize};

/// Least-squares fit of ln y = intercept + slope·t.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogLinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub samples: usize,
}

/// Fits the trailing half of the samples that lie above 1e2·ε_mach times
/// the series maximum. Returns `None` with fewer than three usable samples.
pub fn log_linear_fit(t: &[f64], y: &[f64]) -> Option<LogLinearFit> {
    assert_eq!(t.len(), y.len());
    let max = y.iter().copied().fold(0.0f64, f64::max);
    if !(max > 0.0) || !max.is_finite() {
        return None;
    }
    let floor = 1e2 * f64::EPSILON * max;
    let kept: Vec<(f64, f64)> = t
        .iter()
        .zip(y)
        .filter(|(_, &v)| v > floor)
        .map(|(&a, &b)| (a, b.ln()))
        .collect();
    let window = &kept[kept.len() / 2..];
    if window.len() < 3 {
        return None;
    }
    let n = window.len() as f64;
    let mt = window.iter().map(|p| p.0).sum::<f64>() / n;
    let my = window.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for &(a, b) in window {
        stt += (a - mt) * (a - mt);
        sty += (a - mt) * (b - my);
        syy += (b - my) * (b - my);
    }
    if stt == 0.0 {
        return None;
    }
    let slope = sty / stt;
    let intercept = my - slope * mt;
    let ss_res: f64 = window
        .iter()
        .map(|&(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Some(LogLinearFit {
        slope,
        intercept,
        r_squared,
        t_start: window[0].0,
        t_end: window[window.len() - 1].0,
        samples: window.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exponential_rate() {
        let t: Vec<f64> = (0..100).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|&s| 3.0 * (-0.7 * s).exp()).collect();
        let f = log_linear_fit(&t, &y).unwrap();
        assert!((f.slope + 0.7).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-10);
        assert!(f.r_squared > 1.0 - 1e-12);
        assert_eq!(f.samples, 50);
        assert_eq!(f.t_start, t[50]);
    }

    #[test]
    fn drops_round_off_floor_before_windowing() {
        let t: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let y: Vec<f64> = t
            .iter()
            .map(|&s| if s < 20.0 { (-s).exp() } else { 1e-300 })
            .collect();
        let f = log_linear_fit(&t, &y).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-12);
        assert!(f.t_end < 20.0);
    }

    #[test]
    fn degenerate_series() {
        assert!(log_linear_fit(&[0.0, 1.0, 2.0], &[0.0, 0.0, 0.0]).is_none());
        assert!(log_linear_fit(&[0.0, 1.0], &[1.0, 0.5]).is_none());
    }
}
