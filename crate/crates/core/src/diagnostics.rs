//! Serial-correlation and spectral diagnostics.

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Sample autocorrelation at lags `1..=max_lag` (biased, divisor `n`).
pub fn acf(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return vec![0.0; max_lag];
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let d: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let c0: f64 = d.iter().map(|v| v * v).sum();
    (1..=max_lag)
        .map(|h| {
            if h >= n || c0 == 0.0 {
                return 0.0;
            }
            d[h..].iter().zip(&d[..n - h]).map(|(a, b)| a * b).sum::<f64>() / c0
        })
        .collect()
}

/// Fraction of `acf` values outside the `±1.96/√n` band.
pub fn spike_fraction(acf: &[f64], n: usize) -> f64 {
    if acf.is_empty() {
        return 0.0;
    }
    let band = 1.96 / (n as f64).sqrt();
    acf.iter().filter(|r| r.abs() > band).count() as f64 / acf.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LjungBox {
    pub lags: usize,
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Ljung-Box portmanteau test over `lags` autocorrelations, with the
/// degrees of freedom reduced by `fitted` estimated parameters.
pub fn ljung_box(x: &[f64], lags: usize, fitted: usize) -> LjungBox {
    let n = x.len() as f64;
    let r = acf(x, lags);
    let statistic = n
        * (n + 2.0)
        * r.iter()
            .enumerate()
            .map(|(i, rk)| rk * rk / (n - (i + 1) as f64))
            .sum::<f64>();
    let dof = lags.saturating_sub(fitted).max(1);
    let p_value = ChiSquared::new(dof as f64)
        .map(|d| d.sf(statistic))
        .unwrap_or(f64::NAN);
    LjungBox {
        lags,
        statistic,
        dof,
        p_value,
    }
}

/// Periodogram smoothed by a centered moving average of `2·half_width + 1`
/// ordinates. Returns `(frequency in cycles per step, power)` for the
/// Fourier frequencies in `(0, 0.5]`.
pub fn smoothed_periodogram(x: &[f64], half_width: usize) -> Vec<(f64, f64)> {
    let n = x.len();
    if n < 2 {
        return Vec::new();
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let raw: Vec<f64> = (1..=n / 2)
        .map(|k| buf[k].norm_sqr() / n as f64)
        .collect();
    let m = raw.len();
    let mut prefix = vec![0.0; m + 1];
    for (i, v) in raw.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
    }
    (0..m)
        .map(|i| {
            let lo = i.saturating_sub(half_width);
            let hi = (i + half_width + 1).min(m);
            let power = (prefix[hi] - prefix[lo]) / (hi - lo) as f64;
            ((i + 1) as f64 / n as f64, power)
        })
        .collect()
}

/// The `count` highest local maxima of a spectrum, strongest first, with
/// peaks closer than `min_separation` (in cycles per step) suppressed.
pub fn spectral_peaks(spectrum: &[(f64, f64)], count: usize, min_separation: f64) -> Vec<(f64, f64)> {
    let mut maxima: Vec<(f64, f64)> = (0..spectrum.len())
        .filter(|&i| {
            let p = spectrum[i].1;
            (i == 0 || spectrum[i - 1].1 <= p) && (i + 1 == spectrum.len() || spectrum[i + 1].1 <= p)
        })
        .map(|i| spectrum[i])
        .collect();
    maxima.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for peak in maxima {
        if out.iter().all(|q| (q.0 - peak.0).abs() >= min_separation) {
            out.push(peak);
            if out.len() == count {
                break;
            }
        }
    }
    out
}

/// Median of the spectrum's power values.
pub fn median_power(spectrum: &[(f64, f64)]) -> f64 {
    let mut p: Vec<f64> = spectrum.iter().map(|s| s.1).collect();
    if p.is_empty() {
        return 0.0;
    }
    p.sort_by(f64::total_cmp);
    let mid = p.len() / 2;
    if p.len() % 2 == 0 {
        0.5 * (p[mid - 1] + p[mid])
    } else {
        p[mid]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn acf_of_ar1() {
        let e = noise(20_000, 1);
        let mut x = vec![0.0; e.len()];
        for t in 1..x.len() {
            x[t] = 0.6 * x[t - 1] + e[t];
        }
        let r = acf(&x, 3);
        assert!((r[0] - 0.6).abs() < 0.02);
        assert!((r[1] - 0.36).abs() < 0.03);
    }

    #[test]
    fn diurnal_peak_location() {
        let n = 144 * 200;
        let e = noise(n, 2);
        let x: Vec<f64> = (0..n)
            .map(|t| (2.0 * std::f64::consts::PI * t as f64 / 144.0).sin() + 0.5 * e[t])
            .collect();
        let s = smoothed_periodogram(&x, 2);
        let peak = spectral_peaks(&s, 1, 0.0)[0];
        assert!((peak.0 - 1.0 / 144.0).abs() < 1e-4, "{}", peak.0);
    }

    #[test]
    fn two_peaks_are_separated() {
        let n = 30_000;
        let e = noise(n, 3);
        let tau = 2.0 * std::f64::consts::PI;
        let x: Vec<f64> = (0..n)
            .map(|t| {
                let t = t as f64;
                (tau * t / 144.0).sin() + 0.7 * (tau * t / 40.0).cos() + 0.3 * e[t as usize]
            })
            .collect();
        let s = smoothed_periodogram(&x, 2);
        let mut peaks: Vec<f64> = spectral_peaks(&s, 2, 1e-3).iter().map(|p| p.0).collect();
        peaks.sort_by(f64::total_cmp);
        assert!((peaks[0] - 1.0 / 144.0).abs() < 2e-4);
        assert!((peaks[1] - 1.0 / 40.0).abs() < 2e-4);
    }

    #[test]
    fn white_noise_spectrum_is_flat() {
        let x = noise(20_000, 4);
        let s = smoothed_periodogram(&x, 5);
        let med = median_power(&s);
        let max = s.iter().map(|v| v.1).fold(0.0, f64::max);
        assert!(max < 5.0 * med, "{max} vs {med}");
    }

    #[test]
    fn ljung_box_size_and_power() {
        let rejections = (0..200)
            .filter(|&s| ljung_box(&noise(2000, 100 + s), 10, 0).p_value < 0.05)
            .count();
        // nominal 5 %: binomial(200, 0.05) stays well under 25
        assert!(rejections < 25, "{rejections}");
        let e = noise(2000, 9);
        let mut x = vec![0.0; e.len()];
        for t in 1..x.len() {
            x[t] = 0.3 * x[t - 1] + e[t];
        }
        assert!(ljung_box(&x, 10, 0).p_value < 1e-6);
    }

    #[test]
    fn spike_fraction_counts_band_exceedances() {
        assert_eq!(spike_fraction(&[0.5, 0.0, -0.5, 0.01], 100), 0.5);
    }
}
