use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::linkmetrics::{cross_gains, LinkState, UplinkDecision};
use crate::scenario::{Band, SystemConfig};

/// Per-band, per-IoTD coefficients of the time-split subproblem.
///
/// With fixed beams and decoders the SINR of IoTD `l` reads
/// `β a / ((b − c) β + c)`: `a` is the useful received energy, `b` the
/// co-band interference and `c` the decoder noise.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaCoefficients {
    pub a: [Vec<f64>; 2],
    pub b: [Vec<f64>; 2],
    pub c: [Vec<f64>; 2],
}

impl BetaCoefficients {
    pub fn from_state(cfg: &SystemConfig, link: &LinkState, ul: &UplinkDecision) -> Self {
        let l = link.energy.len();
        let mut a = [vec![0.0; l], vec![0.0; l]];
        let mut b = [vec![0.0; l], vec![0.0; l]];
        let mut c = [vec![0.0; l], vec![0.0; l]];
        for band in Band::ALL {
            let k = band.index();
            let q = cross_gains(&link.eff.g_bar[k], &ul.f[k]);
            let share = |j: usize| match band {
                Band::Sub6 => ul.gamma[j],
                Band::MmWave => 1.0 - ul.gamma[j],
            };
            let sigma2 = cfg.noise_variance(band);
            for i in 0..l {
                a[k][i] = cfg.xi * share(i) * link.energy[i] * q[i][i];
                b[k][i] = (0..l)
                    .filter(|&j| j != i)
                    .map(|j| cfg.xi * share(j) * link.energy[j] * q[i][j])
                    .sum();
                c[k][i] = sigma2 * ul.f[k].column(i).norm_squared();
            }
        }
        Self { a, b, c }
    }

    fn validate(&self) -> Result<()> {
        for k in 0..2 {
            let n = self.a[k].len();
            if self.b[k].len() != n || self.c[k].len() != n {
                return Err(Error::Contract("coefficient vectors differ in length".into()));
            }
            for i in 0..n {
                let (a, b, c) = (self.a[k][i], self.b[k][i], self.c[k][i]);
                if !(a >= 0.0 && b >= 0.0 && c > 0.0) {
                    return Err(Error::Domain(format!(
                        "invalid coefficients a={a}, b={b}, c={c}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetaStatus {
    Interior,
    /// No sign change of the derivative inside the interval.
    Boundary,
    /// Every useful-signal coefficient is zero.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaSolution {
    pub beta: f64,
    pub status: BetaStatus,
    /// Final bisection bracket; the derivative is positive at the left end
    /// and non-positive at the right end.
    pub bracket: (f64, f64),
}

/// Weighted throughput `Σ κ_l B_F (1 − β) log2(1 + SINR_F,l(β))`.
pub fn beta_objective(coeffs: &BetaCoefficients, scale: &[f64], bandwidths: [f64; 2], beta: f64) -> f64 {
    let mut total = 0.0;
    for k in 0..2 {
        for (i, &s) in scale.iter().enumerate() {
            let (a, b, c) = (coeffs.a[k][i], coeffs.b[k][i], coeffs.c[k][i]);
            let sinr = beta * a / ((b - c) * beta + c);
            total += s * bandwidths[k] * (1.0 - beta) * sinr.ln_1p() / LN_2;
        }
    }
    total
}

/// Analytic derivative of [`beta_objective`].
pub fn beta_derivative(coeffs: &BetaCoefficients, scale: &[f64], bandwidths: [f64; 2], beta: f64) -> f64 {
    let mut total = 0.0;
    for k in 0..2 {
        for (i, &s) in scale.iter().enumerate() {
            let (a, b, c) = (coeffs.a[k][i], coeffs.b[k][i], coeffs.c[k][i]);
            if a == 0.0 {
                continue;
            }
            let n = (a + b - c) * beta + c;
            let d = (b - c) * beta + c;
            let term = -(n / d).ln() + (1.0 - beta) * ((a + b - c) / n - (b - c) / d);
            total += s * bandwidths[k] * term / LN_2;
        }
    }
    total
}

/// Maximizes the weighted throughput over the time split by bisection on
/// the derivative (the objective is strictly concave on (0, 1)).
/// `scale` holds `λ_l η_l` per IoTD.
pub fn optimize_beta(
    coeffs: &BetaCoefficients,
    scale: &[f64],
    bandwidths: [f64; 2],
    current: f64,
) -> Result<BetaSolution> {
    coeffs.validate()?;
    if scale.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::Domain("multiplier products must be positive".into()));
    }
    if coeffs.a.iter().flatten().all(|&a| a == 0.0) {
        return Ok(BetaSolution { beta: current, status: BetaStatus::Degenerate, bracket: (0.0, 1.0) });
    }
    let deriv = |x: f64| beta_derivative(coeffs, scale, bandwidths, x);
    let (mut lo, mut hi) = (f64::EPSILON, 1.0 - f64::EPSILON);
    if deriv(lo) <= 0.0 {
        return Ok(BetaSolution { beta: lo, status: BetaStatus::Boundary, bracket: (lo, lo) });
    }
    if deriv(hi) > 0.0 {
        return Ok(BetaSolution { beta: hi, status: BetaStatus::Boundary, bracket: (hi, hi) });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if deriv(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(BetaSolution { beta: 0.5 * (lo + hi), status: BetaStatus::Interior, bracket: (lo, hi) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(a: f64, b: f64, c: f64) -> BetaCoefficients {
        BetaCoefficients {
            a: [vec![a], vec![0.0]],
            b: [vec![b], vec![0.0]],
            c: [vec![c], vec![1.0]],
        }
    }

    // Root of −ln(1+β) + (1−β)/(1+β) found with a plain secant iteration.
    fn secant_root() -> f64 {
        let g = |x: f64| -(1.0 + x).ln() + (1.0 - x) / (1.0 + x);
        let (mut x0, mut x1) = (0.3_f64, 0.6_f64);
        for _ in 0..60 {
            let (g0, g1) = (g(x0), g(x1));
            if g1 == g0 {
                break;
            }
            let x2 = x1 - g1 * (x1 - x0) / (g1 - g0);
            x0 = x1;
            x1 = x2;
        }
        x1
    }

    #[test]
    fn unit_coefficients_match_scalar_root() {
        let sol = optimize_beta(&single(1.0, 1.0, 1.0), &[1.0], [1.0, 1.0], 0.5).unwrap();
        assert_eq!(sol.status, BetaStatus::Interior);
        let oracle = secant_root();
        assert!((sol.beta - oracle).abs() < 1e-10, "{} vs {oracle}", sol.beta);
        assert!((sol.beta - 0.4547).abs() < 1e-4);
        let d = beta_derivative(&single(1.0, 1.0, 1.0), &[1.0], [1.0, 1.0], sol.beta);
        assert!(d.abs() <= 1e-8);
        assert!(beta_derivative(&single(1.0, 1.0, 1.0), &[1.0], [1.0, 1.0], sol.bracket.0) > 0.0);
        assert!(beta_derivative(&single(1.0, 1.0, 1.0), &[1.0], [1.0, 1.0], sol.bracket.1) <= 0.0);
    }

    #[test]
    fn zero_gain_is_degenerate() {
        let sol = optimize_beta(&single(0.0, 2.0, 1.0), &[1.0], [1.0, 1.0], 0.3).unwrap();
        assert_eq!(sol.status, BetaStatus::Degenerate);
        assert_eq!(sol.beta, 0.3);
    }

    #[test]
    fn uniform_scaling_keeps_the_maximizer() {
        let co = BetaCoefficients {
            a: [vec![3.0, 0.5], vec![1e3, 2.0]],
            b: [vec![0.2, 1.0], vec![4.0, 0.0]],
            c: [vec![0.1, 0.3], vec![1.0, 0.01]],
        };
        let s1 = optimize_beta(&co, &[1.0, 2.0], [1e7, 8e7], 0.5).unwrap();
        let s2 = optimize_beta(&co, &[10.0, 20.0], [1e7, 8e7], 0.5).unwrap();
        assert!((s1.beta - s2.beta).abs() < 1e-12);
        let f = |x| beta_objective(&co, &[1.0, 2.0], [1e7, 8e7], x);
        assert!(f(s1.beta) >= f(s1.beta - 1e-3) && f(s1.beta) >= f(s1.beta + 1e-3));
        assert!(f(s1.beta) >= f(1e-9) && f(s1.beta) >= f(1.0 - 1e-9));
    }
}
