use std::f64::consts::LN_2;

use crate::error::{Error, Result};

/// Inputs of the per-device power split with beams, decoders and the
/// other devices' splits held fixed.
#[derive(Debug, Clone)]
pub struct GammaContext<'a> {
    /// `|f_lᴴ ḡ_i|²` per band, decoder row `l`, IoTD column `i`.
    pub gains: [&'a [Vec<f64>]; 2],
    /// Total transmit power of every IoTD.
    pub powers: &'a [f64],
    /// `σ² ‖f_l‖²` per band.
    pub noise: [&'a [f64]; 2],
    pub bandwidths: [f64; 2],
    pub gamma: &'a [f64],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaStatus {
    Interior,
    Boundary,
    /// The device has no transmit power; the split is left untouched.
    NoPower,
    /// Neither band carries any useful signal.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaSolution {
    pub gamma: f64,
    pub status: GammaStatus,
    /// Stationarity expression at the returned point.
    pub residual: f64,
}

impl GammaContext<'_> {
    fn band_total(&self, k: usize, l: usize, g: f64) -> f64 {
        let share = |i: usize| {
            let s = if i == l { g } else { self.gamma[i] };
            if k == 0 {
                s
            } else {
                1.0 - s
            }
        };
        let q = &self.gains[k][l];
        (0..self.powers.len()).map(|i| share(i) * self.powers[i] * q[i]).sum::<f64>() + self.noise[k][l]
    }

    /// `B_s q_s,ll / S_s − B_m q_m,ll / S_m` where `S_F` is the total
    /// received power plus decoder noise in band `F`. Decreasing in `g`.
    pub fn stationarity(&self, l: usize, g: f64) -> f64 {
        let s = self.band_total(0, l, g);
        let m = self.band_total(1, l, g);
        self.bandwidths[0] * self.gains[0][l][l] / s - self.bandwidths[1] * self.gains[1][l][l] / m
    }

    /// `Σ_F B_F log2(1 + SINR_F,l)` as a function of the device's own split.
    pub fn throughput(&self, l: usize, g: f64) -> f64 {
        let p = self.powers[l];
        (0..2)
            .map(|k| {
                let own = if k == 0 { g } else { 1.0 - g } * p * self.gains[k][l][l];
                let rest = self.band_total(k, l, g) - own;
                if rest <= 0.0 {
                    0.0
                } else {
                    self.bandwidths[k] * (own / rest).ln_1p() / LN_2
                }
            })
            .sum()
    }
}

/// Sub-6 share of IoTD `l` maximizing its two-band throughput, found by
/// bisection on the stationarity condition.
pub fn optimize_gamma(l: usize, ctx: &GammaContext<'_>) -> Result<GammaSolution> {
    let n = ctx.powers.len();
    if l >= n || ctx.gamma.len() != n {
        return Err(Error::Contract(format!("IoTD index {l} with {n} powers")));
    }
    for k in 0..2 {
        if ctx.gains[k].len() != n || ctx.gains[k].iter().any(|r| r.len() != n) || ctx.noise[k].len() != n {
            return Err(Error::Contract("gain and noise tables do not match the IoTD count".into()));
        }
    }
    let current = ctx.gamma[l];
    if !(ctx.powers[l] > 0.0) {
        return Ok(GammaSolution { gamma: current, status: GammaStatus::NoPower, residual: 0.0 });
    }
    if ctx.gains[0][l][l] == 0.0 && ctx.gains[1][l][l] == 0.0 {
        return Ok(GammaSolution { gamma: current, status: GammaStatus::Degenerate, residual: 0.0 });
    }
    if !(ctx.noise[0][l] > 0.0 && ctx.noise[1][l] > 0.0) {
        return Err(Error::Domain(format!("decoder noise of IoTD {l} must be positive")));
    }
    let phi = |g: f64| ctx.stationarity(l, g);
    let (f0, f1) = (phi(0.0), phi(1.0));
    if f0 <= 0.0 {
        return Ok(GammaSolution { gamma: 0.0, status: GammaStatus::Boundary, residual: f0 });
    }
    if f1 >= 0.0 {
        return Ok(GammaSolution { gamma: 1.0, status: GammaStatus::Boundary, residual: f1 });
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if phi(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (flo, fhi) = (phi(lo), phi(hi));
    let (g, r) = if flo.abs() <= fhi.abs() { (lo, flo) } else { (hi, fhi) };
    Ok(GammaSolution { gamma: g, status: GammaStatus::Interior, residual: r })
}
