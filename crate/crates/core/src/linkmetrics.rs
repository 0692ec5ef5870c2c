//! Physical-layer quantities: equivalent channels, harvested power,
//! SINR/capacity, MSE, the latency objective and passenger leakage.

use crate::error::{Error, Result};
use crate::linalg::{cis, CMat, CVec, C64};
use crate::scenario::{Band, ChannelSet, SystemConfig};

/// Downlink energy-transfer decision.
#[derive(Debug, Clone, PartialEq)]
pub struct DownlinkDecision {
    /// Fraction of the block spent on energy transfer.
    pub beta: f64,
    /// Energy beams, one column per beam.
    pub w: CMat,
    pub theta1: Vec<f64>,
}

/// Uplink information-transfer decision.
#[derive(Debug, Clone, PartialEq)]
pub struct UplinkDecision {
    /// Share of each IoTD's power spent in the sub-6 band.
    pub gamma: Vec<f64>,
    /// Decoders per band, one M2 column per IoTD.
    pub f: [CMat; 2],
    pub theta2: Vec<f64>,
}

impl UplinkDecision {
    pub fn decoder(&self, band: Band) -> &CMat {
        &self.f[band.index()]
    }
}

/// Composite channels for a given pair of phase vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannels {
    /// `h_r Φ1 H + h_d` per IoTD (entries of the 1 x M1 row).
    pub h_bar: Vec<CVec>,
    /// `G Φ2 g_r + g_d` per band and IoTD.
    pub g_bar: [Vec<CVec>; 2],
}

/// Per-IoTD latencies and the weighted objective.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyReport {
    pub cap_s: Vec<f64>,
    pub cap_m: Vec<f64>,
    /// Sub-6 share of each volume actually used.
    pub alpha: Vec<f64>,
    pub latency: Vec<f64>,
    pub objective: f64,
    pub leakage: f64,
    pub powers: Vec<f64>,
}

pub fn effective_channels(ch: &ChannelSet, theta1: &[f64], theta2: &[f64]) -> Result<EffectiveChannels> {
    if theta1.len() != ch.n1() || theta2.len() != ch.n2() {
        return Err(Error::Contract(format!(
            "phase vectors of length {}/{} do not match {} / {} elements",
            theta1.len(),
            theta2.len(),
            ch.n1(),
            ch.n2()
        )));
    }
    let phi1: Vec<C64> = theta1.iter().map(|&t| cis(t)).collect();
    let h_bar = ch
        .h_r
        .iter()
        .zip(&ch.h_d)
        .map(|(hr, hd)| {
            let weighted = CVec::from_fn(hr.len(), |n, _| hr[n] * phi1[n]);
            ch.h.tr_mul(&weighted) + hd
        })
        .collect();
    let g_bar = [Band::Sub6, Band::MmWave].map(|b| uplink_channels(ch, b, theta2));
    Ok(EffectiveChannels { h_bar, g_bar })
}

/// `G Φ2 g_r + g_d` for every IoTD of one band.
pub fn uplink_channels(ch: &ChannelSet, band: Band, theta2: &[f64]) -> Vec<CVec> {
    let bc = ch.band(band);
    bc.g_r
        .iter()
        .zip(&bc.g_d)
        .map(|(gr, gd)| {
            let weighted = CVec::from_fn(gr.len(), |n, _| gr[n] * cis(theta2[n]));
            &bc.g * weighted + gd
        })
        .collect()
}

/// Received energy `‖h̄ W‖²` before the time split is applied.
pub fn beam_energy(h_bar: &CVec, w: &CMat) -> f64 {
    w.tr_mul(h_bar).norm_squared()
}

/// Transmit power available to an IoTD after harvesting for `β`.
pub fn harvested_power(h_bar: &CVec, w: &CMat, beta: f64, xi: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Domain(format!("time split must lie in (0, 1), got {beta}")));
    }
    Ok(xi * beta * beam_energy(h_bar, w) / (1.0 - beta))
}

/// Per-band transmit powers from total powers and sub-6 shares.
pub fn band_powers(powers: &[f64], gamma: &[f64], band: Band) -> Vec<f64> {
    powers
        .iter()
        .zip(gamma)
        .map(|(&p, &g)| match band {
            Band::Sub6 => g * p,
            Band::MmWave => (1.0 - g) * p,
        })
        .collect()
}

/// SINR and capacity of every IoTD in one band. Interference comes only
/// from the same band.
pub fn sinr_and_capacity(
    g_bar: &[CVec],
    f: &CMat,
    powers: &[f64],
    sigma2: f64,
    bandwidth: f64,
    beta: f64,
) -> Result<Vec<(f64, f64)>> {
    if !(sigma2 > 0.0) {
        return Err(Error::Domain("noise variance must be positive".into()));
    }
    let l = g_bar.len();
    if f.ncols() != l || powers.len() != l {
        return Err(Error::Contract(format!(
            "decoder has {} columns and {} powers for {l} IoTDs",
            f.ncols(),
            powers.len()
        )));
    }
    let q = cross_gains(g_bar, f);
    (0..l)
        .map(|i| {
            let sinr = sinr_from_gains(&q, powers, sigma2 * f.column(i).norm_squared(), i)?;
            Ok((sinr, (1.0 - beta) * bandwidth * (1.0 + sinr).log2()))
        })
        .collect()
}

/// `|f_lᴴ ḡ_i|²` for every decoder `l` (row) and IoTD `i` (column).
pub fn cross_gains(g_bar: &[CVec], f: &CMat) -> Vec<Vec<f64>> {
    (0..f.ncols())
        .map(|l| {
            let fl = f.column(l);
            g_bar.iter().map(|g| fl.dotc(g).norm_sqr()).collect()
        })
        .collect()
}

/// SINR of IoTD `l` from precomputed cross gains and the decoder noise
/// term `σ²‖f_l‖²`.
pub fn sinr_from_gains(q: &[Vec<f64>], powers: &[f64], noise: f64, l: usize) -> Result<f64> {
    if powers[l] == 0.0 {
        return Ok(0.0);
    }
    if noise == 0.0 {
        return Err(Error::Contract(format!("decoder column {l} is zero")));
    }
    let interference: f64 = (0..powers.len()).filter(|&i| i != l).map(|i| powers[i] * q[l][i]).sum();
    Ok(powers[l] * q[l][l] / (interference + noise))
}

/// Mean squared error of IoTD `l` under decoder `f`.
pub fn mse(g_bar: &[CVec], f: &CMat, powers: &[f64], sigma2: f64, l: usize) -> Result<f64> {
    if g_bar.len() != f.ncols() || powers.len() != g_bar.len() || l >= g_bar.len() {
        return Err(Error::Contract("mse inputs have inconsistent sizes".into()));
    }
    let fl = f.column(l);
    let signal = fl.dotc(&g_bar[l]) * powers[l].sqrt() - C64::new(1.0, 0.0);
    let interference: f64 = (0..g_bar.len())
        .filter(|&i| i != l)
        .map(|i| powers[i] * fl.dotc(&g_bar[i]).norm_sqr())
        .sum();
    Ok(signal.norm_sqr() + interference + sigma2 * fl.norm_squared())
}

/// Weighted upload latency for a given volume split. A band with zero
/// capacity is excluded and its share moved to the other band.
pub fn upload_latency_objective(
    alpha: &[f64],
    volumes: &[f64],
    weights: &[f64],
    cap_s: &[f64],
    cap_m: &[f64],
) -> Result<LatencyReport> {
    let l = volumes.len();
    if alpha.len() != l || weights.len() != l || cap_s.len() != l || cap_m.len() != l {
        return Err(Error::Contract("latency inputs have inconsistent lengths".into()));
    }
    let mut used = Vec::with_capacity(l);
    let mut latency = Vec::with_capacity(l);
    for i in 0..l {
        let (cs, cm) = (cap_s[i], cap_m[i]);
        if !(cs > 0.0) && !(cm > 0.0) {
            return Err(Error::Infeasible(format!("IoTD {i} has no capacity in either band")));
        }
        let a = if !(cs > 0.0) {
            0.0
        } else if !(cm > 0.0) {
            1.0
        } else {
            alpha[i]
        };
        let part = |share: f64, cap: f64| if share == 0.0 { 0.0 } else { share * volumes[i] / cap };
        used.push(a);
        latency.push(part(a, cs).max(part(1.0 - a, cm)));
    }
    let objective = weights.iter().zip(&latency).map(|(w, d)| w * d).sum();
    Ok(LatencyReport {
        cap_s: cap_s.to_vec(),
        cap_m: cap_m.to_vec(),
        alpha: used,
        latency,
        objective,
        leakage: 0.0,
        powers: Vec::new(),
    })
}

/// Weighted latency with the volume split at its optimum,
/// `Σ ϖ_l v_l / (C_s,l + C_m,l)`.
pub fn ratio_objective(volumes: &[f64], weights: &[f64], cap_s: &[f64], cap_m: &[f64]) -> f64 {
    (0..volumes.len())
        .map(|i| {
            let c = cap_s[i] + cap_m[i];
            if c > 0.0 {
                weights[i] * volumes[i] / c
            } else {
                f64::INFINITY
            }
        })
        .sum()
}

/// Total power leaking through IRS2 to the passengers.
pub fn leakage(ch: &ChannelSet, theta2: &[f64]) -> f64 {
    let phi: Vec<C64> = theta2.iter().map(|&t| cis(t)).collect();
    let mut total = 0.0;
    for bc in &ch.bands {
        for d in &bc.d {
            for gr in &bc.g_r {
                let s: C64 = (0..phi.len()).map(|n| d[n] * phi[n] * gr[n]).sum();
                total += s.norm_sqr();
            }
        }
    }
    total
}

/// Every link quantity for one full decision.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkState {
    pub eff: EffectiveChannels,
    /// `‖h̄_l W‖²` per IoTD.
    pub energy: Vec<f64>,
    pub powers: Vec<f64>,
    /// Per-band transmit powers.
    pub band_powers: [Vec<f64>; 2],
    pub sinr: [Vec<f64>; 2],
    pub cap: [Vec<f64>; 2],
}

impl LinkState {
    pub fn evaluate(
        cfg: &SystemConfig,
        ch: &ChannelSet,
        dl: &DownlinkDecision,
        ul: &UplinkDecision,
    ) -> Result<Self> {
        let eff = effective_channels(ch, &dl.theta1, &ul.theta2)?;
        Self::from_effective(cfg, eff, dl, ul)
    }

    pub fn from_effective(
        cfg: &SystemConfig,
        eff: EffectiveChannels,
        dl: &DownlinkDecision,
        ul: &UplinkDecision,
    ) -> Result<Self> {
        let energy: Vec<f64> = eff.h_bar.iter().map(|h| beam_energy(h, &dl.w)).collect();
        if !(dl.beta > 0.0 && dl.beta < 1.0) {
            return Err(Error::Domain(format!("time split must lie in (0, 1), got {}", dl.beta)));
        }
        let powers: Vec<f64> = energy.iter().map(|e| cfg.xi * dl.beta * e / (1.0 - dl.beta)).collect();
        let bp = [Band::Sub6, Band::MmWave].map(|b| band_powers(&powers, &ul.gamma, b));
        let mut sinr = [Vec::new(), Vec::new()];
        let mut cap = [Vec::new(), Vec::new()];
        for b in Band::ALL {
            let k = b.index();
            let sc = sinr_and_capacity(
                &eff.g_bar[k],
                &ul.f[k],
                &bp[k],
                cfg.noise_variance(b),
                cfg.bandwidth(b),
                dl.beta,
            )?;
            sinr[k] = sc.iter().map(|x| x.0).collect();
            cap[k] = sc.iter().map(|x| x.1).collect();
        }
        Ok(Self { eff, energy, powers, band_powers: bp, sinr, cap })
    }

    /// Weighted latency at the optimal volume split.
    pub fn ratio_objective(&self, cfg: &SystemConfig) -> f64 {
        ratio_objective(&cfg.volumes, &cfg.weights, &self.cap[0], &self.cap[1])
    }

    /// Full latency report for a given split, with leakage and powers.
    pub fn report(&self, cfg: &SystemConfig, ch: &ChannelSet, alpha: &[f64], theta2: &[f64]) -> Result<LatencyReport> {
        let mut rep = upload_latency_objective(alpha, &cfg.volumes, &cfg.weights, &self.cap[0], &self.cap[1])?;
        rep.leakage = leakage(ch, theta2);
        rep.powers = self.powers.clone();
        Ok(rep)
    }
}
