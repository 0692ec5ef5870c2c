use crate::error::{Error, Result};
use crate::linalg::{cis, hermitize, CMat, CVec, C64};
use crate::scenario::{Band, ChannelSet};

/// Lifted quadratic program in the IRS2 phases,
/// `min φ̄ᴴ Λ φ̄` with `φ̄ = [φ; t]`, plus the covert constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct SdrProblem {
    /// `[[Ξ, eᴴ], [e, 0]]`.
    pub lambda: CMat,
    /// Padded leakage matrices `Δ̃`, each scaled to trace `N` (zero when
    /// the underlying path is absent).
    pub constraint_mats: Vec<CMat>,
    /// `a = d_k ∘ g_r,l`, so that the leaked amplitude is `aᵀ φ`.
    pub covert_rows: Vec<CVec>,
    /// `‖a‖² / N`, the mean per-element leakage each `Δ̃` was divided by.
    pub scales: Vec<f64>,
    pub n2: usize,
}

impl SdrProblem {
    /// `φ̄ᴴ Λ φ̄` at unit-modulus phases with `t = ±1`.
    pub fn quadratic(&self, theta2: &[f64], t: f64) -> f64 {
        let v = lifted(theta2, t);
        (v.adjoint() * &self.lambda * &v)[(0, 0)].re
    }

    /// Largest normalized leakage `N |aᵀφ|² / ‖a‖²` over the constraints.
    pub fn covert_ratio(&self, phi: &CVec) -> f64 {
        self.covert_rows
            .iter()
            .zip(&self.scales)
            .filter(|(_, &s)| s > 0.0)
            .map(|(a, &s)| a.iter().zip(phi.iter()).map(|(x, y)| x * y).sum::<C64>().norm_sqr() / s)
            .fold(0.0, f64::max)
    }
}

/// `[e^{jθ}; t]`.
pub fn lifted(theta2: &[f64], t: f64) -> CVec {
    let n = theta2.len();
    CVec::from_fn(n + 1, |i, _| if i < n { cis(theta2[i]) } else { C64::new(t, 0.0) })
}

/// `A ∘ Bᵀ`, the matrix with `φᴴ (A ∘ Bᵀ) φ = Tr(Φᴴ A Φ B)` for `Φ = diag(φ)`.
pub fn hadamard_transpose(a: &CMat, b: &CMat) -> CMat {
    CMat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * b[(j, i)])
}

/// Assembles the phase subproblem from fixed decoders `f`, per-band
/// powers and MSE weights `gamma_mse[band][l]`.
pub fn build_sdr_problem(
    ch: &ChannelSet,
    f: &[CMat; 2],
    band_powers: &[Vec<f64>; 2],
    gamma_mse: &[Vec<f64>; 2],
) -> Result<SdrProblem> {
    let n2 = ch.n2();
    let l = ch.num_iotds();
    for k in 0..2 {
        if f[k].ncols() != l || f[k].nrows() != ch.m2() || band_powers[k].len() != l || gamma_mse[k].len() != l {
            return Err(Error::Contract("decoders, powers and weights must cover every IoTD".into()));
        }
    }
    let mut xi = CMat::zeros(n2, n2);
    let mut e = CVec::zeros(n2);
    let mut covert_rows = Vec::new();
    for band in Band::ALL {
        let k = band.index();
        let bc = ch.band(band);
        let (p, w) = (&band_powers[k], &gamma_mse[k]);
        // u_l = Gᴴ f_l, so (f_lᴴ G)_n = conj(u_l,n).
        let u: Vec<CVec> = (0..l).map(|j| bc.g.ad_mul(&f[k].column(j))).collect();
        let mut a = CMat::zeros(n2, n2);
        let mut b = CMat::zeros(n2, n2);
        for j in 0..l {
            a += (&u[j] * u[j].adjoint()) * C64::new(w[j], 0.0);
            b += (&bc.g_r[j] * bc.g_r[j].adjoint()) * C64::new(p[j], 0.0);
        }
        xi += hadamard_transpose(&a, &b);
        // diag(C − D) with C = Σ Γ_l p_i g_r,i (g_d,iᴴ f_l) u_lᴴ and
        // D = Σ Γ_l √p_l g_r,l u_lᴴ.
        for dec in 0..l {
            for i in 0..l {
                let c_li = f[k].column(dec).dotc(&bc.g_d[i]);
                let coef = c_li.conj() * (w[dec] * p[i]);
                for n in 0..n2 {
                    e[n] += coef * bc.g_r[i][n] * u[dec][n].conj();
                }
            }
            let coef = C64::new(w[dec] * p[dec].max(0.0).sqrt(), 0.0);
            for n in 0..n2 {
                e[n] -= coef * bc.g_r[dec][n] * u[dec][n].conj();
            }
        }
        for d in &bc.d {
            for gr in &bc.g_r {
                covert_rows.push(d.component_mul(gr));
            }
        }
    }
    let mut lambda = CMat::zeros(n2 + 1, n2 + 1);
    lambda.view_mut((0, 0), (n2, n2)).copy_from(&xi);
    for n in 0..n2 {
        lambda[(n2, n)] = e[n];
        lambda[(n, n2)] = e[n].conj();
    }
    hermitize(&mut lambda);

    let mut constraint_mats = Vec::with_capacity(covert_rows.len());
    let mut scales = Vec::with_capacity(covert_rows.len());
    for a in &covert_rows {
        let s = a.norm_squared() / n2 as f64;
        let mut m = CMat::zeros(n2 + 1, n2 + 1);
        if s > 0.0 {
            let delta = (a.conjugate() * a.transpose()) / C64::new(s, 0.0);
            m.view_mut((0, 0), (n2, n2)).copy_from(&delta);
            hermitize(&mut m);
        }
        constraint_mats.push(m);
        scales.push(s);
    }
    Ok(SdrProblem { lambda, constraint_mats, covert_rows, scales, n2 })
}

/// `Σ_F Σ_l Γ_F,l e_F,l` evaluated directly from the MSE definition.
pub fn weighted_mse(
    ch: &ChannelSet,
    f: &[CMat; 2],
    band_powers: &[Vec<f64>; 2],
    gamma_mse: &[Vec<f64>; 2],
    theta2: &[f64],
    noise: [f64; 2],
) -> Result<f64> {
    let mut total = 0.0;
    for band in Band::ALL {
        let k = band.index();
        let g_bar = crate::linkmetrics::uplink_channels(ch, band, theta2);
        for dec in 0..g_bar.len() {
            total += gamma_mse[k][dec] * crate::linkmetrics::mse(&g_bar, &f[k], &band_powers[k], noise[k], dec)?;
        }
    }
    Ok(total)
}
