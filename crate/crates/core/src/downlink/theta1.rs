use std::f64::consts::{LN_2, TAU};

use crate::error::{Error, Result};
use crate::linalg::{cis, wrap_phase, CMat, CVec, C64};
use crate::scenario::ChannelSet;

/// Everything the IRS1 phase search holds fixed: beams, uplink gains and
/// decoder noise per band, power split, time split and multipliers.
#[derive(Debug, Clone)]
pub struct Theta1Context<'a> {
    pub channels: &'a ChannelSet,
    pub w: &'a CMat,
    /// `|f_lᴴ ḡ_i|²` per band, decoder row `l`, IoTD column `i`.
    pub gains: [Vec<Vec<f64>>; 2],
    /// `σ² ‖f_l‖²` per band.
    pub noise: [Vec<f64>; 2],
    pub gamma: &'a [f64],
    pub beta: f64,
    pub xi: f64,
    pub bandwidths: [f64; 2],
    /// `λ_l η_l` per IoTD.
    pub scale: &'a [f64],
}

impl Theta1Context<'_> {
    /// `Σ_l λ_l η_l (C_s,l + C_m,l)` as a function of the received energies.
    pub fn objective_from_energy(&self, energy: &[f64]) -> f64 {
        let l = energy.len();
        let pf = self.xi * self.beta / (1.0 - self.beta);
        let mut total = 0.0;
        for k in 0..2 {
            let share = |j: usize| if k == 0 { self.gamma[j] } else { 1.0 - self.gamma[j] };
            let p: Vec<f64> = (0..l).map(|j| share(j) * pf * energy[j]).collect();
            for i in 0..l {
                if p[i] == 0.0 {
                    continue;
                }
                let interf: f64 = (0..l).filter(|&j| j != i).map(|j| p[j] * self.gains[k][i][j]).sum();
                let den = interf + self.noise[k][i];
                if den <= 0.0 {
                    continue;
                }
                let sinr = p[i] * self.gains[k][i][i] / den;
                total += self.scale[i] * (1.0 - self.beta) * self.bandwidths[k] * sinr.ln_1p() / LN_2;
            }
        }
        total
    }

    fn received_rows(&self, theta: &[f64], hw: &CMat) -> Vec<CVec> {
        let ch = self.channels;
        ch.h_r
            .iter()
            .zip(&ch.h_d)
            .map(|(hr, hd)| {
                let mut y = self.w.tr_mul(hd);
                for (n, &t) in theta.iter().enumerate() {
                    let coef = hr[n] * cis(t);
                    if coef != C64::new(0.0, 0.0) {
                        y += hw.row(n).transpose() * coef;
                    }
                }
                y
            })
            .collect()
    }

    pub fn objective(&self, theta: &[f64]) -> f64 {
        let hw = &self.channels.h * self.w;
        let energy: Vec<f64> = self.received_rows(theta, &hw).iter().map(|y| y.norm_squared()).collect();
        self.objective_from_energy(&energy)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theta1Outcome {
    pub theta1: Vec<f64>,
    pub objective_before: f64,
    pub objective_after: f64,
    pub passes: usize,
}

/// Element-wise coordinate ascent on the IRS1 phases: a uniform grid per
/// element followed by golden-section refinement around the best point.
/// A coordinate is only moved when it improves the objective, so the
/// result never scores below the input.
pub fn optimize_theta1(
    ctx: &Theta1Context<'_>,
    theta_in: &[f64],
    grid: usize,
    refine_tol: f64,
    passes: usize,
) -> Result<Theta1Outcome> {
    let ch = ctx.channels;
    if theta_in.len() != ch.n1() {
        return Err(Error::Contract(format!("{} phases for {} IRS1 elements", theta_in.len(), ch.n1())));
    }
    if grid < 2 || !(refine_tol > 0.0) {
        return Err(Error::Domain("phase search needs grid >= 2 and a positive tolerance".into()));
    }
    let hw = &ch.h * ctx.w;
    let mut theta: Vec<f64> = theta_in.iter().map(|&t| wrap_phase(t)).collect();
    let mut rows = ctx.received_rows(&theta, &hw);
    let l = rows.len();
    let energy_of = |rows: &[CVec]| rows.iter().map(|y| y.norm_squared()).collect::<Vec<_>>();
    let before = ctx.objective_from_energy(&energy_of(&rows));
    let mut current = before;
    let mut done = 0;
    let mut base_e = vec![0.0; l];
    let mut z = vec![C64::new(0.0, 0.0); l];
    let mut trial_e = vec![0.0; l];

    for _ in 0..passes {
        let start = current;
        for n in 0..theta.len() {
            let row = hw.row(n).transpose();
            let mut active = false;
            for i in 0..l {
                let c = ch.h_r[i][n];
                let refl = &row * (c * cis(theta[n]));
                let base = &rows[i] - &refl;
                // E_i(θ) = ‖base‖² + |c|²‖row‖² + 2 Re(e^{jθ} c ⟨base, row⟩).
                base_e[i] = base.norm_squared() + c.norm_sqr() * row.norm_squared();
                z[i] = c * base.dotc(&row);
                active |= c != C64::new(0.0, 0.0);
            }
            if !active {
                continue;
            }
            let mut eval = |t: f64| {
                let e = cis(t);
                for i in 0..l {
                    trial_e[i] = base_e[i] + 2.0 * (e * z[i]).re;
                }
                ctx.objective_from_energy(&trial_e)
            };
            let step = TAU / grid as f64;
            let (mut best_t, mut best_v) = (theta[n], f64::NEG_INFINITY);
            for g in 0..grid {
                let t = theta[n] + step * g as f64;
                let v = eval(t);
                if v > best_v {
                    best_t = t;
                    best_v = v;
                }
            }
            let (t_ref, v_ref) = golden_max(&mut eval, best_t - step, best_t + step, refine_tol);
            let (t_new, v_new) = if v_ref > best_v { (t_ref, v_ref) } else { (best_t, best_v) };
            if v_new > current {
                let delta = cis(t_new) - cis(theta[n]);
                for i in 0..l {
                    let c = ch.h_r[i][n];
                    rows[i] += &row * (c * delta);
                }
                theta[n] = wrap_phase(t_new);
                current = v_new;
            }
        }
        done += 1;
        // Re-anchor the incremental rows to avoid drift.
        rows = ctx.received_rows(&theta, &hw);
        current = ctx.objective_from_energy(&energy_of(&rows));
        if current <= start * (1.0 + 1e-12) {
            break;
        }
    }
    if current < before {
        // Floating-point drift only; keep the input.
        theta = theta_in.iter().map(|&t| wrap_phase(t)).collect();
        current = before;
    }
    Ok(Theta1Outcome { theta1: theta, objective_before: before, objective_after: current, passes: done })
}

fn golden_max(f: &mut impl FnMut(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}
