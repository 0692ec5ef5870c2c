use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::config::{ArrayGeometry, Band, SystemConfig};
use crate::error::{Error, Result};
use crate::linalg::{cis, CMat, CVec, C64};

/// Train kinematics for one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainState {
    /// Along-track position relative to the IoTD cluster (m); negative
    /// while approaching.
    pub position: f64,
    pub v_speed: f64,
    pub dt: f64,
    /// Horizontal angle between the velocity and the direct link.
    pub phi_d: f64,
    /// Horizontal angle between the velocity and the cascaded link.
    pub phi_c: f64,
    /// Perpendicular distance from the track to the IoTDs (m).
    pub lateral: f64,
}

impl TrainState {
    /// Places the train on a straight track passing `lateral` metres from
    /// the IoTDs. The MCR and IRS2 share one position, so both horizontal
    /// angles coincide.
    pub fn on_track(position: f64, v_speed: f64, dt: f64, lateral: f64) -> Self {
        let phi = crate::linalg::wrap_phase(lateral.atan2(-position));
        Self { position, v_speed, dt, phi_d: phi, phi_c: phi, lateral }
    }

    /// Distance from the train to the IoTDs.
    pub fn distance(&self) -> f64 {
        self.position.hypot(self.lateral)
    }

    /// The same train `dt` seconds earlier.
    pub fn previous(&self) -> Self {
        Self::on_track(self.position - self.v_speed * self.dt, self.v_speed, self.dt, self.lateral)
    }
}

/// Uplink channels of one band.
#[derive(Debug, Clone, PartialEq)]
pub struct BandChannels {
    /// IRS2 to MCR, M2 x N2.
    pub g: CMat,
    /// IoTD to IRS2, one N2 column per IoTD.
    pub g_r: Vec<CVec>,
    /// IoTD to MCR, one M2 column per IoTD.
    pub g_d: Vec<CVec>,
    /// IRS2 to passenger, one 1 x N2 row per user (entries stored as a vector).
    pub d: Vec<CVec>,
}

/// One realization of every channel in the system.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// BS to IRS1, N1 x M1.
    pub h: CMat,
    /// IRS1 to IoTD rows (1 x N1).
    pub h_r: Vec<CVec>,
    /// BS to IoTD rows (1 x M1).
    pub h_d: Vec<CVec>,
    pub bands: [BandChannels; 2],
    pub seed: u64,
}

impl ChannelSet {
    pub fn band(&self, band: Band) -> &BandChannels {
        &self.bands[band.index()]
    }

    pub fn band_mut(&mut self, band: Band) -> &mut BandChannels {
        &mut self.bands[band.index()]
    }

    pub fn num_iotds(&self) -> usize {
        self.h_d.len()
    }

    pub fn n1(&self) -> usize {
        self.h.nrows()
    }

    pub fn n2(&self) -> usize {
        self.bands[0].g.ncols()
    }

    pub fn m1(&self) -> usize {
        self.h.ncols()
    }

    pub fn m2(&self) -> usize {
        self.bands[0].g.nrows()
    }

    /// Removes every IRS1-reflected path.
    pub fn zero_irs1(&mut self) {
        self.h.fill(C64::new(0.0, 0.0));
        for r in &mut self.h_r {
            r.fill(C64::new(0.0, 0.0));
        }
    }

    /// Removes every IRS2-reflected path, including passenger leakage.
    pub fn zero_irs2(&mut self) {
        for b in &mut self.bands {
            b.g.fill(C64::new(0.0, 0.0));
            for v in b.g_r.iter_mut().chain(b.d.iter_mut()) {
                v.fill(C64::new(0.0, 0.0));
            }
        }
    }
}

/// Kronecker response `a_x ⊗ a_y` of a planar array; `theta1` is the
/// azimuth and `theta2` the zenith angle.
pub fn array_response(geom: &ArrayGeometry, theta1: f64, theta2: f64, wavelength: f64) -> CVec {
    assert!(geom.mx >= 1 && geom.my >= 1, "array needs at least one element");
    assert!(wavelength > 0.0, "wavelength must be positive");
    let kx = TAU * geom.dx / wavelength * theta1.sin() * theta2.cos();
    let ky = TAU * geom.dy / wavelength * theta1.sin() * theta2.sin();
    CVec::from_fn(geom.mx * geom.my, |i, _| {
        let (ix, iy) = (i / geom.my, i % geom.my);
        cis(kx * ix as f64 + ky * iy as f64)
    })
}

/// Large-scale gain `ρ0 (d/d0)^(-exponent)`.
pub fn path_loss(d: f64, exponent: f64, cfg: &SystemConfig) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Domain(format!("path loss needs a positive distance, got {d}")));
    }
    Ok(cfg.rho0() * (d / cfg.d0).powf(-exponent))
}

struct Angles {
    aoa: f64,
    zoa: f64,
    aod: f64,
    zod: f64,
}

fn draw_angles(rng: &mut ChaCha8Rng) -> Angles {
    Angles {
        aoa: rng.random_range(0.0..TAU),
        zoa: rng.random_range(0.0..TAU),
        aod: rng.random_range(0.0..TAU),
        zod: rng.random_range(0.0..TAU),
    }
}

fn cn(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Rician composition of a deterministic LoS matrix with fresh NLoS.
fn rician(los: CMat, gain: f64, kappa: f64, rng: &mut ChaCha8Rng) -> CMat {
    let (w_los, w_nlos) = if kappa.is_infinite() {
        (1.0, 0.0)
    } else {
        ((kappa / (kappa + 1.0)).sqrt(), (1.0 / (kappa + 1.0)).sqrt())
    };
    let amp = gain.sqrt();
    let (r, c) = los.shape();
    let mut out = los * C64::new(w_los * amp, 0.0);
    // NLoS is always drawn so the RNG stream does not depend on kappa.
    for j in 0..c {
        for i in 0..r {
            out[(i, j)] += cn(rng) * (w_nlos * amp);
        }
    }
    out
}

fn outer(rx: &CVec, tx: &CVec) -> CMat {
    rx * tx.adjoint()
}

fn as_row(m: CMat) -> CVec {
    CVec::from_iterator(m.len(), m.iter().copied())
}

/// Synthesizes every channel for one seed. A train state, when given,
/// moves the IoTD-to-train distances along the track; the offset between
/// the direct and cascaded uplink distances is kept from the config.
pub fn build_channel_set(
    cfg: &SystemConfig,
    train: Option<&TrainState>,
    seed: u64,
) -> Result<ChannelSet> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = cfg.num_iotds;
    let k = cfg.num_users;
    let dist = &cfg.distances;
    let (d_gr, d_gd) = match train {
        Some(ts) => {
            let r = ts.distance();
            if !(r > 0.0) {
                return Err(Error::Domain("train sits on top of the IoTDs".into()));
            }
            (r, r + (dist.gd - dist.gr))
        }
        None => (dist.gr, dist.gd),
    };
    if !(d_gd > 0.0) {
        return Err(Error::Domain(format!("direct uplink distance {d_gd} is not positive")));
    }

    // Angles are geometric and shared by both bands.
    let a_h = draw_angles(&mut rng);
    let a_hr: Vec<Angles> = (0..l).map(|_| draw_angles(&mut rng)).collect();
    let a_hd: Vec<Angles> = (0..l).map(|_| draw_angles(&mut rng)).collect();
    let a_g = draw_angles(&mut rng);
    let a_gr: Vec<Angles> = (0..l).map(|_| draw_angles(&mut rng)).collect();
    let a_gd: Vec<Angles> = (0..l).map(|_| draw_angles(&mut rng)).collect();
    let a_d: Vec<Angles> = (0..k).map(|_| draw_angles(&mut rng)).collect();

    let lam_s = cfg.wavelength(Band::Sub6);
    let one = CVec::from_element(1, C64::new(1.0, 0.0));
    let kappa = cfg.kappa;

    let pl_h = path_loss(dist.h, cfg.alpha_ref, cfg)?;
    let pl_hr = path_loss(dist.hr, cfg.alpha_ref, cfg)?;
    let pl_hd = path_loss(dist.hd, cfg.alpha_dir, cfg)?;
    let pl_g = path_loss(dist.g, cfg.alpha_ref, cfg)?;
    let pl_gr = path_loss(d_gr, cfg.alpha_ref, cfg)?;
    let pl_gd = path_loss(d_gd, cfg.alpha_dir, cfg)?;
    let pl_d = path_loss(dist.d, cfg.alpha_ref, cfg)?;

    // Downlink energy transfer runs on the sub-6 carrier.
    let h = rician(
        outer(
            &array_response(&cfg.irs1_array, a_h.aoa, a_h.zoa, lam_s),
            &array_response(&cfg.bs_array, a_h.aod, a_h.zod, lam_s),
        ),
        pl_h,
        kappa,
        &mut rng,
    );
    let h_r = a_hr
        .iter()
        .map(|a| {
            let los = outer(&one, &array_response(&cfg.irs1_array, a.aod, a.zod, lam_s));
            as_row(rician(los, pl_hr, kappa, &mut rng))
        })
        .collect();
    let h_d = a_hd
        .iter()
        .map(|a| {
            let los = outer(&one, &array_response(&cfg.bs_array, a.aod, a.zod, lam_s));
            as_row(rician(los, pl_hd, kappa, &mut rng))
        })
        .collect();

    let mut bands = Vec::with_capacity(2);
    for band in Band::ALL {
        let lam = cfg.wavelength(band);
        let g = rician(
            outer(
                &array_response(&cfg.mcr_array, a_g.aoa, a_g.zoa, lam),
                &array_response(&cfg.irs2_array, a_g.aod, a_g.zod, lam),
            ),
            pl_g,
            kappa,
            &mut rng,
        );
        let g_r = a_gr
            .iter()
            .map(|a| {
                let los = outer(&array_response(&cfg.irs2_array, a.aoa, a.zoa, lam), &one);
                rician(los, pl_gr, kappa, &mut rng).column(0).into_owned()
            })
            .collect();
        let g_d = a_gd
            .iter()
            .map(|a| {
                let los = outer(&array_response(&cfg.mcr_array, a.aoa, a.zoa, lam), &one);
                rician(los, pl_gd, kappa, &mut rng).column(0).into_owned()
            })
            .collect();
        // Passenger links leave IRS2 at a fixed zenith; azimuths stay random.
        let d = a_d
            .iter()
            .map(|a| {
                let los = outer(&one, &array_response(&cfg.irs2_array, a.aod, cfg.eaves_zod, lam));
                as_row(rician(los, pl_d, kappa, &mut rng))
            })
            .collect();
        bands.push(BandChannels { g, g_r, g_d, d });
    }
    let m = bands.pop().expect("two bands");
    let s = bands.pop().expect("two bands");
    Ok(ChannelSet { h, h_r, h_d, bands: [s, m], seed })
}
