use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Uplink frequency band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Band {
    Sub6,
    MmWave,
}

impl Band {
    pub const ALL: [Band; 2] = [Band::Sub6, Band::MmWave];

    pub fn index(self) -> usize {
        match self {
            Band::Sub6 => 0,
            Band::MmWave => 1,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Band::Sub6 => "s",
            Band::MmWave => "m",
        }
    }
}

/// Planar array layout. Elements are indexed `ix * my + iy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    pub mx: usize,
    pub my: usize,
    pub dx: f64,
    pub dy: f64,
}

impl ArrayGeometry {
    /// Near-square factorization of `n` with uniform spacing.
    pub fn square(n: usize, spacing: f64) -> Self {
        let n = n.max(1);
        let mut mx = (n as f64).sqrt().floor() as usize;
        while mx > 1 && n % mx != 0 {
            mx -= 1;
        }
        let mx = mx.max(1);
        Self { mx, my: n / mx, dx: spacing, dy: spacing }
    }

    pub fn len(&self) -> usize {
        self.mx * self.my
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Link distances in metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distances {
    /// BS to IRS1.
    pub h: f64,
    /// BS to IoTD.
    pub hd: f64,
    /// IRS1 to IoTD.
    pub hr: f64,
    /// IoTD to IRS2.
    pub gr: f64,
    /// IoTD to MCR.
    pub gd: f64,
    /// IRS2 to MCR.
    pub g: f64,
    /// IRS2 to passenger.
    pub d: f64,
}

impl Default for Distances {
    fn default() -> Self {
        Self { h: 10.0, hd: 10.0, hr: 5.0, gr: 9.0, gd: 10.0, g: 2.0, d: 7.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Inner-loop multiplier residual.
    pub eps1: f64,
    /// Outer-loop relative objective change.
    pub eps2: f64,
    pub eps_dca: f64,
    pub eps_sdp: f64,
    /// Per-constraint leakage budget in units of the mean single-element
    /// leakage `‖a‖²/N`, so the absolute budget does not grow with the
    /// surface.
    pub eps_leak: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { eps1: 1e-6, eps2: 1e-3, eps_dca: 1e-6, eps_sdp: 1e-4, eps_leak: 1.0 }
    }
}

/// Every scenario constant of the system.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub m1: usize,
    pub m2: usize,
    pub n1: usize,
    pub n2: usize,
    pub num_iotds: usize,
    pub num_users: usize,
    pub f_s: f64,
    pub f_m: f64,
    pub b_s: f64,
    pub b_m: f64,
    pub p_max: f64,
    pub xi: f64,
    pub kappa: f64,
    pub rho0_db: f64,
    pub d0: f64,
    pub alpha_ref: f64,
    pub alpha_dir: f64,
    pub noise_psd_dbm_hz: f64,
    pub distances: Distances,
    pub volumes: Vec<f64>,
    pub weights: Vec<f64>,
    pub task_seed: u64,
    pub eaves_zod: f64,
    pub eaves_zoa: f64,
    pub bs_array: ArrayGeometry,
    pub irs1_array: ArrayGeometry,
    pub irs2_array: ArrayGeometry,
    pub mcr_array: ArrayGeometry,
    pub n_rand: usize,
    pub tol: Tolerances,
    pub t_max: usize,
    pub t_inner_max: usize,
    pub t_dca_max: usize,
    pub sdp_max_iter: usize,
    pub delta: f64,
    pub epsilon_newton: f64,
    pub theta1_grid: usize,
    pub theta1_tol: f64,
    pub theta1_passes: usize,
}

impl SystemConfig {
    /// Default simulation parameters: M1/M2 = 25/9, N1/N2 = 100/100,
    /// K = L = 3, 3.5/28 GHz, 10/80 MHz, κ = 6, 10 W, −174 dBm/Hz, ξ = 0.8.
    pub fn table_one() -> Self {
        Self::with_counts(25, 9, 100, 100, 3, 3, 10.0)
    }

    /// Default parameters for the given counts and power budget.
    pub fn with_counts(
        m1: usize,
        m2: usize,
        n1: usize,
        n2: usize,
        num_iotds: usize,
        num_users: usize,
        p_max: f64,
    ) -> Self {
        let f_s = 3.5e9;
        let f_m = 28e9;
        let task_seed = 2024;
        let (volumes, weights) = draw_tasks(num_iotds, task_seed);
        let mut cfg = Self {
            m1,
            m2,
            n1,
            n2,
            num_iotds,
            num_users,
            f_s,
            f_m,
            b_s: 10e6,
            b_m: 80e6,
            p_max,
            xi: 0.8,
            kappa: 6.0,
            rho0_db: -20.0,
            d0: 1.0,
            alpha_ref: 2.2,
            alpha_dir: 3.5,
            noise_psd_dbm_hz: -174.0,
            distances: Distances::default(),
            volumes,
            weights,
            task_seed,
            eaves_zod: 3.0 * std::f64::consts::FRAC_PI_4,
            eaves_zoa: std::f64::consts::FRAC_PI_4,
            bs_array: ArrayGeometry::square(1, 0.0),
            irs1_array: ArrayGeometry::square(1, 0.0),
            irs2_array: ArrayGeometry::square(1, 0.0),
            mcr_array: ArrayGeometry::square(1, 0.0),
            n_rand: 200,
            tol: Tolerances::default(),
            t_max: 10,
            t_inner_max: 3,
            t_dca_max: 50,
            sdp_max_iter: 100,
            delta: 0.5,
            epsilon_newton: 0.1,
            theta1_grid: 16,
            theta1_tol: 1e-4,
            theta1_passes: 2,
        };
        cfg.reset_arrays();
        cfg
    }

    /// Re-derives every array layout from the current counts with
    /// half-wavelength spacing (sub-6 wavelength for the BS and IRS1,
    /// mmWave wavelength for the train-mounted IRS2 and MCR).
    pub fn reset_arrays(&mut self) {
        let half_s = self.wavelength(Band::Sub6) / 2.0;
        let half_m = self.wavelength(Band::MmWave) / 2.0;
        self.bs_array = ArrayGeometry::square(self.m1, half_s);
        self.irs1_array = ArrayGeometry::square(self.n1, half_s);
        self.irs2_array = ArrayGeometry::square(self.n2, half_m);
        self.mcr_array = ArrayGeometry::square(self.m2, half_m);
    }

    /// Changes the IRS element counts and re-derives their layouts.
    pub fn set_elements(&mut self, n1: usize, n2: usize) {
        self.n1 = n1;
        self.n2 = n2;
        self.reset_arrays();
    }

    pub fn carrier(&self, band: Band) -> f64 {
        match band {
            Band::Sub6 => self.f_s,
            Band::MmWave => self.f_m,
        }
    }

    pub fn bandwidth(&self, band: Band) -> f64 {
        match band {
            Band::Sub6 => self.b_s,
            Band::MmWave => self.b_m,
        }
    }

    pub fn wavelength(&self, band: Band) -> f64 {
        SPEED_OF_LIGHT / self.carrier(band)
    }

    /// Noise variance in watts for one band.
    pub fn noise_variance(&self, band: Band) -> f64 {
        10f64.powf((self.noise_psd_dbm_hz - 30.0) / 10.0) * self.bandwidth(band)
    }

    pub fn rho0(&self) -> f64 {
        10f64.powf(self.rho0_db / 10.0)
    }

    /// Loads and validates a flat TOML document.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            let key = e
                .span()
                .map(|s| text[s.start..s.end.min(text.len())].trim().to_string())
                .filter(|s| !s.is_empty())
                .unwrap_or_else(|| "<document>".to_string());
            Error::config(key, e.message().to_string())
        })?;
        Self::from_table(&table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text)
    }

    fn from_table(t: &toml::Table) -> Result<Self> {
        let known = KNOWN_KEYS;
        if let Some(k) = t.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(Error::config(k.clone(), "unknown key"));
        }
        let m1 = req_count(t, "m1")?;
        let m2 = req_count(t, "m2")?;
        let n1 = req_count(t, "n1")?;
        let n2 = req_count(t, "n2")?;
        let num_iotds = req_count(t, "num_iotds")?;
        let num_users = req_count(t, "num_users")?;
        let p_max = req_f64(t, "p_max")?;

        let mut cfg = Self::with_counts(m1, m2, n1, n2, num_iotds, num_users, p_max);
        set_f64(t, "f_s", &mut cfg.f_s)?;
        set_f64(t, "f_m", &mut cfg.f_m)?;
        set_f64(t, "b_s", &mut cfg.b_s)?;
        set_f64(t, "b_m", &mut cfg.b_m)?;
        set_f64(t, "xi", &mut cfg.xi)?;
        set_f64(t, "kappa", &mut cfg.kappa)?;
        set_f64(t, "rho0_db", &mut cfg.rho0_db)?;
        set_f64(t, "d0", &mut cfg.d0)?;
        set_f64(t, "alpha_ref", &mut cfg.alpha_ref)?;
        set_f64(t, "alpha_dir", &mut cfg.alpha_dir)?;
        set_f64(t, "noise_psd_dbm_hz", &mut cfg.noise_psd_dbm_hz)?;
        set_f64(t, "d_h", &mut cfg.distances.h)?;
        set_f64(t, "d_hd", &mut cfg.distances.hd)?;
        set_f64(t, "d_hr", &mut cfg.distances.hr)?;
        set_f64(t, "d_gr", &mut cfg.distances.gr)?;
        set_f64(t, "d_gd", &mut cfg.distances.gd)?;
        set_f64(t, "d_g", &mut cfg.distances.g)?;
        set_f64(t, "d_d", &mut cfg.distances.d)?;
        set_f64(t, "eaves_zod", &mut cfg.eaves_zod)?;
        set_f64(t, "eaves_zoa", &mut cfg.eaves_zoa)?;
        set_count(t, "n_rand", &mut cfg.n_rand)?;
        set_f64(t, "eps1", &mut cfg.tol.eps1)?;
        set_f64(t, "eps2", &mut cfg.tol.eps2)?;
        set_f64(t, "eps_dca", &mut cfg.tol.eps_dca)?;
        set_f64(t, "eps_sdp", &mut cfg.tol.eps_sdp)?;
        set_f64(t, "eps_leak", &mut cfg.tol.eps_leak)?;
        set_count(t, "t_max", &mut cfg.t_max)?;
        set_count(t, "t_inner_max", &mut cfg.t_inner_max)?;
        set_count(t, "t_dca_max", &mut cfg.t_dca_max)?;
        set_count(t, "sdp_max_iter", &mut cfg.sdp_max_iter)?;
        set_f64(t, "delta", &mut cfg.delta)?;
        set_f64(t, "epsilon_newton", &mut cfg.epsilon_newton)?;
        set_count(t, "theta1_grid", &mut cfg.theta1_grid)?;
        set_f64(t, "theta1_tol", &mut cfg.theta1_tol)?;
        set_count(t, "theta1_passes", &mut cfg.theta1_passes)?;

        if let Some(v) = t.get("task_seed") {
            cfg.task_seed = as_u64(v, "task_seed")?;
            let (vol, w) = draw_tasks(num_iotds, cfg.task_seed);
            cfg.volumes = vol;
            cfg.weights = w;
        }
        if let Some(v) = t.get("volumes") {
            cfg.volumes = as_f64_list(v, "volumes")?;
        }
        if let Some(v) = t.get("weights") {
            cfg.weights = as_f64_list(v, "weights")?;
        }

        // Layouts follow the (possibly overridden) carriers unless given.
        cfg.reset_arrays();
        for (name, arr) in [
            ("bs", &mut cfg.bs_array),
            ("irs1", &mut cfg.irs1_array),
            ("irs2", &mut cfg.irs2_array),
            ("mcr", &mut cfg.mcr_array),
        ] {
            set_count(t, &format!("{name}_mx"), &mut arr.mx)?;
            set_count(t, &format!("{name}_my"), &mut arr.my)?;
            set_f64(t, &format!("{name}_dx"), &mut arr.dx)?;
            set_f64(t, &format!("{name}_dy"), &mut arr.dy)?;
        }

        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every invariant, naming the first one violated.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Validation(msg));
        if !(self.p_max > 0.0 && self.p_max.is_finite()) {
            return fail(format!("p_max must be positive, got {}", self.p_max));
        }
        if !(self.xi > 0.0 && self.xi <= 1.0) {
            return fail(format!("xi must lie in (0, 1], got {}", self.xi));
        }
        for (name, n) in [
            ("m1", self.m1),
            ("m2", self.m2),
            ("n1", self.n1),
            ("n2", self.n2),
            ("num_iotds", self.num_iotds),
            ("num_users", self.num_users),
        ] {
            if n == 0 {
                return fail(format!("{name} must be at least 1"));
            }
        }
        for (name, arr, n) in [
            ("bs", &self.bs_array, self.m1),
            ("irs1", &self.irs1_array, self.n1),
            ("irs2", &self.irs2_array, self.n2),
            ("mcr", &self.mcr_array, self.m2),
        ] {
            if arr.len() != n {
                return fail(format!(
                    "{name} array layout {}x{} does not match {n} elements",
                    arr.mx, arr.my
                ));
            }
            if !(arr.dx > 0.0 && arr.dy > 0.0) {
                return fail(format!("{name} element spacing must be positive"));
            }
        }
        for (name, x) in [("f_s", self.f_s), ("f_m", self.f_m), ("b_s", self.b_s), ("b_m", self.b_m)] {
            if !(x > 0.0 && x.is_finite()) {
                return fail(format!("{name} must be positive and finite"));
            }
        }
        if !(self.kappa >= 0.0) {
            return fail(format!("kappa must be non-negative, got {}", self.kappa));
        }
        if !(self.d0 > 0.0) {
            return fail("d0 must be positive".into());
        }
        let d = &self.distances;
        for (name, x) in [
            ("d_h", d.h),
            ("d_hd", d.hd),
            ("d_hr", d.hr),
            ("d_gr", d.gr),
            ("d_gd", d.gd),
            ("d_g", d.g),
            ("d_d", d.d),
        ] {
            if !(x > 0.0 && x.is_finite()) {
                return fail(format!("distance {name} must be positive, got {x}"));
            }
        }
        if self.volumes.len() != self.num_iotds || self.weights.len() != self.num_iotds {
            return fail(format!(
                "volumes and weights need one entry per IoTD ({})",
                self.num_iotds
            ));
        }
        if self.volumes.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return fail("every volume must be positive".into());
        }
        if self.weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return fail("every weight must be positive".into());
        }
        if self.n_rand == 0 {
            return fail("n_rand must be at least 1".into());
        }
        for (name, x) in [("delta", self.delta), ("epsilon_newton", self.epsilon_newton)] {
            if !(x > 0.0 && x < 1.0) {
                return fail(format!("{name} must lie in (0, 1), got {x}"));
            }
        }
        let t = &self.tol;
        for (name, x) in [
            ("eps1", t.eps1),
            ("eps2", t.eps2),
            ("eps_dca", t.eps_dca),
            ("eps_sdp", t.eps_sdp),
            ("eps_leak", t.eps_leak),
        ] {
            if !(x > 0.0) {
                return fail(format!("{name} must be positive"));
            }
        }
        if self.theta1_grid < 2 {
            return fail("theta1_grid must be at least 2".into());
        }
        Ok(())
    }
}

/// Task volumes U(1e6, 2e6) bits and weights U(0, 1], drawn once.
pub fn draw_tasks(num_iotds: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let volumes = (0..num_iotds).map(|_| rng.random_range(1e6..2e6)).collect();
    let weights = (0..num_iotds).map(|_| 1.0 - rng.random::<f64>()).collect();
    (volumes, weights)
}

const KNOWN_KEYS: &[&str] = &[
    "m1", "m2", "n1", "n2", "num_iotds", "num_users", "p_max", "f_s", "f_m", "b_s", "b_m", "xi",
    "kappa", "rho0_db", "d0", "alpha_ref", "alpha_dir", "noise_psd_dbm_hz", "d_h", "d_hd", "d_hr",
    "d_gr", "d_gd", "d_g", "d_d", "eaves_zod", "eaves_zoa", "n_rand", "eps1", "eps2", "eps_dca",
    "eps_sdp", "eps_leak", "t_max", "t_inner_max", "t_dca_max", "sdp_max_iter", "delta",
    "epsilon_newton", "theta1_grid", "theta1_tol", "theta1_passes", "task_seed", "volumes",
    "weights", "bs_mx", "bs_my", "bs_dx", "bs_dy", "irs1_mx", "irs1_my", "irs1_dx", "irs1_dy",
    "irs2_mx", "irs2_my", "irs2_dx", "irs2_dy", "mcr_mx", "mcr_my", "mcr_dx", "mcr_dy",
];

fn as_f64(v: &toml::Value, key: &str) -> Result<f64> {
    match v {
        toml::Value::Float(x) => Ok(*x),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(Error::config(key, "expected a number")),
    }
}

fn as_u64(v: &toml::Value, key: &str) -> Result<u64> {
    match v {
        toml::Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        _ => Err(Error::config(key, "expected a non-negative integer")),
    }
}

fn as_f64_list(v: &toml::Value, key: &str) -> Result<Vec<f64>> {
    match v {
        toml::Value::Array(items) => items.iter().map(|x| as_f64(x, key)).collect(),
        _ => Err(Error::config(key, "expected an array of numbers")),
    }
}

fn req_f64(t: &toml::Table, key: &str) -> Result<f64> {
    t.get(key)
        .ok_or_else(|| Error::config(key, "missing mandatory key"))
        .and_then(|v| as_f64(v, key))
}

fn req_count(t: &toml::Table, key: &str) -> Result<usize> {
    t.get(key)
        .ok_or_else(|| Error::config(key, "missing mandatory key"))
        .and_then(|v| as_u64(v, key))
        .map(|x| x as usize)
}

fn set_f64(t: &toml::Table, key: &str, slot: &mut f64) -> Result<()> {
    if let Some(v) = t.get(key) {
        *slot = as_f64(v, key)?;
    }
    Ok(())
}

fn set_count(t: &toml::Table, key: &str, slot: &mut usize) -> Result<()> {
    if let Some(v) = t.get(key) {
        *slot = as_u64(v, key)? as usize;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE_ONE: &str = r#"
m1 = 25
m2 = 9
n1 = 100
n2 = 100
num_iotds = 3
num_users = 3
f_s = 3.5e9
f_m = 28e9
b_s = 10e6
b_m = 80e6
kappa = 6.0
p_max = 10.0
noise_psd_dbm_hz = -174.0
xi = 0.8
"#;

    #[test]
    fn loads_default_document() {
        let cfg = SystemConfig::from_toml_str(TABLE_ONE).unwrap();
        assert_eq!(cfg, SystemConfig::table_one());
        assert_eq!(cfg.irs1_array.len(), 100);
        assert_eq!((cfg.bs_array.mx, cfg.bs_array.my), (5, 5));
        assert_eq!((cfg.mcr_array.mx, cfg.mcr_array.my), (3, 3));
        let s2 = cfg.noise_variance(Band::Sub6);
        assert!((s2 / (10f64.powf(-20.4) * 1e7) - 1.0).abs() < 1e-12);
        assert!((cfg.noise_variance(Band::MmWave) / s2 - 8.0).abs() < 1e-12);
    }

    #[test]
    fn zero_power_is_rejected() {
        let doc = TABLE_ONE.replace("p_max = 10.0", "p_max = 0.0");
        let err = SystemConfig::from_toml_str(&doc).unwrap_err();
        assert!(matches!(err, Error::Validation(ref m) if m.contains("p_max")), "{err}");
    }

    #[test]
    fn omitted_optional_key_takes_default() {
        let cfg = SystemConfig::from_toml_str(TABLE_ONE).unwrap();
        assert_eq!(cfg.n_rand, 200);
        let cfg = SystemConfig::from_toml_str(&format!("{TABLE_ONE}\nn_rand = 7\n")).unwrap();
        assert_eq!(cfg.n_rand, 7);
    }

    #[test]
    fn errors_name_the_key() {
        let err = SystemConfig::from_toml_str("m1 = 2").unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "m2"), "{err}");
        let doc = format!("{TABLE_ONE}\nkappa = \"six\"\n");
        let err = SystemConfig::from_toml_str(&doc).unwrap_err();
        assert!(matches!(err, Error::Config { .. }), "{err}");
        let doc = TABLE_ONE.replace("kappa = 6.0", "kappa = \"six\"");
        let err = SystemConfig::from_toml_str(&doc).unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "kappa"), "{err}");
        let err = SystemConfig::from_toml_str(&format!("{TABLE_ONE}\nbogus = 1\n")).unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "bogus"), "{err}");
    }

    #[test]
    fn layout_mismatch_is_rejected() {
        let doc = format!("{TABLE_ONE}\nirs1_mx = 7\n");
        let err = SystemConfig::from_toml_str(&doc).unwrap_err();
        assert!(matches!(err, Error::Validation(ref m) if m.contains("irs1")), "{err}");
    }

    #[test]
    fn tasks_are_in_range_and_fixed() {
        let (v, w) = draw_tasks(50, 9);
        assert!(v.iter().all(|&x| (1e6..2e6).contains(&x)));
        assert!(w.iter().all(|&x| x > 0.0 && x <= 1.0));
        assert_eq!(draw_tasks(50, 9), (v, w));
    }

    #[test]
    fn square_layouts() {
        let g = ArrayGeometry::square(36, 1.0);
        assert_eq!((g.mx, g.my), (6, 6));
        let g = ArrayGeometry::square(32, 1.0);
        assert_eq!((g.mx, g.my), (4, 8));
        let g = ArrayGeometry::square(7, 1.0);
        assert_eq!((g.mx, g.my), (1, 7));
    }
}
