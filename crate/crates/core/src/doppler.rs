//! Doppler spread of the direct and IRS2-cascaded uplinks, the pilot
//! overhead penalty it induces, and the element-equalizing mitigation
//! heuristic.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::linalg::wrap_phase;
use crate::linkmetrics::{ratio_objective, LinkState};
use crate::outer::{bcd_solve, BcdOptions};
use crate::scenario::{build_channel_set, Band, SystemConfig, TrainState};

/// Everything the spread and mitigation computations read for one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct DopplerContext {
    pub train: TrainState,
    /// mmWave wavelength (m).
    pub wavelength_m: f64,
    /// Pilot symbols spent per coherence interval.
    pub pilot_overhead: f64,
    /// IRS2 phases chosen for this slot.
    pub theta_now: Vec<f64>,
    /// IRS2 phases chosen for the previous slot.
    pub theta_prev: Vec<f64>,
}

impl DopplerContext {
    pub fn new(
        cfg: &SystemConfig,
        train: TrainState,
        pilot_overhead: f64,
        theta_now: Vec<f64>,
        theta_prev: Vec<f64>,
    ) -> Result<Self> {
        if !(pilot_overhead >= 0.0) {
            return Err(Error::Domain(format!("pilot overhead must be non-negative, got {pilot_overhead}")));
        }
        if theta_now.len() != theta_prev.len() {
            return Err(Error::Contract(format!(
                "phase histories differ in length: {} vs {}",
                theta_now.len(),
                theta_prev.len()
            )));
        }
        Ok(Self { train, wavelength_m: cfg.wavelength(Band::MmWave), pilot_overhead, theta_now, theta_prev })
    }

    fn check(&self) -> Result<()> {
        if self.theta_now.len() != self.theta_prev.len() {
            return Err(Error::Contract("phase histories differ in length".into()));
        }
        Ok(())
    }
}

/// Coherence-time rule behind the pilot penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceModel {
    /// `T_c = constant / f_d`.
    pub constant: f64,
    /// Spreads below this are treated as this (Hz), so a static channel
    /// has a finite coherence time.
    pub f_floor: f64,
}

impl Default for CoherenceModel {
    fn default() -> Self {
        Self { constant: 0.423, f_floor: 1.0 }
    }
}

impl CoherenceModel {
    pub fn coherence_time(&self, f_d: f64) -> f64 {
        self.constant / f_d.abs().max(self.f_floor)
    }
}

/// Direct-link spread `v cos φ_d / λ_m`, signed.
pub fn direct_doppler(ctx: &DopplerContext) -> f64 {
    ctx.train.v_speed * ctx.train.phi_d.cos() / ctx.wavelength_m
}

/// Per-element phase advance over one slot: the kinematic term shared by
/// every element plus the wrapped change of the element's own phase.
pub fn phase_increments(ctx: &DopplerContext) -> Result<Vec<f64>> {
    ctx.check()?;
    let t = &ctx.train;
    let common = TAU * t.v_speed * t.dt * t.phi_c.cos() / ctx.wavelength_m;
    Ok(ctx.theta_now.iter().zip(&ctx.theta_prev).map(|(a, b)| common + wrap_phase(a - b)).collect())
}

fn spread_of(increments: &[f64], dt: f64) -> f64 {
    if increments.is_empty() {
        return 0.0;
    }
    let hi = increments.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = increments.iter().copied().fold(f64::INFINITY, f64::min);
    (hi - lo) / (TAU * dt)
}

/// Largest pairwise instantaneous-frequency gap across IRS2 elements (Hz).
pub fn cascaded_doppler_spread(ctx: &DopplerContext) -> Result<f64> {
    if !(ctx.train.dt > 0.0) {
        return Err(Error::Domain(format!("slot time must be positive, got {}", ctx.train.dt)));
    }
    Ok(spread_of(&phase_increments(ctx)?, ctx.train.dt))
}

/// Fraction of the rate left after pilots: `max(0, 1 − po / (B T_c))`.
pub fn effective_rate_factor(f_d_total: f64, po: f64, bandwidth: f64, model: &CoherenceModel) -> f64 {
    let tc = model.coherence_time(f_d_total);
    (1.0 - po / (bandwidth * tc)).clamp(0.0, 1.0)
}

/// Spread that drives the penalty: the larger of the two links.
pub fn total_spread(f_dd: f64, f_dc: f64) -> f64 {
    f_dd.abs().max(f_dc)
}

/// Outcome of one mitigation pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Mitigation {
    pub theta: Vec<f64>,
    pub objective: f64,
    /// Objective with the unmodified phases.
    pub baseline: f64,
    pub f_dd: f64,
    pub f_dc_before: f64,
    pub f_dc_after: f64,
    /// Elements whose spread exceeded the direct link.
    pub boundary: usize,
    /// Equalization steps kept before stopping.
    pub steps: usize,
    /// Whether the degradation check ended the pass early.
    pub guard_fired: bool,
}

/// Pulls the fastest-rotating IRS2 elements down to the increment of the
/// next one in line until the cascaded spread reaches the direct-link
/// level. After step `n` the `n` fastest elements share the increment of
/// the `(n+1)`-th; a step that makes `evaluate(θ, f_total)` worse than the
/// last kept step ends the pass.
pub fn mitigate_phases<E>(ctx: &DopplerContext, mut evaluate: E) -> Result<Mitigation>
where
    E: FnMut(&[f64], f64) -> Result<f64>,
{
    let f_dd = direct_doppler(ctx);
    let dt = ctx.train.dt;
    let inc = phase_increments(ctx)?;
    let f_dc = cascaded_doppler_spread(ctx)?;
    let baseline = evaluate(&ctx.theta_now, total_spread(f_dd, f_dc))?;
    let mut out = Mitigation {
        theta: ctx.theta_now.clone(),
        objective: baseline,
        baseline,
        f_dd,
        f_dc_before: f_dc,
        f_dc_after: f_dc,
        boundary: 0,
        steps: 0,
        guard_fired: false,
    };
    let n2 = inc.len();
    if n2 < 2 {
        return Ok(out);
    }
    // Descending, ties by element index.
    let mut order: Vec<usize> = (0..n2).collect();
    order.sort_by(|&a, &b| inc[b].total_cmp(&inc[a]).then(a.cmp(&b)));
    let floor = inc[order[n2 - 1]];
    let nn = order.iter().take_while(|&&j| (inc[j] - floor) / (TAU * dt) > f_dd.abs()).count();
    out.boundary = nn;
    if nn == 0 {
        return Ok(out);
    }

    let own: Vec<f64> = ctx.theta_now.iter().zip(&ctx.theta_prev).map(|(a, b)| wrap_phase(a - b)).collect();
    let mut theta = ctx.theta_now.clone();
    let mut current = inc.clone();
    for n in 1..=nn {
        let next = order[n];
        let mut cand = theta.clone();
        let mut cand_inc = current.clone();
        for &j in &order[..n] {
            cand[j] = wrap_phase(ctx.theta_prev[j] + own[next]);
            cand_inc[j] = inc[next];
        }
        let f_dc_cand = spread_of(&cand_inc, dt);
        let obj = evaluate(&cand, total_spread(f_dd, f_dc_cand))?;
        if obj > out.objective {
            out.guard_fired = true;
            break;
        }
        theta = cand;
        current = cand_inc;
        out.objective = obj;
        out.f_dc_after = f_dc_cand;
        out.steps = n;
    }
    out.theta = theta;
    Ok(out)
}

/// Weighted latency at the optimal split with each band's capacity scaled
/// by its pilot penalty.
pub fn penalized_objective(
    cfg: &SystemConfig,
    cap_s: &[f64],
    cap_m: &[f64],
    f_total: f64,
    po: f64,
    model: &CoherenceModel,
) -> f64 {
    let fs = effective_rate_factor(f_total, po, cfg.b_s, model);
    let fm = effective_rate_factor(f_total, po, cfg.b_m, model);
    let cs: Vec<f64> = cap_s.iter().map(|c| c * fs).collect();
    let cm: Vec<f64> = cap_m.iter().map(|c| c * fm).collect();
    ratio_objective(&cfg.volumes, &cfg.weights, &cs, &cm)
}

/// One trajectory slot: the decision solved at the current position, the
/// previous slot's phases, and the mitigation outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotOutcome {
    pub position: f64,
    pub distance: f64,
    pub speed: f64,
    /// Objective without any Doppler penalty.
    pub clean_objective: f64,
    pub leakage: f64,
    pub beta: f64,
    pub iterations: usize,
    pub mitigation: Mitigation,
}

/// Solves the slot at `train` and the one `dt` earlier on the same channel
/// seed, then runs mitigation with the penalized objective.
pub fn doppler_slot(
    cfg: &SystemConfig,
    train: &TrainState,
    seed: u64,
    opts: &BcdOptions,
    po: f64,
    model: &CoherenceModel,
) -> Result<SlotOutcome> {
    let prev_train = train.previous();
    let ch_now = build_channel_set(cfg, Some(train), seed)?;
    let ch_prev = build_channel_set(cfg, Some(&prev_train), seed)?;
    let now = bcd_solve(cfg, &ch_now, opts)?;
    let prev = bcd_solve(cfg, &ch_prev, opts)?;
    let ctx = DopplerContext::new(cfg, *train, po, now.uplink.theta2.clone(), prev.uplink.theta2.clone())?;
    let mut ul = now.uplink.clone();
    let mitigation = mitigate_phases(&ctx, |theta, f_total| {
        ul.theta2.copy_from_slice(theta);
        let link = LinkState::evaluate(cfg, &ch_now, &now.downlink, &ul)?;
        Ok(penalized_objective(cfg, &link.cap[0], &link.cap[1], f_total, po, model))
    })?;
    Ok(SlotOutcome {
        position: train.position,
        distance: train.distance(),
        speed: train.v_speed,
        clean_objective: now.objective(),
        leakage: now.report.leakage,
        beta: now.downlink.beta,
        iterations: now.outer_iterations,
        mitigation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn ctx(v: f64, phi: f64, now: Vec<f64>, prev: Vec<f64>) -> DopplerContext {
        let cfg = SystemConfig::table_one();
        let train = TrainState { position: -10.0, v_speed: v, dt: 1e-3, phi_d: phi, phi_c: phi, lateral: 1.0 };
        DopplerContext::new(&cfg, train, 6000.0, now, prev).unwrap()
    }

    #[test]
    fn direct_spread_examples() {
        assert_eq!(direct_doppler(&ctx(0.0, 0.0, vec![], vec![])), 0.0);
        let f = direct_doppler(&ctx(110.0, 0.0, vec![], vec![]));
        let by_hand = 110.0 / (299_792_458.0 / 28e9);
        assert!((f - by_hand).abs() < 1e-9, "{f}");
        // The rounded speed of light gives the textbook 10266.7 Hz.
        assert!((110.0_f64 / (3e8 / 28e9) - 10266.67).abs() < 0.01);
        assert!(direct_doppler(&ctx(110.0, FRAC_PI_2, vec![], vec![])).abs() < 1e-9);
        assert!(direct_doppler(&ctx(110.0, PI, vec![], vec![])) < 0.0);
    }

    #[test]
    fn cascaded_spread_examples() {
        let c = ctx(110.0, 0.3, vec![0.5, 0.5 + PI], vec![0.5, 0.5]);
        assert!((cascaded_doppler_spread(&c).unwrap() - 500.0).abs() < 1e-9);
        let c = ctx(110.0, 0.3, vec![1.0, 2.0, -1.0], vec![1.2, 2.2, -0.8]);
        assert!(cascaded_doppler_spread(&c).unwrap() < 1e-9);
        let c = ctx(80.0, 0.0, vec![0.1, 2.0, 3.0], vec![0.1, 2.0, 3.0]);
        assert_eq!(cascaded_doppler_spread(&c).unwrap(), 0.0);
    }

    #[test]
    fn mismatched_histories_are_rejected() {
        let cfg = SystemConfig::table_one();
        let train = TrainState::on_track(-5.0, 50.0, 1e-3, 1.0);
        assert!(DopplerContext::new(&cfg, train, 0.0, vec![0.0; 3], vec![0.0; 2]).is_err());
        let mut c = ctx(50.0, 0.0, vec![0.0; 2], vec![0.0; 2]);
        c.theta_prev.pop();
        assert!(cascaded_doppler_spread(&c).is_err());
    }

    #[test]
    fn rate_factor_examples() {
        let m = CoherenceModel::default();
        assert_eq!(effective_rate_factor(1e4, 0.0, 80e6, &m), 1.0);
        assert!(effective_rate_factor(1e12, 6000.0, 80e6, &m) < 1e-9);
        // T_c = 42.3 µs gives 3384 symbols, fewer than the pilots.
        assert!((m.coherence_time(1e4) - 4.23e-5).abs() < 1e-15);
        assert_eq!(effective_rate_factor(1e4, 6000.0, 80e6, &m), 0.0);
        let f = effective_rate_factor(100.0, 6000.0, 80e6, &m);
        assert!((f - (1.0 - 6000.0 / (80e6 * 4.23e-3))).abs() < 1e-12);
        // The floor keeps a static channel finite.
        assert_eq!(effective_rate_factor(0.0, 1.0, 1.0, &m), effective_rate_factor(1.0, 1.0, 1.0, &m));
    }

    #[test]
    fn nothing_to_mitigate_returns_the_input() {
        let c = ctx(110.0, 0.0, vec![0.3, 0.4, 0.5], vec![0.1, 0.2, 0.3]);
        let m = mitigate_phases(&c, |_, f| Ok(f)).unwrap();
        assert_eq!(m.boundary, 0);
        assert_eq!(m.theta, c.theta_now);
        assert_eq!(m.objective, m.baseline);
    }

    #[test]
    fn single_fast_element_is_equalized() {
        // Increments 2π·10⁴Δt wrapped, 0 and 0; the direct link is slower.
        let dt = 1e-3;
        let step = wrap_phase(TAU * 1e4 * dt * 0.02);
        let mut c = ctx(0.0, 0.0, vec![0.7 + step, 1.0, -2.0], vec![0.7, 1.0, -2.0]);
        c.train.dt = dt;
        assert!(cascaded_doppler_spread(&c).unwrap() > 100.0);
        let m = mitigate_phases(&c, |_, f| Ok(f)).unwrap();
        assert_eq!(m.boundary, 1);
        assert_eq!(m.steps, 1);
        assert!((m.theta[0] - 0.7).abs() < 1e-12);
        assert_eq!(&m.theta[1..], &c.theta_now[1..]);
        assert!(m.f_dc_after < 1e-9);
        let after = DopplerContext { theta_now: m.theta.clone(), ..c.clone() };
        assert!(cascaded_doppler_spread(&after).unwrap() < 1e-9);
    }

    #[test]
    fn guard_keeps_the_input_when_equalizing_hurts() {
        let c = ctx(0.0, 0.0, vec![2.0, 0.0, 0.0], vec![0.0, 0.0, 0.0]);
        // An evaluator that rewards the original phases only.
        let orig = c.theta_now.clone();
        let m = mitigate_phases(&c, |t, _| Ok(if t == orig.as_slice() { 1.0 } else { 2.0 })).unwrap();
        assert!(m.guard_fired);
        assert_eq!(m.steps, 0);
        assert_eq!(m.theta, orig);
        assert_eq!(m.objective, 1.0);
    }

    #[test]
    fn ties_break_by_index() {
        let c = ctx(0.0, 0.0, vec![1.0, 1.0, 0.0, 0.5], vec![0.0; 4]);
        let m = mitigate_phases(&c, |_, f| Ok(f)).unwrap();
        assert_eq!(m.boundary, 3);
        assert_eq!(m.steps, 3);
        // Everything collapses onto the slowest element's increment.
        assert!(m.f_dc_after < 1e-12);
        assert!(m.theta.iter().all(|t| t.abs() < 1e-12));
    }

    fn phases(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-PI..PI, n)
    }

    proptest! {
        #[test]
        fn common_offset_cancels(now in phases(6), prev in phases(6), speed in 0.0..150.0f64, phi in -PI..PI) {
            let still = ctx(0.0, phi, now.clone(), prev.clone());
            let moving = ctx(speed, phi, now, prev);
            let a = cascaded_doppler_spread(&still).unwrap();
            let b = cascaded_doppler_spread(&moving).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn mitigation_never_hurts_and_shrinks_the_spread(
            now in phases(8),
            prev in phases(8),
            speed in 0.0..150.0f64,
            phi in -PI..PI,
            weights in proptest::collection::vec(0.0..1.0f64, 8),
        ) {
            let c = ctx(speed, phi, now, prev);
            // Spread penalty plus a misalignment cost so the trade-off is real.
            let anchor = c.theta_now.clone();
            let mut spreads = Vec::new();
            let m = mitigate_phases(&c, |t, f| {
                spreads.push(f);
                let cost: f64 = t.iter().zip(&anchor).zip(&weights).map(|((a, b), w)| w * (1.0 - (a - b).cos())).sum();
                Ok(f / 100.0 + cost)
            }).unwrap();
            prop_assert!(m.objective <= m.baseline + 1e-9);
            prop_assert!(m.f_dc_after <= m.f_dc_before + 1e-9);
            for pair in spreads.windows(2) {
                prop_assert!(pair[1] <= pair[0] + 1e-9);
            }
        }
    }
}
