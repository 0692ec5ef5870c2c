use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

use super::multipliers::{init_multipliers, mse_weights, newton_update_multipliers, normalized_psi, RatioMultipliers};
use crate::downlink::{dca_energy_beams, optimize_beta, optimize_theta1, BetaCoefficients, DcaProblem, Theta1Context};
use crate::error::{Error, Result};
use crate::linalg::{wrap_phase, CMat, CVec, C64};
use crate::linkmetrics::{cross_gains, mse, uplink_channels, DownlinkDecision, LatencyReport, LinkState, UplinkDecision};
use crate::scenario::{Band, ChannelSet, SystemConfig};
use crate::uplink::{
    build_sdr_problem, mmse_decoder, optimize_gamma, recover_phases, solve_sdp, CovertProjector, GammaContext,
    SdrProblem,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockTag {
    Init,
    Alpha,
    Beta,
    Decoders,
    Beams,
    Theta1,
    Gamma,
    Theta2,
    Multipliers,
}

impl BlockTag {
    pub fn name(self) -> &'static str {
        match self {
            BlockTag::Init => "init",
            BlockTag::Alpha => "alpha",
            BlockTag::Beta => "beta",
            BlockTag::Decoders => "decoders",
            BlockTag::Beams => "beams",
            BlockTag::Theta1 => "theta1",
            BlockTag::Gamma => "gamma",
            BlockTag::Theta2 => "theta2",
            BlockTag::Multipliers => "multipliers",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub outer: usize,
    pub inner: usize,
    pub block: BlockTag,
    /// Weighted latency after the block, in seconds.
    pub objective: f64,
    /// Normalized multiplier residual norm at the time of the record.
    pub psi: f64,
    /// Whether the block's proposal was kept.
    pub accepted: bool,
}

/// Which blocks run and how the decision is initialized.
#[derive(Debug, Clone, PartialEq)]
pub struct BcdOptions {
    /// Seed of the initialization draw.
    pub seed: u64,
    /// Overrides the random initial energy beams.
    pub init_w: Option<CMat>,
    pub optimize_w: bool,
    pub optimize_theta1: bool,
    pub optimize_theta2: bool,
}

impl Default for BcdOptions {
    fn default() -> Self {
        Self { seed: 0, init_w: None, optimize_w: true, optimize_theta1: true, optimize_theta2: true }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SdpStats {
    pub solves: usize,
    pub infeasible: usize,
    pub not_converged: usize,
    pub worst_residual: f64,
    pub rounding_rejected: usize,
}

#[derive(Debug, Clone)]
pub struct BcdSolution {
    pub downlink: DownlinkDecision,
    pub uplink: UplinkDecision,
    pub alpha: Vec<f64>,
    pub multipliers: RatioMultipliers,
    pub report: LatencyReport,
    pub trace: Vec<TraceRecord>,
    /// Objective at initialization followed by the value after each
    /// outer iteration.
    pub outer_objectives: Vec<f64>,
    pub outer_iterations: usize,
    pub converged: bool,
    pub sdp: SdpStats,
}

impl BcdSolution {
    pub fn initial_objective(&self) -> f64 {
        self.outer_objectives[0]
    }

    pub fn objective(&self) -> f64 {
        self.report.objective
    }
}

fn uniform_cmat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMat {
    CMat::from_fn(r, c, |_, _| C64::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)))
}

/// `√P W̄ / ‖W̄‖_F`.
pub fn scale_to_power(w: &CMat, p_max: f64) -> CMat {
    let n = w.norm();
    if n == 0.0 {
        return w.clone();
    }
    w * C64::new(p_max.sqrt() / n, 0.0)
}

struct Driver<'a> {
    cfg: &'a SystemConfig,
    ch: &'a ChannelSet,
    opts: &'a BcdOptions,
    dl: DownlinkDecision,
    ul: UplinkDecision,
    link: LinkState,
    objective: f64,
    lambda: Vec<f64>,
    eta: Vec<f64>,
    gamma_mse: [Vec<f64>; 2],
    psi_norm: f64,
    trace: Vec<TraceRecord>,
    outer: usize,
    inner: usize,
    projector: CovertProjector,
    warm: Option<CMat>,
    rng: ChaCha8Rng,
    sdp: SdpStats,
}

impl<'a> Driver<'a> {
    fn evaluate(&self, dl: &DownlinkDecision, ul: &UplinkDecision) -> Result<(LinkState, f64)> {
        let link = LinkState::evaluate(self.cfg, self.ch, dl, ul)?;
        let obj = link.ratio_objective(self.cfg);
        Ok((link, obj))
    }

    fn record(&mut self, block: BlockTag, accepted: bool) {
        self.trace.push(TraceRecord {
            outer: self.outer,
            inner: self.inner,
            block,
            objective: self.objective,
            psi: self.psi_norm,
            accepted,
        });
    }

    /// Keeps a proposal only when it does not raise the objective.
    fn offer(&mut self, dl: DownlinkDecision, ul: UplinkDecision, link: LinkState, obj: f64) -> bool {
        if obj <= self.objective {
            self.dl = dl;
            self.ul = ul;
            self.link = link;
            self.objective = obj;
            true
        } else {
            false
        }
    }

    fn scale(&self) -> Vec<f64> {
        self.lambda.iter().zip(&self.eta).map(|(l, e)| l * e).collect()
    }

    fn refresh_weights(&mut self) -> Result<()> {
        let l = self.ch.num_iotds();
        let mut e = [vec![0.0; l], vec![0.0; l]];
        for band in Band::ALL {
            let k = band.index();
            for i in 0..l {
                e[k][i] = mse(
                    &self.link.eff.g_bar[k],
                    &self.ul.f[k],
                    &self.link.band_powers[k],
                    self.cfg.noise_variance(band),
                    i,
                )?;
            }
        }
        self.gamma_mse = mse_weights(&self.lambda, &self.eta, self.bandwidths(), &e)?;
        Ok(())
    }

    fn bandwidths(&self) -> [f64; 2] {
        [self.cfg.bandwidth(Band::Sub6), self.cfg.bandwidth(Band::MmWave)]
    }

    fn beta_block(&mut self) -> Result<()> {
        let coeffs = BetaCoefficients::from_state(self.cfg, &self.link, &self.ul);
        let sol = optimize_beta(&coeffs, &self.scale(), self.bandwidths(), self.dl.beta)?;
        let mut dl = self.dl.clone();
        dl.beta = sol.beta;
        let (link, obj) = self.evaluate(&dl, &self.ul)?;
        let ok = self.offer(dl, self.ul.clone(), link, obj);
        self.record(BlockTag::Beta, ok);
        Ok(())
    }

    /// MMSE decoders for the given composite uplink channels. An IoTD
    /// without power in a band keeps its previous decoder so its SINR
    /// stays defined.
    fn matched_decoders(&self, g_bar: &[Vec<CVec>; 2], previous: &[CMat; 2]) -> Result<[CMat; 2]> {
        let mut f = previous.clone();
        for band in Band::ALL {
            let k = band.index();
            f[k] = mmse_decoder(&g_bar[k], &self.link.band_powers[k], self.cfg.noise_variance(band))?;
            for l in 0..f[k].ncols() {
                if f[k].column(l).norm() == 0.0 {
                    f[k].set_column(l, &previous[k].column(l));
                }
            }
        }
        Ok(f)
    }

    fn decoder_block(&mut self) -> Result<()> {
        let mut ul = self.ul.clone();
        ul.f = self.matched_decoders(&self.link.eff.g_bar, &self.ul.f)?;
        let (link, obj) = self.evaluate(&self.dl, &ul)?;
        let ok = self.offer(self.dl.clone(), ul, link, obj);
        self.record(BlockTag::Decoders, ok);
        Ok(())
    }

    fn beam_block(&mut self) -> Result<()> {
        if !self.opts.optimize_w {
            return Ok(());
        }
        self.refresh_weights()?;
        let problem = DcaProblem::from_state(self.cfg, &self.link, &self.ul, &self.gamma_mse, self.dl.beta);
        let out = dca_energy_beams(&problem, &self.dl.w, self.cfg.tol.eps_dca, self.cfg.t_dca_max)?;
        let mut dl = self.dl.clone();
        dl.w = out.w;
        let (link, obj) = self.evaluate(&dl, &self.ul)?;
        let ok = self.offer(dl, self.ul.clone(), link, obj);
        self.record(BlockTag::Beams, ok);
        Ok(())
    }

    fn theta1_block(&mut self) -> Result<()> {
        if !self.opts.optimize_theta1 || self.ch.n1() == 0 {
            return Ok(());
        }
        let gains = [0, 1].map(|k| cross_gains(&self.link.eff.g_bar[k], &self.ul.f[k]));
        let noise = Band::ALL.map(|b| {
            let f = &self.ul.f[b.index()];
            (0..f.ncols()).map(|l| self.cfg.noise_variance(b) * f.column(l).norm_squared()).collect::<Vec<_>>()
        });
        let scale = self.scale();
        let ctx = Theta1Context {
            channels: self.ch,
            w: &self.dl.w,
            gains,
            noise,
            gamma: &self.ul.gamma,
            beta: self.dl.beta,
            xi: self.cfg.xi,
            bandwidths: self.bandwidths(),
            scale: &scale,
        };
        let out = optimize_theta1(&ctx, &self.dl.theta1, self.cfg.theta1_grid, self.cfg.theta1_tol, self.cfg.theta1_passes)?;
        let mut dl = self.dl.clone();
        dl.theta1 = out.theta1;
        let (link, obj) = self.evaluate(&dl, &self.ul)?;
        let ok = self.offer(dl, self.ul.clone(), link, obj);
        self.record(BlockTag::Theta1, ok);
        Ok(())
    }

    fn gamma_block(&mut self) -> Result<()> {
        let l = self.ch.num_iotds();
        let mut any = false;
        for i in 0..l {
            let gains = [0, 1].map(|k| cross_gains(&self.link.eff.g_bar[k], &self.ul.f[k]));
            let noise = Band::ALL.map(|b| {
                let f = &self.ul.f[b.index()];
                (0..f.ncols()).map(|j| self.cfg.noise_variance(b) * f.column(j).norm_squared()).collect::<Vec<_>>()
            });
            let ctx = GammaContext {
                gains: [&gains[0], &gains[1]],
                powers: &self.link.powers,
                noise: [&noise[0], &noise[1]],
                bandwidths: self.bandwidths(),
                gamma: &self.ul.gamma,
            };
            let sol = optimize_gamma(i, &ctx)?;
            if sol.gamma == self.ul.gamma[i] {
                continue;
            }
            let mut ul = self.ul.clone();
            ul.gamma[i] = sol.gamma;
            let link = LinkState::from_effective(self.cfg, self.link.eff.clone(), &self.dl, &ul)?;
            let obj = link.ratio_objective(self.cfg);
            any |= self.offer(self.dl.clone(), ul, link, obj);
        }
        self.record(BlockTag::Gamma, any);
        Ok(())
    }

    fn theta2_block(&mut self) -> Result<()> {
        if !self.opts.optimize_theta2 || self.ch.n2() == 0 {
            return Ok(());
        }
        self.refresh_weights()?;
        let problem = build_sdr_problem(self.ch, &self.ul.f, &self.link.band_powers, &self.gamma_mse)?;
        if problem.lambda.norm() == 0.0 {
            return Ok(());
        }
        let tol = &self.cfg.tol;
        self.sdp.solves += 1;
        let solution = match solve_sdp(&problem, tol.eps_sdp, tol.eps_leak, self.cfg.sdp_max_iter, self.warm.as_ref()) {
            Ok(s) => s,
            Err(Error::Infeasible(_)) => {
                // Drop the covert rows from the relaxation; rounding still
                // refuses candidates that leak more than the incumbent.
                self.sdp.infeasible += 1;
                let relaxed = SdrProblem { constraint_mats: Vec::new(), ..problem.clone() };
                solve_sdp(&relaxed, tol.eps_sdp, tol.eps_leak, self.cfg.sdp_max_iter, self.warm.as_ref())?
            }
            Err(e) => return Err(e),
        };
        if !solution.converged {
            self.sdp.not_converged += 1;
        }
        self.sdp.worst_residual = self.sdp.worst_residual.max(solution.kkt_residuals.max());
        self.warm = Some(solution.omega.clone());
        // Candidates are scored with decoders matched to their own
        // channels; the old decoders only fit the incumbent phases.
        let this = &*self;
        let rescore = |th: &[f64]| -> Result<UplinkDecision> {
            let mut ul = this.ul.clone();
            ul.theta2 = th.to_vec();
            let g_bar = Band::ALL.map(|b| uplink_channels(this.ch, b, th));
            ul.f = this.matched_decoders(&g_bar, &this.ul.f)?;
            Ok(ul)
        };
        let evaluate = |th: &[f64]| -> Result<f64> { Ok(this.evaluate(&this.dl, &rescore(th)?)?.1) };
        let mut rng = this.rng.clone();
        let out = recover_phases(
            &solution,
            &this.projector,
            this.cfg.n_rand,
            &mut rng,
            &this.ul.theta2,
            tol.eps_leak,
            evaluate,
        )?;
        let mut accepted = false;
        if out.improved {
            let ul = rescore(&out.theta2)?;
            let (link, obj) = self.evaluate(&self.dl, &ul)?;
            self.rng = rng;
            accepted = self.offer(self.dl.clone(), ul, link, obj);
        } else {
            self.rng = rng;
            self.sdp.rounding_rejected += 1;
        }
        self.record(BlockTag::Theta2, accepted);
        Ok(())
    }

    /// Multiplier step; returns the residual norm measured before it.
    fn multiplier_block(&mut self) -> Result<f64> {
        let (cs, cm) = (&self.link.cap[0], &self.link.cap[1]);
        let total: Vec<f64> = cs.iter().zip(cm).map(|(a, b)| a + b).collect();
        let r = normalized_psi(&self.lambda, &self.eta, &total, &self.cfg.weights, &self.cfg.volumes);
        let before = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        let step = newton_update_multipliers(
            &self.lambda,
            &self.eta,
            cs,
            cm,
            &self.cfg.weights,
            &self.cfg.volumes,
            self.cfg.delta,
            self.cfg.epsilon_newton,
        )?;
        self.lambda = step.lambda;
        self.eta = step.eta;
        let r = normalized_psi(&self.lambda, &self.eta, &total, &self.cfg.weights, &self.cfg.volumes);
        self.psi_norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        self.record(BlockTag::Multipliers, true);
        Ok(before)
    }

    fn alpha(&self) -> Result<Vec<f64>> {
        (0..self.ch.num_iotds())
            .map(|l| super::optimal_volume_split(1.0, self.link.cap[0][l], self.link.cap[1][l]).map(|x| x.1))
            .collect()
    }
}

/// Block coordinate descent over the time split, decoders, energy beams,
/// IRS1 phases, power split and IRS2 phases, wrapped in the sum-of-ratios
/// multiplier iteration. Every block is guarded so that the weighted
/// latency never increases.
pub fn bcd_solve(cfg: &SystemConfig, ch: &ChannelSet, opts: &BcdOptions) -> Result<BcdSolution> {
    cfg.validate()?;
    let l = cfg.num_iotds;
    if ch.num_iotds() != l || ch.m1() != cfg.m1 || ch.m2() != cfg.m2 {
        return Err(Error::Contract("channel set does not match the configuration".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let beta = loop {
        let b: f64 = rng.random();
        if b > 0.0 {
            break b;
        }
    };
    let alpha0: Vec<f64> = (0..l).map(|_| rng.random()).collect();
    let gamma: Vec<f64> = (0..l).map(|_| rng.random()).collect();
    let theta1: Vec<f64> = (0..ch.n1()).map(|_| rng.random_range(0.0..TAU)).collect();
    let mut theta2: Vec<f64> = (0..ch.n2()).map(|_| rng.random_range(0.0..TAU)).collect();
    // Same law as the random-beam benchmark, so a paired run starts from it.
    let w_draw = CMat::from_fn(cfg.m1, cfg.m1, |_, _| C64::new(rng.random(), rng.random()));
    let w = match &opts.init_w {
        Some(w) if w.shape() == (cfg.m1, cfg.m1) => w.clone(),
        Some(_) => return Err(Error::Contract("initial beams must be M1 x M1".into())),
        None => scale_to_power(&w_draw, cfg.p_max),
    };
    let f = [uniform_cmat(&mut rng, cfg.m2, l), uniform_cmat(&mut rng, cfg.m2, l)];

    let mut sdr_probe = None;
    if opts.optimize_theta2 && ch.n2() > 0 {
        // Start inside the leakage budget so the covert guard has a
        // feasible incumbent.
        let rows: Vec<CVec> = ch
            .bands
            .iter()
            .flat_map(|bc| bc.d.iter().flat_map(move |d| bc.g_r.iter().map(move |g| d.component_mul(g))))
            .collect();
        let projector = CovertProjector::new(&rows);
        let phi = CVec::from_iterator(theta2.len(), theta2.iter().map(|&t| C64::from_polar(1.0, t)));
        let phi = projector.restore(&phi, cfg.tol.eps_leak, 200);
        theta2 = phi.iter().map(|z| wrap_phase(z.arg())).collect();
        sdr_probe = Some(projector);
    }
    let projector = sdr_probe.unwrap_or_else(|| CovertProjector::new(&[]));

    let dl = DownlinkDecision { beta, w, theta1 };
    let ul = UplinkDecision { gamma, f, theta2 };
    let link = LinkState::evaluate(cfg, ch, &dl, &ul).map_err(|e| e.context("initial evaluation"))?;
    let mut p1 = link.ratio_objective(cfg);
    let init = link
        .report(cfg, ch, &alpha0, &ul.theta2)
        .map_err(|e| e.context("initial evaluation"))?;
    let (lambda, eta) = init_multipliers(&link.cap[0], &link.cap[1], &cfg.weights, &cfg.volumes)?;

    let mut d = Driver {
        cfg,
        ch,
        opts,
        dl,
        ul,
        link,
        objective: init.objective,
        lambda,
        eta,
        gamma_mse: [vec![0.0; l], vec![0.0; l]],
        psi_norm: 0.0,
        trace: Vec::new(),
        outer: 0,
        inner: 0,
        projector,
        warm: None,
        rng,
        sdp: SdpStats::default(),
    };
    d.refresh_weights()?;
    d.record(BlockTag::Init, true);
    let mut outer_objectives = vec![init.objective];
    let mut alpha = alpha0;
    let mut converged = false;

    for t in 1..=cfg.t_max {
        d.outer = t;
        d.inner = 0;
        alpha = d.alpha()?;
        // With the split equalized the objective is the ratio form.
        d.objective = p1.min(d.objective);
        d.record(BlockTag::Alpha, true);
        for i in 1..=cfg.t_inner_max.max(1) {
            d.inner = i;
            let ctx = |b: &str| format!("outer {t}, inner {i}, {b} block");
            d.beta_block().map_err(|e| e.context(ctx("beta")))?;
            d.decoder_block().map_err(|e| e.context(ctx("decoder")))?;
            d.beam_block().map_err(|e| e.context(ctx("beam")))?;
            d.theta1_block().map_err(|e| e.context(ctx("IRS1 phase")))?;
            d.gamma_block().map_err(|e| e.context(ctx("power split")))?;
            d.theta2_block().map_err(|e| e.context(ctx("IRS2 phase")))?;
            let before = d.multiplier_block().map_err(|e| e.context(ctx("multiplier")))?;
            if before <= cfg.tol.eps1 {
                break;
            }
        }
        p1 = d.objective;
        let prev = *outer_objectives.last().expect("non-empty");
        outer_objectives.push(d.objective);
        if ((d.objective - prev) / d.objective).abs() <= cfg.tol.eps2 {
            converged = true;
            break;
        }
    }
    if d.outer > 0 {
        alpha = d.alpha()?;
    }
    let report = d.link.report(cfg, ch, &alpha, &d.ul.theta2)?;
    Ok(BcdSolution {
        downlink: d.dl,
        uplink: d.ul,
        alpha,
        multipliers: RatioMultipliers { lambda: d.lambda, eta: d.eta, gamma_mse: d.gamma_mse },
        report,
        trace: d.trace,
        outer_objectives,
        outer_iterations: d.outer,
        converged,
        sdp: d.sdp,
    })
}
