//! Pipelines behind the subcommands. Each returns typed results; the
//! caller decides what to print and write.

use std::sync::Arc;

use entropic_hedge::dp::{certainty_equivalent, one_period_dual_check, OnePeriodDualReport};
use entropic_hedge::dual::{
    lower_bound_cn, objective_feedback, optimize_piecewise, specific_entropy, DualValue, PiecewiseControl,
};
use entropic_hedge::envelope::{build_terminal, SampledFunction, SmoothTerminal};
use entropic_hedge::hedging::{
    criterion_exact_1d, criterion_mc, simulate_paths, CriterionEstimate, StrategySpec, MC_MAX_N,
};
use entropic_hedge::hjb::{
    extract_control, read_surface, required_steps, solve_cauchy_1d, solve_quadratic_oracle, BoundaryMode,
    ValueSurface,
};
use entropic_hedge::numerics::{gauss_hermite, Grid1D, QuadRule, RngStream};
use entropic_hedge::payoffs::{find_assumption_radius, validate_assumption, AssumptionReport};

use crate::config::{ExperimentConfig, QuadraticTestConfig, StrategyConfig};
use crate::CliError;

/// Slack allowed in the sandwich inequalities.
pub const SANDWICH_TOL: f64 = 1e-6;
/// Stream reserved for the feedback simulation; hedging streams are `n`.
pub const FEEDBACK_STREAM: u64 = 1 << 32;

pub fn check(cfg: &ExperimentConfig) -> Result<AssumptionReport, CliError> {
    let a = &cfg.assumption;
    match a.radius {
        Some(m) => {
            let g = Grid1D::with_step(-2.0 * m, 2.0 * m, a.probe_step)?;
            Ok(validate_assumption(&cfg.payoff, m, a.alpha, &vec![g; cfg.dim()])?)
        }
        None => {
            let (found, mut reports) = find_assumption_radius(&cfg.payoff, a.alpha, a.probe_step)?;
            let report = match found {
                Some(_) => reports.pop(),
                None => reports.into_iter().next(),
            };
            report.ok_or_else(|| CliError::Config("payoff scale gives no probe radius".into()))
        }
    }
}

/// Terminal and value surface of one HJB run.
#[derive(Debug, Clone)]
pub struct Solved {
    pub terminal: Option<SmoothTerminal>,
    pub surface: Arc<ValueSurface>,
    pub u0: f64,
}

pub fn solve(cfg: &ExperimentConfig) -> Result<Solved, CliError> {
    if cfg.dim() != 1 {
        return Err(CliError::Config("the HJB solver needs d = 1".into()));
    }
    let s0 = cfg.market.s0.clone();
    if let Some(path) = &cfg.surface {
        let surface = Arc::new(read_surface(path)?);
        let u0 = surface.value_at(0.0, &s0);
        return Ok(Solved { terminal: None, surface, u0 });
    }
    let axis = cfg.solver_axis()?;
    let terminal = build_terminal(&cfg.payoff, cfg.epsilon, &[axis], cfg.solver.padding)?;
    let n_t = match cfg.solver.time_steps {
        Some(n) => n,
        None => required_steps(terminal.alpha, axis.step(), cfg.solver.slices),
    };
    log::info!("solving with {n_t} steps, delta {}, alpha {}", terminal.delta, terminal.alpha);
    let surface = solve_cauchy_1d(&terminal, n_t, cfg.solver.slices, BoundaryMode::default())?;
    for w in &surface.warnings {
        log::warn!("{w}");
    }
    let u0 = surface.value_at(0.0, &s0);
    Ok(Solved { terminal: Some(terminal), surface: Arc::new(surface), u0 })
}

/// Largest node error of the numerical solution for a quadratic terminal
/// over all stored slices.
pub fn quadratic_error(q: &QuadraticTestConfig) -> Result<(f64, ValueSurface), CliError> {
    let axis = Grid1D::with_step(-q.half_width, q.half_width, q.dx)?;
    let a = q.curvature;
    let h = SampledFunction::from_fn(vec![axis], 0.0, |x| 0.5 * a * x[0] * x[0])?;
    let env = h.values.clone();
    let terminal = SmoothTerminal::from_values(h, env, 0.0, 0.0, 0.0)?;
    let n_t = required_steps(terminal.alpha, axis.step(), q.slices);
    let u = solve_cauchy_1d(&terminal, n_t, q.slices, BoundaryMode::default())?;
    let xs = axis.nodes();
    let mut err = 0.0f64;
    for j in 0..=q.slices {
        let t = u.times.node(j);
        for (v, x) in u.slice(j).iter().zip(&xs) {
            err = err.max((v - solve_quadratic_oracle(a, 0.0, 0.0, t, *x)?).abs());
        }
    }
    Ok((err, u))
}

fn rule(cfg: &ExperimentConfig) -> Result<QuadRule, CliError> {
    Ok(gauss_hermite(cfg.dp.quad_order)?)
}

fn strategy(cfg: &ExperimentConfig, solved: Option<&Solved>) -> Result<StrategySpec, CliError> {
    Ok(match &cfg.strategy {
        StrategyConfig::Gradient => match solved {
            Some(s) => StrategySpec::GradientOf(s.surface.clone()),
            None => return Err(CliError::Config("gradient strategy needs a solved surface".into())),
        },
        StrategyConfig::Zero => StrategySpec::Zero,
        StrategyConfig::Constant(g) => StrategySpec::Constant(g.clone()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CeRow {
    pub n: usize,
    pub c_n: f64,
    /// Optimal first hedge ratio at `S₀`.
    pub gamma0: f64,
    pub bracket_width: f64,
}

pub fn ce(cfg: &ExperimentConfig) -> Result<Vec<CeRow>, CliError> {
    if cfg.dim() != 1 {
        return Err(CliError::Config("the certainty-equivalent recursion needs d = 1".into()));
    }
    let (grid, rule) = (cfg.dp_axis()?, rule(cfg)?);
    let s0 = cfg.market.s0[0];
    cfg.n_list
        .iter()
        .map(|&n| {
            let r = certainty_equivalent(&cfg.payoff, n, &cfg.market, &grid, &rule)?;
            Ok(CeRow { n, c_n: r.c_n, gamma0: grid.interp(&r.gamma_star[0], s0), bracket_width: r.bracket_width })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HedgeRow {
    pub n: usize,
    pub exact: Option<f64>,
    pub mc: Option<CriterionEstimate>,
}

fn mc_estimate(
    cfg: &ExperimentConfig,
    strategy: &StrategySpec,
    n: usize,
    seed: u64,
) -> Result<Option<CriterionEstimate>, CliError> {
    if cfg.monte_carlo.paths == 0 || n > MC_MAX_N {
        return Ok(None);
    }
    let batch = simulate_paths(&cfg.market, n, cfg.monte_carlo.paths, &RngStream::new(seed, n as u64))?;
    Ok(Some(criterion_mc(&batch, &cfg.payoff, strategy)?))
}

pub fn hedge_eval(cfg: &ExperimentConfig, solved: Option<&Solved>, seed: u64) -> Result<Vec<HedgeRow>, CliError> {
    let strategy = strategy(cfg, solved)?;
    let exact_inputs = if cfg.dim() == 1 { Some((cfg.dp_axis()?, rule(cfg)?)) } else { None };
    cfg.n_list
        .iter()
        .map(|&n| {
            let exact = match &exact_inputs {
                Some((grid, rule)) => {
                    Some(criterion_exact_1d(&cfg.payoff, &strategy, n, &cfg.market, grid, rule)?)
                }
                None => None,
            };
            Ok(HedgeRow { n, exact, mc: mc_estimate(cfg, &strategy, n, seed)? })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualPiece {
    pub m: usize,
    pub control: PiecewiseControl,
    pub value: DualValue,
    pub specific_entropy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualReport {
    pub pieces: Vec<DualPiece>,
    pub u0: f64,
    /// Monte Carlo value of the feedback control on the smooth terminal.
    pub feedback: Option<DualValue>,
    pub one_period: Vec<OnePeriodDualReport>,
}

impl DualReport {
    /// `|feedback − u0| ≤ 3·stderr + 0.01`.
    pub fn feedback_consistent(&self) -> bool {
        self.feedback.is_none_or(|f| (f.value - self.u0).abs() <= 3.0 * f.stderr + 0.01)
    }

    pub fn min_one_period_gap(&self) -> f64 {
        self.one_period.iter().map(|r| r.gap).fold(f64::INFINITY, f64::min)
    }
}

pub fn optimize_dual(cfg: &ExperimentConfig, m: usize) -> Result<DualPiece, CliError> {
    let (control, value) = optimize_piecewise(&cfg.payoff, m, cfg.dual.k_bound, &cfg.market.s0, &rule(cfg)?)?;
    let specific_entropy = specific_entropy(&control)?;
    Ok(DualPiece { m, control, value, specific_entropy })
}

/// Times at which the one-period duality is checked on `u(t, S₀ + ·)`.
const ONE_PERIOD_TIMES: [f64; 3] = [0.0, 0.5, 1.0];

pub fn dual(cfg: &ExperimentConfig, solved: &Solved, seed: u64) -> Result<DualReport, CliError> {
    let pieces = cfg.dual.pieces.iter().map(|&m| optimize_dual(cfg, m)).collect::<Result<Vec<_>, _>>()?;
    let s0 = cfg.market.s0.clone();
    let feedback = match (&solved.terminal, cfg.monte_carlo.feedback_paths) {
        (Some(t), paths) if paths > 0 => {
            let field = extract_control(&solved.surface)?;
            let rng = RngStream::new(seed, FEEDBACK_STREAM);
            Some(objective_feedback(&t.as_payoff(), &field, &s0, cfg.monte_carlo.euler_steps, paths, &rng)?)
        }
        _ => None,
    };
    let rule = rule(cfg)?;
    let b = cfg.market.drift[0];
    let mut one_period = Vec::new();
    for t in ONE_PERIOD_TIMES {
        for lambda in [0.0, b] {
            let u = &solved.surface;
            one_period.push(one_period_dual_check(|y| u.value_at(t, &[s0[0] + y]), lambda, cfg.dual.k_bound, &rule)?);
            if b == 0.0 {
                break;
            }
        }
    }
    Ok(DualReport { pieces, u0: solved.u0, feedback, one_period })
}

/// One line of the convergence table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub c_n: f64,
    /// `dual_value − |b|²/(2n)`.
    pub lower_bound: f64,
    pub dual_value: f64,
    pub strategy_value_exact: f64,
    pub strategy_value_mc: Option<f64>,
    pub mc_stderr: Option<f64>,
    pub limit_u0: f64,
}

impl ConvergenceRow {
    pub fn gap_upper(&self) -> f64 {
        self.strategy_value_exact - self.limit_u0
    }

    pub fn gap_lower(&self) -> f64 {
        self.limit_u0 - self.dual_value
    }

    pub fn sandwich_holds(&self) -> bool {
        self.lower_bound - SANDWICH_TOL <= self.c_n && self.c_n <= self.strategy_value_exact + SANDWICH_TOL
    }
}

pub fn converge(cfg: &ExperimentConfig, solved: &Solved, seed: u64) -> Result<Vec<ConvergenceRow>, CliError> {
    if cfg.dim() != 1 {
        return Err(CliError::Config("converge needs d = 1".into()));
    }
    let m = *cfg.dual.pieces.iter().max().expect("validated non-empty");
    let dual_value = optimize_dual(cfg, m)?.value.value;
    let strategy = StrategySpec::GradientOf(solved.surface.clone());
    let (grid, rule) = (cfg.dp_axis()?, rule(cfg)?);
    cfg.n_list
        .iter()
        .map(|&n| {
            let c_n = certainty_equivalent(&cfg.payoff, n, &cfg.market, &grid, &rule)?.c_n;
            let exact = criterion_exact_1d(&cfg.payoff, &strategy, n, &cfg.market, &grid, &rule)?;
            let mc = mc_estimate(cfg, &strategy, n, seed)?;
            log::info!("n = {n}: c_n {c_n}, strategy {exact}");
            Ok(ConvergenceRow {
                n,
                c_n,
                lower_bound: lower_bound_cn(dual_value, &cfg.market.drift, n),
                dual_value,
                strategy_value_exact: exact,
                strategy_value_mc: mc.as_ref().map(|e| e.value),
                mc_stderr: mc.as_ref().map(|e| e.stderr),
                limit_u0: solved.u0,
            })
        })
        .collect()
}
