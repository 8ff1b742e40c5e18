//! Descent to stationary points of `G₁^{v₀}` and the constructions built on
//! it: truncation, lattice max/min, extremal pairs and the boundary glue.
//!
//! The first phase is the diagonally preconditioned step
//! `v ← v - α D^{-1} ∇G(v)` with `D_i ≥ ∂²G/∂v_i²` and `α ≤ 1`. Its
//! off-diagonal sensitivities are non-negative, so iterates started from an
//! upper (lower) barrier stay above (below) every stationary point with a
//! smaller (larger) exterior. Once the residual is small an L-BFGS phase
//! polishes the same basin. Line searches use the exact energy increment
//! along the direction, so Armijo tests stay meaningful at tiny steps.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{EnergyBreakdown, EnergyModel, Geometry, ModelParams, Region, WindowModel};
use crate::error::{invalid, Error, Result};
use crate::lattice::{derive_seed, Disorder, Exterior, Grid, ScalarField, WindowExterior};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Order-preserving preconditioned gradient descent only.
    Monotone,
    /// Monotone phase followed by L-BFGS once the residual is below `switch_tol`.
    MonotoneLbfgs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitPolicy {
    Constant { value: f64 },
    Random { amplitude: f64 },
    Given { values: Vec<f64> },
}

impl InitPolicy {
    fn label(&self) -> String {
        match self {
            InitPolicy::Constant { value } => format!("constant({value})"),
            InitPolicy::Random { amplitude } => format!("random({amplitude})"),
            InitPolicy::Given { .. } => "given".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: Method,
    /// Target Euler–Lagrange residual.
    pub tol: f64,
    pub max_iter: usize,
    pub multistart: usize,
    pub init: InitPolicy,
    pub armijo: f64,
    pub switch_tol: f64,
    pub lbfgs_memory: usize,
    /// Seed for random initial conditions.
    pub seed: u64,
    /// Energy window within which stationary points count as ties.
    pub tie_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: Method::MonotoneLbfgs,
            tol: 1e-10,
            max_iter: 20_000,
            multistart: 1,
            init: InitPolicy::Random { amplitude: 1.0 },
            armijo: 1e-4,
            switch_tol: 1e-4,
            lbfgs_memory: 10,
            seed: 0,
            tie_tol: 1e-8,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(invalid("tol", "tolerance must be positive"));
        }
        if self.multistart < 1 {
            return Err(invalid("multistart", "need at least one start"));
        }
        if !(self.armijo > 0.0 && self.armijo < 0.5) {
            return Err(invalid("armijo", "constant must lie in (0, 1/2)"));
        }
        Ok(())
    }

    pub fn with_init(&self, init: InitPolicy) -> Self {
        SolverConfig {
            init,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizeResult {
    pub field: ScalarField,
    pub energy: EnergyBreakdown,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub initial_condition: String,
    /// Energy after every accepted step, starting with the initial energy.
    #[serde(skip)]
    pub energy_trace: Vec<f64>,
}

impl MinimizeResult {
    pub fn values(&self) -> &[f64] {
        &self.field.values
    }
}

/// `v^t = t ∧ v ∨ (-t)`, applied to the interior and the exterior.
pub fn truncate(v: &ScalarField, t: f64) -> Result<ScalarField> {
    if !(t > 0.0) {
        return Err(invalid("t", "truncation level must be positive"));
    }
    let clamp = |x: f64| x.clamp(-t, t);
    ScalarField::new(
        v.grid,
        v.values.iter().map(|&x| clamp(x)).collect(),
        v.exterior.map(clamp),
    )
}

fn combine_exteriors(a: &Exterior, b: &Exterior, f: impl Fn(f64, f64) -> f64) -> Result<Exterior> {
    match (a, b) {
        (Exterior::Constant { value: x }, Exterior::Constant { value: y }) => Ok(Exterior::constant(f(*x, *y))),
        (Exterior::Window(x), Exterior::Window(y)) if x.outer == y.outer => Ok(Exterior::Window(WindowExterior {
            outer: x.outer,
            values: x.values.iter().zip(&y.values).map(|(p, q)| f(*p, *q)).collect(),
            tail: f(x.tail, y.tail),
        })),
        _ => Err(Error::Mismatch("exteriors are not comparable".into())),
    }
}

/// `(u ∨ v, u ∧ v)` pointwise, exteriors included.
pub fn lattice_min_max(u: &ScalarField, v: &ScalarField) -> Result<(ScalarField, ScalarField)> {
    if u.grid != v.grid {
        return Err(Error::Mismatch("fields live on different grids".into()));
    }
    let hi = u.values.iter().zip(&v.values).map(|(a, b)| a.max(*b)).collect();
    let lo = u.values.iter().zip(&v.values).map(|(a, b)| a.min(*b)).collect();
    Ok((
        ScalarField::new(u.grid, hi, combine_exteriors(&u.exterior, &v.exterior, f64::max)?)?,
        ScalarField::new(u.grid, lo, combine_exteriors(&u.exterior, &v.exterior, f64::min)?)?,
    ))
}

fn initial_values(model: &EnergyModel, init: &InitPolicy, seed: u64) -> Result<Vec<f64>> {
    let n = model.len();
    match init {
        InitPolicy::Constant { value } => Ok(vec![*value; n]),
        InitPolicy::Random { amplitude } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok((0..n).map(|_| rng.gen_range(-1.0..=1.0) * amplitude).collect())
        }
        InitPolicy::Given { values } => {
            if values.len() != n {
                return Err(Error::Mismatch("initial field length".into()));
            }
            Ok(values.clone())
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Single descent from `init`.
pub fn descend(model: &EnergyModel, cfg: &SolverConfig, init: Vec<f64>, label: String) -> Result<MinimizeResult> {
    cfg.validate()?;
    let mut v = init;
    if v.len() != model.len() {
        return Err(Error::Mismatch("initial field length".into()));
    }
    let diag = model.diagonal_bound();
    let mut eval = model.evaluate(&v);
    let mut grad = model.gradient_with(&v, &eval);
    let mut residual = model.residual_of_gradient(&grad);
    let mut energy = model.total_energy(&v)?.total;
    let mut trace = vec![energy];
    let mut lbfgs = cfg.method == Method::MonotoneLbfgs && residual <= cfg.switch_tol;
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;
    let mut since_refresh = 0;

    while residual > cfg.tol && iterations < cfg.max_iter {
        if !lbfgs && cfg.method == Method::MonotoneLbfgs && residual <= cfg.switch_tol {
            lbfgs = true;
        }
        let mut p = if lbfgs && !memory.is_empty() {
            lbfgs_direction(&grad, &diag, &memory)
        } else {
            grad.iter().zip(&diag).map(|(g, d)| -g / d).collect()
        };
        let mut gp = dot(&grad, &p);
        if !(gp < 0.0) {
            memory.clear();
            p = grad.iter().zip(&diag).map(|(g, d)| -g / d).collect();
            gp = dot(&grad, &p);
        }
        let eval_p = model.evaluate(&p);
        let coeffs = model.direction_coefficients(&v, &eval, &p, &eval_p);
        let mut alpha = 1.0;
        let mut change = model.energy_change(&v, &p, alpha, coeffs);
        while change > cfg.armijo * alpha * gp {
            alpha *= 0.5;
            if alpha < 1e-30 {
                break;
            }
            change = model.energy_change(&v, &p, alpha, coeffs);
        }
        if alpha < 1e-30 {
            if lbfgs && !memory.is_empty() {
                memory.clear();
                continue;
            }
            break;
        }
        for i in 0..v.len() {
            v[i] += alpha * p[i];
            eval.q[i] += alpha * eval_p.q[i];
        }
        since_refresh += 1;
        if since_refresh >= 64 {
            eval = model.evaluate(&v);
            since_refresh = 0;
        }
        let new_grad = model.gradient_with(&v, &eval);
        if lbfgs {
            let s: Vec<f64> = p.iter().map(|x| alpha * x).collect();
            let y: Vec<f64> = new_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-14 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
                memory.push_back((s, y, sy));
                if memory.len() > cfg.lbfgs_memory {
                    memory.pop_front();
                }
            }
        }
        grad = new_grad;
        residual = model.residual_of_gradient(&grad);
        energy += change;
        trace.push(energy);
        iterations += 1;
    }

    // fresh evaluation for the reported quantities
    let grad = model.gradient(&v)?;
    let residual = model.residual_of_gradient(&grad);
    let breakdown = model.total_energy(&v)?;
    Ok(MinimizeResult {
        field: model.field(v)?,
        energy: breakdown,
        residual,
        iterations,
        converged: residual <= cfg.tol,
        initial_condition: label,
        energy_trace: trace,
    })
}

fn lbfgs_direction(grad: &[f64], diag: &[f64], memory: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, sy) in memory.iter().rev() {
        let a = dot(s, &q) / sy;
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    let (_, y_last, sy_last) = memory.back().expect("non-empty memory");
    let yhy: f64 = y_last.iter().zip(diag).map(|(y, d)| y * y / d).sum();
    let gamma = sy_last / yhy;
    let mut r: Vec<f64> = q.iter().zip(diag).map(|(q, d)| gamma * q / d).collect();
    for ((s, y, sy), a) in memory.iter().zip(alphas.iter().rev()) {
        let b = dot(y, &r) / sy;
        for (ri, si) in r.iter_mut().zip(s) {
            *ri += (a - b) * si;
        }
    }
    r.iter_mut().for_each(|x| *x = -*x);
    r
}

/// Lexicographic comparison of two fields.
fn lex_greater(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x != y {
            return x > y;
        }
    }
    false
}

/// Descends from `cfg.init` and from `cfg.multistart - 1` further random
/// starts, returning the lowest-energy stationary point; energies within
/// `tie_tol` are broken toward the lexicographically larger field.
pub fn minimize(model: &EnergyModel, cfg: &SolverConfig) -> Result<MinimizeResult> {
    let runs = multistart_runs(model, cfg)?;
    Ok(select_best(runs, cfg.tie_tol))
}

fn multistart_runs(model: &EnergyModel, cfg: &SolverConfig) -> Result<Vec<MinimizeResult>> {
    cfg.validate()?;
    let mut runs = Vec::with_capacity(cfg.multistart);
    for k in 0..cfg.multistart {
        let (init, label) = if k == 0 {
            (initial_values(model, &cfg.init, cfg.seed)?, cfg.init.label())
        } else {
            let amp = model.exterior().sup_norm().max(1.0);
            let policy = InitPolicy::Random { amplitude: amp };
            (
                initial_values(model, &policy, derive_seed(cfg.seed, k as u64))?,
                format!("{}#{k}", policy.label()),
            )
        };
        runs.push(descend(model, cfg, init, label)?);
    }
    Ok(runs)
}

fn select_best(runs: Vec<MinimizeResult>, tie_tol: f64) -> MinimizeResult {
    let mut best: Option<MinimizeResult> = None;
    for r in runs {
        best = Some(match best {
            None => r,
            Some(b) => {
                let (eb, er) = (b.energy.total, r.energy.total);
                let converged_first = r.converged && !b.converged;
                if converged_first
                    || (r.converged == b.converged
                        && (er < eb - tie_tol || ((er - eb).abs() <= tie_tol && lex_greater(r.values(), b.values()))))
                {
                    r
                } else {
                    b
                }
            }
        });
    }
    best.expect("at least one start")
}

/// Approximate maximal (`plus`) and minimal (`minus`) minimizers for the
/// exteriors `±K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremalStates {
    pub k: f64,
    pub plus: MinimizeResult,
    pub minus: MinimizeResult,
    /// `max(0, max_i (v⁻_i - v⁺_i))`.
    pub ordering_violation: f64,
    /// `‖v^{±,K} - v^{±,2K}‖_∞` when requested.
    pub k_gap: Option<f64>,
    /// Pointwise envelope size when several tied stationary points were merged.
    pub envelope_members: (usize, usize),
}

impl ExtremalStates {
    pub fn converged(&self) -> bool {
        self.plus.converged && self.minus.converged
    }

    pub fn energy_difference(&self) -> f64 {
        self.plus.energy.total - self.minus.energy.total
    }
}

/// One barrier descent plus the tie envelope: the pointwise max (`upper`) or
/// min over all stationary points whose energy ties with the best.
fn barrier_state(model: &EnergyModel, cfg: &SolverConfig, barrier: f64, upper: bool) -> Result<(MinimizeResult, usize)> {
    let cfg_b = cfg.with_init(InitPolicy::Constant { value: barrier });
    let runs = multistart_runs(model, &cfg_b)?;
    if runs.len() == 1 {
        return Ok((runs.into_iter().next().expect("one run"), 1));
    }
    let best_energy = runs
        .iter()
        .filter(|r| r.converged)
        .map(|r| r.energy.total)
        .fold(f64::INFINITY, f64::min);
    let tied: Vec<&MinimizeResult> = runs
        .iter()
        .filter(|r| r.converged && r.energy.total <= best_energy + cfg.tie_tol)
        .collect();
    if tied.is_empty() {
        return Ok((runs.into_iter().next().expect("one run"), 1));
    }
    let mut env = tied[0].values().to_vec();
    for r in &tied[1..] {
        for (e, x) in env.iter_mut().zip(r.values()) {
            *e = if upper { e.max(*x) } else { e.min(*x) };
        }
    }
    let count = tied.len();
    // the envelope is re-descended so that the reported state is stationary
    let base = tied[0].clone();
    let mut out = descend(model, cfg, env, format!("envelope({count})"))?;
    if !out.converged {
        out = base;
    }
    Ok((out, count))
}

/// Extremal pair on `geometry` for the exteriors `±k`, descending from the
/// barriers `±k`.
pub fn extremal_pair_on(
    geometry: &Arc<Geometry>,
    params: ModelParams,
    disorder: &Disorder,
    k: f64,
    cfg: &SolverConfig,
    k_sensitivity: bool,
) -> Result<ExtremalStates> {
    if !(k > 0.0) {
        return Err(invalid("k", "barrier must be positive"));
    }
    let plus_model = EnergyModel::with_geometry(geometry.clone(), params, disorder, Exterior::constant(k))?;
    let minus_model = plus_model.with_exterior(Exterior::constant(-k))?;
    let (plus, np) = barrier_state(&plus_model, cfg, k, true)?;
    let (minus, nm) = barrier_state(&minus_model, cfg, -k, false)?;
    let ordering_violation = plus
        .values()
        .iter()
        .zip(minus.values())
        .fold(0.0f64, |m, (p, q)| m.max(q - p));
    let k_gap = if k_sensitivity {
        let pm2 = plus_model.with_exterior(Exterior::constant(2.0 * k))?;
        let mm2 = plus_model.with_exterior(Exterior::constant(-2.0 * k))?;
        let (p2, _) = barrier_state(&pm2, cfg, 2.0 * k, true)?;
        let (m2, _) = barrier_state(&mm2, cfg, -2.0 * k, false)?;
        let gap = |a: &[f64], b: &[f64]| a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        Some(gap(plus.values(), p2.values()).max(gap(minus.values(), m2.values())))
    } else {
        None
    };
    Ok(ExtremalStates {
        k,
        plus,
        minus,
        ordering_violation,
        k_gap,
        envelope_members: (np, nm),
    })
}

/// Extremal pair on `Λ_n` for exteriors `±K`; `K ≥ 1 + C₀ θ A` is required.
pub fn extremal_pair(
    k: f64,
    disorder: &Disorder,
    params: ModelParams,
    grid: Grid,
    cfg: &SolverConfig,
) -> Result<ExtremalStates> {
    let bound = params.sup_bound(disorder.distribution().bound());
    if k < bound - 1e-12 {
        return Err(invalid("k", format!("{k} is below the a priori bound {bound}")));
    }
    let geometry = Geometry::new(grid, params.s)?;
    extremal_pair_on(&geometry, params, disorder, k, cfg, true)
}

/// Cubic smoothstep of the distance to the boundary of the box: 0 on `∂Λ`,
/// 1 at depth ≥ 1.
pub fn cutoff_weight(distance: f64) -> f64 {
    let t = distance.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// `ũ = Ψ v⁺ + (1 - Ψ) v⁻` on the grid, carrying the exterior of `v⁻`.
pub fn glue_cutoff(v_plus: &ScalarField, v_minus: &ScalarField) -> Result<ScalarField> {
    if v_plus.grid != v_minus.grid {
        return Err(Error::Mismatch("fields live on different grids".into()));
    }
    let grid = v_plus.grid;
    let values = (0..grid.len())
        .map(|i| {
            let psi = cutoff_weight(grid.distance_to_boundary(i));
            psi * v_plus.values[i] + (1.0 - psi) * v_minus.values[i]
        })
        .collect();
    ScalarField::new(grid, values, v_minus.exterior.clone())
}

/// Energies of the glue argument on the box `inner` inside a window that
/// carries both extremal fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlueReport {
    /// `G₁(v⁻, Λ)`.
    pub g_minus: f64,
    /// `G₁^{v⁻}(ũ, Λ)`.
    pub g_glued: f64,
    /// `G₁(v⁺, Λ)`.
    pub g_plus: f64,
    /// `K₁(ũ, ∂Λ) - K₁(v⁺, ∂Λ)` on the unit boundary shell.
    pub r1: f64,
    /// Change of the core–shell interaction.
    pub r2: f64,
    /// Change of the interaction with the exterior.
    pub r3: f64,
}

impl GlueReport {
    /// `G₁^{v⁻}(ũ) - G₁(v⁺) - (ℛ₁ + ℛ₂ + ℛ₃)`; zero up to rounding.
    pub fn identity_defect(&self) -> f64 {
        self.g_glued - self.g_plus - (self.r1 + self.r2 + self.r3)
    }
}

/// The glue decomposition for fields known on the window of `wm`, with
/// constant tails beyond it.
pub fn glue_decomposition(
    wm: &WindowModel,
    inner: &Grid,
    plus: &[f64],
    plus_tail: f64,
    minus: &[f64],
    minus_tail: f64,
) -> Result<GlueReport> {
    let window = *wm.grid();
    let lam = Region::concentric(&window, inner)?;
    let shell = Region::boundary_shell(&window, inner, 1.0)?;
    let core = lam.minus(&shell);
    let hw = inner.half_width();
    let glued: Vec<f64> = (0..window.len())
        .map(|i| {
            if !lam.contains(i) {
                return minus[i];
            }
            let x = window.point(i);
            let dist = (0..window.dim())
                .map(|a| hw - x[a].abs())
                .fold(f64::INFINITY, f64::min);
            let psi = cutoff_weight(dist);
            psi * plus[i] + (1.0 - psi) * minus[i]
        })
        .collect();
    let g_minus = wm.total(minus, minus_tail, &lam)?;
    let g_glued = wm.breakdown(&glued, minus_tail, &lam)?.total;
    let g_plus = wm.total(plus, plus_tail, &lam)?;
    let r1 = wm.interior(&glued, &shell)? - wm.interior(plus, &shell)?;
    let r2 = wm.pair_interaction(plus, &core, &glued, &shell)? - wm.pair_interaction(plus, &core, plus, &shell)?;
    let r3 = wm.exterior_interaction(&glued, &lam, &glued, minus_tail)?
        - wm.exterior_interaction(plus, &lam, plus, plus_tail)?;
    Ok(GlueReport {
        g_minus,
        g_glued,
        g_plus,
        r1,
        r2,
        r3,
    })
}
