//! The maps `T` and `Gamma` and a damped fixed-point search for `u = T u + Gamma u`
//! on the box of states with `0 <= u_i <= rho_i`.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::PointEnv;
use crate::grid::{ScalarField, SystemState};
use crate::problem::{eval_functional, random_states, Problem};

/// Results with `||u|| <= NONZERO_FACTOR * min rho` are reported as the zero solution.
pub const NONZERO_FACTOR: f64 = 1e-3;
/// Converged results closer than this in the product sup norm are merged.
pub const DEDUP_TOL: f64 = 1e-6;
pub const MAX_ANDERSON_DEPTH: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Acceleration {
    None,
    Anderson(usize),
}

impl fmt::Display for Acceleration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Acceleration::None => write!(f, "none"),
            Acceleration::Anderson(m) => write!(f, "anderson:{m}"),
        }
    }
}

impl FromStr for Acceleration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "none" {
            return Ok(Acceleration::None);
        }
        if let Some(m) = s.strip_prefix("anderson:") {
            let m = m
                .parse()
                .map_err(|_| Error::Usage(format!("invalid Anderson depth in `{s}`")))?;
            return Ok(Acceleration::Anderson(m));
        }
        Err(Error::Usage(format!("unknown acceleration `{s}`; expected none or anderson:<m>")))
    }
}

/// Named initial states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StartPreset {
    Zero,
    /// `u_i = rho_i / 2`.
    Mid,
    /// `u_i = rho_i`.
    Top,
    /// `k` seeded random states in the box.
    Random(usize),
}

impl fmt::Display for StartPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StartPreset::Zero => write!(f, "zero"),
            StartPreset::Mid => write!(f, "mid"),
            StartPreset::Top => write!(f, "top"),
            StartPreset::Random(k) => write!(f, "random:{k}"),
        }
    }
}

impl FromStr for StartPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "zero" => Ok(StartPreset::Zero),
            "mid" | "mid-box" => Ok(StartPreset::Mid),
            "top" | "top-box" => Ok(StartPreset::Top),
            other => other
                .strip_prefix("random:")
                .and_then(|k| k.parse().ok())
                .map(StartPreset::Random)
                .ok_or_else(|| Error::Usage(format!("unknown start `{other}`; expected zero, mid, top or random:<k>"))),
        }
    }
}

/// Parses a comma-separated start list such as `mid,top,random:5`.
pub fn parse_starts(s: &str) -> Result<Vec<StartPreset>> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(str::parse).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub acceleration: Acceleration,
    pub starts: Vec<StartPreset>,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 5000,
            damping: 0.5,
            acceleration: Acceleration::None,
            starts: vec![StartPreset::Mid, StartPreset::Top],
            seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Config(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        if let Acceleration::Anderson(m) = self.acceleration {
            if m == 0 || m > MAX_ANDERSON_DEPTH {
                return Err(Error::Config(format!(
                    "Anderson depth must lie in 1..={MAX_ANDERSON_DEPTH}, got {m}"
                )));
            }
        }
        if self.starts.is_empty() {
            return Err(Error::Config("at least one start is required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveResult {
    pub start: String,
    pub state: SystemState,
    /// `||u - T u - Gamma u||`, from a fresh evaluation at the final state.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub norm: f64,
    pub component_norms: Vec<f64>,
    pub nonzero: bool,
    pub history: Vec<f64>,
    /// Nodal clamp events per update step.
    pub clamp_history: Vec<usize>,
    pub clamp_events: usize,
}

impl SolveResult {
    pub fn label(&self) -> &'static str {
        match (self.converged, self.nonzero) {
            (true, true) => "nonzero",
            (true, false) => "zero",
            (false, _) => "not-converged",
        }
    }
}

fn check_state(problem: &Problem, state: &SystemState) -> Result<()> {
    if state.n() != problem.n() || state.node_count() != problem.grid().len() {
        return Err(Error::Usage(format!(
            "state has {} components on {} nodes, problem expects {} on {}",
            state.n(),
            state.node_count(),
            problem.n(),
            problem.grid().len()
        )));
    }
    Ok(())
}

fn t_component(problem: &Problem, state: &SystemState, i: usize) -> Result<ScalarField> {
    let grid = problem.grid();
    let c = problem.component(i);
    if c.lambda == 0.0 {
        return Ok(grid.constant(0.0));
    }
    let w = c.w.as_ref().map(|w| eval_functional(w, state, grid)).transpose()?;
    let mut u = vec![0.0; state.n()];
    let mut f = Vec::with_capacity(grid.len());
    for node in 0..grid.len() {
        state.gather(node, &mut u);
        f.push(c.f.expr.eval(&PointEnv {
            x: grid.node(node),
            u: &u,
            w,
        })?);
    }
    Ok(problem.discrete(i).operator.apply_k(&ScalarField::new(f))?.scaled(c.lambda))
}

fn gamma_component(problem: &Problem, state: &SystemState, i: usize) -> Result<ScalarField> {
    let c = problem.component(i);
    if c.eta == 0.0 {
        return Ok(problem.grid().constant(0.0));
    }
    let h = eval_functional(&c.h, state, problem.grid())?;
    Ok(problem.discrete(i).gamma.scaled(c.eta * h))
}

/// `T(u) = (lambda_i K_i F_i(u))_i`.
pub fn apply_t(problem: &Problem, state: &SystemState) -> Result<SystemState> {
    check_state(problem, state)?;
    let comps = (0..problem.n())
        .map(|i| t_component(problem, state, i).map_err(|e| e.in_component(i + 1)))
        .collect::<Result<Vec<_>>>()?;
    SystemState::new(comps)
}

/// `Gamma(u) = (eta_i h_i[u] gamma_i)_i`.
pub fn apply_gamma(problem: &Problem, state: &SystemState) -> Result<SystemState> {
    check_state(problem, state)?;
    let comps = (0..problem.n())
        .map(|i| gamma_component(problem, state, i).map_err(|e| e.in_component(i + 1)))
        .collect::<Result<Vec<_>>>()?;
    SystemState::new(comps)
}

/// `T(u) + Gamma(u)`.
pub fn apply_map(problem: &Problem, state: &SystemState) -> Result<SystemState> {
    check_state(problem, state)?;
    let comps = (0..problem.n())
        .map(|i| {
            let sum = || -> Result<ScalarField> {
                let t = t_component(problem, state, i)?;
                let g = gamma_component(problem, state, i)?;
                Ok(ScalarField::new(t.values().iter().zip(g.values()).map(|(a, b)| a + b).collect()))
            };
            sum().map_err(|e| e.in_component(i + 1))
        })
        .collect::<Result<Vec<_>>>()?;
    SystemState::new(comps)
}

/// `||u - T u - Gamma u||`.
pub fn residual(problem: &Problem, state: &SystemState) -> Result<f64> {
    Ok(state.distance(&apply_map(problem, state)?))
}

fn flatten(s: &SystemState) -> Vec<f64> {
    s.components().iter().flat_map(|c| c.values().iter().copied()).collect()
}

fn unflatten(v: Vec<f64>, n: usize) -> SystemState {
    let len = v.len() / n;
    let comps = v.chunks(len).map(|c| ScalarField::new(c.to_vec())).collect();
    SystemState::new(comps).expect("equal chunk lengths")
}

fn first_non_finite(s: &SystemState) -> Option<usize> {
    s.components()
        .iter()
        .position(|c| c.values().iter().any(|v| !v.is_finite()))
}

/// Type-II Anderson mixing over a window of past iterates.
struct Anderson {
    depth: usize,
    du: Vec<Vec<f64>>,
    dg: Vec<Vec<f64>>,
    prev: Option<(Vec<f64>, Vec<f64>)>,
}

impl Anderson {
    fn new(depth: usize) -> Self {
        Self {
            depth,
            du: Vec::new(),
            dg: Vec::new(),
            prev: None,
        }
    }

    fn step(&mut self, u: &[f64], g: &[f64], theta: f64) -> Vec<f64> {
        if let Some((pu, pg)) = self.prev.take() {
            self.du.push(u.iter().zip(&pu).map(|(a, b)| a - b).collect());
            self.dg.push(g.iter().zip(&pg).map(|(a, b)| a - b).collect());
            if self.du.len() > self.depth {
                self.du.remove(0);
                self.dg.remove(0);
            }
        }
        self.prev = Some((u.to_vec(), g.to_vec()));
        let picard = || u.iter().zip(g).map(|(a, b)| (1.0 - theta) * a + theta * b).collect();
        let m = self.du.len();
        if m == 0 {
            return picard();
        }
        // df_j = dg_j - du_j; minimise ||f - DF gamma||.
        let f: Vec<f64> = g.iter().zip(u).map(|(a, b)| a - b).collect();
        let df: Vec<Vec<f64>> = self
            .dg
            .iter()
            .zip(&self.du)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let mut a = vec![vec![0.0; m + 1]; m];
        for i in 0..m {
            for j in 0..m {
                a[i][j] = dot(&df[i], &df[j]);
            }
            a[i][m] = dot(&df[i], &f);
        }
        let trace: f64 = (0..m).map(|i| a[i][i]).sum();
        for (i, row) in a.iter_mut().enumerate() {
            row[i] += 1e-12 * trace.max(f64::MIN_POSITIVE);
        }
        let Some(gamma) = solve_dense(a) else {
            self.du.clear();
            self.dg.clear();
            return picard();
        };
        (0..u.len())
            .map(|k| {
                let mut uu = u[k];
                let mut gg = g[k];
                for j in 0..m {
                    uu -= gamma[j] * self.du[j][k];
                    gg -= gamma[j] * self.dg[j][k];
                }
                (1.0 - theta) * uu + theta * gg
            })
            .collect()
    }
}

/// Gaussian elimination with partial pivoting on an augmented `m x (m+1)` system.
fn solve_dense(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let m = a.len();
    for col in 0..m {
        let piv = (col..m).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if !(a[piv][col].abs() > 0.0) {
            return None;
        }
        a.swap(col, piv);
        for row in col + 1..m {
            let factor = a[row][col] / a[col][col];
            for k in col..=m {
                a[row][k] -= factor * a[col][k];
            }
        }
    }
    let mut x = vec![0.0; m];
    for row in (0..m).rev() {
        let s: f64 = (row + 1..m).map(|k| a[row][k] * x[k]).sum();
        x[row] = (a[row][m] - s) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Damped Picard (optionally Anderson-mixed) iteration from `init`, clamping
/// iterates to the box. Non-convergence is reported in the result, not as an error.
pub fn solve_fixed_point(problem: &Problem, init: SystemState, opts: &SolverOptions) -> Result<SolveResult> {
    solve_labelled(problem, init, opts, "custom".into())
}

fn solve_labelled(problem: &Problem, init: SystemState, opts: &SolverOptions, start: String) -> Result<SolveResult> {
    opts.validate()?;
    check_state(problem, &init)?;
    let rho = problem.rho();
    let n = problem.n();
    for (i, c) in init.components().iter().enumerate() {
        if c.values().iter().any(|&v| !(v >= -1e-12 && v <= rho[i] + 1e-12)) {
            return Err(Error::Usage(format!("initial state leaves the box in component {}", i + 1)));
        }
    }
    let mut u = init;
    let mut anderson = match opts.acceleration {
        Acceleration::Anderson(m) => Some(Anderson::new(m)),
        Acceleration::None => None,
    };
    let mut history = Vec::new();
    let mut clamp_history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    loop {
        let g = apply_map(problem, &u)?;
        if let Some(component) = first_non_finite(&g) {
            return Err(Error::NonFinite {
                component: component + 1,
                iteration: iterations,
            });
        }
        let res = u.distance(&g);
        history.push(res);
        if res <= opts.tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        let mut next = match anderson.as_mut() {
            Some(a) => a.step(&flatten(&u), &flatten(&g), opts.damping),
            None => {
                let (uf, gf) = (flatten(&u), flatten(&g));
                uf.iter().zip(&gf).map(|(a, b)| (1.0 - opts.damping) * a + opts.damping * b).collect()
            }
        };
        let len = next.len() / n;
        let mut clamps = 0;
        for (k, v) in next.iter_mut().enumerate() {
            let hi = rho[k / len];
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    component: k / len + 1,
                    iteration: iterations,
                });
            }
            if *v < 0.0 || *v > hi {
                *v = v.clamp(0.0, hi);
                clamps += 1;
            }
        }
        clamp_history.push(clamps);
        u = unflatten(next, n);
        iterations += 1;
    }
    let residual = residual(problem, &u)?;
    let converged = converged && residual <= opts.tol;
    let norm = u.norm();
    let min_rho = rho.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(SolveResult {
        start,
        component_norms: u.component_norms(),
        norm,
        nonzero: norm > NONZERO_FACTOR * min_rho,
        state: u,
        residual,
        iterations,
        converged,
        history,
        clamp_events: clamp_history.iter().sum(),
        clamp_history,
    })
}

/// Expands the start presets of `opts` into labelled initial states.
pub fn start_states(problem: &Problem, opts: &SolverOptions) -> Vec<(String, SystemState)> {
    let grid = problem.grid();
    let rho = problem.rho();
    let mut out = Vec::new();
    for s in &opts.starts {
        match *s {
            StartPreset::Zero => out.push(("zero".into(), SystemState::constant(grid, &vec![0.0; rho.len()]))),
            StartPreset::Mid => out.push((
                "mid".into(),
                SystemState::constant(grid, &rho.iter().map(|r| 0.5 * r).collect::<Vec<_>>()),
            )),
            StartPreset::Top => out.push(("top".into(), SystemState::constant(grid, &rho))),
            StartPreset::Random(k) => out.extend(
                random_states(grid, &rho, k, opts.seed)
                    .into_iter()
                    .enumerate()
                    .map(|(j, st)| (format!("random:{}", j + 1), st)),
            ),
        }
    }
    out
}

/// Runs every start (in parallel), merges converged results within
/// [`DEDUP_TOL`], and orders converged before non-converged, nonzero before
/// zero, then by residual.
pub fn multi_start_solve(problem: &Problem, opts: &SolverOptions) -> Result<Vec<SolveResult>> {
    opts.validate()?;
    let mut results = start_states(problem, opts)
        .into_par_iter()
        .map(|(label, init)| solve_labelled(problem, init, opts, label))
        .collect::<Result<Vec<_>>>()?;
    results.sort_by(|a, b| {
        (!a.converged, !a.nonzero)
            .cmp(&(!b.converged, !b.nonzero))
            .then(a.residual.total_cmp(&b.residual))
    });
    let mut kept: Vec<SolveResult> = Vec::with_capacity(results.len());
    for r in results {
        let duplicate = r.converged
            && kept
                .iter()
                .any(|k| k.converged && k.state.distance(&r.state) <= DEDUP_TOL);
        if !duplicate {
            kept.push(r);
        }
    }
    Ok(kept)
}
