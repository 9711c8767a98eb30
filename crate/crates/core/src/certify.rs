//! Numerical checks of the existence and non-existence hypotheses.
//!
//! Bounds obtained from declared-monotone corner evaluations are flagged exact;
//! everything else is a sampled estimate of a supremum or infimum and is
//! flagged as such.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elliptic::{principal_eigenpair, DiscreteOperator, Eigenpair};
use crate::error::{Error, Result};
use crate::expr::{Expr, PointEnv};
use crate::grid::{Grid, SystemState};
use crate::problem::{
    box_states, eval_functional_expr, functional_range, lattice, lattice_per_dim, nested_points, FunctionalRange,
    Monotone, Problem,
};

/// Cap on the number of u-lattice points per sampled bound.
pub const U_LATTICE_CAP: usize = 100_000;
/// Tolerance below which sampled minima of `f` and `h` still count as nonnegative.
pub const NONNEGATIVE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    /// Lattice points per u-dimension (and w points) in sampled bounds.
    pub samples: usize,
    pub seed: u64,
    /// Candidates `rho_0 = min rho * 2^-k`, `k = 1..=rho0_levels`.
    pub rho0_levels: u32,
    /// Lower cutoff `eps * rho_0` for `u_{i0}` in the ratio `f / u_{i0}`.
    pub eps: f64,
    pub eigen_tol: f64,
    pub eigen_max_iter: usize,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            samples: 9,
            seed: 0,
            rho0_levels: 40,
            eps: 1e-3,
            eigen_tol: 1e-10,
            eigen_max_iter: 20_000,
        }
    }
}

impl CertifyOptions {
    pub fn validate(&self) -> Result<()> {
        if self.samples < 2 {
            return Err(Error::Config(format!("samples must be at least 2, got {}", self.samples)));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::Config(format!("eps must lie in (0, 1), got {}", self.eps)));
        }
        if !(self.eigen_tol > 0.0) {
            return Err(Error::Config(format!("eigen_tol must be positive, got {}", self.eigen_tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
    #[serde(rename = "NOT-CERTIFIED")]
    NotCertified,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::NotCertified => "NOT-CERTIFIED",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rigor {
    /// Corner evaluations under declared monotonicity.
    Exact,
    /// Sampled estimate of a supremum or infimum.
    Sampled,
    UserSupplied,
}

fn rigor(exact: bool) -> Rigor {
    if exact {
        Rigor::Exact
    } else {
        Rigor::Sampled
    }
}

/// A sampled or exact bound together with its provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub value: f64,
    pub rigor: Rigor,
}

// ---------------------------------------------------------------------------
// Pointwise sampling of f
// ---------------------------------------------------------------------------

/// Evaluation points `(x, u, w)` for a pointwise expression.
struct PointSamples<'a> {
    grid: &'a Grid,
    nodes: Vec<usize>,
    us: Vec<Vec<f64>>,
    ws: Vec<Option<f64>>,
}

impl<'a> PointSamples<'a> {
    fn new(grid: &'a Grid, expr: &Expr, us: Vec<Vec<f64>>, ws: Vec<Option<f64>>) -> Self {
        let nodes = if expr.depends_on_x() {
            (0..grid.len()).collect()
        } else {
            vec![0]
        };
        let ws = if expr.depends_on_w() { ws } else { vec![ws.first().copied().flatten()] };
        Self { grid, nodes, us, ws }
    }

    /// Folds `g(f(x, u, w), u)` over all samples where `g` returns a value.
    fn fold(
        &self,
        expr: &Expr,
        init: f64,
        op: fn(f64, f64) -> f64,
        g: impl Fn(f64, &[f64]) -> Option<f64> + Sync,
    ) -> Result<f64> {
        self.us
            .par_iter()
            .map(|u| {
                let mut acc = init;
                for &node in &self.nodes {
                    for &w in &self.ws {
                        let v = expr.eval(&PointEnv {
                            x: self.grid.node(node),
                            u,
                            w,
                        })?;
                        if let Some(r) = g(v, u) {
                            acc = op(acc, r);
                        }
                    }
                }
                Ok(acc)
            })
            .try_reduce(|| init, |a, b| Ok(op(a, b)))
    }
}

fn w_points(range: Option<FunctionalRange>, samples: usize) -> Vec<Option<f64>> {
    match range {
        Some(r) => nested_points(r.lo, r.hi, samples).into_iter().map(Some).collect(),
        None => vec![None],
    }
}

fn u_lattice(lo: &[f64], hi: &[f64], samples: usize) -> Vec<Vec<f64>> {
    lattice(lo, hi, lattice_per_dim(samples, lo.len(), U_LATTICE_CAP))
}

/// Range of the w-functional of component `i` over the box `rho`.
pub fn w_interval(problem: &Problem, i: usize, rho: &[f64], opts: &CertifyOptions) -> Result<Option<FunctionalRange>> {
    problem
        .component(i)
        .w
        .as_ref()
        .map(|w| functional_range(w, rho, problem.grid(), opts.samples, opts.seed))
        .transpose()
}

/// Minimum and maximum of `f_i` over grid nodes, the box `rho` and the w-interval.
/// Declared-monotone nonlinearities are evaluated at the two corners only.
pub fn f_extremes(
    problem: &Problem,
    i: usize,
    rho: &[f64],
    w: Option<FunctionalRange>,
    samples: usize,
) -> Result<(Bound, Bound)> {
    let f = &problem.component(i).f;
    let grid = problem.grid();
    let zero = vec![0.0; rho.len()];
    let w_exact = w.map_or(true, |r| r.exact);
    let (us, ws, shortcut) = match f.monotone {
        Monotone::Increasing => (vec![rho.to_vec()], vec![w.map(|r| r.hi)], true),
        Monotone::Decreasing => (vec![zero.clone()], vec![w.map(|r| r.lo)], true),
        Monotone::None => (u_lattice(&zero, rho, samples), w_points(w, samples), false),
    };
    let sampler = PointSamples::new(grid, &f.expr, us, ws);
    let max = sampler.fold(&f.expr, f64::NEG_INFINITY, f64::max, |v, _| Some(v))?;
    let min = if shortcut {
        let low = match f.monotone {
            Monotone::Increasing => (zero, w.map(|r| r.lo)),
            _ => (rho.to_vec(), w.map(|r| r.hi)),
        };
        PointSamples::new(grid, &f.expr, vec![low.0], vec![low.1]).fold(&f.expr, f64::INFINITY, f64::min, |v, _| Some(v))?
    } else {
        sampler.fold(&f.expr, f64::INFINITY, f64::min, |v, _| Some(v))?
    };
    let r = rigor(shortcut && w_exact);
    Ok((Bound { value: min, rigor: r }, Bound { value: max, rigor: r }))
}

/// `M_i`: maximum of `f_i` over nodes, the box and the w-interval.
pub fn estimate_m(problem: &Problem, i: usize, rho: &[f64], w: Option<FunctionalRange>, samples: usize) -> Result<Bound> {
    Ok(f_extremes(problem, i, rho, w, samples)?.1)
}

/// Condition (c) data for one index `i0` (1-based in reports).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionC {
    pub i0: usize,
    pub rho0: f64,
    pub delta: f64,
    pub w_interval: Option<FunctionalRange>,
    pub lambda: f64,
    pub mu: f64,
    /// `lambda_{i0} - mu_{i0} / delta`.
    pub eigen_margin: f64,
}

/// Scans `rho0_grid` in order and returns the first `rho_0` for which the
/// sampled `delta = min f_{i0} / u_{i0}` over `[0, rho_0]^n` (with
/// `u_{i0} >= eps rho_0`) satisfies `mu_{i0} / delta <= lambda_{i0}`.
pub fn check_condition_c(
    problem: &Problem,
    i0: usize,
    mu: f64,
    rho0_grid: &[f64],
    opts: &CertifyOptions,
) -> Result<Option<ConditionC>> {
    let n = problem.n();
    let c = problem.component(i0);
    for &rho0 in rho0_grid {
        let box0 = vec![rho0; n];
        let w = w_interval(problem, i0, &box0, opts)?;
        let mut lo = vec![0.0; n];
        lo[i0] = opts.eps * rho0;
        let sampler = PointSamples::new(
            problem.grid(),
            &c.f.expr,
            u_lattice(&lo, &box0, opts.samples),
            w_points(w, opts.samples),
        );
        let delta = sampler.fold(&c.f.expr, f64::INFINITY, f64::min, |v, u| Some(v / u[i0]))?;
        if delta > 0.0 && delta.is_finite() && mu / delta <= c.lambda {
            return Ok(Some(ConditionC {
                i0: i0 + 1,
                rho0,
                delta,
                w_interval: w,
                lambda: c.lambda,
                mu,
                eigen_margin: c.lambda - mu / delta,
            }));
        }
    }
    Ok(None)
}

/// `{min rho * 2^-k : k = 1..=levels}`.
pub fn rho0_candidates(rho: &[f64], levels: u32) -> Vec<f64> {
    let min = rho.iter().copied().fold(f64::INFINITY, f64::min);
    (1..=levels).map(|k| min * 0.5f64.powi(k as i32)).collect()
}

/// Principal eigenpairs of every component, computed once per distinct operator.
pub fn component_eigenpairs(problem: &Problem, opts: &CertifyOptions) -> Result<Vec<Arc<Eigenpair>>> {
    let mut cache: Vec<(Arc<DiscreteOperator>, Arc<Eigenpair>)> = Vec::new();
    let mut out = Vec::with_capacity(problem.n());
    for i in 0..problem.n() {
        let op = &problem.discrete(i).operator;
        let pair = match cache.iter().find(|(o, _)| Arc::ptr_eq(o, op)) {
            Some((_, e)) => Arc::clone(e),
            None => {
                let e = Arc::new(principal_eigenpair(op, opts.eigen_tol, opts.eigen_max_iter).map_err(|e| e.in_component(i + 1))?);
                cache.push((Arc::clone(op), Arc::clone(&e)));
                e
            }
        };
        out.push(pair);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Existence
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExistenceComponent {
    pub lambda: f64,
    pub eta: f64,
    pub rho: f64,
    pub w_interval: Option<FunctionalRange>,
    pub f_min: Bound,
    pub m: Bound,
    pub h_min: Bound,
    pub h_bar: Bound,
    pub k_one_norm: f64,
    pub gamma_norm: f64,
    pub mu: f64,
    /// `lambda M ||K 1|| + eta h_bar ||gamma||`.
    pub check: f64,
    /// `rho - check`.
    pub margin: f64,
}

impl ExistenceComponent {
    fn check_value(&self) -> f64 {
        self.lambda * self.m.value * self.k_one_norm + self.eta * self.h_bar.value * self.gamma_norm
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExistenceCertificate {
    pub components: Vec<ExistenceComponent>,
    pub condition_c: Option<ConditionC>,
    /// 1-based indices tried for condition (c), in order.
    pub tried_i0: Vec<usize>,
    pub f_nonnegative: bool,
    pub h_nonnegative: bool,
    pub margins_ok: bool,
    pub verdict: Verdict,
    pub rigor: Rigor,
    pub notes: Vec<String>,
}

impl ExistenceCertificate {
    /// Recomputes checks and margins from the stored constants.
    pub fn recompute_margins(&mut self) {
        for c in &mut self.components {
            c.check = c.check_value();
            c.margin = c.rho - c.check;
        }
        self.margins_ok = self.components.iter().all(|c| c.margin >= 0.0);
    }

    /// Largest difference between stored and recomputed margins.
    pub fn margin_drift(&self) -> f64 {
        self.components
            .iter()
            .map(|c| (c.margin - (c.rho - c.check_value())).abs())
            .fold(0.0, f64::max)
    }
}

fn h_range(problem: &Problem, i: usize, rho: &[f64], opts: &CertifyOptions) -> Result<FunctionalRange> {
    functional_range(&problem.component(i).h, rho, problem.grid(), opts.samples, opts.seed)
}

pub fn certify_existence(problem: &Problem, opts: &CertifyOptions) -> Result<ExistenceCertificate> {
    opts.validate()?;
    let rho = problem.rho();
    let eigen = component_eigenpairs(problem, opts)?;
    let mut components = Vec::with_capacity(problem.n());
    let mut notes = Vec::new();
    for i in 0..problem.n() {
        let c = problem.component(i);
        let d = problem.discrete(i);
        let build = || -> Result<ExistenceComponent> {
            let w = w_interval(problem, i, &rho, opts)?;
            let (f_min, m) = f_extremes(problem, i, &rho, w, opts.samples)?;
            let h = h_range(problem, i, &rho, opts)?;
            let hr = rigor(h.exact);
            let mut comp = ExistenceComponent {
                lambda: c.lambda,
                eta: c.eta,
                rho: c.rho,
                w_interval: w,
                f_min,
                m,
                h_min: Bound { value: h.lo, rigor: hr },
                h_bar: Bound { value: h.hi, rigor: hr },
                k_one_norm: d.k_one.sup_norm(),
                gamma_norm: d.gamma.sup_norm(),
                mu: eigen[i].mu,
                check: 0.0,
                margin: 0.0,
            };
            comp.check = comp.check_value();
            comp.margin = comp.rho - comp.check;
            Ok(comp)
        };
        components.push(build().map_err(|e| e.in_component(i + 1))?);
    }
    let candidates = rho0_candidates(&rho, opts.rho0_levels);
    let mut condition_c = None;
    let mut tried_i0 = Vec::new();
    for i0 in 0..problem.n() {
        tried_i0.push(i0 + 1);
        if let Some(found) =
            check_condition_c(problem, i0, eigen[i0].mu, &candidates, opts).map_err(|e| e.in_component(i0 + 1))?
        {
            condition_c = Some(found);
            break;
        }
    }
    let f_nonnegative = components.iter().all(|c| c.f_min.value >= -NONNEGATIVE_TOL);
    let h_nonnegative = components.iter().all(|c| c.h_min.value >= -NONNEGATIVE_TOL);
    let margins_ok = components.iter().all(|c| c.margin >= 0.0);
    if condition_c.is_none() {
        notes.push(format!(
            "no index i0 satisfies f_i0 >= delta u_i0 with mu_i0 / delta <= lambda_i0 for rho_0 down to {:e}",
            candidates.last().copied().unwrap_or(0.0)
        ));
    }
    for (i, c) in components.iter().enumerate() {
        if c.margin < 0.0 {
            notes.push(format!(
                "component {}: lambda M ||K 1|| + eta h_bar ||gamma|| = {} exceeds rho = {}",
                i + 1,
                c.check,
                c.rho
            ));
        }
    }
    if !f_nonnegative {
        notes.push("f takes negative values on the box".into());
    }
    if !h_nonnegative {
        notes.push("h takes negative values on the box".into());
    }
    let exact = components.iter().all(|c| {
        c.m.rigor == Rigor::Exact && c.h_bar.rigor == Rigor::Exact && c.w_interval.map_or(true, |w| w.exact)
    });
    if exact {
        notes.push("w-intervals, M and h_bar are exact corner values; delta in condition (c) is sampled".into());
    }
    let verdict = if condition_c.is_some() && margins_ok && f_nonnegative && h_nonnegative {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(ExistenceCertificate {
        components,
        condition_c,
        tried_i0,
        f_nonnegative,
        h_nonnegative,
        margins_ok,
        verdict,
        rigor: Rigor::Sampled,
        notes,
    })
}

// ---------------------------------------------------------------------------
// Non-existence
// ---------------------------------------------------------------------------

/// Sampled growth constants of component `i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauTheta {
    /// Sum over the additive terms of `f_i` of the sampled sup of `term / u_i`.
    pub tau: f64,
    /// Sum over the additive terms of `h_i` of the sampled sup of `term / ||u||`.
    pub theta: f64,
    /// Sampled sup of `f_i / u_i` evaluated jointly.
    pub tau_joint: f64,
    /// Sampled sup of `h_i / ||u||` evaluated jointly.
    pub theta_joint: f64,
}

fn tau_with_w(problem: &Problem, i: usize, rho: &[f64], ws: Vec<Option<f64>>, samples: usize) -> Result<(f64, f64)> {
    let f = &problem.component(i).f.expr;
    let us = u_lattice(&vec![0.0; rho.len()], rho, samples);
    let ratio = |v: f64, u: &[f64]| (u[i] > 0.0).then(|| v / u[i]);
    let joint = PointSamples::new(problem.grid(), f, us.clone(), ws.clone()).fold(f, f64::NEG_INFINITY, f64::max, ratio)?;
    let mut sum = 0.0;
    for (sign, term) in f.additive_terms() {
        let s = PointSamples::new(problem.grid(), term, us.clone(), ws.clone());
        sum += s.fold(term, f64::NEG_INFINITY, f64::max, |v, u| ratio(sign * v, u))?;
    }
    Ok((sum, joint))
}

/// Sampled `tau_i` and `theta_i` over the box `rho`, with `w` ranging over
/// its whole interval.
pub fn estimate_tau_theta(problem: &Problem, i: usize, rho: &[f64], opts: &CertifyOptions) -> Result<TauTheta> {
    let w = w_interval(problem, i, rho, opts)?;
    let (tau, tau_joint) = tau_with_w(problem, i, rho, w_points(w, opts.samples), opts.samples)?;
    let h = &problem.component(i).h.expr;
    let grid = problem.grid();
    let states: Vec<SystemState> = box_states(grid, rho, opts.samples, opts.seed)
        .into_iter()
        .filter(|s| s.norm() > 0.0)
        .collect();
    let sup_ratio = |e: &Expr, sign: f64| -> Result<f64> {
        states
            .par_iter()
            .map(|s| Ok(sign * eval_functional_expr(e, s, grid)? / s.norm()))
            .try_reduce(|| f64::NEG_INFINITY, |a, b| Ok(a.max(b)))
    };
    let theta_joint = sup_ratio(h, 1.0)?;
    let mut theta = 0.0;
    for (sign, term) in h.additive_terms() {
        theta += sup_ratio(term, sign)?;
    }
    Ok(TauTheta {
        tau: tau.max(0.0),
        theta: theta.max(0.0),
        tau_joint,
        theta_joint,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum NonexistenceMode {
    AutoBound,
    UserConstants { tau: Vec<f64>, theta: Vec<f64> },
}

/// User-supplied constants file: `{"tau": [...], "theta": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserConstants {
    pub tau: Vec<f64>,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonexistenceComponent {
    pub lambda: f64,
    pub eta: f64,
    pub w_interval: Option<FunctionalRange>,
    pub tau: Bound,
    pub theta: Bound,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_joint: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_joint: Option<f64>,
    pub k_one_norm: f64,
    pub gamma_norm: f64,
    /// `lambda tau ||K 1|| + eta theta ||gamma||`.
    pub check: f64,
    /// `1 - check`.
    pub margin: f64,
}

impl NonexistenceComponent {
    fn check_value(&self) -> f64 {
        self.lambda * self.tau.value * self.k_one_norm + self.eta * self.theta.value * self.gamma_norm
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonexistenceCertificate {
    pub mode: NonexistenceMode,
    pub components: Vec<NonexistenceComponent>,
    pub verdict: Verdict,
    pub rigor: Rigor,
    pub notes: Vec<String>,
}

impl NonexistenceCertificate {
    pub fn recompute_margins(&mut self) {
        for c in &mut self.components {
            c.check = c.check_value();
            c.margin = 1.0 - c.check;
        }
    }

    pub fn margin_drift(&self) -> f64 {
        self.components
            .iter()
            .map(|c| (c.margin - (1.0 - c.check_value())).abs())
            .fold(0.0, f64::max)
    }
}

pub fn certify_nonexistence(problem: &Problem, mode: NonexistenceMode, opts: &CertifyOptions) -> Result<NonexistenceCertificate> {
    opts.validate()?;
    let n = problem.n();
    let rho = problem.rho();
    if let NonexistenceMode::UserConstants { tau, theta } = &mode {
        if tau.len() != n || theta.len() != n {
            return Err(Error::Config(format!(
                "expected {n} values for tau and theta, got {} and {}",
                tau.len(),
                theta.len()
            )));
        }
        if tau.iter().chain(theta).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config("tau and theta must be finite and nonnegative".into()));
        }
    }
    let mut components = Vec::with_capacity(n);
    let mut notes = Vec::new();
    for i in 0..n {
        let c = problem.component(i);
        let d = problem.discrete(i);
        let (w, tau, theta, tau_joint, theta_joint) = match &mode {
            NonexistenceMode::AutoBound => {
                let est = || -> Result<_> {
                    let w = w_interval(problem, i, &rho, opts)?;
                    Ok((w, estimate_tau_theta(problem, i, &rho, opts)?))
                };
                let (w, tt) = est().map_err(|e| e.in_component(i + 1))?;
                let b = |value| Bound {
                    value,
                    rigor: Rigor::Sampled,
                };
                (w, b(tt.tau), b(tt.theta), Some(tt.tau_joint), Some(tt.theta_joint))
            }
            NonexistenceMode::UserConstants { tau, theta } => {
                let b = |value| Bound {
                    value,
                    rigor: Rigor::UserSupplied,
                };
                (None, b(tau[i]), b(theta[i]), None, None)
            }
        };
        let mut comp = NonexistenceComponent {
            lambda: c.lambda,
            eta: c.eta,
            w_interval: w,
            tau,
            theta,
            tau_joint,
            theta_joint,
            k_one_norm: d.k_one.sup_norm(),
            gamma_norm: d.gamma.sup_norm(),
            check: 0.0,
            margin: 0.0,
        };
        comp.check = comp.check_value();
        comp.margin = 1.0 - comp.check;
        components.push(comp);
    }
    let all_pass = components.iter().all(|c| c.margin > 0.0);
    let verdict = match (&mode, all_pass) {
        (_, true) => Verdict::Pass,
        (NonexistenceMode::AutoBound, false) => Verdict::NotCertified,
        (NonexistenceMode::UserConstants { .. }, false) => Verdict::Fail,
    };
    if matches!(mode, NonexistenceMode::AutoBound) {
        notes.push(
            "tau and theta are sums over additive terms of sampled suprema; they are estimates, not proven bounds".into(),
        );
        if !all_pass {
            for (i, comp) in components.iter().enumerate() {
                if comp.margin > 0.0 {
                    notes.push(format!("component {} passes: check value {:.6} < 1", i + 1, comp.check));
                    continue;
                }
                let mut note = format!(
                    "component {} fails: check value {:.6} >= 1 with w over its whole interval",
                    i + 1,
                    comp.check
                );
                if let Some(w) = comp.w_interval {
                    let (tau_lo, _) = tau_with_w(problem, i, &rho, vec![Some(w.lo)], opts.samples)
                        .map_err(|e| e.in_component(i + 1))?;
                    let alt = comp.lambda * tau_lo * comp.k_one_norm + comp.eta * comp.theta.value * comp.gamma_norm;
                    note.push_str(&format!(
                        "; freezing w at the lower endpoint {:.6} instead of the upper endpoint {:.6} gives tau = {:.6} \
                         and check value {:.6}, which does not bound f over the whole w-interval",
                        w.lo, w.hi, tau_lo, alt
                    ));
                }
                notes.push(note);
            }
        }
    }
    Ok(NonexistenceCertificate {
        rigor: match mode {
            NonexistenceMode::AutoBound => Rigor::Sampled,
            NonexistenceMode::UserConstants { .. } => Rigor::UserSupplied,
        },
        mode,
        components,
        verdict,
        notes,
    })
}
