//! Second-order elliptic operators with Dirichlet, Neumann or Robin boundary
//! operators: validation, finite-difference assembly, the solution operator
//! `K: g -> u` (L u = g, B u = 0), the boundary lift `gamma` (L gamma = 0,
//! B gamma = zeta) and the principal eigenpair of `K`.
//!
//! The operator is `L u = -sum a_jl d_jl u + sum b_j d_j u + a0 u` and the
//! boundary operator `B u = b u + delta du/dnu` with `nu` the outward unit
//! normal. Every stencil is chosen so that the assembled matrix is an
//! M-matrix, which gives `K` the discrete maximum principle: `g >= 0` implies
//! `K g >= 0`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ValidationError};
use crate::expr::{parse_with, Env, Expr, ParseContext, PointEnv};
use crate::grid::{Grid, GridLayout, ScalarField};
use crate::linalg::{bicgstab, BandLu, CsrBuilder, CsrMatrix};

/// Band storage above which the iterative solver is used instead of LU.
const MAX_BAND_STORAGE: usize = 60_000_000;
const MAX_DIRECT_UNKNOWNS: usize = 200_000;
const LINEAR_TOL: f64 = 1e-12;

/// Coefficient expressions of `L` in the variables `x1`, `x2`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpec {
    pub a11: Expr,
    pub a12: Expr,
    pub a22: Expr,
    pub b1: Expr,
    pub b2: Expr,
    pub a0: Expr,
}

impl OperatorSpec {
    /// `-Laplacian`.
    pub fn laplacian() -> Self {
        Self::shifted_laplacian(0.0)
    }

    /// `-Laplacian + c`.
    pub fn shifted_laplacian(c: f64) -> Self {
        Self {
            a11: Expr::num(1.0),
            a12: Expr::num(0.0),
            a22: Expr::num(1.0),
            b1: Expr::num(0.0),
            b2: Expr::num(0.0),
            a0: Expr::num(c),
        }
    }

    /// Parses the six coefficient strings (position-only expressions).
    pub fn parse(a11: &str, a12: &str, a22: &str, b1: &str, b2: &str, a0: &str) -> Result<Self> {
        let p = |s: &str| {
            parse_with(s, ParseContext::coefficient()).map_err(|error| Error::Parse {
                source_text: s.to_string(),
                error,
            })
        };
        Ok(Self {
            a11: p(a11)?,
            a12: p(a12)?,
            a22: p(a22)?,
            b1: p(b1)?,
            b2: p(b2)?,
            a0: p(a0)?,
        })
    }

    fn coefficients_at(&self, x: [f64; 2]) -> Result<Coefficients> {
        let env = PointEnv { x, u: &[], w: None };
        let ev = |e: &Expr| e.eval(&env as &dyn Env).map_err(Error::from);
        Ok(Coefficients {
            a11: ev(&self.a11)?,
            a12: ev(&self.a12)?,
            a22: ev(&self.a22)?,
            b1: ev(&self.b1)?,
            b2: ev(&self.b2)?,
            a0: ev(&self.a0)?,
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct Coefficients {
    a11: f64,
    a12: f64,
    a22: f64,
    b1: f64,
    b2: f64,
    a0: f64,
}

impl Coefficients {
    fn min_eigenvalue(&self) -> f64 {
        let mean = 0.5 * (self.a11 + self.a22);
        let half_diff = 0.5 * (self.a11 - self.a22);
        mean - half_diff.hypot(self.a12)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
    Robin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySpec {
    pub kind: BoundaryKind,
    /// Robin coefficient `b(x)`; ignored for Dirichlet and Neumann.
    pub b: Option<Expr>,
}

impl BoundarySpec {
    pub fn dirichlet() -> Self {
        Self {
            kind: BoundaryKind::Dirichlet,
            b: None,
        }
    }

    pub fn neumann() -> Self {
        Self {
            kind: BoundaryKind::Neumann,
            b: None,
        }
    }

    pub fn robin(b: Expr) -> Self {
        Self {
            kind: BoundaryKind::Robin,
            b: Some(b),
        }
    }

    /// 0 for Dirichlet, 1 otherwise.
    pub fn delta(&self) -> u8 {
        match self.kind {
            BoundaryKind::Dirichlet => 0,
            _ => 1,
        }
    }
}

/// Outcome of [`validate_operator`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub boundary: BoundaryKind,
    /// Smallest eigenvalue of `[a_jl(x)]` over all nodes.
    pub ellipticity_constant: f64,
    pub min_zeroth_order: f64,
    pub zeroth_order_identically_zero: bool,
    /// Nodes where first-order upwinding replaces central differences.
    pub upwind_nodes: Vec<usize>,
    /// Robin coefficient range over boundary nodes, when applicable.
    pub robin_range: Option<[f64; 2]>,
}

/// Sampled coefficients plus the per-node upwind decision.
struct Evaluated {
    coeffs: Vec<Coefficients>,
    robin: Vec<f64>,
    upwind_x: Vec<bool>,
    upwind_y: Vec<bool>,
    report: ValidationReport,
}

/// Checks ellipticity, `a0 >= 0` and the boundary-operator conditions on the
/// nodes of `grid`.
pub fn validate_operator(op: &OperatorSpec, bc: &BoundarySpec, grid: &Grid) -> Result<ValidationReport> {
    evaluate(op, bc, grid).map(|e| e.report)
}

fn evaluate(op: &OperatorSpec, bc: &BoundarySpec, grid: &Grid) -> Result<Evaluated> {
    let coeffs = grid
        .nodes()
        .iter()
        .map(|&x| op.coefficients_at(x))
        .collect::<Result<Vec<_>>>()?;

    let mut ellipticity = f64::INFINITY;
    let mut min_a0 = f64::INFINITY;
    let mut a0_zero = true;
    for (node, c) in coeffs.iter().enumerate() {
        let lam = c.min_eigenvalue();
        if !(lam > 0.0) {
            return Err(ValidationError::NotElliptic {
                node,
                min_eigenvalue: lam,
            }
            .into());
        }
        if c.a0 < 0.0 {
            return Err(ValidationError::NegativeZerothOrder { node, value: c.a0 }.into());
        }
        ellipticity = ellipticity.min(lam);
        min_a0 = min_a0.min(c.a0);
        a0_zero &= c.a0 == 0.0;
    }

    let mut robin = Vec::new();
    let mut robin_range = None;
    match bc.kind {
        BoundaryKind::Dirichlet => {}
        BoundaryKind::Neumann => {
            if a0_zero {
                return Err(ValidationError::NeumannWithoutAbsorption.into());
            }
            robin = vec![0.0; grid.boundary_nodes().len()];
        }
        BoundaryKind::Robin => {
            let b = bc.b.as_ref().ok_or(ValidationError::MissingRobinCoefficient)?;
            for &node in grid.boundary_nodes() {
                let v = b.eval(&PointEnv {
                    x: grid.node(node),
                    u: &[],
                    w: None,
                })?;
                if v < 0.0 {
                    return Err(ValidationError::NegativeRobinCoefficient { node, value: v }.into());
                }
                robin.push(v);
            }
            if robin.iter().all(|&v| v == 0.0) {
                return Err(ValidationError::RobinCoefficientVanishes.into());
            }
            let lo = robin.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = robin.iter().copied().fold(0.0, f64::max);
            robin_range = Some([lo, hi]);
        }
    }

    let n = grid.len();
    let mut upwind_x = vec![false; n];
    let mut upwind_y = vec![false; n];
    match *grid.layout() {
        GridLayout::Polar { .. } => {
            let c0 = coeffs[0].a11;
            for (node, c) in coeffs.iter().enumerate() {
                let tol = 1e-12 * c0.abs().max(1.0);
                if (c.a11 - c0).abs() > tol || (c.a22 - c0).abs() > tol {
                    return Err(ValidationError::UnsupportedOnDisk(format!(
                        "diffusion coefficient is not one constant (node {node})"
                    ))
                    .into());
                }
                if c.a12 != 0.0 {
                    return Err(ValidationError::UnsupportedOnDisk(format!(
                        "mixed-derivative coefficient is nonzero (node {node})"
                    ))
                    .into());
                }
                if c.b1 != 0.0 || c.b2 != 0.0 {
                    return Err(ValidationError::UnsupportedOnDisk(format!(
                        "first-order coefficients are nonzero (node {node})"
                    ))
                    .into());
                }
            }
        }
        GridLayout::Cartesian { hx, hy, .. } => {
            for node in 0..n {
                if !grid.is_interior(node) {
                    continue;
                }
                let c = &coeffs[node];
                let cross = c.a12.abs() / (hx * hy);
                let off_x = -c.a11 / (hx * hx) + cross;
                let off_y = -c.a22 / (hy * hy) + cross;
                if off_x > 0.0 || off_y > 0.0 {
                    return Err(ValidationError::MixedDerivativeTooLarge { node, a12: c.a12 }.into());
                }
                upwind_x[node] = off_x + c.b1.abs() / (2.0 * hx) > 0.0;
                upwind_y[node] = off_y + c.b2.abs() / (2.0 * hy) > 0.0;
            }
        }
    }
    let upwind_nodes = (0..n).filter(|&i| upwind_x[i] || upwind_y[i]).collect();
    Ok(Evaluated {
        coeffs,
        robin,
        upwind_x,
        upwind_y,
        report: ValidationReport {
            boundary: bc.kind,
            ellipticity_constant: ellipticity,
            min_zeroth_order: min_a0,
            zeroth_order_identically_zero: a0_zero,
            upwind_nodes,
            robin_range,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinearSolverChoice {
    /// Banded LU unless the band is too large to store.
    #[default]
    Auto,
    Direct,
    Iterative,
}

#[derive(Debug)]
enum LinearSolver {
    Direct(BandLu),
    Iterative { max_iter: usize },
}

/// Assembled and factorised `(L, B)` on a grid.
#[derive(Debug)]
pub struct DiscreteOperator {
    grid: Arc<Grid>,
    report: ValidationReport,
    unknown_of: Vec<Option<usize>>,
    node_of: Vec<usize>,
    /// Rows that carry the interior equation (as opposed to a boundary row).
    interior_row: Vec<bool>,
    matrix: CsrMatrix,
    /// `(row, dirichlet node, coefficient)` couplings moved to the right-hand side.
    coupling: Vec<(usize, usize, f64)>,
    solver: LinearSolver,
}

/// Assembles with [`LinearSolverChoice::Auto`].
pub fn assemble(op: &OperatorSpec, bc: &BoundarySpec, grid: &Arc<Grid>) -> Result<DiscreteOperator> {
    assemble_with(op, bc, grid, LinearSolverChoice::Auto)
}

pub fn assemble_with(
    op: &OperatorSpec,
    bc: &BoundarySpec,
    grid: &Arc<Grid>,
    choice: LinearSolverChoice,
) -> Result<DiscreteOperator> {
    let ev = evaluate(op, bc, grid)?;
    let n = grid.len();
    let dirichlet = bc.kind == BoundaryKind::Dirichlet;
    let mut unknown_of = vec![None; n];
    let mut node_of = Vec::new();
    for node in 0..n {
        if grid.is_interior(node) || !dirichlet {
            unknown_of[node] = Some(node_of.len());
            node_of.push(node);
        }
    }
    let mut boundary_slot = vec![usize::MAX; n];
    for (i, &b) in grid.boundary_nodes().iter().enumerate() {
        boundary_slot[b] = i;
    }

    let mut builder = CsrBuilder::new();
    let mut coupling = Vec::new();
    let mut interior_row = Vec::with_capacity(node_of.len());
    for (row, &node) in node_of.iter().enumerate() {
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(9);
        if grid.is_interior(node) {
            interior_stencil(grid, &ev, node, &mut entries);
            interior_row.push(true);
        } else {
            let slot = boundary_slot[node];
            boundary_stencil(grid, ev.robin[slot], slot, &mut entries);
            interior_row.push(false);
        }
        for (col_node, v) in entries {
            match unknown_of[col_node] {
                Some(col) => builder.push(col, v),
                None => coupling.push((row, col_node, v)),
            }
        }
        builder.finish_row();
    }
    let matrix = builder.build();

    let use_direct = match choice {
        LinearSolverChoice::Direct => true,
        LinearSolverChoice::Iterative => false,
        LinearSolverChoice::Auto => {
            matrix.n() <= MAX_DIRECT_UNKNOWNS && BandLu::storage_for(&matrix) <= MAX_BAND_STORAGE
        }
    };
    let solver = if use_direct {
        LinearSolver::Direct(BandLu::factor(&matrix)?)
    } else {
        LinearSolver::Iterative {
            max_iter: (20 * matrix.n()).max(1000),
        }
    };
    Ok(DiscreteOperator {
        grid: Arc::clone(grid),
        report: ev.report,
        unknown_of,
        node_of,
        interior_row,
        matrix,
        coupling,
        solver,
    })
}

fn interior_stencil(grid: &Grid, ev: &Evaluated, node: usize, out: &mut Vec<(usize, f64)>) {
    let c = &ev.coeffs[node];
    match *grid.layout() {
        GridLayout::Polar {
            n_theta, dr, dtheta, ..
        } => {
            // -c * Laplacian in polar coordinates, conservative radial form.
            let diff = c.a11;
            if node == 0 {
                let ring = 4.0 * diff / (dr * dr);
                out.push((0, ring + c.a0));
                let each = ring / n_theta as f64;
                out.extend((1..=n_theta).map(|k| (k, -each)));
                return;
            }
            let j = (node - 1) / n_theta + 1;
            let k = (node - 1) % n_theta;
            let r = j as f64 * dr;
            let outer = diff * (r + 0.5 * dr) / (r * dr * dr);
            let inner = diff * (r - 0.5 * dr) / (r * dr * dr);
            let ang = diff / (r * r * dtheta * dtheta);
            let at = |jj: usize, kk: usize| {
                if jj == 0 {
                    0
                } else {
                    1 + (jj - 1) * n_theta + kk
                }
            };
            out.push((node, outer + inner + 2.0 * ang + c.a0));
            out.push((at(j + 1, k), -outer));
            out.push((at(j - 1, k), -inner));
            out.push((at(j, (k + 1) % n_theta), -ang));
            out.push((at(j, (k + n_theta - 1) % n_theta), -ang));
        }
        GridLayout::Cartesian { nx, hx, hy, .. } => {
            let stride = nx + 1;
            let (e, w, nn, s) = (node + 1, node - 1, node + stride, node - stride);
            let cross = c.a12.abs() / (hx * hy);
            let mut center = 2.0 * c.a11 / (hx * hx) + 2.0 * c.a22 / (hy * hy) - 2.0 * cross + c.a0;
            let mut ce = -c.a11 / (hx * hx) + cross;
            let mut cw = ce;
            let mut cn = -c.a22 / (hy * hy) + cross;
            let mut cs = cn;
            if ev.upwind_x[node] {
                if c.b1 > 0.0 {
                    center += c.b1 / hx;
                    cw -= c.b1 / hx;
                } else {
                    center -= c.b1 / hx;
                    ce += c.b1 / hx;
                }
            } else {
                ce += c.b1 / (2.0 * hx);
                cw -= c.b1 / (2.0 * hx);
            }
            if ev.upwind_y[node] {
                if c.b2 > 0.0 {
                    center += c.b2 / hy;
                    cs -= c.b2 / hy;
                } else {
                    center -= c.b2 / hy;
                    cn += c.b2 / hy;
                }
            } else {
                cn += c.b2 / (2.0 * hy);
                cs -= c.b2 / (2.0 * hy);
            }
            out.extend([(node, center), (e, ce), (w, cw), (nn, cn), (s, cs)]);
            if c.a12 > 0.0 {
                out.push((nn + 1, -cross));
                out.push((s - 1, -cross));
            } else if c.a12 < 0.0 {
                out.push((nn - 1, -cross));
                out.push((s + 1, -cross));
            }
        }
    }
}

/// One-sided first-order normal derivative: `b u + du/dn = zeta`.
fn boundary_stencil(grid: &Grid, b: f64, slot: usize, out: &mut Vec<(usize, f64)>) {
    let node = grid.boundary_nodes()[slot];
    match *grid.layout() {
        GridLayout::Polar { n_theta, dr, .. } => {
            out.push((node, b + 1.0 / dr));
            out.push((node - n_theta, -1.0 / dr));
        }
        GridLayout::Cartesian { nx, ny, hx, hy, .. } => {
            let [nxv, nyv] = grid.boundary_normals()[slot];
            let stride = nx + 1;
            let (i, j) = (node % stride, node / stride);
            let mut diag = b;
            if nxv != 0.0 {
                let inner = if i == 0 { node + 1 } else { node - 1 };
                debug_assert!(i == 0 || i == nx);
                diag += nxv.abs() / hx;
                out.push((inner, -nxv.abs() / hx));
            }
            if nyv != 0.0 {
                let inner = if j == 0 { node + stride } else { node - stride };
                debug_assert!(j == 0 || j == ny);
                diag += nyv.abs() / hy;
                out.push((inner, -nyv.abs() / hy));
            }
            out.push((node, diag));
        }
    }
}

impl DiscreteOperator {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn report(&self) -> &ValidationReport {
        &self.report
    }

    pub fn unknowns(&self) -> usize {
        self.node_of.len()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn is_direct(&self) -> bool {
        matches!(self.solver, LinearSolver::Direct(_))
    }

    fn solve(&self, rhs: Vec<f64>) -> Result<Vec<f64>> {
        match &self.solver {
            LinearSolver::Direct(lu) => {
                let mut x = rhs;
                lu.solve_in_place(&mut x);
                Ok(x)
            }
            LinearSolver::Iterative { max_iter } => {
                let mut x = vec![0.0; rhs.len()];
                bicgstab(&self.matrix, &rhs, &mut x, LINEAR_TOL, *max_iter)?;
                Ok(x)
            }
        }
    }

    fn scatter(&self, x: &[f64], fill: impl Fn(usize) -> f64) -> ScalarField {
        let values = (0..self.grid.len())
            .map(|node| match self.unknown_of[node] {
                Some(row) => x[row],
                None => fill(node),
            })
            .collect();
        ScalarField::new(values)
    }

    /// `K g`: solves `L u = g` in the interior with `B u = 0` on the boundary.
    /// Boundary values of `g` are not used.
    pub fn apply_k(&self, g: &ScalarField) -> Result<ScalarField> {
        self.grid.check_field(g)?;
        let rhs = self
            .node_of
            .iter()
            .zip(&self.interior_row)
            .map(|(&node, &interior)| if interior { g[node] } else { 0.0 })
            .collect();
        let x = self.solve(rhs)?;
        Ok(self.scatter(&x, |_| 0.0))
    }

    /// `gamma` with `L gamma = 0` and `B gamma = zeta`; only the boundary values
    /// of `zeta` are read.
    pub fn lift_gamma(&self, zeta: &ScalarField) -> Result<ScalarField> {
        self.grid.check_field(zeta)?;
        let mut rhs: Vec<f64> = self
            .node_of
            .iter()
            .zip(&self.interior_row)
            .map(|(&node, &interior)| if interior { 0.0 } else { zeta[node] })
            .collect();
        for &(row, node, v) in &self.coupling {
            rhs[row] -= v * zeta[node];
        }
        let x = self.solve(rhs)?;
        Ok(self.scatter(&x, |node| zeta[node]))
    }

    /// `K(1)`.
    pub fn k_one(&self) -> Result<ScalarField> {
        self.apply_k(&self.grid.constant(1.0))
    }
}

/// Principal eigenpair of `K`: `K phi = r phi`, `mu = 1 / r`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Eigenpair {
    pub r: f64,
    pub mu: f64,
    pub phi: ScalarField,
    pub residual: f64,
    pub iterations: usize,
}

/// Power iteration on `K` from the constant start, sup-normalised each step.
/// The returned `phi` and `r` are exactly the pair whose residual
/// `||K phi - r phi||_inf` was checked against `tol`.
pub fn principal_eigenpair(dop: &DiscreteOperator, tol: f64, max_iter: usize) -> Result<Eigenpair> {
    if !(tol > 0.0) {
        return Err(Error::Config(format!("eigen tolerance must be positive, got {tol}")));
    }
    let grid = dop.grid();
    let mut phi = grid.field_from(|_| 1.0);
    for (node, unknown) in dop.unknown_of.iter().enumerate() {
        if unknown.is_none() {
            phi.values_mut()[node] = 0.0;
        }
    }
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let psi = dop.apply_k(&phi)?;
        let r = psi.sup_norm();
        if !(r > 0.0) {
            return Err(Error::Config("solution operator has zero spectral radius estimate".into()));
        }
        residual = psi
            .values()
            .iter()
            .zip(phi.values())
            .map(|(a, b)| (a - r * b).abs())
            .fold(0.0, f64::max);
        if residual <= tol {
            return Ok(Eigenpair {
                r,
                mu: 1.0 / r,
                phi,
                residual,
                iterations: it,
            });
        }
        phi = ScalarField::new(psi.values().iter().map(|v| (v / r).max(0.0)).collect());
    }
    Err(Error::EigenNonConvergence {
        iterations: max_iter,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Domain, Resolution};

    fn square(n: usize) -> Arc<Grid> {
        Arc::new(build_grid(&Domain::unit_square(), Resolution::new(n, n)).unwrap())
    }

    fn disk(n: usize) -> Arc<Grid> {
        Arc::new(build_grid(&Domain::unit_disk(), Resolution::new(n, 2 * n)).unwrap())
    }

    #[test]
    fn laplacian_is_valid_with_unit_ellipticity() {
        let rep = validate_operator(&OperatorSpec::laplacian(), &BoundarySpec::dirichlet(), &square(8)).unwrap();
        assert_eq!(rep.ellipticity_constant, 1.0);
        assert!(rep.upwind_nodes.is_empty());
    }

    #[test]
    fn neumann_needs_absorption() {
        let err = validate_operator(&OperatorSpec::laplacian(), &BoundarySpec::neumann(), &square(8)).unwrap_err();
        assert!(matches!(err, Error::Validation(ValidationError::NeumannWithoutAbsorption)));
    }

    #[test]
    fn indefinite_and_negative_coefficients_rejected() {
        let op = OperatorSpec::parse("-1", "0", "1", "0", "0", "0").unwrap();
        assert!(matches!(
            validate_operator(&op, &BoundarySpec::dirichlet(), &square(6)),
            Err(Error::Validation(ValidationError::NotElliptic { .. }))
        ));
        let op = OperatorSpec::parse("1", "0", "1", "0", "0", "x1-0.5").unwrap();
        assert!(matches!(
            validate_operator(&op, &BoundarySpec::dirichlet(), &square(6)),
            Err(Error::Validation(ValidationError::NegativeZerothOrder { .. }))
        ));
        let op = OperatorSpec::laplacian();
        let bad_robin = BoundarySpec::robin(Expr::num(-1.0));
        assert!(validate_operator(&op, &bad_robin, &square(6)).is_err());
        let zero_robin = BoundarySpec::robin(Expr::num(0.0));
        assert!(matches!(
            validate_operator(&op, &zero_robin, &square(6)),
            Err(Error::Validation(ValidationError::RobinCoefficientVanishes))
        ));
    }

    #[test]
    fn disk_rejects_anisotropy_and_advection() {
        let op = OperatorSpec::parse("2", "0", "1", "0", "0", "0").unwrap();
        assert!(matches!(
            validate_operator(&op, &BoundarySpec::dirichlet(), &disk(6)),
            Err(Error::Validation(ValidationError::UnsupportedOnDisk(_)))
        ));
        let op = OperatorSpec::parse("1", "0", "1", "1", "0", "0").unwrap();
        assert!(validate_operator(&op, &BoundarySpec::dirichlet(), &disk(6)).is_err());
        let op = OperatorSpec::parse("3", "0", "3", "0", "0", "x1^2").unwrap();
        assert!(validate_operator(&op, &BoundarySpec::dirichlet(), &disk(6)).is_ok());
    }

    #[test]
    fn strong_advection_is_upwinded_and_keeps_m_matrix() {
        let op = OperatorSpec::parse("1", "0", "1", "100", "-100*x2", "0").unwrap();
        let dop = assemble(&op, &BoundarySpec::dirichlet(), &square(16)).unwrap();
        assert!(!dop.report().upwind_nodes.is_empty());
        assert!(dop.matrix().is_m_matrix_pattern(1e-14));
    }

    #[test]
    fn five_point_stencil_on_square() {
        let dop = assemble(&OperatorSpec::laplacian(), &BoundarySpec::dirichlet(), &square(5)).unwrap();
        assert_eq!(dop.unknowns(), 16);
        let h2 = 1.0 / 25.0;
        // first unknown is node (1,1): neighbours (2,1) and (1,2) are unknowns
        let row: Vec<_> = dop.matrix().row(0).collect();
        assert_eq!(row.len(), 3);
        assert!((dop.matrix().diag(0) - 4.0 / h2).abs() < 1e-9);
        assert!(dop.matrix().is_m_matrix_pattern(0.0));
    }

    #[test]
    fn neumann_shifted_maps_one_to_one() {
        let op = OperatorSpec::shifted_laplacian(1.0);
        let dop = assemble(&op, &BoundarySpec::neumann(), &square(12)).unwrap();
        let u = dop.k_one().unwrap();
        for v in u.values() {
            assert!((v - 1.0).abs() < 1e-10);
        }
        let dop = assemble(&op, &BoundarySpec::neumann(), &disk(12)).unwrap();
        let u = dop.k_one().unwrap();
        assert!(u.values().iter().all(|v| (v - 1.0).abs() < 1e-10));
    }

    #[test]
    fn disk_torsion_profile() {
        let g = disk(64);
        let dop = assemble(&OperatorSpec::laplacian(), &BoundarySpec::dirichlet(), &g).unwrap();
        let u = dop.k_one().unwrap();
        let exact = g.field_from(|[x, y]| (1.0 - x * x - y * y) / 4.0);
        assert!(u.distance(&exact) <= 5e-3);
        assert!((u.sup_norm() - 0.25).abs() < 2e-3);
    }

    #[test]
    fn zero_source_gives_zero() {
        let g = square(8);
        let dop = assemble(&OperatorSpec::laplacian(), &BoundarySpec::dirichlet(), &g).unwrap();
        assert_eq!(dop.apply_k(&g.constant(0.0)).unwrap().sup_norm(), 0.0);
        assert_eq!(dop.lift_gamma(&g.constant(0.0)).unwrap().sup_norm(), 0.0);
    }

    #[test]
    fn lifts_of_harmonic_data() {
        for g in [square(16), disk(32)] {
            let dop = assemble(&OperatorSpec::laplacian(), &BoundarySpec::dirichlet(), &g).unwrap();
            let gamma = dop.lift_gamma(&g.constant(1.0)).unwrap();
            assert!(gamma.values().iter().all(|v| (v - 1.0).abs() < 1e-10));
            let zeta = g.field_from(|[x, _]| x);
            let gamma = dop.lift_gamma(&zeta).unwrap();
            assert!(gamma.distance(&zeta) <= 5e-3);
        }
    }

    #[test]
    fn robin_lift_is_nonnegative() {
        let g = square(16);
        let bc = BoundarySpec::robin(Expr::num(2.0));
        let dop = assemble(&OperatorSpec::laplacian(), &bc, &g).unwrap();
        let gamma = dop.lift_gamma(&g.field_from(|[x, y]| x * y)).unwrap();
        assert!(gamma.min() >= 0.0);
        assert!(dop.matrix().is_m_matrix_pattern(0.0));
    }

    #[test]
    fn iterative_solver_agrees_with_direct() {
        let g = square(24);
        let op = OperatorSpec::parse("1+x1^2", "0.2", "1", "x2", "0", "1").unwrap();
        let bc = BoundarySpec::dirichlet();
        let direct = assemble_with(&op, &bc, &g, LinearSolverChoice::Direct).unwrap();
        let iter = assemble_with(&op, &bc, &g, LinearSolverChoice::Iterative).unwrap();
        assert!(!iter.is_direct());
        let src = g.field_from(|[x, y]| (3.0 * x).sin() + y);
        let a = direct.apply_k(&src).unwrap();
        let b = iter.apply_k(&src).unwrap();
        assert!(a.distance(&b) < 1e-9);
    }

    #[test]
    fn eigenpair_invariants() {
        let g = square(32);
        let dop = assemble(&OperatorSpec::laplacian(), &BoundarySpec::dirichlet(), &g).unwrap();
        let ep = principal_eigenpair(&dop, 1e-10, 500).unwrap();
        assert!(ep.r > 0.0);
        assert_eq!(ep.phi.sup_norm(), 1.0);
        assert!(ep.phi.min() >= 0.0);
        let kphi = dop.apply_k(&ep.phi).unwrap();
        let res = kphi
            .values()
            .iter()
            .zip(ep.phi.values())
            .map(|(a, b)| (a - ep.r * b).abs())
            .fold(0.0, f64::max);
        assert!(res <= 1e-10);
        assert!((ep.mu * ep.r - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eigen_nonconvergence_reported() {
        let g = square(16);
        let dop = assemble(&OperatorSpec::laplacian(), &BoundarySpec::dirichlet(), &g).unwrap();
        assert!(matches!(
            principal_eigenpair(&dop, 1e-14, 2),
            Err(Error::EigenNonConvergence { .. })
        ));
        assert!(principal_eigenpair(&dop, 0.0, 10).is_err());
    }
}
