//! Domains, structured grids, nodal fields and the quadrature / interpolation
//! primitives that the nonlocal functionals are built on.
//!
//! Two domain shapes are supported. A disk is discretised on a polar grid with
//! rings `r_j = j * dr` and angles `theta_k = k * dtheta` plus one node at the
//! origin; a rectangle uses a uniform tensor grid. Node ordering is fixed:
//!
//! * polar: origin is node 0, node `1 + (j - 1) * n_theta + k` sits on ring `j`
//!   at angle `k`;
//! * Cartesian: node `i + j * (nx + 1)`.
//!
//! Quadrature weights are cell measures. On the disk the cells are the annular
//! sectors centred on each node (a small disk of radius `dr / 2` for the
//! origin, a half-width sector on the outer ring); on the rectangle they are the
//! trapezoidal weights `hx * hy` halved on edges.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used to snap interpolation coordinates onto grid lines.
const SNAP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Domain {
    /// Disk centred at the origin.
    Disk { radius: f64 },
    Rectangle { x: [f64; 2], y: [f64; 2] },
}

impl Domain {
    pub fn unit_disk() -> Self {
        Domain::Disk { radius: 1.0 }
    }

    pub fn unit_square() -> Self {
        Domain::Rectangle {
            x: [0.0, 1.0],
            y: [0.0, 1.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Domain::Disk { radius } if !(radius > 0.0 && radius.is_finite()) => {
                Err(Error::Config(format!("disk radius must be positive, got {radius}")))
            }
            Domain::Rectangle { x, y } if !(x[1] > x[0] && y[1] > y[0]) => Err(Error::Config(
                format!("rectangle intervals must be non-degenerate, got x={x:?} y={y:?}"),
            )),
            _ => Ok(()),
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            Domain::Disk { radius } => std::f64::consts::PI * radius * radius,
            Domain::Rectangle { x, y } => (x[1] - x[0]) * (y[1] - y[0]),
        }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        match *self {
            Domain::Disk { radius } => p[0].hypot(p[1]) <= radius * (1.0 + SNAP),
            Domain::Rectangle { x, y } => {
                let tx = SNAP * (x[1] - x[0]);
                let ty = SNAP * (y[1] - y[0]);
                p[0] >= x[0] - tx && p[0] <= x[1] + tx && p[1] >= y[0] - ty && p[1] <= y[1] + ty
            }
        }
    }

    pub fn default_resolution(&self) -> Resolution {
        match self {
            Domain::Disk { .. } => Resolution::new(64, 128),
            Domain::Rectangle { .. } => Resolution::new(128, 128),
        }
    }
}

/// Grid resolution. For a disk `n` is the number of rings and `m` the number of
/// angles; for a rectangle they are the number of cells along x and y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub n: usize,
    pub m: usize,
}

impl Resolution {
    pub fn new(n: usize, m: usize) -> Self {
        Self { n, m }
    }

    /// Single-number resolution: `n` rings and `2n` angles on a disk, `n x n`
    /// cells on a rectangle.
    pub fn uniform(domain: &Domain, n: usize) -> Self {
        match domain {
            Domain::Disk { .. } => Self::new(n, 2 * n),
            Domain::Rectangle { .. } => Self::new(n, n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridLayout {
    Polar {
        n_r: usize,
        n_theta: usize,
        dr: f64,
        dtheta: f64,
    },
    Cartesian {
        nx: usize,
        ny: usize,
        hx: f64,
        hy: f64,
        x0: f64,
        y0: f64,
    },
}

#[derive(Debug, Clone)]
pub struct Grid {
    domain: Domain,
    layout: GridLayout,
    nodes: Vec<[f64; 2]>,
    interior_mask: Vec<bool>,
    boundary_mask: Vec<bool>,
    boundary_nodes: Vec<usize>,
    boundary_normals: Vec<[f64; 2]>,
    quad_weights: Vec<f64>,
    spacing: f64,
}

/// Builds the grid for `domain`; both resolution numbers must be at least 3.
pub fn build_grid(domain: &Domain, resolution: Resolution) -> Result<Grid> {
    domain.validate()?;
    if resolution.n < 3 || resolution.m < 3 {
        return Err(Error::Config(format!(
            "grid resolution must be at least 3, got {}x{}",
            resolution.n, resolution.m
        )));
    }
    Ok(match *domain {
        Domain::Disk { radius } => polar_grid(domain.clone(), radius, resolution.n, resolution.m),
        Domain::Rectangle { x, y } => {
            cartesian_grid(domain.clone(), x, y, resolution.n, resolution.m)
        }
    })
}

fn polar_grid(domain: Domain, radius: f64, n_r: usize, n_theta: usize) -> Grid {
    use std::f64::consts::PI;
    let dr = radius / n_r as f64;
    let dtheta = 2.0 * PI / n_theta as f64;
    let count = 1 + n_r * n_theta;
    let mut nodes = Vec::with_capacity(count);
    let mut weights = Vec::with_capacity(count);
    let mut interior = vec![true; count];
    let mut boundary_nodes = Vec::with_capacity(n_theta);
    let mut normals = Vec::with_capacity(n_theta);

    nodes.push([0.0, 0.0]);
    weights.push(PI * 0.25 * dr * dr);
    for j in 1..=n_r {
        let r = if j == n_r { radius } else { j as f64 * dr };
        // Annular sector [r - dr/2, r + dr/2], truncated at the boundary.
        let w = if j == n_r {
            0.5 * dtheta * (radius * radius - (radius - 0.5 * dr).powi(2))
        } else {
            r * dr * dtheta
        };
        for k in 0..n_theta {
            let (s, c) = (k as f64 * dtheta).sin_cos();
            let idx = nodes.len();
            nodes.push([r * c, r * s]);
            weights.push(w);
            if j == n_r {
                interior[idx] = false;
                boundary_nodes.push(idx);
                normals.push([c, s]);
            }
        }
    }
    let boundary_mask = interior.iter().map(|b| !b).collect();
    Grid {
        domain,
        layout: GridLayout::Polar {
            n_r,
            n_theta,
            dr,
            dtheta,
        },
        nodes,
        interior_mask: interior,
        boundary_mask,
        boundary_nodes,
        boundary_normals: normals,
        quad_weights: weights,
        spacing: dr.max(radius * dtheta),
    }
}

fn cartesian_grid(domain: Domain, xr: [f64; 2], yr: [f64; 2], nx: usize, ny: usize) -> Grid {
    let hx = (xr[1] - xr[0]) / nx as f64;
    let hy = (yr[1] - yr[0]) / ny as f64;
    let count = (nx + 1) * (ny + 1);
    let mut nodes = Vec::with_capacity(count);
    let mut weights = Vec::with_capacity(count);
    let mut interior = Vec::with_capacity(count);
    let mut boundary_nodes = Vec::new();
    let mut normals = Vec::new();
    let coord = |lo: f64, hi: f64, h: f64, i: usize, n: usize| {
        if i == n {
            hi
        } else {
            lo + i as f64 * h
        }
    };
    for j in 0..=ny {
        for i in 0..=nx {
            let idx = nodes.len();
            nodes.push([coord(xr[0], xr[1], hx, i, nx), coord(yr[0], yr[1], hy, j, ny)]);
            let edge_x = i == 0 || i == nx;
            let edge_y = j == 0 || j == ny;
            let mut w = hx * hy;
            if edge_x {
                w *= 0.5;
            }
            if edge_y {
                w *= 0.5;
            }
            weights.push(w);
            let on_boundary = edge_x || edge_y;
            interior.push(!on_boundary);
            if on_boundary {
                let nxv: f64 = if i == 0 {
                    -1.0
                } else if i == nx {
                    1.0
                } else {
                    0.0
                };
                let nyv: f64 = if j == 0 {
                    -1.0
                } else if j == ny {
                    1.0
                } else {
                    0.0
                };
                let len = (nxv * nxv + nyv * nyv).sqrt();
                boundary_nodes.push(idx);
                normals.push([nxv / len, nyv / len]);
            }
        }
    }
    let boundary_mask = interior.iter().map(|b| !b).collect();
    Grid {
        domain,
        layout: GridLayout::Cartesian {
            nx,
            ny,
            hx,
            hy,
            x0: xr[0],
            y0: yr[0],
        },
        nodes,
        interior_mask: interior,
        boundary_mask,
        boundary_nodes,
        boundary_normals: normals,
        quad_weights: weights,
        spacing: hx.max(hy),
    }
}

impl Grid {
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn layout(&self) -> &GridLayout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> [f64; 2] {
        self.nodes[i]
    }

    pub fn interior_mask(&self) -> &[bool] {
        &self.interior_mask
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary_mask
    }

    pub fn is_interior(&self, i: usize) -> bool {
        self.interior_mask[i]
    }

    /// Indices of boundary nodes, in node order.
    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    /// Outward unit normals, parallel to [`Grid::boundary_nodes`]. Rectangle
    /// corners carry the normalised diagonal.
    pub fn boundary_normals(&self) -> &[[f64; 2]] {
        &self.boundary_normals
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }

    /// Characteristic mesh size.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn resolution(&self) -> Resolution {
        match self.layout {
            GridLayout::Polar { n_r, n_theta, .. } => Resolution::new(n_r, n_theta),
            GridLayout::Cartesian { nx, ny, .. } => Resolution::new(nx, ny),
        }
    }

    /// Samples a function of position at every node.
    pub fn field_from<F: Fn([f64; 2]) -> f64>(&self, f: F) -> ScalarField {
        ScalarField::new(self.nodes.iter().map(|&p| f(p)).collect())
    }

    pub fn constant(&self, c: f64) -> ScalarField {
        ScalarField::new(vec![c; self.len()])
    }

    pub(crate) fn check_field(&self, field: &ScalarField) -> Result<()> {
        if field.len() != self.len() {
            return Err(Error::Usage(format!(
                "field has {} values but the grid has {} nodes",
                field.len(),
                self.len()
            )));
        }
        Ok(())
    }
}

/// Nodal values of a scalar function on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScalarField {
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(len: usize) -> Self {
        Self::new(vec![0.0; len])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.values.iter().map(|v| v * s).collect())
    }

    /// Maximum absolute nodal value.
    pub fn sup_norm(&self) -> f64 {
        sup_norm(self)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Sup norm of `self - other`.
    pub fn distance(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<usize> for ScalarField {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

/// The state `u = (u_1, ..., u_n)` of a system on one shared grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    components: Vec<ScalarField>,
}

impl SystemState {
    pub fn new(components: Vec<ScalarField>) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(Error::Usage("a system state needs at least one component".into()));
        };
        if components.iter().any(|c| c.len() != first.len()) {
            return Err(Error::Usage("state components live on different grids".into()));
        }
        Ok(Self { components })
    }

    /// State with `u_i` equal to the constant `values[i]` everywhere.
    pub fn constant(grid: &Grid, values: &[f64]) -> Self {
        Self {
            components: values.iter().map(|&c| grid.constant(c)).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn components_mut(&mut self) -> &mut [ScalarField] {
        &mut self.components
    }

    pub fn component(&self, i: usize) -> &ScalarField {
        &self.components[i]
    }

    pub fn node_count(&self) -> usize {
        self.components[0].len()
    }

    /// Values `(u_1(x), ..., u_n(x))` at node `node`, written into `out`.
    pub fn gather(&self, node: usize, out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c[node];
        }
    }

    /// Product sup norm `max_i ||u_i||_inf`.
    pub fn norm(&self) -> f64 {
        self.components.iter().map(sup_norm).fold(0.0, f64::max)
    }

    pub fn component_norms(&self) -> Vec<f64> {
        self.components.iter().map(sup_norm).collect()
    }

    pub fn distance(&self, other: &SystemState) -> f64 {
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.distance(b))
            .fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.components.iter().map(ScalarField::min).fold(f64::INFINITY, f64::min)
    }

    pub fn into_components(self) -> Vec<ScalarField> {
        self.components
    }
}

/// Quadrature of a nodal field over the domain: `sum_k w_k * v_k`.
pub fn quadrature_integral(grid: &Grid, field: &ScalarField) -> Result<f64> {
    grid.check_field(field)?;
    Ok(grid
        .quad_weights
        .iter()
        .zip(field.values())
        .map(|(w, v)| w * v)
        .sum())
}

pub fn sup_norm(field: &ScalarField) -> f64 {
    field.values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn snap_fraction(t: f64) -> f64 {
    if t.abs() < SNAP {
        0.0
    } else if (1.0 - t).abs() < SNAP {
        1.0
    } else {
        t
    }
}

/// Cell-local bilinear interpolation of `field` at `point` (radial-angular
/// bilinear on polar grids). Exact at nodes.
pub fn eval_at_point(grid: &Grid, field: &ScalarField, point: [f64; 2]) -> Result<f64> {
    grid.check_field(field)?;
    if !grid.domain.contains(point) {
        return Err(Error::OutsideDomain(point[0], point[1]));
    }
    let v = field.values();
    match grid.layout {
        GridLayout::Polar {
            n_r,
            n_theta,
            dr,
            dtheta,
        } => {
            let r = point[0].hypot(point[1]);
            let rs = r / dr;
            let j = (rs.floor() as usize).min(n_r - 1);
            let t = snap_fraction((rs - j as f64).clamp(0.0, 1.0));
            let mut theta = point[1].atan2(point[0]);
            if theta < 0.0 {
                theta += 2.0 * std::f64::consts::PI;
            }
            let ts = theta / dtheta;
            let k0 = (ts.floor() as usize) % n_theta;
            let s = snap_fraction((ts - ts.floor()).clamp(0.0, 1.0));
            let ring = |jj: usize| -> f64 {
                if jj == 0 {
                    return v[0];
                }
                let base = 1 + (jj - 1) * n_theta;
                let a = v[base + k0];
                if s == 0.0 {
                    return a;
                }
                let b = v[base + (k0 + 1) % n_theta];
                if s == 1.0 {
                    return b;
                }
                (1.0 - s) * a + s * b
            };
            Ok(if t == 0.0 {
                ring(j)
            } else if t == 1.0 {
                ring(j + 1)
            } else {
                (1.0 - t) * ring(j) + t * ring(j + 1)
            })
        }
        GridLayout::Cartesian {
            nx,
            ny,
            hx,
            hy,
            x0,
            y0,
        } => {
            let xs = ((point[0] - x0) / hx).clamp(0.0, nx as f64);
            let ys = ((point[1] - y0) / hy).clamp(0.0, ny as f64);
            let i = (xs.floor() as usize).min(nx - 1);
            let j = (ys.floor() as usize).min(ny - 1);
            let tx = snap_fraction(xs - i as f64);
            let ty = snap_fraction(ys - j as f64);
            let at = |ii: usize, jj: usize| v[ii + jj * (nx + 1)];
            let lerp_x = |jj: usize| -> f64 {
                if tx == 0.0 {
                    at(i, jj)
                } else if tx == 1.0 {
                    at(i + 1, jj)
                } else {
                    (1.0 - tx) * at(i, jj) + tx * at(i + 1, jj)
                }
            };
            Ok(if ty == 0.0 {
                lerp_x(j)
            } else if ty == 1.0 {
                lerp_x(j + 1)
            } else {
                (1.0 - ty) * lerp_x(j) + ty * lerp_x(j + 1)
            })
        }
    }
}
