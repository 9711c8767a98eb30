//! Problem documents, the validated [`ProblemSpec`], its discretisation
//! [`Problem`], and evaluation of the nonlocal functionals `w_i[u]`, `h_i[u]`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elliptic::{assemble, validate_operator, BoundaryKind, BoundarySpec, DiscreteOperator, OperatorSpec};
use crate::error::{Error, Result, ValidationError};
use crate::expr::{parse_with, Env, EvalError, Expr, ParseContext, PointEnv, Var};
use crate::grid::{build_grid, eval_at_point, Domain, Grid, Resolution, ScalarField, SystemState};

/// Declared monotonicity with respect to the componentwise order on states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Monotone {
    #[serde(rename = "inc")]
    Increasing,
    #[serde(rename = "dec")]
    Decreasing,
    #[default]
    #[serde(rename = "none")]
    None,
}

// ---------------------------------------------------------------------------
// Documents
// ---------------------------------------------------------------------------

/// A number given either literally or as a constant expression such as `"pi/4"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Value(f64),
    Expr(String),
}

impl Number {
    fn resolve(&self, path: &str) -> Result<f64> {
        match self {
            Number::Value(v) => Ok(*v),
            Number::Expr(s) => {
                let e = parse_expr(s, ParseContext::constant(), path)?;
                e.eval(&PointEnv {
                    x: [0.0; 2],
                    u: &[],
                    w: None,
                })
                .map_err(|err| Error::from(err).at(path))
            }
        }
    }
}

impl From<f64> for Number {
    fn from(v: f64) -> Self {
        Number::Value(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ResolutionDoc {
    Uniform(usize),
    Pair([usize; 2]),
}

impl ResolutionDoc {
    pub fn to_resolution(&self, domain: &Domain) -> Resolution {
        match *self {
            ResolutionDoc::Uniform(n) => Resolution::uniform(domain, n),
            ResolutionDoc::Pair([n, m]) => Resolution::new(n, m),
        }
    }
}

fn zero_str() -> String {
    "0".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorDoc {
    pub a11: String,
    #[serde(default = "zero_str")]
    pub a12: String,
    pub a22: String,
    #[serde(default = "zero_str")]
    pub b1: String,
    #[serde(default = "zero_str")]
    pub b2: String,
    #[serde(default = "zero_str")]
    pub a0: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryDoc {
    pub kind: BoundaryKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<String>,
    #[serde(default = "zero_str")]
    pub zeta: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalDoc {
    pub expr: String,
    #[serde(default)]
    pub monotone: Monotone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentDoc {
    pub operator: OperatorDoc,
    pub boundary: BoundaryDoc,
    pub f: String,
    /// Joint monotonicity of `f` in `(u, w)`; enables the corner shortcut for `M_i`.
    #[serde(default)]
    pub f_monotone: Monotone,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<FunctionalDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<FunctionalDoc>,
    pub lambda: Number,
    pub eta: Number,
    pub rho: Number,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDocument {
    pub domain: Domain,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<ResolutionDoc>,
    pub components: Vec<ComponentDoc>,
}

// ---------------------------------------------------------------------------
// Validated specification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalSpec {
    pub expr: Expr,
    pub monotone: Monotone,
}

impl FunctionalSpec {
    pub fn parse(text: &str, monotone: Monotone, n: usize) -> Result<Self> {
        Ok(Self {
            expr: parse_expr(text, ParseContext::functional(n), "functional")?,
            monotone,
        })
    }

    pub fn constant(c: f64) -> Self {
        Self {
            expr: Expr::num(c),
            monotone: Monotone::Increasing,
        }
    }
}

/// The nonlinearity `f_i(x, u, w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Nonlinearity {
    pub expr: Expr,
    pub monotone: Monotone,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSpec {
    pub operator: OperatorSpec,
    pub boundary: BoundarySpec,
    pub zeta: Expr,
    pub f: Nonlinearity,
    pub w: Option<FunctionalSpec>,
    pub h: FunctionalSpec,
    pub lambda: f64,
    pub eta: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub domain: Domain,
    pub resolution: Option<Resolution>,
    pub components: Vec<ComponentSpec>,
}

fn parse_expr(text: &str, ctx: ParseContext, path: &str) -> Result<Expr> {
    parse_with(text, ctx).map_err(|error| {
        Error::Parse {
            source_text: text.to_string(),
            error,
        }
        .at(path)
    })
}

/// Parses and validates a JSON problem document.
pub fn load_problem(document: &str) -> Result<ProblemSpec> {
    let doc: ProblemDocument = serde_json::from_str(document).map_err(|e| Error::Schema {
        path: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    ProblemSpec::from_document(&doc)
}

impl ProblemSpec {
    pub fn from_document(doc: &ProblemDocument) -> Result<Self> {
        doc.domain.validate().map_err(|e| e.at("domain"))?;
        let n = doc.components.len();
        if n == 0 {
            return Err(Error::Schema {
                path: "components".into(),
                message: "at least one component is required".into(),
            });
        }
        let resolution = doc.resolution.as_ref().map(|r| r.to_resolution(&doc.domain));
        let components = doc
            .components
            .iter()
            .enumerate()
            .map(|(i, c)| component_from_doc(c, n, &format!("components[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        let spec = Self {
            domain: doc.domain.clone(),
            resolution,
            components,
        };
        spec.probe()?;
        Ok(spec)
    }

    pub fn n(&self) -> usize {
        self.components.len()
    }

    /// Upper corner of the box `I = prod [0, rho_i]`.
    pub fn rho(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.rho).collect()
    }

    /// Checks the structural conditions on a coarse grid.
    fn probe(&self) -> Result<()> {
        let grid = build_grid(&self.domain, Resolution::uniform(&self.domain, 8))?;
        let rho = self.rho();
        let mut states = vec![
            SystemState::constant(&grid, &vec![0.0; self.n()]),
            SystemState::constant(&grid, &rho),
            SystemState::constant(&grid, &rho.iter().map(|r| 0.5 * r).collect::<Vec<_>>()),
        ];
        states.extend(random_states(&grid, &rho, 4, 0x5eed));
        for (i, c) in self.components.iter().enumerate() {
            let path = format!("components[{i}]");
            validate_operator(&c.operator, &c.boundary, &grid).map_err(|e| e.at(format!("{path}.operator")))?;
            for &node in grid.boundary_nodes() {
                let z = c
                    .zeta
                    .eval(&PointEnv {
                        x: grid.node(node),
                        u: &[],
                        w: None,
                    })
                    .map_err(|e| Error::from(e).at(format!("{path}.boundary.zeta")))?;
                if z < 0.0 {
                    return Err(Error::from(ValidationError::NegativeBoundaryData { node, value: z })
                        .at(format!("{path}.boundary.zeta")));
                }
            }
            for s in &states {
                let v = eval_functional(&c.h, s, &grid).map_err(|e| e.at(format!("{path}.h")))?;
                if v < 0.0 {
                    return Err(Error::from(ValidationError::NegativeFunctional { value: v }).at(format!("{path}.h")));
                }
            }
        }
        Ok(())
    }
}

fn component_from_doc(c: &ComponentDoc, n: usize, path: &str) -> Result<ComponentSpec> {
    let coeff = |s: &str, name: &str| parse_expr(s, ParseContext::coefficient(), &format!("{path}.operator.{name}"));
    let o = &c.operator;
    let operator = OperatorSpec {
        a11: coeff(&o.a11, "a11")?,
        a12: coeff(&o.a12, "a12")?,
        a22: coeff(&o.a22, "a22")?,
        b1: coeff(&o.b1, "b1")?,
        b2: coeff(&o.b2, "b2")?,
        a0: coeff(&o.a0, "a0")?,
    };
    let b = c
        .boundary
        .b
        .as_deref()
        .map(|s| parse_expr(s, ParseContext::coefficient(), &format!("{path}.boundary.b")))
        .transpose()?;
    let boundary = match c.boundary.kind {
        BoundaryKind::Robin => BoundarySpec {
            kind: BoundaryKind::Robin,
            b: Some(b.ok_or_else(|| Error::from(ValidationError::MissingRobinCoefficient).at(format!("{path}.boundary.b")))?),
        },
        kind => BoundarySpec { kind, b: None },
    };
    let zeta = parse_expr(&c.boundary.zeta, ParseContext::coefficient(), &format!("{path}.boundary.zeta"))?;
    let f_ctx = if c.w.is_some() {
        ParseContext::pointwise(n)
    } else {
        ParseContext::pointwise_without_w(n)
    };
    let f = Nonlinearity {
        expr: parse_expr(&c.f, f_ctx, &format!("{path}.f"))?,
        monotone: c.f_monotone,
    };
    let functional = |d: &FunctionalDoc, name: &str| -> Result<FunctionalSpec> {
        Ok(FunctionalSpec {
            expr: parse_expr(&d.expr, ParseContext::functional(n), &format!("{path}.{name}.expr"))?,
            monotone: d.monotone,
        })
    };
    let w = c.w.as_ref().map(|d| functional(d, "w")).transpose()?;
    let h = match &c.h {
        Some(d) => functional(d, "h")?,
        None => FunctionalSpec::constant(0.0),
    };
    let lambda = c.lambda.resolve(&format!("{path}.lambda"))?;
    let eta = c.eta.resolve(&format!("{path}.eta"))?;
    let rho = c.rho.resolve(&format!("{path}.rho"))?;
    for (name, v) in [("lambda", lambda), ("eta", eta)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::from(ValidationError::NegativeParameter {
                name: name.into(),
                value: v,
            })
            .at(format!("{path}.{name}")));
        }
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::from(ValidationError::NonPositiveRadius(rho)).at(format!("{path}.rho")));
    }
    Ok(ComponentSpec {
        operator,
        boundary,
        zeta,
        f,
        w,
        h,
        lambda,
        eta,
        rho,
    })
}

// ---------------------------------------------------------------------------
// Functional evaluation
// ---------------------------------------------------------------------------

struct FunctionalEnv<'a> {
    grid: &'a Grid,
    state: &'a SystemState,
}

impl Env for FunctionalEnv<'_> {
    fn var(&self, _v: Var) -> Option<f64> {
        None
    }

    fn integral(&self, integrand: &Expr) -> Result<f64, EvalError> {
        let mut u = vec![0.0; self.state.n()];
        let mut sum = 0.0;
        for (node, (&x, &w)) in self.grid.nodes().iter().zip(self.grid.quad_weights()).enumerate() {
            self.state.gather(node, &mut u);
            sum += w * integrand.eval(&PointEnv { x, u: &u, w: None })?;
        }
        Ok(sum)
    }

    fn point_eval(&self, component: usize, point: [f64; 2]) -> Result<f64, EvalError> {
        if component >= self.state.n() {
            return Err(EvalError::Point(format!("no component {}", component + 1)));
        }
        eval_at_point(self.grid, self.state.component(component), point).map_err(|e| EvalError::Point(e.to_string()))
    }
}

/// Evaluates a functional: `INT` atoms by quadrature, `EVAL` atoms by
/// interpolation, then the outer expression.
pub fn eval_functional(func: &FunctionalSpec, state: &SystemState, grid: &Grid) -> Result<f64> {
    eval_functional_expr(&func.expr, state, grid)
}

pub fn eval_functional_expr(expr: &Expr, state: &SystemState, grid: &Grid) -> Result<f64> {
    if state.node_count() != grid.len() {
        return Err(Error::Usage("state does not live on this grid".into()));
    }
    Ok(expr.eval(&FunctionalEnv { grid, state })?)
}

/// Range `[lo, hi]` of a functional over the box states `P_I`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalRange {
    pub lo: f64,
    pub hi: f64,
    /// True when the endpoints come from the declared-monotone corner states.
    pub exact: bool,
}

impl FunctionalRange {
    pub fn point(v: f64) -> Self {
        Self {
            lo: v,
            hi: v,
            exact: true,
        }
    }
}

/// Seeded random states in `P_I`: alternately a random constant state and a
/// state with independent uniform nodal values.
pub fn random_states(grid: &Grid, rho: &[f64], count: usize, seed: u64) -> Vec<SystemState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|s| {
            let comps = rho
                .iter()
                .map(|&r| {
                    if s % 2 == 0 {
                        grid.constant(rng.gen_range(0.0..=r))
                    } else {
                        ScalarField::new((0..grid.len()).map(|_| rng.gen_range(0.0..=r)).collect())
                    }
                })
                .collect();
            SystemState::new(comps).expect("components share the grid")
        })
        .collect()
}

/// `count` points of `[lo, hi]`: both endpoints first, then the van der Corput
/// sequence. Prefixes are nested, and `2^k + 1` points form the uniform grid.
pub fn nested_points(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if hi == lo || count <= 1 {
        return vec![lo];
    }
    let mut out = vec![lo, hi];
    let mut k = 1u64;
    while out.len() < count {
        let (mut v, mut base, mut i) = (0.0, 0.5, k);
        while i > 0 {
            if i & 1 == 1 {
                v += base;
            }
            base *= 0.5;
            i >>= 1;
        }
        out.push(lo + (hi - lo) * v);
        k += 1;
    }
    out
}

/// Points per dimension so that the tensor lattice has at most `cap` points.
pub fn lattice_per_dim(samples: usize, dims: usize, cap: usize) -> usize {
    let mut per = samples.max(2);
    while per > 2 && per.checked_pow(dims as u32).map_or(true, |t| t > cap) {
        per -= 1;
    }
    per
}

/// Tensor lattice of [`nested_points`] over the box `prod [lo_d, hi_d]`.
pub fn lattice(lo: &[f64], hi: &[f64], per_dim: usize) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = lo.iter().zip(hi).map(|(&a, &b)| nested_points(a, b, per_dim)).collect();
    let mut out = vec![Vec::with_capacity(lo.len())];
    for axis in &axes {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

/// Largest lattice of constant states used when sampling functionals.
pub const STATE_LATTICE_CAP: usize = 4096;

/// Sample states of `P_I`: the constant states on a lattice of the box
/// (corners included) followed by `samples` seeded random states.
pub fn box_states(grid: &Grid, rho: &[f64], samples: usize, seed: u64) -> Vec<SystemState> {
    let per = lattice_per_dim(samples, rho.len(), STATE_LATTICE_CAP);
    let mut states: Vec<SystemState> = lattice(&vec![0.0; rho.len()], rho, per)
        .iter()
        .map(|p| SystemState::constant(grid, p))
        .collect();
    states.extend(random_states(grid, rho, samples, seed));
    states
}

/// Endpoints of `func` over `P_I`: exact from the corner states when the
/// functional is declared monotone, otherwise the extremes over [`box_states`].
pub fn functional_range(func: &FunctionalSpec, rho: &[f64], grid: &Grid, samples: usize, seed: u64) -> Result<FunctionalRange> {
    if samples < 2 {
        return Err(Error::Config(format!("functional_range needs at least 2 samples, got {samples}")));
    }
    let at_zero = || eval_functional(func, &SystemState::constant(grid, &vec![0.0; rho.len()]), grid);
    let at_top = || eval_functional(func, &SystemState::constant(grid, rho), grid);
    match func.monotone {
        Monotone::Increasing => Ok(FunctionalRange {
            lo: at_zero()?,
            hi: at_top()?,
            exact: true,
        }),
        Monotone::Decreasing => Ok(FunctionalRange {
            lo: at_top()?,
            hi: at_zero()?,
            exact: true,
        }),
        Monotone::None => {
            let values = box_states(grid, rho, samples, seed)
                .par_iter()
                .map(|s| eval_functional(func, s, grid))
                .collect::<Result<Vec<_>>>()?;
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Ok(FunctionalRange { lo, hi, exact: false })
        }
    }
}

// ---------------------------------------------------------------------------
// Discretised problem
// ---------------------------------------------------------------------------

/// Per-component discrete data: `K_i`, `gamma_i` and `K_i(1)`.
#[derive(Debug)]
pub struct DiscreteComponent {
    pub operator: Arc<DiscreteOperator>,
    pub zeta: ScalarField,
    pub gamma: ScalarField,
    pub k_one: ScalarField,
}

/// A problem specification together with its grid and assembled operators.
#[derive(Debug)]
pub struct Problem {
    spec: ProblemSpec,
    grid: Arc<Grid>,
    components: Vec<DiscreteComponent>,
}

impl Problem {
    /// Discretises `spec` at `resolution`, falling back to the document's
    /// resolution and then to the domain default.
    pub fn new(spec: ProblemSpec, resolution: Option<Resolution>) -> Result<Self> {
        let res = resolution
            .or(spec.resolution)
            .unwrap_or_else(|| spec.domain.default_resolution());
        let grid = Arc::new(build_grid(&spec.domain, res)?);
        let mut cache: Vec<(usize, Arc<DiscreteOperator>, ScalarField)> = Vec::new();
        let mut components = Vec::with_capacity(spec.n());
        for (i, c) in spec.components.iter().enumerate() {
            let found = cache.iter().find(|(j, ..)| {
                let o = &spec.components[*j];
                o.operator == c.operator && o.boundary == c.boundary
            });
            let (operator, k_one) = match found {
                Some((_, op, k1)) => (Arc::clone(op), k1.clone()),
                None => {
                    let op = Arc::new(assemble(&c.operator, &c.boundary, &grid).map_err(|e| e.in_component(i + 1))?);
                    let k1 = op.k_one().map_err(|e| e.in_component(i + 1))?;
                    cache.push((i, Arc::clone(&op), k1.clone()));
                    (op, k1)
                }
            };
            let mut zeta = grid.constant(0.0);
            for &node in grid.boundary_nodes() {
                zeta.values_mut()[node] = c
                    .zeta
                    .eval(&PointEnv {
                        x: grid.node(node),
                        u: &[],
                        w: None,
                    })
                    .map_err(|e| Error::from(e).in_component(i + 1))?;
            }
            let gamma = operator.lift_gamma(&zeta).map_err(|e| e.in_component(i + 1))?;
            components.push(DiscreteComponent {
                operator,
                zeta,
                gamma,
                k_one,
            });
        }
        Ok(Self { spec, grid, components })
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn spec_mut_params(&mut self) -> impl Iterator<Item = (&mut f64, &mut f64)> {
        self.spec.components.iter_mut().map(|c| (&mut c.lambda, &mut c.eta))
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.spec.n()
    }

    pub fn rho(&self) -> Vec<f64> {
        self.spec.rho()
    }

    pub fn component(&self, i: usize) -> &ComponentSpec {
        &self.spec.components[i]
    }

    pub fn discrete(&self, i: usize) -> &DiscreteComponent {
        &self.components[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, PI};

    fn disk(n: usize) -> Grid {
        build_grid(&Domain::unit_disk(), Resolution::new(n, 2 * n)).unwrap()
    }

    #[test]
    fn integral_of_one_matches_quadrature() {
        let g = disk(16);
        let f = FunctionalSpec::parse("INT(1)", Monotone::None, 1).unwrap();
        let s = SystemState::constant(&g, &[0.3]);
        let v = eval_functional(&f, &s, &g).unwrap();
        let q = crate::grid::quadrature_integral(&g, &g.constant(1.0)).unwrap();
        assert_eq!(v, q);
    }

    #[test]
    fn example_functionals() {
        let g = disk(64);
        let w1 = FunctionalSpec::parse("inv(INT(exp(max(u1,u2))))", Monotone::Decreasing, 2).unwrap();
        let zero = SystemState::constant(&g, &[0.0, 0.0]);
        let one = SystemState::constant(&g, &[1.0, 1.0]);
        assert!((eval_functional(&w1, &zero, &g).unwrap() - 1.0 / PI).abs() < 1e-3);
        assert!((eval_functional(&w1, &one, &g).unwrap() - 1.0 / (E * PI)).abs() < 1e-3);
        let h1 = FunctionalSpec::parse("EVAL(1,[0,0])^2 + EVAL(2,[0,0])^(1/2)", Monotone::Increasing, 2).unwrap();
        assert!((eval_functional(&h1, &one, &g).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ranges() {
        let g = disk(64);
        let rho = [1.0, 1.0];
        let w1 = FunctionalSpec::parse("inv(INT(exp(max(u1,u2))))", Monotone::Decreasing, 2).unwrap();
        let r = functional_range(&w1, &rho, &g, 8, 1).unwrap();
        assert!(r.exact);
        assert!((r.lo - 1.0 / (E * PI)).abs() < 1e-3 && (r.hi - 1.0 / PI).abs() < 1e-3);
        let w2 = FunctionalSpec::parse("inv(INT(exp(u1+u2)))", Monotone::Decreasing, 2).unwrap();
        let r = functional_range(&w2, &rho, &g, 8, 1).unwrap();
        assert!((r.lo - 1.0 / (E * E * PI)).abs() < 1e-3 && (r.hi - 1.0 / PI).abs() < 1e-3);
        let c = FunctionalSpec {
            expr: Expr::num(5.0),
            monotone: Monotone::None,
        };
        let r = functional_range(&c, &rho, &g, 4, 1).unwrap();
        assert_eq!((r.lo, r.hi, r.exact), (5.0, 5.0, false));
        assert!(functional_range(&c, &rho, &g, 1, 1).is_err());
    }

    #[test]
    fn nested_sampling() {
        assert_eq!(nested_points(0.0, 1.0, 5), vec![0.0, 1.0, 0.5, 0.25, 0.75]);
        let mut nine = nested_points(0.0, 8.0, 9);
        nine.sort_by(f64::total_cmp);
        assert_eq!(nine, (0..9).map(f64::from).collect::<Vec<_>>());
        assert_eq!(nested_points(2.0, 2.0, 9), vec![2.0]);
        assert_eq!(lattice_per_dim(9, 2, 100_000), 9);
        assert_eq!(lattice_per_dim(9, 6, 100_000), 6);
        let l = lattice(&[0.0, 0.0], &[1.0, 2.0], 3);
        assert_eq!(l.len(), 9);
        assert!(l.contains(&vec![1.0, 2.0]) && l.contains(&vec![0.0, 0.0]));
    }

    fn doc_with(lambda: &str, eta: &str, rho: &str) -> String {
        format!(
            r#"{{"domain": {{"type": "disk", "radius": 1}},
                "components": [{{
                  "operator": {{"a11": "1", "a22": "1"}},
                  "boundary": {{"kind": "dirichlet", "zeta": "1"}},
                  "f": "w*exp(u1)",
                  "w": {{"expr": "inv(INT(exp(u1)))", "monotone": "dec"}},
                  "h": {{"expr": "EVAL(1,[0,0])", "monotone": "inc"}},
                  "lambda": {lambda}, "eta": {eta}, "rho": {rho}
                }}]}}"#
        )
    }

    #[test]
    fn loads_valid_document() {
        let spec = load_problem(&doc_with("1", "\"1/4\"", "2")).unwrap();
        assert_eq!(spec.n(), 1);
        assert_eq!(spec.components[0].eta, 0.25);
    }

    #[test]
    fn rejects_bad_parameters() {
        let err = load_problem(&doc_with("1", "-1", "2")).unwrap_err();
        assert!(err.to_string().contains("components[0].eta"), "{err}");
        assert!(matches!(
            err,
            Error::Field { ref source, .. } if matches!(**source, Error::Validation(ValidationError::NegativeParameter { .. }))
        ));
        let err = load_problem(&doc_with("1", "0", "0")).unwrap_err();
        assert!(err.to_string().contains("rho"), "{err}");
    }

    #[test]
    fn rejects_unknown_keys_and_bad_expressions() {
        let doc = doc_with("1", "0", "1").replace("\"f\":", "\"colour\": 1, \"f\":");
        assert!(matches!(load_problem(&doc), Err(Error::Schema { .. })));
        let doc = doc_with("1", "0", "1").replace("w*exp(u1)", "w*exp(u2)");
        let err = load_problem(&doc).unwrap_err();
        assert!(err.to_string().contains("components[0].f"), "{err}");
        assert_eq!(err.kind(), "parse");
    }

    #[test]
    fn rejects_negative_boundary_data_and_h() {
        let doc = doc_with("1", "1", "1").replace("\"zeta\": \"1\"", "\"zeta\": \"x1\"");
        assert!(load_problem(&doc).unwrap_err().to_string().contains("zeta"));
        let doc = doc_with("1", "1", "1").replace("EVAL(1,[0,0])\"", "EVAL(1,[0,0]) - 1\"");
        assert!(load_problem(&doc).unwrap_err().to_string().contains(".h"));
    }

    #[test]
    fn neumann_without_absorption_rejected_at_load() {
        let doc = doc_with("1", "1", "1").replace("dirichlet", "neumann");
        let err = load_problem(&doc).unwrap_err();
        assert_eq!(err.kind(), "validation");
    }

    #[test]
    fn identical_operators_share_one_assembly() {
        let spec = load_problem(
            r#"{"domain": {"type": "disk", "radius": 1}, "resolution": 8,
                "components": [
                  {"operator": {"a11": "1", "a22": "1"}, "boundary": {"kind": "dirichlet"}, "f": "1", "lambda": 1, "eta": 0, "rho": 1},
                  {"operator": {"a11": "1", "a22": "1"}, "boundary": {"kind": "dirichlet"}, "f": "u1", "lambda": 1, "eta": 0, "rho": 1}
                ]}"#,
        )
        .unwrap();
        let p = Problem::new(spec, None).unwrap();
        assert!(Arc::ptr_eq(&p.discrete(0).operator, &p.discrete(1).operator));
        assert_eq!(p.grid().len(), 1 + 8 * 16);
    }
}
