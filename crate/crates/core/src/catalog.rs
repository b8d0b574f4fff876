//! Built-in analytic fields and the text grammar for choosing them.
//!
//! Data fields in run configurations are picked from a fixed catalog
//! rather than parsed from a general expression language: the experiments
//! only ever need zero, constants, a linear profile, and the manufactured
//! solution triple (state, matching source, matching Gamma2 flux) used by
//! the convergence study.
//!
//! The manufactured state is u(x, y) = sin(pi x / 2) cosh(y). It vanishes
//! on the left edge, has the nonconstant trace cosh(y) on the right edge,
//! and satisfies -laplace(u) = ((pi/2)^2 - 1) u with outward normal flux
//! -du/dn = -sin(pi x / 2) sinh(y) on both horizontal edges (the sign of
//! sinh(y) absorbs the opposite normals at y = 0 and y = 1).

use crate::error::{Error, Result};
use crate::fem::{Field, FieldRole};
use crate::mesh::Mesh2D;
use std::f64::consts::FRAC_PI_2;

pub fn ms_state(x: f64, y: f64) -> f64 {
    (FRAC_PI_2 * x).sin() * y.cosh()
}

pub fn ms_state_grad(x: f64, y: f64) -> (f64, f64) {
    (FRAC_PI_2 * (FRAC_PI_2 * x).cos() * y.cosh(), (FRAC_PI_2 * x).sin() * y.sinh())
}

pub fn ms_source(x: f64, y: f64) -> f64 {
    (FRAC_PI_2 * FRAC_PI_2 - 1.0) * ms_state(x, y)
}

pub fn ms_flux(x: f64, y: f64) -> f64 {
    -(FRAC_PI_2 * x).sin() * y.sinh()
}

/// Identifier of a catalog field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExprId {
    MsState,
    MsSource,
    MsFlux,
    LinearX,
}

impl ExprId {
    pub fn parse(id: &str) -> Option<ExprId> {
        match id {
            "ms_state" => Some(ExprId::MsState),
            "ms_source" => Some(ExprId::MsSource),
            "ms_flux" => Some(ExprId::MsFlux),
            "linear_x" => Some(ExprId::LinearX),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ExprId::MsState => "ms_state",
            ExprId::MsSource => "ms_source",
            ExprId::MsFlux => "ms_flux",
            ExprId::LinearX => "linear_x",
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            ExprId::MsState => ms_state(x, y),
            ExprId::MsSource => ms_source(x, y),
            ExprId::MsFlux => ms_flux(x, y),
            ExprId::LinearX => x,
        }
    }
}

/// Text form of a data field: `zero`, `constant:<value>`, or `expr:<id>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldSpec {
    Zero,
    Constant(f64),
    Expr(ExprId),
}

impl FieldSpec {
    pub fn parse(text: &str) -> Result<FieldSpec> {
        let t = text.trim();
        if t == "zero" {
            return Ok(FieldSpec::Zero);
        }
        if let Some(v) = t.strip_prefix("constant:") {
            return v
                .trim()
                .parse::<f64>()
                .map(FieldSpec::Constant)
                .map_err(|_| Error::InvalidParameter(format!("bad constant in field spec '{t}'")));
        }
        if let Some(id) = t.strip_prefix("expr:") {
            return ExprId::parse(id.trim()).map(FieldSpec::Expr).ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown expression id '{}' (catalog: ms_state, ms_source, ms_flux, linear_x)",
                    id.trim()
                ))
            });
        }
        Err(Error::InvalidParameter(format!(
            "field spec '{t}' is not zero, constant:<value>, or expr:<id>"
        )))
    }

    pub fn instantiate(&self, mesh: &Mesh2D, role: FieldRole) -> Field {
        match self {
            FieldSpec::Zero => Field::zeros(mesh.vertices.len(), role),
            FieldSpec::Constant(c) => Field::constant(mesh.vertices.len(), *c, role),
            FieldSpec::Expr(id) => Field::from_fn(mesh, role, |x, y| id.eval(x, y)),
        }
    }
}

impl std::fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FieldSpec::Zero => write!(f, "zero"),
            FieldSpec::Constant(c) => write!(f, "constant:{c}"),
            FieldSpec::Expr(id) => write!(f, "expr:{}", id.name()),
        }
    }
}
