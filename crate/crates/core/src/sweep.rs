//! Convergence sweeps over the heat transfer coefficient.
//!
//! As alpha grows, the nonsmooth boundary condition stiffens toward the
//! Dirichlet trace u = b, so states at fixed control converge to the limit
//! state in V, and optimal pairs converge in H x V with costs approaching
//! the limit cost. Sweeps solve the limit problem once, then each alpha
//! independently (parallelizable; the record order is fixed by the alpha
//! grid, so results do not depend on the thread count), and fit an
//! empirical power-law exponent to the positive errors by least squares on
//! log-log data. The exponent is an observation about this discretization,
//! not an asserted rate.

use crate::control::{
    solve_optimal_control_alpha_with_starts, solve_optimal_control_limit, ControlProblem,
    OptimalPair, OptimizerConfig,
};
use crate::error::{Error, Result};
use crate::fem::{norm, FemSystem, Field, FieldRole, NormKind};
use crate::state::{solve_hemivariational, solve_mixed_dirichlet, HviSolverConfig, StateSolution};
use crate::superpotential::Superpotential;
use rayon::prelude::*;
use std::time::Instant;

/// One row of a control sweep.
#[derive(Debug, Clone)]
pub struct SweepRecord {
    pub alpha: f64,
    /// |u_alpha - u_limit| in V.
    pub state_err_v: f64,
    /// |g_alpha - g_limit| in H.
    pub control_err_h: f64,
    /// |J_alpha(g_alpha) - J(g_limit)|.
    pub cost_gap: f64,
    pub certified: bool,
    pub wall_time_s: f64,
}

/// One row of a state sweep at fixed control.
#[derive(Debug, Clone)]
pub struct StateSweepRecord {
    pub alpha: f64,
    pub err_v: f64,
    pub certified: bool,
    pub wall_time_s: f64,
}

#[derive(Debug)]
pub struct StateSweep {
    pub records: Vec<StateSweepRecord>,
    /// Fitted slope of log err against log alpha over the positive errors;
    /// absent when fewer than two errors are positive.
    pub exponent: Option<f64>,
    pub limit: StateSolution,
}

#[derive(Debug)]
pub struct ControlSweep {
    pub records: Vec<SweepRecord>,
    pub exponent_control: Option<f64>,
    pub exponent_state: Option<f64>,
    pub limit: OptimalPair,
    /// Per-alpha solver failures; the sweep continues past them and their
    /// rows carry NaN errors.
    pub failures: Vec<(f64, String)>,
}

fn validate_grid(alpha_list: &[f64]) -> Result<()> {
    if alpha_list.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "alpha grid needs at least 3 entries, got {}",
            alpha_list.len()
        )));
    }
    if !(alpha_list[0] > 0.0) {
        return Err(Error::InvalidParameter("alpha grid must be positive".into()));
    }
    for w in alpha_list.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidParameter("alpha grid must be strictly increasing".into()));
        }
    }
    Ok(())
}

fn check_limit_consistency(j: &Superpotential, b: f64) -> Result<()> {
    if j.b() != b {
        return Err(Error::InvalidParameter(format!(
            "superpotential anchor {} must equal the limit trace {b}: the same constant couples \
             the flux law and the Dirichlet limit",
            j.b()
        )));
    }
    Ok(())
}

/// Least-squares slope of ln(err) against ln(alpha), ignoring nonpositive
/// or nonfinite errors; None when fewer than two usable points remain.
pub fn fit_loglog_exponent(points: &[(f64, f64)]) -> Option<f64> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(a, e)| *a > 0.0 && *e > 0.0 && e.is_finite())
        .map(|&(a, e)| (a.ln(), e.ln()))
        .collect();
    if usable.len() < 2 {
        return None;
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// Weak monotone decrease, allowing exact ties (saturated states repeat
/// the limit solution exactly, so consecutive zeros are legitimate).
pub fn nonincreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] <= w[0])
}

pub fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

fn v_gap(sys: &FemSystem, a: &Field, b: &Field) -> f64 {
    let d = Field::new(
        a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect(),
        FieldRole::State,
    );
    norm(sys, &d, NormKind::V)
}

fn h_gap(sys: &FemSystem, a: &Field, b: &Field) -> f64 {
    let d = Field::new(
        a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect(),
        FieldRole::State,
    );
    norm(sys, &d, NormKind::H)
}

/// States at fixed control over the alpha grid against the limit state.
pub fn sweep_state(
    sys: &FemSystem,
    g: &Field,
    q: &Field,
    b: f64,
    alpha_list: &[f64],
    j: &Superpotential,
    cfg: &HviSolverConfig,
) -> Result<StateSweep> {
    validate_grid(alpha_list)?;
    check_limit_consistency(j, b)?;
    cfg.validate()?;
    let limit = solve_mixed_dirichlet(sys, g, q, b)?;
    let rows: Vec<Result<StateSweepRecord>> = alpha_list
        .par_iter()
        .map(|&alpha| {
            let started = Instant::now();
            let sol = solve_hemivariational(sys, g, q, alpha, j, cfg)?;
            Ok(StateSweepRecord {
                alpha,
                err_v: v_gap(sys, &sol.u, &limit.u),
                certified: sol.certified,
                wall_time_s: started.elapsed().as_secs_f64(),
            })
        })
        .collect();
    let records = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let pts: Vec<(f64, f64)> = records.iter().map(|r| (r.alpha, r.err_v)).collect();
    Ok(StateSweep { exponent: fit_loglog_exponent(&pts), records, limit })
}

/// Optimal pairs over the alpha grid against the limit-optimal pair.
pub fn sweep_control(
    cp: &ControlProblem,
    alpha_list: &[f64],
    j: &Superpotential,
    cfg: &HviSolverConfig,
    opt: &OptimizerConfig,
) -> Result<ControlSweep> {
    validate_grid(alpha_list)?;
    check_limit_consistency(j, cp.b)?;
    cfg.validate()?;
    let limit = solve_optimal_control_limit(cp, opt.tol)?;
    let zero = Field::zeros(cp.sys.dof_count, FieldRole::Control);
    let starts = [zero, limit.g_opt.clone()];
    let rows: Vec<(SweepRecord, Option<String>)> = alpha_list
        .par_iter()
        .map(|&alpha| {
            let started = Instant::now();
            match solve_optimal_control_alpha_with_starts(cp, alpha, j, cfg, opt, &starts) {
                Ok(pair) => (
                    SweepRecord {
                        alpha,
                        state_err_v: v_gap(cp.sys, &pair.u_opt.u, &limit.u_opt.u),
                        control_err_h: h_gap(cp.sys, &pair.g_opt, &limit.g_opt),
                        cost_gap: (pair.cost - limit.cost).abs(),
                        certified: pair.u_opt.certified,
                        wall_time_s: started.elapsed().as_secs_f64(),
                    },
                    None,
                ),
                Err(e) => (
                    SweepRecord {
                        alpha,
                        state_err_v: f64::NAN,
                        control_err_h: f64::NAN,
                        cost_gap: f64::NAN,
                        certified: false,
                        wall_time_s: started.elapsed().as_secs_f64(),
                    },
                    Some(e.to_string()),
                ),
            }
        })
        .collect();
    let mut records = Vec::with_capacity(rows.len());
    let mut failures = Vec::new();
    for (rec, err) in rows {
        if let Some(msg) = err {
            failures.push((rec.alpha, msg));
        }
        records.push(rec);
    }
    let cpts: Vec<(f64, f64)> = records.iter().map(|r| (r.alpha, r.control_err_h)).collect();
    let spts: Vec<(f64, f64)> = records.iter().map(|r| (r.alpha, r.state_err_v)).collect();
    Ok(ControlSweep {
        exponent_control: fit_loglog_exponent(&cpts),
        exponent_state: fit_loglog_exponent(&spts),
        records,
        limit,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble;
    use crate::mesh::{generate_unit_square, TaggingScheme};

    fn unit_sys(n: usize) -> FemSystem {
        assemble(&generate_unit_square(n, TaggingScheme::default()).unwrap()).unwrap()
    }

    #[test]
    fn grid_validation_rejects_bad_lists() {
        let sys = unit_sys(2);
        let g = Field::zeros(sys.dof_count, FieldRole::Control);
        let q = Field::zeros(sys.dof_count, FieldRole::Flux);
        let j = Superpotential::quadratic_well(1.0);
        let cfg = HviSolverConfig::default();
        for bad in [vec![10.0], vec![1.0, 10.0], vec![1.0, 10.0, 10.0], vec![-1.0, 1.0, 10.0]] {
            assert!(sweep_state(&sys, &g, &q, 1.0, &bad, &j, &cfg).is_err(), "accepted {bad:?}");
        }
        // anchor mismatch between the flux law and the limit trace
        assert!(sweep_state(&sys, &g, &q, 2.0, &[1.0, 10.0, 100.0], &j, &cfg).is_err());
    }

    #[test]
    fn quadratic_state_sweep_follows_the_closed_form() {
        // zero data, b = 1: u_alpha = 2a/(1+2a) x and u_limit = x, so the
        // V-error is |x|_V / (1+2a) and the fitted exponent approaches -1
        let sys = unit_sys(8);
        let g = Field::zeros(sys.dof_count, FieldRole::Control);
        let q = Field::zeros(sys.dof_count, FieldRole::Flux);
        let j = Superpotential::quadratic_well(1.0);
        let alphas = [1.0, 10.0, 100.0, 1000.0, 1e4];
        let sweep =
            sweep_state(&sys, &g, &q, 1.0, &alphas, &j, &HviSolverConfig::default()).unwrap();
        let x_profile = Field::from_fn(&sys.mesh, FieldRole::State, |x, _| x);
        let xv = norm(&sys, &x_profile, NormKind::V);
        for rec in &sweep.records {
            let predicted = xv / (1.0 + 2.0 * rec.alpha);
            assert!(
                (rec.err_v - predicted).abs() <= 1e-7 * (1.0 + predicted),
                "alpha {}: err {} vs predicted {predicted}",
                rec.alpha,
                rec.err_v
            );
            assert!(rec.certified);
        }
        let errs: Vec<f64> = sweep.records.iter().map(|r| r.err_v).collect();
        assert!(strictly_decreasing(&errs));
        assert!(errs[4] <= 1e-2 * errs[0]);
        let exp = sweep.exponent.unwrap();
        assert!((-1.2..=-0.8).contains(&exp), "exponent {exp}");
    }

    #[test]
    fn zero_data_abs_sweep_is_identically_zero() {
        let sys = unit_sys(4);
        let g = Field::zeros(sys.dof_count, FieldRole::Control);
        let q = Field::zeros(sys.dof_count, FieldRole::Flux);
        let j = Superpotential::abs_well(0.0);
        let sweep = sweep_state(&sys, &g, &q, 0.0, &[1.0, 10.0, 100.0], &j, &HviSolverConfig::default())
            .unwrap();
        for rec in &sweep.records {
            assert_eq!(rec.err_v, 0.0, "alpha {}", rec.alpha);
            assert!(rec.certified);
        }
        assert!(sweep.exponent.is_none());
        assert!(nonincreasing(&sweep.records.iter().map(|r| r.err_v).collect::<Vec<_>>()));
    }

    #[test]
    fn kinked_state_sweep_saturates_to_the_limit_exactly() {
        // b = 2, zero data: the multiplier -2/alpha enters the interval
        // [-1, 1] at alpha >= 2, where the pinned solve reproduces the
        // limit arithmetic bit for bit
        let sys = unit_sys(8);
        let g = Field::zeros(sys.dof_count, FieldRole::Control);
        let q = Field::zeros(sys.dof_count, FieldRole::Flux);
        let j = Superpotential::kinked_well(2.0);
        let sweep = sweep_state(
            &sys,
            &g,
            &q,
            2.0,
            &[1.0, 10.0, 100.0, 1000.0, 1e4],
            &j,
            &HviSolverConfig::default(),
        )
        .unwrap();
        let errs: Vec<f64> = sweep.records.iter().map(|r| r.err_v).collect();
        assert!(errs[0] > 0.5, "alpha=1 picks a non-saturated branch, err {}", errs[0]);
        for e in &errs[1..] {
            assert_eq!(*e, 0.0);
        }
        assert!(nonincreasing(&errs));
        assert!(sweep.records.iter().all(|r| r.certified));
        assert!(sweep.exponent.is_none(), "single positive error cannot be fitted");
    }

    #[test]
    fn exponent_fit_recovers_a_planted_slope() {
        let pts: Vec<(f64, f64)> = [1.0, 10.0, 100.0, 1000.0]
            .iter()
            .map(|&a: &f64| (a, 3.0 * a.powf(-1.0)))
            .collect();
        let e = fit_loglog_exponent(&pts).unwrap();
        assert!((e + 1.0).abs() <= 1e-12);
        assert!(fit_loglog_exponent(&[(1.0, 0.0), (10.0, 0.0)]).is_none());
        assert!(fit_loglog_exponent(&[(1.0, 2.0)]).is_none());
    }
}
