//! State solvers for the heat conduction problem on the unit square.
//!
//! Two problems share the bilinear form a(u,v) = grad u . grad v and the
//! load L(v) = (g, v) - (q, v)_{Gamma2}: the limit problem imposes u = b on
//! Gamma3 as Dirichlet data, while for finite alpha the right edge carries
//! the multivalued flux law -du/dn in alpha * dj(u). The nonsmooth solve
//! runs a smoothing homotopy (damped Newton per radius) and finishes with
//! an exact active-set stage that pins nodes sitting on derivative
//! breakpoints, so that certified solutions satisfy the inequality
//! a(u,v) + alpha * sum_i w_i j0(u_i; v_i) >= L(v) at machine precision and
//! a fully saturated boundary reproduces the limit solve bit for bit.
//!
//! Lumped quadrature on Gamma3 decouples the flux law nodewise: w_i are the
//! row sums of the boundary mass matrix, and the discrete inclusion at node
//! i reads (L - A u)_i / (alpha w_i) in dj(u_i).

use crate::error::{Error, Result};
use crate::fem::{load_vector, FemSystem, Field, FieldRole};
use crate::sparse::{cg, norm2, solve_spd_plus_diag, CsrMatrix};
use crate::superpotential::Superpotential;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Outcome of a state solve.
#[derive(Debug, Clone)]
pub struct StateSolution {
    pub u: Field,
    pub iterations: usize,
    pub residual_norm: f64,
    /// For linear solves: the linear residual met its tolerance. For the
    /// nonsmooth problem: the active-set stage converged and the sampled
    /// inequality residual stayed above the certification threshold.
    pub certified: bool,
    /// Heat transfer coefficient; absent for the limit problem.
    pub alpha: Option<f64>,
}

/// Controls for the smoothing-homotopy Newton solver.
#[derive(Debug, Clone)]
pub struct HviSolverConfig {
    /// Strictly decreasing positive smoothing radii.
    pub epsilon_schedule: Vec<f64>,
    /// Nonlinear residual tolerance, relative to 1 + |L|.
    pub newton_tol: f64,
    /// Newton iteration cap per smoothing radius.
    pub max_newton: usize,
    /// Relative tolerance of inner conjugate-gradient solves.
    pub linear_tol: f64,
    /// Line-search backtracking factor.
    pub damping: f64,
    pub max_backtracks: usize,
    /// Random directions sampled by the certification residual check.
    pub cert_trials: usize,
    pub cert_seed: u64,
}

impl Default for HviSolverConfig {
    fn default() -> Self {
        HviSolverConfig {
            epsilon_schedule: vec![1e-1, 1e-2, 1e-3, 1e-4],
            newton_tol: 1e-10,
            max_newton: 50,
            linear_tol: 1e-12,
            damping: 0.5,
            max_backtracks: 30,
            cert_trials: 32,
            cert_seed: 0,
        }
    }
}

impl HviSolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epsilon_schedule.is_empty() {
            return Err(Error::InvalidParameter("epsilon schedule must be nonempty".into()));
        }
        for w in self.epsilon_schedule.windows(2) {
            if !(w[1] < w[0]) {
                return Err(Error::InvalidParameter(
                    "epsilon schedule must be strictly decreasing".into(),
                ));
            }
        }
        if !(self.epsilon_schedule[self.epsilon_schedule.len() - 1] > 0.0) {
            return Err(Error::InvalidParameter("epsilon schedule must be positive".into()));
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "damping must lie in (0, 1), got {}",
                self.damping
            )));
        }
        if !(self.newton_tol > 0.0) || !(self.linear_tol > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        Ok(())
    }
}

fn cg_cap(n: usize) -> usize {
    20 * n + 10_000
}

fn reduce(v: &[f64], keep: &[usize]) -> Vec<f64> {
    keep.iter().map(|&i| v[i]).collect()
}

/// Entrywise a + factor * b.
fn scaled_sum(a: &CsrMatrix, b: &CsrMatrix, factor: f64) -> CsrMatrix {
    let mut t: Vec<(usize, usize, f64)> = a.iter_entries().collect();
    t.extend(b.iter_entries().map(|(i, j, v)| (i, j, factor * v)));
    CsrMatrix::from_triplets(a.nrows(), a.ncols(), &t)
}

/// Solve mat u = rhs with u prescribed outside `free` by `bc`, reducing to
/// the free rows and columns; cold-started CG keeps the result a pure
/// function of the inputs.
fn solve_constrained(
    mat: &CsrMatrix,
    rhs: &[f64],
    bc: &[f64],
    free: &[usize],
    tol: f64,
) -> Result<(Vec<f64>, usize, f64)> {
    let lifted = mat.apply(bc);
    let r: Vec<f64> = free.iter().map(|&i| rhs[i] - lifted[i]).collect();
    let reduced = mat.restrict(free);
    let (x, out) = cg(&reduced, &r, None, tol, cg_cap(free.len()));
    if !out.converged {
        return Err(Error::LinearSolveFailed { iterations: out.iterations, residual: out.residual });
    }
    let mut u = bc.to_vec();
    for (pos, &i) in free.iter().enumerate() {
        u[i] = x[pos];
    }
    Ok((u, out.iterations, out.residual))
}

/// Limit problem: Dirichlet 0 on Gamma1 and a prescribed trace on Gamma3,
/// flux q on Gamma2, source g.
pub fn solve_mixed_dirichlet_trace(
    sys: &FemSystem,
    g: &Field,
    q: &Field,
    trace: &Field,
) -> Result<StateSolution> {
    if trace.len() != sys.dof_count {
        return Err(Error::DimensionMismatch { expected: sys.dof_count, got: trace.len() });
    }
    let l = load_vector(sys, g, q)?;
    let mut bc = vec![0.0; sys.dof_count];
    for &i in &sys.dirichlet_g3 {
        bc[i] = trace.values[i];
    }
    let (u, iterations, residual) =
        solve_constrained(&sys.stiffness, &l, &bc, &sys.free_dofs_k0, 1e-12)?;
    Ok(StateSolution {
        u: Field::new(u, FieldRole::State),
        iterations,
        residual_norm: residual,
        certified: true,
        alpha: None,
    })
}

/// Limit problem with constant Gamma3 trace b.
pub fn solve_mixed_dirichlet(sys: &FemSystem, g: &Field, q: &Field, b: f64) -> Result<StateSolution> {
    let trace = Field::constant(sys.dof_count, b, FieldRole::Target);
    solve_mixed_dirichlet_trace(sys, g, q, &trace)
}

fn require_positive_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "heat transfer coefficient must be positive, got {alpha}"
        )));
    }
    Ok(())
}

/// Linear Robin problem (A + 2 alpha M3) u = L + 2 alpha M3 b on V0, with
/// the consistent Gamma3 mass matrix: the exact state for the quadratic
/// well, used as an oracle.
pub fn solve_robin(sys: &FemSystem, g: &Field, q: &Field, alpha: f64, b: f64) -> Result<StateSolution> {
    require_positive_alpha(alpha)?;
    let l = load_vector(sys, g, q)?;
    let mat = scaled_sum(&sys.stiffness, &sys.mass_gamma3, 2.0 * alpha);
    let m3_rows = sys.mass_gamma3.row_sums();
    let rhs: Vec<f64> = l.iter().zip(&m3_rows).map(|(li, wi)| li + 2.0 * alpha * b * wi).collect();
    let bc = vec![0.0; sys.dof_count];
    let (u, iterations, residual) = solve_constrained(&mat, &rhs, &bc, &sys.free_dofs_v0, 1e-12)?;
    Ok(StateSolution {
        u: Field::new(u, FieldRole::State),
        iterations,
        residual_norm: residual,
        certified: true,
        alpha: Some(alpha),
    })
}

/// Robin problem with the lumped Gamma3 weights, matching the quadrature of
/// the nonsmooth solver: agrees with the quadratic-well solve to solver
/// tolerance.
pub fn solve_robin_lumped(
    sys: &FemSystem,
    g: &Field,
    q: &Field,
    alpha: f64,
    b: f64,
) -> Result<StateSolution> {
    require_positive_alpha(alpha)?;
    let l = load_vector(sys, g, q)?;
    let mut trips: Vec<(usize, usize, f64)> = sys.stiffness.iter_entries().collect();
    let mut rhs = l;
    for (&i, &w) in sys.gamma3_nodes().iter().zip(sys.gamma3_lumped_weights()) {
        trips.push((i, i, 2.0 * alpha * w));
        rhs[i] += 2.0 * alpha * b * w;
    }
    let mat = CsrMatrix::from_triplets(sys.dof_count, sys.dof_count, &trips);
    let bc = vec![0.0; sys.dof_count];
    let (u, iterations, residual) = solve_constrained(&mat, &rhs, &bc, &sys.free_dofs_v0, 1e-12)?;
    Ok(StateSolution {
        u: Field::new(u, FieldRole::State),
        iterations,
        residual_norm: residual,
        certified: true,
        alpha: Some(alpha),
    })
}

/// Midpoint of the subdifferential interval.
fn clarke_mid(j: &Superpotential, r: f64) -> f64 {
    let (lo, hi) = j.clarke_interval(r);
    0.5 * (lo + hi)
}

struct HomotopyRun {
    u: Vec<f64>,
    iterations: usize,
    residual: f64,
    converged: bool,
}

/// Smoothing homotopy: warm start from a Robin solve whose coefficient is
/// the secant slope of dj between b - 1 and b + 1, then damped Newton at
/// each radius of the schedule, warm-starting each stage from the last.
fn run_homotopy(
    sys: &FemSystem,
    l: &[f64],
    alpha: f64,
    j: &Superpotential,
    cfg: &HviSolverConfig,
) -> Result<HomotopyRun> {
    let l_scale = 1.0 + norm2(l);
    let free = &sys.free_dofs_v0;
    let nodes = sys.gamma3_nodes();
    let weights = sys.gamma3_lumped_weights();
    let a_ff = sys.stiffness.restrict(free);
    // position of each Gamma3 node inside the free V0 ordering
    let mut pos_of = vec![usize::MAX; sys.dof_count];
    for (pos, &i) in free.iter().enumerate() {
        pos_of[i] = pos;
    }

    // Robin warm start with the secant coefficient of dj at b +- 1
    let b = j.b();
    let kappa = 0.5 * (clarke_mid(j, b + 1.0) - clarke_mid(j, b - 1.0));
    let kappa = kappa.max(0.0);
    let mut trips: Vec<(usize, usize, f64)> = sys.stiffness.iter_entries().collect();
    let mut rhs = l.to_vec();
    for (&i, &w) in nodes.iter().zip(weights) {
        trips.push((i, i, alpha * kappa * w));
        rhs[i] += alpha * kappa * b * w;
    }
    let warm_mat = CsrMatrix::from_triplets(sys.dof_count, sys.dof_count, &trips);
    let bc = vec![0.0; sys.dof_count];
    let (mut u, mut total_iters, _) = solve_constrained(&warm_mat, &rhs, &bc, free, cfg.linear_tol)?;

    let residual_free = |u: &[f64], eval: &dyn Fn(f64) -> f64| -> Vec<f64> {
        let au = sys.stiffness.apply(u);
        let mut f: Vec<f64> = free.iter().map(|&i| au[i] - l[i]).collect();
        for (&i, &w) in nodes.iter().zip(weights) {
            f[pos_of[i]] += alpha * w * eval(u[i]);
        }
        f
    };

    let mut converged_all = true;
    let mut last_res = 0.0;
    for &eps in &cfg.epsilon_schedule {
        let s = j.smooth(eps)?;
        let eval = |r: f64| s.eval(r);
        let mut f = residual_free(&u, &eval);
        let mut fnorm = norm2(&f);
        let mut stage_converged = false;
        for _ in 0..cfg.max_newton {
            if fnorm <= cfg.newton_tol * l_scale {
                stage_converged = true;
                break;
            }
            let mut diag = vec![0.0; free.len()];
            for (&i, &w) in nodes.iter().zip(weights) {
                diag[pos_of[i]] = alpha * w * s.slope(u[i]);
            }
            let neg_f: Vec<f64> = f.iter().map(|v| -v).collect();
            let (d, _) =
                solve_spd_plus_diag(&a_ff, &diag, &neg_f, cfg.linear_tol, cg_cap(free.len()))?;
            total_iters += 1;
            // Trust the branch linearization only within a few smoothing
            // radii of boundary movement: outside a breakpoint window the
            // model knows nothing about the kink ahead, and an unclamped
            // step can fly over the entire window and leave the basin.
            let mut lambda = 1.0;
            if !j.breakpoints().is_empty() {
                let boundary_move =
                    nodes.iter().map(|&i| d[pos_of[i]].abs()).fold(0.0, f64::max);
                let cap = 4.0 * eps;
                if boundary_move > cap {
                    lambda = cap / boundary_move;
                }
            }
            let mut accepted = false;
            for _ in 0..=cfg.max_backtracks {
                let mut trial = u.clone();
                for (pos, &i) in free.iter().enumerate() {
                    trial[i] += lambda * d[pos];
                }
                let ft = residual_free(&trial, &eval);
                let ftn = norm2(&ft);
                if ftn <= (1.0 - 1e-4 * lambda) * fnorm {
                    u = trial;
                    f = ft;
                    fnorm = ftn;
                    accepted = true;
                    break;
                }
                lambda *= cfg.damping;
            }
            if !accepted {
                break; // stagnation: keep the best iterate
            }
        }
        if fnorm <= cfg.newton_tol * l_scale {
            stage_converged = true;
        }
        converged_all &= stage_converged;
        last_res = fnorm;
    }
    Ok(HomotopyRun { u, iterations: total_iters, residual: last_res, converged: converged_all })
}

/// Smoothed-surrogate solve: the homotopy alone, no exact finishing stage.
/// The result is a deterministic, differentiable function of the data,
/// which is what the descent-based optimizer needs. The nonsmooth
/// inequality is not checked here: `certified` only records that every
/// smoothing stage converged, so a caller differentiating through this
/// solve can trust the adjoint exactly when the flag is set.
pub fn solve_hemivariational_smoothed(
    sys: &FemSystem,
    g: &Field,
    q: &Field,
    alpha: f64,
    j: &Superpotential,
    cfg: &HviSolverConfig,
) -> Result<StateSolution> {
    require_positive_alpha(alpha)?;
    cfg.validate()?;
    let l = load_vector(sys, g, q)?;
    let run = run_homotopy(sys, &l, alpha, j, cfg)?;
    Ok(StateSolution {
        u: Field::new(run.u, FieldRole::State),
        iterations: run.iterations,
        residual_norm: run.residual,
        certified: run.converged,
        alpha: Some(alpha),
    })
}

/// Node regime during the exact finishing stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Regime {
    /// Held at breakpoint k as a Dirichlet constraint; feasibility of the
    /// discrete multiplier against the subdifferential interval is checked
    /// after each solve.
    Pinned(usize),
    /// Moving freely in the open interval between breakpoints k-1 and k
    /// (counting intervals from 0 below the first breakpoint).
    Branch(usize),
}

fn interval_of(bps: &[f64], r: f64) -> usize {
    bps.iter().take_while(|&&p| p < r).count()
}

struct PolishOutcome {
    u: Vec<f64>,
    iterations: usize,
    residual: f64,
    converged: bool,
}

/// Exact semismooth finishing stage at zero smoothing radius. Nodes within
/// `pin_tol` of a breakpoint start pinned there; each pass solves the
/// problem induced by the current regimes (pinned nodes as Dirichlet data,
/// branch nodes with the classical derivative of their smooth piece), then
/// pins nodes that crossed a breakpoint and releases pinned nodes whose
/// multiplier left the subdifferential interval, toward the side whose
/// one-sided slope is nearest the demanded value.
fn polish_exact(
    sys: &FemSystem,
    l: &[f64],
    alpha: f64,
    j: &Superpotential,
    start: Vec<f64>,
    pin_tol: f64,
    cfg: &HviSolverConfig,
) -> Result<PolishOutcome> {
    let l_scale = 1.0 + norm2(l);
    let bps = j.breakpoints();
    let nodes = sys.gamma3_nodes();
    let weights = sys.gamma3_lumped_weights();
    let mut u = start;
    let mut total_iters = 0usize;

    let mut regimes: Vec<Regime> = nodes
        .iter()
        .map(|&i| {
            let r = u[i];
            let nearest = bps
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - r).abs().total_cmp(&(b.1 - r).abs()));
            match nearest {
                Some((k, &p)) if (p - r).abs() <= pin_tol => Regime::Pinned(k),
                _ => Regime::Branch(interval_of(bps, r)),
            }
        })
        .collect();

    let max_passes = 50;
    for _pass in 0..max_passes {
        // snap pinned values so the constrained solve sees exact data
        for (idx, &i) in nodes.iter().enumerate() {
            if let Regime::Pinned(k) = regimes[idx] {
                u[i] = bps[k];
            }
        }
        let pinned: Vec<usize> = nodes
            .iter()
            .zip(&regimes)
            .filter(|(_, r)| matches!(r, Regime::Pinned(_)))
            .map(|(&i, _)| i)
            .collect();
        let free: Vec<usize> = sys
            .free_dofs_v0
            .iter()
            .copied()
            .filter(|i| pinned.binary_search(i).is_err())
            .collect();
        let mut bc = vec![0.0; sys.dof_count];
        for &i in &pinned {
            bc[i] = u[i];
        }
        let branch_nodes: Vec<(usize, f64)> = nodes
            .iter()
            .zip(weights)
            .zip(&regimes)
            .filter(|(_, r)| matches!(r, Regime::Branch(_)))
            .map(|((&i, &w), _)| (i, w))
            .collect();

        // Newton on the regime-induced problem, each step a cold-started
        // linearization  (A + alpha W j'') u = L - alpha W (j'(v) - j''(v) v)
        // so that a fully pinned boundary reduces to the plain constrained
        // solve of the limit problem, arithmetic included.
        let mut pos_of = vec![usize::MAX; sys.dof_count];
        for (pos, &i) in free.iter().enumerate() {
            pos_of[i] = pos;
        }
        let residual_free = |u: &[f64]| -> Vec<f64> {
            let au = sys.stiffness.apply(u);
            let mut f: Vec<f64> = free.iter().map(|&i| au[i] - l[i]).collect();
            for &(i, w) in &branch_nodes {
                f[pos_of[i]] += alpha * w * j.deriv(u[i]);
            }
            f
        };
        let mut inner_converged = false;
        for _ in 0..cfg.max_newton {
            let fnorm = norm2(&residual_free(&u));
            if fnorm <= cfg.newton_tol * l_scale {
                inner_converged = true;
                break;
            }
            if branch_nodes.is_empty() {
                // no branch nodes: the regime problem is linear, one solve
                let (nu, its, _) = solve_constrained(&sys.stiffness, l, &bc, &free, cfg.linear_tol)?;
                u = nu;
                total_iters += its.max(1);
                break;
            }
            let mut rhs = l.to_vec();
            let mut diag_full = vec![0.0; sys.dof_count];
            for &(i, w) in &branch_nodes {
                let slope = j.curvature(u[i]);
                rhs[i] -= alpha * w * (j.deriv(u[i]) - slope * u[i]);
                diag_full[i] = alpha * w * slope;
            }
            let lifted = {
                let mut t: Vec<f64> = sys.stiffness.apply(&bc);
                for (ti, (di, bi)) in t.iter_mut().zip(diag_full.iter().zip(&bc)) {
                    *ti += di * bi;
                }
                t
            };
            let r: Vec<f64> = free.iter().map(|&i| rhs[i] - lifted[i]).collect();
            let reduced = sys.stiffness.restrict(&free);
            let diag_free = reduce(&diag_full, &free);
            let (x, its) =
                solve_spd_plus_diag(&reduced, &diag_free, &r, cfg.linear_tol, cg_cap(free.len()))?;
            total_iters += its.max(1);
            let mut trial = bc.clone();
            for (pos, &i) in free.iter().enumerate() {
                trial[i] = x[pos];
            }
            // damp toward the previous iterate if the full step regressed
            let tn = norm2(&residual_free(&trial));
            if tn <= fnorm || fnorm <= cfg.newton_tol * l_scale {
                u = trial;
            } else {
                let mut lambda = cfg.damping;
                let mut accepted = false;
                for _ in 0..cfg.max_backtracks {
                    let blend: Vec<f64> = u
                        .iter()
                        .zip(&trial)
                        .map(|(a, t)| a + lambda * (t - a))
                        .collect();
                    if norm2(&residual_free(&blend)) < fnorm {
                        u = blend;
                        accepted = true;
                        break;
                    }
                    lambda *= cfg.damping;
                }
                if !accepted {
                    break;
                }
            }
        }
        if norm2(&residual_free(&u)) <= cfg.newton_tol * l_scale {
            inner_converged = true;
        }

        // regime updates
        let au = sys.stiffness.apply(&u);
        let mut changed = false;
        for (idx, &i) in nodes.iter().enumerate() {
            match regimes[idx] {
                Regime::Branch(k) => {
                    let now = interval_of(bps, u[i]);
                    if now != k || bps.iter().any(|&p| p == u[i]) {
                        // crossed at least one breakpoint: pin at the crossed
                        // one nearest the new value
                        let crossed: Vec<usize> = (0..bps.len())
                            .filter(|&m| {
                                let p = bps[m];
                                (k <= m && now > m) || (now <= m && k > m) || p == u[i]
                            })
                            .collect();
                        if let Some(&m) = crossed
                            .iter()
                            .min_by(|&&a, &&b| (bps[a] - u[i]).abs().total_cmp(&(bps[b] - u[i]).abs()))
                        {
                            regimes[idx] = Regime::Pinned(m);
                            changed = true;
                        }
                    }
                }
                Regime::Pinned(k) => {
                    let w = weights[idx];
                    let zeta = (l[i] - au[i]) / (alpha * w);
                    let (lo, hi) = j.clarke_interval(bps[k]);
                    let tolm = 1e-9 * (1.0 + lo.abs() + hi.abs() + zeta.abs());
                    if zeta < lo - tolm || zeta > hi + tolm {
                        let left = j.left_deriv(bps[k]);
                        let right = j.right_deriv(bps[k]);
                        regimes[idx] = if (zeta - left).abs() <= (zeta - right).abs() {
                            Regime::Branch(k)
                        } else {
                            Regime::Branch(k + 1)
                        };
                        changed = true;
                    }
                }
            }
        }
        if !changed && inner_converged {
            let residual = semismooth_residual(sys, &u, l, alpha, j, &regimes);
            return Ok(PolishOutcome { u, iterations: total_iters, residual, converged: true });
        }
    }
    let regimes_now = regimes;
    let residual = semismooth_residual(sys, &u, l, alpha, j, &regimes_now);
    Ok(PolishOutcome { u, iterations: total_iters, residual, converged: false })
}

/// Euclidean norm of the exact nonsmooth residual: equation rows at free
/// and branch dofs, distance of the multiplier to the subdifferential
/// interval at pinned dofs.
fn semismooth_residual(
    sys: &FemSystem,
    u: &[f64],
    l: &[f64],
    alpha: f64,
    j: &Superpotential,
    regimes: &[Regime],
) -> f64 {
    let au = sys.stiffness.apply(u);
    let nodes = sys.gamma3_nodes();
    let weights = sys.gamma3_lumped_weights();
    let mut regime_of = vec![None; sys.dof_count];
    for ((&i, r), &w) in nodes.iter().zip(regimes).zip(weights) {
        regime_of[i] = Some((*r, w));
    }
    let mut sq = 0.0;
    for &i in &sys.free_dofs_v0 {
        let row = match regime_of[i] {
            Some((Regime::Pinned(k), w)) => {
                let zeta = (l[i] - au[i]) / (alpha * w);
                let (lo, hi) = j.clarke_interval(j.breakpoints()[k]);
                alpha * w * (lo - zeta).max(0.0).max(zeta - hi)
            }
            Some((Regime::Branch(_), w)) => au[i] - l[i] + alpha * w * j.deriv(u[i]),
            None => au[i] - l[i],
        };
        sq += row * row;
    }
    sq.sqrt()
}

/// Certification threshold for the sampled inequality residual.
pub fn certification_threshold(l_norm: f64) -> f64 {
    -1e-8 * (1.0 + l_norm)
}

/// Sampled residual of the discrete inequality
/// a(u,v) + alpha sum_i w_i j0(u_i; v_i) >= L(v): evaluated along `trials`
/// seeded random unit-V-norm directions in V0 plus the canonical
/// directions +-phi_i at every Gamma3 node, returning the most negative
/// value found (0 if none are negative).
#[allow(clippy::too_many_arguments)]
pub fn hvi_residual_check(
    sys: &FemSystem,
    u: &Field,
    g: &Field,
    q: &Field,
    alpha: f64,
    j: &Superpotential,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let l = load_vector(sys, g, q)?;
    if u.len() != sys.dof_count {
        return Err(Error::DimensionMismatch { expected: sys.dof_count, got: u.len() });
    }
    let au = sys.stiffness.apply(&u.values);
    let nodes = sys.gamma3_nodes();
    let weights = sys.gamma3_lumped_weights();

    let value_along = |v: &[f64]| -> f64 {
        let mut val = 0.0;
        for i in 0..sys.dof_count {
            val += v[i] * (au[i] - l[i]);
        }
        for (&i, &w) in nodes.iter().zip(weights) {
            val += alpha * w * j.j0(u.values[i], v[i]);
        }
        val
    };

    let mut worst: f64 = 0.0;
    // canonical nodal directions are the binding ones under lumped quadrature
    for &i in nodes {
        for s in [1.0, -1.0] {
            let mut v = vec![0.0; sys.dof_count];
            v[i] = s;
            worst = worst.min(value_along(&v));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let mut v: Vec<f64> = (0..sys.dof_count).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for &i in &sys.dirichlet_g1 {
            v[i] = 0.0;
        }
        let vn = (sys.stiffness.quadratic_form(&v, &v) + sys.mass_domain.quadratic_form(&v, &v))
            .sqrt();
        if vn == 0.0 {
            continue;
        }
        for vi in v.iter_mut() {
            *vi /= vn;
        }
        worst = worst.min(value_along(&v));
    }
    Ok(worst)
}

/// Nonsmooth state solve: smoothing homotopy, exact active-set finish, and
/// certification of the inequality residual.
pub fn solve_hemivariational(
    sys: &FemSystem,
    g: &Field,
    q: &Field,
    alpha: f64,
    j: &Superpotential,
    cfg: &HviSolverConfig,
) -> Result<StateSolution> {
    require_positive_alpha(alpha)?;
    cfg.validate()?;
    let l = load_vector(sys, g, q)?;
    let run = run_homotopy(sys, &l, alpha, j, cfg)?;
    let pin_tol = *cfg.epsilon_schedule.last().unwrap();
    let polish = polish_exact(sys, &l, alpha, j, run.u, pin_tol, cfg)?;
    let u = Field::new(polish.u, FieldRole::State);
    let worst = hvi_residual_check(sys, &u, g, q, alpha, j, cfg.cert_trials, cfg.cert_seed)?;
    let certified = polish.converged && worst >= certification_threshold(norm2(&l));
    Ok(StateSolution {
        u,
        iterations: run.iterations + polish.iterations,
        residual_norm: polish.residual,
        certified,
        alpha: Some(alpha),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble, norm, NormKind};
    use crate::mesh::{generate_unit_square, TaggingScheme};
    use approx::assert_abs_diff_eq;

    fn unit_sys(n: usize) -> FemSystem {
        assemble(&generate_unit_square(n, TaggingScheme::default()).unwrap()).unwrap()
    }

    fn zeros(sys: &FemSystem, role: FieldRole) -> Field {
        Field::zeros(sys.dof_count, role)
    }

    fn diff_norm(sys: &FemSystem, a: &Field, b: &Field, kind: NormKind) -> f64 {
        let d = Field::new(
            a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect(),
            FieldRole::State,
        );
        norm(sys, &d, kind)
    }

    #[test]
    fn limit_problem_with_zero_data_is_zero() {
        let sys = unit_sys(4);
        let sol = solve_mixed_dirichlet(&sys, &zeros(&sys, FieldRole::Control), &zeros(&sys, FieldRole::Flux), 0.0)
            .unwrap();
        assert!(sol.u.values.iter().all(|&v| v == 0.0));
        assert!(sol.certified);
        assert!(sol.alpha.is_none());
    }

    #[test]
    fn limit_problem_reproduces_linear_profile() {
        let sys = unit_sys(8);
        let sol = solve_mixed_dirichlet(&sys, &zeros(&sys, FieldRole::Control), &zeros(&sys, FieldRole::Flux), 1.0)
            .unwrap();
        for (v, p) in sol.u.values.iter().zip(&sys.mesh.vertices) {
            assert!((v - p[0]).abs() <= 1e-10, "u({}, {}) = {v}", p[0], p[1]);
        }
    }

    #[test]
    fn robin_solves_hit_the_closed_form_profile() {
        let sys = unit_sys(8);
        let g = zeros(&sys, FieldRole::Control);
        let q = zeros(&sys, FieldRole::Flux);
        for alpha in [1.0, 10.0, 100.0] {
            let c = 2.0 * alpha / (1.0 + 2.0 * alpha);
            for sol in [
                solve_robin(&sys, &g, &q, alpha, 1.0).unwrap(),
                solve_robin_lumped(&sys, &g, &q, alpha, 1.0).unwrap(),
            ] {
                for (v, p) in sol.u.values.iter().zip(&sys.mesh.vertices) {
                    assert!(
                        (v - c * p[0]).abs() <= 1e-9,
                        "alpha={alpha}: u({},{}) = {v}, want {}",
                        p[0],
                        p[1],
                        c * p[0]
                    );
                }
            }
        }
    }

    #[test]
    fn quadratic_well_solve_matches_lumped_robin() {
        let sys = unit_sys(8);
        let g = Field::from_fn(&sys.mesh, FieldRole::Control, |x, y| (3.0 * x).sin() + y);
        let q = Field::from_fn(&sys.mesh, FieldRole::Flux, |x, _| 0.3 * x);
        let alpha = 7.0;
        let b = 0.8;
        let j = Superpotential::quadratic_well(b);
        let cfg = HviSolverConfig::default();
        let hvi = solve_hemivariational(&sys, &g, &q, alpha, &j, &cfg).unwrap();
        let robin = solve_robin_lumped(&sys, &g, &q, alpha, b).unwrap();
        let err = diff_norm(&sys, &hvi.u, &robin.u, NormKind::V);
        assert!(err <= 1e-8 * (1.0 + norm(&sys, &robin.u, NormKind::V)), "gap {err}");
        assert!(hvi.certified);
    }

    #[test]
    fn abs_well_with_zero_data_certifies_zero_state() {
        let sys = unit_sys(4);
        let j = Superpotential::abs_well(0.0);
        let sol = solve_hemivariational(
            &sys,
            &zeros(&sys, FieldRole::Control),
            &zeros(&sys, FieldRole::Flux),
            3.0,
            &j,
            &HviSolverConfig::default(),
        )
        .unwrap();
        assert!(sol.u.values.iter().all(|&v| v.abs() <= 1e-12));
        assert!(sol.certified);
    }

    #[test]
    fn saturated_kinked_solve_reproduces_the_limit_solution_exactly() {
        // once every boundary multiplier fits inside the subdifferential at
        // b, the pinned solve and the limit solve are the same arithmetic
        let sys = unit_sys(8);
        let g = zeros(&sys, FieldRole::Control);
        let q = zeros(&sys, FieldRole::Flux);
        let b = 2.0;
        let j = Superpotential::kinked_well(b);
        let hvi = solve_hemivariational(&sys, &g, &q, 1e4, &j, &HviSolverConfig::default()).unwrap();
        let limit = solve_mixed_dirichlet(&sys, &g, &q, b).unwrap();
        assert_eq!(hvi.u.values, limit.u.values);
        assert!(hvi.certified);
    }

    #[test]
    fn unsaturated_kinked_solve_picks_the_interior_branch() {
        // alpha = 1, b = 2: the flux balance admits u = x/2 on the branch
        // with slope -1/2; the solver lands there deterministically
        let sys = unit_sys(8);
        let g = zeros(&sys, FieldRole::Control);
        let q = zeros(&sys, FieldRole::Flux);
        let j = Superpotential::kinked_well(2.0);
        let sol = solve_hemivariational(&sys, &g, &q, 1.0, &j, &HviSolverConfig::default()).unwrap();
        for (v, p) in sol.u.values.iter().zip(&sys.mesh.vertices) {
            assert!((v - 0.5 * p[0]).abs() <= 1e-9, "u({},{}) = {v}", p[0], p[1]);
        }
        assert!(sol.certified);
    }

    #[test]
    fn dirichlet_limit_ordering_over_alpha() {
        let sys = unit_sys(8);
        let g = Field::constant(sys.dof_count, 0.5, FieldRole::Control);
        let q = zeros(&sys, FieldRole::Flux);
        let b = 1.0;
        let j = Superpotential::quadratic_well(b);
        let limit = solve_mixed_dirichlet(&sys, &g, &q, b).unwrap();
        let mut prev = f64::INFINITY;
        for alpha in [1.0, 10.0, 100.0, 1000.0, 1e4] {
            let sol = solve_hemivariational(&sys, &g, &q, alpha, &j, &HviSolverConfig::default())
                .unwrap();
            let err = diff_norm(&sys, &sol.u, &limit.u, NormKind::V);
            assert!(err <= prev, "error grew at alpha={alpha}: {err} > {prev}");
            prev = err;
        }
    }

    #[test]
    fn residual_check_flags_perturbed_states() {
        let sys = unit_sys(8);
        let g = zeros(&sys, FieldRole::Control);
        let q = zeros(&sys, FieldRole::Flux);
        let b = 1.0;
        let alpha = 5.0;
        let j = Superpotential::quadratic_well(b);
        let sol = solve_robin_lumped(&sys, &g, &q, alpha, b).unwrap();
        let clean = hvi_residual_check(&sys, &sol.u, &g, &q, alpha, &j, 32, 0).unwrap();
        assert!(clean >= certification_threshold(1.0), "clean state violated: {clean}");

        let mut bad = sol.u.clone();
        let interior = sys.free_dofs_k0
            .iter()
            .copied()
            .find(|&i| {
                let p = sys.mesh.vertices[i];
                p[0] > 0.2 && p[0] < 0.8 && p[1] > 0.2 && p[1] < 0.8
            })
            .unwrap();
        bad.values[interior] += 0.1;
        let worst = hvi_residual_check(&sys, &bad, &g, &q, alpha, &j, 32, 0).unwrap();
        assert!(worst < -1e-3, "perturbation not detected: {worst}");
    }

    #[test]
    fn alpha_must_be_positive() {
        let sys = unit_sys(2);
        let g = zeros(&sys, FieldRole::Control);
        let q = zeros(&sys, FieldRole::Flux);
        let j = Superpotential::abs_well(0.0);
        assert!(solve_robin(&sys, &g, &q, 0.0, 1.0).is_err());
        assert!(solve_hemivariational(&sys, &g, &q, -1.0, &j, &HviSolverConfig::default()).is_err());
    }

    #[test]
    fn epsilon_schedule_is_validated() {
        let mut cfg = HviSolverConfig::default();
        cfg.epsilon_schedule = vec![1e-2, 1e-1];
        assert!(cfg.validate().is_err());
        cfg.epsilon_schedule = vec![1e-1, 0.0];
        assert!(cfg.validate().is_err());
        cfg.epsilon_schedule = vec![];
        assert!(cfg.validate().is_err());
    }
}
