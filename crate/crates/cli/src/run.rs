//! Command execution: build the discrete problem a config describes, run
//! the matching solver, write the artifacts.
//!
//! Error class determines the exit code. Anything wrong with the inputs,
//! including values a command requires but the file omits, is a config
//! error; solver and I/O breakdowns are run errors; a finished run whose
//! certification or hypothesis check fails keeps its artifacts on disk and
//! reports a certification error.

use crate::config::{RunConfig, WallTimePolicy};
use crate::output::{
    fmt_sig, render_loglog_svg, render_result_csv, render_summary, render_sweep_csv,
    write_text_file, Series,
};
use crate::CliError;
use hemicontrol_core::{
    assemble, certification_threshold, estimate_coercivity, estimate_trace_norm,
    generate_unit_square, gradient_alpha_smoothed, gradient_limit, hvi_residual_check,
    load_vector, norm, recertify, smallness_check, solve_hemivariational,
    solve_mixed_dirichlet, solve_optimal_control_alpha, solve_optimal_control_limit,
    sweep_control, sweep_state, ControlProblem, FemSystem, Field, FieldRole, FieldSpec,
    NormKind, SamplingGrid, StateSolution, Superpotential, SweepRecord, TaggingScheme,
};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    SolveState,
    SolveHvi,
    OptimizeLimit,
    OptimizeAlpha,
    SweepState,
    SweepControl,
    VerifyJ,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::SolveState => "solve-state",
            Command::SolveHvi => "solve-hvi",
            Command::OptimizeLimit => "optimize-limit",
            Command::OptimizeAlpha => "optimize-alpha",
            Command::SweepState => "sweep-state",
            Command::SweepControl => "sweep-control",
            Command::VerifyJ => "verify-j",
        }
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub files: Vec<&'static str>,
    /// One line for standard output.
    pub headline: String,
}

fn run_err(e: hemicontrol_core::Error) -> CliError {
    CliError::Run(e.to_string())
}

fn cfg_err(e: hemicontrol_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

/// Load the config at `config_path` and execute `cmd` against it.
pub fn execute(
    cmd: Command,
    config_path: &Path,
    out_override: Option<&Path>,
) -> Result<RunOutcome, CliError> {
    let cfg = RunConfig::load(config_path)?;
    execute_with(cmd, &cfg, out_override)
}

/// Execute against an already-parsed config (tests drive this directly).
pub fn execute_with(
    cmd: Command,
    cfg: &RunConfig,
    out_override: Option<&Path>,
) -> Result<RunOutcome, CliError> {
    let mesh = generate_unit_square(cfg.mesh_n, TaggingScheme::default()).map_err(cfg_err)?;
    let sys = assemble(&mesh).map_err(cfg_err)?;
    let out_dir = out_override.map(Path::to_path_buf).unwrap_or_else(|| cfg.out_dir.clone());
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Run(format!("cannot create {}: {e}", out_dir.display())))?;
    let j = cfg.superpotential();
    let mut ctx = Ctx { cfg, sys: &sys, j, out_dir, files: Vec::new() };
    match cmd {
        Command::SolveState => ctx.solve_state(),
        Command::SolveHvi => ctx.solve_hvi(),
        Command::OptimizeLimit => ctx.optimize_limit(),
        Command::OptimizeAlpha => ctx.optimize_alpha(),
        Command::SweepState => ctx.sweep_state_cmd(),
        Command::SweepControl => ctx.sweep_control_cmd(),
        Command::VerifyJ => ctx.verify_j(),
    }
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    sys: &'a FemSystem,
    j: Superpotential,
    out_dir: PathBuf,
    files: Vec<&'static str>,
}

impl<'a> Ctx<'a> {
    fn write(&mut self, name: &'static str, content: &str) -> Result<(), CliError> {
        write_text_file(&self.out_dir.join(name), content)?;
        self.files.push(name);
        Ok(())
    }

    fn outcome(&self, headline: String) -> RunOutcome {
        RunOutcome { out_dir: self.out_dir.clone(), files: self.files.clone(), headline }
    }

    /// A data field a command cannot run without.
    fn need_field(&self, spec: &Option<FieldSpec>, key: &str, cmd: Command) -> Result<Field, CliError> {
        let role = match key {
            "data.q" => FieldRole::Flux,
            "data.z_d" => FieldRole::Target,
            _ => FieldRole::Control,
        };
        match spec {
            Some(s) => Ok(s.instantiate(&self.sys.mesh, role)),
            None => Err(CliError::Config(format!(
                "config key `{key}` is required for {}",
                cmd.name()
            ))),
        }
    }

    fn need_alpha(&self, cmd: Command) -> Result<f64, CliError> {
        self.cfg.alpha.ok_or_else(|| {
            CliError::Config(format!(
                "config key `experiment.alpha` is required for {}",
                cmd.name()
            ))
        })
    }

    fn need_alpha_list(&self, cmd: Command) -> Result<&[f64], CliError> {
        self.cfg.alpha_list.as_deref().ok_or_else(|| {
            CliError::Config(format!(
                "config key `experiment.alpha_list` is required for {}",
                cmd.name()
            ))
        })
    }

    fn need_m(&self, cmd: Command) -> Result<f64, CliError> {
        self.cfg.m.ok_or_else(|| {
            CliError::Config(format!("config key `experiment.m` is required for {}", cmd.name()))
        })
    }

    fn control_problem(&self, cmd: Command) -> Result<(ControlProblem<'a>, f64), CliError> {
        let q = self.need_field(&self.cfg.q, "data.q", cmd)?;
        let z_d = self.need_field(&self.cfg.z_d, "data.z_d", cmd)?;
        let m = self.need_m(cmd)?;
        let cp = ControlProblem::new(self.sys, z_d, m, q, self.cfg.b).map_err(cfg_err)?;
        Ok((cp, m))
    }

    fn sampling_grid(&self) -> SamplingGrid {
        SamplingGrid {
            r_min: self.cfg.r_min,
            r_max: self.cfg.r_max,
            samples: self.cfg.samples,
            pair_samples: self.cfg.pair_samples,
            seed: self.cfg.seed,
        }
    }

    fn thread_pool(&self) -> Result<rayon::ThreadPool, CliError> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.cfg.threads)
            .build()
            .map_err(|e| CliError::Run(format!("cannot build thread pool: {e}")))
    }

    /// Coercivity constants, trace norm, the relaxed-monotonicity constant,
    /// and the uniqueness-regime verdict per listed alpha.
    fn constants_block(&self, alphas: &[f64]) -> Result<Vec<String>, CliError> {
        let (m_a, big_m_a) = estimate_coercivity(self.sys).map_err(run_err)?;
        let trace = estimate_trace_norm(self.sys).map_err(run_err)?;
        let (m_j, m_j_source) = match self.j.declared_m_j() {
            Some(v) => (v, "declared"),
            None => {
                let report = self.j.verify_hypotheses(&self.sampling_grid()).map_err(run_err)?;
                (report.m_j_estimate, "sampled")
            }
        };
        let mut lines = vec![
            format!("constants.m_a = {}", fmt_sig(m_a)),
            format!("constants.M_a = {}", fmt_sig(big_m_a)),
            format!("constants.trace_norm = {}", fmt_sig(trace)),
            format!("constants.m_j = {} ({m_j_source})", fmt_sig(m_j)),
        ];
        if m_j > 0.0 {
            lines.push(format!(
                "smallness.alpha_bound = {}",
                fmt_sig(m_a / (m_j * trace * trace))
            ));
        } else {
            lines.push("smallness.alpha_bound = inf".to_string());
        }
        for (k, &a) in alphas.iter().enumerate() {
            lines.push(format!("smallness.{k}.alpha = {}", fmt_sig(a)));
            lines.push(format!(
                "smallness.{k}.satisfied = {}",
                smallness_check(m_a, a, m_j, trace)
            ));
        }
        Ok(lines)
    }

    fn state_block(&self, prefix: &str, sol: &StateSolution) -> Vec<String> {
        vec![
            format!("{prefix}.u_norm_H = {}", fmt_sig(norm(self.sys, &sol.u, NormKind::H))),
            format!("{prefix}.u_norm_V = {}", fmt_sig(norm(self.sys, &sol.u, NormKind::V))),
            format!("{prefix}.iterations = {}", sol.iterations),
            format!("{prefix}.residual_norm = {}", fmt_sig(sol.residual_norm)),
            format!("{prefix}.certified = {}", sol.certified),
        ]
    }

    fn header_block(&self, cmd: Command) -> Vec<String> {
        vec![
            format!("command = {}", cmd.name()),
            format!("mesh.n = {}", self.cfg.mesh_n),
            format!("mesh.dofs = {}", self.sys.dof_count),
            format!("j.kind = {}", self.j.label()),
            format!("data.b = {}", fmt_sig(self.cfg.b)),
            format!("run.seed = {}", self.cfg.seed),
        ]
    }

    fn solve_state(&mut self) -> Result<RunOutcome, CliError> {
        let cmd = Command::SolveState;
        let g = self.need_field(&self.cfg.g, "data.g", cmd)?;
        let q = self.need_field(&self.cfg.q, "data.q", cmd)?;
        let sol = solve_mixed_dirichlet(self.sys, &g, &q, self.cfg.b).map_err(run_err)?;
        let zeros = vec![0.0; self.sys.dof_count];
        self.write(
            "result.csv",
            &render_result_csv(&self.cfg.hash, &self.sys.mesh, &sol.u.values, &g.values, &zeros),
        )?;
        let mut lines = self.header_block(cmd);
        lines.extend(self.state_block("state", &sol));
        let alphas: Vec<f64> = self.cfg.alpha.into_iter().collect();
        lines.extend(self.constants_block(&alphas)?);
        self.write("summary.txt", &render_summary(&self.cfg.hash, &lines))?;
        let u_v = norm(self.sys, &sol.u, NormKind::V);
        Ok(self.outcome(format!("solve-state: |u|_V = {}", fmt_sig(u_v))))
    }

    fn solve_hvi(&mut self) -> Result<RunOutcome, CliError> {
        let cmd = Command::SolveHvi;
        let g = self.need_field(&self.cfg.g, "data.g", cmd)?;
        let q = self.need_field(&self.cfg.q, "data.q", cmd)?;
        let alpha = self.need_alpha(cmd)?;
        let sol =
            solve_hemivariational(self.sys, &g, &q, alpha, &self.j, &self.cfg.solver)
                .map_err(run_err)?;
        let worst = hvi_residual_check(
            self.sys,
            &sol.u,
            &g,
            &q,
            alpha,
            &self.j,
            self.cfg.solver.cert_trials,
            self.cfg.solver.cert_seed,
        )
        .map_err(run_err)?;
        let l = load_vector(self.sys, &g, &q).map_err(run_err)?;
        let l_norm = l.iter().map(|x| x * x).sum::<f64>().sqrt();
        let threshold = certification_threshold(l_norm);

        let zeros = vec![0.0; self.sys.dof_count];
        self.write(
            "result.csv",
            &render_result_csv(&self.cfg.hash, &self.sys.mesh, &sol.u.values, &g.values, &zeros),
        )?;
        let mut lines = self.header_block(cmd);
        lines.push(format!("experiment.alpha = {}", fmt_sig(alpha)));
        lines.extend(self.state_block("state", &sol));
        lines.push(format!("cert.worst_violation = {}", fmt_sig(worst)));
        lines.push(format!("cert.threshold = {}", fmt_sig(threshold)));
        lines.extend(self.constants_block(&[alpha])?);
        self.write("summary.txt", &render_summary(&self.cfg.hash, &lines))?;

        if !sol.certified {
            return Err(CliError::Certification(format!(
                "state at alpha = {alpha} did not certify: worst violation {}, threshold {}, \
                 final residual {} (artifacts in {})",
                fmt_sig(worst),
                fmt_sig(threshold),
                fmt_sig(sol.residual_norm),
                self.out_dir.display()
            )));
        }
        let u_v = norm(self.sys, &sol.u, NormKind::V);
        Ok(self.outcome(format!("solve-hvi: |u|_V = {}, certified", fmt_sig(u_v))))
    }

    fn optimize_limit(&mut self) -> Result<RunOutcome, CliError> {
        let cmd = Command::OptimizeLimit;
        let (cp, m) = self.control_problem(cmd)?;
        let pair = solve_optimal_control_limit(&cp, self.cfg.opt.tol).map_err(run_err)?;
        let (grad, _, _) = gradient_limit(&cp, &pair.g_opt).map_err(run_err)?;
        // adjoint = reduced gradient minus the control term
        let p: Vec<f64> =
            grad.values.iter().zip(&pair.g_opt.values).map(|(gr, gi)| gr - m * gi).collect();
        self.write(
            "result.csv",
            &render_result_csv(
                &self.cfg.hash,
                &self.sys.mesh,
                &pair.u_opt.u.values,
                &pair.g_opt.values,
                &p,
            ),
        )?;
        let mut lines = self.header_block(cmd);
        lines.push(format!("experiment.m = {}", fmt_sig(m)));
        lines.push(format!("control.cost = {}", fmt_sig(pair.cost)));
        lines.push(format!("control.grad_norm_H = {}", fmt_sig(pair.grad_norm)));
        lines.push(format!("control.iterations = {}", pair.iterations));
        lines.push(format!(
            "control.g_norm_H = {}",
            fmt_sig(norm(self.sys, &pair.g_opt, NormKind::H))
        ));
        lines.extend(self.state_block("state", &pair.u_opt));
        lines.extend(self.constants_block(&[])?);
        self.write("summary.txt", &render_summary(&self.cfg.hash, &lines))?;
        Ok(self.outcome(format!("optimize-limit: cost = {}", fmt_sig(pair.cost))))
    }

    fn optimize_alpha(&mut self) -> Result<RunOutcome, CliError> {
        let cmd = Command::OptimizeAlpha;
        let (cp, m) = self.control_problem(cmd)?;
        let alpha = self.need_alpha(cmd)?;
        let pair = solve_optimal_control_alpha(&cp, alpha, &self.j, &self.cfg.solver, &self.cfg.opt)
            .map_err(run_err)?;
        let worst = recertify(&cp, alpha, &self.j, &pair, &self.cfg.solver).map_err(run_err)?;
        let (grad, _, _) =
            gradient_alpha_smoothed(&cp, alpha, &self.j, &pair.g_opt, &self.cfg.solver)
                .map_err(run_err)?;
        let p: Vec<f64> =
            grad.values.iter().zip(&pair.g_opt.values).map(|(gr, gi)| gr - m * gi).collect();
        self.write(
            "result.csv",
            &render_result_csv(
                &self.cfg.hash,
                &self.sys.mesh,
                &pair.u_opt.u.values,
                &pair.g_opt.values,
                &p,
            ),
        )?;
        let l = load_vector(self.sys, &pair.g_opt, &cp.q).map_err(run_err)?;
        let threshold = certification_threshold(l.iter().map(|x| x * x).sum::<f64>().sqrt());
        let mut lines = self.header_block(cmd);
        lines.push(format!("experiment.alpha = {}", fmt_sig(alpha)));
        lines.push(format!("experiment.m = {}", fmt_sig(m)));
        lines.push(format!("control.cost = {}", fmt_sig(pair.cost)));
        lines.push(format!("control.grad_norm_H = {}", fmt_sig(pair.grad_norm)));
        lines.push(format!("control.iterations = {}", pair.iterations));
        lines.push(format!(
            "control.g_norm_H = {}",
            fmt_sig(norm(self.sys, &pair.g_opt, NormKind::H))
        ));
        lines.extend(self.state_block("state", &pair.u_opt));
        lines.push(format!("cert.worst_violation = {}", fmt_sig(worst)));
        lines.push(format!("cert.threshold = {}", fmt_sig(threshold)));
        lines.extend(self.constants_block(&[alpha])?);
        self.write("summary.txt", &render_summary(&self.cfg.hash, &lines))?;

        if !pair.u_opt.certified {
            return Err(CliError::Certification(format!(
                "optimal state at alpha = {alpha} failed the inequality check (artifacts in {})",
                self.out_dir.display()
            )));
        }
        Ok(self.outcome(format!("optimize-alpha: cost = {}", fmt_sig(pair.cost))))
    }

    fn apply_wall_policy(&self, records: &mut [SweepRecord]) {
        if self.cfg.wall_time == WallTimePolicy::Zero {
            for r in records {
                r.wall_time_s = 0.0;
            }
        }
    }

    fn monotonicity_block(prefix: &str, errs: &[f64]) -> Vec<String> {
        let finite: Vec<f64> = errs.iter().copied().filter(|e| e.is_finite()).collect();
        let ratio = if finite.first().is_some_and(|&e0| e0 > 0.0) {
            finite.last().unwrap() / finite[0]
        } else {
            f64::NAN
        };
        vec![
            format!(
                "{prefix}.nonincreasing = {}",
                hemicontrol_core::nonincreasing(&finite)
            ),
            format!(
                "{prefix}.strictly_decreasing = {}",
                hemicontrol_core::strictly_decreasing(&finite)
            ),
            format!("{prefix}.final_over_initial = {}", fmt_sig(ratio)),
        ]
    }

    fn exponent_line(prefix: &str, e: Option<f64>) -> String {
        match e {
            Some(v) => format!("{prefix}.exponent = {}", fmt_sig(v)),
            None => format!("{prefix}.exponent = none"),
        }
    }

    fn sweep_state_cmd(&mut self) -> Result<RunOutcome, CliError> {
        let cmd = Command::SweepState;
        let g = self.need_field(&self.cfg.g, "data.g", cmd)?;
        let q = self.need_field(&self.cfg.q, "data.q", cmd)?;
        let alphas = self.need_alpha_list(cmd)?.to_vec();
        let pool = self.thread_pool()?;
        let sweep = pool
            .install(|| sweep_state(self.sys, &g, &q, self.cfg.b, &alphas, &self.j, &self.cfg.solver))
            .map_err(run_err)?;

        let mut records: Vec<SweepRecord> = sweep
            .records
            .iter()
            .map(|r| SweepRecord {
                alpha: r.alpha,
                state_err_v: r.err_v,
                control_err_h: 0.0,
                cost_gap: 0.0,
                certified: r.certified,
                wall_time_s: r.wall_time_s,
            })
            .collect();
        self.apply_wall_policy(&mut records);
        self.write("sweep.csv", &render_sweep_csv(&self.cfg.hash, &records))?;

        let zeros = vec![0.0; self.sys.dof_count];
        self.write(
            "result.csv",
            &render_result_csv(
                &self.cfg.hash,
                &self.sys.mesh,
                &sweep.limit.u.values,
                &g.values,
                &zeros,
            ),
        )?;

        let errs: Vec<f64> = sweep.records.iter().map(|r| r.err_v).collect();
        let uncertified: Vec<String> = sweep
            .records
            .iter()
            .filter(|r| !r.certified)
            .map(|r| fmt_sig(r.alpha))
            .collect();
        let mut lines = self.header_block(cmd);
        lines.push(format!(
            "experiment.alpha_list = {}",
            alphas.iter().map(|a| fmt_sig(*a)).collect::<Vec<_>>().join(",")
        ));
        lines.extend(Self::monotonicity_block("sweep.state_err_V", &errs));
        lines.push(Self::exponent_line("sweep.state_err_V", sweep.exponent));
        lines.push(format!("sweep.uncertified_count = {}", uncertified.len()));
        if !uncertified.is_empty() {
            lines.push(format!("sweep.uncertified_alphas = {}", uncertified.join(",")));
        }
        lines.extend(self.state_block("limit", &sweep.limit));
        lines.extend(self.constants_block(&alphas)?);
        self.write("summary.txt", &render_summary(&self.cfg.hash, &lines))?;

        if self.cfg.plot {
            let pts: Vec<(f64, f64)> =
                sweep.records.iter().map(|r| (r.alpha, r.err_v)).collect();
            let series = [Series { label: "state_err_V", color: "#1f77b4", points: &pts }];
            if let Some(svg) = render_loglog_svg(&self.cfg.hash, "state error vs alpha", &series) {
                self.write("plot.svg", &svg)?;
            }
        }
        Ok(self.outcome(format!(
            "sweep-state: {} alphas, exponent = {}",
            sweep.records.len(),
            sweep.exponent.map(fmt_sig).unwrap_or_else(|| "none".into())
        )))
    }

    fn sweep_control_cmd(&mut self) -> Result<RunOutcome, CliError> {
        let cmd = Command::SweepControl;
        let (cp, m) = self.control_problem(cmd)?;
        let alphas = self.need_alpha_list(cmd)?.to_vec();
        let pool = self.thread_pool()?;
        let sweep = pool
            .install(|| sweep_control(&cp, &alphas, &self.j, &self.cfg.solver, &self.cfg.opt))
            .map_err(run_err)?;

        let mut records = sweep.records.clone();
        self.apply_wall_policy(&mut records);
        self.write("sweep.csv", &render_sweep_csv(&self.cfg.hash, &records))?;

        let (grad, _, _) = gradient_limit(&cp, &sweep.limit.g_opt).map_err(run_err)?;
        let p: Vec<f64> = grad
            .values
            .iter()
            .zip(&sweep.limit.g_opt.values)
            .map(|(gr, gi)| gr - m * gi)
            .collect();
        self.write(
            "result.csv",
            &render_result_csv(
                &self.cfg.hash,
                &self.sys.mesh,
                &sweep.limit.u_opt.u.values,
                &sweep.limit.g_opt.values,
                &p,
            ),
        )?;

        let state_errs: Vec<f64> = sweep.records.iter().map(|r| r.state_err_v).collect();
        let control_errs: Vec<f64> = sweep.records.iter().map(|r| r.control_err_h).collect();
        let mut lines = self.header_block(cmd);
        lines.push(format!("experiment.m = {}", fmt_sig(m)));
        lines.push(format!(
            "experiment.alpha_list = {}",
            alphas.iter().map(|a| fmt_sig(*a)).collect::<Vec<_>>().join(",")
        ));
        lines.extend(Self::monotonicity_block("sweep.state_err_V", &state_errs));
        lines.push(Self::exponent_line("sweep.state_err_V", sweep.exponent_state));
        lines.extend(Self::monotonicity_block("sweep.control_err_H", &control_errs));
        lines.push(Self::exponent_line("sweep.control_err_H", sweep.exponent_control));
        if let Some(last) = sweep.records.last() {
            lines.push(format!("sweep.final_cost_gap = {}", fmt_sig(last.cost_gap)));
        }
        lines.push(format!("limit.cost = {}", fmt_sig(sweep.limit.cost)));
        lines.push(format!("limit.grad_norm_H = {}", fmt_sig(sweep.limit.grad_norm)));
        // a descent-based inner optimizer may settle on a local minimizer
        // for a nonconvex well, so decreasing errors here are evidence of
        // convergence to the limit pair, not a proof of global optimality
        lines.push("sweep.optimizer = multistart gradient descent (local)".to_string());
        lines.push(format!("sweep.failures = {}", sweep.failures.len()));
        for (k, (a, msg)) in sweep.failures.iter().enumerate() {
            lines.push(format!("sweep.failure.{k} = alpha {}: {msg}", fmt_sig(*a)));
        }
        lines.extend(self.constants_block(&alphas)?);
        self.write("summary.txt", &render_summary(&self.cfg.hash, &lines))?;

        if self.cfg.plot {
            let spts: Vec<(f64, f64)> =
                sweep.records.iter().map(|r| (r.alpha, r.state_err_v)).collect();
            let cpts: Vec<(f64, f64)> =
                sweep.records.iter().map(|r| (r.alpha, r.control_err_h)).collect();
            let series = [
                Series { label: "state_err_V", color: "#1f77b4", points: &spts },
                Series { label: "control_err_H", color: "#d62728", points: &cpts },
            ];
            if let Some(svg) =
                render_loglog_svg(&self.cfg.hash, "convergence to the limit pair", &series)
            {
                self.write("plot.svg", &svg)?;
            }
        }
        Ok(self.outcome(format!(
            "sweep-control: {} alphas, {} failure(s)",
            sweep.records.len(),
            sweep.failures.len()
        )))
    }

    fn verify_j(&mut self) -> Result<RunOutcome, CliError> {
        let cmd = Command::VerifyJ;
        let alpha = self.need_alpha(cmd)?;
        let report = self.j.verify_hypotheses(&self.sampling_grid()).map_err(run_err)?;
        let mut lines = self.header_block(cmd);
        lines.push(format!("experiment.alpha = {}", fmt_sig(alpha)));
        lines.push(format!("grid.r_min = {}", fmt_sig(self.cfg.r_min)));
        lines.push(format!("grid.r_max = {}", fmt_sig(self.cfg.r_max)));
        lines.push(format!("grid.samples = {}", self.cfg.samples));
        lines.push(format!("grid.pair_samples = {}", self.cfg.pair_samples));
        lines.push(format!("hypotheses.growth_margin = {}", fmt_sig(report.growth_margin)));
        lines.push(format!(
            "hypotheses.growth_violations = {}",
            report.growth_violations.len()
        ));
        lines.push(format!("hypotheses.d_worst = {}", fmt_sig(report.d_worst)));
        lines.push(format!("hypotheses.d_violations = {}", report.d_violations.len()));
        lines.push(format!("hypotheses.h1_margin = {}", fmt_sig(report.h1_margin)));
        lines.push(format!("hypotheses.h1_violations = {}", report.h1_violations.len()));
        lines.push(format!("hypotheses.m_j_estimate = {}", fmt_sig(report.m_j_estimate)));
        lines.push(format!("hypotheses.passes = {}", report.passes()));
        lines.extend(self.constants_block(&[alpha])?);
        self.write("summary.txt", &render_summary(&self.cfg.hash, &lines))?;

        if !report.passes() {
            let total = report.growth_violations.len()
                + report.d_violations.len()
                + report.h1_violations.len();
            return Err(CliError::Certification(format!(
                "superpotential `{}` violated the structural hypotheses at {total} sample(s) \
                 (summary in {})",
                self.j.label(),
                self.out_dir.display()
            )));
        }
        Ok(self.outcome(format!("verify-j: {} passes on [{}, {}]", self.j.label(), self.cfg.r_min, self.cfg.r_max)))
    }
}
