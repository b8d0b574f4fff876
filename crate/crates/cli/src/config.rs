//! Flat `section.key = value` run configuration.
//!
//! The format is a plain text file: one assignment per line, `#` starts a
//! comment line, blank lines are ignored. Parsing is strict: unknown keys,
//! duplicate keys, and malformed values are rejected with the offending
//! line number. The SHA-256 of the raw file bytes is kept and stamped into
//! every output file so artifacts can be traced back to their inputs.

use crate::CliError;
use hemicontrol_core::{FieldSpec, HviSolverConfig, OptimizerConfig, Superpotential};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Version string stamped into every output file.
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Every key the format accepts; anything else is a config error.
const KNOWN_KEYS: &[&str] = &[
    "mesh.n",
    "mesh.tagging",
    "data.g",
    "data.q",
    "data.b",
    "data.z_d",
    "j.kind",
    "j.b",
    "solver.epsilon_schedule",
    "solver.newton_tol",
    "solver.max_newton",
    "solver.linear_tol",
    "solver.damping",
    "solver.max_backtracks",
    "solver.cert_trials",
    "opt.tol",
    "opt.max_iters",
    "opt.armijo_c",
    "experiment.alpha",
    "experiment.alpha_list",
    "experiment.m",
    "experiment.samples",
    "experiment.pair_samples",
    "experiment.r_min",
    "experiment.r_max",
    "run.seed",
    "run.threads",
    "output.dir",
    "output.wall_time",
    "output.plot",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WellKind {
    Quadratic,
    Abs,
    Kinked,
}

/// Whether sweep rows carry measured wall times or zeros. Zeros keep
/// repeated runs byte-identical, which is the default contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WallTimePolicy {
    Zero,
    Measure,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mesh_n: usize,
    pub g: Option<FieldSpec>,
    pub q: Option<FieldSpec>,
    pub z_d: Option<FieldSpec>,
    pub b: f64,
    pub j_kind: WellKind,
    pub solver: HviSolverConfig,
    pub opt: OptimizerConfig,
    pub alpha: Option<f64>,
    pub alpha_list: Option<Vec<f64>>,
    pub m: Option<f64>,
    pub samples: usize,
    pub pair_samples: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub seed: u64,
    pub threads: usize,
    pub out_dir: PathBuf,
    pub wall_time: WallTimePolicy,
    pub plot: bool,
    /// Lowercase hex SHA-256 of the raw config bytes.
    pub hash: String,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let bytes = std::fs::read(path).map_err(|e| {
            CliError::Config(format!("cannot read config file {}: {e}", path.display()))
        })?;
        let text = String::from_utf8(bytes)
            .map_err(|_| CliError::Config(format!("{} is not UTF-8 text", path.display())))?;
        RunConfig::from_text(&text)
    }

    /// The configured superpotential. The anchor is j.b, which parsing has
    /// already pinned to data.b.
    pub fn superpotential(&self) -> Superpotential {
        match self.j_kind {
            WellKind::Quadratic => Superpotential::quadratic_well(self.b),
            WellKind::Abs => Superpotential::abs_well(self.b),
            WellKind::Kinked => Superpotential::kinked_well(self.b),
        }
    }

    pub fn from_text(text: &str) -> Result<RunConfig, CliError> {
        let entries = parse_entries(text)?;
        let hash = hex_sha256(text.as_bytes());

        let mesh_n: usize = entries.required("mesh.n")?;
        if mesh_n == 0 {
            return Err(entries.value_error("mesh.n", "must be at least 1"));
        }
        if let Some(tagging) = entries.optional_str("mesh.tagging") {
            if tagging != "default" {
                return Err(entries
                    .value_error("mesh.tagging", "the only supported tagging scheme is `default`"));
            }
        }

        let g = entries.optional_field_spec("data.g")?;
        let q = entries.optional_field_spec("data.q")?;
        let z_d = entries.optional_field_spec("data.z_d")?;
        let b: f64 = entries.required("data.b")?;

        let j_kind = match entries.required_str("j.kind")? {
            "quadratic" => WellKind::Quadratic,
            "abs" => WellKind::Abs,
            "kinked" => WellKind::Kinked,
            other => {
                return Err(entries.value_error(
                    "j.kind",
                    &format!("unknown well `{other}`; expected quadratic, abs, or kinked"),
                ))
            }
        };
        let j_b: f64 = entries.required("j.b")?;
        if j_b != b {
            return Err(CliError::Config(format!(
                "j.b = {j_b} must equal data.b = {b}: the same constant anchors the flux law \
                 and the limit trace"
            )));
        }

        let mut solver = HviSolverConfig::default();
        if let Some(list) = entries.optional_f64_list("solver.epsilon_schedule")? {
            solver.epsilon_schedule = list;
        }
        if let Some(v) = entries.optional("solver.newton_tol")? {
            solver.newton_tol = v;
        }
        if let Some(v) = entries.optional("solver.max_newton")? {
            solver.max_newton = v;
        }
        if let Some(v) = entries.optional("solver.linear_tol")? {
            solver.linear_tol = v;
        }
        if let Some(v) = entries.optional("solver.damping")? {
            solver.damping = v;
        }
        if let Some(v) = entries.optional("solver.max_backtracks")? {
            solver.max_backtracks = v;
        }
        if let Some(v) = entries.optional("solver.cert_trials")? {
            solver.cert_trials = v;
        }
        solver.validate().map_err(|e| CliError::Config(format!("solver section: {e}")))?;

        let mut opt = OptimizerConfig::default();
        if let Some(v) = entries.optional("opt.tol")? {
            opt.tol = v;
        }
        if let Some(v) = entries.optional("opt.max_iters")? {
            opt.max_iters = v;
        }
        if let Some(v) = entries.optional("opt.armijo_c")? {
            opt.armijo_c = v;
        }
        if !(opt.tol > 0.0) || !(opt.armijo_c > 0.0) || opt.max_iters == 0 {
            return Err(CliError::Config(
                "opt section: tol and armijo_c must be positive, max_iters at least 1".into(),
            ));
        }

        let alpha: Option<f64> = entries.optional("experiment.alpha")?;
        if let Some(a) = alpha {
            if !(a > 0.0) {
                return Err(entries.value_error("experiment.alpha", "must be positive"));
            }
        }
        let alpha_list = entries.optional_f64_list("experiment.alpha_list")?;
        if let Some(list) = &alpha_list {
            if list.len() < 3 {
                return Err(entries
                    .value_error("experiment.alpha_list", "a sweep needs at least 3 entries"));
            }
            if !(list[0] > 0.0) || list.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(entries.value_error(
                    "experiment.alpha_list",
                    "entries must be positive and strictly increasing",
                ));
            }
        }
        let m: Option<f64> = entries.optional("experiment.m")?;
        if let Some(mv) = m {
            if !(mv > 0.0) {
                return Err(entries.value_error("experiment.m", "must be positive"));
            }
        }
        let samples = entries.optional("experiment.samples")?.unwrap_or(10_000usize);
        let pair_samples = entries.optional("experiment.pair_samples")?.unwrap_or(10_000usize);
        if samples < 1000 || pair_samples < 1000 {
            return Err(CliError::Config(
                "experiment.samples and experiment.pair_samples must be at least 1000".into(),
            ));
        }
        let r_min = entries.optional("experiment.r_min")?.unwrap_or(-10.0);
        let r_max = entries.optional("experiment.r_max")?.unwrap_or(10.0);
        if !(r_min < r_max) {
            return Err(CliError::Config(format!(
                "experiment.r_min = {r_min} must be below experiment.r_max = {r_max}"
            )));
        }

        let seed: u64 = entries.optional("run.seed")?.unwrap_or(0);
        let threads: usize = entries.optional("run.threads")?.unwrap_or(1);
        if threads == 0 {
            return Err(entries.value_error("run.threads", "must be at least 1"));
        }
        // one seed drives every sampled quantity of the run
        solver.cert_seed = seed;

        let out_dir = PathBuf::from(entries.optional_str("output.dir").unwrap_or("out"));
        let wall_time = match entries.optional_str("output.wall_time") {
            None | Some("zero") => WallTimePolicy::Zero,
            Some("measure") => WallTimePolicy::Measure,
            Some(other) => {
                return Err(entries.value_error(
                    "output.wall_time",
                    &format!("unknown policy `{other}`; expected zero or measure"),
                ))
            }
        };
        let plot = match entries.optional_str("output.plot") {
            None | Some("true") => true,
            Some("false") => false,
            Some(other) => {
                return Err(entries.value_error(
                    "output.plot",
                    &format!("expected true or false, got `{other}`"),
                ))
            }
        };

        Ok(RunConfig {
            mesh_n,
            g,
            q,
            z_d,
            b,
            j_kind,
            solver,
            opt,
            alpha,
            alpha_list,
            m,
            samples,
            pair_samples,
            r_min,
            r_max,
            seed,
            threads,
            out_dir,
            wall_time,
            plot,
            hash,
        })
    }
}

pub fn hex_sha256(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for byte in digest {
        s.push_str(&format!("{byte:02x}"));
    }
    s
}

struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

fn parse_entries(text: &str) -> Result<Entries, CliError> {
    let mut map: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Config(format!(
                "line {lineno}: expected `section.key = value`, got `{line}`"
            ))
        })?;
        let key = key.trim();
        let value = value.trim();
        if !KNOWN_KEYS.contains(&key) {
            return Err(CliError::Config(format!("line {lineno}: unknown key `{key}`")));
        }
        if value.is_empty() {
            return Err(CliError::Config(format!("line {lineno}: key `{key}` has no value")));
        }
        if let Some((first, _)) = map.get(key) {
            return Err(CliError::Config(format!(
                "line {lineno}: key `{key}` already set on line {first}"
            )));
        }
        map.insert(key.to_string(), (lineno, value.to_string()));
    }
    Ok(Entries { map })
}

impl Entries {
    fn value_error(&self, key: &str, msg: &str) -> CliError {
        match self.map.get(key) {
            Some((line, _)) => CliError::Config(format!("line {line}: key `{key}` {msg}")),
            None => CliError::Config(format!("key `{key}` {msg}")),
        }
    }

    fn required_str(&self, key: &str) -> Result<&str, CliError> {
        self.map
            .get(key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| CliError::Config(format!("missing required key `{key}`")))
    }

    fn optional_str(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|(_, v)| v.as_str())
    }

    fn required<T: std::str::FromStr>(&self, key: &str) -> Result<T, CliError> {
        let (line, value) = self
            .map
            .get(key)
            .ok_or_else(|| CliError::Config(format!("missing required key `{key}`")))?;
        value.parse().map_err(|_| {
            CliError::Config(format!("line {line}: key `{key}` has unparseable value `{value}`"))
        })
    }

    fn optional<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.map.get(key) {
            None => Ok(None),
            Some((line, value)) => value.parse().map(Some).map_err(|_| {
                CliError::Config(format!(
                    "line {line}: key `{key}` has unparseable value `{value}`"
                ))
            }),
        }
    }

    fn optional_f64_list(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        let Some((line, value)) = self.map.get(key) else { return Ok(None) };
        let mut out = Vec::new();
        for piece in value.split(',') {
            let piece = piece.trim();
            let v: f64 = piece.parse().map_err(|_| {
                CliError::Config(format!(
                    "line {line}: key `{key}` has unparseable list entry `{piece}`"
                ))
            })?;
            out.push(v);
        }
        Ok(Some(out))
    }

    fn optional_field_spec(&self, key: &str) -> Result<Option<FieldSpec>, CliError> {
        match self.map.get(key) {
            None => Ok(None),
            Some((line, value)) => FieldSpec::parse(value)
                .map(Some)
                .map_err(|e| CliError::Config(format!("line {line}: key `{key}`: {e}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = "\
# a comment
mesh.n = 8

data.g = zero
data.q = constant:0.25
data.b = 2
j.kind = kinked
j.b = 2
experiment.alpha = 10
run.seed = 7
";

    #[test]
    fn parses_a_complete_file() {
        let cfg = RunConfig::from_text(GOOD).unwrap();
        assert_eq!(cfg.mesh_n, 8);
        assert_eq!(cfg.b, 2.0);
        assert_eq!(cfg.j_kind, WellKind::Kinked);
        assert_eq!(cfg.alpha, Some(10.0));
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.solver.cert_seed, 7);
        assert_eq!(cfg.threads, 1);
        assert_eq!(cfg.wall_time, WallTimePolicy::Zero);
        assert_eq!(cfg.hash.len(), 64);
    }

    #[test]
    fn rejects_unknown_keys_with_line_numbers() {
        let bad = "mesh.n = 8\nmesh.shape = disk\n";
        let err = RunConfig::from_text(bad).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(err.contains("mesh.shape"), "{err}");
    }

    #[test]
    fn rejects_duplicate_and_malformed_lines() {
        let dup = "mesh.n = 8\nmesh.n = 16\n";
        let err = RunConfig::from_text(dup).unwrap_err().to_string();
        assert!(err.contains("already set on line 1"), "{err}");

        let noeq = "mesh.n 8\n";
        let err = RunConfig::from_text(noeq).unwrap_err().to_string();
        assert!(err.contains("line 1"), "{err}");
    }

    #[test]
    fn enforces_the_anchor_coupling() {
        let bad = "mesh.n = 8\ndata.b = 1\nj.kind = abs\nj.b = 2\n";
        let err = RunConfig::from_text(bad).unwrap_err().to_string();
        assert!(err.contains("j.b"), "{err}");
        assert!(err.contains("data.b"), "{err}");
    }

    #[test]
    fn missing_required_key_is_named() {
        let bad = "data.b = 1\nj.kind = abs\nj.b = 1\n";
        let err = RunConfig::from_text(bad).unwrap_err().to_string();
        assert!(err.contains("mesh.n"), "{err}");
    }

    #[test]
    fn bad_alpha_grid_is_rejected() {
        let base = "mesh.n = 8\ndata.b = 1\nj.kind = abs\nj.b = 1\n";
        for (list, what) in [("5", "short"), ("1,2,2", "flat"), ("-1,1,2", "negative")] {
            let text = format!("{base}experiment.alpha_list = {list}\n");
            assert!(RunConfig::from_text(&text).is_err(), "{what} grid accepted");
        }
    }

    #[test]
    fn field_spec_errors_carry_the_line() {
        let bad = "mesh.n = 8\ndata.b = 1\nj.kind = abs\nj.b = 1\ndata.g = expr:nope\n";
        let err = RunConfig::from_text(bad).unwrap_err().to_string();
        assert!(err.contains("line 5"), "{err}");
    }

    #[test]
    fn hash_tracks_the_bytes() {
        let a = RunConfig::from_text(GOOD).unwrap();
        let b = RunConfig::from_text(&format!("{GOOD}# trailing comment\n")).unwrap();
        assert_ne!(a.hash, b.hash);
        let again = RunConfig::from_text(GOOD).unwrap();
        assert_eq!(a.hash, again.hash);
    }
}
