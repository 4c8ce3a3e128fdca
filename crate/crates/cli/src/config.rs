//! Run configuration: TOML file plus `key=value` overrides, validated with the
//! path of the offending field in every error.

use std::path::Path;

use barrier_core::cost::{BuiltinCost, CostSpec, ProblemSpec};
use barrier_core::estimators::RhoMethod;
use barrier_core::levy::{JumpLaw, JumpSpec, LevyTriplet};
use barrier_core::path::{Monitoring, SimConfig};
use barrier_core::Error;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub solve: SolveSection,
    pub value: Option<ValueSection>,
    pub rho: Option<RhoSection>,
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub perturb: PerturbSection,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub sigma: f64,
    /// Exponential moment the jump law must have, `E[e^{θ|J|}] < ∞`.
    #[serde(default = "one")]
    pub theta_bar: f64,
    pub jumps: Option<JumpsConfig>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct JumpsConfig {
    pub rate: f64,
    pub dist: DistConfig,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistConfig {
    Kou { p_up: f64, eta_up: f64, eta_down: f64 },
    Gaussian { mean: f64, std: f64 },
    Uniform { lo: f64, hi: f64 },
    /// `atoms = [[value, probability], ...]`
    Discrete { atoms: Vec<(f64, f64)> },
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(rename = "C")]
    pub c: f64,
    pub q: f64,
    pub cost: CostConfig,
    pub mollify: Option<MollifyConfig>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostConfig {
    Quadratic,
    Abs,
    PiecewiseLinear { slopes: Vec<f64>, kinks: Vec<f64> },
    Quartic,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MollifyConfig {
    pub epsilon: f64,
    #[serde(default)]
    pub anchor: f64,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum MonitoringConfig {
    #[default]
    Grid,
    Bridge,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default = "SimSection::default_dt")]
    pub dt: f64,
    /// Defaults to the smallest horizon with discount tail `e^{-qT} <= tail_tol`.
    pub horizon: Option<f64>,
    #[serde(default = "SimSection::default_paths")]
    pub n_paths: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub antithetic: bool,
    #[serde(default)]
    pub monitoring: MonitoringConfig,
    #[serde(default = "SimSection::default_tail")]
    pub tail_tol: f64,
}

impl SimSection {
    fn default_dt() -> f64 {
        1e-2
    }
    fn default_paths() -> usize {
        10_000
    }
    fn default_tail() -> f64 {
        1e-4
    }
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            dt: Self::default_dt(),
            horizon: None,
            n_paths: Self::default_paths(),
            seed: 0,
            antithetic: false,
            monitoring: MonitoringConfig::Grid,
            tail_tol: Self::default_tail(),
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SolveSection {
    /// Defaults to `1e-3 (1 + |b|)`.
    pub bisect_tol: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ValueSection {
    pub x: f64,
    /// Defaults to the solved barrier.
    pub b: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum RhoMethodConfig {
    #[default]
    TimeIntegral,
    ExpClock,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RhoSection {
    pub b_grid: Vec<f64>,
    #[serde(default)]
    pub method: RhoMethodConfig,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub x: f64,
    pub b_grid: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    BarrierDerivative,
    SlopeIdentity,
    Convexity,
    Martingale,
    Hjb,
}

impl CheckKind {
    pub const ALL: [CheckKind; 5] =
        [Self::BarrierDerivative, Self::SlopeIdentity, Self::Convexity, Self::Martingale, Self::Hjb];
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    #[serde(default = "VerifySection::default_checks")]
    pub checks: Vec<CheckKind>,
    /// Evaluation points of the convexity and HJB checks; defaults to
    /// `b* + 0.25 k` for `k = -4..=14`.
    pub x_grid: Option<Vec<f64>>,
    /// Starting point of the derivative and martingale checks; defaults to `b* + 0.5`.
    pub x: Option<f64>,
    /// Difference step of the derivative checks and lattice spacing of the
    /// martingale interpolant.
    #[serde(default = "VerifySection::default_h")]
    pub h: f64,
    /// Lattice spacing of the HJB derivatives.
    #[serde(default = "VerifySection::default_h")]
    pub fd_h: f64,
    #[serde(default = "VerifySection::default_times")]
    pub t_grid: Vec<f64>,
    /// Barrier to verify; defaults to the solved barrier.
    pub b: Option<f64>,
}

impl VerifySection {
    fn default_checks() -> Vec<CheckKind> {
        CheckKind::ALL.to_vec()
    }
    fn default_h() -> f64 {
        0.05
    }
    fn default_times() -> Vec<f64> {
        vec![0.0, 0.5, 1.0, 2.0]
    }
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            checks: Self::default_checks(),
            x_grid: None,
            x: None,
            h: Self::default_h(),
            fd_h: Self::default_h(),
            t_grid: Self::default_times(),
            b: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbSection {
    #[serde(default = "PerturbSection::default_eps")]
    pub eps_grid: Vec<f64>,
}

impl PerturbSection {
    fn default_eps() -> Vec<f64> {
        vec![0.2, 0.1, 0.05, 0.025]
    }
}

impl Default for PerturbSection {
    fn default() -> Self {
        Self { eps_grid: Self::default_eps() }
    }
}

/// Failure to obtain a valid configuration; the message leads with the
/// config path of the offending field.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn at(path: &str, e: Error) -> ConfigError {
    ConfigError(format!("{path}: {e}"))
}

/// Applies `a.b.c=value`; the value is read as a TOML literal, falling back
/// to a bare string.
pub fn apply_override(root: &mut toml::Value, assignment: &str) -> Result<(), ConfigError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| ConfigError(format!("override `{assignment}` is not of the form key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError(format!("override key `{key}` is malformed")));
    }
    let mut node = root;
    for (i, part) in parts.iter().enumerate() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| ConfigError(format!("{}: not a table", parts[..i].join("."))))?;
        if i + 1 == parts.len() {
            table.insert((*part).to_string(), value);
            return Ok(());
        }
        node = table.entry((*part).to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    unreachable!("override key has at least one part")
}

impl RunConfig {
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut root: toml::Value = toml::from_str::<toml::Table>(text)
            .map(toml::Value::Table)
            .map_err(|e| ConfigError(format!("config is not valid TOML: {e}")))?;
        for o in overrides {
            apply_override(&mut root, o)?;
        }
        let cfg: RunConfig = serde_path_to_error::deserialize(root).map_err(|e| {
            let path = e.path().to_string();
            ConfigError(format!("{path}: {}", e.into_inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, overrides)
    }

    /// Builds every core object once so that semantic errors surface before
    /// any simulation starts.
    fn validate(&self) -> Result<(), ConfigError> {
        self.triplet()?;
        let problem = self.problem()?;
        self.sim_config(problem.q)?;
        if let Some(t) = self.solve.bisect_tol {
            if !(t > 0.0) {
                return Err(ConfigError("solve.bisect_tol: must be positive".into()));
            }
        }
        let increasing = |name: &str, g: &[f64]| {
            if g.is_empty() || g.windows(2).any(|w| !(w[0] < w[1])) {
                Err(ConfigError(format!("{name}: must be nonempty and strictly increasing")))
            } else {
                Ok(())
            }
        };
        if let Some(r) = &self.rho {
            increasing("rho.b_grid", &r.b_grid)?;
        }
        if let Some(s) = &self.sweep {
            increasing("sweep.b_grid", &s.b_grid)?;
        }
        if let Some(g) = &self.verify.x_grid {
            increasing("verify.x_grid", g)?;
        }
        for (name, v) in [("verify.h", self.verify.h), ("verify.fd_h", self.verify.fd_h)] {
            if !(v > 0.0) {
                return Err(ConfigError(format!("{name}: must be positive")));
            }
        }
        let e = &self.perturb.eps_grid;
        if e.is_empty() || e.iter().any(|&v| !(v > 0.0)) || e.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(ConfigError("perturb.eps_grid: must be positive and strictly decreasing".into()));
        }
        Ok(())
    }

    pub fn triplet(&self) -> Result<LevyTriplet<f64>, ConfigError> {
        let m = &self.model;
        let jumps = match &m.jumps {
            None => JumpSpec::none(),
            Some(j) => {
                let law = match &j.dist {
                    DistConfig::Kou { p_up, eta_up, eta_down } => {
                        JumpLaw::Kou { p_up: *p_up, eta_up: *eta_up, eta_down: *eta_down }
                    }
                    DistConfig::Gaussian { mean, std } => JumpLaw::Gaussian { mean: *mean, std: *std },
                    DistConfig::Uniform { lo, hi } => JumpLaw::Uniform { lo: *lo, hi: *hi },
                    DistConfig::Discrete { atoms } => JumpLaw::Discrete { atoms: atoms.clone() },
                };
                JumpSpec::new(j.rate, law).map_err(|e| at("model.jumps", e))?
            }
        };
        LevyTriplet::new(m.gamma, m.sigma, jumps, m.theta_bar).map_err(|e| at("model", e))
    }

    pub fn problem(&self) -> Result<ProblemSpec<f64>, ConfigError> {
        let p = &self.problem;
        let base = match &p.cost {
            CostConfig::Quadratic => CostSpec::quadratic(),
            CostConfig::Abs => CostSpec::abs(),
            CostConfig::PiecewiseLinear { slopes, kinks } => {
                CostSpec::builtin(BuiltinCost::PiecewiseLinear { slopes: slopes.clone(), kinks: kinks.clone() })
                    .map_err(|e| at("problem.cost", e))?
            }
            CostConfig::Quartic => CostSpec::builtin(BuiltinCost::Quartic).map_err(|e| at("problem.cost", e))?,
        };
        let cost = match &p.mollify {
            None => base,
            Some(m) => base.mollify(m.epsilon, m.anchor).map_err(|e| at("problem.mollify", e))?,
        };
        ProblemSpec::new(cost, p.c, p.q).map_err(|e| at("problem", e))
    }

    /// Unmollified problem, for comparisons against the mollified barrier.
    pub fn base_problem(&self) -> Result<ProblemSpec<f64>, ConfigError> {
        let mut plain = self.clone();
        plain.problem.mollify = None;
        plain.problem()
    }

    pub fn sim_config(&self, q: f64) -> Result<SimConfig<f64>, ConfigError> {
        let s = &self.sim;
        if !(s.tail_tol > 0.0 && s.tail_tol < 1.0) {
            return Err(ConfigError("sim.tail_tol: must lie in (0, 1)".into()));
        }
        let horizon = s.horizon.unwrap_or_else(|| {
            let t = -s.tail_tol.ln() / q;
            // round up to a whole number of steps
            (t / s.dt).ceil() * s.dt
        });
        let mut cfg = SimConfig::new(s.dt, horizon, s.n_paths, s.seed)
            .map_err(|e| at("sim", e))?
            .with_antithetic(s.antithetic)
            .with_monitoring(match s.monitoring {
                MonitoringConfig::Grid => Monitoring::Grid,
                MonitoringConfig::Bridge => Monitoring::Bridge,
            });
        cfg.tail_tol = s.tail_tol;
        cfg.validate_for(q).map_err(|e| at("sim", e))?;
        Ok(cfg)
    }

    pub fn rho_method(&self) -> RhoMethod {
        match self.rho.as_ref().map(|r| r.method).unwrap_or_default() {
            RhoMethodConfig::TimeIntegral => RhoMethod::TimeIntegral,
            RhoMethodConfig::ExpClock => RhoMethod::ExpClock,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[model]
sigma = 1.0

[problem]
C = 1.0
q = 0.5
cost = { kind = "quadratic" }
"#;

    #[test]
    fn defaults_fill_in() {
        let c = RunConfig::parse(BASE, &[]).unwrap();
        assert_eq!(c.sim.n_paths, 10_000);
        assert_eq!(c.verify.checks.len(), 5);
        let sim = c.sim_config(0.5).unwrap();
        assert!((-0.5 * sim.horizon).exp() <= 1e-4);
    }

    #[test]
    fn unknown_keys_report_their_path() {
        let text = format!("{BASE}\n[sim]\nn_pathz = 3\n");
        let e = RunConfig::parse(&text, &[]).unwrap_err().0;
        assert!(e.starts_with("sim.n_pathz: unknown field `n_pathz`"), "{e}");

        let e = RunConfig::parse(BASE, &["problem.cost.kind=\"cubic\"".into()]).unwrap_err().0;
        assert!(e.starts_with("problem.cost"), "{e}");
    }

    #[test]
    fn overrides_nest_and_parse_literals() {
        let c = RunConfig::parse(
            BASE,
            &["sim.n_paths=12".into(), "sim.monitoring=bridge".into(), "model.jumps.rate=1".into(),
              "model.jumps.dist={kind=\"kou\", p_up=0.5, eta_up=3.0, eta_down=3.0}".into()],
        )
        .unwrap();
        assert_eq!(c.sim.n_paths, 12);
        assert_eq!(c.sim.monitoring, MonitoringConfig::Bridge);
        assert!(c.triplet().unwrap().jumps().is_active());
    }

    #[test]
    fn semantic_errors_name_the_section() {
        let e = RunConfig::parse(BASE, &["problem.q=-1".into()]).unwrap_err().0;
        assert!(e.starts_with("problem:"), "{e}");
        let e = RunConfig::parse(BASE, &["sim.dt=0".into()]).unwrap_err().0;
        assert!(e.starts_with("sim:"), "{e}");
        let e = RunConfig::parse(BASE, &["model.sigma=-1".into()]).unwrap_err().0;
        assert!(e.starts_with("model:"), "{e}");
        let e = RunConfig::parse(BASE, &["perturb.eps_grid=[0.1, 0.2]".into()]).unwrap_err().0;
        assert!(e.starts_with("perturb.eps_grid"), "{e}");
    }
}
