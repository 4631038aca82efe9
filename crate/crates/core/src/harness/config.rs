//! JSON experiment configuration and its validation.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::assembly::{Coefficient, ProblemSpec};
use crate::block::Variant;
use crate::error::{Error, Result};
use crate::krylov::{InnerSolver, PreconditionerSpec};
use crate::mesh::{BcSpec, DofOrdering};
use crate::multigrid::{CycleKind, MgConfig};
use crate::smoothers::SmootherConfig;

/// Environment variable that replaces the default seed list by one seed.
pub const SEED_ENV: &str = "LUMPMG_SEED";

/// Finest level accepted by the harness.
pub const MAX_LEVEL: u32 = 10;

/// A scalar or a list; lists expand into grid axes.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

// by hand rather than untagged, so that errors inside an element keep
// their field-level message
impl<'de, T: serde::de::DeserializeOwned> Deserialize<'de> for OneOrMany<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        match Value::deserialize(d)? {
            Value::Array(items) => items
                .into_iter()
                .map(|v| serde_json::from_value(v).map_err(D::Error::custom))
                .collect::<std::result::Result<Vec<T>, _>>()
                .map(OneOrMany::Many),
            v => serde_json::from_value(v).map(OneOrMany::One).map_err(D::Error::custom),
        }
    }
}

impl<T: Clone> OneOrMany<T> {
    pub fn values(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

impl<T> From<Vec<T>> for OneOrMany<T> {
    fn from(v: Vec<T>) -> Self {
        OneOrMany::Many(v)
    }
}

/// Coefficient set: `1` (smooth), `2` (degenerate) or `"custom"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Value", into = "Value")]
pub enum ExampleId {
    One,
    Two,
    Custom,
}

impl TryFrom<Value> for ExampleId {
    type Error = String;
    fn try_from(v: Value) -> std::result::Result<Self, String> {
        match &v {
            Value::Number(n) if n.as_u64() == Some(1) => Ok(ExampleId::One),
            Value::Number(n) if n.as_u64() == Some(2) => Ok(ExampleId::Two),
            Value::String(s) if s == "1" => Ok(ExampleId::One),
            Value::String(s) if s == "2" => Ok(ExampleId::Two),
            Value::String(s) if s == "custom" => Ok(ExampleId::Custom),
            _ => Err(format!("example must be 1, 2 or \"custom\", got {v}")),
        }
    }
}

impl From<ExampleId> for Value {
    fn from(e: ExampleId) -> Value {
        match e {
            ExampleId::One => Value::from(1),
            ExampleId::Two => Value::from(2),
            ExampleId::Custom => Value::from("custom"),
        }
    }
}

impl fmt::Display for ExampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExampleId::One => "1",
            ExampleId::Two => "2",
            ExampleId::Custom => "custom",
        })
    }
}

/// Constant diffusion coefficients for `example = "custom"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomCoefficients {
    pub a: f64,
    pub b: f64,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub example: ExampleId,
    #[serde(default)]
    pub bc: BcSpec,
    pub tau: OneOrMany<f64>,
    pub level: OneOrMany<u32>,
    #[serde(default = "one")]
    pub coarse_level: u32,
    /// DOF numbering, which fixes the Gauss-Seidel sweep order. When absent
    /// it follows the smoother: see [`ExperimentConfig::ordering`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordering: Option<DofOrdering>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<CustomCoefficients>,
}

impl ProblemConfig {
    pub fn spec(&self) -> ProblemSpec {
        let base = match (self.example, self.coefficients) {
            (ExampleId::One, _) => ProblemSpec::nice(),
            (ExampleId::Two, _) => ProblemSpec::degenerate(),
            (ExampleId::Custom, Some(c)) => ProblemSpec {
                a: Coefficient::Constant(c.a),
                b: Coefficient::Constant(c.b),
                ..ProblemSpec::laplace()
            },
            (ExampleId::Custom, None) => ProblemSpec::laplace(),
        };
        base.with_bc(self.bc).with_ordering(self.ordering.unwrap_or_default())
    }

    pub fn validate(&self) -> Result<()> {
        let taus = self.tau.values();
        if taus.is_empty() {
            return Err(Error::config("problem.tau", "empty list"));
        }
        if let Some(t) = taus.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return Err(Error::config("problem.tau", format!("tau must be positive and finite, got {t}")));
        }
        let levels = self.level.values();
        if levels.is_empty() {
            return Err(Error::config("problem.level", "empty list"));
        }
        if self.coarse_level < 1 {
            return Err(Error::config("problem.coarse_level", "must be at least 1"));
        }
        if let Some(l) = levels.iter().find(|&&l| l < self.coarse_level || l > MAX_LEVEL) {
            return Err(Error::config(
                "problem.level",
                format!("level {l} outside [{}, {MAX_LEVEL}]", self.coarse_level),
            ));
        }
        match (self.example, self.coefficients) {
            (ExampleId::Custom, None) => Err(Error::config("problem.coefficients", "required for custom example")),
            (ExampleId::Custom, Some(c)) if !(c.a > 0.0 && c.b > 0.0) => {
                Err(Error::config("problem.coefficients", "a and b must be positive"))
            }
            (ExampleId::One | ExampleId::Two, Some(_)) => {
                Err(Error::config("problem.coefficients", "only allowed with example \"custom\""))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Mg,
    Gmres,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmootherKind {
    Cgs,
    Cj,
    Dgs,
}

/// Preconditioner inner solve: `"mg"`, `"gs(k)"` or `"lu"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum InnerKind {
    Mg,
    Gs(usize),
    Lu,
}

impl TryFrom<String> for InnerKind {
    type Error = String;
    fn try_from(s: String) -> std::result::Result<Self, String> {
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "mg" => return Ok(InnerKind::Mg),
            "lu" => return Ok(InnerKind::Lu),
            _ => {}
        }
        t.strip_prefix("gs(")
            .and_then(|r| r.strip_suffix(')'))
            .and_then(|k| k.parse().ok())
            .map(InnerKind::Gs)
            .ok_or_else(|| format!("inner must be \"mg\", \"gs(k)\" or \"lu\", got \"{s}\""))
    }
}

impl From<InnerKind> for String {
    fn from(k: InnerKind) -> String {
        match k {
            InnerKind::Mg => "mg".into(),
            InnerKind::Gs(k) => format!("gs({k})"),
            InnerKind::Lu => "lu".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub solver: SolverKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoother: Option<SmootherKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cycle: Option<CycleKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pre: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post: Option<usize>,
    /// Jacobi damping: `theta` for CJ, `omega` for the DGS Schur sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precond: Option<Variant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner: Option<InnerKind>,
}

/// A validated method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Mg(MgConfig),
    Gmres(PreconditionerSpec),
}

impl Method {
    /// `mg/cgs`, `gmres/cgs`, `gmres/gs(3)`, `gmres/lu`.
    pub fn name(&self) -> String {
        match self {
            Method::Mg(c) => format!("mg/{}", c.smoother.label()),
            Method::Gmres(p) => match p.inner {
                InnerSolver::Mg(c) => format!("gmres/{}", c.smoother.label()),
                InnerSolver::GaussSeidel { steps } => format!("gmres/gs({steps})"),
                InnerSolver::DenseLu => "gmres/lu".into(),
            },
        }
    }

    pub fn precond_name(&self) -> &'static str {
        match self {
            Method::Mg(_) => "-",
            Method::Gmres(p) => p.kind.name(),
        }
    }

    pub fn mg_config(&self) -> Option<MgConfig> {
        match self {
            Method::Mg(c) => Some(*c),
            Method::Gmres(PreconditionerSpec {
                inner: InnerSolver::Mg(c),
                ..
            }) => Some(*c),
            _ => None,
        }
    }

    /// Human-readable label such as `CGS-MG V(1,1)` or `V_B(1,1) CGS`.
    pub fn label(&self) -> String {
        match self {
            Method::Mg(c) => format!(
                "{}-MG {}({},{})",
                c.smoother.label().to_uppercase(),
                c.cycle.label().to_uppercase(),
                c.pre,
                c.post
            ),
            Method::Gmres(p) => match p.inner {
                InnerSolver::Mg(c) => format!("{} {}", p.label(), c.smoother.label().to_uppercase()),
                _ => p.label(),
            },
        }
    }
}

impl MethodConfig {
    pub fn resolve(&self) -> Result<Method> {
        let smoother_kind = self.smoother.unwrap_or(SmootherKind::Cgs);
        let smoother = match smoother_kind {
            SmootherKind::Cgs => {
                if self.damping.is_some() {
                    return Err(Error::config("method.damping", "not used by the cgs smoother"));
                }
                SmootherConfig::cgs()
            }
            SmootherKind::Cj => SmootherConfig::CollectiveJacobi {
                damping: self.damping.unwrap_or(0.8),
            },
            SmootherKind::Dgs => match (SmootherConfig::dgs(), self.damping) {
                (SmootherConfig::Distributive {
                    gs_sweeps,
                    jacobi_sweeps,
                    ..
                }, Some(omega)) => SmootherConfig::Distributive {
                    omega,
                    gs_sweeps,
                    jacobi_sweeps,
                },
                (d, _) => d,
            },
        };
        smoother
            .validate()
            .map_err(|e| Error::config("method.damping", e.to_string()))?;
        let pre = self.pre.unwrap_or(1);
        let post = self.post.unwrap_or(1);
        if pre + post == 0 {
            return Err(Error::config("method.pre", "pre + post must be positive"));
        }
        let cycle = self.cycle.unwrap_or(CycleKind::V);
        let mg = MgConfig {
            cycle,
            pre,
            post,
            smoother,
        };
        match self.solver {
            SolverKind::Mg => {
                if self.precond.is_some() {
                    return Err(Error::config("method.precond", "must be absent when solver is mg"));
                }
                if self.inner.is_some() {
                    return Err(Error::config("method.inner", "must be absent when solver is mg"));
                }
                if smoother_kind == SmootherKind::Dgs {
                    return Err(Error::config(
                        "method.smoother",
                        "dgs relaxes the lumped systems only; use it inside gmres",
                    ));
                }
                Ok(Method::Mg(mg))
            }
            SolverKind::Gmres => {
                let kind = self
                    .precond
                    .ok_or_else(|| Error::config("method.precond", "required when solver is gmres"))?;
                let inner = match (kind, self.inner.unwrap_or(InnerKind::Mg)) {
                    (Variant::Bd, InnerKind::Gs(k)) if k >= 1 => InnerSolver::GaussSeidel { steps: k },
                    (Variant::Bd, _) => return Err(Error::config("method.inner", "precond Bd requires inner gs(k), k >= 1")),
                    (_, InnerKind::Gs(_)) => return Err(Error::config("method.inner", "gs(k) is only available for precond Bd")),
                    (Variant::A, InnerKind::Mg) if smoother_kind == SmootherKind::Dgs => {
                        return Err(Error::config("method.smoother", "dgs needs precond B or Btilde"))
                    }
                    (_, InnerKind::Mg) => InnerSolver::Mg(mg),
                    (_, InnerKind::Lu) => InnerSolver::DenseLu,
                };
                let spec = PreconditionerSpec { kind, inner };
                spec.validate()?;
                Ok(Method::Gmres(spec))
            }
        }
    }
}

fn default_tol() -> f64 {
    1e-7
}

fn default_maxit() -> usize {
    200
}

/// Seeds used when a config does not list any: `LUMPMG_SEED` if set,
/// otherwise `0..5`.
pub fn default_seeds() -> Vec<u64> {
    match std::env::var(SEED_ENV).ok().and_then(|s| s.trim().parse().ok()) {
        Some(s) => vec![s],
        None => (0..5).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_maxit")]
    pub maxit: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            tol: default_tol(),
            maxit: default_maxit(),
            seeds: default_seeds(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::config("run.tol", format!("must lie in (0, 1), got {}", self.tol)));
        }
        if self.maxit == 0 {
            return Err(Error::config("run.maxit", "must be positive"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("run.seeds", "empty list"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    /// One method or a list; each runs over the whole problem grid.
    pub method: OneOrMany<MethodConfig>,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Parses and validates a JSON document. Parse errors are reported as
    /// config errors too.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::config(json_field(&e), e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every section; returns the resolved methods in config order.
    pub fn validate(&self) -> Result<Vec<Method>> {
        self.problem.validate()?;
        self.run.validate()?;
        let methods = self.method.values();
        if methods.is_empty() {
            return Err(Error::config("method", "empty list"));
        }
        methods.iter().map(MethodConfig::resolve).collect()
    }

    /// DOF numbering used with `method`: the explicit `problem.ordering`,
    /// else lexicographic for the distributive smoother and hierarchical
    /// for everything else.
    pub fn ordering_for(&self, method: &MethodConfig) -> DofOrdering {
        self.problem.ordering.unwrap_or(match method.smoother {
            Some(SmootherKind::Dgs) => DofOrdering::Lexicographic,
            _ => DofOrdering::Hierarchical,
        })
    }

    /// Single-method configs, one per entry of `method`, each with its
    /// ordering written out.
    pub fn split(&self) -> Vec<ExperimentConfig> {
        self.method
            .values()
            .into_iter()
            .map(|m| {
                let mut c = self.clone();
                c.problem.ordering = Some(self.ordering_for(&m));
                c.method = OneOrMany::One(m);
                c
            })
            .collect()
    }

    /// Same config with list-valued axes written out (and the ordering, when
    /// all methods share it), so that re-running it reproduces the grid.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        let orderings: Vec<DofOrdering> = self.method.values().iter().map(|m| self.ordering_for(m)).collect();
        if orderings.windows(2).all(|w| w[0] == w[1]) {
            c.problem.ordering = orderings.first().copied();
        }
        c.method = OneOrMany::Many(self.method.values());
        c.problem.tau = OneOrMany::Many(self.problem.tau.values());
        c.problem.level = OneOrMany::Many(self.problem.level.values());
        c
    }
}

fn json_field(e: &serde_json::Error) -> String {
    let msg = e.to_string();
    msg.split('`').nth(1).map(str::to_string).unwrap_or_else(|| "json".into())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> serde_json::Value {
        serde_json::json!({
            "problem": {"example": 1, "tau": [1.0, 1e-4], "level": 3},
            "method": {"solver": "mg", "smoother": "cgs", "cycle": "v", "pre": 1, "post": 1},
            "run": {"seeds": [0]}
        })
    }

    fn parse(v: serde_json::Value) -> Result<ExperimentConfig> {
        ExperimentConfig::from_json(&v.to_string())
    }

    #[test]
    fn parses_minimal_config() {
        let c = parse(base()).unwrap();
        assert_eq!(c.problem.tau.values(), vec![1.0, 1e-4]);
        assert_eq!(c.problem.level.values(), vec![3]);
        assert_eq!(c.run.tol, 1e-7);
        assert_eq!(c.run.maxit, 200);
        assert_eq!(c.validate().unwrap()[0].name(), "mg/cgs");
    }

    #[test]
    fn rejects_zero_tau() {
        let mut v = base();
        v["problem"]["tau"] = serde_json::json!(0.0);
        assert!(matches!(parse(v), Err(Error::Config { field, .. }) if field == "problem.tau"));
    }

    #[test]
    fn mg_rejects_precond() {
        let mut v = base();
        v["method"]["precond"] = serde_json::json!("B");
        assert!(matches!(parse(v), Err(Error::Config { field, .. }) if field == "method.precond"));
    }

    #[test]
    fn bd_requires_gs() {
        let mut v = base();
        v["method"] = serde_json::json!({"solver": "gmres", "precond": "Bd", "inner": "mg"});
        assert!(parse(v.clone()).is_err());
        v["method"]["inner"] = serde_json::json!("gs(3)");
        let m = parse(v).unwrap().validate().unwrap().remove(0);
        assert_eq!(m.label(), "GS_Bd(3)");
        assert_eq!(m.name(), "gmres/gs(3)");
    }

    #[test]
    fn gs_only_with_bd() {
        let mut v = base();
        v["method"] = serde_json::json!({"solver": "gmres", "precond": "B", "inner": "gs(2)"});
        assert!(parse(v).is_err());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut v = base();
        v["method"]["smoothers"] = serde_json::json!("cgs");
        assert!(matches!(parse(v), Err(Error::Config { .. })));
    }

    #[test]
    fn custom_example_needs_coefficients() {
        let mut v = base();
        v["problem"]["example"] = serde_json::json!("custom");
        assert!(parse(v.clone()).is_err());
        v["problem"]["coefficients"] = serde_json::json!({"a": 1.0, "b": 1.0});
        let c = parse(v).unwrap();
        assert!(c.problem.spec().a.same_as(&c.problem.spec().b));
    }

    #[test]
    fn inner_kind_round_trips() {
        for k in [InnerKind::Mg, InnerKind::Gs(3), InnerKind::Lu] {
            let s: String = k.into();
            assert_eq!(InnerKind::try_from(s).unwrap(), k);
        }
        assert!(InnerKind::try_from("gs(x)".to_string()).is_err());
    }

    #[test]
    fn labels() {
        let m = MethodConfig {
            solver: SolverKind::Gmres,
            smoother: Some(SmootherKind::Dgs),
            cycle: Some(CycleKind::W),
            pre: Some(2),
            post: Some(2),
            damping: None,
            precond: Some(Variant::Btilde),
            inner: None,
        };
        assert_eq!(m.resolve().unwrap().label(), "W_Btilde(2,2) DGS");
    }

    #[test]
    fn resolved_config_lists_axes() {
        let c = parse(base()).unwrap().resolved();
        assert_eq!(c.problem.level, OneOrMany::Many(vec![3]));
        assert_eq!(c.problem.ordering, Some(DofOrdering::Hierarchical));
        assert_eq!(c.method.values().len(), 1);
    }

    #[test]
    fn ordering_follows_smoother_unless_given() {
        let dgs: MethodConfig = serde_json::from_value(serde_json::json!(
            {"solver": "gmres", "precond": "B", "smoother": "dgs"}
        ))
        .unwrap();
        let cgs = parse(base()).unwrap().method.values().remove(0);
        let mut v = base();
        v["method"] = serde_json::json!([cgs, dgs]);
        let c = parse(v.clone()).unwrap();
        assert_eq!(c.ordering_for(&dgs), DofOrdering::Lexicographic);
        assert_eq!(c.ordering_for(&cgs), DofOrdering::Hierarchical);
        let parts = c.split();
        assert_eq!(parts[1].problem.ordering, Some(DofOrdering::Lexicographic));
        // mixed defaults stay implicit in the resolved config
        assert_eq!(c.resolved().problem.ordering, None);
        v["problem"]["ordering"] = "hierarchical".into();
        assert_eq!(parse(v).unwrap().ordering_for(&dgs), DofOrdering::Hierarchical);
    }

    #[test]
    fn method_list_errors_keep_the_field() {
        let mut v = base();
        v["method"] = serde_json::json!([{"solver": "mg"}, {"solver": "mg", "smoothr": "cj"}]);
        let e = parse(v).unwrap_err().to_string();
        assert!(e.contains("smoothr"), "{e}");
        let mut v = base();
        v["method"] = serde_json::json!([]);
        assert!(matches!(parse(v), Err(Error::Config { field, .. }) if field == "method"));
    }
}
