//! Spectrum sweeps driven by a JSON config: eigenvalue scatter CSV plus a
//! per-case summary.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::{OneOrMany, ProblemConfig};
use crate::assembly::{DiscreteProblem, SystemMatrices};
use crate::block::Variant;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::spectrum::{estimate_c1, preconditioned_spectrum, SpectrumReport};
use crate::sparse::DEFAULT_DENSE_CAP;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub problem: ProblemConfig,
    pub precond: OneOrMany<Variant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<std::path::PathBuf>,
}

impl SpectrumConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SpectrumConfig = serde_json::from_str(text).map_err(|e| Error::config("spectrum", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        if self.precond.values().is_empty() {
            return Err(Error::config("precond", "empty list"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumCase {
    pub level: u32,
    pub h: f64,
    pub tau: f64,
    pub precond: Variant,
    pub dim: usize,
    pub rho: f64,
    pub c1: f64,
    pub min_re: f64,
    pub max_abs_im: f64,
    pub diameter: f64,
    #[serde(skip)]
    pub report: SpectrumReport,
}

/// Computes every `(level, tau, precond)` spectrum of the config, in grid
/// order.
pub fn run_spectrum(cfg: &SpectrumConfig) -> Result<Vec<SpectrumCase>> {
    cfg.validate()?;
    let spec = cfg.problem.spec();
    let mut cases = Vec::new();
    for level in cfg.problem.level.values() {
        let mats = Arc::new(SystemMatrices::assemble(Arc::new(Mesh::lshape(level)), &spec)?);
        let dim = 2 * mats.n();
        if dim > DEFAULT_DENSE_CAP {
            return Err(Error::config(
                "problem.level",
                format!("level {level} gives dimension {dim} above the dense cap {DEFAULT_DENSE_CAP}"),
            ));
        }
        let c1 = estimate_c1(&mats.mass, &mats.lumped)?;
        for tau in cfg.problem.tau.values() {
            let p = DiscreteProblem::new(mats.clone(), tau);
            for precond in cfg.precond.values() {
                let report = preconditioned_spectrum(&p, precond)?;
                cases.push(SpectrumCase {
                    level,
                    h: Mesh::lshape_h(level),
                    tau,
                    precond,
                    dim,
                    rho: report.rho,
                    c1,
                    min_re: report.min_re(),
                    max_abs_im: report.max_abs_im(),
                    diameter: report.diameter(),
                    report,
                });
            }
        }
    }
    Ok(cases)
}

/// Scatter rows `re,im,h,tau,precond` for all cases under one header.
pub fn write_scatter<W: Write>(cases: &[SpectrumCase], mut w: W) -> Result<()> {
    for (i, c) in cases.iter().enumerate() {
        c.report.write_scatter_csv(&mut w, c.h, c.tau, c.precond.name(), i == 0)?;
    }
    Ok(())
}
