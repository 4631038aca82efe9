//! Property suites over small dense problems: lumping inequalities,
//! spectral inclusions for the lumped preconditioners and the
//! Sherman-Morrison-Woodbury identity.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::assembly::{DiscreteProblem, ProblemSpec};
use crate::block::Variant;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::sparse::{dot, lanczos_extremes};
use crate::spectrum::{
    btilde_spectrum, estimate_c1, preconditioned_spectrum, spectrum_of_x, verify_bd_bound, verify_lambda_identity,
    verify_smw_identity, BoundCheck,
};

/// The `tau` values of the experiment tables.
pub const TAU_GRID: [f64; 8] = [1e0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Lemmas,
    Theorems,
    Smw,
    All,
}

impl Suite {
    pub fn parse(s: &str) -> Option<Suite> {
        match s.to_ascii_lowercase().as_str() {
            "lemmas" => Some(Suite::Lemmas),
            "theorems" => Some(Suite::Theorems),
            "smw" => Some(Suite::Smw),
            "all" => Some(Suite::All),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Suite::Lemmas => "lemmas",
            Suite::Theorems => "theorems",
            Suite::Smw => "smw",
            Suite::All => "all",
        }
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Levels for the dense spectral checks.
    pub levels: Vec<u32>,
    /// Levels for the quadrature-error scaling check.
    pub scaling_levels: Vec<u32>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 0,
            levels: vec![2, 3],
            scaling_levels: vec![2, 3, 4, 5],
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<BoundCheck>,
    /// Measured quantities that are reported but not judged.
    pub notes: Vec<String>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.satisfied)
    }

    pub fn n_passed(&self) -> usize {
        self.checks.iter().filter(|c| c.satisfied).count()
    }

    fn extend(&mut self, other: SuiteReport) {
        self.checks.extend(other.checks);
        self.notes.extend(other.notes);
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let verdict = if c.satisfied { "PASS" } else { "FAIL" };
            writeln!(f, "{verdict} {} margin={:.3e}", c.name, c.margin)?;
        }
        for n in &self.notes {
            writeln!(f, "note {n}")?;
        }
        write!(f, "{}: {}/{} checks passed", self.suite.name(), self.n_passed(), self.checks.len())
    }
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Result<SuiteReport> {
    match suite {
        Suite::Lemmas => lemma_checks(opts),
        Suite::Theorems => theorem_checks(opts),
        Suite::Smw => smw_checks(opts),
        Suite::All => {
            let mut r = lemma_checks(opts)?;
            r.extend(theorem_checks(opts)?);
            r.extend(smw_checks(opts)?);
            r.suite = Suite::All;
            Ok(r)
        }
    }
}

fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn zero_mean(mut u: Vec<f64>) -> Vec<f64> {
    let mean = u.iter().sum::<f64>() / u.len() as f64;
    u.iter_mut().for_each(|x| *x -= mean);
    u
}

/// Largest observed `|(u, w) - (u, w)_h| / (h^2 |u|_1 |w|_1)` over all pairs
/// (including `u = w`) of `samples` zero-mean random vectors.
pub fn quadrature_error_constant(level: u32, samples: usize, seed: u64) -> Result<f64> {
    let p = DiscreteProblem::lshape(level, &ProblemSpec::laplace(), 1.0)?;
    let n = p.n();
    let h2 = p.mesh().map(|m| m.h().powi(2)).unwrap_or(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ u64::from(level));
    let us: Vec<Vec<f64>> = (0..samples).map(|_| zero_mean(random_vec(n, &mut rng))).collect();
    let mbar = p.lumped().diag();
    let mut worst: f64 = 0.0;
    let semi: Vec<f64> = us.iter().map(|u| dot(u, &p.stiffness_a().spmv(u).unwrap()).sqrt()).collect();
    let dm: Vec<Vec<f64>> = us
        .iter()
        .map(|u| {
            let mut y = p.mass().spmv(u).unwrap();
            for ((yi, ui), d) in y.iter_mut().zip(u).zip(mbar) {
                *yi -= d * ui;
            }
            y
        })
        .collect();
    for i in 0..samples {
        for j in i..samples {
            let e = dot(&us[j], &dm[i]).abs() / (h2 * semi[i] * semi[j]);
            worst = worst.max(e);
        }
    }
    Ok(worst)
}

/// `rho(B^{-1} A)` for Example-1 coefficients at one level, over `taus`.
pub fn lumped_radius_sweep(level: u32, taus: &[f64]) -> Result<Vec<(f64, f64)>> {
    let p = DiscreteProblem::lshape(level, &ProblemSpec::nice(), 1.0)?;
    taus.iter()
        .map(|&t| Ok((t, preconditioned_spectrum(&p.with_tau(t), Variant::B)?.rho)))
        .collect()
}

/// Largest swept `tau` at which the radius reaches 2, if any.
pub fn empirical_threshold(sweep: &[(f64, f64)]) -> Option<f64> {
    sweep.iter().filter(|(_, r)| *r >= 2.0).map(|(t, _)| *t).fold(None, |a: Option<f64>, t| Some(a.map_or(t, |a| a.max(t))))
}

fn level_h2(level: u32) -> f64 {
    Mesh::lshape_h(level).powi(2)
}

fn ratio_check(name: String, values: &[f64], lo: f64, hi: f64) -> Vec<BoundCheck> {
    values
        .windows(2)
        .enumerate()
        .map(|(k, w)| {
            let r = w[1] / w[0];
            BoundCheck::non_negative(format!("{name}[{k}->{}] ratio={r:.3}", k + 1), (r - lo).min(hi - r))
        })
        .collect()
}

/// Lumping inequalities and mesh-scaling of the lumping error and of the
/// extreme eigenvalues of the FE matrices.
pub fn lemma_checks(opts: &VerifyOptions) -> Result<SuiteReport> {
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for &level in &opts.levels {
        let p = DiscreteProblem::lshape(level, &ProblemSpec::nice(), 1.0)?;
        let n = p.n();
        let c1 = estimate_c1(p.mass(), p.lumped())?;
        checks.push(BoundCheck::positive(format!("c1_in_unit_interval[l={level}]"), c1.min(1.0 - c1)));
        notes.push(format!("C1[l={level}]={c1:.6}"));
        let mbar = p.lumped().diag();
        let (mut worst_dm, mut worst_lo, mut worst_hi) = (f64::NEG_INFINITY, f64::INFINITY, f64::INFINITY);
        for _ in 0..200 {
            let u = random_vec(n, &mut rng);
            let mu = dot(&u, &p.mass().spmv(&u)?);
            let mbu: f64 = u.iter().zip(mbar).map(|(x, d)| d * x * x).sum();
            worst_dm = worst_dm.max(mu - mbu);
            worst_lo = worst_lo.min(mu - (c1 * mbu - 1e-12 * mbu));
            worst_hi = worst_hi.min(mbu - mu + 1e-12 * mbu);
        }
        checks.push(BoundCheck::non_negative(format!("lumping_error_nonpositive[l={level}]"), 1e-12 - worst_dm));
        checks.push(BoundCheck::non_negative(format!("norm_equivalence_lower[l={level}]"), worst_lo));
        checks.push(BoundCheck::non_negative(format!("norm_equivalence_upper[l={level}]"), worst_hi));
    }

    let mut cl = Vec::new();
    let mut amax = Vec::new();
    let mut bmax = Vec::new();
    let mut mmin = Vec::new();
    for &level in &opts.scaling_levels {
        let c = quadrature_error_constant(level, 20, opts.seed)?;
        notes.push(format!("C_l[l={level}]={c:.5}"));
        cl.push(c);
        let p = DiscreteProblem::lshape(level, &ProblemSpec::nice(), 1.0)?;
        let n = p.n();
        let steps = 80;
        let (_, a_hi) = lanczos_extremes(n, steps, opts.seed, |x, y| p.stiffness_a().mul_into(x, y));
        let (_, b_hi) = lanczos_extremes(n, steps, opts.seed, |x, y| p.stiffness_b().mul_into(x, y));
        let (m_lo, _) = lanczos_extremes(n, steps, opts.seed, |x, y| p.mass().mul_into(x, y));
        amax.push(a_hi);
        bmax.push(b_hi);
        mmin.push(m_lo / level_h2(level));
        notes.push(format!("lmax(A)={a_hi:.4} lmax(B)={b_hi:.4} lmin(M)/h^2={:.4} [l={level}]", m_lo / level_h2(level)));
    }
    checks.extend(ratio_check("quadrature_error_h2_scaling".into(), &cl, 0.5, 2.0));
    checks.extend(ratio_check("stiffness_a_lmax_bounded".into(), &amax, 0.5, 2.0));
    checks.extend(ratio_check("stiffness_b_lmax_bounded".into(), &bmax, 0.5, 2.0));
    checks.extend(ratio_check("mass_lmin_h2_scaling".into(), &mmin, 0.5, 2.0));
    Ok(SuiteReport {
        suite: Suite::Lemmas,
        checks,
        notes,
    })
}

/// Spectral inclusions for the lumped preconditioners, `X`, and the
/// block-diagonal preconditioner at small `tau`.
pub fn theorem_checks(opts: &VerifyOptions) -> Result<SuiteReport> {
    let mut checks = Vec::new();
    let mut notes = Vec::new();

    for &level in &opts.levels {
        let h2 = level_h2(level);
        let sweep = lumped_radius_sweep(level, &TAU_GRID)?;
        for &(tau, rho) in sweep.iter().filter(|(t, _)| *t >= h2) {
            checks.push(BoundCheck::positive(format!("lumped_radius_below_two[l={level},tau={tau:e}]"), 2.0 - rho));
        }
        let at_h2 = preconditioned_spectrum(&DiscreteProblem::lshape(level, &ProblemSpec::nice(), h2)?, Variant::B)?.rho;
        checks.push(BoundCheck::positive(format!("lumped_radius_below_two[l={level},tau=h^2]"), 2.0 - at_h2));
        match empirical_threshold(&sweep) {
            Some(t) => notes.push(format!("rho(B^-1 A) reaches 2 at tau={t:e} [l={level}, h^2={h2:e}]")),
            None => notes.push(format!("rho(B^-1 A) < 2 over the whole tau grid [l={level}]")),
        }
    }

    let lap = ProblemSpec::laplace();
    for &level in &opts.levels {
        for tau in [1e-1, 1e-3] {
            let p = DiscreteProblem::lshape(level, &lap, tau)?;
            for c in btilde_spectrum(&p)?.bound_checks.into_iter().chain(spectrum_of_x(&p)?.bound_checks) {
                checks.push(BoundCheck {
                    name: format!("{}[l={level},tau={tau:e}]", c.name),
                    ..c
                });
            }
        }
    }

    let base = opts.levels.first().copied().unwrap_or(2);
    let nice = DiscreteProblem::lshape(base, &ProblemSpec::nice(), 1.0)?;
    let mut rhos = Vec::new();
    for tau in [1e-7, 1e-6] {
        let r = verify_bd_bound(&nice.with_tau(tau))?;
        for c in &r.bound_checks {
            checks.push(BoundCheck {
                name: format!("{}[l={base},tau={tau:e}]", c.name),
                ..c.clone()
            });
        }
        rhos.push(r.rho);
    }
    let ratio = rhos[1] / rhos[0];
    checks.push(BoundCheck::non_negative(
        format!("ed_linear_in_tau[l={base}] ratio={ratio:.6}"),
        0.1 - (ratio - 10.0).abs(),
    ));

    for (i, &level) in opts.levels.iter().enumerate() {
        let sample = if i == 0 { None } else { Some(20) };
        for tau in [1e-1, 1e-3] {
            let p = DiscreteProblem::lshape(level, &ProblemSpec::nice(), tau)?;
            let r = verify_lambda_identity(&p, sample, opts.seed)?;
            checks.push(BoundCheck::non_negative(
                format!("eigenpair_identity[l={level},tau={tau:e},n={}]", r.checked),
                1e-6 - r.max_rel_error,
            ));
        }
    }

    if opts.levels.len() >= 2 {
        let (l0, l1) = (opts.levels[0], opts.levels[1]);
        let tau = 1e-1;
        let d0 = btilde_spectrum(&DiscreteProblem::lshape(l0, &lap, tau)?)?.diameter();
        let d1 = btilde_spectrum(&DiscreteProblem::lshape(l1, &lap, tau)?)?.diameter();
        checks.push(BoundCheck::positive(format!("btilde_cloud_shrinks_with_h[l={l0}->{l1}]"), d0 - d1));
    }
    let p = DiscreteProblem::lshape(base, &lap, 1.0)?;
    for tau in [1e-1, 1e-3, 1e-5, 1e-7] {
        let r = btilde_spectrum(&p.with_tau(tau))?;
        let c1 = r.c1.unwrap_or(0.0);
        checks.push(BoundCheck::positive(
            format!("btilde_bounded_away_from_zero[l={base},tau={tau:e}]"),
            r.min_re() - c1 / 2.0,
        ));
    }

    Ok(SuiteReport {
        suite: Suite::Theorems,
        checks,
        notes,
    })
}

pub fn smw_checks(opts: &VerifyOptions) -> Result<SuiteReport> {
    let r = verify_smw_identity(20, 5, 20, opts.seed, 1e-9)?;
    Ok(SuiteReport {
        suite: Suite::Smw,
        checks: vec![BoundCheck::non_negative(
            format!("smw_identity {}/{} max_dev={:.2e}", r.passed, r.instances, r.max_deviation),
            if r.all_passed() { 1e-9 - r.max_deviation } else { -1.0 },
        )],
        notes: Vec::new(),
    })
}

impl std::str::FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Suite> {
        Suite::parse(s).ok_or_else(|| Error::config("suite", format!("unknown suite `{s}`")))
    }
}
