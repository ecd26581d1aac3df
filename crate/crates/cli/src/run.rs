//! The subcommand pipelines.

use std::path::PathBuf;
use std::sync::Arc;

use evapprox::checker::Condition;
use evapprox::families::FactorEstimation;
use evapprox::verifier::ExpectationRow;
use evapprox::{
    check_all, combine_discrete, combine_interpolated, factor_lemma4, make_bundle, mle_counterexample_poisson, sweep, BumpSpikes,
    ComponentSource, ComponentSpec, ConditionReport, ExpectationPlan, FactorInputs, FamilyBundle, FamilyConfig,
    FamilyId, GridSpec, LemmaRoute, Mode, Suite, VerificationReport,
};
use serde::Serialize;

use crate::config::{Components, ConfigError, Format, RunConfig, ThetaGrid};
use crate::output::write_report;
use crate::{
    CertifyArgs, CommonArgs, CounterexampleArgs, CounterexampleKind, MethodArg, ModeArg, OutputArgs, SuiteArg,
};

pub const EXIT_PASS: u8 = 0;
pub const EXIT_FAIL: u8 = 2;
pub const EXIT_CONFIG: u8 = 3;
const EXIT_RUNTIME: u8 = 1;

const DEFAULT_SEED: u64 = 0;
const DEFAULT_MODE_EPSILON: f64 = 0.2;
const DEFAULT_LAMBDAS: [f64; 3] = [1.0, 20.0, 100.0];

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("computation failed: {0}")]
    Compute(evapprox::Error),
    #[error("cannot write report: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            RunError::Compute(_) | RunError::Io(_) => EXIT_RUNTIME,
        }
    }
}

fn invalid(msg: impl Into<String>) -> RunError {
    RunError::Config(ConfigError::Invalid(msg.into()))
}

fn config_err(e: evapprox::Error) -> RunError {
    RunError::Config(ConfigError::Core(e))
}

fn valid_ids() -> String {
    FamilyId::ALL.iter().map(|id| id.as_str()).collect::<Vec<_>>().join(", ")
}

/// Config file merged with command-line overrides.
struct Resolved {
    config: RunConfig,
    id: FamilyId,
    family: FamilyConfig,
    seed: u64,
    seed_given: bool,
    format: Format,
    out: Option<PathBuf>,
}

fn resolve(a: &CommonArgs) -> Result<Resolved, RunError> {
    let config = match &a.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let name = a
        .family
        .clone()
        .or_else(|| config.family.as_ref().map(|f| f.id.clone()))
        .ok_or_else(|| invalid(format!("no family given; valid ids: {}", valid_ids())))?;
    let id: FamilyId = name.parse().map_err(config_err)?;
    let mut family = config.family.as_ref().map(|f| f.params.clone()).unwrap_or_default();
    family.n = a.n.or(family.n);
    family.alpha = a.alpha.or(family.alpha);
    family.epsilon = a.epsilon.or(family.epsilon);
    Ok(Resolved {
        seed: a.seed.or(config.seed).unwrap_or(DEFAULT_SEED),
        seed_given: a.seed.is_some() || config.seed.is_some(),
        format: a.output.format.unwrap_or(config.output.format),
        out: a.output.out.clone().or_else(|| config.output.path.clone()),
        id,
        family,
        config,
    })
}

impl Resolved {
    fn bundle(&self) -> Result<FamilyBundle, RunError> {
        make_bundle(self.id, &self.family).map_err(config_err)
    }

    fn write<D: Serialize, R: Serialize>(&self, doc: &D, rows: &[R]) -> Result<(), RunError> {
        Ok(write_report(doc, rows, self.format, self.out.as_deref())?)
    }
}

// ---- check-conditions ----------------------------------------------------------

#[derive(Serialize)]
struct ConditionsDoc<'a> {
    command: &'static str,
    family: FamilyId,
    bundle: String,
    lemma_route: LemmaRoute,
    factor_inputs: Option<FactorInputs>,
    factor_c: f64,
    factor_estimation: Option<&'a FactorEstimation>,
    seed: u64,
    passed: bool,
    conditions: &'a [ConditionReport],
}

#[derive(Serialize)]
struct ConditionRow<'a> {
    condition: Condition,
    family: &'a str,
    max_violation: f64,
    tolerance: f64,
    passing: bool,
    estimated_constant: Option<f64>,
    checked: usize,
    skipped: usize,
}

pub fn check_conditions(a: &CommonArgs) -> Result<u8, RunError> {
    let r = resolve(a)?;
    let bundle = r.bundle()?;
    let grid = GridSpec { seed: r.seed, ..GridSpec::default() };
    let reports = check_all(&bundle, &grid).map_err(RunError::Compute)?;
    let passed = reports.iter().all(|c| c.passing);
    for c in &reports {
        eprintln!(
            "{:?} {}: max violation {:.3e} (tol {:.0e}){}",
            c.condition,
            if c.passing { "pass" } else { "FAIL" },
            c.max_violation,
            c.tolerance,
            c.estimated_constant.map(|v| format!(", estimated constant {v:.6}")).unwrap_or_default()
        );
    }
    let rows: Vec<ConditionRow> = reports
        .iter()
        .map(|c| ConditionRow {
            condition: c.condition,
            family: &c.family,
            max_violation: c.max_violation,
            tolerance: c.tolerance,
            passing: c.passing,
            estimated_constant: c.estimated_constant,
            checked: c.checked,
            skipped: c.skipped,
        })
        .collect();
    let doc = ConditionsDoc {
        command: "check-conditions",
        family: r.id,
        bundle: bundle.id(),
        lemma_route: bundle.lemma_route,
        factor_inputs: bundle.factor_inputs,
        factor_c: bundle.factor_c,
        factor_estimation: bundle.factor_estimation.as_ref(),
        seed: r.seed,
        passed,
        conditions: &reports,
    };
    r.write(&doc, &rows)?;
    Ok(if passed { EXIT_PASS } else { EXIT_FAIL })
}

// ---- certify -----------------------------------------------------------------------

#[derive(Serialize)]
struct CertifyDoc<'a> {
    command: &'static str,
    family: FamilyId,
    seed: u64,
    passed: bool,
    tightest_factor: f64,
    report: &'a VerificationReport,
}

fn resolve_mode(arg: Option<ModeArg>, r: &Resolved) -> Mode {
    let configured = r.config.mode.unwrap_or(Mode::Discrete);
    let epsilon = r.family.epsilon.or(match configured {
        Mode::Interpolated { epsilon } => Some(epsilon),
        Mode::Discrete => None,
    });
    let interpolated = match arg {
        Some(ModeArg::Interpolated) => true,
        Some(ModeArg::Discrete) => false,
        None => matches!(configured, Mode::Interpolated { .. }),
    };
    if interpolated {
        Mode::Interpolated { epsilon: epsilon.unwrap_or(DEFAULT_MODE_EPSILON) }
    } else {
        Mode::Discrete
    }
}

/// A seed given on the command line or at the top of the config replaces the plan's own.
fn resolve_plan(method: Option<MethodArg>, samples: u64, family: &evapprox::Family, r: &Resolved) -> ExpectationPlan {
    let plan = match method {
        Some(MethodArg::ExactSum) => ExpectationPlan::exact_sum(),
        Some(MethodArg::Quadrature) => ExpectationPlan::quadrature(),
        Some(MethodArg::MonteCarlo) => ExpectationPlan::monte_carlo(samples, r.seed),
        None => r.config.plan.unwrap_or_else(|| ExpectationPlan::default_for(family)),
    };
    match plan {
        ExpectationPlan::MonteCarlo { samples, .. } if r.seed_given => ExpectationPlan::monte_carlo(samples, r.seed),
        p => p,
    }
}

/// `2 C₀` with `C₀ = factor_lemma4(log 2, 1)`: the even/odd split doubles the discrete factor.
fn interpolated_factor() -> f64 {
    2.0 * factor_lemma4(std::f64::consts::LN_2, 1.0).expect("finite inputs")
}

fn component_source(
    components: &Components,
    bundle: &FamilyBundle,
    mode: Mode,
) -> Result<Arc<dyn ComponentSource>, RunError> {
    Ok(match components {
        Components::Uniform(spec) => Arc::new(Suite::new(bundle, spec.clone()).map_err(config_err)?),
        Components::Bump(_) => {
            let Mode::Interpolated { epsilon } = mode else {
                return Err(invalid("bump_spikes components need interpolated mode"));
            };
            Arc::new(BumpSpikes::new(bundle.family, epsilon))
        }
    })
}

pub fn certify(a: &CertifyArgs) -> Result<u8, RunError> {
    let r = resolve(&a.common)?;
    let bundle = r.bundle()?;
    let mode = resolve_mode(a.mode, &r);
    let components = match a.suite {
        Some(SuiteArg::Spikes) => Components::Uniform(ComponentSpec::Spike),
        Some(SuiteArg::BumpSpikes) => Components::Bump(crate::config::BumpTag::BumpSpikes),
        None => r.config.components.clone().unwrap_or(match mode {
            Mode::Discrete => Components::Uniform(ComponentSpec::Spike),
            Mode::Interpolated { .. } => Components::Bump(crate::config::BumpTag::BumpSpikes),
        }),
    };
    let source = component_source(&components, &bundle, mode)?;
    let factor = a.factor.or(r.config.factor.map(|f| f.0));
    let composite = match mode {
        Mode::Discrete => {
            let c = combine_discrete(&bundle, source);
            match factor {
                Some(f) => c.with_factor(f).map_err(config_err)?,
                None => c,
            }
        }
        Mode::Interpolated { epsilon } => {
            combine_interpolated(&bundle, source, epsilon, factor.unwrap_or(interpolated_factor())).map_err(config_err)?
        }
    };
    let grid = r.config.theta_grid.clone().unwrap_or(ThetaGrid::Default).resolve(&bundle, mode)?;
    let plan = resolve_plan(a.method, a.samples, &bundle.family, &r);
    plan.check(&bundle.family).map_err(config_err)?;
    let report = sweep(&composite, &grid, &plan).map_err(RunError::Compute)?;
    let passed = report.passed();
    eprintln!(
        "certify {} [{}]: worst E = {:.6} ± {:.1e} at θ = {} over {} points, C = {} ({})",
        report.bundle,
        report.components,
        report.worst.value,
        report.worst.error_bound,
        report.worst.theta,
        report.theta_grid.len(),
        report.factor_c,
        if passed { "pass" } else { "FAIL" }
    );
    let doc = CertifyDoc {
        command: "certify",
        family: r.id,
        seed: r.seed,
        passed,
        tightest_factor: report.tightest_factor(),
        report: &report,
    };
    r.write(&doc, &report.expectations)?;
    Ok(if passed { EXIT_PASS } else { EXIT_FAIL })
}

// ---- counterexample ----------------------------------------------------------------

#[derive(Serialize)]
struct MleDoc<'a> {
    command: &'static str,
    kind: &'static str,
    family: FamilyId,
    bundle: String,
    seed: u64,
    violation_demonstrated: bool,
    max_estimate: f64,
    expectations: &'a [ExpectationRow],
}

#[derive(Serialize)]
struct SpikeDoc<'a> {
    command: &'static str,
    kind: &'static str,
    family: FamilyId,
    seed: u64,
    violation_demonstrated: bool,
    report: &'a VerificationReport,
}

pub fn counterexample(a: &CounterexampleArgs) -> Result<u8, RunError> {
    let r = resolve(&a.common)?;
    let kind = a.kind.unwrap_or(if r.id == FamilyId::Poisson { CounterexampleKind::Mle } else { CounterexampleKind::Spike });
    let violation = match kind {
        CounterexampleKind::Mle => {
            if r.id != FamilyId::Poisson {
                return Err(invalid(format!("the mle counterexample is defined for poisson only, got {}", r.id)));
            }
            let lambdas: Vec<f64> = if !a.lambda.is_empty() {
                a.lambda.clone()
            } else if let Some(ls) = &r.config.lambdas {
                ls.iter().map(|l| l.0).collect()
            } else {
                DEFAULT_LAMBDAS.to_vec()
            };
            if let Some(bad) = lambdas.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
                return Err(invalid(format!("lambda must be finite and > 0, got {bad}")));
            }
            let rows = lambdas
                .iter()
                .map(|&lambda| {
                    let e = mle_counterexample_poisson(lambda)?;
                    Ok(ExpectationRow { theta: lambda, estimate: e.estimate, error_bound: e.error_bound, method: e.method })
                })
                .collect::<evapprox::Result<Vec<_>>>()
                .map_err(RunError::Compute)?;
            for row in &rows {
                eprintln!("poisson mle: E_λ[e] = {:.6} ± {:.1e} at λ = {}", row.estimate, row.error_bound, row.theta);
            }
            let violation = rows.iter().any(|row| !row.passes());
            let doc = MleDoc {
                command: "counterexample",
                kind: "mle",
                family: r.id,
                bundle: FamilyBundle::poisson_mle().id(),
                seed: r.seed,
                violation_demonstrated: violation,
                max_estimate: rows.iter().map(|row| row.estimate).fold(f64::NEG_INFINITY, f64::max),
                expectations: &rows,
            };
            r.write(&doc, &rows)?;
            violation
        }
        CounterexampleKind::Spike => {
            let bundle = r.bundle()?;
            let composite = combine_discrete(&bundle, Arc::new(Suite::spikes(&bundle))).with_factor(1.0).map_err(config_err)?;
            let mode = Mode::Discrete;
            let grid = r.config.theta_grid.clone().unwrap_or(ThetaGrid::Default).resolve(&bundle, mode)?;
            let plan = resolve_plan(None, 0, &bundle.family, &r);
            plan.check(&bundle.family).map_err(config_err)?;
            let report = sweep(&composite, &grid, &plan).map_err(RunError::Compute)?;
            let violation = !report.passed();
            eprintln!(
                "spikes with C = 1 on {}: worst E = {:.6} at θ = {} ({})",
                report.bundle,
                report.worst.value,
                report.worst.theta,
                if violation { "violation demonstrated" } else { "no violation found" }
            );
            let doc = SpikeDoc {
                command: "counterexample",
                kind: "spike",
                family: r.id,
                seed: r.seed,
                violation_demonstrated: violation,
                report: &report,
            };
            r.write(&doc, &report.expectations)?;
            violation
        }
    };
    Ok(if violation { EXIT_FAIL } else { EXIT_PASS })
}

// ---- list-families -----------------------------------------------------------------

#[derive(Serialize)]
struct FamilyRow {
    id: FamilyId,
    bundle: String,
    net: String,
    estimator: String,
    lemma_route: LemmaRoute,
    factor_c: f64,
}

pub fn list_families(a: &OutputArgs) -> Result<u8, RunError> {
    let rows = FamilyId::ALL
        .iter()
        .map(|&id| {
            let b = make_bundle(id, &FamilyConfig::default())?;
            Ok(FamilyRow {
                id,
                bundle: b.id(),
                net: b.net.name(),
                estimator: b.estimator.name(),
                lemma_route: b.lemma_route,
                factor_c: b.factor_c,
            })
        })
        .collect::<evapprox::Result<Vec<_>>>()
        .map_err(RunError::Compute)?;
    write_report(&rows, &rows, a.format.unwrap_or_default(), a.out.as_deref())?;
    Ok(EXIT_PASS)
}
