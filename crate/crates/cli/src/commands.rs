//! The five verbs. Each resolves its configuration, runs a pipeline and
//! writes its reports, returning the files written and any failed checks.

use std::path::PathBuf;

use serde::Serialize;
use wipcrit::criteria::{
    dedecker_rio_curve, gordin_curve, hannan_partial, linear_process_report, maxwell_woodroofe_partial, reconcile,
    Agreement, CriterionReport, MonteCarlo,
};
use wipcrit::donsker::{
    fdd_covariance, ks_normality, limit_variance_exact, limit_variance_mc, simulate_paths, KsStatus,
};
use wipcrit::projector::{
    brute_force_cond_exp, check_cond_exp, check_orthogonality, check_projection, check_telescoping, exact_p0_norm,
    i2_error_norm, LagGram, OracleComparison,
};
use wipcrit::{
    auto_cycle_length, build_system, classification_table, make_preset, ClassificationTable, CriterionId, LinearFamily,
    ParameterFamily, Preset, PresetFamily, StreamSeed, SystemModel, Verdict,
};

use crate::config::{Fault, RunConfig};
use crate::report::Reports;
use crate::CliError;

/// Stream labels, one per consumer of randomness.
mod stream {
    pub const C1: u64 = 1;
    pub const C2: u64 = 2;
    pub const LINEAR: u64 = 3;
    pub const PATHS: u64 = 4;
    pub const SIGMA: u64 = 5;
}

/// Tolerances of the Donsker desk check.
pub const ENDPOINT_VARIANCE_TOLERANCE: f64 = 0.15;
pub const INCREMENT_Z_MAX: f64 = 4.0;

const SERIES_N_MAX: u64 = 1 << 16;
const SIGMA_ORACLE_TRIALS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    OracleFailure,
    StatisticalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub status: Status,
    /// One line per failed check.
    pub failures: Vec<String>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        match self.status {
            Status::Success => 0,
            Status::OracleFailure => 3,
            Status::StatisticalFailure => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Verb {
    Classify,
    Verify,
    Estimate,
    Donsker,
    Sweep,
}

fn default_k(verb: Verb, preset: Preset) -> usize {
    match (verb, preset) {
        (Verb::Classify | Verb::Sweep, Preset::Ce1) => 64,
        (Verb::Classify | Verb::Sweep, Preset::Ce2) => wipcrit::series::CE2_MAX_K,
        (Verb::Estimate, Preset::Ce1) => 8,
        (Verb::Estimate, Preset::Ce2) => 4,
        (Verb::Donsker, Preset::Ce1) => 6,
        (Verb::Donsker, Preset::Ce2) => 3,
        (_, Preset::Linear) => 1 << 12,
        (Verb::Verify, _) => 2,
    }
}

enum Family {
    Construction(ParameterFamily),
    Linear(LinearFamily),
}

/// The small family used by `verify-projections` when nothing else is given:
/// with `M = 16` and `n_max = 4` its window is `[-2, 3]`.
fn tiny_family() -> ParameterFamily {
    ParameterFamily::new("tiny", vec![1.5, 0.5], vec![0.25, 0.125], vec![1.0, 2.0], Some(vec![0.25, 0.3]))
        .expect("valid built-in family")
}

/// Resolve the family and record the choices back into `cfg`.
fn resolve_family(cfg: &mut RunConfig, verb: Verb) -> Result<Family, CliError> {
    if cfg.explicit() {
        let (Some(theta), Some(rho), Some(big_n)) = (cfg.theta.clone(), cfg.rho.clone(), cfg.big_n.clone()) else {
            return Err(CliError::Config("an explicit family needs theta, rho and big_n".into()));
        };
        let label = cfg.label.get_or_insert_with(|| "custom".into()).clone();
        let fam = ParameterFamily::new(label, theta, rho, big_n, cfg.epsilon.clone())?;
        fam.validate().into_result()?;
        cfg.preset = None;
        cfg.k = Some(fam.k());
        cfg.epsilon = Some(fam.epsilon().to_vec());
        return Ok(Family::Construction(fam));
    }
    if verb == Verb::Verify && cfg.preset.is_none() {
        let fam = tiny_family();
        cfg.label = Some(fam.label().into());
        cfg.theta = Some(fam.theta().to_vec());
        cfg.rho = Some(fam.rho().to_vec());
        cfg.big_n = Some(fam.big_n().to_vec());
        cfg.epsilon = Some(fam.epsilon().to_vec());
        cfg.k = Some(fam.k());
        cfg.m.get_or_insert(16);
        return Ok(Family::Construction(fam));
    }
    let preset = *cfg.preset.get_or_insert(Preset::Ce1);
    let k = *cfg.k.get_or_insert(default_k(verb, preset));
    Ok(match make_preset(preset, k)? {
        PresetFamily::Construction(f) => Family::Construction(f),
        PresetFamily::Linear(l) => Family::Linear(l),
    })
}

fn construction(family: Family, verb: &str) -> Result<ParameterFamily, CliError> {
    match family {
        Family::Construction(f) => Ok(f),
        Family::Linear(_) => Err(CliError::Config(format!(
            "`{verb}` needs a construction family (CE1, CE2 or explicit); LINEAR is handled by `estimate`"
        ))),
    }
}

fn build_model(cfg: &mut RunConfig, fam: &ParameterFamily, n_max: u64) -> Result<SystemModel, CliError> {
    let m = match cfg.m {
        Some(m) => m,
        None => auto_cycle_length(fam)?,
    };
    cfg.m = Some(m);
    Ok(build_system(fam, m, n_max)?)
}

fn require_trials(trials: usize, min: usize) -> Result<(), CliError> {
    if trials < min {
        return Err(CliError::Config(format!("trials must be >= {min}, got {trials}")));
    }
    Ok(())
}

fn reports(cfg: &RunConfig) -> Result<Reports, CliError> {
    Reports::create(&cfg.output())
}

#[derive(Serialize)]
struct VerdictRow<'a> {
    criterion: CriterionId,
    verdict: Verdict,
    total: f64,
    note: &'a str,
}

#[derive(Serialize)]
struct SeriesRow {
    criterion: CriterionId,
    n: usize,
    term: f64,
    partial_sum: f64,
}

#[derive(Serialize)]
struct BlockRow {
    criterion: CriterionId,
    j: usize,
    block: f64,
}

fn table_rows(table: &ClassificationTable) -> impl Iterator<Item = &wipcrit::SeriesDiagnostic> {
    std::iter::once(&table.square_integrable).chain(table.rows.iter())
}

/// Series verdicts for the four criteria, with every curve.
pub fn cmd_classify(cfg: RunConfig) -> Result<RunOutcome, CliError> {
    let mut cfg = cfg;
    let policy = cfg.resolve_policy()?;
    let fam = construction(resolve_family(&mut cfg, Verb::Classify)?, "classify")?;
    let n_max = *cfg.n_max.get_or_insert(SERIES_N_MAX);
    let table = classification_table(&fam, n_max as usize, &policy)?;

    let mut out = reports(&cfg)?;
    out.csv(
        "classification.csv",
        table.rows.iter().map(|d| VerdictRow {
            criterion: d.criterion,
            verdict: d.verdict,
            total: d.total(),
            note: &d.note,
        }),
    )?;
    out.csv(
        "series.csv",
        table_rows(&table).flat_map(|d| {
            d.terms.iter().zip(&d.partial_sums).enumerate().map(|(i, (&term, &partial_sum))| SeriesRow {
                criterion: d.criterion,
                n: i + 1,
                term,
                partial_sum,
            })
        }),
    )?;
    out.csv(
        "blocks.csv",
        table_rows(&table).flat_map(|d| {
            d.dyadic_blocks.iter().enumerate().map(|(j, &block)| BlockRow { criterion: d.criterion, j, block })
        }),
    )?;

    #[derive(Serialize)]
    struct Results<'a> {
        label: &'a str,
        verdicts: Vec<(CriterionId, Verdict)>,
        square_integrable: Verdict,
        notes: &'a [String],
    }
    let results = Results {
        label: &table.label,
        verdicts: table.rows.iter().map(|d| (d.criterion, d.verdict)).collect(),
        square_integrable: table.square_integrable.verdict,
        notes: &table.notes,
    };
    out.summary("classify", &cfg, &results)?;
    Ok(RunOutcome { files: out.into_files(), status: Status::Success, failures: Vec::new() })
}

#[derive(Debug, Clone, Serialize)]
struct CheckRow {
    suite: String,
    index: i64,
    atoms: u64,
    mismatches: u64,
    max_abs_diff: f64,
    passed: bool,
    detail: String,
}

impl CheckRow {
    fn oracle(suite: &str, index: i64, c: &OracleComparison) -> Self {
        CheckRow {
            suite: suite.into(),
            index,
            atoms: c.atoms,
            mismatches: c.exact_mismatches,
            max_abs_diff: c.max_abs_diff,
            passed: c.passed(),
            detail: c.name.clone(),
        }
    }

    fn numeric(suite: &str, index: i64, diff: f64, passed: bool, detail: String) -> Self {
        CheckRow {
            suite: suite.into(),
            index,
            atoms: 0,
            mismatches: u64::from(!passed),
            max_abs_diff: diff,
            passed,
            detail,
        }
    }
}

/// Corrupt the delay of arc 1 to the smallest shift whose defect exceeds
/// `epsilon_1`, leaving everything else as built.
fn inject_arc_table_fault(model: SystemModel) -> Result<SystemModel, CliError> {
    let eps = model.family().epsilon()[0];
    let bad = (1..model.m())
        .find(|&s| !model.defect(1, s).le_f64(eps))
        .ok_or_else(|| CliError::Config("no delay violates the invariance bound of arc 1".into()))?;
    Ok(model.with_delay_unchecked(1, bad))
}

/// Oracle equality, orthogonality, I_2 bounds and exact identities on a
/// model small enough to enumerate.
pub fn cmd_verify_projections(cfg: RunConfig) -> Result<RunOutcome, CliError> {
    let mut cfg = cfg;
    cfg.resolve_policy()?;
    let fam = construction(resolve_family(&mut cfg, Verb::Verify)?, "verify-projections")?;
    let n_max = *cfg.n_max.get_or_insert(4);
    let mut model = build_model(&mut cfg, &fam, n_max)?;
    if cfg.inject_fault == Some(Fault::ArcTable) {
        model = inject_arc_table_fault(model)?;
    }
    let window = model.window();
    let top = *model.delays().iter().max().expect("K >= 1") as i64;
    // enumeration needs every coordinate of f o T^i, down to e_{i - N_1}, in the window
    let i_hi = (top + 1).min(window.hi + *model.delays().iter().min().expect("K >= 1") as i64);
    // refuse early, naming the size, if the state space is too large
    brute_force_cond_exp(&model, 0)?;

    let mut rows = Vec::new();
    for i in 0..=i_hi {
        rows.push(CheckRow::oracle("cond_exp", i, &check_cond_exp(&model, i, window)?));
    }
    for i in 0..=i_hi {
        rows.push(CheckRow::oracle("projection", i, &check_projection(&model, i, window)?));
        rows.push(CheckRow::oracle("telescoping", i, &check_telescoping(&model, i, window)?));
    }
    for i in 0..=top.min(i_hi) {
        rows.push(CheckRow::oracle("orthogonality", i, &check_orthogonality(&model, i, window)?));
    }
    for k in 1..=model.k() {
        rows.push(match i2_error_norm(&model, k) {
            Ok(b) => {
                CheckRow::numeric("i2_bound", k as i64, b.norm - b.bound, true, format!("{} <= {}", b.norm, b.bound))
            }
            Err(wipcrit::Error::InvariantViolated(msg)) => {
                CheckRow::numeric("i2_bound", k as i64, f64::NAN, false, msg)
            }
            Err(e) => return Err(e.into()),
        });
    }

    // sum_i ||P_0(f o T^i)||_2 against the arc lengths directly
    let lhs: f64 = (0..=top).map(|i| exact_p0_norm(&model, i)).sum();
    let rhs: f64 = (1..=model.k()).map(|k| model.theta(k) * (model.arc(k).len as f64 / model.m() as f64).sqrt()).sum();
    let d = (lhs - rhs).abs();
    rows.push(CheckRow::numeric("p0_norm_identity", 0, d, d <= 1e-12, format!("{lhs} vs {rhs}")));

    // ||E(S_n|F_0)||_2^2 from the lag Gram matrix against enumeration
    let gram = LagGram::new(&model);
    let tables = (0..=top.min(n_max as i64 - 1))
        .map(|i| brute_force_cond_exp(&model, i))
        .collect::<wipcrit::Result<Vec<_>>>()?;
    let configs = tables[0].configs();
    for n in 1..=n_max {
        let mut acc = 0.0;
        for pos in 0..model.m() {
            for c in 0..configs {
                let v: f64 = tables.iter().take(n as usize).map(|t| t.value(&model, pos, c)).sum();
                acc += v * v;
            }
        }
        let brute = acc / (model.m() as f64 * configs as f64);
        let exact = gram.esn_sq(n);
        let d = (brute - exact).abs();
        rows.push(CheckRow::numeric(
            "esn_identity",
            n as i64,
            d,
            d <= 1e-12 * exact.max(1.0),
            format!("{brute} vs {exact}"),
        ));
    }

    let failures: Vec<String> =
        rows.iter().filter(|r| !r.passed).map(|r| format!("{} at {}: {}", r.suite, r.index, r.detail)).collect();
    let mut out = reports(&cfg)?;
    out.csv("checks.csv", rows.iter())?;
    #[derive(Serialize)]
    struct Results<'a> {
        model: wipcrit::system::ModelDescription,
        checks: usize,
        failures: &'a [String],
    }
    out.summary(
        "verify-projections",
        &cfg,
        &Results { model: model.describe(), checks: rows.len(), failures: &failures },
    )?;
    let status = if failures.is_empty() { Status::Success } else { Status::OracleFailure };
    Ok(RunOutcome { files: out.into_files(), status, failures })
}

#[derive(Serialize)]
struct CurveRow {
    criterion: CriterionId,
    start: u64,
    end: u64,
    value: f64,
    stderr: f64,
    trials: u64,
    cumulative: f64,
}

fn curve_rows(reports: &[CriterionReport]) -> Vec<CurveRow> {
    reports
        .iter()
        .flat_map(|r| {
            r.entries.iter().map(|e| CurveRow {
                criterion: r.criterion,
                start: e.start,
                end: e.end,
                value: e.estimate.value,
                stderr: e.estimate.stderr,
                trials: e.estimate.trials,
                cumulative: e.cumulative,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct EmpiricalVerdict<'a> {
    criterion: CriterionId,
    verdict: Verdict,
    blocks: &'a [f64],
    note: &'a str,
}

fn empirical_verdicts(reports: &[CriterionReport]) -> Vec<EmpiricalVerdict<'_>> {
    reports
        .iter()
        .map(|r| EmpiricalVerdict {
            criterion: r.criterion,
            verdict: r.verdict,
            blocks: &r.dyadic_blocks,
            note: &r.note,
        })
        .collect()
}

/// Direct evaluation of the criteria on the built model, reconciled with the
/// series verdicts.
pub fn cmd_estimate(cfg: RunConfig) -> Result<RunOutcome, CliError> {
    let mut cfg = cfg;
    let policy = cfg.resolve_policy()?;
    let family = resolve_family(&mut cfg, Verb::Estimate)?;
    let p_max = *cfg.p_max.get_or_insert(1 << 10);
    let exec = cfg.execution();
    cfg.execution = Some(exec);
    cfg.seed = Some(cfg.seed());
    match family {
        Family::Linear(lin) => {
            let trials = *cfg.trials.get_or_insert(20_000);
            require_trials(trials, wipcrit::criteria::MIN_TRIALS)?;
            let mc = MonteCarlo::new(StreamSeed::new(cfg.seed(), stream::LINEAR), trials, exec)?;
            let rep = linear_process_report(&lin, p_max, &mc, &policy)?;
            let curves = [rep.c4.clone(), rep.c1.clone()];
            let mut out = reports(&cfg)?;
            out.csv("curves.csv", curve_rows(&curves))?;
            out.summary("estimate", &cfg, &empirical_verdicts(&curves))?;
            Ok(RunOutcome { files: out.into_files(), status: Status::Success, failures: Vec::new() })
        }
        Family::Construction(fam) => {
            let delays = fam.delays()?;
            let top = *delays.last().expect("K >= 1");
            let n_max = *cfg.n_max.get_or_insert(top.max(1 << 14));
            let i_max = *cfg.i_max.get_or_insert(top);
            let trials = *cfg.trials.get_or_insert(wipcrit::criteria::DEFAULT_TRIALS);
            require_trials(trials, wipcrit::criteria::MIN_TRIALS)?;
            let model = build_model(&mut cfg, &fam, n_max)?;

            let c1_mc = MonteCarlo::new(StreamSeed::new(cfg.seed(), stream::C1), trials, exec)?;
            let c2_mc = MonteCarlo::new(StreamSeed::new(cfg.seed(), stream::C2), trials, exec)?;
            let curves = [
                gordin_curve(&model, &c1_mc, p_max, &policy)?,
                dedecker_rio_curve(&model, &c2_mc, p_max, &policy)?,
                maxwell_woodroofe_partial(&model, n_max, &policy, exec)?,
                hannan_partial(&model, i_max, &policy)?,
            ];

            // A truncated preset is reconciled against the series of the full
            // preset; an explicit family against its own series.
            let series_family = match cfg.preset {
                Some(p) => construction(
                    match make_preset(p, default_k(Verb::Classify, p))? {
                        PresetFamily::Construction(f) => Family::Construction(f),
                        PresetFamily::Linear(l) => Family::Linear(l),
                    },
                    "estimate",
                )?,
                None => fam.clone(),
            };
            let table = classification_table(&series_family, SERIES_N_MAX as usize, &policy)?;
            let recon = reconcile(&table, &curves);

            #[derive(Serialize)]
            struct ReconRow {
                criterion: CriterionId,
                series: Verdict,
                empirical: Verdict,
                agreement: Agreement,
            }
            let mut out = reports(&cfg)?;
            out.csv("curves.csv", curve_rows(&curves))?;
            out.csv(
                "reconciliation.csv",
                recon.rows.iter().map(|r| ReconRow {
                    criterion: r.criterion,
                    series: r.series,
                    empirical: r.empirical,
                    agreement: r.agreement,
                }),
            )?;
            #[derive(Serialize)]
            struct Results<'a> {
                series_label: &'a str,
                empirical: Vec<EmpiricalVerdict<'a>>,
                reconciliation: &'a wipcrit::ReconciliationReport,
                agrees: bool,
            }
            out.summary(
                "estimate",
                &cfg,
                &Results {
                    series_label: &table.label,
                    empirical: empirical_verdicts(&curves),
                    reconciliation: &recon,
                    agrees: recon.agrees(),
                },
            )?;
            let failures: Vec<String> = recon
                .rows
                .iter()
                .filter(|r| r.agreement == Agreement::Disagree)
                .map(|r| format!("{}: series {} but empirical {}", r.criterion, r.series, r.empirical))
                .collect();
            let status = if failures.is_empty() { Status::Success } else { Status::StatisticalFailure };
            Ok(RunOutcome { files: out.into_files(), status, failures })
        }
    }
}

/// Simulate normalized partial-sum paths and test their Gaussian behaviour.
pub fn cmd_donsker(cfg: RunConfig) -> Result<RunOutcome, CliError> {
    let mut cfg = cfg;
    cfg.resolve_policy()?;
    let fam = construction(resolve_family(&mut cfg, Verb::Donsker)?, "donsker")?;
    let n = *cfg.n.get_or_insert(4096);
    let grid = *cfg.grid_size.get_or_insert(8);
    let trials = *cfg.trials.get_or_insert(2000);
    require_trials(trials, wipcrit::donsker::MIN_PATHS)?;
    if grid < 2 {
        return Err(CliError::Config("grid_size must be >= 2".into()));
    }
    let exec = cfg.execution();
    cfg.execution = Some(exec);
    let seed = *cfg.seed.get_or_insert(1);
    let n_max = *cfg.n_max.get_or_insert(n);
    let model = build_model(&mut cfg, &fam, n_max)?;

    let ensemble = simulate_paths(&model, n, grid, trials, StreamSeed::new(seed, stream::PATHS), exec)?;
    let sigma = limit_variance_exact(&model);
    let sigma_mc = limit_variance_mc(&model, SIGMA_ORACLE_TRIALS, StreamSeed::new(seed, stream::SIGMA), exec);
    let ks = ks_normality(&ensemble, sigma.sigma2)?;
    let cov = fdd_covariance(&ensemble, sigma.sigma2)?;

    let mut failures = Vec::new();
    match ks.status {
        KsStatus::Pass | KsStatus::Degenerate => {}
        KsStatus::Fail => failures.push(format!("KS distance {} >= {}", ks.distance, ks.threshold)),
        KsStatus::DegenerateNonzero => failures.push("sigma^2 = 0 but some endpoints are nonzero".into()),
    }
    if !cov.endpoint_within(ENDPOINT_VARIANCE_TOLERANCE) {
        failures.push(format!(
            "endpoint variance {} deviates from sigma^2 = {} by {:.3}",
            cov.endpoint_variance, sigma.sigma2, cov.endpoint_relative_error
        ));
    }
    if !cov.halves_within(INCREMENT_Z_MAX) {
        failures.push(format!(
            "disjoint-increment covariance {:?} is not within {INCREMENT_Z_MAX} stderr of 0",
            cov.halves.estimate
        ));
    }

    #[derive(Serialize)]
    struct PathRow {
        trial: usize,
        grid_index: usize,
        value: f64,
    }
    #[derive(Serialize)]
    struct CovRow {
        s_index: usize,
        t_index: usize,
        s: f64,
        t: f64,
        empirical: f64,
        expected: f64,
    }
    #[derive(Serialize)]
    struct IncrementRow {
        first_from: i64,
        first_to: i64,
        second_from: i64,
        second_to: i64,
        covariance: f64,
        stderr: f64,
    }
    let mut out = reports(&cfg)?;
    out.csv("paths.csv", ensemble.rows().map(|(trial, grid_index, value)| PathRow { trial, grid_index, value }))?;
    let g = cov.grid.len();
    out.csv(
        "covariance.csv",
        (0..g).flat_map(|a| (0..g).map(move |b| (a, b))).map(|(a, b)| CovRow {
            s_index: a,
            t_index: b,
            s: cov.grid[a],
            t: cov.grid[b],
            empirical: cov.empirical[a][b],
            expected: cov.expected[a][b],
        }),
    )?;
    out.csv(
        "increments.csv",
        std::iter::once(&cov.halves).chain(&cov.adjacent).map(|c| IncrementRow {
            first_from: c.first.0,
            first_to: c.first.1,
            second_from: c.second.0,
            second_to: c.second.1,
            covariance: c.estimate.value,
            stderr: c.estimate.stderr,
        }),
    )?;
    #[derive(Serialize)]
    struct Results<'a> {
        model: wipcrit::system::ModelDescription,
        sigma2_exact: f64,
        sigma2_monte_carlo: wipcrit::EstimateWithError,
        ks: &'a wipcrit::donsker::KsReport,
        endpoint_variance: f64,
        endpoint_relative_error: f64,
        halves_covariance: wipcrit::EstimateWithError,
        failures: &'a [String],
    }
    out.summary(
        "donsker",
        &cfg,
        &Results {
            model: model.describe(),
            sigma2_exact: sigma.sigma2,
            sigma2_monte_carlo: sigma_mc,
            ks: &ks,
            endpoint_variance: cov.endpoint_variance,
            endpoint_relative_error: cov.endpoint_relative_error,
            halves_covariance: cov.halves.estimate,
            failures: &failures,
        },
    )?;
    let status = if failures.is_empty() { Status::Success } else { Status::StatisticalFailure };
    Ok(RunOutcome { files: out.into_files(), status, failures })
}

/// Classification across `K = 4..=k_max`, with series totals and the last
/// dyadic block per criterion as growth-vs-K curves.
pub fn cmd_sweep_k(cfg: RunConfig) -> Result<RunOutcome, CliError> {
    let mut cfg = cfg;
    let policy = cfg.resolve_policy()?;
    if cfg.explicit() {
        return Err(CliError::Config("sweep-k runs over a preset; explicit sequences are not swept".into()));
    }
    let preset = *cfg.preset.get_or_insert(Preset::Ce1);
    if preset == Preset::Linear {
        return Err(CliError::Config("sweep-k needs CE1 or CE2".into()));
    }
    let k_max = *cfg.k_max.get_or_insert(default_k(Verb::Sweep, preset));
    if k_max < 4 {
        return Err(CliError::Config(format!("k_max must be >= 4, got {k_max}")));
    }
    let n_max = *cfg.n_max.get_or_insert(SERIES_N_MAX);
    let exec = cfg.execution();

    let ks: Vec<usize> = (4..=k_max).collect();
    let tables = wipcrit::exec::map_ordered(exec, ks, |k| {
        let fam = make_preset(preset, k)?.construction().expect("construction preset");
        classification_table(&fam, n_max as usize, &policy).map(|t| (k, t))
    })
    .into_iter()
    .collect::<wipcrit::Result<Vec<_>>>()?;

    #[derive(Serialize)]
    struct SweepRow {
        k: usize,
        criterion: CriterionId,
        verdict: Verdict,
        total: f64,
        last_block: f64,
    }
    let rows = tables.iter().flat_map(|(k, t)| {
        table_rows(t).map(move |d| SweepRow {
            k: *k,
            criterion: d.criterion,
            verdict: d.verdict,
            total: d.total(),
            last_block: d.dyadic_blocks.last().copied().unwrap_or(0.0),
        })
    });
    let mut out = reports(&cfg)?;
    out.csv("sweep.csv", rows)?;
    #[derive(Serialize)]
    struct Results {
        k_values: Vec<usize>,
        final_verdicts: Vec<(CriterionId, Verdict)>,
    }
    let last = &tables.last().expect("k_max >= 4").1;
    out.summary(
        "sweep-k",
        &cfg,
        &Results {
            k_values: tables.iter().map(|(k, _)| *k).collect(),
            final_verdicts: last.rows.iter().map(|d| (d.criterion, d.verdict)).collect(),
        },
    )?;
    Ok(RunOutcome { files: out.into_files(), status: Status::Success, failures: Vec::new() })
}
