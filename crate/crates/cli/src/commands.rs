//! Subcommand implementations and their report types.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use rigidity_core::cusp::{
    make_double_watt, make_double_watt_unit, solve_cusp_flexes_with_b, trace_branch,
    verify_watt_relations, Branch, DegenerateFlexSolution,
};
use rigidity_core::{
    classify, classic_order_test, fit_order, first_order_flex_basis, sample_polynomial,
    stress_basis, trace_mechanism, Classification, Configuration, ElongationProfile, Framework,
    Measure, OrderEstimate, OrderTestOptions, OrderTestVerdict, PathSamples, RigidityError,
};

/// Failure modes with distinct process exit codes.
pub enum CliError {
    /// The input file failed schema or combinatorial validation (exit 2).
    Validation(String),
    /// A runtime, numerical, or I/O failure (exit 1).
    Runtime(String),
}

impl From<RigidityError> for CliError {
    fn from(err: RigidityError) -> Self {
        CliError::Runtime(err.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Runtime(format!("i/o failure: {err}"))
    }
}

fn runtime(msg: impl Into<String>) -> CliError {
    CliError::Runtime(msg.into())
}

#[derive(Serialize)]
struct ToolInfo {
    name: &'static str,
    version: &'static str,
}

impl ToolInfo {
    fn current() -> Self {
        ToolInfo {
            name: "rigidity",
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}

#[derive(Serialize)]
struct InputInfo {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct FrameworkSummary {
    dimension: usize,
    vertices: usize,
    edges: usize,
    pinned_vertices: usize,
    free_coordinates: usize,
}

impl FrameworkSummary {
    fn of(f: &Framework) -> Self {
        FrameworkSummary {
            dimension: f.dimension(),
            vertices: f.vertices().len(),
            edges: f.edges().len(),
            pinned_vertices: f.pinned_vertex_count(),
            free_coordinates: f.free_coord_count(),
        }
    }
}

/// Load a framework from disk, splitting failures by exit-code class.
///
/// Missing files and unreadable bytes are runtime failures; schema and
/// combinatorial violations are validation failures and carry one
/// diagnostic line per issue.
fn load_framework(path: &Path) -> Result<(Framework, Vec<String>, InputInfo), CliError> {
    let bytes = fs::read(path)
        .map_err(|err| runtime(format!("cannot read {}: {err}", path.display())))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| CliError::Validation(format!("{}: input is not UTF-8", path.display())))?;
    let (framework, warnings) =
        Framework::from_json(&text).map_err(|report| CliError::Validation(report.to_string()))?;
    let input = InputInfo {
        path: path.display().to_string(),
        sha256: crate::report::sha256_hex(&bytes),
    };
    Ok((framework, warnings, input))
}

fn print_report<T: Serialize>(report: &T) {
    println!("{}", crate::report::to_json(report));
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ValidateReport {
    tool: ToolInfo,
    input: InputInfo,
    framework: FrameworkSummary,
    valid: bool,
    warnings: Vec<String>,
}

pub fn cmd_validate(path: &Path) -> Result<(), CliError> {
    let (framework, warnings, input) = load_framework(path)?;
    let report = ValidateReport {
        tool: ToolInfo::current(),
        input,
        framework: FrameworkSummary::of(&framework),
        valid: true,
        warnings,
    };
    print_report(&report);
    Ok(())
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct VerdictEntry {
    n: usize,
    verdict: &'static str,
    detail: String,
}

fn verdict_entry(n: usize, verdict: &OrderTestVerdict) -> VerdictEntry {
    match verdict {
        OrderTestVerdict::Flexible { witness } => VerdictEntry {
            n,
            verdict: "flexible",
            detail: format!(
                "witness flex of order {} with degeneracy {}",
                witness.order(),
                witness.degeneracy()
            ),
        },
        OrderTestVerdict::Rigid { certificate } => VerdictEntry {
            n,
            verdict: "rigid",
            detail: certificate.to_string(),
        },
        OrderTestVerdict::Inconclusive { reason } => VerdictEntry {
            n,
            verdict: "inconclusive",
            detail: reason.clone(),
        },
    }
}

#[derive(Serialize)]
struct AnalyzeReport {
    tool: ToolInfo,
    input: InputInfo,
    framework: FrameworkSummary,
    rigidity_matrix_rank: usize,
    flex_space_dimension: usize,
    stress_space_dimension: usize,
    seed: u64,
    verdicts: Vec<VerdictEntry>,
    warnings: Vec<String>,
}

pub fn cmd_analyze(path: &Path, max_order: usize, seed: u64) -> Result<(), CliError> {
    if max_order == 0 {
        return Err(runtime("--max-order must be at least 1"));
    }
    let (framework, warnings, input) = load_framework(path)?;
    let rest = framework.rest_configuration();
    let rank = rigidity_core::linalg::rank_with_sigma(&framework.rigidity_matrix(&rest)?).0;
    let flex_dim = first_order_flex_basis(&framework, &rest)?.len();
    let stress_dim = stress_basis(&framework, &rest)?.len();
    let options = OrderTestOptions {
        seed,
        ..OrderTestOptions::default()
    };
    let mut verdicts = Vec::new();
    for n in 1..=max_order {
        let verdict = classic_order_test(&framework, &rest, n, &options)?;
        verdicts.push(verdict_entry(n, &verdict));
    }
    let report = AnalyzeReport {
        tool: ToolInfo::current(),
        input,
        framework: FrameworkSummary::of(&framework),
        rigidity_matrix_rank: rank,
        flex_space_dimension: flex_dim,
        stress_space_dimension: stress_dim,
        seed,
        verdicts,
        warnings,
    };
    print_report(&report);
    Ok(())
}

// ---------------------------------------------------------------------------
// trace
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct BranchSummary {
    label: String,
    file: String,
    rows: usize,
    s_final: f64,
    max_abs_elongation: f64,
    truncated: bool,
}

#[derive(Serialize)]
struct TraceReport {
    tool: ToolInfo,
    input: InputInfo,
    framework: FrameworkSummary,
    direction: String,
    steps: usize,
    step_length: f64,
    branch_count: usize,
    branches: Vec<BranchSummary>,
}

fn write_branch_csv(
    framework: &Framework,
    samples: &PathSamples,
    label: &str,
    file: &Path,
) -> Result<BranchSummary, CliError> {
    let mut out = fs::File::create(file)
        .map_err(|err| runtime(format!("cannot create {}: {err}", file.display())))?;
    samples.write_csv(framework, &mut out)?;
    Ok(BranchSummary {
        label: label.to_string(),
        file: file.display().to_string(),
        rows: samples.records.len(),
        s_final: samples.total_arclength(),
        max_abs_elongation: samples.max_abs_elongation(),
        truncated: samples.truncated,
    })
}

/// Derive a per-branch file name: `path/to/run.csv` becomes
/// `path/to/run.plus.csv` and `path/to/run.minus.csv`.
fn branch_file(out: &Path, label: &str) -> PathBuf {
    let stem = out
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("trace");
    let ext = out.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    out.with_file_name(format!("{stem}.{label}.{ext}"))
}

/// Pick the direction for an automatic trace.
///
/// A one-dimensional flex space leaves no choice. With more dimensions the
/// second-order test is consulted: its witness starts along a direction on
/// which every stress obstruction vanishes, which is where finite motion
/// can actually leave the rest configuration. Both signs are then traced
/// because a curve through a degenerate point can open up two branches.
fn auto_directions(
    framework: &Framework,
    rest: &Configuration,
    basis: &[nalgebra::DVector<f64>],
    seed: u64,
) -> Result<Vec<(String, nalgebra::DVector<f64>)>, CliError> {
    if basis.len() == 1 {
        return Ok(vec![("auto".to_string(), basis[0].clone())]);
    }
    let options = OrderTestOptions {
        seed,
        ..OrderTestOptions::default()
    };
    let direction = match classic_order_test(framework, rest, 2, &options)? {
        OrderTestVerdict::Flexible { witness } => witness.derivative(1).clone(),
        _ => basis[0].clone(),
    };
    let unit = &direction / direction.norm();
    Ok(vec![
        ("plus".to_string(), unit.clone()),
        ("minus".to_string(), -unit),
    ])
}

pub fn cmd_trace(
    path: &Path,
    direction: &str,
    steps: usize,
    step: f64,
    out: &Path,
    seed: u64,
) -> Result<(), CliError> {
    let (framework, _warnings, input) = load_framework(path)?;
    let rest = framework.rest_configuration();
    let basis = first_order_flex_basis(&framework, &rest)?;
    if basis.is_empty() {
        return Err(runtime("no flex direction: the framework is first-order rigid"));
    }

    let directions: Vec<(String, nalgebra::DVector<f64>)> = if direction == "auto" {
        auto_directions(&framework, &rest, &basis, seed)?
    } else {
        let index: usize = direction.parse().map_err(|_| {
            runtime(format!(
                "--direction must be 'auto' or a flex basis index, got '{direction}'"
            ))
        })?;
        if index >= basis.len() {
            return Err(runtime(format!(
                "flex basis index {index} out of range: the flex space has dimension {}",
                basis.len()
            )));
        }
        vec![(format!("basis-{index}"), basis[index].clone())]
    };

    let mut branches = Vec::new();
    for (label, dir) in &directions {
        let samples = trace_mechanism(&framework, &rest, dir, step, steps)?;
        let file = if directions.len() == 1 {
            out.to_path_buf()
        } else {
            branch_file(out, label)
        };
        branches.push(write_branch_csv(&framework, &samples, label, &file)?);
    }

    let report = TraceReport {
        tool: ToolInfo::current(),
        input,
        framework: FrameworkSummary::of(&framework),
        direction: direction.to_string(),
        steps,
        step_length: step,
        branch_count: branches.len(),
        branches,
    };
    print_report(&report);
    Ok(())
}

// ---------------------------------------------------------------------------
// order
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct PerEdgeEntry {
    edge: String,
    slope: Option<f64>,
}

#[derive(Serialize)]
struct EstimateJson {
    slope: Option<f64>,
    window: Option<(f64, f64)>,
    r2: Option<f64>,
    floor_hit: bool,
    usable_points: usize,
    per_edge: Vec<PerEdgeEntry>,
}

fn estimate_json(estimate: &OrderEstimate, labels: &[String]) -> EstimateJson {
    EstimateJson {
        slope: estimate.slope,
        window: estimate.fit_window,
        r2: estimate.r_squared,
        floor_hit: estimate.floor_hit,
        usable_points: estimate.usable_points,
        per_edge: labels
            .iter()
            .zip(&estimate.per_edge)
            .map(|(edge, slope)| PerEdgeEntry {
                edge: edge.clone(),
                slope: *slope,
            })
            .collect(),
    }
}

#[derive(Serialize)]
struct ClassificationEntry {
    n: usize,
    witnesses_flexibility: bool,
}

#[derive(Serialize)]
struct OrderReport {
    tool: ToolInfo,
    input: Option<InputInfo>,
    source: String,
    measure: &'static str,
    estimate: EstimateJson,
    classifications: Vec<ClassificationEntry>,
}

pub enum OrderSource {
    FromFlex(usize),
    FromTrace,
    Synthetic(f64),
}

/// Sampling grid for polynomial paths: zero plus a log-spaced sweep that
/// spans several decades above the numerical noise floor.
fn polynomial_grid() -> Vec<f64> {
    let mut ts = vec![0.0];
    let (lo, hi, count) = (1e-4_f64, 0.3_f64, 48);
    for i in 0..count {
        let frac = i as f64 / (count - 1) as f64;
        ts.push(lo * (hi / lo).powf(frac));
    }
    ts
}

fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64))
        .collect()
}

pub fn cmd_order(
    path: Option<&Path>,
    source: OrderSource,
    max_order: usize,
    measure: Measure,
    steps: usize,
    step: f64,
    seed: u64,
) -> Result<(), CliError> {
    if max_order == 0 {
        return Err(runtime("--max-order must be at least 1"));
    }

    let (profile, input, source_label) = match source {
        OrderSource::Synthetic(alpha) => {
            if !alpha.is_finite() || alpha <= 0.0 {
                return Err(runtime(format!(
                    "--synthetic-alpha must be a positive number, got {alpha}"
                )));
            }
            let profile = ElongationProfile::synthetic(alpha, &log_grid(1e-4, 1e-1, 40))?;
            (profile, None, format!("synthetic exponent {alpha}"))
        }
        OrderSource::FromFlex(n) => {
            let path = path.ok_or_else(|| runtime("--from-flex requires an input file"))?;
            let (framework, _warnings, input) = load_framework(path)?;
            let rest = framework.rest_configuration();
            let options = OrderTestOptions {
                seed,
                ..OrderTestOptions::default()
            };
            let witness = match classic_order_test(&framework, &rest, n, &options)? {
                OrderTestVerdict::Flexible { witness } => witness,
                OrderTestVerdict::Rigid { certificate } => {
                    return Err(runtime(format!(
                        "no order-{n} flex to sample: {certificate}"
                    )));
                }
                OrderTestVerdict::Inconclusive { reason } => {
                    return Err(runtime(format!("order-{n} test inconclusive: {reason}")));
                }
            };
            let samples =
                sample_polynomial(&framework, &rest, &witness, &polynomial_grid(), 16)?;
            let profile = ElongationProfile::from_samples(&framework, &samples)?;
            (profile, Some(input), format!("polynomial path from an order-{n} flex"))
        }
        OrderSource::FromTrace => {
            let path = path.ok_or_else(|| runtime("--from-trace requires an input file"))?;
            let (framework, _warnings, input) = load_framework(path)?;
            let rest = framework.rest_configuration();
            let basis = first_order_flex_basis(&framework, &rest)?;
            if basis.is_empty() {
                return Err(runtime("no flex direction: the framework is first-order rigid"));
            }
            let samples = trace_mechanism(&framework, &rest, &basis[0], step, steps)?;
            let profile = ElongationProfile::from_samples(&framework, &samples)?;
            (profile, Some(input), "traced finite motion".to_string())
        }
    };

    let estimate = fit_order(&profile, measure)?;
    let classifications = (1..=max_order)
        .map(|n| {
            classify(&estimate, n).map(|c| ClassificationEntry {
                n,
                witnesses_flexibility: matches!(c, Classification::WitnessesFlexibility),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let report = OrderReport {
        tool: ToolInfo::current(),
        input,
        source: source_label,
        measure: match measure {
            Measure::Squared => "squared",
            Measure::Linear => "linear",
        },
        estimate: estimate_json(&estimate, profile.edge_labels()),
        classifications,
    };
    print_report(&report);
    Ok(())
}

// ---------------------------------------------------------------------------
// cusp-demo
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct RelationEntry {
    name: String,
    residual: f64,
}

#[derive(Serialize)]
struct CuspBranchReport {
    branch: String,
    b_bar: f64,
    connector_length: f64,
    flex_consistent: bool,
    max_relation_residual: f64,
    relations: Vec<RelationEntry>,
    trace: BranchSummary,
}

#[derive(Serialize)]
struct UnitBarReport {
    connector_length: f64,
    relation: &'static str,
    coefficient: f64,
    b_bar_plus: f64,
    residual: f64,
}

#[derive(Serialize)]
struct CuspDemoReport {
    tool: ToolInfo,
    framework: FrameworkSummary,
    seed: u64,
    a: f64,
    b: f64,
    classic_verdicts: Vec<VerdictEntry>,
    branches: Vec<CuspBranchReport>,
    unit_bar: Option<UnitBarReport>,
    a_positive_rejection: Option<String>,
}

fn stage<T>(name: &str, result: Result<T, RigidityError>) -> Result<T, CliError> {
    result.map_err(|err| runtime(format!("stage '{name}' failed: {err}")))
}

fn demo_branch(
    framework: &Framework,
    solution: &DegenerateFlexSolution,
    out_dir: &Path,
) -> Result<CuspBranchReport, CliError> {
    let label = solution.branch.to_string();
    let relations = stage(
        "verify relations",
        verify_watt_relations(framework, &solution.flex),
    )?;
    let samples = stage(
        "trace branches",
        trace_branch(framework, solution, 0.15, 0.01, 60),
    )?;
    let file = out_dir.join(format!("branch_{label}.csv"));
    let trace = write_branch_csv(framework, &samples, &label, &file)?;
    Ok(CuspBranchReport {
        branch: label,
        b_bar: solution.b_bar,
        connector_length: solution.connector_length,
        flex_consistent: relations.flex_ok,
        max_relation_residual: relations.max_relation_residual,
        relations: relations
            .relations
            .iter()
            .map(|(name, residual)| RelationEntry {
                name: name.clone(),
                residual: *residual,
            })
            .collect(),
        trace,
    })
}

pub fn cmd_cusp_demo(
    out_dir: &Path,
    a: f64,
    b: f64,
    with_unit_bar: bool,
    a_positive: bool,
    seed: u64,
) -> Result<(), CliError> {
    fs::create_dir_all(out_dir)
        .map_err(|err| runtime(format!("cannot create {}: {err}", out_dir.display())))?;

    let framework = make_double_watt();
    let rest = framework.rest_configuration();

    let options = OrderTestOptions {
        seed,
        ..OrderTestOptions::default()
    };
    let mut classic_verdicts = Vec::new();
    for n in 1..=3 {
        let verdict = stage(
            "classic order tests",
            classic_order_test(&framework, &rest, n, &options),
        )?;
        classic_verdicts.push(verdict_entry(n, &verdict));
    }

    let a_positive_rejection = if a_positive {
        let bad_a = a.abs().max(0.5);
        match solve_cusp_flexes_with_b(&framework, bad_a, b, Branch::Plus) {
            Err(err) => Some(err.to_string()),
            Ok(_) => {
                return Err(runtime(
                    "stage 'solve degenerate flexes' failed: a positive crank acceleration \
                     was unexpectedly accepted",
                ));
            }
        }
    } else {
        None
    };

    let mut branches = Vec::new();
    if !a_positive {
        for branch in [Branch::Plus, Branch::Minus] {
            let solution = stage(
                "solve degenerate flexes",
                solve_cusp_flexes_with_b(&framework, a, b, branch),
            )?;
            branches.push(demo_branch(&framework, &solution, out_dir)?);
        }
    }

    let unit_bar = if with_unit_bar {
        let unit = make_double_watt_unit();
        let solution = stage(
            "solve degenerate flexes",
            solve_cusp_flexes_with_b(&unit, a, b, Branch::Plus),
        )?;
        let diff = solution.b_bar - solution.b;
        let residual = 9.0 * solution.connector_length * solution.a.powi(3) + diff * diff;
        Some(UnitBarReport {
            connector_length: solution.connector_length,
            relation: "9*a^3 + (b_bar - b)^2 = 0",
            coefficient: 9.0 * solution.connector_length,
            b_bar_plus: solution.b_bar,
            residual,
        })
    } else {
        None
    };

    let report = CuspDemoReport {
        tool: ToolInfo::current(),
        framework: FrameworkSummary::of(&framework),
        seed,
        a,
        b,
        classic_verdicts,
        branches,
        unit_bar,
        a_positive_rejection,
    };
    print_report(&report);
    Ok(())
}
