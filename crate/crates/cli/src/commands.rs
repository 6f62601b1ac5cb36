//! One function per subcommand. Each reads its inputs, runs the library
//! operation and writes JSON or CSV, returning the verdict exit code.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use wildhodge::correspondence::{dol_to_dr, dr_to_dol, HiggsPolarData};
use wildhodge::dbar::{self, DbarError, GaugeFixOptions, IterationRecord};
use wildhodge::fields::{self, Component, DiskGrid, FieldKind, FrameSide, GridField};
use wildhodge::json;
use wildhodge::orbit::{self, example_fixture, verify_nontrivial_example, OrbitDiagonalProblem, OrbitError};
use wildhodge::polar::{self, normalize_polar, DiagonalMatrix, FormalConnection, PolarError, PuncturePolarData};
use wildhodge::stability::{self, CurveConfig, StabilityError};
use wildhodge::{CMat, C64};

use crate::io::{canonical, csv_string, emit, parse_json, read_json, read_text, CliResult, Exit, Failure};
use crate::RunConfig;

fn single_input(cfg: &RunConfig) -> CliResult<&Path> {
    match cfg.input.as_slice() {
        [one] => Ok(one),
        [] => Err(Failure::parse("missing --input")),
        _ => Err(Failure::parse("expected exactly one --input")),
    }
}

fn invalid(e: impl std::fmt::Display) -> Failure {
    Failure::parse(format!("invalid input: {e}"))
}

fn read_polar(cfg: &RunConfig) -> CliResult<PuncturePolarData> {
    let data: PuncturePolarData = read_json(single_input(cfg)?)?;
    data.validate().map_err(invalid)?;
    Ok(data)
}

fn grid(cfg: &RunConfig, r_min: f64, r_max: f64, n_r: usize, n_theta: usize) -> CliResult<DiskGrid> {
    DiskGrid::new(cfg.rmin.unwrap_or(r_min), r_max, cfg.grid_nr.unwrap_or(n_r), cfg.grid_ntheta.unwrap_or(n_theta))
        .map_err(invalid)
}

fn fmt_c(z: C64) -> String {
    format!("{:+.6} {:+.6}i", z.re, z.im)
}

pub fn correspond(cfg: &RunConfig) -> CliResult<Exit> {
    let path = single_input(cfg)?;
    let text = read_text(path)?;
    let to_failure = |e: serde_json::Error| Failure::parse(format!("{}: {e}", path.display()));
    // Typed parses go through the text again so errors keep their position.
    let value: serde_json::Value = parse_json(&text).map_err(to_failure)?;
    let (json, table) = if value.get("higgs_coeffs").is_some() {
        let higgs: HiggsPolarData = parse_json(&text).map_err(to_failure)?;
        higgs.validate().map_err(invalid)?;
        let dr = dol_to_dr(&higgs);
        let rows = (0..dr.rank)
            .map(|i| format!("{i:>3}  {:>28}  {:.6}", fmt_c(dr.residue()[i]), dr.weights[i]))
            .collect::<Vec<_>>();
        (canonical(&dr)?, format!("  i  {:>28}  beta\n{}", "mu", rows.join("\n")))
    } else {
        let dr: PuncturePolarData = parse_json(&text).map_err(to_failure)?;
        dr.validate().map_err(invalid)?;
        let dol = dr_to_dol(&dr);
        let rows = (0..dol.rank)
            .map(|i| format!("{i:>3}  {:>28}  {:.6}", fmt_c(dol.residue_eigs[i]), dol.weights[i]))
            .collect::<Vec<_>>();
        (canonical(&dol)?, format!("  i  {:>28}  alpha\n{}", "lambda", rows.join("\n")))
    };
    eprintln!("{table}");
    emit(cfg.output.as_deref(), &json)?;
    Ok(Exit::Ok)
}

pub fn stability(cfg: &RunConfig, cap: u64) -> CliResult<Exit> {
    let curve: CurveConfig = read_json(single_input(cfg)?)?;
    let tol = cfg.tol.unwrap_or(stability::DEFAULT_INTEGER_TOL);
    let report = match stability::subsum_check(&curve, tol, cap) {
        Ok(r) => r,
        Err(e @ StabilityError::BudgetExceeded { .. }) => return Err(Failure::new(Exit::Cap, e.to_string())),
        Err(e) => return Err(invalid(e)),
    };
    eprintln!(
        "subsums evaluated: {}  violations: {}  generic: {}  regular leading terms: {}",
        report.evaluated,
        report.violations.len(),
        report.generic,
        report.regular_leading
    );
    for v in &report.violations {
        eprintln!("  {:?}  sum {}  distance {:.3e}", v.subsets, fmt_c(v.value), v.distance);
    }
    emit(cfg.output.as_deref(), &canonical(&report)?)?;
    Ok(if report.generic { Exit::Ok } else { Exit::Negative })
}

pub fn orbit_solve(cfg: &RunConfig, restarts: usize) -> CliResult<Exit> {
    let prob: OrbitDiagonalProblem = read_json(single_input(cfg)?)?;
    let tol = cfg.tol.unwrap_or(orbit::DEFAULT_ORBIT_TOL);
    match orbit::solve_orbit_diagonal(&prob, cfg.seed, restarts, tol) {
        Ok(sol) => {
            emit(cfg.output.as_deref(), &canonical(&sol)?)?;
            Ok(Exit::Ok)
        }
        Err(e @ OrbitError::NoConvergence { .. }) => Err(Failure::new(Exit::NonConvergence, e.to_string())),
        Err(e) => Err(invalid(e)),
    }
}

#[derive(Deserialize)]
struct ExampleInput {
    a0: DiagonalMatrix,
    bp0: DiagonalMatrix,
    #[serde(with = "json::matrix")]
    g: CMat,
}

pub fn verify_example(cfg: &RunConfig) -> CliResult<Exit> {
    let (a0, bp0, g) = match cfg.input.as_slice() {
        [] => example_fixture(),
        [path] => {
            let inp: ExampleInput = read_json(path)?;
            (inp.a0, inp.bp0, inp.g)
        }
        _ => return Err(Failure::parse("expected at most one --input")),
    };
    let report = verify_nontrivial_example(&a0, &bp0, &g, cfg.tol.unwrap_or(1e-9)).map_err(invalid)?;
    eprintln!(
        "companion entry {:.3e} ({}), subsums generic {}, degree {} ({}), moduli dimension {}",
        report.companion_entry,
        if report.companion_ok { "ok" } else { "FAILED" },
        report.subsums.generic,
        fmt_c(report.degree),
        if report.degree_ok { "ok" } else { "FAILED" },
        report.moduli_dim
    );
    emit(cfg.output.as_deref(), &canonical(&report)?)?;
    Ok(if report.all_ok { Exit::Ok } else { Exit::Negative })
}

#[derive(Serialize)]
struct RefinementCsv {
    n_r: usize,
    n_theta: usize,
    h: f64,
    max_f: f64,
    max_g: f64,
    order_f: Option<f64>,
    order_g: Option<f64>,
}

pub fn model_check(cfg: &RunConfig, r_max: f64, levels: usize) -> CliResult<Exit> {
    let data = read_polar(cfg)?;
    let rows = fields::model_refinement(
        &data,
        cfg.rmin.unwrap_or(0.3),
        r_max,
        cfg.grid_nr.unwrap_or(64),
        cfg.grid_ntheta.unwrap_or(64),
        levels,
    )
    .map_err(invalid)?;
    let out: Vec<RefinementCsv> = rows
        .into_iter()
        .map(|r| RefinementCsv {
            n_r: r.n_r,
            n_theta: r.n_theta,
            h: r.h,
            max_f: r.max_f,
            max_g: r.max_g,
            order_f: r.order_f,
            order_g: r.order_g,
        })
        .collect();
    emit(cfg.output.as_deref(), &csv_string(&out)?)?;
    Ok(Exit::Ok)
}

#[derive(Serialize)]
struct SlopeCsv {
    side: &'static str,
    index: usize,
    slope: f64,
    expected: f64,
    phase_defect: f64,
    ok: bool,
}

pub fn frame_growth(cfg: &RunConfig, ray: usize) -> CliResult<Exit> {
    let data = read_polar(cfg)?;
    let grid = grid(cfg, 1e-4, 1.0, 64, 16)?;
    let rel = cfg.tol.unwrap_or(0.02);
    let mut rows = Vec::new();
    for (side, name) in [(FrameSide::Dolbeault, "dolbeault"), (FrameSide::DeRham, "de_rham")] {
        let g = fields::frame_growth(&data, side, &grid, ray).map_err(invalid)?;
        for (i, (&s, &e)) in g.slopes.iter().zip(&g.expected).enumerate() {
            rows.push(SlopeCsv {
                side: name,
                index: i,
                slope: s,
                expected: e,
                phase_defect: g.phase_defect,
                ok: (s - e).abs() <= rel * e.abs() + 1e-9,
            });
        }
    }
    emit(cfg.output.as_deref(), &csv_string(&rows)?)?;
    Ok(if rows.iter().all(|r| r.ok) { Exit::Ok } else { Exit::Negative })
}

/// One sample of a matrix-valued field: `entry = row * rank + col`.
#[derive(Debug, Serialize, Deserialize)]
pub struct FieldRow {
    pub node: usize,
    pub entry: usize,
    pub component: Component,
    pub re: f64,
    pub im: f64,
}

fn read_field(path: &Path, rank: usize, grid: &DiskGrid) -> CliResult<GridField> {
    let text = read_text(path)?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut field = GridField::zeros(FieldKind::Mixed, rank, grid.len());
    for rec in reader.deserialize::<FieldRow>() {
        let row = rec.map_err(|e| Failure::parse(format!("{}: {e}", path.display())))?;
        let line = || format!("{}: node {} entry {}", path.display(), row.node, row.entry);
        if row.node >= grid.len() || row.entry >= rank * rank {
            return Err(Failure::parse(format!("{}: out of range for rank {rank} and {} nodes", line(), grid.len())));
        }
        if row.component == Component::Value {
            return Err(Failure::parse(format!("{}: component must be dz or dzbar", line())));
        }
        field.entry_mut(row.component, row.entry / rank, row.entry % rank)[row.node] = C64::new(row.re, row.im);
    }
    Ok(field)
}

#[derive(Serialize)]
struct GaugeFixOutput {
    grid: GridSummary,
    options: GaugeFixOptions,
    perturbation_norm: f64,
    residual: f64,
    check: f64,
    varpi: f64,
    iterations: usize,
    u_max_abs: f64,
    trace: Vec<IterationRecord>,
}

#[derive(Serialize)]
struct GridSummary {
    r_min: f64,
    r_max: f64,
    n_r: usize,
    n_theta: usize,
}

impl From<&DiskGrid> for GridSummary {
    fn from(g: &DiskGrid) -> Self {
        Self { r_min: g.r_min, r_max: g.r_max, n_r: g.n_r, n_theta: g.n_theta }
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_stem().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

pub fn gauge_fix(
    cfg: &RunConfig,
    trace_path: Option<&Path>,
    field_output: Option<&Path>,
    r_max: f64,
    max_iter: usize,
) -> CliResult<Exit> {
    let (data_path, field_path) = match cfg.input.as_slice() {
        [d, f] => (d.as_path(), f.as_path()),
        _ => return Err(Failure::parse("gauge-fix needs --input <data.json> --input <field.csv>")),
    };
    let data: PuncturePolarData = read_json(data_path)?;
    data.validate().map_err(invalid)?;
    let grid = grid(cfg, 0.2, r_max, 64, 128)?;
    let a = read_field(field_path, data.rank, &grid)?;
    let opts = GaugeFixOptions {
        delta: cfg.delta.unwrap_or(dbar::gauge::DEFAULT_DELTA),
        p: cfg.p.unwrap_or(dbar::gauge::DEFAULT_P),
        tol: cfg.tol.unwrap_or(GaugeFixOptions::default().tol),
        max_iter,
        ..GaugeFixOptions::default()
    };
    let norm = dbar::perturbation_norm(&a, &data, &grid, opts.delta, opts.p).map_err(invalid)?;
    let res = match dbar::gauge_fix(&a, &data, &grid, &opts) {
        Ok(r) => r,
        Err(e @ (DbarError::NotConverged { .. } | DbarError::NoContraction { .. })) => {
            return Err(Failure::new(Exit::NonConvergence, e.to_string()))
        }
        Err(e) => return Err(invalid(e)),
    };
    let check = dbar::verify_gauge(&res, &a, &data, opts.delta).map_err(invalid)?;
    eprintln!(
        "varpi {}  iterations {}  residual {:.3e}  independent check {:.3e}",
        res.varpi, res.iterations, res.residual, check
    );

    let trace_csv = csv_string(&res.trace)?;
    match (trace_path, cfg.output.as_deref()) {
        (Some(p), _) => emit(Some(p), &trace_csv)?,
        (None, Some(out)) => emit(Some(&sibling(out, ".trace.csv")), &trace_csv)?,
        (None, None) => eprint!("{trace_csv}"),
    }
    if let Some(p) = field_output {
        let r = data.rank;
        let rows: Vec<FieldRow> = (0..r * r)
            .flat_map(|e| {
                res.u.entry(Component::Value, e / r, e % r).iter().enumerate().map(move |(node, v)| FieldRow {
                    node,
                    entry: e,
                    component: Component::Value,
                    re: v.re,
                    im: v.im,
                })
            })
            .collect();
        emit(Some(p), &csv_string(&rows)?)?;
    }

    let out = GaugeFixOutput {
        grid: GridSummary::from(&res.grid),
        options: opts,
        perturbation_norm: norm,
        residual: res.residual,
        check,
        varpi: res.varpi,
        iterations: res.iterations,
        u_max_abs: res.u.max_abs(),
        trace: res.trace,
    };
    emit(cfg.output.as_deref(), &canonical(&out)?)?;
    Ok(if res.residual < opts.tol { Exit::Ok } else { Exit::NonConvergence })
}

#[derive(Deserialize)]
struct NormalizeInput {
    order: usize,
    /// `C_{-order}, ..., C_N`.
    #[serde(with = "json::matrices")]
    coeffs: Vec<CMat>,
    #[serde(default)]
    weights: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct NormalizeOutput {
    order: usize,
    #[serde(with = "json::matrix")]
    basis: CMat,
    #[serde(with = "json::matrices")]
    gauge: Vec<CMat>,
    #[serde(with = "json::matrices")]
    normal_form: Vec<CMat>,
    clusters: Vec<usize>,
    residual: f64,
    diagonalization_error: f64,
    polar_data: Option<PuncturePolarData>,
}

pub fn normalize(cfg: &RunConfig) -> CliResult<Exit> {
    let inp: NormalizeInput = read_json(single_input(cfg)?)?;
    let conn = FormalConnection::new(inp.order, inp.coeffs).map_err(invalid)?;
    let tol = cfg.tol.unwrap_or(polar::DEFAULT_NORMALIZE_TOL);
    let norm = match normalize_polar(&conn, tol) {
        Ok(n) => n,
        Err(e @ PolarError::NonSemisimpleLeading { .. }) => return Err(Failure::new(Exit::Negative, e.to_string())),
        Err(e) => return Err(invalid(e)),
    };
    let weights = inp.weights.unwrap_or_else(|| vec![0.0; conn.rank]);
    let out = NormalizeOutput {
        order: norm.normal_form.order,
        polar_data: norm.polar_data(weights, tol.max(1e-12)),
        basis: norm.basis,
        gauge: norm.gauge.coeffs,
        normal_form: norm.normal_form.coeffs,
        clusters: norm.clusters,
        residual: norm.residual,
        diagonalization_error: norm.diagonalization_error,
    };
    emit(cfg.output.as_deref(), &canonical(&out)?)?;
    Ok(Exit::Ok)
}
