//! Scenario files: a line-oriented definition format plus an ordered task
//! list, executed into machine-readable JSON reports and CSV time series.
//!
//! ```text
//! # free particle watched from a rotating chart
//! m = 2
//!
//! [constants]
//! omega = 1.0
//!
//! [equation free]
//! xi1 = "0"
//! xi2 = "0"
//!
//! [frame rotating]
//! gamma1 = "-omega*q2"
//! gamma2 = "omega*q1"
//!
//! [chart spin]
//! forward1 = "q1*cos(omega*t) + q2*sin(omega*t)"
//! forward2 = "-q1*sin(omega*t) + q2*cos(omega*t)"
//! inverse1 = "q1*cos(omega*t) - q2*sin(omega*t)"
//! inverse2 = "q1*sin(omega*t) + q2*cos(omega*t)"
//!
//! [task coriolis]
//! equation = free
//! frame = rotating
//! point = 0 1 0 0 0
//! ```
//!
//! Reports are byte-stable: sampling is quasi-random with the seed recorded
//! in every file, and JSON maps are emitted with sorted keys.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::bundle::{CoordinateChange, JetPoint1, CHART_CERTIFY_SAMPLES};
use crate::connections::{DynamicEquation, ReferenceFrame};
use crate::error::{EvalError, ScenarioError};
use crate::expr::Expression;
use crate::frames::{
    adapted_frame_residual, coriolis_decomposition, free_motion_curvature_test, geodesic_residual,
    transform_dynamic_equation, CurvatureVerdict,
};
use crate::integrator::{integrate, trajectory_residual};
use crate::sample::SampleBox;
use crate::tol;

const DEFAULT_SAMPLE_POINTS: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub enum TaskSpec {
    Transform {
        equation: String,
        chart: String,
        tol: Option<f64>,
    },
    Coriolis {
        equation: String,
        frame: String,
        point: Vec<f64>,
        tol: Option<f64>,
    },
    CheckFree {
        equation: String,
        expect: Option<CurvatureVerdict>,
        tol: Option<f64>,
    },
    Integrate {
        equation: String,
        initial: Vec<f64>,
        t_end: f64,
        step: f64,
        residual_tol: Option<f64>,
    },
    Geodesic {
        equation: String,
        frame: String,
        at: Vec<f64>,
        expect_zero: bool,
        tol: Option<f64>,
    },
    AdaptedCheck {
        frame: String,
        chart: String,
        expect_adapted: Option<bool>,
        tol: Option<f64>,
    },
    Report,
}

impl TaskSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            TaskSpec::Transform { .. } => "transform",
            TaskSpec::Coriolis { .. } => "coriolis",
            TaskSpec::CheckFree { .. } => "check-free",
            TaskSpec::Integrate { .. } => "integrate",
            TaskSpec::Geodesic { .. } => "geodesic",
            TaskSpec::AdaptedCheck { .. } => "adapted-check",
            TaskSpec::Report => "report",
        }
    }
}

pub struct Scenario {
    pub m: usize,
    pub description: Option<String>,
    pub constants: BTreeMap<String, f64>,
    pub equations: BTreeMap<String, DynamicEquation>,
    pub frames: BTreeMap<String, ReferenceFrame>,
    pub charts: BTreeMap<String, CoordinateChange>,
    pub sample_box: SampleBox,
    pub sample_points: usize,
    pub tasks: Vec<TaskSpec>,
    sources: BTreeMap<String, Vec<String>>,
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

/// key, value, line number
type Entry = (String, String, usize);

struct RawSection {
    kind: String,
    name: Option<String>,
    line: usize,
    entries: Vec<Entry>,
}

fn perr(line: usize, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Parse {
        line,
        message: message.into(),
    }
}

/// Strips a trailing comment, respecting quoted strings.
fn strip_comment(line: &str) -> &str {
    let mut in_quotes = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_quotes = !in_quotes,
            '#' if !in_quotes => return &line[..i],
            _ => {}
        }
    }
    line
}

fn parse_raw(text: &str) -> Result<(Vec<Entry>, Vec<RawSection>), ScenarioError> {
    let mut top = Vec::new();
    let mut sections: Vec<RawSection> = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = strip_comment(raw_line).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('[') {
            let header = header
                .strip_suffix(']')
                .ok_or_else(|| perr(lineno, "unterminated section header"))?;
            let mut parts = header.split_whitespace();
            let kind = parts
                .next()
                .ok_or_else(|| perr(lineno, "empty section header"))?
                .to_string();
            let name = parts.next().map(str::to_string);
            if parts.next().is_some() {
                return Err(perr(lineno, "section header has too many fields"));
            }
            sections.push(RawSection {
                kind,
                name,
                line: lineno,
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| perr(lineno, "expected `key = value`"))?;
        let entry = (key.trim().to_string(), value.trim().to_string(), lineno);
        match sections.last_mut() {
            Some(section) => section.entries.push(entry),
            None => top.push(entry),
        }
    }
    Ok((top, sections))
}

fn unquote(value: &str, line: usize) -> Result<String, ScenarioError> {
    let v = value.trim();
    if let Some(stripped) = v.strip_prefix('"') {
        let inner = stripped
            .strip_suffix('"')
            .ok_or_else(|| perr(line, "unterminated string"))?;
        return Ok(inner.to_string());
    }
    Ok(v.to_string())
}

fn parse_number(value: &str, line: usize) -> Result<f64, ScenarioError> {
    value
        .trim()
        .parse::<f64>()
        .map_err(|_| perr(line, format!("expected a number, got `{value}`")))
}

fn parse_numbers(value: &str, line: usize) -> Result<Vec<f64>, ScenarioError> {
    value
        .split_whitespace()
        .map(|w| parse_number(w, line))
        .collect()
}

fn parse_range(value: &str, line: usize) -> Result<(f64, f64), ScenarioError> {
    let nums = parse_numbers(value, line)?;
    if nums.len() != 2 || nums[0] >= nums[1] {
        return Err(perr(
            line,
            format!("expected `lo hi` with lo < hi, got `{value}`"),
        ));
    }
    Ok((nums[0], nums[1]))
}

fn indexed_components(
    section: &RawSection,
    prefix: &str,
    m: usize,
    constants: &BTreeMap<String, f64>,
) -> Result<(Vec<Expression>, Vec<String>), ScenarioError> {
    let mut sources = vec![None::<(String, usize)>; m];
    for (key, value, line) in &section.entries {
        if let Some(rest) = key.strip_prefix(prefix) {
            if let Ok(i) = rest.parse::<usize>() {
                if i == 0 || i > m {
                    return Err(perr(
                        *line,
                        format!("component index {i} out of range for dimension {m}"),
                    ));
                }
                sources[i - 1] = Some((unquote(value, *line)?, *line));
            }
        }
    }
    let mut exprs = Vec::with_capacity(m);
    let mut texts = Vec::with_capacity(m);
    for (i, slot) in sources.into_iter().enumerate() {
        let (text, line) = slot.ok_or_else(|| {
            perr(
                section.line,
                format!("missing component `{prefix}{}`", i + 1),
            )
        })?;
        let expr = Expression::parse_with_constants(&text, m, constants)
            .map_err(|e| perr(line, format!("in `{text}`: {e}")))?;
        exprs.push(expr);
        texts.push(text);
    }
    Ok((exprs, texts))
}

fn lookup<'s>(section: &'s RawSection, key: &str) -> Option<(&'s str, usize)> {
    section
        .entries
        .iter()
        .find(|(k, _, _)| k == key)
        .map(|(_, v, l)| (v.as_str(), *l))
}

fn require<'s>(section: &'s RawSection, key: &str) -> Result<(&'s str, usize), ScenarioError> {
    lookup(section, key).ok_or_else(|| {
        perr(
            section.line,
            format!("section `{}` is missing `{key}`", section.kind),
        )
    })
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let (top, sections) = parse_raw(text)?;
    let mut m: Option<usize> = None;
    let mut description = None;
    for (key, value, line) in &top {
        match key.as_str() {
            "m" => {
                let n = parse_number(value, *line)? as usize;
                if n == 0 {
                    return Err(perr(*line, "dimension m must be positive"));
                }
                m = Some(n);
            }
            "description" => description = Some(unquote(value, *line)?),
            other => return Err(perr(*line, format!("unknown top-level key `{other}`"))),
        }
    }
    let m = m.ok_or_else(|| perr(1, "scenario must declare the dimension `m`"))?;
    if m > 15 {
        return Err(ScenarioError::Invalid(format!(
            "dimension m = {m} exceeds the supported maximum of 15"
        )));
    }

    let mut constants = BTreeMap::new();
    constants.insert("pi".to_string(), std::f64::consts::PI);
    for section in sections.iter().filter(|s| s.kind == "constants") {
        for (key, value, line) in &section.entries {
            let reserved = key == "t"
                || ["sin", "cos", "exp", "log", "sqrt"].contains(&key.as_str())
                || (key.starts_with(['q', 'v']) && key[1..].parse::<usize>().is_ok());
            if reserved {
                return Err(perr(
                    *line,
                    format!("`{key}` is a reserved name and cannot be a constant"),
                ));
            }
            constants.insert(key.clone(), parse_number(value, *line)?);
        }
    }

    let mut sample_box = SampleBox::standard(m);
    let mut sample_points = DEFAULT_SAMPLE_POINTS;
    for section in sections.iter().filter(|s| s.kind == "sample_box") {
        for (key, value, line) in &section.entries {
            match key.as_str() {
                "t" => sample_box.t = parse_range(value, *line)?,
                "q" => sample_box.q = vec![parse_range(value, *line)?; m],
                "v" => sample_box.v = vec![parse_range(value, *line)?; m],
                "points" => sample_points = parse_number(value, *line)? as usize,
                other => {
                    let parsed = other
                        .strip_prefix('q')
                        .map(|r| ("q", r))
                        .or_else(|| other.strip_prefix('v').map(|r| ("v", r)));
                    match parsed.and_then(|(axis, r)| r.parse::<usize>().ok().map(|i| (axis, i))) {
                        Some((axis, i)) if i >= 1 && i <= m => {
                            let range = parse_range(value, *line)?;
                            if axis == "q" {
                                sample_box.q[i - 1] = range;
                            } else {
                                sample_box.v[i - 1] = range;
                            }
                        }
                        _ => return Err(perr(*line, format!("unknown sample_box key `{other}`"))),
                    }
                }
            }
        }
    }

    let mut scenario = Scenario {
        m,
        description,
        constants: constants.clone(),
        equations: BTreeMap::new(),
        frames: BTreeMap::new(),
        charts: BTreeMap::new(),
        sample_box,
        sample_points,
        tasks: Vec::new(),
        sources: BTreeMap::new(),
    };

    for section in &sections {
        match section.kind.as_str() {
            "constants" | "sample_box" => {}
            "equation" => {
                let name = section
                    .name
                    .clone()
                    .ok_or_else(|| perr(section.line, "equation section needs a name"))?;
                let (comps, texts) = indexed_components(section, "xi", m, &constants)?;
                let eq = DynamicEquation::from_expressions(comps)
                    .map_err(|e| perr(section.line, e.to_string()))?;
                scenario.sources.insert(format!("equation {name}"), texts);
                scenario.equations.insert(name, eq);
            }
            "frame" => {
                let name = section
                    .name
                    .clone()
                    .ok_or_else(|| perr(section.line, "frame section needs a name"))?;
                let (comps, texts) = indexed_components(section, "gamma", m, &constants)?;
                let frame = ReferenceFrame::from_expressions(comps)
                    .map_err(|e| perr(section.line, e.to_string()))?;
                scenario.sources.insert(format!("frame {name}"), texts);
                scenario.frames.insert(name, frame);
            }
            "chart" => {
                let name = section
                    .name
                    .clone()
                    .ok_or_else(|| perr(section.line, "chart section needs a name"))?;
                let (forward, mut texts) = indexed_components(section, "forward", m, &constants)?;
                let (inverse, inv_texts) = indexed_components(section, "inverse", m, &constants)?;
                texts.extend(inv_texts);
                let time_offset = match lookup(section, "time_offset") {
                    Some((v, l)) => parse_number(v, l)?,
                    None => 0.0,
                };
                let chart = CoordinateChange::new(
                    forward,
                    inverse,
                    time_offset,
                    &scenario.sample_box,
                    CHART_CERTIFY_SAMPLES,
                )
                .map_err(ScenarioError::Chart)?;
                scenario.sources.insert(format!("chart {name}"), texts);
                scenario.charts.insert(name, chart);
            }
            "task" => {
                let kind = section
                    .name
                    .clone()
                    .ok_or_else(|| perr(section.line, "task section needs a kind"))?;
                let task = parse_task(section, &kind, m)?;
                scenario.tasks.push(task);
            }
            other => return Err(perr(section.line, format!("unknown section `{other}`"))),
        }
    }

    validate_references(&scenario)?;
    Ok(scenario)
}

fn parse_task(section: &RawSection, kind: &str, m: usize) -> Result<TaskSpec, ScenarioError> {
    let opt_tol = match lookup(section, "tol") {
        Some((v, l)) => Some(parse_number(v, l)?),
        None => None,
    };
    let jet_values = |key: &str| -> Result<Vec<f64>, ScenarioError> {
        let (v, l) = require(section, key)?;
        let values = parse_numbers(v, l)?;
        if values.len() != 1 + 2 * m {
            return Err(perr(
                l,
                format!("`{key}` needs 1 + 2m = {} values (t q.. v..)", 1 + 2 * m),
            ));
        }
        Ok(values)
    };
    match kind {
        "transform" => Ok(TaskSpec::Transform {
            equation: require(section, "equation")?.0.to_string(),
            chart: require(section, "chart")?.0.to_string(),
            tol: opt_tol,
        }),
        "coriolis" => Ok(TaskSpec::Coriolis {
            equation: require(section, "equation")?.0.to_string(),
            frame: require(section, "frame")?.0.to_string(),
            point: jet_values("point")?,
            tol: opt_tol,
        }),
        "check-free" => {
            let expect = match lookup(section, "expect") {
                Some(("fails", _)) => Some(CurvatureVerdict::FailsNecessaryCriterion),
                Some(("inconclusive", _)) => Some(CurvatureVerdict::InconclusivePass),
                Some((other, l)) => {
                    return Err(perr(
                        l,
                        format!("expect must be `fails` or `inconclusive`, got `{other}`"),
                    ))
                }
                None => None,
            };
            Ok(TaskSpec::CheckFree {
                equation: require(section, "equation")?.0.to_string(),
                expect,
                tol: opt_tol,
            })
        }
        "integrate" => {
            let (t_end, l1) = require(section, "t_end")?;
            let (step, l2) = require(section, "step")?;
            let residual_tol = match lookup(section, "residual_tol") {
                Some((v, l)) => Some(parse_number(v, l)?),
                None => None,
            };
            Ok(TaskSpec::Integrate {
                equation: require(section, "equation")?.0.to_string(),
                initial: jet_values("initial")?,
                t_end: parse_number(t_end, l1)?,
                step: parse_number(step, l2)?,
                residual_tol,
            })
        }
        "geodesic" => {
            let (v, l) = require(section, "at")?;
            let at = parse_numbers(v, l)?;
            if at.len() != 1 + m {
                return Err(perr(
                    l,
                    format!("`at` needs 1 + m = {} values (t q..)", 1 + m),
                ));
            }
            let expect_zero = match lookup(section, "expect_zero") {
                Some(("true", _)) => true,
                Some(("false", _)) | None => false,
                Some((other, l)) => {
                    return Err(perr(
                        l,
                        format!("expect_zero must be true or false, got `{other}`"),
                    ))
                }
            };
            Ok(TaskSpec::Geodesic {
                equation: require(section, "equation")?.0.to_string(),
                frame: require(section, "frame")?.0.to_string(),
                at,
                expect_zero,
                tol: opt_tol,
            })
        }
        "adapted-check" => {
            let expect_adapted = match lookup(section, "expect_adapted") {
                Some(("true", _)) => Some(true),
                Some(("false", _)) => Some(false),
                Some((other, l)) => {
                    return Err(perr(
                        l,
                        format!("expect_adapted must be true or false, got `{other}`"),
                    ))
                }
                None => None,
            };
            Ok(TaskSpec::AdaptedCheck {
                frame: require(section, "frame")?.0.to_string(),
                chart: require(section, "chart")?.0.to_string(),
                expect_adapted,
                tol: opt_tol,
            })
        }
        "report" => Ok(TaskSpec::Report),
        other => Err(perr(section.line, format!("unknown task kind `{other}`"))),
    }
}

fn validate_references(scenario: &Scenario) -> Result<(), ScenarioError> {
    let check = |kind: &'static str, name: &str, defined: bool, task: &TaskSpec| {
        if defined {
            Ok(())
        } else {
            Err(ScenarioError::Undefined {
                kind,
                name: name.to_string(),
                task: task.kind().to_string(),
            })
        }
    };
    for task in &scenario.tasks {
        match task {
            TaskSpec::Transform {
                equation, chart, ..
            } => {
                check(
                    "equation",
                    equation,
                    scenario.equations.contains_key(equation),
                    task,
                )?;
                check("chart", chart, scenario.charts.contains_key(chart), task)?;
            }
            TaskSpec::Coriolis {
                equation, frame, ..
            } => {
                check(
                    "equation",
                    equation,
                    scenario.equations.contains_key(equation),
                    task,
                )?;
                check("frame", frame, scenario.frames.contains_key(frame), task)?;
            }
            TaskSpec::CheckFree { equation, .. } => {
                check(
                    "equation",
                    equation,
                    scenario.equations.contains_key(equation),
                    task,
                )?;
            }
            TaskSpec::Integrate { equation, .. } => {
                check(
                    "equation",
                    equation,
                    scenario.equations.contains_key(equation),
                    task,
                )?;
            }
            TaskSpec::Geodesic {
                equation, frame, ..
            } => {
                check(
                    "equation",
                    equation,
                    scenario.equations.contains_key(equation),
                    task,
                )?;
                check("frame", frame, scenario.frames.contains_key(frame), task)?;
            }
            TaskSpec::AdaptedCheck { frame, chart, .. } => {
                check("frame", frame, scenario.frames.contains_key(frame), task)?;
                check("chart", chart, scenario.charts.contains_key(chart), task)?;
            }
            TaskSpec::Report => {}
        }
    }
    Ok(())
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = fs::read_to_string(path)?;
    parse_scenario(&text)
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub tol_scale: f64,
}

#[derive(Debug, Clone)]
pub struct TaskOutcome {
    pub index: usize,
    pub kind: String,
    pub passed: bool,
    pub report_file: String,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub outcomes: Vec<TaskOutcome>,
    pub all_passed: bool,
}

fn task_err(task: &TaskSpec, index: usize) -> impl Fn(EvalError) -> ScenarioError + '_ {
    let kind = task.kind();
    move |e| ScenarioError::TaskEval {
        task: format!("{} (task {})", kind, index),
        source: e,
    }
}

fn jet_point(values: &[f64], m: usize) -> JetPoint1 {
    JetPoint1::new(
        values[0],
        values[1..1 + m].to_vec(),
        values[1 + m..1 + 2 * m].to_vec(),
    )
}

fn vec_json(values: &[f64]) -> Value {
    Value::Array(values.iter().map(|x| json!(x)).collect())
}

fn mat_json(rows: &[Vec<f64>]) -> Value {
    Value::Array(rows.iter().map(|r| vec_json(r)).collect())
}

fn point_json(p: &JetPoint1) -> Value {
    json!({ "t": p.t, "q": vec_json(&p.q), "v": vec_json(&p.v) })
}

/// Executes the tasks in order; writes one JSON file per task plus a final
/// summary. The exit contract is encoded in the summary: all assertions
/// passing means exit 0.
pub fn run_scenario(scenario: &Scenario, opts: &RunOptions) -> Result<RunSummary, ScenarioError> {
    fs::create_dir_all(&opts.out_dir)?;
    let mut outcomes: Vec<TaskOutcome> = Vec::new();
    for (index, task) in scenario.tasks.iter().enumerate() {
        let mut body = Map::new();
        body.insert("task".into(), json!(task.kind()));
        body.insert("index".into(), json!(index));
        body.insert("seed".into(), json!(opts.seed));
        body.insert("tol_scale".into(), json!(opts.tol_scale));
        let passed = run_task(scenario, opts, task, index, &mut body)?;
        body.insert("passed".into(), json!(passed));
        let file = format!("task_{index:02}_{}.json", task.kind());
        write_json(&opts.out_dir.join(&file), &Value::Object(body))?;
        outcomes.push(TaskOutcome {
            index,
            kind: task.kind().to_string(),
            passed,
            report_file: file,
        });
    }
    let all_passed = outcomes.iter().all(|o| o.passed);
    let summary = json!({
        "description": scenario.description,
        "m": scenario.m,
        "seed": opts.seed,
        "tol_scale": opts.tol_scale,
        "sample_points": scenario.sample_points,
        "definitions": scenario.sources,
        "tasks": outcomes.iter().map(|o| json!({
            "index": o.index,
            "kind": o.kind,
            "passed": o.passed,
            "report": o.report_file,
        })).collect::<Vec<_>>(),
        "all_passed": all_passed,
    });
    write_json(&opts.out_dir.join("summary.json"), &summary)?;
    Ok(RunSummary {
        outcomes,
        all_passed,
    })
}

fn run_task(
    scenario: &Scenario,
    opts: &RunOptions,
    task: &TaskSpec,
    index: usize,
    body: &mut Map<String, Value>,
) -> Result<bool, ScenarioError> {
    let m = scenario.m;
    let wrap = task_err(task, index);
    match task {
        TaskSpec::Transform {
            equation,
            chart,
            tol: task_tol,
        } => {
            let xi = &scenario.equations[equation];
            let phi = &scenario.charts[chart];
            let moved = transform_dynamic_equation(xi, phi);
            let tolerance = task_tol.unwrap_or(tol::CHAINED) * opts.tol_scale;
            // solutions must map to solutions: push a point of the equation
            // through the chart and re-evaluate
            let mut defect = 0.0f64;
            let mut echo = Vec::new();
            let points = scenario
                .sample_box
                .jet_points(scenario.sample_points, opts.seed);
            for (k, p) in points.iter().enumerate() {
                let a = xi.eval(p).map_err(&wrap)?;
                let pushed = phi
                    .prolong_jet2(&crate::bundle::JetPoint2::from_first(p, a))
                    .map_err(&wrap)?;
                let there = moved.eval(&pushed.first_jet()).map_err(&wrap)?;
                for i in 0..m {
                    defect = defect.max((there[i] - pushed.a[i]).abs());
                }
                if k < 4 {
                    echo.push(json!({
                        "point": point_json(&pushed.first_jet()),
                        "xi_primed": vec_json(&there),
                    }));
                }
            }
            body.insert("equation".into(), json!(equation));
            body.insert("chart".into(), json!(chart));
            body.insert("samples".into(), json!(points.len()));
            body.insert("tolerance".into(), json!(tolerance));
            body.insert("max_covariance_defect".into(), json!(defect));
            body.insert("results".into(), Value::Array(echo));
            Ok(defect <= tolerance)
        }
        TaskSpec::Coriolis {
            equation,
            frame,
            point,
            tol: task_tol,
        } => {
            let xi = &scenario.equations[equation];
            let gamma = &scenario.frames[frame];
            let p = jet_point(point, m);
            let tolerance = task_tol.unwrap_or(tol::CHAINED) * opts.tol_scale;
            let report = coriolis_decomposition(xi, gamma, &p).map_err(&wrap)?;
            let split_defect = report
                .a_direct
                .iter()
                .zip(&report.a_decomposed)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            body.insert("equation".into(), json!(equation));
            body.insert("frame".into(), json!(frame));
            body.insert("point".into(), point_json(&p));
            body.insert("tolerance".into(), json!(tolerance));
            body.insert("a_direct".into(), vec_json(&report.a_direct));
            body.insert("a_decomposed".into(), vec_json(&report.a_decomposed));
            body.insert("nabla".into(), mat_json(&report.nabla));
            body.insert("relative_velocity".into(), vec_json(&report.rel_v));
            body.insert("split_defect".into(), json!(split_defect));
            Ok(split_defect <= tolerance)
        }
        TaskSpec::CheckFree {
            equation,
            expect,
            tol: task_tol,
        } => {
            let xi = &scenario.equations[equation];
            let tolerance = task_tol.unwrap_or(tol::CURVATURE_FLAT) * opts.tol_scale;
            let report = free_motion_curvature_test(
                xi,
                &scenario.sample_box,
                scenario.sample_points,
                tolerance,
            )
            .map_err(&wrap)?;
            body.insert("equation".into(), json!(equation));
            body.insert("tolerance".into(), json!(tolerance));
            body.insert("max_curvature".into(), json!(report.max_abs_curvature));
            body.insert("verdict".into(), json!(report.verdict.to_string()));
            Ok(match expect {
                Some(e) => report.verdict == *e,
                None => true,
            })
        }
        TaskSpec::Integrate {
            equation,
            initial,
            t_end,
            step,
            residual_tol,
        } => {
            let xi = &scenario.equations[equation];
            let p0 = jet_point(initial, m);
            let mut tr = integrate(xi, &p0, *t_end, *step).map_err(&wrap)?;
            tr.equation_tag = equation.clone();
            let residual = trajectory_residual(xi, &tr).map_err(&wrap)?;
            let tolerance = residual_tol.unwrap_or(50.0 * step * step) * opts.tol_scale;
            let csv = format!("task_{index:02}_integrate.csv");
            write_trajectory_csv(&opts.out_dir.join(&csv), &tr)?;
            body.insert("equation".into(), json!(equation));
            body.insert("initial".into(), point_json(&p0));
            body.insert("t_end".into(), json!(t_end));
            body.insert("step".into(), json!(step));
            body.insert("samples".into(), json!(tr.samples.len()));
            body.insert("diverged".into(), json!(tr.diverged));
            body.insert("residual".into(), json!(residual));
            body.insert("residual_tol".into(), json!(tolerance));
            body.insert("csv".into(), json!(csv));
            Ok(!tr.diverged && residual <= tolerance)
        }
        TaskSpec::Geodesic {
            equation,
            frame,
            at,
            expect_zero,
            tol: task_tol,
        } => {
            let xi = &scenario.equations[equation];
            let gamma = &scenario.frames[frame];
            let tolerance = task_tol.unwrap_or(tol::CHAINED) * opts.tol_scale;
            let residual = geodesic_residual(xi, gamma, at[0], &at[1..]).map_err(&wrap)?;
            let worst = residual.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
            body.insert("equation".into(), json!(equation));
            body.insert("frame".into(), json!(frame));
            body.insert("t".into(), json!(at[0]));
            body.insert("q".into(), vec_json(&at[1..]));
            body.insert("tolerance".into(), json!(tolerance));
            body.insert("residual".into(), vec_json(&residual));
            body.insert("max_residual".into(), json!(worst));
            Ok(if *expect_zero {
                worst <= tolerance
            } else {
                true
            })
        }
        TaskSpec::AdaptedCheck {
            frame,
            chart,
            expect_adapted,
            tol: task_tol,
        } => {
            let gamma = &scenario.frames[frame];
            let phi = &scenario.charts[chart];
            let tolerance = task_tol.unwrap_or(tol::ADAPTED_PAIR) * opts.tol_scale;
            let residual =
                adapted_frame_residual(gamma, phi, &scenario.sample_box, scenario.sample_points)
                    .map_err(&wrap)?;
            body.insert("frame".into(), json!(frame));
            body.insert("chart".into(), json!(chart));
            body.insert("tolerance".into(), json!(tolerance));
            body.insert("max_residual".into(), json!(residual));
            body.insert("adapted".into(), json!(residual <= tolerance));
            Ok(match expect_adapted {
                Some(true) => residual <= tolerance,
                Some(false) => residual > tolerance,
                None => true,
            })
        }
        TaskSpec::Report => {
            let entries: Vec<Value> = scenario.tasks[..index]
                .iter()
                .enumerate()
                .map(|(i, t)| json!({ "index": i, "kind": t.kind() }))
                .collect();
            body.insert("tasks_so_far".into(), Value::Array(entries));
            Ok(true)
        }
    }
}

fn write_json(path: &Path, value: &Value) -> Result<(), ScenarioError> {
    let mut text = serde_json::to_string_pretty(value).expect("finite json");
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// CSV schema: header row, then t, q1..qm, v1..vm, a1..am with 17
/// significant digits and `.` as the decimal separator.
fn write_trajectory_csv(
    path: &Path,
    tr: &crate::integrator::Trajectory,
) -> Result<(), ScenarioError> {
    let m = tr.dim();
    let mut out = String::from("t");
    for i in 1..=m {
        out.push_str(&format!(",q{i}"));
    }
    for i in 1..=m {
        out.push_str(&format!(",v{i}"));
    }
    for i in 1..=m {
        out.push_str(&format!(",a{i}"));
    }
    out.push('\n');
    for p in &tr.samples {
        out.push_str(&format!("{:.16e}", p.t));
        for x in p.q.iter().chain(p.v.iter()).chain(p.a.iter()) {
            out.push_str(&format!(",{x:.16e}"));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}
