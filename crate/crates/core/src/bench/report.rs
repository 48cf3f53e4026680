use std::fmt::Write as _;
use std::path::Path;

use super::config::ReportFormat;
use super::grid::GridSearch;
use super::run::{AttackRecord, Perturbation, RunManifest, RunResults, StabilityRecord};
use crate::error::{Error, Result};
use crate::io;
use crate::stability::{median, scatter_data, worst_case_bound, MetricsAggregate, MetricsRow, StabilityReport, METRIC_LABELS};

/// Columns of the summary table: the method followed by the nine metrics.
pub fn summary_columns() -> Vec<&'static str> {
    std::iter::once("solver").chain(METRIC_LABELS).collect()
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Solver labels carry commas (`alpha=...`) only inside parentheses, but
/// quote any field that needs it.
fn field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = format!("solver,instance,{}\n", METRIC_LABELS.join(","));
    for r in rows {
        let vals: Vec<String> = r.values().iter().map(|&v| num(v)).collect();
        let _ = writeln!(out, "{},{},{}", field(&r.solver), opt(r.instance), vals.join(","));
    }
    out
}

pub fn aggregates_csv(aggs: &[MetricsAggregate]) -> String {
    let mut out = format!("solver,statistic,count,{}\n", METRIC_LABELS.join(","));
    for a in aggs {
        for (name, vals) in [("mean", &a.mean), ("median", &a.median)] {
            let vals: Vec<String> = vals.iter().map(|&v| num(v)).collect();
            let _ = writeln!(out, "{},{name},{},{}", field(&a.solver), a.count, vals.join(","));
        }
    }
    out
}

const STABILITY_HEADER: &str = "solver,instance,perturbation,cross,converged,lhs,data_term,bregman,slack,violated,tolerance_used,regularizer,regularization_strength,identity_residual,identity_tolerance";

pub fn stability_csv(records: &[StabilityRecord]) -> String {
    let mut out = format!("{STABILITY_HEADER}\n");
    for s in records {
        let r = &s.report;
        let regularizer = serde_json::to_value(r.regularizer_id).ok().and_then(|v| v.as_str().map(String::from));
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            field(&s.solver),
            s.instance,
            s.perturbation.as_str(),
            s.cross,
            s.converged,
            num(r.lhs),
            num(r.data_term),
            num(r.bregman),
            num(r.slack),
            r.violated,
            num(r.tolerance_used),
            regularizer.unwrap_or_default(),
            num(r.regularization_strength),
            num(r.identity_residual),
            num(s.identity_tolerance),
        );
    }
    out
}

pub fn attacks_csv(records: &[AttackRecord]) -> String {
    let mut out = String::from(
        "solver,instance,method,backend,objective_value,delta_linf,input_gap,zero_gradient_coordinates,hit_nondifferentiable_point,grad_check_max_relative_error\n",
    );
    for a in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            field(&a.solver),
            a.instance,
            a.method,
            a.backend,
            num(a.objective_value),
            num(a.delta_linf),
            num(a.input_gap),
            a.zero_gradient_coordinates,
            a.hit_nondifferentiable_point,
            a.grad_check.as_ref().map(|g| num(g.max_relative_error)).unwrap_or_default(),
        );
    }
    out
}

pub fn grid_csv(grid: &GridSearch) -> String {
    let mut out = String::from("alpha,mean_error,failures,chosen\n");
    for p in &grid.points {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            num(p.alpha),
            p.mean_error.map(num).unwrap_or_default(),
            p.failures.len(),
            p.alpha == grid.chosen
        );
    }
    out
}

fn markdown_table(out: &mut String, aggs: &[MetricsAggregate], pick: impl Fn(&MetricsAggregate) -> &[f64; 9]) {
    let cols: Vec<String> = summary_columns().iter().map(|c| c.replace('|', "\\|")).collect();
    let _ = writeln!(out, "| {} |", cols.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(cols.len()));
    for a in aggs {
        let vals: Vec<String> = pick(a).iter().map(|v| format!("{v:.4}")).collect();
        let _ = writeln!(out, "| {} | {} |", a.solver, vals.join(" | "));
    }
}

fn violation_lines(out: &mut String, records: &[StabilityRecord]) {
    let mut keys: Vec<(&str, bool, Perturbation)> = Vec::new();
    for r in records {
        let k = (r.solver.as_str(), r.cross, r.perturbation);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    if keys.is_empty() {
        return;
    }
    let _ = writeln!(out, "\n## Stability bound\n");
    let _ = writeln!(out, "| solver | regularizer | perturbation | pairs | violations | median slack |");
    let _ = writeln!(out, "|---|---|---|---|---|---|");
    for (solver, cross, pert) in keys {
        let group: Vec<&StabilityRecord> = records
            .iter()
            .filter(|r| r.solver == solver && r.cross == cross && r.perturbation == pert)
            .collect();
        let violations = group.iter().filter(|r| r.report.violated).count();
        let mut slack: Vec<f64> = group.iter().map(|r| r.report.slack).collect();
        let regularizer = if cross {
            format!("tikhonov(alpha={})", group[0].report.regularization_strength)
        } else {
            "own".to_string()
        };
        let _ = writeln!(
            out,
            "| {solver} | {regularizer} | {} | {} | {violations} | {:.4e} |",
            pert.as_str(),
            group.len(),
            median(&mut slack)
        );
    }
}

pub fn summary_markdown(results: &RunResults) -> String {
    let mut out = String::from("# Benchmark summary\n\n## Mean over test instances\n\n");
    markdown_table(&mut out, &results.aggregates, |a| &a.mean);
    out.push_str("\n## Median over test instances\n\n");
    markdown_table(&mut out, &results.aggregates, |a| &a.median);
    if let Some(g) = &results.grid {
        let _ = writeln!(out, "\nTuned {} alpha: {}", g.solver, g.chosen);
    }
    violation_lines(&mut out, &results.stability);
    out
}

fn slug(label: &str) -> String {
    let mut s: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect();
    while s.contains("__") {
        s = s.replace("__", "_");
    }
    s.trim_matches('_').to_string()
}

/// One scatter file per solver, regularizer and perturbation kind.
pub fn scatter_files(results: &RunResults) -> Vec<(String, String)> {
    let worst = worst_case_bound(results.m, results.epsilon);
    let mut keys: Vec<(&str, bool, Perturbation)> = Vec::new();
    for r in &results.stability {
        let k = (r.solver.as_str(), r.cross, r.perturbation);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(solver, cross, pert)| {
            let reports: Vec<StabilityReport> = results
                .stability
                .iter()
                .filter(|r| r.solver == solver && r.cross == cross && r.perturbation == pert)
                .map(|r| r.report.clone())
                .collect();
            let kind = if cross { "cross-tikhonov" } else { "own" };
            let name = format!("scatter/{}_{}_{}.dat", slug(solver), kind, pert.as_str());
            let header_worst = (pert == Perturbation::Adversarial).then_some(worst);
            (name, scatter_data(&reports, header_worst))
        })
        .collect()
}

fn write_text(dir: &Path, name: &str, text: &str, written: &mut Vec<String>) -> Result<()> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    io::write_bytes(&path, text.as_bytes())?;
    written.push(name.to_string());
    Ok(())
}

fn write_json_file<T: serde::Serialize>(dir: &Path, name: &str, value: &T, written: &mut Vec<String>) -> Result<()> {
    io::write_json(&dir.join(name), value)?;
    written.push(name.to_string());
    Ok(())
}

#[derive(serde::Serialize, serde::Deserialize)]
struct MetricsJson {
    rows: Vec<MetricsRow>,
    aggregates: Vec<MetricsAggregate>,
    epsilon: f64,
    m: usize,
}

/// Writes the per-format tables plus `summary.md` and the scatter files;
/// returns the relative paths written.
pub fn emit_report(results: &RunResults, formats: &[ReportFormat], dir: &Path) -> Result<Vec<String>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for format in formats {
        match format {
            ReportFormat::Csv => {
                write_text(dir, "metrics.csv", &metrics_csv(&results.rows), &mut written)?;
                write_text(dir, "aggregates.csv", &aggregates_csv(&results.aggregates), &mut written)?;
                write_text(dir, "stability.csv", &stability_csv(&results.stability), &mut written)?;
                write_text(dir, "attacks.csv", &attacks_csv(&results.attacks), &mut written)?;
                if let Some(g) = &results.grid {
                    write_text(dir, "grid.csv", &grid_csv(g), &mut written)?;
                }
            }
            ReportFormat::Json => {
                let metrics = MetricsJson {
                    rows: results.rows.clone(),
                    aggregates: results.aggregates.clone(),
                    epsilon: results.epsilon,
                    m: results.m,
                };
                write_json_file(dir, "metrics.json", &metrics, &mut written)?;
                write_json_file(dir, "stability.json", &results.stability, &mut written)?;
                write_json_file(dir, "attacks.json", &results.attacks, &mut written)?;
                if let Some(g) = &results.grid {
                    write_json_file(dir, "grid.json", g, &mut written)?;
                }
            }
        }
    }
    for (name, text) in scatter_files(results) {
        write_text(dir, &name, &text, &mut written)?;
    }
    write_text(dir, "summary.md", &summary_markdown(results), &mut written)?;
    Ok(written)
}

pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<()> {
    io::write_json(&dir.join("manifest.json"), manifest)
}

/// Reads back the JSON artifacts of a finished run.
pub fn load_results(dir: &Path) -> Result<RunResults> {
    let metrics: MetricsJson = io::read_json(&dir.join("metrics.json"))?;
    let stability: Vec<StabilityRecord> = io::read_json(&dir.join("stability.json"))?;
    let attacks: Vec<AttackRecord> = io::read_json(&dir.join("attacks.json"))?;
    let grid_path = dir.join("grid.json");
    let grid = if grid_path.exists() { Some(io::read_json(&grid_path)?) } else { None };
    Ok(RunResults {
        rows: metrics.rows,
        aggregates: metrics.aggregates,
        stability,
        attacks,
        grid,
        epsilon: metrics.epsilon,
        m: metrics.m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::SolverId;

    fn row(solver: &str, instance: usize, x: f64) -> MetricsRow {
        MetricsRow {
            solver: solver.into(),
            solver_id: SolverId::Tikhonov,
            instance: Some(instance),
            clean_error: x,
            adv_error: x,
            clean_consistency: x,
            adv_consistency: x,
            output_data_gap: x,
            smoothness_gap: x,
            output_gap: x,
            input_gap: 20.48,
            lipschitz_ratio: x / 20.48,
        }
    }

    #[test]
    fn empty_results_give_header_only_csv() {
        let csv = metrics_csv(&[]);
        assert_eq!(csv.lines().count(), 1);
        assert!(csv.starts_with("solver,instance,|u-u_gt|^2,"));
    }

    #[test]
    fn single_solver_gives_one_data_row() {
        let csv = metrics_csv(&[row("tikhonov(alpha=1e2)", 0, 1.5)]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1].split(',').count(), 11);
        assert!(lines[1].contains("20.48"));
    }

    #[test]
    fn summary_has_ten_columns() {
        let mut results = RunResults::empty(0.2, 512);
        results.rows = vec![row("a", 0, 1.0), row("a", 1, 3.0), row("b", 0, 2.0)];
        results.aggregates = crate::stability::aggregate(&results.rows);
        let md = summary_markdown(&results);
        let header = md.lines().find(|l| l.starts_with("| solver")).unwrap();
        assert_eq!(header.split(" | ").count(), 10);
        assert!(header.contains("\\|u-u_gt\\|^2"));
        assert_eq!(summary_columns().len(), 10);
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut results = RunResults::empty(0.2, 512);
        results.rows = vec![row("a", 0, 0.1 + 0.2)];
        results.aggregates = crate::stability::aggregate(&results.rows);
        emit_report(&results, &[ReportFormat::Json, ReportFormat::Csv], dir.path()).unwrap();
        let back = load_results(dir.path()).unwrap();
        assert_eq!(back, results);
    }

    #[test]
    fn labels_become_file_names() {
        assert_eq!(slug("tikhonov(alpha=1e2)"), "tikhonov_alpha_1e2");
    }
}
