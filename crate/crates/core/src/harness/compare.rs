use std::fmt::Write as _;

use serde::Serialize;

use crate::compat::{is_compatible, UsageModel};
use crate::graph::DependencyGraph;
use crate::planner::{baseline_direct_latest, plan_upgrades, UpgradePlan};
use crate::registry::{PackageId, RegistryIndex};

use super::HarnessError;

/// A node that was moved by a decision onto a release that breaks a
/// construct the project reaches, measured against its starting release.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub package: PackageId,
    pub from: String,
    pub to: String,
    pub evidence: Vec<String>,
}

/// Checks every node a decision upgraded that existed in `initial` and is
/// still in `final_graph`.
pub fn breaking_violations(
    plan: &UpgradePlan,
    initial: &DependencyGraph,
    final_graph: &DependencyGraph,
    reg: &RegistryIndex,
    usage: &UsageModel,
) -> Result<Vec<Violation>, HarnessError> {
    let mut out = Vec::new();
    for d in plan.upgrades() {
        let (Some(before), Some(after)) = (initial.version_of(&d.package), final_graph.version_of(&d.package)) else {
            continue;
        };
        let old = reg.release(&d.package, before)?;
        let new = reg.release(&d.package, after)?;
        let compat = is_compatible(usage, &d.package, old, new)?;
        if !compat.is_compatible() {
            out.push(Violation {
                package: d.package.clone(),
                from: before.to_string(),
                to: after.to_string(),
                evidence: compat.evidence.iter().map(ToString::to_string).collect(),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComparisonRow {
    pub mode: String,
    /// Nodes the mode made a decision about.
    pub nodes: u64,
    pub original_version_lag: u64,
    pub reduced_version_lag: i64,
    pub original_time_lag_days: u64,
    pub reduced_time_lag_days: i64,
    pub original_dep_count: u64,
    pub dep_count_delta: i64,
    pub breaking_violations: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
}

fn row(
    plan: &UpgradePlan,
    initial: &DependencyGraph,
    reg: &RegistryIndex,
    usage: &UsageModel,
) -> Result<ComparisonRow, HarnessError> {
    let final_graph = plan.apply(initial, reg)?;
    let violations = breaking_violations(plan, initial, &final_graph, reg, usage)?;
    let (b, a) = (&plan.metrics_before, &plan.metrics_after);
    Ok(ComparisonRow {
        mode: plan.mode.as_str().to_string(),
        nodes: plan.decisions.len() as u64,
        original_version_lag: b.total_version_lag,
        reduced_version_lag: b.total_version_lag as i64 - a.total_version_lag as i64,
        original_time_lag_days: b.total_time_lag_days,
        reduced_time_lag_days: b.total_time_lag_days as i64 - a.total_time_lag_days as i64,
        original_dep_count: b.node_count,
        dep_count_delta: b.node_count as i64 - a.node_count as i64,
        breaking_violations: violations.len() as u64,
    })
}

/// Runs both modes on the same graph and tabulates them.
pub fn compare_modes(
    initial: &DependencyGraph,
    reg: &RegistryIndex,
    usage: &UsageModel,
) -> Result<ComparisonReport, HarnessError> {
    let lagease = plan_upgrades(initial, reg, usage)?;
    let direct = baseline_direct_latest(initial, reg)?;
    Ok(ComparisonReport {
        rows: vec![
            row(&lagease, initial, reg, usage)?,
            row(&direct, initial, reg, usage)?,
        ],
    })
}

impl ComparisonReport {
    pub fn row(&self, mode: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.mode == mode)
    }

    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("report serializes");
        serde_json::to_string_pretty(&value).expect("report serializes") + "\n"
    }

    /// Aligned plain-text table, one row per mode.
    pub fn to_text(&self) -> String {
        let header = [
            "mode",
            "nodes",
            "orig_version_lag",
            "reduced_version_lag",
            "orig_time_lag_days",
            "reduced_time_lag_days",
            "orig_deps",
            "dep_delta",
            "breaking_violations",
        ];
        let cells: Vec<[String; 9]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.mode.clone(),
                    r.nodes.to_string(),
                    r.original_version_lag.to_string(),
                    r.reduced_version_lag.to_string(),
                    r.original_time_lag_days.to_string(),
                    r.reduced_time_lag_days.to_string(),
                    r.original_dep_count.to_string(),
                    r.dep_count_delta.to_string(),
                    r.breaking_violations.to_string(),
                ]
            })
            .collect();
        format_table(&header, &cells)
    }
}

pub(crate) fn format_table<const N: usize>(header: &[&str; N], rows: &[[String; N]]) -> String {
    let mut widths = header.map(str::len);
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: Vec<&str>| {
        let parts: Vec<String> = cells
            .iter()
            .zip(widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&mut out, header.to_vec());
    for r in rows {
        line(&mut out, r.iter().map(String::as_str).collect());
    }
    out
}
