//! Deterministic CSV tables for results.
//!
//! Floats use Rust's shortest round-trip formatting, so a value read back
//! parses to the same `f64`. Optional `#` comment lines precede the header.

use std::io::Write;
use std::path::Path;

use crate::closed_loop::ClosedLoopResult;
use crate::error::{Error, Result};
use crate::game::{SuboperatorResult, TradeOutcome};
use crate::longterm::PeriodChoice;
use crate::model::sharing_label;
use crate::multiplex::{ParetoFront, SchemeCandidateSet};
use crate::orthogonal::SolveResult;
use crate::scenario::Scenario;

/// A header row plus data rows, all as strings.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

fn num(x: f64) -> String {
    x.to_string()
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Table {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::Config(format!(
                "row of {} cells for {} columns",
                row.len(),
                self.header.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    /// Writes `comments` (each prefixed with `# `), then the table.
    pub fn write<W: Write>(&self, mut out: W, comments: &[String]) -> Result<()> {
        for c in comments {
            if c.contains('\n') {
                return Err(Error::Config("comment lines cannot contain newlines".into()));
            }
            writeln!(out, "# {c}")?;
        }
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            w.write_record(row).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self, comments: &[String]) -> Result<String> {
        let mut buf = Vec::new();
        self.write(&mut buf, comments)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn save(&self, path: impl AsRef<Path>, comments: &[String]) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        self.write(std::io::BufWriter::new(file), comments)
    }
}

fn ids(scenario: &Scenario, prefix: &str) -> Vec<String> {
    scenario.slices.iter().map(|s| format!("{prefix}{}", s.id)).collect()
}

/// One row per result: scenario, solver, seed, sizes, per-slice profits,
/// total, feasibility, iterations, scheme label.
pub fn solve_table(scenario: &Scenario, seed: u64, results: &[SolveResult]) -> Result<Table> {
    let mut header = vec!["scenario".to_string(), "solver".into(), "seed".into()];
    header.extend(ids(scenario, "s_"));
    header.extend(ids(scenario, "w_"));
    header.extend(["total", "feasible", "iterations", "scheme"].map(String::from));
    let mut t = Table::new(header);
    for r in results {
        let mut row = vec![scenario.name.clone(), r.meta.solver.clone(), seed.to_string()];
        row.extend(r.sizes.iter().copied().map(num));
        row.extend(r.outcome.profits.iter().copied().map(num));
        row.push(num(r.outcome.total_profit));
        row.push(r.outcome.feasible.to_string());
        row.push(r.meta.iterations.to_string());
        row.push(sharing_label(&r.sharing));
        t.push(row)?;
    }
    Ok(t)
}

/// One row per front point: scheme id and label, sizes, per-slice profits, total.
pub fn front_table(
    scenario: &Scenario,
    candidates: &SchemeCandidateSet,
    front: &ParetoFront,
) -> Result<Table> {
    let mut header = vec!["scheme_id".to_string(), "scheme".into()];
    header.extend(ids(scenario, "s_"));
    header.extend(ids(scenario, "w_"));
    header.push("total".into());
    let mut t = Table::new(header);
    for p in &front.points {
        let mut row = vec![p.scheme_index.to_string(), candidates.label(p.scheme_index)];
        row.extend(p.sizes.iter().copied().map(num));
        row.extend(p.profits.iter().copied().map(num));
        row.push(num(p.total()));
        t.push(row)?;
    }
    Ok(t)
}

/// Per-iteration residuals, with the final configuration on the last row.
pub fn closed_loop_table(scenario: &Scenario, run: &ClosedLoopResult) -> Result<Table> {
    let mut header = vec!["iteration".to_string(), "residual".into()];
    header.extend(ids(scenario, "s_"));
    header.extend(["total", "converged"].map(String::from));
    let mut t = Table::new(header);
    let last = run.residuals.len();
    for (k, r) in run.residuals.iter().enumerate() {
        let mut row = vec![(k + 1).to_string(), num(*r)];
        if k + 1 == last {
            row.extend(run.result.sizes.iter().copied().map(num));
            row.push(num(run.result.outcome.total_profit));
            row.push(run.converged.to_string());
        } else {
            row.extend(std::iter::repeat_n(String::new(), scenario.m() + 2));
        }
        t.push(row)?;
    }
    Ok(t)
}

/// One row per candidate update period.
pub fn period_table(choice: &PeriodChoice) -> Result<Table> {
    let header = [
        "period",
        "updates",
        "gross",
        "reconfig_cost",
        "total",
        "stale_epochs",
        "failed_epochs",
        "best",
    ]
    .map(String::from)
    .to_vec();
    let mut t = Table::new(header);
    for row in &choice.table {
        t.push(vec![
            row.period.to_string(),
            row.updates.to_string(),
            num(row.gross),
            num(row.reconfig_cost),
            num(row.total),
            row.stale_epochs.to_string(),
            row.failed_epochs.to_string(),
            (row.period == choice.best).to_string(),
        ])?;
    }
    Ok(t)
}

/// One row per operator: final prices, net lease, money flows, profits.
pub fn trade_table(scenario: &Scenario, traded: &[usize], outcome: &TradeOutcome) -> Result<Table> {
    let names: Vec<&str> = traded.iter().map(|&j| scenario.resource_names[j].as_str()).collect();
    let mut header = vec!["operator".to_string()];
    header.extend(names.iter().map(|n| format!("price_{n}")));
    header.extend(names.iter().map(|n| format!("lease_{n}")));
    header.extend(
        ["paid", "received", "profit", "no_trade_profit", "converged", "rounds"].map(String::from),
    );
    let mut t = Table::new(header);
    let ex = &outcome.execution;
    for (o, id) in outcome.operator_ids.iter().enumerate() {
        let mut row = vec![id.clone()];
        row.extend(outcome.prices.iter().copied().map(num));
        row.extend(ex.net_lease[o].iter().copied().map(num));
        row.push(num(ex.paid[o]));
        row.push(num(ex.received[o]));
        row.push(num(outcome.profits[o]));
        row.push(num(outcome.no_trade_profits[o]));
        row.push(outcome.converged.to_string());
        row.push(outcome.rounds().to_string());
        t.push(row)?;
    }
    Ok(t)
}

/// One row per sub-operator under the cooperative optimum.
pub fn suboperator_table(ids: &[String], coop: &SuboperatorResult) -> Result<Table> {
    let mut t = Table::new(["operator", "profit", "scheme"].map(String::from).to_vec());
    for (id, p) in ids.iter().zip(&coop.profits) {
        t.push(vec![id.clone(), num(*p), sharing_label(&coop.result.sharing)])?;
    }
    Ok(t)
}
