use std::io::Write;

use serde::Serialize;

use modnet::harness::{
    CalibrationReport, ComparisonReport, CorrelationReport, CsvReport, PowerReport, ReportEnvelope,
};
use modnet::hypothesis::{CommunityTree, TestResult};

use crate::commands::QuantileLaw;
use crate::{CliResult, Format, GlobalArgs};

/// Results that can be written as a CSV table.
pub trait Tabular {
    fn csv(&self, out: &mut dyn Write) -> modnet::Result<()>;
}

macro_rules! tabular_via_report {
    ($($t:ty),*) => {$(
        impl Tabular for $t {
            fn csv(&self, out: &mut dyn Write) -> modnet::Result<()> {
                self.write_csv(out)
            }
        }
    )*};
}

tabular_via_report!(
    Vec<CalibrationReport>,
    PowerReport,
    CorrelationReport,
    ComparisonReport
);

fn csv_rows(out: &mut dyn Write, header: &[&str], rows: Vec<Vec<String>>) -> modnet::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

impl Tabular for TestResult {
    fn csv(&self, out: &mut dyn Write) -> modnet::Result<()> {
        csv_rows(
            out,
            &[
                "test",
                "n",
                "statistic",
                "critical_value",
                "p_value",
                "alpha",
                "reject",
            ],
            vec![vec![
                self.test.to_string(),
                self.n.to_string(),
                self.statistic.to_string(),
                self.critical_value.to_string(),
                self.p_value.to_string(),
                self.alpha.to_string(),
                self.reject.to_string(),
            ]],
        )
    }
}

#[derive(Debug, Serialize)]
pub struct QuantileRow {
    pub p: f64,
    pub quantile: f64,
}

#[derive(Debug, Serialize)]
pub struct QuantilesOutput {
    pub law: QuantileLaw,
    pub n: Option<usize>,
    pub rows: Vec<QuantileRow>,
}

impl Tabular for QuantilesOutput {
    fn csv(&self, out: &mut dyn Write) -> modnet::Result<()> {
        let law = serde_json::to_value(self.law)?;
        let law = law.as_str().unwrap_or_default().to_string();
        let n = self.n.map(|n| n.to_string()).unwrap_or_default();
        csv_rows(
            out,
            &["law", "n", "p", "quantile"],
            self.rows
                .iter()
                .map(|r| {
                    vec![
                        law.clone(),
                        n.clone(),
                        r.p.to_string(),
                        r.quantile.to_string(),
                    ]
                })
                .collect(),
        )
    }
}

/// A community tree with member labels in place of indices.
#[derive(Debug, Serialize)]
pub struct NodeView {
    pub id: String,
    pub depth: usize,
    pub side: Option<i8>,
    pub size: usize,
    pub members: Vec<String>,
    pub test: Option<TestResult>,
    pub unassigned: Vec<String>,
    pub notes: Vec<String>,
    pub children: Vec<NodeView>,
}

impl NodeView {
    fn new(tree: &CommunityTree, labels: &[String], id: String) -> Self {
        let names = |idx: &[usize]| idx.iter().map(|&i| labels[i].clone()).collect::<Vec<_>>();
        NodeView {
            depth: tree.depth,
            side: tree.side,
            size: tree.members.len(),
            members: names(&tree.members),
            test: tree.test.clone(),
            unassigned: names(&tree.unassigned),
            notes: tree.notes.clone(),
            children: tree
                .children
                .iter()
                .enumerate()
                .map(|(k, c)| NodeView::new(c, labels, format!("{id}.{}", k + 1)))
                .collect(),
            id,
        }
    }

    fn flatten<'a>(&'a self, out: &mut Vec<&'a NodeView>) {
        out.push(self);
        for c in &self.children {
            c.flatten(out);
        }
    }
}

#[derive(Debug, Serialize)]
pub struct NetworkSummary {
    pub n: usize,
    pub provenance: Vec<String>,
    pub dropped: Vec<String>,
    pub excluded: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct AnalyzeOutput {
    pub network: NetworkSummary,
    pub tree: NodeView,
}

impl AnalyzeOutput {
    pub fn new(
        tree: &CommunityTree,
        labels: &[String],
        n: usize,
        provenance: Vec<String>,
        dropped: Vec<String>,
        excluded: Vec<String>,
    ) -> Self {
        AnalyzeOutput {
            network: NetworkSummary {
                n,
                provenance,
                dropped,
                excluded,
            },
            tree: NodeView::new(tree, labels, "1".into()),
        }
    }
}

impl Tabular for AnalyzeOutput {
    fn csv(&self, out: &mut dyn Write) -> modnet::Result<()> {
        let mut nodes = Vec::new();
        self.tree.flatten(&mut nodes);
        let rows = nodes
            .iter()
            .map(|v| {
                let t = v.test.as_ref();
                let opt = |f: &dyn Fn(&TestResult) -> String| t.map(f).unwrap_or_default();
                vec![
                    v.id.clone(),
                    v.depth.to_string(),
                    v.side.map(|s| s.to_string()).unwrap_or_default(),
                    v.size.to_string(),
                    opt(&|t| t.test.to_string()),
                    opt(&|t| t.statistic.to_string()),
                    opt(&|t| t.critical_value.to_string()),
                    opt(&|t| t.p_value.to_string()),
                    opt(&|t| t.reject.to_string()),
                    v.members.join(";"),
                ]
            })
            .collect();
        csv_rows(
            out,
            &[
                "node",
                "depth",
                "side",
                "size",
                "test",
                "statistic",
                "critical_value",
                "p_value",
                "reject",
                "members",
            ],
            rows,
        )
    }
}

pub fn write_bytes(g: &GlobalArgs, bytes: &[u8]) -> CliResult<()> {
    match &g.out {
        Some(path) => std::fs::write(path, bytes)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
        }
    }
    Ok(())
}

/// Writes `results` in the requested format. JSON output carries the full
/// envelope; CSV output prints warnings to standard error instead.
pub fn emit<T: Serialize + Tabular>(
    g: &GlobalArgs,
    default: Format,
    inputs: serde_json::Value,
    results: &T,
    warnings: Vec<String>,
) -> CliResult<()> {
    let mut buf = Vec::new();
    match g.format.unwrap_or(default) {
        Format::Json => {
            ReportEnvelope::new(g.seed, inputs, results, warnings).write_json(&mut buf)?;
        }
        Format::Csv => {
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            results.csv(&mut buf)?;
        }
    }
    write_bytes(g, &buf)
}
