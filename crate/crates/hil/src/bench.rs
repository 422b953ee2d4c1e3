//! Benchmark tables over KPI rows: Pass@k per group, with/without-HIL pairs,
//! and coverage progression across iterations.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::kpi::{KpiRow, Pct};

/// Row fields a bench table can be grouped by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKey {
    Design,
    Model,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Table {
    pub title: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(title: &str, header: Vec<String>) -> Self {
        Table { title: title.into(), header, rows: Vec::new() }
    }

    /// Fixed-width text rendering, title first.
    pub fn render_text(&self) -> String {
        let mut widths: Vec<usize> = self.header.iter().map(|h| h.len()).collect();
        for r in &self.rows {
            for (i, c) in r.iter().enumerate() {
                widths[i] = widths[i].max(c.len());
            }
        }
        let line = |cells: &[String]| {
            let parts: Vec<String> = cells.iter().enumerate().map(|(i, c)| format!("{c:<w$}", w = widths[i])).collect();
            parts.join(" | ").trim_end().to_string()
        };
        let mut out = format!("{}\n{}\n", self.title, line(&self.header));
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        out.push_str(&rule.join("-+-"));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&line(r));
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory csv");
        for r in &self.rows {
            w.write_record(r).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is utf-8")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BenchReport {
    pub pass_at_k: Table,
    pub hil_delta: Table,
    pub iterations: Table,
}

impl BenchReport {
    pub fn render_text(&self) -> String {
        [&self.pass_at_k, &self.hil_delta, &self.iterations].map(Table::render_text).join("\n")
    }
}

/// KPI rows as CSV; the header is the [`KpiRow`] field names.
pub fn rows_to_csv(rows: &[KpiRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is utf-8")
}

/// Inverse of [`rows_to_csv`].
pub fn rows_from_csv(text: &str) -> Result<Vec<KpiRow>, String> {
    csv::Reader::from_reader(text.as_bytes()).deserialize().collect::<Result<_, _>>().map_err(|e| e.to_string())
}

fn group_label(row: &KpiRow, grouping: &[GroupKey]) -> String {
    if grouping.is_empty() {
        return "all".into();
    }
    let parts: Vec<&str> = grouping
        .iter()
        .map(|k| match k {
            GroupKey::Design => row.design.as_str(),
            GroupKey::Model => row.model_label.as_str(),
        })
        .collect();
    parts.join("/")
}

/// Several rows landing in one cell: counts add, first generation must hold
/// for all, fix attempts take the max, percentages are averaged (truncated).
fn merge(rows: &[&KpiRow]) -> KpiRow {
    let first = rows[0];
    let mean = |f: fn(&KpiRow) -> Pct| Pct(rows.iter().map(|r| f(r).0).sum::<u64>() / rows.len() as u64);
    KpiRow {
        design: first.design.clone(),
        model_label: first.model_label.clone(),
        pass_index: first.pass_index,
        n_assertions: rows.iter().map(|r| r.n_assertions).sum(),
        first_generation: rows.iter().all(|r| r.first_generation),
        fix_attempts: rows.iter().map(|r| r.fix_attempts).max().unwrap_or(0),
        pct_proven: mean(|r| r.pct_proven),
        pct_coverage: mean(|r| r.pct_coverage),
        with_hil: rows.iter().any(|r| r.with_hil),
    }
}

fn delta(before: Pct, after: Pct) -> String {
    let d = after.0 as i64 - before.0 as i64;
    let sign = if d < 0 { "-" } else { "+" };
    format!("{sign}{}", Pct(d.unsigned_abs()))
}

fn yes_no(b: bool) -> String {
    if b { "Yes" } else { "No" }.into()
}

type Metric = (&'static str, fn(&KpiRow) -> String);

type Cells<'a> = BTreeMap<String, BTreeMap<(u32, bool), Vec<&'a KpiRow>>>;

/// Build the three tables. Pass@k columns are independent runs indexed by
/// `pass_index`, not best-of-k.
pub fn bench_report(rows: &[KpiRow], grouping: &[GroupKey]) -> BenchReport {
    let mut cells: Cells = BTreeMap::new();
    for r in rows {
        cells.entry(group_label(r, grouping)).or_default().entry((r.pass_index, r.with_hil)).or_default().push(r);
    }
    let k = rows.iter().map(|r| r.pass_index).max().unwrap_or(1).max(1);
    let passes: Vec<String> = (1..=k).map(|i| format!("Pass@{i}")).collect();

    let mut header = vec!["group".to_string(), "metric".to_string()];
    header.extend(passes.iter().cloned());
    let mut pass_at_k = Table::new("KPIs per independent run", header);
    let metrics: [Metric; 5] = [
        ("n_assertions", |r| r.n_assertions.to_string()),
        ("first_generation", |r| yes_no(r.first_generation)),
        ("fix_attempts", |r| r.fix_attempts.to_string()),
        ("pct_proven", |r| r.pct_proven.to_string()),
        ("pct_coverage", |r| r.pct_coverage.to_string()),
    ];
    for (group, by_pass) in &cells {
        let merged: Vec<Option<KpiRow>> = (1..=k)
            .map(|i| {
                let all: Vec<&KpiRow> =
                    by_pass.iter().filter(|((p, _), _)| *p == i).flat_map(|(_, v)| v.iter().copied()).collect();
                (!all.is_empty()).then(|| merge(&all))
            })
            .collect();
        for (name, f) in metrics {
            let mut row = vec![group.clone(), name.to_string()];
            row.extend(merged.iter().map(|m| m.as_ref().map_or("-".to_string(), f)));
            pass_at_k.rows.push(row);
        }
    }

    let mut hil_delta = Table::new(
        "Coverage with and without HIL",
        [
            "group",
            "pass",
            "n_without",
            "n_with",
            "pct_proven_without",
            "pct_proven_with",
            "delta_proven",
            "pct_coverage_without",
            "pct_coverage_with",
            "delta_coverage",
        ]
        .map(String::from)
        .to_vec(),
    );
    for (group, by_pass) in &cells {
        for i in 1..=k {
            let (Some(without), Some(with)) = (by_pass.get(&(i, false)), by_pass.get(&(i, true))) else {
                continue;
            };
            let (a, b) = (merge(without), merge(with));
            hil_delta.rows.push(vec![
                group.clone(),
                format!("Pass@{i}"),
                a.n_assertions.to_string(),
                b.n_assertions.to_string(),
                a.pct_proven.to_string(),
                b.pct_proven.to_string(),
                delta(a.pct_proven, b.pct_proven),
                a.pct_coverage.to_string(),
                b.pct_coverage.to_string(),
                delta(a.pct_coverage, b.pct_coverage),
            ]);
        }
    }

    let mut header = vec!["group".to_string()];
    header.extend((1..=k).map(|i| format!("iter{i}")));
    header.push("delta".into());
    let mut iterations = Table::new("Coverage without HIL across iterations", header);
    for (group, by_pass) in &cells {
        let series: Vec<Option<Pct>> =
            (1..=k).map(|i| by_pass.get(&(i, false)).map(|v| merge(v).pct_coverage)).collect();
        let present: Vec<Pct> = series.iter().flatten().copied().collect();
        if present.is_empty() {
            continue;
        }
        let mut row = vec![group.clone()];
        row.extend(series.iter().map(|p| p.map_or("-".to_string(), |p| p.to_string())));
        row.push(delta(present[0], *present.last().unwrap()));
        iterations.rows.push(row);
    }

    BenchReport { pass_at_k, hil_delta, iterations }
}
