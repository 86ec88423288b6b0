//! Text outputs of the experiment drivers: per-run CSV, the Iter/Samp% grid
//! and the multi-seed comparison table.

use std::fmt::Write as _;

use crate::session::{format_rate_truncated, AblationTable, MetricsTrace};

/// `iter,samp_pct,eer,strategy,seed`; a missing EER is an empty cell.
pub fn trace_csv(trace: &MetricsTrace) -> String {
    let mut out = String::from("iter,samp_pct,eer,strategy,seed\n");
    for r in &trace.records {
        let eer = r.eer.map(|e| e.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.iter, r.samp_pct, eer, r.strategy, trace.seed
        );
    }
    out
}

/// Rows of EER (fractions) under a shared Iter/Samp% header. Cells print as
/// percentages with two decimals; absent values print as `-`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub n_train: usize,
    /// Cumulative labeled count after each iteration.
    pub labeled: Vec<usize>,
    pub rows: Vec<(String, Vec<Option<f64>>)>,
}

impl Grid {
    pub fn from_traces<'a>(
        rows: impl IntoIterator<Item = (String, &'a MetricsTrace)>,
    ) -> Option<Grid> {
        let rows: Vec<(String, &MetricsTrace)> = rows.into_iter().collect();
        let widest = rows.iter().max_by_key(|(_, t)| t.records.len())?.1;
        Some(Grid {
            n_train: widest.n_train,
            labeled: widest.records.iter().map(|r| r.labeled).collect(),
            rows: rows
                .iter()
                .map(|(name, t)| (name.clone(), t.records.iter().map(|r| r.eer).collect()))
                .collect(),
        })
    }

    pub fn columns(&self) -> usize {
        self.labeled.len()
    }

    pub fn render(&self) -> String {
        let label_w = self
            .rows
            .iter()
            .map(|(n, _)| n.len())
            .chain([5])
            .max()
            .unwrap_or(5);
        let cell_w = 6;
        let mut out = String::new();
        let line = |out: &mut String, name: &str, cells: Vec<String>| {
            let _ = write!(out, "{name:<label_w$} |");
            for c in cells {
                let _ = write!(out, " {c:>cell_w$}");
            }
            out.push('\n');
        };
        line(
            &mut out,
            "Iter",
            (1..=self.columns()).map(|t| t.to_string()).collect(),
        );
        line(
            &mut out,
            "Samp%",
            self.labeled
                .iter()
                .map(|&l| format_rate_truncated(l, self.n_train))
                .collect(),
        );
        let _ = writeln!(
            out,
            "{}-+{}",
            "-".repeat(label_w),
            "-".repeat((cell_w + 1) * self.columns())
        );
        for (name, values) in &self.rows {
            line(
                &mut out,
                name,
                (0..self.columns())
                    .map(|t| match values.get(t).copied().flatten() {
                        Some(e) => format!("{:.2}", e * 100.0),
                        None => "-".to_string(),
                    })
                    .collect(),
            );
        }
        out
    }
}

pub fn ablation_grid(table: &AblationTable) -> String {
    Grid::from_traces(table.rows.iter().map(|(n, t)| (n.clone(), t)))
        .map(|g| g.render())
        .unwrap_or_default()
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

/// Per-iteration mean±std EER of each strategy over seeds, followed by the
/// fully-supervised floor (one row per iteration, constant) as strategy
/// `supervised`.
pub fn comparison_csv(curves: &[(String, Vec<MetricsTrace>)], floor: &[f64]) -> String {
    let mut out = String::from("iter,samp_pct,strategy,mean_eer,std_eer,seeds\n");
    let iterations = curves
        .iter()
        .flat_map(|(_, ts)| ts.iter().map(|t| t.records.len()))
        .max()
        .unwrap_or(0);
    let reference = curves
        .iter()
        .flat_map(|(_, ts)| ts.iter())
        .find(|t| t.records.len() == iterations);
    for (name, traces) in curves {
        for it in 1..=iterations {
            let eers: Vec<f64> = traces.iter().filter_map(|t| t.eer_at(it)).collect();
            if eers.is_empty() {
                continue;
            }
            let samp = reference.map_or(0.0, |t| t.records[it - 1].samp_pct);
            let (mean, std) = mean_std(&eers);
            let _ = writeln!(out, "{it},{samp},{name},{mean},{std},{}", eers.len());
        }
    }
    if !floor.is_empty() {
        let (mean, std) = mean_std(floor);
        for it in 1..=iterations {
            let samp = reference.map_or(0.0, |t| t.records[it - 1].samp_pct);
            let _ = writeln!(out, "{it},{samp},supervised,{mean},{std},{}", floor.len());
        }
    }
    out
}
