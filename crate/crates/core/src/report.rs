//! Run outputs: long-format metrics CSV, traffic ledger CSV, JSON summary,
//! and static SVG convergence charts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::engine::{EpochRecord, RunRecord, ShardReport};
use crate::metrics::{Metrics, METRIC_NAMES};

pub const CSV_HEADER: [&str; 5] = ["epoch", "scope", "client_id", "metric", "value"];
pub const SCOPES: [&str; 2] = ["global", "local"];

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: malformed row {row}: {message}")]
    Malformed {
        path: PathBuf,
        row: usize,
        message: String,
    },
    #[error("unknown metric {name:?}; valid names: {}", valid.join(", "))]
    UnknownMetric { name: String, valid: Vec<String> },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> ReportError + '_ {
    move |source| ReportError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Round to 9 significant digits and print the shortest decimal that
/// parses back to the rounded value.
pub fn format_value(v: f64) -> String {
    let rounded: f64 = format!("{v:.8e}")
        .parse()
        .expect("scientific notation parses");
    format!("{rounded}")
}

/// One CSV line. `client_id` is a number or `mean`; `value` is `None` for
/// an undefined metric.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub epoch: usize,
    pub scope: String,
    pub client_id: String,
    pub metric: String,
    pub value: Option<f64>,
}

fn scope_tables(
    e: &EpochRecord,
) -> [(&'static str, &BTreeMap<usize, Metrics>, Option<&Metrics>); 2] {
    [
        ("global", &e.global, Some(&e.global_mean)),
        ("local", &e.local, e.local_mean.as_ref()),
    ]
}

/// Rows in (epoch, scope, client, metric) order; each scope's `mean` row
/// follows its numbered clients.
pub fn metric_rows(record: &RunRecord) -> Vec<MetricRow> {
    let mut rows = Vec::new();
    for e in &record.epochs {
        for (scope, per_client, mean) in scope_tables(e) {
            let clients = per_client.iter().map(|(id, m)| (id.to_string(), m));
            for (client, m) in clients.chain(mean.map(|m| ("mean".to_string(), m))) {
                for (metric, value) in m.entries() {
                    rows.push(MetricRow {
                        epoch: e.epoch,
                        scope: scope.into(),
                        client_id: client.clone(),
                        metric: metric.into(),
                        value,
                    });
                }
            }
        }
    }
    rows
}

pub fn emit_csv(record: &RunRecord, path: &Path) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(CSV_HEADER).map_err(csv_err(path))?;
    for r in metric_rows(record) {
        let value = r.value.map(format_value).unwrap_or_default();
        w.write_record([r.epoch.to_string(), r.scope, r.client_id, r.metric, value])
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_csv(path: &Path) -> Result<Vec<MetricRow>, ReportError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = r.headers().map_err(csv_err(path))?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(ReportError::Malformed {
            path: path.into(),
            row: 0,
            message: format!("unexpected header {header:?}"),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let bad = |message: String| ReportError::Malformed {
            path: path.into(),
            row: i + 1,
            message,
        };
        let epoch = rec[0].parse().map_err(|e| bad(format!("epoch: {e}")))?;
        let value = match &rec[4] {
            "" => None,
            v => Some(v.parse().map_err(|e| bad(format!("value: {e}")))?),
        };
        rows.push(MetricRow {
            epoch,
            scope: rec[1].into(),
            client_id: rec[2].into(),
            metric: rec[3].into(),
            value,
        });
    }
    Ok(rows)
}

pub fn emit_ledger_csv(record: &RunRecord, path: &Path) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["epoch", "client_id", "bytes_up", "bytes_down"])
        .map_err(csv_err(path))?;
    for r in &record.ledger.rows {
        w.write_record(
            [
                r.epoch,
                r.client_id,
                r.bytes_up as usize,
                r.bytes_down as usize,
            ]
            .map(|v| v.to_string()),
        )
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

#[derive(Debug, Serialize)]
struct ClientSummary<'a> {
    n_k: usize,
    train: usize,
    test: usize,
    local: Option<&'a Metrics>,
    global: Option<&'a Metrics>,
}

#[derive(Debug, Serialize)]
struct Averages<'a> {
    local: Option<&'a Metrics>,
    global: Option<&'a Metrics>,
}

#[derive(Debug, Serialize)]
struct LedgerSummary {
    model_bytes: u64,
    total_bytes_up: u64,
    total_bytes_down: u64,
    bytes_per_active_client_epoch: Option<u64>,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    final_epoch: Option<usize>,
    per_client: BTreeMap<usize, ClientSummary<'a>>,
    averages: Averages<'a>,
    ledger: LedgerSummary,
}

/// Final-epoch table: per-client local and global metrics, their averages,
/// and traffic totals. Undefined metrics are `null`.
pub fn summary_json(record: &RunRecord) -> String {
    let last = record.final_epoch();
    let per_client = record
        .shards
        .iter()
        .map(|s: &ShardReport| {
            let id = s.client_id;
            let summary = ClientSummary {
                n_k: s.shard.n_k,
                train: s.train,
                test: s.test,
                local: last.and_then(|e| e.local.get(&id)),
                global: last.and_then(|e| e.global.get(&id)),
            };
            (id, summary)
        })
        .collect();
    let summary = Summary {
        final_epoch: last.map(|e| e.epoch),
        per_client,
        averages: Averages {
            local: last.and_then(|e| e.local_mean.as_ref()),
            global: last.map(|e| &e.global_mean),
        },
        ledger: LedgerSummary {
            model_bytes: record.model_bytes,
            total_bytes_up: record.ledger.total_up(),
            total_bytes_down: record.ledger.total_down(),
            bytes_per_active_client_epoch: record.ledger.constant_traffic(),
        },
    };
    let mut out = serde_json::to_string_pretty(&summary).expect("summary serializes");
    out.push('\n');
    out
}

pub fn emit_summary(record: &RunRecord, path: &Path) -> Result<(), ReportError> {
    fs::write(path, summary_json(record)).map_err(io_err(path))
}

/// `global_accuracy`, `local_fpr`, ...
pub fn plot_metric_names() -> Vec<String> {
    SCOPES
        .iter()
        .flat_map(|s| METRIC_NAMES.iter().map(move |m| format!("{s}_{m}")))
        .collect()
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

struct Series {
    name: String,
    color: &'static str,
    dashed: bool,
    points: Vec<(usize, Option<f64>)>,
}

fn series_for(record: &RunRecord, scope: &str, metric: &str) -> Vec<Series> {
    let slot = usize::from(scope != "global");
    fn table(
        e: &EpochRecord,
        slot: usize,
    ) -> (&'static str, &BTreeMap<usize, Metrics>, Option<&Metrics>) {
        scope_tables(e)[slot]
    }
    let mut out: Vec<Series> = record
        .shards
        .iter()
        .enumerate()
        .map(|(i, s)| Series {
            name: format!("client {}", s.client_id),
            color: PALETTE[i % PALETTE.len()],
            dashed: false,
            points: record
                .epochs
                .iter()
                .map(|e| {
                    (
                        e.epoch,
                        table(e, slot)
                            .1
                            .get(&s.client_id)
                            .and_then(|m| m.get(metric)),
                    )
                })
                .collect(),
        })
        .collect();
    out.push(Series {
        name: "average".into(),
        color: "#000000",
        dashed: true,
        points: record
            .epochs
            .iter()
            .map(|e| (e.epoch, table(e, slot).2.and_then(|m| m.get(metric))))
            .collect(),
    });
    out
}

/// Deterministic SVG line chart of one `scope_metric` over global epochs:
/// one series per client plus the average. Gaps (inactive or undefined)
/// break the line.
pub fn render_plot(record: &RunRecord, metric: &str) -> Result<String, ReportError> {
    let valid = plot_metric_names();
    let Some((scope, name)) = metric
        .split_once('_')
        .filter(|_| valid.iter().any(|v| v == metric))
    else {
        return Err(ReportError::UnknownMetric {
            name: metric.into(),
            valid,
        });
    };
    let series = series_for(record, scope, name);
    let max_epoch = record.epochs.last().map_or(0, |e| e.epoch).max(1) as f64;
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x = |epoch: usize| LEFT + plot_w * epoch as f64 / max_epoch;
    let y = |v: f64| TOP + plot_h * (1.0 - v.clamp(0.0, 1.0));

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r##"<rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{metric}</text>"#,
        LEFT + plot_w / 2.0
    );

    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="#e0e0e0"/><text x="{:.2}" y="{:.2}" text-anchor="end">{v:.1}</text>"##,
            LEFT + plot_w,
            LEFT - 6.0,
            y(v) + 4.0,
            yy = y(v)
        );
    }
    let step = (max_epoch as usize).div_ceil(10).max(1);
    for epoch in (0..=max_epoch as usize).step_by(step) {
        let _ = writeln!(
            s,
            r##"<line x1="{xx:.2}" y1="{:.2}" x2="{xx:.2}" y2="{:.2}" stroke="#000000"/><text x="{xx:.2}" y="{:.2}" text-anchor="middle">{epoch}</text>"##,
            TOP + plot_h,
            TOP + plot_h + 5.0,
            TOP + plot_h + 18.0,
            xx = x(epoch)
        );
    }
    let _ = writeln!(
        s,
        r##"<path d="M{LEFT},{TOP} V{:.2} H{:.2}" fill="none" stroke="#000000"/>"##,
        TOP + plot_h,
        LEFT + plot_w
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">global epoch</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 12.0
    );

    for (i, ser) in series.iter().enumerate() {
        let dash = if ser.dashed {
            r#" stroke-dasharray="6 3""#
        } else {
            ""
        };
        let _ = writeln!(s, r#"<g stroke="{c}" fill="{c}">"#, c = ser.color);
        for run in ser
            .points
            .split(|(_, v)| v.is_none())
            .filter(|r| r.len() > 1)
        {
            let pts: Vec<String> = run
                .iter()
                .map(|&(e, v)| format!("{:.2},{:.2}", x(e), y(v.expect("split on None"))))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke-width="1.5"{dash}/>"#,
                pts.join(" ")
            );
        }
        for &(e, v) in &ser.points {
            if let Some(v) = v {
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5"/>"#, x(e), y(v));
            }
        }
        let ly = TOP + 16.0 * i as f64;
        let lx = WIDTH - RIGHT + 16.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke-width="2"{dash}/>"#,
            lx + 20.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" stroke="none">{}</text>"#,
            lx + 26.0,
            ly + 4.0,
            ser.name
        );
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_plot(record: &RunRecord, metric: &str, path: &Path) -> Result<(), ReportError> {
    let svg = render_plot(record, metric)?;
    fs::write(path, svg).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_value(0.5), "0.5");
        assert_eq!(format_value(1.0), "1");
        assert_eq!(format_value(2.0 / 3.0), "0.666666667");
        assert_eq!(format_value(0.961834512345), "0.961834512");
        assert_eq!(format_value(1e-7 / 3.0), "0.0000000333333333");
    }

    #[test]
    fn metric_names() {
        let names = plot_metric_names();
        assert_eq!(names.len(), 12);
        assert!(names.contains(&"global_accuracy".to_string()));
        assert!(names.contains(&"local_fnr".to_string()));
    }
}
