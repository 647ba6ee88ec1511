//! Result tables: one CSV row per run, and the scatter export for plotting.
//!
//! Column order of a results CSV:
//!
//! | column | meaning |
//! |---|---|
//! | `q`, `to`, `nd` | design coordinates (`q`/`to` empty when not set) |
//! | `replication`, `seed` | replication index and the seed it ran with |
//! | `status` | `ok` or `error` |
//! | `al`, `al_ci` | average latency (s) and 95% half-width |
//! | `ap_per_server`, `ap_total`, `ap_ci` | average power (W); CI is per server |
//! | `requests_completed`, `virtual_time` | run size |
//! | `frac_on` .. `frac_wakeup` | cluster-mean share of time per state |
//! | `assignments` | per-server request counts joined by `;` |
//! | `error` | message for failed rows |

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::engine::TraceRow;
use crate::error::{Error, Result};
use crate::metrics::RunResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub q: Option<f64>,
    pub to: Option<f64>,
    pub nd: String,
    pub replication: usize,
    pub seed: u64,
    pub status: String,
    pub al: Option<f64>,
    pub al_ci: Option<f64>,
    pub ap_per_server: Option<f64>,
    pub ap_total: Option<f64>,
    pub ap_ci: Option<f64>,
    pub requests_completed: Option<usize>,
    pub virtual_time: Option<f64>,
    pub frac_on: Option<f64>,
    pub frac_suspend: Option<f64>,
    pub frac_sleep: Option<f64>,
    pub frac_wakeup: Option<f64>,
    pub assignments: String,
    pub error: String,
}

pub const COLUMNS: [&str; 19] = [
    "q",
    "to",
    "nd",
    "replication",
    "seed",
    "status",
    "al",
    "al_ci",
    "ap_per_server",
    "ap_total",
    "ap_ci",
    "requests_completed",
    "virtual_time",
    "frac_on",
    "frac_suspend",
    "frac_sleep",
    "frac_wakeup",
    "assignments",
    "error",
];

/// Design coordinates and run identity for one row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowKey {
    pub q: Option<f64>,
    pub to: Option<f64>,
    pub nd: String,
    pub replication: usize,
    pub seed: u64,
}

impl ResultRow {
    pub fn ok(key: RowKey, r: &RunResult) -> Self {
        let f = r.mean_fractions();
        ResultRow {
            q: key.q,
            to: key.to,
            nd: key.nd,
            replication: key.replication,
            seed: key.seed,
            status: "ok".into(),
            al: r.avg_latency_s,
            al_ci: r.latency_ci_halfwidth,
            ap_per_server: Some(r.avg_power_per_server_w),
            ap_total: Some(r.total_power_w),
            ap_ci: r.power_ci_halfwidth,
            requests_completed: Some(r.requests_completed),
            virtual_time: Some(r.virtual_time_simulated),
            frac_on: Some(f.on),
            frac_suspend: Some(f.suspend),
            frac_sleep: Some(f.sleep),
            frac_wakeup: Some(f.wakeup),
            assignments: r
                .assignments
                .iter()
                .map(|a| a.to_string())
                .collect::<Vec<_>>()
                .join(";"),
            error: String::new(),
        }
    }

    pub fn failed(key: RowKey, message: &str) -> Self {
        ResultRow {
            q: key.q,
            to: key.to,
            nd: key.nd,
            replication: key.replication,
            seed: key.seed,
            status: "error".into(),
            al: None,
            al_ci: None,
            ap_per_server: None,
            ap_total: None,
            ap_ci: None,
            requests_completed: None,
            virtual_time: None,
            frac_on: None,
            frac_suspend: None,
            frac_sleep: None,
            frac_wakeup: None,
            assignments: String::new(),
            error: message.replace(['\n', '\r'], " "),
        }
    }
}

pub fn write_rows<W: Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(COLUMNS)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    if let Some(missing) = COLUMNS.iter().find(|c| !headers.iter().any(|h| h == **c)) {
        return Err(Error::Config(format!(
            "results table is missing column `{missing}`"
        )));
    }
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupBy {
    Q,
    Timeout,
}

impl std::str::FromStr for GroupBy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "q" => Ok(GroupBy::Q),
            "to" | "TO" | "timeout" => Ok(GroupBy::Timeout),
            other => Err(Error::Config(format!(
                "cannot group by `{other}` (expected q or to)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotPoint {
    pub ap_total: f64,
    pub al: f64,
    pub group: String,
    pub q: String,
    pub to: String,
    pub nd: String,
}

fn label(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One point per design (replications averaged): total power against
/// latency, labelled by the grouping coordinate.
pub fn plot_points(rows: &[ResultRow], group_by: GroupBy) -> Vec<PlotPoint> {
    type Key = (Option<u64>, Option<u64>, String);
    type Sums = (Option<f64>, Option<f64>, f64, f64, usize);
    let mut acc: BTreeMap<Key, Sums> = BTreeMap::new();
    let mut order: Vec<Key> = Vec::new();
    for r in rows.iter().filter(|r| r.status == "ok") {
        let (Some(al), Some(ap)) = (r.al, r.ap_total) else {
            continue;
        };
        let key = (r.q.map(f64::to_bits), r.to.map(f64::to_bits), r.nd.clone());
        let e = acc.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            (r.q, r.to, 0.0, 0.0, 0)
        });
        e.2 += ap;
        e.3 += al;
        e.4 += 1;
    }
    order
        .into_iter()
        .map(|k| {
            let (q, to, ap, al, n) = acc[&k];
            PlotPoint {
                ap_total: ap / n as f64,
                al: al / n as f64,
                group: match group_by {
                    GroupBy::Q => label(q),
                    GroupBy::Timeout => label(to),
                },
                q: label(q),
                to: label(to),
                nd: k.2,
            }
        })
        .collect()
}

pub fn write_plot_points<W: Write>(out: W, points: &[PlotPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if points.is_empty() {
        w.write_record(["ap_total", "al", "group", "q", "to", "nd"])?;
    }
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

/// Trace CSV: `time,server,event,power_state,queue_size`.
pub fn write_trace<W: Write>(out: W, trace: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if trace.is_empty() {
        w.write_record(["time", "server", "event", "power_state", "queue_size"])?;
    }
    for t in trace {
        w.serialize(t)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(q: f64, to: f64, rep: usize, al: f64, ap: f64) -> ResultRow {
        let mut r = ResultRow::failed(
            RowKey {
                q: Some(q),
                to: Some(to),
                nd: "random".into(),
                replication: rep,
                seed: 1,
            },
            "",
        );
        r.status = "ok".into();
        r.al = Some(al);
        r.ap_total = Some(ap);
        r
    }

    #[test]
    fn csv_round_trip_keeps_options_and_infinity() {
        let mut rows = vec![
            row(5.0, 10.0, 0, 2.5, 400.0),
            row(1.0, f64::INFINITY, 1, 1.0, 800.0),
        ];
        rows.push(ResultRow::failed(
            RowKey {
                q: None,
                to: None,
                nd: "fixed_order".into(),
                replication: 0,
                seed: 3,
            },
            "division by zero\nat request 4",
        ));
        let mut buf = Vec::new();
        write_rows(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(&COLUMNS.join(",")));
        let back = read_rows(&buf[..]).unwrap();
        assert_eq!(back[..2], rows[..2]);
        assert_eq!(back[2].error, "division by zero at request 4");
    }

    #[test]
    fn empty_table_has_header() {
        let mut buf = Vec::new();
        write_rows(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim(), COLUMNS.join(","));
        let mut buf = Vec::new();
        write_plot_points(&mut buf, &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap().trim(),
            "ap_total,al,group,q,to,nd"
        );
    }

    #[test]
    fn missing_column_is_reported() {
        let err = read_rows("q,to\n1,2\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("`nd`"), "{err}");
    }

    #[test]
    fn plot_points_average_replications() {
        let rows = vec![
            row(5.0, 10.0, 0, 2.0, 400.0),
            row(5.0, 10.0, 1, 4.0, 600.0),
            row(1.0, 10.0, 0, 1.0, 800.0),
        ];
        let pts = plot_points(&rows, GroupBy::Q);
        assert_eq!(pts.len(), 2);
        assert_eq!(
            (pts[0].ap_total, pts[0].al, pts[0].group.as_str()),
            (500.0, 3.0, "5")
        );
        let pts = plot_points(&rows, GroupBy::Timeout);
        assert!(pts.iter().all(|p| p.group == "10"));
    }
}
