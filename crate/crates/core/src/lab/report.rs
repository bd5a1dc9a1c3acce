use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::{flag_non_monotone, leave_one_out, FitResult, LifespanRecord, RunStatus, Source};

pub const HEADER: &str = "epsilon,T,status,source,dim,p";

/// Free-form `key = value` metadata for the summary block, in given order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportMeta {
    pub entries: Vec<(String, String)>,
}

impl ReportMeta {
    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }
}

/// Summary file written next to a report: `<path>.summary.txt`.
pub fn summary_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".summary.txt");
    PathBuf::from(name)
}

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

/// CSV text and summary block. Floats use the shortest round-trip form, so
/// identical inputs render to identical bytes.
pub fn render_report(records: &[LifespanRecord], fits: &[FitResult], meta: &ReportMeta) -> (String, String) {
    let mut csv = String::from(HEADER);
    csv.push('\n');
    for r in records {
        let t = r.t.map(|t| t.to_string()).unwrap_or_default();
        let dim = r.dim.map(|d| d.to_string()).unwrap_or_default();
        let _ = writeln!(csv, "{},{t},{},{},{dim},{}", r.epsilon, r.status, r.source, r.p);
    }

    let mut summary = String::from("[records]\n");
    let count = |s: RunStatus| records.iter().filter(|r| r.status == s).count();
    let _ = writeln!(summary, "total = {}", records.len());
    let _ = writeln!(summary, "blew_up = {}", count(RunStatus::BlewUp));
    let _ = writeln!(summary, "survived = {}", count(RunStatus::Survived));
    let _ = writeln!(summary, "failed = {}", count(RunStatus::Failed));
    let flagged: Vec<f64> = records.iter().filter(|r| r.non_monotone).map(|r| r.epsilon).collect();
    let _ = writeln!(summary, "non_monotone = {}", join(&flagged));
    if let Some(refine) = records.first().map(|r| r.refine) {
        let _ = writeln!(summary, "refine = {refine}");
    }
    for r in records.iter().filter(|r| r.error.is_some()) {
        let _ = writeln!(summary, "error[{}] = {}", r.epsilon, r.error.as_deref().unwrap_or_default());
    }
    if !meta.entries.is_empty() {
        summary.push_str("\n[settings]\n");
        for (k, v) in &meta.entries {
            let _ = writeln!(summary, "{k} = {v}");
        }
    }
    for fit in fits {
        let _ = write!(summary, "\n[fit]\nlaw = {}\n", fit.law);
        let _ = writeln!(summary, "slope = {}", fit.slope);
        let _ = writeln!(summary, "offset = {}", fit.offset);
        let _ = writeln!(summary, "exponent = {}", fit.exponent);
        if let Some(target) = fit.target_exponent {
            let _ = writeln!(summary, "target_exponent = {target}");
            let _ = writeln!(summary, "prefactor = {}", fit.prefactor());
        }
        let _ = writeln!(summary, "r_squared = {}", fit.r_squared);
        let _ = writeln!(summary, "epsilons = {}", join(&fit.epsilons));
        let _ = writeln!(summary, "residuals = {}", join(&fit.residuals));
        if let Ok(changes) = leave_one_out(records, fit.law) {
            let _ = writeln!(summary, "leave_one_out = {}", join(&changes));
        }
    }
    (csv, summary)
}

/// Writes the CSV to `path` and the summary to [`summary_path`].
pub fn emit_report(records: &[LifespanRecord], fits: &[FitResult], meta: &ReportMeta, path: &Path) -> Result<()> {
    let (csv, summary) = render_report(records, fits, meta);
    std::fs::write(path, csv).map_err(|e| Error::io(path, e))?;
    let side = summary_path(path);
    std::fs::write(&side, summary).map_err(|e| Error::io(side, e))
}

/// Reads records back from report CSV text. Refinement metadata is not part
/// of the CSV and comes back as level 0; monotonicity flags are recomputed.
pub fn read_records(text: &str) -> Result<Vec<LifespanRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                reason: format!("expected header `{HEADER}`"),
            })
        }
    }
    let mut records = Vec::new();
    for (index, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let err = |reason: String| Error::Parse { line: index + 1, reason };
        let fields: Vec<&str> = line.split(',').collect();
        let [eps, t, status, source, dim, p] = fields[..] else {
            return Err(err(format!("expected 6 fields, got {}", fields.len())));
        };
        let num = |s: &str| s.parse::<f64>().map_err(|_| err(format!("bad number `{s}`")));
        let t = if t.is_empty() { None } else { Some(num(t)?) };
        let dim = if dim.is_empty() {
            None
        } else {
            Some(dim.parse::<usize>().map_err(|_| err(format!("bad dimension `{dim}`")))?)
        };
        records.push(LifespanRecord {
            epsilon: num(eps)?,
            t,
            status: status.parse::<RunStatus>().map_err(|e| err(e.to_string()))?,
            source: source.parse::<Source>().map_err(|e| err(e.to_string()))?,
            dim,
            p: num(p)?,
            refine: 0,
            non_monotone: false,
            steps: 0,
            error: None,
        });
    }
    records.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
    flag_non_monotone(&mut records);
    Ok(records)
}
