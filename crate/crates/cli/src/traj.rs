//! Plain-text trajectory tables for side-by-side comparison with external
//! encounter files.
//!
//! Layout: comment lines start with `#`. Each aircraft gets a block that
//! opens with `aircraft <id>`, followed by one whitespace-separated row per
//! sample: `t_s x_nm y_nm z_ft psi_deg theta_deg`. Blocks are separated by a
//! blank line and appear in order of first appearance in the log. Numbers
//! are written in shortest round-trip form.

use std::fmt::Write;

use airspace_sim::engine::LogRecord;

pub const COLUMNS: &str = "# columns: t_s x_nm y_nm z_ft psi_deg theta_deg";

#[derive(Debug, thiserror::Error)]
pub enum TrajError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Parses a JSON-lines trajectory log. Comment and blank lines are skipped;
/// the first `# airsim` header line, if any, is returned alongside.
pub fn read_log(text: &str) -> Result<(Option<String>, Vec<LogRecord>), TrajError> {
    let mut header = None;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if t.starts_with('#') {
            if header.is_none() && t.starts_with("# airsim") {
                header = Some(t.to_string());
            }
            continue;
        }
        let rec = serde_json::from_str(t).map_err(|e| TrajError::Parse { line: i + 1, message: e.to_string() })?;
        out.push(rec);
    }
    Ok((header, out))
}

pub fn export_paper_compare(header: &str, log: &[LogRecord]) -> String {
    let mut ids: Vec<&str> = Vec::new();
    for r in log {
        if !ids.contains(&r.id.as_str()) {
            ids.push(&r.id);
        }
    }
    let mut s = String::new();
    s.push_str(header.trim_end());
    s.push('\n');
    s.push_str(COLUMNS);
    s.push('\n');
    for id in ids {
        let _ = writeln!(s, "\naircraft {id}");
        for r in log.iter().filter(|r| r.id == id) {
            let _ = writeln!(s, "{} {} {} {} {} {}", r.t, r.x, r.y, r.z, r.psi, r.theta);
        }
    }
    s
}

/// Reads a table back into log records. Actions and levels are not part of
/// the table and come back empty.
pub fn import_paper_compare(text: &str) -> Result<Vec<LogRecord>, TrajError> {
    let mut out = Vec::new();
    let mut current: Option<String> = None;
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if let Some(id) = t.strip_prefix("aircraft ") {
            current = Some(id.to_string());
            continue;
        }
        let err = |message: String| TrajError::Parse { line: i + 1, message };
        let id = current.clone().ok_or_else(|| err("sample row before any aircraft block".into()))?;
        let v = t.split_whitespace().map(|f| f.parse::<f64>().map_err(|e| err(format!("{f}: {e}")))).collect::<Result<Vec<_>, _>>()?;
        if v.len() != 6 {
            return Err(err(format!("expected 6 columns, found {}", v.len())));
        }
        out.push(LogRecord { t: v[0], id, x: v[1], y: v[2], z: v[3], psi: v[4], theta: v[5], action: None, level: None });
    }
    Ok(out)
}
