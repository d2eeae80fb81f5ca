//! Human-readable summary of a manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::accept::Criterion;
use crate::app::Outcome;
use crate::error::{io_err, CliError, Result};
use crate::output::{manifest_path, sha256_hex, JobOutput, Manifest};

struct Group {
    json: Option<Vec<u8>>,
    csv: Option<Vec<u8>>,
}

fn csv_flags(bytes: &[u8]) -> Result<Vec<String>> {
    let mut rd = csv::Reader::from_reader(bytes);
    let headers = rd.headers().map_err(|e| CliError::Manifest(e.to_string()))?.clone();
    let Some(fi) = headers.iter().position(|h| h == "flagged") else {
        return Ok(Vec::new());
    };
    let ti = headers.iter().position(|h| h == "t");
    let ni = headers.iter().position(|h| h == "n");
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| CliError::Manifest(e.to_string()))?;
        if rec.get(fi) == Some("true") {
            let mut s = String::new();
            if let Some(n) = ni.and_then(|i| rec.get(i)) {
                let _ = write!(s, "n={n}: ");
            }
            let _ = write!(s, "t={}", ti.and_then(|i| rec.get(i)).unwrap_or("?"));
            out.push(s);
        }
    }
    Ok(out)
}

/// Summary text and outcome. Missing or altered files are errors.
pub fn summarize(path: &Path) -> Result<(String, Outcome)> {
    let mpath = manifest_path(path);
    let manifest = Manifest::load(&mpath)?;
    let dir = mpath.parent().unwrap_or(Path::new("."));
    let mut text = String::new();
    if manifest.entries.is_empty() {
        text.push_str("no runs\n");
        return Ok((text, Outcome::Clean));
    }
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Group> = BTreeMap::new();
    for e in &manifest.entries {
        let p = dir.join(&e.file);
        if !p.is_file() {
            return Err(CliError::Manifest(format!("missing file {}", p.display())));
        }
        let bytes = std::fs::read(&p).map_err(io_err(&p))?;
        if sha256_hex(&bytes) != e.sha256 {
            return Err(CliError::Manifest(format!("{} does not match its recorded hash", p.display())));
        }
        let (stem, ext) = e.file.rsplit_once('.').unwrap_or((e.file.as_str(), ""));
        if !groups.contains_key(stem) {
            order.push(stem.to_string());
        }
        let g = groups.entry(stem.to_string()).or_insert(Group { json: None, csv: None });
        match ext {
            "json" => g.json = Some(bytes),
            _ => g.csv = Some(bytes),
        }
    }
    let mut outcome = Outcome::Clean;
    for stem in &order {
        let g = &groups[stem];
        let (flags, numbers, criteria) = match &g.json {
            Some(bytes) => {
                let out: JobOutput = serde_json::from_slice(bytes)
                    .map_err(|e| CliError::Manifest(format!("{stem}.json is not a job output: {e}")))?;
                let numbers: Vec<String> = out.summary.iter().map(|(k, v)| format!("{k}={v}")).collect();
                let criteria: Vec<Criterion> =
                    if out.kind == "accept" { serde_json::from_value(out.result.clone())? } else { Vec::new() };
                (out.flags, numbers.join(" "), criteria)
            }
            None => (csv_flags(g.csv.as_deref().unwrap_or_default())?, "(csv only)".to_string(), Vec::new()),
        };
        let status = if flags.is_empty() { "PASS" } else { "FLAG" };
        let _ = writeln!(text, "{stem:<36} {status}  {numbers}");
        if !flags.is_empty() {
            outcome = Outcome::Flagged;
            let _ = writeln!(text, "    flagged: {}", flags.join(", "));
        }
        for c in &criteria {
            let _ = writeln!(text, "    {}", c.line());
        }
    }
    Ok((text, outcome))
}
