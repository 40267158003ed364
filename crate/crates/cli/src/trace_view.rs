//! Human-readable rendering of trace files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use graphcheck::trace::{read_trace, trace_file_name, Stage, TraceEvent};
use serde_json::Value;

use crate::usage;

fn trace_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    Ok(files)
}

fn available_ids(files: &[PathBuf]) -> Vec<String> {
    files
        .iter()
        .filter_map(|f| read_trace(f).ok().map(|(h, _)| h.claim_id))
        .collect()
}

/// Picks the trace file for `claim_id` from a file or directory argument.
fn locate(path: &Path, claim_id: Option<&str>) -> Result<PathBuf> {
    if path.is_dir() {
        let files = trace_files(path)?;
        let Some(id) = claim_id else {
            return match files.as_slice() {
                [one] => Ok(one.clone()),
                _ => Err(usage(format!(
                    "{} holds {} traces; pass --claim-id (available: {})",
                    path.display(),
                    files.len(),
                    available_ids(&files).join(", ")
                ))),
            };
        };
        let candidate = path.join(trace_file_name(id));
        if candidate.is_file() {
            return Ok(candidate);
        }
        for f in &files {
            if read_trace(f).is_ok_and(|(h, _)| h.claim_id == id) {
                return Ok(f.clone());
            }
        }
        return Err(usage(format!(
            "no trace for claim id {id:?}; available: {}",
            available_ids(&files).join(", ")
        )));
    }
    if !path.exists() {
        bail!("{} does not exist", path.display());
    }
    if let Some(id) = claim_id {
        let (header, _) = read_trace(path)?;
        if header.claim_id != id {
            return Err(usage(format!(
                "no trace for claim id {id:?}; available: {}",
                header.claim_id
            )));
        }
    }
    Ok(path.to_path_buf())
}

pub fn show(path: &Path, claim_id: Option<&str>, json: bool) -> Result<String> {
    let file = locate(path, claim_id)?;
    if json {
        let raw = fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
        let mut out = String::new();
        for line in raw.lines().skip(1).filter(|l| !l.trim().is_empty()) {
            out.push_str(line);
            out.push('\n');
        }
        return Ok(out);
    }
    let (header, events) = read_trace(&file)?;
    let mut out = format!("Claim {}: {}\n", header.claim_id, header.claim);
    for e in &events {
        out.push_str(&render(e));
    }
    Ok(out)
}

fn s<'a>(p: &'a Value, key: &str) -> &'a str {
    p.get(key).and_then(Value::as_str).unwrap_or("")
}

fn ids(v: Option<&Value>) -> String {
    match v.and_then(Value::as_array) {
        Some(a) => a.iter().map(|x| x.to_string().trim_matches('"').to_string()).collect::<Vec<_>>().join(", "),
        None => String::new(),
    }
}

fn entity(v: &Value) -> String {
    if let Some(n) = v.get("named").and_then(Value::as_str) {
        n.to_string()
    } else if let Some(p) = v.get("placeholder") {
        format!("X_{p}")
    } else {
        v.to_string()
    }
}

/// Backend calls that failed to parse get a trailing error note.
fn call_suffix(p: &Value) -> String {
    let mut out = String::new();
    if let Some(a) = p.get("attempt").and_then(Value::as_u64).filter(|a| *a > 0) {
        out.push_str(&format!(" (retry {a})"));
    }
    if let Some(err) = p.get("error").and_then(Value::as_str) {
        out.push_str(&format!(" [error: {err}]"));
    }
    out
}

fn render(e: &TraceEvent) -> String {
    let p = &e.payload;
    let indent = if p.get("iteration").is_some() || p.get("triplet_id").is_some() { "    " } else { "  " };
    let body = match e.stage {
        Stage::Extract => match p.get("graph").and_then(|g| g.get("triplets")).and_then(Value::as_array) {
            Some(ts) => {
                let mut s = format!("Extract: {} triplets", ts.len());
                for t in ts {
                    s.push_str(&format!(
                        "\n{indent}  [{}] {} || {} || {}",
                        t["id"],
                        entity(&t["head"]),
                        t["relation"].as_str().unwrap_or(""),
                        entity(&t["tail"])
                    ));
                }
                s
            }
            None => format!("Extract{}", call_suffix(p)),
        },
        Stage::Group => {
            let groups: Vec<String> = p["groups"]
                .as_array()
                .map(|gs| {
                    gs.iter()
                        .map(|g| format!("X_{} -> [{}]", g["placeholder"], ids(g.get("triplet_ids"))))
                        .collect()
                })
                .unwrap_or_default();
            return format!("  Iteration {}: {}\n", p["iteration"], groups.join("; "));
        }
        Stage::Question => match p.get("proposal") {
            Some(q) => format!(
                "Question for X_{} ({}): {} [triplets {}]\n{indent}  rationale: {}",
                p["placeholder"],
                s(p, "role"),
                s(q, "question"),
                ids(q.get("triplet_ids")),
                s(q, "rationale")
            ),
            None => format!("Question for X_{} ({}){}", p["placeholder"], s(p, "role"), call_suffix(p)),
        },
        Stage::Retrieve => match p.get("error") {
            Some(err) => format!("Retrieve ({}): {} [error: {}]", s(p, "purpose"), s(p, "query"), err),
            None => {
                let mut line = format!(
                    "Retrieve ({}): {} -> [{}]",
                    s(p, "purpose"),
                    s(p, "query"),
                    ids(p.get("doc_ids"))
                );
                if p["truncated"].as_bool() == Some(true) {
                    line.push_str(" (truncated)");
                }
                line
            }
        },
        Stage::IdentifyEntity => match p.get("answer") {
            Some(a) => {
                let answer = a.get("found").and_then(Value::as_str).map_or("not found".to_string(), |f| f.to_string());
                format!("Answer for X_{}: {answer}", p["placeholder"])
            }
            None => format!("Answer for X_{}{}", p["placeholder"], call_suffix(p)),
        },
        Stage::GraphUpdate => format!(
            "Resolved X_{} = {} (verified [{}])",
            p["placeholder"],
            s(p, "entity"),
            ids(p.get("verified_ids"))
        ),
        Stage::SubclaimGen => {
            let fallback = if p["fallback"].as_bool() == Some(true) { " (template fallback)" } else { "" };
            match p.get("subclaim").and_then(Value::as_str) {
                Some(sc) => format!("Sub-claim [{}]: {sc}{fallback}", p["triplet_id"]),
                None => format!("Sub-claim [{}]{}", p["triplet_id"], call_suffix(p)),
            }
        }
        Stage::SubclaimVerify => match p.get("supported").and_then(Value::as_bool) {
            Some(b) => format!(
                "Check [{}]: {}",
                p["triplet_id"],
                if b { "supported" } else { "not supported" }
            ),
            None => format!("Check [{}]{}", p["triplet_id"], call_suffix(p)),
        },
        Stage::Verdict => {
            let mut line = String::new();
            if let Some(class) = p.get("error_class").and_then(Value::as_str) {
                line.push_str(&format!("Error ({class}): {}\n", s(p, "error")));
            }
            line.push_str(&format!("Verdict: {}\n", s(p, "verdict")));
            return line;
        }
    };
    format!("{indent}{body}\n")
}
