//! Report writers. JSON numbers use 17 significant digits and non-finite
//! values become `null`; timings are left out so output is reproducible.

use std::fmt::Write;

use super::run::RunResult;

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "null".into()
    }
}

fn string(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialise")
}

fn object<'a>(out: &mut String, indent: &str, entries: impl Iterator<Item = (&'a str, String)>) {
    let entries: Vec<_> = entries.collect();
    if entries.is_empty() {
        out.push_str("{}");
        return;
    }
    out.push_str("{\n");
    for (i, (k, v)) in entries.iter().enumerate() {
        let comma = if i + 1 < entries.len() { "," } else { "" };
        let _ = writeln!(out, "{indent}  {}: {v}{comma}", string(k));
    }
    let _ = write!(out, "{indent}}}");
}

/// Schema: `{scenario, version, overall, tolerances, tasks: [{task, kind,
/// expect, status, check_status, metrics, tolerances, notes}]}`.
pub fn emit_json(result: &RunResult) -> String {
    let mut out = String::from("{\n");
    let _ = writeln!(out, "  \"scenario\": {},", string(&result.scenario));
    let _ = writeln!(out, "  \"version\": {},", string(result.version));
    let _ = writeln!(
        out,
        "  \"overall\": {},",
        string(&result.overall().to_string())
    );
    out.push_str("  \"tolerances\": ");
    object(
        &mut out,
        "  ",
        result.tolerances.iter().map(|(k, v)| (k, num(v))),
    );
    out.push_str(",\n  \"tasks\": [");
    for (i, t) in result.tasks.iter().enumerate() {
        out.push_str(if i == 0 { "\n" } else { ",\n" });
        out.push_str("    {\n");
        let _ = writeln!(out, "      \"task\": {},", string(&t.label));
        let _ = writeln!(out, "      \"kind\": {},", string(t.kind));
        let _ = writeln!(out, "      \"expect\": {},", string(t.expect.as_str()));
        let _ = writeln!(out, "      \"status\": {},", string(&t.status.to_string()));
        let _ = writeln!(
            out,
            "      \"check_status\": {},",
            string(&t.report.status.to_string())
        );
        out.push_str("      \"metrics\": ");
        object(
            &mut out,
            "      ",
            t.report.metrics.iter().map(|(k, v)| (k.as_str(), num(*v))),
        );
        out.push_str(",\n      \"tolerances\": ");
        object(
            &mut out,
            "      ",
            t.report
                .tolerances
                .iter()
                .map(|(k, v)| (k.as_str(), num(*v))),
        );
        out.push_str(",\n      \"notes\": [");
        for (j, n) in t.report.notes.iter().enumerate() {
            let sep = if j == 0 { "" } else { ", " };
            let _ = write!(out, "{sep}{}", string(n));
        }
        out.push_str("]\n    }");
    }
    if !result.tasks.is_empty() {
        out.push_str("\n  ");
    }
    out.push_str("]\n}\n");
    out
}

/// One header line per task followed by one line per metric.
pub fn emit_text(result: &RunResult) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "scenario {} (spencerkit {})",
        result.scenario, result.version
    );
    for t in &result.tasks {
        let _ = writeln!(
            out,
            "[{}] {} ({}, expect {}, check {}, {:.3} s)",
            t.status,
            t.label,
            t.kind,
            t.expect.as_str(),
            t.report.status,
            t.elapsed.as_secs_f64()
        );
        for (k, v) in &t.report.metrics {
            let _ = writeln!(out, "    {k} = {v:.16e}");
        }
        for (k, v) in &t.report.tolerances {
            let _ = writeln!(out, "    tolerance {k} = {v:.16e}");
        }
        for n in &t.report.notes {
            let _ = writeln!(out, "    note: {n}");
        }
    }
    let _ = writeln!(out, "overall: {}", result.overall());
    out
}
