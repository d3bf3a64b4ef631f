//! Evaluation report rendering: a text table and a CSV file.

use std::fmt::Write;

use vosprop_core::metrics::EvalReport;

/// Per-frame J and F followed by mean, recall and decay.
pub fn table(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "sequence {}", report.name);
    let _ = writeln!(out, "{:>7}  {:>6}  {:>6}", "frame", "J", "F");
    for (i, (j, f)) in report.j.iter().zip(&report.f).enumerate() {
        let _ = writeln!(out, "{i:>7}  {j:>6.4}  {f:>6.4}");
    }
    let (js, fs) = (&report.j_summary, &report.f_summary);
    let _ = writeln!(out, "{:>7}  {:>6.4}  {:>6.4}", "mean", js.mean, fs.mean);
    let _ = writeln!(
        out,
        "{:>7}  {:>6.4}  {:>6.4}",
        "recall", js.recall, fs.recall
    );
    let _ = writeln!(out, "{:>7}  {:>6.4}  {:>6.4}", "decay", js.decay, fs.decay);
    out
}

/// `frame,J,F,J_recall,J_decay,F_recall,F_decay`: one row per frame, then a
/// `summary` row holding the means in the J and F columns.
pub fn csv(report: &EvalReport) -> String {
    let mut out = String::from("frame,J,F,J_recall,J_decay,F_recall,F_decay\n");
    for (i, (j, f)) in report.j.iter().zip(&report.f).enumerate() {
        let _ = writeln!(out, "{i},{j},{f},,,,");
    }
    let (js, fs) = (&report.j_summary, &report.f_summary);
    let _ = writeln!(
        out,
        "summary,{},{},{},{},{},{}",
        js.mean, fs.mean, js.recall, js.decay, fs.recall, fs.decay
    );
    out
}
