//! The nine acceptance criteria at full size. Prints one PASS/FAIL line per
//! criterion and fails if any criterion fails.

use std::time::{Duration, Instant};

use hua_lab::suite::*;

struct Line {
    id: u8,
    pass: bool,
    text: String,
}

fn judge(report: &CriterionReport, elapsed: Duration, budget: Option<Duration>) -> Line {
    let in_time = budget.is_none_or(|b| elapsed <= b);
    let worst = report.worst().map(|c| format!("worst {} = {:.3e} (limit {:.1e})", c.name, c.value, c.threshold)).unwrap_or_default();
    let timing = match budget {
        Some(b) => format!("{:.1}s of {:.0}s budget", elapsed.as_secs_f64(), b.as_secs_f64()),
        None => format!("{:.1}s", elapsed.as_secs_f64()),
    };
    let failed: Vec<&str> = report.cells.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    let reruns = report.cells.iter().filter(|c| c.rerun).count();
    let mut text = format!("{}; {} cells, {reruns} rerun; {timing}; {worst}", report.title, report.cells.len());
    if !failed.is_empty() {
        text.push_str(&format!("; failing: {}", failed.join(", ")));
    }
    if !in_time {
        text.push_str("; over time budget");
    }
    Line { id: report.id, pass: report.pass && in_time, text }
}

fn timed(f: impl FnOnce() -> CriterionReport) -> (CriterionReport, Duration) {
    let t = Instant::now();
    let r = f();
    (r, t.elapsed())
}

// Runs without the libtest harness so the per-criterion lines always print.
fn main() {
    let opts = SuiteOptions { profile: Profile::Full, ..SuiteOptions::default() };
    let mut lines = Vec::new();

    let (r, t) = timed(|| criterion_identities(&opts, 100));
    lines.push(judge(&r, t, Some(Duration::from_secs(30))));
    let (r, t) = timed(|| criterion_group_integrals(&opts));
    lines.push(judge(&r, t, Some(Duration::from_secs(600))));
    let (r, t) = timed(|| criterion_consistency(&opts));
    lines.push(judge(&r, t, None));
    let (r, t) = timed(|| criterion_pushforward(&opts));
    lines.push(judge(&r, t, None));
    let (r, t) = timed(|| criterion_ball_constant(&opts));
    lines.push(judge(&r, t, None));
    let (r, t) = timed(|| criterion_ball_integrals(&opts));
    lines.push(judge(&r, t, None));
    let (r, t) = timed(criterion_special_functions);
    lines.push(judge(&r, t, None));
    let (r, t) = timed(|| criterion_virtual(&opts));
    lines.push(judge(&r, t, None));

    // determinism: the cross-thread probe plus a whole quick suite run twice
    let (mut r, t) = timed(|| {
        let mut r = criterion_determinism(&opts);
        let quick = SuiteOptions::default();
        let same = run_suite(&quick).to_json() == run_suite(&quick).to_json();
        let cell = Cell::new("quick suite JSON identical on rerun", Metric::Residual, if same { 0.0 } else { 1.0 }, 0.5);
        r.pass &= cell.pass;
        r.cells.push(cell);
        r
    });
    r.pass = r.cells.iter().all(|c| c.pass);
    lines.push(judge(&r, t, None));

    println!();
    for l in &lines {
        println!("criterion {}: {} | {}", l.id, if l.pass { "PASS" } else { "FAIL" }, l.text);
    }
    let failed: Vec<u8> = lines.iter().filter(|l| !l.pass).map(|l| l.id).collect();
    if !failed.is_empty() {
        eprintln!("failing criteria: {failed:?}");
        std::process::exit(1);
    }
}
