//! Deviation and fitness reports.
//!
//! The deviations file is tab-separated with a header row:
//!
//! ```text
//! trace  event  timestamp  activity  object  kind  description
//! ```
//!
//! Non-proper termination records have no event; their timestamp column shows
//! the trace's last event timestamp prefixed with `after `. A footer of `#`
//! lines gives per-kind counts, `j`, `k` and fitness per trace and for the
//! whole log.

use std::io::{self, Write};

use crate::replay::{aggregate_fitness, DeviationKind, DeviationRecord, ReplayResult};

pub const DEVIATIONS_HEADER: &str = "trace\tevent\ttimestamp\tactivity\tobject\tkind\tdescription";

fn clean(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

fn deviation_row(d: &DeviationRecord, last_ts: Option<&str>) -> String {
    let event = d.event_seq.map(|s| s.to_string()).unwrap_or_default();
    let ts = match (&d.timestamp, d.event_seq, last_ts) {
        (Some(ts), _, _) => ts.clone(),
        (None, None, Some(last)) => format!("after {last}"),
        _ => String::new(),
    };
    [
        clean(&d.trace_id),
        event,
        clean(&ts),
        clean(d.activity.as_deref().unwrap_or("")),
        clean(&d.object_id),
        d.kind().code().to_owned(),
        clean(&d.description),
    ]
    .join("\t")
}

fn kind_counts<'a>(results: impl IntoIterator<Item = &'a ReplayResult>) -> [usize; 4] {
    let mut counts = [0; 4];
    for r in results {
        for (i, k) in DeviationKind::ALL.iter().enumerate() {
            counts[i] += r.count(*k);
        }
    }
    counts
}

fn counts_text(counts: [usize; 4]) -> String {
    DeviationKind::ALL
        .iter()
        .zip(counts)
        .map(|(k, n)| format!("{}={n}", k.code()))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn write_deviations(results: &[ReplayResult], mut out: impl Write) -> io::Result<()> {
    writeln!(out, "{DEVIATIONS_HEADER}")?;
    for r in results {
        for d in &r.deviations {
            writeln!(out, "{}", deviation_row(d, r.last_timestamp.as_deref()))?;
        }
    }
    for r in results {
        writeln!(
            out,
            "# trace {} {} j={} k={} fitness={:.4}",
            r.trace_id,
            counts_text(kind_counts([r])),
            r.counters.jumps,
            r.counters.transfers,
            r.fitness
        )?;
    }
    let (j, k): (u64, u64) = results.iter().fold((0, 0), |(j, k), r| {
        (j + r.counters.jumps, k + r.counters.transfers)
    });
    writeln!(
        out,
        "# total traces={} {} j={j} k={k} fitness={:.4}",
        results.len(),
        counts_text(kind_counts(results)),
        aggregate_fitness(results)
    )
}

/// Per-trace fitness as CSV.
pub fn write_fitness_csv(results: &[ReplayResult], mut out: impl Write) -> io::Result<()> {
    writeln!(out, "trace,events,objects,deviations,j,k,fitness")?;
    for r in results {
        writeln!(
            out,
            "{},{},{},{},{},{},{:.6}",
            r.trace_id,
            r.events,
            r.objects,
            r.deviations.len(),
            r.counters.jumps,
            r.counters.transfers,
            r.fitness
        )?;
    }
    Ok(())
}

/// One-paragraph human summary.
pub fn summary_text(results: &[ReplayResult]) -> String {
    let (j, k): (u64, u64) = results.iter().fold((0, 0), |(j, k), r| {
        (j + r.counters.jumps, k + r.counters.transfers)
    });
    format!(
        "traces: {}\ndeviations: {}\nj = {j}, k = {k}, fitness = {:.4}\n",
        results.len(),
        counts_text(kind_counts(results)),
        aggregate_fitness(results)
    )
}
