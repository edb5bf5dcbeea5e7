//! Output files: `results.csv`, `fit.json` and `summary.txt`.

use std::fmt::Write as _;
use std::path::Path;

use crate::experiment::{Analysis, Outcome, RunRow};
use crate::plan::ExperimentPlan;

pub fn write_csv<W: std::io::Write>(out: W, rows: &[RunRow]) -> csv::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn summary(plan: &ExperimentPlan, outcome: &Outcome) -> String {
    let mut s = String::new();
    let ok = outcome.rows.iter().filter(|r| r.ok()).count();
    let _ = writeln!(s, "experiment: {:?}", plan.kind);
    let _ = writeln!(s, "runs: {} ({} ok)", outcome.rows.len(), ok);
    for w in &outcome.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    match &outcome.analysis {
        Analysis::PacketSweep(a) => {
            let _ = writeln!(s, "median rate by packet size:");
            for (size, rate) in &a.median_rate {
                let req = a.median_requests.get(size).copied().unwrap_or(f64::NAN);
                let _ = writeln!(s, "  {size:>6}  {rate:>12.3} chrom/s  {req:>8.1} requests");
            }
            match (&a.fit, &a.fit_refused) {
                (Some(f), _) => {
                    let _ = writeln!(
                        s,
                        "fit: rate = {:.4} (± {:.4}) + {:.6} (± {:.6}) * packet_size, r² = {:.4}, n = {}",
                        f.intercept, f.intercept_stderr, f.slope, f.slope_stderr, f.r_squared, f.n
                    );
                    let _ = writeln!(s, "slope > 2·stderr: {}", f.slope_positive_at(2.0));
                }
                (None, Some(reason)) => {
                    let _ = writeln!(s, "{reason}");
                }
                (None, None) => {}
            }
            let _ = writeln!(s, "standalone evaluation rate: {:.1} chrom/s", a.standalone_rate);
            for e in &a.extrapolations {
                match e.packet_size {
                    Some(size) => {
                        let _ = writeln!(s, "{}: rate {:.1} at packet size ≈ {:.0}", e.label, e.target_rate, size);
                    }
                    None => {
                        let _ = writeln!(s, "{}: rate {:.1} is not reached by the fitted line", e.label, e.target_rate);
                    }
                }
            }
        }
        Analysis::ScalingSweep(a) => {
            let _ = writeln!(s, "clients  best rate  median rate");
            for (count, best) in &a.best_rate {
                let med = a.median_rate.get(count).copied().unwrap_or(f64::NAN);
                let _ = writeln!(s, "  {count:>5}  {best:>9.1}  {med:>11.1}");
            }
            let _ = writeln!(s, "best case non-decreasing: {}", a.best_case_non_decreasing);
            if let Some(x) = a.speedup {
                let _ = writeln!(s, "speedup largest/smallest count: {x:.3}");
            }
        }
        Analysis::LoggingAb(a) => {
            let fmt = |m: Option<f64>| m.map(|v| format!("{v:.1}")).unwrap_or_else(|| "n/a".into());
            let _ = writeln!(s, "quiet median: {} chrom/s over {} runs", fmt(a.quiet_median), a.quiet_rates.len());
            let _ = writeln!(s, "debug median: {} chrom/s over {} runs", fmt(a.debug_median), a.debug_rates.len());
            if let Some(d) = a.relative_difference {
                let _ = writeln!(s, "relative difference (quiet vs debug): {:+.2}%", d * 100.0);
            }
            if let Some(t) = &a.rank_sum {
                let _ = writeln!(s, "rank-sum: U = {}, p = {:.4} ({:?})", t.u, t.p_value, t.method);
            }
        }
    }
    s
}

pub fn write_outputs(out: &Path, plan: &ExperimentPlan, outcome: &Outcome) -> anyhow::Result<()> {
    std::fs::create_dir_all(out)?;
    write_csv(std::fs::File::create(out.join("results.csv"))?, &outcome.rows)?;
    let analysis = serde_json::json!({
        "analysis": outcome.analysis,
        "warnings": outcome.warnings,
    });
    std::fs::write(out.join("fit.json"), serde_json::to_string_pretty(&analysis)? + "\n")?;
    std::fs::write(out.join("summary.txt"), summary(plan, outcome))?;
    Ok(())
}
