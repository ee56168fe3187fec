//! CSV schemas and the gnuplot script.

use std::path::Path;

use fixsub_core::metrics::{slack_tolerance, MetricRow, RateRow};
use fixsub_core::Verdict;

use crate::error::{HarnessError, Result};

/// 17 significant digits, so the value reads back exactly.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        // Keeps `-0` and `0` apart.
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    format!("{v:.16e}")
}

pub fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| HarnessError::Parse {
        what: "number".into(),
        detail: s.into(),
    })
}

pub fn trace_header(users: usize) -> Vec<String> {
    let mut h: Vec<String> = [
        "n",
        "lambda",
        "D_contrib",
        "F_contrib",
        "f_x",
        "dist_x",
        "g_sq_max",
        "g_at_x_max",
        "lemma1_slack",
        "lemma2_slack",
        "elapsed_ns",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for prefix in ["residual", "input_residual", "input_dist"] {
        h.extend((1..=users).map(|i| format!("{prefix}_{i}")));
    }
    h
}

pub fn trace_record(r: &MetricRow) -> Vec<String> {
    let mut rec = vec![
        r.n.to_string(),
        fmt_f64(r.lambda),
        fmt_f64(r.d_contrib),
        fmt_f64(r.f_contrib),
        fmt_f64(r.f_x),
        fmt_f64(r.dist_x),
        fmt_f64(r.g_sq_max),
        fmt_f64(r.g_at_x_max),
        fmt_f64(r.lemma1_slack),
        fmt_f64(r.lemma2_slack),
        r.elapsed_ns.to_string(),
    ];
    for series in [&r.residuals, &r.input_residuals, &r.input_dists] {
        rec.extend(series.iter().map(|v| fmt_f64(*v)));
    }
    rec
}

pub fn write_trace(path: &Path, users: usize, rows: &[MetricRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(trace_header(users))?;
    for r in rows {
        w.write_record(trace_record(r))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Reads a trace CSV back into metric rows. Lemma terms are not stored, so
/// `lemma` is `None` on every row.
pub fn read_trace(path: &Path) -> Result<Vec<MetricRow>> {
    let mut rd = csv::Reader::from_path(path)?;
    let header = rd.headers()?.clone();
    let fixed = trace_header(0).len();
    if header.len() < fixed || (header.len() - fixed) % 3 != 0 || header.iter().next() != Some("n") {
        return Err(HarnessError::Parse {
            what: "trace header".into(),
            detail: format!("{} columns", header.len()),
        });
    }
    let users = (header.len() - fixed) / 3;
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let f = |k: usize| parse_f64(&rec[k]);
        let series = |block: usize| -> Result<Vec<f64>> {
            (0..users).map(|i| f(fixed + block * users + i)).collect()
        };
        rows.push(MetricRow {
            n: rec[0].parse().map_err(|_| HarnessError::Parse {
                what: "iteration index".into(),
                detail: rec[0].into(),
            })?,
            lambda: f(1)?,
            d_contrib: f(2)?,
            f_contrib: f(3)?,
            f_x: f(4)?,
            dist_x: f(5)?,
            g_sq_max: f(6)?,
            g_at_x_max: f(7)?,
            lemma1_slack: f(8)?,
            lemma2_slack: f(9)?,
            elapsed_ns: rec[10].parse().map_err(|_| HarnessError::Parse {
                what: "elapsed_ns".into(),
                detail: rec[10].into(),
            })?,
            residuals: series(0)?,
            input_residuals: series(1)?,
            input_dists: series(2)?,
            lemma: None,
        });
    }
    Ok(rows)
}

pub const VERDICT_HEADER: [&str; 5] = ["n", "which", "bound", "observed", "verdict"];

/// Lemma monitor verdicts: `bound` is the right-hand side, `observed` the left.
pub fn lemma_verdicts(rows: &[MetricRow]) -> Vec<RateRow> {
    let mut out = Vec::new();
    for r in rows {
        let Some(t) = &r.lemma else { continue };
        let tol = slack_tolerance(t);
        for (which, slack) in [("lemma_i", r.lemma1_slack), ("lemma_ii", r.lemma2_slack)] {
            out.push(RateRow {
                n: r.n,
                which: which.into(),
                bound: t.lhs + slack,
                observed: t.lhs,
                verdict: if slack >= -tol { Verdict::Pass } else { Verdict::Fail },
            });
        }
    }
    out
}

pub fn write_verdicts(path: &Path, rows: &[RateRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(VERDICT_HEADER)?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.which.clone(),
            fmt_f64(r.bound),
            fmt_f64(r.observed),
            r.verdict.as_str().to_string(),
        ])?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub const AGGREGATE_HEADER: [&str; 4] = ["n", "elapsed_ns_mean", "D", "F"];

pub fn write_aggregate(path: &Path, elapsed: &[f64], d: &[f64], f: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(AGGREGATE_HEADER)?;
    for (n, ((e, d), f)) in elapsed.iter().zip(d).zip(f).enumerate() {
        w.write_record([n.to_string(), fmt_f64(*e), fmt_f64(*d), fmt_f64(*f)])?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// `(n, elapsed_ns_mean, D, F)` rows of an aggregate CSV.
pub fn read_aggregate(path: &Path) -> Result<Vec<(usize, f64, f64, f64)>> {
    let mut rd = csv::Reader::from_path(path)?;
    if rd.headers()?.iter().collect::<Vec<_>>() != AGGREGATE_HEADER {
        return Err(HarnessError::Parse {
            what: "aggregate header".into(),
            detail: path.display().to_string(),
        });
    }
    rd.records()
        .map(|rec| {
            let rec = rec?;
            let n = rec[0].parse().map_err(|_| HarnessError::Parse {
                what: "iteration index".into(),
                detail: rec[0].into(),
            })?;
            Ok((n, parse_f64(&rec[1])?, parse_f64(&rec[2])?, parse_f64(&rec[3])?))
        })
        .collect()
}

fn gp_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

/// A gnuplot script drawing `D_n` and `F_n` against the iteration count and
/// the mean elapsed time, one curve per `(label, aggregate.csv)` pair.
pub fn plot_script(series: &[(String, String)], image: &str) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set terminal pngcairo size 1400,1000\n");
    s.push_str(&format!("set output {}\n", gp_quote(image)));
    s.push_str("set multiplot layout 2,2\n");
    s.push_str("set key top right\n");
    s.push_str("set grid\n");
    let panels = [
        ("D_n", "iteration", 1, 3, true),
        ("D_n", "elapsed time [ns]", 2, 3, true),
        ("F_n", "iteration", 1, 4, false),
        ("F_n", "elapsed time [ns]", 2, 4, false),
    ];
    for (y, x, xc, yc, log) in panels {
        s.push_str(&format!("set xlabel {}\nset ylabel {}\n", gp_quote(x), gp_quote(y)));
        s.push_str(if log { "set logscale y\n" } else { "unset logscale y\n" });
        let curves: Vec<String> = series
            .iter()
            .map(|(label, file)| {
                format!(
                    "{} using {xc}:{yc} every ::1 with lines title {}",
                    gp_quote(file),
                    gp_quote(label)
                )
            })
            .collect();
        s.push_str(&format!("plot {}\n", curves.join(", \\\n     ")));
    }
    s.push_str("unset multiplot\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, 0.0, -0.0] {
            let back = parse_f64(&fmt_f64(v)).unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{v}");
        }
        assert!(parse_f64(&fmt_f64(f64::NAN)).unwrap().is_nan());
        assert_eq!(parse_f64(&fmt_f64(f64::INFINITY)).unwrap(), f64::INFINITY);
    }

    #[test]
    fn plot_script_mentions_every_series() {
        let s = plot_script(
            &[("a".into(), "x/aggregate.csv".into()), ("b".into(), "y/aggregate.csv".into())],
            "p.png",
        );
        assert_eq!(s.matches("x/aggregate.csv").count(), 4);
        assert_eq!(s.matches("y/aggregate.csv").count(), 4);
    }
}
