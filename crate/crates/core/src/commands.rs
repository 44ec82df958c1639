//! Subcommand orchestration shared by the binary and the tests.

use std::fs;
use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;

use crate::config::{Scenario, SweepAxis};
use crate::dynamics::{self, Trace};
use crate::error::{Error, Result};
use crate::hypotheses::{self, fmt_f64, HypothesisReport, Theorem};
use crate::odelab::{self, OracleRow, ORACLE_CSV_HEADER};

/// Exit code for configuration and input errors.
pub const EXIT_CONFIG_ERROR: i32 = 2;

pub const FRONTIER_HEADER: &str = "point,key,value,theorem,case,rho,delta,T_bound,T_star,margin,status";

pub fn cmd_check(scenario: &Scenario) -> Result<(HypothesisReport, i32)> {
    let report = hypotheses::evaluate(scenario)?;
    info!("check {}: theorem {}", scenario.name, report.theorem.name());
    let code = report.exit_code();
    Ok((report, code))
}

/// Runs the PDE and writes `trace.csv`, `summary.txt` and `report.txt` into `out`.
pub fn cmd_simulate(scenario: &Scenario, out: Option<&Path>) -> Result<(Trace, i32)> {
    let trace = dynamics::run(scenario)?;
    info!(
        "simulate {}: {} after {} steps",
        scenario.name,
        trace.termination.name(),
        trace.steps_accepted
    );
    if let Some(dir) = out {
        write_trace(dir, &trace)?;
    }
    let code = trace.termination.exit_code();
    Ok((trace, code))
}

fn write_trace(dir: &Path, trace: &Trace) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("trace.csv"), trace.to_csv())?;
    fs::write(dir.join("summary.txt"), trace.summary())?;
    fs::write(dir.join("report.txt"), trace.report.to_kv())?;
    Ok(())
}

/// Oracle CSV: the scenario problem (if any) followed by `oracle.random_count`
/// seeded random problems.
pub fn cmd_oracle(scenario: &Scenario) -> Result<(Vec<OracleRow>, String)> {
    let mut rows = Vec::new();
    match odelab::scenario_problem(scenario) {
        Ok(p) => rows.push(OracleRow::evaluate(&p)?),
        Err(Error::NotAdmissible(msg)) if scenario.oracle.random_count > 0 => {
            warn!("{}: skipping scenario problem: {msg}", scenario.name)
        }
        Err(e) => return Err(e),
    }
    let suite = odelab::random_suite(scenario.oracle.random_count, scenario.oracle.seed);
    let random: Vec<OracleRow> = suite.par_iter().map(OracleRow::evaluate).collect::<Result<_>>()?;
    rows.extend(random);
    let mut csv = String::from(ORACLE_CSV_HEADER);
    csv.push('\n');
    for r in &rows {
        csv.push_str(&r.to_csv());
        csv.push('\n');
    }
    Ok((rows, csv))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepOptions {
    pub jobs: usize,
    pub check_only: bool,
}

/// One sweep point; `status` is `ok` or the error message of a failed point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub values: Vec<f64>,
    pub report: Option<HypothesisReport>,
    pub t_star: Option<f64>,
    pub status: String,
}

impl SweepPoint {
    pub fn margin(&self) -> Option<f64> {
        match (self.report.as_ref().and_then(|r| r.t_bound), self.t_star) {
            (Some(b), Some(s)) => Some(b - s),
            _ => None,
        }
    }

    fn csv_row(&self, axes: &[SweepAxis]) -> String {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_else(|| "none".into());
        let key = axes.iter().map(|a| a.key.as_str()).collect::<Vec<_>>().join("|");
        let value = self.values.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join("|");
        let r = self.report.as_ref();
        let status = self.status.replace([',', '\n'], ";");
        [
            self.index.to_string(),
            key,
            value,
            r.map(|r| r.theorem.name().to_string()).unwrap_or_else(|| "none".into()),
            r.map(|r| r.case_label.name().to_string()).unwrap_or_else(|| "none".into()),
            opt(r.map(|r| r.rho)),
            opt(r.map(|r| r.delta)),
            opt(r.and_then(|r| r.t_bound)),
            opt(self.t_star),
            opt(self.margin()),
            status,
        ]
        .join(",")
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub frontier_csv: String,
}

/// Evaluates the cartesian product of one or two axes. Failed points are
/// recorded and do not stop the sweep.
pub fn cmd_sweep(
    scenario: &Scenario,
    axes: &[SweepAxis],
    opts: SweepOptions,
    out: Option<&Path>,
) -> Result<SweepResult> {
    if axes.is_empty() || axes.len() > 2 {
        return Err(Error::parse(None, format!("sweep takes one or two axes, got {}", axes.len())));
    }
    let mut grid: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in axes {
        grid = grid
            .into_iter()
            .flat_map(|prefix| {
                axis.values().into_iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidRun(format!("cannot build thread pool: {e}")))?;
    let points: Vec<SweepPoint> = pool.install(|| {
        grid.par_iter()
            .enumerate()
            .map(|(index, values)| sweep_point(scenario, axes, index, values, opts, out))
            .collect()
    });
    let mut frontier_csv = String::from(FRONTIER_HEADER);
    frontier_csv.push('\n');
    for p in &points {
        frontier_csv.push_str(&p.csv_row(axes));
        frontier_csv.push('\n');
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("frontier.csv"), &frontier_csv)?;
    }
    Ok(SweepResult { points, frontier_csv })
}

fn sweep_point(
    base: &Scenario,
    axes: &[SweepAxis],
    index: usize,
    values: &[f64],
    opts: SweepOptions,
    out: Option<&Path>,
) -> SweepPoint {
    let mut point = SweepPoint { index, values: values.to_vec(), report: None, t_star: None, status: "ok".into() };
    let result = (|| -> Result<()> {
        let mut s = base.clone();
        for (axis, v) in axes.iter().zip(values) {
            s = s.with_override(&axis.key, &format!("{v}"))?;
        }
        s.name = format!("{}-{index:03}", base.name);
        let report = hypotheses::evaluate(&s)?;
        let dir = out.map(|d| d.join(format!("point-{index:03}")));
        if let Some(d) = &dir {
            fs::create_dir_all(d)?;
            fs::write(d.join("report.txt"), report.to_kv())?;
        }
        let simulate = !opts.check_only && report.theorem != Theorem::None;
        point.report = Some(report);
        if simulate {
            let trace = dynamics::run(&s)?;
            point.t_star = trace.t_star();
            if let Some(d) = &dir {
                write_trace(d, &trace)?;
            }
        }
        Ok(())
    })();
    if let Err(e) = result {
        warn!("sweep point {index} failed: {e}");
        point.status = format!("error: {e}");
    }
    point
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::bundled;

    #[test]
    fn check_small_data_exits_three() {
        let (_, code) = cmd_check(&bundled("small-data-A0.1").unwrap()).unwrap();
        assert_eq!(code, 3);
    }

    #[test]
    fn sweep_records_failures_and_continues() {
        let s = bundled("small-data-A0.1").unwrap();
        let axes = [SweepAxis::parse("nonlin.eps=1:3:3").unwrap()];
        let res = cmd_sweep(&s, &axes, SweepOptions { jobs: 2, check_only: true }, None).unwrap();
        assert_eq!(res.points.len(), 3);
        assert!(res.points[0].report.is_some(), "{}", res.points[0].status);
        assert!(res.points[2].status.starts_with("error"));
        assert_eq!(res.frontier_csv.lines().count(), 4);
    }

    #[test]
    fn two_axis_product() {
        let s = bundled("small-data-A0.1").unwrap();
        let axes = [
            SweepAxis::parse("data0.amplitude=0.5:2:2").unwrap(),
            SweepAxis::parse("scale.H=0:0.1:3").unwrap(),
        ];
        let res = cmd_sweep(&s, &axes, SweepOptions { jobs: 1, check_only: true }, None).unwrap();
        assert_eq!(res.points.len(), 6);
        assert_eq!(res.points[5].values, vec![2.0, 0.1]);
    }
}
