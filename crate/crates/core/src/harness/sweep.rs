//! N-scaling, imperfection and Δ sweeps.

use std::io::{BufWriter, Write};
use std::path::PathBuf;

use super::config::{DriveSpec, ScenarioConfig, Scheme, Vary};
use super::scenario::{create, run_scenario, with_suffix, ScenarioOutcome, Summary};
use crate::error::{Error, Result};
use crate::exec;
use crate::observables::fmt_float;

/// Unweighted least-squares line `log10 y = slope log10 x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Power-law fit in log10–log10 coordinates; needs ≥ 3 positive points.
pub fn fit_power_law(x: &[f64], y: &[f64]) -> Result<Fit> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::InvalidArgument("a power-law fit needs at least 3 points".into()));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidArgument("power-law fit needs positive data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.log10()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.log10()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = ly.iter().map(|b| (b - my) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("power-law fit needs distinct x values".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(a, b)| {
            let r = b - (slope * a + intercept);
            r * r
        })
        .sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(Fit { slope, intercept, r2 })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepKind {
    Scaling,
    Imperfection(Vary),
    Delta,
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            SweepKind::Scaling => "scaling",
            SweepKind::Imperfection(_) => "imperfection",
            SweepKind::Delta => "delta",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub x: f64,
    pub xi2_min: f64,
    pub t_min: f64,
    /// Scaling: relative to the large-N prediction. Imperfection: relative to the
    /// ideal run. Δ sweep: relative to the effective model at the same Δ.
    pub delta_rel: f64,
    /// Δ sweep only: the effective-model optimum.
    pub reference_xi2_min: Option<f64>,
    pub boundary_minimum: bool,
    pub max_norm_drift: f64,
    /// Time-independent runs only.
    pub max_energy_drift_rel: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub scheme: Scheme,
    pub rows: Vec<SweepRow>,
    /// `xi2_min` vs `x`; scaling sweeps with ≥ 3 rows only.
    pub xi2_fit: Option<Fit>,
    /// `t_min` vs `x`; scaling sweeps with ≥ 3 rows only.
    pub t_fit: Option<Fit>,
    /// Δ sweep: first `Δ/g` whose optimum is within 10% of the effective model.
    pub plateau: Option<f64>,
}

/// Relative agreement that defines the Δ-sweep plateau.
pub const PLATEAU_TOL: f64 = 0.1;

fn row(x: f64, o: &ScenarioOutcome, delta_rel: f64) -> SweepRow {
    SweepRow {
        x,
        xi2_min: o.trace.xi2_min,
        t_min: o.trace.t_min,
        delta_rel,
        reference_xi2_min: None,
        boundary_minimum: o.trace.boundary_minimum,
        max_norm_drift: o.report.max_norm_drift,
        max_energy_drift_rel: o.report.max_energy_drift_rel,
    }
}

fn point_error(point: String, e: Error) -> Error {
    Error::SweepPoint {
        point,
        source: Box::new(e),
    }
}

/// Optimal squeezing versus `N_s = N_j = N` for each `N` in `n_list`.
pub fn scaling_sweep(base: &ScenarioConfig, n_list: &[usize], workers: Option<usize>) -> Result<SweepResult> {
    if n_list.len() < 3 {
        return Err(Error::Config("n_list needs at least 3 values".into()));
    }
    let mut ns = n_list.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let outcomes = exec::try_map(&ns, workers, |&n| {
        let mut c = base.clone();
        c.n_s = n;
        c.n_j = n;
        run_scenario(&c).map_err(|e| point_error(format!("n_s={n}"), e))
    })?;
    let rows: Vec<SweepRow> = ns
        .iter()
        .zip(&outcomes)
        .map(|(&n, o)| {
            let p = o.resolved.predicted_xi2_min;
            row(n as f64, o, (o.trace.xi2_min - p) / p)
        })
        .collect();
    let x: Vec<f64> = rows.iter().map(|r| r.x).collect();
    let xi2: Vec<f64> = rows.iter().map(|r| r.xi2_min).collect();
    let t: Vec<f64> = rows.iter().map(|r| r.t_min).collect();
    Ok(SweepResult {
        kind: SweepKind::Scaling,
        scheme: base.scheme,
        xi2_fit: Some(fit_power_law(&x, &xi2)?),
        t_fit: Some(fit_power_law(&x, &t)?),
        rows,
        plateau: None,
    })
}

/// Optimal squeezing versus a relative field error; the ideal run (value 0) is always included.
pub fn imperfection_sweep(
    base: &ScenarioConfig,
    vary: Vary,
    values: &[f64],
    workers: Option<usize>,
) -> Result<SweepResult> {
    let mut xs = values.to_vec();
    xs.push(0.0);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let outcomes = exec::try_map(&xs, workers, |&v| {
        let mut c = base.clone();
        c.epsilon = 0.0;
        c.epsilon_prime = 0.0;
        match vary {
            Vary::Epsilon => c.epsilon = v,
            Vary::EpsilonPrime => c.epsilon_prime = v,
        }
        run_scenario(&c).map_err(|e| point_error(format!("{}={v}", vary.name()), e))
    })?;
    let k0 = xs.iter().position(|&v| v == 0.0).expect("baseline included");
    let base_xi2 = outcomes[k0].trace.xi2_min;
    let rows = xs
        .iter()
        .zip(&outcomes)
        .map(|(&v, o)| row(v, o, (o.trace.xi2_min - base_xi2) / base_xi2))
        .collect();
    Ok(SweepResult {
        kind: SweepKind::Imperfection(vary),
        scheme: base.scheme,
        rows,
        xi2_fit: None,
        t_fit: None,
        plateau: None,
    })
}

/// Full-dynamics optimum versus `Δ/g`, each compared with its effective model.
pub fn delta_sweep(base: &ScenarioConfig, delta_list: &[f64], workers: Option<usize>) -> Result<SweepResult> {
    if !base.scheme.is_full() {
        return Err(Error::Config("a Δ sweep needs scheme full_dc or full_dc_ac".into()));
    }
    if delta_list.is_empty() || delta_list.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config("delta_list must be non-empty and increasing".into()));
    }
    let pairs = exec::try_map(delta_list, workers, |&d| {
        let mut full = base.clone();
        full.drive = DriveSpec::DeltaOverG(d);
        let mut eff = full.clone();
        eff.scheme = base.scheme.effective();
        let wrap = |e| point_error(format!("delta_over_g={d}"), e);
        Ok((run_scenario(&full).map_err(wrap)?, run_scenario(&eff).map_err(wrap)?))
    })?;
    let rows: Vec<SweepRow> = delta_list
        .iter()
        .zip(&pairs)
        .map(|(&d, (full, eff))| {
            let reference = eff.trace.xi2_min;
            SweepRow {
                reference_xi2_min: Some(reference),
                ..row(d, full, (full.trace.xi2_min - reference) / reference)
            }
        })
        .collect();
    let plateau = rows.iter().find(|r| r.delta_rel.abs() <= PLATEAU_TOL).map(|r| r.x);
    Ok(SweepResult {
        kind: SweepKind::Delta,
        scheme: base.scheme,
        rows,
        xi2_fit: None,
        t_fit: None,
        plateau,
    })
}

impl SweepResult {
    /// CSV with header `x,xi2_min,t_min,delta_rel`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,xi2_min,t_min,delta_rel")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{}",
                fmt_float(r.x),
                fmt_float(r.xi2_min),
                fmt_float(r.t_min),
                fmt_float(r.delta_rel)
            )?;
        }
        Ok(())
    }

    pub fn summary(&self) -> Summary {
        let mut s = Summary::default();
        s.push("sweep", self.kind.name());
        s.push("scheme", self.scheme.name());
        let x_name = match self.kind {
            SweepKind::Scaling => "n_s",
            SweepKind::Imperfection(v) => v.name(),
            SweepKind::Delta => "delta_over_g",
        };
        s.push("x", x_name);
        s.push("rows", self.rows.len().to_string());
        for (name, fit) in [("xi2", self.xi2_fit), ("t_min", self.t_fit)] {
            if let Some(f) = fit {
                s.push_f64(&format!("fit_{name}_slope"), f.slope);
                s.push_f64(&format!("fit_{name}_intercept"), f.intercept);
                s.push_f64(&format!("fit_{name}_r2"), f.r2);
            }
        }
        if self.kind == SweepKind::Delta {
            s.push("plateau_delta_over_g", self.plateau.map(fmt_float).unwrap_or_else(|| "none".into()));
        }
        for (k, r) in self.rows.iter().enumerate() {
            if let Some(reference) = r.reference_xi2_min {
                s.push_f64(&format!("reference_xi2_min_{k}"), reference);
            }
        }
        let max_drift = self.rows.iter().map(|r| r.max_norm_drift).fold(0.0, f64::max);
        s.push_f64("max_norm_drift", max_drift);
        let energy = self.rows.iter().filter_map(|r| r.max_energy_drift_rel).reduce(f64::max);
        if let Some(e) = energy {
            s.push_f64("max_energy_drift_rel", e);
        }
        let boundary: Vec<String> = self
            .rows
            .iter()
            .filter(|r| r.boundary_minimum)
            .map(|r| fmt_float(r.x))
            .collect();
        s.push("boundary_minimum_at", if boundary.is_empty() { "none".into() } else { boundary.join(",") });
        s
    }

    /// Writes `<prefix>_sweep.csv` and `<prefix>_summary.txt`.
    pub fn write_outputs(&self, prefix: &str) -> Result<Vec<PathBuf>> {
        let csv = with_suffix(prefix, "_sweep.csv");
        let mut w = BufWriter::new(create(&csv)?);
        self.write_csv(&mut w)?;
        w.flush()?;
        let summary = with_suffix(prefix, "_summary.txt");
        self.summary().write_file(&summary)?;
        Ok(vec![csv, summary])
    }
}
