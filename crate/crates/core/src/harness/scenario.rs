//! Resolving a config into a Hamiltonian and initial state, running it, and
//! writing the trace and summary files.

use std::f64::consts::FRAC_PI_2;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::config::{DriveSpec, ScenarioConfig, Scheme};
use crate::error::{Error, Result};
use crate::hamiltonians::{
    build_ac_drive, build_effective_fpq, build_rwa_effective, build_static_hamiltonian,
    effective_params, omega_for_delta, solve_omega_prime, tat_branch_for_axis, tat_branch_select,
    Couplings, DriveConfig, EffectiveParams, TatForm,
};
use crate::observables::{
    find_optimal_squeezing, fmt_float, husimi_q_with_workers, HusimiMap, SpinObservables,
    SqueezingTrace,
};
use crate::propagator::{
    Hamiltonian, PropagationReport, Propagator, PropagatorOptions, TimeGrid,
};
use crate::spin::{coherent_spin_state, partial_trace_s, Axis, QuantumState, SpinSpace};

/// Validity ratios above this are flagged in the summary.
pub const VALIDITY_WARN: f64 = 0.1;

/// Norm drift above this is flagged in the summary.
pub const NORM_DRIFT_WARN: f64 = 1e-8;

/// Default AC frequency in units of `|χ_eff| N_s`.
pub const AC_FREQUENCY_FACTOR: f64 = 20.0;

/// Resolved AC field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AcSettings {
    pub axis: Axis,
    pub frequency: f64,
    pub amplitude: f64,
    /// `2A/ω`.
    pub bessel_argument: f64,
    pub form: TatForm,
}

impl AcSettings {
    pub fn a_over_omega(&self) -> f64 {
        0.5 * self.bessel_argument
    }
}

/// Optimal squeezing predicted by the large-N formulas for an effective rate `χ`.
pub fn predicted_optimum(tat: bool, chi: f64, n_s: usize) -> (f64, f64) {
    let n = n_s as f64;
    let chi = chi.abs();
    if tat {
        (1.8 / n, 3.0 * (4.0 * n).ln() / (2.0 * chi * n))
    } else {
        (0.5 * (n / 3.0).powf(-2.0 / 3.0), 3f64.powf(1.0 / 6.0) / (chi * n.powf(2.0 / 3.0)))
    }
}

/// Everything derived from a config before propagation.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub couplings: Couplings,
    /// Ideal fields (`f = 0`).
    pub omega_nominal: f64,
    pub omega_prime_nominal: f64,
    /// Fields after applying `epsilon`, `epsilon_prime`.
    pub omega: f64,
    pub omega_prime: f64,
    pub nominal: EffectiveParams,
    pub actual: EffectiveParams,
    pub ac: Option<AcSettings>,
    /// Effective twisting rate used for predictions and the default AC frequency.
    pub chi_eff: f64,
    pub predicted_xi2_min: f64,
    pub predicted_t_min: f64,
    pub t_end: f64,
    pub init_s: (f64, f64),
}

pub fn resolve(config: &ScenarioConfig) -> Result<Resolved> {
    config.validate()?;
    let couplings = config.interaction.couplings(config.g);
    let (omega_nominal, omega_prime_nominal) = match config.drive {
        DriveSpec::DeltaOverG(d) => omega_for_delta(couplings, config.n_s, config.n_j, d * config.g)?,
        DriveSpec::Omega(w) => {
            let cfg = DriveConfig::dc(couplings, w, 0.0, config.n_s, config.n_j);
            (w, solve_omega_prime(&cfg)?)
        }
    };
    let nominal_cfg = DriveConfig::dc(couplings, omega_nominal, omega_prime_nominal, config.n_s, config.n_j);
    let nominal = effective_params(&nominal_cfg)?;
    let ac = if config.scheme.is_tat() {
        let branch = match config.ac_axis {
            Some(a) => tat_branch_for_axis(nominal.p, nominal.q, a)?,
            None => tat_branch_select(nominal.p, nominal.q)?,
        };
        let (form, x) = branch.resolve()?;
        let frequency = config
            .ac_frequency
            .unwrap_or(AC_FREQUENCY_FACTOR * nominal.chi_eff.abs() * config.n_s as f64);
        Some(AcSettings {
            axis: branch.drive_axis,
            frequency,
            amplitude: 0.5 * x * frequency,
            bessel_argument: x,
            form,
        })
    } else {
        None
    };
    let omega = omega_nominal * (1.0 + config.epsilon);
    let omega_prime = omega_prime_nominal * (1.0 + config.epsilon_prime);
    let mut actual_cfg = DriveConfig::dc(couplings, omega, omega_prime, config.n_s, config.n_j);
    if let Some(a) = ac {
        actual_cfg.ac_amplitude = a.amplitude;
        actual_cfg.ac_frequency = a.frequency;
        actual_cfg.ac_axis = a.axis;
    }
    let actual = effective_params(&actual_cfg)?;
    // a two-axis twist c (S_a^2 - S_b^2) corresponds to χ = 3c
    let chi_eff = match ac {
        Some(a) => 3.0 * a.form.coefficient,
        None => nominal.chi_eff,
    };
    if chi_eff == 0.0 || !chi_eff.is_finite() {
        return Err(Error::InvalidArgument("effective twisting rate vanishes".into()));
    }
    let (predicted_xi2_min, predicted_t_min) = predicted_optimum(config.scheme.is_tat(), chi_eff, config.n_s);
    let init_s = config.init_s.unwrap_or_else(|| match ac {
        Some(a) => axis_angles(a.form.saddle_axis()),
        None => (FRAC_PI_2, FRAC_PI_2),
    });
    Ok(Resolved {
        couplings,
        omega_nominal,
        omega_prime_nominal,
        omega,
        omega_prime,
        nominal,
        actual,
        ac,
        chi_eff,
        predicted_xi2_min,
        predicted_t_min,
        t_end: config.t_end.unwrap_or(3.0 * predicted_t_min),
        init_s,
    })
}

/// Polar and azimuthal angles of a Cartesian axis.
pub fn axis_angles(axis: Axis) -> (f64, f64) {
    match axis {
        Axis::X => (FRAC_PI_2, 0.0),
        Axis::Y => (FRAC_PI_2, FRAC_PI_2),
        Axis::Z => (0.0, 0.0),
    }
}

/// A resolved scenario ready to propagate.
#[derive(Clone, Debug)]
pub struct PreparedScenario {
    pub config: ScenarioConfig,
    pub resolved: Resolved,
    pub space_s: SpinSpace,
    pub hamiltonian: Hamiltonian,
    pub initial: QuantumState,
    pub grid: TimeGrid,
}

impl PreparedScenario {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        let resolved = resolve(config)?;
        let s = SpinSpace::new(config.n_s)?;
        let j = SpinSpace::new(config.n_j)?;
        let r = &resolved;
        let (hamiltonian, initial) = match config.scheme {
            Scheme::FullDc | Scheme::FullDcAc => {
                let mut dc = DriveConfig::dc(r.couplings, r.omega, r.omega_prime, config.n_s, config.n_j);
                let stat = build_static_hamiltonian(&dc, s, j)?;
                let ham = match r.ac {
                    Some(a) => {
                        dc.ac_amplitude = a.amplitude;
                        dc.ac_frequency = a.frequency;
                        dc.ac_axis = a.axis;
                        Hamiltonian::with_drive(stat, build_ac_drive(&dc, s, j)?)
                    }
                    None => Hamiltonian::time_independent(stat),
                };
                let u = coherent_spin_state(s, r.init_s.0, r.init_s.1);
                let v = coherent_spin_state(j, config.init_j.0, config.init_j.1);
                (ham, QuantumState::product(&u, &v)?)
            }
            Scheme::EffectiveOat | Scheme::EffectiveTat => {
                let a = &r.actual;
                let op = match r.ac {
                    Some(ac) => build_rwa_effective(a.f, a.p, a.q, ac.axis, ac.bessel_argument, s)?,
                    None => build_effective_fpq(a.f, a.p, a.q, s),
                };
                let u = coherent_spin_state(s, r.init_s.0, r.init_s.1);
                (Hamiltonian::time_independent(op), QuantumState::single(u)?)
            }
        };
        let grid = TimeGrid::new(resolved.t_end, config.n_samples)?;
        Ok(Self {
            config: config.clone(),
            resolved,
            space_s: s,
            hamiltonian,
            initial,
            grid,
        })
    }

    pub fn propagator(&self) -> Result<Propagator> {
        Propagator::new(
            self.hamiltonian.clone(),
            PropagatorOptions {
                tol: self.config.tol,
                integrator: self.config.integrator,
                ..Default::default()
            },
        )
    }

    pub fn run(&self) -> Result<ScenarioOutcome> {
        let mut prop = self.propagator()?;
        let times = self.grid.times();
        let (states, report) = prop.evolve(&self.initial, &self.grid)?;
        let obs = SpinObservables::new(self.space_s);
        let n = self.space_s.n_particles();
        let mut trace = SqueezingTrace::from_states(&obs, &times, &states)?;
        let opt = find_optimal_squeezing(
            &times,
            &trace.xi2,
            |t| {
                // re-propagate from the last stored state at or before t
                let k = times.partition_point(|&s| s <= t).saturating_sub(1);
                let st = prop.advance(&states[k], times[k], t)?;
                obs.state_moments(&st)?.xi2(n)
            },
            self.config.refine,
        )?;
        trace.set_optimum(&opt);
        let mut outcome = ScenarioOutcome {
            trace,
            report,
            resolved: self.resolved.clone(),
            warnings: Vec::new(),
            final_state: states.last().cloned().expect("non-empty grid"),
        };
        outcome.warnings = self.warnings(&outcome);
        Ok(outcome)
    }

    fn warnings(&self, o: &ScenarioOutcome) -> Vec<String> {
        let mut w = Vec::new();
        let p = &self.resolved.actual;
        if self.config.scheme.is_full() {
            if p.validity_s > VALIDITY_WARN {
                w.push(format!("validity_s {} exceeds {VALIDITY_WARN}", fmt_float(p.validity_s)));
            }
            if p.validity_j > VALIDITY_WARN {
                w.push(format!("validity_j {} exceeds {VALIDITY_WARN}", fmt_float(p.validity_j)));
            }
        }
        if o.trace.boundary_minimum {
            w.push("squeezing minimum at the grid boundary".into());
        }
        if o.report.max_norm_drift > NORM_DRIFT_WARN {
            w.push(format!("norm drift {} exceeds {NORM_DRIFT_WARN:e}", fmt_float(o.report.max_norm_drift)));
        }
        w
    }

    /// Reduced S states at the given times (any order, all ≥ 0).
    pub fn states_at(&self, times: &[f64]) -> Result<Vec<QuantumState>> {
        let mut order: Vec<usize> = (0..times.len()).collect();
        order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
        let sorted: Vec<f64> = order.iter().map(|&k| times[k]).collect();
        let mut prop = self.propagator()?;
        let (states, _) = prop.evolve_times(&self.initial, 0.0, &sorted)?;
        let mut out = vec![None; times.len()];
        for (state, &k) in states.into_iter().zip(&order) {
            out[k] = Some(state);
        }
        Ok(out.into_iter().map(|s| s.expect("every slot filled")).collect())
    }
}

/// Result of one scenario run.
#[derive(Clone, Debug)]
pub struct ScenarioOutcome {
    pub trace: SqueezingTrace,
    pub report: PropagationReport,
    pub resolved: Resolved,
    pub warnings: Vec<String>,
    pub final_state: QuantumState,
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioOutcome> {
    PreparedScenario::new(config)?.run()
}

/// Ordered `key = value` lines.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Summary {
    entries: Vec<(String, String)>,
}

impl Summary {
    pub fn push(&mut self, key: &str, value: impl Into<String>) {
        self.entries.push((key.to_string(), value.into()));
    }

    pub fn push_f64(&mut self, key: &str, value: f64) {
        self.push(key, fmt_float(value));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        for (k, v) in &self.entries {
            writeln!(w, "{k} = {v}")?;
        }
        Ok(())
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

/// Creates `path`, making missing parent directories.
pub(crate) fn create(path: &Path) -> Result<File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    File::create(path).map_err(|e| Error::Io(format!("cannot create {}: {e}", path.display())))
}

pub(crate) fn with_suffix(prefix: &str, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{prefix}{suffix}"))
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_else(|| "none".into())
}

pub fn scenario_summary(config: &ScenarioConfig, o: &ScenarioOutcome) -> Summary {
    let r = &o.resolved;
    let mut s = Summary::default();
    s.push("scheme", config.scheme.name());
    s.push("interaction", config.interaction.label());
    s.push("n_s", config.n_s.to_string());
    s.push("n_j", config.n_j.to_string());
    s.push_f64("g", config.g);
    s.push_f64("delta_over_g", r.nominal.delta / config.g);
    s.push_f64("omega", r.omega);
    s.push_f64("omega_prime", r.omega_prime);
    s.push_f64("epsilon", config.epsilon);
    s.push_f64("epsilon_prime", config.epsilon_prime);
    s.push_f64("f", r.actual.f);
    s.push_f64("p", r.actual.p);
    s.push_f64("q", r.actual.q);
    s.push_f64("chi_eff", r.chi_eff);
    s.push_f64("a_over_omega", r.ac.map_or(0.0, |a| a.a_over_omega()));
    s.push("ac_axis", r.ac.map_or("none", |a| a.axis.name()));
    s.push("ac_frequency", opt_f64(r.ac.map(|a| a.frequency)));
    s.push("init_s", format!("{},{}", fmt_float(r.init_s.0), fmt_float(r.init_s.1)));
    s.push("init_j", format!("{},{}", fmt_float(config.init_j.0), fmt_float(config.init_j.1)));
    s.push_f64("t_end", r.t_end);
    s.push("n_samples", config.n_samples.to_string());
    s.push_f64("xi2_min", o.trace.xi2_min);
    s.push_f64("t_min", o.trace.t_min);
    s.push("boundary_minimum", o.trace.boundary_minimum.to_string());
    s.push_f64("predicted_xi2_min", r.predicted_xi2_min);
    s.push_f64("predicted_t_min", r.predicted_t_min);
    s.push_f64("validity_s", r.actual.validity_s);
    s.push_f64("validity_j", r.actual.validity_j);
    s.push("rwa_ratio", opt_f64(r.actual.rwa_ratio));
    s.push("method", o.report.method.name());
    s.push("steps_taken", o.report.steps_taken.to_string());
    s.push("step_size", opt_f64(o.report.step_size));
    s.push_f64("max_norm_drift", o.report.max_norm_drift);
    s.push("max_energy_drift_rel", opt_f64(o.report.max_energy_drift_rel));
    s.push(
        "warnings",
        if o.warnings.is_empty() { "none".to_string() } else { o.warnings.join("; ") },
    );
    s
}

/// Writes `<prefix>_trace.csv` and `<prefix>_summary.txt`.
pub fn write_scenario_outputs(config: &ScenarioConfig, o: &ScenarioOutcome, prefix: &str) -> Result<Vec<PathBuf>> {
    let trace_path = with_suffix(prefix, "_trace.csv");
    let mut w = BufWriter::new(create(&trace_path)?);
    o.trace.write_csv(&mut w)?;
    w.flush()?;
    let summary_path = with_suffix(prefix, "_summary.txt");
    scenario_summary(config, o).write_file(&summary_path)?;
    Ok(vec![trace_path, summary_path])
}

/// Husimi maps of the S state at fractions of the optimal squeezing time.
#[derive(Clone, Debug)]
pub struct HusimiOutcome {
    pub scenario: ScenarioOutcome,
    pub times: Vec<f64>,
    pub maps: Vec<HusimiMap>,
}

pub fn run_husimi(config: &ScenarioConfig, workers: Option<usize>) -> Result<HusimiOutcome> {
    let prepared = PreparedScenario::new(config)?;
    let scenario = prepared.run()?;
    let times: Vec<f64> = config
        .husimi_fractions
        .iter()
        .map(|f| f * scenario.trace.t_min)
        .collect();
    if times.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::Config("husimi_fractions must be non-negative".into()));
    }
    let states = prepared.states_at(&times)?;
    let maps = states
        .iter()
        .map(|st| {
            let rho = partial_trace_s(st)?;
            husimi_q_with_workers(&rho, prepared.space_s, config.husimi_n_theta, config.husimi_n_phi, workers)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HusimiOutcome { scenario, times, maps })
}

/// Writes `<prefix>_husimi_<k>.csv` per snapshot and `<prefix>_husimi_summary.txt`.
pub fn write_husimi_outputs(config: &ScenarioConfig, h: &HusimiOutcome, prefix: &str) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    let mut s = scenario_summary(config, &h.scenario);
    s.push("husimi_snapshots", h.maps.len().to_string());
    for (k, (t, map)) in h.times.iter().zip(&h.maps).enumerate() {
        let path = with_suffix(prefix, &format!("_husimi_{k}.csv"));
        let mut w = BufWriter::new(create(&path)?);
        map.write_csv(&mut w)?;
        w.flush()?;
        s.push_f64(&format!("husimi_{k}_time"), *t);
        s.push_f64(&format!("husimi_{k}_normalization"), map.normalization());
        paths.push(path);
    }
    let summary_path = with_suffix(prefix, "_husimi_summary.txt");
    s.write_file(&summary_path)?;
    paths.push(summary_path);
    Ok(paths)
}
