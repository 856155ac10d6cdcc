//! Time evolution of joint pure states under `H(t) = H_static + A cos(ωt) V`.
//!
//! Three paths are used:
//! * time-independent, dimension ≤ [`EIGEN_DIM_LIMIT`]: one dense eigendecomposition, exact sampling;
//! * time-independent, larger: Lanczos exponentials between sample times;
//! * time-dependent: fixed-step fourth-order commutator-free Magnus steps with Chebyshev
//!   exponentials, halving the step until two successive trajectories agree to `tol`.
//!
//! A classical fixed-step RK4 integrator is available as an explicit choice.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hamiltonians::AcDrive;
use crate::krylov::{Chebyshev, Lanczos};
use crate::spin::{Operator, QuantumState};

/// Largest dimension propagated by dense eigendecomposition.
pub const EIGEN_DIM_LIMIT: usize = 600;

/// Sub-steps per AC period required of the fixed-step integrators.
pub const STEPS_PER_PERIOD: f64 = 64.0;

/// RK4 stability budget: `h * (|H_static| + |A V|) <= RK4_PHASE_PER_STEP`.
pub const RK4_PHASE_PER_STEP: f64 = 0.05;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Uniform sample times `0, t_end/(n-1), ..., t_end`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    t_end: f64,
    n_samples: usize,
}

impl TimeGrid {
    pub fn new(t_end: f64, n_samples: usize) -> Result<Self> {
        if n_samples == 0 {
            return Err(Error::InvalidArgument("time grid needs at least one sample".into()));
        }
        if !(t_end >= 0.0) || !t_end.is_finite() {
            return Err(Error::InvalidArgument(format!("t_end must be finite and >= 0, got {t_end}")));
        }
        if n_samples == 1 && t_end != 0.0 {
            return Err(Error::InvalidArgument(
                "a single-sample grid cannot reach a positive t_end".into(),
            ));
        }
        if n_samples > 1 && t_end == 0.0 {
            return Err(Error::InvalidArgument(
                "sample times must be strictly increasing; t_end = 0 allows one sample".into(),
            ));
        }
        Ok(Self { t_end, n_samples })
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn times(&self) -> Vec<f64> {
        if self.n_samples == 1 {
            return vec![0.0];
        }
        let last = (self.n_samples - 1) as f64;
        (0..self.n_samples)
            .map(|k| {
                if k + 1 == self.n_samples {
                    self.t_end
                } else {
                    self.t_end * k as f64 / last
                }
            })
            .collect()
    }
}

/// Static Hamiltonian plus an optional AC term.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    pub static_part: Operator,
    pub drive: Option<AcDrive>,
}

impl Hamiltonian {
    pub fn time_independent(static_part: Operator) -> Self {
        Self {
            static_part,
            drive: None,
        }
    }

    pub fn with_drive(static_part: Operator, drive: AcDrive) -> Self {
        Self {
            static_part,
            drive: Some(drive),
        }
    }

    pub fn dim(&self) -> usize {
        self.static_part.dim()
    }

    fn active_drive(&self) -> Option<&AcDrive> {
        self.drive.as_ref().filter(|d| d.amplitude != 0.0)
    }

    pub fn is_time_dependent(&self) -> bool {
        self.active_drive().is_some()
    }

    /// `-H(t)`, used for time-reversal checks.
    pub fn negated(&self) -> Self {
        Self {
            static_part: self.static_part.scaled(-1.0),
            drive: self.drive.as_ref().map(|d| AcDrive {
                amplitude: -d.amplitude,
                ..d.clone()
            }),
        }
    }
}

/// Integrator selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Integrator {
    /// Eigendecomposition, Lanczos or commutator-free Magnus depending on the problem.
    Auto,
    /// Classical fixed-step fourth-order Runge–Kutta with step halving.
    Rk4,
}

/// The path actually used for a propagation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Eigen,
    Krylov,
    MagnusCf4,
    Rk4,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Eigen => "eigen",
            Method::Krylov => "krylov",
            Method::MagnusCf4 => "magnus_cf4",
            Method::Rk4 => "rk4",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropagatorOptions {
    /// Accepted final-state overlap deficit between successive step halvings.
    pub tol: f64,
    pub integrator: Integrator,
    pub max_halvings: usize,
}

impl Default for PropagatorOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            integrator: Integrator::Auto,
            max_halvings: 12,
        }
    }
}

/// Diagnostics of one propagation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropagationReport {
    pub method: Method,
    pub max_norm_drift: f64,
    /// Relative drift of `<H>`; only for time-independent Hamiltonians.
    pub max_energy_drift_rel: Option<f64>,
    pub steps_taken: usize,
    /// Final fixed step size, for the stepping integrators.
    pub step_size: Option<f64>,
    /// Final-state overlap deficit between the last two step sizes.
    pub refinement_disagreement: Option<f64>,
}

struct Eigensystem {
    values: Vec<f64>,
    vectors: DMatrix<C64>,
}

impl Eigensystem {
    fn new(op: &Operator) -> Self {
        if op.is_real() {
            let dense = op.to_dense().map(|c| c.re);
            let sym = (&dense + dense.transpose()) * 0.5;
            let eig = SymmetricEigen::new(sym);
            Self {
                values: eig.eigenvalues.iter().cloned().collect(),
                vectors: eig.eigenvectors.map(|x| C64::new(x, 0.0)),
            }
        } else {
            let dense = op.to_dense();
            let herm = (&dense + dense.adjoint()) * C64::new(0.5, 0.0);
            let eig = SymmetricEigen::new(herm);
            Self {
                values: eig.eigenvalues.iter().cloned().collect(),
                vectors: eig.eigenvectors,
            }
        }
    }

    fn evolve(&self, coeffs: &DVector<C64>, dt: f64) -> DVector<C64> {
        let phased = DVector::from_iterator(
            coeffs.len(),
            coeffs
                .iter()
                .zip(&self.values)
                .map(|(c, e)| c * C64::from_polar(1.0, -dt * e)),
        );
        &self.vectors * phased
    }
}

/// Propagator bound to one Hamiltonian.
pub struct Propagator {
    ham: Hamiltonian,
    opts: PropagatorOptions,
    eigen: Option<Eigensystem>,
    /// Step size established by the last converged stepping run.
    step: Option<f64>,
    krylov: Lanczos,
    chebyshev: Chebyshev,
    /// Gershgorin bounds on the spectral radius of the static and drive operators.
    static_bound: f64,
    drive_bound: f64,
}

impl Propagator {
    pub fn new(ham: Hamiltonian, opts: PropagatorOptions) -> Result<Self> {
        if !(opts.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", opts.tol)));
        }
        if let Some(d) = &ham.drive {
            if d.operator.dim() != ham.dim() {
                return Err(Error::DimensionMismatch {
                    expected: ham.dim(),
                    found: d.operator.dim(),
                });
            }
            if d.amplitude != 0.0 && !(d.frequency > 0.0) {
                return Err(Error::InvalidArgument("AC frequency must be positive".into()));
            }
        }
        let use_eigen = opts.integrator == Integrator::Auto
            && !ham.is_time_dependent()
            && ham.dim() <= EIGEN_DIM_LIMIT;
        let eigen = use_eigen.then(|| Eigensystem::new(&ham.static_part));
        let krylov_tol = (opts.tol * 1e-4).clamp(1e-14, 1e-11);
        // sparse copies keep large matrix-vector products cheap
        let ham = if ham.dim() > 64 {
            Hamiltonian {
                static_part: ham.static_part.sparsified(),
                drive: ham.drive.map(|d| AcDrive {
                    operator: d.operator.sparsified(),
                    ..d
                }),
            }
        } else {
            ham
        };
        let static_bound = ham.static_part.row_sum_bound();
        let drive_bound = ham.drive.as_ref().map_or(0.0, |d| d.operator.row_sum_bound());
        Ok(Self {
            ham,
            opts,
            eigen,
            step: None,
            krylov: Lanczos::new(64, krylov_tol),
            chebyshev: Chebyshev::new(1e-15),
            static_bound,
            drive_bound,
        })
    }

    pub fn hamiltonian(&self) -> &Hamiltonian {
        &self.ham
    }

    pub fn method(&self) -> Method {
        match self.opts.integrator {
            Integrator::Rk4 => Method::Rk4,
            Integrator::Auto if self.eigen.is_some() => Method::Eigen,
            Integrator::Auto if self.ham.is_time_dependent() => Method::MagnusCf4,
            Integrator::Auto => Method::Krylov,
        }
    }

    /// Evolves `initial` from `t = 0` and returns the state at every grid time.
    pub fn evolve(
        &mut self,
        initial: &QuantumState,
        grid: &TimeGrid,
    ) -> Result<(Vec<QuantumState>, PropagationReport)> {
        self.evolve_times(initial, 0.0, &grid.times())
    }

    /// Evolves `initial`, given at time `t0`, to each of the non-decreasing `times` (all ≥ `t0`).
    pub fn evolve_times(
        &mut self,
        initial: &QuantumState,
        t0: f64,
        times: &[f64],
    ) -> Result<(Vec<QuantumState>, PropagationReport)> {
        self.check_inputs(initial, t0, times)?;
        let method = self.method();
        let (states, steps, step_size, disagreement) = match method {
            Method::Eigen => (self.run_eigen(initial, t0, times), 0, None, None),
            Method::Krylov => {
                let before = self.krylov.matvecs();
                let s = self.run_krylov(initial, t0, times);
                (s, self.krylov.matvecs() - before, None, None)
            }
            Method::MagnusCf4 | Method::Rk4 => {
                let (s, steps, h, d) = self.run_refined(initial, t0, times, method)?;
                (s, steps, Some(h), Some(d))
            }
        };
        let report = self.report(method, initial, &states, steps, step_size, disagreement);
        Ok((states, report))
    }

    /// Propagates one state from `t0` to `t1` with the step size fixed by the last
    /// [`evolve`](Self::evolve) call (no refinement loop).
    pub fn advance(&mut self, state: &QuantumState, t0: f64, t1: f64) -> Result<QuantumState> {
        self.check_inputs(state, t0, &[t1])?;
        let method = self.method();
        let mut out = match method {
            Method::Eigen => self.run_eigen(state, t0, &[t1]),
            Method::Krylov => self.run_krylov(state, t0, &[t1]),
            Method::MagnusCf4 | Method::Rk4 => {
                let h = match self.step {
                    Some(h) => h,
                    None => self.initial_step(method),
                };
                self.run_fixed(state, t0, &[t1], h, method).0
            }
        };
        Ok(out.remove(0))
    }

    fn check_inputs(&self, initial: &QuantumState, t0: f64, times: &[f64]) -> Result<()> {
        if initial.dims().total() != self.ham.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ham.dim(),
                found: initial.dims().total(),
            });
        }
        let mut prev = t0;
        for &t in times {
            if !(t >= prev) || !t.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "sample times must be non-decreasing from t0 = {t0}"
                )));
            }
            prev = t;
        }
        Ok(())
    }

    fn run_eigen(&self, initial: &QuantumState, t0: f64, times: &[f64]) -> Vec<QuantumState> {
        let eig = self.eigen.as_ref().expect("eigen path");
        let coeffs = eig.vectors.adjoint() * initial.amplitudes();
        times
            .iter()
            .map(|&t| QuantumState::evolved(initial.dims(), eig.evolve(&coeffs, t - t0)))
            .collect()
    }

    fn run_krylov(&mut self, initial: &QuantumState, t0: f64, times: &[f64]) -> Vec<QuantumState> {
        let h = &self.ham.static_part;
        let mut apply = |x: &[C64], y: &mut [C64]| h.apply(x, y);
        let mut psi = initial.amplitudes().as_slice().to_vec();
        let mut t = t0;
        let mut out = Vec::with_capacity(times.len());
        for &ts in times {
            if ts > t {
                psi = self.krylov.expm(&mut apply, &psi, ts - t);
                t = ts;
            }
            out.push(QuantumState::evolved(initial.dims(), DVector::from_column_slice(&psi)));
        }
        out
    }

    fn initial_step(&self, method: Method) -> f64 {
        let period_cap = self
            .ham
            .active_drive()
            .map(|d| 2.0 * std::f64::consts::PI / d.frequency / STEPS_PER_PERIOD)
            .unwrap_or(f64::INFINITY);
        match method {
            Method::Rk4 => {
                let drive_bound = self
                    .ham
                    .active_drive()
                    .map(|d| d.amplitude.abs() * d.operator.row_sum_bound())
                    .unwrap_or(0.0);
                let bound = self.ham.static_part.row_sum_bound() + drive_bound;
                let h = if bound > 0.0 { RK4_PHASE_PER_STEP / bound } else { f64::INFINITY };
                h.min(period_cap)
            }
            _ => period_cap,
        }
    }

    fn run_refined(
        &mut self,
        initial: &QuantumState,
        t0: f64,
        times: &[f64],
        method: Method,
    ) -> Result<(Vec<QuantumState>, usize, f64, f64)> {
        let span = times.last().copied().unwrap_or(t0) - t0;
        let mut h = self.initial_step(method);
        if !h.is_finite() {
            // no time scale from a drive: start from the whole span
            h = span.max(f64::MIN_POSITIVE);
        }
        let (mut coarse, mut total_steps) = self.run_fixed(initial, t0, times, h, method);
        let mut disagreement = f64::INFINITY;
        for _ in 0..=self.opts.max_halvings {
            h *= 0.5;
            let (fine, steps) = self.run_fixed(initial, t0, times, h, method);
            total_steps += steps;
            disagreement = match (coarse.last(), fine.last()) {
                (Some(a), Some(b)) => a.overlap_deficit(b).max(0.0),
                _ => 0.0,
            };
            coarse = fine;
            if disagreement <= self.opts.tol {
                self.step = Some(h);
                return Ok((coarse, total_steps, h, disagreement));
            }
        }
        Err(Error::Accuracy {
            achieved: disagreement,
            tol: self.opts.tol,
        })
    }

    /// Fixed-step run; each sample interval is split into equal steps no longer than `h`.
    fn run_fixed(
        &mut self,
        initial: &QuantumState,
        t0: f64,
        times: &[f64],
        h: f64,
        method: Method,
    ) -> (Vec<QuantumState>, usize) {
        let mut psi = initial.amplitudes().as_slice().to_vec();
        let mut t = t0;
        let mut steps = 0;
        let mut out = Vec::with_capacity(times.len());
        let mut scratch = Scratch::new(psi.len());
        for &ts in times {
            let span = ts - t;
            if span > 0.0 {
                let n = (span / h).ceil().max(1.0) as usize;
                let dt = span / n as f64;
                for k in 0..n {
                    let tk = t + k as f64 * dt;
                    match method {
                        Method::Rk4 => self.rk4_step(&mut psi, tk, dt, &mut scratch),
                        _ => self.cf4_step(&mut psi, tk, dt),
                    }
                }
                steps += n;
                t = ts;
            }
            out.push(QuantumState::evolved(initial.dims(), DVector::from_column_slice(&psi)));
        }
        (out, steps)
    }

    /// `y = -i H(t) x`.
    fn apply_rhs(&self, x: &[C64], t: f64, y: &mut [C64]) {
        let minus_i = C64::new(0.0, -1.0);
        y.iter_mut().for_each(|v| *v = ZERO);
        self.ham.static_part.apply_add(minus_i, x, y);
        if let Some(d) = self.ham.active_drive() {
            d.operator.apply_add(minus_i * d.coefficient(t), x, y);
        }
    }

    fn rk4_step(&self, psi: &mut [C64], t: f64, h: f64, s: &mut Scratch) {
        let n = psi.len();
        self.apply_rhs(psi, t, &mut s.k1);
        for i in 0..n {
            s.tmp[i] = psi[i] + s.k1[i] * (0.5 * h);
        }
        self.apply_rhs(&s.tmp, t + 0.5 * h, &mut s.k2);
        for i in 0..n {
            s.tmp[i] = psi[i] + s.k2[i] * (0.5 * h);
        }
        self.apply_rhs(&s.tmp, t + 0.5 * h, &mut s.k3);
        for i in 0..n {
            s.tmp[i] = psi[i] + s.k3[i] * h;
        }
        self.apply_rhs(&s.tmp, t + h, &mut s.k4);
        for i in 0..n {
            psi[i] += (s.k1[i] + (s.k2[i] + s.k3[i]) * 2.0 + s.k4[i]) * (h / 6.0);
        }
    }

    /// Fourth-order commutator-free Magnus step:
    /// `exp(-ih(a1 H(t1) + a2 H(t2))) exp(-ih(a2 H(t1) + a1 H(t2)))`.
    fn cf4_step(&mut self, psi: &mut Vec<C64>, t: f64, h: f64) {
        let r3 = 3f64.sqrt();
        let (c1, c2) = (0.5 - r3 / 6.0, 0.5 + r3 / 6.0);
        let (a1, a2) = (0.25 - r3 / 6.0, 0.25 + r3 / 6.0);
        let drive = self.ham.active_drive();
        let (f1, f2) = drive.map_or((0.0, 0.0), |d| (d.coefficient(t + c1 * h), d.coefficient(t + c2 * h)));
        let h_static = &self.ham.static_part;
        for (w1, w2) in [(a2, a1), (a1, a2)] {
            let kappa = C64::new(w1 * f1 + w2 * f2, 0.0);
            let static_weight = C64::new(w1 + w2, 0.0);
            let mut apply = |x: &[C64], y: &mut [C64]| {
                y.iter_mut().for_each(|v| *v = ZERO);
                h_static.apply_add(static_weight, x, y);
                if let Some(d) = drive {
                    d.operator.apply_add(kappa, x, y);
                }
            };
            let radius = (w1 + w2) * self.static_bound + kappa.re.abs() * self.drive_bound;
            *psi = self.chebyshev.expm(&mut apply, psi, h, 0.0, radius);
        }
    }

    fn report(
        &self,
        method: Method,
        initial: &QuantumState,
        states: &[QuantumState],
        steps: usize,
        step_size: Option<f64>,
        disagreement: Option<f64>,
    ) -> PropagationReport {
        let max_norm_drift = states
            .iter()
            .map(|s| (s.norm() - 1.0).abs())
            .fold((initial.norm() - 1.0).abs(), f64::max);
        let max_energy_drift_rel = (!self.ham.is_time_dependent()).then(|| {
            let h = &self.ham.static_part;
            let e0 = h.expectation(initial.amplitudes().as_slice()).re;
            let scale = e0.abs() + h.row_sum_bound() * 1e-3;
            states
                .iter()
                .map(|s| (h.expectation(s.amplitudes().as_slice()).re - e0).abs())
                .fold(0.0, f64::max)
                / scale.max(f64::MIN_POSITIVE)
        });
        PropagationReport {
            method,
            max_norm_drift,
            max_energy_drift_rel,
            steps_taken: steps,
            step_size,
            refinement_disagreement: disagreement,
        }
    }
}

struct Scratch {
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    tmp: Vec<C64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Self {
            k1: vec![ZERO; n],
            k2: vec![ZERO; n],
            k3: vec![ZERO; n],
            k4: vec![ZERO; n],
            tmp: vec![ZERO; n],
        }
    }
}

/// One-shot convenience wrapper around [`Propagator`].
pub fn evolve(
    initial: &QuantumState,
    ham: &Hamiltonian,
    grid: &TimeGrid,
    tol: f64,
) -> Result<(Vec<QuantumState>, PropagationReport)> {
    let mut p = Propagator::new(
        ham.clone(),
        PropagatorOptions {
            tol,
            ..Default::default()
        },
    )?;
    p.evolve(initial, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::{build_effective_oat, AcDrive};
    use crate::spin::{
        cartesian_operators, coherent_spin_state, collective_operator, embed_pair, Axis, Component,
        PairDims, SpinSpace,
    };
    use std::f64::consts::PI;

    fn css_pair(ns: usize, nj: usize, s: (f64, f64), j: (f64, f64)) -> QuantumState {
        let u = coherent_spin_state(SpinSpace::new(ns).unwrap(), s.0, s.1);
        let v = coherent_spin_state(SpinSpace::new(nj).unwrap(), j.0, j.1);
        QuantumState::product(&u, &v).unwrap()
    }

    #[test]
    fn grid_shape() {
        let g = TimeGrid::new(6.0, 4).unwrap();
        assert_eq!(g.times(), vec![0.0, 2.0, 4.0, 6.0]);
        assert!(TimeGrid::new(1.0, 0).is_err());
        assert!(TimeGrid::new(-1.0, 3).is_err());
        assert!(TimeGrid::new(0.0, 3).is_err());
        assert_eq!(TimeGrid::new(0.0, 1).unwrap().times(), vec![0.0]);
    }

    #[test]
    fn zero_hamiltonian_is_identity() {
        let psi = css_pair(3, 2, (0.4, 1.0), (2.0, -0.3));
        for integrator in [Integrator::Auto, Integrator::Rk4] {
            let ham = Hamiltonian::time_independent(Operator::zeros(12));
            let mut p = Propagator::new(ham, PropagatorOptions { integrator, ..Default::default() }).unwrap();
            let (states, _) = p.evolve(&psi, &TimeGrid::new(7.0, 5).unwrap()).unwrap();
            let d = (states.last().unwrap().amplitudes() - psi.amplitudes()).norm();
            assert!(d <= 1e-12, "{integrator:?}: {d:e}");
        }
    }

    fn larmor_check(integrator: Integrator, tol: f64, accuracy: f64) {
        let (ns, nj) = (4, 2);
        let s = SpinSpace::new(ns).unwrap();
        let j = SpinSpace::new(nj).unwrap();
        let dims = PairDims::of(s, j);
        let omega = 1.3;
        let h = embed_pair(Some(&collective_operator(s, Component::Z)), None, dims)
            .unwrap()
            .scaled(omega);
        let psi = css_pair(ns, nj, (PI / 2.0, 0.0), (0.0, 0.0));
        let sx = embed_pair(Some(&collective_operator(s, Component::X)), None, dims).unwrap();
        let grid = TimeGrid::new(5.0, 11).unwrap();
        let mut p = Propagator::new(
            Hamiltonian::time_independent(h),
            PropagatorOptions { tol, integrator, ..Default::default() },
        )
        .unwrap();
        let (states, report) = p.evolve(&psi, &grid).unwrap();
        for (t, st) in grid.times().iter().zip(&states) {
            let got = sx.expectation(st.amplitudes().as_slice()).re;
            assert!((got - 2.0 * (omega * t).cos()).abs() <= accuracy, "{integrator:?} t={t}");
        }
        assert!(report.max_norm_drift <= 1e-8);
    }

    #[test]
    fn larmor_rotation() {
        larmor_check(Integrator::Auto, 1e-10, 1e-8);
        // the halving criterion is an overlap deficit, quadratic in the amplitude error
        larmor_check(Integrator::Rk4, 1e-14, 1e-6);
    }

    #[test]
    fn oat_matches_dense_oracle() {
        // 3-dimensional brute force: exp(-i chi t Sz^2) is diagonal with phases chi m^2
        let s = SpinSpace::new(2).unwrap();
        let chi = 0.8;
        let h = build_effective_oat(chi, s, Axis::Z);
        let psi0 = coherent_spin_state(s, PI / 2.0, 0.0);
        let psi = QuantumState::single(psi0.clone()).unwrap();
        let grid = TimeGrid::new(4.0, 9).unwrap();
        for integrator in [Integrator::Auto, Integrator::Rk4] {
            let mut p = Propagator::new(
                Hamiltonian::time_independent(h.clone()),
                PropagatorOptions { tol: 1e-12, integrator, ..Default::default() },
            )
            .unwrap();
            let (states, _) = p.evolve(&psi, &grid).unwrap();
            for (t, st) in grid.times().iter().zip(&states) {
                let exact = DVector::from_iterator(
                    3,
                    (0..3).map(|k| psi0[k] * C64::from_polar(1.0, -chi * t * s.m(k).powi(2))),
                );
                let exact = QuantumState::single(exact).unwrap();
                assert!(exact.overlap_deficit(st) <= 1e-9);
            }
        }
    }

    fn driven_problem() -> (Hamiltonian, QuantumState) {
        let s = SpinSpace::new(3).unwrap();
        let j = SpinSpace::new(2).unwrap();
        let dims = PairDims::of(s, j);
        let so = cartesian_operators(s);
        let jo = cartesian_operators(j);
        let mut h = embed_pair(None, Some(&jo[2]), dims).unwrap().scaled(4.0);
        for a in 0..3 {
            h = h.add(&embed_pair(Some(&so[a]), Some(&jo[a]), dims).unwrap().scaled(0.7)).unwrap();
        }
        let drive = AcDrive {
            amplitude: 1.5,
            frequency: 2.2,
            axis: Axis::Y,
            operator: embed_pair(Some(&so[1]), None, dims).unwrap(),
        };
        (Hamiltonian::with_drive(h, drive), css_pair(3, 2, (0.0, 0.0), (1.0, 0.5)))
    }

    #[test]
    fn magnus_and_rk4_agree_on_driven_problem() {
        let (ham, psi) = driven_problem();
        let grid = TimeGrid::new(6.0, 7).unwrap();
        let run = |integrator| {
            let mut p = Propagator::new(
                ham.clone(),
                PropagatorOptions { tol: 1e-11, integrator, ..Default::default() },
            )
            .unwrap();
            p.evolve(&psi, &grid).unwrap()
        };
        let (a, ra) = run(Integrator::Auto);
        let (b, rb) = run(Integrator::Rk4);
        assert_eq!(ra.method, Method::MagnusCf4);
        assert_eq!(rb.method, Method::Rk4);
        for (x, y) in a.iter().zip(&b) {
            assert!(x.overlap_deficit(y) <= 1e-9);
        }
        assert!(ra.max_energy_drift_rel.is_none());
    }

    #[test]
    fn unconverged_halving_is_an_accuracy_error() {
        let (ham, psi) = driven_problem();
        let opts = PropagatorOptions { tol: 1e-18, max_halvings: 0, ..Default::default() };
        let mut p = Propagator::new(ham, opts).unwrap();
        let err = p.evolve(&psi, &TimeGrid::new(6.0, 3).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Accuracy { .. }), "{err}");
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn magnus_is_fourth_order() {
        let (ham, psi) = driven_problem();
        let mut p = Propagator::new(ham, PropagatorOptions::default()).unwrap();
        let t = [3.0];
        let reference = p.run_fixed(&psi, 0.0, &t, 1e-3, Method::MagnusCf4).0.remove(0);
        let err = |h: f64, p: &mut Propagator| {
            let s = p.run_fixed(&psi, 0.0, &t, h, Method::MagnusCf4).0.remove(0);
            (s.amplitudes() - reference.amplitudes()).norm()
        };
        let e1 = err(0.1, &mut p);
        let e2 = err(0.05, &mut p);
        let order = (e1 / e2).log2();
        assert!(order > 3.6 && order < 4.6, "observed order {order}");
    }

    #[test]
    fn time_reversal() {
        let (ham, psi) = driven_problem();
        // a whole number of drive periods makes the reversed drive a plain cosine again
        let t_end = 2.0 * 2.0 * PI / 2.2;
        let opts = PropagatorOptions { tol: 1e-11, ..Default::default() };
        let mut fwd = Propagator::new(ham.clone(), opts).unwrap();
        let (states, _) = fwd.evolve_times(&psi, 0.0, &[t_end]).unwrap();
        let mut back = Propagator::new(ham.negated(), opts).unwrap();
        let (ret, _) = back.evolve_times(&states[0], 0.0, &[t_end]).unwrap();
        assert!(ret[0].overlap_deficit(&psi) <= 1e-10);
    }

    #[test]
    fn energy_conserved_without_drive() {
        let (ham, psi) = driven_problem();
        let ham = Hamiltonian::time_independent(ham.static_part);
        let mut p = Propagator::new(ham, PropagatorOptions::default()).unwrap();
        let (_, r) = p.evolve(&psi, &TimeGrid::new(10.0, 21).unwrap()).unwrap();
        assert_eq!(r.method, Method::Eigen);
        assert!(r.max_energy_drift_rel.unwrap() <= 1e-10);
        assert!(r.max_norm_drift <= 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let (ham, _) = driven_problem();
        let mut p = Propagator::new(ham, PropagatorOptions::default()).unwrap();
        let wrong = css_pair(2, 2, (0.0, 0.0), (0.0, 0.0));
        assert!(matches!(
            p.evolve(&wrong, &TimeGrid::new(1.0, 2).unwrap()),
            Err(Error::DimensionMismatch { .. })
        ));
        let (_, psi) = driven_problem();
        assert!(p.evolve_times(&psi, 0.0, &[1.0, 0.5]).is_err());
    }
}
