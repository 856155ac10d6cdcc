//! Mean spin, Kitagawa–Ueda squeezing parameter, Husimi Q maps and optimum search.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, Matrix3, Vector3};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::exec;
use crate::spin::{
    cartesian_operators, coherent_spin_state, partial_trace_s, DensityMatrix, Operator,
    QuantumState, SpinSpace,
};

/// First and symmetrized second moments of the collective spin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinMoments {
    pub mean: Vector3<f64>,
    /// `<(S_a S_b + S_b S_a)/2>`.
    pub second: Matrix3<f64>,
}

impl SpinMoments {
    pub fn covariance(&self) -> Matrix3<f64> {
        self.second - self.mean * self.mean.transpose()
    }

    /// Variance of `u . S` for a unit vector `u`.
    pub fn variance_along(&self, u: &Vector3<f64>) -> f64 {
        (u.transpose() * self.covariance() * u)[(0, 0)]
    }

    /// Orthonormal pair spanning the plane perpendicular to the mean spin.
    pub fn transverse_basis(&self, n_particles: usize) -> Result<(Vector3<f64>, Vector3<f64>)> {
        let len = self.mean.norm();
        if !(len > 1e-9 * 0.5 * n_particles as f64) {
            return Err(Error::UndefinedDirection(len));
        }
        let n = self.mean / len;
        // the Cartesian axis least aligned with n
        let k = n.iamin();
        let mut e = Vector3::zeros();
        e[k] = 1.0;
        let n1 = (e - n * n.dot(&e)).normalize();
        let n2 = n.cross(&n1);
        Ok((n1, n2))
    }

    /// `(ΔS_⊥)²_min`, the smaller eigenvalue of the transverse 2x2 covariance.
    pub fn min_transverse_variance(&self, n_particles: usize) -> Result<f64> {
        let (n1, n2) = self.transverse_basis(n_particles)?;
        let cov = self.covariance();
        let a = (n1.transpose() * cov * n1)[(0, 0)];
        let c = (n2.transpose() * cov * n2)[(0, 0)];
        let b = (n1.transpose() * cov * n2)[(0, 0)];
        let mid = 0.5 * (a + c);
        let half = 0.5 * (a - c);
        Ok(mid - (half * half + b * b).sqrt())
    }

    /// `ξ² = 4 (ΔS_⊥)²_min / N`.
    pub fn xi2(&self, n_particles: usize) -> Result<f64> {
        Ok(4.0 * self.min_transverse_variance(n_particles)? / n_particles as f64)
    }
}

/// Collective operators of one ensemble, cached for repeated moment evaluation.
#[derive(Clone, Debug)]
pub struct SpinObservables {
    space: SpinSpace,
    ops: [Operator; 3],
    anti: Vec<Operator>,
}

impl SpinObservables {
    pub fn new(space: SpinSpace) -> Self {
        let ops = cartesian_operators(space);
        let dense: Vec<DMatrix<C64>> = ops.iter().map(|o| o.to_dense()).collect();
        let mut anti = Vec::with_capacity(6);
        for a in 0..3 {
            for b in a..3 {
                let m = (&dense[a] * &dense[b] + &dense[b] * &dense[a]) * C64::new(0.5, 0.0);
                anti.push(Operator::from_dense(m, true).sparsified());
            }
        }
        Self { space, ops, anti }
    }

    pub fn space(&self) -> SpinSpace {
        self.space
    }

    fn check(&self, rho: &DensityMatrix) -> Result<()> {
        if rho.dim() != self.space.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.space.dim(),
                found: rho.dim(),
            });
        }
        Ok(())
    }

    pub fn mean_spin(&self, rho: &DensityMatrix) -> Result<Vector3<f64>> {
        self.check(rho)?;
        Ok(Vector3::from_fn(|a, _| rho.expectation(&self.ops[a]).re))
    }

    pub fn moments(&self, rho: &DensityMatrix) -> Result<SpinMoments> {
        let mean = self.mean_spin(rho)?;
        let mut second = Matrix3::zeros();
        let mut k = 0;
        for a in 0..3 {
            for b in a..3 {
                let v = rho.expectation(&self.anti[k]).re;
                second[(a, b)] = v;
                second[(b, a)] = v;
                k += 1;
            }
        }
        Ok(SpinMoments { mean, second })
    }

    /// Moments of the S factor of a joint pure state.
    pub fn state_moments(&self, state: &QuantumState) -> Result<SpinMoments> {
        self.moments(&partial_trace_s(state)?)
    }

    pub fn xi2(&self, rho: &DensityMatrix) -> Result<f64> {
        self.moments(rho)?.xi2(self.space.n_particles())
    }
}

/// `(<S_x>, <S_y>, <S_z>)` of a reduced state.
pub fn mean_spin(rho: &DensityMatrix, space: SpinSpace) -> Result<Vector3<f64>> {
    SpinObservables::new(space).mean_spin(rho)
}

/// Kitagawa–Ueda squeezing parameter of a reduced state.
pub fn squeezing_parameter(rho: &DensityMatrix, space: SpinSpace) -> Result<f64> {
    SpinObservables::new(space).xi2(rho)
}

/// Squeezing parameter and mean spin sampled along a trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct SqueezingTrace {
    pub times: Vec<f64>,
    pub xi2: Vec<f64>,
    pub mean_spin: Vec<[f64; 3]>,
    pub norm_err: Vec<f64>,
    pub xi2_min: f64,
    pub t_min: f64,
    pub boundary_minimum: bool,
}

impl SqueezingTrace {
    /// Measures every state; the optimum is taken from the samples until [`Self::set_optimum`].
    pub fn from_states(
        obs: &SpinObservables,
        times: &[f64],
        states: &[QuantumState],
    ) -> Result<Self> {
        if times.len() != states.len() || times.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "{} times for {} states",
                times.len(),
                states.len()
            )));
        }
        let n = obs.space().n_particles();
        let mut xi2 = Vec::with_capacity(times.len());
        let mut mean_spin = Vec::with_capacity(times.len());
        let mut norm_err = Vec::with_capacity(times.len());
        for st in states {
            let m = obs.state_moments(st)?;
            xi2.push(m.xi2(n)?);
            mean_spin.push([m.mean[0], m.mean[1], m.mean[2]]);
            norm_err.push((st.norm() - 1.0).abs());
        }
        let k = argmin(&xi2);
        Ok(Self {
            times: times.to_vec(),
            xi2_min: xi2[k],
            t_min: times[k],
            boundary_minimum: k == 0 || k + 1 == times.len(),
            xi2,
            mean_spin,
            norm_err,
        })
    }

    pub fn set_optimum(&mut self, opt: &Optimum) {
        self.xi2_min = opt.xi2_min;
        self.t_min = opt.t_min;
        self.boundary_minimum = opt.boundary_minimum;
    }

    /// CSV with header `t,xi2,sx,sy,sz,norm_err`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,xi2,sx,sy,sz,norm_err")?;
        for k in 0..self.times.len() {
            let [sx, sy, sz] = self.mean_spin[k];
            writeln!(
                w,
                "{},{},{},{},{},{}",
                fmt_float(self.times[k]),
                fmt_float(self.xi2[k]),
                fmt_float(sx),
                fmt_float(sy),
                fmt_float(sz),
                fmt_float(self.norm_err[k])
            )?;
        }
        Ok(())
    }
}

/// 17 significant digits in scientific notation.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn argmin(v: &[f64]) -> usize {
    let mut k = 0;
    for (i, x) in v.iter().enumerate() {
        if *x < v[k] {
            k = i;
        }
    }
    k
}

/// Located minimum of a sampled trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Optimum {
    pub xi2_min: f64,
    pub t_min: f64,
    /// The coarse minimum sat on the first or last sample.
    pub boundary_minimum: bool,
    pub evaluations: usize,
}

/// Relative time tolerance of the golden-section refinement.
pub const OPTIMUM_TIME_RTOL: f64 = 1e-3;

/// Coarse minimum of `(times, values)` refined by golden-section search on the
/// bracketing interval; `sample(t)` evaluates the trace at an arbitrary time.
pub fn find_optimal_squeezing<F>(
    times: &[f64],
    values: &[f64],
    mut sample: F,
    refine: bool,
) -> Result<Optimum>
where
    F: FnMut(f64) -> Result<f64>,
{
    if times.len() != values.len() || times.is_empty() {
        return Err(Error::InvalidArgument(
            "optimum search needs equally long, non-empty time and value series".into(),
        ));
    }
    let k = argmin(values);
    let boundary = k == 0 || k + 1 == times.len();
    let mut best = (values[k], times[k]);
    let mut evaluations = 0;
    if refine && times.len() >= 3 {
        let mut a = times[k.saturating_sub(1)];
        let mut b = times[(k + 1).min(times.len() - 1)];
        let scale = if times[k] > 0.0 { times[k] } else { b - a };
        let tol = OPTIMUM_TIME_RTOL * scale;
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let mut fc = sample(c)?;
        let mut fd = sample(d)?;
        evaluations += 2;
        for (f, t) in [(fc, c), (fd, d)] {
            if f < best.0 {
                best = (f, t);
            }
        }
        while b - a > tol {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = sample(c)?;
                if fc < best.0 {
                    best = (fc, c);
                }
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = sample(d)?;
                if fd < best.0 {
                    best = (fd, d);
                }
            }
            evaluations += 1;
        }
    }
    Ok(Optimum {
        xi2_min: best.0,
        t_min: best.1,
        boundary_minimum: boundary,
        evaluations,
    })
}

/// Husimi Q function sampled on a `θ × φ` grid.
#[derive(Clone, Debug, PartialEq)]
pub struct HusimiMap {
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    /// `values[(i, k)] = Q(theta[i], phi[k])`.
    pub values: DMatrix<f64>,
    twice_j: usize,
}

/// Default Husimi grid.
pub const HUSIMI_N_THETA: usize = 121;
pub const HUSIMI_N_PHI: usize = 241;

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| if k + 1 == n { hi } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 })
        .collect()
}

fn trapezoid_weights(n: usize, step: f64) -> Vec<f64> {
    (0..n)
        .map(|k| if k == 0 || k + 1 == n { 0.5 * step } else { step })
        .collect()
}

impl HusimiMap {
    /// `(2j+1)/(4π) Σ Q sinθ ΔθΔφ` with trapezoid weights in both angles.
    pub fn normalization(&self) -> f64 {
        let nt = self.theta.len();
        let np = self.phi.len();
        let wt = trapezoid_weights(nt, PI / (nt - 1) as f64);
        let wp = trapezoid_weights(np, 2.0 * PI / (np - 1) as f64);
        let mut total = 0.0;
        for i in 0..nt {
            let s = self.theta[i].sin() * wt[i];
            for k in 0..np {
                total += self.values[(i, k)] * s * wp[k];
            }
        }
        (self.twice_j as f64 + 1.0) / (4.0 * PI) * total
    }

    /// CSV with header `theta,phi,q_value`, θ-major.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "theta,phi,q_value")?;
        for (i, th) in self.theta.iter().enumerate() {
            for (k, ph) in self.phi.iter().enumerate() {
                writeln!(
                    w,
                    "{},{},{}",
                    fmt_float(*th),
                    fmt_float(*ph),
                    fmt_float(self.values[(i, k)])
                )?;
            }
        }
        Ok(())
    }
}

/// `Q(θ, φ) = <θ,φ|ρ|θ,φ>` on a uniform grid, θ ∈ [0, π], φ ∈ [0, 2π] (both inclusive).
pub fn husimi_q(
    rho: &DensityMatrix,
    space: SpinSpace,
    n_theta: usize,
    n_phi: usize,
) -> Result<HusimiMap> {
    husimi_q_with_workers(rho, space, n_theta, n_phi, None)
}

pub fn husimi_q_with_workers(
    rho: &DensityMatrix,
    space: SpinSpace,
    n_theta: usize,
    n_phi: usize,
    workers: Option<usize>,
) -> Result<HusimiMap> {
    if n_theta < 2 || n_phi < 2 {
        return Err(Error::InvalidArgument(format!(
            "Husimi grid must be at least 2x2, got {n_theta}x{n_phi}"
        )));
    }
    if rho.dim() != space.dim() {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            found: rho.dim(),
        });
    }
    let theta = linspace(0.0, PI, n_theta);
    let phi = linspace(0.0, 2.0 * PI, n_phi);
    let m = rho.entries();
    let rows = exec::map(&theta, workers, |&th| {
        phi.iter()
            .map(|&ph| {
                let v = coherent_spin_state(space, th, ph);
                let q = v.dotc(&(m * &v)).re;
                q.max(0.0)
            })
            .collect::<Vec<f64>>()
    })?;
    let values = DMatrix::from_fn(n_theta, n_phi, |i, k| rows[i][k]);
    Ok(HusimiMap {
        theta,
        phi,
        values,
        twice_j: space.twice_j(),
    })
}
