//! Polynomial approximations of `exp(-i τ A) v` for Hermitian `A` given only as a
//! matrix-vector product: adaptive Lanczos, and a Chebyshev expansion for when a
//! spectral bound is known.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

fn dotc(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// `exp(-i τ T) e_1` for the symmetric tridiagonal `T = tridiag(beta, alpha, beta)`.
fn tridiagonal_expm_e1(alpha: &[f64], beta: &[f64], tau: f64) -> Vec<C64> {
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for k in 0..m {
        t[(k, k)] = alpha[k];
        if k + 1 < m {
            t[(k, k + 1)] = beta[k];
            t[(k + 1, k)] = beta[k];
        }
    }
    let eig = SymmetricEigen::new(t);
    let q = &eig.eigenvectors;
    let coeffs: Vec<C64> = (0..m)
        .map(|k| C64::from_polar(1.0, -tau * eig.eigenvalues[k]) * q[(0, k)])
        .collect();
    (0..m)
        .map(|i| (0..m).map(|k| coeffs[k] * q[(i, k)]).sum())
        .collect()
}

/// Reusable Lanczos exponentiator with adaptive subdivision.
#[derive(Clone, Debug)]
pub struct Lanczos {
    max_dim: usize,
    tol: f64,
    /// Dimension at which the last successful call converged.
    dim_hint: usize,
    /// Largest sub-interval known to converge.
    tau_hint: f64,
    matvecs: usize,
}

impl Lanczos {
    pub fn new(max_dim: usize, tol: f64) -> Self {
        assert!(max_dim >= 2);
        Self {
            max_dim,
            tol,
            dim_hint: 6.min(max_dim),
            tau_hint: f64::INFINITY,
            matvecs: 0,
        }
    }

    /// Total matrix-vector products performed so far.
    pub fn matvecs(&self) -> usize {
        self.matvecs
    }

    /// One Krylov solve of `exp(-i τ A) v`; `None` when `max_dim` vectors do not reach `tol`.
    pub fn try_expm<F>(&mut self, apply: &mut F, v: &[C64], tau: f64) -> Option<Vec<C64>>
    where
        F: FnMut(&[C64], &mut [C64]),
    {
        let n = v.len();
        let beta0 = norm(v);
        if beta0 == 0.0 || tau == 0.0 {
            return Some(v.to_vec());
        }
        let mut basis: Vec<Vec<C64>> = Vec::with_capacity(self.max_dim);
        basis.push(v.iter().map(|x| x / beta0).collect());
        let mut alpha: Vec<f64> = Vec::with_capacity(self.max_dim);
        let mut beta: Vec<f64> = Vec::with_capacity(self.max_dim);
        let mut w = vec![ZERO; n];
        let mut next_check = self.dim_hint.max(2);
        for k in 0..self.max_dim {
            apply(&basis[k], &mut w);
            self.matvecs += 1;
            let a = dotc(&basis[k], &w).re;
            for (wi, vi) in w.iter_mut().zip(&basis[k]) {
                *wi -= vi * a;
            }
            if k > 0 {
                let b = beta[k - 1];
                for (wi, vi) in w.iter_mut().zip(&basis[k - 1]) {
                    *wi -= vi * b;
                }
            }
            // one local reorthogonalization pass against the last two vectors
            for back in basis.iter().rev().take(2) {
                let c = dotc(back, &w);
                for (wi, vi) in w.iter_mut().zip(back) {
                    *wi -= vi * c;
                }
            }
            alpha.push(a);
            let b = norm(&w);
            let m = k + 1;
            let breakdown = b <= 1e-14 * (a.abs() + alpha.iter().map(|x| x.abs()).fold(0.0, f64::max));
            if breakdown || m >= next_check || m == self.max_dim {
                let y = tridiagonal_expm_e1(&alpha, &beta, tau);
                let err = beta0 * b * y[m - 1].norm();
                if breakdown || err <= self.tol {
                    self.dim_hint = m;
                    let mut out = vec![ZERO; n];
                    for (yk, vk) in y.iter().zip(&basis) {
                        let c = yk * beta0;
                        for (o, x) in out.iter_mut().zip(vk) {
                            *o += x * c;
                        }
                    }
                    return Some(out);
                }
                next_check = m + 4;
            }
            beta.push(b);
            basis.push(w.iter().map(|x| x / b).collect());
        }
        None
    }

    /// `exp(-i τ A) v`, splitting `τ` into sub-intervals until each Krylov solve converges.
    pub fn expm<F>(&mut self, apply: &mut F, v: &[C64], tau: f64) -> Vec<C64>
    where
        F: FnMut(&[C64], &mut [C64]),
    {
        let mut state = v.to_vec();
        let mut remaining = tau;
        let sign = tau.signum();
        while remaining.abs() > 0.0 {
            let step = if remaining.abs() <= self.tau_hint {
                remaining
            } else {
                sign * self.tau_hint
            };
            match self.try_expm(apply, &state, step) {
                Some(next) => {
                    state = next;
                    remaining -= step;
                    if remaining.abs() < 1e-15 * tau.abs() {
                        remaining = 0.0;
                    }
                }
                None => {
                    self.tau_hint = 0.5 * step.abs();
                    self.dim_hint = 6.min(self.max_dim);
                }
            }
        }
        state
    }
}

/// `J_k(x)` for `k = 0..=kmax` by Miller's backward recurrence, normalized with
/// `J_0 + 2 sum J_2k = 1`.
pub fn bessel_j_sequence(x: f64, kmax: usize) -> Vec<f64> {
    let mut out = vec![0.0; kmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let start = kmax.max(x.abs() as usize) + 30 + (40.0 * x.abs().max(1.0)).sqrt() as usize;
    let start = start + start % 2;
    let (mut next, mut cur) = (0.0f64, 1e-300f64);
    let mut norm = 0.0;
    for k in (0..=start).rev() {
        if k <= kmax {
            out[k] = cur;
        }
        if k % 2 == 0 {
            norm += if k == 0 { cur } else { 2.0 * cur };
        }
        if k == 0 {
            break;
        }
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        if cur.abs() > 1e250 {
            // rescale to stay in range
            let s = 1e-250;
            cur *= s;
            next *= s;
            norm *= s;
            out.iter_mut().skip(k).for_each(|v| *v *= s);
        }
    }
    out.iter_mut().for_each(|v| *v /= norm);
    out
}

/// Chebyshev expansion of `exp(-i τ A) v` for Hermitian `A` with spectrum in
/// `[center - radius, center + radius]`.
#[derive(Clone, Debug)]
pub struct Chebyshev {
    tol: f64,
    matvecs: usize,
}

impl Chebyshev {
    pub fn new(tol: f64) -> Self {
        Self { tol, matvecs: 0 }
    }

    pub fn matvecs(&self) -> usize {
        self.matvecs
    }

    pub fn expm<F>(&mut self, apply: &mut F, v: &[C64], tau: f64, center: f64, radius: f64) -> Vec<C64>
    where
        F: FnMut(&[C64], &mut [C64]),
    {
        let n = v.len();
        let x = tau * radius;
        if x == 0.0 || radius == 0.0 {
            let ph = C64::from_polar(1.0, -tau * center);
            return v.iter().map(|a| a * ph).collect();
        }
        // J_k(|x|) decays faster than geometrically once k exceeds |x|
        let kmax = (x.abs() + 10.0 * x.abs().cbrt() + 20.0) as usize;
        let coef = bessel_j_sequence(x.abs(), kmax);
        let nterms = (0..=kmax)
            .rev()
            .find(|&k| coef[k].abs() > self.tol)
            .map_or(1, |k| k + 2)
            .min(kmax + 1);
        // scaled operator (A - center)/radius
        let mut scaled = |src: &[C64], dst: &mut [C64]| {
            apply(src, dst);
            for (d, s) in dst.iter_mut().zip(src) {
                *d = (*d - s * center) / radius;
            }
        };
        let mut prev = v.to_vec();
        let mut cur = vec![ZERO; n];
        let mut out: Vec<C64> = v.iter().map(|a| a * coef[0]).collect();
        if nterms > 1 {
            scaled(&prev, &mut cur);
            self.matvecs += 1;
            // (-i)^k, with the sign of τ folded in: J_k(-x) = (-1)^k J_k(x)
            let unit = if x > 0.0 { C64::new(0.0, -1.0) } else { C64::new(0.0, 1.0) };
            let mut phase = unit;
            let c = phase * (2.0 * coef[1]);
            out.iter_mut().zip(&cur).for_each(|(o, a)| *o += a * c);
            let mut next = vec![ZERO; n];
            for k in 2..nterms {
                scaled(&cur, &mut next);
                self.matvecs += 1;
                for (nx, p) in next.iter_mut().zip(&prev) {
                    *nx = *nx * 2.0 - p;
                }
                phase *= unit;
                let c = phase * (2.0 * coef[k]);
                out.iter_mut().zip(&next).for_each(|(o, a)| *o += a * c);
                std::mem::swap(&mut prev, &mut cur);
                std::mem::swap(&mut cur, &mut next);
            }
        }
        let ph = C64::from_polar(1.0, -tau * center);
        out.iter_mut().for_each(|o| *o *= ph);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn hermitian(n: usize, seed: u64) -> DMatrix<C64> {
        let mut s = seed;
        let mut rnd = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let a = DMatrix::from_fn(n, n, |_, _| C64::new(rnd(), rnd()));
        (&a + a.adjoint()) * C64::new(0.5, 0.0)
    }

    fn dense_expm(h: &DMatrix<C64>, v: &DVector<C64>, tau: f64) -> DVector<C64> {
        let eig = h.clone().symmetric_eigen();
        let u = &eig.eigenvectors;
        let c = u.adjoint() * v;
        let phased = DVector::from_iterator(
            c.len(),
            c.iter().zip(eig.eigenvalues.iter()).map(|(ci, e)| ci * C64::from_polar(1.0, -tau * e)),
        );
        u * phased
    }

    #[test]
    fn matches_dense_exponential() {
        let n = 60;
        let h = hermitian(n, 7) * C64::new(10.0, 0.0);
        let v = DVector::from_fn(n, |i, _| C64::new((i as f64).sin(), (i as f64 * 0.3).cos()));
        let v = &v / C64::new(v.norm(), 0.0);
        let mut lz = Lanczos::new(40, 1e-13);
        let mut apply = |x: &[C64], y: &mut [C64]| {
            let r = &h * DVector::from_column_slice(x);
            y.copy_from_slice(r.as_slice());
        };
        for tau in [0.01, 0.3, 2.5, -1.7] {
            let got = lz.expm(&mut apply, v.as_slice(), tau);
            let want = dense_expm(&h, &v, tau);
            let err = (DVector::from_vec(got) - want).norm();
            assert!(err < 1e-10, "tau {tau}: err {err:e}");
        }
    }

    #[test]
    fn invariant_subspace_breakdown() {
        // v is an eigenvector: Lanczos stops after one vector
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![C64::new(2.0, 0.0), C64::new(-1.0, 0.0)]));
        let mut apply = |x: &[C64], y: &mut [C64]| {
            let r = &h * DVector::from_column_slice(x);
            y.copy_from_slice(r.as_slice());
        };
        let mut lz = Lanczos::new(10, 1e-14);
        let out = lz.try_expm(&mut apply, &[C64::new(1.0, 0.0), ZERO], 0.5).unwrap();
        assert!((out[0] - C64::from_polar(1.0, -1.0)).norm() < 1e-14);
        assert_eq!(lz.matvecs(), 1);
    }

    #[test]
    fn bessel_sequence_matches_series() {
        for x in [0.0, 0.5, 3.0, 11.0] {
            let seq = bessel_j_sequence(x, 30);
            let j0 = crate::special::bessel_j0(x).unwrap();
            assert!((seq[0] - j0).abs() < 1e-12, "x={x}");
        }
        // J_1 from the integral (1/π) ∫ cos(τ - x sin τ) dτ
        let x = 150.0;
        let seq = bessel_j_sequence(x, 200);
        let n = 4000;
        let h = std::f64::consts::PI / n as f64;
        for k in [0usize, 1, 7, 149, 160] {
            let f = |t: f64| (k as f64 * t - x * t.sin()).cos();
            let mut s = 0.5 * (f(0.0) + f(std::f64::consts::PI));
            for i in 1..n {
                s += f(i as f64 * h);
            }
            let want = s * h / std::f64::consts::PI;
            assert!((seq[k] - want).abs() < 1e-12, "k={k}: {} vs {want}", seq[k]);
        }
    }

    #[test]
    fn chebyshev_matches_dense_exponential() {
        let n = 50;
        let h = hermitian(n, 11) * C64::new(30.0, 0.0);
        let v = DVector::from_fn(n, |i, _| C64::new((i as f64 * 0.7).cos(), 0.1 * i as f64));
        let v = &v / C64::new(v.norm(), 0.0);
        let mut apply = |x: &[C64], y: &mut [C64]| {
            let r = &h * DVector::from_column_slice(x);
            y.copy_from_slice(r.as_slice());
        };
        let bound = h.row_iter().map(|r| r.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
        let mut ch = Chebyshev::new(1e-15);
        for (tau, center) in [(0.01, 0.0), (0.7, 3.0), (-2.0, -1.0)] {
            let got = ch.expm(&mut apply, v.as_slice(), tau, center, bound + center.abs());
            let want = dense_expm(&h, &v, tau);
            let err = (DVector::from_vec(got) - want).norm();
            assert!(err < 1e-11, "tau {tau}: err {err:e}");
        }
    }
}
