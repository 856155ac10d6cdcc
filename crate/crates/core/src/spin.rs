//! Collective spin algebra in the symmetric Dicke sector.
//!
//! Every space is the maximal-`j` sector of `N` spin-1/2 particles, with basis
//! `|j, m>` ordered by descending `m` (index 0 holds `m = +j`). Joint states of
//! the two subsystems put the S factor first: the amplitude of `|s>|j>` sits at
//! index `s * dim_j + j`.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Largest single-factor dimension that is stored densely.
pub const DENSE_FACTOR_LIMIT: usize = 64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Maximal-`j` sector of `n_particles` spin-1/2 constituents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SpinSpace {
    n_particles: usize,
}

impl SpinSpace {
    pub fn new(n_particles: usize) -> Result<Self> {
        if n_particles == 0 {
            return Err(Error::InvalidArgument(
                "a spin space needs at least one particle".into(),
            ));
        }
        Ok(Self { n_particles })
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    /// `2j`, exact.
    pub fn twice_j(&self) -> usize {
        self.n_particles
    }

    pub fn j(&self) -> f64 {
        self.n_particles as f64 / 2.0
    }

    pub fn dim(&self) -> usize {
        self.n_particles + 1
    }

    /// Magnetic quantum number stored at basis index `k`.
    pub fn m(&self, k: usize) -> f64 {
        (self.n_particles as f64 - 2.0 * k as f64) / 2.0
    }
}

/// Convenience constructor mirroring [`SpinSpace::new`].
pub fn make_spin_space(n_particles: i64) -> Result<SpinSpace> {
    if n_particles <= 0 {
        return Err(Error::InvalidArgument(format!(
            "particle number must be positive, got {n_particles}"
        )));
    }
    SpinSpace::new(n_particles as usize)
}

/// Cartesian axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }

    pub fn parse(s: &str) -> Option<Axis> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" => Some(Axis::X),
            "y" => Some(Axis::Y),
            "z" => Some(Axis::Z),
            _ => None,
        }
    }

    /// The axis orthogonal to both `self` and `other` (which must differ).
    pub fn third(self, other: Axis) -> Axis {
        match 3 - self.index() - other.index() {
            0 => Axis::X,
            1 => Axis::Y,
            _ => Axis::Z,
        }
    }
}

/// Spin component selector for [`collective_operator`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Component {
    X,
    Y,
    Z,
    Plus,
    Minus,
}

impl From<Axis> for Component {
    fn from(a: Axis) -> Self {
        match a {
            Axis::X => Component::X,
            Axis::Y => Component::Y,
            Axis::Z => Component::Z,
        }
    }
}

#[derive(Clone, Debug)]
enum Repr {
    Dense(DMatrix<C64>),
    Sparse(CsrMatrix<C64>),
}

/// Complex square matrix acting on a spin space or a product of two.
#[derive(Clone, Debug)]
pub struct Operator {
    repr: Repr,
    hermitian: bool,
}

impl Operator {
    pub fn from_dense(m: DMatrix<C64>, hermitian: bool) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "operators are square");
        Self {
            repr: Repr::Dense(m),
            hermitian,
        }
    }

    pub fn from_sparse(m: CsrMatrix<C64>, hermitian: bool) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "operators are square");
        Self {
            repr: Repr::Sparse(m),
            hermitian,
        }
    }

    /// Builds a sparse operator from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, C64)], hermitian: bool) -> Self {
        let mut coo = CooMatrix::new(dim, dim);
        for &(r, c, v) in triplets {
            if v != ZERO {
                coo.push(r, c, v);
            }
        }
        Self::from_sparse(CsrMatrix::from(&coo), hermitian)
    }

    pub fn identity(dim: usize) -> Self {
        if dim <= DENSE_FACTOR_LIMIT {
            Self::from_dense(DMatrix::identity(dim, dim), true)
        } else {
            Self::from_sparse(CsrMatrix::identity(dim), true)
        }
    }

    pub fn zeros(dim: usize) -> Self {
        if dim <= DENSE_FACTOR_LIMIT {
            Self::from_dense(DMatrix::zeros(dim, dim), true)
        } else {
            Self::from_sparse(CsrMatrix::zeros(dim, dim), true)
        }
    }

    pub fn dim(&self) -> usize {
        match &self.repr {
            Repr::Dense(m) => m.nrows(),
            Repr::Sparse(m) => m.nrows(),
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.repr, Repr::Sparse(_))
    }

    /// Hermiticity metadata carried from construction.
    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        match &self.repr {
            Repr::Dense(m) => m.clone(),
            Repr::Sparse(m) => {
                let mut d = DMatrix::zeros(m.nrows(), m.ncols());
                for (r, c, v) in m.triplet_iter() {
                    d[(r, c)] += *v;
                }
                d
            }
        }
    }

    pub fn to_sparse(&self) -> CsrMatrix<C64> {
        match &self.repr {
            Repr::Sparse(m) => m.clone(),
            Repr::Dense(_) => {
                let t: Vec<_> = self.nonzeros().collect();
                Self::from_triplets(self.dim(), &t, self.hermitian).to_sparse()
            }
        }
    }

    /// Sparse copy of this operator.
    pub fn sparsified(&self) -> Operator {
        Operator::from_sparse(self.to_sparse(), self.hermitian)
    }

    /// Iterates over stored nonzero entries as `(row, col, value)`.
    pub fn nonzeros(&self) -> Box<dyn Iterator<Item = (usize, usize, C64)> + '_> {
        match &self.repr {
            Repr::Dense(m) => Box::new((0..m.ncols()).flat_map(move |c| {
                (0..m.nrows()).filter_map(move |r| {
                    let v = m[(r, c)];
                    (v != ZERO).then_some((r, c, v))
                })
            })),
            Repr::Sparse(m) => Box::new(m.triplet_iter().map(|(r, c, v)| (r, c, *v))),
        }
    }

    pub fn entry(&self, r: usize, c: usize) -> C64 {
        match &self.repr {
            Repr::Dense(m) => m[(r, c)],
            Repr::Sparse(m) => m
                .get_entry(r, c)
                .map(|e| e.into_value())
                .unwrap_or(ZERO),
        }
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.nonzeros().map(|(_, _, v)| v.norm()).fold(0.0, f64::max)
    }

    /// `max |M - M^dagger|` over all entries.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.to_dense();
        let mut err: f64 = 0.0;
        for r in 0..d.nrows() {
            for c in 0..d.ncols() {
                err = err.max((d[(r, c)] - d[(c, r)].conj()).norm());
            }
        }
        err
    }

    /// Maximum absolute row sum, an upper bound on the spectral norm of a Hermitian matrix.
    pub fn row_sum_bound(&self) -> f64 {
        match &self.repr {
            Repr::Dense(m) => m
                .row_iter()
                .map(|r| r.iter().map(|v| v.norm()).sum::<f64>())
                .fold(0.0, f64::max),
            Repr::Sparse(m) => m
                .row_iter()
                .map(|r| r.values().iter().map(|v| v.norm()).sum::<f64>())
                .fold(0.0, f64::max),
        }
    }

    /// True when every entry has zero imaginary part.
    pub fn is_real(&self) -> bool {
        self.nonzeros().all(|(_, _, v)| v.im == 0.0)
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        y.iter_mut().for_each(|v| *v = ZERO);
        self.apply_add(ONE, x, y);
    }

    /// `y += alpha * A x`.
    pub fn apply_add(&self, alpha: C64, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.dim());
        debug_assert_eq!(y.len(), self.dim());
        match &self.repr {
            Repr::Dense(m) => {
                for c in 0..m.ncols() {
                    let xc = alpha * x[c];
                    if xc == ZERO {
                        continue;
                    }
                    for (yr, mv) in y.iter_mut().zip(m.column(c).iter()) {
                        *yr += mv * xc;
                    }
                }
            }
            Repr::Sparse(m) => {
                let (offsets, cols, vals) = m.csr_data();
                for (r, yr) in y.iter_mut().enumerate() {
                    let mut acc = ZERO;
                    for k in offsets[r]..offsets[r + 1] {
                        acc += vals[k] * x[cols[k]];
                    }
                    *yr += alpha * acc;
                }
            }
        }
    }

    pub fn apply_vec(&self, x: &DVector<C64>) -> DVector<C64> {
        let mut y = DVector::zeros(x.len());
        self.apply(x.as_slice(), y.as_mut_slice());
        y
    }

    /// `<x|A|x>`.
    pub fn expectation(&self, x: &[C64]) -> C64 {
        let mut y = vec![ZERO; x.len()];
        self.apply(x, &mut y);
        x.iter().zip(&y).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn scaled(&self, s: f64) -> Operator {
        let repr = match &self.repr {
            Repr::Dense(m) => Repr::Dense(m * C64::new(s, 0.0)),
            Repr::Sparse(m) => Repr::Sparse(m * C64::new(s, 0.0)),
        };
        Operator {
            repr,
            hermitian: self.hermitian,
        }
    }

    pub fn scaled_complex(&self, s: C64) -> Operator {
        let repr = match &self.repr {
            Repr::Dense(m) => Repr::Dense(m * s),
            Repr::Sparse(m) => Repr::Sparse(m * s),
        };
        Operator {
            repr,
            hermitian: self.hermitian && s.im == 0.0,
        }
    }

    /// `self + other`; the result is sparse if either operand is.
    pub fn add(&self, other: &Operator) -> Result<Operator> {
        self.check_dim(other)?;
        let hermitian = self.hermitian && other.hermitian;
        Ok(match (&self.repr, &other.repr) {
            (Repr::Dense(a), Repr::Dense(b)) => Operator::from_dense(a + b, hermitian),
            _ => Operator::from_sparse(&self.to_sparse() + &other.to_sparse(), hermitian),
        })
    }

    pub fn sub(&self, other: &Operator) -> Result<Operator> {
        self.add(&other.scaled(-1.0))
    }

    /// Matrix product `self * other`. The Hermitian flag is not propagated.
    pub fn matmul(&self, other: &Operator) -> Result<Operator> {
        self.check_dim(other)?;
        Ok(match (&self.repr, &other.repr) {
            (Repr::Dense(a), Repr::Dense(b)) => Operator::from_dense(a * b, false),
            _ => Operator::from_sparse(&self.to_sparse() * &other.to_sparse(), false),
        })
    }

    /// Commutator `[self, other]`.
    pub fn commutator(&self, other: &Operator) -> Result<Operator> {
        self.matmul(other)?.sub(&other.matmul(self)?)
    }

    pub fn adjoint(&self) -> Operator {
        let repr = match &self.repr {
            Repr::Dense(m) => Repr::Dense(m.adjoint()),
            Repr::Sparse(m) => {
                let t: Vec<_> = m
                    .triplet_iter()
                    .map(|(r, c, v)| (c, r, v.conj()))
                    .collect();
                return Operator::from_triplets(self.dim(), &t, self.hermitian);
            }
        };
        Operator {
            repr,
            hermitian: self.hermitian,
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|k| self.entry(k, k)).sum()
    }

    /// `max |A - B|` entrywise.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        (self.to_dense() - other.to_dense())
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    fn check_dim(&self, other: &Operator) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }
}

/// Collective angular-momentum matrix for `space` in the descending-`m` basis.
pub fn collective_operator(space: SpinSpace, component: Component) -> Operator {
    let dim = space.dim();
    let tj = space.twice_j() as i64;
    // <m+1|J+|m> = sqrt(j(j+1) - m(m+1)), evaluated in exact integer arithmetic on 2j, 2m.
    let ladder = |k: usize| -> f64 {
        let tm = tj - 2 * k as i64;
        (((tj * (tj + 2) - tm * (tm + 2)) as f64) / 4.0).sqrt()
    };
    let mut t: Vec<(usize, usize, C64)> = Vec::with_capacity(2 * dim);
    let hermitian;
    match component {
        Component::Z => {
            hermitian = true;
            for k in 0..dim {
                t.push((k, k, C64::new(space.m(k), 0.0)));
            }
        }
        Component::Plus => {
            hermitian = false;
            for k in 1..dim {
                t.push((k - 1, k, C64::new(ladder(k), 0.0)));
            }
        }
        Component::Minus => {
            hermitian = false;
            for k in 1..dim {
                t.push((k, k - 1, C64::new(ladder(k), 0.0)));
            }
        }
        Component::X => {
            hermitian = true;
            for k in 1..dim {
                let v = C64::new(0.5 * ladder(k), 0.0);
                t.push((k - 1, k, v));
                t.push((k, k - 1, v));
            }
        }
        Component::Y => {
            hermitian = true;
            // (J+ - J-) / 2i
            for k in 1..dim {
                let a = 0.5 * ladder(k);
                t.push((k - 1, k, C64::new(0.0, -a)));
                t.push((k, k - 1, C64::new(0.0, a)));
            }
        }
    }
    if dim <= DENSE_FACTOR_LIMIT {
        let mut m = DMatrix::zeros(dim, dim);
        for (r, c, v) in t {
            m[(r, c)] = v;
        }
        Operator::from_dense(m, hermitian)
    } else {
        Operator::from_triplets(dim, &t, hermitian)
    }
}

/// The three Cartesian components `[J_x, J_y, J_z]`.
pub fn cartesian_operators(space: SpinSpace) -> [Operator; 3] {
    [
        collective_operator(space, Component::X),
        collective_operator(space, Component::Y),
        collective_operator(space, Component::Z),
    ]
}

/// Dimensions of a two-factor product space, S factor first.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairDims {
    pub dim_s: usize,
    pub dim_j: usize,
}

impl PairDims {
    pub fn new(dim_s: usize, dim_j: usize) -> Self {
        Self { dim_s, dim_j }
    }

    pub fn of(s: SpinSpace, j: SpinSpace) -> Self {
        Self::new(s.dim(), j.dim())
    }

    pub fn total(&self) -> usize {
        self.dim_s * self.dim_j
    }
}

/// Kronecker product `op_s ⊗ op_j` on the joint space; `None` stands for the identity.
pub fn embed_pair(
    op_s: Option<&Operator>,
    op_j: Option<&Operator>,
    dims: PairDims,
) -> Result<Operator> {
    for (op, d) in [(op_s, dims.dim_s), (op_j, dims.dim_j)] {
        if let Some(op) = op {
            if op.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: op.dim(),
                });
            }
        }
    }
    let ident = |d: usize| -> Vec<(usize, usize, C64)> { (0..d).map(|k| (k, k, ONE)).collect() };
    let s_entries: Vec<_> = op_s
        .map(|o| o.nonzeros().collect())
        .unwrap_or_else(|| ident(dims.dim_s));
    let j_entries: Vec<_> = op_j
        .map(|o| o.nonzeros().collect())
        .unwrap_or_else(|| ident(dims.dim_j));
    let dj = dims.dim_j;
    let mut t = Vec::with_capacity(s_entries.len() * j_entries.len());
    for &(rs, cs, vs) in &s_entries {
        for &(rj, cj, vj) in &j_entries {
            t.push((rs * dj + rj, cs * dj + cj, vs * vj));
        }
    }
    let hermitian =
        op_s.map_or(true, Operator::is_hermitian) && op_j.map_or(true, Operator::is_hermitian);
    Ok(Operator::from_triplets(dims.total(), &t, hermitian))
}

/// Binomial coefficient as a float (exact for the sizes used here).
fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// Coherent spin state pointing along `(sinθ cosφ, sinθ sinφ, cosθ)`.
///
/// Amplitudes in the descending-`m` basis are
/// `sqrt(C(2j, j-m)) cos(θ/2)^(j+m) sin(θ/2)^(j-m) e^{i(j-m)φ}`.
pub fn coherent_spin_state(space: SpinSpace, theta: f64, phi: f64) -> DVector<C64> {
    let n = space.twice_j();
    let (s, c) = (theta / 2.0).sin_cos();
    DVector::from_iterator(
        space.dim(),
        (0..=n).map(|k| {
            // k = j - m, n - k = j + m
            let mag = binomial(n, k).sqrt() * c.powi((n - k) as i32) * s.powi(k as i32);
            C64::from_polar(mag, k as f64 * phi)
        }),
    )
}

/// Pure state on the joint space `S ⊗ J`. A single-subsystem state uses `dim_j = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    dims: PairDims,
    amplitudes: DVector<C64>,
}

/// Maximum allowed norm error when constructing a state.
pub const STATE_NORM_TOL: f64 = 1e-10;

impl QuantumState {
    pub fn new(dims: PairDims, amplitudes: DVector<C64>) -> Result<Self> {
        if amplitudes.len() != dims.total() {
            return Err(Error::DimensionMismatch {
                expected: dims.total(),
                found: amplitudes.len(),
            });
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > STATE_NORM_TOL {
            return Err(Error::InvalidArgument(format!(
                "state norm {norm} is not 1 within {STATE_NORM_TOL:e}"
            )));
        }
        Ok(Self { dims, amplitudes })
    }

    /// Wraps propagated amplitudes without the construction-time norm check;
    /// integrator norm drift is reported separately.
    pub(crate) fn evolved(dims: PairDims, amplitudes: DVector<C64>) -> Self {
        debug_assert_eq!(amplitudes.len(), dims.total());
        Self { dims, amplitudes }
    }

    /// `|u> ⊗ |v>`.
    pub fn product(u: &DVector<C64>, v: &DVector<C64>) -> Result<Self> {
        let dims = PairDims::new(u.len(), v.len());
        let mut a = DVector::zeros(dims.total());
        for (i, ui) in u.iter().enumerate() {
            for (k, vk) in v.iter().enumerate() {
                a[i * dims.dim_j + k] = ui * vk;
            }
        }
        Self::new(dims, a)
    }

    /// A state of the S subsystem alone.
    pub fn single(u: DVector<C64>) -> Result<Self> {
        Self::new(PairDims::new(u.len(), 1), u)
    }

    pub fn dims(&self) -> PairDims {
        self.dims
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> DVector<C64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &QuantumState) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// `1 - |<a|b>|`, normalized by the state norms.
    pub fn overlap_deficit(&self, other: &QuantumState) -> f64 {
        1.0 - self.inner(other).norm() / (self.norm() * other.norm())
    }
}

/// Validated density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    entries: DMatrix<C64>,
}

/// Tolerance for Hermiticity, trace and positivity checks.
pub const DENSITY_TOL: f64 = 1e-10;

impl DensityMatrix {
    pub fn new(entries: DMatrix<C64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() == 0 {
            return Err(Error::InvalidArgument(
                "density matrix must be square and non-empty".into(),
            ));
        }
        let herm = (&entries - entries.adjoint())
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max);
        if herm > DENSITY_TOL {
            return Err(Error::InvalidArgument(format!(
                "density matrix not Hermitian (error {herm:e})"
            )));
        }
        let tr = entries.trace();
        if (tr - ONE).norm() > DENSITY_TOL {
            return Err(Error::InvalidArgument(format!(
                "density matrix trace {tr} differs from 1"
            )));
        }
        let hermitian_part = (&entries + entries.adjoint()) * C64::new(0.5, 0.0);
        let min_ev = hermitian_part
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min_ev < -DENSITY_TOL {
            return Err(Error::InvalidArgument(format!(
                "density matrix has negative eigenvalue {min_ev:e}"
            )));
        }
        Ok(Self { entries })
    }

    pub fn pure(v: &DVector<C64>) -> Result<Self> {
        let n = v.norm_squared();
        Self::new(v * v.adjoint() / C64::new(n, 0.0))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            entries: DMatrix::identity(dim, dim) / C64::new(dim as f64, 0.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    /// `tr(rho^2)`.
    pub fn purity(&self) -> f64 {
        // tr(rho rho) = sum |rho_ij|^2 for Hermitian rho
        self.entries.iter().map(|v| v.norm_sqr()).sum()
    }

    /// `tr(rho A)`.
    pub fn expectation(&self, op: &Operator) -> C64 {
        op.nonzeros()
            .map(|(r, c, v)| v * self.entries[(c, r)])
            .sum()
    }
}

/// Reduced state of the S factor, normalized by the state norm.
pub fn partial_trace_s(state: &QuantumState) -> Result<DensityMatrix> {
    let PairDims { dim_s, dim_j } = state.dims();
    let a = state.amplitudes();
    let norm2 = a.norm_squared();
    let mut rho = DMatrix::<C64>::zeros(dim_s, dim_s);
    for s in 0..dim_s {
        let row_s = &a.as_slice()[s * dim_j..(s + 1) * dim_j];
        for t in s..dim_s {
            let row_t = &a.as_slice()[t * dim_j..(t + 1) * dim_j];
            let v: C64 = row_s.iter().zip(row_t).map(|(x, y)| x * y.conj()).sum::<C64>() / norm2;
            rho[(s, t)] = v;
            rho[(t, s)] = v.conj();
        }
    }
    DensityMatrix::new(rho)
}
