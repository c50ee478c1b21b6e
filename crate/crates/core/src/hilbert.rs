//! Operators, states and density matrices over finite-dimensional composite
//! Hilbert spaces, with the tensor-product and partial-trace algebra used
//! throughout the crate.
//!
//! Conventions: factors are ordered, the first factor is the slowest index
//! (Kronecker order), and every object carries its factor dimensions so that
//! partial traces never need external bookkeeping.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};

/// Hard cap on the composite dimension; hitting it means a Fock cutoff was
/// misconfigured rather than a legitimately large problem.
pub const MAX_TOTAL_DIM: usize = 4096;

/// Hermiticity tolerance for density matrices.
pub const STATE_HERMITICITY_TOL: f64 = 1e-10;
/// Trace-one tolerance for density matrices.
pub const STATE_TRACE_TOL: f64 = 1e-9;
/// How far below zero an eigenvalue of a density matrix may sit.
pub const STATE_EIGENVALUE_TOL: f64 = -1e-9;
/// Norm tolerance for state vectors.
pub const STATE_NORM_TOL: f64 = 1e-10;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Ordered list of tensor-factor dimensions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HilbertDims {
    factors: Vec<usize>,
}

impl HilbertDims {
    pub fn new(factors: Vec<usize>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidDims("factor list is empty".into()));
        }
        if factors.contains(&0) {
            return Err(Error::InvalidDims("factor dimensions must be >= 1".into()));
        }
        let mut total: usize = 1;
        for &d in &factors {
            total = total
                .checked_mul(d)
                .ok_or(Error::DimensionOverflow { dim: usize::MAX, max: MAX_TOTAL_DIM })?;
        }
        if total > MAX_TOTAL_DIM {
            return Err(Error::DimensionOverflow { dim: total, max: MAX_TOTAL_DIM });
        }
        Ok(Self { factors })
    }

    pub fn single(dim: usize) -> Result<Self> {
        Self::new(vec![dim])
    }

    /// Spin-first bipartite layout used by the whole crate.
    pub fn bipartite(first: usize, second: usize) -> Result<Self> {
        Self::new(vec![first, second])
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    pub fn n_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn factor(&self, index: usize) -> Result<usize> {
        self.factors
            .get(index)
            .copied()
            .ok_or(Error::InvalidFactor { index, count: self.factors.len() })
    }

    pub fn total(&self) -> usize {
        self.factors.iter().product()
    }

    /// Dimensions of the concatenated space `self ⊗ other`.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        let mut factors = self.factors.clone();
        factors.extend_from_slice(&other.factors);
        Self::new(factors)
    }

    /// Stride of a factor: the product of all dimensions to its right.
    fn stride(&self, index: usize) -> usize {
        self.factors[index + 1..].iter().product()
    }

    /// All dims with one factor removed (for partial traces).
    fn without(&self, index: usize) -> Vec<usize> {
        let mut f = self.factors.clone();
        f.remove(index);
        f
    }
}

/// Dense operator on a composite space.
#[derive(Clone, Debug)]
pub struct Operator {
    dims: HilbertDims,
    matrix: CMatrix,
}

impl Operator {
    pub fn new(dims: HilbertDims, matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "operator matrix is {}x{}, expected square",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.nrows() != dims.total() {
            return Err(Error::DimensionMismatch(format!(
                "matrix side {} does not match factor product {}",
                matrix.nrows(),
                dims.total()
            )));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidState("operator has non-finite entries".into()));
        }
        Ok(Self { dims, matrix })
    }

    /// Single-factor operator from a bare matrix.
    pub fn from_matrix(matrix: CMatrix) -> Result<Self> {
        let dims = HilbertDims::single(matrix.nrows())?;
        Self::new(dims, matrix)
    }

    pub fn identity(dims: HilbertDims) -> Self {
        let n = dims.total();
        Self { dims, matrix: CMatrix::identity(n, n) }
    }

    pub fn zeros(dims: HilbertDims) -> Self {
        let n = dims.total();
        Self { dims, matrix: CMatrix::zeros(n, n) }
    }

    pub fn dims(&self) -> &HilbertDims {
        &self.dims
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn dagger(&self) -> Self {
        Self { dims: self.dims.clone(), matrix: self.matrix.adjoint() }
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        linalg::hermiticity_error(&self.matrix)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    /// Kronecker product; factor lists concatenate in operand order.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let dims = self.dims.concat(&other.dims)?;
        let matrix = self.matrix.kronecker(&other.matrix);
        Ok(Self { dims, matrix })
    }

    /// Trace out every factor except `keep`.
    pub fn partial_trace(&self, keep: usize) -> Result<Self> {
        if self.dims.n_factors() < 2 {
            return Err(Error::InvalidFactor { index: keep, count: self.dims.n_factors() });
        }
        let matrix = partial_trace_matrix(&self.matrix, &self.dims, keep)?;
        let dims = HilbertDims::single(self.dims.factor(keep)?)?;
        Ok(Self { dims, matrix })
    }

    pub fn commutator(&self, other: &Self) -> Self {
        assert_eq!(self.dims, other.dims, "commutator of mismatched operators");
        Self { dims: self.dims.clone(), matrix: linalg::commutator(&self.matrix, &other.matrix) }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.scale_c(c(s))
    }

    pub fn scale_c(&self, s: Complex64) -> Self {
        Self { dims: self.dims.clone(), matrix: self.matrix.map(|z| z * s) }
    }

    /// tr(Aρ) for a state on the same space.
    pub fn expectation(&self, rho: &DensityMatrix) -> Complex64 {
        assert_eq!(&self.dims, rho.dims(), "expectation on mismatched spaces");
        // tr(A rho) = sum_ij A_ij rho_ji
        let n = self.matrix.nrows();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += self.matrix[(i, j)] * rho.matrix()[(j, i)];
            }
        }
        acc
    }

    /// ⟨ψ|A|ψ⟩.
    pub fn expectation_vec(&self, psi: &StateVector) -> Complex64 {
        assert_eq!(self.dims, *psi.dims(), "expectation on mismatched spaces");
        let av = &self.matrix * psi.vector();
        psi.vector().dotc(&av)
    }
}

impl std::ops::Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dims, rhs.dims, "adding operators on different spaces");
        Operator { dims: self.dims.clone(), matrix: &self.matrix + &rhs.matrix }
    }
}

impl std::ops::Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dims, rhs.dims, "subtracting operators on different spaces");
        Operator { dims: self.dims.clone(), matrix: &self.matrix - &rhs.matrix }
    }
}

impl std::ops::Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dims, rhs.dims, "multiplying operators on different spaces");
        Operator { dims: self.dims.clone(), matrix: &self.matrix * &rhs.matrix }
    }
}

/// Normalized complex amplitude vector over a (possibly composite) basis.
#[derive(Clone, Debug)]
pub struct StateVector {
    dims: HilbertDims,
    vector: CVector,
}

impl StateVector {
    pub fn new(dims: HilbertDims, vector: CVector) -> Result<Self> {
        if vector.len() != dims.total() {
            return Err(Error::DimensionMismatch(format!(
                "vector length {} does not match factor product {}",
                vector.len(),
                dims.total()
            )));
        }
        let norm = vector.norm();
        if (norm - 1.0).abs() > STATE_NORM_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self { dims, vector })
    }

    /// Normalizes on entry; rejects the zero vector.
    pub fn normalized(dims: HilbertDims, vector: CVector) -> Result<Self> {
        let norm = vector.norm();
        if norm == 0.0 {
            return Err(Error::NotNormalized(0.0));
        }
        Self::new(dims, vector.map(|z| z / c(norm)))
    }

    /// Basis state |index⟩ on a single factor.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::DimensionMismatch(format!(
                "basis index {index} out of range for dimension {dim}"
            )));
        }
        let mut v = CVector::zeros(dim);
        v[index] = c(1.0);
        Self::new(HilbertDims::single(dim)?, v)
    }

    pub fn dims(&self) -> &HilbertDims {
        &self.dims
    }

    pub fn vector(&self) -> &CVector {
        &self.vector
    }

    pub fn norm(&self) -> f64 {
        self.vector.norm()
    }

    pub fn inner(&self, other: &Self) -> Complex64 {
        assert_eq!(self.dims, other.dims, "inner product on mismatched spaces");
        self.vector.dotc(&other.vector)
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let dims = self.dims.concat(&other.dims)?;
        let vector = self.vector.kronecker(&other.vector);
        Ok(Self { dims, vector })
    }

    /// |ψ⟩⟨ψ| as a density matrix.
    pub fn projector(&self) -> DensityMatrix {
        let m = &self.vector * self.vector.adjoint();
        DensityMatrix::from_parts_unchecked(self.dims.clone(), m)
    }
}

/// Positive, unit-trace Hermitian operator tagged as a state.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    dims: HilbertDims,
    matrix: CMatrix,
}

impl DensityMatrix {
    /// Full validation: Hermiticity, unit trace and positivity (the last via
    /// an eigendecomposition, so reserve this for construction boundaries).
    pub fn new(dims: HilbertDims, matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() != dims.total() {
            return Err(Error::DimensionMismatch(format!(
                "state matrix is {}x{}, expected side {}",
                matrix.nrows(),
                matrix.ncols(),
                dims.total()
            )));
        }
        let herm = linalg::hermiticity_error(&matrix);
        if herm > STATE_HERMITICITY_TOL {
            return Err(Error::InvalidState(format!(
                "Hermiticity deviation {herm:.3e} above {STATE_HERMITICITY_TOL:.1e}"
            )));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > STATE_TRACE_TOL || tr.im.abs() > STATE_TRACE_TOL {
            return Err(Error::InvalidState(format!("trace = {tr} instead of 1")));
        }
        let state = Self { dims, matrix };
        state.check_positivity()?;
        Ok(state)
    }

    fn check_positivity(&self) -> Result<()> {
        let eig = linalg::hermitian_eigen(&self.matrix, STATE_HERMITICITY_TOL)?;
        let min = eig.values.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < STATE_EIGENVALUE_TOL {
            return Err(Error::InvalidState(format!(
                "smallest eigenvalue {min:.3e} below {STATE_EIGENVALUE_TOL:.1e}"
            )));
        }
        Ok(())
    }

    /// Constructor for hot paths where validity is guaranteed by construction
    /// (unitary conjugation, partial traces, convex mixtures of projectors).
    /// Hermiticity and trace are still asserted in debug builds.
    pub(crate) fn from_parts_unchecked(dims: HilbertDims, matrix: CMatrix) -> Self {
        debug_assert!(
            linalg::hermiticity_error(&matrix) <= 1e-8,
            "unchecked density matrix lost Hermiticity"
        );
        debug_assert!(
            (matrix.trace().re - 1.0).abs() <= 1e-7,
            "unchecked density matrix lost unit trace"
        );
        Self { dims, matrix }
    }

    pub fn pure(state: &StateVector) -> Self {
        state.projector()
    }

    /// Convex mixture of pure states on a common space.
    pub fn mixture(branches: &[(f64, StateVector)]) -> Result<Self> {
        let (_, first) = branches
            .first()
            .ok_or_else(|| Error::InvalidState("empty mixture".into()))?;
        let dims = first.dims().clone();
        let n = dims.total();
        let mut m = CMatrix::zeros(n, n);
        let mut wsum = 0.0;
        for (w, psi) in branches {
            if *w < 0.0 {
                return Err(Error::InvalidState(format!("negative weight {w}")));
            }
            if psi.dims() != &dims {
                return Err(Error::DimensionMismatch("mixture branch on different space".into()));
            }
            wsum += w;
            m += (psi.vector() * psi.vector().adjoint()).map(|z| z * c(*w));
        }
        if (wsum - 1.0).abs() > STATE_TRACE_TOL {
            return Err(Error::InvalidState(format!("weights sum to {wsum} instead of 1")));
        }
        Ok(Self::from_parts_unchecked(dims, m))
    }

    pub fn dims(&self) -> &HilbertDims {
        &self.dims
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// View as a plain operator (e.g. to enter operator arithmetic).
    pub fn as_operator(&self) -> Operator {
        Operator { dims: self.dims.clone(), matrix: self.matrix.clone() }
    }

    /// Re-run the full invariant check (Hermiticity, trace, positivity).
    pub fn validate(&self) -> Result<()> {
        Self::new(self.dims.clone(), self.matrix.clone()).map(|_| ())
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let dims = self.dims.concat(&other.dims)?;
        let matrix = self.matrix.kronecker(&other.matrix);
        Ok(Self { dims, matrix })
    }

    /// Reduced state over the kept factor; trace is preserved exactly.
    pub fn partial_trace(&self, keep: usize) -> Result<Self> {
        if self.dims.n_factors() < 2 {
            return Err(Error::InvalidFactor { index: keep, count: self.dims.n_factors() });
        }
        let matrix = partial_trace_matrix(&self.matrix, &self.dims, keep)?;
        let dims = HilbertDims::single(self.dims.factor(keep)?)?;
        Ok(Self::from_parts_unchecked(dims, matrix))
    }

    /// tr(ρ²), evaluated as Σ|ρ_ij|² (exact for Hermitian ρ).
    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    /// ½ tr|ρ − σ|.
    pub fn trace_distance(&self, other: &Self) -> f64 {
        assert_eq!(self.dims, other.dims, "trace distance on mismatched spaces");
        let diff = &self.matrix - &other.matrix;
        let eig = linalg::hermitian_eigen(&diff, 1e-8).expect("difference of states is Hermitian");
        0.5 * eig.values.iter().map(|x| x.abs()).sum::<f64>()
    }

    /// Uhlmann fidelity (tr√(√ρ σ √ρ))².
    pub fn fidelity(&self, other: &Self) -> f64 {
        assert_eq!(self.dims, other.dims, "fidelity on mismatched spaces");
        let eig = linalg::hermitian_eigen(&self.matrix, 1e-8).expect("state is Hermitian");
        let sqrt_rho = eig.apply_spectral(|x| c(x.max(0.0).sqrt()));
        let inner = &sqrt_rho * &other.matrix * &sqrt_rho;
        let eig2 = linalg::hermitian_eigen(&inner, 1e-8).expect("inner product is Hermitian");
        let tr: f64 = eig2.values.iter().map(|x| x.max(0.0).sqrt()).sum();
        tr * tr
    }
}

/// Partial trace keeping one factor; works for any operator.
fn partial_trace_matrix(m: &CMatrix, dims: &HilbertDims, keep: usize) -> Result<CMatrix> {
    let d_keep = dims.factor(keep)?;
    let stride_keep = dims.stride(keep);
    let rest = dims.without(keep);
    let rest_total: usize = rest.iter().product();

    // Strides of the remaining factors inside the full index.
    let mut rest_strides = Vec::with_capacity(rest.len());
    for (f, _) in dims.factors().iter().enumerate() {
        if f != keep {
            rest_strides.push(dims.stride(f));
        }
    }

    let mut out = CMatrix::zeros(d_keep, d_keep);
    let mut rest_index = vec![0usize; rest.len()];
    for _ in 0..rest_total.max(1) {
        let offset: usize = rest_index
            .iter()
            .zip(&rest_strides)
            .map(|(i, s)| i * s)
            .sum();
        for a in 0..d_keep {
            let row = offset + a * stride_keep;
            for b in 0..d_keep {
                let col = offset + b * stride_keep;
                out[(a, b)] += m[(row, col)];
            }
        }
        // odometer over the remaining factors, last factor fastest
        for pos in (0..rest.len()).rev() {
            rest_index[pos] += 1;
            if rest_index[pos] < rest[pos] {
                break;
            }
            rest_index[pos] = 0;
        }
    }
    Ok(out)
}
