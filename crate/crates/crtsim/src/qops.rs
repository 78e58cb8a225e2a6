//! Hilbert space and operator primitives for one resonator mode and two qubits.
//!
//! The composite basis is |n, s₁, s₂⟩ with the resonator index slowest and
//! qubit 2 fastest; the flat index is `n·4 + s₁·2 + s₂` where g = 0, e = 1.
//! Everything is dense: the truncated space never exceeds a few dozen states,
//! so dense `DMatrix<Complex<f64>>` algebra beats any sparse bookkeeping.
//!
//! All types here are plain immutable data (`Send + Sync`); scans and
//! acceptance checks may evaluate them from several threads without locking.

use nalgebra::{DMatrix, DVector};

use crate::{invalid, C64, Result};

/// Truncated product space (n_max + 1 Fock states) ⊗ qubit 1 ⊗ qubit 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HilbertSpace {
    n_max: usize,
}

/// Builds the composite space. `n_max` is the highest retained Fock state and
/// must be at least 1 so that a photon can exist.
pub fn make_space(n_max: usize) -> Result<HilbertSpace> {
    if n_max < 1 {
        return Err(invalid(format!("n_max must be >= 1, got {n_max}")));
    }
    Ok(HilbertSpace { n_max })
}

/// Qubit ground/excited label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    G,
    E,
}

impl Level {
    fn index(self) -> usize {
        match self {
            Level::G => 0,
            Level::E => 1,
        }
    }
}

/// Which of the two qubits an operator acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Qubit {
    One,
    Two,
}

/// Single-qubit operator kind in the {g, e} basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QubitOp {
    /// σᶻ = |e⟩⟨e| − |g⟩⟨g|
    Sz,
    /// σˣ = σ⁺ + σ⁻
    Sx,
    /// σ⁺ = |e⟩⟨g|
    Sp,
    /// σ⁻ = |g⟩⟨e|
    Sm,
}

impl HilbertSpace {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Total dimension (n_max + 1) · 4.
    pub fn dim(&self) -> usize {
        (self.n_max + 1) * 4
    }

    /// Flat index of |n, s₁, s₂⟩.
    pub fn index_of(&self, n: usize, s1: Level, s2: Level) -> usize {
        n * 4 + s1.index() * 2 + s2.index()
    }

    /// Resonator excitation of a flat index.
    pub fn fock_of(&self, idx: usize) -> usize {
        idx / 4
    }

    /// Human-readable ket label of a flat index, e.g. `|1,g,e>`.
    pub fn label(&self, idx: usize) -> String {
        let q = |b: usize| if b == 0 { 'g' } else { 'e' };
        format!("|{},{},{}>", idx / 4, q((idx / 2) % 2), q(idx % 2))
    }
}

/// Dense operator on a [`HilbertSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    space: HilbertSpace,
    pub(crate) m: DMatrix<C64>,
}

impl Operator {
    pub fn zeros(space: HilbertSpace) -> Self {
        let d = space.dim();
        Operator { space, m: DMatrix::zeros(d, d) }
    }

    pub fn identity(space: HilbertSpace) -> Self {
        let d = space.dim();
        Operator { space, m: DMatrix::identity(d, d) }
    }

    /// Wraps an explicit matrix; the dimension must match the space.
    pub fn from_matrix(space: HilbertSpace, m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != space.dim() || m.ncols() != space.dim() {
            return Err(invalid(format!(
                "matrix is {}x{} but the space has dimension {}",
                m.nrows(),
                m.ncols(),
                space.dim()
            )));
        }
        Ok(Operator { space, m })
    }

    pub fn space(&self) -> HilbertSpace {
        self.space
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.m
    }

    pub fn adjoint(&self) -> Operator {
        Operator { space: self.space, m: self.m.adjoint() }
    }

    /// Largest entry magnitude; zero matrices report 0.
    pub fn max_abs(&self) -> f64 {
        self.m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    /// max |M − M†| / max |M|; 0 for the zero matrix.
    pub fn hermiticity_error(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..self.m.nrows() {
            for j in i..self.m.ncols() {
                worst = worst.max((self.m[(i, j)] - self.m[(j, i)].conj()).norm());
            }
        }
        worst / scale
    }

    /// max |M + M†| / max |M|; 0 for the zero matrix.
    pub fn anti_hermiticity_error(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..self.m.nrows() {
            for j in i..self.m.ncols() {
                worst = worst.max((self.m[(i, j)] + self.m[(j, i)].conj()).norm());
            }
        }
        worst / scale
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    /// Returns `c · M` for real `c`.
    pub fn scaled(&self, c: f64) -> Operator {
        self.scaled_c(C64::new(c, 0.0))
    }

    /// Returns `c · M` for complex `c`.
    pub fn scaled_c(&self, c: C64) -> Operator {
        Operator { space: self.space, m: self.m.map(|z| z * c) }
    }

    /// [A, B] = AB − BA.
    pub fn commutator(&self, other: &Operator) -> Operator {
        assert_eq!(self.space, other.space, "operator spaces differ");
        Operator { space: self.space, m: &self.m * &other.m - &other.m * &self.m }
    }
}

macro_rules! op_binop {
    ($trait:ident, $fn:ident, $expr:expr) => {
        impl std::ops::$trait<&Operator> for &Operator {
            type Output = Operator;
            fn $fn(self, rhs: &Operator) -> Operator {
                assert_eq!(self.space, rhs.space, "operator spaces differ");
                let f: fn(&DMatrix<C64>, &DMatrix<C64>) -> DMatrix<C64> = $expr;
                Operator { space: self.space, m: f(&self.m, &rhs.m) }
            }
        }
        impl std::ops::$trait<Operator> for Operator {
            type Output = Operator;
            fn $fn(self, rhs: Operator) -> Operator {
                (&self).$fn(&rhs)
            }
        }
    };
}

op_binop!(Add, add, |a, b| a + b);
op_binop!(Sub, sub, |a, b| a - b);
op_binop!(Mul, mul, |a, b| a * b);

impl std::ops::Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        self.scaled(-1.0)
    }
}

impl std::ops::Mul<&StateVector> for &Operator {
    type Output = StateVector;
    fn mul(self, rhs: &StateVector) -> StateVector {
        assert_eq!(self.space, rhs.space, "operator and state spaces differ");
        StateVector { space: self.space, v: &self.m * &rhs.v }
    }
}

/// Pure state on a [`HilbertSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    space: HilbertSpace,
    pub(crate) v: DVector<C64>,
}

impl StateVector {
    pub fn from_vector(space: HilbertSpace, v: DVector<C64>) -> Result<Self> {
        if v.len() != space.dim() {
            return Err(invalid(format!(
                "vector length {} does not match space dimension {}",
                v.len(),
                space.dim()
            )));
        }
        Ok(StateVector { space, v })
    }

    pub fn space(&self) -> HilbertSpace {
        self.space
    }

    pub fn vector(&self) -> &DVector<C64> {
        &self.v
    }

    pub fn norm(&self) -> f64 {
        self.v.norm()
    }

    pub fn normalized(&self) -> StateVector {
        let n = self.norm();
        StateVector { space: self.space, v: self.v.map(|z| z / n) }
    }

    /// ⟨self|other⟩ (conjugates `self`).
    pub fn overlap(&self, other: &StateVector) -> C64 {
        assert_eq!(self.space, other.space, "state spaces differ");
        self.v.dotc(&other.v)
    }

    /// |⟨basis idx|ψ⟩|².
    pub fn population(&self, idx: usize) -> f64 {
        self.v[idx].norm_sqr()
    }

    /// |ψ⟩⟨ψ|.
    pub fn projector(&self) -> Operator {
        Operator { space: self.space, m: &self.v * self.v.adjoint() }
    }

    /// α|a⟩ + β|b⟩ as a convenience for superposition states.
    pub fn superpose(a: &StateVector, ca: C64, b: &StateVector, cb: C64) -> StateVector {
        assert_eq!(a.space, b.space, "state spaces differ");
        StateVector { space: a.space, v: a.v.map(|z| z * ca) + b.v.map(|z| z * cb) }
    }
}

/// Density matrix on a [`HilbertSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    space: HilbertSpace,
    pub(crate) m: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn from_pure(psi: &StateVector) -> DensityMatrix {
        DensityMatrix { space: psi.space, m: &psi.v * psi.v.adjoint() }
    }

    pub fn from_matrix(space: HilbertSpace, m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != space.dim() || m.ncols() != space.dim() {
            return Err(invalid(format!(
                "matrix is {}x{} but the space has dimension {}",
                m.nrows(),
                m.ncols(),
                space.dim()
            )));
        }
        Ok(DensityMatrix { space, m })
    }

    pub fn space(&self) -> HilbertSpace {
        self.space
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn trace(&self) -> C64 {
        self.m.diagonal().sum()
    }

    /// Checks Hermiticity, unit trace, and positive semidefiniteness, each to
    /// the given tolerance. Used to validate caller-supplied initial states.
    pub fn validate_physical(&self, tol: f64) -> Result<()> {
        let as_op = Operator { space: self.space, m: self.m.clone() };
        let herm = as_op.hermiticity_error();
        if herm > tol {
            return Err(invalid(format!("density matrix not Hermitian: asymmetry {herm:.3e}")));
        }
        let tr = self.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > tol {
            return Err(invalid(format!("density matrix trace {} != 1", tr)));
        }
        let eig = eigh(&as_op)?;
        let min = eig.values().first().copied().unwrap_or(0.0);
        if min < -tol {
            return Err(invalid(format!("density matrix not positive: min eigenvalue {min:.3e}")));
        }
        Ok(())
    }
}

/// Eigendecomposition of a Hermitian operator, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    space: HilbertSpace,
    values: Vec<f64>,
    /// Column k is the eigenvector of `values[k]`.
    vectors: DMatrix<C64>,
}

impl Eigensystem {
    pub fn space(&self) -> HilbertSpace {
        self.space
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Eigenvalues in ascending order; index 0 is the ground state.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Matrix whose k-th column is eigenvector k.
    pub fn vectors(&self) -> &DMatrix<C64> {
        &self.vectors
    }

    /// Eigenvector k as a state.
    pub fn state(&self, k: usize) -> StateVector {
        StateVector { space: self.space, v: self.vectors.column(k).into_owned() }
    }
}

/// Annihilation operator a ⊗ 1 ⊗ 1; `a|n⟩ = √n |n−1⟩` on the truncated mode.
pub fn annihilation(space: &HilbertSpace) -> Operator {
    let nr = space.n_max() + 1;
    let mut a = DMatrix::<C64>::zeros(nr, nr);
    for n in 1..nr {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    embed(space, &a, &id2(), &id2())
}

/// Creation operator a† ⊗ 1 ⊗ 1.
pub fn creation(space: &HilbertSpace) -> Operator {
    annihilation(space).adjoint()
}

/// Photon number operator a†a ⊗ 1 ⊗ 1 (diagonal, exact on the truncation).
pub fn number(space: &HilbertSpace) -> Operator {
    let nr = space.n_max() + 1;
    let mut n = DMatrix::<C64>::zeros(nr, nr);
    for k in 0..nr {
        n[(k, k)] = C64::new(k as f64, 0.0);
    }
    embed(space, &n, &id2(), &id2())
}

/// Single-qubit operator embedded in the composite space.
pub fn qubit_op(space: &HilbertSpace, which: Qubit, op: QubitOp) -> Operator {
    let nr = space.n_max() + 1;
    let idr = DMatrix::<C64>::identity(nr, nr);
    let q = qubit_matrix(op);
    match which {
        Qubit::One => embed_mats(space, &idr, &q, &id2()),
        Qubit::Two => embed_mats(space, &idr, &id2(), &q),
    }
}

fn qubit_matrix(op: QubitOp) -> DMatrix<C64> {
    let r = |x: f64| C64::new(x, 0.0);
    // basis order (g, e)
    match op {
        QubitOp::Sz => DMatrix::from_row_slice(2, 2, &[r(-1.0), r(0.0), r(0.0), r(1.0)]),
        QubitOp::Sx => DMatrix::from_row_slice(2, 2, &[r(0.0), r(1.0), r(1.0), r(0.0)]),
        QubitOp::Sp => DMatrix::from_row_slice(2, 2, &[r(0.0), r(0.0), r(1.0), r(0.0)]),
        QubitOp::Sm => DMatrix::from_row_slice(2, 2, &[r(0.0), r(1.0), r(0.0), r(0.0)]),
    }
}

fn id2() -> DMatrix<C64> {
    DMatrix::identity(2, 2)
}

fn embed(space: &HilbertSpace, res: &DMatrix<C64>, q1: &DMatrix<C64>, q2: &DMatrix<C64>) -> Operator {
    embed_mats(space, res, q1, q2)
}

fn embed_mats(
    space: &HilbertSpace,
    res: &DMatrix<C64>,
    q1: &DMatrix<C64>,
    q2: &DMatrix<C64>,
) -> Operator {
    Operator { space: *space, m: res.kronecker(q1).kronecker(q2) }
}

/// Basis ket |n, s₁, s₂⟩.
pub fn basis_state(space: &HilbertSpace, n: usize, s1: Level, s2: Level) -> Result<StateVector> {
    if n > space.n_max() {
        return Err(invalid(format!("Fock index {n} exceeds n_max = {}", space.n_max())));
    }
    let mut v = DVector::<C64>::zeros(space.dim());
    v[space.index_of(n, s1, s2)] = C64::new(1.0, 0.0);
    Ok(StateVector { space: *space, v })
}

/// Relative Hermiticity tolerance accepted by [`eigh`].
pub const EIGH_HERMITICITY_TOL: f64 = 1e-10;

/// Hermitian eigendecomposition, eigenvalues ascending (ties keep solver
/// order). Rejects inputs whose relative asymmetry exceeds 1e-10; the
/// symmetric part (M + M†)/2 is what gets diagonalized.
pub fn eigh(op: &Operator) -> Result<Eigensystem> {
    let herm = op.hermiticity_error();
    if herm > EIGH_HERMITICITY_TOL {
        return Err(invalid(format!(
            "eigh requires a Hermitian operator; relative asymmetry {herm:.3e}"
        )));
    }
    let d = op.space.dim();
    let mut h = op.m.clone();
    for i in 0..d {
        for j in (i + 1)..d {
            let s = (h[(i, j)] + h[(j, i)].conj()) * C64::new(0.5, 0.0);
            h[(i, j)] = s;
            h[(j, i)] = s.conj();
        }
        h[(i, i)] = C64::new(h[(i, i)].re, 0.0);
    }
    let se = h.clone().symmetric_eigen();
    let mut basis = se.eigenvectors;
    // The QR pass alone can leave residuals ‖HV − VΛ‖ near 1e-5 on clustered
    // spectra; a cyclic Jacobi polish of the (already near-diagonal) V†HV
    // restores machine-precision residuals at negligible cost.
    let mut tmp = DMatrix::<C64>::zeros(d, d);
    zgemm_into(C64::new(1.0, 0.0), &h, &basis, C64::new(0.0, 0.0), &mut tmp);
    let mut basis_adj = DMatrix::<C64>::zeros(d, d);
    adjoint_into(&basis, &mut basis_adj);
    let mut reduced = DMatrix::<C64>::zeros(d, d);
    zgemm_into(C64::new(1.0, 0.0), &basis_adj, &tmp, C64::new(0.0, 0.0), &mut reduced);
    let raw = jacobi_diagonalize(&mut reduced, &mut basis)?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        raw[a].partial_cmp(&raw[b]).expect("Hermitian eigenvalues are finite").then(a.cmp(&b))
    });
    let values: Vec<f64> = order.iter().map(|&k| raw[k]).collect();
    let mut vectors = DMatrix::<C64>::zeros(d, d);
    for (col, &k) in order.iter().enumerate() {
        vectors.set_column(col, &basis.column(k));
    }
    Ok(Eigensystem { space: op.space, values, vectors })
}

/// out ← α·A·B + β·out on column-major matrices through matrixmultiply's
/// packed complex kernel. nalgebra's own product path is scalar for complex
/// elements and several times slower at the dimensions used here. The 0.3
/// kernel ignores the conjugation flags, so only plain products are exposed;
/// adjoints must be materialized by the caller (see [`adjoint_into`]).
pub(crate) fn zgemm_into(
    alpha: C64,
    a: &DMatrix<C64>,
    b: &DMatrix<C64>,
    beta: C64,
    out: &mut DMatrix<C64>,
) {
    let (m, k) = (a.nrows(), a.ncols());
    let n = b.ncols();
    assert_eq!(k, b.nrows(), "inner dimensions differ");
    assert_eq!(out.nrows(), m, "output rows differ");
    assert_eq!(out.ncols(), n, "output cols differ");
    // Complex<f64> is repr(C) { re, im }, layout-identical to [f64; 2]
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [alpha.re, alpha.im],
            a.as_slice().as_ptr().cast(),
            1,
            m as isize,
            b.as_slice().as_ptr().cast(),
            1,
            k as isize,
            [beta.re, beta.im],
            out.as_mut_slice().as_mut_ptr().cast(),
            1,
            m as isize,
        );
    }
}

/// dst ← src† without allocating.
pub(crate) fn adjoint_into(src: &DMatrix<C64>, dst: &mut DMatrix<C64>) {
    assert_eq!(src.nrows(), dst.ncols(), "adjoint shape mismatch");
    assert_eq!(src.ncols(), dst.nrows(), "adjoint shape mismatch");
    for j in 0..src.ncols() {
        for i in 0..src.nrows() {
            dst[(j, i)] = src[(i, j)].conj();
        }
    }
}

/// Diagonalizes the Hermitian matrix `a` in place by cyclic Jacobi rotations,
/// accumulating the rotations into the columns of `v`; returns the (unsorted)
/// eigenvalues. Converges in a couple of sweeps when `a` is nearly diagonal.
pub(crate) fn jacobi_diagonalize(a: &mut DMatrix<C64>, v: &mut DMatrix<C64>) -> Result<Vec<f64>> {
    let n = a.nrows();
    let fro = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let tol = f64::EPSILON * fro.max(f64::MIN_POSITIVE);
    for _sweep in 0..30 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let gamma = a[(p, q)];
                let r = gamma.norm();
                if r <= tol {
                    continue;
                }
                rotated = true;
                let phase = gamma / C64::new(r, 0.0); // e^{iφ} of the pivot
                let alpha = a[(p, p)].re;
                let beta = a[(q, q)].re;
                // small-magnitude root of r·t² − (α−β)·t − r = 0
                let theta = (alpha - beta) / (2.0 * r);
                let hyp = theta.hypot(1.0);
                let t = if theta >= 0.0 { -1.0 / (theta + hyp) } else { 1.0 / (hyp - theta) };
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;
                // unitary pivot: U_pp = c, U_pq = s·e^{iφ}, U_qp = −s·e^{−iφ}, U_qq = c
                let cs = C64::new(c, 0.0);
                let sp = phase * C64::new(s, 0.0); // s·e^{iφ}
                for i in 0..n {
                    if i == p || i == q {
                        continue;
                    }
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    let new_p = cs * aip - sp.conj() * aiq;
                    let new_q = sp * aip + cs * aiq;
                    a[(i, p)] = new_p;
                    a[(p, i)] = new_p.conj();
                    a[(i, q)] = new_q;
                    a[(q, i)] = new_q.conj();
                }
                a[(p, p)] = C64::new(c * c * alpha - 2.0 * c * s * r + s * s * beta, 0.0);
                a[(q, q)] = C64::new(s * s * alpha + 2.0 * c * s * r + c * c * beta, 0.0);
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = cs * vip - sp.conj() * viq;
                    v[(i, q)] = sp * vip + cs * viq;
                }
            }
        }
        if !rotated {
            return Ok((0..n).map(|i| a[(i, i)].re).collect());
        }
    }
    Err(invalid("Jacobi eigensolver did not converge in 30 sweeps"))
}

/// Matrix exponential e^M.
///
/// Hermitian and anti-Hermitian inputs (the intended polaron generators) go
/// through an exact eigendecomposition; anything else falls back to Padé
/// scaling-and-squaring. Accurate to ~1e-10 relative for desk-scale norms.
pub fn expm(op: &Operator) -> Operator {
    const STRUCTURE_TOL: f64 = 1e-12;
    if op.max_abs() == 0.0 {
        return Operator::identity(op.space);
    }
    if op.hermiticity_error() <= STRUCTURE_TOL {
        // M = V Λ V† with real Λ
        let eig = eigh(op).expect("hermiticity already verified");
        return rebuild_from_eigen(op.space, &eig, |x| C64::new(x.exp(), 0.0));
    }
    if op.anti_hermiticity_error() <= STRUCTURE_TOL {
        // M = −iH with H = iM Hermitian, so e^M = V e^{−iΛ} V†
        let h = op.scaled_c(C64::new(0.0, 1.0));
        let eig = eigh(&h).expect("iM is Hermitian for anti-Hermitian M");
        return rebuild_from_eigen(op.space, &eig, |x| C64::new(0.0, -x).exp());
    }
    Operator { space: op.space, m: expm_pade(&op.m) }
}

fn rebuild_from_eigen(space: HilbertSpace, eig: &Eigensystem, f: impl Fn(f64) -> C64) -> Operator {
    let d = space.dim();
    let mut scaled = eig.vectors.clone();
    for k in 0..d {
        let fk = f(eig.values[k]);
        for i in 0..d {
            scaled[(i, k)] *= fk;
        }
    }
    Operator { space, m: scaled * eig.vectors.adjoint() }
}

/// Padé(13) scaling-and-squaring exponential for a general square matrix.
fn expm_pade(a: &DMatrix<C64>) -> DMatrix<C64> {
    const THETA_13: f64 = 5.371920351148152;
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    let d = a.nrows();
    let one_norm = (0..d)
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0f64, f64::max);
    let s = if one_norm > THETA_13 {
        (one_norm / THETA_13).log2().ceil() as u32
    } else {
        0
    };
    let a = a.map(|z| z / C64::new(2.0f64.powi(s as i32), 0.0));
    let id = DMatrix::<C64>::identity(d, d);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let b = |k: usize| C64::new(B[k], 0.0);
    let u_inner = &a6 * (a6.map(|z| z * b(13)) + a4.map(|z| z * b(11)) + a2.map(|z| z * b(9)))
        + a6.map(|z| z * b(7))
        + a4.map(|z| z * b(5))
        + a2.map(|z| z * b(3))
        + id.map(|z| z * b(1));
    let u = &a * u_inner;
    let v = &a6 * (a6.map(|z| z * b(12)) + a4.map(|z| z * b(10)) + a2.map(|z| z * b(8)))
        + a6.map(|z| z * b(6))
        + a4.map(|z| z * b(4))
        + a2.map(|z| z * b(2))
        + id.map(|z| z * b(0));
    let lhs = &v - &u;
    let rhs = &v + &u;
    let mut x = lhs.lu().solve(&rhs).expect("Padé denominator is well conditioned");
    for _ in 0..s {
        x = &x * &x;
    }
    x
}
