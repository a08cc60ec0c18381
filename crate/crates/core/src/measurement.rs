//! Spectral projections, Lueders transformers on states and observables,
//! joint-measurability checks and an explicit pointer-instrument model.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Tolerance for treating a threshold as sitting on an eigenvalue.
pub const THRESHOLD_TOL: f64 = 1e-9;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Largest absolute entry.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Spectral (operator 2-) norm.
pub fn op_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

pub fn commutator(x: &CMatrix, y: &CMatrix) -> CMatrix {
    x * y - y * x
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

pub fn hermiticity_residual(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// Real matrix to complex.
pub fn real_matrix(rows: usize, cols: usize, data: &[f64]) -> CMatrix {
    DMatrix::from_row_slice(rows, cols, data).map(c)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Observable {
    pub matrix: CMatrix,
    pub label: String,
}

impl Observable {
    pub fn new(matrix: CMatrix, label: impl Into<String>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), got: matrix.ncols() });
        }
        let res = hermiticity_residual(&matrix);
        if res > 1e-12 * max_abs(&matrix).max(1.0) {
            return Err(Error::invalid(format!("observable is not Hermitian (residual {res:e})")));
        }
        Ok(Self { matrix, label: label.into() })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

#[derive(Clone, Debug)]
pub struct SpectralProjection {
    /// Distinct eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    pub projectors: Vec<CMatrix>,
}

impl SpectralProjection {
    pub fn dim(&self) -> usize {
        self.projectors.first().map_or(0, |p| p.nrows())
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.projectors.iter().map(|p| trace(p).re.round() as usize).collect()
    }

    pub fn reconstruct(&self) -> CMatrix {
        let d = self.dim();
        self.eigenvalues
            .iter()
            .zip(&self.projectors)
            .fold(CMatrix::zeros(d, d), |acc, (a, p)| acc + p * c(*a))
    }

    /// `max |P_i P_j - delta_ij P_i|` and `max |sum P_i - 1|`.
    pub fn residuals(&self) -> (f64, f64) {
        let d = self.dim();
        let mut ortho = 0.0f64;
        for (i, p) in self.projectors.iter().enumerate() {
            for (j, q) in self.projectors.iter().enumerate() {
                let target = if i == j { p.clone() } else { CMatrix::zeros(d, d) };
                ortho = ortho.max(max_abs(&(p * q - target)));
            }
        }
        let sum = self.projectors.iter().fold(CMatrix::zeros(d, d), |acc, p| acc + p);
        (ortho, max_abs(&(sum - CMatrix::identity(d, d))))
    }
}

/// Default clustering tolerance `1e-8 * ||A||`.
pub fn default_cluster_tol(a: &Observable) -> f64 {
    1e-8 * op_norm(&a.matrix).max(f64::MIN_POSITIVE)
}

/// Eigenvalues within `cluster_tol` of their neighbour share one projector.
pub fn spectral(a: &Observable, cluster_tol: Option<f64>) -> SpectralProjection {
    let tol = cluster_tol.unwrap_or_else(|| default_cluster_tol(a));
    let d = a.dim();
    let eig = a.matrix.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let mut eigenvalues = Vec::new();
    let mut projectors: Vec<CMatrix> = Vec::new();
    let mut members: Vec<f64> = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for &i in &order {
        let lambda = eig.eigenvalues[i];
        let v = eig.eigenvectors.column(i);
        let outer = v * v.adjoint();
        if projectors.is_empty() || lambda - last > tol {
            if !members.is_empty() {
                eigenvalues.push(members.iter().sum::<f64>() / members.len() as f64);
                members.clear();
            }
            projectors.push(outer);
        } else {
            *projectors.last_mut().expect("non-empty") += outer;
        }
        members.push(lambda);
        last = lambda;
    }
    if !members.is_empty() {
        eigenvalues.push(members.iter().sum::<f64>() / members.len() as f64);
    }
    SpectralProjection { eigenvalues, projectors }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    pub matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), got: matrix.ncols() });
        }
        if hermiticity_residual(&matrix) > 1e-12 {
            return Err(Error::invalid("density matrix is not Hermitian"));
        }
        let tr = trace(&matrix);
        if (tr - c(1.0)).norm() > 1e-12 {
            return Err(Error::invalid(format!("density matrix trace is {tr}, expected 1")));
        }
        let min = min_eigenvalue(&matrix);
        if min < -1e-10 {
            return Err(Error::invalid(format!("density matrix has eigenvalue {min}")));
        }
        Ok(Self { matrix })
    }

    /// `|psi><psi|` for a normalized `psi`.
    pub fn pure(psi: &CVector) -> Result<Self> {
        let n = psi.norm();
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("state vector has norm {n}")));
        }
        Ok(Self { matrix: psi * psi.adjoint() })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn expectation(&self, x: &CMatrix) -> Complex64 {
        trace(&(x * &self.matrix))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.matrix)
    }
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

fn pinch(x: &CMatrix, sp: &SpectralProjection) -> CMatrix {
    sp.projectors
        .iter()
        .fold(CMatrix::zeros(x.nrows(), x.ncols()), |acc, p| acc + p * x * p)
}

/// `rho_A = sum_i P_i rho P_i`.
pub fn luders_state(rho: &DensityMatrix, sp: &SpectralProjection) -> Result<DensityMatrix> {
    check_dims(sp.dim(), rho.dim())?;
    Ok(DensityMatrix { matrix: pinch(&rho.matrix, sp) })
}

/// `X_A = sum_i P_i X P_i`.
pub fn luders_observable(x: &Observable, sp: &SpectralProjection) -> Result<Observable> {
    check_dims(sp.dim(), x.dim())?;
    Ok(Observable { matrix: pinch(&x.matrix, sp), label: format!("{}_L", x.label) })
}

/// `X_{P A} = P X P + (1 - P) X (1 - P)`.
pub fn luders_of_pi_a(x: &Observable, p: &CMatrix) -> Result<Observable> {
    check_dims(x.dim(), p.nrows())?;
    if max_abs(&(p * p - p)) > 1e-10 || hermiticity_residual(p) > 1e-10 {
        return Err(Error::invalid("not an orthogonal projector"));
    }
    let d = x.dim();
    let q = CMatrix::identity(d, d) - p;
    Ok(Observable { matrix: p * &x.matrix * p + &q * &x.matrix * &q, label: format!("{}_P", x.label) })
}

#[derive(Clone, Debug, Serialize)]
pub struct JmPair {
    pub i: usize,
    pub j: usize,
    pub commutator_norm: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct JmReport {
    pub pairs: Vec<JmPair>,
    pub pass: bool,
}

/// Pairwise `||[A_i, A_j]||` (operator norm); passes when all are `<= 1e-10`.
pub fn jm_check(observables: &[Observable]) -> JmReport {
    let mut pairs = Vec::new();
    for i in 0..observables.len() {
        for j in (i + 1)..observables.len() {
            let norm = op_norm(&commutator(&observables[i].matrix, &observables[j].matrix));
            pairs.push(JmPair { i, j, commutator_norm: norm });
        }
    }
    let pass = pairs.iter().all(|p| p.commutator_norm <= 1e-10);
    JmReport { pairs, pass }
}

/// `theta(A - c)`: the projector onto eigenvalues above `c`.
pub fn discretize(a: &Observable, threshold: f64) -> Result<Observable> {
    let sp = spectral(a, None);
    if let Some(&e) = sp.eigenvalues.iter().find(|e| (*e - threshold).abs() <= THRESHOLD_TOL) {
        return Err(Error::AmbiguousThreshold { threshold, eigenvalue: e, tol: THRESHOLD_TOL });
    }
    let d = a.dim();
    let m = sp
        .eigenvalues
        .iter()
        .zip(&sp.projectors)
        .filter(|(e, _)| **e > threshold)
        .fold(CMatrix::zeros(d, d), |acc, (_, p)| acc + p);
    Ok(Observable { matrix: m, label: format!("{}_{threshold}", a.label) })
}

#[derive(Clone, Debug, Serialize)]
pub struct RepeatReport {
    pub eigenvalues: Vec<f64>,
    /// `joint[u][v] = Tr[P_u P_v rho]`
    pub joint: Vec<Vec<f64>>,
    /// Row sums of `joint`.
    pub marginal: Vec<f64>,
    /// `Tr[P_u rho]`
    pub single: Vec<f64>,
    pub off_diagonal_mass: f64,
}

/// Joint distribution of two back-to-back measurements of the same observable.
pub fn repeat_correlation(a: &Observable, rho: &DensityMatrix) -> Result<RepeatReport> {
    check_dims(a.dim(), rho.dim())?;
    let sp = spectral(a, None);
    let k = sp.eigenvalues.len();
    let joint: Vec<Vec<f64>> = (0..k)
        .map(|u| {
            (0..k)
                .map(|v| rho.expectation(&(&sp.projectors[u] * &sp.projectors[v])).re)
                .collect()
        })
        .collect();
    let off_diagonal_mass = (0..k)
        .flat_map(|u| (0..k).filter(move |v| *v != u).map(move |v| (u, v)))
        .map(|(u, v)| joint[u][v].abs())
        .sum();
    Ok(RepeatReport {
        eigenvalues: sp.eigenvalues.clone(),
        marginal: joint.iter().map(|r| r.iter().sum()).collect(),
        single: sp.projectors.iter().map(|p| rho.expectation(p).re).collect(),
        joint,
        off_diagonal_mass,
    })
}

/// Complex matrices in JSON: rows of `[re, im]` pairs.
pub type JsonMatrix = Vec<Vec<[f64; 2]>>;
pub type JsonVector = Vec<[f64; 2]>;

pub fn matrix_from_json(m: &JsonMatrix) -> Result<CMatrix> {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    if m.iter().any(|r| r.len() != cols) {
        return Err(Error::invalid("ragged matrix rows"));
    }
    Ok(CMatrix::from_fn(rows, cols, |i, j| Complex64::new(m[i][j][0], m[i][j][1])))
}

pub fn matrix_to_json(m: &CMatrix) -> JsonMatrix {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn vector_from_json(v: &JsonVector) -> CVector {
    CVector::from_iterator(v.len(), v.iter().map(|z| Complex64::new(z[0], z[1])))
}

pub fn vector_to_json(v: &CVector) -> JsonVector {
    v.iter().map(|z| [z.re, z.im]).collect()
}

/// Two orthonormal eigenbases on a `d`-dimensional system, with their
/// eigenvalue labels, read by the instrument model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstrumentSetup {
    pub dim: usize,
    /// Eigenvectors `|a_i>` (each a list of `[re, im]`).
    pub a_basis: Vec<JsonVector>,
    pub b_basis: Vec<JsonVector>,
    /// Eigenvalue per basis vector; distinct by default.
    #[serde(default)]
    pub a_eigenvalues: Option<Vec<f64>>,
    #[serde(default)]
    pub b_eigenvalues: Option<Vec<f64>>,
    /// Initial pointer levels `|A_0>`, `|B_0>`.
    #[serde(default)]
    pub a_pointer_start: usize,
    #[serde(default)]
    pub b_pointer_start: usize,
    /// State to measure; required by the CLI.
    #[serde(default)]
    pub psi: Option<JsonVector>,
}

/// An eigenbasis grouped into spectral projectors.
#[derive(Clone, Debug)]
pub struct LabelledBasis {
    pub vectors: Vec<CVector>,
    pub labels: Vec<f64>,
    /// Distinct labels, ascending, and the vector indices under each.
    pub outcomes: Vec<(f64, Vec<usize>)>,
}

impl LabelledBasis {
    pub fn new(vectors: Vec<CVector>, labels: Option<Vec<f64>>, dim: usize) -> Result<Self> {
        if vectors.len() != dim || vectors.iter().any(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: vectors.len() });
        }
        for (i, u) in vectors.iter().enumerate() {
            for (j, v) in vectors.iter().enumerate() {
                let target = if i == j { c(1.0) } else { c(0.0) };
                if (u.dotc(v) - target).norm() > 1e-12 {
                    return Err(Error::invalid(format!("eigenbasis not orthonormal at ({i}, {j})")));
                }
            }
        }
        let labels = labels.unwrap_or_else(|| (0..dim).map(|i| i as f64).collect());
        if labels.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: labels.len() });
        }
        let mut distinct: Vec<f64> = labels.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        let outcomes = distinct
            .into_iter()
            .map(|l| (l, (0..dim).filter(|&i| labels[i] == l).collect()))
            .collect();
        Ok(Self { vectors, labels, outcomes })
    }

    pub fn projector(&self, outcome: usize) -> CMatrix {
        let d = self.vectors.len();
        self.outcomes[outcome]
            .1
            .iter()
            .fold(CMatrix::zeros(d, d), |acc, &i| acc + &self.vectors[i] * self.vectors[i].adjoint())
    }

    pub fn spectral(&self) -> SpectralProjection {
        SpectralProjection {
            eigenvalues: self.outcomes.iter().map(|(l, _)| *l).collect(),
            projectors: (0..self.outcomes.len()).map(|i| self.projector(i)).collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InstrumentReport {
    pub a_outcomes: Vec<f64>,
    pub b_outcomes: Vec<f64>,
    /// `P(A = a_i)` from the pointer-A marginal.
    pub p_a: Vec<f64>,
    /// `P(A = a_i & B = b_j)` from the joint pointer readout.
    pub joint: Vec<Vec<f64>>,
    /// `P(B = b_j)` with `A` measured first, from the pointer-B marginal.
    pub p_b_with_a: Vec<f64>,
    /// `Tr[(Q_j)_A rho]`: Lueders transformer applied to the measurement.
    pub p_b_luders_measurement: Vec<f64>,
    /// `Tr[Q_j rho_A]`: Lueders transformer applied to the state.
    pub p_b_luders_state: Vec<f64>,
    /// `sum_i sum_{b in j} |<b|P_i|psi>|^2`.
    pub p_b_bullet: Vec<f64>,
    /// `P(B = b_j)` with no prior `A` measurement.
    pub p_b_without_a: Vec<f64>,
    pub total_probability: f64,
    pub max_route_discrepancy: f64,
    pub unitarity_residual: f64,
}

/// Cyclic shift `|k> -> |k + 1 mod m>`.
fn cyclic_shift(m: usize, power: usize) -> CMatrix {
    CMatrix::from_fn(m, m, |i, j| if i == (j + power) % m { c(1.0) } else { c(0.0) })
}

/// Runs `U_B U_A |psi>|A_0>|B_0>` on system x pointer A x pointer B, with
/// `U_A = sum_i P_i (x) S_A^i (x) 1` and `U_B = sum_j Q_j (x) 1 (x) S_B^j`.
pub fn instrument_joint(setup: &InstrumentSetup, psi: &CVector) -> Result<InstrumentReport> {
    let d = setup.dim;
    check_dims(d, psi.len())?;
    if (psi.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!("state vector has norm {}", psi.norm())));
    }
    let a = LabelledBasis::new(setup.a_basis.iter().map(vector_from_json).collect(), setup.a_eigenvalues.clone(), d)?;
    let b = LabelledBasis::new(setup.b_basis.iter().map(vector_from_json).collect(), setup.b_eigenvalues.clone(), d)?;
    let ma = a.outcomes.len();
    let mb = b.outcomes.len();
    if setup.a_pointer_start >= ma || setup.b_pointer_start >= mb {
        return Err(Error::invalid("pointer start level outside pointer space"));
    }
    let id_a = CMatrix::identity(ma, ma);
    let id_b = CMatrix::identity(mb, mb);
    let total = d * ma * mb;
    let mut u_a = CMatrix::zeros(total, total);
    for i in 0..ma {
        u_a += a.projector(i).kronecker(&cyclic_shift(ma, i)).kronecker(&id_b);
    }
    let mut u_b = CMatrix::zeros(total, total);
    for j in 0..mb {
        u_b += b.projector(j).kronecker(&id_a).kronecker(&cyclic_shift(mb, j));
    }
    let unitarity_residual = max_abs(&(u_a.adjoint() * &u_a - CMatrix::identity(total, total)))
        .max(max_abs(&(u_b.adjoint() * &u_b - CMatrix::identity(total, total))));

    let e = |m: usize, k: usize| CVector::from_fn(m, |i, _| if i == k { c(1.0) } else { c(0.0) });
    let initial = psi.kronecker(&e(ma, setup.a_pointer_start)).kronecker(&e(mb, setup.b_pointer_start));
    let fin = &u_b * (&u_a * initial);

    // pointer readout: level (start + i) mod m means outcome i
    let mut joint = vec![vec![0.0; mb]; ma];
    for s in 0..d {
        for ka in 0..ma {
            for kb in 0..mb {
                let amp = fin[(s * ma + ka) * mb + kb];
                let i = (ka + ma - setup.a_pointer_start) % ma;
                let j = (kb + mb - setup.b_pointer_start) % mb;
                joint[i][j] += amp.norm_sqr();
            }
        }
    }
    let p_a: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
    let p_b_with_a: Vec<f64> = (0..mb).map(|j| joint.iter().map(|r| r[j]).sum()).collect();
    let total_probability = p_a.iter().sum();

    let rho = DensityMatrix::pure(psi)?;
    let sp_a = a.spectral();
    let rho_a = luders_state(&rho, &sp_a)?;
    let mut p_b_luders_measurement = Vec::new();
    let mut p_b_luders_state = Vec::new();
    let mut p_b_bullet = Vec::new();
    let mut p_b_without_a = Vec::new();
    for j in 0..mb {
        let qj = b.projector(j);
        p_b_luders_measurement.push(rho.expectation(&pinch(&qj, &sp_a)).re);
        p_b_luders_state.push(rho_a.expectation(&qj).re);
        p_b_without_a.push(rho.expectation(&qj).re);
        let mut bullet = 0.0;
        for &bi in &b.outcomes[j].1 {
            for p in &sp_a.projectors {
                bullet += b.vectors[bi].dotc(&(p * psi)).norm_sqr();
            }
        }
        p_b_bullet.push(bullet);
    }
    let mut max_route_discrepancy = 0.0f64;
    for j in 0..mb {
        for v in [p_b_luders_measurement[j], p_b_luders_state[j], p_b_bullet[j]] {
            max_route_discrepancy = max_route_discrepancy.max((v - p_b_with_a[j]).abs());
        }
    }
    Ok(InstrumentReport {
        a_outcomes: a.outcomes.iter().map(|o| o.0).collect(),
        b_outcomes: b.outcomes.iter().map(|o| o.0).collect(),
        p_a,
        joint,
        p_b_with_a,
        p_b_luders_measurement,
        p_b_luders_state,
        p_b_bullet,
        p_b_without_a,
        total_probability,
        max_route_discrepancy,
        unitarity_residual,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LudersDemoReport {
    pub dim: usize,
    /// `Tr[A X rho_A]`
    pub measurement_side: f64,
    /// `Tr[A X_A rho]`
    pub state_side: f64,
    pub identity_residual: f64,
    /// `||[A, X_A]||`
    pub commutant_residual: f64,
    /// `max |(X_A)_A - X_A|`
    pub idempotence_residual: f64,
    pub trace_error: f64,
    pub min_eigenvalue: f64,
}

/// One random `(A, X, rho)` triple checked against the Lueders identities.
pub fn luders_demo(dim: usize, seed: u64) -> Result<LudersDemoReport> {
    use rand::SeedableRng;
    if dim == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let a = Observable::new(random::hermitian(dim, &mut rng), "A")?;
    let x = Observable::new(random::hermitian(dim, &mut rng), "X")?;
    let rho = DensityMatrix::new(random::density(dim, &mut rng))?;
    let sp = spectral(&a, None);
    let rho_a = luders_state(&rho, &sp)?;
    let x_a = luders_observable(&x, &sp)?;
    let measurement_side = trace(&(&a.matrix * &x.matrix * &rho_a.matrix)).re;
    let state_side = trace(&(&a.matrix * &x_a.matrix * &rho.matrix)).re;
    Ok(LudersDemoReport {
        dim,
        measurement_side,
        state_side,
        identity_residual: (measurement_side - state_side).abs(),
        commutant_residual: op_norm(&commutator(&a.matrix, &x_a.matrix)),
        idempotence_residual: max_abs(&(luders_observable(&x_a, &sp)?.matrix - &x_a.matrix)),
        trace_error: (trace(&rho_a.matrix) - c(1.0)).norm(),
        min_eigenvalue: rho_a.min_eigenvalue(),
    })
}

/// Random test matrices.
pub mod random {
    use super::{CMatrix, CVector};
    use num_complex::Complex64;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    }

    pub fn ginibre<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
        CMatrix::from_fn(d, d, |_, _| gaussian(rng))
    }

    /// Haar-distributed unitary via QR with phase correction.
    pub fn unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
        let qr = ginibre(d, rng).qr();
        let (q, r) = (qr.q(), qr.r());
        let phases = CMatrix::from_fn(d, d, |i, j| {
            if i == j && r[(i, i)].norm() > 0.0 {
                r[(i, i)] / r[(i, i)].norm()
            } else if i == j {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        q * phases
    }

    pub fn hermitian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
        let g = ginibre(d, rng);
        (&g + g.adjoint()) * Complex64::new(0.5, 0.0)
    }

    /// Hermitian with a repeated eigenvalue when `d >= 2`.
    pub fn degenerate_hermitian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
        let u = unitary(d, rng);
        let mut diag: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        if d >= 2 {
            diag[1] = diag[0];
        }
        let dm = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            d,
            diag.into_iter().map(|x| Complex64::new(x, 0.0)),
        ));
        &u * dm * u.adjoint()
    }

    /// `G G^dagger / Tr`, with the trace renormalized exactly.
    pub fn density<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
        let g = ginibre(d, rng);
        let m = &g * g.adjoint();
        let tr: Complex64 = m.diagonal().iter().sum();
        let m = m / tr;
        (&m + m.adjoint()) * Complex64::new(0.5, 0.0)
    }

    pub fn state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CVector {
        let v = CVector::from_fn(d, |_, _| gaussian(rng));
        let n = v.norm();
        v / Complex64::new(n, 0.0)
    }
}
