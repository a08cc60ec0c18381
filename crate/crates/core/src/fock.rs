//! Truncated two-mode Fock representation of the ladder algebra.
//!
//! Level `k` of mode `a` carries `q`'s Hermite function of order `k`; the Gibbs
//! vector `|1>` is the joint ground level `|0,0>`. A two-mode vector is an
//! `N x N` coefficient matrix `V[i][j]` on `|i>_a |j>_b`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gibbs;
use crate::weyl::{FloatElement, Word};

/// Largest per-mode dimension accepted by [`FockRep::build`].
pub const MAX_DIM: usize = 4096;
/// Largest per-mode dimension for which two-mode `N^2 x N^2` matrices are built.
pub const MAX_TWO_MODE_DIM: usize = 48;

/// `a` on `C^n`: `a|k> = sqrt(k)|k-1>`.
pub fn ladder_matrix(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if j == i + 1 { (j as f64).sqrt() } else { 0.0 })
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

#[derive(Clone, Debug)]
pub struct FockRep {
    n: usize,
    kt: f64,
    a: DMatrix<f64>,
    q: DMatrix<f64>,
    big_q: DMatrix<f64>,
}

impl FockRep {
    pub fn build(n: usize, kt: f64) -> Result<Self> {
        if n < 4 {
            return Err(Error::invalid(format!("truncation dimension must be >= 4, got {n}")));
        }
        if n > MAX_DIM {
            return Err(Error::ResourceLimit(format!("truncation dimension {n} exceeds {MAX_DIM}")));
        }
        if !(kt > 0.0 && kt.is_finite()) {
            return Err(Error::invalid(format!("kT must be positive and finite, got {kt}")));
        }
        let a = ladder_matrix(n);
        let ad = a.transpose();
        let s = kt.sqrt();
        let q = (&a + &ad) * s;
        let big_q = (&a - &ad) / (2.0 * s);
        Ok(Self { n, kt, a, q, big_q })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn kt(&self) -> f64 {
        self.kt
    }

    /// Single-mode `a` (the same matrix serves `b`).
    pub fn lowering(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// Single-mode `q` (`p` on mode `b` has the same matrix).
    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// Single-mode `Q` (`P` on mode `b` has the same matrix).
    pub fn big_q(&self) -> &DMatrix<f64> {
        &self.big_q
    }

    pub fn gibbs_vector(&self) -> DMatrix<Complex64> {
        let mut v = DMatrix::zeros(self.n, self.n);
        v[(0, 0)] = c(1.0);
        v
    }

    /// `max |([Q, q] - 1)_{ij}|` over levels `i, j < window`.
    pub fn commutator_residual(&self, window: usize) -> f64 {
        let comm = &self.big_q * &self.q - &self.q * &self.big_q;
        let w = window.min(self.n);
        let mut worst = 0.0f64;
        for i in 0..w {
            for j in 0..w {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((comm[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// Residual on the default safe window, levels `< N - 2`.
    pub fn window_residual(&self) -> f64 {
        self.commutator_residual(self.n - 2)
    }

    /// `j L` with `L = p Q - q P` on the `N^2`-dimensional two-mode space,
    /// index `i * N + j` for `|i>_a |j>_b`.
    pub fn liouvillian_matrix(&self) -> Result<DMatrix<Complex64>> {
        if self.n > MAX_TWO_MODE_DIM {
            return Err(Error::ResourceLimit(format!(
                "two-mode matrices need N <= {MAX_TWO_MODE_DIM}, got {}",
                self.n
            )));
        }
        let id = DMatrix::<f64>::identity(self.n, self.n);
        let p = id.kronecker(&self.q);
        let big_q = self.big_q.kronecker(&id);
        let q = self.q.kronecker(&id);
        let big_p = id.kronecker(&self.big_q);
        let l = &p * &big_q - &q * &big_p;
        Ok(l.map(|x| Complex64::new(0.0, x)))
    }

    /// Eigenvalues of the Hermitian matrix `j L`, ascending.
    pub fn liouvillian_spectrum(&self) -> Result<Vec<f64>> {
        let jl = self.liouvillian_matrix()?;
        let mut ev: Vec<f64> = jl.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        Ok(ev)
    }

    /// Applies a normal-ordered element to a two-mode vector level by level.
    /// Any amplitude pushed past level `N - 1` is a truncation error.
    pub fn apply_element(&self, x: &FloatElement, v: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        if v.nrows() != self.n || v.ncols() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: v.nrows() });
        }
        let mut out = DMatrix::zeros(self.n, self.n);
        for (w, coeff) in x.terms() {
            out += self.apply_word(*w, v)? * *coeff;
        }
        Ok(out)
    }

    fn apply_word(&self, w: Word, v: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        let mut m = v.clone();
        for _ in 0..w.b {
            m = lower_cols(&m);
        }
        for _ in 0..w.bd {
            m = raise_cols(&m)?;
        }
        let mut m = m.transpose();
        for _ in 0..w.a {
            m = lower_cols(&m);
        }
        for _ in 0..w.ad {
            m = raise_cols(&m)?;
        }
        Ok(m.transpose())
    }

    /// `A |1>`.
    pub fn gns_vector(&self, x: &FloatElement) -> Result<DMatrix<Complex64>> {
        self.apply_element(x, &self.gibbs_vector())
    }

    /// `<A|B> = rho(A^dagger B)` computed as a Fock-space inner product.
    pub fn gns_inner(&self, x: &FloatElement, y: &FloatElement) -> Result<Complex64> {
        let u = self.gns_vector(x)?;
        let v = self.gns_vector(y)?;
        Ok(inner(&u, &v))
    }

    /// Orthonormal polynomials in `q` applied to `|1>`, built by Gram-Schmidt
    /// on `q |H_m>` with full reorthogonalization.
    pub fn hermite_basis(&self, m_max: usize) -> Result<HermiteBasis> {
        if m_max > self.n / 2 {
            return Err(Error::Truncation(format!(
                "Hermite order {m_max} exceeds N/2 = {}",
                self.n / 2
            )));
        }
        let mut vectors = vec![DVector::from_fn(self.n, |i, _| if i == 0 { 1.0 } else { 0.0 })];
        let mut polys = vec![vec![1.0]];
        for m in 0..m_max {
            let mut w = &self.q * &vectors[m];
            // poly of q * H_m
            let mut poly = vec![0.0; m + 2];
            for (k, ck) in polys[m].iter().enumerate() {
                poly[k + 1] += ck;
            }
            for _ in 0..2 {
                for (k, h) in vectors.iter().enumerate() {
                    let proj = h.dot(&w);
                    w -= h * proj;
                    for (i, ci) in polys[k].iter().enumerate() {
                        poly[i] -= proj * ci;
                    }
                }
            }
            let norm = w.norm();
            if !(norm > 1e-300) {
                return Err(Error::Truncation(format!("Gram-Schmidt breakdown at order {}", m + 1)));
            }
            vectors.push(w / norm);
            polys.push(poly.into_iter().map(|x| x / norm).collect());
        }
        let basis = HermiteBasis { polynomials: polys, vectors };
        let err = basis.orthonormality_error();
        if err > 1e-10 {
            return Err(Error::Truncation(format!("Hermite basis lost orthogonality: {err:e}")));
        }
        Ok(basis)
    }

    /// `a_q = sum_{m < M} sqrt(m+1) |H_m><H_{m+1}|` with its checks.
    pub fn lowering_q(&self, m_max: usize) -> Result<LoweringReport> {
        let basis = self.hermite_basis(m_max + 1)?;
        let mut aq = DMatrix::<f64>::zeros(self.n, self.n);
        for m in 0..m_max {
            aq += &basis.vectors[m] * basis.vectors[m + 1].transpose() * ((m + 1) as f64).sqrt();
        }
        let vac = &basis.vectors[0];
        let annihilates_gibbs = (&aq * vac).norm();
        let comm = &aq * aq.transpose() - aq.transpose() * &aq;
        let mut ccr_residual = 0.0f64;
        for i in 0..m_max {
            for j in 0..m_max {
                let v = basis.vectors[i].dot(&(&comm * &basis.vectors[j]));
                let target = if i == j { 1.0 } else { 0.0 };
                ccr_residual = ccr_residual.max((v - target).abs());
            }
        }
        let number_expectations = (0..=m_max)
            .map(|m| {
                let h = &basis.vectors[m];
                let v = &aq * h;
                v.dot(&v)
            })
            .collect();
        Ok(LoweringReport {
            matrix: aq,
            basis,
            annihilates_gibbs,
            ccr_residual,
            number_expectations,
        })
    }

    /// Moments of `q^n|1>/||.||` against the modulated Gaussian
    /// `(2^n n!/(2n)!) x^{2n}/kT^n exp(-x^2/2kT)/sqrt(2 pi kT)`.
    pub fn modulated_density_check(&self, n: usize, grid: &[f64]) -> Result<ModulationReport> {
        const K_MAX: usize = 3;
        if n + 2 * K_MAX + 1 >= self.n || n > self.n / 2 {
            return Err(Error::Truncation(format!("modulation order {n} too high for N = {}", self.n)));
        }
        let mut psi = DVector::from_fn(self.n, |i, _| if i == 0 { 1.0 } else { 0.0 });
        for _ in 0..n {
            psi = &self.q * psi;
        }
        psi /= psi.norm();
        let mut moments = Vec::new();
        let mut odd_moments = Vec::new();
        let mut qk = psi.clone();
        for k in 1..=(2 * K_MAX + 1) {
            qk = &self.q * qk;
            let v = psi.dot(&qk);
            if k % 2 == 0 {
                let kk = (k / 2) as u32;
                let analytic = modulated_moment(n as u32, kk, self.kt);
                moments.push(MomentComparison { k: kk, numeric: v, analytic, abs_error: (v - analytic).abs() });
            } else {
                odd_moments.push(v);
            }
        }
        let basis = self.hermite_basis(n)?;
        let coeffs: Vec<f64> = basis.vectors.iter().map(|h| h.dot(&psi)).collect();
        let rows = grid
            .iter()
            .map(|&x| {
                let amp: f64 = coeffs.iter().zip(&basis.polynomials).map(|(c, p)| c * poly_eval(p, x)).sum();
                let numeric = amp * amp * gaussian(x, self.kt);
                let target = modulated_density(n as u32, x, self.kt);
                DensityRow { q: x, numeric, target, abs_error: (numeric - target).abs() }
            })
            .collect();
        Ok(ModulationReport { n, moments, odd_moments, rows })
    }

    /// `U = exp(kappa Q)` applied to `|1>`: mean and variance of `q`.
    pub fn translate_check(&self, kappa: f64) -> Result<TranslationReport> {
        let limit = (self.n as f64 * self.kt).sqrt() / 4.0;
        if kappa.abs() > limit {
            return Err(Error::Truncation(format!("|kappa| = {} exceeds sqrt(N kT)/4 = {limit}", kappa.abs())));
        }
        let u = (&self.big_q * kappa).exp();
        let psi = u.column(0).into_owned();
        let qpsi = &self.q * &psi;
        let mean = psi.dot(&qpsi);
        let variance = qpsi.dot(&qpsi) - mean * mean;
        let sign = if kappa == 0.0 || mean.abs() < 1e-12 {
            0
        } else if (mean > 0.0) == (kappa > 0.0) {
            1
        } else {
            -1
        };
        Ok(TranslationReport {
            kappa,
            mean,
            variance,
            norm: psi.norm(),
            mean_abs_error: (mean.abs() - kappa.abs()).abs(),
            variance_error: (variance - self.kt).abs(),
            realized_sign: sign,
        })
    }

    /// Convex mixture of translated states: mixture mean against `sign * sum beta_i kappa_i`.
    pub fn translate_mixture(&self, mixture: &[(f64, f64)]) -> Result<MixtureReport> {
        let total: f64 = mixture.iter().map(|(b, _)| b).sum();
        if mixture.iter().any(|(b, _)| *b < 0.0) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("mixture weights must be non-negative and sum to 1"));
        }
        let mut mean = 0.0;
        let mut sign = 0;
        for (beta, kappa) in mixture {
            let r = self.translate_check(*kappa)?;
            mean += beta * r.mean;
            if r.realized_sign != 0 {
                sign = r.realized_sign;
            }
        }
        let weighted_kappa: f64 = mixture.iter().map(|(b, k)| b * k).sum();
        let expected = if sign == 0 { 0.0 } else { sign as f64 * weighted_kappa };
        Ok(MixtureReport { mean, weighted_kappa, realized_sign: sign, abs_error: (mean - expected).abs() })
    }

    /// `rho(A1 V A2)` with `V = |1><1|`, computed in the representation,
    /// against `rho(A1) rho(A2)` from the symbolic state.
    pub fn gibbs_projection_check(&self, a1: &FloatElement, a2: &FloatElement) -> Result<ProjectionReport> {
        let v2 = self.gns_vector(a2)?;
        let projected = self.gibbs_vector() * v2[(0, 0)];
        let lhs = self.apply_element(a1, &projected)?[(0, 0)];
        let rhs = gibbs::eval(a1) * gibbs::eval(a2);
        Ok(ProjectionReport { lhs, rhs, residual: (lhs - rhs).norm() })
    }
}

fn lower_cols(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = m.nrows();
    let mut out = DMatrix::zeros(n, m.ncols());
    for k in 1..n {
        let s = (k as f64).sqrt();
        for j in 0..m.ncols() {
            out[(k - 1, j)] = m[(k, j)] * s;
        }
    }
    out
}

fn raise_cols(m: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let n = m.nrows();
    if m.row(n - 1).iter().any(|z| *z != c(0.0)) {
        return Err(Error::Truncation(format!("raising past level {}", n - 1)));
    }
    let mut out = DMatrix::zeros(n, m.ncols());
    for k in 0..n - 1 {
        let s = ((k + 1) as f64).sqrt();
        for j in 0..m.ncols() {
            out[(k + 1, j)] = m[(k, j)] * s;
        }
    }
    Ok(out)
}

/// `sum conj(u_ij) v_ij`.
pub fn inner(u: &DMatrix<Complex64>, v: &DMatrix<Complex64>) -> Complex64 {
    u.iter().zip(v.iter()).map(|(x, y)| x.conj() * y).sum()
}

fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn gaussian(x: f64, kt: f64) -> f64 {
    (-x * x / (2.0 * kt)).exp() / (2.0 * std::f64::consts::PI * kt).sqrt()
}

/// `(2^n n!/(2n)!) x^{2n}/kT^n` times the Gibbs Gaussian in `q`.
pub fn modulated_density(n: u32, x: f64, kt: f64) -> f64 {
    // 2^n n!/(2n)! = 1/(2n-1)!!
    let norm: f64 = (1..=n).map(|i| 1.0 / (2 * i - 1) as f64).product();
    norm * (x * x / kt).powi(n as i32) * gaussian(x, kt)
}

/// `<q^{2k}>` under [`modulated_density`]:
/// `kT^k (2(n+k))!/(2n)! * n!/(2^k (n+k)!) = kT^k (2n+2k-1)!!/(2n-1)!!`.
pub fn modulated_moment(n: u32, k: u32, kt: f64) -> f64 {
    let mut v = kt.powi(k as i32);
    for i in (n + 1)..=(n + k) {
        v *= (2 * i - 1) as f64;
    }
    v
}

#[derive(Clone, Debug)]
pub struct HermiteBasis {
    /// `polynomials[m][i]` is the coefficient of `q^i` in `H_m`.
    pub polynomials: Vec<Vec<f64>>,
    pub vectors: Vec<DVector<f64>>,
}

impl HermiteBasis {
    pub fn order(&self) -> usize {
        self.vectors.len() - 1
    }

    pub fn orthonormality_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, u) in self.vectors.iter().enumerate() {
            for (j, v) in self.vectors.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((u.dot(v) - target).abs());
            }
        }
        worst
    }
}

#[derive(Clone, Debug)]
pub struct LoweringReport {
    pub matrix: DMatrix<f64>,
    pub basis: HermiteBasis,
    pub annihilates_gibbs: f64,
    /// `max |<H_i|[a_q, a_q^dagger]|H_j> - delta_ij|` for `i, j < M`.
    pub ccr_residual: f64,
    /// `<H_m| a_q^dagger a_q |H_m>` for `m = 0..=M`.
    pub number_expectations: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentComparison {
    pub k: u32,
    pub numeric: f64,
    pub analytic: f64,
    pub abs_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DensityRow {
    pub q: f64,
    pub numeric: f64,
    pub target: f64,
    pub abs_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ModulationReport {
    pub n: usize,
    /// `<q^{2k}>` for `k = 1..=3`.
    pub moments: Vec<MomentComparison>,
    /// `<q^{2k+1}>` for `k = 0..=3`.
    pub odd_moments: Vec<f64>,
    pub rows: Vec<DensityRow>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TranslationReport {
    pub kappa: f64,
    pub mean: f64,
    pub variance: f64,
    pub norm: f64,
    pub mean_abs_error: f64,
    pub variance_error: f64,
    /// `+1` when `<q>` moves with `kappa`, `-1` against it, `0` undetermined.
    pub realized_sign: i32,
}

#[derive(Clone, Debug, Serialize)]
pub struct MixtureReport {
    pub mean: f64,
    pub weighted_kappa: f64,
    pub realized_sign: i32,
    pub abs_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProjectionReport {
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PolarizationReport {
    pub residual: f64,
    pub lhs_rank: usize,
}

/// `|v1><v2| + |v2><v1|` against `(|v1+v2><v1+v2| - |v1-v2><v1-v2|)/2`.
pub fn polarization_check(v1: &DVector<Complex64>, v2: &DVector<Complex64>) -> Result<PolarizationReport> {
    if v1.len() != v2.len() {
        return Err(Error::DimensionMismatch { expected: v1.len(), got: v2.len() });
    }
    let outer = |x: &DVector<Complex64>, y: &DVector<Complex64>| x * y.adjoint();
    let lhs = outer(v1, v2) + outer(v2, v1);
    let s = v1 + v2;
    let d = v1 - v2;
    let rhs = (outer(&s, &s) - outer(&d, &d)) * c(0.5);
    let residual = (&lhs - &rhs).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let scale = lhs.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let lhs_rank = lhs.singular_values().iter().filter(|s| **s > 1e-10 * scale).count();
    Ok(PolarizationReport { residual, lhs_rank })
}
