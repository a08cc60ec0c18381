//! CHSH analysis: count-table correlations, the Landau identity for the
//! CHSH operator, the extremal 4x4 model, and two-level cat states.

use std::io::Read;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{commutator, max_abs, op_norm, random, real_matrix, trace, CMatrix, CVector};

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub const TABLE1_CSV: &str = include_str!("../fixtures/table1.csv");

/// Coincidence counts. `cells[r][col]` uses the printed layout: rows
/// `B0b1, B0b2, B1b1, B1b2`, columns `A0a1, A0a2, A1a1, A1a2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountTable {
    pub counts: [[u64; 4]; 4],
}

/// Which correlation carries the minus sign in `S`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChshPattern {
    /// `|E00 + E01 + E11 - E10|`
    #[default]
    MinusE10,
    MinusE00,
    MinusE01,
    MinusE11,
}

impl ChshPattern {
    /// Signs on `(E00, E10, E01, E11)`.
    pub fn signs(self) -> [f64; 4] {
        match self {
            ChshPattern::MinusE10 => [1.0, -1.0, 1.0, 1.0],
            ChshPattern::MinusE00 => [-1.0, 1.0, 1.0, 1.0],
            ChshPattern::MinusE01 => [1.0, 1.0, -1.0, 1.0],
            ChshPattern::MinusE11 => [1.0, 1.0, 1.0, -1.0],
        }
    }

    pub fn s(self, e: [f64; 4]) -> f64 {
        self.signs().iter().zip(e).map(|(s, e)| s * e).sum::<f64>().abs()
    }
}

impl CountTable {
    pub fn table1() -> Self {
        Self::from_csv_str(TABLE1_CSV).expect("bundled fixture parses")
    }

    /// `n(A, a, B, b)` with settings in `{0, 1}` and outcomes in `{1, 2}`.
    pub fn get(&self, a_setting: usize, a_out: usize, b_setting: usize, b_out: usize) -> u64 {
        self.counts[2 * b_setting + (b_out - 1)][2 * a_setting + (a_out - 1)]
    }

    pub fn set(&mut self, a_setting: usize, a_out: usize, b_setting: usize, b_out: usize, n: u64) {
        self.counts[2 * b_setting + (b_out - 1)][2 * a_setting + (a_out - 1)] = n;
    }

    pub fn block_total(&self, a_setting: usize, b_setting: usize) -> u64 {
        let mut t = 0;
        for a in 1..=2 {
            for b in 1..=2 {
                t += self.get(a_setting, a, b_setting, b);
            }
        }
        t
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// 4x4 grid with a header row; a leading label column is optional.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
        let header_len = rdr.headers()?.len();
        if header_len != 4 && header_len != 5 {
            return Err(Error::Ingest { line: 1, message: format!("expected 4 setting columns, found {header_len} fields") });
        }
        let mut counts = [[0u64; 4]; 4];
        let mut rows = 0;
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            if rows == 4 {
                return Err(Error::Ingest { line, message: "more than 4 count rows".into() });
            }
            let fields: Vec<&str> = rec.iter().collect();
            let values = match fields.len() {
                4 => &fields[..],
                5 => &fields[1..],
                n => return Err(Error::Ingest { line, message: format!("expected 4 counts, found {n} fields") }),
            };
            for (j, v) in values.iter().enumerate() {
                counts[rows][j] = v.trim().parse().map_err(|_| Error::Ingest {
                    line,
                    message: format!("'{}' is not a non-negative integer count", v.trim()),
                })?;
            }
            rows += 1;
        }
        if rows != 4 {
            return Err(Error::Ingest { line: rows + 2, message: format!("expected 4 count rows, found {rows}") });
        }
        Ok(Self { counts })
    }

    pub fn from_csv_str(s: &str) -> Result<Self> {
        Self::from_csv_reader(s.as_bytes())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Reads `.json` as JSON, anything else as CSV.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::from_json_str(&text)
        } else {
            Self::from_csv_str(&text)
        }
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("setting,A0a1,A0a2,A1a1,A1a2\n");
        for (label, row) in ["B0b1", "B0b2", "B1b1", "B1b2"].iter().zip(&self.counts) {
            let cells: Vec<String> = row.iter().map(|n| n.to_string()).collect();
            out.push_str(&format!("{label},{}\n", cells.join(",")));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Correlations {
    pub e00: f64,
    pub e10: f64,
    pub e01: f64,
    pub e11: f64,
    pub s: f64,
}

impl Correlations {
    pub fn as_array(&self) -> [f64; 4] {
        [self.e00, self.e10, self.e01, self.e11]
    }
}

/// `E_AB = (n_{a1 b1} - n_{a2 b1} - n_{a1 b2} + n_{a2 b2}) / total`.
pub fn block_correlation(t: &CountTable, a_setting: usize, b_setting: usize) -> Result<f64> {
    let total = t.block_total(a_setting, b_setting);
    if total == 0 {
        return Err(Error::InsufficientData(format!("setting block A={a_setting}, B={b_setting} has no counts")));
    }
    let n = |a, b| t.get(a_setting, a, b_setting, b) as f64;
    Ok((n(1, 1) - n(2, 1) - n(1, 2) + n(2, 2)) / total as f64)
}

pub fn correlations_from_counts(t: &CountTable) -> Result<Correlations> {
    correlations_with_pattern(t, ChshPattern::default())
}

pub fn correlations_with_pattern(t: &CountTable, pattern: ChshPattern) -> Result<Correlations> {
    let e00 = block_correlation(t, 0, 0)?;
    let e10 = block_correlation(t, 1, 0)?;
    let e01 = block_correlation(t, 0, 1)?;
    let e11 = block_correlation(t, 1, 1)?;
    Ok(Correlations { e00, e10, e01, e11, s: pattern.s([e00, e10, e01, e11]) })
}

#[derive(Clone, Debug)]
pub struct ChshOperators {
    pub a: CMatrix,
    pub a_prime: CMatrix,
    pub b: CMatrix,
    pub b_prime: CMatrix,
}

impl ChshOperators {
    pub fn new(a: CMatrix, a_prime: CMatrix, b: CMatrix, b_prime: CMatrix) -> Result<Self> {
        let d = a.nrows();
        for m in [&a, &a_prime, &b, &b_prime] {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::DimensionMismatch { expected: d, got: m.nrows() });
            }
            if max_abs(&(m - m.adjoint())) > 1e-12 {
                return Err(Error::invalid("CHSH operators must be Hermitian"));
            }
            if max_abs(&(m * m - CMatrix::identity(d, d))) > 1e-12 {
                return Err(Error::invalid("CHSH operators must square to the identity"));
            }
        }
        for x in [&a, &a_prime] {
            for y in [&b, &b_prime] {
                if max_abs(&commutator(x, y)) > 1e-12 {
                    return Err(Error::invalid("Alice's operators must commute with Bob's"));
                }
            }
        }
        Ok(Self { a, a_prime, b, b_prime })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// `C = a b + a b' + a' b' - a' b`.
    pub fn c(&self) -> CMatrix {
        &self.a * &self.b + &self.a * &self.b_prime + &self.a_prime * &self.b_prime - &self.a_prime * &self.b
    }

    /// `Tr[C rho]`.
    pub fn chsh_value(&self, rho: &CMatrix) -> f64 {
        trace(&(self.c() * rho)).re
    }

    /// `(<a b>, <a' b>, <a b'>, <a' b'>)`, i.e. `(E00, E10, E01, E11)`.
    pub fn correlations(&self, rho: &CMatrix) -> [f64; 4] {
        let e = |x: &CMatrix, y: &CMatrix| trace(&(x * y * rho)).re;
        [e(&self.a, &self.b), e(&self.a_prime, &self.b), e(&self.a, &self.b_prime), e(&self.a_prime, &self.b_prime)]
    }
}

#[derive(Clone, Debug)]
pub struct LandauReport {
    pub c: CMatrix,
    pub c_squared: CMatrix,
    /// `max |C^2 - 4 - [a, a'][b, b']|`
    pub identity_residual: f64,
    pub trace_c: Complex64,
    pub trace_c_squared: Complex64,
    /// `max |C^3 - 8 C|`
    pub cube_residual: f64,
    pub c_squared_norm: f64,
}

pub fn landau_c(ops: &ChshOperators) -> LandauReport {
    let d = ops.dim();
    let cm = ops.c();
    let c2 = &cm * &cm;
    let rhs = CMatrix::identity(d, d) * c(4.0) + commutator(&ops.a, &ops.a_prime) * commutator(&ops.b, &ops.b_prime);
    LandauReport {
        identity_residual: max_abs(&(&c2 - rhs)),
        trace_c: trace(&cm),
        trace_c_squared: trace(&c2),
        cube_residual: max_abs(&(&c2 * &cm - &cm * c(8.0))),
        c_squared_norm: op_norm(&c2),
        c: cm,
        c_squared: c2,
    }
}

#[derive(Clone, Debug)]
pub struct AppendixBModel {
    pub ops: ChshOperators,
    pub psi: CVector,
    /// `(C^2 - 2 sqrt2 C)/16`
    pub rho: CMatrix,
    /// `(C^2 + 2 sqrt2 C)/16`
    pub rho_plus: CMatrix,
}

pub fn appendix_b_model() -> AppendixBModel {
    let a = real_matrix(4, 4, &[1., 0., 0., 0., 0., -1., 0., 0., 0., 0., 1., 0., 0., 0., 0., -1.]);
    let a_prime = real_matrix(4, 4, &[0., 1., 0., 0., 1., 0., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0.]);
    let b = real_matrix(4, 4, &[1., 0., 0., 0., 0., 1., 0., 0., 0., 0., -1., 0., 0., 0., 0., -1.]);
    let b_prime = real_matrix(4, 4, &[0., 0., 1., 0., 0., 0., 0., 1., 1., 0., 0., 0., 0., 1., 0., 0.]);
    let ops = ChshOperators::new(a, a_prime, b, b_prime).expect("printed model is valid");
    let r2 = 2f64.sqrt();
    let lo = (r2 - 1.0).sqrt();
    let hi = (r2 + 1.0).sqrt();
    let scale = 1.0 / (4.0 * r2).sqrt();
    let psi = CVector::from_vec(vec![c(lo * scale), c(hi * scale), c(-hi * scale), c(lo * scale)]);
    let cm = ops.c();
    let c2 = &cm * &cm;
    let rho = (&c2 - &cm * c(2.0 * r2)) / c(16.0);
    let rho_plus = (&c2 + &cm * c(2.0 * r2)) / c(16.0);
    AppendixBModel { ops, psi, rho, rho_plus }
}

/// Random `+-1`-valued Hermitian involution `U diag(s) U^dagger`.
fn random_involution<R: Rng + ?Sized>(u: &CMatrix, rng: &mut R) -> CMatrix {
    let d = u.nrows();
    let signs = CVector::from_fn(d, |_, _| if rng.random_bool(0.5) { c(1.0) } else { c(-1.0) });
    u * CMatrix::from_diagonal(&signs) * u.adjoint()
}

/// CHSH operators on `C^da (x) C^db`. With `commuting`, Alice's pair shares
/// one eigenbasis so `[a, a'] = 0`.
pub fn random_model<R: Rng + ?Sized>(da: usize, db: usize, commuting: bool, rng: &mut R) -> ChshOperators {
    let ia = CMatrix::identity(da, da);
    let ib = CMatrix::identity(db, db);
    let ua = random::unitary(da, rng);
    let ua2 = if commuting { ua.clone() } else { random::unitary(da, rng) };
    let ub = random::unitary(db, rng);
    let ub2 = random::unitary(db, rng);
    let a = random_involution(&ua, rng).kronecker(&ib);
    let a_prime = random_involution(&ua2, rng).kronecker(&ib);
    let b = ia.kronecker(&random_involution(&ub, rng));
    let b_prime = ia.kronecker(&random_involution(&ub2, rng));
    let sym = |m: CMatrix| (&m + m.adjoint()) * c(0.5);
    ChshOperators { a: sym(a), a_prime: sym(a_prime), b: sym(b), b_prime: sym(b_prime) }
}

/// Two-level state `[[alpha, beta], [beta*, 1 - alpha]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CatState {
    pub alpha: f64,
    pub beta: Complex64,
}

impl CatState {
    pub fn new(alpha: f64, beta: Complex64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::invalid(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        if beta.norm_sqr() > alpha * (1.0 - alpha) + 1e-12 {
            return Err(Error::invalid("|beta|^2 exceeds alpha (1 - alpha)"));
        }
        Ok(Self { alpha, beta })
    }

    /// Mixture `M_alpha`.
    pub fn mixed(alpha: f64) -> Result<Self> {
        Self::new(alpha, c(0.0))
    }

    /// Superposition `S_alpha`.
    pub fn superposition(alpha: f64) -> Result<Self> {
        Self::new(alpha, c((alpha * (1.0 - alpha)).max(0.0).sqrt()))
    }

    pub fn matrix(&self) -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[c(self.alpha), self.beta, self.beta.conj(), c(1.0 - self.alpha)])
    }

    pub fn is_pure(&self, tol: f64) -> bool {
        (self.beta.norm_sqr() - self.alpha * (1.0 - self.alpha)).abs() <= tol
    }
}

pub fn alive_projector() -> CMatrix {
    real_matrix(2, 2, &[1., 0., 0., 0.])
}

pub fn carroll_c1() -> CMatrix {
    real_matrix(2, 2, &[0., 1., 1., 0.])
}

pub fn carroll_c2() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0.0), Complex64::new(0.0, 1.0), Complex64::new(0.0, -1.0), c(0.0)])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CatClass {
    Pure,
    Mixed,
    Intermediate,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CatEstimate {
    /// `Tr[A rho]`
    pub alpha: f64,
    pub c1: f64,
    pub c2: f64,
    /// `(<C1> + j <C2>)/2`
    pub beta: Complex64,
    pub class: CatClass,
}

pub const CAT_CLASS_TOL: f64 = 1e-9;

/// Recovers `beta` from `<C1> = 2 Re beta` and `<C2> = 2 Im beta`.
pub fn cat_discriminate(rho: &CMatrix) -> Result<CatEstimate> {
    if rho.nrows() != 2 || rho.ncols() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: rho.nrows() });
    }
    let alpha = trace(&(alive_projector() * rho)).re;
    let c1 = trace(&(carroll_c1() * rho)).re;
    let c2 = trace(&(carroll_c2() * rho)).re;
    let beta = Complex64::new(c1 / 2.0, c2 / 2.0);
    let bound = alpha * (1.0 - alpha);
    let class = if (beta.norm_sqr() - bound).abs() <= CAT_CLASS_TOL {
        CatClass::Pure
    } else if beta.norm_sqr() <= CAT_CLASS_TOL {
        CatClass::Mixed
    } else {
        CatClass::Intermediate
    };
    Ok(CatEstimate { alpha, c1, c2, beta, class })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn table1_correlations() {
        let t = CountTable::table1();
        assert_eq!(t.total(), 4470 + 3380 + 4212 + 3137);
        let e = correlations_from_counts(&t).unwrap();
        assert_eq!(e.e00, -3102.0 / 4470.0);
        assert_eq!(e.e10, 2394.0 / 3380.0);
        assert_eq!(e.e01, -2586.0 / 4212.0);
        assert_eq!(e.e11, -2189.0 / 3137.0);
        assert!((e.s - 2.714).abs() < 1e-3);
    }

    #[test]
    fn trivial_tables() {
        let mut t = CountTable { counts: [[0; 4]; 4] };
        for a in 0..2 {
            for b in 0..2 {
                t.set(a, 1, b, 1, 7);
                t.set(a, 2, b, 2, 3);
            }
        }
        let e = correlations_from_counts(&t).unwrap();
        assert_eq!(e.as_array(), [1.0; 4]);
        assert_eq!(e.s, 2.0);
        let u = CountTable { counts: [[5; 4]; 4] };
        assert_eq!(correlations_from_counts(&u).unwrap().s, 0.0);
        let mut z = u;
        for a in 1..=2 {
            for b in 1..=2 {
                z.set(1, a, 1, b, 0);
            }
        }
        assert!(matches!(correlations_from_counts(&z), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn count_table_formats() {
        let t = CountTable::table1();
        assert_eq!(CountTable::from_csv_str(&t.to_csv_string()).unwrap(), t);
        let bare = "A0a1,A0a2,A1a1,A1a2\n1,2,3,4\n5,6,7,8\n9,10,11,12\n13,14,15,16\n";
        let b = CountTable::from_csv_str(bare).unwrap();
        assert_eq!(b.get(1, 2, 1, 2), 16);
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(CountTable::from_json_str(&json).unwrap(), t);
        let bad = "A0a1,A0a2,A1a1,A1a2\n1,2,x,4\n";
        assert!(matches!(CountTable::from_csv_str(bad), Err(Error::Ingest { line: 2, .. })));
        assert!(matches!(CountTable::from_csv_str("A,B\n1,2\n"), Err(Error::Ingest { .. })));
    }

    #[test]
    fn appendix_b_golden() {
        let m = appendix_b_model();
        let r = landau_c(&m.ops);
        let c_printed = real_matrix(4, 4, &[1., -1., 1., 1., -1., -1., 1., -1., 1., 1., -1., 1., 1., -1., 1., 1.]);
        let c2_printed = real_matrix(4, 4, &[4., 0., 0., 4., 0., 4., -4., 0., 0., -4., 4., 0., 4., 0., 0., 4.]);
        assert_eq!(r.c, c_printed);
        assert_eq!(r.c_squared, c2_printed);
        assert_eq!(r.cube_residual, 0.0);
        assert_eq!(r.trace_c, c(0.0));
        assert_eq!(r.trace_c_squared, c(16.0));
        assert_eq!(r.identity_residual, 0.0);
        assert!((r.c_squared_norm - 8.0).abs() < 1e-12);
        let r2 = 2f64.sqrt();
        assert!((m.ops.chsh_value(&m.rho) + 2.0 * r2).abs() < 1e-12);
        assert!((m.ops.chsh_value(&m.rho_plus) - 2.0 * r2).abs() < 1e-12);
        assert!(max_abs(&(&m.psi * m.psi.adjoint() - &m.rho)) < 1e-12);
        let e = m.ops.correlations(&m.rho);
        let h = r2 / 2.0;
        for (got, want) in e.iter().zip([-h, h, -h, -h]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((ChshPattern::default().s(e) - 2.0 * r2).abs() < 1e-12);
        for x in [&m.ops.a, &m.ops.a_prime, &m.ops.b, &m.ops.b_prime] {
            assert!(trace(&(x * &m.rho)).norm() < 1e-12);
        }
    }

    #[test]
    fn commuting_model_has_c_squared_four() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let ops = random_model(2, 3, true, &mut rng);
        let r = landau_c(&ops);
        assert!(max_abs(&(r.c_squared - CMatrix::identity(6, 6) * c(4.0))) < 1e-11);
        let u = random_model(2, 2, false, &mut rng);
        assert!(landau_c(&u).c_squared_norm <= 8.0 + 1e-10);
        assert!(ChshOperators::new(u.a, u.a_prime, u.b, u.b_prime).is_ok());
    }

    #[test]
    fn invalid_operators_rejected() {
        let m = appendix_b_model();
        assert!(ChshOperators::new(m.ops.a.clone(), m.ops.a_prime.clone(), m.ops.a_prime.clone(), m.ops.b_prime.clone()).is_err());
        let half = &m.ops.a * c(0.5);
        assert!(ChshOperators::new(half, m.ops.a_prime.clone(), m.ops.b.clone(), m.ops.b_prime.clone()).is_err());
    }

    #[test]
    fn cat_examples() {
        let mixed = CatState::mixed(0.3).unwrap();
        let est = cat_discriminate(&mixed.matrix()).unwrap();
        assert_eq!(est.beta, c(0.0));
        assert_eq!(est.class, CatClass::Mixed);
        let s = CatState::superposition(0.5).unwrap();
        let est = cat_discriminate(&s.matrix()).unwrap();
        assert!((est.beta.norm() - 0.5).abs() < 1e-15);
        assert!((est.c1 - 1.0).abs() < 1e-12);
        assert_eq!(est.class, CatClass::Pure);
        let planted = Complex64::new(0.1, -0.2);
        let est = cat_discriminate(&CatState::new(0.4, planted).unwrap().matrix()).unwrap();
        assert!((est.beta - planted).norm() < 1e-15);
        assert_eq!(est.class, CatClass::Intermediate);
        assert!(CatState::new(0.5, c(0.6)).is_err());
    }
}
