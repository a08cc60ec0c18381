//! Acceptance suite: one line per criterion. Each line combines the shared
//! check from `verify` with frozen values computed by hand here.

use std::process::ExitCode;

use koopman_core::bell::{self, CatState, CountTable};
use koopman_core::coincidence::{self, SimConfig};
use koopman_core::fock::FockRep;
use koopman_core::gibbs;
use koopman_core::measurement::{self, real_matrix, CMatrix, CVector, DensityMatrix, InstrumentSetup, Observable};
use koopman_core::scalar::rational;
use koopman_core::verify;
use koopman_core::weyl::CanonicalGenerators;
use num_complex::Complex64;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn oracle_1() -> bool {
    // (n11 - n21 - n12 + n22) / block total, by hand from the fixture
    let frozen: [f64; 4] = [
        (320.0 - 1780.0 - 2006.0 + 364.0) / 4470.0,
        (1675.0 - 193.0 - 300.0 + 1212.0) / 3380.0,
        (439.0 - 1741.0 - 1658.0 + 374.0) / 4212.0,
        (293.0 - 1200.0 - 1463.0 + 181.0) / 3137.0,
    ];
    let e = bell::correlations_from_counts(&CountTable::table1()).unwrap();
    let s = (frozen[0] + frozen[2] + frozen[3] - frozen[1]).abs();
    e.as_array() == frozen && e.s == s && close(s, 2.714, 1e-3)
}

fn oracle_2() -> bool {
    let a = real_matrix(4, 4, &[1., 0., 0., 0., 0., -1., 0., 0., 0., 0., 1., 0., 0., 0., 0., -1.]);
    let ap = real_matrix(4, 4, &[0., 1., 0., 0., 1., 0., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0.]);
    let b = real_matrix(4, 4, &[1., 0., 0., 0., 0., 1., 0., 0., 0., 0., -1., 0., 0., 0., 0., -1.]);
    let bp = real_matrix(4, 4, &[0., 0., 1., 0., 0., 0., 0., 1., 1., 0., 0., 0., 0., 1., 0., 0.]);
    let cm = &a * &b + &a * &bp + &ap * &bp - &ap * &b;
    let r2 = 2f64.sqrt();
    let lo = (r2 - 1.0).sqrt();
    let hi = (r2 + 1.0).sqrt();
    let n = (4.0 * r2).sqrt();
    let psi = CVector::from_vec(vec![c(lo / n), c(hi / n), c(-hi / n), c(lo / n)]);
    let value = (psi.adjoint() * &cm * &psi)[(0, 0)].re;
    cm == real_matrix(4, 4, &verify::PRINTED_C)
        && &cm * &cm == real_matrix(4, 4, &verify::PRINTED_C2)
        && close(psi.norm(), 1.0, 1e-15)
        && close(value, -2.0 * r2, 1e-12)
}

fn oracle_3() -> bool {
    let g = CanonicalGenerators::exact(rational(1, 1));
    let frozen = [((2, 0), 1), ((4, 0), 3), ((2, 2), 1), ((6, 0), 15), ((4, 4), 9), ((8, 0), 105), ((0, 6), 15), ((3, 1), 0)];
    let moments_ok = frozen.iter().all(|((m, n), want)| {
        let v = gibbs::eval(&g.q.pow(*m).multiply(&g.p.pow(*n)));
        v.re == rational(*want, 1) && v.im == rational(0, 1)
    });
    // rho(exp(j(q + p)/2)) = exp(-1/4) at kT = 1
    let gf = CanonicalGenerators::new(1.0).unwrap();
    let x = (&gf.q + &gf.p).scale(&Complex64::new(0.0, 0.5));
    let series = gibbs::eval(&x.exp_truncated_with_limit(24, 24).unwrap());
    moments_ok && (series - c((-0.25f64).exp())).norm() < 1e-12
}

fn oracle_4_5() -> (bool, bool) {
    let a = Observable::new(real_matrix(2, 2, &[1., 0., 0., 2.]), "A").unwrap();
    let x = Observable::new(real_matrix(2, 2, &[1., 1., 1., 3.]), "X").unwrap();
    let rho = DensityMatrix::new(real_matrix(2, 2, &[0.7, 0.2, 0.2, 0.3])).unwrap();
    let sp = measurement::spectral(&a, None);
    let rho_a = measurement::luders_state(&rho, &sp).unwrap();
    let x_a = measurement::luders_observable(&x, &sp).unwrap();
    let lhs = measurement::trace(&(&a.matrix * &x.matrix * &rho_a.matrix)).re;
    let rhs = measurement::trace(&(&a.matrix * &x_a.matrix * &rho.matrix)).re;
    let luders = close(lhs, 2.5, 1e-14) && close(rhs, 2.5, 1e-14);
    let rep = measurement::repeat_correlation(&a, &rho).unwrap();
    let repeat = close(rep.joint[0][0], 0.7, 1e-14)
        && close(rep.joint[1][1], 0.3, 1e-14)
        && rep.joint[0][1].abs() < 1e-15
        && rep.joint[1][0].abs() < 1e-15;
    (luders, repeat)
}

fn oracle_6() -> bool {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let t = std::f64::consts::PI / 8.0;
    let setup = InstrumentSetup {
        dim: 2,
        a_basis: vec![vec![[1.0, 0.0], [0.0, 0.0]], vec![[0.0, 0.0], [1.0, 0.0]]],
        b_basis: vec![vec![[h, 0.0], [h, 0.0]], vec![[h, 0.0], [-h, 0.0]]],
        a_eigenvalues: None,
        b_eigenvalues: None,
        a_pointer_start: 0,
        b_pointer_start: 0,
        psi: None,
    };
    let psi = CVector::from_vec(vec![c(t.cos()), c(t.sin())]);
    let r = measurement::instrument_joint(&setup, &psi).unwrap();
    // unmeasured: (cos t + sin t)^2 / 2 = (1 + sin 2t) / 2
    close(r.p_b_without_a[0], 0.853_553_390_593_273_8, 1e-12) && close(r.p_b_with_a[0], 0.5, 1e-12)
}

fn oracle_7() -> bool {
    // product state |00> of a commuting diagonal model gives S = 2
    let z = real_matrix(2, 2, &[1., 0., 0., -1.]);
    let i2 = CMatrix::identity(2, 2);
    let a = z.kronecker(&i2);
    let b = i2.kronecker(&z);
    let ops = bell::ChshOperators::new(a.clone(), a, b.clone(), b).unwrap();
    let mut rho = CMatrix::zeros(4, 4);
    rho[(0, 0)] = c(1.0);
    let m = bell::appendix_b_model();
    let top = bell::landau_c(&m.ops).c_squared_norm.sqrt();
    close(ops.chsh_value(&rho).abs(), 2.0, 1e-15) && close(top, std::f64::consts::SQRT_2 * 2.0, 1e-12)
}

fn oracle_8() -> bool {
    let rep = FockRep::build(32, 1.0).unwrap();
    let g = CanonicalGenerators::new(1.0).unwrap();
    let q2 = g.q.multiply(&g.q);
    let second = rep.gns_inner(&g.q, &g.q).unwrap();
    let fourth = rep.gns_inner(&q2, &q2).unwrap();
    let h2 = &rep.hermite_basis(2).unwrap().polynomials[2];
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let t = FockRep::build(64, 1.0).unwrap().translate_check(1.0).unwrap();
    close(second.re, 1.0, 1e-12)
        && close(fourth.re, 3.0, 1e-12)
        && close(h2[0], -r, 1e-12)
        && h2[1].abs() < 1e-12
        && close(h2[2], r, 1e-12)
        && close(t.variance, 1.0, 1e-6)
}

fn oracle_9() -> bool {
    let cfg = SimConfig { pair_rate: 1e5, duration_ns: 2_000_000_000, seed: 99, ..SimConfig::default() };
    // two detectors at 5e4/s each with 1 us non-paralyzable dead time
    let rate_ok = close(cfg.expected_singles_rate(), 2.0 * 5e4 / 1.05, 1e-6);
    let r = coincidence::run_pipeline(&cfg).unwrap();
    let e = r.correlations.unwrap().as_array();
    let sig = r.sigma_e.unwrap();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let frozen = [-h, h, -h, -h];
    rate_ok && e.iter().zip(frozen).zip(sig).all(|((got, want), s)| (got - want).abs() <= 5.0 * s)
}

fn oracle_10() -> bool {
    let est = bell::cat_discriminate(&CatState::new(0.3, Complex64::new(0.2, 0.1)).unwrap().matrix()).unwrap();
    close(est.c1, 0.4, 1e-15) && close(est.c2, 0.2, 1e-15) && est.alpha == 0.3
}

fn main() -> ExitCode {
    let oracles: [fn() -> bool; 10] = [
        oracle_1,
        oracle_2,
        oracle_3,
        || oracle_4_5().0,
        || oracle_4_5().1,
        oracle_6,
        oracle_7,
        oracle_8,
        oracle_9,
        oracle_10,
    ];
    let mut failed = 0;
    for (id, _, _) in verify::CRITERIA {
        let mut r = verify::run(id);
        let frozen = oracles[(id - 1) as usize]();
        if !frozen {
            r.pass = false;
            r.detail.push_str("; frozen oracle mismatch");
        }
        if !r.pass {
            failed += 1;
        }
        println!("{}", r.line());
    }
    println!("acceptance: {} passed, {failed} failed", verify::CRITERIA.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
