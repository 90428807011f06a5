use std::sync::OnceLock;

use proptest::prelude::*;
use sorsvd::bounds::optimal_error;
use sorsvd::dense::*;
use sorsvd::matrixgen::{gen_noisy_lowrank, gen_polydecay};
use sorsvd::sketch::*;

struct Fixture {
    a: Matrix,
    sigma: Vec<f64>,
}

fn stewart() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let a = gen_noisy_lowrank(1000, 20, 0).unwrap();
        let sigma = singular_values(&a);
        Fixture { a, sigma }
    })
}

fn polydecay() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let a = gen_polydecay(1000, 0).unwrap();
        let sigma = singular_values(&a);
        Fixture { a, sigma }
    })
}

fn exact_rank(m: usize, n: usize, r: usize, seed: u64) -> Matrix {
    matmul_nt(&gaussian_matrix(m, r, seed), &gaussian_matrix(n, r, seed ^ 0x55)).unwrap()
}

fn frob(a: &Matrix, x: &LowRankApprox) -> f64 {
    approx_error(a, x, ErrorNorm::Frobenius).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn sandwich_against_projected_optimum(m in 20usize..60, n in 20usize..60, k in 1usize..5, extra in 0usize..6, seed in any::<u64>()) {
        let a = gaussian_matrix(m, n, seed);
        let ell = k + extra;
        let x = sor_svd(&a, k, &SketchConfig::new(ell, seed)).unwrap();

        // Rebuild the bases from the same Ω.
        let omega = gaussian_matrix(n, ell, seed);
        let q1 = orthonormalize(&matmul(&a, &omega).unwrap()).unwrap();
        let q2 = orthonormalize(&matmul_tn(&a, &q1).unwrap()).unwrap();
        let p1 = matmul_nt(&q1, &q1).unwrap();
        let p2 = matmul_nt(&q2, &q2).unwrap();
        prop_assert!(matmul(&p1, &x.u).unwrap().sub(&x.u).unwrap().frobenius_norm() <= 1e-10);
        prop_assert!(matmul(&p2, &x.v).unwrap().sub(&x.v).unwrap().frobenius_norm() <= 1e-10);

        let ak = truncated_svd(&a, k).unwrap().reconstruct();
        let projected = matmul(&matmul(&p1, &ak).unwrap(), &p2).unwrap();
        let rhs = a.sub(&projected).unwrap().frobenius_norm();
        prop_assert!(frob(&a, &x) <= rhs + 1e-10 * a.frobenius_norm());
    }

    #[test]
    fn exact_rank_is_reconstructed_by_every_method(m in 10usize..60, n in 10usize..60, r in 1usize..5, extra in 0usize..4, seed in any::<u64>()) {
        let a = exact_rank(m, n, r, seed);
        let k = r + extra.min(1);
        let ell = (k + extra + 1).min(m.min(n) - 1);
        let cfg = SketchConfig::new(ell, seed);
        let norm = a.frobenius_norm();
        let runs = [
            sor_svd(&a, k, &cfg).unwrap(),
            sor_svd(&a, k, &cfg.with_single_pass(true)).unwrap(),
            sor_svd_power(&a, k, &cfg.with_power(2)).unwrap(),
            r_svd(&a, &cfg).unwrap().truncate(k).unwrap(),
            tsr_svd(&a, &cfg).unwrap().truncate(k).unwrap(),
        ];
        for x in &runs {
            prop_assert!(frob(&a, x) <= 1e-9 * norm, "{:?}: {:e}", x.method, frob(&a, x) / norm);
        }
    }

    #[test]
    fn interlacing_for_compressions_and_floor_for_all(m in 15usize..50, n in 15usize..50, k in 1usize..4, seed in any::<u64>()) {
        let a = gaussian_matrix(m, n, seed);
        let sv = singular_values(&a);
        let ell = k + 3;
        let cfg = SketchConfig::new(ell, seed);
        let floor = optimal_error(&sv, k, ErrorNorm::Frobenius);
        let compressions = [
            sor_svd(&a, k, &cfg).unwrap(),
            sor_svd_power(&a, k, &cfg.with_power(1)).unwrap(),
            r_svd(&a, &cfg).unwrap().truncate(k).unwrap(),
        ];
        for x in &compressions {
            for (j, s) in x.sigma.iter().enumerate() {
                prop_assert!(*s <= sv[j] + 1e-9 * sv[0], "{:?} j={} {} > {}", x.method, j, s, sv[j]);
            }
        }
        // Pseudo-inverse corrected cores are not compressions of A, so only the
        // optimality floor applies to them.
        let corrected = [
            sor_svd(&a, k, &cfg.with_single_pass(true)).unwrap(),
            tsr_svd(&a, &cfg).unwrap().truncate(k).unwrap(),
        ];
        for x in compressions.iter().chain(&corrected) {
            prop_assert!(frob(&a, x) >= floor - 1e-9 * a.frobenius_norm());
        }
    }
}

#[test]
fn stewart_leading_value_without_power() {
    let f = stewart();
    let x = sor_svd(&f.a, 20, &SketchConfig::new(38, 1)).unwrap();
    assert!((x.sigma[0] - f.sigma[0]).abs() <= 0.05 * f.sigma[0]);
}

#[test]
fn stewart_with_power_matches_svd() {
    let f = stewart();
    let x = sor_svd_power(&f.a, 20, &SketchConfig::new(38, 1).with_power(2)).unwrap();
    for j in 0..20 {
        assert!((x.sigma[j] - f.sigma[j]).abs() <= 1e-3 * f.sigma[j], "j={j}");
    }
    let floor = optimal_error(&f.sigma, 20, ErrorNorm::Frobenius);
    let err = frob(&f.a, &x);
    assert!((err - floor) / floor <= 1e-6, "{:e}", (err - floor) / floor);
}

#[test]
fn stewart_rsvd_close_to_sor() {
    let f = stewart();
    for seed in 0..5 {
        let cfg = SketchConfig::new(38, seed);
        let sor = frob(&f.a, &sor_svd(&f.a, 20, &cfg).unwrap());
        let rs = frob(&f.a, &r_svd(&f.a, &cfg).unwrap().truncate(20).unwrap());
        assert!((rs - sor).abs() <= 0.15 * sor, "seed {seed}");
    }
}

#[test]
fn stewart_single_pass_power_keeps_accuracy() {
    let f = stewart();
    let floor = optimal_error(&f.sigma, 20, ErrorNorm::Frobenius);
    let x = sor_svd_power(&f.a, 20, &SketchConfig::new(38, 3).with_power(2).with_single_pass(true)).unwrap();
    assert_eq!(x.passes, 6);
    assert!(frob(&f.a, &x) <= 1.01 * floor);
}

#[test]
fn polydecay_with_power_is_near_optimal() {
    let f = polydecay();
    let floor = optimal_error(&f.sigma, 10, ErrorNorm::Frobenius);
    let expected: f64 = (11..=1000).map(|j| 1.0 / (j * j) as f64).sum::<f64>().sqrt();
    assert!((floor - expected).abs() <= 1e-10);
    assert!((floor - 0.30687).abs() < 5e-5);
    let x = sor_svd_power(&f.a, 10, &SketchConfig::new(18, 2).with_power(2)).unwrap();
    assert!(frob(&f.a, &x) <= 1.005 * floor);
}

#[test]
fn rsvd_power_helps_on_polydecay() {
    let f = polydecay();
    let mut better = 0;
    for seed in 0..100 {
        let e0 = frob(&f.a, &r_svd(&f.a, &SketchConfig::new(18, seed)).unwrap().truncate(10).unwrap());
        let e2 = frob(
            &f.a,
            &r_svd(&f.a, &SketchConfig::new(18, seed).with_power(2)).unwrap().truncate(10).unwrap(),
        );
        if e2 <= e0 {
            better += 1;
        }
    }
    assert!(better >= 95, "{better}/100");
}

#[test]
fn tsr_is_worse_than_sor_on_stewart() {
    let f = stewart();
    let mut sor_wins = 0;
    for seed in 0..100 {
        let cfg = SketchConfig::new(38, seed);
        let sor = frob(&f.a, &sor_svd(&f.a, 20, &cfg).unwrap());
        let tsr = frob(&f.a, &tsr_svd(&f.a, &cfg).unwrap().truncate(20).unwrap());
        if tsr >= sor {
            sor_wins += 1;
        }
    }
    assert!(sor_wins >= 90, "{sor_wins}/100");
}
