mod common;

use amloc::arithmetic::Frequency;
use amloc::dynamics::{evolve, norm, overlap, sup_overlap, TimeGrid};
use amloc::eigensolve::{eigh_tridiagonal, residual_report, EigenSystem, Origin};
use amloc::localization::{
    center_mass_profile, centers, lyapunov_transfer, overlap_chain_pointwise, overlap_sum, CHAIN_SLACK,
};
use amloc::operator::{OperatorSpec, TridiagonalOperator, Window};
use common::*;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn operator(lambda: f64, theta: f64, window: Window) -> TridiagonalOperator {
    TridiagonalOperator::build(&OperatorSpec::new(lambda, Frequency::golden(), theta, window).unwrap()).unwrap()
}

fn random_state(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut psi: Vec<Complex64> =
        (0..n).map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
    let n0 = norm(&psi);
    psi.iter_mut().for_each(|z| *z /= n0);
    psi
}

#[test]
fn apply_matches_dense_product() {
    let h = operator(2.0, 0.3, Window::new(0, 99).unwrap());
    let dense = dense_matrix(h.diagonal());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..5 {
        let v: Vec<f64> = (0..100).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let got = h.apply(&v).unwrap();
        let want = dense_apply(&dense, &v);
        let err = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-13, "{err}");
    }
}

#[test]
fn delta_input_hits_three_sites() {
    let h = operator(2.0, 0.3, Window::new(-5, 5).unwrap());
    let mut v = vec![0.0; 11];
    v[4] = 1.0;
    let out = h.apply(&v).unwrap();
    let nonzero: Vec<usize> = (0..11).filter(|&i| out[i] != 0.0).collect();
    assert_eq!(nonzero, vec![3, 4, 5]);
    assert_eq!((out[3], out[4], out[5]), (1.0, h.diagonal()[4], 1.0));
}

#[test]
fn eigenvalues_match_sturm_bisection() {
    for (lambda, theta, n) in [(2.0, 0.3, 50i64), (0.5, 0.11, 80), (3.0, 0.77, 120)] {
        let h = operator(lambda, theta, Window::new(0, n - 1).unwrap());
        let eig = eigh_tridiagonal(&h).unwrap();
        let oracle = bisection_eigenvalues(h.diagonal());
        for (a, b) in eig.values().iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9, "lambda {lambda}: {a} vs {b}");
        }
    }
}

#[test]
fn supercritical_residuals_are_tiny() {
    for n in [200i64, 1000] {
        let h = operator(2.0, 0.3, Window::new(0, n - 1).unwrap());
        let eig = eigh_tridiagonal(&h).unwrap();
        assert!(residual_report(&h, &eig).unwrap().within(1e-10 * 6.0));
    }
}

#[test]
fn strong_coupling_eigenvectors_are_localized() {
    let h = operator(3.0, 0.3, Window::symmetric(100).unwrap());
    let eig = eigh_tridiagonal(&h).unwrap();
    let window = eig.window();
    for (s, &c) in centers(&eig).iter().enumerate() {
        let near: f64 = window
            .sites()
            .filter(|n| (n - c).abs() <= 20)
            .map(|n| eig.component(s, window.index_of(n).unwrap()).powi(2))
            .sum();
        assert!(near > 0.99, "eigenvector {s} centered at {c}: {near}");
    }
}

#[test]
fn center_masses_match_direct_summation_for_random_basis() {
    // random orthogonal 6×6 basis from Gram–Schmidt
    let n = 6;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    while basis.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
        for b in &basis {
            let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
        let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        basis.push(v.into_iter().map(|x| x / len).collect());
    }
    let window = Window::new(-2, 3).unwrap();
    let values: Vec<f64> = (0..n).map(|s| s as f64).collect();
    let eig = EigenSystem::from_parts(values, basis.concat(), window, Origin::Diagonal).unwrap();
    let profile = center_mass_profile(&eig);
    for center in window.sites() {
        for site in window.sites() {
            let i = window.index_of(site).unwrap();
            let direct: f64 = (0..n)
                .filter(|&s| {
                    let v = eig.vector(s);
                    let best = (0..n).map(|j| v[j].abs()).fold(0.0, f64::max);
                    let first = (0..n).filter(|&j| v[j].abs() == best).min_by_key(|&j| {
                        let site = window.site_of(j);
                        (site.abs(), site > 0)
                    });
                    window.site_of(first.unwrap()) == center
                })
                .map(|s| eig.component(s, i).powi(2))
                .sum();
            assert!((profile.mass(center, site).unwrap() - direct).abs() < 1e-15);
        }
    }
}

#[test]
fn supercritical_overlap_sum_is_small_at_distance_thirty() {
    let h = operator(2.0, 0.3, Window::symmetric(200).unwrap());
    let eig = eigh_tridiagonal(&h).unwrap();
    for k in [-90i64, -40, 0, 35, 70] {
        let q = overlap_sum(&eig, k, k + 30).unwrap();
        assert!(q < 1e-3, "Q({k}, {}) = {q}", k + 30);
        assert!((overlap_sum(&eig, k, k).unwrap() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn overlap_chain_at_random_pairs() {
    let h = operator(2.0, 0.3, Window::symmetric(100).unwrap());
    let eig = eigh_tridiagonal(&h).unwrap();
    let profile = center_mass_profile(&eig);
    let grid = TimeGrid::new(100.0, 200).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let (k, l) = (rng.gen_range(-50..=50), rng.gen_range(-50..=50));
        let r = overlap_chain_pointwise(&eig, &profile, k, l, &grid).unwrap();
        assert!(r.holds(CHAIN_SLACK));
        if k == l {
            assert!((r.lhs_sup - 1.0).abs() < 1e-12 && (r.middle - 1.0).abs() < 1e-10 && r.rhs >= 1.0 - 1e-10);
        }
    }
}

#[test]
fn grid_maximum_is_within_a_factor_three_of_the_bound() {
    let h = operator(2.0, 0.3, Window::symmetric(100).unwrap());
    let eig = eigh_tridiagonal(&h).unwrap();
    let grid = TimeGrid::new(1000.0, 1000).unwrap();
    for k in [-30i64, -10, 0, 10] {
        let sup = sup_overlap(&eig, k, k + 20, &grid).unwrap();
        assert!(sup.grid_max <= sup.certified_bound + 1e-12);
        assert!(sup.grid_max * 3.0 >= sup.certified_bound, "{sup:?}");
    }
}

#[test]
fn evolution_matches_runge_kutta() {
    let h = operator(2.0, 0.3, Window::new(0, 99).unwrap());
    let eig = eigh_tridiagonal(&h).unwrap();
    let psi0 = random_state(100, 5);
    let t = 7.3;
    let spectral = evolve(&eig, &psi0, t).unwrap();
    let ode = rk4_schrodinger(h.diagonal(), &psi0, t, 1e-3);
    let err = spectral.iter().zip(&ode).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(err < 1e-6, "{err}");
    assert!((norm(&spectral) - 1.0).abs() < 1e-10);

    let back = evolve(&eig, &psi0, 0.0).unwrap();
    assert!(back.iter().zip(&psi0).all(|(a, b)| (a - b).norm() < 1e-12));
}

#[test]
fn overlap_matches_runge_kutta_columns() {
    let h = operator(1.0, 0.6, Window::new(-10, 10).unwrap());
    let eig = eigh_tridiagonal(&h).unwrap();
    let mut delta = vec![Complex64::new(0.0, 0.0); 21];
    delta[13] = Complex64::new(1.0, 0.0);
    let column = rk4_schrodinger(h.diagonal(), &delta, 2.5, 1e-3);
    for (i, site) in (-10..=10).enumerate() {
        let z = overlap(&eig, site, 3, 2.5).unwrap();
        assert!((z - column[i]).norm() < 1e-7);
    }
}

#[test]
fn lyapunov_exponent_on_the_spectrum_is_log_lambda() {
    let lambda = 3.0;
    let h = operator(lambda, 0.3, Window::symmetric(300).unwrap());
    let eig = eigh_tridiagonal(&h).unwrap();
    for s in [37usize, 150, 301, 480] {
        let e = eig.values()[s];
        let l = lyapunov_transfer(lambda, &Frequency::golden(), 0.3, e, 100_000).unwrap();
        assert!((l / lambda.ln() - 1.0).abs() < 0.05, "E = {e}: {l}");
    }
}

#[test]
fn free_lyapunov_exponent_vanishes_inside_the_band() {
    let mut previous = f64::INFINITY;
    for steps in [1_000u64, 10_000, 100_000] {
        let l = lyapunov_transfer(0.0, &Frequency::golden(), 0.0, 0.7, steps).unwrap();
        assert!(l <= previous + 1e-12);
        previous = l;
    }
    assert!(previous < 1e-4);
}
