//! Brute-force truncated Fock-space checks of the closed-form moments and g².

mod common;

use common::{Mat, C};
use incoupler::moments::{make_squeezed_input_moments, InputMoments, ModeMoments};
use incoupler::observables::g2_local;

fn expect(op: &Mat, psi: &[C]) -> C {
    let y = op.apply(psi);
    psi.iter().zip(&y).map(|(a, b)| a.conj() * b).sum()
}

/// Integrates dψ/ds = Gψ over s ∈ [0, 1] with classical RK4.
fn evolve(g: &Mat, psi: Vec<C>, steps: usize) -> Vec<C> {
    let h = 1.0 / steps as f64;
    let axpy =
        |x: &[C], k: &[C], s: f64| -> Vec<C> { x.iter().zip(k).map(|(a, b)| a + b * s).collect() };
    let mut psi = psi;
    for _ in 0..steps {
        let k1 = g.apply(&psi);
        let k2 = g.apply(&axpy(&psi, &k1, h / 2.0));
        let k3 = g.apply(&axpy(&psi, &k2, h / 2.0));
        let k4 = g.apply(&axpy(&psi, &k3, h));
        for i in 0..psi.len() {
            psi[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0);
        }
    }
    psi
}

#[test]
fn displaced_squeezed_moments_match_fock_space() {
    let dim = 70;
    let a = Mat::annihilation(dim);
    let ad = a.dagger();
    let a2 = a.mul(&a);
    let ad2 = ad.mul(&ad);
    for &(r, theta, alpha) in &[(0.3, 0.0, 1.2), (0.4605, 0.7, 0.9), (0.2, -1.1, 2.0)] {
        let xi = C::from_polar(r, theta);
        // S(ξ) = exp[(ξ* a² − ξ a†²)/2], then D(α) = exp(α a† − α a) for real α.
        let gs = Mat::zeros(dim)
            .add(&a2, xi.conj() * 0.5)
            .add(&ad2, -xi * 0.5);
        let gd = Mat::zeros(dim)
            .add(&ad, C::new(alpha, 0.0))
            .add(&a, C::new(-alpha, 0.0));
        let mut vac = vec![C::new(0.0, 0.0); dim];
        vac[0] = C::new(1.0, 0.0);
        let psi = evolve(&gd, evolve(&gs, vac, 4000), 4000);
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        assert!(
            (norm - 1.0).abs() < 1e-9,
            "truncation/RK4 norm drift {norm}"
        );

        let n0 = alpha * alpha + r.sinh().powi(2);
        let m = make_squeezed_input_moments(r, n0, theta).unwrap();
        let fock_mean = expect(&a, &psi);
        let fock_n = expect(&ad.mul(&a), &psi).re;
        let fock_sq = expect(&a2, &psi);
        let fock_g4 = expect(&ad2.mul(&a2), &psi).re;
        let tol = 1e-6;
        assert!(
            (m.mean - fock_mean).norm() < tol,
            "mean {} vs {}",
            m.mean,
            fock_mean
        );
        assert!((m.n - fock_n).abs() < tol * n0.max(1.0));
        assert!(
            (m.sq - fock_sq).norm() < tol * n0.max(1.0),
            "sq {} vs {}",
            m.sq,
            fock_sq
        );
        assert!(
            (m.g4 - fock_g4).abs() < tol * fock_g4.max(1.0),
            "g4 {} vs {}",
            m.g4,
            fock_g4
        );
    }
}

#[test]
fn g2_formula_matches_two_mode_fock_space() {
    let worst = common::g2_fock_max_deviation(25, 6, 0x5eed_2024);
    assert!(worst < 1e-8, "largest deviation {worst}");
}

#[test]
fn g2_hand_value() {
    let m = InputMoments::new(ModeMoments::coherent(4.0), ModeMoments::thermal(2.0)).unwrap();
    let g2 = g2_local(C::new(1.0, 0.0), C::new(0.0, 1.0), &m, 0.0).unwrap();
    assert!((g2 - 14.0 / 9.0).abs() < 1e-14);
}
