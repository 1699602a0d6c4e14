//! Truncated Fock-space linear algebra shared by the oracle tests.

#![allow(dead_code)]

use incoupler::moments::{InputMoments, ModeMoments};
use incoupler::observables::g2_local;
use num_complex::Complex;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub type C = Complex<f64>;

/// Dense square matrix, row-major.
#[derive(Clone)]
pub struct Mat {
    pub n: usize,
    pub v: Vec<C>,
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        Mat {
            n,
            v: vec![C::new(0.0, 0.0); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.v[i * n + i] = C::new(1.0, 0.0);
        }
        m
    }

    pub fn annihilation(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for k in 1..n {
            m.v[(k - 1) * n + k] = C::new((k as f64).sqrt(), 0.0);
        }
        m
    }

    pub fn dagger(&self) -> Self {
        let n = self.n;
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.v[j * n + i] = self.v[i * n + j].conj();
            }
        }
        m
    }

    pub fn mul(&self, o: &Self) -> Self {
        let n = self.n;
        let mut m = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.v[i * n + k];
                if a == C::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    m.v[i * n + j] += a * o.v[k * n + j];
                }
            }
        }
        m
    }

    pub fn add(&self, o: &Self, s: C) -> Self {
        Mat {
            n: self.n,
            v: self.v.iter().zip(&o.v).map(|(a, b)| a + b * s).collect(),
        }
    }

    pub fn apply(&self, x: &[C]) -> Vec<C> {
        let n = self.n;
        (0..n)
            .map(|i| (0..n).map(|j| self.v[i * n + j] * x[j]).sum())
            .collect()
    }

    pub fn kron(&self, o: &Self) -> Self {
        let (p, q) = (self.n, o.n);
        let mut m = Self::zeros(p * q);
        for i in 0..p {
            for j in 0..p {
                for k in 0..q {
                    for l in 0..q {
                        m.v[(i * q + k) * p * q + (j * q + l)] = self.v[i * p + j] * o.v[k * q + l];
                    }
                }
            }
        }
        m
    }

    pub fn trace_with(&self, rho: &Self) -> C {
        let n = self.n;
        let mut t = C::new(0.0, 0.0);
        for i in 0..n {
            for k in 0..n {
                t += self.v[i * n + k] * rho.v[k * n + i];
            }
        }
        t
    }
}

pub fn random_pure(rng: &mut StdRng, dim: usize) -> Vec<C> {
    let v: Vec<C> = (0..dim)
        .map(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let n: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / n).collect()
}

/// Single-mode moments of a density matrix; the g² formula only uses n and g4.
pub fn moments_of(rho: &Mat, a: &Mat) -> ModeMoments<f64> {
    let ad = a.dagger();
    ModeMoments {
        mean: a.trace_with(rho),
        n: ad.mul(a).trace_with(rho).re,
        sq: a.mul(a).trace_with(rho),
        g4: ad.mul(&ad).mul(a).mul(a).trace_with(rho).re,
    }
}

/// Largest relative deviation between `g2_local` and a brute-force two-mode trace over
/// `instances` random draws, with at most `cutoff` quanta per mode.
///
/// â₀ is in a random pure state, b̂₀ in a random phase-invariant (diagonal) state, as for a
/// vacuum or phase-averaged probe.
pub fn g2_fock_max_deviation(instances: usize, cutoff: usize, seed: u64) -> f64 {
    let dim = cutoff + 1;
    let mut rng = StdRng::seed_from_u64(seed);
    let a1 = Mat::annihilation(dim);
    let id = Mat::identity(dim);
    let big_a = a1.kron(&id);
    let big_b = id.kron(&a1);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let psi = random_pure(&mut rng, dim);
        let mut rho_a = Mat::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                rho_a.v[i * dim + j] = psi[i] * psi[j].conj();
            }
        }
        let weights: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect();
        let total: f64 = weights.iter().sum();
        let mut rho_b = Mat::zeros(dim);
        for (i, w) in weights.iter().enumerate() {
            rho_b.v[i * dim + i] = C::new(w / total, 0.0);
        }
        let rho = rho_a.kron(&rho_b);
        let f = C::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let h = C::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));

        let nu = Mat::zeros(dim * dim).add(&big_a, f).add(&big_b, h);
        let nud = nu.dagger();
        let num = nud.mul(&nud).mul(&nu).mul(&nu).trace_with(&rho).re;
        let den = nud.mul(&nu).trace_with(&rho).re;
        let brute = num / (den * den);

        let moments = InputMoments {
            a: moments_of(&rho_a, &a1),
            b: moments_of(&rho_b, &a1),
        };
        let g2 = g2_local(f, h, &moments, 0.0).unwrap();
        worst = worst.max((g2 - brute).abs() / brute.max(1.0));
    }
    worst
}
