//! Dense 3D tensor quadrature of the collapse-noise integral as an
//! independent oracle for the factorized engine.
//!
//! The dense rule integrates `(q.m)^2 e^{-q^2 rc^2} |rho_tilde(q)|^2` over
//! the half-space `q_x >= 0` (doubled), with `rho_tilde` evaluated through
//! the composite Fourier transform — a completely different code path from
//! the pair-factorized engine. It is only affordable when bodies are a few
//! oscillations across, which is exactly the regime these fixtures pick.

use cslbound::constants::PhysicalConstants;
use cslbound::csl::{csl_psd_multilayer, csl_psd_quadrature, CslParams, QuadConfig};
use cslbound::mass::{self, CompositeMass, Component, Cuboid, MultilayerStack, Sphere};
use cslbound::numerics::quad::QuadOptions;
use cslbound::numerics::quadnd::{integrate_3d, Box3};

const SQRT_PI: f64 = 1.772_453_850_905_516;

fn dense_psd(mass_dist: &CompositeMass, rc: f64, rel_tol: f64) -> f64 {
    let consts = PhysicalConstants::default();
    let qmax = 8.0 / rc;
    let m = mass_dist.motion_axis;
    let f = |qx: f64, qy: f64, qz: f64| {
        let q = [qx, qy, qz];
        let qm = qx * m[0] + qy * m[1] + qz * m[2];
        let rho = mass::composite_transform(mass_dist, &q).norm_sqr();
        qm * qm * (-(qx * qx + qy * qy + qz * qz) * rc * rc).exp() * rho
    };
    // seed panels: a handful per axis so no oscillation hides from the
    // error estimator
    let n_seed = 6;
    let mut seed: Vec<Box3> = Vec::new();
    let xs: Vec<f64> = (0..=n_seed).map(|i| qmax * i as f64 / n_seed as f64).collect();
    let ys: Vec<f64> = (0..=2 * n_seed)
        .map(|i| -qmax + qmax * i as f64 / n_seed as f64)
        .collect();
    for i in 0..n_seed {
        for j in 0..2 * n_seed {
            for k in 0..2 * n_seed {
                seed.push([
                    [xs[i], xs[i + 1]],
                    [ys[j], ys[j + 1]],
                    [ys[k], ys[k + 1]],
                ]);
            }
        }
    }
    let opts = QuadOptions {
        rel_tol,
        abs_tol: 0.0,
        max_evals: 3_000_000_000,
        initial_panels: 0,
    };
    let integral = integrate_3d(f, &seed, &opts).expect("dense oracle must converge");
    let c0 = 2.0 * consts.hbar * consts.hbar * rc * rc * rc
        / (SQRT_PI.powi(3) * consts.m0 * consts.m0);
    2.0 * c0 * integral.value
}

#[test]
fn engine_matches_dense_rule_for_offset_cuboid_pair() {
    // two displaced cuboids with an oblique motion axis: all interference
    // terms and all q_a q_b cross factors are active
    let n = (3.0f64).sqrt().recip();
    let mass_dist = CompositeMass::new(
        [n, n, n],
        vec![
            Component::Cuboid(Cuboid::new(4e3, [2e-6, 1.5e-6, 1e-6], [0.0; 3]).unwrap()),
            Component::Cuboid(
                Cuboid::new(2.5e3, [1e-6, 2e-6, 1.2e-6], [1.6e-6, -0.9e-6, 0.7e-6]).unwrap(),
            ),
        ],
    )
    .unwrap();
    let rc = 0.8e-6;
    let p = CslParams::new(1.0, rc).unwrap();
    let engine = csl_psd_quadrature(&mass_dist, &p, &QuadConfig::default_3d()).unwrap();
    let dense = dense_psd(&mass_dist, rc, 1e-7);
    let rel = (engine - dense).abs() / dense.abs();
    assert!(rel < 2e-5, "engine {engine:.8e} vs dense {dense:.8e} (rel {rel:.2e})");
}

#[test]
fn engine_matches_dense_rule_for_sphere_cuboid_composite() {
    // touching sphere + cuboid: the real-space cross-term path is active
    let mass_dist = CompositeMass::new(
        [0.0, 0.0, 1.0],
        vec![
            Component::Cuboid(Cuboid::new(4e3, [2e-6, 2e-6, 0.8e-6], [0.0; 3]).unwrap()),
            Component::Sphere(Sphere::new(6e3, 0.7e-6, [0.0, 0.0, 1.1e-6]).unwrap()),
        ],
    )
    .unwrap();
    for rc in [0.5e-6, 1.2e-6] {
        let p = CslParams::new(1.0, rc).unwrap();
        let engine = csl_psd_quadrature(&mass_dist, &p, &QuadConfig::default_3d()).unwrap();
        let dense = dense_psd(&mass_dist, rc, 1e-7);
        let rel = (engine - dense).abs() / dense.abs();
        assert!(
            rel < 5e-5,
            "rc = {rc:.1e}: engine {engine:.8e} vs dense {dense:.8e} (rel {rel:.2e})"
        );
    }
}

#[test]
fn engine_and_closed_form_match_dense_rule_for_small_stack() {
    let stack = MultilayerStack::new(
        5e3,
        2e3,
        2,
        0.4e-6,
        3e-6,
        2e-6,
        [0.0; 3],
        [0.0, 0.0, 1.0],
    )
    .unwrap();
    let mass_dist =
        CompositeMass::new([0.0, 0.0, 1.0], vec![Component::Multilayer(stack)]).unwrap();
    let rc = 0.5e-6;
    let p = CslParams::new(1.0, rc).unwrap();
    let engine = csl_psd_quadrature(&mass_dist, &p, &QuadConfig::default_3d()).unwrap();
    let closed = csl_psd_multilayer(&stack, &p, &QuadConfig::default_1d()).unwrap();
    let dense = dense_psd(&mass_dist, rc, 1e-7);
    for (label, v) in [("engine", engine), ("closed form", closed)] {
        let rel = (v - dense).abs() / dense.abs();
        assert!(rel < 2e-5, "{label} {v:.8e} vs dense {dense:.8e} (rel {rel:.2e})");
    }
}
