mod common;

use convexpath::powerflow::{mismatch, ControlMap};
use convexpath::NetworkMatrices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn injections_match_complex_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for name in common::all_cases() {
        let net = common::load(&name);
        if net.n_bus() > 118 {
            continue;
        }
        let worst = common::worst_injection_error(&net, &mut rng, 100);
        assert!(worst < 1e-10, "{name}: worst injection error {worst:e}");
    }
}

#[test]
fn jacobian_matches_central_difference() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for name in ["pglib_opf_case5_pjm", "pglib_opf_case14_ieee"] {
        let net = common::load(name);
        let ctl = ControlMap::new(&net);
        for _ in 0..20 {
            let phi0: Vec<f64> = (0..net.n_line()).map(|_| rng.gen_range(-0.3..0.3)).collect();
            let mats = NetworkMatrices::new(&net, &phi0);
            let (x, u) = common::random_state(&net, &ctl, &mats, &mut rng);
            let rel = common::jacobian_error(&net, &mats, &ctl, &x, &u);
            assert!(rel < 1e-6, "{name}: relative Jacobian error {rel:e}");
        }
    }
}

#[test]
fn single_precision_mismatch_tracks_double() {
    let net = common::load("pglib_opf_case14_ieee");
    let net32 = net.cast::<f32>();
    let ctl = ControlMap::new(&net);
    let mats = NetworkMatrices::new(&net, &vec![0.0; net.n_line()]);
    let mats32 = convexpath::matrices::NetworkMatrices::new(&net32, &vec![0.0f32; net.n_line()]);
    let u = ctl.u_from_file(&net);
    let u32v: Vec<f32> = u.iter().map(|&x| x as f32).collect();
    let x = convexpath::powerflow::flat_start::<f64>(&mats.layout);
    let x32 = convexpath::powerflow::flat_start::<f32>(&mats32.layout);
    let f = mismatch(&net, &mats, &ctl, &x, &u);
    let f32v = mismatch(&net32, &mats32, &ctl, &x32, &u32v);
    for (a, b) in f.iter().zip(&f32v) {
        assert!((a - *b as f64).abs() < 1e-4 * a.abs().max(1.0));
    }
}
