use std::sync::Arc;

use gad_core::data::{generate_sbm, generate_smooth_signals, Split};
use gad_core::eval::{
    degree_correlation, evaluate, is_regular, mmd_scalar, quadratic_variation, spectral_centroid,
};
use gad_core::{ForwardModel, DriftSchedule, Graph, SignalDataset, Spectrum};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn sbm() -> (Graph, Arc<Spectrum>, Vec<usize>) {
    let (g, c) = generate_sbm(10, 2, 0.6, 0.1, 0).unwrap();
    let s = Arc::new(Spectrum::from_graph(&g).unwrap());
    (g, s, c)
}

fn random_signal(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

#[test]
fn statistics_scale_exactly() {
    let (_, s, _) = sbm();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    // powers of two scale every intermediate exactly
    for c in [2.0, 0.5, -4.0, -0.25] {
        for _ in 0..20 {
            let x = random_signal(20, &mut rng);
            let y = &x * c;
            assert_eq!(quadratic_variation(&s, &y).unwrap(), c * c * quadratic_variation(&s, &x).unwrap());
            assert_eq!(spectral_centroid(&s, &y).unwrap(), spectral_centroid(&s, &x).unwrap());
            assert_eq!(degree_correlation(&s, &y).unwrap(), c.signum() * degree_correlation(&s, &x).unwrap());
        }
    }
    for c in [3.0, -0.7, 1e3] {
        let x = random_signal(20, &mut rng);
        let y = &x * c;
        let qv = quadratic_variation(&s, &x).unwrap();
        assert!((quadratic_variation(&s, &y).unwrap() - c * c * qv).abs() <= 1e-12 * c * c * qv);
        assert!((spectral_centroid(&s, &y).unwrap() - spectral_centroid(&s, &x).unwrap()).abs() <= 1e-12);
        let dc = degree_correlation(&s, &x).unwrap();
        assert!((degree_correlation(&s, &y).unwrap() - c.signum() * dc).abs() <= 1e-12);
    }
}

#[test]
fn statistics_are_permutation_invariant() {
    let (g, s, _) = sbm();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10 {
        let mut perm: Vec<usize> = (0..20).collect();
        for i in (1..20).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let sp = Spectrum::from_graph(&g.permuted(&perm).unwrap()).unwrap();
        let x = random_signal(20, &mut rng);
        let xp = DVector::from_fn(20, |i, _| x[perm[i]]);
        let pairs = [
            (quadratic_variation(&s, &x).unwrap(), quadratic_variation(&sp, &xp).unwrap()),
            (spectral_centroid(&s, &x).unwrap(), spectral_centroid(&sp, &xp).unwrap()),
            (degree_correlation(&s, &x).unwrap(), degree_correlation(&sp, &xp).unwrap()),
        ];
        for (a, b) in pairs {
            assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
        }
    }
}

#[test]
fn centroid_matches_explicit_gft() {
    let (_, s, _) = sbm();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random_signal(20, &mut rng);
    let xt = s.eigenvectors().transpose() * &x;
    let num: f64 = (0..20).map(|i| s.eigenvalues()[i] * xt[i] * xt[i]).sum();
    let brute = num / xt.norm_squared();
    assert!((spectral_centroid(&s, &x).unwrap() - brute).abs() <= 1e-10);
    let sc = spectral_centroid(&s, &x).unwrap();
    assert!(sc >= s.eigenvalues().min() && sc <= s.eigenvalues().max());
}

#[test]
fn mmd_symmetry_shift_and_ordering() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let draw = |rng: &mut ChaCha8Rng, shift: f64, k: usize| -> Vec<f64> {
        (0..k).map(|_| rng.sample::<f64, _>(StandardNormal) + shift).collect()
    };
    let a = draw(&mut rng, 0.0, 300);
    let b = draw(&mut rng, 0.4, 250);
    assert_eq!(mmd_scalar(&a, &b).unwrap(), mmd_scalar(&b, &a).unwrap());
    let shift = |v: &[f64]| v.iter().map(|x| x + 2.5).collect::<Vec<_>>();
    assert!((mmd_scalar(&shift(&a), &shift(&b)).unwrap() - mmd_scalar(&a, &b).unwrap()).abs() <= 1e-12);

    let same1 = draw(&mut rng, 0.0, 2000);
    let same2 = draw(&mut rng, 0.0, 2000);
    let shifted = draw(&mut rng, 0.5, 2000);
    assert!(mmd_scalar(&same1, &same2).unwrap() < mmd_scalar(&same1, &shifted).unwrap());
}

#[test]
fn evaluate_identical_sets() {
    let (_, s, c) = sbm();
    let test = generate_smooth_signals(&s, &c, 100, 5.0, Split::Test, 5).unwrap();
    let r = evaluate(&test, &test, &s, "gad", Some(10)).unwrap();
    assert_eq!((r.qv_mmd, r.sc_mmd, r.dc_mmd, r.ammd), (0.0, 0.0, Some(0.0), 0.0));
    assert!(r.check_invariants());
    assert!(!r.dc_excluded);
}

#[test]
fn stationary_noise_is_far_from_smooth_signals() {
    let (_, s, c) = sbm();
    let test = generate_smooth_signals(&s, &c, 500, 5.0, Split::Test, 200).unwrap();
    let model = ForwardModel::new(s.clone(), DriftSchedule::default(), 1.0, 0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let noise = model.stationary().sample_columns(&mut rng, 500);
    let generated = SignalDataset::from_columns(&noise, Split::Test).unwrap();
    let r = evaluate(&generated, &test, &s, "noise", None).unwrap();
    let same = evaluate(&test, &test, &s, "noise", None).unwrap();
    assert!(r.ammd > same.ammd);
    assert!(r.qv_mmd > 0.01, "{}", r.qv_mmd);
    assert!(r.check_invariants());
    assert_eq!(r.ammd, (r.qv_mmd + r.sc_mmd + r.dc_mmd.unwrap()) / 3.0);
}

#[test]
fn regular_graph_excludes_degree_correlation() {
    // 4-cycle: every node has degree 2
    let a = DMatrix::from_row_slice(4, 4, &[0., 1., 0., 1., 1., 0., 1., 0., 0., 1., 0., 1., 1., 0., 1., 0.]);
    let s = Spectrum::from_graph(&Graph::new(a).unwrap()).unwrap();
    assert!(is_regular(&s));
    let x = DMatrix::from_row_slice(3, 4, &[1., 0., 2., 0.5, -1., 1., 0., 2., 0.3, 0.1, -0.2, 1.]);
    let ds = SignalDataset::new(x, Split::Test).unwrap();
    let y = DMatrix::from_row_slice(2, 4, &[0.2, 1., -1., 0., 1., 1., 0.5, 0.]);
    let gen = SignalDataset::new(y, Split::Test).unwrap();
    let r = evaluate(&gen, &ds, &s, "gad", None).unwrap();
    assert!(r.dc_excluded && r.dc_mmd.is_none());
    assert_eq!(r.ammd, (r.qv_mmd + r.sc_mmd) / 2.0);
    let json = serde_json::to_value(&r).unwrap();
    for key in ["qv_mmd", "sc_mmd", "dc_mmd", "ammd", "num_generated", "num_test", "bandwidths", "method", "num_steps"] {
        assert!(json.get(key).is_some(), "{key}");
    }
}

#[test]
fn mismatched_node_counts_are_rejected() {
    let (_, s, c) = sbm();
    let test = generate_smooth_signals(&s, &c, 10, 5.0, Split::Test, 5).unwrap();
    let small = SignalDataset::new(DMatrix::from_element(3, 5, 1.0), Split::Test).unwrap();
    assert!(evaluate(&small, &test, &s, "gad", None).is_err());
}
