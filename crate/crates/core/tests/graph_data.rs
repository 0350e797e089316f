use std::sync::Arc;

use gad_core::data::{generate_sbm, generate_smooth_signals, Split};
use gad_core::eval::quadratic_variation;
use gad_core::graph::{build_normalized_laplacian, Graph, Spectrum};
use gad_core::io;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn random_graph(n: usize, p: f64, seed: u64) -> Graph {
    // an SBM with one community is an Erdős–Rényi graph conditioned on connectivity
    generate_sbm(n, 1, p, 0.0, seed).unwrap().0
}

#[test]
fn spectrum_bounds_on_random_graphs() {
    for seed in 0..20 {
        let n = 2 + (seed as usize * 7) % 29;
        let g = random_graph(n, 0.4, seed);
        let s = Spectrum::from_graph(&g).unwrap();
        let lam = s.eigenvalues();
        assert!(lam.min() >= -1e-10 && lam.max() <= 2.0 + 1e-10);
        assert!(lam[0] <= 1e-10);
        // V is orthonormal and diagonalizes L
        let v = s.eigenvectors();
        assert!((v.transpose() * v - DMatrix::identity(n, n)).amax() < 1e-10);
        let recon = v * DMatrix::from_diagonal(lam) * v.transpose();
        assert!((recon - s.laplacian()).amax() < 1e-10);
    }
}

#[test]
fn null_vector_is_sqrt_degree() {
    let a = DMatrix::from_row_slice(3, 3, &[0., 1., 0., 1., 0., 1., 0., 1., 0.]);
    let l = build_normalized_laplacian(&a).unwrap();
    let u = DVector::from_vec(vec![1.0, 2f64.sqrt(), 1.0]);
    assert!((l * &u).amax() < 1e-15);
    let s = Spectrum::from_graph(&Graph::new(a).unwrap()).unwrap();
    let v0 = s.eigenvectors().column(0).into_owned();
    let un = &u / u.norm();
    assert!((v0 - un).amax() < 1e-12);
}

#[test]
fn sbm_bit_reproducible() {
    let (g1, c1) = generate_sbm(10, 2, 0.6, 0.1, 42).unwrap();
    let (g2, c2) = generate_sbm(10, 2, 0.6, 0.1, 42).unwrap();
    assert_eq!(g1.adjacency().as_slice(), g2.adjacency().as_slice());
    assert_eq!(c1, c2);
    let (g3, _) = generate_sbm(10, 2, 0.6, 0.1, 43).unwrap();
    assert_ne!(g1.adjacency().as_slice(), g3.adjacency().as_slice());
}

#[test]
fn smoothing_lowers_quadratic_variation() {
    let (g, c) = generate_sbm(10, 2, 0.6, 0.1, 7).unwrap();
    let s = Spectrum::from_graph(&g).unwrap();
    let mean_qv = |tau: f64| {
        let ds = generate_smooth_signals(&s, &c, 200, tau, Split::Train, 3).unwrap();
        ds.iter().map(|x| quadratic_variation(&s, &x).unwrap()).sum::<f64>() / 200.0
    };
    let (q0, q5, q50) = (mean_qv(0.0), mean_qv(5.0), mean_qv(50.0));
    assert!(q0 > q5 && q5 > q50, "{q0} {q5} {q50}");
    assert!(q50 < 0.05 * q0);
}

#[test]
fn csv_round_trip_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (g, c) = generate_sbm(10, 2, 0.6, 0.1, 1).unwrap();
    let s = Spectrum::from_graph(&g).unwrap();
    let ds = generate_smooth_signals(&s, &c, 25, 5.0, Split::Test, 2).unwrap();

    let adj = dir.path().join("adjacency.csv");
    io::save_adjacency_csv(&g, &adj).unwrap();
    let g2 = io::load_adjacency_csv(&adj).unwrap();
    assert_eq!(io::adjacency_to_csv(&g2), std::fs::read_to_string(&adj).unwrap());
    assert_eq!(io::graph_hash(&g2), io::file_hash(&adj).unwrap());

    let sig = dir.path().join("signals.csv");
    io::save_signals_csv(&ds, &sig).unwrap();
    let ds2 = io::load_signals_csv(&sig, Split::Test).unwrap();
    assert_eq!(ds2.signals(), ds.signals());
    assert_eq!(io::signals_to_csv(&ds2), std::fs::read_to_string(&sig).unwrap());

    let com = dir.path().join("communities.csv");
    io::save_communities_csv(&c, &com).unwrap();
    assert_eq!(io::load_communities_csv(&com).unwrap(), c);
}

#[test]
fn disconnected_sbm_is_reported() {
    let err = generate_sbm(10, 2, 0.6, 0.0, 0).unwrap_err();
    assert!(err.to_string().contains("p_in"), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn filter_paths_agree(
        n in 2usize..=30,
        seed in any::<u64>(),
        coeffs in prop::collection::vec(-2.0f64..2.0, 1..=6),
        xs in prop::collection::vec(-3.0f64..3.0, 30),
    ) {
        let g = random_graph(n, 0.5, seed);
        let s = Spectrum::from_graph(&g).unwrap();
        let x = DVector::from_column_slice(&xs[..n]);
        let a = s.filter_vertex(&coeffs, &x).unwrap();
        let b = s.filter_spectral(&coeffs, &x).unwrap();
        prop_assert!((a - b).amax() <= 1e-9);
    }

    #[test]
    fn gft_is_isometric(n in 2usize..=30, seed in any::<u64>(), xs in prop::collection::vec(-5.0f64..5.0, 30)) {
        let s = Arc::new(Spectrum::from_graph(&random_graph(n, 0.5, seed)).unwrap());
        let x = DVector::from_column_slice(&xs[..n]);
        let xt = s.gft(&x).unwrap();
        prop_assert!((xt.norm() - x.norm()).abs() <= 1e-10);
        prop_assert!((s.igft(&xt).unwrap() - x).amax() <= 1e-10);
    }
}
