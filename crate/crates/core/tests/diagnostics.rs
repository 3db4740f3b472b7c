use clipped_mc::diagnostics::{coherence, diagnose, DiagnoseOptions, SubspaceT};
use clipped_mc::{rng, ClipSpec, DenseMatrix};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

fn low_rank(n1: usize, n2: usize, r: usize, seed: u64) -> DenseMatrix {
    let mut g = rng::seeded(seed);
    let a = DMatrix::from_fn(n1, r, |_, _| g.sample::<f64, _>(StandardNormal));
    let b = DMatrix::from_fn(r, n2, |_, _| g.sample::<f64, _>(StandardNormal));
    DenseMatrix::from_nalgebra(a * b)
}

/// Coherences straight from nalgebra's SVD.
fn oracle_coherence(m: &DenseMatrix, r: usize) -> (f64, f64) {
    let (n1, n2) = m.shape();
    let svd = m.as_nalgebra().clone().svd(true, true);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let u = svd.u.unwrap().select_columns(&order[..r]);
    let v = svd.v_t.unwrap().transpose().select_columns(&order[..r]);
    let row_max = |x: &DMatrix<f64>| (0..x.nrows()).map(|i| x.row(i).norm_squared()).fold(0.0, f64::max);
    let mu0 = (n1 as f64 / r as f64 * row_max(&u)).max(n2 as f64 / r as f64 * row_max(&v));
    let uv = &u * v.transpose();
    let mu1 = uv.amax() * ((n1 * n2) as f64 / r as f64).sqrt();
    (mu0, mu1)
}

#[test]
fn coherence_matches_independent_svd() {
    for seed in 0..5 {
        let m = low_rank(9, 13, 2 + seed as usize % 2, seed);
        let c = coherence(&m).unwrap();
        let (mu0, mu1) = oracle_coherence(&m, c.rank);
        assert!((c.mu0 - mu0).abs() <= 1e-10 * mu0, "mu0 {} vs {mu0}", c.mu0);
        assert!((c.mu1 - mu1).abs() <= 1e-10 * mu1, "mu1 {} vs {mu1}", c.mu1);
    }
}

#[test]
fn projector_complements_sum_to_identity() {
    let m = low_rank(7, 8, 2, 9);
    let t = SubspaceT::of(&m).unwrap();
    let mut g = rng::seeded(3);
    let z = DenseMatrix::from_fn(7, 8, |_, _| g.random_range(-1.0..1.0));
    let sum = &t.project(&z) + &t.project_orthogonal(&z);
    assert!((&sum - &z).max_abs() <= 1e-12);
    assert!(t.project(&z).dot(&t.project_orthogonal(&z)).abs() <= 1e-10);
}

#[test]
fn diagnose_boundary_regimes() {
    let m = low_rank(6, 7, 2, 1);
    let opts = DiagnoseOptions {
        samples: 20,
        ascent_steps: 3,
        ..DiagnoseOptions::default()
    };
    let lossless = diagnose(&m, &ClipSpec::ceiling(m.max() + 1.0).unwrap(), &opts).unwrap();
    assert!(lossless.nu_b.unwrap().abs() <= 1e-12);
    assert!(lossless.rho_fro.abs() <= 1e-12 && lossless.rho_op.abs() <= 1e-12);
    assert_eq!(lossless.rank, 2);

    let saturated = diagnose(&m, &ClipSpec::ceiling(m.min()).unwrap(), &opts).unwrap();
    assert!((saturated.nu_b.unwrap() - 1.0).abs() <= 1e-9);
    // with everything clipped the recovery conditions fail
    assert!(saturated.pmin.is_err());

    let again = diagnose(&m, &ClipSpec::ceiling(m.min()).unwrap(), &opts).unwrap();
    assert_eq!(saturated.rho_inf, again.rho_inf, "seeded estimates repeat");
}

