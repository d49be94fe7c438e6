use gwspectra_core::halfplane::limiting_density;
use gwspectra_core::offspring::Disorder;
use gwspectra_core::spectra::{self, smoothed_reference, ScanParams};
use gwspectra_core::{Exec, OffspringLaw};

fn params(grid: usize, pool: usize, seed: u64) -> ScanParams {
    ScanParams {
        e: 1.5,
        grid_size: grid,
        pool_size: pool,
        eta_schedule: vec![1.0, 0.3, 0.1],
        sweeps: 40,
        hold_sweeps: 80,
        p: 2.0,
        seed,
    }
}

#[test]
fn barely_supercritical_poisson_is_not_certified() {
    let r = spectra::poisson_ac(1.05, 0.1, 6, &params(4, 2000, 1), 100_000, Exec::Parallel).unwrap();
    assert!(r.control.alpha > spectra::CERT_ALPHA_MAX, "alpha {}", r.control.alpha);
    assert!(!r.certified);
    assert!(r.pi_e > 0.9);
}

#[test]
fn poisson_ac_grid_avoids_the_excluded_set() {
    let r = spectra::poisson_ac(8.0, 0.1, 8, &params(6, 2000, 2), 1_000_000, Exec::Parallel).unwrap();
    assert!(r.forbidden.measure() <= 0.1);
    assert!(r.density.grid.iter().all(|&x| !r.forbidden.is_excluded(x) && x.abs() < 1.5));
    let w: f64 = r.density.weights.iter().sum();
    // (-E, E) minus at most the whole excluded set.
    assert!(w <= 3.0 + 1e-12 && w >= 3.0 - r.forbidden.measure() - 1e-12, "{w}");
    assert!(r.acmass.lower_bound >= 0.0 && r.acmass.lower_bound <= 1.0);
}

#[test]
fn ks_core_laws() {
    let r = spectra::ks_core(5.0, &params(4, 2000, 3), Exec::Parallel).unwrap();
    let root = OffspringLaw::poisson(5.0).unwrap().conditioned(2).unwrap();
    assert!((r.root_mean - root.mean()).abs() < 1e-12);
    // Size bias: E N(N-1) / E N.
    assert!((r.bulk_mean - (root.moment(2) - root.mean()) / root.mean()).abs() < 1e-9);
    assert!(r.min_density > 0.0);
}

#[test]
fn anderson_without_disorder_matches_the_smoothed_law() {
    let mut p = params(5, 16, 4);
    p.hold_sweeps = 400;
    let runs = spectra::anderson(&[4], &[0.0], Disorder::Uniform, &p, Exec::Sequential).unwrap();
    let run = &runs[0];
    assert!(run.converged);
    let est = &run.density;
    for (x, f) in est.grid.iter().zip(&est.f_values) {
        assert!((f - smoothed_reference(*x, est.eta, 4.0 / 3.0)).abs() < 1e-10);
    }
    // Smoothing at η = 0.1 stays close to the η → 0 density inside the bulk.
    assert!((est.f_values[2] - limiting_density(est.grid[2], 4.0 / 3.0)).abs() < 0.05);
}
