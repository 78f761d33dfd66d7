use num_complex::Complex64;
use proptest::prelude::*;
use qimlab::measurements::{load_ensemble, save_ensemble, CdpOperator, SensingEnsemble};
use qimlab::rng::SeedTree;
use qimlab::scalar::{inner, Scalar};
use qimlab::QimError;

fn random_vec<S: Scalar>(len: usize, seed: u64) -> Vec<S> {
    let mut g = SeedTree::new(seed).normals();
    (0..len).map(|_| S::sample(&mut g)).collect()
}

/// Dense CDP matrix written straight from the definition.
fn cdp_dense(op: &CdpOperator) -> Vec<Vec<Complex64>> {
    let n = op.n();
    let mut rows = Vec::new();
    for d in op.masks() {
        for k in 0..n {
            rows.push(
                (0..n)
                    .map(|j| {
                        let ang = -std::f64::consts::TAU * ((j * k) % n) as f64 / n as f64;
                        d[j] * Complex64::from_polar(1.0, ang)
                    })
                    .collect(),
            );
        }
    }
    rows
}

#[test]
fn gaussian_covariance_near_identity() {
    let (n, m) = (2, 10_000);
    let e = SensingEnsemble::<f64>::gaussian(n, m, 7).unwrap();
    let rows = e.rows().unwrap();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let c: f64 = rows.chunks(n).map(|r| r[i] * r[j]).sum::<f64>() / m as f64;
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((c - target).abs());
        }
    }
    assert!(dev <= 0.08, "max deviation {dev}");
}

#[test]
fn covariance_deviation_within_five_over_sqrt_m() {
    let (n, m) = (4, 10_000);
    let bound = 5.0 / (m as f64).sqrt();
    let mut ok = 0;
    for seed in 0..20 {
        let e = SensingEnsemble::<f64>::gaussian(n, m, seed).unwrap();
        let rows = e.rows().unwrap();
        let mut dev: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let c: f64 = rows.chunks(n).map(|r| r[i] * r[j]).sum::<f64>() / m as f64;
                dev = dev.max((c - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        ok += usize::from(dev <= bound);
    }
    assert!(ok >= 19, "{ok}/20 seeds within bound");
}

#[test]
fn complex_second_moment() {
    let e = SensingEnsemble::<Complex64>::gaussian(3, 20_000, 9).unwrap();
    let mut e1 = vec![Complex64::new(0.0, 0.0); 3];
    e1[0] = Complex64::new(1.0, 0.0);
    let mean = e.intensities(&e1).unwrap().mean();
    assert!((0.95..=1.05).contains(&mean), "{mean}");
}

#[test]
fn gaussian_is_deterministic() {
    let a = SensingEnsemble::<f64>::gaussian(5, 9, 3).unwrap();
    let b = SensingEnsemble::<f64>::gaussian(5, 9, 3).unwrap();
    let c = SensingEnsemble::<f64>::gaussian(5, 9, 4).unwrap();
    assert_eq!(a.rows(), b.rows());
    assert_ne!(a.rows(), c.rows());
}

#[test]
fn all_ones_mask_is_plain_dft() {
    let n = 8;
    let op = CdpOperator::from_masks(n, vec![vec![Complex64::new(1.0, 0.0); n]]).unwrap();
    let e = SensingEnsemble::from_cdp(op, 3);
    let x: Vec<Complex64> = random_vec(n, 11);
    let got = e.forward(&x).unwrap();
    for k in 0..n {
        let want: Complex64 = (0..n)
            .map(|j| {
                x[j] * Complex64::from_polar(1.0, -std::f64::consts::TAU * (j * k) as f64 / n as f64)
            })
            .sum();
        assert!((got[k] - want).norm() < 1e-12);
    }
}

#[test]
fn cdp_total_energy_matches_dense_oracle() {
    let (n, l) = (16, 3);
    let e = SensingEnsemble::cdp(n, l, 5).unwrap();
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    x[0] = Complex64::new(1.0, 0.0);
    let y = e.intensities(&x).unwrap().y;
    let total: f64 = y.iter().sum();

    let op = e.cdp_operator().unwrap();
    let mean_sq: f64 =
        op.masks().iter().map(|d| d[0].norm_sqr()).sum::<f64>() / l as f64;
    assert!((total - (l * n) as f64 * mean_sq).abs() < 1e-10);

    let dense = cdp_dense(op);
    let dense_total: f64 = dense.iter().map(|r| r[0].norm_sqr()).sum();
    assert!((total - dense_total).abs() < 1e-10);
}

#[test]
fn cdp_forward_matches_dense_construction() {
    for &(n, l) in &[(1, 2), (5, 3), (16, 4), (32, 2), (12, 7)] {
        let e = SensingEnsemble::cdp(n, l, n as u64 * 31 + l as u64).unwrap();
        let dense = cdp_dense(e.cdp_operator().unwrap());
        let u: Vec<Complex64> = random_vec(n, 99);
        let got = e.forward(&u).unwrap();
        let scale = u.iter().map(|v| v.norm()).sum::<f64>();
        for (row, g) in dense.iter().zip(&got) {
            let want: Complex64 = row.iter().zip(&u).map(|(a, b)| a * b).sum();
            assert!((want - g).norm() <= 1e-10 * scale, "n={n} l={l}");
        }
        let dense_flat = e.to_dense();
        for (k, row) in dense.iter().enumerate() {
            for j in 0..n {
                assert!((dense_flat[k * n + j] - row[j]).norm() < 1e-10);
            }
        }
    }
}

#[test]
fn octanary_symbols_have_unit_mean_square() {
    let e = SensingEnsemble::cdp(64, 200, 1).unwrap();
    let op = e.cdp_operator().unwrap();
    let syms: Vec<Complex64> = op.masks().iter().flatten().copied().collect();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for s in &syms {
        let small = [s.re.abs(), s.im.abs()].iter().any(|v| (v - h).abs() < 1e-15);
        let large = [s.re.abs(), s.im.abs()]
            .iter()
            .any(|v| (v - 3f64.sqrt()).abs() < 1e-15);
        assert!(small ^ large);
        assert!(s.re == 0.0 || s.im == 0.0);
    }
    let ms = syms.iter().map(|s| s.norm_sqr()).sum::<f64>() / syms.len() as f64;
    assert!((ms - 1.0).abs() < 0.05, "{ms}");
}

fn adjoint_gap<S: Scalar>(e: &SensingEnsemble<S>, seed: u64) -> f64 {
    let u: Vec<S> = random_vec(e.n(), seed);
    let v: Vec<S> = random_vec(e.m(), seed + 1_000_000);
    let lhs = inner(&e.forward(&u).unwrap(), &v);
    let rhs = inner(&u, &e.adjoint(&v).unwrap());
    let diff = lhs - rhs;
    let scale = lhs.abs_sqr().sqrt().max(1.0);
    diff.abs_sqr().sqrt() / scale
}

#[test]
fn adjoint_identity_on_random_pairs() {
    let real = SensingEnsemble::<f64>::gaussian(12, 40, 1).unwrap();
    let cplx = SensingEnsemble::<Complex64>::gaussian(12, 40, 2).unwrap();
    let cdp = SensingEnsemble::cdp(24, 5, 3).unwrap();
    for seed in 0..100 {
        assert!(adjoint_gap(&real, seed) <= 1e-10);
        assert!(adjoint_gap(&cplx, seed) <= 1e-10);
        assert!(adjoint_gap(&cdp, seed) <= 1e-10);
    }
}

#[test]
fn intensities_of_zero_are_zero() {
    let e = SensingEnsemble::<f64>::gaussian(6, 20, 1).unwrap();
    assert!(e.intensities(&[0.0; 6]).unwrap().y.iter().all(|&v| v == 0.0));
}

#[test]
fn snr_is_hit_exactly() {
    let e = SensingEnsemble::<f64>::gaussian(32, 256, 4).unwrap();
    let x: Vec<f64> = random_vec(32, 5);
    for snr in [-5.0, 0.0, 20.0, 37.5, 60.0] {
        let d = e.add_amplitude_noise(&x, snr, 8).unwrap();
        let realized = e.realized_snr_db(&x, &d).unwrap().unwrap();
        assert!((realized - snr).abs() < 1e-9, "{realized} vs {snr}");
        assert!(d.y.iter().all(|&v| v >= 0.0));
    }
    let low = e.add_amplitude_noise(&x, -5.0, 8).unwrap();
    assert!(low.clamped > 0);
}

#[test]
fn sixty_db_perturbation_is_one_thousandth() {
    let (n, m) = (128, 1024);
    let e = SensingEnsemble::<f64>::gaussian(n, m, 12).unwrap();
    let x: Vec<f64> = random_vec(n, 13);
    let d = e.add_amplitude_noise(&x, 60.0, 14).unwrap();
    let clean: Vec<f64> = e.forward(&x).unwrap().iter().map(|v| v.abs()).collect();
    let amp = d.amplitudes.unwrap();
    let pert: f64 = amp.iter().zip(&clean).map(|(a, b)| (a - b).powi(2)).sum();
    let sig: f64 = clean.iter().map(|b| b * b).sum();
    let ratio = (pert / sig).sqrt();
    // Clamping near-zero amplitudes trims the realized perturbation slightly.
    assert!((ratio - 1e-3).abs() < 1e-5, "{ratio}");
    let eta: f64 = d.noise.unwrap().iter().map(|e| e * e).sum();
    assert!(((eta / sig).sqrt() - 1e-3).abs() < 1e-12);
}

#[test]
fn noise_rejects_nan_target() {
    let e = SensingEnsemble::<f64>::gaussian(4, 8, 1).unwrap();
    assert!(matches!(
        e.add_amplitude_noise(&[1.0; 4], f64::NAN, 1),
        Err(QimError::Domain(_))
    ));
}

#[test]
fn container_roundtrip_real_complex_cdp() {
    let real = SensingEnsemble::<f64>::gaussian(5, 11, 21).unwrap();
    let mut buf = Vec::new();
    save_ensemble(&real, &mut buf).unwrap();
    let back: SensingEnsemble<f64> = load_ensemble(buf.as_slice()).unwrap();
    assert_eq!(back.rows(), real.rows());
    assert_eq!(back.seed(), 21);

    let cplx = SensingEnsemble::<Complex64>::gaussian(4, 7, 22).unwrap();
    let mut buf = Vec::new();
    save_ensemble(&cplx, &mut buf).unwrap();
    let back: SensingEnsemble<Complex64> = load_ensemble(buf.as_slice()).unwrap();
    assert_eq!(back.rows(), cplx.rows());
    assert!(load_ensemble::<f64, _>(buf.as_slice()).is_err());

    let cdp = SensingEnsemble::cdp(8, 3, 23).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cdp.qim");
    save_ensemble(&cdp, std::fs::File::create(&path).unwrap()).unwrap();
    let back: SensingEnsemble<Complex64> =
        load_ensemble(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(back.m(), 24);
    assert_eq!(back.to_dense(), cdp.to_dense());
}

#[test]
fn container_rejects_garbage() {
    assert!(matches!(
        load_ensemble::<f64, _>(&b"NOTQIMxxxxxxxxxx"[..]),
        Err(QimError::Format(_))
    ));
}

proptest! {
    #[test]
    fn real_intensities_bitwise_sign_invariant(seed in 0u64..1000, n in 1usize..12, m in 1usize..30) {
        let e = SensingEnsemble::<f64>::gaussian(n, m, seed).unwrap();
        let x: Vec<f64> = random_vec(n, seed ^ 0xABCD);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        prop_assert_eq!(e.intensities(&x).unwrap().y, e.intensities(&neg).unwrap().y);
    }

    #[test]
    fn complex_intensities_phase_invariant(seed in 0u64..1000, phi in 0.0f64..6.3) {
        let e = SensingEnsemble::<Complex64>::gaussian(6, 20, seed).unwrap();
        let cdp = SensingEnsemble::cdp(6, 3, seed).unwrap();
        let x: Vec<Complex64> = random_vec(6, seed + 7);
        let rot = Complex64::from_polar(1.0, phi);
        let xr: Vec<Complex64> = x.iter().map(|v| v * rot).collect();
        for ens in [&e, &cdp] {
            let a = ens.intensities(&x).unwrap().y;
            let b = ens.intensities(&xr).unwrap().y;
            for (p, q) in a.iter().zip(&b) {
                prop_assert!((p - q).abs() <= 1e-12 * (1.0 + p.abs()));
            }
        }
    }
}
