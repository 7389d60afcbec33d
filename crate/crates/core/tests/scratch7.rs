//! Temporary c06 calibration (deleted before ship).
use std::time::Instant;
use vtm_core::*;

#[test]
fn c06_family() {
    let mut rf_rec = Vec::new();
    let mut ra_rec = Vec::new();
    let t0 = Instant::now();
    for seed in 0..6u64 {
        let cfg = SceneConfig {
            n_inliers: 100,
            outlier_ratio: 0.95,
            rotation_deg: 60.0,
            scale: 1.5,
            noise_sigma: 0.5,
            seed: derive_seed(700, &[seed]),
            ..SceneConfig::default()
        };
        let (corr, truth) = generate_scene(&cfg).unwrap();
        let m = corr.len().div_ceil(450);
        let r = rfvtm(
            &corr,
            &RfvtmConfig { m, seed: derive_seed(701, &[seed]), ..RfvtmConfig::default() },
        )
        .unwrap();
        rf_rec.extend(metrics(&classify(&r, &truth).unwrap()).rec);
        let a = ransac_affine(
            &corr,
            &RansacConfig { seed: derive_seed(702, &[seed]), ..RansacConfig::default() },
        )
        .unwrap();
        ra_rec.extend(metrics(&classify(&a, &truth).unwrap()).rec);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    println!(
        "n=100 r=.95 s=.5 auto-m: rfvtm recall {:.3}, ransac recall {:.3}, elapsed {:?} for 6 seeds",
        mean(&rf_rec),
        mean(&ra_rec),
        t0.elapsed()
    );
}
