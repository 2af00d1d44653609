use twostate::boseeinstein::*;

#[test]
fn probe_gaussian_seeds() {
    let src = SourceModel {
        geometry: SourceGeometry::Gaussian { radius_fm: 5.0 },
        momentum_scale_gev: 0.05,
    };
    for seed in 1..=6u64 {
        let report = correlation(&src, 100_000, seed, &Binning::default()).unwrap();
        let fit = report.fit.unwrap();
        println!(
            "seed {seed}: lambda={:.4} R={:.4} ({:+.2}%) intercept={:.4} c0_pool={:.3}±{:.3} tail={:.4}±{:.4}",
            fit.lambda, fit.radius_fm, (fit.radius_fm/5.0-1.0)*100.0, fit.intercept,
            report.c0_pooled.unwrap().0, report.c0_pooled.unwrap().1,
            report.tail_c.unwrap().0, report.tail_c.unwrap().1
        );
    }
}
