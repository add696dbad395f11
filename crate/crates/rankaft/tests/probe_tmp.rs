use rankaft::estimator::{ClusterWeight, WeightSpec};
use rankaft::sim::*;

#[test]
fn probe_dc_table2() {
    let t0 = std::time::Instant::now();
    let cfg = ScenarioConfig {
        kind: ScenarioKind::Dc,
        n: 200,
        error: ErrorDist::Normal,
        censoring: CensoringTarget::LeftRight { left: 0.15, right: 0.15 },
        theta: 1.0,
        seed: 318,
    };
    let settings = McSettings { replicates: 200, resamples: 200, ..McSettings::default() };
    let report = run_mc_study(&cfg, &[WeightSpec::gehan()], &settings).unwrap();
    println!("DC elapsed: {:.1}s", t0.elapsed().as_secs_f64());
    println!("DC censoring: {:?}", report.censoring);
    for o in &report.options {
        for p in &o.params {
            println!("  DC {}: bias={:+.4} ese={:.4} ase={:.4} cp={:.3}",
                p.parameter, p.bias, p.ese, p.ase.unwrap(), p.cp.unwrap());
        }
    }
    println!("  DC paper n=200 (15,15): bias -.003/.003 ese .086/.168 ase .084/.163 cp .948/.934");
}

#[test]
fn probe_clustered_re() {
    let t0 = std::time::Instant::now();
    let cfg = ScenarioConfig {
        kind: ScenarioKind::PicClustered,
        n: 150,
        error: ErrorDist::Normal,
        censoring: CensoringTarget::Overall(0.30),
        theta: 1.0,
        seed: 717,
    };
    let settings = McSettings { replicates: 100, resamples: 0, ..McSettings::default() };
    let opts = [
        WeightSpec::gehan(),
        WeightSpec::gehan().with_cluster(ClusterWeight::InverseSize),
    ];
    let report = run_mc_study(&cfg, &opts, &settings).unwrap();
    println!("CL elapsed: {:.1}s", t0.elapsed().as_secs_f64());
    for o in &report.options {
        for p in &o.params {
            println!("  CL {} {}: bias={:+.4} ese={:.4} mse={:.6}", o.label, p.parameter, p.bias, p.ese, p.mse);
        }
    }
    let re = report.relative_efficiency("gehan-inverse", "gehan").unwrap();
    println!("  CL RE adjusted-over-unadjusted: beta1={:.3} beta2={:.3} (paper 2.015/1.976)", re[0], re[1]);
}

#[test]
fn probe_logrank_iters() {
    let t0 = std::time::Instant::now();
    let cfg = ScenarioConfig {
        kind: ScenarioKind::Pic,
        n: 200,
        error: ErrorDist::Normal,
        censoring: CensoringTarget::Overall(0.30),
        theta: 1.0,
        seed: 555,
    };
    use rankaft::estimator::{fit_logrank, FitConfig};
    let mut iters = Vec::new();
    for r in 0..50u64 {
        let mut c2 = cfg.clone();
        c2.seed = cfg.seed.wrapping_add(r);
        let ds = generate(&c2).unwrap();
        let fc = FitConfig { weight: WeightSpec::logrank(), ..FitConfig::default() };
        let fit = fit_logrank(&ds, &fc).unwrap();
        assert!(fit.converged, "rep {r} not converged");
        iters.push(fit.outer_iterations);
    }
    iters.sort();
    println!("LR elapsed: {:.1}s; outer iters median={} max={}", t0.elapsed().as_secs_f64(), iters[25], iters[49]);
}
