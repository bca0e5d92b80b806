// Scratch: Table-5 timing-ratio calibration across desk-scale settings.
use splitdmd::*;

fn scenario(t: f64, dt_out: f64) -> SnapshotMatrix {
    let mut cfg = KsConfig::for_length(402.3);
    cfg.num_nodes = 384;
    cfg.final_time = t;
    cfg.dt_out = dt_out;
    cfg.dt_int = 0.05;
    cfg.perturb_amplitude = 0.05;
    cfg.rng_seed = 7;
    simulate_ks(&cfg).unwrap()
}

fn main() {
    for (t, dt_out) in [(200.0, 0.25), (200.0, 0.5), (200.0, 1.0), (400.0, 1.0), (400.0, 0.5)] {
        let z = scenario(t, dt_out);
        let interior: Vec<f64> = (1..=9).map(|i| t * i as f64 / 10.0).collect();
        let splits = SplitSet::from_interior(0.0, t, &interior).unwrap();

        let t0 = std::time::Instant::now();
        let (_m10, rep10) = split_dmd(
            &z, 13, FitMethod::StandardDmd, &SplitSpec::Explicit(splits), &VarproConfig::default(), false,
        ).unwrap();
        let dmd10_wall = t0.elapsed().as_secs_f64();

        let t0 = std::time::Instant::now();
        let m0 = exact_dmd(&z, 13).unwrap();
        let zh = reconstruct_real(&m0, &z.t_grid);
        let rep0 = error_report(&z, &zh, t0.elapsed().as_secs_f64()).unwrap();

        let mut vc = VarproConfig::default();
        vc.max_iters = 300;
        vc.tol_decrease = 1e-14;
        let t0 = std::time::Instant::now();
        let fit = optdmd(&z, 13, None, &vc).unwrap();
        let od_wall = t0.elapsed().as_secs_f64();

        println!(
            "T={t:3} dt={dt_out:4}: cols={:4} | dmd10 {dmd10_wall:7.4}s frob {:.4} | dmd0 frob {:.4} | od0 {od_wall:6.2}s iters {:3} frob {:.4} | err-ratio dmd {:5.1}x finalr {:5.1}x | time-ratio {:5.0}x",
            z.num_snapshots(),
            rep10.rel_frobenius,
            rep0.rel_frobenius,
            fit.diagnostics.iterations,
            fit.report.rel_frobenius,
            rep0.rel_frobenius / rep10.rel_frobenius,
            rep0.final_residual_2norm / rep10.final_residual_2norm,
            od_wall / dmd10_wall
        );
    }
}
