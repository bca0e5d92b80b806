// Scratch: end-to-end experiment calibration at desk scale.
use splitdmd::*;

fn ks(l: f64, nodes: usize, t: f64, dt_out: f64, amp: f64) -> SnapshotMatrix {
    let mut cfg = KsConfig::for_length(l);
    cfg.num_nodes = nodes;
    cfg.final_time = t;
    cfg.dt_out = dt_out;
    cfg.dt_int = if l > 100.0 { 0.05 } else { 0.02 };
    cfg.perturb_amplitude = amp;
    cfg.rng_seed = 7;
    simulate_ks(&cfg).unwrap()
}

fn even_splits(t_end: f64, n: usize) -> SplitSet {
    let interior: Vec<f64> = (1..=n - 1)
        .map(|i| t_end * i as f64 / n as f64)
        .collect();
    SplitSet::from_interior(0.0, t_end, &interior).unwrap()
}

fn run(
    label: &str,
    z: &SnapshotMatrix,
    r: usize,
    method: FitMethod,
    splits: Option<SplitSet>,
) -> (f64, f64, f64) {
    let od_cfg = VarproConfig::default();
    let spec = match splits {
        Some(s) => SplitSpec::Explicit(s),
        None => SplitSpec::Explicit(
            SplitSet::new(vec![z.t_grid[0], *z.t_grid.last().unwrap()]).unwrap(),
        ),
    };
    let started = std::time::Instant::now();
    let (model, report) = split_dmd(z, r, method, &spec, &od_cfg, false).unwrap();
    let wall = started.elapsed().as_secs_f64();
    println!(
        "{label:28} pieces={:2} final_resid={:12.6} rel_frob={:9.6} fit_time={:8.3}s wall={wall:8.3}s",
        model.pieces.len(),
        report.final_residual_2norm,
        report.rel_frobenius,
        model.total_fit_time_seconds,
    );
    (
        report.final_residual_2norm,
        report.rel_frobenius,
        model.total_fit_time_seconds,
    )
}

fn main() {
    println!("== L=12.6 r=11 T=400 (bifurcation) ==");
    let z = ks(12.6, 161, 400.0, 0.2, 1e-4);
    let od0 = run("od unsplit", &z, 11, FitMethod::OptimizedDmd, None);
    let od4 = run("od 4-split", &z, 11, FitMethod::OptimizedDmd, Some(even_splits(400.0, 5)));
    println!("  final ratio: {:.2}x   frob ratio: {:.2}x", od0.0 / od4.0, od0.1 / od4.1);

    println!("== L=13.2 r=13 T=400 (hopf) ==");
    let z = ks(13.2, 161, 400.0, 0.2, 1e-4);
    let od0 = run("od unsplit", &z, 13, FitMethod::OptimizedDmd, None);
    let od4 = run("od 4-split", &z, 13, FitMethod::OptimizedDmd, Some(even_splits(400.0, 5)));
    println!("  final ratio: {:.2}x   frob ratio: {:.2}x", od0.0 / od4.0, od0.1 / od4.1);

    println!("== L=402.3 r=13 T=200 (chaos, shortened) ==");
    let z = ks(402.3, 384, 200.0, 0.25, 0.0);
    let od0 = run("od unsplit", &z, 13, FitMethod::OptimizedDmd, None);
    let od10 = run("od 10-split", &z, 13, FitMethod::OptimizedDmd, Some(even_splits(200.0, 10)));
    println!("  final ratio: {:.2}x   frob ratio: {:.2}x", od0.0 / od10.0, od0.1 / od10.1);

    println!("== L=402.3 r=13 T=200 beta=1/20 (perturbed) ==");
    let z = ks(402.3, 384, 200.0, 0.25, 0.05);
    let dmd0 = run("dmd unsplit", &z, 13, FitMethod::StandardDmd, None);
    let dmd10 = run("dmd 10-split", &z, 13, FitMethod::StandardDmd, Some(even_splits(200.0, 10)));
    let od0 = run("od unsplit", &z, 13, FitMethod::OptimizedDmd, None);
    println!(
        "  dmd final ratio: {:.2}x   dmd frob ratio: {:.2}x   time ratio od0/dmd10: {:.0}x",
        dmd0.0 / dmd10.0,
        dmd0.1 / dmd10.1,
        od0.2 / dmd10.2
    );

    println!("== L=402.3 shifts (T=200, 10-split od) ==");
    let z = ks(402.3, 384, 200.0, 0.25, 0.0);
    let base = even_splits(200.0, 10);
    let od0 = run("od unsplit", &z, 13, FitMethod::OptimizedDmd, None);
    let unshifted = run("od 10-split +0", &z, 13, FitMethod::OptimizedDmd, Some(base.clone()));
    for shift in [3.0, 1.0, -1.0, -3.0] {
        let s = shift_splits(&base, shift).unwrap();
        let shifted = run(
            &format!("od 10-split {shift:+}"),
            &z,
            13,
            FitMethod::OptimizedDmd,
            Some(s),
        );
        println!(
            "    shift {shift:+}: err vs unshifted {:.2}x, better than unsplit: {}",
            shifted.0 / unshifted.0,
            shifted.0 < od0.0
        );
    }
}
