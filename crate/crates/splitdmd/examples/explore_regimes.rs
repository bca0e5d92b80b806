// Scratch exploration of the KS solver regimes (not part of the test suite).
use splitdmd::{simulate_ks, KsConfig};

fn window_diameter(values: &ndarray::Array2<f64>, cols: std::ops::Range<usize>) -> f64 {
    let mut max_d: f64 = 0.0;
    for i in 0..values.nrows() {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in cols.clone() {
            lo = lo.min(values[(i, k)]);
            hi = hi.max(values[(i, k)]);
        }
        max_d = max_d.max(hi - lo);
    }
    max_d
}

fn global_range(values: &ndarray::Array2<f64>) -> f64 {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    hi - lo
}

fn main() {
    // Regime survey.
    for (l, nodes, t, dt_out, dt_int, amp) in [
        (12.6, 161usize, 400.0, 0.2, 0.02, 0.0),
        (12.6, 161, 800.0, 0.2, 0.02, 0.0),
        (13.2, 161, 400.0, 0.2, 0.02, 0.0),
        (402.3, 161, 200.0, 0.25, 0.05, 0.0),
        (402.3, 256, 200.0, 0.25, 0.05, 0.0),
        (402.3, 384, 200.0, 0.25, 0.05, 0.0),
        (402.3, 384, 400.0, 0.2, 0.05, 0.0),
        (402.3, 384, 400.0, 0.2, 0.05, 0.05),
    ] {
        let mut cfg = KsConfig::for_length(l);
        cfg.num_nodes = nodes;
        cfg.final_time = t;
        cfg.dt_out = dt_out;
        cfg.dt_int = dt_int;
        cfg.perturb_amplitude = amp;
        cfg.rng_seed = 1;
        let start = std::time::Instant::now();
        match simulate_ks(&cfg) {
            Ok(snap) => {
                let n = snap.num_snapshots();
                let range = global_range(&snap.values);
                let tail = window_diameter(&snap.values, (n * 9 / 10)..n);
                let win = n / 10;
                let half = n / 2;
                let mut min_win = f64::INFINITY;
                for s in half..(n - win) {
                    min_win = min_win.min(window_diameter(&snap.values, s..s + win));
                }
                // range over second half only (attractor, transient excluded)
                let mut lo2 = f64::INFINITY;
                let mut hi2 = f64::NEG_INFINITY;
                for k in half..n {
                    for i in 0..snap.num_nodes() {
                        lo2 = lo2.min(snap.values[(i, k)]);
                        hi2 = hi2.max(snap.values[(i, k)]);
                    }
                }
                println!(
                    "L={l:7.2} nodes={nodes:3} T={t:4.0} amp={amp:4.2} cols={n:5} range={range:8.2} tail_diam={tail:8.3} min_win_diam={min_win:8.3} half_range={:8.2} [{:?}]",
                    hi2 - lo2,
                    start.elapsed()
                );
            }
            Err(e) => println!("L={l:7.2} nodes={nodes:3} T={t:4.0} amp={amp:4.2} FAILED: {e}"),
        }
    }

    // Self-convergence under dt halving.
    for (l, t_end, amp) in [(12.6, 100.0, 0.0), (12.6, 400.0, 0.0), (13.2, 400.0, 0.0)] {
        let mut cfg = KsConfig::for_length(l);
        cfg.final_time = t_end;
        cfg.perturb_amplitude = amp;
        let a = simulate_ks(&cfg).unwrap();
        let mut cfg2 = cfg.clone();
        cfg2.dt_int = cfg.dt_int / 2.0;
        let b = simulate_ks(&cfg2).unwrap();
        let n = a.num_snapshots();
        let mut diff = 0.0;
        let mut norm = 0.0;
        for i in 0..a.num_nodes() {
            let d = a.values[(i, n - 1)] - b.values[(i, n - 1)];
            diff += d * d;
            norm += b.values[(i, n - 1)].powi(2);
        }
        println!(
            "L={l} T={t_end} amp={amp}: halved-dt rel final diff = {:.3e}",
            (diff / norm).sqrt()
        );
    }
}
