// Scratch: integrator convergence order on a short smooth horizon.
use splitdmd::{simulate_ks, KsConfig};

fn final_col(cfg: &KsConfig) -> Vec<f64> {
    let snap = simulate_ks(cfg).unwrap();
    let n = snap.num_snapshots();
    (0..snap.num_nodes()).map(|i| snap.values[(i, n - 1)]).collect()
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

fn main() {
    for t_end in [10.0, 50.0, 100.0] {
        let mut reference = KsConfig::for_length(12.6);
        reference.final_time = t_end;
        reference.dt_out = t_end;
        reference.dt_int = 0.000625;
        let r = final_col(&reference);
        print!("T={t_end:5}: ");
        for dt in [0.04, 0.02, 0.01, 0.005, 0.0025] {
            let mut cfg = reference.clone();
            cfg.dt_int = dt;
            print!("dt={dt}: {:.3e}  ", rel_diff(&final_col(&cfg), &r));
        }
        println!();
    }
}
