// Scratch: per-piece achievable ranks across the experiment scenarios.
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
    let interior: Vec<f64> = (1..=n - 1).map(|i| t_end * i as f64 / n as f64).collect();
    SplitSet::from_interior(0.0, t_end, &interior).unwrap()
}

fn piece_ranks(z: &SnapshotMatrix, splits: &SplitSet, probe: usize) {
    for k in 1..=splits.num_subintervals() {
        let (a, b) = splits.subinterval(k);
        let block = z.time_slice(a, b).unwrap();
        let mut achievable = probe;
        for r in (1..=probe).rev() {
            match exact_dmd(&block, r) {
                Ok(_) => { achievable = r; break; }
                Err(_) => { achievable = 0; }
            }
        }
        print!(" [{a:.0},{b:.0}]:{achievable}");
    }
    println!();
}

fn main() {
    println!("L=12.6 4-split piece ranks (probe 13):");
    let z = ks(12.6, 161, 400.0, 0.2, 0.0);
    piece_ranks(&z, &even_splits(400.0, 5), 13);
    println!("L=13.2 4-split piece ranks:");
    let z = ks(13.2, 161, 400.0, 0.2, 0.0);
    piece_ranks(&z, &even_splits(400.0, 5), 13);
    for amp in [1e-6, 1e-4, 1e-3, 1e-2] {
        println!("L=12.6 amp={amp:.0e} 4-split piece ranks:");
        let z = ks(12.6, 161, 400.0, 0.2, amp);
        piece_ranks(&z, &even_splits(400.0, 5), 13);
        println!("L=13.2 amp={amp:.0e} 4-split piece ranks:");
        let z = ks(13.2, 161, 400.0, 0.2, amp);
        piece_ranks(&z, &even_splits(400.0, 5), 13);
    }
    println!("L=402.3 T=200 10-split piece ranks:");
    let z = ks(402.3, 384, 200.0, 0.25, 0.0);
    piece_ranks(&z, &even_splits(200.0, 10), 15);
    println!("L=402.3 T=400 10-split piece ranks:");
    let z = ks(402.3, 384, 400.0, 0.2, 0.0);
    piece_ranks(&z, &even_splits(400.0, 10), 15);
}
