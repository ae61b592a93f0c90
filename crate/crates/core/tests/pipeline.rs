mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{oracle, random_model, rel};
use wsn_alloc::allocators::{allocate, continuous, Algorithm, AllocatorConfig};
use wsn_alloc::chansim::{simulate, ChannelMode, SimConfig};
use wsn_alloc::experiments::{parse_config, run_sweep, write_csv, CSV_HEADER};
use wsn_alloc::model::reference_k3;

#[test]
fn every_algorithm_yields_a_feasible_integer_allocation() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for (q, k) in [(1, 1), (2, 3), (3, 5), (2, 8)] {
        for (p, b) in [(0.3, 2u32), (5.0, 7), (300.0, 25)] {
            let m = random_model(&mut rng, q, k, p, b);
            for alg in Algorithm::ALL {
                let r = allocate(&m, &AllocatorConfig::with_algorithm(alg)).unwrap();
                assert!(r.allocation.is_integral(), "{alg} {:?}", r.allocation.rates);
                r.allocation.validate(&m).unwrap();
                assert!(r.report.d_a >= r.report.d0 * (1.0 - 1e-12));
                assert!(r.report.d_a <= r.report.d_b * (1.0 + 1e-9));
            }
        }
    }
}

#[test]
fn reports_agree_with_the_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..10 {
        let m = random_model(&mut rng, 2, 4, 20.0, 16);
        let o = oracle(&m);
        for alg in [Algorithm::ACoupled, Algorithm::BDecoupled] {
            let r = allocate(&m, &AllocatorConfig::with_algorithm(alg)).unwrap();
            let (l, p) = (&r.allocation.rates, &r.allocation.powers);
            assert!(rel(r.report.d_a, o.d_a(l, p)) < 1e-9);
            assert!(rel(r.report.d_b, o.d_b(l, p)) < 1e-9);
            assert!(rel(r.report.d0, o.d0()) < 1e-9);
        }
    }
}

#[test]
fn coupled_outer_loop_never_worsens_the_bound() {
    for (p, b) in [(3.0, 4u32), (40.0, 12), (1000.0, 30)] {
        let m = reference_k3(p, b);
        for alg in [Algorithm::ACoupled, Algorithm::BCoupled] {
            let c = continuous(&m, &AllocatorConfig::with_algorithm(alg)).unwrap();
            assert!(c.history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)), "{alg} {:?}", c.history);
            assert!(c.outer_iterations <= 50);
        }
    }
}

#[test]
fn bigger_budgets_never_hurt_a_coupled() {
    let cfg = AllocatorConfig::default();
    let mut prev = f64::INFINITY;
    for db in [0.0, 10.0, 20.0, 30.0] {
        let r = allocate(&reference_k3(10f64.powf(db / 10.0), 30), &cfg).unwrap();
        assert!(r.report.d_a <= prev * (1.0 + 1e-6), "{db} dB: {} after {prev}", r.report.d_a);
        prev = r.report.d_a;
    }
}

#[test]
fn waveform_and_bitflip_channels_agree() {
    let m = reference_k3(50.0, 12);
    let r = allocate(&m, &AllocatorConfig::default()).unwrap();
    let run = |mode| simulate(&m, &r.allocation, &SimConfig { trials: 60_000, seed: 9, channel_mode: mode }).unwrap();
    let (a, b) = (run(ChannelMode::Bitflip), run(ChannelMode::Waveform));
    assert!((a.mse - b.mse).abs() <= 3.0 * (a.half_width + b.half_width), "{} vs {}", a.mse, b.mse);
    assert!(a.mse <= 2.0 * r.report.d_a + 3.0 * a.half_width);
}

#[test]
fn bit_budget_sweep_writes_one_row_per_point() {
    let text = include_str!("../../../configs/reference_k3.cfg").replace(
        "axis = \"p_tot_db\"\nvalues = [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]",
        "axis = \"b_tot\"\nvalues = [2.0, 6.0, 12.0]\nfixed = 20.0",
    );
    let mut exp = parse_config(&text).unwrap();
    let spec = exp.sweep.as_mut().unwrap();
    spec.trials = 0;
    let rows = run_sweep(&exp.model, &exp.allocator, spec).unwrap();
    assert_eq!(rows.len(), 15);
    let mut buf = Vec::new();
    write_csv(&rows, &mut buf).unwrap();
    let csv = String::from_utf8(buf).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
    for (line, row) in lines.zip(&rows) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), CSV_HEADER.len());
        assert_eq!(cells[0], "b_tot");
        assert_eq!(cells[2], row.algorithm.to_string());
        assert_eq!(cells[3], "ok");
        let bits: u32 = cells[4].split(';').map(|x| x.parse::<u32>().unwrap()).sum();
        assert!(f64::from(bits) <= row.axis_value);
        assert!(cells[11].is_empty() && cells[16].is_empty());
    }
}
