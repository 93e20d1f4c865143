use hhfuse::dynamics::reference::hh_step_naive;
use hhfuse::dynamics::*;
use proptest::prelude::*;

fn hh() -> HHParams {
    HHParams::default()
}

fn spiking_params(g_scale: f64, c_m: f64, dt: f64) -> HHParams {
    let mut p = hh();
    for c in &mut p.channels {
        c.g_max *= g_scale;
    }
    p.c_m = c_m;
    p.dt = dt;
    p
}

#[test]
fn sodium_activation_rate_at_rest_matches_closed_form() {
    // alpha_m(V) = 0.1 (V + 40) / (1 - exp(-(V + 40) / 10)), beta_m = 4 exp(-(V + 65) / 18)
    let p = hh();
    let m = p.gates().next().unwrap();
    let (a, b) = m.rates(-65.0);
    let expected_a = 0.1 * (-25.0) / (1.0 - (25.0_f64 / 10.0).exp());
    assert!((a - expected_a).abs() < 1e-14, "{a} vs {expected_a}");
    assert!((b - 4.0).abs() < 1e-14);
    assert_eq!(m.rates(-65.0), m.rates(-65.0));
}

#[test]
fn potassium_rate_is_finite_at_singular_point() {
    let p = hh();
    let n = p.gates().find(|g| g.name == "n").unwrap();
    let (a, _) = n.rates(-55.0);
    assert_eq!(a, 0.1);
}

#[test]
fn resting_neuron_stays_at_rest_for_100_ms() {
    let p = hh();
    let m = PointModel::Hh(p.clone());
    let steps = (100.0 / p.dt).round() as usize;
    let t = simulate(&m, &vec![vec![0.0]; steps], &m.resting_state(1)).unwrap();
    assert!(t.v.iter().all(|v| (v[0] - p.v_rest).abs() < 1.0));
    assert_eq!(t.spike_counts(), vec![0]);
}

#[test]
fn fused_matches_naive_for_1000_suprathreshold_steps() {
    let p = hh();
    let mut fused = NeuronState::resting(&p, 1);
    let mut naive = fused.clone();
    let mut spikes = [false];
    let mut fused_count = 0;
    let mut naive_count = 0;
    for _ in 0..1000 {
        hh_step_in_place(&mut fused, &[10.0], &p, &mut spikes).unwrap();
        fused_count += spikes[0] as usize;
        let (next, s) = hh_step_naive(&naive, &[10.0], &p).unwrap();
        naive = next;
        naive_count += s[0] as usize;
        assert!((fused.v[0] - naive.v[0]).abs() <= 1e-12);
    }
    assert_eq!(fused_count, naive_count);
    assert!(fused_count > 0);
}

#[test]
fn simulation_is_deterministic() {
    let m = PointModel::Hh(hh());
    let x: Vec<Vec<f64>> = (0..2000)
        .map(|k| vec![8.0 * (k as f64 * 0.01).sin(), 12.0])
        .collect();
    let a = simulate(&m, &x, &m.resting_state(2)).unwrap();
    let b = simulate(&m, &x, &m.resting_state(2)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn sine_sweep_goes_from_silence_to_periodic_firing() {
    let m = PointModel::Hh(hh());
    let silent = sine_spike_times(&m, 1.0, 10.0, 5.0, 500.0).unwrap();
    let firing = sine_spike_times(&m, 1.0, 50.0, 5.0, 500.0).unwrap();
    assert!(silent.is_empty());
    assert!(firing.len() >= 10);
    assert!(isi_cv(&firing).unwrap() < 0.1);
}

#[test]
fn doubling_time_scale_moves_the_band_down() {
    let m = PointModel::Hh(hh());
    let freqs = [
        5.0, 10.0, 20.0, 35.0, 50.0, 70.0, 100.0, 150.0, 200.0, 300.0,
    ];
    let (lo1, hi1) = firing_band(&m, 1.0, 5.0, &freqs, 500.0).unwrap().unwrap();
    let (lo2, hi2) = firing_band(&m, 2.0, 5.0, &freqs, 500.0).unwrap().unwrap();
    assert!(lo2 < lo1 && hi2 < hi1, "{lo1}-{hi1} vs {lo2}-{hi2}");
}

#[test]
fn lif_prefers_low_frequencies_hh_is_band_pass() {
    let lif = PointModel::Lif(LIFParams {
        tau: 10.0,
        v_theta: 1.0,
        v_reset: 0.0,
        dt: 0.025,
    });
    let grid = [2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0];
    let lif_rates: Vec<f64> = grid
        .iter()
        .map(|&f| sine_response_rate(&lif, f, 3.0, 1000.0).unwrap())
        .collect();
    assert!(lif_rates.windows(2).all(|w| w[1] <= w[0]), "{lif_rates:?}");

    let hh = PointModel::Hh(hh());
    let hh_rates: Vec<f64> = grid
        .iter()
        .map(|&f| sine_response_rate(&hh, f, 5.0, 500.0).unwrap())
        .collect();
    let peak = hh_rates
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap()
        .0;
    assert!(peak > 0 && peak < grid.len() - 1, "{hh_rates:?}");
    assert!(hh_rates[0] < hh_rates[peak] && hh_rates[grid.len() - 1] < hh_rates[peak]);
}

#[test]
fn larger_capacitance_responds_more_to_a_fixed_perturbation() {
    let mut last = 0;
    for c_m in [0.5, 1.0, 2.0] {
        let mut p = hh();
        p.c_m = c_m;
        let (base, pert) = step_perturbation_counts(&p, 3.0 * c_m, 3.0, 200.0, 500.0).unwrap();
        assert_eq!(base, 0);
        let change = pert - base;
        assert!(change >= last, "c_m {c_m}: {change} < {last}");
        last = change;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn gates_stay_in_unit_interval(
        p0 in 0.0f64..=1.0,
        vs in prop::collection::vec(-120.0f64..80.0, 1..60),
        dt in 1e-4f64..1.0,
    ) {
        let params = hh();
        for g in params.gates() {
            let mut p = p0;
            for &v in &vs {
                let (a, b) = g.rates(v);
                p = gate_step(p, a, b, dt);
                prop_assert!((0.0..=1.0).contains(&p));
            }
        }
    }

    #[test]
    fn rates_are_nonnegative_and_finite(v in -120.0f64..80.0) {
        for g in hh().gates() {
            let (a, b) = g.rates(v);
            prop_assert!(a.is_finite() && b.is_finite() && a >= 0.0 && b >= 0.0);
        }
    }

    #[test]
    fn fused_step_equals_naive_reference(
        g_scale in 0.3f64..1.5,
        c_m in 0.5f64..3.0,
        dt_frac in 0.2f64..1.0,
        v0 in prop::collection::vec(-80.0f64..-40.0, 1..6),
        drive in prop::collection::vec(-10.0f64..40.0, 20..120),
    ) {
        // explicit Euler on V is stable for dt / c_m up to ~0.05 ms cm^2/uF
        let p = spiking_params(g_scale, c_m, 0.025 * c_m * dt_frac);
        let mut fused = NeuronState::at_potential(&p, &v0);
        let mut naive = fused.clone();
        let mut spikes = vec![false; v0.len()];
        for (k, &x) in drive.iter().enumerate() {
            let input: Vec<f64> = (0..v0.len()).map(|i| x + i as f64).collect();
            hh_step_in_place(&mut fused, &input, &p, &mut spikes).unwrap();
            let (next, s) = hh_step_naive(&naive, &input, &p).unwrap();
            naive = next;
            prop_assert_eq!(&spikes, &s, "step {}", k);
            for (a, b) in fused.v.iter().zip(&naive.v) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
            for (ga, gb) in fused.gates.iter().flatten().zip(naive.gates.iter().flatten()) {
                prop_assert!((ga - gb).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn capacitance_scales_the_increment(c_m in 0.2f64..5.0, v in -90.0f64..30.0, i in -20.0f64..20.0) {
        let mut p1 = hh();
        p1.c_m = c_m;
        let mut p2 = p1.clone();
        p2.c_m = 2.0 * c_m;
        let s = NeuronState::at_potential(&p1, &[v]);
        let (a, _) = hh_step(&s, &[i], &p1).unwrap();
        let (b, _) = hh_step(&s, &[i], &p2).unwrap();
        let tol = 8.0 * f64::EPSILON * (v.abs() + 1.0);
        prop_assert!(((a.v[0] - v) - 2.0 * (b.v[0] - v)).abs() <= tol);
    }
}
