//! Acceptance gate: one test per criterion. Each test enforces its stated
//! tolerance and runtime budget and prints a single pass line (visible with
//! `cargo test --test acceptance -- --nocapture`).

use std::time::Instant;

use edgeledger::cohort::{analyze_synthetic, expected_status, SynthParams};
use edgeledger::des::{run_queue_sim, Horizon, QueueDiscipline, SimConfig};
use edgeledger::optimizer::{
    bco, closed_form_n, cost, exhaustive_search, latency, order_validators, security, utility,
    ChainParams, MetricWeights, NormalizationBounds, ValidatorProfile,
};
use edgeledger::queueing::{
    assign_priorities, sojourn_equal, sojourn_priority, EntityProfile, QueueSystem, Urgency,
};
use edgeledger::scenario::resolve_scenario;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn pass(name: &str, detail: String) {
    println!("acceptance {name}: PASS ({detail})");
}

#[test]
fn greedy_vs_oracle_on_reference_scenario() {
    let started = Instant::now();
    let scenario = resolve_scenario("paper_default").expect("bundled scenario loads");
    let validators = scenario.validator_profiles();
    let bounds = scenario.normalization_bounds().expect("bounds");

    let greedy = bco(&scenario.chain, &scenario.optimizer, &validators, &bounds).expect("bco");
    let oracle = exhaustive_search(&scenario.chain, &scenario.optimizer, &validators, &bounds)
        .expect("exhaustive");

    let rel = (greedy.config.utility - oracle.config.utility).abs() / oracle.config.utility.abs();
    assert!(
        rel <= 1e-12,
        "greedy utility {} vs oracle {} (relative gap {rel})",
        greedy.config.utility,
        oracle.config.utility
    );
    assert_eq!(oracle.evaluations, 420, "oracle must visit the whole 21 x 20 grid");
    assert!(
        greedy.iterations <= scenario.chain.max_validators,
        "greedy used {} iterations, bound is {}",
        greedy.iterations,
        scenario.chain.max_validators
    );
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}, budget 1 s");
    pass(
        "greedy-vs-oracle",
        format!(
            "both reach (m={}, n={}) with utility {:.12}; 420 oracle evaluations, {} greedy iterations, {elapsed:?}",
            oracle.config.validators, oracle.config.block_txs, oracle.config.utility, greedy.iterations
        ),
    );
}

#[test]
fn stationarity_of_closed_form_block_size() {
    let started = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(0x57A7_1055);
    let mut worst: f64 = 0.0;
    for draw in 0..100 {
        let params = ChainParams {
            transaction_size_bits: rng.random_range(100.0..2000.0),
            verification_workload: rng.random_range(10.0..500.0),
            feedback_size_bits: rng.random_range(1e4..1e6),
            downlink_bps: rng.random_range(1e5..1e7),
            uplink_bps: rng.random_range(1e5..1e7),
            broadcast_coeff: rng.random_range(1e-7..1e-5),
            security_coeff: rng.random_range(0.5..2.0),
            network_scale_exp: rng.random_range(2.0..5.0),
            min_validators: 1,
            max_validators: 32,
            min_block_txs: 1,
            max_block_txs: 1_000_000,
        };
        let m = rng.random_range(1..10usize);
        let validators: Vec<ValidatorProfile> = (0..m)
            .map(|i| {
                ValidatorProfile::new(
                    i as u32 + 1,
                    rng.random_range(20.0..100.0),
                    rng.random_range(0.01..0.1),
                )
            })
            .collect();
        let alpha = rng.random_range(0.1..0.8);
        let gamma = rng.random_range(0.1..(1.0 - alpha) - 0.05);
        let weights = MetricWeights::new(alpha, 1.0 - alpha - gamma, gamma).expect("weights");
        let bounds = NormalizationBounds::new(
            rng.random_range(0.5..20.0),
            rng.random_range(1.0..1e6),
            rng.random_range(0.5..200.0),
        )
        .expect("bounds");

        let solution = closed_form_n(&params, &weights, &bounds, &validators).expect("solution");
        assert!(solution.interior && solution.n > 0.0, "draw {draw} degenerate");

        // the continuous objective, written out by hand so the check stays
        // independent of the implementation it verifies
        let objective = |n: f64| {
            let block_bits = n * params.transaction_size_bits;
            let verify = validators
                .iter()
                .map(|v| params.verification_workload / v.compute)
                .fold(f64::NEG_INFINITY, f64::max);
            let l = block_bits / params.downlink_bps
                + verify
                + params.broadcast_coeff * block_bits * m as f64
                + params.feedback_size_bits / params.uplink_bps;
            let c = validators.iter().map(|v| v.cost).sum::<f64>() / n;
            let s = params.security_coeff * (m as f64).powf(params.network_scale_exp);
            weights.alpha * l / bounds.latency_max
                + weights.beta * bounds.security_max / s
                + weights.gamma * c / bounds.cost_max
        };
        let h = 1e-3 * solution.n;
        let fd = (objective(solution.n + h) - objective(solution.n - h)) / (2.0 * h);
        let f = objective(solution.n);
        let rel = (fd / f).abs();
        worst = worst.max(rel);
        assert!(
            rel < 1e-6,
            "draw {draw}: derivative {fd} not stationary relative to {f} at n = {}",
            solution.n
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}, budget 1 s");
    pass(
        "stationarity",
        format!("100 draws, worst relative derivative {worst:.3e}, {elapsed:?}"),
    );
}

#[test]
fn queue_formulas_match_simulation() {
    let started = Instant::now();
    let mut worst_priority: f64 = 0.0;
    let mut worst_equal: f64 = 0.0;
    for instance in 0..20u64 {
        let mut rng = ChaCha12Rng::seed_from_u64(0xDE5_0000 + instance);
        let n = rng.random_range(2..=10usize);
        let entities: Vec<EntityProfile> = (0..n)
            .map(|i| EntityProfile {
                id: i as u32 + 1,
                arrival_rate: rng.random_range(0.3..1.0),
                urgency: Urgency::Normal,
                weight: 1.0,
            })
            .collect();
        let total: f64 = entities.iter().map(|e| e.arrival_rate).sum();
        let utilization = rng.random_range(0.5..0.75);
        let system = QueueSystem::new(entities, total / utilization).expect("stable system");
        let order = assign_priorities(system.entities()).expect("order");
        let cfg = SimConfig {
            seed: 0xACC0 + instance,
            horizon: Horizon::Events(1_000_000),
            warmup_fraction: 0.1,
        };

        let analytic = sojourn_priority(&system, &order).expect("analytic");
        let simulated =
            run_queue_sim(&system, QueueDiscipline::Priority(&order), &cfg).expect("sim");
        for entry in &analytic.entries {
            let emp = simulated
                .entities
                .iter()
                .find(|e| e.entity_id == entry.entity_id)
                .expect("entity present");
            let rel = (emp.mean - entry.sojourn).abs() / entry.sojourn;
            worst_priority = worst_priority.max(rel);
            assert!(
                rel <= 0.03,
                "instance {instance} entity {}: empirical {} vs analytic {} ({:.2}% off)",
                entry.entity_id,
                emp.mean,
                entry.sojourn,
                rel * 100.0
            );
        }

        let eq_value = sojourn_equal(&system).expect("equal").entries[0].sojourn;
        let fifo = run_queue_sim(&system, QueueDiscipline::Equal, &cfg).expect("sim equal");
        for emp in &fifo.entities {
            let rel = (emp.mean - eq_value).abs() / eq_value;
            worst_equal = worst_equal.max(rel);
            assert!(
                rel <= 0.03,
                "instance {instance} entity {} (equal): empirical {} vs {} ({:.2}% off)",
                emp.entity_id,
                emp.mean,
                eq_value,
                rel * 100.0
            );
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 120.0, "took {elapsed:?}, budget 2 min");
    pass(
        "queue-formula-oracle",
        format!(
            "20 systems x 10^6 served, worst priority error {:.2}%, worst equal error {:.2}%, {elapsed:?}",
            worst_priority * 100.0,
            worst_equal * 100.0
        ),
    );
}

#[test]
fn sojourn_shape_for_grouped_entities() {
    let started = Instant::now();
    let scenario = resolve_scenario("fig4").expect("bundled scenario loads");
    let system = scenario.queue_system(50.0).expect("stable at 50");
    let order = assign_priorities(system.entities()).expect("order");

    let equal = sojourn_equal(&system).expect("equal").entries[0].sojourn;
    assert_eq!(equal, 0.125, "21 entities at 2 tx/s against 50 tx/s");

    let priority = sojourn_priority(&system, &order).expect("priority");
    for entry in &priority.entries[..8] {
        assert!(
            entry.sojourn < equal,
            "urgent entity {} at {} not below the equal value",
            entry.entity_id,
            entry.sojourn
        );
    }
    let last = priority.entries.last().expect("21 entries");
    assert_eq!(last.entity_id, 21);
    assert!(last.sojourn > equal, "lowest rank must be worse off");
    for pair in priority.entries.windows(2) {
        assert!(
            pair[0].sojourn <= pair[1].sojourn,
            "sojourns must be non-decreasing in rank"
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}, budget 1 s");
    pass(
        "sojourn-shape",
        format!(
            "equal 0.125 s; rank-1 {:.6} s; rank-21 {:.6} s; monotone in rank; {elapsed:?}",
            priority.entries[0].sojourn, last.sojourn
        ),
    );
}

#[test]
fn channel_ordering_at_convergence() {
    let started = Instant::now();
    let scenario = resolve_scenario("paper_default").expect("bundled scenario loads");
    let channels = scenario.bound_channels().expect("channels bind");
    assert_eq!(channels.len(), 4);

    let by_id = |id: u32| channels.iter().find(|c| c.id == id).expect("channel");
    let urgent = by_id(1);
    let high_security = by_id(2);
    let fixed = by_id(4);
    assert_eq!(fixed.config.validators, 8);
    assert_eq!(fixed.config.block_txs, 80);

    for c in &channels {
        if c.id != urgent.id {
            assert!(
                urgent.config.latency < c.config.latency,
                "urgent channel latency {} not below channel {}'s {}",
                urgent.config.latency,
                c.id,
                c.config.latency
            );
        }
        assert!(
            high_security.config.security >= c.config.security,
            "high-security channel {} not at the security maximum vs channel {}",
            high_security.config.security,
            c.id
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}, budget 1 s");
    pass(
        "channel-ordering",
        format!(
            "urgent L {:.4} s is the minimum; high-security eta {} is the maximum; {elapsed:?}",
            urgent.config.latency, high_security.config.security
        ),
    );
}

#[test]
fn classifier_on_constructed_cohorts() {
    let started = Instant::now();
    let mut checked = 0u32;
    for seed in 1..=10u64 {
        for k in [0usize, 1, 2, 3, 5] {
            let params = SynthParams {
                patients: 30,
                channels: 14,
                window_len: 256,
                injected_channels: k,
                seed,
                ..SynthParams::default()
            };
            let analysis = analyze_synthetic(&params, 30.0).expect("pipeline");
            assert_eq!(analysis.patients.len(), 30);
            for p in &analysis.patients {
                assert_eq!(
                    p.status,
                    expected_status(k),
                    "seed {seed}, k = {k}, patient {}",
                    p.patient_id
                );
                checked += 1;
            }
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}, budget 10 s");
    pass(
        "classifier-correctness",
        format!("{checked} patient classifications correct across 10 seeds x 5 injection counts, {elapsed:?}"),
    );
}

#[test]
fn metric_monotonicity_and_normalization() {
    let started = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(0x0D0_0111);
    for check in 0..1000 {
        let params = ChainParams {
            transaction_size_bits: rng.random_range(100.0..2000.0),
            verification_workload: rng.random_range(10.0..500.0),
            feedback_size_bits: rng.random_range(1e4..1e6),
            downlink_bps: rng.random_range(1e5..1e7),
            uplink_bps: rng.random_range(1e5..1e7),
            broadcast_coeff: rng.random_range(1e-8..1e-4),
            security_coeff: rng.random_range(0.5..2.0),
            network_scale_exp: rng.random_range(2.0..5.0),
            min_validators: 1,
            max_validators: 16,
            min_block_txs: 1,
            max_block_txs: 200,
        };
        let pool: Vec<ValidatorProfile> = (0..12)
            .map(|i| {
                ValidatorProfile::new(
                    i as u32 + 1,
                    rng.random_range(20.0..100.0),
                    rng.random_range(0.01..0.1),
                )
            })
            .collect();
        let ranked = order_validators(&pool, &params);
        let m = rng.random_range(1..=10usize);
        let n = rng.random_range(1..150u32);

        let l = latency(&params, &ranked[..m], n).expect("latency");
        assert!(latency(&params, &ranked[..m], n + 1).expect("latency") > l, "check {check}: L in n");
        assert!(
            latency(&params, &ranked[..m + 1], n).expect("latency") > l,
            "check {check}: L in m (broadcast coefficient is positive)"
        );

        let c = cost(&ranked[..m], n).expect("cost");
        assert!(cost(&ranked[..m], n + 1).expect("cost") < c, "check {check}: C in n");
        assert!(cost(&ranked[..m + 1], n).expect("cost") >= c, "check {check}: C in m");

        assert!(security(&params, m + 1) > security(&params, m), "check {check}: eta in m");

        let weights = MetricWeights::new(0.4, 0.35, 0.25).expect("weights");
        let bounds = NormalizationBounds::attainable_max(&params, &pool).expect("bounds");
        let u = utility(
            bounds.latency_max,
            bounds.security_max,
            bounds.cost_max,
            &weights,
            &bounds,
        )
        .expect("utility");
        assert!((u - 1.0).abs() <= 1e-12, "check {check}: U at the normalization point is {u}");
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}, budget 5 s");
    pass(
        "metric-monotonicity",
        format!("1000 randomized checks, {elapsed:?}"),
    );
}

#[test]
fn commands_are_byte_deterministic() {
    use std::process::Command;

    let started = Instant::now();
    let bin = env!("CARGO_BIN_EXE_edgeledger");
    let root = tempfile::tempdir().expect("tempdir");

    let run_all = |dir: &std::path::Path| -> Vec<(String, String)> {
        let signals = dir.join("signals.csv");
        let steps: Vec<Vec<String>> = vec![
            vec![
                "synth".into(),
                "--patients".into(),
                "4".into(),
                "--channels".into(),
                "6".into(),
                "--window".into(),
                "64".into(),
                "--injected".into(),
                "1".into(),
                "--seed".into(),
                "5".into(),
                "--out".into(),
                signals.display().to_string(),
            ],
            vec![
                "features".into(),
                signals.display().to_string(),
                "--window".into(),
                "64".into(),
                "--out".into(),
                dir.display().to_string(),
            ],
            vec![
                "monitor".into(),
                signals.display().to_string(),
                "--window".into(),
                "64".into(),
                "--out".into(),
                dir.display().to_string(),
            ],
            vec![
                "queue".into(),
                "paper_default".into(),
                "--out".into(),
                dir.display().to_string(),
            ],
            vec![
                "optimize".into(),
                "paper_default".into(),
                "--out".into(),
                dir.display().to_string(),
            ],
            vec![
                "channels".into(),
                "paper_default".into(),
                "--out".into(),
                dir.display().to_string(),
            ],
            vec![
                "simulate".into(),
                "paper_default".into(),
                "--out".into(),
                dir.display().to_string(),
            ],
        ];
        let mut outputs = Vec::new();
        for args in steps {
            let out = Command::new(bin).args(&args).output().expect("command runs");
            assert!(
                out.status.success(),
                "command {:?} failed: {}",
                args,
                String::from_utf8_lossy(&out.stderr)
            );
            outputs.push((args.join(" "), String::from_utf8_lossy(&out.stdout).into_owned()));
        }
        outputs
    };

    let dir_a = root.path().join("a");
    let dir_b = root.path().join("b");
    std::fs::create_dir_all(&dir_a).expect("mkdir");
    std::fs::create_dir_all(&dir_b).expect("mkdir");
    let stdout_a = run_all(&dir_a);
    let stdout_b = run_all(&dir_b);

    // identical console output modulo the differing output paths
    for ((cmd_a, out_a), (_, out_b)) in stdout_a.iter().zip(stdout_b.iter()) {
        let norm_a = out_a.replace(&dir_a.display().to_string(), "<out>");
        let norm_b = out_b.replace(&dir_b.display().to_string(), "<out>");
        assert_eq!(norm_a, norm_b, "stdout differs for `{cmd_a}`");
    }

    // identical bytes for every produced file
    let mut names: Vec<String> = std::fs::read_dir(&dir_a)
        .expect("readdir")
        .map(|e| e.expect("entry").file_name().into_string().expect("utf8 name"))
        .collect();
    names.sort();
    assert!(
        names.iter().any(|n| n == "entity_sojourn.csv"),
        "simulate outputs present"
    );
    let mut compared = 0;
    for name in names {
        let a = std::fs::read(dir_a.join(&name)).expect("read a");
        let b = std::fs::read(dir_b.join(&name)).expect("read b");
        assert_eq!(a, b, "file {name} differs between identical runs");
        compared += 1;
    }
    let elapsed = started.elapsed();
    pass(
        "determinism",
        format!("{compared} output files byte-identical across two runs of every command, {elapsed:?}"),
    );
}
