use std::collections::BTreeSet;

use haarsep::attack::{
    build_consistent, friends_and_accept, honest_agreement, AcceptanceSource, CompiledTables, SyntheticTables,
    Thresholds,
};
use haarsep::haar::build_oracle_family;
use haarsep::harness::{plot_table, run_experiment, ExperimentConfig, TrialResult};
use haarsep::qds::{ver_pkgen_probability, Bits, SchemeRegistry};
use haarsep::seeds;
use haarsep::simhaar::{substitute_keys, SimHaarParams};
use proptest::prelude::*;
use rand::seq::index::sample;

#[test]
fn consistent_matches_direct_evaluation() {
    let scheme = SchemeRegistry::default().build("toy-weak", 3).unwrap();
    let family = build_oracle_family(scheme.oracle_levels(), 13).unwrap();
    let mut rng = seeds::rng(13);
    let sk = scheme.keygen(&mut rng);
    let transcript: Vec<(u64, Bits)> = (0..6u64)
        .map(|m| {
            let mb = Bits::new(m, scheme.message_bits()).unwrap();
            (m, scheme.sign(sk, mb, &family, &mut rng).unwrap())
        })
        .collect();
    let level = scheme.oracle_levels();
    let keys: BTreeSet<(usize, u64)> = (0..1u64 << level).map(|k| (level, k)).collect();
    let params = SimHaarParams::new(3.0, 0.01).unwrap();
    let mut session = family.session();
    let (a, _) = substitute_keys(&keys, scheme.space(), scheme.verpkgen_queries(), &params, &mut session, 1).unwrap();
    let (b, _) = substitute_keys(&keys, scheme.space(), scheme.verpkgen_queries(), &params, &mut session, 2).unwrap();
    let tables = CompiledTables::new(scheme.as_ref(), a.clone(), b);
    let (consistent, _) = build_consistent(&tables, &transcript, &Thresholds::default()).unwrap();

    // Evaluate each verifier against the substituted oracle directly.
    let mut brute = Vec::new();
    for k in 0..1u64 << scheme.key_bits() {
        let kb = Bits::new(k, scheme.key_bits()).unwrap();
        let ok = transcript.iter().all(|&(m, sig)| {
            let mb = Bits::new(m, scheme.message_bits()).unwrap();
            ver_pkgen_probability(scheme.as_ref(), kb, mb, sig, &a).unwrap() >= 0.9
        });
        if ok {
            brute.push(k);
        }
    }
    assert_eq!(consistent, brute);
    assert!(consistent.contains(&sk.value()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn relations_match_enumeration(seed in any::<u64>()) {
        let mut rng = seeds::rng(seed);
        let tables = SyntheticTables::random(12, 16, None, &mut rng).unwrap();
        let set: Vec<u64> = sample(&mut rng, 12, 6).into_iter().map(|i| i as u64).collect();
        let th = Thresholds::default();
        let rel = friends_and_accept(&tables, &set, &th).unwrap();
        for (i, &a) in set.iter().enumerate() {
            let mut friends = Vec::new();
            let mut accept = Vec::new();
            for &b in &set {
                if a == b {
                    continue;
                }
                let f = (0..16).filter(|&m| tables.ver_pkgen_sign(a, m, b).unwrap() > 0.1).count();
                let g = (0..16).filter(|&m| tables.ver_pkgen_sign(b, m, a).unwrap() >= 0.1).count();
                if f as f64 >= 1.6 {
                    friends.push(b);
                }
                if g as f64 >= 1.6 {
                    accept.push(b);
                }
            }
            prop_assert_eq!(&rel.friends[i], &friends);
            prop_assert_eq!(&rel.accept[i], &accept);
        }
    }
}

#[test]
fn honest_key_reaches_the_candidates() {
    let cfg = ExperimentConfig { experiment: "attack".into(), lambda: 3, trials: 100, seed: 17, ..Default::default() };
    let report = run_experiment(&cfg).unwrap();
    let hit = report.aggregate("candidate-hit-rate").next().unwrap();
    assert!(hit.y >= 0.9, "{}", hit.y);
}

#[test]
fn lambda_sweep_gives_one_row_per_lambda() {
    let cfg = ExperimentConfig {
        experiment: "attack".into(),
        lambdas: vec![3, 4, 5],
        trials: 5,
        seed: 18,
        ..Default::default()
    };
    let report = run_experiment(&cfg).unwrap();
    let table = plot_table(&report, "win-rate").unwrap();
    let rows: Vec<Vec<f64>> =
        table.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 3);
    for (row, lambda) in rows.iter().zip([3.0, 4.0, 5.0]) {
        assert_eq!(row[0], lambda);
        assert!((0.0..=1.0).contains(&row[1]) && row[2] <= row[1] && row[1] <= row[3]);
    }
}

#[test]
fn consistent_keys_agree_with_the_honest_key() {
    let cfg = ExperimentConfig { experiment: "attack".into(), lambda: 4, trials: 100, seed: 19, ..Default::default() };
    let report = run_experiment(&cfg).unwrap();
    let scheme = SchemeRegistry::default().build("toy-weak", 4).unwrap();
    let mut bad_trials = 0;
    for t in &report.trials {
        let TrialResult::Game(g) = &t.result else { panic!("game trial expected") };
        let family = build_oracle_family(scheme.oracle_levels(), g.oracle_seed).unwrap();
        let consistent = &g.attack.as_ref().unwrap().trajectory.consistent;
        let bad = consistent.iter().any(|&k| {
            let kb = Bits::new(k, scheme.key_bits()).unwrap();
            honest_agreement(scheme.as_ref(), &family, g.secret_key, kb).unwrap() < 0.25
        });
        bad_trials += bad as usize;
    }
    assert!(bad_trials <= 5, "{bad_trials}");
}
