use haarsep::haar::build_oracle_family;
use haarsep::harness::{run_experiment, ExperimentConfig};
use haarsep::qds::{correctness_audit, SchemeRegistry};

fn win_rate(experiment: &str, scheme: &str, adversary: &str, t: Option<usize>, trials: usize) -> f64 {
    let cfg = ExperimentConfig {
        experiment: experiment.into(),
        scheme: scheme.into(),
        adversary: adversary.into(),
        lambda: 4,
        t,
        trials,
        seed: 77,
        ..Default::default()
    };
    let report = run_experiment(&cfg).unwrap();
    let rate = report.aggregate("win-rate").next().unwrap();
    assert!(rate.ci_low <= rate.y && rate.y <= rate.ci_high);
    rate.y
}

#[test]
fn reference_schemes_are_correct_at_lambda_four() {
    for id in ["lamport-prs", "toy-weak"] {
        let scheme = SchemeRegistry::default().build(id, 4).unwrap();
        let family = build_oracle_family(scheme.oracle_levels(), 4).unwrap();
        let report = correctness_audit(scheme.as_ref(), &family, 16, 4).unwrap();
        assert!(report.pass && report.min_acceptance >= 0.99, "{id}: {}", report.min_acceptance);
    }
}

#[test]
fn random_signatures_fail_against_lamport() {
    let w = win_rate("game-baseline", "lamport-prs", "random-signature", None, 200);
    assert!(w <= 0.05, "{w}");
}

#[test]
fn leaked_key_signs_successfully() {
    let w = win_rate("game-baseline", "lamport-prs", "leaked-key", None, 200);
    assert!(w >= 0.95, "{w}");
}

#[test]
fn single_query_attack_fails_against_lamport() {
    let w = win_rate("attack", "lamport-prs", "", Some(1), 200);
    assert!(w <= 0.1, "{w}");
}
