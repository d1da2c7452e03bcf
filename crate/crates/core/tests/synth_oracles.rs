use atoms_lab::models::linear::LinearModel;
use atoms_lab::models::{FittedModel, Predictor, Specification};
use atoms_lab::synth::{self, zigzag_coefficient, DriftEnv, EnvKind};

fn constant_zero() -> FittedModel {
    FittedModel::standalone(
        Specification::Ridge { alpha: 1.0 },
        Predictor::Linear(LinearModel {
            coefficients: vec![0.0, 0.0],
        }),
        0,
    )
}

#[test]
fn zigzag_matches_recurrence() {
    for eta in [0.1, 0.05, 0.3, 1.0, 0.07] {
        let (mut c, mut step) = (0.0f64, eta);
        for t in 1..=200 {
            assert!((zigzag_coefficient(eta, t) - c).abs() < 1e-9, "eta {eta} t {t}");
            if c + step > 1.0 + 1e-9 || c + step < -1e-9 {
                step = -step;
            }
            c += step;
        }
    }
    let path: Vec<f64> = (1..=25).map(|t| zigzag_coefficient(0.1, t)).collect();
    assert!((path[10] - 1.0).abs() < 1e-12 && (path[11] - 0.9).abs() < 1e-12 && (path[20] - 0.0).abs() < 1e-12);
    for w in path.windows(2) {
        assert!(((w[1] - w[0]).abs() - 0.1).abs() < 1e-12);
    }
}

#[test]
fn zero_drift_is_constant() {
    let env = DriftEnv::zigzag(0.0, 0.3, 1.0, 1, 0);
    assert!((1..50).all(|t| env.coefficients(t) == vec![0.0]));
    assert!(DriftEnv::zigzag(1.5, 0.0, 1.0, 1, 0).validate().is_err());
}

#[test]
fn noiseless_linear_data() {
    let env = DriftEnv::zigzag(0.1, 0.0, 0.0, 7, 4);
    let p = synth::generate(&env, 12).unwrap();
    for t in 1..=12 {
        let c = zigzag_coefficient(0.1, t);
        for o in &p.period(t).observations {
            assert_eq!(o.y, c * o.x[0]);
            assert!((0.0..1.0).contains(&o.x[0]));
        }
    }
}

#[test]
fn generation_is_pure_and_seeded() {
    let env = DriftEnv::zigzag(0.05, 0.3, 1.0, 5, 11);
    assert_eq!(synth::generate(&env, 30).unwrap(), synth::generate(&env, 30).unwrap());
    let other = DriftEnv { seed: 12, ..env.clone() };
    assert_ne!(synth::generate(&env, 30).unwrap(), synth::generate(&other, 30).unwrap());
    // prefixes agree
    let long = synth::generate(&env, 30).unwrap();
    let short = synth::generate(&env, 10).unwrap();
    assert_eq!(&long.periods()[..10], short.periods());
}

#[test]
fn risk_of_the_regression_function() {
    let mc = 20_000;
    let env = DriftEnv::zigzag(0.05, 0.3, 1.0, 1, 0);
    let r = synth::risk_with(&env, 17, mc, 3, true, |x| env.optimal_predictor(17, x)).unwrap();
    assert!((r - 1.0).abs() <= 3.0 * (2.0 / mc as f64).sqrt(), "{r}");
    let quiet = DriftEnv { noise_sd: 0.0, ..env.clone() };
    assert_eq!(synth::risk_with(&quiet, 17, mc, 3, true, |x| quiet.optimal_predictor(17, x)).unwrap(), 0.0);
}

#[test]
fn risk_of_zero_forecast_is_second_moment() {
    // c_t = 1, γ = 0, no noise: E[x²] = 1/3
    let env = DriftEnv {
        kind: EnvKind::PiecewiseRegime {
            change_points: vec![],
            coefficients: vec![vec![1.0]],
        },
        eta: 0.0,
        gamma: 0.0,
        noise_sd: 0.0,
        samples_per_period: 1,
        seed: 0,
    };
    let mc = 50_000;
    let r = synth::true_risk(&env, 1, &constant_zero(), mc, 8).unwrap();
    // Var(x²) = 1/5 − 1/9
    let sd = ((0.2 - 1.0 / 9.0) / mc as f64).sqrt();
    assert!((r - 1.0 / 3.0).abs() <= 4.0 * sd, "{r}");
    let e = synth::excess_risk(&env, 1, &constant_zero(), mc, 8).unwrap();
    assert!((e - 1.0 / 3.0).abs() <= 4.0 * sd, "{e}");
}

#[test]
fn piecewise_regimes_switch_at_change_points() {
    let env = DriftEnv {
        kind: EnvKind::PiecewiseRegime {
            change_points: vec![5, 9],
            coefficients: vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![-1.0, -1.0]],
        },
        eta: 0.0,
        gamma: 0.0,
        noise_sd: 0.0,
        samples_per_period: 3,
        seed: 1,
    };
    assert_eq!(env.dim(), 2);
    assert_eq!(env.coefficients(4), vec![1.0, 0.0]);
    assert_eq!(env.coefficients(5), vec![0.0, 2.0]);
    assert_eq!(env.coefficients(9), vec![-1.0, -1.0]);
    let p = synth::generate(&env, 10).unwrap();
    for o in &p.period(6).observations {
        assert_eq!(o.y, 2.0 * o.x[1]);
    }
    let bad = DriftEnv {
        kind: EnvKind::PiecewiseRegime {
            change_points: vec![5, 5],
            coefficients: vec![vec![1.0]; 3],
        },
        ..env
    };
    assert!(bad.validate().is_err());
}

#[test]
fn env_json_round_trip() {
    let env = DriftEnv::zigzag(0.05, 0.3, 1.0, 20, 9);
    let text = serde_json::to_string(&env).unwrap();
    assert!(text.contains("\"kind\":\"zigzag_linear_sine\""));
    assert_eq!(serde_json::from_str::<DriftEnv>(&text).unwrap(), env);
    let minimal: DriftEnv = serde_json::from_str(r#"{"kind":"stationary","gamma":0.2}"#).unwrap();
    assert_eq!((minimal.noise_sd, minimal.samples_per_period), (1.0, 1));
}
