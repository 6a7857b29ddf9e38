mod common;

use abstain::data::{bayes_risk_mc, generate_synthetic, sample_mixture, true_eta, Dataset, SyntheticSpec};
use abstain::experiment::{evaluate, evaluate_with};
use abstain::links::bayes_pair;
use abstain::losses::{MarginLoss, ProbVector, RejectionCost};
use abstain::model::{checkpoint, loss_and_grad, train, Method, Mlp, TrainConfig};

fn cost(c: f64) -> RejectionCost {
    RejectionCost::new(c).unwrap()
}

#[test]
fn analytic_gradients_match_differences() {
    for method in common::six_methods() {
        for seed in 0..5 {
            let err = common::gradient_error(&method, cost(0.2), seed, 1e-5);
            assert!(err <= 1e-4, "{method} seed {seed}: {err}");
        }
    }
}

#[test]
fn rejector_network_receives_gradient() {
    for method in common::six_methods().into_iter().filter(Method::has_rejector_net) {
        let (data, cls, rej) = common::random_instance(&method, 11);
        let batch: Vec<usize> = (0..data.len()).collect();
        let (_, g) = loss_and_grad(&method, cost(0.2), &cls, rej.as_ref(), &data, &batch).unwrap();
        assert!(g.rejector.unwrap().iter().any(|v| v.abs() > 1e-8), "{method}");
    }
}

fn two_blobs(n: usize) -> Dataset {
    let spec = SyntheticSpec::new(
        vec![vec![-4.0, 0.0], vec![4.0, 0.0]],
        0.2,
        ProbVector::uniform(2),
    )
    .unwrap();
    generate_synthetic(&spec, n, 3).unwrap()
}

#[test]
fn separable_data_is_fit_exactly() {
    let data = two_blobs(2000);
    let mut cfg = TrainConfig::new(Method::Ce, cost(0.2));
    cfg.seed = 1;
    let model = train(&cfg, &data).unwrap().model;
    let errors = data
        .rows()
        .filter(|(x, y)| model.decide(x, cost(0.2)).unwrap().0 != *y)
        .count();
    assert_eq!(errors, 0);
}

#[test]
fn full_batch_loss_mostly_decreases() {
    let spec = SyntheticSpec::random(4, 5).unwrap();
    let data = generate_synthetic(&spec, 100, 6).unwrap();
    for method in common::six_methods() {
        let mut cfg = TrainConfig::new(method, cost(0.2));
        cfg.epochs = 200;
        let trace = train(&cfg, &data).unwrap().trace;
        let down = trace.windows(2).filter(|w| w[1] <= w[0]).count();
        assert!(down as f64 >= 0.9 * (trace.len() - 1) as f64, "{method}: {down}/{}", trace.len() - 1);
    }
}

#[test]
fn training_is_reproducible_and_checkpoints_round_trip() {
    let data = two_blobs(50);
    let method = common::six_methods()[5];
    let mut cfg = TrainConfig::new(method, cost(0.3));
    cfg.epochs = 10;
    let a = train(&cfg, &data).unwrap();
    assert_eq!(a, train(&cfg, &data).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.txt");
    checkpoint::save(&path, &a.model, Some(cost(0.3))).unwrap();
    let (back, c) = checkpoint::load(&path).unwrap();
    assert_eq!((back, c), (a.model, Some(cost(0.3))));
}

#[test]
fn oracle_substitution_attains_the_bayes_risk() {
    let spec = SyntheticSpec::random(8, 0).unwrap();
    let test = sample_mixture(&spec, 200_000, 17).unwrap();
    for c in [0.05, 0.2, 0.4].map(cost) {
        let m = evaluate_with(&test, c, Some(&spec), |x| Ok(bayes_pair(&true_eta(&spec, x)?, c))).unwrap();
        let (bayes, se_mc) = bayes_risk_mc(&spec, c, 1_000_000, 23).unwrap();
        // the realized loss lies in [0, 1], so its sd is at most 1/2
        let se_test = 0.5 / (test.len() as f64).sqrt();
        let se = (se_mc * se_mc + se_test * se_test).sqrt();
        assert!((m.zoc_risk - bayes).abs() <= 2.0 * se, "c={}: {} vs {bayes} ± {se}", c.value(), m.zoc_risk);
        assert_eq!((m.fr_rate, m.fa_rate), (Some(0.0), Some(0.0)));
    }
}

#[test]
fn evaluation_rejects_mismatched_dimensions() {
    let data = two_blobs(5);
    let net = Mlp::zeros(3, 2, 2);
    let model = abstain::model::TrainedModel::new(Method::Ce, net, None).unwrap();
    assert!(evaluate(&model, &data, cost(0.1), None).is_err());
}

#[test]
fn hinge_margin_is_accepted_by_every_surrogate_form() {
    // the pairwise losses take any margin loss, including the non-smooth ones
    let method = Method::Apc {
        phi: MarginLoss::Hinge,
        psi: MarginLoss::SquaredHinge,
        alpha: 1.0,
        beta: 2.0,
    };
    let mut cfg = TrainConfig::new(method, cost(0.2));
    cfg.epochs = 5;
    assert!(train(&cfg, &two_blobs(20)).is_ok());
}
