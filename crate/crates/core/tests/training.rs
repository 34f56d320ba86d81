use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use scoreflow::data_io::{gen_conditional_gmm2d, DatasetKind, Pair, PairedDataset};
use scoreflow::schedules::VeSchedule;
use scoreflow::scores::{MlpDenoiser, Parameterization, ScoreField, VeNetworkScore};
use scoreflow::training::{dataset_loss, train, Objective, TrainConfig};

fn standard_normal_dataset(n: usize, seed: u64) -> PairedDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PairedDataset {
        kind: DatasetKind::Gmm2d,
        side: None,
        seed: None,
        pairs: (0..n)
            .map(|_| Pair {
                target: vec![rng.sample(StandardNormal), rng.sample(StandardNormal)],
                cond: Vec::new(),
            })
            .collect(),
    }
}

fn quick_config(epochs: usize) -> TrainConfig {
    TrainConfig {
        learning_rate: 1e-3,
        batch_size: 64,
        min_epochs: epochs,
        max_epochs: epochs,
        seed: 4,
        ..TrainConfig::default()
    }
}

#[test]
fn learned_score_near_t_max_matches_the_perturbed_gaussian() {
    let ve = VeSchedule::default();
    let data = standard_normal_dataset(4000, 1);
    let mut model =
        MlpDenoiser::new(2, 0, 16, &[64, 64], Parameterization::ScaledScore(ve), 7).unwrap();
    let objective = Objective::for_model(&model);
    train(&mut model, &objective, &data, &quick_config(60), |_, _| {}).unwrap();
    let score = VeNetworkScore::new(&model).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for t in [0.9, 0.95, 1.0] {
        let var = 1.0 + ve.sigma(t).unwrap().powi(2);
        // Relative error aggregated over the disk |x| <= 2: pointwise
        // ratios are meaningless where the exact score vanishes.
        let (mut err2, mut norm2) = (0.0, 0.0);
        for _ in 0..400 {
            let r = 2.0 * rng.gen::<f64>().sqrt();
            let a = rng.gen_range(0.0..std::f64::consts::TAU);
            let x = [r * a.cos(), r * a.sin()];
            let s = score.score(&x, None, t);
            err2 += (s[0] + x[0] / var).powi(2) + (s[1] + x[1] / var).powi(2);
            norm2 += (r / var).powi(2);
        }
        let rel = (err2 / norm2).sqrt();
        assert!(rel <= 0.15, "t={t}: relative error {rel}");
    }
}

#[test]
fn gmm_dsm_loss_halves_the_zero_predictor() {
    let ve = VeSchedule::default();
    let data = gen_conditional_gmm2d(4000, 2).unwrap();
    let mut zero = MlpDenoiser::new(2, 2, 16, &[64, 64], Parameterization::ScaledScore(ve), 5)
        .unwrap()
        .with_preconditioning(false);
    zero.mlp_mut()
        .params_mut()
        .iter_mut()
        .for_each(|p| *p = 0.0);
    let objective = Objective::DsmVe(ve);
    let zero_loss = dataset_loss(&zero, &objective, &data, 11).unwrap();
    assert!((zero_loss - 2.0).abs() < 0.1, "{zero_loss}");

    let mut model =
        MlpDenoiser::new(2, 2, 16, &[64, 64], Parameterization::ScaledScore(ve), 5).unwrap();
    let initial = dataset_loss(&model, &objective, &data, 11).unwrap();
    let curve = train(&mut model, &objective, &data, &quick_config(150), |_, _| {}).unwrap();
    let trained = dataset_loss(&model, &objective, &data, 11).unwrap();
    assert!(
        trained <= 0.5 * zero_loss,
        "{trained} vs zero predictor {zero_loss}"
    );
    assert!(trained <= initial, "{trained} vs initial {initial}");
    assert_eq!(curve.epochs(), 150);
}

#[test]
fn training_runs_are_reproducible() {
    let data = gen_conditional_gmm2d(256, 3).unwrap();
    let run = || {
        let ve = VeSchedule::default();
        let mut model =
            MlpDenoiser::new(2, 2, 8, &[16], Parameterization::ScaledScore(ve), 1).unwrap();
        let objective = Objective::for_model(&model);
        let curve = train(&mut model, &objective, &data, &quick_config(5), |_, _| {}).unwrap();
        (curve.losses, model.mlp().params().to_vec())
    };
    assert_eq!(run(), run());
}
