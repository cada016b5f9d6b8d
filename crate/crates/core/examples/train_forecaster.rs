//! Trains the masked autoregressive forecaster in both regimes and compares
//! its free-running test risk with a persistence model.

use cts_forge::datagen::{sample_corpus, LatentStateModel};
use cts_forge::forecast::{evaluate, train, ForecastConfig, ForecastModel, Regime, TrainConfig};

fn main() -> cts_forge::Result<()> {
    let model = LatentStateModel::fig1();
    let train_set = sample_corpus(&model, 300, 48, 1)?.series;
    let test_set = sample_corpus(&model, 100, 48, 2)?.series;
    let cfg = ForecastConfig { hidden: 16, ..ForecastConfig::default() };

    let persistence = ForecastModel::persistence(cfg.clone(), model.features.len());
    println!("persistence      test MSE {:.4}", evaluate(&persistence, &test_set)?.mse);
    for regime in [Regime::TeacherForcing, Regime::FreeRunning] {
        let tc = TrainConfig { regime, batch_size: 16, learning_rate: 3e-3, max_epochs: 15, ..TrainConfig::default() };
        let trained = train(&cfg, &train_set, &tc)?;
        let risk = evaluate(&trained.model, &test_set)?;
        println!("{regime:?}: best epoch {} of {}, test MSE {:.4}", trained.best_epoch, trained.history.len(), risk.mse);
        let restored = ForecastModel::from_checkpoint(&trained.model.to_checkpoint()?)?;
        assert_eq!(restored, trained.model);
    }
    Ok(())
}
