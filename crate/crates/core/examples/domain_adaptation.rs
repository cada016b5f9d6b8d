//! Runs both domain-adaptation tests on a generated corpus and compares the
//! compositional engine with the CutMix control.
//!
//! ```text
//! cargo run --release --example domain_adaptation -- [n_train] [k]
//! ```

use cts_forge::datagen::{sample_corpus, LatentStateModel};
use cts_forge::eval::{
    discriminative_score, ngram_profile, select_h_star, test1, test2, DiscriminativeConfig, SyntheticSet,
};
use cts_forge::forecast::{train, ForecastConfig, Regime, TrainConfig};
use cts_forge::pipeline::{cutmix_corpus, fit_space, synthesize_in_space, SymbolizerConfig, SynthesisPlan};
use cts_forge::symbolize::symbolize_all;
use cts_forge::synthetic::plain_series;

fn main() -> cts_forge::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let n_train: usize = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(2000);
    let k: usize = args.get(2).and_then(|a| a.parse().ok()).unwrap_or(160);
    let model = LatentStateModel::fig1();
    let train_set = sample_corpus(&model, n_train, 48, 7)?.series;
    let test_set = sample_corpus(&model, n_train / 4, 48, 8)?.series;
    let fc = ForecastConfig { hidden: 16, ..ForecastConfig::default() };
    let tc = TrainConfig { regime: Regime::FreeRunning, batch_size: 16, learning_rate: 3e-3, ..TrainConfig::default() };
    let seeds = [1, 2, 3];

    let mut cds_sets = Vec::new();
    let mut cds_test = Vec::new();
    let mut profile_input = None;
    for &s in &seeds {
        let plan = SynthesisPlan {
            symbolizer: SymbolizerConfig { k, seed: s, ..SymbolizerConfig::default() },
            seed: s,
            ..SynthesisPlan::default()
        };
        let space = fit_space(&train_set, &plan.symbolizer, None)?;
        let run = synthesize_in_space(&train_set, &space, None, &plan)?;
        println!("cds seed {s}: {} series (exhausted: {})", run.synthetic.len(), run.exhausted);
        let on_test = synthesize_in_space(&test_set, &space, None, &plan)?;
        if s == seeds[0] {
            let te = symbolize_all(&test_set, 3, &space, None)?;
            let syn = symbolize_all(&plain_series(&run.synthetic), 3, &space, None)?;
            profile_input = Some((run.sequences.clone(), te, syn));
            cds_test = plain_series(&on_test.synthetic);
        }
        cds_sets.push(SyntheticSet { seed: s, series: plain_series(&run.synthetic) });
    }
    let cutmix_sets: Vec<SyntheticSet> = seeds
        .iter()
        .map(|&s| Ok(SyntheticSet { seed: s, series: cutmix_corpus(&train_set, 3, 1, s)? }))
        .collect::<cts_forge::Result<_>>()?;
    let control = [SyntheticSet { seed: 0, series: train_set.clone() }];

    let t = std::time::Instant::now();
    let r_cds = test1(&train_set, &cds_sets, &test_set, &seeds, &fc, &tc)?;
    let r_cm = test1(&train_set, &cutmix_sets, &test_set, &seeds, &fc, &tc)?;
    let r_ctl = test1(&train_set, &control, &test_set, &seeds, &fc, &tc)?;
    println!("test 1 ({:.0?})", t.elapsed());
    for (name, r) in [("cds", &r_cds), ("cutmix", &r_cm), ("control", &r_ctl)] {
        println!("  {name:8} eps = {:+.4} (se {:.4})", r.epsilon_hat, r.se);
    }

    let models: Vec<_> = seeds
        .iter()
        .map(|&s| train(&fc, &train_set, &TrainConfig { seed: s, ..tc.clone() }).map(|t| t.model))
        .collect::<cts_forge::Result<_>>()?;
    let (best, _) = select_h_star(&models, &test_set)?;
    let h = &models[best];
    let cm_test = cutmix_corpus(&test_set, 3, 1, 99)?;
    for (name, syn) in [("cds", &cds_test), ("cutmix", &cm_test), ("identical", &test_set)] {
        let r = test2(h, &format!("seed-{}", seeds[best]), &test_set, syn)?;
        println!("test 2 {name:9} ratio = {:.4}", r.ratio);
    }

    let (tr, te, syn) = profile_input.expect("first seed ran");
    for row in ngram_profile(&tr, &te, &syn, &[1, 2, 3])? {
        println!(
            "hellinger n={} Tr-Te {:.4}  S-Te {:.4}  S-Tr {:.4}",
            row.order, row.train_test, row.synthetic_test, row.synthetic_train
        );
    }

    let dc = DiscriminativeConfig::default();
    let fresh = sample_corpus(&model, n_train, 48, 9)?.series;
    println!("discriminative resample {:.4}", discriminative_score(&train_set, &fresh, &dc)?.mean);
    println!("discriminative cds      {:.4}", discriminative_score(&train_set, &cds_sets[0].series, &dc)?.mean);
    println!("discriminative cutmix   {:.4}", discriminative_score(&train_set, &cutmix_sets[0].series, &dc)?.mean);
    Ok(())
}
