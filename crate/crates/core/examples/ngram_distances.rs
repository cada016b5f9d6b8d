//! Hellinger distances between symbol n-gram distributions of train, test and
//! synthetic corpora.

use cts_forge::datagen::{sample_corpus, LatentStateModel};
use cts_forge::eval::ngram_profile;
use cts_forge::pipeline::{synthesize, SymbolizerConfig, SynthesisPlan};
use cts_forge::symbolize::symbolize_all;
use cts_forge::synthetic::plain_series;

fn main() -> cts_forge::Result<()> {
    let model = LatentStateModel::fig1();
    let train_set = sample_corpus(&model, 500, 48, 1)?.series;
    let test_set = sample_corpus(&model, 200, 48, 2)?.series;
    let plan = SynthesisPlan {
        symbolizer: SymbolizerConfig { k: 40, ..SymbolizerConfig::default() },
        ..SynthesisPlan::default()
    };
    let run = synthesize(&train_set, None, &plan)?;
    let te = symbolize_all(&test_set, 3, &run.space, None)?;
    let sy = symbolize_all(&plain_series(&run.synthetic), 3, &run.space, None)?;
    println!("order  H(Tr,Te)  H(S,Te)  H(S,Tr)");
    for row in ngram_profile(&run.sequences, &te, &sy, &[1, 2, 3])? {
        println!("{:5}  {:8.4}  {:7.4}  {:7.4}", row.order, row.train_test, row.synthetic_test, row.synthetic_train);
    }
    Ok(())
}
