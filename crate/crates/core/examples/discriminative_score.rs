//! Post-hoc discriminative score: how well a logistic classifier separates a
//! corpus from a resample, a compositional synthesis and a CutMix corpus.

use cts_forge::datagen::{sample_corpus, LatentStateModel};
use cts_forge::eval::{discriminative_score, DiscriminativeConfig};
use cts_forge::pipeline::{cutmix_corpus, synthesize, SymbolizerConfig, SynthesisPlan};
use cts_forge::synthetic::plain_series;

fn main() -> cts_forge::Result<()> {
    let model = LatentStateModel::fig1();
    let original = sample_corpus(&model, 600, 48, 1)?.series;
    let resample = sample_corpus(&model, 600, 48, 2)?.series;
    let plan = SynthesisPlan { symbolizer: SymbolizerConfig { k: 80, ..SymbolizerConfig::default() }, ..SynthesisPlan::default() };
    let cds = plain_series(&synthesize(&original, None, &plan)?.synthetic);
    let cutmix = cutmix_corpus(&original, 3, 1, 0)?;
    let cfg = DiscriminativeConfig { runs: 5, ..DiscriminativeConfig::default() };
    for (name, other) in [("resample", &resample), ("cds", &cds), ("cutmix", &cutmix)] {
        let s = discriminative_score(&original, other, &cfg)?;
        println!("{name:8} {:.4} (sd {:.4})", s.mean, s.sd);
    }
    Ok(())
}
