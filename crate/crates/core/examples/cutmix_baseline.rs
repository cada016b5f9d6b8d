//! CutMix baseline: a window of one stay pasted into another at the same hours.

use cts_forge::augment::{cutmix_dataset, CutMixConfig};
use cts_forge::datagen::{sample_corpus, LatentStateModel};
use cts_forge::synthetic::Lineage;

fn main() -> cts_forge::Result<()> {
    let corpus = sample_corpus(&LatentStateModel::fig1(), 100, 48, 7)?.series;
    let cfg = CutMixConfig { budget: 5, seed: 3, ..CutMixConfig::default() };
    for s in cutmix_dataset(&corpus, &cfg)? {
        if let Lineage::Cutmix { a, b, u, window_len } = s.lineage {
            println!("{a} with hours {u}..{} taken from {b}", u + window_len);
        }
    }
    Ok(())
}
