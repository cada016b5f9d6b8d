//! Compositional synthesis: first on the four-sentence worked example, then on
//! a generated corpus where every synthetic block is a copy of a real block.

use std::collections::BTreeSet;

use cts_forge::cds::{FragmentLimits, SynthesisIndex, Synthesizer};
use cts_forge::datagen::{sample_corpus, LatentStateModel};
use cts_forge::pipeline::{synthesize, SymbolizerConfig, SynthesisPlan};
use cts_forge::symbolize::SymbolSequence;
use cts_forge::synthetic::Lineage;

fn main() -> cts_forge::Result<()> {
    let names = ["M", "A", "N", "B", "C", "D", "X", "Y"];
    let corpus: Vec<SymbolSequence> = [[0, 1, 2, 3], [0, 4, 2, 5], [6, 1, 7, 3]]
        .iter()
        .enumerate()
        .map(|(i, s)| SymbolSequence {
            stay_id: format!("s{i}"),
            delta: 1,
            symbols: s.to_vec(),
            provenance: (0..4).map(|b| (format!("s{i}"), b)).collect(),
        })
        .collect();
    let index = SynthesisIndex::build(&corpus, 1, FragmentLimits::default())?;
    println!("{} fragments, {} templates, {} environments", index.n_fragments(), index.n_templates(), index.n_environments());
    let distinct: BTreeSet<Vec<u32>> = Synthesizer::new(&index, 0, 50).map(|d| d.symbols).collect();
    for symbols in distinct {
        let text: Vec<&str> = symbols.iter().map(|&s| names[s as usize]).collect();
        println!("  synthesized {}", text.join(" "));
    }

    let series = sample_corpus(&LatentStateModel::fig1(), 400, 48, 7)?.series;
    let plan = SynthesisPlan {
        symbolizer: SymbolizerConfig { k: 80, seed: 1, ..SymbolizerConfig::default() },
        budget_multiplier: 5,
        seed: 1,
        ..SynthesisPlan::default()
    };
    let run = synthesize(&series, None, &plan)?;
    println!("{} series from a corpus of {} (exhausted: {})", run.synthetic.len(), series.len(), run.exhausted);
    if let Lineage::Cds(l) = &run.synthetic[0].lineage {
        println!("first output: template {} with runs {:?} filled from {} runs {:?}", l.template_stay, l.template_runs, l.fragment_stay, l.fragment_runs);
    }
    Ok(())
}
