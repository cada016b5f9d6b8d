//! Samples a corpus from the four-state latent model and compares empirical
//! state transitions with the generating matrix.

use cts_forge::datagen::{oracle_symbolize, sample_corpus, transition_frequencies, LatentStateModel};

fn main() -> cts_forge::Result<()> {
    let model = LatentStateModel::fig1();
    let corpus = sample_corpus(&model, 500, 48, 7)?;
    println!("{} stays x {} hours x {} features, model {}", corpus.series.len(), corpus.series[0].len(), model.features.len(), &corpus.model_hash[..12]);

    let first = &oracle_symbolize(&corpus, model.block_len)[0];
    let names: Vec<&str> = first.symbols.iter().map(|&s| model.states[s as usize].as_str()).collect();
    println!("{}: {}", first.stay_id, names.join(" "));

    let freq = transition_frequencies(&corpus.latent, model.n_states());
    println!("{:>16} {:>28}", "state", "empirical vs true self-transition");
    for (i, name) in model.states.iter().enumerate() {
        println!("{name:>16} {:>14.3} {:>13.3}", freq[i][i], model.transition[i][i]);
    }
    Ok(())
}
