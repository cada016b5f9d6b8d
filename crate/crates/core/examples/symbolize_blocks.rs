//! Cuts series into 3-hour blocks and maps each block to a symbol, comparing
//! random input-space centroids, k-means centroids and the latent states.

use cts_forge::datagen::{sample_corpus, LatentStateModel};
use cts_forge::symbolize::{adjusted_rand_index, all_blocks, kmeans, random_centroids, symbolize_all};

fn main() -> cts_forge::Result<()> {
    let model = LatentStateModel::fig1();
    let corpus = sample_corpus(&model, 300, 48, 3)?;
    let blocks = all_blocks(&corpus.series, 3)?;
    let truth: Vec<usize> = corpus.latent.iter().flat_map(|p| p.states.iter().map(|&s| s as usize)).collect();

    let points: Vec<Vec<f64>> = blocks.iter().map(|b| b.flatten()).collect();
    let fit = kmeans(&points, 4, 1, 100, 1e-6)?;
    println!("k-means k=4: {} iterations, ARI vs latent states {:.4}", fit.iterations, adjusted_rand_index(&fit.assignments, &truth)?);

    for k in [4, 40, 160] {
        let space = random_centroids(&blocks, k, 1)?;
        let sequences = symbolize_all(&corpus.series, 3, &space, None)?;
        let learned: Vec<usize> = sequences.iter().flat_map(|s| s.symbols.iter().map(|&x| x as usize)).collect();
        let used: std::collections::BTreeSet<_> = learned.iter().collect();
        println!("random centroids k={k:3}: {} symbols used, ARI {:.4}", used.len(), adjusted_rand_index(&learned, &truth)?);
        if k == 40 {
            println!("  {} -> {:?}", sequences[0].stay_id, sequences[0].symbols);
        }
    }
    Ok(())
}
