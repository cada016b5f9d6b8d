//! Projects original and CutMix series onto two principal components and
//! prints per-label centroids; the full table goes to `pca.csv` in a temp dir.

use cts_forge::datagen::{sample_corpus, LatentStateModel};
use cts_forge::eval::{pca_export, write_pca_csv, PcaParts};
use cts_forge::pipeline::cutmix_corpus;

fn main() -> cts_forge::Result<()> {
    let original = sample_corpus(&LatentStateModel::fig1(), 200, 48, 1)?.series;
    let synthetic = cutmix_corpus(&original, 3, 1, 2)?;
    let labelled: Vec<_> = original
        .into_iter()
        .map(|s| (s, "original".to_string()))
        .chain(synthetic.into_iter().map(|s| (s, "cutmix".to_string())))
        .collect();
    let (pca, rows) = pca_export(&labelled, PcaParts::default())?;
    println!("eigenvalues {:.3} {:.3}", pca.eigenvalues[0], pca.eigenvalues[1]);
    for label in ["original", "cutmix"] {
        let pts: Vec<_> = rows.iter().filter(|r| r.label == label).collect();
        let n = pts.len() as f64;
        let (c1, c2) = pts.iter().fold((0.0, 0.0), |acc, r| (acc.0 + r.pc1 / n, acc.1 + r.pc2 / n));
        println!("{label:8} centroid ({c1:+.3}, {c2:+.3}) over {} series", pts.len());
    }
    let path = std::env::temp_dir().join("pca.csv");
    write_pca_csv(std::fs::File::create(&path)?, &rows)?;
    println!("wrote {}", path.display());
    Ok(())
}
