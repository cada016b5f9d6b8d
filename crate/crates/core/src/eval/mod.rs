//! Domain-adaptation tests, distribution distances and clinical scoring.

pub mod da;
pub mod discriminative;
pub mod hellinger;
pub mod pca;
pub mod sofa;
pub mod stats;
pub mod theorem;

pub use da::{select_h_star, test1, test2, RunRisk, SyntheticSet, Test1Result, Test2Result, TestReport};
pub use discriminative::{discriminative_score, DiscriminativeConfig, DiscriminativeScore};
pub use hellinger::{hellinger, ngram_profile, NgramDistribution, NgramRow};
pub use pca::{pca_export, write_pca_csv, Pca, PcaParts, PcaRow};
pub use sofa::{sofa_score, write_sofa_csv, SofaInput, SofaScore};
pub use stats::{confidence_interval, mean_se};
pub use theorem::{random_case, randomized_suite, verify_theorem1, TheoremCheckCase, TheoremReport};
