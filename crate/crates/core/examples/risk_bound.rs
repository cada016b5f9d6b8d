//! Brute-force check of the density-ratio risk bound on random finite problems.

use cts_forge::eval::{random_case, verify_theorem1};
use cts_forge::rng::rng_from;

fn main() -> cts_forge::Result<()> {
    let mut rng = rng_from(5);
    for i in 0..5 {
        let case = random_case(&mut rng, 6, 4);
        let r = verify_theorem1(&case)?;
        println!(
            "case {i}: |X|={} |Y|={} {} hypotheses, C in [{:.3}, {:.3}], holds: {}",
            case.f_p.len(),
            case.loss.len(),
            case.hypotheses.len(),
            r.c_low,
            r.c_high,
            r.holds
        );
    }
    Ok(())
}
