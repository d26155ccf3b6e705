//! Log-odds arithmetic and how decay pulls a cell back toward its offline value.

use mapdecay::grid::{decay_cell, decay_cell_pow, logodds_from_prob, prob_from_logodds, update_cell, DecayParams};

fn main() -> anyhow::Result<()> {
    let prior = logodds_from_prob(0.2)?;
    let hit = logodds_from_prob(0.9)?;
    let mut l = prior;
    for n in 1..=3 {
        l = update_cell(l, hit);
        println!("after {n} hit(s): l={l:.4} p={:.4}", prob_from_logodds(l)?);
    }

    // A cell the offline map calls free, now holding a stale obstacle.
    let off = logodds_from_prob(0.1)?;
    let on = l;
    for (w_on, w_off) in [(10.0, 1.0), (4.0, 1.0), (1.0, 1.0)] {
        let params = DecayParams::new(w_on, w_off)?;
        let mut v = on;
        let mut ticks = 0;
        while prob_from_logodds(v)? > 0.5 {
            v = decay_cell(v, off, &params);
            ticks += 1;
        }
        println!(
            "w_on={w_on} w_off={w_off}: retention {:.4}, free again after {ticks} ticks, closed form at that tick {:.6}",
            params.retention(),
            decay_cell_pow(on, off, &params, ticks)
        );
    }
    Ok(())
}
