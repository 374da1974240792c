//! Runs the built-in convergence ladders and prints errors and rates.

use boltzdg::solver::SolverOptions;
use boltzdg::study::{compton_2d_ladder, mono_2d_ladder, polar_3d_ladder, run_ladder};

fn main() -> boltzdg::Result<()> {
    let which = std::env::args().nth(1).unwrap_or_else(|| "all".into());
    let opts = SolverOptions::default();
    let mut ladders = Vec::new();
    if which == "all" || which == "mono" {
        ladders.push(mono_2d_ladder(0));
        ladders.push(mono_2d_ladder(1));
    }
    if which == "all" || which == "compton" {
        ladders.push(compton_2d_ladder(0));
        ladders.push(compton_2d_ladder(1));
    }
    if which == "all" || which == "polar" {
        ladders.push(polar_3d_ladder());
    }
    for ladder in ladders {
        let res = run_ladder(&ladder, &opts, |out| {
            let r = &out.record;
            println!(
                "{:<36} N={:>9} l2={:.4e} dg={:.4e} sl={:.4e} it={} t={:.1}s",
                r.label,
                r.dofs,
                r.errors.l2,
                r.errors.dg,
                r.errors.streamline,
                r.iterations,
                r.seconds
            );
        })?;
        for rate in &res.rates {
            println!(
                "  rates h: l2={:.3} dg={:.3}   N: l2={:.3} dg={:.3}",
                rate.h.l2, rate.h.dg, rate.n.l2, rate.n.dg
            );
        }
    }
    Ok(())
}
