//! Seeded Euler-Maruyama and tamed path simulation.

mod grid;
mod scheme;
mod sde;

pub use grid::{PathEnsemble, PathSample, TimeGrid};
pub use scheme::{
    brownian_increments, brownian_increments_keyed, coarsen_increments, integrate,
    map_independent_pairs, map_paths, simulate_coupled, simulate_coupled_keyed, simulate_em,
    simulate_ensemble, simulate_keyed, simulate_pair_independent, simulate_pair_keyed,
    simulate_tamed, Scheme, BLOWUP_LEVEL,
};
pub use sde::{fingerprint_of, unit_diffusion, FnSde, Perturbed, ReferenceSde, Sde};
