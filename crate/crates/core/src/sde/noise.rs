use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::game::{AssembledGame, Team};
use crate::scalar::Real;

/// Independent stream for one path: the run seed selects the key and the
/// path index selects the ChaCha stream.
pub fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

/// Modes simulated for `team` when at most `modes_used` are requested.
pub(crate) fn active_modes<T: Real>(asm: &AssembledGame<T>, team: Team, modes_used: Option<usize>) -> usize {
    let k = asm.noise[team.index()].len();
    modes_used.map_or(k, |m| m.min(k))
}

/// `ΔW = Σ_k √(λ_k¹ dt) ξ_k (e_k¹; 0) + Σ_k √(λ_k² dt) η_k (0; e_k²)`.
///
/// Normals are drawn team 1 first, then team 2, in mode order; the path
/// simulator consumes its streams in the same order.
pub fn sample_wiener_increment<T: Real, R: Rng + ?Sized>(
    asm: &AssembledGame<T>,
    modes_used: Option<usize>,
    dt: f64,
    rng: &mut R,
) -> DVector<T> {
    let n = asm.n();
    let mut dw = DVector::zeros(2 * n);
    for team in Team::BOTH {
        let modes = &asm.noise[team.index()];
        let start = team.block(n).start;
        for k in 0..active_modes(asm, team, modes_used) {
            let xi: f64 = rng.sample(StandardNormal);
            let scale = T::lit((modes.eigenvalues[k].as_f64() * dt).sqrt() * xi);
            let mut block = dw.rows_mut(start, n);
            block.axpy(scale, &modes.functions.column(k), T::one());
        }
    }
    dw
}
