//! Random points in norm balls.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{NormTag, Vector};

/// Uniformly distributed unit vector in the given norm.
pub fn unit_direction<R: Rng + ?Sized>(rng: &mut R, dim: usize, tag: NormTag) -> Vector {
    loop {
        let raw: Vector = match tag {
            NormTag::L2 => (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect::<Vec<_>>(),
            NormTag::LInf => (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect::<Vec<_>>(),
        }
        .into();
        let len = raw.norm(tag);
        if len > 1e-12 {
            return raw.scaled(1.0 / len);
        }
    }
}

/// A point of the closed ball `‖x − center‖ ≤ radius`.
///
/// ℓ2 balls are sampled uniformly by volume; ℓ∞ balls uniformly in the cube.
pub fn point_in_ball<R: Rng + ?Sized>(rng: &mut R, center: &Vector, radius: f64, tag: NormTag) -> Vector {
    let dim = center.dim();
    let offset = match tag {
        NormTag::L2 => {
            let u: f64 = rng.random();
            unit_direction(rng, dim, tag).scaled(radius * u.powf(1.0 / dim as f64))
        }
        NormTag::LInf => Vector::from((0..dim).map(|_| radius * rng.random_range(-1.0..=1.0)).collect::<Vec<_>>()),
    };
    center + &offset
}
