//! Variation operators on sparse genomes.

use rand::Rng;

use super::space::{GeneKind, Genome, SearchSpace};
use crate::scenario::Value;

/// Simulated binary crossover of two reals within [lo, hi].
pub fn sbx<R: Rng>(rng: &mut R, x1: f64, x2: f64, lo: f64, hi: f64, eta: f64) -> (f64, f64) {
    let u: f64 = rng.gen();
    let beta = if u <= 0.5 {
        (2.0 * u).powf(1.0 / (eta + 1.0))
    } else {
        (1.0 / (2.0 * (1.0 - u))).powf(1.0 / (eta + 1.0))
    };
    let c1 = 0.5 * ((1.0 + beta) * x1 + (1.0 - beta) * x2);
    let c2 = 0.5 * ((1.0 - beta) * x1 + (1.0 + beta) * x2);
    (c1.clamp(lo, hi), c2.clamp(lo, hi))
}

/// Polynomial mutation of a real within [lo, hi].
pub fn polynomial<R: Rng>(rng: &mut R, x: f64, lo: f64, hi: f64, eta: f64) -> f64 {
    let u: f64 = rng.gen();
    let delta = if u < 0.5 {
        (2.0 * u).powf(1.0 / (eta + 1.0)) - 1.0
    } else {
        1.0 - (2.0 * (1.0 - u)).powf(1.0 / (eta + 1.0))
    };
    (x + delta * (hi - lo)).clamp(lo, hi)
}

/// Gene-wise crossover: SBX where both parents set the same real gene, otherwise a
/// fair swap of the two entries.
pub fn crossover<R: Rng>(rng: &mut R, space: &SearchSpace, a: &Genome, b: &Genome, eta: f64) -> (Genome, Genome) {
    let mut c1 = a.clone();
    let mut c2 = b.clone();
    for (i, gene) in space.genes.iter().enumerate() {
        match (&a.0[i], &b.0[i], &gene.kind) {
            (Some(Value::Real(x)), Some(Value::Real(y)), GeneKind::Real { lo, hi, .. }) => {
                if rng.gen_bool(0.5) {
                    let (u, v) = sbx(rng, *x, *y, *lo, *hi, eta);
                    c1.0[i] = Some(Value::Real(gene.normalize(u)));
                    c2.0[i] = Some(Value::Real(gene.normalize(v)));
                }
            }
            _ => {
                if rng.gen_bool(0.5) {
                    c1.0[i] = b.0[i].clone();
                    c2.0[i] = a.0[i].clone();
                }
            }
        }
    }
    (c1, c2)
}

/// Each gene mutates with probability `rate`: an unset gene gets a random value, a set
/// gene is dropped one time in five and otherwise perturbed or resampled.
pub fn mutate<R: Rng>(rng: &mut R, space: &SearchSpace, g: &mut Genome, rate: f64, eta: f64) {
    for (i, gene) in space.genes.iter().enumerate() {
        if !rng.gen_bool(rate.clamp(0.0, 1.0)) {
            continue;
        }
        g.0[i] = match (&g.0[i], &gene.kind) {
            (None, _) => Some(gene.sample(rng)),
            (Some(_), _) if rng.gen_bool(0.2) => None,
            (Some(Value::Real(x)), GeneKind::Real { lo, hi, .. }) => {
                Some(Value::Real(gene.normalize(polynomial(rng, *x, *lo, *hi, eta))))
            }
            (Some(_), _) => Some(gene.sample(rng)),
        };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    proptest! {
        #[test]
        fn operators_respect_bounds(seed in 0u64..500, x1 in 0.0..10.0f64, x2 in 0.0..10.0f64) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let (a, b) = sbx(&mut rng, x1, x2, 0.0, 10.0, 15.0);
            prop_assert!((0.0..=10.0).contains(&a) && (0.0..=10.0).contains(&b));
            // SBX preserves the parents' mean when no clamping happens.
            if a > 0.0 && a < 10.0 && b > 0.0 && b < 10.0 {
                prop_assert!(((a + b) - (x1 + x2)).abs() < 1e-9);
            }
            let m = polynomial(&mut rng, x1, 0.0, 10.0, 20.0);
            prop_assert!((0.0..=10.0).contains(&m));
        }
    }
}
