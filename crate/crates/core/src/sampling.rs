//! Counter-based sampling: sample i depends only on (seed, stream, i), so the
//! sample set is the same under any execution order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::base::TorusPoint;

pub const STREAM_POINTS: u64 = 1;
pub const STREAM_LEAF: u64 = 2;
pub const STREAM_MISC: u64 = 3;

pub fn rng_for(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(index);
    rng
}

pub fn uniform_point(rng: &mut impl Rng, m: usize) -> TorusPoint {
    TorusPoint::from_raw((0..m).map(|_| rng.gen::<u64>()).collect())
}

/// `count` uniform points on T^m.
pub fn sample_points(m: usize, count: usize, seed: u64, stream: u64) -> Vec<TorusPoint> {
    (0..count)
        .map(|i| uniform_point(&mut rng_for(seed, stream, i as u64), m))
        .collect()
}

/// Maps `f` over `items`, in parallel unless `serial`; output order is the input order.
pub fn map_samples<T, U, F>(items: &[T], serial: bool, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(usize, &T) -> U + Sync + Send,
{
    if serial {
        items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
    } else {
        items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_do_not_depend_on_count() {
        let a = sample_points(2, 5, 7, STREAM_POINTS);
        let b = sample_points(2, 9, 7, STREAM_POINTS);
        assert_eq!(a[..], b[..5]);
        assert_ne!(a, sample_points(2, 5, 8, STREAM_POINTS));
    }

    #[test]
    fn parallel_map_preserves_order() {
        let v: Vec<u64> = (0..100).collect();
        assert_eq!(map_samples(&v, false, |_, x| x * 2), map_samples(&v, true, |_, x| x * 2));
    }
}
