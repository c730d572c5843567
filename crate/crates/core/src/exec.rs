//! Replicate execution. With the `parallel` feature replicates are spread
//! over the rayon pool; without it they run in order on the caller's
//! thread. Results are identical either way because every replicate draws
//! from its own addressed stream.

/// Evaluate `f(0..count)` and collect results in replicate order.
pub fn map_replicates<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..count as u64).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_replicates_sequential(count, f)
    }
}

/// Sequential reference path, always available.
pub fn map_replicates_sequential<T, F>(count: usize, f: F) -> Vec<T>
where
    F: Fn(u64) -> T,
{
    (0..count as u64).map(f).collect()
}

/// Fallible variant; the first error in replicate order is returned.
pub fn try_map_replicates<T, E, F>(count: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(u64) -> Result<T, E> + Sync + Send,
{
    map_replicates(count, f).into_iter().collect()
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let xs = map_replicates(1000, |r| r * r);
        assert_eq!(xs, map_replicates_sequential(1000, |r| r * r));
    }

    #[test]
    fn first_error_wins() {
        let r: Result<Vec<u64>, u64> = try_map_replicates(100, |r| if r % 30 == 29 { Err(r) } else { Ok(r) });
        assert_eq!(r, Err(29));
    }
}
