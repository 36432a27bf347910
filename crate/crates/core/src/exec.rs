//! Node-parallel map with a sequential fallback.
//!
//! With the `parallel` feature the maps run on the rayon pool once the
//! workload exceeds [`PAR_MIN_LEN`]; without it everything is sequential
//! and the `parallel` flags are ignored. Each output element depends only
//! on its own index, so results are bit-identical across both paths.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Below this many items the parallel path is not worth the fork.
pub const PAR_MIN_LEN: usize = 1024;

/// Whether the crate was built with the rayon backend.
pub const fn parallel_available() -> bool {
    cfg!(feature = "parallel")
}

pub fn map_range<T, F>(n: usize, parallel: bool, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel && n >= PAR_MIN_LEN {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = parallel;
    (0..n).map(f).collect()
}

/// In-place variant of [`map_range`] for reused buffers.
pub fn fill<T, F>(out: &mut [T], parallel: bool, f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel && out.len() >= PAR_MIN_LEN {
        out.par_iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
        return;
    }
    let _ = parallel;
    for (i, o) in out.iter_mut().enumerate() {
        *o = f(i);
    }
}

/// Map over independent work items regardless of their count; used for
/// whole simulations and bisection searches where each item is expensive.
pub fn map_items<I, T, F>(items: &[I], parallel: bool, f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel && items.len() > 1 {
        return items.par_iter().map(f).collect();
    }
    let _ = parallel;
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree() {
        let f = |i: usize| (i as f64).sin() * 1e3;
        let a = map_range(5000, true, f);
        let b = map_range(5000, false, f);
        assert_eq!(a, b);
        let mut c = vec![0.0; 5000];
        fill(&mut c, true, f);
        assert_eq!(a, c);
    }
}
