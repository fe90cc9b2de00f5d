//! Data-parallel map over independent work items. With the `parallel`
//! feature (default) work is spread over the rayon pool; without it, or with
//! an explicit single worker, items are processed in order on the caller's
//! thread. Results are always returned in input order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `items`, in parallel when the feature is enabled.
#[cfg(feature = "parallel")]
pub fn map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    items.iter().map(f).collect()
}

/// Map over `0..n` with an explicit worker count: `0` uses the global pool,
/// `1` (or a build without the `parallel` feature) runs sequentially, and
/// larger values run on a dedicated pool of that size.
pub fn map_range<R: Send>(n: usize, workers: usize, f: impl Fn(usize) -> R + Sync + Send) -> Vec<R> {
    #[cfg(feature = "parallel")]
    match workers {
        1 => {}
        0 => return (0..n).into_par_iter().map(f).collect(),
        w => {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(w).build() {
                return pool.install(|| (0..n).into_par_iter().map(f).collect());
            }
        }
    }
    let _ = workers;
    (0..n).map(f).collect()
}

/// Whether the crate was built with the rayon backend.
pub const fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    #[test]
    fn order_is_preserved() {
        let v: Vec<usize> = (0..1000).collect();
        let out = super::map(&v, |&i| i * 2);
        assert!(out.iter().enumerate().all(|(i, &x)| x == 2 * i));
        let seq = super::map_range(257, 1, |i| i * i);
        let par = super::map_range(257, 0, |i| i * i);
        let pool = super::map_range(257, 3, |i| i * i);
        assert_eq!(seq, par);
        assert_eq!(seq, pool);
    }
}
