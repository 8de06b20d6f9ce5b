//! Order-preserving parallel map with a sequential fallback.
//!
//! With the `parallel` feature, work runs on a rayon pool of the requested
//! size (pools are built once per size and reused). Without the feature,
//! or with a degree of 1, items are processed in order on the caller's
//! thread. Either way the output order matches the input order.

#[cfg(feature = "parallel")]
use std::collections::HashMap;
#[cfg(feature = "parallel")]
use std::sync::{Arc, Mutex, OnceLock};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
fn pool(threads: usize) -> Arc<rayon::ThreadPool> {
    static POOLS: OnceLock<Mutex<HashMap<usize, Arc<rayon::ThreadPool>>>> = OnceLock::new();
    let mut pools = POOLS.get_or_init(Default::default).lock().expect("pool registry poisoned");
    pools
        .entry(threads)
        .or_insert_with(|| {
            Arc::new(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .thread_name(move |i| format!("kbc-{threads}-{i}"))
                    .build()
                    .expect("rayon thread pool"),
            )
        })
        .clone()
}

/// True when this build can run work concurrently.
pub const fn enabled() -> bool {
    cfg!(feature = "parallel")
}

/// Applies `f` to every item using up to `degree` threads.
#[cfg(feature = "parallel")]
pub fn map<T, R, F>(items: &[T], degree: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    if degree <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    // Items are usually blocking probes, so each gets its own task.
    pool(degree).install(|| items.par_iter().with_max_len(1).map(&f).collect())
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, R, F>(items: &[T], _degree: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order_for_any_degree() {
        let items: Vec<u32> = (0..100).collect();
        let expected: Vec<u32> = items.iter().map(|x| x * x).collect();
        for degree in [0, 1, 2, 7, 16] {
            assert_eq!(map(&items, degree, |x| x * x), expected);
        }
    }
}
