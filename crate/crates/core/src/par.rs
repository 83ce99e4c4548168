//! Order-preserving batch map with a rayon backend and a sequential fallback.
//!
//! With the `parallel` feature (default) work runs on a rayon pool; without
//! it every helper degrades to a plain iterator. Results always come back in
//! input order, so callers see identical output either way.

/// Map `f` over `items`, keeping input order. Uses the global rayon pool.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_sequential(items, f)
    }
}

pub fn map_sequential<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Bounded-concurrency executor for provider requests.
pub struct Executor {
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl Executor {
    /// `parallelism <= 1` runs everything on the calling thread.
    pub fn new(parallelism: usize) -> Self {
        #[cfg(feature = "parallel")]
        {
            let pool = if parallelism > 1 {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(parallelism)
                    .thread_name(|i| format!("pipeline-{i}"))
                    .build()
                    .ok()
            } else {
                None
            };
            Executor { pool }
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = parallelism;
            Executor {}
        }
    }

    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            if let Some(pool) = &self.pool {
                return pool.install(|| items.par_iter().map(&f).collect());
            }
        }
        map_sequential(items, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order() {
        let items: Vec<u32> = (0..1000).collect();
        let expected: Vec<u32> = items.iter().map(|x| x * 3).collect();
        assert_eq!(map(&items, |x| x * 3), expected);
        assert_eq!(Executor::new(4).map(&items, |x| x * 3), expected);
        assert_eq!(Executor::new(1).map(&items, |x| x * 3), expected);
    }
}
