//! Data-parallel iteration helpers.
//!
//! With the `parallel` feature these expand to rayon parallel iterators, otherwise to the
//! plain sequential iterators. Callers only use `map`/`for_each`/`zip`/`collect`, so both
//! expansions type-check. Reductions over floats are never done through these: results are
//! collected first and summed sequentially, which keeps output bit-identical regardless of
//! how work was split.

#[cfg(feature = "parallel")]
pub use rayon::prelude::*;

#[macro_export]
macro_rules! par_iter {
    ($e:expr) => {{
        #[cfg(feature = "parallel")]
        let it = $e.par_iter();
        #[cfg(not(feature = "parallel"))]
        let it = $e.iter();
        it
    }};
}

#[macro_export]
macro_rules! par_iter_mut {
    ($e:expr) => {{
        #[cfg(feature = "parallel")]
        let it = $e.par_iter_mut();
        #[cfg(not(feature = "parallel"))]
        let it = $e.iter_mut();
        it
    }};
}

#[macro_export]
macro_rules! par_range {
    ($r:expr) => {{
        #[cfg(feature = "parallel")]
        let it = ($r).into_par_iter();
        #[cfg(not(feature = "parallel"))]
        let it = ($r).into_iter();
        it
    }};
}

/// Number of worker threads the data-parallel sections will use.
pub fn num_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Configure the global pool size. Has no effect without the `parallel` feature, or if the
/// pool was already initialised.
pub fn init_threads(threads: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        false
    }
}
