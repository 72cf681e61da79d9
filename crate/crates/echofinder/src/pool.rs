//! Worker pool for per-echogram batch work.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Environment variable holding the worker count.
pub const THREADS_ENV: &str = "ECHOFINDER_THREADS";

/// Reads the worker count from [`THREADS_ENV`]; unset means 1.
pub fn threads_from_env() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Err(std::env::VarError::NotPresent) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Error::Usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(e) => Err(Error::Usage(format!("{THREADS_ENV}: {e}"))),
    }
}

/// Applies `f` to every item on `threads` workers. Results keep input order,
/// so the output does not depend on the worker count.
pub fn map<T, R, F>(threads: usize, items: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    if threads <= 1 {
        return items.iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Internal(format!("cannot start worker pool: {e}")))?;
    pool.install(|| items.par_iter().map(f).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_independent_of_thread_count() {
        let items: Vec<u64> = (0..100).collect();
        let one = map(1, &items, |v| Ok(v * v)).unwrap();
        let four = map(4, &items, |v| Ok(v * v)).unwrap();
        assert_eq!(one, four);
    }

    #[test]
    fn first_error_propagates() {
        let r = map(2, &[1, 2, 3], |&v| if v == 2 { Err(Error::Data("two".into())) } else { Ok(v) });
        assert!(r.is_err());
    }
}
