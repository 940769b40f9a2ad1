//! Data-parallel helpers. With the `parallel` feature the maps run on rayon;
//! without it they fall back to plain iteration. Results are always collected
//! in index order so reductions are independent of the worker count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// `(0..n).map(f)` evaluated in parallel when available.
#[cfg(feature = "parallel")]
pub fn map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_seq(n, f)
}

/// Sequential reference path, always available.
pub fn map_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Runs `f` inside a pool limited to `threads` workers. `None` uses the
/// global pool. Without the `parallel` feature this just calls `f`.
#[cfg(feature = "parallel")]
pub fn with_threads<R, F>(threads: Option<usize>, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    match threads {
        Some(n) if n > 0 => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        _ => f(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_threads<R, F>(_threads: Option<usize>, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    f()
}

pub fn current_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree() {
        let f = |i: usize| (i as f64).sqrt().sin();
        assert_eq!(map(1000, f), map_seq(1000, f));
    }

    #[test]
    fn pool_size_does_not_change_results() {
        let f = |i: usize| ((i * 7919) % 101) as f64 * 0.5;
        let one = with_threads(Some(1), || map(257, f));
        let many = with_threads(Some(4), || map(257, f));
        assert_eq!(one, many);
    }
}
