//! Worker-count resolution and deterministic parallel mapping.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Environment variable consulted when `--jobs` is absent.
pub const JOBS_ENV: &str = "VFUSE_THREADS";

/// Resolve the worker count: `--jobs` flag, then the `VFUSE_THREADS`
/// environment variable, then the machine's available parallelism.
pub fn resolve_jobs(flag: Option<usize>) -> usize {
    let n = flag
        .or_else(|| std::env::var(JOBS_ENV).ok().and_then(|v| v.parse().ok()))
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |p| p.get()));
    n.max(1)
}

/// Apply `f` to `0..n` on up to `jobs` threads and return the results in
/// index order.
///
/// Work is handed out through a shared counter, so thread count and
/// scheduling affect only timing; the result vector (and therefore anything
/// downstream) is identical for every `jobs` value.
pub fn parallel_map<T, F>(n: usize, jobs: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let workers = jobs.max(1).min(n.max(1));
    let mut slots: Vec<Option<T>> = Vec::with_capacity(n);
    slots.resize_with(n, || None);
    if workers <= 1 {
        for (i, slot) in slots.iter_mut().enumerate() {
            *slot = Some(f(i));
        }
    } else {
        let next = AtomicUsize::new(0);
        let out = Mutex::new(&mut slots);
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= n {
                        break;
                    }
                    let value = f(i);
                    out.lock().expect("result lock poisoned")[i] = Some(value);
                });
            }
        });
    }
    slots.into_iter().map(|v| v.expect("worker left a slot empty")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_come_back_in_index_order() {
        for jobs in [1, 2, 7] {
            let got = parallel_map(20, jobs, |i| i * i);
            let want: Vec<usize> = (0..20).map(|i| i * i).collect();
            assert_eq!(got, want, "jobs = {jobs}");
        }
    }

    #[test]
    fn zero_tasks_is_fine() {
        let got: Vec<usize> = parallel_map(0, 4, |i| i);
        assert!(got.is_empty());
    }

    #[test]
    fn flag_wins_over_environment() {
        assert_eq!(resolve_jobs(Some(3)), 3);
        assert_eq!(resolve_jobs(Some(0)), 1);
    }
}
