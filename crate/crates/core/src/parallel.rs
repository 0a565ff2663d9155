//! Deterministic fan-out for independent work units (folds, seeds, curve
//! points).
//!
//! Results land in input order regardless of worker count, and each unit owns
//! its seeds, so the parallelism level never changes any numbers.

use std::sync::Mutex;

/// Applies `work` to `0..count`, using up to `jobs` worker threads, and
/// returns the outputs in index order. The first error (by index) wins.
pub fn run_indexed<T, E, W>(count: usize, jobs: usize, work: W) -> std::result::Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    W: Fn(usize) -> std::result::Result<T, E> + Sync,
{
    let jobs = jobs.max(1).min(count.max(1));
    if jobs <= 1 || count <= 1 {
        return (0..count).map(&work).collect();
    }

    let slots: Mutex<Vec<Option<std::result::Result<T, E>>>> =
        Mutex::new((0..count).map(|_| None).collect());
    let next = std::sync::atomic::AtomicUsize::new(0);

    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if index >= count {
                    break;
                }
                let result = work(index);
                slots.lock().expect("worker panicked holding results").insert_result(index, result);
            });
        }
    });

    let mut collected = slots.into_inner().expect("worker panicked holding results");
    let mut out = Vec::with_capacity(count);
    for slot in collected.drain(..) {
        match slot.expect("every index was produced") {
            Ok(value) => out.push(value),
            Err(error) => return Err(error),
        }
    }
    Ok(out)
}

trait InsertResult<T, E> {
    fn insert_result(&mut self, index: usize, result: std::result::Result<T, E>);
}

impl<T, E> InsertResult<T, E> for Vec<Option<std::result::Result<T, E>>> {
    fn insert_result(&mut self, index: usize, result: std::result::Result<T, E>) {
        self[index] = Some(result);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order_across_job_counts() {
        let sequential = run_indexed(20, 1, |i| Ok::<_, ()>(i * i)).unwrap();
        let parallel = run_indexed(20, 8, |i| Ok::<_, ()>(i * i)).unwrap();
        assert_eq!(sequential, parallel);
        assert_eq!(sequential, (0..20).map(|i| i * i).collect::<Vec<_>>());
    }

    #[test]
    fn first_error_by_index_wins() {
        let result = run_indexed(10, 4, |i| if i >= 3 { Err(i) } else { Ok(i) });
        assert_eq!(result.unwrap_err(), 3);
    }

    #[test]
    fn empty_input_is_fine() {
        let out: Vec<u32> = run_indexed(0, 4, |_| Ok::<_, ()>(0)).unwrap();
        assert!(out.is_empty());
    }
}
