//! Execution policy for data-parallel loops.
//!
//! Every parallel loop in the crate maps independent items to results and
//! collects them in input order, so the output never depends on the policy
//! or the thread count. Without the `parallel` feature, [`Exec::Parallel`]
//! silently runs sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// `f` applied to every item, results in input order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => items.par_iter().map(f).collect(),
            _ => items.iter().map(f).collect(),
        }
    }

    /// `f(i)` for `i in range`, results in index order.
    pub fn map_range<R, F>(self, range: std::ops::Range<usize>, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => range.into_par_iter().map(f).collect(),
            _ => range.map(f).collect(),
        }
    }

    /// Runs `f` on each `(item, slot)` pair, mutating the slots in place.
    pub fn zip_for_each<T, S, F>(self, items: &[T], slots: &mut [S], f: F)
    where
        T: Sync,
        S: Send,
        F: Fn(&T, &mut S) + Sync + Send,
    {
        assert_eq!(items.len(), slots.len());
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => items
                .par_iter()
                .zip(slots.par_iter_mut())
                .for_each(|(t, s)| f(t, s)),
            _ => items.iter().zip(slots.iter_mut()).for_each(|(t, s)| f(t, s)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree() {
        let xs: Vec<u64> = (0..1000).collect();
        let f = |x: &u64| x.wrapping_mul(0x9e37_79b9_7f4a_7c15) >> 7;
        assert_eq!(Exec::Sequential.map(&xs, f), Exec::Parallel.map(&xs, f));
        assert_eq!(
            Exec::Sequential.map_range(0..333, |i| i * i),
            Exec::Parallel.map_range(0..333, |i| i * i)
        );
    }

    #[test]
    fn zip_for_each_writes_every_slot() {
        let xs = [1.0, 2.0, 3.0];
        let mut out = [0.0; 3];
        Exec::Parallel.zip_for_each(&xs, &mut out, |x, s| *s = x * 2.0);
        assert_eq!(out, [2.0, 4.0, 6.0]);
    }
}
