//! Sequential or data-parallel evaluation of independent work items.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How to run independent items (kernel columns, trials, parameter sweeps).
/// `Parallel` silently runs sequentially when the `parallel` feature is off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    pub fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }

    /// `(0..count).map(f)` in index order.
    pub fn map_range<T, F>(self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => (0..count).into_par_iter().map(f).collect(),
            _ => (0..count).map(f).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_order_both_ways() {
        let s = Execution::Sequential.map_range(100, |i| i * i);
        let p = Execution::Parallel.map_range(100, |i| i * i);
        assert_eq!(s, p);
    }
}
