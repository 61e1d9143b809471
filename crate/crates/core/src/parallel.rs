//! Ensemble execution. Members run on the rayon pool when the `parallel`
//! feature is enabled and sequentially otherwise; results keep input order
//! either way, so reductions over them are deterministic.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How an ensemble of independent jobs is executed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Maps `job` over `items`, preserving order.
    pub fn map<T, R, F>(self, items: &[T], job: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            Execution::Sequential => items.iter().map(job).collect(),
            // a one-thread pool only adds scheduling overhead
            #[cfg(feature = "parallel")]
            Execution::Parallel if rayon::current_num_threads() == 1 => {
                items.iter().map(job).collect()
            }
            #[cfg(feature = "parallel")]
            Execution::Parallel => items.par_iter().map(job).collect(),
            #[cfg(not(feature = "parallel"))]
            Execution::Parallel => items.iter().map(job).collect(),
        }
    }

    /// Like [`Execution::map`] but short-circuits on the first error in
    /// input order.
    pub fn try_map<T, R, E, F>(self, items: &[T], job: F) -> Result<Vec<R>, E>
    where
        T: Sync,
        R: Send,
        E: Send,
        F: Fn(&T) -> Result<R, E> + Sync + Send,
    {
        self.map(items, job).into_iter().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = Execution::Sequential.map(&items, |x| x * x);
        let par = Execution::Parallel.map(&items, |x| x * x);
        assert_eq!(seq, par);
        let err: Result<Vec<u64>, u64> =
            Execution::Parallel.try_map(&items, |&x| if x % 300 == 299 { Err(x) } else { Ok(x) });
        assert_eq!(err, Err(299));
    }
}
