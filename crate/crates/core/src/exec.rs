//! Execution policy for independent work items.
//!
//! Every parallel map collects results in input order, so outputs do not
//! depend on the thread count. Without the `parallel` feature the parallel
//! policy runs sequentially.

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
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
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            Exec::Sequential => items.iter().map(f).collect(),
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                items.par_iter().map(f).collect()
            }
            #[cfg(not(feature = "parallel"))]
            Exec::Parallel => items.iter().map(f).collect(),
        }
    }

    /// Like [`map`](Self::map) but stops at the first error in input order.
    pub fn try_map<T, R, E, F>(self, items: &[T], f: F) -> Result<Vec<R>, E>
    where
        T: Sync,
        R: Send,
        E: Send,
        F: Fn(&T) -> Result<R, E> + Sync + Send,
    {
        self.map(items, f).into_iter().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree_and_keep_order() {
        let items: Vec<u64> = (0..200).collect();
        let seq = Exec::Sequential.map(&items, |x| x * x);
        let par = Exec::Parallel.map(&items, |x| x * x);
        assert_eq!(seq, par);
        assert_eq!(seq[13], 169);
        let err: Result<Vec<u64>, u64> =
            Exec::Parallel.try_map(&items, |&x| if x % 50 == 49 { Err(x) } else { Ok(x) });
        assert_eq!(err, Err(49));
    }
}
