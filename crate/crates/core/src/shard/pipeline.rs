use super::Sample;
use crate::{BoxError, Error, Result};

type Keyed<T> = Result<(String, T)>;

/// Lazy chain of map / filter / batch stages over a fallible stream.
///
/// Each item travels with the key of the sample it came from (for a batch,
/// the key of its first member) so a failing stage reports as
/// [`Error::Stage`] with its zero-based position and that key. Errors from
/// upstream pass through unchanged.
pub struct Pipeline<'a, T> {
    inner: Box<dyn Iterator<Item = Keyed<T>> + 'a>,
    stages: usize,
}

impl<'a> Pipeline<'a, Sample> {
    pub fn new<I>(samples: I) -> Self
    where
        I: IntoIterator<Item = Result<Sample>> + 'a,
    {
        Self::from_keyed(samples.into_iter().map(|r| r.map(|s| (s.key.clone(), s))))
    }
}

impl<'a, T: 'a> Pipeline<'a, T> {
    pub fn from_keyed<I>(items: I) -> Self
    where
        I: IntoIterator<Item = Keyed<T>> + 'a,
    {
        Self { inner: Box::new(items.into_iter()), stages: 0 }
    }

    /// Number of stages added so far.
    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn map<U: 'a, F>(self, mut f: F) -> Pipeline<'a, U>
    where
        F: FnMut(T) -> std::result::Result<U, BoxError> + 'a,
    {
        let stage = self.stages;
        let inner = self.inner.map(move |item| {
            let (key, value) = item?;
            match f(value) {
                Ok(u) => Ok((key, u)),
                Err(source) => Err(Error::Stage { stage, key, source }),
            }
        });
        Pipeline { inner: Box::new(inner), stages: stage + 1 }
    }

    pub fn filter<F>(self, mut keep: F) -> Pipeline<'a, T>
    where
        F: FnMut(&T) -> bool + 'a,
    {
        let inner = self.inner.filter(move |item| match item {
            Ok((_, v)) => keep(v),
            Err(_) => true,
        });
        Pipeline { inner: Box::new(inner), stages: self.stages + 1 }
    }

    /// Collates consecutive items into windows of `size`; the last window may
    /// be shorter. An error inside a window is emitted after the items before
    /// it are flushed as a short window.
    pub fn batch(self, size: usize) -> Result<Pipeline<'a, Vec<T>>> {
        if size == 0 {
            return Err(Error::Validation("batch size must be at least 1".into()));
        }
        let mut upstream = self.inner;
        let mut held_error: Option<Error> = None;
        let inner = std::iter::from_fn(move || {
            if let Some(e) = held_error.take() {
                return Some(Err(e));
            }
            let mut window: Vec<T> = Vec::with_capacity(size);
            let mut first_key: Option<String> = None;
            while window.len() < size {
                match upstream.next() {
                    Some(Ok((key, v))) => {
                        first_key.get_or_insert(key);
                        window.push(v);
                    }
                    Some(Err(e)) => {
                        if window.is_empty() {
                            return Some(Err(e));
                        }
                        held_error = Some(e);
                        break;
                    }
                    None => break,
                }
            }
            first_key.map(|k| Ok((k, window)))
        });
        Ok(Pipeline { inner: Box::new(inner), stages: self.stages + 1 })
    }

    /// Items paired with the key they derive from.
    pub fn keyed(self) -> impl Iterator<Item = Keyed<T>> + 'a {
        self.inner
    }
}

impl<T> Iterator for Pipeline<'_, T> {
    type Item = Result<T>;

    fn next(&mut self) -> Option<Result<T>> {
        self.inner.next().map(|r| r.map(|(_, v)| v))
    }
}
