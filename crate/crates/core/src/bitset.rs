//! Fixed-capacity bit rows used for closure adjacency and job subsets.

use std::fmt;

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct JobSet {
    words: Vec<u64>,
}

impl JobSet {
    pub fn new(capacity: usize) -> Self {
        JobSet {
            words: vec![0; capacity.div_ceil(64)],
        }
    }

    pub fn from_iter_with_capacity<I: IntoIterator<Item = usize>>(capacity: usize, it: I) -> Self {
        let mut s = JobSet::new(capacity);
        for j in it {
            s.insert(j);
        }
        s
    }

    pub fn capacity(&self) -> usize {
        self.words.len() * 64
    }

    #[inline]
    pub fn insert(&mut self, j: usize) -> bool {
        let (w, b) = (j / 64, j % 64);
        if w >= self.words.len() {
            self.words.resize(w + 1, 0);
        }
        let was = self.words[w] >> b & 1 == 1;
        self.words[w] |= 1 << b;
        !was
    }

    #[inline]
    pub fn remove(&mut self, j: usize) {
        let (w, b) = (j / 64, j % 64);
        if w < self.words.len() {
            self.words[w] &= !(1 << b);
        }
    }

    #[inline]
    pub fn contains(&self, j: usize) -> bool {
        let (w, b) = (j / 64, j % 64);
        w < self.words.len() && self.words[w] >> b & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn union_with(&mut self, other: &JobSet) {
        if other.words.len() > self.words.len() {
            self.words.resize(other.words.len(), 0);
        }
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= *b;
        }
    }

    pub fn intersection_len(&self, other: &JobSet) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(wi * 64 + b)
            })
        })
    }
}

impl fmt::Debug for JobSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn insert_iter_len() {
        let mut s = JobSet::new(10);
        assert!(s.insert(3));
        assert!(!s.insert(3));
        s.insert(70);
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![3, 70]);
        assert_eq!(s.len(), 2);
        s.remove(3);
        assert!(!s.contains(3));
        assert!(s.contains(70));
    }

    #[test]
    fn intersection() {
        let a = JobSet::from_iter_with_capacity(128, [1, 5, 100]);
        let b = JobSet::from_iter_with_capacity(128, [5, 100, 101]);
        assert_eq!(a.intersection_len(&b), 2);
    }
}
