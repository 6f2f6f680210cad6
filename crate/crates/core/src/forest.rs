//! Merge history of a contraction run.

use crate::error::{Error, Result};

const ROOT: usize = usize::MAX;

/// Union-find style record of contractions.
///
/// Original nodes occupy ids `0..n`. The `t`-th merge creates the fresh id
/// `n + t`, so every parent link points to a strictly larger id.
#[derive(Clone, Debug)]
pub struct ContractionForest {
    n: usize,
    parent: Vec<usize>,
    alive: Vec<bool>,
    alive_count: usize,
}

impl ContractionForest {
    pub fn new(n: usize) -> Self {
        let cap = (2 * n).saturating_sub(1).max(n);
        let mut alive = vec![false; cap];
        alive[..n].fill(true);
        ContractionForest {
            n,
            parent: vec![ROOT; cap],
            alive,
            alive_count: n,
        }
    }

    /// Number of original nodes.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Size of the id space, `2n - 1`.
    pub fn capacity(&self) -> usize {
        self.parent.len()
    }

    pub fn merges(&self) -> usize {
        self.n - self.alive_count
    }

    pub fn alive_count(&self) -> usize {
        self.alive_count
    }

    pub fn is_alive(&self, id: usize) -> bool {
        self.alive.get(id).copied().unwrap_or(false)
    }

    /// Id the next merge will produce.
    pub fn next_id(&self) -> usize {
        self.n + self.merges()
    }

    /// Parent link, `None` for current representatives and unused ids.
    pub fn parent(&self, id: usize) -> Option<usize> {
        match self.parent.get(id) {
            Some(&p) if p != ROOT => Some(p),
            _ => None,
        }
    }

    /// Merge index that produced `id`, `None` for original nodes.
    pub fn creation_index(&self, id: usize) -> Option<usize> {
        id.checked_sub(self.n)
    }

    /// Contracts two alive representatives into a fresh id and returns it.
    pub fn merge(&mut self, i: usize, j: usize) -> Result<usize> {
        if i == j {
            return Err(Error::state(format!("cannot merge node {i} with itself")));
        }
        for x in [i, j] {
            if !self.is_alive(x) {
                return Err(Error::state(format!("node {x} is not alive")));
            }
        }
        let m = self.next_id();
        self.parent[i] = m;
        self.parent[j] = m;
        self.alive[i] = false;
        self.alive[j] = false;
        self.alive[m] = true;
        self.alive_count -= 1;
        Ok(m)
    }

    /// Alive representative of any id.
    pub fn find(&self, mut id: usize) -> usize {
        while let Some(p) = self.parent(id) {
            id = p;
        }
        id
    }

    /// Representative of every original node, computed in one sweep from
    /// the newest id down.
    pub fn representatives(&self) -> Vec<usize> {
        let used = self.next_id();
        let mut root: Vec<usize> = (0..used).collect();
        for id in (0..used).rev() {
            if let Some(p) = self.parent(id) {
                root[id] = root[p];
            }
        }
        root.truncate(self.n);
        root
    }

    /// Contiguous cluster labels in order of first appearance.
    pub fn labels(&self) -> Vec<usize> {
        crate::partition::canonical_labels(&self.representatives())
    }

    /// Iterator over alive ids in increasing order.
    pub fn alive_ids(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.next_id()).filter(|&id| self.alive[id])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merges_use_fresh_ids() {
        let mut f = ContractionForest::new(4);
        assert_eq!(f.merge(0, 2).unwrap(), 4);
        assert_eq!(f.merge(4, 3).unwrap(), 5);
        assert_eq!(f.alive_count(), 2);
        assert_eq!(f.find(0), 5);
        assert_eq!(f.find(1), 1);
        assert_eq!(f.representatives(), vec![5, 1, 5, 5]);
        assert_eq!(f.labels(), vec![0, 1, 0, 0]);
        assert_eq!(f.alive_ids().collect::<Vec<_>>(), vec![1, 5]);
    }

    #[test]
    fn dead_nodes_cannot_merge() {
        let mut f = ContractionForest::new(3);
        f.merge(0, 1).unwrap();
        assert!(matches!(f.merge(0, 2), Err(Error::State(_))));
        assert!(matches!(f.merge(2, 2), Err(Error::State(_))));
    }

    #[test]
    fn alive_count_tracks_merges() {
        let mut f = ContractionForest::new(6);
        for _ in 0..5 {
            let alive: Vec<usize> = f.alive_ids().collect();
            f.merge(alive[0], alive[1]).unwrap();
            assert_eq!(f.alive_count(), 6 - f.merges());
        }
        assert_eq!(f.capacity(), 11);
        assert_eq!(f.labels(), vec![0; 6]);
    }
}
