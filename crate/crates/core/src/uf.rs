/// Disjoint sets over `0..n`, with classes numbered by least member.
#[derive(Debug, Clone)]
pub struct UnionFind {
    inner: petgraph::unionfind::UnionFind<usize>,
    len: usize,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { inner: petgraph::unionfind::UnionFind::new(n), len: n }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn find(&mut self, x: usize) -> usize {
        self.inner.find_mut(x)
    }

    /// Returns true when two distinct classes were merged.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        self.inner.union(a, b)
    }

    /// Dense class ids numbered by least member, plus the least member of
    /// each class.
    pub fn classes(&mut self) -> (Vec<usize>, Vec<usize>) {
        let n = self.len();
        let mut id_of_root = vec![usize::MAX; n];
        let mut class_of = vec![0; n];
        let mut reps = Vec::new();
        for x in 0..n {
            let r = self.find(x);
            if id_of_root[r] == usize::MAX {
                id_of_root[r] = reps.len();
                reps.push(x);
            }
            class_of[x] = id_of_root[r];
        }
        (class_of, reps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classes_are_numbered_by_least_member() {
        let mut uf = UnionFind::new(5);
        uf.union(4, 1);
        uf.union(3, 2);
        let (class_of, reps) = uf.classes();
        assert_eq!(reps, vec![0, 1, 2]);
        assert_eq!(class_of, vec![0, 1, 2, 2, 1]);
    }
}
