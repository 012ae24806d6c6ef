use alloc::vec::Vec;

/// Disjoint sets over pixel indices where every root remembers the pixel at
/// which its component was born.
pub(crate) struct UnionFind {
    parent: Vec<usize>,
    birth: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(len: usize) -> Self {
        Self {
            parent: (0..len).collect(),
            birth: (0..len).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            let grand = self.parent[self.parent[x]];
            self.parent[x] = grand;
            x = grand;
        }
        x
    }

    pub(crate) fn birth(&self, root: usize) -> usize {
        self.birth[root]
    }

    /// Hangs `younger` under `elder`; both must be roots.
    pub(crate) fn attach(&mut self, younger: usize, elder: usize) {
        self.parent[younger] = elder;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn attach_keeps_elder_birth() {
        let mut uf = UnionFind::new(4);
        uf.attach(1, 0);
        uf.attach(3, 2);
        let (a, b) = (uf.find(1), uf.find(3));
        uf.attach(b, a);
        assert_eq!(uf.find(3), 0);
        let root = uf.find(2);
        assert_eq!(uf.birth(root), 0);
    }
}
