use serde::{Deserialize, Serialize};

/// Binary cluster tree over a contiguous index range. Children partition
/// the parent range in order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterTree {
    pub size: usize,
    pub children: Vec<ClusterTree>,
}

impl ClusterTree {
    pub fn leaf(size: usize) -> Self {
        ClusterTree {
            size,
            children: Vec::new(),
        }
    }

    pub fn node(left: ClusterTree, right: ClusterTree) -> Self {
        ClusterTree {
            size: left.size + right.size,
            children: vec![left, right],
        }
    }

    /// Halves `size` recursively (left gets the extra index) until parts
    /// are at most `leaf`.
    pub fn balanced(size: usize, leaf: usize) -> Self {
        let leaf = leaf.max(1);
        if size <= leaf {
            return ClusterTree::leaf(size);
        }
        let h = size.div_ceil(2);
        ClusterTree::node(ClusterTree::balanced(h, leaf), ClusterTree::balanced(size - h, leaf))
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn nodes(&self) -> usize {
        1 + self.children.iter().map(|c| c.nodes()).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(|c| c.depth()).max().unwrap_or(0)
    }

    /// Leaf sizes from left to right.
    pub fn leaf_sizes(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<usize>) {
        if self.is_leaf() {
            out.push(self.size);
        }
        for c in &self.children {
            c.collect_leaves(out);
        }
    }

    /// Checks that every inner node has two children whose sizes add up.
    pub fn is_consistent(&self) -> bool {
        match self.children.len() {
            0 => true,
            2 => {
                self.children[0].size + self.children[1].size == self.size
                    && self.children.iter().all(|c| c.is_consistent())
            }
            _ => false,
        }
    }
}
