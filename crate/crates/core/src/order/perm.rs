use serde::{Deserialize, Serialize};

/// Bijection on `[0, n)`: `perm[old] = new`, `iperm[new] = old`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Permutation {
    perm: Vec<usize>,
    iperm: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation {
            perm: (0..n).collect(),
            iperm: (0..n).collect(),
        }
    }

    /// From the elimination order: `order[new] = old`.
    pub fn from_order(order: Vec<usize>) -> Self {
        let mut perm = vec![usize::MAX; order.len()];
        for (new, &old) in order.iter().enumerate() {
            assert!(old < order.len() && perm[old] == usize::MAX, "order is not a permutation");
            perm[old] = new;
        }
        Permutation { perm, iperm: order }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// old -> new
    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    /// new -> old
    pub fn iperm(&self) -> &[usize] {
        &self.iperm
    }

    /// Applies `self` first, then `then`.
    pub fn compose(&self, then: &Permutation) -> Permutation {
        assert_eq!(self.len(), then.len());
        let order: Vec<usize> = then.iperm.iter().map(|&mid| self.iperm[mid]).collect();
        Permutation::from_order(order)
    }

    /// `y[perm[i]] = x[i]`.
    pub fn apply<T: Copy>(&self, x: &[T]) -> Vec<T> {
        self.iperm.iter().map(|&old| x[old]).collect()
    }

    /// `x[i] = y[perm[i]]`.
    pub fn apply_inverse<T: Copy>(&self, y: &[T]) -> Vec<T> {
        self.perm.iter().map(|&new| y[new]).collect()
    }

    pub fn is_valid(&self) -> bool {
        let mut seen = vec![false; self.len()];
        for &p in &self.perm {
            if p >= seen.len() || seen[p] {
                return false;
            }
            seen[p] = true;
        }
        self.iperm.iter().enumerate().all(|(new, &old)| self.perm[old] == new)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_and_compose() {
        let p = Permutation::from_order(vec![2, 0, 1]);
        assert_eq!(p.perm(), &[1, 2, 0]);
        assert!(p.is_valid());
        let x = [10, 20, 30];
        let y = p.apply(&x);
        assert_eq!(y, vec![30, 10, 20]);
        assert_eq!(p.apply_inverse(&y), x.to_vec());
        let q = Permutation::from_order(vec![1, 2, 0]);
        let pq = p.compose(&q);
        assert_eq!(pq.apply(&x), q.apply(&p.apply(&x)));
    }
}
