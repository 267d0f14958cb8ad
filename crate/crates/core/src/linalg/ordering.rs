//! Minimum-degree fill-reducing ordering.

use std::collections::BTreeSet;

use super::{Permutation, SparseMatrix};

/// Result of symbolically eliminating a symmetric pattern.
pub(crate) struct SymbolicElimination {
    pub order: Permutation,
    /// For each elimination step `k`, the (permuted, ascending) row indices
    /// of the strictly-lower part of column `k` of the Cholesky factor.
    pub columns: Vec<Vec<usize>>,
}

/// Orders the nodes of the graph of `A + Aᵀ` by repeatedly eliminating a
/// node of minimum current degree (lowest index on ties). The elimination
/// graph is kept explicitly, so the neighbour set at elimination time is
/// exactly the pattern of the corresponding factor column.
pub(crate) fn minimum_degree(a: &SparseMatrix) -> SymbolicElimination {
    let n = a.nrows();
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (i, j, _) in a.triplets() {
        if i != j {
            adj[i].insert(j);
            adj[j].insert(i);
        }
    }
    let mut queue: BTreeSet<(usize, usize)> = (0..n).map(|i| (adj[i].len(), i)).collect();
    let mut order = Vec::with_capacity(n);
    let mut neighbours = Vec::with_capacity(n);

    while let Some((_, p)) = queue.pop_first() {
        let nbrs: Vec<usize> = std::mem::take(&mut adj[p]).into_iter().collect();
        for &u in &nbrs {
            queue.remove(&(adj[u].len(), u));
            adj[u].remove(&p);
            for &v in &nbrs {
                if v != u {
                    adj[u].insert(v);
                }
            }
            queue.insert((adj[u].len(), u));
        }
        order.push(p);
        neighbours.push(nbrs);
    }

    let order = Permutation::new(order).expect("every node is eliminated exactly once");
    let inv = order.inverse();
    let columns = neighbours
        .into_iter()
        .map(|nbrs| {
            let mut col: Vec<usize> = nbrs.into_iter().map(|u| inv[u]).collect();
            col.sort_unstable();
            col
        })
        .collect();
    SymbolicElimination { order, columns }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arrow_matrix_eliminates_hub_last() {
        // Node 0 couples to everything; eliminating it first would fill the
        // whole matrix.
        let n = 6;
        let mut t = vec![];
        for i in 0..n {
            t.push((i, i, 4.0));
            if i > 0 {
                t.push((0, i, 1.0));
                t.push((i, 0, 1.0));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, &t).unwrap();
        let sym = minimum_degree(&a);
        assert!(sym.order.inverse()[0] >= n - 2);
        let fill: usize = sym.columns.iter().map(Vec::len).sum();
        assert_eq!(fill, n - 1);
    }
}
