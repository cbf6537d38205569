//! Maximum-cardinality bipartite matching (Hopcroft-Karp).

use std::collections::VecDeque;

const FREE: usize = usize::MAX;

/// Computes a maximum matching of the bipartite graph whose left vertex `i`
/// is adjacent to every right vertex in `adj[i]`. Right vertices are
/// `0..right`. Returns the matched `(left, right)` pairs sorted by left index.
pub fn maximum_matching(adj: &[Vec<usize>], right: usize) -> Vec<(usize, usize)> {
    let left = adj.len();
    let mut match_left = vec![FREE; left];
    let mut match_right = vec![FREE; right];
    let mut dist = vec![0usize; left];

    loop {
        // BFS from free left vertices builds the layered graph
        let mut queue = VecDeque::new();
        for i in 0..left {
            if match_left[i] == FREE {
                dist[i] = 0;
                queue.push_back(i);
            } else {
                dist[i] = usize::MAX;
            }
        }
        let mut found = false;
        while let Some(i) = queue.pop_front() {
            for &j in &adj[i] {
                match match_right[j] {
                    FREE => found = true,
                    k if dist[k] == usize::MAX => {
                        dist[k] = dist[i] + 1;
                        queue.push_back(k);
                    }
                    _ => {}
                }
            }
        }
        if !found {
            break;
        }
        let mut augmented = false;
        for i in 0..left {
            if match_left[i] == FREE && augment(i, adj, &mut match_left, &mut match_right, &mut dist) {
                augmented = true;
            }
        }
        if !augmented {
            break;
        }
    }

    match_left.iter().enumerate().filter(|&(_, &j)| j != FREE).map(|(i, &j)| (i, j)).collect()
}

fn augment(
    i: usize,
    adj: &[Vec<usize>],
    match_left: &mut [usize],
    match_right: &mut [usize],
    dist: &mut [usize],
) -> bool {
    for &j in &adj[i] {
        let next = match_right[j];
        let ok = next == FREE
            || (dist[next] == dist[i].wrapping_add(1) && augment(next, adj, match_left, match_right, dist));
        if ok {
            match_left[i] = j;
            match_right[j] = i;
            return true;
        }
    }
    // dead end for this phase
    dist[i] = usize::MAX;
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Largest matching by trying every subset of edges.
    fn brute_force(adj: &[Vec<usize>], right: usize) -> usize {
        let edges: Vec<(usize, usize)> =
            adj.iter().enumerate().flat_map(|(i, js)| js.iter().map(move |&j| (i, j))).collect();
        let mut best = 0;
        for mask in 0u32..(1 << edges.len()) {
            let mut l = vec![false; adj.len()];
            let mut r = vec![false; right];
            let mut ok = true;
            for (k, &(i, j)) in edges.iter().enumerate() {
                if mask >> k & 1 == 1 {
                    if l[i] || r[j] {
                        ok = false;
                        break;
                    }
                    l[i] = true;
                    r[j] = true;
                }
            }
            if ok {
                best = best.max(mask.count_ones() as usize);
            }
        }
        best
    }

    #[test]
    fn simple_graphs() {
        assert!(maximum_matching(&[], 3).is_empty());
        assert!(maximum_matching(&[vec![], vec![]], 0).is_empty());
        // greedy would take (0,0) and strand vertex 1
        let adj = vec![vec![0, 1], vec![0]];
        assert_eq!(maximum_matching(&adj, 2), vec![(0, 1), (1, 0)]);
        // one right vertex shared by all
        let adj = vec![vec![0], vec![0], vec![0]];
        assert_eq!(maximum_matching(&adj, 1).len(), 1);
    }

    proptest! {
        #[test]
        fn matches_brute_force(bits in proptest::collection::vec(any::<bool>(), 16), left in 1usize..=4, right in 1usize..=4) {
            let adj: Vec<Vec<usize>> = (0..left)
                .map(|i| (0..right).filter(|&j| bits[i * 4 + j]).collect())
                .collect();
            let m = maximum_matching(&adj, right);
            prop_assert_eq!(m.len(), brute_force(&adj, right));
            let mut seen_r = vec![false; right];
            for &(i, j) in &m {
                prop_assert!(adj[i].contains(&j));
                prop_assert!(!std::mem::replace(&mut seen_r[j], true));
            }
        }
    }
}
