use super::{AdjacencySnapshot, NodeId};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraphStats {
    pub avg_degree: f64,
    pub num_components: usize,
}

/// Connected components as sorted member lists, ordered by smallest member.
pub fn components(snapshot: &AdjacencySnapshot) -> Vec<Vec<NodeId>> {
    let n = snapshot.nodes;
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for &(a, b) in snapshot.edges() {
        let (ra, rb) = (find(&mut parent, a as usize), find(&mut parent, b as usize));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut groups: Vec<Vec<NodeId>> = Vec::new();
    let mut index = vec![usize::MAX; n];
    for v in 0..n {
        let r = find(&mut parent, v);
        if index[r] == usize::MAX {
            index[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[index[r]].push(v as NodeId);
    }
    groups
}

/// `count_isolated = false` drops single-node components from the count.
pub fn graph_stats(snapshot: &AdjacencySnapshot, count_isolated: bool) -> GraphStats {
    let n = snapshot.nodes;
    let avg_degree = if n == 0 { 0.0 } else { 2.0 * snapshot.edges().len() as f64 / n as f64 };
    let num_components = components(snapshot)
        .iter()
        .filter(|c| count_isolated || c.len() > 1)
        .count();
    GraphStats { avg_degree, num_components }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::SimTime;
    use rand::{Rng, SeedableRng};
    use std::collections::VecDeque;

    #[test]
    fn empty_graph() {
        let s = AdjacencySnapshot::empty(SimTime::ZERO, 5);
        assert_eq!(graph_stats(&s, true), GraphStats { avg_degree: 0.0, num_components: 5 });
        assert_eq!(graph_stats(&s, false).num_components, 0);
    }

    #[test]
    fn triangle() {
        let s = AdjacencySnapshot::from_edges(SimTime::ZERO, 3, [(0, 1), (1, 2), (0, 2)]);
        assert_eq!(graph_stats(&s, true), GraphStats { avg_degree: 2.0, num_components: 1 });
    }

    fn bfs_component_count(n: usize, adj: &[Vec<bool>]) -> usize {
        let mut seen = vec![false; n];
        let mut count = 0;
        for s in 0..n {
            if seen[s] {
                continue;
            }
            count += 1;
            let mut q = VecDeque::from([s]);
            seen[s] = true;
            while let Some(u) = q.pop_front() {
                for v in 0..n {
                    if adj[u][v] && !seen[v] {
                        seen[v] = true;
                        q.push_back(v);
                    }
                }
            }
        }
        count
    }

    #[test]
    fn random_graphs_match_bfs_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for trial in 0..200 {
            let p = (trial % 10) as f64 / 60.0;
            let mut adj = vec![vec![false; 30]; 30];
            let mut pairs = Vec::new();
            for a in 0..30 {
                for b in a + 1..30 {
                    if rng.gen_bool(p) {
                        adj[a][b] = true;
                        adj[b][a] = true;
                        pairs.push((a as NodeId, b as NodeId));
                    }
                }
            }
            let s = AdjacencySnapshot::from_edges(SimTime::ZERO, 30, pairs.clone());
            let st = graph_stats(&s, true);
            assert_eq!(st.num_components, bfs_component_count(30, &adj));
            assert!((st.avg_degree - 2.0 * pairs.len() as f64 / 30.0).abs() < 1e-12);
        }
    }
}
