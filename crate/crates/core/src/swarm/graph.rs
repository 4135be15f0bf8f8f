use std::collections::BTreeSet;

use super::SwarmError;

/// Directed information graph of the swarm.
///
/// Agents are indexed from zero; the non-cooperative leader is the last
/// agent. An edge `(i, j)` means agent `i` receives agent `j`'s heading,
/// i.e. `j` is in the neighbor set of `i`. Self-weights are implicit and
/// never stored as edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentGraph {
    neighbors: Vec<BTreeSet<usize>>,
}

impl AgentGraph {
    /// Builds a graph from directed `(receiver, sender)` pairs.
    pub fn from_edges(agents: usize, edges: &[(usize, usize)]) -> Result<Self, SwarmError> {
        if agents == 0 {
            return Err(SwarmError::Dimension {
                expected: 1,
                found: 0,
                what: "agents",
            });
        }
        let mut neighbors = vec![BTreeSet::new(); agents];
        for &(i, j) in edges {
            if i >= agents || j >= agents {
                return Err(SwarmError::InvalidGraph(format!(
                    "edge ({i}, {j}) references an agent outside 0..{agents}"
                )));
            }
            if i == j {
                return Err(SwarmError::InvalidGraph(format!("self-loop on agent {i}")));
            }
            neighbors[i].insert(j);
        }
        Ok(Self { neighbors })
    }

    /// Builds an undirected graph: every pair is inserted in both directions.
    pub fn undirected(agents: usize, edges: &[(usize, usize)]) -> Result<Self, SwarmError> {
        let both: Vec<_> = edges.iter().flat_map(|&(i, j)| [(i, j), (j, i)]).collect();
        Self::from_edges(agents, &both)
    }

    /// Followers pairwise connected in both directions, each receiving from
    /// the leader, and a leader that receives from nobody.
    pub fn leader_follower(agents: usize) -> Self {
        assert!(
            agents >= 2,
            "a leader-follower swarm needs at least two agents"
        );
        let leader = agents - 1;
        let neighbors = (0..agents)
            .map(|i| {
                if i == leader {
                    BTreeSet::new()
                } else {
                    (0..agents).filter(|&j| j != i).collect()
                }
            })
            .collect();
        Self { neighbors }
    }

    pub fn agents(&self) -> usize {
        self.neighbors.len()
    }

    pub fn leader(&self) -> usize {
        self.neighbors.len() - 1
    }

    pub fn neighbors(&self, i: usize) -> &BTreeSet<usize> {
        &self.neighbors[i]
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, n)| n.iter().map(move |&j| (i, j)))
            .collect()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].contains(&j)
    }

    /// Checks the leader-follower structure: the leader listens to nobody and
    /// every cooperative agent listens to the leader.
    pub fn check_leader_structure(&self) -> Result<(), SwarmError> {
        let leader = self.leader();
        if !self.neighbors[leader].is_empty() {
            return Err(SwarmError::InvalidGraph(
                "leader must not receive information from cooperative agents".into(),
            ));
        }
        if let Some(i) = (0..leader).find(|&i| !self.neighbors[i].contains(&leader)) {
            return Err(SwarmError::InvalidGraph(format!(
                "cooperative agent {i} has no in-edge from the leader"
            )));
        }
        Ok(())
    }

    /// Symmetric closure of the edge set.
    pub fn symmetrized(&self) -> Self {
        let mut neighbors = self.neighbors.clone();
        for (i, j) in self.edges() {
            neighbors[j].insert(i);
        }
        Self { neighbors }
    }

    /// Degrees of the symmetrized graph.
    pub fn degrees(&self) -> Vec<usize> {
        self.symmetrized()
            .neighbors
            .iter()
            .map(BTreeSet::len)
            .collect()
    }

    /// Whether the cooperative agents form a connected undirected subgraph.
    pub fn cooperative_connected(&self) -> bool {
        let sym = self.symmetrized();
        let leader = self.leader();
        let count = if self.agents() == 1 { 1 } else { leader };
        if count <= 1 {
            return true;
        }
        let mut seen = vec![false; count];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for &j in sym.neighbors(i) {
                if j < count && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Square Metropolis weight matrix over every agent of a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct MetropolisWeights {
    pub matrix: Vec<Vec<f64>>,
    /// Non-fatal findings, e.g. a disconnected cooperative subgraph.
    pub warnings: Vec<String>,
}

impl MetropolisWeights {
    /// Rows of the cooperative agents, i.e. every row but the leader's.
    pub fn cooperative_rows(&self) -> Vec<Vec<f64>> {
        let n = self.matrix.len();
        self.matrix[..n.saturating_sub(1)].to_vec()
    }
}

/// Metropolis weights `1/(1 + max(d_i, d_j))` on the symmetrized edges, the
/// remainder of each row on the diagonal, zero elsewhere.
pub fn metropolis_weights(
    graph: &AgentGraph,
    degrees: &[usize],
) -> Result<MetropolisWeights, SwarmError> {
    let n = graph.agents();
    if degrees.len() != n {
        return Err(SwarmError::Dimension {
            expected: n,
            found: degrees.len(),
            what: "degrees",
        });
    }
    let sym = graph.symmetrized();
    let mut matrix = vec![vec![0.0; n]; n];
    for i in 0..n {
        let mut off = 0.0;
        for &j in sym.neighbors(i) {
            let w = 1.0 / (1.0 + degrees[i].max(degrees[j]) as f64);
            matrix[i][j] = w;
            off += w;
        }
        matrix[i][i] = 1.0 - off;
    }
    let mut warnings = Vec::new();
    if !graph.cooperative_connected() {
        warnings.push("cooperative subgraph is disconnected".to_string());
    }
    Ok(MetropolisWeights { matrix, warnings })
}
