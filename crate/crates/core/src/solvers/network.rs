//! Synchronous message exchange over a [`CommGraph`].
//!
//! One exchange is a barrier-separated sub-round: every node publishes a
//! fixed-width message computed from its own state, then every node updates
//! its own state from an [`Inbox`] that exposes only its own message and the
//! messages of its graph neighbors. Nodes never see each other's states.

use rayon::prelude::*;

use crate::graph::CommGraph;

/// How node updates inside one exchange are executed. Both modes produce
/// bit-identical results.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Execution {
    #[default]
    Sequential,
    Parallel,
}

/// Messages visible to one node during one exchange.
pub struct Inbox<'a> {
    node: usize,
    width: usize,
    neighbors: &'a [usize],
    board: &'a [f64],
}

impl<'a> Inbox<'a> {
    pub fn node(&self) -> usize {
        self.node
    }

    pub fn degree(&self) -> usize {
        self.neighbors.len()
    }

    fn slot(&self, j: usize) -> &'a [f64] {
        &self.board[j * self.width..(j + 1) * self.width]
    }

    /// The message this node published.
    pub fn own(&self) -> &'a [f64] {
        self.slot(self.node)
    }

    /// Message from neighbor `j`.
    ///
    /// Panics when `j` is not adjacent to this node: reading it would break
    /// the locality contract.
    pub fn from(&self, j: usize) -> &'a [f64] {
        assert!(
            self.neighbors.binary_search(&j).is_ok(),
            "node {} read a message from non-neighbor {}",
            self.node,
            j
        );
        self.slot(j)
    }

    /// Neighbor messages in ascending neighbor order.
    pub fn neighbors(&self) -> impl Iterator<Item = (usize, &'a [f64])> + '_ {
        self.neighbors.iter().map(move |&j| (j, self.slot(j)))
    }

    /// `(L x)_i` for message component `k`.
    pub fn laplacian(&self, k: usize) -> f64 {
        let mut acc = self.degree() as f64 * self.own()[k];
        for (_, m) in self.neighbors() {
            acc -= m[k];
        }
        acc
    }

    /// Metropolis-weighted average of component `k`: weight
    /// `1 / (1 + max(d_i, d_j))` per neighbor, the remainder on the node
    /// itself. Component `degree` of every message carries the sender's
    /// degree. The weights form a symmetric, doubly stochastic matrix; on a
    /// regular graph they are uniform over the closed neighborhood.
    pub fn metropolis_mean(&self, k: usize, degree: usize) -> f64 {
        let own = self.own();
        let mut acc = own[k];
        for (_, m) in self.neighbors() {
            let w = 1.0 / (1.0 + own[degree].max(m[degree]));
            acc += w * (m[k] - own[k]);
        }
        acc
    }
}

/// Runs exchanges for a fixed graph and counts them.
pub struct Network<'g> {
    graph: &'g CommGraph,
    execution: Execution,
    board: Vec<f64>,
    exchanges: usize,
}

impl<'g> Network<'g> {
    pub fn new(graph: &'g CommGraph, execution: Execution) -> Self {
        Self {
            graph,
            execution,
            board: Vec::new(),
            exchanges: 0,
        }
    }

    pub fn graph(&self) -> &'g CommGraph {
        self.graph
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    /// Number of exchanges performed so far.
    pub fn exchanges(&self) -> usize {
        self.exchanges
    }

    /// One synchronous sub-round with messages of `width` components.
    pub fn exchange<S, P, U>(&mut self, states: &mut [S], width: usize, publish: P, update: U)
    where
        S: Send + Sync,
        P: Fn(&S, &mut [f64]) + Sync,
        U: Fn(&mut S, &Inbox<'_>) + Sync,
    {
        let n = self.graph.n();
        assert_eq!(states.len(), n, "one state per graph node");
        self.board.clear();
        self.board.resize(n * width, 0.0);
        for (state, slot) in states.iter().zip(self.board.chunks_mut(width.max(1))) {
            publish(state, &mut slot[..width]);
        }
        let graph = self.graph;
        let board = self.board.as_slice();
        let run = |(i, state): (usize, &mut S)| {
            let inbox = Inbox {
                node: i,
                width,
                neighbors: graph.neighbors_unchecked(i),
                board,
            };
            update(state, &inbox);
        };
        match self.execution {
            Execution::Sequential => states.iter_mut().enumerate().for_each(run),
            Execution::Parallel => states.par_iter_mut().enumerate().for_each(run),
        }
        self.exchanges += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inbox_laplacian_matches_matrix() {
        let g = CommGraph::ring(5).unwrap();
        let x = [1.0, -2.0, 0.5, 3.0, 4.0];
        let expected = g.laplacian().apply(&x);
        let mut states: Vec<(f64, f64)> = x.iter().map(|&v| (v, 0.0)).collect();
        let mut net = Network::new(&g, Execution::Sequential);
        net.exchange(
            &mut states,
            1,
            |s, out| out[0] = s.0,
            |s, inbox| s.1 = inbox.laplacian(0),
        );
        for (s, e) in states.iter().zip(expected) {
            assert_eq!(s.1, e);
        }
        assert_eq!(net.exchanges(), 1);
    }

    #[test]
    #[should_panic(expected = "non-neighbor")]
    fn reading_a_non_neighbor_panics() {
        let g = CommGraph::ring(5).unwrap();
        let mut states = vec![0.0f64; 5];
        let mut net = Network::new(&g, Execution::Sequential);
        net.exchange(
            &mut states,
            1,
            |s, out| out[0] = *s,
            |s, inbox| {
                *s = inbox.from((inbox.node() + 2) % 5)[0];
            },
        );
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let g = CommGraph::ring(12).unwrap();
        let init: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).sin()).collect();
        let run = |mode| {
            let mut s = init.clone();
            let mut net = Network::new(&g, mode);
            for _ in 0..50 {
                net.exchange(
                    &mut s,
                    1,
                    |v, out| out[0] = *v,
                    |v, inbox| *v = v.max(inbox.laplacian(0)),
                );
            }
            s
        };
        let a = run(Execution::Sequential);
        let b = run(Execution::Parallel);
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
