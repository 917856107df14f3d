use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

use regsim_core::CommGraph;

fn algebraic_connectivity(g: &CommGraph) -> f64 {
    let n = g.n();
    let l = g.laplacian();
    let m = DMatrix::from_fn(n, n, |i, j| l.get(i, j) as f64);
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev[1]
}

#[test]
fn standard_topologies_are_connected() {
    for n in 3..25 {
        for g in [
            CommGraph::ring(n).unwrap(),
            CommGraph::path(n).unwrap(),
            CommGraph::complete(n).unwrap(),
        ] {
            assert!(algebraic_connectivity(&g) > 1e-9, "n = {n}");
        }
    }
    // ring(9): 2 - 2 cos(2 pi / 9)
    let l2 = algebraic_connectivity(&CommGraph::ring(9).unwrap());
    assert!((l2 - (2.0 - 2.0 * (2.0 * std::f64::consts::PI / 9.0).cos())).abs() < 1e-12);
}

#[test]
fn disconnected_edge_lists_are_rejected() {
    assert!(CommGraph::from_edges(4, &[(0, 1), (2, 3)]).is_err());
}

proptest! {
    #[test]
    fn every_accepted_edge_list_is_connected(
        n in 2usize..20,
        edges in prop::collection::vec((0usize..20, 0usize..20), 0..60),
    ) {
        let edges: Vec<(usize, usize)> = edges.into_iter().filter(|&(a, b)| a < n && b < n && a != b).collect();
        if let Ok(g) = CommGraph::from_edges(n, &edges) {
            prop_assert!(algebraic_connectivity(&g) > 1e-9);
        }
    }
}
