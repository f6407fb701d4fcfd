//! State-graph certificates for the Metropolis dynamics on the larger
//! instances that are still exhaustively enumerable.

use srp_core::lattice::CylinderLattice;
use srp_core::samplers::{cylinder_windows, verify_ergodicity, verify_open_ergodicity, MoveSet, OpenProblem};

#[test]
fn closed_dynamics_connected_on_wider_cylinders() {
    for (len, width) in [(3, 4), (2, 5)] {
        let lat = CylinderLattice::rect(len, width, 2, 1 << 10).unwrap();
        let w = cylinder_windows(&lat, &lat.graph().all_vertices(), MoveSet::Windowed);
        let cert = verify_ergodicity(lat.graph(), &w).unwrap();
        assert!(cert.connected(), "{len}x{width}: {cert:?}");
    }
}

#[test]
fn open_dynamics_connected_on_wider_cylinders() {
    for (len, width) in [(4, 3), (2, 5), (3, 4)] {
        let lat = CylinderLattice::rect(len, width, 2, 1 << 10).unwrap();
        let g = lat.graph();
        let problem = OpenProblem {
            domain: g.all_vertices(),
            source: lat.origin(),
            sinks: lat.hyperplane(len),
        };
        let w = cylinder_windows(&lat, &problem.domain, MoveSet::Windowed);
        let cert = verify_open_ergodicity(g, &problem, &w).unwrap();
        assert!(cert.connected(), "{len}x{width}: {cert:?}");
    }
}

#[test]
fn open_dynamics_connected_in_three_dimensions() {
    let lat = CylinderLattice::rect(2, 2, 3, 1 << 10).unwrap();
    let g = lat.graph();
    let problem = OpenProblem {
        domain: g.all_vertices(),
        source: lat.origin(),
        sinks: lat.hyperplane(2),
    };
    let w = cylinder_windows(&lat, &problem.domain, MoveSet::Windowed);
    assert!(verify_open_ergodicity(g, &problem, &w).unwrap().connected());
}
