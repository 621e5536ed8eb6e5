//! Built-in "box-vehicle" sensor layout.
//!
//! Nodes sit on the vertices and edge midpoints of a 4.5 x 1.8 x 1.5 m box
//! (a 4.5 x 1.8 m rectangle in 2D) centered on the body origin. The order is
//! fixed, so the first K nodes of the layout are the K-sensor vehicle and
//! smaller vehicles are subsets of larger ones:
//!
//! * nodes 1-2 span one vertical rear edge, far from the origin, so a
//!   2-sensor body leaves the rotation about that edge unobservable;
//! * nodes 1-4 are non-coplanar;
//! * nodes 5-8 complete the vertices, then the 12 edge midpoints follow.

use crate::error::Result;
use crate::geometry::{check_supported_dim, Conformation};

pub const BOX_LENGTH: f64 = 4.5;
pub const BOX_WIDTH: f64 = 1.8;
pub const BOX_HEIGHT: f64 = 1.5;

const ORDER_3D: [[i8; 3]; 20] = [
    [-1, 1, -1],
    [-1, 1, 1],
    [1, -1, 1],
    [1, 1, -1],
    [1, 1, 1],
    [-1, -1, -1],
    [1, -1, -1],
    [-1, -1, 1],
    [0, 1, 1],
    [0, -1, -1],
    [1, 0, 1],
    [-1, 0, -1],
    [1, 1, 0],
    [-1, -1, 0],
    [0, -1, 1],
    [0, 1, -1],
    [-1, 0, 1],
    [1, 0, -1],
    [-1, 1, 0],
    [1, -1, 0],
];

const ORDER_2D: [[i8; 2]; 8] = [
    [-1, -1],
    [-1, 1],
    [1, 1],
    [1, -1],
    [0, 1],
    [0, -1],
    [-1, 0],
    [1, 0],
];

/// Number of nodes in the full built-in layout.
pub fn box_vehicle_size(dim: usize) -> usize {
    if dim == 2 {
        ORDER_2D.len()
    } else {
        ORDER_3D.len()
    }
}

/// The first `k` nodes of the box-vehicle layout (all of them when `k` is
/// `None`).
pub fn box_vehicle(dim: usize, k: Option<usize>) -> Result<Conformation> {
    check_supported_dim(dim)?;
    let half = [BOX_LENGTH / 2.0, BOX_WIDTH / 2.0, BOX_HEIGHT / 2.0];
    let signs: Vec<Vec<i8>> = if dim == 2 {
        ORDER_2D.iter().map(|s| s.to_vec()).collect()
    } else {
        ORDER_3D.iter().map(|s| s.to_vec()).collect()
    };
    let k = k.unwrap_or(signs.len());
    if k == 0 || k > signs.len() {
        return Err(crate::RblError::invalid(format!(
            "box vehicle has {} nodes in {dim}D, asked for {k}",
            signs.len()
        )));
    }
    let points: Vec<Vec<f64>> = signs[..k]
        .iter()
        .map(|s| s.iter().zip(half).map(|(&sg, h)| sg as f64 * h).collect())
        .collect();
    let labels = signs[..k]
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let kind = if s.contains(&0) { "edge" } else { "vertex" };
            format!("{kind}{i}")
        })
        .collect();
    Conformation::from_points(dim, &points)?.with_labels(labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_are_distinct_and_on_the_box() {
        for dim in [2, 3] {
            let c = box_vehicle(dim, None).unwrap();
            let n = c.num_nodes();
            for i in 0..n {
                for j in 0..i {
                    assert!((c.node(i) - c.node(j)).norm() > 0.5);
                }
            }
            assert!(c.center().norm() < 1e-12);
        }
    }

    #[test]
    fn prefixes_are_nested() {
        let big = box_vehicle(3, Some(14)).unwrap();
        let small = box_vehicle(3, Some(6)).unwrap();
        assert_eq!(big.coords().columns(0, 6), small.coords().columns(0, 6));
    }

    #[test]
    fn four_nodes_span_space() {
        assert!(box_vehicle(3, Some(4)).unwrap().spans_space());
        assert!(!box_vehicle(3, Some(3)).unwrap().spans_space());
    }

    #[test]
    fn first_pair_is_off_center() {
        let c = box_vehicle(3, Some(2)).unwrap();
        // line through both nodes misses the origin by the rear-corner offset
        let d = (BOX_LENGTH.powi(2) + BOX_WIDTH.powi(2)).sqrt() / 2.0;
        assert!((c.node(0).rows(0, 2).norm() - d).abs() < 1e-12);
        assert_eq!(c.node(0).rows(0, 2), c.node(1).rows(0, 2));
    }

    #[test]
    fn too_many_nodes_rejected() {
        assert!(box_vehicle(2, Some(9)).is_err());
        assert!(box_vehicle(3, Some(0)).is_err());
    }
}
