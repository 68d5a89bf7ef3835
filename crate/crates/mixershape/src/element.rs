//! Reference-element machinery for six-node quadratic triangles with
//! embedded linear corner interpolation (the Taylor-Hood pair).
//!
//! Local node order is [v0, v1, v2, m01, m12, m20]: three corners in
//! counterclockwise order followed by the midside nodes of edges 0-1, 1-2,
//! and 2-0. Reference coordinates are (xi, eta) on the unit triangle with
//! v0 at the origin.

/// Quadratic shape functions at a reference point.
pub fn p2_shapes(xi: f64, eta: f64) -> [f64; 6] {
    let zeta = 1.0 - xi - eta;
    [
        zeta * (2.0 * zeta - 1.0),
        xi * (2.0 * xi - 1.0),
        eta * (2.0 * eta - 1.0),
        4.0 * xi * zeta,
        4.0 * xi * eta,
        4.0 * eta * zeta,
    ]
}

/// Reference-coordinate gradients of the quadratic shape functions.
pub fn p2_ref_gradients(xi: f64, eta: f64) -> [[f64; 2]; 6] {
    let zeta = 1.0 - xi - eta;
    [
        [1.0 - 4.0 * zeta, 1.0 - 4.0 * zeta],
        [4.0 * xi - 1.0, 0.0],
        [0.0, 4.0 * eta - 1.0],
        [4.0 * (zeta - xi), -4.0 * xi],
        [4.0 * eta, 4.0 * xi],
        [-4.0 * eta, 4.0 * (zeta - eta)],
    ]
}

/// Linear shape functions at a reference point.
pub fn p1_shapes(xi: f64, eta: f64) -> [f64; 3] {
    [1.0 - xi - eta, xi, eta]
}

/// Reference-coordinate gradients of the linear shape functions.
pub const P1_REF_GRADIENTS: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

/// Geometry and basis data of one element at one reference point.
#[derive(Clone, Copy, Debug)]
pub struct ElementGeometry {
    /// Physical image of the reference point.
    pub point: [f64; 2],
    /// Jacobian of the isoparametric map, row r column c = dx_r/dxi_c.
    pub jacobian: [[f64; 2]; 2],
    /// Jacobian determinant of the isoparametric map.
    pub det_j: f64,
    pub shapes: [f64; 6],
    /// Physical-coordinate gradients of the quadratic shapes.
    pub grads: [[f64; 2]; 6],
    pub p1_shapes: [f64; 3],
    /// Physical-coordinate gradients of the linear shapes.
    pub p1_grads: [[f64; 2]; 3],
}

/// Evaluate the isoparametric map and both bases at (xi, eta).
pub fn eval_geometry(coords: &[[f64; 2]; 6], xi: f64, eta: f64) -> ElementGeometry {
    let shapes = p2_shapes(xi, eta);
    let ref_grads = p2_ref_gradients(xi, eta);

    let mut point = [0.0; 2];
    let mut j = [[0.0; 2]; 2];
    for i in 0..6 {
        for r in 0..2 {
            point[r] += coords[i][r] * shapes[i];
            j[r][0] += coords[i][r] * ref_grads[i][0];
            j[r][1] += coords[i][r] * ref_grads[i][1];
        }
    }
    let det_j = j[0][0] * j[1][1] - j[0][1] * j[1][0];

    let to_physical = |g: [f64; 2]| -> [f64; 2] {
        [
            (j[1][1] * g[0] - j[1][0] * g[1]) / det_j,
            (-j[0][1] * g[0] + j[0][0] * g[1]) / det_j,
        ]
    };

    let mut grads = [[0.0; 2]; 6];
    for i in 0..6 {
        grads[i] = to_physical(ref_grads[i]);
    }
    let mut p1_grads = [[0.0; 2]; 3];
    for i in 0..3 {
        p1_grads[i] = to_physical(P1_REF_GRADIENTS[i]);
    }

    ElementGeometry {
        point,
        jacobian: j,
        det_j,
        shapes,
        grads,
        p1_shapes: p1_shapes(xi, eta),
        p1_grads,
    }
}

/// Physical image of a reference point under the isoparametric map.
pub fn map_point(coords: &[[f64; 2]; 6], xi: f64, eta: f64) -> [f64; 2] {
    let shapes = p2_shapes(xi, eta);
    let mut point = [0.0; 2];
    for i in 0..6 {
        point[0] += coords[i][0] * shapes[i];
        point[1] += coords[i][1] * shapes[i];
    }
    point
}

/// Invert the isoparametric map by Newton iteration.
///
/// Returns the reference coordinates whose image is `target`, or None when
/// the iteration does not converge. The result may lie slightly outside the
/// reference triangle; containment is the caller's decision.
pub fn invert_mapping(coords: &[[f64; 2]; 6], target: [f64; 2]) -> Option<[f64; 2]> {
    let scale = 1.0 + target[0].abs() + target[1].abs();
    let mut xi = 1.0 / 3.0;
    let mut eta = 1.0 / 3.0;
    for _ in 0..30 {
        let shapes = p2_shapes(xi, eta);
        let ref_grads = p2_ref_gradients(xi, eta);
        let mut point = [0.0; 2];
        let mut j = [[0.0; 2]; 2];
        for i in 0..6 {
            for r in 0..2 {
                point[r] += coords[i][r] * shapes[i];
                j[r][0] += coords[i][r] * ref_grads[i][0];
                j[r][1] += coords[i][r] * ref_grads[i][1];
            }
        }
        let rx = point[0] - target[0];
        let ry = point[1] - target[1];
        if rx.abs() + ry.abs() <= 1e-13 * scale {
            return Some([xi, eta]);
        }
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.abs() < 1e-300 {
            return None;
        }
        xi -= (j[1][1] * rx - j[0][1] * ry) / det;
        eta -= (-j[1][0] * rx + j[0][0] * ry) / det;
        if !xi.is_finite() || !eta.is_finite() {
            return None;
        }
        // Keep the iterate near the reference triangle so that a point in a
        // neighboring element does not drag the iteration far away.
        xi = xi.clamp(-1.0, 2.0);
        eta = eta.clamp(-1.0, 2.0);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const REF_NODES: [[f64; 2]; 6] = [
        [0.0, 0.0],
        [1.0, 0.0],
        [0.0, 1.0],
        [0.5, 0.0],
        [0.5, 0.5],
        [0.0, 0.5],
    ];

    #[test]
    fn p2_shapes_have_nodal_delta_property() {
        for (j, node) in REF_NODES.iter().enumerate() {
            let shapes = p2_shapes(node[0], node[1]);
            for (i, s) in shapes.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(*s, expected, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn shape_functions_partition_unity() {
        for &(xi, eta) in &[(0.2, 0.3), (0.0, 0.0), (0.5, 0.5), (0.1, 0.05)] {
            let total: f64 = p2_shapes(xi, eta).iter().sum();
            assert_relative_eq!(total, 1.0, epsilon = 1e-14);
            let total_p1: f64 = p1_shapes(xi, eta).iter().sum();
            assert_relative_eq!(total_p1, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn p2_gradients_match_finite_differences() {
        let h = 1e-6;
        for &(xi, eta) in &[(0.25, 0.3), (0.1, 0.1), (0.4, 0.5)] {
            let grads = p2_ref_gradients(xi, eta);
            let plus_xi = p2_shapes(xi + h, eta);
            let minus_xi = p2_shapes(xi - h, eta);
            let plus_eta = p2_shapes(xi, eta + h);
            let minus_eta = p2_shapes(xi, eta - h);
            for i in 0..6 {
                let fd_xi = (plus_xi[i] - minus_xi[i]) / (2.0 * h);
                let fd_eta = (plus_eta[i] - minus_eta[i]) / (2.0 * h);
                assert_relative_eq!(grads[i][0], fd_xi, epsilon = 1e-8);
                assert_relative_eq!(grads[i][1], fd_eta, epsilon = 1e-8);
            }
        }
    }

    fn straight_triangle(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> [[f64; 2]; 6] {
        let mid = |p: [f64; 2], q: [f64; 2]| [(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0];
        [a, b, c, mid(a, b), mid(b, c), mid(c, a)]
    }

    #[test]
    fn straight_element_jacobian_is_twice_area() {
        let coords = straight_triangle([1.0, 0.0], [3.0, 1.0], [1.5, 2.0]);
        let geo = eval_geometry(&coords, 0.3, 0.2);
        // Area by the shoelace formula: 0.5 * |(b-a) x (c-a)|.
        let area = 0.5 * ((3.0 - 1.0) * (2.0 - 0.0) - (1.0 - 0.0) * (1.5 - 1.0));
        assert_relative_eq!(geo.det_j, 2.0 * area, epsilon = 1e-13);
    }

    #[test]
    fn physical_gradients_reproduce_linear_fields() {
        let coords = straight_triangle([0.0, 0.0], [2.0, 0.5], [0.5, 1.5]);
        // Nodal values of f(x, y) = 3x - 2y + 1; its P2 interpolant is exact.
        let nodal: Vec<f64> = coords.iter().map(|p| 3.0 * p[0] - 2.0 * p[1] + 1.0).collect();
        let geo = eval_geometry(&coords, 0.2, 0.35);
        let mut grad = [0.0; 2];
        let mut value = 0.0;
        for i in 0..6 {
            value += nodal[i] * geo.shapes[i];
            grad[0] += nodal[i] * geo.grads[i][0];
            grad[1] += nodal[i] * geo.grads[i][1];
        }
        let p = geo.point;
        assert_relative_eq!(value, 3.0 * p[0] - 2.0 * p[1] + 1.0, epsilon = 1e-12);
        assert_relative_eq!(grad[0], 3.0, epsilon = 1e-12);
        assert_relative_eq!(grad[1], -2.0, epsilon = 1e-12);
    }

    #[test]
    fn inverse_map_recovers_reference_point_on_curved_element() {
        // Curve the 1-2 edge midside off the chord to exercise the
        // isoparametric case.
        let mut coords = straight_triangle([1.0, 0.0], [2.0, 0.0], [1.0, 1.0]);
        coords[4] = [1.55, 0.55];
        let target = map_point(&coords, 0.3, 0.4);
        let found = invert_mapping(&coords, target).expect("Newton should converge");
        assert_relative_eq!(found[0], 0.3, epsilon = 1e-9);
        assert_relative_eq!(found[1], 0.4, epsilon = 1e-9);
    }
}
