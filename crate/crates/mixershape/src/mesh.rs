//! Structured isoparametric meshes of the annular mixer domain.
//!
//! The domain between the inner curve r(phi) and the outer circle |x| = R is
//! covered by mapping a uniform (phi, rho) grid through
//! x(phi, rho) = ((1 - rho) r(phi) + rho R) (cos phi, sin phi),
//! splitting each quad into two triangles, and adding midside nodes for the
//! quadratic basis. Midside nodes on the two physical boundaries are placed
//! on the true curves; all interior edges stay straight.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::io::{self, Write};

use thiserror::Error;

use crate::element;
use crate::quad::{self, TRIANGLE_DEGREE_4};

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("target element size {0} must be positive, finite, and smaller than the outer radius")]
    InvalidTargetSize(f64),
    #[error("outer radius {0} must be positive and finite")]
    InvalidOuterRadius(f64),
    #[error(
        "invalid geometry: inner radius {radius} at angle {angle} must lie in (0, {outer})"
    )]
    InvalidGeometry { angle: f64, radius: f64, outer: f64 },
    #[error("mesh inversion: element {element} has non-positive Jacobian {det_j}")]
    MeshInversion { element: usize, det_j: f64 },
    #[error("point ({x}, {y}) lies outside the meshed domain")]
    PointOutsideDomain { x: f64, y: f64 },
    #[error("ball at ({x}, {y}) with radius {radius} is not contained in the meshed domain")]
    BallOutsideDomain { x: f64, y: f64, radius: f64 },
}

/// Conforming quadratic-triangle mesh of the annular domain.
///
/// Nodes live on a periodic fine grid with 2 * n_phi columns and
/// 2 * n_rho + 1 rows; node index = row * (2 * n_phi) + column. Elements are
/// six-node triangles in the local order [v0, v1, v2, m01, m12, m20].
#[derive(Clone, Debug)]
pub struct AnnulusMesh {
    nodes: Vec<[f64; 2]>,
    elements: Vec<[usize; 6]>,
    inner_nodes: Vec<usize>,
    outer_nodes: Vec<usize>,
    corner: Vec<bool>,
    n_phi: usize,
    n_rho: usize,
    outer_radius: f64,
    h_target: f64,
}

/// One quadrature point of a ball subregion, in element-local coordinates.
#[derive(Clone, Copy, Debug)]
pub struct BallPoint {
    pub element: usize,
    pub xi: [f64; 2],
    pub weight: f64,
}

/// Quadrature covering a sensor ball, produced by [`AnnulusMesh::locate_ball`].
#[derive(Clone, Debug)]
pub struct BallQuadrature {
    pub points: Vec<BallPoint>,
    /// Sum of the weights; equals the ball area up to rule roundoff.
    pub weight_sum: f64,
}

/// A boundary edge of one element, identified by the local corner indices of
/// its endpoints (the midside between them lies on the same edge).
#[derive(Clone, Copy, Debug)]
pub struct BoundaryEdge {
    pub element: usize,
    pub start_local: usize,
    pub end_local: usize,
}

/// Generate a mesh of the domain between `inner_radius` and the circle of
/// radius `outer_radius`, with nominal element size `h_target`.
pub fn generate_mesh(
    inner_radius: &dyn Fn(f64) -> f64,
    outer_radius: f64,
    h_target: f64,
) -> Result<AnnulusMesh, MeshError> {
    if !outer_radius.is_finite() || outer_radius <= 0.0 {
        return Err(MeshError::InvalidOuterRadius(outer_radius));
    }
    if !h_target.is_finite() || h_target <= 0.0 || h_target >= outer_radius {
        return Err(MeshError::InvalidTargetSize(h_target));
    }

    // Angular count: at least the outer arc length over h, rounded up to a
    // multiple of four so quarter-turn rotations map the grid onto itself.
    let n_phi_min = (TAU * outer_radius / h_target).ceil() as usize;
    let n_phi = n_phi_min.div_ceil(4) * 4;
    let fine_phi = 2 * n_phi;
    let delta_fine = TAU / fine_phi as f64;

    let mut radii = Vec::with_capacity(fine_phi);
    let mut min_radius = f64::INFINITY;
    for i in 0..fine_phi {
        let angle = i as f64 * delta_fine;
        let radius = inner_radius(angle);
        if !radius.is_finite() || radius <= 0.0 || radius >= outer_radius {
            return Err(MeshError::InvalidGeometry {
                angle,
                radius,
                outer: outer_radius,
            });
        }
        min_radius = min_radius.min(radius);
        radii.push(radius);
    }

    let n_rho = (((outer_radius - min_radius) / h_target).ceil() as usize).max(2);
    let fine_rho = 2 * n_rho;

    // First pass: every grid point at its mapped position.
    let mut nodes = vec![[0.0; 2]; (fine_rho + 1) * fine_phi];
    for j in 0..=fine_rho {
        let rho = j as f64 / fine_rho as f64;
        for i in 0..fine_phi {
            let angle = i as f64 * delta_fine;
            let radius = (1.0 - rho) * radii[i] + rho * outer_radius;
            nodes[j * fine_phi + i] = [radius * angle.cos(), radius * angle.sin()];
        }
    }

    // Second pass: interior midside nodes move to the midpoints of their
    // edge endpoints so interior edges are straight; boundary-row angular
    // midsides keep their mapped (on-curve) positions.
    let idx = |i: isize, j: usize| -> usize { j * fine_phi + (i.rem_euclid(fine_phi as isize)) as usize };
    let mut positions = nodes.clone();
    for j in 0..=fine_rho {
        for i in 0..fine_phi {
            let ii = i as isize;
            let target = match (i % 2, j % 2) {
                (1, 0) if j != 0 && j != fine_rho => Some((idx(ii - 1, j), idx(ii + 1, j))),
                (0, 1) => Some((idx(ii, j - 1), idx(ii, j + 1))),
                (1, 1) => Some((idx(ii - 1, j - 1), idx(ii + 1, j + 1))),
                _ => None,
            };
            if let Some((a, b)) = target {
                positions[j * fine_phi + i] = [
                    0.5 * (nodes[a][0] + nodes[b][0]),
                    0.5 * (nodes[a][1] + nodes[b][1]),
                ];
            }
        }
    }
    let nodes = positions;

    // Each coarse cell becomes two counterclockwise triangles split along
    // the (a, b) -> (a + 2, b + 2) diagonal.
    let mut elements = Vec::with_capacity(2 * n_phi * n_rho);
    for jc in 0..n_rho {
        for ic in 0..n_phi {
            let a = 2 * ic as isize;
            let b = 2 * jc;
            elements.push([
                idx(a, b),
                idx(a + 2, b + 2),
                idx(a + 2, b),
                idx(a + 1, b + 1),
                idx(a + 2, b + 1),
                idx(a + 1, b),
            ]);
            elements.push([
                idx(a, b),
                idx(a, b + 2),
                idx(a + 2, b + 2),
                idx(a, b + 1),
                idx(a + 1, b + 2),
                idx(a + 1, b + 1),
            ]);
        }
    }

    let inner_nodes: Vec<usize> = (0..fine_phi).collect();
    let outer_nodes: Vec<usize> = (0..fine_phi).map(|i| fine_rho * fine_phi + i).collect();
    let corner: Vec<bool> = (0..nodes.len())
        .map(|n| (n % fine_phi) % 2 == 0 && (n / fine_phi) % 2 == 0)
        .collect();

    let mesh = AnnulusMesh {
        nodes,
        elements,
        inner_nodes,
        outer_nodes,
        corner,
        n_phi,
        n_rho,
        outer_radius,
        h_target,
    };

    for e in 0..mesh.elements.len() {
        let coords = mesh.elem_coords(e);
        for pt in &TRIANGLE_DEGREE_4 {
            let det_j = element::eval_geometry(&coords, pt.xi, pt.eta).det_j;
            if det_j <= 0.0 {
                return Err(MeshError::MeshInversion { element: e, det_j });
            }
        }
    }

    Ok(mesh)
}

impl AnnulusMesh {
    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn elements(&self) -> &[[usize; 6]] {
        &self.elements
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    /// Node indices on the inner boundary curve.
    pub fn inner_nodes(&self) -> &[usize] {
        &self.inner_nodes
    }

    /// Node indices on the outer circle.
    pub fn outer_nodes(&self) -> &[usize] {
        &self.outer_nodes
    }

    /// Whether a node is an element corner (a linear-basis node).
    pub fn is_corner(&self, node: usize) -> bool {
        self.corner[node]
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn n_rho(&self) -> usize {
        self.n_rho
    }

    pub fn outer_radius(&self) -> f64 {
        self.outer_radius
    }

    pub fn h_target(&self) -> f64 {
        self.h_target
    }

    /// Physical coordinates of one element's six nodes.
    pub fn elem_coords(&self, e: usize) -> [[f64; 2]; 6] {
        let el = &self.elements[e];
        [
            self.nodes[el[0]],
            self.nodes[el[1]],
            self.nodes[el[2]],
            self.nodes[el[3]],
            self.nodes[el[4]],
            self.nodes[el[5]],
        ]
    }

    /// Total mesh area by isoparametric quadrature.
    pub fn area(&self) -> f64 {
        let mut total = 0.0;
        for e in 0..self.elements.len() {
            let coords = self.elem_coords(e);
            for pt in &TRIANGLE_DEGREE_4 {
                total += pt.weight * element::eval_geometry(&coords, pt.xi, pt.eta).det_j;
            }
        }
        total
    }

    /// Outer-boundary edges (each belongs to exactly one element).
    pub fn outer_edges(&self) -> Vec<BoundaryEdge> {
        // The second triangle of each outermost cell carries the outer edge
        // between its local corners 1 and 2.
        let top = self.n_rho - 1;
        (0..self.n_phi)
            .map(|ic| BoundaryEdge {
                element: 2 * (top * self.n_phi + ic) + 1,
                start_local: 1,
                end_local: 2,
            })
            .collect()
    }

    /// Inner-boundary edges (each belongs to exactly one element).
    pub fn inner_edges(&self) -> Vec<BoundaryEdge> {
        // The first triangle of each innermost cell carries the inner edge
        // between its local corners 2 and 0.
        (0..self.n_phi)
            .map(|ic| BoundaryEdge {
                element: 2 * ic,
                start_local: 2,
                end_local: 0,
            })
            .collect()
    }

    /// Find the element containing `point` and the reference coordinates of
    /// the point within it.
    pub fn locate_point(&self, point: [f64; 2]) -> Result<(usize, [f64; 2]), MeshError> {
        let fine_phi = 2 * self.n_phi;
        let radius = point[0].hypot(point[1]);
        let angle = point[1].atan2(point[0]).rem_euclid(TAU);

        // Candidate cell from the structured layout: angular slot from the
        // angle, radial slot from the normalized radial position.
        let delta_fine = TAU / fine_phi as f64;
        let slot = (angle / delta_fine) as usize % fine_phi;
        let next = (slot + 1) % fine_phi;
        let r0 = self.nodes[slot][0].hypot(self.nodes[slot][1]);
        let r1 = self.nodes[next][0].hypot(self.nodes[next][1]);
        let frac = (angle / delta_fine - slot as f64).clamp(0.0, 1.0);
        let inner = (1.0 - frac) * r0 + frac * r1;
        let rho = ((radius - inner) / (self.outer_radius - inner)).clamp(0.0, 1.0);

        let ic0 = ((angle / (TAU / self.n_phi as f64)) as isize).rem_euclid(self.n_phi as isize);
        let jc0 = ((rho * self.n_rho as f64) as isize).min(self.n_rho as isize - 1);

        let mut offsets: Vec<(isize, isize)> = Vec::with_capacity(25);
        for dj in -2isize..=2 {
            for di in -2isize..=2 {
                offsets.push((di, dj));
            }
        }
        offsets.sort_by_key(|&(di, dj)| di.abs() + dj.abs());

        const TOL: f64 = 1e-9;
        for (di, dj) in offsets {
            let jc = jc0 + dj;
            if jc < 0 || jc >= self.n_rho as isize {
                continue;
            }
            let ic = (ic0 + di).rem_euclid(self.n_phi as isize);
            let cell = jc as usize * self.n_phi + ic as usize;
            for e in [2 * cell, 2 * cell + 1] {
                let coords = self.elem_coords(e);
                if let Some([xi, eta]) = element::invert_mapping(&coords, point) {
                    if xi >= -TOL && eta >= -TOL && xi + eta <= 1.0 + TOL {
                        return Ok((e, [xi, eta]));
                    }
                }
            }
        }
        Err(MeshError::PointOutsideDomain {
            x: point[0],
            y: point[1],
        })
    }

    /// Quadrature over the ball B(center, radius), as element-local points.
    ///
    /// The rule is a polar product: Gauss-Legendre in the radial direction
    /// crossed with a midpoint rule in angle, so the weights sum to the ball
    /// area exactly up to roundoff regardless of how elements cut the ball.
    pub fn locate_ball(
        &self,
        center: [f64; 2],
        radius: f64,
    ) -> Result<BallQuadrature, MeshError> {
        let ball_err = || MeshError::BallOutsideDomain {
            x: center[0],
            y: center[1],
            radius,
        };
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(ball_err());
        }
        if center[0].hypot(center[1]) + radius > self.outer_radius {
            return Err(ball_err());
        }

        let n_radial = ((4.0 * radius / self.h_target).ceil() as usize).max(6);
        let n_angular = ((8.0 * TAU * 0.5 * radius / self.h_target).ceil() as usize).max(24);
        let radial = quad::gauss_legendre_on(0.0, radius, n_radial);
        let slice = TAU / n_angular as f64;

        let mut points = Vec::with_capacity(n_radial * n_angular);
        let mut weight_sum = 0.0;
        for m in 0..n_angular {
            let alpha = (m as f64 + 0.5) * slice;
            let (sin_a, cos_a) = alpha.sin_cos();
            for &(r, w) in &radial {
                let p = [center[0] + r * cos_a, center[1] + r * sin_a];
                let (elem, xi) = self.locate_point(p).map_err(|_| ball_err())?;
                let weight = w * r * slice;
                weight_sum += weight;
                points.push(BallPoint {
                    element: elem,
                    xi,
                    weight,
                });
            }
        }
        Ok(BallQuadrature { points, weight_sum })
    }

    /// Write the mesh in the plain-text exchange format: a `nodes N elements E`
    /// header, N coordinate lines, E connectivity lines (zero-based), then one
    /// line of inner and one line of outer boundary node indices.
    pub fn write_text(&self, w: &mut impl Write) -> io::Result<()> {
        writeln!(w, "nodes {} elements {}", self.nodes.len(), self.elements.len())?;
        for n in &self.nodes {
            writeln!(w, "{} {}", n[0], n[1])?;
        }
        for el in &self.elements {
            writeln!(w, "{} {} {} {} {} {}", el[0], el[1], el[2], el[3], el[4], el[5])?;
        }
        let join = |ids: &[usize]| {
            ids.iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        writeln!(w, "{}", join(&self.inner_nodes))?;
        writeln!(w, "{}", join(&self.outer_nodes))?;
        Ok(())
    }

    /// Interior edges must be shared by exactly two elements and boundary
    /// edges by exactly one, with a consistent midside node. Used by tests;
    /// exposed because it is also a cheap structural self-check.
    pub fn check_edge_conformity(&self) -> bool {
        let mut edges: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        for el in &self.elements {
            for (a, b, m) in [(0, 1, 3), (1, 2, 4), (2, 0, 5)] {
                let key = (el[a].min(el[b]), el[a].max(el[b]));
                let entry = edges.entry(key).or_insert((0, el[m]));
                entry.0 += 1;
                if entry.1 != el[m] {
                    return false;
                }
            }
        }
        let boundary_count = self.inner_nodes.len() + self.outer_nodes.len();
        let mut boundary_edges = 0;
        for (_, (count, _)) in edges {
            match count {
                1 => boundary_edges += 1,
                2 => {}
                _ => return false,
            }
        }
        // Each boundary has n_phi coarse edges; fine midside bookkeeping is
        // already covered by the shared-midside check above.
        boundary_edges == 2 * self.n_phi && boundary_count == 4 * self.n_phi
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::ClampParams;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn unit_annulus(h: f64) -> AnnulusMesh {
        generate_mesh(&|_| 1.0, 2.0, h).unwrap()
    }

    fn wobbly_radius() -> impl Fn(f64) -> f64 {
        let clamp = ClampParams::new(0.5, 1.5, 0.1).unwrap();
        move |phi: f64| clamp.apply(1.0 + 0.3 * phi.cos())
    }

    #[test]
    fn annulus_area_matches_closed_form() {
        let mesh = unit_annulus(0.1);
        assert_relative_eq!(mesh.area(), 3.0 * PI, max_relative = 1e-3);

        let wide = generate_mesh(&|_| 1.5, 2.0, 0.1).unwrap();
        assert_relative_eq!(wide.area(), 1.75 * PI, max_relative = 1e-3);
    }

    #[test]
    fn area_decreases_when_inner_radius_grows() {
        let small = generate_mesh(&|_| 1.0, 2.0, 0.15).unwrap();
        let large = generate_mesh(&|_| 1.2, 2.0, 0.15).unwrap();
        assert!(large.area() < small.area());
    }

    #[test]
    fn resolution_honors_target_size() {
        let mesh = unit_annulus(0.1);
        assert!(mesh.n_phi() >= (TAU * 2.0 / 0.1).ceil() as usize);
        assert_eq!(mesh.n_phi() % 4, 0);
        assert!(mesh.n_rho() >= ((2.0_f64 - 1.0) / 0.1).ceil() as usize);
        assert_eq!(mesh.num_nodes(), 2 * mesh.n_phi() * (2 * mesh.n_rho() + 1));
        assert_eq!(mesh.num_elements(), 2 * mesh.n_phi() * mesh.n_rho());
    }

    #[test]
    fn boundary_nodes_sit_on_their_curves() {
        let radius_fn = wobbly_radius();
        let mesh = generate_mesh(&radius_fn, 2.0, 0.08).unwrap();
        for &i in mesh.inner_nodes() {
            let p = mesh.nodes()[i];
            let angle = p[1].atan2(p[0]).rem_euclid(TAU);
            let expected = radius_fn(angle);
            assert!(
                (p[0].hypot(p[1]) - expected).abs() <= 1e-8 * expected,
                "inner node {} off-curve",
                i
            );
        }
        for &i in mesh.outer_nodes() {
            let p = mesh.nodes()[i];
            assert!((p[0].hypot(p[1]) - 2.0).abs() <= 2e-8);
        }
    }

    #[test]
    fn curved_mesh_has_positive_jacobians_and_conforms() {
        let mesh = generate_mesh(&wobbly_radius(), 2.0, 0.06).unwrap();
        assert!(mesh.check_edge_conformity());
        // Jacobian positivity is already enforced during generation; spot
        // check a few elements at off-rule points as well.
        for e in (0..mesh.num_elements()).step_by(97) {
            let coords = mesh.elem_coords(e);
            for &(xi, eta) in &[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0 / 3.0, 1.0 / 3.0)] {
                assert!(element::eval_geometry(&coords, xi, eta).det_j > 0.0);
            }
        }
    }

    #[test]
    fn rejects_invalid_geometry() {
        assert!(matches!(
            generate_mesh(&|_| 2.5, 2.0, 0.1),
            Err(MeshError::InvalidGeometry { .. })
        ));
        assert!(matches!(
            generate_mesh(&|_| -0.5, 2.0, 0.1),
            Err(MeshError::InvalidGeometry { .. })
        ));
        assert!(matches!(
            generate_mesh(&|_| 1.0, 2.0, 0.0),
            Err(MeshError::InvalidTargetSize(_))
        ));
        assert!(matches!(
            generate_mesh(&|_| 1.0, -1.0, 0.1),
            Err(MeshError::InvalidOuterRadius(_))
        ));
    }

    #[test]
    fn area_converges_at_second_order_or_better() {
        let radius_fn = wobbly_radius();
        let mut exact = 0.0;
        let n = 4096;
        for i in 0..n {
            let phi = (i as f64 + 0.5) * TAU / n as f64;
            let r = radius_fn(phi);
            exact += 0.5 * (4.0 - r * r) * TAU / n as f64;
        }
        let coarse = (generate_mesh(&radius_fn, 2.0, 0.2).unwrap().area() - exact).abs();
        let fine = (generate_mesh(&radius_fn, 2.0, 0.1).unwrap().area() - exact).abs();
        assert!(
            coarse / fine >= 3.5,
            "area error ratio {} below second order",
            coarse / fine
        );
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_mesh(&wobbly_radius(), 2.0, 0.1).unwrap();
        let b = generate_mesh(&wobbly_radius(), 2.0, 0.1).unwrap();
        assert_eq!(a.nodes(), b.nodes());
        assert_eq!(a.elements(), b.elements());
    }

    #[test]
    fn locate_point_roundtrips_through_the_mapping() {
        let mesh = generate_mesh(&wobbly_radius(), 2.0, 0.12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let e = rng.random_range(0..mesh.num_elements());
            let mut xi: f64 = rng.random_range(0.0..1.0);
            let mut eta: f64 = rng.random_range(0.0..1.0);
            if xi + eta > 1.0 {
                xi = 1.0 - xi;
                eta = 1.0 - eta;
            }
            let coords = mesh.elem_coords(e);
            let target = element::map_point(&coords, xi, eta);
            let (found, fxi) = mesh.locate_point(target).expect("point must be found");
            let image = element::map_point(&mesh.elem_coords(found), fxi[0], fxi[1]);
            assert!(
                (image[0] - target[0]).hypot(image[1] - target[1]) <= 1e-9,
                "relocated image drifted"
            );
        }
    }

    #[test]
    fn locate_point_rejects_outsiders() {
        let mesh = unit_annulus(0.15);
        assert!(matches!(
            mesh.locate_point([0.2, 0.0]),
            Err(MeshError::PointOutsideDomain { .. })
        ));
        assert!(matches!(
            mesh.locate_point([2.5, 0.0]),
            Err(MeshError::PointOutsideDomain { .. })
        ));
    }

    #[test]
    fn ball_quadrature_weights_sum_to_ball_area() {
        let mesh = unit_annulus(0.1);
        let ball = mesh.locate_ball([1.75, 0.0], 0.1).unwrap();
        let exact = PI * 0.1 * 0.1;
        assert_relative_eq!(ball.weight_sum, exact, max_relative = 1e-12);

        let ones: f64 = ball.points.iter().map(|p| p.weight).sum();
        assert_relative_eq!(ones, exact, max_relative = 1e-12);
    }

    #[test]
    fn ball_quadrature_integrates_low_moments_exactly() {
        let mesh = unit_annulus(0.1);
        let center = [1.75, 0.0];
        let r = 0.1;
        let ball = mesh.locate_ball(center, r).unwrap();
        let area = PI * r * r;

        let mut x_moment = 0.0;
        let mut r2_moment = 0.0;
        for p in &ball.points {
            let coords = mesh.elem_coords(p.element);
            let pos = element::map_point(&coords, p.xi[0], p.xi[1]);
            x_moment += p.weight * pos[0];
            let dx = pos[0] - center[0];
            let dy = pos[1] - center[1];
            r2_moment += p.weight * (dx * dx + dy * dy);
        }
        assert_relative_eq!(x_moment, 1.75 * area, max_relative = 1e-9);
        assert_relative_eq!(r2_moment, area * r * r / 2.0, max_relative = 1e-9);
    }

    #[test]
    fn ball_outside_domain_is_rejected() {
        let mesh = unit_annulus(0.15);
        assert!(matches!(
            mesh.locate_ball([1.95, 0.0], 0.1),
            Err(MeshError::BallOutsideDomain { .. })
        ));
        assert!(matches!(
            mesh.locate_ball([0.9, 0.0], 0.5),
            Err(MeshError::BallOutsideDomain { .. })
        ));
    }

    #[test]
    fn boundary_edge_lists_cover_each_boundary_once() {
        let mesh = unit_annulus(0.2);
        let outer = mesh.outer_edges();
        assert_eq!(outer.len(), mesh.n_phi());
        for edge in &outer {
            let el = mesh.elements()[edge.element];
            for local in [edge.start_local, edge.end_local] {
                let p = mesh.nodes()[el[local]];
                assert!((p[0].hypot(p[1]) - 2.0).abs() <= 1e-9);
            }
        }
        let inner = mesh.inner_edges();
        assert_eq!(inner.len(), mesh.n_phi());
        for edge in &inner {
            let el = mesh.elements()[edge.element];
            for local in [edge.start_local, edge.end_local] {
                let p = mesh.nodes()[el[local]];
                assert!((p[0].hypot(p[1]) - 1.0).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn text_export_has_expected_shape() {
        let mesh = unit_annulus(0.3);
        let mut buffer = Vec::new();
        mesh.write_text(&mut buffer).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert_eq!(
            header,
            format!("nodes {} elements {}", mesh.num_nodes(), mesh.num_elements())
        );
        let total_lines = 1 + mesh.num_nodes() + mesh.num_elements() + 2;
        assert_eq!(text.lines().count(), total_lines);
        let first_node: Vec<f64> = lines
            .next()
            .unwrap()
            .split_whitespace()
            .map(|v| v.parse().unwrap())
            .collect();
        assert_eq!(first_node, vec![mesh.nodes()[0][0], mesh.nodes()[0][1]]);
    }
}
