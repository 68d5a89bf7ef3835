//! Steady Stokes flow in the annulus, driven by a rotating outer rim.
//!
//! The discretization is the Taylor-Hood pair (quadratic velocity, linear
//! pressure on corner nodes) with a penalty term `eps_pen * (q, p)` appended
//! to the continuity equation so the pressure block is invertible without a
//! global mean constraint. Boundary conditions are strong: the velocity is
//! zero on the inner curve and equals the rigid rim motion
//! `omega_bar * (y, -x)` on the outer circle.

use std::io::{self, Write};
use std::sync::Arc;

use crate::element::{self, ElementGeometry};
use crate::mesh::AnnulusMesh;
use crate::quad::TRIANGLE_DEGREE_4;
use crate::system::LinearSystem;
pub use crate::system::SolveError;

/// Physical and numerical parameters of the flow solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StokesConfig {
    /// Kinematic viscosity. Scales the pressure only; the velocity field is
    /// unchanged up to the (tiny) penalty perturbation.
    pub nu: f64,
    /// Angular speed of the outer rim; the rim moves clockwise for positive
    /// values, matching the boundary datum `omega_bar * (y, -x)`.
    pub omega_bar: f64,
    /// Pressure penalty coefficient.
    pub eps_pen: f64,
}

impl StokesConfig {
    fn validate(&self) -> Result<(), SolveError> {
        if !(self.nu.is_finite() && self.nu > 0.0) {
            return Err(SolveError::InvalidParameter(format!(
                "viscosity must be positive, got {}",
                self.nu
            )));
        }
        if !self.omega_bar.is_finite() {
            return Err(SolveError::InvalidParameter(
                "rim speed must be finite".into(),
            ));
        }
        if !(self.eps_pen.is_finite() && self.eps_pen > 0.0) {
            return Err(SolveError::InvalidParameter(format!(
                "pressure penalty must be positive, got {}",
                self.eps_pen
            )));
        }
        Ok(())
    }
}

impl Default for StokesConfig {
    fn default() -> Self {
        StokesConfig {
            nu: 0.001,
            omega_bar: 10.0,
            eps_pen: 1e-3,
        }
    }
}

/// A solved velocity/pressure pair tied to the mesh it was computed on.
#[derive(Clone, Debug)]
pub struct FlowField {
    mesh: Arc<AnnulusMesh>,
    velocity: Vec<[f64; 2]>,
    pressure: Vec<f64>,
    pressure_index: Vec<Option<usize>>,
}

/// Map every node to its pressure unknown (corner nodes only).
fn pressure_numbering(mesh: &AnnulusMesh) -> (Vec<Option<usize>>, usize) {
    let mut index = vec![None; mesh.num_nodes()];
    let mut count = 0;
    for n in 0..mesh.num_nodes() {
        if mesh.is_corner(n) {
            index[n] = Some(count);
            count += 1;
        }
    }
    (index, count)
}

/// Solve the penalty Stokes system on `mesh`.
pub fn solve_stokes(mesh: &Arc<AnnulusMesh>, cfg: &StokesConfig) -> Result<FlowField, SolveError> {
    cfg.validate()?;
    let n_nodes = mesh.num_nodes();
    let (pressure_index, n_pressure) = pressure_numbering(mesh);
    let n_dofs = 2 * n_nodes + n_pressure;

    // 15 local dofs per element: 12 velocity components then 3 pressures.
    let mut sys = LinearSystem::with_capacity(n_dofs, mesh.num_elements() * 15 * 15);
    let mut local = [[0.0f64; 15]; 15];
    for e in 0..mesh.num_elements() {
        let coords = mesh.elem_coords(e);
        let conn = mesh.elements()[e];
        for row in local.iter_mut() {
            row.fill(0.0);
        }
        for q in TRIANGLE_DEGREE_4.iter() {
            let geo = element::eval_geometry(&coords, q.xi, q.eta);
            let w = q.weight * geo.det_j;
            for i in 0..6 {
                for j in 0..6 {
                    let lap = cfg.nu
                        * w
                        * (geo.grads[i][0] * geo.grads[j][0] + geo.grads[i][1] * geo.grads[j][1]);
                    local[2 * i][2 * j] += lap;
                    local[2 * i + 1][2 * j + 1] += lap;
                }
                for l in 0..3 {
                    for c in 0..2 {
                        let coupling = w * geo.p1_shapes[l] * geo.grads[i][c];
                        // Momentum: -(p, div v); continuity: +(q, div u).
                        local[2 * i + c][12 + l] -= coupling;
                        local[12 + l][2 * i + c] += coupling;
                    }
                }
            }
            for l in 0..3 {
                for m in 0..3 {
                    local[12 + l][12 + m] += cfg.eps_pen * w * geo.p1_shapes[l] * geo.p1_shapes[m];
                }
            }
        }
        let global = |k: usize| -> usize {
            if k < 12 {
                2 * conn[k / 2] + k % 2
            } else {
                2 * n_nodes + pressure_index[conn[k - 12]].expect("corner node")
            }
        };
        for a in 0..15 {
            let ga = global(a);
            for b in 0..15 {
                sys.add(ga, global(b), local[a][b]);
            }
        }
    }

    let mut constraints = vec![None; n_dofs];
    for &n in mesh.inner_nodes() {
        constraints[2 * n] = Some(0.0);
        constraints[2 * n + 1] = Some(0.0);
    }
    for &n in mesh.outer_nodes() {
        let p = mesh.nodes()[n];
        constraints[2 * n] = Some(cfg.omega_bar * p[1]);
        constraints[2 * n + 1] = Some(-cfg.omega_bar * p[0]);
    }

    let x = sys.solve(&constraints)?;
    let velocity = (0..n_nodes).map(|i| [x[2 * i], x[2 * i + 1]]).collect();
    let pressure = (0..n_pressure).map(|k| x[2 * n_nodes + k]).collect();
    Ok(FlowField {
        mesh: Arc::clone(mesh),
        velocity,
        pressure,
        pressure_index,
    })
}

impl FlowField {
    /// Build a field directly from nodal velocity values (zero pressure).
    ///
    /// Useful for feeding manufactured flows into the transport solver and
    /// the observation operators.
    pub fn from_nodal(mesh: Arc<AnnulusMesh>, velocity: Vec<[f64; 2]>) -> FlowField {
        assert_eq!(velocity.len(), mesh.num_nodes(), "one velocity per node");
        let (pressure_index, n_pressure) = pressure_numbering(&mesh);
        FlowField {
            mesh,
            velocity,
            pressure: vec![0.0; n_pressure],
            pressure_index,
        }
    }

    pub fn mesh(&self) -> &Arc<AnnulusMesh> {
        &self.mesh
    }

    /// Nodal velocity values, indexed like the mesh nodes.
    pub fn velocity(&self) -> &[[f64; 2]] {
        &self.velocity
    }

    /// Pressure at a corner node, or None on midside nodes.
    pub fn pressure_at_node(&self, node: usize) -> Option<f64> {
        self.pressure_index[node].map(|k| self.pressure[k])
    }

    fn geometry(&self, element: usize, xi: [f64; 2]) -> ElementGeometry {
        let coords = self.mesh.elem_coords(element);
        element::eval_geometry(&coords, xi[0], xi[1])
    }

    /// Velocity at a reference point of an element.
    pub fn velocity_at(&self, element: usize, xi: [f64; 2]) -> [f64; 2] {
        let geo = self.geometry(element, xi);
        let conn = self.mesh.elements()[element];
        let mut u = [0.0; 2];
        for i in 0..6 {
            u[0] += geo.shapes[i] * self.velocity[conn[i]][0];
            u[1] += geo.shapes[i] * self.velocity[conn[i]][1];
        }
        u
    }

    /// Velocity gradient at a reference point; entry `[r][c]` is du_r/dx_c.
    pub fn velocity_gradient_at(&self, element: usize, xi: [f64; 2]) -> [[f64; 2]; 2] {
        let geo = self.geometry(element, xi);
        self.velocity_gradient_from(&geo, element)
    }

    /// Velocity gradient from a precomputed geometry evaluation.
    pub fn velocity_gradient_from(
        &self,
        geo: &ElementGeometry,
        element: usize,
    ) -> [[f64; 2]; 2] {
        let conn = self.mesh.elements()[element];
        let mut g = [[0.0; 2]; 2];
        for i in 0..6 {
            let u = self.velocity[conn[i]];
            for c in 0..2 {
                g[0][c] += geo.grads[i][c] * u[0];
                g[1][c] += geo.grads[i][c] * u[1];
            }
        }
        g
    }

    /// Signed vorticity `-(du2/dx1 - du1/dx2)` at a reference point.
    ///
    /// The sign makes the rigid clockwise rim motion produce positive values.
    pub fn vorticity_at(&self, element: usize, xi: [f64; 2]) -> f64 {
        let g = self.velocity_gradient_at(element, xi);
        -(g[1][0] - g[0][1])
    }

    /// Pressure at a reference point of an element.
    pub fn pressure_at(&self, element: usize, xi: [f64; 2]) -> f64 {
        let conn = self.mesh.elements()[element];
        let shapes = element::p1_shapes(xi[0], xi[1]);
        let mut p = 0.0;
        for l in 0..3 {
            let k = self.pressure_index[conn[l]].expect("corner node");
            p += shapes[l] * self.pressure[k];
        }
        p
    }

    /// Largest nodal speed, used for transport stability estimates.
    pub fn max_speed(&self) -> f64 {
        self.velocity
            .iter()
            .map(|u| (u[0] * u[0] + u[1] * u[1]).sqrt())
            .fold(0.0, f64::max)
    }

    /// Write `node_index u1 u2` rows.
    pub fn write_velocity_text(&self, w: &mut impl Write) -> io::Result<()> {
        for (i, u) in self.velocity.iter().enumerate() {
            writeln!(w, "{} {} {}", i, u[0], u[1])?;
        }
        Ok(())
    }

    /// Write `node_index p` rows for corner nodes.
    pub fn write_pressure_text(&self, w: &mut impl Write) -> io::Result<()> {
        for (i, idx) in self.pressure_index.iter().enumerate() {
            if let Some(k) = idx {
                writeln!(w, "{} {}", i, self.pressure[*k])?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_mesh;
    use approx::assert_relative_eq;

    fn unit_annulus(h: f64) -> Arc<AnnulusMesh> {
        Arc::new(generate_mesh(&|_| 1.0, 2.0, h).unwrap())
    }

    /// Concentric rotating-rim flow: u_phi = A r + B / r with A = -40/3,
    /// B = 40/3 for a unit inner circle, outer radius 2, rim speed 10.
    fn couette_speed(r: f64) -> f64 {
        let a = -40.0 / 3.0;
        let b = 40.0 / 3.0;
        (a * r + b / r).abs()
    }

    #[test]
    fn couette_speed_matches_the_analytic_profile() {
        let mesh = unit_annulus(0.1);
        let flow = solve_stokes(&mesh, &StokesConfig::default()).unwrap();
        let (e, xi) = mesh.locate_point([1.5, 0.0]).unwrap();
        let u = flow.velocity_at(e, xi);
        let speed = (u[0] * u[0] + u[1] * u[1]).sqrt();
        assert_relative_eq!(speed, couette_speed(1.5), max_relative = 0.02);
        // The rim moves clockwise, so at (1.5, 0) the flow points in -y.
        assert!(u[1] < 0.0, "expected clockwise flow, got {u:?}");
        assert!(u[0].abs() < 0.05 * speed, "radial component should vanish");
    }

    #[test]
    fn couette_vorticity_is_uniform() {
        let mesh = unit_annulus(0.1);
        let flow = solve_stokes(&mesh, &StokesConfig::default()).unwrap();
        // 2A with the sign flipped by the vorticity convention: +80/3.
        let expected = 80.0 / 3.0;
        for point in [[1.3, 0.4], [-1.1, 0.9], [0.0, -1.7]] {
            let (e, xi) = mesh.locate_point(point).unwrap();
            assert_relative_eq!(flow.vorticity_at(e, xi), expected, max_relative = 0.02);
        }
    }

    #[test]
    fn inner_nodes_are_pinned_to_zero() {
        let mesh = unit_annulus(0.15);
        let flow = solve_stokes(&mesh, &StokesConfig::default()).unwrap();
        for &n in mesh.inner_nodes() {
            assert_eq!(flow.velocity()[n], [0.0, 0.0]);
        }
        for &n in mesh.outer_nodes() {
            let p = mesh.nodes()[n];
            assert_eq!(flow.velocity()[n], [10.0 * p[1], -10.0 * p[0]]);
        }
    }

    #[test]
    fn velocity_is_linear_in_the_rim_speed() {
        let mesh = unit_annulus(0.15);
        let base = StokesConfig::default();
        let double = StokesConfig {
            omega_bar: 2.0 * base.omega_bar,
            ..base
        };
        let f1 = solve_stokes(&mesh, &base).unwrap();
        let f2 = solve_stokes(&mesh, &double).unwrap();
        let scale = f1.max_speed();
        for (u1, u2) in f1.velocity().iter().zip(f2.velocity()) {
            assert!((2.0 * u1[0] - u2[0]).abs() <= 1e-9 * scale);
            assert!((2.0 * u1[1] - u2[1]).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn zero_rim_speed_gives_a_quiescent_flow() {
        let mesh = unit_annulus(0.15);
        let cfg = StokesConfig {
            omega_bar: 0.0,
            ..StokesConfig::default()
        };
        let flow = solve_stokes(&mesh, &cfg).unwrap();
        assert_eq!(flow.max_speed(), 0.0);
    }

    #[test]
    fn velocity_is_insensitive_to_viscosity() {
        // Viscosity rescales the pressure; the velocity only feels it through
        // the penalty perturbation, which is tiny for a nearly uniform
        // pressure field.
        let mesh = unit_annulus(0.15);
        let thin = solve_stokes(
            &mesh,
            &StokesConfig {
                nu: 0.001,
                ..StokesConfig::default()
            },
        )
        .unwrap();
        let thick = solve_stokes(
            &mesh,
            &StokesConfig {
                nu: 1.0,
                ..StokesConfig::default()
            },
        )
        .unwrap();
        let scale = thin.max_speed();
        let mut worst = 0.0f64;
        for (a, b) in thin.velocity().iter().zip(thick.velocity()) {
            worst = worst.max((a[0] - b[0]).abs()).max((a[1] - b[1]).abs());
        }
        assert!(
            worst <= 1e-5 * scale,
            "velocity drift {worst:.3e} vs scale {scale:.3e}"
        );
    }

    #[test]
    fn config_validation_rejects_bad_parameters() {
        let mesh = unit_annulus(0.3);
        for cfg in [
            StokesConfig {
                nu: 0.0,
                ..StokesConfig::default()
            },
            StokesConfig {
                eps_pen: -1.0,
                ..StokesConfig::default()
            },
            StokesConfig {
                omega_bar: f64::NAN,
                ..StokesConfig::default()
            },
        ] {
            assert!(matches!(
                solve_stokes(&mesh, &cfg),
                Err(SolveError::InvalidParameter(_))
            ));
        }
    }

    #[test]
    fn nodal_field_constructor_interpolates_exactly() {
        let mesh = unit_annulus(0.3);
        // A linear field is reproduced exactly by the quadratic basis.
        let vel: Vec<[f64; 2]> = mesh
            .nodes()
            .iter()
            .map(|p| [3.0 * p[0] - p[1], 0.5 * p[1] + 2.0])
            .collect();
        let flow = FlowField::from_nodal(Arc::clone(&mesh), vel);
        let (e, xi) = mesh.locate_point([1.2, 0.7]).unwrap();
        let u = flow.velocity_at(e, xi);
        assert_relative_eq!(u[0], 3.0 * 1.2 - 0.7, max_relative = 1e-10);
        assert_relative_eq!(u[1], 0.5 * 0.7 + 2.0, max_relative = 1e-10);
    }
}
