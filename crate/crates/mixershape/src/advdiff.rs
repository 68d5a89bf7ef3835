//! Scalar transport: advection by a solved flow plus diffusion, with a
//! Gaussian bump source.
//!
//! The scalar satisfies a pure Galerkin discretization of
//! `-kappa lap(theta) + u . grad(theta) = q` with `theta = 0` on the outer
//! circle (strong) and a natural no-flux condition on the inner curve. No
//! streamline stabilization is added; instead the cell Peclet number is
//! monitored and a warning is logged when it exceeds one.

use std::io::{self, Write};
use std::sync::{Arc, OnceLock};

use crate::element::{self, ElementGeometry};
use crate::mesh::AnnulusMesh;
use crate::quad::{gauss_legendre, TRIANGLE_DEGREE_4, TRIANGLE_DEGREE_6};
use crate::stokes::FlowField;
use crate::system::LinearSystem;
pub use crate::system::SolveError;

/// Gaussian bump source `amplitude * exp(-|x - center|^2 / length_scale_sq)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SourceSpec {
    pub amplitude: f64,
    pub center: [f64; 2],
    pub length_scale_sq: f64,
}

impl SourceSpec {
    fn validate(&self) -> Result<(), SolveError> {
        if !(self.length_scale_sq.is_finite() && self.length_scale_sq > 0.0) {
            return Err(SolveError::InvalidParameter(format!(
                "source length scale squared must be positive, got {}",
                self.length_scale_sq
            )));
        }
        if !self.amplitude.is_finite()
            || !self.center[0].is_finite()
            || !self.center[1].is_finite()
        {
            return Err(SolveError::InvalidParameter(
                "source amplitude and center must be finite".into(),
            ));
        }
        Ok(())
    }

    pub fn eval(&self, point: [f64; 2]) -> f64 {
        let dx = point[0] - self.center[0];
        let dy = point[1] - self.center[1];
        self.amplitude * (-(dx * dx + dy * dy) / self.length_scale_sq).exp()
    }

    /// Integral of the source over the meshed domain (degree-6 quadrature).
    pub fn integral(&self, mesh: &AnnulusMesh) -> f64 {
        let mut total = 0.0;
        for e in 0..mesh.num_elements() {
            let coords = mesh.elem_coords(e);
            for q in TRIANGLE_DEGREE_6.iter() {
                let geo = element::eval_geometry(&coords, q.xi, q.eta);
                total += q.weight * geo.det_j * self.eval(geo.point);
            }
        }
        total
    }
}

/// A solved scalar field tied to the mesh it was computed on.
#[derive(Debug)]
pub struct ScalarField {
    mesh: Arc<AnnulusMesh>,
    theta: Vec<f64>,
    /// Cached (domain area, integral of theta).
    moments: OnceLock<(f64, f64)>,
}

impl Clone for ScalarField {
    fn clone(&self) -> Self {
        ScalarField {
            mesh: Arc::clone(&self.mesh),
            theta: self.theta.clone(),
            moments: self.moments.clone(),
        }
    }
}

/// Largest cell Peclet number `|u| h_e / (2 kappa)` over the mesh, with
/// `h_e = sqrt(2 area_e)` and `|u|` the largest nodal speed on the element.
pub fn cell_peclet(mesh: &Arc<AnnulusMesh>, flow: &FlowField, kappa: f64) -> Result<f64, SolveError> {
    if !Arc::ptr_eq(mesh, flow.mesh()) {
        return Err(SolveError::MeshMismatch);
    }
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(SolveError::InvalidParameter(format!(
            "diffusivity must be positive, got {kappa}"
        )));
    }
    let mut worst = 0.0f64;
    for e in 0..mesh.num_elements() {
        let coords = mesh.elem_coords(e);
        let conn = mesh.elements()[e];
        let mut area = 0.0;
        for q in TRIANGLE_DEGREE_4.iter() {
            area += q.weight * element::eval_geometry(&coords, q.xi, q.eta).det_j;
        }
        let h_e = (2.0 * area).sqrt();
        let speed = conn
            .iter()
            .map(|&n| {
                let u = flow.velocity()[n];
                (u[0] * u[0] + u[1] * u[1]).sqrt()
            })
            .fold(0.0, f64::max);
        worst = worst.max(speed * h_e / (2.0 * kappa));
    }
    Ok(worst)
}

/// Solve the transport equation for the scalar carried by `flow`.
pub fn solve_advdiff(
    mesh: &Arc<AnnulusMesh>,
    flow: &FlowField,
    kappa: f64,
    source: &SourceSpec,
) -> Result<ScalarField, SolveError> {
    if !Arc::ptr_eq(mesh, flow.mesh()) {
        return Err(SolveError::MeshMismatch);
    }
    source.validate()?;
    let peclet = cell_peclet(mesh, flow, kappa)?;
    if peclet > 1.0 {
        log::warn!(
            "cell Peclet number {peclet:.2} exceeds 1; the unstabilized \
             transport solve may oscillate (refine the mesh)"
        );
    }

    let n_nodes = mesh.num_nodes();
    let mut sys = LinearSystem::with_capacity(n_nodes, mesh.num_elements() * 36);
    let mut local = [[0.0f64; 6]; 6];
    let mut local_rhs = [0.0f64; 6];
    for e in 0..mesh.num_elements() {
        let coords = mesh.elem_coords(e);
        let conn = mesh.elements()[e];
        for row in local.iter_mut() {
            row.fill(0.0);
        }
        local_rhs.fill(0.0);
        for q in TRIANGLE_DEGREE_4.iter() {
            let geo = element::eval_geometry(&coords, q.xi, q.eta);
            let w = q.weight * geo.det_j;
            let mut u = [0.0; 2];
            for i in 0..6 {
                u[0] += geo.shapes[i] * flow.velocity()[conn[i]][0];
                u[1] += geo.shapes[i] * flow.velocity()[conn[i]][1];
            }
            let q_val = source.eval(geo.point);
            for i in 0..6 {
                local_rhs[i] += w * geo.shapes[i] * q_val;
                for j in 0..6 {
                    let diffuse = kappa
                        * (geo.grads[i][0] * geo.grads[j][0] + geo.grads[i][1] * geo.grads[j][1]);
                    let advect = geo.shapes[i] * (u[0] * geo.grads[j][0] + u[1] * geo.grads[j][1]);
                    local[i][j] += w * (diffuse + advect);
                }
            }
        }
        for a in 0..6 {
            sys.add_rhs(conn[a], local_rhs[a]);
            for b in 0..6 {
                sys.add(conn[a], conn[b], local[a][b]);
            }
        }
    }

    let mut constraints = vec![None; n_nodes];
    for &n in mesh.outer_nodes() {
        constraints[n] = Some(0.0);
    }
    let theta = sys.solve(&constraints)?;
    Ok(ScalarField {
        mesh: Arc::clone(mesh),
        theta,
        moments: OnceLock::new(),
    })
}

impl ScalarField {
    /// Build a field directly from nodal values; useful for synthetic tests.
    pub fn from_nodal(mesh: Arc<AnnulusMesh>, theta: Vec<f64>) -> ScalarField {
        assert_eq!(theta.len(), mesh.num_nodes(), "one value per node");
        ScalarField {
            mesh,
            theta,
            moments: OnceLock::new(),
        }
    }

    pub fn mesh(&self) -> &Arc<AnnulusMesh> {
        &self.mesh
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Scalar value at a reference point of an element.
    pub fn value_at(&self, element: usize, xi: [f64; 2]) -> f64 {
        let coords = self.mesh.elem_coords(element);
        let geo = element::eval_geometry(&coords, xi[0], xi[1]);
        self.value_from(&geo, element)
    }

    /// Scalar value from a precomputed geometry evaluation.
    pub fn value_from(&self, geo: &ElementGeometry, element: usize) -> f64 {
        let conn = self.mesh.elements()[element];
        (0..6).map(|i| geo.shapes[i] * self.theta[conn[i]]).sum()
    }

    /// Scalar gradient at a reference point of an element.
    pub fn gradient_at(&self, element: usize, xi: [f64; 2]) -> [f64; 2] {
        let coords = self.mesh.elem_coords(element);
        let geo = element::eval_geometry(&coords, xi[0], xi[1]);
        let conn = self.mesh.elements()[element];
        let mut g = [0.0; 2];
        for i in 0..6 {
            g[0] += geo.grads[i][0] * self.theta[conn[i]];
            g[1] += geo.grads[i][1] * self.theta[conn[i]];
        }
        g
    }

    /// Domain area and mean of the scalar, cached after the first call.
    pub fn area_and_mean(&self) -> (f64, f64) {
        let (area, integral) = *self.moments.get_or_init(|| {
            let mut area = 0.0;
            let mut integral = 0.0;
            for e in 0..self.mesh.num_elements() {
                let coords = self.mesh.elem_coords(e);
                for q in TRIANGLE_DEGREE_4.iter() {
                    let geo = element::eval_geometry(&coords, q.xi, q.eta);
                    let w = q.weight * geo.det_j;
                    area += w;
                    integral += w * self.value_from(&geo, e);
                }
            }
            (area, integral)
        });
        (area, integral / area)
    }

    /// Write `node_index theta` rows.
    pub fn write_text(&self, w: &mut impl Write) -> io::Result<()> {
        for (i, t) in self.theta.iter().enumerate() {
            writeln!(w, "{} {}", i, t)?;
        }
        Ok(())
    }
}

/// Total diffusive flux out of the outer circle, `-int kappa grad(theta) . n`.
///
/// At steady state this balances the injected source, which makes it a sharp
/// consistency check on the transport solve. The outward normal on the outer
/// circle is the radial direction.
pub fn outer_diffusive_outflux(field: &ScalarField, kappa: f64) -> f64 {
    let mesh = field.mesh();
    let rule = gauss_legendre(4);
    let ref_corners = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let mut total = 0.0;
    for edge in mesh.outer_edges() {
        let coords = mesh.elem_coords(edge.element);
        let conn = mesh.elements()[edge.element];
        let s = ref_corners[edge.start_local];
        let e = ref_corners[edge.end_local];
        let d = [e[0] - s[0], e[1] - s[1]];
        for &(t_ref, w_ref) in &rule {
            // Map the [-1, 1] rule onto the edge parameter t in [0, 1].
            let t = 0.5 * (t_ref + 1.0);
            let w = 0.5 * w_ref;
            let xi = s[0] + t * d[0];
            let eta = s[1] + t * d[1];
            let geo = element::eval_geometry(&coords, xi, eta);
            let tangent = [
                geo.jacobian[0][0] * d[0] + geo.jacobian[0][1] * d[1],
                geo.jacobian[1][0] * d[0] + geo.jacobian[1][1] * d[1],
            ];
            let ds = (tangent[0] * tangent[0] + tangent[1] * tangent[1]).sqrt();
            let norm = (geo.point[0] * geo.point[0] + geo.point[1] * geo.point[1]).sqrt();
            let n = [geo.point[0] / norm, geo.point[1] / norm];
            let mut grad = [0.0; 2];
            for i in 0..6 {
                grad[0] += geo.grads[i][0] * field.theta[conn[i]];
                grad[1] += geo.grads[i][1] * field.theta[conn[i]];
            }
            total += w * ds * kappa * (grad[0] * n[0] + grad[1] * n[1]);
        }
    }
    -total
}
