//! Observation operators and the composed forward map.
//!
//! Three kinds of sparse measurements are supported: ball-averaged vorticity
//! at fixed sensors, the global spatial variance of the transported scalar,
//! and the same variance split over angular sectors (always computed against
//! the global mean, so the sector values sum to the global variance).
//!
//! [`ForwardMap`] chains every stage from boundary coefficients to a
//! measurement vector: spline projection of the Fourier boundary, clamping,
//! meshing, the flow solve, optionally the transport solve, and finally the
//! observation operator. Failures are tagged with the stage that produced
//! them, and an atomic counter records how many times the pipeline ran.

use std::f64::consts::TAU;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use thiserror::Error;

use crate::advdiff::{self, ScalarField, SourceSpec};
use crate::boundary::{BoundaryParams, ClampParams};
use crate::bspline::{BSplineCurve, SplineError, SplineProjector};
use crate::element;
use crate::inference::{ForwardFailure, ForwardModel};
use crate::mesh::{generate_mesh, AnnulusMesh, MeshError};
use crate::quad::TRIANGLE_DEGREE_4;
use crate::stokes::{self, FlowField, StokesConfig};
use crate::system::SolveError;

/// Which measurement the forward map produces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObservationKind {
    /// Ball-averaged vorticity at each sensor.
    Vorticity,
    /// One number: the spatial variance of the scalar over the domain.
    ScalarVarianceGlobal,
    /// Per-sector scalar variance contributions (global mean, global area).
    ScalarVarianceSectoral,
}

/// Errors from observation operator construction or evaluation.
#[derive(Debug, Error)]
pub enum ObservationError {
    #[error("sensor specification: {0}")]
    BadSensors(String),
    #[error("sector specification: {0}")]
    BadSectors(String),
    #[error("sensor ball {index} cannot be integrated on this mesh")]
    SensorCoverage {
        index: usize,
        #[source]
        source: MeshError,
    },
}

/// Fixed circular sensors, each averaging over a ball.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorArray {
    centers: Vec<[f64; 2]>,
    radii: Vec<f64>,
}

impl SensorArray {
    pub fn new(centers: Vec<[f64; 2]>, radii: Vec<f64>) -> Result<Self, ObservationError> {
        if centers.is_empty() {
            return Err(ObservationError::BadSensors("no sensors given".into()));
        }
        if centers.len() != radii.len() {
            return Err(ObservationError::BadSensors(format!(
                "{} centers but {} radii",
                centers.len(),
                radii.len()
            )));
        }
        for (i, (c, &r)) in centers.iter().zip(&radii).enumerate() {
            if !c[0].is_finite() || !c[1].is_finite() {
                return Err(ObservationError::BadSensors(format!(
                    "sensor {i} center is not finite"
                )));
            }
            if !(r.is_finite() && r > 0.0) {
                return Err(ObservationError::BadSensors(format!(
                    "sensor {i} radius must be positive, got {r}"
                )));
            }
        }
        Ok(SensorArray { centers, radii })
    }

    /// Sensors on a circle of radius `ring_radius` at the given angles, all
    /// sharing one ball radius.
    pub fn ring(
        ring_radius: f64,
        angles_deg: &[f64],
        ball_radius: f64,
    ) -> Result<Self, ObservationError> {
        let centers = angles_deg
            .iter()
            .map(|a| {
                let (sin, cos) = a.to_radians().sin_cos();
                [ring_radius * cos, ring_radius * sin]
            })
            .collect();
        SensorArray::new(centers, vec![ball_radius; angles_deg.len()])
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn centers(&self) -> &[[f64; 2]] {
        &self.centers
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// Check that every ball stays inside the always-fluid annulus between
    /// `inner_max` (the largest possible inner radius) and `outer_radius`.
    pub fn check_within(&self, inner_max: f64, outer_radius: f64) -> Result<(), ObservationError> {
        for (i, (c, &r)) in self.centers.iter().zip(&self.radii).enumerate() {
            let dist = c[0].hypot(c[1]);
            if dist - r < inner_max || dist + r > outer_radius {
                return Err(ObservationError::BadSensors(format!(
                    "sensor {i} at ({}, {}) with radius {r} leaves the \
                     always-fluid annulus [{inner_max}, {outer_radius}]",
                    c[0], c[1]
                )));
            }
        }
        Ok(())
    }
}

/// A partition of the angle range into sectors `(bound[j], bound[j+1]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SectorSpec {
    bounds: Vec<f64>,
}

impl SectorSpec {
    /// Bounds in radians; must start at 0, end at 2 pi, strictly increase.
    pub fn new(mut bounds: Vec<f64>) -> Result<Self, ObservationError> {
        if bounds.len() < 2 {
            return Err(ObservationError::BadSectors(
                "need at least one sector".into(),
            ));
        }
        if bounds[0].abs() > 1e-12 {
            return Err(ObservationError::BadSectors(format!(
                "bounds must start at 0, got {}",
                bounds[0]
            )));
        }
        bounds[0] = 0.0;
        let last = *bounds.last().unwrap();
        if (last - TAU).abs() > 1e-9 {
            return Err(ObservationError::BadSectors(format!(
                "bounds must end at 2*pi, got {last}"
            )));
        }
        *bounds.last_mut().unwrap() = TAU;
        for w in bounds.windows(2) {
            if !(w[1] > w[0]) {
                return Err(ObservationError::BadSectors(format!(
                    "bounds must strictly increase, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(SectorSpec { bounds })
    }

    pub fn from_degrees(degrees: &[f64]) -> Result<Self, ObservationError> {
        SectorSpec::new(degrees.iter().map(|d| d.to_radians()).collect())
    }

    /// The four quadrants.
    pub fn quadrants() -> Self {
        SectorSpec::new(vec![0.0, 0.25 * TAU, 0.5 * TAU, 0.75 * TAU, TAU]).unwrap()
    }

    /// Number of sectors.
    pub fn len(&self) -> usize {
        self.bounds.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    /// Index of the sector containing the angle of `point`. Angles are taken
    /// in (0, 2*pi], so the positive x axis belongs to the last sector.
    pub fn sector_of(&self, point: [f64; 2]) -> usize {
        let mut phi = point[1].atan2(point[0]).rem_euclid(TAU);
        if phi == 0.0 {
            phi = TAU;
        }
        for j in 1..self.bounds.len() {
            if phi <= self.bounds[j] {
                return j - 1;
            }
        }
        self.len() - 1
    }
}

/// A measurement vector together with the operator that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub kind: ObservationKind,
    pub values: Vec<f64>,
}

/// Ball-averaged vorticity at each sensor: the integral of the signed
/// vorticity over the ball divided by the exact ball area.
pub fn vorticity_ball_averages(
    flow: &FlowField,
    sensors: &SensorArray,
) -> Result<Vec<f64>, ObservationError> {
    let mesh = flow.mesh();
    let mut values = Vec::with_capacity(sensors.len());
    for (index, (&center, &radius)) in sensors
        .centers()
        .iter()
        .zip(sensors.radii())
        .enumerate()
    {
        let quad = mesh
            .locate_ball(center, radius)
            .map_err(|source| ObservationError::SensorCoverage { index, source })?;
        let mut integral = 0.0;
        for p in &quad.points {
            integral += p.weight * flow.vorticity_at(p.element, p.xi);
        }
        values.push(integral / (std::f64::consts::PI * radius * radius));
    }
    Ok(values)
}

/// Spatial variance of the scalar over the whole domain.
pub fn scalar_variance_global(field: &ScalarField) -> f64 {
    let (area, mean) = field.area_and_mean();
    let mesh = field.mesh();
    let mut sum = 0.0;
    for e in 0..mesh.num_elements() {
        let coords = mesh.elem_coords(e);
        for q in TRIANGLE_DEGREE_4.iter() {
            let geo = element::eval_geometry(&coords, q.xi, q.eta);
            let d = field.value_from(&geo, e) - mean;
            sum += q.weight * geo.det_j * d * d;
        }
    }
    sum / area
}

/// Per-sector contributions to the global variance.
///
/// Each entry integrates the squared deviation from the GLOBAL mean over one
/// sector and divides by the GLOBAL area, so the entries sum to the value of
/// [`scalar_variance_global`].
pub fn scalar_variance_sectoral(field: &ScalarField, sectors: &SectorSpec) -> Vec<f64> {
    let (area, mean) = field.area_and_mean();
    let mesh = field.mesh();
    let mut sums = vec![0.0; sectors.len()];
    for e in 0..mesh.num_elements() {
        let coords = mesh.elem_coords(e);
        for q in TRIANGLE_DEGREE_4.iter() {
            let geo = element::eval_geometry(&coords, q.xi, q.eta);
            let d = field.value_from(&geo, e) - mean;
            sums[sectors.sector_of(geo.point)] += q.weight * geo.det_j * d * d;
        }
    }
    for s in sums.iter_mut() {
        *s /= area;
    }
    sums
}

/// Everything needed to run the forward pipeline, independent of the
/// unknown boundary coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardSpec {
    pub clamp: ClampParams,
    pub outer_radius: f64,
    pub h_target: f64,
    /// Number of periodic spline basis functions for the boundary.
    pub n_splines: usize,
    /// Gauss points per knot interval in the projection.
    pub spline_points: usize,
    pub stokes: StokesConfig,
    pub kappa: f64,
    pub source: SourceSpec,
    pub kind: ObservationKind,
    pub sensors: Option<SensorArray>,
    pub sectors: Option<SectorSpec>,
}

/// Stage-tagged failures of the forward pipeline.
#[derive(Debug, Error)]
pub enum ForwardError {
    #[error("boundary projection failed")]
    Projection(#[from] SplineError),
    #[error("mesh generation failed")]
    Mesh(#[from] MeshError),
    #[error("flow solve failed")]
    Flow(#[source] SolveError),
    #[error("transport solve failed")]
    Transport(#[source] SolveError),
    #[error("observation failed")]
    Observation(#[from] ObservationError),
    #[error("forward specification invalid: {0}")]
    BadSpec(String),
}

/// Full output of one forward evaluation, for export and debugging.
#[derive(Debug)]
pub struct ForwardSolution {
    /// Projected (unclamped) boundary curve.
    pub curve: BSplineCurve,
    pub clamp: ClampParams,
    pub mesh: Arc<AnnulusMesh>,
    pub flow: FlowField,
    /// Present for the scalar-variance observation kinds.
    pub scalar: Option<ScalarField>,
    pub observation: Observation,
}

impl ForwardSolution {
    /// Clamped inner radius at an angle, as used by the mesh generator.
    pub fn inner_radius(&self, phi: f64) -> f64 {
        self.clamp.apply(self.curve.eval(phi))
    }
}

/// The composed map from boundary coefficients to a measurement vector.
pub struct ForwardMap {
    spec: ForwardSpec,
    projector: SplineProjector,
    evaluations: AtomicU64,
}

impl ForwardMap {
    pub fn new(spec: ForwardSpec) -> Result<Self, ForwardError> {
        if !(spec.outer_radius.is_finite() && spec.outer_radius > 0.0) {
            return Err(ForwardError::BadSpec(format!(
                "outer radius must be positive, got {}",
                spec.outer_radius
            )));
        }
        if spec.clamp.r_max() >= spec.outer_radius {
            return Err(ForwardError::BadSpec(format!(
                "clamp upper bound {} must stay below the outer radius {}",
                spec.clamp.r_max(),
                spec.outer_radius
            )));
        }
        if !(spec.h_target.is_finite()
            && spec.h_target > 0.0
            && spec.h_target < spec.outer_radius)
        {
            return Err(ForwardError::BadSpec(format!(
                "target element size must lie in (0, {}), got {}",
                spec.outer_radius, spec.h_target
            )));
        }
        if !(spec.kappa.is_finite() && spec.kappa > 0.0) {
            return Err(ForwardError::BadSpec(format!(
                "diffusivity must be positive, got {}",
                spec.kappa
            )));
        }
        match spec.kind {
            ObservationKind::Vorticity => {
                let sensors = spec.sensors.as_ref().ok_or_else(|| {
                    ForwardError::BadSpec("vorticity observations need sensors".into())
                })?;
                sensors.check_within(spec.clamp.r_max(), spec.outer_radius)?;
                if spec.sectors.is_some() {
                    return Err(ForwardError::BadSpec(
                        "sectors are only used by sectoral variance observations".into(),
                    ));
                }
            }
            ObservationKind::ScalarVarianceGlobal => {
                if spec.sensors.is_some() || spec.sectors.is_some() {
                    return Err(ForwardError::BadSpec(
                        "global variance observations take no sensors or sectors".into(),
                    ));
                }
            }
            ObservationKind::ScalarVarianceSectoral => {
                if spec.sectors.is_none() {
                    return Err(ForwardError::BadSpec(
                        "sectoral variance observations need sector bounds".into(),
                    ));
                }
                if spec.sensors.is_some() {
                    return Err(ForwardError::BadSpec(
                        "sensors are only used by vorticity observations".into(),
                    ));
                }
            }
        }
        let projector = SplineProjector::new(spec.n_splines, spec.spline_points)?;
        Ok(ForwardMap {
            spec,
            projector,
            evaluations: AtomicU64::new(0),
        })
    }

    pub fn spec(&self) -> &ForwardSpec {
        &self.spec
    }

    /// Length of the measurement vector this map produces.
    pub fn observation_len(&self) -> usize {
        match self.spec.kind {
            ObservationKind::Vorticity => self.spec.sensors.as_ref().unwrap().len(),
            ObservationKind::ScalarVarianceGlobal => 1,
            ObservationKind::ScalarVarianceSectoral => self.spec.sectors.as_ref().unwrap().len(),
        }
    }

    /// How many times the pipeline has run (both plain and detailed calls).
    pub fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }

    /// Run the pipeline and keep every intermediate field.
    pub fn solve(&self, params: &BoundaryParams) -> Result<ForwardSolution, ForwardError> {
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        let b0 = params.b0();
        let curve = self
            .projector
            .project(&|x| b0 + params.eval_fourier(x))?;
        let clamp = self.spec.clamp;
        let radius = |phi: f64| clamp.apply(curve.eval(phi));
        let mesh = Arc::new(generate_mesh(
            &radius,
            self.spec.outer_radius,
            self.spec.h_target,
        )?);
        let flow = stokes::solve_stokes(&mesh, &self.spec.stokes).map_err(ForwardError::Flow)?;

        let (scalar, observation) = match self.spec.kind {
            ObservationKind::Vorticity => {
                let sensors = self.spec.sensors.as_ref().unwrap();
                let values = vorticity_ball_averages(&flow, sensors)?;
                (
                    None,
                    Observation {
                        kind: ObservationKind::Vorticity,
                        values,
                    },
                )
            }
            ObservationKind::ScalarVarianceGlobal => {
                let field = advdiff::solve_advdiff(&mesh, &flow, self.spec.kappa, &self.spec.source)
                    .map_err(ForwardError::Transport)?;
                let values = vec![scalar_variance_global(&field)];
                (
                    Some(field),
                    Observation {
                        kind: ObservationKind::ScalarVarianceGlobal,
                        values,
                    },
                )
            }
            ObservationKind::ScalarVarianceSectoral => {
                let field = advdiff::solve_advdiff(&mesh, &flow, self.spec.kappa, &self.spec.source)
                    .map_err(ForwardError::Transport)?;
                let sectors = self.spec.sectors.as_ref().unwrap();
                let values = scalar_variance_sectoral(&field, sectors);
                (
                    Some(field),
                    Observation {
                        kind: ObservationKind::ScalarVarianceSectoral,
                        values,
                    },
                )
            }
        };

        Ok(ForwardSolution {
            curve,
            clamp,
            mesh,
            flow,
            scalar,
            observation,
        })
    }

    /// Run the pipeline and keep only the measurement vector.
    pub fn observe(&self, params: &BoundaryParams) -> Result<Observation, ForwardError> {
        self.solve(params).map(|sol| sol.observation)
    }
}

impl ForwardModel for ForwardMap {
    fn evaluate(&self, params: &BoundaryParams) -> Result<Vec<f64>, ForwardFailure> {
        self.observe(params)
            .map(|obs| obs.values)
            .map_err(|e| ForwardFailure::new(error_chain(&e)))
    }

    fn output_len(&self) -> usize {
        self.observation_len()
    }
}

/// Render an error and its sources as one line.
fn error_chain(err: &dyn std::error::Error) -> String {
    let mut out = err.to_string();
    let mut cur = err.source();
    while let Some(e) = cur {
        out.push_str(": ");
        out.push_str(&e.to_string());
        cur = e.source();
    }
    out
}
