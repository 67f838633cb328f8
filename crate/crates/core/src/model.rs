//! Payload and vehicle descriptions, placement geometry and mass properties
//! of the rigid payload-plus-modules assembly.

use nalgebra::{Matrix3, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{self, area_moments};
use crate::scalar::{lit, to_f64, Real};

/// Right-prism payload; vertices describe the mid-plane cross-section.
#[derive(Debug, Clone, PartialEq)]
pub struct PayloadSpec<T> {
    pub name: String,
    vertices: Vec<Vector2<T>>,
    pub mass: T,
    pub thickness: T,
    pub inertia_zz_override: Option<T>,
}

impl<T: Real> PayloadSpec<T> {
    /// Validates the polygon, then stores it centered on its area centroid
    /// with counter-clockwise orientation.
    pub fn new(
        name: impl Into<String>,
        vertices: &[Vector2<T>],
        mass: T,
        thickness: T,
        inertia_zz_override: Option<T>,
    ) -> Result<Self> {
        if !(mass > T::zero()) || !mass.is_finite() {
            return Err(Error::InvalidPayload(format!("mass must be > 0, got {}", to_f64(mass))));
        }
        if !(thickness > T::zero()) || !thickness.is_finite() {
            return Err(Error::InvalidPayload(format!(
                "thickness must be > 0, got {}",
                to_f64(thickness)
            )));
        }
        if let Some(izz) = inertia_zz_override {
            if !(izz > T::zero()) {
                return Err(Error::InvalidPayload("inertia_zz_override must be > 0".into()));
            }
        }
        Ok(Self {
            name: name.into(),
            vertices: geometry::normalize_polygon(vertices)?,
            mass,
            thickness,
            inertia_zz_override,
        })
    }

    /// One of the built-in cross-sections (see [`geometry::shapes::named`]).
    pub fn named(name: &str, mass: T, thickness: T) -> Result<Self> {
        let verts = geometry::shapes::named::<T>(name)
            .ok_or_else(|| Error::InvalidPayload(format!("unknown shape '{name}'")))?;
        Self::new(name, &verts, mass, thickness, None)
    }

    pub fn vertices(&self) -> &[Vector2<T>] {
        &self.vertices
    }

    pub fn area(&self) -> T {
        area_moments(&self.vertices).area
    }

    /// Uniform-density prism inertia about the area centroid, body axes.
    pub fn inertia(&self) -> Matrix3<T> {
        let m = area_moments(&self.vertices);
        let rho = self.mass / m.area;
        let thick = self.mass * self.thickness * self.thickness / lit(12.0);
        let ixx = rho * m.yy + thick;
        let iyy = rho * m.xx + thick;
        let ixy = -rho * m.xy;
        let izz = self.inertia_zz_override.unwrap_or(rho * (m.xx + m.yy));
        Matrix3::new(ixx, ixy, T::zero(), ixy, iyy, T::zero(), T::zero(), T::zero(), izz)
    }
}

/// How a module's rotor X is oriented relative to the payload body frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ModuleMount {
    /// Module axes parallel to the body frame regardless of placement angle.
    #[default]
    BodyAligned,
    /// Module axes rotated by the placement angle.
    Radial,
}

/// Per-vehicle mass, geometry and thrust limits.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadSpec<T> {
    pub frame_mass: T,
    pub battery_mass: T,
    /// Distance between diagonally opposite motors, m.
    pub motor_to_motor: T,
    pub prop_diameter: T,
    /// Lower thrust limit per motor, N.
    pub thrust_min: T,
    /// Upper thrust limit per motor, N.
    pub thrust_max: T,
    /// Yaw torque per unit thrust, m.
    pub kappa: T,
    /// Inertia about the module's own center, module axes.
    pub local_inertia: Matrix3<T>,
    /// Rotor spin signs for rotors at 45°, 135°, 225°, 315°.
    pub spin: [i8; 4],
    pub mount: ModuleMount,
}

impl<T: Real> QuadSpec<T> {
    /// Vehicle used in the reference experiments: 330 mm frame, 114.5 mm
    /// props, 525 g frame and 437 g battery.
    pub fn reference() -> Self {
        let frame_mass = lit(0.525);
        let battery_mass = lit(0.437);
        let motor_to_motor = lit(0.33);
        Self {
            frame_mass,
            battery_mass,
            motor_to_motor,
            prop_diameter: lit(0.1145),
            thrust_min: T::zero(),
            thrust_max: lit(6.0),
            kappa: lit(0.012),
            local_inertia: Self::disk_inertia(frame_mass + battery_mass, motor_to_motor),
            spin: [1, -1, 1, -1],
            mount: ModuleMount::BodyAligned,
        }
    }

    /// Flat-disk inertia with radius `motor_to_motor / 2`.
    pub fn disk_inertia(mass: T, motor_to_motor: T) -> Matrix3<T> {
        let r = motor_to_motor / lit(2.0);
        let i_in = mass * r * r / lit(4.0);
        Matrix3::from_diagonal(&Vector3::new(i_in, i_in, lit::<T>(2.0) * i_in))
    }

    pub fn mass(&self) -> T {
        self.frame_mass + self.battery_mass
    }

    /// Default minimum center-to-center spacing: frame span plus one prop.
    pub fn default_separation(&self) -> T {
        self.motor_to_motor + self.prop_diameter
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidQuad(msg));
        if !(self.thrust_min >= T::zero()) || !(self.thrust_min < self.thrust_max) {
            return bad(format!(
                "need 0 <= thrust_min < thrust_max, got [{}, {}]",
                to_f64(self.thrust_min),
                to_f64(self.thrust_max)
            ));
        }
        if !(self.mass() > T::zero()) || self.frame_mass < T::zero() || self.battery_mass < T::zero() {
            return bad("total mass must be positive".into());
        }
        if !(self.motor_to_motor > T::zero()) || self.prop_diameter < T::zero() {
            return bad("motor_to_motor must be positive".into());
        }
        if !(self.kappa >= T::zero()) {
            return bad("kappa must be non-negative".into());
        }
        let plus = self.spin.iter().filter(|&&s| s == 1).count();
        let minus = self.spin.iter().filter(|&&s| s == -1).count();
        if plus != 2 || minus != 2 {
            return bad(format!("spin pattern needs two +1 and two -1, got {:?}", self.spin));
        }
        if (self.local_inertia - self.local_inertia.transpose()).norm() > T::eps() * self.local_inertia.norm() {
            return bad("local_inertia must be symmetric".into());
        }
        Ok(())
    }

    /// Rotor offsets from the module center in body axes, with their spin signs.
    pub fn rotor_offsets(&self, theta: T) -> [(Vector2<T>, T); 4] {
        let r = self.motor_to_motor / lit(2.0);
        let yaw = match self.mount {
            ModuleMount::BodyAligned => T::zero(),
            ModuleMount::Radial => theta,
        };
        let mut out = [(Vector2::zeros(), T::zero()); 4];
        for (k, slot) in out.iter_mut().enumerate() {
            let a = yaw + T::frac_pi_4() + T::frac_pi_2() * lit(k as f64);
            *slot = (Vector2::new(r * a.cos(), r * a.sin()), lit(self.spin[k] as f64));
        }
        out
    }

    /// Local inertia expressed in body axes for a module placed at `theta`.
    pub fn body_inertia(&self, theta: T) -> Matrix3<T> {
        match self.mount {
            ModuleMount::BodyAligned => self.local_inertia,
            ModuleMount::Radial => {
                let rot = nalgebra::Rotation3::from_axis_angle(&Vector3::z_axis(), theta);
                let r = rot.matrix();
                r * self.local_inertia * r.transpose()
            }
        }
    }
}

/// Placement angles of the modules around the payload plus the shared rod length.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout<T> {
    pub theta: Vec<T>,
    pub rod_length: T,
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle<T: Real>(a: T) -> T {
    let tau = T::two_pi();
    let mut w = a % tau;
    if w < T::zero() {
        w += tau;
    }
    if w >= tau {
        w -= tau;
    }
    w
}

impl<T: Real> Layout<T> {
    pub fn new(theta: Vec<T>, rod_length: T) -> Self {
        Self { theta, rod_length }
    }

    pub fn from_degrees(deg: &[f64], rod_length: T) -> Self {
        Self::new(deg.iter().map(|d| lit(d.to_radians())).collect(), rod_length)
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Angles wrapped into `[0, 2π)` and sorted ascending.
    pub fn canonical(&self) -> Self {
        let mut theta: Vec<T> = self.theta.iter().map(|&a| wrap_angle(a)).collect();
        theta.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        Self { theta, rod_length: self.rod_length }
    }

    pub fn degrees(&self) -> Vec<f64> {
        self.theta.iter().map(|&a| to_f64(a).to_degrees()).collect()
    }
}

/// A single rotor in the assembly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotor<T> {
    /// Position relative to the system center of mass, body axes (mid-plane).
    pub position: Vector2<T>,
    /// Yaw torque per newton of thrust (`±kappa`).
    pub yaw_coeff: T,
}

/// Mass properties of the assembled vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct MassProperties<T> {
    pub total_mass: T,
    /// Inertia about the system CoM, body axes.
    pub inertia: Matrix3<T>,
    pub inertia_inv: Matrix3<T>,
    /// System CoM relative to the payload centroid.
    pub com_offset: Vector2<T>,
    /// Module centers relative to the payload centroid.
    pub attachment_points: Vec<Vector2<T>>,
    /// All 4N rotors, module-major order.
    pub rotors: Vec<Rotor<T>>,
}

impl<T: Real> MassProperties<T> {
    /// Payload centroid (the disturbance application point) relative to the CoM.
    pub fn centroid_from_com(&self) -> Vector2<T> {
        -self.com_offset
    }

    /// Adds a point mass at `point` (relative to the payload centroid) and
    /// re-expresses inertia and rotor positions about the new CoM.
    pub fn with_point_mass(&self, mass: T, point: &Vector2<T>) -> Result<Self> {
        if !(mass > T::zero()) {
            return Err(Error::InvalidPayload("added mass must be positive".into()));
        }
        let total_mass = self.total_mass + mass;
        let com = (self.com_offset * self.total_mass + point * mass) / total_mass;
        let shift = com - self.com_offset;
        // back to the old CoM's parallel-axis origin, then out to the new one
        let inertia = self.inertia + parallel_axis(self.total_mass, &shift) + parallel_axis(mass, &(point - com));
        let inertia = (inertia + inertia.transpose()) * lit::<T>(0.5);
        let inertia_inv = inertia
            .cholesky()
            .ok_or_else(|| Error::InvalidLayout("assembly inertia is not positive definite".into()))?
            .inverse();
        let rotors = self
            .rotors
            .iter()
            .map(|r| Rotor {
                position: r.position - shift,
                yaw_coeff: r.yaw_coeff,
            })
            .collect();
        Ok(Self {
            total_mass,
            inertia,
            inertia_inv,
            com_offset: com,
            attachment_points: self.attachment_points.clone(),
            rotors,
        })
    }
}

/// Module center for placement angle `theta`: the outermost crossing of the
/// ray from the centroid with the boundary, pushed out by `rod_length`.
pub fn attachment_point<T: Real>(theta: T, payload: &PayloadSpec<T>, rod_length: T) -> Result<Vector2<T>> {
    if !theta.is_finite() {
        return Err(Error::InvalidLayout("non-finite angle".into()));
    }
    let t = geometry::outermost_ray_crossing(payload.vertices(), theta)
        .ok_or(Error::NoIntersection { theta: to_f64(theta) })?;
    let dir = Vector2::new(theta.cos(), theta.sin());
    Ok(dir * (t + rod_length))
}

/// Point-mass parallel-axis term `m (|r|² I − r rᵀ)` for an in-plane offset.
pub(crate) fn parallel_axis<T: Real>(mass: T, r: &Vector2<T>) -> Matrix3<T> {
    let r3 = Vector3::new(r.x, r.y, T::zero());
    (Matrix3::identity() * r3.norm_squared() - r3 * r3.transpose()) * mass
}

/// Module centers for every angle of a layout.
pub fn attachment_points<T: Real>(payload: &PayloadSpec<T>, layout: &Layout<T>) -> Result<Vec<Vector2<T>>> {
    layout
        .theta
        .iter()
        .map(|&th| attachment_point(th, payload, layout.rod_length))
        .collect()
}

/// Checks pairwise module spacing against `d_min`.
pub fn check_separation<T: Real>(points: &[Vector2<T>], d_min: T) -> Result<()> {
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let d = (points[i] - points[j]).norm();
            if d < d_min {
                return Err(Error::SeparationViolation {
                    i,
                    j,
                    distance: to_f64(d),
                    d_min: to_f64(d_min),
                });
            }
        }
    }
    Ok(())
}

/// Total mass, CoM and inertia of payload plus modules.
pub fn compose_mass_properties<T: Real>(
    payload: &PayloadSpec<T>,
    quad: &QuadSpec<T>,
    layout: &Layout<T>,
    d_min: T,
) -> Result<MassProperties<T>> {
    let points = attachment_points(payload, layout)?;
    check_separation(&points, d_min)?;

    // sums run in sorted-angle order so a permuted layout gives identical bits
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| layout.theta[a].partial_cmp(&layout.theta[b]).unwrap_or(std::cmp::Ordering::Equal));

    let mq = quad.mass();
    let total_mass = payload.mass + mq * lit(points.len() as f64);
    let weighted = order.iter().fold(Vector2::zeros(), |acc, &i| acc + points[i] * mq);
    let com = weighted / total_mass;

    let mut inertia = payload.inertia() + parallel_axis(payload.mass, &(-com));
    for &i in &order {
        inertia += quad.body_inertia(layout.theta[i]) + parallel_axis(mq, &(points[i] - com));
    }
    let mut rotors = Vec::with_capacity(4 * points.len());
    for (p, &th) in points.iter().zip(&layout.theta) {
        let r = p - com;
        for (offset, sign) in quad.rotor_offsets(th) {
            rotors.push(Rotor {
                position: r + offset,
                yaw_coeff: sign * quad.kappa,
            });
        }
    }
    inertia = (inertia + inertia.transpose()) * lit::<T>(0.5);
    let inertia_inv = inertia
        .cholesky()
        .ok_or_else(|| Error::InvalidLayout("assembly inertia is not positive definite".into()))?
        .inverse();

    Ok(MassProperties {
        total_mass,
        inertia,
        inertia_inv,
        com_offset: com,
        attachment_points: points,
        rotors,
    })
}
