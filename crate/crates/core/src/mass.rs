//! Rigid mass distributions and their spatial Fourier transforms.
//!
//! Geometry is described in SI units in a fixed laboratory frame. The
//! supported primitives are axis-aligned cuboids, spheres and multilayer
//! stacks (alternating-density layer packs). A [`CompositeMass`] is an
//! ordered list of components plus the motion axis of the resonator mode;
//! component overlap is not checked.
//!
//! All types are immutable after construction and the transforms are pure
//! functions, safe to evaluate from many threads at once.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub type Vec3 = [f64; 3];

pub(crate) fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

fn normalized(a: &Vec3) -> Vec3 {
    let n = norm(a);
    [a[0] / n, a[1] / n, a[2] / n]
}

/// Completes `axis` to a right-handed orthonormal triad `(u, v, axis)`,
/// deterministically: `u` is built from the coordinate axis least parallel
/// to `axis`.
pub(crate) fn orthonormal_triad(axis: &Vec3) -> (Vec3, Vec3) {
    let abs = [axis[0].abs(), axis[1].abs(), axis[2].abs()];
    let mut k = 0;
    for i in 1..3 {
        if abs[i] < abs[k] {
            k = i;
        }
    }
    let mut e = [0.0; 3];
    e[k] = 1.0;
    let u = normalized(&cross(&e, axis));
    let v = cross(axis, &u);
    (u, v)
}

/// Invalid geometry parameter.
#[derive(Debug, Clone, thiserror::Error)]
pub enum GeometryError {
    #[error("{context}: {field} must be positive, got {value}")]
    NonPositive {
        context: &'static str,
        field: &'static str,
        value: f64,
    },
    #[error("multilayer stack requires rho1 > rho2 > 0 (got rho1 = {rho1}, rho2 = {rho2})")]
    DensityOrder { rho1: f64, rho2: f64 },
    #[error("{context}: axis must have unit norm (got |a| = {norm})")]
    NotUnit { context: &'static str, norm: f64 },
    #[error("composite mass needs at least one component")]
    Empty,
    #[error("geometry file: {0}")]
    Parse(String),
}

fn ensure_positive(context: &'static str, field: &'static str, value: f64) -> Result<(), GeometryError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(GeometryError::NonPositive { context, field, value })
    }
}

fn ensure_unit(context: &'static str, v: &Vec3) -> Result<Vec3, GeometryError> {
    let n = norm(v);
    if (n - 1.0).abs() > 1e-6 {
        return Err(GeometryError::NotUnit { context, norm: n });
    }
    Ok(normalized(v))
}

/// Homogeneous axis-aligned cuboid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cuboid {
    /// Mass density (kg/m^3).
    pub density: f64,
    /// Side lengths along x, y, z (m).
    pub lengths: Vec3,
    /// Centre position (m).
    pub center: Vec3,
}

impl Cuboid {
    pub fn new(density: f64, lengths: Vec3, center: Vec3) -> Result<Self, GeometryError> {
        ensure_positive("cuboid", "density", density)?;
        for l in lengths {
            ensure_positive("cuboid", "length", l)?;
        }
        Ok(Self { density, lengths, center })
    }

    pub fn mass(&self) -> f64 {
        self.density * self.lengths[0] * self.lengths[1] * self.lengths[2]
    }
}

/// Homogeneous sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sphere {
    /// Mass density (kg/m^3).
    pub density: f64,
    /// Radius (m).
    pub radius: f64,
    /// Centre position (m).
    pub center: Vec3,
}

impl Sphere {
    pub fn new(density: f64, radius: f64, center: Vec3) -> Result<Self, GeometryError> {
        ensure_positive("sphere", "density", density)?;
        ensure_positive("sphere", "radius", radius)?;
        Ok(Self { density, radius, center })
    }

    pub fn mass(&self) -> f64 {
        self.density * 4.0 / 3.0 * std::f64::consts::PI * self.radius.powi(3)
    }
}

/// Stack of `2 n_lay + 1` contiguous equal-thickness layers with
/// alternating densities; `rho1` layers sit at both ends. The stack centre
/// is the geometric midpoint and the layers are rectangles `l1 x l2`
/// normal to `axis`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultilayerStack {
    /// Density of the odd (outer) layers (kg/m^3).
    pub rho1: f64,
    /// Density of the even layers (kg/m^3); invariant rho1 > rho2 > 0.
    pub rho2: f64,
    /// Layer-pair count: total layers = 2 n_lay + 1.
    pub n_lay: u32,
    /// Single layer thickness (m).
    pub thickness: f64,
    /// Base lengths (m).
    pub l1: f64,
    pub l2: f64,
    /// Centre position (m).
    pub center: Vec3,
    /// Stacking direction, unit norm.
    pub axis: Vec3,
}

impl MultilayerStack {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        rho1: f64,
        rho2: f64,
        n_lay: u32,
        thickness: f64,
        l1: f64,
        l2: f64,
        center: Vec3,
        axis: Vec3,
    ) -> Result<Self, GeometryError> {
        if !(rho1 > rho2 && rho2 > 0.0) {
            return Err(GeometryError::DensityOrder { rho1, rho2 });
        }
        ensure_positive("stack", "thickness", thickness)?;
        ensure_positive("stack", "l1", l1)?;
        ensure_positive("stack", "l2", l2)?;
        let axis = ensure_unit("stack", &axis)?;
        Ok(Self {
            rho1,
            rho2,
            n_lay,
            thickness,
            l1,
            l2,
            center,
            axis,
        })
    }

    /// Total number of layers.
    pub fn layer_count(&self) -> u32 {
        2 * self.n_lay + 1
    }

    /// Density of layer `j` (0-based; outer layers are `rho1`).
    pub fn layer_density(&self, j: u32) -> f64 {
        if j.is_multiple_of(2) {
            self.rho1
        } else {
            self.rho2
        }
    }

    /// Signed offset of layer `j`'s centre along the stacking axis.
    pub fn layer_offset(&self, j: u32) -> f64 {
        (j as f64 - (self.layer_count() as f64 - 1.0) / 2.0) * self.thickness
    }

    pub fn mass(&self) -> f64 {
        let n = self.n_lay as f64;
        ((n + 1.0) * self.rho1 + n * self.rho2) * self.thickness * self.l1 * self.l2
    }
}

/// One rigid component of the composite test mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Component {
    Cuboid(Cuboid),
    Sphere(Sphere),
    Multilayer(MultilayerStack),
}

impl Component {
    pub fn mass(&self) -> f64 {
        match self {
            Component::Cuboid(c) => c.mass(),
            Component::Sphere(s) => s.mass(),
            Component::Multilayer(m) => m.mass(),
        }
    }

    pub fn center(&self) -> Vec3 {
        match self {
            Component::Cuboid(c) => c.center,
            Component::Sphere(s) => s.center,
            Component::Multilayer(m) => m.center,
        }
    }

    fn validate(&self) -> Result<Component, GeometryError> {
        match *self {
            Component::Cuboid(c) => Cuboid::new(c.density, c.lengths, c.center).map(Component::Cuboid),
            Component::Sphere(s) => Sphere::new(s.density, s.radius, s.center).map(Component::Sphere),
            Component::Multilayer(m) => MultilayerStack::new(
                m.rho1, m.rho2, m.n_lay, m.thickness, m.l1, m.l2, m.center, m.axis,
            )
            .map(Component::Multilayer),
        }
    }
}

/// Composite mass distribution plus the motion axis entering the
/// force-noise integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeMass {
    /// Direction of the resonator mode displacement, unit norm.
    pub motion_axis: Vec3,
    pub components: Vec<Component>,
}

impl CompositeMass {
    pub fn new(motion_axis: Vec3, components: Vec<Component>) -> Result<Self, GeometryError> {
        if components.is_empty() {
            return Err(GeometryError::Empty);
        }
        let motion_axis = ensure_unit("composite", &motion_axis)?;
        let components = components
            .iter()
            .map(|c| c.validate())
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { motion_axis, components })
    }

    /// Parse and validate a geometry description (JSON, see the bundled
    /// example for the schema).
    pub fn from_json(text: &str) -> Result<Self, GeometryError> {
        let raw: CompositeMass =
            serde_json::from_str(text).map_err(|e| GeometryError::Parse(e.to_string()))?;
        Self::new(raw.motion_axis, raw.components)
    }

    pub fn total_mass(&self) -> f64 {
        self.components.iter().map(|c| c.mass()).sum()
    }
}

/// Bundled example geometry: silicon cantilever, alternating WO3/SiO2
/// 47-layer test mass and ferromagnetic microsphere. Component positions
/// are best-effort estimates from micrographs and are flagged approximate
/// in the file itself.
pub fn example_geometry_json() -> &'static str {
    include_str!("../data/layered_cantilever.json")
}

/// Parsed form of [`example_geometry_json`].
pub fn example_geometry() -> CompositeMass {
    CompositeMass::from_json(example_geometry_json()).expect("bundled geometry is valid")
}

/// `(2/q) sin(q L/2)`: Fourier transform of a unit-height interval of
/// length `L`. Series branch below |qL| = 1e-6 avoids the 0/0.
pub(crate) fn interval_transform(q: f64, l: f64) -> f64 {
    let x = 0.5 * q * l;
    if (q * l).abs() < 1e-6 {
        l * (1.0 - x * x / 6.0 * (1.0 - x * x / 20.0))
    } else {
        2.0 * x.sin() / q
    }
}

/// `4 pi (sin x - x cos x) / q^3` with `x = qR`: transform of a unit-density
/// ball. The subtraction cancels catastrophically for small x, so the
/// series branch extends up to x = 1e-2 where the direct form is still
/// good to ~1e-11 relative.
pub(crate) fn ball_transform(q: f64, radius: f64) -> f64 {
    let x = q * radius;
    let v = 4.0 / 3.0 * std::f64::consts::PI * radius.powi(3);
    if x.abs() < 1e-2 {
        let x2 = x * x;
        v * (1.0 - x2 / 10.0 * (1.0 - x2 / 28.0 * (1.0 - x2 / 54.0)))
    } else {
        4.0 * std::f64::consts::PI * (x.sin() - x * x.cos()) / (q * q * q)
    }
}

fn phase(q: &Vec3, center: &Vec3) -> Complex64 {
    Complex64::from_polar(1.0, -dot(q, center))
}

/// Spatial Fourier transform of one component,
/// `rho_tilde(q) = \int rho(r) e^{-i q . r} d^3 r` (kg), including the
/// translation phase of its centre. At `q = 0` this is the component mass.
pub fn fourier_transform(component: &Component, q: &Vec3) -> Complex64 {
    match component {
        Component::Cuboid(c) => {
            let f = c.density
                * interval_transform(q[0], c.lengths[0])
                * interval_transform(q[1], c.lengths[1])
                * interval_transform(q[2], c.lengths[2]);
            phase(q, &c.center) * f
        }
        Component::Sphere(s) => phase(q, &s.center) * (s.density * ball_transform(norm(q), s.radius)),
        Component::Multilayer(m) => {
            let (u, v) = orthonormal_triad(&m.axis);
            let qu = dot(q, &u);
            let qv = dot(q, &v);
            let qs = dot(q, &m.axis);
            let base = interval_transform(qu, m.l1)
                * interval_transform(qv, m.l2)
                * interval_transform(qs, m.thickness);
            // Sum of displaced equal layers; the offsets are symmetric
            // around the stack centre so the sum is real.
            let mut comb = 0.0;
            for j in 0..m.layer_count() {
                comb += m.layer_density(j) * (qs * m.layer_offset(j)).cos();
            }
            phase(q, &m.center) * (base * comb)
        }
    }
}

/// Coherent transform of the whole composite: the sum of component
/// transforms, phases included, so |rho_tilde|^2 carries every
/// interference term.
pub fn composite_transform(mass: &CompositeMass, q: &Vec3) -> Complex64 {
    mass.components
        .iter()
        .map(|c| fourier_transform(c, q))
        .sum()
}
