//! Parametrized surfaces and their curvature.
//!
//! A [`SurfaceChart`] maps chart coordinates `(q1, q2)` to points `r(q1, q2)` in
//! Euclidean space. From it we evaluate the first fundamental form
//! `g_ab = d_a r . d_b r`, the Weingarten matrix `alpha` defined by
//! `d_a N = alpha_ab d_b r`, the mean curvature `M = tr(alpha)/2`, the Gaussian
//! curvature `K = det(alpha)` and the geometric potential `V_g = -(M^2 - K)`
//! (natural units, energies in `e0`).
//!
//! Built-in shapes carry analytic first and second derivatives. Every chart can
//! also be evaluated with central finite differences of the position map alone,
//! which is the only option for [`Shape::Custom`].

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix2, Vector3};

use crate::error::{Error, Result};

pub type SurfacePoint = [f64; 2];

/// Position map of a user-supplied surface.
pub type PositionMap = Arc<dyn Fn(f64, f64) -> Vector3<f64> + Send + Sync>;

/// Relative step used when no explicit finite-difference step is given.
pub const DEFAULT_FD_STEP_FRACTION: f64 = 1e-4;

#[derive(Clone)]
pub enum Shape {
    /// `r = (q1, q2, 0)`.
    Plane,
    /// `r = (R cos t, R sin t, z)` with `q = (t, z)`, or `q = (R t, z)` in the
    /// arclength convention.
    Cylinder { radius: f64, arclength: bool },
    /// `r = R (sin p cos t, sin p sin t, cos p)` with `q = (p, t)`, `p` the polar angle.
    Sphere { radius: f64 },
    /// `r = ((R + rho cos v) cos u, (R + rho cos v) sin u, rho sin v)` with `q = (u, v)`.
    Torus { major: f64, minor: f64 },
    /// `r = (c cosh(u/c) cos v, c cosh(u/c) sin v, u)` with `q = (u, v)`.
    Catenoid { waist: f64 },
    Custom(PositionMap),
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Plane => write!(f, "Plane"),
            Shape::Cylinder { radius, arclength } => f
                .debug_struct("Cylinder")
                .field("radius", radius)
                .field("arclength", arclength)
                .finish(),
            Shape::Sphere { radius } => f.debug_struct("Sphere").field("radius", radius).finish(),
            Shape::Torus { major, minor } => f
                .debug_struct("Torus")
                .field("major", major)
                .field("minor", minor)
                .finish(),
            Shape::Catenoid { waist } => f.debug_struct("Catenoid").field("waist", waist).finish(),
            Shape::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Rectangular coordinate domain with per-axis periodicity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DomainBox {
    pub lower: [f64; 2],
    pub upper: [f64; 2],
    pub periodic: [bool; 2],
}

impl DomainBox {
    pub fn new(lower: [f64; 2], upper: [f64; 2], periodic: [bool; 2]) -> Result<Self> {
        for axis in 0..2 {
            if !(lower[axis].is_finite() && upper[axis].is_finite() && upper[axis] > lower[axis]) {
                return Err(Error::validation(
                    "domain",
                    format!(
                        "axis {axis} needs finite bounds with upper > lower, got [{}, {}]",
                        lower[axis], upper[axis]
                    ),
                ));
            }
        }
        Ok(Self {
            lower,
            upper,
            periodic,
        })
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    /// Periodic axes accept any coordinate; bounded axes allow a relative slack of 1e-12.
    pub fn contains(&self, q: SurfacePoint) -> bool {
        (0..2).all(|axis| {
            if self.periodic[axis] {
                return q[axis].is_finite();
            }
            let slack = 1e-12 * self.extent(axis);
            q[axis] >= self.lower[axis] - slack && q[axis] <= self.upper[axis] + slack
        })
    }
}

/// Sign applied to the normal `d_1 r x d_2 r / |d_1 r x d_2 r|`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Orientation {
    #[default]
    Positive,
    Negative,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Positive => 1.0,
            Orientation::Negative => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Orientation::Positive => Orientation::Negative,
            Orientation::Negative => Orientation::Positive,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EvalMode {
    Analytic,
    /// Central differences of the position map. `step` defaults to
    /// [`DEFAULT_FD_STEP_FRACTION`] times the domain extent of each axis.
    FiniteDifference { step: Option<[f64; 2]> },
}

#[derive(Clone, Debug)]
pub struct SurfaceChart {
    shape: Shape,
    domain: DomainBox,
    orientation: Orientation,
    mode: EvalMode,
}

/// Weingarten matrix and the curvatures derived from it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvatureData {
    pub weingarten: Matrix2<f64>,
    pub mean_curvature: f64,
    pub gaussian_curvature: f64,
    /// Relative residual of `d_a N - alpha_ab d_b r`.
    pub residual: f64,
}

impl CurvatureData {
    fn from_weingarten(weingarten: Matrix2<f64>, residual: f64) -> Self {
        Self {
            weingarten,
            mean_curvature: 0.5 * weingarten.trace(),
            gaussian_curvature: weingarten.determinant(),
            residual,
        }
    }

    /// `M^2 - K = ((k1 - k2)/2)^2`, computed from the discriminant so that
    /// umbilic points give exactly zero instead of a signed rounding residue.
    pub fn anisotropy(&self) -> f64 {
        let a = &self.weingarten;
        let d = a[(0, 0)] - a[(1, 1)];
        let value = 0.25 * (d * d + 4.0 * a[(0, 1)] * a[(1, 0)]);
        // below the rounding level of the entries the difference carries no information
        let noise = 4.0 * f64::EPSILON * a.abs().max();
        if value <= noise * noise {
            0.0
        } else {
            value
        }
    }

    pub fn principal_curvatures(&self) -> (f64, f64) {
        let half_gap = self.anisotropy().sqrt();
        (self.mean_curvature + half_gap, self.mean_curvature - half_gap)
    }

    /// `V_g = -(M^2 - K)` in units of `e0`.
    pub fn geometric_potential(&self) -> f64 {
        -self.anisotropy()
    }
}

struct Jet {
    d1: Vector3<f64>,
    d2: Vector3<f64>,
    d11: Vector3<f64>,
    d12: Vector3<f64>,
    d22: Vector3<f64>,
}

impl SurfaceChart {
    pub fn new(shape: Shape, domain: DomainBox) -> Result<Self> {
        validate_shape(&shape)?;
        let mode = match shape {
            Shape::Custom(_) => EvalMode::FiniteDifference { step: None },
            _ => EvalMode::Analytic,
        };
        Ok(Self {
            shape,
            domain,
            orientation: Orientation::Positive,
            mode,
        })
    }

    pub fn plane(width: f64, height: f64) -> Result<Self> {
        Self::new(
            Shape::Plane,
            DomainBox::new([0.0, 0.0], [width, height], [false, false])?,
        )
    }

    /// Cylinder in `(theta, z)` coordinates, `z` in `[0, 10]` unless overridden.
    pub fn cylinder(radius: f64) -> Result<Self> {
        Self::new(
            Shape::Cylinder {
                radius,
                arclength: false,
            },
            DomainBox::new([0.0, 0.0], [2.0 * PI, 10.0], [true, false])?,
        )
    }

    /// Cylinder in arclength coordinates `(r theta, z)`.
    pub fn cylinder_arclength(radius: f64) -> Result<Self> {
        Self::new(
            Shape::Cylinder {
                radius,
                arclength: true,
            },
            DomainBox::new([0.0, 0.0], [2.0 * PI * radius, 10.0], [true, false])?,
        )
    }

    /// Sphere in `(polar, azimuth)` coordinates. The poles are coordinate singularities.
    pub fn sphere(radius: f64) -> Result<Self> {
        Self::new(
            Shape::Sphere { radius },
            DomainBox::new([0.0, 0.0], [PI, 2.0 * PI], [false, true])?,
        )
    }

    pub fn torus(major: f64, minor: f64) -> Result<Self> {
        Self::new(
            Shape::Torus { major, minor },
            DomainBox::new([0.0, 0.0], [2.0 * PI, 2.0 * PI], [true, true])?,
        )
    }

    pub fn catenoid(waist: f64) -> Result<Self> {
        Self::new(
            Shape::Catenoid { waist },
            DomainBox::new([-2.0 * waist, 0.0], [2.0 * waist, 2.0 * PI], [false, true])?,
        )
    }

    pub fn custom(map: PositionMap, domain: DomainBox) -> Result<Self> {
        Self::new(Shape::Custom(map), domain)
    }

    pub fn with_domain(mut self, domain: DomainBox) -> Self {
        self.domain = domain;
        self
    }

    pub fn with_orientation(mut self, orientation: Orientation) -> Self {
        self.orientation = orientation;
        self
    }

    pub fn with_mode(mut self, mode: EvalMode) -> Result<Self> {
        if mode == EvalMode::Analytic && matches!(self.shape, Shape::Custom(_)) {
            return Err(Error::validation(
                "mode",
                "custom charts have no analytic derivatives; use finite differences",
            ));
        }
        self.mode = mode;
        Ok(self)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn mode(&self) -> EvalMode {
        self.mode
    }

    pub fn position(&self, q: SurfacePoint) -> Vector3<f64> {
        let [a, b] = q;
        match &self.shape {
            Shape::Plane => Vector3::new(a, b, 0.0),
            Shape::Cylinder { radius, arclength } => {
                let t = if *arclength { a / radius } else { a };
                Vector3::new(radius * t.cos(), radius * t.sin(), b)
            }
            Shape::Sphere { radius } => Vector3::new(
                radius * a.sin() * b.cos(),
                radius * a.sin() * b.sin(),
                radius * a.cos(),
            ),
            Shape::Torus { major, minor } => {
                let rho = major + minor * b.cos();
                Vector3::new(rho * a.cos(), rho * a.sin(), minor * b.sin())
            }
            Shape::Catenoid { waist } => {
                let rho = waist * (a / waist).cosh();
                Vector3::new(rho * b.cos(), rho * b.sin(), a)
            }
            Shape::Custom(map) => map(a, b),
        }
    }

    /// First fundamental form `g_ab = d_a r . d_b r`.
    pub fn metric(&self, q: SurfacePoint) -> Result<Matrix2<f64>> {
        self.check_point(q)?;
        let (d1, d2) = self.tangents(q)?;
        let g = gram(&d1, &d2);
        self.check_nondegenerate(q, &g)?;
        Ok(g)
    }

    /// Unit normal, oriented by the chart's orientation flag.
    pub fn normal(&self, q: SurfacePoint) -> Result<Vector3<f64>> {
        self.check_point(q)?;
        let (d1, d2) = self.tangents(q)?;
        self.check_nondegenerate(q, &gram(&d1, &d2))?;
        Ok(self.orientation.sign() * d1.cross(&d2).normalize())
    }

    /// Weingarten matrix from `(d_a N).(d_c r) = alpha_ab g_bc`, with `M` and `K`.
    pub fn curvature(&self, q: SurfacePoint) -> Result<CurvatureData> {
        self.check_point(q)?;
        let (d1, d2) = self.tangents(q)?;
        let g = gram(&d1, &d2);
        self.check_nondegenerate(q, &g)?;
        let dn = self.normal_derivatives(q)?;

        let projections = Matrix2::new(dn[0].dot(&d1), dn[0].dot(&d2), dn[1].dot(&d1), dn[1].dot(&d2));
        let g_inv = g
            .try_inverse()
            .ok_or(Error::SingularChart { q1: q[0], q2: q[1], det: g.determinant() })?;
        let weingarten = projections * g_inv;

        let scale = dn[0].norm().max(dn[1].norm()).max(f64::MIN_POSITIVE);
        let residual = (0..2)
            .map(|a| (dn[a] - (weingarten[(a, 0)] * d1 + weingarten[(a, 1)] * d2)).norm())
            .fold(0.0, f64::max)
            / scale;
        Ok(CurvatureData::from_weingarten(weingarten, residual))
    }

    /// `V_g = -(M^2 - K)` in `e0`; never positive.
    pub fn geometric_potential(&self, q: SurfacePoint) -> Result<f64> {
        Ok(self.curvature(q)?.geometric_potential())
    }

    fn check_point(&self, q: SurfacePoint) -> Result<()> {
        if self.domain.contains(q) {
            Ok(())
        } else {
            Err(Error::Domain { q1: q[0], q2: q[1] })
        }
    }

    fn check_nondegenerate(&self, q: SurfacePoint, g: &Matrix2<f64>) -> Result<()> {
        let det = g.determinant();
        let scale = g.trace() * g.trace();
        if !(det > 1e-14 * scale) || g[(0, 0)] <= 0.0 {
            return Err(Error::SingularChart { q1: q[0], q2: q[1], det });
        }
        Ok(())
    }

    fn fd_steps(&self, q: SurfacePoint) -> Result<[f64; 2]> {
        let step = match self.mode {
            EvalMode::FiniteDifference { step: Some(step) } => step,
            _ => [
                DEFAULT_FD_STEP_FRACTION * self.domain.extent(0),
                DEFAULT_FD_STEP_FRACTION * self.domain.extent(1),
            ],
        };
        for axis in 0..2 {
            let scale = q[axis].abs().max(1.0);
            if !(step[axis].is_finite() && step[axis] > 64.0 * f64::EPSILON * scale) {
                return Err(Error::StepSize {
                    step: step[axis],
                    scale,
                });
            }
        }
        Ok(step)
    }

    fn tangents(&self, q: SurfacePoint) -> Result<(Vector3<f64>, Vector3<f64>)> {
        match self.mode {
            EvalMode::Analytic => {
                let jet = self.jet(q).expect("analytic mode requires a built-in shape");
                Ok((jet.d1, jet.d2))
            }
            EvalMode::FiniteDifference { .. } => {
                let h = self.fd_steps(q)?;
                Ok(self.fd_tangents(q, h))
            }
        }
    }

    fn fd_tangents(&self, q: SurfacePoint, h: [f64; 2]) -> (Vector3<f64>, Vector3<f64>) {
        let [a, b] = q;
        let d1 = (self.position([a + h[0], b]) - self.position([a - h[0], b])) / (2.0 * h[0]);
        let d2 = (self.position([a, b + h[1]]) - self.position([a, b - h[1]])) / (2.0 * h[1]);
        (d1, d2)
    }

    fn normal_derivatives(&self, q: SurfacePoint) -> Result<[Vector3<f64>; 2]> {
        let sign = self.orientation.sign();
        match self.mode {
            EvalMode::Analytic => {
                let jet = self.jet(q).expect("analytic mode requires a built-in shape");
                let n = jet.d1.cross(&jet.d2);
                let norm = n.norm();
                let unit = n / norm;
                let dn1 = jet.d11.cross(&jet.d2) + jet.d1.cross(&jet.d12);
                let dn2 = jet.d12.cross(&jet.d2) + jet.d1.cross(&jet.d22);
                let project = |dn: Vector3<f64>| sign * (dn - unit * unit.dot(&dn)) / norm;
                Ok([project(dn1), project(dn2)])
            }
            EvalMode::FiniteDifference { .. } => {
                let h = self.fd_steps(q)?;
                let unit_normal = |p: SurfacePoint| {
                    let (d1, d2) = self.fd_tangents(p, h);
                    d1.cross(&d2).normalize()
                };
                let [a, b] = q;
                let dn1 = (unit_normal([a + h[0], b]) - unit_normal([a - h[0], b])) / (2.0 * h[0]);
                let dn2 = (unit_normal([a, b + h[1]]) - unit_normal([a, b - h[1]])) / (2.0 * h[1]);
                Ok([sign * dn1, sign * dn2])
            }
        }
    }

    fn jet(&self, q: SurfacePoint) -> Option<Jet> {
        let [a, b] = q;
        let zero = Vector3::zeros();
        let jet = match &self.shape {
            Shape::Plane => Jet {
                d1: Vector3::x(),
                d2: Vector3::y(),
                d11: zero,
                d12: zero,
                d22: zero,
            },
            Shape::Cylinder { radius, arclength } => {
                // chain rule factor for the arclength convention
                let c = if *arclength { 1.0 / radius } else { 1.0 };
                let t = a * c;
                let (s, co) = t.sin_cos();
                Jet {
                    d1: c * radius * Vector3::new(-s, co, 0.0),
                    d2: Vector3::z(),
                    d11: c * c * radius * Vector3::new(-co, -s, 0.0),
                    d12: zero,
                    d22: zero,
                }
            }
            Shape::Sphere { radius } => {
                let (sp, cp) = a.sin_cos();
                let (st, ct) = b.sin_cos();
                Jet {
                    d1: *radius * Vector3::new(cp * ct, cp * st, -sp),
                    d2: *radius * Vector3::new(-sp * st, sp * ct, 0.0),
                    d11: *radius * Vector3::new(-sp * ct, -sp * st, -cp),
                    d12: *radius * Vector3::new(-cp * st, cp * ct, 0.0),
                    d22: *radius * Vector3::new(-sp * ct, -sp * st, 0.0),
                }
            }
            Shape::Torus { major, minor } => {
                let (su, cu) = a.sin_cos();
                let (sv, cv) = b.sin_cos();
                let rho = major + minor * cv;
                Jet {
                    d1: Vector3::new(-rho * su, rho * cu, 0.0),
                    d2: Vector3::new(-minor * sv * cu, -minor * sv * su, minor * cv),
                    d11: Vector3::new(-rho * cu, -rho * su, 0.0),
                    d12: Vector3::new(minor * sv * su, -minor * sv * cu, 0.0),
                    d22: Vector3::new(-minor * cv * cu, -minor * cv * su, -minor * sv),
                }
            }
            Shape::Catenoid { waist } => {
                let x = a / waist;
                let (sv, cv) = b.sin_cos();
                let (ch, sh) = (x.cosh(), x.sinh());
                Jet {
                    d1: Vector3::new(sh * cv, sh * sv, 1.0),
                    d2: Vector3::new(-waist * ch * sv, waist * ch * cv, 0.0),
                    d11: Vector3::new(ch * cv / waist, ch * sv / waist, 0.0),
                    d12: Vector3::new(-sh * sv, sh * cv, 0.0),
                    d22: Vector3::new(-waist * ch * cv, -waist * ch * sv, 0.0),
                }
            }
            Shape::Custom(_) => return None,
        };
        Some(jet)
    }
}

fn gram(d1: &Vector3<f64>, d2: &Vector3<f64>) -> Matrix2<f64> {
    let off = d1.dot(d2);
    Matrix2::new(d1.dot(d1), off, off, d2.dot(d2))
}

fn validate_shape(shape: &Shape) -> Result<()> {
    let positive = |field: &'static str, v: f64| {
        if v.is_finite() && v > 0.0 {
            Ok(())
        } else {
            Err(Error::validation(field, format!("must be positive and finite, got {v}")))
        }
    };
    match shape {
        Shape::Cylinder { radius, .. } | Shape::Sphere { radius } => positive("radius", *radius),
        Shape::Torus { major, minor } => {
            positive("major", *major)?;
            positive("minor", *minor)?;
            if minor >= major {
                return Err(Error::validation(
                    "minor",
                    format!("a ring torus needs minor < major, got {minor} >= {major}"),
                ));
            }
            Ok(())
        }
        Shape::Catenoid { waist } => positive("waist", *waist),
        Shape::Plane | Shape::Custom(_) => Ok(()),
    }
}
