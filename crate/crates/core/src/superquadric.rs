//! Superquadric primitive: parameters, inside-outside function, radial
//! distance, occupancy and its analytic gradient.
//!
//! All evaluation happens in the superquadric's local frame, obtained by
//! undoing the translation and then the rotation. Powers are evaluated in
//! log space so that far-away points never overflow the intermediate sums.

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use thiserror::Error;

/// Lower clamp applied to `|coordinate|` before taking fractional powers.
pub const COORD_FLOOR: f64 = 1e-9;

/// Number of free parameters: 3 sizes, 2 shape exponents, 3 translations,
/// 3 rotation tangent components.
pub const PARAM_DOF: usize = 11;

/// Length of the serialized parameter vector (quaternion stored as 4 numbers).
pub const PARAM_LEN: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SqError {
    #[error("size a{axis} = {value} outside [{min}, {max}]")]
    SizeOutOfBounds {
        axis: usize,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("shape exponent e{index} = {value} outside [{min}, {max}]")]
    ShapeOutOfBounds {
        index: usize,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("quaternion norm {0} is not 1")]
    NotUnitQuaternion(f64),
    #[error("non-finite parameter")]
    NonFiniteParameter,
    #[error("non-finite gradient component {0}")]
    NonFiniteGradient(usize),
    #[error("invalid bounds: {0}")]
    InvalidBounds(String),
    #[error("sharpness must be positive and finite, got {0}")]
    InvalidSharpness(f64),
}

/// Box constraints on sizes and shape exponents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub a_min: f64,
    pub a_max: f64,
    pub e_min: f64,
    pub e_max: f64,
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            a_min: 0.005,
            a_max: 1.0,
            e_min: 0.1,
            e_max: 1.9,
        }
    }
}

impl Bounds {
    pub fn validate(&self) -> Result<(), SqError> {
        let ok = self.a_min > 0.0
            && self.a_min <= self.a_max
            && self.e_min > 0.0
            && self.e_min <= self.e_max
            && [self.a_min, self.a_max, self.e_min, self.e_max]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(SqError::InvalidBounds(format!("{self:?}")))
        }
    }
}

/// Sharpness of the sigmoid occupancy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OccupancyConfig {
    sharpness: f64,
}

impl OccupancyConfig {
    pub fn new(sharpness: f64) -> Result<Self, SqError> {
        if sharpness > 0.0 && sharpness.is_finite() {
            Ok(Self { sharpness })
        } else {
            Err(SqError::InvalidSharpness(sharpness))
        }
    }

    pub fn sharpness(&self) -> f64 {
        self.sharpness
    }
}

impl Default for OccupancyConfig {
    fn default() -> Self {
        Self { sharpness: 10.0 }
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Superquadric {
    /// Half-lengths `a1, a2, a3` along the local axes.
    pub size: Vector3<f64>,
    /// Exponent shaping the z profile (`ε₁`).
    pub e1: f64,
    /// Exponent shaping the xy cross-section (`ε₂`).
    pub e2: f64,
    pub translation: Vector3<f64>,
    pub rotation: UnitQuaternion<f64>,
}

/// Intermediate quantities of one evaluation, shared between the value and
/// the gradient.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LocalEval {
    pub local: Vector3<f64>,
    /// `ln(max(|p_k|, floor) / a_k)` scaled by the axis exponent.
    lu: f64,
    lv: f64,
    lw: f64,
    /// `ln(U + V)`
    ln_a: f64,
    /// `ln F`
    pub ln_f: f64,
}

impl Superquadric {
    pub fn new(
        size: [f64; 3],
        e1: f64,
        e2: f64,
        translation: [f64; 3],
        rotation: UnitQuaternion<f64>,
    ) -> Self {
        Self {
            size: Vector3::from(size),
            e1,
            e2,
            translation: Vector3::from(translation),
            rotation,
        }
    }

    pub fn sphere(radius: f64, center: [f64; 3]) -> Self {
        Self::new([radius; 3], 1.0, 1.0, center, UnitQuaternion::identity())
    }

    pub fn validate(&self, bounds: &Bounds) -> Result<(), SqError> {
        if !self.params().iter().all(|v| v.is_finite()) {
            return Err(SqError::NonFiniteParameter);
        }
        for (axis, &value) in self.size.iter().enumerate() {
            if value < bounds.a_min || value > bounds.a_max {
                return Err(SqError::SizeOutOfBounds {
                    axis: axis + 1,
                    value,
                    min: bounds.a_min,
                    max: bounds.a_max,
                });
            }
        }
        for (index, value) in [(1, self.e1), (2, self.e2)] {
            if value < bounds.e_min || value > bounds.e_max {
                return Err(SqError::ShapeOutOfBounds {
                    index,
                    value,
                    min: bounds.e_min,
                    max: bounds.e_max,
                });
            }
        }
        let norm = self.rotation.quaternion().norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(SqError::NotUnitQuaternion(norm));
        }
        Ok(())
    }

    /// `[a1, a2, a3, e1, e2, t1, t2, t3, qw, qx, qy, qz]`
    pub fn params(&self) -> [f64; PARAM_LEN] {
        let q = self.rotation.quaternion();
        [
            self.size.x,
            self.size.y,
            self.size.z,
            self.e1,
            self.e2,
            self.translation.x,
            self.translation.y,
            self.translation.z,
            q.w,
            q.i,
            q.j,
            q.k,
        ]
    }

    /// Inverse of [`Superquadric::params`]. The quaternion is taken as stored
    /// (no renormalization) so that round-trips are bit exact; its norm must
    /// already be 1 within 1e-9.
    pub fn from_params(p: &[f64; PARAM_LEN]) -> Result<Self, SqError> {
        if !p.iter().all(|v| v.is_finite()) {
            return Err(SqError::NonFiniteParameter);
        }
        let q = Quaternion::new(p[8], p[9], p[10], p[11]);
        let norm = q.norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(SqError::NotUnitQuaternion(norm));
        }
        Ok(Self::new(
            [p[0], p[1], p[2]],
            p[3],
            p[4],
            [p[5], p[6], p[7]],
            UnitQuaternion::new_unchecked(q),
        ))
    }

    /// Applies `R(q)⁻¹ (x − t)`.
    pub fn world_to_local(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.inverse_transform_vector(&(x - self.translation))
    }

    pub fn local_to_world(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transform_vector(p) + self.translation
    }

    /// Same superquadric with its rotation composed with a body-frame
    /// rotation vector `omega`, renormalized.
    pub fn rotated_by_tangent(&self, omega: &Vector3<f64>) -> Self {
        let mut out = *self;
        let q = self.rotation * UnitQuaternion::from_scaled_axis(*omega);
        out.rotation = UnitQuaternion::new_normalize(q.into_inner());
        out
    }

    pub(crate) fn eval_local(&self, local: Vector3<f64>) -> LocalEval {
        self.eval_local_with(local, &self.size.map(f64::ln))
    }

    /// [`Self::eval_local`] with `ln a` supplied, for batched evaluation.
    pub(crate) fn eval_local_with(&self, local: Vector3<f64>, ln_size: &Vector3<f64>) -> LocalEval {
        let (e1, e2) = (self.e1, self.e2);
        let lx = local.x.abs().max(COORD_FLOOR).ln() - ln_size.x;
        let ly = local.y.abs().max(COORD_FLOOR).ln() - ln_size.y;
        let lz = local.z.abs().max(COORD_FLOOR).ln() - ln_size.z;
        let lu = 2.0 / e2 * lx;
        let lv = 2.0 / e2 * ly;
        let lw = 2.0 / e1 * lz;
        let ln_a = log_add_exp(lu, lv);
        let ln_p = e2 / e1 * ln_a;
        let ln_f = log_add_exp(ln_p, lw);
        LocalEval {
            local,
            lu,
            lv,
            lw,
            ln_a,
            ln_f,
        }
    }

    pub(crate) fn eval(&self, x: &Vector3<f64>) -> LocalEval {
        self.eval_local(self.world_to_local(x))
    }

    /// `F(x)`: below 1 inside, 1 on the surface, above 1 outside.
    pub fn inside_outside(&self, x: &Vector3<f64>) -> f64 {
        self.eval(x).ln_f.exp()
    }

    /// `F(x)^ε₁`, which preserves the comparison against 1.
    pub fn inside_outside_stable(&self, x: &Vector3<f64>) -> f64 {
        (self.e1 * self.eval(x).ln_f).exp()
    }

    /// Distance to the surface along the ray from the center through `x`.
    ///
    /// Equals `|x| |1 - F^(-ε₁/2)|` in the local frame. `F` scales as
    /// `k^(2/ε₁)` along a ray, so the surface lies at `F(u)^(-ε₁/2)` for the
    /// unit direction `u`, which stays accurate arbitrarily close to the
    /// center. At the center itself the smallest half-length is returned.
    pub fn radial_distance(&self, x: &Vector3<f64>) -> f64 {
        let local = self.world_to_local(x);
        let r = local.norm();
        if r == 0.0 {
            return self.size.min();
        }
        let surface = (-0.5 * self.e1 * self.eval_local(local / r).ln_f).exp();
        (r - surface).abs()
    }

    pub fn occupancy(&self, x: &Vector3<f64>, cfg: &OccupancyConfig) -> f64 {
        sigmoid(cfg.sharpness * (1.0 - self.inside_outside_stable(x)))
    }

    /// Partial derivatives of `g(x)` with respect to
    /// `(a1, a2, a3, e1, e2, t1, t2, t3, ω1, ω2, ω3)`, where `ω` is the
    /// body-frame rotation tangent used by [`Superquadric::rotated_by_tangent`].
    pub fn occupancy_gradient(
        &self,
        x: &Vector3<f64>,
        cfg: &OccupancyConfig,
    ) -> Result<[f64; PARAM_DOF], SqError> {
        let ev = self.eval(x);
        let (g_stable, grad) = self.stable_gradient(&ev);
        let s = cfg.sharpness;
        let g = sigmoid(s * (1.0 - g_stable));
        let scale = -s * g * (1.0 - g);
        let mut out = [0.0; PARAM_DOF];
        for (k, (o, d)) in out.iter_mut().zip(grad.iter()).enumerate() {
            *o = scale * d;
            if !o.is_finite() {
                return Err(SqError::NonFiniteGradient(k));
            }
        }
        Ok(out)
    }

    /// Value of `G = F^ε₁` and its gradient with respect to the 11 free
    /// parameters.
    pub(crate) fn stable_gradient(&self, ev: &LocalEval) -> (f64, [f64; PARAM_DOF]) {
        let (e1, e2) = (self.e1, self.e2);
        let g = (e1 * ev.ln_f).exp();

        let ln_p = e2 / e1 * ev.ln_a;
        // P / F and W / F
        let rho = (ln_p - ev.ln_f).exp();
        let omega_w = (ev.lw - ev.ln_f).exp();
        // U / A and V / A
        let mu_u = (ev.lu - ev.ln_a).exp();
        let mu_v = (ev.lv - ev.ln_a).exp();

        let p = ev.local;
        let a = self.size;

        // d ln F / d(param)
        let dlf_a1 = -2.0 / e1 * rho * mu_u / a.x;
        let dlf_a2 = -2.0 / e1 * rho * mu_v / a.y;
        let dlf_a3 = -2.0 / e1 * omega_w / a.z;
        let dlf_e1 = -rho * e2 / (e1 * e1) * ev.ln_a - omega_w * ev.lw / e1;
        let dlf_e2 = rho * (ev.ln_a - mu_u * ev.lu - mu_v * ev.lv) / e1;
        let dlf_dp = Vector3::new(
            coord_term(p.x, 2.0 / e1 * rho * mu_u),
            coord_term(p.y, 2.0 / e1 * rho * mu_v),
            coord_term(p.z, 2.0 / e1 * omega_w),
        );

        // d G = G * e1 * d ln F, except for e1 itself.
        let ge = g * e1;
        let grad_p = dlf_dp * ge;
        let grad_t = -(self.rotation.transform_vector(&grad_p));
        let grad_w = grad_p.cross(&p);
        let grad = [
            ge * dlf_a1,
            ge * dlf_a2,
            ge * dlf_a3,
            g * (ev.ln_f + e1 * dlf_e1),
            ge * dlf_e2,
            grad_t.x,
            grad_t.y,
            grad_t.z,
            grad_w.x,
            grad_w.y,
            grad_w.z,
        ];
        (g, grad)
    }

    /// Surface samples on a latitude/longitude grid: `n_theta` latitudes
    /// from the south to the north pole (inclusive) times `n_phi`
    /// longitudes. Row-major by latitude.
    pub fn surface_points(&self, n_theta: usize, n_phi: usize) -> Vec<Vector3<f64>> {
        let mut out = Vec::with_capacity(n_theta * n_phi);
        for k in 0..n_theta {
            let eta = -std::f64::consts::FRAC_PI_2
                + std::f64::consts::PI * k as f64 / (n_theta.max(2) - 1) as f64;
            for j in 0..n_phi {
                let omega = -std::f64::consts::PI + std::f64::consts::TAU * j as f64 / n_phi as f64;
                out.push(self.local_to_world(&self.surface_local(eta, omega)));
            }
        }
        out
    }

    /// Point of the canonical (untransformed) surface at latitude `eta` and
    /// longitude `omega`.
    pub fn surface_local(&self, eta: f64, omega: f64) -> Vector3<f64> {
        let ce = signed_pow(eta.cos(), self.e1);
        Vector3::new(
            self.size.x * ce * signed_pow(omega.cos(), self.e2),
            self.size.y * ce * signed_pow(omega.sin(), self.e2),
            self.size.z * signed_pow(eta.sin(), self.e1),
        )
    }

    /// Clamps sizes and exponents into `bounds`.
    pub fn project(&mut self, bounds: &Bounds) {
        for a in self.size.iter_mut() {
            *a = a.clamp(bounds.a_min, bounds.a_max);
        }
        self.e1 = self.e1.clamp(bounds.e_min, bounds.e_max);
        self.e2 = self.e2.clamp(bounds.e_min, bounds.e_max);
    }
}

fn coord_term(c: f64, factor: f64) -> f64 {
    if c.abs() < COORD_FLOOR {
        0.0
    } else {
        factor / c
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

fn signed_pow(v: f64, e: f64) -> f64 {
    v.signum() * v.abs().powf(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::Matrix3;

    fn v(x: f64, y: f64, z: f64) -> Vector3<f64> {
        Vector3::new(x, y, z)
    }

    #[test]
    fn world_to_local_identity_and_translation() {
        let sq = Superquadric::sphere(1.0, [0.0; 3]);
        assert_eq!(sq.world_to_local(&v(1.0, 2.0, 3.0)), v(1.0, 2.0, 3.0));
        let sq = Superquadric::sphere(1.0, [1.0, 0.0, 0.0]);
        assert_eq!(sq.world_to_local(&v(1.0, 0.0, 0.0)), v(0.0, 0.0, 0.0));
    }

    #[test]
    fn world_to_local_matches_rotation_matrix() {
        let q = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), std::f64::consts::FRAC_PI_2);
        // matrix built by hand from the quaternion components
        let (w, x, y, z) = (q.w, q.i, q.j, q.k);
        let r = Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        );
        let sq = Superquadric::new([1.0; 3], 1.0, 1.0, [0.0; 3], q);
        let p = sq.world_to_local(&v(1.0, 0.0, 0.0));
        let oracle = r.transpose() * v(1.0, 0.0, 0.0);
        assert_abs_diff_eq!(p, oracle, epsilon = 1e-15);
        assert_abs_diff_eq!(p, v(0.0, -1.0, 0.0), epsilon = 1e-15);
        let back = sq.local_to_world(&p);
        assert_abs_diff_eq!(back, v(1.0, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn inside_outside_examples() {
        let unit = Superquadric::sphere(1.0, [0.0; 3]);
        assert_abs_diff_eq!(unit.inside_outside(&v(1.0, 0.0, 0.0)), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(unit.inside_outside(&v(0.0, 0.0, 0.0)), 0.0, epsilon = 1e-12);
        let tall = Superquadric::new([1.0, 2.0, 1.0], 1.0, 1.0, [0.0; 3], UnitQuaternion::identity());
        assert_abs_diff_eq!(tall.inside_outside(&v(0.0, 1.0, 0.0)), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn stable_variant_examples() {
        let unit = Superquadric::sphere(1.0, [0.0; 3]);
        assert_abs_diff_eq!(unit.inside_outside_stable(&v(2.0, 0.0, 0.0)), 4.0, epsilon = 1e-12);
        // e1 = 0.5: z-only point has F = (z/a3)^4, so z = sqrt(2) gives F = 4
        let sq = Superquadric::new([1.0; 3], 0.5, 1.0, [0.0; 3], UnitQuaternion::identity());
        let x = v(0.0, 0.0, 2f64.sqrt());
        assert_abs_diff_eq!(sq.inside_outside(&x), 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sq.inside_outside_stable(&x), 2.0, epsilon = 1e-12);
        for p in sq.surface_points(7, 9) {
            assert_abs_diff_eq!(sq.inside_outside_stable(&p), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn radial_distance_examples() {
        let unit = Superquadric::sphere(1.0, [0.0; 3]);
        assert_abs_diff_eq!(unit.radial_distance(&v(2.0, 0.0, 0.0)), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(unit.radial_distance(&v(0.0, 1.0, 0.0)), 0.0, epsilon = 1e-12);
        let r = 0.3;
        let sq = Superquadric::sphere(r, [0.1, -0.2, 0.05]);
        let x = v(0.4, 0.1, -0.3);
        let expected = ((x - sq.translation).norm() - r).abs();
        assert_abs_diff_eq!(sq.radial_distance(&x), expected, epsilon = 1e-12);
        // center falls back to the smallest half-length
        let ell = Superquadric::new([0.2, 0.1, 0.3], 1.0, 1.0, [0.0; 3], UnitQuaternion::identity());
        assert_eq!(ell.radial_distance(&v(0.0, 0.0, 0.0)), 0.1);
    }

    #[test]
    fn occupancy_examples() {
        let cfg = OccupancyConfig::new(10.0).unwrap();
        let unit = Superquadric::sphere(1.0, [0.0; 3]);
        assert_abs_diff_eq!(unit.occupancy(&v(0.0, 1.0, 0.0), &cfg), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(unit.occupancy(&v(0.0, 0.0, 0.0), &cfg), 0.999_954_602_131_297_6, epsilon = 1e-12);
        let far = unit.occupancy(&v(2.0, 0.0, 0.0), &cfg);
        assert!((far - 9.357_622_968_840_175e-14).abs() < 1e-20);
    }

    #[test]
    fn sharpness_must_be_positive() {
        assert!(OccupancyConfig::new(0.0).is_err());
        assert!(OccupancyConfig::new(-1.0).is_err());
        assert!(OccupancyConfig::new(f64::NAN).is_err());
    }

    #[test]
    fn translation_gradient_vanishes_at_center() {
        let cfg = OccupancyConfig::default();
        let sq = Superquadric::sphere(0.4, [0.1, 0.2, 0.3]);
        let g = sq.occupancy_gradient(&v(0.1, 0.2, 0.3), &cfg).unwrap();
        assert_eq!(&g[5..8], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn size_gradient_sign_on_surface() {
        // growing a1 pulls a surface point on the x axis inside: g increases
        let cfg = OccupancyConfig::default();
        let sq = Superquadric::new([0.3, 0.2, 0.25], 0.8, 1.2, [0.0; 3], UnitQuaternion::identity());
        let x = v(0.3, 0.0, 0.0);
        let g = sq.occupancy_gradient(&x, &cfg).unwrap();
        let h = 1e-5;
        let mut plus = sq;
        plus.size.x += h;
        let mut minus = sq;
        minus.size.x -= h;
        let fd = (plus.occupancy(&x, &cfg) - minus.occupancy(&x, &cfg)) / (2.0 * h);
        assert!(g[0] > 0.0);
        assert_eq!(g[0].signum(), fd.signum());
    }

    #[test]
    fn surface_points_sphere_and_cube_limit() {
        let sq = Superquadric::sphere(1.0, [0.0; 3]);
        for p in sq.surface_points(9, 12) {
            assert_abs_diff_eq!(p.norm(), 1.0, epsilon = 1e-6);
        }
        let cube = Superquadric::new([1.0; 3], 0.1, 0.1, [0.0; 3], UnitQuaternion::identity());
        for p in cube.surface_points(15, 16) {
            assert!(p.amax() <= 1.0 + 1e-6);
            assert!((cube.inside_outside(&p) - 1.0).abs() < 1e-6);
        }
        let moved = Superquadric::sphere(1.0, [0.5, -1.0, 2.0]);
        for (p, q) in sq.surface_points(5, 6).iter().zip(moved.surface_points(5, 6)) {
            assert_eq!(p + moved.translation, q);
        }
    }

    #[test]
    fn params_round_trip_and_validation() {
        let q = UnitQuaternion::from_euler_angles(0.3, -0.2, 1.1);
        let sq = Superquadric::new([0.1, 0.2, 0.3], 0.5, 1.5, [0.1, 0.0, -0.2], q);
        let back = Superquadric::from_params(&sq.params()).unwrap();
        assert_eq!(back.params(), sq.params());
        assert!(sq.validate(&Bounds::default()).is_ok());
        let mut bad = sq;
        bad.size.y = 0.0;
        assert!(matches!(
            bad.validate(&Bounds::default()),
            Err(SqError::SizeOutOfBounds { axis: 2, .. })
        ));
        let mut p = sq.params();
        p[8] = 2.0;
        assert!(Superquadric::from_params(&p).is_err());
    }

    #[test]
    fn far_points_stay_finite() {
        let sq = Superquadric::new([0.005; 3], 0.1, 1.9, [0.0; 3], UnitQuaternion::identity());
        let x = v(0.6, 0.6, 0.6);
        assert!(sq.inside_outside_stable(&x).is_finite());
        assert!(sq.radial_distance(&x).is_finite());
        let (g, grad) = sq.stable_gradient(&sq.eval(&x));
        assert!(g.is_finite() && grad.iter().all(|v| v.is_finite()));
    }
}
