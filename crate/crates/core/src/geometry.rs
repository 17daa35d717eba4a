//! Frame fields, Lorentz force, Hodge star and measures for g = e^{2σ}(dx² + dy²).
//!
//! Orientation is counterclockwise; J rotates by +π/2. With V = ∂θ the
//! perpendicular field is fixed as X⊥ = [X, V], the sign for which
//! η₊ = ½(X + iX⊥) raises the fiber degree.

use crate::linalg::{CMat, C64};
use crate::scene::Scene;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl PhasePoint {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        PhasePoint { x, y, theta }
    }

    /// Euclidean components of the g-unit vector e^{−σ}(cos θ, sin θ).
    pub fn velocity(&self, scene: &Scene) -> [f64; 2] {
        let e = (-scene.sigma(self.x, self.y)).exp();
        [e * self.theta.cos(), e * self.theta.sin()]
    }
}

/// Coefficients of a∂x + b∂y + c∂θ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameFields {
    pub x: Frame,
    pub x_perp: Frame,
    pub v: Frame,
    pub g_mu: Frame,
}

pub fn frame_fields(scene: &Scene, p: &PhasePoint) -> FrameFields {
    let m = scene.metric(p.x, p.y);
    let (s, c) = p.theta.sin_cos();
    let e = m.emsig;
    let x = Frame {
        a: e * c,
        b: e * s,
        c: e * (m.sy * c - m.sx * s),
    };
    let x_perp = Frame {
        a: e * s,
        b: -e * c,
        c: e * (m.sx * c + m.sy * s),
    };
    let v = Frame {
        a: 0.0,
        b: 0.0,
        c: 1.0,
    };
    let g_mu = Frame {
        a: x.a,
        b: x.b,
        c: x.c + m.lambda,
    };
    FrameFields { x, x_perp, v, g_mu }
}

/// Lorentz force Y(v) = λ J v for the unit vector of `p`, Euclidean components.
pub fn lorentz(scene: &Scene, p: &PhasePoint) -> [f64; 2] {
    let v = p.velocity(scene);
    let l = scene.lambda(p.x, p.y);
    [-l * v[1], l * v[0]]
}

/// g(ξ, η) at (x, y) for Euclidean component vectors.
pub fn metric_inner(scene: &Scene, x: f64, y: f64, a: [f64; 2], b: [f64; 2]) -> f64 {
    (2.0 * scene.sigma(x, y)).exp() * (a[0] * b[0] + a[1] * b[1])
}

/// Hodge star of the 1-form α_x dx + α_y dy: ⋆dx = dy, ⋆dy = −dx in any conformal metric.
#[inline]
pub fn star_one_form<T: Copy + std::ops::Neg<Output = T>>(ax: T, ay: T) -> (T, T) {
    (-ay, ax)
}

/// ⋆f = f e^{2σ} dx∧dy, returned as the dx∧dy coefficient.
pub fn star_zero_form(scene: &Scene, x: f64, y: f64, f: C64) -> C64 {
    f * (2.0 * scene.sigma(x, y)).exp()
}

/// ⋆(c dx∧dy) = e^{−2σ} c.
pub fn star_two_form(scene: &Scene, x: f64, y: f64, c: C64) -> C64 {
    c * (-2.0 * scene.sigma(x, y)).exp()
}

/// ⋆A as a function on SM: e^{−σ}(A_x sin θ − A_y cos θ).
pub fn star_connection(scene: &Scene, x: f64, y: f64, theta: f64) -> CMat {
    let e = (-scene.sigma(x, y)).exp();
    let (s, c) = theta.sin_cos();
    let mut m = scene.ax(x, y).scale_re(e * s);
    m.axpy(-e * c, &scene.ay(x, y));
    m
}

/// Liouville density dΣ³ = e^{2σ} dx dy dθ.
pub fn liouville_density(scene: &Scene, x: f64, y: f64) -> f64 {
    (2.0 * scene.sigma(x, y)).exp()
}

/// Boundary density dΣ² = e^{σ} ds dφ at boundary parameter s.
pub fn boundary_density(scene: &Scene, s: f64) -> f64 {
    scene.sigma(s.cos(), s.sin()).exp()
}

/// dμ = cos φ · e^{σ} ds dφ on the inward boundary.
pub fn mu_density(scene: &Scene, s: f64, phi: f64) -> f64 {
    phi.cos() * boundary_density(scene, s)
}

/// Geodesic curvature of the unit circle in g: e^{−σ}(1 + ∂_r σ).
pub fn boundary_curvature(scene: &Scene, s: f64) -> f64 {
    let (y, x) = s.sin_cos();
    let m = scene.metric(x, y);
    m.emsig * (1.0 + m.sx * x + m.sy * y)
}

/// Λ(ξ) − ⟨Y(ξ), ν⟩ for both unit tangents ξ at boundary parameter s; returns the smaller.
pub fn convexity_margin(scene: &Scene, s: f64) -> f64 {
    let (y, x) = s.sin_cos();
    let lam = boundary_curvature(scene, s);
    let e = (-scene.sigma(x, y)).exp();
    let nu = [-x * e, -y * e];
    let mut worst = f64::INFINITY;
    for sign in [1.0, -1.0] {
        // tangent θ = s ± π/2
        let p = PhasePoint::new(x, y, s + sign * std::f64::consts::FRAC_PI_2);
        let yv = lorentz(scene, &p);
        let proj = metric_inner(scene, x, y, yv, nu);
        worst = worst.min(lam - proj);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::SceneSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scene(sigma: &str, lambda: &str) -> Scene {
        Scene::from_spec(&SceneSpec::scalar(sigma, lambda, "0", "0", "0")).unwrap()
    }

    #[test]
    fn euclidean_frames() {
        let s = scene("0", "0.7");
        let f = frame_fields(&s, &PhasePoint::new(0.2, -0.1, 0.9));
        assert!((f.x.a - 0.9f64.cos()).abs() < 1e-15 && (f.x.b - 0.9f64.sin()).abs() < 1e-15);
        assert_eq!(f.x.c, 0.0);
        assert_eq!(
            f.v,
            Frame {
                a: 0.0,
                b: 0.0,
                c: 1.0
            }
        );
        assert_eq!(f.g_mu.c, 0.7);
        assert_eq!((f.g_mu.a, f.g_mu.b), (f.x.a, f.x.b));
    }

    #[test]
    fn bracket_of_x_and_v_is_x_perp() {
        // V = ∂θ has constant coefficients, so [X, V] = −∂θ X.
        let s = scene("0.2*x^2 - 0.1*y + 0.05*x*y", "0.3");
        let h = 1e-4;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let r = rng.gen_range(0.0..0.95f64).sqrt();
            let a = rng.gen_range(0.0..std::f64::consts::TAU);
            let t = rng.gen_range(0.0..std::f64::consts::TAU);
            let p = PhasePoint::new(r * a.cos(), r * a.sin(), t);
            let fp = frame_fields(&s, &PhasePoint { theta: t + h, ..p }).x;
            let fm = frame_fields(&s, &PhasePoint { theta: t - h, ..p }).x;
            let xp = frame_fields(&s, &p).x_perp;
            assert!(((fm.a - fp.a) / (2.0 * h) - xp.a).abs() < 1e-7);
            assert!(((fm.b - fp.b) / (2.0 * h) - xp.b).abs() < 1e-7);
            assert!(((fm.c - fp.c) / (2.0 * h) - xp.c).abs() < 1e-7);
        }
    }

    #[test]
    fn lorentz_force_examples() {
        let s = scene("0", "0");
        assert_eq!(lorentz(&s, &PhasePoint::new(0.1, 0.2, 1.0)), [0.0, -0.0]);
        let s = scene("0", "1");
        let y = lorentz(&s, &PhasePoint::new(0.0, 0.0, 0.0));
        assert!((y[0]).abs() < 1e-16 && (y[1] - 1.0).abs() < 1e-16);
        let s = scene("0.3*sin(x+2*y)", "1.5*cos(y)");
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let p = PhasePoint::new(
                rng.gen_range(-0.7..0.7),
                rng.gen_range(-0.7..0.7),
                rng.gen_range(0.0..7.0),
            );
            let v = p.velocity(&s);
            let y = lorentz(&s, &p);
            assert!(metric_inner(&s, p.x, p.y, y, v).abs() < 1e-15);
            assert!((metric_inner(&s, p.x, p.y, v, v) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn hodge_star_conventions() {
        // ⋆dx = dy, ⋆dy = −dx, ⋆⋆ = −1 on 1-forms
        assert_eq!(star_one_form(1.0, 0.0), (-0.0, 1.0));
        assert_eq!(star_one_form(0.0, 1.0), (-1.0, 0.0));
        let (a, b) = star_one_form(0.3, -0.8);
        assert_eq!(star_one_form(a, b), (-0.3, 0.8));
        let s = scene("0.4*x", "0");
        let one = star_zero_form(&s, 0.5, 0.0, C64::new(1.0, 0.0));
        assert!((one.re - 0.4f64.exp()).abs() < 1e-15);
        assert!((star_two_form(&s, 0.5, 0.0, one).re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn convexity_of_flat_disk() {
        let s = scene("0", "0");
        assert!((convexity_margin(&s, 0.3) - 1.0).abs() < 1e-15);
        let s = scene("0", "2");
        assert!((convexity_margin(&s, 1.1) + 1.0).abs() < 1e-14);
        // σ = c r²: curvature e^{−c}(1 + 2c)
        let s = scene("0.1*(x^2+y^2)", "0");
        assert!((boundary_curvature(&s, 2.0) - (-0.1f64).exp() * 1.2).abs() < 1e-14);
    }
}
