//! Magnetic geodesic tracing, exit times, the scattering relation and the
//! simplicity diagnostics.
//!
//! The flow of G_μ = X + λV in (x, y, θ) is integrated with classical RK4 at a
//! fixed step. The last partial step is located by an Illinois search on the
//! boundary function x² + y² − 1. The transport equation U' = −(A(v) + Φ)U can
//! be carried along on the same steps.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{convexity_margin, PhasePoint};
use crate::linalg::CMat;
use crate::scene::Scene;

#[derive(Debug, Clone, Error, PartialEq)]
#[error("ray from ({x:.6}, {y:.6}, θ={theta:.6}) did not exit within arclength {tmax}")]
pub struct TrappedRay {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub tmax: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

/// A boundary direction: point (cos s, sin s) and angle φ from the inward
/// normal, counterclockwise. Forward traces use θ = s + π + φ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub s: f64,
    pub phi: f64,
}

impl BoundaryPoint {
    pub fn new(s: f64, phi: f64) -> Self {
        BoundaryPoint { s, phi }
    }

    pub fn phase_point(&self) -> PhasePoint {
        PhasePoint::new(self.s.cos(), self.s.sin(), self.s + PI + self.phi)
    }

    pub fn is_inward(&self) -> bool {
        self.phi.abs() <= FRAC_PI_2
    }
}

/// An exit state: point (cos s, sin s) and angle φ from the outward normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExitPoint {
    pub s: f64,
    pub phi: f64,
}

impl ExitPoint {
    pub fn phase_point(&self) -> PhasePoint {
        PhasePoint::new(self.s.cos(), self.s.sin(), self.s + self.phi)
    }
}

/// Wraps an angle to [−π, π).
#[inline]
pub fn wrap_pi(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(TAU) - PI;
    if r >= PI {
        r - TAU
    } else {
        r
    }
}

#[inline]
pub fn wrap_tau(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Boundary coordinates of a state on ∂M, relative to the inward normal.
pub fn inward_coords(z: &[f64; 3]) -> BoundaryPoint {
    let s = wrap_tau(z[1].atan2(z[0]));
    BoundaryPoint {
        s,
        phi: wrap_pi(z[2] - s - PI),
    }
}

/// Boundary coordinates of a state on ∂M, relative to the outward normal.
pub fn outward_coords(z: &[f64; 3]) -> ExitPoint {
    let s = wrap_tau(z[1].atan2(z[0]));
    ExitPoint {
        s,
        phi: wrap_pi(z[2] - s),
    }
}

/// One stored node of a traced ray.
#[derive(Debug, Clone)]
pub struct Node {
    pub t: f64,
    pub z: [f64; 3],
    pub dz: [f64; 3],
    /// Transport matrix and its t-derivative when transport is carried.
    pub u: Option<(CMat, CMat)>,
}

#[derive(Debug, Clone)]
pub struct RaySample {
    pub nodes: Vec<Node>,
    /// Signed exit time: τ₊ ≥ 0 forward, τ₋ ≤ 0 backward.
    pub tau: f64,
    pub exited: bool,
    /// Largest ‖U*U − Id‖∞ seen before a re-unitarization.
    pub max_drift: f64,
}

impl RaySample {
    pub fn last(&self) -> &Node {
        self.nodes.last().expect("rays have at least one node")
    }

    pub fn times(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.t).collect()
    }

    /// max | |γ̇|_g − 1 | over nodes.
    pub fn speed_defect(&self, scene: &Scene) -> f64 {
        self.nodes
            .iter()
            .map(|n| {
                let s = scene.sigma(n.z[0], n.z[1]);
                (s.exp() * n.dz[0].hypot(n.dz[1]) - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn unitarity_defect(&self) -> f64 {
        self.nodes
            .iter()
            .filter_map(|n| n.u.as_ref().map(|(u, _)| u.unitarity_defect()))
            .fold(0.0, f64::max)
    }

    /// State at time t (inside the sampled range) by cubic Hermite interpolation.
    pub fn state_at(&self, t: f64) -> [f64; 3] {
        let k = match self.nodes.binary_search_by(|n| {
            (n.t * self.tau.signum())
                .partial_cmp(&(t * self.tau.signum()))
                .unwrap()
        }) {
            Ok(k) => return self.nodes[k].z,
            Err(k) => k.clamp(1, self.nodes.len() - 1),
        };
        let (a, b) = (&self.nodes[k - 1], &self.nodes[k]);
        hermite(a.t, &a.z, &a.dz, b.t, &b.z, &b.dz, t)
    }
}

pub(crate) fn hermite(
    t0: f64,
    z0: &[f64; 3],
    d0: &[f64; 3],
    t1: f64,
    z1: &[f64; 3],
    d1: &[f64; 3],
    t: f64,
) -> [f64; 3] {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = h00 * z0[i] + h10 * h * d0[i] + h01 * z1[i] + h11 * h * d1[i];
    }
    out
}

/// Right-hand side of the flow.
#[inline]
pub fn flow_rhs(scene: &Scene, z: &[f64; 3]) -> [f64; 3] {
    let m = scene.metric(z[0], z[1]);
    let (s, c) = z[2].sin_cos();
    [
        m.emsig * c,
        m.emsig * s,
        m.emsig * (m.sy * c - m.sx * s) + m.lambda,
    ]
}

#[inline]
fn rhs_full(scene: &Scene, z: &[f64; 3], with_u: bool) -> ([f64; 3], Option<CMat>) {
    let m = scene.metric(z[0], z[1]);
    let (s, c) = z[2].sin_cos();
    let dz = [
        m.emsig * c,
        m.emsig * s,
        m.emsig * (m.sy * c - m.sx * s) + m.lambda,
    ];
    let att = with_u.then(|| scene.attenuation(z[0], z[1], z[2], m.emsig));
    (dz, att)
}

#[inline]
fn axpy3(z: &[f64; 3], h: f64, d: &[f64; 3]) -> [f64; 3] {
    [z[0] + h * d[0], z[1] + h * d[1], z[2] + h * d[2]]
}

/// Integrator configuration shared by all traces of a scene.
#[derive(Debug, Clone, Copy)]
pub struct Tracer<'a> {
    pub scene: &'a Scene,
    pub dt: f64,
    pub tmax: f64,
    pub tol: f64,
    pub transport: bool,
    /// Radius of the exit circle; 1 except when tracing in an enlarged disk.
    pub radius: f64,
}

const REUNITARIZE_EVERY: usize = 64;

impl<'a> Tracer<'a> {
    pub fn new(scene: &'a Scene) -> Self {
        Tracer {
            scene,
            dt: scene.ode.dt,
            tmax: scene.ode.tmax,
            tol: scene.ode.tol,
            transport: scene.has_attenuation(),
            radius: 1.0,
        }
    }

    pub fn with_radius(mut self, r: f64) -> Self {
        self.radius = r;
        self
    }

    #[inline]
    fn gfun(&self, z: &[f64; 3]) -> f64 {
        z[0] * z[0] + z[1] * z[1] - self.radius * self.radius
    }

    pub fn with_transport(mut self, on: bool) -> Self {
        self.transport = on;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    fn pos_step(&self, z: &[f64; 3], d1: &[f64; 3], h: f64) -> [f64; 3] {
        let s = self.scene;
        let k2 = flow_rhs(s, &axpy3(z, 0.5 * h, d1));
        let k3 = flow_rhs(s, &axpy3(z, 0.5 * h, &k2));
        let k4 = flow_rhs(s, &axpy3(z, h, &k3));
        let mut out = *z;
        for i in 0..3 {
            out[i] += h / 6.0 * (d1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out
    }

    /// RK4 step of (z, U) with first stage (d1, m1) already evaluated.
    fn full_step(
        &self,
        z: &[f64; 3],
        d1: &[f64; 3],
        u: Option<(&CMat, &CMat)>,
        h: f64,
    ) -> ([f64; 3], Option<CMat>) {
        let Some((u0, k1u)) = u else {
            return (self.pos_step(z, d1, h), None);
        };
        let s = self.scene;
        let z2 = axpy3(z, 0.5 * h, d1);
        let (k2, m2) = rhs_full(s, &z2, true);
        let mut u2 = u0.clone();
        u2.axpy(0.5 * h, k1u);
        let k2u = -&(&m2.unwrap() * &u2);
        let z3 = axpy3(z, 0.5 * h, &k2);
        let (k3, m3) = rhs_full(s, &z3, true);
        let mut u3 = u0.clone();
        u3.axpy(0.5 * h, &k2u);
        let k3u = -&(&m3.unwrap() * &u3);
        let z4 = axpy3(z, h, &k3);
        let (k4, m4) = rhs_full(s, &z4, true);
        let mut u4 = u0.clone();
        u4.axpy(h, &k3u);
        let k4u = -&(&m4.unwrap() * &u4);
        let mut zn = *z;
        for i in 0..3 {
            zn[i] += h / 6.0 * (d1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let mut un = u0.clone();
        un.axpy(h / 6.0, k1u);
        un.axpy(h / 3.0, &k2u);
        un.axpy(h / 3.0, &k3u);
        un.axpy(h / 6.0, &k4u);
        (zn, Some(un))
    }

    /// Traces from `start` and calls `visit` on every node, the exit node last.
    /// Transport starts from the identity at `start`. Returns (τ, max drift).
    pub fn trace_with(
        &self,
        start: [f64; 3],
        dir: Direction,
        mut visit: impl FnMut(&Node),
    ) -> Result<(f64, f64), TrappedRay> {
        let sign = dir.sign();
        let h = sign * self.dt;
        let n = self.scene.n();
        let with_u = self.transport;
        let mut z = start;
        let mut u = with_u.then(|| CMat::identity(n));
        let mut t = 0.0;
        let mut steps = 0usize;
        let mut drift: f64 = 0.0;
        let trapped = || TrappedRay {
            x: start[0],
            y: start[1],
            theta: start[2],
            tmax: self.tmax,
        };

        // A start on ∂M pointing outward in the tracing direction exits at once.
        let (d0, _) = rhs_full(self.scene, &z, false);
        let g0 = self.gfun(&z);
        if g0 > -1e-12 && sign * (z[0] * d0[0] + z[1] * d0[1]) >= 0.0 {
            let (dz, m) = rhs_full(self.scene, &z, with_u);
            let uu = u.map(|u| {
                let du = -&(&m.unwrap() * &u);
                (u, du)
            });
            visit(&Node { t, z, dz, u: uu });
            return Ok((0.0, 0.0));
        }

        loop {
            let (d1, m1) = rhs_full(self.scene, &z, with_u);
            let k1u = match (&u, m1) {
                (Some(u), Some(m)) => Some(-&(&m * u)),
                _ => None,
            };
            visit(&Node {
                t,
                z,
                dz: d1,
                u: u.clone().zip(k1u.clone()),
            });
            let (z1, u1) = self.full_step(&z, &d1, u.as_ref().zip(k1u.as_ref()), h);
            if self.gfun(&z1) > 0.0 {
                let eta = self.exit_fraction(&z, &d1, h, &z1);
                let (mut ze, ue) = if eta >= 1.0 {
                    (z1, u1)
                } else {
                    self.full_step(&z, &d1, u.as_ref().zip(k1u.as_ref()), eta * h)
                };
                let r = ze[0].hypot(ze[1]) / self.radius;
                ze[0] /= r;
                ze[1] /= r;
                let te = t + eta * h;
                let (dz, m) = rhs_full(self.scene, &ze, with_u);
                let uu = ue.map(|u| {
                    let du = -&(&m.unwrap() * &u);
                    (u, du)
                });
                visit(&Node {
                    t: te,
                    z: ze,
                    dz,
                    u: uu,
                });
                return Ok((te, drift));
            }
            z = z1;
            u = u1;
            t += h;
            steps += 1;
            if steps % REUNITARIZE_EVERY == 0 {
                if let Some(m) = u.as_mut() {
                    drift = drift.max(m.unitarity_defect());
                    *m = m.polar_unitary();
                }
            }
            if t.abs() > self.tmax {
                return Err(trapped());
            }
        }
    }

    /// Fraction η ∈ (0, 1] of the step h at which the position reaches ∂M.
    fn exit_fraction(&self, z: &[f64; 3], d1: &[f64; 3], h: f64, z1: &[f64; 3]) -> f64 {
        let g = |eta: f64| self.gfun(&self.pos_step(z, d1, eta * h));
        let mut lo = 0.0;
        let mut glo = self.gfun(z);
        if glo >= 0.0 {
            // started on the boundary: find an interior point of the step
            let mut eta = 0.5;
            let mut found = false;
            for _ in 0..60 {
                let v = g(eta);
                if v < 0.0 {
                    lo = eta;
                    glo = v;
                    found = true;
                    break;
                }
                eta *= 0.5;
            }
            if !found {
                return 0.0;
            }
        }
        let mut hi = 1.0;
        let mut ghi = self.gfun(z1);
        let mut side = 0i8;
        let tol = self.tol.min(1e-12);
        for _ in 0..100 {
            let mut mid = (lo * ghi - hi * glo) / (ghi - glo);
            if !(mid > lo && mid < hi) {
                mid = 0.5 * (lo + hi);
            }
            let gm = g(mid);
            if gm.abs() <= 0.1 * tol || hi - lo < 1e-15 {
                return mid;
            }
            if gm < 0.0 {
                lo = mid;
                glo = gm;
                if side == -1 {
                    ghi *= 0.5;
                }
                side = -1;
            } else {
                hi = mid;
                ghi = gm;
                if side == 1 {
                    glo *= 0.5;
                }
                side = 1;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn trace(&self, start: [f64; 3], dir: Direction) -> Result<RaySample, TrappedRay> {
        let mut nodes = Vec::new();
        let (tau, max_drift) = self.trace_with(start, dir, |n| nodes.push(n.clone()))?;
        Ok(RaySample {
            nodes,
            tau,
            exited: true,
            max_drift,
        })
    }

    /// Final state and transport only.
    pub fn endpoint(&self, start: [f64; 3], dir: Direction) -> Result<(Node, f64), TrappedRay> {
        let mut last = None;
        let (tau, _) = self.trace_with(start, dir, |n| last = Some(n.clone()))?;
        Ok((last.expect("at least one node"), tau))
    }
}

/// Traces a ray with the scene's integrator settings.
pub fn integrate_ray(
    scene: &Scene,
    start: &PhasePoint,
    dir: Direction,
) -> Result<RaySample, TrappedRay> {
    Tracer::new(scene).trace([start.x, start.y, start.theta], dir)
}

/// Exit state of the ray entering at `b`, with its exit time.
pub fn scattering(scene: &Scene, b: BoundaryPoint) -> Result<(ExitPoint, f64), TrappedRay> {
    let p = b.phase_point();
    let (node, tau) = Tracer::new(scene)
        .with_transport(false)
        .endpoint([p.x, p.y, p.theta], Direction::Forward)?;
    Ok((outward_coords(&node.z), tau))
}

/// Entry state of the ray leaving at `e`.
pub fn scattering_inverse(scene: &Scene, e: ExitPoint) -> Result<(BoundaryPoint, f64), TrappedRay> {
    let p = e.phase_point();
    let (node, tau) = Tracer::new(scene)
        .with_transport(false)
        .endpoint([p.x, p.y, p.theta], Direction::Backward)?;
    Ok((inward_coords(&node.z), tau))
}

#[derive(Debug, Clone, Serialize)]
pub struct SimplicityReport {
    pub min_margin: f64,
    pub argmin_s: f64,
    pub max_tau: f64,
    pub trapped: bool,
    pub simple: bool,
}

const FAN_DIRECTIONS: usize = 16;

/// Necessary conditions for simplicity: strict magnetic convexity sampled over
/// the unit tangents of ∂M and non-trapping of a ray fan.
pub fn simplicity_report(scene: &Scene) -> SimplicityReport {
    let ns = scene.grid.ns.max(64);
    let mut min_margin = f64::INFINITY;
    let mut argmin_s = 0.0;
    for i in 0..4 * ns {
        let s = TAU * i as f64 / (4 * ns) as f64;
        let m = convexity_margin(scene, s);
        if m < min_margin {
            min_margin = m;
            argmin_s = s;
        }
    }
    let tracer = Tracer::new(scene)
        .with_transport(false)
        .with_dt(scene.ode.dt.max(5e-3));
    let mut max_tau: f64 = 0.0;
    let mut trapped = false;
    'fan: for i in 0..scene.grid.ns {
        let s = TAU * i as f64 / scene.grid.ns as f64;
        for j in 0..FAN_DIRECTIONS {
            let phi = -FRAC_PI_2 + PI * (j as f64 + 0.5) / FAN_DIRECTIONS as f64;
            let p = BoundaryPoint::new(s, phi).phase_point();
            match tracer.endpoint([p.x, p.y, p.theta], Direction::Forward) {
                Ok((_, tau)) => max_tau = max_tau.max(tau),
                Err(_) => {
                    trapped = true;
                    break 'fan;
                }
            }
        }
    }
    // the diameter is the longest chord in the flat case; include it explicitly
    if !trapped {
        if let Ok((_, tau)) = tracer.endpoint([1.0, 0.0, PI], Direction::Forward) {
            max_tau = max_tau.max(tau);
        }
    }
    SimplicityReport {
        min_margin,
        argmin_s,
        max_tau,
        trapped,
        simple: min_margin > 0.0 && !trapped,
    }
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
    fn diameter() {
        let s = scene("0", "0");
        let ray = integrate_ray(
            &s,
            &BoundaryPoint::new(0.0, 0.0).phase_point(),
            Direction::Forward,
        )
        .unwrap();
        assert!((ray.tau - 2.0).abs() < 1e-10);
        let z = ray.last().z;
        assert!((z[0] + 1.0).abs() < 1e-10 && z[1].abs() < 1e-10);
        assert!(ray.speed_defect(&s) < 1e-12);
    }

    #[test]
    fn unit_curvature_arc_from_center() {
        // circle of radius 1 through the origin centred at (0, 1): |γ(t)| = 2 sin(t/2) = 1
        let s = scene("0", "1");
        let ray = integrate_ray(&s, &PhasePoint::new(0.0, 0.0, 0.0), Direction::Forward).unwrap();
        assert!((ray.tau - PI / 3.0).abs() < 1e-10, "{}", ray.tau);
        let z = ray.last().z;
        assert!((z[0] - (PI / 3.0).sin()).abs() < 1e-10);
        assert!((z[1] - (1.0 - (PI / 3.0).cos())).abs() < 1e-10);
    }

    #[test]
    fn euclidean_chord_scattering() {
        let s = scene("0", "0");
        for &phi in &[-1.3, -0.6, 0.0, 0.4, 1.1, 1.5] {
            let (e, tau) = scattering(&s, BoundaryPoint::new(0.0, phi)).unwrap();
            assert!((tau - 2.0 * phi.cos()).abs() < 1e-10);
            assert!((wrap_pi(e.s - (PI + 2.0 * phi))).abs() < 1e-10);
            assert!((e.phi + phi).abs() < 1e-10);
        }
    }

    #[test]
    fn inverse_scattering_contract() {
        let s = scene("0", "0");
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let b = BoundaryPoint::new(rng.gen_range(0.0..TAU), rng.gen_range(-1.5..1.5));
            let (e, _) = scattering(&s, b).unwrap();
            let (back, _) = scattering_inverse(&s, e).unwrap();
            assert!(wrap_pi(back.s - b.s).abs() < 1e-8);
            assert!((back.phi - b.phi).abs() < 1e-8);
        }
    }

    #[test]
    fn reversal_only_without_field() {
        for (lambda, reversible) in [("0", true), ("0.4", false)] {
            let s = scene("0.1*(x^2+y^2) + 0.05*x", lambda);
            let b = BoundaryPoint::new(0.7, 0.3);
            let p = b.phase_point();
            let ray = integrate_ray(&s, &p, Direction::Forward).unwrap();
            let z = ray.last().z;
            let rev = PhasePoint::new(z[0], z[1], z[2] + PI);
            let back = integrate_ray(&s, &rev, Direction::Forward)
                .unwrap()
                .last()
                .z;
            let res = (back[0] - p.x).hypot(back[1] - p.y) + wrap_pi(back[2] + PI - p.theta).abs();
            if reversible {
                assert!(res < 1e-8, "{res}");
            } else {
                assert!(res > 1e-3, "{res}");
            }
        }
    }

    #[test]
    fn rk4_fourth_order() {
        let s = scene("0.2*(x^2+y^2)", "0.3");
        let p = BoundaryPoint::new(0.4, 0.2).phase_point();
        let exit = |dt: f64| {
            Tracer::new(&s)
                .with_dt(dt)
                .trace([p.x, p.y, p.theta], Direction::Forward)
                .unwrap()
                .last()
                .z
        };
        let reference = exit(2.5e-4);
        let e1 = exit(0.04);
        let e2 = exit(0.02);
        let err = |z: [f64; 3]| (z[0] - reference[0]).hypot(z[1] - reference[1]);
        let ratio = err(e1) / err(e2);
        assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio}");
    }

    #[test]
    fn flow_property() {
        let s = scene("0.1*sin(x)*cos(y)", "0.5");
        let tracer = Tracer::new(&s).with_dt(1e-3);
        let start = [0.1, -0.2, 0.3];
        let ray = tracer.trace(start, Direction::Forward).unwrap();
        // φ_{t+s} = φ_s ∘ φ_t with t = 0.3, s = 0.2
        let zt = ray.nodes[300].z;
        let ray2 = tracer.trace(zt, Direction::Forward).unwrap();
        let a = ray.nodes[500].z;
        let b = ray2.nodes[200].z;
        assert!((a[0] - b[0]).abs() + (a[1] - b[1]).abs() + (a[2] - b[2]).abs() < 1e-12);
    }

    #[test]
    fn scalar_transport_phase() {
        let s = Scene::from_spec(&SceneSpec::scalar("0", "0", "0", "0", "0.8*i")).unwrap();
        let ray = integrate_ray(
            &s,
            &BoundaryPoint::new(1.0, 0.5).phase_point(),
            Direction::Forward,
        )
        .unwrap();
        for n in &ray.nodes {
            let (u, _) = n.u.as_ref().unwrap();
            let want = crate::linalg::C64::new(0.0, -0.8 * n.t).exp();
            assert!((u[(0, 0)] - want).norm() < 1e-10);
        }
        assert!(ray.unitarity_defect() < 1e-12);
    }

    #[test]
    fn simplicity_examples() {
        let r = simplicity_report(&scene("0", "0"));
        assert!((r.min_margin - 1.0).abs() < 1e-14);
        assert!((r.max_tau - 2.0).abs() < 1e-9);
        assert!(r.simple);
        let r = simplicity_report(&scene("0", "2"));
        assert!(r.min_margin < 0.0);
        assert!(!r.simple);
    }

    #[test]
    fn trapped_ray_is_reported() {
        let s = Scene::from_spec(&SceneSpec {
            lambda: "3".into(),
            ode: crate::scene::OdeParams {
                dt: 1e-2,
                tol: 1e-12,
                tmax: 20.0,
            },
            ..Default::default()
        })
        .unwrap();
        // a curvature-3 circle through the centre stays inside the disk
        let err =
            integrate_ray(&s, &PhasePoint::new(0.0, 0.0, 0.0), Direction::Forward).unwrap_err();
        assert_eq!(err.tmax, 20.0);
    }
}
