//! Geodesic tracing through the Hamiltonian flow of h(x,p) and transversal
//! boundary-exit detection.
//!
//! The flow is integrated in the covector p with dx/dt = -h_p, dp/dt = h_x
//! and initial covector p(0) = -omega0, so the spatial curve runs along the
//! inward direction omega0 with forward time. The stored `om` samples are
//! the direction covector g(x) xdot, i.e. -p; `orientation_check` audits
//! this convention numerically.

use crate::error::{Error, Result};
use crate::geometry::{Domain, MetricField};
use crate::linalg::{dot, norm, scale_vec, sub_vec};
use crate::num::{lit, Real};

#[derive(Clone, Debug)]
pub struct TraceOptions<T> {
    /// Fixed integrator step in the curve parameter.
    pub step: T,
    /// Abort horizon: no exit before t_max means a trapped ray.
    pub t_max: T,
    /// Minimum |<gamma_dot, nu>_g| at the exit point.
    pub transversality_threshold: T,
    /// How far past both endpoints the curve and its jets are continued
    /// (the ambient metric is globally defined, so this is plain flow).
    pub extension: T,
}

impl<T: Real> Default for TraceOptions<T> {
    fn default() -> Self {
        TraceOptions {
            step: lit(1e-3),
            t_max: lit(10.0),
            transversality_threshold: lit(0.05),
            extension: lit(1.6),
        }
    }
}

/// One uniform sample of the traced curve: position, direction covector and
/// their parameter derivatives (used for cubic Hermite interpolation).
#[derive(Clone, Debug)]
pub struct RaySample<T> {
    pub x: Vec<T>,
    pub om: Vec<T>,
    pub dx: Vec<T>,
    pub dom: Vec<T>,
}

/// A traced nul-bicharacteristic with transversal exit.
#[derive(Clone, Debug)]
pub struct Bicharacteristic<T> {
    dim: usize,
    /// uniform parameter step between samples
    dt: T,
    /// parameter of samples[0] (negative: curve extended before entry)
    r_lo: T,
    samples: Vec<RaySample<T>>,
    tau: T,
    margin: T,
    step_used: T,
    threshold: T,
}

impl<T: Real> Bicharacteristic<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Exit time of the geodesic segment inside the domain.
    pub fn tau(&self) -> T {
        self.tau
    }

    /// |<gamma_dot(tau), nu>_g| at the exit point.
    pub fn transversality_margin(&self) -> T {
        self.margin
    }

    pub fn integrator_step(&self) -> T {
        self.step_used
    }

    pub fn transversality_threshold(&self) -> T {
        self.threshold
    }

    pub fn sample_step(&self) -> T {
        self.dt
    }

    pub fn param_range(&self) -> (T, T) {
        (self.r_lo, self.r_lo + self.dt * lit::<T>((self.samples.len() - 1) as f64))
    }

    pub fn samples(&self) -> &[RaySample<T>] {
        &self.samples
    }

    pub fn sample_param(&self, i: usize) -> T {
        self.r_lo + self.dt * lit::<T>(i as f64)
    }

    /// Cubic Hermite interpolation of (x, om, dx, dom) at parameter r.
    pub fn at(&self, r: T) -> RaySample<T> {
        let (lo, hi) = self.param_range();
        let rr = r.max(lo).min(hi);
        let s = (rr - self.r_lo) / self.dt;
        let i = s
            .floor()
            .to_f64()
            .map(|v| v as usize)
            .unwrap_or(0)
            .min(self.samples.len() - 2);
        let u = s - lit::<T>(i as f64);
        let (a, b) = (&self.samples[i], &self.samples[i + 1]);
        let h00 = (T::one() + lit::<T>(2.0) * u) * (T::one() - u) * (T::one() - u);
        let h10 = u * (T::one() - u) * (T::one() - u);
        let h01 = u * u * (lit::<T>(3.0) - lit::<T>(2.0) * u);
        let h11 = u * u * (u - T::one());
        let dt = self.dt;
        let interp = |va: &[T], vb: &[T], da: &[T], db: &[T]| -> Vec<T> {
            va.iter()
                .zip(vb)
                .zip(da.iter().zip(db))
                .map(|((&pa, &pb), (&sa, &sb))| {
                    h00 * pa + h10 * dt * sa + h01 * pb + h11 * dt * sb
                })
                .collect()
        };
        // derivative interpolation: derivative of the Hermite polynomial
        let d00 = lit::<T>(6.0) * u * (u - T::one()) / dt;
        let d10 = (T::one() - u) * (T::one() - lit::<T>(3.0) * u);
        let d01 = -lit::<T>(6.0) * u * (u - T::one()) / dt;
        let d11 = u * (lit::<T>(3.0) * u - lit::<T>(2.0));
        let dinterp = |va: &[T], vb: &[T], da: &[T], db: &[T]| -> Vec<T> {
            va.iter()
                .zip(vb)
                .zip(da.iter().zip(db))
                .map(|((&pa, &pb), (&sa, &sb))| d00 * pa + d10 * sa + d01 * pb + d11 * sb)
                .collect()
        };
        RaySample {
            x: interp(&a.x, &b.x, &a.dx, &b.dx),
            om: interp(&a.om, &b.om, &a.dom, &b.dom),
            dx: dinterp(&a.x, &b.x, &a.dx, &b.dx),
            dom: dinterp(&a.om, &b.om, &a.dom, &b.dom),
        }
    }

    pub fn position(&self, r: T) -> Vec<T> {
        self.at(r).x
    }

    /// Diagnostic fixture: builds a curve directly from a polyline with unit
    /// parameter speed. Only the positions are meaningful; used by the
    /// self-intersection scan tests.
    pub fn from_polyline_fixture(points: Vec<Vec<T>>, dt: T) -> Self {
        let dim = points[0].len();
        let m = points.len();
        let mut samples = Vec::with_capacity(m);
        for (i, p) in points.iter().enumerate() {
            let dx = if i + 1 < m {
                scale_vec(T::one() / dt, &sub_vec(&points[i + 1], p))
            } else {
                scale_vec(T::one() / dt, &sub_vec(p, &points[i - 1]))
            };
            samples.push(RaySample {
                x: p.clone(),
                om: dx.clone(),
                dx,
                dom: vec![T::zero(); dim],
            });
        }
        let tau = dt * lit::<T>((m - 1) as f64);
        Bicharacteristic {
            dim,
            dt,
            r_lo: T::zero(),
            samples,
            tau,
            margin: T::one(),
            step_used: dt,
            threshold: T::zero(),
        }
    }
}

/// Flow derivative in the paper's convention: state = (x, p),
/// dx/dt = -h_p, dp/dt = h_x.
fn flow_deriv<T: Real>(metric: &MetricField<T>, state: &[T]) -> Vec<T> {
    let n = metric.dim();
    let jet = metric
        .hamiltonian_jet(&state[..n], &state[n..], false)
        .expect("flow called with nonzero covector");
    let mut d = vec![T::zero(); 2 * n];
    for i in 0..n {
        d[i] = -jet.h_p[i];
        d[n + i] = jet.h_x[i];
    }
    d
}

fn rk4<T: Real>(metric: &MetricField<T>, state: &[T], dt: T) -> Vec<T> {
    let half = lit::<T>(0.5);
    let two = lit::<T>(2.0);
    let sixth = lit::<T>(1.0 / 6.0);
    let k1 = flow_deriv(metric, state);
    let s2: Vec<T> = state.iter().zip(&k1).map(|(&s, &k)| s + half * dt * k).collect();
    let k2 = flow_deriv(metric, &s2);
    let s3: Vec<T> = state.iter().zip(&k2).map(|(&s, &k)| s + half * dt * k).collect();
    let k3 = flow_deriv(metric, &s3);
    let s4: Vec<T> = state.iter().zip(&k3).map(|(&s, &k)| s + dt * k).collect();
    let k4 = flow_deriv(metric, &s4);
    state
        .iter()
        .enumerate()
        .map(|(i, &s)| s + dt * sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]))
        .collect()
}

/// Traces the bicharacteristic through (x0, omega0) in ∂₊SM.
///
/// `omega0` is the inward direction covector at the boundary point `x0`;
/// it is re-normalized to g-unit length. The returned curve carries uniform
/// samples over [-ext, tau + ext] so downstream phase transport can follow
/// the flow past both endpoints.
pub fn trace<T: Real>(
    metric: &MetricField<T>,
    domain: &Domain<T>,
    x0: &[T],
    omega0: &[T],
    opts: &TraceOptions<T>,
) -> Result<Bicharacteristic<T>> {
    let n = metric.dim();
    if domain.phi(x0).abs() > lit::<T>(1e-9) {
        return Err(Error::Config("ray start point is not on the boundary".into()));
    }
    let gi = metric.g(x0).inverse();
    let h0 = dot(omega0, &gi.matvec(omega0)).sqrt();
    if h0 == T::zero() {
        return Err(Error::DegenerateCovector);
    }
    let om0: Vec<T> = omega0.iter().map(|&v| v / h0).collect();
    let nu = domain.outward_conormal(x0, metric);
    let inward = dot(&om0, &gi.matvec(&nu));
    if inward >= T::zero() {
        return Err(Error::Config(format!(
            "initial covector is not inward (<omega, nu>_g = {:e})",
            inward.to_f64().unwrap_or(f64::NAN)
        )));
    }

    // paper flow covector
    let p0: Vec<T> = om0.iter().map(|&v| -v).collect();
    let mut state: Vec<T> = x0.iter().chain(p0.iter()).copied().collect();
    let dt = opts.step;

    // march until phi crosses zero from inside
    let mut t = T::zero();
    let mut prev_state = state.clone();
    let mut entered = false;
    let tau = loop {
        prev_state.copy_from_slice(&state);
        state = rk4(metric, &state, dt);
        t += dt;
        let phi = domain.phi(&state[..n]);
        if phi < -lit::<T>(1e-6) {
            entered = true;
        }
        if entered && phi >= T::zero() {
            // bisection on the step fraction, re-integrating from prev_state
            let mut lo = T::zero();
            let mut hi = dt;
            for _ in 0..80 {
                if hi - lo < lit::<T>(1e-12) {
                    break;
                }
                let mid = (lo + hi) * lit::<T>(0.5);
                let s = rk4(metric, &prev_state, mid);
                if domain.phi(&s[..n]) >= T::zero() {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let cross = (lo + hi) * lit::<T>(0.5);
            break t - dt + cross;
        }
        if t > opts.t_max {
            return Err(Error::TrappedRay { t_max: opts.t_max.to_f64().unwrap_or(f64::NAN) });
        }
    };

    // resample uniformly over [-ext, tau + ext] with the step snapped so the
    // segment endpoints r = 0 and r = tau land exactly on samples
    let n_in = (tau / dt).ceil().to_f64().unwrap() as usize;
    let dt_s = tau / lit::<T>(n_in as f64);
    let n_ext = (opts.extension / dt_s).ceil().to_f64().unwrap() as usize;
    let r_lo = -dt_s * lit::<T>(n_ext as f64);

    let mut samples = Vec::with_capacity(n_in + 2 * n_ext + 1);
    let push = |samples: &mut Vec<RaySample<T>>, st: &[T]| {
        let d = flow_deriv(metric, st);
        samples.push(RaySample {
            x: st[..n].to_vec(),
            om: st[n..].iter().map(|&v| -v).collect(),
            dx: d[..n].to_vec(),
            dom: d[n..].iter().map(|&v| -v).collect(),
        });
    };

    // backward extension (integrate the flow with negative steps)
    let mut back_states = Vec::with_capacity(n_ext);
    let mut st: Vec<T> = x0.iter().chain(p0.iter()).copied().collect();
    for _ in 0..n_ext {
        st = rk4(metric, &st, -dt_s);
        back_states.push(st.clone());
    }
    for s in back_states.iter().rev() {
        push(&mut samples, s);
    }
    // forward through the segment and the forward extension
    let mut st: Vec<T> = x0.iter().chain(p0.iter()).copied().collect();
    push(&mut samples, &st);
    for _ in 0..(n_in + n_ext) {
        st = rk4(metric, &st, dt_s);
        push(&mut samples, &st);
    }

    // transversality at the exit sample r = tau
    let exit = &samples[n_ext + n_in];
    let nu_exit = domain.outward_conormal(&domain.project_to_boundary(&exit.x), metric);
    let margin = dot(&nu_exit, &exit.dx).abs();
    if margin < opts.transversality_threshold {
        return Err(Error::TangentialExit {
            margin: margin.to_f64().unwrap_or(f64::NAN),
            threshold: opts.transversality_threshold.to_f64().unwrap_or(f64::NAN),
        });
    }

    Ok(Bicharacteristic {
        dim: n,
        dt: dt_s,
        r_lo,
        samples,
        tau,
        margin,
        step_used: dt,
        threshold: opts.transversality_threshold,
    })
}

/// Builds the inward unit direction covector at boundary angle `b_angle`
/// with incidence angle `incidence` measured from the inward normal.
pub fn boundary_covector<T: Real>(
    metric: &MetricField<T>,
    domain: &Domain<T>,
    b_angle: T,
    incidence: T,
) -> (Vec<T>, Vec<T>) {
    let x0 = domain.boundary_point(b_angle);
    let g = metric.g(&x0);
    let gi = g.inverse();
    let nu = domain.outward_conormal(&x0, metric);
    // inward unit normal vector
    let nvec = scale_vec(-T::one(), &gi.matvec(&nu));
    // g-orthonormal tangent vector via Gram-Schmidt on a coordinate axis
    let seed = if nvec[0].abs() < lit::<T>(0.9) {
        vec![T::one(), T::zero()]
    } else {
        vec![T::zero(), T::one()]
    };
    let proj = dot(&seed, &g.matvec(&nvec));
    let mut tvec = sub_vec(&seed, &scale_vec(proj, &nvec));
    let tnorm = dot(&tvec, &g.matvec(&tvec)).sqrt();
    tvec = scale_vec(T::one() / tnorm, &tvec);
    let dir: Vec<T> = nvec
        .iter()
        .zip(&tvec)
        .map(|(&nv, &tv)| incidence.cos() * nv + incidence.sin() * tv)
        .collect();
    let om0 = g.matvec(&dir);
    (x0, om0)
}

/// Numerical audit of the sign conventions along a traced curve.
#[derive(Clone, Debug)]
pub struct OrientationReport<T> {
    /// max |dx/dt + h_p(x, p)| with p the flow covector (-om)
    pub flow_residual: T,
    /// max |h(x, om) - 1|
    pub h_drift: T,
    /// max |g(xdot, xdot) - 1|
    pub unit_speed_defect: T,
    /// sign of <xdot(0), omega0>_* pairing; +1 means the curve runs along
    /// the requested inward direction
    pub direction_sign: T,
    /// human-readable record of the convention in force
    pub convention: String,
}

pub fn orientation_check<T: Real>(
    metric: &MetricField<T>,
    b: &Bicharacteristic<T>,
) -> OrientationReport<T> {
    let mut flow_residual = T::zero();
    let mut h_drift = T::zero();
    let mut unit_speed_defect = T::zero();
    let n = b.dim();
    for (i, s) in b.samples().iter().enumerate() {
        let r = b.sample_param(i);
        if r < T::zero() || r > b.tau() {
            continue;
        }
        let p: Vec<T> = s.om.iter().map(|&v| -v).collect();
        let jet = metric.hamiltonian_jet(&s.x, &p, false).unwrap();
        for k in 0..n {
            flow_residual = flow_residual.max((s.dx[k] + jet.h_p[k]).abs());
        }
        h_drift = h_drift.max((jet.h - T::one()).abs());
        let g = metric.g(&s.x);
        unit_speed_defect = unit_speed_defect.max((dot(&s.dx, &g.matvec(&s.dx)) - T::one()).abs());
    }
    let s0 = &b.samples()[0];
    let first_inside = b
        .samples()
        .iter()
        .enumerate()
        .find(|(i, _)| b.sample_param(*i) >= T::zero())
        .map(|(_, s)| s)
        .unwrap_or(s0);
    let align = dot(&first_inside.dx, &first_inside.om);
    OrientationReport {
        flow_residual,
        h_drift,
        unit_speed_defect,
        direction_sign: if align > T::zero() { T::one() } else { -T::one() },
        convention: "flow covector p solves dx/dt = -h_p, dp/dt = h_x with p(0) = -omega0; \
                     stored om = -p is the direction covector, so the spatial curve runs \
                     along omega0 and the beam phase gradient on the curve equals -om"
            .into(),
    }
}
