//! Metric families, derived tensors, domains and potentials.
//!
//! The metric is available in closed form on the whole plane together with
//! its coordinate derivatives up to order three. Everything downstream
//! (Christoffel symbols, the Hamiltonian h(x,p) = sqrt(g^{kl} p_k p_l) and
//! its jets, the divergence-form Laplace-Beltrami coefficients) is assembled
//! from those raw derivative tensors, so a single finite-difference oracle in
//! the tests covers the entire chain.

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, sub_vec, Mat};
use crate::num::{lit, Real};

/// Closed-form metric families. Each one supplies g and its derivatives to
/// order three at any point of the plane; the domain only masks them.
#[derive(Clone, Debug)]
pub enum MetricFamily<T> {
    /// g = I.
    Euclidean,
    /// g = c(x)^2 I with c(x) = 1 + beta * exp(-|x|^2).
    Conformal { beta: T },
    /// g = I + eps * w(x) * S0 with w a compactly supported C^3 bump of
    /// radius rho and S0 a constant symmetric matrix.
    Perturbed { eps: T, rho: T, s0: Mat<T> },
}

/// Smooth metric on the plane with derivatives to order 3.
#[derive(Clone, Debug)]
pub struct MetricField<T> {
    dim: usize,
    family: MetricFamily<T>,
}

/// First and second derivatives of h(x,p) evaluated at one phase-space point.
///
/// `a`, `b`, `c` are the second-derivative blocks h_xx, h_xp, h_pp used by
/// the phase transport along rays; `b[(i,j)] = d^2 h / dx_i dp_j`.
#[derive(Clone, Debug)]
pub struct HamiltonianJet<T> {
    pub h: T,
    pub h_x: Vec<T>,
    pub h_p: Vec<T>,
    pub a: Mat<T>,
    pub b: Mat<T>,
    pub c: Mat<T>,
    pub third: Option<JetThird<T>>,
}

/// Third-derivative blocks of h, indexed so that `xxx[a][(b,c)]` is
/// h_{x_a x_b x_c}, `xxp[a][(b,i)]` is h_{x_a x_b p_i}, `xpp[a][(i,j)]` is
/// h_{x_a p_i p_j} and `ppp[a][(i,j)]` is h_{p_a p_i p_j}.
#[derive(Clone, Debug)]
pub struct JetThird<T> {
    pub xxx: Vec<Mat<T>>,
    pub xxp: Vec<Mat<T>>,
    pub xpp: Vec<Mat<T>>,
    pub ppp: Vec<Mat<T>>,
}

impl<T: Real> MetricField<T> {
    pub fn new(dim: usize, family: MetricFamily<T>) -> Self {
        MetricField { dim, family }
    }

    pub fn euclidean(dim: usize) -> Self {
        Self::new(dim, MetricFamily::Euclidean)
    }

    pub fn conformal(dim: usize, beta: T) -> Self {
        Self::new(dim, MetricFamily::Conformal { beta })
    }

    pub fn perturbed(dim: usize, eps: T, rho: T, s0: Mat<T>) -> Self {
        Self::new(dim, MetricFamily::Perturbed { eps, rho, s0 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn family_name(&self) -> &'static str {
        match self.family {
            MetricFamily::Euclidean => "euclidean",
            MetricFamily::Conformal { .. } => "conformal",
            MetricFamily::Perturbed { .. } => "perturbed",
        }
    }

    /// g at x.
    pub fn g(&self, x: &[T]) -> Mat<T> {
        let n = self.dim;
        match &self.family {
            MetricFamily::Euclidean => Mat::identity(n),
            MetricFamily::Conformal { beta } => {
                let (phi, _, _, _) = conformal_factor(*beta, x);
                Mat::identity(n).scale(phi)
            }
            MetricFamily::Perturbed { eps, rho, s0 } => {
                let (w, _, _, _) = bump_profile(*rho, x);
                Mat::identity(n).add(&s0.scale(*eps * w))
            }
        }
    }

    /// dg[a] = d g / d x_a.
    pub fn dg(&self, x: &[T]) -> Vec<Mat<T>> {
        let n = self.dim;
        match &self.family {
            MetricFamily::Euclidean => vec![Mat::zeros(n); n],
            MetricFamily::Conformal { beta } => {
                let (_, dphi, _, _) = conformal_factor(*beta, x);
                (0..n).map(|a| Mat::identity(n).scale(dphi[a])).collect()
            }
            MetricFamily::Perturbed { eps, rho, s0 } => {
                let (_, dw, _, _) = bump_profile(*rho, x);
                (0..n).map(|a| s0.scale(*eps * dw[a])).collect()
            }
        }
    }

    /// d2g[a][b] = d^2 g / d x_a d x_b.
    pub fn d2g(&self, x: &[T]) -> Vec<Vec<Mat<T>>> {
        let n = self.dim;
        match &self.family {
            MetricFamily::Euclidean => vec![vec![Mat::zeros(n); n]; n],
            MetricFamily::Conformal { beta } => {
                let (_, _, d2phi, _) = conformal_factor(*beta, x);
                (0..n)
                    .map(|a| (0..n).map(|b| Mat::identity(n).scale(d2phi[(a, b)])).collect())
                    .collect()
            }
            MetricFamily::Perturbed { eps, rho, s0 } => {
                let (_, _, d2w, _) = bump_profile(*rho, x);
                (0..n).map(|a| (0..n).map(|b| s0.scale(*eps * d2w[(a, b)])).collect()).collect()
            }
        }
    }

    /// d3g[a][b][c] = d^3 g / d x_a d x_b d x_c.
    pub fn d3g(&self, x: &[T]) -> Vec<Vec<Vec<Mat<T>>>> {
        let n = self.dim;
        match &self.family {
            MetricFamily::Euclidean => vec![vec![vec![Mat::zeros(n); n]; n]; n],
            MetricFamily::Conformal { beta } => {
                let (_, _, _, d3phi) = conformal_factor(*beta, x);
                (0..n)
                    .map(|a| {
                        (0..n)
                            .map(|b| {
                                (0..n)
                                    .map(|c| Mat::identity(n).scale(d3phi[a][(b, c)]))
                                    .collect()
                            })
                            .collect()
                    })
                    .collect()
            }
            MetricFamily::Perturbed { eps, rho, s0 } => {
                let (_, _, _, d3w) = bump_profile(*rho, x);
                (0..n)
                    .map(|a| {
                        (0..n)
                            .map(|b| (0..n).map(|c| s0.scale(*eps * d3w[a][(b, c)])).collect())
                            .collect()
                    })
                    .collect()
            }
        }
    }

    /// (g, g^{-1}, sqrt(det g)) with an SPD check on the evaluated tensor.
    pub fn metric_eval(&self, x: &[T]) -> Result<(Mat<T>, Mat<T>, T)> {
        let g = self.g(x);
        let min_eig = g.min_eigenvalue_sym();
        if min_eig <= T::zero() {
            return Err(Error::Config(format!(
                "metric not positive definite at {:?} (min eigenvalue {:e})",
                x.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect::<Vec<_>>(),
                min_eig.to_f64().unwrap_or(f64::NAN)
            )));
        }
        let g_inv = g.inverse();
        let sqrt_det = g.det().sqrt();
        Ok((g, g_inv, sqrt_det))
    }

    pub fn sqrt_det(&self, x: &[T]) -> T {
        self.g(x).det().sqrt()
    }

    /// Inverse-metric derivatives: G, dG[a], d2G[a][b].
    fn ginv_derivs(&self, x: &[T]) -> (Mat<T>, Vec<Mat<T>>, Vec<Vec<Mat<T>>>) {
        let n = self.dim;
        let g = self.g(x);
        let gi = g.inverse();
        let dg = self.dg(x);
        let d2g = self.d2g(x);
        // dG_a = -G g_a G
        let dgi: Vec<Mat<T>> =
            (0..n).map(|a| gi.matmul(&dg[a]).matmul(&gi).scale(-T::one())).collect();
        // d2G_ab = G g_b G g_a G + G g_a G g_b G - G g_ab G
        let d2gi: Vec<Vec<Mat<T>>> = (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| {
                        let t1 = gi.matmul(&dg[b]).matmul(&gi).matmul(&dg[a]).matmul(&gi);
                        let t2 = gi.matmul(&dg[a]).matmul(&gi).matmul(&dg[b]).matmul(&gi);
                        let t3 = gi.matmul(&d2g[a][b]).matmul(&gi);
                        t1.add(&t2).sub(&t3)
                    })
                    .collect()
            })
            .collect();
        (gi, dgi, d2gi)
    }

    /// Third inverse-metric derivatives d3G[a][b][c].
    fn ginv_d3(&self, x: &[T]) -> Vec<Vec<Vec<Mat<T>>>> {
        let n = self.dim;
        let g = self.g(x);
        let gi = g.inverse();
        let dg = self.dg(x);
        let d2g = self.d2g(x);
        let d3g = self.d3g(x);
        let dgi: Vec<Mat<T>> =
            (0..n).map(|c| gi.matmul(&dg[c]).matmul(&gi).scale(-T::one())).collect();
        let chain5 = |m1: &Mat<T>, m2: &Mat<T>, m3: &Mat<T>, m4: &Mat<T>, m5: &Mat<T>| {
            m1.matmul(m2).matmul(m3).matmul(m4).matmul(m5)
        };
        (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| {
                        (0..n)
                            .map(|c| {
                                // d/dx_c [ G g_b G g_a G ]
                                let p1 = chain5(&dgi[c], &dg[b], &gi, &dg[a], &gi)
                                    .add(&chain5(&gi, &d2g[b][c], &gi, &dg[a], &gi))
                                    .add(&chain5(&gi, &dg[b], &dgi[c], &dg[a], &gi))
                                    .add(&chain5(&gi, &dg[b], &gi, &d2g[a][c], &gi))
                                    .add(&chain5(&gi, &dg[b], &gi, &dg[a], &dgi[c]));
                                // d/dx_c [ G g_a G g_b G ]
                                let p2 = chain5(&dgi[c], &dg[a], &gi, &dg[b], &gi)
                                    .add(&chain5(&gi, &d2g[a][c], &gi, &dg[b], &gi))
                                    .add(&chain5(&gi, &dg[a], &dgi[c], &dg[b], &gi))
                                    .add(&chain5(&gi, &dg[a], &gi, &d2g[b][c], &gi))
                                    .add(&chain5(&gi, &dg[a], &gi, &dg[b], &dgi[c]));
                                // d/dx_c [ -G g_ab G ]
                                let p3 = dgi[c]
                                    .matmul(&d2g[a][b])
                                    .matmul(&gi)
                                    .add(&gi.matmul(&d3g[a][b][c]).matmul(&gi))
                                    .add(&gi.matmul(&d2g[a][b]).matmul(&dgi[c]))
                                    .scale(-T::one());
                                p1.add(&p2).add(&p3)
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    /// Christoffel symbols; `out[d][(a,b)]` is Gamma^d_{ab}.
    pub fn christoffel(&self, x: &[T]) -> Vec<Mat<T>> {
        let n = self.dim;
        let g = self.g(x);
        let gi = g.inverse();
        let dg = self.dg(x);
        let half = lit::<T>(0.5);
        (0..n)
            .map(|d| {
                Mat::from_fn(n, |a, b| {
                    let mut s = T::zero();
                    for e in 0..n {
                        s += gi[(d, e)] * (dg[b][(e, a)] + dg[a][(e, b)] - dg[e][(a, b)]);
                    }
                    s * half
                })
            })
            .collect()
    }

    /// h(x,p) without derivatives.
    pub fn h(&self, x: &[T], p: &[T]) -> T {
        let gi = self.g(x).inverse();
        dot(p, &gi.matvec(p)).sqrt()
    }

    /// Full jet of h at (x, p). Second derivatives always; thirds on request.
    pub fn hamiltonian_jet(&self, x: &[T], p: &[T], with_third: bool) -> Result<HamiltonianJet<T>> {
        let n = self.dim;
        assert_eq!(x.len(), n);
        assert_eq!(p.len(), n);
        if norm(p) == T::zero() {
            return Err(Error::DegenerateCovector);
        }
        let (gi, dgi, d2gi) = self.ginv_derivs(x);
        let quad = |m: &Mat<T>| dot(p, &m.matvec(p));

        let two = lit::<T>(2.0);
        let m = 2 * n; // combined (x, p) variable count
        // q = p^T G p and its derivative tensors over the combined variables.
        let q = quad(&gi);
        let mut q1 = vec![T::zero(); m];
        for a in 0..n {
            q1[a] = quad(&dgi[a]);
        }
        let gp = gi.matvec(p);
        for i in 0..n {
            q1[n + i] = two * gp[i];
        }
        let mut q2 = Mat::zeros(m);
        for a in 0..n {
            for b in 0..n {
                q2[(a, b)] = quad(&d2gi[a][b]);
            }
            let dgp = dgi[a].matvec(p);
            for i in 0..n {
                q2[(a, n + i)] = two * dgp[i];
                q2[(n + i, a)] = q2[(a, n + i)];
            }
        }
        for i in 0..n {
            for j in 0..n {
                q2[(n + i, n + j)] = two * gi[(i, j)];
            }
        }

        let h = q.sqrt();
        let inv2h = T::one() / (two * h);
        let inv4h3 = T::one() / (lit::<T>(4.0) * h * h * h);
        let h1: Vec<T> = q1.iter().map(|&qa| qa * inv2h).collect();
        let h2 = Mat::from_fn(m, |al, be| q2[(al, be)] * inv2h - q1[al] * q1[be] * inv4h3);

        let h_x = h1[..n].to_vec();
        let h_p = h1[n..].to_vec();
        let a = Mat::from_fn(n, |i, j| h2[(i, j)]);
        let b = Mat::from_fn(n, |i, j| h2[(i, n + j)]);
        let c = Mat::from_fn(n, |i, j| h2[(n + i, n + j)]);

        let third = if with_third {
            let d3gi = self.ginv_d3(x);
            // q third-derivative tensor over combined variables.
            let mut q3 = vec![Mat::zeros(m); m];
            for al in 0..m {
                for be in 0..m {
                    for ga in 0..m {
                        let v = match (al < n, be < n, ga < n) {
                            (true, true, true) => quad(&d3gi[al][be][ga]),
                            (true, true, false) => two * d2gi[al][be].matvec(p)[ga - n],
                            (true, false, true) => two * d2gi[al][ga].matvec(p)[be - n],
                            (false, true, true) => two * d2gi[be][ga].matvec(p)[al - n],
                            (true, false, false) => two * dgi[al][(be - n, ga - n)],
                            (false, true, false) => two * dgi[be][(al - n, ga - n)],
                            (false, false, true) => two * dgi[ga][(al - n, be - n)],
                            (false, false, false) => T::zero(),
                        };
                        q3[al][(be, ga)] = v;
                    }
                }
            }
            let c38 = lit::<T>(3.0) / (lit::<T>(8.0) * h * h * h * h * h);
            let h3 = |al: usize, be: usize, ga: usize| {
                q3[al][(be, ga)] * inv2h
                    - (q2[(al, be)] * q1[ga] + q2[(al, ga)] * q1[be] + q2[(be, ga)] * q1[al])
                        * inv4h3
                    + q1[al] * q1[be] * q1[ga] * c38
            };
            let xxx: Vec<Mat<T>> =
                (0..n).map(|a0| Mat::from_fn(n, |b0, c0| h3(a0, b0, c0))).collect();
            let xxp: Vec<Mat<T>> =
                (0..n).map(|a0| Mat::from_fn(n, |b0, i| h3(a0, b0, n + i))).collect();
            let xpp: Vec<Mat<T>> =
                (0..n).map(|a0| Mat::from_fn(n, |i, j| h3(a0, n + i, n + j))).collect();
            let ppp: Vec<Mat<T>> =
                (0..n).map(|a0| Mat::from_fn(n, |i, j| h3(n + a0, n + i, n + j))).collect();
            Some(JetThird { xxx, xxp, xpp, ppp })
        } else {
            None
        };

        Ok(HamiltonianJet { h, h_x, h_p, a, b, c, third })
    }

    /// d/dx_a of ln sqrt(det g), and the Hessian of the same.
    pub fn log_sqrt_det_derivs(&self, x: &[T]) -> (Vec<T>, Mat<T>) {
        let n = self.dim;
        let g = self.g(x);
        let gi = g.inverse();
        let dg = self.dg(x);
        let d2g = self.d2g(x);
        let dgi: Vec<Mat<T>> =
            (0..n).map(|a| gi.matmul(&dg[a]).matmul(&gi).scale(-T::one())).collect();
        let half = lit::<T>(0.5);
        let tr = |m: &Mat<T>| (0..n).fold(T::zero(), |s, i| s + m[(i, i)]);
        let l1: Vec<T> = (0..n).map(|a| half * tr(&gi.matmul(&dg[a]))).collect();
        let l2 = Mat::from_fn(n, |a, b| {
            half * (tr(&dgi[b].matmul(&dg[a])) + tr(&gi.matmul(&d2g[a][b])))
        });
        (l1, l2)
    }

    /// First-order coefficient of the divergence-form Laplacian,
    /// b^l = d_k G^{kl} + G^{kl} d_k ln sqrt(g), and its x-gradient.
    pub fn laplacian_drift(&self, x: &[T]) -> (Vec<T>, Mat<T>) {
        let n = self.dim;
        let (gi, dgi, d2gi) = self.ginv_derivs(x);
        let (l1, l2) = self.log_sqrt_det_derivs(x);
        let mut bvec = vec![T::zero(); n];
        for l in 0..n {
            for k in 0..n {
                bvec[l] += dgi[k][(k, l)] + gi[(k, l)] * l1[k];
            }
        }
        let dbl = Mat::from_fn(n, |j, l| {
            let mut s = T::zero();
            for k in 0..n {
                s += d2gi[k][j][(k, l)] + dgi[j][(k, l)] * l1[k] + gi[(k, l)] * l2[(k, j)];
            }
            s
        });
        (bvec, dbl)
    }

    /// Integrates the geodesic equation from (x0, v0) over unit parameter and
    /// returns the endpoint. Used by the exponential map and Fermi charts.
    pub fn exp_map(&self, x0: &[T], v0: &[T]) -> Vec<T> {
        let n = self.dim;
        let speed = norm(v0);
        if speed == T::zero() {
            return x0.to_vec();
        }
        let steps = (speed.to_f64().unwrap() / 0.02).ceil().max(8.0) as usize;
        let dt = T::one() / lit::<T>(steps as f64);
        let mut state: Vec<T> = x0.iter().chain(v0.iter()).copied().collect();
        let deriv = |s: &[T]| -> Vec<T> {
            let x = &s[..n];
            let u = &s[n..];
            let gamma = self.christoffel(x);
            let mut d = vec![T::zero(); 2 * n];
            d[..n].copy_from_slice(u);
            for k in 0..n {
                let mut acc = T::zero();
                for i in 0..n {
                    for j in 0..n {
                        acc += gamma[k][(i, j)] * u[i] * u[j];
                    }
                }
                d[n + k] = -acc;
            }
            d
        };
        for _ in 0..steps {
            state = rk4_step(&state, dt, &deriv);
        }
        state[..n].to_vec()
    }

    /// Local geodesic distance by Newton inversion of the exponential map,
    /// seeded with the Euclidean chord. Valid only below `range_bound`.
    pub fn local_distance(&self, x: &[T], y: &[T], range_bound: T) -> Result<T> {
        let sep = norm(&sub_vec(y, x));
        if sep > range_bound {
            return Err(Error::DistanceOutOfRange {
                sep: sep.to_f64().unwrap_or(f64::NAN),
                bound: range_bound.to_f64().unwrap_or(f64::NAN),
            });
        }
        if matches!(self.family, MetricFamily::Euclidean) {
            return Ok(sep);
        }
        if sep == T::zero() {
            return Ok(T::zero());
        }
        let n = self.dim;
        let mut v = sub_vec(y, x);
        let fd = lit::<T>(1e-7) * (T::one() + sep);
        for _ in 0..40 {
            let endpoint = self.exp_map(x, &v);
            let res = sub_vec(&endpoint, y);
            if norm(&res) < lit::<T>(1e-12) {
                break;
            }
            // finite-difference Jacobian of the shooting map
            let mut jac = Mat::zeros(n);
            for j in 0..n {
                let mut vp = v.clone();
                vp[j] += fd;
                let ep = self.exp_map(x, &vp);
                for i in 0..n {
                    jac[(i, j)] = (ep[i] - endpoint[i]) / fd;
                }
            }
            let dv = jac.inverse().matvec(&res);
            for j in 0..n {
                v[j] -= dv[j];
            }
        }
        let g = self.g(x);
        Ok(dot(&v, &g.matvec(&v)).sqrt())
    }

    /// g-length of the straight segment xy, 4-point Gauss-Legendre.
    /// An upper bound on the geodesic distance, tight for nearby points.
    pub fn chord_length(&self, x: &[T], y: &[T]) -> T {
        let d = sub_vec(y, x);
        let nodes = [0.069431844202973713, 0.33000947820757187, 0.66999052179242813, 0.93056815579702623];
        let weights = [0.17392742256872692, 0.32607257743127305, 0.32607257743127305, 0.17392742256872692];
        let mut len = T::zero();
        for (s, w) in nodes.iter().zip(weights.iter()) {
            let pt: Vec<T> =
                x.iter().zip(&d).map(|(&xi, &di)| xi + lit::<T>(*s) * di).collect();
            let g = self.g(&pt);
            len += lit::<T>(*w) * dot(&d, &g.matvec(&d)).sqrt();
        }
        len
    }

    /// Second-order local distance: the quadratic form of g at the midpoint.
    /// Exact for the Euclidean family; used by the cutoff tube evaluator.
    pub fn quad_form_distance(&self, x: &[T], y: &[T]) -> T {
        let mid: Vec<T> =
            x.iter().zip(y).map(|(&a, &b)| (a + b) * lit::<T>(0.5)).collect();
        let d = sub_vec(y, x);
        let g = self.g(&mid);
        dot(&d, &g.matvec(&d)).sqrt()
    }
}

/// phi = c^2 for the conformal family, with derivatives to order 3.
fn conformal_factor<T: Real>(beta: T, x: &[T]) -> (T, Vec<T>, Mat<T>, Vec<Mat<T>>) {
    let n = x.len();
    let r2 = dot(x, x);
    let e = (-r2).exp();
    let two = lit::<T>(2.0);
    let four = lit::<T>(4.0);
    let de: Vec<T> = x.iter().map(|&xa| -two * xa * e).collect();
    let d2e = Mat::from_fn(n, |a, b| {
        let delta = if a == b { T::one() } else { T::zero() };
        (-two * delta + four * x[a] * x[b]) * e
    });
    let d3e: Vec<Mat<T>> = (0..n)
        .map(|a| {
            Mat::from_fn(n, |b, c| {
                let dab = if a == b { T::one() } else { T::zero() };
                let dac = if a == c { T::one() } else { T::zero() };
                let dbc = if b == c { T::one() } else { T::zero() };
                (four * (dab * x[c] + dac * x[b] + dbc * x[a])
                    - lit::<T>(8.0) * x[a] * x[b] * x[c])
                    * e
            })
        })
        .collect();
    let c = T::one() + beta * e;
    let phi = c * c;
    let dphi: Vec<T> = (0..n).map(|a| two * c * beta * de[a]).collect();
    let d2phi = Mat::from_fn(n, |a, b| {
        two * beta * (beta * de[a] * de[b] + c * d2e[(a, b)])
    });
    let d3phi: Vec<Mat<T>> = (0..n)
        .map(|a| {
            Mat::from_fn(n, |b, c2| {
                two * beta
                    * (beta * (d3_sym_term(&d2e, &de, a, b, c2))
                        + beta * de[c2] * d2e[(a, b)]
                        + c * d3e[a][(b, c2)])
            })
        })
        .collect();
    (phi, dphi, d2phi, d3phi)
}

// beta * (E_ac E_b + E_a E_bc) piece of the conformal third derivative
fn d3_sym_term<T: Real>(d2e: &Mat<T>, de: &[T], a: usize, b: usize, c: usize) -> T {
    d2e[(a, c)] * de[b] + de[a] * d2e[(b, c)]
}

/// Quartic bump w = (1 - r^2/rho^2)_+^4 with derivatives to order 3 (C^3).
fn bump_profile<T: Real>(rho: T, x: &[T]) -> (T, Vec<T>, Mat<T>, Vec<Mat<T>>) {
    let n = x.len();
    let r2 = dot(x, x);
    let u = T::one() - r2 / (rho * rho);
    if u <= T::zero() {
        return (T::zero(), vec![T::zero(); n], Mat::zeros(n), vec![Mat::zeros(n); n]);
    }
    let two = lit::<T>(2.0);
    let du: Vec<T> = x.iter().map(|&xa| -two * xa / (rho * rho)).collect();
    let d2u = Mat::from_fn(n, |a, b| {
        if a == b {
            -two / (rho * rho)
        } else {
            T::zero()
        }
    });
    let u2 = u * u;
    let u3 = u2 * u;
    let w = u2 * u2;
    let c4 = lit::<T>(4.0);
    let c12 = lit::<T>(12.0);
    let c24 = lit::<T>(24.0);
    let dw: Vec<T> = (0..n).map(|a| c4 * u3 * du[a]).collect();
    let d2w = Mat::from_fn(n, |a, b| c12 * u2 * du[a] * du[b] + c4 * u3 * d2u[(a, b)]);
    let d3w: Vec<Mat<T>> = (0..n)
        .map(|a| {
            Mat::from_fn(n, |b, c| {
                c24 * u * du[a] * du[b] * du[c]
                    + c12 * u2 * (d2u[(a, c)] * du[b] + du[a] * d2u[(b, c)] + du[c] * d2u[(a, b)])
            })
        })
        .collect();
    (w, dw, d2w, d3w)
}

fn rk4_step<T: Real>(state: &[T], dt: T, deriv: &impl Fn(&[T]) -> Vec<T>) -> Vec<T> {
    let half = lit::<T>(0.5);
    let sixth = lit::<T>(1.0 / 6.0);
    let two = lit::<T>(2.0);
    let k1 = deriv(state);
    let s2: Vec<T> = state.iter().zip(&k1).map(|(&s, &k)| s + half * dt * k).collect();
    let k2 = deriv(&s2);
    let s3: Vec<T> = state.iter().zip(&k2).map(|(&s, &k)| s + half * dt * k).collect();
    let k3 = deriv(&s3);
    let s4: Vec<T> = state.iter().zip(&k3).map(|(&s, &k)| s + dt * k).collect();
    let k4 = deriv(&s4);
    state
        .iter()
        .enumerate()
        .map(|(i, &s)| s + dt * sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]))
        .collect()
}

/// Level-set domain in the plane. The disk is the production domain; the
/// axis-aligned square exists for grid-aligned solver convergence tests.
#[derive(Clone, Debug)]
pub enum Domain<T> {
    /// phi = |x|^2 - radius^2
    Disk { radius: T },
    /// phi = max(|x1|, |x2|) - half
    Square { half: T },
}

impl<T: Real> Domain<T> {
    pub fn unit_disk() -> Self {
        Domain::Disk { radius: T::one() }
    }

    pub fn phi(&self, x: &[T]) -> T {
        match self {
            Domain::Disk { radius } => dot(x, x) - *radius * *radius,
            Domain::Square { half } => x.iter().fold(T::zero(), |m, &v| m.max(v.abs())) - *half,
        }
    }

    pub fn inside(&self, x: &[T]) -> bool {
        self.phi(x) < T::zero()
    }

    pub fn grad_phi(&self, x: &[T]) -> Vec<T> {
        match self {
            Domain::Disk { .. } => x.iter().map(|&v| lit::<T>(2.0) * v).collect(),
            Domain::Square { .. } => {
                let mut imax = 0;
                for i in 1..x.len() {
                    if x[i].abs() > x[imax].abs() {
                        imax = i;
                    }
                }
                let mut gp = vec![T::zero(); x.len()];
                gp[imax] = if x[imax] >= T::zero() { T::one() } else { -T::one() };
                gp
            }
        }
    }

    /// Nearest boundary point (exact for both families).
    pub fn project_to_boundary(&self, x: &[T]) -> Vec<T> {
        match self {
            Domain::Disk { radius } => {
                let r = norm(x);
                if r == T::zero() {
                    let mut p = vec![T::zero(); x.len()];
                    p[0] = *radius;
                    return p;
                }
                x.iter().map(|&v| v * *radius / r).collect()
            }
            Domain::Square { half } => {
                let mut imax = 0;
                for i in 1..x.len() {
                    if x[i].abs() > x[imax].abs() {
                        imax = i;
                    }
                }
                let mut p = x.to_vec();
                p[imax] = if x[imax] >= T::zero() { *half } else { -*half };
                for (i, v) in p.iter_mut().enumerate() {
                    if i != imax {
                        *v = v.min(*half).max(-*half);
                    }
                }
                p
            }
        }
    }

    /// Outward unit conormal at a boundary point: grad(phi) normalized so
    /// that g^{kl} nu_k nu_l = 1.
    pub fn outward_conormal(&self, x: &[T], metric: &MetricField<T>) -> Vec<T> {
        let gp = self.grad_phi(x);
        let gi = metric.g(x).inverse();
        let scale = dot(&gp, &gi.matvec(&gp)).sqrt();
        gp.iter().map(|&v| v / scale).collect()
    }

    /// Point of the boundary at the given parameter angle.
    pub fn boundary_point(&self, angle: T) -> Vec<T> {
        match self {
            Domain::Disk { radius } => vec![*radius * angle.cos(), *radius * angle.sin()],
            Domain::Square { half } => {
                // wrap the angle onto the square perimeter
                let quarter = lit::<T>(std::f64::consts::FRAC_PI_2);
                let t = angle / quarter;
                let seg = t.floor().to_f64().unwrap_or(0.0).rem_euclid(4.0) as usize;
                let frac = t - t.floor();
                let s = (frac * lit::<T>(2.0) - T::one()) * *half;
                match seg {
                    0 => vec![*half, s],
                    1 => vec![-s, *half],
                    2 => vec![-*half, -s],
                    _ => vec![s, -*half],
                }
            }
        }
    }

    pub fn bounding_box(&self) -> (Vec<T>, Vec<T>) {
        match self {
            Domain::Disk { radius } => (vec![-*radius, -*radius], vec![*radius, *radius]),
            Domain::Square { half } => (vec![-*half, -*half], vec![*half, *half]),
        }
    }

    /// Euclidean diameter of the domain, an upper scale for chord lengths.
    pub fn euclidean_diameter(&self) -> T {
        match self {
            Domain::Disk { radius } => lit::<T>(2.0) * *radius,
            Domain::Square { half } => lit::<T>(2.0 * std::f64::consts::SQRT_2) * *half,
        }
    }
}

/// Closed-form time-dependent potentials q(t, x) with d_t q and grad_x q.
#[derive(Clone, Debug)]
pub enum PotentialField<T> {
    Zero,
    Constant { c: T },
    /// a + b t
    TimeAffine { a: T, b: T },
    /// a + sum_i b_i x_i
    SpaceAffine { a: T, b: Vec<T> },
    /// amp * (1 - |x-center|^2/radius^2)_+^4
    Bump { amp: T, center: Vec<T>, radius: T },
    /// amp * (1 + t) * (1 - |x-center|^2/radius^2)_+^4
    TimeRampBump { amp: T, center: Vec<T>, radius: T },
    Sum(Box<PotentialField<T>>, Box<PotentialField<T>>),
    Scaled(T, Box<PotentialField<T>>),
}

impl<T: Real> PotentialField<T> {
    pub fn eval(&self, t: T, x: &[T]) -> T {
        match self {
            PotentialField::Zero => T::zero(),
            PotentialField::Constant { c } => *c,
            PotentialField::TimeAffine { a, b } => *a + *b * t,
            PotentialField::SpaceAffine { a, b } => *a + dot(b, x),
            PotentialField::Bump { amp, center, radius } => {
                let d = sub_vec(x, center);
                *amp * bump_profile(*radius, &d).0
            }
            PotentialField::TimeRampBump { amp, center, radius } => {
                let d = sub_vec(x, center);
                *amp * (T::one() + t) * bump_profile(*radius, &d).0
            }
            PotentialField::Sum(p, q) => p.eval(t, x) + q.eval(t, x),
            PotentialField::Scaled(s, p) => *s * p.eval(t, x),
        }
    }

    pub fn dt(&self, t: T, x: &[T]) -> T {
        match self {
            PotentialField::Zero
            | PotentialField::Constant { .. }
            | PotentialField::SpaceAffine { .. }
            | PotentialField::Bump { .. } => T::zero(),
            PotentialField::TimeAffine { b, .. } => *b,
            PotentialField::TimeRampBump { amp, center, radius } => {
                let d = sub_vec(x, center);
                *amp * bump_profile(*radius, &d).0
            }
            PotentialField::Sum(p, q) => p.dt(t, x) + q.dt(t, x),
            PotentialField::Scaled(s, p) => *s * p.dt(t, x),
        }
    }

    pub fn grad_x(&self, t: T, x: &[T]) -> Vec<T> {
        let n = x.len();
        match self {
            PotentialField::Zero
            | PotentialField::Constant { .. }
            | PotentialField::TimeAffine { .. } => vec![T::zero(); n],
            PotentialField::SpaceAffine { b, .. } => b.clone(),
            PotentialField::Bump { amp, center, radius } => {
                let d = sub_vec(x, center);
                bump_profile(*radius, &d).1.iter().map(|&v| *amp * v).collect()
            }
            PotentialField::TimeRampBump { amp, center, radius } => {
                let d = sub_vec(x, center);
                let f = *amp * (T::one() + t);
                bump_profile(*radius, &d).1.iter().map(|&v| f * v).collect()
            }
            PotentialField::Sum(p, q) => {
                let gp = p.grad_x(t, x);
                let gq = q.grad_x(t, x);
                gp.iter().zip(&gq).map(|(&a, &b)| a + b).collect()
            }
            PotentialField::Scaled(s, p) => p.grad_x(t, x).iter().map(|&v| *s * v).collect(),
        }
    }

    /// Difference q1 - q2 as a field.
    pub fn difference(q1: &PotentialField<T>, q2: &PotentialField<T>) -> PotentialField<T> {
        PotentialField::Sum(
            Box::new(q1.clone()),
            Box::new(PotentialField::Scaled(-T::one(), Box::new(q2.clone()))),
        )
    }

    /// Sampled sup bound of |q|, |d_t q| and |grad q| over [0,T] x bbox.
    pub fn sampled_sup(&self, t_final: T, lo: &[T], hi: &[T], samples: usize) -> T {
        let mut sup = T::zero();
        let sf = lit::<T>(samples as f64 - 1.0);
        for it in 0..samples {
            let t = t_final * lit::<T>(it as f64) / sf;
            for ix in 0..samples {
                for iy in 0..samples {
                    let x = vec![
                        lo[0] + (hi[0] - lo[0]) * lit::<T>(ix as f64) / sf,
                        lo[1] + (hi[1] - lo[1]) * lit::<T>(iy as f64) / sf,
                    ];
                    sup = sup.max(self.eval(t, &x).abs());
                    sup = sup.max(self.dt(t, &x).abs());
                    sup = sup.max(norm(&self.grad_x(t, &x)));
                }
            }
        }
        sup
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_dg(metric: &MetricField<f64>, x: &[f64], a: usize, h: f64) -> Mat<f64> {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[a] += h;
        xm[a] -= h;
        metric.g(&xp).sub(&metric.g(&xm)).scale(0.5 / h)
    }

    #[test]
    fn euclidean_eval_is_identity() {
        let m = MetricField::<f64>::euclidean(2);
        let (g, gi, sd) = m.metric_eval(&[0.3, -0.7]).unwrap();
        assert!(g.sub(&Mat::identity(2)).max_abs() == 0.0);
        assert!(gi.sub(&Mat::identity(2)).max_abs() == 0.0);
        assert_eq!(sd, 1.0);
    }

    #[test]
    fn conformal_closed_form_at_origin() {
        // c(0) = 1.2 so g = 1.44 I and sqrt(det) = 1.44
        let m = MetricField::<f64>::conformal(2, 0.2);
        let (g, gi, sd) = m.metric_eval(&[0.0, 0.0]).unwrap();
        assert!((g[(0, 0)] - 1.44).abs() < 1e-15);
        assert!((g[(0, 1)]).abs() < 1e-15);
        assert!((sd - 1.44).abs() < 1e-14);
        let id = g.matmul(&gi);
        assert!(id.sub(&Mat::identity(2)).max_abs() < 1e-12);
    }

    #[test]
    fn metric_derivatives_match_finite_differences() {
        let fams = [
            MetricField::<f64>::conformal(2, 0.2),
            MetricField::<f64>::perturbed(
                2,
                0.08,
                0.75,
                Mat::from_rows(&[&[0.8, 0.5], &[0.5, -0.6]]),
            ),
        ];
        let pts = [[0.3, 0.1], [-0.2, 0.45], [0.05, -0.6]];
        let h = 1e-5;
        for m in &fams {
            for x in &pts {
                let dg = m.dg(x);
                let d2g = m.d2g(x);
                let d3g = m.d3g(x);
                for a in 0..2 {
                    let fd = fd_dg(m, x, a, h);
                    assert!(dg[a].sub(&fd).max_abs() < 1e-8, "dg mismatch");
                    for b in 0..2 {
                        let mut xp = x.to_vec();
                        let mut xm = x.to_vec();
                        xp[b] += h;
                        xm[b] -= h;
                        let mp = m.dg(&xp)[a].clone();
                        let mm = m.dg(&xm)[a].clone();
                        let fd2 = mp.sub(&mm).scale(0.5 / h);
                        assert!(d2g[a][b].sub(&fd2).max_abs() < 1e-7, "d2g mismatch");
                        for c in 0..2 {
                            let mut xp = x.to_vec();
                            let mut xm = x.to_vec();
                            xp[c] += h;
                            xm[c] -= h;
                            let mp = m.d2g(&xp)[a][b].clone();
                            let mm = m.d2g(&xm)[a][b].clone();
                            let fd3 = mp.sub(&mm).scale(0.5 / h);
                            assert!(d3g[a][b][c].sub(&fd3).max_abs() < 2e-6, "d3g mismatch");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn christoffel_euclidean_zero_and_symmetric() {
        let m = MetricField::<f64>::euclidean(2);
        let gamma = m.christoffel(&[0.4, 0.2]);
        for d in 0..2 {
            assert_eq!(gamma[d].max_abs(), 0.0);
        }
        let mc = MetricField::<f64>::conformal(2, 0.2);
        let gamma = mc.christoffel(&[0.3, -0.2]);
        for d in 0..2 {
            assert!(gamma[d].symmetry_defect() == 0.0);
        }
    }

    #[test]
    fn christoffel_matches_finite_difference_formula() {
        let m = MetricField::<f64>::conformal(2, 0.2);
        let x = [0.3, 0.1];
        let h = 1e-4;
        let gamma = m.christoffel(&x);
        let gi = m.g(&x).inverse();
        // push central differences of g through the defining formula
        let dg_fd: Vec<Mat<f64>> = (0..2).map(|a| fd_dg(&m, &x, a, h)).collect();
        for d in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    let mut s = 0.0;
                    for e in 0..2 {
                        s += 0.5
                            * gi[(d, e)]
                            * (dg_fd[b][(e, a)] + dg_fd[a][(e, b)] - dg_fd[e][(a, b)]);
                    }
                    let rel = (gamma[d][(a, b)] - s).abs() / gamma[d].max_abs().max(1e-12);
                    assert!(rel < 1e-6, "Gamma^{d}_{a}{b} rel err {rel}");
                }
            }
        }
    }

    #[test]
    fn hamiltonian_jet_euclidean_closed_form() {
        let m = MetricField::<f64>::euclidean(2);
        let p = [1.0, 0.0];
        let jet = m.hamiltonian_jet(&[0.1, 0.2], &p, false).unwrap();
        assert!((jet.h - 1.0).abs() < 1e-15);
        assert!(jet.a.max_abs() < 1e-15);
        assert!(jet.b.max_abs() < 1e-15);
        // C = I - p p^T for unit p
        let want = Mat::from_rows(&[&[0.0, 0.0], &[0.0, 1.0]]);
        assert!(jet.c.sub(&want).max_abs() < 1e-14);

        let jet2 = m.hamiltonian_jet(&[0.0, 0.0], &[2.0, 0.0], false).unwrap();
        assert!((jet2.h - 2.0).abs() < 1e-15);
        assert!((jet2.h_p[0] - 1.0).abs() < 1e-15);
        assert!(jet2.h_p[1].abs() < 1e-15);
    }

    #[test]
    fn hamiltonian_jet_rejects_zero_covector() {
        let m = MetricField::<f64>::euclidean(2);
        assert!(matches!(
            m.hamiltonian_jet(&[0.0, 0.0], &[0.0, 0.0], false),
            Err(Error::DegenerateCovector)
        ));
    }

    #[test]
    fn hamiltonian_jet_matches_fd_oracle() {
        let fams = [
            MetricField::<f64>::conformal(2, 0.2),
            MetricField::<f64>::perturbed(
                2,
                0.08,
                0.75,
                Mat::from_rows(&[&[0.8, 0.5], &[0.5, -0.6]]),
            ),
        ];
        let x = [0.3, 0.1];
        let p = [1.0, 0.0];
        let h = 1e-4;
        for m in &fams {
            let jet = m.hamiltonian_jet(&x, &p, true).unwrap();
            let f = |x: &[f64], p: &[f64]| m.h(x, p);
            // gradients
            for a in 0..2 {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[a] += h;
                xm[a] -= h;
                let fd = (f(&xp, &p) - f(&xm, &p)) / (2.0 * h);
                assert!((jet.h_x[a] - fd).abs() < 1e-6);
                let mut pp = p.to_vec();
                let mut pm = p.to_vec();
                pp[a] += h;
                pm[a] -= h;
                let fd = (f(&x, &pp) - f(&x, &pm)) / (2.0 * h);
                assert!((jet.h_p[a] - fd).abs() < 1e-6);
            }
            // second derivatives via FD of the analytic gradient
            for a in 0..2 {
                for b in 0..2 {
                    let mut xp = x.to_vec();
                    let mut xm = x.to_vec();
                    xp[b] += h;
                    xm[b] -= h;
                    let jp = m.hamiltonian_jet(&xp, &p, false).unwrap();
                    let jm = m.hamiltonian_jet(&xm, &p, false).unwrap();
                    let fd = (jp.h_x[a] - jm.h_x[a]) / (2.0 * h);
                    assert!((jet.a[(a, b)] - fd).abs() < 1e-6, "A mismatch");
                    let mut pp = p.to_vec();
                    let mut pm = p.to_vec();
                    pp[b] += h;
                    pm[b] -= h;
                    let jp = m.hamiltonian_jet(&x, &pp, false).unwrap();
                    let jm = m.hamiltonian_jet(&x, &pm, false).unwrap();
                    let fd = (jp.h_x[a] - jm.h_x[a]) / (2.0 * h);
                    assert!((jet.b[(a, b)] - fd).abs() < 1e-6, "B mismatch");
                    let fd = (jp.h_p[a] - jm.h_p[a]) / (2.0 * h);
                    assert!((jet.c[(a, b)] - fd).abs() < 1e-6, "C mismatch");
                }
            }
            // A and C symmetric, h positive
            assert!(jet.a.symmetry_defect() < 1e-12);
            assert!(jet.c.symmetry_defect() < 1e-12);
            assert!(jet.h > 0.0);
            // third derivatives against FD of the second
            let third = jet.third.as_ref().unwrap();
            for a in 0..2 {
                for b in 0..2 {
                    for c in 0..2 {
                        let mut xp = x.to_vec();
                        let mut xm = x.to_vec();
                        xp[c] += h;
                        xm[c] -= h;
                        let jp = m.hamiltonian_jet(&xp, &p, false).unwrap();
                        let jm = m.hamiltonian_jet(&xm, &p, false).unwrap();
                        let fd = (jp.a[(a, b)] - jm.a[(a, b)]) / (2.0 * h);
                        assert!((third.xxx[a][(b, c)] - fd).abs() < 1e-5, "Hxxx");
                        let fd = (jp.b[(a, b)] - jm.b[(a, b)]) / (2.0 * h);
                        assert!((third.xxp[a][(b, c)] - fd).abs() < 1e-5, "Hxxp");
                        let fd = (jp.c[(a, b)] - jm.c[(a, b)]) / (2.0 * h);
                        assert!((third.xpp[c][(a, b)] - fd).abs() < 1e-5, "Hxpp");
                        let mut pp = p.to_vec();
                        let mut pm = p.to_vec();
                        pp[c] += h;
                        pm[c] -= h;
                        let jp = m.hamiltonian_jet(&x, &pp, false).unwrap();
                        let jm = m.hamiltonian_jet(&x, &pm, false).unwrap();
                        let fd = (jp.c[(a, b)] - jm.c[(a, b)]) / (2.0 * h);
                        assert!((third.ppp[c][(a, b)] - fd).abs() < 1e-5, "Hppp");
                    }
                }
            }
        }
    }

    #[test]
    fn euler_homogeneity_of_h() {
        let m = MetricField::<f64>::conformal(2, 0.2);
        let x = [0.2, -0.3];
        let p = [0.6, 0.8];
        for s in [0.5, 2.0, 7.3] {
            let sp: Vec<f64> = p.iter().map(|&v| s * v).collect();
            assert!((m.h(&x, &sp) - s * m.h(&x, &p)).abs() < 1e-12);
        }
    }

    #[test]
    fn random_spd_inverse_agrees_with_solve() {
        // explicit 2x2 inverse against the (pivoted) linear-solve inverse
        let m = MetricField::<f64>::perturbed(
            2,
            0.08,
            0.75,
            Mat::from_rows(&[&[0.8, 0.5], &[0.5, -0.6]]),
        );
        let x = [0.2, 0.3];
        let g = m.g(&x);
        let det = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)];
        let explicit = Mat::from_rows(&[
            &[g[(1, 1)] / det, -g[(0, 1)] / det],
            &[-g[(1, 0)] / det, g[(0, 0)] / det],
        ]);
        assert!(g.inverse().sub(&explicit).max_abs() < 1e-12);
    }

    #[test]
    fn local_distance_euclidean_and_symmetry() {
        let m = MetricField::<f64>::euclidean(2);
        assert_eq!(m.local_distance(&[0.0, 0.0], &[0.1, 0.0], 0.5).unwrap(), 0.1);
        assert_eq!(m.local_distance(&[0.3, 0.2], &[0.3, 0.2], 0.5).unwrap(), 0.0);

        let mc = MetricField::<f64>::conformal(2, 0.2);
        let x = [0.05, 0.02];
        let y = [-0.05, -0.02];
        let dxy = mc.local_distance(&x, &y, 0.5).unwrap();
        let dyx = mc.local_distance(&y, &x, 0.5).unwrap();
        assert!((dxy - dyx).abs() < 1e-9);
        // chord length upper-bounds the distance, and they are close here
        let chord = mc.chord_length(&x, &y);
        assert!(dxy <= chord + 1e-9);
        assert!(dxy >= 0.99 * chord);
    }

    #[test]
    fn local_distance_range_error() {
        let m = MetricField::<f64>::conformal(2, 0.2);
        assert!(matches!(
            m.local_distance(&[0.0, 0.0], &[0.9, 0.0], 0.5),
            Err(Error::DistanceOutOfRange { .. })
        ));
    }

    #[test]
    fn local_distance_matches_graph_oracle() {
        // dense-graph shortest path + polyline relaxation as an independent
        // route to the geodesic distance
        let m = MetricField::<f64>::conformal(2, 0.2);
        let x = [-0.05, 0.0];
        let y = [0.05, 0.0];
        let d_newton = m.local_distance(&x, &y, 0.5).unwrap();

        // Dijkstra on a fine grid with 8-neighbour g-length edges
        let h = 0.004;
        let pad = 0.06;
        let (x0, y0) = (x[0].min(y[0]) - pad, x[1].min(y[1]) - pad);
        let (x1, y1) = (x[0].max(y[0]) + pad, x[1].max(y[1]) + pad);
        let nx = ((x1 - x0) / h).round() as usize + 1;
        let ny = ((y1 - y0) / h).round() as usize + 1;
        let pt = |i: usize, j: usize| [x0 + i as f64 * h, y0 + j as f64 * h];
        let idx = |i: usize, j: usize| j * nx + i;
        let src = idx(
            ((x[0] - x0) / h).round() as usize,
            ((x[1] - y0) / h).round() as usize,
        );
        let dst = idx(
            ((y[0] - x0) / h).round() as usize,
            ((y[1] - y0) / h).round() as usize,
        );
        let mut dist = vec![f64::INFINITY; nx * ny];
        dist[src] = 0.0;
        let mut heap = std::collections::BinaryHeap::new();
        heap.push((std::cmp::Reverse(ordered(0.0)), src));
        while let Some((std::cmp::Reverse(d), u)) = heap.pop() {
            let d = d.0;
            if d > dist[u] {
                continue;
            }
            if u == dst {
                break;
            }
            let (ui, uj) = (u % nx, u / nx);
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (vi, vj) = (ui as i64 + di, uj as i64 + dj);
                    if vi < 0 || vj < 0 || vi >= nx as i64 || vj >= ny as i64 {
                        continue;
                    }
                    let v = idx(vi as usize, vj as usize);
                    let w = m.chord_length(&pt(ui, uj), &pt(vi as usize, vj as usize));
                    if dist[u] + w < dist[v] {
                        dist[v] = dist[u] + w;
                        heap.push((std::cmp::Reverse(ordered(dist[v])), v));
                    }
                }
            }
        }
        // relax the graph path: resample the chord into a polyline and do
        // coordinate-descent on interior vertices to trim metrication error
        let mut poly: Vec<[f64; 2]> = (0..=32)
            .map(|k| {
                let s = k as f64 / 32.0;
                [x[0] + s * (y[0] - x[0]), x[1] + s * (y[1] - x[1])]
            })
            .collect();
        for _ in 0..60 {
            for k in 1..poly.len() - 1 {
                let mut best = poly[k];
                let mut best_len = m.chord_length(&poly[k - 1], &poly[k])
                    + m.chord_length(&poly[k], &poly[k + 1]);
                for step in [-2e-3, -1e-3, 1e-3, 2e-3] {
                    for dim in 0..2 {
                        let mut cand = poly[k];
                        cand[dim] += step;
                        let l = m.chord_length(&poly[k - 1], &cand)
                            + m.chord_length(&cand, &poly[k + 1]);
                        if l < best_len {
                            best_len = l;
                            best = cand;
                        }
                    }
                }
                poly[k] = best;
            }
        }
        let relaxed: f64 = poly.windows(2).map(|w| m.chord_length(&w[0], &w[1])).sum();
        let oracle = dist[dst].min(relaxed);
        assert!(
            (d_newton - oracle).abs() / oracle < 0.01,
            "newton {d_newton} vs graph oracle {oracle}"
        );
    }

    fn ordered(x: f64) -> OrderedF64 {
        OrderedF64(x)
    }

    #[derive(PartialEq, PartialOrd)]
    struct OrderedF64(f64);
    impl Eq for OrderedF64 {}
    #[allow(clippy::derive_ord_xor_partial_ord)]
    impl Ord for OrderedF64 {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.partial_cmp(other).unwrap()
        }
    }

    #[test]
    fn domain_normal_is_unit_in_g() {
        let dom = Domain::<f64>::unit_disk();
        let metrics = [
            MetricField::<f64>::euclidean(2),
            MetricField::<f64>::conformal(2, 0.2),
        ];
        for m in &metrics {
            for k in 0..12 {
                let ang = k as f64 * std::f64::consts::TAU / 12.0;
                let xb = dom.boundary_point(ang);
                let nu = dom.outward_conormal(&xb, m);
                let gi = m.g(&xb).inverse();
                let val = dot(&nu, &gi.matvec(&nu));
                assert!((val - 1.0).abs() < 1e-12);
                // grad phi nonvanishing near the boundary
                assert!(norm(&dom.grad_phi(&xb)) > 0.5);
            }
        }
    }

    #[test]
    fn potential_presets() {
        let q = PotentialField::SpaceAffine { a: 1.0, b: vec![0.5, 0.0] };
        assert_eq!(q.eval(3.0, &[0.4, 9.0]), 1.2);
        let q = PotentialField::TimeRampBump { amp: 2.0, center: vec![0.0, 0.0], radius: 0.5 };
        assert_eq!(q.eval(1.0, &[0.0, 0.0]), 4.0);
        assert_eq!(q.dt(7.0, &[0.0, 0.0]), 2.0);
        assert_eq!(q.eval(1.0, &[0.6, 0.0]), 0.0);
        let d = PotentialField::difference(
            &PotentialField::Constant { c: 3.0 },
            &PotentialField::Constant { c: 1.0 },
        );
        assert_eq!(d.eval(0.0, &[0.0, 0.0]), 2.0);
        // gradient of the bump against finite differences
        let q = PotentialField::Bump { amp: 1.3, center: vec![0.1, -0.2], radius: 0.6 };
        let x = [0.3, 0.0];
        let g = q.grad_x(0.0, &x);
        let h = 1e-6;
        for dim in 0..2 {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[dim] += h;
            xm[dim] -= h;
            let fd = (q.eval(0.0, &xp) - q.eval(0.0, &xm)) / (2.0 * h);
            assert!((g[dim] - fd).abs() < 1e-8);
        }
    }
}
