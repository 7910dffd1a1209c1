//! Smooth test functions and per-label test tuples.
//!
//! The limit-space test functions need closed-form gradients and Hessians
//! (the residual harness applies the limit generator analytically) and a
//! known support radius (the semigroup window must contain the support for
//! exact matrix-power values).

use crate::linalg::Matrix;

/// A scalar test function on R^d with analytic derivatives.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFn {
    /// `exp(-|x - center|^2 / width)`
    Gaussian { center: Vec<f64>, width: f64 },
    /// `cos^4(pi r / (2 radius))` for `r = |x - center| <= radius`, else 0.
    /// Twice continuously differentiable and compactly supported.
    CosBump { center: Vec<f64>, radius: f64 },
    /// Constant function.
    Constant { value: f64 },
    /// Globally linear `gradient . x` (zero Hessian, unbounded support).
    Linear { gradient: Vec<f64> },
}

impl TestFn {
    pub fn dim(&self) -> Option<usize> {
        match self {
            TestFn::Gaussian { center, .. } | TestFn::CosBump { center, .. } => Some(center.len()),
            TestFn::Linear { gradient } => Some(gradient.len()),
            TestFn::Constant { .. } => None,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TestFn::Gaussian { center, width } => {
                let r2 = dist_sq(x, center);
                (-r2 / width).exp()
            }
            TestFn::CosBump { center, radius } => {
                let r = dist_sq(x, center).sqrt();
                if r >= *radius {
                    0.0
                } else {
                    let c = (std::f64::consts::PI * r / (2.0 * radius)).cos();
                    c * c * c * c
                }
            }
            TestFn::Constant { value } => *value,
            TestFn::Linear { gradient } => gradient.iter().zip(x).map(|(g, xi)| g * xi).sum(),
        }
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        match self {
            TestFn::Gaussian { center, width } => {
                let f = self.eval(x);
                x.iter()
                    .zip(center)
                    .map(|(xi, ci)| -2.0 / width * (xi - ci) * f)
                    .collect()
            }
            TestFn::CosBump { center, radius } => {
                let r = dist_sq(x, center).sqrt();
                if r >= *radius {
                    return vec![0.0; x.len()];
                }
                let (dphi, _) = cos_bump_radial(r, *radius);
                if r < 1e-12 {
                    return vec![0.0; x.len()];
                }
                x.iter()
                    .zip(center)
                    .map(|(xi, ci)| dphi * (xi - ci) / r)
                    .collect()
            }
            TestFn::Constant { .. } => vec![0.0; x.len()],
            TestFn::Linear { gradient } => gradient.clone(),
        }
    }

    pub fn hessian(&self, x: &[f64]) -> Matrix {
        let d = x.len();
        match self {
            TestFn::Gaussian { center, width } => {
                let f = self.eval(x);
                let mut m = Matrix::zeros(d);
                for i in 0..d {
                    for j in 0..d {
                        let di = x[i] - center[i];
                        let dj = x[j] - center[j];
                        let mut v = 4.0 / (width * width) * di * dj * f;
                        if i == j {
                            v -= 2.0 / width * f;
                        }
                        m[(i, j)] = v;
                    }
                }
                m
            }
            TestFn::CosBump { center, radius } => {
                let r = dist_sq(x, center).sqrt();
                let mut m = Matrix::zeros(d);
                if r >= *radius {
                    return m;
                }
                let (dphi, ddphi) = cos_bump_radial(r, *radius);
                if r < 1e-12 {
                    // radial limit: Hessian = phi''(0) * I
                    for i in 0..d {
                        m[(i, i)] = ddphi;
                    }
                    return m;
                }
                for i in 0..d {
                    for j in 0..d {
                        let ui = (x[i] - center[i]) / r;
                        let uj = (x[j] - center[j]) / r;
                        let mut v = (ddphi - dphi / r) * ui * uj;
                        if i == j {
                            v += dphi / r;
                        }
                        m[(i, j)] = v;
                    }
                }
                m
            }
            TestFn::Constant { .. } | TestFn::Linear { .. } => Matrix::zeros(d),
        }
    }

    /// Radius beyond which the function and its first two derivatives are
    /// numerically negligible; `None` for unbounded support.
    pub fn support_radius(&self) -> Option<f64> {
        match self {
            // exp(-40) ~ 4e-18 kills function, gradient, and Hessian tails
            TestFn::Gaussian { width, .. } => Some((40.0 * width).sqrt()),
            TestFn::CosBump { radius, .. } => Some(*radius),
            TestFn::Constant { .. } | TestFn::Linear { .. } => None,
        }
    }

    /// Largest |center coordinate| (0 for centerless functions); the support
    /// ball sits within `center_norm + support_radius` of the origin.
    fn center_radius(&self) -> f64 {
        match self {
            TestFn::Gaussian { center, .. } | TestFn::CosBump { center, .. } => {
                center.iter().map(|c| c * c).sum::<f64>().sqrt()
            }
            _ => 0.0,
        }
    }
}

fn dist_sq(x: &[f64], c: &[f64]) -> f64 {
    x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// First and second radial derivatives of `phi(r) = cos^4(a r)`, a = pi/(2R).
fn cos_bump_radial(r: f64, radius: f64) -> (f64, f64) {
    let a = std::f64::consts::PI / (2.0 * radius);
    let (s, c) = (a * r).sin_cos();
    let dphi = -4.0 * a * c * c * c * s;
    let ddphi = 4.0 * a * a * c * c * (3.0 * s * s - c * c);
    (dphi, ddphi)
}

/// A tuple of test functions, one per component label.
#[derive(Debug, Clone, PartialEq)]
pub struct TestTuple {
    pub name: String,
    pub fns: Vec<TestFn>,
}

impl TestTuple {
    pub fn new(name: &str, fns: Vec<TestFn>) -> Self {
        TestTuple {
            name: name.to_string(),
            fns,
        }
    }

    pub fn n_labels(&self) -> usize {
        self.fns.len()
    }

    pub fn eval(&self, x: &[f64], label: usize) -> f64 {
        self.fns[label].eval(x)
    }

    /// Per-label Gaussians of width `1 + k`: labels are distinguishable but
    /// every entry stays smooth.
    pub fn gaussian(n_labels: usize, dim: usize) -> Self {
        let fns = (0..n_labels)
            .map(|k| TestFn::Gaussian {
                center: vec![0.0; dim],
                width: 1.0 + k as f64,
            })
            .collect();
        TestTuple::new("gaussian", fns)
    }

    /// Per-label compactly supported cosine bumps of radius `3 + k/2`.
    pub fn cosine(n_labels: usize, dim: usize) -> Self {
        let fns = (0..n_labels)
            .map(|k| TestFn::CosBump {
                center: vec![0.0; dim],
                radius: 3.0 + 0.5 * k as f64,
            })
            .collect();
        TestTuple::new("cosine", fns)
    }

    pub fn constant(n_labels: usize, value: f64) -> Self {
        let fns = (0..n_labels).map(|_| TestFn::Constant { value }).collect();
        TestTuple::new("constant", fns)
    }

    /// Upper bound on the support radius over all labels; `None` when any
    /// entry has unbounded support.
    pub fn support_radius(&self) -> Option<f64> {
        let mut out: f64 = 0.0;
        for f in &self.fns {
            out = out.max(f.support_radius()? + f.center_radius());
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_derivatives(f: &TestFn, x: &[f64]) {
        let d = x.len();
        let hstep = 1e-5;
        let grad = f.grad(x);
        let hess = f.hessian(x);
        for i in 0..d {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += hstep;
            xm[i] -= hstep;
            let fd = (f.eval(&xp) - f.eval(&xm)) / (2.0 * hstep);
            assert!(
                (fd - grad[i]).abs() < 1e-7,
                "grad mismatch at {x:?} axis {i}: fd {fd} vs {g}",
                g = grad[i]
            );
            for j in 0..d {
                let mut xpp = x.to_vec();
                let mut xpm = x.to_vec();
                let mut xmp = x.to_vec();
                let mut xmm = x.to_vec();
                xpp[i] += hstep;
                xpp[j] += hstep;
                xpm[i] += hstep;
                xpm[j] -= hstep;
                xmp[i] -= hstep;
                xmp[j] += hstep;
                xmm[i] -= hstep;
                xmm[j] -= hstep;
                let fd2 = (f.eval(&xpp) - f.eval(&xpm) - f.eval(&xmp) + f.eval(&xmm))
                    / (4.0 * hstep * hstep);
                assert!(
                    (fd2 - hess[(i, j)]).abs() < 1e-5,
                    "hessian mismatch at {x:?} ({i},{j}): fd {fd2} vs {h}",
                    h = hess[(i, j)]
                );
            }
        }
    }

    #[test]
    fn gaussian_derivatives_match_finite_differences() {
        let f = TestFn::Gaussian {
            center: vec![0.3, -0.2],
            width: 1.5,
        };
        for x in [[0.0, 0.0], [0.7, 0.4], [-1.2, 2.0]] {
            check_derivatives(&f, &x);
        }
    }

    #[test]
    fn cos_bump_derivatives_match_finite_differences() {
        let f = TestFn::CosBump {
            center: vec![0.1],
            radius: 2.5,
        };
        for x in [[0.4], [-1.3], [1.9]] {
            check_derivatives(&f, &x);
        }
        let f2 = TestFn::CosBump {
            center: vec![0.0, 0.0],
            radius: 3.0,
        };
        for x in [[0.5, 0.7], [-2.0, 1.0]] {
            check_derivatives(&f2, &x);
        }
    }

    #[test]
    fn cos_bump_vanishes_smoothly_at_the_edge() {
        let f = TestFn::CosBump {
            center: vec![0.0],
            radius: 1.0,
        };
        let eps = 1e-6;
        assert!(f.eval(&[1.0 - eps]) < 1e-20);
        assert!(f.grad(&[1.0 - eps])[0].abs() < 1e-12);
        assert_eq!(f.eval(&[1.1]), 0.0);
    }

    #[test]
    fn support_radius_bounds_tails() {
        let f = TestFn::Gaussian {
            center: vec![0.0],
            width: 2.0,
        };
        let r = f.support_radius().unwrap();
        assert!(f.eval(&[r]) < 1e-15);
        let tuple = TestTuple::gaussian(2, 1);
        assert!(tuple.support_radius().unwrap() >= r);
        assert!(TestTuple::constant(2, 1.0).support_radius().is_none());
    }
}
