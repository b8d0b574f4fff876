//! Piecewise-C1 boundary superpotentials and their Clarke calculus.
//!
//! A superpotential j: R -> R is locally Lipschitz with finitely many
//! derivative breakpoints. Its Clarke subdifferential at r is the interval
//! spanned by the one-sided derivatives, and the directional derivative is
//! j0(r; v) = max { zeta * v : zeta in the interval }. The well parameter b
//! marks where j drives the boundary trace: the structural conditions
//! checked by `verify_hypotheses` are a growth bound |zeta| <= c0 + c1|r|,
//! the sign condition j0(r; b - r) <= 0, and strictness of that sign away
//! from b. The relaxed-monotonicity constant is only ever sampled, so the
//! reported value is a lower bound for the true one.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type ScalarFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

pub struct Superpotential {
    label: String,
    value: ScalarFn,
    left: ScalarFn,
    right: ScalarFn,
    /// Second derivative on smooth pieces, right-continuous at breakpoints.
    curvature: ScalarFn,
    b: f64,
    breakpoints: Vec<f64>,
    c0: f64,
    c1: f64,
    m_j: Option<f64>,
}

impl std::fmt::Debug for Superpotential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Superpotential")
            .field("label", &self.label)
            .field("b", &self.b)
            .field("breakpoints", &self.breakpoints)
            .finish()
    }
}

impl Superpotential {
    /// j(r) = (r - b)^2, smooth, subdifferential {2(r-b)}.
    pub fn quadratic_well(b: f64) -> Self {
        Superpotential {
            label: "quadratic".into(),
            value: Box::new(move |r| (r - b) * (r - b)),
            left: Box::new(move |r| 2.0 * (r - b)),
            right: Box::new(move |r| 2.0 * (r - b)),
            curvature: Box::new(|_| 2.0),
            b,
            breakpoints: vec![],
            c0: 2.0 * b.abs(),
            c1: 2.0,
            m_j: Some(0.0),
        }
    }

    /// j(r) = |r - b|, convex with a single kink at b.
    pub fn abs_well(b: f64) -> Self {
        Superpotential {
            label: "abs".into(),
            value: Box::new(move |r| (r - b).abs()),
            left: Box::new(move |r| if r > b { 1.0 } else { -1.0 }),
            right: Box::new(move |r| if r >= b { 1.0 } else { -1.0 }),
            curvature: Box::new(|_| 0.0),
            b,
            breakpoints: vec![b],
            c0: 1.0,
            c1: 0.0,
            m_j: Some(0.0),
        }
    }

    /// j(r) = phi(|r - b|) with phi(s) = s for s <= 1 and 1 + (s-1)/2 beyond:
    /// the slope drop at |r - b| = 1 makes j nonconvex.
    pub fn kinked_well(b: f64) -> Self {
        let t = move |r: f64| r - b;
        Superpotential {
            label: "kinked".into(),
            value: Box::new(move |r| {
                let s = t(r).abs();
                if s <= 1.0 {
                    s
                } else {
                    1.0 + 0.5 * (s - 1.0)
                }
            }),
            left: Box::new(move |r| {
                let t = t(r);
                if t > 1.0 {
                    0.5
                } else if t > 0.0 {
                    1.0
                } else if t > -1.0 {
                    -1.0
                } else {
                    -0.5
                }
            }),
            right: Box::new(move |r| {
                let t = t(r);
                if t >= 1.0 {
                    0.5
                } else if t >= 0.0 {
                    1.0
                } else if t >= -1.0 {
                    -1.0
                } else {
                    -0.5
                }
            }),
            curvature: Box::new(|_| 0.0),
            b,
            breakpoints: vec![b - 1.0, b, b + 1.0],
            c0: 1.0,
            c1: 0.0,
            // the concave kinks admit no finite relaxed-monotonicity constant
            m_j: None,
        }
    }

    /// Fully caller-specified superpotential; used for rejection tests and
    /// experimentation. `curvature` is the second derivative on smooth
    /// pieces (right-continuous at breakpoints).
    #[allow(clippy::too_many_arguments)]
    pub fn custom(
        label: impl Into<String>,
        b: f64,
        mut breakpoints: Vec<f64>,
        c0: f64,
        c1: f64,
        m_j: Option<f64>,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        left: impl Fn(f64) -> f64 + Send + Sync + 'static,
        right: impl Fn(f64) -> f64 + Send + Sync + 'static,
        curvature: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup();
        Superpotential {
            label: label.into(),
            value: Box::new(value),
            left: Box::new(left),
            right: Box::new(right),
            curvature: Box::new(curvature),
            b,
            breakpoints,
            c0,
            c1,
            m_j,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Growth constants (c0, c1) bounding |zeta| <= c0 + c1 |r|.
    pub fn growth(&self) -> (f64, f64) {
        (self.c0, self.c1)
    }

    /// Declared relaxed-monotonicity constant, if the instance has one.
    pub fn declared_m_j(&self) -> Option<f64> {
        self.m_j
    }

    pub fn value(&self, r: f64) -> f64 {
        (self.value)(r)
    }

    pub fn left_deriv(&self, r: f64) -> f64 {
        (self.left)(r)
    }

    pub fn right_deriv(&self, r: f64) -> f64 {
        (self.right)(r)
    }

    /// Classical derivative off breakpoints (right value at breakpoints).
    pub fn deriv(&self, r: f64) -> f64 {
        (self.right)(r)
    }

    pub fn curvature(&self, r: f64) -> f64 {
        (self.curvature)(r)
    }

    /// Clarke subdifferential as an ordered interval [lo, hi].
    pub fn clarke_interval(&self, r: f64) -> (f64, f64) {
        let l = self.left_deriv(r);
        let rt = self.right_deriv(r);
        (l.min(rt), l.max(rt))
    }

    /// Generalized directional derivative j0(r; v) = max(lo v, hi v).
    pub fn j0(&self, r: f64, v: f64) -> f64 {
        let (lo, hi) = self.clarke_interval(r);
        (lo * v).max(hi * v)
    }

    pub fn smooth(&self, epsilon: f64) -> Result<SmoothedDerivative<'_>> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "smoothing radius must be positive, got {epsilon}"
            )));
        }
        Ok(SmoothedDerivative { j: self, epsilon })
    }

    /// True when some breakpoint p satisfies r - p in [-eps, eps); the
    /// half-open convention makes the smoothed slope right-continuous.
    fn in_window(&self, r: f64, eps: f64) -> bool {
        self.breakpoints.iter().any(|&p| {
            let d = r - p;
            (-eps..eps).contains(&d)
        })
    }

    pub fn verify_hypotheses(&self, grid: &SamplingGrid) -> Result<HypothesisReport> {
        grid.validate()?;
        let mut samples: Vec<f64> = (0..grid.samples)
            .map(|k| {
                grid.r_min + (grid.r_max - grid.r_min) * k as f64 / (grid.samples - 1) as f64
            })
            .collect();
        samples.extend_from_slice(&self.breakpoints);
        samples.push(self.b);
        samples.sort_by(f64::total_cmp);
        samples.dedup();

        let mut report = HypothesisReport {
            growth_violations: vec![],
            d_violations: vec![],
            h1_violations: vec![],
            m_j_estimate: 0.0,
            growth_margin: f64::INFINITY,
            d_worst: f64::NEG_INFINITY,
            h1_margin: f64::INFINITY,
        };

        for &r in &samples {
            let (lo, hi) = self.clarke_interval(r);
            let zeta = lo.abs().max(hi.abs());
            let bound = self.c0 + self.c1 * r.abs();
            report.growth_margin = report.growth_margin.min(bound - zeta);
            if zeta > bound + 1e-9 * (1.0 + bound) {
                report.growth_violations.push(GrowthViolation { r, zeta, bound });
            }
            let d = self.j0(r, self.b - r);
            report.d_worst = report.d_worst.max(d);
            if d > 1e-12 {
                report.d_violations.push(SignViolation { r, value: d });
            }
            if r != self.b {
                report.h1_margin = report.h1_margin.min(-d);
                if d >= 0.0 {
                    report.h1_violations.push(SignViolation { r, value: d });
                }
            }
        }

        // relaxed-monotonicity constant from consecutive and random pairs
        let mut best = f64::NEG_INFINITY;
        let mut consider = |r: f64, s: f64| {
            if r != s {
                let sum = self.j0(r, s - r) + self.j0(s, r - s);
                best = best.max(sum / ((r - s) * (r - s)));
            }
        };
        for w in samples.windows(2) {
            consider(w[0], w[1]);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(grid.seed);
        for _ in 0..grid.pair_samples {
            let i = rng.gen_range(0..samples.len());
            let k = rng.gen_range(0..samples.len());
            consider(samples[i], samples[k]);
        }
        report.m_j_estimate = best.max(0.0);
        Ok(report)
    }
}

/// Where and how densely `verify_hypotheses` samples.
#[derive(Debug, Clone, Copy)]
pub struct SamplingGrid {
    pub r_min: f64,
    pub r_max: f64,
    pub samples: usize,
    /// Extra random pairs examined for the relaxed-monotonicity estimate.
    pub pair_samples: usize,
    pub seed: u64,
}

impl Default for SamplingGrid {
    fn default() -> Self {
        SamplingGrid { r_min: -10.0, r_max: 10.0, samples: 10_000, pair_samples: 10_000, seed: 0 }
    }
}

impl SamplingGrid {
    fn validate(&self) -> Result<()> {
        if !(self.r_min < self.r_max) {
            return Err(Error::InvalidParameter("sampling range must satisfy r_min < r_max".into()));
        }
        if self.samples < 1000 {
            return Err(Error::InvalidParameter(format!(
                "at least 1000 samples required, got {}",
                self.samples
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthViolation {
    pub r: f64,
    pub zeta: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignViolation {
    pub r: f64,
    pub value: f64,
}

/// Outcome of sampling the structural conditions on a grid.
#[derive(Debug, Clone)]
pub struct HypothesisReport {
    pub growth_violations: Vec<GrowthViolation>,
    /// Points where j0(r; b - r) > 0 beyond tolerance.
    pub d_violations: Vec<SignViolation>,
    /// Points r != b where j0(r; b - r) fails to be strictly negative.
    pub h1_violations: Vec<SignViolation>,
    /// Sampled lower bound for the relaxed-monotonicity constant (clamped at 0).
    pub m_j_estimate: f64,
    /// min over samples of (c0 + c1|r|) - max|zeta|.
    pub growth_margin: f64,
    /// max over samples of j0(r; b - r); nonpositive when the sign condition holds.
    pub d_worst: f64,
    /// min over samples r != b of -j0(r; b - r); positive when strictness holds.
    pub h1_margin: f64,
}

impl HypothesisReport {
    pub fn passes(&self) -> bool {
        self.growth_violations.is_empty()
            && self.d_violations.is_empty()
            && self.h1_violations.is_empty()
    }
}

/// Uniqueness-regime test: coercivity must dominate the nonsmooth term.
pub fn smallness_check(m_a: f64, alpha: f64, m_j: f64, trace_norm: f64) -> bool {
    m_a > alpha * m_j * trace_norm * trace_norm
}

/// Window average of the derivative selection over [r - eps, r + eps].
///
/// Because j is continuous and piecewise C1 the average has the closed form
/// (j(r + eps) - j(r - eps)) / (2 eps); away from every breakpoint window the
/// exact derivative is returned unchanged. `slope` is the derivative of
/// `eval` with the right-hand value taken at its kinks, which is what the
/// state Jacobian and the smoothed adjoint need.
pub struct SmoothedDerivative<'a> {
    j: &'a Superpotential,
    epsilon: f64,
}

impl SmoothedDerivative<'_> {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn eval(&self, r: f64) -> f64 {
        let e = self.epsilon;
        if self.j.in_window(r, e) {
            (self.j.value(r + e) - self.j.value(r - e)) / (2.0 * e)
        } else {
            self.j.deriv(r)
        }
    }

    pub fn slope(&self, r: f64) -> f64 {
        let e = self.epsilon;
        if self.j.in_window(r, e) {
            (self.j.right_deriv(r + e) - self.j.right_deriv(r - e)) / (2.0 * e)
        } else {
            self.j.curvature(r)
        }
    }
}
