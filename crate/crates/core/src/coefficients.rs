//! Coefficient models `(φ, g, d)` and their derivatives, with an advisory
//! sampler for the positivity and derivative bounds the analysis assumes.
//!
//! The bounds cannot hold on all of ℝ (φ″ ≥ c₃ > 0 forces φ′ to be
//! unbounded), so each model declares a compact validity interval and the
//! constants are only checked there.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Declared bound constants.
///
/// `c1 ≤ d, g, φ ≤ c2`, `c3 ≤ d′, φ′, φ″ ≤ c4` and `|φ‴| ≤ c_h3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeclaredBounds {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c_h3: f64,
}

#[derive(Clone)]
pub struct CoefficientModel {
    pub name: String,
    pub phi: ScalarFn,
    pub dphi: ScalarFn,
    pub d2phi: ScalarFn,
    pub d3phi: ScalarFn,
    pub gfun: ScalarFn,
    pub dg: ScalarFn,
    pub d2g: ScalarFn,
    pub dfun: ScalarFn,
    pub dd: ScalarFn,
    pub bounds: DeclaredBounds,
    /// Symmetric interval `[-M, M]` on which `bounds` are claimed.
    pub validity: (f64, f64),
}

impl fmt::Debug for CoefficientModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientModel")
            .field("name", &self.name)
            .field("bounds", &self.bounds)
            .field("validity", &self.validity)
            .finish_non_exhaustive()
    }
}

fn arc(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> ScalarFn {
    Arc::new(f)
}

fn tanh_profile(base: f64, amp: f64) -> [ScalarFn; 3] {
    [
        arc(move |r| base + amp * libm::tanh(r)),
        arc(move |r| {
            let t = libm::tanh(r);
            amp * (1.0 - t * t)
        }),
        arc(move |r| {
            let t = libm::tanh(r);
            -2.0 * amp * t * (1.0 - t * t)
        }),
    ]
}

/// Coefficients of a polynomial, lowest degree first, with derivatives.
#[derive(Debug, Clone, PartialEq)]
struct Poly(Vec<f64>);

impl Poly {
    fn eval(&self, r: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * r + c)
    }

    fn derivative(&self) -> Poly {
        Poly(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    fn into_fn(self) -> ScalarFn {
        arc(move |r| self.eval(r))
    }
}

/// Maximum polynomial degree accepted for custom models.
pub const MAX_POLY_DEGREE: usize = 6;

/// Names accepted by [`builtin_model`].
pub const BUILTIN_MODELS: [&str; 3] = [
    "smooth_bounded",
    "verification_constant",
    "verification_linear_phi",
];

/// Looks up a built-in model.
///
/// * `smooth_bounded`: `d = 1 + tanh(r)/2`, `g = 1 + tanh(r)/4`,
///   `φ = 3 + r + 0.1r² + 0.01r³`, bounds declared on `[-2, 2]`.
/// * `verification_constant`: `d ≡ 1`, `g ≡ 0`, `φ(r) = r`. Violates the
///   positivity bounds; only meant for manufactured solutions.
/// * `verification_linear_phi`: `d ≡ 1`, `g ≡ 1`, `φ(r) = r`.
pub fn builtin_model(name: &str) -> Result<CoefficientModel> {
    match name {
        "smooth_bounded" => {
            let [dfun, dd, _] = tanh_profile(1.0, 0.5);
            let [gfun, dg, d2g] = tanh_profile(1.0, 0.25);
            let phi = Poly(alloc::vec![3.0, 1.0, 0.1, 0.01]);
            let dphi = phi.derivative();
            let d2phi = dphi.derivative();
            let d3phi = d2phi.derivative();
            Ok(CoefficientModel {
                name: name.to_string(),
                phi: phi.into_fn(),
                dphi: dphi.into_fn(),
                d2phi: d2phi.into_fn(),
                d3phi: d3phi.into_fn(),
                gfun,
                dg,
                d2g,
                dfun,
                dd,
                // d ∈ [0.518, 1.482], g ∈ [0.759, 1.241], φ ∈ [1.32, 5.48]
                // d′ ∈ [0.0353, 0.5], φ′ ∈ [0.72, 1.52], φ″ ∈ [0.08, 0.32], φ‴ = 0.06
                bounds: DeclaredBounds {
                    c1: 0.5,
                    c2: 5.5,
                    c3: 0.03,
                    c4: 1.6,
                    c_h3: 0.1,
                },
                validity: (-2.0, 2.0),
            })
        }
        "verification_constant" => Ok(linear_phi_model(name, 0.0)),
        "verification_linear_phi" => Ok(linear_phi_model(name, 1.0)),
        other => Err(Error::invalid(format!(
            "unknown coefficient model '{other}' (expected one of {BUILTIN_MODELS:?})"
        ))),
    }
}

fn linear_phi_model(name: &str, g: f64) -> CoefficientModel {
    CoefficientModel {
        name: name.to_string(),
        phi: arc(|r| r),
        dphi: arc(|_| 1.0),
        d2phi: arc(|_| 0.0),
        d3phi: arc(|_| 0.0),
        gfun: arc(move |_| g),
        dg: arc(|_| 0.0),
        d2g: arc(|_| 0.0),
        dfun: arc(|_| 1.0),
        dd: arc(|_| 0.0),
        bounds: DeclaredBounds {
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            c4: 1.0,
            c_h3: 0.0,
        },
        validity: (-2.0, 2.0),
    }
}

impl CoefficientModel {
    /// Model from polynomial coefficient lists (lowest degree first).
    ///
    /// Derivatives are formed from the coefficients. When `bounds` is `None`
    /// the constants are taken from a dense sample of the validity interval.
    pub fn polynomial(
        name: &str,
        phi: &[f64],
        g: &[f64],
        d: &[f64],
        half_width: f64,
        bounds: Option<DeclaredBounds>,
    ) -> Result<CoefficientModel> {
        for (label, c) in [("phi", phi), ("g", g), ("d", d)] {
            if c.is_empty() || c.len() > MAX_POLY_DEGREE + 1 {
                return Err(Error::invalid(format!(
                    "{label}: need 1..={} coefficients",
                    MAX_POLY_DEGREE + 1
                )));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "{label}: coefficients must be finite"
                )));
            }
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::invalid("validity half-width must be positive"));
        }
        let phi = Poly(phi.to_vec());
        let dphi = phi.derivative();
        let d2phi = dphi.derivative();
        let d3phi = d2phi.derivative();
        let g = Poly(g.to_vec());
        let dg = g.derivative();
        let d2g = dg.derivative();
        let d = Poly(d.to_vec());
        let dd = d.derivative();
        let mut model = CoefficientModel {
            name: name.to_string(),
            phi: phi.into_fn(),
            dphi: dphi.into_fn(),
            d2phi: d2phi.into_fn(),
            d3phi: d3phi.into_fn(),
            gfun: g.into_fn(),
            dg: dg.into_fn(),
            d2g: d2g.into_fn(),
            dfun: d.into_fn(),
            dd: dd.into_fn(),
            bounds: DeclaredBounds {
                c1: 0.0,
                c2: 0.0,
                c3: 0.0,
                c4: 0.0,
                c_h3: 0.0,
            },
            validity: (-half_width, half_width),
        };
        model.bounds = match bounds {
            Some(b) => b,
            None => sampled_bounds(&model, 10_000),
        };
        Ok(model)
    }

    /// Replaces φ′; used to probe the derivative-consistency check.
    pub fn with_dphi(mut self, dphi: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.dphi = arc(dphi);
        self
    }

    #[inline]
    pub fn phi(&self, r: f64) -> f64 {
        (self.phi)(r)
    }
    #[inline]
    pub fn dphi(&self, r: f64) -> f64 {
        (self.dphi)(r)
    }
    #[inline]
    pub fn d2phi(&self, r: f64) -> f64 {
        (self.d2phi)(r)
    }
    #[inline]
    pub fn d3phi(&self, r: f64) -> f64 {
        (self.d3phi)(r)
    }
    #[inline]
    pub fn g(&self, r: f64) -> f64 {
        (self.gfun)(r)
    }
    #[inline]
    pub fn dg(&self, r: f64) -> f64 {
        (self.dg)(r)
    }
    #[inline]
    pub fn d2g(&self, r: f64) -> f64 {
        (self.d2g)(r)
    }
    #[inline]
    pub fn d(&self, r: f64) -> f64 {
        (self.dfun)(r)
    }
    #[inline]
    pub fn dd(&self, r: f64) -> f64 {
        (self.dd)(r)
    }

    pub fn in_validity(&self, r: f64) -> bool {
        r >= self.validity.0 && r <= self.validity.1
    }

    /// `(primitive, derivative, label)` pairs that must be consistent.
    fn derivative_pairs(&self) -> [(&ScalarFn, &ScalarFn, &'static str); 6] {
        [
            (&self.phi, &self.dphi, "dphi"),
            (&self.dphi, &self.d2phi, "d2phi"),
            (&self.d2phi, &self.d3phi, "d3phi"),
            (&self.gfun, &self.dg, "dg"),
            (&self.dg, &self.d2g, "d2g"),
            (&self.dfun, &self.dd, "dd"),
        ]
    }
}

fn sample_points(validity: (f64, f64), samples: usize) -> impl Iterator<Item = f64> {
    let (a, b) = validity;
    let n = samples.max(2);
    (0..n).map(move |k| a + (b - a) * k as f64 / (n - 1) as f64)
}

fn sampled_bounds(m: &CoefficientModel, samples: usize) -> DeclaredBounds {
    let mut b = DeclaredBounds {
        c1: f64::INFINITY,
        c2: f64::NEG_INFINITY,
        c3: f64::INFINITY,
        c4: f64::NEG_INFINITY,
        c_h3: 0.0,
    };
    for r in sample_points(m.validity, samples) {
        for v in [m.d(r), m.g(r), m.phi(r)] {
            b.c1 = b.c1.min(v);
            b.c2 = b.c2.max(v);
        }
        for v in [m.dd(r), m.dphi(r), m.d2phi(r)] {
            b.c3 = b.c3.min(v);
            b.c4 = b.c4.max(v);
        }
        b.c_h3 = b.c_h3.max(m.d3phi(r).abs());
    }
    b
}

/// One row of the bounds report: an observed extreme against a declared constant.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    /// e.g. `"c1 <= g"` or `"|d3phi| <= c_h3"`.
    pub name: String,
    pub observed: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeCheck {
    pub name: &'static str,
    /// Largest `|fd − analytic| / max(1, |analytic|)` over the samples.
    pub max_rel_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    pub model: String,
    pub samples: usize,
    pub validity: (f64, f64),
    pub bounds: Vec<BoundCheck>,
    pub derivatives: Vec<DerivativeCheck>,
}

impl BoundsReport {
    pub fn pass(&self) -> bool {
        self.bounds.iter().all(|b| b.pass) && self.derivatives.iter().all(|d| d.pass)
    }

    pub fn row(&self, name: &str) -> Option<&BoundCheck> {
        self.bounds.iter().find(|b| b.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &str> {
        self.bounds
            .iter()
            .filter(|b| !b.pass)
            .map(|b| b.name.as_str())
            .chain(self.derivatives.iter().filter(|d| !d.pass).map(|d| d.name))
    }
}

/// Derivative-consistency tolerance for [`validate_bounds`].
pub const DERIVATIVE_TOL: f64 = 1e-6;

/// Samples the validity interval at `samples` equispaced points and checks
/// each declared constant, plus central-difference consistency of every
/// supplied derivative. Advisory: failures are reported, never raised.
pub fn validate_bounds(m: &CoefficientModel, samples: usize) -> Result<BoundsReport> {
    if samples < 2 {
        return Err(Error::invalid("validate_bounds needs at least 2 samples"));
    }
    let b = m.bounds;
    let values: [(&str, &ScalarFn); 3] = [("d", &m.dfun), ("g", &m.gfun), ("phi", &m.phi)];
    let slopes: [(&str, &ScalarFn); 3] = [("dd", &m.dd), ("dphi", &m.dphi), ("d2phi", &m.d2phi)];

    let extremes = |f: &ScalarFn| {
        sample_points(m.validity, samples).fold(
            (f64::INFINITY, f64::NEG_INFINITY),
            |(lo, hi), r| {
                let v = f(r);
                (lo.min(v), hi.max(v))
            },
        )
    };

    let mut rows = Vec::new();
    for (group, lname, uname, lower, upper) in [
        (&values, "c1", "c2", b.c1, b.c2),
        (&slopes, "c3", "c4", b.c3, b.c4),
    ] {
        for (label, f) in group.iter() {
            let (lo, hi) = extremes(f);
            rows.push(BoundCheck {
                name: format!("{lname} <= {label}"),
                observed: lo,
                bound: lower,
                pass: lo >= lower,
            });
            rows.push(BoundCheck {
                name: format!("{label} <= {uname}"),
                observed: hi,
                bound: upper,
                pass: hi <= upper,
            });
        }
    }
    let third = sample_points(m.validity, samples).fold(0.0f64, |acc, r| acc.max(m.d3phi(r).abs()));
    rows.push(BoundCheck {
        name: "|d3phi| <= c_h3".into(),
        observed: third,
        bound: b.c_h3,
        pass: third <= b.c_h3,
    });

    let derivatives = m
        .derivative_pairs()
        .iter()
        .map(|(f, df, name)| {
            let err = sample_points(m.validity, samples)
                .map(|r| {
                    let h = 1e-4 * r.abs().max(1.0);
                    let fd = (f(r + h) - f(r - h)) / (2.0 * h);
                    let exact = df(r);
                    (fd - exact).abs() / exact.abs().max(1.0)
                })
                .fold(0.0f64, f64::max);
            DerivativeCheck {
                name,
                max_rel_error: err,
                pass: err <= DERIVATIVE_TOL,
            }
        })
        .collect();

    Ok(BoundsReport {
        model: m.name.clone(),
        samples,
        validity: m.validity,
        bounds: rows,
        derivatives,
    })
}
