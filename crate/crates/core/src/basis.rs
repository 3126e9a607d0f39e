//! Solutions of -f'' = λ f on one edge and the rotated (mixed) traces.

use crate::error::{Error, Result};
use crate::graph::End;
use std::f64::consts::PI;

const SERIES_CUTOFF: f64 = 1e-9;

/// c, c', s, s' at a point, where c(0)=1, c'(0)=0, s(0)=0, s'(0)=1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FundamentalValues {
    pub c: f64,
    pub dc: f64,
    pub s: f64,
    pub ds: f64,
}

impl FundamentalValues {
    pub fn wronskian(&self) -> f64 {
        self.c * self.ds - self.dc * self.s
    }
}

pub fn fundamental_pair(lambda: f64, x: f64) -> FundamentalValues {
    let (c, s) = if lambda.abs() < SERIES_CUTOFF {
        let x2 = x * x;
        let c = if lambda >= 0.0 {
            (lambda.sqrt() * x).cos()
        } else {
            ((-lambda).sqrt() * x).cosh()
        };
        (c, x * (1.0 - lambda * x2 / 6.0 + lambda * lambda * x2 * x2 / 120.0))
    } else if lambda > 0.0 {
        let k = lambda.sqrt();
        ((k * x).cos(), (k * x).sin() / k)
    } else {
        let k = (-lambda).sqrt();
        ((k * x).cosh(), (k * x).sinh() / k)
    };
    FundamentalValues { c, dc: -lambda * s, s, ds: c }
}

/// Value and derivative at a point, the derivative taken along the edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TracePair {
    pub value: f64,
    pub deriv: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixedTracePair {
    pub tau: f64,
    pub tau_prime: f64,
    pub alpha: f64,
}

/// Reduce an angle to [0, π).
pub fn reduce_angle(alpha: f64) -> f64 {
    let r = alpha.rem_euclid(PI);
    if r >= PI {
        0.0
    } else {
        r
    }
}

/// Rotation of (f, f') by α: τ = cos α f - sin α f', τ' = sin α f + cos α f'.
pub fn mixed_trace(alpha: f64, t: TracePair) -> MixedTracePair {
    let (s, c) = alpha.sin_cos();
    MixedTracePair {
        tau: c * t.value - s * t.deriv,
        tau_prime: s * t.value + c * t.deriv,
        alpha,
    }
}

pub fn mixed_trace_inverse(m: MixedTracePair) -> TracePair {
    let (s, c) = m.alpha.sin_cos();
    TracePair {
        value: c * m.tau + s * m.tau_prime,
        deriv: -s * m.tau + c * m.tau_prime,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Derivative {
    /// Along the edge orientation.
    Along,
    /// Pointing from the vertex at this end into the edge.
    OutgoingAt(End),
}

/// Evaluate f = a c + b s and its derivative at x.
pub fn edge_eval(coeffs: (f64, f64), lambda: f64, x: f64, length: f64, side: Derivative) -> Result<TracePair> {
    if x < 0.0 || x > length {
        return Err(Error::Solver(format!("x = {x} outside [0, {length}]")));
    }
    let fv = fundamental_pair(lambda, x);
    let value = coeffs.0 * fv.c + coeffs.1 * fv.s;
    let d = coeffs.0 * fv.dc + coeffs.1 * fv.ds;
    let deriv = match side {
        Derivative::Along | Derivative::OutgoingAt(End::Tail) => d,
        Derivative::OutgoingAt(End::Head) => -d,
    };
    Ok(TracePair { value, deriv })
}

/// [∫c², ∫cs, ∫s²] over [0, ℓ].
pub fn edge_gram(lambda: f64, l: f64) -> [f64; 3] {
    if lambda.abs() * l * l < 1e-4 {
        let (l2, l3) = (l * l, l * l * l);
        let (l4, l5) = (l2 * l2, l2 * l3);
        let (l6, l7) = (l3 * l3, l3 * l4);
        let la2 = lambda * lambda;
        return [
            l - lambda * l3 / 3.0 + la2 * l5 / 15.0,
            l2 / 2.0 - lambda * l4 / 6.0 + la2 * l6 / 45.0,
            l3 / 3.0 - lambda * l5 / 15.0 + 2.0 * la2 * l7 / 315.0,
        ];
    }
    if lambda > 0.0 {
        let k = lambda.sqrt();
        let s2 = (2.0 * k * l).sin() / (4.0 * k);
        let sn = (k * l).sin();
        [l / 2.0 + s2, sn * sn / (2.0 * lambda), (l / 2.0 - s2) / lambda]
    } else {
        let k = (-lambda).sqrt();
        let s2 = (2.0 * k * l).sinh() / (4.0 * k);
        let sn = (k * l).sinh();
        [l / 2.0 + s2, sn * sn / (2.0 * k * k), (s2 - l / 2.0) / (k * k)]
    }
}

/// Endpoint data of a well-scaled basis of solutions on an edge.
///
/// For λ ≥ 0 the basis is (c, s). For λ < 0 it is u0 = sinh κ(ℓ-x)/sinh κℓ,
/// u1 = sinh κx/sinh κℓ, which stays bounded for large κℓ; the change of
/// basis from (c, s) has positive determinant, so secular determinants keep
/// their sign.
#[derive(Clone, Copy, Debug)]
pub(crate) struct EndpointBasis {
    /// (value, derivative along the edge) of basis function j at the tail.
    pub tail: [(f64, f64); 2],
    pub head: [(f64, f64); 2],
    /// Maps coefficients in this basis to coefficients in (c, s).
    pub to_cs: [[f64; 2]; 2],
}

pub(crate) fn endpoint_basis(lambda: f64, l: f64) -> EndpointBasis {
    if lambda >= 0.0 {
        let f = fundamental_pair(lambda, l);
        EndpointBasis {
            tail: [(1.0, 0.0), (0.0, 1.0)],
            head: [(f.c, f.dc), (f.s, f.ds)],
            to_cs: [[1.0, 0.0], [0.0, 1.0]],
        }
    } else {
        let (coth, csch) = hyperbolic_ratios(lambda, l);
        EndpointBasis {
            tail: [(1.0, -coth), (0.0, csch)],
            head: [(0.0, -csch), (1.0, coth)],
            to_cs: [[1.0, 0.0], [-coth, csch]],
        }
    }
}

/// (κ coth κℓ, κ csch κℓ) for λ = -κ² < 0, evaluated without overflow.
fn hyperbolic_ratios(lambda: f64, l: f64) -> (f64, f64) {
    let k = (-lambda).sqrt();
    let y = k * l;
    if y < 1e-8 {
        return (1.0 / l + k * y / 3.0, 1.0 / l - k * y / 6.0);
    }
    let e = (-y).exp();
    let den = -(-2.0 * y).exp_m1();
    (k * (1.0 + e * e) / den, 2.0 * k * e / den)
}

/// Entries (c/s, 1/s) at x = ℓ of the edge Dirichlet-to-Neumann form
/// (c/s)(F0² + F1²) - 2 F0 F1 / s, or None at a Dirichlet eigenvalue.
pub(crate) fn edge_dtn(lambda: f64, l: f64) -> Option<(f64, f64)> {
    if lambda < 0.0 {
        return Some(hyperbolic_ratios(lambda, l));
    }
    if lambda > 0.0 {
        let k = lambda.sqrt();
        let sn = (k * l).sin();
        if sn.abs() < 1e-12 {
            return None;
        }
    }
    let f = fundamental_pair(lambda, l);
    Some((f.c / f.s, 1.0 / f.s))
}

/// Number of Dirichlet eigenvalues (mπ/ℓ)², m ≥ 1, strictly below λ.
pub(crate) fn dirichlet_count(lambda: f64, l: f64) -> usize {
    if lambda <= 0.0 {
        return 0;
    }
    let q = lambda.sqrt() * l / PI;
    let c = q.ceil();
    if c <= 0.0 {
        0
    } else {
        c as usize - 1
    }
}
