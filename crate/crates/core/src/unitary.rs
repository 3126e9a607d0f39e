//! Loops of unitary vertex conditions and their winding numbers.

use crate::conditions::{vertex_unitary, ExtReal};
use crate::error::{Error, Result};
use crate::flow::{sf_via_tracking, Family, ParameterInterval, TrackOptions};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;

const START_SAMPLES: usize = 64;
const MAX_SAMPLES: usize = 1 << 20;

/// θ ↦ U(θ) over a lifted θ-interval; t = tan(θ/2).
pub struct UnitaryLoop<'a> {
    map: Box<dyn Fn(f64) -> Result<DMatrix<Complex64>> + 'a>,
    pub path: ParameterInterval,
}

impl<'a> UnitaryLoop<'a> {
    pub fn new(map: impl Fn(f64) -> Result<DMatrix<Complex64>> + 'a, path: ParameterInterval) -> Self {
        UnitaryLoop { map: Box::new(map), path }
    }

    /// The loop of U^v for the coupling of `family` at its vertex `v`.
    pub fn vertex(family: &'a Family, v: usize, path: ParameterInterval) -> Self {
        let coupling = family.coupling();
        let g = family.graph();
        UnitaryLoop::new(
            move |theta| vertex_unitary(&coupling.condition(ExtReal::from_theta(theta)), g, v),
            path,
        )
    }

    pub fn at(&self, theta: f64) -> Result<DMatrix<Complex64>> {
        (self.map)(theta)
    }
}

fn det_phase(u: &DMatrix<Complex64>) -> Result<f64> {
    let dev = (u.adjoint() * u - DMatrix::<Complex64>::identity(u.nrows(), u.ncols())).norm();
    if dev > 1e-10 {
        return Err(Error::Solver(format!("loop sample is not unitary (deviation {dev:e})")));
    }
    Ok(u.clone().determinant().arg())
}

/// Degree of θ ↦ det U(θ) over the path, by phase unwrapping with doubling refinement.
pub fn winding_number(l: &UnitaryLoop) -> Result<i64> {
    let (a, b) = (l.path.theta_start, l.path.theta_end);
    let turns = ((b - a).abs() / (2.0 * PI)).ceil().max(1.0) as usize;
    let mut n = START_SAMPLES * turns;
    let mut phases: Vec<f64> = Vec::new();
    while n <= MAX_SAMPLES {
        phases.clear();
        for i in 0..=n {
            let th = a + (b - a) * i as f64 / n as f64;
            phases.push(det_phase(&l.at(th)?)?);
        }
        let mut total = 0.0;
        let mut max_step: f64 = 0.0;
        for w in phases.windows(2) {
            let mut d = w[1] - w[0];
            d -= 2.0 * PI * (d / (2.0 * PI)).round();
            max_step = max_step.max(d.abs());
            total += d;
        }
        if max_step < PI / 2.0 {
            let w = total / (2.0 * PI);
            let r = w.round();
            if (w - r).abs() > 1e-6 {
                return Err(Error::Solver(format!("winding residue {} too large (open path?)", (w - r).abs())));
            }
            return Ok(r as i64);
        }
        n *= 2;
    }
    Err(Error::Solver("winding refinement cap reached".into()))
}

/// Spectral flow of the loop family through μ and the sum of vertex winding numbers.
pub fn sf_wind_check(family: &Family, mu: f64, m: i32) -> Result<(i64, i64)> {
    let path = ParameterInterval::loops(m);
    let sf = sf_via_tracking(family, mu, path, TrackOptions::default())?.sf;
    let mut winds = 0;
    for &v in family.vertices() {
        winds += winding_number(&UnitaryLoop::vertex(family, v, path))?;
    }
    Ok((sf, winds))
}
