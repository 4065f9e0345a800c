//! Central finite-difference stencils.
//!
//! Two schemes exist. `Analytic` probes closed-form functions at arbitrary
//! offsets with sixth-order stencils and a small step; `Grid` works on
//! periodic node arrays with fourth-order stencils and the grid spacing as
//! step, so every probe lands on a node.

use nalgebra::DVector;

const FIRST6: [(i32, f64); 6] = [
    (-3, -1.0 / 60.0),
    (-2, 3.0 / 20.0),
    (-1, -3.0 / 4.0),
    (1, 3.0 / 4.0),
    (2, -3.0 / 20.0),
    (3, 1.0 / 60.0),
];

const SECOND6: [(i32, f64); 7] = [
    (-3, 1.0 / 90.0),
    (-2, -3.0 / 20.0),
    (-1, 3.0 / 2.0),
    (0, -49.0 / 18.0),
    (1, 3.0 / 2.0),
    (2, -3.0 / 20.0),
    (3, 1.0 / 90.0),
];

const FIRST4: [(i32, f64); 4] = [
    (-2, 1.0 / 12.0),
    (-1, -2.0 / 3.0),
    (1, 2.0 / 3.0),
    (2, -1.0 / 12.0),
];

const SECOND4: [(i32, f64); 5] = [
    (-2, -1.0 / 12.0),
    (-1, 4.0 / 3.0),
    (0, -5.0 / 2.0),
    (1, 4.0 / 3.0),
    (2, -1.0 / 12.0),
];

/// Default step for probing closed-form functions.
pub const ANALYTIC_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    Analytic { h: f64 },
    Grid { h: f64 },
}

impl Scheme {
    pub fn analytic() -> Self {
        Scheme::Analytic { h: ANALYTIC_STEP }
    }

    pub fn step(&self) -> f64 {
        match *self {
            Scheme::Analytic { h } | Scheme::Grid { h } => h,
        }
    }

    pub fn first_weights(&self) -> &'static [(i32, f64)] {
        match self {
            Scheme::Analytic { .. } => &FIRST6,
            Scheme::Grid { .. } => &FIRST4,
        }
    }

    pub fn second_weights(&self) -> &'static [(i32, f64)] {
        match self {
            Scheme::Analytic { .. } => &SECOND6,
            Scheme::Grid { .. } => &SECOND4,
        }
    }

    /// d/dt f(t) at t = 0.
    pub fn d1<F>(&self, f: F) -> DVector<f64>
    where
        F: Fn(f64) -> DVector<f64>,
    {
        let h = self.step();
        let mut acc: Option<DVector<f64>> = None;
        for &(k, c) in self.first_weights() {
            let v = f(k as f64 * h) * (c / h);
            acc = Some(match acc {
                None => v,
                Some(a) => a + v,
            });
        }
        acc.expect("stencil is non-empty")
    }

    /// d/dt f(t) at t = 0 for scalar functions.
    pub fn d1_scalar<F>(&self, f: F) -> f64
    where
        F: Fn(f64) -> f64,
    {
        let h = self.step();
        self.first_weights()
            .iter()
            .map(|&(k, c)| c * f(k as f64 * h))
            .sum::<f64>()
            / h
    }

    /// d²/dt² f(t) at t = 0.
    pub fn d2<F>(&self, f: F) -> DVector<f64>
    where
        F: Fn(f64) -> DVector<f64>,
    {
        let h = self.step();
        let mut acc: Option<DVector<f64>> = None;
        for &(k, c) in self.second_weights() {
            let v = f(k as f64 * h) * (c / (h * h));
            acc = Some(match acc {
                None => v,
                Some(a) => a + v,
            });
        }
        acc.expect("stencil is non-empty")
    }

    /// ∂²/∂s∂t f(s, t) at the origin, as a tensor product of first-derivative stencils.
    pub fn d_mixed<F>(&self, f: F) -> DVector<f64>
    where
        F: Fn(f64, f64) -> DVector<f64>,
    {
        let h = self.step();
        let mut acc: Option<DVector<f64>> = None;
        for &(k, c) in self.first_weights() {
            for &(l, d) in self.first_weights() {
                let v = f(k as f64 * h, l as f64 * h) * (c * d / (h * h));
                acc = Some(match acc {
                    None => v,
                    Some(a) => a + v,
                });
            }
        }
        acc.expect("stencil is non-empty")
    }
}

/// Five-point second derivative in a scalar parameter with one Richardson
/// step, used for second variations of the energy.
pub fn second_derivative_richardson<F>(f: F, h: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    let five = |h: f64| {
        let f0 = f(0.0);
        (-f(2.0 * h) + 16.0 * f(h) - 30.0 * f0 + 16.0 * f(-h) - f(-2.0 * h)) / (12.0 * h * h)
    };
    let coarse = five(h);
    let fine = five(0.5 * h);
    (16.0 * fine - coarse) / 15.0
}

/// Central first derivative with one Richardson step.
pub fn first_derivative_richardson<F>(f: F, h: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    let central = |h: f64| (f(h) - f(-h)) / (2.0 * h);
    let coarse = central(h);
    let fine = central(0.5 * h);
    (4.0 * fine - coarse) / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(x: f64) -> DVector<f64> {
        DVector::from_element(1, x)
    }

    #[test]
    fn analytic_stencils_hit_trig_derivatives() {
        let s = Scheme::analytic();
        let x0 = 0.3;
        let d1 = s.d1(|t| sv((x0 + t).sin()))[0];
        let d2 = s.d2(|t| sv((x0 + t).sin()))[0];
        assert!((d1 - x0.cos()).abs() < 1e-12);
        assert!((d2 + x0.sin()).abs() < 1e-9);
        let mixed = s.d_mixed(|a, b| sv((x0 + a).sin() * (x0 + b).cos()))[0];
        assert!((mixed + x0.cos() * x0.sin()).abs() < 1e-9);
    }

    #[test]
    fn grid_stencils_are_exact_on_quartics() {
        let s = Scheme::Grid { h: 0.1 };
        let p = |t: f64| 1.0 + 2.0 * t + 3.0 * t * t - t.powi(3) + 0.5 * t.powi(4);
        assert!((s.d1_scalar(p) - 2.0).abs() < 1e-12);
        assert!((s.d2(|t| sv(p(t)))[0] - 6.0).abs() < 1e-10);
    }

    #[test]
    fn richardson_helpers() {
        let f = |t: f64| (1.0 + t).powf(2.5);
        assert!((first_derivative_richardson(f, 1e-3) - 2.5).abs() < 1e-9);
        assert!((second_derivative_richardson(f, 1e-2) - 3.75).abs() < 1e-8);
    }
}
