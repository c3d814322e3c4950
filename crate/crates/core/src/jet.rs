//! Derivative plumbing: seeding and reading forward-mode dual numbers, and the
//! central finite-difference fallback used for cross-checks.

use nalgebra::{DMatrix, DVector, Dyn, U1};
use num_dual::{Derivative, Dual2DVec64, DualDVec64, DualNum};

/// Scalar types the model formulas are written against.
pub trait Scalar: DualNum<Primitive = f64> {
    fn seed(x: &[f64]) -> Vec<Self>;
    fn value(&self) -> f64 {
        self.re()
    }
    fn gradient(&self, _n: usize) -> Option<DVector<f64>> {
        None
    }
    fn hessian(&self, _n: usize) -> Option<DMatrix<f64>> {
        None
    }
    fn cst(v: f64) -> Self {
        Self::from(v)
    }
}

impl Scalar for f64 {
    fn seed(x: &[f64]) -> Vec<Self> {
        x.to_vec()
    }
}

impl Scalar for DualDVec64 {
    fn seed(x: &[f64]) -> Vec<Self> {
        let n = x.len();
        x.iter()
            .enumerate()
            .map(|(i, &v)| DualDVec64::new(v, Derivative::derivative_generic(Dyn(n), U1, i)))
            .collect()
    }
    fn gradient(&self, n: usize) -> Option<DVector<f64>> {
        Some(self.eps.clone().unwrap_generic(Dyn(n), U1))
    }
}

impl Scalar for Dual2DVec64 {
    fn seed(x: &[f64]) -> Vec<Self> {
        let n = x.len();
        x.iter()
            .enumerate()
            .map(|(i, &v)| {
                Dual2DVec64::new(v, Derivative::derivative_generic(U1, Dyn(n), i), Derivative::none())
            })
            .collect()
    }
    fn gradient(&self, n: usize) -> Option<DVector<f64>> {
        Some(self.v1.clone().unwrap_generic(U1, Dyn(n)).transpose())
    }
    fn hessian(&self, n: usize) -> Option<DMatrix<f64>> {
        Some(self.v2.clone().unwrap_generic(Dyn(n), Dyn(n)))
    }
}

/// How many derivatives a jet carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Order {
    Zero,
    One,
    Two,
}

/// Analytic (forward-mode) or central finite-difference derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivMode {
    Analytic,
    FiniteDifference,
}

/// A symmetric 2-tensor field with optional coordinate derivatives.
///
/// `d1[k]` holds `d_k T_ij`; `d2[k * n + l]` holds `d_k d_l T_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorJet {
    pub val: DMatrix<f64>,
    pub d1: Vec<DMatrix<f64>>,
    pub d2: Vec<DMatrix<f64>>,
}

impl TensorJet {
    pub fn zeros(n: usize, order: Order) -> Self {
        let z = DMatrix::zeros(n, n);
        TensorJet {
            val: z.clone(),
            d1: if order >= Order::One { vec![z.clone(); n] } else { Vec::new() },
            d2: if order >= Order::Two { vec![z; n * n] } else { Vec::new() },
        }
    }

    pub fn dim(&self) -> usize {
        self.val.nrows()
    }

    pub fn order(&self) -> Order {
        if !self.d2.is_empty() {
            Order::Two
        } else if !self.d1.is_empty() {
            Order::One
        } else {
            Order::Zero
        }
    }

    pub fn add(&self, other: &TensorJet) -> TensorJet {
        let d1 = self.d1.iter().zip(&other.d1).map(|(a, b)| a + b).collect();
        let d2 = self.d2.iter().zip(&other.d2).map(|(a, b)| a + b).collect();
        TensorJet { val: &self.val + &other.val, d1, d2 }
    }

    pub fn scale(&self, s: f64) -> TensorJet {
        TensorJet {
            val: &self.val * s,
            d1: self.d1.iter().map(|m| m * s).collect(),
            d2: self.d2.iter().map(|m| m * s).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.val.iter().all(|v| *v == 0.0) && self.d1.iter().all(|m| m.iter().all(|v| *v == 0.0))
    }

    /// Assemble a jet from symmetric component formulas evaluated on seeded scalars.
    pub fn from_components<S: Scalar>(n: usize, comps: &[S], order: Order) -> TensorJet {
        let mut jet = TensorJet::zeros(n, order);
        let mut idx = 0;
        for i in 0..n {
            for j in i..n {
                let c = &comps[idx];
                idx += 1;
                jet.val[(i, j)] = c.value();
                jet.val[(j, i)] = c.value();
                if order >= Order::One {
                    let g = c.gradient(n).expect("seeded scalar carries a gradient");
                    for k in 0..n {
                        jet.d1[k][(i, j)] = g[k];
                        jet.d1[k][(j, i)] = g[k];
                    }
                }
                if order >= Order::Two {
                    let h = c.hessian(n).expect("seeded scalar carries a hessian");
                    for k in 0..n {
                        for l in 0..n {
                            jet.d2[k * n + l][(i, j)] = h[(k, l)];
                            jet.d2[k * n + l][(j, i)] = h[(k, l)];
                        }
                    }
                }
            }
        }
        jet
    }
}

/// Scalar with gradient and Hessian in the chart of evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarJet {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

pub const FD_STEP_FIRST: f64 = 1e-5;
pub const FD_STEP_SECOND: f64 = 1e-4;

fn step(x: f64, rel: f64) -> f64 {
    rel * x.abs().max(1.0)
}

/// Central-difference jet of a matrix-valued function. Second derivatives use
/// differences of values with the larger step.
pub fn fd_tensor_jet<F>(x: &[f64], order: Order, f: F) -> crate::Result<TensorJet>
where
    F: Fn(&[f64]) -> crate::Result<DMatrix<f64>>,
{
    let n = x.len();
    let val = f(x)?;
    let mut jet = TensorJet::zeros(n, order);
    jet.val = val.clone();
    let shifted = |k: usize, dk: f64, l: usize, dl: f64| -> crate::Result<DMatrix<f64>> {
        let mut y = x.to_vec();
        y[k] += dk;
        y[l] += dl;
        f(&y)
    };
    if order >= Order::One {
        for k in 0..n {
            let hk = step(x[k], FD_STEP_FIRST);
            let p = shifted(k, hk, k, 0.0)?;
            let m = shifted(k, -hk, k, 0.0)?;
            jet.d1[k] = (p - m) / (2.0 * hk);
        }
    }
    if order >= Order::Two {
        for k in 0..n {
            let hk = step(x[k], FD_STEP_SECOND);
            let p = shifted(k, hk, k, 0.0)?;
            let m = shifted(k, -hk, k, 0.0)?;
            jet.d2[k * n + k] = (p - &val * 2.0 + m) / (hk * hk);
            for l in (k + 1)..n {
                let hl = step(x[l], FD_STEP_SECOND);
                let pp = shifted(k, hk, l, hl)?;
                let pm = shifted(k, hk, l, -hl)?;
                let mp = shifted(k, -hk, l, hl)?;
                let mm = shifted(k, -hk, l, -hl)?;
                let d = (pp - pm - mp + mm) / (4.0 * hk * hl);
                jet.d2[k * n + l] = d.clone();
                jet.d2[l * n + k] = d;
            }
        }
    }
    Ok(jet)
}

/// Central-difference gradient and Hessian of a scalar function.
pub fn fd_scalar_jet<F>(x: &[f64], f: F) -> crate::Result<ScalarJet>
where
    F: Fn(&[f64]) -> crate::Result<f64>,
{
    let jet = fd_tensor_jet(x, Order::Two, |y| Ok(DMatrix::from_element(1, 1, f(y)?)))?;
    let n = x.len();
    Ok(ScalarJet {
        value: jet.val[(0, 0)],
        grad: DVector::from_iterator(n, jet.d1.iter().map(|m| m[(0, 0)])),
        hess: DMatrix::from_fn(n, n, |k, l| jet.d2[k * n + l][(0, 0)]),
    })
}

/// Analytic gradient and Hessian of a scalar formula.
pub fn ad_scalar_jet<F>(x: &[f64], f: F) -> ScalarJet
where
    F: FnOnce(&[Dual2DVec64]) -> Dual2DVec64,
{
    let n = x.len();
    let v = f(&Dual2DVec64::seed(x));
    ScalarJet {
        value: v.re,
        grad: v.gradient(n).expect("gradient"),
        hess: v.hessian(n).expect("hessian"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn comps<S: Scalar>(x: &[S]) -> Vec<S> {
        // symmetric 2x2: [x0^2 x1, sin x0; ., exp(x0 x1)]
        vec![x[0].clone() * x[0].clone() * x[1].clone(), x[0].sin(), (x[0].clone() * x[1].clone()).exp()]
    }

    #[test]
    fn analytic_and_fd_jets_agree() {
        let x = [0.7, -0.4];
        let fa = TensorJet::from_components(2, &comps(&Dual2DVec64::seed(&x)), Order::Two);
        let fd = fd_tensor_jet(&x, Order::Two, |y| {
            let c = comps(&f64::seed(y));
            Ok(DMatrix::from_row_slice(2, 2, &[c[0], c[1], c[1], c[2]]))
        })
        .unwrap();
        assert_relative_eq!(fa.val, fd.val, epsilon = 1e-15);
        for k in 0..2 {
            assert_relative_eq!(fa.d1[k], fd.d1[k], epsilon = 1e-9);
        }
        for kl in 0..4 {
            assert_relative_eq!(fa.d2[kl], fd.d2[kl], epsilon = 1e-6);
        }
        // d/dx0 of x0^2 x1 = 2 x0 x1
        assert_relative_eq!(fa.d1[0][(0, 0)], 2.0 * 0.7 * -0.4, epsilon = 1e-15);
        let first = TensorJet::from_components(2, &comps(&DualDVec64::seed(&x)), Order::One);
        assert_eq!(first.d1, fa.d1);
        assert_eq!(first.order(), Order::One);
    }

    #[test]
    fn scalar_jets_agree() {
        let f = |x: &[Dual2DVec64]| x[0].clone().powi(3) * x[1].cos();
        let a = ad_scalar_jet(&[1.2, 0.3], f);
        let b = fd_scalar_jet(&[1.2, 0.3], |x| Ok(x[0].powi(3) * x[1].cos())).unwrap();
        assert_relative_eq!(a.grad, b.grad, epsilon = 1e-9);
        assert_relative_eq!(a.hess, b.hess, epsilon = 1e-6);
    }
}
