// SPDX-License-Identifier: Apache-2.0

//! Forward-mode dual numbers carrying a dense gradient.

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, PartialEq)]
pub struct Dual {
    pub value: f64,
    pub grad: Vec<f64>,
}

impl Dual {
    pub fn constant(value: f64, n: usize) -> Self {
        Dual {
            value,
            grad: vec![0.0; n],
        }
    }

    pub fn variable(value: f64, index: usize, n: usize) -> Self {
        let mut grad = vec![0.0; n];
        grad[index] = 1.0;
        Dual { value, grad }
    }

    pub fn scale(&self, k: f64) -> Self {
        Dual {
            value: self.value * k,
            grad: self.grad.iter().map(|g| g * k).collect(),
        }
    }

    pub fn powi(&self, e: u32) -> Self {
        if e == 0 {
            return Dual::constant(1.0, self.grad.len());
        }
        let k = e as f64 * self.value.powi(e as i32 - 1);
        Dual {
            value: self.value.powi(e as i32),
            grad: self.grad.iter().map(|g| g * k).collect(),
        }
    }

    pub fn add_const(mut self, c: f64) -> Self {
        self.value += c;
        self
    }
}

impl Add for &Dual {
    type Output = Dual;
    fn add(self, rhs: &Dual) -> Dual {
        Dual {
            value: self.value + rhs.value,
            grad: self.grad.iter().zip(&rhs.grad).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Dual {
    type Output = Dual;
    fn sub(self, rhs: &Dual) -> Dual {
        Dual {
            value: self.value - rhs.value,
            grad: self.grad.iter().zip(&rhs.grad).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &Dual {
    type Output = Dual;
    fn mul(self, rhs: &Dual) -> Dual {
        Dual {
            value: self.value * rhs.value,
            grad: self
                .grad
                .iter()
                .zip(&rhs.grad)
                .map(|(a, b)| a * rhs.value + b * self.value)
                .collect(),
        }
    }
}

impl Neg for &Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        self.scale(-1.0)
    }
}

/// Complex number with dual real and imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct CDual {
    pub re: Dual,
    pub im: Dual,
}

impl CDual {
    pub fn zero(n: usize) -> Self {
        CDual {
            re: Dual::constant(0.0, n),
            im: Dual::constant(0.0, n),
        }
    }

    pub fn one(n: usize) -> Self {
        CDual {
            re: Dual::constant(1.0, n),
            im: Dual::constant(0.0, n),
        }
    }

    pub fn conj(&self) -> Self {
        CDual {
            re: self.re.clone(),
            im: -&self.im,
        }
    }

    pub fn norm_sqr(&self) -> Dual {
        &(&self.re * &self.re) + &(&self.im * &self.im)
    }

    pub fn add(&self, rhs: &CDual) -> CDual {
        CDual {
            re: &self.re + &rhs.re,
            im: &self.im + &rhs.im,
        }
    }

    pub fn mul(&self, rhs: &CDual) -> CDual {
        CDual {
            re: &(&self.re * &rhs.re) - &(&self.im * &rhs.im),
            im: &(&self.re * &rhs.im) + &(&self.im * &rhs.re),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule() {
        let x = Dual::variable(3.0, 0, 2);
        let y = Dual::variable(5.0, 1, 2);
        let p = &(&x * &y) + &x.powi(2);
        assert_eq!(p.value, 24.0);
        assert_eq!(p.grad, vec![11.0, 3.0]);
    }

    #[test]
    fn complex_modulus_gradient() {
        let z = CDual {
            re: Dual::variable(0.6, 0, 2),
            im: Dual::variable(0.8, 1, 2),
        };
        let w = z.mul(&z.conj());
        assert!((w.re.value - 1.0).abs() < 1e-15);
        assert!(w.im.value.abs() < 1e-15);
        assert!((w.re.grad[0] - 1.2).abs() < 1e-15 && (w.re.grad[1] - 1.6).abs() < 1e-15);
    }
}
