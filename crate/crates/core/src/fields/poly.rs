use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// Polynomial in ambient coordinates, as a sum of `coef · Π x_a^{e_a}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub terms: Vec<(f64, Vec<u32>)>,
}

impl Polynomial {
    pub fn monomial(exponents: Vec<u32>) -> Self {
        Self {
            terms: vec![(1.0, exponents)],
        }
    }

    /// Linear form `⟨a, x⟩`.
    pub fn linear(a: &[f64]) -> Self {
        let n = a.len();
        Self {
            terms: a
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(i, c)| {
                    let mut e = vec![0; n];
                    e[i] = 1;
                    (*c, e)
                })
                .collect(),
        }
    }

    /// `Re (x₁ + i x₂)^k`, harmonic in any number of variables.
    pub fn zonal_harmonic(vars: usize, k: u32) -> Self {
        let mut terms = Vec::new();
        // Re Σ C(k,j) x1^{k-j} (i x2)^j, only even j survive with sign (-1)^{j/2}
        let mut binom = 1.0;
        for j in 0..=k {
            if j > 0 {
                binom = binom * (k - j + 1) as f64 / j as f64;
            }
            if j % 2 == 0 {
                let sign = if (j / 2) % 2 == 0 { 1.0 } else { -1.0 };
                let mut e = vec![0; vars];
                e[0] = k - j;
                e[1] = j;
                terms.push((sign * binom, e));
            }
        }
        Self { terms }
    }

    /// All monomials of total degree exactly `degree` in `vars` variables, in
    /// a fixed lexicographic order.
    pub fn monomials_of_degree(vars: usize, degree: u32) -> Vec<Vec<u32>> {
        fn rec(vars: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
            if prefix.len() + 1 == vars {
                prefix.push(left);
                out.push(prefix.clone());
                prefix.pop();
                return;
            }
            for e in (0..=left).rev() {
                prefix.push(e);
                rec(vars, left - e, prefix, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        rec(vars, degree, &mut Vec::new(), &mut out);
        out
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|(_, e)| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| c * e.iter().enumerate().map(|(a, &k)| x[a].powi(k as i32)).product::<f64>())
            .sum()
    }

    /// Ambient (Euclidean) gradient.
    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = x.len();
        let mut g = DVector::zeros(n);
        for (c, e) in &self.terms {
            for a in 0..n {
                if e[a] == 0 {
                    continue;
                }
                let mut term = c * e[a] as f64;
                for (b, &k) in e.iter().enumerate() {
                    let pow = if b == a { k - 1 } else { k };
                    term *= x[b].powi(pow as i32);
                }
                g[a] += term;
            }
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monomial_counts() {
        assert_eq!(Polynomial::monomials_of_degree(3, 2).len(), 6);
        assert_eq!(Polynomial::monomials_of_degree(4, 3).len(), 20);
    }

    #[test]
    fn zonal_harmonic_is_harmonic() {
        // Re (x + iy)^3 = x³ - 3xy²
        let p = Polynomial::zonal_harmonic(3, 3);
        let x = DVector::from_vec(vec![0.3, -0.7, 0.2]);
        assert!((p.eval(&x) - (0.027 - 3.0 * 0.3 * 0.49)).abs() < 1e-14);
        let g = p.gradient(&x);
        assert!((g[0] - (3.0 * 0.09 - 3.0 * 0.49)).abs() < 1e-14);
        assert!((g[1] - (-6.0 * 0.3 * -0.7)).abs() < 1e-14);
    }
}
