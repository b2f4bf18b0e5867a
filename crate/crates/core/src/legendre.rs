//! Legendre polynomials, Gauss–Legendre quadrature and zonal series.
//!
//! Zonal functions are written in the variable μ = cos s, where s is
//! the colatitude. A [`ZonalSeries`] holds Legendre coefficients and
//! evaluates the function together with its first two s-derivatives.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Values P_0..=P_n at `x` with first and second derivatives.
pub fn legendre_with_derivatives(n: usize, x: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut p = vec![0.0; n + 1];
    let mut dp = vec![0.0; n + 1];
    let mut ddp = vec![0.0; n + 1];
    p[0] = 1.0;
    if n >= 1 {
        p[1] = x;
        dp[1] = 1.0;
    }
    for k in 1..n {
        let kf = k as f64;
        p[k + 1] = ((2.0 * kf + 1.0) * x * p[k] - kf * p[k - 1]) / (kf + 1.0);
        dp[k + 1] = dp[k - 1] + (2.0 * kf + 1.0) * p[k];
        ddp[k + 1] = ddp[k - 1] + (2.0 * kf + 1.0) * dp[k];
    }
    (p, dp, ddp)
}

pub fn legendre(n: usize, x: f64) -> f64 {
    legendre_with_derivatives(n, x).0[n]
}

/// Gauss–Legendre nodes on (−1, 1), ascending, with weights.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp, _) = legendre_with_derivatives(n, x);
            let dx = p[n] / dp[n];
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp, _) = legendre_with_derivatives(n, x);
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp[n] * dp[n]);
    }
    (nodes, weights)
}

/// Which Legendre degrees a zonal series uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Parity {
    /// All degrees 0..=n.
    All,
    /// Even degrees only (functions of μ², antipodally even).
    Even,
}

/// Function of the colatitude given by a Legendre expansion in cos s.
#[derive(Debug, Clone, PartialEq)]
pub struct ZonalSeries {
    /// Coefficient of P_k for every degree k (zeros for skipped parity).
    pub coeffs: Vec<f64>,
}

/// Value and first two colatitude derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet1 {
    pub v: f64,
    pub ds: f64,
    pub dss: f64,
}

impl ZonalSeries {
    fn degrees(parity: Parity, modes: usize) -> Vec<usize> {
        match parity {
            Parity::All => (0..modes).collect(),
            Parity::Even => (0..modes).map(|k| 2 * k).collect(),
        }
    }

    /// Interpolates (or least-squares fits, if there are more samples
    /// than modes) values given at colatitudes `s`.
    pub fn fit(s: &[f64], values: &[f64], parity: Parity, modes: usize) -> Result<Self> {
        if s.len() != values.len() || modes == 0 || modes > s.len() {
            return Err(Error::InvalidInput(format!(
                "cannot fit {modes} Legendre modes to {} samples",
                s.len()
            )));
        }
        let deg = Self::degrees(parity, modes);
        let top = *deg.last().unwrap();
        let a = DMatrix::from_fn(s.len(), modes, |i, j| legendre_with_derivatives(top, s[i].cos()).0[deg[j]]);
        let b = DVector::from_column_slice(values);
        let sol = a
            .svd(true, true)
            .solve(&b, 1e-14)
            .map_err(|e| Error::Singular(format!("Legendre fit: {e}")))?;
        let mut coeffs = vec![0.0; top + 1];
        for (j, &d) in deg.iter().enumerate() {
            coeffs[d] = sol[j];
        }
        Ok(ZonalSeries { coeffs })
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn value(&self, s: f64) -> f64 {
        self.jet(s).v
    }

    /// u, du/ds, d²u/ds² at colatitude s.
    pub fn jet(&self, s: f64) -> Jet1 {
        let mu = s.cos();
        let sn = s.sin();
        let (p, dp, ddp) = legendre_with_derivatives(self.degree(), mu);
        let mut u = 0.0;
        let mut um = 0.0;
        let mut umm = 0.0;
        for (k, c) in self.coeffs.iter().enumerate() {
            u += c * p[k];
            um += c * dp[k];
            umm += c * ddp[k];
        }
        Jet1 { v: u, ds: -sn * um, dss: sn * sn * umm - mu * um }
    }

    /// Applies the unit-sphere Laplacian exactly (−k(k+1) per mode).
    pub fn laplacian(&self) -> ZonalSeries {
        ZonalSeries {
            coeffs: self.coeffs.iter().enumerate().map(|(k, c)| -((k * (k + 1)) as f64) * c).collect(),
        }
    }

    /// Magnitude of the trailing coefficients relative to the largest;
    /// a cheap resolution diagnostic.
    pub fn tail_ratio(&self, tail: usize) -> f64 {
        let n = self.coeffs.len();
        let big = self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs())).max(f64::MIN_POSITIVE);
        let t = self.coeffs[n.saturating_sub(tail)..].iter().fold(0.0f64, |m, c| m.max(c.abs()));
        t / big
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(12);
        for deg in 0..24 {
            let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg)).sum();
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-14, "degree {deg}");
        }
    }

    #[test]
    fn p2_derivatives() {
        let (p, dp, ddp) = legendre_with_derivatives(2, 0.3);
        assert!((p[2] - 0.5 * (3.0 * 0.09 - 1.0)).abs() < 1e-15);
        assert!((dp[2] - 0.9).abs() < 1e-15);
        assert!((ddp[2] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn series_jet_matches_cosine() {
        // cos 2s = 2μ² − 1 = (4/3) P2 − 1/3
        let z = ZonalSeries { coeffs: vec![-1.0 / 3.0, 0.0, 4.0 / 3.0] };
        for s in [0.2, 1.0, 2.5] {
            let j = z.jet(s);
            assert!((j.v - (2.0 * s).cos()).abs() < 1e-14);
            assert!((j.ds + 2.0 * (2.0 * s).sin()).abs() < 1e-14);
            assert!((j.dss + 4.0 * (2.0 * s).cos()).abs() < 1e-13);
        }
    }

    #[test]
    fn fit_recovers_even_series() {
        let s: Vec<f64> = (0..=40).map(|i| i as f64 * std::f64::consts::PI / 40.0).collect();
        let v: Vec<f64> = s.iter().map(|&t| legendre(4, t.cos()) + 0.5).collect();
        let z = ZonalSeries::fit(&s, &v, Parity::Even, 6).unwrap();
        assert!((z.coeffs[0] - 0.5).abs() < 1e-12);
        assert!((z.coeffs[4] - 1.0).abs() < 1e-12);
    }
}
