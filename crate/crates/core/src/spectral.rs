//! Dirichlet-Laplacian eigenbasis on (0,1), spectral fields, and the
//! diagonal operator calculus (semigroup, fractional powers, resolvent).
//!
//! Everything lives on the span of the first `N` eigenfunctions
//! `e_n(x) = sqrt(2) sin(n pi x)` with eigenvalues `lambda_n = (n pi)^2`.
//! On that truncation all the operators are diagonal, so they are exact
//! per-mode scalings; only grid synthesis (for nonlinear terms and L^p
//! norms) introduces quadrature.

use std::sync::Arc;

use crate::error::{Result, SimError};

/// `lambda_n = (n pi)^2`, 1-based mode index.
pub fn dirichlet_eigenvalue(n: usize) -> f64 {
    let npi = n as f64 * std::f64::consts::PI;
    npi * npi
}

/// Eigenbasis of the Dirichlet Laplacian on the unit interval, together
/// with a uniform quadrature grid and the tabulated eigenfunctions.
///
/// The grid holds the `panels - 1` interior points `j / panels`; since the
/// eigenfunctions vanish at the endpoints, the composite trapezoid rule on
/// this grid reduces to `h * sum_j f(xi_j)` and reproduces the discrete
/// sine orthogonality exactly.
#[derive(Debug)]
pub struct EigenBasis {
    dim: usize,
    n_modes: usize,
    panels: usize,
    eigenvalues: Vec<f64>,
    grid: Vec<f64>,
    weight: f64,
    /// Row-major `n_modes x (panels - 1)` table of `e_n(xi_j)`.
    table: Vec<f64>,
}

impl EigenBasis {
    /// One-dimensional basis with `panels = oversample * n_modes` quadrature
    /// panels. `oversample >= 4` keeps the discrete orthonormality exact.
    pub fn dirichlet_1d(n_modes: usize, oversample: usize) -> Result<Arc<Self>> {
        if n_modes == 0 {
            return Err(SimError::Config("n_modes must be positive".into()));
        }
        if oversample < 4 {
            return Err(SimError::Config(format!(
                "grid oversampling must be at least 4 (got {oversample})"
            )));
        }
        let panels = oversample * n_modes;
        let n_points = panels - 1;
        let h = 1.0 / panels as f64;
        let grid: Vec<f64> = (1..panels).map(|j| j as f64 * h).collect();
        let eigenvalues: Vec<f64> = (1..=n_modes).map(dirichlet_eigenvalue).collect();
        let sqrt2 = std::f64::consts::SQRT_2;
        let mut table = vec![0.0; n_modes * n_points];
        for n in 0..n_modes {
            let freq = (n + 1) as f64 * std::f64::consts::PI;
            let row = &mut table[n * n_points..(n + 1) * n_points];
            for (j, &x) in grid.iter().enumerate() {
                row[j] = sqrt2 * (freq * x).sin();
            }
        }
        Ok(Arc::new(Self {
            dim: 1,
            n_modes,
            panels,
            eigenvalues,
            grid,
            weight: h,
            table,
        }))
    }

    /// Default basis: 8x oversampled grid.
    pub fn standard(n_modes: usize) -> Result<Arc<Self>> {
        Self::dirichlet_1d(n_modes, 8)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn panels(&self) -> usize {
        self.panels
    }

    /// `lambda_n` for the 1-based mode `n`.
    pub fn eigenvalue(&self, n: usize) -> f64 {
        self.eigenvalues[n - 1]
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Uniform quadrature weight of the interior trapezoid rule.
    pub fn quad_weight(&self) -> f64 {
        self.weight
    }

    /// Tabulated values of `e_n` (1-based) on the grid.
    pub fn mode_row(&self, n: usize) -> &[f64] {
        let p = self.grid.len();
        &self.table[(n - 1) * p..n * p]
    }

    /// Evaluate `sum_n coeffs[n] e_{n+1}` on the grid.
    pub fn synthesize(&self, coeffs: &[f64], out: &mut [f64]) {
        debug_assert_eq!(coeffs.len(), self.n_modes);
        debug_assert_eq!(out.len(), self.grid.len());
        out.fill(0.0);
        let p = self.grid.len();
        for (n, &c) in coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let row = &self.table[n * p..(n + 1) * p];
            for (o, &e) in out.iter_mut().zip(row) {
                *o += c * e;
            }
        }
    }

    /// Quadrature projection of grid values onto the basis.
    pub fn project(&self, grid_values: &[f64], out: &mut [f64]) {
        debug_assert_eq!(grid_values.len(), self.grid.len());
        debug_assert_eq!(out.len(), self.n_modes);
        let p = self.grid.len();
        for (n, o) in out.iter_mut().enumerate() {
            let row = &self.table[n * p..(n + 1) * p];
            let mut acc = 0.0;
            for (&v, &e) in grid_values.iter().zip(row) {
                acc += v * e;
            }
            *o = acc * self.weight;
        }
    }

    /// Pointwise weighted sum `sum_n values[n] * e_{n+1}(xi_j)^2`, used for
    /// the pointwise marginal variance of product-Gaussian laws.
    pub fn synthesize_squared(&self, values: &[f64], out: &mut [f64]) {
        debug_assert_eq!(values.len(), self.n_modes);
        debug_assert_eq!(out.len(), self.grid.len());
        out.fill(0.0);
        let p = self.grid.len();
        for (n, &c) in values.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let row = &self.table[n * p..(n + 1) * p];
            for (o, &e) in out.iter_mut().zip(row) {
                *o += c * e * e;
            }
        }
    }

    pub fn same_basis(a: &Arc<Self>, b: &Arc<Self>) -> bool {
        Arc::ptr_eq(a, b) || (a.n_modes == b.n_modes && a.panels == b.panels && a.dim == b.dim)
    }
}

/// A slow or fast state expressed by its coefficients in the eigenbasis.
#[derive(Debug, Clone)]
pub struct SpectralField {
    basis: Arc<EigenBasis>,
    coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn zero(basis: &Arc<EigenBasis>) -> Self {
        Self {
            basis: Arc::clone(basis),
            coeffs: vec![0.0; basis.n_modes()],
        }
    }

    /// The eigenfunction `e_n` (1-based).
    pub fn unit_mode(basis: &Arc<EigenBasis>, n: usize) -> Self {
        let mut f = Self::zero(basis);
        f.coeffs[n - 1] = 1.0;
        f
    }

    pub fn from_coeffs(basis: &Arc<EigenBasis>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != basis.n_modes() {
            return Err(SimError::BasisMismatch(format!(
                "expected {} coefficients, got {}",
                basis.n_modes(),
                coeffs.len()
            )));
        }
        Ok(Self {
            basis: Arc::clone(basis),
            coeffs,
        })
    }

    pub fn basis(&self) -> &Arc<EigenBasis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, n: usize) -> f64 {
        self.coeffs[n - 1]
    }

    /// `e^{tA} x`: per-mode factor `exp(-lambda_n t)`.
    pub fn semigroup(&self, t: f64) -> Result<Self> {
        if t < 0.0 || !t.is_finite() {
            return Err(SimError::Domain(format!(
                "semigroup time must be nonnegative (got {t})"
            )));
        }
        let coeffs = self
            .coeffs
            .iter()
            .zip(self.basis.eigenvalues())
            .map(|(&c, &l)| c * (-l * t).exp())
            .collect();
        Ok(Self {
            basis: Arc::clone(&self.basis),
            coeffs,
        })
    }

    /// `(-A)^gamma x`: per-mode factor `lambda_n^gamma` (any real `gamma`).
    pub fn fractional_power(&self, gamma: f64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .zip(self.basis.eigenvalues())
            .map(|(&c, &l)| c * l.powf(gamma))
            .collect();
        Self {
            basis: Arc::clone(&self.basis),
            coeffs,
        }
    }

    /// `(I - hA)^{-1} x`: per-mode factor `1 / (1 + h lambda_n)`.
    ///
    /// `h = 0` is accepted and acts as the identity.
    pub fn resolvent(&self, h: f64) -> Result<Self> {
        if h < 0.0 || !h.is_finite() {
            return Err(SimError::Domain(format!(
                "resolvent step must be nonnegative (got {h})"
            )));
        }
        let coeffs = self
            .coeffs
            .iter()
            .zip(self.basis.eigenvalues())
            .map(|(&c, &l)| c / (1.0 + h * l))
            .collect();
        Ok(Self {
            basis: Arc::clone(&self.basis),
            coeffs,
        })
    }

    /// `L^2` norm via Parseval.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Quadrature `L^p` norm of `(-A)^gamma x` on the grid; `p` may be
    /// `f64::INFINITY` (grid maximum). Requires `p >= 2`.
    pub fn lp_norm(&self, p: f64, gamma: f64) -> Result<f64> {
        if p.is_nan() || p < 2.0 {
            return Err(SimError::Domain(format!(
                "L^p norm requires p >= 2 (got {p})"
            )));
        }
        let scaled = if gamma == 0.0 {
            self.clone()
        } else {
            self.fractional_power(gamma)
        };
        let mut grid = vec![0.0; self.basis.grid().len()];
        self.basis.synthesize(&scaled.coeffs, &mut grid);
        if p.is_infinite() {
            return Ok(grid.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        }
        let w = self.basis.quad_weight();
        let sum: f64 = grid.iter().map(|v| v.abs().powf(p)).sum();
        Ok((w * sum).powf(1.0 / p))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_basis(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self {
            basis: Arc::clone(&self.basis),
            coeffs,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_basis(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self {
            basis: Arc::clone(&self.basis),
            coeffs,
        })
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            basis: Arc::clone(&self.basis),
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.check_basis(other)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a * b)
            .sum())
    }

    pub fn check_basis(&self, other: &Self) -> Result<()> {
        if EigenBasis::same_basis(&self.basis, &other.basis) {
            Ok(())
        } else {
            Err(SimError::BasisMismatch(
                "fields live on different eigenbases".into(),
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seeded(seed: u64) -> impl FnMut() -> f64 {
        // small test-local generator, uniform in (-1, 1)
        let mut state = seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
        move || {
            state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
            z ^= z >> 31;
            (z >> 11) as f64 / (1u64 << 52) as f64 - 1.0
        }
    }

    fn random_field(basis: &Arc<EigenBasis>, seed: u64) -> SpectralField {
        let mut next = seeded(seed);
        let coeffs = (0..basis.n_modes()).map(|_| next()).collect();
        SpectralField::from_coeffs(basis, coeffs).unwrap()
    }

    /// Dense matrix exponential by scaling-and-squaring of the Taylor
    /// series; independent route for the semigroup oracle.
    fn dense_expm(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = a.len();
        let norm: f64 = a
            .iter()
            .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let squarings = (norm.log2().ceil().max(0.0)) as u32 + 4;
        let scale = 0.5f64.powi(squarings as i32);
        let scaled: Vec<Vec<f64>> = a
            .iter()
            .map(|row| row.iter().map(|v| v * scale).collect())
            .collect();
        let mut result: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let mut term = result.clone();
        for k in 1..30 {
            term = mat_mul(&term, &scaled);
            for row in term.iter_mut() {
                for v in row.iter_mut() {
                    *v /= k as f64;
                }
            }
            for i in 0..n {
                for j in 0..n {
                    result[i][j] += term[i][j];
                }
            }
        }
        for _ in 0..squarings {
            result = mat_mul(&result, &result);
        }
        result
    }

    fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = a.len();
        let mut c = vec![vec![0.0; n]; n];
        for i in 0..n {
            for k in 0..n {
                let aik = a[i][k];
                for j in 0..n {
                    c[i][j] += aik * b[k][j];
                }
            }
        }
        c
    }

    /// Dense Gaussian elimination, oracle for the resolvent.
    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                .unwrap();
            a.swap(col, pivot);
            b.swap(col, pivot);
            let d = a[col][col];
            for i in col + 1..n {
                let f = a[i][col] / d;
                for j in col..n {
                    a[i][j] -= f * a[col][j];
                }
                b[i] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut acc = b[i];
            for j in i + 1..n {
                acc -= a[i][j] * x[j];
            }
            x[i] = acc / a[i][i];
        }
        x
    }

    #[test]
    fn eigenvalues_are_dirichlet() {
        let basis = EigenBasis::standard(16).unwrap();
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        for n in 1..=16 {
            assert!((basis.eigenvalue(n) - pi2 * (n * n) as f64).abs() < 1e-9);
        }
        // lambda_n / n^2 -> pi^2 and the sequence is nondecreasing
        for n in 2..=16 {
            assert!(basis.eigenvalue(n) >= basis.eigenvalue(n - 1));
        }
    }

    #[test]
    fn discrete_orthonormality() {
        let basis = EigenBasis::dirichlet_1d(16, 4).unwrap();
        let w = basis.quad_weight();
        for m in 1..=16 {
            for n in 1..=16 {
                let dot: f64 = basis
                    .mode_row(m)
                    .iter()
                    .zip(basis.mode_row(n))
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    * w;
                let want = if m == n { 1.0 } else { 0.0 };
                assert!(
                    (dot - want).abs() < 1e-10,
                    "modes ({m},{n}): {dot} vs {want}"
                );
            }
        }
    }

    #[test]
    fn semigroup_identity_and_eigenvalue() {
        let basis = EigenBasis::standard(8).unwrap();
        let e1 = SpectralField::unit_mode(&basis, 1);
        let same = e1.semigroup(0.0).unwrap();
        assert_eq!(same.coeffs(), e1.coeffs());
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let decayed = e1.semigroup(1.0 / pi2).unwrap();
        assert!((decayed.coeff(1) - (-1.0f64).exp()).abs() < 1e-14);
        assert!(e1.semigroup(-0.1).is_err());
    }

    #[test]
    fn semigroup_matches_dense_matrix_exponential() {
        let n = 6;
        let basis = EigenBasis::standard(n).unwrap();
        let mut x = SpectralField::unit_mode(&basis, 1);
        x = x.add(&SpectralField::unit_mode(&basis, 2)).unwrap();
        let t = 0.1;
        let generator: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            -basis.eigenvalue(i + 1) * t
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        let expm = dense_expm(&generator);
        let mut want = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                want[i] += expm[i][j] * x.coeffs()[j];
            }
        }
        let got = x.semigroup(t).unwrap();
        for i in 0..n {
            assert!(
                (got.coeffs()[i] - want[i]).abs() < 1e-12,
                "mode {i}: {} vs {}",
                got.coeffs()[i],
                want[i]
            );
        }
        // the spelled-out expected values
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        assert!((got.coeff(1) - (-0.1 * pi2).exp()).abs() < 1e-12);
        assert!((got.coeff(2) - (-0.4 * pi2).exp()).abs() < 1e-12);
    }

    #[test]
    fn fractional_power_cases() {
        let basis = EigenBasis::standard(8).unwrap();
        let e1 = SpectralField::unit_mode(&basis, 1);
        assert_eq!(e1.fractional_power(0.0).coeffs(), e1.coeffs());
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        assert!((e1.fractional_power(1.0).coeff(1) - pi2).abs() < 1e-12);
        let e2 = SpectralField::unit_mode(&basis, 2);
        let half = e2.fractional_power(0.5);
        assert!((half.coeff(2) - 2.0 * std::f64::consts::PI).abs() < 1e-12);
        // two half-applications compose to the full power
        let twice = e2.fractional_power(0.25).fractional_power(0.25);
        assert!((twice.coeff(2) - half.coeff(2)).abs() < 1e-12);
        // inverse round-trip
        let x = random_field(&basis, 7);
        let back = x.fractional_power(0.37).fractional_power(-0.37);
        for (a, b) in back.coeffs().iter().zip(x.coeffs()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn resolvent_cases() {
        let basis = EigenBasis::standard(8).unwrap();
        let e1 = SpectralField::unit_mode(&basis, 1);
        assert_eq!(e1.resolvent(0.0).unwrap().coeffs(), e1.coeffs());
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        assert!((e1.resolvent(1.0 / pi2).unwrap().coeff(1) - 0.5).abs() < 1e-14);
        assert!(e1.resolvent(-0.01).is_err());
    }

    #[test]
    fn resolvent_matches_dense_solve() {
        let n = 8;
        let basis = EigenBasis::standard(n).unwrap();
        let x = random_field(&basis, 11);
        let h = 0.01;
        let a: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            1.0 + h * basis.eigenvalue(i + 1)
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        let want = dense_solve(a, x.coeffs().to_vec());
        let got = x.resolvent(h).unwrap();
        for i in 0..n {
            assert!((got.coeffs()[i] - want[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn lp_norm_cases() {
        let basis = EigenBasis::standard(8).unwrap();
        let e1 = SpectralField::unit_mode(&basis, 1);
        assert!((e1.lp_norm(2.0, 0.0).unwrap() - 1.0).abs() < 1e-8);
        assert!((e1.lp_norm(f64::INFINITY, 0.0).unwrap() - std::f64::consts::SQRT_2).abs() < 1e-6);
        assert!(e1.lp_norm(1.5, 0.0).is_err());
    }

    #[test]
    fn l4_norm_against_fine_trapezoid() {
        let basis = EigenBasis::standard(8).unwrap();
        let x = SpectralField::unit_mode(&basis, 1)
            .add(&SpectralField::unit_mode(&basis, 2))
            .unwrap();
        let got = x.lp_norm(4.0, 0.0).unwrap();
        // 10^6-point trapezoid reference computed directly from sines
        let m = 1_000_000usize;
        let h = 1.0 / m as f64;
        let sqrt2 = std::f64::consts::SQRT_2;
        let mut acc = 0.0;
        for j in 1..m {
            let xi = j as f64 * h;
            let v = sqrt2 * (std::f64::consts::PI * xi).sin()
                + sqrt2 * (2.0 * std::f64::consts::PI * xi).sin();
            acc += v.powi(4);
        }
        let want = (acc * h).powf(0.25);
        assert!((got - want).abs() < 1e-8, "{got} vs {want}");
    }

    #[test]
    fn parseval_on_random_fields() {
        let basis = EigenBasis::standard(24).unwrap();
        for seed in 0..5 {
            let x = random_field(&basis, seed);
            let quad = x.lp_norm(2.0, 0.0).unwrap();
            assert!((quad - x.l2_norm()).abs() < 1e-8);
        }
    }

    #[test]
    fn semigroup_composition_property() {
        let basis = EigenBasis::standard(16).unwrap();
        let x = random_field(&basis, 3);
        for &(s, t) in &[(0.0, 10.0), (0.25, 0.5), (1.0, 9.0), (3.0, 7.0)] {
            let a = x.semigroup(s).unwrap().semigroup(t).unwrap();
            let b = x.semigroup(s + t).unwrap();
            for (u, v) in a.coeffs().iter().zip(b.coeffs()) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn diagonal_operators_commute() {
        let basis = EigenBasis::standard(16).unwrap();
        let x = random_field(&basis, 5);
        let t = 0.07;
        let h = 0.02;
        let g = 0.4;
        let paths = [
            x.semigroup(t)
                .unwrap()
                .resolvent(h)
                .unwrap()
                .fractional_power(g),
            x.fractional_power(g)
                .semigroup(t)
                .unwrap()
                .resolvent(h)
                .unwrap(),
            x.resolvent(h)
                .unwrap()
                .fractional_power(g)
                .semigroup(t)
                .unwrap(),
        ];
        for p in &paths[1..] {
            for (u, v) in p.coeffs().iter().zip(paths[0].coeffs()) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn semigroup_smoothing_bound() {
        let basis = EigenBasis::standard(32).unwrap();
        for &gamma in &[0.25, 0.5, 1.0] {
            for &t in &[0.01, 0.1] {
                let bound = basis
                    .eigenvalues()
                    .iter()
                    .map(|&l| l.powf(gamma) * (-l * t).exp())
                    .fold(0.0f64, f64::max);
                for seed in 0..3 {
                    let x = random_field(&basis, 100 + seed);
                    let y = x.semigroup(t).unwrap().fractional_power(gamma);
                    assert!(y.l2_norm() <= bound * x.l2_norm() + 1e-12);
                }
            }
        }
    }

    #[test]
    fn contraction_in_spectral_norms() {
        let basis = EigenBasis::standard(16).unwrap();
        let x = random_field(&basis, 9);
        let y = x.semigroup(0.3).unwrap();
        assert!(y.l2_norm() <= x.l2_norm());
        let xg = x.fractional_power(0.5).l2_norm();
        let yg = y.fractional_power(0.5).l2_norm();
        assert!(yg <= xg);
    }
}
