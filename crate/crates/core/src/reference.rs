//! Reference DtN maps computed without symbol calculus: the exact
//! constant-coefficient half-space and a numerically integrated layered
//! medium whose coefficients depend on depth only.
//!
//! A boundary mode `u = v(x_n) exp(i x'.xi)` solves the first-order system
//!
//! ```text
//! v_a' = s_a/mu - i xi_a v_n
//! v_n' = (s_n - i lambda xi.v') / (lambda + 2mu)
//! s_a' = -i lambda xi_a div + mu (|xi|^2 v_a + xi_a xi.v')
//! s_n' = -i xi.s'
//! ```
//!
//! with `s = sigma e_n` and `div = (2 i mu xi.v' + s_n) / (lambda + 2mu)`.
//! The interior is `x_n > 0` and the outward normal `-e_n`, so the DtN
//! matrix is `-S V^{-1}` on the decaying solution space.

use nalgebra::DMatrix;
use num_complex::Complex64;
use ode_solvers::{DVector, Dopri5, OutputType, System};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{DtnError, Result};
use crate::geometry::Polynomial;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// DtN matrix for one covector.
#[derive(Debug, Clone)]
pub struct DtNSample {
    pub xi: Vec<f64>,
    pub dtn: DMatrix<Complex64>,
}

fn xi_norm(xi: &[f64]) -> Result<f64> {
    let k = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
    if k == 0.0 || !k.is_finite() {
        return Err(DtnError::InvalidInput(format!(
            "covector {xi:?} must be nonzero"
        )));
    }
    Ok(k)
}

fn check_lame(lam: f64, mu: f64) -> Result<()> {
    if !(mu > 0.0) || lam + mu < -1e-12 * mu {
        return Err(DtnError::Inadmissible(format!("lambda = {lam}, mu = {mu}")));
    }
    Ok(())
}

/// Generator of the mode system in the variables `(v, s/|xi|)`, where all
/// entries are `O(|xi|)`.
pub fn mode_matrix(lam: f64, mu: f64, xi: &[f64]) -> DMatrix<Complex64> {
    let m = xi.len();
    let n = m + 1;
    let k = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
    let l2m = lam + 2.0 * mu;
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for col in 0..2 * n {
        let mut y = vec![Complex64::new(0.0, 0.0); 2 * n];
        y[col] = Complex64::new(1.0, 0.0);
        let (v, s) = y.split_at(n);
        let xi_v: Complex64 = (0..m).map(|b| v[b] * xi[b]).sum();
        let xi_s: Complex64 = (0..m).map(|b| s[b] * xi[b]).sum();
        let sn = s[m] * k;
        let div = (I * xi_v * 2.0 * mu + sn) / l2m;
        for a in 0..m {
            out[(a, col)] = s[a] * k / mu - I * xi[a] * v[m];
            out[(n + a, col)] = (-I * lam * xi[a] * div + (v[a] * k * k + xi_v * xi[a]) * mu) / k;
        }
        out[(m, col)] = (sn - I * lam * xi_v) / l2m;
        out[(n + m, col)] = -I * xi_s;
    }
    out
}

/// Basis `[V; S/|xi|]` of decaying constant-coefficient solutions at `x_n = 0`,
/// the null space of `(M/|xi| + I)^2`.
pub fn decaying_basis(lam: f64, mu: f64, xi: &[f64]) -> Result<DMatrix<Complex64>> {
    let k = xi_norm(xi)?;
    let n = xi.len() + 1;
    let a = mode_matrix(lam, mu, xi) / Complex64::new(k, 0.0)
        + DMatrix::<Complex64>::identity(2 * n, 2 * n);
    let sq = &a * &a;
    let svd = sq.svd(false, true);
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));
    let top = sv[order[0]];
    let (kept_min, null_max) = (sv[order[n - 1]], sv[order[n]]);
    if null_max > 1e-10 * top || kept_min < 1e-6 * top {
        return Err(DtnError::DegenerateBasis(format!(
            "decaying subspace not separated: singular values {kept_min:e} / {null_max:e} (scale {top:e})"
        )));
    }
    let vt = svd.v_t.expect("requested right singular vectors");
    let mut basis = DMatrix::zeros(2 * n, n);
    for (c, &row) in order[n..].iter().enumerate() {
        for r in 0..2 * n {
            basis[(r, c)] = vt[(row, r)].conj();
        }
    }
    Ok(basis)
}

/// `-|xi| S V^{-1}` from a basis in scaled variables.
fn dtn_from_basis(basis: &DMatrix<Complex64>, k: f64) -> Result<DMatrix<Complex64>> {
    let n = basis.ncols();
    let v = basis.rows(0, n).into_owned();
    let s = basis.rows(n, n).into_owned();
    let v_inv = v.try_inverse().ok_or_else(|| {
        DtnError::DegenerateBasis("boundary displacement block is singular".into())
    })?;
    Ok(-(s * v_inv) * Complex64::new(k, 0.0))
}

/// Exact DtN matrix of the homogeneous half-space.
pub fn halfspace_dtn(lam: f64, mu: f64, xi: &[f64]) -> Result<DtNSample> {
    check_lame(lam, mu)?;
    let k = xi_norm(xi)?;
    let basis = decaying_basis(lam, mu, xi)?;
    Ok(DtNSample {
        xi: xi.to_vec(),
        dtn: dtn_from_basis(&basis, k)?,
    })
}

/// Depth profile `deep + delta (1 - x/depth)^power` for `x < depth`,
/// constant `deep` below.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampProfile {
    pub deep: f64,
    pub delta: f64,
    pub depth: f64,
    pub power: u32,
}

impl RampProfile {
    pub fn constant(value: f64) -> RampProfile {
        RampProfile {
            deep: value,
            delta: 0.0,
            depth: 1.0,
            power: 1,
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        if x >= self.depth {
            self.deep
        } else {
            self.deep + self.delta * (1.0 - x / self.depth).powi(self.power as i32)
        }
    }

    pub fn surface(&self) -> f64 {
        self.deep + self.delta
    }

    /// The ramp as a polynomial in `x_n`, exact on `[0, depth]`.
    pub fn to_polynomial(&self, dim: usize) -> Polynomial {
        let mut p = Polynomial::constant(self.deep, dim);
        let mut binom = 1.0;
        for j in 0..=self.power {
            if j > 0 {
                binom *= f64::from(self.power - j + 1) / f64::from(j);
            }
            let c = self.delta * binom * (-1.0 / self.depth).powi(j as i32);
            let mut powers = vec![0u8; dim];
            powers[dim - 1] = j as u8;
            p.push(powers, c);
        }
        p
    }
}

/// Medium whose coefficients vary with depth only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayeredMedium {
    pub lam: RampProfile,
    pub mu: RampProfile,
}

impl LayeredMedium {
    /// Depth below which both coefficients are constant.
    pub fn depth(&self) -> f64 {
        self.lam.depth.max(self.mu.depth)
    }

    /// Checks admissibility on a depth grid that includes both ramp ends.
    pub fn validate(&self) -> Result<()> {
        for p in [&self.lam, &self.mu] {
            if !(p.depth > 0.0) || p.power == 0 {
                return Err(DtnError::InvalidInput(format!("bad ramp profile {p:?}")));
            }
        }
        let depth = self.depth();
        let grid = (0..=256).map(|i| depth * f64::from(i) / 256.0);
        for x in grid.chain([self.lam.depth, self.mu.depth]) {
            check_lame(self.lam.value(x), self.mu.value(x))?;
        }
        Ok(())
    }
}

/// Tolerances for the layered solve.
#[derive(Debug, Clone, Copy)]
pub struct IntegrationOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: u32,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        IntegrationOptions {
            rtol: 1e-12,
            atol: 1e-13,
            max_steps: 2_000_000,
        }
    }
}

/// `W' = (M(x) + |xi| I) W` for `W = exp(|xi|(x - L)) Y`, packed as real
/// and imaginary parts of the column-major `2n x n` matrix.
struct ModeSystem {
    medium: LayeredMedium,
    xi: Vec<f64>,
    k: f64,
    n: usize,
}

impl ModeSystem {
    fn unpack(&self, y: &DVector<f64>) -> DMatrix<Complex64> {
        let rows = 2 * self.n;
        DMatrix::from_fn(rows, self.n, |r, c| {
            let i = 2 * (c * rows + r);
            Complex64::new(y[i], y[i + 1])
        })
    }

    fn pack(&self, w: &DMatrix<Complex64>) -> DVector<f64> {
        let rows = 2 * self.n;
        let mut y = DVector::zeros(2 * rows * self.n);
        for c in 0..self.n {
            for r in 0..rows {
                let i = 2 * (c * rows + r);
                y[i] = w[(r, c)].re;
                y[i + 1] = w[(r, c)].im;
            }
        }
        y
    }
}

impl System<f64, DVector<f64>> for ModeSystem {
    fn system(&self, x: f64, y: &DVector<f64>, dy: &mut DVector<f64>) {
        let m = mode_matrix(self.medium.lam.value(x), self.medium.mu.value(x), &self.xi);
        let w = self.unpack(y);
        let dw = m * &w + w * Complex64::new(self.k, 0.0);
        dy.copy_from(&self.pack(&dw));
    }
}

/// DtN matrix of a layered medium, integrated from the matching depth up to
/// the surface with adaptive Dormand-Prince 5(4).
pub fn layered_dtn(
    medium: &LayeredMedium,
    xi: &[f64],
    opts: &IntegrationOptions,
) -> Result<DtNSample> {
    medium.validate()?;
    let k = xi_norm(xi)?;
    let depth = medium.depth();
    let start = decaying_basis(medium.lam.deep, medium.mu.deep, xi)?;
    let sys = ModeSystem {
        medium: *medium,
        xi: xi.to_vec(),
        k,
        n: xi.len() + 1,
    };
    let y0 = sys.pack(&start);
    let mut stepper = Dopri5::from_param(
        sys,
        depth,
        0.0,
        depth,
        y0,
        opts.rtol,
        opts.atol,
        0.9,
        0.04,
        0.2,
        10.0,
        depth,
        0.0,
        opts.max_steps,
        u32::MAX,
        OutputType::Sparse,
    );
    stepper.integrate().map_err(|e| DtnError::Integration {
        xi_norm: k,
        reason: e.to_string(),
    })?;
    let end = stepper
        .y_out()
        .last()
        .ok_or_else(|| DtnError::Integration {
            xi_norm: k,
            reason: "no output".into(),
        })?
        .clone();
    let n = xi.len() + 1;
    let probe = ModeSystem {
        medium: *medium,
        xi: xi.to_vec(),
        k,
        n,
    };
    let w = probe.unpack(&end);
    if w.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(DtnError::Integration {
            xi_norm: k,
            reason: "non-finite state".into(),
        });
    }
    Ok(DtNSample {
        xi: xi.to_vec(),
        dtn: dtn_from_basis(&w, k)?,
    })
}

/// Least-squares fit of `log(error)` against `log|xi'|`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DecayFit {
    /// `-inf` when every error is at or below the floor.
    pub slope: f64,
    pub intercept: f64,
    /// 95% confidence interval of the slope.
    pub ci_low: f64,
    pub ci_high: f64,
    pub samples: usize,
}

impl DecayFit {
    pub fn is_exact(&self) -> bool {
        self.slope == f64::NEG_INFINITY
    }
}

/// Fits the log-log decay slope of `(|xi'|, error)` samples. Errors at or
/// below `floor` count as exact agreement.
pub fn fit_decay_slope(samples: &[(f64, f64)], floor: f64) -> Result<DecayFit> {
    let n = samples.len();
    if n < 5 {
        return Err(DtnError::InsufficientSamples(format!(
            "{n} samples, at least 5 needed"
        )));
    }
    if samples.iter().any(|&(x, e)| !(x > 0.0) || !(e >= 0.0)) {
        return Err(DtnError::InvalidInput(
            "frequencies must be positive and errors nonnegative".into(),
        ));
    }
    let exact = samples.iter().filter(|s| s.1 <= floor).count();
    if exact == n {
        return Ok(DecayFit {
            slope: f64::NEG_INFINITY,
            intercept: f64::NEG_INFINITY,
            ci_low: f64::NEG_INFINITY,
            ci_high: f64::NEG_INFINITY,
            samples: n,
        });
    }
    if exact > 0 {
        return Err(DtnError::InvalidInput(format!(
            "{exact} of {n} errors are at the floor {floor:e}; slope undefined"
        )));
    }
    let pts: Vec<(f64, f64)> = samples.iter().map(|&(x, e)| (x.ln(), e.ln())).collect();
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(DtnError::InsufficientSamples(
            "all frequencies coincide".into(),
        ));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let se = (sse / (nf - 2.0) / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, nf - 2.0)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    Ok(DecayFit {
        slope,
        intercept,
        ci_low: slope - t * se,
        ci_high: slope + t * se,
        samples: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halfspace_example() {
        let d = halfspace_dtn(1.0, 1.0, &[1.0]).unwrap().dtn;
        let want = [[1.5, 0.0, 0.0, -0.5], [0.0, 0.5, 1.5, 0.0]];
        for r in 0..2 {
            for c in 0..2 {
                let w = Complex64::new(want[r][2 * c], want[r][2 * c + 1]);
                assert!((d[(r, c)] - w).norm() < 1e-12, "{d}");
            }
        }
        let d2 = halfspace_dtn(1.0, 1.0, &[2.0]).unwrap().dtn;
        assert!((d2 - d * Complex64::new(2.0, 0.0)).camax() < 1e-12);
    }

    #[test]
    fn constant_layered_matches_halfspace() {
        let medium = LayeredMedium {
            lam: RampProfile::constant(0.7),
            mu: RampProfile::constant(1.3),
        };
        for xi in [[3.0, 0.0], [0.5, -2.0]] {
            let a = layered_dtn(&medium, &xi, &IntegrationOptions::default()).unwrap();
            let b = halfspace_dtn(0.7, 1.3, &xi).unwrap();
            assert!((a.dtn - b.dtn).camax() < 1e-9);
        }
    }

    #[test]
    fn ramp_polynomial_matches_profile() {
        let p = RampProfile {
            deep: 1.0,
            delta: 0.5,
            depth: 2.0,
            power: 4,
        };
        let poly = p.to_polynomial(2);
        for x in [0.0f64, 0.3, 1.1, 1.9] {
            let v: f64 = poly
                .terms
                .iter()
                .map(|t| t.coeff * x.powi(i32::from(t.powers[1])))
                .sum();
            assert!((v - p.value(x)).abs() < 1e-14);
        }
    }

    #[test]
    fn decay_slope_of_synthetic_data() {
        let pow: Vec<(f64, f64)> = (3..9)
            .map(|j| {
                let x = 2f64.powi(j);
                (x, 5.0 * x.powi(-2))
            })
            .collect();
        let fit = fit_decay_slope(&pow, 0.0).unwrap();
        assert!((fit.slope + 2.0).abs() < 1e-12);
        assert!(fit.ci_high - fit.ci_low < 1e-10);
        let flat: Vec<(f64, f64)> = pow.iter().map(|&(x, _)| (x, 0.3)).collect();
        assert!(fit_decay_slope(&flat, 0.0).unwrap().slope.abs() < 1e-12);
        let zero: Vec<(f64, f64)> = pow.iter().map(|&(x, _)| (x, 1e-17)).collect();
        assert!(fit_decay_slope(&zero, 1e-14).unwrap().is_exact());
        assert!(matches!(
            fit_decay_slope(&pow[..4], 0.0),
            Err(DtnError::InsufficientSamples(_))
        ));
    }
}
