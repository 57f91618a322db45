//! Convex step subproblem of the penalty SQP.
//!
//! ```text
//! minimize  0.5 d'Pd + g'd + sum_r w_r phi_r(a_r + A_r d)
//! subject to lower <= d <= upper
//! ```
//!
//! where `phi_r` is either a hinge `max(., 0)` or an absolute value. Each
//! penalty term becomes an epigraph variable `t_r` with two linear
//! inequalities, and the resulting QP is solved by a primal-dual
//! interior-point method. The epigraph variables and slacks are eliminated
//! from every Newton system, leaving a matrix with the band of `P`.

use super::banded::{BandedCholesky, BandedSym};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Penalty {
    Hinge,
    Abs,
}

impl Penalty {
    #[inline]
    pub fn value(self, v: f64) -> f64 {
        match self {
            Penalty::Hinge => v.max(0.0),
            Penalty::Abs => v.abs(),
        }
    }

    /// A subgradient, chosen as the one-sided derivative away from zero.
    #[inline]
    pub fn slope(self, v: f64) -> f64 {
        match self {
            Penalty::Hinge => {
                if v > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Penalty::Abs => v.signum(),
        }
    }
}

/// Sparse penalty rows in compressed form.
#[derive(Debug, Clone, Default)]
pub(crate) struct PenaltyRows {
    ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    pub offset: Vec<f64>,
    pub weight: Vec<f64>,
    pub kind: Vec<Penalty>,
}

impl PenaltyRows {
    pub fn new() -> Self {
        Self {
            ptr: vec![0],
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.offset.len()
    }

    pub fn push(
        &mut self,
        entries: impl IntoIterator<Item = (usize, f64)>,
        offset: f64,
        weight: f64,
        kind: Penalty,
    ) {
        for (c, v) in entries {
            if v != 0.0 {
                self.cols.push(c);
                self.vals.push(v);
            }
        }
        self.ptr.push(self.cols.len());
        self.offset.push(offset);
        self.weight.push(weight);
        self.kind.push(kind);
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.ptr[r], self.ptr[r + 1]);
        self.cols[s..e]
            .iter()
            .copied()
            .zip(self.vals[s..e].iter().copied())
    }

    #[inline]
    pub fn dot(&self, r: usize, x: &[f64]) -> f64 {
        self.row(r).map(|(c, v)| v * x[c]).sum()
    }

    /// Adds `sum_r scale_r * A_r' A_r` into the band.
    fn add_weighted_gram(&self, m: &mut BandedSym, scale: &[f64]) {
        for r in 0..self.len() {
            if scale[r] == 0.0 {
                continue;
            }
            let (s, e) = (self.ptr[r], self.ptr[r + 1]);
            for i in s..e {
                for k in s..=i {
                    let (ci, ck) = (self.cols[i], self.cols[k]);
                    let v = scale[r] * self.vals[i] * self.vals[k];
                    if ci == ck && i != k {
                        m.add(ci, ck, 2.0 * v);
                    } else {
                        m.add(ci, ck, v);
                    }
                }
            }
        }
    }

    /// `out += scale * A' y`
    fn add_transpose_mul(&self, y: &[f64], scale: f64, out: &mut [f64]) {
        for (r, yr) in y.iter().enumerate() {
            if *yr == 0.0 {
                continue;
            }
            for (c, v) in self.row(r) {
                out[c] += scale * v * yr;
            }
        }
    }

    /// `sum_r w_r phi_r(a_r + A_r d)`
    pub fn penalty(&self, d: &[f64]) -> f64 {
        (0..self.len())
            .map(|r| self.weight[r] * self.kind[r].value(self.offset[r] + self.dot(r, d)))
            .sum()
    }
}

pub(crate) struct StepProblem<'a> {
    pub hessian: &'a BandedSym,
    pub gradient: &'a [f64],
    pub rows: &'a PenaltyRows,
    pub lower: &'a [f64],
    pub upper: &'a [f64],
}

impl StepProblem<'_> {
    /// Model change relative to `d = 0`.
    pub fn model_delta(&self, d: &[f64]) -> f64 {
        let lin: f64 = self.gradient.iter().zip(d).map(|(g, x)| g * x).sum();
        let zero = PenaltyRows::penalty(self.rows, &vec![0.0; d.len()]);
        self.hessian.half_quad(d) + lin + self.rows.penalty(d) - zero
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct IpmSettings {
    pub max_iters: usize,
    /// Target mean complementarity.
    pub tol: f64,
    /// Target primal and dual residuals, relative to the data scale.
    pub feas_tol: f64,
}

impl Default for IpmSettings {
    fn default() -> Self {
        Self {
            max_iters: 60,
            tol: 1e-10,
            feas_tol: 1e-9,
        }
    }
}

/// Coefficient of `a_r + A_r d` in the two epigraph inequalities
/// `sigma * (a_r + A_r d) - t_r <= 0` of a row.
#[inline]
fn signs(kind: Penalty) -> [f64; 2] {
    match kind {
        Penalty::Hinge => [1.0, 0.0],
        Penalty::Abs => [1.0, -1.0],
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Largest `alpha <= 1` keeping `v + alpha * dv` nonnegative.
fn max_step(v: &[f64], dv: &[f64]) -> f64 {
    v.iter()
        .zip(dv)
        .filter(|(_, d)| **d < 0.0)
        .map(|(x, d)| -x / d)
        .fold(1.0, f64::min)
}

struct Direction {
    d: Vec<f64>,
    t: Vec<f64>,
    lam: Vec<f64>,
    s: Vec<f64>,
}

/// Interior-point iterate. Constraints are laid out as two per penalty row
/// (`2r`, `2r + 1`) followed by upper and lower bounds per variable.
struct Ipm<'p, 'a> {
    p: &'p StepProblem<'a>,
    n: usize,
    m: usize,
    d: Vec<f64>,
    t: Vec<f64>,
    s: Vec<f64>,
    lam: Vec<f64>,
    // A_r d, cached per iterate
    ad: Vec<f64>,
}

impl<'p, 'a> Ipm<'p, 'a> {
    fn new(p: &'p StepProblem<'a>) -> Self {
        let n = p.hessian.dim();
        let m = p.rows.len();
        let d = vec![0.0; n];
        let t: Vec<f64> = (0..m)
            .map(|r| p.rows.kind[r].value(p.rows.offset[r]) + 1.0)
            .collect();
        let mut ipm = Self {
            p,
            n,
            m,
            d,
            t,
            s: vec![0.0; 2 * m + 2 * n],
            lam: vec![0.0; 2 * m + 2 * n],
            ad: vec![0.0; m],
        };
        let c = ipm.constraints();
        let box_scale = inf_norm(p.gradient).max(1.0);
        for (k, ck) in c.iter().enumerate() {
            ipm.s[k] = (-ck).max(1e-1);
            ipm.lam[k] = if k < 2 * m {
                0.5 * p.rows.weight[k / 2]
            } else {
                box_scale
            };
        }
        ipm
    }

    fn constraints(&mut self) -> Vec<f64> {
        let (n, m) = (self.n, self.m);
        let rows = self.p.rows;
        let mut c = vec![0.0; 2 * m + 2 * n];
        for r in 0..m {
            self.ad[r] = rows.dot(r, &self.d);
            let v = rows.offset[r] + self.ad[r];
            let sig = signs(rows.kind[r]);
            c[2 * r] = sig[0] * v - self.t[r];
            c[2 * r + 1] = sig[1] * v - self.t[r];
        }
        for i in 0..n {
            c[2 * m + 2 * i] = self.d[i] - self.p.upper[i];
            c[2 * m + 2 * i + 1] = self.p.lower[i] - self.d[i];
        }
        c
    }

    /// Returns `(r_d, r_t, r_p)`.
    fn residuals(&mut self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (n, m) = (self.n, self.m);
        let rows = self.p.rows;
        let c = self.constraints();
        let mut rd = vec![0.0; n];
        self.p.hessian.mul_vec(&self.d, &mut rd);
        for i in 0..n {
            rd[i] += self.p.gradient[i] + self.lam[2 * m + 2 * i] - self.lam[2 * m + 2 * i + 1];
        }
        let mut y = vec![0.0; m];
        for r in 0..m {
            let sig = signs(rows.kind[r]);
            y[r] = sig[0] * self.lam[2 * r] + sig[1] * self.lam[2 * r + 1];
        }
        rows.add_transpose_mul(&y, 1.0, &mut rd);
        let rt = (0..m)
            .map(|r| rows.weight[r] - self.lam[2 * r] - self.lam[2 * r + 1])
            .collect();
        let rp = c.iter().zip(&self.s).map(|(c, s)| c + s).collect();
        (rd, rt, rp)
    }

    fn factor(&self) -> Option<BandedCholesky> {
        let (n, m) = (self.n, self.m);
        let rows = self.p.rows;
        let mut mat = self.p.hessian.clone();
        let w: Vec<f64> = self.lam.iter().zip(&self.s).map(|(l, s)| l / s).collect();
        let kappa: Vec<f64> = (0..m)
            .map(|r| {
                let sig = signs(rows.kind[r]);
                let (w1, w2) = (w[2 * r], w[2 * r + 1]);
                let omega = w1 + w2;
                let beta = sig[0] * w1 + sig[1] * w2;
                let gamma = sig[0] * sig[0] * w1 + sig[1] * sig[1] * w2;
                // gamma - beta^2 / omega, written to stay nonnegative
                match rows.kind[r] {
                    Penalty::Hinge => w1 * w2 / omega,
                    Penalty::Abs => (gamma * omega - beta * beta).max(0.0) / omega,
                }
            })
            .collect();
        rows.add_weighted_gram(&mut mat, &kappa);
        for i in 0..n {
            let v = w[2 * m + 2 * i] + w[2 * m + 2 * i + 1];
            mat.add(i, i, v);
        }
        mat.cholesky()
    }

    fn direction(
        &self,
        chol: &BandedCholesky,
        rd: &[f64],
        rt: &[f64],
        rp: &[f64],
        rc: &[f64],
    ) -> Direction {
        let (n, m) = (self.n, self.m);
        let rows = self.p.rows;
        let nc = 2 * m + 2 * n;
        let w: Vec<f64> = self.lam.iter().zip(&self.s).map(|(l, s)| l / s).collect();
        let e: Vec<f64> = (0..nc).map(|k| w[k] * rp[k] - rc[k] / self.s[k]).collect();

        let mut rhs: Vec<f64> = rd.iter().map(|v| -v).collect();
        let mut y = vec![0.0; m];
        let mut coef = vec![0.0; m];
        for r in 0..m {
            let sig = signs(rows.kind[r]);
            let (w1, w2) = (w[2 * r], w[2 * r + 1]);
            let omega = w1 + w2;
            let beta = sig[0] * w1 + sig[1] * w2;
            let big_e = e[2 * r] + e[2 * r + 1];
            coef[r] = (big_e - rt[r]) / omega;
            y[r] = sig[0] * e[2 * r] + sig[1] * e[2 * r + 1] - beta * coef[r];
        }
        rows.add_transpose_mul(&y, -1.0, &mut rhs);
        for i in 0..n {
            rhs[i] -= e[2 * m + 2 * i] - e[2 * m + 2 * i + 1];
        }
        chol.solve_in_place(&mut rhs);
        let dd = rhs;

        let mut dt = vec![0.0; m];
        let mut dlam = vec![0.0; nc];
        for r in 0..m {
            let sig = signs(rows.kind[r]);
            let (w1, w2) = (w[2 * r], w[2 * r + 1]);
            let beta = sig[0] * w1 + sig[1] * w2;
            let a_dd = rows.dot(r, &dd);
            dt[r] = beta * a_dd / (w1 + w2) + coef[r];
            for k in 0..2 {
                let idx = 2 * r + k;
                dlam[idx] = w[idx] * (sig[k] * a_dd - dt[r]) + e[idx];
            }
        }
        for i in 0..n {
            let (u, l) = (2 * m + 2 * i, 2 * m + 2 * i + 1);
            dlam[u] = w[u] * dd[i] + e[u];
            dlam[l] = -w[l] * dd[i] + e[l];
        }
        let ds = (0..nc)
            .map(|k| (-rc[k] - self.s[k] * dlam[k]) / self.lam[k])
            .collect();
        Direction {
            d: dd,
            t: dt,
            lam: dlam,
            s: ds,
        }
    }

    fn take(&mut self, dir: &Direction, alpha: f64) {
        let axpy =
            |x: &mut [f64], dx: &[f64]| x.iter_mut().zip(dx).for_each(|(a, b)| *a += alpha * b);
        axpy(&mut self.d, &dir.d);
        axpy(&mut self.t, &dir.t);
        axpy(&mut self.s, &dir.s);
        axpy(&mut self.lam, &dir.lam);
    }
}

/// Returns a box-feasible step, or `None` if the iteration diverged.
pub(crate) fn solve(p: &StepProblem, settings: &IpmSettings) -> Option<Vec<f64>> {
    let mut ipm = Ipm::new(p);
    let nc = ipm.s.len();
    let dual_scale = 1.0 + inf_norm(p.gradient) + inf_norm(&p.rows.weight);
    let primal_scale = 1.0 + inf_norm(&p.rows.offset);
    for _ in 0..settings.max_iters {
        let (rd, rt, rp) = ipm.residuals();
        let mu = ipm.s.iter().zip(&ipm.lam).map(|(s, l)| s * l).sum::<f64>() / nc as f64;
        if mu <= settings.tol
            && inf_norm(&rp) <= settings.feas_tol * primal_scale
            && inf_norm(&rd).max(inf_norm(&rt)) <= settings.feas_tol * dual_scale
        {
            break;
        }
        // Near convergence the barrier weights can span enough magnitudes
        // to break the factorization; the iterate is then as good as it gets.
        let Some(chol) = ipm.factor() else {
            break;
        };

        let rc: Vec<f64> = ipm.s.iter().zip(&ipm.lam).map(|(s, l)| s * l).collect();
        let aff = ipm.direction(&chol, &rd, &rt, &rp, &rc);
        let alpha = max_step(&ipm.s, &aff.s).min(max_step(&ipm.lam, &aff.lam));
        let mu_aff = (0..nc)
            .map(|k| (ipm.s[k] + alpha * aff.s[k]) * (ipm.lam[k] + alpha * aff.lam[k]))
            .sum::<f64>()
            / nc as f64;
        let sigma = (mu_aff / mu).powi(3).min(1.0);

        let rc: Vec<f64> = (0..nc)
            .map(|k| ipm.s[k] * ipm.lam[k] + aff.s[k] * aff.lam[k] - sigma * mu)
            .collect();
        let dir = ipm.direction(&chol, &rd, &rt, &rp, &rc);
        let alpha = (0.99 * max_step(&ipm.s, &dir.s).min(max_step(&ipm.lam, &dir.lam))).min(1.0);
        ipm.take(&dir, alpha);
        if ipm.d.iter().any(|v| !v.is_finite()) {
            return None;
        }
    }
    Some(
        (0..ipm.n)
            .map(|i| ipm.d[i].clamp(p.lower[i], p.upper[i]))
            .collect(),
    )
}
