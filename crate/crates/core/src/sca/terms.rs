//! Constraint and objective oracles of the convex subproblem.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::layout::{real_projections, Layout};
use crate::convex::SmoothFn;
use crate::error::{Error, Result};

/// `0.5 x_S' Q x_S + c' x_S + r` on a coordinate subset `S`.
#[derive(Debug, Clone)]
pub struct SparseQuadratic {
    idx: Vec<usize>,
    q: DMatrix<f64>,
    c: Vec<f64>,
    r: f64,
}

impl SparseQuadratic {
    pub fn new(idx: Vec<usize>) -> Self {
        let m = idx.len();
        Self { idx, q: DMatrix::zeros(m, m), c: vec![0.0; m], r: 0.0 }
    }

    fn local(&self, global: usize) -> usize {
        self.idx.iter().position(|&i| i == global).expect("index in support")
    }

    pub fn add_linear(&mut self, global: usize, coef: f64) {
        let l = self.local(global);
        self.c[l] += coef;
    }

    pub fn add_constant(&mut self, r: f64) {
        self.r += r;
    }

    /// Adds `coef * x_i * x_j` (symmetric placement).
    pub fn add_product(&mut self, i: usize, j: usize, coef: f64) {
        let (a, b) = (self.local(i), self.local(j));
        if a == b {
            self.q[(a, a)] += 2.0 * coef;
        } else {
            self.q[(a, b)] += coef;
            self.q[(b, a)] += coef;
        }
    }

    /// Adds `coef * |h^H u|^2` for the beam starting at `beam`.
    pub fn add_gain(&mut self, h: &[Complex64], beam: usize, coef: f64) {
        let (p, q) = real_projections(h);
        let base = self.local(beam);
        let n = p.len();
        debug_assert_eq!(self.idx[base + n - 1], beam + n - 1);
        for a in 0..n {
            for b in 0..n {
                self.q[(base + a, base + b)] += 2.0 * coef * (p[a] * p[b] + q[a] * q[b]);
            }
        }
    }

    /// Adds `coef * Re(conj(z) h^H u)` for the beam starting at `beam`.
    pub fn add_real_part(&mut self, h: &[Complex64], beam: usize, z: Complex64, coef: f64) {
        let (p, q) = real_projections(h);
        let base = self.local(beam);
        for a in 0..p.len() {
            self.c[base + a] += coef * (z.re * p[a] + z.im * q[a]);
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.q *= s;
        for c in &mut self.c {
            *c *= s;
        }
        self.r *= s;
    }
}

impl SmoothFn for SparseQuadratic {
    fn value(&self, x: &[f64]) -> f64 {
        let mut v = self.r;
        for (a, &i) in self.idx.iter().enumerate() {
            let mut qa = 0.0;
            for (b, &j) in self.idx.iter().enumerate() {
                qa += self.q[(a, b)] * x[j];
            }
            v += x[i] * (0.5 * qa + self.c[a]);
        }
        v
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (a, &i) in self.idx.iter().enumerate() {
            let mut g = self.c[a];
            for (b, &j) in self.idx.iter().enumerate() {
                g += self.q[(a, b)] * x[j];
            }
            out[i] = g;
        }
    }

    fn add_hessian(&self, _x: &[f64], scale: f64, h: &mut DMatrix<f64>) {
        for (a, &i) in self.idx.iter().enumerate() {
            for (b, &j) in self.idx.iter().enumerate() {
                h[(i, j)] += scale * self.q[(a, b)];
            }
        }
    }

    fn support(&self) -> Option<&[usize]> {
        Some(&self.idx)
    }
}

/// `scale * (sum_i x_i - log2(1 + x_s))` over rate coordinates `i`.
#[derive(Debug, Clone)]
pub struct RateBound {
    idx: Vec<usize>,
    n_lin: usize,
    scale: f64,
}

impl RateBound {
    pub fn new(rates: Vec<usize>, slack: usize, scale: f64) -> Self {
        let n_lin = rates.len();
        let mut idx = rates;
        idx.push(slack);
        Self { idx, n_lin, scale }
    }
}

impl SmoothFn for RateBound {
    fn value(&self, x: &[f64]) -> f64 {
        let lin: f64 = self.idx[..self.n_lin].iter().map(|&i| x[i]).sum();
        let s = x[self.idx[self.n_lin]];
        self.scale * (lin - s.ln_1p() / std::f64::consts::LN_2)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for &i in &self.idx[..self.n_lin] {
            out[i] = self.scale;
        }
        let s = self.idx[self.n_lin];
        out[s] = -self.scale / ((1.0 + x[s]) * std::f64::consts::LN_2);
    }

    fn add_hessian(&self, x: &[f64], scale: f64, h: &mut DMatrix<f64>) {
        let s = self.idx[self.n_lin];
        h[(s, s)] += scale * self.scale / ((1.0 + x[s]).powi(2) * std::f64::consts::LN_2);
    }

    fn support(&self) -> Option<&[usize]> {
        Some(&self.idx)
    }
}

/// `sum_t c_t ||x_{U_t}||^2 / sum_{i in D_t} x_i`: transmit energy of each
/// stream as power times airtime.
#[derive(Debug, Clone, Default)]
pub struct TransmitEnergy {
    terms: Vec<(std::ops::Range<usize>, Vec<usize>, f64)>,
}

impl TransmitEnergy {
    pub fn push(&mut self, beam: std::ops::Range<usize>, rates: Vec<usize>, coef: f64) {
        self.terms.push((beam, rates, coef));
    }
}

impl SmoothFn for TransmitEnergy {
    fn value(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(u, d, c)| {
                let n2: f64 = x[u.clone()].iter().map(|v| v * v).sum();
                let s: f64 = d.iter().map(|&i| x[i]).sum();
                c * n2 / s
            })
            .sum()
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (u, d, c) in &self.terms {
            let n2: f64 = x[u.clone()].iter().map(|v| v * v).sum();
            let s: f64 = d.iter().map(|&i| x[i]).sum();
            for i in u.clone() {
                out[i] += 2.0 * c * x[i] / s;
            }
            for &i in d {
                out[i] -= c * n2 / (s * s);
            }
        }
    }

    fn add_hessian(&self, x: &[f64], scale: f64, h: &mut DMatrix<f64>) {
        for (u, d, c) in &self.terms {
            let c = c * scale;
            let n2: f64 = x[u.clone()].iter().map(|v| v * v).sum();
            let s: f64 = d.iter().map(|&i| x[i]).sum();
            for i in u.clone() {
                h[(i, i)] += 2.0 * c / s;
                for &j in d {
                    let v = -2.0 * c * x[i] / (s * s);
                    h[(i, j)] += v;
                    h[(j, i)] += v;
                }
            }
            for &i in d {
                for &j in d {
                    h[(i, j)] += 2.0 * c * n2 / (s * s * s);
                }
            }
        }
    }
}

/// `scale * (c / sum_i x_i - x_t)`: airtime of `c` bits at the summed rate
/// bounded by a time variable.
#[derive(Debug, Clone)]
pub struct AirtimeBound {
    idx: Vec<usize>,
    c: f64,
    scale: f64,
}

impl AirtimeBound {
    pub fn new(rates: Vec<usize>, time: usize, c: f64, scale: f64) -> Self {
        let mut idx = rates;
        idx.push(time);
        Self { idx, c, scale }
    }

    fn rate_sum(&self, x: &[f64]) -> f64 {
        self.idx[..self.idx.len() - 1].iter().map(|&i| x[i]).sum()
    }
}

impl SmoothFn for AirtimeBound {
    fn value(&self, x: &[f64]) -> f64 {
        let t = x[*self.idx.last().unwrap()];
        self.scale * (self.c / self.rate_sum(x) - t)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let s = self.rate_sum(x);
        let (t, rates) = self.idx.split_last().unwrap();
        for &i in rates {
            out[i] = -self.scale * self.c / (s * s);
        }
        out[*t] = -self.scale;
    }

    fn add_hessian(&self, x: &[f64], scale: f64, h: &mut DMatrix<f64>) {
        let s = self.rate_sum(x);
        let v = scale * self.scale * 2.0 * self.c / (s * s * s);
        let rates = &self.idx[..self.idx.len() - 1];
        for &i in rates {
            for &j in rates {
                h[(i, j)] += v;
            }
        }
    }

    fn support(&self) -> Option<&[usize]> {
        Some(&self.idx)
    }
}

/// `sum_k w_k / (T - t_k)^2`: least compute energy of user k when
/// extraction and recovery share the time left after transmission.
#[derive(Debug, Clone)]
pub struct ComputeProxy {
    pub times: Vec<usize>,
    pub weights: Vec<f64>,
    pub deadline: f64,
}

impl SmoothFn for ComputeProxy {
    fn value(&self, x: &[f64]) -> f64 {
        self.times
            .iter()
            .zip(&self.weights)
            .map(|(&i, w)| {
                let s = self.deadline - x[i];
                if s > 0.0 { w / (s * s) } else { f64::INFINITY }
            })
            .sum()
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (&i, w) in self.times.iter().zip(&self.weights) {
            let s = self.deadline - x[i];
            out[i] = 2.0 * w / (s * s * s);
        }
    }

    fn add_hessian(&self, x: &[f64], scale: f64, h: &mut DMatrix<f64>) {
        for (&i, w) in self.times.iter().zip(&self.weights) {
            let s = self.deadline - x[i];
            h[(i, i)] += scale * 6.0 * w / (s * s * s * s);
        }
    }
}

/// `sum_k exp(sharpness (t_k - cap_k))`, a smooth stand-in for the
/// largest deadline overrun.
#[derive(Debug, Clone)]
pub struct Overrun {
    pub times: Vec<usize>,
    pub caps: Vec<f64>,
    pub sharpness: f64,
}

impl SmoothFn for Overrun {
    fn value(&self, x: &[f64]) -> f64 {
        self.times.iter().zip(&self.caps).map(|(&i, c)| (self.sharpness * (x[i] - c)).exp()).sum()
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (&i, c) in self.times.iter().zip(&self.caps) {
            out[i] = self.sharpness * (self.sharpness * (x[i] - c)).exp();
        }
    }

    fn add_hessian(&self, x: &[f64], scale: f64, h: &mut DMatrix<f64>) {
        for (&i, c) in self.times.iter().zip(&self.caps) {
            h[(i, i)] += scale * self.sharpness.powi(2) * (self.sharpness * (x[i] - c)).exp();
        }
    }
}

/// Sum of smooth functions.
pub struct SumFn(pub Vec<Box<dyn SmoothFn>>);

impl SmoothFn for SumFn {
    fn value(&self, x: &[f64]) -> f64 {
        self.0.iter().map(|f| f.value(x)).sum()
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let mut buf = vec![0.0; out.len()];
        out.iter_mut().for_each(|o| *o = 0.0);
        for f in &self.0 {
            f.gradient(x, &mut buf);
            for (o, b) in out.iter_mut().zip(&buf) {
                *o += b;
            }
        }
    }

    fn add_hessian(&self, x: &[f64], scale: f64, h: &mut DMatrix<f64>) {
        for f in &self.0 {
            f.add_hessian(x, scale, h);
        }
    }
}

/// Inner approximation of `Re(h_k^H u_k) >= sqrt(gamma_k alpha_k)` by the
/// tangent plane of the concave right-hand side at `(gamma_n, alpha_n)`,
/// written as `<= 0` and divided by `sqrt(gamma_n alpha_n)`.
pub fn linearize_private_signal(
    layout: &Layout,
    h: &[Complex64],
    k: usize,
    gamma_n: f64,
    alpha_n: f64,
) -> Result<SparseQuadratic> {
    if !(gamma_n > 0.0 && alpha_n > 0.0) {
        return Err(Error::DegenerateIterate(format!(
            "private signal expansion at gamma = {gamma_n}, alpha = {alpha_n}"
        )));
    }
    let beam = layout.beam_range(k + 1);
    let mut idx: Vec<usize> = beam.clone().collect();
    idx.push(layout.gamma(k));
    idx.push(layout.alpha(k));
    let mut c = SparseQuadratic::new(idx);
    let ratio = (alpha_n / gamma_n).sqrt();
    c.add_linear(layout.gamma(k), 0.5 * ratio);
    c.add_linear(layout.alpha(k), 0.5 / ratio);
    c.add_real_part(h, beam.start, Complex64::new(1.0, 0.0), -1.0);
    c.scale(1.0 / (gamma_n * alpha_n).sqrt());
    Ok(c)
}

/// Interference bound of user k's private stream:
/// `sum_{j != k} |h_k^H u_j|^2 + noise - alpha_k <= 0`, divided by `alpha_n`.
pub fn interference_bound_private(
    layout: &Layout,
    h: &[Complex64],
    k: usize,
    noise: f64,
    alpha_n: f64,
) -> SparseQuadratic {
    let others: Vec<usize> = (0..layout.users).filter(|&j| j != k).collect();
    let mut idx: Vec<usize> = others.iter().flat_map(|&j| layout.beam_range(j + 1)).collect();
    idx.push(layout.alpha(k));
    let mut c = SparseQuadratic::new(idx);
    for &j in &others {
        c.add_gain(h, layout.beam(j + 1), 1.0);
    }
    c.add_constant(noise);
    c.add_linear(layout.alpha(k), -1.0);
    c.scale(1.0 / alpha_n.max(noise));
    c
}

/// Interference bound of the common stream at user k:
/// `sum_j |h_k^H u_j|^2 + noise - beta_k <= 0`, divided by `beta_n`.
pub fn interference_bound_common(
    layout: &Layout,
    h: &[Complex64],
    k: usize,
    noise: f64,
    beta_n: f64,
) -> SparseQuadratic {
    let mut idx: Vec<usize> = (0..layout.users).flat_map(|j| layout.beam_range(j + 1)).collect();
    idx.push(layout.beta(k));
    let mut c = SparseQuadratic::new(idx);
    for j in 0..layout.users {
        c.add_gain(h, layout.beam(j + 1), 1.0);
    }
    c.add_constant(noise);
    c.add_linear(layout.beta(k), -1.0);
    c.scale(1.0 / beta_n.max(noise));
    c
}

/// Inner approximation of `|h_k^H u_0|^2 >= beta_k eta_k`: the left side is
/// replaced by its tangent at `z_n = h_k^H u_0^n` (a lower bound) and the
/// product by `((beta + eta)^2 - 2 d (beta - eta) + d^2) / 4` with
/// `d = beta_n - eta_n` (an upper bound). Divided by `beta_n eta_n`.
pub fn linearize_common_signal(
    layout: &Layout,
    h: &[Complex64],
    k: usize,
    z_n: Complex64,
    beta_n: f64,
    eta_n: f64,
) -> Result<SparseQuadratic> {
    if z_n.norm_sqr() == 0.0 {
        return Err(Error::DegenerateIterate(format!(
            "common beam has zero gain at user {k}"
        )));
    }
    if !(beta_n > 0.0 && eta_n > 0.0) {
        return Err(Error::DegenerateIterate(format!(
            "common signal expansion at beta = {beta_n}, eta = {eta_n}"
        )));
    }
    let beam = layout.beam_range(0);
    let (b, e) = (layout.beta(k), layout.eta(k));
    let mut idx: Vec<usize> = beam.clone().collect();
    idx.push(b);
    idx.push(e);
    let mut c = SparseQuadratic::new(idx);
    let d = beta_n - eta_n;
    c.add_product(b, b, 0.25);
    c.add_product(e, e, 0.25);
    c.add_product(b, e, 0.5);
    c.add_linear(b, -0.5 * d);
    c.add_linear(e, 0.5 * d);
    c.add_constant(0.25 * d * d + z_n.norm_sqr());
    c.add_real_part(h, beam.start, z_n, -2.0);
    c.scale(1.0 / (beta_n * eta_n));
    Ok(c)
}
