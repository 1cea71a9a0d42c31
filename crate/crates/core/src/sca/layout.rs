use num_complex::Complex64;

/// Positions of the real optimization variables.
///
/// Beams come first as interleaved (re, im) pairs, then the common rate
/// split, the private rates and the four slack families. Without a common
/// stream there is no common beam, no split and no `eta`/`beta`. With
/// `times`, per-user transmission times follow at the end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub users: usize,
    pub antennas: usize,
    pub common: bool,
    pub times: bool,
}

impl Layout {
    pub fn new(users: usize, antennas: usize, common: bool) -> Self {
        Self { users, antennas, common, times: false }
    }

    pub fn with_times(self) -> Self {
        Self { times: true, ..self }
    }

    fn beams(&self) -> usize {
        self.users + self.common as usize
    }

    /// First coordinate of stream `s` (0 = common, `k + 1` = user `k`).
    pub fn beam(&self, s: usize) -> usize {
        debug_assert!(self.common || s > 0);
        let slot = if self.common { s } else { s - 1 };
        slot * 2 * self.antennas
    }

    pub fn beam_range(&self, s: usize) -> std::ops::Range<usize> {
        let b = self.beam(s);
        b..b + 2 * self.antennas
    }

    fn split_start(&self) -> usize {
        self.beams() * 2 * self.antennas
    }

    /// Common-rate share `a_j`, `j = 0` being the knowledge update.
    pub fn a(&self, j: usize) -> usize {
        debug_assert!(self.common);
        self.split_start() + j
    }

    fn rate_start(&self) -> usize {
        self.split_start() + if self.common { self.users + 1 } else { 0 }
    }

    pub fn r(&self, k: usize) -> usize {
        self.rate_start() + k
    }

    pub fn gamma(&self, k: usize) -> usize {
        self.rate_start() + self.users + k
    }

    pub fn alpha(&self, k: usize) -> usize {
        self.rate_start() + 2 * self.users + k
    }

    pub fn eta(&self, k: usize) -> usize {
        debug_assert!(self.common);
        self.rate_start() + 3 * self.users + k
    }

    pub fn beta(&self, k: usize) -> usize {
        debug_assert!(self.common);
        self.rate_start() + 4 * self.users + k
    }

    fn slack_end(&self) -> usize {
        self.rate_start() + if self.common { 5 } else { 3 } * self.users
    }

    /// Transmission time of user k.
    pub fn t(&self, k: usize) -> usize {
        debug_assert!(self.times);
        self.slack_end() + k
    }

    pub fn dim(&self) -> usize {
        self.slack_end() + if self.times { self.users } else { 0 }
    }

    pub fn read_beam(&self, x: &[f64], s: usize) -> Vec<Complex64> {
        let b = self.beam(s);
        (0..self.antennas).map(|i| Complex64::new(x[b + 2 * i], x[b + 2 * i + 1])).collect()
    }

    pub fn write_beam(&self, x: &mut [f64], s: usize, v: &[Complex64]) {
        let b = self.beam(s);
        for (i, z) in v.iter().enumerate() {
            x[b + 2 * i] = z.re;
            x[b + 2 * i + 1] = z.im;
        }
    }
}

/// Real vectors `p`, `q` with `Re(h^H u) = p.x` and `Im(h^H u) = q.x` for
/// `u` stored interleaved in `x`.
pub(crate) fn real_projections(h: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
    let mut p = Vec::with_capacity(2 * h.len());
    let mut q = Vec::with_capacity(2 * h.len());
    for z in h {
        p.push(z.re);
        p.push(z.im);
        q.push(-z.im);
        q.push(z.re);
    }
    (p, q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_dimension() {
        let l = Layout::new(5, 4, true);
        assert_eq!(l.dim(), 2 * 4 * 6 + 6 + 5 + 20);
        assert_eq!(l.dim(), 79);
        assert_eq!(l.beta(4), 78);
        let s = Layout::new(5, 4, false);
        assert_eq!(s.dim(), 2 * 4 * 5 + 5 + 10);
        assert_eq!(s.beam(1), 0);
        assert_eq!(l.with_times().dim(), 84);
        assert_eq!(l.with_times().t(0), 79);
    }

    #[test]
    fn projections_match_inner_product() {
        let h = vec![Complex64::new(0.3, -1.2), Complex64::new(2.0, 0.5)];
        let u = vec![Complex64::new(-0.7, 0.1), Complex64::new(0.4, 0.9)];
        let z: Complex64 = h.iter().zip(&u).map(|(a, b)| a.conj() * b).sum();
        let (p, q) = real_projections(&h);
        let x: Vec<f64> = u.iter().flat_map(|c| [c.re, c.im]).collect();
        let re: f64 = p.iter().zip(&x).map(|(a, b)| a * b).sum();
        let im: f64 = q.iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((re - z.re).abs() < 1e-14 && (im - z.im).abs() < 1e-14);
    }
}
