//! Composite Gauss-Legendre quadrature on interface-aligned panels.
//!
//! The 1D integrals of the monodromy estimates and the Fourier oracles have
//! integrands that are smooth between geometric interface coordinates but
//! kink there; chord functions of circular shapes additionally have
//! square-root behaviour at tangency points. Panels are therefore aligned to
//! the supplied breakpoints and geometrically refined toward the points
//! flagged as singular.

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
///
/// Newton iteration on the Legendre recurrence; accurate to machine
/// precision for the small orders used here.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature order must be positive");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_deriv(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[k] = -x;
        weights[k] = w;
        nodes[n - 1 - k] = x;
        weights[n - 1 - k] = w;
    }
    (nodes, weights)
}

fn legendre_with_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Panel layout for the outer line-average integrals.
#[derive(Debug, Clone, Copy)]
pub struct PanelRule {
    /// Target number of equal panels over the unit interval (before
    /// interface alignment adds more).
    pub panels: usize,
    /// Gauss-Legendre points per panel.
    pub points: usize,
    /// Geometric-refinement levels toward singular breakpoints.
    pub grade_levels: usize,
    /// Shrink ratio of the graded subpanels.
    pub grade_ratio: f64,
}

impl Default for PanelRule {
    fn default() -> Self {
        PanelRule {
            panels: 64,
            points: 8,
            grade_levels: 14,
            grade_ratio: 0.15,
        }
    }
}

impl PanelRule {
    pub fn with_panels(panels: usize) -> Self {
        PanelRule {
            panels,
            ..Self::default()
        }
    }

    /// Integrate `f` over `[0, 1)` with panels aligned to `breaks` and graded
    /// toward the subset `singular`. Breakpoints outside `[0, 1)` are ignored.
    pub fn integrate<F: FnMut(f64) -> f64>(
        &self,
        breaks: &[f64],
        singular: &[f64],
        mut f: F,
    ) -> f64 {
        let mut pts: Vec<f64> = breaks
            .iter()
            .copied()
            .filter(|p| p.is_finite() && *p > 1e-14 && *p < 1.0 - 1e-14)
            .collect();
        pts.push(0.0);
        pts.push(1.0);
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);

        let is_singular = |x: f64| {
            singular
                .iter()
                .any(|s| (x - s).abs() < 1e-12 || (x - s + 1.0).abs() < 1e-12 || (x - s - 1.0).abs() < 1e-12)
        };

        let (gx, gw) = gauss_legendre(self.points);
        let mut total = 0.0;
        for w in pts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if hi - lo < 1e-14 {
                continue;
            }
            for (a, b) in self.grade_panel(lo, hi, is_singular(lo), is_singular(hi)) {
                // split long smooth stretches to reach the target panel count
                let nsub = ((b - a) * self.panels as f64).ceil().max(1.0) as usize;
                let h = (b - a) / nsub as f64;
                for i in 0..nsub {
                    let (s0, s1) = (a + i as f64 * h, a + (i + 1) as f64 * h);
                    let mid = 0.5 * (s0 + s1);
                    let half = 0.5 * (s1 - s0);
                    for (x, w) in gx.iter().zip(&gw) {
                        total += half * w * f(mid + half * x);
                    }
                }
            }
        }
        total
    }

    fn grade_panel(&self, lo: f64, hi: f64, sing_lo: bool, sing_hi: bool) -> Vec<(f64, f64)> {
        match (sing_lo, sing_hi) {
            (false, false) => vec![(lo, hi)],
            (true, false) => self.geometric(lo, hi, true),
            (false, true) => self.geometric(lo, hi, false),
            (true, true) => {
                let mid = 0.5 * (lo + hi);
                let mut v = self.geometric(lo, mid, true);
                v.extend(self.geometric(mid, hi, false));
                v
            }
        }
    }

    fn geometric(&self, lo: f64, hi: f64, toward_lo: bool) -> Vec<(f64, f64)> {
        let len = hi - lo;
        let mut cuts = vec![lo, hi];
        let mut t = 1.0;
        for _ in 0..self.grade_levels {
            t *= self.grade_ratio;
            cuts.push(if toward_lo { lo + t * len } else { hi - t * len });
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-300);
        cuts.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn nodes_integrate_polynomials_exactly() {
        let (x, w) = gauss_legendre(8);
        // degree-15 monomial is exact for 8-point GL
        let val: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert_relative_eq!(val, 2.0 / 15.0, max_relative = 1e-13);
        let sum: f64 = w.iter().sum();
        assert_relative_eq!(sum, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn graded_panels_handle_sqrt_kink() {
        // integral of sqrt(|x - 1/2|) over [0,1] = 2/3 * (1/2)^(3/2) * 2
        let rule = PanelRule::default();
        let val = rule.integrate(&[0.5], &[0.5], |x| (x - 0.5).abs().sqrt());
        let exact = 4.0 / 3.0 * 0.5f64.powf(1.5);
        assert_relative_eq!(val, exact, max_relative = 1e-12);
    }

    #[test]
    fn piecewise_constant_is_exact() {
        let rule = PanelRule::with_panels(4);
        let val = rule.integrate(&[0.3, 0.7], &[], |x| if x < 0.3 { 2.0 } else { 1.0 });
        assert_relative_eq!(val, 0.3 * 2.0 + 0.7, max_relative = 1e-14);
    }
}
