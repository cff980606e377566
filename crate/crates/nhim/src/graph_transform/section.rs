//! Sections of a trivial bundle over a time interval times a base chart,
//! stored on tensor-product grids.
//!
//! The time axis may be nonuniform (log-spaced windows are the common case
//! for polynomially decaying perturbations); base axes are tensor factors.
//! Values are interpolated either multilinearly or by piecewise-cubic
//! Lagrange stencils, axis by axis. A section carries a valid time window
//! that the graph transform shrinks as it consumes future data; nodes above
//! the window hold stale values and are neither read nor serialized.

use serde::{Deserialize, Serialize};

use super::{GraphError, Weight};

/// Interpolation rule applied independently along every grid axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    Multilinear,
    Cubic,
}

/// Sup and Lipschitz bounds of a section measured relative to a weight.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RhoBounds {
    /// `sup_t sup_y |sigma(t, y)| / rho(t)` over grid nodes in the window.
    pub sup_ratio: f64,
    /// Largest base-direction difference quotient divided by `rho(t)`.
    pub lip_ratio: f64,
}

impl RhoBounds {
    /// The section-space constant: the larger of the two ratios.
    pub fn c_sigma(&self) -> f64 {
        self.sup_ratio.max(self.lip_ratio)
    }
}

/// Grid-sampled section `sigma(t, y)` with values in `R^{fiber_dim}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectionGrid {
    t_nodes: Vec<f64>,
    base_axes: Vec<Vec<f64>>,
    fiber_dim: usize,
    interpolation: Interpolation,
    /// Valid time range; shrinks from the top as transforms consume data.
    window: (f64, f64),
    values: Vec<f64>,
}

const MAX_AXES: usize = 4;

impl SectionGrid {
    /// Zero section on the given grid. Axes must be strictly increasing and
    /// the time axis needs at least two nodes.
    pub fn zeros(
        t_nodes: Vec<f64>,
        base_axes: Vec<Vec<f64>>,
        fiber_dim: usize,
        interpolation: Interpolation,
    ) -> Result<Self, GraphError> {
        if t_nodes.len() < 2 {
            return Err(GraphError::InvalidGrid("need at least two time nodes".into()));
        }
        if fiber_dim == 0 {
            return Err(GraphError::InvalidGrid("fiber dimension must be positive".into()));
        }
        if base_axes.len() + 1 > MAX_AXES {
            return Err(GraphError::InvalidGrid(format!(
                "at most {} base axes supported",
                MAX_AXES - 1
            )));
        }
        for axis in std::iter::once(&t_nodes).chain(base_axes.iter()) {
            if axis.is_empty() {
                return Err(GraphError::InvalidGrid("empty grid axis".into()));
            }
            if axis.windows(2).any(|w| w[1] <= w[0]) {
                return Err(GraphError::InvalidGrid(
                    "grid axes must be strictly increasing".into(),
                ));
            }
        }
        let n_base: usize = base_axes.iter().map(Vec::len).product();
        let window = (t_nodes[0], *t_nodes.last().unwrap());
        Ok(Self {
            values: vec![0.0; t_nodes.len() * n_base * fiber_dim],
            t_nodes,
            base_axes,
            fiber_dim,
            interpolation,
            window,
        })
    }

    pub fn n_t(&self) -> usize {
        self.t_nodes.len()
    }

    pub fn n_base(&self) -> usize {
        self.base_axes.iter().map(Vec::len).product()
    }

    pub fn base_dim(&self) -> usize {
        self.base_axes.len()
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber_dim
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn t_nodes(&self) -> &[f64] {
        &self.t_nodes
    }

    pub fn base_axes(&self) -> &[Vec<f64>] {
        &self.base_axes
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn set_window(&mut self, lo: f64, hi: f64) {
        assert!(lo < hi, "window must be nonempty");
        self.window = (lo, hi);
    }

    /// Decodes a flat base index into grid coordinates (row-major, first
    /// axis slowest).
    pub fn base_point(&self, mut ib: usize, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.base_dim());
        for (d, axis) in self.base_axes.iter().enumerate().rev() {
            out[d] = axis[ib % axis.len()];
            ib /= axis.len();
        }
    }

    pub fn value(&self, it: usize, ib: usize) -> &[f64] {
        let start = (it * self.n_base() + ib) * self.fiber_dim;
        &self.values[start..start + self.fiber_dim]
    }

    pub fn value_mut(&mut self, it: usize, ib: usize) -> &mut [f64] {
        let nb = self.n_base();
        let start = (it * nb + ib) * self.fiber_dim;
        &mut self.values[start..start + self.fiber_dim]
    }

    /// Overwrites the section with `f(t, y)` at every grid node.
    pub fn fill_with(&mut self, mut f: impl FnMut(f64, &[f64]) -> Vec<f64>) {
        let mut y = vec![0.0; self.base_dim()];
        for it in 0..self.n_t() {
            let t = self.t_nodes[it];
            for ib in 0..self.n_base() {
                self.base_point(ib, &mut y);
                let v = f(t, &y);
                self.value_mut(it, ib).copy_from_slice(&v);
            }
        }
    }

    /// Interpolated value at `(t, y)`. `t` must lie in the valid window and
    /// `y` inside the base box, both up to a small clamping fuzz.
    pub fn eval(&self, t: f64, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.base_dim());
        debug_assert_eq!(out.len(), self.fiber_dim);
        let span = self.window.1 - self.window.0;
        let fuzz = 1e-9 * span.max(1.0);
        assert!(
            t >= self.window.0 - fuzz && t <= self.window.1 + fuzz,
            "t = {t} outside valid window {:?}",
            self.window
        );

        let cubic = self.interpolation == Interpolation::Cubic;
        let mut starts = [0usize; MAX_AXES];
        let mut weights = [[0.0f64; 4]; MAX_AXES];
        let mut counts = [0usize; MAX_AXES];

        // Stencils along the time axis only use nodes inside the valid
        // window; nodes above it hold stale data.
        let live = self.window_node_range();
        let (s, w, c) = axis_stencil(
            &self.t_nodes[live.clone()],
            t.clamp(self.window.0, self.window.1),
            cubic,
        );
        starts[0] = live.start + s;
        weights[0] = w;
        counts[0] = c;
        for (d, axis) in self.base_axes.iter().enumerate() {
            let lo = axis[0];
            let hi = *axis.last().unwrap();
            let fuzz_y = 1e-9 * (hi - lo).max(1.0);
            assert!(
                y[d] >= lo - fuzz_y && y[d] <= hi + fuzz_y,
                "base coordinate {} = {} outside chart [{lo}, {hi}]",
                d,
                y[d]
            );
            let (s, w, c) = axis_stencil(axis, y[d].clamp(lo, hi), cubic);
            starts[d + 1] = s;
            weights[d + 1] = w;
            counts[d + 1] = c;
        }

        out.fill(0.0);
        let n_axes = self.base_dim() + 1;
        let mut idx = [0usize; MAX_AXES];
        loop {
            let mut wgt = 1.0;
            for a in 0..n_axes {
                wgt *= weights[a][idx[a]];
            }
            if wgt != 0.0 {
                let it = starts[0] + idx[0];
                let mut ib = 0;
                for (d, axis) in self.base_axes.iter().enumerate() {
                    ib = ib * axis.len() + (starts[d + 1] + idx[d + 1]);
                }
                let v = self.value(it, ib);
                for (o, x) in out.iter_mut().zip(v) {
                    *o += wgt * x;
                }
            }
            // Odometer increment over the stencil.
            let mut a = n_axes;
            loop {
                if a == 0 {
                    return;
                }
                a -= 1;
                idx[a] += 1;
                if idx[a] < counts[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
    }

    pub fn eval_vec(&self, t: f64, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.fiber_dim];
        self.eval(t, y, &mut out);
        out
    }

    /// Indices of time nodes inside the valid window.
    pub fn window_node_range(&self) -> std::ops::Range<usize> {
        let fuzz = 1e-9 * (self.window.1 - self.window.0).max(1.0);
        let lo = self.t_nodes.partition_point(|&t| t < self.window.0 - fuzz);
        let hi = self.t_nodes.partition_point(|&t| t <= self.window.1 + fuzz);
        lo..hi
    }

    /// Max norm of the fiber values over the base at time node `it`.
    pub fn sup_at_node(&self, it: usize) -> f64 {
        let mut m = 0.0f64;
        for ib in 0..self.n_base() {
            for v in self.value(it, ib) {
                m = m.max(v.abs());
            }
        }
        m
    }

    /// Sup and base-Lipschitz ratios of the section against a weight,
    /// measured on window nodes.
    pub fn rho_bounds(&self, weight: &Weight) -> RhoBounds {
        let mut sup_ratio = 0.0f64;
        let mut lip_ratio = 0.0f64;
        let range = self.window_node_range();
        let nb = self.n_base();
        for it in range {
            let rho = weight.eval(self.t_nodes[it]);
            sup_ratio = sup_ratio.max(self.sup_at_node(it) / rho);
            // Differences along each base axis: walk flat indices with the
            // axis stride.
            let mut stride = 1;
            for (d, axis) in self.base_axes.iter().enumerate().rev() {
                for ib in 0..nb {
                    let pos = ib / stride % axis.len();
                    if pos + 1 >= axis.len() {
                        continue;
                    }
                    let dy = axis[pos + 1] - axis[pos];
                    let a = self.value(it, ib);
                    let b = self.value(it, ib + stride);
                    for (x, y) in a.iter().zip(b) {
                        lip_ratio = lip_ratio.max((y - x).abs() / (dy * rho));
                    }
                }
                stride *= axis.len();
                let _ = d;
            }
        }
        RhoBounds { sup_ratio, lip_ratio }
    }

    /// Writes the window part of the section as CSV: one row per grid node,
    /// with named time, base, and fiber columns.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<(), GraphError> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        for d in 0..self.base_dim() {
            header.push(format!("y{d}"));
        }
        for k in 0..self.fiber_dim {
            header.push(format!("sigma{k}"));
        }
        wtr.write_record(&header).map_err(csv_err)?;
        let mut y = vec![0.0; self.base_dim()];
        for it in self.window_node_range() {
            for ib in 0..self.n_base() {
                self.base_point(ib, &mut y);
                let mut row = Vec::with_capacity(header.len());
                row.push(format_float(self.t_nodes[it]));
                row.extend(y.iter().map(|v| format_float(*v)));
                row.extend(self.value(it, ib).iter().map(|v| format_float(*v)));
                wtr.write_record(&row).map_err(csv_err)?;
            }
        }
        wtr.flush().map_err(|e| GraphError::Io(e.to_string()))?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> GraphError {
    GraphError::Io(e.to_string())
}

/// Shortest round-trippable decimal representation.
fn format_float(v: f64) -> String {
    let mut s = format!("{v}");
    if !s.contains(['.', 'e', 'n', 'i']) {
        s.push_str(".0");
    }
    s
}

/// Interpolation stencil along one axis: starting node, weights, and stencil
/// width. Cubic stencils use four consecutive nodes (Lagrange on the actual,
/// possibly nonuniform node positions); linear stencils use two.
fn axis_stencil(nodes: &[f64], x: f64, cubic: bool) -> (usize, [f64; 4], usize) {
    let n = nodes.len();
    if n == 1 {
        return (0, [1.0, 0.0, 0.0, 0.0], 1);
    }
    // Interval index i with nodes[i] <= x < nodes[i+1], clamped.
    let mut i = nodes.partition_point(|&v| v <= x);
    i = i.saturating_sub(1).min(n - 2);

    if cubic && n >= 4 {
        let start = i.saturating_sub(1).min(n - 4);
        let xs = &nodes[start..start + 4];
        let mut w = [0.0f64; 4];
        for j in 0..4 {
            let mut num = 1.0;
            let mut den = 1.0;
            for m in 0..4 {
                if m != j {
                    num *= x - xs[m];
                    den *= xs[j] - xs[m];
                }
            }
            w[j] = num / den;
        }
        (start, w, 4)
    } else {
        let frac = (x - nodes[i]) / (nodes[i + 1] - nodes[i]);
        (i, [1.0 - frac, frac, 0.0, 0.0], 2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid(interp: Interpolation) -> SectionGrid {
        let t: Vec<f64> = (0..=20).map(|i| 1.0 + 0.5 * i as f64).collect();
        let y: Vec<f64> = (0..=8).map(|i| -0.1 + 0.025 * i as f64).collect();
        SectionGrid::zeros(t, vec![y], 2, interp).unwrap()
    }

    #[test]
    fn cubic_interpolation_reproduces_cubics_exactly() {
        let mut g = grid(Interpolation::Cubic);
        g.fill_with(|t, y| vec![t * t * t - 2.0 * t, y[0] * y[0] * y[0] + t * y[0]]);
        for (t, y) in [(1.3, -0.04), (4.26, 0.099), (10.9, 0.0), (2.0, -0.1)] {
            let v = g.eval_vec(t, &[y]);
            assert_abs_diff_eq!(v[0], t * t * t - 2.0 * t, epsilon = 1e-10);
            assert_abs_diff_eq!(v[1], y * y * y + t * y, epsilon = 1e-12);
        }
    }

    #[test]
    fn multilinear_interpolation_reproduces_affine_exactly() {
        let mut g = grid(Interpolation::Multilinear);
        g.fill_with(|t, y| vec![3.0 * t - 1.0, 2.0 * y[0] + 0.5]);
        let v = g.eval_vec(3.77, &[0.0833]);
        assert_abs_diff_eq!(v[0], 3.0 * 3.77 - 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v[1], 2.0 * 0.0833 + 0.5, epsilon = 1e-12);
    }

    #[test]
    fn window_restricts_readable_times() {
        let mut g = grid(Interpolation::Cubic);
        g.set_window(1.0, 6.0);
        assert_eq!(g.window_node_range(), 0..11);
        let res = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
            g.eval_vec(8.0, &[0.0]);
        }));
        assert!(res.is_err());
    }

    #[test]
    fn rho_bounds_track_sup_and_lipschitz_ratios() {
        let mut g = grid(Interpolation::Cubic);
        let w = Weight::custom("one", 0.0, |_| 1.0);
        g.fill_with(|_, y| vec![2.0 * y[0], 0.25]);
        let b = g.rho_bounds(&w);
        assert_abs_diff_eq!(b.sup_ratio, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(b.lip_ratio, 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(b.c_sigma(), 2.0, epsilon = 1e-9);
    }

    #[test]
    fn csv_round_trip_headers_and_rows() {
        let mut g = SectionGrid::zeros(
            vec![0.0, 1.0, 2.0],
            vec![vec![-1.0, 1.0]],
            1,
            Interpolation::Multilinear,
        )
        .unwrap();
        g.fill_with(|t, y| vec![t + y[0]]);
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,y0,sigma0");
        assert_eq!(lines.clone().count(), 6);
        assert!(lines.any(|l| l == "2.0,1.0,3.0"));
    }

    #[test]
    fn base_sup_at_node_scans_all_fiber_components() {
        let mut g = grid(Interpolation::Cubic);
        g.fill_with(|t, y| vec![0.0, if t == 1.0 && y[0] == -0.1 { -7.0 } else { 0.1 }]);
        assert_abs_diff_eq!(g.sup_at_node(0), 7.0, epsilon = 0.0);
    }
}
