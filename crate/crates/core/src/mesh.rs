//! Piecewise-constant functions and weights on the finest dyadic mesh,
//! exact averages, and the mesh-aligned interval family that stands in for
//! "all intervals" in the continuous definitions.
//!
//! Grid intervals of a shifted grid are not mesh aligned; integrals over them
//! are taken on the common refinement of the mesh with the interval's exact
//! rational endpoints (partial end cells get exact rational coverage).

use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::covering::{cover, RatInterval};
use crate::error::{Error, Result};
use crate::exact::{
    covering_constant, floor_big, format_rational, frac_mod_one, int, to_f64, Rational,
};
use crate::grids::Domain;
use crate::report::VerificationReport;

/// Compensated (Kahan) running sums; cell sums are exact to roundoff.
#[derive(Clone, Debug)]
pub struct Prefix {
    p: Vec<f64>,
}

impl Prefix {
    pub fn new<I: IntoIterator<Item = f64>>(values: I) -> Self {
        let mut p = vec![0.0];
        let mut sum = 0.0;
        let mut comp = 0.0;
        for v in values {
            let y = v - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
            p.push(sum);
        }
        Prefix { p }
    }

    pub fn n(&self) -> usize {
        self.p.len() - 1
    }

    pub fn total(&self) -> f64 {
        *self.p.last().unwrap()
    }

    /// Sum over `len` cells starting at `start`, wrapping past the end.
    pub fn sum_wrap(&self, start: usize, len: usize) -> f64 {
        let n = self.n();
        debug_assert!(start < n && len <= n);
        if start + len <= n {
            self.p[start + len] - self.p[start]
        } else {
            (self.total() - self.p[start]) + self.p[start + len - n]
        }
    }
}

/// Mesh-aligned interval as (start cell, cell count); on the torus it may
/// wrap, and len == cell_count means the full circle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AlignedInterval {
    pub start: usize,
    pub len: usize,
}

impl AlignedInterval {
    pub fn to_rat(self, domain: Domain) -> RatInterval {
        let h = domain.cell_len();
        RatInterval::new(
            domain.cell_left(self.start),
            int(self.len as i64) * h,
            domain,
        )
        .expect("aligned interval is nonempty")
    }
}

/// Every mesh-aligned interval with length >= min_len, in deterministic
/// order (by start, then by length). Torus: wrap arcs of 1..N-1 cells from
/// every start plus the full circle; line: all [i, j) within the window.
pub fn enumerate_intervals(domain: Domain, min_len: &Rational) -> Result<Vec<AlignedInterval>> {
    let h = domain.cell_len();
    let n = domain.cell_count();
    let ratio = min_len / h.clone();
    if !ratio.is_integer() && *min_len < h {
        return Err(Error::NotMeshAligned(format!(
            "min_len {} below cell length",
            format_rational(min_len)
        )));
    }
    let min_cells = ratio
        .ceil()
        .to_integer()
        .to_usize()
        .unwrap_or(usize::MAX)
        .max(1);
    let mut out = Vec::new();
    if domain.is_torus() {
        for start in 0..n {
            for len in min_cells..n {
                out.push(AlignedInterval { start, len });
            }
            if start == 0 && n >= min_cells {
                out.push(AlignedInterval { start: 0, len: n });
            }
        }
    } else {
        for start in 0..n {
            for len in min_cells..=(n - start) {
                out.push(AlignedInterval { start, len });
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeshFunction1D {
    domain: Domain,
    values: Vec<f64>,
}

impl MeshFunction1D {
    pub fn new(domain: Domain, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.cell_count() {
            return Err(Error::BadValueCount {
                got: values.len(),
                want: domain.cell_count(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue);
        }
        Ok(MeshFunction1D { domain, values })
    }

    pub fn constant(domain: Domain, c: f64) -> Self {
        MeshFunction1D {
            values: vec![c; domain.cell_count()],
            domain,
        }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> MeshFunction1D {
        MeshFunction1D {
            domain: self.domain,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn prefix(&self) -> Prefix {
        Prefix::new(self.values.iter().copied())
    }

    /// The mesh cell containing x (reduced mod 1 on the torus).
    pub fn cell_of(&self, x: &Rational) -> Result<usize> {
        if !self.domain.contains_point(x) {
            return Err(Error::OutsideDomain(format_rational(x)));
        }
        let (lo, _) = self.domain.window();
        let x = if self.domain.is_torus() {
            frac_mod_one(x)
        } else {
            x.clone()
        };
        let idx = floor_big(&((x - lo) / self.domain.cell_len()));
        Ok(idx.to_usize().unwrap().min(self.domain.cell_count() - 1))
    }

    /// Cells-and-coverage decomposition of q against the mesh.
    fn coverage(&self, q: &RatInterval) -> Result<CellCoverage> {
        cell_coverage(self.domain, q)
    }

    /// Exact integral of the piecewise-constant function over any rational
    /// interval: end cells get exact rational coverage, middle cells come
    /// from the prefix sums. `prefix` must be this function's prefix.
    pub fn integral_refined(&self, q: &RatInterval, prefix: &Prefix) -> Result<f64> {
        let cov = self.coverage(q)?;
        let h = to_f64(&self.domain.cell_len());
        let n = cov.cells;
        let vi = |c: usize| self.values[c % n];
        if cov.first == cov.last {
            let span = cov.end_frac.clone() - cov.start_frac.clone();
            return Ok(vi(cov.first) * to_f64(&span) * h);
        }
        let head = (int(1) - cov.start_frac.clone()).max(int(0));
        let mut sum = vi(cov.first) * to_f64(&head) * h;
        if cov.last > cov.first + 1 {
            let mid_start = (cov.first + 1) % n;
            let mid_len = cov.last - cov.first - 1;
            sum += prefix.sum_wrap(mid_start, mid_len) * h;
        }
        sum += vi(cov.last) * to_f64(&cov.end_frac) * h;
        Ok(sum)
    }

    /// Average over any rational interval via the refined integral.
    pub fn average_refined(&self, q: &RatInterval, prefix: &Prefix) -> Result<f64> {
        Ok(self.integral_refined(q, prefix)? / to_f64(&q.len))
    }

    /// Visit every cell meeting q with positive measure along with its exact
    /// coverage fraction (in cell units, converted once to f64).
    pub fn for_each_covered_cell(
        &self,
        q: &RatInterval,
        mut visit: impl FnMut(usize, f64),
    ) -> Result<()> {
        let cov = self.coverage(q)?;
        let n = cov.cells;
        if cov.first == cov.last {
            let span = cov.end_frac.clone() - cov.start_frac.clone();
            visit(cov.first % n, to_f64(&span));
            return Ok(());
        }
        visit(cov.first % n, to_f64(&(int(1) - cov.start_frac.clone())));
        for c in cov.first + 1..cov.last {
            visit(c % n, 1.0);
        }
        visit(cov.last % n, to_f64(&cov.end_frac));
        Ok(())
    }

    /// p-mean oscillation over any rational interval:
    /// ((1/|Q|) integral of |f - f_Q|^p)^(1/p).
    pub fn oscillation_refined(&self, q: &RatInterval, prefix: &Prefix, p: f64) -> Result<f64> {
        let m = self.average_refined(q, prefix)?;
        let h = to_f64(&self.domain.cell_len());
        let mut acc = 0.0;
        self.for_each_covered_cell(q, |c, wgt| {
            acc += wgt * (self.values[c] - m).abs().powf(p);
        })?;
        Ok((acc * h / to_f64(&q.len)).powf(1.0 / p))
    }

    /// Minimum cell value over the cells meeting q with positive measure.
    pub fn min_over(&self, q: &RatInterval) -> Result<f64> {
        self.fold_over(q, f64::INFINITY, f64::min)
    }

    pub fn max_over(&self, q: &RatInterval) -> Result<f64> {
        self.fold_over(q, f64::NEG_INFINITY, f64::max)
    }

    fn fold_over(&self, q: &RatInterval, init: f64, f: impl Fn(f64, f64) -> f64) -> Result<f64> {
        let cov = self.coverage(q)?;
        let mut acc = init;
        for c in cov.first..=cov.last {
            acc = f(acc, self.values[c % cov.cells]);
        }
        Ok(acc)
    }

    /// Aligned-interval cell range; errors when q is not mesh aligned.
    pub fn aligned_cells(&self, q: &RatInterval) -> Result<AlignedInterval> {
        let cov = self.coverage(q)?;
        if !cov.start_frac.is_zero() || cov.end_frac != int(1) {
            return Err(Error::NotMeshAligned(format!(
                "[{}, {})",
                format_rational(&q.left),
                format_rational(&q.right())
            )));
        }
        Ok(AlignedInterval {
            start: cov.first,
            len: cov.last - cov.first + 1,
        })
    }

    /// Exact cell-weighted mean over a mesh-aligned interval.
    pub fn average(&self, q: &RatInterval) -> Result<f64> {
        let ai = self.aligned_cells(q)?;
        let p = self.prefix();
        Ok(p.sum_wrap(ai.start, ai.len) / ai.len as f64)
    }
}

pub(crate) struct CellCoverage {
    pub(crate) first: usize,
    pub(crate) last: usize, // unwrapped: may reach first + cells - 1
    pub(crate) start_frac: Rational,
    pub(crate) end_frac: Rational,
    pub(crate) cells: usize,
}

/// Cells-and-coverage decomposition of q against the mesh of `domain`:
/// the first covered cell, the exact fractional coverage of the two end
/// cells, and the unwrapped cell span. Errors when q leaves a line window.
pub(crate) fn cell_coverage(domain: Domain, q: &RatInterval) -> Result<CellCoverage> {
    let h = domain.cell_len();
    let (lo, hi) = domain.window();
    let n = domain.cell_count();
    let (a, b) = if domain.is_torus() {
        let a = frac_mod_one(&q.left);
        (a.clone(), a + q.len.clone())
    } else {
        if q.left < lo || q.right() > hi {
            return Err(Error::OutsideDomain(format!(
                "[{}, {})",
                format_rational(&q.left),
                format_rational(&q.right())
            )));
        }
        (q.left.clone(), q.right())
    };
    let a_cells = (a - &lo) / &h; // in [0, N)
    let b_cells = (b - &lo) / &h; // in (a, 2N] unwrapped on the torus
    let i0 = floor_big(&a_cells).to_usize().unwrap();
    let frac0 = a_cells - int(i0 as i64);
    let i1_raw = floor_big(&b_cells);
    let frac1 = b_cells.clone() - Rational::from_integer(i1_raw.clone());
    let i1 = i1_raw.to_usize().unwrap();
    // Last covered cell index (unwrapped) and its right-end coverage.
    let (last, end_frac) = if frac1.is_zero() {
        (i1 - 1, int(1))
    } else {
        (i1, frac1)
    };
    Ok(CellCoverage {
        first: i0.min(n - 1),
        last,
        start_frac: frac0,
        end_frac,
        cells: n,
    })
}

/// The span of cells meeting q with positive measure: (first cell, count).
/// On the torus the span may wrap (indices are taken mod the cell count).
pub fn covered_cells(domain: Domain, q: &RatInterval) -> Result<(usize, usize)> {
    let cov = cell_coverage(domain, q)?;
    Ok((cov.first % cov.cells, cov.last - cov.first + 1))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeshWeight1D(MeshFunction1D);

impl MeshWeight1D {
    pub fn new(domain: Domain, values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
            return Err(Error::NonPositiveWeight);
        }
        Ok(MeshWeight1D(MeshFunction1D::new(domain, values)?))
    }

    pub fn as_fn(&self) -> &MeshFunction1D {
        &self.0
    }

    pub fn domain(&self) -> Domain {
        self.0.domain
    }

    pub fn values(&self) -> &[f64] {
        self.0.values()
    }

    /// omega(Q) = integral of the weight over a mesh-aligned interval.
    pub fn measure(&self, q: &RatInterval) -> Result<f64> {
        let ai = self.0.aligned_cells(q)?;
        let p = self.0.prefix();
        Ok(p.sum_wrap(ai.start, ai.len) * to_f64(&self.domain().cell_len()))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeshFunction2D {
    domain_x: Domain,
    domain_y: Domain,
    /// Row-major over x: values[ix * ny + iy].
    values: Vec<f64>,
}

impl MeshFunction2D {
    pub fn new(domain_x: Domain, domain_y: Domain, values: Vec<f64>) -> Result<Self> {
        let want = domain_x.cell_count() * domain_y.cell_count();
        if values.len() != want {
            return Err(Error::BadValueCount {
                got: values.len(),
                want,
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue);
        }
        Ok(MeshFunction2D {
            domain_x,
            domain_y,
            values,
        })
    }

    pub fn from_rows(domain_x: Domain, domain_y: Domain, rows: Vec<Vec<f64>>) -> Result<Self> {
        let flat = rows.into_iter().flatten().collect();
        Self::new(domain_x, domain_y, flat)
    }

    pub fn constant(domain_x: Domain, domain_y: Domain, c: f64) -> Self {
        MeshFunction2D {
            domain_x,
            domain_y,
            values: vec![c; domain_x.cell_count() * domain_y.cell_count()],
        }
    }

    pub fn tensor(fx: &MeshFunction1D, fy: &MeshFunction1D) -> Self {
        let ny = fy.domain().cell_count();
        let mut values = Vec::with_capacity(fx.values().len() * ny);
        for &a in fx.values() {
            for &b in fy.values() {
                values.push(a * b);
            }
        }
        MeshFunction2D {
            domain_x: fx.domain(),
            domain_y: fy.domain(),
            values,
        }
    }

    pub fn domains(&self) -> (Domain, Domain) {
        (self.domain_x, self.domain_y)
    }

    pub fn nx(&self) -> usize {
        self.domain_x.cell_count()
    }

    pub fn ny(&self) -> usize {
        self.domain_y.cell_count()
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[ix * self.ny() + iy]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> MeshFunction2D {
        MeshFunction2D {
            domain_x: self.domain_x,
            domain_y: self.domain_y,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.values.chunks(self.ny()).map(|c| c.to_vec()).collect()
    }

    /// Slice in x at fixed y-cell (a function of x).
    pub fn slice_x(&self, iy: usize) -> MeshFunction1D {
        let vals = (0..self.nx()).map(|ix| self.get(ix, iy)).collect();
        MeshFunction1D {
            domain: self.domain_x,
            values: vals,
        }
    }

    /// Slice in y at fixed x-cell.
    pub fn slice_y(&self, ix: usize) -> MeshFunction1D {
        let vals = self.values[ix * self.ny()..(ix + 1) * self.ny()].to_vec();
        MeshFunction1D {
            domain: self.domain_y,
            values: vals,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeshWeight2D(MeshFunction2D);

impl MeshWeight2D {
    pub fn new(domain_x: Domain, domain_y: Domain, values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
            return Err(Error::NonPositiveWeight);
        }
        Ok(MeshWeight2D(MeshFunction2D::new(
            domain_x, domain_y, values,
        )?))
    }

    pub fn tensor(wx: &MeshWeight1D, wy: &MeshWeight1D) -> Self {
        MeshWeight2D(MeshFunction2D::tensor(wx.as_fn(), wy.as_fn()))
    }

    pub fn as_fn(&self) -> &MeshFunction2D {
        &self.0
    }
}

/// Summed-area table over mesh cells; box sums in O(1), wrap handled by the
/// caller splitting into unwrapped boxes.
pub struct Sat2 {
    p: Vec<f64>,
    nx: usize,
    ny: usize,
}

impl Sat2 {
    pub fn new(f: &MeshFunction2D, transform: impl Fn(f64) -> f64) -> Self {
        let (nx, ny) = (f.nx(), f.ny());
        let mut p = vec![0.0; (nx + 1) * (ny + 1)];
        for i in 0..nx {
            for j in 0..ny {
                p[(i + 1) * (ny + 1) + (j + 1)] =
                    transform(f.get(i, j)) + p[i * (ny + 1) + (j + 1)] + p[(i + 1) * (ny + 1) + j]
                        - p[i * (ny + 1) + j];
            }
        }
        Sat2 { p, nx, ny }
    }

    fn box_sum_raw(&self, i0: usize, i1: usize, j0: usize, j1: usize) -> f64 {
        let at = |i: usize, j: usize| self.p[i * (self.ny + 1) + j];
        at(i1, j1) - at(i0, j1) - at(i1, j0) + at(i0, j0)
    }

    /// Cell-count box sum with per-axis wrap: (start, len) per axis.
    pub fn box_sum_wrap(&self, sx: usize, lx: usize, sy: usize, ly: usize) -> f64 {
        let xs = split_wrap(sx, lx, self.nx);
        let ys = split_wrap(sy, ly, self.ny);
        let mut sum = 0.0;
        for (x0, x1) in xs.iter().flatten() {
            for (y0, y1) in ys.iter().flatten() {
                sum += self.box_sum_raw(*x0, *x1, *y0, *y1);
            }
        }
        sum
    }
}

fn split_wrap(start: usize, len: usize, n: usize) -> [Option<(usize, usize)>; 2] {
    if start + len <= n {
        [Some((start, start + len)), None]
    } else {
        [Some((start, n)), Some((0, start + len - n))]
    }
}

/// Comparability of averages: covers q by a grid interval I
/// and checks the two-sided bound with the measured common dyadic doubling
/// constant of the weight.
pub fn comparable_averages_check(
    w: &MeshWeight1D,
    delta: &Rational,
    q: &RatInterval,
) -> Result<VerificationReport> {
    let c_delta = to_f64(&covering_constant(delta)?);
    let c_dy = crate::weights::common_dyadic_doubling(w, delta)?;
    let (id, _ratio) = cover(q, delta)?;
    let i_rat = RatInterval::from_id(&id);
    let p = w.as_fn().prefix();
    let avg_q = w.as_fn().average_refined(q, &p)?;
    let avg_i = w.as_fn().average_refined(&i_rat, &p)?;
    let mut rep = VerificationReport::new("comparable-averages").with_delta(delta);
    rep.constant("avg_Q", avg_q);
    rep.constant("avg_I", avg_i);
    rep.constant("C_dy", c_dy);
    rep.constant("C_delta", c_delta);
    let lower = c_dy.powf(-(4.0 * c_delta).log2()) * avg_i;
    rep.check_le_rel("lower: Cdy^{-log2(4C)} avg_I <= avg_Q", lower, avg_q, 1e-9);
    rep.headline(
        "upper: avg_Q <= C(delta) avg_I",
        avg_q,
        c_delta * avg_i,
        1e-9,
    );
    Ok(rep)
}

// ---------------------------------------------------------------------------
// File formats: JSON ({"domain": ..., "values": [...]}) and one-column CSV
// with a header comment. f64 round-trips exactly (shortest-round-trip
// decimal in both serde_json and std formatting).
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct File1D {
    domain: Domain,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct File2D {
    domains: [Domain; 2],
    values: Vec<Vec<f64>>,
}

pub fn function_to_json(f: &MeshFunction1D) -> serde_json::Value {
    serde_json::to_value(File1D {
        domain: f.domain,
        values: f.values.clone(),
    })
    .unwrap()
}

pub fn function_from_json(v: &serde_json::Value) -> Result<MeshFunction1D> {
    let f: File1D = serde_json::from_value(v.clone())?;
    MeshFunction1D::new(f.domain, f.values)
}

pub fn weight_from_json(v: &serde_json::Value) -> Result<MeshWeight1D> {
    let f: File1D = serde_json::from_value(v.clone())?;
    MeshWeight1D::new(f.domain, f.values)
}

pub fn function2_to_json(f: &MeshFunction2D) -> serde_json::Value {
    serde_json::to_value(File2D {
        domains: [f.domain_x, f.domain_y],
        values: f.rows(),
    })
    .unwrap()
}

pub fn function2_from_json(v: &serde_json::Value) -> Result<MeshFunction2D> {
    let f: File2D = serde_json::from_value(v.clone())?;
    MeshFunction2D::from_rows(f.domains[0], f.domains[1], f.values)
}

pub fn weight2_from_json(v: &serde_json::Value) -> Result<MeshWeight2D> {
    let f = function2_from_json(v)?;
    MeshWeight2D::new(f.domain_x, f.domain_y, f.values)
}

pub fn function_to_csv(f: &MeshFunction1D) -> String {
    let header = match f.domain {
        Domain::Torus { finest_level } => format!("# domain: torus L={finest_level}\n"),
        Domain::Line {
            window_exponent,
            finest_level,
        } => {
            format!("# domain: line M={window_exponent} L={finest_level}\n")
        }
    };
    let mut out = header;
    for v in &f.values {
        out.push_str(&format!("{v}\n"));
    }
    out
}

pub fn function_from_csv(s: &str) -> Result<MeshFunction1D> {
    let mut lines = s.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty csv".into()))?;
    let header = header.trim_start_matches('#').trim();
    let domain = if let Some(rest) = header.strip_prefix("domain: torus L=") {
        Domain::torus(
            rest.trim()
                .parse()
                .map_err(|e| Error::Parse(format!("{e}")))?,
        )
    } else if let Some(rest) = header.strip_prefix("domain: line M=") {
        let mut parts = rest.split_whitespace();
        let m: i32 = parts
            .next()
            .ok_or_else(|| Error::Parse("missing M".into()))?
            .parse()
            .map_err(|e| Error::Parse(format!("{e}")))?;
        let l: i32 = parts
            .next()
            .and_then(|p| p.strip_prefix("L="))
            .ok_or_else(|| Error::Parse("missing L".into()))?
            .parse()
            .map_err(|e| Error::Parse(format!("{e}")))?;
        Domain::line(m, l)
    } else {
        return Err(Error::Parse(format!("bad csv header {header:?}")));
    };
    let values: Vec<f64> = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("{e}")))
        })
        .collect::<Result<_>>()?;
    MeshFunction1D::new(domain, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::ratio;

    fn step_torus(l: i32) -> MeshFunction1D {
        // 2 on [0, 1/2), 1 on [1/2, 1).
        let n = Domain::torus(l).cell_count();
        let vals = (0..n).map(|i| if i < n / 2 { 2.0 } else { 1.0 }).collect();
        MeshFunction1D::new(Domain::torus(l), vals).unwrap()
    }

    #[test]
    fn average_examples() {
        let dom = Domain::torus(3);
        let f = MeshFunction1D::constant(dom, 4.25);
        let q = RatInterval::new(ratio(1, 8), ratio(3, 8), dom).unwrap();
        assert_eq!(f.average(&q).unwrap(), 4.25);

        let f = step_torus(3);
        let q = RatInterval::new(ratio(1, 4), ratio(1, 2), dom).unwrap();
        assert_eq!(f.average(&q).unwrap(), 1.5);

        // Wrap arc [3/4, 1/4).
        let q = RatInterval::new(ratio(3, 4), ratio(1, 2), dom).unwrap();
        assert_eq!(f.average(&q).unwrap(), 1.5);

        // Non-aligned rejected by the aligned entry point.
        let q = RatInterval::new(ratio(1, 3), ratio(1, 2), dom).unwrap();
        assert!(matches!(f.average(&q), Err(Error::NotMeshAligned(_))));
    }

    #[test]
    fn weight_measure_examples() {
        let dom = Domain::torus(3);
        let w = MeshWeight1D::new(dom, vec![1.0; 8]).unwrap();
        let q = RatInterval::new(int(0), ratio(1, 2), dom).unwrap();
        assert_eq!(w.measure(&q).unwrap(), 0.5);

        let w = MeshWeight1D::new(dom, step_torus(3).values().to_vec()).unwrap();
        let full = RatInterval::new(int(0), int(1), dom).unwrap();
        assert!((w.measure(&full).unwrap() - 1.5).abs() < 1e-15);
        let right = RatInterval::new(ratio(1, 2), ratio(1, 2), dom).unwrap();
        assert!((w.measure(&right).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn refined_integral_cuts_cells_exactly() {
        let dom = Domain::torus(2);
        let f = MeshFunction1D::new(dom, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let p = f.prefix();
        // [1/3, 2/3) covers 1/4-1/3 of cell 1... exact pieces:
        // cells [1/4,1/2)=2 over [1/3,1/2) len 1/6; [1/2,2/3) in cell 2 len 1/6.
        let q = RatInterval::new(ratio(1, 3), ratio(1, 3), dom).unwrap();
        let got = f.integral_refined(&q, &p).unwrap();
        let want = 2.0 / 6.0 + 3.0 / 6.0;
        assert!((got - want).abs() < 1e-15, "{got} vs {want}");

        // Wrap arc [7/8, 1/8) on the same mesh.
        let q = RatInterval::new(ratio(7, 8), ratio(1, 4), dom).unwrap();
        let got = f.integral_refined(&q, &p).unwrap();
        assert!((got - (4.0 + 1.0) / 8.0).abs() < 1e-15);

        // Interval strictly inside one cell.
        let q = RatInterval::new(ratio(1, 16), ratio(1, 8), dom).unwrap();
        let got = f.integral_refined(&q, &p).unwrap();
        assert!((got - 1.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn enumerate_interval_counts() {
        // Torus L=1, min 1/2: two cell arcs plus the full circle.
        let c = enumerate_intervals(Domain::torus(1), &ratio(1, 2)).unwrap();
        assert_eq!(c.len(), 3);
        // Torus L=2, min 1/4: N(N-1)+1 = 13.
        let c = enumerate_intervals(Domain::torus(2), &ratio(1, 4)).unwrap();
        assert_eq!(c.len(), 13);
        // Line M=0, L=1 (4 cells), min 1/2: N(N+1)/2 = 10.
        let c = enumerate_intervals(Domain::line(0, 1), &ratio(1, 2)).unwrap();
        assert_eq!(c.len(), 10);
        // Uniqueness.
        let mut seen = std::collections::HashSet::new();
        for ai in &c {
            assert!(seen.insert((ai.start, ai.len)));
        }
    }

    #[test]
    fn average_linearity_and_union() {
        let dom = Domain::torus(4);
        let f =
            MeshFunction1D::new(dom, (0..16).map(|i| (i as f64 * 0.7).sin()).collect()).unwrap();
        let g =
            MeshFunction1D::new(dom, (0..16).map(|i| (i as f64 * 1.3).cos()).collect()).unwrap();
        let q = RatInterval::new(ratio(3, 16), ratio(5, 16), dom).unwrap();
        let sum = MeshFunction1D::new(
            dom,
            f.values()
                .iter()
                .zip(g.values())
                .map(|(a, b)| a + b)
                .collect(),
        )
        .unwrap();
        let lin = f.average(&q).unwrap() + g.average(&q).unwrap();
        assert!((sum.average(&q).unwrap() - lin).abs() < 1e-12);

        // Union of adjacent aligned intervals: length-weighted mean.
        let q1 = RatInterval::new(ratio(3, 16), ratio(2, 16), dom).unwrap();
        let q2 = RatInterval::new(ratio(5, 16), ratio(3, 16), dom).unwrap();
        let combined = (2.0 * f.average(&q1).unwrap() + 3.0 * f.average(&q2).unwrap()) / 5.0;
        assert!((f.average(&q).unwrap() - combined).abs() < 1e-12);
    }

    #[test]
    fn json_and_csv_round_trip() {
        let dom = Domain::line(1, 2);
        let f =
            MeshFunction1D::new(dom, (0..16).map(|i| 0.1 + (i as f64) / 3.0).collect()).unwrap();
        let j = function_to_json(&f);
        let f2 = function_from_json(&j).unwrap();
        assert_eq!(f.values(), f2.values());
        assert_eq!(f.domain(), f2.domain());

        let csv = function_to_csv(&f);
        let f3 = function_from_csv(&csv).unwrap();
        assert_eq!(f.values(), f3.values()); // bit-exact round trip
        assert_eq!(f.domain(), f3.domain());
    }

    #[test]
    fn sat2_box_sums() {
        let dx = Domain::torus(2);
        let f = MeshFunction2D::new(dx, dx, (0..16).map(|i| i as f64).collect()).unwrap();
        let sat = Sat2::new(&f, |v| v);
        let mut direct = 0.0;
        for i in 1..3 {
            for j in 2..4 {
                direct += f.get(i, j);
            }
        }
        assert_eq!(sat.box_sum_wrap(1, 2, 2, 2), direct);
        // Wrap across both axes.
        let mut direct = 0.0;
        for i in [3usize, 0] {
            for j in [3usize, 0, 1] {
                direct += f.get(i, j);
            }
        }
        assert_eq!(sat.box_sum_wrap(3, 2, 3, 3), direct);
    }
}
