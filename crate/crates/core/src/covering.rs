//! Covering machinery: the two-grid covering lemma with constant
//! C(delta) = 2/d(delta), the inner-interval search, the two-adjacent-dyadic
//! cover, and the naive-shift counterexample search.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::exact::{
    ceil_big, floor_log2, format_rational, frac_mod_one, int, pow2, relative_distance, Rational,
};
use crate::grids::{Domain, GridSpec, IntervalId};

/// An interval with exact rational endpoints: [left, left + len). On the
/// torus the arc may wrap and left is kept in [0, 1); on the line it need not
/// sit inside the sampling window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RatInterval {
    pub left: Rational,
    pub len: Rational,
    pub domain: Domain,
}

impl RatInterval {
    pub fn new(left: Rational, len: Rational, domain: Domain) -> Result<Self> {
        if !len.is_positive() {
            return Err(Error::EmptyInterval);
        }
        if domain.is_torus() {
            if len > int(1) {
                return Err(Error::Config("torus arc longer than the circle".into()));
            }
            return Ok(RatInterval {
                left: frac_mod_one(&left),
                len,
                domain,
            });
        }
        Ok(RatInterval { left, len, domain })
    }

    pub fn from_id(id: &IntervalId) -> Self {
        RatInterval {
            left: id.left(),
            len: id.len(),
            domain: id.grid.domain,
        }
    }

    pub fn right(&self) -> Rational {
        self.left.clone() + self.len.clone()
    }

    pub fn contains_point(&self, x: &Rational) -> bool {
        if self.domain.is_torus() {
            if self.len == int(1) {
                return true;
            }
            frac_mod_one(&(x - &self.left)) < self.len
        } else {
            *x >= self.left && *x < self.right()
        }
    }

    pub fn contains_interval(&self, other: &RatInterval) -> bool {
        if self.domain.is_torus() {
            if self.len == int(1) {
                return true;
            }
            if other.len > self.len {
                return false;
            }
            frac_mod_one(&(&other.left - &self.left)) + other.len.clone() <= self.len
        } else {
            self.left <= other.left && other.right() <= self.right()
        }
    }

    /// Midpoint, reduced on the torus.
    pub fn midpoint(&self) -> Rational {
        let m = self.left.clone() + self.len.clone() / int(2);
        if self.domain.is_torus() {
            frac_mod_one(&m)
        } else {
            m
        }
    }

    /// The concentric double; the full circle when it would wrap onto itself.
    pub fn double(&self) -> RatInterval {
        let mid = self.left.clone() + self.len.clone() / int(2);
        let len = self.len.clone() * int(2);
        if self.domain.is_torus() && len >= int(1) {
            return RatInterval {
                left: int(0),
                len: int(1),
                domain: self.domain,
            };
        }
        RatInterval::new(mid - self.len.clone(), len, self.domain).unwrap()
    }
}

/// Like `grids::locate` but without window or level-range checks: covering is
/// global geometry and may step outside the sampled domain.
pub(crate) fn locate_global(grid: &GridSpec, level: i32, x: &Rational) -> IntervalId {
    let shift = grid.shift_at(level);
    let scale = pow2(level as i64);
    let k = if grid.domain.is_torus() {
        crate::exact::floor_big(&(frac_mod_one(&(x - shift)) * scale))
    } else {
        crate::exact::floor_big(&((x - shift) * scale))
    };
    IntervalId::new(grid.clone(), level, k)
}

fn check_delta(delta: &Rational) -> Result<Rational> {
    let d = relative_distance(delta)?;
    if d.is_zero() {
        return Err(Error::DyadicDelta(format_rational(delta)));
    }
    Ok(d)
}

/// Covering lemma: an interval I in the standard or shifted grid with
/// Q inside I and |I| <= (2/d(delta)) |Q|.
///
/// Level selection is the exact inequality d * 2^-(n+1) <= |Q| < d * 2^-n;
/// at that level Q meets at most one endpoint of either grid, so one grid
/// has no endpoint interior to Q and its level-n interval through Q's left
/// endpoint contains Q. Ties prefer the standard grid. On the torus a Q too
/// long for any positive level is covered by the whole circle.
pub fn cover(q: &RatInterval, delta: &Rational) -> Result<(IntervalId, Rational)> {
    let shift = crate::exact::AdmissibleShift::new(delta)?;
    cover_with(q, &shift)
}

/// `cover` with the shift diagnostics precomputed (hot-loop entry point).
pub fn cover_with(
    q: &RatInterval,
    shift: &crate::exact::AdmissibleShift,
) -> Result<(IntervalId, Rational)> {
    let n = -floor_log2(&(q.len.clone() / &shift.distance)) - 1;
    let n: i32 = n
        .try_into()
        .map_err(|_| Error::Internal("level overflow".into()))?;
    if q.domain.is_torus() && n < 0 {
        let id = IntervalId::new(GridSpec::standard(q.domain), 0, 0);
        let ratio = int(1) / q.len.clone();
        return Ok((id, ratio));
    }
    let ratio = pow2(-(n as i64)) / q.len.clone();
    let std = GridSpec::standard(q.domain);
    let id = locate_global(&std, n, &q.left);
    if RatInterval::from_id(&id).contains_interval(q) {
        return Ok((id, ratio));
    }
    let shifted = GridSpec::shifted_unchecked(shift.delta.clone(), q.domain);
    let id = locate_global(&shifted, n, &q.left);
    if RatInterval::from_id(&id).contains_interval(q) {
        return Ok((id, ratio));
    }
    Err(Error::Internal(format!(
        "covering failed at level {n} for Q = [{}, {}+{})",
        q.left, q.left, q.len
    )))
}

/// Inner-interval search: the largest grid interval (either grid) inside Q,
/// scanning levels from the coarsest with 2^-n <= |Q| down to the mesh.
/// The returned ratio |I'|/|Q| is at least d(delta)/4.
pub fn inner(q: &RatInterval, delta: &Rational) -> Result<(IntervalId, Rational)> {
    check_delta(delta)?;
    if q.domain.is_torus() && q.len == int(1) {
        let id = IntervalId::new(GridSpec::standard(q.domain), 0, 0);
        return Ok((id, int(1)));
    }
    let n0 = -floor_log2(&q.len);
    let n0: i32 = n0
        .try_into()
        .map_err(|_| Error::Internal("level overflow".into()))?;
    let n0 = if q.domain.is_torus() { n0.max(0) } else { n0 };
    let std = GridSpec::standard(q.domain);
    let shifted = GridSpec::shifted(delta.clone(), q.domain)?;
    for n in n0..=q.domain.finest_level() {
        for grid in [&std, &shifted] {
            let len = pow2(-(n as i64));
            let shift = grid.shift_at(n);
            // First grid endpoint at or after the left end of Q.
            let k = ceil_big(&((q.left.clone() - &shift) * pow2(n as i64)));
            let e = shift + Rational::from_integer(k.clone()) * len.clone();
            if e.clone() + len.clone() <= q.left.clone() + q.len.clone() {
                let index = if q.domain.is_torus() {
                    let modulus = BigInt::one() << n.max(0) as usize;
                    ((k % &modulus) + &modulus) % &modulus
                } else {
                    k
                };
                let id = IntervalId::new(grid.clone(), n, index);
                let ratio = len / q.len.clone();
                return Ok((id, ratio));
            }
        }
    }
    Err(Error::NoInnerInterval)
}

/// Two adjacent equal-length standard dyadic intervals J1, J2 with
/// K inside their union and |J1|/2 < |K| <= |J1|. Always returns a genuine
/// pair even when K fits inside J1 alone.
pub fn two_dyadic_cover(k: &RatInterval) -> Result<(IntervalId, IntervalId)> {
    if k.domain.is_torus() {
        return Err(Error::Config("two_dyadic_cover is a line operation".into()));
    }
    let e = floor_log2(&k.len);
    let big_n = if k.len == pow2(e) { e } else { e + 1 };
    let level: i32 = (-big_n)
        .try_into()
        .map_err(|_| Error::Internal("level overflow".into()))?;
    let std = GridSpec::standard(k.domain);
    let j1 = locate_global(&std, level, &k.left);
    let j2 = IntervalId::new(std, level, j1.index.clone() + BigInt::one());
    Ok((j1, j2))
}

/// Search the standard and naively shifted grids, from the finest level that
/// could contain Q down to level -max_level_drop, for the smallest interval
/// containing Q. Absence (None) is the documented outcome for intervals with
/// both 0 and delta interior.
pub fn cover_naive(
    q: &RatInterval,
    delta: &Rational,
    max_level_drop: i32,
) -> Result<Option<(IntervalId, Rational)>> {
    if q.domain.is_torus() {
        return Err(Error::Config("cover_naive is a line operation".into()));
    }
    check_delta(delta)?;
    let e = floor_log2(&q.len);
    let n_start64 = if q.len == pow2(e) { -e } else { -e - 1 };
    let n_start: i32 = n_start64
        .try_into()
        .map_err(|_| Error::Internal("level overflow".into()))?;
    let std = GridSpec::standard(q.domain);
    let naive = GridSpec::naive_shifted(delta.clone(), q.domain)?;
    let mut n = n_start;
    while n >= -max_level_drop {
        for grid in [&std, &naive] {
            let id = locate_global(grid, n, &q.left);
            if RatInterval::from_id(&id).contains_interval(q) {
                let ratio = pow2(-(n as i64)) / q.len.clone();
                return Ok(Some((id, ratio)));
            }
        }
        n -= 1;
    }
    Ok(None)
}

/// Exhaustive oracle used by tests: all level-n intervals of both grids that
/// contain Q, at a fixed level.
pub fn covering_candidates_at_level(
    q: &RatInterval,
    delta: &Rational,
    level: i32,
) -> Result<Vec<IntervalId>> {
    let std = GridSpec::standard(q.domain);
    let shifted = GridSpec::shifted(delta.clone(), q.domain)?;
    let mut out = Vec::new();
    for grid in [std, shifted] {
        let id = locate_global(&grid, level, &q.left);
        if RatInterval::from_id(&id).contains_interval(q) {
            out.push(id);
        }
    }
    Ok(out)
}
