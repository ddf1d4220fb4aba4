//! Approximate extreme subsets of point clouds and farthest-pair search.
//!
//! Hull distances are computed in kernel form: only the members' Gram
//! matrix and each point's inner products with the members are needed.
//! Construction brackets them with warm-started away-step Frank–Wolfe;
//! standalone queries use Wolfe's minimum-norm-point method.

use std::borrow::Cow;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{KoptError, Result};

const WOLFE_MAX_ITER: usize = 1000;
/// Relative accuracy of hull distances, in units of the diameter estimate.
const HULL_ACCURACY: f64 = 1e-6;
/// Frank–Wolfe steps per heap visit during construction.
const REFINE_BUDGET: usize = 64;
/// Bracket width, relative to the upper bound, at which a point's hull
/// distance counts as known during construction.
const HULL_RELATIVE_GAP: f64 = 0.05;
/// Member rows per Gram block in the pair search.
const PAIR_BLOCK: usize = 256;
/// Largest member set; its Gram matrix is held densely.
pub const MAX_HULL_MEMBERS: usize = 12_000;
/// Scores within this relative gap of the maximum count as ties.
pub(crate) const TIE_TOLERANCE: f64 = 1e-10;

/// Points indexed by id; point `k` of the cloud is node `ids[k]` and its
/// coordinates sit at `data[ids[k]*dim ..]`.
#[derive(Clone, Debug)]
pub struct PointCloud<'a> {
    ids: Vec<usize>,
    dim: usize,
    data: Cow<'a, [f64]>,
}

impl<'a> PointCloud<'a> {
    /// Borrows node-major coordinates (e.g. an embedding) restricted to
    /// `ids`.
    pub fn from_node_major(ids: Vec<usize>, dim: usize, data: &'a [f64]) -> Self {
        assert!(dim > 0);
        for &i in &ids {
            assert!((i + 1) * dim <= data.len(), "id {i} outside coordinate array");
        }
        PointCloud {
            ids,
            dim,
            data: Cow::Borrowed(data),
        }
    }

    /// Owns the given points; ids are their positions.
    pub fn from_points(points: &[Vec<f64>]) -> PointCloud<'static> {
        let dim = points.first().map_or(1, Vec::len).max(1);
        let mut data = Vec::with_capacity(points.len() * dim);
        for p in points {
            assert_eq!(p.len(), dim, "uniform dimension");
            data.extend_from_slice(p);
        }
        PointCloud {
            ids: (0..points.len()).collect(),
            dim,
            data: Cow::Owned(data),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    /// Coordinates of the `k`-th point.
    pub fn point(&self, k: usize) -> &[f64] {
        let i = self.ids[k];
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    fn position_of(&self, id: usize) -> Option<usize> {
        self.ids.iter().position(|&i| i == id)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Member subset whose hull covers the cloud up to `hull_tol`.
#[derive(Clone, Debug)]
pub struct ExtremeSubset {
    /// Member ids in insertion order.
    pub members: Vec<usize>,
    /// Positions of the members in the cloud.
    pub positions: Vec<usize>,
    pub hull_tol: f64,
    pub d_est: f64,
    /// Largest certified hull distance at termination.
    pub max_residual: f64,
    /// Set when a member was added before its distance bracket closed.
    pub capped: bool,
}

impl ExtremeSubset {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Distance from a point to a member hull, bracketed by `[lower, upper]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HullDistance {
    pub upper: f64,
    pub lower: f64,
    pub capped: bool,
}

impl HullDistance {
    pub fn value(&self) -> f64 {
        self.upper
    }
}

/// Wolfe's minimum-norm point of `conv{z_i}` where
/// `⟨z_i, z_j⟩ = G_ij − a_i − a_j + pp`. Stops once the duality gap is at
/// most `gap` or the upper bound drops to `stop_below`.
fn min_norm_kernel(gram: &DMatrix<f64>, a: &[f64], pp: f64, gap: f64, stop_below: f64) -> HullDistance {
    let l = a.len();
    let k = |i: usize, j: usize| gram[(i, j)] - a[i] - a[j] + pp;
    let first = (0..l)
        .min_by(|&i, &j| k(i, i).total_cmp(&k(j, j)))
        .expect("nonempty member set");
    let mut set = vec![first];
    let mut w = vec![1.0];
    let mut lower = 0.0f64;
    let mut upper;
    let mut iter = 0;
    loop {
        // g_j = ⟨x, z_j⟩ for all members
        let g: Vec<f64> = (0..l)
            .map(|j| set.iter().zip(&w).map(|(&i, &wi)| wi * k(i, j)).sum())
            .collect();
        let xx: f64 = set.iter().zip(&w).map(|(&i, &wi)| wi * g[i]).sum::<f64>().max(0.0);
        upper = xx.sqrt();
        let (jstar, gmin) = g
            .iter()
            .copied()
            .enumerate()
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .expect("nonempty");
        if upper > 0.0 {
            lower = lower.max(gmin / upper);
        }
        if upper <= stop_below || upper - lower.max(0.0) <= gap || upper == 0.0 {
            break;
        }
        if iter >= WOLFE_MAX_ITER || set.contains(&jstar) {
            return HullDistance {
                upper,
                lower: lower.max(0.0),
                capped: iter >= WOLFE_MAX_ITER,
            };
        }
        iter += 1;
        set.push(jstar);
        w.push(0.0);
        // minor cycles
        loop {
            let s = set.len();
            let mut sys = DMatrix::zeros(s + 1, s + 1);
            for (r, &i) in set.iter().enumerate() {
                for (c, &j) in set.iter().enumerate() {
                    sys[(r, c)] = k(i, j);
                }
                sys[(r, s)] = 1.0;
                sys[(s, r)] = 1.0;
            }
            let mut rhs = DVector::zeros(s + 1);
            rhs[s] = 1.0;
            let Some(v) = sys.lu().solve(&rhs) else {
                set.pop();
                w.pop();
                return HullDistance {
                    upper,
                    lower: lower.max(0.0),
                    capped: false,
                };
            };
            let v: Vec<f64> = v.iter().take(s).copied().collect();
            if v.iter().all(|&x| x > 1e-12) {
                w = v;
                break;
            }
            let mut theta = 1.0f64;
            for (wi, vi) in w.iter().zip(&v) {
                if *vi <= 1e-12 && wi - vi > 0.0 {
                    theta = theta.min(wi / (wi - vi));
                }
            }
            for (wi, vi) in w.iter_mut().zip(&v) {
                *wi += theta * (vi - *wi);
            }
            let mut keep_set = Vec::with_capacity(s);
            let mut keep_w = Vec::with_capacity(s);
            for (&i, &wi) in set.iter().zip(&w) {
                if wi > 1e-12 {
                    keep_set.push(i);
                    keep_w.push(wi);
                }
            }
            let total: f64 = keep_w.iter().sum();
            keep_w.iter_mut().for_each(|x| *x /= total);
            set = keep_set;
            w = keep_w;
        }
    }
    HullDistance {
        upper,
        lower: lower.max(0.0).min(upper),
        capped: false,
    }
}

/// Gram matrix of the members and cached point–member inner products.
struct MemberGeometry<'c, 'a> {
    cloud: &'c PointCloud<'a>,
    positions: Vec<usize>,
    gram: DMatrix<f64>,
}

impl<'c, 'a> MemberGeometry<'c, 'a> {
    fn new(cloud: &'c PointCloud<'a>, positions: &[usize]) -> Self {
        let mut g = MemberGeometry {
            cloud,
            positions: Vec::new(),
            gram: DMatrix::zeros(0, 0),
        };
        for &p in positions {
            g.push(p);
        }
        g
    }

    fn push(&mut self, pos: usize) {
        let l = self.positions.len();
        let mut gram = DMatrix::zeros(l + 1, l + 1);
        gram.view_mut((0, 0), (l, l)).copy_from(&self.gram);
        let x = self.cloud.point(pos);
        for (r, &q) in self.positions.iter().enumerate() {
            let v = dot(x, self.cloud.point(q));
            gram[(r, l)] = v;
            gram[(l, r)] = v;
        }
        gram[(l, l)] = dot(x, x);
        self.gram = gram;
        self.positions.push(pos);
    }

    /// Extends `cache` with inner products against members added since it
    /// was last filled, then measures the distance.
    fn distance(&self, point: &[f64], cache: &mut Vec<f64>, gap: f64, stop_below: f64) -> HullDistance {
        for &q in &self.positions[cache.len()..] {
            cache.push(dot(point, self.cloud.point(q)));
        }
        min_norm_kernel(&self.gram, cache, dot(point, point), gap, stop_below)
    }
}

#[derive(PartialEq)]
struct Entry {
    upper: f64,
    pos: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.upper
            .total_cmp(&other.upper)
            .then_with(|| other.pos.cmp(&self.pos))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn farthest_from(cloud: &PointCloud, from: usize) -> (usize, f64) {
    let x = cloud.point(from);
    (0..cloud.len())
        .map(|k| (k, dist_sq(x, cloud.point(k))))
        .fold((from, 0.0), |best, c| if c.1 > best.1 { c } else { best })
}

/// Members during construction, with their Gram matrix stored by rows.
struct Growing<'c, 'a> {
    cloud: &'c PointCloud<'a>,
    positions: Vec<usize>,
    gram: Vec<Vec<f64>>,
}

impl Growing<'_, '_> {
    fn push(&mut self, pos: usize) {
        let x = self.cloud.point(pos);
        let row: Vec<f64> = self
            .positions
            .iter()
            .map(|&q| dot(x, self.cloud.point(q)))
            .chain(std::iter::once(dot(x, x)))
            .collect();
        for (r, v) in self.gram.iter_mut().zip(&row) {
            r.push(*v);
        }
        self.gram.push(row);
        self.positions.push(pos);
    }
}

/// Bracket on one point's hull distance after a refinement visit.
struct Visit {
    upper: f64,
    lower: f64,
    exhausted: bool,
}

/// Away-step Frank–Wolfe on `min ‖p − x‖²` over the member hull, warm
/// started from `support` (member index, weight). Stops once the point is
/// within `tol`, the bracket is relatively tight, or `budget` steps ran.
fn refine(geo: &Growing, p: &[f64], support: &mut Vec<(usize, f64)>, tol: f64, budget: usize) -> Visit {
    let l = geo.positions.len();
    let c: Vec<f64> = geo.positions.iter().map(|&q| dot(p, geo.cloud.point(q))).collect();
    let pp = dot(p, p);
    if support.is_empty() {
        let near = (0..l)
            .min_by(|&i, &j| (geo.gram[i][i] - 2.0 * c[i]).total_cmp(&(geo.gram[j][j] - 2.0 * c[j])))
            .expect("members");
        support.push((near, 1.0));
    }
    let mut gx = vec![0.0; l];
    for &(i, w) in support.iter() {
        for (g, k) in gx.iter_mut().zip(&geo.gram[i]) {
            *g += w * k;
        }
    }
    let mut xx: f64 = support.iter().map(|&(i, w)| w * gx[i]).sum();
    let mut px: f64 = support.iter().map(|&(i, w)| w * c[i]).sum();
    let mut lower = 0.0f64;
    let mut steps = 0;
    loop {
        let f = (pp - 2.0 * px + xx).max(0.0);
        let upper = f.sqrt();
        // score_k = ⟨x − p, s_k⟩
        let (j, sj) = (0..l)
            .map(|k| (k, gx[k] - c[k]))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("members");
        let base = xx - px;
        if upper > 0.0 {
            lower = lower.max((pp - px + sj) / upper);
        }
        if upper <= tol || upper - lower <= HULL_RELATIVE_GAP * upper || upper == 0.0 {
            return Visit {
                upper,
                lower: lower.clamp(0.0, upper),
                exhausted: false,
            };
        }
        if steps == budget {
            return Visit {
                upper,
                lower: lower.clamp(0.0, upper),
                exhausted: true,
            };
        }
        steps += 1;
        let gap_fw = base - sj;
        let (a, sa, wa) = support
            .iter()
            .map(|&(i, w)| (i, gx[i] - c[i], w))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .expect("nonempty support");
        let gap_away = sa - base;
        if gap_fw >= gap_away || wa >= 1.0 {
            let dd = geo.gram[j][j] - 2.0 * gx[j] + xx;
            if dd <= 0.0 || gap_fw <= 0.0 {
                return Visit { upper, lower: upper, exhausted: false };
            }
            let lam = (gap_fw / dd).min(1.0);
            xx = (1.0 - lam) * (1.0 - lam) * xx + 2.0 * lam * (1.0 - lam) * gx[j] + lam * lam * geo.gram[j][j];
            px = (1.0 - lam) * px + lam * c[j];
            for (g, k) in gx.iter_mut().zip(&geo.gram[j]) {
                *g = (1.0 - lam) * *g + lam * k;
            }
            support.iter_mut().for_each(|e| e.1 *= 1.0 - lam);
            match support.iter_mut().find(|e| e.0 == j) {
                Some(e) => e.1 += lam,
                None => support.push((j, lam)),
            }
        } else {
            let dd = xx - 2.0 * gx[a] + geo.gram[a][a];
            if dd <= 0.0 {
                return Visit { upper, lower: upper, exhausted: false };
            }
            let lam = (gap_away / dd).min(wa / (1.0 - wa));
            xx = (1.0 + lam) * (1.0 + lam) * xx - 2.0 * lam * (1.0 + lam) * gx[a] + lam * lam * geo.gram[a][a];
            px = (1.0 + lam) * px - lam * c[a];
            for (g, k) in gx.iter_mut().zip(&geo.gram[a]) {
                *g = (1.0 + lam) * *g - lam * k;
            }
            support.iter_mut().for_each(|e| e.1 *= 1.0 + lam);
            if let Some(e) = support.iter_mut().find(|e| e.0 == a) {
                e.1 -= lam;
            }
            support.retain(|e| e.1 > 1e-14);
        }
    }
}

/// Greedy extreme subset: starting from a double-sweep diameter pair, add
/// the point farthest from the members' hull until every point lies within
/// `mu · d_est` of it. Distances are bracketed lazily; the point added is
/// the one with the largest upper bound once its bracket is within
/// `HULL_RELATIVE_GAP` (or its refinement budget is spent).
pub fn approx_convex_hull(cloud: &PointCloud, mu: f64) -> Result<ExtremeSubset> {
    if cloud.is_empty() {
        return Err(KoptError::InvalidParameter("point cloud is empty".into()));
    }
    if !(mu > 0.0 && mu < 1.0) {
        return Err(KoptError::InvalidParameter(format!("mu must lie in (0, 1), got {mu}")));
    }
    let (q, _) = farthest_from(cloud, 0);
    let (r, d2) = farthest_from(cloud, q);
    let d_est = d2.sqrt();
    let hull_tol = mu * d_est;
    if d_est == 0.0 {
        return Ok(ExtremeSubset {
            members: vec![cloud.ids()[0]],
            positions: vec![0],
            hull_tol,
            d_est,
            max_residual: 0.0,
            capped: false,
        });
    }
    let mut geo = Growing {
        cloud,
        positions: Vec::new(),
        gram: Vec::new(),
    };
    geo.push(q);
    geo.push(r);
    let mut supports: Vec<Vec<(usize, f64)>> = vec![Vec::new(); cloud.len()];
    let mut heap: BinaryHeap<Entry> = (0..cloud.len())
        .filter(|&pos| pos != q && pos != r)
        .map(|pos| Entry {
            upper: f64::INFINITY,
            pos,
        })
        .collect();
    let mut capped = false;
    let mut max_residual: f64 = 0.0;
    while let Some(top) = heap.pop() {
        if top.upper <= hull_tol {
            max_residual = max_residual.max(top.upper);
            break;
        }
        let visit = refine(&geo, cloud.point(top.pos), &mut supports[top.pos], hull_tol, REFINE_BUDGET);
        if visit.upper <= hull_tol {
            max_residual = max_residual.max(visit.upper);
            supports[top.pos] = Vec::new();
            continue;
        }
        let next = heap.peek().map_or(0.0, |e| e.upper);
        if visit.upper >= next && (!visit.exhausted || visit.lower > hull_tol) {
            if geo.positions.len() == MAX_HULL_MEMBERS {
                return Err(KoptError::HullTooLarge {
                    limit: MAX_HULL_MEMBERS,
                    points: cloud.len(),
                });
            }
            capped |= visit.exhausted;
            supports[top.pos] = Vec::new();
            geo.push(top.pos);
        } else {
            heap.push(Entry {
                upper: visit.upper,
                pos: top.pos,
            });
        }
    }
    let positions = geo.positions;
    Ok(ExtremeSubset {
        members: positions.iter().map(|&p| cloud.ids()[p]).collect(),
        positions,
        hull_tol,
        d_est,
        max_residual,
        capped,
    })
}

/// Distance from `point` to the convex hull of the subset's members.
pub fn distance_to_hull(point: &[f64], subset: &ExtremeSubset, cloud: &PointCloud) -> Result<HullDistance> {
    if subset.positions.is_empty() {
        return Err(KoptError::InvalidParameter("extreme subset is empty".into()));
    }
    let geo = MemberGeometry::new(cloud, &subset.positions);
    let scale = if subset.d_est > 0.0 {
        subset.d_est
    } else {
        1.0
    };
    Ok(geo.distance(point, &mut Vec::new(), HULL_ACCURACY * scale, 0.0))
}

/// Hull distance of every cloud point, sharing one member Gram matrix.
pub fn hull_residuals(subset: &ExtremeSubset, cloud: &PointCloud) -> Result<Vec<HullDistance>> {
    if subset.positions.is_empty() {
        return Err(KoptError::InvalidParameter("extreme subset is empty".into()));
    }
    let geo = MemberGeometry::new(cloud, &subset.positions);
    let gap = HULL_ACCURACY * if subset.d_est > 0.0 { subset.d_est } else { 1.0 };
    Ok((0..cloud.len())
        .into_par_iter()
        .map(|k| geo.distance(cloud.point(k), &mut Vec::new(), gap, 0.0))
        .collect())
}

/// Member pair at maximum squared distance, skipping pairs for which
/// `excluded(u, v)` holds. Near-ties go to the lexicographically smallest
/// `(min id, max id)`.
pub fn farthest_pair(
    cloud: &PointCloud,
    subset: &ExtremeSubset,
    excluded: impl Fn(usize, usize) -> bool + Sync,
) -> Result<(usize, usize, f64)> {
    let mut members: Vec<(usize, usize)> = subset
        .positions
        .iter()
        .map(|&p| (cloud.ids()[p], p))
        .collect();
    members.sort_unstable();
    let l = members.len();
    let dim = cloud.dim();
    let coords = DMatrix::from_fn(dim, l, |r, c| cloud.point(members[c].1)[r]);
    let norms: Vec<f64> = (0..l).map(|c| coords.column(c).norm_squared()).collect();
    let slack = 1e-9 * norms.iter().copied().fold(0.0, f64::max);
    // squared distances from Gram blocks; near-maximal pairs are rescored
    // exactly
    let blocks: Vec<(f64, Vec<(usize, usize, f64)>)> = (0..l)
        .step_by(PAIR_BLOCK)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|a0| {
            let rows = PAIR_BLOCK.min(l - a0);
            let block = coords.columns(a0, rows).tr_mul(&coords.columns(a0, l - a0));
            let mut top = f64::NEG_INFINITY;
            let mut keep: Vec<(usize, usize, f64)> = Vec::new();
            for i in 0..rows {
                let a = a0 + i;
                for b in a + 1..l {
                    let d = norms[a] + norms[b] - 2.0 * block[(i, b - a0)];
                    if d < top - slack || excluded(members[a].0, members[b].0) {
                        continue;
                    }
                    if d > top {
                        top = d;
                        keep.retain(|e| e.2 >= top - slack);
                    }
                    keep.push((a, b, d));
                }
            }
            (top, keep)
        })
        .collect();
    let top = blocks.iter().map(|b| b.0).fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return Err(KoptError::HullExhausted);
    }
    let exact: Vec<(usize, usize, f64)> = blocks
        .iter()
        .flat_map(|b| &b.1)
        .filter(|s| s.2 >= top - slack)
        .map(|&(a, b, _)| {
            let (u, pu) = members[a];
            let (v, pv) = members[b];
            (u, v, dist_sq(cloud.point(pu), cloud.point(pv)))
        })
        .collect();
    let best = exact.iter().map(|s| s.2).fold(f64::NEG_INFINITY, f64::max);
    let cut = best * (1.0 - TIE_TOLERANCE);
    Ok(*exact
        .iter()
        .find(|s| s.2 >= cut)
        .expect("maximum is attained"))
}

/// Cloud position of an id, for callers holding ids only.
pub fn position_in(cloud: &PointCloud, id: usize) -> Option<usize> {
    cloud.position_of(id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sorted(mut v: Vec<usize>) -> Vec<usize> {
        v.sort_unstable();
        v
    }

    fn square_with_center() -> Vec<Vec<f64>> {
        vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
            vec![0.5, 0.5],
        ]
    }

    #[test]
    fn square_keeps_corners() {
        let cloud = PointCloud::from_points(&square_with_center());
        let h = approx_convex_hull(&cloud, 0.01).unwrap();
        assert_eq!(sorted(h.members.clone()), vec![0, 1, 2, 3]);
    }

    #[test]
    fn collinear_keeps_endpoints() {
        let pts: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64 * 0.5, 1.0 + i as f64]).collect();
        let cloud = PointCloud::from_points(&pts);
        let h = approx_convex_hull(&cloud, 0.01).unwrap();
        assert_eq!(sorted(h.members), vec![0, 6]);
    }

    #[test]
    fn singleton_cloud() {
        let cloud = PointCloud::from_points(&[vec![3.0, 4.0]]);
        let h = approx_convex_hull(&cloud, 0.1).unwrap();
        assert_eq!(h.members, vec![0]);
    }

    #[test]
    fn hull_distances() {
        let cloud = PointCloud::from_points(&square_with_center());
        let h = approx_convex_hull(&cloud, 0.01).unwrap();
        assert!(distance_to_hull(&[0.5, 0.5], &h, &cloud).unwrap().value() < 1e-6);
        assert!(distance_to_hull(&[1.0, 1.0], &h, &cloud).unwrap().value() < 1e-6);
        let d = distance_to_hull(&[0.3, 2.0], &h, &cloud).unwrap();
        assert!((d.value() - 1.0).abs() < 1e-6);
        assert!(d.lower <= d.upper);

        let seg = PointCloud::from_points(&[vec![0.0, 0.0], vec![4.0, 0.0]]);
        let h = approx_convex_hull(&seg, 0.01).unwrap();
        let d = distance_to_hull(&[2.5, -1.0], &h, &seg).unwrap();
        assert!((d.value() - 1.0).abs() <= 1e-6);
        let d = distance_to_hull(&[5.0, 0.0], &h, &seg).unwrap();
        assert!((d.value() - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn farthest_pair_with_exclusions() {
        let cloud = PointCloud::from_points(&square_with_center());
        let h = approx_convex_hull(&cloud, 0.01).unwrap();
        let (u, v, d) = farthest_pair(&cloud, &h, |_, _| false).unwrap();
        assert_eq!((u, v), (0, 2));
        assert!((d - 2.0).abs() < 1e-12);
        let diag = |a: usize, b: usize| (a, b) == (0, 2) || (a, b) == (1, 3);
        let (u, v, d) = farthest_pair(&cloud, &h, diag).unwrap();
        assert_eq!((u, v), (0, 1));
        assert!((d - 1.0).abs() < 1e-12);
        assert!(matches!(farthest_pair(&cloud, &h, |_, _| true), Err(KoptError::HullExhausted)));
    }

    #[test]
    fn embedded_path3_cloud() {
        // columns of L† for P₃
        let lp = oracle::pinv_eigen(&crate::generators::path(3));
        let pts: Vec<Vec<f64>> = (0..3).map(|i| lp.column(i).iter().copied().collect()).collect();
        let cloud = PointCloud::from_points(&pts);
        let h = approx_convex_hull(&cloud, 0.01).unwrap();
        let edge = |a: usize, b: usize| b == a + 1;
        let (u, v, d) = farthest_pair(&cloud, &h, edge).unwrap();
        assert_eq!((u, v), (0, 2));
        assert!((d - 2.0).abs() < 1e-12);
    }

    #[test]
    fn random_cloud_diameter_is_kept() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let pts: Vec<Vec<f64>> = (0..500)
            .map(|_| (0..20).map(|_| rng.gen::<f64>() - 0.5).collect())
            .collect();
        let cloud = PointCloud::from_points(&pts);
        let mu = 0.01;
        let h = approx_convex_hull(&cloud, mu).unwrap();
        let (exact, _) = oracle::diameter_sq(&pts);
        let (_, _, sub) = farthest_pair(&cloud, &h, |_, _| false).unwrap();
        assert!(sub >= (1.0 - 8.0 * mu) * exact);
        for d in hull_residuals(&h, &cloud).unwrap() {
            assert!(d.lower <= h.hull_tol + 1e-9);
        }
    }

    #[test]
    fn members_are_exact_extremes_for_small_mu() {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<[f64; 2]> = (0..60).map(|_| [rng.gen(), rng.gen()]).collect();
            let v: Vec<Vec<f64>> = pts.iter().map(|p| p.to_vec()).collect();
            let cloud = PointCloud::from_points(&v);
            let h = approx_convex_hull(&cloud, 1e-4).unwrap();
            let exact = oracle::hull_2d(&pts);
            let got = sorted(h.members);
            assert!(got.iter().all(|m| exact.contains(m)), "non-extreme member");
            // every hull vertex farther than the tolerance must be a member
            for &e in &exact {
                if !got.contains(&e) {
                    let others: Vec<Vec<f64>> = got.iter().map(|&g| v[g].clone()).collect();
                    let c2 = PointCloud::from_points(&others);
                    let sub = ExtremeSubset {
                        members: (0..others.len()).collect(),
                        positions: (0..others.len()).collect(),
                        hull_tol: h.hull_tol,
                        d_est: h.d_est,
                        max_residual: 0.0,
                        capped: false,
                    };
                    assert!(distance_to_hull(&v[e], &sub, &c2).unwrap().lower <= h.hull_tol);
                }
            }
        }
    }

    #[test]
    fn deterministic_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..8).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let cloud = PointCloud::from_points(&pts);
        let a = approx_convex_hull(&cloud, 0.05).unwrap();
        let b = approx_convex_hull(&cloud, 0.05).unwrap();
        assert_eq!(a.members, b.members);
    }

    #[test]
    fn borrowed_cloud_uses_ids() {
        let data = vec![0.0, 0.0, 9.0, 9.0, 1.0, 0.0, 0.0, 1.0];
        let cloud = PointCloud::from_node_major(vec![0, 2, 3], 2, &data);
        let h = approx_convex_hull(&cloud, 0.01).unwrap();
        assert_eq!(sorted(h.members.clone()), vec![0, 2, 3]);
        let (u, v, _) = farthest_pair(&cloud, &h, |_, _| false).unwrap();
        assert_eq!((u, v), (2, 3));
        assert_eq!(position_in(&cloud, 3), Some(2));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn extreme_set_preserves_diameter(
            pts in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 3), 2..12)
        ) {
            let (full, _) = oracle::diameter_sq(&pts);
            let ext = oracle::extreme_points_brute(&pts);
            let sub: Vec<Vec<f64>> = ext.iter().map(|&i| pts[i].clone()).collect();
            let (on_ext, _) = oracle::diameter_sq(&sub);
            prop_assert!((full - on_ext).abs() <= 1e-9 * full.max(1.0));
        }

        #[test]
        fn every_point_is_covered(
            pts in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 4), 3..40),
            mu in 0.01f64..0.3,
        ) {
            let cloud = PointCloud::from_points(&pts);
            let h = approx_convex_hull(&cloud, mu).unwrap();
            for d in hull_residuals(&h, &cloud).unwrap() {
                prop_assert!(d.lower <= h.hull_tol + 1e-9);
            }
        }
    }
}
