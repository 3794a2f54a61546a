//! Geometric primitives on point sets in a box-shaped policy space.
//!
//! All distances are Euclidean.

use std::ops::{Deref, DerefMut};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// A position in policy space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Point {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Point {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

/// Positions of `len` points of a common dimension, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    dim: usize,
    data: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        PointSet { dim, data: Vec::new() }
    }

    pub fn with_capacity(dim: usize, n: usize) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        PointSet { dim, data: Vec::with_capacity(dim * n) }
    }

    /// Builds a set from a flat row-major buffer.
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(domain("dimension must be at least 1"));
        }
        if data.len() % dim != 0 {
            return Err(domain(format!(
                "flat buffer of length {} is not a multiple of dimension {}",
                data.len(),
                dim
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(domain("coordinates must be finite"));
        }
        Ok(PointSet { dim, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or_else(|| domain("cannot infer dimension of an empty row list"))?;
        let mut set = PointSet::from_flat(dim.max(1), Vec::new())?;
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(domain("rows have inconsistent dimensions"));
            }
            set.push(r);
        }
        Ok(set)
    }

    /// One-dimensional set from scalar positions.
    pub fn from_scalars(values: &[f64]) -> Self {
        PointSet { dim: 1, data: values.to_vec() }
    }

    pub fn push(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.dim, "point dimension mismatch");
        self.data.extend_from_slice(p);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut [f64] {
        let d = self.dim;
        &mut self.data[i * d..(i + 1) * d]
    }

    pub fn point(&self, i: usize) -> Point {
        Point(self.get(i).to_vec())
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.iter().map(<[f64]>::to_vec).collect()
    }

    pub fn mean(&self) -> Result<Point> {
        if self.is_empty() {
            return Err(domain("mean of an empty point set"));
        }
        let mut m = vec![0.0; self.dim];
        for p in self.iter() {
            for (acc, v) in m.iter_mut().zip(p) {
                *acc += v;
            }
        }
        let n = self.len() as f64;
        m.iter_mut().for_each(|v| *v /= n);
        Ok(Point(m))
    }

    /// Applies `f` to every point in place.
    pub fn map_points(&mut self, mut f: impl FnMut(&mut [f64])) {
        for p in self.data.chunks_exact_mut(self.dim) {
            f(p);
        }
    }
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Axis-aligned compact policy space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyBox {
    pub lo: Point,
    pub hi: Point,
}

impl PolicyBox {
    pub fn new(lo: Point, hi: Point) -> Result<Self> {
        if lo.dim() == 0 || lo.dim() != hi.dim() {
            return Err(domain("box corners must share a positive dimension"));
        }
        if lo.iter().zip(hi.iter()).any(|(l, h)| !(l.is_finite() && h.is_finite() && l <= h)) {
            return Err(domain("box requires finite lo <= hi componentwise"));
        }
        Ok(PolicyBox { lo, hi })
    }

    /// The unit cube `[0,1]^dim`.
    pub fn unit(dim: usize) -> Self {
        PolicyBox { lo: Point::zeros(dim), hi: Point(vec![1.0; dim]) }
    }

    pub fn dim(&self) -> usize {
        self.lo.dim()
    }

    pub fn diameter(&self) -> f64 {
        dist(&self.lo, &self.hi)
    }

    pub fn center(&self) -> Point {
        Point(self.lo.iter().zip(self.hi.iter()).map(|(l, h)| 0.5 * (l + h)).collect())
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter().zip(self.lo.iter().zip(self.hi.iter())).all(|(v, (l, h))| *l <= *v && *v <= *h)
    }

    /// Euclidean projection onto the box.
    pub fn project(&self, p: &mut [f64]) {
        for (v, (l, h)) in p.iter_mut().zip(self.lo.iter().zip(self.hi.iter())) {
            *v = v.clamp(*l, *h);
        }
    }

    pub fn project_all(&self, set: &mut PointSet) {
        set.map_points(|p| self.project(p));
    }
}

/// Minimax center of a point set and its radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CenterResult {
    pub center: Point,
    pub radius: f64,
}

/// Empirical variance `(1/n) sum ||x_i - mean||^2`.
pub fn pairwise_variance(points: &PointSet) -> Result<f64> {
    if points.is_empty() {
        return Err(domain("variance of an empty point set"));
    }
    // shifted by the first point, so identical points give exactly zero
    let origin = points.get(0);
    let n = points.len() as f64;
    let mut shift = vec![0.0; points.dim()];
    for p in points.iter() {
        for ((s, a), o) in shift.iter_mut().zip(p).zip(origin) {
            *s += a - o;
        }
    }
    shift.iter_mut().for_each(|s| *s /= n);
    let total: f64 = points
        .iter()
        .map(|p| p.iter().zip(origin).zip(&shift).map(|((a, o), s)| (a - o - s).powi(2)).sum::<f64>())
        .sum();
    Ok(total / n)
}

/// The same quantity through `(1/2n^2) sum_{i,j} ||x_i - x_j||^2`. Quadratic in `n`.
pub fn pairwise_variance_by_pairs(points: &PointSet) -> Result<f64> {
    if points.is_empty() {
        return Err(domain("variance of an empty point set"));
    }
    let n = points.len();
    let mut total = 0.0;
    for i in 0..n {
        let pi = points.get(i);
        for j in (i + 1)..n {
            total += dist_sq(pi, points.get(j));
        }
    }
    // each unordered pair appears twice in the ordered double sum
    Ok(total / (n as f64 * n as f64))
}

pub fn coordinatewise_median(points: &PointSet) -> Result<Point> {
    if points.is_empty() {
        return Err(domain("median of an empty point set"));
    }
    let n = points.len();
    let mut column = Vec::with_capacity(n);
    let mut out = Vec::with_capacity(points.dim());
    for k in 0..points.dim() {
        column.clear();
        column.extend(points.iter().map(|p| p[k]));
        column.sort_by(f64::total_cmp);
        let m = if n % 2 == 1 {
            column[n / 2]
        } else {
            0.5 * (column[n / 2 - 1] + column[n / 2])
        };
        out.push(m);
    }
    Ok(Point(out))
}

/// Distance from `w` to the farthest point.
pub fn winner_radius(points: &PointSet, w: &[f64]) -> Result<f64> {
    if points.is_empty() {
        return Err(domain("winner radius of an empty point set"));
    }
    Ok(points.iter().map(|p| dist_sq(p, w)).fold(0.0, f64::max).sqrt())
}

/// Largest candidate-to-centroid gap.
pub fn supporter_radius(candidates: &PointSet, centroids: &PointSet) -> Result<f64> {
    if candidates.len() != centroids.len() || candidates.dim() != centroids.dim() {
        return Err(domain(format!(
            "supporter radius needs aligned sets, got {} candidates and {} centroids",
            candidates.len(),
            centroids.len()
        )));
    }
    Ok(candidates
        .iter()
        .zip(centroids.iter())
        .map(|(c, s)| dist(c, s))
        .fold(0.0, f64::max))
}

const MEB_EXACT_MAX_DIM: usize = 3;
const MEB_SHUFFLE_SEED: u64 = 0x5eed_cebe;
const FALLBACK_TOL: f64 = 1e-6;

/// Point of `bx` minimizing the largest distance to `points`.
///
/// For `d <= 3` this is the exact minimum enclosing ball (randomized incremental
/// construction with a fixed shuffle seed, so results are reproducible). Higher
/// dimensions, or a ball center outside the box, fall back to a projected grid
/// search refined by coordinate descent.
pub fn chebyshev_center(points: &PointSet, bx: &PolicyBox) -> Result<CenterResult> {
    if points.is_empty() {
        return Err(domain("chebyshev center of an empty point set"));
    }
    if points.dim() != bx.dim() {
        return Err(domain("point set and box dimensions differ"));
    }
    if points.dim() <= MEB_EXACT_MAX_DIM {
        let ball = min_enclosing_ball(points);
        if bx.contains(&ball.center) {
            let radius = winner_radius(points, &ball.center)?;
            return Ok(CenterResult { center: ball.center, radius });
        }
    }
    minimax_search(points, bx)
}

struct Ball {
    center: Point,
    radius_sq: f64,
}

impl Ball {
    fn covers(&self, p: &[f64]) -> bool {
        self.radius_sq >= 0.0 && dist_sq(p, &self.center) <= self.radius_sq * (1.0 + 1e-12) + 1e-24
    }
}

fn min_enclosing_ball(points: &PointSet) -> Ball {
    if points.dim() == 1 {
        let (lo, hi) = points
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[0]), hi.max(p[0])));
        let half = 0.5 * (hi - lo);
        return Ball { center: Point(vec![0.5 * (lo + hi)]), radius_sq: half * half };
    }
    let mut order: Vec<&[f64]> = points.iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(MEB_SHUFFLE_SEED));
    let mut boundary: Vec<&[f64]> = Vec::with_capacity(points.dim() + 1);
    welzl(&order, order.len(), &mut boundary, points.dim())
}

/// Smallest ball enclosing `pts[..n]` with every point of `boundary` on its surface.
/// Recursion depth is bounded by `dim + 1`.
fn welzl<'a>(pts: &[&'a [f64]], n: usize, boundary: &mut Vec<&'a [f64]>, dim: usize) -> Ball {
    let mut ball = ball_through(boundary, dim);
    if boundary.len() == dim + 1 {
        return ball;
    }
    for i in 0..n {
        if !ball.covers(pts[i]) {
            boundary.push(pts[i]);
            ball = welzl(pts, i, boundary, dim);
            boundary.pop();
        }
    }
    ball
}

/// Smallest ball with all of `support` on its boundary (circumball in their affine hull).
fn ball_through(support: &[&[f64]], dim: usize) -> Ball {
    match support.len() {
        0 => Ball { center: Point::zeros(dim), radius_sq: -1.0 },
        1 => Ball { center: Point(support[0].to_vec()), radius_sq: 0.0 },
        _ => {
            let origin = support[0];
            let spans: Vec<Vec<f64>> = support[1..]
                .iter()
                .map(|p| p.iter().zip(origin).map(|(a, b)| a - b).collect())
                .collect();
            let m = spans.len();
            // 2 (v_k . v_l) lambda_l = |v_k|^2
            let mut a = vec![vec![0.0; m + 1]; m];
            for k in 0..m {
                for l in 0..m {
                    a[k][l] = 2.0 * dot(&spans[k], &spans[l]);
                }
                a[k][m] = dot(&spans[k], &spans[k]);
            }
            match solve_augmented(a) {
                Some(lambda) => {
                    let mut center = origin.to_vec();
                    for (lk, v) in lambda.iter().zip(&spans) {
                        for (c, vi) in center.iter_mut().zip(v) {
                            *c += lk * vi;
                        }
                    }
                    let radius_sq = support.iter().map(|p| dist_sq(p, &center)).fold(0.0, f64::max);
                    Ball { center: Point(center), radius_sq }
                }
                None => diametral_ball(support),
            }
        }
    }
}

fn diametral_ball(support: &[&[f64]]) -> Ball {
    let mut best = (0, 0, -1.0);
    for i in 0..support.len() {
        for j in (i + 1)..support.len() {
            let d = dist_sq(support[i], support[j]);
            if d > best.2 {
                best = (i, j, d);
            }
        }
    }
    let (i, j, d) = best;
    let center = support[i].iter().zip(support[j]).map(|(a, b)| 0.5 * (a + b)).collect();
    Ball { center: Point(center), radius_sq: 0.25 * d.max(0.0) }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gaussian elimination with partial pivoting on an `m x (m+1)` augmented matrix.
fn solve_augmented(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let m = a.len();
    let scale = a.iter().flat_map(|r| r[..m].iter()).fold(0.0_f64, |s, v| s.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..m {
        let pivot = (col..m).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= 1e-12 * scale {
            return None;
        }
        a.swap(col, pivot);
        for row in (col + 1)..m {
            let f = a[row][col] / a[col][col];
            for k in col..=m {
                a[row][k] -= f * a[col][k];
            }
        }
    }
    let mut x = vec![0.0; m];
    for row in (0..m).rev() {
        let tail: f64 = ((row + 1)..m).map(|k| a[row][k] * x[k]).sum();
        x[row] = (a[row][m] - tail) / a[row][row];
    }
    Some(x)
}

/// Grid search over the box followed by shrinking coordinate descent.
fn minimax_search(points: &PointSet, bx: &PolicyBox) -> Result<CenterResult> {
    let dim = bx.dim();
    let steps_per_axis = match dim {
        1 => 1000,
        2 => 100,
        3 => 20,
        _ => 6,
    };
    let objective = |w: &[f64]| points.iter().map(|p| dist_sq(p, w)).fold(0.0, f64::max);

    let mut best = bx.center().into_inner();
    let mut best_val = objective(&best);
    let mut idx = vec![0usize; dim];
    let mut probe = vec![0.0; dim];
    let bases = vec![steps_per_axis + 1; dim];
    loop {
        for k in 0..dim {
            probe[k] = bx.lo[k] + (bx.hi[k] - bx.lo[k]) * idx[k] as f64 / steps_per_axis as f64;
        }
        let v = objective(&probe);
        if v < best_val {
            best_val = v;
            best.copy_from_slice(&probe);
        }
        if !advance_odometer(&mut idx, &bases) {
            break;
        }
    }

    let extent = (0..dim).map(|k| bx.hi[k] - bx.lo[k]).fold(0.0, f64::max);
    let mut step = extent / steps_per_axis as f64;
    while step > FALLBACK_TOL * 1e-2 {
        let mut improved = false;
        for k in 0..dim {
            for sign in [-1.0, 1.0] {
                probe.copy_from_slice(&best);
                probe[k] += sign * step;
                bx.project(&mut probe);
                let v = objective(&probe);
                if v < best_val {
                    best_val = v;
                    best.copy_from_slice(&probe);
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok(CenterResult { center: Point(best), radius: best_val.sqrt() })
}

/// Row-major odometer increment; returns false after the last index.
pub(crate) fn advance_odometer(idx: &mut [usize], bases: &[usize]) -> bool {
    for (slot, base) in idx.iter_mut().zip(bases).rev() {
        *slot += 1;
        if *slot < *base {
            return true;
        }
        *slot = 0;
    }
    false
}
