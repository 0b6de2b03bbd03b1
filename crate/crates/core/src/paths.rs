//! Piecewise paths in the complex plane and pole-encircling loop systems.
//!
//! Every piece is parametrized by arc length with unit speed, which is the
//! parametrization used by the continuation integrator.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Endpoint continuity tolerance for consecutive pieces.
pub const CONTINUITY_TOL: f64 = 1e-12;

pub const DEFAULT_RADIUS_FACTOR: f64 = 0.4;

/// Largest fraction of a pole's clearance used when detouring around it.
const DETOUR_FACTOR_CAP: f64 = 0.45;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Piece {
    Segment {
        start: Complex64,
        end: Complex64,
    },
    /// Counterclockwise when `end_angle > start_angle`.
    Arc {
        center: Complex64,
        radius: f64,
        start_angle: f64,
        end_angle: f64,
    },
}

impl Piece {
    pub fn start(&self) -> Complex64 {
        match *self {
            Piece::Segment { start, .. } => start,
            Piece::Arc {
                center,
                radius,
                start_angle,
                ..
            } => center + Complex64::from_polar(radius, start_angle),
        }
    }

    pub fn end(&self) -> Complex64 {
        match *self {
            Piece::Segment { end, .. } => end,
            Piece::Arc {
                center,
                radius,
                end_angle,
                ..
            } => center + Complex64::from_polar(radius, end_angle),
        }
    }

    pub fn length(&self) -> f64 {
        match *self {
            Piece::Segment { start, end } => (end - start).norm(),
            Piece::Arc {
                radius,
                start_angle,
                end_angle,
                ..
            } => radius * (end_angle - start_angle).abs(),
        }
    }

    /// Position and unit tangent at arc length `s ∈ [0, length]`.
    pub fn eval(&self, s: f64) -> (Complex64, Complex64) {
        match *self {
            Piece::Segment { start, end } => {
                let len = (end - start).norm();
                if len == 0.0 {
                    return (start, Complex64::new(0.0, 0.0));
                }
                let dir = (end - start) / len;
                (start + dir * s, dir)
            }
            Piece::Arc {
                center,
                radius,
                start_angle,
                end_angle,
            } => {
                let sign = if end_angle >= start_angle { 1.0 } else { -1.0 };
                let theta = start_angle + sign * s / radius;
                let e = Complex64::from_polar(1.0, theta);
                (center + e * radius, Complex64::new(0.0, sign) * e)
            }
        }
    }

    pub fn reversed(&self) -> Piece {
        match *self {
            Piece::Segment { start, end } => Piece::Segment {
                start: end,
                end: start,
            },
            Piece::Arc {
                center,
                radius,
                start_angle,
                end_angle,
            } => Piece::Arc {
                center,
                radius,
                start_angle: end_angle,
                end_angle: start_angle,
            },
        }
    }

    pub fn distance_to(&self, q: Complex64) -> f64 {
        match *self {
            Piece::Segment { start, end } => {
                let d = end - start;
                let len2 = d.norm_sqr();
                if len2 == 0.0 {
                    return (q - start).norm();
                }
                let t = ((q - start) * d.conj()).re / len2;
                (start + d * t.clamp(0.0, 1.0) - q).norm()
            }
            Piece::Arc {
                center,
                radius,
                start_angle,
                end_angle,
            } => {
                let (lo, hi) = if start_angle <= end_angle {
                    (start_angle, end_angle)
                } else {
                    (end_angle, start_angle)
                };
                let rel = q - center;
                if hi - lo >= TAU || rel.norm() == 0.0 {
                    return (rel.norm() - radius).abs();
                }
                let phi = rel.arg();
                let k = ((lo - phi) / TAU).ceil();
                if phi + k * TAU <= hi {
                    (rel.norm() - radius).abs()
                } else {
                    (self.start() - q).norm().min((self.end() - q).norm())
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Piece>", into = "Vec<Piece>")]
pub struct Path {
    pieces: Vec<Piece>,
}

impl TryFrom<Vec<Piece>> for Path {
    type Error = Error;
    fn try_from(pieces: Vec<Piece>) -> Result<Self> {
        Path::new(pieces)
    }
}

impl From<Path> for Vec<Piece> {
    fn from(p: Path) -> Self {
        p.pieces
    }
}

impl Path {
    pub fn new(pieces: Vec<Piece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::InvalidArgument("a path needs at least one piece".into()));
        }
        for (k, w) in pieces.windows(2).enumerate() {
            let gap = (w[0].end() - w[1].start()).norm();
            if !(gap < CONTINUITY_TOL) {
                return Err(Error::InvalidArgument(format!(
                    "pieces {k} and {} are not continuous (gap {gap:e})",
                    k + 1
                )));
            }
        }
        for p in &pieces {
            if let Piece::Arc { radius, .. } = p {
                if !(*radius > 0.0) {
                    return Err(Error::InvalidArgument("arc radius must be positive".into()));
                }
            }
        }
        Ok(Path { pieces })
    }

    /// Zero-length path sitting at `z`.
    pub fn point(z: Complex64) -> Self {
        Path {
            pieces: vec![Piece::Segment { start: z, end: z }],
        }
    }

    pub fn segment(start: Complex64, end: Complex64) -> Self {
        Path {
            pieces: vec![Piece::Segment { start, end }],
        }
    }

    /// Full counterclockwise circle starting (and ending) at `start_angle`.
    pub fn circle(center: Complex64, radius: f64, start_angle: f64) -> Self {
        Path {
            pieces: vec![Piece::Arc {
                center,
                radius,
                start_angle,
                end_angle: start_angle + TAU,
            }],
        }
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn start(&self) -> Complex64 {
        self.pieces[0].start()
    }

    pub fn end(&self) -> Complex64 {
        self.pieces[self.pieces.len() - 1].end()
    }

    pub fn length(&self) -> f64 {
        self.pieces.iter().map(Piece::length).sum()
    }

    pub fn is_closed(&self) -> bool {
        (self.start() - self.end()).norm() < CONTINUITY_TOL
    }

    pub fn reversed(&self) -> Path {
        Path {
            pieces: self.pieces.iter().rev().map(Piece::reversed).collect(),
        }
    }

    /// `self` followed by `other`.
    pub fn concat(&self, other: &Path) -> Result<Path> {
        let mut pieces = self.pieces.clone();
        pieces.extend_from_slice(&other.pieces);
        Path::new(pieces)
    }

    /// Splits at arc length `s` (clamped to the path).
    pub fn split_at(&self, s: f64) -> (Path, Path) {
        let mut remaining = s.max(0.0);
        let mut first = Vec::new();
        let mut second = Vec::new();
        let mut done = false;
        for p in &self.pieces {
            if done {
                second.push(*p);
                continue;
            }
            let len = p.length();
            if remaining >= len {
                first.push(*p);
                remaining -= len;
                continue;
            }
            let (a, b) = split_piece(p, remaining);
            first.push(a);
            second.push(b);
            done = true;
        }
        if first.is_empty() {
            first.push(Piece::Segment {
                start: self.start(),
                end: self.start(),
            });
        }
        if second.is_empty() {
            second.push(Piece::Segment {
                start: self.end(),
                end: self.end(),
            });
        }
        (Path { pieces: first }, Path { pieces: second })
    }

    /// Points along the path, consecutive points at most `max_step` apart in arc length.
    pub fn sample(&self, max_step: f64) -> Vec<Complex64> {
        let mut pts = vec![self.start()];
        for p in &self.pieces {
            let len = p.length();
            let n = (len / max_step).ceil().max(1.0) as usize;
            for k in 1..=n {
                pts.push(p.eval(len * k as f64 / n as f64).0);
            }
        }
        pts
    }

    /// Winding number about `q` by cumulative argument increments over samples.
    pub fn winding_number(&self, q: Complex64, max_step: f64) -> f64 {
        let pts = self.sample(max_step);
        let total: f64 = pts
            .windows(2)
            .map(|w| ((w[1] - q) / (w[0] - q)).arg())
            .sum();
        total / TAU
    }

    pub fn distance_to(&self, q: Complex64) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.distance_to(q))
            .fold(f64::INFINITY, f64::min)
    }

    /// Position and derivative with respect to `t ∈ [0, 1]`, where `t` is the
    /// fraction of total arc length.
    pub fn point_at_fraction(&self, t: f64) -> (Complex64, Complex64) {
        let total = self.length();
        if total == 0.0 {
            return (self.start(), Complex64::new(0.0, 0.0));
        }
        let mut s = t.clamp(0.0, 1.0) * total;
        let last = self.pieces.len() - 1;
        for (k, p) in self.pieces.iter().enumerate() {
            let len = p.length();
            if s <= len || k == last {
                let (z, dz) = p.eval(s.min(len));
                return (z, dz * total);
            }
            s -= len;
        }
        unreachable!()
    }
}

fn split_piece(p: &Piece, s: f64) -> (Piece, Piece) {
    match *p {
        Piece::Segment { start, end } => {
            let mid = p.eval(s).0;
            (
                Piece::Segment { start, end: mid },
                Piece::Segment { start: mid, end },
            )
        }
        Piece::Arc {
            center,
            radius,
            start_angle,
            end_angle,
        } => {
            let sign = if end_angle >= start_angle { 1.0 } else { -1.0 };
            let mid = start_angle + sign * s / radius;
            (
                Piece::Arc {
                    center,
                    radius,
                    start_angle,
                    end_angle: mid,
                },
                Piece::Arc {
                    center,
                    radius,
                    start_angle: mid,
                    end_angle,
                },
            )
        }
    }
}

fn validate_configuration(basepoint: Complex64, poles: &[Complex64]) -> Result<()> {
    if poles.is_empty() {
        return Err(Error::DegenerateConfiguration("no poles".into()));
    }
    for i in 0..poles.len() {
        for j in i + 1..poles.len() {
            let d = (poles[i] - poles[j]).norm();
            if d < CONTINUITY_TOL {
                return Err(Error::DegenerateConfiguration(format!(
                    "poles {i} and {j} coincide (distance {d:e})"
                )));
            }
        }
        if (poles[i] - basepoint).norm() < CONTINUITY_TOL {
            return Err(Error::InvalidBasepoint {
                re: basepoint.re,
                im: basepoint.im,
            });
        }
    }
    Ok(())
}

/// Distance from pole `i` to the nearest other pole or the basepoint.
fn clearance(basepoint: Complex64, poles: &[Complex64], i: usize) -> f64 {
    poles
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &q)| (q - poles[i]).norm())
        .fold((basepoint - poles[i]).norm(), f64::min)
}

/// Lasso loop based at `basepoint` around `poles[index]`: inbound segment,
/// counterclockwise circle, then the inbound segment reversed.
///
/// Where the inbound segment passes within a neighbouring pole's clearance
/// disk it is replaced by the shorter arc of that disk, on the side the
/// straight segment passes. Exact collinear hits go clockwise.
pub fn pole_loop(
    basepoint: Complex64,
    index: usize,
    poles: &[Complex64],
    radius_factor: f64,
) -> Result<Path> {
    validate_configuration(basepoint, poles)?;
    if !(radius_factor > 0.0 && radius_factor < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "radius factor {radius_factor} outside (0, 1)"
        )));
    }
    if index >= poles.len() {
        return Err(Error::InvalidArgument(format!(
            "pole index {index} out of range for {} poles",
            poles.len()
        )));
    }
    let target = poles[index];
    let radius = radius_factor * clearance(basepoint, poles, index);
    let dir = (basepoint - target) / (basepoint - target).norm();
    let arrival = target + dir * radius;

    let inbound = detoured_segment(basepoint, arrival, index, poles, radius_factor)?;
    let mut pieces = inbound.clone();
    pieces.push(Piece::Arc {
        center: target,
        radius,
        start_angle: dir.arg(),
        end_angle: dir.arg() + TAU,
    });
    pieces.extend(inbound.iter().rev().map(Piece::reversed));
    Path::new(pieces)
}

fn detoured_segment(
    from: Complex64,
    to: Complex64,
    target: usize,
    poles: &[Complex64],
    radius_factor: f64,
) -> Result<Vec<Piece>> {
    let len = (to - from).norm();
    if len == 0.0 {
        return Ok(vec![Piece::Segment { start: from, end: to }]);
    }
    let d = (to - from) / len;
    // (entry t, exit t, pole, detour radius, ccw)
    let mut hits = Vec::new();
    for (j, &q) in poles.iter().enumerate() {
        if j == target {
            continue;
        }
        let rho = radius_factor.min(DETOUR_FACTOR_CAP) * clearance(from, poles, j);
        let rel = (q - from) * d.conj();
        let (t_mid, offset) = (rel.re, rel.im);
        if offset.abs() >= rho {
            continue;
        }
        let w = (rho * rho - offset * offset).sqrt();
        let (t0, t1) = (t_mid - w, t_mid + w);
        if t1 <= 0.0 || t0 >= len {
            continue;
        }
        if t0 <= 0.0 || t1 >= len {
            return Err(Error::DegenerateConfiguration(format!(
                "loop around pole {target} cannot clear pole {j}; reduce the radius factor"
            )));
        }
        // q on the left of travel: the segment passes on its right, i.e. counterclockwise about q.
        let ccw = offset > CONTINUITY_TOL * len.max(1.0);
        hits.push((t0, t1, q, rho, ccw));
    }
    hits.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut pieces = Vec::new();
    let mut cursor = from;
    for (t0, t1, q, rho, ccw) in hits {
        let entry = from + d * t0;
        let exit = from + d * t1;
        pieces.push(Piece::Segment {
            start: cursor,
            end: entry,
        });
        let a0 = (entry - q).arg();
        let a1 = (exit - q).arg();
        let sweep = if ccw {
            (a1 - a0).rem_euclid(TAU)
        } else {
            -(a0 - a1).rem_euclid(TAU)
        };
        pieces.push(Piece::Arc {
            center: q,
            radius: rho,
            start_angle: a0,
            end_angle: a0 + sweep,
        });
        // snap to the arc's endpoint so that continuity is exact
        cursor = pieces.last().unwrap().end();
    }
    pieces.push(Piece::Segment {
        start: cursor,
        end: to,
    });
    Ok(pieces)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopSystem {
    pub basepoint: Complex64,
    /// `loops[i]` encircles pole `i`.
    pub loops: Vec<Path>,
    /// Generator order: pole indices by increasing argument seen from the basepoint.
    pub order: Vec<usize>,
    pub poles: Vec<Complex64>,
    /// Smallest distance from any loop to any pole.
    pub r_min: f64,
    pub radius_factor: f64,
    /// Set when the basepoint is not strictly outside the convex hull of the poles.
    pub inside_hull: bool,
}

impl LoopSystem {
    /// Sampling step for winding-number checks.
    pub fn winding_step(&self) -> f64 {
        self.r_min / 8.0
    }

    /// `w[i][j]` = winding number of loop `i` about pole `j`.
    pub fn winding_matrix(&self) -> Vec<Vec<f64>> {
        let step = self.winding_step();
        self.loops
            .iter()
            .map(|l| self.poles.iter().map(|&q| l.winding_number(q, step)).collect())
            .collect()
    }

    /// A based loop that encircles every pole once counterclockwise: out along
    /// the ray from the pole centroid through the basepoint, once around a
    /// large circle, and back.
    pub fn enclosing_loop(&self) -> Path {
        let n = self.poles.len() as f64;
        let centroid = self.poles.iter().sum::<Complex64>() / n;
        let spread = self
            .poles
            .iter()
            .map(|p| (p - centroid).norm())
            .fold(0.0, f64::max);
        let margin = self.r_min.max(1e-3 * spread.max(1.0));
        let to_base = self.basepoint - centroid;
        let base_dist = to_base.norm();
        let dir = if base_dist > 0.0 {
            to_base / base_dist
        } else {
            Complex64::new(1.0, 0.0)
        };
        let big = base_dist.max(spread + margin);
        let rim = centroid + dir * big;
        let out = Piece::Segment {
            start: self.basepoint,
            end: rim,
        };
        let circle = Piece::Arc {
            center: centroid,
            radius: big,
            start_angle: dir.arg(),
            end_angle: dir.arg() + TAU,
        };
        Path::new(vec![out, circle, out.reversed()]).expect("continuous by construction")
    }
}

/// Whether `basepoint` lies strictly outside the convex hull of `poles`, and
/// the argument at which a counterclockwise sweep over the poles starts.
fn sweep_start(basepoint: Complex64, poles: &[Complex64]) -> (bool, f64) {
    let mut angles: Vec<f64> = poles.iter().map(|&p| (p - basepoint).arg()).collect();
    angles.sort_by(f64::total_cmp);
    let n = angles.len();
    let mut best_gap = -1.0;
    let mut start = angles[0];
    for k in 0..n {
        let next = if k + 1 < n {
            angles[k + 1]
        } else {
            angles[0] + TAU
        };
        let gap = next - angles[k];
        if gap > best_gap {
            best_gap = gap;
            start = if k + 1 < n { angles[k + 1] } else { angles[0] };
        }
    }
    (best_gap > PI + 1e-12, start)
}

/// One lasso per pole, ordered by increasing argument of `pole − basepoint`
/// (ties by increasing distance). Arguments are measured counterclockwise
/// from the edge of the widest empty angular sector, so the order is the
/// natural sweep order whenever the basepoint is outside the hull.
pub fn canonical_generators(
    basepoint: Complex64,
    poles: &[Complex64],
    radius_factor: f64,
) -> Result<LoopSystem> {
    validate_configuration(basepoint, poles)?;
    let loops = (0..poles.len())
        .map(|i| pole_loop(basepoint, i, poles, radius_factor))
        .collect::<Result<Vec<_>>>()?;

    let (outside, start) = sweep_start(basepoint, poles);
    let key = |i: usize| {
        let k = ((poles[i] - basepoint).arg() - start).rem_euclid(TAU);
        if TAU - k < 1e-12 {
            0.0
        } else {
            k
        }
    };
    let mut order: Vec<usize> = (0..poles.len()).collect();
    order.sort_by(|&i, &j| key(i).total_cmp(&key(j)));
    // ties: closer first
    let mut k = 0;
    while k < order.len() {
        let mut end = k + 1;
        while end < order.len() && (key(order[end]) - key(order[k])).abs() < 1e-12 {
            end += 1;
        }
        order[k..end].sort_by(|&i, &j| {
            (poles[i] - basepoint)
                .norm()
                .total_cmp(&(poles[j] - basepoint).norm())
        });
        k = end;
    }

    let r_min = loops
        .iter()
        .flat_map(|l| poles.iter().map(move |&q| l.distance_to(q)))
        .fold(f64::INFINITY, f64::min);

    Ok(LoopSystem {
        basepoint,
        loops,
        order,
        poles: poles.to_vec(),
        r_min,
        radius_factor,
        inside_hull: !outside,
    })
}
