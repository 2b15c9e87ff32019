//! Per-cell iso-band extraction in grid index space (`x` = column, `y` = row).
//!
//! Every cell contributes directed boundary edges per band, counter-clockwise
//! around the area it covers. Shared edges between neighbouring pieces come
//! out in opposite directions and cancel, leaving only the band outlines.
//! Points on grid edges are always computed from the grid edge itself, so
//! both cells touching an edge produce bit-identical coordinates.

use std::collections::HashMap;

pub(crate) type Pt = [f64; 2];
pub(crate) type Key = (u64, u64);

pub(crate) fn key(p: Pt) -> Key {
    (p[0].to_bits(), p[1].to_bits())
}

pub(crate) struct Field<'a> {
    pub nrows: usize,
    pub ncols: usize,
    pub values: &'a [f64],
    pub missing: &'a [bool],
}

impl Field<'_> {
    fn v(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.ncols + c]
    }

    fn is_missing(&self, r: usize, c: usize) -> bool {
        self.missing[r * self.ncols + c]
    }

    /// No corner of cell `(r, c)` is missing.
    fn cell_complete(&self, r: usize, c: usize) -> bool {
        !(self.is_missing(r, c)
            || self.is_missing(r, c + 1)
            || self.is_missing(r + 1, c)
            || self.is_missing(r + 1, c + 1))
    }
}

/// `-1` below the first threshold, `n - 1` at or above the last, otherwise
/// the band index.
pub(crate) fn class_of(thresholds: &[f64], v: f64) -> isize {
    thresholds.partition_point(|&t| t <= v) as isize - 1
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a * (1.0 - t) + b * t
}

/// Crossing of threshold `t` on the horizontal grid edge `(r, c)-(r, c+1)`.
fn h_cross(f: &Field, r: usize, c: usize, t: f64) -> Pt {
    let (va, vb) = (f.v(r, c), f.v(r, c + 1));
    let s = (t - va) / (vb - va);
    [c as f64 + s + 0.0, r as f64]
}

/// Crossing of threshold `t` on the vertical grid edge `(r, c)-(r+1, c)`.
fn v_cross(f: &Field, r: usize, c: usize, t: f64) -> Pt {
    let (va, vb) = (f.v(r, c), f.v(r + 1, c));
    let s = (t - va) / (vb - va);
    [c as f64, r as f64 + s + 0.0]
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

#[derive(Clone, Copy)]
struct Cell {
    r: usize,
    c: usize,
}

impl Cell {
    fn cross(&self, f: &Field, side: Side, t: f64) -> Pt {
        match side {
            Side::Bottom => h_cross(f, self.r, self.c, t),
            Side::Top => h_cross(f, self.r + 1, self.c, t),
            Side::Left => v_cross(f, self.r, self.c, t),
            Side::Right => v_cross(f, self.r, self.c + 1, t),
        }
    }

    /// End points and values of a side in increasing coordinate order.
    fn side_ends(&self, f: &Field, side: Side) -> ((Pt, f64), (Pt, f64)) {
        let (r, c) = (self.r, self.c);
        let p = |r: usize, c: usize| ([c as f64, r as f64], f.v(r, c));
        match side {
            Side::Bottom => (p(r, c), p(r, c + 1)),
            Side::Top => (p(r + 1, c), p(r + 1, c + 1)),
            Side::Left => (p(r, c), p(r + 1, c)),
            Side::Right => (p(r, c + 1), p(r + 1, c + 1)),
        }
    }
}

/// Directed edges per band.
pub(crate) struct EdgeSink {
    pub bands: Vec<Vec<(Pt, Pt)>>,
}

impl EdgeSink {
    pub fn new(nbands: usize) -> Self {
        EdgeSink {
            bands: vec![Vec::new(); nbands],
        }
    }

    fn push(&mut self, band: usize, a: Pt, b: Pt) {
        if a != b {
            self.bands[band].push((a, b));
        }
    }
}

/// Splits a cell side into band intervals and emits them in the cell's
/// counter-clockwise direction.
fn emit_side(f: &Field, th: &[f64], cell: Cell, side: Side, out: &mut EdgeSink) {
    let nb = th.len() as isize - 1;
    let ((pa, va), (pb, vb)) = cell.side_ends(f, side);
    let mut pts: Vec<(Pt, f64)> = vec![(pa, va)];
    let mut crossing: Vec<f64> = th
        .iter()
        .copied()
        .filter(|&t| (va < t) != (vb < t))
        .collect();
    if va > vb {
        crossing.reverse();
    }
    for t in crossing {
        pts.push((cell.cross(f, side, t), t));
    }
    pts.push((pb, vb));
    let reverse = matches!(side, Side::Top | Side::Left);
    for w in pts.windows(2) {
        let ((p, vp), (q, vq)) = (w[0], w[1]);
        if p == q {
            continue;
        }
        let class = class_of(th, 0.5 * (vp + vq));
        if class < 0 || class >= nb {
            continue;
        }
        if reverse {
            out.push(class as usize, q, p);
        } else {
            out.push(class as usize, p, q);
        }
    }
}

/// Tuning of the per-cell refinement.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Refinement {
    /// Largest tolerated gap between the bilinear surface and its piecewise
    /// linear approximation, in value units.
    pub tolerance: f64,
    pub max_k: usize,
}

impl Refinement {
    /// Subdivision count so that the twist term `d·x·y` of the bilinear
    /// surface is approximated within `tolerance`.
    fn k_for(&self, d: f64) -> usize {
        if self.tolerance <= 0.0 || d == 0.0 {
            return if self.tolerance <= 0.0 && d != 0.0 { self.max_k } else { 1 };
        }
        let k = (d.abs() / (16.0 * self.tolerance)).sqrt().ceil();
        if k.is_finite() {
            (k as usize).clamp(1, self.max_k)
        } else {
            self.max_k
        }
    }
}

#[derive(Clone, Copy)]
struct Node {
    id: usize,
    p: Pt,
    v: f64,
}

/// A convex piece of a cell with the cell side each edge lies on, if any.
/// Edge `e` runs from `n[e]` to `n[(e + 1) % len]`.
struct Piece<'a> {
    n: &'a [Node],
    sides: &'a [Option<Side>],
}

fn piece_cross(f: &Field, cell: Cell, piece: &Piece, e: usize, t: f64) -> Pt {
    if let Some(side) = piece.sides[e] {
        return cell.cross(f, side, t);
    }
    let (mut a, mut b) = (piece.n[e], piece.n[(e + 1) % piece.n.len()]);
    if a.id > b.id {
        std::mem::swap(&mut a, &mut b);
    }
    let s = (t - a.v) / (b.v - a.v);
    [
        a.p[0] + (b.p[0] - a.p[0]) * s + 0.0,
        a.p[1] + (b.p[1] - a.p[1]) * s + 0.0,
    ]
}

/// Emits the part of `piece` with values in `[lo, hi)` as band `band`,
/// leaving out edges that run along a cell side.
fn clip_piece(
    f: &Field,
    cell: Cell,
    piece: &Piece,
    band: usize,
    lo: f64,
    hi: f64,
    local: &mut Vec<(usize, Pt, Pt)>,
) {
    let len = piece.n.len();
    let mut pts: Vec<(Pt, u8)> = Vec::with_capacity(2 * len + 1);
    for e in 0..len {
        let (a, b) = (piece.n[e], piece.n[(e + 1) % len]);
        if lo <= a.v && a.v < hi {
            pts.push((a.p, (1 << ((e + len - 1) % len)) | (1 << e)));
        }
        let lo_x = (a.v < lo) != (b.v < lo);
        let hi_x = (a.v < hi) != (b.v < hi);
        let ascending = a.v < b.v;
        let order: [(bool, f64); 2] = if ascending {
            [(lo_x, lo), (hi_x, hi)]
        } else {
            [(hi_x, hi), (lo_x, lo)]
        };
        for (hit, t) in order {
            if hit {
                pts.push((piece_cross(f, cell, piece, e, t), 1 << e));
            }
        }
    }
    if pts.len() < 3 {
        return;
    }
    let on_side: u8 = (0..len)
        .filter(|&e| piece.sides[e].is_some())
        .fold(0, |m, e| m | (1 << e));
    let n = pts.len();
    for i in 0..n {
        let (p, mp) = pts[i];
        let (q, mq) = pts[(i + 1) % n];
        if p == q || mp & mq & on_side != 0 {
            continue;
        }
        local.push((band, p, q));
    }
}

/// True when some threshold in `th` crosses all four sides of the cell.
fn is_saddle(th: &[f64], corners: [f64; 4]) -> bool {
    th.iter().any(|&t| {
        let b = corners.map(|v| v < t);
        b[0] != b[1] && b[1] != b[2] && b[2] != b[3] && b[3] != b[0]
    })
}

/// Removes pairs of opposite edges, keeping the first-seen order of the rest.
pub(crate) fn cancel<T: Copy + Eq + std::hash::Hash>(
    edges: &[(T, Pt, Pt)],
) -> Vec<(T, Pt, Pt)> {
    let mut pending: HashMap<(T, Key, Key), Vec<usize>> = HashMap::new();
    let mut alive = vec![true; edges.len()];
    for (i, &(tag, p, q)) in edges.iter().enumerate() {
        let rev = (tag, key(q), key(p));
        if let Some(j) = pending.get_mut(&rev).and_then(Vec::pop) {
            alive[i] = false;
            alive[j] = false;
            continue;
        }
        pending.entry((tag, key(p), key(q))).or_default().push(i);
    }
    edges
        .iter()
        .zip(alive)
        .filter(|(_, a)| *a)
        .map(|(e, _)| *e)
        .collect()
}

fn process_cell(
    f: &Field,
    th: &[f64],
    refine: &Refinement,
    cell: Cell,
    out: &mut EdgeSink,
) {
    let (r, c) = (cell.r, cell.c);
    if !f.cell_complete(r, c) {
        return;
    }
    // Sides shared with another complete cell would cancel against it.
    let open = [
        (Side::Bottom, r == 0 || !f.cell_complete(r - 1, c)),
        (Side::Right, c + 2 == f.ncols || !f.cell_complete(r, c + 1)),
        (Side::Top, r + 2 == f.nrows || !f.cell_complete(r + 1, c)),
        (Side::Left, c == 0 || !f.cell_complete(r, c - 1)),
    ];
    for (side, exposed) in open {
        if exposed {
            emit_side(f, th, cell, side, out);
        }
    }
    let v00 = f.v(r, c);
    let v01 = f.v(r, c + 1);
    let v10 = f.v(r + 1, c);
    let v11 = f.v(r + 1, c + 1);
    let cls = [v00, v01, v10, v11].map(|v| class_of(th, v));
    if cls.iter().all(|&k| k == cls[0]) {
        return;
    }
    let nb = th.len() - 1;
    let k = refine.k_for(v00 - v01 - v10 + v11);
    let kf = k as f64;
    let (x0, y0) = (c as f64, r as f64);
    let frac = |a: usize| a as f64 / kf;
    let node_val = |a: usize, b: usize| lerp(lerp(v00, v01, frac(a)), lerp(v10, v11, frac(a)), frac(b));
    let stride = k + 1;
    let vals: Vec<f64> = (0..stride * stride)
        .map(|n| node_val(n % stride, n / stride))
        .collect();
    let node = |a: usize, b: usize| Node {
        id: b * stride + a,
        p: [x0 + frac(a), y0 + frac(b)],
        v: vals[b * stride + a],
    };

    let mut local: Vec<(usize, Pt, Pt)> = Vec::new();
    for b in 0..k {
        for a in 0..k {
            let n00 = node(a, b);
            let n10 = node(a + 1, b);
            let n11 = node(a + 1, b + 1);
            let n01 = node(a, b + 1);
            let sc = [n00.v, n10.v, n11.v, n01.v].map(|v| class_of(th, v));
            let lo_c = *sc.iter().min().expect("four corners");
            let hi_c = *sc.iter().max().expect("four corners");
            if lo_c == hi_c {
                if lo_c >= 0 && (lo_c as usize) < nb {
                    let band = lo_c as usize;
                    if b > 0 {
                        local.push((band, n00.p, n10.p));
                    }
                    if a + 1 < k {
                        local.push((band, n10.p, n11.p));
                    }
                    if b + 1 < k {
                        local.push((band, n11.p, n01.p));
                    }
                    if a > 0 {
                        local.push((band, n01.p, n00.p));
                    }
                }
                continue;
            }
            let center = Node {
                id: stride * stride + b * k + a,
                p: [
                    x0 + (2 * a + 1) as f64 / (2.0 * kf),
                    y0 + (2 * b + 1) as f64 / (2.0 * kf),
                ],
                v: 0.25 * (n00.v + n10.v + n11.v + n01.v),
            };
            let nodes = [n00, n10, n11, n01];
            let tris = [
                ([n00, n10, center], (b == 0).then_some(Side::Bottom)),
                ([n10, n11, center], (a + 1 == k).then_some(Side::Right)),
                ([n11, n01, center], (b + 1 == k).then_some(Side::Top)),
                ([n01, n00, center], (a == 0).then_some(Side::Left)),
            ];
            let first = lo_c.max(0) as usize;
            let last = hi_c.min(nb as isize - 1);
            if last < first as isize {
                continue;
            }
            if k == 1 && !is_saddle(th, nodes.map(|n| n.v)) {
                let sides = [Some(Side::Bottom), Some(Side::Right), Some(Side::Top), Some(Side::Left)];
                let piece = Piece { n: &nodes, sides: &sides };
                for band in first..=last as usize {
                    clip_piece(f, cell, &piece, band, th[band], th[band + 1], &mut local);
                }
                continue;
            }
            for (tri, side) in &tris {
                let sides = [*side, None, None];
                let piece = Piece { n: tri, sides: &sides };
                let tc = tri.map(|n| class_of(th, n.v));
                let tlo = (*tc.iter().min().expect("3")).max(first as isize) as usize;
                let thi = (*tc.iter().max().expect("3")).min(last);
                if thi < tlo as isize {
                    continue;
                }
                for band in tlo..=thi as usize {
                    clip_piece(f, cell, &piece, band, th[band], th[band + 1], &mut local);
                }
            }
        }
    }
    for (band, p, q) in cancel(&local) {
        out.push(band, p, q);
    }
}

/// Band outline edges for the whole field.
pub(crate) fn band_edges(f: &Field, th: &[f64], refine: &Refinement) -> EdgeSink {
    let mut out = EdgeSink::new(th.len() - 1);
    for r in 0..f.nrows - 1 {
        for c in 0..f.ncols - 1 {
            process_cell(f, th, refine, Cell { r, c }, &mut out);
        }
    }
    out
}
