//! Assembly of directed outline edges into polygons with holes.

use std::collections::HashMap;
use std::f64::consts::TAU;

use super::iso::{cancel, key, Key, Pt};

/// A polygon in whatever planar coordinates the edges used. Rings are open
/// (the first point is not repeated); the exterior is counter-clockwise and
/// holes are clockwise.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct RawPolygon {
    pub exterior: Vec<Pt>,
    pub holes: Vec<Vec<Pt>>,
}

pub(crate) fn signed_area(ring: &[Pt]) -> f64 {
    let n = ring.len();
    let mut s = 0.0;
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        s += a[0] * b[1] - b[0] * a[1];
    }
    0.5 * s
}

/// Even-odd point-in-ring test.
pub(crate) fn point_in_ring(p: Pt, ring: &[Pt]) -> bool {
    let n = ring.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (ring[i], ring[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn angle(from: Pt, to: Pt) -> f64 {
    (to[1] - from[1]).atan2(to[0] - from[0])
}

/// Follows edges into closed rings. At a vertex with several unused
/// outgoing edges the one reached first turning clockwise from the way we
/// came in is taken, which keeps pinched areas as separate rings.
fn chain(edges: &[(Pt, Pt)]) -> Vec<Vec<Pt>> {
    let mut outgoing: HashMap<Key, Vec<usize>> = HashMap::new();
    for (i, &(p, _)) in edges.iter().enumerate() {
        outgoing.entry(key(p)).or_default().push(i);
    }
    let mut used = vec![false; edges.len()];
    let mut rings = Vec::new();
    for start in 0..edges.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let origin = edges[start].0;
        let mut ring = vec![origin];
        let (mut prev, mut cur) = edges[start];
        let closed = loop {
            if key(cur) == key(origin) {
                break true;
            }
            ring.push(cur);
            let Some(cands) = outgoing.get(&key(cur)) else {
                break false;
            };
            let back = angle(cur, prev);
            let mut best: Option<(f64, usize)> = None;
            for &e in cands {
                if used[e] {
                    continue;
                }
                let mut turn = (back - angle(cur, edges[e].1)).rem_euclid(TAU);
                if turn == 0.0 {
                    turn = TAU;
                }
                if best.is_none_or(|(t, _)| turn < t) {
                    best = Some((turn, e));
                }
            }
            let Some((_, e)) = best else {
                break false;
            };
            used[e] = true;
            prev = cur;
            cur = edges[e].1;
        };
        if closed {
            rings.push(ring);
        }
    }
    rings
}

/// Drops repeated points and vertices in the middle of exactly horizontal or
/// vertical runs.
pub(crate) fn tidy(ring: Vec<Pt>) -> Vec<Pt> {
    let mut pts: Vec<Pt> = Vec::with_capacity(ring.len());
    for p in ring {
        if pts.last() != Some(&p) {
            pts.push(p);
        }
    }
    while pts.len() > 1 && pts.first() == pts.last() {
        pts.pop();
    }
    let redundant = |a: Pt, b: Pt, c: Pt| {
        (a[0] == b[0] && b[0] == c[0]) || (a[1] == b[1] && b[1] == c[1])
    };
    let mut changed = true;
    while changed && pts.len() >= 3 {
        changed = false;
        let mut out: Vec<Pt> = Vec::with_capacity(pts.len());
        let n = pts.len();
        for i in 0..n {
            let a = out.last().copied().unwrap_or(pts[(i + n - 1) % n]);
            let (b, c) = (pts[i], pts[(i + 1) % n]);
            if redundant(a, b, c) || a == b {
                changed = true;
            } else {
                out.push(b);
            }
        }
        if out.len() >= 3 {
            let n = out.len();
            if redundant(out[n - 1], out[0], out[1]) {
                out.remove(0);
                changed = true;
            }
        }
        pts = out;
    }
    pts
}

fn bbox(ring: &[Pt]) -> [f64; 4] {
    let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
    for p in ring {
        b[0] = b[0].min(p[0]);
        b[1] = b[1].min(p[1]);
        b[2] = b[2].max(p[0]);
        b[3] = b[3].max(p[1]);
    }
    b
}

/// Builds polygons from a band's raw outline edges.
pub(crate) fn assemble(edges: &[(Pt, Pt)]) -> Vec<RawPolygon> {
    let tagged: Vec<((), Pt, Pt)> = edges.iter().map(|&(p, q)| ((), p, q)).collect();
    let live: Vec<(Pt, Pt)> = cancel(&tagged).into_iter().map(|(_, p, q)| (p, q)).collect();
    let mut outers: Vec<(Vec<Pt>, f64, [f64; 4])> = Vec::new();
    let mut holes: Vec<Vec<Pt>> = Vec::new();
    for ring in chain(&live) {
        let ring = tidy(ring);
        if ring.len() < 3 {
            continue;
        }
        let a = signed_area(&ring);
        if a > 0.0 {
            let b = bbox(&ring);
            outers.push((ring, a, b));
        } else if a < 0.0 {
            holes.push(ring);
        }
    }
    let mut polys: Vec<RawPolygon> = outers
        .iter()
        .map(|(r, _, _)| RawPolygon {
            exterior: r.clone(),
            holes: Vec::new(),
        })
        .collect();
    for hole in holes {
        let probe = [
            0.5 * (hole[0][0] + hole[1][0]),
            0.5 * (hole[0][1] + hole[1][1]),
        ];
        let owner = outers
            .iter()
            .enumerate()
            .filter(|(_, (_, _, b))| {
                probe[0] >= b[0] && probe[0] <= b[2] && probe[1] >= b[1] && probe[1] <= b[3]
            })
            .filter(|(_, (r, _, _))| point_in_ring(probe, r))
            .min_by(|x, y| x.1 .1.total_cmp(&y.1 .1))
            .map(|(i, _)| i);
        if let Some(i) = owner {
            polys[i].holes.push(hole);
        }
    }
    polys
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(x: f64, y: f64, s: f64) -> Vec<(Pt, Pt)> {
        let p = [[x, y], [x + s, y], [x + s, y + s], [x, y + s]];
        (0..4).map(|i| (p[i], p[(i + 1) % 4])).collect()
    }

    #[test]
    fn adjacent_squares_merge() {
        let mut e = square(0.0, 0.0, 1.0);
        e.extend(square(1.0, 0.0, 1.0));
        let polys = assemble(&e);
        assert_eq!(polys.len(), 1);
        assert_eq!(polys[0].exterior.len(), 4);
        assert_eq!(signed_area(&polys[0].exterior), 2.0);
    }

    #[test]
    fn ring_with_hole() {
        let mut e = Vec::new();
        for r in 0..3 {
            for c in 0..3 {
                if (r, c) != (1, 1) {
                    e.extend(square(c as f64, r as f64, 1.0));
                }
            }
        }
        let polys = assemble(&e);
        assert_eq!(polys.len(), 1);
        assert_eq!(polys[0].holes.len(), 1);
        assert_eq!(signed_area(&polys[0].holes[0]), -1.0);
    }

    #[test]
    fn diagonal_pinch_stays_two_rings() {
        let mut e = square(0.0, 0.0, 1.0);
        e.extend(square(1.0, 1.0, 1.0));
        let polys = assemble(&e);
        assert_eq!(polys.len(), 2);
        assert!(polys.iter().all(|p| p.exterior.len() == 4));
    }

    #[test]
    fn tidy_removes_collinear() {
        let r = tidy(vec![
            [0.0, 0.0],
            [0.5, 0.0],
            [1.0, 0.0],
            [1.0, 1.0],
            [1.0, 1.0],
            [0.0, 1.0],
            [0.0, 0.0],
        ]);
        assert_eq!(r, vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
    }
}
