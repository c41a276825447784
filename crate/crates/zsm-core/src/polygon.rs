//! Planar multi-polygon boolean algebra.
//!
//! The implementation snaps coordinates to a 1 nm integer grid and builds the
//! exact arrangement of the input edges with i128 predicates, so repeated
//! intersection/difference chains (the estimator applies dozens against the
//! same shadow boundaries) stay robust through shared edges, T-junctions and
//! pinch vertices. Faces are labeled by even-odd parity per operand and the
//! result boundary is re-assembled by walking kept-region half-edges.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::conzono::VertexList;
use crate::hull::hull2d;

/// Grid resolution: 1 unit = 1e-9 m.
const SCALE: f64 = 1e9;
/// Sliver threshold in doubled integer area units (1e-12 m^2).
const SLIVER_2A: i128 = 2_000_000;

type IPt = (i64, i64);

fn snap(p: [f64; 2]) -> IPt {
    ((p[0] * SCALE).round() as i64, (p[1] * SCALE).round() as i64)
}

fn unsnap(p: IPt) -> [f64; 2] {
    [p.0 as f64 / SCALE, p.1 as f64 / SCALE]
}

fn cross_i(o: IPt, a: IPt, b: IPt) -> i128 {
    let ax = (a.0 - o.0) as i128;
    let ay = (a.1 - o.1) as i128;
    let bx = (b.0 - o.0) as i128;
    let by = (b.1 - o.1) as i128;
    ax * by - ay * bx
}

/// One polygon: counterclockwise outer ring, clockwise holes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Polygon2D {
    pub outer: Vec<[f64; 2]>,
    pub holes: Vec<Vec<[f64; 2]>>,
}

/// A planar region: zero or more interior-disjoint polygons with holes.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MultiPolygon2D {
    pub components: Vec<Polygon2D>,
}

/// Boolean operation selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoolOp {
    Union,
    Intersection,
    Difference,
}

/// Aggregate measurements of a region.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Measures {
    pub area: f64,
    pub bbox: Option<([f64; 2], [f64; 2])>,
    pub component_count: usize,
    pub components: Vec<ComponentMeasures>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentMeasures {
    pub area: f64,
    pub centroid: [f64; 2],
    pub bbox: ([f64; 2], [f64; 2]),
}

fn ring_area_2(ring: &[[f64; 2]]) -> f64 {
    let mut s = 0.0;
    for i in 0..ring.len() {
        let j = (i + 1) % ring.len();
        s += ring[i][0] * ring[j][1] - ring[j][0] * ring[i][1];
    }
    s
}

impl MultiPolygon2D {
    pub fn empty() -> Self {
        MultiPolygon2D {
            components: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Build from arbitrary closed rings with even-odd fill; the input is
    /// normalized through the arrangement engine, so self-intersections and
    /// ring orientation do not matter.
    pub fn from_rings(rings: &[Vec<[f64; 2]>]) -> Self {
        let edges = collect_edges(rings, false);
        boolean_core(edges, |a, _| a)
    }

    /// Convex hull of a 2-D point set as a single polygon; degenerate
    /// (collinear) inputs give the empty region.
    pub fn from_convex_vertices(v: &VertexList) -> Self {
        assert!(v.dim == 2 || v.points.is_empty(), "expected 2-D points");
        let pts: Vec<nalgebra::Vector2<f64>> = v
            .points
            .iter()
            .map(|p| nalgebra::Vector2::new(p[0], p[1]))
            .collect();
        Self::from_convex_points(&pts)
    }

    /// Same as [`Self::from_convex_vertices`] for plain points.
    pub fn from_convex_points(pts: &[nalgebra::Vector2<f64>]) -> Self {
        let h = hull2d(pts);
        if h.len() < 3 {
            return Self::empty();
        }
        let ring: Vec<[f64; 2]> = h.iter().map(|p| [p.x, p.y]).collect();
        Self::from_rings(&[ring])
    }

    fn all_rings(&self) -> Vec<&Vec<[f64; 2]>> {
        let mut out = Vec::new();
        for c in &self.components {
            out.push(&c.outer);
            for h in &c.holes {
                out.push(h);
            }
        }
        out
    }

    /// Exact boolean operation with snap rounding.
    pub fn boolean_op(kind: BoolOp, a: &MultiPolygon2D, b: &MultiPolygon2D) -> MultiPolygon2D {
        let ra: Vec<Vec<[f64; 2]>> = a.all_rings().into_iter().cloned().collect();
        let rb: Vec<Vec<[f64; 2]>> = b.all_rings().into_iter().cloned().collect();
        let mut edges = collect_edges(&ra, false);
        edges.extend(collect_edges(&rb, true));
        match kind {
            BoolOp::Union => boolean_core(edges, |x, y| x || y),
            BoolOp::Intersection => boolean_core(edges, |x, y| x && y),
            BoolOp::Difference => boolean_core(edges, |x, y| x && !y),
        }
    }

    pub fn union(a: &MultiPolygon2D, b: &MultiPolygon2D) -> MultiPolygon2D {
        Self::boolean_op(BoolOp::Union, a, b)
    }

    pub fn intersection(a: &MultiPolygon2D, b: &MultiPolygon2D) -> MultiPolygon2D {
        Self::boolean_op(BoolOp::Intersection, a, b)
    }

    pub fn difference(a: &MultiPolygon2D, b: &MultiPolygon2D) -> MultiPolygon2D {
        Self::boolean_op(BoolOp::Difference, a, b)
    }

    pub fn area(&self) -> f64 {
        let mut total = 0.0;
        for c in &self.components {
            total += 0.5 * ring_area_2(&c.outer).abs();
            for h in &c.holes {
                total -= 0.5 * ring_area_2(h).abs();
            }
        }
        total
    }

    /// `area(a \ b) + area(b \ a)`.
    pub fn sym_diff_area(a: &MultiPolygon2D, b: &MultiPolygon2D) -> f64 {
        Self::difference(a, b).area() + Self::difference(b, a).area()
    }

    pub fn measures(&self) -> Measures {
        let mut comps = Vec::new();
        let mut total_area = 0.0;
        let mut bbox: Option<([f64; 2], [f64; 2])> = None;
        for c in &self.components {
            let mut area2 = ring_area_2(&c.outer).abs();
            // Centroid of the outer ring minus the holes, by the signed ring
            // centroid formula.
            let ring_centroid_weighted = |ring: &[[f64; 2]]| -> ([f64; 2], f64) {
                let mut cx = 0.0;
                let mut cy = 0.0;
                let mut a2 = 0.0;
                for i in 0..ring.len() {
                    let j = (i + 1) % ring.len();
                    let w = ring[i][0] * ring[j][1] - ring[j][0] * ring[i][1];
                    cx += (ring[i][0] + ring[j][0]) * w;
                    cy += (ring[i][1] + ring[j][1]) * w;
                    a2 += w;
                }
                ([cx / 3.0, cy / 3.0], a2)
            };
            let (cw, _) = ring_centroid_weighted(&c.outer);
            let mut cx = cw[0].abs() * 0.0 + cw[0];
            let mut cy = cw[1];
            let outer_sign = if ring_area_2(&c.outer) < 0.0 { -1.0 } else { 1.0 };
            cx *= outer_sign;
            cy *= outer_sign;
            for h in &c.holes {
                let (hw, ha2) = ring_centroid_weighted(h);
                // Holes subtract area regardless of stored orientation.
                let s = if ha2 > 0.0 { -1.0 } else { 1.0 };
                cx += s * hw[0];
                cy += s * hw[1];
                area2 -= ha2.abs();
            }
            let area = 0.5 * area2;
            let centroid = if area.abs() > 0.0 {
                [cx / area2, cy / area2]
            } else {
                c.outer[0]
            };
            let mut lo = [f64::INFINITY; 2];
            let mut hi = [f64::NEG_INFINITY; 2];
            for p in &c.outer {
                for k in 0..2 {
                    lo[k] = lo[k].min(p[k]);
                    hi[k] = hi[k].max(p[k]);
                }
            }
            total_area += area;
            bbox = Some(match bbox {
                None => (lo, hi),
                Some((mut l, mut h)) => {
                    for k in 0..2 {
                        l[k] = l[k].min(lo[k]);
                        h[k] = h[k].max(hi[k]);
                    }
                    (l, h)
                }
            });
            comps.push(ComponentMeasures {
                area,
                centroid,
                bbox: (lo, hi),
            });
        }
        Measures {
            area: total_area,
            bbox,
            component_count: self.components.len(),
            components: comps,
        }
    }

    /// Even-odd membership; points within 1e-9 m of a boundary count inside.
    pub fn point_in(&self, p: [f64; 2]) -> bool {
        let q = snap(p);
        let mut parity = false;
        for ring in self.all_rings() {
            let ir: Vec<IPt> = ring.iter().map(|v| snap(*v)).collect();
            for i in 0..ir.len() {
                let a = ir[i];
                let b = ir[(i + 1) % ir.len()];
                if point_near_segment(q, a, b) {
                    return true;
                }
                // Upward ray crossing with the half-open x rule.
                if (a.0 <= q.0) != (b.0 <= q.0) {
                    // y-coordinate of the edge at x = q.0, compared exactly:
                    // sign of cross tells which side; orient so b.x > a.x.
                    let (lo, hi) = if a.0 < b.0 { (a, b) } else { (b, a) };
                    let c = cross_i(lo, hi, q);
                    // c > 0 means q is left of lo->hi, i.e. above the edge.
                    if c < 0 {
                        parity = !parity;
                    }
                }
            }
        }
        parity
    }

    /// Decompose into triangles (holes are bridged into their outer rings
    /// first). Intended for convex-piece generation, not rendering.
    pub fn triangulate(&self) -> Vec<[[f64; 2]; 3]> {
        let mut out = Vec::new();
        for c in &self.components {
            let merged = merge_holes(&c.outer, &c.holes);
            ear_clip(&merged, &mut out);
        }
        out
    }
}

fn point_near_segment(q: IPt, a: IPt, b: IPt) -> bool {
    let tol2: i128 = 1; // (1 unit)^2 = (1e-9 m)^2
    let abx = (b.0 - a.0) as i128;
    let aby = (b.1 - a.1) as i128;
    let aqx = (q.0 - a.0) as i128;
    let aqy = (q.1 - a.1) as i128;
    let len2 = abx * abx + aby * aby;
    if len2 == 0 {
        return aqx * aqx + aqy * aqy <= tol2;
    }
    let t = abx * aqx + aby * aqy;
    if t <= 0 {
        return aqx * aqx + aqy * aqy <= tol2;
    }
    if t >= len2 {
        let bqx = (q.0 - b.0) as i128;
        let bqy = (q.1 - b.1) as i128;
        return bqx * bqx + bqy * bqy <= tol2;
    }
    let c = abx * aqy - aby * aqx;
    // distance^2 = c^2 / len2 <= tol2
    c.checked_mul(c).map_or(false, |c2| c2 <= tol2 * len2)
}

/// Snap rings to the grid and emit their edges tagged with the operand.
fn collect_edges(rings: &[Vec<[f64; 2]>], is_b: bool) -> Vec<(IPt, IPt, bool)> {
    let mut out = Vec::new();
    for ring in rings {
        let mut ir: Vec<IPt> = ring.iter().map(|p| snap(*p)).collect();
        ir.dedup();
        while ir.len() > 1 && ir.first() == ir.last() {
            ir.pop();
        }
        if ir.len() < 3 {
            continue;
        }
        for i in 0..ir.len() {
            let a = ir[i];
            let b = ir[(i + 1) % ir.len()];
            if a != b {
                out.push((a, b, is_b));
            }
        }
    }
    out
}

fn between_strict(p: IPt, a: IPt, b: IPt) -> bool {
    if p == a || p == b {
        return false;
    }
    if cross_i(a, b, p) != 0 {
        return false;
    }
    let dx = (b.0 - a.0) as i128;
    let dy = (b.1 - a.1) as i128;
    let t = dx * (p.0 - a.0) as i128 + dy * (p.1 - a.1) as i128;
    t > 0 && t < dx * dx + dy * dy
}

/// Split all segments at mutual intersections until none remain (snap
/// rounding can cascade, so this iterates to a fixpoint).
fn build_arrangement(mut segs: Vec<(IPt, IPt, bool)>) -> Vec<(IPt, IPt, bool, bool)> {
    segs.retain(|s| s.0 != s.1);
    for round in 0..64 {
        let n = segs.len();
        let mut splits: Vec<Vec<IPt>> = vec![Vec::new(); n];
        let bbox: Vec<(i64, i64, i64, i64)> = segs
            .iter()
            .map(|s| {
                (
                    s.0 .0.min(s.1 .0),
                    s.0 .0.max(s.1 .0),
                    s.0 .1.min(s.1 .1),
                    s.0 .1.max(s.1 .1),
                )
            })
            .collect();
        let mut any = false;
        for i in 0..n {
            for j in i + 1..n {
                if bbox[i].1 < bbox[j].0
                    || bbox[j].1 < bbox[i].0
                    || bbox[i].3 < bbox[j].2
                    || bbox[j].3 < bbox[i].2
                {
                    continue;
                }
                let (a1, b1, _) = segs[i];
                let (a2, b2, _) = segs[j];
                // Endpoints of one lying strictly inside the other.
                for p in [a2, b2] {
                    if between_strict(p, a1, b1) {
                        splits[i].push(p);
                        any = true;
                    }
                }
                for p in [a1, b1] {
                    if between_strict(p, a2, b2) {
                        splits[j].push(p);
                        any = true;
                    }
                }
                // Proper crossing of open interiors.
                let d1 = cross_i(a1, b1, a2);
                let d2 = cross_i(a1, b1, b2);
                let d3 = cross_i(a2, b2, a1);
                let d4 = cross_i(a2, b2, b1);
                if ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0))
                    && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))
                {
                    // Interior crossing: compute in f64 (ample precision for
                    // rounding to the 1 nm grid) and snap.
                    let fa1 = (a1.0 as f64, a1.1 as f64);
                    let fb1 = (b1.0 as f64, b1.1 as f64);
                    let fa2 = (a2.0 as f64, a2.1 as f64);
                    let fb2 = (b2.0 as f64, b2.1 as f64);
                    let denom = (fb1.0 - fa1.0) * (fb2.1 - fa2.1)
                        - (fb1.1 - fa1.1) * (fb2.0 - fa2.0);
                    if denom != 0.0 {
                        let t = ((fa2.0 - fa1.0) * (fb2.1 - fa2.1)
                            - (fa2.1 - fa1.1) * (fb2.0 - fa2.0))
                            / denom;
                        let x = (
                            (fa1.0 + t * (fb1.0 - fa1.0)).round() as i64,
                            (fa1.1 + t * (fb1.1 - fa1.1)).round() as i64,
                        );
                        if x != a1 && x != b1 {
                            splits[i].push(x);
                            any = true;
                        }
                        if x != a2 && x != b2 {
                            splits[j].push(x);
                            any = true;
                        }
                    }
                }
            }
        }
        if !any {
            break;
        }
        if round == 63 {
            log::warn!("arrangement splitting did not reach a fixpoint");
        }
        let mut next: Vec<(IPt, IPt, bool)> = Vec::with_capacity(segs.len() * 2);
        for (i, (a, b, tag)) in segs.iter().enumerate() {
            if splits[i].is_empty() {
                next.push((*a, *b, *tag));
                continue;
            }
            let mut pts = splits[i].clone();
            pts.push(*a);
            pts.push(*b);
            let dx = (b.0 - a.0) as i128;
            let dy = (b.1 - a.1) as i128;
            pts.sort_by_key(|p| dx * (p.0 - a.0) as i128 + dy * (p.1 - a.1) as i128);
            pts.dedup();
            for w in pts.windows(2) {
                if w[0] != w[1] {
                    next.push((w[0], w[1], *tag));
                }
            }
        }
        segs = next;
    }

    // Merge coincident segments into undirected parity edges.
    let mut merged: HashMap<(IPt, IPt), (bool, bool)> = HashMap::new();
    for (a, b, is_b) in segs {
        let key = if a <= b { (a, b) } else { (b, a) };
        let e = merged.entry(key).or_insert((false, false));
        if is_b {
            e.1 = !e.1;
        } else {
            e.0 = !e.0;
        }
    }
    // Sorted so downstream node/face numbering is deterministic across runs.
    let mut out: Vec<(IPt, IPt, bool, bool)> = merged
        .into_iter()
        .filter(|(_, (ta, tb))| *ta || *tb)
        .map(|((a, b), (ta, tb))| (a, b, ta, tb))
        .collect();
    out.sort_unstable();
    out
}

/// Angular order of direction vectors, counterclockwise from the +x axis,
/// exact in integers.
fn dir_cmp(d1: (i64, i64), d2: (i64, i64)) -> std::cmp::Ordering {
    let half = |d: (i64, i64)| -> u8 {
        if d.1 > 0 || (d.1 == 0 && d.0 > 0) {
            0
        } else {
            1
        }
    };
    let (h1, h2) = (half(d1), half(d2));
    if h1 != h2 {
        return h1.cmp(&h2);
    }
    let c = d1.0 as i128 * d2.1 as i128 - d1.1 as i128 * d2.0 as i128;
    // c > 0: d1 is clockwise of d2 within a half-plane, i.e. d1 first.
    c.cmp(&0).reverse()
}

struct HalfEdge {
    from: usize,
    to: usize,
    dir: (i64, i64),
    tog_a: bool,
    tog_b: bool,
    face: usize,
    pos_at_to_twin: usize, // position of the twin in `to`'s outgoing list
}

/// The shared machinery behind every boolean operation: arrangement, face
/// extraction, parity labeling, boundary walking, ring assembly.
fn boolean_core<F>(edges: Vec<(IPt, IPt, bool)>, keep: F) -> MultiPolygon2D
where
    F: Fn(bool, bool) -> bool,
{
    let arr = build_arrangement(edges);
    if arr.is_empty() {
        return MultiPolygon2D::empty();
    }

    // Node table.
    let mut node_ids: HashMap<IPt, usize> = HashMap::new();
    let mut nodes: Vec<IPt> = Vec::new();
    let id_of = |p: IPt, nodes: &mut Vec<IPt>, node_ids: &mut HashMap<IPt, usize>| -> usize {
        *node_ids.entry(p).or_insert_with(|| {
            nodes.push(p);
            nodes.len() - 1
        })
    };

    let mut halves: Vec<HalfEdge> = Vec::with_capacity(arr.len() * 2);
    for (a, b, ta, tb) in &arr {
        let ia = id_of(*a, &mut nodes, &mut node_ids);
        let ib = id_of(*b, &mut nodes, &mut node_ids);
        let d = (b.0 - a.0, b.1 - a.1);
        halves.push(HalfEdge {
            from: ia,
            to: ib,
            dir: d,
            tog_a: *ta,
            tog_b: *tb,
            face: usize::MAX,
            pos_at_to_twin: 0,
        });
        halves.push(HalfEdge {
            from: ib,
            to: ia,
            dir: (-d.0, -d.1),
            tog_a: *ta,
            tog_b: *tb,
            face: usize::MAX,
            pos_at_to_twin: 0,
        });
    }
    let twin = |h: usize| h ^ 1;

    // Angular sort of outgoing half-edges at each node.
    let mut outgoing: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    for (i, h) in halves.iter().enumerate() {
        outgoing[h.from].push(i);
    }
    for list in outgoing.iter_mut() {
        list.sort_by(|&x, &y| dir_cmp(halves[x].dir, halves[y].dir));
    }
    let mut pos_in_from: Vec<usize> = vec![0; halves.len()];
    for list in &outgoing {
        for (k, &h) in list.iter().enumerate() {
            pos_in_from[h] = k;
        }
    }
    for i in 0..halves.len() {
        halves[i].pos_at_to_twin = pos_in_from[twin(i)];
    }

    // Face traversal: next(h) rotates clockwise from twin(h) at to(h),
    // keeping the face on the left.
    let next_of = |h: usize, halves: &Vec<HalfEdge>, outgoing: &Vec<Vec<usize>>| -> usize {
        let v = halves[h].to;
        let list = &outgoing[v];
        let idx = halves[h].pos_at_to_twin;
        list[(idx + list.len() - 1) % list.len()]
    };

    let mut face_count = 0usize;
    let mut face_area2: Vec<i128> = Vec::new();
    let mut face_cycle_start: Vec<usize> = Vec::new();
    for h0 in 0..halves.len() {
        if halves[h0].face != usize::MAX {
            continue;
        }
        let fid = face_count;
        face_count += 1;
        let mut area2: i128 = 0;
        let mut h = h0;
        loop {
            halves[h].face = fid;
            let a = nodes[halves[h].from];
            let b = nodes[halves[h].to];
            area2 += a.0 as i128 * b.1 as i128 - b.0 as i128 * a.1 as i128;
            h = next_of(h, &halves, &outgoing);
            if h == h0 {
                break;
            }
        }
        face_area2.push(area2);
        face_cycle_start.push(h0);
    }

    // Connected components of the node graph.
    let mut comp = UnionFind::new(nodes.len());
    for h in (0..halves.len()).step_by(2) {
        comp.union(halves[h].from, halves[h].to);
    }
    let mut comp_edges: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for h in (0..halves.len()).step_by(2) {
        comp_edges
            .entry(comp.find(halves[h].from))
            .or_default()
            .push(h);
    }

    // Parity labels per face: seed each component's unbounded-side face by
    // exact ray casting against the other components, then spread across
    // edges (each edge toggles its operand parities).
    let mut in_a: Vec<Option<bool>> = vec![None; face_count];
    let mut in_b: Vec<Option<bool>> = vec![None; face_count];
    let comp_keys: Vec<usize> = comp_edges.keys().cloned().collect();
    for &ck in &comp_keys {
        // Representative node: any node of the component.
        let rep_node = halves[comp_edges[&ck][0]].from;
        let rep = nodes[rep_node];
        let mut pa = false;
        let mut pb = false;
        for (&ok, ohs) in &comp_edges {
            if ok == ck {
                continue;
            }
            for &h in ohs {
                let a = nodes[halves[h].from];
                let b = nodes[halves[h].to];
                if (a.0 <= rep.0) != (b.0 <= rep.0) {
                    let (lo, hi) = if a.0 < b.0 { (a, b) } else { (b, a) };
                    if cross_i(lo, hi, rep) < 0 {
                        if halves[h].tog_a {
                            pa = !pa;
                        }
                        if halves[h].tog_b {
                            pb = !pb;
                        }
                    }
                }
            }
        }
        // The component's unbounded-side face: the face of its (unique)
        // negative cycle.
        let mut outer_face = usize::MAX;
        for &h in &comp_edges[&ck] {
            for hh in [h, twin(h)] {
                let f = halves[hh].face;
                if face_area2[f] < 0 && (outer_face == usize::MAX || face_area2[f] < face_area2[outer_face]) {
                    outer_face = f;
                }
            }
        }
        if outer_face == usize::MAX {
            continue;
        }
        // BFS across the component's faces.
        in_a[outer_face] = Some(pa);
        in_b[outer_face] = Some(pb);
        let mut queue = vec![outer_face];
        // face -> its half-edges (collected lazily for this component).
        let mut face_halves: HashMap<usize, Vec<usize>> = HashMap::new();
        for &h in &comp_edges[&ck] {
            for hh in [h, twin(h)] {
                face_halves.entry(halves[hh].face).or_default().push(hh);
            }
        }
        while let Some(f) = queue.pop() {
            let (fa, fb) = (in_a[f].unwrap(), in_b[f].unwrap());
            if let Some(hs) = face_halves.get(&f) {
                for &h in hs {
                    let g = halves[twin(h)].face;
                    if in_a[g].is_none() {
                        in_a[g] = Some(fa ^ halves[h].tog_a);
                        in_b[g] = Some(fb ^ halves[h].tog_b);
                        queue.push(g);
                    }
                }
            }
        }
    }

    // Kept faces and boundary half-edges (kept on the left only).
    // Kept is purely parity-based: a nested component's unbounded-side face
    // object describes a bounded region of the surrounding component, so the
    // sign of its cycle area must not factor in. The genuinely unbounded face
    // has both parities false and is never kept by any of the operations.
    let kept: Vec<bool> = (0..face_count)
        .map(|f| keep(in_a[f].unwrap_or(false), in_b[f].unwrap_or(false)))
        .collect();
    let is_boundary: Vec<bool> = (0..halves.len())
        .map(|h| kept[halves[h].face] && !kept[halves[twin(h)].face])
        .collect();

    // Walk boundary cycles.
    let mut visited = vec![false; halves.len()];
    let mut rings_i: Vec<Vec<IPt>> = Vec::new();
    for h0 in 0..halves.len() {
        if !is_boundary[h0] || visited[h0] {
            continue;
        }
        let mut ring = Vec::new();
        let mut h = h0;
        loop {
            visited[h] = true;
            ring.push(nodes[halves[h].from]);
            // First boundary edge rotating clockwise from twin(h) at to(h).
            let v = halves[h].to;
            let list = &outgoing[v];
            let idx = halves[h].pos_at_to_twin;
            let mut nxt = usize::MAX;
            for k in 1..=list.len() {
                let cand = list[(idx + list.len() - k) % list.len()];
                if is_boundary[cand] {
                    nxt = cand;
                    break;
                }
            }
            if nxt == usize::MAX {
                log::warn!("boundary walk dead-ended; dropping partial ring");
                ring.clear();
                break;
            }
            h = nxt;
            if h == h0 {
                break;
            }
        }
        if ring.len() >= 3 {
            rings_i.push(ring);
        }
    }

    assemble(rings_i)
}

/// Group walked rings into polygons: positive rings are outers, negative
/// rings are holes assigned to the smallest containing outer.
fn assemble(rings_i: Vec<Vec<IPt>>) -> MultiPolygon2D {
    let ring_area2_i = |ring: &[IPt]| -> i128 {
        let mut s: i128 = 0;
        for i in 0..ring.len() {
            let j = (i + 1) % ring.len();
            s += ring[i].0 as i128 * ring[j].1 as i128 - ring[j].0 as i128 * ring[i].1 as i128;
        }
        s
    };
    let mut outers: Vec<(Vec<IPt>, i128)> = Vec::new();
    let mut holes: Vec<(Vec<IPt>, i128)> = Vec::new();
    for r in rings_i {
        let a2 = ring_area2_i(&r);
        if a2.abs() < SLIVER_2A {
            continue;
        }
        if a2 > 0 {
            outers.push((r, a2));
        } else {
            holes.push((r, a2));
        }
    }
    // Exact containment of a doubled-coordinate point in an integer ring.
    let contains_2x = |ring: &[IPt], q2: (i128, i128)| -> bool {
        let mut parity = false;
        for i in 0..ring.len() {
            let a = ring[i];
            let b = ring[(i + 1) % ring.len()];
            let (a2, b2) = (
                (2 * a.0 as i128, 2 * a.1 as i128),
                (2 * b.0 as i128, 2 * b.1 as i128),
            );
            if (a2.0 <= q2.0) != (b2.0 <= q2.0) {
                let (lo, hi) = if a2.0 < b2.0 { (a2, b2) } else { (b2, a2) };
                let c = (hi.0 - lo.0) * (q2.1 - lo.1) - (hi.1 - lo.1) * (q2.0 - lo.0);
                if c < 0 {
                    parity = !parity;
                }
            }
        }
        parity
    };
    let mut comps: Vec<Polygon2D> = outers
        .iter()
        .map(|(r, _)| Polygon2D {
            outer: r.iter().map(|p| unsnap(*p)).collect(),
            holes: Vec::new(),
        })
        .collect();
    for (h, _) in &holes {
        // Midpoint of the first hole edge in doubled coordinates.
        let q2 = (
            h[0].0 as i128 + h[1].0 as i128,
            h[0].1 as i128 + h[1].1 as i128,
        );
        let mut best: Option<usize> = None;
        for (k, (outer, a2)) in outers.iter().enumerate() {
            if contains_2x(outer, q2) {
                best = match best {
                    None => Some(k),
                    Some(prev) if a2.abs() < outers[prev].1.abs() => Some(k),
                    keep => keep,
                };
            }
        }
        if let Some(k) = best {
            comps[k].holes.push(h.iter().map(|p| unsnap(*p)).collect());
        }
    }
    MultiPolygon2D { components: comps }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }
    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

/// Bridge every hole into the outer ring (nearest +x visibility split),
/// producing one simple (possibly pinched) ring.
fn merge_holes(outer: &[[f64; 2]], holes: &[Vec<[f64; 2]>]) -> Vec<[f64; 2]> {
    let mut ring: Vec<[f64; 2]> = outer.to_vec();
    if ring_area_2(&ring) < 0.0 {
        ring.reverse();
    }
    let mut pending: Vec<Vec<[f64; 2]>> = holes
        .iter()
        .map(|h| {
            let mut h = h.clone();
            // Holes clockwise for the merge walk.
            if ring_area_2(&h) > 0.0 {
                h.reverse();
            }
            h
        })
        .collect();
    // Right-most holes first so bridges cannot cross later holes.
    pending.sort_by(|a, b| {
        let ma = a.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
        let mb = b.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
        mb.partial_cmp(&ma).unwrap()
    });
    for hole in pending {
        // Hole vertex with maximum x.
        let mi = (0..hole.len())
            .max_by(|&i, &j| hole[i][0].partial_cmp(&hole[j][0]).unwrap())
            .unwrap();
        let m = hole[mi];
        // Closest intersection of the +x ray from m with the ring.
        let mut best: Option<(f64, usize)> = None; // (x of hit, ring edge index)
        for i in 0..ring.len() {
            let a = ring[i];
            let b = ring[(i + 1) % ring.len()];
            if (a[1] - m[1]) * (b[1] - m[1]) > 0.0 {
                continue;
            }
            let dy = b[1] - a[1];
            let x_hit = if dy.abs() < 1e-30 {
                a[0].max(b[0])
            } else {
                a[0] + (m[1] - a[1]) / dy * (b[0] - a[0])
            };
            if x_hit >= m[0] - 1e-12 {
                match best {
                    None => best = Some((x_hit, i)),
                    Some((bx, _)) if x_hit < bx => best = Some((x_hit, i)),
                    _ => {}
                }
            }
        }
        let Some((_, ei)) = best else {
            log::warn!("hole bridge target not found; hole skipped");
            continue;
        };
        // Bridge to the visible endpoint of the hit edge (the one with the
        // larger x is always visible for the nearest hit).
        let a = ring[ei];
        let b = ring[(ei + 1) % ring.len()];
        let pi = if a[0] >= b[0] { ei } else { (ei + 1) % ring.len() };
        // Splice: ring[..=pi], hole from mi around, back to m, then ring[pi..].
        let mut merged: Vec<[f64; 2]> = Vec::with_capacity(ring.len() + hole.len() + 2);
        merged.extend_from_slice(&ring[..=pi]);
        for k in 0..=hole.len() {
            merged.push(hole[(mi + k) % hole.len()]);
        }
        merged.extend_from_slice(&ring[pi..]);
        ring = merged;
    }
    ring
}

/// Classic O(n^2) ear clipping on a ccw ring (duplicate bridge vertices
/// allowed); zero-area ears are removed without emitting triangles.
fn ear_clip(ring: &[[f64; 2]], out: &mut Vec<[[f64; 2]; 3]>) {
    let mut v: Vec<[f64; 2]> = ring.to_vec();
    let cross2 = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| -> f64 {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let scale = ring
        .iter()
        .map(|p| p[0].abs().max(p[1].abs()))
        .fold(1.0f64, f64::max);
    let eps = 1e-12 * scale * scale;
    let mut guard = 0usize;
    while v.len() > 3 {
        guard += 1;
        if guard > 4 * ring.len() * ring.len() + 64 {
            log::warn!("ear clipping stalled; emitting fan for the remainder");
            break;
        }
        let n = v.len();
        let mut clipped = false;
        for i in 0..n {
            let p = v[(i + n - 1) % n];
            let c = v[i];
            let q = v[(i + 1) % n];
            let a2 = cross2(p, c, q);
            if a2.abs() <= eps {
                // Collinear/duplicate vertex: drop without a triangle.
                v.remove(i);
                clipped = true;
                break;
            }
            if a2 < 0.0 {
                continue; // reflex
            }
            // No other vertex inside the candidate ear (boundary counts in).
            let mut blocked = false;
            for (j, &w) in v.iter().enumerate() {
                if j == i || j == (i + n - 1) % n || j == (i + 1) % n {
                    continue;
                }
                if w == p || w == c || w == q {
                    continue; // duplicated bridge vertices
                }
                if cross2(p, c, w) >= -eps && cross2(c, q, w) >= -eps && cross2(q, p, w) >= -eps {
                    blocked = true;
                    break;
                }
            }
            if blocked {
                continue;
            }
            out.push([p, c, q]);
            v.remove(i);
            clipped = true;
            break;
        }
        if !clipped {
            log::warn!("no ear found; emitting fan for the remainder");
            break;
        }
    }
    if v.len() == 3 {
        if cross2(v[0], v[1], v[2]).abs() > eps {
            out.push([v[0], v[1], v[2]]);
        }
    } else if v.len() > 3 {
        for i in 1..v.len() - 1 {
            if cross2(v[0], v[i], v[i + 1]).abs() > eps {
                out.push([v[0], v[i], v[i + 1]]);
            }
        }
    }
}
