use std::collections::HashMap;

use robust::{orient2d, orient3d, Coord, Coord3D};

/// Nodes within this many ulps (relative to the data scale) of the hull keep
/// their input value.
const SNAP_ULPS: f64 = 16.0;

pub(crate) fn snap(env: &mut [f64], g: &[f64]) {
    let scale = g
        .iter()
        .chain(env.iter())
        .filter(|v| v.is_finite())
        .fold(1.0f64, |a, v| a.max(v.abs()));
    let tol = SNAP_ULPS * f64::EPSILON * scale;
    for (e, v) in env.iter_mut().zip(g) {
        if !e.is_finite() || *e - *v <= tol {
            *e = *v;
        }
    }
}

/// Upper concave envelope of `(xs[i], g[i])` evaluated at the same abscissae.
pub(crate) fn upper_hull_1d(xs: &[f64], g: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let p = |i: usize| Coord { x: xs[i], y: g[i] };
    let mut hull: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            if orient2d(p(a), p(b), p(i)) >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    let mut out = vec![f64::NEG_INFINITY; n];
    for w in hull.windows(2) {
        let (a, b) = (w[0], w[1]);
        out[a] = g[a];
        let span = xs[b] - xs[a];
        for k in a + 1..b {
            let t = (xs[k] - xs[a]) / span;
            out[k] = g[a] + t * (g[b] - g[a]);
        }
    }
    out[hull[hull.len() - 1]] = g[hull[hull.len() - 1]];
    snap(&mut out, g);
    out
}

#[derive(Debug)]
struct Face {
    v: [usize; 3],
    alive: bool,
    outside: Vec<usize>,
}

/// Incremental (quickhull-style) 3D convex hull with exact orientation
/// predicates. Faces are oriented so that the hull interior lies on the
/// positive side of `orient3d`.
struct Hull<'a> {
    pts: &'a [[f64; 3]],
    faces: Vec<Face>,
    edges: HashMap<(usize, usize), usize>,
}

fn c3(p: &[f64; 3]) -> Coord3D<f64> {
    Coord3D { x: p[0], y: p[1], z: p[2] }
}

impl<'a> Hull<'a> {
    fn orient(&self, f: usize, p: usize) -> f64 {
        let v = self.faces[f].v;
        orient3d(c3(&self.pts[v[0]]), c3(&self.pts[v[1]]), c3(&self.pts[v[2]]), c3(&self.pts[p]))
    }

    fn add_face(&mut self, v: [usize; 3]) -> usize {
        let id = self.faces.len();
        self.faces.push(Face { v, alive: true, outside: Vec::new() });
        for k in 0..3 {
            self.edges.insert((v[k], v[(k + 1) % 3]), id);
        }
        id
    }

    fn kill_face(&mut self, f: usize) -> Vec<usize> {
        let v = self.faces[f].v;
        for k in 0..3 {
            let key = (v[k], v[(k + 1) % 3]);
            if self.edges.get(&key) == Some(&f) {
                self.edges.remove(&key);
            }
        }
        self.faces[f].alive = false;
        std::mem::take(&mut self.faces[f].outside)
    }

    fn assign(&mut self, candidates: &[usize], targets: &[usize]) {
        for &q in candidates {
            for &t in targets {
                if self.orient(t, q) < 0.0 {
                    self.faces[t].outside.push(q);
                    break;
                }
            }
        }
    }

    fn build(pts: &'a [[f64; 3]]) -> Option<Hull<'a>> {
        let n = pts.len();
        let i0 = 0;
        let i1 = (1..n).find(|&i| pts[i][0] != pts[i0][0] || pts[i][1] != pts[i0][1])?;
        let xy = |i: usize| Coord { x: pts[i][0], y: pts[i][1] };
        let i2 = (1..n).find(|&i| orient2d(xy(i0), xy(i1), xy(i)) != 0.0)?;
        let mut i3 = None;
        let mut best = 0.0;
        for i in 0..n {
            let o = orient3d(c3(&pts[i0]), c3(&pts[i1]), c3(&pts[i2]), c3(&pts[i])).abs();
            if o > best {
                best = o;
                i3 = Some(i);
            }
        }
        let i3 = i3?;
        let mut hull = Hull { pts, faces: Vec::new(), edges: HashMap::new() };
        let tet = [i0, i1, i2, i3];
        let mut ids = Vec::new();
        for skip in 0..4 {
            let o = tet[skip];
            let rest: Vec<usize> = tet.iter().copied().filter(|&x| x != o).collect();
            let (a, b, c) = (rest[0], rest[1], rest[2]);
            let s = orient3d(c3(&pts[a]), c3(&pts[b]), c3(&pts[c]), c3(&pts[o]));
            ids.push(if s > 0.0 { hull.add_face([a, b, c]) } else { hull.add_face([a, c, b]) });
        }
        let others: Vec<usize> = (0..n).filter(|i| !tet.contains(i)).collect();
        hull.assign(&others, &ids);
        let mut stack: Vec<usize> = ids;
        while let Some(f) = stack.pop() {
            if !hull.faces[f].alive || hull.faces[f].outside.is_empty() {
                continue;
            }
            let apex = *hull.faces[f]
                .outside
                .iter()
                .min_by(|a, b| hull.orient(f, **a).total_cmp(&hull.orient(f, **b)))
                .expect("non-empty");
            let mut visible = vec![f];
            let mut seen: HashMap<usize, bool> = HashMap::new();
            seen.insert(f, true);
            let mut horizon = Vec::new();
            let mut k = 0;
            while k < visible.len() {
                let g = visible[k];
                k += 1;
                let v = hull.faces[g].v;
                for e in 0..3 {
                    let (a, b) = (v[e], v[(e + 1) % 3]);
                    let h = hull.edges[&(b, a)];
                    let vis = *seen.entry(h).or_insert_with(|| hull.orient(h, apex) < 0.0);
                    if vis {
                        if !visible.contains(&h) {
                            visible.push(h);
                        }
                    } else {
                        horizon.push((a, b));
                    }
                }
            }
            let mut orphans = Vec::new();
            for &g in &visible {
                orphans.extend(hull.kill_face(g));
            }
            orphans.retain(|&q| q != apex);
            let new_faces: Vec<usize> =
                horizon.iter().map(|&(a, b)| hull.add_face([a, b, apex])).collect();
            hull.assign(&orphans, &new_faces);
            stack.extend(new_faces);
        }
        Some(hull)
    }
}

const SLIVER: f64 = 1e-12;

/// Upper concave envelope of `g` sampled on the tensor grid `xs × ys`
/// (row-major, `ys` fastest). Returns `None` when all points are coplanar.
pub(crate) fn upper_hull_2d(xs: &[f64], ys: &[f64], g: &[f64]) -> Option<Vec<f64>> {
    let (nx, ny) = (xs.len(), ys.len());
    let pts: Vec<[f64; 3]> = (0..nx * ny).map(|k| [xs[k / ny], ys[k % ny], g[k]]).collect();
    let hull = Hull::build(&pts)?;
    let (x0, y0) = (xs[0], ys[0]);
    let sx = (xs[nx - 1] - x0) / (nx - 1) as f64;
    let sy = (ys[ny - 1] - y0) / (ny - 1) as f64;
    let mut env = vec![f64::NEG_INFINITY; nx * ny];
    for face in hull.faces.iter().filter(|f| f.alive) {
        let [a, b, c] = face.v.map(|i| pts[i]);
        let xy = |p: [f64; 3]| Coord { x: p[0], y: p[1] };
        if orient2d(xy(a), xy(b), xy(c)) <= 0.0 {
            continue;
        }
        let det = (b[1] - c[1]) * (a[0] - c[0]) + (c[0] - b[0]) * (a[1] - c[1]);
        let d2 = |p: [f64; 3], q: [f64; 3]| (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
        if det <= SLIVER * d2(a, b).max(d2(b, c)).max(d2(c, a)) {
            // Zero-area slivers are covered by their neighbours.
            continue;
        }
        let minx = a[0].min(b[0]).min(c[0]);
        let maxx = a[0].max(b[0]).max(c[0]);
        let miny = a[1].min(b[1]).min(c[1]);
        let maxy = a[1].max(b[1]).max(c[1]);
        let i_lo = (((minx - x0) / sx) - 1e-7).ceil().max(0.0) as usize;
        let i_hi = ((((maxx - x0) / sx) + 1e-7).floor() as usize).min(nx - 1);
        let j_lo = (((miny - y0) / sy) - 1e-7).ceil().max(0.0) as usize;
        let j_hi = ((((maxy - y0) / sy) + 1e-7).floor() as usize).min(ny - 1);
        for i in i_lo..=i_hi {
            for j in j_lo..=j_hi {
                let (x, y) = (xs[i], ys[j]);
                let la = ((b[1] - c[1]) * (x - c[0]) + (c[0] - b[0]) * (y - c[1])) / det;
                let lb = ((c[1] - a[1]) * (x - c[0]) + (a[0] - c[0]) * (y - c[1])) / det;
                let lc = 1.0 - la - lb;
                if la < -1e-10 || lb < -1e-10 || lc < -1e-10 {
                    continue;
                }
                let v = la * a[2] + lb * b[2] + lc * c[2];
                let k = i * ny + j;
                if v > env[k] {
                    env[k] = v;
                }
            }
        }
    }
    snap(&mut env, g);
    Some(env)
}
