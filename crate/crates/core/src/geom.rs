//! Planar vector helpers shared by the road graph and the renderers.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }

    pub fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }

    pub fn scale(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self.scale(1.0 / n))
    }

    /// Unsigned angle between two vectors, in radians.
    pub fn angle_to(self, o: Vec2) -> f64 {
        self.cross(o).abs().atan2(self.dot(o))
    }
}

/// Distance from `p` to the closed segment `a`–`b`.
pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.sub(a).norm();
    }
    let t = (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0);
    p.sub(a.add(ab.scale(t))).norm()
}

pub fn point_polyline_distance(p: Vec2, line: &[Vec2]) -> f64 {
    match line {
        [] => f64::INFINITY,
        [only] => p.sub(*only).norm(),
        _ => line
            .windows(2)
            .map(|s| point_segment_distance(p, s[0], s[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

fn segments_cross(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let d1 = b.sub(a).cross(c.sub(a));
    let d2 = b.sub(a).cross(d.sub(a));
    let d3 = d.sub(c).cross(a.sub(c));
    let d4 = d.sub(c).cross(b.sub(c));
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

pub fn segment_segment_distance(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> f64 {
    if segments_cross(a, b, c, d) {
        return 0.0;
    }
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

pub fn polyline_distance(p: &[Vec2], q: &[Vec2]) -> f64 {
    if p.len() < 2 || q.len() < 2 {
        return match (p, q) {
            ([a], _) => point_polyline_distance(*a, q),
            (_, [b]) => point_polyline_distance(*b, p),
            _ => f64::INFINITY,
        };
    }
    let mut best = f64::INFINITY;
    for s in p.windows(2) {
        for t in q.windows(2) {
            best = best.min(segment_segment_distance(s[0], s[1], t[0], t[1]));
        }
    }
    best
}

pub fn polyline_length(line: &[Vec2]) -> f64 {
    line.windows(2).map(|s| s[1].sub(s[0]).norm()).sum()
}

/// Axis-aligned rectangle, edges inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    /// Largest `t` in [0, 1] such that `from + t (to - from)` stays inside,
    /// assuming `from` is inside.
    fn exit_parameter(&self, from: Vec2, to: Vec2) -> f64 {
        let d = to.sub(from);
        let mut t = 1.0f64;
        for (p, dp, lo, hi) in [
            (from.x, d.x, self.min.x, self.max.x),
            (from.y, d.y, self.min.y, self.max.y),
        ] {
            if dp > 0.0 {
                t = t.min((hi - p) / dp);
            } else if dp < 0.0 {
                t = t.min((lo - p) / dp);
            }
        }
        t.max(0.0)
    }

    /// Walks `line` from its first vertex (which must be inside) and cuts it
    /// where it first leaves the rectangle.
    pub fn clip_from_start(&self, line: &[Vec2]) -> Vec<Vec2> {
        let mut out = Vec::with_capacity(line.len());
        let Some(&first) = line.first() else {
            return out;
        };
        out.push(first);
        for s in line.windows(2) {
            if self.contains(s[1]) {
                out.push(s[1]);
            } else {
                let t = self.exit_parameter(s[0], s[1]);
                out.push(s[0].add(s[1].sub(s[0]).scale(t)));
                break;
            }
        }
        out
    }
}
