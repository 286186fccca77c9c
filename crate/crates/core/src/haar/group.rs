use serde::{Deserialize, Serialize};

use super::detect::Detection;

/// Candidate box with signed coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoxI {
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
}

impl From<Detection> for BoxI {
    fn from(d: Detection) -> Self {
        BoxI {
            x: d.x as i64,
            y: d.y as i64,
            w: d.w as i64,
            h: d.h as i64,
        }
    }
}

/// Two boxes are neighbours when every edge moves by at most
/// `eps · (min width + min height) / 2`.
pub fn similar(a: &BoxI, b: &BoxI, eps: f64) -> bool {
    let delta = eps * (a.w.min(b.w) + a.h.min(b.h)) as f64 * 0.5;
    let close = |p: i64, q: i64| ((p - q).abs() as f64) <= delta;
    close(a.x, b.x)
        && close(a.y, b.y)
        && close(a.x + a.w, b.x + b.w)
        && close(a.y + a.h, b.y + b.h)
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Lower index wins so roots do not depend on visiting order.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Clusters candidates by transitive similarity and averages each cluster
/// with more than `min_neighbors` members.
///
/// Output is sorted by `(y, x, w, h)` and does not depend on input order.
pub fn group_rectangles(candidates: &[BoxI], min_neighbors: u32, eps: f64) -> Vec<Detection> {
    let n = candidates.len();
    let mut sets = DisjointSet::new(n);
    for i in 0..n {
        for j in i + 1..n {
            if similar(&candidates[i], &candidates[j], eps) {
                sets.union(i, j);
            }
        }
    }

    let mut sums: std::collections::BTreeMap<usize, ([i64; 4], u32)> = Default::default();
    for (i, b) in candidates.iter().enumerate() {
        let entry = sums.entry(sets.find(i)).or_insert(([0; 4], 0));
        entry.0[0] += b.x;
        entry.0[1] += b.y;
        entry.0[2] += b.w;
        entry.0[3] += b.h;
        entry.1 += 1;
    }

    let mut out: Vec<Detection> = sums
        .into_values()
        .filter(|&(_, count)| count > min_neighbors)
        .map(|(s, count)| {
            let avg = |v: i64| (v as f64 / count as f64).round().max(0.0) as u32;
            Detection {
                x: avg(s[0]),
                y: avg(s[1]),
                w: avg(s[2]),
                h: avg(s[3]),
                neighbor_count: count,
            }
        })
        .collect();
    out.sort_by_key(|d| (d.y, d.x, d.w, d.h, d.neighbor_count));
    out
}
