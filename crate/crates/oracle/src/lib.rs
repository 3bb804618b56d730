//! Naive, first-principles reference computations for tests.
//!
//! Nothing here shares code with the main crates: inputs are plain numbers
//! and every routine takes the most direct (often slowest) route.

/// Object density of one image from raw `[x1, y1, x2, y2]` boxes: count
/// over the area of the extent of all corner coordinates.
pub fn clutter_density(boxes: &[[f64; 4]]) -> f64 {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for b in boxes {
        xs.push(b[0]);
        xs.push(b[2]);
        ys.push(b[1]);
        ys.push(b[3]);
    }
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let width = xs[xs.len() - 1] - xs[0];
    let height = ys[ys.len() - 1] - ys[0];
    boxes.len() as f64 / (width * height)
}

pub fn mean(values: &[f64]) -> f64 {
    let mut total = 0.0;
    for v in values {
        total += v;
    }
    total / values.len() as f64
}

/// Sample variance via the definition, 0 for a single value.
pub fn sample_variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let mut ss = 0.0;
    for v in values {
        ss += (v - m) * (v - m);
    }
    ss / (values.len() - 1) as f64
}

/// Pearson r as the mean product of z-scores (population standard
/// deviations). `None` when either series is constant or there are fewer
/// than two points.
pub fn pearson(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let all_same = |f: fn(&(f64, f64)) -> f64| points.iter().all(|p| f(p) == f(&points[0]));
    if all_same(|p| p.0) || all_same(|p| p.1) {
        return None;
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let z = |v: &[f64]| -> Vec<f64> {
        let m = mean(v);
        let sd = (v.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / n).sqrt();
        v.iter().map(|a| (a - m) / sd).collect()
    };
    let (zx, zy) = (z(&xs), z(&ys));
    Some(zx.iter().zip(&zy).map(|(a, b)| a * b).sum::<f64>() / n)
}

/// Least-squares line `(intercept, slope)`; slope 0 when x is constant.
pub fn fit_line(points: &[(f64, f64)]) -> (f64, f64) {
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let (mx, my) = (mean(&xs), mean(&ys));
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(x, y) in points {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - slope * mx, slope)
}

/// Deleted-residual outlier rule by literally refitting without each
/// point: flag `i` when the prediction error at `x_i` of the line fitted to
/// the other points, divided by its standard error, exceeds `threshold`.
pub fn deleted_residual_outliers(points: &[(f64, f64)], threshold: f64) -> Vec<usize> {
    let n = points.len();
    if n <= 3 {
        return Vec::new();
    }
    let scale = points.iter().fold(1.0f64, |m, p| m.max(p.1.abs()));
    let tol = 1e-10 * scale;
    let (a_all, b_all) = fit_line(points);
    let mut out = Vec::new();
    for i in 0..n {
        let (xi, yi) = points[i];
        if (yi - (a_all + b_all * xi)).abs() <= tol {
            continue;
        }
        let rest: Vec<(f64, f64)> = points
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, p)| *p)
            .collect();
        let xs: Vec<f64> = rest.iter().map(|p| p.0).collect();
        let mx = mean(&xs);
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        if sxx == 0.0 && xi != mx {
            continue;
        }
        let (a, b) = fit_line(&rest);
        let sse: f64 = rest.iter().map(|&(x, y)| (y - a - b * x).powi(2)).sum();
        let s = (sse / (rest.len() - 2) as f64).sqrt();
        let d = yi - (a + b * xi);
        if s <= tol {
            out.push(i);
            continue;
        }
        let lev = 1.0 + 1.0 / rest.len() as f64 + if sxx > 0.0 { (xi - mx).powi(2) / sxx } else { 0.0 };
        if (d / (s * lev.sqrt())).abs() > threshold {
            out.push(i);
        }
    }
    out
}

/// IoU of integer-cornered boxes by counting covered unit cells.
pub fn iou_by_cells(a: [i64; 4], b: [i64; 4]) -> f64 {
    let (lo_x, hi_x) = (a[0].min(b[0]), a[2].max(b[2]));
    let (lo_y, hi_y) = (a[1].min(b[1]), a[3].max(b[3]));
    let inside = |r: [i64; 4], x: i64, y: i64| x >= r[0] && x < r[2] && y >= r[1] && y < r[3];
    let (mut inter, mut union) = (0u64, 0u64);
    for x in lo_x..hi_x {
        for y in lo_y..hi_y {
            let (ia, ib) = (inside(a, x, y), inside(b, x, y));
            if ia && ib {
                inter += 1;
            }
            if ia || ib {
                union += 1;
            }
        }
    }
    inter as f64 / union as f64
}

/// Every maximal clique of the graph given as an adjacency matrix, found
/// by checking all `2^n` vertex subsets. Members ascending, list sorted.
pub fn maximal_cliques_exhaustive(adj: &[Vec<bool>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    assert!(n <= 20, "exhaustive oracle is exponential");
    let is_clique = |mask: u32| {
        (0..n).all(|i| mask & (1 << i) == 0 || (0..n).all(|j| j == i || mask & (1 << j) == 0 || adj[i][j]))
    };
    let mut out = Vec::new();
    for mask in 1u32..(1 << n) {
        if !is_clique(mask) {
            continue;
        }
        let extendable = (0..n).any(|v| mask & (1 << v) == 0 && is_clique(mask | (1 << v)));
        if !extendable {
            out.push((0..n).filter(|i| mask & (1 << i) != 0).collect::<Vec<_>>());
        }
    }
    out.sort();
    out
}

pub fn cosine(u: &[f64], v: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut nu = 0.0;
    let mut nv = 0.0;
    for i in 0..u.len() {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    dot / (nu.sqrt() * nv.sqrt())
}

/// Small deterministic generator (SplitMix64) so fixtures need no crates.
#[derive(Debug, Clone)]
pub struct SplitMix(u64);

impl SplitMix {
    pub fn new(seed: u64) -> Self {
        SplitMix(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}
