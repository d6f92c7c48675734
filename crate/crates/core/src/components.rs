//! 4-connected component labeling with the shape statistics used by mesh
//! detection and contour filtering.

use crate::imaging::BinaryMask;

#[derive(Clone, Debug)]
pub struct Component {
    pub area: usize,
    pub min_x: u32,
    pub min_y: u32,
    pub max_x: u32,
    pub max_y: u32,
    pub touches_border: bool,
    sum_x: f64,
    sum_y: f64,
    // (y, first x, last x) per row; rows are visited in increasing y
    rows: Vec<(u32, u32, u32)>,
}

impl Component {
    /// Area centroid in continuous image coordinates (pixel `i` spans `[i, i+1)`).
    pub fn centroid(&self) -> (f64, f64) {
        let n = self.area as f64;
        (self.sum_x / n + 0.5, self.sum_y / n + 0.5)
    }

    /// Area of the convex hull of the component's pixel squares.
    pub fn hull_area(&self) -> f64 {
        let mut pts = Vec::with_capacity(self.rows.len() * 4);
        for &(y, x0, x1) in &self.rows {
            let (y, x0, x1) = (y as f64, x0 as f64, x1 as f64 + 1.0);
            pts.extend_from_slice(&[(x0, y), (x1, y), (x0, y + 1.0), (x1, y + 1.0)]);
        }
        polygon_area(&convex_hull(pts))
    }

    /// Pixel area over hull area, in (0, 1].
    pub fn solidity(&self) -> f64 {
        let hull = self.hull_area();
        if hull <= 0.0 {
            return 1.0;
        }
        (self.area as f64 / hull).min(1.0)
    }
}

#[derive(Clone, Debug)]
pub struct Labeling {
    width: u32,
    /// 0 for background, otherwise `component index + 1`.
    labels: Vec<u32>,
    pub components: Vec<Component>,
}

impl Labeling {
    pub fn label_at(&self, x: u32, y: u32) -> Option<usize> {
        match self.labels[y as usize * self.width as usize + x as usize] {
            0 => None,
            l => Some(l as usize - 1),
        }
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }
}

/// Labels the 4-connected regions of pixels equal to `value`.
pub fn label(mask: &BinaryMask, value: bool) -> Labeling {
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    let bits = mask.bits();
    let mut labels = vec![0u32; w * h];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for start in 0..w * h {
        if bits[start] != value || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            let mut visit = |j: usize| {
                if bits[j] == value && labels[j] == 0 {
                    labels[j] = next;
                    stack.push(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
    }

    let mut components: Vec<Component> = (0..next)
        .map(|_| Component {
            area: 0,
            min_x: u32::MAX,
            min_y: u32::MAX,
            max_x: 0,
            max_y: 0,
            touches_border: false,
            sum_x: 0.0,
            sum_y: 0.0,
            rows: Vec::new(),
        })
        .collect();
    for y in 0..h {
        for x in 0..w {
            let l = labels[y * w + x];
            if l == 0 {
                continue;
            }
            let c = &mut components[l as usize - 1];
            let (xu, yu) = (x as u32, y as u32);
            c.area += 1;
            c.sum_x += x as f64;
            c.sum_y += y as f64;
            c.min_x = c.min_x.min(xu);
            c.max_x = c.max_x.max(xu);
            c.min_y = c.min_y.min(yu);
            c.max_y = c.max_y.max(yu);
            if x == 0 || y == 0 || x + 1 == w || y + 1 == h {
                c.touches_border = true;
            }
            match c.rows.last_mut() {
                Some(r) if r.0 == yu => r.2 = xu,
                _ => c.rows.push((yu, xu, xu)),
            }
        }
    }
    Labeling {
        width: mask.width(),
        labels,
        components,
    }
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn convex_hull(mut pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn polygon_area(poly: &[(f64, f64)]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        s += a.0 * b.1 - b.0 * a.1;
    }
    s.abs() / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(rows: &[&str]) -> BinaryMask {
        let h = rows.len() as u32;
        let w = rows[0].len() as u32;
        BinaryMask::from_fn(w, h, |x, y| rows[y as usize].as_bytes()[x as usize] == b'#').unwrap()
    }

    #[test]
    fn four_connectivity_splits_diagonals() {
        let m = mask(&["#.", ".#"]);
        assert_eq!(label(&m, true).components.len(), 2);
        assert_eq!(label(&m, false).components.len(), 2);
    }

    #[test]
    fn stats_of_a_square() {
        let m = mask(&["....", ".##.", ".##.", "...."]);
        let l = label(&m, true);
        assert_eq!(l.components.len(), 1);
        let c = &l.components[0];
        assert_eq!(c.area, 4);
        assert!(!c.touches_border);
        assert_eq!(c.centroid(), (2.0, 2.0));
        assert_eq!(c.hull_area(), 4.0);
        assert_eq!(c.solidity(), 1.0);
        let bg = label(&m, false);
        assert_eq!(bg.components.len(), 1);
        assert!(bg.components[0].touches_border);
        assert_eq!(l.label_at(1, 1), Some(0));
        assert_eq!(l.label_at(0, 0), None);
    }

    #[test]
    fn l_shape_solidity() {
        let m = mask(&["#...", "#...", "#...", "####"]);
        let c = &label(&m, true).components[0];
        assert_eq!(c.area, 7);
        // hull of the L: the 4x4 square minus the triangle above the diagonal
        // from (1,0) to (4,3): 16 - 4.5 = 11.5
        assert!((c.hull_area() - 11.5).abs() < 1e-12);
    }
}
