use super::ProjectedPoint;

/// Distance from `p` to the segment `a`–`b`; for a degenerate segment this
/// is the distance to `a`.
pub fn perpendicular_distance(p: &ProjectedPoint, a: &ProjectedPoint, b: &ProjectedPoint) -> f64 {
    let (dx, dy) = (b.x() - a.x(), b.y() - a.y());
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (((p.x() - a.x()) * dx + (p.y() - a.y()) * dy) / len2).clamp(0.0, 1.0);
    (p.x() - (a.x() + t * dx)).hypot(p.y() - (a.y() + t * dy))
}

/// Douglas–Peucker line generalization.
///
/// Endpoints are always kept, every dropped vertex lies within `tol` of the
/// output line, and `tol == 0` returns the input unchanged.
pub fn simplify(line: &[ProjectedPoint], tol: f64) -> Vec<ProjectedPoint> {
    if tol <= 0.0 || line.len() < 3 {
        return line.to_vec();
    }
    let mut keep = vec![false; line.len()];
    keep[0] = true;
    keep[line.len() - 1] = true;
    let mut stack = vec![(0usize, line.len() - 1)];
    while let Some((first, last)) = stack.pop() {
        let mut max_d = 0.0;
        let mut index = first;
        for i in first + 1..last {
            let d = perpendicular_distance(&line[i], &line[first], &line[last]);
            if d > max_d {
                max_d = d;
                index = i;
            }
        }
        if max_d > tol {
            keep[index] = true;
            stack.push((first, index));
            stack.push((index, last));
        }
    }
    line.iter()
        .zip(keep)
        .filter_map(|(p, k)| k.then_some(*p))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pp(x: f64, y: f64) -> ProjectedPoint {
        ProjectedPoint::new(x, y).unwrap()
    }

    #[test]
    fn collinear_collapses() {
        let line = [pp(0.0, 0.0), pp(1.0, 1.0), pp(2.0, 2.0)];
        assert_eq!(simplify(&line, 0.1), vec![pp(0.0, 0.0), pp(2.0, 2.0)]);
    }

    #[test]
    fn zero_tolerance_is_identity() {
        let line = [pp(0.0, 0.0), pp(1.0, 1.0), pp(2.0, 2.0), pp(2.0, 2.0)];
        assert_eq!(simplify(&line, 0.0), line.to_vec());
    }

    #[test]
    fn closed_ring_keeps_shape() {
        let ring = [pp(0.0, 0.0), pp(10.0, 0.0), pp(10.0, 10.0), pp(0.0, 10.0), pp(0.0, 0.0)];
        let out = simplify(&ring, 0.5);
        assert_eq!(out.len(), 5);
    }
}
