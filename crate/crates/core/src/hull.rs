//! Convex hulls of sampled operating points in the PQ plane.
//!
//! The area of the hull of the feasible aggregate setpoints, relative to
//! the hull of all sampled setpoints, measures how much of the offered
//! flexibility region survives the grid constraints.

/// Cross product of `oa` and `ob`; positive when `b` lies left of `o -> a`.
fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex hull by Andrew's monotone chain, returned counterclockwise
/// without a repeated closing vertex. Collinear boundary points are
/// dropped. Degenerate inputs return what remains: an empty, single, or
/// two-point chain.
pub fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut sorted = points.to_vec();
    sorted.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    sorted.dedup();
    if sorted.len() < 3 {
        return sorted;
    }
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(sorted.len() + 1);
    // Lower chain, then upper chain over the reversed order.
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64)>> = if pass == 0 {
            Box::new(sorted.iter())
        } else {
            Box::new(sorted.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2
                && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
            {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop(); // endpoint repeats as the next chain's start
    }
    hull
}

/// Absolute area of a simple polygon given by its vertices in order
/// (shoelace formula). Fewer than three vertices enclose nothing.
pub fn polygon_area(vertices: &[(f64, f64)]) -> f64 {
    if vertices.len() < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for (i, &(x0, y0)) in vertices.iter().enumerate() {
        let (x1, y1) = vertices[(i + 1) % vertices.len()];
        twice += x0 * y1 - x1 * y0;
    }
    0.5 * twice.abs()
}

/// Area of the convex hull of `points`.
pub fn hull_area(points: &[(f64, f64)]) -> f64 {
    polygon_area(&convex_hull(points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn square_hull_drops_interior_and_collinear_points() {
        let points = [
            (0.0, 0.0),
            (1.0, 0.0),
            (1.0, 1.0),
            (0.0, 1.0),
            (0.5, 0.5),
            (0.5, 0.0),
            (1.0, 0.5),
        ];
        let hull = convex_hull(&points);
        assert_eq!(hull.len(), 4);
        assert!((polygon_area(&hull) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn triangle_area_is_half_base_times_height() {
        let points = [(0.0, 0.0), (4.0, 0.0), (0.0, 3.0), (1.0, 1.0)];
        assert!((hull_area(&points) - 6.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_inputs_enclose_nothing() {
        assert_eq!(hull_area(&[]), 0.0);
        assert_eq!(hull_area(&[(2.0, 3.0)]), 0.0);
        assert_eq!(hull_area(&[(0.0, 0.0), (5.0, 5.0)]), 0.0);
        let collinear = [(0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (3.0, 3.0)];
        assert_eq!(hull_area(&collinear), 0.0);
        assert_eq!(convex_hull(&collinear).len(), 2);
    }

    #[test]
    fn duplicate_points_are_harmless() {
        let points = [(0.0, 0.0), (0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (1.0, 1.0)];
        assert!((hull_area(&points) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn inscribed_polygon_approaches_circle_area() {
        let points: Vec<(f64, f64)> = (0..1000)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / 1000.0;
                (a.cos(), a.sin())
            })
            .collect();
        assert!((hull_area(&points) - std::f64::consts::PI).abs() < 0.01);
    }

    proptest! {
        #[test]
        fn hull_contains_every_input_point(
            points in proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..40)
        ) {
            let hull = convex_hull(&points);
            prop_assume!(hull.len() >= 3);
            for &p in &points {
                for i in 0..hull.len() {
                    let a = hull[i];
                    let b = hull[(i + 1) % hull.len()];
                    // Counterclockwise hull: inside points sit left of
                    // every edge, up to rounding.
                    prop_assert!(cross(a, b, p) >= -1e-9);
                }
            }
        }
    }
}
