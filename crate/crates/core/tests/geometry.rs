mod common;

use std::f64::consts::PI;

use common::brute;
use flexmap::geometry::{contains, convex_hull, region_gap, shoelace, signed_area, Polygon};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn regular(n: usize, r: f64, phase: f64) -> Vec<(f64, f64)> {
    (0..n).map(|k| {
        let a = phase + 2.0 * PI * k as f64 / n as f64;
        (r * a.cos(), r * a.sin())
    })
    .collect()
}

#[test]
fn inscribed_regular_polygons() {
    for n in 3..=64 {
        let area = shoelace(&regular(n, 1.0, 0.3)).unwrap();
        let want = 0.5 * n as f64 * (2.0 * PI / n as f64).sin();
        assert!((area - want).abs() < 1e-12, "n={n}");
        assert!(area < PI);
    }
    assert!((shoelace(&regular(8, 1.0, 0.0)).unwrap() - 2.0 * 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn hull_of_disk_samples_stays_inside_the_disk() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let pts: Vec<(f64, f64)> = (0..1000)
        .map(|_| {
            let (r, a): (f64, f64) = (rng.random::<f64>().sqrt(), rng.random_range(0.0..2.0 * PI));
            (r * a.cos(), r * a.sin())
        })
        .collect();
    let hull = convex_hull(&pts);
    let area = hull.area().unwrap();
    assert!(area <= PI && area > 0.9 * PI);
    for p in &pts {
        assert!(contains(&hull, *p).unwrap());
    }
}

#[test]
fn gap_ignores_duplicated_vertices() {
    let sq = vec![(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
    let mut dup = sq.clone();
    dup.insert(2, (1.0, 0.0));
    dup.push((0.0, 0.0));
    assert_eq!(region_gap(&Polygon::new(sq.clone()), &convex_hull(&dup)).unwrap(), 0.0);
    let shifted: Vec<_> = sq.iter().map(|&(x, y)| (x + 1.0, y)).collect();
    assert!((region_gap(&Polygon::new(sq), &Polygon::new(shifted)).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn differential_against_brute_force_on_grids() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..5_000 {
        let n = rng.random_range(1..=10);
        let mut pick = || (f64::from(rng.random_range(0..12u8)), f64::from(rng.random_range(0..12u8)));
        let pts: Vec<_> = (0..n).map(|_| pick()).collect();
        let queries: Vec<_> = (0..8).map(|_| pick()).collect();
        if let Some(m) = brute::mismatch(&pts, &queries) {
            panic!("case {case}: {m}");
        }
    }
}

fn cloud() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..40)
}

proptest! {
    #[test]
    fn larger_sets_have_larger_hulls(pts in cloud(), keep in prop::collection::vec(any::<bool>(), 40)) {
        let sub: Vec<_> = pts.iter().zip(&keep).filter(|(_, k)| **k).map(|(p, _)| *p).collect();
        let big = signed_area(&convex_hull(&pts).vertices);
        let small = signed_area(&convex_hull(&sub).vertices);
        prop_assert!(big >= small - 1e-12);
    }

    #[test]
    fn hull_contains_its_points(pts in cloud()) {
        let hull = convex_hull(&pts);
        for p in &pts {
            prop_assert!(contains(&hull, *p).unwrap());
        }
    }

    #[test]
    fn shoelace_ignores_rotation_and_reversal(pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 3..20), k in 0usize..20) {
        let a = shoelace(&pts).unwrap();
        let mut rotated = pts.clone();
        rotated.rotate_left(k % pts.len());
        let mut reversed = pts.clone();
        reversed.reverse();
        prop_assert!((shoelace(&rotated).unwrap() - a).abs() <= 1e-9 * a.max(1.0));
        prop_assert!((shoelace(&reversed).unwrap() - a).abs() <= 1e-9 * a.max(1.0));
    }

    #[test]
    fn gap_is_a_symmetric_distance(a in cloud(), b in cloud(), shift in -3.0f64..3.0) {
        let (ha, hb) = (convex_hull(&a), convex_hull(&b));
        prop_assume!(ha.vertices.len() >= 3 && hb.vertices.len() >= 3);
        let ab = region_gap(&ha, &hb).unwrap();
        prop_assert!((ab - region_gap(&hb, &ha).unwrap()).abs() < 1e-12);
        prop_assert_eq!(region_gap(&ha, &ha).unwrap(), 0.0);
        let moved = Polygon::new(ha.vertices.iter().map(|&(x, y)| (x + shift, y)).collect());
        prop_assert!((region_gap(&ha, &moved).unwrap() - shift.abs()).abs() < 1e-9);
    }
}
