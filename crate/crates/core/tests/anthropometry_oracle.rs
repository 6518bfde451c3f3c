use std::collections::BTreeMap;

use phonoface::anthropometry::{
    angle, compute_am_vector, distance, proportion, table1_definitions, AmKind, LandmarkSet, Point,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_landmarks(rng: &mut ChaCha8Rng) -> LandmarkSet {
    let points: BTreeMap<u32, Point> = (0..68)
        .map(|i| {
            let p = Point::new(
                rng.random_range(-80.0..80.0),
                rng.random_range(-80.0..80.0),
                rng.random_range(-80.0..80.0),
            );
            (i, p)
        })
        .collect();
    LandmarkSet {
        subject_id: "x".into(),
        points,
    }
}

fn brute_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

fn brute_angle(a: [f64; 3], v: [f64; 3], b: [f64; 3]) -> f64 {
    let u = [a[0] - v[0], a[1] - v[1], a[2] - v[2]];
    let w = [b[0] - v[0], b[1] - v[1], b[2] - v[2]];
    let dot = u[0] * w[0] + u[1] * w[1] + u[2] * w[2];
    let c = dot / (brute_distance(a, v) * brute_distance(b, v));
    c.clamp(-1.0, 1.0).acos() * 180.0 / std::f64::consts::PI
}

fn brute(lm: &LandmarkSet, kind: AmKind, idx: &[u32]) -> f64 {
    let p = |i: usize| lm.points[&idx[i]].0;
    match kind {
        AmKind::Distance => brute_distance(p(0), p(1)),
        AmKind::Proportion => brute_distance(p(0), p(1)) / brute_distance(p(2), p(3)),
        AmKind::Angle => brute_angle(p(0), p(1), p(2)),
    }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

#[test]
fn table1_matches_brute_force_on_100_sets() {
    let defs = table1_definitions();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let lm = random_landmarks(&mut rng);
        let v = compute_am_vector(&lm, &defs).unwrap();
        for d in &defs {
            let want = brute(&lm, d.kind, &d.indices);
            let got = v.get(&d.name).unwrap();
            assert!(rel_close(got, want, 1e-12), "{}: {got} vs {want}", d.name);
        }
    }
}

fn rotation(ax: f64, ay: f64, az: f64) -> [[f64; 3]; 3] {
    let (sx, cx) = ax.sin_cos();
    let (sy, cy) = ay.sin_cos();
    let (sz, cz) = az.sin_cos();
    let rx = [[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]];
    let ry = [[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]];
    let rz = [[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]];
    let mul = |a: [[f64; 3]; 3], b: [[f64; 3]; 3]| {
        let mut c = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        c
    };
    mul(rz, mul(ry, rx))
}

fn transform(lm: &LandmarkSet, r: [[f64; 3]; 3], t: [f64; 3], s: f64) -> LandmarkSet {
    LandmarkSet {
        subject_id: lm.subject_id.clone(),
        points: lm
            .points
            .iter()
            .map(|(&i, p)| {
                let q: [f64; 3] = std::array::from_fn(|r_| {
                    s * (r[r_][0] * p.0[0] + r[r_][1] * p.0[1] + r[r_][2] * p.0[2]) + t[r_]
                });
                (i, Point(q))
            })
            .collect(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn rigid_motion_invariance(seed in any::<u64>(), ax in -3.2f64..3.2, ay in -3.2f64..3.2, az in -3.2f64..3.2,
                               tx in -500.0f64..500.0, ty in -500.0f64..500.0, tz in -500.0f64..500.0) {
        let defs = table1_definitions();
        let lm = random_landmarks(&mut ChaCha8Rng::seed_from_u64(seed));
        let moved = transform(&lm, rotation(ax, ay, az), [tx, ty, tz], 1.0);
        let a = compute_am_vector(&lm, &defs).unwrap();
        let b = compute_am_vector(&moved, &defs).unwrap();
        for ((n, x), (_, y)) in a.values.iter().zip(&b.values) {
            prop_assert!(rel_close(*x, *y, 1e-9), "{}: {} vs {}", n, x, y);
        }
    }

    #[test]
    fn proportions_and_angles_are_scale_invariant(seed in any::<u64>(), s in 0.01f64..100.0) {
        let defs = table1_definitions();
        let lm = random_landmarks(&mut ChaCha8Rng::seed_from_u64(seed));
        let scaled = transform(&lm, rotation(0.0, 0.0, 0.0), [0.0; 3], s);
        let a = compute_am_vector(&lm, &defs).unwrap();
        let b = compute_am_vector(&scaled, &defs).unwrap();
        for (d, ((_, x), (_, y))) in defs.iter().zip(a.values.iter().zip(&b.values)) {
            match d.kind {
                AmKind::Distance => prop_assert!(rel_close(*y, s * x, 1e-9)),
                _ => prop_assert!(rel_close(*x, *y, 1e-9), "{}", d.name),
            }
        }
    }

    #[test]
    fn primitives_agree_with_brute_force(a in prop::array::uniform3(-100.0f64..100.0),
                                         b in prop::array::uniform3(-100.0f64..100.0),
                                         c in prop::array::uniform3(-100.0f64..100.0)) {
        prop_assume!(brute_distance(a, b) > 1e-3 && brute_distance(c, b) > 1e-3);
        prop_assert!(rel_close(distance(Point(a), Point(b)), brute_distance(a, b), 1e-12));
        prop_assert!(rel_close(angle(Point(a), Point(b), Point(c)).unwrap(), brute_angle(a, b, c), 1e-12));
        let p = proportion(Point(a), Point(c), Point(a), Point(b)).unwrap();
        prop_assert!(rel_close(p, brute_distance(a, c) / brute_distance(a, b), 1e-12));
        let ang = angle(Point(a), Point(b), Point(c)).unwrap();
        prop_assert!((0.0..=180.0).contains(&ang));
        prop_assert!(distance(Point(a), Point(b)) >= 0.0);
    }
}
