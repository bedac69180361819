mod common;

use common::*;
use pcu_core::geometry::{
    farthest_point_sample, farthest_point_sample_from, normalize_unit_sphere, random_subsample,
    random_subsample_indices, sample_mesh_surface,
};
use pcu_core::toy::unit_cube;
use pcu_core::{Point3, PointCloud, Rng, SpatialIndex, TriangleMesh};
use proptest::prelude::*;

fn arb_cloud(max: usize) -> impl Strategy<Value = PointCloud> {
    // coarse grid coordinates produce plenty of exact distance ties
    prop::collection::vec((-8i32..8, -8i32..8, -8i32..8), 1..=max).prop_map(|v| {
        PointCloud::new(
            v.into_iter()
                .map(|(x, y, z)| Point3::new(x as f64 * 0.25, y as f64 * 0.25, z as f64 * 0.25))
                .collect(),
        )
        .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn knn_equals_brute_force_with_ties(cloud in arb_cloud(300), qx in -2.0f64..2.0, qy in -2.0f64..2.0, k in 1usize..20) {
        let index = SpatialIndex::build(&cloud);
        let k = k.min(cloud.len());
        let q = Point3::new(qx, qy, 0.5);
        prop_assert_eq!(index.knn(q, k).unwrap(), brute_knn(&cloud, q, k));
        for i in (0..cloud.len()).step_by(17) {
            prop_assert_eq!(index.knn(cloud.get(i), k).unwrap(), brute_knn(&cloud, cloud.get(i), k));
        }
    }

    #[test]
    fn fps_equals_brute_force(cloud in arb_cloud(200), first in 0usize..200, m in 1usize..40) {
        let first = first % cloud.len();
        let m = m.min(cloud.len());
        prop_assert_eq!(farthest_point_sample_from(&cloud, m, first).unwrap(), brute_fps(&cloud, m, first));
    }

    #[test]
    fn normalize_round_trip(cloud in arb_cloud(100), s in 0.1f64..50.0) {
        let scaled = PointCloud::new(cloud.points().iter().map(|&p| p * s + Point3::new(3.0, -1.0, 7.0)).collect()).unwrap();
        let (norm, t) = normalize_unit_sphere(&scaled).unwrap();
        prop_assert!(norm.centroid().norm() < 1e-9);
        for (a, b) in t.invert_cloud(&norm).points().iter().zip(scaled.points()) {
            prop_assert!((*a - *b).norm() < 1e-6);
        }
    }
}

#[test]
fn knn_on_512_uniform_points() {
    let mut rng = Rng::new(1);
    let cloud = random_cloud(512, &mut rng);
    let index = SpatialIndex::build(&cloud);
    for _ in 0..64 {
        let q = Point3::new(
            rng.uniform_in(-1.2, 1.2),
            rng.uniform_in(-1.2, 1.2),
            rng.uniform_in(-1.2, 1.2),
        );
        assert_eq!(index.knn(q, 8).unwrap(), brute_knn(&cloud, q, 8));
    }
}

#[test]
fn fps_first_pick_comes_from_rng() {
    let cloud = random_cloud(256, &mut Rng::new(2));
    let mut a = Rng::new(9);
    let mut b = Rng::new(9);
    let first = b.below(256);
    let got = farthest_point_sample(&cloud, 32, &mut a).unwrap();
    assert_eq!(got, brute_fps(&cloud, 32, first));
}

#[test]
fn two_triangle_area_split() {
    // areas 1 and 3
    let mesh = TriangleMesh::new(
        vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(2.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(10.0, 0.0, 0.0),
            Point3::new(16.0, 0.0, 0.0),
            Point3::new(10.0, 1.0, 0.0),
        ],
        vec![[0, 1, 2], [3, 4, 5]],
    )
    .unwrap();
    let pts = sample_mesh_surface(&mesh, 40_000, &mut Rng::new(3)).unwrap();
    let second = pts.points().iter().filter(|p| p.x >= 10.0).count();
    assert!((29_400..=30_600).contains(&second), "{second}");
}

#[test]
fn cube_faces_share_points_evenly() {
    let pts = sample_mesh_surface(&unit_cube(), 6000, &mut Rng::new(4)).unwrap();
    let mut faces = [0usize; 6];
    for p in pts.points() {
        let c = p.to_array();
        let axis = (0..3)
            .min_by(|&a, &b| c[a].min(1.0 - c[a]).total_cmp(&c[b].min(1.0 - c[b])))
            .unwrap();
        faces[axis * 2 + usize::from(c[axis] > 0.5)] += 1;
    }
    for f in faces {
        assert!((880..=1120).contains(&f), "{faces:?}");
    }
}

#[test]
fn samples_lie_on_the_surface() {
    let pts = sample_mesh_surface(&unit_cube(), 2000, &mut Rng::new(5)).unwrap();
    for p in pts.points() {
        let c = p.to_array();
        let on_face = c.iter().any(|&v| v.abs() < 1e-12 || (v - 1.0).abs() < 1e-12);
        let inside = c.iter().all(|&v| (-1e-12..=1.0 + 1e-12).contains(&v));
        assert!(on_face && inside, "{p:?}");
    }
}

#[test]
fn subsample_is_uniform() {
    let mut counts = [0usize; 10];
    let mut rng = Rng::new(6);
    for _ in 0..100_000 {
        for i in random_subsample_indices(10, 4, &mut rng).unwrap() {
            counts[i] += 1;
        }
    }
    for c in counts {
        assert!((39_500..=40_500).contains(&c), "{counts:?}");
    }
}

#[test]
fn subsample_is_reproducible() {
    let cloud = random_cloud(100, &mut Rng::new(7));
    let a = random_subsample(&cloud, 30, &mut Rng::new(8)).unwrap();
    let b = random_subsample(&cloud, 30, &mut Rng::new(8)).unwrap();
    assert_eq!(a, b);
}
