mod common;

use common::*;
use pcu_core::metrics::{chamfer, evaluate_pair, hausdorff};
use pcu_core::{Point3, PointCloud, Rng};

#[test]
fn chamfer_and_hausdorff_match_brute_force() {
    let mut rng = Rng::new(1);
    for _ in 0..50 {
        let p = random_cloud(1 + rng.below(100), &mut rng);
        let g = random_cloud(1 + rng.below(100), &mut rng);
        assert!((chamfer(&p, &g).unwrap() - brute_chamfer(&p, &g)).abs() < 1e-12);
        assert_eq!(hausdorff(&p, &g).unwrap(), brute_hausdorff(&p, &g));
    }
    let p = random_cloud(32, &mut rng);
    let g = random_cloud(48, &mut rng);
    assert!((chamfer(&p, &g).unwrap() - brute_chamfer(&p, &g)).abs() < 1e-12);
}

#[test]
fn symmetric() {
    let mut rng = Rng::new(2);
    let p = random_cloud(40, &mut rng);
    let g = random_cloud(70, &mut rng);
    assert!((chamfer(&p, &g).unwrap() - chamfer(&g, &p).unwrap()).abs() < 1e-15);
    assert_eq!(hausdorff(&p, &g).unwrap(), hausdorff(&g, &p).unwrap());
}

#[test]
fn rigid_motion_invariance() {
    let mut rng = Rng::new(3);
    let p = random_cloud(60, &mut rng);
    let g = random_cloud(60, &mut rng);
    let (s, c) = (0.6f64.sin(), 0.6f64.cos());
    let move_it = |cl: &PointCloud| {
        PointCloud::new(
            cl.points()
                .iter()
                .map(|q| Point3::new(c * q.x - s * q.y + 4.0, s * q.x + c * q.y - 2.0, q.z + 10.0))
                .collect(),
        )
        .unwrap()
    };
    let (p2, g2) = (move_it(&p), move_it(&g));
    assert!((chamfer(&p, &g).unwrap() - chamfer(&p2, &g2).unwrap()).abs() < 1e-9);
    assert!((hausdorff(&p, &g).unwrap() - hausdorff(&p2, &g2).unwrap()).abs() < 1e-9);
}

#[test]
fn zero_only_for_equal_sets() {
    let mut rng = Rng::new(4);
    let p = random_cloud(20, &mut rng);
    let reordered = PointCloud::new(p.points().iter().rev().copied().collect()).unwrap();
    let r = evaluate_pair(&reordered, &p).unwrap();
    assert_eq!((r.cd, r.hd), (0.0, 0.0));
    let mut moved = p.points().to_vec();
    moved[3].x += 1e-6;
    let m = PointCloud::new(moved).unwrap();
    assert!(chamfer(&m, &p).unwrap() > 0.0 && hausdorff(&m, &p).unwrap() > 0.0);
}
