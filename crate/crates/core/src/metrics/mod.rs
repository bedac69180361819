//! Chamfer and Hausdorff distances.
//!
//! Conventions, which fix the absolute scale of every reported number:
//!
//! * CD is the **sum** of the two directional means of **squared**
//!   nearest-neighbour distances.
//! * HD is the larger of the two directed maxima of **unsquared** Euclidean
//!   nearest-neighbour distances.
//!
//! Reports display both multiplied by 10³ with three decimals.

mod evaluate;

pub use evaluate::{dedup_points, evaluate_bundle, predict_bundle, BundleEvaluation, EvalOptions, MergedModel};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, SpatialIndex};

/// For each point of `from`, its nearest point in `to` as `(squared distance, index)`.
pub fn nearest_assignments(from: &PointCloud, to: &SpatialIndex) -> Vec<(f64, usize)> {
    from.points().iter().map(|&p| to.nearest(p)).collect()
}

fn check(pred: &PointCloud, gt: &PointCloud) -> Result<()> {
    if pred.is_empty() || gt.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(())
}

fn mean_first(v: &[(f64, usize)]) -> f64 {
    v.iter().map(|c| c.0).sum::<f64>() / v.len() as f64
}

/// Chamfer distance together with both nearest-neighbour assignments.
#[derive(Clone, Debug)]
pub struct ChamferTerms {
    pub value: f64,
    /// For each predicted point: nearest ground-truth point.
    pub pred_to_gt: Vec<(f64, usize)>,
    /// For each ground-truth point: nearest predicted point.
    pub gt_to_pred: Vec<(f64, usize)>,
}

pub fn chamfer_terms(pred: &PointCloud, gt: &PointCloud) -> Result<ChamferTerms> {
    check(pred, gt)?;
    let pred_to_gt = nearest_assignments(pred, &SpatialIndex::build(gt));
    let gt_to_pred = nearest_assignments(gt, &SpatialIndex::build(pred));
    Ok(ChamferTerms {
        value: mean_first(&pred_to_gt) + mean_first(&gt_to_pred),
        pred_to_gt,
        gt_to_pred,
    })
}

/// Symmetric Chamfer distance (squared distances, sum of directional means).
pub fn chamfer(pred: &PointCloud, gt: &PointCloud) -> Result<f64> {
    Ok(chamfer_terms(pred, gt)?.value)
}

/// Symmetric Hausdorff distance (unsquared).
pub fn hausdorff(pred: &PointCloud, gt: &PointCloud) -> Result<f64> {
    check(pred, gt)?;
    let directed = |a: &PointCloud, b: &PointCloud| {
        nearest_assignments(a, &SpatialIndex::build(b))
            .into_iter()
            .map(|c| c.0)
            .fold(0.0, f64::max)
    };
    Ok(directed(pred, gt).max(directed(gt, pred)).sqrt())
}

/// Render a raw metric in the ×10⁻³ display convention: `0.035459` → `"35.459"`.
pub fn format_e3(raw: f64) -> String {
    format!("{:.3}", raw * 1e3)
}

/// Metrics for one prediction (or the mean over many).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub cd: f64,
    pub hd: f64,
    pub n_pred: usize,
    pub n_gt: usize,
    /// Number of pairs averaged into this report (1 for a single pair).
    pub n_samples: usize,
    pub wall_time_s: f64,
}

impl MetricsReport {
    pub fn cd_e3(&self) -> String {
        format_e3(self.cd)
    }

    pub fn hd_e3(&self) -> String {
        format_e3(self.hd)
    }

    /// Unweighted mean of per-sample reports, summed in the given order.
    pub fn mean(reports: &[MetricsReport]) -> Option<MetricsReport> {
        if reports.is_empty() {
            return None;
        }
        let n = reports.len() as f64;
        Some(MetricsReport {
            cd: reports.iter().map(|r| r.cd).sum::<f64>() / n,
            hd: reports.iter().map(|r| r.hd).sum::<f64>() / n,
            n_pred: reports[0].n_pred,
            n_gt: reports[0].n_gt,
            n_samples: reports.iter().map(|r| r.n_samples).sum(),
            wall_time_s: reports.iter().map(|r| r.wall_time_s).sum(),
        })
    }
}

pub fn evaluate_pair(pred: &PointCloud, gt: &PointCloud) -> Result<MetricsReport> {
    let start = std::time::Instant::now();
    let cd = chamfer(pred, gt)?;
    let hd = hausdorff(pred, gt)?;
    Ok(MetricsReport {
        cd,
        hd,
        n_pred: pred.len(),
        n_gt: gt.len(),
        n_samples: 1,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point3;

    fn pc(pts: &[[f64; 3]]) -> PointCloud {
        PointCloud::new(pts.iter().map(|&a| Point3::from_array(a)).collect()).unwrap()
    }

    #[test]
    fn identical_clouds_are_zero() {
        let a = pc(&[[0.0, 1.0, 2.0], [3.0, -1.0, 0.5], [0.2, 0.2, 0.2]]);
        assert_eq!(chamfer(&a, &a).unwrap(), 0.0);
        assert_eq!(hausdorff(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn single_pair_arithmetic() {
        let p = pc(&[[0.0, 0.0, 0.0]]);
        let g = pc(&[[1.0, 0.0, 0.0]]);
        assert_eq!(chamfer(&p, &g).unwrap(), 2.0);
    }

    #[test]
    fn hausdorff_asymmetric_max() {
        let p = pc(&[[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]]);
        let g = pc(&[[0.0, 0.0, 0.0]]);
        assert_eq!(hausdorff(&p, &g).unwrap(), 2.0);
        assert_eq!(hausdorff(&g, &p).unwrap(), 2.0);
    }

    #[test]
    fn display_convention() {
        assert_eq!(format_e3(0.035459), "35.459");
        assert_eq!(format_e3(0.0), "0.000");
    }

    #[test]
    fn mean_of_reports() {
        let r = |cd, hd| MetricsReport {
            cd,
            hd,
            n_pred: 4,
            n_gt: 4,
            n_samples: 1,
            wall_time_s: 0.0,
        };
        let m = MetricsReport::mean(&[r(1.0, 2.0), r(3.0, 4.0)]).unwrap();
        assert_eq!((m.cd, m.hd, m.n_samples), (2.0, 3.0, 2));
    }

    #[test]
    fn empty_rejected() {
        let a = pc(&[[0.0; 3]]);
        let empty = PointCloud::default();
        assert!(chamfer(&a, &empty).is_err());
        assert!(hausdorff(&empty, &a).is_err());
    }
}
