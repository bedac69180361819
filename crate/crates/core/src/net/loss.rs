use super::matrix::Mat;
use crate::error::Result;
use crate::geometry::PointCloud;
use crate::metrics::chamfer_terms;

/// Chamfer loss and its gradient with respect to each predicted coordinate.
///
/// `d/dp_i = 2/|P|·(p_i - g_nn(i)) + Σ_{j : nn(g_j) = i} 2/|G|·(p_i - g_j)`.
pub fn chamfer_loss_grad(pred: &PointCloud, gt: &PointCloud) -> Result<(f64, Mat)> {
    let terms = chamfer_terms(pred, gt)?;
    let np = pred.len() as f64;
    let ng = gt.len() as f64;
    let mut grad = Mat::zeros(pred.len(), 3);
    for (i, &(_, j)) in terms.pred_to_gt.iter().enumerate() {
        let d = (pred.get(i) - gt.get(j)).to_array();
        for (g, x) in grad.row_mut(i).iter_mut().zip(d) {
            *g += 2.0 / np * x;
        }
    }
    for (j, &(_, i)) in terms.gt_to_pred.iter().enumerate() {
        let d = (pred.get(i) - gt.get(j)).to_array();
        for (g, x) in grad.row_mut(i).iter_mut().zip(d) {
            *g += 2.0 / ng * x;
        }
    }
    Ok((terms.value, grad))
}
