use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::{FrameInstance, TpGmmModel};
use crate::error::{Error, Result};
use crate::gmm::{GaussianComponent, Gmm};
use crate::linalg::{spd_inverse, symmetrize};

/// Product of Gaussians: precision-weighted combination. `None` when any
/// covariance (or the summed precision) is not invertible.
pub fn product_of_gaussians(
    parts: &[(DVector<f64>, DMatrix<f64>)],
) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let d = parts.first()?.0.len();
    let mut precision = DMatrix::zeros(d, d);
    let mut info = DVector::zeros(d);
    for (mean, cov) in parts {
        let (inv, _) = spd_inverse(cov)?;
        info += &inv * mean;
        precision += inv;
    }
    let (mut cov, _) = spd_inverse(&precision)?;
    symmetrize(&mut cov);
    let mean = &cov * info;
    Some((mean, cov))
}

/// Map every local Gaussian into the world frame of `instance` and fuse the
/// frames of each component into one global Gaussian.
///
/// Time is fused separately from the rest of the state: the frames' time
/// marginals are multiplied, and so are their time-conditioned Gaussians
/// over the remaining coordinates. When all frames agree on the regression
/// of state on time this equals the product of the joint Gaussians; when
/// they disagree, it keeps the fused component anchored in time instead of
/// trading spatial disagreement for a time shift.
pub fn fuse(model: &TpGmmModel, instance: &FrameInstance) -> Result<Gmm> {
    if instance.len() != model.frame_count {
        return Err(Error::contract(alloc::format!(
            "model has {} frames but the instance provides {}",
            model.frame_count,
            instance.len()
        )));
    }
    let mut components = Vec::with_capacity(model.k);
    for (k, per_frame) in model.components.iter().enumerate() {
        let parts: Vec<_> = per_frame
            .iter()
            .zip(&instance.frames)
            .map(|(c, frame)| {
                let a = frame.a();
                let mean = &a * DVector::from_column_slice(&c.mean)
                    + DVector::from_column_slice(frame.b());
                let cov = &a * c.covariance_matrix() * a.transpose();
                (mean, cov)
            })
            .collect();
        let (mean, cov) =
            fuse_time_conditioned(&parts).ok_or(Error::SingularComponent { component: k })?;
        components.push(GaussianComponent::new(mean.iter().copied().collect(), &cov));
    }
    Ok(Gmm {
        priors: model.priors.clone(),
        components,
    })
}

/// Fuse joint Gaussians over `(t, x)`: product of the `t` marginals, and
/// product of the Gaussians of `x` given `t`, reassembled into one joint.
fn fuse_time_conditioned(
    parts: &[(DVector<f64>, DMatrix<f64>)],
) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let d = parts.first()?.0.len();
    let rest = d - 1;
    let mut t_precision = 0.0;
    let mut t_info = 0.0;
    let mut x_precision = DMatrix::zeros(rest, rest);
    let mut offset_info = DVector::zeros(rest);
    let mut slope_info = DVector::zeros(rest);
    for (mean, cov) in parts {
        let var_t = cov[(0, 0)];
        if !(var_t > 0.0) {
            return None;
        }
        t_precision += 1.0 / var_t;
        t_info += mean[0] / var_t;
        if rest == 0 {
            continue;
        }
        let cross = cov.view((1, 0), (rest, 1)).into_owned();
        let slope = &cross / var_t;
        let mut cond = cov.view((1, 1), (rest, rest)) - &cross * cross.transpose() / var_t;
        symmetrize(&mut cond);
        let (p, _) = spd_inverse(&cond)?;
        let slope = slope.column(0).into_owned();
        let offset = mean.rows(1, rest).into_owned() - &slope * mean[0];
        offset_info += &p * offset;
        slope_info += &p * slope;
        x_precision += p;
    }
    let var_t = 1.0 / t_precision;
    let mean_t = t_info * var_t;
    let mut mean = DVector::zeros(d);
    let mut cov = DMatrix::zeros(d, d);
    mean[0] = mean_t;
    cov[(0, 0)] = var_t;
    if rest > 0 {
        let (mut cond, _) = spd_inverse(&x_precision)?;
        symmetrize(&mut cond);
        let offset = &cond * offset_info;
        let slope = &cond * slope_info;
        mean.rows_mut(1, rest)
            .copy_from(&(offset + &slope * mean_t));
        let cross = &slope * var_t;
        cov.view_mut((1, 0), (rest, 1)).copy_from(&cross);
        cov.view_mut((0, 1), (1, rest))
            .copy_from(&cross.transpose());
        cov.view_mut((1, 1), (rest, rest))
            .copy_from(&(cond + &slope * slope.transpose() * var_t));
    }
    symmetrize(&mut cov);
    Some((mean, cov))
}
