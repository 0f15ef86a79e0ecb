//! Proprioception: bending and twisting torque about the finger base.
//!
//! Ground truth comes from a contact wrench expressed in the finger frame
//! (origin at the base, x̂ toward the tip, ẑ out of the skin, ŷ = ẑ × x̂).
//! Bending is the ŷ-moment and twisting the x̂-moment. A small-deflection
//! backbone model turns torques into LED-strip displacements, a renderer
//! turns those into two-channel images, and a small convolutional network
//! learns the inverse map.

mod backbone;
mod dataset;
mod regressor;

use nalgebra::{Isometry3, Matrix3, Point3, Rotation3, Translation3, UnitQuaternion, Vector3};

pub use backbone::{readback_torques, render_synthetic_frame, BackboneModel, LedDisplacements, RenderConfig};
pub use dataset::{
    decode_index, generate_dataset, load_dataset, save_dataset, Dataset, DatasetError, GenerateConfig, Sample,
    TorqueDistribution,
};
pub use regressor::{
    evaluate_regressor, train_regressor, Evaluation, ModelError, Prediction, RegressorShape, TorqueRegressor,
    TrainConfig, TrainError, TrainOutcome,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProprioError {
    #[error("not a rigid transform: {0}")]
    NotRigid(String),
    #[error("{name} torque {value} N·mm outside ±{limit} N·mm")]
    OutOfRange { name: &'static str, value: f64, limit: f64 },
    #[error("invalid backbone model: {0}")]
    InvalidModel(String),
}

/// Bending and twisting torque (N·mm) of `force` (N) applied at
/// `contact_point` (mm), both in the finger frame.
pub fn torques_from_wrench(contact_point: Vector3<f64>, force: Vector3<f64>) -> (f64, f64) {
    let tau = contact_point.cross(&force);
    (tau.y, tau.x)
}

/// A pose given as a rotation matrix and a translation (mm).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn from_isometry(iso: &Isometry3<f64>) -> Self {
        Self { rotation: iso.rotation.to_rotation_matrix().into_inner(), translation: iso.translation.vector }
    }

    /// Orthonormal rotation with determinant +1, finite translation.
    pub fn validated(&self) -> Result<Isometry3<f64>, ProprioError> {
        let r = &self.rotation;
        if !r.iter().chain(self.translation.iter()).all(|v| v.is_finite()) {
            return Err(ProprioError::NotRigid("non-finite entry".into()));
        }
        let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
        if ortho > 1e-9 {
            return Err(ProprioError::NotRigid(format!("rotation not orthonormal (deviation {ortho:.3e})")));
        }
        let det = r.determinant();
        if (det - 1.0).abs() > 1e-9 {
            return Err(ProprioError::NotRigid(format!("rotation determinant {det}")));
        }
        let rot = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r));
        Ok(Isometry3::from_parts(Translation3::from(self.translation), rot))
    }
}

/// Express a probe-frame contact point and force in the finger frame.
/// Both poses map their local frame into a common world frame.
pub fn transform_to_finger_frame(
    probe_pose: &RigidTransform,
    finger_pose: &RigidTransform,
    force_in_probe: Vector3<f64>,
    contact_in_probe: Point3<f64>,
) -> Result<(Point3<f64>, Vector3<f64>), ProprioError> {
    let probe = probe_pose.validated()?;
    let finger = finger_pose.validated()?;
    let rel = finger.inverse() * probe;
    Ok((rel * contact_in_probe, rel * force_in_probe))
}
