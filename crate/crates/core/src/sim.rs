//! Quasi-static grasp execution.
//!
//! Fingers are independent rays that stop at the first boundary they meet.
//! A grasp succeeds when the contact wrenches achieve force closure and the
//! pinch friction can carry the object's weight.

use std::fmt;
use std::str::FromStr;

use crate::catalog::ObjectModel;
use crate::error::{Error, Result};
use crate::geometry::{Pose2, Shape, Vec2};
use crate::gripper::{finger_layout, gap_corridors, FingerLayout, GripperConfig};
use crate::lp::{maximize, LpOutcome};
use crate::scene::{CameraModel, Scene, WorkspaceModel};

/// Strict-interiority margin of the origin in wrench space.
pub const FORCE_CLOSURE_MARGIN: f64 = 1e-6;
pub const PINCH_FORCE: f64 = 5.0;
pub const LIFT_SAFETY: f64 = 1.5;
pub const GRAVITY: f64 = 9.81;

/// Planar grasp in image coordinates. `theta` is the gripper yaw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspPose {
    pub u: f64,
    pub v: f64,
    pub theta: f64,
}

impl GraspPose {
    /// Wraps `theta` into `[−π/2, π/2)`.
    pub fn new(u: f64, v: f64, theta: f64) -> Self {
        use std::f64::consts::PI;
        let mut t = (theta + PI / 2.0).rem_euclid(PI) - PI / 2.0;
        if t >= PI / 2.0 {
            t = -PI / 2.0;
        }
        Self { u, v, theta: t }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    pub finger_index: usize,
    pub point: Vec2,
    /// Outward normal of the object at `point`.
    pub outward_normal: Vec2,
    pub friction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FailureReason {
    NoContact,
    NotForceClosure,
    LiftSlip,
    GapEscape,
    PalmCollision,
}

impl FailureReason {
    pub const ALL: [FailureReason; 5] = [
        FailureReason::NoContact,
        FailureReason::NotForceClosure,
        FailureReason::LiftSlip,
        FailureReason::GapEscape,
        FailureReason::PalmCollision,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FailureReason::NoContact => "NoContact",
            FailureReason::NotForceClosure => "NotForceClosure",
            FailureReason::LiftSlip => "LiftSlip",
            FailureReason::GapEscape => "GapEscape",
            FailureReason::PalmCollision => "PalmCollision",
        }
    }
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FailureReason {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown failure reason `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraspOutcome {
    pub success: bool,
    pub contacts: Vec<Contact>,
    pub failure_reason: Option<FailureReason>,
    /// Executed fingertip depth in the camera frame.
    pub z: f64,
    /// Index of the targeted placement.
    pub target: Option<usize>,
}

impl GraspOutcome {
    fn failed(reason: FailureReason, z: f64, target: Option<usize>, contacts: Vec<Contact>) -> Self {
        Self {
            success: false,
            contacts,
            failure_reason: Some(reason),
            z,
            target,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftModel {
    pub pinch_force: f64,
    pub safety: f64,
    pub gravity: f64,
}

impl Default for LiftModel {
    fn default() -> Self {
        Self {
            pinch_force: PINCH_FORCE,
            safety: LIFT_SAFETY,
            gravity: GRAVITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimParams {
    pub lift: LiftModel,
    /// Pre-closure object push as a fraction of the finger travel.
    pub push_fraction: f64,
    pub closure_margin: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            lift: LiftModel::default(),
            push_fraction: 0.0,
            closure_margin: FORCE_CLOSURE_MARGIN,
        }
    }
}

/// Fingertip depth for the descent.
pub fn plan_z(h_obj: f64, h_finger: f64, z_bin: f64, z_obj: f64, delta_h: f64) -> Result<f64> {
    let inputs = [h_obj, h_finger, z_bin, z_obj, delta_h];
    if inputs.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::invalid("plan_z inputs must be positive and finite"));
    }
    if z_obj > z_bin {
        return Err(Error::invalid("object top lies below the bin floor"));
    }
    if h_obj <= h_finger {
        Ok(z_bin - delta_h)
    } else {
        Ok(z_obj + h_finger - delta_h)
    }
}

/// Advances every finger toward the object until it touches or runs out of travel.
pub fn close_fingers(
    object: &ObjectModel,
    pose: &Pose2,
    layout: &FingerLayout,
    finger_friction: f64,
) -> Vec<Contact> {
    close_on_shape(&object.footprint.transformed(pose), object.surface_friction, layout, finger_friction)
}

fn close_on_shape(
    shape: &Shape,
    object_friction: f64,
    layout: &FingerLayout,
    finger_friction: f64,
) -> Vec<Contact> {
    let mu = (finger_friction * object_friction).sqrt();
    layout
        .fingers
        .iter()
        .enumerate()
        .filter_map(|(i, f)| {
            let lateral = f.closing_direction.perp();
            let hits: Vec<crate::geometry::RayHit> = pad_offsets(layout.pad_width)
                .filter_map(|s| {
                    shape
                        .ray_cast(f.start + lateral * s, f.closing_direction)
                        .expect("layout directions are unit vectors")
                })
                .filter(|h| h.t <= f.travel_limit)
                .collect();
            let first = hits.iter().map(|h| h.t).fold(f64::INFINITY, f64::min);
            let patch: Vec<_> = hits.iter().filter(|h| h.t <= first + PAD_COMPLIANCE).collect();
            if patch.is_empty() {
                return None;
            }
            let k = patch.len() as f64;
            let point = patch.iter().fold(Vec2::ZERO, |acc, h| acc + h.contact_point) * (1.0 / k);
            let normal = patch.iter().fold(Vec2::ZERO, |acc, h| acc + h.outward_normal);
            let outward_normal = if normal.norm() > 1e-9 {
                normal.normalized()
            } else {
                patch[0].outward_normal
            };
            Some(Contact {
                finger_index: i,
                point,
                outward_normal,
                friction: mu,
            })
        })
        .collect()
}

/// Indentation depth over which a soft pad conforms to the surface.
pub const PAD_COMPLIANCE: f64 = 0.01;
const PAD_RAYS: usize = 9;

/// Lateral sample offsets across a pad, centre first, then outward.
fn pad_offsets(width: f64) -> impl Iterator<Item = f64> {
    let step = width / (PAD_RAYS - 1) as f64;
    (0..PAD_RAYS).map(move |k| {
        let j = k.div_ceil(2) as f64;
        if k % 2 == 1 { -j * step } else { j * step }
    })
}

/// The two friction-cone edge wrenches `(fx, fy, τ/ρ)` of every contact,
/// with torque taken about `center`.
pub fn cone_edge_wrenches(contacts: &[Contact], center: Vec2, rho: f64) -> Vec<[f64; 3]> {
    let mut out = Vec::with_capacity(2 * contacts.len());
    for c in contacts {
        let half = c.friction.atan();
        let r = c.point - center;
        for angle in [half, -half] {
            let f = (-c.outward_normal).rotated(angle);
            out.push([f.x, f.y, r.cross(f) / rho]);
        }
    }
    out
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Signed depth of the origin inside the convex hull of `points`:
/// the distance to the nearest facet plane when inside, non-positive otherwise.
pub fn hull_depth(points: &[[f64; 3]]) -> f64 {
    let scale = points.iter().map(|p| dot(*p, *p).sqrt()).fold(1.0, f64::max);
    let tol = 1e-12 * scale;
    let mut depth = f64::INFINITY;
    let mut found = false;
    let n = points.len();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let nrm = cross(sub(points[j], points[i]), sub(points[k], points[i]));
                let len = dot(nrm, nrm).sqrt();
                if len <= 1e-12 * scale * scale {
                    continue;
                }
                let nrm = [nrm[0] / len, nrm[1] / len, nrm[2] / len];
                let b = dot(nrm, points[i]);
                let (mut above, mut below) = (false, false);
                for p in points {
                    let s = dot(nrm, *p) - b;
                    above |= s > tol;
                    below |= s < -tol;
                }
                if !above {
                    depth = depth.min(b);
                    found = true;
                }
                if !below {
                    depth = depth.min(-b);
                    found = true;
                }
            }
        }
    }
    if found {
        return depth;
    }
    // collinear or coincident points: minus the distance to the segment
    let Some(&first) = points.first() else {
        return f64::NEG_INFINITY;
    };
    let far = points
        .iter()
        .copied()
        .max_by(|a, b| dot(sub(*a, first), sub(*a, first)).total_cmp(&dot(sub(*b, first), sub(*b, first))))
        .unwrap();
    let a = points
        .iter()
        .copied()
        .max_by(|a, b| dot(sub(*a, far), sub(*a, far)).total_cmp(&dot(sub(*b, far), sub(*b, far))))
        .unwrap();
    let d = sub(far, a);
    let dd = dot(d, d);
    let t = if dd > 0.0 { (dot(sub([0.0; 3], a), d) / dd).clamp(0.0, 1.0) } else { 0.0 };
    let closest = [a[0] + t * d[0], a[1] + t * d[1], a[2] + t * d[2]];
    -dot(closest, closest).sqrt()
}

/// Force closure by convex-hull facet enumeration.
pub fn force_closure(contacts: &[Contact], center: Vec2, rho: f64) -> bool {
    force_closure_with_margin(contacts, center, rho, FORCE_CLOSURE_MARGIN)
}

pub fn force_closure_with_margin(contacts: &[Contact], center: Vec2, rho: f64, margin: f64) -> bool {
    if contacts.len() < 2 {
        return false;
    }
    hull_depth(&cone_edge_wrenches(contacts, center, rho)) > margin
}

/// Reach of the wrench hull along each of the six axis rays `±e_k` from the
/// origin, each found by a linear program. `None` when a ray misses the hull.
pub fn axis_reaches(wrenches: &[[f64; 3]]) -> Vec<Option<f64>> {
    let m = wrenches.len();
    let mut out = Vec::with_capacity(6);
    for axis in 0..3 {
        for sign in [1.0, -1.0] {
            // variables λ_1..λ_m, t⁺, t⁻; Σλ w − t·d = 0, Σλ = 1
            let mut a = vec![vec![0.0; m + 2]; 4];
            for (i, w) in wrenches.iter().enumerate() {
                for r in 0..3 {
                    a[r][i] = w[r];
                }
                a[3][i] = 1.0;
            }
            a[axis][m] = -sign;
            a[axis][m + 1] = sign;
            let mut c = vec![0.0; m + 2];
            c[m] = 1.0;
            c[m + 1] = -1.0;
            out.push(match maximize(&c, &a, &[0.0, 0.0, 0.0, 1.0]) {
                LpOutcome::Optimal { value, .. } => Some(value),
                _ => None,
            });
        }
    }
    out
}

/// Force closure by linear programming: the hull must reach beyond the margin
/// along all six axis rays.
pub fn force_closure_lp(contacts: &[Contact], center: Vec2, rho: f64) -> bool {
    if contacts.len() < 2 {
        return false;
    }
    axis_reaches(&cone_edge_wrenches(contacts, center, rho))
        .iter()
        .all(|r| r.is_some_and(|t| t > FORCE_CLOSURE_MARGIN))
}

pub fn lift_check(contacts: &[Contact], mass: f64) -> bool {
    lift_check_with(contacts, mass, &LiftModel::default())
}

pub fn lift_check_with(contacts: &[Contact], mass: f64, model: &LiftModel) -> bool {
    let grip: f64 = contacts.iter().map(|c| c.friction * model.pinch_force).sum();
    grip >= model.safety * mass * model.gravity
}

/// Placement targeted by a grasp centred at `p`: the tallest one under `p`,
/// else the nearest within `reach`.
pub fn select_target(scene: &Scene, p: Vec2, reach: f64) -> Option<usize> {
    if let Some(i) = scene.object_at(p) {
        return Some(i);
    }
    let mut best: Option<(f64, usize)> = None;
    for (i, pl) in scene.placements.iter().enumerate() {
        let d = pl.world_footprint().distance_to_point(p);
        if d <= reach && best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, i));
        }
    }
    best.map(|(_, i)| i)
}

pub fn execute_grasp(
    scene: &Scene,
    config: &GripperConfig,
    pose: &GraspPose,
    camera: &CameraModel,
) -> Result<GraspOutcome> {
    execute_grasp_with(scene, config, pose, camera, &SimParams::default())
}

pub fn execute_grasp_with(
    scene: &Scene,
    config: &GripperConfig,
    pose: &GraspPose,
    camera: &CameraModel,
    params: &SimParams,
) -> Result<GraspOutcome> {
    let (x, y, _) = camera.pixel_to_world(pose.u, pose.v, scene.workspace.z_bin)?;
    execute_grasp_world(scene, config, Vec2::new(x, y), pose.theta, params)
}

/// Grasp centred at world point `center` with gripper yaw `theta`.
pub fn execute_grasp_world(
    scene: &Scene,
    config: &GripperConfig,
    center: Vec2,
    theta: f64,
    params: &SimParams,
) -> Result<GraspOutcome> {
    let ws: &WorkspaceModel = &scene.workspace;
    if !ws.contains(center) {
        return Err(Error::invalid(format!(
            "grasp centre ({}, {}) is outside the bin",
            center.x, center.y
        )));
    }
    let finger = config.finger();
    let Some(target) = select_target(scene, center, finger.length) else {
        return Ok(GraspOutcome::failed(
            FailureReason::NoContact,
            ws.z_bin - ws.delta_h,
            None,
            Vec::new(),
        ));
    };
    let object = &scene.placements[target].object;
    let z_obj = ws.z_bin - object.height;
    let z = plan_z(object.height, finger.length, ws.z_bin, z_obj, ws.delta_h)?;
    let tip_height = ws.z_bin - z;
    let palm_height = tip_height + finger.length;

    let gripper_pose = Pose2::new(center, theta);
    let palm = config.palm_footprint(&gripper_pose);
    let layout = finger_layout(config, &gripper_pose);
    let collision = scene.placements.iter().any(|pl| {
        let shape = pl.world_footprint();
        (pl.object.height > palm_height && shape.intersects(&palm))
            || (pl.object.height > tip_height
                && layout.fingers.iter().any(|f| shape.contains(f.start)))
    });
    if collision {
        return Ok(GraspOutcome::failed(FailureReason::PalmCollision, z, Some(target), Vec::new()));
    }

    let mut object_pose = scene.placements[target].pose;
    if params.push_fraction > 0.0 {
        let away = object_pose.position() - center;
        if away.norm() > 0.0 {
            let shift = away.normalized() * (params.push_fraction * finger.max_travel);
            object_pose = Pose2::new(object_pose.position() + shift, object_pose.yaw());
        }
    }
    let shape = object.footprint.transformed(&object_pose);
    let contacts = close_on_shape(&shape, object.surface_friction, &layout, finger.friction());
    if contacts.is_empty() {
        return Ok(GraspOutcome::failed(FailureReason::NoContact, z, Some(target), contacts));
    }

    let axis = Vec2::from_angle(theta);
    let ext = shape.extent(axis);
    let mid = (ext.min + ext.max) / 2.0 - center.dot(axis);
    if gap_corridors(config)
        .iter()
        .any(|&(a, b)| ext.width() < b - a && a <= mid && mid <= b)
    {
        return Ok(GraspOutcome::failed(FailureReason::GapEscape, z, Some(target), contacts));
    }

    let rho = object.characteristic_length();
    if contacts.len() < 2
        || !force_closure_with_margin(&contacts, object_pose.position(), rho, params.closure_margin)
    {
        return Ok(GraspOutcome::failed(FailureReason::NotForceClosure, z, Some(target), contacts));
    }
    if !lift_check_with(&contacts, object.mass, &params.lift) {
        return Ok(GraspOutcome::failed(FailureReason::LiftSlip, z, Some(target), contacts));
    }
    Ok(GraspOutcome {
        success: true,
        contacts,
        failure_reason: None,
        z,
        target: Some(target),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::Catalog;
    use crate::geometry::Shape;
    use crate::gripper::{two_finger_gap, GripperConfig};
    use crate::scene::Placement;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn circle_contacts(angles: &[f64], r: f64, mu: f64) -> Vec<Contact> {
        angles
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let n = Vec2::from_angle(*a);
                Contact {
                    finger_index: i,
                    point: n * r,
                    outward_normal: n,
                    friction: mu,
                }
            })
            .collect()
    }

    /// Minimum over sampled unit directions of the hull support value.
    fn sampled_depth(points: &[[f64; 3]], samples: usize) -> f64 {
        let golden = PI * (3.0 - 5f64.sqrt());
        let mut best = f64::INFINITY;
        for i in 0..samples {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / samples as f64;
            let r = (1.0 - z * z).sqrt();
            let d = [r * (golden * i as f64).cos(), r * (golden * i as f64).sin(), z];
            let h = points.iter().map(|p| dot(*p, d)).fold(f64::NEG_INFINITY, f64::max);
            best = best.min(h);
        }
        best
    }

    #[test]
    fn plan_z_examples() {
        assert_abs_diff_eq!(plan_z(0.05, 0.10, 1.00, 0.95, 0.01).unwrap(), 0.99, epsilon = 1e-15);
        assert_abs_diff_eq!(plan_z(0.20, 0.10, 1.00, 0.80, 0.01).unwrap(), 0.89, epsilon = 1e-15);
        assert_abs_diff_eq!(plan_z(0.10, 0.10, 1.00, 0.90, 0.01).unwrap(), 0.99, epsilon = 1e-15);
        assert!(plan_z(0.0, 0.1, 1.0, 0.9, 0.01).is_err());
        assert!(plan_z(0.1, 0.1, 1.0, 1.1, 0.01).is_err());
        assert!(plan_z(0.1, 0.1, 1.0, 0.9, -0.01).is_err());
    }

    #[test]
    fn closure_examples() {
        let c = Vec2::ZERO;
        let two = |mu| circle_contacts(&[0.0, PI], 0.04, mu);
        assert!(force_closure(&two(0.5), c, 0.04));
        assert!(!force_closure(&two(0.0), c, 0.04));
        let three = |mu| circle_contacts(&[0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0], 0.04, mu);
        assert!(!force_closure(&three(0.0), c, 0.04));
        assert!(force_closure(&three(0.3), c, 0.04));
        assert!(!force_closure(&two(0.5)[..1], c, 0.04));
        assert!(!force_closure(&[], c, 0.04));
        for set in [two(0.5), two(0.0), three(0.0), three(0.3)] {
            assert_eq!(force_closure(&set, c, 0.04), force_closure_lp(&set, c, 0.04));
        }
    }

    #[test]
    fn hull_depth_matches_sampled_support() {
        for set in [
            circle_contacts(&[0.0, PI], 0.04, 0.5),
            circle_contacts(&[0.0, 2.0, 4.0], 0.03, 0.3),
            circle_contacts(&[0.1, 1.4, 3.0, 4.4], 0.05, 0.8),
            circle_contacts(&[0.0, 0.3], 0.05, 0.2),
        ] {
            let w = cone_edge_wrenches(&set, Vec2::ZERO, 0.05);
            let exact = hull_depth(&w);
            let sampled = sampled_depth(&w, 20_000);
            if exact > 0.0 {
                assert!(exact <= sampled + 1e-9, "{exact} vs {sampled}");
                assert!(sampled - exact < 0.02, "{exact} vs {sampled}");
            } else {
                assert!(sampled <= 0.02);
            }
        }
    }

    #[test]
    fn degenerate_hulls() {
        assert_eq!(hull_depth(&[[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]), 0.0);
        assert!(hull_depth(&[[1.0, 1.0, 0.0], [2.0, 1.0, 0.0]]) < 0.0);
        let flat = [[1.0, 0.0, 0.0], [-1.0, 1.0, 0.0], [-1.0, -1.0, 0.0]];
        assert_eq!(hull_depth(&flat), 0.0);
    }

    #[test]
    fn lift_examples() {
        let three = circle_contacts(&[0.0, 2.0, 4.0], 0.03, 0.9);
        assert!(lift_check(&three, 0.2));
        let slick = circle_contacts(&[0.0, 2.0, 4.0], 0.03, 0.0);
        assert!(!lift_check(&slick, 0.2));
        let model = LiftModel {
            pinch_force: 2.0,
            safety: 1.0,
            gravity: 1.0,
        };
        let one = circle_contacts(&[0.0], 0.03, 0.5);
        assert!(lift_check_with(&one, 1.0, &model));
        assert!(!lift_check_with(&one, 1.0 + 1e-12, &model));
    }

    fn scene_with(object: ObjectModel, pose: Pose2) -> Scene {
        Scene {
            placements: vec![Placement { object, pose }],
            workspace: WorkspaceModel::default(),
            seed: 0,
        }
    }

    #[test]
    fn radial_closure_on_small_circle() {
        let cfg = GripperConfig::canonical("R3").unwrap();
        let obj = Catalog::shipped().require("apple").unwrap().clone();
        let pose = Pose2::new(Vec2::new(0.01, 0.0), 0.0);
        let layout = finger_layout(&cfg, &Pose2::new(Vec2::new(0.01, 0.0), 0.3));
        let contacts = close_fingers(&obj, &pose, &layout, 0.9);
        assert_eq!(contacts.len(), 3);
        for c in &contacts {
            let radial = (c.point - Vec2::new(0.01, 0.0)).normalized();
            assert_abs_diff_eq!(radial.dot(c.outward_normal), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(c.friction, (0.9f64 * 0.5).sqrt(), epsilon = 1e-15);
        }
        let far = finger_layout(&cfg, &Pose2::new(Vec2::new(0.2, 0.1), 0.0));
        assert!(close_fingers(&obj, &pose, &far, 0.9).is_empty());
    }

    #[test]
    fn parallel_gap_passes_thin_bar() {
        let cfg = GripperConfig::canonical("P3").unwrap();
        let gap = two_finger_gap(&cfg).unwrap();
        let bar = ObjectModel::new(
            "bar",
            Shape::rectangle(Vec2::ZERO, gap * 0.6, 0.05, 0.0).unwrap(),
            0.05,
            0.05,
            0.5,
            [1, 2, 3],
        )
        .unwrap();
        let gp = Pose2::new(Vec2::ZERO, 0.0);
        let layout = finger_layout(&cfg, &gp);
        let contacts = close_fingers(&bar, &Pose2::identity(), &layout, 0.9);
        let shape = bar.footprint.clone();
        for (i, f) in layout.fingers.iter().enumerate() {
            let oracle = shape
                .ray_cast(f.start, f.closing_direction)
                .unwrap()
                .filter(|h| h.t <= f.travel_limit);
            assert_eq!(oracle.is_some(), contacts.iter().any(|c| c.finger_index == i));
        }
        assert_eq!(contacts.len(), 1);

        let scene = scene_with(bar, Pose2::identity());
        let out = execute_grasp_world(&scene, &cfg, Vec2::ZERO, 0.0, &SimParams::default()).unwrap();
        assert_eq!(out.failure_reason, Some(FailureReason::GapEscape));
    }

    #[test]
    fn pringles_radial_success_and_empty_bin() {
        let cat = Catalog::shipped();
        let cam = CameraModel::default();
        let scene = scene_with(cat.require("pringles").unwrap().clone(), Pose2::new(Vec2::new(0.05, -0.03), 0.4));
        let cfg = GripperConfig::canonical("R3").unwrap();
        let (u, v) = cam.world_to_pixel(Vec2::new(0.05, -0.03));
        let out = execute_grasp(&scene, &cfg, &GraspPose::new(u, v, 0.2), &cam).unwrap();
        assert!(out.success, "{out:?}");
        assert_eq!(out.contacts.len(), 3);
        assert_abs_diff_eq!(out.z, 1.0 - 0.23 + 0.10 - 0.005, epsilon = 1e-12);

        let (u, v) = cam.world_to_pixel(Vec2::new(-0.2, 0.15));
        for cfg in crate::gripper::canonical_configs() {
            let out = execute_grasp(&scene, &cfg, &GraspPose::new(u, v, 0.0), &cam).unwrap();
            assert_eq!(out.failure_reason, Some(FailureReason::NoContact));
        }
        assert!(execute_grasp(&scene, &cfg, &GraspPose::new(-3.0, 5.0, 0.0), &cam).is_err());
    }

    #[test]
    fn grasp_pose_wraps_theta() {
        assert_abs_diff_eq!(GraspPose::new(0.0, 0.0, PI / 2.0).theta, -PI / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(GraspPose::new(0.0, 0.0, 0.7 + PI).theta, 0.7, epsilon = 1e-12);
        assert_eq!(GraspPose::new(0.0, 0.0, -PI / 2.0).theta, -PI / 2.0);
    }

    #[test]
    fn failure_reason_round_trip() {
        for r in FailureReason::ALL {
            assert_eq!(r.as_str().parse::<FailureReason>().unwrap(), r);
        }
        assert!("Nope".parse::<FailureReason>().is_err());
    }
}
