//! Reconfigurable gripper configurations: finger count, arrangement and
//! finger properties, plus the planar layout of fingers for a gripper pose.
//!
//! Every finger sits on its own pneumatic cylinder, so a configuration is
//! fully described by the finger count and the arrangement (actuators always
//! equal fingers).

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::{Pose2, Shape, Vec2};
use crate::kv::{KeyValueFile, KeyValues};

/// Friction coefficient of a finger with its silicone skin removed.
pub const BARE_FRICTION: f64 = 0.2;
pub const DEFAULT_SKIN_FRICTION: f64 = 0.9;
pub const DEFAULT_FINGER_WIDTH: f64 = 0.045;
pub const DEFAULT_FINGER_LENGTH: f64 = 0.10;
pub const DEFAULT_PALM_RADIUS: f64 = 0.075;
pub const DEFAULT_ROW_GAP: f64 = 0.12;
pub const DEFAULT_FINGER_PITCH: f64 = 0.09;
/// Distance radial fingers may bend past the palm centre.
pub const RADIAL_OVERSHOOT: f64 = 0.03;

#[derive(Debug, Clone, PartialEq)]
pub enum Arrangement {
    /// Fingers evenly spaced on a circle, closing toward its centre.
    Radial { palm_radius: f64 },
    /// Two opposing rows closing toward each other.
    Parallel {
        row_gap: f64,
        finger_pitch: f64,
        side_counts: (usize, usize),
    },
}

impl Arrangement {
    fn validate(&self) -> Result<()> {
        match *self {
            Arrangement::Radial { palm_radius } => {
                if !(palm_radius > 0.0) {
                    return Err(Error::invalid("palm_radius must be positive"));
                }
            }
            Arrangement::Parallel {
                row_gap,
                finger_pitch,
                side_counts,
            } => {
                if !(row_gap > 0.0 && finger_pitch > 0.0) {
                    return Err(Error::invalid("row_gap and finger_pitch must be positive"));
                }
                if side_counts.0 < 1 || side_counts.1 < 1 {
                    return Err(Error::invalid("each parallel row needs at least one finger"));
                }
            }
        }
        Ok(())
    }

    /// Natural finger travel for the arrangement.
    pub fn default_travel(&self) -> f64 {
        match *self {
            Arrangement::Radial { palm_radius } => palm_radius + RADIAL_OVERSHOOT,
            Arrangement::Parallel { row_gap, .. } => row_gap,
        }
    }

    pub fn is_parallel(&self) -> bool {
        matches!(self, Arrangement::Parallel { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FingerSpec {
    pub width: f64,
    /// Finger length, which bounds the graspable object height.
    pub length: f64,
    pub max_travel: f64,
    pub skin_friction: f64,
    pub skinned: bool,
}

impl FingerSpec {
    pub fn with_travel(max_travel: f64) -> Self {
        Self {
            width: DEFAULT_FINGER_WIDTH,
            length: DEFAULT_FINGER_LENGTH,
            max_travel,
            skin_friction: DEFAULT_SKIN_FRICTION,
            skinned: true,
        }
    }

    /// Friction of the finger surface actually touching the object.
    pub fn friction(&self) -> f64 {
        if self.skinned {
            self.skin_friction
        } else {
            BARE_FRICTION
        }
    }

    fn validate(&self) -> Result<()> {
        let all = [self.width, self.length, self.max_travel, self.skin_friction];
        if all.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid("finger dimensions and friction must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GripperConfig {
    id: String,
    finger_count: usize,
    actuator_count: usize,
    arrangement: Arrangement,
    finger: FingerSpec,
}

impl GripperConfig {
    pub fn new(
        id: impl Into<String>,
        finger_count: usize,
        arrangement: Arrangement,
        finger: FingerSpec,
    ) -> Result<Self> {
        let id = id.into();
        if id.is_empty() || id.contains(char::is_whitespace) {
            return Err(Error::invalid("gripper id must be a non-empty word"));
        }
        if finger_count < 2 {
            return Err(Error::invalid("a gripper needs at least two fingers"));
        }
        arrangement.validate()?;
        finger.validate()?;
        if let Arrangement::Parallel { side_counts, .. } = arrangement {
            if side_counts.0 + side_counts.1 != finger_count {
                return Err(Error::invalid(format!(
                    "side counts {side_counts:?} do not add up to {finger_count} fingers"
                )));
            }
        }
        let expected = canonical_shape(&id);
        if let Some((n, parallel)) = expected {
            if n != finger_count || parallel != arrangement.is_parallel() {
                return Err(Error::invalid(format!(
                    "id {id} is reserved for the canonical {n}-finger {} gripper",
                    if parallel { "parallel" } else { "radial" }
                )));
            }
        }
        Ok(Self {
            id,
            finger_count,
            actuator_count: finger_count,
            arrangement,
            finger,
        })
    }

    pub fn radial(id: &str, finger_count: usize) -> Result<Self> {
        let arrangement = Arrangement::Radial {
            palm_radius: DEFAULT_PALM_RADIUS,
        };
        let finger = FingerSpec::with_travel(arrangement.default_travel());
        Self::new(id, finger_count, arrangement, finger)
    }

    pub fn parallel(id: &str, side_counts: (usize, usize)) -> Result<Self> {
        let arrangement = Arrangement::Parallel {
            row_gap: DEFAULT_ROW_GAP,
            finger_pitch: DEFAULT_FINGER_PITCH,
            side_counts,
        };
        let finger = FingerSpec::with_travel(arrangement.default_travel());
        Self::new(id, side_counts.0 + side_counts.1, arrangement, finger)
    }

    /// One of `R3`, `P3`, `R4`, `P4`.
    pub fn canonical(id: &str) -> Result<Self> {
        match id {
            "R3" => Self::radial("R3", 3),
            "P3" => Self::parallel("P3", (2, 1)),
            "R4" => Self::radial("R4", 4),
            "P4" => Self::parallel("P4", (2, 2)),
            other => Err(Error::invalid(format!("unknown canonical gripper {other}"))),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn finger_count(&self) -> usize {
        self.finger_count
    }

    pub fn actuator_count(&self) -> usize {
        self.actuator_count
    }

    pub fn arrangement(&self) -> &Arrangement {
        &self.arrangement
    }

    pub fn finger(&self) -> &FingerSpec {
        &self.finger
    }

    /// Same gripper with the silicone skin on or off.
    pub fn with_skin(&self, skinned: bool) -> Self {
        let mut out = self.clone();
        out.finger.skinned = skinned;
        out
    }

    pub fn with_skin_friction(&self, skin_friction: f64) -> Result<Self> {
        let mut out = self.clone();
        out.finger.skin_friction = skin_friction;
        out.finger.validate()?;
        Ok(out)
    }

    /// Planar outline of the palm, used for collision checks at approach height.
    pub fn palm_footprint(&self, pose: &Pose2) -> Shape {
        match self.arrangement {
            Arrangement::Radial { palm_radius } => Shape::Circle {
                center: pose.position(),
                radius: palm_radius,
            },
            Arrangement::Parallel {
                row_gap,
                finger_pitch,
                side_counts,
            } => {
                let widest = side_counts.0.max(side_counts.1);
                let length = (widest - 1) as f64 * finger_pitch + self.finger.width;
                Shape::rectangle(pose.position(), length, row_gap, pose.yaw())
                    .expect("validated dimensions are positive")
            }
        }
    }

    /// Parses the key-value gripper file format (see README).
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let id = kv.require_str("id")?.to_string();
        let arrangement = match kv.require_str("arrangement")? {
            "radial" => Arrangement::Radial {
                palm_radius: kv.f64_or("palm_radius", DEFAULT_PALM_RADIUS)?,
            },
            "parallel" => Arrangement::Parallel {
                row_gap: kv.f64_or("row_gap", DEFAULT_ROW_GAP)?,
                finger_pitch: kv.f64_or("finger_pitch", DEFAULT_FINGER_PITCH)?,
                side_counts: (
                    kv.usize_or("side_a", 1)?,
                    kv.usize_or("side_b", 1)?,
                ),
            },
            other => {
                return Err(Error::parse(
                    "arrangement",
                    format!("expected radial or parallel, got {other}"),
                ))
            }
        };
        let finger_count = match arrangement {
            Arrangement::Radial { .. } => kv.usize_or("fingers", 3)?,
            Arrangement::Parallel { side_counts, .. } => {
                kv.usize_or("fingers", side_counts.0 + side_counts.1)?
            }
        };
        let finger = FingerSpec {
            width: kv.f64_or("finger_width", DEFAULT_FINGER_WIDTH)?,
            length: kv.f64_or("finger_length", DEFAULT_FINGER_LENGTH)?,
            max_travel: kv.f64_or("max_travel", arrangement.default_travel())?,
            skin_friction: kv.f64_or("skin_friction", DEFAULT_SKIN_FRICTION)?,
            skinned: kv.bool_or("skinned", true)?,
        };
        Self::new(id, finger_count, arrangement, finger)
    }

    pub fn to_key_values(&self) -> String {
        let mut s = format!("id = {}\nfingers = {}\n", self.id, self.finger_count);
        match &self.arrangement {
            Arrangement::Radial { palm_radius } => {
                s += &format!("arrangement = radial\npalm_radius = {palm_radius}\n");
            }
            Arrangement::Parallel {
                row_gap,
                finger_pitch,
                side_counts,
            } => {
                s += &format!(
                    "arrangement = parallel\nrow_gap = {row_gap}\nfinger_pitch = {finger_pitch}\nside_a = {}\nside_b = {}\n",
                    side_counts.0, side_counts.1
                );
            }
        }
        let f = &self.finger;
        s += &format!(
            "finger_width = {}\nfinger_length = {}\nmax_travel = {}\nskin_friction = {}\nskinned = {}\n",
            f.width, f.length, f.max_travel, f.skin_friction, f.skinned
        );
        s
    }

    /// Accepts a canonical id or a path to a gripper file.
    pub fn load(spec: &str) -> Result<Self> {
        if let Ok(cfg) = Self::canonical(spec) {
            return Ok(cfg);
        }
        let kv = KeyValueFile::load(Path::new(spec))?;
        Self::from_key_values(kv.section(""))
    }
}

impl fmt::Display for GripperConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id)
    }
}

impl FromStr for GripperConfig {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::load(s)
    }
}

fn canonical_shape(id: &str) -> Option<(usize, bool)> {
    match id {
        "R3" => Some((3, false)),
        "P3" => Some((3, true)),
        "R4" => Some((4, false)),
        "P4" => Some((4, true)),
        _ => None,
    }
}

/// `[R3, P3, R4, P4]` with default fingers.
pub fn canonical_configs() -> Vec<GripperConfig> {
    ["R3", "P3", "R4", "P4"]
        .iter()
        .map(|id| GripperConfig::canonical(id).expect("canonical ids are valid"))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Finger {
    pub start: Vec2,
    pub closing_direction: Vec2,
    pub travel_limit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FingerLayout {
    pub fingers: Vec<Finger>,
    /// Width of each finger's contact pad, centred on its start point.
    pub pad_width: f64,
}

/// Places every fingertip for the gripper at `pose`.
///
/// Parallel rows sit at `±row_gap/2` along the pose's normal axis; the first
/// side count goes on the `+` side. Fingers in a row are centred on the yaw axis.
pub fn finger_layout(config: &GripperConfig, pose: &Pose2) -> FingerLayout {
    let center = pose.position();
    let s_max = config.finger.max_travel;
    let fingers = match config.arrangement {
        Arrangement::Radial { palm_radius } => {
            let n = config.finger_count;
            (0..n)
                .map(|i| {
                    let phi = pose.yaw() + 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                    let radial = Vec2::from_angle(phi);
                    Finger {
                        start: center + radial * palm_radius,
                        closing_direction: -radial,
                        travel_limit: s_max,
                    }
                })
                .collect()
        }
        Arrangement::Parallel {
            row_gap,
            finger_pitch,
            side_counts,
        } => {
            let axis = Vec2::from_angle(pose.yaw());
            let normal = axis.perp();
            let row = |count: usize, side: f64| {
                (0..count).map(move |k| {
                    let along = (k as f64 - (count as f64 - 1.0) / 2.0) * finger_pitch;
                    Finger {
                        start: center + axis * along + normal * (side * row_gap / 2.0),
                        closing_direction: normal * -side,
                        travel_limit: s_max,
                    }
                })
            };
            row(side_counts.0, 1.0)
                .chain(row(side_counts.1, -1.0))
                .collect()
        }
    };
    FingerLayout {
        fingers,
        pad_width: config.finger.width,
    }
}

/// Clear gap between adjacent fingers on a two-finger row.
pub fn two_finger_gap(config: &GripperConfig) -> Option<f64> {
    match config.arrangement {
        Arrangement::Radial { .. } => None,
        Arrangement::Parallel {
            finger_pitch,
            side_counts,
            ..
        } => {
            if side_counts.0 == 2 || side_counts.1 == 2 {
                Some(finger_pitch - config.finger.width)
            } else {
                None
            }
        }
    }
}

/// Gap corridors between adjacent fingers of every multi-finger row, as
/// `(lo, hi)` offsets along the gripper's yaw axis.
pub fn gap_corridors(config: &GripperConfig) -> Vec<(f64, f64)> {
    let Arrangement::Parallel {
        finger_pitch,
        side_counts,
        ..
    } = config.arrangement
    else {
        return Vec::new();
    };
    let w = config.finger.width;
    let mut out = Vec::new();
    for count in [side_counts.0, side_counts.1] {
        for k in 0..count.saturating_sub(1) {
            let a = (k as f64 - (count as f64 - 1.0) / 2.0) * finger_pitch;
            let b = a + finger_pitch;
            if b - a > w {
                out.push((a + w / 2.0, b - w / 2.0));
            }
        }
    }
    out.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-15 && (a.1 - b.1).abs() < 1e-15);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn canonical_set() {
        let cfgs = canonical_configs();
        let ids: Vec<_> = cfgs.iter().map(|c| c.id().to_string()).collect();
        assert_eq!(ids, ["R3", "P3", "R4", "P4"]);
        assert_eq!(cfgs[0].finger_count(), 3);
        assert!(matches!(cfgs[0].arrangement(), Arrangement::Radial { .. }));
        assert!(matches!(
            cfgs[1].arrangement(),
            Arrangement::Parallel {
                side_counts: (2, 1),
                ..
            }
        ));
        assert!(matches!(
            cfgs[3].arrangement(),
            Arrangement::Parallel {
                side_counts: (2, 2),
                ..
            }
        ));
        for c in &cfgs {
            assert_eq!(c.actuator_count(), c.finger_count());
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(GripperConfig::new(
            "X",
            1,
            Arrangement::Radial { palm_radius: 0.05 },
            FingerSpec::with_travel(0.05)
        )
        .is_err());
        assert!(GripperConfig::new(
            "X",
            4,
            Arrangement::Parallel {
                row_gap: 0.08,
                finger_pitch: 0.05,
                side_counts: (2, 1)
            },
            FingerSpec::with_travel(0.08)
        )
        .is_err());
        assert!(GripperConfig::new(
            "R3",
            4,
            Arrangement::Radial { palm_radius: 0.05 },
            FingerSpec::with_travel(0.05)
        )
        .is_err());
        assert!(GripperConfig::canonical("R5").is_err());
    }

    #[test]
    fn radial_layout_r3() {
        let cfg = GripperConfig::canonical("R3").unwrap();
        let layout = finger_layout(&cfg, &Pose2::identity());
        assert_eq!(layout.fingers.len(), 3);
        for (i, f) in layout.fingers.iter().enumerate() {
            let phi = 2.0 * PI * i as f64 / 3.0;
            let r = DEFAULT_PALM_RADIUS;
            assert_abs_diff_eq!(f.start.x, r * phi.cos(), epsilon = 1e-12);
            assert_abs_diff_eq!(f.start.y, r * phi.sin(), epsilon = 1e-12);
            // closing direction points at the centre
            let to_center = (Vec2::ZERO - f.start).normalized();
            assert_abs_diff_eq!(f.closing_direction.dot(to_center), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(f.travel_limit, cfg.finger().max_travel);
        }
    }

    #[test]
    fn parallel_layout_p4() {
        let cfg = GripperConfig::canonical("P4").unwrap();
        let layout = finger_layout(&cfg, &Pose2::identity());
        let mut starts: Vec<(f64, f64)> = layout
            .fingers
            .iter()
            .map(|f| (f.start.x, f.start.y))
            .collect();
        starts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let (a, b) = (DEFAULT_FINGER_PITCH / 2.0, DEFAULT_ROW_GAP / 2.0);
        let expected = [(-a, -b), (-a, b), (a, -b), (a, b)];
        for (s, e) in starts.iter().zip(expected) {
            assert_abs_diff_eq!(s.0, e.0, epsilon = 1e-12);
            assert_abs_diff_eq!(s.1, e.1, epsilon = 1e-12);
        }
        for f in &layout.fingers {
            // each row closes toward the other one
            assert_abs_diff_eq!(f.closing_direction.y, -f.start.y.signum(), epsilon = 1e-12);
            assert_abs_diff_eq!(f.travel_limit, DEFAULT_ROW_GAP);
        }
    }

    #[test]
    fn p3_lone_finger_is_centred_opposite_the_pair() {
        let cfg = GripperConfig::canonical("P3").unwrap();
        let layout = finger_layout(&cfg, &Pose2::identity());
        let lone: Vec<_> = layout.fingers.iter().filter(|f| f.start.y < 0.0).collect();
        assert_eq!(lone.len(), 1);
        assert_abs_diff_eq!(lone[0].start.x, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn gaps() {
        let p3 = GripperConfig::canonical("P3").unwrap();
        assert_abs_diff_eq!(two_finger_gap(&p3).unwrap(), 0.045, epsilon = 1e-15);
        assert_abs_diff_eq!(
            two_finger_gap(&p3).unwrap(),
            p3.finger().width,
            epsilon = 1e-15
        );
        let p4 = GripperConfig::canonical("P4").unwrap();
        assert_abs_diff_eq!(two_finger_gap(&p4).unwrap(), 0.045, epsilon = 1e-15);
        assert!(two_finger_gap(&GripperConfig::canonical("R3").unwrap()).is_none());
        let corridors = gap_corridors(&p3);
        assert_eq!(corridors.len(), 1);
        assert_abs_diff_eq!(corridors[0].0, -0.0225, epsilon = 1e-15);
        assert_abs_diff_eq!(corridors[0].1, 0.0225, epsilon = 1e-15);
    }

    #[test]
    fn key_value_round_trip() {
        for cfg in canonical_configs() {
            let text = cfg.to_key_values();
            let kv = KeyValueFile::parse(&text, "mem").unwrap();
            let back = GripperConfig::from_key_values(kv.section("")).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn radial_closing_directions_are_evenly_spaced() {
        for n in 2..8 {
            let cfg = GripperConfig::radial(&format!("R{n}x"), n).unwrap();
            let layout = finger_layout(&cfg, &Pose2::new(Vec2::new(0.1, -0.2), 0.3));
            for i in 0..n {
                let a = layout.fingers[i].closing_direction;
                let b = layout.fingers[(i + 1) % n].closing_direction;
                let angle = a.cross(b).atan2(a.dot(b)).rem_euclid(2.0 * PI);
                assert!((angle - 2.0 * PI / n as f64).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn layout_is_equivariant(
            idx in 0usize..4,
            x in -0.3f64..0.3, y in -0.3f64..0.3, yaw in -3.0f64..3.0,
            alpha in -3.0f64..3.0, dx in -0.2f64..0.2, dy in -0.2f64..0.2,
        ) {
            let cfg = &canonical_configs()[idx];
            let pose = Pose2::new(Vec2::new(x, y), yaw);
            let motion = Pose2::new(Vec2::new(dx, dy), alpha);
            let base = finger_layout(cfg, &pose);
            let moved = finger_layout(cfg, &motion.compose(&pose));
            for (b, m) in base.fingers.iter().zip(&moved.fingers) {
                let expect_start = motion.transform_point(b.start);
                let expect_dir = motion.transform_vector(b.closing_direction);
                prop_assert!(expect_start.distance(m.start) < 1e-12);
                prop_assert!(expect_dir.distance(m.closing_direction) < 1e-12);
                prop_assert_eq!(b.travel_limit, m.travel_limit);
            }
        }
    }
}
