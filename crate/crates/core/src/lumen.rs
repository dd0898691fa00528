//! Lumen environments: piecewise centerlines, local radius, wall model and
//! the catalog of test fixtures.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
pub enum SegmentKind {
    Straight {
        length_mm: f64,
    },
    /// Planar bend turning to the left of the direction of travel.
    Elbow {
        bend_radius_mm: f64,
        sweep_deg: f64,
    },
}

impl SegmentKind {
    pub fn length(&self) -> f64 {
        match *self {
            SegmentKind::Straight { length_mm } => length_mm,
            SegmentKind::Elbow {
                bend_radius_mm,
                sweep_deg,
            } => bend_radius_mm * sweep_deg.to_radians(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waviness {
    pub amplitude_mm: f64,
    pub period_mm: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LumenSegment {
    pub kind: SegmentKind,
    pub diameter_mm: f64,
    #[serde(default)]
    pub waviness: Waviness,
}

impl LumenSegment {
    pub fn straight(length_mm: f64, diameter_mm: f64) -> Self {
        LumenSegment {
            kind: SegmentKind::Straight { length_mm },
            diameter_mm,
            waviness: Waviness::default(),
        }
    }

    pub fn elbow(bend_radius_mm: f64, sweep_deg: f64, diameter_mm: f64) -> Self {
        LumenSegment {
            kind: SegmentKind::Elbow {
                bend_radius_mm,
                sweep_deg,
            },
            diameter_mm,
            waviness: Waviness::default(),
        }
    }

    pub fn with_waviness(mut self, amplitude_mm: f64, period_mm: f64) -> Self {
        self.waviness = Waviness {
            amplitude_mm,
            period_mm,
        };
        self
    }

    fn validate(&self) -> Result<()> {
        match self.kind {
            SegmentKind::Straight { length_mm } => {
                ensure_finite(length_mm, "length_mm")?;
                if length_mm <= 0.0 {
                    return Err(invalid("length_mm", "must be > 0"));
                }
            }
            SegmentKind::Elbow {
                bend_radius_mm,
                sweep_deg,
            } => {
                ensure_finite(bend_radius_mm, "bend_radius_mm")?;
                ensure_finite(sweep_deg, "sweep_deg")?;
                if bend_radius_mm <= 0.0 {
                    return Err(invalid("bend_radius_mm", "must be > 0"));
                }
                if !(sweep_deg > 0.0 && sweep_deg <= 180.0) {
                    return Err(invalid("sweep_deg", "must lie in (0, 180]"));
                }
            }
        }
        ensure_finite(self.diameter_mm, "diameter_mm")?;
        ensure_finite(self.waviness.amplitude_mm, "amplitude_mm")?;
        ensure_finite(self.waviness.period_mm, "period_mm")?;
        if self.diameter_mm <= 0.0 {
            return Err(invalid("diameter_mm", "must be > 0"));
        }
        let a = self.waviness.amplitude_mm;
        if a < 0.0 || a >= self.diameter_mm / 4.0 {
            return Err(invalid("amplitude_mm", "must lie in [0, diameter/4)"));
        }
        if a > 0.0 && self.waviness.period_mm <= 0.0 {
            return Err(invalid("period_mm", "must be > 0 when amplitude is set"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
pub enum Wall {
    Rigid,
    Elastic {
        /// Ring force per mm of uniform radial expansion at small strain.
        #[serde(rename = "hoop_stiffness_N_per_mm")]
        hoop_stiffness_n_per_mm: f64,
        collapsed: bool,
        /// Normal force the draped wall applies at zero interference; only
        /// used when `collapsed`.
        #[serde(rename = "collapse_preload_N", default)]
        collapse_preload_n: f64,
    },
}

/// Wall behaviour at one arclength.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WallLaw {
    Rigid,
    Elastic {
        hoop_stiffness_n_per_mm: f64,
        preload_n: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LumenModel {
    pub segments: Vec<LumenSegment>,
    pub wall: Wall,
    pub mu_wall: f64,
    /// Arclength positions of external support rings.
    #[serde(default, rename = "supports_mm")]
    pub supports: Vec<f64>,
    #[serde(default = "default_support_half_width")]
    pub support_half_width_mm: f64,
    /// Multiplier on the hoop stiffness near supports; absent means rigid.
    #[serde(default)]
    pub support_stiffness_factor: Option<f64>,
    #[serde(default)]
    pub lubricated: bool,
    #[serde(default = "default_lubrication_factor")]
    pub lubrication_factor: f64,
    /// Uniform inclination of the lumen plane; positive climbs forward.
    #[serde(default)]
    pub incline_deg: f64,
}

fn default_support_half_width() -> f64 {
    20.0
}

fn default_lubrication_factor() -> f64 {
    0.6
}

/// Position and unit tangent on the centerline. The lumen lies in the x-y
/// plane, entering at the origin along +x.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position_mm: [f64; 2],
    pub tangent: [f64; 2],
}

impl LumenModel {
    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(invalid("segments", "at least one segment is required"));
        }
        for s in &self.segments {
            s.validate()?;
        }
        for w in self.segments.windows(2) {
            if w[0].diameter_mm != w[1].diameter_mm {
                return Err(invalid(
                    "diameter_mm",
                    format!(
                        "mismatch across joint: {} vs {}",
                        w[0].diameter_mm, w[1].diameter_mm
                    ),
                ));
            }
        }
        ensure_finite(self.mu_wall, "mu_wall")?;
        if self.mu_wall <= 0.0 {
            return Err(invalid("mu_wall", "must be > 0"));
        }
        if let Wall::Elastic {
            hoop_stiffness_n_per_mm,
            collapse_preload_n,
            ..
        } = self.wall
        {
            ensure_finite(hoop_stiffness_n_per_mm, "hoop_stiffness_N_per_mm")?;
            ensure_finite(collapse_preload_n, "collapse_preload_N")?;
            if hoop_stiffness_n_per_mm <= 0.0 {
                return Err(invalid("hoop_stiffness_N_per_mm", "must be > 0"));
            }
            if collapse_preload_n < 0.0 {
                return Err(invalid("collapse_preload_N", "must be >= 0"));
            }
        }
        let total = self.length();
        for &s in &self.supports {
            ensure_finite(s, "supports_mm")?;
            if !(0.0..=total).contains(&s) {
                return Err(invalid("supports_mm", format!("{s} outside [0, {total}]")));
            }
        }
        if let Some(f) = self.support_stiffness_factor {
            ensure_finite(f, "support_stiffness_factor")?;
            if f < 1.0 {
                return Err(invalid("support_stiffness_factor", "must be >= 1"));
            }
        }
        if !(0.0..=1.0).contains(&self.lubrication_factor) || self.lubrication_factor == 0.0 {
            return Err(invalid("lubrication_factor", "must lie in (0, 1]"));
        }
        ensure_finite(self.incline_deg, "incline_deg")?;
        if self.incline_deg.abs() >= 90.0 {
            return Err(invalid("incline_deg", "must lie in (-90, 90)"));
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        self.segments.iter().map(|s| s.kind.length()).sum()
    }

    pub fn is_collapsed(&self) -> bool {
        matches!(
            self.wall,
            Wall::Elastic {
                collapsed: true,
                ..
            }
        )
    }

    /// Friction coefficient for resistive sliding terms.
    pub fn sliding_friction(&self) -> f64 {
        if self.lubricated {
            self.mu_wall * self.lubrication_factor
        } else {
            self.mu_wall
        }
    }

    fn check(&self, s: f64) -> Result<()> {
        ensure_finite(s, "s_mm")?;
        let total = self.length();
        if !(0.0..=total).contains(&s) {
            return Err(Error::OutOfRange {
                s_mm: s,
                length_mm: total,
            });
        }
        Ok(())
    }

    /// Segment index and the arclength at which it starts.
    fn locate(&self, s: f64) -> (usize, f64) {
        let mut start = 0.0;
        for (i, seg) in self.segments.iter().enumerate() {
            let len = seg.kind.length();
            if s < start + len || i + 1 == self.segments.len() {
                return (i, start);
            }
            start += len;
        }
        unreachable!("lumen has at least one segment")
    }

    pub fn local_radius(&self, s: f64) -> Result<f64> {
        self.check(s)?;
        let (i, start) = self.locate(s);
        let seg = &self.segments[i];
        let w = seg.waviness;
        let wave = if w.amplitude_mm > 0.0 {
            w.amplitude_mm * (2.0 * PI * (s - start) / w.period_mm).sin()
        } else {
            0.0
        };
        Ok(0.5 * seg.diameter_mm + wave)
    }

    pub fn centerline_pose(&self, s: f64) -> Result<Pose> {
        self.check(s)?;
        let mut pos = [0.0, 0.0];
        let mut heading: f64 = 0.0;
        let mut start = 0.0;
        for seg in &self.segments {
            let len = seg.kind.length();
            let along = (s - start).min(len);
            match seg.kind {
                SegmentKind::Straight { .. } => {
                    pos[0] += along * heading.cos();
                    pos[1] += along * heading.sin();
                }
                SegmentKind::Elbow { bend_radius_mm, .. } => {
                    let turn = along / bend_radius_mm;
                    // Centre of curvature sits to the left of the heading.
                    let cx = pos[0] - bend_radius_mm * heading.sin();
                    let cy = pos[1] + bend_radius_mm * heading.cos();
                    heading += turn;
                    pos[0] = cx + bend_radius_mm * heading.sin();
                    pos[1] = cy - bend_radius_mm * heading.cos();
                }
            }
            if s <= start + len {
                break;
            }
            start += len;
        }
        Ok(Pose {
            position_mm: pos,
            tangent: [heading.cos(), heading.sin()],
        })
    }

    /// Number of elbows whose entry lies behind `s`.
    pub fn elbows_entered(&self, s: f64) -> usize {
        let mut start = 0.0;
        let mut count = 0;
        for seg in &self.segments {
            if matches!(seg.kind, SegmentKind::Elbow { .. }) && s > start {
                count += 1;
            }
            start += seg.kind.length();
        }
        count
    }

    /// Start and end arclengths of every elbow.
    pub fn elbow_spans(&self) -> Vec<(f64, f64)> {
        let mut start = 0.0;
        let mut out = Vec::new();
        for seg in &self.segments {
            let len = seg.kind.length();
            if matches!(seg.kind, SegmentKind::Elbow { .. }) {
                out.push((start, start + len));
            }
            start += len;
        }
        out
    }

    fn near_support(&self, s: f64) -> bool {
        self.supports
            .iter()
            .any(|&p| (s - p).abs() <= self.support_half_width_mm)
    }

    pub fn wall_at(&self, s: f64) -> Result<WallLaw> {
        self.check(s)?;
        Ok(match self.wall {
            Wall::Rigid => WallLaw::Rigid,
            Wall::Elastic {
                hoop_stiffness_n_per_mm,
                collapsed,
                collapse_preload_n,
            } => {
                if self.near_support(s) {
                    match self.support_stiffness_factor {
                        None => WallLaw::Rigid,
                        Some(f) => WallLaw::Elastic {
                            hoop_stiffness_n_per_mm: hoop_stiffness_n_per_mm * f,
                            preload_n: 0.0,
                        },
                    }
                } else {
                    WallLaw::Elastic {
                        hoop_stiffness_n_per_mm,
                        preload_n: if collapsed { collapse_preload_n } else { 0.0 },
                    }
                }
            }
        })
    }
}

const ACRYLIC_MU: f64 = 0.6;
const PHANTOM_MU: f64 = 1.64;
const PHANTOM_DIAMETER: f64 = 85.0;
const PHANTOM_STRAIGHT: f64 = 241.0;
const PHANTOM_BEND_RADIUS: f64 = 75.0;
const PHANTOM_HOOP: f64 = 0.175;
const PHANTOM_PRELOAD: f64 = 0.1;
const PHANTOM_WAVE: (f64, f64) = (1.5, 40.0);
const SUPPORT_FACTOR: f64 = 2.0;

fn pipe(diameter_mm: f64) -> LumenModel {
    LumenModel {
        segments: vec![LumenSegment::straight(500.0, diameter_mm)],
        wall: Wall::Rigid,
        mu_wall: ACRYLIC_MU,
        supports: Vec::new(),
        support_half_width_mm: default_support_half_width(),
        support_stiffness_factor: None,
        lubricated: false,
        lubrication_factor: default_lubrication_factor(),
        incline_deg: 0.0,
    }
}

fn phantom(collapsed: bool) -> LumenModel {
    let (a, period) = PHANTOM_WAVE;
    let segments = vec![
        LumenSegment::straight(PHANTOM_STRAIGHT, PHANTOM_DIAMETER).with_waviness(a, period),
        LumenSegment::elbow(PHANTOM_BEND_RADIUS, 90.0, PHANTOM_DIAMETER).with_waviness(a, period),
        LumenSegment::straight(PHANTOM_STRAIGHT, PHANTOM_DIAMETER).with_waviness(a, period),
    ];
    let bend = PHANTOM_BEND_RADIUS * PI / 2.0;
    let supports = if collapsed {
        Vec::new()
    } else {
        vec![
            0.0,
            PHANTOM_STRAIGHT,
            PHANTOM_STRAIGHT + bend,
            2.0 * PHANTOM_STRAIGHT + bend,
        ]
    };
    LumenModel {
        segments,
        wall: Wall::Elastic {
            hoop_stiffness_n_per_mm: PHANTOM_HOOP,
            collapsed,
            collapse_preload_n: if collapsed { PHANTOM_PRELOAD } else { 0.0 },
        },
        mu_wall: PHANTOM_MU,
        supports,
        support_half_width_mm: default_support_half_width(),
        support_stiffness_factor: Some(SUPPORT_FACTOR),
        lubricated: true,
        lubrication_factor: default_lubrication_factor(),
        incline_deg: 0.0,
    }
}

pub const FIXTURE_NAMES: [&str; 5] = [
    "pipe74",
    "pipe84",
    "pipe94",
    "phantom_supported",
    "phantom_collapsed",
];

/// Acrylic pipes and the two silicone phantom set-ups.
pub fn builtin_fixtures() -> BTreeMap<&'static str, LumenModel> {
    let mut m = BTreeMap::new();
    m.insert("pipe74", pipe(74.0));
    m.insert("pipe84", pipe(84.0));
    m.insert("pipe94", pipe(94.0));
    m.insert("phantom_supported", phantom(false));
    m.insert("phantom_collapsed", phantom(true));
    m
}

pub fn fixture(name: &str) -> Result<LumenModel> {
    builtin_fixtures()
        .remove(name)
        .ok_or_else(|| Error::UnknownFixture(name.to_string()))
}
