//! Rest-state discretization of a chamber cross-section.
//!
//! The meridian of the toroidal chamber is a closed loop in the (r, z)
//! half-plane: a rounded rectangle whose inner wall lies on the chassis.
//! Nodes run with the inner wall traversed towards -z and the outer crown
//! towards +z, so the Pappus volume integral is positive.

use std::f64::consts::{FRAC_PI_2, PI};

use super::{ChamberProfile, FlangeStyle};

#[derive(Clone, Debug)]
pub(crate) struct RestMesh {
    pub nodes: Vec<[f64; 2]>,
    pub pinned: Vec<bool>,
    /// Nodes on the flat outer crown in the rest state.
    pub crown: Vec<bool>,
    pub chassis_radius: f64,
}

#[derive(Clone, Copy, Debug)]
enum Piece {
    Line {
        from: [f64; 2],
        to: [f64; 2],
    },
    Arc {
        center: [f64; 2],
        radius: f64,
        start: f64,
        sweep: f64,
    },
}

impl Piece {
    fn length(&self) -> f64 {
        match *self {
            Piece::Line { from, to } => (to[0] - from[0]).hypot(to[1] - from[1]),
            Piece::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    fn point(&self, t: f64) -> [f64; 2] {
        match *self {
            Piece::Line { from, to } => [
                from[0] + t * (to[0] - from[0]),
                from[1] + t * (to[1] - from[1]),
            ],
            Piece::Arc {
                center,
                radius,
                start,
                sweep,
            } => {
                let phi = start + t * sweep;
                [
                    center[0] + radius * phi.cos(),
                    center[1] + radius * phi.sin(),
                ]
            }
        }
    }
}

struct Tagged {
    piece: Piece,
    pinned: bool,
    crown: bool,
}

fn line(from: [f64; 2], to: [f64; 2], pinned: bool) -> Tagged {
    Tagged {
        piece: Piece::Line { from, to },
        pinned,
        crown: false,
    }
}

fn arc(center: [f64; 2], radius: f64, start: f64) -> Tagged {
    Tagged {
        piece: Piece::Arc {
            center,
            radius,
            start,
            sweep: FRAC_PI_2,
        },
        pinned: false,
        crown: false,
    }
}

impl RestMesh {
    pub fn build(profile: &ChamberProfile) -> RestMesh {
        let rc = profile.chassis_radius_mm;
        let r0 = profile.rest_outer_radius_mm;
        let half = 0.5 * profile.footprint_width_mm;
        let rho = profile.corner_radius_mm;
        let g = profile.flange_width_mm;
        let flat = half - rho;

        let mut pieces = Vec::with_capacity(12);
        // Inner wall, first half (z: 0 -> -flat).
        match profile.flange_style {
            FlangeStyle::Cf => {
                pieces.push(line([rc, 0.0], [rc, -0.5 * g], true));
                pieces.push(line([rc, -0.5 * g], [rc, -flat], false));
            }
            FlangeStyle::Lf => {
                pieces.push(line([rc, 0.0], [rc, -(flat - g)], false));
                pieces.push(line([rc, -(flat - g)], [rc, -flat], true));
            }
        }
        pieces.push(arc([rc + rho, -flat], rho, PI));
        pieces.push(line([rc + rho, -half], [r0 - rho, -half], false));
        pieces.push(arc([r0 - rho, -flat], rho, 1.5 * PI));
        pieces.push(Tagged {
            piece: Piece::Line {
                from: [r0, -flat],
                to: [r0, flat],
            },
            pinned: false,
            crown: true,
        });
        pieces.push(arc([r0 - rho, flat], rho, 0.0));
        pieces.push(line([r0 - rho, half], [rc + rho, half], false));
        pieces.push(arc([rc + rho, flat], rho, FRAC_PI_2));
        match profile.flange_style {
            FlangeStyle::Cf => {
                pieces.push(line([rc, flat], [rc, 0.5 * g], false));
                pieces.push(line([rc, 0.5 * g], [rc, 0.0], true));
            }
            FlangeStyle::Lf => {
                pieces.push(line([rc, flat], [rc, flat - g], true));
                pieces.push(line([rc, flat - g], [rc, 0.0], false));
            }
        }

        let counts = allocate(
            &pieces.iter().map(|p| p.piece.length()).collect::<Vec<_>>(),
            profile.n_nodes,
        );

        let n = profile.n_nodes;
        let mut nodes = Vec::with_capacity(n);
        let mut pinned = Vec::with_capacity(n);
        let mut crown = Vec::with_capacity(n);
        for (k, (tagged, &count)) in pieces.iter().zip(&counts).enumerate() {
            let prev_pinned = pieces[(k + pieces.len() - 1) % pieces.len()].pinned;
            let prev_crown = pieces[(k + pieces.len() - 1) % pieces.len()].crown;
            for m in 0..count {
                let t = m as f64 / count as f64;
                nodes.push(tagged.piece.point(t));
                // A piece owns its start node; the start node also closes the previous piece.
                let at_start = m == 0;
                pinned.push(tagged.pinned || (at_start && prev_pinned));
                crown.push(tagged.crown || (at_start && prev_crown));
            }
        }
        // Snap inner-wall nodes exactly onto the chassis.
        for p in nodes.iter_mut() {
            if (p[0] - rc).abs() < 1e-12 {
                p[0] = rc;
            }
        }

        RestMesh {
            nodes,
            pinned,
            crown,
            chassis_radius: rc,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// Cyclic shift of the node numbering; the loop is unchanged.
    #[cfg(test)]
    pub fn rotated(&self, shift: usize) -> RestMesh {
        let mut out = self.clone();
        out.nodes.rotate_left(shift);
        out.pinned.rotate_left(shift);
        out.crown.rotate_left(shift);
        out
    }
}

/// Largest-remainder allocation of `total` segments over pieces, at least one each.
fn allocate(lengths: &[f64], total: usize) -> Vec<usize> {
    let k = lengths.len();
    let spare = total.saturating_sub(k);
    let sum: f64 = lengths.iter().sum();
    let exact: Vec<f64> = lengths.iter().map(|l| l / sum * spare as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| 1 + e.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(style: FlangeStyle, n: usize) -> ChamberProfile {
        ChamberProfile {
            n_nodes: n,
            ..ChamberProfile::default_for(style)
        }
    }

    #[test]
    fn node_count_matches_request() {
        for n in [16, 33, 48, 96, 97] {
            assert_eq!(RestMesh::build(&profile(FlangeStyle::Lf, n)).len(), n);
            assert_eq!(RestMesh::build(&profile(FlangeStyle::Cf, n)).len(), n);
        }
    }

    #[test]
    fn flanges_sit_on_chassis() {
        for style in [FlangeStyle::Cf, FlangeStyle::Lf] {
            let m = RestMesh::build(&profile(style, 64));
            assert!(m.pinned.iter().filter(|&&p| p).count() >= 2);
            for (p, &pin) in m.nodes.iter().zip(&m.pinned) {
                if pin {
                    assert_eq!(p[0], m.chassis_radius);
                }
                assert!(p[0] >= m.chassis_radius);
            }
        }
    }

    #[test]
    fn cf_and_lf_share_the_loop() {
        let a = RestMesh::build(&profile(FlangeStyle::Cf, 64));
        let b = RestMesh::build(&profile(FlangeStyle::Lf, 64));
        let max_r = |m: &RestMesh| m.nodes.iter().map(|p| p[0]).fold(f64::MIN, f64::max);
        assert_eq!(max_r(&a), max_r(&b));
        assert!(a.crown.iter().any(|&c| c) && b.crown.iter().any(|&c| c));
    }
}
