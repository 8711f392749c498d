//! God-object proxy against a single box with a static/dynamic friction cone
//! and a no-slip torsional spring.
//!
//! Proxy coordinates are kept in the box frame so a scripted box carries its
//! proxy (and the twist anchor) along with it.

use nalgebra::Vector3;
use serde::Serialize;

use super::scene::{Placement, SceneBox};
use super::FingerSample;
use crate::types::Wrench;

/// Face of a box: axis index and outward sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Face {
    pub axis: usize,
    pub positive: bool,
}

impl Face {
    pub fn sign(self) -> f64 {
        if self.positive {
            1.0
        } else {
            -1.0
        }
    }

    pub fn normal(self) -> Vector3<f64> {
        let mut n = Vector3::zeros();
        n[self.axis] = self.sign();
        n
    }

    /// Face of minimum penetration for a point inside the box.
    pub fn nearest(half: &Vector3<f64>, local: &Vector3<f64>) -> Face {
        let mut best = Face {
            axis: 0,
            positive: true,
        };
        let mut depth = f64::INFINITY;
        for axis in 0..3 {
            for positive in [true, false] {
                let face = Face { axis, positive };
                let d = half[axis] - face.sign() * local[axis];
                if d < depth {
                    depth = d;
                    best = face;
                }
            }
        }
        best
    }
}

/// Per-box proxy state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxContact {
    pub face: Option<Face>,
    /// Proxy in the box frame, on `face` while in contact.
    pub local_proxy: Vector3<f64>,
    /// Twist anchor relative to the box yaw, rad.
    pub twist_anchor: f64,
    pub slipping: bool,
}

impl BoxContact {
    pub const FREE: BoxContact = BoxContact {
        face: None,
        local_proxy: Vector3::new(0.0, 0.0, 0.0),
        twist_anchor: 0.0,
        slipping: false,
    };

    pub fn in_contact(&self) -> bool {
        self.face.is_some()
    }
}

/// World-frame view of a proxy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContactState {
    pub proxy_position: [f64; 3],
    pub proxy_twist: f64,
    pub in_contact: bool,
    pub contact_normal: [f64; 3],
}

impl ContactState {
    pub fn view(contact: &BoxContact, placement: &Placement, finger: &FingerSample) -> ContactState {
        match contact.face {
            None => ContactState {
                proxy_position: finger.position.into(),
                proxy_twist: finger.twist,
                in_contact: false,
                contact_normal: [0.0; 3],
            },
            Some(face) => ContactState {
                proxy_position: placement.to_world(&contact.local_proxy).into(),
                proxy_twist: contact.twist_anchor + placement.yaw,
                in_contact: true,
                contact_normal: placement.rotate(&face.normal()).into(),
            },
        }
    }
}

fn strictly_inside(half: &Vector3<f64>, p: &Vector3<f64>) -> bool {
    (0..3).all(|k| p[k].abs() < half[k])
}

/// Advances the proxy for one finger sample.
///
/// Outside the box the proxy snaps to the finger. On entry it is placed on
/// the face of least penetration. While in contact it stays pinned
/// tangentially until the spring force leaves the static cone, then it is
/// dragged along the face on the dynamic cone until the force falls back
/// inside it.
pub fn update_proxy(body: &SceneBox, placement: &Placement, state: &BoxContact, finger: &FingerSample) -> BoxContact {
    let half = body.half();
    let f = placement.to_local(&finger.position);
    if !strictly_inside(&half, &f) {
        return BoxContact::FREE;
    }
    let (face, mut proxy, twist_anchor, mut slipping) = match state.face {
        Some(face) => (face, state.local_proxy, state.twist_anchor, state.slipping),
        None => (Face::nearest(&half, &f), f, finger.twist - placement.yaw, false),
    };
    let a = face.axis;
    proxy[a] = face.sign() * half[a];

    let k = body.stiffness_n_per_mm();
    let depth = half[a] - face.sign() * f[a];
    let fn_mag = k * depth;
    let mut offset = proxy - f;
    offset[a] = 0.0;
    let ft_mag = k * offset.norm();

    let mu = if slipping { body.mu_dynamic } else { body.mu_static };
    if ft_mag <= mu * fn_mag {
        slipping = false;
    } else {
        slipping = true;
        let keep = body.mu_dynamic * fn_mag / ft_mag;
        for b in (0..3).filter(|&b| b != a) {
            proxy[b] = f[b] + offset[b] * keep;
        }
    }
    for b in (0..3).filter(|&b| b != a) {
        proxy[b] = proxy[b].clamp(-half[b], half[b]);
    }
    BoxContact {
        face: Some(face),
        local_proxy: proxy,
        twist_anchor,
        slipping,
    }
}

/// Spring force on the finger toward the proxy, N. Torque is left at zero;
/// see [`torsion_update`].
pub fn contact_force(body: &SceneBox, placement: &Placement, state: &BoxContact, finger: &FingerSample) -> Wrench {
    if !state.in_contact() {
        return Wrench::ZERO;
    }
    let stretch = placement.to_world(&state.local_proxy) - finger.position;
    let f = stretch * body.stiffness_n_per_mm();
    Wrench::new(f.x, f.y, f.z, 0.0)
}

/// No-slip torsional spring, N·mm. Zero outside contact.
pub fn torsion_update(state: &BoxContact, placement: &Placement, finger: &FingerSample, k_theta: f64) -> f64 {
    if !state.in_contact() {
        return 0.0;
    }
    k_theta * (finger.twist - (state.twist_anchor + placement.yaw))
}

/// Normal and tangential magnitudes of a contact force, N.
pub fn split_force(state: &BoxContact, placement: &Placement, force: &Vector3<f64>) -> (f64, f64) {
    match state.face {
        None => (0.0, 0.0),
        Some(face) => {
            let n = placement.rotate(&face.normal());
            let fn_signed = force.dot(&n);
            (fn_signed.abs(), (force - n * fn_signed).norm())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(mu_static: f64) -> SceneBox {
        SceneBox {
            center: [0.0, 0.0, -10.0],
            half_extents: [30.0, 30.0, 10.0],
            stiffness: 500.0,
            mu_static,
            mu_dynamic: 0.9 * mu_static,
            grounded: true,
            yaw_deg: 0.0,
            keyframes: vec![],
        }
    }

    fn at(x: f64, y: f64, z: f64, twist_deg: f64) -> FingerSample {
        FingerSample {
            t: 0.0,
            position: Vector3::new(x, y, z),
            twist: twist_deg.to_radians(),
        }
    }

    #[test]
    fn free_finger_has_no_contact() {
        let b = table(2.0);
        let pl = b.placement(0.0);
        let s = update_proxy(&b, &pl, &BoxContact::FREE, &at(1.0, 2.0, 0.5, 0.0));
        assert!(!s.in_contact());
        assert_eq!(contact_force(&b, &pl, &s, &at(1.0, 2.0, 0.5, 0.0)), Wrench::ZERO);
        let view = ContactState::view(&s, &pl, &at(1.0, 2.0, 0.5, 0.0));
        assert_eq!(view.proxy_position, [1.0, 2.0, 0.5]);
    }

    #[test]
    fn straight_press_gives_normal_force() {
        let b = table(2.0);
        let pl = b.placement(0.0);
        let finger = at(1.0, -3.0, -2.0, 0.0);
        let s = update_proxy(&b, &pl, &BoxContact::FREE, &finger);
        let view = ContactState::view(&s, &pl, &finger);
        assert_eq!(view.contact_normal, [0.0, 0.0, 1.0]);
        assert_eq!(view.proxy_position, [1.0, -3.0, 0.0]);
        let w = contact_force(&b, &pl, &s, &finger);
        assert!((w.fz - 1.0).abs() < 1e-12);
        assert_eq!((w.fx, w.fy), (0.0, 0.0));
    }

    #[test]
    fn proxy_pinned_until_static_cone_exceeded() {
        let b = table(2.0);
        let pl = b.placement(0.0);
        let mut s = update_proxy(&b, &pl, &BoxContact::FREE, &at(0.0, 0.0, -1.0, 0.0));
        // fn = 0.5 N, static cone 1.0 N = 2 mm of tangential stretch.
        for i in 1..=40 {
            let y = 0.1 * i as f64;
            let finger = at(0.0, y, -1.0, 0.0);
            let prev = s;
            s = update_proxy(&b, &pl, &s, &finger);
            let w = contact_force(&b, &pl, &s, &finger);
            let spring_if_pinned = 0.5 * y;
            if spring_if_pinned <= 2.0 * 0.5 && !prev.slipping {
                assert_eq!(s.local_proxy.y, 0.0, "pinned at y = {y}");
                assert!(!s.slipping);
            } else {
                assert!(s.slipping, "slipping at y = {y}");
                assert!((w.fy.abs() - 1.8 * 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reversal_resticks() {
        let b = table(2.0);
        let pl = b.placement(0.0);
        let mut s = update_proxy(&b, &pl, &BoxContact::FREE, &at(0.0, 0.0, -1.0, 0.0));
        s = update_proxy(&b, &pl, &s, &at(0.0, 3.0, -1.0, 0.0));
        assert!(s.slipping);
        let dragged = s.local_proxy.y;
        s = update_proxy(&b, &pl, &s, &at(0.0, 2.5, -1.0, 0.0));
        assert!(!s.slipping);
        assert_eq!(s.local_proxy.y, dragged);
    }

    #[test]
    fn torsion_spring() {
        let b = table(2.0);
        let pl = b.placement(0.0);
        let k = 0.5 * 180.0 / std::f64::consts::PI;
        let s = update_proxy(&b, &pl, &BoxContact::FREE, &at(0.0, 0.0, -1.0, 3.0));
        assert_eq!(torsion_update(&s, &pl, &at(0.0, 0.0, -1.0, 3.0), k), 0.0);
        let s = update_proxy(&b, &pl, &s, &at(0.0, 0.0, -1.0, 13.0));
        let tz = torsion_update(&s, &pl, &at(0.0, 0.0, -1.0, 13.0), k);
        assert!((tz - 5.0).abs() < 1e-12, "{tz}");
        assert_eq!(torsion_update(&BoxContact::FREE, &pl, &at(0.0, 0.0, 1.0, 13.0), k), 0.0);
    }

    #[test]
    fn side_entry_uses_side_face() {
        let b = table(2.0);
        let pl = b.placement(0.0);
        let s = update_proxy(&b, &pl, &BoxContact::FREE, &at(29.5, 0.0, -10.0, 0.0));
        assert_eq!(
            s.face,
            Some(Face {
                axis: 0,
                positive: true
            })
        );
    }
}
