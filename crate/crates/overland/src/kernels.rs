//! One-dimensional kernels of the well-balanced scheme.
//!
//! The spatial operator for a cell `i` along one direction is
//!
//! ```text
//! L_i = -( F_{i+1/2L} - F_{i-1/2R} - Fc_i ) / dx
//! F_{i+1/2L} = F(U_{i+1/2L}, U_{i+1/2R}) + (0, g/2 (h_{i+1/2-}^2 - h_{i+1/2L}^2))
//! F_{i-1/2R} = F(U_{i-1/2L}, U_{i-1/2R}) + (0, g/2 (h_{i-1/2+}^2 - h_{i-1/2R}^2))
//! Fc_i       = (0, -g (h_{i-1/2+} + h_{i+1/2-})/2 (z_{i+1/2-} - z_{i-1/2+}))
//! ```
//!
//! where `h_{i±1/2∓}` are MUSCL traces of `h` and `z` traces come from
//! reconstructing `h + z`, and `U_{i+1/2L,R}` are the hydrostatically
//! reconstructed interface states.

/// Flux through an interface. `f_hv` is the transverse momentum flux and is
/// zero in purely 1D use.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NumericalFlux {
    pub f_h: f64,
    pub f_hu: f64,
    pub f_hv: f64,
}

/// Interface states after hydrostatic reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InterfaceStates {
    pub h_l: f64,
    pub h_r: f64,
    pub u_l: f64,
    pub u_r: f64,
    pub v_l: f64,
    pub v_r: f64,
    /// MUSCL depth traces before hydrostatic reconstruction.
    pub h_minus: f64,
    pub h_plus: f64,
    pub z_minus: f64,
    pub z_plus: f64,
}

impl InterfaceStates {
    /// Conserved left/right states `(h, hu)`.
    pub fn conserved(&self) -> ((f64, f64), (f64, f64)) {
        ((self.h_l, self.h_l * self.u_l), (self.h_r, self.h_r * self.u_r))
    }
}

#[inline]
pub fn minmod(x: f64, y: f64) -> f64 {
    if x >= 0.0 && y >= 0.0 {
        x.min(y)
    } else if x <= 0.0 && y <= 0.0 {
        x.max(y)
    } else {
        0.0
    }
}

/// Limited slope `Ds_i` and the face values `(s_{i-1/2+}, s_{i+1/2-})`.
#[inline]
pub fn muscl_slope(s_prev: f64, s_i: f64, s_next: f64, dx: f64) -> f64 {
    minmod((s_i - s_prev) / dx, (s_next - s_i) / dx)
}

#[inline]
pub fn muscl_reconstruct(s_prev: f64, s_i: f64, s_next: f64, dx: f64) -> (f64, f64) {
    let ds = muscl_slope(s_prev, s_i, s_next, dx);
    let half = 0.5 * dx * ds;
    (s_i - half, s_i + half)
}

/// Velocity traces that keep the mean discharge of the cell:
/// `h_{i-1/2+} u_{i-1/2+} + h_{i+1/2-} u_{i+1/2-} = 2 h_i u_i` when
/// `h_minus_side + h_plus_side = 2 h_i`.
#[inline]
pub fn velocity_reconstruct(
    u_i: f64,
    h_i: f64,
    h_minus_side: f64,
    h_plus_side: f64,
    du: f64,
    dx: f64,
) -> (f64, f64) {
    let half = 0.5 * dx * du;
    (u_i - h_plus_side / h_i * half, u_i + h_minus_side / h_i * half)
}

#[inline]
pub fn hydrostatic_reconstruct(
    h_minus: f64,
    z_minus: f64,
    h_plus: f64,
    z_plus: f64,
    u_minus: f64,
    u_plus: f64,
) -> InterfaceStates {
    let z_star = z_minus.max(z_plus);
    InterfaceStates {
        // exact on a flat bed and never deeper than the cell value
        h_l: (h_minus - (z_star - z_minus)).max(0.0),
        h_r: (h_plus - (z_star - z_plus)).max(0.0),
        u_l: u_minus,
        u_r: u_plus,
        v_l: 0.0,
        v_r: 0.0,
        h_minus,
        h_plus,
        z_minus,
        z_plus,
    }
}

#[inline]
fn physical_flux(h: f64, u: f64, g: f64) -> (f64, f64) {
    let q = h * u;
    (q, q * u + 0.5 * g * h * h)
}

/// HLL wave-speed bounds `(c1, c2)`.
#[inline]
pub fn hll_speeds(h_l: f64, u_l: f64, h_r: f64, u_r: f64, g: f64) -> (f64, f64) {
    let (c_l, c_r) = ((g * h_l).sqrt(), (g * h_r).sqrt());
    ((u_l - c_l).min(u_r - c_r), (u_l + c_l).max(u_r + c_r))
}

/// HLL flux `(f_h, f_hu)` for the 1D system.
#[inline]
pub fn hll_flux(h_l: f64, u_l: f64, h_r: f64, u_r: f64, g: f64) -> NumericalFlux {
    if h_l <= 0.0 && h_r <= 0.0 {
        return NumericalFlux::default();
    }
    if h_l == h_r && u_l == u_r {
        // consistency, exactly
        let (f_h, f_hu) = physical_flux(h_l, u_l, g);
        return NumericalFlux { f_h, f_hu, f_hv: 0.0 };
    }
    let (c1, c2) = hll_speeds(h_l, u_l, h_r, u_r, g);
    let (fl_h, fl_hu) = physical_flux(h_l, u_l, g);
    let (fr_h, fr_hu) = physical_flux(h_r, u_r, g);
    if c1 >= 0.0 {
        NumericalFlux {
            f_h: fl_h,
            f_hu: fl_hu,
            f_hv: 0.0,
        }
    } else if c2 <= 0.0 {
        NumericalFlux {
            f_h: fr_h,
            f_hu: fr_hu,
            f_hv: 0.0,
        }
    } else {
        let inv = 1.0 / (c2 - c1);
        let c12 = c1 * c2;
        NumericalFlux {
            f_h: (c2 * fl_h - c1 * fr_h + c12 * (h_r - h_l)) * inv,
            f_hu: (c2 * fl_hu - c1 * fr_hu + c12 * (h_r * u_r - h_l * u_l)) * inv,
            f_hv: 0.0,
        }
    }
}

/// Contact-speed estimate of the HLLC solver; zero when degenerate.
#[inline]
pub fn hllc_contact_speed(h_l: f64, u_l: f64, h_r: f64, u_r: f64, c1: f64, c2: f64) -> f64 {
    let den = h_r * (u_r - c2) - h_l * (u_l - c1);
    if den == 0.0 || !den.is_finite() {
        return 0.0;
    }
    (c1 * h_r * (u_r - c2) - c2 * h_l * (u_l - c1)) / den
}

/// HLL mass/normal-momentum flux plus an upwinded transverse momentum flux.
#[inline]
pub fn hllc_flux(h_l: f64, u_l: f64, v_l: f64, h_r: f64, u_r: f64, v_r: f64, g: f64) -> NumericalFlux {
    let mut f = hll_flux(h_l, u_l, h_r, u_r, g);
    if v_l == v_r {
        f.f_hv = f.f_h * v_l;
        return f;
    }
    let (c1, c2) = hll_speeds(h_l, u_l, h_r, u_r, g);
    let c_star = hllc_contact_speed(h_l, u_l, h_r, u_r, c1, c2);
    f.f_hv = f.f_h * if c_star >= 0.0 { v_l } else { v_r };
    f
}

/// Momentum corrections `(S_{i+1/2L}, S_{i-1/2R})` for the two sides of an
/// interface: the left cell sees `g/2 (h_minus² - h_l²)`, the right cell
/// sees `g/2 (h_plus² - h_r²)`.
#[inline]
pub fn interface_sources(h_minus: f64, h_plus: f64, h_l: f64, h_r: f64, g: f64) -> (f64, f64) {
    (
        0.5 * g * (h_minus * h_minus - h_l * h_l),
        0.5 * g * (h_plus * h_plus - h_r * h_r),
    )
}

/// Centered topography source of a cell from its own traces.
#[inline]
pub fn centered_source(h_left_trace: f64, h_right_trace: f64, z_left_trace: f64, z_right_trace: f64, g: f64) -> f64 {
    -g * 0.5 * (h_left_trace + h_right_trace) * (z_right_trace - z_left_trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const G: f64 = 9.81;

    #[test]
    fn minmod_branches() {
        assert_eq!(minmod(1.0, 2.0), 1.0);
        assert_eq!(minmod(-2.0, -1.0), -1.0);
        assert_eq!(minmod(1.0, -1.0), 0.0);
        assert_eq!(minmod(0.0, 3.0), 0.0);
    }

    #[test]
    fn muscl_examples() {
        assert_eq!(muscl_reconstruct(1.0, 2.0, 3.0, 1.0), (1.5, 2.5));
        assert_eq!(muscl_reconstruct(2.0, 2.0, 2.0, 1.0), (2.0, 2.0));
        assert_eq!(muscl_reconstruct(1.0, 3.0, 2.0, 1.0), (3.0, 3.0));
        // spacing-independent in undivided form
        assert_eq!(muscl_reconstruct(1.0, 2.0, 3.0, 0.5), (1.5, 2.5));
    }

    #[test]
    fn velocity_reconstruction_examples() {
        assert_eq!(velocity_reconstruct(1.3, 2.0, 1.5, 2.5, 0.0, 1.0), (1.3, 1.3));
        let (um, up) = velocity_reconstruct(1.0, 2.0, 1.5, 2.5, 1.0, 1.0);
        assert_eq!((um, up), (0.375, 1.375));
        assert_eq!(1.5 * um + 2.5 * up, 4.0);
    }

    #[test]
    fn hydrostatic_examples() {
        let s = hydrostatic_reconstruct(0.7, 0.3, 0.4, 0.3, 1.0, -1.0);
        assert_eq!((s.h_l, s.h_r), (0.7, 0.4));
        let s = hydrostatic_reconstruct(2.0, 0.0, 1.0, 1.0, 0.0, 0.0);
        assert_eq!((s.h_l, s.h_r), (1.0, 1.0));
        let s = hydrostatic_reconstruct(0.5, 0.0, 0.0, 2.0, 0.0, 0.0);
        assert_eq!((s.h_l, s.h_r), (0.0, 0.0));
    }

    #[test]
    fn hll_consistency_and_dry() {
        let f = hll_flux(1.0, 0.0, 1.0, 0.0, G);
        assert_eq!((f.f_h, f.f_hu), (0.0, 4.905));
        assert_eq!(hll_flux(0.0, 0.0, 0.0, 0.0, G), NumericalFlux::default());
    }

    #[test]
    fn hll_supersonic_upwinding() {
        // both waves move right: pure left flux
        let f = hll_flux(1.0, 10.0, 0.5, 10.0, G);
        assert_eq!(f.f_h, 10.0);
        let f = hll_flux(1.0, -10.0, 0.5, -10.0, G);
        assert_eq!(f.f_h, -5.0);
    }

    #[test]
    fn hll_dry_bed_closed_form() {
        // hL = 1, uL = 0 against a dry right state: c1 = -c, c2 = c, so the
        // mass flux is c/2 (the exact interface value is 8c/27).
        let c = G.sqrt();
        let f = hll_flux(1.0, 0.0, 0.0, 0.0, G);
        assert_relative_eq!(f.f_h, 0.5 * c, max_relative = 1e-15);
        assert_relative_eq!(f.f_hu, 0.25 * G, max_relative = 1e-15);
    }

    #[test]
    fn hllc_transverse_upwinding() {
        let f = hllc_flux(1.0, 0.5, 3.0, 1.2, 0.5, 3.0, G);
        assert_eq!(f.f_hv, f.f_h * 3.0);
        let f = hllc_flux(1.0, 0.0, 2.0, 1.0, 0.0, 7.0, G);
        assert_eq!((f.f_h, f.f_hv), (0.0, 0.0));
        let f = hllc_flux(1.0, 1.0, 2.0, 1.0, 1.0, 5.0, G);
        assert_eq!(f.f_hv, f.f_h * 2.0);
        let f = hllc_flux(1.0, -1.0, 2.0, 1.0, -1.0, 5.0, G);
        assert_eq!(f.f_hv, f.f_h * 5.0);
    }

    #[test]
    fn contact_speed_of_uniform_flow_is_flow_speed() {
        let (c1, c2) = hll_speeds(1.0, 1.0, 1.0, 1.0, G);
        assert_relative_eq!(hllc_contact_speed(1.0, 1.0, 1.0, 1.0, c1, c2), 1.0, max_relative = 1e-14);
        assert_eq!(hllc_contact_speed(0.0, 0.0, 0.0, 0.0, 0.0, 0.0), 0.0);
    }

    #[test]
    fn source_examples() {
        assert_eq!(interface_sources(1.0, 2.0, 1.0, 2.0, G), (0.0, 0.0));
        let (s_l, _) = interface_sources(2.0, 1.0, 1.0, 1.0, G);
        assert_relative_eq!(s_l, 14.715, max_relative = 1e-15);
        assert_eq!(interface_sources(0.0, 0.0, 0.0, 0.0, G), (0.0, 0.0));
        assert_eq!(centered_source(1.0, 1.0, 0.3, 0.3, G), 0.0);
        assert_relative_eq!(centered_source(1.0, 1.0, 0.0, 0.1, G), -0.981, max_relative = 1e-15);
    }

    /// Interface plus centered contributions of a two-cell lake at rest.
    fn lake_residuals(h1: f64, z1: f64, h2: f64, z2: f64) -> (f64, f64) {
        let s = hydrostatic_reconstruct(h1, z1, h2, z2, 0.0, 0.0);
        let f = hll_flux(s.h_l, 0.0, s.h_r, 0.0, G);
        let (sl, sr) = interface_sources(s.h_minus, s.h_plus, s.h_l, s.h_r, G);
        // cell 1 as if its left face were at rest on its own level
        let left_face_1 = 0.5 * G * h1 * h1;
        let right_face_2 = 0.5 * G * h2 * h2;
        let r1 = -((f.f_hu + sl) - left_face_1);
        let r2 = -(right_face_2 - (f.f_hu + sr));
        assert!(f.f_h.abs() <= 1e-14 * (1.0 + h1 + h2), "{}", f.f_h);
        (r1, r2)
    }

    #[test]
    fn lake_at_rest_across_step_is_balanced() {
        let (r1, r2) = lake_residuals(2.0, 0.0, 1.0, 1.0);
        assert!(r1.abs() < 1e-13 && r2.abs() < 1e-13, "{r1} {r2}");
        let (r1, r2) = lake_residuals(0.5, 0.0, 0.0, 2.0);
        assert!(r1.abs() < 1e-13 && r2 == 0.0, "{r1} {r2}");
    }

    proptest! {
        #[test]
        fn reconstructed_depths_are_nonnegative(
            hm in 0.0f64..10.0, hp in 0.0f64..10.0, zm in -5.0f64..5.0, zp in -5.0f64..5.0,
        ) {
            let s = hydrostatic_reconstruct(hm, zm, hp, zp, 0.0, 0.0);
            prop_assert!(s.h_l >= 0.0 && s.h_r >= 0.0);
            prop_assert!(s.h_l <= hm && s.h_r <= hp);
        }

        #[test]
        fn hll_is_consistent(h in 0.0f64..20.0, u in -10.0f64..10.0) {
            let f = hll_flux(h, u, h, u, G);
            prop_assert_eq!(f.f_h, h * u);
            prop_assert_eq!(f.f_hu, h * u * u + 0.5 * G * h * h);
        }

        #[test]
        fn two_cell_lake_balanced(eta in 0.0f64..5.0, z1 in -3.0f64..3.0, z2 in -3.0f64..3.0) {
            let h1 = (eta - z1).max(0.0);
            let h2 = (eta - z2).max(0.0);
            let (r1, r2) = lake_residuals(h1, eta - h1, h2, eta - h2);
            let scale = 0.5 * G * (h1 * h1 + h2 * h2) + 1.0;
            prop_assert!(r1.abs() <= 4.0 * f64::EPSILON * scale, "{}", r1);
            prop_assert!(r2.abs() <= 4.0 * f64::EPSILON * scale, "{}", r2);
        }

        #[test]
        fn minmod_is_bounded(x in -10.0f64..10.0, y in -10.0f64..10.0) {
            let m = minmod(x, y);
            prop_assert!(m.abs() <= x.abs() && m.abs() <= y.abs());
        }

        #[test]
        fn muscl_creates_no_new_extrema(a in -10.0f64..10.0, b in -10.0f64..10.0, c in -10.0f64..10.0) {
            let (l, r) = muscl_reconstruct(a, b, c, 1.0);
            let lo = a.min(b).min(c);
            let hi = a.max(b).max(c);
            prop_assert!(l >= lo && l <= hi && r >= lo && r <= hi);
        }

        #[test]
        fn discharge_mean_preserved(
            hp in 1e-6f64..10.0, hi in 1e-6f64..10.0, hn in 1e-6f64..10.0,
            u in -5.0f64..5.0, du in -5.0f64..5.0,
        ) {
            let (h_m, h_p) = muscl_reconstruct(hp, hi, hn, 1.0);
            let (u_m, u_p) = velocity_reconstruct(u, hi, h_m, h_p, du, 1.0);
            let lhs = h_m * u_m + h_p * u_p;
            let rhs = 2.0 * hi * u;
            let scale = hi * (u.abs() + du.abs()) + f64::MIN_POSITIVE;
            prop_assert!((lhs - rhs).abs() <= 1e-13 * scale, "{} vs {}", lhs, rhs);
            prop_assert!(u_m.is_finite() && u_p.is_finite());
        }
    }
}
