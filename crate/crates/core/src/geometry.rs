//! Proton-dimer directions of hexagonal ice and their angles to the field.
//!
//! Every oxygen in ice I_h sits at the centre of a regular tetrahedron of
//! O–H···O bonds. One bond is parallel to the crystal c-axis; on sublattice
//! A it points along +c, on sublattice B (the basal-plane mirror of A) along
//! −c. A water molecule occupies two of the four bonds, so its H–H vector is
//! the normalised difference of two tetrahedral unit vectors. Six pairs per
//! sublattice give twelve dimers. The three purely basal pairs coincide
//! between the two sublattices, so the twelve dimers span nine distinct
//! directions, three of them doubly occupied.
//!
//! # Orientation convention
//!
//! The crystal frame has c along z. The three non-axial bonds of sublattice
//! A project onto the basal plane at azimuths
//! [`LATTICE_AZIMUTH_REFERENCE_DEG`] + k·120°.
//!
//! [`CrystalOrientation`] `(α, β)` maps crystal to lab coordinates by
//! `R = R_y(β) · R_z(α)`. α turns the lattice about its own c-axis and β
//! tilts the c-axis towards lab x. The static field lies in the lab x–z
//! plane, [`FIELD_TILT_DEG`] from lab z (see [`field_direction`]), so the
//! c-axis makes an angle `β − 30°` with B₀. With these two references the
//! reference ice orientation (65°, 79°) reproduces the tabulated dimer
//! angles {59.5, 55.4, 65.1, 65.1, 70.7, 70.7, 80, 81.6, 41.3, 41.3, 22, 26}°
//! to within 0.2°.
//!
//! The dimer-angle multiset is invariant under
//! `α → α + 60°`, `α → 2·(−LATTICE_AZIMUTH_REFERENCE_DEG) − α`,
//! `β → 2·FIELD_TILT_DEG − β` and `β → β + 180°`; see
//! [`CrystalOrientation::equivalents`].

use nalgebra::{Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Azimuth (degrees) of the first basal bond projection of sublattice A in
/// the crystal frame.
pub const LATTICE_AZIMUTH_REFERENCE_DEG: f64 = -31.0;

/// Polar angle (degrees) of B₀ from lab z, measured towards lab +x.
pub const FIELD_TILT_DEG: f64 = 30.0;

/// Total number of proton dimers per oxygen pair of sublattices.
pub const DIMER_COUNT: usize = 12;

const MERGE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sublattice {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    Crystal,
    Lab,
}

/// Unit vector of the static field in the lab frame.
pub fn field_direction() -> Vec3 {
    let t = FIELD_TILT_DEG.to_radians();
    Vec3::new(t.sin(), 0.0, t.cos())
}

/// The four O–H bond directions around an oxygen of the given sublattice.
pub fn tetrahedral_directions(sublattice: Sublattice) -> [Vec3; 4] {
    // cos(109.47°) = −1/3
    let polar_sin = (8.0f64).sqrt() / 3.0;
    let base = LATTICE_AZIMUTH_REFERENCE_DEG.to_radians();
    let mut dirs = [Vec3::z(); 4];
    for (k, d) in dirs.iter_mut().enumerate().skip(1) {
        let phi = base + (k as f64 - 1.0) * 2.0 * std::f64::consts::FRAC_PI_3;
        *d = Vec3::new(polar_sin * phi.cos(), polar_sin * phi.sin(), -1.0 / 3.0);
    }
    if sublattice == Sublattice::B {
        for d in dirs.iter_mut() {
            d.z = -d.z;
        }
    }
    dirs
}

/// Proton-dimer directions with antipodal duplicates merged.
#[derive(Debug, Clone, PartialEq)]
pub struct DimerSet {
    directions: Vec<Vec3>,
    multiplicities: Vec<u32>,
    frame: Frame,
}

impl DimerSet {
    /// Builds a set from raw directions, normalising each and merging
    /// directions that agree up to sign.
    pub fn from_directions<I>(dirs: I, frame: Frame) -> Result<Self>
    where
        I: IntoIterator<Item = Vec3>,
    {
        let mut set = DimerSet {
            directions: Vec::new(),
            multiplicities: Vec::new(),
            frame,
        };
        for d in dirs {
            let n = d.norm();
            if !(n > 0.0 && n.is_finite()) {
                return Err(Error::domain("dimer direction must be a finite non-zero vector"));
            }
            set.push(canonical_sign(d / n), 1);
        }
        Ok(set)
    }

    fn push(&mut self, d: Vec3, mult: u32) {
        match self
            .directions
            .iter()
            .position(|e| (e - d).norm() < MERGE_TOL || (e + d).norm() < MERGE_TOL)
        {
            Some(i) => self.multiplicities[i] += mult,
            None => {
                self.directions.push(d);
                self.multiplicities.push(mult);
            }
        }
    }

    pub fn directions(&self) -> &[Vec3] {
        &self.directions
    }

    pub fn multiplicities(&self) -> &[u32] {
        &self.multiplicities
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    /// Number of dimers counted with multiplicity.
    pub fn len(&self) -> usize {
        self.multiplicities.iter().map(|&m| m as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn distinct_len(&self) -> usize {
        self.directions.len()
    }

    /// One direction per dimer, repeating merged entries by multiplicity.
    pub fn expanded(&self) -> Vec<Vec3> {
        self.directions
            .iter()
            .zip(&self.multiplicities)
            .flat_map(|(d, &m)| std::iter::repeat_n(*d, m as usize))
            .collect()
    }

    /// Applies an arbitrary rotation, keeping the frame tag.
    pub fn rotated(&self, rot: &Rotation3<f64>) -> Self {
        DimerSet {
            directions: self.directions.iter().map(|d| rot * d).collect(),
            multiplicities: self.multiplicities.clone(),
            frame: self.frame,
        }
    }
}

fn canonical_sign(d: Vec3) -> Vec3 {
    let lead = [d.z, d.y, d.x]
        .into_iter()
        .find(|c| c.abs() > MERGE_TOL)
        .unwrap_or(0.0);
    if lead < 0.0 {
        -d
    } else {
        d
    }
}

/// The twelve H–H directions of ice I_h in the crystal frame.
pub fn dimer_orientations() -> DimerSet {
    let mut set = DimerSet {
        directions: Vec::with_capacity(9),
        multiplicities: Vec::with_capacity(9),
        frame: Frame::Crystal,
    };
    for sub in [Sublattice::A, Sublattice::B] {
        let t = tetrahedral_directions(sub);
        for i in 0..4 {
            for j in (i + 1)..4 {
                set.push(canonical_sign((t[i] - t[j]).normalize()), 1);
            }
        }
    }
    set
}

/// Crystal orientation `(α, β)` in degrees. See the module docs for the
/// convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrystalOrientation {
    pub alpha: f64,
    pub beta: f64,
}

impl CrystalOrientation {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::domain("orientation angles must be finite"));
        }
        Ok(CrystalOrientation { alpha, beta })
    }

    /// Crystal-to-lab rotation.
    pub fn rotation(&self) -> Rotation3<f64> {
        Rotation3::from_axis_angle(&Vec3::y_axis(), self.beta.to_radians())
            * Rotation3::from_axis_angle(&Vec3::z_axis(), self.alpha.to_radians())
    }

    /// Angle between the crystal c-axis and B₀, folded to [0°, 90°].
    pub fn c_axis_tilt(&self) -> f64 {
        let c = self.rotation() * Vec3::z();
        c.dot(&field_direction()).abs().min(1.0).acos().to_degrees()
    }

    /// α reduced to [0°, 120°) and β to [0°, 180°).
    pub fn normalized(&self) -> Self {
        CrystalOrientation {
            alpha: self.alpha.rem_euclid(120.0),
            beta: self.beta.rem_euclid(180.0),
        }
    }

    /// All lattice-symmetry images producing the same dimer-angle multiset,
    /// reduced to α ∈ [0°, 120°), β ∈ [0°, 180°). Includes `self.normalized()`.
    pub fn equivalents(&self) -> Vec<CrystalOrientation> {
        let alpha_mirror = -2.0 * LATTICE_AZIMUTH_REFERENCE_DEG;
        let beta_mirror = 2.0 * FIELD_TILT_DEG;
        let mut out: Vec<CrystalOrientation> = Vec::with_capacity(8);
        for a in [self.alpha, alpha_mirror - self.alpha] {
            for shift in [0.0, 60.0] {
                for b in [self.beta, beta_mirror - self.beta] {
                    let cand = CrystalOrientation {
                        alpha: a + shift,
                        beta: b,
                    }
                    .normalized();
                    if !out.iter().any(|o| {
                        circular_gap(o.alpha, cand.alpha, 120.0) < 1e-9
                            && circular_gap(o.beta, cand.beta, 180.0) < 1e-9
                    }) {
                        out.push(cand);
                    }
                }
            }
        }
        out.sort_by(|x, y| {
            x.alpha
                .total_cmp(&y.alpha)
                .then_with(|| x.beta.total_cmp(&y.beta))
        });
        out
    }

    /// The symmetry image inside α ∈ [61°, 91°], β ∈ [30°, 120°], a
    /// fundamental domain of the lattice symmetry that contains the
    /// reference optimum (65°, 79°).
    pub fn canonical(&self) -> Self {
        // α mirror lines sit at −ref + 30°·k; the domain starts at k = 1
        let lo = -LATTICE_AZIMUTH_REFERENCE_DEG + 30.0;
        let u = (self.alpha - lo).rem_euclid(60.0);
        let u = if u > 30.0 { 60.0 - u } else { u };
        let v = (self.beta - FIELD_TILT_DEG).rem_euclid(180.0);
        let v = if v > 90.0 { 180.0 - v } else { v };
        CrystalOrientation {
            alpha: lo + u,
            beta: FIELD_TILT_DEG + v,
        }
    }

    /// Largest per-angle deviation (degrees) from `other`, minimised over the
    /// lattice symmetry images of `self`.
    pub fn distance_up_to_symmetry(&self, other: &CrystalOrientation) -> f64 {
        let alpha_mirror = -2.0 * LATTICE_AZIMUTH_REFERENCE_DEG;
        let beta_mirror = 2.0 * FIELD_TILT_DEG;
        let da = [self.alpha, alpha_mirror - self.alpha]
            .into_iter()
            .map(|a| circular_gap(a, other.alpha, 60.0))
            .fold(f64::INFINITY, f64::min);
        let db = [self.beta, beta_mirror - self.beta]
            .into_iter()
            .map(|b| circular_gap(b, other.beta, 180.0))
            .fold(f64::INFINITY, f64::min);
        da.max(db)
    }
}

fn circular_gap(a: f64, b: f64, period: f64) -> f64 {
    let d = (a - b).rem_euclid(period);
    d.min(period - d)
}

/// Rotates a crystal-frame dimer set into the lab frame.
pub fn orient(dimers: &DimerSet, o: &CrystalOrientation) -> Result<DimerSet> {
    if dimers.frame != Frame::Crystal {
        return Err(Error::precondition("dimer set is already in the lab frame"));
    }
    let mut out = dimers.rotated(&o.rotation());
    out.frame = Frame::Lab;
    Ok(out)
}

/// Angles θ_i (degrees, folded to [0°, 90°]) between each dimer and `b0`,
/// one entry per dimer counted with multiplicity.
pub fn angles_to_field(dimers: &DimerSet, b0: &Vec3) -> Result<Vec<f64>> {
    if dimers.frame != Frame::Lab {
        return Err(Error::precondition("angles_to_field expects a lab-frame dimer set"));
    }
    let n = b0.norm();
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::domain("field direction must be a finite non-zero vector"));
    }
    let b = b0 / n;
    Ok(dimers
        .expanded()
        .iter()
        .map(|d| d.dot(&b).abs().min(1.0).acos().to_degrees())
        .collect())
}

/// θ_i of all twelve ice dimers for the given orientation and the default
/// field direction.
pub fn dimer_angles(o: &CrystalOrientation) -> Vec<f64> {
    let rot = o.rotation();
    let b = field_direction();
    let crystal = dimer_orientations();
    crystal
        .expanded()
        .iter()
        .map(|d| (rot * d).dot(&b).abs().min(1.0).acos().to_degrees())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sublattice_a_has_bond_along_c() {
        let t = tetrahedral_directions(Sublattice::A);
        assert!(t.iter().any(|d| (d - Vec3::z()).norm() < 1e-12));
        let b = tetrahedral_directions(Sublattice::B);
        assert!(b.iter().any(|d| (d + Vec3::z()).norm() < 1e-12));
    }

    #[test]
    fn tetrahedra_are_regular() {
        for sub in [Sublattice::A, Sublattice::B] {
            let t = tetrahedral_directions(sub);
            for i in 0..4 {
                assert_abs_diff_eq!(t[i].norm(), 1.0, epsilon = 1e-12);
                for j in (i + 1)..4 {
                    assert_abs_diff_eq!(t[i].dot(&t[j]), -1.0 / 3.0, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn sublattice_b_mirrors_a() {
        let a = tetrahedral_directions(Sublattice::A);
        let b = tetrahedral_directions(Sublattice::B);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.x, y.x);
            assert_eq!(x.y, y.y);
            assert_eq!(x.z, -y.z);
        }
    }

    #[test]
    fn twelve_dimers_nine_directions() {
        let set = dimer_orientations();
        assert_eq!(set.len(), DIMER_COUNT);
        assert_eq!(set.distinct_len(), 9);
        assert_eq!(set.expanded().len(), DIMER_COUNT);
        for d in set.directions() {
            assert_abs_diff_eq!(d.norm(), 1.0, epsilon = 1e-12);
        }
        // only the basal pairs are shared between sublattices
        for (d, &m) in set.directions().iter().zip(set.multiplicities()) {
            if m == 2 {
                assert!(d.z.abs() < 1e-12);
            } else {
                assert_eq!(m, 1);
            }
        }
    }

    #[test]
    fn no_antipodal_duplicates() {
        let set = dimer_orientations();
        let dirs = set.directions();
        for i in 0..dirs.len() {
            for j in (i + 1)..dirs.len() {
                assert!((dirs[i] - dirs[j]).norm() > 1e-6);
                assert!((dirs[i] + dirs[j]).norm() > 1e-6);
            }
        }
    }

    fn contains_up_to_sign(set: &DimerSet, v: &Vec3) -> Option<u32> {
        set.directions()
            .iter()
            .zip(set.multiplicities())
            .find(|(d, _)| (*d - v).norm() < 1e-9 || (*d + v).norm() < 1e-9)
            .map(|(_, &m)| m)
    }

    #[test]
    fn closed_under_hexagonal_symmetry() {
        let set = dimer_orientations();
        let c6 = Rotation3::from_axis_angle(&Vec3::z_axis(), std::f64::consts::FRAC_PI_3);
        let ops: [Box<dyn Fn(&Vec3) -> Vec3>; 3] = [
            Box::new(move |v| c6 * v),
            Box::new(|v| Vec3::new(v.x, v.y, -v.z)),
            Box::new(move |v| {
                let r = c6 * v;
                Vec3::new(r.x, r.y, -r.z)
            }),
        ];
        for op in &ops {
            for (d, &m) in set.directions().iter().zip(set.multiplicities()) {
                assert_eq!(contains_up_to_sign(&set, &op(d)), Some(m));
            }
        }
    }

    #[test]
    fn identity_orientation() {
        let set = dimer_orientations();
        let o = CrystalOrientation::new(0.0, 0.0).unwrap();
        let lab = orient(&set, &o).unwrap();
        for (a, b) in set.directions().iter().zip(lab.directions()) {
            assert!((a - b).norm() < 1e-15);
        }
        assert_eq!(lab.frame(), Frame::Lab);
    }

    #[test]
    fn orient_rejects_lab_frame() {
        let o = CrystalOrientation::new(10.0, 20.0).unwrap();
        let lab = orient(&dimer_orientations(), &o).unwrap();
        assert!(matches!(orient(&lab, &o), Err(Error::Precondition(_))));
    }

    #[test]
    fn angles_limits() {
        let z = DimerSet::from_directions([Vec3::z()], Frame::Lab).unwrap();
        assert_abs_diff_eq!(angles_to_field(&z, &Vec3::z()).unwrap()[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(angles_to_field(&z, &Vec3::x()).unwrap()[0], 90.0, epsilon = 1e-12);
        let down = DimerSet::from_directions([-Vec3::z()], Frame::Lab).unwrap();
        assert_abs_diff_eq!(angles_to_field(&down, &Vec3::z()).unwrap()[0], 0.0, epsilon = 1e-12);
        assert!(angles_to_field(&z, &Vec3::zeros()).is_err());
    }

    #[test]
    fn reference_orientation_matches_table() {
        let table = [59.5, 55.4, 65.1, 65.1, 70.7, 70.7, 80.0, 81.6, 41.3, 41.3, 22.0, 26.0];
        let o = CrystalOrientation::new(65.0, 79.0).unwrap();
        let mut got = dimer_angles(&o);
        let mut want = table.to_vec();
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 0.25, "{g} vs {w}");
        }
        assert_abs_diff_eq!(o.c_axis_tilt(), 49.0, epsilon = 1e-9);
    }

    #[test]
    fn equivalents_share_angles() {
        let o = CrystalOrientation::new(17.0, 71.0).unwrap();
        let mut base = dimer_angles(&o);
        base.sort_by(f64::total_cmp);
        let eq = o.equivalents();
        assert_eq!(eq.len(), 8);
        for e in eq {
            let mut a = dimer_angles(&e);
            a.sort_by(f64::total_cmp);
            for (x, y) in a.iter().zip(&base) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-9);
            }
            assert!(o.distance_up_to_symmetry(&e) < 1e-9);
        }
    }

    #[test]
    fn non_equivalent_orientation_differs() {
        let o = CrystalOrientation::new(65.0, 79.0).unwrap();
        let p = CrystalOrientation::new(65.0, 90.0).unwrap();
        assert!((o.distance_up_to_symmetry(&p) - 11.0).abs() < 1e-9);
    }

    #[test]
    fn canonical_image_is_unique() {
        let o = CrystalOrientation::new(65.0, 79.0).unwrap();
        for e in o.equivalents() {
            let c = e.canonical();
            assert_abs_diff_eq!(c.alpha, 65.0, epsilon = 1e-9);
            assert_abs_diff_eq!(c.beta, 79.0, epsilon = 1e-9);
        }
        let odd = CrystalOrientation::new(-200.0, 400.0).unwrap();
        let c = odd.canonical();
        assert!((61.0..=91.0).contains(&c.alpha) && (30.0..=120.0).contains(&c.beta));
        assert!(odd.distance_up_to_symmetry(&c) < 1e-9);
    }
}
