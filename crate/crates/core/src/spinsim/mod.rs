//! Exact simulation of an NV electron spin coupled to a few nuclear spins.
//!
//! The full Hamiltonian is H = H_NV + H_hf + H_nuc with
//!
//! * H_NV = D·S_z² + γ_e·B·S,
//! * H_hf = S_z·Σ_m (A^zz_m I^z_m + A^zx_m I^x_m),
//! * H_nuc = Σ_m γ_m B·I_m + Σ_{m<n} I_m·𝔇_mn·I_n.
//!
//! Matrices are in kHz (cyclic). Evolution over t seconds is
//! exp(−i·2π·H·10³·t), computed from one Hermitian eigendecomposition per
//! Hamiltonian.
//!
//! Pulse sequences run in the rotating frame of the NV |0⟩ ↔ |−1⟩
//! transition: H_NV drops out because it commutes with everything else when
//! B₀ is along the NV axis, and microwave pulses are ideal instantaneous
//! rotations inside that two-level subspace.

mod ops;
mod oracle;
mod sequence;

use nalgebra::{DVector, Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::dipolar::PhysicalConstants;
use crate::error::{Error, Result};
use crate::geometry::Vec3;

pub use ops::{embed, kron, spin_matrix, trace, trace_product, CMatrix, Component, C64};
pub use oracle::{measure_hetero_prefactor, oracle_grid, OracleCell, OracleOptions};
pub use sequence::{
    correlation_response, xy8_response, PulseAxis, PulseSequence, SequenceElement,
    SequenceOptions,
};

/// Largest Hilbert space the simulator accepts.
pub const MAX_DIMENSION: usize = 486;

/// Zero-field splitting of the NV ground state (MHz).
pub const NV_ZERO_FIELD_SPLITTING_MHZ: f64 = 2870.0;

/// Electron gyromagnetic ratio (kHz/G).
pub const ELECTRON_GAMMA_KHZ_PER_GAUSS: f64 = 2800.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Species {
    Nv,
    H,
    D,
}

impl Species {
    pub fn multiplicity(self) -> usize {
        match self {
            Species::H => 2,
            Species::Nv | Species::D => 3,
        }
    }

    pub fn spin(self) -> f64 {
        (self.multiplicity() as f64 - 1.0) / 2.0
    }

    fn gamma(self, consts: &PhysicalConstants) -> f64 {
        match self {
            Species::Nv => ELECTRON_GAMMA_KHZ_PER_GAUSS,
            Species::H => consts.gamma_h,
            Species::D => consts.gamma_d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NvCenter {
    pub zfs_mhz: f64,
}

impl Default for NvCenter {
    fn default() -> Self {
        NvCenter {
            zfs_mhz: NV_ZERO_FIELD_SPLITTING_MHZ,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nucleus {
    pub species: Species,
    /// Secular hyperfine component A^zz (kHz).
    pub a_zz: f64,
    /// Pseudo-secular hyperfine component A^zx (kHz).
    pub a_zx: f64,
}

impl Nucleus {
    pub fn new(species: Species) -> Self {
        Nucleus { species, a_zz: 0.0, a_zx: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DipolarForm {
    /// Truncated to terms commuting with the Zeeman interaction.
    Secular,
    /// Full dipole tensor δ·[I·J − 3(I·n)(J·n)].
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Coupling {
    /// Explicit symmetric tensor (kHz): H = I_m·T·I_n.
    Tensor([[f64; 3]; 3]),
    /// Point-dipole coupling of strength δ (kHz) along a bond at `theta_deg`
    /// from B₀.
    Dipolar {
        delta: f64,
        theta_deg: f64,
        form: DipolarForm,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipolarPair {
    pub i: usize,
    pub j: usize,
    pub coupling: Coupling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinSystem {
    pub nv: Option<NvCenter>,
    pub nuclei: Vec<Nucleus>,
    pub field_gauss: f64,
    /// B₀ direction in the NV frame (NV axis along z).
    pub field_direction: Vec3,
    pub pairs: Vec<DipolarPair>,
    pub constants: PhysicalConstants,
}

impl SpinSystem {
    /// Nuclear-only system in a field along z.
    pub fn new(field_gauss: f64) -> Self {
        SpinSystem {
            nv: None,
            nuclei: Vec::new(),
            field_gauss,
            field_direction: Vec3::z(),
            pairs: Vec::new(),
            constants: PhysicalConstants::default(),
        }
    }

    pub fn with_nv(mut self) -> Self {
        self.nv = Some(NvCenter::default());
        self
    }

    pub fn with_nucleus(mut self, n: Nucleus) -> Self {
        self.nuclei.push(n);
        self
    }

    pub fn with_coupling(mut self, i: usize, j: usize, coupling: Coupling) -> Self {
        self.pairs.push(DipolarPair { i, j, coupling });
        self
    }

    /// Per-site dimensions, NV first when present.
    pub fn dims(&self) -> Vec<usize> {
        self.nv
            .iter()
            .map(|_| Species::Nv.multiplicity())
            .chain(self.nuclei.iter().map(|n| n.species.multiplicity()))
            .collect()
    }

    pub fn dimension(&self) -> usize {
        self.dims().iter().product()
    }

    fn nucleus_site(&self, m: usize) -> usize {
        m + usize::from(self.nv.is_some())
    }

    /// The same system with the NV removed.
    pub fn nuclear_part(&self) -> SpinSystem {
        SpinSystem {
            nv: None,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.field_gauss > 0.0 && self.field_gauss.is_finite()) {
            return Err(Error::domain("field magnitude must be positive"));
        }
        if !(self.field_direction.norm() > 0.0) {
            return Err(Error::domain("field direction must be non-zero"));
        }
        if self.nuclei.iter().any(|n| n.species == Species::Nv) {
            return Err(Error::domain("the NV spin is configured through `nv`, not as a nucleus"));
        }
        let dim = self.dimension();
        if dim > MAX_DIMENSION {
            return Err(Error::DimensionCap { dim, cap: MAX_DIMENSION });
        }
        for p in &self.pairs {
            if p.i == p.j || p.i >= self.nuclei.len() || p.j >= self.nuclei.len() {
                return Err(Error::domain(format!("invalid coupling pair ({}, {})", p.i, p.j)));
            }
            if let Coupling::Tensor(t) = p.coupling {
                for a in 0..3 {
                    for b in 0..3 {
                        if (t[a][b] - t[b][a]).abs() > 1e-12 * (1.0 + t[a][b].abs()) {
                            return Err(Error::domain("coupling tensor must be symmetric"));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn unit_field(&self) -> Vec3 {
        self.field_direction.normalize()
    }

    /// Unit vector perpendicular to B₀, used for transverse observables and
    /// for laying out (δ, θ) bonds.
    pub fn transverse_direction(&self) -> Vec3 {
        let b = self.unit_field();
        let trial = if b.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        (trial - b * b.dot(&trial)).normalize()
    }

    pub fn larmor(&self, species: Species) -> f64 {
        species.gamma(&self.constants) * self.field_gauss
    }
}

struct Operators {
    dims: Vec<usize>,
}

impl Operators {
    fn site(&self, site: usize, c: Component) -> CMatrix {
        embed(&spin_matrix(self.dims[site], c), site, &self.dims)
    }

    fn vector(&self, site: usize) -> [CMatrix; 3] {
        [
            self.site(site, Component::X),
            self.site(site, Component::Y),
            self.site(site, Component::Z),
        ]
    }

    fn along(&self, site: usize, dir: &Vec3) -> CMatrix {
        let [x, y, z] = self.vector(site);
        x * c(dir.x) + y * c(dir.y) + z * c(dir.z)
    }
}

#[inline]
fn c(v: f64) -> C64 {
    C64::new(v, 0.0)
}

fn bilinear(a: &[CMatrix; 3], t: &Matrix3<f64>, b: &[CMatrix; 3]) -> CMatrix {
    let n = a[0].nrows();
    let mut out = CMatrix::zeros(n, n);
    for p in 0..3 {
        for q in 0..3 {
            if t[(p, q)] != 0.0 {
                out += (&a[p] * &b[q]) * c(t[(p, q)]);
            }
        }
    }
    out
}

fn coupling_tensor(sys: &SpinSystem, pair: &DipolarPair) -> Matrix3<f64> {
    match pair.coupling {
        Coupling::Tensor(t) => Matrix3::from_fn(|r, col| t[r][col]),
        Coupling::Dipolar { delta, theta_deg, form } => {
            let b = sys.unit_field();
            let th = theta_deg.to_radians();
            match form {
                DipolarForm::Full => {
                    let n = b * th.cos() + sys.transverse_direction() * th.sin();
                    (Matrix3::identity() - n * n.transpose() * 3.0) * delta
                }
                DipolarForm::Secular => {
                    let scale = delta * (1.0 - 3.0 * th.cos().powi(2));
                    let bb = b * b.transpose();
                    let like = sys.nuclei[pair.i].species == sys.nuclei[pair.j].species;
                    if like {
                        // δ(1−3cos²θ)(3 I_b J_b − I·J)/2
                        (bb * 3.0 - Matrix3::identity()) * (scale / 2.0)
                    } else {
                        bb * scale
                    }
                }
            }
        }
    }
}

/// Full lab-frame Hamiltonian (kHz).
pub fn build_hamiltonian(sys: &SpinSystem) -> Result<CMatrix> {
    assemble(sys, true)
}

/// Hamiltonian in the NV rotating frame: H_NV dropped, hyperfine kept.
pub fn rotating_frame_hamiltonian(sys: &SpinSystem) -> Result<CMatrix> {
    assemble(sys, false)
}

fn assemble(sys: &SpinSystem, include_nv: bool) -> Result<CMatrix> {
    sys.validate()?;
    let ops = Operators { dims: sys.dims() };
    let n = sys.dimension();
    let b = sys.unit_field();
    let mut h = CMatrix::zeros(n, n);

    if let Some(nv) = sys.nv {
        let sz = ops.site(0, Component::Z);
        if include_nv {
            h += (&sz * &sz) * c(nv.zfs_mhz * 1e3);
            h += ops.along(0, &b) * c(ELECTRON_GAMMA_KHZ_PER_GAUSS * sys.field_gauss);
        }
        for (m, nuc) in sys.nuclei.iter().enumerate() {
            let site = sys.nucleus_site(m);
            let local = ops.site(site, Component::Z) * c(nuc.a_zz)
                + ops.site(site, Component::X) * c(nuc.a_zx);
            h += &sz * local;
        }
    }

    for (m, nuc) in sys.nuclei.iter().enumerate() {
        let gamma = nuc.species.gamma(&sys.constants);
        h += ops.along(sys.nucleus_site(m), &b) * c(gamma * sys.field_gauss);
    }

    for pair in &sys.pairs {
        let t = coupling_tensor(sys, pair);
        let a = ops.vector(sys.nucleus_site(pair.i));
        let bv = ops.vector(sys.nucleus_site(pair.j));
        h += bilinear(&a, &t, &bv);
    }
    Ok(h)
}

/// Eigendecomposition of a time-independent Hamiltonian, reused for any
/// evolution time.
#[derive(Debug, Clone)]
pub struct Propagator {
    /// Eigenvalues (kHz), ascending.
    pub energies: DVector<f64>,
    pub vectors: CMatrix,
}

impl Propagator {
    pub fn new(h: &CMatrix) -> Self {
        let eig = SymmetricEigen::new(h.clone());
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let energies = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
        let vectors = CMatrix::from_fn(h.nrows(), order.len(), |r, k| eig.eigenvectors[(r, order[k])]);
        Propagator { energies, vectors }
    }

    /// exp(−i·2π·H·10³·t) for `t` in seconds.
    pub fn unitary(&self, t: f64) -> CMatrix {
        let phases = self.phases(t);
        let mut scaled = self.vectors.clone();
        for (k, ph) in phases.iter().enumerate() {
            for v in scaled.column_mut(k).iter_mut() {
                *v *= *ph;
            }
        }
        &scaled * self.vectors.adjoint()
    }

    fn phases(&self, t: f64) -> Vec<C64> {
        self.energies
            .iter()
            .map(|e| C64::from_polar(1.0, -2.0 * std::f64::consts::PI * e * 1e3 * t))
            .collect()
    }

    /// Transforms an operator into the eigenbasis.
    pub fn to_eigenbasis(&self, op: &CMatrix) -> CMatrix {
        self.vectors.adjoint() * op * &self.vectors
    }
}

/// Uniformly sampled real signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    /// Sample interval (s).
    pub dt: f64,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::domain(format!("sample interval must be positive, got {dt}")));
        }
        if values.len() < 2 {
            return Err(Error::precondition("a time series needs at least two samples"));
        }
        Ok(TimeSeries { dt, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |i| i as f64 * self.dt)
    }

    /// Sampling rate in kHz.
    pub fn sample_rate_khz(&self) -> f64 {
        1e-3 / self.dt
    }
}

/// A spectral line of the free-induction decay: frequency (kHz, ≥ 0) and
/// relative weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidLine {
    pub frequency: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fid {
    pub series: TimeSeries,
    /// Set when a line with non-negligible weight lies above the Nyquist
    /// frequency of the sampling.
    pub undersampled: bool,
}

fn transverse_magnetization(sys: &SpinSystem) -> CMatrix {
    let ops = Operators { dims: sys.dims() };
    let perp = sys.transverse_direction();
    let n = sys.dimension();
    let mut m = CMatrix::zeros(n, n);
    for (k, nuc) in sys.nuclei.iter().enumerate() {
        let gamma = nuc.species.gamma(&sys.constants);
        m += ops.along(sys.nucleus_site(k), &perp) * c(gamma);
    }
    m
}

/// Exact transitions contributing to the FID of the nuclear part of `sys`,
/// starting from transverse magnetisation. Weights sum to 1; lines closer
/// than 1e-9 kHz are merged.
pub fn fid_lines(sys: &SpinSystem) -> Result<Vec<FidLine>> {
    let nuc = sys.nuclear_part();
    if nuc.nuclei.is_empty() {
        return Err(Error::precondition("FID needs at least one nucleus"));
    }
    let h = build_hamiltonian(&nuc)?;
    let prop = Propagator::new(&h);
    let m = prop.to_eigenbasis(&transverse_magnetization(&nuc));
    let norm: f64 = m.iter().map(|v| v.norm_sqr()).sum();
    let n = m.nrows();
    let mut raw: Vec<(f64, f64)> = Vec::new();
    for j in 0..n {
        for k in 0..n {
            let w = m[(j, k)].norm_sqr() / norm;
            if w > 0.0 {
                raw.push(((prop.energies[j] - prop.energies[k]).abs(), w));
            }
        }
    }
    raw.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut lines: Vec<FidLine> = Vec::new();
    for (f, w) in raw {
        match lines.last_mut() {
            Some(last) if (f - last.frequency).abs() < 1e-9 => last.weight += w,
            _ => lines.push(FidLine { frequency: f, weight: w }),
        }
    }
    Ok(lines)
}

/// Free-induction decay s(t) = Tr(ρ(t)·M)/Tr(M²) with ρ(0) = M the
/// γ-weighted transverse magnetisation. Any NV in `sys` is ignored.
pub fn fid(sys: &SpinSystem, duration: f64, dt: f64) -> Result<Fid> {
    if !(duration > 0.0) || !(dt > 0.0) {
        return Err(Error::domain("duration and dt must be positive"));
    }
    let lines = fid_lines(sys)?;
    let n = (duration / dt).floor() as usize + 1;
    let values = (0..n)
        .map(|i| {
            let t = i as f64 * dt;
            lines
                .iter()
                .map(|l| l.weight * (2.0 * std::f64::consts::PI * l.frequency * 1e3 * t).cos())
                .sum()
        })
        .collect();
    let nyquist_khz = 0.5e-3 / dt;
    let undersampled = lines
        .iter()
        .any(|l| l.weight > 1e-9 && l.frequency > nyquist_khz);
    Ok(Fid {
        series: TimeSeries::new(dt, values)?,
        undersampled,
    })
}
