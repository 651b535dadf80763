//! Geometry, physical parameters and the dipolar coupling law.

use std::fmt;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::RB87_MASS;

/// Theoretical `C3` of the 62D3/2 / 63P1/2 pair along the quantization axis, MHz um^3.
pub const C3_THEORY: f64 = 7965.0;

/// Lifetime of the up state, us.
pub const LIFETIME_UP: f64 = 101.0;
/// Lifetime of the down state, us.
pub const LIFETIME_DOWN: f64 = 135.0;

/// Distances below this are treated as coincident atoms, um.
const MIN_SEPARATION: f64 = 1e-9;

/// `C3(theta) = c3_tilde * (1 - 3 cos^2 theta)`.
pub fn angular_c3(c3_tilde: f64, theta: f64) -> f64 {
    let c = theta.cos();
    c3_tilde * (1.0 - 3.0 * c * c)
}

/// Which pairs of the chain interact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeMode {
    /// Every pair, `C3 / R_ij^3`.
    #[default]
    Full,
    /// Only neighbours in input order, `|i - j| = 1`.
    NearestNeighbor,
}

impl RangeMode {
    #[inline]
    pub fn includes(self, i: usize, j: usize) -> bool {
        match self {
            RangeMode::Full => i != j,
            RangeMode::NearestNeighbor => i.abs_diff(j) == 1,
        }
    }
}

impl fmt::Display for RangeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RangeMode::Full => f.write_str("full"),
            RangeMode::NearestNeighbor => f.write_str("nearest_neighbor"),
        }
    }
}

/// Rest positions of the atoms and the quantization axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainGeometry {
    positions: Vec<Vector3<f64>>,
    quantization_axis: Vector3<f64>,
}

impl ChainGeometry {
    /// Builds a geometry; the axis is normalised. Coincident atoms are
    /// reported by [`validate`], not rejected here.
    pub fn new(positions: Vec<Vector3<f64>>, quantization_axis: Vector3<f64>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Config("geometry needs at least one atom".into()));
        }
        let norm = quantization_axis.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Config("quantization axis must be a non-zero vector".into()));
        }
        Ok(Self {
            positions,
            quantization_axis: quantization_axis / norm,
        })
    }

    /// `n` atoms spaced by `spacing` along the quantization axis (z).
    pub fn linear(n: usize, spacing: f64) -> Result<Self> {
        let positions = (0..n)
            .map(|i| Vector3::new(0.0, 0.0, i as f64 * spacing))
            .collect();
        Self::new(positions, Vector3::z())
    }

    /// Explicit positions along z, e.g. a chain with irregular spacings.
    pub fn from_z(zs: &[f64]) -> Result<Self> {
        Self::new(zs.iter().map(|&z| Vector3::new(0.0, 0.0, z)).collect(), Vector3::z())
    }

    pub fn n_atoms(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[Vector3<f64>] {
        &self.positions
    }

    pub fn quantization_axis(&self) -> &Vector3<f64> {
        &self.quantization_axis
    }

    /// Rest-position distance between atoms `i` and `j`.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        (self.positions[i] - self.positions[j]).norm()
    }

    /// Uniform dilation of every position by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            positions: self.positions.iter().map(|p| p * s).collect(),
            quantization_axis: self.quantization_axis,
        }
    }
}

/// A per-atom quantity: either one value for every atom or a list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerAtom {
    Uniform(f64),
    Each(Vec<f64>),
}

impl PerAtom {
    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        match self {
            PerAtom::Uniform(v) => *v,
            PerAtom::Each(v) => v[i],
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            PerAtom::Uniform(v) => vec![*v],
            PerAtom::Each(v) => v.clone(),
        }
    }

    pub fn len_matches(&self, n: usize) -> bool {
        match self {
            PerAtom::Uniform(_) => true,
            PerAtom::Each(v) => v.len() == n,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values().iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl From<f64> for PerAtom {
    fn from(v: f64) -> Self {
        PerAtom::Uniform(v)
    }
}

/// Physical parameters, in the units of [`crate::units`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicalParams {
    /// Effective `C3` along the chain axis, MHz um^3. Its sign does not
    /// affect single-excitation populations.
    pub c3: f64,
    /// Angular-law prefactor. When set, each pair uses
    /// `angular_c3(c3_tilde, theta_ij)` instead of `c3`.
    pub c3_tilde: Option<f64>,
    /// Optical (two-photon) Rabi frequency per atom, MHz.
    pub omega_opt: PerAtom,
    /// Optical detuning per atom, MHz.
    pub delta_opt: PerAtom,
    /// Microwave Rabi frequency, MHz. Uniform over the array.
    pub omega_mw: f64,
    /// Effective damping of the ground-Rydberg transition during optical
    /// pulses, per atom, 1/us.
    pub gamma_eff: PerAtom,
    /// Decay rate of the up state to the ground state, 1/us.
    pub gamma_up: f64,
    /// Decay rate of the down state to the ground state, 1/us.
    pub gamma_down: f64,
    /// Atom temperature, uK.
    pub temperature: f64,
    /// Radial trap frequency, rad/us.
    pub omega_perp: f64,
    /// Per-axis trap frequencies (x, y, z), rad/us. Overrides `omega_perp`.
    pub trap_axes: Option<[f64; 3]>,
    /// Atomic mass, kg.
    pub mass: f64,
    /// Light shift of the addressing beam, MHz.
    pub light_shift: f64,
    /// Intermediate-state detuning of the two-photon drive, MHz. Recorded
    /// only; the intermediate level is not simulated.
    pub intermediate_detuning: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            c3: C3_THEORY,
            c3_tilde: None,
            omega_opt: PerAtom::Uniform(5.3),
            delta_opt: PerAtom::Uniform(0.0),
            omega_mw: 4.6,
            gamma_eff: PerAtom::Uniform(1.0),
            gamma_up: 1.0 / LIFETIME_UP,
            gamma_down: 1.0 / LIFETIME_DOWN,
            temperature: 50.0,
            omega_perp: std::f64::consts::TAU * 0.090,
            trap_axes: None,
            mass: RB87_MASS,
            light_shift: 20.0,
            intermediate_detuning: 740.0,
        }
    }
}

impl PhysicalParams {
    /// Trap frequency used for each spatial axis, rad/us.
    pub fn trap_frequencies(&self) -> [f64; 3] {
        self.trap_axes.unwrap_or([self.omega_perp; 3])
    }

    /// Copy with all dissipation removed.
    pub fn without_damping(&self) -> Self {
        Self {
            gamma_eff: PerAtom::Uniform(0.0),
            gamma_up: 0.0,
            gamma_down: 0.0,
            ..self.clone()
        }
    }

    /// `C3` for a pair separated by `r` (any non-zero vector).
    #[inline]
    fn c3_for(&self, r: &Vector3<f64>, dist: f64, axis: &Vector3<f64>) -> f64 {
        match self.c3_tilde {
            Some(ct) => {
                let c = r.dot(axis) / dist;
                ct * (1.0 - 3.0 * c * c)
            }
            None => self.c3,
        }
    }
}

/// Ballistic motion of every atom relative to its rest position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectories {
    /// Initial displacements, um.
    pub displacements: Vec<Vector3<f64>>,
    /// Velocities, um/us.
    pub velocities: Vec<Vector3<f64>>,
}

impl Trajectories {
    pub fn at_rest(n: usize) -> Self {
        Self {
            displacements: vec![Vector3::zeros(); n],
            velocities: vec![Vector3::zeros(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.displacements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.displacements.is_empty()
    }

    pub fn is_static(&self) -> bool {
        self.velocities.iter().all(|v| *v == Vector3::zeros())
    }

    /// Displacement of atom `i` at time `t`: `r0 + v0 t`.
    #[inline]
    pub fn displacement(&self, i: usize, t: f64) -> Vector3<f64> {
        self.displacements[i] + self.velocities[i] * t
    }

    /// Displacements of all atoms at time `t`.
    pub fn displacements_at(&self, t: f64) -> Vec<Vector3<f64>> {
        (0..self.len()).map(|i| self.displacement(i, t)).collect()
    }
}

/// Hopping frequency between atoms `i` and `j` displaced by `d_i`, `d_j`, MHz.
pub fn pair_coupling(
    geometry: &ChainGeometry,
    params: &PhysicalParams,
    i: usize,
    j: usize,
    d_i: &Vector3<f64>,
    d_j: &Vector3<f64>,
) -> Result<f64> {
    if i == j {
        return Err(Error::Contract(format!("pair coupling needs i != j (got {i})")));
    }
    let r = geometry.positions[i] + d_i - geometry.positions[j] - d_j;
    let dist = r.norm();
    if !(dist > MIN_SEPARATION) {
        return Err(Error::SingularGeometry { i, j });
    }
    Ok(params.c3_for(&r, dist, &geometry.quantization_axis) / (dist * dist * dist))
}

/// All couplings `(i, j, nu_ij)` with `i < j` kept by `range`, at time `t`
/// of the given trajectories.
pub fn pair_couplings_at(
    geometry: &ChainGeometry,
    params: &PhysicalParams,
    trajectories: &Trajectories,
    range: RangeMode,
    t: f64,
) -> Result<Vec<(usize, usize, f64)>> {
    let n = geometry.n_atoms();
    let d = trajectories.displacements_at(t);
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            if range.includes(i, j) {
                out.push((i, j, pair_coupling(geometry, params, i, j, &d[i], &d[j])?));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    SingularGeometry,
    NonPhysicalRate,
    ShapeMismatch,
    NonMonotonicChain,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.kind, self.message)
    }
}

/// Checks every geometry and parameter invariant. Empty means valid.
pub fn validate(geometry: &ChainGeometry, params: &PhysicalParams) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let n = geometry.n_atoms();
    let mut push = |kind, message: String| out.push(Diagnostic { kind, message });

    for i in 0..n {
        for j in (i + 1)..n {
            if !(geometry.distance(i, j) > MIN_SEPARATION) {
                push(
                    DiagnosticKind::SingularGeometry,
                    format!("atoms {i} and {j} coincide"),
                );
            }
        }
    }

    if n > 2 {
        let axis = geometry.quantization_axis;
        let chain = geometry.positions[n - 1] - geometry.positions[0];
        let dir = if chain.norm() > 0.0 { chain.normalize() } else { axis };
        let proj: Vec<f64> = geometry.positions.iter().map(|p| p.dot(&dir)).collect();
        if !proj.windows(2).all(|w| w[1] > w[0]) {
            push(
                DiagnosticKind::NonMonotonicChain,
                "positions are not monotonic along the chain; nearest-neighbour truncation follows input order".into(),
            );
        }
    }

    let scalars = [
        ("gamma_up", params.gamma_up),
        ("gamma_down", params.gamma_down),
        ("omega_mw", params.omega_mw),
        ("temperature", params.temperature),
        ("mass", params.mass),
        ("omega_perp", params.omega_perp),
    ];
    for (name, v) in scalars {
        if !(v.is_finite() && v >= 0.0) {
            push(DiagnosticKind::NonPhysicalRate, format!("{name} = {v} must be finite and non-negative"));
        }
    }
    if params.temperature > 0.0 {
        let axes = params.trap_frequencies();
        if axes.iter().any(|w| !(*w > 0.0)) {
            push(
                DiagnosticKind::NonPhysicalRate,
                "trap frequencies must be positive when temperature > 0".into(),
            );
        }
        if !(params.mass > 0.0) {
            push(DiagnosticKind::NonPhysicalRate, "mass must be positive when temperature > 0".into());
        }
    }
    if !params.c3.is_finite() {
        push(DiagnosticKind::NonPhysicalRate, "c3 must be finite".into());
    }

    let per_atom = [
        ("omega_opt", &params.omega_opt, true),
        ("delta_opt", &params.delta_opt, false),
        ("gamma_eff", &params.gamma_eff, true),
    ];
    for (name, value, non_negative) in per_atom {
        if !value.len_matches(n) {
            push(
                DiagnosticKind::ShapeMismatch,
                format!("{name} has {} entries for {n} atoms", value.values().len()),
            );
        }
        for v in value.values() {
            if !v.is_finite() || (non_negative && v < 0.0) {
                push(DiagnosticKind::NonPhysicalRate, format!("{name} entry {v} is not physical"));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn origin() -> Vector3<f64> {
        Vector3::zeros()
    }

    #[test]
    fn magic_angle_zeroes_coupling() {
        let magic = (1.0 / 3.0f64.sqrt()).acos();
        assert!(angular_c3(1.0, magic).abs() < 1e-15);
        assert!(angular_c3(1.0, -magic).abs() < 1e-15);
    }

    #[test]
    fn perpendicular_and_on_axis() {
        assert!((angular_c3(1.0, std::f64::consts::FRAC_PI_2) - 1.0).abs() < 1e-15);
        assert_eq!(angular_c3(-3982.5, 0.0), 7965.0);
    }

    #[test]
    fn coupling_values() {
        let p = PhysicalParams::default();
        let g = ChainGeometry::linear(2, 30.0).unwrap();
        let v = pair_coupling(&g, &p, 0, 1, &origin(), &origin()).unwrap();
        assert!((v - 0.295).abs() < 1e-12);
        let g = ChainGeometry::linear(2, 20.0).unwrap();
        let v = pair_coupling(&g, &p, 0, 1, &origin(), &origin()).unwrap();
        assert!((v - 0.995_625).abs() < 1e-12);
    }

    #[test]
    fn angular_law_matches_effective_c3_on_axis() {
        let g = ChainGeometry::linear(2, 20.0).unwrap();
        let p = PhysicalParams { c3_tilde: Some(-3982.5), ..Default::default() };
        let v = pair_coupling(&g, &p, 0, 1, &origin(), &origin()).unwrap();
        assert!((v - 7965.0 / 8000.0).abs() < 1e-12);
        // rotate the pair to the magic angle
        let magic = (1.0 / 3.0f64.sqrt()).acos();
        let g = ChainGeometry::new(
            vec![origin(), Vector3::new(20.0 * magic.sin(), 0.0, 20.0 * magic.cos())],
            Vector3::z(),
        )
        .unwrap();
        let v = pair_coupling(&g, &p, 0, 1, &origin(), &origin()).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn coincident_displaced_positions_are_singular() {
        let g = ChainGeometry::linear(2, 1.0).unwrap();
        let p = PhysicalParams::default();
        let err = pair_coupling(&g, &p, 0, 1, &origin(), &Vector3::new(0.0, 0.0, -1.0)).unwrap_err();
        assert!(matches!(err, Error::SingularGeometry { i: 0, j: 1 }));
    }

    #[test]
    fn validate_examples() {
        let p = PhysicalParams::default();
        let g = ChainGeometry::linear(3, 20.0).unwrap();
        assert!(validate(&g, &p).is_empty());

        let g2 = ChainGeometry::from_z(&[0.0, 0.0, 20.0]).unwrap();
        let d = validate(&g2, &p);
        assert!(d.iter().any(|d| d.kind == DiagnosticKind::SingularGeometry));

        let bad = PhysicalParams { gamma_up: -1.0 / 101.0, ..Default::default() };
        let d = validate(&g, &bad);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].kind, DiagnosticKind::NonPhysicalRate);
    }

    #[test]
    fn validate_flags_shape_and_order() {
        let g = ChainGeometry::from_z(&[0.0, 40.0, 20.0]).unwrap();
        let p = PhysicalParams { omega_opt: PerAtom::Each(vec![5.3, 5.3]), ..Default::default() };
        let kinds: Vec<_> = validate(&g, &p).into_iter().map(|d| d.kind).collect();
        assert!(kinds.contains(&DiagnosticKind::ShapeMismatch));
        assert!(kinds.contains(&DiagnosticKind::NonMonotonicChain));
    }

    #[test]
    fn default_lifetimes() {
        let p = PhysicalParams::default();
        assert!((1.0 / p.gamma_up - 101.0).abs() < 1e-9);
        assert!((1.0 / p.gamma_down - 135.0).abs() < 1e-9);
    }

    fn vec3() -> impl Strategy<Value = Vector3<f64>> {
        (-30.0f64..30.0, -30.0f64..30.0, -30.0f64..30.0).prop_map(|(x, y, z)| Vector3::new(x, y, z))
    }

    proptest! {
        #[test]
        fn angular_c3_is_even(theta in -10.0f64..10.0, ct in -1e4f64..1e4) {
            prop_assert!((angular_c3(ct, theta) - angular_c3(ct, -theta)).abs() <= 1e-9 * ct.abs().max(1.0));
        }

        #[test]
        fn coupling_symmetric(a in vec3(), b in vec3(), da in vec3(), db in vec3(), tilde in proptest::bool::ANY) {
            prop_assume!((a + da - b - db).norm() > 1e-3);
            let g = ChainGeometry::new(vec![a, b], Vector3::new(0.3, -0.2, 1.0)).unwrap();
            let p = PhysicalParams { c3_tilde: tilde.then_some(-3982.5), ..Default::default() };
            let ij = pair_coupling(&g, &p, 0, 1, &da, &db).unwrap();
            let ji = pair_coupling(&g, &p, 1, 0, &db, &da).unwrap();
            let scale = 7965.0 / (a + da - b - db).norm().powi(3);
            prop_assert!((ij - ji).abs() <= 1e-12 * scale);
        }

        #[test]
        fn coupling_dilation(a in vec3(), b in vec3(), s in 0.1f64..10.0) {
            prop_assume!((a - b).norm() > 1e-2);
            let g = ChainGeometry::new(vec![a, b], Vector3::z()).unwrap();
            let p = PhysicalParams { c3_tilde: Some(-3982.5), ..Default::default() };
            let v = pair_coupling(&g, &p, 0, 1, &origin(), &origin()).unwrap();
            let vs = pair_coupling(&g.scaled(s), &p, 0, 1, &origin(), &origin()).unwrap();
            prop_assert!((vs * s.powi(3) - v).abs() <= 1e-9 * v.abs().max(1e-12));
        }
    }
}
