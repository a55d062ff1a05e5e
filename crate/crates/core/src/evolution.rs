//! Scale-factor models, initial data, the two-level explicit stepper and
//! the run diagnostics (discrete energy and the asymptotic Norm).
//!
//! The scheme advances the class-space variational system
//!
//! ```text
//! M (U^{n+1} - 2U^n + U^{n-1})
//!   + 3 (a'/a) dt M (U^{n+1} - U^{n-1}) / 2
//!   + dt^2 (1/a^2) (K + D) U^n = 0
//! ```
//!
//! with the coefficients evaluated at t* + n dt. Each step solves the
//! scalar-shifted mass system (1 + 3 (a'/a) dt / 2) M U^{n+1} = rhs by
//! warm-started conjugate gradient with a diagonal preconditioner.

use crate::fem::{
    cg_solve_with_diag, eval_delav, locate_and_eval, shape_eval, CsrMatrix, PointLocator,
    SystemMatrices,
};
use crate::geometry::{d_max, geodesic_distance, lift, Quaternion};
use crate::mesh::TetMeshP2;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use std::io::Write;
use std::path::Path;

/// Errors from the evolution layer.
#[derive(Debug, thiserror::Error)]
pub enum EvolutionError {
    #[error("scale factor must be positive, got a({t}) = {a}")]
    NonPositiveScaleFactor { t: f64, a: f64 },
    #[error("mass solve failed: {0}")]
    Solver(#[from] crate::fem::FemError),
    #[error("initial bump radius {radius} must be positive and below d_max")]
    BadBumpRadius { radius: f64 },
    #[error("time step must be positive, got {dt}")]
    BadTimeStep { dt: f64 },
    #[error("the Norm diagnostic is defined for the named models only")]
    NormNeedsNamedModel,
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Expansion history of the Robertson-Walker metric.
///
/// The de Sitter model has `a(t) = cosh(H t) / H`; the inflating toy
/// model has `a(t) = exp(t)`. A custom model supplies `a` and `a'` as
/// plain functions.
#[derive(Clone, Copy)]
pub enum ScaleFactorModel {
    DeSitter { hubble: f64 },
    Inflating,
    Custom { a: fn(f64) -> f64, a_prime: fn(f64) -> f64 },
}

impl std::fmt::Debug for ScaleFactorModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScaleFactorModel::DeSitter { hubble } => write!(f, "DeSitter(H={hubble})"),
            ScaleFactorModel::Inflating => write!(f, "Inflating"),
            ScaleFactorModel::Custom { .. } => write!(f, "Custom"),
        }
    }
}

impl ScaleFactorModel {
    /// Evaluate `(a(t), a'(t)/a(t))` in closed form.
    pub fn scale_factor(&self, t: f64) -> Result<(f64, f64), EvolutionError> {
        match self {
            ScaleFactorModel::DeSitter { hubble } => {
                let h = *hubble;
                Ok(((h * t).cosh() / h, h * (h * t).tanh()))
            }
            ScaleFactorModel::Inflating => Ok((t.exp(), 1.0)),
            ScaleFactorModel::Custom { a, a_prime } => {
                let av = a(t);
                if av <= 0.0 {
                    return Err(EvolutionError::NonPositiveScaleFactor { t, a: av });
                }
                Ok((av, a_prime(t) / av))
            }
        }
    }
}

/// One compactly supported fluctuation: amplitude * exp(d^2/(d^2-R^2))
/// inside geodesic radius R around the center, zero outside.
#[derive(Clone, Copy, Debug)]
pub struct Bump {
    pub center: [f64; 3],
    pub radius: f64,
    pub amplitude: f64,
}

/// Random-bump recipe: `count` bumps with amplitudes in [-100, 100],
/// radii in (0, 0.1] and centers uniform in the ball |X| <= 0.25,
/// reproducible from the seed.
#[derive(Clone, Copy, Debug)]
pub struct RandomBumps {
    pub count: usize,
    pub seed: u64,
}

/// Initial data: a sum of bumps for the value, optional random bumps,
/// and bumps for the initial velocity (empty means zero velocity).
#[derive(Clone, Debug, Default)]
pub struct InitSpec {
    pub bumps: Vec<Bump>,
    pub random: Option<RandomBumps>,
    pub velocity: Vec<Bump>,
}

impl InitSpec {
    /// Single bump at the origin, amplitude 100, radius 0.1.
    pub fn init_1() -> InitSpec {
        InitSpec {
            bumps: vec![Bump { center: [0.0; 3], radius: 0.1, amplitude: 100.0 }],
            ..Default::default()
        }
    }

    /// Single bump at the origin, amplitude 100, radius 0.05.
    pub fn init_2() -> InitSpec {
        InitSpec {
            bumps: vec![Bump { center: [0.0; 3], radius: 0.05, amplitude: 100.0 }],
            ..Default::default()
        }
    }

    /// The three-bump configuration built on top of the small bump.
    pub fn init_3() -> InitSpec {
        InitSpec {
            bumps: vec![
                Bump { center: [0.0; 3], radius: 0.05, amplitude: 100.0 },
                Bump { center: [0.1, 0.1, 0.1], radius: 0.1, amplitude: 100.0 },
                Bump { center: [-0.15, 0.0, -0.1], radius: 0.05, amplitude: 100.0 },
            ],
            ..Default::default()
        }
    }

    /// One hundred random fluctuations.
    pub fn init_4(seed: u64) -> InitSpec {
        InitSpec {
            random: Some(RandomBumps { count: 100, seed }),
            ..Default::default()
        }
    }

    /// All value bumps, with random ones expanded deterministically.
    pub fn resolved_bumps(&self) -> Vec<Bump> {
        let mut bumps = self.bumps.clone();
        if let Some(random) = self.random {
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(random.seed);
            let mut placed = 0;
            while placed < random.count {
                let center = [
                    rng.gen_range(-0.25..0.25),
                    rng.gen_range(-0.25..0.25),
                    rng.gen_range(-0.25..0.25),
                ];
                let r2: f64 = center.iter().map(|c| c * c).sum();
                if r2 > 0.25 * 0.25 {
                    continue;
                }
                let amplitude = rng.gen_range(-100.0..100.0);
                let radius = rng.gen_range(f64::EPSILON..=0.1);
                bumps.push(Bump { center, radius, amplitude });
                placed += 1;
            }
        }
        bumps
    }
}

/// Geodesic distance on the quotient: the minimum over the group orbit
/// of the bump center. Only images whose cap can reach the fundamental
/// domain are kept.
struct QuotientBump {
    images: Vec<Quaternion>,
    radius: f64,
    amplitude: f64,
}

impl QuotientBump {
    fn new(mesh: &TetMeshP2, bump: &Bump) -> Result<QuotientBump, EvolutionError> {
        if bump.radius <= 0.0 || bump.radius >= d_max() {
            return Err(EvolutionError::BadBumpRadius { radius: bump.radius });
        }
        let center = lift(bump.center)
            .map_err(|_| EvolutionError::BadBumpRadius { radius: bump.radius })?;
        // any point of the domain is within d_max of the north pole, so
        // an image can only matter if it sits within d_max + radius
        let reach = (d_max() + bump.radius).cos();
        let images = mesh
            .domain
            .group()
            .elements()
            .iter()
            .map(|e| e.q.mul(center))
            .filter(|img| img.w >= reach - 1e-12)
            .collect();
        Ok(QuotientBump { images, radius: bump.radius, amplitude: bump.amplitude })
    }

    fn eval(&self, point: Quaternion) -> f64 {
        let mut d = f64::INFINITY;
        for img in &self.images {
            d = d.min(geodesic_distance(point, *img).unwrap_or(f64::INFINITY));
        }
        if d >= self.radius {
            return 0.0;
        }
        let d2 = d * d;
        self.amplitude * (d2 / (d2 - self.radius * self.radius)).exp()
    }
}

fn bump_field(mesh: &TetMeshP2, bumps: &[Bump]) -> Result<Vec<f64>, EvolutionError> {
    let quotient: Vec<QuotientBump> = bumps
        .iter()
        .map(|b| QuotientBump::new(mesh, b))
        .collect::<Result<_, _>>()?;
    Ok(mesh
        .classes
        .iter()
        .map(|class| {
            let p = lift(mesh.node_position(class.nodes[0])).expect("node inside unit ball");
            quotient.iter().map(|b| b.eval(p)).sum()
        })
        .collect())
}

/// Nodal interpolation of the initial value data onto the node classes.
pub fn init_bump(mesh: &TetMeshP2, spec: &InitSpec) -> Result<Vec<f64>, EvolutionError> {
    bump_field(mesh, &spec.resolved_bumps())
}

/// Nodal interpolation of the initial velocity data (zero when the spec
/// has no velocity bumps).
pub fn init_velocity(mesh: &TetMeshP2, spec: &InitSpec) -> Result<Vec<f64>, EvolutionError> {
    if spec.velocity.is_empty() {
        Ok(vec![0.0; mesh.n_classes()])
    } else {
        bump_field(mesh, &spec.velocity)
    }
}

/// Two consecutive field levels of the march.
#[derive(Clone, Debug)]
pub struct FieldState {
    pub prev: Vec<f64>,
    pub curr: Vec<f64>,
    /// Time of `curr`.
    pub t: f64,
    pub dt: f64,
    pub model: ScaleFactorModel,
}

/// Scratch buffers and solver configuration shared across steps.
pub struct StepWorkspace {
    /// K + D merged into one matrix.
    stiffness: CsrMatrix,
    mass_diag: Vec<f64>,
    rhs: Vec<f64>,
    tmp: Vec<f64>,
    next: Vec<f64>,
    pub cg_tol: f64,
    pub cg_max_iters: usize,
    lumped: Option<Vec<f64>>,
}

impl StepWorkspace {
    pub fn new(mats: &SystemMatrices) -> StepWorkspace {
        let n = mats.n();
        let mut triplets = Vec::with_capacity(mats.stiffness.nnz() + mats.radial.nnz());
        for r in 0..n {
            for k in mats.stiffness.row_ptr[r]..mats.stiffness.row_ptr[r + 1] {
                triplets.push((r, mats.stiffness.col_idx[k], mats.stiffness.values[k]));
            }
            for k in mats.radial.row_ptr[r]..mats.radial.row_ptr[r + 1] {
                triplets.push((r, mats.radial.col_idx[k], mats.radial.values[k]));
            }
        }
        StepWorkspace {
            stiffness: CsrMatrix::from_triplets(n, triplets),
            mass_diag: mats.mass.diagonal(),
            rhs: vec![0.0; n],
            tmp: vec![0.0; n],
            next: vec![0.0; n],
            cg_tol: 1e-12,
            cg_max_iters: 50_000,
            lumped: mats.lumped_mass.clone(),
        }
    }
}

/// Advance the state by one time step.
pub fn step(
    state: &mut FieldState,
    mats: &SystemMatrices,
    work: &mut StepWorkspace,
) -> Result<(), EvolutionError> {
    if state.dt <= 0.0 {
        return Err(EvolutionError::BadTimeStep { dt: state.dt });
    }
    let (a, h) = state.model.scale_factor(state.t)?;
    let dt = state.dt;
    let c = 1.5 * h * dt;
    let n = state.curr.len();

    // rhs = M (2 U^n + (c - 1) U^{n-1}) - dt^2/a^2 (K+D) U^n,
    // then solve (1+c) M U^{n+1} = rhs
    for i in 0..n {
        work.tmp[i] = 2.0 * state.curr[i] + (c - 1.0) * state.prev[i];
    }
    mats.mass.matvec(&work.tmp, &mut work.rhs);
    work.stiffness.matvec(&state.curr, &mut work.tmp);
    let factor = dt * dt / (a * a);
    let shift = 1.0 + c;
    for i in 0..n {
        work.rhs[i] = (work.rhs[i] - factor * work.tmp[i]) / shift;
    }
    match &work.lumped {
        Some(lumped) => {
            for i in 0..n {
                work.next[i] = work.rhs[i] / lumped[i];
            }
        }
        None => {
            // warm start from the linear extrapolation of the last levels
            for i in 0..n {
                work.next[i] = 2.0 * state.curr[i] - state.prev[i];
            }
            cg_solve_with_diag(
                &mats.mass,
                &work.rhs,
                &mut work.next,
                work.cg_tol,
                work.cg_max_iters,
                &work.mass_diag,
            )
            .map_err(EvolutionError::Solver)?;
        }
    }
    std::mem::swap(&mut state.prev, &mut state.curr);
    std::mem::swap(&mut state.curr, &mut work.next);
    state.t += dt;
    Ok(())
}

/// Discrete energy of the two stored levels:
/// <M v, v> + (1/a^2) <(K+D) U^{n-1}, U^n> with v the backward
/// difference quotient and a evaluated at the current time.
pub fn discrete_energy(
    state: &FieldState,
    mats: &SystemMatrices,
    work: &mut StepWorkspace,
) -> Result<f64, EvolutionError> {
    let (a, _) = state.model.scale_factor(state.t)?;
    let n = state.curr.len();
    for i in 0..n {
        work.tmp[i] = (state.curr[i] - state.prev[i]) / state.dt;
    }
    mats.mass.matvec(&work.tmp, &mut work.rhs);
    let kinetic = crate::fem::dot(&work.tmp, &work.rhs);
    work.stiffness.matvec(&state.prev, &mut work.rhs);
    let potential = crate::fem::dot(&work.rhs, &state.curr) / (a * a);
    Ok(kinetic + potential)
}

/// The asymptotic diagnostic: the weighted L2 norm over the mesh of
///
/// ```text
/// Delta u_h|_T(G_T) - A(t) d_t u_h(G_T)
/// ```
///
/// with A(t) = 1/(2H (1 - tanh Ht)) for the de Sitter model and e^{2t}
/// for the inflating model. The time derivative is the backward
/// difference of the two stored levels interpolated at the centroid.
pub fn norm_diagnostic(
    state: &FieldState,
    mats: &SystemMatrices,
    mesh: &TetMeshP2,
) -> Result<f64, EvolutionError> {
    let amp = match state.model {
        ScaleFactorModel::DeSitter { hubble } => {
            1.0 / (2.0 * hubble * (1.0 - (hubble * state.t).tanh()))
        }
        ScaleFactorModel::Inflating => (2.0 * state.t).exp(),
        ScaleFactorModel::Custom { .. } => return Err(EvolutionError::NormNeedsNamedModel),
    };
    let centroid = [0.25f64; 4];
    let (shape, _) = shape_eval(centroid);
    let mut total = 0.0;
    for t in 0..mesh.tets.len() {
        let lap = eval_delav(mesh, &state.curr, t);
        let nodes = mesh.tet_nodes(t);
        let mut dtu = 0.0;
        for (i, &node) in nodes.iter().enumerate() {
            let class = mesh.node_class[node];
            dtu += shape[i] * (state.curr[class] - state.prev[class]) / state.dt;
        }
        let defect = lap - amp * dtu;
        total += mats.tet_weighted_volume[t] * defect * defect;
    }
    Ok(total.sqrt())
}

/// Everything a run produces, kept in memory; the text outputs are
/// written separately.
pub struct RunResult {
    pub energy: Vec<(f64, f64)>,
    pub norm: Vec<(f64, f64)>,
    /// One series per probe point.
    pub probes: Vec<Vec<(f64, f64)>>,
    pub snapshots: Vec<(f64, Vec<f64>)>,
    pub state: FieldState,
    pub seed: Option<u64>,
}

/// Run parameters beyond the mesh and matrices.
#[derive(Clone, Debug)]
pub struct RunParams {
    pub model: ScaleFactorModel,
    pub t_star: f64,
    pub t_end: f64,
    pub dt: f64,
    pub init: InitSpec,
    pub probes: Vec<[f64; 3]>,
    pub snapshot_times: Vec<f64>,
    /// Record diagnostics every this many steps.
    pub log_every: usize,
    /// Add the second-order start correction (dt^2/2) u'' to U^1.
    pub second_order_start: bool,
    /// Skip the Norm diagnostic (it costs a mesh sweep per log point).
    pub with_norm: bool,
}

impl RunParams {
    pub fn new(model: ScaleFactorModel, t_star: f64, t_end: f64, dt: f64, init: InitSpec) -> Self {
        RunParams {
            model,
            t_star,
            t_end,
            dt,
            init,
            probes: Vec::new(),
            snapshot_times: Vec::new(),
            log_every: 100,
            second_order_start: false,
            with_norm: true,
        }
    }
}

/// Default time step: the reference 1.5e-4 capped by the mesh scale,
/// dt <= 0.5 h a(t*).
pub fn default_dt(mesh: &TetMeshP2, model: ScaleFactorModel, t_star: f64) -> f64 {
    let (a, _) = model.scale_factor(t_star).unwrap_or((1.0, 0.0));
    (1.5e-4f64).min(0.5 * mesh.h_max() * a)
}

/// March the field from t* to t_end, collecting diagnostics.
pub fn run(
    mesh: &TetMeshP2,
    mats: &SystemMatrices,
    params: &RunParams,
) -> Result<RunResult, EvolutionError> {
    if params.dt <= 0.0 {
        return Err(EvolutionError::BadTimeStep { dt: params.dt });
    }
    let u0 = init_bump(mesh, &params.init)?;
    let u1 = init_velocity(mesh, &params.init)?;
    let mut work = StepWorkspace::new(mats);
    let n = mats.n();

    // two-level start: U^1 = U^0 + dt u1 (+ optional second-order term)
    let mut first = vec![0.0; n];
    for i in 0..n {
        first[i] = u0[i] + params.dt * u1[i];
    }
    if params.second_order_start {
        // u'' (t*) = -3 (a'/a) u1 - (1/a^2) M^{-1} (K+D) u0
        let (a, h) = params.model.scale_factor(params.t_star)?;
        work.stiffness.matvec(&u0, &mut work.tmp);
        let mut accel = vec![0.0; n];
        cg_solve_with_diag(
            &mats.mass,
            &work.tmp,
            &mut accel,
            work.cg_tol,
            work.cg_max_iters,
            &work.mass_diag,
        )
        .map_err(EvolutionError::Solver)?;
        let half_dt2 = params.dt * params.dt / 2.0;
        for i in 0..n {
            first[i] += half_dt2 * (-3.0 * h * u1[i] - accel[i] / (a * a));
        }
    }

    let mut state = FieldState {
        prev: u0,
        curr: first,
        t: params.t_star + params.dt,
        dt: params.dt,
        model: params.model,
    };
    let locator = (!params.probes.is_empty()).then(|| PointLocator::new(mesh));
    let mut result = RunResult {
        energy: Vec::new(),
        norm: Vec::new(),
        probes: vec![Vec::new(); params.probes.len()],
        snapshots: Vec::new(),
        state: state.clone(),
        seed: params.init.random.map(|r| r.seed),
    };
    let mut snapshot_times = params.snapshot_times.clone();
    snapshot_times.sort_by(|a, b| a.partial_cmp(b).expect("snapshot times are finite"));
    let mut next_snapshot = 0usize;

    let total_steps = ((params.t_end - params.t_star) / params.dt).round() as usize;
    let mut log = |state: &FieldState,
                   work: &mut StepWorkspace,
                   result: &mut RunResult|
     -> Result<(), EvolutionError> {
        let e = discrete_energy(state, mats, work)?;
        result.energy.push((state.t, e));
        if params.with_norm {
            let nv = norm_diagnostic(state, mats, mesh)?;
            result.norm.push((state.t, nv));
        }
        if let Some(locator) = &locator {
            for (k, probe) in params.probes.iter().enumerate() {
                let v = locate_and_eval(mesh, locator, &state.curr, *probe)
                    .map_err(EvolutionError::Solver)?;
                result.probes[k].push((state.t, v));
            }
        }
        Ok(())
    };

    log(&state, &mut work, &mut result)?;
    for n_step in 1..total_steps {
        step(&mut state, mats, &mut work)?;
        while next_snapshot < snapshot_times.len()
            && state.t + 1e-12 >= snapshot_times[next_snapshot]
        {
            result.snapshots.push((state.t, state.curr.clone()));
            next_snapshot += 1;
        }
        if n_step % params.log_every == 0 || n_step == total_steps - 1 {
            log(&state, &mut work, &mut result)?;
        }
    }
    result.state = state;
    Ok(result)
}

impl RunResult {
    /// Write energy.tsv, norm.tsv, probe_<k>.tsv and the snapshots into
    /// a directory, tab separated with 17 significant digits.
    pub fn write_outputs(&self, dir: impl AsRef<Path>) -> Result<(), EvolutionError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|source| EvolutionError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        let open = |name: String| -> Result<std::io::BufWriter<std::fs::File>, EvolutionError> {
            let path = dir.join(&name);
            Ok(std::io::BufWriter::new(std::fs::File::create(&path).map_err(
                |source| EvolutionError::Io { path: path.display().to_string(), source },
            )?))
        };
        let io_err = |source: std::io::Error| EvolutionError::Io {
            path: dir.display().to_string(),
            source,
        };
        let header = |w: &mut dyn Write| -> std::io::Result<()> {
            if let Some(seed) = self.seed {
                writeln!(w, "# seed {seed}")?;
            }
            Ok(())
        };
        let mut f = open("energy.tsv".into())?;
        header(&mut f).map_err(io_err)?;
        for (t, e) in &self.energy {
            writeln!(f, "{}\t{}", crate::textio::fmt(*t), crate::textio::fmt(*e))
                .map_err(io_err)?;
        }
        if !self.norm.is_empty() {
            let mut f = open("norm.tsv".into())?;
            header(&mut f).map_err(io_err)?;
            for (t, v) in &self.norm {
                writeln!(f, "{}\t{}", crate::textio::fmt(*t), crate::textio::fmt(*v))
                    .map_err(io_err)?;
            }
        }
        for (k, series) in self.probes.iter().enumerate() {
            let mut f = open(format!("probe_{k}.tsv"))?;
            header(&mut f).map_err(io_err)?;
            for (t, v) in series {
                writeln!(f, "{}\t{}", crate::textio::fmt(*t), crate::textio::fmt(*v))
                    .map_err(io_err)?;
            }
        }
        for (t, field) in &self.snapshots {
            let mut f = open(format!("state_t{t:.6}.tsv"))?;
            header(&mut f).map_err(io_err)?;
            for (class, v) in field.iter().enumerate() {
                writeln!(f, "{}\t{}", class, crate::textio::fmt(*v)).map_err(io_err)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble;
    use crate::mesh::build_mesh;

    fn level0() -> (TetMeshP2, SystemMatrices) {
        let mesh = build_mesh(0).unwrap();
        let mats = assemble(&mesh).unwrap();
        (mesh, mats)
    }

    #[test]
    fn named_models_closed_forms() {
        let ds = ScaleFactorModel::DeSitter { hubble: 1.0 };
        let (a, h) = ds.scale_factor(0.0).unwrap();
        assert_eq!(a, 1.0);
        assert_eq!(h, 0.0);
        let (a, h) = ScaleFactorModel::Inflating.scale_factor(2.0).unwrap();
        assert!((a - 2.0f64.exp()).abs() < 1e-15);
        assert_eq!(h, 1.0);
        // a'/a tends to 1 for the de Sitter model
        let (_, h) = ds.scale_factor(20.0).unwrap();
        assert!((h - 1.0).abs() < 1e-12);
    }

    #[test]
    fn custom_model_rejects_nonpositive() {
        let m = ScaleFactorModel::Custom { a: |t| t, a_prime: |_| 1.0 };
        assert!(m.scale_factor(-1.0).is_err());
        assert!(m.scale_factor(2.0).is_ok());
    }

    #[test]
    fn bump_values_at_center_and_edge() {
        let (mesh, _) = level0();
        let spec = InitSpec::init_2();
        let field = init_bump(&mesh, &spec).unwrap();
        // the center node carries the full amplitude
        let center_class = mesh.node_class[0];
        assert!((field[center_class] - 100.0).abs() < 1e-12);
        // all other vertex values vanish (the level-0 nodes are far
        // outside radius 0.05 except the center)
        let count_nonzero = field.iter().filter(|v| v.abs() > 0.0).count();
        assert_eq!(count_nonzero, 1);
        // rejects oversized radii
        let bad = InitSpec {
            bumps: vec![Bump { center: [0.0; 3], radius: 1.0, amplitude: 1.0 }],
            ..Default::default()
        };
        assert!(init_bump(&mesh, &bad).is_err());
    }

    #[test]
    fn bump_support_matches_direct_scan() {
        let mesh = build_mesh(2).unwrap();
        let spec = InitSpec::init_2();
        let field = init_bump(&mesh, &spec).unwrap();
        let support = field.iter().filter(|v| v.abs() > 0.0).count();
        // independent scan: plain sphere distance from the center (no
        // image can reach a bump this small at the origin)
        let mut expected = 0;
        for class in &mesh.classes {
            let p = lift(mesh.node_position(class.nodes[0])).unwrap();
            let d = geodesic_distance(p, Quaternion::ONE).unwrap();
            if d < 0.05 {
                let d2 = d * d;
                if (d2 / (d2 - 0.05 * 0.05)).exp() > 0.0 {
                    expected += 1;
                }
            }
        }
        assert_eq!(support, expected);
        assert!(support > 1, "level-2 mesh resolves the small bump");
    }

    #[test]
    fn random_bumps_are_reproducible() {
        let spec = InitSpec::init_4(42);
        let a = spec.resolved_bumps();
        let b = spec.resolved_bumps();
        assert_eq!(a.len(), 100);
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.center, y.center);
            assert_eq!(x.radius, y.radius);
            assert_eq!(x.amplitude, y.amplitude);
        }
        for bump in &a {
            assert!(bump.amplitude >= -100.0 && bump.amplitude <= 100.0);
            assert!(bump.radius > 0.0 && bump.radius <= 0.1);
            let r: f64 = bump.center.iter().map(|c| c * c).sum::<f64>().sqrt();
            assert!(r <= 0.25);
        }
    }

    #[test]
    fn constant_field_is_a_fixed_point() {
        let (_, mats) = level0();
        let mut work = StepWorkspace::new(&mats);
        for model in [ScaleFactorModel::DeSitter { hubble: 1.0 }, ScaleFactorModel::Inflating] {
            let n = mats.n();
            let mut state = FieldState {
                prev: vec![2.0; n],
                curr: vec![2.0; n],
                t: 0.5,
                dt: 1.5e-4,
                model,
            };
            for _ in 0..200 {
                step(&mut state, &mats, &mut work).unwrap();
            }
            for v in &state.curr {
                assert!((v - 2.0).abs() < 1e-11, "{model:?}: {v}");
            }
            let e = discrete_energy(&state, &mats, &mut work).unwrap();
            assert!(e.abs() < 1e-12 * 4.0 * n as f64);
        }
    }

    #[test]
    fn zero_data_stays_zero() {
        let (mesh, mats) = level0();
        let params = RunParams::new(
            ScaleFactorModel::Inflating,
            1.0,
            1.05,
            1e-3,
            InitSpec::default(),
        );
        let result = run(&mesh, &mats, &params).unwrap();
        assert!(result.state.curr.iter().all(|&v| v == 0.0));
        assert!(result.energy.iter().all(|&(_, e)| e == 0.0));
    }

    #[test]
    fn spatially_constant_decay_tracks_the_exact_solution() {
        // u(t) = 2 e^{-3t} solves the inflating equation with spatially
        // constant data; the discrete march must follow it. The start
        // quality bounds the global error: first order leaves an O(dt)
        // velocity defect, second order reaches the scheme's O(dt^2).
        let (_, mats) = level0();
        let n = mats.n();
        let dt = 1.5e-4;
        let march = |start: f64| -> (f64, f64) {
            let mut work = StepWorkspace::new(&mats);
            let mut state = FieldState {
                prev: vec![2.0; n],
                curr: vec![start; n],
                t: dt,
                dt,
                model: ScaleFactorModel::Inflating,
            };
            while state.t < 0.5 - 1e-12 {
                step(&mut state, &mats, &mut work).unwrap();
            }
            (state.curr[0], 2.0 * (-3.0 * state.t).exp())
        };
        let (first, exact) = march(2.0 - 6.0 * dt);
        assert!((first - exact).abs() < 3.0 * dt, "first-order start: {first} vs {exact}");
        let (second, exact) = march(2.0 - 6.0 * dt + 9.0 * dt * dt);
        assert!((second - exact).abs() < 1e-6, "second-order start: {second} vs {exact}");
    }

    #[test]
    fn halving_dt_quarters_the_error() {
        let (_, mats) = level0();
        let run_to = |dt: f64| -> f64 {
            let mut work = StepWorkspace::new(&mats);
            let n = mats.n();
            let mut state = FieldState {
                prev: vec![2.0; n],
                curr: vec![2.0 - 6.0 * dt + 9.0 * dt * dt; n], // second-order start
                t: dt,
                dt,
                model: ScaleFactorModel::Inflating,
            };
            let steps = (0.3 / dt).round() as usize - 1;
            for _ in 0..steps {
                step(&mut state, &mats, &mut work).unwrap();
            }
            (state.curr[0] - 2.0 * (-3.0 * state.t).exp()).abs()
        };
        let e1 = run_to(2e-3);
        let e2 = run_to(1e-3);
        let rate = e1 / e2;
        assert!((rate - 4.0).abs() < 0.7, "observed reduction {rate}");
    }

    #[test]
    fn energy_decays_for_a_bump() {
        let (mesh, mats) = level0();
        let mut params = RunParams::new(
            ScaleFactorModel::Inflating,
            1.5,
            1.7,
            1e-3,
            InitSpec::init_1(),
        );
        params.log_every = 20;
        params.with_norm = false;
        let result = run(&mesh, &mats, &params).unwrap();
        assert!(result.energy.len() > 3);
        for w in result.energy.windows(2) {
            assert!(w[1].1 <= w[0].1 * (1.0 + 1e-10), "energy rose: {w:?}");
        }
    }

    #[test]
    fn norm_of_static_constant_field_vanishes() {
        let (mesh, mats) = level0();
        let n = mats.n();
        let state = FieldState {
            prev: vec![3.0; n],
            curr: vec![3.0; n],
            t: 1.0,
            dt: 1e-3,
            model: ScaleFactorModel::Inflating,
        };
        let v = norm_diagnostic(&state, &mats, &mesh).unwrap();
        assert!(v.abs() < 1e-10);
        let custom = FieldState {
            model: ScaleFactorModel::Custom { a: |_| 1.0, a_prime: |_| 0.0 },
            ..state
        };
        assert!(norm_diagnostic(&custom, &mats, &mesh).is_err());
    }

    #[test]
    fn run_outputs_written(){
        let (mesh, mats) = level0();
        let mut params = RunParams::new(
            ScaleFactorModel::Inflating,
            1.0,
            1.01,
            1e-3,
            InitSpec::init_1(),
        );
        params.probes = vec![[0.0, 0.0, 0.0]];
        params.snapshot_times = vec![1.005];
        params.log_every = 2;
        let result = run(&mesh, &mats, &params).unwrap();
        let dir = tempfile::tempdir().unwrap();
        result.write_outputs(dir.path()).unwrap();
        assert!(dir.path().join("energy.tsv").exists());
        assert!(dir.path().join("norm.tsv").exists());
        assert!(dir.path().join("probe_0.tsv").exists());
        assert_eq!(result.snapshots.len(), 1);
        let entries: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        assert!(entries.iter().any(|e| e.starts_with("state_t")));
    }
}
