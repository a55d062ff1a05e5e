//! Causal radii, future horizons, circles-in-the-sky and deep-sky maps.
//!
//! Light emitted at the domain center travels unit coordinate speed in
//! conformal time, so the comoving radius of the causal domain is
//! `sin(arcsin R + integral of 1/a)`. Both named models have closed-form
//! conformal integrals with finite tails, hence future horizons. The
//! deep sky seen by a center observer is the field on the sphere of
//! angular radius chi pushed through the quotient: when chi exceeds the
//! injectivity radius the sphere self-intersects and values correlate
//! along six pairs of matched circles, one pair per face gluing.

use crate::evolution::{EvolutionError, ScaleFactorModel};
use crate::fem::{locate_and_eval, FemError, PointLocator};
use crate::geometry::{d_max, lift, project, Quaternion};
use crate::mesh::TetMeshP2;
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum SkyError {
    #[error("sky radius chi = {chi} must lie in (0, pi)")]
    BadChi { chi: f64 },
    #[error("the conformal tail diverges: no future horizon")]
    NoFutureHorizon,
    #[error("observation must come after emission (t_obs > t_ls)")]
    BadTimeOrder,
    #[error(transparent)]
    Model(#[from] EvolutionError),
    #[error("sky point failed to land in the mesh: {0}")]
    Location(#[from] FemError),
    #[error("reduction into the fundamental domain failed: {0}")]
    Reduce(#[from] crate::geometry::GeometryError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Conformal distance between two times, the integral of 1/a.
pub fn conformal_distance(
    model: ScaleFactorModel,
    t0: f64,
    t1: f64,
) -> Result<f64, SkyError> {
    match model {
        ScaleFactorModel::DeSitter { hubble } => {
            Ok(2.0 * ((hubble * t1).exp().atan() - (hubble * t0).exp().atan()))
        }
        ScaleFactorModel::Inflating => Ok((-t0).exp() - (-t1).exp()),
        ScaleFactorModel::Custom { .. } => {
            // composite Simpson with interval doubling
            let f = |t: f64| -> Result<f64, SkyError> {
                let (a, _) = model.scale_factor(t)?;
                Ok(1.0 / a)
            };
            let mut n = 16usize;
            let mut last = f64::INFINITY;
            loop {
                let h = (t1 - t0) / n as f64;
                let mut sum = f(t0)? + f(t1)?;
                for k in 1..n {
                    let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                    sum += w * f(t0 + k as f64 * h)?;
                }
                let value = sum * h / 3.0;
                if (value - last).abs() <= 1e-12 * (1.0 + value.abs()) {
                    return Ok(value);
                }
                last = value;
                n *= 2;
                if n > 1 << 22 {
                    return Ok(value);
                }
            }
        }
    }
}

/// A causal radius; `wrapped` is set when the conformal argument passed
/// pi/2 and the sine formula stops being the physical radius.
#[derive(Clone, Copy, Debug)]
pub struct RadiusResult {
    pub value: f64,
    pub wrapped: bool,
}

/// Comoving radius at time t of the causal future of a ball of radius R
/// at time t*: sin(arcsin R + integral of 1/a over [t*, t]).
pub fn comoving_radius(
    model: ScaleFactorModel,
    t_star: f64,
    r: f64,
    t: f64,
) -> Result<RadiusResult, SkyError> {
    let arg = r.asin() + conformal_distance(model, t_star, t)?;
    Ok(RadiusResult { value: arg.sin(), wrapped: arg > PI / 2.0 })
}

/// Radius of the future horizon: the t -> infinity limit of
/// [`comoving_radius`]. Finite only when the conformal tail converges.
pub fn horizon_radius(
    model: ScaleFactorModel,
    t_star: f64,
    r: f64,
) -> Result<RadiusResult, SkyError> {
    let tail = match model {
        ScaleFactorModel::DeSitter { hubble } => PI - 2.0 * (hubble * t_star).exp().atan(),
        ScaleFactorModel::Inflating => (-t_star).exp(),
        ScaleFactorModel::Custom { .. } => {
            // stretch the window until the increments die; geometric decay
            // of the increments certifies convergence
            let mut total = 0.0;
            let mut t0 = t_star;
            let mut span = 1.0f64;
            let mut increment = f64::INFINITY;
            for _ in 0..64 {
                let piece = conformal_distance(model, t0, t0 + span)?;
                total += piece;
                t0 += span;
                span *= 2.0;
                if piece <= 1e-13 {
                    increment = piece;
                    break;
                }
                if piece > increment * 0.99 && total > PI {
                    return Err(SkyError::NoFutureHorizon);
                }
                increment = piece;
            }
            if increment > 1e-10 {
                return Err(SkyError::NoFutureHorizon);
            }
            total
        }
    };
    let arg = r.asin() + tail;
    Ok(RadiusResult { value: arg.sin(), wrapped: arg > PI / 2.0 })
}

/// Radius of the horizon sphere between emission and observation times,
/// and whether multiple images occur (conformal distance strictly
/// beyond the injectivity radius d_max).
pub fn circles_condition(
    model: ScaleFactorModel,
    t_ls: f64,
    t_obs: f64,
) -> Result<(f64, bool), SkyError> {
    if t_obs <= t_ls {
        return Err(SkyError::BadTimeOrder);
    }
    let dist = conformal_distance(model, t_ls, t_obs)?;
    Ok((dist.sin(), dist > d_max()))
}

/// Equirectangular deep-sky map: delta T / T at pixel centers.
#[derive(Clone, Debug)]
pub struct SkyMap {
    pub chi: f64,
    pub n_theta: usize,
    pub n_phi: usize,
    /// Row-major: theta rows, phi columns.
    pub values: Vec<f64>,
}

impl SkyMap {
    pub fn theta(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * PI / self.n_theta as f64
    }

    pub fn phi(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * 2.0 * PI / self.n_phi as f64
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_phi + j]
    }

    pub fn min_max(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in &self.values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// Bilinear lookup at arbitrary angles, phi wrapping around.
    pub fn sample(&self, theta: f64, phi: f64) -> f64 {
        let ti = theta / PI * self.n_theta as f64 - 0.5;
        let pj = (phi.rem_euclid(2.0 * PI)) / (2.0 * PI) * self.n_phi as f64 - 0.5;
        let i0 = ti.floor();
        let j0 = pj.floor();
        let (ft, fp) = (ti - i0, pj - j0);
        let clamp_i = |i: i64| -> usize { i.clamp(0, self.n_theta as i64 - 1) as usize };
        let wrap_j = |j: i64| -> usize { j.rem_euclid(self.n_phi as i64) as usize };
        let (i0, i1) = (clamp_i(i0 as i64), clamp_i(i0 as i64 + 1));
        let (j0, j1) = (wrap_j(j0 as i64), wrap_j(j0 as i64 + 1));
        self.value(i0, j0) * (1.0 - ft) * (1.0 - fp)
            + self.value(i1, j0) * ft * (1.0 - fp)
            + self.value(i0, j1) * (1.0 - ft) * fp
            + self.value(i1, j1) * ft * fp
    }
}

/// The sphere point of the visualization chart at angular radius chi in
/// direction (theta, phi).
pub fn sphere_point(chi: f64, theta: f64, phi: f64) -> Quaternion {
    Quaternion::new(
        chi.cos(),
        chi.sin() * theta.sin() * phi.sin(),
        chi.sin() * theta.sin() * phi.cos(),
        chi.sin() * theta.cos(),
    )
}

/// Render the Sachs-Wolfe deep sky of a class-space field: one third of
/// the field value at the quotient image of each sphere point.
pub fn sky_map(
    mesh: &TetMeshP2,
    locator: &PointLocator,
    field: &[f64],
    chi: f64,
    n_theta: usize,
    n_phi: usize,
) -> Result<SkyMap, SkyError> {
    if !(chi > 0.0 && chi < PI) {
        return Err(SkyError::BadChi { chi });
    }
    let mut map = SkyMap { chi, n_theta, n_phi, values: vec![0.0; n_theta * n_phi] };
    let eval_pixel = |i: usize, j: usize| -> Result<f64, SkyError> {
        let theta = (i as f64 + 0.5) * PI / n_theta as f64;
        let phi = (j as f64 + 0.5) * 2.0 * PI / n_phi as f64;
        let q = sphere_point(chi, theta, phi);
        let (reduced, _) = mesh.domain.reduce(q)?;
        let v = locate_and_eval(mesh, locator, field, project(reduced))?;
        Ok(v / 3.0)
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let rows: Result<Vec<Vec<f64>>, SkyError> = (0..n_theta)
            .into_par_iter()
            .map(|i| (0..n_phi).map(|j| eval_pixel(i, j)).collect())
            .collect();
        for (i, row) in rows?.into_iter().enumerate() {
            map.values[i * n_phi..(i + 1) * n_phi].copy_from_slice(&row);
        }
    }
    #[cfg(not(feature = "parallel"))]
    for i in 0..n_theta {
        for j in 0..n_phi {
            map.values[i * n_phi + j] = eval_pixel(i, j)?;
        }
    }
    Ok(map)
}

/// Write the map as `theta phi value` rows.
pub fn write_sky_tsv(map: &SkyMap, path: impl AsRef<Path>) -> Result<(), SkyError> {
    let path = path.as_ref();
    let file = std::fs::File::create(path)
        .map_err(|source| SkyError::Io { path: path.display().to_string(), source })?;
    let mut w = std::io::BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        for i in 0..map.n_theta {
            for j in 0..map.n_phi {
                writeln!(
                    w,
                    "{}\t{}\t{}",
                    crate::textio::fmt(map.theta(i)),
                    crate::textio::fmt(map.phi(j)),
                    crate::textio::fmt(map.value(i, j))
                )?;
            }
        }
        Ok(())
    };
    write().map_err(|source| SkyError::Io { path: path.display().to_string(), source })
}

/// Write a 16-bit binary graymap with linear min-max scaling; the
/// scaling is recorded in a header comment so values can be recovered.
pub fn write_sky_pgm(map: &SkyMap, path: impl AsRef<Path>) -> Result<(), SkyError> {
    let path = path.as_ref();
    let (lo, hi) = map.min_max();
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut bytes = Vec::with_capacity(64 + 2 * map.values.len());
    bytes.extend_from_slice(
        format!(
            "P5\n# linear scale min {} max {}\n{} {}\n65535\n",
            crate::textio::fmt(lo),
            crate::textio::fmt(hi),
            map.n_phi,
            map.n_theta
        )
        .as_bytes(),
    );
    for i in 0..map.n_theta {
        for j in 0..map.n_phi {
            let scaled = ((map.value(i, j) - lo) / span * 65535.0).round() as u16;
            bytes.extend_from_slice(&scaled.to_be_bytes());
        }
    }
    std::fs::write(path, bytes)
        .map_err(|source| SkyError::Io { path: path.display().to_string(), source })
}

/// Sample the six matched circle pairs of a rendered map and return the
/// mean absolute mismatch together with the map's dynamic range.
///
/// Pair i comes from the gluing g_i: the sphere of radius chi meets its
/// translate around the neighbor center g_i(e) in a circle; the partner
/// circle is its image under g_i^{-1}. Both circles live on the sphere
/// and carry the same quotient points, so a faithful rendering shows the
/// same values along both.
pub fn matched_circle_residual(
    mesh: &TetMeshP2,
    map: &SkyMap,
    samples_per_circle: usize,
) -> Result<(f64, f64), SkyError> {
    let chi = map.chi;
    let e = Quaternion::ONE;
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 1..=6u8 {
        let g = mesh.domain.clifford(i as usize);
        let c = g; // g * 1
        let gamma = e.dot(c);
        let a_coef = chi.cos() / (1.0 + gamma);
        let w2 = 1.0 - 2.0 * chi.cos() * chi.cos() / (1.0 + gamma);
        if w2 <= 1e-12 {
            continue; // the sphere does not reach this gluing
        }
        let radius = w2.sqrt();
        // orthonormal pair orthogonal to span(e, c): orthonormalize the
        // span first (e and c are not orthogonal), then complete it
        let b1 = e;
        let b2 = {
            let d = c.dot(b1);
            Quaternion::new(c.w - d * b1.w, c.x - d * b1.x, c.y - d * b1.y, c.z - d * b1.z)
                .normalized()
        };
        let mut basis = vec![b1, b2];
        for seed in [Quaternion::I, Quaternion::J, Quaternion::K] {
            let mut v = seed;
            for prev in &basis {
                let d = v.dot(*prev);
                v = Quaternion::new(
                    v.w - d * prev.w,
                    v.x - d * prev.x,
                    v.y - d * prev.y,
                    v.z - d * prev.z,
                );
            }
            if v.norm() > 1e-8 {
                basis.push(v.normalized());
            }
            if basis.len() == 4 {
                break;
            }
        }
        let (w1v, w2v) = (basis[2], basis[3]);
        let g_inv = g.conjugate();
        for k in 0..samples_per_circle {
            let t = 2.0 * PI * k as f64 / samples_per_circle as f64;
            let x = Quaternion::new(
                a_coef * (e.w + c.w) + radius * (t.cos() * w1v.w + t.sin() * w2v.w),
                a_coef * (e.x + c.x) + radius * (t.cos() * w1v.x + t.sin() * w2v.x),
                a_coef * (e.y + c.y) + radius * (t.cos() * w1v.y + t.sin() * w2v.y),
                a_coef * (e.z + c.z) + radius * (t.cos() * w1v.z + t.sin() * w2v.z),
            );
            debug_assert!((x.norm() - 1.0).abs() < 1e-10);
            debug_assert!((x.dot(e) - chi.cos()).abs() < 1e-10);
            let y = g_inv.mul(x);
            let lookup = |p: Quaternion| -> f64 {
                let sin_chi = chi.sin();
                let theta = (p.z / sin_chi).clamp(-1.0, 1.0).acos();
                let phi = p.x.atan2(p.y);
                map.sample(theta, phi)
            };
            total += (lookup(x) - lookup(y)).abs();
            count += 1;
        }
    }
    let (lo, hi) = map.min_max();
    Ok((total / count.max(1) as f64, hi - lo))
}

/// One cell of the universal-cover tiling: the image of the fundamental
/// domain under a group element, sampled at the mesh vertices with the
/// quotient field values.
#[derive(Clone, Debug)]
pub struct TilingCell {
    pub group_index: usize,
    pub vertices: Vec<[f64; 3]>,
    pub values: Vec<f64>,
}

/// Push the field to the universal cover on a subset of group elements.
pub fn tiling_export(
    mesh: &TetMeshP2,
    field: &[f64],
    subset: &[usize],
) -> Result<Vec<TilingCell>, SkyError> {
    let mut cells = Vec::with_capacity(subset.len());
    for &gi in subset {
        let tau = mesh.domain.group().element(gi).q;
        let mut vertices = Vec::with_capacity(mesh.n_vertices());
        let mut values = Vec::with_capacity(mesh.n_vertices());
        for v in 0..mesh.n_vertices() {
            let q = lift(mesh.vertices[v])?;
            vertices.push(project(tau.mul(q)));
            values.push(field[mesh.node_class[v]]);
        }
        cells.push(TilingCell { group_index: gi, vertices, values });
    }
    Ok(cells)
}

/// The identity and the twelve Clifford translations: a 13-cell
/// neighborhood of the fundamental domain inside the near unit ball.
pub fn thirteen_cell_subset(mesh: &TetMeshP2) -> Vec<usize> {
    let mut subset = vec![mesh.domain.group().identity()];
    subset.extend_from_slice(&mesh.domain.clifford_group_indices());
    subset
}

/// Write tiling cells: a `CELL` header per cell, then vertex records.
pub fn write_tiling(cells: &[TilingCell], path: impl AsRef<Path>) -> Result<(), SkyError> {
    let path = path.as_ref();
    let file = std::fs::File::create(path)
        .map_err(|source| SkyError::Io { path: path.display().to_string(), source })?;
    let mut w = std::io::BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        for cell in cells {
            writeln!(w, "CELL {} {}", cell.group_index, cell.vertices.len())?;
            for (v, val) in cell.vertices.iter().zip(cell.values.iter()) {
                writeln!(
                    w,
                    "{} {} {} {}",
                    crate::textio::fmt(v[0]),
                    crate::textio::fmt(v[1]),
                    crate::textio::fmt(v[2]),
                    crate::textio::fmt(*val)
                )?;
            }
        }
        Ok(())
    };
    write().map_err(|source| SkyError::Io { path: path.display().to_string(), source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble, interpolate_to_classes};
    use crate::mesh::build_mesh;

    const DS: ScaleFactorModel = ScaleFactorModel::DeSitter { hubble: 1.0 };
    const INF: ScaleFactorModel = ScaleFactorModel::Inflating;

    #[test]
    fn comoving_radius_starts_at_r() {
        for model in [DS, INF] {
            let r = comoving_radius(model, 2.0, 0.1, 2.0).unwrap();
            assert!((r.value - 0.1).abs() < 1e-14);
            assert!(!r.wrapped);
        }
    }

    #[test]
    fn inflating_horizon_values() {
        // R_h = sin(arcsin 0.1 + e^{-3.5}) ~ 0.1300
        let r = horizon_radius(INF, 3.5, 0.1).unwrap();
        assert!((r.value - 0.13).abs() < 5e-4, "{}", r.value);
        // R_h = sin(arcsin 0.05 + e^{-1.5}) ~ 0.2697 (4-digit truncation)
        let r = horizon_radius(INF, 1.5, 0.05).unwrap();
        assert!((r.value - 0.2697).abs() < 1e-4, "{}", r.value);
        // the horizon is the limit of the comoving radius
        let late = comoving_radius(INF, 1.5, 0.05, 60.0).unwrap();
        assert!((late.value - r.value).abs() < 1e-12);
    }

    #[test]
    fn desitter_horizon_values() {
        // sin(arcsin 0.05 - 2 arctan e^{3.5} + pi) ~ 0.11
        let r = horizon_radius(DS, 3.5, 0.05).unwrap();
        assert!((r.value - 0.1102).abs() < 5e-4, "{}", r.value);
        // t* = 1.5 pushes past the domain radius: ~0.469 > R_max
        let r = horizon_radius(DS, 1.5, 0.05).unwrap();
        assert!((r.value - 0.469).abs() < 5e-3, "{}", r.value);
        assert!(r.value > crate::geometry::r_max());
        let late = comoving_radius(DS, 3.5, 0.05, 60.0).unwrap();
        let rh = horizon_radius(DS, 3.5, 0.05).unwrap();
        assert!((late.value - rh.value).abs() < 1e-12);
    }

    #[test]
    fn custom_constant_scale_factor_gives_linear_cone() {
        let model = ScaleFactorModel::Custom { a: |_| 2.0, a_prime: |_| 0.0 };
        let r = comoving_radius(model, 0.0, 0.1, 1.0).unwrap();
        let expect = (0.1f64.asin() + 0.5).sin();
        assert!((r.value - expect).abs() < 1e-10);
        // a constant scale factor has no future horizon
        assert!(matches!(horizon_radius(model, 0.0, 0.1), Err(SkyError::NoFutureHorizon)));
        // a custom exponential matches the named closed form
        let exp_model = ScaleFactorModel::Custom { a: |t| t.exp(), a_prime: |t| t.exp() };
        let a = comoving_radius(exp_model, 1.0, 0.05, 3.0).unwrap();
        let b = comoving_radius(INF, 1.0, 0.05, 3.0).unwrap();
        assert!((a.value - b.value).abs() < 1e-9);
    }

    #[test]
    fn radius_is_monotone_until_wrap() {
        for model in [DS, INF] {
            let mut last = 0.0;
            let mut t = 0.5;
            while t < 6.0 {
                let r = comoving_radius(model, 0.5, 0.05, t).unwrap();
                if r.wrapped {
                    break;
                }
                assert!(r.value >= last - 1e-14);
                last = r.value;
                t += 0.25;
            }
        }
    }

    #[test]
    fn circles_threshold() {
        // exactly d_max: strictly false (t_ls must be early enough that
        // the inflating tail e^{-t_ls} can span d_max at all)
        let t_ls = 0.5f64;
        let t_obs = -((-t_ls).exp() - d_max()).ln();
        let (_, multiple) = circles_condition(INF, t_ls, t_obs).unwrap();
        assert!(!multiple, "boundary case is strict");
        let (r, multiple) = circles_condition(INF, t_ls, t_obs + 0.2).unwrap();
        assert!(multiple);
        assert!(r > 0.0);
        // inflating times tuned so the sphere radius is 0.6: multiple
        // images, since arcsin(0.6) > d_max (emission early enough that
        // the conformal tail can span that angle)
        let t_ls = 0.0f64;
        let t_obs = -((-t_ls).exp() - 0.6f64.asin()).ln();
        let (r, multiple) = circles_condition(INF, t_ls, t_obs).unwrap();
        assert!((r - 0.6).abs() < 1e-12);
        assert!(multiple);
        // de Sitter distance formula
        let (r, _) = circles_condition(DS, 1.0, 3.0).unwrap();
        let expect = (2.0 * (3.0f64.exp().atan() - 1.0f64.exp().atan())).sin();
        assert!((r - expect).abs() < 1e-14);
        assert!(circles_condition(INF, 2.0, 1.0).is_err());
    }

    #[test]
    fn sky_of_constant_field_is_constant_third() {
        let mesh = build_mesh(0).unwrap();
        let locator = PointLocator::new(&mesh);
        let field = vec![2.0; mesh.n_classes()];
        for chi in [0.2, 0.55, 1.5, 2.8] {
            let map = sky_map(&mesh, &locator, &field, chi, 16, 32).unwrap();
            for &v in &map.values {
                assert!((v - 2.0 / 3.0).abs() < 1e-12, "chi={chi}");
            }
        }
        assert!(sky_map(&mesh, &locator, &field, 0.0, 4, 4).is_err());
        assert!(sky_map(&mesh, &locator, &field, PI, 4, 4).is_err());
    }

    #[test]
    fn sky_well_defined_under_any_group_image() {
        // evaluating through tau x instead of x changes nothing: the
        // reduction is quotient-consistent
        let mesh = build_mesh(1).unwrap();
        let locator = PointLocator::new(&mesh);
        let field = interpolate_to_classes(&mesh, |p| {
            p[0] * p[0] + 0.5 * p[1] * p[1] + 2.0 * p[2] * p[2]
        });
        let chi = 0.9f64;
        for (theta, phi) in [(0.3, 1.0), (1.2, 4.5), (2.6, 0.2)] {
            let x = sphere_point(chi, theta, phi);
            let (rx, _) = mesh.domain.reduce(x).unwrap();
            let vx = locate_and_eval(&mesh, &locator, &field, project(rx)).unwrap();
            for gi in [3usize, 57, 101] {
                let tau = mesh.domain.group().element(gi).q;
                let (ry, _) = mesh.domain.reduce(tau.mul(x)).unwrap();
                let vy = locate_and_eval(&mesh, &locator, &field, project(ry)).unwrap();
                assert!((vx - vy).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn small_chi_sky_of_a_center_bump_is_uniform() {
        use crate::evolution::{init_bump, InitSpec};
        let mesh = build_mesh(2).unwrap();
        let locator = PointLocator::new(&mesh);
        let field = init_bump(&mesh, &InitSpec::init_1()).unwrap();
        let chi = 0.03f64;
        let map = sky_map(&mesh, &locator, &field, chi, 12, 24).unwrap();
        // radial bump: the map should be nearly the constant
        // (A0/3) exp(chi^2/(chi^2 - R0^2)) up to interpolation error
        let expect = 100.0 / 3.0 * (chi * chi / (chi * chi - 0.01)).exp();
        for &v in &map.values {
            assert!((v - expect).abs() < 0.05 * expect, "{v} vs {expect}");
        }
    }

    #[test]
    fn matched_circles_on_a_quotient_field() {
        let mesh = build_mesh(1).unwrap();
        let locator = PointLocator::new(&mesh);
        // generic smooth quotient field: a sum of off-center bumps
        use crate::evolution::{init_bump, Bump, InitSpec};
        let spec = InitSpec {
            bumps: vec![
                Bump { center: [0.12, 0.05, -0.08], radius: 0.3, amplitude: 10.0 },
                Bump { center: [-0.1, 0.15, 0.1], radius: 0.25, amplitude: -6.0 },
            ],
            ..Default::default()
        };
        let field = init_bump(&mesh, &spec).unwrap();
        let chi = 0.6f64.asin();
        let map = sky_map(&mesh, &locator, &field, chi, 96, 192).unwrap();
        let (residual, range) = matched_circle_residual(&mesh, &map, 64).unwrap();
        assert!(range > 0.0);
        assert!(
            residual <= 0.05 * range,
            "circle residual {residual} vs 5% of range {range}"
        );
    }

    #[test]
    fn tiling_identity_and_neighbors() {
        let mesh = build_mesh(0).unwrap();
        let field = interpolate_to_classes(&mesh, |p| p[0] + 2.0 * p[1] * p[1]);
        let id = mesh.domain.group().identity();
        let cells = tiling_export(&mesh, &field, &[id]).unwrap();
        assert_eq!(cells.len(), 1);
        for (v, orig) in cells[0].vertices.iter().zip(mesh.vertices.iter()) {
            for k in 0..3 {
                assert!((v[k] - orig[k]).abs() < 1e-14);
            }
        }
        // the thirteen-cell neighborhood: interiors are pairwise disjoint
        // (check via reduction: an interior point of tau(F) reduces back
        // through tau^{-1} and only that tau maps it into the domain)
        let subset = thirteen_cell_subset(&mesh);
        assert_eq!(subset.len(), 13);
        let x = lift([0.05, -0.03, 0.08]).unwrap();
        for &gi in &subset {
            let tau = mesh.domain.group().element(gi).q;
            let y = tau.mul(x);
            let mut inside = 0;
            for &gj in &subset {
                let back = mesh.domain.group().element(gj).q.conjugate().mul(y);
                if mesh.domain.member(back, crate::geometry::BOUNDARY_TOL) {
                    inside += 1;
                }
            }
            assert_eq!(inside, 1, "interior point claimed by {inside} cells");
        }
        // values agree at coincident vertices of adjacent cells
        let g1 = mesh.domain.clifford_group_indices()[0];
        let g7 = mesh.domain.clifford_group_indices()[6];
        let cells = tiling_export(&mesh, &field, &[id, g1, g7]).unwrap();
        let mut matched = 0;
        for a in 0..cells.len() {
            for b in (a + 1)..cells.len() {
                for (va, fa) in cells[a].vertices.iter().zip(cells[a].values.iter()) {
                    for (vb, fb) in cells[b].vertices.iter().zip(cells[b].values.iter()) {
                        let d2 = (va[0] - vb[0]).powi(2)
                            + (va[1] - vb[1]).powi(2)
                            + (va[2] - vb[2]).powi(2);
                        if d2 < 1e-18 {
                            assert!(
                                (fa - fb).abs() < 1e-12,
                                "coincident vertices carry different values"
                            );
                            matched += 1;
                        }
                    }
                }
            }
        }
        assert!(matched > 0, "adjacent cells share glued boundary vertices");
    }

    #[test]
    fn pgm_and_tsv_outputs() {
        let mesh = build_mesh(0).unwrap();
        let locator = PointLocator::new(&mesh);
        let field = vec![1.5; mesh.n_classes()];
        let map = sky_map(&mesh, &locator, &field, 0.4, 8, 16).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let tsv = dir.path().join("sky.tsv");
        let pgm = dir.path().join("sky.pgm");
        write_sky_tsv(&map, &tsv).unwrap();
        write_sky_pgm(&map, &pgm).unwrap();
        let text = std::fs::read_to_string(&tsv).unwrap();
        assert_eq!(text.lines().count(), 8 * 16);
        let bytes = std::fs::read(&pgm).unwrap();
        assert!(bytes.starts_with(b"P5\n"));
        assert!(bytes.len() > 2 * 8 * 16);
    }
}
