//! Observation matrices, seeded synthetic generators with exported ground
//! truth, and CSV I/O.
//!
//! Every generator is a pure function of its [`GeneratorConfig`]. Random
//! draws come from [`SeededRng`](crate::rng::SeededRng) in a fixed order:
//! latent-signal shuffles (where used), then map coefficients (view by view,
//! column by column), then noise
//! (view by view, row-major). Smooth maps are sums of sinusoids
//!
//! ```text
//! f(u) = Σ_r a_r · sin(ω_r · u + φ_r),  a_r ~ N(0, 1), ω_r ~ N(0, 1)^k, φ_r ~ U(0, 2π)
//! ```
//!
//! with `SINUSOIDS_PER_MAP` terms per output column.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{MrdError, Result};
use crate::rng::SeededRng;

pub const SINUSOIDS_PER_MAP: usize = 2;
/// Length of the held-out third-agent sweep emitted by [`gen_slam_scene`].
pub const THIRD_AGENT_STEPS: usize = 20;

/// One view's observations: `N×D` with a name and column labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewMatrix {
    pub name: String,
    pub columns: Vec<String>,
    pub values: DMatrix<f64>,
}

impl ViewMatrix {
    pub fn new(name: impl Into<String>, values: DMatrix<f64>) -> Self {
        let name = name.into();
        let columns = (0..values.ncols()).map(|j| format!("{name}{j}")).collect();
        Self {
            name,
            columns,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    /// Subset of rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> ViewMatrix {
        let values = DMatrix::from_fn(rows.len(), self.ncols(), |i, j| self.values[(rows[i], j)]);
        ViewMatrix {
            name: self.name.clone(),
            columns: self.columns.clone(),
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatentRole {
    Shared,
    Private(String),
}

impl std::fmt::Display for LatentRole {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LatentRole::Shared => write!(f, "SHARED"),
            LatentRole::Private(v) => write!(f, "PRIVATE({v})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "kebab-case")]
pub enum GeneratorConfig {
    SharedPrivate {
        n: usize,
        d_y: usize,
        d_z: usize,
        noise_std: f64,
        seed: u64,
    },
    Trajectories {
        n_pairs: usize,
        horizon: usize,
        noise_std: f64,
        seed: u64,
    },
    SlamScene {
        n_poses: usize,
        d_obs: usize,
        noise_std: f64,
        seed: u64,
    },
}

/// A held-out observation sequence with its ground-truth latent path.
#[derive(Debug, Clone, PartialEq)]
pub struct HeldOutSequence {
    /// Name of the training view whose observation map rendered the sequence.
    pub observed_as: String,
    pub observations: ViewMatrix,
    pub latents: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBundle {
    pub views: Vec<ViewMatrix>,
    /// The views before noise was added.
    pub clean_views: Vec<ViewMatrix>,
    pub true_latents: DMatrix<f64>,
    pub dimension_roles: Vec<LatentRole>,
    /// Per view, per output column: the true latent columns that drive it.
    pub output_drivers: Vec<Vec<Vec<usize>>>,
    pub held_out: Option<HeldOutSequence>,
    pub generator_config: GeneratorConfig,
}

impl SyntheticBundle {
    pub fn view(&self, name: &str) -> Option<&ViewMatrix> {
        self.views.iter().find(|v| v.name == name)
    }

    /// Output columns of `view` that depend on shared latent dimensions only.
    pub fn shared_driven_columns(&self, view: usize) -> Vec<usize> {
        self.output_drivers[view]
            .iter()
            .enumerate()
            .filter(|(_, drivers)| {
                !drivers.is_empty()
                    && drivers
                        .iter()
                        .all(|&k| self.dimension_roles[k] == LatentRole::Shared)
            })
            .map(|(j, _)| j)
            .collect()
    }
}

/// A seeded sinusoid-sum map from `inputs` latent coordinates to one output.
#[derive(Debug, Clone)]
struct SmoothMap {
    terms: Vec<(f64, Vec<f64>, f64)>,
}

impl SmoothMap {
    fn draw(rng: &mut SeededRng, inputs: usize) -> Self {
        let terms = (0..SINUSOIDS_PER_MAP)
            .map(|_| {
                let a = rng.normal();
                let omega = (0..inputs).map(|_| rng.normal()).collect();
                let phi = rng.uniform_range(0.0, 2.0 * PI);
                (a, omega, phi)
            })
            .collect();
        Self { terms }
    }

    fn eval(&self, u: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(a, omega, phi)| {
                let arg: f64 = omega.iter().zip(u).map(|(w, x)| w * x).sum::<f64>() + phi;
                a * arg.sin()
            })
            .sum()
    }
}

fn render(latents: &DMatrix<f64>, drivers: &[Vec<usize>], maps: &[SmoothMap]) -> DMatrix<f64> {
    DMatrix::from_fn(latents.nrows(), drivers.len(), |i, j| {
        let u: Vec<f64> = drivers[j].iter().map(|&k| latents[(i, k)]).collect();
        maps[j].eval(&u)
    })
}

fn add_noise(clean: &DMatrix<f64>, noise_std: f64, rng: &mut SeededRng) -> DMatrix<f64> {
    let mut noisy = clean.clone();
    for i in 0..noisy.nrows() {
        for j in 0..noisy.ncols() {
            noisy[(i, j)] += noise_std * rng.normal();
        }
    }
    noisy
}

fn check_noise(noise_std: f64) -> Result<()> {
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(MrdError::invalid(format!(
            "noise_std must be a non-negative number, got {noise_std}"
        )));
    }
    Ok(())
}

fn unit_grid(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

/// Column 0 is `sin(2πi/n)`; every further column is the same values under a
/// seeded permutation, orthogonalized against the earlier columns and
/// rescaled to column 0's norm.
fn shuffled_signals(n: usize, k: usize, rng: &mut SeededRng) -> DMatrix<f64> {
    let base: Vec<f64> = (0..n)
        .map(|i| (2.0 * PI * i as f64 / n as f64).sin())
        .collect();
    let mut x = DMatrix::zeros(n, k);
    x.set_column(0, &nalgebra::DVector::from_column_slice(&base));
    let norm0 = x.column(0).norm();
    for c in 1..k {
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.index(i + 1));
        }
        let mut v = nalgebra::DVector::from_iterator(n, perm.iter().map(|&p| base[p]));
        v.add_scalar_mut(-v.mean());
        for j in 0..c {
            let u = x.column(j).into_owned();
            v -= &u * (u.dot(&v) / u.norm_squared());
        }
        let norm = v.norm();
        x.set_column(c, &(v * (norm0 / norm)));
    }
    x
}

/// One shared and one private-per-view latent signal. The shared signal is
/// `sin(2πt)` on a uniform grid `t_i = i/N`; each private signal is the same
/// sinusoid read through its own seeded shuffle of the grid, then
/// Gram-Schmidt orthogonalized against the signals before it (and rescaled to
/// the shared signal's spread). The three signals therefore have zero sample
/// correlation and no private signal is a function of another signal.
///
/// In each view the first `⌈D/2⌉` columns depend on the shared signal only
/// and the rest on the shared and the view's private signal.
pub fn gen_shared_private(
    n: usize,
    d_y: usize,
    d_z: usize,
    noise_std: f64,
    seed: u64,
) -> Result<SyntheticBundle> {
    if n < 10 {
        return Err(MrdError::invalid(format!("n must be at least 10, got {n}")));
    }
    if d_y == 0 || d_z == 0 {
        return Err(MrdError::invalid("view dimensions must be positive"));
    }
    check_noise(noise_std)?;
    let mut rng = SeededRng::new(seed);
    let latents = shuffled_signals(n, 3, &mut rng);
    let roles = vec![
        LatentRole::Shared,
        LatentRole::Private("Y".into()),
        LatentRole::Private("Z".into()),
    ];
    let mut views = Vec::new();
    let mut clean_views = Vec::new();
    let mut output_drivers = Vec::new();
    let mut cleans = Vec::new();
    for (name, d, private) in [("Y", d_y, 1usize), ("Z", d_z, 2usize)] {
        let shared_cols = d.div_ceil(2);
        let drivers: Vec<Vec<usize>> = (0..d)
            .map(|j| {
                if j < shared_cols {
                    vec![0]
                } else {
                    vec![0, private]
                }
            })
            .collect();
        let maps: Vec<SmoothMap> = drivers
            .iter()
            .map(|dr| SmoothMap::draw(&mut rng, dr.len()))
            .collect();
        cleans.push((name, render(&latents, &drivers, &maps)));
        output_drivers.push(drivers);
    }
    for (name, clean) in cleans {
        let noisy = add_noise(&clean, noise_std, &mut rng);
        clean_views.push(ViewMatrix::new(name, clean));
        views.push(ViewMatrix::new(name, noisy));
    }
    Ok(SyntheticBundle {
        views,
        clean_views,
        true_latents: latents,
        dimension_roles: roles,
        output_drivers,
        held_out: None,
        generator_config: GeneratorConfig::SharedPrivate {
            n,
            d_y,
            d_z,
            noise_std,
            seed,
        },
    })
}

/// Paired trajectory classes. Row `n` of both views is rendered from the same
/// path variable `u_n` (a uniform grid on `[-1, 1]`, read as the goal the
/// trajectory heads for). Class `c ∈ {S, T}` renders
/// `x_c(u, τ) = u·τ + f_c(u, τ)`: a straight approach to the goal plus the
/// class's own sinusoid deviation map, with `τ = h / (horizon − 1)` the
/// normalized time. Views are flattened `horizon`-length trajectories.
pub fn gen_trajectories(
    n_pairs: usize,
    horizon: usize,
    noise_std: f64,
    seed: u64,
) -> Result<SyntheticBundle> {
    if n_pairs < 10 {
        return Err(MrdError::invalid(format!(
            "n_pairs must be at least 10, got {n_pairs}"
        )));
    }
    if horizon == 0 {
        return Err(MrdError::invalid("horizon must be positive"));
    }
    check_noise(noise_std)?;
    let u: Vec<f64> = unit_grid(n_pairs).iter().map(|t| 2.0 * t - 1.0).collect();
    let latents = DMatrix::from_column_slice(n_pairs, 1, &u);
    let tau = unit_grid(horizon);
    let mut rng = SeededRng::new(seed);
    let mut cleans = Vec::new();
    for name in ["S", "T"] {
        // Each class has one (u, τ) map; columns are that map sampled over time.
        let map = SmoothMap::draw(&mut rng, 2);
        let clean = DMatrix::from_fn(n_pairs, horizon, |i, h| {
            u[i] * tau[h] + map.eval(&[u[i], tau[h]])
        });
        cleans.push((name, clean));
    }
    let mut views = Vec::new();
    let mut clean_views = Vec::new();
    for (name, clean) in cleans {
        views.push(ViewMatrix::new(
            name,
            add_noise(&clean, noise_std, &mut rng),
        ));
        clean_views.push(ViewMatrix::new(name, clean));
    }
    Ok(SyntheticBundle {
        views,
        clean_views,
        true_latents: latents,
        dimension_roles: vec![LatentRole::Shared],
        output_drivers: vec![vec![vec![0]; horizon]; 2],
        held_out: None,
        generator_config: GeneratorConfig::Trajectories {
            n_pairs,
            horizon,
            noise_std,
            seed,
        },
    })
}

/// Two agents (`Y`, `Z`) observing a scene from a shared one-dimensional pose
/// that sweeps `[-1, 1]`, each through its own `d_obs`-output sinusoid map.
/// A third agent follows the continuous path `p(τ) = 0.8·sin(1.5πτ)` over
/// [`THIRD_AGENT_STEPS`] steps and observes through agent `Y`'s map.
pub fn gen_slam_scene(
    n_poses: usize,
    d_obs: usize,
    noise_std: f64,
    seed: u64,
) -> Result<SyntheticBundle> {
    if n_poses < 10 {
        return Err(MrdError::invalid(format!(
            "n_poses must be at least 10, got {n_poses}"
        )));
    }
    if d_obs == 0 {
        return Err(MrdError::invalid("d_obs must be positive"));
    }
    check_noise(noise_std)?;
    let poses: Vec<f64> = unit_grid(n_poses).iter().map(|t| 2.0 * t - 1.0).collect();
    let latents = DMatrix::from_column_slice(n_poses, 1, &poses);
    let track: Vec<f64> = unit_grid(THIRD_AGENT_STEPS)
        .iter()
        .map(|t| 0.8 * (1.5 * PI * t).sin())
        .collect();
    let track_latents = DMatrix::from_column_slice(THIRD_AGENT_STEPS, 1, &track);
    let drivers = vec![vec![0usize]; d_obs];
    let mut rng = SeededRng::new(seed);
    let maps_y: Vec<SmoothMap> = (0..d_obs).map(|_| SmoothMap::draw(&mut rng, 1)).collect();
    let maps_z: Vec<SmoothMap> = (0..d_obs).map(|_| SmoothMap::draw(&mut rng, 1)).collect();
    let clean_y = render(&latents, &drivers, &maps_y);
    let clean_z = render(&latents, &drivers, &maps_z);
    let clean_track = render(&track_latents, &drivers, &maps_y);
    let y = add_noise(&clean_y, noise_std, &mut rng);
    let z = add_noise(&clean_z, noise_std, &mut rng);
    let third = add_noise(&clean_track, noise_std, &mut rng);
    Ok(SyntheticBundle {
        views: vec![ViewMatrix::new("Y", y), ViewMatrix::new("Z", z)],
        clean_views: vec![ViewMatrix::new("Y", clean_y), ViewMatrix::new("Z", clean_z)],
        true_latents: latents,
        dimension_roles: vec![LatentRole::Shared],
        output_drivers: vec![drivers.clone(), drivers],
        held_out: Some(HeldOutSequence {
            observed_as: "Y".into(),
            observations: ViewMatrix::new("third", third),
            latents: track_latents,
        }),
        generator_config: GeneratorConfig::SlamScene {
            n_poses,
            d_obs,
            noise_std,
            seed,
        },
    })
}

/// Regenerates a bundle from its config record.
pub fn regenerate(config: &GeneratorConfig) -> Result<SyntheticBundle> {
    match *config {
        GeneratorConfig::SharedPrivate {
            n,
            d_y,
            d_z,
            noise_std,
            seed,
        } => gen_shared_private(n, d_y, d_z, noise_std, seed),
        GeneratorConfig::Trajectories {
            n_pairs,
            horizon,
            noise_std,
            seed,
        } => gen_trajectories(n_pairs, horizon, noise_std, seed),
        GeneratorConfig::SlamScene {
            n_poses,
            d_obs,
            noise_std,
            seed,
        } => gen_slam_scene(n_poses, d_obs, noise_std, seed),
    }
}

/// Formats a number with 17 significant digits.
pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a header line of column names, then one line per row.
pub fn save_csv(view: &ViewMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(&view.columns).map_err(|e| csv_io(path, e))?;
    for i in 0..view.nrows() {
        let row: Vec<String> = (0..view.ncols())
            .map(|j| format_number(view.values[(i, j)]))
            .collect();
        w.write_record(&row).map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| MrdError::io(path, e))
}

fn csv_io(path: &Path, e: csv::Error) -> MrdError {
    MrdError::io(path, std::io::Error::other(e.to_string()))
}

/// Reads a rectangular numeric CSV with a one-line header. The view is named
/// after the file stem.
pub fn load_csv(path: impl AsRef<Path>) -> Result<ViewMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| MrdError::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_csv(&text, name, path)
}

fn parse_csv(text: &str, name: String, path: &Path) -> Result<ViewMatrix> {
    if text.trim().is_empty() {
        return Err(MrdError::EmptyFile { path: path.into() });
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let columns: Vec<String> = reader
        .headers()
        .map_err(|e| csv_io(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let width = columns.len();
    let mut data = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| csv_io(path, e))?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(rows + 2);
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        if record.len() != width {
            return Err(MrdError::RaggedRow {
                path: path.into(),
                line,
                found: record.len(),
                expected: width,
            });
        }
        for (column, cell) in record.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| MrdError::NonNumeric {
                path: path.into(),
                line,
                column: column + 1,
                cell: cell.to_string(),
            })?;
            data.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(MrdError::EmptyFile { path: path.into() });
    }
    Ok(ViewMatrix {
        name,
        columns,
        values: DMatrix::from_row_slice(rows, width, &data),
    })
}

/// Writes `<stem>.csv` per view, `<stem>.latents.csv`, `<stem>.roles.txt`,
/// the held-out sequence (if any) and `<stem>.config.json` into `dir`.
pub fn save_bundle(
    bundle: &SyntheticBundle,
    dir: impl AsRef<Path>,
    stem: &str,
) -> Result<Vec<String>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| MrdError::io(dir, e))?;
    let mut written = Vec::new();
    let put = |file: String, written: &mut Vec<String>| {
        written.push(file.clone());
        dir.join(file)
    };
    for v in &bundle.views {
        save_csv(v, put(format!("{stem}.{}.csv", v.name), &mut written))?;
    }
    let mut latents = ViewMatrix::new("latent", bundle.true_latents.clone());
    latents.columns = (0..bundle.true_latents.ncols())
        .map(|k| format!("x{k}"))
        .collect();
    save_csv(&latents, put(format!("{stem}.latents.csv"), &mut written))?;
    let roles: String = bundle
        .dimension_roles
        .iter()
        .enumerate()
        .map(|(k, r)| format!("x{k}\t{r}\n"))
        .collect();
    let roles_path = put(format!("{stem}.roles.txt"), &mut written);
    fs::write(&roles_path, roles).map_err(|e| MrdError::io(&roles_path, e))?;
    if let Some(h) = &bundle.held_out {
        save_csv(
            &h.observations,
            put(format!("{stem}.{}.csv", h.observations.name), &mut written),
        )?;
        let mut hl = ViewMatrix::new("latent", h.latents.clone());
        hl.columns = (0..h.latents.ncols()).map(|k| format!("x{k}")).collect();
        save_csv(
            &hl,
            put(
                format!("{stem}.{}.latents.csv", h.observations.name),
                &mut written,
            ),
        )?;
    }
    let cfg_path = put(format!("{stem}.config.json"), &mut written);
    let json = serde_json::to_string_pretty(&bundle.generator_config)?;
    fs::write(&cfg_path, json + "\n").map_err(|e| MrdError::io(&cfg_path, e))?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::pearson;

    #[test]
    fn shared_private_is_deterministic() {
        let a = gen_shared_private(30, 4, 5, 0.1, 7).unwrap();
        let b = gen_shared_private(30, 4, 5, 0.1, 7).unwrap();
        assert_eq!(a, b);
        let c = gen_shared_private(30, 4, 5, 0.1, 8).unwrap();
        assert_ne!(a.views[0].values, c.views[0].values);
    }

    #[test]
    fn shared_private_rejects_small_n() {
        assert!(matches!(
            gen_shared_private(5, 3, 3, 0.0, 0),
            Err(MrdError::InvalidArgument(_))
        ));
    }

    #[test]
    fn signals_nearly_uncorrelated() {
        let b = gen_shared_private(100, 3, 3, 0.0, 1).unwrap();
        let x = &b.true_latents;
        let s: Vec<f64> = x.column(0).iter().copied().collect();
        for k in 1..3 {
            let p: Vec<f64> = x.column(k).iter().copied().collect();
            assert!(pearson(&s, &p).abs() < 0.2);
        }
    }

    #[test]
    fn noise_free_views_are_functions_of_their_drivers() {
        let b = gen_shared_private(40, 4, 4, 0.0, 3).unwrap();
        assert_eq!(b.views, b.clean_views);
        // The first ceil(D/2) columns depend only on the shared signal: rows
        // with equal shared value must have equal outputs.
        let s = b.true_latents.column(0);
        for i in 0..40 {
            for j in 0..40 {
                if (s[i] - s[j]).abs() < 1e-12 {
                    for c in b.shared_driven_columns(0) {
                        assert!(
                            (b.views[0].values[(i, c)] - b.views[0].values[(j, c)]).abs() < 1e-10
                        );
                    }
                }
            }
        }
        assert_eq!(b.shared_driven_columns(0), vec![0, 1]);
    }

    #[test]
    fn trajectories_horizon_one() {
        let b = gen_trajectories(12, 1, 0.0, 2).unwrap();
        assert_eq!(b.views.len(), 2);
        assert_eq!(b.views[0].ncols(), 1);
        assert_eq!(b.dimension_roles, vec![LatentRole::Shared]);
        assert_eq!(b.shared_driven_columns(1), vec![0]);
    }

    #[test]
    fn slam_scene_path_continuous() {
        let b = gen_slam_scene(10, 4, 0.0, 5).unwrap();
        let h = b.held_out.as_ref().unwrap();
        let steps: Vec<f64> = (1..h.latents.nrows())
            .map(|i| (h.latents[(i, 0)] - h.latents[(i - 1, 0)]).abs())
            .collect();
        let med = crate::linalg::median(&steps);
        assert!(steps.iter().cloned().fold(0.0, f64::max) < 2.0 * med);
        let again = gen_slam_scene(10, 4, 0.0, 5).unwrap();
        assert_eq!(b, again);
    }

    #[test]
    fn csv_roundtrip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = SeededRng::new(1);
        let v = ViewMatrix::new("y", DMatrix::from_fn(5, 3, |_, _| rng.normal() * 1e3));
        let p = dir.path().join("y.csv");
        save_csv(&v, &p).unwrap();
        let back = load_csv(&p).unwrap();
        for (a, b) in v.values.iter().zip(back.values.iter()) {
            assert!((a - b).abs() <= 1e-15 * a.abs());
        }
        assert_eq!(back.columns, v.columns);

        let empty = dir.path().join("empty.csv");
        fs::write(&empty, "").unwrap();
        assert!(matches!(load_csv(&empty), Err(MrdError::EmptyFile { .. })));

        let ragged = dir.path().join("ragged.csv");
        fs::write(&ragged, "a,b\n1,2\n3\n").unwrap();
        match load_csv(&ragged) {
            Err(MrdError::RaggedRow { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected ragged-row error, got {other:?}"),
        }

        let bad = dir.path().join("bad.csv");
        fs::write(&bad, "a,b\n1,x\n").unwrap();
        assert!(matches!(
            load_csv(&bad),
            Err(MrdError::NonNumeric {
                line: 2,
                column: 2,
                ..
            })
        ));
    }
}
