//! End-to-end acceptance suite. Runs every criterion at full tolerance and
//! prints one PASS/FAIL line per criterion; exits non-zero if any fails.

use std::time::{Duration, Instant};

use mrd::cli::ModelFile;
use mrd::data::SyntheticBundle;
use mrd::gplvm::{bgplvm_elbo_gradient, gplvm_log_marginal_gradient};
use mrd::linalg::{max_principal_angle, median, pearson};
use mrd::multiview::mrd_elbo_gradient;
use mrd::rng::SeededRng;
use mrd::transfer::default_delta;
use mrd::*;
use nalgebra::{DMatrix, DVector};

const SEEDS: u64 = 10;

struct Outcome {
    pass: bool,
    detail: String,
}

/// Training traces from every fit in the suite, checked by the monotonicity criterion.
#[derive(Default)]
struct Traces(Vec<(String, Vec<(usize, f64)>)>);

impl Traces {
    fn push(&mut self, label: String, trace: &[(usize, f64)]) {
        self.0.push((label, trace.to_vec()));
    }
}

fn config(seed: u64) -> TrainConfig {
    TrainConfig::with_seed(seed)
}

fn holdout_split(n: usize, held: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = SeededRng::derived(seed, 99);
    for i in (1..n).rev() {
        idx.swap(i, rng.index(i + 1));
    }
    let test = idx[..held].to_vec();
    let mut train = idx[held..].to_vec();
    train.sort_unstable();
    (test, train)
}

fn train_views(bundle: &SyntheticBundle, rows: &[usize]) -> Vec<ViewMatrix> {
    bundle.views.iter().map(|v| v.select_rows(rows)).collect()
}

fn col(m: &DMatrix<f64>, k: usize) -> Vec<f64> {
    m.column(k).iter().copied().collect()
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed.as_secs() < limit_secs
}

fn criterion_pca_equivalence(traces: &mut Traces) -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..3u64 {
        let mut rng = SeededRng::new(seed);
        let a = DMatrix::from_fn(50, 2, |_, _| rng.normal());
        let w = DMatrix::from_fn(2, 5, |_, _| rng.normal());
        let y = a * w;
        let model = gplvm_map_fit(
            &ViewMatrix::new("Y", y.clone()),
            2,
            KernelChoice::Linear,
            &config(seed),
        )
        .expect("map fit");
        traces.push(
            format!("pca-equivalence seed {seed}"),
            &model.training_trace,
        );
        let scores = pca(&y, 2).expect("pca").transform(&y);
        worst = worst.max(max_principal_angle(&model.latent.means, &scores));
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: worst < 1e-3 && within(elapsed, 30),
        detail: format!(
            "max principal angle {worst:.2e} rad over 3 seeds (< 1e-3), {:.1}s (< 30s)",
            elapsed.as_secs_f64()
        ),
    }
}

/// Largest `|analytic − fd| / max(|analytic|, |fd|, 1e-8)` over all coordinates.
fn relative_error(analytic: &[f64], fd: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(fd)
        .map(|(a, f)| (a - f).abs() / a.abs().max(f.abs()).max(1e-8))
        .fold(0.0, f64::max)
}

fn central_difference(x0: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut x = x0.to_vec();
    (0..x0.len())
        .map(|i| {
            x[i] = x0[i] + h;
            let up = f(&x);
            x[i] = x0[i] - h;
            let down = f(&x);
            x[i] = x0[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn random_params(rng: &mut SeededRng, q: usize) -> ArdKernelParams {
    let w: Vec<f64> = (0..q).map(|_| rng.uniform_range(0.3, 2.0)).collect();
    ArdKernelParams::new(
        rng.uniform_range(0.5, 2.0),
        &w,
        rng.uniform_range(5.0, 50.0),
    )
    .expect("params")
}

fn random_matrix(rng: &mut SeededRng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.normal())
}

fn random_latent(rng: &mut SeededRng, n: usize, q: usize) -> LatentDistribution {
    let means = random_matrix(rng, n, q);
    let variances = DMatrix::from_fn(n, q, |_, _| rng.uniform_range(0.05, 0.8));
    LatentDistribution::new(means, variances).expect("latent")
}

fn log_marginal_error(seed: u64) -> f64 {
    let mut rng = SeededRng::derived(seed, 7);
    let (n, q, d) = (8, 3, 4);
    let x = random_matrix(&mut rng, n, q);
    let y = random_matrix(&mut rng, n, d);
    let params = random_params(&mut rng, q);
    let (_, g) = gplvm_log_marginal_gradient(&x, &y, KernelChoice::ArdRbf, &params).unwrap();

    let mut flat: Vec<f64> = x.iter().copied().collect();
    flat.push(params.log_signal_variance());
    flat.extend_from_slice(params.log_ard_weights());
    flat.push(params.log_beta());
    let mut analytic: Vec<f64> = g.d_latent.iter().copied().collect();
    analytic.push(g.d_log_signal_variance);
    analytic.extend(&g.d_log_ard_weights);
    analytic.push(g.d_log_beta);

    let fd = central_difference(&flat, 1e-5, |v| {
        let xv = DMatrix::from_column_slice(n, q, &v[..n * q]);
        let p = ArdKernelParams::from_log(
            v[n * q],
            v[n * q + 1..n * q + 1 + q].to_vec(),
            v[n * q + 1 + q],
        );
        gplvm_log_marginal(&xv, &y, KernelChoice::ArdRbf, &p).unwrap()
    });
    relative_error(&analytic, &fd)
}

fn bgplvm_error(seed: u64) -> f64 {
    let mut rng = SeededRng::derived(seed, 8);
    let (n, q, m, d) = (10, 2, 5, 3);
    let model = GplvmModel {
        latent: random_latent(&mut rng, n, q),
        kernel: random_params(&mut rng, q),
        kernel_choice: KernelChoice::ArdRbf,
        inducing: Some(random_matrix(&mut rng, m, q)),
        mode: FitMode::Variational,
        training_trace: Vec::new(),
        data_mean: DVector::zeros(d),
    };
    let y = ViewMatrix::new("Y", random_matrix(&mut rng, n, d));
    let (_, analytic) = bgplvm_elbo_gradient(&model, &y).unwrap();
    let x0 = model.parameters().unwrap();
    let mut probe = model.clone();
    let fd = central_difference(&x0, 1e-5, |v| {
        probe.set_parameters(v).unwrap();
        bgplvm_elbo(&probe, &y).unwrap()
    });
    relative_error(&analytic, &fd)
}

fn mrd_error(seed: u64) -> f64 {
    let mut rng = SeededRng::derived(seed, 9);
    let (n, q, m) = (9, 3, 4);
    let latent = random_latent(&mut rng, n, q);
    let mut views = Vec::new();
    let mut data = Vec::new();
    for (name, d) in [("Y", 3usize), ("Z", 2usize)] {
        let y = random_matrix(&mut rng, n, d);
        let mean = DVector::from_fn(d, |j, _| y.column(j).mean());
        let mut centered = y.clone();
        for j in 0..d {
            centered.column_mut(j).add_scalar_mut(-mean[j]);
        }
        views.push(ViewModel {
            name: name.into(),
            kernel: random_params(&mut rng, q),
            inducing: random_matrix(&mut rng, m, q),
            data: centered,
            mean,
        });
        data.push(ViewMatrix::new(name, y));
    }
    let model = MrdModel {
        latent,
        views,
        training_trace: Vec::new(),
    };
    let (_, analytic) = mrd_elbo_gradient(&model, &data).unwrap();
    let x0 = model.parameters();
    let mut probe = model.clone();
    let fd = central_difference(&x0, 1e-5, |v| {
        probe.set_parameters(v).unwrap();
        mrd_elbo(&probe, &data).unwrap()
    });
    relative_error(&analytic, &fd)
}

fn criterion_gradients() -> Outcome {
    let start = Instant::now();
    let worst = |f: fn(u64) -> f64| (0..SEEDS).map(f).fold(0.0, f64::max);
    let (a, b, c) = (
        worst(log_marginal_error),
        worst(bgplvm_error),
        worst(mrd_error),
    );
    let elapsed = start.elapsed();
    Outcome {
        pass: a < 1e-4 && b < 1e-4 && c < 1e-4 && within(elapsed, 60),
        detail: format!(
            "max relative error: log marginal {a:.2e}, bgplvm {b:.2e}, mrd {c:.2e} (< 1e-4), {:.1}s (< 60s)",
            elapsed.as_secs_f64()
        ),
    }
}

fn frobenius_relative(est: &DMatrix<f64>, exact: &DMatrix<f64>) -> f64 {
    (est - exact).norm() / exact.norm()
}

fn criterion_psi_statistics() -> Outcome {
    let start = Instant::now();
    let samples = 1_000_000usize;
    let mut worst: f64 = 0.0;
    for instance in 0..5u64 {
        let mut rng = SeededRng::derived(instance, 11);
        let (n, q, m) = (3, 2, 3);
        let latent = {
            let means = random_matrix(&mut rng, n, q) * 0.5;
            let variances = DMatrix::from_fn(n, q, |_, _| rng.uniform_range(0.1, 0.6));
            LatentDistribution::new(means, variances).unwrap()
        };
        let inducing = random_matrix(&mut rng, m, q) * 0.5;
        let params = random_params(&mut rng, q);
        let exact = psi_statistics(&latent, &inducing, &params).unwrap();
        let var = params.signal_variance();
        let w = params.ard_weights();
        let k = |x: &[f64], z: usize| {
            let mut s = 0.0;
            for d in 0..q {
                let e = x[d] - inducing[(z, d)];
                s += w[d] * e * e;
            }
            var * (-0.5 * s).exp()
        };
        let mut psi0 = 0.0;
        let mut psi1 = DMatrix::zeros(n, m);
        let mut psi2 = DMatrix::zeros(m, m);
        let mut x = vec![0.0; q];
        let mut kx = vec![0.0; m];
        for _ in 0..samples {
            for i in 0..n {
                for d in 0..q {
                    x[d] = latent.means[(i, d)] + latent.variances[(i, d)].sqrt() * rng.normal();
                }
                // The diagonal of the noise-free kernel is σ² everywhere.
                psi0 += var;
                for (z, slot) in kx.iter_mut().enumerate() {
                    *slot = k(&x, z);
                    psi1[(i, z)] += *slot;
                }
                for a in 0..m {
                    for b in 0..m {
                        psi2[(a, b)] += kx[a] * kx[b];
                    }
                }
            }
        }
        let s = samples as f64;
        let e0 = (psi0 / s - exact.psi0).abs() / exact.psi0;
        let e1 = frobenius_relative(&(psi1 / s), &exact.psi1);
        let e2 = frobenius_relative(&(psi2 / s), &exact.psi2);
        worst = worst.max(e0).max(e1).max(e2);
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: worst < 1e-2 && within(elapsed, 120),
        detail: format!(
            "max relative error {worst:.2e} over 5 instances x 1e6 samples (< 1e-2), {:.1}s (< 120s)",
            elapsed.as_secs_f64()
        ),
    }
}

fn criterion_ard_recovery(traces: &mut Traces) -> Outcome {
    let start = Instant::now();
    let mut hits = 0;
    let mut ratios = Vec::new();
    for seed in 0..SEEDS {
        let bundle = gen_slam_scene(40, 10, 0.05, seed).unwrap();
        let model = bgplvm_fit(&bundle.views[0], 4, &config(seed)).unwrap();
        traces.push(format!("ard-recovery seed {seed}"), &model.training_trace);
        let mut w = model.kernel.ard_weights();
        w.sort_by(|a, b| b.total_cmp(a));
        let ratio = w[0] / w[1];
        ratios.push(format!("{ratio:.1e}"));
        if ratio >= 10.0 {
            hits += 1;
        }
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: hits >= 8 && within(elapsed, 300),
        detail: format!(
            "{hits}/10 seeds with dominant:spurious >= 10 (need 8), ratios [{}], {:.1}s (< 300s)",
            ratios.join(" "),
            elapsed.as_secs_f64()
        ),
    }
}

fn expected_pattern(labels: &[DimensionLabel]) -> bool {
    let count = |l: &DimensionLabel| labels.iter().filter(|x| *x == l).count();
    labels.len() == 4
        && count(&DimensionLabel::Shared) == 1
        && count(&DimensionLabel::Private("Y".into())) == 1
        && count(&DimensionLabel::Private("Z".into())) == 1
        && count(&DimensionLabel::Irrelevant) == 1
}

fn criterion_factorization(traces: &mut Traces) -> Outcome {
    let start = Instant::now();
    let mut hits = 0;
    for seed in 0..SEEDS {
        let bundle = gen_shared_private(60, 12, 12, 0.1, seed).unwrap();
        let model = mrd_fit(&bundle.views, 4, &config(seed)).unwrap();
        traces.push(format!("factorization seed {seed}"), &model.training_trace);
        let report = factorize(&model, 0.1).unwrap();
        if expected_pattern(&report.labels) {
            hits += 1;
        }
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: hits >= 7 && within(elapsed, 600),
        detail: format!(
            "{hits}/10 seeds with exactly one SHARED, PRIVATE(Y), PRIVATE(Z), IRRELEVANT (need 7), {:.1}s (< 600s)",
            elapsed.as_secs_f64()
        ),
    }
}

fn criterion_cross_view(traces: &mut Traces) -> Outcome {
    let mut hits = 0;
    let mut medians = Vec::new();
    for seed in 0..SEEDS {
        let bundle = gen_shared_private(70, 12, 12, 0.1, seed).unwrap();
        let (test, train) = holdout_split(70, 10, seed);
        let model = mrd_fit(&train_views(&bundle, &train), 4, &config(seed)).unwrap();
        traces.push(format!("cross-view seed {seed}"), &model.training_trace);
        let shared = factorize(&model, 0.1).unwrap().shared_dims();
        if shared.is_empty() {
            medians.push("none".to_string());
            continue;
        }
        let delta = default_delta(&model, &shared).unwrap();
        let y_star = bundle.views[0].select_rows(&test).values;
        let result = cross_reconstruct(&model, "Y", &y_star, "Z", delta, &shared).unwrap();
        let columns = bundle.shared_driven_columns(1);
        let z_mean = &model.views[1].mean;
        let rs: Vec<f64> = test
            .iter()
            .enumerate()
            .map(|(r, &t)| {
                let truth: Vec<f64> = columns
                    .iter()
                    .map(|&j| bundle.clean_views[1].values[(t, j)] - z_mean[j])
                    .collect();
                let est: Vec<f64> = columns
                    .iter()
                    .map(|&j| result.reconstruction.mean[(r, j)] - z_mean[j])
                    .collect();
                pearson(&truth, &est)
            })
            .collect();
        let med = median(&rs);
        medians.push(format!("{med:.3}"));
        if med >= 0.9 {
            hits += 1;
        }
    }
    Outcome {
        pass: hits >= 7,
        detail: format!(
            "{hits}/10 seeds with median r >= 0.9 on shared-driven columns (need 7), medians [{}]",
            medians.join(" ")
        ),
    }
}

fn criterion_tracking(traces: &mut Traces) -> Outcome {
    let mut hits = 0;
    let mut worst = Vec::new();
    for seed in 0..SEEDS {
        let bundle = gen_slam_scene(40, 10, 0.05, seed).unwrap();
        let model = mrd_fit(&bundle.views, 3, &config(seed)).unwrap();
        traces.push(format!("tracking seed {seed}"), &model.training_trace);
        let report = factorize(&model, 0.1).unwrap();
        let held = bundle.held_out.as_ref().expect("held-out sweep");
        let posteriors =
            tracking_density(&model, &held.observed_as, &held.observations.values).unwrap();
        let truth = col(&held.latents, 0);
        let active = report.active_dims(&held.observed_as);
        let min_r = active
            .iter()
            .map(|&k| {
                let est: Vec<f64> = posteriors.iter().map(|p| p.means[(0, k)]).collect();
                pearson(&est, &truth).abs()
            })
            .fold(f64::INFINITY, f64::min);
        let ok = !active.is_empty() && min_r >= 0.9;
        worst.push(if active.is_empty() {
            "none".to_string()
        } else {
            format!("{min_r:.3}")
        });
        if ok {
            hits += 1;
        }
    }
    Outcome {
        pass: hits >= 7,
        detail: format!(
            "{hits}/10 seeds with |r| >= 0.9 on every active dimension (need 7), min |r| [{}]",
            worst.join(" ")
        ),
    }
}

fn criterion_mode_transfer(traces: &mut Traces) -> Outcome {
    let (pairs, horizon) = (60, 20);
    let mut hits = 0;
    let mut medians = Vec::new();
    for seed in 0..SEEDS {
        let bundle = gen_trajectories(pairs, horizon, 0.05, seed).unwrap();
        let (test, train) = holdout_split(pairs, 10, seed);
        let model = mrd_fit(&train_views(&bundle, &train), 3, &config(seed)).unwrap();
        traces.push(format!("mode-transfer seed {seed}"), &model.training_trace);
        let t_mean = &model.views[1].mean;
        let mut rs = Vec::new();
        for &t in &test {
            let sample = bundle.views[0].select_rows(&[t]).values;
            let Ok(result) = mode_transfer(&model, "S", "T", &sample, None) else {
                rs.push(f64::NEG_INFINITY);
                continue;
            };
            let truth: Vec<f64> = (0..horizon)
                .map(|j| bundle.clean_views[1].values[(t, j)] - t_mean[j])
                .collect();
            let est: Vec<f64> = (0..horizon)
                .map(|j| result.best_target_sample[(0, j)] - t_mean[j])
                .collect();
            rs.push(pearson(&truth, &est));
        }
        let med = median(&rs);
        medians.push(format!("{med:.3}"));
        if med >= 0.85 {
            hits += 1;
        }
    }
    Outcome {
        pass: hits >= 7,
        detail: format!(
            "{hits}/10 seeds with median r >= 0.85 against the paired target (need 7), medians [{}]",
            medians.join(" ")
        ),
    }
}

fn criterion_monotone(traces: &Traces) -> Outcome {
    let mut steps = 0usize;
    let mut violations = Vec::new();
    for (label, trace) in &traces.0 {
        for pair in trace.windows(2) {
            steps += 1;
            if pair[1].1 < pair[0].1 - 1e-9 {
                violations.push(format!("{label} at iteration {}", pair[1].0));
            }
        }
    }
    Outcome {
        pass: violations.is_empty() && steps > 0,
        detail: format!(
            "{} runs, {steps} accepted steps, {} decreases beyond 1e-9{}",
            traces.0.len(),
            violations.len(),
            violations
                .first()
                .map(|v| format!(" (first: {v})"))
                .unwrap_or_default()
        ),
    }
}

fn bits(m: &DMatrix<f64>) -> Vec<u64> {
    m.iter().map(|v| v.to_bits()).collect()
}

fn brute_force_neighbors(model: &MrdModel, x: &[f64], delta: f64, dims: &[usize]) -> Vec<usize> {
    let mut hits: Vec<(f64, usize)> = (0..model.n())
        .filter_map(|i| {
            let d2: f64 = dims
                .iter()
                .map(|&k| (model.latent.means[(i, k)] - x[k]).powi(2))
                .sum();
            let d = d2.sqrt();
            (d < delta).then_some((d, i))
        })
        .collect();
    hits.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    hits.into_iter().map(|h| h.1).collect()
}

fn criterion_determinism() -> Outcome {
    let mut failures = Vec::new();

    let generators: [fn(u64) -> SyntheticBundle; 3] = [
        |s| gen_shared_private(60, 12, 12, 0.1, s).unwrap(),
        |s| gen_trajectories(50, 20, 0.05, s).unwrap(),
        |s| gen_slam_scene(40, 10, 0.05, s).unwrap(),
    ];
    for (g, generate) in generators.iter().enumerate() {
        let (a, b) = (generate(3), generate(3));
        let same = a
            .views
            .iter()
            .zip(&b.views)
            .all(|(x, y)| bits(&x.values) == bits(&y.values))
            && bits(&a.true_latents) == bits(&b.true_latents);
        if !same {
            failures.push(format!("generator {g} not bit-identical"));
        }
    }

    let bundle = gen_shared_private(40, 8, 8, 0.1, 5).unwrap();
    let cfg = TrainConfig {
        max_iterations: 300,
        ..config(5)
    };
    let columns: Vec<Vec<String>> = bundle.views.iter().map(|v| v.columns.clone()).collect();
    let serialize = || {
        let model = mrd_fit(&bundle.views, 3, &cfg).unwrap();
        let json = ModelFile::from_mrd(&model, &columns, &cfg)
            .to_json()
            .unwrap();
        (model, json)
    };
    let (model, first) = serialize();
    let (_, second) = serialize();
    if first != second {
        failures.push("serialized models differ".into());
    }
    let restored = ModelFile::from_json(&first).unwrap().to_mrd().unwrap();
    let elbo_gap = (restored.training_elbo().unwrap() - model.training_elbo().unwrap()).abs();
    if !(elbo_gap <= 1e-10) {
        failures.push(format!("save/load ELBO gap {elbo_gap:.2e}"));
    }

    let mut rng = SeededRng::derived(5, 123);
    let mut mismatches = 0;
    for query in 0..100 {
        let dims: Vec<usize> = match query % 3 {
            0 => vec![0],
            1 => vec![0, 2],
            _ => (0..model.q()).collect(),
        };
        let x = DMatrix::from_fn(1, model.q(), |_, _| rng.normal());
        let delta = rng.uniform_range(0.05, 1.5);
        let got = nearest_neighbors(&model, &x, delta, &dims).unwrap();
        let want = brute_force_neighbors(&model, x.row(0).clone_owned().as_slice(), delta, &dims);
        if got[0] != want {
            mismatches += 1;
        }
    }
    if mismatches > 0 {
        failures.push(format!(
            "{mismatches}/100 neighbor queries differ from brute force"
        ));
    }

    Outcome {
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            format!(
                "bit-identical data, byte-identical models, ELBO gap {elbo_gap:.1e}, 100/100 neighbor queries exact"
            )
        } else {
            failures.join("; ")
        },
    }
}

fn main() {
    let mut traces = Traces::default();
    let results = vec![
        (1, "PCA equivalence", criterion_pca_equivalence(&mut traces)),
        (2, "gradient integrity", criterion_gradients()),
        (3, "psi statistics", criterion_psi_statistics()),
        (
            4,
            "ARD dimensionality recovery",
            criterion_ard_recovery(&mut traces),
        ),
        (
            5,
            "factorization recovery",
            criterion_factorization(&mut traces),
        ),
        (
            6,
            "cross-view reconstruction",
            criterion_cross_view(&mut traces),
        ),
        (7, "tracking density", criterion_tracking(&mut traces)),
        (8, "mode transfer", criterion_mode_transfer(&mut traces)),
    ];
    let mut results = results;
    results.push((9, "monotone training", criterion_monotone(&traces)));
    results.push((10, "determinism and round-trip", criterion_determinism()));

    let mut failed = 0;
    for (id, name, outcome) in &results {
        let status = if outcome.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {status}: {name}: {}", outcome.detail);
        if !outcome.pass {
            failed += 1;
        }
    }
    println!(
        "acceptance: {}/{} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
