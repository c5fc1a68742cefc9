//! Acceptance suite. Each criterion prints one `PASS` or `FAIL` line; the
//! process exits non-zero if any criterion fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use framelab::cli::{self, strip_timestamp, RunOptions};
use framelab::equivalence::{certified_margin, check_equivalence, ConditionId, ConditionInstance, EquivalenceStatus};
use framelab::linalg;
use framelab::operators::{
    bessel_bound_with, check_neumann_invertibility_with, lower_bound_with, op_norm_with, FrameSystem,
};
use framelab::oracles::{self, default_resolution};
use framelab::perturbation::{
    hilbert_bounds, verify_atomic_decomposition_perturbation, verify_banach_frame_perturbation,
    verify_frame_perturbation, verify_riesz_perturbation, AtomicMode, MarginStatus, PerturbationConstants, Residual,
    TheoremReport, VerifyOptions,
};
use framelab::SpaceSpec;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const EXPONENTS: [f64; 5] = [1.0, 1.5, 2.0, 3.0, f64::INFINITY];

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn gauss(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

fn exponent(rng: &mut ChaCha8Rng) -> f64 {
    EXPONENTS[rng.random_range(0..EXPONENTS.len())]
}

/// Random `m x n` matrix with condition number at most 8.
fn frame_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<f64> {
    loop {
        let g = gauss(rng, m, n);
        if linalg::sigma_min(&g) * 8.0 >= linalg::sigma_max(&g) {
            return g;
        }
    }
}

/// Perturbation direction with unit Frobenius norm.
fn direction(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<f64> {
    let e = gauss(rng, m, n);
    let f = e.norm();
    e / f
}

fn system(m: &DMatrix<f64>, p: f64, q: f64) -> FrameSystem {
    FrameSystem::new(m.clone(), SpaceSpec::lp(m.ncols(), p), SpaceSpec::lp(m.nrows(), q)).unwrap()
}

fn opts(seed: u64) -> VerifyOptions {
    let mut o = VerifyOptions::default();
    o.optimizer = o.optimizer.with_seed(seed);
    o
}

fn margins_exceed(report: &TheoremReport, eps: f64) -> bool {
    report.margins.iter().all(|m| m.status == MarginStatus::Ok && m.value > eps)
}

/// Best available lower and upper frame bounds: the optimizer and the grid
/// oracle both over-estimate an infimum and under-estimate a supremum.
fn best_bounds(m: &DMatrix<f64>, from: &SpaceSpec, to: &SpaceSpec, o: &VerifyOptions) -> (f64, f64) {
    let res = default_resolution(from.dim);
    let lo = lower_bound_with(m, from, to, &o.optimizer).unwrap().value;
    let hi = op_norm_with(m, from, to, &o.optimizer).unwrap().value;
    let blo = oracles::brute_lower_bound(m, from, to, res).unwrap().value;
    let bhi = oracles::brute_op_norm(m, from, to, res).unwrap().value;
    (lo.min(blo), hi.max(bhi))
}

fn rel_close(x: f64, y: f64, rel: f64) -> bool {
    (x - y).abs() <= rel * x.abs().max(y.abs())
}

// ---------------------------------------------------------------------------

fn hilbert_reduction() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0_f64;
    let mut failures = 0;
    for i in 0..50 {
        let n = rng.random_range(1..=5);
        let m = rng.random_range(n..=8);
        let g = frame_matrix(&mut rng, m, n);
        let phi = &g + direction(&mut rng, m, n) * 0.05;
        let a = linalg::sigma_min(&g).powi(2);
        let b = linalg::sigma_max(&g).powi(2);
        let l2 = rng.random_range(0.0..0.9);
        let l1 = rng.random_range(0.0..0.9);
        let mu = rng.random_range(0.0..1.0) * (0.9 - l1) * a.sqrt();
        let k = PerturbationConstants::new(mu, l1, l2).unwrap();
        let report = verify_banach_frame_perturbation(&system(&g, 2.0, 2.0), &system(&phi, 2.0, 2.0), None, &k, &opts(i))
            .unwrap();
        let (hl, hu) = hilbert_bounds(a, b, &k).unwrap();
        let (l, u) = (report.predicted_lower.powi(2), report.predicted_upper.powi(2));
        let err = ((l - hl).abs() / hl.abs()).max((u - hu).abs() / hu.abs());
        worst = worst.max(err);
        if !(rel_close(l, hl, 1e-10) && rel_close(u, hu, 1e-10)) {
            failures += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        failures == 0 && secs < 10.0,
        format!("50 frames, {failures} mismatches, worst relative error {worst:.2e}, {secs:.2} s"),
    )
}

struct FrameCase {
    g: FrameSystem,
    phi: FrameSystem,
    report: TheoremReport,
    opts: VerifyOptions,
}

/// Random `(G, Phi, mu, lambda1, lambda2)` with certified constants and a
/// hypothesis margin above `1e-6`.
fn frame_corpus(count: usize, seed: u64) -> (Vec<FrameCase>, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut rejected = 0;
    while out.len() < count {
        let n = rng.random_range(1..=4);
        let m = rng.random_range(n..=4);
        let (p, q) = (exponent(&mut rng), exponent(&mut rng));
        let gm = frame_matrix(&mut rng, m, n);
        let scale = rng.random_range(0.0..0.3) * linalg::sigma_min(&gm);
        let phim = &gm + direction(&mut rng, m, n) * scale;
        let (g, phi) = (system(&gm, p, q), system(&phim, p, q));
        let o = opts(out.len() as u64 + seed);
        let (l1, l2) = match rng.random_range(0..3) {
            0 => (0.0, 0.0),
            1 => (rng.random_range(0.0..0.05), 0.0),
            _ => (rng.random_range(0.0..0.05), rng.random_range(0.0..0.05)),
        };
        let r = Residual::dual_synthesis(&g, &phi).unwrap();
        let opt = r.minimal_mu(l1, l2, &o.optimizer).unwrap();
        let grid = oracles::brute_minimal_mu(&g, &phi, l1, l2, default_resolution(m)).unwrap().value;
        let k = PerturbationConstants::new(certified_margin(opt.max(grid)), l1, l2).unwrap();
        if r.worst_case(&k, &o.optimizer).unwrap() > 0.0 {
            rejected += 1;
            continue;
        }
        let report = verify_frame_perturbation(&g, &phi, &k, &o).unwrap();
        if !margins_exceed(&report, 1e-6) || !report.residual.holds {
            rejected += 1;
            continue;
        }
        out.push(FrameCase { g, phi, report, opts: o });
    }
    (out, rejected)
}

fn frame_soundness(corpus: &[FrameCase], build_secs: f64) -> Outcome {
    let start = Instant::now();
    let mut ok = 0;
    let mut worst = f64::NEG_INFINITY;
    for c in corpus {
        let (lo, hi) = best_bounds(&c.phi.matrix, &c.phi.space_x, &c.phi.space_xd, &c.opts);
        let slack = (lo - (c.report.predicted_lower - 1e-6)).min(c.report.predicted_upper + 1e-6 - hi);
        worst = worst.max(-slack);
        if slack >= 0.0 {
            ok += 1;
        }
    }
    let secs = build_secs + start.elapsed().as_secs_f64();
    outcome(
        ok == corpus.len() && secs < 60.0,
        format!("{ok}/{} inside [A - Delta, B + Delta], least slack {:.3e}, {secs:.2} s", corpus.len(), -worst),
    )
}

fn bessel_difference(corpus: &[FrameCase]) -> Outcome {
    let mut ok = 0;
    let mut least = f64::INFINITY;
    for c in corpus {
        let diff = c.g.difference(&c.phi).unwrap();
        let opt = bessel_bound_with(&diff, &c.opts.optimizer).unwrap().value;
        let res = default_resolution(diff.space_x.dim);
        let grid = oracles::brute_op_norm(&diff.matrix, &diff.space_x, &diff.space_xd, res).unwrap().value;
        let slack = c.report.delta + 1e-6 - opt.max(grid);
        least = least.min(slack);
        if slack >= 0.0 {
            ok += 1;
        }
    }
    outcome(ok == corpus.len(), format!("{ok}/{} with ||Phi - G|| <= Delta, least slack {least:.3e}", corpus.len()))
}

fn riesz_refinement() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let (mut done, mut ok, mut rejected) = (0, 0, 0);
    let mut least = f64::INFINITY;
    while done < 100 {
        let n = rng.random_range(1..=4);
        let (p, q) = (exponent(&mut rng), exponent(&mut rng));
        let fm = frame_matrix(&mut rng, n, n);
        let psim = &fm + direction(&mut rng, n, n) * rng.random_range(0.0..0.3) * linalg::sigma_min(&fm);
        let (f, psi) = (system(&fm, p, q), system(&psim, p, q));
        let o = opts(done as u64 + 404);
        let (l1, l2) = (rng.random_range(0.0..0.05), rng.random_range(0.0..0.05));
        let r = Residual::synthesis(&f, &psi).unwrap();
        let opt = r.minimal_mu(l1, l2, &o.optimizer).unwrap();
        // Grid sup of the synthesis residual over the unit sphere of X_d.
        let (xs, xds) = (f.space_x, f.space_xd);
        let (ft, pt) = (fm.transpose(), psim.transpose());
        let dt = &pt - &ft;
        let grid = oracles::brute_sup(n, xds.p, default_resolution(n), 0.0, |c| {
            let c = DVector::from_column_slice(c);
            let nrm = |v: DVector<f64>| xs.p.norm(v.as_slice());
            nrm(&dt * &c) - l1 * nrm(&ft * &c) - l2 * nrm(&pt * &c)
        })
        .unwrap()
        .value;
        let k = PerturbationConstants::new(certified_margin(opt.max(grid).max(0.0)), l1, l2).unwrap();
        let report = verify_riesz_perturbation(&f, &psi, &k, &o).unwrap();
        if !report.residual.holds || !margins_exceed(&report, 1e-6) {
            rejected += 1;
            continue;
        }
        done += 1;
        let a = report.reference["A"];
        let refined = a - (a * (l1 + l2) + k.mu) / (1.0 + l2);
        let actual = report.actual_lower.as_ref().unwrap().value.min(
            oracles::brute_lower_bound(&pt, &xds, &xs, default_resolution(n)).unwrap().value,
        );
        let sharper = refined >= a - report.delta;
        let slack = actual - (refined - 1e-6);
        least = least.min(slack);
        if sharper && slack >= 0.0 && (refined - report.predicted_lower).abs() <= 1e-12 * a.max(1.0) {
            ok += 1;
        }
    }
    let _ = rejected;
    outcome(ok == 100, format!("{ok}/100 with A~ >= A - Delta and actual lower >= A~, least slack {least:.3e}"))
}

fn atomic_reconstruction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let (mut done, mut ok) = (0, 0);
    let (mut worst_recon, mut least) = (0.0_f64, f64::INFINITY);
    while done < 100 {
        let n = rng.random_range(1..=4);
        let m = rng.random_range(n..=4);
        let (p, q) = (exponent(&mut rng), exponent(&mut rng));
        let gm = frame_matrix(&mut rng, m, n);
        let fm = linalg::pinv(&gm).unwrap().transpose();
        let psim = &fm + direction(&mut rng, m, n) * rng.random_range(0.0..0.3) * linalg::sigma_min(&fm);
        let (g, f, psi) = (system(&gm, p, q), system(&fm, p, q), system(&psim, p, q));
        let o = opts(done as u64 + 505);
        let (l1, l2) = (rng.random_range(0.0..0.05), rng.random_range(0.0..0.05));
        let r = Residual::restricted(&g, &f, &psi, m).unwrap();
        let opt = r.minimal_mu(l1, l2, &o.optimizer).unwrap();
        let (xs, xds) = (g.space_x, g.space_xd);
        let (ft, pt) = (fm.transpose(), psim.transpose());
        let dt = &pt - &ft;
        let grid = oracles::brute_sup(n, xs.p, default_resolution(n), 0.0, |x| {
            let x = DVector::from_column_slice(x);
            let c = &gm * &x;
            let nrm = |v: DVector<f64>| xs.p.norm(v.as_slice());
            (nrm(&dt * &c) - l1 * nrm(&ft * &c) - l2 * nrm(&pt * &c)) / xds.p.norm(c.as_slice())
        })
        .unwrap()
        .value;
        let k = PerturbationConstants::new(certified_margin(opt.max(grid).max(0.0)), l1, l2).unwrap();
        let report = verify_atomic_decomposition_perturbation(&g, &f, &psi, &k, AtomicMode::Full, &o).unwrap();
        if !report.residual.holds || !margins_exceed(&report, 1e-6) {
            continue;
        }
        done += 1;
        let theta = &report.witness.as_ref().expect("Theta is constructed").matrix;
        // Independent samples: sum theta_i(f) psi_i against f.
        let mut recon = 0.0_f64;
        for _ in 0..100 {
            let x = DVector::from_fn(n, |_, _| rng.sample(StandardNormal));
            let y = &pt * (theta * &x);
            recon = recon.max(xs.p.norm((&x - y).as_slice()) / xs.p.norm(x.as_slice()));
        }
        worst_recon = worst_recon.max(recon);
        let (lo, hi) = best_bounds(theta, &xs, &xds, &o);
        let slack = (lo - (report.predicted_lower - 1e-6)).min(report.predicted_upper + 1e-6 - hi);
        least = least.min(slack);
        if recon <= 1e-8 && slack >= 0.0 {
            ok += 1;
        }
    }
    outcome(
        ok == 100,
        format!("{ok}/100, worst reconstruction error {worst_recon:.2e}, least bound slack {least:.3e}"),
    )
}

fn neumann_bracket() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let (mut certified, mut ok) = (0, 0);
    let mut least = f64::INFINITY;
    for i in 0..100 {
        let n = rng.random_range(1..=4);
        let s = SpaceSpec::lp(n, exponent(&mut rng));
        let o = opts(606 + i);
        let nm = gauss(&mut rng, n, n);
        let norm = op_norm_with(&nm, &s, &s, &o.optimizer).unwrap().certified_high;
        let g = DMatrix::identity(n, n) + nm * (rng.random_range(0.05..0.95) / norm);
        let Some(cert) = check_neumann_invertibility_with(&g, &s, &o.optimizer).unwrap() else { continue };
        certified += 1;
        let mut good = true;
        for _ in 0..100 {
            let x = DVector::from_fn(n, |_, _| rng.sample(StandardNormal));
            let y = g.clone().lu().solve(&x).expect("invertible");
            let ratio = s.p.norm(y.as_slice()) / s.p.norm(x.as_slice());
            least = least.min((ratio - cert.inverse_lower).min(cert.inverse_upper - ratio));
            good &= cert.contains(ratio, 1e-9);
        }
        if good {
            ok += 1;
        }
    }
    outcome(
        ok == certified && certified > 0,
        format!("{ok}/{certified} certified matrices bracket all 100 ratios, least slack {least:.3e}"),
    )
}

fn tight_functionals(rng: &mut ChaCha8Rng) -> (DMatrix<f64>, f64, f64) {
    let n = rng.random_range(1..=3);
    let c = rng.random_range(0.5..2.0);
    if rng.random_bool(0.5) {
        // Orthonormal columns scaled by c, in l^2.
        let m = rng.random_range(n..=4);
        let q = gauss(rng, m, n).qr().q();
        (q * c, 2.0, 2.0)
    } else {
        // Two stacked signed permutations, scaled so the frame is tight in l^p.
        let p = exponent(rng);
        let mut g = DMatrix::zeros(2 * n, n);
        for block in 0..2 {
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            for (i, &j) in perm.iter().enumerate() {
                g[(block * n + i, j)] = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            }
        }
        (g * (c * 2f64.powf(-1.0 / p)), p, p)
    }
}

fn isometric_vectors(rng: &mut ChaCha8Rng) -> (DMatrix<f64>, f64, f64) {
    let n = rng.random_range(1..=4);
    let c = rng.random_range(0.5..2.0);
    if rng.random_bool(0.5) {
        let q = gauss(rng, n, n).qr().q();
        (q * c, 2.0, 2.0)
    } else {
        let p = exponent(rng);
        let mut f = DMatrix::zeros(n, n);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        for (i, &j) in perm.iter().enumerate() {
            f[(i, j)] = if rng.random_bool(0.5) { c } else { -c };
        }
        (f, p, p)
    }
}

fn translation_case(rng: &mut ChaCha8Rng, source: ConditionId, seed: u64) -> Option<(ConditionInstance, PerturbationConstants)> {
    use ConditionId::*;
    let o = opts(seed);
    let (l1, l2) = (rng.random_range(0.0..0.05), rng.random_range(0.0..0.05));
    let eps = rng.random_range(0.0..0.2);
    let inst = match source {
        A1 | A13 => {
            let n = rng.random_range(1..=4);
            let m = rng.random_range(n..=4);
            let (p, q) = (exponent(rng), exponent(rng));
            let fm = frame_matrix(rng, m, n);
            let psim = &fm + direction(rng, m, n) * eps * linalg::sigma_min(&fm);
            ConditionInstance::vectors(system(&fm, p, q), system(&psim, p, q))
        }
        A6 => {
            let (gm, p, q) = tight_functionals(rng);
            let (m, n) = gm.shape();
            let phim = &gm + direction(rng, m, n) * eps * linalg::sigma_min(&gm);
            ConditionInstance::functionals(system(&gm, p, q), system(&phim, p, q))
        }
        A8 => {
            let (fm, p, q) = isometric_vectors(rng);
            let (m, n) = fm.shape();
            let psim = &fm + direction(rng, m, n) * eps * linalg::sigma_min(&fm);
            ConditionInstance::vectors(system(&fm, p, q), system(&psim, p, q))
        }
        A9 => {
            let n = rng.random_range(1..=4);
            let m = rng.random_range(n..=4);
            let (p, q) = (exponent(rng), exponent(rng));
            let gm = frame_matrix(rng, m, n);
            let fm = linalg::pinv(&gm).unwrap().transpose();
            let psim = &fm + direction(rng, m, n) * eps * linalg::sigma_min(&fm);
            ConditionInstance::decomposition(system(&gm, p, q), system(&fm, p, q), system(&psim, p, q))
        }
        _ => unreachable!(),
    };
    let residual = match source.form() {
        framelab::perturbation::ResidualForm::Synthesis => {
            Residual::synthesis(inst.f.as_ref()?, inst.psi.as_ref()?)
        }
        framelab::perturbation::ResidualForm::Coefficient => {
            Residual::coefficient(inst.f.as_ref()?, inst.psi.as_ref()?)
        }
        framelab::perturbation::ResidualForm::DualSynthesis => {
            Residual::dual_synthesis(inst.g.as_ref()?, inst.phi.as_ref()?)
        }
        _ => {
            let g = inst.g.as_ref()?;
            Residual::restricted(g, inst.f.as_ref()?, inst.psi.as_ref()?, g.len())
        }
    }
    .ok()?;
    let mu = residual.minimal_mu(l1, l2, &o.optimizer).ok()?;
    Some((inst, PerturbationConstants::new(certified_margin(mu), l1, l2).ok()?))
}

fn translation_soundness() -> Outcome {
    use ConditionId::*;
    let pairs = [(A1, A11), (A13, A12), (A6, A6tilde), (A8, A8tilde), (A9, A9tilde)];
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut total = 0;
    let mut parts = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for (a, b) in pairs {
        let (mut done, mut ok, mut attempts) = (0, 0, 0);
        while done < 100 && attempts < 5000 {
            attempts += 1;
            let seed = 707 + attempts as u64;
            let Some((inst, k)) = translation_case(&mut rng, a, seed) else { continue };
            let Ok(report) = check_equivalence(&inst, a, &k, b, &opts(seed)) else { continue };
            if !report.source.holds {
                continue;
            }
            done += 1;
            let target = report.target.as_ref().expect("source holds");
            worst = worst.max(target.residual);
            if target.residual <= 1e-8 && report.status == EquivalenceStatus::Confirmed {
                ok += 1;
            } else if std::env::var("FRAMELAB_DEBUG").is_ok() {
                eprintln!("{a}->{b} seed {seed}: k {k:?} target {target:?} g {:?} phi {:?}", inst.g, inst.phi);
            }
        }
        total += ok;
        parts.push(format!("{a}->{b} {ok}/{done}"));
    }
    outcome(
        total == 500,
        format!("{total}/500 ({}), worst target residual {worst:.2e}", parts.join(", ")),
    )
}

fn oracle_agreement() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut ok = 0;
    let mut worst = f64::NEG_INFINITY;
    for i in 0..50 {
        let n = rng.random_range(1..=3);
        let m = rng.random_range(1..=3);
        let (from, to) = (SpaceSpec::lp(n, exponent(&mut rng)), SpaceSpec::lp(m, exponent(&mut rng)));
        let a = gauss(&mut rng, m, n);
        let cfg = opts(808 + i).optimizer;
        let res = default_resolution(n);
        let on = op_norm_with(&a, &from, &to, &cfg).unwrap().value;
        let bn = oracles::brute_op_norm(&a, &from, &to, res).unwrap();
        let ol = lower_bound_with(&a, &from, &to, &cfg).unwrap().value;
        let bl = oracles::brute_lower_bound(&a, &from, &to, res).unwrap();
        let e1 = (on - bn.value).abs() - 1e-3 * bn.value.abs() - bn.gap_bound;
        let e2 = (ol - bl.value).abs() - 1e-3 * bl.value.abs() - bl.gap_bound;
        worst = worst.max(e1).max(e2);
        if e1 <= 0.0 && e2 <= 0.0 {
            ok += 1;
        }
    }
    outcome(ok == 50, format!("{ok}/50 agree, worst excess {worst:.3e}"))
}

fn determinism(jobs_dir: &Path) -> Outcome {
    let mut names: Vec<_> = std::fs::read_dir(jobs_dir)
        .unwrap()
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    names.sort();
    let tmp = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_framelab");
    let mut same = 0;
    let mut bad = Vec::new();
    for (i, job) in names.iter().enumerate() {
        let mut runs = Vec::new();
        for r in 0..2 {
            let out = tmp.path().join(format!("{i}-{r}"));
            let status = Command::new(bin)
                .args(["run", job.to_str().unwrap(), "--out", out.to_str().unwrap()])
                .env_remove("FRAMELAB_SEED")
                .output()
                .unwrap();
            let json = std::fs::read_to_string(out.join("report.json")).unwrap_or_default();
            runs.push((status.status.code(), strip_timestamp(&json)));
        }
        // A third run through the library API must match as well.
        let lib = cli::run_job(job, &RunOptions { out_dir: Some(tmp.path().join(format!("{i}-lib"))), ..Default::default() })
            .map(|o| strip_timestamp(&o.document.to_json()))
            .unwrap_or_default();
        if runs[0].0 == Some(0) && !runs[0].1.is_empty() && runs[0] == runs[1] && lib == runs[0].1 {
            same += 1;
        } else {
            bad.push(job.file_name().unwrap().to_string_lossy().to_string());
        }
    }
    outcome(
        same == names.len() && !names.is_empty(),
        format!("{same}/{} job files reproduce byte-identical reports{}", names.len(), if bad.is_empty() { String::new() } else { format!(" (differ: {})", bad.join(", ")) }),
    )
}

fn main() -> ExitCode {
    let jobs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../jobs");
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut report = |name: &'static str, o: Outcome| {
        println!("{} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        results.push((name, o));
    };

    report("1 hilbert reduction", hilbert_reduction());
    let start = Instant::now();
    let (corpus, rejected) = frame_corpus(200, 202);
    let build = start.elapsed().as_secs_f64();
    println!("     frame corpus: 200 instances ({rejected} rejected) in {build:.2} s");
    report("2 frame perturbation soundness", frame_soundness(&corpus, build));
    report("3 bessel difference bound", bessel_difference(&corpus));
    report("4 riesz refinement", riesz_refinement());
    report("5 atomic reconstruction", atomic_reconstruction());
    report("6 neumann bracket", neumann_bracket());
    report("7 translation soundness", translation_soundness());
    report("8 oracle agreement", oracle_agreement());
    report("9 determinism", determinism(&jobs));

    let failed = results.iter().filter(|(_, o)| !o.passed).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
