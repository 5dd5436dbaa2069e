//! Acceptance gate: eleven end-to-end checks covering the detector, the
//! campaign harness and the sampling statistics. Each check prints a single
//! PASS/FAIL line (visible with `cargo test --test acceptance -- --nocapture`)
//! and the test fails if any check does.

use capdetect::channels::zoo;
use capdetect::detection::{
    coherent_information, detect, first_order_corrections, kernel_projector, maximize_ic,
    perturbation_curve, trace_gap, DetectConfig, EpsGrid, Verdict,
};
use capdetect::harness::boundary_check;
use capdetect::numkernel::{hermitian_eig, outer, svd_rank, CMatrix};
use capdetect::sampling::{
    ginibre, haar_isometry, random_pure_state, sample_channel, GaussianSource, SeededStream,
};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

struct Campaign {
    records: String,
    summary: serde_json::Value,
    wall: Duration,
    _dir: tempfile::TempDir,
}

fn run_mc(d: usize, d_out: usize, d_env: usize, n: usize, seed: u64, threads: usize) -> Campaign {
    let dir = tempfile::tempdir().expect("tempdir");
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_capdetect"))
        .args([
            "mc",
            "--d",
            &d.to_string(),
            "--dout",
            &d_out.to_string(),
            "--denv",
            &d_env.to_string(),
            "--n",
            &n.to_string(),
            "--seed",
            &seed.to_string(),
            "--threads",
            &threads.to_string(),
            "--out",
            dir.path().to_str().unwrap(),
        ])
        .output()
        .expect("mc runs");
    let wall = start.elapsed();
    assert!(
        out.status.success(),
        "mc --d {d} --dout {d_out} --denv {d_env} --seed {seed} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let records = std::fs::read_to_string(dir.path().join("records.csv")).expect("records.csv");
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("summary.json")).expect("summary.json"),
    )
    .expect("summary parses");
    Campaign { records, summary, wall, _dir: dir }
}

fn frac(c: &Campaign, key: &str) -> f64 {
    c.summary[key].as_f64().unwrap_or_else(|| panic!("summary key {key}"))
}

/// `(max_rank_found, d_star_out, d_star_env)` for every data row.
fn rank_columns(records: &str) -> Vec<(usize, usize, usize)> {
    records
        .lines()
        .skip(1)
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            (f[7].parse().unwrap(), f[5].parse().unwrap(), f[6].parse().unwrap())
        })
        .collect()
}

fn nonzero_spectrum(m: &CMatrix) -> Vec<f64> {
    hermitian_eig(m).unwrap().eigenvalues.into_iter().filter(|l| l.abs() > 1e-12).collect()
}

fn check(ok: bool, msg: String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg)
    }
}

fn c01_dout_gt_denv(c1: &Campaign) -> Result<(), String> {
    let f = frac(c1, "fraction_channel_positive");
    check(f >= 0.99, format!("fraction_channel_positive = {f}, need >= 0.99"))?;
    check(
        c1.wall <= Duration::from_secs(60),
        format!("campaign took {:.1}s, budget 60s", c1.wall.as_secs_f64()),
    )
}

fn c02_dout_lt_denv(c2: &Campaign) -> Result<(), String> {
    let f = frac(c2, "fraction_complement_positive");
    check(f >= 0.99, format!("fraction_complement_positive = {f}, need >= 0.99"))
}

fn c03_flat_measure_regime(c3: &Campaign) -> Result<(), String> {
    let f = frac(c3, "fraction_complement_positive");
    check(f >= 0.99, format!("fraction_complement_positive = {f}, need >= 0.99"))?;
    let b = boundary_check(2, 200, 44).map_err(|e| e.to_string())?;
    check(
        b.interior_fraction == 1.0,
        format!("interior fraction {} over 200 flat-measure samples", b.interior_fraction),
    )?;
    check(
        b.complement_positive_fraction >= 0.99,
        format!("complement-positive fraction {} on interior samples", b.complement_positive_fraction),
    )
}

fn c04_minimal_dims_formulas() -> Result<(), String> {
    for (t, &(d, dout, denv)) in [(3, 4, 2), (3, 2, 4), (2, 2, 4)].iter().enumerate() {
        for i in 0..1000u64 {
            let ch = sample_channel(d, dout, denv, SeededStream::new(400 + t as u64, i))
                .map_err(|e| e.to_string())?;
            let dims = ch.minimal_dims().map_err(|e| e.to_string())?;
            let want_out = dout.min(d * denv);
            let want_env = denv.min(d * dout);
            check(
                dims.d_star_out == want_out && dims.d_star_env == want_env,
                format!(
                    "({d},{dout},{denv}) sample {i}: d* = ({}, {}), want ({want_out}, {want_env})",
                    dims.d_star_out, dims.d_star_env
                ),
            )?;
        }
    }
    Ok(())
}

fn c05_complementary_spectra() -> Result<(), String> {
    let dims = [(2, 2, 2), (3, 4, 2), (3, 2, 4), (2, 3, 3), (4, 2, 3)];
    let mut src = GaussianSource::new(SeededStream::new(500, 1_000_000));
    for i in 0..10_000u64 {
        let (d, dout, denv) = dims[(i % dims.len() as u64) as usize];
        let ch = sample_channel(d, dout, denv, SeededStream::new(500, i))
            .map_err(|e| e.to_string())?;
        let psi = random_pure_state(d, &mut src);
        let rho = outer(&psi, &psi);
        let out = nonzero_spectrum(&ch.apply(&rho).map_err(|e| e.to_string())?);
        let env = nonzero_spectrum(&ch.apply_complement(&rho).map_err(|e| e.to_string())?);
        check(out.len() == env.len(), format!("pair {i}: nonzero counts {} vs {}", out.len(), env.len()))?;
        for (a, b) in out.iter().zip(&env) {
            check((a - b).abs() <= 1e-10, format!("pair {i}: spectra differ, {a} vs {b}"))?;
        }
        let ic = coherent_information(&ch, &rho).map_err(|e| e.to_string())?;
        check(ic.abs() <= 1e-9, format!("pair {i}: |I_c(pure)| = {:.3e}", ic.abs()))?;
    }
    Ok(())
}

fn c06_slope_matches_gap() -> Result<(), String> {
    let grid = EpsGrid::default();
    let sigma = CMatrix::identity(3).scale(1.0 / 3.0);
    let mut fitted = 0;
    for i in 0..50u64 {
        let ch = sample_channel(3, 4, 2, SeededStream::new(600, i)).map_err(|e| e.to_string())?;
        let report = detect(&ch, &DetectConfig::new(SeededStream::new(601, i)))
            .map_err(|e| e.to_string())?;
        if report.trace_gap.abs() <= 0.05 {
            continue;
        }
        let psi = report.witness_psi.as_ref().ok_or_else(|| format!("channel {i}: no witness"))?;
        let curve =
            perturbation_curve(&ch, psi, &sigma, &grid).map_err(|e| e.to_string())?;
        let rel = (curve.fitted_slope - report.trace_gap).abs() / report.trace_gap.abs();
        check(
            rel <= 0.05,
            format!(
                "channel {i}: fitted {:.5} vs gap {:.5}, relative error {:.3}",
                curve.fitted_slope, report.trace_gap, rel
            ),
        )?;
        fitted += 1;
    }
    check(fitted >= 25, format!("only {fitted}/50 channels had |gap| > 0.05"))
}

fn c07_first_order_identity_and_tracking() -> Result<(), String> {
    let dims = [(3, 4, 2), (3, 2, 4), (2, 2, 4), (2, 3, 3)];
    let eps = 1e-5;
    let mut src = GaussianSource::new(SeededStream::new(700, 1_000_000));
    for i in 0..1000u64 {
        let (d, dout, denv) = dims[(i % dims.len() as u64) as usize];
        let ch = sample_channel(d, dout, denv, SeededStream::new(700, i))
            .map_err(|e| e.to_string())?;
        let psi = random_pure_state(d, &mut src);
        let sigma = CMatrix::identity(d).scale(1.0 / d as f64);
        let gap = trace_gap(&ch, &psi, &sigma).map_err(|e| e.to_string())?;
        let corr = first_order_corrections(&ch, &psi, &sigma).map_err(|e| e.to_string())?;
        check(
            (corr.sum_diff() - gap).abs() <= 1e-10,
            format!("instance {i}: sum of rates {} vs gap {}", corr.sum_diff(), gap),
        )?;

        // eigenvalues emerging from the kernel at eps must match eps * rate
        let rho_psi = outer(&psi, &psi);
        let rho_eps = &rho_psi.scale(1.0 - eps) + &sigma.scale(eps);
        for (rates, output, perturbed) in [
            (&corr.channel, ch.apply(&rho_psi), ch.apply(&rho_eps)),
            (&corr.complement, ch.apply_complement(&rho_psi), ch.apply_complement(&rho_eps)),
        ] {
            let output = output.map_err(|e| e.to_string())?;
            let perturbed = perturbed.map_err(|e| e.to_string())?;
            let kp = kernel_projector(&output).map_err(|e| e.to_string())?;
            let rank = output.rows() - kp.kernel_dim;
            let eig = hermitian_eig(&perturbed).map_err(|e| e.to_string())?;
            for (j, &rate) in rates.iter().enumerate() {
                let tracked = eig.eigenvalues[rank + j] / eps;
                check(
                    (tracked - rate).abs() <= 0.01 * rate,
                    format!("instance {i}: tracked rate {tracked} vs first-order {rate}"),
                )?;
            }
        }
    }
    Ok(())
}

fn c08_oracle_channels() -> Result<(), String> {
    let identity = zoo::identity(2).map_err(|e| e.to_string())?;
    let ic = coherent_information(&identity, &CMatrix::identity(2).scale(0.5))
        .map_err(|e| e.to_string())?;
    check((ic - 1.0).abs() <= 1e-9, format!("identity I_c(I/2) = {ic}, want 1.0"))?;

    let erasure = zoo::erasure(2, 0.25).map_err(|e| e.to_string())?;
    let best = maximize_ic(&erasure, 4, 300, SeededStream::new(800, 0))
        .map_err(|e| e.to_string())?;
    check(
        best.ic_lower_bound >= 0.5 - 1e-4 && best.ic_lower_bound <= 0.5 + 1e-6,
        format!("erasure(0.25) maximized I_c = {}, want 0.5", best.ic_lower_bound),
    )?;

    let wh = zoo::werner_holevo(3).map_err(|e| e.to_string())?;
    let report = detect(&wh, &DetectConfig::new(SeededStream::new(801, 0)))
        .map_err(|e| e.to_string())?;
    check(
        report.verdict == Verdict::Inconclusive,
        format!("werner_holevo(3) verdict {}, want inconclusive", report.verdict),
    )?;
    check(
        report.witness_rank == 2,
        format!("werner_holevo(3) max rank found {}, want 2", report.witness_rank),
    )
}

fn c09_rank_bound(campaigns: &[&Campaign]) -> Result<(), String> {
    let mut rows = 0;
    for c in campaigns {
        for (max_rank, d_star_out, d_star_env) in rank_columns(&c.records) {
            check(
                max_rank <= d_star_out.min(d_star_env),
                format!("row with max_rank_found {max_rank} > min({d_star_out}, {d_star_env})"),
            )?;
            rows += 1;
        }
    }
    check(rows >= 1500, format!("only {rows} campaign rows inspected"))
}

fn c10_reproducibility(c1: &Campaign) -> Result<(), String> {
    let rerun = run_mc(3, 4, 2, 500, 42, 4);
    check(rerun.records == c1.records, "rerun records.csv differs from the first run".into())?;
    let one = run_mc(3, 4, 2, 500, 42, 1);
    let eight = run_mc(3, 4, 2, 500, 42, 8);
    check(one.records == c1.records, "1-thread records.csv differs".into())?;
    check(eight.records == c1.records, "8-thread records.csv differs".into())
}

fn c11_sampling_statistics() -> Result<(), String> {
    let g = ginibre(250, 400, SeededStream::new(1100, 0));
    let mean_sq = (0..250)
        .flat_map(|i| (0..400).map(move |j| (i, j)))
        .map(|(i, j)| g[(i, j)].norm_sqr())
        .sum::<f64>()
        / 100_000.0;
    check(
        (mean_sq - 1.0).abs() <= 0.02,
        format!("Ginibre E|z|^2 = {mean_sq} over 1e5 draws, want 1.00 +/- 0.02"),
    )?;

    // |V[0,0]|^2 of a Haar isometry on C^4 follows Beta(1,3)
    let mut samples: Vec<f64> = (0..100_000u64)
        .map(|i| {
            let v = haar_isometry(2, 2, 2, SeededStream::new(1101, i)).expect("isometry");
            v[(0, 0)].norm_sqr()
        })
        .collect();
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    let mut ks = 0.0f64;
    for (i, &x) in samples.iter().enumerate() {
        let cdf = 1.0 - (1.0 - x).powi(3);
        ks = ks.max(((i + 1) as f64 / n - cdf).abs()).max((cdf - i as f64 / n).abs());
    }
    check(ks <= 0.02, format!("Haar marginal KS distance {ks:.4}, want <= 0.02"))?;

    let mut full = 0;
    for s in 0..1000u64 {
        if svd_rank(&ginibre(8, 8, SeededStream::new(1102, s))).map_err(|e| e.to_string())?.rank
            == 8
        {
            full += 1;
        }
    }
    check(full >= 999, format!("Ginibre full-rank frequency {full}/1000, want >= 999"))
}

#[test]
fn acceptance() {
    let c1 = run_mc(3, 4, 2, 500, 42, 4);
    let c2 = run_mc(3, 2, 4, 500, 43, 4);
    let c3 = run_mc(2, 2, 4, 500, 44, 4);

    type Criterion<'a> = (&'a str, Box<dyn FnOnce() -> Result<(), String> + 'a>);
    let criteria: Vec<Criterion> = vec![
        (
            "haar campaign (3,4,2): channel side certified, <= 60s",
            Box::new(|| c01_dout_gt_denv(&c1)),
        ),
        (
            "haar campaign (3,2,4): complement side certified",
            Box::new(|| c02_dout_lt_denv(&c2)),
        ),
        (
            "flat-measure regime (2,2,4) + boundary check interior",
            Box::new(|| c03_flat_measure_regime(&c3)),
        ),
        ("minimal dimensions match min() formulas, 3x1000 samples", Box::new(c04_minimal_dims_formulas)),
        ("complementary spectra + zero pure-state I_c, 10000 pairs", Box::new(c05_complementary_spectra)),
        ("perturbation-curve slope matches trace gap within 5%", Box::new(c06_slope_matches_gap)),
        (
            "first-order rates sum to the gap; eigenvalue tracking at 1e-5",
            Box::new(c07_first_order_identity_and_tracking),
        ),
        ("oracle channels: identity, erasure(0.25), werner_holevo(3)", Box::new(c08_oracle_channels)),
        (
            "max_rank_found never exceeds min(d*_out, d*_env)",
            Box::new(|| c09_rank_bound(&[&c1, &c2, &c3])),
        ),
        ("records.csv byte-identical across reruns and thread counts", Box::new(|| c10_reproducibility(&c1))),
        ("Ginibre moments, Haar marginal KS, full-rank frequency", Box::new(c11_sampling_statistics)),
    ];

    let total = criteria.len();
    let mut failures = Vec::new();
    for (idx, (name, body)) in criteria.into_iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(body)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panicked".into());
            Err(format!("panic: {msg}"))
        });
        match outcome {
            Ok(()) => println!("[{:2}/{total}] PASS {name}", idx + 1),
            Err(msg) => {
                println!("[{:2}/{total}] FAIL {name}: {msg}", idx + 1);
                failures.push(format!("{}: {msg}", idx + 1));
            }
        }
    }
    assert!(failures.is_empty(), "acceptance failures:\n{}", failures.join("\n"));
}
