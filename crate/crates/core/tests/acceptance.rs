//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any criterion fails. The full-scale reproduction (criterion 8) only runs
//! with `--include-ignored` or `RIS_RSMA_SLOW=1`.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use ris_rsma::ao::{alternating_optimize, warm_start_dominance, AoInit, AoOptions, SchemeSpec};
use ris_rsma::channel::{draw_realization, ChannelRealization, Scenario};
use ris_rsma::experiment::{power_from_snr_db, run, summarize, ExperimentConfig, GainPair, ResultRow};
use ris_rsma::linalg::random_cvector;
use ris_rsma::rates::rates_for_channels;
use ris_rsma::ris::{validate_scattering, Architecture, ReactanceVector, DEFAULT_Z0};
use ris_rsma::wmmse::{random_beamformers, MultipleAccess, WmmseState};
use ris_rsma::{CMatrix, CVector, C64};

struct Outcome {
    pass: bool,
    detail: String,
}

fn within(elapsed: Duration, budget_s: f64) -> bool {
    elapsed.as_secs_f64() < budget_s
}

fn scattering_feasibility() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let (mut unitarity, mut symmetry) = (0.0f64, 0.0f64);
    for n in [1, 2, 8, 32] {
        for _ in 0..1000 {
            let x = ReactanceVector::random(Architecture::Fully, n, DEFAULT_Z0, &mut rng);
            let theta = x.theta(DEFAULT_Z0).unwrap().unwrap();
            let (u, s) = validate_scattering(&theta);
            unitarity = unitarity.max(u);
            symmetry = symmetry.max(s);
        }
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: unitarity < 1e-10 && symmetry < 1e-12 && within(elapsed, 10.0),
        detail: format!(
            "4x1000 draws, max |T^H T - I| {unitarity:.2e} (< 1e-10), max |T - T^T| {symmetry:.2e} (< 1e-12), {:.2}s (< 10s)",
            elapsed.as_secs_f64()
        ),
    }
}

fn rate_wmmse_identity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let m = rng.random_range(1..=4);
        let k = rng.random_range(1..=4);
        let g: Vec<CVector> = (0..k)
            .map(|_| {
                let var = 10f64.powf(rng.random_range(-2.0..1.0));
                random_cvector(&mut rng, m, var)
            })
            .collect();
        let power = 10f64.powf(rng.random_range(-1.0..3.0));
        let bf = random_beamformers(&mut rng, m, k, power, MultipleAccess::Rsma);
        let report = rates_for_channels(&g, &bf, 1.0).unwrap();
        let state = WmmseState::at(&g, &bf, 1.0).unwrap();
        for user in 0..k {
            worst = worst.max((state.common_xi[user] - (1.0 - report.common_rates[user])).abs());
            worst = worst.max((state.private_xi[user] - (1.0 - report.private_rates[user])).abs());
        }
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: worst < 1e-9 && within(elapsed, 10.0),
        detail: format!(
            "500 instances, max |xi - (1 - r)| {worst:.2e} (< 1e-9), {:.2}s (< 10s)",
            elapsed.as_secs_f64()
        ),
    }
}

fn without_ris(direct: Vec<CVector>) -> ChannelRealization {
    let k = direct.len();
    let m = direct[0].len();
    ChannelRealization::from_parts(direct, vec![CVector::zeros(0); k], CMatrix::zeros(0, m)).unwrap()
}

fn single_user_capacity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let opts = AoOptions::default();
    let mut worst = 0.0f64;
    let mut unconverged = 0;
    for _ in 0..50 {
        let real = without_ris(vec![random_cvector(&mut rng, 4, 1.0)]);
        for power in [1.0, 10.0, 100.0] {
            let out = alternating_optimize(&real, SchemeSpec::NONE_RSMA, power, 1.0, &opts, &AoInit::default()).unwrap();
            let capacity = (1.0 + power * real.direct[0].norm_squared()).log2();
            worst = worst.max((out.sum_rate() - capacity).abs());
            unconverged += usize::from(!out.converged);
        }
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: worst < 1e-3 && unconverged == 0 && within(elapsed, 60.0),
        detail: format!(
            "150 runs, max |SR - log2(1 + P|g|^2)| {worst:.2e} (< 1e-3), {unconverged} unconverged, {:.2}s (< 60s)",
            elapsed.as_secs_f64()
        ),
    }
}

fn single_element_grid() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let power = 10.0;
    let opts = AoOptions::default();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let mut draw = || C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * std::f64::consts::SQRT_2;
        let (g, h, big_g) = (draw(), draw(), draw());
        let real = ChannelRealization::from_parts(
            vec![CVector::from_element(1, g)],
            vec![CVector::from_element(1, h)],
            CMatrix::from_element(1, 1, big_g),
        )
        .unwrap();
        let out = alternating_optimize(&real, SchemeSpec::SINGLE_RSMA, power, 1.0, &opts, &AoInit::default()).unwrap();
        // g~ = g + conj(G) conj(theta) h with theta on the unit circle
        let grid = (0..3601)
            .map(|i| {
                let phase = -std::f64::consts::PI + 2.0 * std::f64::consts::PI * i as f64 / 3600.0;
                let eff = g + big_g.conj() * C64::from_polar(1.0, -phase) * h;
                (1.0 + power * eff.norm_sqr()).log2()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max((out.sum_rate() - grid).abs());
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: worst < 1e-3 && within(elapsed, 60.0),
        detail: format!(
            "20 instances, max |SR - grid best| {worst:.2e} (< 1e-3), {:.2}s (< 60s)",
            elapsed.as_secs_f64()
        ),
    }
}

fn max_drop(trace: &[f64]) -> f64 {
    trace.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
}

fn monotonicity() -> Outcome {
    let start = Instant::now();
    let scenario = Scenario {
        elements: 8,
        ..Scenario::default()
    };
    let power = power_from_snr_db(20.0);
    let opts = AoOptions::default();
    let (mut outer, mut inner, mut runs) = (0.0f64, 0.0f64, 0);
    for r in 0..50 {
        let real = draw_realization(&scenario, 5, r).unwrap();
        for scheme in SchemeSpec::ALL {
            let out = alternating_optimize(&real, scheme, power, scenario.noise_power, &opts, &AoInit::default()).unwrap();
            runs += 1;
            outer = outer.max(max_drop(&out.trace));
            if scheme.architecture != Architecture::None {
                // beamformer and reactance stages interleaved
                let mut stages = vec![out.trace[0]];
                for (w, x) in out.beamformer_stage.iter().zip(&out.trace[1..]) {
                    stages.extend([*w, *x]);
                }
                outer = outer.max(max_drop(&stages));
            }
            for t in &out.wmmse_traces {
                inner = inner.max(max_drop(t));
            }
        }
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: outer <= 1e-6 && inner <= 1e-6 && within(elapsed, 900.0),
        detail: format!(
            "{runs} runs, max AO drop {outer:.2e}, max WMMSE drop {inner:.2e} (<= 1e-6), {:.1}s (< 900s)",
            elapsed.as_secs_f64()
        ),
    }
}

fn warm_start() -> Outcome {
    let start = Instant::now();
    let power = power_from_snr_db(20.0);
    let opts = AoOptions::default();
    let mut worst = f64::INFINITY;
    for r in 0..20 {
        let scenario = Scenario {
            elements: if r < 10 { 4 } else { 8 },
            ..Scenario::default()
        };
        let real = draw_realization(&scenario, 6, r).unwrap();
        let d = warm_start_dominance(&real, power, scenario.noise_power, &opts).unwrap();
        worst = worst.min(d.gap());
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: worst >= -1e-6 && within(elapsed, 900.0),
        detail: format!(
            "20 realizations, min SR(fully) - SR(single) {worst:.3e} (>= -1e-6), {:.1}s (< 900s)",
            elapsed.as_secs_f64()
        ),
    }
}

fn sweep(schemes: &[SchemeSpec], snr_db: f64, n: usize, realizations: usize, seed: u64) -> Vec<ResultRow> {
    let cfg = ExperimentConfig {
        schemes: schemes.to_vec(),
        snr_db: vec![snr_db],
        elements: vec![n],
        realizations,
        seed,
        jobs: 1,
        ..ExperimentConfig::default()
    };
    run(&cfg).unwrap()
}

fn rates_of(rows: &[ResultRow], scheme: SchemeSpec) -> Vec<f64> {
    rows.iter().filter(|r| r.scheme == scheme).map(|r| r.sum_rate).collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn scheme_ordering() -> Outcome {
    let start = Instant::now();
    let rows = sweep(&SchemeSpec::ALL, 20.0, 16, 20, 7);
    let pairs = [
        (SchemeSpec::FULLY_RSMA, SchemeSpec::SINGLE_RSMA),
        (SchemeSpec::SINGLE_RSMA, SchemeSpec::NONE_RSMA),
        (SchemeSpec::FULLY_RSMA, SchemeSpec::FULLY_SDMA),
        (SchemeSpec::SINGLE_RSMA, SchemeSpec::SINGLE_SDMA),
        (SchemeSpec::NONE_RSMA, SchemeSpec::NONE_SDMA),
    ];
    let mut pass = rows.iter().all(|r| r.converged);
    let mut parts = Vec::new();
    for (a, b) in pairs {
        let (ra, rb) = (rates_of(&rows, a), rates_of(&rows, b));
        let gaps: Vec<f64> = ra.iter().zip(&rb).map(|(x, y)| x - y).collect();
        let gap = mean(&gaps);
        pass &= gap > 0.0;
        parts.push(format!("{a}>{b} {gap:+.3e}"));
    }
    let elapsed = start.elapsed();
    pass &= within(elapsed, 2700.0);
    let means: Vec<String> = SchemeSpec::ALL
        .iter()
        .map(|&s| format!("{s} {:.4}", mean(&rates_of(&rows, s))))
        .collect();
    Outcome {
        pass,
        detail: format!(
            "means [{}]; paired mean gaps (> 0) [{}], {:.1}s (< 2700s)",
            means.join(", "),
            parts.join(", "),
            elapsed.as_secs_f64()
        ),
    }
}

fn full_scale_gains() -> Outcome {
    let start = Instant::now();
    let schemes = [SchemeSpec::FULLY_RSMA, SchemeSpec::SINGLE_RSMA, SchemeSpec::NONE_RSMA];
    let rows = sweep(&schemes, 30.0, 32, 100, 8);
    let pairs = [
        GainPair::new(SchemeSpec::FULLY_RSMA, SchemeSpec::SINGLE_RSMA),
        GainPair::new(SchemeSpec::FULLY_RSMA, SchemeSpec::NONE_RSMA),
    ];
    let summary = summarize(&rows, &pairs).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for (pair, reported) in pairs.iter().zip([0.046, 0.165]) {
        let row = summary.iter().find(|s| s.scheme == pair.scheme && s.baseline == Some(pair.baseline)).unwrap();
        let in_band = (row.value / reported - 1.0).abs() <= 0.5;
        pass &= row.value > 0.0 && row.ci_low > 0.0 && in_band;
        parts.push(format!(
            "{} over {} {:.2}% CI [{:.2}%, {:.2}%] vs reported {:.1}% ({})",
            pair.scheme,
            pair.baseline,
            100.0 * row.value,
            100.0 * row.ci_low,
            100.0 * row.ci_high,
            100.0 * reported,
            if in_band { "in band" } else { "outside band" }
        ));
    }
    Outcome {
        pass,
        detail: format!("{}; {:.1}s", parts.join("; "), start.elapsed().as_secs_f64()),
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn convergence_iterations() -> Outcome {
    let start = Instant::now();
    let schemes = [
        SchemeSpec::FULLY_RSMA,
        SchemeSpec::FULLY_SDMA,
        SchemeSpec::SINGLE_RSMA,
        SchemeSpec::SINGLE_SDMA,
    ];
    let rows = sweep(&schemes, 25.0, 32, 10, 9);
    let fully: Vec<&ResultRow> = rows.iter().filter(|r| r.scheme.architecture == Architecture::Fully).collect();
    let converged = fully.iter().filter(|r| r.converged && r.iterations <= 200).count();
    let share = converged as f64 / fully.len() as f64;
    let diffs: Vec<f64> = fully
        .iter()
        .map(|f| {
            let single = rows
                .iter()
                .find(|r| {
                    r.scheme == SchemeSpec::new(Architecture::Single, f.scheme.access) && r.realization == f.realization
                })
                .unwrap();
            f.iterations as f64 - single.iterations as f64
        })
        .collect();
    let med = median(diffs);
    let iters = |s: SchemeSpec| median(rows.iter().filter(|r| r.scheme == s).map(|r| r.iterations as f64).collect());
    Outcome {
        pass: share >= 0.8 && med > 0.0,
        detail: format!(
            "fully converged within 200 outer iterations {:.0}% (>= 80%); median iterations fully-rsma {}, single-rsma {}, fully-sdma {}, single-sdma {}; paired median fully - single {med} (> 0), {:.1}s",
            100.0 * share,
            iters(SchemeSpec::FULLY_RSMA),
            iters(SchemeSpec::SINGLE_RSMA),
            iters(SchemeSpec::FULLY_SDMA),
            iters(SchemeSpec::SINGLE_SDMA),
            start.elapsed().as_secs_f64()
        ),
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let slow = args.iter().any(|a| a == "--include-ignored" || a == "--ignored")
        || std::env::var("RIS_RSMA_SLOW").is_ok_and(|v| v == "1");
    if args.iter().any(|a| a == "--list") {
        return;
    }

    let criteria: Vec<(u32, &str, fn() -> Outcome)> = vec![
        (1, "scattering feasibility", scattering_feasibility),
        (2, "rate-WMMSE identity", rate_wmmse_identity),
        (3, "single-user capacity", single_user_capacity),
        (4, "single-element grid", single_element_grid),
        (5, "monotonicity", monotonicity),
        (6, "warm-start dominance", warm_start),
        (7, "scheme ordering", scheme_ordering),
        (8, "full-scale gains", full_scale_gains),
        (9, "convergence iterations", convergence_iterations),
    ];
    let mut failed = Vec::new();
    let mut ran = 0;
    for (id, name, check) in criteria {
        if id == 8 && !slow {
            println!("acceptance {id} {name}: SKIP (slow; pass --include-ignored or set RIS_RSMA_SLOW=1)");
            continue;
        }
        let outcome = check();
        ran += 1;
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!("acceptance {id} {name}: {verdict} {}", outcome.detail);
        if !outcome.pass {
            failed.push(id);
        }
    }
    println!("acceptance: {}/{ran} criteria passed", ran - failed.len());
    if !failed.is_empty() {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
