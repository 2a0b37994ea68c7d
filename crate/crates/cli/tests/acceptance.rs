//! Acceptance suite: one line per criterion, `PASS` or `FAIL`.
//!
//! Run a subset by passing criterion numbers: `cargo test --test acceptance -- 1 4`.
//! Criteria listed in `EXPECTED_FAIL` are reported as failures but do not
//! fail the target; each is documented in the README.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use eqplant::analysis::{self, chi2_uniform_pvalue, ks_uniform_statistic, mean_pairwise, minima_profile, Restriction};
use eqplant::bench::{self, planted_instance, BenchJob, Solver, SolverConfig};
use eqplant::gadget::{builtin_3xor, config_from_index};
use eqplant::gf2::enumerate_solutions;
use eqplant::ising::{
    brute_force_ground_states, compile, extend, structure_report, GadgetBook, IsingInstance, SpinConfig,
};
use eqplant::pt::{self, PtParams};
use eqplant::seed;
use eqplant::xorsat::{generate_regular, generate_with_nullity, plant_random, XorsatSystem};
use rand::Rng;

const MASTER: u64 = 20_190_501;
const EXPECTED_FAIL: &[u32] = &[7];

type Criterion = (u32, &'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn seed_for(criterion: &str, parts: &[u64]) -> u64 {
    seed::derive(MASTER, criterion, parts)
}

fn planted(n: usize, s: u64) -> (XorsatSystem, IsingInstance) {
    let sys = plant_random(&generate_regular(n, 3, 3, s).expect("3R3X structure"), s);
    let inst = compile(&sys, &GadgetBook::builtin()).expect("builtin gadgets");
    (sys, inst)
}

fn with_nullity(n: usize, d: usize, s: u64) -> (XorsatSystem, IsingInstance) {
    let sys = generate_with_nullity(n, 3, 3, d, s, 1_000_000).expect("nullity target").system;
    let inst = compile(&sys, &GadgetBook::builtin()).expect("builtin gadgets");
    (sys, inst)
}

fn gadget_certificate() -> Outcome {
    let start = Instant::now();
    let g = builtin_3xor(false);
    let energies: Vec<(i64, i64)> = (0..16)
        .map(|c| {
            let s = config_from_index(c, 4);
            (g.energy(&s), s[..3].iter().map(|&v| v as i64).product())
        })
        .collect();
    let ground = energies.iter().map(|e| e.0).min().unwrap();
    let grounds: Vec<_> = energies.iter().filter(|e| e.0 == ground).collect();
    let wrong = energies.iter().filter(|e| e.1 == -1).map(|e| e.0).min().unwrap();
    let elapsed = start.elapsed();
    let pass = ground == -4
        && grounds.len() == 4
        && grounds.iter().all(|e| e.1 == 1)
        && wrong - ground == 2
        && elapsed < Duration::from_millis(1);
    outcome(pass, format!("ground {ground}, {} ground states, gap {}, {elapsed:?}", grounds.len(), wrong - ground))
}

fn certificate_instances() -> Vec<(usize, XorsatSystem, IsingInstance)> {
    [8, 16, 32, 64]
        .iter()
        .flat_map(|&n| (0..50).map(move |i| (n, i)))
        .map(|(n, i)| {
            let (sys, inst) = planted(n, seed_for("planted", &[n as u64, i]));
            (n, sys, inst)
        })
        .collect()
}

fn planted_energy() -> Outcome {
    let start = Instant::now();
    let instances = certificate_instances();
    let book = GadgetBook::builtin();
    let bad = instances
        .iter()
        .filter(|(n, sys, inst)| {
            let x = extend(sys, &book, sys.planted().unwrap()).unwrap();
            inst.energy(&x).unwrap() != -4 * *n as i64
        })
        .count();
    let elapsed = start.elapsed();
    outcome(
        bad == 0 && elapsed < Duration::from_secs(1),
        format!("{bad} of {} mismatched, {elapsed:?}", instances.len()),
    )
}

fn structure() -> Outcome {
    let instances = certificate_instances();
    let reports: Vec<_> = instances.iter().map(|(_, _, inst)| structure_report(inst)).collect();
    let max_degree = reports.iter().map(|r| r.max_degree).max().unwrap();
    let max_h = reports.iter().map(|r| r.field_range.0.abs().max(r.field_range.1.abs())).max().unwrap();
    let max_j = reports.iter().map(|r| r.coupling_range.0.abs().max(r.coupling_range.1.abs())).max().unwrap();
    outcome(
        max_degree <= 9 && max_h <= 3 && max_j <= 3,
        format!("max degree {max_degree}, max |h| {max_h}, max |J| {max_j}"),
    )
}

fn degeneracy() -> Outcome {
    let book = GadgetBook::builtin();
    let mut failures = Vec::new();
    for d in 0..=3usize {
        for i in 0..20u64 {
            let n = 6 + (i as usize % 5);
            let (sys, inst) = with_nullity(n, d, seed_for("degeneracy", &[d as u64, i]));
            let gs = brute_force_ground_states(&inst, 26).unwrap();
            let lifted: BTreeSet<SpinConfig> = enumerate_solutions(&sys.solution_set(), 1 << d)
                .unwrap()
                .iter()
                .map(|x| extend(&sys, &book, &x.to_bits()).unwrap())
                .collect();
            let found: BTreeSet<SpinConfig> = gs.configs.into_iter().collect();
            if found.len() != 1 << d || found != lifted {
                failures.push((d, i));
            }
        }
    }
    outcome(failures.is_empty(), format!("80 instances, mismatches {failures:?}"))
}

fn solver_oracle() -> Outcome {
    let start = Instant::now();
    let mut misses = Vec::new();
    for i in 0..20u64 {
        let n = 4 + (i as usize % 7);
        let (_, inst) = planted(n, seed_for("oracle", &[i]));
        let exact = brute_force_ground_states(&inst, 26).unwrap().energy_min;
        for solver in [Solver::Pt, Solver::Pth] {
            let mut config = SolverConfig::new(solver);
            config.sweeps_max = 200_000;
            let r = pt::run(&inst, config.params(seed_for("oracle-run", &[i])), Some(exact)).unwrap();
            if !r.found || r.best_energy != exact {
                misses.push((i, solver.name()));
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        misses.is_empty() && elapsed < Duration::from_secs(60),
        format!("40 runs, misses {misses:?}, {:.1}s", elapsed.as_secs_f64()),
    )
}

fn scaling() -> Outcome {
    let mut job = BenchJob::new(vec![16, 24, 32, 40, 48], Solver::Pt, seed_for("scaling", &[]));
    job.instances_per_size = 25;
    let out = bench::run_bench(&job).unwrap();
    let medians: Vec<f64> = out.rows.iter().map(|r| r.summary.median).collect();
    let monotone = medians.windows(2).all(|w| w[1] > w[0]);
    let fit = out.fit.as_ref().unwrap();
    let pass = monotone && (0.05..=0.25).contains(&fit.alpha);
    outcome(
        pass,
        format!(
            "medians {:?}, alpha {:.4} +/- {:.4}, {} unsolved",
            medians.iter().map(|m| *m as u64).collect::<Vec<_>>(),
            fit.alpha,
            fit.stderr_alpha,
            out.unsolved()
        ),
    )
}

fn swap_band() -> Outcome {
    let mut rates = Vec::new();
    for i in 0..10u64 {
        let (_, inst) = planted_instance(32, seed_for("swap", &[i])).unwrap();
        let params = PtParams { sweeps_max: 5_000, ..PtParams::new(seed_for("swap-run", &[i])) };
        rates.extend(pt::run(&inst, params, None).unwrap().swap_rates);
    }
    let inside = rates.iter().filter(|r| (0.15..=0.55).contains(*r)).count();
    let fraction = inside as f64 / rates.len() as f64;
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    outcome(
        fraction >= 0.7,
        format!("{inside}/{} pair rates in [0.15, 0.55] ({fraction:.2}), mean rate {mean:.3}", rates.len()),
    )
}

fn sampling_instances(d: usize) -> Vec<(XorsatSystem, IsingInstance)> {
    (0..10u64).map(|i| with_nullity(32, d, seed_for("sampling", &[d as u64, i]))).collect()
}

fn sampling_bias() -> Outcome {
    let config = SolverConfig::new(Solver::Pth);
    let mut p_values = Vec::new();
    let mut misses = 0;
    for (i, (sys, inst)) in sampling_instances(3).iter().enumerate() {
        let out = bench::sample(sys, inst, 1000, &config, seed_for("sampling-run", &[i as u64])).unwrap();
        misses += out.misses;
        p_values.push(out.report.p_value);
    }
    let median = analysis::runtime_summary(&p_values).unwrap().median;

    let mut rng = seed::stream(MASTER, "ks-calibration", &[]);
    let synthetic: Vec<f64> = (0..1000)
        .map(|_| {
            let mut tallies = [0u64; 8];
            for _ in 0..1000 {
                tallies[rng.gen_range(0..8)] += 1;
            }
            chi2_uniform_pvalue(&tallies).unwrap().p
        })
        .collect();
    let ks = ks_uniform_statistic(&synthetic);
    outcome(
        median < 0.05 && ks < 0.1,
        format!(
            "median p {median:.3e}, p-values {:?}, misses {misses}, calibration KS {ks:.4}",
            p_values.iter().map(|p| format!("{p:.1e}")).collect::<Vec<_>>()
        ),
    )
}

fn ground_separation() -> Outcome {
    let book = GadgetBook::builtin();
    let mut means = Vec::new();
    for d in 1..=3usize {
        let per_instance: Vec<f64> = sampling_instances(d)
            .iter()
            .map(|(sys, _)| {
                let states: Vec<SpinConfig> = enumerate_solutions(&sys.solution_set(), 1 << d)
                    .unwrap()
                    .iter()
                    .map(|x| extend(sys, &book, &x.to_bits()).unwrap())
                    .collect();
                let matrix: Vec<Vec<f64>> = states
                    .iter()
                    .map(|a| {
                        states
                            .iter()
                            .map(|b| analysis::hamming(a, b, Restriction::Logical(32)).unwrap().normalized)
                            .collect()
                    })
                    .collect();
                mean_pairwise(&matrix).unwrap()
            })
            .collect();
        means.push((d, per_instance.iter().sum::<f64>() / per_instance.len() as f64));
    }
    outcome(
        means.iter().all(|&(_, m)| m > 0.2),
        format!(
            "mean normalized distance by nullity {:?}",
            means.iter().map(|(d, m)| format!("d={d}: {m:.3}")).collect::<Vec<_>>()
        ),
    )
}

fn landscape() -> Outcome {
    let book = GadgetBook::builtin();
    let mut distances = Vec::new();
    for i in 0..25u64 {
        let (sys, inst) = planted_instance(64, seed_for("landscape", &[i])).unwrap();
        let solution = extend(&sys, &book, sys.planted().unwrap()).unwrap();
        let params =
            PtParams { sweeps_max: 20_000, record_minima: true, ..PtParams::new(seed_for("landscape-run", &[i])) };
        let r = pt::run(&inst, params, inst.ground_energy()).unwrap();
        let profile = minima_profile(&r.minima_log, &solution, inst.ground_energy(), Restriction::Logical(64)).unwrap();
        distances.extend(profile.iter().filter(|p| p.residual < 0.05).map(|p| p.distance));
    }
    if distances.is_empty() {
        return outcome(false, "no snapshots below residual 0.05");
    }
    let mean = distances.iter().sum::<f64>() / distances.len() as f64;
    outcome((0.4..=0.8).contains(&mean), format!("{} low snapshots, mean logical distance {mean:.3}", distances.len()))
}

fn run_cli(args: &[&str], dir: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_eqplant"))
        .args(args)
        .current_dir(dir)
        .stderr(std::process::Stdio::null())
        .status()
        .map_err(|e| e.to_string())?;
    status.success().then_some(()).ok_or_else(|| format!("{args:?} exited with {status}"))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let steps: &[&[&str]] = &[
        &["generate", "--n", "24", "--nullity", "0", "--plant", "--seed", "7", "--out", "sys.json"],
        &["compile", "--in", "sys.json", "--out", "inst.txt"],
        &[
            "solve",
            "--in",
            "inst.txt",
            "--solver",
            "pth",
            "--seed",
            "3",
            "--out",
            "a.json",
            "--minima-out",
            "a.csv",
            "--snapshot-interval",
            "10",
        ],
        &[
            "solve",
            "--in",
            "inst.txt",
            "--solver",
            "pth",
            "--seed",
            "3",
            "--out",
            "b.json",
            "--minima-out",
            "b.csv",
            "--snapshot-interval",
            "10",
        ],
        &["bench", "--sizes", "8,12,16", "--instances", "4", "--runs", "2", "--seed", "5", "--out-dir", "bench_a"],
        &["bench", "--sizes", "8,12,16", "--instances", "4", "--runs", "2", "--seed", "5", "--out-dir", "bench_b"],
        &["generate", "--n", "12", "--nullity", "2", "--plant", "--seed", "4", "--out", "deg.json"],
        &["sample", "--in", "deg.json", "--runs", "30", "--seed", "8", "--out", "sa.csv", "--report", "sa.json"],
        &["sample", "--in", "deg.json", "--runs", "30", "--seed", "8", "--out", "sb.csv", "--report", "sb.json"],
    ];
    for args in steps {
        if let Err(e) = run_cli(args, d) {
            return outcome(false, e);
        }
    }
    let pairs = [
        ("a.json", "b.json"),
        ("a.csv", "b.csv"),
        ("bench_a/runs.csv", "bench_b/runs.csv"),
        ("bench_a/scaling.csv", "bench_b/scaling.csv"),
        ("bench_a/fit.json", "bench_b/fit.json"),
        ("sa.csv", "sb.csv"),
        ("sa.json", "sb.json"),
    ];
    let differing: Vec<_> = pairs
        .iter()
        .filter(|(a, b)| {
            std::fs::read(d.join(a)).ok() != std::fs::read(d.join(b)).ok() || std::fs::read(d.join(a)).is_err()
        })
        .collect();
    outcome(differing.is_empty(), format!("{} file pairs compared, differing {differing:?}", pairs.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        (1, "gadget certificate", gadget_certificate),
        (2, "planted energy", planted_energy),
        (3, "structure", structure),
        (4, "degeneracy", degeneracy),
        (5, "solver oracle", solver_oracle),
        (6, "scaling", scaling),
        (7, "swap-rate band", swap_band),
        (8, "sampling bias", sampling_bias),
        (9, "ground-state separation", ground_separation),
        (10, "landscape profile", landscape),
        (11, "determinism", determinism),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut unexpected = 0;
    for (id, name, check) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let expected_fail = EXPECTED_FAIL.contains(&id);
        let verdict = match (result.pass, expected_fail) {
            (true, false) => "PASS",
            (true, true) => "PASS (listed as expected failure)",
            (false, true) => "FAIL (expected)",
            (false, false) => {
                unexpected += 1;
                "FAIL"
            }
        };
        println!("criterion {id:>2} {name}: {verdict} | {} | {:.1}s", result.detail, start.elapsed().as_secs_f64());
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
