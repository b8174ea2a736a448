//! Acceptance gate. One PASS/FAIL line per criterion; exits nonzero if any
//! criterion fails. The learning criteria train at desk scale (0.1) and take
//! on the order of an hour on one core.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::Instant;

use blocknet::harness::config::{BASE_WIDTHS, SMALL_WIDTHS};
use blocknet::harness::sweep::{run_sweep, SweepConfig};
use blocknet::harness::tables::{run_table, TableId};
use blocknet::harness::verify::{freeze_suite, gradient_suite};
use blocknet::harness::{Lab, LabSettings, Scale};
use blocknet::raster::PIXELS;
use blocknet::{compose, gen_spec, init_network, mlp_specs, verify_spec, BaseModel, BlockSpec, Rng, Segment, Task};

const MASTER_SEED: u64 = 0;
const DESK_BLOCK_SIZE: usize = 20_000;

struct Gate {
    failed: usize,
}

impl Gate {
    fn report(&mut self, name: &str, pass: bool, detail: String) {
        if !pass {
            self.failed += 1;
        }
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn gradient_exactness(gate: &mut Gate) {
    let start = Instant::now();
    let s = gradient_suite(50, 20, MASTER_SEED);
    let secs = start.elapsed().as_secs_f64();
    gate.report(
        "gradient exactness",
        s.networks == 50 && s.blocks == 20 && s.max_relative_error < 1e-6 && secs < 60.0,
        format!(
            "{} networks + {} blocks, {} parameters, max relative error {:.3e} (< 1e-6), {secs:.1}s (< 60s)",
            s.networks, s.blocks, s.parameters_checked, s.max_relative_error
        ),
    );
}

fn freeze_law(gate: &mut Gate) {
    let runs = freeze_suite(6, MASTER_SEED).expect("freeze runs");
    let trained = runs.iter().all(|r| r.epochs > 0);
    let frozen = runs.iter().all(|r| r.digests_unchanged && r.bytes_unchanged);
    let specs: BTreeSet<String> = runs.iter().map(|r| r.spec.to_string()).collect();
    gate.report(
        "freeze law",
        runs.len() >= 5 && trained && frozen,
        format!(
            "{} block trainings over {specs:?}, all base digests and bytes unchanged: {frozen}",
            runs.len()
        ),
    );
}

fn parameter_counts(gate: &mut Gate) {
    let small = init_network(&mlp_specs(PIXELS, &SMALL_WIDTHS), 1).unwrap();
    let counted_small: usize = small.layers().iter().map(|l| l.weights.len() + l.biases.len()).sum();
    let bases: Vec<BaseModel> = (0..5)
        .map(|i| {
            BaseModel::new(
                Task::ALL[i],
                init_network(&mlp_specs(PIXELS, &BASE_WIDTHS), i as u64).unwrap(),
            )
        })
        .collect();
    let block = |spec: BlockSpec, m: usize| compose(&bases[..m], spec, 2).unwrap().trainable_params();
    let cases = [
        ("NN-60-40-20", counted_small, 64_781),
        ("BA-0-50-50 m=4", block(BlockSpec::BA_0_50_50, 4), 62_651),
        ("BA-0-50-50 m=5", block(BlockSpec::BA_0_50_50, 5), 77_651),
        ("BA-0-0-50 m=5", block(BlockSpec::BA_0_0_50, 5), 25_101),
    ];
    let pass = cases.iter().all(|c| c.1 == c.2);
    let detail: Vec<String> = cases
        .iter()
        .map(|c| format!("{} {} (want {})", c.0, c.1, c.2))
        .collect();
    gate.report("parameter counts", pass, detail.join(", "));
}

/// Geometry recomputed with plain arithmetic, independent of the crate.
mod oracle {
    use super::Segment;

    const EPS: f64 = 1e-9;

    fn len(s: &Segment) -> f64 {
        ((s.b.x - s.a.x).powi(2) + (s.b.y - s.a.y).powi(2)).sqrt()
    }

    fn cross(ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
        ax * by - ay * bx
    }

    /// Interior angle in degrees when the segments share an endpoint.
    fn angle(s: &Segment, t: &Segment) -> Option<f64> {
        for (v, p) in [(s.a, s.b), (s.b, s.a)] {
            for (w, q) in [(t.a, t.b), (t.b, t.a)] {
                if (v.x - w.x).abs() < EPS && (v.y - w.y).abs() < EPS {
                    let (ux, uy, wx, wy) = (p.x - v.x, p.y - v.y, q.x - v.x, q.y - v.y);
                    let c = (ux * wx + uy * wy) / ((ux * ux + uy * uy).sqrt() * (wx * wx + wy * wy).sqrt());
                    return Some(c.clamp(-1.0, 1.0).acos().to_degrees());
                }
            }
        }
        None
    }

    /// Positions along both segments where they cross, if they do.
    fn crossing(s: &Segment, t: &Segment) -> Option<(f64, f64)> {
        let (rx, ry) = (s.b.x - s.a.x, s.b.y - s.a.y);
        let (qx, qy) = (t.b.x - t.a.x, t.b.y - t.a.y);
        let d = cross(rx, ry, qx, qy);
        if d.abs() < EPS {
            return None;
        }
        let (px, py) = (t.a.x - s.a.x, t.a.y - s.a.y);
        let u = cross(px, py, qx, qy) / d;
        let v = cross(px, py, rx, ry) / d;
        ((0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&v)).then_some((u, v))
    }

    #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
    pub enum Kind {
        Angle,
        Sharp,
        Blunt,
        Crossing,
        Apart,
        Triangle,
    }

    /// Classifies the figure, or explains why the stimulus is malformed.
    pub fn classify(segments: &[Segment], distractor: bool, blunt_sharp: bool) -> Result<Kind, String> {
        if !(2..=4).contains(&segments.len()) {
            return Err(format!("{} segments", segments.len()));
        }
        for s in segments {
            let inside = |x: f64| (0.0..=32.0).contains(&x);
            if len(s) < 13.0 - EPS || ![s.a.x, s.a.y, s.b.x, s.b.y].into_iter().all(inside) {
                return Err(format!("bad segment {s:?}"));
            }
        }
        let figure = &segments[..segments.len() - usize::from(distractor)];
        if distractor {
            let d = segments.last().unwrap();
            if figure.iter().any(|f| crossing(f, d).is_some() || angle(f, d).is_some()) {
                return Err("distractor touches the figure".into());
            }
        }
        match figure {
            [s, t] => match (angle(s, t), crossing(s, t)) {
                (Some(a), _) if blunt_sharp && (20.0..=80.0).contains(&a) => Ok(Kind::Sharp),
                (Some(a), _) if blunt_sharp && (100.0..=160.0).contains(&a) => Ok(Kind::Blunt),
                (Some(a), _) if !blunt_sharp && (20.0..=160.0).contains(&a) => Ok(Kind::Angle),
                (Some(a), _) => Err(format!("angle {a:.2}")),
                (None, Some((u, v))) if [u, v].iter().all(|x| (0.2..=0.8).contains(x)) => Ok(Kind::Crossing),
                (None, Some((u, v))) => Err(format!("crossing at {u:.3}, {v:.3}")),
                (None, None) => Ok(Kind::Apart),
            },
            [a, b, c] => {
                let corners = [angle(a, b), angle(b, c), angle(a, c)];
                if corners.iter().all(|x| x.is_some_and(|d| (20.0..=160.0).contains(&d))) {
                    Ok(Kind::Triangle)
                } else {
                    Err(format!("triangle corners {corners:?}"))
                }
            }
            _ => Err(format!("{} figure segments", figure.len())),
        }
    }
}

fn stimulus_oracle(gate: &mut Gate) {
    let start = Instant::now();
    let mut violations = 0usize;
    let mut disagreements = Vec::new();
    let mut generated = 0usize;
    for task in Task::ALL {
        let mut kinds = [BTreeSet::new(), BTreeSet::new()];
        for label in 0..2u8 {
            let mut rng = Rng::new(0xACCE + 2 * u64::from(task.id()) + u64::from(label));
            for _ in 0..10_000 {
                let spec = gen_spec(task, label, &mut rng).expect("generation succeeds");
                generated += 1;
                if !verify_spec(&spec).is_valid() {
                    violations += 1;
                }
                let blunt_sharp = matches!(task, Task::BltSrp | Task::BltSrpLn);
                match oracle::classify(&spec.segments, task.has_distractor(), blunt_sharp) {
                    Ok(k) => {
                        kinds[usize::from(label)].insert(k);
                    }
                    Err(e) => disagreements.push(format!("{task}/{label}: {e}")),
                }
            }
        }
        // Each label must realize one figure kind, and the two labels must differ.
        let [k0, k1] = &kinds;
        if !(k0.len() == 1 && k1.len() == 1 && k0 != k1) {
            disagreements.push(format!("{task}: label figure kinds {k0:?} vs {k1:?}"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    disagreements.truncate(3);
    gate.report(
        "stimulus oracle",
        violations == 0 && disagreements.is_empty() && secs < 120.0,
        format!(
            "{generated} specs, {violations} checker violations, independent geometry issues {disagreements:?}, {secs:.1}s (< 120s)"
        ),
    );
}

fn learning_criteria(gate: &mut Gate) {
    let settings = LabSettings {
        master_seed: MASTER_SEED,
        ..LabSettings::default()
    };
    let mut lab = Lab::new(settings, Scale::DESK);
    assert_eq!(lab.scale().block_size(), DESK_BLOCK_SIZE);
    assert_eq!(lab.settings().repetitions, 3);

    // Learnability: one scratch training on 20,000 blt_srp examples.
    let start = Instant::now();
    let blt = lab
        .reference_at(Task::BltSrp, DESK_BLOCK_SIZE)
        .expect("scratch training");
    let per_run = start.elapsed().as_secs_f64() / blt.errors.len() as f64;
    gate.report(
        "desk-scale learnability",
        blt.mean <= 10.0 && per_run < 900.0,
        format!(
            "NN-200-100-50 on 20000 blt_srp: test error {:.2}% mean over {:?} (<= 10%), {per_run:.0}s per training (< 900s)",
            blt.mean, blt.errors
        ),
    );

    // Ordering at the scratch-table training size.
    let order = [Task::BltSrp, Task::AngCrs, Task::AngCrsLn];
    let results: Vec<_> = order
        .iter()
        .map(|&t| lab.reference(t).expect("scratch training"))
        .collect();
    let mut ordered = true;
    for w in results.windows(2) {
        let spread = (w[0].worst - w[0].best).max(w[1].worst - w[1].best);
        ordered &= w[1].mean - w[0].mean > spread;
    }
    let shown: Vec<String> = order
        .iter()
        .zip(&results)
        .map(|(t, r)| format!("{t} {:.2} ({:.2}-{:.2})", r.mean, r.best, r.worst))
        .collect();
    gate.report(
        "task-difficulty ordering",
        ordered,
        format!(
            "n={}: {}; each gap must exceed both spreads",
            lab.scale().scratch_size(),
            shown.join(" < ")
        ),
    );

    // Transfer: five bases, same 20,000 examples, repetition by repetition.
    let others: Vec<Task> = Task::ALL.into_iter().filter(|&t| t != Task::BltSrp).collect();
    let block = lab
        .block(Task::BltSrp, BlockSpec::BA_0_50_50, &others, DESK_BLOCK_SIZE)
        .expect("block training");
    lab.release_features();
    let wins = block.errors.iter().zip(&blt.errors).filter(|(b, s)| b <= s).count();
    gate.report(
        "transfer advantage",
        wins >= 2 && block.errors.len() == 3,
        format!(
            "BA-0-50-50 over 5 bases {:?} vs scratch {:?} on 20000 blt_srp: block <= scratch in {wins} of 3 (>= 2)",
            block.errors, blt.errors
        ),
    );

    // Sweep trend.
    let sweep = run_sweep(&mut lab, &SweepConfig::new(vec![1, 4], 6)).expect("sweep");
    let (one, four) = (sweep.point(1).unwrap(), sweep.point(4).unwrap());
    gate.report(
        "outperformance trend",
        one.subsets >= 6 && four.subsets >= 6 && four.fraction() >= one.fraction(),
        format!(
            "m=1: {}/{} ({:.1}%), m=4: {}/{} ({:.1}%), 6 subsets each; need m=4 >= m=1",
            one.wins(),
            one.total(),
            100.0 * one.fraction(),
            four.wins(),
            four.total(),
            100.0 * four.fraction()
        ),
    );
}

fn tiny_outputs(threads: usize) -> (String, String) {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let settings = LabSettings {
            master_seed: 11,
            repetitions: 2,
            test_size: 50,
            ..LabSettings::default()
        };
        let mut lab = Lab::new(
            LabSettings {
                train: blocknet::TrainConfig {
                    max_epochs: 3,
                    ..settings.train.clone()
                },
                ..settings
            },
            Scale::new(0.001).unwrap(),
        );
        let table = run_table(&mut lab, TableId::FiveBases).unwrap().to_csv().unwrap();
        let sweep = run_sweep(&mut lab, &SweepConfig::new(vec![1, 2], 3)).unwrap();
        (table, sweep.summary_csv() + &sweep.comparisons_csv())
    })
}

fn bit_reproducibility(gate: &mut Gate) {
    let first = tiny_outputs(1);
    let second = tiny_outputs(4);
    gate.report(
        "bit reproducibility",
        first == second,
        format!(
            "table 3 and sweep CSV ({} + {} bytes) identical across fresh runs on 1 and 4 threads: {}",
            first.0.len(),
            first.1.len(),
            first == second
        ),
    );
}

fn main() -> ExitCode {
    let mut gate = Gate { failed: 0 };
    gradient_exactness(&mut gate);
    freeze_law(&mut gate);
    parameter_counts(&mut gate);
    stimulus_oracle(&mut gate);
    bit_reproducibility(&mut gate);
    learning_criteria(&mut gate);
    println!("acceptance: {} criteria failed", gate.failed);
    if gate.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
