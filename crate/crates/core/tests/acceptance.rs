//! Acceptance criteria 1 to 11. Runs as a plain binary so every criterion
//! prints one PASS/FAIL line; exits nonzero if any fails.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vcz::abstraction::{build_model, check_frr, AbstractTask, InputGrid, SymbolicModel};
use vcz::baseline::RowStatus;
use vcz::cli::{
    benchmark, cmd_simulate, cmd_synthesize, prepare, simulate, synthesize, ScenarioFile,
};
use vcz::confinement::{
    a_r_bound, check_feasibility, psi_constants, solve_least_conservative, solve_most_efficient,
    FeasibilityBounds, FunnelParams, PsiConfig, VczParams,
};
use vcz::geometry::{erode, GridSpec, IntervalBox};
use vcz::plants::DisturbanceSpec;
use vcz::sim::SimOutcome;
use vcz::synthesis::{solve_invariance, solve_reach_avoid, TaskController};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn load(name: &str) -> ScenarioFile {
    ScenarioFile::load(&scenarios_dir().join(name)).expect("scenario loads")
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn pendulum_bounds() -> FeasibilityBounds {
    FeasibilityBounds {
        m_lower: 3.0,
        m_i_lower: 3.0,
        v_m_max: vec![1.0],
        d_bar: vec![0.5],
        v_bar: vec![0.1],
        tau_bar: vec![2.0],
    }
}

// Funnel opening of 1 rad/s, the wide reference design.
fn wide_funnel() -> FunnelParams {
    FunnelParams::new(vec![1.0], vec![0.01], vec![1.0]).unwrap()
}

fn c1() -> Outcome {
    let r = check_feasibility(
        &pendulum_bounds(),
        &wide_funnel(),
        &VczParams {
            lambda: 0.018,
            u_bar: vec![0.1],
            h: 0.1,
            eta: vec![0.005],
        },
    )
    .map_err(|e| e.to_string())?;
    ensure(close(r.a_r, 2.5, 1e-3), format!("a_r = {}", r.a_r))?;
    ensure(close(r.rhs[0], 1.997, 1e-3), format!("rhs = {}", r.rhs[0]))?;
    ensure(r.pass, "check did not pass")?;
    Ok(format!("rhs = {:.4} <= 2, a_r = {:.4}", r.rhs[0], r.a_r))
}

fn c2() -> Outcome {
    let (lp, _) =
        solve_most_efficient(&pendulum_bounds(), &wide_funnel()).map_err(|e| e.to_string())?;
    let scara = FeasibilityBounds {
        m_lower: 1.5,
        m_i_lower: 1.6,
        v_m_max: vec![5.0; 2],
        d_bar: vec![0.2; 2],
        v_bar: vec![0.2; 2],
        tau_bar: vec![10.0; 2],
    };
    let sf = FunnelParams::new(vec![0.1; 2], vec![0.01; 2], vec![0.1; 2]).unwrap();
    let (ls, _) = solve_most_efficient(&scara, &sf).map_err(|e| e.to_string())?;
    let lc =
        solve_least_conservative(&pendulum_bounds(), &wide_funnel()).map_err(|e| e.to_string())?;
    ensure(close(lp, 0.0179, 1e-3), format!("pendulum lambda {lp}"))?;
    ensure(close(ls, 0.0186, 1e-3), format!("scara lambda {ls}"))?;
    ensure(
        close(lc.lambda_min, 0.009, 5e-4),
        format!("lambda_min {}", lc.lambda_min),
    )?;
    for k in 0..=100 {
        let lambda = lc.lambda_min + 0.0002 * k as f64;
        let want = (11.156 * lambda - 0.1).min(0.1);
        let got = lc.u_max(lambda);
        ensure(
            (got - want).abs() <= 0.005 * want.abs().max(1e-3),
            format!("u_max({lambda}) = {got}, expected {want}"),
        )?;
    }
    Ok(format!(
        "lambda_me pendulum {lp:.4}, scara {ls:.4}; lambda_min {:.4}, slope {:.3}",
        lc.lambda_min,
        lc.slope()
    ))
}

fn c3() -> Outcome {
    let started = Instant::now();
    let (slope, ratio) = psi_constants(&PsiConfig::default(), 1e-5);
    ensure(close(slope, 1.35, 0.01), format!("max slope {slope}"))?;
    ensure(ratio <= 0.9, format!("max psi(e)/e {ratio}"))?;
    let mut s = load("pendulum_invariance.toml");
    s.sim.duration = 10.0;
    let r = synthesize(&s, None).map_err(|e| e.to_string())?;
    let out = simulate(&s, &r.controller, None).map_err(|e| e.to_string())?;
    let bound = a_r_bound(0.1, 0.1, 0.018);
    let recs = &out.trajectory.records;
    let mut worst: f64 = 0.0;
    for w in recs.windows(2) {
        let vr = |k: usize| w[k].v[0] - w[k].e_v[0];
        worst = worst.max(((vr(1) - vr(0)) / (w[1].t - w[0].t)).abs());
    }
    ensure(
        worst <= bound,
        format!("|dv_r/dt| reached {worst} > {bound}"),
    )?;
    let secs = started.elapsed().as_secs_f64();
    ensure(secs < 1.0, format!("took {secs:.2} s"))?;
    Ok(format!(
        "max slope {slope:.4}, max psi/e {ratio:.4}, max |dv_r/dt| {worst:.3} <= {bound:.3}, {secs:.2} s"
    ))
}

fn violations(out: &SimOutcome, lambda: f64, tau_bar: f64, stay: f64) -> Option<String> {
    for r in &out.trajectory.records {
        let err = (r.x[0] - r.xi[0]).abs();
        if err >= lambda {
            return Some(format!("|x - xi| = {err} at t = {}", r.t));
        }
        if r.e_v[0].abs() >= r.rho[0] {
            return Some(format!("funnel at t = {}", r.t));
        }
        if r.tau[0].abs() > tau_bar {
            return Some(format!("|tau| = {} at t = {}", r.tau[0], r.t));
        }
        if r.x[0].abs() > stay {
            return Some(format!("|x| = {} at t = {}", r.x[0], r.t));
        }
    }
    out.report.breach.as_ref().map(|b| format!("{b:?}"))
}

fn c4() -> Outcome {
    let started = Instant::now();
    let base = load("pendulum_invariance.toml");
    let ctrl = synthesize(&base, None)
        .map_err(|e| e.to_string())?
        .controller;
    ensure(
        close(base.sim.dt, base.vcz.h / 50.0, 1e-12),
        "dt is not h/50",
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut steps = 0;
    let runs = 20;
    for k in 0..runs {
        let mut s = base.with_seed(1000 + k as u64);
        s.disturbance = if k % 2 == 0 {
            DisturbanceSpec::Sinusoidal {
                amplitude: vec![0.5],
                frequency: vec![rng.random_range(0.05..2.0)],
                phase: vec![rng.random_range(0.0..std::f64::consts::TAU)],
            }
        } else {
            DisturbanceSpec::UniformRandom {
                amplitude: vec![0.5],
                period: rng.random_range(0.01..0.5),
                seed: 0,
            }
        };
        s.initial.x0 = vec![rng.random_range(-0.15..0.15)];
        let out = simulate(&s, &ctrl, None).map_err(|e| format!("run {k}: {e}"))?;
        ensure(
            (out.trajectory.records.last().unwrap().t - 60.0).abs() < 1e-6,
            format!("run {k} stopped early"),
        )?;
        if let Some(v) = violations(&out, 0.018, 2.0, 0.2) {
            return Err(format!("run {k}: {v}"));
        }
        steps += out.trajectory.records.len();
    }
    let secs = started.elapsed().as_secs_f64();
    ensure(secs < 30.0, format!("took {secs:.1} s"))?;
    Ok(format!(
        "{runs} runs, {steps} records, zero violations, {secs:.1} s"
    ))
}

fn c5() -> Outcome {
    let s = load("pendulum_invariance.toml");
    let p = prepare(&s).map_err(|e| e.to_string())?;
    let model = build_model(&p.grid, &p.inputs, p.h).map_err(|e| e.to_string())?;
    let r = check_frr(&model, p.h, 100_000, 5);
    ensure(
        r.passed(),
        format!("{} counterexamples", r.counterexamples.len()),
    )?;
    ensure(
        r.checked > 90_000,
        format!("only {} pairs checked", r.checked),
    )?;
    Ok(format!(
        "{} of {} trials checked, 0 counterexamples",
        r.checked, r.trials
    ))
}

fn random_model(rng: &mut ChaCha8Rng) -> (SymbolicModel, AbstractTask) {
    let dims = rng.random_range(1..=2);
    let counts: Vec<usize> = (0..dims).map(|_| rng.random_range(3..=12)).collect();
    let hi: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let grid = GridSpec::new(
        IntervalBox::new(vec![0.0; dims], hi).unwrap(),
        vec![1.0; dims],
    )
    .unwrap();
    let samples = [3, 5, 7][rng.random_range(0..3)];
    let inputs = InputGrid::new(vec![1.0], vec![samples]).unwrap();
    let n = grid.num_cells();
    let lists: Vec<Vec<Vec<usize>>> = (0..n)
        .map(|c| {
            (0..samples)
                .map(|_| {
                    if rng.random_bool(0.1) {
                        return vec![];
                    }
                    let k = rng.random_range(1..=3);
                    (0..k)
                        .map(|_| {
                            if rng.random_bool(0.7) {
                                (c + rng.random_range(0..5)).saturating_sub(2).min(n - 1)
                            } else {
                                rng.random_range(0..n)
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let model = SymbolicModel::from_successor_lists(grid, inputs, 1.0, &lists).unwrap();
    let pick =
        |rng: &mut ChaCha8Rng, p: f64| (0..n).filter(|_| rng.random_bool(p)).collect::<Vec<_>>();
    let task = AbstractTask {
        goal: pick(rng, 0.1),
        unsafe_cells: pick(rng, 0.1),
        stay: pick(rng, 0.85),
    };
    (model, task)
}

// Brute-force fixed points, recomputed from scratch each sweep.
fn oracle_reach(m: &SymbolicModel, t: &AbstractTask) -> Vec<bool> {
    let n = m.num_cells();
    let bad: Vec<bool> = (0..n).map(|c| t.unsafe_cells.contains(&c)).collect();
    let mut w: Vec<bool> = (0..n).map(|c| t.goal.contains(&c) && !bad[c]).collect();
    loop {
        let next: Vec<bool> = (0..n)
            .map(|c| {
                w[c] || (t.stay.contains(&c)
                    && !bad[c]
                    && (0..m.num_inputs()).any(|u| {
                        let p = m.post(c, u);
                        !p.is_empty() && p.iter().all(|&s| w[s as usize])
                    }))
            })
            .collect();
        if next == w {
            return w;
        }
        w = next;
    }
}

fn oracle_inv(m: &SymbolicModel, t: &AbstractTask) -> Vec<bool> {
    let n = m.num_cells();
    let mut z: Vec<bool> = (0..n)
        .map(|c| t.stay.contains(&c) && !t.unsafe_cells.contains(&c))
        .collect();
    loop {
        let next: Vec<bool> = (0..n)
            .map(|c| {
                z[c] && (0..m.num_inputs()).any(|u| {
                    let p = m.post(c, u);
                    !p.is_empty() && p.iter().all(|&s| z[s as usize])
                })
            })
            .collect();
        if next == z {
            return z;
        }
        z = next;
    }
}

// Every nondeterministic branch of the closed loop from `start` reaches the
// goal through safe cells within `n` steps.
fn reach_runs_ok(m: &SymbolicModel, t: &AbstractTask, c: &TaskController, start: usize) -> bool {
    let safe = |x: usize| t.stay.contains(&x) && !t.unsafe_cells.contains(&x);
    let mut frontier = vec![start];
    for _ in 0..=m.num_cells() {
        let mut next = Vec::new();
        for &x in &frontier {
            if c.is_goal(x) {
                continue;
            }
            if !safe(x) {
                return false;
            }
            let Some(u) = c.choice(x) else { return false };
            next.extend(m.post(x, u).iter().map(|&s| s as usize));
        }
        next.sort_unstable();
        next.dedup();
        if next.is_empty() {
            return true;
        }
        frontier = next;
    }
    false
}

fn c6() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut nonempty, mut models) = (0, 0);
    for k in 0..200 {
        let (m, t) = random_model(&mut rng);
        ensure(m.num_pairs() <= 10_000, "model too large")?;
        models += 1;
        let want = oracle_reach(&m, &t);
        match solve_reach_avoid(&m, &t, 0) {
            Ok(c) => {
                let got: Vec<bool> = (0..m.num_cells()).map(|x| c.is_winning(x)).collect();
                ensure(
                    got == want,
                    format!("model {k}: reach-avoid domain differs"),
                )?;
                for &x in &c.winning {
                    ensure(
                        reach_runs_ok(&m, &t, &c, x),
                        format!("model {k}: run from {x} fails"),
                    )?;
                }
                nonempty += 1;
            }
            Err(_) => ensure(
                !want.iter().any(|&b| b),
                format!("model {k}: solver gave up"),
            )?,
        }
        let want = oracle_inv(&m, &t);
        match solve_invariance(&m, &t, 0) {
            Ok(c) => {
                let got: Vec<bool> = (0..m.num_cells()).map(|x| c.is_winning(x)).collect();
                ensure(got == want, format!("model {k}: invariance domain differs"))?;
                for &x in &c.winning {
                    let u = c.choice(x).ok_or(format!("model {k}: no choice at {x}"))?;
                    ensure(
                        m.post(x, u).iter().all(|&s| c.is_winning(s as usize)),
                        format!("model {k}: invariance run leaves the domain from {x}"),
                    )?;
                }
            }
            Err(_) => ensure(
                !want.iter().any(|&b| b),
                format!("model {k}: solver gave up"),
            )?,
        }
    }
    let secs = started.elapsed().as_secs_f64();
    ensure(secs < 60.0, format!("took {secs:.1} s"))?;
    Ok(format!(
        "{models} models match the oracle ({nonempty} with nonempty reach domains), {secs:.2} s"
    ))
}

fn c7() -> Outcome {
    let mut checked = 0;
    for name in ["pendulum_invariance.toml", "pendulum_sweep.toml"] {
        let s = load(name);
        let p = prepare(&s).map_err(|e| e.to_string())?;
        let lambda = p.resolved.lambda;
        let safe = erode(p.sequence.stay(), &[lambda]).map_err(|e| e.to_string())?;
        let ctrl = synthesize(&s, None).map_err(|e| e.to_string())?.controller;
        let out = simulate(&s, &ctrl, None).map_err(|e| e.to_string())?;
        ensure(out.report.breach.is_none(), format!("{name}: breach"))?;
        for r in &out.trajectory.records {
            ensure(
                safe.contains(&r.xi),
                format!("{name}: xi = {:?} at t = {}", r.xi, r.t),
            )?;
        }
        checked += out.trajectory.records.len();
    }
    Ok(format!(
        "{checked} dense center samples inside the lambda-tightened stay set"
    ))
}

fn c8() -> Outcome {
    let s = load("scara_reach.toml");
    ensure(
        s.bounds.v_bar == vec![0.2; 2] && s.bounds.tau_bar == vec![10.0; 2],
        "bounds differ",
    )?;
    let r = synthesize(&s, None).map_err(|e| e.to_string())?;
    ensure(close(r.stats.lambda, 0.019, 1e-12), "lambda is not 0.019")?;
    let out = simulate(&s, &r.controller, None).map_err(|e| e.to_string())?;
    let goal = IntervalBox::from_bounds(&[[0.7, 0.8], [-0.8, -0.7]]).unwrap();
    let entered = out.trajectory.records.iter().find(|r| goal.contains(&r.x));
    ensure(
        out.report.all_monitors_passed(),
        format!("monitors: {:?}", out.report.breach),
    )?;
    let t = entered.ok_or("joints never enter G")?.t;
    ensure(out.report.spec.satisfied, "specification not satisfied")?;
    Ok(format!("joints enter G at t = {t:.2} s, monitors pass"))
}

fn c9() -> Outcome {
    let s = load("multi_agent.toml");
    ensure(
        s.bounds.v_bar == vec![0.2; 4] && s.bounds.tau_bar == vec![0.2; 4],
        "bounds differ",
    )?;
    let r = synthesize(&s, None).map_err(|e| e.to_string())?;
    ensure(close(r.stats.lambda, 0.8, 1e-12), "lambda is not 0.8")?;
    let out = simulate(&s, &r.controller, None).map_err(|e| e.to_string())?;
    ensure(
        out.report.all_monitors_passed(),
        format!("monitors: {:?}", out.report.breach),
    )?;
    let seq = s.sequence().map_err(|e| e.to_string())?;
    let task = &seq.tasks()[0];
    let mut min_sep = f64::INFINITY;
    for rec in &out.trajectory.records {
        ensure(
            !task.hits_obstacle(&rec.x),
            format!("obstacle entered at t = {}", rec.t),
        )?;
        for sep in &task.separations {
            min_sep = min_sep.min(sep.distance(&rec.x));
            ensure(
                sep.holds(&rec.x),
                format!("separation lost at t = {}", rec.t),
            )?;
        }
    }
    let reached = out
        .trajectory
        .records
        .iter()
        .find(|rec| task.in_goal(&rec.x))
        .ok_or("agents never reach their targets")?;
    ensure(out.report.spec.satisfied, "specification not satisfied")?;
    Ok(format!(
        "targets reached at t = {:.0} s, min separation {min_sep:.2} >= {}, no obstacle entered",
        reached.t, task.separations[0].min_distance
    ))
}

fn c10() -> Outcome {
    let started = Instant::now();
    let files = [
        "pendulum_invariance.toml",
        "scara_reach.toml",
        "multi_agent.toml",
    ]
    .map(load);
    let report = benchmark(&files).map_err(|e| e.to_string())?;
    let pend = report
        .comparisons
        .iter()
        .find(|c| c.reference_status == RowStatus::Measured)
        .ok_or("no measured comparison")?;
    let time = pend.time_reduction_pct.ok_or("no timing")?;
    ensure(time >= 90.0, format!("time reduction {time:.2}%"))?;
    ensure(
        pend.memory_reduction_pct >= 90.0,
        format!("memory reduction {:.2}%", pend.memory_reduction_pct),
    )?;
    let ratios: Vec<f64> = report
        .comparisons
        .iter()
        .map(|c| c.transition_ratio)
        .collect();
    ensure(ratios.len() == 3, "missing comparisons")?;
    ensure(
        ratios.windows(2).all(|w| w[1] > w[0]),
        format!("ratios {ratios:?} do not widen"),
    )?;
    let secs = started.elapsed().as_secs_f64();
    ensure(secs < 300.0, format!("took {secs:.0} s"))?;
    Ok(format!(
        "pendulum time -{time:.2}%, memory -{:.2}%; transition ratio 1-D {:.0}, 2-D {:.3e}, 4-D {:.3e}; {secs:.1} s",
        pend.memory_reduction_pct, ratios[0], ratios[1], ratios[2]
    ))
}

fn c11() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let scenario = scenarios_dir().join("pendulum_sweep.toml");
    let cache = d.join("model.json");
    let read = |p: PathBuf| std::fs::read(p).map_err(|e| e.to_string());
    cmd_synthesize(&scenario, &d.join("a.json"), None, Some(3)).map_err(|e| e.to_string())?;
    cmd_synthesize(&scenario, &d.join("b.json"), Some(&cache), Some(3))
        .map_err(|e| e.to_string())?;
    cmd_synthesize(&scenario, &d.join("c.json"), Some(&cache), Some(3))
        .map_err(|e| e.to_string())?;
    let a = read(d.join("a.json"))?;
    ensure(
        a == read(d.join("b.json"))? && a == read(d.join("c.json"))?,
        "controller bytes differ",
    )?;
    for run in ["r1", "r2"] {
        cmd_simulate(
            &scenario,
            Some(&d.join("a.json")),
            &d.join(run),
            None,
            Some(3),
            None,
        )
        .map_err(|e| e.to_string())?;
    }
    let mut files = 0;
    for f in std::fs::read_dir(d.join("r1")).map_err(|e| e.to_string())? {
        let name = f.map_err(|e| e.to_string())?.file_name();
        ensure(
            read(d.join("r1").join(&name))? == read(d.join("r2").join(&name))?,
            format!("{name:?} differs"),
        )?;
        files += 1;
    }
    Ok(format!(
        "controller and {files} simulation artifacts byte-identical"
    ))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("pendulum feasibility arithmetic", c1),
        ("parameter solvers", c2),
        ("saturation constants and reference acceleration", c3),
        ("confinement and funnel invariants", c4),
        ("feedback refinement property", c5),
        ("synthesis oracle equivalence", c6),
        ("inter-sample correctness", c7),
        ("SCARA case study", c8),
        ("multi-agent case study", c9),
        ("benchmark trend", c10),
        ("determinism", c11),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let r = f();
        let secs = started.elapsed().as_secs_f64();
        match r {
            Ok(detail) => println!(
                "criterion {:>2} PASS [{secs:7.2} s] {name}: {detail}",
                i + 1
            ),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL [{secs:7.2} s] {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} criteria failed");
        std::process::exit(1);
    }
}
