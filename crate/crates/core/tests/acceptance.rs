//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any fails.

mod common;

use std::collections::HashMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use lbmforge::harness::{dambreak_run, tgv_run, DamBreakConfig, DamBreakMethod, SpecFile, TgvConfig, TgvSeries};
use lbmforge::kernelgen::{apply_streaming, compile_tape, emit_c, Field, KernelTape, StreamingPattern};
use lbmforge::lattice::{make_stencil, monomial_basis, monomial_exponents, orthogonalize_basis, SpaceKind, StencilName};
use lbmforge::method::{regularize, CollisionRule, MethodPreset, Regularization};
use lbmforge::moments::{chimera_forward_raw, raw_moment_matrix, MomentNames};
use lbmforge::simplify::{regularization_savings, simplify, SimplificationConfig};
use lbmforge::symexpr::{rational_to_f64, Env, Expr, Symbol};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

const SAMPLES: usize = 100;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome { pass, detail: detail.into() }
    }
}

fn tape(rule: &CollisionRule) -> KernelTape {
    compile_tape(&apply_streaming(rule, StreamingPattern::Pull)).expect("tape compiles")
}

fn regimes_for(m: MethodPreset) -> Vec<Regime> {
    // The cumulant transform needs the absolute density, so it has no
    // deviation-equilibrium regime.
    if m == MethodPreset::Cumulant {
        vec![Regime::Absolute, Regime::ZeroCenteredAbsolute]
    } else {
        REGIMES.to_vec()
    }
}

/// The regime each preset uses for operation counts.
fn preset_regime(m: MethodPreset) -> Regime {
    match m.space() {
        SpaceKind::Population | SpaceKind::RawMoment => Regime::ZeroCenteredDelta,
        _ => Regime::ZeroCenteredAbsolute,
    }
}

/// Unsimplified rules for every stencil, preset and regime, plus the
/// simplified variants of the operation-count configuration.
struct Rules {
    raw: HashMap<(StencilName, MethodPreset, Regime), CollisionRule>,
    s: HashMap<(StencilName, MethodPreset), CollisionRule>,
    s_cse: HashMap<(StencilName, MethodPreset), CollisionRule>,
}

impl Rules {
    fn build() -> Rules {
        let mut raw = HashMap::new();
        let mut s = HashMap::new();
        let mut s_cse = HashMap::new();
        for name in STENCILS {
            for m in MethodPreset::ALL {
                let spec = preset_spec(name, m);
                for r in regimes_for(m) {
                    raw.insert((name, m, r), derive(&with_regime(&spec, r)));
                }
                let base = &raw[&(name, m, preset_regime(m))];
                s.insert((name, m), simplify(base, &SimplificationConfig::standard()));
                s_cse.insert((name, m), simplify(base, &SimplificationConfig::full()));
            }
        }
        Rules { raw, s, s_cse }
    }

    fn table1(&self, name: StencilName, m: MethodPreset) -> &CollisionRule {
        &self.raw[&(name, m, preset_regime(m))]
    }
}

// ------------------------------------------------------------------ 1

fn round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_trip = 0.0f64;
    for name in STENCILS {
        let st = make_stencil(name);
        let spaces = [
            ("population", MethodPreset::Srt, None),
            ("raw monomial", MethodPreset::OrthogonalMrt, Some(monomial_basis(&st))),
            ("raw orthogonal", MethodPreset::OrthogonalMrt, Some(orthogonalize_basis(&st, false))),
            ("central", MethodPreset::CentralMoment, None),
            ("cumulant", MethodPreset::Cumulant, None),
        ];
        for (label, m, basis) in spaces {
            let mut spec = with_regime(&preset_spec(name, m), Regime::Absolute);
            if let Some(b) = basis {
                spec.basis = b.with_kind(spec.space);
            }
            spec.rates = vec![Expr::zero(); spec.rates.len()];
            let rule = derive(&spec);
            let t = tape(&rule);
            let mut err = 0.0f64;
            for _ in 0..SAMPLES {
                let x = state_for(&rule, &mut rng);
                let y = t.run_cell(&x, &Env::new()).expect("identity rule evaluates");
                err = err.max(max_abs_diff(&x, &y));
            }
            if err > 1e-11 {
                return Outcome::new(false, format!("{name} {label}: round trip error {err:.2e}"));
            }
            worst_trip = worst_trip.max(err);
        }
    }
    let mut worst_fwd = 0.0f64;
    for name in STENCILS {
        let st = make_stencil(name);
        let exps = monomial_exponents(&st);
        let syms: Vec<Symbol> = (0..st.q()).map(|i| Symbol::new(format!("f_{i}"))).collect();
        let f: Vec<Expr> = syms.iter().map(Expr::from_symbol).collect();
        let ac = chimera_forward_raw(&st, &exps, &f, &MomentNames::new("m", st.dim));
        let m = raw_moment_matrix(&st, &monomial_basis(&st)).expect("monomial matrix");
        for _ in 0..SAMPLES {
            let values: Vec<f64> = (0..st.q()).map(|_| rng.gen_range(0.0..1.0)).collect();
            let env: Env = syms.iter().cloned().zip(values.iter().copied()).collect();
            let chimera = ac.evaluate_outputs(&env).expect("forward transform evaluates");
            for (r, c) in chimera.iter().enumerate() {
                let direct: f64 = (0..st.q()).map(|i| rational_to_f64(&m[(r, i)]) * values[i]).sum();
                worst_fwd = worst_fwd.max((direct - c).abs());
            }
        }
    }
    Outcome::new(
        worst_fwd <= 1e-13,
        format!("max round-trip error {worst_trip:.2e} (tol 1e-11); chimera vs matrix {worst_fwd:.2e} (tol 1e-13)"),
    )
}

// ------------------------------------------------------------------ 2

fn regimes_agree(rules: &Rules) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut tapes: HashMap<(StencilName, MethodPreset, Regime), KernelTape> = HashMap::new();
    for (k, rule) in &rules.raw {
        tapes.insert(*k, tape(rule));
    }
    for name in STENCILS {
        let w = weights(&make_stencil(name));
        for m in MethodPreset::ALL {
            let abs_rule = &rules.raw[&(name, m, Regime::Absolute)];
            for _ in 0..SAMPLES {
                let params = params_with(abs_rule, &mut rng);
                let f = state_for(abs_rule, &mut rng);
                let reference = tapes[&(name, m, Regime::Absolute)].run_cell(&f, &params).expect("evaluates");
                let df: Vec<f64> = f.iter().zip(&w).map(|(a, b)| a - b).collect();
                for r in regimes_for(m).into_iter().skip(1) {
                    let out = tapes[&(name, m, r)].run_cell(&df, &params).expect("evaluates");
                    let back: Vec<f64> = out.iter().zip(&w).map(|(a, b)| a + b).collect();
                    let e = max_abs_diff(&reference, &back);
                    if e > 1e-12 {
                        return Outcome::new(false, format!("{name} {m} {r:?}: deviation {e:.2e}"));
                    }
                    worst = worst.max(e);
                }
            }
        }
    }
    Outcome::new(true, format!("max deviation {worst:.2e} over {} rules (tol 1e-12)", rules.raw.len()))
}

// ------------------------------------------------------------------ 3

fn conservation(rules: &Rules) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut cell = 0.0f64;
    let all = rules.raw.values().chain(rules.s_cse.values());
    for rule in all {
        let t = tape(rule);
        let st = &rule.method.stencil;
        for _ in 0..SAMPLES {
            let params = params_with(rule, &mut rng);
            let x = state_for(rule, &mut rng);
            let y = t.run_cell(&x, &params).expect("evaluates");
            let (a, b) = (mass_momentum(st, &x), mass_momentum(st, &y));
            let e = max_abs_diff(&a, &b);
            if e > 1e-12 {
                return Outcome::new(false, format!("{} {}: per-cell defect {e:.2e}", st.name, rule.method.space));
            }
            cell = cell.max(e);
        }
    }
    let mut global = 0.0f64;
    for ((name, _), rule) in &rules.s_cse {
        let t = tape(rule);
        let st = &rule.method.stencil;
        let dims: Vec<usize> = if st.dim == 2 { vec![7, 5] } else { vec![5, 4, 4] };
        let mut f = Field::new(&dims, st.q()).expect("field");
        for c in 0..f.cells() {
            let v = state_for(rule, &mut rng);
            f.set_cell(c, &v);
        }
        let params = params_with(rule, &mut rng);
        let mut g = f.clone();
        t.execute_step(&f, &mut g, &params).expect("step");
        let total = |h: &Field| {
            (0..h.cells()).map(|c| mass_momentum(st, &absolute(rule, &h.cell(c)))).fold([0.0; 4], |a, b| {
                [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]
            })
        };
        let (a, b) = (total(&f), total(&g));
        let e = max_abs_diff(&a, &b) / a[0];
        if e > 1e-12 {
            return Outcome::new(false, format!("{name}: global relative defect {e:.2e}"));
        }
        global = global.max(e);
    }
    Outcome::new(true, format!("per cell {cell:.2e} (tol 1e-12), global per step {global:.2e} relative (tol 1e-12)"))
}

// ------------------------------------------------------------------ 4

fn simplification(rules: &Rules) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    let mut table = Vec::new();
    for name in STENCILS {
        for m in MethodPreset::ALL {
            let raw = rules.table1(name, m);
            let (s, c) = (&rules.s[&(name, m)], &rules.s_cse[&(name, m)]);
            let (n_ops, s_ops, c_ops) = (raw.op_count().total, s.op_count().total, c.op_count().total);
            if !(n_ops >= s_ops && s_ops >= c_ops) {
                return Outcome::new(false, format!("{name} {m}: N={n_ops} S={s_ops} S+CSE={c_ops} not ordered"));
            }
            table.push(format!("{name}/{m} {n_ops}/{s_ops}/{c_ops}"));
            let (tr, ts, tc) = (tape(raw), tape(s), tape(c));
            for _ in 0..SAMPLES {
                let params = params_with(raw, &mut rng);
                let x = state_for(raw, &mut rng);
                let a = tr.run_cell(&x, &params).expect("evaluates");
                for t in [&ts, &tc] {
                    let e = max_abs_diff(&a, &t.run_cell(&x, &params).expect("evaluates"));
                    if e > 1e-12 {
                        return Outcome::new(false, format!("{name} {m}: simplified output differs by {e:.2e}"));
                    }
                    worst = worst.max(e);
                }
            }
        }
    }
    Outcome::new(true, format!("max deviation {worst:.2e} (tol 1e-12); N/S/S+CSE: {}", table.join(", ")))
}

// ------------------------------------------------------------------ 5 and 7

fn regularized_cumulant(name: StencilName, storage: Regime) -> CollisionRule {
    let spec = regularize(&with_regime(&preset_spec(name, MethodPreset::Cumulant), storage), Regularization::Full);
    simplify(&derive(&spec), &SimplificationConfig::full())
}

fn cost_ratios(rules: &Rules, rk: &HashMap<StencilName, CollisionRule>) -> Outcome {
    let ratio = |name| {
        rk[&name].op_count().total as f64 / rules.s_cse[&(name, MethodPreset::Srt)].op_count().total as f64
    };
    let (q19, q27) = (ratio(StencilName::D3Q19), ratio(StencilName::D3Q27));
    Outcome::new(
        q19 <= 1.6 && q27 <= 1.75,
        format!("R-K/SRT at S+CSE: D3Q19 {q19:.3} (≤ 1.6), D3Q27 {q27:.3} (≤ 1.75)"),
    )
}

fn transcendental_free(rules: &Rules, rk: &HashMap<StencilName, CollisionRule>) -> Outcome {
    let mut kernels: Vec<(String, &CollisionRule)> = Vec::new();
    let mut extra = Vec::new();
    for name in STENCILS {
        kernels.push((format!("{name} K"), &rules.s_cse[&(name, MethodPreset::Cumulant)]));
        kernels.push((format!("{name} R-K zero-centered"), &rk[&name]));
        extra.push((format!("{name} R-K absolute"), regularized_cumulant(name, Regime::Absolute)));
    }
    kernels.extend(extra.iter().map(|(l, r)| (l.clone(), r)));
    let bad: Vec<String> = kernels
        .iter()
        .filter_map(|(l, r)| {
            let n = r.op_count().transcendentals;
            (n > 0).then(|| format!("{l}: {n}"))
        })
        .collect();
    if bad.is_empty() {
        Outcome::new(true, format!("{} fully simplified cumulant kernels, no log/exp", kernels.len()))
    } else {
        Outcome::new(false, format!("log/exp remain in {}", bad.join(", ")))
    }
}

// ------------------------------------------------------------------ 6

fn savings() -> Outcome {
    let methods = [
        MethodPreset::OrthogonalMrt,
        MethodPreset::WeightedOrthogonalMrt,
        MethodPreset::CentralMoment,
        MethodPreset::Cumulant,
    ];
    let rows = regularization_savings(StencilName::D3Q27, &methods, 5).expect("savings");
    let get = |m: &str| rows.iter().find(|r| r.method == m).expect("row").savings_full;
    let positive = rows.iter().all(|r| r.savings_full > 0.0);
    let ordered = get("K") > get("CM") && get("CM") > get("O-MRT");
    let beats_ho = rows.iter().all(|r| r.savings_full > r.savings_higher_order);
    let detail = rows
        .iter()
        .map(|r| format!("{} {:.1}%/{:.1}%", r.method, 100.0 * r.savings_full, 100.0 * r.savings_higher_order))
        .collect::<Vec<_>>()
        .join(", ");
    Outcome::new(
        positive && ordered && beats_ho,
        format!("full/higher-order(5) savings: {detail}; positive {positive}, K > CM > O-MRT {ordered}, full > ho {beats_ho}"),
    )
}

// ------------------------------------------------------------------ 8

fn tgv_series(json: &str) -> TgvSeries {
    let spec = SpecFile::from_json(json).expect("spec parses").resolve().expect("spec resolves");
    tgv_run(&TgvConfig::default(), &spec).expect("TGV runs")
}

fn tgv() -> Outcome {
    let runs = [
        ("SRT abs", r#"{"stencil": "D2Q9", "preset": "SRT", "storage": "absolute"}"#),
        ("SRT zc+delta", r#"{"stencil": "D2Q9", "preset": "SRT"}"#),
        ("R-CM abs", r#"{"stencil": "D2Q9", "preset": "CM", "storage": "absolute", "regularization": "full"}"#),
        ("R-CM zc", r#"{"stencil": "D2Q9", "preset": "CM", "regularization": "full"}"#),
        (
            "R-CM zc+delta",
            r#"{"stencil": "D2Q9", "preset": "CM", "equilibrium": {"kind": "maxwellian", "delta": true}, "regularization": "full"}"#,
        ),
    ];
    let series: Vec<(&str, TgvSeries)> = runs.iter().map(|(l, j)| (*l, tgv_series(j))).collect();
    let err = series.iter().map(|(_, s)| s.max_relative_error(1e-6)).fold(0.0, f64::max);
    let plateau: HashMap<&str, f64> = series.iter().map(|(l, s)| (*l, s.plateau(1000))).collect();
    let decay = err <= 0.01;
    let srt = plateau["SRT zc+delta"] <= 1e-3 * plateau["SRT abs"];
    let cm = plateau["R-CM zc"] <= plateau["R-CM abs"] && plateau["R-CM zc+delta"] <= plateau["R-CM abs"];
    let plateaus = runs.iter().map(|(l, _)| format!("{l} {:.2e}", plateau[l])).collect::<Vec<_>>().join(", ");
    Outcome::new(
        decay && srt && cm,
        format!(
            "max |E/E0 - analytic|/analytic = {err:.3e} (tol 1e-2: {}); SRT zc plateau ≥ 3 orders lower: {srt}; \
             R-CM zc ≤ abs: {cm}; plateaus: {plateaus}",
            if decay { "ok" } else { "exceeded" }
        ),
    )
}

// ------------------------------------------------------------------ 9

fn max_asymmetry(depth: &[f64], n: usize) -> f64 {
    let mut worst = 0.0f64;
    for y in 0..n {
        for x in 0..n {
            let h = depth[x + n * y];
            let (rx, ry) = (n - 1 - x, n - 1 - y);
            for (a, b) in [(rx, y), (x, ry), (rx, ry), (y, x), (ry, x), (y, rx), (ry, rx)] {
                worst = worst.max((h - depth[a + n * b]).abs());
            }
        }
    }
    worst
}

fn dambreak() -> Outcome {
    let cm_cfg = DamBreakConfig::default();
    let k_cfg = DamBreakConfig { method: DamBreakMethod::Cumulant, ..DamBreakConfig::default() };
    let omega = cm_cfg.omega_s();
    let omega_ok = (omega - 0.696).abs() <= 0.001;
    let mut volume = 0.0f64;
    let mut sym = 0.0f64;
    let mut trough = Vec::new();
    for cfg in [&cm_cfg, &k_cfg] {
        let res = dambreak_run(cfg).expect("dam break runs");
        volume = volume.max((res.final_volume - res.initial_volume).abs() / res.initial_volume);
        for s in &res.snapshots {
            sym = sym.max(max_asymmetry(&s.depth, res.cells));
        }
        sym = sym.max(max_asymmetry(&res.final_depth, res.cells));
        let at2 = res.snapshot_at(2.0).expect("snapshot at t = 2 s");
        trough.push(at2.cross_section(res.cells).into_iter().fold(f64::INFINITY, f64::min));
    }
    let (cm, k) = (trough[0], trough[1]);
    let pass = omega_ok && volume <= 1e-10 && sym <= 1e-12 && k < cm;
    Outcome::new(
        pass,
        format!(
            "omega_s = {omega:.6}; volume drift {volume:.2e} (tol 1e-10); asymmetry {sym:.2e} (tol 1e-12); \
             trough at t = 2 s: K {k:.4} m, CM {cm:.4} m"
        ),
    )
}

// ------------------------------------------------------------------ 10

const DRIVER: &str = r#"#include <stdio.h>
#include <stdlib.h>

void kernel(double* src, double* dst, double omega, int nx, int ny);

int main(int argc, char** argv) {
    int nx = atoi(argv[3]), ny = atoi(argv[4]);
    double omega = strtod(argv[5], NULL);
    long n = 9L * nx * ny;
    double* src = malloc(n * sizeof(double));
    double* dst = malloc(n * sizeof(double));
    FILE* in = fopen(argv[1], "rb");
    if (!in || fread(src, sizeof(double), n, in) != (size_t)n) return 1;
    fclose(in);
    kernel(src, dst, omega, nx, ny);
    FILE* out = fopen(argv[2], "wb");
    if (!out || fwrite(dst, sizeof(double), n, out) != (size_t)n) return 1;
    fclose(out);
    return 0;
}
"#;

fn to_bytes(v: &[f64]) -> Vec<u8> {
    v.iter().flat_map(|x| x.to_le_bytes()).collect()
}

fn from_bytes(b: &[u8]) -> Vec<f64> {
    b.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect()
}

/// `None` when no C compiler is available.
fn emitted_c(rules: &Rules) -> Option<Outcome> {
    if Command::new("cc").arg("--version").output().map(|o| !o.status.success()).unwrap_or(true) {
        return None;
    }
    let rule = &rules.s_cse[&(StencilName::D2Q9, MethodPreset::Srt)];
    let bound = apply_streaming(rule, StreamingPattern::Pull);
    let names: Vec<String> = rule.parameters().iter().map(|p| p.name().to_string()).collect();
    if names != ["omega"] {
        return Some(Outcome::new(false, format!("unexpected kernel parameters {names:?}")));
    }
    let dir = tempfile::tempdir().expect("temp dir");
    let d = dir.path();
    std::fs::write(d.join("kernel.c"), emit_c(&bound, "kernel")).expect("write kernel");
    std::fs::write(d.join("driver.c"), DRIVER).expect("write driver");
    let exe = d.join("kernel_driver");
    let status = Command::new("cc")
        .args(["-O2", "-ffp-contract=off", "-o"])
        .arg(&exe)
        .arg(d.join("kernel.c"))
        .arg(d.join("driver.c"))
        .arg("-lm")
        .status();
    if !matches!(status, Ok(s) if s.success()) {
        return Some(Outcome::new(false, "emitted C failed to compile"));
    }
    let t = tape(rule);
    let (nx, ny) = (16usize, 12usize);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    for k in 0..5 {
        let mut f = Field::new(&[nx, ny], 9).expect("field");
        for c in 0..f.cells() {
            let v = state_for(rule, &mut rng);
            f.set_cell(c, &v);
        }
        let omega: f64 = rng.gen_range(0.2..1.9);
        let params: Env = [(Symbol::new("omega"), omega)].into_iter().collect();
        let mut g = f.clone();
        t.execute_step(&f, &mut g, &params).expect("step");
        let (inp, outp) = (d.join(format!("in{k}.bin")), d.join(format!("out{k}.bin")));
        std::fs::write(&inp, to_bytes(f.data())).expect("write input");
        let ok = Command::new(&exe)
            .arg(&inp)
            .arg(&outp)
            .args([nx.to_string(), ny.to_string(), format!("{omega:.17e}")])
            .status()
            .map(|s| s.success())
            .unwrap_or(false);
        if !ok {
            return Some(Outcome::new(false, "compiled kernel failed to run"));
        }
        let c_out = from_bytes(&read(&outp));
        worst = worst.max(max_abs_diff(g.data(), &c_out));
    }
    Some(Outcome::new(worst <= 1e-13, format!("max |C - tape| = {worst:.2e} over 5 fields (tol 1e-13)")))
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).expect("read output")
}

// ------------------------------------------------------------------

fn report(id: usize, title: &str, started: Instant, outcome: Option<Outcome>) -> bool {
    let secs = started.elapsed().as_secs_f64();
    match outcome {
        Some(o) => {
            println!("{} [{id:>2}] {title}: {} ({secs:.1}s)", if o.pass { "PASS" } else { "FAIL" }, o.detail);
            o.pass
        }
        None => {
            println!("SKIP [{id:>2}] {title}: no C compiler found");
            true
        }
    }
}

fn main() {
    let mut ok = true;
    let t = Instant::now();
    ok &= report(1, "transform round trip", t, Some(round_trip()));

    let t = Instant::now();
    let rules = Rules::build();
    println!("     derived and simplified {} rules in {:.1}s", rules.raw.len(), t.elapsed().as_secs_f64());
    let rk: HashMap<StencilName, CollisionRule> =
        STENCILS.iter().map(|n| (*n, regularized_cumulant(*n, Regime::ZeroCenteredAbsolute))).collect();

    let t = Instant::now();
    ok &= report(2, "storage regimes agree", t, Some(regimes_agree(&rules)));
    let t = Instant::now();
    ok &= report(3, "mass and momentum conservation", t, Some(conservation(&rules)));
    let t = Instant::now();
    ok &= report(4, "simplification preserves outputs and reduces cost", t, Some(simplification(&rules)));
    let t = Instant::now();
    ok &= report(5, "regularized cumulant cost relative to SRT", t, Some(cost_ratios(&rules, &rk)));
    let t = Instant::now();
    ok &= report(6, "D3Q27 regularization savings", t, Some(savings()));
    let t = Instant::now();
    ok &= report(7, "cumulant kernels free of log/exp", t, Some(transcendental_free(&rules, &rk)));
    let t = Instant::now();
    ok &= report(8, "Taylor-Green vortex decay and round-off plateaus", t, Some(tgv()));
    let t = Instant::now();
    ok &= report(9, "shallow-water dam break", t, Some(dambreak()));
    let t = Instant::now();
    ok &= report(10, "emitted C matches the tape", t, emitted_c(&rules));

    if !ok {
        std::process::exit(1);
    }
}
