mod common;

use std::collections::HashMap;
use std::sync::OnceLock;

use lbmforge::harness::{SpecFile, TgvConfig};
use lbmforge::kernelgen::{apply_streaming, compile_tape, Field, KernelTape, StreamingPattern};
use lbmforge::lattice::{inner_product, make_stencil, monomial_basis, monomial_exponents, orthogonalize_basis, StencilName};
use lbmforge::method::{MethodPreset, StorageFormat};
use lbmforge::moments::{chimera_forward_raw, raw_moment_matrix, MomentNames};
use lbmforge::simplify::{simplify, SimplificationConfig};
use lbmforge::symexpr::{
    differentiate, evaluate, normalize, rat, rational_to_f64, substitute, Env, Expr, Node, Symbol,
};
use num_traits::Zero;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;

// ---------------------------------------------------------------- symexpr

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        prop::sample::select(vec!["x", "y", "z"]).prop_map(Expr::sym),
        (-6i64..=6, 1i64..=4).prop_map(|(n, d)| Expr::rational(n, d)),
    ]
}

/// Arbitrary trees built without normalization.
fn raw_tree() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..4).prop_map(|v| Expr::raw(Node::Add(v))),
            prop::collection::vec(inner.clone(), 2..4).prop_map(|v| Expr::raw(Node::Mul(v))),
            (inner.clone(), -2i64..=3).prop_map(|(b, n)| Expr::raw(Node::Pow(b, n))),
            inner.clone().prop_map(|a| Expr::raw(Node::Exp(a))),
        ]
    })
}

/// Expressions that are positive and smooth for positive symbol values.
fn positive_tree() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        prop::sample::select(vec!["x", "y"]).prop_map(Expr::sym),
        (1i64..=8, 1i64..=4).prop_map(|(n, d)| Expr::rational(n, d)),
    ];
    leaf.prop_recursive(3, 16, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
            (inner.clone(), -2i64..=3).prop_map(|(b, n)| b.pow(n)),
            inner.clone().prop_map(|a| a.log() + Expr::integer(3)),
            inner.clone().prop_map(|a| a.scale(&rat(1, 4)).exp()),
        ]
    })
}

fn env(x: f64, y: f64, z: f64) -> Env {
    [("x", x), ("y", y), ("z", z)].into_iter().map(|(s, v)| (Symbol::new(s), v)).collect()
}

proptest! {
    #[test]
    fn normalize_is_idempotent(e in raw_tree()) {
        if let Ok(n) = normalize(&e) {
            prop_assert_eq!(normalize(&n).unwrap(), n);
        }
    }

    #[test]
    fn substitution_commutes_with_evaluation(
        e in raw_tree(), c in (prop_oneof![-7i64..=-1, 1i64..=7], 1i64..=5), x in 0.5f64..2.0, y in 0.5f64..2.0,
    ) {
        let Ok(e) = normalize(&e) else { return Ok(()) };
        // nonzero, so that negative powers of the substituted symbol stay defined
        let cv = Expr::rational(c.0, c.1);
        let mut b = HashMap::new();
        b.insert(Symbol::new("z"), cv.clone());
        let lhs = evaluate(&substitute(&e, &b), &env(x, y, 0.0));
        let rhs = evaluate(&e, &env(x, y, rational_to_f64(cv.as_num().unwrap())));
        if let (Ok(a), Ok(b)) = (lhs, rhs) {
            prop_assume!(a.is_finite() && b.is_finite() && b.abs() < 1e12);
            prop_assert!((a - b).abs() <= 1e-13 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn derivative_matches_finite_differences(
        a in positive_tree(), b in positive_tree(), x in 0.5f64..2.0, y in 0.5f64..2.0,
    ) {
        let e = a - b;
        let s = Symbol::new("x");
        let d = differentiate(&e, &s);
        let v = evaluate(&e, &env(x, y, 0.0)).unwrap();
        prop_assume!(v.abs() >= 0.1 && v.abs() <= 10.0);
        let h = 1e-6;
        let fd = (evaluate(&e, &env(x + h, y, 0.0)).unwrap() - evaluate(&e, &env(x - h, y, 0.0)).unwrap()) / (2.0 * h);
        let exact = evaluate(&d, &env(x, y, 0.0)).unwrap();
        prop_assert!((fd - exact).abs() <= 1e-5 * exact.abs().max(1.0), "{fd} vs {exact} for {e}");
    }
}

#[test]
fn thirds_sum_to_one() {
    let t = Expr::rational(1, 3);
    let s = Expr::raw(Node::Add(vec![t.clone(), t.clone(), t]));
    assert_eq!(normalize(&s).unwrap(), Expr::one());
}

// ---------------------------------------------------------------- lattice

#[test]
fn stencils_are_symmetric_and_isotropic() {
    for name in [StencilName::D2Q9, StencilName::D3Q15, StencilName::D3Q19, StencilName::D3Q27] {
        let st = make_stencil(name);
        for a in 0..3 {
            assert_eq!(st.velocities.iter().map(|v| v[a]).sum::<i32>(), 0);
            for b in 0..3 {
                let s: i32 = st.velocities.iter().map(|v| v[a] * v[b]).sum();
                if a != b {
                    assert_eq!(s, 0, "{name}");
                }
            }
        }
        let diag: Vec<i32> =
            (0..st.dim).map(|a| st.velocities.iter().map(|v| v[a] * v[a]).sum()).collect();
        assert!(diag.windows(2).all(|w| w[0] == w[1]), "{name}");
    }
}

#[test]
fn orthogonal_bases_are_orthogonal() {
    for name in STENCILS {
        let st = make_stencil(name);
        for weighted in [false, true] {
            let b = orthogonalize_basis(&st, weighted);
            for i in 0..b.len() {
                for j in 0..i {
                    assert!(inner_product(&st, &b.polynomials[i], &b.polynomials[j], weighted).is_zero());
                }
            }
        }
        assert!(!monomial_basis(&st).moment_matrix(&st).determinant().is_zero());
    }
}

// ---------------------------------------------------------------- moments

proptest! {
    #[test]
    fn chimera_forward_equals_matrix_forward(
        which in 0usize..3, values in prop::collection::vec(0.0f64..1.0, 27),
    ) {
        let st = make_stencil(STENCILS[which]);
        let exps = monomial_exponents(&st);
        let syms: Vec<Symbol> = (0..st.q()).map(|i| Symbol::new(format!("f_{i}"))).collect();
        let f: Vec<Expr> = syms.iter().map(Expr::from_symbol).collect();
        let ac = chimera_forward_raw(&st, &exps, &f, &MomentNames::new("m", st.dim));
        let env: Env = syms.iter().cloned().zip(values.iter().copied()).collect();
        let chimera = ac.evaluate_outputs(&env).unwrap();
        let m = raw_moment_matrix(&st, &monomial_basis(&st)).unwrap();
        for (r, c) in chimera.iter().enumerate() {
            let direct: f64 = (0..st.q()).map(|i| rational_to_f64(&m[(r, i)]) * values[i]).sum();
            prop_assert!((direct - c).abs() < 1e-13);
        }
    }
}

// ---------------------------------------------------------------- method and simplify

struct Rules {
    raw: lbmforge::method::CollisionRule,
    simplified: lbmforge::method::CollisionRule,
}

/// D2Q9 rules for every preset in every admissible regime.
fn d2q9_rules() -> &'static Vec<Rules> {
    static CELL: OnceLock<Vec<Rules>> = OnceLock::new();
    CELL.get_or_init(|| {
        let mut out = Vec::new();
        for m in MethodPreset::ALL {
            for regime in REGIMES {
                if m == MethodPreset::Cumulant && regime == Regime::ZeroCenteredDelta {
                    continue;
                }
                let raw = derive(&with_regime(&preset_spec(StencilName::D2Q9, m), regime));
                let simplified = simplify(&raw, &SimplificationConfig::full());
                out.push(Rules { raw, simplified });
            }
        }
        out
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn collisions_conserve_mass_and_momentum(seed in any::<u64>(), which in 0usize..14) {
        let r = &d2q9_rules()[which];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = params_with(&r.raw, &mut rng);
        let x = state_for(&r.raw, &mut rng);
        let st = &r.raw.method.stencil;
        let before = mass_momentum(st, &x);
        for rule in [&r.raw, &r.simplified] {
            let after = mass_momentum(st, &rule.evaluate(&x, &p).unwrap());
            prop_assert!(max_abs_diff(&before, &after) <= 1e-12);
        }
    }

    #[test]
    fn simplification_preserves_outputs(seed in any::<u64>(), which in 0usize..14) {
        let r = &d2q9_rules()[which];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = params_with(&r.raw, &mut rng);
        let x = state_for(&r.raw, &mut rng);
        let a = r.raw.evaluate(&x, &p).unwrap();
        let b = r.simplified.evaluate(&x, &p).unwrap();
        prop_assert!(max_abs_diff(&a, &b) <= 1e-12);
        prop_assert!(r.simplified.op_count().total <= r.raw.op_count().total);
    }

    #[test]
    fn background_is_a_fixed_point(which in 0usize..14, rate in 0.05f64..1.95) {
        let r = &d2q9_rules()[which];
        let st = &r.raw.method.stencil;
        let w = weights(st);
        let x: Vec<f64> = if r.raw.method.storage == StorageFormat::ZeroCentered { vec![0.0; st.q()] } else { w.clone() };
        let out = r.simplified.evaluate(&x, &uniform_params(&r.raw, rate)).unwrap();
        prop_assert!(max_abs_diff(&out, &x) <= 1e-14);
    }
}

// ---------------------------------------------------------------- kernelgen

fn tapes() -> &'static (KernelTape, KernelTape, Env) {
    static CELL: OnceLock<(KernelTape, KernelTape, Env)> = OnceLock::new();
    CELL.get_or_init(|| {
        let raw = derive(&preset_spec(StencilName::D2Q9, MethodPreset::Cumulant));
        let simplified = simplify(&raw, &SimplificationConfig::full());
        let p = uniform_params(&raw, 1.4);
        let t = |r| compile_tape(&apply_streaming(r, StreamingPattern::Pull)).unwrap();
        (t(&raw), t(&simplified), p)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn simplified_tape_matches_unsimplified(seed in any::<u64>()) {
        let (raw, simplified, p) = tapes();
        let rule = &raw.bound.rule;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = Field::new(&[6, 5], 9).unwrap();
        for c in 0..f.cells() {
            let v = state_for(rule, &mut rng);
            f.set_cell(c, &v);
        }
        let (mut a, mut b) = (f.clone(), f.clone());
        raw.execute_step(&f, &mut a, p).unwrap();
        simplified.execute_step(&f, &mut b, p).unwrap();
        let st = &rule.method.stencil;
        for c in 0..f.cells() {
            let (x, y) = (absolute(rule, &a.cell(c)), absolute(rule, &b.cell(c)));
            prop_assert!(max_abs_diff(&x, &y) <= 1e-12 * x.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        }
        let (m0, m1) = (
            (0..f.cells()).map(|c| mass_momentum(st, &absolute(rule, &f.cell(c)))).fold([0.0; 4], add4),
            (0..f.cells()).map(|c| mass_momentum(st, &absolute(rule, &b.cell(c)))).fold([0.0; 4], add4),
        );
        prop_assert!(max_abs_diff(&m0, &m1) <= 1e-12 * m0[0]);
    }
}

fn add4(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]
}

// ---------------------------------------------------------------- harness

#[test]
fn tgv_csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SpecFile::from_json(r#"{"stencil": "D2Q9", "preset": "CM", "regularization": "full"}"#)
        .unwrap()
        .resolve()
        .unwrap();
    let cfg = TgvConfig { l: 16, steps: 40, ..TgvConfig::default() };
    let mut bytes = Vec::new();
    for k in 0..2 {
        let path = dir.path().join(format!("run{k}.csv"));
        lbmforge::harness::tgv_run(&cfg, &spec).unwrap().write_csv(&path).unwrap();
        bytes.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
    assert!(String::from_utf8(bytes[0].clone()).unwrap().starts_with("step,energy_ratio,analytic_ratio\n"));
}
