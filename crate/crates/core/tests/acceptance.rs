//! One test per acceptance criterion; each prints a PASS line on success.

use std::f64::consts::{E, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use massera_core::bebutov::{bebutov_distance, check_lemma_l1, SampledFunction, Trichotomy};
use massera_core::chain::{build_chain_graph, chain_recurrent_set};
use massera_core::dynamics::{iterate_map, verify_cocycle};
use massera_core::expr::{parse, BinOp, Constant, Expr, Func, Var};
use massera_core::integrator::integrate;
use massera_core::period::{
    classify_asymptotic, classify_s_asymptotic, find_fixed_points, classify_stability,
    full_analysis, AOutcome, AnalysisSettings, PeriodMap, SVerdict, Stability, Verdict,
};
use massera_core::presets;
use massera_core::{IntegratorConfig, ScalarField};

#[test]
fn acceptance_1_exp1_reproduction() {
    let p = presets::exp1();
    let out = full_analysis(&p.field, 0.0, &p.settings).unwrap();
    let traj = &out.trajectory;

    // (a) 1000 checkpoints against the closed form sin(sqrt(pi^2 + t)).
    let mut worst = 0.0_f64;
    for i in 0..1000 {
        let t = 4e5 * i as f64 / 999.0;
        let exact = (PI * PI + t).sqrt().sin();
        worst = worst.max((traj.sample(t).unwrap() - exact).abs());
    }
    assert!(worst < 1e-5, "checkpoint sup error {worst}");

    // (b) S-classification passes and the residual at t = 2e5 sits under
    // the mean-value bound tau / (2 sqrt(t)).
    let s = classify_s_asymptotic(&out.residuals, 1e-2, 0.25, 0.5).unwrap();
    assert_eq!(s.verdict, SVerdict::Pass, "tail sup {}", s.tail_sup);
    let t_mid = 2e5;
    let r_mid = (traj.sample(t_mid + 2.0 * PI).unwrap() - traj.sample(t_mid).unwrap()).abs();
    let bound = 2.0 * PI / (2.0 * t_mid.sqrt()) + 1e-6;
    assert!(r_mid < bound, "residual {r_mid} vs bound {bound}");

    // (c) The iterate sequence phi(2 pi k) does not converge.
    let n = out.iterates.len();
    let tail = &out.iterates[3 * n / 4..];
    let a = classify_asymptotic(tail, 1e-6, 1e-2).unwrap();
    assert_eq!(a.outcome, AOutcome::NotConverged);
    assert!(a.span > 1.9, "tail span {}", a.span);

    // (d) delta estimate ~ [-1, 1].
    assert!((out.report.delta.alpha + 1.0).abs() < 1e-3, "{}", out.report.delta.alpha);
    assert!((out.report.delta.beta - 1.0).abs() < 1e-3, "{}", out.report.delta.beta);

    // (e) overall verdict.
    assert_eq!(out.report.verdict, Verdict::NotAsymptoticallyPeriodic);
    println!("acceptance 1 (exP1 reproduction): PASS");
}

#[test]
fn acceptance_2_exdp1_reproduction() {
    let p = presets::exdp1();
    let traj = iterate_map(&p.field, 0.0, 400_000, &p.settings.cfg).unwrap();
    assert!(traj.blew_up.is_none());

    let k = 2e5;
    let r = (traj.sample(k + 7.0).unwrap() - traj.sample(k).unwrap()).abs();
    let bound = 7.0 / (2.0 * k.sqrt()) + 1e-12;
    assert!(r < bound, "residual {r} vs bound {bound}");

    // {x(7k)}: the last half must still span a wide interval.
    let ks: Vec<f64> = (0..=57_142).map(|j| traj.sample(7.0 * j as f64).unwrap()).collect();
    let tail = &ks[ks.len() / 2..];
    let span = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - tail.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(span > 1.5, "tail span {span}");
    println!("acceptance 2 (exDP1 reproduction): PASS");
}

#[test]
fn acceptance_3_beverton_holt() {
    let p = presets::beverton_holt(2.0, None, None).unwrap();
    let mut limits = Vec::new();
    for u0 in [0.5, 5.0, 50.0] {
        let out = full_analysis(&p.field, u0, &p.settings).unwrap();
        assert_eq!(
            out.report.verdict,
            Verdict::AsymptoticallyPeriodic,
            "u0={u0}: span {}, notes {:?}",
            out.report.iterate_tail_span,
            out.report.notes
        );
        limits.push(out.report.iterate_limit.unwrap());
    }
    for i in 0..limits.len() {
        for j in i + 1..limits.len() {
            assert!(
                (limits[i] - limits[j]).abs() <= 1e-6,
                "limits disagree: {limits:?}"
            );
        }
    }

    // Oracle: iterate the limiting periodic equation directly for 1e6
    // steps; the result must be a fixed point of the 2-step limiting map.
    let limiting = p.field.limiting();
    let oracle = iterate_map(&limiting, 5.0, 1_000_000, &p.settings.cfg)
        .unwrap()
        .final_value();
    let f2 = |u: f64| {
        let v = limiting.eval(0.0, u).unwrap();
        limiting.eval(1.0, v).unwrap()
    };
    assert!((f2(oracle) - oracle).abs() <= 1e-8, "oracle {oracle}");
    // Closed form of the composed map fixed point: 90/13.
    assert!((oracle - 90.0 / 13.0).abs() < 1e-9);
    for &l in &limits {
        assert!((l - oracle).abs() < 1e-5, "limit {l} vs oracle {oracle}");
    }
    println!("acceptance 3 (Beverton-Holt): PASS");
}

#[test]
fn acceptance_4_logistic_fixed_points() {
    let p = presets::logistic();
    let pm = PeriodMap::build(&p.field, 1.0, p.settings.cfg).unwrap();

    let v = pm.eval(0.5).unwrap();
    assert!((v - E / (1.0 + E)).abs() < 1e-7, "P(0.5) = {v}");

    let scan = find_fixed_points(&pm, -0.5, 1.5, 4096, 1e-9).unwrap();
    assert!(!scan.non_transverse_continuum);
    assert_eq!(scan.records.len(), 2, "{:?}", scan.records);
    assert!(scan.records[0].u_star.abs() < 1e-9);
    assert!((scan.records[1].u_star - 1.0).abs() < 1e-9);
    let s0 = classify_stability(&pm, &scan.records[0], 0.01, 1e-9).unwrap();
    let s1 = classify_stability(&pm, &scan.records[1], 0.01, 1e-9).unwrap();
    assert_eq!(s0, Stability::NegativelyAsymptoticallyStable);
    assert_eq!(s1, Stability::PositivelyAsymptoticallyStable);
    println!("acceptance 4 (logistic fixed points): PASS");
}

#[test]
fn acceptance_5_th139_consistency() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1397);
    for case in 0..25 {
        let c = 0.5 + rng.gen::<f64>();
        let a0: f64 = rng.gen_range(-1.0..1.0);
        let a1: f64 = rng.gen_range(-1.0..1.0);
        let b1: f64 = rng.gen_range(-1.0..1.0);
        let d0: f64 = rng.gen_range(-1.0..1.0);
        let d1: f64 = rng.gen_range(-1.0..1.0);
        let p_src = format!("-{c}*x+{a0}+{a1}*cos(2*pi*t)+{b1}*sin(2*pi*t)");
        let r_src = format!("exp(-t)*({d0}+{d1}*cos(2*pi*t))");
        let f_src = format!("{p_src}+{r_src}");
        let field = ScalarField::ode(parse(&f_src).unwrap(), format!("th139-{case}"))
            .with_decomposition(parse(&p_src).unwrap(), parse(&r_src).unwrap(), 1.0)
            .unwrap();
        let settings = AnalysisSettings {
            tau: 1.0,
            horizon: 300.0,
            ..Default::default()
        };
        let u0 = rng.gen_range(-2.0..2.0);
        let out = full_analysis(&field, u0, &settings).unwrap();
        let s = classify_s_asymptotic(&out.residuals, settings.s_tol, 0.25, settings.s_fail)
            .unwrap();
        if s.verdict != SVerdict::Pass {
            continue;
        }
        // Every accumulation value of the iterate tail is a period-map
        // fixed point.
        let pm = PeriodMap::build(&field, 1.0, settings.cfg).unwrap();
        let tail = &out.iterates[out.iterates.len() - 5..];
        for &v in tail {
            let res = (pm.eval(v).unwrap() - v).abs();
            assert!(res <= 1e-5, "case {case}: |P(v)-v| = {res} at v={v}");
        }
    }
    println!("acceptance 5 (th1.3.9 consistency): PASS");
}

#[test]
fn acceptance_6_lemma_l1_trichotomy() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x61);
    let random_pl = |rng: &mut ChaCha8Rng| {
        let values: Vec<f64> = (0..41).map(|_| rng.gen_range(-1.0..1.0)).collect();
        SampledFunction::new(
            massera_core::bebutov::DomainKind::FullLine,
            3.0,
            -60.0,
            values,
        )
        .unwrap()
    };
    for case in 0..200 {
        let f1 = random_pl(&mut rng);
        let f2 = random_pl(&mut rng);
        let eps = rng.gen_range(0.02..0.9);
        let lemma = check_lemma_l1(&f1, &f2, eps).unwrap();
        let d = bebutov_distance(&f1, &f2, 59.5).unwrap();
        assert!(!d.truncated);
        let rel_d = if (d.value - eps).abs() <= 1e-9 {
            Trichotomy::Equal
        } else if d.value < eps {
            Trichotomy::Less
        } else {
            Trichotomy::Greater
        };
        assert_eq!(
            rel_d, lemma.relation,
            "case {case}: d={} eps={eps} window_sup={}",
            d.value, lemma.window_sup
        );
    }
    println!("acceptance 6 (Lemma l1 trichotomy): PASS");
}

#[test]
fn acceptance_7_chain_recurrence() {
    let cfg = IntegratorConfig::default();
    let points: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();

    let half = ScalarField::map(parse("x/2").unwrap(), "half");
    let pm_half = PeriodMap::build(&half, 1.0, cfg).unwrap();
    let g = build_chain_graph(&pm_half, &points, 0.01, 1, 20).unwrap();
    let report = chain_recurrent_set(&g);
    assert_eq!(report.recurrent_indices, vec![0], "contraction recurrent set");

    let ident = ScalarField::map(parse("x").unwrap(), "id");
    let pm_id = PeriodMap::build(&ident, 1.0, cfg).unwrap();
    let g_id = build_chain_graph(&pm_id, &points, 0.01, 1, 20).unwrap();
    let report_id = chain_recurrent_set(&g_id);
    assert_eq!(report_id.recurrent_indices.len(), points.len());

    let mut previous: Option<Vec<usize>> = None;
    for eps in [0.005, 0.01, 0.05] {
        let g = build_chain_graph(&pm_half, &points, eps, 1, 20).unwrap();
        let rec = chain_recurrent_set(&g).recurrent_indices;
        if let Some(prev) = &previous {
            assert!(
                prev.iter().all(|i| rec.contains(i)),
                "eps-monotonicity broken at eps={eps}"
            );
        }
        previous = Some(rec);
    }
    println!("acceptance 7 (chain recurrence): PASS");
}

#[test]
fn acceptance_8_order_and_cocycle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x8);
    let cfg = IntegratorConfig::default();
    for case in 0..100 {
        let c = 0.5 + 1.5 * rng.gen::<f64>();
        let a1: f64 = rng.gen_range(-1.0..1.0);
        let b1: f64 = rng.gen_range(-1.0..1.0);
        let src = format!("-{c}*x+{a1}*cos(t)+{b1}*sin(2*t)");
        let field = ScalarField::ode(parse(&src).unwrap(), format!("rand-{case}"));

        let u0 = rng.gen_range(-2.0..2.0);
        let s = rng.gen_range(1.0..20.0);
        let t = rng.gen_range(1.0..20.0);
        let residual = verify_cocycle(&field, u0, s, t, &cfg).unwrap();
        let budget = 10.0 * (cfg.rel_tol * (s + t) + cfg.abs_tol);
        assert!(residual <= budget, "case {case}: residual {residual} > {budget}");

        // The contraction closes the gap to ~1e-18 by t = 20, so the order
        // comparison needs integration error well below the 1e-9 band.
        let tight = IntegratorConfig {
            rel_tol: 1e-12,
            abs_tol: 1e-14,
            ..cfg
        };
        let u1 = rng.gen_range(-2.0..0.0);
        let u2 = u1 + rng.gen_range(0.1..2.0);
        let t1 = integrate(&field, u1, 0.0, 20.0, &tight).unwrap();
        let t2 = integrate(&field, u2, 0.0, 20.0, &tight).unwrap();
        for i in 0..=50 {
            let ts = 20.0 * i as f64 / 50.0;
            let (x1, x2) = (t1.sample(ts).unwrap(), t2.sample(ts).unwrap());
            assert!(x1 <= x2 + 1e-9, "case {case}: order violated at t={ts}");
        }
    }
    println!("acceptance 8 (order and cocycle): PASS");
}

fn random_tree(rng: &mut ChaCha8Rng, depth: usize) -> Expr {
    if depth == 0 {
        return match rng.gen_range(0..4) {
            // Nonnegative literals: the parser never produces negative
            // Num nodes (a leading `-` lexes as unary minus).
            0 => Expr::Num(rng.gen_range(0.0..10.0)),
            1 => Expr::Var(Var::T),
            2 => Expr::Var(Var::X),
            _ => Expr::Const(if rng.gen() { Constant::Pi } else { Constant::E }),
        };
    }
    match rng.gen_range(0..3) {
        0 => Expr::Neg(Box::new(random_tree(rng, depth - 1))),
        1 => {
            let op = match rng.gen_range(0..5) {
                0 => BinOp::Add,
                1 => BinOp::Sub,
                2 => BinOp::Mul,
                3 => BinOp::Div,
                _ => BinOp::Pow,
            };
            Expr::Bin(
                op,
                Box::new(random_tree(rng, depth - 1)),
                Box::new(random_tree(rng, depth - 1)),
            )
        }
        _ => {
            let func = match rng.gen_range(0..8) {
                0 => Func::Sin,
                1 => Func::Cos,
                2 => Func::Tan,
                3 => Func::Sqrt,
                4 => Func::Exp,
                5 => Func::Log,
                6 => Func::Abs,
                _ => Func::Floor,
            };
            Expr::Call(func, Box::new(random_tree(rng, depth - 1)))
        }
    }
}

#[test]
fn acceptance_9_parser() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9);
    for case in 0..500 {
        let depth = rng.gen_range(1..6);
        let e = random_tree(&mut rng, depth);
        let reparsed = parse(&e.format()).unwrap_or_else(|err| {
            panic!("case {case}: {err} in {}", e.format());
        });
        assert_eq!(e, reparsed, "case {case}: round trip failed");
    }

    // Preset expressions against hand-coded closed forms.
    let rel_close = |a: f64, b: f64| {
        let scale = a.abs().max(b.abs()).max(1e-300);
        (a - b).abs() / scale <= 4e-16
    };
    let exp1 = parse("cos(sqrt(pi^2+t))/(2*sqrt(pi^2+t))").unwrap();
    let exdp1 = parse("x+sin(sqrt(pi^2+t+1))-sin(sqrt(pi^2+t))").unwrap();
    let logistic = parse("x*(1-x)").unwrap();
    let bh = parse("2*(8+2*cos(pi*t)+5/(1+t))*x/((8+2*cos(pi*t)+5/(1+t))+(2-1)*x)").unwrap();
    for i in 0..1000 {
        let t = 1000.0 * i as f64 / 999.0;
        let x = -3.0 + 6.0 * i as f64 / 999.0;
        let s = (PI * PI + t).sqrt();
        assert!(rel_close(exp1.eval(t, x).unwrap(), s.cos() / (2.0 * s)));
        assert!(rel_close(
            exdp1.eval(t, x).unwrap(),
            x + (PI * PI + t + 1.0).sqrt().sin() - s.sin()
        ));
        assert!(rel_close(logistic.eval(t, x).unwrap(), x * (1.0 - x)));
        let k = 8.0 + 2.0 * (PI * t).cos() + 5.0 / (1.0 + t);
        let xp = x.abs(); // keep the BH denominator away from zero
        assert!(rel_close(
            bh.eval(t, xp).unwrap(),
            2.0 * k * xp / (k + (2.0 - 1.0) * xp)
        ));
    }
    println!("acceptance 9 (parser): PASS");
}
