//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Oracles are closed forms computed here, not by the library.

use std::f64::consts::{LN_2, PI};
use std::process::ExitCode;
use std::time::Instant;

use infmeasure::delta::{
    default_eps_schedule, default_n_schedule, delta_via_families, delta_via_integral, mean_value_point, scaling_ratio,
    sifting, NascentDelta, ScalingStatus,
};
use infmeasure::equidist::{equidist_ratio, product_family, product_family_with, SequenceKind};
use infmeasure::linmap::{baker_special_case, block_determinants, map_rectangle_measure, BlockLinearMap};
use infmeasure::presets::{factor_preset, rect_preset, u_corpus};
use infmeasure::rect::{consistency_values, rect_measure, ElementaryRect};
use infmeasure::riemann::{darboux, grid_partition, riemann_average, riemann_integral, RiemannOptions};
use infmeasure::{CylinderFn, GroupingAlpha, Interval, IntervalSeq, ProductMode, ProductStatus};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn iv(a: f64, b: f64) -> Interval {
    Interval::new(a, b).unwrap()
}

fn corpus() -> Vec<(CylinderFn, f64)> {
    // (f, f(0)) with f(0) written out by hand
    ["const_7", "cos_1", "proj_1+proj_2", "exp_1"]
        .iter()
        .zip([7.0, 1.0, 0.0, 1.0])
        .map(|(n, v)| (CylinderFn::by_name(n).unwrap(), v))
        .collect()
}

fn ac1_products() -> Outcome {
    let alt = factor_preset("alternating_harmonic").unwrap();
    let t = Instant::now();
    let o = infmeasure::products::ordinary_product(&alt, 1e-10, 1_000_000).map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    let v = o.value().unwrap_or(f64::NAN);
    let s = infmeasure::products::standard_product(&alt, 1e-10, 1_000_000).map_err(|e| e.to_string())?;
    let two_half = factor_preset("alternating_two_half").unwrap();
    let g = infmeasure::products::grouped_product(
        &two_half,
        &GroupingAlpha::uniform(2),
        ProductMode::Ordinary,
        1e-10,
        1_000_000,
    )
    .map_err(|e| e.to_string())?;
    let ok = o.status == ProductStatus::Converged
        && (v - 0.5).abs() <= 1e-6
        && secs < 1.0
        && s.status == ProductStatus::Zero
        && s.partials_inspected <= 100_000
        && g.status == ProductStatus::Converged
        && g.value() == Some(1.0);
    check(
        ok,
        format!(
            "ordinary={v:.10} ({}, {} terms, {secs:.3}s) standard={} after {} terms, grouped={:?}",
            o.status,
            o.partials_inspected,
            s.status,
            s.partials_inspected,
            g.value()
        ),
    )
}

fn ac2_measure_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    for j in 1..=12 {
        let eps = 0.5f64.powi(j);
        let r = rect_preset("delta_box", Some(eps)).unwrap();
        let oracle = -(2f64.powi(j));
        for mode in [ProductMode::Ordinary, ProductMode::Standard] {
            let m = rect_measure(&r, &GroupingAlpha::ones(), mode).map_err(|e| e.to_string())?;
            worst = worst.max(((m.log_value - oracle) / oracle).abs());
        }
    }
    let x = rect_preset("X_counterexample", None).unwrap();
    let mu = rect_measure(&x, &GroupingAlpha::ones(), ProductMode::Ordinary).map_err(|e| e.to_string())?;
    let nu = rect_measure(&x, &GroupingAlpha::ones(), ProductMode::Standard).map_err(|e| e.to_string())?;
    let ok = worst < 1e-12
        && (mu.log_value + LN_2).abs() <= 1e-6
        && nu.status == ProductStatus::Zero
        && nu.value() == 0.0;
    check(
        ok,
        format!(
            "max rel log error {worst:.2e}; X: mu={:.10} nu={} ({})",
            mu.value(),
            nu.value(),
            nu.status
        ),
    )
}

fn ac3_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let d = rng.random_range(1..=5usize);
        let (mut h1, mut h2, mut zs, mut over) = (vec![], vec![], vec![], vec![]);
        let mut oracle = 0.0;
        for k in 1..=d {
            let lo = rng.random_range(-3.0..3.0);
            let hi = lo + rng.random_range(0.1..2.0);
            zs.push(iv(lo, hi));
            h1.push(iv(lo - rng.random_range(0.0..1.0), hi + rng.random_range(0.0..1.0)));
            h2.push(iv(lo - rng.random_range(0.0..1.0), hi + rng.random_range(0.0..1.0)));
            let a = rng.random_range(lo..hi);
            let b = rng.random_range(a..=hi);
            if b > a {
                over.push((k, iv(a, b)));
                oracle += (b - a).ln();
            } else {
                oracle += (hi - lo).ln();
            }
        }
        let (r1, r2) = (IntervalSeq::unit_tail(h1), IntervalSeq::unit_tail(h2));
        let x = ElementaryRect::new(IntervalSeq::unit_tail(zs), over).map_err(|e| e.to_string())?;
        let (u, v) = consistency_values(&r1, &r2, &x, &GroupingAlpha::ones(), ProductMode::Ordinary)
            .map_err(|e| e.to_string())?;
        worst = worst.max((u - v).abs()).max((u - oracle).abs());
    }
    let secs = t.elapsed().as_secs_f64();
    check(
        worst <= 1e-10 && secs < 5.0,
        format!("max log disagreement {worst:.2e} over 100 triples in {secs:.3}s"),
    )
}

fn unit_fraction(u: &ElementaryRect) -> f64 {
    u.overrides().values().map(|s| s.hi() - s.lo()).product()
}

fn ac4_equidistribution() -> Outcome {
    let unit = IntervalSeq::unit();
    let vdc = [SequenceKind::VanDerCorput];
    let corpus = u_corpus(0, 20);
    let mut ok = true;
    let mut parts = vec![];
    for (n, bound) in [(4usize, 0.15), (6, 0.10)] {
        let fam = product_family(&unit, &vdc, n).map_err(|e| e.to_string())?;
        let mut worst: f64 = 0.0;
        for u in &corpus {
            worst = worst.max((equidist_ratio(&fam, u).map_err(|e| e.to_string())? - unit_fraction(u)).abs());
        }
        ok &= worst <= bound;
        parts.push(format!("n={n}: max {worst:.4} (<= {bound})"));
    }
    let fam7 = product_family(&unit, &vdc, 7).map_err(|e| e.to_string())?;
    let mut worst7: f64 = 0.0;
    for u in &corpus {
        worst7 = worst7.max((equidist_ratio(&fam7, u).map_err(|e| e.to_string())? - unit_fraction(u)).abs());
    }
    parts.push(format!("n=7: max {worst7:.4} (info)"));
    let fam8 = product_family_with(&unit, &vdc, 8, &[], 8u128.pow(8)).map_err(|e| e.to_string())?;
    let (mut single, mut all): (f64, f64) = (0.0, 0.0);
    let mut singles = 0;
    for u in &corpus {
        let dev = (equidist_ratio(&fam8, u).map_err(|e| e.to_string())? - unit_fraction(u)).abs();
        all = all.max(dev);
        if u.overrides().len() == 1 {
            single = single.max(dev);
            singles += 1;
        }
    }
    ok &= singles > 0 && single <= 0.08;
    parts.push(format!(
        "n=8 single-coordinate ({singles} rects): max {single:.4} (<= 0.08), full corpus {all:.4} (info)"
    ));
    check(ok, parts.join("; "))
}

fn ac5_riemann() -> Outcome {
    let unit = IntervalSeq::unit();
    let one = riemann_integral(&CylinderFn::constant(1.0), &unit, 1e-4).map_err(|e| e.to_string())?;
    let p1 = riemann_integral(&CylinderFn::by_name("proj_1").unwrap(), &unit, 1e-4).map_err(|e| e.to_string())?;
    let prod = riemann_average(&CylinderFn::by_name("prod_12").unwrap(), &unit, &RiemannOptions::new(2e-3))
        .map_err(|e| e.to_string())?
        .integral();
    let mut ok = one == 1.0 && (p1 - 0.5).abs() <= 1e-4 && (prod - 0.25).abs() <= 1e-4;
    let mut ratios = vec![];
    for name in ["proj_1", "cos_1", "sum_12", "proj_1+proj_2", "cos_1@0.5"] {
        let f = CylinderFn::by_name(name).unwrap();
        let mut prev: Option<f64> = None;
        let mut cuts = 1;
        while cuts <= 64 {
            let p = grid_partition(&unit, f.m(), cuts).map_err(|e| e.to_string())?;
            let w = darboux(&f, &p, 2).map_err(|e| e.to_string())?.width_avg();
            if let Some(pw) = prev {
                let r = w / pw;
                ok &= (0.4..=0.6).contains(&r);
                ratios.push(r);
            }
            prev = Some(w);
            cuts *= 2;
        }
    }
    let (lo, hi) = ratios
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &r| (a.min(r), b.max(r)));
    check(
        ok,
        format!("1 -> {one}, proj_1 -> {p1:.8}, prod_12 -> {prod:.8}; width ratios in [{lo:.4}, {hi:.4}]"),
    )
}

fn ac6_delta() -> Outcome {
    let eps = default_eps_schedule();
    let ns = default_n_schedule();
    let mut ok = true;
    let mut parts = vec![];
    for (f, f0) in corpus() {
        let t = Instant::now();
        let a = delta_via_integral(&f, &eps, 5e-4);
        let ta = t.elapsed().as_secs_f64();
        let t = Instant::now();
        let b = delta_via_families(&f, &eps, &ns, 2e-2);
        let tb = t.elapsed().as_secs_f64();
        match (a, b) {
            (Ok(a), Ok(b)) => {
                let (ea, eb) = ((a.value - f0).abs(), (b.value - f0).abs());
                let agree = (a.value - b.value).abs();
                ok &= ea < 1e-3 && eb < 5e-2 && agree <= 5e-2 && ta < 30.0 && tb < 30.0;
                parts.push(format!(
                    "{}: integral {:.6} (err {ea:.1e}, {ta:.2}s) families {:.6} (err {eb:.1e}, n<={}, {tb:.2}s)",
                    f.name(),
                    a.value,
                    b.value,
                    b.n_schedule.iter().max().copied().unwrap_or(0)
                ));
            }
            (a, b) => {
                ok = false;
                parts.push(format!("{}: integral {:?} families {:?}", f.name(), a.err(), b.err()));
            }
        }
    }
    check(ok, parts.join("; "))
}

fn ac7_sifting() -> Outcome {
    let f = CylinderFn::by_name("cos_1").unwrap();
    let oracle = (PI / 6.0).cos();
    let r = sifting(&f, &[PI / 6.0], &default_eps_schedule(), 1e-4).map_err(|e| e.to_string())?;
    check(
        (r.value - oracle).abs() <= 1e-3,
        format!("{:.7} vs {oracle:.7} (gap {:.1e})", r.value, r.cauchy_gap),
    )
}

fn ac8_scaling() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for (alpha, status) in [(2.0, ScalingStatus::Zero), (1.0, ScalingStatus::One), (0.5, ScalingStatus::Infinite)] {
        for d in [5usize, 10, 20] {
            let r = scaling_ratio(alpha, d, 0.1).map_err(|e| e.to_string())?;
            let oracle = -(d as f64) * f64::abs(alpha).ln();
            worst = worst.max((r.log_ratio - oracle).abs());
            ok &= r.status == status;
        }
    }
    check(
        ok && worst <= 1e-10,
        format!("max |log ratio + D ln|a|| = {worst:.2e}; statuses ok = {ok}"),
    )
}

fn ac9_change_of_variables() -> Outcome {
    let e = IntervalSeq::unit_tail(vec![iv(0.0, 2.0), iv(-1.0, 0.5), iv(1.0, 4.0)]);
    let ln_e = 2f64.ln() + 1.5f64.ln() + 3f64.ln();
    let mut ok = true;
    let mut parts = vec![];

    let diag = [2.0, -3.0, 0.25];
    let m = BlockLinearMap::diagonal(&diag).map_err(|e| e.to_string())?;
    let im = map_rectangle_measure(&m, &e, &GroupingAlpha::ones()).map_err(|e| e.to_string())?;
    let oracle = ln_e + 1.5f64.ln();
    let direct = im.direct.map_or(f64::NAN, |d| d.log_value);
    let d_err = (direct - oracle).abs().max((im.predicted.log_value - oracle).abs());
    ok &= im.agrees() && d_err <= 1e-12;
    parts.push(format!("diagonal: discrepancy {:?}, vs oracle {d_err:.1e}", im.log_discrepancy()));

    let perm = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    let pm = BlockLinearMap::new(vec![perm]).map_err(|e| e.to_string())?;
    let ip = map_rectangle_measure(&pm, &e, &GroupingAlpha::leading(3)).map_err(|e| e.to_string())?;
    let p_err = (ip.direct.map_or(f64::NAN, |d| d.log_value) - ln_e).abs();
    ok &= ip.agrees() && p_err <= 1e-12;
    parts.push(format!("permutation: discrepancy {:?}, vs oracle {p_err:.1e}", ip.log_discrepancy()));

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut comp: f64 = 0.0;
    for _ in 0..20 {
        let mut rand_block = |n: usize| DMatrix::from_fn(n, n, |_, _| rng.random_range(-2.0..2.0));
        let a = BlockLinearMap::new(vec![rand_block(2), rand_block(3)]).map_err(|e| e.to_string())?;
        let b = BlockLinearMap::new(vec![rand_block(2), rand_block(3)]).map_err(|e| e.to_string())?;
        let (ja, jb) = (block_determinants(&a), block_determinants(&b));
        let (Ok(ja), Ok(jb)) = (ja, jb) else { continue };
        let jab = block_determinants(&a.compose(&b).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        comp = comp.max((jab.log_product - ja.log_product - jb.log_product).abs());
    }
    ok &= comp <= 1e-10;
    parts.push(format!("composition: max {comp:.1e}"));

    let mut baker: f64 = 0.0;
    for _ in 0..10 {
        let (a, b) = (rng.random_range(0.1..5.0), rng.random_range(-5.0..-0.1));
        let n = DMatrix::from_row_slice(2, 2, &[a, 0.0, 0.0, b]);
        let r = baker_special_case(&n, &e).map_err(|e| e.to_string())?;
        let oracle = (a * b).abs().ln() + ln_e;
        baker = baker.max((r.value().log_value - oracle).abs()).max((r.predicted.log_value - oracle).abs());
        ok &= r.agrees();
    }
    ok &= baker <= 1e-12;
    parts.push(format!("Baker 2x2 diagonal: max {baker:.1e}"));
    check(ok, parts.join("; "))
}

fn ac10_mean_value() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for (f, _) in corpus() {
        for eps in [0.5, 0.25] {
            let mv = mean_value_point(&f, eps, 1e-6, 1e-8).map_err(|e| format!("{}: {e}", f.name()))?;
            let r = (f.eval(&mv.point) - mv.average).abs();
            let inside = NascentDelta::new(eps).unwrap().log_eval(&mv.point).unwrap().is_finite();
            ok &= inside && r <= 1e-8;
            worst = worst.max(r);
        }
    }
    check(ok, format!("max |f(y) - avg| = {worst:.2e}, all points inside their boxes = {ok}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("AC1 products", ac1_products),
        ("AC2 measure identity", ac2_measure_identity),
        ("AC3 consistency", ac3_consistency),
        ("AC4 equidistribution", ac4_equidistribution),
        ("AC5 riemann", ac5_riemann),
        ("AC6 delta functional", ac6_delta),
        ("AC7 sifting", ac7_sifting),
        ("AC8 scaling", ac8_scaling),
        ("AC9 change of variables", ac9_change_of_variables),
        ("AC10 mean value", ac10_mean_value),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(d) => println!("PASS {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL {name}: {d}");
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
