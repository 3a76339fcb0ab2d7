//! One function per subcommand, each returning draft records and a CSV table.

use polyosc::dynamics::{
    convergence_experiment, diagonal_schedule, ergodic_average_quadrature, fit_inverse_min, oscillation_statistics,
    radon_average_direct, radon_average_grid, torus_grid, TorusSystem, TrigPolynomial,
};
use polyosc::gluing::{compute_n0, split_variation_multi, GluingData};
use polyosc::lattice::{ChainSequence, ExponentMatrix, MonomialMap, ParamGrid, SampleFamily};
use polyosc::multipliers::{
    cancellation_norm, decay_scan, off_diagonal_constant, off_diagonal_slope, radon_multiplier, PeriodicField,
};
use polyosc::rademacher_menshov::{rm_bound_1d, rm_bound_multi};
use polyosc::rng::{random_chain, random_compatible_family, random_dyadic, random_family, random_grid, seeded, SeededRng};
use polyosc::seminorms::{
    oscillation, pointwise_max_bound_check, sup_oscillation, variation_bruteforce, variation_with,
    VariationOptions, BRUTEFORCE_POINT_GUARD, DP_POINT_GUARD,
};
use polyosc::Complex64;
use serde_json::json;

use crate::config::{Command, ExperimentConfig};
use crate::{list, num, to_value, Check, CliError, Draft, Table};

type Output = Result<(Vec<Draft>, Table), CliError>;

pub fn dispatch(config: &ExperimentConfig) -> Output {
    match config.command() {
        Command::Variation => variation_cmd(config),
        Command::Oscillation => oscillation_cmd(config),
        Command::RmCheck => rm_check(config),
        Command::Gluing => gluing(config),
        Command::SplittingCheck => splitting_check(config),
        Command::Multiplier => multiplier(config),
        Command::DecayScan => decay(config),
        Command::OffdiagScan => offdiag(config),
        Command::Cancellation => cancellation(config),
        Command::ErgodicRun => ergodic_run(config),
        Command::RadonRun => radon_run(config),
        Command::OscStats => osc_stats(config),
    }
}

fn rng(config: &ExperimentConfig, stream: u64) -> SeededRng {
    seeded(config.experiment.seed, stream)
}

fn map(config: &ExperimentConfig) -> Result<MonomialMap, CliError> {
    Ok(MonomialMap::new(ExponentMatrix::new(config.exponents())?))
}

/// Families named by the config: the explicit one, or `trials` random
/// families on the configured shape, each from its own stream.
fn families(config: &ExperimentConfig) -> Result<Vec<SampleFamily>, CliError> {
    let f = &config.family;
    if let Some(axes) = &f.axes {
        let grid = ParamGrid::new(axes.clone())?;
        let family = match &f.values {
            Some(v) => SampleFamily::new(grid, v.iter().map(|&[re, im]| Complex64::new(re, im)).collect())?,
            None => random_family(&mut rng(config, 0), grid)?,
        };
        return Ok(vec![family]);
    }
    (0..config.trials())
        .map(|t| {
            let mut r = rng(config, t as u64);
            let grid = random_grid(&mut r, &f.shape)?;
            Ok(random_family(&mut r, grid)?)
        })
        .collect()
}

fn point_guard(config: &ExperimentConfig, family: &SampleFamily) -> Result<VariationOptions, CliError> {
    let n = family.grid().len();
    match config.experiment.budget {
        Some(b) if n as u64 > b => Err(CliError::Budget(format!("{n} grid points exceed the budget {b}"))),
        Some(_) => Ok(VariationOptions { force: true }),
        None if n > DP_POINT_GUARD => Err(CliError::Budget(format!("{n} grid points exceed {DP_POINT_GUARD}"))),
        None => Ok(VariationOptions::default()),
    }
}

fn variation_cmd(config: &ExperimentConfig) -> Output {
    let tol = config.tolerance();
    let mut drafts = Vec::new();
    let mut table = Table::new(&["family", "rho", "value", "bruteforce", "chain_length"]);
    for (i, family) in families(config)?.iter().enumerate() {
        let opts = point_guard(config, family)?;
        let mut certificates = Vec::new();
        let mut checks = Vec::new();
        for &rho in &config.variation.rho {
            let cert = variation_with(family, rho, opts)?;
            checks.push(Check::equal(format!("certificate_reevaluates/rho={rho}"), cert.reevaluate(family)?, cert.value, 1e-12));
            let brute = if family.grid().len() <= BRUTEFORCE_POINT_GUARD {
                let b = variation_bruteforce(family, rho)?;
                checks.push(Check::equal(format!("matches_bruteforce/rho={rho}"), cert.value, b, tol));
                Some(b)
            } else {
                None
            };
            table.push(vec![
                i.to_string(),
                num(rho),
                num(cert.value),
                brute.map(num).unwrap_or_default(),
                cert.chain.len().to_string(),
            ]);
            certificates.push(json!({ "certificate": to_value(&cert), "bruteforce": brute }));
        }
        for w in certificates.windows(2) {
            let (a, b) = (w[0]["certificate"]["value"].as_f64().unwrap(), w[1]["certificate"]["value"].as_f64().unwrap());
            let (ra, rb) = (w[0]["certificate"]["rho"].as_f64().unwrap(), w[1]["certificate"]["rho"].as_f64().unwrap());
            if ra <= rb {
                checks.push(Check::at_most(format!("rho_monotone/{ra}>={rb}"), b, a, 1.0, 1e-12));
            }
        }
        drafts.push(Draft {
            experiment: format!("variation/family={i}"),
            outputs: json!({ "shape": family.grid().shape(), "variations": certificates }),
            checks,
        });
    }
    Ok((drafts, table))
}

fn oscillation_cmd(config: &ExperimentConfig) -> Output {
    let osc = &config.oscillation;
    let tol = config.tolerance();
    let mut drafts = Vec::new();
    let mut table = Table::new(&["family", "chain", "steps", "oscillation", "variation2", "dominated"]);
    for (i, family) in families(config)?.iter().enumerate() {
        let opts = point_guard(config, family)?;
        let v2 = variation_with(family, 2.0, opts)?.value;
        let chains: Vec<ChainSequence> = match &osc.chains {
            Some(cs) => cs.iter().map(|c| ChainSequence::from_coords(c.clone())).collect::<Result<_, _>>()?,
            None => {
                let mut r = rng(config, 1 << 32 | i as u64);
                let mut out = Vec::new();
                for _ in 0..osc.random_chains {
                    if let Some(c) = random_chain(&mut r, family.grid(), osc.steps)? {
                        out.push(c);
                    }
                }
                out
            }
        };
        let mut checks = Vec::new();
        let mut reports = Vec::new();
        for (c, chain) in chains.iter().enumerate() {
            let report = oscillation(family, chain)?;
            let check = Check::at_most(format!("oscillation_le_variation/chain={c}"), report.value, v2, 1.0, tol);
            table.push(vec![
                i.to_string(),
                c.to_string(),
                chain.steps().to_string(),
                num(report.value),
                num(v2),
                check.pass.to_string(),
            ]);
            checks.push(check);
            let points: Vec<&[f64]> = chain.points().iter().map(|p| p.coords()).collect();
            reports.push(json!({ "chain": points, "report": to_value(&report) }));
        }
        let bound = pointwise_max_bound_check(family)?;
        checks.push(Check::at_most("pointwise_max_bound", bound.sup, bound.anchor_max + bound.oscillation, 1.0, tol));
        let sup = match sup_oscillation(family, osc.steps) {
            Ok(s) => {
                checks.push(Check::at_most("sup_oscillation_le_variation", s.value, v2, 1.0, tol));
                Some(s)
            }
            Err(polyosc::Error::Guard(_)) => None,
            Err(e) => return Err(e.into()),
        };
        drafts.push(Draft {
            experiment: format!("oscillation/family={i}"),
            outputs: json!({
                "variation2": v2,
                "oscillations": reports,
                "max_bound": to_value(&bound),
                "sup_oscillation": sup.map(|s| to_value(&s)),
            }),
            checks,
        });
    }
    Ok((drafts, table))
}

fn rm_check(config: &ExperimentConfig) -> Output {
    let rm = &config.rm;
    let l0 = rm.data_depth.unwrap_or(rm.depth);
    let tol = config.tolerance();
    let mut table = Table::new(&["trial", "lhs", "rhs", "constant", "ratio", "pass"]);
    let mut checks = Vec::new();
    let (mut max_ratio, mut constant) = (0.0f64, 0.0);
    for t in 0..config.trials() {
        let mut r = rng(config, t as u64);
        let family = random_dyadic(&mut r, rm.depth, l0, rm.k0, rm.k0 > 1)?;
        let bound = if rm.k0 == 1 { rm_bound_1d(&family)? } else { rm_bound_multi(&family)? };
        let check = Check::at_most(format!("rm_bound/trial={t}"), bound.lhs, bound.rhs, bound.constant, tol);
        max_ratio = max_ratio.max(bound.ratio());
        constant = bound.constant;
        table.push(vec![
            t.to_string(),
            num(bound.lhs),
            num(bound.rhs),
            num(bound.constant),
            num(bound.ratio()),
            check.pass.to_string(),
        ]);
        checks.push(check);
    }
    let violations = checks.iter().filter(|c| !c.pass).count();
    let draft = Draft {
        experiment: format!("rm-check/k0={}/L={}/L0={l0}", rm.k0, rm.depth),
        outputs: json!({
            "k0": rm.k0,
            "depth": rm.depth,
            "data_depth": l0,
            "trials": config.trials(),
            "constant": constant,
            "max_ratio": max_ratio,
            "violations": violations,
        }),
        checks,
    };
    Ok((vec![draft], table))
}

/// All `n ∈ ℤ^r` with `|n|_∞ <= n_max`, last coordinate fastest.
fn cube_indices(r: usize, n_max: i64) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..r {
        out = out
            .into_iter()
            .flat_map(|p| {
                (-n_max..=n_max).map(move |v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

fn gluing(config: &ExperimentConfig) -> Output {
    let map = map(config)?;
    let g = GluingData::new(&map)?;
    let reduced = g.reduced_map().clone();
    let tol = config.tolerance();
    let mut table = Table::new(&["n", "s", "image", "max_rel_error"]);
    let mut worst = 0.0f64;
    for n in cube_indices(g.rank(), config.gluing.n_max) {
        let s = g.select_scale(&n)?;
        let image = reduced.evaluate(s.coords())?;
        let err = image
            .iter()
            .zip(&n)
            .map(|(y, &v)| {
                let want = (v as f64).exp2();
                (y - want).abs() / want
            })
            .fold(0.0, f64::max);
        worst = worst.max(err);
        table.push(vec![list(&n), list(s.coords()), list(&image), num(err)]);
    }
    let n0 = compute_n0(reduced.matrix())?;
    let checks = vec![
        Check::at_most("selector_hits_dyadic_points", worst, 0.0, 1.0, tol),
        Check::equal("n0_recomputed", f64::from(n0), f64::from(g.n0()), 0.0),
    ];
    let draft = Draft {
        experiment: "gluing".into(),
        outputs: json!({ "exponents": config.exponents(), "summary": to_value(&g.summary()), "max_rel_error": worst }),
        checks,
    };
    Ok((vec![draft], table))
}

fn splitting_check(config: &ExperimentConfig) -> Output {
    let sp = &config.splitting;
    let map = map(config)?;
    let g = GluingData::new(&map)?;
    let axis: Vec<f64> = (sp.exponent_range.0..=sp.exponent_range.1).map(|i| f64::from(i).exp2()).collect();
    let grid = ParamGrid::new(vec![axis; map.k()])?;
    if let Some(b) = config.experiment.budget {
        if grid.len() as u64 > b {
            return Err(CliError::Budget(format!("{} grid points exceed the budget {b}", grid.len())));
        }
    }
    let mut table = Table::new(&["trial", "full", "long", "short_l2", "ratio", "pass"]);
    let mut checks = Vec::new();
    let mut worst = 0.0f64;
    for t in 0..config.trials() {
        let family = random_compatible_family(&mut rng(config, t as u64), &map, grid.clone(), sp.terms)?;
        let report = split_variation_multi(&family, &g)?.split;
        let check = Check::at_most(format!("splitting/trial={t}"), report.full, report.long + report.short_l2, sp.constant, 1e-12);
        worst = worst.max(report.ratio);
        table.push(vec![
            t.to_string(),
            num(report.full),
            num(report.long),
            num(report.short_l2),
            num(report.ratio),
            check.pass.to_string(),
        ]);
        checks.push(check);
    }
    let draft = Draft {
        experiment: "splitting-check".into(),
        outputs: json!({ "summary": to_value(&g.summary()), "empirical_constant": worst, "constant": sp.constant }),
        checks,
    };
    Ok((vec![draft], table))
}

fn multiplier(config: &ExperimentConfig) -> Output {
    let mc = &config.multiplier;
    let map = map(config)?;
    let quad = config.quadrature();
    let tol = config.tolerance();
    let s = mc.s.clone().unwrap_or_else(|| vec![1.0; map.k()]);
    let direction = mc.direction.clone().unwrap_or_else(|| vec![1.0; map.d()]);
    let mut table = Table::new(&["t", "xi", "re", "im", "abs", "refined_diff"]);
    let zero = radon_multiplier(&map, &s, &vec![0.0; map.d()], &quad)?;
    let mut checks = vec![Check::equal("multiplier_at_zero", zero.re, 1.0, 1e-10), Check::equal("multiplier_at_zero_im", zero.im, 0.0, 1e-10)];
    let mut worst = 0.0f64;
    for p in 0..mc.points {
        let t = if mc.points == 1 {
            mc.t_range.0
        } else {
            mc.t_range.0 + (mc.t_range.1 - mc.t_range.0) * p as f64 / (mc.points - 1) as f64
        };
        let xi: Vec<f64> = direction.iter().map(|v| t * v).collect();
        let m = radon_multiplier(&map, &s, &xi, &quad)?;
        let fine = radon_multiplier(&map, &s, &xi, &quad.refined())?;
        let diff = (m - fine).norm();
        worst = worst.max(diff);
        table.push(vec![num(t), list(&xi), num(m.re), num(m.im), num(m.norm()), num(diff)]);
    }
    checks.push(Check::at_most("panel_doubling_stability", worst, 0.0, 1.0, tol));
    let draft = Draft {
        experiment: "multiplier".into(),
        outputs: json!({ "s": s, "direction": direction, "refined_max_diff": worst }),
        checks,
    };
    Ok((vec![draft], table))
}

fn decay(config: &ExperimentConfig) -> Output {
    let map = map(config)?;
    let scan = decay_scan(&map, &config.decay.samples, &config.quadrature())?;
    let mut table = Table::new(&["delta", "constant", "samples"]);
    for f in &scan.fits {
        table.push(vec![num(f.delta), num(f.constant), f.samples.to_string()]);
    }
    let selected = scan.selected.as_ref().map(|f| f.delta).unwrap_or(0.0);
    let constant = scan.selected.as_ref().map(|f| f.constant).unwrap_or(f64::INFINITY);
    let checks = vec![
        Check::new("selected_delta", crate::Relation::AtLeast, selected, config.decay.min_delta, 1.0, 0.0),
        Check::at_most("selected_constant", constant, config.decay.samples.ceiling, 1.0, 0.0),
    ];
    let draft = Draft { experiment: "decay-scan".into(), outputs: to_value(&scan), checks };
    Ok((vec![draft], table))
}

/// Nonnegative `h ∈ ℤ^r` with `|h|_1 <= h_max`, ordered by `|h|_1` then
/// lexicographically.
fn offsets(r: usize, h_max: i64) -> Vec<Vec<i64>> {
    let mut all: Vec<Vec<i64>> = cube_indices(r, h_max).into_iter().filter(|h| h.iter().all(|&v| v >= 0)).collect();
    all.retain(|h| h.iter().sum::<i64>() <= h_max);
    all.sort_by_key(|h| (h.iter().sum::<i64>(), h.clone()));
    all
}

fn offdiag(config: &ExperimentConfig) -> Output {
    let o = &config.offdiag;
    let g = GluingData::new(&map(config)?)?;
    let quad = config.quadrature();
    let mut scan = Vec::new();
    let mut table = Table::new(&["h", "h_l1", "sup", "normalized", "samples", "skipped"]);
    for h in offsets(g.rank(), o.h_max) {
        let r = off_diagonal_constant(&g, &h, &o.frequencies, &quad)?;
        table.push(vec![
            list(&h),
            h.iter().sum::<i64>().to_string(),
            num(r.sup),
            num(r.normalized),
            r.samples.to_string(),
            r.skipped.to_string(),
        ]);
        scan.push(r);
    }
    let slope = off_diagonal_slope(&scan);
    let checks = vec![Check::at_most("log2_c_h_slope_negative", slope.unwrap_or(f64::INFINITY), 0.0, 1.0, 0.0)];
    let draft = Draft {
        experiment: "offdiag-scan".into(),
        outputs: json!({ "summary": to_value(&g.summary()), "scan": to_value(&scan), "slope": slope }),
        checks,
    };
    Ok((vec![draft], table))
}

fn cancellation(config: &ExperimentConfig) -> Output {
    let c = &config.cancellation;
    let quad = config.quadrature();
    let k = c.alpha.len();
    let mut table = Table::new(&["subset", "h_over_s", "norm", "ratio"]);
    let mut checks = Vec::new();
    let mut worst = 0.0f64;
    for mask in 1u32..(1 << k) {
        let subset: Vec<usize> = (0..k).filter(|i| mask >> i & 1 == 1).collect();
        for &q in &c.ratios {
            let h: Vec<f64> = c.s.iter().map(|s| q * s).collect();
            let r = cancellation_norm(&c.alpha, &c.s, &h, &subset, &quad)?;
            worst = worst.max(r.ratio);
            let check = Check::at_most(format!("cancellation/K={}/q={q}", list(&subset)), r.ratio, c.limit, 1.0, 0.0);
            table.push(vec![list(&subset), num(q), num(r.norm), num(r.ratio)]);
            checks.push(check);
        }
    }
    let draft = Draft {
        experiment: "cancellation".into(),
        outputs: json!({ "alpha": c.alpha, "s": c.s, "max_ratio": worst, "limit": c.limit }),
        checks,
    };
    Ok((vec![draft], table))
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Configured flows, or `scale · φ e_j` on `T^d`.
fn system(config: &ExperimentConfig, d: usize, scale: f64) -> Result<TorusSystem, CliError> {
    let dirs = config.dynamics.directions.clone().unwrap_or_else(|| {
        (0..d)
            .map(|j| (0..d).map(|i| if i == j { scale * GOLDEN } else { 0.0 }).collect())
            .collect()
    });
    Ok(TorusSystem::new(dirs)?)
}

fn observable(config: &ExperimentConfig, dim: usize, zero_mean: bool) -> Result<TrigPolynomial, CliError> {
    let dy = &config.dynamics;
    match &dy.terms {
        Some(terms) => Ok(TrigPolynomial::new(dim, terms.clone())?),
        None => Ok(TrigPolynomial::random(&mut rng(config, 7), dim, dy.random_terms, dy.max_freq, zero_mean)),
    }
}

fn sampled_sup(f: &TrigPolynomial, n: usize) -> f64 {
    torus_grid(f.dim(), n).iter().map(|x| f.eval(x).norm()).fold(0.0, f64::max)
}

fn ergodic_run(config: &ExperimentConfig) -> Output {
    let dy = &config.dynamics;
    let map = map(config)?;
    let quad = config.quadrature();
    let sys = system(config, map.d(), 1.0)?;
    let f = observable(config, sys.dim(), true)?;
    let schedule = diagonal_schedule(map.k(), dy.schedule.0, dy.schedule.1);
    let series = convergence_experiment(&sys, &f, &map, &schedule, dy.points_per_axis, &quad)?;
    let fitted = fit_inverse_min(&series);
    let sup_f = sampled_sup(&f, 4 * dy.points_per_axis);
    let mut table = Table::new(&["m", "min_m", "deviation"]);
    for p in &series {
        table.push(vec![list(&p.m), num(p.min_m), num(p.deviation)]);
    }
    let last = series.last().map(|p| p.deviation).unwrap_or(0.0);
    // spot check of the spectral route against direct quadrature
    let m0 = &schedule[0];
    let x0 = vec![0.25; sys.dim()];
    let direct = ergodic_average_quadrature(&sys, &f, &map, m0, &x0, &quad)?;
    let spectral = polyosc::dynamics::ergodic_average_spectral(&sys, &f, &map, m0, &quad)?.eval(&x0);
    let checks = vec![
        Check::at_most("final_deviation", last, sup_f, dy.threshold, 0.0),
        Check::new("fitted_constant_positive", crate::Relation::AtLeast, fitted, 0.0, 1.0, 0.0),
        Check::at_most("quadrature_matches_spectral", (direct - spectral).norm(), 0.0, 1.0, 1e-6),
    ];
    let draft = Draft {
        experiment: "ergodic-run".into(),
        outputs: json!({
            "system": to_value(&sys),
            "observable": to_value(&f),
            "sup_f_sampled": sup_f,
            "fitted_constant": fitted,
            "series": to_value(&series),
        }),
        checks,
    };
    Ok((vec![draft], table))
}

fn radon_run(config: &ExperimentConfig) -> Output {
    let rc = &config.radon;
    let map = map(config)?;
    let quad = config.quadrature();
    let m = rc.m.clone().unwrap_or_else(|| vec![1.0; map.k()]);
    let period: Vec<f64> = rc.extent.iter().map(|e| 2.0 * e).collect();
    let dim = map.d();
    let f = TrigPolynomial::random(&mut rng(config, 0), dim, rc.random_terms, 3, false);
    let field = PeriodicField::from_fn(rc.shape.clone(), rc.extent.clone(), |x| {
        let y: Vec<f64> = x.iter().zip(&period).map(|(a, p)| a / p).collect();
        f.eval(&y)
    })?;
    let avg = radon_average_grid(&field, &map, &m, &quad)?;
    let total = field.samples().len();
    let stride = (total / rc.check_points.max(1)).max(1);
    let mut worst = 0.0f64;
    let mut table = Table::new(&["index", "x", "average_re", "average_im", "direct_re", "direct_im"]);
    for idx in (0..total).step_by(stride).take(rc.check_points) {
        let x = sample_point(&field, idx);
        let direct = radon_average_direct(&field, &map, &m, &x, 8, quad.order)?;
        let v = avg.samples()[idx];
        worst = worst.max((direct - v).norm());
        table.push(vec![idx.to_string(), list(&x), num(v.re), num(v.im), num(direct.re), num(direct.im)]);
    }
    let checks = vec![
        Check::at_most("mean_preserved", (avg.mean() - field.mean()).norm(), 0.0, 1.0, 1e-10),
        Check::at_most("grid_matches_direct_quadrature", worst, 0.0, 1.0, config.tolerance()),
    ];
    let draft = Draft {
        experiment: "radon-run".into(),
        outputs: json!({
            "m": m,
            "observable": to_value(&f),
            "mean": [field.mean().re, field.mean().im],
            "l2_before": field.l2_norm(),
            "l2_after": avg.l2_norm(),
            "max_direct_diff": worst,
        }),
        checks,
    };
    Ok((vec![draft], table))
}

fn sample_point(field: &PeriodicField, mut flat: usize) -> Vec<f64> {
    let shape = field.shape();
    let mut x = vec![0.0; shape.len()];
    for i in (0..shape.len()).rev() {
        let j = flat % shape[i];
        flat /= shape[i];
        x[i] = -field.extent()[i] + 2.0 * field.extent()[i] * j as f64 / shape[i] as f64;
    }
    x
}

fn osc_stats(config: &ExperimentConfig) -> Output {
    let os = &config.osc_stats;
    let map = map(config)?;
    let sys = system(config, map.d(), 1.0 / 16.0)?;
    let f = observable(config, sys.dim(), false)?;
    let stats = oscillation_statistics(&sys, &f, &map, &os.stats, &mut rng(config, 11), &config.quadrature())?;
    let mut table = Table::new(&["p", "steps", "max_ratio", "mean_ratio"]);
    for s in &stats.per_steps {
        table.push(vec![num(s.p), s.steps.to_string(), num(s.max_ratio), num(s.mean_ratio)]);
    }
    let checks = stats
        .per_exponent
        .iter()
        .map(|e| Check::at_most(format!("no_growth_in_j/p={}", e.p), e.tail_trend.unwrap_or(0.0), os.max_trend, 1.0, 0.0))
        .collect();
    let draft = Draft {
        experiment: "osc-stats".into(),
        outputs: json!({ "system": to_value(&sys), "observable": to_value(&f), "stats": to_value(&stats) }),
        checks,
    };
    Ok((vec![draft], table))
}
