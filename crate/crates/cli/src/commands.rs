use std::fs;
use std::path::{Path, PathBuf};

use fracperim::domain::{
    cluster_boundary, make_domain, mask_indices, parse_grid, serialize_grid, serialize_soft, BoundaryMode, SeedDescriptor,
};
use fracperim::energy::{cluster_perimeter, fmt17};
use fracperim::extension::{check_monotonicity, default_levels, phi_profile, poisson_extend, serialize_slab};
use fracperim::kernel::{build_kernel, save_kernel, KernelOptions};
use fracperim::lemmas::{
    self, check_density, check_infiltration, check_isoperimetric, check_sandwich, default_xi, local_stability, paper_constants,
    CheckReport, DensityBounds, PaperConstants, CSV_HEADER,
};
use fracperim::solver::{self, AnnealSchedule, RepairOptions, SolveConfig};
use fracperim::{Domain, Error, Grid, Kernel};
use serde_json::{json, Value};

use crate::config::{parse_list, Config};
use crate::{CliError, ConfigArgs, Format, Outcome, Suite};

fn load(cfg: &ConfigArgs) -> Result<Config, CliError> {
    Config::load(cfg.config.as_deref(), &cfg.set)
}

pub fn read_grid(path: &Path) -> Result<Grid, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(parse_grid(&bytes)?)
}

fn out_dir(flag: Option<PathBuf>, cfg: &Config) -> Result<PathBuf, CliError> {
    let dir = flag.unwrap_or_else(|| PathBuf::from(cfg.get("output.dir")));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn mode(raw: &str) -> Result<BoundaryMode, CliError> {
    match raw {
        "periodic" => Ok(BoundaryMode::Periodic),
        "free" => Ok(BoundaryMode::Free),
        other => Err(CliError::Usage(format!("domain.mode must be periodic or free, got {other:?}"))),
    }
}

fn domain_from(cfg: &Config) -> Result<Domain, CliError> {
    let n: usize = cfg.parsed("domain.n")?;
    let cells: usize = cfg.parsed("domain.cells")?;
    Ok(make_domain(n, &vec![cells; n.clamp(1, 3)], cfg.parsed("domain.L")?, mode(cfg.get("domain.mode"))?, cfg.parsed("domain.s")?)?)
}

fn kernel_for(d: &Domain, cfg: &Config) -> Result<Kernel, CliError> {
    let opts = KernelOptions { lattice_cutoff: cfg.optional("kernel.latticeCutoff")?, tail_tolerance: cfg.parsed("kernel.tailTolerance")? };
    Ok(build_kernel(d, opts)?)
}

/// Replaces the domain-dependent `auto` values with numbers.
fn materialize(cfg: &Config, d: &Domain, chambers: usize) -> Result<Config, CliError> {
    let mut out = cfg.clone();
    let l = d.side_length();
    if out.is_auto("constants.r0") {
        out.set("constants.r0", &(0.25 * l).to_string())?;
    }
    if out.is_auto("constants.xi") {
        out.set("constants.xi", &default_xi(d.n()).to_string())?;
    }
    let pc = constants(&out, d, chambers)?;
    if out.is_auto("check.c0") {
        out.set("check.c0", &pc.c0.to_string())?;
    }
    if out.is_auto("check.c1") {
        let c0: f64 = out.parsed("check.c0")?;
        out.set("check.c1", &(1.0 - c0).to_string())?;
    }
    if out.is_auto("solver.centers") {
        let k = cfg.list("solver.volumes")?.len().max(1);
        let points: Vec<String> = (0..k)
            .map(|h| {
                let mut c = vec![0.5 * l; d.n()];
                c[0] = (h as f64 + 0.5) / k as f64 * l;
                c.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
            })
            .collect();
        out.set("solver.centers", &points.join("; "))?;
    }
    Ok(out)
}

fn constants(cfg: &Config, d: &Domain, chambers: usize) -> Result<PaperConstants, CliError> {
    let r0 = cfg.optional("constants.r0")?.unwrap_or(0.25 * d.side_length());
    let xi = cfg.optional("constants.xi")?.unwrap_or(default_xi(d.n()));
    Ok(paper_constants(d.n(), d.s(), chambers.max(1), cfg.parsed("constants.lambda")?, r0, xi)?)
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json values serialize") + "\n"
}

fn domain_json(d: &Domain) -> Value {
    json!({ "n": d.n(), "cells": d.side(), "L": d.side_length(), "s": d.s(), "mode": d.mode().as_str() })
}

pub fn kernel(args: &ConfigArgs, out: Option<PathBuf>) -> Outcome {
    let cfg = load(args)?;
    let d = domain_from(&cfg)?;
    let k = kernel_for(&d, &cfg)?;
    let path = match out {
        Some(p) => p,
        None => out_dir(None, &cfg)?.join("kernel.fclk"),
    };
    write(&path, save_kernel(&k))?;
    let unit: Vec<isize> = (0..d.n()).map(|a| isize::from(a == 0)).collect();
    let info = json!({
        "domain": domain_json(&d),
        "latticeCutoff": k.lattice_cutoff(),
        "tailBound": k.tail_bound(),
        "unitOffset": k.k(&unit),
        "file": path.display().to_string(),
    });
    print!("{}", pretty(&info));
    Ok(true)
}

pub fn energy(grid: &Path, format: Format, args: &ConfigArgs) -> Outcome {
    let cfg = load(args)?;
    let g = read_grid(grid)?;
    let k = kernel_for(g.domain(), &cfg)?;
    let b = cluster_perimeter(&g, &k)?;
    match format {
        Format::Text => {
            println!("total {}", fmt17(b.total));
            for (h, v) in b.per_chamber.iter().enumerate() {
                println!("chamber {h} {}", fmt17(*v));
            }
        }
        Format::Json => println!("{}", b.to_json()),
        Format::Csv => print!("{}", b.to_csv()),
    }
    Ok(true)
}

fn solve_config(cfg: &Config) -> Result<SolveConfig<f64>, CliError> {
    let volumes = cfg.list("solver.volumes")?;
    let seed: u64 = cfg.parsed("seed")?;
    let init = match cfg.get("solver.init") {
        "balls" => {
            let centers = cfg
                .get("solver.centers")
                .split(';')
                .map(|p| parse_list(p).map_err(|e| CliError::Usage(format!("config solver.centers: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            SeedDescriptor::Balls { centers, volumes: volumes.clone() }
        }
        "random" => SeedDescriptor::Random { volumes: Some(volumes.clone()), seed },
        other => return Err(CliError::Usage(format!("solver.init must be balls or random, got {other:?}"))),
    };
    let mut sc = SolveConfig::new(volumes, init);
    sc.max_iters = cfg.parsed("solver.maxIters")?;
    sc.step = cfg.parsed("solver.step")?;
    sc.energy_tol = cfg.parsed("solver.energyTol")?;
    sc.concavity = cfg.parsed("solver.concavity")?;
    sc.binarize = cfg.parsed("solver.binarize")?;
    sc.repair = cfg.parsed("solver.repair")?;
    sc.repair_options = RepairOptions { budget: cfg.parsed("solver.repairBudget")?, constant: cfg.parsed("solver.repairConstant")? };
    sc.seed = seed;
    if cfg.parsed::<bool>("anneal.enabled")? {
        sc.anneal = Some(AnnealSchedule {
            steps: cfg.parsed("anneal.steps")?,
            t0: cfg.parsed("anneal.t0")?,
            tail: cfg.parsed("anneal.tail")?,
            polish: cfg.parsed("anneal.polish")?,
        });
    }
    Ok(sc)
}

pub fn minimize(args: &ConfigArgs, out: Option<PathBuf>) -> Outcome {
    let raw = load(args)?;
    let d = domain_from(&raw)?;
    let chambers = raw.list("solver.volumes")?.len();
    let cfg = materialize(&raw, &d, chambers)?;
    let sc = solve_config(&cfg)?;
    let k = kernel_for(&d, &cfg)?;
    let dir = out_dir(out, &cfg)?;
    let r = solver::minimize(&sc, &k)?;
    let b = cluster_perimeter(&r.grid, &k)?;

    write(&dir.join("config.txt"), cfg.to_text())?;
    write(&dir.join("result.fclg"), serialize_grid(&r.grid))?;
    write(&dir.join("soft.fcls"), serialize_soft(&r.soft))?;
    let mut trace = String::from("iteration,energy,residual,step\n");
    for t in &r.trace {
        trace += &format!("{},{},{},{}\n", t.iteration, fmt17(t.energy), fmt17(t.residual), fmt17(t.step));
    }
    write(&dir.join("trace.csv"), trace)?;
    let repair = r.repair.as_ref().map(|rp| {
        json!({
            "moves": rp.moves.len(),
            "deltaEnergy": rp.delta_energy,
            "bound": rp.bound,
            "certified": rp.certified,
        })
    });
    let summary = json!({
        "domain": domain_json(&d),
        "chambers": sc.chambers,
        "targetVolumes": sc.volumes,
        "volumes": r.volumes,
        "cellCounts": r.grid.counts(),
        "energy": r.energy,
        "perChamber": b.per_chamber,
        "termination": r.termination.as_str(),
        "iterations": r.trace.len(),
        "repair": repair,
        "seed": cfg.parsed::<u64>("seed")?,
        "wallClockSeconds": r.wall_clock,
    });
    write(&dir.join("summary.json"), pretty(&summary))?;
    println!("energy {}", fmt17(r.energy));
    println!("termination {}", r.termination.as_str());
    println!("wrote {}", dir.display());
    Ok(true)
}

/// Up to `count` cells spread evenly over the sorted cluster boundary.
fn sample_boundary(g: &Grid, count: usize) -> Vec<usize> {
    let all = mask_indices(&cluster_boundary(g));
    if all.is_empty() || count == 0 {
        return Vec::new();
    }
    let k = count.min(all.len());
    (0..k).map(|j| all[j * all.len() / k]).collect()
}

/// Largest number of whole cells a ball around `x` may extend in every direction.
fn room(d: &Domain, x: usize) -> f64 {
    if d.is_periodic() {
        return f64::INFINITY;
    }
    let c = d.coords(x);
    c[..d.n()].iter().map(|&k| k.min(d.side() - 1 - k)).min().unwrap_or(0) as f64
}

struct CheckRun<'a> {
    grid: &'a Grid,
    cfg: Config,
    pc: PaperConstants,
    kernel: Option<Kernel>,
}

impl CheckRun<'_> {
    fn kernel(&mut self) -> Result<&Kernel, CliError> {
        if self.kernel.is_none() {
            self.kernel = Some(kernel_for(self.grid.domain(), &self.cfg)?);
        }
        Ok(self.kernel.as_ref().expect("just built"))
    }

    fn bounds(&self) -> Result<DensityBounds, CliError> {
        Ok(DensityBounds::with_densities(&self.pc, self.cfg.parsed("check.c0")?, self.cfg.parsed("check.c1")?))
    }

    fn applicable(&self, suite: Suite) -> Option<String> {
        let d = self.grid.domain();
        match suite {
            Suite::Sandwich if d.is_periodic() => Some("needs free mode".into()),
            Suite::Sandwich if self.grid.chambers() < 2 => Some("needs at least two chambers".into()),
            Suite::Isoperimetric if d.is_periodic() => Some("needs free mode".into()),
            _ => None,
        }
    }

    fn run(&mut self, suite: Suite) -> Result<Vec<CheckReport>, CliError> {
        let g = self.grid;
        let d = g.domain().clone();
        let h = d.cell_size();
        Ok(match suite {
            Suite::All => unreachable!("expanded by the caller"),
            Suite::Constants => {
                let [a, b] = self.pc.identity_defects();
                let mut r = CheckReport::new("constants", 1e-12);
                r.measure("identity.c2", a).bound("identity.c2", 1e-12);
                r.measure("identity.chi1", b).bound("identity.chi1", 1e-12);
                r.note("xi", self.pc.xi).note("c0", self.pc.c0).note("C1", self.pc.c1).note("r1", self.pc.r1);
                r.fail_if(a > 1e-12 || b > 1e-12);
                vec![r]
            }
            Suite::Sandwich => {
                let sets: Vec<Vec<bool>> = (1..=g.chambers()).map(|c| g.mask(c)).collect();
                vec![check_sandwich(&sets, self.kernel()?)?]
            }
            Suite::Isoperimetric => {
                let ps = self.pc.ps_ball;
                let mut out = Vec::new();
                for c in 1..=g.chambers() {
                    let m = g.mask(c);
                    if m.iter().any(|&b| b) {
                        let mut r = check_isoperimetric(&m, self.kernel()?, ps)?;
                        r.note("chamber", c);
                        out.push(r);
                    }
                }
                out
            }
            Suite::Density => {
                let bounds = self.bounds()?;
                let cap = self.pc.r1.min(0.25 * d.side_length());
                let points = sample_boundary(g, self.cfg.parsed("check.points")?);
                let mut out = Vec::new();
                for x in points {
                    let radii: Vec<f64> = (0..)
                        .map(|k| 2.0 * h * 2f64.powf(0.5 * k as f64))
                        .take_while(|&r| r < cap)
                        .filter(|&r| r / h <= room(&d, x))
                        .collect();
                    if radii.is_empty() {
                        continue;
                    }
                    let pc = self.pc;
                    out.push(check_density(g, x, &radii, &pc, &bounds, self.kernel()?)?);
                }
                if out.is_empty() {
                    let mut r = CheckReport::new("density", 0.0);
                    r.diagnostic = true;
                    r.note("reason", "no boundary point admits a radius of at least two cells below min(r1, L/4)").note("r1", self.pc.r1);
                    out.push(r);
                }
                out
            }
            Suite::Infiltration => vec![check_infiltration(g, &self.pc, &self.bounds()?)?],
            Suite::Stability => {
                let (lambda, r0) = (self.pc.lambda, self.pc.r0);
                let trials = self.cfg.parsed("check.trials")?;
                let seed = self.cfg.parsed("seed")?;
                vec![local_stability(g, lambda, r0, trials, seed, self.kernel()?)?]
            }
            Suite::Monotonicity => {
                let fixed: Option<f64> = self.cfg.optional("check.lambdaPrime")?;
                let top = 0.25 * d.side_length();
                let radii: Vec<f64> = (0..5).map(|k| 4.0 * h * 2f64.powf(0.25 * k as f64)).filter(|&r| r <= top).collect();
                let mut out = Vec::new();
                for x in sample_boundary(g, self.cfg.parsed("check.points")?) {
                    let pr = phi_profile(g, x, &radii)?;
                    out.push(check_monotonicity(&pr, fixed.unwrap_or(pr.lambda_prime))?);
                }
                out
            }
        })
    }
}

const ALL: [Suite; 7] =
    [Suite::Constants, Suite::Sandwich, Suite::Isoperimetric, Suite::Density, Suite::Infiltration, Suite::Stability, Suite::Monotonicity];

pub fn check(grid: &Path, suite: Option<Suite>, args: &ConfigArgs, out: Option<PathBuf>) -> Outcome {
    let raw = load(args)?;
    let g = read_grid(grid)?;
    let cfg = materialize(&raw, g.domain(), g.chambers())?;
    let suite = match suite {
        Some(s) => s,
        None => {
            <Suite as clap::ValueEnum>::from_str(cfg.get("check.suite"), true).map_err(|e| CliError::Usage(format!("check.suite: {e}")))?
        }
    };
    let pc = constants(&cfg, g.domain(), g.chambers())?;
    let mut run = CheckRun { grid: &g, cfg: cfg.clone(), pc, kernel: None };
    let mut reports = Vec::new();
    if suite == Suite::All {
        for s in ALL {
            if let Some(why) = run.applicable(s) {
                eprintln!("skipping {s:?}: {why}");
                continue;
            }
            reports.extend(run.run(s)?);
        }
    } else {
        reports.extend(run.run(suite)?);
    }
    let mut ndjson = String::new();
    let mut csv = String::from(CSV_HEADER);
    for r in &reports {
        ndjson += &r.to_ndjson();
        ndjson.push('\n');
        csv += &r.to_csv_rows();
    }
    print!("{ndjson}");
    if let Some(dir) = out {
        fs::create_dir_all(&dir)?;
        write(&dir.join("reports.ndjson"), &ndjson)?;
        write(&dir.join("checks.csv"), &csv)?;
        write(&dir.join("config.txt"), cfg.to_text())?;
    }
    let failed: Vec<&str> = reports.iter().filter(|r| !r.pass && !r.diagnostic).map(|r| r.check.as_str()).collect();
    if !failed.is_empty() {
        eprintln!("failed: {}", failed.join(", "));
    }
    Ok(failed.is_empty())
}

pub fn nucleate(grid: &Path, chamber: usize, eps: Option<f64>, args: &ConfigArgs) -> Outcome {
    let raw = load(args)?;
    let g = read_grid(grid)?;
    if chamber > g.chambers() {
        return Err(CliError::Usage(format!("chamber {chamber} exceeds N = {}", g.chambers())));
    }
    let cfg = materialize(&raw, g.domain(), g.chambers())?;
    let pc = constants(&cfg, g.domain(), g.chambers())?;
    let k = kernel_for(g.domain(), &cfg)?;
    let e = g.mask(chamber);
    let eps = match eps {
        Some(v) => v,
        None => lemmas::nucleation_epsilon_bound(&e, &k, &pc)?,
    };
    let nuc = lemmas::nucleate(&e, eps, &k, &pc)?;
    print!("{}", pretty(&serde_json::to_value(&nuc).expect("serializable")));
    Ok(true)
}

pub fn truncate(grid: &Path, reference: &Path, tau: f64, args: &ConfigArgs, out: Option<PathBuf>) -> Outcome {
    let raw = load(args)?;
    let g = read_grid(grid)?;
    let f = read_grid(reference)?;
    if !g.domain().same_as(f.domain()) {
        return Err(Error::DomainMismatch("grid", "reference").into());
    }
    let cfg = materialize(&raw, g.domain(), g.chambers())?;
    let pc = constants(&cfg, g.domain(), g.chambers())?;
    let k = kernel_for(g.domain(), &cfg)?;
    let mask: Vec<bool> = f.labels().iter().map(|&l| l != 0).collect();
    let t = match lemmas::truncate(&g, &mask, tau, &k, &pc) {
        Ok(t) => t,
        Err(Error::NoRadius(table)) => {
            eprintln!("no radius satisfies the truncation inequality");
            print!("{table}");
            return Ok(false);
        }
        Err(e) => return Err(e.into()),
    };
    let dir = out_dir(out, &cfg)?;
    write(&dir.join("truncated.fclg"), serialize_grid(&t.grid))?;
    let mut csv = String::from("radius,lhs,rhs,distance,holds\n");
    for r in &t.table {
        csv += &format!("{},{},{},{},{}\n", fmt17(r.radius), fmt17(r.lhs), fmt17(r.rhs), fmt17(r.distance), r.holds);
    }
    write(&dir.join("truncation.csv"), csv)?;
    let info = json!({
        "r0": t.r0,
        "radiusCap": t.radius_cap,
        "degenerate": t.degenerate,
        "energyBefore": t.energy_before,
        "energyAfter": t.energy_after,
        "distance": t.distance,
    });
    print!("{}", pretty(&info));
    Ok(true)
}

fn cell_index(d: &Domain, raw: &str) -> Result<usize, CliError> {
    let c: Vec<usize> = raw
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| CliError::Usage(format!("--cell {raw:?}: {e}"))))
        .collect::<Result<_, _>>()?;
    if c.len() != d.n() || c.iter().any(|&x| x >= d.side()) {
        return Err(CliError::Usage(format!("--cell {raw:?} needs {} coordinates below {}", d.n(), d.side())));
    }
    Ok(d.index(&c))
}

fn list_flag(name: &str, raw: &str) -> Result<Vec<f64>, CliError> {
    parse_list(raw).map_err(|e| CliError::Usage(format!("{name}: {e}")))
}

pub fn phi(grid: &Path, cell: &str, radii: Option<&str>, lambda: Option<f64>, out: Option<PathBuf>, slab: Option<usize>) -> Outcome {
    let g = read_grid(grid)?;
    let d = g.domain();
    let x = cell_index(d, cell)?;
    let h = d.cell_size();
    let radii = match radii {
        Some(r) => list_flag("--radii", r)?,
        None => (0..5).map(|k| 4.0 * h * 2f64.powf(0.25 * k as f64)).collect(),
    };
    let pr = phi_profile(&g, x, &radii)?;
    let lam = lambda.unwrap_or(pr.lambda_prime);
    let report = check_monotonicity(&pr, lam)?;
    let csv = pr.to_csv(lam);
    match &out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            write(&dir.join("phi.csv"), &csv)?;
            let mut v = serde_json::to_value(&pr).expect("serializable");
            v["report"] = serde_json::to_value(&report).expect("serializable");
            write(&dir.join("monotonicity.json"), pretty(&v))?;
            if let Some(c) = slab {
                if c > g.chambers() {
                    return Err(CliError::Usage(format!("--slab {c} exceeds N = {}", g.chambers())));
                }
                let f = poisson_extend(&g.mask(c), d, &default_levels(d), None)?;
                write(&dir.join(format!("slab{c}.fcls")), serialize_slab(&f)?)?;
            }
            println!("{}", report.to_ndjson());
        }
        None => {
            if slab.is_some() {
                return Err(CliError::Usage("--slab needs --out".into()));
            }
            print!("{csv}");
            eprintln!("{}", report.to_ndjson());
        }
    }
    Ok(report.pass)
}

pub fn blowup(grid: &Path, cell: &str, scales: Option<&str>) -> Outcome {
    let g = read_grid(grid)?;
    let d = g.domain();
    let x = cell_index(d, cell)?;
    let h = d.cell_size();
    let scales = match scales {
        Some(s) => list_flag("--scales", s)?,
        None => {
            let mut r = (0.25 * d.side_length()).min(32.0 * h);
            let mut v = Vec::new();
            while r >= 4.0 * h * (1.0 - 1e-12) {
                v.push(r);
                r *= 0.5;
            }
            v
        }
    };
    let rep = lemmas::blowup(&g, x, &scales)?;
    print!("{}", pretty(&serde_json::to_value(&rep).expect("serializable")));
    Ok(true)
}
