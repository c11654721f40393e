use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::{ErrorArgs, ForwardArgs, PhantomArgs, ReconArgs, Settings, StabilityArgs};
use crate::error::{QpatError, Result};
use crate::field::Field;
use crate::forward::{simulate, standard_illuminations, DataSet, IlluminationSpec, SimulationConfig};
use crate::grid::DiscGrid;
use crate::io::fld::{read_field, write_field};
use crate::io::kv::KeyValues;
use crate::io::pgm::{field_to_image, write_pgm};
use crate::io::write_atomic;
use crate::phantom::{import_raster, preset, rasterize, Coefficient, PHANTOM_A_BACKGROUND_D, PHANTOM_A_BACKGROUND_MU};
use crate::recon::{relative_error, run_pipeline, BoundaryProfile, Completion, ReconConfig, Region};
use crate::sample::{resample, restrict};
use crate::stability::{alpha_beta, check_monotone_decreasing, gamma, r_bound, StabilityParams};

const MANIFEST: &str = "manifest.txt";

fn required(path: Option<PathBuf>, what: &str) -> Result<PathBuf> {
    path.ok_or_else(|| QpatError::config(format!("missing required option --{what}")))
}

fn existing_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(QpatError::config(format!("input file {} not found", path.display())))
    }
}

fn output_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn parse_pair(text: &str, key: &str) -> Result<(f64, f64)> {
    let bad = || QpatError::config(format!("'{key}' expects 'a,b', got '{text}'"));
    let (a, b) = text.split_once(',').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

pub(crate) fn parse_region(text: &str) -> Result<Region> {
    let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if t == "all" {
        return Ok(Region::All);
    }
    t.strip_prefix("y>")
        .and_then(|v| v.parse().ok())
        .map(Region::YAbove)
        .ok_or_else(|| QpatError::config(format!("region must be 'all' or 'y>VALUE', got '{text}'")))
}

fn save(dir: &Path, name: &str, f: &Field, pgm: bool) -> Result<()> {
    write_field(&dir.join(format!("{name}.fld")), f)?;
    if pgm {
        write_pgm(&dir.join(format!("{name}.pgm")), &field_to_image(f))?;
    }
    Ok(())
}

pub fn cmd_phantom(a: &PhantomArgs) -> Result<()> {
    let s = Settings::load(
        a.config.as_ref(),
        &["preset", "raster_d", "raster_mu", "range_d", "range_mu", "n", "out", "pgm"],
    )?;
    let out = required(s.get(a.out.clone(), "out")?, "out")?;
    let name = s.or(a.preset.clone(), "preset", "smooth-A".to_string())?;
    let n = s.or(a.n, "n", 512)?;
    let raster_d = s.get(a.raster_d.clone(), "raster_d")?;
    let raster_mu = s.get(a.raster_mu.clone(), "raster_mu")?;
    let range_d = parse_pair(&s.or(a.range_d.clone(), "range_d", "0.1,0.35".into())?, "range_d")?;
    let range_mu = parse_pair(&s.or(a.range_mu.clone(), "range_mu", "10,35".into())?, "range_mu")?;
    let pgm = s.switch(a.pgm, "pgm")?;
    for p in raster_d.iter().chain(&raster_mu) {
        existing_file(p)?;
    }
    let spec_d = preset(&name, Coefficient::D)?;
    let spec_mu = preset(&name, Coefficient::Mu)?;
    let grid = Arc::new(DiscGrid::new(n, 1.0)?);
    output_dir(&out)?;

    let d = match &raster_d {
        Some(p) => import_raster(p, PHANTOM_A_BACKGROUND_D, range_d, &grid)?,
        None => rasterize(&spec_d, &grid)?,
    };
    let mu = match &raster_mu {
        Some(p) => import_raster(p, PHANTOM_A_BACKGROUND_MU, range_mu, &grid)?,
        None => rasterize(&spec_mu, &grid)?,
    };
    save(&out, "D", &d, pgm)?;
    save(&out, "mu", &mu, pgm)?;
    println!("wrote {} and {} (n={n})", out.join("D.fld").display(), out.join("mu.fld").display());
    Ok(())
}

fn parse_peaks(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| QpatError::config(format!("invalid peak angle '{p}'")))
        })
        .collect()
}

pub fn cmd_forward(a: &ForwardArgs) -> Result<()> {
    let s = Settings::load(
        a.config.as_ref(),
        &["input", "out", "fine_n", "meas_n", "noise", "seed", "peaks", "std", "pgm"],
    )?;
    let input = required(s.get(a.input.clone(), "input")?, "input")?;
    let out = required(s.get(a.out.clone(), "out")?, "out")?;
    let (d_path, mu_path) = (input.join("D.fld"), input.join("mu.fld"));
    existing_file(&d_path)?;
    existing_file(&mu_path)?;
    let noise = s.or(a.noise, "noise", 0.0)?;
    let seed = s.or(a.seed, "seed", 1)?;
    let std = s.or(a.std, "std", 0.3)?;
    let illuminations = match s.get(a.peaks.clone(), "peaks")? {
        Some(p) => parse_peaks(&p)?
            .into_iter()
            .map(|peak| IlluminationSpec::new(peak, std))
            .collect::<Result<Vec<_>>>()?,
        None => standard_illuminations()
            .into_iter()
            .map(|sp| IlluminationSpec::new(sp.peak_angle, std))
            .collect::<Result<Vec<_>>>()?,
    };
    let pgm = s.switch(a.pgm, "pgm")?;
    let fine_n_flag = s.get(a.fine_n, "fine_n")?;
    let meas_n_flag = s.get(a.meas_n, "meas_n")?;
    if let (Some(f), Some(m)) = (fine_n_flag, meas_n_flag) {
        SimulationConfig::new(f, m).validate()?;
    }

    let d = read_field(&d_path)?;
    let mu = read_field(&mu_path)?;
    if !d.grid().same_shape(mu.grid()) {
        return Err(QpatError::config("D.fld and mu.fld live on different grids"));
    }
    let fine_n = fine_n_flag.unwrap_or(d.grid().n());
    let meas_n = meas_n_flag.unwrap_or(fine_n / 2);
    let mut cfg = SimulationConfig::new(fine_n, meas_n);
    cfg.illuminations = illuminations;
    cfg.noise_level = noise;
    cfg.seed = seed;
    cfg.validate()?;
    let (d, mu) = if fine_n == d.grid().n() {
        (d, mu)
    } else {
        let fine = Arc::new(DiscGrid::new(fine_n, d.grid().radius())?);
        (resample(&d, &fine)?, resample(&mu, &fine)?)
    };
    output_dir(&out)?;
    let sim = simulate(&d, &mu, &cfg)?;

    let mut manifest = KeyValues::new();
    manifest.set("format", "qpat-forward 1");
    manifest.set("fine_n", fine_n);
    manifest.set("meas_n", meas_n);
    manifest.set("radius", sim.data.grid.radius());
    manifest.set("noise_level", noise);
    manifest.set("seed", seed);
    manifest.set("illuminations", cfg.illuminations.len());
    for (j, (spec, h)) in cfg.illuminations.iter().zip(&sim.data.h).enumerate() {
        let k = j + 1;
        manifest.set(&format!("illumination_{k}_peak"), spec.peak_angle);
        manifest.set(&format!("illumination_{k}_std"), spec.std);
        manifest.set(&format!("illumination_{k}_amplitude"), spec.amplitude);
        manifest.set(&format!("illumination_{k}_floor"), spec.floor);
        manifest.set(&format!("illumination_{k}_iterations"), sim.reports[j].iterations);
        manifest.set(&format!("illumination_{k}_residual"), format!("{:.3e}", sim.reports[j].residual_norm));
        save(&out, &format!("H{k}"), h, pgm)?;
    }
    manifest.write(&out.join(MANIFEST))?;
    println!(
        "wrote {} data sets on n={meas_n} (simulated on n={fine_n}, noise {noise})",
        cfg.illuminations.len()
    );
    Ok(())
}

/// Reads the H files named by a forward manifest.
pub fn read_dataset(dir: &Path) -> Result<DataSet> {
    let manifest_path = dir.join(MANIFEST);
    for k in 1..=3 {
        existing_file(&dir.join(format!("H{k}.fld")))?;
    }
    existing_file(&manifest_path)?;
    let m = KeyValues::read(&manifest_path)?;
    let count: usize = m.require("illuminations")?;
    let mut h = Vec::with_capacity(count);
    let mut illuminations = Vec::with_capacity(count);
    for k in 1..=count {
        let path = dir.join(format!("H{k}.fld"));
        existing_file(&path)?;
        h.push(read_field(&path)?);
        illuminations.push(IlluminationSpec::with_levels(
            m.require(&format!("illumination_{k}_peak"))?,
            m.require(&format!("illumination_{k}_std"))?,
            m.require(&format!("illumination_{k}_amplitude"))?,
            m.require(&format!("illumination_{k}_floor"))?,
        )?);
    }
    let grid = Arc::clone(h[0].grid());
    let data = DataSet {
        h,
        grid,
        illuminations,
        noise_level: m.require("noise_level")?,
        seed: m.require("seed")?,
    };
    data.validate()?;
    Ok(data)
}

fn read_profile(path: &Path) -> Result<BoundaryProfile> {
    let text = fs::read_to_string(path)?;
    let mut samples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let nums: Vec<f64> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| QpatError::Format(format!("{}:{}: expected 'angle value'", path.display(), i + 1)))?;
        match nums[..] {
            [a, v] => samples.push((a, v)),
            _ => {
                return Err(QpatError::Format(format!(
                    "{}:{}: expected 'angle value'",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    BoundaryProfile::samples(samples)
}

pub fn cmd_recon(a: &ReconArgs) -> Result<()> {
    let s = Settings::load(
        a.config.as_ref(),
        &[
            "input",
            "out",
            "boundary_d",
            "boundary_d_file",
            "h1_threshold",
            "cond_threshold",
            "det_floor",
            "boundary_band",
            "smooth_width_data",
            "smooth_width_grad",
            "smooth_width_q",
            "boundary_anchor_weight",
            "n_path_starts",
            "completion",
            "background",
            "pgm",
        ],
    )?;
    let input = required(s.get(a.input.clone(), "input")?, "input")?;
    let out = required(s.get(a.out.clone(), "out")?, "out")?;
    let profile_file = s.get(a.boundary_d_file.clone(), "boundary_d_file")?;
    if let Some(p) = &profile_file {
        existing_file(p)?;
    }
    let data = read_dataset(&input)?;
    let boundary = match &profile_file {
        Some(p) => read_profile(p)?,
        None => BoundaryProfile::Constant(s.or(a.boundary_d, "boundary_d", PHANTOM_A_BACKGROUND_D)?),
    };
    let mut cfg = ReconConfig::for_data(boundary, &data);
    cfg.h1_threshold = s.get(a.h1_threshold, "h1_threshold")?.or(cfg.h1_threshold);
    cfg.cond_threshold = s.or(a.cond_threshold, "cond_threshold", cfg.cond_threshold)?;
    cfg.det_floor = s.or(a.det_floor, "det_floor", cfg.det_floor)?;
    cfg.boundary_band = s.or(a.boundary_band, "boundary_band", cfg.boundary_band)?;
    cfg.smooth_width_data = s.or(a.smooth_width_data, "smooth_width_data", cfg.smooth_width_data)?;
    cfg.smooth_width_grad = s.or(a.smooth_width_grad, "smooth_width_grad", cfg.smooth_width_grad)?;
    cfg.smooth_width_q = s.or(a.smooth_width_q, "smooth_width_q", cfg.smooth_width_q)?;
    cfg.boundary_anchor_weight = s.or(a.boundary_anchor_weight, "boundary_anchor_weight", cfg.boundary_anchor_weight)?;
    cfg.n_path_starts = s.or(a.n_path_starts, "n_path_starts", cfg.n_path_starts)?;
    let pgm = s.switch(a.pgm, "pgm")?;
    cfg.completion = match s.or(a.completion.clone(), "completion", "average".to_string())?.as_str() {
        "average" => Completion::Average,
        "background" => {
            let (d, mu) = parse_pair(
                &s.or(
                    a.background.clone(),
                    "background",
                    format!("{PHANTOM_A_BACKGROUND_D},{PHANTOM_A_BACKGROUND_MU}"),
                )?,
                "background",
            )?;
            Completion::Background { d, mu }
        }
        other => return Err(QpatError::config(format!("completion must be 'average' or 'background', got '{other}'"))),
    };
    cfg.validate()?;
    output_dir(&out)?;

    let r = run_pipeline(&data, &cfg)?;
    save(&out, "D_rec", &r.d, pgm)?;
    save(&out, "mu_rec", &r.mu, pgm)?;
    save(&out, "sigma", &r.sigma, pgm)?;
    save(&out, "q", &r.q, pgm)?;
    save(&out, "mask", &r.reliable_mask.to_field(), pgm)?;
    let text = r.diagnostics.to_string();
    write_atomic(&out.join("diagnostics.txt"), text.as_bytes())?;
    print!("{text}");
    Ok(())
}

/// Truth on the reconstruction grid: rejected on mismatch unless `resample` is set.
fn align(truth: Field, target: &Arc<DiscGrid>, resample_ok: bool) -> Result<Field> {
    if truth.grid().same_shape(target) {
        return Ok(truth);
    }
    if !resample_ok {
        return Err(QpatError::config(format!(
            "grid mismatch: reconstruction n={} but truth n={} (use --resample)",
            target.n(),
            truth.grid().n()
        )));
    }
    if truth.grid().h() < target.h() {
        restrict(&truth, target)
    } else {
        resample(&truth, target)
    }
}

pub fn cmd_error(a: &ErrorArgs) -> Result<()> {
    let s = Settings::load(
        a.config.as_ref(),
        &["recon", "truth", "name", "recon_dir", "truth_dir", "region", "resample"],
    )?;
    let region = parse_region(&s.or(a.region.clone(), "region", "y>0.2".into())?)?;
    let resample_ok = s.switch(a.resample, "resample")?;
    let mut pairs: Vec<(String, PathBuf, PathBuf)> = Vec::new();
    if let (Some(rd), Some(td)) = (s.get(a.recon_dir.clone(), "recon_dir")?, s.get(a.truth_dir.clone(), "truth_dir")?) {
        pairs.push(("D".into(), rd.join("D_rec.fld"), td.join("D.fld")));
        pairs.push(("mu".into(), rd.join("mu_rec.fld"), td.join("mu.fld")));
    }
    if let (Some(r), Some(t)) = (s.get(a.recon.clone(), "recon")?, s.get(a.truth.clone(), "truth")?) {
        pairs.push((s.or(a.name.clone(), "name", "D".into())?, r, t));
    }
    if pairs.is_empty() {
        return Err(QpatError::config(
            "give --recon and --truth, or --recon-dir and --truth-dir",
        ));
    }
    for (_, r, t) in &pairs {
        existing_file(r)?;
        existing_file(t)?;
    }
    for (name, r, t) in pairs {
        let recon = read_field(&r)?;
        let truth = align(read_field(&t)?, recon.grid(), resample_ok)?;
        println!("err_{name}={:.6}", relative_error(&recon, &truth, region)?);
    }
    Ok(())
}

pub fn cmd_stability(a: &StabilityArgs) -> Result<()> {
    let s = Settings::load(
        a.config.as_ref(),
        &["rho", "theta", "lambda0", "r0", "rows", "samples", "out"],
    )?;
    let rho = s.or(a.rho, "rho", 1.0)?;
    let theta = s.or(a.theta, "theta", 0.5)?;
    let lambda0 = s.or(a.lambda0, "lambda0", 1.5)?;
    let r0 = s.or(a.r0, "r0", 1.0)?;
    let rows = s.or(a.rows, "rows", 20)?;
    let samples = s.or(a.samples, "samples", 1000)?;
    let out = s.get(a.out.clone(), "out")?;
    if rows < 2 {
        return Err(QpatError::config("rows must be at least 2"));
    }
    // Probe radius only matters for validation here.
    let base = StabilityParams::new(rho, theta, lambda0, r0, 0.5 * r0)?;
    let rb = r_bound(&base)?;
    let top = rb.min(r0) * (1.0 - 1e-9);
    let mut csv = String::from("r,gamma,alpha,beta,r_bound\n");
    for i in 0..rows {
        let r = top * 10f64.powf(-8.0 * i as f64 / (rows - 1) as f64);
        let p = base.with_r(r);
        let (al, be) = alpha_beta(&p)?;
        csv.push_str(&format!("{r:.9e},{:.15},{al:.9e},{be:.9e},{rb:.9e}\n", gamma(&p)?));
    }
    let report = check_monotone_decreasing(&base, samples)?;
    let summary = format!(
        "monotone={} samples={} r_bound={:.9e} max_forward_difference={:.3e}\n",
        if report.pass { "PASS" } else { "FAIL" },
        report.samples,
        report.r_bound,
        report.max_forward_difference
    );
    let mut stdout = std::io::stdout().lock();
    match &out {
        Some(path) => {
            write_atomic(path, csv.as_bytes())?;
            writeln!(stdout, "wrote {}", path.display())?;
        }
        None => stdout.write_all(csv.as_bytes())?,
    }
    stdout.write_all(summary.as_bytes())?;
    Ok(())
}
