use std::path::{Path, PathBuf};

use log::{info, warn};

use cpi_core::analysis::{
    cpi_grids, dof_report, double_slit, geometric_bound, visibility, visibility_map, DofOptions, Modality,
};
use cpi_core::engine::{gamma_map, ghost_image, refocus, CorrelationTensor, ImageProfile};
use cpi_core::io::{
    read_frame_stack, read_tensor, write_dof_side_csv, write_map, write_map_csv, write_profile_csv, write_tensor,
    DofSide, FrameStackReader, FrameStackWriter,
};
use cpi_core::speckle::{
    estimate_gamma, generate_frame_range, postprocess_tensor, PostprocessParams, PropagationPlan,
};
use cpi_core::{ApertureMask, ScenarioConfig};

use crate::error::CliError;
use crate::manifest::{check_outputs, Recorder};
use crate::{parse, Cli, Command, MaskArgs};

const DEFAULT_SEED: u64 = 42;

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Gamma {
            mask,
            z_b,
            grid_a,
            grid_b,
            output,
        } => gamma(cli, mask, *z_b, grid_a.as_deref(), grid_b.as_deref(), output),
        Command::Refocus { tensor, output } => profile(cli, "refocus", tensor, output),
        Command::Ghost { tensor, output } => profile(cli, "ghost", tensor, output),
        Command::Speckle {
            mask,
            z_b,
            frames,
            pixels_a,
            pixels_b,
            chunk,
            resume,
            postprocess,
            output,
            tensor_output,
        } => speckle(
            cli,
            &SpeckleRun {
                mask,
                z_b: *z_b,
                frames: *frames,
                pixels: (*pixels_a, *pixels_b),
                chunk: *chunk,
                resume: *resume,
                postprocess: postprocess.as_deref(),
                output,
                tensor_output,
            },
        ),
        Command::Estimate {
            frames,
            bin_a,
            bin_b,
            postprocess,
            output,
        } => estimate(cli, frames, (*bin_a, *bin_b), postprocess.as_deref(), output),
        Command::Vismap {
            modality,
            d_range,
            z_range,
            prefix,
        } => vismap(cli, modality, d_range, z_range, prefix),
        Command::Dof {
            d_range,
            d,
            n_u,
            threshold,
            prefix,
        } => dof(cli, d_range, d.as_deref(), *n_u, *threshold, prefix),
        Command::Bound { d_range, d, output } => bound(cli, d_range, d.as_deref(), output),
        Command::Verify { manifests } => verify(cli, manifests),
    }
}

fn scenario(cli: &Cli, z_b: Option<f64>) -> Result<ScenarioConfig, CliError> {
    let mut cfg = match &cli.scenario {
        Some(p) => ScenarioConfig::from_file(p).map_err(|e| match e {
            cpi_core::CpiError::Io(io) => CliError::Io(format!("{}: {io}", p.display())),
            other => other.into(),
        })?,
        None => ScenarioConfig::paper_setup(),
    };
    if let Some(z) = z_b {
        cfg = cfg.with_z_b(z);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn required_mask(args: &MaskArgs) -> Result<ApertureMask, CliError> {
    parse::mask(args.mask.as_deref(), args.mask_file.as_deref())?
        .ok_or_else(|| CliError::Config("a mask is required (--mask or --mask-file)".into()))
}

fn done(rec: Recorder) -> Result<(), CliError> {
    let path = rec.finish()?;
    info!("manifest written to {}", path.display());
    Ok(())
}

fn gamma(
    cli: &Cli,
    mask: &MaskArgs,
    z_b: Option<f64>,
    grid_a: Option<&str>,
    grid_b: Option<&str>,
    output: &str,
) -> Result<(), CliError> {
    let cfg = scenario(cli, z_b)?;
    let mask = required_mask(mask)?;
    let mut rec = Recorder::start(&cli.out_dir, "gamma", cfg.hash());
    let (da, db) = cpi_grids(&cfg, &mask)?;
    let ga = grid_a.map(parse::grid).transpose()?.unwrap_or(da);
    let gb = grid_b.map(parse::grid).transpose()?.unwrap_or(db);
    info!("correlation tensor on {} x {} points", ga.len(), gb.len());
    let t = gamma_map(&cfg, &mask, &ga, &gb)?;
    write_tensor(rec.output(output), &t, mask.spec_string().as_deref())?;
    done(rec)
}

fn profile(cli: &Cli, command: &str, tensor: &Path, output: &str) -> Result<(), CliError> {
    let (t, spec) = read_tensor(tensor)?;
    let mut rec = Recorder::start(&cli.out_dir, command, t.scenario.hash());
    rec.input(tensor);
    let image = if command == "refocus" {
        let out = refocus(&t);
        if out.clipped_fraction > cpi_core::engine::images::CLIP_WARN_FRACTION {
            warn!(
                "{:.1}% of sheared samples fell outside S_a and were dropped",
                100.0 * out.clipped_fraction
            );
        }
        out.image
    } else {
        ghost_image(&t)
    };
    report_visibility(&image, spec.as_deref());
    write_profile_csv(rec.output(output), &image)?;
    done(rec)
}

fn report_visibility(image: &ImageProfile, spec: Option<&str>) {
    let Some(mask) = spec.and_then(|s| s.parse::<ApertureMask>().ok()) else { return };
    if mask.n_slits() < 2 {
        return;
    }
    match visibility(image, &mask) {
        Ok(v) => println!("visibility {v:.4}"),
        Err(e) => warn!("visibility not computed: {e}"),
    }
}

fn postprocessed(
    t: CorrelationTensor,
    spec: Option<&str>,
    mask: Option<&ApertureMask>,
) -> Result<CorrelationTensor, CliError> {
    let Some(spec) = spec else { return Ok(t) };
    let base = match mask {
        Some(m) => PostprocessParams::defaults_for(&t.scenario, m),
        None => PostprocessParams::identity(),
    };
    let params = parse::postprocess(spec, base)?;
    info!(
        "postprocess: lowpass {:e} / {:e} cycles/m, threshold {}",
        params.lowpass_a, params.lowpass_b, params.threshold
    );
    Ok(postprocess_tensor(&t, &params)?)
}

struct SpeckleRun<'a> {
    mask: &'a MaskArgs,
    z_b: Option<f64>,
    frames: usize,
    pixels: (usize, usize),
    chunk: usize,
    resume: bool,
    postprocess: Option<&'a str>,
    output: &'a str,
    tensor_output: &'a str,
}

fn speckle(cli: &Cli, run: &SpeckleRun) -> Result<(), CliError> {
    if run.frames < 2 {
        return Err(CliError::Config(format!("need at least 2 frames, got {}", run.frames)));
    }
    if run.frames < 100 {
        warn!("{} frames: the correlation estimate will be dominated by noise", run.frames);
    }
    let path = cli.out_dir.join(run.output);
    let given_mask = parse::mask(run.mask.mask.as_deref(), run.mask.mask_file.as_deref())?;

    // validate against the recorded run before the writer touches the file
    let (cfg, mask, seed, resuming) = if run.resume && path.exists() {
        let r = FrameStackReader::open(&path)?;
        let cfg = *r.scenario();
        if cli.scenario.is_some() || run.z_b.is_some() {
            let asked = scenario(cli, run.z_b)?;
            if asked != cfg {
                return Err(CliError::Config(format!(
                    "scenario differs from the one recorded in {}",
                    path.display()
                )));
            }
        }
        if let Some(s) = cli.seed.filter(|&s| s != r.seed()) {
            return Err(CliError::Config(format!("--seed {s} differs from the stack's seed {}", r.seed())));
        }
        let recorded = r
            .mask_spec()
            .ok_or_else(|| CliError::Config("stack records no mask; cannot resume".into()))?
            .parse::<ApertureMask>()?;
        if given_mask.as_ref().is_some_and(|m| m != &recorded) {
            return Err(CliError::Config("mask differs from the one recorded in the stack".into()));
        }
        let plan = PropagationPlan::desk(&cfg, run.pixels.0, run.pixels.1)?;
        let (ga, gb) = r.grids();
        if ga != plan.grid_a() || gb != plan.grid_b() {
            return Err(CliError::Config(format!(
                "stack sensors ({} x {}) differ from --pixels-a/--pixels-b ({} x {})",
                ga.len(),
                gb.len(),
                run.pixels.0,
                run.pixels.1
            )));
        }
        (cfg, recorded, r.seed(), true)
    } else {
        if run.resume {
            warn!("{} does not exist; starting a new stack", path.display());
        }
        let mask = given_mask.ok_or_else(|| CliError::Config("a mask is required (--mask or --mask-file)".into()))?;
        (scenario(cli, run.z_b)?, mask, cli.seed.unwrap_or(DEFAULT_SEED), false)
    };
    let plan = PropagationPlan::desk(&cfg, run.pixels.0, run.pixels.1)?;
    let mut writer = if resuming {
        let w = FrameStackWriter::resume(&path)?;
        info!("resuming {} at frame {}", path.display(), w.n_frames());
        Some(w)
    } else {
        None
    };

    let mut rec = Recorder::start(&cli.out_dir, "speckle", cfg.hash());
    rec.seed(seed);
    let chunk = run.chunk.max(1);
    loop {
        let have = writer.as_ref().map_or(0, |w| w.n_frames());
        if have >= run.frames {
            if have > run.frames {
                warn!("stack already holds {have} frames (> {})", run.frames);
            }
            break;
        }
        let count = chunk.min(run.frames - have);
        let next = writer.as_ref().map_or(0, |w| w.next_frame());
        let frames = generate_frame_range(&cfg, &mask, &plan, seed, next, count)?;
        match writer.as_mut() {
            Some(w) => w.append(&frames)?,
            None => writer = Some(FrameStackWriter::create(&path, &frames, chunk)?),
        }
        info!("{} / {} frames", have + count, run.frames);
    }
    if let Some(w) = writer {
        w.finish()?;
    }
    rec.output(run.output);

    let stack = read_frame_stack(&path)?;
    let t = postprocessed(estimate_gamma(&stack)?, run.postprocess, Some(&mask))?;
    write_tensor(rec.output(run.tensor_output), &t, mask.spec_string().as_deref())?;
    done(rec)
}

fn estimate(
    cli: &Cli,
    frames: &Path,
    bins: (usize, usize),
    postprocess: Option<&str>,
    output: &str,
) -> Result<(), CliError> {
    let mut stack = read_frame_stack(frames)?;
    if bins != (1, 1) {
        stack = stack.binned(bins.0, bins.1)?;
    }
    let mut rec = Recorder::start(&cli.out_dir, "estimate", stack.scenario.hash());
    rec.input(frames);
    rec.seed(stack.seed);
    let mask = stack.mask_spec.as_deref().map(str::parse::<ApertureMask>).transpose()?;
    let t = postprocessed(estimate_gamma(&stack)?, postprocess, mask.as_ref())?;
    write_tensor(rec.output(output), &t, stack.mask_spec.as_deref())?;
    done(rec)
}

fn file_stem(m: Modality) -> String {
    m.to_string().replace(':', "-")
}

fn vismap(cli: &Cli, modalities: &[String], d_range: &str, z_range: &str, prefix: &str) -> Result<(), CliError> {
    let cfg = scenario(cli, None)?;
    let ds = parse::values(d_range, "--d-range")?;
    let zs = parse::values(z_range, "--z-range")?;
    let modalities: Vec<Modality> = modalities
        .iter()
        .map(|m| m.parse::<Modality>())
        .collect::<Result<_, _>>()?;
    if modalities.is_empty() {
        return Err(CliError::Config("no modality given".into()));
    }
    let mut rec = Recorder::start(&cli.out_dir, "vismap", cfg.hash());
    let dxf = cfg.focused_resolution();
    for m in modalities {
        info!("{m} map: {} x {} cells", ds.len(), zs.len());
        let map = visibility_map(m, &cfg, &ds, &zs)?;
        let stem = format!("{prefix}_{}", file_stem(m));
        write_map_csv(rec.output(&format!("{stem}.csv")), &map, dxf)?;
        write_map(rec.output(&format!("{stem}.cpig")), &map, &cfg)?;
    }
    done(rec)
}

fn separations(cfg: &ScenarioConfig, d_range: &str, d: Option<&str>) -> Result<Vec<f64>, CliError> {
    let ds = match d {
        Some(d) => parse::values(d, "--d")?,
        None => parse::values(d_range, "--d-range")?
            .into_iter()
            .map(|r| r * cfg.focused_resolution())
            .collect(),
    };
    if let Some(bad) = ds.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
        return Err(CliError::Config(format!("slit separation must be positive, got {bad}")));
    }
    Ok(ds)
}

fn dof(cli: &Cli, d_range: &str, d: Option<&str>, n_u: u32, threshold: f64, prefix: &str) -> Result<(), CliError> {
    let cfg = scenario(cli, None)?;
    let ds = separations(&cfg, d_range, d)?;
    let opts = DofOptions {
        threshold,
        n_u,
        ..DofOptions::default()
    };
    let mut rec = Recorder::start(&cli.out_dir, "dof", cfg.hash());
    let mut reports = Vec::with_capacity(ds.len());
    for &d in &ds {
        let r = dof_report(&cfg, d, &opts)?;
        print!("{}", r.summary_table());
        println!();
        reports.push(r);
    }
    let dxf = cfg.focused_resolution();
    write_dof_side_csv(rec.output(&format!("{prefix}_near.csv")), &reports, DofSide::Near, dxf)?;
    write_dof_side_csv(rec.output(&format!("{prefix}_far.csv")), &reports, DofSide::Far, dxf)?;
    done(rec)
}

fn bound(cli: &Cli, d_range: &str, d: Option<&str>, output: &str) -> Result<(), CliError> {
    let cfg = scenario(cli, None)?;
    let ds = separations(&cfg, d_range, d)?;
    let mut rec = Recorder::start(&cli.out_dir, "bound", cfg.hash());
    let path = rec.output(output);
    let mut rows = vec!["d,d_over_dxf,z_b_near,z_b_far,near_unbounded,far_unbounded,resolved".to_string()];
    for &d in &ds {
        let b = geometric_bound(&cfg, &double_slit(d)?, &DofOptions::default())?;
        let z = |v: f64| if b.resolved { format!("{v:e}") } else { String::new() };
        rows.push(format!(
            "{d:e},{:e},{},{},{},{},{}",
            d / cfg.focused_resolution(),
            z(b.near),
            z(b.far),
            b.near_unbounded as u8,
            b.far_unbounded as u8,
            b.resolved as u8
        ));
    }
    std::fs::write(&path, rows.join("\n") + "\n")?;
    done(rec)
}

fn verify(cli: &Cli, manifests: &[PathBuf]) -> Result<(), CliError> {
    let list: Vec<PathBuf> = if manifests.is_empty() {
        let mut found: Vec<PathBuf> = std::fs::read_dir(&cli.out_dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.ends_with(".manifest.json") && n != "verify.manifest.json")
            })
            .collect();
        found.sort();
        found
    } else {
        manifests.to_vec()
    };
    if list.is_empty() {
        return Err(CliError::Verify(format!("no manifests found in {}", cli.out_dir.display())));
    }
    let mut rec = Recorder::start(&cli.out_dir, "verify", String::new());
    let mut failures = 0;
    for m in &list {
        rec.input(m);
        let problems = check_outputs(m)?;
        if problems.is_empty() {
            println!("OK   {}", m.display());
        } else {
            failures += 1;
            println!("FAIL {}", m.display());
            for p in problems {
                println!("     {p}");
            }
        }
    }
    done(rec)?;
    if failures > 0 {
        return Err(CliError::Verify(format!("{failures} of {} manifests have bad outputs", list.len())));
    }
    Ok(())
}
