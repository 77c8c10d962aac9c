use std::fs;
use std::path::{Path, PathBuf};

use ftir_decomp::io::{read_spectra_csv, write_spectra_csv};
use ftir_decomp::model::{group_key, simulate_posttreatment, simulate_pretreatment};
use ftir_decomp::sparsify::{scan_landscape, select_and_polish_with, SelectOptions};
use ftir_decomp::spectrum::SetIssue;
use ftir_decomp::{
    aligned_signals, bcd_fit, estimate_template, msc_correct, validate_set, Error, Frame,
    SpectrumSet,
};
use nalgebra::DVector;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::args::{Command, Common, SolverArgs};
use crate::artifacts::*;
use crate::config::{ConfigFile, Solver};
use crate::error::{CliError, CliResult};
use crate::logging;
use crate::report::Run;

const TEMPLATE_JSON: &str = "template.json";
const ALIGNED_CSV: &str = "aligned.csv";
const EFFECT_JSON: &str = "effect.json";
const DELTA_CSV: &str = "delta.csv";
const DELTA_GROUPS_CSV: &str = "delta_groups.csv";
const PATTERN_JSON: &str = "pattern.json";
const PATTERN_CSV: &str = "pattern.csv";
const LANDSCAPE_CSV: &str = "landscape.csv";
const MSC_JSON: &str = "msc.json";
const MSC_CSV: &str = "msc_corrected.csv";

/// Runs one command and returns the path of its report.
pub fn execute(command: Command) -> CliResult<PathBuf> {
    logging::take_warnings();
    match command {
        Command::Simulate { common, seed } => simulate(&common, seed),
        Command::Template { common, pre } => {
            let mut ctx = Context::new("template", &common, SolverArgs::default())?;
            ctx.require(&[&pre])?;
            ctx.run.check_outputs(&[TEMPLATE_JSON, ALIGNED_CSV])?;
            let pre_set = ctx.load_set("pre", &pre)?;
            template_stage(&mut ctx, &pre_set)?;
            ctx.finish()
        }
        Command::Effect {
            common,
            solver,
            post,
            template,
        } => {
            let mut ctx = Context::new("effect", &common, solver)?;
            let template_path = template.unwrap_or_else(|| common.out.join(TEMPLATE_JSON));
            ctx.require(&[&post, &template_path])?;
            ctx.run
                .check_outputs(&[EFFECT_JSON, DELTA_CSV, DELTA_GROUPS_CSV])?;
            let post_set = ctx.load_set("post", &post)?;
            let (template, template_sha) = ctx.load_template(&template_path)?;
            effect_stage(&mut ctx, &post_set, &template, template_sha)?;
            ctx.finish()
        }
        Command::Sparsify {
            common,
            solver,
            effect,
            template,
        } => {
            let mut ctx = Context::new("sparsify", &common, solver)?;
            let effect_path = effect.unwrap_or_else(|| common.out.join(EFFECT_JSON));
            let template_path = template.unwrap_or_else(|| common.out.join(TEMPLATE_JSON));
            ctx.require(&[&effect_path, &template_path])?;
            ctx.run
                .check_outputs(&[PATTERN_JSON, PATTERN_CSV, LANDSCAPE_CSV])?;
            let (template, template_sha) = ctx.load_template(&template_path)?;
            let (effect, effect_sha) = ctx.load_effect(&effect_path)?;
            if effect.template_sha256 != template_sha {
                return Err(CliError::Invalid(format!(
                    "{} was fitted against a different template than {}",
                    effect_path.display(),
                    template_path.display()
                )));
            }
            sparsify_stage(&mut ctx, &template, &effect, template_sha, effect_sha)?;
            ctx.finish()
        }
        Command::Msc { common, pre } => {
            let mut ctx = Context::new("msc", &common, SolverArgs::default())?;
            ctx.require(&[&pre])?;
            ctx.run.check_outputs(&[MSC_JSON, MSC_CSV])?;
            let pre_set = ctx.load_set("pre", &pre)?;
            msc_stage(&mut ctx, &pre_set)?;
            ctx.finish()
        }
        Command::Pipeline {
            common,
            solver,
            pre,
            post,
            msc,
        } => {
            let mut ctx = Context::new("pipeline", &common, solver)?;
            ctx.require(&[&pre, &post])?;
            let mut outputs = vec![
                TEMPLATE_JSON,
                ALIGNED_CSV,
                EFFECT_JSON,
                DELTA_CSV,
                DELTA_GROUPS_CSV,
                PATTERN_JSON,
                PATTERN_CSV,
                LANDSCAPE_CSV,
            ];
            if msc {
                outputs.extend([MSC_JSON, MSC_CSV]);
            }
            ctx.run.check_outputs(&outputs)?;
            let pre_set = ctx.load_set("pre", &pre)?;
            let post_set = ctx.load_set("post", &post)?;
            if pre_set.grid() != post_set.grid() {
                return Err(CliError::Invalid(
                    "pre and post spectra use different wavenumber grids".into(),
                ));
            }
            let (template, template_sha) = template_stage(&mut ctx, &pre_set)?;
            let (effect, effect_sha) =
                effect_stage(&mut ctx, &post_set, &template, template_sha.clone())?;
            if effect.no_effect {
                logging::warn("no treatment effect detected; sparsify stage skipped");
            } else {
                sparsify_stage(&mut ctx, &template, &effect, template_sha, effect_sha)?;
            }
            if msc {
                msc_stage(&mut ctx, &pre_set)?;
            }
            ctx.finish()
        }
    }
}

struct Context {
    run: Run,
    solver: Solver,
    exclude: Vec<String>,
}

impl Context {
    fn new(command: &str, common: &Common, solver_args: SolverArgs) -> CliResult<Self> {
        let config = match &common.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        let solver = solver_args.apply(config.solver());
        solver.validate()?;
        let mut exclude = config.exclude_labels.clone().unwrap_or_default();
        exclude.extend(common.exclude_labels.iter().cloned());
        let mut run = Run::new(command, &common.out, common.force);
        if let Some(path) = &common.config {
            run.add_input("config", path)?;
        }
        run.settings
            .insert("solver".into(), serde_json::to_value(solver).unwrap());
        run.settings.insert("exclude_labels".into(), json!(exclude));
        Ok(Self {
            run,
            solver,
            exclude,
        })
    }

    fn require(&self, paths: &[&Path]) -> CliResult<()> {
        for p in paths {
            if !p.is_file() {
                return Err(CliError::MissingInput(p.to_path_buf()));
            }
        }
        Ok(())
    }

    /// Reads, filters and validates a spectra CSV.
    fn load_set(&mut self, role: &str, path: &Path) -> CliResult<SpectrumSet> {
        self.run.add_input(role, path)?;
        let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
        let set = read_spectra_csv(file).map_err(|source| CliError::InvalidFile {
            path: path.to_path_buf(),
            source,
        })?;
        let set = if self.exclude.is_empty() {
            set
        } else {
            let labels = set.labels();
            for l in &self.exclude {
                if !labels.contains(l) && role == "post" {
                    logging::warn(format!(
                        "excluded label {l:?} not present in {}",
                        path.display()
                    ));
                }
            }
            set.without_labels(&self.exclude)?
        };
        let report = validate_set(&set);
        if let Some(issue) = report.issues.first() {
            return Err(match *issue {
                SetIssue::Constant { signal } => CliError::InvalidFile {
                    path: path.to_path_buf(),
                    source: Error::DegenerateSignal {
                        index: signal,
                        label: set.label(signal),
                    },
                },
                SetIssue::NonFinite { signal, coordinate } => CliError::InvalidFile {
                    path: path.to_path_buf(),
                    source: Error::NonFinite {
                        index: signal,
                        coordinate,
                    },
                },
                _ => CliError::Invalid(format!("{}: inconsistent spectra", path.display())),
            });
        }
        if set.len() < 2 {
            return Err(CliError::InvalidFile {
                path: path.to_path_buf(),
                source: Error::TooFewSignals {
                    required: 2,
                    actual: set.len(),
                },
            });
        }
        Ok(set)
    }

    fn load_template(&mut self, path: &Path) -> CliResult<(TemplateArtifact, String)> {
        let (artifact, sha) = read_json::<TemplateArtifact>(path)?;
        self.run.add_input("template", path)?;
        if artifact.template.len() != artifact.grid.count() {
            return Err(CliError::Invalid(format!(
                "{}: template length disagrees with its grid",
                path.display()
            )));
        }
        Ok((artifact, sha))
    }

    fn load_effect(&mut self, path: &Path) -> CliResult<(EffectArtifact, String)> {
        let (artifact, sha) = read_json::<EffectArtifact>(path)?;
        self.run.add_input("effect", path)?;
        Ok((artifact, sha))
    }

    fn finish(self) -> CliResult<PathBuf> {
        self.run.finish(logging::take_warnings())
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<(T, String)> {
    if !path.is_file() {
        return Err(CliError::MissingInput(path.to_path_buf()));
    }
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let value = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    Ok((value, hex::encode(Sha256::digest(&bytes))))
}

fn csv_bytes(set: &SpectrumSet) -> Vec<u8> {
    let mut buf = Vec::new();
    write_spectra_csv(&mut buf, set).expect("writing to memory cannot fail");
    buf
}

fn simulate(common: &Common, seed_flag: Option<u64>) -> CliResult<PathBuf> {
    let config = match &common.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let seed = seed_flag.or(config.seed).ok_or_else(|| {
        CliError::Invalid("simulate needs a seed (--seed or \"seed\" in the config)".into())
    })?;
    let mut run = Run::new("simulate", &common.out, common.force);
    run.check_outputs(&["pre.csv", "post.csv", "truth.json"])?;
    if let Some(path) = &common.config {
        run.add_input("config", path)?;
    }
    for (role, path) in config.referenced_files() {
        run.add_input(role, &path)?;
    }
    let params = config.generative_params()?;
    let n_pre = config.n_pre();
    if n_pre == 0 {
        return Err(CliError::Invalid("n_pre must be at least 1".into()));
    }
    run.settings.insert("seed".into(), json!(seed));
    run.settings.insert("n_pre".into(), json!(n_pre));

    let pre = run.time("simulate_pre", || {
        simulate_pretreatment(&params, n_pre, seed)
    })?;
    let post = match params.pattern {
        Some(_) => Some(run.time("simulate_post", || simulate_posttreatment(&params, seed))?),
        None => {
            logging::warn("no pattern configured; post.csv not generated");
            None
        }
    };

    run.write("pre.csv", "pre-treatment spectra", &csv_bytes(&pre.set))?;
    if let Some(post) = &post {
        run.write("post.csv", "post-treatment spectra", &csv_bytes(&post.set))?;
    }
    let draws = |sim: &ftir_decomp::model::Simulation| SignalDraws {
        labels: sim.set.labels(),
        scales: sim.scales.clone(),
        offsets: sim.offsets.clone(),
        effects: sim.effects.clone(),
    };
    let truth = TruthArtifact {
        input_digests: run.digests.clone(),
        seed,
        grid: params.grid,
        template: to_vec(&params.template),
        pattern: params.pattern.as_ref().map(to_vec),
        sigma: params.sigma,
        scale_law: params.scale_law.clone(),
        offset_law: params.offset_law.clone(),
        effects: params.effects.clone().unwrap_or_default(),
        replicates: params.replicates,
        pre: draws(&pre),
        post: post.as_ref().map(draws),
    };
    run.write_json("truth.json", "generative ground truth", &truth)?;
    run.finish(logging::take_warnings())
}

/// Writes template.json and aligned.csv; returns the artifact and its SHA-256.
fn template_stage(ctx: &mut Context, pre: &SpectrumSet) -> CliResult<(TemplateArtifact, String)> {
    let fit = ctx.run.time("template", || estimate_template(pre))?;
    if fit.is_ambiguous() {
        logging::warn(format!(
            "eigen gap {:e}: template direction is not unique",
            fit.eigen_gap
        ));
    }
    let aligned = ctx.run.time("template", || aligned_signals(&fit, pre))?;
    let artifact = TemplateArtifact {
        input_digests: ctx.run.digests.clone(),
        grid: *pre.grid(),
        template: to_vec(&fit.template),
        alignments: alignment_records(&pre.labels(), &fit.alignments),
        objective: fit.objective,
        eigenvalue: fit.eigenvalue,
        eigen_gap: fit.eigen_gap,
        residual: fit.residual,
        ambiguous: fit.is_ambiguous(),
    };
    let path = ctx
        .run
        .write_json(TEMPLATE_JSON, "template and alignments", &artifact)?;
    ctx.run.write(
        ALIGNED_CSV,
        "aligned pre-treatment spectra",
        &csv_bytes(&aligned),
    )?;
    let sha = hex::encode(Sha256::digest(
        fs::read(&path).map_err(|e| CliError::io(&path, e))?,
    ));
    Ok((artifact, sha))
}

fn effect_stage(
    ctx: &mut Context,
    post: &SpectrumSet,
    template: &TemplateArtifact,
    template_sha: String,
) -> CliResult<(EffectArtifact, String)> {
    if *post.grid() != template.grid {
        return Err(CliError::Invalid(
            "post-treatment spectra and template use different wavenumber grids".into(),
        ));
    }
    let x0 = DVector::from_vec(template.template.clone());
    let options = ctx.solver.bcd();
    let fit = ctx.run.time("effect", || bcd_fit(post, &x0, &options))?;
    let labels = post.labels();
    let normalized = fit.normalized_effects();
    let artifact = EffectArtifact {
        input_digests: ctx.run.digests.clone(),
        template_sha256: template_sha,
        grid: *post.grid(),
        labels: labels.clone(),
        effects: to_vec(&fit.effects),
        effects_normalized: to_vec(&normalized),
        pattern: fit.pattern.as_ref().map(to_vec),
        alignments: alignment_records(&labels, &fit.alignments),
        objective: fit.objective(),
        objective_trace: fit.objective_trace.clone(),
        converged: fit.converged,
        iterations: fit.iterations,
        no_effect: fit.no_effect,
        tol: options.tol,
        max_iter: options.max_iter,
    };
    let path = ctx
        .run
        .write_json(EFFECT_JSON, "effect magnitudes and pattern", &artifact)?;

    let mut delta = String::from("label,delta,delta_normalized\n");
    for (i, l) in labels.iter().enumerate() {
        delta.push_str(&format!(
            "{},{},{}\n",
            csv_field(l),
            fit.effects[i],
            normalized[i]
        ));
    }
    ctx.run
        .write(DELTA_CSV, "per-signal effects", delta.as_bytes())?;

    let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        let key = group_key(l);
        match groups.iter_mut().find(|(k, _)| k == key) {
            Some((_, members)) => members.push(i),
            None => groups.push((key.to_string(), vec![i])),
        }
    }
    let mut grouped = String::from("group,count,mean_delta,mean_delta_normalized\n");
    for (key, members) in &groups {
        let k = members.len() as f64;
        let mean = members.iter().map(|&i| fit.effects[i]).sum::<f64>() / k;
        let mean_n = members.iter().map(|&i| normalized[i]).sum::<f64>() / k;
        grouped.push_str(&format!(
            "{},{},{},{}\n",
            csv_field(key),
            members.len(),
            mean,
            mean_n
        ));
    }
    ctx.run.write(
        DELTA_GROUPS_CSV,
        "per-group mean effects",
        grouped.as_bytes(),
    )?;

    let sha = hex::encode(Sha256::digest(
        fs::read(&path).map_err(|e| CliError::io(&path, e))?,
    ));
    Ok((artifact, sha))
}

fn sparsify_stage(
    ctx: &mut Context,
    template: &TemplateArtifact,
    effect: &EffectArtifact,
    template_sha: String,
    effect_sha: String,
) -> CliResult<()> {
    let Some(pattern) = &effect.pattern else {
        return Err(CliError::Invalid(
            "effect fit found no treatment effect; there is no pattern to sparsify".into(),
        ));
    };
    if effect.grid != template.grid {
        return Err(CliError::Invalid(
            "effect and template use different wavenumber grids".into(),
        ));
    }
    let g = DVector::from_vec(pattern.clone());
    let x0 = DVector::from_vec(template.template.clone());
    let frame = Frame::new(&g, &x0)?;
    let solver = ctx.solver;
    let scan = ctx.run.time("landscape", || {
        scan_landscape(&frame, solver.grid_theta, solver.grid_phi)
    })?;
    let options = SelectOptions::for_grid(solver.cos_phi_floor, solver.grid_theta, solver.grid_phi);
    let chosen = ctx.run.time("polish", || {
        select_and_polish_with(&scan.candidates, &frame, &options)
    })?;

    let grid = template.grid;
    let artifact = PatternArtifact {
        input_digests: ctx.run.digests.clone(),
        template_sha256: template_sha,
        effect_sha256: effect_sha,
        grid,
        theta: chosen.theta,
        phi: chosen.phi,
        cos_phi: chosen.phi.cos(),
        l1_value: chosen.l1_value,
        cos_phi_floor: solver.cos_phi_floor,
        effective_floor: chosen.effective_floor,
        grid_theta: solver.grid_theta,
        grid_phi: solver.grid_phi,
        start: chosen.start,
        polish_trace: chosen.polish_trace.clone(),
        candidates: chosen.candidates.clone(),
        pattern: to_vec(&chosen.pattern),
    };
    ctx.run
        .write_json(PATTERN_JSON, "sparsified pattern", &artifact)?;

    let mut curve = String::from("wavenumber,pattern,unsparsified\n");
    for j in 0..grid.count() {
        curve.push_str(&format!(
            "{},{},{}\n",
            grid.point(j),
            chosen.pattern[j],
            frame.pattern()[j]
        ));
    }
    ctx.run
        .write(PATTERN_CSV, "pattern curves", curve.as_bytes())?;

    let mut heat = String::with_capacity(solver.grid_theta * solver.grid_phi * 48);
    heat.push_str("theta,phi,G\n");
    for (t, p, v) in scan.landscape.triples() {
        heat.push_str(&format!("{t},{p},{v}\n"));
    }
    ctx.run
        .write(LANDSCAPE_CSV, "L1 landscape", heat.as_bytes())?;
    ctx.run.settings.insert(
        "effective_cos_phi_floor".into(),
        json!(chosen.effective_floor),
    );
    Ok(())
}

fn msc_stage(ctx: &mut Context, pre: &SpectrumSet) -> CliResult<()> {
    let fit = ctx.run.time("msc", || msc_correct(pre))?;
    let alignments = pre
        .labels()
        .into_iter()
        .zip(&fit.alignments)
        .map(|(label, a)| MscRecord {
            label,
            slope: a.scale(),
            intercept: a.offset(),
            c: a.c,
            d: a.d,
        })
        .collect();
    let artifact = MscArtifact {
        input_digests: ctx.run.digests.clone(),
        grid: *pre.grid(),
        reference: to_vec(&fit.reference),
        alignments,
    };
    ctx.run
        .write_json(MSC_JSON, "scatter-correction fit", &artifact)?;
    ctx.run.write(
        MSC_CSV,
        "scatter-corrected spectra",
        &csv_bytes(&fit.corrected),
    )?;
    Ok(())
}

/// Quotes a CSV field when needed.
fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
