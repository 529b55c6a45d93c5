use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ninegrid::arrange::{rank_images, ScorerRole, Strategy, VariantKey};
use ninegrid::compose::{compose_grid, write_composite};
use ninegrid::preprocess::{
    preprocess_set, thumb_file_name, SetManifest, SourceImage, ThumbnailSet,
};
use ninegrid::scoring::{run_external_scorer, ExternalSource, ScoreRequest};
use ninegrid::study::{
    build_study, build_variants, summarize, tally, BallotLog, QuadRef, StudyBundle, BALLOT_LOG,
    QUAD_MANIFEST,
};
use ninegrid::{GridLayout, ScoreTable, ScorerDescriptor, ScorerKind};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::args::*;

/// What a command reports: JSON for `--json`, text otherwise.
pub struct Outcome {
    pub json: Value,
    pub text: String,
    pub warnings: Vec<String>,
}

impl Outcome {
    fn new(json: Value, text: impl Into<String>) -> Self {
        Outcome {
            json,
            text: text.into(),
            warnings: Vec::new(),
        }
    }
}

fn is_image(path: &Path) -> bool {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
    if name.ends_with(".thumb.png") {
        return false;
    }
    matches!(
        path.extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref(),
        Some("png" | "jpg" | "jpeg")
    )
}

fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("cannot read {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_image(p))
        .collect();
    files.sort();
    Ok(files)
}

fn dir_name(dir: &Path) -> String {
    dir.canonicalize()
        .ok()
        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "set".into())
}

/// Reads, crops and resizes the images in `dir` and writes the set to `out`.
pub fn preprocess_dir(dir: &Path, set_id: &str, out: &Path) -> Result<SetManifest> {
    let files = list_images(dir)?;
    let images = files
        .iter()
        .map(|p| {
            let id = p
                .file_stem()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned();
            SourceImage::open(id, p).with_context(|| format!("cannot decode {}", p.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let set = preprocess_set(&images, set_id)?;
    Ok(set.save(out, &files)?)
}

pub fn preprocess(cli: &Cli, args: &PreprocessArgs) -> Result<Outcome> {
    let set_id = args.set_id.clone().unwrap_or_else(|| dir_name(&args.dir));
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| cli.data_dir.join("sets").join(&set_id));
    let manifest = preprocess_dir(&args.dir, &set_id, &out)?;
    Ok(Outcome::new(
        json!({ "set_id": set_id, "out": out, "manifest": manifest }),
        format!(
            "wrote {} thumbnails for `{set_id}` to {}",
            manifest.images.len(),
            out.display()
        ),
    ))
}

/// Scores the set in `dir` with `scorer_id` and writes `scores.<id>.json`.
pub fn score_dir(
    dir: &Path,
    scorer_id: &str,
    external: Option<ExternalSource>,
    warnings: &mut Vec<String>,
) -> Result<ScoreTable> {
    let desc = ScorerDescriptor::parse(scorer_id)?;
    let table = match desc.kind {
        ScorerKind::Builtin => {
            let set = ThumbnailSet::load(dir)?;
            desc.builtin().expect("builtin descriptor").score_set(&set)
        }
        ScorerKind::External => {
            let manifest = SetManifest::load(dir)?;
            let Some(source) = external else {
                bail!("scorer `{scorer_id}` needs --external-scorer or --sidecar");
            };
            let base = dir.canonicalize()?;
            let requests: Vec<ScoreRequest> = manifest
                .ids()
                .into_iter()
                .map(|id| ScoreRequest {
                    path: base.join(thumb_file_name(&id)),
                    id,
                })
                .collect();
            let out = run_external_scorer(&desc, &source, &manifest.set_id, &requests)?;
            warnings.extend(out.warnings.iter().map(|w| format!("{scorer_id}: {w}")));
            out.table
        }
    };
    table.save(dir)?;
    Ok(table)
}

pub fn score(args: &ScoreArgs) -> Result<Outcome> {
    let source = match (&args.external.external_scorer, &args.external.sidecar) {
        (Some(cmd), _) => Some(ExternalSource::Command(cmd.clone())),
        (None, Some(path)) => Some(ExternalSource::Sidecar(path.clone())),
        (None, None) => None,
    };
    let mut warnings = Vec::new();
    let table = score_dir(&args.set, &args.scorer, source, &mut warnings)?;
    let text = table
        .scores
        .iter()
        .map(|(id, v)| format!("{id}\t{v}"))
        .collect::<Vec<_>>()
        .join("\n");
    let mut out = Outcome::new(serde_json::to_value(&table)?, text);
    out.json["warnings"] = json!(warnings);
    out.warnings = warnings;
    Ok(out)
}

pub fn arrange_dir(dir: &Path, scorer_id: &str, strategy: Strategy) -> Result<GridLayout> {
    let manifest = SetManifest::load(dir)?;
    let table = ScoreTable::load(dir, scorer_id)?;
    let ranking = rank_images(&table, &manifest.ids())?;
    let layout = ninegrid::arrange(&ranking, strategy)?;
    layout.save(dir)?;
    Ok(layout)
}

fn layout_text(layout: &GridLayout) -> String {
    layout
        .placement
        .chunks(3)
        .map(|row| row.join("\t"))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn arrange(args: &LayoutArgs) -> Result<Outcome> {
    let layout = arrange_dir(&args.set, &args.scorer, args.strategy.into())?;
    Ok(Outcome::new(
        serde_json::to_value(&layout)?,
        layout_text(&layout),
    ))
}

pub fn compose(args: &LayoutArgs) -> Result<Outcome> {
    let strategy: Strategy = args.strategy.into();
    let set = ThumbnailSet::load(&args.set)?;
    let layout = GridLayout::load(&args.set, &args.scorer, strategy)?;
    let composite = compose_grid(&set, &layout)?;
    let path = write_composite(&composite, &args.set.join(composite.file_name()))?;
    Ok(Outcome::new(
        json!({ "set_id": set.set_id, "scorer_id": args.scorer, "strategy": strategy, "path": path }),
        format!("wrote {}", path.display()),
    ))
}

fn run_one_set(
    dir: &Path,
    args: &PipelineArgs,
    out_root: &Path,
    warnings: &mut Vec<String>,
) -> Result<QuadRef> {
    let set_id = dir_name(dir);
    let out = out_root.join(&set_id);
    preprocess_dir(dir, &set_id, &out)?;
    let external = args.external_scorer.clone().map(ExternalSource::Command);
    let aesthetic = score_dir(&out, &args.aesthetic, external.clone(), warnings)?;
    let content = score_dir(&out, &args.content, external, warnings)?;
    for scorer in [&args.aesthetic, &args.content] {
        for strategy in Strategy::ALL {
            arrange_dir(&out, scorer, strategy)?;
        }
    }
    log::info!(
        "{set_id}: arranged by {} and {}",
        args.aesthetic,
        args.content
    );
    let set = ThumbnailSet::load(&out)?;
    let quad = build_variants(&set, &aesthetic, &content)?;
    Ok(quad.save(&out)?)
}

pub fn pipeline(cli: &Cli, args: &PipelineArgs) -> Result<Outcome> {
    if args.aesthetic == args.content {
        bail!(
            "aesthetic and content scorers must differ (both are `{}`)",
            args.aesthetic
        );
    }
    let out_root = args
        .out
        .clone()
        .unwrap_or_else(|| cli.data_dir.join("pipeline"));
    fs::create_dir_all(&out_root)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.max(1))
        .build()?;
    let results: Vec<(PathBuf, Result<QuadRef>, Vec<String>)> = pool.install(|| {
        args.dirs
            .par_iter()
            .map(|dir| {
                let mut warnings = Vec::new();
                let r = run_one_set(dir, args, &out_root, &mut warnings);
                (dir.clone(), r, warnings)
            })
            .collect()
    });

    let mut sets = Vec::new();
    let mut warnings = Vec::new();
    let mut failures = Vec::new();
    for (dir, r, w) in results {
        warnings.extend(w);
        match r {
            Ok(q) => sets.push(json!({ "set_id": q.set_id, "dir": out_root.join(&q.set_id), "composites": q.variants.len() })),
            Err(e) => failures.push(format!("{}: {e:#}", dir.display())),
        }
    }
    if !failures.is_empty() {
        bail!(
            "{} of {} sets failed:\n{}",
            failures.len(),
            args.dirs.len(),
            failures.join("\n")
        );
    }
    let mut out = Outcome::new(
        json!({ "out": out_root, "sets": sets, "warnings": warnings }),
        format!(
            "wrote 4 composites for each of {} sets under {}",
            sets.len(),
            out_root.display()
        ),
    );
    out.warnings = warnings;
    Ok(out)
}

fn find_quads(root: &Path, found: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(root)
        .with_context(|| format!("cannot read {}", root.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    for path in entries {
        if path.is_dir() {
            find_quads(&path, found)?;
        } else if path.file_name().is_some_and(|n| n == QUAD_MANIFEST) {
            found.push(path);
        }
    }
    Ok(())
}

pub fn study_build(cli: &Cli, args: &BuildArgs) -> Result<Outcome> {
    let mut files = Vec::new();
    find_quads(&args.quads, &mut files)?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| cli.data_dir.join("studies").join(&args.study_id));
    let mut quads = Vec::with_capacity(files.len());
    for f in &files {
        let quad = QuadRef::load(f)?;
        let base = f.parent().expect("file has a parent");
        quads.push((base.to_path_buf(), quad));
    }
    quads.sort_by(|a, b| a.1.set_id.cmp(&b.1.set_id));
    // Check the count before copying any media.
    let refs: Vec<QuadRef> = quads.iter().map(|(_, q)| q.clone()).collect();
    let draft = build_study(
        &args.study_id,
        &refs,
        args.questionnaires,
        args.questions,
        args.seed,
    )?;
    let used: std::collections::HashSet<&str> =
        draft.quads.iter().map(|q| q.set_id.as_str()).collect();
    let mut imported = Vec::with_capacity(quads.len());
    for (base, q) in &quads {
        if used.contains(q.set_id.as_str()) {
            imported.push(q.import(base, &out)?);
        } else {
            imported.push(q.clone());
        }
    }
    let bundle = build_study(
        &args.study_id,
        &imported,
        args.questionnaires,
        args.questions,
        args.seed,
    )?;
    let manifest = bundle.save(&out)?;
    Ok(Outcome::new(
        json!({
            "study_id": bundle.study_id,
            "manifest": manifest,
            "questionnaires": bundle.questionnaires.len(),
            "questions_per": bundle.questions_per,
            "sets": bundle.quads.len(),
        }),
        format!(
            "wrote {} ({} questionnaires × {} questions)",
            manifest.display(),
            bundle.questionnaires.len(),
            bundle.questions_per
        ),
    ))
}

pub fn study_serve(cli: &Cli, args: &ServeArgs) -> Result<Outcome> {
    let config = ninegrid_service::Config {
        bind: args.bind,
        data_dir: cli.data_dir.clone(),
        preload: args.load.clone(),
    };
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(ninegrid_service::serve(config))?;
    Ok(Outcome::new(json!({ "stopped": true }), "stopped"))
}

pub fn study_tally(args: &TallyArgs) -> Result<Outcome> {
    let log = if args.path.is_dir() {
        // Validates the manifest when tallying a bundle.
        StudyBundle::load(&args.path)?;
        args.path.join(BALLOT_LOG)
    } else {
        args.path.clone()
    };
    let ballots = BallotLog::read_all(&log)?;
    let result = tally(&ballots)?;
    let summary = (result.total > 0)
        .then(|| summarize::<f64>(&result))
        .transpose()?;

    let mut text = String::new();
    for role in ScorerRole::ALL {
        for strategy in Strategy::ALL {
            let n = result.count(VariantKey::new(role, strategy));
            text.push_str(&format!(
                "{:<10} {:<11} {n}\n",
                role.as_str(),
                strategy.as_str()
            ));
        }
    }
    text.push_str(&format!("total {}\n", result.total));
    if let Some(s) = &summary {
        text.push_str(&format!(
            "aesthetic {} / content {}\ncenter {} / sequential {}\nchi-square {:.4} (df {}, p = {:.3e})",
            s.aesthetic, s.content, s.center, s.sequential, s.chi_square, s.degrees_of_freedom, s.p_value
        ));
    }
    Ok(Outcome::new(
        json!({ "tally": result, "summary": summary }),
        text.trim_end().to_string(),
    ))
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Preprocess(a) => preprocess(cli, a),
        Command::Score(a) => score(a),
        Command::Arrange(a) => arrange(a),
        Command::Compose(a) => compose(a),
        Command::Pipeline(a) => pipeline(cli, a),
        Command::Study(StudyCommand::Build(a)) => study_build(cli, a),
        Command::Study(StudyCommand::Serve(a)) => study_serve(cli, a),
        Command::Study(StudyCommand::Tally(a)) => study_tally(a),
    }
}
