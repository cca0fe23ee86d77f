use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, bail, ensure, Context, Result};
use procmatch::boost::{best_point, finalize, partial_matrix, rb_select, sweep_curve, BoostCase, RbConfig, RbVariant};
use procmatch::calibrator::{train, DecisionModel, HeadLayout, NetworkShape, Sequence, TrainConfig};
use procmatch::engine::{process_history, Estimator, EstimatorKind, StepVerdict, TargetSpec};
use procmatch::eval::{evaluate_cohort, EvalConfig, FoldReport, Method};
use procmatch::io::{load_calibrator, load_history, load_task_bundle, save_calibrator, save_matrix, TaskBundle};
use procmatch::matchers::{default_ensemble, slm_dominants, slm_max_delta, slm_threshold, Axis, Lexicon};
use procmatch::model::{validate_history, DecisionHistory, Match, Quality};
use procmatch::session::{task_context, SessionManager, SystemClock};
use procmatch::sim::{simulate_cohort, synthetic_task, ProfileDistribution, TaskShape};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{
    EvaluateArgs, Layout, MatchArgs, PolicyArgs, ReplayArgs, SecondLine, ServeArgs, SimulateArgs, SweepArgs,
    TrainArgs,
};
use crate::cohort::{cohort_bundle, load_cohort, save_cohort, task_from_bundle};

/// Parses `lo..hi:step` or a comma-separated list into grid points in [0,1].
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let grid: Vec<f64> = if let Some((range, step)) = spec.split_once(':') {
        let (lo, hi) = range
            .split_once("..")
            .ok_or_else(|| anyhow!("grid {spec:?} is not lo..hi:step"))?;
        let (lo, hi, step): (f64, f64, f64) = (lo.trim().parse()?, hi.trim().parse()?, step.trim().parse()?);
        ensure!(step > 0.0 && hi >= lo, "grid {spec:?} is empty");
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        (0..=n).map(|k| (lo + k as f64 * step).min(hi)).collect()
    } else {
        spec.split(',').map(|v| v.trim().parse::<f64>()).collect::<Result<_, _>>()?
    };
    ensure!(!grid.is_empty(), "grid {spec:?} is empty");
    ensure!(
        grid.iter().all(|g| (0.0..=1.0).contains(g)),
        "grid {spec:?} leaves [0,1]"
    );
    Ok(grid)
}

fn estimator_for(policy: &PolicyArgs, bundle: &TaskBundle) -> Result<Estimator> {
    match policy.estimator {
        EstimatorKind::Unbiased => Ok(Estimator::Unbiased),
        EstimatorKind::Calibrated => {
            let path = policy
                .model
                .as_ref()
                .ok_or_else(|| anyhow!("the calibrated estimator needs --model"))?;
            let model: Arc<dyn DecisionModel> = Arc::new(load_calibrator(path)?);
            Ok(Estimator::Calibrated { model, context: Arc::new(task_context(bundle)?) })
        }
    }
}

fn pct(v: f64) -> String {
    format!("{v:.2}")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.4}"))
}

pub fn simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let dist: ProfileDistribution = args.profiles.parse()?;
    let task = match &args.task {
        Some(dir) => task_from_bundle(&load_task_bundle(dir)?)?,
        None => synthetic_task(TaskShape::default(), args.task_seed.unwrap_or(args.seed))?,
    };
    let cohort = simulate_cohort(args.count, &dist, &task, args.seed)?;
    save_cohort(&args.out, &cohort, &format!("cohort-{}", args.seed))?;
    let ref_size = task.reference.known_size();
    let all = TargetSpec::ALL[0];
    let qs = cohort
        .matchers
        .par_iter()
        .map(|m| Ok(Quality::of(&process_history(&m.history, all, &Estimator::Unbiased, ref_size)?.0, &task.reference)))
        .collect::<Result<Vec<_>>>()?;
    let n = qs.len() as f64;
    let decisions = cohort.matchers.iter().map(|m| m.history.len()).sum::<usize>() as f64 / n;
    writeln!(out, "matchers {}  task {}x{}  reference {}", cohort.matchers.len(), task.rows(), task.cols(), ref_size)?;
    writeln!(out, "mean decisions {decisions:.1}")?;
    writeln!(
        out,
        "accept-all  P {:.4}  R {:.4}  F {:.4}",
        qs.iter().map(|q| q.precision).sum::<f64>() / n,
        qs.iter().map(|q| q.recall).sum::<f64>() / n,
        qs.iter().map(|q| q.fmeasure).sum::<f64>() / n
    )?;
    writeln!(out, "wrote {}", args.out.display())?;
    Ok(())
}

pub fn train_model(args: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let cohort = load_cohort(&args.cohort)?;
    let ctx = task_context(&cohort_bundle(&cohort, "train"))?;
    let data = cohort
        .matchers
        .iter()
        .map(|m| Sequence::from_history(&m.history, &cohort.task.reference, &ctx))
        .collect::<procmatch::Result<Vec<_>>>()?;
    let cfg = TrainConfig {
        shape: NetworkShape { input: 4, hidden: args.hidden, dense: args.dense },
        layout: match args.layout {
            Layout::Shared => HeadLayout::Shared,
            Layout::Separate => HeadLayout::Separate,
        },
        epochs: args.epochs,
        seed: args.seed,
        ..TrainConfig::default()
    };
    let trained = train(&data, &cfg)?;
    save_calibrator(&args.out, &trained.params)?;
    let r = &trained.report;
    writeln!(out, "epochs {}  best {}  stopped early {}", r.train_loss.len(), r.best_epoch.map_or("-".into(), |e| e.to_string()), r.stopped_early)?;
    writeln!(out, "epoch,train_loss,validation_loss")?;
    for (k, tl) in r.train_loss.iter().enumerate() {
        writeln!(out, "{k},{tl:.6},{}", r.validation_loss.get(k).map_or(String::new(), |v| format!("{v:.6}")))?;
    }
    writeln!(out, "wrote {} ({} parameters)", args.out.display(), trained.params.parameter_count())?;
    Ok(())
}

/// Mean of each fold's value.
fn fold_mean(reports: &[FoldReport], f: impl Fn(&FoldReport) -> f64) -> f64 {
    reports.iter().map(f).sum::<f64>() / reports.len() as f64
}

pub fn quality_table(reports: &[FoldReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<9} {:<11} {:>7} {:>7} {:>6} {:>6} {:>6}", "method", "target", "hits", "size", "P", "R", "F");
    for t in TargetSpec::ALL {
        for m in Method::ALL {
            let q = |f: fn(&procmatch::eval::QualityRow) -> f64| fold_mean(reports, |r| f(r.quality(m, t)));
            let _ = writeln!(
                s,
                "{:<9} {:<11} {:>7.2} {:>7.2} {:>6} {:>6} {:>6}",
                m.to_string(),
                t.to_string(),
                q(|r| r.hits),
                q(|r| r.size),
                pct(q(|r| r.precision)),
                pct(q(|r| r.recall)),
                pct(q(|r| r.fmeasure))
            );
        }
    }
    s
}

pub fn calibration_table(reports: &[FoldReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<5} {:<9} {:<9} {:>8} {:>8} {:>8} {:>8}", "fold", "method", "estimate", "r", "tau", "rmse", "mae");
    for r in reports {
        for m in Method::ALL {
            let c = r.calibration(m);
            for (name, a) in [("decision", c.decision), ("P", c.precision), ("F", c.fmeasure)] {
                let _ = writeln!(
                    s,
                    "{:<5} {:<9} {:<9} {:>8} {:>8} {:>8.4} {:>8.4}",
                    r.fold,
                    m.to_string(),
                    name,
                    opt(a.pearson),
                    opt(a.kendall),
                    a.rmse,
                    a.mae
                );
            }
        }
    }
    s
}

fn write_eval_csv(dir: &Path, reports: &[FoldReport]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut cal = String::from("fold,method,estimate,pearson,kendall,rmse,mae\n");
    let mut qual = String::from("fold,method,target,hits,size,precision,recall,fmeasure\n");
    let mut boost = String::from("fold,variant,threshold,recall_hp,recall_final,f_hp,f_final,recall_drops\n");
    let o = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for r in reports {
        for c in &r.calibration {
            for (name, a) in [("decision", c.decision), ("precision", c.precision), ("fmeasure", c.fmeasure)] {
                let _ = writeln!(cal, "{},{},{name},{},{},{},{}", r.fold, c.method, o(a.pearson), o(a.kendall), a.rmse, a.mae);
            }
        }
        for q in &r.quality {
            let _ = writeln!(
                qual,
                "{},{},{},{},{},{},{},{}",
                r.fold, q.method, q.target, q.hits, q.size, q.precision, q.recall, q.fmeasure
            );
        }
        let b = &r.boost;
        let _ = writeln!(
            boost,
            "{},{},{},{},{},{},{},{}",
            r.fold,
            serde_json::to_value(b.variant)?.as_str().unwrap_or_default(),
            b.threshold,
            b.mean_recall_hp,
            b.mean_recall_final,
            b.mean_f_hp,
            b.mean_f_final,
            b.recall_drops.len()
        );
    }
    fs::write(dir.join("calibration.csv"), cal)?;
    fs::write(dir.join("quality.csv"), qual)?;
    fs::write(dir.join("boost.csv"), boost)?;
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(reports)?)?;
    Ok(())
}

pub fn evaluate(args: &EvaluateArgs, out: &mut dyn Write) -> Result<Vec<FoldReport>> {
    let grid = parse_grid(&args.grid)?;
    let cohort = load_cohort(&args.cohort)?;
    let cfg = EvalConfig {
        folds: args.folds,
        seed: args.seed,
        train: TrainConfig { epochs: args.epochs, seed: args.seed, ..TrainConfig::default() },
        rb_variant: args.rb_variant,
        rb_grid: grid,
        ..EvalConfig::default()
    };
    let reports = evaluate_cohort(&cohort, &cfg)?;
    writeln!(out, "match quality, mean over {} folds", reports.len())?;
    write!(out, "{}", quality_table(&reports))?;
    writeln!(out)?;
    writeln!(out, "calibration against correctness and prefix quality")?;
    write!(out, "{}", calibration_table(&reports))?;
    writeln!(out)?;
    writeln!(out, "recall boosting ({:?})", args.rb_variant)?;
    writeln!(out, "fold threshold  R_hp   R_final F_hp   F_final drops")?;
    for r in &reports {
        let b = &r.boost;
        writeln!(
            out,
            "{:<4} {:<9.2} {:<6} {:<7} {:<6} {:<7} {}",
            r.fold,
            b.threshold,
            pct(b.mean_recall_hp),
            pct(b.mean_recall_final),
            pct(b.mean_f_hp),
            pct(b.mean_f_final),
            b.recall_drops.len()
        )?;
    }
    if let Some(dir) = &args.out {
        write_eval_csv(dir, &reports)?;
        writeln!(out, "wrote {}", dir.display())?;
    }
    Ok(reports)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplayOutcome {
    pub history: String,
    pub verdicts: Vec<StepVerdict>,
    #[serde(skip)]
    pub accepted: Match,
    pub quality: Option<Quality>,
    #[serde(skip)]
    pub boosted: Option<Match>,
    pub boosted_quality: Option<Quality>,
}

fn labels(m: &Match) -> String {
    m.pairs().map(|p| p.label()).collect::<Vec<_>>().join(", ")
}

fn select_histories(bundle: &TaskBundle, which: Option<&str>) -> Result<Vec<(String, DecisionHistory)>> {
    let chosen = match which {
        None => bundle.histories.iter().map(|(k, h)| (k.clone(), h.clone())).collect(),
        Some(name) => match bundle.histories.get(name) {
            Some(h) => vec![(name.to_string(), h.clone())],
            None => vec![(name.to_string(), load_history(Path::new(name))?)],
        },
    };
    for (name, h) in &chosen {
        if let Some(v) = validate_history(h, bundle.rows(), bundle.cols()).first() {
            bail!("history {name}: {v:?}");
        }
    }
    ensure!(!chosen.is_empty(), "no histories to replay");
    Ok(chosen)
}

pub fn replay(args: &ReplayArgs, out: &mut dyn Write) -> Result<Vec<ReplayOutcome>> {
    let bundle = load_task_bundle(&args.task)?;
    let histories = select_histories(&bundle, args.history.as_deref())?;
    let estimator = estimator_for(&args.policy, &bundle)?;
    let rb = args.rb_variant.map(|v| RbConfig::new(v, args.rb_param));
    if let Some(rb) = &rb {
        rb.validate()?;
    }
    let target = TargetSpec::new(args.policy.target, args.policy.mode);
    let ref_size = args.ref_size.unwrap_or_else(|| bundle.ref_size());
    let mut outcomes = Vec::new();
    for (name, h) in histories {
        let (accepted, verdicts) = process_history(&h, target, &estimator, ref_size)?;
        let quality = bundle.reference.as_ref().map(|r| Quality::of(&accepted, r));
        let boosted = match (&rb, &bundle.algorithmic) {
            (Some(rb), Some(m)) => Some(finalize(&accepted, &rb_select(&partial_matrix(m, &h), rb, &accepted)?)?),
            _ => None,
        };
        let boosted_quality = boosted.as_ref().zip(bundle.reference.as_ref()).map(|(b, r)| Quality::of(b, r));
        writeln!(out, "history {name}  target {target}  estimator {:?}  ref_size {ref_size}", estimator.kind())?;
        writeln!(out, "{:>4}  {:<6} {:>6} {:>9}  verdict", "step", "pair", "conf", "threshold")?;
        for v in &verdicts {
            writeln!(
                out,
                "{:>4}  {:<6} {:>6.2} {:>9.2}  {}",
                v.index + 1,
                v.pair.label(),
                v.confidence_used,
                v.threshold,
                if v.accepted { "accept" } else { "reject" }
            )?;
        }
        let marks: Vec<&str> = verdicts.iter().map(|v| if v.accepted { "+" } else { "-" }).collect();
        writeln!(out, "verdicts {}", marks.join(" "))?;
        writeln!(out, "final {{{}}}", labels(&accepted))?;
        if let Some(q) = &quality {
            writeln!(out, "quality P {}  R {}  F {}", pct(q.precision), pct(q.recall), pct(q.fmeasure))?;
        }
        if let Some(b) = &boosted {
            writeln!(out, "boosted {{{}}}", labels(b))?;
            if let Some(q) = &boosted_quality {
                writeln!(out, "boosted quality P {}  R {}  F {}", pct(q.precision), pct(q.recall), pct(q.fmeasure))?;
            }
        }
        outcomes.push(ReplayOutcome { history: name, verdicts, accepted, quality, boosted, boosted_quality });
    }
    if let Some(path) = &args.out {
        let mut csv = String::from("history,index,row,col,confidence,threshold,accepted,running_size\n");
        for o in &outcomes {
            for v in &o.verdicts {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{},{}",
                    o.history, v.index, v.pair.row, v.pair.col, v.confidence_used, v.threshold, v.accepted, v.running_match_size
                );
            }
        }
        fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(outcomes)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepOutcome {
    pub variant: RbVariant,
    pub curve: Vec<(f64, f64)>,
    pub best: f64,
    pub best_f: f64,
}

/// Boost inputs for every history of a bundle under one policy.
pub fn boost_cases(bundle: &TaskBundle, target: TargetSpec, estimator: &Estimator) -> Result<Vec<BoostCase>> {
    let reference = bundle.reference.as_ref().ok_or_else(|| anyhow!("sweeping needs a reference match"))?;
    let matrix = bundle.algorithmic.as_ref().ok_or_else(|| anyhow!("sweeping needs an algorithmic matrix"))?;
    let ref_size = bundle.ref_size();
    bundle
        .histories
        .par_iter()
        .map(|(_, h)| {
            Ok(BoostCase {
                sigma_hp: process_history(h, target, estimator, ref_size)?.0,
                partial: partial_matrix(matrix, h),
                reference: reference.clone(),
            })
        })
        .collect()
}

pub fn sweep(args: &SweepArgs, out: &mut dyn Write) -> Result<SweepOutcome> {
    let grid = parse_grid(&args.grid)?;
    let bundle = load_task_bundle(&args.cohort)?;
    let estimator = estimator_for(&args.policy, &bundle)?;
    let target = TargetSpec::new(args.policy.target, args.policy.mode);
    let cases = boost_cases(&bundle, target, &estimator)?;
    ensure!(!cases.is_empty(), "no histories to sweep");
    let curve = sweep_curve(&cases, args.rb_variant, &grid)?;
    let (best, best_f) = best_point(&curve).ok_or_else(|| anyhow!("empty grid"))?;
    writeln!(out, "param,mean_f")?;
    for (g, f) in &curve {
        writeln!(out, "{g:.4},{f:.6}")?;
    }
    writeln!(out, "best {best:.4} mean F {best_f:.6} over {} histories", cases.len())?;
    if let Some(path) = &args.out {
        let mut csv = String::from("param,mean_f\n");
        for (g, f) in &curve {
            let _ = writeln!(csv, "{g},{f}");
        }
        fs::write(path, csv)?;
    }
    Ok(SweepOutcome { variant: args.rb_variant, curve, best, best_f })
}

pub fn run_match(args: &MatchArgs, out: &mut dyn Write) -> Result<Match> {
    let bundle = load_task_bundle(&args.task)?;
    ensure!((0.0..=1.0).contains(&args.param), "--param {} outside [0,1]", args.param);
    let matrix = if args.bundled {
        bundle.algorithmic.clone().ok_or_else(|| anyhow!("the bundle has no matrix"))?
    } else {
        let lex = match &args.lexicon {
            Some(p) => Lexicon::load(p)?,
            None => Lexicon::bundled(),
        };
        default_ensemble(&bundle.schema_a, &bundle.schema_b, &lex)
    };
    let sigma = match args.slm {
        SecondLine::Threshold => slm_threshold(&matrix, args.param)?,
        SecondLine::MaxDeltaRow => slm_max_delta(&matrix, args.param, Axis::Row)?,
        SecondLine::MaxDeltaCol => slm_max_delta(&matrix, args.param, Axis::Column)?,
        SecondLine::Dominants => slm_dominants(&matrix),
    };
    let (a, b) = (&bundle.schema_a.attributes, &bundle.schema_b.attributes);
    for c in sigma.iter() {
        writeln!(out, "{:<6} {} ~ {}  {:.3}", c.pair.label(), a[c.pair.row].name, b[c.pair.col].name, matrix.at(c.pair))?;
    }
    writeln!(out, "{} correspondences", sigma.len())?;
    if let Some(r) = &bundle.reference {
        let q = Quality::of(&sigma, r);
        writeln!(out, "quality P {}  R {}  F {}", pct(q.precision), pct(q.recall), pct(q.fmeasure))?;
    }
    if let Some(path) = &args.out {
        save_matrix(path, &matrix)?;
    }
    Ok(sigma)
}

pub fn serve(args: &ServeArgs, out: &mut dyn Write) -> Result<()> {
    let tasks = procmatch_server::load_tasks(&args.tasks)?;
    ensure!(!tasks.is_empty(), "no task bundles under {}", args.tasks.display());
    let model: Option<Arc<dyn DecisionModel>> = match &args.model {
        Some(p) => Some(Arc::new(load_calibrator(p)?) as Arc<dyn DecisionModel>),
        None => None,
    };
    let origin = args.ui_origin.as_deref().map(str::parse).transpose().context("--ui-origin")?;
    let mut manager = SessionManager::new(tasks, model, Arc::new(SystemClock::default()));
    if let Some(dir) = &args.log_dir {
        manager = manager.with_log_dir(dir);
        let n = manager.recover().map_err(|e| anyhow!("{e}"))?;
        writeln!(out, "recovered {n} sessions from {}", dir.display())?;
    }
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&args.addr).await.with_context(|| format!("binding {}", args.addr))?;
        writeln!(out, "listening on {}", listener.local_addr()?)?;
        out.flush()?;
        procmatch_server::serve(listener, Arc::new(manager), origin).await?;
        Ok(())
    })
}

