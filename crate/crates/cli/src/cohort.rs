//! Cohorts on disk: a task bundle whose histories are the simulated
//! matchers, plus `profiles.json` and `popularity.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use procmatch::io::{load_task_bundle, save_task_bundle, BundleMeta, TaskBundle};
use procmatch::sim::{BiasProfile, Cohort, Popularity, SimTask, SimulatedMatcher};

const PROFILES: &str = "profiles.json";
const POPULARITY: &str = "popularity.json";

/// Views a bundle as a simulation task; it must carry a reference and a matrix.
pub fn task_from_bundle(bundle: &TaskBundle) -> Result<SimTask> {
    Ok(SimTask {
        schema_a: bundle.schema_a.clone(),
        schema_b: bundle.schema_b.clone(),
        reference: bundle
            .reference
            .clone()
            .ok_or_else(|| anyhow!("task {} has no reference match", bundle.meta.name))?,
        algorithmic: bundle
            .algorithmic
            .clone()
            .ok_or_else(|| anyhow!("task {} has no algorithmic matrix", bundle.meta.name))?,
    })
}

pub fn cohort_bundle(cohort: &Cohort, name: &str) -> TaskBundle {
    TaskBundle {
        meta: BundleMeta { name: name.into(), version: "1".into(), ref_size: None },
        schema_a: cohort.task.schema_a.clone(),
        schema_b: cohort.task.schema_b.clone(),
        reference: Some(cohort.task.reference.clone()),
        algorithmic: Some(cohort.task.algorithmic.clone()),
        histories: cohort.matchers.iter().map(|m| (m.id.clone(), m.history.clone())).collect(),
    }
}

pub fn save_cohort(dir: &Path, cohort: &Cohort, name: &str) -> Result<()> {
    save_task_bundle(dir, &cohort_bundle(cohort, name))?;
    let profiles: BTreeMap<&str, &BiasProfile> = cohort.matchers.iter().map(|m| (m.id.as_str(), &m.profile)).collect();
    fs::write(dir.join(PROFILES), serde_json::to_string_pretty(&profiles)?)?;
    fs::write(dir.join(POPULARITY), serde_json::to_string(&cohort.popularity)?)?;
    Ok(())
}

pub fn load_cohort(dir: &Path) -> Result<Cohort> {
    let bundle = load_task_bundle(dir)?;
    let task = task_from_bundle(&bundle)?;
    let path = dir.join(PROFILES);
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let mut profiles: BTreeMap<String, BiasProfile> =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let popularity = match fs::read_to_string(dir.join(POPULARITY)) {
        Ok(text) => serde_json::from_str(&text)?,
        Err(_) => Popularity::default(),
    };
    let matchers = bundle
        .histories
        .into_iter()
        .map(|(id, history)| {
            let profile = profiles.remove(&id).ok_or_else(|| anyhow!("no profile for matcher {id}"))?;
            Ok(SimulatedMatcher { id, profile, history })
        })
        .collect::<Result<Vec<_>>>()?;
    if matchers.is_empty() {
        return Err(anyhow!("cohort {} has no matchers", dir.display()));
    }
    Ok(Cohort { task, popularity, matchers })
}
