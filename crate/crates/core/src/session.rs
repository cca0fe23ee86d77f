//! Interactive matching sessions: decisions arrive one at a time, receive an
//! immediate verdict, and the session ends with recall boosting.
//!
//! Timestamps are assigned here, never by the client. With a log directory
//! configured every session is mirrored to an append-only JSON Lines file
//! and can be rebuilt by replay.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::boost::{finalize, partial_matrix, rb_select, RbConfig};
use crate::calibrator::{build_consensus, DecisionModel, FeatureContext};
use crate::engine::{Estimator, EstimatorKind, RunningState, StepVerdict, TargetSpec};
use crate::error::Error;
use crate::io::TaskBundle;
use crate::matchers::{default_ensemble, Lexicon};
use crate::model::{Correspondence, DecisionHistory, DecisionRecord, Match, Pair, Quality};

/// Seconds on a monotone scale.
pub trait Clock: Send + Sync {
    fn now(&self) -> f64;
}

#[derive(Debug)]
pub struct SystemClock(Instant);

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock(Instant::now())
    }
}

impl Clock for SystemClock {
    fn now(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// A clock that moves only when told to.
#[derive(Debug, Default)]
pub struct ManualClock(Mutex<f64>);

impl ManualClock {
    pub fn set(&self, t: f64) {
        *self.0.lock().unwrap() = t;
    }

    pub fn advance(&self, dt: f64) {
        *self.0.lock().unwrap() += dt;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> f64 {
        *self.0.lock().unwrap()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("unknown task {0}")]
    UnknownTask(String),
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("calibrator unavailable")]
    CalibratorUnavailable,
    #[error("session {0} is finalized")]
    Closed(String),
    #[error("expected decision index {expected} but the session is at {actual}")]
    Conflict { expected: usize, actual: usize },
    #[error(transparent)]
    Invalid(#[from] Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    NotFound,
    Conflict,
    Invalid,
    Internal,
}

impl SessionError {
    pub fn class(&self) -> ErrorClass {
        match self {
            SessionError::UnknownTask(_) | SessionError::UnknownSession(_) => ErrorClass::NotFound,
            SessionError::CalibratorUnavailable | SessionError::Closed(_) | SessionError::Conflict { .. } => {
                ErrorClass::Conflict
            }
            SessionError::Invalid(Error::Io { .. }) => ErrorClass::Internal,
            SessionError::Invalid(_) => ErrorClass::Invalid,
        }
    }
}

pub type SessionResult<T> = std::result::Result<T, SessionError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionStatus {
    Open,
    Finalized,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CreateSession {
    pub task: String,
    pub target: TargetSpec,
    pub estimator: EstimatorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ref_size: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalReport {
    pub sigma_hp: Vec<Correspondence>,
    pub sigma_rb: Vec<Correspondence>,
    pub final_match: Vec<Correspondence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality: Option<Quality>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Read-only view of a session.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub id: String,
    pub task: String,
    pub target: TargetSpec,
    pub estimator: EstimatorKind,
    pub ref_size: usize,
    pub status: SessionStatus,
    pub records: Vec<DecisionRecord>,
    pub verdicts: Vec<StepVerdict>,
    pub accepted: Vec<Correspondence>,
    /// Threshold facing the next decision; absent when it depends on the
    /// calibrator's view of that decision.
    pub current_threshold: Option<f64>,
    pub estimated_precision: f64,
    pub estimated_fmeasure: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<FinalReport>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "lowercase")]
enum LogEvent {
    Create {
        id: String,
        request: CreateSession,
    },
    Decision {
        #[serde(flatten)]
        record: DecisionRecord,
    },
    Finalize {
        rb: RbConfig,
    },
}

struct Session {
    id: String,
    request: CreateSession,
    ref_size: usize,
    started: f64,
    state: RunningState,
    records: Vec<DecisionRecord>,
    verdicts: Vec<StepVerdict>,
    status: SessionStatus,
    report: Option<FinalReport>,
    log: Option<File>,
}

impl Session {
    fn append(&mut self, event: &LogEvent, dir: Option<&Path>) -> SessionResult<()> {
        if let Some(f) = self.log.as_mut() {
            let line = serde_json::to_string(event).map_err(Error::from)? + "\n";
            f.write_all(line.as_bytes())
                .and_then(|_| f.flush())
                .map_err(|e| Error::io(dir.map(|d| d.join(format!("{}.jsonl", self.id))).unwrap_or_default(), e))?;
        }
        Ok(())
    }

    fn snapshot(&self) -> SessionSnapshot {
        let (p, f) = match self.state.last_prediction() {
            Some(pred) => (pred.p_hat, pred.f_hat),
            None => self.state.unbiased_estimates(),
        };
        SessionSnapshot {
            id: self.id.clone(),
            task: self.request.task.clone(),
            target: self.request.target,
            estimator: self.request.estimator,
            ref_size: self.ref_size,
            status: self.status,
            records: self.records.clone(),
            verdicts: self.verdicts.clone(),
            accepted: self.state.accepted().iter().collect(),
            current_threshold: self.state.next_threshold(),
            estimated_precision: p,
            estimated_fmeasure: f,
            report: self.report.clone(),
        }
    }
}

struct TaskSlot {
    bundle: TaskBundle,
    context: Arc<FeatureContext>,
}

/// Summary of a loaded task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskInfo {
    pub id: String,
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub ref_size: usize,
    pub has_reference: bool,
    pub has_matrix: bool,
}

/// Full task description for clients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskDetail {
    #[serde(flatten)]
    pub info: TaskInfo,
    pub schema_a: crate::model::Schema,
    pub schema_b: crate::model::Schema,
}

/// Calibrator features for a task: consensus over the bundle's histories and
/// its algorithmic matrix, or the default ensemble when none ships.
pub fn task_context(bundle: &TaskBundle) -> Result<FeatureContext, Error> {
    let histories: Vec<DecisionHistory> = bundle.histories.values().cloned().collect();
    let consensus = build_consensus(&histories, bundle.rows(), bundle.cols());
    let algorithmic = bundle
        .algorithmic
        .clone()
        .unwrap_or_else(|| default_ensemble(&bundle.schema_a, &bundle.schema_b, &Lexicon::bundled()));
    FeatureContext::new(consensus, algorithmic)
}

pub struct SessionManager {
    tasks: BTreeMap<String, TaskSlot>,
    model: Option<Arc<dyn DecisionModel>>,
    clock: Arc<dyn Clock>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    next_id: AtomicU64,
    log_dir: Option<PathBuf>,
}

impl std::fmt::Debug for SessionManager {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SessionManager")
            .field("tasks", &self.tasks.keys().collect::<Vec<_>>())
            .field("model", &self.model.is_some())
            .field("log_dir", &self.log_dir)
            .finish()
    }
}

fn to_list(m: &Match) -> Vec<Correspondence> {
    m.iter().collect()
}

impl SessionManager {
    pub fn new(
        tasks: impl IntoIterator<Item = (String, TaskBundle)>,
        model: Option<Arc<dyn DecisionModel>>,
        clock: Arc<dyn Clock>,
    ) -> Self {
        let tasks = tasks
            .into_iter()
            .map(|(id, bundle)| {
                let context = task_context(&bundle).expect("bundle dimensions were validated");
                (
                    id,
                    TaskSlot {
                        bundle,
                        context: Arc::new(context),
                    },
                )
            })
            .collect();
        SessionManager {
            tasks,
            model,
            clock,
            sessions: RwLock::new(HashMap::new()),
            next_id: AtomicU64::new(1),
            log_dir: None,
        }
    }

    /// Mirrors sessions to `dir` from now on.
    pub fn with_log_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.log_dir = Some(dir.into());
        self
    }

    pub fn has_model(&self) -> bool {
        self.model.is_some()
    }

    pub fn tasks(&self) -> Vec<TaskInfo> {
        self.tasks.keys().map(|id| self.task_info(id).expect("listed task exists")).collect()
    }

    fn task_info(&self, id: &str) -> Option<TaskInfo> {
        self.tasks.get(id).map(|slot| {
            let b = &slot.bundle;
            TaskInfo {
                id: id.to_string(),
                name: b.meta.name.clone(),
                rows: b.rows(),
                cols: b.cols(),
                ref_size: b.ref_size(),
                has_reference: b.reference.is_some(),
                has_matrix: b.algorithmic.is_some(),
            }
        })
    }

    pub fn task(&self, id: &str) -> SessionResult<TaskDetail> {
        let slot = self.tasks.get(id).ok_or_else(|| SessionError::UnknownTask(id.to_string()))?;
        Ok(TaskDetail {
            info: self.task_info(id).expect("task exists"),
            schema_a: slot.bundle.schema_a.clone(),
            schema_b: slot.bundle.schema_b.clone(),
        })
    }

    fn estimator(&self, request: &CreateSession) -> SessionResult<(Estimator, usize)> {
        let slot = self
            .tasks
            .get(&request.task)
            .ok_or_else(|| SessionError::UnknownTask(request.task.clone()))?;
        let estimator = match request.estimator {
            EstimatorKind::Unbiased => Estimator::Unbiased,
            EstimatorKind::Calibrated => Estimator::Calibrated {
                model: self.model.clone().ok_or(SessionError::CalibratorUnavailable)?,
                context: slot.context.clone(),
            },
        };
        let ref_size = request.ref_size.unwrap_or_else(|| slot.bundle.ref_size());
        Ok((estimator, ref_size))
    }

    fn open_log(&self, id: &str) -> SessionResult<Option<File>> {
        let Some(dir) = &self.log_dir else { return Ok(None) };
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(format!("{id}.jsonl"));
        let f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok(Some(f))
    }

    fn build(&self, id: String, request: CreateSession, log: Option<File>) -> SessionResult<Session> {
        let (estimator, ref_size) = self.estimator(&request)?;
        let state = RunningState::new(request.target, estimator, ref_size)?;
        Ok(Session {
            id,
            request,
            ref_size,
            started: self.clock.now(),
            state,
            records: Vec::new(),
            verdicts: Vec::new(),
            status: SessionStatus::Open,
            report: None,
            log,
        })
    }

    pub fn create_session(&self, request: CreateSession) -> SessionResult<String> {
        self.estimator(&request)?;
        let id = format!("s{:06}", self.next_id.fetch_add(1, Ordering::SeqCst));
        let log = self.open_log(&id)?;
        let mut session = self.build(id.clone(), request.clone(), log)?;
        session.append(
            &LogEvent::Create {
                id: id.clone(),
                request,
            },
            self.log_dir.as_deref(),
        )?;
        self.sessions
            .write()
            .unwrap()
            .insert(id.clone(), Arc::new(Mutex::new(session)));
        Ok(id)
    }

    fn session(&self, id: &str) -> SessionResult<Arc<Mutex<Session>>> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| SessionError::UnknownSession(id.to_string()))
    }

    /// Applies one decision. `expected_index`, when given, must equal the
    /// number of decisions already in the session.
    pub fn submit_decision(
        &self,
        id: &str,
        pair: Pair,
        confidence: f64,
        expected_index: Option<usize>,
    ) -> SessionResult<StepVerdict> {
        let handle = self.session(id)?;
        let mut s = handle.lock().unwrap();
        if s.status == SessionStatus::Finalized {
            return Err(SessionError::Closed(id.to_string()));
        }
        if let Some(expected) = expected_index {
            if expected != s.records.len() {
                return Err(SessionError::Conflict {
                    expected,
                    actual: s.records.len(),
                });
            }
        }
        let slot = &self.tasks[&s.request.task];
        let (n, m) = (slot.bundle.rows(), slot.bundle.cols());
        if pair.row >= n || pair.col >= m {
            return Err(Error::PairOutOfBounds {
                index: s.records.len(),
                pair,
                rows: n,
                cols: m,
            }
            .into());
        }
        let mut t = self.clock.now() - s.started;
        if let Some(last) = s.state.last_timestamp() {
            if t <= last {
                t = last + 1e-6;
            }
        }
        let record = DecisionRecord {
            pair,
            confidence,
            timestamp: t.max(0.0),
        };
        let mut next = s.state.clone();
        let verdict = next.step(&record)?;
        s.append(&LogEvent::Decision { record }, self.log_dir.as_deref())?;
        s.state = next;
        s.records.push(record);
        s.verdicts.push(verdict);
        Ok(verdict)
    }

    pub fn get_state(&self, id: &str) -> SessionResult<SessionSnapshot> {
        Ok(self.session(id)?.lock().unwrap().snapshot())
    }

    pub fn finalize_session(&self, id: &str, rb: &RbConfig) -> SessionResult<SessionSnapshot> {
        rb.validate()?;
        let handle = self.session(id)?;
        let mut s = handle.lock().unwrap();
        if s.status == SessionStatus::Finalized {
            return Err(SessionError::Closed(id.to_string()));
        }
        let report = self.final_report(&s, rb)?;
        s.append(&LogEvent::Finalize { rb: *rb }, self.log_dir.as_deref())?;
        s.report = Some(report);
        s.status = SessionStatus::Finalized;
        Ok(s.snapshot())
    }

    fn final_report(&self, s: &Session, rb: &RbConfig) -> SessionResult<FinalReport> {
        let bundle = &self.tasks[&s.request.task].bundle;
        let sigma_hp = s.state.accepted().clone();
        let mut warnings = Vec::new();
        let sigma_rb = match &bundle.algorithmic {
            Some(alg) => {
                let history = DecisionHistory::new(s.records.clone());
                rb_select(&partial_matrix(alg, &history), rb, &sigma_hp)?
            }
            None => {
                warnings.push("task has no algorithmic matrix; recall boosting skipped".to_string());
                Match::new()
            }
        };
        let final_match = finalize(&sigma_hp, &sigma_rb)?;
        Ok(FinalReport {
            quality: bundle.reference.as_ref().map(|r| Quality::of(&final_match, r)),
            sigma_hp: to_list(&sigma_hp),
            sigma_rb: to_list(&sigma_rb),
            final_match: to_list(&final_match),
            warnings,
        })
    }

    /// Rebuilds every logged session. Returns how many were restored.
    pub fn recover(&self) -> SessionResult<usize> {
        let Some(dir) = self.log_dir.clone() else { return Ok(0) };
        if !dir.is_dir() {
            return Ok(0);
        }
        let mut files: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        files.sort();
        let mut restored = 0;
        for path in files {
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let mut session: Option<Session> = None;
            for (k, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                let event: LogEvent = serde_json::from_str(line).map_err(|e| Error::Parse {
                    path: path.clone(),
                    line: k + 1,
                    message: e.to_string(),
                })?;
                match (event, session.as_mut()) {
                    (LogEvent::Create { id, request }, None) => {
                        if let Some(n) = id.strip_prefix('s').and_then(|n| n.parse::<u64>().ok()) {
                            self.next_id.fetch_max(n + 1, Ordering::SeqCst);
                        }
                        session = Some(self.build(id, request, None)?);
                    }
                    (LogEvent::Decision { record }, Some(s)) => {
                        let v = s.state.step(&record)?;
                        s.records.push(record);
                        s.verdicts.push(v);
                    }
                    (LogEvent::Finalize { rb }, Some(s)) => {
                        s.report = Some(self.final_report(s, &rb)?);
                        s.status = SessionStatus::Finalized;
                    }
                    _ => {
                        return Err(Error::Parse {
                            path: path.clone(),
                            line: k + 1,
                            message: "event out of order".into(),
                        }
                        .into())
                    }
                }
            }
            if let Some(mut s) = session {
                s.log = Some(
                    OpenOptions::new()
                        .append(true)
                        .open(&path)
                        .map_err(|e| Error::io(&path, e))?,
                );
                // Keep new timestamps after the replayed ones.
                s.started = self.clock.now() - s.state.last_timestamp().unwrap_or(0.0);
                self.sessions
                    .write()
                    .unwrap()
                    .insert(s.id.clone(), Arc::new(Mutex::new(s)));
                restored += 1;
            }
        }
        Ok(restored)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::ThresholdMode;
    use crate::model::{ReferenceMatch, Schema};
    use crate::theory::MeasureKind;

    fn bundle(with_matrix: bool) -> TaskBundle {
        TaskBundle {
            meta: crate::io::BundleMeta {
                name: "mini".into(),
                version: "1".into(),
                ref_size: None,
            },
            schema_a: Schema::flat("PO2", &["orderDate", "orderNumber", "city"]).unwrap(),
            schema_b: Schema::flat("PO1", &["poDay", "poTime", "poCode", "city"]).unwrap(),
            reference: Some(ReferenceMatch::new(
                [(0, 0), (0, 1), (1, 2), (2, 3)].map(|(r, c)| Pair::new(r, c)),
            )),
            algorithmic: with_matrix.then(|| {
                crate::matchers::SimilarityMatrix::from_rows(&[
                    vec![0.22, 0.11, 0.13, 0.10],
                    vec![0.04, 0.06, 0.08, 0.00],
                    vec![0.12, 0.10, 0.07, 1.00],
                ])
                .unwrap()
            }),
            histories: BTreeMap::new(),
        }
    }

    fn manager(clock: Arc<ManualClock>) -> SessionManager {
        SessionManager::new(
            [("mini".to_string(), bundle(true)), ("bare".to_string(), bundle(false))],
            None,
            clock,
        )
    }

    fn f_dynamic(task: &str) -> CreateSession {
        CreateSession {
            task: task.into(),
            target: TargetSpec::new(MeasureKind::FMeasure, ThresholdMode::Dynamic),
            estimator: EstimatorKind::Unbiased,
            ref_size: None,
        }
    }

    const EXAMPLE: [(usize, usize, f64); 5] = [(0, 0, 0.9), (1, 1, 0.15), (0, 1, 0.25), (2, 3, 1.0), (1, 0, 0.3)];

    #[test]
    fn live_example_verdicts() {
        let clock = Arc::new(ManualClock::default());
        let mgr = manager(clock.clone());
        let id = mgr.create_session(f_dynamic("mini")).unwrap();
        assert_eq!(mgr.get_state(&id).unwrap().current_threshold, Some(0.0));
        let mut accepted = Vec::new();
        for (k, (r, c, conf)) in EXAMPLE.into_iter().enumerate() {
            clock.advance(3.0);
            accepted.push(mgr.submit_decision(&id, Pair::new(r, c), conf, Some(k)).unwrap().accepted);
            if k == 0 {
                let th = mgr.get_state(&id).unwrap().current_threshold.unwrap();
                assert!((th - 0.18).abs() < 1e-12);
            }
        }
        assert_eq!(accepted, [true, false, true, true, false]);
        let snap = mgr.get_state(&id).unwrap();
        assert!(snap.records.windows(2).all(|w| w[0].timestamp < w[1].timestamp));
    }

    #[test]
    fn finalize_with_strict_rb_adds_only_exact_matches() {
        let clock = Arc::new(ManualClock::default());
        let mgr = manager(clock.clone());
        let id = mgr.create_session(f_dynamic("mini")).unwrap();
        for (r, c, conf) in [(0, 0, 0.9), (1, 1, 0.15)] {
            clock.advance(1.0);
            mgr.submit_decision(&id, Pair::new(r, c), conf, None).unwrap();
        }
        let snap = mgr.finalize_session(&id, &RbConfig::new(crate::boost::RbVariant::Uniform, 1.0)).unwrap();
        let report = snap.report.unwrap();
        let rb: Vec<Pair> = report.sigma_rb.iter().map(|c| c.pair).collect();
        assert_eq!(rb, [Pair::new(2, 3)]);
        assert!(matches!(
            mgr.submit_decision(&id, Pair::new(0, 1), 0.5, None),
            Err(SessionError::Closed(_))
        ));
    }

    #[test]
    fn errors_are_classified() {
        let mgr = manager(Arc::new(ManualClock::default()));
        let calibrated = CreateSession {
            estimator: EstimatorKind::Calibrated,
            ..f_dynamic("mini")
        };
        let err = mgr.create_session(calibrated).unwrap_err();
        assert_eq!(err.to_string(), "calibrator unavailable");
        assert_eq!(mgr.create_session(f_dynamic("nope")).unwrap_err().class(), ErrorClass::NotFound);
        assert_eq!(mgr.get_state("s999").unwrap_err().class(), ErrorClass::NotFound);
        let id = mgr.create_session(f_dynamic("mini")).unwrap();
        assert_ne!(id, mgr.create_session(f_dynamic("mini")).unwrap());
        let oob = mgr.submit_decision(&id, Pair::new(3, 0), 0.5, None).unwrap_err();
        assert_eq!(oob.class(), ErrorClass::Invalid);
        let bad = mgr.submit_decision(&id, Pair::new(0, 0), 1.5, None).unwrap_err();
        assert_eq!(bad.class(), ErrorClass::Invalid);
        let stale = mgr.submit_decision(&id, Pair::new(0, 0), 0.5, Some(3)).unwrap_err();
        assert_eq!(stale.class(), ErrorClass::Conflict);
        assert!(mgr.get_state(&id).unwrap().verdicts.is_empty());
    }

    #[test]
    fn no_matrix_finalizes_with_warning() {
        let mgr = manager(Arc::new(ManualClock::default()));
        let id = mgr.create_session(f_dynamic("bare")).unwrap();
        mgr.submit_decision(&id, Pair::new(0, 0), 0.9, None).unwrap();
        let report = mgr.finalize_session(&id, &RbConfig::new(crate::boost::RbVariant::Uniform, 0.0)).unwrap().report.unwrap();
        assert!(report.sigma_rb.is_empty());
        assert_eq!(report.final_match, report.sigma_hp);
        assert_eq!(report.warnings.len(), 1);
    }

    #[test]
    fn recovery_replays_logs() {
        let dir = tempfile::tempdir().unwrap();
        let clock = Arc::new(ManualClock::default());
        let mgr = manager(clock.clone()).with_log_dir(dir.path());
        let id = mgr.create_session(f_dynamic("mini")).unwrap();
        for (r, c, conf) in EXAMPLE {
            clock.advance(2.5);
            mgr.submit_decision(&id, Pair::new(r, c), conf, None).unwrap();
        }
        let before = mgr.get_state(&id).unwrap();

        let revived = manager(clock.clone()).with_log_dir(dir.path());
        assert_eq!(revived.recover().unwrap(), 1);
        assert_eq!(revived.get_state(&id).unwrap(), before);
        let fresh = revived.create_session(f_dynamic("mini")).unwrap();
        assert_ne!(fresh, id);
        clock.advance(1.0);
        revived.submit_decision(&id, Pair::new(1, 2), 0.8, Some(5)).unwrap();
    }
}
