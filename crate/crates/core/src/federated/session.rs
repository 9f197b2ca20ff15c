//! Coordinator run lifecycle: accept submissions, close, emit the report.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use thiserror::Error;
use tracing::warn;

use super::wire::{Envelope, Message};
use super::{merge_summaries, ClientSummary, FederatedReport, MergeError};
use crate::config::EvalConfig;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SessionError {
    #[error("run `{0}` already exists")]
    DuplicateRun(String),
    #[error("unknown run `{0}`")]
    UnknownRun(String),
    #[error("client `{0}` is not expected in this run")]
    UnknownClient(String),
    #[error("run `{0}` is closed")]
    LateSubmission(String),
    #[error("summary is for run `{got}`, not `{expected}`")]
    WrongRun { expected: String, got: String },
    #[error("schema fingerprint {actual} does not match expected {expected}")]
    SchemaMismatch { expected: String, actual: String },
    #[error("run `{0}` has not been closed yet")]
    NotClosed(String),
    #[error(transparent)]
    Merge(#[from] MergeError),
}

impl SessionError {
    /// Stable machine-readable code for wire errors.
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::DuplicateRun(_) => "DUPLICATE_RUN",
            SessionError::UnknownRun(_) => "UNKNOWN_RUN",
            SessionError::UnknownClient(_) => "UNKNOWN_CLIENT",
            SessionError::LateSubmission(_) => "LATE_SUBMISSION",
            SessionError::WrongRun { .. } => "WRONG_RUN",
            SessionError::SchemaMismatch { .. } => "SCHEMA_MISMATCH",
            SessionError::NotClosed(_) => "NOT_CLOSED",
            SessionError::Merge(_) => "MERGE_FAILED",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubmitOutcome {
    /// A previous summary from the same client was replaced.
    pub replaced: bool,
    /// This submission completed the run.
    pub closed: bool,
}

/// One federated run. Time is passed in explicitly so tests control deadlines.
#[derive(Debug)]
pub struct CoordinatorSession {
    cfg: EvalConfig,
    expected: BTreeSet<String>,
    deadline: Option<DateTime<Utc>>,
    summaries: BTreeMap<String, ClientSummary>,
    warnings: Vec<String>,
    report: Option<FederatedReport>,
}

impl CoordinatorSession {
    pub fn new(cfg: EvalConfig, expected: BTreeSet<String>, deadline: Option<DateTime<Utc>>) -> Self {
        CoordinatorSession {
            cfg,
            expected,
            deadline,
            summaries: BTreeMap::new(),
            warnings: Vec::new(),
            report: None,
        }
    }

    pub fn run_id(&self) -> &str {
        &self.cfg.run_id
    }

    pub fn config(&self) -> &EvalConfig {
        &self.cfg
    }

    pub fn expected(&self) -> &BTreeSet<String> {
        &self.expected
    }

    pub fn is_closed(&self) -> bool {
        self.report.is_some()
    }

    pub fn received(&self) -> impl Iterator<Item = &str> {
        self.summaries.keys().map(String::as_str)
    }

    pub fn report(&self) -> Option<&FederatedReport> {
        self.report.as_ref()
    }

    fn past_deadline(&self, now: DateTime<Utc>) -> bool {
        self.deadline.is_some_and(|d| now > d)
    }

    /// Closes the run if its deadline has passed.
    pub fn tick(&mut self, now: DateTime<Utc>) -> Result<(), SessionError> {
        if !self.is_closed() && self.past_deadline(now) {
            self.close()?;
        }
        Ok(())
    }

    pub fn check_client(&self, client_id: &str) -> Result<(), SessionError> {
        if self.is_closed() {
            return Err(SessionError::LateSubmission(self.cfg.run_id.clone()));
        }
        if !self.expected.contains(client_id) {
            return Err(SessionError::UnknownClient(client_id.to_string()));
        }
        Ok(())
    }

    pub fn submit(&mut self, summary: ClientSummary, now: DateTime<Utc>) -> Result<SubmitOutcome, SessionError> {
        self.tick(now)?;
        self.check_client(&summary.client_id)?;
        if summary.run_id != self.cfg.run_id {
            return Err(SessionError::WrongRun {
                expected: self.cfg.run_id.clone(),
                got: summary.run_id,
            });
        }
        if let Some(expected) = &self.cfg.expected_fingerprint {
            if *expected != summary.schema_fingerprint {
                return Err(SessionError::SchemaMismatch {
                    expected: expected.clone(),
                    actual: summary.schema_fingerprint,
                });
            }
        }
        // Without a configured fingerprint, the first accepted summary pins it.
        let pinned = self
            .summaries
            .values()
            .find(|s| s.client_id != summary.client_id)
            .map(|s| s.schema_fingerprint.clone());
        if let Some(expected) = pinned {
            if expected != summary.schema_fingerprint {
                return Err(SessionError::SchemaMismatch {
                    expected,
                    actual: summary.schema_fingerprint,
                });
            }
        }
        let id = summary.client_id.clone();
        let replaced = self.summaries.insert(id.clone(), summary).is_some();
        if replaced {
            warn!(run = %self.cfg.run_id, client = %id, "resubmission replaces earlier summary");
            self.warnings.push(format!("RESUBMITTED: client {id} resubmitted; the latest summary was kept"));
        }
        let closed = self.summaries.len() == self.expected.len();
        if closed {
            self.close()?;
        }
        Ok(SubmitOutcome { replaced, closed })
    }

    /// Merges what has been received. Idempotent once closed.
    pub fn close(&mut self) -> Result<&FederatedReport, SessionError> {
        if self.report.is_none() {
            let summaries: Vec<ClientSummary> = self.summaries.values().cloned().collect();
            let mut report = merge_summaries(&summaries, &self.cfg)?;
            report.missing_clients = self
                .expected
                .iter()
                .filter(|c| !self.summaries.contains_key(*c))
                .cloned()
                .collect();
            report.notices = self.warnings.clone();
            report
                .notices
                .extend(report.missing_clients.iter().map(|c| format!("MISSING_CLIENT: {c} did not report")));
            self.report = Some(report);
        }
        Ok(self.report.as_ref().expect("set above"))
    }
}

/// Registry of runs shared across request handlers.
#[derive(Debug, Default)]
pub struct Coordinator {
    runs: Mutex<BTreeMap<String, CoordinatorSession>>,
}

impl Coordinator {
    pub fn new() -> Self {
        Self::default()
    }

    fn with_run<T>(
        &self,
        run_id: &str,
        f: impl FnOnce(&mut CoordinatorSession) -> Result<T, SessionError>,
    ) -> Result<T, SessionError> {
        let mut runs = self.runs.lock().expect("coordinator lock poisoned");
        let s = runs
            .get_mut(run_id)
            .ok_or_else(|| SessionError::UnknownRun(run_id.to_string()))?;
        f(s)
    }

    pub fn create_run(
        &self,
        cfg: EvalConfig,
        expected: BTreeSet<String>,
        deadline: Option<DateTime<Utc>>,
    ) -> Result<(), SessionError> {
        let mut runs = self.runs.lock().expect("coordinator lock poisoned");
        if runs.contains_key(&cfg.run_id) {
            return Err(SessionError::DuplicateRun(cfg.run_id));
        }
        runs.insert(cfg.run_id.clone(), CoordinatorSession::new(cfg, expected, deadline));
        Ok(())
    }

    pub fn run_ids(&self) -> Vec<String> {
        self.runs.lock().expect("coordinator lock poisoned").keys().cloned().collect()
    }

    /// Registers interest from a client and returns the run's configuration.
    pub fn hello(&self, run_id: &str, client_id: &str, now: DateTime<Utc>) -> Result<EvalConfig, SessionError> {
        self.with_run(run_id, |s| {
            s.tick(now)?;
            s.check_client(client_id)?;
            Ok(s.config().clone())
        })
    }

    pub fn submit(&self, summary: ClientSummary, now: DateTime<Utc>) -> Result<SubmitOutcome, SessionError> {
        let run_id = summary.run_id.clone();
        self.with_run(&run_id, |s| s.submit(summary, now))
    }

    pub fn close(&self, run_id: &str) -> Result<FederatedReport, SessionError> {
        self.with_run(run_id, |s| s.close().cloned())
    }

    pub fn report(&self, run_id: &str, now: DateTime<Utc>) -> Result<FederatedReport, SessionError> {
        self.with_run(run_id, |s| {
            s.tick(now)?;
            s.report().cloned().ok_or_else(|| SessionError::NotClosed(run_id.to_string()))
        })
    }

    /// Answers one protocol message.
    pub fn handle_message(&self, env: Envelope, now: DateTime<Utc>) -> Envelope {
        if env.protocol_version != super::PROTOCOL_VERSION {
            return Envelope::new(Message::Error {
                code: "UNSUPPORTED_VERSION".into(),
                message: format!("protocol version {} is not supported", env.protocol_version),
            });
        }
        let reply = match env.message {
            Message::Hello { run_id, client_id } => {
                let closed = self.with_run(&run_id, |s| Ok(s.is_closed()));
                match closed {
                    Ok(true) => Ok(Message::ReportReady { run_id }),
                    _ => self
                        .hello(&run_id, &client_id, now)
                        .map(|config| Message::ConfigPush { run_id, config }),
                }
            }
            Message::SummarySubmit { summary } => {
                let (run_id, client_id) = (summary.run_id.clone(), summary.client_id.clone());
                self.submit(summary, now).map(|o| Message::Ack {
                    run_id,
                    client_id,
                    replaced: o.replaced,
                    run_closed: o.closed,
                })
            }
            other => Ok(Message::Error {
                code: "UNEXPECTED_MESSAGE".into(),
                message: format!("coordinator does not accept {}", other.kind()),
            }),
        };
        Envelope::new(reply.unwrap_or_else(|e| Message::Error {
            code: e.code().into(),
            message: e.to_string(),
        }))
    }

    /// Length-prefixed frame in, frame out.
    pub fn handle_frame(&self, frame: &[u8], now: DateTime<Utc>) -> Vec<u8> {
        let reply = match super::wire::decode_frame(frame) {
            Ok((env, _)) => self.handle_message(env, now),
            Err(e) => Envelope::new(Message::Error {
                code: "BAD_FRAME".into(),
                message: e.to_string(),
            }),
        };
        super::wire::encode_frame(&reply)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::federated::PROTOCOL_VERSION;
    use chrono::{Duration, TimeZone};

    fn t0() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2026, 3, 1, 12, 0, 0).unwrap()
    }

    fn summary(id: &str, n: usize) -> ClientSummary {
        ClientSummary {
            protocol_version: PROTOCOL_VERSION,
            run_id: "local".into(),
            client_id: id.into(),
            schema_fingerprint: "fp".into(),
            row_count: n,
            metric_results: vec![],
            class_counts: [("a".to_string(), n)].into(),
            flags: vec![],
            produced_at: "2026-03-01T12:00:00.000Z".into(),
        }
    }

    fn expected(ids: &[&str]) -> BTreeSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn closes_when_all_report() {
        let mut s = CoordinatorSession::new(EvalConfig::default(), expected(&["a", "b"]), None);
        assert!(!s.submit(summary("a", 1), t0()).unwrap().closed);
        assert!(s.submit(summary("b", 1), t0()).unwrap().closed);
        assert_eq!(s.report().unwrap().per_client.len(), 2);
        assert_eq!(
            s.submit(summary("a", 1), t0()),
            Err(SessionError::LateSubmission("local".into()))
        );
    }

    #[test]
    fn deadline_closes_with_missing_notice() {
        let deadline = t0() + Duration::seconds(10);
        let mut s = CoordinatorSession::new(EvalConfig::default(), expected(&["a", "b", "c", "d"]), Some(deadline));
        for id in ["a", "b", "c"] {
            s.submit(summary(id, 3), t0()).unwrap();
        }
        assert!(!s.is_closed());
        let late = s.submit(summary("d", 3), deadline + Duration::seconds(1));
        assert_eq!(late, Err(SessionError::LateSubmission("local".into())));
        let r = s.report().unwrap();
        assert_eq!(r.per_client.len(), 3);
        assert_eq!(r.missing_clients, vec!["d".to_string()]);
        assert!(r.notices.iter().any(|n| n.starts_with("MISSING_CLIENT: d")));
    }

    #[test]
    fn resubmission_last_write_wins() {
        let mut s = CoordinatorSession::new(EvalConfig::default(), expected(&["a", "b"]), None);
        s.submit(summary("a", 1), t0()).unwrap();
        assert!(s.submit(summary("a", 7), t0()).unwrap().replaced);
        s.submit(summary("b", 1), t0()).unwrap();
        let r = s.report().unwrap();
        assert_eq!(r.per_client["a"].row_count, 7);
        assert!(r.notices[0].starts_with("RESUBMITTED"));
    }

    #[test]
    fn mismatched_schema_rejected_before_storing() {
        let mut s = CoordinatorSession::new(EvalConfig::default(), expected(&["a", "b"]), None);
        s.submit(summary("a", 1), t0()).unwrap();
        let mut other = summary("b", 1);
        other.schema_fingerprint = "different".into();
        assert!(matches!(s.submit(other, t0()), Err(SessionError::SchemaMismatch { .. })));
        assert_eq!(s.received().collect::<Vec<_>>(), vec!["a"]);
        assert!(s.submit(summary("b", 1), t0()).unwrap().closed);
    }

    #[test]
    fn unknown_client_rejected() {
        let mut s = CoordinatorSession::new(EvalConfig::default(), expected(&["a"]), None);
        assert_eq!(
            s.submit(summary("z", 1), t0()),
            Err(SessionError::UnknownClient("z".into()))
        );
    }

    #[test]
    fn registry_handles_frames() {
        let c = Coordinator::new();
        c.create_run(EvalConfig::default(), expected(&["a"]), None).unwrap();
        assert!(c.create_run(EvalConfig::default(), expected(&["a"]), None).is_err());
        let hello = Envelope::new(Message::Hello {
            run_id: "local".into(),
            client_id: "a".into(),
        });
        let reply = c.handle_frame(&super::super::wire::encode_frame(&hello), t0());
        let (env, _) = super::super::wire::decode_frame(&reply).unwrap();
        assert!(matches!(env.message, Message::ConfigPush { .. }));
        let reply = c.handle_message(Envelope::new(Message::SummarySubmit { summary: summary("a", 2) }), t0());
        assert!(matches!(reply.message, Message::Ack { run_closed: true, .. }));
        assert_eq!(c.report("local", t0()).unwrap().per_client.len(), 1);
        assert!(matches!(c.report("nope", t0()), Err(SessionError::UnknownRun(_))));
    }
}
