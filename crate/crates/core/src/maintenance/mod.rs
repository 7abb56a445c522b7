//! Preventive-maintenance policies, the jobs they expand into, reactive jobs,
//! and the job status workflow.
//!
//! Allowed status edges:
//!
//! ```text
//! open ──► ongoing ──► completed ──► verified
//!   ▲         │  ▲          │
//!   └─────────┘  └──────────┘
//!  (paused)        (rework)
//! ```

mod schedule;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::graph::{EventBody, GraphError, TwinStore};
use crate::omniclass::OmniclassCode;
use crate::time::Timestamp;

pub use schedule::occurrences;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyTarget {
    /// Every equipment item of this Omniclass type.
    EquipmentType(OmniclassCode),
    /// A room-cleaning policy for one room.
    Room(String),
}

impl fmt::Display for PolicyTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EquipmentType(code) => write!(f, "equipment type {code}"),
            Self::Room(tag) => write!(f, "room {tag:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resource {
    pub name: String,
    pub quantity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaintenancePolicy {
    #[serde(default)]
    pub policy_id: String,
    pub target: PolicyTarget,
    pub tasks: Vec<String>,
    pub frequency_days: u32,
    pub start_date: NaiveDate,
    #[serde(default)]
    pub resources: Vec<Resource>,
}

impl MaintenancePolicy {
    pub fn validate(&self) -> Result<(), MaintenanceError> {
        if self.frequency_days < 1 {
            return Err(MaintenanceError::BadFrequency(self.frequency_days));
        }
        Ok(())
    }

    pub fn role(&self) -> AssigneeRole {
        match self.target {
            PolicyTarget::EquipmentType(_) => AssigneeRole::Technician,
            PolicyTarget::Room(_) => AssigneeRole::Custodian,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum JobOrigin {
    Preventive { policy_id: String, occurrence_date: NaiveDate },
    Reactive,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobTarget {
    Equipment(String),
    Space(String),
}

impl JobTarget {
    /// Technicians handle equipment, custodians handle spaces.
    pub fn role(&self) -> AssigneeRole {
        match self {
            Self::Equipment(_) => AssigneeRole::Technician,
            Self::Space(_) => AssigneeRole::Custodian,
        }
    }

    pub fn id(&self) -> &str {
        match self {
            Self::Equipment(id) | Self::Space(id) => id,
        }
    }
}

impl fmt::Display for JobTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Equipment(id) => write!(f, "equipment {id:?}"),
            Self::Space(tag) => write!(f, "space {tag:?}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssigneeRole {
    Technician,
    Custodian,
}

impl FromStr for AssigneeRole {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "technician" => Ok(Self::Technician),
            "custodian" => Ok(Self::Custodian),
            _ => Err(format!("unknown role {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Open,
    Ongoing,
    Completed,
    Verified,
}

impl JobStatus {
    pub const ALL: [JobStatus; 4] = [Self::Open, Self::Ongoing, Self::Completed, Self::Verified];

    pub fn can_transition_to(self, to: JobStatus) -> bool {
        use JobStatus::*;
        matches!(
            (self, to),
            (Open, Ongoing) | (Ongoing, Completed) | (Completed, Verified) | (Ongoing, Open) | (Completed, Ongoing)
        )
    }

    pub const fn as_str(self) -> &'static str {
        match self {
            Self::Open => "open",
            Self::Ongoing => "ongoing",
            Self::Completed => "completed",
            Self::Verified => "verified",
        }
    }
}

impl fmt::Display for JobStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for JobStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|st| st.as_str() == s).ok_or_else(|| format!("unknown status {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comment {
    pub at: Timestamp,
    pub actor: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusChange {
    pub at: Timestamp,
    pub from: JobStatus,
    pub to: JobStatus,
    pub actor: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaintenanceJob {
    pub job_id: String,
    pub origin: JobOrigin,
    pub target: JobTarget,
    pub description: String,
    pub assignee_role: AssigneeRole,
    #[serde(default)]
    pub assignee: Option<String>,
    pub status: JobStatus,
    #[serde(default)]
    pub due_date: Option<NaiveDate>,
    #[serde(default)]
    pub resources: Vec<Resource>,
    #[serde(default)]
    pub comments: Vec<Comment>,
    pub created_at: Timestamp,
    #[serde(default)]
    pub history: Vec<StatusChange>,
}

impl MaintenanceJob {
    pub(crate) fn apply_transition(&mut self, at: Timestamp, from: JobStatus, to: JobStatus, actor: &str, comment: Option<&str>) {
        self.status = to;
        self.history.push(StatusChange {
            at,
            from,
            to,
            actor: actor.to_string(),
            comment: comment.map(str::to_string),
        });
    }

    pub(crate) fn push_comment(&mut self, at: Timestamp, actor: &str, text: &str) {
        self.comments.push(Comment { at, actor: actor.to_string(), text: text.to_string() });
    }

    /// Status as of instant `t` (changes strictly before `t` count).
    pub fn status_at(&self, t: Timestamp) -> JobStatus {
        self.history
            .iter()
            .take_while(|c| c.at < t)
            .last()
            .map_or(JobStatus::Open, |c| c.to)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MaintenanceError {
    #[error("frequency must be at least one day, got {0}")]
    BadFrequency(u32),
    #[error("target does not resolve: {0}")]
    UnresolvedTarget(String),
    #[error("horizon ends ({to}) before it starts ({from})")]
    InvertedHorizon { from: NaiveDate, to: NaiveDate },
    #[error("job description must not be empty")]
    EmptyDescription,
    #[error("comment text must not be empty")]
    EmptyComment,
    #[error("illegal transition {from} -> {to}")]
    IllegalTransition { from: JobStatus, to: JobStatus },
    #[error("unknown job {0:?}")]
    UnknownJob(String),
    #[error("unknown policy {0:?}")]
    UnknownPolicy(String),
    #[error("policy {0:?} already exists with different content")]
    PolicyConflict(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct JobFilter {
    pub status: Option<JobStatus>,
    pub role: Option<AssigneeRole>,
    pub target: Option<String>,
}

impl JobFilter {
    pub fn matches(&self, job: &MaintenanceJob) -> bool {
        self.status.is_none_or(|s| job.status == s)
            && self.role.is_none_or(|r| job.assignee_role == r)
            && self.target.as_deref().is_none_or(|t| job.target.id() == t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GenerationSummary {
    pub policies: usize,
    pub jobs_in_horizon: usize,
    pub created: usize,
}

fn next_job_id(store: &TwinStore) -> String {
    format!("JOB-{:05}", store.graph().jobs.len() + 1)
}

impl TwinStore {
    pub fn create_policy(&mut self, at: Timestamp, mut policy: MaintenancePolicy) -> Result<String, MaintenanceError> {
        policy.validate()?;
        if !self.graph().policy_target_resolves(&policy.target) {
            return Err(MaintenanceError::UnresolvedTarget(policy.target.to_string()));
        }
        if policy.policy_id.trim().is_empty() {
            let policies = &self.graph().policies;
            policy.policy_id = (policies.len() + 1..)
                .map(|n| format!("PM-{n:03}"))
                .find(|id| !policies.contains_key(id))
                .unwrap();
        }
        if let Some(existing) = self.graph().policies.get(&policy.policy_id) {
            return if *existing == policy {
                Ok(policy.policy_id)
            } else {
                Err(MaintenanceError::PolicyConflict(policy.policy_id))
            };
        }
        let id = policy.policy_id.clone();
        self.commit(at, EventBody::PolicyCreated(policy))?;
        Ok(id)
    }

    /// Expands one policy over `[from, to]`: one job per occurrence per target
    /// instance. Jobs already generated for the same (policy, occurrence,
    /// target) are reused. Returns every job of this policy in the horizon.
    pub fn generate_jobs(
        &mut self,
        at: Timestamp,
        policy_id: &str,
        from: NaiveDate,
        to: NaiveDate,
    ) -> Result<Vec<MaintenanceJob>, MaintenanceError> {
        if from > to {
            return Err(MaintenanceError::InvertedHorizon { from, to });
        }
        let policy = self
            .graph()
            .policies
            .get(policy_id)
            .cloned()
            .ok_or_else(|| MaintenanceError::UnknownPolicy(policy_id.to_string()))?;
        let targets: Vec<JobTarget> = match &policy.target {
            PolicyTarget::EquipmentType(code) => self
                .graph()
                .equipment
                .values()
                .filter(|e| &e.omniclass_type == code)
                .map(|e| JobTarget::Equipment(e.augment_id_instance.clone()))
                .collect(),
            PolicyTarget::Room(tag) => vec![JobTarget::Space(tag.clone())],
        };

        let existing: BTreeSet<(NaiveDate, JobTarget)> = self
            .graph()
            .jobs
            .values()
            .filter_map(|j| match &j.origin {
                JobOrigin::Preventive { policy_id: p, occurrence_date } if p == policy_id => {
                    Some((*occurrence_date, j.target.clone()))
                }
                _ => None,
            })
            .collect();

        for date in occurrences(policy.start_date, policy.frequency_days, from, to) {
            for target in &targets {
                if existing.contains(&(date, target.clone())) {
                    continue;
                }
                let job = MaintenanceJob {
                    job_id: next_job_id(self),
                    origin: JobOrigin::Preventive { policy_id: policy.policy_id.clone(), occurrence_date: date },
                    target: target.clone(),
                    description: policy.tasks.join("; "),
                    assignee_role: target.role(),
                    assignee: None,
                    status: JobStatus::Open,
                    due_date: Some(date),
                    resources: policy.resources.clone(),
                    comments: Vec::new(),
                    created_at: at,
                    history: Vec::new(),
                };
                self.commit(at, EventBody::JobCreated(job))?;
            }
        }

        let mut jobs: Vec<MaintenanceJob> = self
            .graph()
            .jobs
            .values()
            .filter(|j| {
                matches!(&j.origin, JobOrigin::Preventive { policy_id: p, occurrence_date }
                    if p == policy_id && *occurrence_date >= from && *occurrence_date <= to)
            })
            .cloned()
            .collect();
        jobs.sort_by(|a, b| (&a.origin, &a.target, &a.job_id).cmp(&(&b.origin, &b.target, &b.job_id)));
        Ok(jobs)
    }

    /// Runs [`TwinStore::generate_jobs`] for every policy.
    pub fn generate_all_jobs(&mut self, at: Timestamp, from: NaiveDate, to: NaiveDate) -> Result<GenerationSummary, MaintenanceError> {
        if from > to {
            return Err(MaintenanceError::InvertedHorizon { from, to });
        }
        let before = self.graph().jobs.len();
        let ids: Vec<String> = self.graph().policies.keys().cloned().collect();
        let mut in_horizon = 0;
        for id in &ids {
            in_horizon += self.generate_jobs(at, id, from, to)?.len();
        }
        Ok(GenerationSummary {
            policies: ids.len(),
            jobs_in_horizon: in_horizon,
            created: self.graph().jobs.len() - before,
        })
    }

    pub fn create_reactive_job(
        &mut self,
        at: Timestamp,
        target: JobTarget,
        description: &str,
        resources: Vec<Resource>,
        assignee: Option<String>,
    ) -> Result<MaintenanceJob, MaintenanceError> {
        if description.trim().is_empty() {
            return Err(MaintenanceError::EmptyDescription);
        }
        if !self.graph().job_target_resolves(&target) {
            return Err(MaintenanceError::UnresolvedTarget(target.to_string()));
        }
        let job = MaintenanceJob {
            job_id: next_job_id(self),
            origin: JobOrigin::Reactive,
            assignee_role: target.role(),
            target,
            description: description.trim().to_string(),
            assignee,
            status: JobStatus::Open,
            due_date: None,
            resources,
            comments: Vec::new(),
            created_at: at,
            history: Vec::new(),
        };
        self.commit(at, EventBody::JobCreated(job.clone()))?;
        Ok(job)
    }

    pub fn transition(
        &mut self,
        at: Timestamp,
        job_id: &str,
        to: JobStatus,
        actor: &str,
        comment: Option<&str>,
    ) -> Result<MaintenanceJob, MaintenanceError> {
        let from = self
            .graph()
            .jobs
            .get(job_id)
            .map(|j| j.status)
            .ok_or_else(|| MaintenanceError::UnknownJob(job_id.to_string()))?;
        if !from.can_transition_to(to) {
            return Err(MaintenanceError::IllegalTransition { from, to });
        }
        let comment = comment.map(str::trim).filter(|c| !c.is_empty()).map(str::to_string);
        self.commit(
            at,
            EventBody::JobTransitioned { job_id: job_id.to_string(), from, to, actor: actor.to_string(), comment },
        )?;
        Ok(self.graph().jobs[job_id].clone())
    }

    pub fn add_comment(&mut self, at: Timestamp, job_id: &str, actor: &str, text: &str) -> Result<MaintenanceJob, MaintenanceError> {
        if !self.graph().jobs.contains_key(job_id) {
            return Err(MaintenanceError::UnknownJob(job_id.to_string()));
        }
        if text.trim().is_empty() {
            return Err(MaintenanceError::EmptyComment);
        }
        self.commit(
            at,
            EventBody::CommentAdded { job_id: job_id.to_string(), actor: actor.to_string(), text: text.to_string() },
        )?;
        Ok(self.graph().jobs[job_id].clone())
    }

    pub fn jobs(&self, filter: &JobFilter) -> Vec<&MaintenanceJob> {
        self.graph().jobs.values().filter(|j| filter.matches(j)).collect()
    }
}
