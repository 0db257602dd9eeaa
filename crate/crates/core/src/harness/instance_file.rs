use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::model::{validate_instance, Announcement, Instance, JobA, JobB, UserType, Users};

pub const FORMAT_VERSION: u32 = 1;

fn current_version() -> u32 {
    FORMAT_VERSION
}

fn yes() -> bool {
    true
}

/// On-disk instance: one JSON object per file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    #[serde(default = "current_version")]
    pub version: u32,
    pub alpha: f64,
    pub user_type: UserType,
    pub jobs: Vec<JobRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub announcements: Option<Vec<AnnouncementRecord>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobRecord {
    pub id: u32,
    pub w: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(rename = "U")]
    pub u: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnouncementRecord {
    pub id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default = "yes")]
    pub participate: bool,
}

/// A validated instance together with whatever the file declares users announce.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedInstance {
    pub instance: Instance,
    pub announcements: Vec<Announcement>,
}

fn schema(msg: impl Into<String>) -> HarnessError {
    HarnessError::Schema(msg.into())
}

impl InstanceFile {
    pub fn into_instance(self) -> Result<LoadedInstance, HarnessError> {
        if self.version != FORMAT_VERSION {
            return Err(schema(format!(
                "unsupported version {} (expected {FORMAT_VERSION})",
                self.version
            )));
        }
        let mut seen = BTreeSet::new();
        for j in &self.jobs {
            if !seen.insert(j.id) {
                return Err(schema(format!("id {} duplicated", j.id)));
            }
        }
        let n = self.jobs.len() as u32;
        if let Some(bad) = seen.iter().zip(1..).find(|(&id, k)| id != *k) {
            return Err(schema(format!(
                "job ids must be contiguous from 1 to {n}; found {}",
                bad.0
            )));
        }

        let users = match self.user_type {
            UserType::A => Users::A(
                self.jobs
                    .iter()
                    .enumerate()
                    .map(|(k, j)| {
                        if j.p.is_some() {
                            return Err(schema(format!(
                                "jobs[{k}].p: field not allowed on type A job {}",
                                j.id
                            )));
                        }
                        let d = j.d.ok_or_else(|| {
                            schema(format!(
                                "jobs[{k}].d: missing deadline on type A job {}",
                                j.id
                            ))
                        })?;
                        Ok(JobA {
                            id: j.id,
                            w: j.w,
                            d,
                            u: j.u,
                        })
                    })
                    .collect::<Result<_, _>>()?,
            ),
            UserType::B => Users::B(
                self.jobs
                    .iter()
                    .enumerate()
                    .map(|(k, j)| {
                        if j.d.is_some() {
                            return Err(schema(format!(
                                "jobs[{k}].d: field not allowed on type B job {}",
                                j.id
                            )));
                        }
                        let p = j.p.ok_or_else(|| {
                            schema(format!(
                                "jobs[{k}].p: missing penalty on type B job {}",
                                j.id
                            ))
                        })?;
                        Ok(JobB {
                            id: j.id,
                            w: j.w,
                            p,
                            u: j.u,
                        })
                    })
                    .collect::<Result<_, _>>()?,
            ),
        };
        let instance = validate_instance(self.alpha, users)?;

        let mut announcements = Vec::new();
        let mut declared = BTreeSet::new();
        for (k, a) in self
            .announcements
            .unwrap_or_default()
            .into_iter()
            .enumerate()
        {
            if !declared.insert(a.id) {
                return Err(schema(format!(
                    "announcements[{k}]: id {} duplicated",
                    a.id
                )));
            }
            instance.position(a.id)?;
            let ann = match (a.participate, a.value) {
                (false, _) => Announcement::opt_out(a.id),
                (true, Some(v)) => Announcement::new(a.id, v),
                (true, None) => {
                    return Err(schema(format!(
                        "announcements[{k}].value: missing for participating user {}",
                        a.id
                    )))
                }
            };
            ann.validate()?;
            announcements.push(ann);
        }
        Ok(LoadedInstance {
            instance,
            announcements,
        })
    }

    /// Serialisable form of an instance, jobs in canonical order.
    pub fn from_instance(instance: &Instance, announcements: &[Announcement]) -> Self {
        let jobs = match &instance.users {
            Users::A(jobs) => jobs
                .iter()
                .map(|j| JobRecord {
                    id: j.id,
                    w: j.w,
                    d: Some(j.d),
                    p: None,
                    u: j.u,
                })
                .collect(),
            Users::B(jobs) => jobs
                .iter()
                .map(|j| JobRecord {
                    id: j.id,
                    w: j.w,
                    d: None,
                    p: Some(j.p),
                    u: j.u,
                })
                .collect(),
        };
        let announcements = (!announcements.is_empty()).then(|| {
            announcements
                .iter()
                .map(|a| AnnouncementRecord {
                    id: a.id,
                    value: a.participate.then_some(a.value),
                    participate: a.participate,
                })
                .collect()
        });
        Self {
            version: FORMAT_VERSION,
            alpha: instance.alpha.value(),
            user_type: instance.user_type(),
            jobs,
            announcements,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("instance files always serialise");
        s.push('\n');
        s
    }
}

pub fn parse_instance_str(text: &str) -> Result<LoadedInstance, HarnessError> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|e| schema(e.to_string()))?;
    file.into_instance()
}

pub fn parse_instance(path: &Path) -> Result<LoadedInstance, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_instance_str(&text)
}

/// Inverse of `parse_instance_str`.
pub fn emit_instance(instance: &Instance, announcements: &[Announcement]) -> String {
    InstanceFile::from_instance(instance, announcements).to_json()
}
