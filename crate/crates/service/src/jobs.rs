//! Analysis jobs and their handles.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use hpn_core::Id;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "camelCase")]
pub enum JobState {
    Pending,
    Running,
    Done {
        report: Id,
    },
    Failed {
        reason: String,
    },
}

impl JobState {
    fn rank(&self) -> u8 {
        match self {
            JobState::Pending => 0,
            JobState::Running => 1,
            JobState::Done { .. } | JobState::Failed { .. } => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct JobHandle {
    pub id: Id,
    #[serde(flatten)]
    pub state: JobState,
}

#[derive(Default)]
pub struct Jobs {
    next: AtomicU64,
    handles: Mutex<HashMap<Id, JobHandle>>,
}

impl Jobs {
    pub fn create(&self) -> Id {
        let id = Id::new(format!("job-{}", self.next.fetch_add(1, Ordering::Relaxed) + 1));
        let handle = JobHandle {
            id: id.clone(),
            state: JobState::Pending,
        };
        self.handles.lock().unwrap().insert(id.clone(), handle);
        id
    }

    pub fn get(&self, id: &str) -> Option<JobHandle> {
        self.handles.lock().unwrap().get(id).cloned()
    }

    /// Moves a job forward. Finished jobs never change again.
    pub fn advance(&self, id: &Id, state: JobState) {
        if let Some(handle) = self.handles.lock().unwrap().get_mut(id) {
            if state.rank() > handle.state.rank() {
                handle.state = state;
            }
        }
    }
}
