//! Background image jobs and the worker pool that runs them.

use std::sync::mpsc::{channel, Sender};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Pending,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobFailure {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageJob {
    pub job_id: String,
    pub session_id: String,
    pub style: String,
    pub state: JobState,
    #[serde(default)]
    pub idempotency_key: Option<String>,
    #[serde(default)]
    pub image_ref: Option<String>,
    #[serde(default)]
    pub width: Option<u32>,
    #[serde(default)]
    pub height: Option<u32>,
    #[serde(default)]
    pub error: Option<JobFailure>,
    pub created_at: u64,
    #[serde(default)]
    pub finished_at: Option<u64>,
}

type Task = Box<dyn FnOnce() + Send + 'static>;

/// Fixed-size thread pool. With zero workers tasks run on the caller's
/// thread.
pub struct WorkerPool {
    sender: Option<Sender<Task>>,
    handles: Vec<JoinHandle<()>>,
}

impl WorkerPool {
    pub fn new(workers: usize) -> Self {
        if workers == 0 {
            return Self {
                sender: None,
                handles: Vec::new(),
            };
        }
        let (sender, receiver) = channel::<Task>();
        let receiver = Arc::new(Mutex::new(receiver));
        let handles = (0..workers)
            .map(|i| {
                let rx = Arc::clone(&receiver);
                std::thread::Builder::new()
                    .name(format!("image-worker-{i}"))
                    .spawn(move || loop {
                        let task = match rx.lock() {
                            Ok(guard) => guard.recv(),
                            Err(_) => return,
                        };
                        match task {
                            Ok(task) => task(),
                            Err(_) => return,
                        }
                    })
                    .expect("spawn worker thread")
            })
            .collect();
        Self {
            sender: Some(sender),
            handles,
        }
    }

    pub fn submit(&self, task: impl FnOnce() + Send + 'static) {
        match &self.sender {
            Some(tx) => {
                if let Err(e) = tx.send(Box::new(task)) {
                    (e.0)();
                }
            }
            None => task(),
        }
    }
}

impl WorkerPool {
    /// Stops accepting tasks and waits for queued ones to finish.
    pub fn shutdown(mut self) {
        self.sender.take();
        for h in self.handles.drain(..) {
            let _ = h.join();
        }
    }
}
