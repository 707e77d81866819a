//! Blocking client for the service, implementing the simulation
//! [`Backend`] so a batch run can go over the wire.

use std::collections::BTreeSet;

use crowdtone_core::orchestrator::{PipelineStatus, StepReceipt, TaskDocument};
use crowdtone_core::provider::{Backend, BackendError, WorkerProfile};
use crowdtone_core::{
    AssignmentId, EmailSubmission, Millis, PipelineConfig, PipelineResult, StepPayload, TaskId, WorkerId,
};
use reqwest::blocking::{Client, RequestBuilder};
use reqwest::{Method, StatusCode};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use crate::server::{ClockBody, ExpireResponse, StepRequest, SubmitResponse};

/// One response body seen by the client, tagged with the shape it should
/// have.
#[derive(Debug, Clone, PartialEq)]
pub struct Exchange {
    pub method: String,
    pub path: String,
    pub status: u16,
    /// Name of the expected body shape, e.g. `task_document` or `error`.
    pub shape: &'static str,
    pub body: Value,
}

pub struct HttpBackend {
    client: Client,
    base: String,
    token: Option<String>,
    drive_clock: bool,
    clock: Option<Millis>,
    registered: BTreeSet<WorkerId>,
    record: bool,
    exchanges: Vec<Exchange>,
    retry_steps: bool,
}

fn transport(e: reqwest::Error) -> BackendError {
    BackendError {
        code: "transport_error".into(),
        message: e.to_string(),
    }
}

impl HttpBackend {
    pub fn new(base_url: &str) -> Self {
        Self {
            client: Client::new(),
            base: base_url.trim_end_matches('/').to_string(),
            token: None,
            drive_clock: false,
            clock: None,
            registered: BTreeSet::new(),
            record: false,
            exchanges: Vec::new(),
            retry_steps: false,
        }
    }

    pub fn with_token(mut self, token: Option<String>) -> Self {
        self.token = token;
        self
    }

    /// Moves the server's manual clock to each command's `now` before
    /// sending it, so deadlines behave as in-process.
    pub fn driving_clock(mut self) -> Self {
        self.drive_clock = true;
        self
    }

    /// Keeps every response body for later inspection.
    pub fn recording(mut self) -> Self {
        self.record = true;
        self
    }

    /// Sends every step twice and checks the second answer matches the
    /// first.
    pub fn retrying_steps(mut self) -> Self {
        self.retry_steps = true;
        self
    }

    pub fn exchanges(&self) -> &[Exchange] {
        &self.exchanges
    }

    fn request(&self, method: Method, path: &str) -> RequestBuilder {
        let req = self.client.request(method, format!("{}{path}", self.base));
        match &self.token {
            Some(t) => req.bearer_auth(t),
            None => req,
        }
    }

    /// Sends the request; `Ok(None)` for 204, the decoded body for other
    /// 2xx, and the service's error otherwise.
    fn send<T: DeserializeOwned>(
        &mut self,
        method: Method,
        path: &str,
        body: Option<Value>,
        shape: &'static str,
    ) -> Result<Option<T>, BackendError> {
        let mut req = self.request(method.clone(), path);
        if let Some(b) = &body {
            req = req.json(b);
        }
        let resp = req.send().map_err(transport)?;
        let status = resp.status();
        if status == StatusCode::NO_CONTENT {
            return Ok(None);
        }
        let value: Value = resp.json().map_err(transport)?;
        let shape = if status.is_success() { shape } else { "error" };
        if self.record {
            self.exchanges.push(Exchange {
                method: method.to_string(),
                path: path.to_string(),
                status: status.as_u16(),
                shape,
                body: value.clone(),
            });
        }
        if !status.is_success() {
            let code = value["code"].as_str().unwrap_or("http_error").to_string();
            let message = value["message"].as_str().unwrap_or(status.as_str()).to_string();
            return Err(BackendError { code, message });
        }
        serde_json::from_value(value).map(Some).map_err(|e| BackendError {
            code: "unexpected_body".into(),
            message: format!("{path}: {e}"),
        })
    }

    fn send_required<T: DeserializeOwned>(
        &mut self,
        method: Method,
        path: &str,
        body: Option<Value>,
        shape: &'static str,
    ) -> Result<T, BackendError> {
        self.send(method, path, body, shape)?.ok_or_else(|| BackendError {
            code: "unexpected_body".into(),
            message: format!("{path}: empty response"),
        })
    }

    fn tick(&mut self, now: Millis) -> Result<(), BackendError> {
        if self.drive_clock && self.clock != Some(now) {
            let _: ClockBody = self.send_required(Method::PUT, "/v1/admin/clock", Some(json!({ "now": now })), "clock")?;
            self.clock = Some(now);
        }
        Ok(())
    }

    pub fn register(&mut self, worker: &WorkerProfile) -> Result<(), BackendError> {
        let path = format!("/v1/workers/{}", worker.worker_id);
        let body = serde_json::to_value(worker).expect("profile serializes");
        let _: WorkerProfile = self.send_required(Method::PUT, &path, Some(body), "worker_profile")?;
        self.registered.insert(worker.worker_id.clone());
        Ok(())
    }

    pub fn task_document(&mut self, assignment: &AssignmentId) -> Result<TaskDocument, BackendError> {
        self.send_required(Method::GET, &format!("/v1/tasks/{assignment}"), None, "task_document")
    }

    pub fn taxonomy(&mut self) -> Result<Value, BackendError> {
        self.send_required(Method::GET, "/v1/taxonomy", None, "taxonomy")
    }
}

impl Backend for HttpBackend {
    fn submit(&mut self, email: &EmailSubmission, config: &PipelineConfig, now: Millis) -> Result<TaskId, BackendError> {
        self.tick(now)?;
        let mut body = serde_json::to_value(email).expect("email serializes");
        body["config"] = serde_json::to_value(config).expect("config serializes");
        let r: SubmitResponse = self.send_required(Method::POST, "/v1/emails", Some(body), "submit_response")?;
        Ok(r.task_id)
    }

    fn next_task(&mut self, worker: &WorkerProfile, now: Millis) -> Result<Option<TaskDocument>, BackendError> {
        self.tick(now)?;
        if !self.registered.contains(&worker.worker_id) {
            self.register(worker)?;
        }
        let path = format!("/v1/workers/{}/tasks/next", worker.worker_id);
        self.send(Method::GET, &path, None, "task_document")
    }

    fn submit_step(
        &mut self,
        assignment: &AssignmentId,
        worker: &WorkerId,
        payload: &StepPayload,
        now: Millis,
    ) -> Result<StepReceipt, BackendError> {
        self.tick(now)?;
        let path = format!("/v1/tasks/{assignment}/steps");
        let body = serde_json::to_value(StepRequest {
            worker_id: worker.clone(),
            payload: payload.clone(),
        })
        .expect("step serializes");
        let receipt: StepReceipt = self.send_required(Method::POST, &path, Some(body.clone()), "step_receipt")?;
        if self.retry_steps {
            let again: StepReceipt = self.send_required(Method::POST, &path, Some(body), "step_receipt")?;
            if again.ack != receipt.ack {
                return Err(BackendError {
                    code: "retry_mismatch".into(),
                    message: format!("{path}: retry returned a different ack"),
                });
            }
        }
        Ok(receipt)
    }

    fn expire_overdue(&mut self, now: Millis) -> Result<Vec<AssignmentId>, BackendError> {
        self.tick(now)?;
        let r: ExpireResponse = self.send_required(Method::POST, "/v1/admin/expire", None, "expire_response")?;
        Ok(r.expired)
    }

    fn fail(&mut self, task: &TaskId, reason: &str, now: Millis) -> Result<PipelineStatus, BackendError> {
        self.tick(now)?;
        let path = format!("/v1/admin/emails/{task}/fail");
        self.send_required(Method::POST, &path, Some(json!({ "reason": reason })), "status")
    }

    fn status(&mut self, task: &TaskId) -> Result<PipelineStatus, BackendError> {
        self.send_required(Method::GET, &format!("/v1/emails/{task}"), None, "status")
    }

    fn result(&mut self, task: &TaskId) -> Result<Option<PipelineResult>, BackendError> {
        match self.send(Method::GET, &format!("/v1/emails/{task}/result"), None, "pipeline_result") {
            Err(e) if e.code == "result_pending" => Ok(None),
            other => other,
        }
    }
}
