//! In-process parameter transport between clients and the server.
//!
//! All parameter movement in a federated run goes through this layer and is
//! logged, which makes the privacy claim testable: the log shows that the
//! only payloads crossing the client/server boundary are named parameter
//! tensors, never training windows, and uploads happen only at
//! synchronization epochs.

use crate::genmodel::{ModelParams, Role};

/// Which way a message crossed the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Client → server.
    Upload,
    /// Server → client.
    Broadcast,
}

/// One logged parameter transfer.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageRecord {
    /// Global epoch when the message was sent (0 = initial distribution).
    pub epoch: usize,
    pub direction: Direction,
    pub client_id: usize,
    pub role: Role,
    /// Names of every tensor in the payload.
    pub tensor_names: Vec<String>,
    /// Total scalar count of the payload.
    pub scalar_count: usize,
}

/// Simulated lossless in-process transport; parameters cross by value.
#[derive(Debug, Default)]
pub struct InProcessTransport {
    log: Vec<MessageRecord>,
}

impl InProcessTransport {
    pub fn new() -> Self {
        Self::default()
    }

    fn record(&mut self, epoch: usize, direction: Direction, client_id: usize, params: &ModelParams) {
        self.log.push(MessageRecord {
            epoch,
            direction,
            client_id,
            role: params.role,
            tensor_names: params.names().map(str::to_string).collect(),
            scalar_count: params.iter().map(|(_, t)| t.len()).sum(),
        });
    }

    /// Client `client_id` sends its parameters to the server.
    pub fn send_params(&mut self, epoch: usize, client_id: usize, params: &ModelParams) -> ModelParams {
        self.record(epoch, Direction::Upload, client_id, params);
        params.clone()
    }

    /// The server sends its parameters to client `client_id`.
    pub fn recv_params(&mut self, epoch: usize, client_id: usize, params: &ModelParams) -> ModelParams {
        self.record(epoch, Direction::Broadcast, client_id, params);
        params.clone()
    }

    pub fn log(&self) -> &[MessageRecord] {
        &self.log
    }

    pub fn into_log(self) -> Vec<MessageRecord> {
        self.log
    }
}
