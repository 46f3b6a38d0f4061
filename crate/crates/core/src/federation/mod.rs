//! Federated adversarial training: local epochs with periodic server-side
//! parameter averaging.
//!
//! Each client trains a generator/discriminator pair on its own windows.
//! Every `sync_interval` epochs the selected clients upload parameters, the
//! server averages them elementwise and broadcasts the result to every
//! client. Raw data never leaves a client; only parameter tensors cross the
//! boundary, via [`InProcessTransport`], which logs every transfer.
//!
//! Runs are deterministic in the run seed: client selection, minibatch
//! order, and noise draws all derive from `(seed, epoch, client_id)`, so the
//! result is independent of client execution order and of whether clients
//! train serially or in parallel.

mod transport;

pub use transport::{Direction, InProcessTransport, MessageRecord};

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::ClientDataset;
use crate::genmodel::{
    init_params, local_train_epoch, AdamHyper, GenError, LossCoding, ModelParams, NetConfig,
    OptState, TrainLoss,
};
use crate::rng::{self, Stream};

/// Errors from federated orchestration.
#[derive(Debug, Error)]
pub enum FedError {
    /// Configuration violates an invariant.
    #[error("invalid federation config: {0}")]
    BadConfig(String),
    /// No clients were supplied.
    #[error("federated run needs at least one client")]
    NoClients,
    /// Aggregation was asked to average zero parameter sets.
    #[error("cannot aggregate an empty set of parameter sets")]
    EmptyAggregate,
    /// A training error on a specific client.
    #[error("client {client_id}: {source}")]
    Client {
        client_id: usize,
        source: GenError,
    },
    /// A model-level error outside any single client.
    #[error(transparent)]
    Gen(#[from] GenError),
}

/// Hyperparameters of a federated run.
///
/// `global_epochs` counts epochs every selected client performs; the server
/// aggregates every `sync_interval` epochs, so a run has
/// `global_epochs / sync_interval` synchronizations (integer division).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FederationConfig {
    /// Total number of global training epochs.
    pub global_epochs: usize,
    /// Epochs between consecutive server aggregations.
    pub sync_interval: usize,
    /// Fraction of clients selected each epoch, in (0, 1].
    pub client_fraction: f64,
    /// Minibatch size used by every client.
    pub batch_size: usize,
    /// Adam hyperparameters shared by all optimizers.
    pub adam: AdamHyper,
    /// Master seed; every random draw in the run derives from it.
    pub seed: u64,
    /// Train selected clients on a thread pool. Results are bit-identical
    /// to the serial path either way.
    pub parallel: bool,
}

impl Default for FederationConfig {
    fn default() -> Self {
        Self {
            global_epochs: 300,
            sync_interval: 100,
            client_fraction: 1.0,
            batch_size: 32,
            adam: AdamHyper::default(),
            seed: 0,
            parallel: true,
        }
    }
}

impl FederationConfig {
    /// Checks the configuration invariants.
    pub fn validate(&self) -> Result<(), FedError> {
        if self.sync_interval < 1 {
            return Err(FedError::BadConfig("sync_interval must be >= 1".into()));
        }
        if self.global_epochs < self.sync_interval {
            return Err(FedError::BadConfig(format!(
                "global_epochs ({}) must be >= sync_interval ({})",
                self.global_epochs, self.sync_interval
            )));
        }
        if !(self.client_fraction > 0.0 && self.client_fraction <= 1.0) {
            return Err(FedError::BadConfig(format!(
                "client_fraction must be in (0, 1], got {}",
                self.client_fraction
            )));
        }
        if self.batch_size < 1 {
            return Err(FedError::BadConfig("batch_size must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of synchronizations a full run performs.
    pub fn sync_count(&self) -> usize {
        self.global_epochs / self.sync_interval
    }
}

/// Mean losses of one client over one local epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// Global epoch, 1-based.
    pub epoch: usize,
    pub client_id: usize,
    /// Mean discriminator loss over the epoch's minibatches.
    pub d_loss: f64,
    /// Mean generator loss over the epoch's minibatches.
    pub g_loss: f64,
    /// True when a server aggregation happened at the end of this epoch.
    pub synced: bool,
}

/// One client's model and optimizer state.
#[derive(Debug, Clone)]
pub struct ClientState {
    pub params_g: ModelParams,
    pub params_d: ModelParams,
    pub opt_g: OptState,
    pub opt_d: OptState,
}

/// Full state of a federated run after completion.
#[derive(Debug, Clone)]
pub struct FederationState {
    /// Number of epochs completed.
    pub round: usize,
    /// Server generator parameters (as of the last synchronization).
    pub server_g: ModelParams,
    /// Server discriminator parameters (as of the last synchronization).
    pub server_d: ModelParams,
    /// Per-client models and optimizer states.
    pub clients: Vec<ClientState>,
    /// One record per (epoch, selected client).
    pub history: Vec<EpochRecord>,
}

/// Result of [`run_federated`]: final state plus the transport log.
#[derive(Debug)]
pub struct FederationRun {
    pub state: FederationState,
    /// Every parameter transfer that crossed the client/server boundary.
    pub transport_log: Vec<MessageRecord>,
}

impl FederationRun {
    /// Server-side (generator, discriminator) parameters.
    pub fn server(&self) -> (&ModelParams, &ModelParams) {
        (&self.state.server_g, &self.state.server_d)
    }
}

/// Selects `max(1, round(fraction * n))` distinct client ids uniformly
/// without replacement. The result is sorted.
pub fn select_clients(n_clients: usize, fraction: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    assert!(n_clients >= 1, "need at least one client");
    let want = ((fraction * n_clients as f64).round() as usize).clamp(1, n_clients);
    let mut picked = rand::seq::index::sample(rng, n_clients, want).into_vec();
    picked.sort_unstable();
    picked
}

/// Elementwise unweighted mean of parameter sets sharing one schema.
pub fn aggregate(param_sets: &[&ModelParams]) -> Result<ModelParams, FedError> {
    let first = *param_sets.first().ok_or(FedError::EmptyAggregate)?;
    let mut sum = first.clone();
    for other in &param_sets[1..] {
        sum.add_assign(other).map_err(FedError::Gen)?;
    }
    sum.scale(1.0 / param_sets.len() as f64);
    Ok(sum)
}

/// Absolute gap between a metric evaluated on a centrally trained model and
/// on a federated one.
pub fn delta_accuracy(v_central: f64, v_federated: f64) -> f64 {
    (v_central - v_federated).abs()
}

fn mean_losses(trace: &[crate::genmodel::BatchLoss]) -> (f64, f64) {
    let n = trace.len() as f64;
    let d = trace.iter().map(|b| b.d_loss).sum::<f64>() / n;
    let g = trace.iter().map(|b| b.g_loss).sum::<f64>() / n;
    (d, g)
}

fn train_client(
    client: &ClientDataset,
    epoch: usize,
    net: &NetConfig,
    fed: &FederationConfig,
    loss: &TrainLoss,
    state: &mut ClientState,
) -> Result<EpochRecord, FedError> {
    let client_id = client.client_id;
    let epoch_seed = rng::mix(fed.seed, Stream::Train, &[epoch as u64, client_id as u64]);
    let trace = local_train_epoch(
        client,
        net,
        &mut state.params_g,
        &mut state.params_d,
        &mut state.opt_g,
        &mut state.opt_d,
        loss,
        fed.batch_size,
        epoch_seed,
    )
    .map_err(|source| FedError::Client { client_id, source })?;
    let (d_loss, g_loss) = mean_losses(&trace);
    Ok(EpochRecord {
        epoch,
        client_id,
        d_loss,
        g_loss,
        synced: false,
    })
}

/// Runs federated adversarial training over `clients`.
///
/// Every epoch a subset of clients is drawn, each runs one local epoch, and
/// at multiples of `sync_interval` the server averages the selected clients'
/// parameters and broadcasts the mean to all clients. Optimizer moments stay
/// local and survive broadcasts. The returned server parameters are those of
/// the last synchronization.
pub fn run_federated(
    clients: &[ClientDataset],
    net: &NetConfig,
    fed: &FederationConfig,
) -> Result<FederationRun, FedError> {
    run_federated_with_loss(clients, net, fed, &TrainLoss::LeastSquares(LossCoding::default()))
}

/// [`run_federated`] with an explicit adversarial objective.
pub fn run_federated_with_loss(
    clients: &[ClientDataset],
    net: &NetConfig,
    fed: &FederationConfig,
    loss: &TrainLoss,
) -> Result<FederationRun, FedError> {
    run_federated_observed(clients, net, fed, loss, |_, _, _| {})
}

/// [`run_federated_with_loss`] with a synchronization observer.
///
/// After every aggregation the observer receives the epoch number and the
/// freshly averaged server (generator, discriminator) parameters, e.g. to
/// write checkpoints without holding every snapshot in memory.
pub fn run_federated_observed(
    clients: &[ClientDataset],
    net: &NetConfig,
    fed: &FederationConfig,
    loss: &TrainLoss,
    mut observer: impl FnMut(usize, &ModelParams, &ModelParams),
) -> Result<FederationRun, FedError> {
    fed.validate()?;
    if clients.is_empty() {
        return Err(FedError::NoClients);
    }
    let mut ids: Vec<usize> = clients.iter().map(|c| c.client_id).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() != clients.len() {
        return Err(FedError::BadConfig("client ids must be distinct".into()));
    }
    for client in clients {
        if client.train.len() < fed.batch_size {
            return Err(FedError::Client {
                client_id: client.client_id,
                source: GenError::TooFewTrainWindows {
                    client_id: client.client_id,
                    n: client.train.len(),
                    m: fed.batch_size,
                },
            });
        }
    }

    let mut transport = InProcessTransport::new();
    let (mut server_g, mut server_d) = init_params(net, fed.seed)?;

    // Initial distribution: every client starts from the server's weights.
    let mut states: Vec<ClientState> = clients
        .iter()
        .map(|client| {
            let params_g = transport.recv_params(0, client.client_id, &server_g);
            let params_d = transport.recv_params(0, client.client_id, &server_d);
            let opt_g = OptState::new(&params_g, fed.adam);
            let opt_d = OptState::new(&params_d, fed.adam);
            ClientState {
                params_g,
                params_d,
                opt_g,
                opt_d,
            }
        })
        .collect();

    let mut history = Vec::new();
    for epoch in 1..=fed.global_epochs {
        let mut sel_rng = rng::derive(fed.seed, Stream::Select, &[epoch as u64]);
        let selected = select_clients(clients.len(), fed.client_fraction, &mut sel_rng);

        // Pull the selected states out so the parallel path can hand each
        // worker exclusive mutable access. Order stays sorted by client id.
        let mut work: Vec<(usize, &mut ClientState)> = {
            let mut remaining: Vec<Option<&mut ClientState>> =
                states.iter_mut().map(Some).collect();
            selected
                .iter()
                .map(|&cid| (cid, remaining[cid].take().expect("distinct client ids")))
                .collect()
        };

        let mut records: Vec<EpochRecord> = if fed.parallel {
            work.par_iter_mut()
                .map(|(pos, state)| train_client(&clients[*pos], epoch, net, fed, loss, state))
                .collect::<Result<_, _>>()?
        } else {
            work.iter_mut()
                .map(|(pos, state)| train_client(&clients[*pos], epoch, net, fed, loss, state))
                .collect::<Result<_, _>>()?
        };

        if epoch % fed.sync_interval == 0 {
            // Selected clients upload; the server averages in client-id order
            // and broadcasts the mean to every client.
            let uploads_g: Vec<ModelParams> = selected
                .iter()
                .map(|&pos| transport.send_params(epoch, clients[pos].client_id, &states[pos].params_g))
                .collect();
            let uploads_d: Vec<ModelParams> = selected
                .iter()
                .map(|&pos| transport.send_params(epoch, clients[pos].client_id, &states[pos].params_d))
                .collect();
            server_g = aggregate(&uploads_g.iter().collect::<Vec<_>>())?;
            server_d = aggregate(&uploads_d.iter().collect::<Vec<_>>())?;
            for (pos, state) in states.iter_mut().enumerate() {
                state.params_g = transport.recv_params(epoch, clients[pos].client_id, &server_g);
                state.params_d = transport.recv_params(epoch, clients[pos].client_id, &server_d);
            }
            for rec in &mut records {
                rec.synced = true;
            }
            observer(epoch, &server_g, &server_d);
        }
        history.extend(records);
    }

    Ok(FederationRun {
        state: FederationState {
            round: fed.global_epochs,
            server_g,
            server_d,
            clients: states,
            history,
        },
        transport_log: transport.into_log(),
    })
}

/// Returns true when two parameter sets are bitwise identical.
pub fn params_bit_equal(a: &ModelParams, b: &ModelParams) -> bool {
    if !a.same_schema(b) {
        return false;
    }
    a.iter().zip(b.iter()).all(|((_, ta), (_, tb))| {
        ta.iter()
            .zip(tb.iter())
            .all(|(x, y)| x.to_bits() == y.to_bits())
    })
}
