//! Federated averaging with server-side learning-rate adaptation.
//!
//! Each client holds quadratic losses around its own optimum. A round
//! broadcasts the global model, runs local minibatch gradient descent on the
//! sampled clients in parallel, and averages the returned models weighted by
//! sample count. The adaptive variants also collect squared gradients and set
//! the next rate from the distance and gradient accumulators.

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{invalid, ArubaError, Result};
use crate::geometry::Geometry;
use crate::loss::LossOracle;
use crate::meta_scale::{DiagScaleState, IsotropicScaleState};
use crate::param::ParamVector;
use crate::rng::{Rng, SeedStream};

/// Server-side rate rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum Variant {
    /// Plain FedAvg with a fixed rate.
    Vanilla { eta: f64 },
    /// One scalar rate from scalar accumulators.
    Isotropic,
    /// One rate per coordinate.
    PerCoordinate,
}

/// The displacement fed to the distance accumulator b.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Displacement {
    /// ½(φ_r − φ_{r+1})², the movement of the global model.
    #[default]
    Server,
    /// Sample-weighted mean of ½(φ_r − θ̂_i)² over the returned client models.
    ClientMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederatedConfig {
    pub dim: usize,
    pub clients: usize,
    pub samples_per_client: usize,
    /// Distance of each client optimum from the shared center.
    pub dispersion: f64,
    /// Distance of each sample target from its client optimum.
    pub noise: f64,
    pub rounds: usize,
    pub clients_per_round: usize,
    pub local_steps: usize,
    pub batch_size: usize,
    pub eps: f64,
    pub zeta: f64,
    pub p: f64,
    pub variant: Variant,
    pub displacement: Displacement,
    pub train_fraction: f64,
    pub meta_train_fraction: f64,
    pub refine_steps: usize,
    pub seed: u64,
}

impl Default for FederatedConfig {
    fn default() -> Self {
        Self {
            dim: 10,
            clients: 100,
            samples_per_client: 50,
            dispersion: 0.5,
            noise: 0.5,
            rounds: 200,
            clients_per_round: 10,
            local_steps: 10,
            batch_size: 10,
            eps: 0.05,
            zeta: 0.05,
            p: 1.0,
            variant: Variant::PerCoordinate,
            displacement: Displacement::Server,
            train_fraction: 0.8,
            meta_train_fraction: 0.8,
            refine_steps: 10,
            seed: 0,
        }
    }
}

impl FederatedConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        let mut need = |ok: bool, msg: &str| {
            if !ok {
                errors.push(msg.to_string());
            }
        };
        need(self.dim >= 1, "dim must be at least 1");
        need(self.clients >= 2, "clients must be at least 2");
        need(self.samples_per_client >= 2, "samples_per_client must be at least 2");
        need(self.dispersion >= 0.0 && self.dispersion.is_finite(), "dispersion must be nonnegative");
        need(self.noise >= 0.0 && self.noise.is_finite(), "noise must be nonnegative");
        need(self.rounds >= 1, "rounds must be at least 1");
        need(self.clients_per_round >= 1, "clients_per_round must be at least 1");
        need(self.local_steps >= 1, "local_steps must be at least 1");
        need(self.batch_size >= 1, "batch_size must be at least 1");
        need(self.eps > 0.0 && self.eps.is_finite(), "eps must be positive");
        need(self.zeta > 0.0 && self.zeta.is_finite(), "zeta must be positive");
        need(self.p > 0.0 && self.p.is_finite(), "p must be positive");
        need(self.train_fraction > 0.0 && self.train_fraction < 1.0, "train_fraction must lie in (0, 1)");
        need(
            self.meta_train_fraction > 0.0 && self.meta_train_fraction < 1.0,
            "meta_train_fraction must lie in (0, 1)",
        );
        if let Variant::Vanilla { eta } = self.variant {
            need(eta > 0.0 && eta.is_finite(), "vanilla eta must be positive");
        }
        let train_clients = (self.clients as f64 * self.meta_train_fraction).round() as usize;
        need(
            train_clients >= 1 && train_clients < self.clients,
            "meta_train_fraction leaves no training or held-out clients",
        );
        need(self.clients_per_round <= train_clients.max(1), "clients_per_round exceeds the training clients");
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ArubaError::InvalidConfig(errors.join("; ")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Client {
    pub id: usize,
    pub optimum: ParamVector,
    pub train: Vec<LossOracle>,
    pub test: Vec<LossOracle>,
}

impl Client {
    /// Splits `losses` so that the first `⌈train_fraction·n⌉` are for training.
    pub fn new(id: usize, optimum: ParamVector, losses: Vec<LossOracle>, train_fraction: f64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction <= 1.0) {
            return Err(invalid("train fraction must lie in (0, 1]"));
        }
        let cut = ((losses.len() as f64) * train_fraction).ceil() as usize;
        let mut train = losses;
        let test = train.split_off(cut.min(train.len()));
        Ok(Self { id, optimum, train, test })
    }

    pub fn test_loss(&self, theta: &ParamVector) -> f64 {
        mean_loss(&self.test, theta)
    }

    pub fn train_loss(&self, theta: &ParamVector) -> f64 {
        mean_loss(&self.train, theta)
    }
}

fn mean_loss(losses: &[LossOracle], theta: &ParamVector) -> f64 {
    if losses.is_empty() {
        return 0.0;
    }
    losses.iter().map(|l| l.value(theta)).sum::<f64>() / losses.len() as f64
}

/// A step size broadcast to clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Rate {
    Scalar(f64),
    PerCoordinate(ParamVector),
}

impl Rate {
    fn check(&self, dim: usize) -> Result<()> {
        let ok = match self {
            Rate::Scalar(eta) => *eta > 0.0 && eta.is_finite(),
            Rate::PerCoordinate(eta) => eta.dim() == dim && eta.iter().all(|&x| x > 0.0 && x.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(invalid("learning rates must be positive and finite"))
        }
    }

    fn step(&self, theta: &ParamVector, grad: &ParamVector) -> ParamVector {
        match self {
            Rate::Scalar(eta) => theta.axpy(-eta, grad),
            Rate::PerCoordinate(eta) => theta.sub(&eta.hadamard(grad)),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Rate::Scalar(eta) => *eta,
            Rate::PerCoordinate(eta) => eta.mean(),
        }
    }
}

/// What a client sends back after local training.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientUpdate {
    pub client_id: usize,
    pub delta: ParamVector,
    /// Elementwise sum of squared minibatch gradients.
    pub grad_sq: ParamVector,
    pub count: usize,
}

impl ClientUpdate {
    pub fn grad_sq_total(&self) -> f64 {
        self.grad_sq.iter().sum()
    }
}

/// Local minibatch gradient descent from `phi`. Batches are drawn without
/// replacement; a batch at least as large as the data is the full batch.
pub fn client_update(
    client: &Client,
    phi: &ParamVector,
    rate: &Rate,
    local_steps: usize,
    batch_size: usize,
    domain: &Domain,
    rng: &mut Rng,
) -> Result<ClientUpdate> {
    if client.train.is_empty() {
        return Err(ArubaError::SkipClient(format!("client {} has no training data", client.id)));
    }
    rate.check(phi.dim())?;
    if batch_size == 0 {
        return Err(invalid("batch size must be at least 1"));
    }
    let n = client.train.len();
    let mut theta = phi.clone();
    let mut grad_sq = ParamVector::zeros(phi.dim());
    for _ in 0..local_steps {
        let mut grad = ParamVector::zeros(phi.dim());
        let batch = if batch_size >= n {
            for loss in &client.train {
                grad.add_assign(&loss.gradient(&theta));
            }
            n
        } else {
            for i in sample(rng, n, batch_size) {
                grad.add_assign(&client.train[i].gradient(&theta));
            }
            batch_size
        };
        let grad = grad.scale(1.0 / batch as f64);
        grad_sq.add_assign(&grad.squared());
        theta = domain.project(Geometry::Euclidean, &rate.step(&theta, &grad), None)?;
    }
    Ok(ClientUpdate { client_id: client.id, delta: theta.sub(phi), grad_sq, count: n })
}

#[derive(Debug, Clone, PartialEq)]
pub enum ServerScale {
    Fixed(f64),
    Isotropic(IsotropicScaleState),
    PerCoordinate(DiagScaleState),
}

impl ServerScale {
    pub fn rate(&self) -> Rate {
        match self {
            ServerScale::Fixed(eta) => Rate::Scalar(*eta),
            ServerScale::Isotropic(s) => Rate::Scalar(s.eta()),
            ServerScale::PerCoordinate(s) => Rate::PerCoordinate(s.eta()),
        }
    }
}

/// Scalars exchanged in one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundMessages {
    pub round: usize,
    pub clients: usize,
    pub downlink: usize,
    pub uplink: usize,
}

/// Scalars sent to and from one client per round as (downlink, uplink).
/// FedAvg sends the model down and the model plus a sample count up;
/// adaptive variants add the rate down and the gradient accumulator up.
pub fn payload_per_client(variant: &Variant, dim: usize) -> (usize, usize) {
    match variant {
        Variant::Vanilla { .. } => (dim, dim + 1),
        Variant::Isotropic => (dim + 1, dim + 2),
        Variant::PerCoordinate => (2 * dim, 2 * dim + 1),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServerState {
    pub phi: ParamVector,
    pub scale: ServerScale,
    pub variant: Variant,
    pub displacement: Displacement,
    /// Completed rounds.
    pub round: usize,
    pub ledger: Vec<RoundMessages>,
}

impl ServerState {
    pub fn new(phi: ParamVector, variant: Variant, eps: f64, zeta: f64, p: f64) -> Result<Self> {
        let scale = match variant {
            Variant::Vanilla { eta } => {
                if !(eta > 0.0 && eta.is_finite()) {
                    return Err(invalid("vanilla rate must be positive"));
                }
                ServerScale::Fixed(eta)
            }
            Variant::Isotropic => ServerScale::Isotropic(IsotropicScaleState::new(eps, zeta, p)?),
            Variant::PerCoordinate => ServerScale::PerCoordinate(DiagScaleState::new(phi.dim(), eps, zeta, p)?),
        };
        Ok(Self { phi, scale, variant, displacement: Displacement::Server, round: 0, ledger: Vec::new() })
    }

    pub fn rate(&self) -> Rate {
        self.scale.rate()
    }

    pub fn total_payload(&self) -> (usize, usize) {
        self.ledger.iter().fold((0, 0), |(d, u), m| (d + m.downlink, u + m.uplink))
    }
}

/// Aggregates client results in client-id order and updates the rate.
pub fn server_round(state: &mut ServerState, updates: &[ClientUpdate]) -> Result<()> {
    if updates.is_empty() {
        return Err(ArubaError::InvalidArgument("every sampled client was skipped".into()));
    }
    let mut ordered: Vec<&ClientUpdate> = updates.iter().collect();
    ordered.sort_by_key(|u| u.client_id);
    let dim = state.phi.dim();
    let total: usize = ordered.iter().map(|u| u.count).sum();
    if total == 0 {
        return Err(invalid("client sample counts sum to zero"));
    }
    let mut delta = ParamVector::zeros(dim);
    let mut grad_sq = ParamVector::zeros(dim);
    let mut client_sq = ParamVector::zeros(dim);
    for u in &ordered {
        u.delta.same_dim(&state.phi)?;
        let w = u.count as f64 / total as f64;
        delta.add_scaled_assign(w, &u.delta);
        grad_sq.add_scaled_assign(w, &u.grad_sq);
        client_sq.add_scaled_assign(w, &u.delta.squared());
    }
    let next = state.phi.add(&delta);
    // The accumulators take ½(φ − θ̂)², so θ̂ = φ + √(mean δ²) reproduces the
    // client-mean displacement coordinate by coordinate.
    let target = match state.displacement {
        Displacement::Server => next.clone(),
        Displacement::ClientMean => state.phi.add(&client_sq.map(f64::sqrt)),
    };
    match &mut state.scale {
        ServerScale::Fixed(_) => {}
        ServerScale::Isotropic(s) => s.accumulate(&state.phi, &target, grad_sq.iter().sum())?,
        ServerScale::PerCoordinate(s) => s.accumulate(&state.phi, &target, &grad_sq)?,
    }
    state.phi = next;
    state.round += 1;
    let (down, up) = payload_per_client(&state.variant, dim);
    state.ledger.push(RoundMessages {
        round: state.round,
        clients: ordered.len(),
        downlink: down * ordered.len(),
        uplink: up * ordered.len(),
    });
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Personalization {
    pub client_id: usize,
    pub pre: f64,
    pub post: f64,
}

/// Test loss of the global model before and after `refine_steps` full-batch
/// gradient steps on each client's training split, at the server's rate.
pub fn personalize_eval(state: &ServerState, clients: &[Client], refine_steps: usize, domain: &Domain) -> Result<Vec<Personalization>> {
    let rate = state.rate();
    rate.check(state.phi.dim())?;
    clients
        .iter()
        .map(|client| {
            let pre = client.test_loss(&state.phi);
            let mut theta = state.phi.clone();
            if !client.train.is_empty() {
                for _ in 0..refine_steps {
                    let mut grad = ParamVector::zeros(theta.dim());
                    for loss in &client.train {
                        grad.add_assign(&loss.gradient(&theta));
                    }
                    let grad = grad.scale(1.0 / client.train.len() as f64);
                    theta = domain.project(Geometry::Euclidean, &rate.step(&theta, &grad), None)?;
                }
            }
            Ok(Personalization { client_id: client.id, pre, post: client.test_loss(&theta) })
        })
        .collect()
}

/// Per-round metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub eta_mean: f64,
    /// Mean training loss of the new global model over the round's clients.
    pub train_loss: f64,
    pub downlink: usize,
    pub uplink: usize,
}

#[derive(Debug, Clone)]
pub struct FederatedRun {
    pub state: ServerState,
    pub rounds: Vec<RoundRecord>,
    pub personalization: Vec<Personalization>,
}

impl FederatedRun {
    pub fn mean_pre(&self) -> f64 {
        mean(self.personalization.iter().map(|p| p.pre))
    }

    pub fn mean_post(&self) -> f64 {
        mean(self.personalization.iter().map(|p| p.post))
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Synthetic non-iid population: clients split into training and held-out
/// groups.
#[derive(Debug, Clone)]
pub struct Population {
    pub center: ParamVector,
    pub train: Vec<Client>,
    pub held_out: Vec<Client>,
}

pub fn build_population(config: &FederatedConfig) -> Result<Population> {
    config.validate()?;
    let seeds = SeedStream::new(config.seed).named("federated");
    let center = ParamVector::zeros(config.dim);
    let mut clients = Vec::with_capacity(config.clients);
    for id in 0..config.clients {
        let client_seeds = seeds.named("clients").child(id as u64);
        let optimum =
            center.axpy(config.dispersion, &crate::domain::random_direction(&mut client_seeds.named("optimum").rng(), config.dim));
        let mut rng = client_seeds.named("samples").rng();
        let losses = (0..config.samples_per_client)
            .map(|_| {
                let z = crate::domain::random_direction(&mut rng, config.dim);
                LossOracle::quadratic(optimum.axpy(config.noise, &z), 1.0)
            })
            .collect::<Result<Vec<_>>>()?;
        clients.push(Client::new(id, optimum, losses, config.train_fraction)?);
    }
    let n_train = (config.clients as f64 * config.meta_train_fraction).round() as usize;
    let mut order: Vec<usize> = sample(&mut seeds.named("split").rng(), config.clients, config.clients).into_vec();
    let held_ids = order.split_off(n_train);
    let mut train = Vec::new();
    let mut held_out = Vec::new();
    for client in clients {
        if held_ids.contains(&client.id) {
            held_out.push(client);
        } else {
            train.push(client);
        }
    }
    Ok(Population { center, train, held_out })
}

/// Runs all rounds and evaluates personalization on the held-out clients.
pub fn run_federated(config: &FederatedConfig) -> Result<FederatedRun> {
    let population = build_population(config)?;
    run_on_population(config, &population)
}

pub fn run_on_population(config: &FederatedConfig, population: &Population) -> Result<FederatedRun> {
    config.validate()?;
    let domain = Domain::unconstrained(config.dim)?;
    let seeds = SeedStream::new(config.seed).named("rounds");
    let mut state = ServerState::new(population.center.clone(), config.variant, config.eps, config.zeta, config.p)?;
    state.displacement = config.displacement;
    let mut rounds = Vec::with_capacity(config.rounds);
    for r in 0..config.rounds {
        let round_seeds = seeds.child(r as u64);
        let picked = sample(&mut round_seeds.named("sample").rng(), population.train.len(), config.clients_per_round);
        let chosen: Vec<&Client> = picked.iter().map(|i| &population.train[i]).collect();
        let rate = state.rate();
        let phi = state.phi.clone();
        let results: Vec<Result<ClientUpdate>> = chosen
            .par_iter()
            .map(|client| {
                let mut rng = round_seeds.named("local").child(client.id as u64).rng();
                client_update(client, &phi, &rate, config.local_steps, config.batch_size, &domain, &mut rng)
            })
            .collect();
        let mut updates = Vec::with_capacity(results.len());
        for result in results {
            match result {
                Ok(u) => updates.push(u),
                Err(ArubaError::SkipClient(_)) => {}
                Err(e) => return Err(e),
            }
        }
        server_round(&mut state, &updates)?;
        let last = state.ledger.last().expect("round recorded");
        rounds.push(RoundRecord {
            round: state.round,
            eta_mean: state.rate().mean(),
            train_loss: mean(chosen.iter().map(|c| c.train_loss(&state.phi))),
            downlink: last.downlink,
            uplink: last.uplink,
        });
    }
    let personalization = personalize_eval(&state, &population.held_out, config.refine_steps, &domain)?;
    Ok(FederatedRun { state, rounds, personalization })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec()).unwrap()
    }

    fn client(id: usize, targets: &[&[f64]]) -> Client {
        let losses = targets.iter().map(|t| LossOracle::quadratic(pv(t), 1.0).unwrap()).collect();
        Client { id, optimum: pv(targets[0]), train: losses, test: vec![] }
    }

    fn rng() -> Rng {
        SeedStream::new(1).rng()
    }

    #[test]
    fn one_step_is_a_gradient_step() {
        let c = client(0, &[&[1.0, -2.0]]);
        let dom = Domain::unconstrained(2).unwrap();
        let u = client_update(&c, &pv(&[0.0, 0.0]), &Rate::Scalar(0.1), 1, 1, &dom, &mut rng()).unwrap();
        // ∇ = θ − a = (−1, 2)
        assert!(u.delta.distance(&pv(&[0.1, -0.2])) < 1e-15);
        assert_eq!(u.grad_sq, pv(&[1.0, 4.0]));
    }

    #[test]
    fn zero_gradients_give_zero_delta() {
        let c = client(0, &[&[0.5]]);
        let dom = Domain::unconstrained(1).unwrap();
        let u = client_update(&c, &pv(&[0.5]), &Rate::Scalar(0.3), 5, 1, &dom, &mut rng()).unwrap();
        assert_eq!(u.delta, pv(&[0.0]));
        assert_eq!(u.grad_sq, pv(&[0.0]));
    }

    #[test]
    fn many_steps_reach_client_optimum() {
        let c = client(0, &[&[1.0, 0.0], &[0.0, 1.0], &[2.0, 2.0]]);
        let dom = Domain::unconstrained(2).unwrap();
        let phi = pv(&[5.0, -5.0]);
        let eta = 0.5;
        let steps = 60;
        let u = client_update(&c, &phi, &Rate::Scalar(eta), steps, 10, &dom, &mut rng()).unwrap();
        // θ_k − ā = (1 − η)^k (φ − ā)
        let mean = pv(&[1.0, 1.0]);
        let expected = mean.axpy((1.0 - eta).powi(steps as i32), &phi.sub(&mean)).sub(&phi);
        assert!(u.delta.distance(&expected) < 1e-8);
    }

    #[test]
    fn empty_client_is_skipped() {
        let c = Client { id: 3, optimum: pv(&[0.0]), train: vec![], test: vec![] };
        let dom = Domain::unconstrained(1).unwrap();
        let err = client_update(&c, &pv(&[0.0]), &Rate::Scalar(0.1), 1, 1, &dom, &mut rng()).unwrap_err();
        assert!(matches!(err, ArubaError::SkipClient(_)));
    }

    #[test]
    fn symmetric_updates_cancel() {
        let mut state = ServerState::new(pv(&[1.0, 1.0]), Variant::PerCoordinate, 0.05, 0.05, 1.0).unwrap();
        assert_eq!(state.rate(), Rate::PerCoordinate(pv(&[1.0, 1.0])));
        let d = pv(&[0.3, -0.1]);
        let ups = vec![
            ClientUpdate { client_id: 1, delta: d.clone(), grad_sq: pv(&[1.0, 1.0]), count: 4 },
            ClientUpdate { client_id: 0, delta: d.scale(-1.0), grad_sq: pv(&[1.0, 1.0]), count: 4 },
        ];
        server_round(&mut state, &ups).unwrap();
        assert_eq!(state.phi, pv(&[1.0, 1.0]));
        assert!(server_round(&mut state, &[]).is_err());
    }

    #[test]
    fn payload_overheads() {
        for d in [1, 3, 10] {
            let (vd, vu) = payload_per_client(&Variant::Vanilla { eta: 1.0 }, d);
            let (id, iu) = payload_per_client(&Variant::Isotropic, d);
            let (pd, pu) = payload_per_client(&Variant::PerCoordinate, d);
            assert_eq!((id + iu) - (vd + vu), 2);
            assert_eq!((pd - vd, pu - vu), (d, d));
        }
    }

    #[test]
    fn zero_refinement_keeps_loss() {
        let state = ServerState::new(pv(&[0.0]), Variant::Isotropic, 0.05, 0.05, 1.0).unwrap();
        let mut c = client(0, &[&[1.0]]);
        c.test = c.train.clone();
        let out = personalize_eval(&state, &[c], 0, &Domain::unconstrained(1).unwrap()).unwrap();
        assert_eq!(out[0].pre, out[0].post);
    }
}
