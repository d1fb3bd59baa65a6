//! Intrinsic curiosity module.
//!
//! Three networks trained jointly: an encoder mapping states to a feature
//! space, a forward model predicting the next feature vector from the current
//! features and the action, and an inverse model predicting the action from
//! the two feature vectors (which anchors the encoder against representation
//! collapse). The forward-prediction error in feature space is the curiosity
//! signal: high where the module has not yet learned the dynamics, shrinking
//! as it trains — a consumable exploration resource.
//!
//! Losses use the plain (unsquared) Euclidean norm. At an exact prediction
//! the norm is not differentiable; its gradient is taken as zero there.

use std::path::Path;

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nn::{load_weights, save_weights, Activation, Network, OptimizerState};
use crate::replay::{ReplayBuffer, Transition};

/// Feature dimension of the encoder output.
pub const FEATURE_DIM: usize = 32;
/// Hidden width of all three networks.
pub const HIDDEN_DIM: usize = 64;

/// Rows per work chunk in batched training. Fixed (not thread-dependent) so
/// gradient reduction order, and therefore training, is deterministic.
const CHUNK_ROWS: usize = 256;

#[derive(Debug, Clone)]
pub struct Icm {
    encoder: Network,
    forward_model: Network,
    inverse_model: Network,
    beta: f64,
    eta: f64,
    pub optimizer: OptimizerState,
}

impl Icm {
    pub fn new(
        encoder: Network,
        forward_model: Network,
        inverse_model: Network,
        beta: f64,
        eta: f64,
        optimizer: OptimizerState,
    ) -> Result<Self> {
        let feat = encoder.output_dim();
        let action = inverse_model.output_dim();
        if forward_model.output_dim() != feat {
            return Err(Error::Dimension {
                context: "forward model output",
                expected: feat,
                actual: forward_model.output_dim(),
            });
        }
        if forward_model.input_dim() != feat + action {
            return Err(Error::Dimension {
                context: "forward model input",
                expected: feat + action,
                actual: forward_model.input_dim(),
            });
        }
        if inverse_model.input_dim() != 2 * feat {
            return Err(Error::Dimension {
                context: "inverse model input",
                expected: 2 * feat,
                actual: inverse_model.input_dim(),
            });
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::InvalidParameter(format!(
                "beta must be in [0, 1], got {beta}"
            )));
        }
        if eta <= 0.0 || !eta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "eta must be positive, got {eta}"
            )));
        }
        Ok(Self {
            encoder,
            forward_model,
            inverse_model,
            beta,
            eta,
            optimizer,
        })
    }

    /// Standard architecture: two tanh hidden layers of width 64 per network,
    /// linear outputs, feature dimension 32, Adam on the joint parameters.
    pub fn for_dims(
        state_dim: usize,
        action_dim: usize,
        beta: f64,
        eta: f64,
        learning_rate: f64,
        seed: u64,
    ) -> Result<Self> {
        let encoder = Network::uniform_init(
            Network::mlp(
                &[state_dim, HIDDEN_DIM, HIDDEN_DIM, FEATURE_DIM],
                Activation::Tanh,
                Activation::Linear,
            )?,
            seed,
        )?;
        let forward_model = Network::uniform_init(
            Network::mlp(
                &[FEATURE_DIM + action_dim, HIDDEN_DIM, HIDDEN_DIM, FEATURE_DIM],
                Activation::Tanh,
                Activation::Linear,
            )?,
            seed.wrapping_add(1),
        )?;
        let inverse_model = Network::uniform_init(
            Network::mlp(
                &[2 * FEATURE_DIM, HIDDEN_DIM, HIDDEN_DIM, action_dim],
                Activation::Tanh,
                Activation::Linear,
            )?,
            seed.wrapping_add(2),
        )?;
        Self::new(
            encoder,
            forward_model,
            inverse_model,
            beta,
            eta,
            OptimizerState::adam(learning_rate),
        )
    }

    pub fn encoder(&self) -> &Network {
        &self.encoder
    }

    pub fn forward_model(&self) -> &Network {
        &self.forward_model
    }

    pub fn inverse_model(&self) -> &Network {
        &self.inverse_model
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn set_beta(&mut self, beta: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::InvalidParameter(format!(
                "beta must be in [0, 1], got {beta}"
            )));
        }
        self.beta = beta;
        Ok(())
    }

    pub fn feature_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn state_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.inverse_model.output_dim()
    }

    pub fn num_params(&self) -> usize {
        self.encoder.num_params() + self.forward_model.num_params() + self.inverse_model.num_params()
    }

    /// Feature embedding of one state.
    pub fn encode(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.encoder.forward(state)
    }

    /// `|| F(phi(s), a) - phi(s') ||_2` for one transition.
    pub fn forward_loss(&self, t: &Transition) -> Result<f64> {
        let feat = self.encode(&t.state)?;
        let feat_next = self.encode(&t.next_state)?;
        let mut input = feat;
        input.extend_from_slice(&t.action);
        let pred = self.forward_model.forward(&input)?;
        Ok(l2_distance(&pred, &feat_next))
    }

    /// `|| I(phi(s), phi(s')) - a ||_2` for one transition.
    pub fn inverse_loss(&self, t: &Transition) -> Result<f64> {
        if t.action.len() != self.action_dim() {
            return Err(Error::Dimension {
                context: "inverse loss action",
                expected: self.action_dim(),
                actual: t.action.len(),
            });
        }
        let mut input = self.encode(&t.state)?;
        input.extend(self.encode(&t.next_state)?);
        let pred = self.inverse_model.forward(&input)?;
        Ok(l2_distance(&pred, &t.action))
    }

    /// Mean combined loss over a batch: `(1-beta) L_I + beta L_F`.
    pub fn icm_loss(&self, batch: &[&Transition]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let mut total = 0.0;
        for t in batch {
            total += (1.0 - self.beta) * self.inverse_loss(t)? + self.beta * self.forward_loss(t)?;
        }
        Ok(total / batch.len() as f64)
    }

    /// Exploration bonus for one transition: `(eta / 2) * forward_loss`.
    /// Never uses the inverse loss.
    pub fn curiosity_bonus(&self, t: &Transition) -> Result<f64> {
        Ok(self.eta / 2.0 * self.forward_loss(t)?)
    }

    /// Batched forward-prediction errors, one per row. Row `i` of each matrix
    /// is transition `i`'s state, action, and next state.
    pub fn forward_errors(
        &self,
        states: ArrayView2<'_, f64>,
        actions: ArrayView2<'_, f64>,
        next_states: ArrayView2<'_, f64>,
    ) -> Result<Vec<f64>> {
        let n = states.nrows();
        if actions.nrows() != n || next_states.nrows() != n {
            return Err(Error::Dimension {
                context: "forward_errors rows",
                expected: n,
                actual: actions.nrows().min(next_states.nrows()),
            });
        }
        if states.ncols() != self.state_dim() || next_states.ncols() != self.state_dim() {
            return Err(Error::Dimension {
                context: "forward_errors state width",
                expected: self.state_dim(),
                actual: states.ncols(),
            });
        }
        if actions.ncols() != self.action_dim() {
            return Err(Error::Dimension {
                context: "forward_errors action width",
                expected: self.action_dim(),
                actual: actions.ncols(),
            });
        }
        let feat = self.encoder.forward_batch(states);
        let feat_next = self.encoder.forward_batch(next_states);
        let fwd_in = concatenate![Axis(1), feat, actions.to_owned()];
        let pred = self.forward_model.forward_batch(fwd_in.view());
        let diff = &pred - &feat_next;
        Ok(diff
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect())
    }

    /// All parameters concatenated: encoder, forward model, inverse model.
    pub fn joint_params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        v.extend_from_slice(self.encoder.weights());
        v.extend_from_slice(self.forward_model.weights());
        v.extend_from_slice(self.inverse_model.weights());
        v
    }

    pub fn set_joint_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::Dimension {
                context: "set_joint_params",
                expected: self.num_params(),
                actual: params.len(),
            });
        }
        let ne = self.encoder.num_params();
        let nf = self.forward_model.num_params();
        self.encoder.set_weights(&params[..ne])?;
        self.forward_model.set_weights(&params[ne..ne + nf])?;
        self.inverse_model.set_weights(&params[ne + nf..])?;
        Ok(())
    }

    /// Mean combined loss and its exact gradient with respect to the joint
    /// parameter vector, over a batch.
    pub fn batch_loss_and_grad(&self, batch: &[&Transition]) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        // Fixed-size chunks, processed in parallel, combined in index order.
        let chunks: Vec<&[&Transition]> = batch.chunks(CHUNK_ROWS).collect();
        let partials: Vec<Result<(f64, Vec<f64>, Vec<f64>, Vec<f64>)>> = chunks
            .par_iter()
            .map(|chunk| self.chunk_loss_and_grads(chunk))
            .collect();

        let n = batch.len() as f64;
        let mut loss_sum = 0.0;
        let mut grad = vec![0.0; self.num_params()];
        let ne = self.encoder.num_params();
        let nf = self.forward_model.num_params();
        for partial in partials {
            let (l, ge, gf, gi) = partial?;
            loss_sum += l;
            add_assign(&mut grad[..ne], &ge);
            add_assign(&mut grad[ne..ne + nf], &gf);
            add_assign(&mut grad[ne + nf..], &gi);
        }
        for g in &mut grad {
            *g /= n;
        }
        Ok((loss_sum / n, grad))
    }

    /// Loss sum and per-network gradient sums over one chunk of transitions.
    ///
    /// States and next-states are stacked into one matrix so the encoder runs
    /// a single forward and a single backward pass per chunk; layer caches
    /// from the forwards are reused by the backwards.
    fn chunk_loss_and_grads(
        &self,
        chunk: &[&Transition],
    ) -> Result<(f64, Vec<f64>, Vec<f64>, Vec<f64>)> {
        let (s, a, sp) = transition_matrices(chunk, self.state_dim(), self.action_dim())?;
        let c = chunk.len();
        let feat_dim = self.feature_dim();

        // Rows 0..c are s, rows c..2c are s'.
        let stacked = concatenate![Axis(0), s, sp];
        let enc_caches = self.encoder.forward_batch_cached(&stacked.view());
        let features = enc_caches.last().expect("encoder layers");
        let e = features.slice(ndarray::s![..c, ..]);
        let ep = features.slice(ndarray::s![c.., ..]);

        let fwd_in = concatenate![Axis(1), e.to_owned(), a];
        let fwd_caches = self.forward_model.forward_batch_cached(&fwd_in.view());
        let fwd_pred = fwd_caches.last().expect("forward layers");
        let inv_in = concatenate![Axis(1), e.to_owned(), ep.to_owned()];
        let inv_caches = self.inverse_model.forward_batch_cached(&inv_in.view());
        let inv_pred = inv_caches.last().expect("inverse layers");

        let diff_f = fwd_pred - &ep;
        let diff_i = inv_pred - &a;

        let mut loss_sum = 0.0;
        let mut up_f = Array2::zeros((c, feat_dim));
        let mut up_i = Array2::zeros((c, self.action_dim()));
        for r in 0..c {
            let nf = diff_f.row(r).iter().map(|x| x * x).sum::<f64>().sqrt();
            let ni = diff_i.row(r).iter().map(|x| x * x).sum::<f64>().sqrt();
            loss_sum += (1.0 - self.beta) * ni + self.beta * nf;
            if nf > 0.0 {
                let scale = self.beta / nf;
                up_f.row_mut(r).assign(&(&diff_f.row(r) * scale));
            }
            if ni > 0.0 {
                let scale = (1.0 - self.beta) / ni;
                up_i.row_mut(r).assign(&(&diff_i.row(r) * scale));
            }
        }

        let (gf, g_fwd_in) =
            self.forward_model
                .backward_batch_from_caches(fwd_in.view(), &fwd_caches, up_f.view());
        let (gi, g_inv_in) =
            self.inverse_model
                .backward_batch_from_caches(inv_in.view(), &inv_caches, up_i.view());

        // phi(s) feeds the forward and inverse inputs; phi(s') is the forward
        // target (upstream -up_f) and the inverse input tail.
        let g_e = &g_fwd_in.slice(ndarray::s![.., ..feat_dim])
            + &g_inv_in.slice(ndarray::s![.., ..feat_dim]);
        let g_ep = &g_inv_in.slice(ndarray::s![.., feat_dim..]) - &up_f;
        let g_stacked = concatenate![Axis(0), g_e, g_ep];

        let (ge, _) =
            self.encoder
                .backward_batch_from_caches(stacked.view(), &enc_caches, g_stacked.view());

        Ok((loss_sum, ge, gf, gi))
    }

    /// Trains all three networks jointly for `epochs` full passes over the
    /// buffer. Each epoch shuffles the buffer and applies one optimizer step
    /// per minibatch. Returns the per-epoch mean loss. An empty buffer is a
    /// warned no-op.
    pub fn train<R: Rng>(
        &mut self,
        buffer: &ReplayBuffer,
        epochs: usize,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        if buffer.is_empty() {
            log::warn!("train_icm called with an empty replay buffer; skipping");
            return Ok(Vec::new());
        }
        if epochs == 0 {
            return Err(Error::InvalidParameter("icm training needs epochs >= 1".into()));
        }
        if batch_size == 0 {
            return Err(Error::InvalidParameter("icm batch size must be >= 1".into()));
        }

        let n = buffer.len();
        let mut order: Vec<usize> = (0..n).collect();
        let mut history = Vec::with_capacity(epochs);
        let mut joint = self.joint_params();

        for _ in 0..epochs {
            // Fisher-Yates shuffle.
            for i in (1..n).rev() {
                let j = rng.gen_range(0..=i);
                order.swap(i, j);
            }
            let mut epoch_loss = 0.0;
            for batch_idx in order.chunks(batch_size) {
                let batch: Vec<&Transition> = batch_idx.iter().map(|&i| buffer.get(i)).collect();
                let t0 = std::time::Instant::now();
                let (loss, grad) = self.batch_loss_and_grad(&batch)?;
                let t1 = std::time::Instant::now();
                epoch_loss += loss * batch.len() as f64;
                self.optimizer.step_flat(&mut joint, &grad)?;
                self.set_joint_params(&joint)?;
                unsafe {
                    GRAD_NS += t1.duration_since(t0).as_nanos();
                    STEP_NS += t1.elapsed().as_nanos();
                }
            }
            history.push(epoch_loss / n as f64);
        }
        Ok(history)
    }

    /// Writes the three weight files plus a JSON manifest into `dir`.
    pub fn save_checkpoint(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        save_weights(&dir.join("encoder.weights.bin"), &self.encoder, None)?;
        save_weights(&dir.join("forward_model.weights.bin"), &self.forward_model, None)?;
        save_weights(&dir.join("inverse_model.weights.bin"), &self.inverse_model, None)?;
        let manifest = IcmManifest {
            beta: self.beta,
            eta: self.eta,
            optimizer: self.optimizer.clone(),
        };
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }

    pub fn load_checkpoint(dir: &Path) -> Result<Self> {
        let (encoder, _) = load_weights(&dir.join("encoder.weights.bin"))?;
        let (forward_model, _) = load_weights(&dir.join("forward_model.weights.bin"))?;
        let (inverse_model, _) = load_weights(&dir.join("inverse_model.weights.bin"))?;
        let manifest: IcmManifest =
            serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
        Self::new(
            encoder,
            forward_model,
            inverse_model,
            manifest.beta,
            manifest.eta,
            manifest.optimizer,
        )
    }
}

#[derive(serde::Serialize, serde::Deserialize)]
struct IcmManifest {
    beta: f64,
    eta: f64,
    optimizer: OptimizerState,
}

fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn add_assign(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Stacks transitions into (states, actions, next_states) row matrices.
pub fn transition_matrices(
    batch: &[&Transition],
    state_dim: usize,
    action_dim: usize,
) -> Result<(Array2<f64>, Array2<f64>, Array2<f64>)> {
    let n = batch.len();
    let mut s = Array2::zeros((n, state_dim));
    let mut a = Array2::zeros((n, action_dim));
    let mut sp = Array2::zeros((n, state_dim));
    for (r, t) in batch.iter().enumerate() {
        if t.state.len() != state_dim || t.next_state.len() != state_dim {
            return Err(Error::Dimension {
                context: "transition state",
                expected: state_dim,
                actual: t.state.len(),
            });
        }
        if t.action.len() != action_dim {
            return Err(Error::Dimension {
                context: "transition action",
                expected: action_dim,
                actual: t.action.len(),
            });
        }
        s.row_mut(r).assign(&ndarray::ArrayView1::from(&t.state[..]));
        a.row_mut(r).assign(&ndarray::ArrayView1::from(&t.action[..]));
        sp.row_mut(r)
            .assign(&ndarray::ArrayView1::from(&t.next_state[..]));
    }
    Ok((s, a, sp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maze::Trajectory;
    use crate::nn::LayerSpec;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Small ICM for tests: state 5, action 2, feature 3, hidden 4.
    fn small_icm(seed: u64, beta: f64) -> Icm {
        let encoder = Network::uniform_init(
            Network::mlp(&[5, 4, 3], Activation::Tanh, Activation::Linear).unwrap(),
            seed,
        )
        .unwrap();
        let forward_model = Network::uniform_init(
            Network::mlp(&[5, 4, 3], Activation::Tanh, Activation::Linear).unwrap(),
            seed + 1,
        )
        .unwrap();
        let inverse_model = Network::uniform_init(
            Network::mlp(&[6, 4, 2], Activation::Tanh, Activation::Linear).unwrap(),
            seed + 2,
        )
        .unwrap();
        Icm::new(encoder, forward_model, inverse_model, beta, 1.0, OptimizerState::adam(1e-2))
            .unwrap()
    }

    fn random_transition(rng: &mut ChaCha8Rng) -> Transition {
        use rand::Rng;
        Transition {
            state: (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            action: (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            next_state: (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        }
    }

    fn zeroed(mut icm: Icm) -> Icm {
        let n = icm.num_params();
        icm.set_joint_params(&vec![0.0; n]).unwrap();
        icm
    }

    #[test]
    fn collapsed_encoder_maps_every_state_to_zero() {
        let icm = zeroed(small_icm(1, 0.2));
        assert_eq!(icm.encode(&[1.0, -2.0, 0.5, 3.0, 0.0]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn encoding_is_deterministic() {
        let icm = small_icm(2, 0.2);
        let s = [0.1, 0.2, 0.3, 0.4, 0.5];
        assert_eq!(icm.encode(&s).unwrap(), icm.encode(&s).unwrap());
    }

    #[test]
    fn linear_encoder_picks_out_first_weight_column() {
        // Single linear layer 3 -> 2, basis-vector state selects column 0.
        let mut enc = Network::zeros(vec![LayerSpec::new(3, 2, Activation::Linear)]).unwrap();
        enc.set_weights(&[0.7, 0.0, 0.0, -0.3, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let fwd = Network::zeros(vec![LayerSpec::new(4, 2, Activation::Linear)]).unwrap();
        let inv = Network::zeros(vec![LayerSpec::new(4, 2, Activation::Linear)]).unwrap();
        let icm = Icm::new(enc, fwd, inv, 0.2, 1.0, OptimizerState::adam(1e-3)).unwrap();
        assert_eq!(icm.encode(&[1.0, 0.0, 0.0]).unwrap(), vec![0.7, -0.3]);
    }

    #[test]
    fn collapsed_icm_has_zero_forward_loss_and_bonus() {
        let icm = zeroed(small_icm(3, 0.2));
        let t = Transition {
            state: vec![1.0; 5],
            action: vec![0.0, 0.0],
            next_state: vec![-1.0; 5],
        };
        assert_eq!(icm.forward_loss(&t).unwrap(), 0.0);
        assert_eq!(icm.curiosity_bonus(&t).unwrap(), 0.0);
    }

    #[test]
    fn forward_loss_matches_norm_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let icm = small_icm(7, 0.2);
        let t = random_transition(&mut rng);
        let feat = icm.encode(&t.state).unwrap();
        let feat_next = icm.encode(&t.next_state).unwrap();
        let mut input = feat;
        input.extend_from_slice(&t.action);
        let pred = icm.forward_model().forward(&input).unwrap();
        let by_hand = pred
            .iter()
            .zip(&feat_next)
            .map(|(p, f)| (p - f) * (p - f))
            .sum::<f64>()
            .sqrt();
        assert_relative_eq!(icm.forward_loss(&t).unwrap(), by_hand, epsilon = 1e-12);
    }

    #[test]
    fn zero_inverse_model_gives_three_four_five_loss() {
        let icm = zeroed(small_icm(4, 0.2));
        let t = Transition {
            state: vec![0.0; 5],
            action: vec![3.0, 4.0],
            next_state: vec![0.0; 5],
        };
        assert_relative_eq!(icm.inverse_loss(&t).unwrap(), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn exact_inverse_prediction_has_zero_loss() {
        let icm = zeroed(small_icm(4, 0.2));
        let t = Transition {
            state: vec![0.0; 5],
            action: vec![0.0, 0.0],
            next_state: vec![0.0; 5],
        };
        assert_eq!(icm.inverse_loss(&t).unwrap(), 0.0);
    }

    #[test]
    fn icm_loss_interpolates_between_channel_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let t1 = random_transition(&mut rng);
        let t2 = random_transition(&mut rng);
        let batch = [&t1, &t2];

        let mut icm = small_icm(9, 0.0);
        let li = icm.icm_loss(&batch).unwrap();
        icm.set_beta(1.0).unwrap();
        let lf = icm.icm_loss(&batch).unwrap();
        icm.set_beta(0.2).unwrap();
        let blended = icm.icm_loss(&batch).unwrap();
        assert_relative_eq!(blended, 0.8 * li + 0.2 * lf, epsilon = 1e-12);

        // Hand-combined from per-transition losses.
        let by_hand = 0.5
            * ((0.8 * icm.inverse_loss(&t1).unwrap() + 0.2 * icm.forward_loss(&t1).unwrap())
                + (0.8 * icm.inverse_loss(&t2).unwrap() + 0.2 * icm.forward_loss(&t2).unwrap()));
        assert_relative_eq!(blended, by_hand, epsilon = 1e-12);
    }

    #[test]
    fn empty_batch_is_an_error() {
        let icm = small_icm(1, 0.2);
        assert!(matches!(icm.icm_loss(&[]), Err(Error::EmptyBatch)));
    }

    #[test]
    fn bonus_scales_with_eta() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let t = random_transition(&mut rng);
        let base = small_icm(11, 0.2);
        let with_eta = |eta: f64| {
            Icm::new(
                base.encoder.clone(),
                base.forward_model.clone(),
                base.inverse_model.clone(),
                0.2,
                eta,
                OptimizerState::adam(1e-3),
            )
            .unwrap()
        };
        let fl = base.forward_loss(&t).unwrap();
        assert_relative_eq!(with_eta(2.0).curiosity_bonus(&t).unwrap(), fl, epsilon = 1e-12);
        assert_relative_eq!(with_eta(1.0).curiosity_bonus(&t).unwrap(), fl / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn bonus_is_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let icm = small_icm(13, 0.2);
        for _ in 0..50 {
            let t = random_transition(&mut rng);
            assert!(icm.curiosity_bonus(&t).unwrap() >= 0.0);
        }
    }

    #[test]
    fn batched_errors_match_scalar_forward_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let icm = small_icm(15, 0.2);
        let transitions: Vec<Transition> = (0..7).map(|_| random_transition(&mut rng)).collect();
        let refs: Vec<&Transition> = transitions.iter().collect();
        let (s, a, sp) = transition_matrices(&refs, 5, 2).unwrap();
        let batched = icm.forward_errors(s.view(), a.view(), sp.view()).unwrap();
        for (t, e) in transitions.iter().zip(&batched) {
            assert_relative_eq!(icm.forward_loss(t).unwrap(), *e, epsilon = 1e-10);
        }
    }

    #[test]
    fn joint_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for trial in 0..5u64 {
            let icm = small_icm(20 + trial, 0.2);
            let transitions: Vec<Transition> =
                (0..3).map(|_| random_transition(&mut rng)).collect();
            let refs: Vec<&Transition> = transitions.iter().collect();
            let (_, grad) = icm.batch_loss_and_grad(&refs).unwrap();

            let h = 1e-5;
            let params = icm.joint_params();
            let mut probe = icm.clone();
            for i in (0..params.len()).step_by(7) {
                let mut p = params.clone();
                p[i] += h;
                probe.set_joint_params(&p).unwrap();
                let plus = probe.icm_loss(&refs).unwrap();
                p[i] = params[i] - h;
                probe.set_joint_params(&p).unwrap();
                let minus = probe.icm_loss(&refs).unwrap();
                let numeric = (plus - minus) / (2.0 * h);
                let scale = grad[i].abs().max(numeric.abs()).max(1e-6);
                assert!(
                    (grad[i] - numeric).abs() / scale < 1e-4,
                    "trial {trial} param {i}: analytic {} vs numeric {numeric}",
                    grad[i]
                );
            }
        }
    }

    fn buffer_from(transitions: &[Transition]) -> ReplayBuffer {
        let mut buf = ReplayBuffer::new(transitions.len().max(1), 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for t in transitions {
            let states = vec![t.state.clone(), t.next_state.clone()];
            let traj = Trajectory::from_parts(
                states,
                vec![[t.action[0], t.action[1]]],
                vec![0.0],
                false,
            );
            buf.add_from_trajectory(&traj, &mut rng);
        }
        buf
    }

    #[test]
    fn training_on_one_repeated_transition_consumes_its_bonus() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let t = random_transition(&mut rng);
        let mut icm = small_icm(18, 0.2);
        let buf = buffer_from(std::slice::from_ref(&t));
        let initial = icm.curiosity_bonus(&t).unwrap();
        let mut train_rng = ChaCha8Rng::seed_from_u64(1);
        icm.train(&buf, 400, 1, &mut train_rng).unwrap();
        let trained = icm.curiosity_bonus(&t).unwrap();
        assert!(
            trained < 0.1 * initial,
            "bonus {trained} did not drop below 10% of {initial}"
        );
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let transitions: Vec<Transition> = (0..5).map(|_| random_transition(&mut rng)).collect();
        let buf = buffer_from(&transitions);
        let mut icm = small_icm(21, 0.2);
        icm.optimizer = OptimizerState::adam(0.0);
        let before = icm.joint_params();
        let mut train_rng = ChaCha8Rng::seed_from_u64(2);
        let history = icm.train(&buf, 3, 2, &mut train_rng).unwrap();
        assert_eq!(icm.joint_params(), before);
        // Epoch means agree up to summation order (batches are shuffled).
        for w in history.windows(2) {
            assert_relative_eq!(w[0], w[1], max_relative = 1e-12);
        }
    }

    #[test]
    fn training_is_bit_reproducible_under_a_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let transitions: Vec<Transition> = (0..20).map(|_| random_transition(&mut rng)).collect();
        let buf = buffer_from(&transitions);
        let run = || {
            let mut icm = small_icm(23, 0.2);
            let mut train_rng = ChaCha8Rng::seed_from_u64(3);
            icm.train(&buf, 4, 8, &mut train_rng).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn empty_buffer_training_is_a_noop() {
        let buf = ReplayBuffer::new(10, 1).unwrap();
        let mut icm = small_icm(24, 0.2);
        let before = icm.joint_params();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let history = icm.train(&buf, 5, 4, &mut rng).unwrap();
        assert!(history.is_empty());
        assert_eq!(icm.joint_params(), before);
    }

    #[test]
    fn training_decreases_mean_bonus_on_a_fixed_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let transitions: Vec<Transition> = (0..40).map(|_| random_transition(&mut rng)).collect();
        let buf = buffer_from(&transitions);
        let mut icm = small_icm(26, 0.2);
        let mean_bonus = |icm: &Icm| {
            transitions
                .iter()
                .map(|t| icm.curiosity_bonus(t).unwrap())
                .sum::<f64>()
                / transitions.len() as f64
        };
        let initial = mean_bonus(&icm);
        let mut train_rng = ChaCha8Rng::seed_from_u64(4);
        icm.train(&buf, 100, 8, &mut train_rng).unwrap();
        assert!(mean_bonus(&icm) < initial);
    }

    #[test]
    fn checkpoint_roundtrips() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        let transitions: Vec<Transition> = (0..10).map(|_| random_transition(&mut rng)).collect();
        let buf = buffer_from(&transitions);
        let mut icm = small_icm(28, 0.2);
        let mut train_rng = ChaCha8Rng::seed_from_u64(5);
        icm.train(&buf, 2, 4, &mut train_rng).unwrap();
        icm.save_checkpoint(dir.path()).unwrap();
        let loaded = Icm::load_checkpoint(dir.path()).unwrap();
        assert_eq!(loaded.joint_params(), icm.joint_params());
        assert_eq!(loaded.beta(), icm.beta());
        assert_eq!(loaded.optimizer, icm.optimizer);
    }
}
