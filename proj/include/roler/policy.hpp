#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "roler/common.hpp"
#include "roler/env.hpp"
#include "roler/rng.hpp"
#include "roler/world_model.hpp"

namespace roler {

// --- State tracking ---------------------------------------------------------

struct HistoryEntry {
    std::vector<double> action_vec;
    double reward = 0.0;
};

enum class TrackerKind { average, attention };

struct TrackerConfig {
    TrackerKind kind = TrackerKind::average;
    int window = 5;
    int attention_dim = 16;         // key/query width
    double attention_scale = 0.1;   // projection init scale; 0 degrades to the plain mean
    uint64_t attention_seed = 0;

    void validate() const;
    bool operator==(const TrackerConfig&) const = default;
};

// Fixed (non-learned) single-head self-attention over the window, with
// sinusoidal position encodings and a residual value path so that zero
// projections reproduce the average tracker exactly.
struct AttentionParams {
    Matrix wq;  // key_dim x input_dim
    Matrix wk;  // key_dim x input_dim
    Matrix wv;  // input_dim x input_dim

    int key_dim() const { return wq.rows(); }
    bool operator==(const AttentionParams&) const = default;
};

// Mean of the most recent min(window, len) concatenations [action ++ reward].
std::vector<double> track_state_average(std::span<const HistoryEntry> history, int window);
std::vector<double> track_state_attention(std::span<const HistoryEntry> history, int window,
                                          const AttentionParams& params);

class StateTracker {
public:
    StateTracker() = default;
    StateTracker(TrackerConfig cfg, int action_dim);

    int action_dim() const { return action_dim_; }
    int state_dim() const { return action_dim_ + 1; }
    const TrackerConfig& config() const { return cfg_; }
    const AttentionParams& attention() const { return attn_; }
    AttentionParams& attention() { return attn_; }

    std::vector<double> state(std::span<const HistoryEntry> history) const;

    bool operator==(const StateTracker&) const = default;

private:
    TrackerConfig cfg_;
    int action_dim_ = 0;
    AttentionParams attn_;
};

// --- Action representation --------------------------------------------------

enum class ActionInit { world_model_embeddings, gaussian_random };

struct ActionTable {
    Matrix vectors;  // n_items x action_dim
    ActionInit init = ActionInit::world_model_embeddings;

    int n_items() const { return vectors.rows(); }
    int dim() const { return vectors.cols(); }
    bool operator==(const ActionTable&) const = default;
};

ActionTable init_actions(const WorldModel* wm, int n_items, int dim, ActionInit init, uint64_t seed);

// --- Small MLP with analytic gradients --------------------------------------

// One hidden layer, rectifier nonlinearity, flat parameter vector.
class Mlp {
public:
    Mlp() = default;
    Mlp(int in, int hidden, int out, Rng& rng);

    int in() const { return in_; }
    int hidden() const { return hidden_; }
    int out() const { return out_; }
    size_t n_params() const { return params_.size(); }
    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }

    struct Trace {
        std::vector<double> x;
        std::vector<double> h_pre;
        std::vector<double> h;
        std::vector<double> out;
    };

    Trace forward(std::span<const double> x) const;
    std::vector<double> output(std::span<const double> x) const;

    // Accumulates dL/dparams into `grad` given dL/dout for a traced forward.
    void backward(const Trace& trace, std::span<const double> dout, std::span<double> grad) const;

    static Mlp with_shape(int in, int hidden, int out);  // zero params, for deserialization
    bool operator==(const Mlp&) const = default;

private:
    int in_ = 0, hidden_ = 0, out_ = 0;
    std::vector<double> params_;  // [W1, b1, W2, b2]
};

// --- Losses (shared by training and the gradient-check tests) ----------------

// Softmax over items not yet recommended; used items get probability 0.
std::vector<double> masked_softmax(std::span<const double> logits, const std::vector<uint8_t>& used);

struct ActorStep {
    std::vector<double> state;
    std::vector<uint8_t> used;  // mask before acting
    int action = 0;
    double advantage = 0.0;
};

struct CriticStep {
    std::vector<double> state;
    double target = 0.0;
};

// L = -(1/T) sum_t [log pi(a_t|s_t) * A_t + beta * H(pi(.|s_t))]
double actor_loss_and_grad(const Mlp& actor, std::span<const ActorStep> steps, double entropy_reg,
                           std::span<double> grad);
// L = (1/T) sum_t (V(s_t) - target_t)^2
double critic_loss_and_grad(const Mlp& critic, std::span<const CriticStep> steps, std::span<double> grad);

// --- Policy -----------------------------------------------------------------

enum class OptimizerKind { sgd, adam };

struct PolicyConfig {
    int hidden = 64;
    double gamma = 0.9;
    double actor_lr = 0.01;
    double critic_lr = 0.01;
    double entropy_reg = 0.01;  // policy-entropy regularizer, optimizer plumbing
    OptimizerKind optimizer = OptimizerKind::adam;
    bool bootstrap_critic = false;  // target r + gamma*V(s') instead of the Monte-Carlo return

    void validate() const;
};

struct Policy {
    Mlp actor;   // state -> item logits
    Mlp critic;  // state -> V
    StateTracker tracker;
    ActionTable actions;
    double gamma = 0.9;

    int n_items() const { return actor.out(); }

    std::vector<double> action_probs(std::span<const double> state, const std::vector<uint8_t>& used) const;
    int act(std::span<const double> state, const std::vector<uint8_t>& used, Rng& rng, bool greedy) const;

    bool operator==(const Policy&) const = default;
};

void save_policy(const Policy& p, const std::string& path);
Policy load_policy(const std::string& path);

// --- Trajectories and training ----------------------------------------------

struct TrajectoryStep {
    std::vector<double> state;
    std::vector<uint8_t> mask;  // used items before acting
    int action = 0;
    double reward = 0.0;    // training signal (may include entropy bonus)
    double feedback = 0.0;  // tracker input
    std::vector<double> next_state;
    bool done = false;
    double ret = 0.0;
    double advantage = 0.0;
};

struct Trajectory {
    std::vector<TrajectoryStep> steps;
    double total_reward = 0.0;    // sum of training rewards
    double total_feedback = 0.0;  // sum of env feedback
    int length() const { return static_cast<int>(steps.size()); }
};

Trajectory rollout(const Policy& policy, SimEnv& env, int user, Rng& rng, bool greedy);

// G_t = r_t + gamma * G_{t+1}, G_T = r_T.
void compute_returns(Trajectory& traj, double gamma);

struct A2CConfig {
    int epochs = 50;
    int trajectories_per_epoch = 8;
    PolicyConfig policy;
    uint64_t seed = 0;
    double divergence_threshold = 1e6;

    void validate() const;
};

struct TrainEpochRow {
    int epoch = 0;
    double r_tra = 0.0;
    double r_each = 0.0;
    double length = 0.0;
    double mcd = 0.0;
    double critic_loss = 0.0;
    double actor_loss = 0.0;
};

struct TrainResult {
    Policy policy;
    std::vector<TrainEpochRow> trace;
};

// Per-epoch hook for interactive evaluation; fills the metric fields of the
// epoch row. Training itself never touches it.
using EvalHook = std::function<void(const Policy&, int epoch, TrainEpochRow& row)>;

TrainResult a2c_train(SimEnv& env, std::span<const int> train_users, const TrackerConfig& tracker_cfg,
                      ActionTable actions, const A2CConfig& cfg, const EvalHook& eval_hook = {});

}  // namespace roler
