#include "roler/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace roler {

// --- Trackers ----------------------------------------------------------------

void TrackerConfig::validate() const {
    if (window < 1) throw config_error("tracker.window", "must be >= 1");
    if (kind == TrackerKind::attention) {
        if (attention_dim < 1) throw config_error("tracker.attention_dim", "must be >= 1");
        if (attention_scale < 0) throw config_error("tracker.attention_scale", "must be >= 0");
    }
}

namespace {

std::vector<double> concat_entry(const HistoryEntry& e) {
    std::vector<double> x(e.action_vec.begin(), e.action_vec.end());
    x.push_back(e.reward);
    return x;
}

std::vector<double> position_encoding(int pos, int dim) {
    std::vector<double> pe(dim);
    for (int d = 0; d < dim; ++d) {
        double rate = std::pow(10000.0, -2.0 * (d / 2) / static_cast<double>(dim));
        double angle = pos * rate;
        pe[d] = (d % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
    return pe;
}

std::vector<double> matvec(const Matrix& m, std::span<const double> x) {
    std::vector<double> y(m.rows(), 0.0);
    for (int r = 0; r < m.rows(); ++r) {
        double s = 0.0;
        auto row = m.row(r);
        for (int c = 0; c < m.cols(); ++c) s += row[c] * x[c];
        y[r] = s;
    }
    return y;
}

}  // namespace

std::vector<double> track_state_average(std::span<const HistoryEntry> history, int window) {
    if (history.empty()) throw precondition_error("state tracker requires nonempty history");
    size_t n = std::min<size_t>(window, history.size());
    size_t start = history.size() - n;
    size_t dim = history[start].action_vec.size() + 1;
    std::vector<double> s(dim, 0.0);
    for (size_t j = start; j < history.size(); ++j) {
        for (size_t d = 0; d < dim - 1; ++d) s[d] += history[j].action_vec[d];
        s[dim - 1] += history[j].reward;
    }
    for (double& v : s) v /= static_cast<double>(n);
    return s;
}

std::vector<double> track_state_attention(std::span<const HistoryEntry> history, int window,
                                          const AttentionParams& params) {
    if (history.empty()) throw precondition_error("state tracker requires nonempty history");
    size_t n = std::min<size_t>(window, history.size());
    size_t start = history.size() - n;
    int dim = static_cast<int>(history[start].action_vec.size()) + 1;

    // x_j plus positional encoding feed the projections; the value path keeps
    // a residual so zero projections collapse to the plain mean.
    std::vector<std::vector<double>> xs, qs, ks, vs;
    for (size_t j = start; j < history.size(); ++j) {
        std::vector<double> x = concat_entry(history[j]);
        std::vector<double> pe = position_encoding(static_cast<int>(j - start), dim);
        std::vector<double> xp(dim);
        for (int d = 0; d < dim; ++d) xp[d] = x[d] + pe[d];
        qs.push_back(matvec(params.wq, xp));
        ks.push_back(matvec(params.wk, xp));
        std::vector<double> v = matvec(params.wv, xp);
        for (int d = 0; d < dim; ++d) v[d] += x[d];
        vs.push_back(std::move(v));
        xs.push_back(std::move(x));
    }

    double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(params.key_dim()));
    std::vector<double> pooled(dim, 0.0);
    for (size_t i = 0; i < n; ++i) {
        std::vector<double> scores(n);
        double mx = -std::numeric_limits<double>::infinity();
        for (size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (int d = 0; d < params.key_dim(); ++d) s += qs[i][d] * ks[j][d];
            scores[j] = s * inv_sqrt;
            mx = std::max(mx, scores[j]);
        }
        double z = 0.0;
        for (size_t j = 0; j < n; ++j) {
            scores[j] = std::exp(scores[j] - mx);
            z += scores[j];
        }
        for (size_t j = 0; j < n; ++j) {
            double a = scores[j] / z;
            for (int d = 0; d < dim; ++d) pooled[d] += a * vs[j][d];
        }
    }
    for (double& v : pooled) v /= static_cast<double>(n);
    return pooled;
}

StateTracker::StateTracker(TrackerConfig cfg, int action_dim) : cfg_(cfg), action_dim_(action_dim) {
    cfg_.validate();
    if (cfg_.kind == TrackerKind::attention) {
        int dim = state_dim();
        attn_.wq = Matrix(cfg_.attention_dim, dim);
        attn_.wk = Matrix(cfg_.attention_dim, dim);
        attn_.wv = Matrix(dim, dim);
        if (cfg_.attention_scale > 0) {
            Rng rng = Rng(cfg_.attention_seed).split("attention");
            for (int r = 0; r < attn_.wq.rows(); ++r)
                for (int c = 0; c < attn_.wq.cols(); ++c) attn_.wq(r, c) = rng.normal(0.0, cfg_.attention_scale);
            for (int r = 0; r < attn_.wk.rows(); ++r)
                for (int c = 0; c < attn_.wk.cols(); ++c) attn_.wk(r, c) = rng.normal(0.0, cfg_.attention_scale);
            for (int r = 0; r < attn_.wv.rows(); ++r)
                for (int c = 0; c < attn_.wv.cols(); ++c) attn_.wv(r, c) = rng.normal(0.0, cfg_.attention_scale);
        }
    }
}

std::vector<double> StateTracker::state(std::span<const HistoryEntry> history) const {
    if (cfg_.kind == TrackerKind::average) return track_state_average(history, cfg_.window);
    return track_state_attention(history, cfg_.window, attn_);
}

// --- Actions -----------------------------------------------------------------

ActionTable init_actions(const WorldModel* wm, int n_items, int dim, ActionInit init, uint64_t seed) {
    ActionTable table;
    table.init = init;
    if (init == ActionInit::world_model_embeddings) {
        if (wm == nullptr) throw param_error("world_model_embeddings action init requires a world model");
        if (wm->n_items() != n_items) throw param_error("action table item count does not match world model");
        if (dim != 0 && dim != wm->dim())
            throw param_error("action dim " + std::to_string(dim) + " does not match world model dim " +
                              std::to_string(wm->dim()));
        table.vectors = wm->item_emb;
    } else {
        if (dim < 1) throw param_error("gaussian action init requires dim >= 1");
        table.vectors = Matrix(n_items, dim);
        Rng rng = Rng(seed).split("actions");
        for (int i = 0; i < n_items; ++i)
            for (int d = 0; d < dim; ++d) table.vectors(i, d) = rng.normal();
    }
    return table;
}

// --- MLP ----------------------------------------------------------------------

Mlp::Mlp(int in, int hidden, int out, Rng& rng) : in_(in), hidden_(hidden), out_(out) {
    params_.assign(static_cast<size_t>(hidden) * in + hidden + static_cast<size_t>(out) * hidden + out, 0.0);
    double s1 = 1.0 / std::sqrt(static_cast<double>(in));
    double s2 = 0.01 / std::sqrt(static_cast<double>(hidden));
    size_t p = 0;
    for (int j = 0; j < hidden * in; ++j) params_[p++] = rng.normal(0.0, s1);
    p += hidden;  // b1 = 0
    for (int j = 0; j < out * hidden; ++j) params_[p++] = rng.normal(0.0, s2);
}

Mlp Mlp::with_shape(int in, int hidden, int out) {
    Mlp m;
    m.in_ = in;
    m.hidden_ = hidden;
    m.out_ = out;
    m.params_.assign(static_cast<size_t>(hidden) * in + hidden + static_cast<size_t>(out) * hidden + out, 0.0);
    return m;
}

Mlp::Trace Mlp::forward(std::span<const double> x) const {
    Trace t;
    t.x.assign(x.begin(), x.end());
    t.h_pre.assign(hidden_, 0.0);
    t.h.assign(hidden_, 0.0);
    t.out.assign(out_, 0.0);
    const double* w1 = params_.data();
    const double* b1 = w1 + static_cast<size_t>(hidden_) * in_;
    const double* w2 = b1 + hidden_;
    const double* b2 = w2 + static_cast<size_t>(out_) * hidden_;
    for (int j = 0; j < hidden_; ++j) {
        double s = b1[j];
        const double* row = w1 + static_cast<size_t>(j) * in_;
        for (int i = 0; i < in_; ++i) s += row[i] * x[i];
        t.h_pre[j] = s;
        t.h[j] = s > 0 ? s : 0.0;
    }
    for (int o = 0; o < out_; ++o) {
        double s = b2[o];
        const double* row = w2 + static_cast<size_t>(o) * hidden_;
        for (int j = 0; j < hidden_; ++j) s += row[j] * t.h[j];
        t.out[o] = s;
    }
    return t;
}

std::vector<double> Mlp::output(std::span<const double> x) const { return forward(x).out; }

void Mlp::backward(const Trace& t, std::span<const double> dout, std::span<double> grad) const {
    double* gw1 = grad.data();
    double* gb1 = gw1 + static_cast<size_t>(hidden_) * in_;
    double* gw2 = gb1 + hidden_;
    double* gb2 = gw2 + static_cast<size_t>(out_) * hidden_;
    const double* w2 = params_.data() + static_cast<size_t>(hidden_) * in_ + hidden_;

    std::vector<double> dh(hidden_, 0.0);
    for (int o = 0; o < out_; ++o) {
        gb2[o] += dout[o];
        double* grow = gw2 + static_cast<size_t>(o) * hidden_;
        const double* wrow = w2 + static_cast<size_t>(o) * hidden_;
        for (int j = 0; j < hidden_; ++j) {
            grow[j] += dout[o] * t.h[j];
            dh[j] += dout[o] * wrow[j];
        }
    }
    for (int j = 0; j < hidden_; ++j) {
        if (t.h_pre[j] <= 0) continue;  // rectifier gate
        gb1[j] += dh[j];
        double* grow = gw1 + static_cast<size_t>(j) * in_;
        for (int i = 0; i < in_; ++i) grow[i] += dh[j] * t.x[i];
    }
}

// --- Losses -------------------------------------------------------------------

std::vector<double> masked_softmax(std::span<const double> logits, const std::vector<uint8_t>& used) {
    std::vector<double> probs(logits.size(), 0.0);
    double mx = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < logits.size(); ++i)
        if (!used[i]) mx = std::max(mx, logits[i]);
    if (mx == -std::numeric_limits<double>::infinity())
        throw precondition_error("masked_softmax: no available actions");
    double z = 0.0;
    for (size_t i = 0; i < logits.size(); ++i)
        if (!used[i]) {
            probs[i] = std::exp(logits[i] - mx);
            z += probs[i];
        }
    for (size_t i = 0; i < logits.size(); ++i) probs[i] /= z;
    return probs;
}

double actor_loss_and_grad(const Mlp& actor, std::span<const ActorStep> steps, double entropy_reg,
                           std::span<double> grad) {
    const double inv_t = 1.0 / static_cast<double>(steps.size());
    double loss = 0.0;
    std::vector<double> dlogits(actor.out());
    for (const auto& st : steps) {
        Mlp::Trace trace = actor.forward(st.state);
        std::vector<double> probs = masked_softmax(trace.out, st.used);
        double logp = std::log(std::max(probs[st.action], 1e-300));
        double entropy = 0.0;
        for (size_t i = 0; i < probs.size(); ++i)
            if (probs[i] > 0) entropy -= probs[i] * std::log(probs[i]);
        loss -= inv_t * (logp * st.advantage + entropy_reg * entropy);

        // dL/dz_j = -(1/T) [A (1{j=a} - pi_j) - beta pi_j (log pi_j + H)], masked j fixed at 0
        std::fill(dlogits.begin(), dlogits.end(), 0.0);
        for (int j = 0; j < actor.out(); ++j) {
            if (st.used[j]) continue;
            double indicator = (j == st.action) ? 1.0 : 0.0;
            double dH = probs[j] > 0 ? -probs[j] * (std::log(probs[j]) + entropy) : 0.0;
            dlogits[j] = -inv_t * (st.advantage * (indicator - probs[j]) + entropy_reg * dH);
        }
        actor.backward(trace, dlogits, grad);
    }
    return loss;
}

double critic_loss_and_grad(const Mlp& critic, std::span<const CriticStep> steps, std::span<double> grad) {
    const double inv_t = 1.0 / static_cast<double>(steps.size());
    double loss = 0.0;
    for (const auto& st : steps) {
        Mlp::Trace trace = critic.forward(st.state);
        double diff = trace.out[0] - st.target;
        loss += inv_t * diff * diff;
        double dout = 2.0 * inv_t * diff;
        critic.backward(trace, std::span<const double>(&dout, 1), grad);
    }
    return loss;
}

// --- Policy -------------------------------------------------------------------

void PolicyConfig::validate() const {
    if (hidden < 1) throw config_error("a2c.hidden", "must be >= 1");
    if (gamma < 0 || gamma >= 1) throw config_error("a2c.gamma", "must be in [0, 1)");
    if (actor_lr <= 0) throw config_error("a2c.actor_lr", "must be > 0");
    if (critic_lr <= 0) throw config_error("a2c.critic_lr", "must be > 0");
    if (entropy_reg < 0) throw config_error("a2c.entropy_reg", "must be >= 0");
}

void A2CConfig::validate() const {
    policy.validate();
    if (epochs < 1) throw config_error("a2c.epochs", "must be >= 1");
    if (trajectories_per_epoch < 1) throw config_error("a2c.trajectories", "must be >= 1");
}

std::vector<double> Policy::action_probs(std::span<const double> state, const std::vector<uint8_t>& used) const {
    return masked_softmax(actor.output(state), used);
}

int Policy::act(std::span<const double> state, const std::vector<uint8_t>& used, Rng& rng, bool greedy) const {
    std::vector<double> probs = action_probs(state, used);
    if (greedy) {
        int best = -1;
        for (size_t i = 0; i < probs.size(); ++i)
            if (!used[i] && (best < 0 || probs[i] > probs[best])) best = static_cast<int>(i);
        return best;
    }
    double u = rng.uniform();
    double acc = 0.0;
    int last_valid = -1;
    for (size_t i = 0; i < probs.size(); ++i) {
        if (used[i]) continue;
        last_valid = static_cast<int>(i);
        acc += probs[i];
        if (u < acc) return last_valid;
    }
    return last_valid;  // rounding slack lands on the last valid item
}

// --- Rollout ------------------------------------------------------------------

Trajectory rollout(const Policy& policy, SimEnv& env, int user, Rng& rng, bool greedy) {
    Trajectory traj;
    env.reset(user);
    std::vector<HistoryEntry> history;
    history.push_back({std::vector<double>(policy.actions.dim(), 0.0), 0.0});  // cold start

    std::vector<uint8_t> used(env.n_items(), 0);
    while (true) {
        TrajectoryStep step;
        step.state = policy.tracker.state(history);
        step.mask = used;
        step.action = policy.act(step.state, used, rng, greedy);
        SimEnv::Step res = env.step(step.action);
        step.reward = res.reward;
        step.feedback = res.feedback;
        step.done = res.done;
        used[step.action] = 1;
        auto row = policy.actions.vectors.row(step.action);
        history.push_back({std::vector<double>(row.begin(), row.end()), res.feedback});
        step.next_state = policy.tracker.state(history);
        traj.total_reward += res.reward;
        traj.total_feedback += res.feedback;
        traj.steps.push_back(std::move(step));
        if (res.done) break;
    }
    return traj;
}

void compute_returns(Trajectory& traj, double gamma) {
    double g = 0.0;
    for (auto it = traj.steps.rbegin(); it != traj.steps.rend(); ++it) {
        g = it->reward + gamma * g;
        it->ret = g;
    }
}

// --- Training -----------------------------------------------------------------

namespace {

class Optimizer {
public:
    Optimizer(OptimizerKind kind, double lr, size_t n) : kind_(kind), lr_(lr) {
        if (kind_ == OptimizerKind::adam) {
            m_.assign(n, 0.0);
            v_.assign(n, 0.0);
        }
    }

    void step(std::vector<double>& params, std::span<const double> grad) {
        if (kind_ == OptimizerKind::sgd) {
            for (size_t i = 0; i < params.size(); ++i) params[i] -= lr_ * grad[i];
            return;
        }
        ++t_;
        double bc1 = 1.0 - std::pow(beta1_, t_);
        double bc2 = 1.0 - std::pow(beta2_, t_);
        for (size_t i = 0; i < params.size(); ++i) {
            m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
            v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
            params[i] -= lr_ * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + eps_);
        }
    }

private:
    OptimizerKind kind_;
    double lr_;
    double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    long t_ = 0;
    std::vector<double> m_, v_;
};

}  // namespace

TrainResult a2c_train(SimEnv& env, std::span<const int> train_users, const TrackerConfig& tracker_cfg,
                      ActionTable actions, const A2CConfig& cfg, const EvalHook& eval_hook) {
    cfg.validate();
    if (train_users.empty()) throw precondition_error("a2c_train requires at least one training user");

    Rng root(cfg.seed);
    Rng init = root.split("net_init");
    TrainResult result;
    Policy& policy = result.policy;
    policy.tracker = StateTracker(tracker_cfg, actions.dim());
    policy.actions = std::move(actions);
    policy.gamma = cfg.policy.gamma;
    policy.actor = Mlp(policy.tracker.state_dim(), cfg.policy.hidden, env.n_items(), init);
    policy.critic = Mlp(policy.tracker.state_dim(), cfg.policy.hidden, 1, init);

    Optimizer actor_opt(cfg.policy.optimizer, cfg.policy.actor_lr, policy.actor.n_params());
    Optimizer critic_opt(cfg.policy.optimizer, cfg.policy.critic_lr, policy.critic.n_params());
    std::vector<double> actor_grad(policy.actor.n_params());
    std::vector<double> critic_grad(policy.critic.n_params());

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double epoch_actor_loss = 0.0, epoch_critic_loss = 0.0;
        for (int n = 0; n < cfg.trajectories_per_epoch; ++n) {
            Rng traj_rng = root.split("trajectory", static_cast<uint64_t>(epoch), static_cast<uint64_t>(n));
            int user = train_users[traj_rng.integer(train_users.size())];
            Trajectory traj = rollout(policy, env, user, traj_rng, /*greedy=*/false);
            compute_returns(traj, cfg.policy.gamma);

            // Advantages from the pre-update critic.
            std::vector<ActorStep> actor_steps;
            std::vector<CriticStep> critic_steps;
            actor_steps.reserve(traj.steps.size());
            critic_steps.reserve(traj.steps.size());
            for (auto& st : traj.steps) {
                double v = policy.critic.output(st.state)[0];
                double target = st.ret;
                if (cfg.policy.bootstrap_critic) {
                    double v_next = st.done ? 0.0 : policy.critic.output(st.next_state)[0];
                    target = st.reward + cfg.policy.gamma * v_next;
                }
                st.advantage = target - v;
                actor_steps.push_back({st.state, st.mask, st.action, st.advantage});
                critic_steps.push_back({st.state, target});
            }

            std::fill(critic_grad.begin(), critic_grad.end(), 0.0);
            double critic_loss = critic_loss_and_grad(policy.critic, critic_steps, critic_grad);
            if (!std::isfinite(critic_loss) || critic_loss > cfg.divergence_threshold)
                throw divergence_error("critic loss " + format_double(critic_loss) + " exceeded " +
                                       format_double(cfg.divergence_threshold) + " at epoch " +
                                       std::to_string(epoch) + ", trajectory " + std::to_string(n));
            critic_opt.step(policy.critic.params(), critic_grad);

            std::fill(actor_grad.begin(), actor_grad.end(), 0.0);
            double actor_loss = actor_loss_and_grad(policy.actor, actor_steps, cfg.policy.entropy_reg, actor_grad);
            actor_opt.step(policy.actor.params(), actor_grad);

            epoch_critic_loss += critic_loss;
            epoch_actor_loss += actor_loss;
        }

        TrainEpochRow row;
        row.epoch = epoch;
        row.critic_loss = epoch_critic_loss / cfg.trajectories_per_epoch;
        row.actor_loss = epoch_actor_loss / cfg.trajectories_per_epoch;
        if (eval_hook) eval_hook(policy, epoch, row);
        result.trace.push_back(row);
    }
    return result;
}

// --- Checkpoints ----------------------------------------------------------------

namespace {

void write_params(std::ofstream& out, const std::vector<double>& p) {
    for (size_t i = 0; i < p.size(); ++i) {
        if (i) out << ' ';
        out << format_double(p[i]);
    }
    out << '\n';
}

void write_matrix(std::ofstream& out, const Matrix& m) {
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) out << format_double(m(r, c)) << (c + 1 == m.cols() ? '\n' : ' ');
}

Matrix read_matrix(std::ifstream& in, int rows, int cols) {
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) in >> m(r, c);
    return m;
}

}  // namespace

void save_policy(const Policy& p, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path);
    const auto& cfg = p.tracker.config();
    out << "roler-policy v1\n";
    out << p.actor.in() << ' ' << p.actor.hidden() << ' ' << p.actor.out() << ' ' << p.critic.hidden() << ' '
        << format_double(p.gamma) << '\n';
    out << (cfg.kind == TrackerKind::average ? "average" : "attention") << ' ' << cfg.window << ' '
        << cfg.attention_dim << ' ' << format_double(cfg.attention_scale) << ' ' << cfg.attention_seed << '\n';
    out << (p.actions.init == ActionInit::world_model_embeddings ? "world_model_embeddings" : "gaussian_random")
        << ' ' << p.actions.n_items() << ' ' << p.actions.dim() << '\n';
    write_matrix(out, p.actions.vectors);
    if (cfg.kind == TrackerKind::attention) {
        write_matrix(out, p.tracker.attention().wq);
        write_matrix(out, p.tracker.attention().wk);
        write_matrix(out, p.tracker.attention().wv);
    }
    write_params(out, p.actor.params());
    write_params(out, p.critic.params());
    if (!out) throw io_error("failed writing " + path);
}

Policy load_policy(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path);
    std::string magic, version;
    in >> magic >> version;
    if (magic != "roler-policy" || version != "v1") throw parse_error(path, 1, "not a policy checkpoint");

    int state_dim = 0, hidden = 0, n_items = 0, critic_hidden = 0;
    Policy p;
    in >> state_dim >> hidden >> n_items >> critic_hidden >> p.gamma;

    std::string kind;
    TrackerConfig tcfg;
    in >> kind >> tcfg.window >> tcfg.attention_dim >> tcfg.attention_scale >> tcfg.attention_seed;
    tcfg.kind = kind == "attention" ? TrackerKind::attention : TrackerKind::average;

    std::string action_init;
    int action_items = 0, action_dim = 0;
    in >> action_init >> action_items >> action_dim;
    p.actions.init = action_init == "gaussian_random" ? ActionInit::gaussian_random
                                                      : ActionInit::world_model_embeddings;
    p.actions.vectors = read_matrix(in, action_items, action_dim);

    p.tracker = StateTracker(tcfg, action_dim);
    if (tcfg.kind == TrackerKind::attention) {
        p.tracker.attention().wq = read_matrix(in, tcfg.attention_dim, state_dim);
        p.tracker.attention().wk = read_matrix(in, tcfg.attention_dim, state_dim);
        p.tracker.attention().wv = read_matrix(in, state_dim, state_dim);
    }
    p.actor = Mlp::with_shape(state_dim, hidden, n_items);
    for (auto& v : p.actor.params()) in >> v;
    p.critic = Mlp::with_shape(state_dim, critic_hidden, 1);
    for (auto& v : p.critic.params()) in >> v;
    if (!in) throw io_error("truncated policy checkpoint " + path);
    return p;
}

}  // namespace roler
