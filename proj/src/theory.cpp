#include "roler/theory.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "roler/rng.hpp"

namespace roler {

namespace {

double euclidean_distance_rows(const Matrix& m, int r1, int r2) {
    double s = 0.0;
    for (int c = 0; c < m.cols(); ++c) {
        double d = m(r1, c) - m(r2, c);
        s += d * d;
    }
    return std::sqrt(s);
}

}  // namespace

void FiniteMDP::validate() const {
    if (n_states < 1 || n_actions < 1) throw precondition_error("MDP needs at least one state and action");
    if (gamma < 0 || gamma >= 1) throw precondition_error("MDP gamma must be in [0, 1)");
    if (rewards.rows() != n_states || rewards.cols() != n_actions)
        throw precondition_error("MDP reward matrix shape mismatch");
    if (transition.size() != static_cast<size_t>(n_states) * n_actions * n_states)
        throw precondition_error("MDP transition tensor size mismatch");
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) {
            double sum = 0.0;
            for (int s2 = 0; s2 < n_states; ++s2) {
                if (p(s, a, s2) < 0) throw precondition_error("negative transition probability");
                sum += p(s, a, s2);
            }
            if (std::abs(sum - 1.0) > 1e-9)
                throw precondition_error("transition row (" + std::to_string(s) + "," + std::to_string(a) +
                                         ") sums to " + format_double(sum));
        }
    for (double r : rewards.data())
        if (!std::isfinite(r)) throw precondition_error("non-finite reward");
}

ValueIterationResult value_iteration(const FiniteMDP& mdp, double tol) {
    if (tol <= 0) throw param_error("value_iteration tol must be > 0");
    mdp.validate();

    ValueIterationResult res;
    res.v.assign(mdp.n_states, 0.0);
    res.q = Matrix(mdp.n_states, mdp.n_actions);
    res.policy.assign(mdp.n_states, 0);

    // Stopping rule tol*(1-gamma)/gamma guarantees sup-norm error <= tol.
    double threshold = mdp.gamma > 0 ? tol * (1.0 - mdp.gamma) / mdp.gamma : 0.0;
    std::vector<double> next(mdp.n_states, 0.0);
    while (true) {
        ++res.iterations;
        double delta = 0.0;
        for (int s = 0; s < mdp.n_states; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            int best_a = 0;
            for (int a = 0; a < mdp.n_actions; ++a) {
                double q = mdp.rewards(s, a);
                for (int s2 = 0; s2 < mdp.n_states; ++s2) q += mdp.gamma * mdp.p(s, a, s2) * res.v[s2];
                res.q(s, a) = q;
                if (q > best) {
                    best = q;
                    best_a = a;
                }
            }
            next[s] = best;
            res.policy[s] = best_a;
            delta = std::max(delta, std::abs(next[s] - res.v[s]));
        }
        res.v = next;
        if (delta <= threshold || res.iterations > 1000000) break;
    }
    return res;
}

std::vector<double> policy_evaluation_exact(const FiniteMDP& mdp, std::span<const int> policy) {
    mdp.validate();
    if (static_cast<int>(policy.size()) != mdp.n_states) throw param_error("policy size mismatch");

    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(mdp.n_states, mdp.n_states);
    Eigen::VectorXd b(mdp.n_states);
    for (int s = 0; s < mdp.n_states; ++s) {
        int act = policy[s];
        if (act < 0 || act >= mdp.n_actions) throw param_error("policy action out of range");
        for (int s2 = 0; s2 < mdp.n_states; ++s2) a(s, s2) -= mdp.gamma * mdp.p(s, act, s2);
        b(s) = mdp.rewards(s, act);
    }
    Eigen::VectorXd v = a.partialPivLu().solve(b);
    return std::vector<double>(v.data(), v.data() + mdp.n_states);
}

double epsilon_bound(double k, double n, double delta, double q_m, double c) {
    (void)n;
    if (!(delta > 0 && delta < 1)) throw param_error("delta must be in (0, 1)");
    if (k < 1) throw param_error("k must be >= 1");
    if (c < 1) throw param_error("cluster count bound must be >= 1");
    if (q_m < 0) throw param_error("q_m must be >= 0");
    return q_m * std::sqrt(std::log(2.0 * c / delta) / (2.0 * k));
}

LipschitzEstimate estimate_lipschitz(std::span<const double> values,
                                     const std::function<double(int, int)>& distance) {
    if (values.size() < 2) throw param_error("estimate_lipschitz needs at least two points");
    LipschitzEstimate est;
    const int n = static_cast<int>(values.size());
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double dq = std::abs(values[i] - values[j]);
            double d = distance(i, j);
            if (d < 0) throw param_error("negative distance");
            if (d == 0.0) {
                if (dq > 0) est.unbounded = true;  // duplicate points, differing values
                continue;
            }
            if (std::isinf(d)) continue;  // incomparable pair (e.g. differing actions)
            est.l = std::max(est.l, dq / d);
        }
    return est;
}

BoundReport verify_bound(const FiniteMDP& true_mdp, const Matrix& shaped_rewards, const BoundInputs& in,
                         double tol) {
    if (shaped_rewards.rows() != true_mdp.rewards.rows() || shaped_rewards.cols() != true_mdp.rewards.cols())
        throw param_error("shaped rewards shape mismatch");

    FiniteMDP shaped = true_mdp;
    shaped.rewards = shaped_rewards;

    ValueIterationResult opt_true = value_iteration(true_mdp, 1e-10);
    ValueIterationResult opt_shaped = value_iteration(shaped, 1e-10);
    std::vector<double> v_pi = policy_evaluation_exact(true_mdp, opt_shaped.policy);

    BoundReport rep;
    for (int s = 0; s < true_mdp.n_states; ++s)
        rep.gap = std::max(rep.gap, std::abs(v_pi[s] - opt_true.v[s]));
    rep.epsilon = epsilon_bound(in.k, static_cast<double>(in.n), in.delta, in.q_m, in.c);
    rep.bound = 2.0 * (in.l * in.d_m + in.q_m * rep.epsilon) / (1.0 - true_mdp.gamma);
    rep.holds = rep.gap <= rep.bound + tol;
    return rep;
}

void CoverageConfig::validate() const {
    if (instances < 1) throw config_error("verify_bound.instances", "must be >= 1");
    if (n_states < 2) throw config_error("verify_bound.states", "must be >= 2");
    if (n_actions < 1) throw config_error("verify_bound.actions", "must be >= 1");
    if (gamma < 0 || gamma >= 1) throw config_error("verify_bound.gamma", "must be in [0, 1)");
    if (!(delta > 0 && delta < 1)) throw config_error("verify_bound.delta", "must be in (0, 1)");
    if (k < 1 || k >= n_states) throw config_error("verify_bound.k", "must be in [1, states)");
    if (n_clusters < 1 || n_clusters > n_states) throw config_error("verify_bound.clusters", "must be in [1, states]");
    if (cluster_noise < 0) throw config_error("verify_bound.cluster_noise", "must be >= 0");
    if (observation_noise < 0) throw config_error("verify_bound.observation_noise", "must be >= 0");
}

std::vector<CoverageRow> bound_coverage_experiment(const CoverageConfig& cfg) {
    cfg.validate();
    Rng root(cfg.seed);
    std::vector<CoverageRow> rows;
    rows.reserve(cfg.instances);

    for (int inst = 0; inst < cfg.instances; ++inst) {
        Rng rng = root.split("instance", static_cast<uint64_t>(inst));

        FiniteMDP mdp;
        mdp.n_states = cfg.n_states;
        mdp.n_actions = cfg.n_actions;
        mdp.gamma = cfg.gamma;
        mdp.transition.assign(static_cast<size_t>(cfg.n_states) * cfg.n_actions * cfg.n_states, 0.0);
        for (int s = 0; s < cfg.n_states; ++s)
            for (int a = 0; a < cfg.n_actions; ++a) {
                double sum = 0.0;
                for (int s2 = 0; s2 < cfg.n_states; ++s2) {
                    double w = rng.uniform() + 1e-3;
                    mdp.p(s, a, s2) = w;
                    sum += w;
                }
                for (int s2 = 0; s2 < cfg.n_states; ++s2) mdp.p(s, a, s2) /= sum;
            }

        // Clustered true rewards: states in a cluster share an action-reward
        // profile up to cluster noise, mirroring users with shared interests.
        Matrix proto(cfg.n_clusters, cfg.n_actions);
        for (int c = 0; c < cfg.n_clusters; ++c)
            for (int a = 0; a < cfg.n_actions; ++a) proto(c, a) = rng.uniform();
        mdp.rewards = Matrix(cfg.n_states, cfg.n_actions);
        for (int s = 0; s < cfg.n_states; ++s)
            for (int a = 0; a < cfg.n_actions; ++a)
                mdp.rewards(s, a) =
                    std::clamp(proto(s % cfg.n_clusters, a) + rng.normal(0.0, cfg.cluster_noise), 0.0, 1.0);

        // Offline observations: one noisy reward sample per (s,a); these are
        // both the shaping inputs and the neighbor-retrieval features.
        Matrix observed(cfg.n_states, cfg.n_actions);
        for (int s = 0; s < cfg.n_states; ++s)
            for (int a = 0; a < cfg.n_actions; ++a)
                observed(s, a) = std::clamp(mdp.rewards(s, a) + rng.normal(0.0, cfg.observation_noise), 0.0, 1.0);

        // kNN over states by euclidean distance between observed rows.
        std::vector<std::vector<int>> nbrs(cfg.n_states);
        double d_m = 0.0;
        for (int s = 0; s < cfg.n_states; ++s) {
            std::vector<std::pair<double, int>> cands;
            for (int s2 = 0; s2 < cfg.n_states; ++s2) {
                if (s2 == s) continue;
                cands.push_back({euclidean_distance_rows(observed, s, s2), s2});
            }
            std::sort(cands.begin(), cands.end());
            for (int j = 0; j < cfg.k; ++j) {
                nbrs[s].push_back(cands[j].second);
                d_m = std::max(d_m, cands[j].first);
            }
        }

        Matrix shaped(cfg.n_states, cfg.n_actions);
        for (int s = 0; s < cfg.n_states; ++s)
            for (int a = 0; a < cfg.n_actions; ++a) {
                double sum = 0.0;
                for (int s2 : nbrs[s]) sum += observed(s2, a);
                shaped(s, a) = sum / static_cast<double>(cfg.k);
            }

        // Hoeffding inputs: C = distinct realized neighbor sets, Q_m from the
        // true reward scale, L from the shaped MDP's optimal Q.
        std::vector<std::vector<int>> sorted_sets = nbrs;
        for (auto& v : sorted_sets) std::sort(v.begin(), v.end());
        std::sort(sorted_sets.begin(), sorted_sets.end());
        sorted_sets.erase(std::unique(sorted_sets.begin(), sorted_sets.end()), sorted_sets.end());

        double max_abs_r = 0.0;
        for (double r : mdp.rewards.data()) max_abs_r = std::max(max_abs_r, std::abs(r));

        FiniteMDP shaped_mdp = mdp;
        shaped_mdp.rewards = shaped;
        ValueIterationResult shaped_opt = value_iteration(shaped_mdp, 1e-10);
        std::vector<double> q_flat;
        q_flat.reserve(static_cast<size_t>(cfg.n_states) * cfg.n_actions);
        for (int s = 0; s < cfg.n_states; ++s)
            for (int a = 0; a < cfg.n_actions; ++a) q_flat.push_back(shaped_opt.q(s, a));
        auto pair_distance = [&](int i, int j) {
            int si = i / cfg.n_actions, ai = i % cfg.n_actions;
            int sj = j / cfg.n_actions, aj = j % cfg.n_actions;
            if (ai != aj) return std::numeric_limits<double>::infinity();  // neighbors share the action
            return euclidean_distance_rows(observed, si, sj);
        };
        LipschitzEstimate lip = estimate_lipschitz(q_flat, pair_distance);

        BoundInputs in;
        in.l = lip.l;
        in.d_m = d_m;
        in.q_m = max_abs_r / (1.0 - cfg.gamma);
        in.k = cfg.k;
        in.n = static_cast<long>(cfg.n_states) * cfg.n_actions;
        in.delta = cfg.delta;
        in.c = static_cast<double>(sorted_sets.size());

        BoundReport rep = verify_bound(mdp, shaped, in, cfg.tol);
        rows.push_back({inst, rep.gap, rep.bound, in.l, in.d_m, rep.epsilon, rep.holds});
    }
    return rows;
}

void write_coverage_csv(std::span<const CoverageRow> rows, const std::string& path,
                        const std::string& comment_header) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path);
    if (!comment_header.empty()) out << comment_header << '\n';
    out << "instance,gap,bound,L,d_m,epsilon,holds\n";
    for (const auto& r : rows)
        out << r.instance << ',' << format_double(r.gap) << ',' << format_double(r.bound) << ','
            << format_double(r.l) << ',' << format_double(r.d_m) << ',' << format_double(r.epsilon) << ','
            << (r.holds ? 1 : 0) << '\n';
    if (!out) throw io_error("failed writing " + path);
}

}  // namespace roler
