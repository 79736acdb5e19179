#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "roler/common.hpp"

namespace roler {

struct FiniteMDP {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> transition;  // P(s'|s,a), layout [s][a][s']
    Matrix rewards;                  // r(s,a)
    double gamma = 0.9;

    double p(int s, int a, int s2) const {
        return transition[(static_cast<size_t>(s) * n_actions + a) * n_states + s2];
    }
    double& p(int s, int a, int s2) {
        return transition[(static_cast<size_t>(s) * n_actions + a) * n_states + s2];
    }

    void validate() const;
};

struct ValueIterationResult {
    std::vector<double> v;      // V*
    Matrix q;                   // Q*(s,a)
    std::vector<int> policy;    // greedy, lowest-index ties
    int iterations = 0;
};

// Bellman optimality iteration to sup-norm change < tol*(1-gamma)/gamma.
ValueIterationResult value_iteration(const FiniteMDP& mdp, double tol);

// Exact V^pi via a linear solve of (I - gamma * P_pi) v = r_pi.
std::vector<double> policy_evaluation_exact(const FiniteMDP& mdp, std::span<const int> policy);

// eps = q_m * sqrt(ln(2c/delta) / (2k)). `n` (dataset size) is carried for
// reporting; it enters only through c.
double epsilon_bound(double k, double n, double delta, double q_m, double c);

struct LipschitzEstimate {
    double l = 0.0;
    bool unbounded = false;  // duplicate points with differing values
};

// Exact empirical Lipschitz constant max |dQ| / d over distinct point pairs.
LipschitzEstimate estimate_lipschitz(std::span<const double> values,
                                     const std::function<double(int, int)>& distance);

struct BoundInputs {
    double l = 0.0;
    double d_m = 0.0;
    double q_m = 0.0;
    int k = 1;
    long n = 0;
    double delta = 0.05;
    double c = 1.0;
};

struct BoundReport {
    double gap = 0.0;      // max_s |V_{pi_hat}(s) - V*(s)|
    double bound = 0.0;    // 2 (L d_m + Q_m eps) / (1 - gamma)
    double epsilon = 0.0;
    bool holds = false;
};

// Builds the shaped MDP (same transitions, rewards r_tilde), extracts its
// optimal policy, evaluates it exactly on the true MDP and checks the gap
// against the theoretical bound.
BoundReport verify_bound(const FiniteMDP& true_mdp, const Matrix& shaped_rewards, const BoundInputs& in,
                         double tol);

// Monte-Carlo coverage experiment: random clustered MDP instances with
// kNN-shaped rewards and honestly estimated bound inputs.
struct CoverageConfig {
    int instances = 100;
    int n_states = 5;
    int n_actions = 3;
    double gamma = 0.9;
    double delta = 0.05;
    int k = 3;
    int n_clusters = 2;
    double cluster_noise = 0.05;
    double observation_noise = 0.1;
    uint64_t seed = 0;
    double tol = 1e-9;

    void validate() const;
};

struct CoverageRow {
    int instance = 0;
    double gap = 0.0;
    double bound = 0.0;
    double l = 0.0;
    double d_m = 0.0;
    double epsilon = 0.0;
    bool holds = false;
};

std::vector<CoverageRow> bound_coverage_experiment(const CoverageConfig& cfg);

void write_coverage_csv(std::span<const CoverageRow> rows, const std::string& path,
                        const std::string& comment_header);

}  // namespace roler
