#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "roler/common.hpp"
#include "roler/datasets.hpp"

namespace roler {

// Biased matrix-factorization reward model. The noisy-oracle variant fits the
// same shape: user rows hold the (noisy) reward table and item embeddings are
// one-hot, so predict() is a plain lookup.
struct WorldModel {
    Matrix user_emb;  // n_users x d
    Matrix item_emb;  // n_items x d
    std::vector<double> user_bias;
    std::vector<double> item_bias;
    double global_bias = 0.0;
    RewardRange reward_range;

    int n_users() const { return user_emb.rows(); }
    int n_items() const { return item_emb.rows(); }
    int dim() const { return item_emb.cols(); }

    // Unclipped score; training operates on this.
    double score(int u, int i) const;
    // Clipped prediction; the environment-facing output.
    double predict(int u, int i) const { return reward_range.clip(score(u, i)); }

    void validate() const;
    bool operator==(const WorldModel&) const = default;
};

void save_world_model(const WorldModel& m, const std::string& path);
WorldModel load_world_model(const std::string& path);

struct WorldModelEnsemble {
    std::vector<WorldModel> members;
    RewardRange reward_range;

    size_t size() const { return members.size(); }
    void validate() const;
};

struct MFConfig {
    int d = 8;
    double learning_rate = 0.05;
    double l2 = 1e-4;
    int epochs = 50;
    uint64_t seed = 0;

    void validate() const;
};

struct MFFitResult {
    WorldModel model;
    std::vector<double> epoch_rmse;  // training RMSE after each epoch
    double train_rmse = 0.0;         // == epoch_rmse.back()
};

// SGD on squared error with L2 regularization; events visited in a seeded
// shuffled order each epoch.
MFFitResult fit_mf(const InteractionLog& log, const MFConfig& cfg);

// Independent members with seeds split from cfg.seed.
WorldModelEnsemble fit_mf_ensemble(const InteractionLog& log, const MFConfig& cfg, int members);

double predict_reward_mean(const WorldModelEnsemble& ens, int u, int i);

struct UncertaintyEstimate {
    double variance = 0.0;
    bool degenerate = false;  // single-member ensemble cannot express disagreement
};

// Population variance of member predictions.
UncertaintyEstimate ensemble_uncertainty(const WorldModelEnsemble& ens, int u, int i);

// Lookup-backed model: predict(u,i) = clip(gt + bias + N(0, sigma)).
WorldModelEnsemble make_noisy_oracle(const FeedbackMatrix& gt, double sigma, double bias, uint64_t seed);
WorldModelEnsemble make_noisy_oracle_ensemble(const FeedbackMatrix& gt, double sigma, double bias, uint64_t seed,
                                              int members);

}  // namespace roler
