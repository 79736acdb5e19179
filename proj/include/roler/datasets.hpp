#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "roler/common.hpp"

namespace roler {

// User-item reward matrix with an observation mask. Serves both as ground
// truth (fully observed) and as the observed slice of an offline log.
struct FeedbackMatrix {
    int n_users = 0;
    int n_items = 0;
    Matrix values;              // n_users x n_items
    std::vector<uint8_t> mask;  // 1 = observed
    RewardRange reward_range;

    bool observed(int u, int i) const { return mask[static_cast<size_t>(u) * n_items + i] != 0; }
    void set_observed(int u, int i, bool v) { mask[static_cast<size_t>(u) * n_items + i] = v ? 1 : 0; }
    bool fully_observed() const;
    double observed_fraction() const;
    void validate() const;

    static FeedbackMatrix zeros(int n_users, int n_items, RewardRange range, bool observed_all = false);
};

struct LogEvent {
    int user = 0;
    int item = 0;
    double reward = 0.0;
    long timestep = 0;

    bool operator==(const LogEvent&) const = default;
};

// Offline interaction dataset, sorted by (user, timestep) with strictly
// increasing timesteps per user.
struct InteractionLog {
    std::vector<LogEvent> events;
    int n_users = 0;
    int n_items = 0;
    RewardRange reward_range;

    std::vector<int> users_present() const;
    void validate() const;

    bool operator==(const InteractionLog&) const = default;
};

struct CategoryMap {
    std::vector<int> item_category;  // one category per item
    int n_categories = 0;
    int majority_category = 0;  // argmax of training-log event counts, ties -> smallest index
};

// Majority category of a training log under a given item->category labeling.
int majority_category_of(const InteractionLog& log, const std::vector<int>& item_category, int n_categories);

CategoryMap make_category_map(std::vector<int> item_category, int n_categories, const InteractionLog& log);

enum class FeatureSource { interaction_history_row, world_model_embedding, raw_static_features };

struct UserFeatures {
    Matrix vectors;  // n_users x dim
    FeatureSource source = FeatureSource::interaction_history_row;

    int dim() const { return vectors.cols(); }
};

struct SyntheticConfig {
    int n_users = 60;
    int n_items = 40;
    int n_clusters = 3;
    int n_categories = 10;
    double within_cluster_reward_noise = 0.05;  // sigma_c
    double observation_noise = 0.1;             // sigma_o
    double log_density = 0.3;                   // fraction of cells logged
    uint64_t seed = 0;
    RewardRange reward_range{0.0, 1.0};

    void validate() const;  // throws config_error naming the offending field
};

struct SyntheticDataset {
    FeedbackMatrix gt;  // fully observed
    InteractionLog log;
    CategoryMap cats;
    UserFeatures feats;
    std::vector<int> cluster_of;  // diagnostic: planted cluster per user
};

// Planted-cluster generator: cluster prototypes + per-user noise, a seeded
// sample of logged cells with observation noise, round-robin item categories,
// and history-row indicator features.
SyntheticDataset generate_synthetic(const SyntheticConfig& cfg);

// Indicator features from the training log: the user's observed reward row,
// unobserved cells imputed with the user's observed mean (global mean for
// users absent from the log). Duplicate (user,item) observations average.
UserFeatures history_row_features(const InteractionLog& log);

// Observed reward matrix of a log; duplicate (user,item) events average.
FeedbackMatrix observed_matrix_from_log(const InteractionLog& log);

// --- File formats -----------------------------------------------------------
// Dense matrix: ASCII, whitespace separated, one user per row, 0 = unobserved.
FeedbackMatrix load_dense_matrix(const std::string& path, RewardRange range);
void save_dense_matrix(const FeedbackMatrix& m, const std::string& path);

// Full matrix: same layout, every cell meaningful (mask all true). Used for
// ground-truth matrices whose legitimate range may include 0.
FeedbackMatrix load_full_matrix(const std::string& path, RewardRange range);
void save_full_matrix(const FeedbackMatrix& m, const std::string& path);

// Interaction log CSV: header `user,item,reward,timestep`, LF endings.
InteractionLog load_interaction_log(const std::string& path, int n_users, int n_items, RewardRange range);
void save_interaction_log(const InteractionLog& log, const std::string& path);

// Category CSV: header `item,category`.
std::vector<int> load_categories(const std::string& path, int n_items);
void save_categories(const CategoryMap& cats, const std::string& path);

// Feature matrix: plain whitespace-separated rows.
Matrix load_plain_matrix(const std::string& path);
void save_plain_matrix(const Matrix& m, const std::string& path);

}  // namespace roler
