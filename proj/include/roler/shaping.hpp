#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "roler/common.hpp"
#include "roler/datasets.hpp"
#include "roler/world_model.hpp"

namespace roler {

class Rng;

enum class Metric { cosine, euclidean };

struct Neighbor {
    int user = 0;
    double distance = 0.0;
};

// Retrieved neighborhood of a query user: k entries, ascending distance, ties
// broken by smaller user index.
struct NeighborSet {
    int query_user = 0;
    std::vector<Neighbor> neighbors;
    int k = 0;
    Metric metric = Metric::cosine;

    void validate() const;
};

double cosine_distance(std::span<const double> a, std::span<const double> b);
double euclidean_distance(std::span<const double> a, std::span<const double> b);

// Exact kNN over the candidate pool (users present in the training log). The
// query is excluded unless include_self is set.
NeighborSet knn_neighbors(const UserFeatures& feats, std::span<const int> pool, int query, int k, Metric metric,
                          bool include_self = false);

struct NeighborContribution {
    int user = 0;
    double distance = 0.0;
    double reward = 0.0;
};

// Neighbors that actually observed `item`, with their rewards.
std::vector<NeighborContribution> neighbor_contributions(const FeedbackMatrix& observed, const NeighborSet& nbrs,
                                                         int item);

// Mean of neighbors' observed rewards on `item`; neighbors without an
// observation are skipped. Falls back to `fallback` when nobody observed it.
double shape_reward(const FeedbackMatrix& observed, const NeighborSet& nbrs, int item, double fallback);

// Mean distance from the query to its neighbors.
double knn_uncertainty(const NeighborSet& nbrs);

enum class VariantKind {
    multiplicative,    // r * (1 - p_u)
    additive_mean,     // r - lambda * mean(d)
    additive_min,      // r - lambda * min(d)
    additive_max,      // r - lambda * max(d)
    inverse,           // r * lambda / max(p_u, eps)
    gaussian_sample,   // one draw from N(r, lambda * p_u)
    weighted_average,  // similarity-weighted neighbor mean
};

struct UncertaintyVariant {
    VariantKind kind = VariantKind::multiplicative;
    double lambda = 1.0;
};

inline constexpr double kInverseDistanceFloor = 1e-6;

// Applies one Table-style uncertainty design to a shaped reward and clips the
// result. `contribs` is only consulted by weighted_average; `rng` only by
// gaussian_sample. `clamp_events` counts inverse-variant floor hits.
double apply_uncertainty_variant(double r_tilde, const NeighborSet& nbrs, const UncertaintyVariant& v, Rng* rng,
                                 RewardRange range, std::span<const NeighborContribution> contribs = {},
                                 long* clamp_events = nullptr);

// Pattern-conditioned next-category entropy tables. A pattern is the
// unordered multiset of categories of the `order` items preceding a position;
// patterns absent from the log score the maximum entropy log(n_categories).
class EntropyTable {
public:
    EntropyTable() = default;
    EntropyTable(std::vector<int> orders, int n_categories);

    const std::vector<int>& orders() const { return orders_; }
    int n_categories() const { return n_categories_; }
    double max_entropy() const;

    // Entropy of the next-category distribution after `recent_cats` (the most
    // recent categories, latest last; only the trailing `order` entries are
    // used, and shorter histories count as unseen).
    double order_entropy(int order, std::span<const int> recent_cats) const;

    // Sum of order entropies over all configured orders.
    double penalty(std::span<const int> recent_cats) const;

    struct Entry {
        std::vector<double> counts;  // per next-category
        double total = 0.0;
        double entropy = 0.0;
    };
    using Key = std::pair<int, std::vector<int>>;  // (order, sorted pattern)
    const std::map<Key, Entry>& entries() const { return entries_; }

    void add_observation(int order, std::vector<int> pattern, int next_category);
    void finalize();  // computes probabilities/entropies

private:
    std::vector<int> orders_;
    int n_categories_ = 0;
    std::map<Key, Entry> entries_;
};

EntropyTable entropy_penalty(const InteractionLog& log, const CategoryMap& cats, const std::vector<int>& orders);

// variant(r_tilde) + lambda_e * p_e; deliberately unclipped (the entropy bonus
// is additive on top of the reward scale). Scalar overload supports variants
// that only need the mean distance.
double combined_reward(double r_tilde, double p_u, double p_e, double lambda_e, const UncertaintyVariant& v,
                       RewardRange range);
double combined_reward(double r_tilde, const NeighborSet& nbrs, double p_e, double lambda_e,
                       const UncertaintyVariant& v, Rng* rng, RewardRange range,
                       std::span<const NeighborContribution> contribs = {});

struct ShapingParams {
    int k = 9;
    Metric metric = Metric::cosine;
    UncertaintyVariant variant;
    double lambda_e = 0.05;
    double lambda_u = 1.0;
    bool include_self = false;
    std::vector<int> orders{1, 2};

    void validate() const;
};

// Precomputed shaping outputs: everything the training loop needs, built once
// before policy learning.
struct ShapedRewardTable {
    Matrix r_tilde;             // kNN reward
    Matrix r_shaped;            // after the uncertainty variant, before entropy
    std::vector<double> p_u;    // mean neighbor distance per user
    EntropyTable entropy;
    double lambda_e = 0.0;
    double lambda_u = 0.0;
    UncertaintyVariant variant;
    RewardRange reward_range;
    long inverse_clamp_events = 0;

    double shaped(int u, int i) const {
        ++read_count_;
        return r_shaped(u, i);
    }
    long read_count() const { return read_count_; }

private:
    mutable long read_count_ = 0;  // instrumentation: evaluation must never read this table
};

ShapedRewardTable build_shaped_table(const InteractionLog& log, const CategoryMap& cats, const UserFeatures& feats,
                                     const WorldModelEnsemble& fallback, const ShapingParams& params,
                                     uint64_t seed);

// CSV inspection dumps.
void export_shaped_csv(const ShapedRewardTable& table, const std::string& path);
void export_entropy_csv(const EntropyTable& table, const std::string& path);

}  // namespace roler
