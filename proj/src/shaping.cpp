#include "roler/shaping.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "roler/rng.hpp"

namespace roler {

void NeighborSet::validate() const {
    if (static_cast<int>(neighbors.size()) != k) throw precondition_error("neighbor set size != k");
    for (size_t j = 1; j < neighbors.size(); ++j)
        if (neighbors[j].distance < neighbors[j - 1].distance)
            throw precondition_error("neighbor distances not ascending");
    for (const auto& n : neighbors)
        if (n.distance < 0) throw precondition_error("negative neighbor distance");
}

double cosine_distance(std::span<const double> a, std::span<const double> b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t j = 0; j < a.size(); ++j) {
        dot += a[j] * b[j];
        na += a[j] * a[j];
        nb += b[j] * b[j];
    }
    return 1.0 - dot / std::sqrt(na * nb);
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (size_t j = 0; j < a.size(); ++j) {
        double d = a[j] - b[j];
        s += d * d;
    }
    return std::sqrt(s);
}

namespace {

bool is_zero_vector(std::span<const double> v) {
    for (double x : v)
        if (x != 0.0) return false;
    return true;
}

}  // namespace

NeighborSet knn_neighbors(const UserFeatures& feats, std::span<const int> pool, int query, int k, Metric metric,
                          bool include_self) {
    if (k < 1) throw param_error("k must be >= 1");
    if (query < 0 || query >= feats.vectors.rows()) throw param_error("query user out of range");
    auto qv = feats.vectors.row(query);
    if (metric == Metric::cosine && is_zero_vector(qv))
        throw feature_error("user " + std::to_string(query) + " has a zero feature vector under cosine distance");

    std::vector<Neighbor> cands;
    cands.reserve(pool.size());
    for (int u : pool) {
        if (u == query && !include_self) continue;
        auto uv = feats.vectors.row(u);
        if (metric == Metric::cosine && is_zero_vector(uv))
            throw feature_error("user " + std::to_string(u) + " has a zero feature vector under cosine distance");
        double d = metric == Metric::cosine ? cosine_distance(qv, uv) : euclidean_distance(qv, uv);
        cands.push_back({u, d});
    }
    if (k > static_cast<int>(cands.size()))
        throw param_error("k=" + std::to_string(k) + " exceeds candidate pool size " +
                          std::to_string(cands.size()));

    std::sort(cands.begin(), cands.end(), [](const Neighbor& a, const Neighbor& b) {
        if (a.distance != b.distance) return a.distance < b.distance;
        return a.user < b.user;
    });
    cands.resize(k);

    NeighborSet ns;
    ns.query_user = query;
    ns.neighbors = std::move(cands);
    ns.k = k;
    ns.metric = metric;
    return ns;
}

std::vector<NeighborContribution> neighbor_contributions(const FeedbackMatrix& observed, const NeighborSet& nbrs,
                                                         int item) {
    std::vector<NeighborContribution> out;
    for (const auto& n : nbrs.neighbors)
        if (observed.observed(n.user, item)) out.push_back({n.user, n.distance, observed.values(n.user, item)});
    return out;
}

double shape_reward(const FeedbackMatrix& observed, const NeighborSet& nbrs, int item, double fallback) {
    nbrs.validate();
    double sum = 0.0;
    int n = 0;
    for (const auto& nb : nbrs.neighbors)
        if (observed.observed(nb.user, item)) {
            sum += observed.values(nb.user, item);
            ++n;
        }
    return n > 0 ? sum / n : fallback;
}

double knn_uncertainty(const NeighborSet& nbrs) {
    double s = 0.0;
    for (const auto& n : nbrs.neighbors) s += n.distance;
    return s / static_cast<double>(nbrs.neighbors.size());
}

double apply_uncertainty_variant(double r_tilde, const NeighborSet& nbrs, const UncertaintyVariant& v, Rng* rng,
                                 RewardRange range, std::span<const NeighborContribution> contribs,
                                 long* clamp_events) {
    if (v.lambda < 0) throw param_error("variant lambda must be >= 0");
    const double p_u = knn_uncertainty(nbrs);
    double out = r_tilde;
    switch (v.kind) {
        case VariantKind::multiplicative:
            out = r_tilde * (1.0 - p_u);
            break;
        case VariantKind::additive_mean:
            out = r_tilde - v.lambda * p_u;
            break;
        case VariantKind::additive_min: {
            double d = nbrs.neighbors.front().distance;  // ascending order
            out = r_tilde - v.lambda * d;
            break;
        }
        case VariantKind::additive_max: {
            double d = nbrs.neighbors.back().distance;
            out = r_tilde - v.lambda * d;
            break;
        }
        case VariantKind::inverse: {
            double denom = p_u;
            if (denom < kInverseDistanceFloor) {
                denom = kInverseDistanceFloor;
                if (clamp_events) ++*clamp_events;
            }
            out = r_tilde * v.lambda / denom;
            break;
        }
        case VariantKind::gaussian_sample: {
            double var = v.lambda * p_u;
            if (var > 0) {
                if (!rng) throw param_error("gaussian_sample variant requires an rng");
                out = rng->normal(r_tilde, std::sqrt(var));
            }
            break;
        }
        case VariantKind::weighted_average: {
            // Similarity weights max(0, 1-d) over neighbors that contributed;
            // falls back to the unweighted mean when all weights vanish.
            double wsum = 0.0, rsum = 0.0;
            for (const auto& c : contribs) {
                double w = std::max(0.0, 1.0 - c.distance);
                wsum += w;
                rsum += w * c.reward;
            }
            out = wsum > 0 ? rsum / wsum : r_tilde;
            break;
        }
    }
    return range.clip(out);
}

EntropyTable::EntropyTable(std::vector<int> orders, int n_categories)
    : orders_(std::move(orders)), n_categories_(n_categories) {
    std::sort(orders_.begin(), orders_.end());
}

double EntropyTable::max_entropy() const { return std::log(static_cast<double>(n_categories_)); }

double EntropyTable::order_entropy(int order, std::span<const int> recent_cats) const {
    if (static_cast<int>(recent_cats.size()) < order) return max_entropy();  // not enough history: unseen
    std::vector<int> pattern(recent_cats.end() - order, recent_cats.end());
    std::sort(pattern.begin(), pattern.end());
    auto it = entries_.find({order, pattern});
    return it == entries_.end() ? max_entropy() : it->second.entropy;
}

double EntropyTable::penalty(std::span<const int> recent_cats) const {
    double s = 0.0;
    for (int o : orders_) s += order_entropy(o, recent_cats);
    return s;
}

void EntropyTable::add_observation(int order, std::vector<int> pattern, int next_category) {
    std::sort(pattern.begin(), pattern.end());
    auto& entry = entries_[{order, std::move(pattern)}];
    if (entry.counts.empty()) entry.counts.assign(n_categories_, 0.0);
    entry.counts[next_category] += 1.0;
    entry.total += 1.0;
}

void EntropyTable::finalize() {
    for (auto& [key, entry] : entries_) {
        double h = 0.0;
        for (double c : entry.counts) {
            if (c <= 0.0) continue;
            double p = c / entry.total;
            h -= p * std::log(p);
        }
        entry.entropy = h;
    }
}

EntropyTable entropy_penalty(const InteractionLog& log, const CategoryMap& cats, const std::vector<int>& orders) {
    if (orders.empty()) throw param_error("entropy orders must be nonempty");
    for (int o : orders)
        if (o < 1) throw param_error("entropy orders must be >= 1");

    EntropyTable table(orders, cats.n_categories);
    // Per-user category sequences in timestep order (the log is sorted).
    std::vector<std::vector<int>> seq(log.n_users);
    for (const auto& e : log.events) seq[e.user].push_back(cats.item_category[e.item]);
    for (const auto& s : seq) {
        for (int o : table.orders()) {
            for (size_t t = static_cast<size_t>(o); t < s.size(); ++t) {
                std::vector<int> pattern(s.begin() + t - o, s.begin() + t);
                table.add_observation(o, std::move(pattern), s[t]);
            }
        }
    }
    table.finalize();
    return table;
}

double combined_reward(double r_tilde, double p_u, double p_e, double lambda_e, const UncertaintyVariant& v,
                       RewardRange range) {
    double base;
    switch (v.kind) {
        case VariantKind::multiplicative:
            base = r_tilde * (1.0 - p_u);
            break;
        case VariantKind::additive_mean:
            base = r_tilde - v.lambda * p_u;
            break;
        case VariantKind::inverse:
            base = r_tilde * v.lambda / std::max(p_u, kInverseDistanceFloor);
            break;
        default:
            throw param_error("scalar combined_reward only supports mean-distance variants");
    }
    return range.clip(base) + lambda_e * p_e;
}

double combined_reward(double r_tilde, const NeighborSet& nbrs, double p_e, double lambda_e,
                       const UncertaintyVariant& v, Rng* rng, RewardRange range,
                       std::span<const NeighborContribution> contribs) {
    return apply_uncertainty_variant(r_tilde, nbrs, v, rng, range, contribs) + lambda_e * p_e;
}

void ShapingParams::validate() const {
    if (k < 1) throw config_error("k", "must be >= 1");
    if (lambda_e < 0) throw config_error("lambda_e", "must be >= 0");
    if (lambda_u < 0) throw config_error("lambda_u", "must be >= 0");
    if (variant.lambda < 0) throw config_error("lambda_u", "must be >= 0");
    if (orders.empty()) throw config_error("orders", "must be nonempty");
    for (int o : orders)
        if (o < 1) throw config_error("orders", "entries must be >= 1");
}

ShapedRewardTable build_shaped_table(const InteractionLog& log, const CategoryMap& cats, const UserFeatures& feats,
                                     const WorldModelEnsemble& fallback, const ShapingParams& params,
                                     uint64_t seed) {
    params.validate();
    const int n_users = log.n_users;
    const int n_items = log.n_items;
    FeedbackMatrix obs = observed_matrix_from_log(log);
    std::vector<int> pool = log.users_present();

    ShapedRewardTable table;
    table.r_tilde = Matrix(n_users, n_items);
    table.r_shaped = Matrix(n_users, n_items);
    table.p_u.assign(n_users, 0.0);
    table.lambda_e = params.lambda_e;
    table.lambda_u = params.lambda_u;
    table.variant = params.variant;
    table.reward_range = log.reward_range;

    Rng gauss = Rng(seed).split("variant_gauss");
    for (int u = 0; u < n_users; ++u) {
        NeighborSet nbrs = knn_neighbors(feats, pool, u, params.k, params.metric, params.include_self);
        table.p_u[u] = knn_uncertainty(nbrs);
        for (int i = 0; i < n_items; ++i) {
            auto contribs = neighbor_contributions(obs, nbrs, i);
            double r_tilde;
            if (contribs.empty()) {
                r_tilde = predict_reward_mean(fallback, u, i);
            } else {
                double s = 0.0;
                for (const auto& c : contribs) s += c.reward;
                r_tilde = s / static_cast<double>(contribs.size());
            }
            table.r_tilde(u, i) = r_tilde;
            table.r_shaped(u, i) = apply_uncertainty_variant(r_tilde, nbrs, params.variant, &gauss,
                                                             log.reward_range, contribs,
                                                             &table.inverse_clamp_events);
        }
    }
    table.entropy = entropy_penalty(log, cats, params.orders);
    return table;
}

void export_shaped_csv(const ShapedRewardTable& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path);
    out << "user,item,r_tilde,p_u\n";
    for (int u = 0; u < table.r_tilde.rows(); ++u)
        for (int i = 0; i < table.r_tilde.cols(); ++i)
            out << u << ',' << i << ',' << format_double(table.r_tilde(u, i)) << ','
                << format_double(table.p_u[u]) << '\n';
    if (!out) throw io_error("failed writing " + path);
}

void export_entropy_csv(const EntropyTable& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path);
    out << "order,pattern,category,count,probability\n";
    for (const auto& [key, entry] : table.entries()) {
        const auto& [order, pattern] = key;
        std::string pat;
        for (size_t j = 0; j < pattern.size(); ++j) {
            if (j) pat += ';';
            pat += std::to_string(pattern[j]);
        }
        for (int c = 0; c < static_cast<int>(entry.counts.size()); ++c) {
            if (entry.counts[c] <= 0) continue;
            out << order << ',' << pat << ',' << c << ',' << format_double(entry.counts[c]) << ','
                << format_double(entry.counts[c] / entry.total) << '\n';
        }
    }
    if (!out) throw io_error("failed writing " + path);
}

}  // namespace roler
