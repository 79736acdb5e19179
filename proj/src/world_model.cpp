#include "roler/world_model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "roler/rng.hpp"

namespace roler {

double WorldModel::score(int u, int i) const {
    double s = global_bias + user_bias[u] + item_bias[i];
    auto eu = user_emb.row(u);
    auto ei = item_emb.row(i);
    for (int k = 0; k < dim(); ++k) s += eu[k] * ei[k];
    return s;
}

void WorldModel::validate() const {
    if (user_emb.cols() != item_emb.cols()) throw precondition_error("world model embedding dims differ");
    if (static_cast<int>(user_bias.size()) != n_users() || static_cast<int>(item_bias.size()) != n_items())
        throw precondition_error("world model bias sizes mismatch");
}

void WorldModelEnsemble::validate() const {
    if (members.empty()) throw precondition_error("ensemble must have at least one member");
    for (const auto& m : members) {
        m.validate();
        if (m.n_users() != members[0].n_users() || m.n_items() != members[0].n_items() ||
            m.dim() != members[0].dim())
            throw precondition_error("ensemble members disagree on dimensions");
        if (!(m.reward_range == reward_range)) throw precondition_error("ensemble reward range mismatch");
    }
}

void MFConfig::validate() const {
    if (d < 1) throw config_error("d", "embedding dim must be >= 1");
    if (learning_rate <= 0) throw config_error("learning_rate", "must be > 0");
    if (l2 < 0) throw config_error("l2", "must be >= 0");
    if (epochs < 1) throw config_error("epochs", "must be >= 1");
}

MFFitResult fit_mf(const InteractionLog& log, const MFConfig& cfg) {
    cfg.validate();
    if (log.events.empty()) throw precondition_error("fit_mf requires a nonempty log");

    Rng root(cfg.seed);
    WorldModel m;
    m.reward_range = log.reward_range;
    m.user_emb = Matrix(log.n_users, cfg.d);
    m.item_emb = Matrix(log.n_items, cfg.d);
    m.user_bias.assign(log.n_users, 0.0);
    m.item_bias.assign(log.n_items, 0.0);

    Rng init = root.split("init");
    double scale = 0.1 / std::sqrt(static_cast<double>(cfg.d));
    for (int u = 0; u < log.n_users; ++u)
        for (int k = 0; k < cfg.d; ++k) m.user_emb(u, k) = init.normal(0.0, scale);
    for (int i = 0; i < log.n_items; ++i)
        for (int k = 0; k < cfg.d; ++k) m.item_emb(i, k) = init.normal(0.0, scale);

    double sum = 0.0;
    for (const auto& e : log.events) sum += e.reward;
    m.global_bias = sum / static_cast<double>(log.events.size());

    std::vector<size_t> order(log.events.size());
    for (size_t j = 0; j < order.size(); ++j) order[j] = j;

    MFFitResult result;
    const double lr = cfg.learning_rate;
    const double l2 = cfg.l2;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng = root.split("epoch", static_cast<uint64_t>(epoch));
        shuffle_rng.shuffle(order);
        for (size_t j : order) {
            const auto& e = log.events[j];
            double err = e.reward - m.score(e.user, e.item);
            auto eu = m.user_emb.row(e.user);
            auto ei = m.item_emb.row(e.item);
            for (int k = 0; k < cfg.d; ++k) {
                double pu = eu[k], qi = ei[k];
                eu[k] += lr * (err * qi - l2 * pu);
                ei[k] += lr * (err * pu - l2 * qi);
            }
            m.user_bias[e.user] += lr * (err - l2 * m.user_bias[e.user]);
            m.item_bias[e.item] += lr * (err - l2 * m.item_bias[e.item]);
            m.global_bias += lr * err;
        }
        double sq = 0.0;
        for (const auto& e : log.events) {
            double err = e.reward - m.score(e.user, e.item);
            sq += err * err;
        }
        result.epoch_rmse.push_back(std::sqrt(sq / static_cast<double>(log.events.size())));
    }
    result.train_rmse = result.epoch_rmse.back();
    result.model = std::move(m);
    return result;
}

WorldModelEnsemble fit_mf_ensemble(const InteractionLog& log, const MFConfig& cfg, int members) {
    if (members < 1) throw param_error("ensemble size must be >= 1");
    WorldModelEnsemble ens;
    ens.reward_range = log.reward_range;
    Rng root(cfg.seed);
    for (int j = 0; j < members; ++j) {
        MFConfig c = cfg;
        c.seed = root.split("member", static_cast<uint64_t>(j)).seed();
        ens.members.push_back(fit_mf(log, c).model);
    }
    return ens;
}

double predict_reward_mean(const WorldModelEnsemble& ens, int u, int i) {
    double s = 0.0;
    for (const auto& m : ens.members) s += m.predict(u, i);
    return ens.reward_range.clip(s / static_cast<double>(ens.members.size()));
}

UncertaintyEstimate ensemble_uncertainty(const WorldModelEnsemble& ens, int u, int i) {
    UncertaintyEstimate est;
    const size_t n = ens.members.size();
    if (n < 2) {
        est.degenerate = true;
        return est;
    }
    double mean = 0.0;
    for (const auto& m : ens.members) mean += m.predict(u, i);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (const auto& m : ens.members) {
        double d = m.predict(u, i) - mean;
        var += d * d;
    }
    est.variance = var / static_cast<double>(n);
    return est;
}

WorldModelEnsemble make_noisy_oracle(const FeedbackMatrix& gt, double sigma, double bias, uint64_t seed) {
    return make_noisy_oracle_ensemble(gt, sigma, bias, seed, 1);
}

WorldModelEnsemble make_noisy_oracle_ensemble(const FeedbackMatrix& gt, double sigma, double bias,
                                              uint64_t seed, int members) {
    if (!gt.fully_observed()) throw precondition_error("noisy oracle requires a fully observed matrix");
    if (sigma < 0) throw param_error("oracle sigma must be >= 0");
    if (members < 1) throw param_error("ensemble size must be >= 1");

    WorldModelEnsemble ens;
    ens.reward_range = gt.reward_range;
    Rng root(seed);
    for (int j = 0; j < members; ++j) {
        Rng noise = root.split("oracle_noise", static_cast<uint64_t>(j));
        WorldModel m;
        m.reward_range = gt.reward_range;
        m.user_emb = Matrix(gt.n_users, gt.n_items);
        m.item_emb = Matrix(gt.n_items, gt.n_items);  // one-hot rows
        m.user_bias.assign(gt.n_users, 0.0);
        m.item_bias.assign(gt.n_items, 0.0);
        for (int u = 0; u < gt.n_users; ++u)
            for (int i = 0; i < gt.n_items; ++i) {
                double v = gt.values(u, i) + bias;
                if (sigma > 0) v += noise.normal(0.0, sigma);
                m.user_emb(u, i) = v;
            }
        for (int i = 0; i < gt.n_items; ++i) m.item_emb(i, i) = 1.0;
        ens.members.push_back(std::move(m));
    }
    return ens;
}

namespace {

void write_vector(std::ofstream& out, const std::vector<double>& v) {
    for (size_t j = 0; j < v.size(); ++j) {
        if (j) out << ' ';
        out << format_double(v[j]);
    }
    out << '\n';
}

void write_matrix(std::ofstream& out, const Matrix& m) {
    for (int r = 0; r < m.rows(); ++r) {
        for (int c = 0; c < m.cols(); ++c) {
            if (c) out << ' ';
            out << format_double(m(r, c));
        }
        out << '\n';
    }
}

Matrix read_matrix(std::ifstream& in, int rows, int cols, const std::string& path) {
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            if (!(in >> m(r, c))) throw io_error("truncated model file " + path);
    return m;
}

}  // namespace

void save_world_model(const WorldModel& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path);
    out << "roler-world-model v1\n";
    out << m.n_users() << ' ' << m.n_items() << ' ' << m.dim() << '\n';
    out << format_double(m.reward_range.min_r) << ' ' << format_double(m.reward_range.max_r) << '\n';
    out << format_double(m.global_bias) << '\n';
    write_vector(out, m.user_bias);
    write_vector(out, m.item_bias);
    write_matrix(out, m.user_emb);
    write_matrix(out, m.item_emb);
    if (!out) throw io_error("failed writing " + path);
}

WorldModel load_world_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path);
    std::string magic, version;
    in >> magic >> version;
    if (magic != "roler-world-model" || version != "v1")
        throw parse_error(path, 1, "not a world model checkpoint");
    int n_users = 0, n_items = 0, d = 0;
    in >> n_users >> n_items >> d;
    WorldModel m;
    in >> m.reward_range.min_r >> m.reward_range.max_r;
    in >> m.global_bias;
    m.user_bias.resize(n_users);
    for (auto& b : m.user_bias) in >> b;
    m.item_bias.resize(n_items);
    for (auto& b : m.item_bias) in >> b;
    m.user_emb = read_matrix(in, n_users, d, path);
    m.item_emb = read_matrix(in, n_items, d, path);
    if (!in) throw io_error("truncated model file " + path);
    return m;
}

}  // namespace roler
