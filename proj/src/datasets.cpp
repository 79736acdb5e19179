#include "roler/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "roler/rng.hpp"

namespace roler {

bool FeedbackMatrix::fully_observed() const {
    return std::all_of(mask.begin(), mask.end(), [](uint8_t m) { return m != 0; });
}

double FeedbackMatrix::observed_fraction() const {
    if (mask.empty()) return 0.0;
    size_t n = 0;
    for (uint8_t m : mask) n += (m != 0);
    return static_cast<double>(n) / static_cast<double>(mask.size());
}

void FeedbackMatrix::validate() const {
    if (values.rows() != n_users || values.cols() != n_items)
        throw precondition_error("feedback matrix dimensions do not match values");
    if (mask.size() != static_cast<size_t>(n_users) * n_items)
        throw precondition_error("feedback matrix mask size mismatch");
    if (reward_range.min_r > reward_range.max_r)
        throw precondition_error("feedback matrix reward range inverted");
    for (int u = 0; u < n_users; ++u)
        for (int i = 0; i < n_items; ++i)
            if (observed(u, i) && !reward_range.contains(values(u, i)))
                throw precondition_error("observed value out of reward range at (" + std::to_string(u) + "," +
                                         std::to_string(i) + ")");
}

FeedbackMatrix FeedbackMatrix::zeros(int n_users, int n_items, RewardRange range, bool observed_all) {
    FeedbackMatrix m;
    m.n_users = n_users;
    m.n_items = n_items;
    m.values = Matrix(n_users, n_items, 0.0);
    m.mask.assign(static_cast<size_t>(n_users) * n_items, observed_all ? 1 : 0);
    m.reward_range = range;
    return m;
}

std::vector<int> InteractionLog::users_present() const {
    std::vector<uint8_t> seen(n_users, 0);
    for (const auto& e : events) seen[e.user] = 1;
    std::vector<int> out;
    for (int u = 0; u < n_users; ++u)
        if (seen[u]) out.push_back(u);
    return out;
}

void InteractionLog::validate() const {
    long last_ts = 0;
    int last_user = -1;
    for (const auto& e : events) {
        if (e.user < 0 || e.user >= n_users) throw precondition_error("log event user index out of range");
        if (e.item < 0 || e.item >= n_items) throw precondition_error("log event item index out of range");
        if (!reward_range.contains(e.reward)) throw precondition_error("log event reward out of range");
        if (e.user == last_user && e.timestep <= last_ts)
            throw precondition_error("log timesteps not strictly increasing for user " + std::to_string(e.user));
        if (e.user < last_user) throw precondition_error("log events not sorted by user");
        last_user = e.user;
        last_ts = e.timestep;
    }
}

int majority_category_of(const InteractionLog& log, const std::vector<int>& item_category, int n_categories) {
    std::vector<long> counts(n_categories, 0);
    for (const auto& e : log.events) counts[item_category[e.item]] += 1;
    int best = 0;
    for (int c = 1; c < n_categories; ++c)
        if (counts[c] > counts[best]) best = c;
    return best;
}

CategoryMap make_category_map(std::vector<int> item_category, int n_categories, const InteractionLog& log) {
    CategoryMap cats;
    cats.item_category = std::move(item_category);
    cats.n_categories = n_categories;
    cats.majority_category = majority_category_of(log, cats.item_category, n_categories);
    return cats;
}

void SyntheticConfig::validate() const {
    if (n_users < 1) throw config_error("n_users", "must be >= 1");
    if (n_items < 1) throw config_error("n_items", "must be >= 1");
    if (n_clusters < 1 || n_clusters > n_users) throw config_error("n_clusters", "must be in [1, n_users]");
    if (n_categories < 1 || n_categories > n_items) throw config_error("n_categories", "must be in [1, n_items]");
    if (within_cluster_reward_noise < 0) throw config_error("within_cluster_reward_noise", "must be >= 0");
    if (observation_noise < 0) throw config_error("observation_noise", "must be >= 0");
    if (log_density <= 0 || log_density > 1) throw config_error("log_density", "must be in (0, 1]");
    if (reward_range.min_r >= reward_range.max_r) throw config_error("reward_range", "min must be < max");
    long total = static_cast<long>(n_users) * n_items;
    long cells = std::lround(log_density * static_cast<double>(total));
    if (cells < n_users) throw config_error("log_density", "too small to give every user at least one event");
}

SyntheticDataset generate_synthetic(const SyntheticConfig& cfg) {
    cfg.validate();
    Rng root(cfg.seed);

    SyntheticDataset ds;
    ds.gt = FeedbackMatrix::zeros(cfg.n_users, cfg.n_items, cfg.reward_range, /*observed_all=*/true);

    // Cluster prototypes and per-user true rows.
    Matrix proto(cfg.n_clusters, cfg.n_items);
    Rng proto_rng = root.split("prototypes");
    for (int c = 0; c < cfg.n_clusters; ++c)
        for (int i = 0; i < cfg.n_items; ++i)
            proto(c, i) = proto_rng.uniform(cfg.reward_range.min_r, cfg.reward_range.max_r);

    ds.cluster_of.resize(cfg.n_users);
    Rng row_rng = root.split("user_rows");
    for (int u = 0; u < cfg.n_users; ++u) {
        int c = u % cfg.n_clusters;
        ds.cluster_of[u] = c;
        for (int i = 0; i < cfg.n_items; ++i) {
            double v = proto(c, i);
            if (cfg.within_cluster_reward_noise > 0) v += row_rng.normal(0.0, cfg.within_cluster_reward_noise);
            ds.gt.values(u, i) = cfg.reward_range.clip(v);
        }
    }

    // Logged cells: one guaranteed cell per user, remainder sampled uniformly
    // from the rest so the global count hits round(density * cells) exactly.
    long total_cells = static_cast<long>(cfg.n_users) * cfg.n_items;
    long target = std::lround(cfg.log_density * static_cast<double>(total_cells));
    std::vector<std::vector<int>> items_of(cfg.n_users);
    std::vector<uint8_t> taken(total_cells, 0);
    Rng cell_rng = root.split("log_cells");
    for (int u = 0; u < cfg.n_users; ++u) {
        int i = static_cast<int>(cell_rng.integer(cfg.n_items));
        items_of[u].push_back(i);
        taken[static_cast<size_t>(u) * cfg.n_items + i] = 1;
    }
    std::vector<long> rest;
    rest.reserve(total_cells - cfg.n_users);
    for (long c = 0; c < total_cells; ++c)
        if (!taken[c]) rest.push_back(c);
    cell_rng.shuffle(rest);
    for (long j = 0; j < target - cfg.n_users; ++j) {
        long c = rest[j];
        items_of[c / cfg.n_items].push_back(static_cast<int>(c % cfg.n_items));
    }

    Rng order_rng = root.split("log_order");
    Rng obs_rng = root.split("observation_noise");
    ds.log.n_users = cfg.n_users;
    ds.log.n_items = cfg.n_items;
    ds.log.reward_range = cfg.reward_range;
    for (int u = 0; u < cfg.n_users; ++u) {
        order_rng.shuffle(items_of[u]);
        long t = 0;
        for (int i : items_of[u]) {
            double r = ds.gt.values(u, i);
            if (cfg.observation_noise > 0) r += obs_rng.normal(0.0, cfg.observation_noise);
            ds.log.events.push_back({u, i, cfg.reward_range.clip(r), t++});
        }
    }

    std::vector<int> item_category(cfg.n_items);
    for (int i = 0; i < cfg.n_items; ++i) item_category[i] = i % cfg.n_categories;
    ds.cats = make_category_map(std::move(item_category), cfg.n_categories, ds.log);

    ds.feats = history_row_features(ds.log);
    return ds;
}

UserFeatures history_row_features(const InteractionLog& log) {
    if (log.events.empty()) throw precondition_error("cannot build history features from an empty log");
    FeedbackMatrix obs = observed_matrix_from_log(log);

    double global_sum = 0.0;
    long global_n = 0;
    for (const auto& e : log.events) {
        global_sum += e.reward;
        ++global_n;
    }
    double global_mean = global_sum / static_cast<double>(global_n);

    UserFeatures feats;
    feats.source = FeatureSource::interaction_history_row;
    feats.vectors = Matrix(log.n_users, log.n_items);
    for (int u = 0; u < log.n_users; ++u) {
        double sum = 0.0;
        int n = 0;
        for (int i = 0; i < log.n_items; ++i)
            if (obs.observed(u, i)) {
                sum += obs.values(u, i);
                ++n;
            }
        double fill = n > 0 ? sum / n : global_mean;
        for (int i = 0; i < log.n_items; ++i)
            feats.vectors(u, i) = obs.observed(u, i) ? obs.values(u, i) : fill;
    }
    return feats;
}

FeedbackMatrix observed_matrix_from_log(const InteractionLog& log) {
    FeedbackMatrix m = FeedbackMatrix::zeros(log.n_users, log.n_items, log.reward_range);
    Matrix counts(log.n_users, log.n_items, 0.0);
    for (const auto& e : log.events) {
        m.values(e.user, e.item) += e.reward;
        counts(e.user, e.item) += 1.0;
        m.set_observed(e.user, e.item, true);
    }
    for (int u = 0; u < log.n_users; ++u)
        for (int i = 0; i < log.n_items; ++i)
            if (counts(u, i) > 0) m.values(u, i) /= counts(u, i);
    return m;
}

namespace {

std::vector<std::vector<double>> read_numeric_rows(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    long line_no = 0;
    size_t width = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ss(line);
        std::vector<double> row;
        std::string tok;
        while (ss >> tok) {
            try {
                size_t pos = 0;
                double v = std::stod(tok, &pos);
                if (pos != tok.size()) throw std::invalid_argument(tok);
                row.push_back(v);
            } catch (const std::exception&) {
                throw parse_error(path, line_no, "non-numeric token '" + tok + "'");
            }
        }
        if (row.empty()) continue;  // blank line
        if (width == 0) width = row.size();
        if (row.size() != width)
            throw parse_error(path, line_no,
                              "ragged row: expected " + std::to_string(width) + " columns, got " +
                                  std::to_string(row.size()));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw parse_error(path, line_no == 0 ? 1 : line_no, "empty matrix file");
    return rows;
}

FeedbackMatrix matrix_from_rows(const std::string& path, const std::vector<std::vector<double>>& rows,
                                RewardRange range, bool zero_means_unobserved) {
    FeedbackMatrix m =
        FeedbackMatrix::zeros(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()), range);
    for (int u = 0; u < m.n_users; ++u)
        for (int i = 0; i < m.n_items; ++i) {
            double v = rows[u][i];
            bool observed = !zero_means_unobserved || v != 0.0;
            if (observed && !range.contains(v))
                throw parse_error(path, u + 1,
                                  "value " + format_double(v) + " outside reward range [" +
                                      format_double(range.min_r) + ", " + format_double(range.max_r) + "]");
            m.values(u, i) = observed ? v : 0.0;
            m.set_observed(u, i, observed);
        }
    return m;
}

void write_matrix_rows(const std::string& path, int rows, int cols,
                       const std::function<double(int, int)>& at) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            if (c) out << ' ';
            out << format_double(at(r, c));
        }
        out << '\n';
    }
    if (!out) throw io_error("failed writing " + path);
}

}  // namespace

FeedbackMatrix load_dense_matrix(const std::string& path, RewardRange range) {
    return matrix_from_rows(path, read_numeric_rows(path), range, /*zero_means_unobserved=*/true);
}

void save_dense_matrix(const FeedbackMatrix& m, const std::string& path) {
    write_matrix_rows(path, m.n_users, m.n_items,
                      [&](int u, int i) { return m.observed(u, i) ? m.values(u, i) : 0.0; });
}

FeedbackMatrix load_full_matrix(const std::string& path, RewardRange range) {
    return matrix_from_rows(path, read_numeric_rows(path), range, /*zero_means_unobserved=*/false);
}

void save_full_matrix(const FeedbackMatrix& m, const std::string& path) {
    if (!m.fully_observed()) throw precondition_error("save_full_matrix requires a fully observed matrix");
    write_matrix_rows(path, m.n_users, m.n_items, [&](int u, int i) { return m.values(u, i); });
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

long parse_long_field(const std::string& path, long line_no, const std::string& tok, const char* what) {
    try {
        size_t pos = 0;
        long v = std::stol(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw parse_error(path, line_no, std::string("bad ") + what + " '" + tok + "'");
    }
}

double parse_double_field(const std::string& path, long line_no, const std::string& tok, const char* what) {
    try {
        size_t pos = 0;
        double v = std::stod(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw parse_error(path, line_no, std::string("bad ") + what + " '" + tok + "'");
    }
}

}  // namespace

InteractionLog load_interaction_log(const std::string& path, int n_users, int n_items, RewardRange range) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw parse_error(path, 1, "missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "user,item,reward,timestep")
        throw parse_error(path, 1, "expected header 'user,item,reward,timestep', got '" + line + "'");

    InteractionLog log;
    log.n_users = n_users;
    log.n_items = n_items;
    log.reward_range = range;

    struct Row {
        LogEvent e;
        long line;
    };
    std::vector<Row> rows;
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != 4) throw parse_error(path, line_no, "expected 4 fields");
        LogEvent e;
        e.user = static_cast<int>(parse_long_field(path, line_no, fields[0], "user index"));
        e.item = static_cast<int>(parse_long_field(path, line_no, fields[1], "item index"));
        e.reward = parse_double_field(path, line_no, fields[2], "reward");
        e.timestep = parse_long_field(path, line_no, fields[3], "timestep");
        if (e.user < 0 || e.user >= n_users) throw parse_error(path, line_no, "user index out of range");
        if (e.item < 0 || e.item >= n_items) throw parse_error(path, line_no, "item index out of range");
        if (!range.contains(e.reward))
            throw parse_error(path, line_no, "reward " + format_double(e.reward) + " out of range");
        rows.push_back({e, line_no});
    }

    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.e.user != b.e.user) return a.e.user < b.e.user;
        return a.e.timestep < b.e.timestep;
    });
    for (size_t j = 1; j < rows.size(); ++j) {
        if (rows[j].e.user == rows[j - 1].e.user && rows[j].e.timestep == rows[j - 1].e.timestep)
            throw parse_error(path, rows[j].line,
                              "duplicate timestep " + std::to_string(rows[j].e.timestep) + " for user " +
                                  std::to_string(rows[j].e.user));
    }
    log.events.reserve(rows.size());
    for (const auto& r : rows) log.events.push_back(r.e);
    return log;
}

void save_interaction_log(const InteractionLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path);
    out << "user,item,reward,timestep\n";
    for (const auto& e : log.events)
        out << e.user << ',' << e.item << ',' << format_double(e.reward) << ',' << e.timestep << '\n';
    if (!out) throw io_error("failed writing " + path);
}

std::vector<int> load_categories(const std::string& path, int n_items) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw parse_error(path, 1, "missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "item,category")
        throw parse_error(path, 1, "expected header 'item,category', got '" + line + "'");
    std::vector<int> cats(n_items, -1);
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != 2) throw parse_error(path, line_no, "expected 2 fields");
        long item = parse_long_field(path, line_no, fields[0], "item index");
        long cat = parse_long_field(path, line_no, fields[1], "category");
        if (item < 0 || item >= n_items) throw parse_error(path, line_no, "item index out of range");
        if (cat < 0) throw parse_error(path, line_no, "negative category");
        cats[item] = static_cast<int>(cat);
    }
    for (int i = 0; i < n_items; ++i)
        if (cats[i] < 0) throw parse_error(path, line_no, "item " + std::to_string(i) + " has no category");
    return cats;
}

void save_categories(const CategoryMap& cats, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path);
    out << "item,category\n";
    for (size_t i = 0; i < cats.item_category.size(); ++i) out << i << ',' << cats.item_category[i] << '\n';
    if (!out) throw io_error("failed writing " + path);
}

Matrix load_plain_matrix(const std::string& path) {
    auto rows = read_numeric_rows(path);
    Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) m(r, c) = rows[r][c];
    return m;
}

void save_plain_matrix(const Matrix& m, const std::string& path) {
    write_matrix_rows(path, m.rows(), m.cols(), [&](int r, int c) { return m(r, c); });
}

}  // namespace roler
