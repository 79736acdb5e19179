#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "roler/datasets.hpp"
#include "roler/rng.hpp"

using namespace roler;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

double row_distance(const FeedbackMatrix& m, int u, int v) {
    double s = 0.0;
    for (int i = 0; i < m.n_items; ++i) {
        double d = m.values(u, i) - m.values(v, i);
        s += d * d;
    }
    return std::sqrt(s);
}

}  // namespace

TEST_CASE("generate_synthetic: zero-noise single cluster gives identical rows") {
    SyntheticConfig cfg;
    cfg.n_users = 10;
    cfg.n_items = 8;
    cfg.n_clusters = 1;
    cfg.n_categories = 4;
    cfg.within_cluster_reward_noise = 0.0;
    cfg.observation_noise = 0.0;
    cfg.log_density = 0.5;
    cfg.seed = 5;
    SyntheticDataset ds = generate_synthetic(cfg);
    for (int u = 1; u < cfg.n_users; ++u)
        for (int i = 0; i < cfg.n_items; ++i) CHECK(ds.gt.values(u, i) == ds.gt.values(0, i));

    // With sigma_c = sigma_o = 0 every log reward equals the prototype value.
    for (const auto& e : ds.log.events) CHECK(e.reward == ds.gt.values(0, e.item));
}

TEST_CASE("generate_synthetic: determinism and log density") {
    SyntheticConfig cfg;
    cfg.n_users = 30;
    cfg.n_items = 20;
    cfg.n_clusters = 3;
    cfg.n_categories = 5;
    cfg.seed = 7;
    cfg.log_density = 0.37;
    SyntheticDataset a = generate_synthetic(cfg);
    SyntheticDataset b = generate_synthetic(cfg);
    CHECK(a.gt.values == b.gt.values);
    CHECK(a.log == b.log);
    CHECK(a.cats.item_category == b.cats.item_category);
    CHECK(a.feats.vectors == b.feats.vectors);

    double frac = static_cast<double>(a.log.events.size()) / (cfg.n_users * cfg.n_items);
    CHECK(std::abs(frac - cfg.log_density) <= 1.0 / (cfg.n_users * cfg.n_items));

    // Every user logged at least once.
    CHECK(a.log.users_present().size() == static_cast<size_t>(cfg.n_users));
    a.log.validate();
}

TEST_CASE("generate_synthetic: planted clusters are tighter within than across") {
    SyntheticConfig cfg;
    cfg.n_users = 60;
    cfg.n_items = 40;
    cfg.n_clusters = 3;
    cfg.within_cluster_reward_noise = 0.05;
    cfg.observation_noise = 0.0;
    cfg.log_density = 0.4;
    cfg.seed = 13;
    SyntheticDataset ds = generate_synthetic(cfg);

    // Oracle: exhaustive pairwise distances.
    double within = 0.0, across = 0.0;
    long n_within = 0, n_across = 0;
    for (int u = 0; u < cfg.n_users; ++u)
        for (int v = u + 1; v < cfg.n_users; ++v) {
            double d = row_distance(ds.gt, u, v);
            if (ds.cluster_of[u] == ds.cluster_of[v]) {
                within += d;
                ++n_within;
            } else {
                across += d;
                ++n_across;
            }
        }
    CHECK(within / n_within < across / n_across);
}

TEST_CASE("generate_synthetic rejects bad configs naming the field") {
    SyntheticConfig cfg;
    cfg.n_clusters = 100;
    cfg.n_users = 10;
    try {
        generate_synthetic(cfg);
        FAIL("expected config_error");
    } catch (const config_error& e) {
        CHECK(e.field == "n_clusters");
    }

    SyntheticConfig dense;
    dense.n_users = 10;
    dense.n_items = 100;
    dense.log_density = 0.0001;  // rounds to fewer cells than users
    try {
        generate_synthetic(dense);
        FAIL("expected config_error");
    } catch (const config_error& e) {
        CHECK(e.field == "log_density");
    }
}

TEST_CASE("load_dense_matrix: minimal parse and mask semantics") {
    std::string path = temp_path("roler_dense_min.txt");
    write_file(path, "1 0\n0 5\n");
    FeedbackMatrix m = load_dense_matrix(path, {1.0, 5.0});
    CHECK(m.n_users == 2);
    CHECK(m.n_items == 2);
    CHECK(m.observed(0, 0));
    CHECK(!m.observed(0, 1));
    CHECK(!m.observed(1, 0));
    CHECK(m.observed(1, 1));
    CHECK(m.values(0, 0) == 1.0);
    CHECK(m.values(1, 1) == 5.0);
}

TEST_CASE("load_dense_matrix error paths carry line numbers") {
    std::string empty = temp_path("roler_dense_empty.txt");
    write_file(empty, "");
    CHECK_THROWS_AS(load_dense_matrix(empty, {0, 1}), parse_error);

    std::string ragged = temp_path("roler_dense_ragged.txt");
    write_file(ragged, "1 2 3\n1 2\n");
    try {
        load_dense_matrix(ragged, {0, 5});
        FAIL("expected parse_error");
    } catch (const parse_error& e) {
        CHECK(e.line == 2);
    }

    std::string bad_tok = temp_path("roler_dense_tok.txt");
    write_file(bad_tok, "1 2\n1 x\n");
    CHECK_THROWS_AS(load_dense_matrix(bad_tok, {0, 5}), parse_error);

    std::string out_of_range = temp_path("roler_dense_range.txt");
    write_file(out_of_range, "1 9\n");
    CHECK_THROWS_AS(load_dense_matrix(out_of_range, {1, 5}), parse_error);
}

TEST_CASE("load_dense_matrix: coat-scale observed fraction is exact") {
    // 290x300 with exactly 7000 nonzeros mirrors the Coat training coverage.
    const int rows = 290, cols = 300, nonzeros = 7000;
    std::string path = temp_path("roler_dense_coat.txt");
    Rng rng(99);
    std::vector<int> cells = rng.sample_without_replacement(rows * cols, nonzeros);
    std::vector<uint8_t> on(static_cast<size_t>(rows) * cols, 0);
    for (int c : cells) on[c] = 1;
    {
        std::ofstream out(path);
        long planted = 0;
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) {
                if (c) out << ' ';
                if (on[static_cast<size_t>(r) * cols + c]) {
                    out << 1 + static_cast<int>(rng.integer(5));
                    ++planted;
                } else {
                    out << 0;
                }
            }
            out << '\n';
        }
        REQUIRE(planted == nonzeros);
    }
    FeedbackMatrix m = load_dense_matrix(path, {1, 5});
    // Independent count oracle: nonzeros were planted by construction.
    CHECK(m.observed_fraction() == doctest::Approx(7000.0 / 87000.0).epsilon(1e-15));
    CHECK(std::abs(m.observed_fraction() - 0.08046) < 1e-4);
}

TEST_CASE("interaction log: parse, order, duplicates") {
    std::string path = temp_path("roler_log_min.csv");
    write_file(path, "user,item,reward,timestep\n0,1,0.5,0\n0,2,1.0,1\n");
    InteractionLog log = load_interaction_log(path, 3, 4, {0, 1});
    REQUIRE(log.events.size() == 2);
    CHECK(log.events[0].item == 1);
    CHECK(log.events[1].item == 2);

    std::string dup = temp_path("roler_log_dup.csv");
    write_file(dup, "user,item,reward,timestep\n0,1,0.5,0\n0,2,1.0,0\n");
    CHECK_THROWS_AS(load_interaction_log(dup, 3, 4, {0, 1}), parse_error);

    std::string bad_idx = temp_path("roler_log_idx.csv");
    write_file(bad_idx, "user,item,reward,timestep\n9,1,0.5,0\n");
    CHECK_THROWS_AS(load_interaction_log(bad_idx, 3, 4, {0, 1}), parse_error);

    std::string bad_header = temp_path("roler_log_header.csv");
    write_file(bad_header, "user,item,value,timestep\n");
    CHECK_THROWS_AS(load_interaction_log(bad_header, 3, 4, {0, 1}), parse_error);

    // Out-of-order rows are sorted by (user, timestep).
    std::string unordered = temp_path("roler_log_unordered.csv");
    write_file(unordered, "user,item,reward,timestep\n1,0,0.5,4\n0,2,1.0,1\n1,3,0.25,2\n");
    InteractionLog sorted = load_interaction_log(unordered, 3, 4, {0, 1});
    CHECK(sorted.events[0].user == 0);
    CHECK(sorted.events[1].item == 3);
    CHECK(sorted.events[2].item == 0);
}

TEST_CASE("round trips are lossless") {
    SyntheticConfig cfg;
    cfg.n_users = 12;
    cfg.n_items = 9;
    cfg.n_clusters = 2;
    cfg.n_categories = 3;
    cfg.seed = 21;
    cfg.log_density = 0.5;
    SyntheticDataset ds = generate_synthetic(cfg);

    SUBCASE("interaction log") {
        std::string path = temp_path("roler_rt_log.csv");
        save_interaction_log(ds.log, path);
        InteractionLog back = load_interaction_log(path, cfg.n_users, cfg.n_items, cfg.reward_range);
        CHECK(back == ds.log);
    }
    SUBCASE("full matrix") {
        std::string path = temp_path("roler_rt_gt.txt");
        save_full_matrix(ds.gt, path);
        FeedbackMatrix back = load_full_matrix(path, cfg.reward_range);
        CHECK(back.values == ds.gt.values);
        CHECK(back.mask == ds.gt.mask);
    }
    SUBCASE("masked dense matrix") {
        FeedbackMatrix obs = observed_matrix_from_log(ds.log);
        obs.reward_range = {0.0, 1.0};
        // Dense files reserve 0 for unobserved; shift into [1,2] first.
        for (int u = 0; u < obs.n_users; ++u)
            for (int i = 0; i < obs.n_items; ++i)
                if (obs.observed(u, i)) obs.values(u, i) += 1.0;
        obs.reward_range = {1.0, 2.0};
        std::string path = temp_path("roler_rt_dense.txt");
        save_dense_matrix(obs, path);
        FeedbackMatrix back = load_dense_matrix(path, obs.reward_range);
        CHECK(back.values == obs.values);
        CHECK(back.mask == obs.mask);
    }
    SUBCASE("categories") {
        std::string path = temp_path("roler_rt_cats.csv");
        save_categories(ds.cats, path);
        std::vector<int> back = load_categories(path, cfg.n_items);
        CHECK(back == ds.cats.item_category);
    }
    SUBCASE("feature matrix") {
        std::string path = temp_path("roler_rt_feats.txt");
        save_plain_matrix(ds.feats.vectors, path);
        Matrix back = load_plain_matrix(path);
        CHECK(back == ds.feats.vectors);
    }
}

TEST_CASE("majority category follows training-log counts with smallest-index ties") {
    InteractionLog log;
    log.n_users = 2;
    log.n_items = 4;
    log.reward_range = {0, 1};
    log.events = {{0, 0, 0.5, 0}, {0, 1, 0.5, 1}, {1, 2, 0.5, 0}, {1, 3, 0.5, 1}};
    // categories: items 0,1 -> cat 1; items 2,3 -> cat 0. Two events each: tie -> 0.
    CHECK(majority_category_of(log, {1, 1, 0, 0}, 2) == 0);
    // Shift one event to make cat 1 dominant.
    log.events.push_back({1, 1, 0.5, 2});
    CHECK(majority_category_of(log, {1, 1, 0, 0}, 2) == 1);
}

TEST_CASE("history features impute with the user's observed mean") {
    InteractionLog log;
    log.n_users = 2;
    log.n_items = 3;
    log.reward_range = {0, 1};
    log.events = {{0, 0, 0.2, 0}, {0, 2, 0.8, 1}, {1, 1, 1.0, 0}};
    UserFeatures f = history_row_features(log);
    CHECK(f.vectors(0, 0) == doctest::Approx(0.2));
    CHECK(f.vectors(0, 1) == doctest::Approx(0.5));  // mean of 0.2, 0.8
    CHECK(f.vectors(0, 2) == doctest::Approx(0.8));
    CHECK(f.vectors(1, 0) == doctest::Approx(1.0));
    CHECK(f.vectors(1, 1) == doctest::Approx(1.0));
}
