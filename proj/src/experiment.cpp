#include "roler/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "roler/log.hpp"

namespace roler {

namespace fs = std::filesystem;

std::string method_name(Method m) {
    switch (m) {
        case Method::baseline_worldmodel: return "baseline_worldmodel";
        case Method::baseline_ensemble_dorl: return "baseline_ensemble_dorl";
        case Method::roler: return "roler";
        case Method::roler_without_kr: return "roler_without_kr";
        case Method::roler_without_ku: return "roler_without_ku";
        case Method::gt_oracle: return "gt_oracle";
    }
    return "?";
}

Method parse_method(const std::string& name) {
    if (name == "baseline_worldmodel") return Method::baseline_worldmodel;
    if (name == "baseline_ensemble_dorl") return Method::baseline_ensemble_dorl;
    if (name == "roler") return Method::roler;
    if (name == "roler_without_kr") return Method::roler_without_kr;
    if (name == "roler_without_ku") return Method::roler_without_ku;
    if (name == "gt_oracle") return Method::gt_oracle;
    throw config_error("experiment.method", "unknown method '" + name + "'");
}

std::string variant_name(VariantKind v) {
    switch (v) {
        case VariantKind::multiplicative: return "multiplicative";
        case VariantKind::additive_mean: return "additive_mean";
        case VariantKind::additive_min: return "additive_min";
        case VariantKind::additive_max: return "additive_max";
        case VariantKind::inverse: return "inverse";
        case VariantKind::gaussian_sample: return "gaussian_sample";
        case VariantKind::weighted_average: return "weighted_average";
    }
    return "?";
}

VariantKind parse_variant(const std::string& name) {
    if (name == "multiplicative") return VariantKind::multiplicative;
    if (name == "additive_mean") return VariantKind::additive_mean;
    if (name == "additive_min") return VariantKind::additive_min;
    if (name == "additive_max") return VariantKind::additive_max;
    if (name == "inverse") return VariantKind::inverse;
    if (name == "gaussian_sample") return VariantKind::gaussian_sample;
    if (name == "weighted_average") return VariantKind::weighted_average;
    throw config_error("shaping.variant", "unknown variant '" + name + "'");
}

void ExperimentConfig::validate() const {
    if (dataset_mode == DatasetMode::synthetic) synth.validate();
    if (wm_mode == WorldModelMode::noisy_oracle && oracle_sigma < 0)
        throw config_error("world_model.sigma", "must be >= 0");
    if (ensemble < 1) throw config_error("world_model.ensemble", "must be >= 1");
    shaping.validate();
    tracker.validate();
    a2c.validate();
    quit.validate();
    if (eval_episodes < 1) throw config_error("evaluation.episodes", "must be >= 1");
}

namespace {

const std::set<std::string>& experiment_schema() {
    static const std::set<std::string> schema = {
        "experiment.method", "experiment.seed",
        "dataset.mode", "dataset.n_users", "dataset.n_items", "dataset.n_clusters", "dataset.n_categories",
        "dataset.cluster_noise", "dataset.observation_noise", "dataset.log_density", "dataset.reward_min",
        "dataset.reward_max", "dataset.matrix", "dataset.log", "dataset.categories", "dataset.features",
        "world_model.mode", "world_model.ensemble", "world_model.sigma", "world_model.bias", "world_model.dim",
        "world_model.learning_rate", "world_model.l2", "world_model.epochs",
        "shaping.k", "shaping.metric", "shaping.variant", "shaping.lambda_u", "shaping.lambda_e",
        "shaping.features", "shaping.orders", "shaping.include_self",
        "tracker.kind", "tracker.window", "tracker.attention_dim", "tracker.attention_scale",
        "actions.init", "actions.dim",
        "a2c.epochs", "a2c.trajectories", "a2c.gamma", "a2c.actor_lr", "a2c.critic_lr", "a2c.hidden",
        "a2c.entropy_reg", "a2c.optimizer", "a2c.critic_target",
        "evaluation.episodes", "evaluation.quit_m", "evaluation.quit_n", "evaluation.max_len",
        "evaluation.greedy",
        "output.export_shaping",
        "ablate.methods", "ablate.variants", "ablate.ks", "ablate.seeds",
        "verify_bound.instances", "verify_bound.states", "verify_bound.actions", "verify_bound.gamma",
        "verify_bound.delta", "verify_bound.k", "verify_bound.clusters", "verify_bound.cluster_noise",
        "verify_bound.observation_noise",
    };
    return schema;
}

std::string comment_header(const KeyValueConfig& kv) {
    std::ostringstream ss;
    ss << "# config_hash=" << std::hex << kv.hash() << std::dec
       << " seed=" << kv.get_string_or("experiment.seed", "0");
    return ss.str();
}

}  // namespace

ExperimentConfig parse_experiment_config(const KeyValueConfig& kv) {
    kv.require_known_keys(experiment_schema());

    ExperimentConfig cfg;
    cfg.method = parse_method(kv.get_string("experiment.method"));
    cfg.seed = kv.get_u64_or("experiment.seed", 0);

    std::string ds_mode = kv.get_string_or("dataset.mode", "synthetic");
    if (ds_mode == "synthetic") {
        cfg.dataset_mode = DatasetMode::synthetic;
        cfg.synth.n_users = static_cast<int>(kv.get_long_or("dataset.n_users", 60));
        cfg.synth.n_items = static_cast<int>(kv.get_long_or("dataset.n_items", 40));
        cfg.synth.n_clusters = static_cast<int>(kv.get_long_or("dataset.n_clusters", 3));
        cfg.synth.n_categories = static_cast<int>(kv.get_long_or("dataset.n_categories", 10));
        cfg.synth.within_cluster_reward_noise = kv.get_double_or("dataset.cluster_noise", 0.05);
        cfg.synth.observation_noise = kv.get_double_or("dataset.observation_noise", 0.1);
        cfg.synth.log_density = kv.get_double_or("dataset.log_density", 0.3);
        cfg.synth.reward_range.min_r = kv.get_double_or("dataset.reward_min", 0.0);
        cfg.synth.reward_range.max_r = kv.get_double_or("dataset.reward_max", 1.0);
    } else if (ds_mode == "files") {
        cfg.dataset_mode = DatasetMode::files;
        cfg.matrix_path = kv.get_string("dataset.matrix");
        cfg.log_path = kv.get_string("dataset.log");
        cfg.categories_path = kv.get_string("dataset.categories");
        cfg.features_path = kv.get_string_or("dataset.features", "");
        cfg.synth.reward_range.min_r = kv.get_double_or("dataset.reward_min", 0.0);
        cfg.synth.reward_range.max_r = kv.get_double_or("dataset.reward_max", 1.0);
    } else {
        throw config_error("dataset.mode", "must be 'synthetic' or 'files'");
    }

    std::string wm_mode = kv.get_string_or("world_model.mode", "noisy_oracle");
    if (wm_mode == "mf") {
        cfg.wm_mode = WorldModelMode::mf;
        cfg.mf.d = static_cast<int>(kv.get_long_or("world_model.dim", 8));
        cfg.mf.learning_rate = kv.get_double_or("world_model.learning_rate", 0.05);
        cfg.mf.l2 = kv.get_double_or("world_model.l2", 1e-4);
        cfg.mf.epochs = static_cast<int>(kv.get_long_or("world_model.epochs", 50));
    } else if (wm_mode == "noisy_oracle") {
        cfg.wm_mode = WorldModelMode::noisy_oracle;
        cfg.oracle_sigma = kv.get_double_or("world_model.sigma", 0.0);
        cfg.oracle_bias = kv.get_double_or("world_model.bias", 0.0);
    } else {
        throw config_error("world_model.mode", "must be 'mf' or 'noisy_oracle'");
    }
    cfg.ensemble = static_cast<int>(kv.get_long_or("world_model.ensemble", 1));

    cfg.shaping.k = static_cast<int>(kv.get_long_or("shaping.k", 9));
    std::string metric = kv.get_string_or("shaping.metric", "cosine");
    if (metric == "cosine")
        cfg.shaping.metric = Metric::cosine;
    else if (metric == "euclidean")
        cfg.shaping.metric = Metric::euclidean;
    else
        throw config_error("shaping.metric", "must be 'cosine' or 'euclidean'");
    cfg.shaping.variant.kind = parse_variant(kv.get_string_or("shaping.variant", "multiplicative"));
    cfg.shaping.lambda_u = kv.get_double_or("shaping.lambda_u", 1.0);
    cfg.shaping.variant.lambda = cfg.shaping.lambda_u;
    cfg.shaping.lambda_e = kv.get_double_or("shaping.lambda_e", 0.05);
    cfg.shaping.include_self = kv.get_bool_or("shaping.include_self", false);
    if (kv.has("shaping.orders")) {
        cfg.shaping.orders.clear();
        for (long o : kv.get_long_list("shaping.orders")) cfg.shaping.orders.push_back(static_cast<int>(o));
    }
    std::string feats = kv.get_string_or("shaping.features", "history");
    if (feats == "history")
        cfg.feature_choice = FeatureChoice::history;
    else if (feats == "embedding")
        cfg.feature_choice = FeatureChoice::embedding;
    else if (feats == "file")
        cfg.feature_choice = FeatureChoice::file;
    else
        throw config_error("shaping.features", "must be 'history', 'embedding' or 'file'");

    std::string tracker = kv.get_string_or("tracker.kind", "average");
    if (tracker == "average")
        cfg.tracker.kind = TrackerKind::average;
    else if (tracker == "attention")
        cfg.tracker.kind = TrackerKind::attention;
    else
        throw config_error("tracker.kind", "must be 'average' or 'attention'");
    cfg.tracker.window = static_cast<int>(kv.get_long_or("tracker.window", 5));
    cfg.tracker.attention_dim = static_cast<int>(kv.get_long_or("tracker.attention_dim", 16));
    cfg.tracker.attention_scale = kv.get_double_or("tracker.attention_scale", 0.1);
    cfg.tracker.attention_seed = cfg.seed;

    std::string action_init = kv.get_string_or("actions.init", "world_model_embeddings");
    if (action_init == "world_model_embeddings")
        cfg.action_init = ActionInit::world_model_embeddings;
    else if (action_init == "gaussian_random")
        cfg.action_init = ActionInit::gaussian_random;
    else
        throw config_error("actions.init", "must be 'world_model_embeddings' or 'gaussian_random'");
    cfg.action_dim = static_cast<int>(kv.get_long_or("actions.dim", 16));

    cfg.a2c.epochs = static_cast<int>(kv.get_long_or("a2c.epochs", 50));
    cfg.a2c.trajectories_per_epoch = static_cast<int>(kv.get_long_or("a2c.trajectories", 8));
    cfg.a2c.policy.gamma = kv.get_double_or("a2c.gamma", 0.9);
    cfg.a2c.policy.actor_lr = kv.get_double_or("a2c.actor_lr", 0.01);
    cfg.a2c.policy.critic_lr = kv.get_double_or("a2c.critic_lr", 0.01);
    cfg.a2c.policy.hidden = static_cast<int>(kv.get_long_or("a2c.hidden", 64));
    cfg.a2c.policy.entropy_reg = kv.get_double_or("a2c.entropy_reg", 0.01);
    std::string optimizer = kv.get_string_or("a2c.optimizer", "adam");
    if (optimizer == "adam")
        cfg.a2c.policy.optimizer = OptimizerKind::adam;
    else if (optimizer == "sgd")
        cfg.a2c.policy.optimizer = OptimizerKind::sgd;
    else
        throw config_error("a2c.optimizer", "must be 'adam' or 'sgd'");
    std::string target = kv.get_string_or("a2c.critic_target", "mc");
    if (target == "mc")
        cfg.a2c.policy.bootstrap_critic = false;
    else if (target == "bootstrap")
        cfg.a2c.policy.bootstrap_critic = true;
    else
        throw config_error("a2c.critic_target", "must be 'mc' or 'bootstrap'");

    cfg.eval_episodes = static_cast<int>(kv.get_long_or("evaluation.episodes", 20));
    cfg.quit.quit_m = static_cast<int>(kv.get_long_or("evaluation.quit_m", 0));
    cfg.quit.quit_n = static_cast<int>(kv.get_long_or("evaluation.quit_n", 4));
    cfg.quit.max_len = static_cast<int>(kv.get_long_or("evaluation.max_len", 30));
    cfg.eval_greedy = kv.get_bool_or("evaluation.greedy", false);
    cfg.export_shaping = kv.get_bool_or("output.export_shaping", false);

    cfg.validate();
    return cfg;
}

DatasetBundle load_dataset(const ExperimentConfig& cfg) {
    DatasetBundle bundle;
    if (cfg.dataset_mode == DatasetMode::synthetic) {
        SyntheticConfig synth = cfg.synth;
        synth.seed = Rng(cfg.seed).split("dataset").seed();
        SyntheticDataset ds = generate_synthetic(synth);
        bundle.gt = std::move(ds.gt);
        bundle.log = std::move(ds.log);
        bundle.cats = std::move(ds.cats);
        return bundle;
    }
    RewardRange range = cfg.synth.reward_range;
    bundle.gt = load_full_matrix(cfg.matrix_path, range);
    bundle.log = load_interaction_log(cfg.log_path, bundle.gt.n_users, bundle.gt.n_items, range);
    std::vector<int> item_cats = load_categories(cfg.categories_path, bundle.gt.n_items);
    int n_categories = *std::max_element(item_cats.begin(), item_cats.end()) + 1;
    bundle.cats = make_category_map(std::move(item_cats), n_categories, bundle.log);
    if (!cfg.features_path.empty()) {
        bundle.features.vectors = load_plain_matrix(cfg.features_path);
        bundle.features.source = FeatureSource::raw_static_features;
        if (bundle.features.vectors.rows() != bundle.gt.n_users)
            throw config_error("dataset.features", "feature rows do not match user count");
        bundle.has_file_features = true;
    }
    return bundle;
}

double rmse_vs_gt(const Matrix& predictions, const FeedbackMatrix& gt) {
    if (predictions.rows() != gt.n_users || predictions.cols() != gt.n_items)
        throw param_error("rmse_vs_gt shape mismatch");
    double sq = 0.0;
    for (int u = 0; u < gt.n_users; ++u)
        for (int i = 0; i < gt.n_items; ++i) {
            double d = predictions(u, i) - gt.values(u, i);
            sq += d * d;
        }
    return std::sqrt(sq / (static_cast<double>(gt.n_users) * gt.n_items));
}

double worldmodel_rmse(const WorldModelEnsemble& ens, const FeedbackMatrix& gt) {
    Matrix pred(gt.n_users, gt.n_items);
    for (int u = 0; u < gt.n_users; ++u)
        for (int i = 0; i < gt.n_items; ++i) pred(u, i) = predict_reward_mean(ens, u, i);
    return rmse_vs_gt(pred, gt);
}

namespace {

WorldModelEnsemble build_world_model(const ExperimentConfig& cfg, const DatasetBundle& data) {
    Rng root(cfg.seed);
    if (cfg.wm_mode == WorldModelMode::noisy_oracle)
        return make_noisy_oracle_ensemble(data.gt, cfg.oracle_sigma, cfg.oracle_bias,
                                          root.split("world_model").seed(), cfg.ensemble);
    MFConfig mf = cfg.mf;
    mf.seed = root.split("world_model").seed();
    return fit_mf_ensemble(data.log, mf, cfg.ensemble);
}

UserFeatures shaping_features(const ExperimentConfig& cfg, const DatasetBundle& data,
                              const WorldModelEnsemble& ens) {
    switch (cfg.feature_choice) {
        case FeatureChoice::history:
            return history_row_features(data.log);
        case FeatureChoice::embedding: {
            UserFeatures f;
            f.vectors = ens.members.front().user_emb;
            f.source = FeatureSource::world_model_embedding;
            return f;
        }
        case FeatureChoice::file:
            if (!data.has_file_features)
                throw config_error("shaping.features", "feature file requested but none was loaded");
            return data.features;
    }
    throw config_error("shaping.features", "unreachable");
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    DatasetBundle data = load_dataset(cfg);
    WorldModelEnsemble ens = build_world_model(cfg, data);

    const bool uses_knn_reward = cfg.method == Method::roler || cfg.method == Method::roler_without_ku;
    const bool uses_knn_uncertainty = cfg.method == Method::roler || cfg.method == Method::roler_without_kr;
    const bool uses_entropy = cfg.method != Method::baseline_worldmodel && cfg.method != Method::gt_oracle &&
                              cfg.shaping.lambda_e > 0;

    RunResult result;
    result.worldmodel_rmse = worldmodel_rmse(ens, data.gt);

    // Reward sources are precomputed before training starts.
    std::optional<ShapedRewardTable> shaped;
    std::optional<EntropyTable> entropy;
    Matrix base;  // methods other than `roler`/`gt_oracle` train on this table
    if (uses_knn_reward || uses_knn_uncertainty) {
        UserFeatures feats = shaping_features(cfg, data, ens);
        ShapingParams params = cfg.shaping;
        shaped = build_shaped_table(data.log, data.cats, feats, ens, params,
                                    Rng(cfg.seed).split("shaping").seed());
        result.shaped_rmse = rmse_vs_gt(shaped->r_tilde, data.gt);
    }
    if (uses_entropy) entropy = entropy_penalty(data.log, data.cats, cfg.shaping.orders);

    switch (cfg.method) {
        case Method::gt_oracle:
        case Method::roler:
            break;  // env reads gt / the shaped table directly
        case Method::baseline_worldmodel: {
            base = Matrix(data.gt.n_users, data.gt.n_items);
            for (int u = 0; u < data.gt.n_users; ++u)
                for (int i = 0; i < data.gt.n_items; ++i) base(u, i) = predict_reward_mean(ens, u, i);
            break;
        }
        case Method::baseline_ensemble_dorl: {
            base = Matrix(data.gt.n_users, data.gt.n_items);
            for (int u = 0; u < data.gt.n_users; ++u)
                for (int i = 0; i < data.gt.n_items; ++i)
                    base(u, i) = predict_reward_mean(ens, u, i) -
                                 cfg.shaping.lambda_u * ensemble_uncertainty(ens, u, i).variance;
            break;
        }
        case Method::roler_without_kr: {
            base = Matrix(data.gt.n_users, data.gt.n_items);
            for (int u = 0; u < data.gt.n_users; ++u)
                for (int i = 0; i < data.gt.n_items; ++i)
                    base(u, i) = predict_reward_mean(ens, u, i) - cfg.shaping.lambda_u * shaped->p_u[u];
            break;
        }
        case Method::roler_without_ku: {
            base = Matrix(data.gt.n_users, data.gt.n_items);
            for (int u = 0; u < data.gt.n_users; ++u)
                for (int i = 0; i < data.gt.n_items; ++i)
                    base(u, i) = shaped->r_tilde(u, i) -
                                 cfg.shaping.lambda_u * ensemble_uncertainty(ens, u, i).variance;
            break;
        }
    }

    const EntropyTable* entropy_ptr = entropy ? &*entropy : nullptr;
    double lambda_e = uses_entropy ? cfg.shaping.lambda_e : 0.0;
    SimEnv train_env = [&]() -> SimEnv {
        if (cfg.method == Method::gt_oracle)
            return SimEnv(&data.gt.values, nullptr, &data.cats, cfg.quit, entropy_ptr, lambda_e);
        if (cfg.method == Method::roler)
            return SimEnv(nullptr, &*shaped, &data.cats, cfg.quit, entropy_ptr, lambda_e);
        return SimEnv(&base, nullptr, &data.cats, cfg.quit, entropy_ptr, lambda_e);
    }();

    const WorldModel* wm = &ens.members.front();
    ActionTable actions = init_actions(cfg.action_init == ActionInit::world_model_embeddings ? wm : nullptr,
                                       data.gt.n_items,
                                       cfg.action_init == ActionInit::world_model_embeddings ? 0 : cfg.action_dim,
                                       cfg.action_init, Rng(cfg.seed).split("actions").seed());

    std::vector<int> train_users = data.log.users_present();
    std::vector<int> eval_users(data.gt.n_users);
    for (int u = 0; u < data.gt.n_users; ++u) eval_users[u] = u;

    A2CConfig a2c = cfg.a2c;
    a2c.seed = Rng(cfg.seed).split("a2c").seed();
    TrackerConfig tracker = cfg.tracker;
    tracker.attention_seed = Rng(cfg.seed).split("tracker").seed();

    Rng eval_root = Rng(cfg.seed).split("eval");
    EvalHook hook = [&](const Policy& policy, int epoch, TrainEpochRow& row) {
        EvalReport rep = evaluate(policy, data.gt, data.cats, eval_users, cfg.eval_episodes, cfg.quit,
                                  eval_root.split("epoch", static_cast<uint64_t>(epoch)).seed(), cfg.eval_greedy);
        row.r_tra = rep.r_tra_mean;
        row.r_each = rep.r_each_mean;
        row.length = rep.length_mean;
        row.mcd = rep.mcd;
        result.epoch_reports.push_back(rep);
    };

    TrainResult trained = a2c_train(train_env, train_users, tracker, std::move(actions), a2c, hook);
    result.trace = std::move(trained.trace);
    result.policy = std::move(trained.policy);
    result.final_report = result.epoch_reports.back();

    std::vector<double> r_tras, r_eachs, lengths, mcds;
    for (const auto& rep : result.epoch_reports) {
        r_tras.push_back(rep.r_tra_mean);
        r_eachs.push_back(rep.r_each_mean);
        lengths.push_back(rep.length_mean);
        mcds.push_back(rep.mcd);
    }
    result.r_tra_across_epochs = mean_of(r_tras);
    result.r_each_across_epochs = mean_of(r_eachs);
    result.length_across_epochs = mean_of(lengths);
    result.mcd_across_epochs = mean_of(mcds);
    return result;
}

// --- CLI commands -------------------------------------------------------------

namespace {

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw io_error("cannot create output directory " + dir + ": " + ec.message());
}

KeyValueConfig load_config_with_override(const std::string& config_path,
                                         const std::optional<uint64_t>& seed_override) {
    KeyValueConfig kv = KeyValueConfig::parse_file(config_path);
    if (seed_override) kv.set("experiment.seed", std::to_string(*seed_override));
    return kv;
}

void write_manifest(const std::string& path, const std::vector<std::pair<std::string, std::string>>& entries) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path);
    for (const auto& [k, v] : entries) out << k << " = " << v << '\n';
    if (!out) throw io_error("failed writing " + path);
}

void write_trace_csv(const std::vector<TrainEpochRow>& trace, const std::string& path,
                     const std::string& comment) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path);
    out << comment << '\n';
    out << "epoch,R_tra,R_each,length,MCD,critic_loss,actor_loss\n";
    for (const auto& row : trace)
        out << row.epoch << ',' << format_double(row.r_tra) << ',' << format_double(row.r_each) << ','
            << format_double(row.length) << ',' << format_double(row.mcd) << ','
            << format_double(row.critic_loss) << ',' << format_double(row.actor_loss) << '\n';
    if (!out) throw io_error("failed writing " + path);
}

void write_run_report_csv(const RunResult& result, Method method, const std::string& path,
                          const std::string& comment) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path);
    out << comment << '\n';
    out << "method,episodes,R_tra,R_tra_std,R_each,length,MCD,"
           "R_tra_across_epochs,R_each_across_epochs,length_across_epochs,MCD_across_epochs,"
           "shaped_rmse,worldmodel_rmse\n";
    const EvalReport& rep = result.final_report;
    out << method_name(method) << ',' << rep.n_episodes << ',' << format_double(rep.r_tra_mean) << ','
        << format_double(rep.r_tra_std) << ',' << format_double(rep.r_each_mean) << ','
        << format_double(rep.length_mean) << ',' << format_double(rep.mcd) << ','
        << format_double(result.r_tra_across_epochs) << ',' << format_double(result.r_each_across_epochs)
        << ',' << format_double(result.length_across_epochs) << ',' << format_double(result.mcd_across_epochs)
        << ',' << format_double(result.shaped_rmse) << ',' << format_double(result.worldmodel_rmse) << '\n';
    if (!out) throw io_error("failed writing " + path);
}

}  // namespace

void cmd_generate(const std::string& config_path, const std::string& out_dir,
                  std::optional<uint64_t> seed_override) {
    KeyValueConfig kv = load_config_with_override(config_path, seed_override);
    ExperimentConfig cfg = parse_experiment_config(kv);
    if (cfg.dataset_mode != DatasetMode::synthetic)
        throw config_error("dataset.mode", "generate requires a synthetic dataset config");
    ensure_dir(out_dir);

    SyntheticConfig synth = cfg.synth;
    synth.seed = Rng(cfg.seed).split("dataset").seed();
    SyntheticDataset ds = generate_synthetic(synth);

    fs::path dir(out_dir);
    save_full_matrix(ds.gt, (dir / "ground_truth.txt").string());
    save_interaction_log(ds.log, (dir / "log.csv").string());
    save_categories(ds.cats, (dir / "categories.csv").string());
    save_plain_matrix(ds.feats.vectors, (dir / "features.txt").string());

    std::ostringstream hash;
    hash << std::hex << kv.hash();
    write_manifest((dir / "manifest.txt").string(),
                   {{"config_hash", hash.str()},
                    {"seed", std::to_string(cfg.seed)},
                    {"n_users", std::to_string(synth.n_users)},
                    {"n_items", std::to_string(synth.n_items)},
                    {"n_clusters", std::to_string(synth.n_clusters)},
                    {"n_categories", std::to_string(synth.n_categories)},
                    {"reward_min", format_double(synth.reward_range.min_r)},
                    {"reward_max", format_double(synth.reward_range.max_r)},
                    {"feature_source", "interaction_history_row"},
                    {"events", std::to_string(ds.log.events.size())},
                    {"majority_category", std::to_string(ds.cats.majority_category)}});
    logging::info("generate: wrote dataset to " + out_dir);
}

void cmd_run(const std::string& config_path, const std::string& out_dir,
             std::optional<uint64_t> seed_override) {
    KeyValueConfig kv = load_config_with_override(config_path, seed_override);
    ExperimentConfig cfg = parse_experiment_config(kv);
    ensure_dir(out_dir);
    std::string comment = comment_header(kv);

    RunResult result = run_experiment(cfg);

    fs::path dir(out_dir);
    write_trace_csv(result.trace, (dir / "trace.csv").string(), comment);
    write_run_report_csv(result, cfg.method, (dir / "report.csv").string(), comment);
    save_policy(result.policy, (dir / "policy.ckpt").string());
    if (cfg.export_shaping &&
        (cfg.method == Method::roler || cfg.method == Method::roler_without_ku ||
         cfg.method == Method::roler_without_kr)) {
        // Re-derive the table for export; run_experiment owns its own copy.
        DatasetBundle data = load_dataset(cfg);
        WorldModelEnsemble ens = build_world_model(cfg, data);
        UserFeatures feats = shaping_features(cfg, data, ens);
        ShapedRewardTable table = build_shaped_table(data.log, data.cats, feats, ens, cfg.shaping,
                                                     Rng(cfg.seed).split("shaping").seed());
        export_shaped_csv(table, (dir / "shaped_table.csv").string());
        export_entropy_csv(table.entropy, (dir / "entropy_table.csv").string());
    }
    logging::info("run: method=" + method_name(cfg.method) +
                  " R_tra(final)=" + format_double(result.final_report.r_tra_mean) +
                  " R_tra(mean over epochs)=" + format_double(result.r_tra_across_epochs));
}

void cmd_ablate(const std::string& config_path, const std::string& out_dir,
                std::optional<uint64_t> seed_override, int parallel) {
    KeyValueConfig kv = load_config_with_override(config_path, seed_override);
    ExperimentConfig base_cfg = parse_experiment_config(kv);
    ensure_dir(out_dir);
    std::string comment = comment_header(kv);

    std::vector<Method> methods;
    for (const auto& name : kv.get_string_list("ablate.methods")) methods.push_back(parse_method(name));
    std::vector<VariantKind> variants{base_cfg.shaping.variant.kind};
    if (kv.has("ablate.variants")) {
        variants.clear();
        for (const auto& name : kv.get_string_list("ablate.variants")) variants.push_back(parse_variant(name));
    }
    std::vector<int> ks{base_cfg.shaping.k};
    if (kv.has("ablate.ks")) {
        ks.clear();
        for (long k : kv.get_long_list("ablate.ks")) ks.push_back(static_cast<int>(k));
    }
    std::vector<uint64_t> seeds{base_cfg.seed};
    if (kv.has("ablate.seeds")) {
        seeds.clear();
        for (long s : kv.get_long_list("ablate.seeds")) seeds.push_back(static_cast<uint64_t>(s));
    }

    struct Cell {
        Method method;
        VariantKind variant;
        int k;
        uint64_t seed;
    };
    std::vector<Cell> cells;
    for (Method m : methods)
        for (VariantKind v : variants)
            for (int k : ks)
                for (uint64_t s : seeds) cells.push_back({m, v, k, s});

    std::vector<AblateRow> rows(cells.size());
    std::atomic<size_t> next{0};
    auto worker = [&]() {
        while (true) {
            size_t idx = next.fetch_add(1);
            if (idx >= cells.size()) return;
            const Cell& cell = cells[idx];
            AblateRow row;
            row.method = method_name(cell.method);
            row.variant = variant_name(cell.variant);
            row.k = cell.k;
            row.seed = cell.seed;
            try {
                ExperimentConfig cfg = base_cfg;
                cfg.method = cell.method;
                cfg.shaping.variant.kind = cell.variant;
                cfg.shaping.variant.lambda = cfg.shaping.lambda_u;
                cfg.shaping.k = cell.k;
                cfg.seed = cell.seed;
                RunResult res = run_experiment(cfg);
                row.r_tra = res.r_tra_across_epochs;
                row.r_each = res.r_each_across_epochs;
                row.length = res.length_across_epochs;
                row.mcd = res.mcd_across_epochs;
                row.shaped_rmse = res.shaped_rmse;
                row.worldmodel_rmse = res.worldmodel_rmse;
            } catch (const std::exception& e) {
                std::string msg = e.what();
                std::replace(msg.begin(), msg.end(), ',', ';');
                std::replace(msg.begin(), msg.end(), '\n', ' ');
                row.status = "error: " + msg;
            }
            rows[idx] = std::move(row);
        }
    };
    int n_threads = std::max(1, parallel);
    std::vector<std::thread> threads;
    for (int t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();

    fs::path dir(out_dir);
    {
        std::ofstream out(dir / "ablate_long.csv");
        if (!out) throw io_error("cannot write ablate_long.csv");
        out << comment << '\n';
        out << "method,variant,k,seed,R_tra,R_each,length,MCD,status\n";
        for (const auto& row : rows)
            out << row.method << ',' << row.variant << ',' << row.k << ',' << row.seed << ','
                << format_double(row.r_tra) << ',' << format_double(row.r_each) << ','
                << format_double(row.length) << ',' << format_double(row.mcd) << ',' << row.status << '\n';
    }
    {
        std::ofstream out(dir / "shaping_rmse.csv");
        if (!out) throw io_error("cannot write shaping_rmse.csv");
        out << comment << '\n';
        out << "method,variant,k,seed,rmse_shaped,rmse_worldmodel\n";
        for (const auto& row : rows) {
            if (row.shaped_rmse < 0 || row.status != "ok") continue;
            out << row.method << ',' << row.variant << ',' << row.k << ',' << row.seed << ','
                << format_double(row.shaped_rmse) << ',' << format_double(row.worldmodel_rmse) << '\n';
        }
    }
    {
        // Mean +- std per (method, variant, k); accumulation follows row order.
        std::ofstream out(dir / "ablate_summary.csv");
        if (!out) throw io_error("cannot write ablate_summary.csv");
        out << comment << '\n';
        out << "method,variant,k,seeds,R_tra_mean,R_tra_std,R_each_mean,length_mean,MCD_mean\n";
        for (Method m : methods)
            for (VariantKind v : variants)
                for (int k : ks) {
                    std::vector<double> r_tra, r_each, length, mcd;
                    for (const auto& row : rows) {
                        if (row.method != method_name(m) || row.variant != variant_name(v) || row.k != k ||
                            row.status != "ok")
                            continue;
                        r_tra.push_back(row.r_tra);
                        r_each.push_back(row.r_each);
                        length.push_back(row.length);
                        mcd.push_back(row.mcd);
                    }
                    if (r_tra.empty()) continue;
                    out << method_name(m) << ',' << variant_name(v) << ',' << k << ',' << r_tra.size() << ','
                        << format_double(mean_of(r_tra)) << ',' << format_double(stddev_of(r_tra)) << ','
                        << format_double(mean_of(r_each)) << ',' << format_double(mean_of(length)) << ','
                        << format_double(mean_of(mcd)) << '\n';
                }
    }
    logging::info("ablate: " + std::to_string(rows.size()) + " cells written to " + out_dir);
}

void cmd_verify_bound(const std::string& config_path, const std::string& out_dir,
                      std::optional<uint64_t> seed_override) {
    KeyValueConfig kv = load_config_with_override(config_path, seed_override);
    kv.require_known_keys(experiment_schema());
    ensure_dir(out_dir);
    std::string comment = comment_header(kv);

    CoverageConfig cov;
    cov.instances = static_cast<int>(kv.get_long_or("verify_bound.instances", 100));
    cov.n_states = static_cast<int>(kv.get_long_or("verify_bound.states", 5));
    cov.n_actions = static_cast<int>(kv.get_long_or("verify_bound.actions", 3));
    cov.gamma = kv.get_double_or("verify_bound.gamma", 0.9);
    cov.delta = kv.get_double_or("verify_bound.delta", 0.05);
    cov.k = static_cast<int>(kv.get_long_or("verify_bound.k", 3));
    cov.n_clusters = static_cast<int>(kv.get_long_or("verify_bound.clusters", 2));
    cov.cluster_noise = kv.get_double_or("verify_bound.cluster_noise", 0.05);
    cov.observation_noise = kv.get_double_or("verify_bound.observation_noise", 0.1);
    cov.seed = kv.get_u64_or("experiment.seed", 0);

    std::vector<CoverageRow> rows = bound_coverage_experiment(cov);
    fs::path dir(out_dir);
    write_coverage_csv(rows, (dir / "bound_coverage.csv").string(), comment);

    int holds = 0;
    for (const auto& r : rows) holds += r.holds ? 1 : 0;
    std::ofstream out(dir / "bound_summary.csv");
    if (!out) throw io_error("cannot write bound_summary.csv");
    out << comment << '\n';
    out << "instances,holds,delta\n";
    out << rows.size() << ',' << holds << ',' << format_double(cov.delta) << '\n';
    logging::info("verify-bound: bound held in " + std::to_string(holds) + "/" + std::to_string(rows.size()) +
                  " instances");
}

}  // namespace roler
