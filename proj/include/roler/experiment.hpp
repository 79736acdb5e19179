#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "roler/config.hpp"
#include "roler/datasets.hpp"
#include "roler/evaluator.hpp"
#include "roler/policy.hpp"
#include "roler/shaping.hpp"
#include "roler/theory.hpp"
#include "roler/world_model.hpp"

namespace roler {

enum class Method {
    baseline_worldmodel,    // raw world-model reward
    baseline_ensemble_dorl, // ensemble mean - lambda_u * ensemble variance + entropy bonus
    roler,                  // kNN reward with kNN-distance uncertainty + entropy bonus
    roler_without_kr,       // world-model reward - lambda_u * kNN uncertainty + entropy bonus
    roler_without_ku,       // kNN reward - lambda_u * ensemble variance + entropy bonus
    gt_oracle,              // trains on the true evaluation rewards
};

std::string method_name(Method m);
Method parse_method(const std::string& name);
std::string variant_name(VariantKind v);
VariantKind parse_variant(const std::string& name);

enum class DatasetMode { synthetic, files };
enum class WorldModelMode { mf, noisy_oracle };
enum class FeatureChoice { history, embedding, file };

struct ExperimentConfig {
    Method method = Method::roler;
    uint64_t seed = 0;

    DatasetMode dataset_mode = DatasetMode::synthetic;
    SyntheticConfig synth;
    std::string matrix_path, log_path, categories_path, features_path;

    WorldModelMode wm_mode = WorldModelMode::noisy_oracle;
    int ensemble = 1;
    double oracle_sigma = 0.0;
    double oracle_bias = 0.0;
    MFConfig mf;

    ShapingParams shaping;
    FeatureChoice feature_choice = FeatureChoice::history;

    TrackerConfig tracker;
    ActionInit action_init = ActionInit::world_model_embeddings;
    int action_dim = 0;  // 0 = follow the world model

    A2CConfig a2c;
    int eval_episodes = 20;
    QuitConfig quit;
    bool eval_greedy = false;
    bool export_shaping = false;

    void validate() const;
};

ExperimentConfig parse_experiment_config(const KeyValueConfig& kv);

struct DatasetBundle {
    FeedbackMatrix gt;
    InteractionLog log;
    CategoryMap cats;
    UserFeatures features;  // raw static features when loaded from file
    bool has_file_features = false;
};

DatasetBundle load_dataset(const ExperimentConfig& cfg);

// Mean squared error against the ground truth over all cells, square-rooted.
double rmse_vs_gt(const Matrix& predictions, const FeedbackMatrix& gt);
double worldmodel_rmse(const WorldModelEnsemble& ens, const FeedbackMatrix& gt);

struct RunResult {
    std::vector<TrainEpochRow> trace;
    std::vector<EvalReport> epoch_reports;
    EvalReport final_report;            // last training epoch
    double r_tra_across_epochs = 0.0;   // paper-style score: per-epoch evals averaged
    double r_each_across_epochs = 0.0;
    double length_across_epochs = 0.0;
    double mcd_across_epochs = 0.0;
    Policy policy;
    double shaped_rmse = -1.0;      // vs gt; -1 when shaping is not part of the method
    double worldmodel_rmse = -1.0;  // vs gt
};

RunResult run_experiment(const ExperimentConfig& cfg);

// --- CLI commands (throw; the binary maps exceptions to exit codes) ----------

void cmd_generate(const std::string& config_path, const std::string& out_dir,
                  std::optional<uint64_t> seed_override);
void cmd_run(const std::string& config_path, const std::string& out_dir, std::optional<uint64_t> seed_override);
void cmd_ablate(const std::string& config_path, const std::string& out_dir,
                std::optional<uint64_t> seed_override, int parallel);
void cmd_verify_bound(const std::string& config_path, const std::string& out_dir,
                      std::optional<uint64_t> seed_override);

// Long-format ablation grid row.
struct AblateRow {
    std::string method;
    std::string variant;
    int k = 0;
    uint64_t seed = 0;
    double r_tra = 0.0;
    double r_each = 0.0;
    double length = 0.0;
    double mcd = 0.0;
    double shaped_rmse = -1.0;
    double worldmodel_rmse = -1.0;
    std::string status = "ok";
};

}  // namespace roler
