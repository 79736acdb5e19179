#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "roler/datasets.hpp"
#include "roler/env.hpp"
#include "roler/policy.hpp"

namespace roler {

struct EvalReport {
    double r_tra_mean = 0.0;
    double r_tra_std = 0.0;
    double r_each_mean = 0.0;
    double length_mean = 0.0;
    double mcd = 0.0;  // share of recommendations in the training-majority category
    int n_episodes = 0;
};

struct EpisodeResult {
    int user = 0;
    int length = 0;
    double r_tra = 0.0;
    int mcd_hits = 0;
    Trajectory traj;
};

// One interactive episode against the ground-truth environment. Rewards come
// from the true feedback matrix only.
EpisodeResult run_episode(const Policy& policy, const FeedbackMatrix& gt, const CategoryMap& cats, int user,
                          const QuitConfig& quit, uint64_t seed, bool greedy = false);

// n_episodes episodes with users resampled uniformly from `users` (seeded).
EvalReport evaluate(const Policy& policy, const FeedbackMatrix& gt, const CategoryMap& cats,
                    std::span<const int> users, int n_episodes, const QuitConfig& quit, uint64_t seed,
                    bool greedy = false);

// Quit-aware greedy rollout on the true rewards: each step takes the highest
// reward among items that keep the episode alive (or the best terminating item
// when none exists). A reference estimate of attainable cumulative reward.
double greedy_reference_return(const FeedbackMatrix& gt, const CategoryMap& cats, int user,
                               const QuitConfig& quit);

void write_eval_report_csv(const EvalReport& report, const std::string& method, const std::string& path,
                           const std::string& comment_header);

void write_episode_detail_csv(std::span<const EpisodeResult> episodes, const std::string& path,
                              const std::string& comment_header);

}  // namespace roler
