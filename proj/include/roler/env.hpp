#pragma once

#include <span>
#include <vector>

#include "roler/common.hpp"
#include "roler/datasets.hpp"
#include "roler/shaping.hpp"

namespace roler {

struct QuitConfig {
    int quit_m = 0;   // tolerated same-category duplicates in the window
    int quit_n = 4;   // window size, incoming item included
    int max_len = 30;

    void validate() const {
        if (quit_n < 1) throw config_error("quit_n", "must be >= 1");
        if (quit_m < 0) throw config_error("quit_m", "must be >= 0");
        if (max_len < 1) throw config_error("max_len", "must be >= 1");
    }
};

// True iff delivering an item of `next_category` ends the episode: the number
// of items sharing its category among the previous quit_n-1 transitions
// exceeds quit_m. Only the trailing quit_n-1 entries of `recent` are read.
bool quit_check(std::span<const int> recent_categories, int next_category, const QuitConfig& quit);

// Table-backed interactive environment: rewards come either from a plain
// matrix (ground truth or a baseline prediction table) or from a shaped
// table, plus an optional entropy bonus on top. Termination follows the
// category quit rule, the episode cap, and item exhaustion.
class SimEnv {
public:
    struct Step {
        double feedback = 0.0;  // what the user "reports"; feeds the state tracker
        double reward = 0.0;    // training signal: feedback + entropy bonus
        bool done = false;
    };

    SimEnv(const Matrix* base_rewards, const ShapedRewardTable* shaped, const CategoryMap* cats, QuitConfig quit,
           const EntropyTable* entropy = nullptr, double lambda_e = 0.0);

    static SimEnv ground_truth(const FeedbackMatrix& gt, const CategoryMap& cats, QuitConfig quit);

    int n_items() const { return n_items_; }
    int current_user() const { return user_; }
    int length() const { return static_cast<int>(episode_categories_.size()); }
    const std::vector<uint8_t>& used() const { return used_; }
    bool exhausted() const { return length() >= n_items_ || length() >= quit_.max_len; }

    void reset(int user);
    Step step(int item);

private:
    double base_reward(int user, int item) const;

    const Matrix* base_ = nullptr;
    const ShapedRewardTable* shaped_ = nullptr;
    const CategoryMap* cats_ = nullptr;
    QuitConfig quit_;
    const EntropyTable* entropy_ = nullptr;
    double lambda_e_ = 0.0;

    int n_items_ = 0;
    int user_ = -1;
    std::vector<uint8_t> used_;
    std::vector<int> episode_categories_;
    bool done_ = true;
};

}  // namespace roler
