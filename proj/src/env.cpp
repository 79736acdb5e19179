#include "roler/env.hpp"

namespace roler {

bool quit_check(std::span<const int> recent_categories, int next_category, const QuitConfig& quit) {
    int window = quit.quit_n - 1;
    int start = static_cast<int>(recent_categories.size()) - window;
    if (start < 0) start = 0;
    int same = 0;
    for (size_t j = static_cast<size_t>(start); j < recent_categories.size(); ++j)
        if (recent_categories[j] == next_category) ++same;
    return same > quit.quit_m;
}

SimEnv::SimEnv(const Matrix* base_rewards, const ShapedRewardTable* shaped, const CategoryMap* cats,
               QuitConfig quit, const EntropyTable* entropy, double lambda_e)
    : base_(base_rewards), shaped_(shaped), cats_(cats), quit_(quit), entropy_(entropy), lambda_e_(lambda_e) {
    quit_.validate();
    if ((base_ == nullptr) == (shaped_ == nullptr))
        throw precondition_error("SimEnv needs exactly one reward source");
    n_items_ = base_ ? base_->cols() : shaped_->r_shaped.cols();
    if (cats_ == nullptr) throw precondition_error("SimEnv needs a category map");
    if (static_cast<int>(cats_->item_category.size()) != n_items_)
        throw precondition_error("category map size does not match item count");
}

SimEnv SimEnv::ground_truth(const FeedbackMatrix& gt, const CategoryMap& cats, QuitConfig quit) {
    return SimEnv(&gt.values, nullptr, &cats, quit);
}

void SimEnv::reset(int user) {
    int n_users = base_ ? base_->rows() : shaped_->r_shaped.rows();
    if (user < 0 || user >= n_users) throw param_error("env reset: user out of range");
    user_ = user;
    used_.assign(n_items_, 0);
    episode_categories_.clear();
    done_ = false;
}

double SimEnv::base_reward(int user, int item) const {
    return base_ ? (*base_)(user, item) : shaped_->shaped(user, item);
}

SimEnv::Step SimEnv::step(int item) {
    if (done_) throw precondition_error("env step after episode end");
    if (item < 0 || item >= n_items_) throw param_error("env step: item out of range");
    if (used_[item]) throw precondition_error("item " + std::to_string(item) + " recommended twice");

    Step out;
    out.feedback = base_reward(user_, item);
    out.reward = out.feedback;
    if (entropy_ != nullptr && lambda_e_ > 0.0)
        out.reward += lambda_e_ * entropy_->penalty(episode_categories_);

    int cat = cats_->item_category[item];
    bool quit = quit_check(episode_categories_, cat, quit_);
    used_[item] = 1;
    episode_categories_.push_back(cat);

    out.done = quit || length() >= quit_.max_len || length() >= n_items_;
    done_ = out.done;
    return out;
}

}  // namespace roler
