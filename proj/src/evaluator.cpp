#include "roler/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace roler {

EpisodeResult run_episode(const Policy& policy, const FeedbackMatrix& gt, const CategoryMap& cats, int user,
                          const QuitConfig& quit, uint64_t seed, bool greedy) {
    for (int i = 0; i < gt.n_items; ++i)
        if (!gt.observed(user, i))
            throw precondition_error("evaluation requires full ground-truth row for user " + std::to_string(user));

    SimEnv env = SimEnv::ground_truth(gt, cats, quit);
    Rng rng(seed);
    EpisodeResult ep;
    ep.user = user;
    ep.traj = rollout(policy, env, user, rng, greedy);
    compute_returns(ep.traj, policy.gamma);
    ep.length = ep.traj.length();
    ep.r_tra = ep.traj.total_reward;
    for (const auto& st : ep.traj.steps)
        if (cats.item_category[st.action] == cats.majority_category) ++ep.mcd_hits;
    return ep;
}

EvalReport evaluate(const Policy& policy, const FeedbackMatrix& gt, const CategoryMap& cats,
                    std::span<const int> users, int n_episodes, const QuitConfig& quit, uint64_t seed,
                    bool greedy) {
    if (n_episodes < 1) throw param_error("evaluate requires n_episodes >= 1");
    if (users.empty()) throw param_error("evaluate requires a nonempty user set");

    Rng root(seed);
    Rng pick = root.split("episode_users");
    std::vector<double> r_tras, r_eachs, lengths;
    long total_items = 0, total_hits = 0;
    for (int e = 0; e < n_episodes; ++e) {
        int user = users[pick.integer(users.size())];
        uint64_t ep_seed = root.split("episode", static_cast<uint64_t>(e)).seed();
        EpisodeResult ep = run_episode(policy, gt, cats, user, quit, ep_seed, greedy);
        r_tras.push_back(ep.r_tra);
        lengths.push_back(ep.length);
        r_eachs.push_back(ep.r_tra / ep.length);
        total_items += ep.length;
        total_hits += ep.mcd_hits;
    }

    EvalReport rep;
    rep.n_episodes = n_episodes;
    rep.r_tra_mean = mean_of(r_tras);
    rep.r_tra_std = stddev_of(r_tras);
    rep.r_each_mean = mean_of(r_eachs);
    rep.length_mean = mean_of(lengths);
    rep.mcd = total_items > 0 ? static_cast<double>(total_hits) / static_cast<double>(total_items) : 0.0;
    return rep;
}

double greedy_reference_return(const FeedbackMatrix& gt, const CategoryMap& cats, int user,
                               const QuitConfig& quit) {
    quit.validate();
    std::vector<uint8_t> used(gt.n_items, 0);
    std::vector<int> recent;
    double total = 0.0;
    for (int t = 0; t < quit.max_len && t < gt.n_items; ++t) {
        int best_alive = -1, best_any = -1;
        for (int i = 0; i < gt.n_items; ++i) {
            if (used[i]) continue;
            if (best_any < 0 || gt.values(user, i) > gt.values(user, best_any)) best_any = i;
            if (!quit_check(recent, cats.item_category[i], quit) &&
                (best_alive < 0 || gt.values(user, i) > gt.values(user, best_alive)))
                best_alive = i;
        }
        int pick = best_alive >= 0 ? best_alive : best_any;
        if (pick < 0) break;
        total += gt.values(user, pick);
        bool quits = quit_check(recent, cats.item_category[pick], quit);
        used[pick] = 1;
        recent.push_back(cats.item_category[pick]);
        if (quits) break;
    }
    return total;
}

void write_eval_report_csv(const EvalReport& report, const std::string& method, const std::string& path,
                           const std::string& comment_header) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path);
    if (!comment_header.empty()) out << comment_header << '\n';
    out << "method,episodes,R_tra,R_tra_std,R_each,length,MCD\n";
    out << method << ',' << report.n_episodes << ',' << format_double(report.r_tra_mean) << ','
        << format_double(report.r_tra_std) << ',' << format_double(report.r_each_mean) << ','
        << format_double(report.length_mean) << ',' << format_double(report.mcd) << '\n';
    if (!out) throw io_error("failed writing " + path);
}

void write_episode_detail_csv(std::span<const EpisodeResult> episodes, const std::string& path,
                              const std::string& comment_header) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path);
    if (!comment_header.empty()) out << comment_header << '\n';
    out << "episode,user,length,R_tra,mcd_hits\n";
    for (size_t e = 0; e < episodes.size(); ++e)
        out << e << ',' << episodes[e].user << ',' << episodes[e].length << ','
            << format_double(episodes[e].r_tra) << ',' << episodes[e].mcd_hits << '\n';
    if (!out) throw io_error("failed writing " + path);
}

}  // namespace roler
