// roler_lab: desk-scale simulation lab for offline RL recommendation with
// kNN reward shaping. Subcommands: generate, run, ablate, verify-bound.

#include <CLI11.hpp>
#include <iostream>
#include <optional>
#include <string>

#include "roler/common.hpp"
#include "roler/experiment.hpp"
#include "roler/log.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitTraining = 3;
constexpr int kExitIo = 4;

struct CommonArgs {
    std::string config;
    std::string out;
    std::optional<uint64_t> seed_override;
    int parallel = 1;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_parallel) {
    cmd->add_option("--config", args.config, "experiment config file")->required();
    cmd->add_option("--out", args.out, "output directory")->required();
    cmd->add_option("--seed-override", args.seed_override, "replace the config's experiment seed");
    if (with_parallel) cmd->add_option("--parallel", args.parallel, "worker threads")->default_val(1);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"simulation lab for offline RL recommendation with kNN reward shaping"};
    app.require_subcommand(1);

    CommonArgs gen_args, run_args, ablate_args, bound_args;
    CLI::App* gen = app.add_subcommand("generate", "write a synthetic dataset to disk");
    add_common(gen, gen_args, false);
    CLI::App* run = app.add_subcommand("run", "train one method and evaluate it interactively");
    add_common(run, run_args, false);
    CLI::App* ablate = app.add_subcommand("ablate", "run a method/variant/k/seed grid");
    add_common(ablate, ablate_args, true);
    CLI::App* bound = app.add_subcommand("verify-bound", "empirical check of the performance lower bound");
    add_common(bound, bound_args, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (gen->parsed()) roler::cmd_generate(gen_args.config, gen_args.out, gen_args.seed_override);
        if (run->parsed()) roler::cmd_run(run_args.config, run_args.out, run_args.seed_override);
        if (ablate->parsed())
            roler::cmd_ablate(ablate_args.config, ablate_args.out, ablate_args.seed_override,
                              ablate_args.parallel);
        if (bound->parsed()) roler::cmd_verify_bound(bound_args.config, bound_args.out, bound_args.seed_override);
        return kExitOk;
    } catch (const roler::config_error& e) {
        roler::logging::error(e.what());
        return kExitConfig;
    } catch (const roler::divergence_error& e) {
        roler::logging::error(std::string("training diverged: ") + e.what());
        return kExitTraining;
    } catch (const roler::parse_error& e) {
        roler::logging::error(e.what());
        return kExitIo;
    } catch (const roler::io_error& e) {
        roler::logging::error(e.what());
        return kExitIo;
    } catch (const std::exception& e) {
        roler::logging::error(e.what());
        return 1;
    }
}
