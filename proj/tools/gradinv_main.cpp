#include <CLI11.hpp>
#include <cstdio>
#include <string>
#include <vector>

#include "gradinv/config.hpp"
#include "gradinv/runner.hpp"

namespace {

struct CommandSpec {
    std::string name;
    std::string description;
    int (*run)(const gradinv::ExperimentConfig&, std::string*);
};

const std::vector<CommandSpec>& commands() {
    static const std::vector<CommandSpec> cmds{
        {"train-denoiser", "Train the MLP noise predictor on the procedural dataset; writes checkpoint and loss CSV",
         gradinv::runner::cmd_train_denoiser},
        {"attack", "Run the guided reverse-diffusion reconstruction per seed; writes traces, snapshots, manifest",
         gradinv::runner::cmd_attack},
        {"sweep-noise", "Run the {1e-4,1e-3,1e-2,1e-1} x {gaussian,laplacian} defense grid; writes a summary CSV",
         gradinv::runner::cmd_sweep_noise},
        {"rv", "Estimate reconstruction vulnerability across the model zoo; writes an RV CSV",
         gradinv::runner::cmd_rv},
        {"verify-theorems", "Run all trend validators; nonzero exit when any check fails",
         gradinv::runner::cmd_verify_theorems},
        {"baseline", "Run the pixel-space gradient-matching baseline under the same schema",
         gradinv::runner::cmd_baseline},
    };
    return cmds;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gradinv: gradient inversion laboratory (guided diffusion attack, defenses, validators)"};
    app.require_subcommand(1);
    app.footer(gradinv::config_help());

    std::string config_path;
    std::vector<uint64_t> seed_override;
    std::string out_override;
    int jobs_override = 0;
    const CommandSpec* selected = nullptr;

    for (const auto& cmd : commands()) {
        CLI::App* sub = app.add_subcommand(cmd.name, cmd.description);
        sub->add_option("--config", config_path, "path to a key = value config file");
        sub->add_option("--seed", seed_override, "seed (repeatable, replaces the config seed list)");
        sub->add_option("--out", out_override, "output root directory (replaces config 'out')");
        sub->add_option("--jobs", jobs_override, "max parallel runs (replaces config 'jobs')");
        sub->callback([&selected, &cmd] { selected = &cmd; });
    }

    CLI11_PARSE(app, argc, argv);

    try {
        gradinv::ExperimentConfig cfg =
            config_path.empty() ? gradinv::ExperimentConfig{} : gradinv::parse_config_file(config_path);
        if (!seed_override.empty()) cfg.seeds = seed_override;
        if (!out_override.empty()) cfg.out = out_override;
        if (jobs_override > 0) cfg.jobs = jobs_override;
        cfg.validate();
        std::string run_dir;
        int code = selected->run(cfg, &run_dir);
        if (!run_dir.empty()) std::printf("run directory: %s\n", run_dir.c_str());
        if (code == 3) std::fprintf(stderr, "theorem check failed\n");
        return code;
    } catch (const gradinv::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const gradinv::NumericError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return 2;
    } catch (const gradinv::ShapeError& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return 1;
    } catch (const gradinv::IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
