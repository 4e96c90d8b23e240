#include <cstdio>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gwinv/pipeline.hpp"

namespace {

struct CommonOptions {
    std::string config_path;
    std::string profile;
    std::string out_override;
    std::optional<std::uint64_t> seed_override;
    std::optional<int> threads_override;
};

void add_common(CLI::App* cmd, CommonOptions& opt)
{
    cmd->add_option("--config", opt.config_path, "experiment config file (JSON)")
        ->required();
    cmd->add_option("--profile", opt.profile, "named profile overlay from the config file")
        ->check(CLI::IsMember({"desk", "paper"}));
    cmd->add_option("--out", opt.out_override, "override output directory");
    cmd->add_option("--seed", opt.seed_override, "override master seed");
    cmd->add_option("--threads", opt.threads_override, "override worker count");
}

gwinv::ExperimentConfig load(const CommonOptions& opt, std::filesystem::path& config_dir)
{
    const std::filesystem::path path(opt.config_path);
    if (!std::filesystem::exists(path))
        throw gwinv::ConfigError("config file does not exist: " + path.string());
    gwinv::ExperimentConfig cfg = gwinv::load_config(path, opt.profile);
    if (!opt.out_override.empty()) cfg.output_dir = opt.out_override;
    if (opt.seed_override) cfg.master_seed = *opt.seed_override;
    if (opt.threads_override) cfg.threads = *opt.threads_override;
    cfg.validate();
    config_dir = std::filesystem::absolute(path).parent_path();
    return cfg;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Bayesian groundwater-flow inversion: KLE/VAE priors, pCN Metropolis sampling"};
    app.require_subcommand(1);

    CommonOptions gen_ref_opt, gen_ds_opt, train_opt, mcmc_opt, diag_opt, export_opt;

    CLI::App* gen_ref = app.add_subcommand(
        "gen-reference", "synthesize the reference field and its sensor pressure data");
    add_common(gen_ref, gen_ref_opt);

    CLI::App* gen_ds =
        app.add_subcommand("gen-dataset", "generate the balanced multi-length field dataset");
    add_common(gen_ds, gen_ds_opt);

    CLI::App* train_vae = app.add_subcommand("train-vae", "train the VAE on a dataset manifest");
    add_common(train_vae, train_opt);

    CLI::App* run_mcmc =
        app.add_subcommand("run-mcmc", "run the Metropolis chain ensemble against reference data");
    add_common(run_mcmc, mcmc_opt);
    std::optional<long> max_iterations;
    run_mcmc->add_option("--max-iterations", max_iterations,
                         "cap the iteration count (smoke runs)");

    CLI::App* diagnose = app.add_subcommand(
        "diagnose", "convergence and posterior-quality report from persisted traces");
    add_common(diagnose, diag_opt);
    std::string baseline;
    diagnose->add_option("--baseline", baseline,
                         "diagnostics directory of the baseline experiment for KS tests");

    CLI::App* export_cmd = app.add_subcommand("export", "convert FLD1/TRC1 files to CSV");
    add_common(export_cmd, export_opt);
    std::string export_in, export_out;
    export_cmd->add_option("--input", export_in, "FLD1 or TRC1 file")->required();
    export_cmd->add_option("--output", export_out, "CSV destination")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        std::filesystem::path config_dir;
        if (gen_ref->parsed()) {
            const auto cfg = load(gen_ref_opt, config_dir);
            const auto out = gwinv::cmd_gen_reference(cfg, config_dir);
            std::printf("reference written: %s (%zu sensors)\n", out.sensor_csv.string().c_str(),
                        out.sensor_data.size());
        } else if (gen_ds->parsed()) {
            const auto cfg = load(gen_ds_opt, config_dir);
            const auto out = gwinv::cmd_gen_dataset(cfg, config_dir);
            std::printf("dataset written: %s (%ld fields)\n", out.manifest.string().c_str(),
                        out.field_count);
        } else if (train_vae->parsed()) {
            const auto cfg = load(train_opt, config_dir);
            const auto out = gwinv::cmd_train_vae(cfg, config_dir);
            std::printf("model written: %s (best epoch %d)\n", out.model.string().c_str(),
                        out.best_epoch);
        } else if (run_mcmc->parsed()) {
            const auto cfg = load(mcmc_opt, config_dir);
            const auto out = gwinv::cmd_run_mcmc(cfg, config_dir, max_iterations);
            double ar = 0.0;
            for (const double a : out.acceptance_rates) ar += a;
            ar /= static_cast<double>(out.acceptance_rates.size());
            std::printf("%zu chains done in %.1f s, mean AR %.1f%%\n", out.trace_files.size(),
                        out.wall_seconds, ar);
        } else if (diagnose->parsed()) {
            const auto cfg = load(diag_opt, config_dir);
            std::optional<std::filesystem::path> base;
            if (!baseline.empty()) base = baseline;
            const auto out = gwinv::cmd_diagnose(cfg, config_dir, base);
            std::printf("diagnostics written: %s (converged=%d at %ld, mu_DRE=%.3g, mu_REY=%.3g)\n",
                        out.dir.string().c_str(), out.mpsrf.converged ? 1 : 0,
                        out.mpsrf.convergence_iteration, out.dre.mean, out.rey.mean);
        } else if (export_cmd->parsed()) {
            const auto cfg = load(export_opt, config_dir);
            gwinv::cmd_export(cfg, export_in, export_out);
            std::printf("exported: %s\n", export_out.c_str());
        }
    } catch (const gwinv::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
