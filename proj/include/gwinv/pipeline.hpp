#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gwinv/config.hpp"
#include "gwinv/diagnostics.hpp"
#include "gwinv/mcmc.hpp"

namespace gwinv {

/// Filesystem layout of one experiment under its output directory.
struct ExperimentPaths {
    std::filesystem::path output;
    std::filesystem::path reference; // shared across experiments when configured
    std::filesystem::path cache;
    std::filesystem::path dataset;
    std::filesystem::path vae;
    std::filesystem::path mcmc;
    std::filesystem::path diagnostics;
};

ExperimentPaths experiment_paths(const ExperimentConfig& cfg,
                                 const std::filesystem::path& config_dir);

/// KLE basis for one correlation length, cached as KLB1 under cache_dir. The
/// cached trace is checked against variance * |D| to catch stale files.
KLEBasis basis_for(const ExperimentConfig& cfg, double corr_len,
                   const std::filesystem::path& cache_dir);

std::vector<WellSpec> wells_from_config(const ExperimentConfig& cfg);
SensorLayout sensors_from_config(const ExperimentConfig& cfg);
FlowContext flow_context_from_config(const ExperimentConfig& cfg, const SensorLayout& sensors);
PriorParameterization prior_from_config(const ExperimentConfig& cfg,
                                        const ExperimentPaths& paths);

void write_sensor_csv(const std::filesystem::path& path, const SensorLayout& layout,
                      const std::vector<double>& data);
void read_sensor_csv(const std::filesystem::path& path, std::vector<Point>& positions,
                     std::vector<double>& data);

struct ReferenceOutputs {
    std::filesystem::path gaussian_field;
    std::filesystem::path permeability_field;
    std::filesystem::path pressure_field;
    std::filesystem::path sensor_csv;
    std::vector<double> sensor_data;
};

ReferenceOutputs cmd_gen_reference(const ExperimentConfig& cfg,
                                   const std::filesystem::path& config_dir);

struct DatasetOutputs {
    std::filesystem::path manifest;
    long field_count = 0;
};

DatasetOutputs cmd_gen_dataset(const ExperimentConfig& cfg,
                               const std::filesystem::path& config_dir);

struct TrainOutputs {
    std::filesystem::path model;
    std::filesystem::path history;
    std::filesystem::path test_errors;
    bool aborted = false;
    int best_epoch = 0;
};

TrainOutputs cmd_train_vae(const ExperimentConfig& cfg, const std::filesystem::path& config_dir);

struct McmcOutputs {
    std::vector<std::filesystem::path> trace_files;
    std::filesystem::path summary;
    std::vector<double> acceptance_rates;
    double wall_seconds = 0.0;
};

McmcOutputs cmd_run_mcmc(const ExperimentConfig& cfg, const std::filesystem::path& config_dir,
                         std::optional<long> max_iterations_override = std::nullopt);

struct DiagnoseOutputs {
    MPSRFSeries mpsrf;
    double mean_acceptance_rate = 0.0;
    ErrorSummary dre;
    ErrorSummary rey;
    std::vector<KSResult> ks; // vs. baseline, when given (DRE then RE_Y)
    std::filesystem::path dir;
};

DiagnoseOutputs cmd_diagnose(const ExperimentConfig& cfg, const std::filesystem::path& config_dir,
                             const std::optional<std::filesystem::path>& baseline_diag_dir =
                                 std::nullopt);

/// FLD1/TRC1 to CSV.
void cmd_export(const ExperimentConfig& cfg, const std::filesystem::path& input,
                const std::filesystem::path& output);

} // namespace gwinv
