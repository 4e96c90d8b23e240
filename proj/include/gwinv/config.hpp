#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gwinv/covariance.hpp"
#include "gwinv/flow.hpp"
#include "gwinv/grid.hpp"

namespace gwinv {

/// Configuration problems map to CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TransformConfig {
    double psi = 9.87e-14; // m^2
    double rho = 1.0;
    bool operator==(const TransformConfig&) const = default;
};

struct WellPatternConfig {
    std::string pattern = "five_spot"; // or "list"
    double rate_m3_per_day = 100.0;
    double bhp_pa = 1.01325e5;
    double well_radius = 0.1;
    // pattern == "list": explicit wells (i, j, control, value)
    struct Entry {
        int i = 0, j = 0;
        std::string control; // "rate" | "bhp"
        double value = 0.0;
        bool operator==(const Entry&) const = default;
    };
    std::vector<Entry> wells;
    bool operator==(const WellPatternConfig&) const = default;
};

struct SensorConfig {
    std::string pattern = "lattice"; // 5x5 interior lattice, or "list"
    std::vector<Point> positions;
    bool operator==(const SensorConfig& o) const
    {
        if (pattern != o.pattern || positions.size() != o.positions.size()) return false;
        for (std::size_t i = 0; i < positions.size(); ++i)
            if (positions[i].x != o.positions[i].x || positions[i].y != o.positions[i].y)
                return false;
        return true;
    }
};

struct FlowConfig {
    FluidAndRock fluid;
    WellPatternConfig wells;
    SensorConfig sensors;
    std::string solver = "direct"; // or "cg"
    double noise_std_pa = 0.0;     // additive Gaussian noise on reference sensor data
    bool operator==(const FlowConfig& o) const
    {
        return fluid.viscosity == o.fluid.viscosity && fluid.porosity == o.fluid.porosity
               && wells == o.wells && sensors == o.sensors && solver == o.solver
               && noise_std_pa == o.noise_std_pa;
    }
};

struct ReferenceConfig {
    double corr_len = 20.0;
    std::string dir; // optional shared reference-data directory; default <output_dir>/reference
    bool operator==(const ReferenceConfig&) const = default;
};

struct PriorConfig {
    std::string type = "kle"; // or "vae"
    double corr_len = 20.0;   // kle
    double energy_target = 0.98;
    std::string model_file; // vae
    bool operator==(const PriorConfig&) const = default;
};

struct LikelihoodConfig {
    double sigma_sq = 1e-3;
    bool operator==(const LikelihoodConfig&) const = default;
};

struct McmcConfig {
    int chains = 4;
    long iterations = 20000;
    long burn_in = -1; // -1: iterations/30
    double gamma = 0.1;
    int thinning = 1;

    long effective_burn_in() const { return burn_in >= 0 ? burn_in : iterations / 30; }
    bool operator==(const McmcConfig&) const = default;
};

struct VaeTrainingConfig {
    int latent_dim = 64;
    int channels = 4;
    int kernel = 5;
    int dense_width = 1024;
    int batch_size = 25;
    int epochs = 100;
    double learning_rate = 1e-4;
    double beta = 0.5;
    long fields_per_corr_len = 20000;
    std::vector<double> split_fractions = {0.6, 0.2, 0.2};
    std::string dataset_manifest = "dataset/manifest.csv";
    bool operator==(const VaeTrainingConfig&) const = default;
};

struct DiagnosticsConfig {
    double mpsrf_threshold = 1.2;
    long checkpoint_interval = 1000;
    long posterior_samples = 10000;
    long mean_field_samples = 5000;
    long ks_sample_size = 100;
    bool operator==(const DiagnosticsConfig&) const = default;
};

struct ExperimentConfig {
    std::string output_dir = "out";
    std::uint64_t master_seed = 1;
    int threads = 0; // 0: hardware concurrency

    GridSpec grid;
    CovarianceModel covariance; // variance/mean shared by all correlation lengths
    std::vector<double> corr_lengths = {10.0, 20.0, 30.0};
    TransformConfig transform;
    FlowConfig flow;
    ReferenceConfig reference;
    PriorConfig prior;
    LikelihoodConfig likelihood;
    McmcConfig mcmc;
    VaeTrainingConfig vae_training;
    DiagnosticsConfig diagnostics;

    void validate() const;

    bool operator==(const ExperimentConfig& o) const;
};

/// Parse a config file; an optional named profile overlay from the file's
/// "profiles" section is deep-merged over the base document first. Relative
/// paths are kept as written; resolve_path() makes them absolute against the
/// config file location.
ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::string& profile = "");

ExperimentConfig config_from_json_text(const std::string& text, const std::string& profile = "");

std::string config_to_json_text(const ExperimentConfig& cfg);

/// Paths in the config are interpreted relative to the config file directory.
std::filesystem::path resolve_path(const std::filesystem::path& config_dir,
                                   const std::string& path);

} // namespace gwinv
