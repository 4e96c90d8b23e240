#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gwinv/grid.hpp"
#include "gwinv/nn.hpp"

namespace gwinv {

/// Convolutional VAE architecture: three conv layers (four filters, kernel 5,
/// stride 2 on the second, batchnorm + ReLU) feeding a dense layer and the two
/// latent heads; the decoder mirrors the sequence. Conv and dense layers carry
/// no bias, the latent heads do; linear output layer.
struct ArchitectureSpec {
    int input_h = 50;
    int input_w = 50;
    int channels = 4;
    int kernel = 5;
    int dense_width = 1024;
    int latent_dim = 64;

    int half_h() const { return (input_h + 1) / 2; }
    int half_w() const { return (input_w + 1) / 2; }
    int flat_dim() const { return half_h() * half_w() * channels; }
    int field_dim() const { return input_h * input_w; }

    void validate() const;

    struct LayerSummary {
        std::string name;
        long param_count;
    };
    /// Keras-style encoder summary (batchnorm rows count running statistics).
    std::vector<LayerSummary> encoder_summary() const;

    bool operator==(const ArchitectureSpec&) const = default;
};

struct NamedArray {
    std::string name;
    std::vector<int> shape;
    bool trainable = true;
    std::vector<double> data;

    long numel() const;
};

/// Array indices in declaration (serialization) order.
enum ArrayId : int {
    kEncConv1W, kEncBn1Gamma, kEncBn1Beta, kEncBn1Mean, kEncBn1Var,
    kEncConv2W, kEncBn2Gamma, kEncBn2Beta, kEncBn2Mean, kEncBn2Var,
    kEncConv3W, kEncBn3Gamma, kEncBn3Beta, kEncBn3Mean, kEncBn3Var,
    kEncDenseW,
    kZMeanW, kZMeanB, kZLogVarW, kZLogVarB,
    kDecDense1W, kDecDense2W,
    kDecConv1W, kDecBn1Gamma, kDecBn1Beta, kDecBn1Mean, kDecBn1Var,
    kDecTConvW, kDecBn2Gamma, kDecBn2Beta, kDecBn2Mean, kDecBn2Var,
    kDecOutW,
    kArrayCount
};

struct VAEParams {
    ArchitectureSpec arch;
    std::vector<NamedArray> arrays;

    std::vector<double>& a(int id) { return arrays[id].data; }
    const std::vector<double>& a(int id) const { return arrays[id].data; }

    long trainable_count() const;
};

/// Seeded construction: He-uniform init for ReLU layers, Glorot-uniform for
/// the latent heads and the output conv.
VAEParams build_vae(const ArchitectureSpec& arch, std::uint64_t seed);

enum class RunMode { train, infer };

struct LatentSample {
    std::vector<double> mu;
    std::vector<double> log_var;
    std::vector<double> eps;
    std::vector<double> z;
};

/// Single-field encode; train mode uses the field's own batch statistics.
LatentSample encode(const VAEParams& params, std::span<const double> x,
                    std::span<const double> eps, RunMode mode);

/// Decoder-only inference (running batchnorm statistics); z -> field values.
std::vector<double> decode(const VAEParams& params, std::span<const double> z);

struct BatchLosses {
    std::vector<double> rec; // per item, summed over pixels
    std::vector<double> reg; // per item, summed over latent dims
    double total = 0.0;      // batch mean of rec + beta*reg
};

/// Forward-only batch losses. xs is row-major [count][field_dim], eps
/// [count][latent_dim].
BatchLosses losses(const VAEParams& params, std::span<const double> xs,
                   std::span<const double> eps, int count, double beta,
                   RunMode mode = RunMode::train);

struct VAEGradients {
    std::vector<std::vector<double>> g; // parallel to VAEParams::arrays
};

/// Train-mode forward + reverse pass over a batch; updates batchnorm running
/// statistics as a side effect. Gradients are of the batch loss
/// mean(rec + beta*reg) with respect to every trainable array.
VAEGradients backward(VAEParams& params, std::span<const double> xs, std::span<const double> eps,
                      int count, double beta, BatchLosses* out_losses = nullptr);

struct AdamState {
    long t = 0;
    std::vector<std::vector<double>> m, v;
};

AdamState make_adam_state(const VAEParams& params);

void adam_step(AdamState& state, VAEParams& params, const VAEGradients& grads, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

enum class Split { train, val, test };

struct DatasetItem {
    std::vector<double> values;
    double corr_len = 0.0;
    Split split = Split::train;
    std::string file;
};

struct FieldDataset {
    int h = 0, w = 0;
    std::vector<DatasetItem> items;

    std::vector<int> indices(Split s) const;
};

/// Seeded split assignment, balanced per correlation length.
void assign_splits(FieldDataset& ds, double train_frac, double val_frac, double test_frac,
                   std::uint64_t seed);

/// Manifest CSV (field_file, corr_len, split); field files are FLD1 paths
/// relative to the manifest location.
FieldDataset load_dataset(const std::filesystem::path& manifest, const GridSpec& grid);

struct TrainConfig {
    int batch_size = 25;
    int epochs = 100;
    double learning_rate = 1e-4;
    double beta = 0.5;
    std::uint64_t seed = 0;
};

struct EpochStats {
    int epoch = 0;
    double train_rec = 0.0, train_kl = 0.0, train_tot = 0.0;
    double val_rec = 0.0, val_kl = 0.0, val_tot = 0.0;
};

struct TrainResult {
    VAEParams params; // best-validation checkpoint
    std::vector<EpochStats> history;
    int best_epoch = 0;
    bool aborted = false; // non-finite loss; params hold the last good checkpoint
};

TrainResult train(const FieldDataset& ds, const ArchitectureSpec& arch, const TrainConfig& cfg);

struct CorrLenErrors {
    double corr_len = 0.0;
    std::vector<double> errors; // per test field, sqrt(|x - x'|^2 / |x|^2)
    double mean = 0.0;
    double stddev = 0.0;
};

struct TestReport {
    std::vector<CorrLenErrors> groups; // ascending correlation length
};

/// Deterministic reconstruction (eps = 0, running statistics) over the test
/// split, grouped by correlation length.
TestReport test_report(const VAEParams& params, const FieldDataset& ds);

// VAE1 model file: magic "VAE1", architecture descriptor, then every array
// (name, shape, trainable flag, data) as little-endian f64 in declaration
// order.
void save_vae(const std::filesystem::path& path, const VAEParams& params);
VAEParams load_vae(const std::filesystem::path& path);

void save_history_csv(const std::filesystem::path& path, const std::vector<EpochStats>& history);

} // namespace gwinv
