#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "gwinv/flow.hpp"
#include "gwinv/kle.hpp"
#include "gwinv/rng.hpp"
#include "gwinv/vae.hpp"

namespace gwinv {

/// Maps a latent vector to a permeability field through either a truncated
/// KLE synthesis or a trained VAE decoder, followed by the log-normal
/// transform kappa = psi*exp(rho*Y).
class PriorParameterization {
public:
    static PriorParameterization kle(KLEBasis basis, int modes, double psi, double rho);
    static PriorParameterization vae(VAEParams params, GridSpec grid, double psi, double rho);

    int latent_dim() const { return latent_dim_; }
    const GridSpec& grid() const { return grid_; }
    double psi() const { return psi_; }
    double rho() const { return rho_; }

    FieldSample to_gaussian(std::span<const double> theta) const;
    FieldSample to_permeability(std::span<const double> theta) const;

private:
    PriorParameterization() = default;

    std::shared_ptr<const KLEBasis> basis_;
    std::shared_ptr<const VAEParams> vae_;
    GridSpec grid_;
    int latent_dim_ = 0;
    int modes_ = 0;
    double psi_ = 0.0;
    double rho_ = 1.0;
};

FieldSample latent_to_permeability(const PriorParameterization& prior,
                                   std::span<const double> theta);

struct LikelihoodSpec {
    std::vector<double> d_ref; // Pa, one per sensor
    double sigma_sq = 1e-3;    // overall precision of the normalized misfit

    void validate() const;
};

/// Normalized squared misfit sum((ref-sim)^2)/sum(ref^2).
double relative_misfit_sq(std::span<const double> d_ref, std::span<const double> d_sim);

/// log L = -relative_misfit_sq / sigma_sq.
double log_likelihood(const LikelihoodSpec& spec, std::span<const double> d_sim);

/// pCN: xi = sqrt(1-gamma^2)*theta + gamma*eps, eps ~ N(0,I).
std::vector<double> pcn_propose(std::span<const double> theta, double gamma, CounterRng& rng);

struct FlowContext {
    GridSpec grid;
    FluidAndRock fluid;
    std::vector<WellSpec> wells;
    SensorLayout sensors;
    LinearSolverKind solver = LinearSolverKind::direct;
};

struct ChainConfig {
    long iterations = 20000;
    long burn_in = 0; // must be < iterations
    double gamma = 0.1;
    std::uint64_t seed = 0;
    int thinning = 1;

    void validate() const;
};

struct ChainTrace {
    int latent_dim = 0;
    long max_iter = 0;
    long burn_in = 0;
    int thinning = 1;
    std::uint64_t seed = 0;

    std::vector<std::uint64_t> iteration; // 1-based iteration of each stored record
    std::vector<std::uint8_t> accept;
    std::vector<double> logl;
    std::vector<double> theta; // flattened, latent_dim per record

    long accepted_post_burnin = 0; // NA
    long moves_post_burnin = 0;    // Nr
    long solver_failures = 0;

    long records() const { return static_cast<long>(iteration.size()); }
    std::span<const double> state(long r) const
    {
        return {theta.data() + r * latent_dim, static_cast<std::size_t>(latent_dim)};
    }
};

struct ChainState {
    std::vector<double> theta;
    double logl = 0.0;
};

/// Evaluates prior -> flow -> sensors -> log-likelihood for a latent state.
double evaluate_state(const PriorParameterization& prior, const LikelihoodSpec& lik,
                      const FlowContext& ctx, std::span<const double> theta);

/// One Metropolis transition with a pCN proposal; the current state's
/// log-likelihood is cached in `state`. Flow-solver failure on the proposal
/// counts as a rejection.
bool metropolis_step(ChainState& state, const PriorParameterization& prior,
                     const LikelihoodSpec& lik, const FlowContext& ctx, double gamma,
                     CounterRng& rng, long* solver_failures = nullptr);

/// Full chain: theta^1 ~ N(0,I), then `iterations` Metropolis steps. When a
/// trace path is given, records are appended to the TRC1 file as they are
/// produced.
ChainTrace run_chain(const ChainConfig& cfg, const PriorParameterization& prior,
                     const LikelihoodSpec& lik, const FlowContext& ctx,
                     const std::optional<std::filesystem::path>& trace_path = std::nullopt);

/// Independent chains with seeds derived from the master seed; distributed
/// over at most `threads` workers. Chain c writes chain_<c>.trc under
/// trace_dir when given.
std::vector<ChainTrace> run_ensemble(int n_chains, const ChainConfig& cfg,
                                     const PriorParameterization& prior,
                                     const LikelihoodSpec& lik, const FlowContext& ctx,
                                     const std::optional<std::filesystem::path>& trace_dir,
                                     int threads);

// TRC1 trace file: magic "TRC1", u32 latent_dim, u64 max_iter, u64 burn_in,
// u32 thinning, u64 seed, then records (u64 iteration, u8 accept, f64 logl,
// latent_dim * f64 theta), little-endian.
ChainTrace load_trace(const std::filesystem::path& path);

} // namespace gwinv
