#include "gwinv/mcmc.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <thread>

namespace gwinv {

PriorParameterization PriorParameterization::kle(KLEBasis basis, int modes, double psi, double rho)
{
    if (modes < 1 || modes > basis.size())
        throw std::invalid_argument("prior: mode count outside basis range");
    if (static_cast<std::size_t>(modes) * basis.grid.cell_count() > basis.eigenvectors.size())
        throw std::invalid_argument("prior: basis stores fewer eigenvectors than requested modes");
    PriorParameterization p;
    p.grid_ = basis.grid;
    p.basis_ = std::make_shared<const KLEBasis>(std::move(basis));
    p.latent_dim_ = modes;
    p.modes_ = modes;
    p.psi_ = psi;
    p.rho_ = rho;
    return p;
}

PriorParameterization PriorParameterization::vae(VAEParams params, GridSpec grid, double psi,
                                                 double rho)
{
    if (params.arch.input_h != grid.ny || params.arch.input_w != grid.nx)
        throw std::invalid_argument("prior: decoder output does not match grid");
    PriorParameterization p;
    p.grid_ = grid;
    p.latent_dim_ = params.arch.latent_dim;
    p.vae_ = std::make_shared<const VAEParams>(std::move(params));
    p.psi_ = psi;
    p.rho_ = rho;
    return p;
}

FieldSample PriorParameterization::to_gaussian(std::span<const double> theta) const
{
    if (static_cast<int>(theta.size()) != latent_dim_)
        throw std::invalid_argument("prior: latent dimension mismatch");
    if (basis_) return synthesize(*basis_, theta, modes_);
    FieldSample y;
    y.grid = grid_;
    y.kind = FieldKind::gaussian;
    y.values = decode(*vae_, theta);
    return y;
}

FieldSample PriorParameterization::to_permeability(std::span<const double> theta) const
{
    return gwinv::to_permeability(to_gaussian(theta), psi_, rho_);
}

FieldSample latent_to_permeability(const PriorParameterization& prior,
                                   std::span<const double> theta)
{
    return prior.to_permeability(theta);
}

void LikelihoodSpec::validate() const
{
    if (d_ref.empty()) throw std::invalid_argument("likelihood: empty reference data");
    if (!(sigma_sq > 0.0)) throw std::invalid_argument("likelihood: sigma_sq must be > 0");
    double norm = 0.0;
    for (const double v : d_ref) norm += v * v;
    if (!(norm > 0.0)) throw std::invalid_argument("likelihood: zero reference norm");
}

double relative_misfit_sq(std::span<const double> d_ref, std::span<const double> d_sim)
{
    if (d_ref.size() != d_sim.size())
        throw std::invalid_argument("misfit: data length mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < d_ref.size(); ++i) {
        const double d = d_ref[i] - d_sim[i];
        num += d * d;
        den += d_ref[i] * d_ref[i];
    }
    if (!(den > 0.0)) throw std::invalid_argument("misfit: zero reference norm");
    return num / den;
}

double log_likelihood(const LikelihoodSpec& spec, std::span<const double> d_sim)
{
    return -relative_misfit_sq(spec.d_ref, d_sim) / spec.sigma_sq;
}

std::vector<double> pcn_propose(std::span<const double> theta, double gamma, CounterRng& rng)
{
    if (!(gamma > 0.0) || gamma > 1.0) throw std::invalid_argument("pcn: gamma must lie in (0,1]");
    const double keep = std::sqrt(1.0 - gamma * gamma);
    std::vector<double> xi(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) xi[i] = keep * theta[i] + gamma * rng.normal();
    return xi;
}

void ChainConfig::validate() const
{
    if (iterations < 1) throw std::invalid_argument("mcmc: iterations must be >= 1");
    if (burn_in < 0 || burn_in >= iterations)
        throw std::invalid_argument("mcmc: burn-in must lie in [0, iterations)");
    if (!(gamma > 0.0) || gamma > 1.0) throw std::invalid_argument("mcmc: gamma must lie in (0,1]");
    if (thinning < 1) throw std::invalid_argument("mcmc: thinning must be >= 1");
}

double evaluate_state(const PriorParameterization& prior, const LikelihoodSpec& lik,
                      const FlowContext& ctx, std::span<const double> theta)
{
    const FieldSample perm = prior.to_permeability(theta);
    const PressureSolution sol = assemble_and_solve(ctx.grid, perm, ctx.fluid, ctx.wells,
                                                    ctx.solver);
    return log_likelihood(lik, sample_sensors(sol, ctx.sensors));
}

bool metropolis_step(ChainState& state, const PriorParameterization& prior,
                     const LikelihoodSpec& lik, const FlowContext& ctx, double gamma,
                     CounterRng& rng, long* solver_failures)
{
    const std::vector<double> xi = pcn_propose(state.theta, gamma, rng);
    double logl_xi;
    try {
        logl_xi = evaluate_state(prior, lik, ctx, xi);
    } catch (const std::runtime_error&) {
        if (solver_failures) ++*solver_failures;
        rng.uniform01(); // keep the draw sequence aligned with the accept branch
        return false;
    }
    const double log_alpha = logl_xi - state.logl;
    const double u = rng.uniform01();
    if (std::log(u) < log_alpha) {
        state.theta = xi;
        state.logl = logl_xi;
        return true;
    }
    return false;
}

namespace {

class TraceWriter {
public:
    TraceWriter(const std::filesystem::path& path, const ChainTrace& header) : path_(path)
    {
        os_.open(path, std::ios::binary | std::ios::trunc);
        if (!os_) throw std::runtime_error("cannot open trace for writing: " + path.string());
        os_.write("TRC1", 4);
        const std::uint32_t n = static_cast<std::uint32_t>(header.latent_dim);
        const std::uint64_t maxit = static_cast<std::uint64_t>(header.max_iter);
        const std::uint64_t burn = static_cast<std::uint64_t>(header.burn_in);
        const std::uint32_t thin = static_cast<std::uint32_t>(header.thinning);
        const std::uint64_t seed = header.seed;
        os_.write(reinterpret_cast<const char*>(&n), 4);
        os_.write(reinterpret_cast<const char*>(&maxit), 8);
        os_.write(reinterpret_cast<const char*>(&burn), 8);
        os_.write(reinterpret_cast<const char*>(&thin), 4);
        os_.write(reinterpret_cast<const char*>(&seed), 8);
    }

    void record(std::uint64_t iteration, bool accepted, double logl,
                std::span<const double> theta)
    {
        os_.write(reinterpret_cast<const char*>(&iteration), 8);
        const std::uint8_t a = accepted ? 1 : 0;
        os_.write(reinterpret_cast<const char*>(&a), 1);
        os_.write(reinterpret_cast<const char*>(&logl), 8);
        os_.write(reinterpret_cast<const char*>(theta.data()),
                  static_cast<std::streamsize>(theta.size() * sizeof(double)));
        if (!os_) throw std::runtime_error("trace write failed: " + path_.string());
    }

    void flush() { os_.flush(); }

private:
    std::filesystem::path path_;
    std::ofstream os_;
};

} // namespace

ChainTrace run_chain(const ChainConfig& cfg, const PriorParameterization& prior,
                     const LikelihoodSpec& lik, const FlowContext& ctx,
                     const std::optional<std::filesystem::path>& trace_path)
{
    cfg.validate();
    lik.validate();
    const int n = prior.latent_dim();

    ChainTrace trace;
    trace.latent_dim = n;
    trace.max_iter = cfg.iterations;
    trace.burn_in = cfg.burn_in;
    trace.thinning = cfg.thinning;
    trace.seed = cfg.seed;

    std::unique_ptr<TraceWriter> writer;
    if (trace_path) writer = std::make_unique<TraceWriter>(*trace_path, trace);

    CounterRng rng(cfg.seed);
    ChainState state;
    state.theta.resize(n);
    rng.fill_normal(state.theta);
    state.logl = evaluate_state(prior, lik, ctx, state.theta);

    const long expected = (cfg.iterations + cfg.thinning - 1) / cfg.thinning;
    trace.iteration.reserve(expected);
    trace.accept.reserve(expected);
    trace.logl.reserve(expected);
    trace.theta.reserve(expected * n);

    for (long t = 1; t <= cfg.iterations; ++t) {
        const bool accepted =
            metropolis_step(state, prior, lik, ctx, cfg.gamma, rng, &trace.solver_failures);
        if (t > cfg.burn_in) {
            ++trace.moves_post_burnin;
            if (accepted) ++trace.accepted_post_burnin;
        }
        if ((t - 1) % cfg.thinning == 0) {
            trace.iteration.push_back(static_cast<std::uint64_t>(t));
            trace.accept.push_back(accepted ? 1 : 0);
            trace.logl.push_back(state.logl);
            trace.theta.insert(trace.theta.end(), state.theta.begin(), state.theta.end());
            if (writer) {
                writer->record(static_cast<std::uint64_t>(t), accepted, state.logl, state.theta);
                if (t % 1000 == 0) writer->flush();
            }
        }
    }
    return trace;
}

std::vector<ChainTrace> run_ensemble(int n_chains, const ChainConfig& cfg,
                                     const PriorParameterization& prior,
                                     const LikelihoodSpec& lik, const FlowContext& ctx,
                                     const std::optional<std::filesystem::path>& trace_dir,
                                     int threads)
{
    if (n_chains < 1) throw std::invalid_argument("mcmc: need at least one chain");
    if (threads < 1) threads = 1;
    if (trace_dir) std::filesystem::create_directories(*trace_dir);

    std::vector<ChainTrace> traces(n_chains);
    std::vector<std::string> errors(n_chains);
    std::atomic<int> next{0};

    const auto worker = [&]() {
        while (true) {
            const int c = next.fetch_add(1);
            if (c >= n_chains) return;
            ChainConfig chain_cfg = cfg;
            chain_cfg.seed = derive_seed(cfg.seed, "chain:" + std::to_string(c));
            std::optional<std::filesystem::path> path;
            if (trace_dir) path = *trace_dir / ("chain_" + std::to_string(c) + ".trc");
            try {
                traces[c] = run_chain(chain_cfg, prior, lik, ctx, path);
            } catch (const std::exception& e) {
                errors[c] = e.what();
            }
        }
    };

    if (threads == 1 || n_chains == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        const int k = std::min(threads, n_chains);
        pool.reserve(k);
        for (int i = 0; i < k; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    std::string aborted;
    for (int c = 0; c < n_chains; ++c)
        if (!errors[c].empty()) aborted += "chain " + std::to_string(c) + ": " + errors[c] + "; ";
    if (!aborted.empty()) throw std::runtime_error("ensemble chains aborted: " + aborted);
    return traces;
}

ChainTrace load_trace(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open trace: " + path.string());
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "TRC1", 4) != 0)
        throw std::runtime_error("bad magic, expected TRC1: " + path.string());

    ChainTrace trace;
    std::uint32_t n = 0, thin = 0;
    std::uint64_t maxit = 0, burn = 0, seed = 0;
    is.read(reinterpret_cast<char*>(&n), 4);
    is.read(reinterpret_cast<char*>(&maxit), 8);
    is.read(reinterpret_cast<char*>(&burn), 8);
    is.read(reinterpret_cast<char*>(&thin), 4);
    is.read(reinterpret_cast<char*>(&seed), 8);
    if (!is) throw std::runtime_error("truncated trace header: " + path.string());
    trace.latent_dim = static_cast<int>(n);
    trace.max_iter = static_cast<long>(maxit);
    trace.burn_in = static_cast<long>(burn);
    trace.thinning = static_cast<int>(thin);
    trace.seed = seed;

    std::vector<double> theta(n);
    while (true) {
        std::uint64_t it = 0;
        is.read(reinterpret_cast<char*>(&it), 8);
        if (!is) break;
        std::uint8_t acc = 0;
        double logl = 0.0;
        is.read(reinterpret_cast<char*>(&acc), 1);
        is.read(reinterpret_cast<char*>(&logl), 8);
        is.read(reinterpret_cast<char*>(theta.data()),
                static_cast<std::streamsize>(theta.size() * sizeof(double)));
        if (!is) throw std::runtime_error("truncated trace record: " + path.string());
        trace.iteration.push_back(it);
        trace.accept.push_back(acc);
        trace.logl.push_back(logl);
        trace.theta.insert(trace.theta.end(), theta.begin(), theta.end());
        const long t = static_cast<long>(it);
        if (t > trace.burn_in) {
            ++trace.moves_post_burnin;
            if (acc) ++trace.accepted_post_burnin;
        }
    }
    return trace;
}

} // namespace gwinv
