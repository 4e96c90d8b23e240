#include "gwinv/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <thread>

#include "gwinv/io.hpp"

namespace gwinv {

namespace {

std::string format_ell(double ell)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", ell);
    return buf;
}

int effective_threads(const ExperimentConfig& cfg)
{
    if (cfg.threads > 0) return cfg.threads;
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

std::vector<int> sample_without_replacement(long pool, long count, CounterRng& rng)
{
    std::vector<int> idx(pool);
    for (long i = 0; i < pool; ++i) idx[i] = static_cast<int>(i);
    const long k = std::min(count, pool);
    for (long i = 0; i < k; ++i) {
        const long j = i + static_cast<long>(rng.uniform01() * (pool - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
}

} // namespace

ExperimentPaths experiment_paths(const ExperimentConfig& cfg,
                                 const std::filesystem::path& config_dir)
{
    ExperimentPaths p;
    p.output = resolve_path(config_dir, cfg.output_dir);
    p.reference = cfg.reference.dir.empty() ? p.output / "reference"
                                            : resolve_path(config_dir, cfg.reference.dir);
    p.cache = p.output / "cache";
    p.dataset = p.output / "dataset";
    p.vae = p.output / "vae";
    p.mcmc = p.output / "mcmc";
    p.diagnostics = p.output / "diagnostics";
    return p;
}

KLEBasis basis_for(const ExperimentConfig& cfg, double corr_len,
                   const std::filesystem::path& cache_dir)
{
    CovarianceModel model = cfg.covariance;
    model.corr_len_x = corr_len;
    model.corr_len_y = corr_len;

    char name[128];
    std::snprintf(name, sizeof(name), "basis_nx%dny%d_ell%s.klb", cfg.grid.nx, cfg.grid.ny,
                  format_ell(corr_len).c_str());
    const std::filesystem::path cache = cache_dir / name;

    if (std::filesystem::exists(cache)) {
        KLEBasis basis = load_klb(cache, cfg.grid, model);
        double trace = 0.0;
        for (const double v : basis.eigenvalues) trace += v;
        const double expected = model.variance * cfg.grid.extent_x * cfg.grid.extent_y;
        if (std::abs(trace - expected) <= 1e-8 * expected
            && basis.eigenvectors.size()
                   == static_cast<std::size_t>(basis.size()) * cfg.grid.cell_count())
            return basis;
        // stale or partial cache: rebuild below
    }
    KLEBasis basis = kle_decompose(cfg.grid, model);
    std::filesystem::create_directories(cache_dir);
    save_klb(cache, basis, basis.size());
    return basis;
}

std::vector<WellSpec> wells_from_config(const ExperimentConfig& cfg)
{
    const WellPatternConfig& w = cfg.flow.wells;
    if (w.pattern == "five_spot")
        return five_spot(cfg.grid, w.rate_m3_per_day, w.bhp_pa);
    std::vector<WellSpec> wells;
    for (const auto& e : w.wells) {
        if (e.control == "rate")
            wells.push_back(rate_well(cfg.grid, e.i, e.j, e.value, w.well_radius));
        else if (e.control == "bhp")
            wells.push_back(bhp_well(cfg.grid, e.i, e.j, e.value, w.well_radius));
        else
            throw ConfigError("flow.wells.list: control must be 'rate' or 'bhp'");
    }
    return wells;
}

SensorLayout sensors_from_config(const ExperimentConfig& cfg)
{
    if (cfg.flow.sensors.pattern == "lattice") return default_sensor_lattice(cfg.grid);
    return sensors_from_positions(cfg.grid, cfg.flow.sensors.positions);
}

FlowContext flow_context_from_config(const ExperimentConfig& cfg, const SensorLayout& sensors)
{
    FlowContext ctx;
    ctx.grid = cfg.grid;
    ctx.fluid = cfg.flow.fluid;
    ctx.wells = wells_from_config(cfg);
    ctx.sensors = sensors;
    ctx.solver = cfg.flow.solver == "cg" ? LinearSolverKind::cg : LinearSolverKind::direct;
    return ctx;
}

PriorParameterization prior_from_config(const ExperimentConfig& cfg, const ExperimentPaths& paths)
{
    if (cfg.prior.type == "kle") {
        KLEBasis basis = basis_for(cfg, cfg.prior.corr_len, paths.cache);
        const int m = truncate(basis, cfg.prior.energy_target);
        return PriorParameterization::kle(std::move(basis), m, cfg.transform.psi,
                                          cfg.transform.rho);
    }
    const std::filesystem::path model = resolve_path(paths.output, cfg.prior.model_file);
    if (!std::filesystem::exists(model))
        throw ConfigError("prior.model_file does not exist: " + model.string());
    return PriorParameterization::vae(load_vae(model), cfg.grid, cfg.transform.psi,
                                      cfg.transform.rho);
}

void write_sensor_csv(const std::filesystem::path& path, const SensorLayout& layout,
                      const std::vector<double>& data)
{
    std::vector<std::vector<std::string>> rows;
    for (int i = 0; i < layout.count(); ++i)
        rows.push_back({std::to_string(i), format_double(layout.positions[i].x),
                        format_double(layout.positions[i].y), format_double(data[i])});
    write_csv(path, {"sensor_index", "x", "y", "pressure_pa"}, rows);
}

void read_sensor_csv(const std::filesystem::path& path, std::vector<Point>& positions,
                     std::vector<double>& data)
{
    positions.clear();
    data.clear();
    for (const auto& row : read_csv(path)) {
        if (row.size() < 4) throw std::runtime_error("malformed sensor CSV: " + path.string());
        positions.push_back({std::stod(row[1]), std::stod(row[2])});
        data.push_back(std::stod(row[3]));
    }
    if (positions.empty()) throw std::runtime_error("empty sensor CSV: " + path.string());
}

ReferenceOutputs cmd_gen_reference(const ExperimentConfig& cfg,
                                   const std::filesystem::path& config_dir)
{
    const ExperimentPaths paths = experiment_paths(cfg, config_dir);
    std::filesystem::create_directories(paths.reference);

    // Reference field from the complete expansion at the reference length.
    const KLEBasis basis = basis_for(cfg, cfg.reference.corr_len, paths.reference);
    std::vector<double> theta(basis.size());
    CounterRng theta_rng(derive_seed(cfg.master_seed, "reference:theta"));
    theta_rng.fill_normal(theta);
    const FieldSample y_ref = synthesize(basis, theta, basis.size());
    const FieldSample kappa = to_permeability(y_ref, cfg.transform.psi, cfg.transform.rho);

    const SensorLayout sensors = sensors_from_config(cfg);
    const FlowContext ctx = flow_context_from_config(cfg, sensors);
    const PressureSolution sol = assemble_and_solve(ctx.grid, kappa, ctx.fluid, ctx.wells,
                                                    ctx.solver);
    std::vector<double> data = sample_sensors(sol, sensors);
    if (cfg.flow.noise_std_pa > 0.0) {
        CounterRng noise_rng(derive_seed(cfg.master_seed, "reference:noise"));
        for (double& v : data) v += cfg.flow.noise_std_pa * noise_rng.normal();
    }

    ReferenceOutputs out;
    out.gaussian_field = paths.reference / "y_ref.fld";
    out.permeability_field = paths.reference / "kappa_ref.fld";
    out.pressure_field = paths.reference / "pressure_ref.fld";
    out.sensor_csv = paths.reference / "sensors.csv";
    save_fld(out.gaussian_field, y_ref);
    save_fld(out.permeability_field, kappa);
    FieldSample pressure;
    pressure.grid = cfg.grid;
    pressure.kind = FieldKind::pressure;
    pressure.values = sol.pressure;
    save_fld(out.pressure_field, pressure);
    write_sensor_csv(out.sensor_csv, sensors, data);

    write_file_atomic(paths.reference / "meta.csv",
                      "key,value\nmaster_seed," + std::to_string(cfg.master_seed) + "\ncorr_len,"
                          + format_double(cfg.reference.corr_len) + "\nnoise_std_pa,"
                          + format_double(cfg.flow.noise_std_pa) + "\n");
    out.sensor_data = std::move(data);
    return out;
}

DatasetOutputs cmd_gen_dataset(const ExperimentConfig& cfg,
                               const std::filesystem::path& config_dir)
{
    const ExperimentPaths paths = experiment_paths(cfg, config_dir);
    const std::filesystem::path fields_dir = paths.dataset / "fields";
    std::filesystem::create_directories(fields_dir);

    FieldDataset ds;
    ds.h = cfg.grid.ny;
    ds.w = cfg.grid.nx;

    const long per_ell = cfg.vae_training.fields_per_corr_len;
    const int threads = effective_threads(cfg);

    for (const double ell : cfg.corr_lengths) {
        const KLEBasis basis = basis_for(cfg, ell, paths.cache);
        const std::string tag = format_ell(ell);

        const long first_item = static_cast<long>(ds.items.size());
        for (long idx = 0; idx < per_ell; ++idx) {
            DatasetItem item;
            char name[128];
            std::snprintf(name, sizeof(name), "fields/ell%s_%06ld.fld", tag.c_str(), idx);
            item.file = name;
            item.corr_len = ell;
            ds.items.push_back(std::move(item));
        }

        std::atomic<long> next{0};
        const auto worker = [&]() {
            std::vector<double> theta(basis.size());
            while (true) {
                const long idx = next.fetch_add(1);
                if (idx >= per_ell) return;
                CounterRng rng(derive_seed(cfg.master_seed,
                                           "dataset:ell=" + tag + ":field=" + std::to_string(idx)));
                rng.fill_normal(theta);
                const FieldSample y = synthesize(basis, theta, basis.size());
                save_fld(paths.dataset / ds.items[first_item + idx].file, y);
            }
        };
        if (threads <= 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
            for (auto& th : pool) th.join();
        }
    }

    assign_splits(ds, cfg.vae_training.split_fractions[0], cfg.vae_training.split_fractions[1],
                  cfg.vae_training.split_fractions[2],
                  derive_seed(cfg.master_seed, "dataset:splits"));

    std::vector<std::vector<std::string>> rows;
    rows.reserve(ds.items.size());
    for (const auto& item : ds.items) {
        const char* split = item.split == Split::train ? "train"
                            : item.split == Split::val ? "val"
                                                       : "test";
        rows.push_back({item.file, format_double(item.corr_len), split});
    }
    DatasetOutputs out;
    out.manifest = paths.dataset / "manifest.csv";
    out.field_count = static_cast<long>(ds.items.size());
    write_csv(out.manifest, {"field_file", "corr_len", "split"}, rows);
    return out;
}

TrainOutputs cmd_train_vae(const ExperimentConfig& cfg, const std::filesystem::path& config_dir)
{
    const ExperimentPaths paths = experiment_paths(cfg, config_dir);
    const std::filesystem::path manifest =
        resolve_path(paths.output, cfg.vae_training.dataset_manifest);
    if (!std::filesystem::exists(manifest))
        throw ConfigError("vae_training.dataset_manifest does not exist: " + manifest.string());

    ArchitectureSpec arch;
    arch.input_h = cfg.grid.ny;
    arch.input_w = cfg.grid.nx;
    arch.channels = cfg.vae_training.channels;
    arch.kernel = cfg.vae_training.kernel;
    arch.dense_width = cfg.vae_training.dense_width;
    arch.latent_dim = cfg.vae_training.latent_dim;

    std::printf("encoder summary (%dx%dx1, N_z=%d):\n", arch.input_h, arch.input_w,
                arch.latent_dim);
    for (const auto& layer : arch.encoder_summary())
        std::printf("  %-12s %ld\n", layer.name.c_str(), layer.param_count);

    const FieldDataset ds = load_dataset(manifest, cfg.grid);
    TrainConfig tc;
    tc.batch_size = cfg.vae_training.batch_size;
    tc.epochs = cfg.vae_training.epochs;
    tc.learning_rate = cfg.vae_training.learning_rate;
    tc.beta = cfg.vae_training.beta;
    tc.seed = derive_seed(cfg.master_seed, "vae:train");

    const TrainResult result = train(ds, arch, tc);

    std::filesystem::create_directories(paths.vae);
    TrainOutputs out;
    out.model = paths.vae / "model.vae";
    out.history = paths.vae / "history.csv";
    out.test_errors = paths.vae / "test_errors.csv";
    out.aborted = result.aborted;
    out.best_epoch = result.best_epoch;
    save_vae(out.model, result.params);
    save_history_csv(out.history, result.history);

    const TestReport report = test_report(result.params, ds);
    std::vector<std::vector<std::string>> err_rows, sum_rows;
    for (const auto& g : report.groups) {
        for (const double e : g.errors)
            err_rows.push_back({format_double(g.corr_len), format_double(e)});
        sum_rows.push_back({format_double(g.corr_len), format_double(g.mean),
                            format_double(g.stddev), std::to_string(g.errors.size())});
    }
    write_csv(out.test_errors, {"corr_len", "relative_error"}, err_rows);
    write_csv(paths.vae / "test_summary.csv", {"corr_len", "mean", "stddev", "count"}, sum_rows);

    if (result.aborted)
        throw std::runtime_error("train-vae: divergent loss; last good checkpoint written to "
                                 + out.model.string());
    return out;
}

McmcOutputs cmd_run_mcmc(const ExperimentConfig& cfg, const std::filesystem::path& config_dir,
                         std::optional<long> max_iterations_override)
{
    const ExperimentPaths paths = experiment_paths(cfg, config_dir);
    const std::filesystem::path sensor_csv = paths.reference / "sensors.csv";
    if (!std::filesystem::exists(sensor_csv))
        throw ConfigError("reference sensor data missing (run gen-reference first): "
                          + sensor_csv.string());

    std::vector<Point> positions;
    std::vector<double> d_ref;
    read_sensor_csv(sensor_csv, positions, d_ref);
    const SensorLayout sensors = sensors_from_positions(cfg.grid, positions);
    const FlowContext ctx = flow_context_from_config(cfg, sensors);
    const PriorParameterization prior = prior_from_config(cfg, paths);

    LikelihoodSpec lik;
    lik.d_ref = d_ref;
    lik.sigma_sq = cfg.likelihood.sigma_sq;

    ChainConfig cc;
    cc.iterations = max_iterations_override.value_or(cfg.mcmc.iterations);
    cc.burn_in = max_iterations_override ? cc.iterations / 30 : cfg.mcmc.effective_burn_in();
    cc.gamma = cfg.mcmc.gamma;
    cc.thinning = cfg.mcmc.thinning;
    cc.seed = derive_seed(cfg.master_seed, "mcmc");

    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<ChainTrace> traces =
        run_ensemble(cfg.mcmc.chains, cc, prior, lik, ctx, paths.mcmc, effective_threads(cfg));
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    McmcOutputs out;
    out.wall_seconds = wall;
    std::vector<std::vector<std::string>> rows;
    for (std::size_t c = 0; c < traces.size(); ++c) {
        out.trace_files.push_back(paths.mcmc / ("chain_" + std::to_string(c) + ".trc"));
        const double ar = acceptance_rate(traces[c]);
        out.acceptance_rates.push_back(ar);
        rows.push_back({std::to_string(c), std::to_string(traces[c].records()),
                        format_double(ar), std::to_string(traces[c].solver_failures),
                        format_double(wall)});
    }
    out.summary = paths.mcmc / "summary.csv";
    write_csv(out.summary, {"chain", "records", "acceptance_rate_pct", "solver_failures",
                            "wall_seconds"},
              rows);
    return out;
}

DiagnoseOutputs cmd_diagnose(const ExperimentConfig& cfg, const std::filesystem::path& config_dir,
                             const std::optional<std::filesystem::path>& baseline_diag_dir)
{
    const ExperimentPaths paths = experiment_paths(cfg, config_dir);
    std::filesystem::create_directories(paths.diagnostics);

    std::vector<ChainTrace> traces;
    for (int c = 0;; ++c) {
        const std::filesystem::path p = paths.mcmc / ("chain_" + std::to_string(c) + ".trc");
        if (!std::filesystem::exists(p)) break;
        traces.push_back(load_trace(p));
    }
    if (traces.size() < 2)
        throw ConfigError("diagnose: need at least two chain traces under " + paths.mcmc.string());
    for (const auto& t : traces)
        if (t.latent_dim != traces[0].latent_dim)
            throw std::runtime_error("diagnose: mismatched latent dimensions across chains");

    const long burn_in = traces[0].burn_in;
    DiagnoseOutputs out;
    out.dir = paths.diagnostics;
    out.mpsrf = mpsrf(traces, burn_in, cfg.diagnostics.checkpoint_interval,
                      cfg.diagnostics.mpsrf_threshold);

    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < out.mpsrf.checkpoints.size(); ++i)
        rows.push_back({std::to_string(out.mpsrf.checkpoints[i]),
                        format_double(out.mpsrf.rhat[i])});
    write_csv(paths.diagnostics / "mpsrf.csv", {"checkpoint", "rhat"}, rows);

    rows.clear();
    double ar_sum = 0.0;
    for (std::size_t c = 0; c < traces.size(); ++c) {
        const double ar = acceptance_rate(traces[c]);
        ar_sum += ar;
        rows.push_back({std::to_string(c), format_double(ar)});
    }
    out.mean_acceptance_rate = ar_sum / static_cast<double>(traces.size());
    write_csv(paths.diagnostics / "ar.csv", {"chain", "acceptance_rate_pct"}, rows);

    // Posterior pool: the last sixth of each chain, and past both burn-in and
    // the MPSRF convergence point.
    const long max_iter = traces[0].max_iter;
    long start = std::max(burn_in, max_iter - max_iter / 6);
    if (out.mpsrf.converged) start = std::max(start, out.mpsrf.convergence_iteration);

    struct PoolRef {
        int chain;
        long record;
    };
    std::vector<PoolRef> pool;
    for (std::size_t c = 0; c < traces.size(); ++c)
        for (long r = 0; r < traces[c].records(); ++r)
            if (static_cast<long>(traces[c].iteration[r]) > start)
                pool.push_back({static_cast<int>(c), r});
    if (pool.empty()) throw std::runtime_error("diagnose: empty posterior pool");

    CounterRng draw_rng(derive_seed(cfg.master_seed, "diagnose:samples"));
    const std::vector<int> picks = sample_without_replacement(
        static_cast<long>(pool.size()), cfg.diagnostics.posterior_samples, draw_rng);

    const FieldSample y_ref = load_fld(paths.reference / "y_ref.fld", cfg.grid);
    std::vector<Point> positions;
    std::vector<double> d_ref;
    read_sensor_csv(paths.reference / "sensors.csv", positions, d_ref);
    const SensorLayout sensors = sensors_from_positions(cfg.grid, positions);
    const FlowContext ctx = flow_context_from_config(cfg, sensors);
    const PriorParameterization prior = prior_from_config(cfg, paths);

    std::vector<std::vector<double>> posterior_data;
    std::vector<double> rey_values;
    posterior_data.reserve(picks.size());
    rey_values.reserve(picks.size());
    FieldSample mean_field;
    mean_field.grid = cfg.grid;
    mean_field.kind = FieldKind::gaussian;
    mean_field.values.assign(cfg.grid.cell_count(), 0.0);
    long mean_count = 0;

    for (std::size_t s = 0; s < picks.size(); ++s) {
        const PoolRef ref = pool[picks[s]];
        const auto theta = traces[ref.chain].state(ref.record);
        const FieldSample y = prior.to_gaussian(theta);
        const FieldSample kappa = gwinv::to_permeability(y, cfg.transform.psi, cfg.transform.rho);
        const PressureSolution sol =
            assemble_and_solve(ctx.grid, kappa, ctx.fluid, ctx.wells, ctx.solver);
        posterior_data.push_back(sample_sensors(sol, sensors));
        rey_values.push_back(std::sqrt(relative_misfit_sq(y_ref.values, y.values)));
        if (static_cast<long>(s) < cfg.diagnostics.mean_field_samples) {
            for (int c = 0; c < cfg.grid.cell_count(); ++c) mean_field.values[c] += y.values[c];
            ++mean_count;
        }
    }
    for (double& v : mean_field.values) v /= static_cast<double>(mean_count);
    save_fld(paths.diagnostics / "mean_field.fld", mean_field);

    out.dre = data_relative_error(d_ref, posterior_data);
    out.rey = summarize(std::move(rey_values));

    rows.clear();
    for (std::size_t i = 0; i < out.dre.values.size(); ++i)
        rows.push_back({std::to_string(i), format_double(out.dre.values[i])});
    write_csv(paths.diagnostics / "dre.csv", {"sample_id", "value"}, rows);
    rows.clear();
    for (std::size_t i = 0; i < out.rey.values.size(); ++i)
        rows.push_back({std::to_string(i), format_double(out.rey.values[i])});
    write_csv(paths.diagnostics / "rey.csv", {"sample_id", "value"}, rows);

    if (baseline_diag_dir) {
        const auto read_values = [](const std::filesystem::path& p) {
            std::vector<double> v;
            for (const auto& row : read_csv(p)) v.push_back(std::stod(row[1]));
            return v;
        };
        const std::vector<double> base_dre = read_values(*baseline_diag_dir / "dre.csv");
        const std::vector<double> base_rey = read_values(*baseline_diag_dir / "rey.csv");

        CounterRng ks_rng(derive_seed(cfg.master_seed, "diagnose:ks"));
        const auto subsample = [&](const std::vector<double>& v) {
            const std::vector<int> pick = sample_without_replacement(
                static_cast<long>(v.size()), cfg.diagnostics.ks_sample_size, ks_rng);
            std::vector<double> out_v;
            out_v.reserve(pick.size());
            for (const int i : pick) out_v.push_back(v[i]);
            return out_v;
        };
        const std::string here = paths.output.filename().string();
        const std::string there = baseline_diag_dir->parent_path().filename().string();
        rows.clear();
        const KSResult ks_dre = ks_two_sample(subsample(out.dre.values), subsample(base_dre));
        const KSResult ks_rey = ks_two_sample(subsample(out.rey.values), subsample(base_rey));
        out.ks = {ks_dre, ks_rey};
        rows.push_back({here + ":dre", there + ":dre", format_double(ks_dre.d),
                        format_double(ks_dre.p_value)});
        rows.push_back({here + ":rey", there + ":rey", format_double(ks_rey.d),
                        format_double(ks_rey.p_value)});
        write_csv(paths.diagnostics / "ks.csv", {"experiment_a", "experiment_b", "d", "p"}, rows);
    }

    rows.clear();
    rows.push_back({"converged", out.mpsrf.converged ? "1" : "0"});
    rows.push_back({"convergence_iteration", std::to_string(out.mpsrf.convergence_iteration)});
    rows.push_back({"mean_acceptance_rate_pct", format_double(out.mean_acceptance_rate)});
    rows.push_back({"mu_dre", format_double(out.dre.mean)});
    rows.push_back({"sigma_dre", format_double(out.dre.stddev)});
    rows.push_back({"mu_rey", format_double(out.rey.mean)});
    rows.push_back({"sigma_rey", format_double(out.rey.stddev)});
    rows.push_back({"posterior_samples", std::to_string(out.dre.count())});
    write_csv(paths.diagnostics / "summary.csv", {"key", "value"}, rows);
    return out;
}

void cmd_export(const ExperimentConfig& cfg, const std::filesystem::path& input,
                const std::filesystem::path& output)
{
    if (!std::filesystem::exists(input))
        throw ConfigError("export: input does not exist: " + input.string());
    const std::string ext = input.extension().string();
    if (ext == ".fld") {
        const FieldSample f = load_fld(input, cfg.grid);
        std::vector<std::vector<std::string>> rows;
        for (int j = 0; j < cfg.grid.ny; ++j)
            for (int i = 0; i < cfg.grid.nx; ++i) {
                const Point p = cfg.grid.center(i, j);
                rows.push_back({std::to_string(i), std::to_string(j), format_double(p.x),
                                format_double(p.y),
                                format_double(f.values[cfg.grid.index(i, j)])});
            }
        write_csv(output, {"i", "j", "x", "y", "value"}, rows);
    } else if (ext == ".trc") {
        const ChainTrace t = load_trace(input);
        std::vector<std::string> header = {"iteration", "accept", "logl"};
        for (int d = 0; d < t.latent_dim; ++d) header.push_back("theta_" + std::to_string(d));
        std::vector<std::vector<std::string>> rows;
        for (long r = 0; r < t.records(); ++r) {
            std::vector<std::string> row = {std::to_string(t.iteration[r]),
                                            std::to_string(static_cast<int>(t.accept[r])),
                                            format_double(t.logl[r])};
            for (const double v : t.state(r)) row.push_back(format_double(v));
            rows.push_back(std::move(row));
        }
        write_csv(output, header, rows);
    } else {
        throw ConfigError("export: unsupported input type: " + ext);
    }
}

} // namespace gwinv
