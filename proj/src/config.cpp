#include "gwinv/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace gwinv {

using nlohmann::json;

namespace {

/// Fetch with config-path context in error messages.
template <typename T>
void get_if(const json& j, const char* key, T& out, const std::string& where)
{
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

void check(bool ok, const std::string& message)
{
    if (!ok) throw ConfigError("config: " + message);
}

json merge_patch(json base, const json& overlay)
{
    if (!overlay.is_object() || !base.is_object()) return overlay;
    for (const auto& [key, value] : overlay.items()) {
        if (base.contains(key))
            base[key] = merge_patch(base[key], value);
        else
            base[key] = value;
    }
    return base;
}

ExperimentConfig from_json(const json& j)
{
    ExperimentConfig c;
    get_if(j, "output_dir", c.output_dir, "config");
    get_if(j, "master_seed", c.master_seed, "config");
    get_if(j, "threads", c.threads, "config");

    if (j.contains("grid")) {
        const json& g = j.at("grid");
        get_if(g, "extent_x", c.grid.extent_x, "grid");
        get_if(g, "extent_y", c.grid.extent_y, "grid");
        get_if(g, "nx", c.grid.nx, "grid");
        get_if(g, "ny", c.grid.ny, "grid");
    }
    if (j.contains("covariance")) {
        const json& g = j.at("covariance");
        get_if(g, "variance", c.covariance.variance, "covariance");
        get_if(g, "mean", c.covariance.mean, "covariance");
        get_if(g, "corr_lengths", c.corr_lengths, "covariance");
    }
    if (j.contains("transform")) {
        const json& g = j.at("transform");
        get_if(g, "psi", c.transform.psi, "transform");
        get_if(g, "rho", c.transform.rho, "transform");
    }
    if (j.contains("flow")) {
        const json& g = j.at("flow");
        get_if(g, "viscosity", c.flow.fluid.viscosity, "flow");
        get_if(g, "porosity", c.flow.fluid.porosity, "flow");
        get_if(g, "solver", c.flow.solver, "flow");
        get_if(g, "noise_std_pa", c.flow.noise_std_pa, "flow");
        if (g.contains("wells")) {
            const json& w = g.at("wells");
            get_if(w, "pattern", c.flow.wells.pattern, "flow.wells");
            get_if(w, "rate_m3_per_day", c.flow.wells.rate_m3_per_day, "flow.wells");
            get_if(w, "bhp_pa", c.flow.wells.bhp_pa, "flow.wells");
            get_if(w, "well_radius", c.flow.wells.well_radius, "flow.wells");
            if (w.contains("list")) {
                for (const auto& e : w.at("list")) {
                    WellPatternConfig::Entry entry;
                    get_if(e, "i", entry.i, "flow.wells.list");
                    get_if(e, "j", entry.j, "flow.wells.list");
                    get_if(e, "control", entry.control, "flow.wells.list");
                    get_if(e, "value", entry.value, "flow.wells.list");
                    c.flow.wells.wells.push_back(entry);
                }
            }
        }
        if (g.contains("sensors")) {
            const json& s = g.at("sensors");
            get_if(s, "pattern", c.flow.sensors.pattern, "flow.sensors");
            if (s.contains("positions")) {
                for (const auto& p : s.at("positions")) {
                    if (!p.is_array() || p.size() != 2)
                        throw ConfigError("flow.sensors.positions: expected [x, y] pairs");
                    c.flow.sensors.positions.push_back({p[0].get<double>(), p[1].get<double>()});
                }
            }
        }
    }
    if (j.contains("reference")) {
        const json& g = j.at("reference");
        get_if(g, "corr_len", c.reference.corr_len, "reference");
        get_if(g, "dir", c.reference.dir, "reference");
    }
    if (j.contains("prior")) {
        const json& g = j.at("prior");
        get_if(g, "type", c.prior.type, "prior");
        get_if(g, "corr_len", c.prior.corr_len, "prior");
        get_if(g, "energy_target", c.prior.energy_target, "prior");
        get_if(g, "model_file", c.prior.model_file, "prior");
    }
    if (j.contains("likelihood")) {
        get_if(j.at("likelihood"), "sigma_sq", c.likelihood.sigma_sq, "likelihood");
    }
    if (j.contains("mcmc")) {
        const json& g = j.at("mcmc");
        get_if(g, "chains", c.mcmc.chains, "mcmc");
        get_if(g, "iterations", c.mcmc.iterations, "mcmc");
        get_if(g, "burn_in", c.mcmc.burn_in, "mcmc");
        get_if(g, "gamma", c.mcmc.gamma, "mcmc");
        get_if(g, "thinning", c.mcmc.thinning, "mcmc");
    }
    if (j.contains("vae_training")) {
        const json& g = j.at("vae_training");
        get_if(g, "latent_dim", c.vae_training.latent_dim, "vae_training");
        get_if(g, "channels", c.vae_training.channels, "vae_training");
        get_if(g, "kernel", c.vae_training.kernel, "vae_training");
        get_if(g, "dense_width", c.vae_training.dense_width, "vae_training");
        get_if(g, "batch_size", c.vae_training.batch_size, "vae_training");
        get_if(g, "epochs", c.vae_training.epochs, "vae_training");
        get_if(g, "learning_rate", c.vae_training.learning_rate, "vae_training");
        get_if(g, "beta", c.vae_training.beta, "vae_training");
        get_if(g, "fields_per_corr_len", c.vae_training.fields_per_corr_len, "vae_training");
        get_if(g, "split_fractions", c.vae_training.split_fractions, "vae_training");
        get_if(g, "dataset_manifest", c.vae_training.dataset_manifest, "vae_training");
    }
    if (j.contains("diagnostics")) {
        const json& g = j.at("diagnostics");
        get_if(g, "mpsrf_threshold", c.diagnostics.mpsrf_threshold, "diagnostics");
        get_if(g, "checkpoint_interval", c.diagnostics.checkpoint_interval, "diagnostics");
        get_if(g, "posterior_samples", c.diagnostics.posterior_samples, "diagnostics");
        get_if(g, "mean_field_samples", c.diagnostics.mean_field_samples, "diagnostics");
        get_if(g, "ks_sample_size", c.diagnostics.ks_sample_size, "diagnostics");
    }
    return c;
}

json to_json(const ExperimentConfig& c)
{
    json j;
    j["output_dir"] = c.output_dir;
    j["master_seed"] = c.master_seed;
    j["threads"] = c.threads;
    j["grid"] = {{"extent_x", c.grid.extent_x},
                 {"extent_y", c.grid.extent_y},
                 {"nx", c.grid.nx},
                 {"ny", c.grid.ny}};
    j["covariance"] = {{"variance", c.covariance.variance},
                       {"mean", c.covariance.mean},
                       {"corr_lengths", c.corr_lengths}};
    j["transform"] = {{"psi", c.transform.psi}, {"rho", c.transform.rho}};
    json wells = {{"pattern", c.flow.wells.pattern},
                  {"rate_m3_per_day", c.flow.wells.rate_m3_per_day},
                  {"bhp_pa", c.flow.wells.bhp_pa},
                  {"well_radius", c.flow.wells.well_radius}};
    if (!c.flow.wells.wells.empty()) {
        json list = json::array();
        for (const auto& e : c.flow.wells.wells)
            list.push_back({{"i", e.i}, {"j", e.j}, {"control", e.control}, {"value", e.value}});
        wells["list"] = list;
    }
    json sensors = {{"pattern", c.flow.sensors.pattern}};
    if (!c.flow.sensors.positions.empty()) {
        json pos = json::array();
        for (const auto& p : c.flow.sensors.positions) pos.push_back({p.x, p.y});
        sensors["positions"] = pos;
    }
    j["flow"] = {{"viscosity", c.flow.fluid.viscosity},
                 {"porosity", c.flow.fluid.porosity},
                 {"wells", wells},
                 {"sensors", sensors},
                 {"solver", c.flow.solver},
                 {"noise_std_pa", c.flow.noise_std_pa}};
    j["reference"] = {{"corr_len", c.reference.corr_len}, {"dir", c.reference.dir}};
    j["prior"] = {{"type", c.prior.type},
                  {"corr_len", c.prior.corr_len},
                  {"energy_target", c.prior.energy_target},
                  {"model_file", c.prior.model_file}};
    j["likelihood"] = {{"sigma_sq", c.likelihood.sigma_sq}};
    j["mcmc"] = {{"chains", c.mcmc.chains},
                 {"iterations", c.mcmc.iterations},
                 {"burn_in", c.mcmc.burn_in},
                 {"gamma", c.mcmc.gamma},
                 {"thinning", c.mcmc.thinning}};
    j["vae_training"] = {{"latent_dim", c.vae_training.latent_dim},
                         {"channels", c.vae_training.channels},
                         {"kernel", c.vae_training.kernel},
                         {"dense_width", c.vae_training.dense_width},
                         {"batch_size", c.vae_training.batch_size},
                         {"epochs", c.vae_training.epochs},
                         {"learning_rate", c.vae_training.learning_rate},
                         {"beta", c.vae_training.beta},
                         {"fields_per_corr_len", c.vae_training.fields_per_corr_len},
                         {"split_fractions", c.vae_training.split_fractions},
                         {"dataset_manifest", c.vae_training.dataset_manifest}};
    j["diagnostics"] = {{"mpsrf_threshold", c.diagnostics.mpsrf_threshold},
                        {"checkpoint_interval", c.diagnostics.checkpoint_interval},
                        {"posterior_samples", c.diagnostics.posterior_samples},
                        {"mean_field_samples", c.diagnostics.mean_field_samples},
                        {"ks_sample_size", c.diagnostics.ks_sample_size}};
    return j;
}

} // namespace

void ExperimentConfig::validate() const
{
    try {
        grid.validate();
        covariance.validate();
        flow.fluid.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    check(!corr_lengths.empty(), "covariance.corr_lengths must be non-empty");
    for (const double ell : corr_lengths) check(ell > 0.0, "covariance.corr_lengths must be > 0");
    check(transform.psi > 0.0, "transform.psi must be > 0");
    check(transform.rho > 0.0, "transform.rho must be > 0");
    check(flow.wells.pattern == "five_spot" || flow.wells.pattern == "list",
          "flow.wells.pattern must be 'five_spot' or 'list'");
    check(flow.sensors.pattern == "lattice" || flow.sensors.pattern == "list",
          "flow.sensors.pattern must be 'lattice' or 'list'");
    if (flow.sensors.pattern == "list")
        check(!flow.sensors.positions.empty(), "flow.sensors.positions must be non-empty");
    check(flow.solver == "direct" || flow.solver == "cg", "flow.solver must be 'direct' or 'cg'");
    check(flow.noise_std_pa >= 0.0, "flow.noise_std_pa must be >= 0");
    check(reference.corr_len > 0.0, "reference.corr_len must be > 0");
    check(prior.type == "kle" || prior.type == "vae", "prior.type must be 'kle' or 'vae'");
    if (prior.type == "kle") {
        check(prior.corr_len > 0.0, "prior.corr_len must be > 0");
        check(prior.energy_target > 0.0 && prior.energy_target <= 1.0,
              "prior.energy_target must lie in (0,1]");
    } else {
        check(!prior.model_file.empty(), "prior.model_file required for a VAE prior");
    }
    check(likelihood.sigma_sq > 0.0, "likelihood.sigma_sq must be > 0");
    check(mcmc.chains >= 1, "mcmc.chains must be >= 1");
    check(mcmc.iterations >= 1, "mcmc.iterations must be >= 1");
    check(mcmc.effective_burn_in() < mcmc.iterations, "mcmc.burn_in must be < iterations");
    check(mcmc.gamma > 0.0 && mcmc.gamma <= 1.0, "mcmc.gamma must lie in (0,1]");
    check(mcmc.thinning >= 1, "mcmc.thinning must be >= 1");
    check(vae_training.latent_dim >= 1, "vae_training.latent_dim must be >= 1");
    check(vae_training.batch_size >= 1, "vae_training.batch_size must be >= 1");
    check(vae_training.epochs >= 1, "vae_training.epochs must be >= 1");
    check(vae_training.learning_rate > 0.0, "vae_training.learning_rate must be > 0");
    check(vae_training.beta >= 0.0, "vae_training.beta must be >= 0");
    check(vae_training.fields_per_corr_len >= 1, "vae_training.fields_per_corr_len must be >= 1");
    check(vae_training.split_fractions.size() == 3,
          "vae_training.split_fractions must have 3 entries");
    double frac_sum = 0.0;
    for (const double f : vae_training.split_fractions) {
        check(f >= 0.0, "vae_training.split_fractions must be >= 0");
        frac_sum += f;
    }
    check(std::abs(frac_sum - 1.0) <= 1e-12, "vae_training.split_fractions must sum to 1");
    check(diagnostics.mpsrf_threshold > 1.0, "diagnostics.mpsrf_threshold must be > 1");
    check(diagnostics.checkpoint_interval >= 1, "diagnostics.checkpoint_interval must be >= 1");
    check(diagnostics.posterior_samples >= 1, "diagnostics.posterior_samples must be >= 1");
    check(diagnostics.mean_field_samples >= 1, "diagnostics.mean_field_samples must be >= 1");
    check(diagnostics.ks_sample_size >= 2, "diagnostics.ks_sample_size must be >= 2");
    check(threads >= 0, "threads must be >= 0");
}

bool ExperimentConfig::operator==(const ExperimentConfig& o) const
{
    return output_dir == o.output_dir && master_seed == o.master_seed && threads == o.threads
           && grid == o.grid && covariance == o.covariance && corr_lengths == o.corr_lengths
           && transform == o.transform && flow == o.flow && reference == o.reference
           && prior == o.prior && likelihood == o.likelihood && mcmc == o.mcmc
           && vae_training == o.vae_training && diagnostics == o.diagnostics;
}

ExperimentConfig config_from_json_text(const std::string& text, const std::string& profile)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    if (!profile.empty()) {
        if (!j.contains("profiles") || !j.at("profiles").contains(profile))
            throw ConfigError("config: profile '" + profile + "' not found");
        const json overlay = j.at("profiles").at(profile);
        j.erase("profiles");
        j = merge_patch(j, overlay);
    } else if (j.contains("profiles")) {
        j.erase("profiles");
    }
    ExperimentConfig cfg = from_json(j);
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::string& profile)
{
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config: " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return config_from_json_text(ss.str(), profile);
}

std::string config_to_json_text(const ExperimentConfig& cfg)
{
    return to_json(cfg).dump(2) + "\n";
}

std::filesystem::path resolve_path(const std::filesystem::path& config_dir,
                                   const std::string& path)
{
    const std::filesystem::path p(path);
    return p.is_absolute() ? p : config_dir / p;
}

} // namespace gwinv
