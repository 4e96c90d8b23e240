#pragma once

#include <span>
#include <vector>

#include "gwinv/grid.hpp"
#include "gwinv/mcmc.hpp"

namespace gwinv {

/// AR = NA/Nr * 100 over post-burn-in moves.
double acceptance_rate(const ChainTrace& trace);

struct MPSRFSeries {
    std::vector<long> checkpoints;
    std::vector<double> rhat;
    double threshold = 1.2;
    bool converged = false;
    long convergence_iteration = -1; // first checkpoint with rhat < threshold
    bool regularized = false;        // singular within-chain covariance encountered
};

/// Brooks-Gelman multivariate potential scale reduction factor
/// R = (n-1)/n + ((m+1)/m) * lambda_1(W^{-1} B/n), evaluated on cumulative
/// post-burn-in samples at each checkpoint.
MPSRFSeries mpsrf(const std::vector<ChainTrace>& chains, long burn_in, long checkpoint_interval,
                  double threshold = 1.2);

/// Single-checkpoint variant over per-chain sample blocks (row-major
/// [samples][dim], equal lengths).
double mpsrf_value(const std::vector<std::vector<double>>& chain_samples, int dim,
                   bool* regularized = nullptr);

struct ErrorSummary {
    std::vector<double> values;
    double mean = 0.0;
    double stddev = 0.0;

    long count() const { return static_cast<long>(values.size()); }
};

ErrorSummary summarize(std::vector<double> values);

/// DRE_j = sqrt(relative_misfit_sq(d_ref, d_sim_j)).
ErrorSummary data_relative_error(std::span<const double> d_ref,
                                 const std::vector<std::vector<double>>& posterior_data);

/// RE_Y,j with the same normalized norm applied cell-wise.
ErrorSummary field_relative_error(const FieldSample& y_ref,
                                  const std::vector<FieldSample>& posterior_fields);

struct KSResult {
    double d = 0.0;
    double p_value = 1.0;
    long n_a = 0;
    long n_b = 0;
};

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value at
/// effective size n_a*n_b/(n_a+n_b).
KSResult ks_two_sample(std::span<const double> a, std::span<const double> b);

FieldSample posterior_mean_field(const std::vector<FieldSample>& samples);

} // namespace gwinv
