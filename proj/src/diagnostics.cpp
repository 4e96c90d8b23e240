#include "gwinv/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>

namespace gwinv {

double acceptance_rate(const ChainTrace& trace)
{
    if (trace.moves_post_burnin == 0)
        throw std::invalid_argument("acceptance_rate: no post-burn-in moves");
    return 100.0 * static_cast<double>(trace.accepted_post_burnin)
           / static_cast<double>(trace.moves_post_burnin);
}

double mpsrf_value(const std::vector<std::vector<double>>& chain_samples, int dim,
                   bool* regularized)
{
    const int m = static_cast<int>(chain_samples.size());
    if (m < 2) throw std::invalid_argument("mpsrf: need at least two chains");
    const long n = static_cast<long>(chain_samples[0].size()) / dim;
    if (n < 2) throw std::invalid_argument("mpsrf: need at least two samples per chain");
    for (const auto& s : chain_samples)
        if (static_cast<long>(s.size()) != n * dim)
            throw std::invalid_argument("mpsrf: chains must have equal usable lengths");

    Eigen::MatrixXd within = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::MatrixXd means(m, dim);
    for (int c = 0; c < m; ++c) {
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
            x(chain_samples[c].data(), n, dim);
        const Eigen::RowVectorXd mu = x.colwise().mean();
        means.row(c) = mu;
        const Eigen::MatrixXd centered = x.rowwise() - mu;
        within += centered.transpose() * centered / static_cast<double>(n - 1);
    }
    within /= static_cast<double>(m);

    const Eigen::RowVectorXd grand = means.colwise().mean();
    const Eigen::MatrixXd mc = means.rowwise() - grand;
    // B/n: covariance of the chain means
    const Eigen::MatrixXd b_over_n = mc.transpose() * mc / static_cast<double>(m - 1);

    Eigen::MatrixXd w = within;
    Eigen::LLT<Eigen::MatrixXd> llt(w);
    bool reg = false;
    if (llt.info() != Eigen::Success) {
        const double scale = std::max(w.trace() / dim, 1.0);
        w += 1e-12 * scale * Eigen::MatrixXd::Identity(dim, dim);
        llt.compute(w);
        reg = true;
        if (llt.info() != Eigen::Success)
            throw std::runtime_error("mpsrf: within-chain covariance not factorizable");
    }
    if (regularized) *regularized = reg;

    // lambda_1 of W^{-1} (B/n) via the generalized symmetric problem
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(b_over_n, w,
                                                                  Eigen::EigenvaluesOnly | Eigen::Ax_lBx);
    const double lambda1 = std::max(ges.eigenvalues().maxCoeff(), 0.0);

    const double nn = static_cast<double>(n);
    const double mm = static_cast<double>(m);
    return (nn - 1.0) / nn + ((mm + 1.0) / mm) * lambda1;
}

MPSRFSeries mpsrf(const std::vector<ChainTrace>& chains, long burn_in, long checkpoint_interval,
                  double threshold)
{
    if (chains.size() < 2) throw std::invalid_argument("mpsrf: need at least two chains");
    if (checkpoint_interval < 1) throw std::invalid_argument("mpsrf: bad checkpoint interval");
    const int dim = chains[0].latent_dim;
    long max_iter = chains[0].max_iter;
    for (const auto& c : chains) {
        if (c.latent_dim != dim) throw std::invalid_argument("mpsrf: latent dimension mismatch");
        max_iter = std::min(max_iter, c.max_iter);
    }

    MPSRFSeries series;
    series.threshold = threshold;
    for (long cp = burn_in + checkpoint_interval; cp <= max_iter; cp += checkpoint_interval) {
        // Cumulative post-burn-in block (burn_in, cp] from every chain.
        std::vector<std::vector<double>> blocks(chains.size());
        long n_common = -1;
        for (std::size_t c = 0; c < chains.size(); ++c) {
            const ChainTrace& t = chains[c];
            std::vector<double>& block = blocks[c];
            long n_records = 0;
            for (long r = 0; r < t.records(); ++r) {
                const long it = static_cast<long>(t.iteration[r]);
                if (it <= burn_in || it > cp) continue;
                const auto s = t.state(r);
                block.insert(block.end(), s.begin(), s.end());
                ++n_records;
            }
            n_common = (n_common < 0) ? n_records : std::min(n_common, n_records);
        }
        if (n_common < 2) continue;
        for (auto& block : blocks) block.resize(static_cast<std::size_t>(n_common) * dim);

        bool reg = false;
        const double r = mpsrf_value(blocks, dim, &reg);
        series.regularized = series.regularized || reg;
        series.checkpoints.push_back(cp);
        series.rhat.push_back(r);
        if (!series.converged && r < threshold) {
            series.converged = true;
            series.convergence_iteration = cp;
        }
    }
    return series;
}

ErrorSummary summarize(std::vector<double> values)
{
    ErrorSummary s;
    s.values = std::move(values);
    const double n = static_cast<double>(s.values.size());
    if (s.values.empty()) return s;
    s.mean = std::accumulate(s.values.begin(), s.values.end(), 0.0) / n;
    double ss = 0.0;
    for (const double v : s.values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = n > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    return s;
}

ErrorSummary data_relative_error(std::span<const double> d_ref,
                                 const std::vector<std::vector<double>>& posterior_data)
{
    std::vector<double> dre;
    dre.reserve(posterior_data.size());
    for (const auto& d : posterior_data) dre.push_back(std::sqrt(relative_misfit_sq(d_ref, d)));
    return summarize(std::move(dre));
}

ErrorSummary field_relative_error(const FieldSample& y_ref,
                                  const std::vector<FieldSample>& posterior_fields)
{
    std::vector<double> rey;
    rey.reserve(posterior_fields.size());
    for (const auto& f : posterior_fields) {
        if (f.grid != y_ref.grid)
            throw std::invalid_argument("field_relative_error: grid mismatch");
        rey.push_back(std::sqrt(relative_misfit_sq(y_ref.values, f.values)));
    }
    return summarize(std::move(rey));
}

namespace {

/// Kolmogorov survival function Q(t) = P(D > t) for the limiting distribution,
/// evaluated with whichever theta-series converges fastest (both truncated at
/// 100 terms).
double kolmogorov_q(double t)
{
    if (t <= 0.0) return 1.0;
    if (t < 1.18) {
        // Q = 1 - sqrt(2*pi)/t * sum exp(-(2k-1)^2 pi^2 / (8 t^2))
        const double a = M_PI * M_PI / (8.0 * t * t);
        double sum = 0.0;
        for (int k = 1; k <= 100; ++k) {
            const double term = std::exp(-a * (2.0 * k - 1.0) * (2.0 * k - 1.0));
            sum += term;
            if (term < 1e-18 * sum) break;
        }
        const double p = 1.0 - std::sqrt(2.0 * M_PI) / t * sum;
        return std::clamp(p, 0.0, 1.0);
    }
    // Q = 2 sum (-1)^{k-1} exp(-2 k^2 t^2)
    double sum = 0.0;
    double sign = 1.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * t * t);
        sum += sign * term;
        sign = -sign;
        if (term < 1e-18) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

} // namespace

KSResult ks_two_sample(std::span<const double> a, std::span<const double> b)
{
    if (a.empty() || b.empty()) throw std::invalid_argument("ks: samples must be non-empty");
    std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());

    const double na = static_cast<double>(sa.size());
    const double nb = static_cast<double>(sb.size());
    double d = 0.0;
    std::size_t ia = 0, ib = 0;
    while (ia < sa.size() && ib < sb.size()) {
        const double va = sa[ia], vb = sb[ib];
        const double v = std::min(va, vb);
        while (ia < sa.size() && sa[ia] <= v) ++ia;
        while (ib < sb.size() && sb[ib] <= v) ++ib;
        d = std::max(d, std::abs(ia / na - ib / nb));
    }

    KSResult r;
    r.d = d;
    r.n_a = static_cast<long>(sa.size());
    r.n_b = static_cast<long>(sb.size());
    const double ne = na * nb / (na + nb);
    r.p_value = kolmogorov_q(std::sqrt(ne) * d);
    return r;
}

FieldSample posterior_mean_field(const std::vector<FieldSample>& samples)
{
    if (samples.empty()) throw std::invalid_argument("posterior_mean_field: no samples");
    FieldSample mean;
    mean.grid = samples[0].grid;
    mean.kind = samples[0].kind;
    mean.values.assign(samples[0].values.size(), 0.0);
    for (const auto& s : samples) {
        if (s.grid != mean.grid) throw std::invalid_argument("posterior_mean_field: grid mismatch");
        for (std::size_t c = 0; c < mean.values.size(); ++c) mean.values[c] += s.values[c];
    }
    const double inv = 1.0 / static_cast<double>(samples.size());
    for (double& v : mean.values) v *= inv;
    return mean;
}

} // namespace gwinv
