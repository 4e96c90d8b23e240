#include "gwinv/vae.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "gwinv/io.hpp"
#include "gwinv/rng.hpp"

namespace gwinv {

using nn::Tensor;

void ArchitectureSpec::validate() const
{
    if (input_h < 4 || input_w < 4) throw std::invalid_argument("vae: input too small");
    if (channels < 1 || kernel < 1 || dense_width < 1 || latent_dim < 1)
        throw std::invalid_argument("vae: architecture fields must be positive");
    if (kernel % 2 == 0) throw std::invalid_argument("vae: kernel size must be odd");
}

std::vector<ArchitectureSpec::LayerSummary> ArchitectureSpec::encoder_summary() const
{
    const long k2 = static_cast<long>(kernel) * kernel;
    const long c = channels;
    return {
        {"input", 0},
        {"conv2d", k2 * 1 * c},
        {"batch_norm", 4 * c},
        {"conv2d_1", k2 * c * c},
        {"batch_norm_1", 4 * c},
        {"conv2d_2", k2 * c * c},
        {"batch_norm_2", 4 * c},
        {"flatten", 0},
        {"dense", static_cast<long>(flat_dim()) * dense_width},
        {"z_mean", static_cast<long>(dense_width) * latent_dim + latent_dim},
        {"z_log_var", static_cast<long>(dense_width) * latent_dim + latent_dim},
    };
}

long NamedArray::numel() const
{
    long n = 1;
    for (const int d : shape) n *= d;
    return n;
}

long VAEParams::trainable_count() const
{
    long n = 0;
    for (const auto& arr : arrays)
        if (arr.trainable) n += arr.numel();
    return n;
}

namespace {

NamedArray make_array(std::string name, std::vector<int> shape, bool trainable, double fill = 0.0)
{
    NamedArray a;
    a.name = std::move(name);
    a.shape = std::move(shape);
    a.trainable = trainable;
    long n = 1;
    for (const int d : a.shape) n *= d;
    a.data.assign(static_cast<std::size_t>(n), fill);
    return a;
}

void push_batchnorm(std::vector<NamedArray>& arrays, const std::string& prefix, int channels)
{
    arrays.push_back(make_array(prefix + "_gamma", {channels}, true, 1.0));
    arrays.push_back(make_array(prefix + "_beta", {channels}, true, 0.0));
    arrays.push_back(make_array(prefix + "_running_mean", {channels}, false, 0.0));
    arrays.push_back(make_array(prefix + "_running_var", {channels}, false, 1.0));
}

VAEParams construct_params(const ArchitectureSpec& arch)
{
    arch.validate();
    const int k = arch.kernel, c = arch.channels;
    VAEParams p;
    p.arch = arch;
    auto& a = p.arrays;
    a.reserve(kArrayCount);
    a.push_back(make_array("enc_conv1_w", {k, k, 1, c}, true));
    push_batchnorm(a, "enc_bn1", c);
    a.push_back(make_array("enc_conv2_w", {k, k, c, c}, true));
    push_batchnorm(a, "enc_bn2", c);
    a.push_back(make_array("enc_conv3_w", {k, k, c, c}, true));
    push_batchnorm(a, "enc_bn3", c);
    a.push_back(make_array("enc_dense_w", {arch.flat_dim(), arch.dense_width}, true));
    a.push_back(make_array("z_mean_w", {arch.dense_width, arch.latent_dim}, true));
    a.push_back(make_array("z_mean_b", {arch.latent_dim}, true));
    a.push_back(make_array("z_log_var_w", {arch.dense_width, arch.latent_dim}, true));
    a.push_back(make_array("z_log_var_b", {arch.latent_dim}, true));
    a.push_back(make_array("dec_dense1_w", {arch.latent_dim, arch.dense_width}, true));
    a.push_back(make_array("dec_dense2_w", {arch.dense_width, arch.flat_dim()}, true));
    a.push_back(make_array("dec_conv1_w", {k, k, c, c}, true));
    push_batchnorm(a, "dec_bn1", c);
    a.push_back(make_array("dec_tconv_w", {k, k, c, c}, true));
    push_batchnorm(a, "dec_bn2", c);
    a.push_back(make_array("dec_out_w", {k, k, c, 1}, true));
    if (static_cast<int>(a.size()) != kArrayCount)
        throw std::logic_error("vae: array layout out of sync");
    return p;
}

void fill_uniform(std::vector<double>& data, double limit, CounterRng& rng)
{
    for (double& v : data) v = (2.0 * rng.uniform01() - 1.0) * limit;
}

nn::BatchNormParams bn_params(VAEParams& p, int gamma_id)
{
    return {&p.a(gamma_id), &p.a(gamma_id + 1), &p.a(gamma_id + 2), &p.a(gamma_id + 3)};
}

nn::BatchNormParams bn_params_const(const VAEParams& p, int gamma_id)
{
    auto& q = const_cast<VAEParams&>(p);
    return {&q.a(gamma_id), &q.a(gamma_id + 1), &q.a(gamma_id + 2), &q.a(gamma_id + 3)};
}

/// All intermediates of a batched forward pass needed for the reverse pass.
struct ForwardCache {
    Tensor x;
    Tensor enc_c1, enc_b1, enc_r1;
    Tensor enc_c2, enc_b2, enc_r2;
    Tensor enc_c3, enc_b3, enc_r3; // enc_r3 doubles as the flattened view
    Tensor enc_d, enc_rd;
    Tensor mu, log_var, z;
    Tensor dec_d1, dec_r1;
    Tensor dec_d2, dec_r2; // dec_r2 reshaped to (h2,w2,c) before dec convs
    Tensor dec_c1, dec_b1, dec_a1;
    Tensor dec_tc, dec_b2, dec_a2;
    Tensor out;
    nn::BatchNormCache bn1, bn2, bn3, dbn1, dbn2;
};

void forward_batch(const VAEParams& params, std::span<const double> xs,
                   std::span<const double> eps, int count, RunMode mode, bool update_running,
                   ForwardCache& fc)
{
    const ArchitectureSpec& arch = params.arch;
    const int k = arch.kernel, c = arch.channels;
    const int nz = arch.latent_dim;
    if (static_cast<long>(xs.size()) != static_cast<long>(count) * arch.field_dim())
        throw std::invalid_argument("vae: input size does not match architecture");
    if (static_cast<long>(eps.size()) != static_cast<long>(count) * nz)
        throw std::invalid_argument("vae: noise size does not match latent dimension");

    const bool train = (mode == RunMode::train);
    fc.x.resize(count, arch.input_h, arch.input_w, 1);
    std::copy(xs.begin(), xs.end(), fc.x.v.begin());

    auto bn = [&](const Tensor& in, int gamma_id, Tensor& out_t, nn::BatchNormCache& cache) {
        const nn::BatchNormParams bp = bn_params_const(params, gamma_id);
        if (train)
            nn::batchnorm_forward_train(in, bp, out_t, cache, update_running);
        else
            nn::batchnorm_forward_infer(in, bp, out_t);
    };

    // encoder
    nn::conv2d_forward(fc.x, params.a(kEncConv1W), k, 1, c, 1, fc.enc_c1);
    bn(fc.enc_c1, kEncBn1Gamma, fc.enc_b1, fc.bn1);
    nn::relu_forward(fc.enc_b1, fc.enc_r1);
    nn::conv2d_forward(fc.enc_r1, params.a(kEncConv2W), k, c, c, 2, fc.enc_c2);
    bn(fc.enc_c2, kEncBn2Gamma, fc.enc_b2, fc.bn2);
    nn::relu_forward(fc.enc_b2, fc.enc_r2);
    nn::conv2d_forward(fc.enc_r2, params.a(kEncConv3W), k, c, c, 1, fc.enc_c3);
    bn(fc.enc_c3, kEncBn3Gamma, fc.enc_b3, fc.bn3);
    nn::relu_forward(fc.enc_b3, fc.enc_r3);

    Tensor flat = fc.enc_r3; // NHWC flatten is a relabeling of the same buffer
    flat.n = count; flat.h = 1; flat.w = 1; flat.c = arch.flat_dim();
    nn::dense_forward(flat, params.a(kEncDenseW), nullptr, arch.flat_dim(), arch.dense_width,
                      fc.enc_d);
    nn::relu_forward(fc.enc_d, fc.enc_rd);
    nn::dense_forward(fc.enc_rd, params.a(kZMeanW), &params.a(kZMeanB), arch.dense_width, nz,
                      fc.mu);
    nn::dense_forward(fc.enc_rd, params.a(kZLogVarW), &params.a(kZLogVarB), arch.dense_width, nz,
                      fc.log_var);

    fc.z.resize(count, 1, 1, nz);
    for (std::size_t i = 0; i < fc.z.size(); ++i)
        fc.z.v[i] = fc.mu.v[i] + std::exp(0.5 * fc.log_var.v[i]) * eps[i];

    // decoder
    nn::dense_forward(fc.z, params.a(kDecDense1W), nullptr, nz, arch.dense_width, fc.dec_d1);
    nn::relu_forward(fc.dec_d1, fc.dec_r1);
    nn::dense_forward(fc.dec_r1, params.a(kDecDense2W), nullptr, arch.dense_width, arch.flat_dim(),
                      fc.dec_d2);
    nn::relu_forward(fc.dec_d2, fc.dec_r2);

    Tensor grid_in = fc.dec_r2;
    grid_in.n = count; grid_in.h = arch.half_h(); grid_in.w = arch.half_w(); grid_in.c = c;
    nn::conv2d_forward(grid_in, params.a(kDecConv1W), k, c, c, 1, fc.dec_c1);
    bn(fc.dec_c1, kDecBn1Gamma, fc.dec_b1, fc.dbn1);
    nn::relu_forward(fc.dec_b1, fc.dec_a1);
    nn::conv2d_transpose_forward(fc.dec_a1, params.a(kDecTConvW), k, c, c, 2, arch.input_h,
                                 arch.input_w, fc.dec_tc);
    bn(fc.dec_tc, kDecBn2Gamma, fc.dec_b2, fc.dbn2);
    nn::relu_forward(fc.dec_b2, fc.dec_a2);
    nn::conv2d_forward(fc.dec_a2, params.a(kDecOutW), k, c, 1, 1, fc.out);
}

BatchLosses compute_losses(const ForwardCache& fc, std::span<const double> xs, int count,
                           double beta, int field_dim, int latent_dim)
{
    BatchLosses out;
    out.rec.resize(count);
    out.reg.resize(count);
    for (int i = 0; i < count; ++i) {
        double rec = 0.0;
        const double* xp = xs.data() + static_cast<std::size_t>(i) * field_dim;
        const double* op = fc.out.item(i);
        for (int j = 0; j < field_dim; ++j) {
            const double d = xp[j] - op[j];
            rec += d * d;
        }
        double reg = 0.0;
        const double* mu = fc.mu.item(i);
        const double* lv = fc.log_var.item(i);
        for (int j = 0; j < latent_dim; ++j)
            reg += 1.0 + lv[j] - mu[j] * mu[j] - std::exp(lv[j]);
        out.rec[i] = rec;
        out.reg[i] = -0.5 * reg;
        out.total += rec - 0.5 * beta * reg;
    }
    out.total /= count;
    return out;
}

} // namespace

VAEParams build_vae(const ArchitectureSpec& arch, std::uint64_t seed)
{
    VAEParams p = construct_params(arch);
    const int k = arch.kernel, c = arch.channels;
    const auto he = [](long fan_in) { return std::sqrt(6.0 / static_cast<double>(fan_in)); };
    const auto glorot = [](long fan_in, long fan_out) {
        return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    };
    const long k2 = static_cast<long>(k) * k;

    const std::vector<std::pair<int, double>> limits = {
        {kEncConv1W, he(k2 * 1)},
        {kEncConv2W, he(k2 * c)},
        {kEncConv3W, he(k2 * c)},
        {kEncDenseW, he(arch.flat_dim())},
        {kZMeanW, glorot(arch.dense_width, arch.latent_dim)},
        {kZLogVarW, glorot(arch.dense_width, arch.latent_dim)},
        {kDecDense1W, he(arch.latent_dim)},
        {kDecDense2W, he(arch.dense_width)},
        {kDecConv1W, he(k2 * c)},
        {kDecTConvW, he(k2 * c)},
        {kDecOutW, glorot(k2 * c, k2)},
    };
    for (const auto& [id, limit] : limits) {
        CounterRng rng(derive_seed(seed, "vae:init:" + p.arrays[id].name));
        fill_uniform(p.a(id), limit, rng);
    }
    return p;
}

LatentSample encode(const VAEParams& params, std::span<const double> x,
                    std::span<const double> eps, RunMode mode)
{
    ForwardCache fc;
    forward_batch(params, x, eps, 1, mode, false, fc);
    LatentSample s;
    s.mu.assign(fc.mu.v.begin(), fc.mu.v.end());
    s.log_var.assign(fc.log_var.v.begin(), fc.log_var.v.end());
    s.eps.assign(eps.begin(), eps.end());
    s.z.assign(fc.z.v.begin(), fc.z.v.end());
    for (const double v : s.z)
        if (!std::isfinite(v)) throw std::runtime_error("encode: non-finite latent");
    return s;
}

std::vector<double> decode(const VAEParams& params, std::span<const double> z)
{
    const ArchitectureSpec& arch = params.arch;
    if (static_cast<int>(z.size()) != arch.latent_dim)
        throw std::invalid_argument("decode: latent length mismatch");
    const int k = arch.kernel, c = arch.channels;

    Tensor zt(1, 1, 1, arch.latent_dim);
    std::copy(z.begin(), z.end(), zt.v.begin());
    Tensor d1, r1, d2, r2, c1, b1, a1, tc, b2, a2, out;
    nn::dense_forward(zt, params.a(kDecDense1W), nullptr, arch.latent_dim, arch.dense_width, d1);
    nn::relu_forward(d1, r1);
    nn::dense_forward(r1, params.a(kDecDense2W), nullptr, arch.dense_width, arch.flat_dim(), d2);
    nn::relu_forward(d2, r2);
    r2.n = 1; r2.h = arch.half_h(); r2.w = arch.half_w(); r2.c = c;
    nn::conv2d_forward(r2, params.a(kDecConv1W), k, c, c, 1, c1);
    nn::batchnorm_forward_infer(c1, bn_params_const(params, kDecBn1Gamma), b1);
    nn::relu_forward(b1, a1);
    nn::conv2d_transpose_forward(a1, params.a(kDecTConvW), k, c, c, 2, arch.input_h, arch.input_w,
                                 tc);
    nn::batchnorm_forward_infer(tc, bn_params_const(params, kDecBn2Gamma), b2);
    nn::relu_forward(b2, a2);
    nn::conv2d_forward(a2, params.a(kDecOutW), k, c, 1, 1, out);
    return out.v;
}

BatchLosses losses(const VAEParams& params, std::span<const double> xs,
                   std::span<const double> eps, int count, double beta, RunMode mode)
{
    ForwardCache fc;
    forward_batch(params, xs, eps, count, mode, false, fc);
    return compute_losses(fc, xs, count, beta, params.arch.field_dim(), params.arch.latent_dim);
}

VAEGradients backward(VAEParams& params, std::span<const double> xs, std::span<const double> eps,
                      int count, double beta, BatchLosses* out_losses)
{
    const ArchitectureSpec& arch = params.arch;
    const int k = arch.kernel, c = arch.channels;
    const int nz = arch.latent_dim;
    const int fd = arch.field_dim();

    ForwardCache fc;
    forward_batch(params, xs, eps, count, RunMode::train, true, fc);
    const BatchLosses bl = compute_losses(fc, xs, count, beta, fd, nz);
    if (out_losses) *out_losses = bl;

    VAEGradients grads;
    grads.g.resize(kArrayCount);

    const double inv_n = 1.0 / count;

    // d L_tot / d out = (2/n) (out - x)
    Tensor dout(count, arch.input_h, arch.input_w, 1);
    for (int i = 0; i < count; ++i) {
        const double* xp = xs.data() + static_cast<std::size_t>(i) * fd;
        const double* op = fc.out.item(i);
        double* dp = dout.item(i);
        for (int j = 0; j < fd; ++j) dp[j] = 2.0 * inv_n * (op[j] - xp[j]);
    }

    Tensor d_a2(count, arch.input_h, arch.input_w, c);
    nn::conv2d_backward_input(dout, params.a(kDecOutW), k, c, 1, 1, d_a2);
    nn::conv2d_backward_weight(fc.dec_a2, dout, k, c, 1, 1, grads.g[kDecOutW]);

    Tensor d_b2, d_tc, d_a1, d_c1, d_grid;
    nn::relu_backward(d_a2, fc.dec_b2, d_b2);
    nn::batchnorm_backward(d_b2, fc.dbn2, params.a(kDecBn2Gamma), d_tc, grads.g[kDecBn2Gamma],
                           grads.g[kDecBn2Beta]);
    nn::conv2d_transpose_backward(d_tc, fc.dec_a1, params.a(kDecTConvW), k, c, c, 2, d_a1,
                                  grads.g[kDecTConvW]);
    Tensor d_b1;
    nn::relu_backward(d_a1, fc.dec_b1, d_b1);
    nn::batchnorm_backward(d_b1, fc.dbn1, params.a(kDecBn1Gamma), d_c1, grads.g[kDecBn1Gamma],
                           grads.g[kDecBn1Beta]);
    d_grid.resize(count, arch.half_h(), arch.half_w(), c);
    nn::conv2d_backward_input(d_c1, params.a(kDecConv1W), k, c, c, 1, d_grid);
    {
        Tensor grid_in = fc.dec_r2;
        grid_in.n = count; grid_in.h = arch.half_h(); grid_in.w = arch.half_w(); grid_in.c = c;
        nn::conv2d_backward_weight(grid_in, d_c1, k, c, c, 1, grads.g[kDecConv1W]);
    }

    Tensor d_flat = d_grid;
    d_flat.n = count; d_flat.h = 1; d_flat.w = 1; d_flat.c = arch.flat_dim();
    Tensor d_d2, d_r1_dec, d_d1, dz_dec;
    nn::relu_backward(d_flat, fc.dec_d2, d_d2);
    nn::dense_backward(fc.dec_r1, d_d2, params.a(kDecDense2W), arch.dense_width, arch.flat_dim(),
                       d_r1_dec, grads.g[kDecDense2W], nullptr);
    nn::relu_backward(d_r1_dec, fc.dec_d1, d_d1);
    nn::dense_backward(fc.z, d_d1, params.a(kDecDense1W), nz, arch.dense_width, dz_dec,
                       grads.g[kDecDense1W], nullptr);

    // reparameterization + KL paths into the latent heads
    Tensor d_mu(count, 1, 1, nz), d_lv(count, 1, 1, nz);
    for (int i = 0; i < count; ++i) {
        const double* mu = fc.mu.item(i);
        const double* lv = fc.log_var.item(i);
        const double* ep = eps.data() + static_cast<std::size_t>(i) * nz;
        const double* dz = dz_dec.item(i);
        double* dmu = d_mu.item(i);
        double* dlv = d_lv.item(i);
        for (int j = 0; j < nz; ++j) {
            dmu[j] = dz[j] + beta * inv_n * mu[j];
            dlv[j] = dz[j] * 0.5 * std::exp(0.5 * lv[j]) * ep[j]
                     + beta * inv_n * 0.5 * (std::exp(lv[j]) - 1.0);
        }
    }

    Tensor d_rd_mu, d_rd_lv;
    nn::dense_backward(fc.enc_rd, d_mu, params.a(kZMeanW), arch.dense_width, nz, d_rd_mu,
                       grads.g[kZMeanW], &grads.g[kZMeanB]);
    nn::dense_backward(fc.enc_rd, d_lv, params.a(kZLogVarW), arch.dense_width, nz, d_rd_lv,
                       grads.g[kZLogVarW], &grads.g[kZLogVarB]);
    for (std::size_t i = 0; i < d_rd_mu.size(); ++i) d_rd_mu.v[i] += d_rd_lv.v[i];

    Tensor d_d, d_flat_enc;
    nn::relu_backward(d_rd_mu, fc.enc_d, d_d);
    {
        Tensor flat = fc.enc_r3;
        flat.n = count; flat.h = 1; flat.w = 1; flat.c = arch.flat_dim();
        nn::dense_backward(flat, d_d, params.a(kEncDenseW), arch.flat_dim(), arch.dense_width,
                           d_flat_enc, grads.g[kEncDenseW], nullptr);
    }
    Tensor d_r3 = d_flat_enc;
    d_r3.n = count; d_r3.h = arch.half_h(); d_r3.w = arch.half_w(); d_r3.c = c;

    Tensor d_b3, d_c3, d_r2;
    nn::relu_backward(d_r3, fc.enc_b3, d_b3);
    nn::batchnorm_backward(d_b3, fc.bn3, params.a(kEncBn3Gamma), d_c3, grads.g[kEncBn3Gamma],
                           grads.g[kEncBn3Beta]);
    d_r2.resize(count, arch.half_h(), arch.half_w(), c);
    nn::conv2d_backward_input(d_c3, params.a(kEncConv3W), k, c, c, 1, d_r2);
    nn::conv2d_backward_weight(fc.enc_r2, d_c3, k, c, c, 1, grads.g[kEncConv3W]);

    Tensor d_b2e, d_c2, d_r1;
    nn::relu_backward(d_r2, fc.enc_b2, d_b2e);
    nn::batchnorm_backward(d_b2e, fc.bn2, params.a(kEncBn2Gamma), d_c2, grads.g[kEncBn2Gamma],
                           grads.g[kEncBn2Beta]);
    d_r1.resize(count, arch.input_h, arch.input_w, c);
    nn::conv2d_backward_input(d_c2, params.a(kEncConv2W), k, c, c, 2, d_r1);
    nn::conv2d_backward_weight(fc.enc_r1, d_c2, k, c, c, 2, grads.g[kEncConv2W]);

    Tensor d_b1e, d_c1e;
    nn::relu_backward(d_r1, fc.enc_b1, d_b1e);
    nn::batchnorm_backward(d_b1e, fc.bn1, params.a(kEncBn1Gamma), d_c1e, grads.g[kEncBn1Gamma],
                           grads.g[kEncBn1Beta]);
    nn::conv2d_backward_weight(fc.x, d_c1e, k, 1, c, 1, grads.g[kEncConv1W]);

    for (int id = 0; id < kArrayCount; ++id) {
        if (!params.arrays[id].trainable) continue;
        for (const double v : grads.g[id])
            if (!std::isfinite(v)) throw std::runtime_error("backward: non-finite gradient");
    }
    return grads;
}

AdamState make_adam_state(const VAEParams& params)
{
    AdamState s;
    s.m.resize(params.arrays.size());
    s.v.resize(params.arrays.size());
    for (std::size_t i = 0; i < params.arrays.size(); ++i) {
        if (!params.arrays[i].trainable) continue;
        s.m[i].assign(params.arrays[i].data.size(), 0.0);
        s.v[i].assign(params.arrays[i].data.size(), 0.0);
    }
    return s;
}

void adam_step(AdamState& state, VAEParams& params, const VAEGradients& grads, double lr,
               double beta1, double beta2, double eps)
{
    state.t += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.arrays.size(); ++i) {
        if (!params.arrays[i].trainable) continue;
        auto& p = params.arrays[i].data;
        const auto& g = grads.g[i];
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
            v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            p[j] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

std::vector<int> FieldDataset::indices(Split s) const
{
    std::vector<int> out;
    for (std::size_t i = 0; i < items.size(); ++i)
        if (items[i].split == s) out.push_back(static_cast<int>(i));
    return out;
}

void assign_splits(FieldDataset& ds, double train_frac, double val_frac, double test_frac,
                   std::uint64_t seed)
{
    if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-12)
        throw std::invalid_argument("dataset: split fractions must sum to 1");

    std::map<double, std::vector<int>> by_ell;
    for (std::size_t i = 0; i < ds.items.size(); ++i)
        by_ell[ds.items[i].corr_len].push_back(static_cast<int>(i));

    for (auto& [ell, idx] : by_ell) {
        CounterRng rng(derive_seed(seed, "split:ell=" + std::to_string(ell)));
        for (std::size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng.uniform01() * i)]);
        const long n = static_cast<long>(idx.size());
        const long n_train = std::lround(train_frac * n);
        const long n_val = std::lround(val_frac * n);
        for (long i = 0; i < n; ++i) {
            Split s = Split::test;
            if (i < n_train) s = Split::train;
            else if (i < n_train + n_val) s = Split::val;
            ds.items[idx[i]].split = s;
        }
    }
}

namespace {

Split split_from(const std::string& s)
{
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw std::runtime_error("dataset: unknown split '" + s + "'");
}

} // namespace

FieldDataset load_dataset(const std::filesystem::path& manifest, const GridSpec& grid)
{
    std::vector<std::string> header;
    const auto rows = read_csv(manifest, &header);
    const std::filesystem::path dir = manifest.parent_path();
    FieldDataset ds;
    ds.h = grid.ny;
    ds.w = grid.nx;
    ds.items.reserve(rows.size());
    for (const auto& row : rows) {
        if (row.size() < 3) throw std::runtime_error("dataset: malformed manifest row");
        DatasetItem item;
        item.file = row[0];
        item.corr_len = std::stod(row[1]);
        item.split = split_from(row[2]);
        item.values = load_fld(dir / row[0], grid).values;
        ds.items.push_back(std::move(item));
    }
    return ds;
}

TrainResult train(const FieldDataset& ds, const ArchitectureSpec& arch, const TrainConfig& cfg)
{
    arch.validate();
    if (cfg.batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
    if (ds.items.empty()) throw std::invalid_argument("train: empty dataset");
    if (ds.h != arch.input_h || ds.w != arch.input_w)
        throw std::invalid_argument("train: dataset shape does not match architecture");

    const int fd = arch.field_dim();
    const int nz = arch.latent_dim;
    std::vector<int> train_idx = ds.indices(Split::train);
    const std::vector<int> val_idx = ds.indices(Split::val);
    if (train_idx.empty()) throw std::invalid_argument("train: no training split");

    VAEParams params = build_vae(arch, cfg.seed);
    AdamState adam = make_adam_state(params);

    TrainResult result;
    result.params = params;
    double best_val = std::numeric_limits<double>::infinity();

    std::vector<double> xbuf, ebuf;
    const auto run_split =
        [&](const std::vector<int>& idx, CounterRng& eps_rng, RunMode mode, bool do_update,
            double& rec_sum, double& reg_sum) -> bool {
        for (std::size_t start = 0; start < idx.size(); start += cfg.batch_size) {
            const int count = static_cast<int>(std::min<std::size_t>(cfg.batch_size,
                                                                     idx.size() - start));
            xbuf.resize(static_cast<std::size_t>(count) * fd);
            ebuf.resize(static_cast<std::size_t>(count) * nz);
            for (int i = 0; i < count; ++i)
                std::copy(ds.items[idx[start + i]].values.begin(),
                          ds.items[idx[start + i]].values.end(),
                          xbuf.begin() + static_cast<std::size_t>(i) * fd);
            eps_rng.fill_normal(ebuf);

            BatchLosses bl;
            if (do_update) {
                const VAEGradients grads = backward(params, xbuf, ebuf, count, cfg.beta, &bl);
                if (!std::isfinite(bl.total)) return false;
                adam_step(adam, params, grads, cfg.learning_rate);
            } else {
                bl = losses(params, xbuf, ebuf, count, cfg.beta, mode);
                if (!std::isfinite(bl.total)) return false;
            }
            rec_sum += std::accumulate(bl.rec.begin(), bl.rec.end(), 0.0);
            reg_sum += std::accumulate(bl.reg.begin(), bl.reg.end(), 0.0);
        }
        return true;
    };

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        CounterRng shuffle_rng(derive_seed(cfg.seed, "vae:shuffle:" + std::to_string(epoch)));
        for (std::size_t i = train_idx.size(); i > 1; --i)
            std::swap(train_idx[i - 1],
                      train_idx[static_cast<std::size_t>(shuffle_rng.uniform01() * i)]);

        CounterRng train_eps(derive_seed(cfg.seed, "vae:eps:" + std::to_string(epoch)));
        CounterRng val_eps(derive_seed(cfg.seed, "vae:valeps:" + std::to_string(epoch)));

        EpochStats stats;
        stats.epoch = epoch;
        double rec = 0.0, reg = 0.0;
        if (!run_split(train_idx, train_eps, RunMode::train, true, rec, reg)) {
            result.aborted = true;
            return result;
        }
        stats.train_rec = rec / static_cast<double>(train_idx.size());
        stats.train_kl = reg / static_cast<double>(train_idx.size());
        stats.train_tot = stats.train_rec + cfg.beta * stats.train_kl;

        if (!val_idx.empty()) {
            rec = reg = 0.0;
            if (!run_split(val_idx, val_eps, RunMode::infer, false, rec, reg)) {
                result.aborted = true;
                return result;
            }
            stats.val_rec = rec / static_cast<double>(val_idx.size());
            stats.val_kl = reg / static_cast<double>(val_idx.size());
            stats.val_tot = stats.val_rec + cfg.beta * stats.val_kl;
        }
        result.history.push_back(stats);

        const double score = val_idx.empty() ? stats.train_tot : stats.val_tot;
        if (score < best_val) {
            best_val = score;
            result.params = params;
            result.best_epoch = epoch;
        }
    }
    return result;
}

TestReport test_report(const VAEParams& params, const FieldDataset& ds)
{
    const int fd = params.arch.field_dim();
    const std::vector<double> eps0(params.arch.latent_dim, 0.0);
    std::map<double, std::vector<double>> by_ell;
    for (const auto& item : ds.items) {
        if (item.split != Split::test) continue;
        const LatentSample s = encode(params, item.values, eps0, RunMode::infer);
        const std::vector<double> recon = decode(params, s.z);
        double num = 0.0, den = 0.0;
        for (int j = 0; j < fd; ++j) {
            const double d = item.values[j] - recon[j];
            num += d * d;
            den += item.values[j] * item.values[j];
        }
        by_ell[item.corr_len].push_back(std::sqrt(num / den));
    }
    TestReport report;
    for (auto& [ell, errs] : by_ell) {
        CorrLenErrors g;
        g.corr_len = ell;
        g.errors = std::move(errs);
        const double n = static_cast<double>(g.errors.size());
        g.mean = std::accumulate(g.errors.begin(), g.errors.end(), 0.0) / n;
        double ss = 0.0;
        for (const double e : g.errors) ss += (e - g.mean) * (e - g.mean);
        g.stddev = n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
        report.groups.push_back(std::move(g));
    }
    return report;
}

void save_vae(const std::filesystem::path& path, const VAEParams& params)
{
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
        os.write("VAE1", 4);
        const auto w32 = [&](std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); };
        w32(static_cast<std::uint32_t>(params.arch.input_h));
        w32(static_cast<std::uint32_t>(params.arch.input_w));
        w32(static_cast<std::uint32_t>(params.arch.channels));
        w32(static_cast<std::uint32_t>(params.arch.kernel));
        w32(static_cast<std::uint32_t>(params.arch.dense_width));
        w32(static_cast<std::uint32_t>(params.arch.latent_dim));
        w32(static_cast<std::uint32_t>(params.arrays.size()));
        for (const auto& arr : params.arrays) {
            w32(static_cast<std::uint32_t>(arr.name.size()));
            os.write(arr.name.data(), static_cast<std::streamsize>(arr.name.size()));
            const std::uint8_t tr = arr.trainable ? 1 : 0;
            os.write(reinterpret_cast<const char*>(&tr), 1);
            w32(static_cast<std::uint32_t>(arr.shape.size()));
            for (const int d : arr.shape) w32(static_cast<std::uint32_t>(d));
            os.write(reinterpret_cast<const char*>(arr.data.data()),
                     static_cast<std::streamsize>(arr.data.size() * sizeof(double)));
        }
        if (!os) throw std::runtime_error("write failed: " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

VAEParams load_vae(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open for reading: " + path.string());
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "VAE1", 4) != 0)
        throw std::runtime_error("bad magic, expected VAE1: " + path.string());
    const auto r32 = [&]() {
        std::uint32_t v = 0;
        is.read(reinterpret_cast<char*>(&v), 4);
        if (!is) throw std::runtime_error("unexpected end of file: " + path.string());
        return v;
    };
    ArchitectureSpec arch;
    arch.input_h = static_cast<int>(r32());
    arch.input_w = static_cast<int>(r32());
    arch.channels = static_cast<int>(r32());
    arch.kernel = static_cast<int>(r32());
    arch.dense_width = static_cast<int>(r32());
    arch.latent_dim = static_cast<int>(r32());
    VAEParams params = construct_params(arch);
    const std::uint32_t n_arrays = r32();
    if (n_arrays != params.arrays.size())
        throw std::runtime_error("model file array count mismatch: " + path.string());
    for (auto& arr : params.arrays) {
        const std::uint32_t name_len = r32();
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (name != arr.name) throw std::runtime_error("model file array order mismatch: " + name);
        std::uint8_t tr = 0;
        is.read(reinterpret_cast<char*>(&tr), 1);
        const std::uint32_t ndim = r32();
        if (ndim != arr.shape.size()) throw std::runtime_error("model file shape mismatch: " + name);
        for (std::size_t d = 0; d < arr.shape.size(); ++d)
            if (static_cast<int>(r32()) != arr.shape[d])
                throw std::runtime_error("model file shape mismatch: " + name);
        is.read(reinterpret_cast<char*>(arr.data.data()),
                static_cast<std::streamsize>(arr.data.size() * sizeof(double)));
        if (!is) throw std::runtime_error("unexpected end of file: " + path.string());
    }
    return params;
}

void save_history_csv(const std::filesystem::path& path, const std::vector<EpochStats>& history)
{
    std::vector<std::vector<std::string>> rows;
    rows.reserve(history.size());
    for (const auto& h : history)
        rows.push_back({std::to_string(h.epoch), format_double(h.train_rec),
                        format_double(h.train_kl), format_double(h.train_tot),
                        format_double(h.val_rec), format_double(h.val_kl),
                        format_double(h.val_tot)});
    write_csv(path, {"epoch", "train_rec", "train_kl", "train_tot", "val_rec", "val_kl", "val_tot"},
              rows);
}

} // namespace gwinv
