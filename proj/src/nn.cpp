#include "gwinv/nn.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gwinv::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConstMat = Eigen::Map<const RowMat>;

inline int ceil_div(int a, int b) { return (a + b - 1) / b; }

} // namespace

SamePad same_pad(int in, int kernel, int stride)
{
    SamePad p;
    p.out = ceil_div(in, stride);
    const int total = std::max((p.out - 1) * stride + kernel - in, 0);
    p.before = total / 2;
    return p;
}

void conv2d_forward(const Tensor& x, const std::vector<double>& w, int kernel, int cin, int cout,
                    int stride, Tensor& y)
{
    if (x.c != cin) throw std::invalid_argument("conv2d: channel mismatch");
    const SamePad ph = same_pad(x.h, kernel, stride);
    const SamePad pw = same_pad(x.w, kernel, stride);
    y.resize(x.n, ph.out, pw.out, cout);

#pragma omp parallel for schedule(static)
    for (int in = 0; in < x.n; ++in) {
        for (int oy = 0; oy < y.h; ++oy) {
            for (int ox = 0; ox < y.w; ++ox) {
                double* acc = y.ptr(in, oy, ox);
                for (int ky = 0; ky < kernel; ++ky) {
                    const int iy = oy * stride + ky - ph.before;
                    if (iy < 0 || iy >= x.h) continue;
                    for (int kx = 0; kx < kernel; ++kx) {
                        const int ix = ox * stride + kx - pw.before;
                        if (ix < 0 || ix >= x.w) continue;
                        const double* xp = x.ptr(in, iy, ix);
                        const double* wp = &w[((static_cast<std::size_t>(ky) * kernel + kx) * cin) * cout];
                        for (int ci = 0; ci < cin; ++ci) {
                            const double xv = xp[ci];
                            const double* wrow = wp + static_cast<std::size_t>(ci) * cout;
                            for (int co = 0; co < cout; ++co) acc[co] += xv * wrow[co];
                        }
                    }
                }
            }
        }
    }
}

void conv2d_backward_input(const Tensor& dy, const std::vector<double>& w, int kernel, int cin,
                           int cout, int stride, Tensor& dx)
{
    const SamePad ph = same_pad(dx.h, kernel, stride);
    const SamePad pw = same_pad(dx.w, kernel, stride);
    std::fill(dx.v.begin(), dx.v.end(), 0.0);

#pragma omp parallel for schedule(static)
    for (int in = 0; in < dx.n; ++in) {
        for (int oy = 0; oy < dy.h; ++oy) {
            for (int ox = 0; ox < dy.w; ++ox) {
                const double* g = dy.ptr(in, oy, ox);
                for (int ky = 0; ky < kernel; ++ky) {
                    const int iy = oy * stride + ky - ph.before;
                    if (iy < 0 || iy >= dx.h) continue;
                    for (int kx = 0; kx < kernel; ++kx) {
                        const int ix = ox * stride + kx - pw.before;
                        if (ix < 0 || ix >= dx.w) continue;
                        double* dxp = dx.ptr(in, iy, ix);
                        const double* wp = &w[((static_cast<std::size_t>(ky) * kernel + kx) * cin) * cout];
                        for (int ci = 0; ci < cin; ++ci) {
                            const double* wrow = wp + static_cast<std::size_t>(ci) * cout;
                            double acc = 0.0;
                            for (int co = 0; co < cout; ++co) acc += g[co] * wrow[co];
                            dxp[ci] += acc;
                        }
                    }
                }
            }
        }
    }
}

void conv2d_backward_weight(const Tensor& x, const Tensor& dy, int kernel, int cin, int cout,
                            int stride, std::vector<double>& dw)
{
    const SamePad ph = same_pad(x.h, kernel, stride);
    const SamePad pw = same_pad(x.w, kernel, stride);
    dw.assign(static_cast<std::size_t>(kernel) * kernel * cin * cout, 0.0);

    // Each weight element is reduced serially over (n, oy, ox); parallelism is
    // across weight elements so the result does not depend on thread count.
#pragma omp parallel for collapse(2) schedule(static)
    for (int ky = 0; ky < kernel; ++ky) {
        for (int kx = 0; kx < kernel; ++kx) {
            std::vector<double> local(static_cast<std::size_t>(cin) * cout, 0.0);
            for (int in = 0; in < x.n; ++in) {
                for (int oy = 0; oy < dy.h; ++oy) {
                    const int iy = oy * stride + ky - ph.before;
                    if (iy < 0 || iy >= x.h) continue;
                    for (int ox = 0; ox < dy.w; ++ox) {
                        const int ix = ox * stride + kx - pw.before;
                        if (ix < 0 || ix >= x.w) continue;
                        const double* xp = x.ptr(in, iy, ix);
                        const double* g = dy.ptr(in, oy, ox);
                        for (int ci = 0; ci < cin; ++ci) {
                            double* lrow = local.data() + static_cast<std::size_t>(ci) * cout;
                            const double xv = xp[ci];
                            for (int co = 0; co < cout; ++co) lrow[co] += xv * g[co];
                        }
                    }
                }
            }
            double* out = &dw[((static_cast<std::size_t>(ky) * kernel + kx) * cin) * cout];
            std::copy(local.begin(), local.end(), out);
        }
    }
}

void conv2d_transpose_forward(const Tensor& x_small, const std::vector<double>& w, int kernel,
                              int c_big, int c_small, int stride, int out_h, int out_w,
                              Tensor& y_big)
{
    const SamePad ph = same_pad(out_h, kernel, stride);
    if (ph.out != x_small.h)
        throw std::invalid_argument("conv2d_transpose: small height inconsistent with output");
    y_big.resize(x_small.n, out_h, out_w, c_big);
    conv2d_backward_input(x_small, w, kernel, c_big, c_small, stride, y_big);
}

void conv2d_transpose_backward(const Tensor& dy_big, const Tensor& x_small,
                               const std::vector<double>& w, int kernel, int c_big, int c_small,
                               int stride, Tensor& dx_small, std::vector<double>& dw)
{
    // Forward was B = A^T(S) for the reference convolution S = A(B), so the
    // gradients swap roles: dS = A(dB), dW accumulates dB against S.
    conv2d_forward(dy_big, w, kernel, c_big, c_small, stride, dx_small);
    conv2d_backward_weight(dy_big, x_small, kernel, c_big, c_small, stride, dw);
}

void batchnorm_forward_train(const Tensor& x, const BatchNormParams& p, Tensor& y,
                             BatchNormCache& cache, bool update_running)
{
    const int channels = x.c;
    const std::size_t count = x.size() / channels;
    y.resize(x.n, x.h, x.w, x.c);
    cache.xhat.resize(x.size());
    cache.inv_std.assign(channels, 0.0);
    cache.mean.assign(channels, 0.0);

    std::vector<double> var(channels, 0.0);
    for (std::size_t i = 0; i < x.size(); i += channels)
        for (int ch = 0; ch < channels; ++ch) cache.mean[ch] += x.v[i + ch];
    for (int ch = 0; ch < channels; ++ch) cache.mean[ch] /= static_cast<double>(count);
    for (std::size_t i = 0; i < x.size(); i += channels)
        for (int ch = 0; ch < channels; ++ch) {
            const double d = x.v[i + ch] - cache.mean[ch];
            var[ch] += d * d;
        }
    for (int ch = 0; ch < channels; ++ch) {
        var[ch] /= static_cast<double>(count);
        cache.inv_std[ch] = 1.0 / std::sqrt(var[ch] + kBatchNormEps);
    }

    const std::vector<double>& gamma = *p.gamma;
    const std::vector<double>& beta = *p.beta;
    for (std::size_t i = 0; i < x.size(); i += channels)
        for (int ch = 0; ch < channels; ++ch) {
            const double xh = (x.v[i + ch] - cache.mean[ch]) * cache.inv_std[ch];
            cache.xhat[i + ch] = xh;
            y.v[i + ch] = gamma[ch] * xh + beta[ch];
        }

    if (update_running) {
        for (int ch = 0; ch < channels; ++ch) {
            (*p.running_mean)[ch] =
                kBatchNormMomentum * (*p.running_mean)[ch] + (1.0 - kBatchNormMomentum) * cache.mean[ch];
            (*p.running_var)[ch] =
                kBatchNormMomentum * (*p.running_var)[ch] + (1.0 - kBatchNormMomentum) * var[ch];
        }
    }
}

void batchnorm_forward_infer(const Tensor& x, const BatchNormParams& p, Tensor& y)
{
    const int channels = x.c;
    y.resize(x.n, x.h, x.w, x.c);
    const std::vector<double>& gamma = *p.gamma;
    const std::vector<double>& beta = *p.beta;
    std::vector<double> scale(channels), shift(channels);
    for (int ch = 0; ch < channels; ++ch) {
        scale[ch] = gamma[ch] / std::sqrt((*p.running_var)[ch] + kBatchNormEps);
        shift[ch] = beta[ch] - scale[ch] * (*p.running_mean)[ch];
    }
    for (std::size_t i = 0; i < x.size(); i += channels)
        for (int ch = 0; ch < channels; ++ch) y.v[i + ch] = scale[ch] * x.v[i + ch] + shift[ch];
}

void batchnorm_backward(const Tensor& dy, const BatchNormCache& cache,
                        const std::vector<double>& gamma, Tensor& dx, std::vector<double>& dgamma,
                        std::vector<double>& dbeta)
{
    const int channels = dy.c;
    const std::size_t count = dy.size() / channels;
    dx.resize(dy.n, dy.h, dy.w, dy.c);
    dgamma.assign(channels, 0.0);
    dbeta.assign(channels, 0.0);

    std::vector<double> sum_dy(channels, 0.0), sum_dy_xhat(channels, 0.0);
    for (std::size_t i = 0; i < dy.size(); i += channels)
        for (int ch = 0; ch < channels; ++ch) {
            sum_dy[ch] += dy.v[i + ch];
            sum_dy_xhat[ch] += dy.v[i + ch] * cache.xhat[i + ch];
        }
    for (int ch = 0; ch < channels; ++ch) {
        dgamma[ch] = sum_dy_xhat[ch];
        dbeta[ch] = sum_dy[ch];
    }
    const double inv_count = 1.0 / static_cast<double>(count);
    for (std::size_t i = 0; i < dy.size(); i += channels)
        for (int ch = 0; ch < channels; ++ch) {
            const double t = dy.v[i + ch] - inv_count * sum_dy[ch]
                             - cache.xhat[i + ch] * inv_count * sum_dy_xhat[ch];
            dx.v[i + ch] = gamma[ch] * cache.inv_std[ch] * t;
        }
}

void relu_forward(const Tensor& x, Tensor& y)
{
    y.resize(x.n, x.h, x.w, x.c);
    for (std::size_t i = 0; i < x.size(); ++i) y.v[i] = x.v[i] > 0.0 ? x.v[i] : 0.0;
}

void relu_backward(const Tensor& dy, const Tensor& x, Tensor& dx)
{
    dx.resize(x.n, x.h, x.w, x.c);
    for (std::size_t i = 0; i < x.size(); ++i) dx.v[i] = x.v[i] > 0.0 ? dy.v[i] : 0.0;
}

void dense_forward(const Tensor& x, const std::vector<double>& w, const std::vector<double>* bias,
                   int in_dim, int out_dim, Tensor& y)
{
    y.resize(x.n, 1, 1, out_dim);
    MapConstMat xm(x.v.data(), x.n, in_dim);
    MapConstMat wm(w.data(), in_dim, out_dim);
    MapMat ym(y.v.data(), x.n, out_dim);
    ym.noalias() = xm * wm;
    if (bias)
        for (int in = 0; in < x.n; ++in)
            for (int o = 0; o < out_dim; ++o) y.v[static_cast<std::size_t>(in) * out_dim + o] += (*bias)[o];
}

void dense_backward(const Tensor& x, const Tensor& dy, const std::vector<double>& w, int in_dim,
                    int out_dim, Tensor& dx, std::vector<double>& dw, std::vector<double>* db)
{
    dx.resize(x.n, 1, 1, in_dim);
    dw.assign(static_cast<std::size_t>(in_dim) * out_dim, 0.0);
    MapConstMat xm(x.v.data(), x.n, in_dim);
    MapConstMat dym(dy.v.data(), x.n, out_dim);
    MapConstMat wm(w.data(), in_dim, out_dim);
    MapMat dxm(dx.v.data(), x.n, in_dim);
    MapMat dwm(dw.data(), in_dim, out_dim);
    dxm.noalias() = dym * wm.transpose();
    dwm.noalias() = xm.transpose() * dym;
    if (db) {
        db->assign(out_dim, 0.0);
        for (int in = 0; in < x.n; ++in)
            for (int o = 0; o < out_dim; ++o) (*db)[o] += dy.v[static_cast<std::size_t>(in) * out_dim + o];
    }
}

} // namespace gwinv::nn
