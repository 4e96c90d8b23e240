#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace gwinv::nn {

/// Dense NHWC tensor.
struct Tensor {
    int n = 0, h = 0, w = 0, c = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int n_, int h_, int w_, int c_) { resize(n_, h_, w_, c_); }

    void resize(int n_, int h_, int w_, int c_)
    {
        n = n_; h = h_; w = w_; c = c_;
        v.assign(static_cast<std::size_t>(n) * h * w * c, 0.0);
    }

    std::size_t size() const { return v.size(); }

    double* item(int in) { return v.data() + static_cast<std::size_t>(in) * h * w * c; }
    const double* item(int in) const { return v.data() + static_cast<std::size_t>(in) * h * w * c; }

    std::size_t offset(int in, int ih, int iw, int ic) const
    {
        return ((static_cast<std::size_t>(in) * h + ih) * w + iw) * c + ic;
    }
    double& at(int in, int ih, int iw, int ic) { return v[offset(in, ih, iw, ic)]; }
    double at(int in, int ih, int iw, int ic) const { return v[offset(in, ih, iw, ic)]; }
    double* ptr(int in, int ih, int iw) { return v.data() + offset(in, ih, iw, 0); }
    const double* ptr(int in, int ih, int iw) const { return v.data() + offset(in, ih, iw, 0); }
};

/// TF-style SAME padding: output = ceil(in/stride), extra padding goes after.
struct SamePad {
    int out = 0;
    int before = 0;
};
SamePad same_pad(int in, int kernel, int stride);

// Convolution weights are stored [kh][kw][cin][cout], row-major, no bias.

void conv2d_forward(const Tensor& x, const std::vector<double>& w, int kernel, int cin, int cout,
                    int stride, Tensor& y);

/// dx += is not used: dx is overwritten. dx must be pre-sized to the input shape.
void conv2d_backward_input(const Tensor& dy, const std::vector<double>& w, int kernel, int cin,
                           int cout, int stride, Tensor& dx);

void conv2d_backward_weight(const Tensor& x, const Tensor& dy, int kernel, int cin, int cout,
                            int stride, std::vector<double>& dw);

/// Transposed convolution mapping a small map to a declared larger shape,
/// defined as the adjoint of conv2d_forward(big -> small). Weights are shaped
/// for that reference convolution: [kh][kw][c_big][c_small].
void conv2d_transpose_forward(const Tensor& x_small, const std::vector<double>& w, int kernel,
                              int c_big, int c_small, int stride, int out_h, int out_w,
                              Tensor& y_big);
void conv2d_transpose_backward(const Tensor& dy_big, const Tensor& x_small,
                               const std::vector<double>& w, int kernel, int c_big, int c_small,
                               int stride, Tensor& dx_small, std::vector<double>& dw);

struct BatchNormParams {
    std::vector<double>* gamma = nullptr;
    std::vector<double>* beta = nullptr;
    std::vector<double>* running_mean = nullptr;
    std::vector<double>* running_var = nullptr;
};

struct BatchNormCache {
    std::vector<double> xhat;    // normalized input, same layout as x
    std::vector<double> inv_std; // per channel
    std::vector<double> mean;    // per channel (batch stats)
};

constexpr double kBatchNormEps = 1e-5;
constexpr double kBatchNormMomentum = 0.9;

/// Train mode normalizes with batch statistics (biased variance) and, when
/// update_running is set, folds them into the running averages. Infer mode
/// uses the running statistics and needs no cache.
void batchnorm_forward_train(const Tensor& x, const BatchNormParams& p, Tensor& y,
                             BatchNormCache& cache, bool update_running);
void batchnorm_forward_infer(const Tensor& x, const BatchNormParams& p, Tensor& y);
void batchnorm_backward(const Tensor& dy, const BatchNormCache& cache,
                        const std::vector<double>& gamma, Tensor& dx, std::vector<double>& dgamma,
                        std::vector<double>& dbeta);

void relu_forward(const Tensor& x, Tensor& y);
void relu_backward(const Tensor& dy, const Tensor& x, Tensor& dx);

// Dense weights are stored [in][out], row-major. x is [n][in] as a Tensor with
// h = w = 1, c = in.

void dense_forward(const Tensor& x, const std::vector<double>& w, const std::vector<double>* bias,
                   int in_dim, int out_dim, Tensor& y);
void dense_backward(const Tensor& x, const Tensor& dy, const std::vector<double>& w, int in_dim,
                    int out_dim, Tensor& dx, std::vector<double>& dw, std::vector<double>* db);

} // namespace gwinv::nn
