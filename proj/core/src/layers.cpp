#include "sits/layers.hpp"

#include "sits/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

namespace sits {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConstMat = Eigen::Map<const RowMat>;

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

// Unrolls the receptive fields of a `same`-padded stride-1 temporal
// convolution: row (b*T + t) holds the f*D window centered at t, zeros
// outside the series.
void im2col(const Tensor3& in, int filter_len, RowMat& col) {
    const int T = in.time;
    const int D = in.channels;
    const int off = filter_len / 2;
    col.setZero(in.rows(), static_cast<long long>(filter_len) * D);
    for (int b = 0; b < in.batch; ++b) {
        const double* src_base = in.data.data() + static_cast<std::size_t>(b) * T * D;
        for (int j = 0; j < filter_len; ++j) {
            const int t_lo = std::max(0, off - j);
            const int t_hi = std::min(T - 1, T - 1 + off - j);
            for (int t = t_lo; t <= t_hi; ++t) {
                const int t_src = t + j - off;
                std::memcpy(col.data() + (static_cast<std::size_t>(b) * T + t) * col.cols() +
                                static_cast<std::size_t>(j) * D,
                            src_base + static_cast<std::size_t>(t_src) * D,
                            sizeof(double) * static_cast<std::size_t>(D));
            }
        }
    }
}

// Adjoint of im2col: scatter-adds column gradients back onto the series.
void col2im_add(const RowMat& col_grad, int filter_len, Tensor3& grad_in) {
    const int T = grad_in.time;
    const int D = grad_in.channels;
    const int off = filter_len / 2;
    for (int b = 0; b < grad_in.batch; ++b) {
        double* dst_base = grad_in.data.data() + static_cast<std::size_t>(b) * T * D;
        for (int j = 0; j < filter_len; ++j) {
            const int t_lo = std::max(0, off - j);
            const int t_hi = std::min(T - 1, T - 1 + off - j);
            for (int t = t_lo; t <= t_hi; ++t) {
                const int t_src = t + j - off;
                const double* src = col_grad.data() +
                                    (static_cast<std::size_t>(b) * T + t) * col_grad.cols() +
                                    static_cast<std::size_t>(j) * D;
                double* dst = dst_base + static_cast<std::size_t>(t_src) * D;
                for (int d = 0; d < D; ++d) dst[d] += src[d];
            }
        }
    }
}

Tensor3 sum_channels(const Tensor3& in) {
    Tensor3 s(in.batch, in.time, 1);
    const double* src = in.data.data();
    for (long long r = 0; r < in.rows(); ++r) {
        double acc = 0.0;
        for (int d = 0; d < in.channels; ++d) acc += src[r * in.channels + d];
        s.data[r] = acc;
    }
    return s;
}

} // namespace

ConvLayerParams ConvLayerParams::create(int filter_len, int in_channels, int units, ConvKind kind) {
    require(filter_len >= 1 && in_channels >= 1 && units >= 1, "conv layer dimensions must be positive");
    ConvLayerParams p;
    p.filter_len = filter_len;
    p.in_channels = in_channels;
    p.units = units;
    p.kind = kind;
    p.weights.assign(static_cast<std::size_t>(p.weight_count()), 0.0);
    p.bias.assign(static_cast<std::size_t>(units), 0.0);
    return p;
}

long long ConvLayerParams::weight_count() const {
    if (kind == ConvKind::temporal_shared) {
        return static_cast<long long>(filter_len) * units;
    }
    return static_cast<long long>(filter_len) * in_channels * units;
}

Tensor3 conv1d_forward(const Tensor3& input, const ConvLayerParams& p) {
    require(input.channels == p.in_channels, "conv1d_forward: input channels do not match layer");
    require(input.batch > 0 && input.time > 0, "conv1d_forward: empty input");

    RowMat col;
    Tensor3 out(input.batch, input.time, p.units);
    MapMat o(out.data.data(), out.rows(), p.units);
    if (p.kind == ConvKind::temporal_shared) {
        const Tensor3 s = sum_channels(input);
        im2col(s, p.filter_len, col);
        MapConstMat w(p.weights.data(), p.filter_len, p.units);
        o.noalias() = col * w;
    } else {
        im2col(input, p.filter_len, col);
        MapConstMat w(p.weights.data(), static_cast<long long>(p.filter_len) * p.in_channels, p.units);
        o.noalias() = col * w;
    }
    o.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(p.bias.data(), p.units);
    return out;
}

ConvGrads conv1d_backward(const Tensor3& input, const ConvLayerParams& p, const Tensor3& grad_out) {
    require(input.channels == p.in_channels, "conv1d_backward: input channels do not match layer");
    require(grad_out.batch == input.batch && grad_out.time == input.time &&
                grad_out.channels == p.units,
            "conv1d_backward: grad_out shape mismatch");

    ConvGrads grads;
    grads.input = Tensor3(input.batch, input.time, input.channels);
    grads.weights.assign(p.weights.size(), 0.0);
    grads.bias.assign(p.bias.size(), 0.0);

    MapConstMat g(grad_out.data.data(), grad_out.rows(), p.units);
    Eigen::Map<Eigen::RowVectorXd>(grads.bias.data(), p.units) = g.colwise().sum();

    RowMat col;
    if (p.kind == ConvKind::temporal_shared) {
        const Tensor3 s = sum_channels(input);
        im2col(s, p.filter_len, col);
        MapConstMat w(p.weights.data(), p.filter_len, p.units);
        MapMat gw(grads.weights.data(), p.filter_len, p.units);
        gw.noalias() = col.transpose() * g;

        RowMat col_grad = g * w.transpose();  // (B*T, f)
        Tensor3 grad_s(input.batch, input.time, 1);
        col2im_add(col_grad, p.filter_len, grad_s);
        // The channel sum broadcast its inputs, so each channel receives the
        // summed-series gradient.
        for (long long r = 0; r < input.rows(); ++r) {
            for (int d = 0; d < input.channels; ++d) {
                grads.input.data[r * input.channels + d] = grad_s.data[r];
            }
        }
    } else {
        im2col(input, p.filter_len, col);
        const long long fd = static_cast<long long>(p.filter_len) * p.in_channels;
        MapConstMat w(p.weights.data(), fd, p.units);
        MapMat gw(grads.weights.data(), fd, p.units);
        gw.noalias() = col.transpose() * g;

        RowMat col_grad = g * w.transpose();  // (B*T, f*D)
        col2im_add(col_grad, p.filter_len, grads.input);
    }
    return grads;
}

DenseLayerParams DenseLayerParams::create(int in, int out) {
    require(in >= 1 && out >= 1, "dense layer dimensions must be positive");
    DenseLayerParams p;
    p.in = in;
    p.out = out;
    p.weights.assign(static_cast<std::size_t>(in) * out, 0.0);
    p.bias.assign(static_cast<std::size_t>(out), 0.0);
    return p;
}

Tensor3 dense_forward(const Tensor3& input, const DenseLayerParams& p) {
    require(input.time == 1, "dense_forward: input must be flattened (time length 1)");
    require(input.channels == p.in, "dense_forward: input width does not match layer");

    Tensor3 out(input.batch, 1, p.out);
    MapConstMat x(input.data.data(), input.batch, p.in);
    MapConstMat w(p.weights.data(), p.in, p.out);
    MapMat o(out.data.data(), input.batch, p.out);
    o.noalias() = x * w;
    o.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(p.bias.data(), p.out);
    return out;
}

DenseGrads dense_backward(const Tensor3& input, const DenseLayerParams& p, const Tensor3& grad_out) {
    require(input.time == 1 && input.channels == p.in, "dense_backward: input shape mismatch");
    require(grad_out.batch == input.batch && grad_out.time == 1 && grad_out.channels == p.out,
            "dense_backward: grad_out shape mismatch");

    DenseGrads grads;
    grads.input = Tensor3(input.batch, 1, p.in);
    grads.weights.assign(p.weights.size(), 0.0);
    grads.bias.assign(p.bias.size(), 0.0);

    MapConstMat x(input.data.data(), input.batch, p.in);
    MapConstMat w(p.weights.data(), p.in, p.out);
    MapConstMat g(grad_out.data.data(), grad_out.batch, p.out);

    MapMat gw(grads.weights.data(), p.in, p.out);
    gw.noalias() = x.transpose() * g;
    Eigen::Map<Eigen::RowVectorXd>(grads.bias.data(), p.out) = g.colwise().sum();
    MapMat gx(grads.input.data.data(), input.batch, p.in);
    gx.noalias() = g * w.transpose();
    return grads;
}

Tensor3 relu_forward(const Tensor3& input) {
    Tensor3 out = input;
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    return out;
}

Tensor3 relu_backward(const Tensor3& input, const Tensor3& grad_out) {
    require(input.same_shape(grad_out), "relu_backward: shape mismatch");
    Tensor3 grad = grad_out;
    for (std::size_t i = 0; i < grad.data.size(); ++i) {
        if (input.data[i] <= 0.0) grad.data[i] = 0.0;
    }
    return grad;
}

Tensor3 dropout_forward(const Tensor3& input, double rate, Mode mode, Rng& rng,
                        std::vector<double>* mask) {
    require(rate >= 0.0 && rate < 1.0, "dropout rate must be in [0, 1)");
    if (mode == Mode::infer || rate == 0.0) {
        if (mask) mask->assign(input.data.size(), 1.0);
        return input;
    }
    const double scale = 1.0 / (1.0 - rate);
    Tensor3 out = input;
    if (mask) mask->resize(input.data.size());
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        const double m = rng.uniform() < rate ? 0.0 : scale;
        out.data[i] *= m;
        if (mask) (*mask)[i] = m;
    }
    return out;
}

Tensor3 dropout_backward(const Tensor3& grad_out, const std::vector<double>& mask) {
    require(grad_out.data.size() == mask.size(), "dropout_backward: mask size mismatch");
    Tensor3 grad = grad_out;
    for (std::size_t i = 0; i < grad.data.size(); ++i) grad.data[i] *= mask[i];
    return grad;
}

BatchNormState BatchNormState::create(int channels) {
    require(channels >= 1, "batch norm needs at least one channel");
    BatchNormState s;
    s.gamma.assign(channels, 1.0);
    s.beta.assign(channels, 0.0);
    s.running_mean.assign(channels, 0.0);
    s.running_var.assign(channels, 1.0);
    return s;
}

Tensor3 batchnorm_forward(const Tensor3& input, BatchNormState& state, Mode mode,
                          BatchNormCache* cache) {
    const int D = input.channels;
    require(D == state.channels(), "batchnorm_forward: channel mismatch");
    const long long rows = input.rows();
    require(rows > 0, "batchnorm_forward: empty input");

    Tensor3 out(input.batch, input.time, D);

    if (mode == Mode::infer) {
        if (state.batches_seen == 0) {
            throw DataError("batch norm has no running statistics; train before inference");
        }
        std::vector<double> scale(D), shift(D);
        for (int d = 0; d < D; ++d) {
            const double inv = 1.0 / std::sqrt(state.running_var[d] + state.epsilon);
            scale[d] = state.gamma[d] * inv;
            shift[d] = state.beta[d] - state.running_mean[d] * scale[d];
        }
        for (long long r = 0; r < rows; ++r) {
            for (int d = 0; d < D; ++d) {
                out.data[r * D + d] = input.data[r * D + d] * scale[d] + shift[d];
            }
        }
        return out;
    }

    std::vector<double> mean(D, 0.0), var(D, 0.0);
    for (long long r = 0; r < rows; ++r) {
        for (int d = 0; d < D; ++d) mean[d] += input.data[r * D + d];
    }
    for (int d = 0; d < D; ++d) mean[d] /= static_cast<double>(rows);
    for (long long r = 0; r < rows; ++r) {
        for (int d = 0; d < D; ++d) {
            const double c = input.data[r * D + d] - mean[d];
            var[d] += c * c;
        }
    }
    for (int d = 0; d < D; ++d) var[d] /= static_cast<double>(rows);

    std::vector<double> inv_std(D);
    for (int d = 0; d < D; ++d) inv_std[d] = 1.0 / std::sqrt(var[d] + state.epsilon);

    Tensor3 x_hat(input.batch, input.time, D);
    for (long long r = 0; r < rows; ++r) {
        for (int d = 0; d < D; ++d) {
            const double xh = (input.data[r * D + d] - mean[d]) * inv_std[d];
            x_hat.data[r * D + d] = xh;
            out.data[r * D + d] = state.gamma[d] * xh + state.beta[d];
        }
    }

    if (state.batches_seen == 0) {
        state.running_mean = mean;
        state.running_var = var;
    } else {
        for (int d = 0; d < D; ++d) {
            state.running_mean[d] = state.momentum * state.running_mean[d] + (1.0 - state.momentum) * mean[d];
            state.running_var[d] = state.momentum * state.running_var[d] + (1.0 - state.momentum) * var[d];
        }
    }
    ++state.batches_seen;

    if (cache) {
        cache->mean = std::move(mean);
        cache->inv_std = std::move(inv_std);
        cache->x_hat = std::move(x_hat);
        cache->rows = rows;
    }
    return out;
}

BatchNormGrads batchnorm_backward(const Tensor3& grad_out, const BatchNormState& state,
                                  const BatchNormCache& cache) {
    const int D = grad_out.channels;
    require(D == state.channels(), "batchnorm_backward: channel mismatch");
    require(grad_out.rows() == cache.rows, "batchnorm_backward: cache does not match grad_out");

    const long long rows = cache.rows;
    BatchNormGrads grads;
    grads.input = Tensor3(grad_out.batch, grad_out.time, D);
    grads.gamma.assign(D, 0.0);
    grads.beta.assign(D, 0.0);

    for (long long r = 0; r < rows; ++r) {
        for (int d = 0; d < D; ++d) {
            const double g = grad_out.data[r * D + d];
            grads.gamma[d] += g * cache.x_hat.data[r * D + d];
            grads.beta[d] += g;
        }
    }
    // dx = gamma * inv_std / N * (N g - sum(g) - x_hat * sum(g x_hat))
    const double n = static_cast<double>(rows);
    for (long long r = 0; r < rows; ++r) {
        for (int d = 0; d < D; ++d) {
            const double g = grad_out.data[r * D + d];
            const double term =
                n * g - grads.beta[d] - cache.x_hat.data[r * D + d] * grads.gamma[d];
            grads.input.data[r * D + d] = state.gamma[d] * cache.inv_std[d] / n * term;
        }
    }
    return grads;
}

Tensor3 pool_forward(const Tensor3& input, PoolKind kind, int k, PoolCache* cache) {
    require(k >= 1, "pool window must be >= 1");
    const int out_time = input.time / k;
    require(out_time >= 1, "pool window exceeds the series length");

    const int D = input.channels;
    Tensor3 out(input.batch, out_time, D);
    if (cache) {
        cache->kind = kind;
        cache->k = k;
        cache->in_time = input.time;
        cache->argmax.assign(kind == PoolKind::max ? out.size() : 0, 0);
    }
    for (int b = 0; b < input.batch; ++b) {
        for (int ot = 0; ot < out_time; ++ot) {
            for (int d = 0; d < D; ++d) {
                const int t0 = ot * k;
                if (kind == PoolKind::max) {
                    double best = input(b, t0, d);
                    int best_t = t0;
                    for (int j = 1; j < k; ++j) {
                        const double v = input(b, t0 + j, d);
                        if (v > best) {
                            best = v;
                            best_t = t0 + j;
                        }
                    }
                    out(b, ot, d) = best;
                    if (cache) {
                        cache->argmax[(static_cast<std::size_t>(b) * out_time + ot) * D + d] = best_t;
                    }
                } else {
                    double acc = 0.0;
                    for (int j = 0; j < k; ++j) acc += input(b, t0 + j, d);
                    out(b, ot, d) = acc / k;
                }
            }
        }
    }
    return out;
}

Tensor3 pool_backward(const Tensor3& grad_out, const PoolCache& cache, int batch, int channels) {
    require(grad_out.batch == batch && grad_out.channels == channels,
            "pool_backward: shape mismatch");
    Tensor3 grad(batch, cache.in_time, channels);
    const int out_time = grad_out.time;
    for (int b = 0; b < batch; ++b) {
        for (int ot = 0; ot < out_time; ++ot) {
            for (int d = 0; d < channels; ++d) {
                const double g = grad_out(b, ot, d);
                if (cache.kind == PoolKind::max) {
                    const int t = cache.argmax[(static_cast<std::size_t>(b) * out_time + ot) *
                                                   channels + d];
                    grad(b, t, d) += g;
                } else {
                    const double share = g / cache.k;
                    for (int j = 0; j < cache.k; ++j) grad(b, ot * cache.k + j, d) += share;
                }
            }
        }
    }
    return grad;
}

Tensor3 global_avg_pool(const Tensor3& input) {
    require(input.time >= 1, "global_avg_pool: empty time axis");
    Tensor3 out(input.batch, 1, input.channels);
    for (int b = 0; b < input.batch; ++b) {
        for (int d = 0; d < input.channels; ++d) {
            double acc = 0.0;
            for (int t = 0; t < input.time; ++t) acc += input(b, t, d);
            out(b, 0, d) = acc / input.time;
        }
    }
    return out;
}

Tensor3 global_avg_pool_backward(const Tensor3& grad_out, int in_time) {
    require(grad_out.time == 1, "global_avg_pool_backward: grad must have time length 1");
    Tensor3 grad(grad_out.batch, in_time, grad_out.channels);
    for (int b = 0; b < grad_out.batch; ++b) {
        for (int d = 0; d < grad_out.channels; ++d) {
            const double share = grad_out(b, 0, d) / in_time;
            for (int t = 0; t < in_time; ++t) grad(b, t, d) = share;
        }
    }
    return grad;
}

SoftmaxResult softmax_cross_entropy(const Tensor3& logits, std::span<const int> labels) {
    require(logits.time == 1, "softmax_cross_entropy: logits must have time length 1");
    require(static_cast<std::size_t>(logits.batch) == labels.size(),
            "softmax_cross_entropy: one label per row required");
    const int C = logits.channels;

    SoftmaxResult res;
    res.losses.resize(logits.batch);
    res.probabilities = Tensor3(logits.batch, 1, C);
    res.grad_logits = Tensor3(logits.batch, 1, C);

    double total = 0.0;
    for (int b = 0; b < logits.batch; ++b) {
        const int y = labels[b];
        require(y >= 0 && y < C, "softmax_cross_entropy: label outside [0, C)");
        const double* row = logits.data.data() + static_cast<std::size_t>(b) * C;
        double max_logit = row[0];
        for (int c = 1; c < C; ++c) max_logit = std::max(max_logit, row[c]);
        double sum = 0.0;
        for (int c = 0; c < C; ++c) sum += std::exp(row[c] - max_logit);
        const double log_sum = std::log(sum);
        for (int c = 0; c < C; ++c) {
            const double p = std::exp(row[c] - max_logit) / sum;
            res.probabilities(b, 0, c) = p;
            res.grad_logits(b, 0, c) = p - (c == y ? 1.0 : 0.0);
        }
        res.losses[b] = -(row[y] - max_logit - log_sum);
        total += res.losses[b];
    }
    res.mean_loss = total / logits.batch;
    return res;
}

AdamState AdamState::create(std::size_t size) {
    AdamState s;
    s.m.assign(size, 0.0);
    s.v.assign(size, 0.0);
    return s;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamConfig& config) {
    require(params.size() == grads.size() && params.size() == state.m.size() &&
                params.size() == state.v.size(),
            "adam_step: size mismatch");
    ++state.t;
    const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.t));
    const double inv_bc1 = 1.0 / bc1;
    const double inv_bc2 = 1.0 / bc2;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
        state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
        const double m_hat = state.m[i] * inv_bc1;
        const double v_hat = state.v[i] * inv_bc2;
        params[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
}

} // namespace sits
