#pragma once

#include "sits/rng.hpp"
#include "sits/tensor.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace sits {

enum class Mode { train, infer };

// ---------------------------------------------------------------------------
// Temporal convolution
// ---------------------------------------------------------------------------

/// Weight sharing structure of a temporal convolution.
///  - full: one f x D_in filter per unit (the first layer of a
///    spectro-temporal network; with f = 1 this is the pure spectral (1, D)
///    convolution).
///  - temporal_shared: one f-tap filter per unit, applied identically to every
///    input channel; the per-channel responses are summed per unit, so the
///    layer holds f*n weights instead of f*D*n.
enum class ConvKind { full, temporal_shared };

struct ConvLayerParams {
    int filter_len = 0;
    int in_channels = 0;
    int units = 0;
    ConvKind kind = ConvKind::full;
    std::vector<double> weights;  // full: [tap][channel][unit]; shared: [tap][unit]
    std::vector<double> bias;     // one per unit

    static ConvLayerParams create(int filter_len, int in_channels, int units,
                                  ConvKind kind = ConvKind::full);
    long long weight_count() const;
    long long param_count() const { return weight_count() + units; }
};

/// `same` zero padding, stride 1: output time length equals input time length.
/// out(b,t,u) = bias[u] + sum_{j,d} w[j][d][u] * in(b, t + j - floor(f/2), d),
/// with zeros outside the time range.
Tensor3 conv1d_forward(const Tensor3& input, const ConvLayerParams& params);

struct ConvGrads {
    Tensor3 input;
    std::vector<double> weights;
    std::vector<double> bias;
};
ConvGrads conv1d_backward(const Tensor3& input, const ConvLayerParams& params,
                          const Tensor3& grad_out);

// ---------------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------------

struct DenseLayerParams {
    int in = 0;
    int out = 0;
    std::vector<double> weights;  // [in][out]
    std::vector<double> bias;     // [out]

    static DenseLayerParams create(int in, int out);
    long long param_count() const { return static_cast<long long>(in) * out + out; }
};

/// Input is a flattened activation (time length 1): out = x W + b per row.
Tensor3 dense_forward(const Tensor3& input, const DenseLayerParams& params);

struct DenseGrads {
    Tensor3 input;
    std::vector<double> weights;
    std::vector<double> bias;
};
DenseGrads dense_backward(const Tensor3& input, const DenseLayerParams& params,
                          const Tensor3& grad_out);

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

Tensor3 relu_forward(const Tensor3& input);
/// Subgradient at 0 is 0: grad passes where input > 0.
Tensor3 relu_backward(const Tensor3& input, const Tensor3& grad_out);

/// Inverted dropout. In train mode each activation is zeroed with probability
/// `rate` and survivors scale by 1/(1-rate), so inference is the identity.
/// The mask (0 or the survivor scale per entry) is written to `mask` when
/// mask != nullptr.
Tensor3 dropout_forward(const Tensor3& input, double rate, Mode mode, Rng& rng,
                        std::vector<double>* mask = nullptr);
Tensor3 dropout_backward(const Tensor3& grad_out, const std::vector<double>& mask);

// ---------------------------------------------------------------------------
// Batch normalization (per channel over batch x time)
// ---------------------------------------------------------------------------

struct BatchNormState {
    std::vector<double> gamma, beta;
    std::vector<double> running_mean, running_var;
    double momentum = 0.9;   // weight kept on the previous running value
    double epsilon = 1e-5;
    long long batches_seen = 0;

    static BatchNormState create(int channels);
    int channels() const { return static_cast<int>(gamma.size()); }
};

struct BatchNormCache {
    std::vector<double> mean, inv_std;  // per channel, batch statistics
    Tensor3 x_hat;
    long long rows = 0;
};

/// Train mode normalizes by batch statistics (biased variance) and folds them
/// into the running estimates; infer mode normalizes by the running
/// statistics and throws DataError when none have been accumulated.
Tensor3 batchnorm_forward(const Tensor3& input, BatchNormState& state, Mode mode,
                          BatchNormCache* cache = nullptr);

struct BatchNormGrads {
    Tensor3 input;
    std::vector<double> gamma;
    std::vector<double> beta;
};
BatchNormGrads batchnorm_backward(const Tensor3& grad_out, const BatchNormState& state,
                                  const BatchNormCache& cache);

// ---------------------------------------------------------------------------
// Pooling
// ---------------------------------------------------------------------------

enum class PoolKind { max, avg };

struct PoolCache {
    std::vector<std::int32_t> argmax;  // max pooling: winning input t per output cell
    int in_time = 0;
    int k = 0;
    PoolKind kind = PoolKind::max;
};

/// Non-overlapping windows of width k along time; a trailing partial window
/// is dropped. Max ties route to the earliest position.
Tensor3 pool_forward(const Tensor3& input, PoolKind kind, int k, PoolCache* cache = nullptr);
Tensor3 pool_backward(const Tensor3& grad_out, const PoolCache& cache, int batch, int channels);

/// Mean over the whole time axis, per channel: (N, T, D) -> (N, 1, D).
Tensor3 global_avg_pool(const Tensor3& input);
Tensor3 global_avg_pool_backward(const Tensor3& grad_out, int in_time);

// ---------------------------------------------------------------------------
// Softmax + cross-entropy
// ---------------------------------------------------------------------------

struct SoftmaxResult {
    std::vector<double> losses;  // -log p(label) per sample
    double mean_loss = 0.0;
    Tensor3 probabilities;       // (N, 1, C)
    Tensor3 grad_logits;         // p - onehot(label), per sample (unscaled)
};

/// Numerically stabilized with per-row max subtraction. `logits` must have
/// time length 1.
SoftmaxResult softmax_cross_entropy(const Tensor3& logits, std::span<const int> labels);

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<double> m, v;  // first/second moment accumulators
    long long t = 0;           // completed steps

    static AdamState create(std::size_t size);
};

/// One bias-corrected Adam update. Weight decay, when used, is added to the
/// gradients by the caller before this runs.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamConfig& config);

} // namespace sits
