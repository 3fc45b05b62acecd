#pragma once

#include "sits/layers.hpp"
#include "sits/series.hpp"
#include "sits/tensor.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace sits {

// ---------------------------------------------------------------------------
// Declarative network description
// ---------------------------------------------------------------------------

struct ConvDesc {
    int filter_len = 5;
    int units = 64;
    ConvKind kind = ConvKind::full;
    bool operator==(const ConvDesc&) const = default;
};
struct BatchNormDesc {
    bool operator==(const BatchNormDesc&) const = default;
};
struct ReluDesc {
    bool operator==(const ReluDesc&) const = default;
};
struct DropoutDesc {
    double rate = 0.5;
    bool operator==(const DropoutDesc&) const = default;
};
struct PoolDesc {
    PoolKind kind = PoolKind::max;
    int k = 2;
    bool operator==(const PoolDesc&) const = default;
};
struct GlobalAvgPoolDesc {
    bool operator==(const GlobalAvgPoolDesc&) const = default;
};
struct FlattenDesc {
    bool operator==(const FlattenDesc&) const = default;
};
struct DenseDesc {
    int units = 256;
    bool operator==(const DenseDesc&) const = default;
};
/// Final classification layer: a dense projection to `classes` logits whose
/// probabilities come out of the loss/softmax.
struct SoftmaxDesc {
    int classes = 0;
    bool operator==(const SoftmaxDesc&) const = default;
};

using LayerDesc = std::variant<ConvDesc, BatchNormDesc, ReluDesc, DropoutDesc, PoolDesc,
                               GlobalAvgPoolDesc, FlattenDesc, DenseDesc, SoftmaxDesc>;

struct NetworkSpec {
    int input_time = 0;
    int input_channels = 0;
    std::vector<LayerDesc> layers;

    /// Checks that shapes chain consistently and the final layer is a softmax.
    /// Throws DataError otherwise.
    void validate() const;
    int num_classes() const;

    bool operator==(const NetworkSpec&) const = default;
};

/// Exact trainable scalar count of the described network (weights, biases and
/// batch-norm gamma/beta; optimizer and running statistics excluded).
long long param_count(const NetworkSpec& spec);

// ---------------------------------------------------------------------------
// Training configuration
// ---------------------------------------------------------------------------

struct TrainConfig {
    int batch_size = 32;
    int max_epochs = 20;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-6;
    double dropout_rate = 0.5;  // consumed by the architecture builders
    int patience = 0;           // negative disables validation-based stopping
    double val_fraction = 0.05;
    std::uint64_t seed = 0;

    AdamConfig adam() const { return {lr, beta1, beta2, eps}; }
};

// ---------------------------------------------------------------------------
// Runtime network
// ---------------------------------------------------------------------------

/// View over one trainable parameter array and its gradient buffer.
struct ParamBlock {
    std::string name;
    std::vector<double>* values = nullptr;
    std::vector<double>* grads = nullptr;
    bool decay = false;  // weight decay applies to weights only
};

class Layer;

/// A materialized NetworkSpec: parameter storage, layer caches and batch-norm
/// state. Confined to one worker during training; inference is read-only with
/// respect to parameters.
class Network {
public:
    explicit Network(NetworkSpec spec);
    Network(Network&&) noexcept;
    Network& operator=(Network&&) noexcept;
    ~Network();

    const NetworkSpec& spec() const { return spec_; }

    /// Glorot-uniform initialization of weights; biases start at zero.
    void init_params(std::uint64_t seed);

    /// Runs the stack and returns logits (N, 1, C). Train mode caches what the
    /// backward pass needs; `dropout_rng` is required when the spec contains
    /// dropout and mode is train.
    Tensor3 forward(const Tensor3& input, Mode mode, Rng* dropout_rng = nullptr);

    /// Backpropagates d(loss)/d(logits) from the last train-mode forward and
    /// fills every block's gradient buffer.
    void backward(const Tensor3& grad_logits);

    std::vector<ParamBlock>& blocks() { return blocks_; }
    long long allocated_param_count() const;

    struct Snapshot {
        std::vector<std::vector<double>> block_values;
        std::vector<BatchNormState> bn_states;
    };
    Snapshot snapshot() const;
    void restore(const Snapshot& snap);

    /// Batch-norm states in layer order (serialization and tests).
    std::vector<BatchNormState*> batchnorm_states();

private:
    NetworkSpec spec_;
    std::vector<std::unique_ptr<Layer>> layers_;
    std::vector<ParamBlock> blocks_;
};

// ---------------------------------------------------------------------------
// Training and inference
// ---------------------------------------------------------------------------

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    std::vector<double> val_accuracy;
    std::vector<double> seconds;
    int best_epoch = -1;  // epoch whose parameters were kept, -1 when untracked

    std::size_t epochs() const { return train_loss.size(); }
};

struct TrainResult {
    Network network;
    TrainHistory history;
};

/// Converts a fully valid dataset into the engine input layout, plus labels.
Tensor3 to_tensor(const Dataset& dataset);
std::vector<int> to_labels(const Dataset& dataset);

/// Mini-batch Adam over the averaged cross-entropy, with per-epoch seeded
/// shuffling, L2 weight decay on weights, and patience-based early stopping
/// on the validation loss (restoring the best parameters). Training and
/// validation sets must be polygon-disjoint.
TrainResult train(const NetworkSpec& spec, const Dataset& train_ds, const Dataset& val_ds,
                  const TrainConfig& config);

/// Inference-mode class probabilities, (N, 1, C). Evaluated in fixed-size
/// chunks; results are independent of the chunking.
Tensor3 predict_proba(Network& network, const Tensor3& inputs, int chunk = 256);
/// Argmax of predict_proba with ties broken toward the lowest class index.
std::vector<int> predict(Network& network, const Tensor3& inputs, int chunk = 256);
std::vector<int> predict(Network& network, const Dataset& dataset, int chunk = 256);

/// Mean cross-entropy and accuracy of a network on a labeled tensor.
struct EvalStats {
    double loss = 0.0;
    double accuracy = 0.0;
};
EvalStats evaluate(Network& network, const Tensor3& inputs, std::span<const int> labels,
                   int chunk = 256);

/// Max relative error between analytic gradients and central finite
/// differences of the batch loss, over every trainable scalar. Dropout masks
/// are frozen per evaluation so the loss is a deterministic function.
double gradient_check(const NetworkSpec& spec, const Tensor3& batch, std::span<const int> labels,
                      double step, std::uint64_t seed = 42);

} // namespace sits
