#include "sits/network.hpp"

#include "sits/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace sits {

namespace {

struct Shape {
    int time = 0;
    int channels = 0;
};

Shape apply_desc(const LayerDesc& desc, Shape s, std::size_t index) {
    auto fail = [index](const std::string& msg) {
        throw DataError("layer " + std::to_string(index) + ": " + msg);
    };
    if (const auto* conv = std::get_if<ConvDesc>(&desc)) {
        if (conv->filter_len < 1 || conv->units < 1) fail("conv needs positive filter and units");
        return {s.time, conv->units};
    }
    if (std::holds_alternative<BatchNormDesc>(desc) || std::holds_alternative<ReluDesc>(desc)) {
        return s;
    }
    if (const auto* drop = std::get_if<DropoutDesc>(&desc)) {
        if (drop->rate < 0.0 || drop->rate >= 1.0) fail("dropout rate outside [0, 1)");
        return s;
    }
    if (const auto* pool = std::get_if<PoolDesc>(&desc)) {
        if (pool->k < 1) fail("pool window must be >= 1");
        if (s.time / pool->k < 1) fail("pool window exceeds the time length");
        return {s.time / pool->k, s.channels};
    }
    if (std::holds_alternative<GlobalAvgPoolDesc>(desc)) {
        return {1, s.channels};
    }
    if (std::holds_alternative<FlattenDesc>(desc)) {
        return {1, s.time * s.channels};
    }
    if (const auto* dense = std::get_if<DenseDesc>(&desc)) {
        if (s.time != 1) fail("dense requires a flattened activation (time length 1)");
        if (dense->units < 1) fail("dense needs positive units");
        return {1, dense->units};
    }
    if (const auto* softmax = std::get_if<SoftmaxDesc>(&desc)) {
        if (s.time != 1) fail("softmax requires a flattened activation (time length 1)");
        if (softmax->classes < 2) fail("softmax needs at least 2 classes");
        return {1, softmax->classes};
    }
    fail("unknown layer descriptor");
    return {};
}

} // namespace

void NetworkSpec::validate() const {
    if (input_time < 1 || input_channels < 1) {
        throw DataError("network input shape must be positive, got " + std::to_string(input_time) +
                        "x" + std::to_string(input_channels));
    }
    if (layers.empty() || !std::holds_alternative<SoftmaxDesc>(layers.back())) {
        throw DataError("network must end with a softmax layer");
    }
    for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
        if (std::holds_alternative<SoftmaxDesc>(layers[i])) {
            throw DataError("softmax must be the final layer");
        }
    }
    Shape s{input_time, input_channels};
    for (std::size_t i = 0; i < layers.size(); ++i) s = apply_desc(layers[i], s, i);
}

int NetworkSpec::num_classes() const {
    if (layers.empty()) return 0;
    if (const auto* sm = std::get_if<SoftmaxDesc>(&layers.back())) return sm->classes;
    return 0;
}

long long param_count(const NetworkSpec& spec) {
    Shape s{spec.input_time, spec.input_channels};
    long long count = 0;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerDesc& desc = spec.layers[i];
        if (const auto* conv = std::get_if<ConvDesc>(&desc)) {
            if (conv->kind == ConvKind::temporal_shared) {
                count += static_cast<long long>(conv->filter_len) * conv->units + conv->units;
            } else {
                count += static_cast<long long>(conv->filter_len) * s.channels * conv->units +
                         conv->units;
            }
        } else if (std::holds_alternative<BatchNormDesc>(desc)) {
            count += 2LL * s.channels;
        } else if (const auto* dense = std::get_if<DenseDesc>(&desc)) {
            count += static_cast<long long>(s.channels) * dense->units + dense->units;
        } else if (const auto* sm = std::get_if<SoftmaxDesc>(&desc)) {
            count += static_cast<long long>(s.channels) * sm->classes + sm->classes;
        }
        s = apply_desc(desc, s, i);
    }
    return count;
}

// ---------------------------------------------------------------------------
// Layer implementations
// ---------------------------------------------------------------------------

class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor3 forward(const Tensor3& x, Mode mode, Rng* rng) = 0;
    virtual Tensor3 backward(const Tensor3& grad_out) = 0;
    virtual void collect(std::vector<ParamBlock>& blocks) { (void)blocks; }
    virtual void init(Rng& rng) { (void)rng; }
    virtual BatchNormState* bn_state() { return nullptr; }
};

namespace {

double glorot_limit(long long fan_in, long long fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

void fill_uniform(std::vector<double>& w, Rng& rng, double limit) {
    for (double& v : w) v = rng.uniform(-limit, limit);
}

class ConvLayer final : public Layer {
public:
    ConvLayer(const ConvDesc& desc, int in_channels, std::string name)
        : params_(ConvLayerParams::create(desc.filter_len, in_channels, desc.units, desc.kind)),
          name_(std::move(name)) {
        grad_w_.assign(params_.weights.size(), 0.0);
        grad_b_.assign(params_.bias.size(), 0.0);
    }

    Tensor3 forward(const Tensor3& x, Mode mode, Rng*) override {
        if (mode == Mode::train) input_ = x;
        return conv1d_forward(x, params_);
    }

    Tensor3 backward(const Tensor3& grad_out) override {
        ConvGrads g = conv1d_backward(input_, params_, grad_out);
        grad_w_ = std::move(g.weights);
        grad_b_ = std::move(g.bias);
        return std::move(g.input);
    }

    void collect(std::vector<ParamBlock>& blocks) override {
        blocks.push_back({name_ + ".weights", &params_.weights, &grad_w_, true});
        blocks.push_back({name_ + ".bias", &params_.bias, &grad_b_, false});
    }

    void init(Rng& rng) override {
        const long long f = params_.filter_len;
        const long long fan_in = f * params_.in_channels;
        const long long fan_out = f * params_.units;
        fill_uniform(params_.weights, rng, glorot_limit(fan_in, fan_out));
        std::fill(params_.bias.begin(), params_.bias.end(), 0.0);
    }

private:
    ConvLayerParams params_;
    std::vector<double> grad_w_, grad_b_;
    Tensor3 input_;
    std::string name_;
};

class DenseLayer final : public Layer {
public:
    DenseLayer(int in, int out, std::string name)
        : params_(DenseLayerParams::create(in, out)), name_(std::move(name)) {
        grad_w_.assign(params_.weights.size(), 0.0);
        grad_b_.assign(params_.bias.size(), 0.0);
    }

    Tensor3 forward(const Tensor3& x, Mode mode, Rng*) override {
        if (mode == Mode::train) input_ = x;
        return dense_forward(x, params_);
    }

    Tensor3 backward(const Tensor3& grad_out) override {
        DenseGrads g = dense_backward(input_, params_, grad_out);
        grad_w_ = std::move(g.weights);
        grad_b_ = std::move(g.bias);
        return std::move(g.input);
    }

    void collect(std::vector<ParamBlock>& blocks) override {
        blocks.push_back({name_ + ".weights", &params_.weights, &grad_w_, true});
        blocks.push_back({name_ + ".bias", &params_.bias, &grad_b_, false});
    }

    void init(Rng& rng) override {
        fill_uniform(params_.weights, rng, glorot_limit(params_.in, params_.out));
        std::fill(params_.bias.begin(), params_.bias.end(), 0.0);
    }

private:
    DenseLayerParams params_;
    std::vector<double> grad_w_, grad_b_;
    Tensor3 input_;
    std::string name_;
};

class ReluLayer final : public Layer {
public:
    Tensor3 forward(const Tensor3& x, Mode mode, Rng*) override {
        if (mode == Mode::train) input_ = x;
        return relu_forward(x);
    }
    Tensor3 backward(const Tensor3& grad_out) override { return relu_backward(input_, grad_out); }

private:
    Tensor3 input_;
};

class DropoutLayer final : public Layer {
public:
    explicit DropoutLayer(double rate) : rate_(rate) {}

    Tensor3 forward(const Tensor3& x, Mode mode, Rng* rng) override {
        if (mode == Mode::infer || rate_ == 0.0) {
            return x;
        }
        if (!rng) throw std::invalid_argument("dropout in train mode needs a random source");
        return dropout_forward(x, rate_, mode, *rng, &mask_);
    }

    Tensor3 backward(const Tensor3& grad_out) override {
        if (rate_ == 0.0) return grad_out;
        return dropout_backward(grad_out, mask_);
    }

private:
    double rate_;
    std::vector<double> mask_;
};

class BatchNormLayer final : public Layer {
public:
    BatchNormLayer(int channels, std::string name)
        : state_(BatchNormState::create(channels)), name_(std::move(name)) {
        grad_gamma_.assign(channels, 0.0);
        grad_beta_.assign(channels, 0.0);
    }

    Tensor3 forward(const Tensor3& x, Mode mode, Rng*) override {
        return batchnorm_forward(x, state_, mode, mode == Mode::train ? &cache_ : nullptr);
    }

    Tensor3 backward(const Tensor3& grad_out) override {
        BatchNormGrads g = batchnorm_backward(grad_out, state_, cache_);
        grad_gamma_ = std::move(g.gamma);
        grad_beta_ = std::move(g.beta);
        return std::move(g.input);
    }

    void collect(std::vector<ParamBlock>& blocks) override {
        blocks.push_back({name_ + ".gamma", &state_.gamma, &grad_gamma_, false});
        blocks.push_back({name_ + ".beta", &state_.beta, &grad_beta_, false});
    }

    BatchNormState* bn_state() override { return &state_; }

private:
    BatchNormState state_;
    BatchNormCache cache_;
    std::vector<double> grad_gamma_, grad_beta_;
    std::string name_;
};

class PoolLayer final : public Layer {
public:
    PoolLayer(PoolKind kind, int k) : kind_(kind), k_(k) {}

    Tensor3 forward(const Tensor3& x, Mode mode, Rng*) override {
        batch_ = x.batch;
        channels_ = x.channels;
        return pool_forward(x, kind_, k_, mode == Mode::train ? &cache_ : nullptr);
    }

    Tensor3 backward(const Tensor3& grad_out) override {
        return pool_backward(grad_out, cache_, batch_, channels_);
    }

private:
    PoolKind kind_;
    int k_;
    PoolCache cache_;
    int batch_ = 0, channels_ = 0;
};

class GlobalAvgPoolLayer final : public Layer {
public:
    Tensor3 forward(const Tensor3& x, Mode, Rng*) override {
        in_time_ = x.time;
        return global_avg_pool(x);
    }
    Tensor3 backward(const Tensor3& grad_out) override {
        return global_avg_pool_backward(grad_out, in_time_);
    }

private:
    int in_time_ = 0;
};

class FlattenLayer final : public Layer {
public:
    Tensor3 forward(const Tensor3& x, Mode, Rng*) override {
        in_time_ = x.time;
        in_channels_ = x.channels;
        Tensor3 out = x;
        out.time = 1;
        out.channels = x.time * x.channels;
        return out;
    }
    Tensor3 backward(const Tensor3& grad_out) override {
        Tensor3 grad = grad_out;
        grad.time = in_time_;
        grad.channels = in_channels_;
        return grad;
    }

private:
    int in_time_ = 0, in_channels_ = 0;
};

} // namespace

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

Network::Network(NetworkSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    Shape s{spec_.input_time, spec_.input_channels};
    int conv_no = 0, dense_no = 0, bn_no = 0;
    for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
        const LayerDesc& desc = spec_.layers[i];
        if (const auto* conv = std::get_if<ConvDesc>(&desc)) {
            layers_.push_back(
                std::make_unique<ConvLayer>(*conv, s.channels, "conv" + std::to_string(conv_no++)));
        } else if (std::holds_alternative<BatchNormDesc>(desc)) {
            layers_.push_back(
                std::make_unique<BatchNormLayer>(s.channels, "bn" + std::to_string(bn_no++)));
        } else if (std::holds_alternative<ReluDesc>(desc)) {
            layers_.push_back(std::make_unique<ReluLayer>());
        } else if (const auto* drop = std::get_if<DropoutDesc>(&desc)) {
            layers_.push_back(std::make_unique<DropoutLayer>(drop->rate));
        } else if (const auto* pool = std::get_if<PoolDesc>(&desc)) {
            layers_.push_back(std::make_unique<PoolLayer>(pool->kind, pool->k));
        } else if (std::holds_alternative<GlobalAvgPoolDesc>(desc)) {
            layers_.push_back(std::make_unique<GlobalAvgPoolLayer>());
        } else if (std::holds_alternative<FlattenDesc>(desc)) {
            layers_.push_back(std::make_unique<FlattenLayer>());
        } else if (const auto* dense = std::get_if<DenseDesc>(&desc)) {
            layers_.push_back(
                std::make_unique<DenseLayer>(s.channels, dense->units, "dense" + std::to_string(dense_no++)));
        } else if (const auto* sm = std::get_if<SoftmaxDesc>(&desc)) {
            layers_.push_back(std::make_unique<DenseLayer>(s.channels, sm->classes, "logits"));
        }
        s = apply_desc(desc, s, i);
    }
    for (auto& layer : layers_) layer->collect(blocks_);
}

Network::Network(Network&&) noexcept = default;
Network& Network::operator=(Network&&) noexcept = default;
Network::~Network() = default;

void Network::init_params(std::uint64_t seed) {
    Rng rng(seed);
    for (auto& layer : layers_) layer->init(rng);
}

Tensor3 Network::forward(const Tensor3& input, Mode mode, Rng* dropout_rng) {
    if (input.time != spec_.input_time || input.channels != spec_.input_channels) {
        throw DataError("network input is " + std::to_string(input.time) + "x" +
                        std::to_string(input.channels) + ", spec expects " +
                        std::to_string(spec_.input_time) + "x" + std::to_string(spec_.input_channels));
    }
    Tensor3 x = input;
    for (auto& layer : layers_) x = layer->forward(x, mode, dropout_rng);
    return x;
}

void Network::backward(const Tensor3& grad_logits) {
    Tensor3 g = grad_logits;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
}

long long Network::allocated_param_count() const {
    long long count = 0;
    for (const auto& b : blocks_) count += static_cast<long long>(b.values->size());
    return count;
}

Network::Snapshot Network::snapshot() const {
    Snapshot snap;
    for (const auto& b : blocks_) snap.block_values.push_back(*b.values);
    for (const auto& layer : layers_) {
        if (const BatchNormState* s = const_cast<Layer&>(*layer).bn_state()) {
            snap.bn_states.push_back(*s);
        }
    }
    return snap;
}

void Network::restore(const Snapshot& snap) {
    if (snap.block_values.size() != blocks_.size()) {
        throw std::invalid_argument("snapshot does not match network layout");
    }
    for (std::size_t i = 0; i < blocks_.size(); ++i) *blocks_[i].values = snap.block_values[i];
    std::size_t bi = 0;
    for (auto& layer : layers_) {
        if (BatchNormState* s = layer->bn_state()) *s = snap.bn_states.at(bi++);
    }
}

std::vector<BatchNormState*> Network::batchnorm_states() {
    std::vector<BatchNormState*> states;
    for (auto& layer : layers_) {
        if (BatchNormState* s = layer->bn_state()) states.push_back(s);
    }
    return states;
}

// ---------------------------------------------------------------------------
// Dataset adapters
// ---------------------------------------------------------------------------

Tensor3 to_tensor(const Dataset& dataset) {
    if (dataset.samples.empty()) throw DataError("cannot build a tensor from an empty dataset");
    const int T = dataset.time_len();
    const int D = dataset.channels();
    Tensor3 x(dataset.size(), T, D);
    for (int i = 0; i < dataset.size(); ++i) {
        const auto& s = dataset.samples[i].series;
        if (!s.fully_valid()) {
            throw DataError("sample " + std::to_string(i) + " has invalid entries; gap-fill first");
        }
        std::memcpy(x.data.data() + static_cast<std::size_t>(i) * T * D, s.values.data(),
                    sizeof(double) * static_cast<std::size_t>(T) * D);
    }
    return x;
}

std::vector<int> to_labels(const Dataset& dataset) {
    std::vector<int> y(dataset.size());
    for (int i = 0; i < dataset.size(); ++i) y[i] = dataset.samples[i].label;
    return y;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

namespace {

Tensor3 gather_batch(const Tensor3& x, std::span<const int> idx) {
    Tensor3 out(static_cast<int>(idx.size()), x.time, x.channels);
    const std::size_t row = static_cast<std::size_t>(x.time) * x.channels;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        std::memcpy(out.data.data() + i * row, x.data.data() + static_cast<std::size_t>(idx[i]) * row,
                    sizeof(double) * row);
    }
    return out;
}

} // namespace

TrainResult train(const NetworkSpec& spec, const Dataset& train_ds, const Dataset& val_ds,
                  const TrainConfig& config) {
    spec.validate();
    if (train_ds.samples.empty()) throw DataError("training set is empty");
    const bool early_stopping = config.patience >= 0;
    if (early_stopping && val_ds.samples.empty()) {
        throw DataError("validation set is empty but patience-based early stopping is enabled");
    }
    if (!val_ds.samples.empty()) {
        const auto train_polys = train_ds.polygon_ids();
        for (const auto& p : val_ds.polygon_ids()) {
            if (train_polys.count(p)) {
                throw DataError("validation polygon '" + p + "' also appears in the training set");
            }
        }
    }

    const Tensor3 x_train = to_tensor(train_ds);
    const std::vector<int> y_train = to_labels(train_ds);
    Tensor3 x_val;
    std::vector<int> y_val;
    if (!val_ds.samples.empty()) {
        x_val = to_tensor(val_ds);
        y_val = to_labels(val_ds);
    }

    TrainResult result{Network(spec), {}};
    Network& net = result.network;
    net.init_params(derive_seed(config.seed, "init"));

    std::vector<AdamState> adam;
    for (const auto& b : net.blocks()) adam.push_back(AdamState::create(b.values->size()));
    const AdamConfig adam_config = config.adam();

    const int n = x_train.batch;
    const int batch_size = std::max(1, config.batch_size);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

    double best_val = std::numeric_limits<double>::infinity();
    Network::Snapshot best_snapshot;
    bool have_snapshot = false;
    int epochs_without_improvement = 0;

    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        Rng shuffle_rng(derive_seed(config.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);
        Rng dropout_rng(derive_seed(config.seed, "dropout", static_cast<std::uint64_t>(epoch)));

        double loss_sum = 0.0;
        for (int start = 0; start < n; start += batch_size) {
            const int count = std::min(batch_size, n - start);
            const std::span<const int> idx(order.data() + start, static_cast<std::size_t>(count));
            const Tensor3 xb = gather_batch(x_train, idx);
            std::vector<int> yb(count);
            for (int i = 0; i < count; ++i) yb[i] = y_train[idx[i]];

            const Tensor3 logits = net.forward(xb, Mode::train, &dropout_rng);
            SoftmaxResult sm = softmax_cross_entropy(logits, yb);
            loss_sum += sm.mean_loss * count;

            Tensor3 grad = std::move(sm.grad_logits);
            const double inv_count = 1.0 / count;
            for (double& g : grad.data) g *= inv_count;
            net.backward(grad);

            for (std::size_t bi = 0; bi < net.blocks().size(); ++bi) {
                ParamBlock& block = net.blocks()[bi];
                if (block.decay && config.weight_decay > 0.0) {
                    const auto& values = *block.values;
                    auto& grads = *block.grads;
                    for (std::size_t i = 0; i < grads.size(); ++i) {
                        grads[i] += config.weight_decay * values[i];
                    }
                }
                adam_step(*block.values, *block.grads, adam[bi], adam_config);
            }
        }

        result.history.train_loss.push_back(loss_sum / n);
        double val_loss = std::numeric_limits<double>::quiet_NaN();
        double val_acc = std::numeric_limits<double>::quiet_NaN();
        if (!y_val.empty()) {
            const EvalStats stats = evaluate(net, x_val, y_val);
            val_loss = stats.loss;
            val_acc = stats.accuracy;
        }
        result.history.val_loss.push_back(val_loss);
        result.history.val_accuracy.push_back(val_acc);
        result.history.seconds.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());

        if (early_stopping) {
            if (val_loss < best_val) {
                best_val = val_loss;
                best_snapshot = net.snapshot();
                have_snapshot = true;
                result.history.best_epoch = epoch;
                epochs_without_improvement = 0;
            } else {
                ++epochs_without_improvement;
                if (epochs_without_improvement > config.patience) break;
            }
        }
    }

    if (early_stopping && have_snapshot) net.restore(best_snapshot);
    return result;
}

// ---------------------------------------------------------------------------
// Inference
// ---------------------------------------------------------------------------

namespace {

void softmax_rows_inplace(Tensor3& logits) {
    const int C = logits.channels;
    for (int b = 0; b < logits.batch; ++b) {
        double* row = logits.data.data() + static_cast<std::size_t>(b) * C;
        double max_logit = row[0];
        for (int c = 1; c < C; ++c) max_logit = std::max(max_logit, row[c]);
        double sum = 0.0;
        for (int c = 0; c < C; ++c) {
            row[c] = std::exp(row[c] - max_logit);
            sum += row[c];
        }
        for (int c = 0; c < C; ++c) row[c] /= sum;
    }
}

int argmax_row(const double* row, int n) {
    int best = 0;
    for (int c = 1; c < n; ++c) {
        if (row[c] > row[best]) best = c;
    }
    return best;
}

} // namespace

Tensor3 predict_proba(Network& network, const Tensor3& inputs, int chunk) {
    if (chunk < 1) throw std::invalid_argument("prediction chunk must be >= 1");
    const int C = network.spec().num_classes();
    Tensor3 probs(inputs.batch, 1, C);
    const std::size_t in_row = static_cast<std::size_t>(inputs.time) * inputs.channels;
    for (int start = 0; start < inputs.batch; start += chunk) {
        const int count = std::min(chunk, inputs.batch - start);
        Tensor3 xb(count, inputs.time, inputs.channels);
        std::memcpy(xb.data.data(), inputs.data.data() + static_cast<std::size_t>(start) * in_row,
                    sizeof(double) * in_row * count);
        Tensor3 logits = network.forward(xb, Mode::infer, nullptr);
        softmax_rows_inplace(logits);
        std::memcpy(probs.data.data() + static_cast<std::size_t>(start) * C, logits.data.data(),
                    sizeof(double) * static_cast<std::size_t>(count) * C);
    }
    return probs;
}

std::vector<int> predict(Network& network, const Tensor3& inputs, int chunk) {
    const Tensor3 probs = predict_proba(network, inputs, chunk);
    std::vector<int> labels(inputs.batch);
    for (int b = 0; b < inputs.batch; ++b) {
        labels[b] = argmax_row(probs.data.data() + static_cast<std::size_t>(b) * probs.channels,
                               probs.channels);
    }
    return labels;
}

std::vector<int> predict(Network& network, const Dataset& dataset, int chunk) {
    return predict(network, to_tensor(dataset), chunk);
}

EvalStats evaluate(Network& network, const Tensor3& inputs, std::span<const int> labels, int chunk) {
    if (labels.size() != static_cast<std::size_t>(inputs.batch)) {
        throw std::invalid_argument("evaluate: one label per sample required");
    }
    EvalStats stats;
    double loss_sum = 0.0;
    long long correct = 0;
    const std::size_t in_row = static_cast<std::size_t>(inputs.time) * inputs.channels;
    for (int start = 0; start < inputs.batch; start += chunk) {
        const int count = std::min(chunk, inputs.batch - start);
        Tensor3 xb(count, inputs.time, inputs.channels);
        std::memcpy(xb.data.data(), inputs.data.data() + static_cast<std::size_t>(start) * in_row,
                    sizeof(double) * in_row * count);
        const Tensor3 logits = network.forward(xb, Mode::infer, nullptr);
        const SoftmaxResult sm =
            softmax_cross_entropy(logits, labels.subspan(static_cast<std::size_t>(start),
                                                         static_cast<std::size_t>(count)));
        loss_sum += sm.mean_loss * count;
        for (int i = 0; i < count; ++i) {
            const int pred = argmax_row(
                sm.probabilities.data.data() + static_cast<std::size_t>(i) * sm.probabilities.channels,
                sm.probabilities.channels);
            if (pred == labels[start + i]) ++correct;
        }
    }
    stats.loss = loss_sum / inputs.batch;
    stats.accuracy = static_cast<double>(correct) / inputs.batch;
    return stats;
}

// ---------------------------------------------------------------------------
// Gradient verification
// ---------------------------------------------------------------------------

double gradient_check(const NetworkSpec& spec, const Tensor3& batch, std::span<const int> labels,
                      double step, std::uint64_t seed) {
    if (step <= 0.0) throw std::invalid_argument("gradient_check: step must be positive");
    spec.validate();

    Network net(spec);
    net.init_params(derive_seed(seed, "init"));

    // Dropout masks are re-seeded identically per forward, so the loss is the
    // same deterministic function for the analytic and both shifted passes.
    auto loss_at = [&]() {
        Rng rng(derive_seed(seed, "gc-dropout"));
        const Tensor3 logits = net.forward(batch, Mode::train, &rng);
        return softmax_cross_entropy(logits, labels).mean_loss;
    };

    {
        Rng rng(derive_seed(seed, "gc-dropout"));
        const Tensor3 logits = net.forward(batch, Mode::train, &rng);
        SoftmaxResult sm = softmax_cross_entropy(logits, labels);
        Tensor3 grad = std::move(sm.grad_logits);
        const double inv = 1.0 / batch.batch;
        for (double& g : grad.data) g *= inv;
        net.backward(grad);
    }

    std::vector<std::vector<double>> analytic;
    for (const auto& block : net.blocks()) analytic.push_back(*block.grads);

    double max_rel = 0.0;
    for (std::size_t bi = 0; bi < net.blocks().size(); ++bi) {
        auto& values = *net.blocks()[bi].values;
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + step;
            const double plus = loss_at();
            values[i] = saved - step;
            const double minus = loss_at();
            values[i] = saved;
            const double numeric = (plus - minus) / (2.0 * step);
            const double a = analytic[bi][i];
            const double rel = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

} // namespace sits
