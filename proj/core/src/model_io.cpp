#include "sits/model_io.hpp"

#include "sits/errors.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace sits {

namespace {

constexpr char kMagic[8] = {'S', 'I', 'T', 'S', 'M', 'D', 'L', '1'};
constexpr std::uint32_t kVersion = 1;

void put_bytes(std::ostream& out, const void* data, std::size_t size) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
}

template <typename T>
void put(std::ostream& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    put_bytes(out, &value, sizeof(T));
}

void put_string(std::ostream& out, const std::string& s) {
    put<std::uint64_t>(out, s.size());
    put_bytes(out, s.data(), s.size());
}

void put_doubles(std::ostream& out, const std::vector<double>& v) {
    put<std::uint64_t>(out, v.size());
    put_bytes(out, v.data(), v.size() * sizeof(double));
}

void put_ints(std::ostream& out, const std::vector<int>& v) {
    put<std::uint64_t>(out, v.size());
    for (const int x : v) put<std::int32_t>(out, x);
}

void get_bytes(std::istream& in, void* data, std::size_t size) {
    in.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
    if (!in) throw DataError("model file truncated");
}

template <typename T>
T get(std::istream& in) {
    T value;
    get_bytes(in, &value, sizeof(T));
    return value;
}

std::string get_string(std::istream& in) {
    const auto size = get<std::uint64_t>(in);
    if (size > (1u << 20)) throw DataError("model file holds an implausible string length");
    std::string s(size, '\0');
    get_bytes(in, s.data(), size);
    return s;
}

std::vector<double> get_doubles(std::istream& in) {
    const auto size = get<std::uint64_t>(in);
    std::vector<double> v(size);
    get_bytes(in, v.data(), size * sizeof(double));
    return v;
}

std::vector<int> get_ints(std::istream& in) {
    const auto size = get<std::uint64_t>(in);
    std::vector<int> v(size);
    for (auto& x : v) x = get<std::int32_t>(in);
    return v;
}

// Layer descriptor tags.
enum : std::uint8_t {
    kConv = 1,
    kBatchNorm = 2,
    kRelu = 3,
    kDropout = 4,
    kPool = 5,
    kGlobalAvgPool = 6,
    kFlatten = 7,
    kDense = 8,
    kSoftmax = 9,
};

void put_spec(std::ostream& out, const NetworkSpec& spec) {
    put<std::int32_t>(out, spec.input_time);
    put<std::int32_t>(out, spec.input_channels);
    put<std::uint64_t>(out, spec.layers.size());
    for (const auto& desc : spec.layers) {
        if (const auto* conv = std::get_if<ConvDesc>(&desc)) {
            put<std::uint8_t>(out, kConv);
            put<std::int32_t>(out, conv->filter_len);
            put<std::int32_t>(out, conv->units);
            put<std::uint8_t>(out, conv->kind == ConvKind::temporal_shared ? 1 : 0);
        } else if (std::holds_alternative<BatchNormDesc>(desc)) {
            put<std::uint8_t>(out, kBatchNorm);
        } else if (std::holds_alternative<ReluDesc>(desc)) {
            put<std::uint8_t>(out, kRelu);
        } else if (const auto* drop = std::get_if<DropoutDesc>(&desc)) {
            put<std::uint8_t>(out, kDropout);
            put<double>(out, drop->rate);
        } else if (const auto* pool = std::get_if<PoolDesc>(&desc)) {
            put<std::uint8_t>(out, kPool);
            put<std::uint8_t>(out, pool->kind == PoolKind::max ? 0 : 1);
            put<std::int32_t>(out, pool->k);
        } else if (std::holds_alternative<GlobalAvgPoolDesc>(desc)) {
            put<std::uint8_t>(out, kGlobalAvgPool);
        } else if (std::holds_alternative<FlattenDesc>(desc)) {
            put<std::uint8_t>(out, kFlatten);
        } else if (const auto* dense = std::get_if<DenseDesc>(&desc)) {
            put<std::uint8_t>(out, kDense);
            put<std::int32_t>(out, dense->units);
        } else if (const auto* sm = std::get_if<SoftmaxDesc>(&desc)) {
            put<std::uint8_t>(out, kSoftmax);
            put<std::int32_t>(out, sm->classes);
        }
    }
}

NetworkSpec get_spec(std::istream& in) {
    NetworkSpec spec;
    spec.input_time = get<std::int32_t>(in);
    spec.input_channels = get<std::int32_t>(in);
    const auto count = get<std::uint64_t>(in);
    for (std::uint64_t i = 0; i < count; ++i) {
        switch (get<std::uint8_t>(in)) {
            case kConv: {
                ConvDesc conv;
                conv.filter_len = get<std::int32_t>(in);
                conv.units = get<std::int32_t>(in);
                conv.kind = get<std::uint8_t>(in) ? ConvKind::temporal_shared : ConvKind::full;
                spec.layers.push_back(conv);
                break;
            }
            case kBatchNorm: spec.layers.push_back(BatchNormDesc{}); break;
            case kRelu: spec.layers.push_back(ReluDesc{}); break;
            case kDropout: spec.layers.push_back(DropoutDesc{get<double>(in)}); break;
            case kPool: {
                PoolDesc pool;
                pool.kind = get<std::uint8_t>(in) ? PoolKind::avg : PoolKind::max;
                pool.k = get<std::int32_t>(in);
                spec.layers.push_back(pool);
                break;
            }
            case kGlobalAvgPool: spec.layers.push_back(GlobalAvgPoolDesc{}); break;
            case kFlatten: spec.layers.push_back(FlattenDesc{}); break;
            case kDense: spec.layers.push_back(DenseDesc{get<std::int32_t>(in)}); break;
            case kSoftmax: spec.layers.push_back(SoftmaxDesc{get<std::int32_t>(in)}); break;
            default: throw DataError("model file holds an unknown layer tag");
        }
    }
    return spec;
}

} // namespace

void save_model(TrainedModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write model file: " + path);

    put_bytes(out, kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kVersion);

    put_spec(out, model.network.spec());

    model.legend.check();
    put<std::uint64_t>(out, model.legend.names.size());
    for (int c = 0; c < model.legend.size(); ++c) {
        put_string(out, model.legend.names[c]);
        put_bytes(out, model.legend.colors[c].data(), 3);
    }

    put<std::uint8_t>(out, static_cast<std::uint8_t>(model.strategy));
    put_ints(out, model.target_calendar.days);
    put_doubles(out, model.normalization.low);
    put_doubles(out, model.normalization.high);

    const auto& blocks = model.network.blocks();
    put<std::uint64_t>(out, blocks.size());
    for (const auto& block : blocks) {
        put_string(out, block.name);
        put_doubles(out, *block.values);
    }

    const auto bn_states = model.network.batchnorm_states();
    put<std::uint64_t>(out, bn_states.size());
    for (const BatchNormState* s : bn_states) {
        put_doubles(out, s->running_mean);
        put_doubles(out, s->running_var);
        put<double>(out, s->momentum);
        put<double>(out, s->epsilon);
        put<std::int64_t>(out, s->batches_seen);
    }
    if (!out) throw DataError("failed writing model file: " + path);
}

TrainedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file: " + path);

    char magic[8];
    get_bytes(in, magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw DataError(path + " is not a model file");
    }
    if (get<std::uint32_t>(in) != kVersion) {
        throw DataError(path + " has an unsupported model version");
    }

    TrainedModel model{Network(get_spec(in))};

    const auto num_classes = get<std::uint64_t>(in);
    for (std::uint64_t c = 0; c < num_classes; ++c) {
        model.legend.names.push_back(get_string(in));
        std::array<std::uint8_t, 3> color{};
        get_bytes(in, color.data(), 3);
        model.legend.colors.push_back(color);
    }

    model.strategy = static_cast<FeatureStrategy>(get<std::uint8_t>(in));
    model.target_calendar = AcquisitionCalendar::irregular(get_ints(in));
    model.normalization.low = get_doubles(in);
    model.normalization.high = get_doubles(in);

    const auto block_count = get<std::uint64_t>(in);
    auto& blocks = model.network.blocks();
    if (block_count != blocks.size()) {
        throw DataError(path + " parameter blocks do not match the stored architecture");
    }
    for (auto& block : blocks) {
        const std::string name = get_string(in);
        if (name != block.name) {
            throw DataError(path + " block '" + name + "' arrived out of order (expected '" +
                            block.name + "')");
        }
        std::vector<double> values = get_doubles(in);
        if (values.size() != block.values->size()) {
            throw DataError(path + " block '" + name + "' has the wrong size");
        }
        *block.values = std::move(values);
    }

    const auto bn_count = get<std::uint64_t>(in);
    auto bn_states = model.network.batchnorm_states();
    if (bn_count != bn_states.size()) {
        throw DataError(path + " batch-norm states do not match the stored architecture");
    }
    for (BatchNormState* s : bn_states) {
        s->running_mean = get_doubles(in);
        s->running_var = get_doubles(in);
        s->momentum = get<double>(in);
        s->epsilon = get<double>(in);
        s->batches_seen = get<std::int64_t>(in);
    }
    return model;
}

} // namespace sits
