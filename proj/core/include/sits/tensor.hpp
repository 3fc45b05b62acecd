#pragma once

#include <cstddef>
#include <vector>

namespace sits {

/// Dense batch-major activation tensor: batch N x time T x channels D,
/// stored row-major as data[((b * T) + t) * D + d]. A flattened activation
/// keeps T = 1 with all features in the channel axis.
struct Tensor3 {
    int batch = 0;
    int time = 0;
    int channels = 0;
    std::vector<double> data;

    Tensor3() = default;
    Tensor3(int n, int t, int d)
        : batch(n), time(t), channels(d),
          data(static_cast<std::size_t>(n) * t * d, 0.0) {}

    double operator()(int b, int t, int d) const {
        return data[(static_cast<std::size_t>(b) * time + t) * channels + d];
    }
    double& operator()(int b, int t, int d) {
        return data[(static_cast<std::size_t>(b) * time + t) * channels + d];
    }

    std::size_t size() const { return data.size(); }
    long long rows() const { return static_cast<long long>(batch) * time; }

    bool same_shape(const Tensor3& other) const {
        return batch == other.batch && time == other.time && channels == other.channels;
    }

    /// Throws NumericError if any entry is not finite. `where` names the
    /// producing operation for the message.
    void check_finite(const char* where) const;
};

} // namespace sits
