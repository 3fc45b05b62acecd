#include "sits/tensor.hpp"

#include "sits/errors.hpp"

#include <cmath>
#include <string>

namespace sits {

void Tensor3::check_finite(const char* where) const {
    for (const double v : data) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string(where) + " produced a non-finite value");
        }
    }
}

} // namespace sits
