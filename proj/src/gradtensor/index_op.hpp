#pragma once

#include <vector>

#include "matx/gradtensor.hpp"

namespace matx::detail {

// out[i] = in[map[i]]; the backward pass scatter-adds through the same map.
Tensor index_op(const Tensor& input, Shape out_shape,
                std::vector<std::int64_t> map, const char* op);

}  // namespace matx::detail
