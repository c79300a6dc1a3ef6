#pragma once

#include <cstdint>

// The library is compiled once per scalar type. Each build lives in its own
// inline namespace so a float and a double build can share one executable.
#ifdef GLDM_REAL_DOUBLE
#define GLDM_ABI f64
#else
#define GLDM_ABI f32
#endif

namespace gldm {
inline namespace GLDM_ABI {

#ifdef GLDM_REAL_DOUBLE
using real = double;
#else
using real = float;
#endif

using index_t = std::int64_t;

}  // namespace GLDM_ABI
}  // namespace gldm
