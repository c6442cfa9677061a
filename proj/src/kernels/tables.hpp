#pragma once

#include "evstudy/kernels.hpp"

namespace evstudy::simd::detail {

extern const KernelTable scalar_table;
#if defined(EVSTUDY_HAVE_AVX2_TU)
extern const KernelTable avx2_table;
#endif
#if defined(EVSTUDY_HAVE_NEON_TU)
extern const KernelTable neon_table;
#endif

}  // namespace evstudy::simd::detail
