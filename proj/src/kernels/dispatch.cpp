#include "rspn/kernels.hpp"

#include <cstdlib>
#include <string_view>

namespace rspn::kernels {

#if defined(RSPN_BUILD_AVX2)
const KernelTable &avx2_table_unchecked() noexcept;
#endif

const KernelTable *avx2_table() noexcept
{
#if defined(RSPN_BUILD_AVX2)
    static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    return supported ? &avx2_table_unchecked() : nullptr;
#else
    return nullptr;
#endif
}

const KernelTable &active() noexcept
{
    static const KernelTable &selected = [] () -> const KernelTable & {
        if (const char *pin = std::getenv("RSPN_SIMD"); pin && std::string_view(pin) == "scalar")
            return scalar_table();
        if (const KernelTable *t = avx2_table()) return *t;
        return scalar_table();
    }();
    return selected;
}

}
