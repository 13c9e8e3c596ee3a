#include "rspn/common.hpp"

#include <cstdlib>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace rspn {

std::string_view to_string(ColumnKind kind) noexcept
{
    return kind == ColumnKind::Categorical ? "categorical" : "continuous";
}

ColumnKind column_kind_from_string(std::string_view text)
{
    if (text == "categorical") return ColumnKind::Categorical;
    if (text == "continuous") return ColumnKind::Continuous;
    throw InputError("unknown column kind '" + std::string(text) + "' (expected categorical or continuous)");
}

void init_logging()
{
    static bool initialized = false;
    if (initialized) return;
    initialized = true;

    auto logger = spdlog::stderr_color_mt("rspn");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    spdlog::set_level(spdlog::level::warn);
    if (const char *level = std::getenv("RSPN_LOG"))
        spdlog::set_level(spdlog::level::from_str(level));
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) noexcept
{
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept
{
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}
