#include "randpost/stream.hpp"

#include <cmath>
#include <stdexcept>

namespace randpost {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t Label::digest() const
{
    if (const auto* s = std::get_if<std::string>(&value_)) {
        // FNV-1a, then tagged so that "3" and 3 never collide
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char c : *s) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        return splitmix64(h ^ 0x5354524eULL);
    }
    return splitmix64(std::get<std::uint64_t>(value_) ^ 0x494e4458ULL);
}

double Stream::normal()
{
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double x, y, s;
    do {
        x = 2.0 * uniform() - 1.0;
        y = 2.0 * uniform() - 1.0;
        s = x * x + y * y;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = y * f;
    has_spare_ = true;
    return x * f;
}

std::uint64_t derive_key(std::uint64_t master_seed, std::span<const Label> labels)
{
    if (labels.empty()) {
        throw std::invalid_argument("derive_stream: label path must be nonempty");
    }
    std::uint64_t h = splitmix64(master_seed);
    for (const auto& label : labels) {
        h = splitmix64(h ^ label.digest());
    }
    return h;
}

Stream derive_stream(std::uint64_t master_seed, std::span<const Label> labels)
{
    return Stream(derive_key(master_seed, labels));
}

Stream derive_stream(std::uint64_t master_seed, std::initializer_list<Label> labels)
{
    return derive_stream(master_seed, std::span<const Label>(labels.begin(), labels.size()));
}

}  // namespace randpost
