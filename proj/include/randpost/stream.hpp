#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace randpost {

// One component of a stream path: either a name or an integer index.
class Label {
public:
    Label(std::string_view name) : value_(std::string(name)) {}
    Label(const char* name) : value_(std::string(name)) {}
    Label(const std::string& name) : value_(name) {}
    Label(std::uint64_t index) : value_(index) {}
    Label(std::int64_t index) : value_(static_cast<std::uint64_t>(index)) {}
    Label(int index) : value_(static_cast<std::uint64_t>(static_cast<std::int64_t>(index))) {}

    std::uint64_t digest() const;

private:
    std::variant<std::string, std::uint64_t> value_;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Deterministic random stream.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. Conversions to uniform and normal variates are done here rather
/// than through <random> distributions, whose algorithms are left to the
/// library vendor and so differ across platforms.
class Stream {
public:
    explicit Stream(std::uint64_t key) : key_(key), engine_(key) {}

    std::uint64_t key() const { return key_; }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via the Marsaglia polar method.
    double normal();

private:
    std::uint64_t key_;
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Maps (master_seed, label path) to an independent stream. The mapping is a
/// chain of SplitMix64 finalizers over the label digests, so it depends only
/// on the values involved and never on call order or thread schedule.
Stream derive_stream(std::uint64_t master_seed, std::span<const Label> labels);
Stream derive_stream(std::uint64_t master_seed, std::initializer_list<Label> labels);

std::uint64_t derive_key(std::uint64_t master_seed, std::span<const Label> labels);

}  // namespace randpost
