// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace synthaug {

/// Broad failure classes. Each maps onto one CLI exit code.
enum class ErrorKind {
    config,      ///< bad configuration or CLI usage (exit 2)
    data,        ///< malformed or insufficient input data (exit 3)
    transport,   ///< provider unreachable or retries exhausted (exit 4)
    credential,  ///< missing or rejected API key (exit 4)
    content,     ///< provider replied with nothing usable (exit 4)
    shortfall,   ///< augmentation produced too little output (exit 5)
    divergence,  ///< training produced a non-finite loss (exit 3)
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string &message) : std::runtime_error(message), kind_(kind) {}
    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[nodiscard]] int exit_code_for(ErrorKind kind) noexcept;
[[nodiscard]] std::string_view to_string(ErrorKind kind) noexcept;

// Deterministic randomness ---------------------------------------------------

[[nodiscard]] std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL) noexcept;
[[nodiscard]] std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Seed for a named sub-stream of the experiment seed ("split", "balance", ...).
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t seed, std::string_view name) noexcept;

/// mt19937_64 with portable bounded draws and shuffling. The standard fixes the
/// engine's output sequence but not the distributions, so those are done here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    std::uint64_t next() { return engine_(); }
    /// Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t below(std::uint64_t bound);
    /// Uniform real in [0, 1) with 53 random bits.
    double unit();
    /// Standard normal via Box-Muller.
    double normal();

    template <typename T>
    void shuffle(std::vector<T> &items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

// Hashing --------------------------------------------------------------------

[[nodiscard]] std::string sha256_hex(std::string_view bytes);
[[nodiscard]] std::string sha256_file(const std::filesystem::path &path);

// Strings --------------------------------------------------------------------

[[nodiscard]] std::string_view trim(std::string_view s) noexcept;
[[nodiscard]] std::string to_lower_ascii(std::string_view s);
[[nodiscard]] bool starts_with_icase(std::string_view s, std::string_view prefix) noexcept;
/// Number of UTF-8 code points (continuation bytes are not counted).
[[nodiscard]] std::size_t utf8_length(std::string_view s) noexcept;
[[nodiscard]] std::vector<std::string_view> split_lines(std::string_view s);

// Files ----------------------------------------------------------------------

[[nodiscard]] std::string read_file(const std::filesystem::path &path);
/// Writes through a temporary sibling then renames, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path &path, std::string_view contents);

/// Calls fn(line_number, line) for every non-blank line; line numbers are 1-based.
void for_each_jsonl_line(const std::filesystem::path &path,
                         const std::function<void(std::size_t, std::string_view)> &fn);

}  // namespace synthaug
