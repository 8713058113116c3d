#pragma once
// Reproducibility envelope written beside every file a command produces.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace chemputer::cli {

inline constexpr std::string_view kToolVersion = "0.1.0";

std::string sha256_hex(std::string_view data);

struct RunManifest {
    std::string command;
    std::vector<std::string> inputs;   // paths, hashed on write
    std::vector<std::string> outputs;  // paths, hashed on write
    std::optional<std::uint64_t> seed;
};

/// Writes `<first output>.manifest.json`. Throws std::runtime_error on I/O failure.
void write_manifest(const RunManifest& m);

}  // namespace chemputer::cli
