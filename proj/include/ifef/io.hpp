#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ifef/trainer.hpp"

namespace ifef {

namespace fs = std::filesystem;

/// Writes to a sibling temporary file and renames it over `path`, so the
/// target is either the complete new content or untouched.
void write_atomic(const fs::path& path, const std::string& content);
std::string read_file(const fs::path& path);

/// Lowercase hex SHA-256.
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const fs::path& path);

/// Shortest round-trip decimal form ("nan", "inf" and "-inf" for non-finite).
std::string format_double(double v);

/// Metrics CSV, columns in this fixed order:
///   epoch,lower_loss,upper_loss,rel_l2,lambda,wall_ms
extern const char* const kMetricsHeader;
std::string metrics_csv(const std::vector<EpochMetrics>& metrics);

/// Binary checkpoint container (little-endian):
///   "IFEFCKPT" | u32 version | u32 layers
///   per layer: u32 rows | u32 cols | rows*cols f64 weight (row-major) | rows f64 bias
///   u8 has_input_map [| u32 n | n f64 center | n f64 scale]
///   u8 has_readout [| u32 n | n f64]
///   u32 n_theta | n_theta f64
///   u8 has_rff [| u64 D | u64 p | f64 sigma | u64 seed]
/// B_D is not stored; it is regenerated from (D, p, sigma, seed).
struct Checkpoint {
    NetworkParams params;
    VectorXd theta;
    struct Rff {
        std::uint64_t D = 0, p = 0;
        double sigma = 1.0;
        std::uint64_t seed = 0;
    };
    std::optional<Rff> rff;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);
void write_checkpoint(const fs::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const fs::path& path);

/// Rebuilds the feature basis a checkpoint describes.
FeatureBasis checkpoint_basis(const Checkpoint& ckpt);

/// Reference solution on scattered points: CSV with header `t,x,u`.
struct ReferenceData {
    EvalTarget target;  // points rows are (x, t)
    std::string checksum;
};
ReferenceData load_reference_csv(const fs::path& path);

}  // namespace ifef
