#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "openinc/tensor.hpp"

namespace openinc {

enum class Split : std::uint8_t { train, test };

struct Dataset {
    Tensor inputs;  ///< N x input_dim
    std::vector<int> labels;  ///< dense ids in [0, num_classes)
    std::vector<Split> split;
    std::size_t num_classes = 0;
    /// Original label text for each dense id (identity for generated data).
    std::vector<std::string> label_names;
    /// Identifies the source: generator spec + seed, or file contents.
    std::string fingerprint;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t input_dim() const noexcept { return inputs.cols(); }

    /// Row indices with the given split whose label is in `classes`, ascending.
    std::vector<std::size_t> rows(Split which, const std::vector<int>& classes) const;
    Tensor gather(const std::vector<std::size_t>& rows) const;
    /// Throws InvalidSpec unless every class has both train and test rows.
    void require_complete_split() const;
};

/// Isotropic Gaussian blobs around centers spread uniformly on a sphere.
struct BlobSpec {
    std::size_t num_classes = 10;
    std::size_t samples_per_class = 200;
    std::size_t input_dim = 20;
    double center_radius = 10.0;
    double sigma = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
    std::string fingerprint() const;
};

Dataset generate_blobs(const BlobSpec& spec);

/// Reads "label,f0,f1,..." CSV. Labels are re-indexed densely in order of first
/// appearance; rows get a seeded, per-class stratified 80/20 train/test split.
/// Throws FileNotFound, MissingColumn, or ParseError carrying the line number.
Dataset load_csv(const std::string& path, std::uint64_t split_seed = 0);
Dataset parse_csv(const std::string& text, std::uint64_t split_seed = 0);

/// Per-class shuffle; the first floor(0.8 n) rows of each class train, the rest test
/// (at least one of each once a class has two rows).
void stratified_split(Dataset& data, std::uint64_t seed);

struct SessionPlan {
    std::vector<std::vector<int>> sessions;
    std::size_t outlier_session = 0;  ///< always the last entry of `sessions`

    std::size_t num_inlier_sessions() const noexcept { return outlier_session; }
    const std::vector<int>& outlier_classes() const { return sessions.at(outlier_session); }
    std::vector<int> inlier_classes() const;
};

/// Shuffles class ids with `seed`, splits the inliers into equal sessions and
/// places the outlier classes in a final session. Throws IndivisibleSplit.
SessionPlan plan_sessions(std::size_t num_classes, std::size_t classes_per_session, std::size_t num_outlier_classes,
                          std::uint64_t seed);

/// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace openinc
