#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "openinc/model.hpp"
#include "openinc/tensor.hpp"

namespace openinc {

struct Exemplar {
    std::vector<double> input;
    std::vector<double> feature;
    std::size_t source_row = 0;     ///< row index in the originating dataset
    std::size_t distance_rank = 0;  ///< rank by distance to the class center at selection time
};

/// Rehearsal memory of at most `capacity` exemplars, grouped by class id.
class ExemplarStore {
public:
    explicit ExemplarStore(std::size_t capacity = 0) : capacity_(capacity) {}

    std::size_t capacity() const noexcept { return capacity_; }
    std::size_t total() const noexcept;
    std::size_t num_classes() const noexcept { return per_class_.size(); }
    bool empty() const noexcept { return per_class_.empty(); }
    bool contains(int class_id) const { return per_class_.count(class_id) != 0; }

    const std::map<int, std::vector<Exemplar>>& classes() const noexcept { return per_class_; }
    std::map<int, std::vector<Exemplar>>& classes() noexcept { return per_class_; }

    /// Exemplars flattened in (class id, position) order.
    Tensor inputs() const;
    Tensor features() const;
    std::vector<int> labels() const;

private:
    std::size_t capacity_;
    std::map<int, std::vector<Exemplar>> per_class_;
};

struct IsometricSelection {
    std::vector<std::size_t> indices;  ///< rows of the class feature matrix
    std::vector<std::size_t> ranks;    ///< their distance ranks: 0, s, 2s, ...
};

/// Sorts one class's samples by Euclidean distance to the class mean (stable on
/// ties) and keeps ranks 0, s, 2s, ... with s = N / quota, exactly `quota` of them.
/// Throws EmptyClass, QuotaExceedsClass, or InvalidCount (quota 0).
IsometricSelection isometric_select(const Tensor& features, std::size_t quota);

/// Keeps a seeded random subset of floor(R / new_total_classes) exemplars per stored class.
/// Throws MemoryTooSmall when that quota is 0.
void shrink_old_classes(ExemplarStore& store, std::size_t new_total_classes, Rng& rng);

struct NewClassData {
    Tensor inputs;
    Tensor features;
    std::vector<std::size_t> source_rows;
};

/// Shrinks old classes, then selects exemplars for each new class isometrically
/// with quota floor(R / (C_old + C_new)). Throws DuplicateClass, MemoryTooSmall.
void update_memory(ExemplarStore& store, const std::map<int, NewClassData>& new_classes, Rng& rng);

/// Recomputes cached features with the current encoder.
void refresh_features(ExemplarStore& store, const ModelState& state);

/// CSV with header class_id,exemplar_index,source_row_index,distance_rank.
std::string exemplar_csv(const ExemplarStore& store);

}  // namespace openinc
