#include "openinc/exemplar.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "openinc/error.hpp"

namespace openinc {

std::size_t ExemplarStore::total() const noexcept {
    std::size_t n = 0;
    for (const auto& [cls, items] : per_class_) {
        n += items.size();
    }
    return n;
}

Tensor ExemplarStore::inputs() const {
    std::vector<double> values;
    std::size_t width = 0;
    for (const auto& [cls, items] : per_class_) {
        for (const Exemplar& e : items) {
            width = e.input.size();
            values.insert(values.end(), e.input.begin(), e.input.end());
        }
    }
    return Tensor::matrix(total(), width, std::move(values));
}

Tensor ExemplarStore::features() const {
    std::vector<double> values;
    std::size_t width = 0;
    for (const auto& [cls, items] : per_class_) {
        for (const Exemplar& e : items) {
            width = e.feature.size();
            values.insert(values.end(), e.feature.begin(), e.feature.end());
        }
    }
    return Tensor::matrix(total(), width, std::move(values));
}

std::vector<int> ExemplarStore::labels() const {
    std::vector<int> out;
    for (const auto& [cls, items] : per_class_) {
        out.insert(out.end(), items.size(), cls);
    }
    return out;
}

IsometricSelection isometric_select(const Tensor& features, std::size_t quota) {
    const std::size_t n = features.rank() == 2 ? features.rows() : 0;
    if (n == 0) {
        throw Error(Errc::empty_class, "cannot select exemplars from an empty class");
    }
    if (quota == 0) {
        throw Error(Errc::invalid_count, "exemplar quota must be at least 1");
    }
    if (quota > n) {
        throw Error(Errc::quota_exceeds_class,
                    "quota " + std::to_string(quota) + " exceeds class size " + std::to_string(n));
    }
    const std::size_t d = features.cols();
    std::vector<double> center(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < d; ++k) {
            center[k] += features(i, k);
        }
    }
    for (double& c : center) {
        c /= static_cast<double>(n);
    }
    std::vector<double> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
        double ss = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            const double diff = features(i, k) - center[k];
            ss += diff * diff;
        }
        dist[i] = std::sqrt(ss);
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });

    const std::size_t stride = n / quota;
    IsometricSelection sel;
    for (std::size_t q = 0; q < quota; ++q) {
        sel.ranks.push_back(q * stride);
        sel.indices.push_back(order[q * stride]);
    }
    return sel;
}

void shrink_old_classes(ExemplarStore& store, std::size_t new_total_classes, Rng& rng) {
    const std::size_t quota = new_total_classes == 0 ? 0 : store.capacity() / new_total_classes;
    if (quota == 0) {
        throw Error(Errc::memory_too_small, "memory " + std::to_string(store.capacity()) + " cannot hold " +
                                                std::to_string(new_total_classes) + " classes");
    }
    for (auto& [cls, items] : store.classes()) {
        if (items.size() <= quota) {
            continue;
        }
        std::vector<std::size_t> keep;
        keep.reserve(quota);
        std::vector<std::size_t> all(items.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        std::sample(all.begin(), all.end(), std::back_inserter(keep), quota, rng);
        std::vector<Exemplar> kept;
        kept.reserve(quota);
        for (std::size_t i : keep) {
            kept.push_back(std::move(items[i]));
        }
        items = std::move(kept);
    }
}

void update_memory(ExemplarStore& store, const std::map<int, NewClassData>& new_classes, Rng& rng) {
    for (const auto& [cls, data] : new_classes) {
        if (store.contains(cls)) {
            throw Error(Errc::duplicate_class, "class " + std::to_string(cls) + " already has exemplars");
        }
    }
    const std::size_t total_classes = store.num_classes() + new_classes.size();
    const std::size_t quota = total_classes == 0 ? 0 : store.capacity() / total_classes;
    if (quota == 0) {
        throw Error(Errc::memory_too_small, "memory " + std::to_string(store.capacity()) + " cannot hold " +
                                                std::to_string(total_classes) + " classes");
    }
    if (!store.empty()) {
        shrink_old_classes(store, total_classes, rng);
    }
    for (const auto& [cls, data] : new_classes) {
        if (data.inputs.rows() != data.features.rows() || data.source_rows.size() != data.inputs.rows()) {
            throw Error(Errc::shape_mismatch, "new class data rows disagree");
        }
        const IsometricSelection sel = isometric_select(data.features, quota);
        std::vector<Exemplar> items;
        for (std::size_t q = 0; q < sel.indices.size(); ++q) {
            const std::size_t row = sel.indices[q];
            const auto in = data.inputs.row(row);
            const auto f = data.features.row(row);
            items.push_back(Exemplar{{in.begin(), in.end()}, {f.begin(), f.end()}, data.source_rows[row], sel.ranks[q]});
        }
        store.classes()[cls] = std::move(items);
    }
}

void refresh_features(ExemplarStore& store, const ModelState& state) {
    for (auto& [cls, items] : store.classes()) {
        if (items.empty()) {
            continue;
        }
        const std::size_t width = items.front().input.size();
        std::vector<double> values;
        for (const Exemplar& e : items) {
            values.insert(values.end(), e.input.begin(), e.input.end());
        }
        const Tensor z = encode(state, Tensor::matrix(items.size(), width, std::move(values)));
        for (std::size_t i = 0; i < items.size(); ++i) {
            const auto row = z.row(i);
            items[i].feature.assign(row.begin(), row.end());
        }
    }
}

std::string exemplar_csv(const ExemplarStore& store) {
    std::ostringstream out;
    out << "class_id,exemplar_index,source_row_index,distance_rank\n";
    for (const auto& [cls, items] : store.classes()) {
        for (std::size_t i = 0; i < items.size(); ++i) {
            out << cls << ',' << i << ',' << items[i].source_row << ',' << items[i].distance_rank << '\n';
        }
    }
    return out.str();
}

}  // namespace openinc
