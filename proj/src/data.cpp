#include "openinc/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "openinc/error.hpp"

namespace openinc {
namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

std::vector<std::string_view> split_cells(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        cells.push_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    return cells;
}

std::string format_exact(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace

std::vector<std::size_t> Dataset::rows(Split which, const std::vector<int>& classes) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (split[i] == which && std::find(classes.begin(), classes.end(), labels[i]) != classes.end()) {
            out.push_back(i);
        }
    }
    return out;
}

Tensor Dataset::gather(const std::vector<std::size_t>& row_ids) const {
    const std::size_t d = inputs.cols();
    std::vector<double> values;
    values.reserve(row_ids.size() * d);
    for (std::size_t r : row_ids) {
        const auto row = inputs.row(r);
        values.insert(values.end(), row.begin(), row.end());
    }
    return Tensor::matrix(row_ids.size(), d, std::move(values));
}

void Dataset::require_complete_split() const {
    std::vector<int> has_train(num_classes, 0);
    std::vector<int> has_test(num_classes, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        (split[i] == Split::train ? has_train : has_test)[static_cast<std::size_t>(labels[i])] = 1;
    }
    for (std::size_t c = 0; c < num_classes; ++c) {
        if (!has_train[c] || !has_test[c]) {
            throw Error(Errc::invalid_spec, "class " + std::to_string(c) + " lacks train or test rows");
        }
    }
}

void BlobSpec::validate() const {
    if (num_classes < 2) {
        throw Error(Errc::invalid_spec, "need at least two classes");
    }
    if (!(sigma > 0.0)) {
        throw Error(Errc::invalid_spec, "sigma must be positive");
    }
    if (input_dim == 0 || samples_per_class < 2) {
        throw Error(Errc::invalid_spec, "input_dim must be >= 1 and samples_per_class >= 2");
    }
    if (!(center_radius >= 0.0)) {
        throw Error(Errc::invalid_spec, "center_radius must be non-negative");
    }
}

std::string BlobSpec::fingerprint() const {
    std::ostringstream canon;
    canon << "blobs;classes=" << num_classes << ";samples=" << samples_per_class << ";dim=" << input_dim
          << ";radius=" << format_exact(center_radius) << ";sigma=" << format_exact(sigma);
    return "blobs-" + std::to_string(seed) + "-" + fnv1a_hex(canon.str());
}

Dataset generate_blobs(const BlobSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    std::vector<std::vector<double>> centers(spec.num_classes, std::vector<double>(spec.input_dim));
    for (auto& c : centers) {
        double norm = 0.0;
        while (!(norm > kNormEpsilon)) {
            norm = 0.0;
            for (double& v : c) {
                v = normal(rng);
                norm += v * v;
            }
            norm = std::sqrt(norm);
        }
        for (double& v : c) {
            v = v / norm * spec.center_radius;
        }
    }

    Dataset data;
    data.num_classes = spec.num_classes;
    const std::size_t n = spec.num_classes * spec.samples_per_class;
    std::vector<double> values;
    values.reserve(n * spec.input_dim);
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
        for (std::size_t s = 0; s < spec.samples_per_class; ++s) {
            for (std::size_t k = 0; k < spec.input_dim; ++k) {
                values.push_back(centers[c][k] + spec.sigma * normal(rng));
            }
            data.labels.push_back(static_cast<int>(c));
        }
        data.label_names.push_back(std::to_string(c));
    }
    data.inputs = Tensor::matrix(n, spec.input_dim, std::move(values));
    data.split.assign(n, Split::train);
    data.fingerprint = spec.fingerprint();
    stratified_split(data, rng());
    return data;
}

void stratified_split(Dataset& data, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    data.split.assign(data.labels.size(), Split::train);
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < data.labels.size(); ++i) {
        by_class[data.labels[i]].push_back(i);
    }
    for (auto& [cls, rows] : by_class) {
        std::shuffle(rows.begin(), rows.end(), rng);
        const std::size_t n = rows.size();
        std::size_t n_train = n * 4 / 5;
        if (n >= 2) {
            n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
        } else {
            n_train = n;
        }
        for (std::size_t i = n_train; i < n; ++i) {
            data.split[rows[i]] = Split::test;
        }
    }
}

Dataset parse_csv(const std::string& text, std::uint64_t split_seed) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    bool have_header = false;
    Dataset data;
    std::map<std::string, int, std::less<>> ids;
    std::vector<double> values;

    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        const auto cells = split_cells(line);
        if (!have_header) {
            if (cells.front() != "label") {
                throw Error(Errc::missing_column, "first header column must be 'label'");
            }
            if (cells.size() < 2) {
                throw Error(Errc::missing_column, "no feature columns in header");
            }
            width = cells.size() - 1;
            have_header = true;
            continue;
        }
        if (cells.size() != width + 1) {
            throw ParseError(line_no, "expected " + std::to_string(width + 1) + " cells, found " +
                                          std::to_string(cells.size()));
        }
        if (cells.front().empty()) {
            throw ParseError(line_no, "empty label");
        }
        const std::string label(cells.front());
        auto it = ids.find(label);
        if (it == ids.end()) {
            it = ids.emplace(label, static_cast<int>(data.label_names.size())).first;
            data.label_names.push_back(label);
        }
        data.labels.push_back(it->second);
        for (std::size_t k = 1; k < cells.size(); ++k) {
            const std::string_view cell = cells[k];
            double v = 0.0;
            const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size() || !std::isfinite(v)) {
                throw ParseError(line_no, "non-numeric cell '" + std::string(cell) + "' in column " + std::to_string(k));
            }
            values.push_back(v);
        }
    }
    if (!have_header) {
        throw Error(Errc::missing_column, "missing header row");
    }
    data.num_classes = data.label_names.size();
    data.inputs = Tensor::matrix(data.labels.size(), width, std::move(values));
    data.fingerprint = "csv-" + fnv1a_hex(text);
    stratified_split(data, split_seed);
    return data;
}

Dataset load_csv(const std::string& path, std::uint64_t split_seed) {
    if (!std::filesystem::exists(path)) {
        throw Error(Errc::file_not_found, path);
    }
    std::ifstream file(path, std::ios::binary);
    if (!file) {
        throw Error(Errc::io_error, "cannot open " + path);
    }
    std::ostringstream buf;
    buf << file.rdbuf();
    return parse_csv(buf.str(), split_seed);
}

std::vector<int> SessionPlan::inlier_classes() const {
    std::vector<int> out;
    for (std::size_t s = 0; s < outlier_session; ++s) {
        out.insert(out.end(), sessions[s].begin(), sessions[s].end());
    }
    return out;
}

SessionPlan plan_sessions(std::size_t num_classes, std::size_t classes_per_session, std::size_t num_outlier_classes,
                          std::uint64_t seed) {
    if (num_outlier_classes == 0 || num_outlier_classes >= num_classes) {
        throw Error(Errc::indivisible_split, "need at least one outlier class and one inlier class");
    }
    const std::size_t inliers = num_classes - num_outlier_classes;
    if (classes_per_session == 0 || inliers % classes_per_session != 0) {
        throw Error(Errc::indivisible_split, std::to_string(inliers) + " inlier classes do not split into sessions of " +
                                                 std::to_string(classes_per_session));
    }
    std::vector<int> order(num_classes);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    SessionPlan plan;
    for (std::size_t s = 0; s < inliers / classes_per_session; ++s) {
        plan.sessions.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(s * classes_per_session),
                                   order.begin() + static_cast<std::ptrdiff_t>((s + 1) * classes_per_session));
    }
    plan.outlier_session = plan.sessions.size();
    plan.sessions.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(inliers), order.end());
    return plan;
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace openinc
