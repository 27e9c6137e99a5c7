#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "openinc/data.hpp"
#include "support.hpp"

using namespace openinc;

namespace {

// Nearest true-center classifier on raw inputs, using the per-class train means.
double nearest_center_accuracy(const Dataset& d) {
    std::vector<std::vector<double>> centers(d.num_classes, std::vector<double>(d.input_dim(), 0.0));
    std::vector<double> counts(d.num_classes, 0.0);
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d.split[i] != Split::train) {
            continue;
        }
        const auto row = d.inputs.row(i);
        for (std::size_t k = 0; k < row.size(); ++k) {
            centers[d.labels[i]][k] += row[k];
        }
        counts[d.labels[i]] += 1.0;
    }
    for (std::size_t c = 0; c < d.num_classes; ++c) {
        for (double& v : centers[c]) {
            v /= counts[c];
        }
    }
    std::size_t correct = 0;
    std::size_t total = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d.split[i] != Split::test) {
            continue;
        }
        const auto row = d.inputs.row(i);
        std::size_t best = 0;
        double best_d = 1e300;
        for (std::size_t c = 0; c < d.num_classes; ++c) {
            double ss = 0.0;
            for (std::size_t k = 0; k < row.size(); ++k) {
                ss += (row[k] - centers[c][k]) * (row[k] - centers[c][k]);
            }
            if (ss < best_d) {
                best_d = ss;
                best = c;
            }
        }
        correct += static_cast<int>(best) == d.labels[i];
        ++total;
    }
    return static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace

TEST(Blobs, CountsAndSplit) {
    BlobSpec spec;
    spec.samples_per_class = 100;
    const Dataset d = generate_blobs(spec);
    EXPECT_EQ(d.size(), 1000u);
    EXPECT_EQ(d.input_dim(), 20u);
    EXPECT_EQ(d.rows(Split::train, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}).size(), 800u);
    for (int c = 0; c < 10; ++c) {
        EXPECT_EQ(d.rows(Split::train, {c}).size(), 80u);
        EXPECT_EQ(d.rows(Split::test, {c}).size(), 20u);
    }
    EXPECT_NO_THROW(d.require_complete_split());
}

TEST(Blobs, Deterministic) {
    BlobSpec spec;
    spec.samples_per_class = 20;
    spec.seed = 5;
    const Dataset a = generate_blobs(spec);
    const Dataset b = generate_blobs(spec);
    EXPECT_EQ(a.inputs, b.inputs);
    EXPECT_EQ(a.split, b.split);
    EXPECT_EQ(a.fingerprint, b.fingerprint);
    spec.seed = 6;
    EXPECT_NE(generate_blobs(spec).inputs, a.inputs);
    EXPECT_NE(generate_blobs(spec).fingerprint, a.fingerprint);
}

TEST(Blobs, CentersOnSphereAndTinySigmaCollapses) {
    BlobSpec spec;
    spec.num_classes = 3;
    spec.samples_per_class = 5;
    spec.input_dim = 4;
    spec.sigma = 1e-9;
    const Dataset d = generate_blobs(spec);
    for (std::size_t i = 0; i < d.size(); ++i) {
        double ss = 0.0;
        for (double v : d.inputs.row(i)) {
            ss += v * v;
        }
        EXPECT_NEAR(std::sqrt(ss), spec.center_radius, 1e-6);
    }
}

TEST(Blobs, SeparabilityBound) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        BlobSpec spec;
        spec.seed = seed;
        spec.center_radius = 8.0;
        EXPECT_GT(nearest_center_accuracy(generate_blobs(spec)), 0.99) << "seed " << seed;
    }
}

TEST(Blobs, Validation) {
    BlobSpec spec;
    spec.num_classes = 1;
    EXPECT_ERRC(generate_blobs(spec), Errc::invalid_spec);
    spec = BlobSpec{};
    spec.sigma = 0.0;
    EXPECT_ERRC(generate_blobs(spec), Errc::invalid_spec);
}

TEST(Csv, WellFormed) {
    const Dataset d = parse_csv("label,a,b\n9,1.0,2\n5,3,4\n9,5,6.5\n");
    EXPECT_EQ(d.size(), 3u);
    EXPECT_EQ(d.input_dim(), 2u);
    EXPECT_EQ(d.labels, (std::vector<int>{0, 1, 0}));
    EXPECT_EQ(d.label_names, (std::vector<std::string>{"9", "5"}));
    EXPECT_EQ(d.inputs(2, 1), 6.5);
    EXPECT_EQ(d.fingerprint.rfind("csv-", 0), 0u);
}

TEST(Csv, ParseErrorCarriesLine) {
    const std::string text = "label,x\n0,1\n0,2\n1,3\n1,4\n\n0,abc\n";
    try {
        parse_csv(text);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 7u);
        EXPECT_EQ(e.code(), Errc::parse_error);
    }
    EXPECT_ERRC(parse_csv("label,x\n0,1,2\n"), Errc::parse_error);
    EXPECT_ERRC(parse_csv("label,x\n0,nan\n"), Errc::parse_error);
}

TEST(Csv, HeaderErrors) {
    EXPECT_ERRC(parse_csv("x,label\n1,0\n"), Errc::missing_column);
    EXPECT_ERRC(parse_csv("label\n1\n"), Errc::missing_column);
    EXPECT_ERRC(parse_csv(""), Errc::missing_column);
}

TEST(Csv, FileLoading) {
    EXPECT_ERRC(load_csv("/nonexistent/openinc.csv"), Errc::file_not_found);
    const auto path = std::filesystem::temp_directory_path() / "openinc_test_data.csv";
    {
        std::ofstream out(path);
        out << "label,f0\n";
        for (int i = 0; i < 10; ++i) {
            out << (i % 2) << ',' << i << '\n';
        }
    }
    const Dataset d = load_csv(path.string(), 3);
    EXPECT_EQ(d.size(), 10u);
    EXPECT_EQ(d.rows(Split::train, {0}).size(), 4u);
    EXPECT_EQ(d.rows(Split::test, {0}).size(), 1u);
    std::filesystem::remove(path);
}

TEST(Split, StratifiedCountsAndSeeding) {
    Dataset d = parse_csv("label,x\na,1\na,2\na,3\nb,4\nb,5\nc,6\n", 1);
    EXPECT_EQ(d.rows(Split::train, {0}).size(), 2u);
    EXPECT_EQ(d.rows(Split::test, {0}).size(), 1u);
    EXPECT_EQ(d.rows(Split::train, {1}).size(), 1u);
    EXPECT_EQ(d.rows(Split::test, {1}).size(), 1u);
    // A singleton class can only train.
    EXPECT_EQ(d.rows(Split::train, {2}).size(), 1u);
    EXPECT_ERRC(d.require_complete_split(), Errc::invalid_spec);
}

TEST(Plan, DefaultPartition) {
    const SessionPlan plan = plan_sessions(10, 2, 2, 7);
    EXPECT_EQ(plan.num_inlier_sessions(), 4u);
    EXPECT_EQ(plan.sessions.size(), 5u);
    EXPECT_EQ(plan.outlier_classes().size(), 2u);
    std::set<int> all;
    for (const auto& s : plan.sessions) {
        all.insert(s.begin(), s.end());
    }
    EXPECT_EQ(all.size(), 10u);
    EXPECT_EQ(*all.begin(), 0);
    EXPECT_EQ(*all.rbegin(), 9);
    EXPECT_EQ(plan.inlier_classes().size(), 8u);
    EXPECT_EQ(plan_sessions(10, 2, 2, 7).sessions, plan.sessions);
}

TEST(Plan, Indivisible) {
    EXPECT_ERRC(plan_sessions(9, 2, 2, 0), Errc::indivisible_split);
    EXPECT_ERRC(plan_sessions(8, 2, 0, 0), Errc::indivisible_split);
    EXPECT_ERRC(plan_sessions(4, 2, 4, 0), Errc::indivisible_split);
}

TEST(Fnv, KnownVector) {
    EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
    EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
}
