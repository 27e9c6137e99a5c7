#include <gtest/gtest.h>

#include "openinc/metrics.hpp"
#include "support.hpp"

using namespace openinc;

TEST(Spread, IntraExamples) {
    EXPECT_EQ(intra_spread(Tensor::matrix({{0, 0}, {2, 0}}), std::vector<int>{0, 0}), 1.0);
    EXPECT_EQ(intra_spread(Tensor::matrix({{1, 1}, {1, 1}, {5, 2}}), std::vector<int>{0, 0, 1}), 0.0);

    Rng rng(1);
    const Tensor f = openinc::test::random_matrix(12, 3, rng);
    const std::vector<int> labels{0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2};
    Tensor doubled = f;
    for (double& v : doubled.data()) {
        v *= 2.0;
    }
    EXPECT_NEAR(intra_spread(doubled, labels), 4.0 * intra_spread(f, labels), 1e-12);
    EXPECT_ERRC(intra_spread(Tensor(Shape{0, 2}, 0.0), std::vector<int>{}), Errc::empty_input);
}

TEST(Spread, InterExamples) {
    EXPECT_EQ(inter_spread({{0, {0, 0}}, {1, {3, 4}}}), 25.0);
    EXPECT_EQ(inter_spread({{0, {0, 0}}, {1, {1, 0}}, {2, {5, 0}}}), 1.0);
    EXPECT_ERRC(inter_spread({{0, {0, 0}}}), Errc::single_class);
}

TEST(Spread, Ratio) {
    EXPECT_EQ(rs_ratio(0.0, 3.0), 0.0);
    EXPECT_DOUBLE_EQ(rs_ratio(1.0, 25.0), 0.04);
    EXPECT_ERRC(rs_ratio(1.0, 0.0), Errc::zero_inter_spread);
}

TEST(Spread, ReportAndCenters) {
    const Tensor f = Tensor::matrix({{0, 0}, {2, 0}, {10, 0}, {10, 2}});
    const std::vector<int> labels{4, 4, 7, 7};
    const ClassCenters c = class_centers(f, labels);
    EXPECT_EQ(c.at(4), (std::vector<double>{1, 0}));
    EXPECT_EQ(c.at(7), (std::vector<double>{10, 1}));
    const SpreadReport r = spread_report(f, labels);
    EXPECT_EQ(r.s_intra, 1.0);
    EXPECT_EQ(r.s_inter, 82.0);
    EXPECT_DOUBLE_EQ(r.r_s, 1.0 / 82.0);
}

TEST(Accuracy, Counts) {
    EXPECT_EQ(incremental_accuracy(std::vector<int>{1, 2, 3}, std::vector<int>{1, 2, 3}), 1.0);
    std::vector<int> pred(100, 0);
    std::vector<int> truth(100, 0);
    for (int i = 0; i < 50; ++i) {
        truth[i] = 1;
    }
    EXPECT_EQ(incremental_accuracy(pred, truth), 0.5);

    Rng rng(37);
    std::uniform_int_distribution<int> cls(0, 3);
    std::vector<int> p(37);
    std::vector<int> t(37);
    int correct = 0;
    for (int i = 0; i < 37; ++i) {
        p[i] = cls(rng);
        t[i] = cls(rng);
        correct += p[i] == t[i];
    }
    EXPECT_DOUBLE_EQ(incremental_accuracy(p, t), correct / 37.0);
    EXPECT_ERRC(incremental_accuracy(std::vector<int>{}, std::vector<int>{}), Errc::empty_input);
}
