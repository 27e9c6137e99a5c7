#include <gtest/gtest.h>

#include <cmath>

#include "openinc/model.hpp"
#include "support.hpp"

using namespace openinc;
using openinc::test::random_matrix;

namespace {

ModelState small_model(std::uint64_t seed, std::size_t classes = 4) {
    Rng rng(seed);
    ModelDims dims;
    dims.input_dim = 6;
    dims.hidden_dims = {8};
    dims.feature_dim = 5;
    dims.proj_dim = 3;
    return init_model(dims, classes, rng);
}

// Plain loops, independent of the tape.
Tensor reference_linear(const Tensor& x, const Linear& l, bool relu_out) {
    Tensor y(Shape{x.rows(), l.fan_out()}, 0.0);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        for (std::size_t c = 0; c < l.fan_out(); ++c) {
            double acc = l.bias[c];
            for (std::size_t k = 0; k < l.fan_in(); ++k) {
                acc += x(r, k) * l.weight(k, c);
            }
            y(r, c) = relu_out ? std::max(acc, 0.0) : acc;
        }
    }
    return y;
}

}  // namespace

TEST(Model, InitShapesChain) {
    const ModelState m = small_model(1);
    ASSERT_EQ(m.student.encoder.layers.size(), 2u);
    EXPECT_EQ(m.student.encoder.layers[0].weight.shape(), (Shape{6, 8}));
    EXPECT_EQ(m.student.encoder.layers[1].weight.shape(), (Shape{8, 5}));
    EXPECT_EQ(m.student.head.hidden.weight.shape(), (Shape{5, 5}));
    EXPECT_EQ(m.student.head.out.weight.shape(), (Shape{5, 3}));
    EXPECT_EQ(m.student.classifier.fc.weight.shape(), (Shape{5, 4}));
    EXPECT_EQ(m.student.classifier.fc.bias.shape(), (Shape{1, 4}));
    EXPECT_FALSE(m.teacher.has_value());
    for (const Tensor* p : parameters(m.student)) {
        EXPECT_TRUE(p->all_finite());
    }
}

TEST(Model, GlorotBound) {
    Rng rng(3);
    const Linear l = make_linear(30, 10, rng);
    const double limit = std::sqrt(6.0 / 40.0);
    for (double w : l.weight.data()) {
        EXPECT_LE(std::abs(w), limit);
    }
    for (double b : l.bias.data()) {
        EXPECT_EQ(b, 0.0);
    }
}

TEST(Model, ZeroWeightsGiveZeroOutputs) {
    ModelState m = small_model(2);
    for (Tensor* p : parameters(m.student)) {
        *p = Tensor(p->shape(), 0.0);
    }
    Rng rng(9);
    const Tensor x = random_matrix(3, 6, rng);
    const Tensor z = encode(m, x);
    EXPECT_EQ(z, Tensor(Shape{3, 5}, 0.0));
    EXPECT_EQ(classify(m, z), Tensor(Shape{3, 4}, 0.0));
}

TEST(Model, EmptyBatch) {
    const ModelState m = small_model(2);
    const Tensor z = encode(m, Tensor(Shape{0, 6}, 0.0));
    EXPECT_EQ(z.shape(), (Shape{0, 5}));
    EXPECT_EQ(classify(m, z).shape(), (Shape{0, 4}));
}

TEST(Model, WidthMismatch) {
    const ModelState m = small_model(2);
    EXPECT_ERRC(encode(m, Tensor(Shape{2, 5}, 1.0)), Errc::shape_mismatch);
    EXPECT_ERRC(classify(m, Tensor(Shape{2, 4}, 1.0)), Errc::shape_mismatch);
}

TEST(Model, Deterministic) {
    Rng rng(4);
    const Tensor x = random_matrix(4, 6, rng);
    EXPECT_EQ(encode(small_model(7), x), encode(small_model(7), x));
    EXPECT_NE(encode(small_model(7), x), encode(small_model(8), x));
}

TEST(Model, ForwardMatchesReferenceOracle) {
    const ModelState m = small_model(5);
    Rng rng(11);
    const Tensor x = random_matrix(5, 6, rng, -2.0, 2.0);
    const auto& layers = m.student.encoder.layers;
    const Tensor z_ref = reference_linear(reference_linear(x, layers[0], true), layers[1], false);
    const Tensor z = encode(m, x);
    for (std::size_t i = 0; i < z.size(); ++i) {
        EXPECT_NEAR(z[i], z_ref[i], 1e-12);
    }

    Tensor p_ref = reference_linear(reference_linear(z_ref, m.student.head.hidden, true), m.student.head.out, false);
    p_ref = openinc::test::normalize_rows(p_ref);
    const Tensor p = project(m, z);
    for (std::size_t i = 0; i < p.size(); ++i) {
        EXPECT_NEAR(p[i], p_ref[i], 1e-12);
    }
    for (std::size_t r = 0; r < p.rows(); ++r) {
        double ss = 0.0;
        for (double v : p.row(r)) {
            ss += v * v;
        }
        EXPECT_NEAR(std::sqrt(ss), 1.0, 1e-10);
    }

    const Tensor logits = classify(m, z);
    const Tensor logits_ref = reference_linear(z_ref, m.student.classifier.fc, false);
    for (std::size_t i = 0; i < logits.size(); ++i) {
        EXPECT_NEAR(logits[i], logits_ref[i], 1e-12);
    }
}

TEST(Model, IdenticalRowsProjectIdentically) {
    const ModelState m = small_model(5);
    const Tensor z = Tensor::matrix({{0.5, -1, 2, 0.1, 3}, {0.5, -1, 2, 0.1, 3}});
    const Tensor p = project(m, z);
    EXPECT_TRUE(std::equal(p.row(0).begin(), p.row(0).end(), p.row(1).begin()));
}

TEST(Model, SnapshotIsFrozenCopy) {
    ModelState m = small_model(6);
    Rng rng(1);
    const Tensor x = random_matrix(4, 6, rng);
    snapshot_teacher(m);
    ASSERT_TRUE(m.teacher.has_value());
    EXPECT_EQ(encode(*m.teacher, x), encode(m.student, x));

    const Tensor before = encode(*m.teacher, x);
    AdamOptimizer adam(1e-2);
    for (int step = 0; step < 100; ++step) {
        Tape tape;
        const BoundNetwork net = bind(tape, m.student, true);
        tape.backward(sum(square(encode(net, tape.constant(x)))));
        std::vector<Tensor> grads;
        for (Var v : net.params()) {
            grads.push_back(tape.grad(v));
        }
        adam.step(parameters(m.student), grads);
    }
    EXPECT_EQ(encode(*m.teacher, x), before);
    EXPECT_NE(encode(m.student, x), before);

    snapshot_teacher(m);
    EXPECT_EQ(encode(*m.teacher, x), encode(m.student, x));
}

TEST(Model, ExpandClassifierPreservesOldOutputs) {
    ModelState m = small_model(7, 4);
    Rng rng(2);
    const Tensor z = random_matrix(3, 5, rng);
    const Tensor old_logits = classify(m, z);
    const Tensor old_weight = m.student.classifier.fc.weight;
    expand_classifier(m, 2, rng);
    EXPECT_EQ(m.student.classifier.num_classes(), 6u);
    for (std::size_t r = 0; r < 5; ++r) {
        for (std::size_t c = 0; c < 4; ++c) {
            EXPECT_EQ(m.student.classifier.fc.weight(r, c), old_weight(r, c));
        }
    }
    const Tensor new_logits = classify(m, z);
    for (std::size_t r = 0; r < 3; ++r) {
        for (std::size_t c = 0; c < 4; ++c) {
            EXPECT_EQ(new_logits(r, c), old_logits(r, c));
        }
    }
    EXPECT_ERRC(expand_classifier(m, 0, rng), Errc::invalid_count);
}

TEST(Model, ExpandFromEmptyClassifier) {
    ModelState m = small_model(7, 0);
    Rng rng(2);
    EXPECT_EQ(m.student.classifier.num_classes(), 0u);
    expand_classifier(m, 3, rng);
    EXPECT_EQ(m.student.classifier.fc.weight.shape(), (Shape{5, 3}));
    EXPECT_EQ(m.student.classifier.fc.bias.shape(), (Shape{1, 3}));
}

TEST(Model, BoundGradientsMatchFiniteDifferences) {
    const ModelState m = small_model(8, 3);
    Rng rng(5);
    const Tensor x = random_matrix(4, 6, rng);
    const Tensor first = m.student.encoder.layers[0].weight;

    auto loss_at = [&](const Tensor& w0) {
        Network net = m.student;
        net.encoder.layers[0].weight = w0;
        Tape tape;
        const BoundNetwork bound = bind(tape, net, false);
        Var z = encode(bound, tape.constant(x));
        return sum(square(classify(bound, z))).value().item() + sum(project(bound, z)).value().item();
    };

    Tape tape;
    const BoundNetwork bound = bind(tape, m.student, true);
    Var z = encode(bound, tape.constant(x));
    tape.backward(add(sum(square(classify(bound, z))), sum(project(bound, z))));
    const Tensor analytic = tape.grad(bound.encoder[0].weight);
    const Tensor numeric = finite_diff_gradient(loss_at, first, 1e-5);
    EXPECT_LT(openinc::test::relative_error(analytic, numeric), 1e-6);
}

TEST(Optimizer, AdamFirstStepMovesByLearningRate) {
    Tensor p = Tensor::vector({1.0, -2.0});
    AdamOptimizer adam(0.1);
    adam.step({&p}, {Tensor::vector({3.0, -0.5})});
    EXPECT_DOUBLE_EQ(p[0], 1.0 - 0.1 * 3.0 / (3.0 + 1e-8));
    EXPECT_DOUBLE_EQ(p[1], -2.0 + 0.1 * 0.5 / (0.5 + 1e-8));
}

TEST(Optimizer, AdamMinimizesQuadratic) {
    Tensor p = Tensor::vector({4.0, -3.0});
    AdamOptimizer adam(0.05);
    for (int i = 0; i < 2000; ++i) {
        adam.step({&p}, {Tensor::vector({2 * p[0], 2 * p[1]})});
    }
    EXPECT_NEAR(p[0], 0.0, 1e-2);
    EXPECT_NEAR(p[1], 0.0, 1e-2);
}

TEST(Optimizer, SgdStep) {
    Tensor p = Tensor::vector({1.0, 2.0});
    SgdOptimizer(0.5).step({&p}, {Tensor::vector({2.0, -2.0})});
    EXPECT_EQ(p, Tensor::vector({0.0, 3.0}));
}

TEST(Serialization, RoundTripIsExact) {
    ModelState m = small_model(9, 3);
    snapshot_teacher(m);
    const std::string text = model_to_json(m, ModelMeta{42, 3, "blobs-0-abc"});
    ModelMeta meta;
    const ModelState back = model_from_json(text, &meta);
    EXPECT_EQ(back.student, m.student);
    EXPECT_EQ(back.dims.hidden_dims, m.dims.hidden_dims);
    EXPECT_EQ(meta.seed, 42u);
    EXPECT_EQ(meta.session, 3);
    EXPECT_EQ(meta.dataset_fingerprint, "blobs-0-abc");
    EXPECT_EQ(model_to_json(back, meta), model_to_json(m, meta));
}

TEST(Serialization, RejectsMalformed) {
    EXPECT_ERRC(model_from_json("{not json"), Errc::parse_error);
    EXPECT_ERRC(model_from_json("{}"), Errc::parse_error);
}
