#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "openinc/autodiff.hpp"
#include "openinc/tensor.hpp"

namespace openinc {

using Rng = std::mt19937_64;

struct ModelDims {
    std::size_t input_dim = 20;
    std::vector<std::size_t> hidden_dims{64, 64};
    std::size_t feature_dim = 16;
    std::size_t proj_dim = 8;
};

/// Fully-connected layer y = x W + b, with W stored fan_in x fan_out.
struct Linear {
    Tensor weight;
    Tensor bias;  // 1 x fan_out

    std::size_t fan_in() const { return weight.rows(); }
    std::size_t fan_out() const { return weight.cols(); }
};

/// Glorot-uniform weights on (-a, a), a = sqrt(6 / (fan_in + fan_out)); zero bias.
Linear make_linear(std::size_t fan_in, std::size_t fan_out, Rng& rng);

/// input_dim -> hidden... -> feature_dim, ReLU between layers, linear output.
struct EncoderParams {
    std::vector<Linear> layers;
};

/// feature_dim -> feature_dim -> proj_dim; output rows are normalized downstream.
struct HeadParams {
    Linear hidden;
    Linear out;
};

/// One fully-connected layer feature_dim -> observed classes.
struct ClassifierParams {
    Linear fc;

    std::size_t num_classes() const { return fc.fan_out(); }
};

struct Network {
    EncoderParams encoder;
    HeadParams head;
    ClassifierParams classifier;

    bool operator==(const Network& other) const;
};

struct ModelState {
    ModelDims dims;
    Network student;
    /// Frozen copy taken by snapshot_teacher; training never writes to it.
    std::optional<Network> teacher;
};

ModelState init_model(const ModelDims& dims, std::size_t num_classes, Rng& rng);

/// Parameters in a fixed order: encoder layers, head, classifier (weight, bias each).
std::vector<Tensor*> parameters(Network& net);
std::vector<const Tensor*> parameters(const Network& net);

struct BoundLinear {
    Var weight;
    Var bias;
};

/// A Network's parameters placed on a tape, either as tracked leaves or constants.
struct BoundNetwork {
    std::vector<BoundLinear> encoder;
    BoundLinear head_hidden;
    BoundLinear head_out;
    BoundLinear classifier;

    /// Same order as parameters(Network&).
    std::vector<Var> params() const;
};

BoundNetwork bind(Tape& tape, const Network& net, bool trainable);

/// x W + b for a bound layer.
Var apply_linear(const BoundLinear& layer, Var x);

Var encode(const BoundNetwork& net, Var x);
/// Head output with every row L2-normalized.
Var project(const BoundNetwork& net, Var z);
/// Raw logits; no softmax.
Var classify(const BoundNetwork& net, Var z);

Tensor encode(const Network& net, const Tensor& x);
Tensor project(const Network& net, const Tensor& z);
Tensor classify(const Network& net, const Tensor& z);

Tensor encode(const ModelState& state, const Tensor& x);
Tensor project(const ModelState& state, const Tensor& z);
Tensor classify(const ModelState& state, const Tensor& z);

/// Deep-copies the current student into the teacher slot, replacing any earlier snapshot.
void snapshot_teacher(ModelState& state);

/// Appends `c_new` classifier outputs; existing outputs are preserved bitwise.
/// Throws InvalidCount when c_new == 0.
void expand_classifier(ModelState& state, std::size_t c_new, Rng& rng);

class AdamOptimizer {
public:
    explicit AdamOptimizer(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads);

private:
    double lr_;
    double beta1_;
    double beta2_;
    double eps_;
    std::uint64_t t_ = 0;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
};

class SgdOptimizer {
public:
    explicit SgdOptimizer(double lr) : lr_(lr) {}

    void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) const;

private:
    double lr_;
};

struct ModelMeta {
    std::uint64_t seed = 0;
    int session = 0;
    std::string dataset_fingerprint;
};

/// JSON snapshot {meta: {dims, seed, session, ...}, layers: [{name, shape, values}]}.
/// Values are written with round-trip precision.
std::string model_to_json(const ModelState& state, const ModelMeta& meta);
ModelState model_from_json(const std::string& text, ModelMeta* meta = nullptr);

}  // namespace openinc
