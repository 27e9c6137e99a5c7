#include "openinc/model.hpp"

#include <cmath>

#include "json.hpp"
#include "openinc/error.hpp"

namespace openinc {
namespace {

using json = nlohmann::json;

void init_uniform(Tensor& t, double limit, Rng& rng) {
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& v : t.data()) {
        v = dist(rng);
    }
}

double glorot_limit(std::size_t fan_in, std::size_t fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

BoundLinear bind_linear(Tape& tape, const Linear& l, bool trainable) {
    if (trainable) {
        return {tape.leaf(l.weight), tape.leaf(l.bias)};
    }
    return {tape.constant(l.weight), tape.constant(l.bias)};
}

void check_width(Var x, std::size_t expected, const char* what) {
    if (x.value().cols() != expected) {
        throw Error(Errc::shape_mismatch, std::string(what) + ": input width " + std::to_string(x.value().cols()) +
                                              ", expected " + std::to_string(expected));
    }
}

json tensor_entry(const std::string& name, const Tensor& t) {
    return json{{"name", name}, {"shape", t.shape()}, {"values", t.values()}};
}

}  // namespace

bool Network::operator==(const Network& other) const {
    const auto a = parameters(*this);
    const auto b = parameters(other);
    if (a.size() != b.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!(*a[i] == *b[i])) {
            return false;
        }
    }
    return true;
}

Linear make_linear(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    Linear l{Tensor(Shape{fan_in, fan_out}, 0.0), Tensor(Shape{1, fan_out}, 0.0)};
    if (fan_in + fan_out > 0) {
        init_uniform(l.weight, glorot_limit(fan_in, fan_out), rng);
    }
    return l;
}

ModelState init_model(const ModelDims& dims, std::size_t num_classes, Rng& rng) {
    ModelState state;
    state.dims = dims;
    std::size_t in = dims.input_dim;
    for (std::size_t h : dims.hidden_dims) {
        state.student.encoder.layers.push_back(make_linear(in, h, rng));
        in = h;
    }
    state.student.encoder.layers.push_back(make_linear(in, dims.feature_dim, rng));
    state.student.head.hidden = make_linear(dims.feature_dim, dims.feature_dim, rng);
    state.student.head.out = make_linear(dims.feature_dim, dims.proj_dim, rng);
    state.student.classifier.fc = make_linear(dims.feature_dim, num_classes, rng);
    return state;
}

std::vector<Tensor*> parameters(Network& net) {
    std::vector<Tensor*> out;
    for (Linear& l : net.encoder.layers) {
        out.push_back(&l.weight);
        out.push_back(&l.bias);
    }
    for (Linear* l : {&net.head.hidden, &net.head.out, &net.classifier.fc}) {
        out.push_back(&l->weight);
        out.push_back(&l->bias);
    }
    return out;
}

std::vector<const Tensor*> parameters(const Network& net) {
    std::vector<const Tensor*> out;
    for (Tensor* t : parameters(const_cast<Network&>(net))) {
        out.push_back(t);
    }
    return out;
}

std::vector<Var> BoundNetwork::params() const {
    std::vector<Var> out;
    for (const BoundLinear& l : encoder) {
        out.push_back(l.weight);
        out.push_back(l.bias);
    }
    for (const BoundLinear* l : {&head_hidden, &head_out, &classifier}) {
        out.push_back(l->weight);
        out.push_back(l->bias);
    }
    return out;
}

Var apply_linear(const BoundLinear& layer, Var x) {
    Tape& tape = *x.tape();
    const std::size_t n = x.value().rows();
    // Bias broadcast over rows as ones(n x 1) * b(1 x out).
    Var ones = tape.constant(Tensor(Shape{n, 1}, 1.0));
    return add(matmul(x, layer.weight), matmul(ones, layer.bias));
}

BoundNetwork bind(Tape& tape, const Network& net, bool trainable) {
    BoundNetwork b;
    for (const Linear& l : net.encoder.layers) {
        b.encoder.push_back(bind_linear(tape, l, trainable));
    }
    b.head_hidden = bind_linear(tape, net.head.hidden, trainable);
    b.head_out = bind_linear(tape, net.head.out, trainable);
    b.classifier = bind_linear(tape, net.classifier.fc, trainable);
    return b;
}

Var encode(const BoundNetwork& net, Var x) {
    check_width(x, net.encoder.front().weight.value().rows(), "encode");
    Var h = x;
    for (std::size_t i = 0; i < net.encoder.size(); ++i) {
        h = apply_linear(net.encoder[i], h);
        if (i + 1 < net.encoder.size()) {
            h = relu(h);
        }
    }
    return h;
}

Var project(const BoundNetwork& net, Var z) {
    check_width(z, net.head_hidden.weight.value().rows(), "project");
    return l2_normalize(apply_linear(net.head_out, relu(apply_linear(net.head_hidden, z))));
}

Var classify(const BoundNetwork& net, Var z) {
    check_width(z, net.classifier.weight.value().rows(), "classify");
    return apply_linear(net.classifier, z);
}

Tensor encode(const Network& net, const Tensor& x) {
    Tape tape;
    return encode(bind(tape, net, false), tape.constant(x)).value();
}

Tensor project(const Network& net, const Tensor& z) {
    Tape tape;
    return project(bind(tape, net, false), tape.constant(z)).value();
}

Tensor classify(const Network& net, const Tensor& z) {
    Tape tape;
    return classify(bind(tape, net, false), tape.constant(z)).value();
}

Tensor encode(const ModelState& state, const Tensor& x) { return encode(state.student, x); }
Tensor project(const ModelState& state, const Tensor& z) { return project(state.student, z); }
Tensor classify(const ModelState& state, const Tensor& z) { return classify(state.student, z); }

void snapshot_teacher(ModelState& state) { state.teacher = state.student; }

void expand_classifier(ModelState& state, std::size_t c_new, Rng& rng) {
    if (c_new == 0) {
        throw Error(Errc::invalid_count, "classifier expansion needs at least one new class");
    }
    const Linear& old = state.student.classifier.fc;
    const std::size_t in = old.fan_in();
    const std::size_t old_out = old.fan_out();
    const std::size_t new_out = old_out + c_new;
    Tensor fresh(Shape{in, c_new}, 0.0);
    init_uniform(fresh, glorot_limit(in, new_out), rng);

    Linear grown{Tensor(Shape{in, new_out}, 0.0), Tensor(Shape{1, new_out}, 0.0)};
    for (std::size_t r = 0; r < in; ++r) {
        for (std::size_t c = 0; c < old_out; ++c) {
            grown.weight(r, c) = old.weight(r, c);
        }
        for (std::size_t c = 0; c < c_new; ++c) {
            grown.weight(r, old_out + c) = fresh(r, c);
        }
    }
    for (std::size_t c = 0; c < old_out; ++c) {
        grown.bias[c] = old.bias[c];
    }
    state.student.classifier.fc = std::move(grown);
}

AdamOptimizer::AdamOptimizer(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamOptimizer::step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
    if (params.size() != grads.size()) {
        throw Error(Errc::shape_mismatch, "adam: parameter and gradient counts differ");
    }
    if (m_.size() != params.size()) {
        m_.clear();
        v_.clear();
        for (const Tensor* p : params) {
            m_.emplace_back(p->shape(), 0.0);
            v_.emplace_back(p->shape(), 0.0);
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params[i]->data();
        const auto g = grads[i].data();
        if (g.size() != p.size() || m_[i].size() != p.size()) {
            throw Error(Errc::shape_mismatch, "adam: parameter shape changed between steps");
        }
        auto m = m_[i].data();
        auto v = v_[i].data();
        for (std::size_t k = 0; k < p.size(); ++k) {
            m[k] = beta1_ * m[k] + (1.0 - beta1_) * g[k];
            v[k] = beta2_ * v[k] + (1.0 - beta2_) * g[k] * g[k];
            p[k] -= lr_ * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + eps_);
        }
    }
}

void SgdOptimizer::step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) const {
    if (params.size() != grads.size()) {
        throw Error(Errc::shape_mismatch, "sgd: parameter and gradient counts differ");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params[i]->data();
        const auto g = grads[i].data();
        for (std::size_t k = 0; k < p.size(); ++k) {
            p[k] -= lr_ * g[k];
        }
    }
}

std::string model_to_json(const ModelState& state, const ModelMeta& meta) {
    json layers = json::array();
    const Network& net = state.student;
    for (std::size_t i = 0; i < net.encoder.layers.size(); ++i) {
        const std::string base = "encoder." + std::to_string(i);
        layers.push_back(tensor_entry(base + ".weight", net.encoder.layers[i].weight));
        layers.push_back(tensor_entry(base + ".bias", net.encoder.layers[i].bias));
    }
    layers.push_back(tensor_entry("head.0.weight", net.head.hidden.weight));
    layers.push_back(tensor_entry("head.0.bias", net.head.hidden.bias));
    layers.push_back(tensor_entry("head.1.weight", net.head.out.weight));
    layers.push_back(tensor_entry("head.1.bias", net.head.out.bias));
    layers.push_back(tensor_entry("classifier.weight", net.classifier.fc.weight));
    layers.push_back(tensor_entry("classifier.bias", net.classifier.fc.bias));

    json dims{{"input_dim", state.dims.input_dim},
              {"hidden_dims", state.dims.hidden_dims},
              {"feature_dim", state.dims.feature_dim},
              {"proj_dim", state.dims.proj_dim},
              {"num_classes", net.classifier.num_classes()}};
    json doc{{"meta",
              {{"dims", dims},
               {"seed", meta.seed},
               {"session", meta.session},
               {"dataset_fingerprint", meta.dataset_fingerprint}}},
             {"layers", layers}};
    return doc.dump(1);
}

ModelState model_from_json(const std::string& text, ModelMeta* meta) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(Errc::parse_error, std::string("model json: ") + e.what());
    }
    try {
        const json& d = doc.at("meta").at("dims");
        ModelState state;
        state.dims.input_dim = d.at("input_dim").get<std::size_t>();
        state.dims.hidden_dims = d.at("hidden_dims").get<std::vector<std::size_t>>();
        state.dims.feature_dim = d.at("feature_dim").get<std::size_t>();
        state.dims.proj_dim = d.at("proj_dim").get<std::size_t>();
        if (meta != nullptr) {
            meta->seed = doc["meta"].at("seed").get<std::uint64_t>();
            meta->session = doc["meta"].at("session").get<int>();
            meta->dataset_fingerprint = doc["meta"].value("dataset_fingerprint", "");
        }

        // Shapes come from a throwaway init; every value is overwritten below.
        Rng unused(0);
        state = init_model(state.dims, d.at("num_classes").get<std::size_t>(), unused);
        Network& net = state.student;
        std::vector<std::pair<std::string, Tensor*>> slots;
        for (std::size_t i = 0; i < net.encoder.layers.size(); ++i) {
            const std::string base = "encoder." + std::to_string(i);
            slots.emplace_back(base + ".weight", &net.encoder.layers[i].weight);
            slots.emplace_back(base + ".bias", &net.encoder.layers[i].bias);
        }
        slots.emplace_back("head.0.weight", &net.head.hidden.weight);
        slots.emplace_back("head.0.bias", &net.head.hidden.bias);
        slots.emplace_back("head.1.weight", &net.head.out.weight);
        slots.emplace_back("head.1.bias", &net.head.out.bias);
        slots.emplace_back("classifier.weight", &net.classifier.fc.weight);
        slots.emplace_back("classifier.bias", &net.classifier.fc.bias);

        const json& layers = doc.at("layers");
        if (layers.size() != slots.size()) {
            throw Error(Errc::parse_error, "model json: unexpected layer count");
        }
        for (std::size_t i = 0; i < slots.size(); ++i) {
            const json& entry = layers.at(i);
            if (entry.at("name").get<std::string>() != slots[i].first) {
                throw Error(Errc::parse_error, "model json: expected layer " + slots[i].first);
            }
            Tensor t(entry.at("shape").get<Shape>(), entry.at("values").get<std::vector<double>>());
            if (!t.same_shape(*slots[i].second)) {
                throw Error(Errc::shape_mismatch, "model json: layer " + slots[i].first + " has wrong shape");
            }
            *slots[i].second = std::move(t);
        }
        return state;
    } catch (const json::exception& e) {
        throw Error(Errc::parse_error, std::string("model json: ") + e.what());
    }
}

}  // namespace openinc
