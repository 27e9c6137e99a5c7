#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <functional>
#include <sstream>

#include "openinc/experiment.hpp"
#include "openinc/losses.hpp"
#include "openinc/metrics.hpp"
#include "openinc/osr.hpp"

namespace py = pybind11;
using namespace openinc;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
    if (a.ndim() != 2) {
        throw py::value_error("expected a 2-D array");
    }
    const auto r = static_cast<std::size_t>(a.shape(0));
    const auto c = static_cast<std::size_t>(a.shape(1));
    return Tensor::matrix(r, c, std::vector<double>(a.data(), a.data() + r * c));
}

Array to_array(const Tensor& t) {
    Array out({t.rows(), t.cols()});
    std::copy(t.data().begin(), t.data().end(), out.mutable_data());
    return out;
}

double scalar(const std::function<Var(Tape&)>& build) {
    Tape tape;
    return build(tape).value().item();
}

py::dict report_dict(const SessionReport& r) {
    py::dict d;
    d["session"] = r.session;
    d["classes"] = r.classes;
    d["accuracy"] = r.accuracy;
    d["auroc"] = r.auroc;
    d["s_intra"] = r.s_intra;
    d["s_inter"] = r.s_inter;
    d["r_s"] = r.r_s;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Class-incremental open-set recognition core";

    static py::exception<Error> error(m, "OpenIncError", PyExc_RuntimeError);
    static py::exception<ValidationError> validation(m, "ConfigError", error.ptr());
    static py::exception<SessionFailure> session(m, "SessionFailure", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) {
                std::rethrow_exception(p);
            }
        } catch (const ValidationError& e) {
            validation(e.what());
        } catch (const Error& e) {
            error(e.what());
        } catch (const SessionFailure& e) {
            session(e.what());
        }
    });

    m.def(
        "generate_blobs",
        [](std::size_t num_classes, std::size_t samples_per_class, std::size_t input_dim, double center_radius,
           double sigma, std::uint64_t seed) {
            const Dataset d =
                generate_blobs(BlobSpec{num_classes, samples_per_class, input_dim, center_radius, sigma, seed});
            std::vector<std::string> split;
            for (Split s : d.split) {
                split.emplace_back(s == Split::train ? "train" : "test");
            }
            py::dict out;
            out["inputs"] = to_array(d.inputs);
            out["labels"] = d.labels;
            out["split"] = split;
            out["fingerprint"] = d.fingerprint;
            return out;
        },
        py::arg("num_classes") = 10, py::arg("samples_per_class") = 200, py::arg("input_dim") = 20,
        py::arg("center_radius") = 10.0, py::arg("sigma") = 1.0, py::arg("seed") = 0);

    m.def("plan_sessions", [](std::size_t num_classes, std::size_t per_session, std::size_t outliers,
                              std::uint64_t seed) { return plan_sessions(num_classes, per_session, outliers, seed).sessions; });

    m.def(
        "supcon_loss",
        [](const Array& proj, const std::vector<int>& labels, double tau) {
            const Tensor p = to_tensor(proj);
            return scalar([&](Tape& t) { return supcon_loss(t.constant(p), labels, tau).loss; });
        },
        py::arg("projections"), py::arg("labels"), py::arg("tau") = 0.05);
    m.def("ce_loss", [](const Array& logits, const std::vector<std::size_t>& targets) {
        const Tensor l = to_tensor(logits);
        return scalar([&](Tape& t) { return ce_loss(t.constant(l), targets); });
    });
    m.def(
        "response_kd_loss",
        [](const Array& student, const Array& teacher, double temperature) {
            const Tensor s = to_tensor(student);
            const Tensor te = to_tensor(teacher);
            return scalar([&](Tape& t) { return response_kd_loss(t.constant(s), te, temperature); });
        },
        py::arg("student_logits"), py::arg("teacher_logits"), py::arg("temperature") = 2.0);
    m.def(
        "rkd_loss",
        [](const Array& teacher, const Array& student, double lambda_dis, std::size_t triplet_cap, std::uint64_t seed) {
            const Tensor te = to_tensor(teacher);
            const Tensor s = to_tensor(student);
            Rng rng(seed);
            const auto triplets = sample_triplets(s.rows(), triplet_cap, rng);
            const auto pairs = all_pairs(s.rows());
            return scalar([&](Tape& t) { return distill_loss(te, t.constant(s), lambda_dis, triplets, pairs).loss; });
        },
        py::arg("teacher"), py::arg("student"), py::arg("lambda_dis") = 0.5, py::arg("triplet_cap") = 5000,
        py::arg("seed") = 0);

    m.def("auroc", [](const std::vector<double>& in, const std::vector<double>& out) { return auroc(in, out); },
          py::arg("inlier_scores"), py::arg("outlier_scores"));
    m.def("osr_score", [](const std::vector<double>& sims) {
        const OsrScore s = osr_score(sims);
        return py::make_tuple(s.sc_osr, s.predicted);
    });
    m.def(
        "knn_class_similarity",
        [](const std::vector<double>& z, const std::map<int, Array>& exemplars, std::size_t k) {
            ExemplarStore store(SIZE_MAX);
            for (const auto& [cls, arr] : exemplars) {
                const Tensor f = to_tensor(arr);
                for (std::size_t r = 0; r < f.rows(); ++r) {
                    const auto row = f.row(r);
                    store.classes()[cls].push_back(Exemplar{{row.begin(), row.end()}, {row.begin(), row.end()}, r, 0});
                }
            }
            return knn_class_similarity(z, store, k);
        },
        py::arg("z"), py::arg("exemplars"), py::arg("k_nn") = 10);
    m.def("isometric_select", [](const Array& features, std::size_t quota) {
        const IsometricSelection s = isometric_select(to_tensor(features), quota);
        return py::make_tuple(s.indices, s.ranks);
    });
    m.def("spread_report", [](const Array& features, const std::vector<int>& labels) {
        const SpreadReport r = spread_report(to_tensor(features), labels);
        py::dict d;
        d["s_intra"] = r.s_intra;
        d["s_inter"] = r.s_inter;
        d["r_s"] = r.r_s;
        return d;
    });

    m.def(
        "run_method",
        [](const std::string& config_json, std::size_t method_index, std::uint64_t seed) {
            const ExperimentConfig cfg = parse_config_text(config_json);
            RunConfig rc = cfg.methods.at(method_index).config;
            rc.seed = seed;
            const Dataset data = load_dataset(cfg);
            RunResult result;
            {
                py::gil_scoped_release release;
                result = run_method(rc, data, make_plan(cfg, data, seed));
            }
            py::list reports;
            for (const SessionArtifacts& s : result.sessions) {
                reports.append(report_dict(s.report));
            }
            return reports;
        },
        py::arg("config_json"), py::arg("method_index") = 0, py::arg("seed") = 1);
    m.def(
        "run_experiment",
        [](const std::string& config_json, std::size_t threads) {
            const ExperimentConfig cfg = parse_config_text(config_json);
            std::ostringstream log;
            int code = 0;
            {
                py::gil_scoped_release release;
                code = run_experiment(cfg, log, ExperimentOptions{true, threads});
            }
            return py::make_tuple(code, log.str());
        },
        py::arg("config_json"), py::arg("threads") = 0);
    m.def("validate_config", [](const std::string& config_json) { parse_config_text(config_json); });
}
