#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wattscope/baselines.hpp"
#include "wattscope/characterize.hpp"
#include "wattscope/disagg.hpp"
#include "wattscope/error.hpp"
#include "wattscope/eval.hpp"
#include "wattscope/library.hpp"
#include "wattscope/monitor.hpp"
#include "wattscope/nn/train.hpp"
#include "wattscope/powermodel.hpp"
#include "wattscope/trace.hpp"

namespace py = pybind11;
using namespace wattscope;

namespace {

using Series = std::vector<double>;

py::array_t<double> to_array(const Series& v) {
    py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json from_py(const py::object& o) {
    return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

// Shared handle so Python can hand the same model to several calls.
struct Model {
    std::shared_ptr<const library::DisaggModel> impl;

    std::string type() const { return to_string(library::model_type_of(*impl)); }
};

py::dict profile_dict(const characterize::JobProfile& p) {
    py::dict d;
    d["cov"] = p.cov;
    py::list periods;
    for (const auto& e : p.periods) periods.append(py::make_tuple(e.period_samples, e.score));
    d["periods"] = periods;
    d["score"] = p.dominant_score();
    d["intensity_w"] = p.intensity_w;
    d["variability"] = characterize::to_string(p.cls.variability);
    d["regularity"] = characterize::to_string(p.cls.regularity);
    d["intensity"] = characterize::to_string(p.cls.intensity);
    return d;
}

nn::NetworkConfig preset(const std::string& name) {
    if (name == "full") return nn::full_config();
    if (name == "experiment") return eval::experiment_network();
    if (name == "desk") return nn::desk_config();
    throw Error("nn", "InvalidConfig", "unknown preset '" + name + "'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Power disaggregation core";

    static py::exception<Error> exc(m, "Error", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object err = py::reinterpret_borrow<py::object>(exc)(py::str(e.what()));
            err.attr("name") = e.name();
            PyErr_SetObject(exc.ptr(), err.ptr());
        }
    });

    // powermodel
    py::class_<powermodel::PowerCurve>(m, "PowerCurve")
        .def(py::init<>())
        .def_readwrite("coeffs", &powermodel::PowerCurve::coeffs)
        .def_readwrite("mem_coeff_w_per_gb", &powermodel::PowerCurve::mem_coeff_w_per_gb)
        .def_readwrite("baseload_w", &powermodel::PowerCurve::baseload_w)
        .def_readwrite("peak_w", &powermodel::PowerCurve::peak_w)
        .def("evaluate", &powermodel::PowerCurve::evaluate, py::arg("cpu_util"), py::arg("mem_gb") = 0.0);
    m.def("reference_curve", &powermodel::reference_curve);
    m.def("power_of", &powermodel::power_of, py::arg("curve"), py::arg("cpu_util"), py::arg("mem_gb") = 0.0,
          py::arg("noise_seed") = std::nullopt);
    m.def(
        "fit_power_curve",
        [](const Series& cpu, const Series& mem, const Series& watts) {
            if (cpu.size() != mem.size() || cpu.size() != watts.size()) {
                throw Error("powermodel", "Underdetermined", "sample columns differ in length");
            }
            std::vector<powermodel::PowerSample> s;
            for (std::size_t i = 0; i < cpu.size(); ++i) s.push_back({cpu[i], mem[i], watts[i]});
            return powermodel::fit_power_curve(s);
        },
        py::arg("cpu_util"), py::arg("mem_gb"), py::arg("watts"));

    // trace
    m.def(
        "synthetic_job",
        [](std::size_t length, double target_cov, double mean_power_w, std::optional<int> period_samples,
           double period_score, const std::string& shape, std::uint64_t noise_seed, double cap_w) {
            trace::SyntheticJobSpec spec;
            spec.target_cov = target_cov;
            spec.mean_power_w = mean_power_w;
            spec.period_samples = period_samples;
            spec.period_score_target = period_score;
            if (shape == "square") {
                spec.shape = trace::TemplateShape::Square;
            } else if (shape != "sine") {
                throw Error("trace", "InvalidSpec", "shape must be sine or square");
            }
            spec.noise_seed = noise_seed;
            spec.cap_w = cap_w;
            return to_array(trace::generate_synthetic_job(spec, length).power_w);
        },
        py::arg("length"), py::arg("target_cov"), py::arg("mean_power_w"), py::arg("period_samples") = std::nullopt,
        py::arg("period_score") = 0.0, py::arg("shape") = "sine", py::arg("noise_seed") = 0, py::arg("cap_w") = 200.0);
    m.def(
        "aggregate",
        [](const std::map<std::string, Series>& jobs) {
            std::vector<trace::JobSeries> js;
            for (const auto& [id, p] : jobs) {
                trace::JobSeries s;
                s.job_id = id;
                s.power_w = p;
                js.push_back(std::move(s));
            }
            const auto st = trace::synthesize_server(std::move(js), powermodel::reference_curve());
            return to_array(st.aggregate_w);
        },
        py::arg("jobs"));
    m.def("load_server_trace", [](const std::filesystem::path& dir) {
        const auto st = trace::load_server_trace(dir);
        py::dict jobs;
        for (const auto& j : st.jobs) jobs[py::str(j.job_id)] = to_array(j.power_w);
        return py::make_tuple(to_array(st.aggregate_w), jobs);
    });

    // characterize
    m.def("cov", [](const Series& s) { return characterize::cov(s); });
    m.def("detect_periods", [](const Series& s) {
        std::vector<std::pair<int, double>> out;
        for (const auto& e : characterize::detect_periods(s)) out.emplace_back(e.period_samples, e.score);
        return out;
    });
    m.def(
        "profile", [](const Series& s, double cap_w) { return profile_dict(characterize::profile(s, cap_w)); },
        py::arg("series"), py::arg("cap_w") = 200.0);

    // eval metrics
    m.def("mae", [](const Series& p, const Series& t) { return eval::mae(p, t); }, py::arg("pred"), py::arg("truth"));
    m.def("nmae", [](const Series& p, const Series& t) { return eval::nmae(p, t); }, py::arg("pred"),
          py::arg("truth"));

    // models
    py::class_<Model>(m, "Model")
        .def_property_readonly("type", &Model::type)
        .def(
            "predict_series",
            [](const Model& self, const Series& aggregate) {
                const auto* net = std::get_if<nn::TrainedModel>(self.impl.get());
                if (!net) throw Error("nn", "ShapeMismatch", "predict_series needs a sliding_window model");
                return to_array(nn::predict_series(*net, aggregate));
            },
            py::arg("aggregate"))
        .def(
            "save",
            [](const Model& self, const std::filesystem::path& dir) {
                library::save_model(*self.impl, ModelKey{.model_type = library::model_type_of(*self.impl)}, dir);
            },
            py::arg("dir"));
    m.def("load_model", [](const std::filesystem::path& dir) {
        return Model{std::make_shared<const library::DisaggModel>(library::load_model(dir))};
    });
    m.def(
        "mean_fit",
        [](const std::map<std::string, Series>& data) {
            return Model{std::make_shared<const library::DisaggModel>(baselines::mean_fit(data))};
        },
        py::arg("jobs"));
    m.def(
        "co_fit",
        [](const std::map<std::string, Series>& data, int K) {
            return Model{std::make_shared<const library::DisaggModel>(baselines::co_fit(data, K))};
        },
        py::arg("jobs"), py::arg("states") = 4);
    m.def(
        "train_network",
        [](const Series& aggregate, const Series& target, double cap_w, const std::string& preset_name,
           std::optional<int> epochs, std::optional<int> window, std::uint64_t seed) {
            auto c = preset(preset_name);
            if (epochs) c.epochs = *epochs;
            if (window) c.window = *window;
            c.seed = seed;
            nn::TrainingData data;
            data.cap_w = cap_w;
            data.pairs.push_back({aggregate, target});
            nn::TrainedModel model;
            {
                py::gil_scoped_release release;
                model = nn::train(c, data);
            }
            return Model{std::make_shared<const library::DisaggModel>(std::move(model))};
        },
        py::arg("aggregate"), py::arg("target"), py::arg("cap_w") = 200.0, py::arg("preset") = "desk",
        py::arg("epochs") = std::nullopt, py::arg("window") = std::nullopt, py::arg("seed") = 0);

    // disagg
    m.def(
        "disaggregate",
        [](const Series& aggregate, const std::vector<std::pair<std::string, Model>>& jobs, bool reconcile,
           double cap_w) {
            std::vector<disagg::ResolvedJob> resolved;
            for (const auto& [id, model] : jobs) resolved.push_back({id, model.impl, {}, {}, 0.0});
            disagg::DisaggOptions opt;
            opt.reconcile = reconcile;
            opt.cap_w = cap_w;
            const auto r = disagg::disaggregate(aggregate, resolved, opt);
            py::dict out;
            for (const auto& id : r.job_ids) out[py::str(id)] = to_array(r.per_job_w.at(id));
            return out;
        },
        py::arg("aggregate"), py::arg("jobs"), py::arg("reconcile") = false, py::arg("cap_w") = 200.0);

    // monitor
    py::class_<monitor::MonitorState>(m, "Monitor")
        .def(py::init([](double threshold, int persistence) {
                 return monitor::MonitorState(monitor::MonitorConfig{threshold, persistence, 288});
             }),
             py::arg("threshold") = 0.10, py::arg("persistence") = 12)
        .def_property_readonly("breach_run", &monitor::MonitorState::breach_run)
        .def(
            "observe",
            [](monitor::MonitorState& s, double aggregate_w, const Series& inferred) {
                return std::string(monitor::to_string(s.observe(aggregate_w, inferred)));
            },
            py::arg("aggregate_w"), py::arg("inferred_w"))
        .def(
            "observe_error",
            [](monitor::MonitorState& s, double rel_err) {
                return std::string(monitor::to_string(s.observe_error(rel_err)));
            },
            py::arg("rel_err"));

    // experiments
    m.def("scenario_names", &eval::scenario_names);
    m.def(
        "run_experiment",
        [](const py::dict& config) {
            auto c = from_py(config).get<eval::ScenarioConfig>();
            eval::ExperimentResult r;
            {
                py::gil_scoped_release release;
                r = eval::run_experiment(c);
            }
            return to_py(eval::summary_json(r));
        },
        py::arg("config"));
}
