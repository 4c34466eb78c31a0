#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "nutmeg/baselines.hpp"
#include "nutmeg/dataset.hpp"
#include "nutmeg/imputation.hpp"
#include "nutmeg/inference.hpp"
#include "nutmeg/io.hpp"
#include "nutmeg/metrics.hpp"
#include "nutmeg/pipeline.hpp"
#include "nutmeg/simulator.hpp"

namespace py = pybind11;
using namespace nutmeg;

namespace {

using Record = std::tuple<std::string, std::string, std::string>;

template <class T>
py::array_t<T> to_array(const std::vector<T>& values, std::vector<py::ssize_t> shape) {
    py::array_t<T> out(shape);
    std::copy(values.begin(), values.end(), out.mutable_data());
    return out;
}

// Builds a validated dataset from (item, annotator, label) string triples.
// Without `groups` every annotator joins a single subpopulation "all".
Dataset dataset_from_records(const std::vector<Record>& records,
                             const std::optional<std::unordered_map<std::string, std::string>>& groups,
                             const std::optional<std::vector<std::string>>& labels) {
    AnnotationSet ann;
    if (labels) {
        ann.label_space.labels = *labels;
    } else {
        std::vector<std::string> seen;
        for (const auto& r : records) seen.push_back(std::get<2>(r));
        ann.label_space.labels = io::ordered_labels(seen);
    }
    std::unordered_map<std::string, std::size_t> label_index, item_index, annotator_index;
    for (std::size_t l = 0; l < ann.label_space.size(); ++l) label_index.emplace(ann.label_space.labels[l], l);
    std::vector<std::string> issues;
    for (const auto& [item, annotator, label] : records) {
        const auto l = label_index.find(label);
        if (l == label_index.end()) {
            issues.push_back("unknown label '" + label + "'");
            continue;
        }
        auto [it, fresh] = item_index.emplace(item, ann.items.size());
        if (fresh) ann.items.push_back(item);
        auto [jt, fresh_a] = annotator_index.emplace(annotator, ann.annotators.size());
        if (fresh_a) ann.annotators.push_back(annotator);
        ann.records.push_back({it->second, jt->second, l->second});
    }
    if (!issues.empty()) throw ValidationError(std::move(issues));

    if (!groups) {
        const auto single = SubpopulationMap::single(ann);
        return Dataset::validate(std::move(ann), single);
    }
    SubpopulationMap subpops;
    std::unordered_map<std::string, std::size_t> group_index;
    // Group order follows first appearance among the annotated annotators.
    for (const auto& a : ann.annotators) {
        const auto g = groups->find(a);
        if (g == groups->end()) continue;
        auto [it, fresh] = group_index.emplace(g->second, subpops.subpopulations.size());
        if (fresh) subpops.subpopulations.push_back(g->second);
        subpops.assignment.emplace(a, it->second);
    }
    return Dataset::validate(std::move(ann), subpops);
}

std::vector<Record> dataset_records(const AnnotationSet& ann) {
    std::vector<Record> out;
    out.reserve(ann.records.size());
    for (const auto& r : ann.records)
        out.emplace_back(ann.items[r.item], ann.annotators[r.annotator], ann.label_space.labels[r.label]);
    return out;
}

py::array_t<double> probabilities(const PosteriorTable& t) {
    return to_array(t.raw(), {py::ssize_t(t.n_items()), py::ssize_t(t.n_subpops()), py::ssize_t(t.n_labels())});
}

std::vector<std::size_t> flat_truth(const py::array_t<std::size_t, py::array::c_style | py::array::forcecast>& truth,
                                    const PosteriorTable& table) {
    if (truth.ndim() != 2 || std::size_t(truth.shape(0)) != table.n_items() ||
        std::size_t(truth.shape(1)) != table.n_subpops())
        throw ValidationError({"truth must have shape (n_items, n_subpops)"});
    return {truth.data(), truth.data() + truth.size()};
}

py::object optional_value(const std::optional<double>& v) { return v ? py::object(py::float_(*v)) : py::object(py::none()); }

py::list optional_list(const std::vector<std::optional<double>>& values) {
    py::list out;
    for (const auto& v : values) out.append(optional_value(v));
    return out;
}

}  // namespace

PYBIND11_MODULE(_nutmeg, m) {
    m.doc() = "Subpopulation-aware label aggregation";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
    py::register_exception<io::ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<io::IoError>(m, "IoError", PyExc_OSError);

    py::class_<SimConfig>(m, "SimConfig")
        .def(py::init([](py::kwargs kwargs) {
            SimConfig c;
            for (const auto& [key, value] : kwargs) {
                const auto name = key.cast<std::string>();
                if (name == "seed") c.seed = value.cast<std::uint64_t>();
                else if (name == "constant_spam_rate") c.constant_spam_rate = value.cast<bool>();
                else set_field(c, name, value.cast<double>());
            }
            return c;
        }))
        .def_readwrite("n_annotators", &SimConfig::n_annotators)
        .def_readwrite("minority_proportion", &SimConfig::minority_proportion)
        .def_readwrite("n_items", &SimConfig::n_items)
        .def_readwrite("n_labels", &SimConfig::n_labels)
        .def_readwrite("global_spam_rate", &SimConfig::global_spam_rate)
        .def_readwrite("divisiveness_rate", &SimConfig::divisiveness_rate)
        .def_readwrite("annotations_per_item", &SimConfig::annotations_per_item)
        .def_readwrite("seed", &SimConfig::seed)
        .def_readwrite("spam_rate_concentration", &SimConfig::spam_rate_concentration)
        .def_readwrite("constant_spam_rate", &SimConfig::constant_spam_rate);

    py::class_<FitConfig>(m, "FitConfig")
        .def(py::init([](int max_iterations, double convergence_tol, int restarts, std::uint64_t seed,
                         std::pair<double, double> theta_prior, double xi_prior, std::vector<double> truth_prior,
                         const std::string& training, int threads) {
                 FitConfig c;
                 c.max_iterations = max_iterations;
                 c.convergence_tol = convergence_tol;
                 c.restarts = restarts;
                 c.seed = seed;
                 c.theta_prior = {theta_prior.first, theta_prior.second};
                 c.xi_prior = xi_prior;
                 c.truth_prior = std::move(truth_prior);
                 if (training == "vb") c.mode = TrainingMode::Variational;
                 else if (training == "map") c.mode = TrainingMode::Smoothed;
                 else throw ValidationError({"training must be 'vb' or 'map'"});
                 c.threads = threads;
                 return c;
             }),
             py::kw_only(), py::arg("max_iterations") = 50, py::arg("convergence_tol") = 1e-6,
             py::arg("restarts") = 10, py::arg("seed") = 0, py::arg("theta_prior") = std::make_pair(0.5, 0.5),
             py::arg("xi_prior") = 0.5, py::arg("truth_prior") = std::vector<double>{}, py::arg("training") = "vb",
             py::arg("threads") = 1)
        .def_readwrite("max_iterations", &FitConfig::max_iterations)
        .def_readwrite("convergence_tol", &FitConfig::convergence_tol)
        .def_readwrite("restarts", &FitConfig::restarts)
        .def_readwrite("seed", &FitConfig::seed)
        .def_readwrite("xi_prior", &FitConfig::xi_prior)
        .def_readwrite("truth_prior", &FitConfig::truth_prior)
        .def_readwrite("threads", &FitConfig::threads);

    py::class_<ImputationPolicy>(m, "ImputationPolicy")
        .def(py::init([](bool leave_missing, std::size_t min_support) {
                 return ImputationPolicy{leave_missing ? ImputationMode::LeaveMissing : ImputationMode::Impute,
                                         min_support};
             }),
             py::kw_only(), py::arg("leave_missing") = false, py::arg("min_support") = 1)
        .def_readwrite("min_support", &ImputationPolicy::min_support);

    py::class_<Dataset>(m, "Dataset")
        .def(py::init(&dataset_from_records), py::arg("records"), py::arg("annotators") = py::none(),
             py::arg("labels") = py::none(),
             "records: (item, annotator, label) triples; annotators: annotator -> subpopulation")
        .def_property_readonly("items", [](const Dataset& d) { return d.annotations().items; })
        .def_property_readonly("annotators", [](const Dataset& d) { return d.annotations().annotators; })
        .def_property_readonly("labels", [](const Dataset& d) { return d.annotations().label_space.labels; })
        .def_property_readonly("subpopulations", &Dataset::subpopulations)
        .def_property_readonly("records", [](const Dataset& d) { return dataset_records(d.annotations()); })
        .def_property_readonly("n_items", &Dataset::n_items)
        .def_property_readonly("n_annotators", &Dataset::n_annotators)
        .def_property_readonly("n_labels", &Dataset::n_labels)
        .def_property_readonly("n_subpops", &Dataset::n_subpops)
        .def_property_readonly("n_records", &Dataset::n_records)
        .def("observed", &Dataset::observed, py::arg("item"), py::arg("subpop"));

    py::class_<PosteriorTable>(m, "PosteriorTable")
        .def_property_readonly("probabilities", &probabilities, "array of shape (n_items, n_subpops, n_labels)")
        .def_property_readonly("decoded",
                               [](const PosteriorTable& t) {
                                   std::vector<std::size_t> d;
                                   for (std::size_t i = 0; i < t.n_items(); ++i)
                                       for (std::size_t k = 0; k < t.n_subpops(); ++k) d.push_back(t.decoded(i, k));
                                   return to_array(d, {py::ssize_t(t.n_items()), py::ssize_t(t.n_subpops())});
                               })
        .def_property_readonly("status",
                               [](const PosteriorTable& t) {
                                   std::vector<std::vector<std::string>> out(t.n_items());
                                   for (std::size_t i = 0; i < t.n_items(); ++i)
                                       for (std::size_t k = 0; k < t.n_subpops(); ++k)
                                           out[i].push_back(to_string(t.status(i, k)));
                                   return out;
                               })
        .def_property_readonly("n_items", &PosteriorTable::n_items)
        .def_property_readonly("n_subpops", &PosteriorTable::n_subpops)
        .def_property_readonly("n_labels", &PosteriorTable::n_labels);

    py::class_<CompetenceTable>(m, "CompetenceTable")
        .def_property_readonly("theta", [](const CompetenceTable& c) {
            return to_array(c.theta, {py::ssize_t(c.n_annotators())});
        })
        .def_property_readonly("xi", [](const CompetenceTable& c) {
            return to_array(c.xi, {py::ssize_t(c.n_annotators()), py::ssize_t(c.n_labels)});
        });

    py::class_<FitResult>(m, "FitResult")
        .def_readonly("posterior", &FitResult::posterior)
        .def_readonly("competence", &FitResult::competence)
        .def_property_readonly("spam_posterior", [](const FitResult& r) {
            return to_array(r.spam_posterior, {py::ssize_t(r.spam_posterior.size())});
        })
        .def_readonly("objective", &FitResult::objective)
        .def_property_readonly("objective_traces", [](const FitResult& r) {
            std::vector<std::vector<double>> out;
            for (const auto& s : r.subpop_fits) out.push_back(s.objective_trace);
            return out;
        })
        .def_property_readonly("chosen_restarts", [](const FitResult& r) {
            std::vector<std::size_t> out;
            for (const auto& s : r.subpop_fits) out.push_back(s.chosen_restart);
            return out;
        });

    py::class_<DawidSkeneFit>(m, "DawidSkeneFit")
        .def_property_readonly("posterior", [](const DawidSkeneFit& f) {
            return to_array(f.result.posterior, {py::ssize_t(f.result.n_items()), py::ssize_t(f.result.n_labels)});
        })
        .def_property_readonly("decoded", [](const DawidSkeneFit& f) {
            return to_array(f.result.decoded, {py::ssize_t(f.result.n_items())});
        })
        .def_property_readonly("confusion", [](const DawidSkeneFit& f) {
            const auto L = py::ssize_t(f.model.n_labels);
            return to_array(f.model.confusion, {py::ssize_t(f.model.confusion.size()) / (L * L), L, L});
        })
        .def_property_readonly("class_prior", [](const DawidSkeneFit& f) {
            return to_array(f.model.class_prior, {py::ssize_t(f.model.class_prior.size())});
        })
        .def_readonly("objective_trace", &DawidSkeneFit::objective_trace)
        .def_readonly("chosen_restart", &DawidSkeneFit::chosen_restart);

    py::class_<SyntheticWorld>(m, "SyntheticWorld")
        .def_readonly("config", &SyntheticWorld::config)
        .def_property_readonly("records", [](const SyntheticWorld& w) { return dataset_records(w.annotations); })
        .def_property_readonly("annotator_subpopulations",
                               [](const SyntheticWorld& w) {
                                   std::unordered_map<std::string, std::string> out;
                                   for (std::size_t j = 0; j < w.annotator_ids.size(); ++j)
                                       out.emplace(w.annotator_ids[j],
                                                   w.subpops.subpopulations[w.annotator_subpop[j]]);
                                   return out;
                               })
        .def_readonly("annotator_ids", &SyntheticWorld::annotator_ids)
        .def_property_readonly("true_spam_rates", [](const SyntheticWorld& w) {
            return to_array(w.true_spam_rates, {py::ssize_t(w.true_spam_rates.size())});
        })
        .def_property_readonly("true_labels", [](const SyntheticWorld& w) {
            return to_array(w.true_labels, {py::ssize_t(w.true_labels.size() / 2), 2});
        })
        .def_readonly("divisive_items", &SyntheticWorld::divisive_items)
        .def("dataset", &SyntheticWorld::dataset);

    m.def("generate", &generate, py::arg("config"), "Generates a synthetic two-group annotation world.");
    m.def("fit", &fit, py::arg("data"), py::arg("config") = FitConfig{},
          py::call_guard<py::gil_scoped_release>(), "Fits the subpopulation model.");
    m.def("mace", &mace, py::arg("data"), py::arg("config") = FitConfig{}, py::call_guard<py::gil_scoped_release>(),
          "Fits the model with all annotators in one group.");
    m.def(
        "majority_vote",
        [](const Dataset& d) {
            const auto r = majority_vote(d);
            return py::make_tuple(to_array(r.posterior, {py::ssize_t(r.n_items()), py::ssize_t(r.n_labels)}),
                                  to_array(r.decoded, {py::ssize_t(r.n_items())}));
        },
        py::arg("data"), "Returns (vote frequencies, decoded labels).");
    m.def(
        "dawid_skene", [](const Dataset& d, const FitConfig& c) { return dawid_skene(d, c); }, py::arg("data"),
        py::arg("config") = FitConfig{}, py::call_guard<py::gil_scoped_release>());
    m.def(
        "impute",
        [](const FitResult& r, const FitConfig& c, const ImputationPolicy& p) { return impute(r, c, p); },
        py::arg("result"), py::arg("config") = FitConfig{}, py::arg("policy") = ImputationPolicy{});
    m.def(
        "aggregate",
        [](const Dataset& d, const std::string& method, const FitConfig& c, const ImputationPolicy& p) {
            auto out = aggregate(d, parse_method(method), c, p);
            py::dict result;
            result["method"] = to_string(out.method);
            result["subpopulations"] = out.subpopulations;
            result["posterior"] = out.posterior;
            result["competence"] = out.competence ? py::cast(*out.competence) : py::none();
            return result;
        },
        py::arg("data"), py::arg("method") = "nutmeg", py::arg("config") = FitConfig{},
        py::arg("policy") = ImputationPolicy{}, "method: nutmeg, mace, majority or dawid-skene");

    m.def(
        "jsd",
        [](const std::vector<double>& p, const std::vector<double>& q, bool base2) {
            if (p.size() != q.size()) throw ValidationError({"distributions differ in length"});
            return jsd(p, q, base2 ? LogBase::Two : LogBase::Natural);
        },
        py::arg("p"), py::arg("q"), py::arg("base2") = false);
    m.def(
        "subpop_accuracy",
        [](const PosteriorTable& t, const py::array_t<std::size_t, py::array::c_style | py::array::forcecast>& truth,
           bool include_imputed) { return optional_list(subpop_accuracy(t, flat_truth(truth, t), include_imputed)); },
        py::arg("table"), py::arg("truth"), py::arg("include_imputed") = true);
    m.def(
        "divisiveness_estimate", [](const PosteriorTable& t) { return optional_value(divisiveness_estimate(t)); },
        py::arg("table"));
    m.def(
        "pearson",
        [](const std::vector<double>& x, const std::vector<double>& y) {
            if (x.size() != y.size()) throw ValidationError({"inputs differ in length"});
            return optional_value(pearson(x, y));
        },
        py::arg("x"), py::arg("y"));
    m.def(
        "competence_correlation",
        [](const CompetenceTable& c, const SyntheticWorld& w) { return optional_value(competence_correlation(c, w)); },
        py::arg("competence"), py::arg("world"));
    m.def(
        "evaluate",
        [](const PosteriorTable& t, const Dataset& d, const SyntheticWorld& w, const CompetenceTable* c) {
            const auto r = evaluate(t, d, w, c);
            py::dict out;
            out["subpopulations"] = r.subpopulations;
            out["accuracy"] = optional_list(r.accuracy);
            out["accuracy_observed"] = optional_list(r.accuracy_observed);
            out["cells_evaluated"] = r.cells_evaluated;
            out["cells_observed"] = r.cells_observed;
            out["divisiveness_estimate"] = optional_value(r.divisiveness_estimate);
            out["competence_pearson"] = optional_value(r.competence_pearson);
            out["jsd"] = optional_list(r.jsd);
            return out;
        },
        py::arg("table"), py::arg("data"), py::arg("world"), py::arg("competence") = nullptr);
}
