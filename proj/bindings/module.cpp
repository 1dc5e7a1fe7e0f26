#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "fixcrew/backend.hpp"
#include "fixcrew/corpus.hpp"
#include "fixcrew/lexer.hpp"
#include "fixcrew/metrics.hpp"
#include "fixcrew/orchestrator.hpp"
#include "fixcrew/prompting.hpp"
#include "fixcrew/retrieval.hpp"

namespace py = pybind11;
using namespace fixcrew;
using nlohmann::json;

namespace {

json py_to_json(const py::handle& obj) {
    if (obj.is_none()) return nullptr;
    if (py::isinstance<py::bool_>(obj)) return obj.cast<bool>();
    if (py::isinstance<py::int_>(obj)) return obj.cast<long long>();
    if (py::isinstance<py::float_>(obj)) return obj.cast<double>();
    if (py::isinstance<py::str>(obj)) return obj.cast<std::string>();
    if (py::isinstance<py::list>(obj) || py::isinstance<py::tuple>(obj)) {
        json arr = json::array();
        for (auto item : obj) arr.push_back(py_to_json(item));
        return arr;
    }
    if (py::isinstance<py::dict>(obj)) {
        json o = json::object();
        for (auto item : obj.cast<py::dict>())
            o[item.first.cast<std::string>()] = py_to_json(item.second);
        return o;
    }
    throw std::invalid_argument("unsupported value for JSON conversion");
}

py::object json_to_py(const json& j) {
    switch (j.type()) {
        case json::value_t::null: return py::none();
        case json::value_t::boolean: return py::bool_(j.get<bool>());
        case json::value_t::number_integer: return py::int_(j.get<long long>());
        case json::value_t::number_unsigned: return py::int_(j.get<unsigned long long>());
        case json::value_t::number_float: return py::float_(j.get<double>());
        case json::value_t::string: return py::str(j.get<std::string>());
        case json::value_t::array: {
            py::list out;
            for (const auto& item : j) out.append(json_to_py(item));
            return out;
        }
        case json::value_t::object: {
            py::dict out;
            for (const auto& [key, value] : j.items()) out[py::str(key)] = json_to_py(value);
            return out;
        }
        default: return py::none();
    }
}

std::vector<BugInstance> instances_from_py(const py::list& records) {
    std::vector<BugInstance> out;
    out.reserve(records.size());
    for (auto item : records) out.push_back(instance_from_json(py_to_json(item)));
    return out;
}

py::list instances_to_py(const std::vector<BugInstance>& xs) {
    py::list out;
    for (const auto& x : xs) out.append(json_to_py(instance_to_json(x)));
    return out;
}

PipelineConfig config_from_py(const py::object& config) {
    return PipelineConfig::from_json(config.is_none() ? json::object() : py_to_json(config));
}

PromptRenderer renderer_from_dir(const py::object& templates_dir) {
    if (templates_dir.is_none()) return PromptRenderer();
    return PromptRenderer(
        PromptTemplateSet::load_dir(templates_dir.cast<std::string>()));
}

json result_with_records(const PipelineResult& res) {
    json j = res.summary_json();
    j.erase("stage");
    j["stages"] = res.stage_sequence();
    json records = json::array();
    for (const auto& rec : res.records) {
        json messages = json::array();
        for (const auto& m : rec.conversation.messages)
            messages.push_back({{"role", std::string(role_name(m.role))},
                                {"content", m.content}});
        records.push_back({{"stage", std::string(stage_name(rec.stage))},
                           {"turn", rec.turn},
                           {"messages", messages},
                           {"has_response", rec.has_response}});
    }
    j["records"] = records;
    return j;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "stage-wise multi-agent bug fixing harness (C++ core)";
    m.attr("__version__") = FIXCREW_VERSION_STR;

    m.def(
        "tokenize",
        [](const std::string& text) { return token_texts(text); },
        py::arg("text"), "lex code into token texts");

    m.def(
        "tokenize_kinds",
        [](const std::string& text) {
            std::vector<std::pair<std::string, std::string>> out;
            for (const auto& t : tokenize_code(text))
                out.emplace_back(t.text, std::string(token_kind_name(t.kind)));
            return out;
        },
        py::arg("text"), "lex code into (text, kind) pairs");

    m.def(
        "parse_dataset",
        [](const std::string& path) {
            auto parsed = parse_dataset(path);
            py::list rejections;
            for (const auto& r : parsed.rejections)
                rejections.append(py::make_tuple(r.line_number, r.id, r.reason));
            return py::make_tuple(instances_to_py(parsed.instances), rejections);
        },
        py::arg("path"), "read a JSONL dataset; returns (instances, rejections)");

    m.def(
        "validate_instance",
        [](const py::dict& record) -> py::object {
            auto reason = validate_instance(instance_from_json(py_to_json(record)));
            if (reason) return py::str(*reason);
            return py::none();
        },
        py::arg("record"));

    m.def(
        "filter_instances",
        [](const py::list& records, std::size_t max_tokens) {
            auto res = filter_instances(instances_from_py(records), max_tokens);
            return py::make_tuple(instances_to_py(res.kept), instances_to_py(res.dropped));
        },
        py::arg("records"), py::arg("max_tokens") = 150);

    m.def(
        "split_dataset",
        [](const py::list& records, std::uint64_t seed, const py::tuple& ratios) {
            SplitRatios r;
            if (!ratios.is_none() && ratios.size() == 3) {
                r.train = ratios[0].cast<double>();
                r.valid = ratios[1].cast<double>();
                r.test = ratios[2].cast<double>();
            }
            auto split = split_dataset(instances_from_py(records), r, seed);
            py::dict out;
            out["train"] = instances_to_py(split.train);
            out["valid"] = instances_to_py(split.valid);
            out["test"] = instances_to_py(split.test);
            out["seed"] = split.seed;
            return out;
        },
        py::arg("records"), py::arg("seed"),
        py::arg("ratios") = py::make_tuple(0.8, 0.1, 0.1));

    py::class_<Bm25Index>(m, "Bm25Index")
        .def_static(
            "build",
            [](const py::list& corpus, double k1, double b) {
                return Bm25Index::build(instances_from_py(corpus), {k1, b});
            },
            py::arg("corpus"), py::arg("k1") = 1.2, py::arg("b") = 0.75)
        .def("score", &Bm25Index::score, py::arg("query_terms"), py::arg("doc_id"))
        .def(
            "top_k",
            [](const Bm25Index& index, const py::dict& query, std::size_t k) {
                py::list out;
                for (const auto& d :
                     index.top_k(instance_from_json(py_to_json(query)), k)) {
                    py::dict item;
                    item["instance_id"] = d.instance_id;
                    item["buggy_method"] = d.buggy_method;
                    item["buggy_line"] = d.buggy_line;
                    item["fixed_line"] = d.fixed_line;
                    item["score"] = d.score;
                    out.append(item);
                }
                return out;
            },
            py::arg("query"), py::arg("k") = 3)
        .def_property_readonly("doc_count", &Bm25Index::doc_count)
        .def_property_readonly("avgdl", &Bm25Index::avgdl);

    m.def("exact_match", &exact_match, py::arg("candidate"), py::arg("reference"));
    m.def("bleu4", &bleu4, py::arg("candidate"), py::arg("reference"));
    m.def(
        "levenshtein",
        [](const std::string& c, const std::string& r) { return levenshtein(c, r); },
        py::arg("candidate"), py::arg("reference"));
    m.def("fix_at_k", &fix_at_k, py::arg("results"), py::arg("k") = 1,
          "results: [(reference, [candidates...]), ...] -> percentage");

    m.def(
        "evaluate",
        [](const py::list& inputs) {
            std::vector<EvalInput> converted;
            for (auto item : inputs) {
                auto t = item.cast<py::tuple>();
                converted.push_back({t[0].cast<std::string>(), t[1].cast<std::string>(),
                                     t[2].cast<std::string>()});
            }
            return json_to_py(evaluate(converted).to_json());
        },
        py::arg("inputs"), "inputs: [(instance_id, candidate, reference), ...]");

    m.def(
        "overlap",
        [](const py::list& per_model_fixed) {
            std::vector<std::pair<std::string, std::set<std::string>>> sets;
            for (auto item : per_model_fixed) {
                auto t = item.cast<py::tuple>();
                std::set<std::string> ids;
                for (auto id : t[1]) ids.insert(id.cast<std::string>());
                sets.emplace_back(t[0].cast<std::string>(), std::move(ids));
            }
            auto matrix = overlap_matrix(sets);
            py::dict out;
            out["models"] = matrix.models;
            out["uniques"] = matrix.uniques;
            py::list rates;
            for (const auto& row : matrix.rates) {
                py::list r;
                for (const auto& cell : row)
                    r.append(cell ? py::object(py::float_(*cell)) : py::none());
                rates.append(r);
            }
            out["rates"] = rates;
            out["csv"] = overlap_csv(matrix);
            return out;
        },
        py::arg("per_model_fixed"), "per_model_fixed: [(name, [fixed ids...]), ...]");

    m.def("extract_patch", &extract_patch, py::arg("text"));
    m.def(
        "parse_verdict",
        [](const std::string& text) {
            auto v = parse_verdict(text);
            return py::make_tuple(v.passed, v.feedback);
        },
        py::arg("text"));

    m.def(
        "run_pipeline",
        [](const py::dict& instance, const py::dict& script, const py::object& config,
           const py::object& corpus, const py::object& templates_dir) {
            auto renderer = renderer_from_dir(templates_dir);
            auto cfg = config_from_py(config);
            MockBackend backend = MockBackend::from_json(py_to_json(script));
            std::optional<Bm25Index> index;
            if (!corpus.is_none())
                index = Bm25Index::build(instances_from_py(corpus.cast<py::list>()));
            auto res = run_pipeline(instance_from_json(py_to_json(instance)), cfg, backend,
                                    index ? &*index : nullptr, renderer);
            return json_to_py(result_with_records(res));
        },
        py::arg("instance"), py::arg("script"), py::arg("config") = py::none(),
        py::arg("corpus") = py::none(), py::arg("templates_dir") = py::none(),
        "execute the staged pipeline for one instance against a mock script");

    m.def(
        "run_benchmark",
        [](const py::list& instances, const py::dict& script, const std::string& run_dir,
           const py::object& config, const py::object& corpus, int workers, bool resume,
           const py::object& templates_dir) {
            auto renderer = renderer_from_dir(templates_dir);
            auto cfg = config_from_py(config);
            MockBackend backend = MockBackend::from_json(py_to_json(script));
            std::optional<Bm25Index> index;
            if (!corpus.is_none())
                index = Bm25Index::build(instances_from_py(corpus.cast<py::list>()));
            BenchmarkOptions opts;
            opts.run_dir = run_dir;
            opts.workers = workers;
            opts.resume = resume;
            auto results = run_benchmark(instances_from_py(instances), cfg, backend,
                                         index ? &*index : nullptr, renderer, opts);
            py::list out;
            for (const auto& r : results) {
                json j = r.summary_json();
                j.erase("stage");
                j["stages"] = r.stage_sequence();
                out.append(json_to_py(j));
            }
            return out;
        },
        py::arg("instances"), py::arg("script"), py::arg("run_dir"),
        py::arg("config") = py::none(), py::arg("corpus") = py::none(),
        py::arg("workers") = 1, py::arg("resume") = false,
        py::arg("templates_dir") = py::none(),
        "run the pipeline over many instances with a mock script, persisting transcripts");
}
