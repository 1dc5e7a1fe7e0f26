#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "fixcrew/backend.hpp"
#include "fixcrew/corpus.hpp"
#include "fixcrew/metrics.hpp"
#include "fixcrew/orchestrator.hpp"
#include "fixcrew/prompting.hpp"
#include "fixcrew/retrieval.hpp"
#include "fixcrew/util.hpp"

using namespace fixcrew;
using nlohmann::json;
namespace fs = std::filesystem;

#ifndef FIXCREW_VERSION
#define FIXCREW_VERSION "0.0.0"
#endif

namespace {

struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

SplitRatios parse_ratios(const std::string& csv) {
    std::vector<double> parts;
    std::string token;
    std::istringstream ss(csv);
    while (std::getline(ss, token, ',')) {
        try {
            parts.push_back(std::stod(token));
        } catch (const std::exception&) {
            throw InputError("invalid ratio value: " + token);
        }
    }
    if (parts.size() != 3) throw InputError("--ratios expects three comma-separated values");
    return {parts[0], parts[1], parts[2]};
}

std::vector<int> parse_turns_list(const std::string& csv) {
    std::vector<int> out;
    std::string token;
    std::istringstream ss(csv);
    while (std::getline(ss, token, ',')) {
        try {
            out.push_back(std::stoi(token));
        } catch (const std::exception&) {
            throw InputError("invalid turns value: " + token);
        }
        if (out.back() < 0) throw InputError("turns must be >= 0");
    }
    if (out.empty()) throw InputError("--turns expects a comma-separated list");
    return out;
}

std::vector<BugInstance> load_instances(const fs::path& path, const char* what,
                                        bool report_rejections = true) {
    if (!fs::exists(path)) throw InputError(std::string(what) + " file not found: " + path.string());
    auto parsed = parse_dataset(path);
    if (report_rejections && !parsed.rejections.empty()) {
        std::cerr << what << ": rejected " << parsed.rejections.size() << " malformed record(s)\n";
        for (std::size_t i = 0; i < std::min<std::size_t>(5, parsed.rejections.size()); ++i) {
            const auto& r = parsed.rejections[i];
            std::cerr << "  line " << r.line_number << " (" << (r.id.empty() ? "?" : r.id)
                      << "): " << r.reason << "\n";
        }
    }
    if (parsed.instances.empty())
        throw InputError(std::string(what) + " contains no valid instances: " + path.string());
    return std::move(parsed.instances);
}

// flags > config file > defaults
struct RunFlags {
    std::string config_path;
    std::string backend_kind;
    std::string script;
    std::string endpoint;
    std::string model;
    std::string api_key_env;
    std::string templates_dir;
    int workers = 0;
    bool resume = false;
};

struct ResolvedConfigs {
    PipelineConfig pipeline;
    BackendConfig backend;
    PromptTemplateSet templates;
    int workers;
};

ResolvedConfigs resolve_configs(const RunFlags& flags) {
    json pipeline_json = json::object();
    json backend_json = json::object();
    if (!flags.config_path.empty()) {
        if (!fs::exists(flags.config_path))
            throw InputError("config file not found: " + flags.config_path);
        json cfg = json::parse(read_text_file(flags.config_path));
        if (cfg.contains("pipeline")) pipeline_json = cfg.at("pipeline");
        if (cfg.contains("backend")) backend_json = cfg.at("backend");
    }
    if (!flags.backend_kind.empty()) backend_json["kind"] = flags.backend_kind;
    if (!flags.script.empty()) backend_json["script_path"] = flags.script;
    if (!flags.endpoint.empty()) backend_json["endpoint"] = flags.endpoint;
    if (!flags.model.empty()) backend_json["model_name"] = flags.model;
    if (!flags.api_key_env.empty()) backend_json["api_key_env"] = flags.api_key_env;

    ResolvedConfigs out{PipelineConfig::from_json(pipeline_json),
                        BackendConfig::from_json(backend_json),
                        flags.templates_dir.empty()
                            ? PromptTemplateSet::builtin()
                            : PromptTemplateSet::load_dir(flags.templates_dir),
                        flags.workers};
    if (out.workers <= 0)
        out.workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (out.backend.kind == BackendConfig::Kind::Mock && out.backend.script_path.empty())
        throw InputError("mock backend requires --script");
    return out;
}

Bm25Index load_or_build_index(const fs::path& train_path,
                              const std::vector<BugInstance>& train) {
    fs::path cache = train_path;
    cache += ".bm25";
    const auto hash = corpus_content_hash(train);
    if (auto cached = Bm25Index::load(cache, hash)) return std::move(*cached);
    auto index = Bm25Index::build(train);
    try {
        index.save(cache);
    } catch (const std::exception& e) {
        std::cerr << "warning: could not write index cache: " << e.what() << "\n";
    }
    return index;
}

int report_failures(const std::vector<PipelineResult>& results) {
    std::size_t failed = 0;
    for (const auto& r : results)
        if (r.status == PipelineResult::Status::Failed) ++failed;
    if (failed == 0) return 0;
    std::cerr << failed << " of " << results.size() << " instance(s) failed:\n";
    std::size_t shown = 0;
    for (const auto& r : results) {
        if (r.status != PipelineResult::Status::Failed) continue;
        std::cerr << "  " << r.instance_id << "  stage=" << r.failed_stage << "  "
                  << r.failure_reason << "\n";
        if (++shown == 20) {
            std::cerr << "  ...\n";
            break;
        }
    }
    return 1;
}

json run_manifest(const ResolvedConfigs& cfg, const fs::path& train_path,
                  const fs::path& test_path) {
    json manifest{{"tool", std::string("fixcrew ") + FIXCREW_VERSION},
                  {"created", iso8601_now()},
                  {"pipeline", cfg.pipeline.to_json()},
                  {"backend", cfg.backend.to_json()},
                  {"workers", cfg.workers},
                  {"dataset_hashes",
                   {{"train", hex64(hash_file(train_path))},
                    {"test", hex64(hash_file(test_path))}}},
                  {"templates_hash", hex64(cfg.templates.content_hash())}};
    if (!cfg.backend.script_path.empty() && fs::exists(cfg.backend.script_path))
        manifest["script_hash"] = hex64(hash_file(cfg.backend.script_path));
    return manifest;
}

std::vector<PipelineResult> execute_run(const fs::path& run_dir, const json& manifest,
                                        const std::vector<BugInstance>& test,
                                        const PipelineConfig& pipeline, ChatBackend& backend,
                                        const Bm25Index* index, const PromptRenderer& renderer,
                                        int workers, bool resume) {
    fs::create_directories(run_dir);
    write_text_file(run_dir / "run.json", manifest.dump(2) + "\n");
    BenchmarkOptions opts;
    opts.run_dir = run_dir;
    opts.workers = workers;
    opts.resume = resume;
    return run_benchmark(test, pipeline, backend, index, renderer, opts);
}

std::map<std::string, std::string> reference_map(const std::vector<BugInstance>& test) {
    std::map<std::string, std::string> refs;
    for (const auto& x : test) refs[x.id] = x.fixed_line;
    return refs;
}

std::vector<EvalInput> eval_inputs_from_results(const fs::path& results_path,
                                                const std::map<std::string, std::string>& refs) {
    if (!fs::exists(results_path))
        throw InputError("results file not found: " + results_path.string());
    std::vector<EvalInput> inputs;
    for (const auto& line : split_lines(read_text_file(results_path))) {
        if (is_blank(line)) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) throw InputError("malformed results line in " + results_path.string());
        const auto id = j.value("instance_id", "");
        auto it = refs.find(id);
        if (it == refs.end())
            throw InputError("instance " + id + " missing from the reference split");
        inputs.push_back({id, j.value("final_patch", ""), it->second});
    }
    if (inputs.empty()) throw InputError("no results in " + results_path.string());
    return inputs;
}

void print_report(const EvalReport& report) {
    std::cout << "n: " << report.n << "\n";
    std::cout << "Fix@1 (%)  BLEU-4  Levenshtein Distance\n";
    std::cout << format_fixed(report.fix_at_k, 2) << "  "
              << format_fixed(round_half_up(report.mean_bleu4 * 100.0, 2), 2) << "  "
              << format_fixed(round_half_up(report.mean_lev, 2), 2) << "\n";
}

int cmd_prepare(const std::string& dataset, const std::string& out_dir, std::uint64_t seed,
                const std::string& ratios_csv, std::size_t max_tokens) {
    if (!fs::exists(dataset)) throw InputError("dataset file not found: " + dataset);
    const auto ratios = parse_ratios(ratios_csv);

    auto parsed = parse_dataset(dataset);
    auto filtered = filter_instances(parsed.instances, max_tokens);
    auto split = split_dataset(filtered.kept, ratios, seed);

    fs::create_directories(out_dir);
    const fs::path out(out_dir);
    write_dataset(out / "train.jsonl", split.train);
    write_dataset(out / "valid.jsonl", split.valid);
    write_dataset(out / "test.jsonl", split.test);

    auto repo_list = [](const std::vector<BugInstance>& xs) {
        std::set<std::string> repos;
        for (const auto& x : xs) repos.insert(x.repo);
        return json(repos);
    };
    json rejections = json::array();
    for (const auto& r : parsed.rejections)
        rejections.push_back({{"line", r.line_number}, {"id", r.id}, {"reason", r.reason}});
    json manifest{{"tool", std::string("fixcrew ") + FIXCREW_VERSION},
                  {"created", iso8601_now()},
                  {"input", dataset},
                  {"input_hash", hex64(hash_file(dataset))},
                  {"seed", seed},
                  {"ratios", {ratios.train, ratios.valid, ratios.test}},
                  {"max_tokens", max_tokens},
                  {"prng", "fisher-yates over std::mt19937_64, index = next() mod (i+1)"},
                  {"counts",
                   {{"parsed", parsed.instances.size()},
                    {"rejected", parsed.rejections.size()},
                    {"kept", filtered.kept.size()},
                    {"dropped", filtered.dropped.size()},
                    {"train", split.train.size()},
                    {"valid", split.valid.size()},
                    {"test", split.test.size()}}},
                  {"repos",
                   {{"train", repo_list(split.train)},
                    {"valid", repo_list(split.valid)},
                    {"test", repo_list(split.test)}}},
                  {"rejections", rejections}};
    write_text_file(out / "manifest.json", manifest.dump(2) + "\n");

    std::cout << "parsed " << parsed.instances.size() << " instance(s), rejected "
              << parsed.rejections.size() << "\n";
    std::cout << "kept " << filtered.kept.size() << " (<= " << max_tokens
              << " tokens), dropped " << filtered.dropped.size() << "\n";
    std::cout << "split seed=" << seed << ": train=" << split.train.size()
              << " valid=" << split.valid.size() << " test=" << split.test.size() << "\n";
    std::cout << "wrote " << (out / "train.jsonl").string() << ", valid.jsonl, test.jsonl, "
              << "manifest.json\n";
    return 0;
}

int cmd_run(const std::string& test_path, const std::string& train_path,
            const std::string& out_dir, const RunFlags& flags) {
    auto cfg = resolve_configs(flags);
    auto test = load_instances(test_path, "test split");
    auto train = load_instances(train_path, "train corpus");

    std::optional<Bm25Index> index;
    if (cfg.pipeline.enable_diagnosis) index = load_or_build_index(train_path, train);

    auto audit = std::make_shared<AuditLog>(fs::path(out_dir) / "audit.jsonl");
    auto backend = make_backend(cfg.backend, audit);
    PromptRenderer renderer(cfg.templates);

    auto results = execute_run(out_dir, run_manifest(cfg, train_path, test_path), test,
                               cfg.pipeline, *backend, index ? &*index : nullptr, renderer,
                               cfg.workers, flags.resume);
    std::cout << "run complete: " << results.size() << " instance(s) in " << out_dir << "\n";
    return report_failures(results);
}

struct AblationRow {
    std::string name;
    PipelineConfig cfg;
};

int cmd_ablate(const std::string& test_path, const std::string& train_path,
               const std::string& out_dir, const std::string& turns_csv, const RunFlags& flags) {
    auto cfg = resolve_configs(flags);
    auto test = load_instances(test_path, "test split");
    auto train = load_instances(train_path, "train corpus");
    auto index = load_or_build_index(train_path, train);
    PromptRenderer renderer(cfg.templates);

    auto turns = parse_turns_list(turns_csv);
    std::sort(turns.rbegin(), turns.rend());  // largest first so later rows replay it

    std::vector<AblationRow> rows;
    for (int t : turns) {
        PipelineConfig c = cfg.pipeline;
        c.enable_tester = c.enable_diagnosis = c.enable_reviewer = true;
        c.max_turns = t;
        rows.push_back({"turns_" + std::to_string(t), c});
    }
    const int full_turns = cfg.pipeline.max_turns;
    auto ladder = [&](const std::string& name, bool tester, bool diagnosis, bool reviewer) {
        PipelineConfig c = cfg.pipeline;
        c.enable_tester = tester;
        c.enable_diagnosis = diagnosis;
        c.enable_reviewer = reviewer;
        c.max_turns = full_turns;
        rows.push_back({name, c});
    };
    ladder("ladder_full", true, true, true);
    ladder("ladder_tester_diagnosis", true, true, false);
    ladder("ladder_tester", true, false, false);
    ladder("ladder_none", false, false, false);

    auto audit = std::make_shared<AuditLog>(fs::path(out_dir) / "audit.jsonl");
    auto base_backend = make_backend(cfg.backend, audit);
    const auto refs = reference_map(test);

    int exit_code = 0;
    std::vector<fs::path> transcript_pool;
    std::cout << "configuration  Fix@1 (%)  BLEU-4  Levenshtein Distance\n";
    for (const auto& row : rows) {
        auto replay = std::make_shared<ReplayBackend>(base_backend);
        for (const auto& dir : transcript_pool) replay->load_transcripts_dir(dir);

        const fs::path run_dir = fs::path(out_dir) / row.name;
        json manifest = run_manifest(cfg, train_path, test_path);
        manifest["pipeline"] = row.cfg.to_json();
        manifest["ablation_row"] = row.name;
        auto results = execute_run(run_dir, manifest, test, row.cfg, *replay,
                                   row.cfg.enable_diagnosis ? &index : nullptr, renderer,
                                   cfg.workers, flags.resume);
        transcript_pool.push_back(run_dir / "transcripts");

        std::vector<EvalInput> inputs;
        for (std::size_t i = 0; i < results.size(); ++i)
            inputs.push_back({results[i].instance_id, results[i].final_patch,
                              refs.at(results[i].instance_id)});
        auto report = evaluate(inputs);
        std::cout << row.name << "  " << format_fixed(report.fix_at_k, 2) << "  "
                  << format_fixed(round_half_up(report.mean_bleu4 * 100.0, 2), 2) << "  "
                  << format_fixed(round_half_up(report.mean_lev, 2), 2) << "\n";
        for (const auto& r : results)
            if (r.status == PipelineResult::Status::Failed) exit_code = 1;
    }
    return exit_code;
}

int cmd_eval(const std::string& run_dir, const std::string& test_path, std::string out_path) {
    auto test = load_instances(test_path, "reference split", false);
    auto inputs = eval_inputs_from_results(fs::path(run_dir) / "results.jsonl",
                                           reference_map(test));
    auto report = evaluate(inputs);
    if (out_path.empty()) out_path = (fs::path(run_dir) / "report.json").string();
    write_text_file(out_path, report.to_json().dump(2) + "\n");
    print_report(report);
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

int cmd_overlap(const std::vector<std::string>& run_dirs, const std::string& names_csv,
                const std::string& test_path, const std::string& out_path) {
    if (run_dirs.size() < 2) throw InputError("overlap needs at least two --run directories");
    std::vector<std::string> names;
    if (!names_csv.empty()) {
        std::string token;
        std::istringstream ss(names_csv);
        while (std::getline(ss, token, ',')) names.push_back(token);
        if (names.size() != run_dirs.size())
            throw InputError("--names count must match the number of --run directories");
    } else {
        for (const auto& dir : run_dirs)
            names.push_back(fs::path(dir).filename().string());
    }

    auto test = load_instances(test_path, "reference split", false);
    const auto refs = reference_map(test);

    std::vector<std::pair<std::string, std::set<std::string>>> fixed_sets;
    for (std::size_t i = 0; i < run_dirs.size(); ++i) {
        auto inputs = eval_inputs_from_results(fs::path(run_dirs[i]) / "results.jsonl", refs);
        std::set<std::string> fixed;
        for (const auto& in : inputs)
            if (exact_match(in.candidate, in.reference)) fixed.insert(in.instance_id);
        fixed_sets.emplace_back(names[i], std::move(fixed));
    }

    auto csv = overlap_csv(overlap_matrix(fixed_sets));
    write_text_file(out_path, csv);
    std::cout << csv;
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stage-wise multi-agent bug fixing harness"};
    app.set_version_flag("--version", std::string("fixcrew ") + FIXCREW_VERSION);
    app.require_subcommand(1);

    // prepare
    auto* prepare = app.add_subcommand("prepare", "parse, filter and split a JSONL dataset");
    std::string p_dataset, p_out, p_ratios = "0.8,0.1,0.1";
    std::uint64_t p_seed = 17;
    std::size_t p_max_tokens = 150;
    prepare->add_option("--dataset", p_dataset, "input JSONL dataset")->required();
    prepare->add_option("--out", p_out, "output directory")->required();
    prepare->add_option("--seed", p_seed, "split shuffle seed");
    prepare->add_option("--ratios", p_ratios, "train,valid,test ratios");
    prepare->add_option("--max-tokens", p_max_tokens, "buggy-method token limit");

    // shared run/ablate flags
    auto add_run_flags = [](CLI::App* cmd, RunFlags& flags) {
        cmd->add_option("--config", flags.config_path, "JSON config file");
        cmd->add_option("--backend", flags.backend_kind, "backend kind")
            ->check(CLI::IsMember({"http", "mock"}));
        cmd->add_option("--script", flags.script, "mock stage table or replay script (JSON)");
        cmd->add_option("--endpoint", flags.endpoint, "chat-completions URL");
        cmd->add_option("--model", flags.model, "model name");
        cmd->add_option("--api-key-env", flags.api_key_env,
                        "environment variable holding the API credential");
        cmd->add_option("--workers", flags.workers, "worker pool size (default: CPU count)");
        cmd->add_flag("--resume", flags.resume, "skip instances with completed transcripts");
        cmd->add_option("--templates", flags.templates_dir, "prompt template directory");
    };

    // run
    auto* run = app.add_subcommand("run", "execute the pipeline over a test split");
    std::string r_test, r_train, r_out;
    RunFlags r_flags;
    run->add_option("--test", r_test, "test split JSONL")->required();
    run->add_option("--train", r_train, "train corpus JSONL (retrieval source)")->required();
    run->add_option("--out", r_out, "run directory")->required();
    add_run_flags(run, r_flags);

    // ablate
    auto* ablate = app.add_subcommand("ablate",
                                      "run the component ladder and the turn sweep");
    std::string a_test, a_train, a_out, a_turns = "0,1,2,3";
    RunFlags a_flags;
    ablate->add_option("--test", a_test, "test split JSONL")->required();
    ablate->add_option("--train", a_train, "train corpus JSONL")->required();
    ablate->add_option("--out", a_out, "output directory (one run dir per row)")->required();
    ablate->add_option("--turns", a_turns, "turn budgets to sweep");
    add_run_flags(ablate, a_flags);

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "score a run against its reference split");
    std::string e_run, e_test, e_out;
    eval_cmd->add_option("--run", e_run, "run directory")->required();
    eval_cmd->add_option("--test", e_test, "reference split JSONL")->required();
    eval_cmd->add_option("--out", e_out, "report path (default <run>/report.json)");

    // overlap
    auto* overlap = app.add_subcommand("overlap", "cross-model overlap matrix");
    std::vector<std::string> o_runs;
    std::string o_names, o_test, o_out = "overlap.csv";
    overlap->add_option("--run", o_runs, "run directory (repeat per model)")->required();
    overlap->add_option("--names", o_names, "comma-separated model names");
    overlap->add_option("--test", o_test, "reference split JSONL")->required();
    overlap->add_option("--out", o_out, "output CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (prepare->parsed()) return cmd_prepare(p_dataset, p_out, p_seed, p_ratios, p_max_tokens);
        if (run->parsed()) return cmd_run(r_test, r_train, r_out, r_flags);
        if (ablate->parsed()) return cmd_ablate(a_test, a_train, a_out, a_turns, a_flags);
        if (eval_cmd->parsed()) return cmd_eval(e_run, e_test, e_out);
        if (overlap->parsed()) return cmd_overlap(o_runs, o_names, o_test, o_out);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
