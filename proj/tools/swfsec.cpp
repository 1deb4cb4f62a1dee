#include "swfsec/harness.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <set>

namespace fs = std::filesystem;
using namespace swfsec;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

struct Globals {
    std::optional<std::uint64_t> seed;
    std::string config;
    std::string out = "out";
    std::string tag_table;
    std::string whitelist;
    std::string corpus_config;
};

struct Context {
    harness::ExperimentConfig cfg;
    features::TagTable table;
    abc::ApiWhitelist whitelist;
};

Context make_context(const Globals& g) {
    Context c{g.config.empty() ? harness::ExperimentConfig() : harness::ExperimentConfig::load(g.config),
              g.tag_table.empty() ? features::TagTable::defaults() : features::TagTable::load(g.tag_table),
              g.whitelist.empty() ? abc::ApiWhitelist::load_default() : abc::ApiWhitelist::load(g.whitelist)};
    if (g.seed)
        c.cfg.seed = *g.seed;
    return c;
}

swfgen::CorpusConfig corpus_config(const Globals& g) {
    return g.corpus_config.empty() ? swfgen::CorpusConfig::load_default() : swfgen::CorpusConfig::load(g.corpus_config);
}

/// The corpus directory, or a synthetic corpus sized by the experiment config.
std::vector<swfgen::CorpusEntry> load_corpus(const Globals& g, const Context& c, const std::string& dir) {
    if (!dir.empty())
        return swfgen::read_corpus(dir);
    return swfgen::generate_corpus(corpus_config(g), static_cast<std::size_t>(c.cfg.corpus_benign),
                                   static_cast<std::size_t>(c.cfg.corpus_malicious), c.cfg.seed, c.table, c.whitelist);
}

std::string out_path(const Globals& g, const std::string& name) {
    std::error_code ec;
    fs::create_directories(g.out, ec);
    if (ec)
        throw Error(ErrorCode::IoError, "cannot create '" + g.out + "': " + ec.message());
    return (fs::path(g.out) / name).string();
}

Matrix probe_rows(const features::FeatureSpace& space, const std::vector<features::RawFeatureVector>& raw) {
    Matrix probes;
    for (std::size_t i = 0; i < raw.size() && probes.rows() < 5; ++i)
        probes.append_row(space.transform(raw[i]));
    return probes;
}

void report_written(const std::vector<std::string>& names, const std::string& dir) {
    for (const auto& n : names)
        std::cout << (fs::path(dir) / n).string() << "\n";
}

// -- subcommands ----------------------------------------------------------------

void cmd_gen_corpus(const Globals& g, int n_benign, int n_malicious, const std::string& out_dir) {
    const Context c = make_context(g);
    const auto corpus = swfgen::generate_corpus(
        corpus_config(g), static_cast<std::size_t>(n_benign < 0 ? c.cfg.corpus_benign : n_benign),
        static_cast<std::size_t>(n_malicious < 0 ? c.cfg.corpus_malicious : n_malicious), c.cfg.seed, c.table,
        c.whitelist);
    const std::string dir = out_dir.empty() ? g.out : out_dir;
    swfgen::write_corpus(dir, corpus);
    std::cout << "wrote " << corpus.size() << " files to " << dir << "\n";
}

void cmd_extract(const Globals& g, const std::string& input, const std::string& model) {
    const Context c = make_context(g);
    if (fs::is_regular_file(input)) {
        const auto raw = features::extract(read_file(input), c.table, c.whitelist);
        nlohmann::ordered_json j;
        for (std::size_t i = 0; i < features::kStructuralCount; ++i)
            j[std::string(features::kStructuralNames[i])] = raw.structural[i];
        for (const auto& [name, v] : raw.api)
            j[name] = v;
        std::cout << j.dump(1) << "\n";
        return;
    }
    const auto corpus = swfgen::read_corpus(input);
    const auto data = harness::extract_dataset(corpus, c.table, c.whitelist);
    std::vector<std::string> names;
    Matrix values;
    if (!model.empty()) {
        const auto p = learn::load_pipeline(model);
        names = p.space.selected();
        for (const auto& r : data.raw)
            values.append_row(p.features(r));
    } else {
        for (auto n : features::kStructuralNames)
            names.emplace_back(n);
        std::set<std::string> api;
        for (const auto& r : data.raw)
            for (const auto& [k, v] : r.api)
                api.insert(k);
        names.insert(names.end(), api.begin(), api.end());
        for (const auto& r : data.raw) {
            std::vector<double> row;
            for (const auto& n : names)
                row.push_back(static_cast<double>(r.value(n)));
            values.append_row(row);
        }
    }
    const std::string path = out_path(g, "features.csv");
    write_text_file(path, features::feature_csv(names, data.ids, data.labels, values));
    std::cout << path << "\n";
}

void cmd_train(const Globals& g, const std::string& corpus_dir, const std::string& classifier) {
    Context c = make_context(g);
    c.cfg.classifiers = {learn::model_kind_from_string(classifier)};
    c.cfg.repeats = 1;
    const auto data = harness::extract_dataset(load_corpus(g, c, corpus_dir), c.table, c.whitelist);
    const auto run = harness::run_standard(c.cfg, data);
    const auto& st = run.repeats.front();
    const auto& trained = st.classifiers.begin()->second;
    const std::string path = out_path(g, st.classifiers.begin()->first + ".json");
    learn::save_pipeline(path, trained.pipeline, probe_rows(st.space, data.raw));
    std::cout << path << "\nauc " << format_double(trained.clean.auc, 6) << " dr@" << c.cfg.fpr_target << " "
              << format_double(trained.clean.dr_at_fpr.at(c.cfg.fpr_target), 6) << " threshold "
              << format_double(trained.pipeline.model.threshold, 9) << "\n";
}

void cmd_eval(const Globals& g, const std::string& corpus_dir, const std::string& model) {
    const Context c = make_context(g);
    const auto p = learn::load_pipeline(model);
    const auto data = harness::extract_dataset(load_corpus(g, c, corpus_dir), c.table, c.whitelist);
    std::vector<double> scores;
    for (const auto& r : data.raw)
        scores.push_back(p.decision(r));
    const auto rep = learn::evaluate_scores(scores, data.labels, {c.cfg.fpr_target});
    std::string csv = "fpr,tpr,threshold\n";
    for (const auto& pt : rep.roc)
        csv += format_double(pt.fpr) + "," + format_double(pt.tpr) + "," + format_double(pt.threshold) + "\n";
    const std::string path = out_path(g, "roc.csv");
    write_text_file(path, csv);
    std::vector<double> mal;
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (data.labels[i] > 0)
            mal.push_back(scores[i]);
    std::cout << path << "\nauc " << format_double(rep.auc, 6) << " dr@" << c.cfg.fpr_target << " "
              << format_double(rep.dr_at_fpr.at(c.cfg.fpr_target), 6) << " dr@model-threshold "
              << format_double(learn::detection_rate(mal, p.model.threshold), 6) << "\n";
}

void cmd_attack(const Globals& g, const std::string& corpus_dir, const std::string& model,
                const std::string& surrogate, std::vector<int> k_list, const std::string& realize_dir) {
    const Context c = make_context(g);
    const auto target = learn::load_pipeline(model);
    const auto attacked = surrogate.empty() ? target : learn::load_pipeline(surrogate);
    if (!attacked.model.differentiable())
        throw Error(ErrorCode::ConfigError, "the attacked model is a forest; pass a differentiable --surrogate");
    if (attacked.space.selected() != target.space.selected())
        throw Error(ErrorCode::ConfigError, "surrogate and target use different feature spaces");
    if (k_list.empty())
        k_list = c.cfg.k_list;

    const auto corpus = load_corpus(g, c, corpus_dir);
    const auto data = harness::extract_dataset(corpus, c.table, c.whitelist);
    Matrix mal, pool;
    std::vector<std::string> ids;
    std::vector<std::size_t> mal_idx;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data.labels[i] > 0) {
            mal.append_row(attacked.space.capped(data.raw[i]));
            ids.push_back(data.ids[i]);
            mal_idx.push_back(i);
        } else {
            pool.append_row(attacked.space.capped(data.raw[i]));
        }
    }
    evasion::AttackConfig acfg;
    acfg.v_max = attacked.space.v_max();
    acfg.epsilon = c.cfg.attack_epsilon;
    acfg.max_iters = c.cfg.attack_max_iters;
    acfg.polish = c.cfg.attack_polish;
    acfg.dual_init = c.cfg.dual_init;
    acfg.seed = c.cfg.seed;
    acfg.knowledge = surrogate.empty() ? evasion::Knowledge::PerfectKnowledge : evasion::Knowledge::SurrogateLearner;
    const evasion::Objective obj(attacked.model, attacked.space, attacked.normalize);
    const auto batches = evasion::attack_batch(obj, target, mal, k_list, acfg, pool);

    const std::string path = out_path(g, "trace.jsonl");
    write_text_file(path, evasion::trace_jsonl(batches, ids));
    std::cout << path << "\n";
    for (const auto& b : batches)
        std::cout << "k " << b.k << " dr " << format_double(b.detection_rate, 6) << "\n";

    if (realize_dir.empty())
        return;
    std::error_code ec;
    fs::create_directories(realize_dir, ec);
    if (ec)
        throw Error(ErrorCode::IoError, "cannot create '" + realize_dir + "'");
    const auto& last = batches.back();
    for (std::size_t i = 0; i < last.results.size(); ++i) {
        const auto& src = corpus[mal_idx[i]];
        const Bytes out = swfgen::inject(src.bytes, swfgen::plan_from_attack(last.results[i]), c.table);
        write_file((fs::path(realize_dir) / src.name).string(), out);
    }
    std::cout << "realized " << last.results.size() << " files at k " << last.k << " in " << realize_dir << "\n";
}

void cmd_retrain(const Globals& g, const std::string& corpus_dir) {
    Context c = make_context(g);
    c.cfg.repeats = 1;
    const auto data = harness::extract_dataset(load_corpus(g, c, corpus_dir), c.table, c.whitelist);
    auto run = harness::run_standard(c.cfg, data);
    harness::run_retraining(c.cfg, run);
    const auto& st = run.repeats.front();
    for (const auto& [id, trained] : st.classifiers) {
        const std::string path = out_path(g, id + ".json");
        learn::save_pipeline(path, trained.pipeline, probe_rows(st.space, data.raw));
        std::cout << path << " auc " << format_double(trained.clean.auc, 6) << "\n";
    }
}

/// Runs the experiment stages and keeps the parts `keep` asks for.
void cmd_experiment(const Globals& g, const std::string& corpus_dir, bool roc, bool curves, bool mimicry,
                    bool temporal, std::optional<int> cut_year) {
    Context c = make_context(g);
    if (cut_year)
        c.cfg.temporal_cut_year = cut_year;
    const auto data = harness::extract_dataset(load_corpus(g, c, corpus_dir), c.table, c.whitelist);
    harness::Results res;
    res.corpus_size = data.size();
    if (roc || curves || mimicry) {
        if (!temporal) {
            auto cfg = c.cfg;
            cfg.temporal_cut_year.reset();
            res = harness::run_all(cfg, data);
        } else {
            res = harness::run_all(c.cfg, data);
        }
    } else if (temporal) {
        if (!c.cfg.temporal_cut_year)
            throw Error(ErrorCode::ConfigError, "temporal needs --cut-year or temporal_cut_year in the config");
        res.temporal = harness::run_temporal(c.cfg, data, *c.cfg.temporal_cut_year);
        res.temporal_cut_year = c.cfg.temporal_cut_year;
    }
    if (!roc)
        res.roc.clear();
    if (!curves)
        res.curves.clear();
    if (!mimicry)
        res.mimicry.clear();
    report_written(harness::emit_reports(res, c.cfg, g.out), g.out);
}

void cmd_inject(const Globals& g, const std::string& input, const std::string& plan_path, const std::string& output) {
    const Context c = make_context(g);
    swfgen::InjectionPlan plan;
    try {
        const auto j = nlohmann::json::parse(read_text_file(plan_path));
        if (j.contains("add_tags"))
            plan.add_tags = j.at("add_tags").get<std::map<std::string, int>>();
        if (j.contains("add_api_refs"))
            plan.add_api_refs = j.at("add_api_refs").get<std::map<std::string, int>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::FormatError, plan_path + ": " + e.what());
    }
    write_file(output, swfgen::inject(read_file(input), plan, c.table));
    std::cout << output << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Static analysis, learning-based detection and adversarial evaluation for SWF files"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "Master seed (overrides the config)");
    app.add_option("--config", g.config, "Experiment config file (key = value)");
    app.add_option("--out", g.out, "Output directory")->capture_default_str();
    app.add_option("--tag-table", g.tag_table, "Tag code to feature mapping");
    app.add_option("--whitelist", g.whitelist, "API class/method whitelist");
    app.add_option("--corpus-config", g.corpus_config, "Synthetic corpus rates");

    std::string corpus, model, surrogate, input, output, plan, classifier = "rbf_svm", realize, out_dir;
    std::vector<int> k_list;
    int n_benign = -1, n_malicious = -1;
    std::optional<int> cut_year;

    auto* gen = app.add_subcommand("gen-corpus", "Write a synthetic labeled corpus");
    gen->add_option("--n-benign", n_benign, "Benign files (default from config)");
    gen->add_option("--n-malicious", n_malicious, "Malicious files (default from config)");
    gen->add_option("--out-dir", out_dir, "Corpus directory (default --out)");

    auto* extract = app.add_subcommand("extract", "Extract features from a file or corpus directory");
    extract->add_option("--input", input, "SWF file or corpus directory")->required();
    extract->add_option("--model", model, "Pipeline whose feature space to apply");

    auto* train = app.add_subcommand("train", "Train and save one classifier pipeline");
    train->add_option("--corpus", corpus, "Corpus directory (default: synthetic)");
    train->add_option("--classifier", classifier, "linear_svm, rbf_svm or random_forest")->capture_default_str();

    auto* eval = app.add_subcommand("eval", "Evaluate a saved pipeline on a corpus");
    eval->add_option("--corpus", corpus, "Corpus directory (default: synthetic)");
    eval->add_option("--model", model, "Pipeline file")->required();

    auto* attack = app.add_subcommand("attack", "Attack the malicious samples of a corpus");
    attack->add_option("--corpus", corpus, "Corpus directory (default: synthetic)");
    attack->add_option("--model", model, "Target pipeline")->required();
    attack->add_option("--surrogate", surrogate, "Pipeline to optimize against (default: the target)");
    attack->add_option("--k", k_list, "Injection budgets (default from config)")->delimiter(',');
    attack->add_option("--realize", realize, "Write injected SWF files for the last budget here");

    auto* retrain = app.add_subcommand("retrain", "Retrain with attack samples and save the pipelines");
    retrain->add_option("--corpus", corpus, "Corpus directory (default: synthetic)");

    auto* curve = app.add_subcommand("curve", "Security evaluation curves");
    curve->add_option("--corpus", corpus, "Corpus directory (default: synthetic)");

    auto* metrics = app.add_subcommand("metrics", "Mimicry parameter per budget");
    metrics->add_option("--corpus", corpus, "Corpus directory (default: synthetic)");

    auto* temporal = app.add_subcommand("temporal", "Train before a cut year, test on later malware");
    temporal->add_option("--corpus", corpus, "Corpus directory (default: synthetic)");
    temporal->add_option("--cut-year", cut_year, "First test year (default from config)");

    auto* run = app.add_subcommand("run", "Every experiment and report");
    run->add_option("--corpus", corpus, "Corpus directory (default: synthetic)");

    auto* inject = app.add_subcommand("inject", "Inject tags and API references into a SWF file");
    inject->add_option("--input", input, "Source SWF")->required();
    inject->add_option("--plan", plan, R"(JSON {"add_tags": {...}, "add_api_refs": {...}})")->required();
    inject->add_option("--output", output, "Destination SWF")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*gen)
            cmd_gen_corpus(g, n_benign, n_malicious, out_dir);
        else if (*extract)
            cmd_extract(g, input, model);
        else if (*train)
            cmd_train(g, corpus, classifier);
        else if (*eval)
            cmd_eval(g, corpus, model);
        else if (*attack)
            cmd_attack(g, corpus, model, surrogate, k_list, realize);
        else if (*retrain)
            cmd_retrain(g, corpus);
        else if (*curve)
            cmd_experiment(g, corpus, true, true, false, false, std::nullopt);
        else if (*metrics)
            cmd_experiment(g, corpus, false, false, true, false, std::nullopt);
        else if (*temporal)
            cmd_experiment(g, corpus, false, false, false, true, cut_year);
        else if (*run)
            cmd_experiment(g, corpus, true, true, true, true, std::nullopt);
        else if (*inject)
            cmd_inject(g, input, plan, output);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code() == ErrorCode::ConfigError ? kExitConfig : kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return 0;
}
