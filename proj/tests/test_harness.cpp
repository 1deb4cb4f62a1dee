#include "swfsec/harness.hpp"

#include <algorithm>
#include <filesystem>

#include <doctest.h>

using namespace swfsec;
using namespace swfsec::harness;

namespace {

const features::TagTable& table() {
    static const auto t = features::TagTable::defaults();
    return t;
}

const abc::ApiWhitelist& whitelist() {
    static const auto w = abc::ApiWhitelist::load_default();
    return w;
}

Dataset small_dataset(std::size_t per_class, std::uint64_t seed) {
    const auto corpus =
        swfgen::generate_corpus(swfgen::CorpusConfig::load_default(), per_class, per_class, seed, table(), whitelist());
    return extract_dataset(corpus, table(), whitelist());
}

ExperimentConfig quick_config() {
    return ExperimentConfig::parse(R"(seed = 3
repeats = 1
k_list = 0, 5
attack_samples = 5
retrain = false
grid_search = false
forest_trees = 10
)");
}

std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("swfsec_harness_" + name);
    std::filesystem::remove_all(p);
    return p;
}

} // namespace

TEST_SUITE("harness") {

TEST_CASE("config text round-trips and validates") {
    ExperimentConfig c;
    c.seed = 42;
    c.k_list = {0, 7};
    c.temporal_cut_year = 2014;
    c.lk_mode = LkMode::SurrogateData;
    const auto back = ExperimentConfig::parse(c.to_text());
    CHECK(back.to_text() == c.to_text());
    CHECK(back.hash() == c.hash());
    CHECK(ExperimentConfig{}.hash() != c.hash());
    CHECK(ExperimentConfig::parse("# comment\n\nseed = 9\ntemporal_cut_year = none\n").seed == 9);
    CHECK_THROWS_AS(ExperimentConfig::parse("colour = blue\n"), Error);
    CHECK_THROWS_AS(ExperimentConfig::parse("repeats = two\n"), Error);
    CHECK_THROWS_AS(ExperimentConfig::parse("split_fraction = 1.5\n"), Error);
    CHECK_THROWS_AS(ExperimentConfig::parse("classifiers = perceptron\n"), Error);
}

TEST_CASE("too few samples per class is reported") {
    const auto data = small_dataset(3, 1);
    try {
        run_standard(quick_config(), data);
        FAIL("expected CorpusTooSmall");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::CorpusTooSmall);
    }
}

TEST_CASE("temporal split needs years on both sides") {
    const auto data = small_dataset(20, 2);
    try {
        run_temporal(quick_config(), data, 1990);
        FAIL("expected NoTemporalMetadata");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NoTemporalMetadata);
    }
}

TEST_CASE("standard run trains every classifier and thresholds keep the false-positive target") {
    const auto data = small_dataset(40, 4);
    const auto cfg = quick_config();
    const auto run = run_standard(cfg, data);
    REQUIRE(run.repeats.size() == 1);
    const auto& rep = run.repeats[0];
    CHECK(rep.classifiers.size() == 3);
    std::vector<std::size_t> all = rep.train;
    all.insert(all.end(), rep.test.begin(), rep.test.end());
    std::sort(all.begin(), all.end());
    CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());
    CHECK(all.size() == data.labels.size());
    for (const auto& [id, c] : rep.classifiers) {
        std::size_t benign = 0, flagged = 0;
        for (std::size_t i = 0; i < rep.test_labels.size(); ++i)
            if (rep.test_labels[i] < 0) {
                ++benign;
                if (c.pipeline.model.predict(c.pipeline.space.normalize(rep.test_capped.row(i))))
                    ++flagged;
            }
        CHECK(static_cast<double>(flagged) <= cfg.fpr_target * static_cast<double>(benign) + 1e-9);
    }
}

TEST_CASE("reports are written with a manifest") {
    const auto data = small_dataset(30, 5);
    auto cfg = quick_config();
    cfg.temporal_cut_year = 2015;
    const auto results = run_all(cfg, data);
    const auto dir = scratch_dir("reports");
    const auto files = emit_reports(results, cfg, dir.string());
    for (const char* name : {"roc.csv", "summary.csv", "security_curve.csv", "mimicry.json", "temporal.csv",
                             "manifest.json"}) {
        CHECK(std::find(files.begin(), files.end(), name) != files.end());
        CHECK(std::filesystem::exists(dir / name));
    }
    const std::string manifest = read_text_file((dir / "manifest.json").string());
    CHECK(manifest.find(cfg.hash()) != std::string::npos);

    const auto empty_dir = scratch_dir("empty");
    CHECK(emit_reports(Results{}, cfg, empty_dir.string()) == std::vector<std::string>{"manifest.json"});

    const auto blocker = scratch_dir("blocker");
    write_text_file(blocker.string(), "x");
    try {
        emit_reports(results, cfg, (blocker / "sub").string());
        FAIL("expected IoError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::IoError);
    }
    std::filesystem::remove_all(dir);
    std::filesystem::remove_all(empty_dir);
    std::filesystem::remove(blocker);
}

} // TEST_SUITE
