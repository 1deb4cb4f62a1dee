#include "swfsec/harness.hpp"

#include <json.hpp>
#include <zlib.h>

#include <algorithm>
#include <filesystem>

namespace swfsec::harness {

namespace {

using nlohmann::ordered_json;

double rounded(double v) {
    return std::stod(format_double(v));
}

std::string roc_csv(const std::vector<RocSummary>& roc) {
    std::string out = "classifier,fpr,tpr,std\n";
    for (const auto& s : roc)
        for (std::size_t i = 0; i < s.fpr.size(); ++i)
            out += s.classifier + "," + format_double(s.fpr[i]) + "," + format_double(s.tpr_mean[i]) + "," +
                   format_double(s.tpr_std[i]) + "\n";
    return out;
}

std::string summary_csv(const std::vector<RocSummary>& roc) {
    std::string out = "classifier,auc_mean,auc_std,dr_mean,dr_std\n";
    for (const auto& s : roc)
        out += s.classifier + "," + format_double(s.auc_mean) + "," + format_double(s.auc_std) + "," +
               format_double(s.dr_mean) + "," + format_double(s.dr_std) + "\n";
    return out;
}

std::string curve_csv(const std::vector<SecurityCurve>& curves) {
    std::string out = "classifier,knowledge,attacked,k,dr_mean,dr_std\n";
    for (const auto& c : curves)
        for (const auto& p : c.points)
            out += c.classifier + "," + c.knowledge + "," + c.attacked + "," + std::to_string(p.k) + "," +
                   format_double(p.dr_mean) + "," + format_double(p.dr_std) + "\n";
    return out;
}

std::string mimicry_json(const std::vector<MimicryRow>& rows) {
    ordered_json arr = ordered_json::array();
    for (const auto& r : rows) {
        ordered_json j;
        j["target"] = r.target;
        j["k"] = r.k;
        j["bc_before"] = rounded(r.mean.bc_before);
        j["bc_after"] = rounded(r.mean.bc_after);
        j["d_b_before"] = rounded(r.mean.d_b_before);
        j["d_b_after"] = rounded(r.mean.d_b_after);
        j["m"] = rounded(r.mean.m);
        arr.push_back(std::move(j));
    }
    return arr.dump(1) + "\n";
}

std::string temporal_csv(const std::vector<TemporalRow>& rows, std::optional<int> cut) {
    std::string out = "classifier,cut_year,n_test,accuracy\n";
    for (const auto& r : rows)
        out += r.classifier + "," + (cut ? std::to_string(*cut) : "") + "," + std::to_string(r.n_test) + "," +
               format_double(r.accuracy) + "\n";
    return out;
}

} // namespace

std::vector<std::string> emit_reports(const Results& results, const ExperimentConfig& cfg, const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir))
        throw Error(ErrorCode::IoError, "cannot use output directory '" + out_dir + "'");

    std::vector<std::pair<std::string, std::string>> files;
    if (!results.roc.empty()) {
        files.emplace_back("roc.csv", roc_csv(results.roc));
        files.emplace_back("summary.csv", summary_csv(results.roc));
    }
    if (!results.curves.empty())
        files.emplace_back("security_curve.csv", curve_csv(results.curves));
    if (!results.mimicry.empty())
        files.emplace_back("mimicry.json", mimicry_json(results.mimicry));
    if (!results.temporal.empty())
        files.emplace_back("temporal.csv", temporal_csv(results.temporal, results.temporal_cut_year));

    std::vector<std::string> names;
    for (const auto& [name, text] : files) {
        write_text_file((fs::path(out_dir) / name).string(), text);
        names.push_back(name);
    }

    ordered_json m;
    m["tool"] = "swfsec";
    m["version"] = kVersion;
    m["seed"] = cfg.seed;
    m["config_hash"] = cfg.hash();
    m["config"] = cfg.to_text();
    m["corpus_size"] = results.corpus_size;
    m["zlib"] = zlibVersion();
    m["files"] = names;
    write_text_file((fs::path(out_dir) / "manifest.json").string(), m.dump(1) + "\n");
    names.push_back("manifest.json");
    return names;
}

} // namespace swfsec::harness
