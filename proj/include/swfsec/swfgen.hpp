#pragma once

// Synthesizes SWF files with planned feature counts and injects tags and
// ABC name references into existing files.

#include "swfsec/abc.hpp"
#include "swfsec/evasion.hpp"
#include "swfsec/features.hpp"
#include "swfsec/swf.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace swfsec::swfgen {

struct FileProfile {
    std::map<std::string, int> structural_plan; ///< structural feature name -> count
    std::map<std::string, int> api_plan;        ///< `class:...` / `method:...` -> count
    int label = -1;
    swf::Compression compression = swf::Compression::None;
    std::uint8_t version = 10;
    std::uint64_t seed = 0; ///< tag order
};

struct InjectionPlan {
    std::map<std::string, int> add_tags;     ///< structural feature name -> units
    std::map<std::string, int> add_api_refs; ///< `class:...` / `method:...` -> units

    bool empty() const;
};

/// ABC with one script whose method references every entry of `refs`
/// (`class:a.b.C` via getlex, `method:m` via findpropstrict + callproperty),
/// plus `bad_bodies` extra methods whose bodies hold an invalid opcode.
/// Throws UnencodableName.
Bytes build_min_abc(const std::map<std::string, int>& refs, int bad_bodies = 0);

/// DoABC (tag 82) body: lazy-init flag, empty name, ABC.
Bytes doabc_body(ByteView abc);

/// Throws UnrealizablePlan when counts cannot be produced exactly (API refs or
/// more than one error without a Scripts unit, unmapped features, name clashes).
Bytes generate(const FileProfile& profile, const features::TagTable& table, const abc::ApiWhitelist& whitelist);

/// Adds tags before End and API references / invalid bodies to the last
/// well-formed ABC (or a new DoABC that takes one planned Scripts unit).
/// Existing tag bytes are kept. Throws ParseFailed or UnrealizablePlan.
Bytes inject(ByteView swf_bytes, const InjectionPlan& plan, const features::TagTable& table);

InjectionPlan plan_from_attack(const evasion::AttackResult& result);

// -- corpus ---------------------------------------------------------------------

struct FeatureRates {
    double benign = 0.0;
    double malicious = 0.0;
    std::optional<double> drifted; ///< malicious rate from drift_year on
};

/// Text format, one entry per line:
///   <feature> = <benign rate>, <malicious rate>[, <drifted malicious rate>]
///   @years = <first>-<last>
///   @drift_year = <year>
struct CorpusConfig {
    std::map<std::string, FeatureRates> rates;
    int first_year = 2010;
    int last_year = 2016;
    int drift_year = 2015;

    static CorpusConfig parse(std::string_view text);
    static CorpusConfig load(const std::string& path);
    static CorpusConfig load_default();
};

struct CorpusEntry {
    std::string name;
    Bytes bytes;
    int label = -1;
    int year = 0;
};

/// Samples profiles (Poisson counts per feature) and generates files.
FileProfile sample_profile(const CorpusConfig& cfg, int label, int year, std::uint64_t seed);
std::vector<CorpusEntry> generate_corpus(const CorpusConfig& cfg, std::size_t n_benign, std::size_t n_malicious,
                                         std::uint64_t seed, const features::TagTable& table,
                                         const abc::ApiWhitelist& whitelist);

/// Writes `<name>` files and labels.csv (`file,label,year`).
void write_corpus(const std::string& dir, const std::vector<CorpusEntry>& corpus);
std::vector<CorpusEntry> read_corpus(const std::string& dir);

} // namespace swfsec::swfgen
