#pragma once

// Feature extraction: 14 structural tag counts plus whitelisted API counts,
// and the fitted cap -> selection -> tf-idf pipeline.

#include "swfsec/abc.hpp"
#include "swfsec/common.hpp"
#include "swfsec/swf.hpp"

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace swfsec::features {

inline constexpr std::size_t kStructuralCount = 14;

inline constexpr std::array<std::string_view, kStructuralCount> kStructuralNames = {
    "Frames", "Shapes", "Sounds", "BinaryData", "Scripts", "Fonts",  "Sprites",
    "MorphShapes", "Texts", "Images", "Videos", "Buttons", "Errors", "Unknown",
};

enum Structural : std::size_t {
    Frames, Shapes, Sounds, BinaryData, Scripts, Fonts, Sprites,
    MorphShapes, Texts, Images, Videos, Buttons, Errors, Unknown,
};

/// Index into kStructuralNames, or nullopt.
std::optional<std::size_t> structural_index(std::string_view name);

/// Maps tag codes to structural counters. Codes listed under `Known` are
/// recognized but not counted; all other absent codes are Unknown.
class TagTable {
public:
    static TagTable parse(std::string_view text);
    static TagTable load(const std::string& path);
    /// Built-in table, identical to data/tag_table.txt.
    static TagTable defaults();

    enum : int { kUnknown = -1, kKnown = -2 };

    /// Structural index for `code`, kKnown, or kUnknown.
    int lookup(std::uint32_t code) const;

    /// Tag codes for a counted feature, smallest first.
    std::vector<std::uint32_t> codes_for(std::size_t feature) const;

    /// A code absent from the table; used to plan Unknown tags.
    std::uint32_t unused_code() const;

private:
    void assign(std::uint32_t code, int target, int line);
    std::map<std::uint32_t, int> table_;
};

struct RawFeatureVector {
    std::array<std::int64_t, kStructuralCount> structural{};
    std::map<std::string, std::int64_t> api; ///< `class:...` / `method:...`, no zero entries

    /// Count for a structural name or API key; 0 if absent.
    std::int64_t value(const std::string& name) const;
    /// Adds `units` to a structural or API feature.
    void add(const std::string& name, std::int64_t units);

    bool operator==(const RawFeatureVector&) const = default;
};

/// Structural counts; `abc_errors` is folded into Errors along with parse and
/// decompression failures.
std::array<std::int64_t, kStructuralCount> structural_counts(const swf::SwfDocument& doc, const TagTable& table,
                                                             std::int64_t abc_errors = 0);

std::map<std::string, std::int64_t> api_counts(const abc::NameOccurrenceCounts& counts);

/// Parses, scans every DoABC/DoABCDefine tag and builds the raw vector.
RawFeatureVector extract(ByteView swf_bytes, const TagTable& table, const abc::ApiWhitelist& whitelist);
RawFeatureVector extract(const swf::SwfDocument& doc, const TagTable& table, const abc::ApiWhitelist& whitelist);

/// Candidate ranking entry, exposed for reporting and tests.
struct FeatureScore {
    std::string name;
    double score = 0.0;     ///< |P(x>0 | malicious) - P(x>0 | benign)|
    std::int64_t total = 0; ///< raw occurrences summed over training samples
};

class FeatureSpace {
public:
    FeatureSpace() = default;

    /// Ranks structural features, every observed API key and `extra_candidates`
    /// by score; keeps the top `k` (fewer if there are fewer candidates).
    /// Labels are +1 malicious, -1 benign. Throws DegenerateTraining.
    static FeatureSpace fit(const std::vector<RawFeatureVector>& samples, const std::vector<int>& labels,
                            std::size_t k = 50, int v_max = 10,
                            const std::vector<std::string>& extra_candidates = {});

    static std::vector<FeatureScore> rank(const std::vector<RawFeatureVector>& samples, const std::vector<int>& labels,
                                          const std::vector<std::string>& extra_candidates = {});

    /// Builds a space from explicit parts (tests, persistence).
    static FeatureSpace from_parts(std::vector<std::string> selected, int v_max, std::vector<double> idf);

    bool fitted() const noexcept { return fitted_; }
    std::size_t size() const noexcept { return selected_.size(); }
    int v_max() const noexcept { return v_max_; }
    const std::vector<std::string>& selected() const noexcept { return selected_; }
    const std::vector<double>& idf() const noexcept { return idf_; }
    std::optional<std::size_t> index_of(const std::string& name) const;

    /// Projection onto the selected features, capped at v_max.
    std::vector<double> capped(const RawFeatureVector& raw) const;
    /// tf-idf weighting + L2 normalization of a capped vector; zero stays zero.
    std::vector<double> normalize(std::span<const double> capped) const;
    std::vector<double> transform(const RawFeatureVector& raw, bool normalize_output = true) const;
    /// d normalize(c) / d c; throws ZeroVector for c = 0.
    Matrix jacobian(std::span<const double> capped) const;

    nlohmann::json to_json() const;
    static FeatureSpace from_json(const nlohmann::json& j);

private:
    void require_fitted() const;

    std::vector<std::string> selected_;
    std::map<std::string, std::size_t> index_;
    std::vector<double> idf_;
    int v_max_ = 10;
    bool fitted_ = false;
};

/// CSV with header `file,label,<names>`; values through format_double.
std::string feature_csv(const std::vector<std::string>& names, const std::vector<std::string>& files,
                        const std::vector<int>& labels, const Matrix& values);

} // namespace swfsec::features
