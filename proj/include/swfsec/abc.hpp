#pragma once

// ActionScript bytecode (ABC) scanning: constant pool parsing, multiname
// resolution and a method-body walk that counts whitelisted API references.
// Nothing is decompiled or executed.

#include "swfsec/common.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace swfsec::abc {

inline constexpr std::uint32_t kTagDoAbc = 82;       ///< flags + name prefix before the ABC
inline constexpr std::uint32_t kTagDoAbcDefine = 72; ///< bare ABC

enum class MultinameKind : std::uint8_t {
    QName = 0x07,
    QNameA = 0x0D,
    RTQName = 0x0F,
    RTQNameA = 0x10,
    RTQNameL = 0x11,
    RTQNameLA = 0x12,
    Multiname = 0x09,
    MultinameA = 0x0E,
    MultinameL = 0x1B,
    MultinameLA = 0x1C,
    TypeName = 0x1D,
};

namespace ns_kind {
inline constexpr std::uint8_t Namespace = 0x08;
inline constexpr std::uint8_t Package = 0x16;
inline constexpr std::uint8_t PackageInternal = 0x17;
inline constexpr std::uint8_t Protected = 0x18;
inline constexpr std::uint8_t Explicit = 0x19;
inline constexpr std::uint8_t StaticProtected = 0x1A;
inline constexpr std::uint8_t Private = 0x05;
} // namespace ns_kind

struct NamespaceEntry {
    std::uint8_t kind = 0;
    std::uint32_t name_index = 0;
};

struct MultinameEntry {
    MultinameKind kind = MultinameKind::QName;
    std::optional<std::uint32_t> name_index;
    std::optional<std::uint32_t> namespace_index;
    std::optional<std::uint32_t> ns_set_index;
    std::optional<std::uint32_t> base_index; ///< TypeName only
    std::vector<std::uint32_t> type_params;  ///< TypeName only
};

/// Every pool keeps the implicit entry 0, so stored indices address vectors directly.
struct ConstantPool {
    std::vector<std::int32_t> integers{0};
    std::vector<std::uint32_t> uintegers{0};
    std::vector<double> doubles{0.0};
    std::vector<std::string> strings{""};
    std::vector<NamespaceEntry> namespaces{NamespaceEntry{}};
    std::vector<std::vector<std::uint32_t>> ns_sets{{}};
    std::vector<MultinameEntry> multinames{MultinameEntry{}};
    bool malformed = false;
};

struct MethodBody {
    std::uint32_t method = 0;
    Bytes code;
};

/// Byte offsets of the ABC sections, used to extend an existing ABC in place.
struct AbcLayout {
    // For each of the 7 pools: offset of the count field and end of the section.
    std::array<std::size_t, 7> pool_count_offset{};
    std::array<std::size_t, 7> pool_end{};
    std::size_t method_count_offset = 0;
    std::size_t methods_end = 0;
    std::size_t body_count_offset = 0;
    std::size_t end = 0;
    std::uint32_t method_count = 0;
    std::uint32_t body_count = 0;
    std::array<std::uint32_t, 7> pool_counts{}; ///< raw count fields as stored
};

struct AbcFile {
    std::uint16_t minor_version = 0;
    std::uint16_t major_version = 0;
    ConstantPool pool;
    std::vector<MethodBody> bodies;
    unsigned errors = 0;     ///< malformed pools, truncation
    bool complete = false;   ///< every section parsed to the end
    AbcLayout layout;
};

/// Parses a bare ABC blob. Never throws: truncation or bad indices are
/// recorded in `errors` (a truncated file keeps no method bodies).
AbcFile parse_abc(ByteView abc);

/// Strips the DoABC flags/name prefix for tag 82; tag 72 is returned unchanged.
/// Returns nullopt if the prefix is malformed.
std::optional<ByteView> abc_payload(std::uint32_t tag_code, ByteView tag_body);

struct QualifiedName {
    std::string ns;
    std::string name;
    bool resolvable = false;

    /// "ns.name", or just "name" when the namespace is empty.
    std::string dotted() const;
};

/// Throws Error{IndexOutOfRange} if `index` is outside the multiname pool.
/// Entries with dangling inner indices resolve as unresolvable.
QualifiedName resolve_multiname(const ConstantPool& pool, std::uint32_t index);

class ApiWhitelist {
public:
    ApiWhitelist() = default;

    /// Lines: `class <dotted.Name>` or `method <name>`; `#` starts a comment.
    static ApiWhitelist parse(std::string_view text);
    static ApiWhitelist load(const std::string& path);
    static ApiWhitelist load_default();

    void add_class(std::string name) { classes_.insert(std::move(name)); }
    void add_method(std::string name) { methods_.insert(std::move(name)); }

    bool has_class(const std::string& dotted) const { return classes_.count(dotted) != 0; }
    bool has_method(const std::string& name) const { return methods_.count(name) != 0; }
    bool contains_entry(const std::string& feature_key) const;

    const std::set<std::string>& classes() const { return classes_; }
    const std::set<std::string>& methods() const { return methods_; }

    /// Feature keys (`class:...`, `method:...`) for every entry.
    std::vector<std::string> feature_keys() const;

private:
    std::set<std::string> classes_;
    std::set<std::string> methods_;
};

struct NameOccurrenceCounts {
    std::map<std::string, std::int64_t> class_counts;
    std::map<std::string, std::int64_t> method_counts;
    unsigned body_scan_errors = 0;

    void merge(const NameOccurrenceCounts& other);
};

NameOccurrenceCounts scan_method_bodies(const AbcFile& abc, const ApiWhitelist& whitelist);

/// Convenience: parse + scan; parse errors are folded into body_scan_errors.
NameOccurrenceCounts scan_abc(ByteView abc, const ApiWhitelist& whitelist);

// -- opcode table ---------------------------------------------------------

enum class Operand : std::uint8_t {
    U30,        ///< generic u30 index or count
    Multiname,  ///< u30 index into the multiname pool
    U8,
    S24,
};

struct OpcodeInfo {
    std::string_view name;
    std::uint8_t operand_count = 0;
    std::array<Operand, 4> operands{};
    bool valid = false;
};

inline constexpr std::uint8_t kOpLookupSwitch = 0x1B;

const OpcodeInfo& opcode_info(std::uint8_t opcode);

// -- encoding helpers (shared with the generator) --------------------------

void put_u30(Bytes& out, std::uint32_t value);
void put_s24(Bytes& out, std::int32_t value);

} // namespace swfsec::abc
