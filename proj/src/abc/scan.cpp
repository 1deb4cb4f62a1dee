#include "swfsec/abc.hpp"

#include <sstream>

#ifndef SWFSEC_DATA_DIR
#define SWFSEC_DATA_DIR "data"
#endif

namespace swfsec::abc {

std::string QualifiedName::dotted() const {
    return ns.empty() ? name : ns + "." + name;
}

namespace {

const std::string& string_at(const ConstantPool& pool, std::uint32_t index, bool& ok) {
    static const std::string empty;
    if (index >= pool.strings.size()) {
        ok = false;
        return empty;
    }
    return pool.strings[index];
}

bool is_package(std::uint8_t kind) {
    return kind == ns_kind::Package || kind == ns_kind::PackageInternal;
}

QualifiedName resolve_at(const ConstantPool& pool, std::uint32_t index, int depth) {
    QualifiedName out;
    if (index == 0 || depth > 8)
        return out; // "*" or a TypeName cycle
    const MultinameEntry& m = pool.multinames[index];
    bool ok = true;
    switch (m.kind) {
    case MultinameKind::QName:
    case MultinameKind::QNameA: {
        const std::uint32_t ns = *m.namespace_index;
        if (ns >= pool.namespaces.size())
            return out;
        out.ns = string_at(pool, pool.namespaces[ns].name_index, ok);
        out.name = string_at(pool, *m.name_index, ok);
        out.resolvable = ok;
        break;
    }
    case MultinameKind::Multiname:
    case MultinameKind::MultinameA: {
        const std::uint32_t set = *m.ns_set_index;
        if (set >= pool.ns_sets.size())
            return out;
        // Runtime picks among the set; statically we take the first package namespace.
        for (auto ns : pool.ns_sets[set]) {
            if (ns < pool.namespaces.size() && is_package(pool.namespaces[ns].kind)) {
                out.ns = string_at(pool, pool.namespaces[ns].name_index, ok);
                break;
            }
        }
        out.name = string_at(pool, *m.name_index, ok);
        out.resolvable = ok;
        break;
    }
    case MultinameKind::TypeName:
        if (*m.base_index >= pool.multinames.size())
            return out;
        return resolve_at(pool, *m.base_index, depth + 1);
    default:
        break; // RTQName* and *L kinds bind at runtime
    }
    if (!out.resolvable) {
        out.ns.clear();
        out.name.clear();
    }
    return out;
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

} // namespace

QualifiedName resolve_multiname(const ConstantPool& pool, std::uint32_t index) {
    if (index >= pool.multinames.size())
        throw Error(ErrorCode::IndexOutOfRange, "multiname " + std::to_string(index) + " of " +
                                                    std::to_string(pool.multinames.size()));
    return resolve_at(pool, index, 0);
}

ApiWhitelist ApiWhitelist::parse(std::string_view text) {
    ApiWhitelist wl;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        const std::string t = trim(line);
        if (t.empty())
            continue;
        const auto space = t.find_first_of(" \t");
        if (space == std::string::npos)
            throw Error(ErrorCode::ConfigError, "whitelist line " + std::to_string(lineno) + ": expected '<kind> <name>'");
        const std::string kind = t.substr(0, space);
        const std::string name = trim(t.substr(space));
        if (kind == "class")
            wl.add_class(name);
        else if (kind == "method")
            wl.add_method(name);
        else
            throw Error(ErrorCode::ConfigError, "whitelist line " + std::to_string(lineno) + ": unknown kind '" + kind + "'");
    }
    return wl;
}

ApiWhitelist ApiWhitelist::load(const std::string& path) {
    return parse(read_text_file(path));
}

ApiWhitelist ApiWhitelist::load_default() {
    return load(std::string(SWFSEC_DATA_DIR) + "/api_whitelist.txt");
}

bool ApiWhitelist::contains_entry(const std::string& key) const {
    if (key.rfind("class:", 0) == 0)
        return has_class(key.substr(6));
    if (key.rfind("method:", 0) == 0)
        return has_method(key.substr(7));
    return false;
}

std::vector<std::string> ApiWhitelist::feature_keys() const {
    std::vector<std::string> keys;
    keys.reserve(classes_.size() + methods_.size());
    for (const auto& c : classes_)
        keys.push_back("class:" + c);
    for (const auto& m : methods_)
        keys.push_back("method:" + m);
    return keys;
}

void NameOccurrenceCounts::merge(const NameOccurrenceCounts& other) {
    for (const auto& [k, v] : other.class_counts)
        class_counts[k] += v;
    for (const auto& [k, v] : other.method_counts)
        method_counts[k] += v;
    body_scan_errors += other.body_scan_errors;
}

namespace {

// Walks one body; returns false on an unknown opcode, truncated operand or
// out-of-range multiname operand. Counts found before the failure are kept.
bool scan_body(const ConstantPool& pool, ByteView code, const ApiWhitelist& wl, NameOccurrenceCounts& out) {
    std::size_t pos = 0;
    auto need = [&](std::size_t n) { return code.size() - pos >= n; };
    auto read_u30 = [&](std::uint32_t& value) {
        value = 0;
        for (int i = 0; i < 5; ++i) {
            if (!need(1))
                return false;
            const std::uint8_t b = code[pos++];
            value |= std::uint32_t(b & 0x7F) << (7 * i);
            if (!(b & 0x80))
                break;
        }
        value &= 0x3FFFFFFF;
        return true;
    };

    while (pos < code.size()) {
        const std::uint8_t op = code[pos++];
        const OpcodeInfo& info = opcode_info(op);
        if (!info.valid)
            return false;
        if (op == kOpLookupSwitch) {
            // default offset, case count, then case_count + 1 offsets
            if (!need(3))
                return false;
            pos += 3;
            std::uint32_t cases = 0;
            if (!read_u30(cases))
                return false;
            const std::uint64_t bytes = 3 * (std::uint64_t(cases) + 1);
            if (!need(bytes))
                return false;
            pos += bytes;
            continue;
        }
        for (std::uint8_t i = 0; i < info.operand_count; ++i) {
            switch (info.operands[i]) {
            case Operand::U8:
                if (!need(1))
                    return false;
                ++pos;
                break;
            case Operand::S24:
                if (!need(3))
                    return false;
                pos += 3;
                break;
            case Operand::U30: {
                std::uint32_t ignored;
                if (!read_u30(ignored))
                    return false;
                break;
            }
            case Operand::Multiname: {
                std::uint32_t index;
                if (!read_u30(index) || index >= pool.multinames.size())
                    return false;
                const QualifiedName qn = resolve_multiname(pool, index);
                if (!qn.resolvable)
                    break;
                if (const std::string dotted = qn.dotted(); wl.has_class(dotted))
                    ++out.class_counts[dotted];
                if (wl.has_method(qn.name))
                    ++out.method_counts[qn.name];
                break;
            }
            }
        }
    }
    return true;
}

} // namespace

NameOccurrenceCounts scan_method_bodies(const AbcFile& abc, const ApiWhitelist& whitelist) {
    NameOccurrenceCounts counts;
    for (const auto& body : abc.bodies)
        if (!scan_body(abc.pool, body.code, whitelist, counts))
            ++counts.body_scan_errors;
    return counts;
}

NameOccurrenceCounts scan_abc(ByteView abc, const ApiWhitelist& whitelist) {
    const AbcFile file = parse_abc(abc);
    NameOccurrenceCounts counts = scan_method_bodies(file, whitelist);
    counts.body_scan_errors += file.errors;
    return counts;
}

} // namespace swfsec::abc
