#include "abc_builder.hpp"

#include "swfsec/swfgen.hpp"

#include <algorithm>

namespace swfsec::swfgen {

namespace detail {

namespace {

constexpr std::uint8_t kGetLex = 0x60;
constexpr std::uint8_t kFindPropStrict = 0x5D;
constexpr std::uint8_t kCallProperty = 0x46;
constexpr std::uint8_t kPop = 0x29;
constexpr std::uint8_t kReturnVoid = 0x47;
constexpr std::uint8_t kInvalidOpcode = 0xFF;

// Receiver looked up before each method call; not a system name.
constexpr const char* kReceiver = "__swfgen_receiver";

void append(Bytes& out, const Bytes& more) {
    out.insert(out.end(), more.begin(), more.end());
}

std::size_t u30_length(ByteView data, std::size_t offset) {
    std::size_t n = 0;
    while (n < 5 && offset + n < data.size()) {
        if (!(data[offset + n++] & 0x80))
            break;
    }
    return n;
}

} // namespace

RefName split_ref(const std::string& key) {
    RefName r;
    std::string rest;
    if (key.rfind("class:", 0) == 0) {
        r.is_class = true;
        rest = key.substr(6);
    } else if (key.rfind("method:", 0) == 0) {
        rest = key.substr(7);
    } else {
        throw Error(ErrorCode::UnencodableName, "'" + key + "' is not a class: or method: key");
    }
    if (rest.empty() || rest.find('\0') != std::string::npos)
        throw Error(ErrorCode::UnencodableName, "'" + key + "' has no usable name");
    if (r.is_class) {
        const auto dot = rest.rfind('.');
        if (dot != std::string::npos) {
            r.ns = rest.substr(0, dot);
            rest = rest.substr(dot + 1);
            if (rest.empty() || r.ns.empty())
                throw Error(ErrorCode::UnencodableName, "'" + key + "' has an empty package or name part");
        }
    }
    r.name = rest;
    return r;
}

std::uint32_t AbcBuilder::string(const std::string& s) {
    auto it = string_ids_.find(s);
    if (it != string_ids_.end())
        return it->second;
    Bytes e;
    abc::put_u30(e, static_cast<std::uint32_t>(s.size()));
    e.insert(e.end(), s.begin(), s.end());
    strings_.push_back(std::move(e));
    const auto id = string_base_ + static_cast<std::uint32_t>(strings_.size() - 1);
    string_ids_.emplace(s, id);
    return id;
}

std::uint32_t AbcBuilder::package(const std::string& name) {
    auto it = ns_ids_.find(name);
    if (it != ns_ids_.end())
        return it->second;
    Bytes e{abc::ns_kind::Package};
    abc::put_u30(e, string(name));
    namespaces_.push_back(std::move(e));
    const auto id = ns_base_ + static_cast<std::uint32_t>(namespaces_.size() - 1);
    ns_ids_.emplace(name, id);
    return id;
}

std::uint32_t AbcBuilder::qname(const std::string& ns, const std::string& name) {
    const std::string key = ns + '\0' + name;
    auto it = mn_ids_.find(key);
    if (it != mn_ids_.end())
        return it->second;
    const std::uint32_t ns_id = package(ns);
    const std::uint32_t name_id = string(name);
    Bytes e{static_cast<std::uint8_t>(abc::MultinameKind::QName)};
    abc::put_u30(e, ns_id);
    abc::put_u30(e, name_id);
    multinames_.push_back(std::move(e));
    const auto id = mn_base_ + static_cast<std::uint32_t>(multinames_.size() - 1);
    mn_ids_.emplace(key, id);
    return id;
}

std::uint32_t AbcBuilder::add_method(const Bytes& code, std::uint32_t max_stack) {
    const auto index = method_base_ + static_cast<std::uint32_t>(methods_.size());
    methods_.push_back({0x00, 0x00, 0x00, 0x00}); // no params, any return type, no name, no flags

    Bytes body;
    abc::put_u30(body, index);
    abc::put_u30(body, max_stack);
    abc::put_u30(body, 1); // local_count
    abc::put_u30(body, 0); // init_scope_depth
    abc::put_u30(body, 1); // max_scope_depth
    abc::put_u30(body, static_cast<std::uint32_t>(code.size()));
    append(body, code);
    abc::put_u30(body, 0); // exceptions
    abc::put_u30(body, 0); // traits
    bodies_.push_back(std::move(body));
    return index;
}

std::uint32_t AbcBuilder::add_reference_method(const std::map<std::string, int>& refs) {
    Bytes code;
    bool calls = false;
    for (const auto& [key, units] : refs) {
        if (units < 0)
            throw Error(ErrorCode::UnencodableName, "negative count for '" + key + "'");
        if (units == 0)
            continue;
        const RefName r = split_ref(key);
        const std::uint32_t mn = qname(r.ns, r.name);
        for (int u = 0; u < units; ++u) {
            if (r.is_class) {
                code.push_back(kGetLex);
                abc::put_u30(code, mn);
                code.push_back(kPop);
            } else {
                code.push_back(kFindPropStrict);
                abc::put_u30(code, qname("", kReceiver));
                code.push_back(kCallProperty);
                abc::put_u30(code, mn);
                abc::put_u30(code, 0);
                code.push_back(kPop);
                calls = true;
            }
        }
    }
    code.push_back(kReturnVoid);
    return add_method(code, calls ? 2 : 1);
}

std::uint32_t AbcBuilder::add_bad_method() {
    return add_method({kInvalidOpcode, kReturnVoid}, 1);
}

Bytes extend_abc(ByteView abc, const abc::AbcFile& parsed, const AbcBuilder& add) {
    const abc::AbcLayout& l = parsed.layout;
    Bytes out(abc.begin(), abc.begin() + 4);
    auto copy = [&](std::size_t from, std::size_t to) { out.insert(out.end(), abc.begin() + from, abc.begin() + to); };

    const std::vector<Bytes>* additions[7] = {nullptr, nullptr, nullptr, &add.strings(), &add.namespaces(), nullptr,
                                              &add.multinames()};
    for (int i = 0; i < 7; ++i) {
        const std::size_t count_end = l.pool_count_offset[i] + u30_length(abc, l.pool_count_offset[i]);
        const std::size_t extra = additions[i] ? additions[i]->size() : 0;
        std::uint32_t count = l.pool_counts[i];
        if (extra > 0)
            count = std::max<std::uint32_t>(count, 1) + static_cast<std::uint32_t>(extra);
        abc::put_u30(out, count);
        copy(count_end, l.pool_end[i]);
        if (additions[i])
            for (const auto& e : *additions[i])
                append(out, e);
    }

    const std::size_t methods_start = l.method_count_offset + u30_length(abc, l.method_count_offset);
    abc::put_u30(out, l.method_count + static_cast<std::uint32_t>(add.methods().size()));
    copy(methods_start, l.methods_end);
    for (const auto& m : add.methods())
        append(out, m);

    copy(l.methods_end, l.body_count_offset);

    const std::size_t bodies_start = l.body_count_offset + u30_length(abc, l.body_count_offset);
    abc::put_u30(out, l.body_count + static_cast<std::uint32_t>(add.bodies().size()));
    copy(bodies_start, l.end);
    for (const auto& b : add.bodies())
        append(out, b);
    copy(l.end, abc.size());
    return out;
}

} // namespace detail

Bytes build_min_abc(const std::map<std::string, int>& refs, int bad_bodies) {
    detail::AbcBuilder b(1, 1, 1, 0);
    const std::uint32_t init = b.add_reference_method(refs);
    for (int i = 0; i < bad_bodies; ++i)
        b.add_bad_method();

    Bytes out{16, 0, 46, 0}; // minor 16, major 46
    auto pool = [&](const std::vector<Bytes>& entries) {
        abc::put_u30(out, entries.empty() ? 0 : static_cast<std::uint32_t>(entries.size() + 1));
        for (const auto& e : entries)
            detail::append(out, e);
    };
    pool({}); // int
    pool({}); // uint
    pool({}); // double
    pool(b.strings());
    pool(b.namespaces());
    pool({}); // ns_set
    pool(b.multinames());

    abc::put_u30(out, static_cast<std::uint32_t>(b.methods().size()));
    for (const auto& m : b.methods())
        detail::append(out, m);
    abc::put_u30(out, 0); // metadata
    abc::put_u30(out, 0); // classes
    abc::put_u30(out, 1); // scripts
    abc::put_u30(out, init);
    abc::put_u30(out, 0); // script traits
    abc::put_u30(out, static_cast<std::uint32_t>(b.bodies().size()));
    for (const auto& body : b.bodies())
        detail::append(out, body);
    return out;
}

Bytes doabc_body(ByteView abc) {
    Bytes out(5 + abc.size(), 0x00);
    out[0] = 0x01; // lazy-initialize flag, then an empty name
    std::copy(abc.begin(), abc.end(), out.begin() + 5);
    return out;
}

} // namespace swfsec::swfgen
