#include "swfsec/abc.hpp"

#include <cstring>

namespace swfsec::abc {

namespace {

struct OutOfData { };

class Reader {
public:
    explicit Reader(ByteView data) : data_(data) { }

    std::size_t pos() const { return pos_; }
    bool at_end() const { return pos_ >= data_.size(); }

    std::uint8_t u8() {
        if (pos_ >= data_.size())
            throw OutOfData{};
        return data_[pos_++];
    }

    std::uint16_t u16() {
        const std::uint16_t lo = u8();
        return std::uint16_t(lo | (u8() << 8));
    }

    // Variable-length encoding shared by u30/u32/s32: 7 bits per byte, at most 5 bytes.
    std::uint32_t u32v() {
        std::uint32_t result = 0;
        for (int i = 0; i < 5; ++i) {
            const std::uint8_t b = u8();
            result |= std::uint32_t(b & 0x7F) << (7 * i);
            if (!(b & 0x80))
                break;
        }
        return result;
    }

    std::uint32_t u30() { return u32v() & 0x3FFFFFFF; }

    std::int32_t s24() {
        std::uint32_t v = u8();
        v |= std::uint32_t(u8()) << 8;
        v |= std::uint32_t(u8()) << 16;
        if (v & 0x800000)
            v |= 0xFF000000;
        return static_cast<std::int32_t>(v);
    }

    double d64() {
        if (data_.size() - pos_ < 8)
            throw OutOfData{};
        double d;
        std::memcpy(&d, data_.data() + pos_, 8);
        pos_ += 8;
        return d;
    }

    ByteView bytes(std::size_t n) {
        if (data_.size() - pos_ < n)
            throw OutOfData{};
        ByteView v = data_.subspan(pos_, n);
        pos_ += n;
        return v;
    }

private:
    ByteView data_;
    std::size_t pos_ = 0;
};

// A declared pool count can never exceed the bytes left (every entry takes at least one).
void check_count(const Reader& r, std::size_t remaining_total, std::uint32_t count) {
    if (count > remaining_total - r.pos() + 1)
        throw OutOfData{};
}

void skip_traits(Reader& r) {
    const std::uint32_t count = r.u30();
    for (std::uint32_t i = 0; i < count; ++i) {
        r.u30(); // name
        const std::uint8_t kind = r.u8();
        switch (kind & 0x0F) {
        case 0: // slot
        case 6: // const
            r.u30();
            r.u30();
            if (r.u30() != 0)
                r.u8();
            break;
        case 1: // method
        case 2: // getter
        case 3: // setter
        case 4: // class
        case 5: // function
            r.u30();
            r.u30();
            break;
        default:
            throw OutOfData{}; // unknown trait kind: the rest of the file cannot be framed
        }
        if ((kind >> 4) & 0x04) {
            const std::uint32_t md = r.u30();
            for (std::uint32_t j = 0; j < md; ++j)
                r.u30();
        }
    }
}

bool multiname_indices_ok(const ConstantPool& p, const MultinameEntry& m) {
    if (m.name_index && *m.name_index >= p.strings.size())
        return false;
    if (m.namespace_index && *m.namespace_index >= p.namespaces.size())
        return false;
    if (m.ns_set_index && *m.ns_set_index >= p.ns_sets.size())
        return false;
    if (m.base_index && *m.base_index >= p.multinames.size())
        return false;
    for (auto t : m.type_params)
        if (t >= p.multinames.size())
            return false;
    return true;
}

unsigned validate_pool(ConstantPool& p) {
    unsigned bad = 0;
    for (std::size_t i = 1; i < p.namespaces.size(); ++i)
        if (p.namespaces[i].name_index >= p.strings.size())
            ++bad;
    for (std::size_t i = 1; i < p.ns_sets.size(); ++i)
        for (auto ns : p.ns_sets[i])
            if (ns >= p.namespaces.size()) {
                ++bad;
                break;
            }
    for (std::size_t i = 1; i < p.multinames.size(); ++i)
        if (!multiname_indices_ok(p, p.multinames[i]))
            ++bad;
    p.malformed = bad != 0;
    return bad;
}

void parse_pool(Reader& r, std::size_t total, ConstantPool& p, AbcLayout& layout) {
    auto begin_pool = [&](int which) {
        layout.pool_count_offset[which] = r.pos();
        const std::uint32_t count = r.u30();
        check_count(r, total, count);
        layout.pool_counts[which] = count;
        return count;
    };

    std::uint32_t n = begin_pool(0);
    for (std::uint32_t i = 1; i < n; ++i)
        p.integers.push_back(static_cast<std::int32_t>(r.u32v()));
    layout.pool_end[0] = r.pos();

    n = begin_pool(1);
    for (std::uint32_t i = 1; i < n; ++i)
        p.uintegers.push_back(r.u32v());
    layout.pool_end[1] = r.pos();

    n = begin_pool(2);
    for (std::uint32_t i = 1; i < n; ++i)
        p.doubles.push_back(r.d64());
    layout.pool_end[2] = r.pos();

    n = begin_pool(3);
    for (std::uint32_t i = 1; i < n; ++i) {
        const std::uint32_t len = r.u30();
        ByteView s = r.bytes(len);
        p.strings.emplace_back(reinterpret_cast<const char*>(s.data()), s.size());
    }
    layout.pool_end[3] = r.pos();

    n = begin_pool(4);
    for (std::uint32_t i = 1; i < n; ++i) {
        NamespaceEntry ns;
        ns.kind = r.u8();
        ns.name_index = r.u30();
        p.namespaces.push_back(ns);
    }
    layout.pool_end[4] = r.pos();

    n = begin_pool(5);
    for (std::uint32_t i = 1; i < n; ++i) {
        const std::uint32_t count = r.u30();
        check_count(r, total, count);
        std::vector<std::uint32_t> set(count);
        for (auto& ns : set)
            ns = r.u30();
        p.ns_sets.push_back(std::move(set));
    }
    layout.pool_end[5] = r.pos();

    n = begin_pool(6);
    for (std::uint32_t i = 1; i < n; ++i) {
        MultinameEntry m;
        const std::uint8_t kind = r.u8();
        m.kind = static_cast<MultinameKind>(kind);
        switch (m.kind) {
        case MultinameKind::QName:
        case MultinameKind::QNameA:
            m.namespace_index = r.u30();
            m.name_index = r.u30();
            break;
        case MultinameKind::RTQName:
        case MultinameKind::RTQNameA:
            m.name_index = r.u30();
            break;
        case MultinameKind::RTQNameL:
        case MultinameKind::RTQNameLA:
            break;
        case MultinameKind::Multiname:
        case MultinameKind::MultinameA:
            m.name_index = r.u30();
            m.ns_set_index = r.u30();
            break;
        case MultinameKind::MultinameL:
        case MultinameKind::MultinameLA:
            m.ns_set_index = r.u30();
            break;
        case MultinameKind::TypeName: {
            m.base_index = r.u30();
            const std::uint32_t params = r.u30();
            check_count(r, total, params);
            for (std::uint32_t j = 0; j < params; ++j)
                m.type_params.push_back(r.u30());
            break;
        }
        default:
            throw OutOfData{}; // unknown kind: entry length unknown, pool unframeable
        }
        p.multinames.push_back(std::move(m));
    }
    layout.pool_end[6] = r.pos();
}

} // namespace

AbcFile parse_abc(ByteView abc) {
    AbcFile file;
    Reader r(abc);
    const std::size_t total = abc.size();
    bool pool_done = false;
    try {
        file.minor_version = r.u16();
        file.major_version = r.u16();
        parse_pool(r, total, file.pool, file.layout);
        pool_done = true;

        file.layout.method_count_offset = r.pos();
        const std::uint32_t methods = r.u30();
        check_count(r, total, methods);
        file.layout.method_count = methods;
        for (std::uint32_t i = 0; i < methods; ++i) {
            const std::uint32_t params = r.u30();
            check_count(r, total, params);
            r.u30(); // return type
            for (std::uint32_t j = 0; j < params; ++j)
                r.u30();
            r.u30(); // name
            const std::uint8_t flags = r.u8();
            if (flags & 0x08) { // HAS_OPTIONAL
                const std::uint32_t options = r.u30();
                for (std::uint32_t j = 0; j < options; ++j) {
                    r.u30();
                    r.u8();
                }
            }
            if (flags & 0x80) // HAS_PARAM_NAMES
                for (std::uint32_t j = 0; j < params; ++j)
                    r.u30();
        }
        file.layout.methods_end = r.pos();

        const std::uint32_t metadata = r.u30();
        for (std::uint32_t i = 0; i < metadata; ++i) {
            r.u30();
            const std::uint32_t items = r.u30();
            check_count(r, total, items);
            for (std::uint32_t j = 0; j < 2 * items; ++j)
                r.u30();
        }

        const std::uint32_t classes = r.u30();
        check_count(r, total, classes);
        for (std::uint32_t i = 0; i < classes; ++i) {
            r.u30(); // name
            r.u30(); // super
            const std::uint8_t flags = r.u8();
            if (flags & 0x08) // CLASS_PROTECTED_NS
                r.u30();
            const std::uint32_t interfaces = r.u30();
            for (std::uint32_t j = 0; j < interfaces; ++j)
                r.u30();
            r.u30(); // iinit
            skip_traits(r);
        }
        for (std::uint32_t i = 0; i < classes; ++i) {
            r.u30(); // cinit
            skip_traits(r);
        }

        const std::uint32_t scripts = r.u30();
        for (std::uint32_t i = 0; i < scripts; ++i) {
            r.u30(); // init
            skip_traits(r);
        }

        file.layout.body_count_offset = r.pos();
        const std::uint32_t bodies = r.u30();
        check_count(r, total, bodies);
        file.layout.body_count = bodies;
        for (std::uint32_t i = 0; i < bodies; ++i) {
            MethodBody body;
            body.method = r.u30();
            r.u30(); // max_stack
            r.u30(); // local_count
            r.u30(); // init_scope_depth
            r.u30(); // max_scope_depth
            const std::uint32_t code_length = r.u30();
            ByteView code = r.bytes(code_length);
            body.code.assign(code.begin(), code.end());
            const std::uint32_t exceptions = r.u30();
            for (std::uint32_t j = 0; j < 5 * std::uint64_t(exceptions); ++j)
                r.u30();
            skip_traits(r);
            file.bodies.push_back(std::move(body));
        }
        file.layout.end = r.pos();
        file.complete = true;
    } catch (const OutOfData&) {
        ++file.errors;
        file.bodies.clear();
    }
    if (pool_done)
        file.errors += validate_pool(file.pool);
    return file;
}

std::optional<ByteView> abc_payload(std::uint32_t tag_code, ByteView tag_body) {
    if (tag_code != kTagDoAbc)
        return tag_body;
    if (tag_body.size() < 4)
        return std::nullopt;
    for (std::size_t i = 4; i < tag_body.size(); ++i)
        if (tag_body[i] == 0)
            return tag_body.subspan(i + 1);
    return std::nullopt;
}

void put_u30(Bytes& out, std::uint32_t value) {
    do {
        std::uint8_t b = value & 0x7F;
        value >>= 7;
        if (value)
            b |= 0x80;
        out.push_back(b);
    } while (value);
}

void put_s24(Bytes& out, std::int32_t value) {
    const auto v = static_cast<std::uint32_t>(value);
    out.push_back(std::uint8_t(v));
    out.push_back(std::uint8_t(v >> 8));
    out.push_back(std::uint8_t(v >> 16));
}

} // namespace swfsec::abc
