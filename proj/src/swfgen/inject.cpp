#include "abc_builder.hpp"

#include "swfsec/swfgen.hpp"

namespace swfsec::swfgen {

namespace detail {
std::uint32_t stub_code(std::size_t feature, const features::TagTable& table);
void append_stub(Bytes& out, std::size_t feature, const features::TagTable& table, std::uint16_t& next_id);
void check_abc_tag(const features::TagTable& table);
std::size_t structural_slot(const std::string& name);
} // namespace detail

namespace {

std::size_t tag_end(const swf::TagRecord& t) {
    return t.offset + (t.long_header ? 6 : 2) + t.length;
}

struct AbcSite {
    std::size_t tag = 0;
    std::size_t prefix = 0; ///< bytes before the ABC inside the tag body
    abc::AbcFile parsed;
};

std::optional<AbcSite> last_clean_abc(const std::vector<swf::TagRecord>& tags) {
    for (std::size_t i = tags.size(); i-- > 0;) {
        const auto& t = tags[i];
        if (t.code != abc::kTagDoAbc && t.code != abc::kTagDoAbcDefine)
            continue;
        auto payload = abc::abc_payload(t.code, t.body);
        if (!payload)
            continue;
        abc::AbcFile parsed = abc::parse_abc(*payload);
        if (!parsed.complete || parsed.pool.malformed)
            continue;
        return AbcSite{i, t.body.size() - payload->size(), std::move(parsed)};
    }
    return std::nullopt;
}

} // namespace

Bytes inject(ByteView swf_bytes, const InjectionPlan& plan, const features::TagTable& table) {
    if (plan.empty()) {
        swf::parse_header(swf_bytes); // still reject non-SWF input
        return Bytes(swf_bytes.begin(), swf_bytes.end());
    }
    swf::SwfHeader header;
    Bytes body;
    try {
        header = swf::parse_header(swf_bytes);
        body = swf::decompress_body(header, swf_bytes);
    } catch (const Error& e) {
        throw Error(ErrorCode::ParseFailed, e.what());
    }
    const swf::TagStream ts = swf::read_tags(body);
    if (ts.frame_header.size() < 5 || (ts.tags.empty() && ts.parse_errors > 0 && ts.frame_header.size() == body.size()))
        throw Error(ErrorCode::ParseFailed, "no usable frame header");

    std::array<int, features::kStructuralCount> add{};
    for (const auto& [name, n] : plan.add_tags) {
        if (n < 0)
            throw Error(ErrorCode::UnrealizablePlan, "negative injection for " + name);
        add[detail::structural_slot(name)] += n;
    }
    std::map<std::string, int> refs;
    for (const auto& [key, n] : plan.add_api_refs) {
        if (n < 0)
            throw Error(ErrorCode::UnrealizablePlan, "negative injection for " + key);
        if (n > 0) {
            detail::split_ref(key);
            refs[key] = n;
        }
    }

    const int errors = add[features::Errors];
    const bool need_abc = !refs.empty() || errors > 0;
    std::optional<AbcSite> site;
    Bytes new_abc_tag;
    Bytes appended; // new tags placed before End
    if (need_abc) {
        site = last_clean_abc(ts.tags);
        if (site) {
            const abc::AbcLayout& l = site->parsed.layout;
            detail::AbcBuilder b(std::max<std::uint32_t>(l.pool_counts[3], 1), std::max<std::uint32_t>(l.pool_counts[4], 1),
                                 std::max<std::uint32_t>(l.pool_counts[6], 1), l.method_count);
            if (!refs.empty())
                b.add_reference_method(refs);
            for (int i = 0; i < errors; ++i)
                b.add_bad_method();
            const swf::TagRecord& t = ts.tags[site->tag];
            Bytes tag_body(t.body.begin(), t.body.begin() + static_cast<std::ptrdiff_t>(site->prefix));
            const Bytes extended = detail::extend_abc(ByteView(t.body).subspan(site->prefix), site->parsed, b);
            tag_body.insert(tag_body.end(), extended.begin(), extended.end());
            swf::append_tag(new_abc_tag, t.code, tag_body, t.long_header);
        } else {
            if (add[features::Scripts] == 0)
                throw Error(ErrorCode::UnrealizablePlan, "file has no ABC to extend and the plan adds no Scripts unit");
            detail::check_abc_tag(table);
            --add[features::Scripts];
            swf::append_tag(appended, abc::kTagDoAbc, doabc_body(build_min_abc(refs, errors)));
        }
    }

    std::uint16_t next_id = 0xF000; // well above ids a small file uses
    for (std::size_t f = 0; f < features::kStructuralCount; ++f) {
        if (f == features::Errors)
            continue;
        for (int i = 0; i < add[f]; ++i)
            detail::append_stub(appended, f, table, next_id);
    }

    std::size_t insert_at = ts.frame_header.size();
    if (!ts.tags.empty())
        insert_at = ts.tags.back().code == 0 ? ts.tags.back().offset : tag_end(ts.tags.back());

    Bytes out_body;
    out_body.reserve(body.size() + appended.size() + new_abc_tag.size());
    if (site) {
        const swf::TagRecord& t = ts.tags[site->tag];
        out_body.insert(out_body.end(), body.begin(), body.begin() + static_cast<std::ptrdiff_t>(t.offset));
        out_body.insert(out_body.end(), new_abc_tag.begin(), new_abc_tag.end());
        out_body.insert(out_body.end(), body.begin() + static_cast<std::ptrdiff_t>(tag_end(t)),
                        body.begin() + static_cast<std::ptrdiff_t>(insert_at));
    } else {
        out_body.insert(out_body.end(), body.begin(), body.begin() + static_cast<std::ptrdiff_t>(insert_at));
    }
    out_body.insert(out_body.end(), appended.begin(), appended.end());
    out_body.insert(out_body.end(), body.begin() + static_cast<std::ptrdiff_t>(insert_at), body.end());
    try {
        return swf::assemble(header.compression, header.version, out_body);
    } catch (const Error& e) {
        throw Error(ErrorCode::ParseFailed, e.what());
    }
}

} // namespace swfsec::swfgen
