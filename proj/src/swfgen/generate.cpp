#include "abc_builder.hpp"

#include "swfsec/rng.hpp"
#include "swfsec/swfgen.hpp"

#include <algorithm>

namespace swfsec::swfgen {

namespace detail {

namespace {

// Preferred stub tag per structural feature (indexed like kStructuralNames).
constexpr std::uint32_t kPreferredCode[features::kStructuralCount] = {
    1,  // ShowFrame
    2,  // DefineShape
    19, // SoundStreamBlock
    87, // DefineBinaryData
    12, // DoAction
    10, // DefineFont
    39, // DefineSprite
    46, // DefineMorphShape
    11, // DefineText
    8,  // JPEGTables
    61, // VideoFrame
    7,  // DefineButton
    0, 0,
};

void put_u16(Bytes& out, std::uint16_t v) {
    out.push_back(std::uint8_t(v));
    out.push_back(std::uint8_t(v >> 8));
}

// Smallest bodies that keep each tag's fixed fields; content is never rendered.
Bytes stub_body(std::uint32_t code, std::uint16_t id) {
    Bytes b;
    switch (code) {
    case 2: // id, empty RECT, no fill/line styles, 0 index bits, end record
        put_u16(b, id);
        b.insert(b.end(), {0x00, 0x00, 0x00, 0x00, 0x00});
        break;
    case 87: // id, reserved
        put_u16(b, id);
        b.insert(b.end(), {0x00, 0x00, 0x00, 0x00});
        break;
    case 12: // ActionEndFlag
        b.push_back(0x00);
        break;
    case 10: case 46:
        put_u16(b, id);
        break;
    case 39: // id, frame count 0, nested End
        put_u16(b, id);
        b.insert(b.end(), {0x00, 0x00, 0x00, 0x00});
        break;
    case 11: // id, RECT, MATRIX, glyph/advance bits, end
        put_u16(b, id);
        b.insert(b.end(), {0x00, 0x00, 0x00, 0x00, 0x00});
        break;
    case 61: // stream id, frame number
        put_u16(b, id);
        put_u16(b, 0);
        break;
    case 7: // id, end of button records, end of actions
        put_u16(b, id);
        b.insert(b.end(), {0x00, 0x00});
        break;
    default:
        break;
    }
    return b;
}

} // namespace

std::uint32_t stub_code(std::size_t feature, const features::TagTable& table) {
    if (feature == features::Unknown)
        return table.unused_code();
    const std::uint32_t preferred = kPreferredCode[feature];
    if (preferred != 0 && table.lookup(preferred) == static_cast<int>(feature))
        return preferred;
    const auto codes = table.codes_for(feature);
    if (codes.empty())
        throw Error(ErrorCode::UnrealizablePlan, std::string("no tag code maps to ") +
                                                     std::string(features::kStructuralNames[feature]));
    return codes.front();
}

void append_stub(Bytes& out, std::size_t feature, const features::TagTable& table, std::uint16_t& next_id) {
    const std::uint32_t code = stub_code(feature, table);
    swf::append_tag(out, code, stub_body(code, next_id++));
}

/// A tag header promising more bytes than remain: one parse error, stream truncated.
void append_overrun(Bytes& out, const features::TagTable& table) {
    const std::uint16_t head = std::uint16_t((table.unused_code() & 0x3FF) << 6) | 62;
    put_u16(out, head);
}

void check_abc_tag(const features::TagTable& table) {
    if (table.lookup(abc::kTagDoAbc) != static_cast<int>(features::Scripts))
        throw Error(ErrorCode::UnrealizablePlan, "tag table does not count DoABC as Scripts");
}

std::size_t structural_slot(const std::string& name) {
    auto idx = features::structural_index(name);
    if (!idx)
        throw Error(ErrorCode::UnrealizablePlan, "'" + name + "' is not a structural feature");
    return *idx;
}

} // namespace detail

bool InjectionPlan::empty() const {
    for (const auto& [k, v] : add_tags)
        if (v != 0)
            return false;
    for (const auto& [k, v] : add_api_refs)
        if (v != 0)
            return false;
    return true;
}

Bytes generate(const FileProfile& profile, const features::TagTable& table, const abc::ApiWhitelist& whitelist) {
    std::array<int, features::kStructuralCount> plan{};
    for (const auto& [name, n] : profile.structural_plan) {
        if (n < 0)
            throw Error(ErrorCode::UnrealizablePlan, "negative count for " + name);
        plan[detail::structural_slot(name)] += n;
    }
    std::map<std::string, int> refs;
    for (const auto& [key, n] : profile.api_plan) {
        if (n < 0)
            throw Error(ErrorCode::UnrealizablePlan, "negative count for " + key);
        if (n == 0)
            continue;
        const detail::RefName r = detail::split_ref(key);
        if (!whitelist.contains_entry(key))
            throw Error(ErrorCode::UnrealizablePlan, "'" + key + "' is not whitelisted and would not be counted");
        // A reference is counted under both maps when its parts collide with other entries.
        if ((r.is_class && whitelist.has_method(r.name)) || (!r.is_class && whitelist.has_class(r.name)))
            throw Error(ErrorCode::UnrealizablePlan, "'" + key + "' would also match another whitelist entry");
        refs[key] = n;
    }
    if (plan[features::Frames] > 0xFFFF)
        throw Error(ErrorCode::UnrealizablePlan, "frame count exceeds the header field");

    const int errors = plan[features::Errors];
    const bool need_abc = !refs.empty() || errors > 1;
    int scripts = plan[features::Scripts];
    if (need_abc && scripts == 0)
        throw Error(ErrorCode::UnrealizablePlan, "API references and extra errors need a Scripts unit");
    const bool with_abc = scripts > 0;
    if (with_abc) {
        detail::check_abc_tag(table);
        --scripts;
    }

    std::vector<std::size_t> stubs;
    for (std::size_t f = 0; f < features::kStructuralCount; ++f) {
        if (f == features::Frames || f == features::Errors)
            continue;
        const int n = f == features::Scripts ? scripts : plan[f];
        stubs.insert(stubs.end(), static_cast<std::size_t>(n), f);
    }
    Rng rng(profile.seed);
    rng.shuffle(std::span<std::size_t>(stubs));

    Bytes body = swf::minimal_frame_header(static_cast<std::uint16_t>(plan[features::Frames]));
    std::uint16_t next_id = 1;
    for (std::size_t f : stubs)
        detail::append_stub(body, f, table, next_id);
    if (with_abc) {
        const Bytes abc = build_min_abc(refs, std::max(0, errors - 1));
        swf::append_tag(body, abc::kTagDoAbc, doabc_body(abc));
    }
    for (int i = 0; i < plan[features::Frames]; ++i)
        detail::append_stub(body, features::Frames, table, next_id);
    if (errors > 0)
        detail::append_overrun(body, table);
    else
        swf::append_tag(body, 0, {});
    return swf::assemble(profile.compression, profile.version, body);
}

InjectionPlan plan_from_attack(const evasion::AttackResult& result) {
    InjectionPlan plan;
    for (const auto& [name, units] : result.injected) {
        if (units <= 0)
            continue;
        if (features::structural_index(name))
            plan.add_tags[name] += units;
        else
            plan.add_api_refs[name] += units;
    }
    return plan;
}

} // namespace swfsec::swfgen
