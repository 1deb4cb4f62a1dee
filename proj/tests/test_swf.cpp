#include "swfsec/swf.hpp"

#include "swfsec/rng.hpp"

#include <algorithm>

#include <doctest.h>
#include <zlib.h>

using namespace swfsec;

namespace {

Bytes file_header(const char* sig, std::uint8_t version, std::uint32_t length) {
    return {std::uint8_t(sig[0]), std::uint8_t(sig[1]), std::uint8_t(sig[2]), version,
            std::uint8_t(length), std::uint8_t(length >> 8), std::uint8_t(length >> 16), std::uint8_t(length >> 24)};
}

// RECT with Nbits = 0, frame rate 24.0, frame count 1.
const Bytes kFrameHeader{0x00, 0x00, 0x18, 0x01, 0x00};

Bytes concat(const Bytes& head, const Bytes& tail) {
    Bytes out(head.size() + tail.size());
    std::copy(head.begin(), head.end(), out.begin());
    std::copy(tail.begin(), tail.end(), out.begin() + static_cast<std::ptrdiff_t>(head.size()));
    return out;
}

Bytes fws(const Bytes& body) {
    return concat(file_header("FWS", 10, static_cast<std::uint32_t>(body.size() + 8)), body);
}

Bytes cws(const Bytes& body) {
    uLongf cap = compressBound(static_cast<uLong>(body.size()));
    Bytes z(cap);
    REQUIRE(compress2(z.data(), &cap, body.data(), static_cast<uLong>(body.size()), 6) == Z_OK);
    z.resize(cap);
    return concat(file_header("CWS", 10, static_cast<std::uint32_t>(body.size() + 8)), z);
}

Bytes with(const Bytes& a, const Bytes& b) {
    return concat(a, b);
}

} // namespace

TEST_SUITE("swf") {

TEST_CASE("minimal uncompressed header") {
    const Bytes f = file_header("FWS", 10, 8);
    const auto h = swf::parse_header(f);
    CHECK(h.compression == swf::Compression::None);
    CHECK(h.version == 10);
    CHECK(h.declared_length == 8);
}

TEST_CASE("header errors") {
    const Bytes bad = file_header("XYZ", 10, 8);
    try {
        swf::parse_header(bad);
        FAIL("expected UnknownSignature");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnknownSignature);
    }
    const Bytes shortf{'F', 'W', 'S', 10};
    try {
        swf::parse_header(shortf);
        FAIL("expected Truncated");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Truncated);
    }
}

TEST_CASE("uncompressed body is the identity slice") {
    const Bytes body = with(kFrameHeader, {0x40, 0x00, 0x00, 0x00});
    const Bytes f = fws(body);
    CHECK(swf::decompress_body(swf::parse_header(f), f) == body);
}

TEST_CASE("zlib body inflates to the original payload") {
    const Bytes body = with(kFrameHeader, {0x40, 0x00, 0x40, 0x00, 0x00, 0x00});
    const Bytes f = cws(body);
    const auto h = swf::parse_header(f);
    CHECK(h.compression == swf::Compression::Zlib);
    bool mismatch = true;
    CHECK(swf::decompress_body(h, f, &mismatch) == body);
    CHECK_FALSE(mismatch);
}

TEST_CASE("corrupt zlib stream fails and is flagged by parse") {
    Bytes f = cws(with(kFrameHeader, Bytes(200, 0x40)));
    f.resize(14);
    try {
        swf::decompress_body(swf::parse_header(f), f);
        FAIL("expected DecompressFailed");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DecompressFailed);
    }
    CHECK(swf::parse(f).decompress_failed);
}

TEST_CASE("declared length mismatch is a warning") {
    Bytes f = fws(with(kFrameHeader, {0x00, 0x00}));
    f[4] = 99;
    const auto doc = swf::parse(f);
    CHECK(doc.length_mismatch);
    CHECK(doc.parse_errors == 0);
}

TEST_CASE("ShowFrame then End") {
    const auto ts = swf::read_tags(with(kFrameHeader, {0x40, 0x00, 0x00, 0x00}));
    REQUIRE(ts.tags.size() == 2);
    CHECK(ts.tags[0].code == 1);
    CHECK(ts.tags[1].code == 0);
    CHECK(ts.parse_errors == 0);
    CHECK_FALSE(ts.truncated);
    CHECK(ts.tags[0].offset == 5);
    CHECK(ts.tags[1].offset == 7);
}

TEST_CASE("stream ending after the frame header is truncated") {
    const auto ts = swf::read_tags(kFrameHeader);
    CHECK(ts.tags.empty());
    CHECK(ts.truncated);
}

TEST_CASE("overrunning tag length") {
    // code 87, long length 1000, 10 bytes present
    Bytes s = with(kFrameHeader, {0xFF, 0x15, 0xE8, 0x03, 0x00, 0x00});
    s.resize(s.size() + 10, 0xAA);
    const auto ts = swf::read_tags(s);
    CHECK(ts.parse_errors == 1);
    CHECK(ts.truncated);
    CHECK(ts.tags.empty());
}

TEST_CASE("long tag header and body bytes") {
    // code 87 (0x57): 0x57 << 6 | 0x3F = 0x15FF
    const Bytes s = with(kFrameHeader, {0xFF, 0x15, 0x03, 0x00, 0x00, 0x00, 0x01, 0x02, 0x03, 0x00, 0x00});
    const auto ts = swf::read_tags(s);
    REQUIRE(ts.tags.size() == 2);
    CHECK(ts.tags[0].code == 87);
    CHECK(ts.tags[0].length == 3);
    CHECK(ts.tags[0].long_header);
    CHECK(ts.tags[0].body == Bytes{1, 2, 3});
}

TEST_CASE("RECT with wide fields is skipped bit-exactly") {
    // Nbits = 15: 5 + 60 bits = 65 bits -> 9 bytes, then rate and count.
    Bytes rect(9, 0x00);
    rect[0] = 15 << 3;
    rect.insert(rect.end(), {0x00, 0x18, 0x01, 0x00});
    const auto ts = swf::read_tags(with(rect, {0x40, 0x00, 0x00, 0x00}));
    CHECK(ts.frame_header.size() == 13);
    REQUIRE(ts.tags.size() == 2);
    CHECK(ts.tags[0].code == 1);
}

TEST_CASE("trailing bytes after End are ignored") {
    const auto ts = swf::read_tags(with(kFrameHeader, {0x00, 0x00, 0xDE, 0xAD}));
    CHECK(ts.tags.size() == 1);
    CHECK(ts.parse_errors == 0);
    CHECK_FALSE(ts.truncated);
}

TEST_CASE("assemble and parse round-trip for every available compression") {
    Bytes body = swf::minimal_frame_header(2);
    swf::append_tag(body, 1, {});
    swf::append_tag(body, 87, Bytes(100, 7));
    swf::append_tag(body, 1, {});
    swf::append_tag(body, 0, {});
    std::vector<swf::Compression> modes{swf::Compression::None, swf::Compression::Zlib};
    if (swf::lzma_supported())
        modes.push_back(swf::Compression::Lzma);
    for (auto c : modes) {
        const auto doc = swf::parse(swf::assemble(c, 13, body));
        CHECK(doc.header.compression == c);
        CHECK(doc.parse_errors == 0);
        CHECK_FALSE(doc.length_mismatch);
        REQUIRE(doc.tags.size() == 4);
        CHECK(doc.tags[1].length == 100);
        CHECK(swf::serialize_body(doc) == body);
    }
}

TEST_CASE("tag offsets strictly increase and parse is total on noise") {
    Rng rng(5);
    for (int i = 0; i < 2000; ++i) {
        Bytes b(rng.index(64));
        for (auto& x : b)
            x = static_cast<std::uint8_t>(rng.index(256));
        if (i % 2 && b.size() >= 3) {
            b[0] = 'F';
            b[1] = 'W';
            b[2] = 'S';
        }
        swf::SwfDocument doc;
        CHECK_NOTHROW(doc = swf::parse(b));
        for (std::size_t t = 1; t < doc.tags.size(); ++t)
            CHECK(doc.tags[t].offset > doc.tags[t - 1].offset);
        for (const auto& t : doc.tags)
            CHECK(t.length == t.body.size());
    }
}

} // TEST_SUITE
