#include "swfsec/swf.hpp"

#include <zlib.h>
#ifdef SWFSEC_HAVE_LZMA
#include <lzma.h>
#endif

#include <algorithm>
#include <cstring>

namespace swfsec::swf {

namespace {

constexpr std::size_t kMaxInflated = std::size_t{512} << 20;

std::uint32_t read_u32le(const std::uint8_t* p) {
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
           (std::uint32_t(p[3]) << 24);
}

void put_u16le(Bytes& out, std::uint16_t v) {
    out.push_back(std::uint8_t(v));
    out.push_back(std::uint8_t(v >> 8));
}

void put_u32le(Bytes& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i)
        out.push_back(std::uint8_t(v >> (8 * i)));
}

// Inflates into `out`; returns false on corrupt or truncated input. `out`
// keeps whatever was produced before the failure.
bool inflate_zlib(ByteView in, std::size_t expected, Bytes& out) {
    z_stream zs{};
    if (inflateInit(&zs) != Z_OK)
        return false;
    zs.next_in = const_cast<Bytef*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    out.reserve(std::min(expected, std::size_t{64} << 20));
    std::uint8_t chunk[1 << 15];
    int rc = Z_OK;
    while (true) {
        zs.next_out = chunk;
        zs.avail_out = sizeof chunk;
        rc = inflate(&zs, Z_NO_FLUSH);
        out.insert(out.end(), chunk, chunk + (sizeof chunk - zs.avail_out));
        if (rc == Z_STREAM_END || out.size() > kMaxInflated)
            break;
        if (rc != Z_OK)
            break;
        if (zs.avail_in == 0 && zs.avail_out != 0) {
            rc = Z_BUF_ERROR;
            break;
        }
    }
    inflateEnd(&zs);
    return rc == Z_STREAM_END && out.size() <= kMaxInflated;
}

#ifdef SWFSEC_HAVE_LZMA
// ZWS layout after the 8-byte header: u32 compressed size, 5 property bytes, raw LZMA data.
bool inflate_lzma(ByteView in, std::size_t expected, Bytes& out) {
    if (in.size() < 9)
        return false;
    Bytes alone;
    alone.reserve(in.size() + 8);
    alone.insert(alone.end(), in.begin() + 4, in.begin() + 9);
    for (int i = 0; i < 8; ++i)
        alone.push_back(std::uint8_t(std::uint64_t(expected) >> (8 * i)));
    alone.insert(alone.end(), in.begin() + 9, in.end());

    lzma_stream strm = LZMA_STREAM_INIT;
    if (lzma_alone_decoder(&strm, UINT64_MAX) != LZMA_OK)
        return false;
    strm.next_in = alone.data();
    strm.avail_in = alone.size();
    out.reserve(std::min(expected, std::size_t{64} << 20));
    std::uint8_t chunk[1 << 15];
    bool ok = false;
    while (true) {
        strm.next_out = chunk;
        strm.avail_out = sizeof chunk;
        const lzma_ret rc = lzma_code(&strm, LZMA_RUN);
        out.insert(out.end(), chunk, chunk + (sizeof chunk - strm.avail_out));
        if (out.size() >= expected) {
            // Encoders may append an end marker after the declared size; it is not an error.
            ok = true;
            out.resize(expected);
            break;
        }
        if (rc == LZMA_STREAM_END) {
            ok = true;
            break;
        }
        if (rc != LZMA_OK || (strm.avail_in == 0 && strm.avail_out != 0))
            break;
    }
    lzma_end(&strm);
    return ok;
}
#endif

bool decompress_into(const SwfHeader& header, ByteView bytes, Bytes& out, bool& mismatch) {
    mismatch = false;
    const std::size_t expected = header.declared_length >= 8 ? header.declared_length - 8 : 0;
    bool ok = true;
    switch (header.compression) {
    case Compression::None:
        out.assign(bytes.begin() + 8, bytes.end());
        break;
    case Compression::Zlib:
        ok = inflate_zlib(bytes.subspan(8), expected, out);
        break;
    case Compression::Lzma:
#ifdef SWFSEC_HAVE_LZMA
        ok = inflate_lzma(bytes.subspan(8), expected, out);
#else
        ok = false;
#endif
        break;
    }
    mismatch = out.size() != expected;
    return ok;
}

} // namespace

const char* to_string(Compression c) {
    switch (c) {
    case Compression::None: return "none";
    case Compression::Zlib: return "zlib";
    case Compression::Lzma: return "lzma";
    }
    return "?";
}

bool lzma_supported() noexcept {
#ifdef SWFSEC_HAVE_LZMA
    return true;
#else
    return false;
#endif
}

SwfHeader parse_header(ByteView bytes) {
    if (bytes.size() < 8)
        throw Error(ErrorCode::Truncated, "SWF header needs 8 bytes, got " + std::to_string(bytes.size()));
    SwfHeader h;
    if (bytes[1] != 'W' || bytes[2] != 'S')
        throw Error(ErrorCode::UnknownSignature, "bad signature");
    switch (bytes[0]) {
    case 'F': h.compression = Compression::None; break;
    case 'C': h.compression = Compression::Zlib; break;
    case 'Z': h.compression = Compression::Lzma; break;
    default: throw Error(ErrorCode::UnknownSignature, "bad signature");
    }
    h.signature = {char(bytes[0]), 'W', 'S'};
    h.version = bytes[3];
    h.declared_length = read_u32le(bytes.data() + 4);
    return h;
}

Bytes decompress_body(const SwfHeader& header, ByteView bytes, bool* length_mismatch) {
    if (bytes.size() < 8)
        throw Error(ErrorCode::Truncated, "SWF header needs 8 bytes");
    Bytes out;
    bool mismatch = false;
    if (!decompress_into(header, bytes, out, mismatch)) {
        if (header.compression == Compression::Lzma && !lzma_supported())
            throw Error(ErrorCode::DecompressFailed, "LZMA support not built in");
        throw Error(ErrorCode::DecompressFailed, std::string("corrupt ") + to_string(header.compression) + " stream");
    }
    if (length_mismatch)
        *length_mismatch = mismatch;
    return out;
}

TagStream read_tags(ByteView stream) {
    TagStream ts;
    if (stream.empty()) {
        ts.truncated = true;
        return ts;
    }
    // RECT: 5-bit field width, then four fields of that width, byte aligned.
    const unsigned nbits = stream[0] >> 3;
    const std::size_t rect_bytes = (5 + 4 * nbits + 7) / 8;
    std::size_t pos = rect_bytes + 4;
    if (pos > stream.size()) {
        ts.truncated = true;
        ++ts.parse_errors;
        ts.frame_header.assign(stream.begin(), stream.end());
        return ts;
    }
    ts.frame_header.assign(stream.begin(), stream.begin() + pos);

    while (true) {
        if (pos == stream.size()) {
            ts.truncated = true;
            break;
        }
        if (stream.size() - pos < 2) {
            ++ts.parse_errors;
            ts.truncated = true;
            break;
        }
        TagRecord tag;
        tag.offset = pos;
        const std::uint16_t code_and_length = std::uint16_t(stream[pos] | (stream[pos + 1] << 8));
        pos += 2;
        tag.code = code_and_length >> 6;
        std::uint64_t length = code_and_length & 0x3F;
        if (length == 0x3F) {
            if (stream.size() - pos < 4) {
                ++ts.parse_errors;
                ts.truncated = true;
                break;
            }
            length = read_u32le(stream.data() + pos);
            pos += 4;
            tag.long_header = true;
        }
        if (length > stream.size() - pos) {
            ++ts.parse_errors;
            ts.truncated = true;
            break;
        }
        tag.length = static_cast<std::uint32_t>(length);
        tag.body.assign(stream.begin() + pos, stream.begin() + pos + length);
        pos += length;
        const bool end = tag.code == 0;
        ts.tags.push_back(std::move(tag));
        if (end)
            break; // trailing bytes after End are ignored
    }
    return ts;
}

SwfDocument parse(ByteView bytes) {
    SwfDocument doc;
    try {
        doc.header = parse_header(bytes);
    } catch (const Error& e) {
        doc.parse_errors = 1;
        doc.truncated = true;
        return doc;
    }
    Bytes body;
    bool mismatch = false;
    if (!decompress_into(doc.header, bytes, body, mismatch))
        doc.decompress_failed = true; // keep parsing whatever was inflated
    doc.length_mismatch = mismatch;
    TagStream ts = read_tags(body);
    doc.frame_header = std::move(ts.frame_header);
    doc.tags = std::move(ts.tags);
    doc.parse_errors += ts.parse_errors;
    doc.truncated = ts.truncated;
    return doc;
}

void append_tag(Bytes& out, std::uint32_t code, ByteView body, bool force_long) {
    const bool long_form = force_long || body.size() >= 0x3F;
    const std::uint16_t head = std::uint16_t((code & 0x3FF) << 6) | (long_form ? 0x3F : std::uint16_t(body.size()));
    put_u16le(out, head);
    if (long_form)
        put_u32le(out, static_cast<std::uint32_t>(body.size()));
    out.insert(out.end(), body.begin(), body.end());
}

Bytes serialize_body(const SwfDocument& doc) {
    Bytes body = doc.frame_header;
    for (const auto& tag : doc.tags)
        append_tag(body, tag.code, tag.body, tag.long_header);
    return body;
}

Bytes minimal_frame_header(std::uint16_t frame_count, std::uint16_t frame_rate) {
    Bytes out{0x00}; // RECT with nbits = 0
    put_u16le(out, frame_rate);
    put_u16le(out, frame_count);
    return out;
}

Bytes assemble(Compression compression, std::uint8_t version, ByteView body) {
    Bytes out;
    const char sig = compression == Compression::None ? 'F' : compression == Compression::Zlib ? 'C' : 'Z';
    out.push_back(std::uint8_t(sig));
    out.push_back('W');
    out.push_back('S');
    out.push_back(version);
    put_u32le(out, static_cast<std::uint32_t>(body.size() + 8));
    switch (compression) {
    case Compression::None:
        out.insert(out.end(), body.begin(), body.end());
        break;
    case Compression::Zlib: {
        uLongf cap = compressBound(static_cast<uLong>(body.size()));
        Bytes packed(cap);
        if (compress2(packed.data(), &cap, body.data(), static_cast<uLong>(body.size()), Z_BEST_COMPRESSION) != Z_OK)
            throw Error(ErrorCode::IoError, "zlib compression failed");
        out.insert(out.end(), packed.begin(), packed.begin() + cap);
        break;
    }
    case Compression::Lzma: {
#ifdef SWFSEC_HAVE_LZMA
        lzma_options_lzma opts;
        lzma_lzma_preset(&opts, 6);
        lzma_stream strm = LZMA_STREAM_INIT;
        if (lzma_alone_encoder(&strm, &opts) != LZMA_OK)
            throw Error(ErrorCode::IoError, "lzma encoder init failed");
        Bytes packed(body.size() + body.size() / 2 + 1024);
        strm.next_in = body.data();
        strm.avail_in = body.size();
        strm.next_out = packed.data();
        strm.avail_out = packed.size();
        const lzma_ret rc = lzma_code(&strm, LZMA_FINISH);
        const std::size_t produced = packed.size() - strm.avail_out;
        lzma_end(&strm);
        if (rc != LZMA_STREAM_END || produced < 13)
            throw Error(ErrorCode::IoError, "lzma compression failed");
        // .lzma header is 5 property bytes + 8 size bytes; SWF keeps only the properties.
        put_u32le(out, static_cast<std::uint32_t>(produced - 13));
        out.insert(out.end(), packed.begin(), packed.begin() + 5);
        out.insert(out.end(), packed.begin() + 13, packed.begin() + produced);
#else
        throw Error(ErrorCode::DecompressFailed, "LZMA support not built in");
#endif
        break;
    }
    }
    return out;
}

Bytes serialize(const SwfDocument& doc) {
    return assemble(doc.header.compression, doc.header.version, serialize_body(doc));
}

} // namespace swfsec::swf
