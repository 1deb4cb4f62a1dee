#pragma once

// SWF container: header, optional zlib/LZMA body compression, flat tag stream.
// Tag bodies are never interpreted here.

#include "swfsec/common.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace swfsec::swf {

enum class Compression { None, Zlib, Lzma };

const char* to_string(Compression c);

struct SwfHeader {
    std::array<char, 3> signature{'F', 'W', 'S'};
    std::uint8_t version = 0;
    std::uint32_t declared_length = 8; ///< uncompressed file length, including these 8 bytes
    Compression compression = Compression::None;
};

struct TagRecord {
    std::uint32_t code = 0;
    std::uint32_t length = 0;
    Bytes body;
    std::size_t offset = 0;   ///< position of the tag header within the decompressed body stream
    bool long_header = false; ///< encoded with the 32-bit length form
};

struct SwfDocument {
    SwfHeader header;
    Bytes frame_header; ///< raw RECT + frame rate + frame count
    std::vector<TagRecord> tags;
    unsigned parse_errors = 0;
    bool truncated = false;
    bool decompress_failed = false;
    bool length_mismatch = false; ///< inflated size differs from declared_length - 8
};

/// Whether ZWS bodies can be decoded in this build.
bool lzma_supported() noexcept;

/// Throws Error{Truncated} for inputs under 8 bytes, Error{UnknownSignature}
/// when the signature is not FWS/CWS/ZWS.
SwfHeader parse_header(ByteView bytes);

/// Returns the body stream that starts at byte 8 of the uncompressed file.
/// Throws Error{DecompressFailed} on corrupt compressed data. A size mismatch
/// against the header is reported through `length_mismatch`, not as an error.
Bytes decompress_body(const SwfHeader& header, ByteView bytes, bool* length_mismatch = nullptr);

struct TagStream {
    Bytes frame_header;
    std::vector<TagRecord> tags;
    unsigned parse_errors = 0;
    bool truncated = false;
};

/// Reads tags from a body stream (positioned at the frame RECT). Never throws.
TagStream read_tags(ByteView stream);

/// Full parse. Total on arbitrary input: failures surface as flags and
/// `parse_errors`, never as exceptions.
SwfDocument parse(ByteView bytes);

/// Encodes a single tag header + body.
void append_tag(Bytes& out, std::uint32_t code, ByteView body, bool force_long = false);

/// Encodes the tag stream of `doc` (frame header + tags) without the 8-byte file header.
Bytes serialize_body(const SwfDocument& doc);

/// Wraps a body stream into a complete file with the given compression.
Bytes assemble(Compression compression, std::uint8_t version, ByteView body);

Bytes serialize(const SwfDocument& doc);

/// Bytes for a RECT with all-zero coordinates followed by frame rate and count.
Bytes minimal_frame_header(std::uint16_t frame_count, std::uint16_t frame_rate = 24 << 8);

} // namespace swfsec::swf
