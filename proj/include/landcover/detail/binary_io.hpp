#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "landcover/error.hpp"

namespace landcover::detail {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) fail(ErrorCode::Io, "read failed for " + path.string());
    return bytes;
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::Io, "write failed for " + path.string());
}

inline void put_u16_le(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>(v >> 8));
}

inline void put_u32_le(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_f32_le(std::string& out, float v) { put_u32_le(out, std::bit_cast<std::uint32_t>(v)); }

inline std::uint16_t get_u16_le(const char* p) {
    const auto* b = reinterpret_cast<const unsigned char*>(p);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

inline std::uint32_t get_u32_le(const char* p) {
    const auto* b = reinterpret_cast<const unsigned char*>(p);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline float get_f32_le(const char* p) { return std::bit_cast<float>(get_u32_le(p)); }

/// magic | u32 LE header length | JSON header | payload. Shared by the
/// raster, checkpoint and class-map files; only the magic differs.
struct Container {
    nlohmann::json header;
    std::string_view payload;  // view into the owning buffer
};

inline std::string encode_container(std::string_view magic, const nlohmann::json& header,
                                    std::string_view payload) {
    const std::string text = header.dump();
    std::string out;
    out.reserve(magic.size() + 4 + text.size() + payload.size());
    out.append(magic);
    put_u32_le(out, static_cast<std::uint32_t>(text.size()));
    out.append(text);
    out.append(payload);
    return out;
}

/// Parses a container held in `bytes`. The returned payload views into `bytes`.
inline Container decode_container(std::string_view bytes, std::string_view magic) {
    if (bytes.size() < magic.size() || bytes.substr(0, magic.size()) != magic)
        fail(ErrorCode::BadMagic, "expected magic '" + std::string(magic.substr(0, 4)) + "'");
    if (bytes.size() < magic.size() + 4) fail(ErrorCode::HeaderMismatch, "truncated header length");
    const std::uint32_t len = get_u32_le(bytes.data() + magic.size());
    const std::size_t start = magic.size() + 4;
    if (bytes.size() - start < len) fail(ErrorCode::HeaderMismatch, "truncated JSON header");
    Container c;
    try {
        c.header = nlohmann::json::parse(bytes.substr(start, len));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::HeaderMismatch, std::string("malformed JSON header: ") + e.what());
    }
    if (!c.header.is_object()) fail(ErrorCode::HeaderMismatch, "JSON header is not an object");
    c.payload = bytes.substr(start + len);
    return c;
}

} // namespace landcover::detail
