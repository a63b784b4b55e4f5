#pragma once

// Small persistence helpers: little-endian binary streams, fixed-precision
// number formatting for CSV output, git-style content hashes, and atomic
// file replacement.

#include "thermalab/errors.hpp"

#include <openssl/evp.h>

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace thermalab::io {

namespace fs = std::filesystem;

class BinaryWriter {
  public:
    template <class T>
        requires std::is_arithmetic_v<T>
    void put(T value)
    {
        using U = std::conditional_t<sizeof(T) == 1, std::uint8_t,
                  std::conditional_t<sizeof(T) == 2, std::uint16_t,
                  std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>>;
        U bits;
        std::memcpy(&bits, &value, sizeof(T));
        for (std::size_t n = 0; n < sizeof(T); ++n)
            buf_.push_back(static_cast<char>((bits >> (8 * n)) & 0xFFU));
    }

    void put_bytes(std::string_view s) { buf_.append(s); }

    const std::string& bytes() const noexcept { return buf_; }

  private:
    std::string buf_;
};

class BinaryReader {
  public:
    explicit BinaryReader(std::string data) : data_(std::move(data)) {}

    template <class T>
        requires std::is_arithmetic_v<T>
    T get()
    {
        using U = std::conditional_t<sizeof(T) == 1, std::uint8_t,
                  std::conditional_t<sizeof(T) == 2, std::uint16_t,
                  std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>>;
        if (pos_ + sizeof(T) > data_.size()) throw Error("binary read past end of data");
        U bits = 0;
        for (std::size_t n = 0; n < sizeof(T); ++n)
            bits |= static_cast<U>(static_cast<std::uint8_t>(data_[pos_ + n])) << (8 * n);
        pos_ += sizeof(T);
        T value;
        std::memcpy(&value, &bits, sizeof(T));
        return value;
    }

    std::string get_bytes(std::size_t n)
    {
        if (pos_ + n > data_.size()) throw Error("binary read past end of data");
        std::string out = data_.substr(pos_, n);
        pos_ += n;
        return out;
    }

    bool at_end() const noexcept { return pos_ == data_.size(); }

  private:
    std::string data_;
    std::size_t pos_ = 0;
};

inline std::string read_file(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot open " + p.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Writes to a sibling temp file then renames, so readers never see a torn file.
inline void write_file_atomic(const fs::path& p, std::string_view data)
{
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    fs::path tmp = p;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out.write(data.data(), static_cast<std::streamsize>(data.size()));
        if (!out) throw Error("short write to " + tmp.string());
    }
    fs::rename(tmp, p);
}

// 17 significant digits: round-trips every double.
inline std::string format_double(double v)
{
    std::array<char, 40> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v,
                                   std::chars_format::general, 17);
    if (ec != std::errc{}) throw Error("number formatting failed");
    return std::string(buf.data(), end);
}

inline std::string hex(const unsigned char* p, std::size_t n)
{
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(digits[p[i] >> 4]);
        out.push_back(digits[p[i] & 0xF]);
    }
    return out;
}

inline std::string sha1_hex(std::string_view data)
{
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha1(), nullptr) != 1)
        throw Error("sha1 digest failed");
    return hex(md.data(), len);
}

// Same digest `git hash-object` reports for a blob with this content.
inline std::string git_blob_hash(std::string_view content)
{
    std::string framed = "blob " + std::to_string(content.size());
    framed.push_back('\0');
    framed.append(content);
    return sha1_hex(framed);
}

} // namespace thermalab::io
