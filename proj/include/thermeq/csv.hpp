#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <type_traits>
#include <vector>

// CSV output with locale-independent, shortest-round-trip number formatting.
// Identical values always produce identical bytes, which is what makes rerun
// and worker-count determinism checkable at the file level.
namespace thermeq::csv {

inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    if (res.ec != std::errc()) throw std::runtime_error("format_double: to_chars failed");
    return std::string(buf, res.ptr);
}

inline std::string format_u64(std::uint64_t v) {
    char buf[24];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string format_i64(std::int64_t v) {
    char buf[24];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

class Field {
public:
    Field(double v) : text_(format_double(v)) {}
    template <class T, std::enable_if_t<std::is_integral_v<T> && std::is_unsigned_v<T>, int> = 0>
    Field(T v) : text_(format_u64(static_cast<std::uint64_t>(v))) {}
    template <class T, std::enable_if_t<std::is_integral_v<T> && std::is_signed_v<T>, int> = 0>
    Field(T v) : text_(format_i64(static_cast<std::int64_t>(v))) {}
    Field(const char* v) : text_(v) {}
    Field(std::string v) : text_(std::move(v)) {}
    const std::string& text() const { return text_; }

private:
    std::string text_;
};

class Writer {
public:
    Writer(const std::string& path, const std::vector<std::string>& header) : out_(path, std::ios::binary) {
        if (!out_) throw std::runtime_error("csv: cannot open " + path);
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (i) out_ << ',';
            out_ << header[i];
        }
        out_ << '\n';
    }

    void row(std::initializer_list<Field> fields) {
        bool first = true;
        for (const auto& f : fields) {
            if (!first) out_ << ',';
            first = false;
            out_ << f.text();
        }
        out_ << '\n';
    }

    void close() {
        out_.close();
        if (out_.fail()) throw std::runtime_error("csv: write failure on close");
    }

private:
    std::ofstream out_;
};

}  // namespace thermeq::csv
