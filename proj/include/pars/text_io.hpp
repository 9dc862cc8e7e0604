#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <limits>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "pars/error.hpp"

namespace pars {

/// Shortest decimal that parses back to the identical double.
inline std::string format_real(double x) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    if (ec != std::errc{}) throw Error("format_real: conversion failed");
    return std::string(buf, end);
}

inline bool try_parse_real(std::string_view tok, double& out) {
    if (tok.empty()) return false;
    if (tok.front() == '+') tok.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    return ec == std::errc{} && ptr == tok.data() + tok.size();
}

inline bool try_parse_int(std::string_view tok, std::int64_t& out) {
    if (tok.empty()) return false;
    if (tok.front() == '+') tok.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    return ec == std::errc{} && ptr == tok.data() + tok.size();
}

inline double parse_real(std::string_view tok, std::size_t line) {
    double v = 0.0;
    if (!try_parse_real(tok, v)) throw ParseError(line, "expected a real number, got '" + std::string(tok) + "'");
    return v;
}

inline std::int64_t parse_int(std::string_view tok, std::size_t line) {
    std::int64_t v = 0;
    if (!try_parse_int(tok, v)) throw ParseError(line, "expected an integer, got '" + std::string(tok) + "'");
    return v;
}

/// Splits on runs of spaces/tabs.
inline std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

/// Line reader that tracks 1-based line numbers for error messages.
class LineReader {
public:
    explicit LineReader(std::istream& in) : in_(in) {}

    bool next(std::string& line) {
        if (!std::getline(in_, line)) return false;
        ++line_no_;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
    }

    /// Next line split into tokens; throws on EOF.
    std::vector<std::string_view> expect_tokens(std::string_view what) {
        if (!next(buf_)) throw ParseError(line_no_ + 1, "unexpected end of file, expected " + std::string(what));
        return split_ws(buf_);
    }

    std::size_t line_no() const noexcept { return line_no_; }

private:
    std::istream& in_;
    std::string buf_;
    std::size_t line_no_ = 0;
};

}  // namespace pars
