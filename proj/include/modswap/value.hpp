#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace modswap {

// Logical simulation time. Integer ticks, never decreasing.
using Tick = std::int64_t;

using CallId = std::uint64_t;
using InstanceId = std::uint64_t;

// Environment entries and conversational-state fields are limited to these
// three value types.
enum class ValueType { Int, String, Bool };

using Value = std::variant<std::int64_t, std::string, bool>;

inline ValueType type_of(const Value& v) {
    switch (v.index()) {
    case 0: return ValueType::Int;
    case 1: return ValueType::String;
    default: return ValueType::Bool;
    }
}

inline Value default_value(ValueType t) {
    switch (t) {
    case ValueType::Int: return Value{std::int64_t{0}};
    case ValueType::String: return Value{std::string{}};
    default: return Value{false};
    }
}

inline const char* to_string(ValueType t) {
    switch (t) {
    case ValueType::Int: return "int";
    case ValueType::String: return "string";
    default: return "bool";
    }
}

inline std::optional<ValueType> parse_value_type(std::string_view s) {
    if (s == "int") return ValueType::Int;
    if (s == "string") return ValueType::String;
    if (s == "bool") return ValueType::Bool;
    return std::nullopt;
}

inline std::string to_string(const Value& v) {
    if (const auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
    if (const auto* s = std::get_if<std::string>(&v)) return *s;
    return std::get<bool>(v) ? "true" : "false";
}

// Renders a value so that parse_literal() reads it back; strings are quoted.
inline std::string to_literal(const Value& v) {
    if (const auto* s = std::get_if<std::string>(&v)) return "\"" + *s + "\"";
    return to_string(v);
}

// Parses a literal of known type. Returns nullopt on malformed input.
inline std::optional<Value> parse_value(ValueType t, std::string_view text) {
    switch (t) {
    case ValueType::Int: {
        if (text.empty()) return std::nullopt;
        std::size_t i = (text[0] == '-' || text[0] == '+') ? 1 : 0;
        if (i == text.size()) return std::nullopt;
        for (std::size_t k = i; k < text.size(); ++k)
            if (text[k] < '0' || text[k] > '9') return std::nullopt;
        return Value{static_cast<std::int64_t>(std::stoll(std::string(text)))};
    }
    case ValueType::Bool:
        if (text == "true") return Value{true};
        if (text == "false") return Value{false};
        return std::nullopt;
    default: {
        std::string s(text);
        if (s.size() >= 2 && s.front() == '"' && s.back() == '"')
            s = s.substr(1, s.size() - 2);
        return Value{s};
    }
    }
}

// Infers the type of an untyped literal: quoted -> string, true/false -> bool,
// digits -> int, anything else -> string.
inline Value parse_literal(std::string_view text) {
    if (text.size() >= 2 && text.front() == '"' && text.back() == '"')
        return Value{std::string(text.substr(1, text.size() - 2))};
    if (auto b = parse_value(ValueType::Bool, text)) return *b;
    if (auto i = parse_value(ValueType::Int, text)) return *i;
    return Value{std::string(text)};
}

}  // namespace modswap
