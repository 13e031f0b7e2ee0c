#include "tinr/json_value.hpp"

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

namespace tinr {

namespace {

bool is_ascii(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return static_cast<unsigned char>(c) < 0x80; });
}

}  // namespace

std::string nfc(std::string_view utf8) {
    if (is_ascii(utf8)) return std::string(utf8);
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* normalizer = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status)) return std::string(utf8);
    icu::UnicodeString source = icu::UnicodeString::fromUTF8(
        icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
    if (source.isBogus()) return std::string(utf8);
    icu::UnicodeString normalized = normalizer->normalize(source, status);
    if (U_FAILURE(status)) return std::string(utf8);
    std::string out;
    normalized.toUTF8String(out);
    return out;
}

Json canonical_value(const Json& value) {
    switch (value.type()) {
        case Json::value_t::string:
            return nfc(value.get_ref<const std::string&>());
        case Json::value_t::number_float: {
            const double d = value.get<double>();
            constexpr double kTwo63 = 9223372036854775808.0;
            if (std::isfinite(d) && d == std::floor(d) && d >= -kTwo63 && d < kTwo63) {
                return static_cast<std::int64_t>(d);
            }
            return value;
        }
        case Json::value_t::number_unsigned: {
            const auto u = value.get<std::uint64_t>();
            if (u <= static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
                return static_cast<std::int64_t>(u);
            }
            return value;
        }
        case Json::value_t::array: {
            Json out = Json::array();
            for (const auto& element : value) out.push_back(canonical_value(element));
            return out;
        }
        case Json::value_t::object: {
            Json out = Json::object();
            for (const auto& [key, element] : value.items()) out[nfc(key)] = canonical_value(element);
            return out;
        }
        default:
            return value;
    }
}

std::string canonical_dump(const Json& value) { return compact_dump(canonical_value(value)); }

std::string compact_dump(const Json& value) {
    return value.dump(-1, ' ', false, Json::error_handler_t::replace);
}

bool values_equal(const Json& a, const Json& b) {
    if (a.is_number() && b.is_number()) {
        if (a.is_number_integer() && b.is_number_integer()) {
            if (a.is_number_unsigned() && b.is_number_unsigned()) return a.get<std::uint64_t>() == b.get<std::uint64_t>();
            if (!a.is_number_unsigned() && !b.is_number_unsigned()) return a.get<std::int64_t>() == b.get<std::int64_t>();
        }
        const double x = a.get<double>();
        const double y = b.get<double>();
        if (x == y) return true;
        if (!std::isfinite(x) || !std::isfinite(y)) return false;
        return std::abs(x - y) <= 1e-9 * std::max(std::abs(x), std::abs(y));
    }
    if (a.type() != b.type()) return false;
    switch (a.type()) {
        case Json::value_t::string:
            return nfc(a.get_ref<const std::string&>()) == nfc(b.get_ref<const std::string&>());
        case Json::value_t::array:
            if (a.size() != b.size()) return false;
            for (std::size_t i = 0; i < a.size(); ++i) {
                if (!values_equal(a[i], b[i])) return false;
            }
            return true;
        case Json::value_t::object: {
            if (a.size() != b.size()) return false;
            for (const auto& [key, element] : a.items()) {
                auto it = b.find(key);
                if (it == b.end() || !values_equal(element, *it)) return false;
            }
            return true;
        }
        default:
            return a == b;
    }
}

}  // namespace tinr
