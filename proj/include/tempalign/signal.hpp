#pragma once

#include "tempalign/error.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <string>
#include <string_view>

namespace tempalign {

// The four temporal control signals a caption can assert.
enum class SignalType { Ordering, Duration, Frequency, Timestamp };

inline constexpr std::array<SignalType, 4> kAllSignals = {
    SignalType::Ordering, SignalType::Duration, SignalType::Frequency, SignalType::Timestamp};

constexpr std::string_view to_string(SignalType s) {
    switch (s) {
    case SignalType::Ordering: return "ordering";
    case SignalType::Duration: return "duration";
    case SignalType::Frequency: return "frequency";
    case SignalType::Timestamp: return "timestamp";
    }
    return "unknown";
}

inline SignalType parse_signal(std::string_view text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    for (auto s : kAllSignals) {
        if (lower == to_string(s)) return s;
    }
    // "position" is the same relation under another name
    if (lower == "position") return SignalType::Timestamp;
    throw SchemaError("unknown signal type '" + std::string(text) + "'");
}

} // namespace tempalign
