#pragma once

#include "tempalign/error.hpp"
#include "tempalign/interval.hpp"
#include "tempalign/json_io.hpp"
#include "tempalign/signal.hpp"

#include <set>
#include <string>
#include <variant>
#include <vector>

namespace tempalign {

inline constexpr double kDefaultClipLength = 10.0;

struct EventIntervals {
    std::string label;
    std::vector<Interval> intervals;
};

struct EventDuration {
    std::string label;
    double duration = 0.0;
};

struct EventOnsets {
    std::string label;
    std::vector<double> onsets;

    std::size_t frequency() const { return onsets.size(); }
};

// Exactly two events; events[0] precedes events[1].
struct OrderingPayload {
    std::vector<EventIntervals> events;
};
struct DurationPayload {
    std::vector<EventDuration> events;
};
struct FrequencyPayload {
    std::vector<EventOnsets> events;
};
struct TimestampPayload {
    std::vector<EventIntervals> events;
};

// Alternative order matches SignalType.
using MetadataPayload = std::variant<OrderingPayload, DurationPayload, FrequencyPayload, TimestampPayload>;

// Ground-truth temporal annotation of one clip for one control signal.
struct ClipMetadata {
    std::string clip_id;
    double clip_length = kDefaultClipLength;
    MetadataPayload payload;

    SignalType signal() const { return static_cast<SignalType>(payload.index()); }

    std::vector<std::string> labels() const {
        std::vector<std::string> out;
        std::visit([&](const auto& p) {
            for (const auto& e : p.events) out.push_back(e.label);
        }, payload);
        return out;
    }

    std::size_t event_count() const {
        return std::visit([](const auto& p) { return p.events.size(); }, payload);
    }

    std::size_t occurrence_count() const {
        return std::visit([](const auto& p) {
            std::size_t n = 0;
            for (const auto& e : p.events) {
                if constexpr (std::is_same_v<std::decay_t<decltype(e)>, EventDuration>) {
                    ++n;
                } else if constexpr (std::is_same_v<std::decay_t<decltype(e)>, EventOnsets>) {
                    n += e.onsets.size();
                } else {
                    n += e.intervals.size();
                }
            }
            return n;
        }, payload);
    }

    // Throws SchemaError when the payload breaks its signal's shape.
    void validate() const {
        const std::string ctx = "metadata " + clip_id;
        if (clip_id.empty()) throw SchemaError("metadata: empty clip_id");
        if (!(clip_length > 0.0)) throw SchemaError(ctx + ": clip_length must be positive");
        std::set<std::string> seen;
        for (const auto& label : labels()) {
            if (label.empty()) throw SchemaError(ctx + ": empty event label");
            if (!seen.insert(label).second) throw SchemaError(ctx + ": duplicate event label '" + label + "'");
        }
        if (seen.empty()) throw SchemaError(ctx + ": no events");
        auto check_intervals = [&](const EventIntervals& e) {
            if (e.intervals.empty()) throw SchemaError(ctx + ": event '" + e.label + "' has no intervals");
            for (const auto& iv : e.intervals) {
                if (!iv.valid()) throw SchemaError(ctx + ": invalid interval for '" + e.label + "'");
            }
        };
        switch (signal()) {
        case SignalType::Ordering: {
            const auto& p = std::get<OrderingPayload>(payload);
            if (p.events.size() != 2) throw SchemaError(ctx + ": ordering needs exactly 2 events");
            for (const auto& e : p.events) check_intervals(e);
            break;
        }
        case SignalType::Duration:
            for (const auto& e : std::get<DurationPayload>(payload).events) {
                if (!(e.duration > 0.0)) throw SchemaError(ctx + ": non-positive duration for '" + e.label + "'");
            }
            break;
        case SignalType::Frequency:
            for (const auto& e : std::get<FrequencyPayload>(payload).events) {
                if (e.onsets.empty()) throw SchemaError(ctx + ": event '" + e.label + "' has no onsets");
                for (double o : e.onsets) {
                    if (!(o >= 0.0)) throw SchemaError(ctx + ": negative onset for '" + e.label + "'");
                }
            }
            break;
        case SignalType::Timestamp:
            for (const auto& e : std::get<TimestampPayload>(payload).events) check_intervals(e);
            break;
        }
    }
};

inline json to_json(const ClipMetadata& m) {
    json j;
    j["clip_id"] = m.clip_id;
    j["signal"] = std::string(to_string(m.signal()));
    j["clip_length"] = m.clip_length;
    json events = json::array();
    std::visit([&](const auto& p) {
        for (const auto& e : p.events) {
            json ev;
            ev["label"] = e.label;
            using E = std::decay_t<decltype(e)>;
            if constexpr (std::is_same_v<E, EventDuration>) {
                ev["duration"] = e.duration;
            } else if constexpr (std::is_same_v<E, EventOnsets>) {
                ev["onsets"] = e.onsets;
                ev["frequency"] = e.frequency();
            } else {
                json ivs = json::array();
                for (const auto& iv : e.intervals) ivs.push_back(interval_to_json(iv));
                ev["intervals"] = std::move(ivs);
            }
            events.push_back(std::move(ev));
        }
    }, m.payload);
    j["events"] = std::move(events);
    return j;
}

inline ClipMetadata metadata_from_json(const json& j) {
    ClipMetadata m;
    m.clip_id = require_string(j, "clip_id", "metadata");
    const std::string ctx = "metadata " + m.clip_id;
    const auto signal = parse_signal(require_string(j, "signal", ctx));
    if (auto it = j.find("clip_length"); it != j.end()) {
        if (!it->is_number()) throw SchemaError(ctx + ": clip_length must be a number");
        m.clip_length = it->get<double>();
    }
    const auto& events = require(j, "events", ctx);
    if (!events.is_array()) throw SchemaError(ctx + ": events must be an array");

    auto read_intervals = [&](const json& ev, const std::string& label) {
        EventIntervals e{label, {}};
        const auto& ivs = require(ev, "intervals", ctx);
        if (!ivs.is_array()) throw SchemaError(ctx + ": intervals must be an array");
        for (const auto& iv : ivs) e.intervals.push_back(interval_from_json(iv, ctx + "/" + label));
        return e;
    };

    switch (signal) {
    case SignalType::Ordering: {
        OrderingPayload p;
        for (const auto& ev : events) {
            const auto label = require_string(ev, "label", ctx);
            p.events.push_back(read_intervals(ev, label));
        }
        m.payload = std::move(p);
        break;
    }
    case SignalType::Timestamp: {
        TimestampPayload p;
        for (const auto& ev : events) {
            const auto label = require_string(ev, "label", ctx);
            p.events.push_back(read_intervals(ev, label));
        }
        m.payload = std::move(p);
        break;
    }
    case SignalType::Duration: {
        DurationPayload p;
        for (const auto& ev : events) {
            p.events.push_back({require_string(ev, "label", ctx), require_number(ev, "duration", ctx)});
        }
        m.payload = std::move(p);
        break;
    }
    case SignalType::Frequency: {
        FrequencyPayload p;
        for (const auto& ev : events) {
            EventOnsets e{require_string(ev, "label", ctx), {}};
            const auto& onsets = require(ev, "onsets", ctx);
            if (!onsets.is_array()) throw SchemaError(ctx + ": onsets must be an array");
            for (const auto& o : onsets) {
                if (!o.is_number()) throw SchemaError(ctx + ": onsets must be numbers");
                e.onsets.push_back(o.get<double>());
            }
            if (auto f = ev.find("frequency");
                f != ev.end() && (!f->is_number_unsigned() || f->get<std::size_t>() != e.onsets.size())) {
                throw SchemaError(ctx + ": frequency disagrees with onset count for '" + e.label + "'");
            }
            p.events.push_back(std::move(e));
        }
        m.payload = std::move(p);
        break;
    }
    }
    m.validate();
    return m;
}

inline json metadata_list_to_json(std::span<const ClipMetadata> clips) {
    json items = json::array();
    for (const auto& m : clips) items.push_back(to_json(m));
    return make_envelope("clips", std::move(items));
}

inline std::vector<ClipMetadata> metadata_list_from_json(const json& doc) {
    std::vector<ClipMetadata> out;
    std::set<std::string> ids;
    for (const auto& j : envelope_items(doc, "clips", "metadata")) {
        out.push_back(metadata_from_json(j));
        if (!ids.insert(out.back().clip_id).second) {
            throw SchemaError("metadata: duplicate clip_id " + out.back().clip_id);
        }
    }
    return out;
}

inline std::vector<ClipMetadata> read_metadata(const std::filesystem::path& path) {
    return metadata_list_from_json(read_json_file(path));
}

} // namespace tempalign
