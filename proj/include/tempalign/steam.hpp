#pragma once

// Temporal-control metrics: ordering error rate, L1 over seconds and counts,
// and segment-based F1. References are ClipMetadata; hypotheses are per-clip
// detected intervals from an external detector.

#include "tempalign/error.hpp"
#include "tempalign/interval.hpp"
#include "tempalign/json_io.hpp"
#include "tempalign/metadata.hpp"
#include "tempalign/signal.hpp"

#include <fmt/format.h>

#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace tempalign::steam {

inline constexpr double kDefaultDetectorThreshold = 0.5;
inline constexpr double kDefaultSegmentLength = 1.0;
inline constexpr double kFrequencyMergeGap = 0.1;

struct DetectionSet {
    std::string clip_id;
    double detector_threshold = kDefaultDetectorThreshold;
    std::map<std::string, std::vector<Interval>> detections; // sorted by onset

    // Intervals for `label`; empty when the event was never detected.
    std::span<const Interval> events(const std::string& label) const {
        auto it = detections.find(label);
        if (it == detections.end()) return {};
        return it->second;
    }
};

enum class OrderingRelation { APrecedesB, BPrecedesA, Simultaneous, Undetectable };

constexpr std::string_view to_string(OrderingRelation r) {
    switch (r) {
    case OrderingRelation::APrecedesB: return "a_precedes_b";
    case OrderingRelation::BPrecedesA: return "b_precedes_a";
    case OrderingRelation::Simultaneous: return "simultaneous";
    case OrderingRelation::Undetectable: return "undetectable";
    }
    return "unknown";
}

// Relation between two events from their merged spans. The earlier-starting
// event precedes unless the spans overlap by more than half the shorter span
// (or start together), in which case they are simultaneous.
inline OrderingRelation ordering_relation(std::span<const Interval> a, std::span<const Interval> b) {
    if (a.empty() || b.empty()) return OrderingRelation::Undetectable;
    const Interval span_a = merged_span(a);
    const Interval span_b = merged_span(b);
    const double overlap = overlap_length(span_a, span_b);
    if (overlap > 0.5 * std::min(span_a.duration(), span_b.duration())) return OrderingRelation::Simultaneous;
    if (span_a.onset < span_b.onset) return OrderingRelation::APrecedesB;
    if (span_b.onset < span_a.onset) return OrderingRelation::BPrecedesA;
    return OrderingRelation::Simultaneous;
}

struct CountPair {
    double specified = 0.0; // count or seconds
    double detected = 0.0;
};

// Mean absolute difference over every (sample, event) pair.
inline double l1_metric(std::span<const CountPair> pairs) {
    if (pairs.empty()) throw MetricError("l1 metric needs at least one (sample, event) pair");
    double total = 0.0;
    for (const auto& p : pairs) {
        if (p.specified < 0.0 || p.detected < 0.0) throw MetricError("l1 metric: negative count");
        total += std::abs(p.specified - p.detected);
    }
    return total / static_cast<double>(pairs.size());
}

namespace detail {

// Pairs each reference with its detection set; the clip ids must match 1:1.
inline std::vector<const DetectionSet*> align(std::span<const ClipMetadata> refs,
                                              std::span<const DetectionSet> dets) {
    std::unordered_map<std::string, const DetectionSet*> by_id;
    for (const auto& d : dets) {
        if (!by_id.emplace(d.clip_id, &d).second) {
            throw MetricError("duplicate detection set for clip " + d.clip_id);
        }
    }
    std::vector<const DetectionSet*> out;
    out.reserve(refs.size());
    for (const auto& r : refs) {
        auto it = by_id.find(r.clip_id);
        if (it == by_id.end()) throw MetricError("no detection set for clip " + r.clip_id);
        out.push_back(it->second);
        by_id.erase(it);
    }
    if (!by_id.empty()) {
        throw MetricError("detection set for unknown clip " + by_id.begin()->first);
    }
    return out;
}

template <typename Payload>
const Payload& payload_of(const ClipMetadata& m) {
    if (auto p = std::get_if<Payload>(&m.payload)) return *p;
    throw MetricError(fmt::format("clip {} carries {} metadata", m.clip_id, to_string(m.signal())));
}

} // namespace detail

// Fraction of clips whose detected order differs from the reference order,
// including clips where either event was not detected at all.
inline double ordering_error_rate(std::span<const ClipMetadata> refs, std::span<const DetectionSet> dets) {
    if (refs.empty()) throw MetricError("ordering error rate needs at least one clip");
    const auto aligned = detail::align(refs, dets);
    std::size_t errors = 0;
    for (std::size_t i = 0; i < refs.size(); ++i) {
        const auto& p = detail::payload_of<OrderingPayload>(refs[i]);
        if (p.events.size() != 2) throw MetricError("ordering clip " + refs[i].clip_id + " needs 2 events");
        const auto rel = ordering_relation(aligned[i]->events(p.events[0].label),
                                           aligned[i]->events(p.events[1].label));
        if (rel != OrderingRelation::APrecedesB) ++errors;
    }
    return static_cast<double>(errors) / static_cast<double>(refs.size());
}

// Specified vs detected seconds per (clip, event). Detected intervals of one
// label are unioned before summing.
inline std::vector<CountPair> duration_pairs(std::span<const ClipMetadata> refs,
                                             std::span<const DetectionSet> dets) {
    const auto aligned = detail::align(refs, dets);
    std::vector<CountPair> pairs;
    for (std::size_t i = 0; i < refs.size(); ++i) {
        for (const auto& e : detail::payload_of<DurationPayload>(refs[i]).events) {
            const auto found = aligned[i]->events(e.label);
            double detected = 0.0;
            for (const auto& iv : merge_close({found.begin(), found.end()}, 0.0)) detected += iv.duration();
            pairs.push_back({e.duration, detected});
        }
    }
    return pairs;
}

// Specified vs detected occurrence counts per (clip, event). Detections closer
// than `merge_gap` are counted as one occurrence.
inline std::vector<CountPair> frequency_pairs(std::span<const ClipMetadata> refs,
                                              std::span<const DetectionSet> dets,
                                              double merge_gap = kFrequencyMergeGap) {
    const auto aligned = detail::align(refs, dets);
    std::vector<CountPair> pairs;
    for (std::size_t i = 0; i < refs.size(); ++i) {
        for (const auto& e : detail::payload_of<FrequencyPayload>(refs[i]).events) {
            const auto found = aligned[i]->events(e.label);
            const auto occurrences = merge_close({found.begin(), found.end()}, merge_gap).size();
            pairs.push_back({static_cast<double>(e.frequency()), static_cast<double>(occurrences)});
        }
    }
    return pairs;
}

struct SegmentCounts {
    std::size_t true_positives = 0;
    std::size_t false_positives = 0;
    std::size_t false_negatives = 0;

    SegmentCounts& operator+=(const SegmentCounts& o) {
        true_positives += o.true_positives;
        false_positives += o.false_positives;
        false_negatives += o.false_negatives;
        return *this;
    }

    // 1.0 when nothing is active in either reference or detection.
    double f1() const {
        const auto denom = 2 * true_positives + false_positives + false_negatives;
        if (denom == 0) return 1.0;
        return 2.0 * static_cast<double>(true_positives) / static_cast<double>(denom);
    }
};

inline std::size_t segment_count(double clip_length, double segment_length) {
    return static_cast<std::size_t>(std::ceil(clip_length / segment_length));
}

// Per-segment activity of one label: a segment is active when any interval
// intersects it with positive length.
inline std::vector<bool> segment_activity(std::span<const Interval> intervals, double clip_length,
                                          double segment_length) {
    const std::size_t n = segment_count(clip_length, segment_length);
    std::vector<bool> active(n, false);
    if (n == 0) return active;
    const auto last = static_cast<double>(n - 1);
    for (const auto& iv : intervals) {
        // candidate range padded by one segment either side; the exact test
        // below decides boundary cases
        const double lo = std::clamp(std::floor(iv.onset / segment_length) - 1.0, 0.0, last);
        const double hi = std::clamp(std::ceil(iv.offset / segment_length), 0.0, last);
        for (auto k = static_cast<std::size_t>(lo); k <= static_cast<std::size_t>(hi); ++k) {
            const double start = static_cast<double>(k) * segment_length;
            const double end = std::min(static_cast<double>(k + 1) * segment_length, clip_length);
            if (std::min(iv.offset, end) - std::max(iv.onset, start) > 0.0) active[k] = true;
        }
    }
    return active;
}

inline SegmentCounts segment_counts(const ClipMetadata& ref, const DetectionSet& det, double segment_length) {
    const auto& payload = detail::payload_of<TimestampPayload>(ref);
    std::map<std::string, std::span<const Interval>> ref_events;
    for (const auto& e : payload.events) ref_events[e.label] = e.intervals;

    std::vector<std::string> labels;
    for (const auto& [label, ivs] : ref_events) labels.push_back(label);
    for (const auto& [label, ivs] : det.detections) {
        if (!ref_events.contains(label)) labels.push_back(label);
    }

    SegmentCounts counts;
    for (const auto& label : labels) {
        auto it = ref_events.find(label);
        const auto ref_active = segment_activity(it == ref_events.end() ? std::span<const Interval>{} : it->second,
                                                 ref.clip_length, segment_length);
        const auto det_active = segment_activity(det.events(label), ref.clip_length, segment_length);
        for (std::size_t k = 0; k < ref_active.size(); ++k) {
            if (ref_active[k] && det_active[k]) ++counts.true_positives;
            else if (det_active[k]) ++counts.false_positives;
            else if (ref_active[k]) ++counts.false_negatives;
        }
    }
    return counts;
}

// Micro-averaged segment-based F1 over all clips, labels and segments.
inline double f1_segment(std::span<const ClipMetadata> refs, std::span<const DetectionSet> dets,
                         double segment_length = kDefaultSegmentLength) {
    if (!(segment_length > 0.0)) throw MetricError("segment length must be positive");
    if (refs.empty()) throw MetricError("segment F1 needs at least one clip");
    const auto aligned = detail::align(refs, dets);
    SegmentCounts total;
    for (std::size_t i = 0; i < refs.size(); ++i) total += segment_counts(refs[i], *aligned[i], segment_length);
    return total.f1();
}

struct EvaluationConfig {
    double segment_length = kDefaultSegmentLength;
    double frequency_merge_gap = kFrequencyMergeGap;
};

// Only the metric belonging to `signal` is set.
struct MetricReport {
    SignalType signal = SignalType::Ordering;
    std::size_t n_samples = 0;
    std::size_t total_events = 0;
    std::optional<double> error_rate;
    std::optional<double> l1_second;
    std::optional<double> l1_freq;
    std::optional<double> f1_segment;

    std::optional<double> value() const {
        switch (signal) {
        case SignalType::Ordering: return error_rate;
        case SignalType::Duration: return l1_second;
        case SignalType::Frequency: return l1_freq;
        case SignalType::Timestamp: return f1_segment;
        }
        return std::nullopt;
    }
};

constexpr std::string_view metric_name(SignalType s) {
    switch (s) {
    case SignalType::Ordering: return "error_rate";
    case SignalType::Duration: return "l1_second";
    case SignalType::Frequency: return "l1_freq";
    case SignalType::Timestamp: return "f1_segment";
    }
    return "unknown";
}

inline MetricReport evaluate(SignalType signal, std::span<const ClipMetadata> refs,
                             std::span<const DetectionSet> dets, const EvaluationConfig& config = {}) {
    if (refs.empty()) throw MetricError(fmt::format("no {} reference clips", to_string(signal)));
    MetricReport report;
    report.signal = signal;
    report.n_samples = refs.size();
    for (const auto& r : refs) {
        if (r.signal() != signal) {
            throw MetricError(fmt::format("clip {} is {} metadata, expected {}", r.clip_id,
                                          to_string(r.signal()), to_string(signal)));
        }
        report.total_events += r.event_count();
    }
    switch (signal) {
    case SignalType::Ordering: report.error_rate = ordering_error_rate(refs, dets); break;
    case SignalType::Duration: report.l1_second = l1_metric(duration_pairs(refs, dets)); break;
    case SignalType::Frequency:
        report.l1_freq = l1_metric(frequency_pairs(refs, dets, config.frequency_merge_gap));
        break;
    case SignalType::Timestamp: report.f1_segment = f1_segment(refs, dets, config.segment_length); break;
    }
    return report;
}

// --- detections.json -------------------------------------------------------

inline json to_json(const DetectionSet& d) {
    json j;
    j["clip_id"] = d.clip_id;
    j["threshold"] = d.detector_threshold;
    json events = json::object();
    for (const auto& [label, ivs] : d.detections) {
        json arr = json::array();
        for (const auto& iv : ivs) arr.push_back(interval_to_json(iv));
        events[label] = std::move(arr);
    }
    j["events"] = std::move(events);
    return j;
}

inline DetectionSet detection_set_from_json(const json& j) {
    DetectionSet d;
    d.clip_id = require_string(j, "clip_id", "detections");
    const std::string ctx = "detections " + d.clip_id;
    if (auto it = j.find("threshold"); it != j.end()) {
        if (!it->is_number()) throw SchemaError(ctx + ": threshold must be a number");
        d.detector_threshold = it->get<double>();
        if (d.detector_threshold < 0.0 || d.detector_threshold > 1.0) {
            throw SchemaError(ctx + ": threshold outside [0,1]");
        }
    }
    const auto& events = require(j, "events", ctx);
    if (!events.is_object()) throw SchemaError(ctx + ": events must map label to interval list");
    for (const auto& [label, ivs] : events.items()) {
        if (!ivs.is_array()) throw SchemaError(ctx + ": intervals for '" + label + "' must be an array");
        auto& list = d.detections[label];
        for (const auto& iv : ivs) list.push_back(interval_from_json(iv, ctx + "/" + label));
        sort_by_onset(list);
    }
    return d;
}

inline json detections_to_json(std::span<const DetectionSet> sets) {
    json items = json::array();
    for (const auto& d : sets) items.push_back(to_json(d));
    return make_envelope("detections", std::move(items));
}

// Reference-equivalent detections: the detection set a perfect detector would
// report for this metadata. Frequency onsets become short markers so that the
// occurrence count survives gap merging; durations become [0, duration].
inline DetectionSet detections_from_metadata(const ClipMetadata& m) {
    DetectionSet d;
    d.clip_id = m.clip_id;
    std::visit([&](const auto& p) {
        for (const auto& e : p.events) {
            auto& list = d.detections[e.label];
            using E = std::decay_t<decltype(e)>;
            if constexpr (std::is_same_v<E, EventDuration>) {
                list.push_back({0.0, e.duration});
            } else if constexpr (std::is_same_v<E, EventOnsets>) {
                for (std::size_t i = 0; i < e.onsets.size(); ++i) {
                    double width = 0.05;
                    if (i + 1 < e.onsets.size()) {
                        width = std::min(width, std::max(1e-3, e.onsets[i + 1] - e.onsets[i] - kFrequencyMergeGap));
                    }
                    list.push_back({e.onsets[i], e.onsets[i] + width});
                }
            } else {
                list = e.intervals;
            }
            sort_by_onset(list);
        }
    }, m.payload);
    return d;
}

// Accepts detections.json, or a metadata file whose clips are converted with
// detections_from_metadata.
inline std::vector<DetectionSet> detections_from_json(const json& doc) {
    const bool is_metadata = doc.is_object() && doc.contains("clips");
    const auto& items = is_metadata ? envelope_items(doc, "clips", "metadata")
                                    : envelope_items(doc, "detections", "detections");
    std::vector<DetectionSet> out;
    for (const auto& j : items) {
        if (is_metadata || j.contains("signal")) {
            out.push_back(detections_from_metadata(metadata_from_json(j)));
        } else {
            out.push_back(detection_set_from_json(j));
        }
    }
    return out;
}

inline std::vector<DetectionSet> read_detections(const std::filesystem::path& path) {
    return detections_from_json(read_json_file(path));
}

// --- reports ---------------------------------------------------------------

inline json report_to_json(const MetricReport& r) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["signal"] = std::string(to_string(r.signal));
    j["n_samples"] = r.n_samples;
    j["total_events"] = r.total_events;
    j[std::string(metric_name(r.signal))] = *r.value();
    return j;
}

inline json reports_to_json(std::span<const MetricReport> reports) {
    if (reports.size() == 1) return report_to_json(reports.front());
    json items = json::array();
    for (const auto& r : reports) {
        auto j = report_to_json(r);
        j.erase("schema_version");
        items.push_back(std::move(j));
    }
    return make_envelope("reports", std::move(items));
}

// Control-performance table: one column per signal, `row_name` labels the row.
// Signals without a report print "-".
inline std::string format_table(std::span<const MetricReport> reports, std::string_view row_name) {
    std::array<std::string, 4> cells{"-", "-", "-", "-"};
    for (const auto& r : reports) cells[static_cast<std::size_t>(r.signal)] = fmt::format("{:.3f}", *r.value());
    std::string out;
    out += fmt::format("{:<8}| {:<11}| {:<10}| {:<10}| {:<10}\n", "Signal", "Ordering", "Duration", "Frequency",
                       "Timestamp");
    out += fmt::format("{:<8}| {:<11}| {:<10}| {:<10}| {:<10}\n", "Metrics", "Error rate", "L1_second", "L1_freq",
                       "F1_segment");
    out += "--------+------------+-----------+-----------+-----------\n";
    out += fmt::format("{:<8}| {:<11}| {:<10}| {:<10}| {:<10}\n", row_name, cells[0], cells[1], cells[2], cells[3]);
    return out;
}

} // namespace tempalign::steam
