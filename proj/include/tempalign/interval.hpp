#pragma once

#include <algorithm>
#include <span>
#include <vector>

namespace tempalign {

// Closed-open time span in seconds. Plain aggregate so malformed input can be
// represented and rejected at the boundary; see valid().
struct Interval {
    double onset = 0.0;
    double offset = 0.0;

    constexpr double duration() const { return offset - onset; }
    constexpr bool valid() const { return onset >= 0.0 && offset > onset; }

    friend constexpr bool operator==(const Interval&, const Interval&) = default;
};

// Length of the intersection, zero when disjoint.
constexpr double overlap_length(const Interval& a, const Interval& b) {
    return std::max(0.0, std::min(a.offset, b.offset) - std::max(a.onset, b.onset));
}

// True when the intersection has positive length; abutting spans do not overlap.
constexpr bool overlaps(const Interval& a, const Interval& b) {
    return std::min(a.offset, b.offset) > std::max(a.onset, b.onset);
}

// Overlap test after widening both spans by `margin` on each side.
constexpr bool overlaps_with_margin(const Interval& a, const Interval& b, double margin) {
    return std::min(a.offset + margin, b.offset + margin) >
           std::max(a.onset - margin, b.onset - margin);
}

// First onset to last offset. Requires a non-empty list.
inline Interval merged_span(std::span<const Interval> intervals) {
    Interval span = intervals.front();
    for (const auto& iv : intervals.subspan(1)) {
        span.onset = std::min(span.onset, iv.onset);
        span.offset = std::max(span.offset, iv.offset);
    }
    return span;
}

inline void sort_by_onset(std::vector<Interval>& intervals) {
    std::stable_sort(intervals.begin(), intervals.end(),
                     [](const Interval& a, const Interval& b) { return a.onset < b.onset; });
}

// Joins intervals whose gap (next onset minus current offset) is below
// `max_gap`. With max_gap == 0 only truly overlapping spans are joined.
inline std::vector<Interval> merge_close(std::vector<Interval> intervals, double max_gap) {
    sort_by_onset(intervals);
    std::vector<Interval> merged;
    for (const auto& iv : intervals) {
        if (!merged.empty() && iv.onset - merged.back().offset < max_gap) {
            merged.back().offset = std::max(merged.back().offset, iv.offset);
        } else {
            merged.push_back(iv);
        }
    }
    return merged;
}

} // namespace tempalign
