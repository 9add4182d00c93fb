#pragma once

// Single-sound segment curation: isolate labelled intervals that overlap no
// other label in their source clip, then gate them on externally computed
// audio-text similarity and grounding scores.

#include "tempalign/error.hpp"
#include "tempalign/interval.hpp"
#include "tempalign/json_io.hpp"
#include "tempalign/parallel.hpp"
#include "tempalign/strings.hpp"
#include "tempalign/wav.hpp"

#include <fmt/format.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace tempalign::bank {

struct StrongLabelRecord {
    std::string clip_id;
    std::string event_label;
    Interval interval;
};

struct SegmentRecord {
    std::string segment_id;
    std::string clip_id;
    std::string event_label;
    Interval source_interval;
    std::string audio_path; // empty until audio is cut
    std::optional<double> clap_score;
    std::optional<double> grounding_score;

    double duration() const { return source_interval.duration(); }
};

struct CurationConfig {
    double clap_threshold = 0.3;
    double atg_threshold = 0.6;
    double guard_margin = 0.0; // seconds added on each side before the overlap test

    void validate() const {
        auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
        if (!in_unit(clap_threshold)) throw Error(fmt::format("clap threshold {} outside [0,1]", clap_threshold));
        if (!in_unit(atg_threshold)) throw Error(fmt::format("grounding threshold {} outside [0,1]", atg_threshold));
        if (!(guard_margin >= 0.0)) throw Error(fmt::format("guard margin {} is negative", guard_margin));
    }
};

struct CurationStats {
    std::size_t categories_extracted = 0;
    std::size_t segments_extracted = 0;
    std::size_t categories_kept = 0;
    std::size_t segments_kept = 0;

    static double percent(std::size_t kept, std::size_t extracted) {
        return extracted == 0 ? 0.0 : 100.0 * static_cast<double>(kept) / static_cast<double>(extracted);
    }
    double category_pct() const { return percent(categories_kept, categories_extracted); }
    double segment_pct() const { return percent(segments_kept, segments_extracted); }
};

struct FilterResult {
    std::vector<SegmentRecord> kept;
    CurationStats stats;
};

inline std::size_t count_categories(std::span<const SegmentRecord> segments) {
    std::set<std::string> labels;
    for (const auto& s : segments) labels.insert(trim(s.event_label));
    return labels.size();
}

// Returns the labelled intervals that overlap no other interval of the same
// clip once both are widened by guard_margin on each side. Records with an
// empty id/label or a non-positive duration are skipped and described in
// `rejected` when given. Output keeps input order; segment ids are
// "<clip_id>_<k>" with k the record's ordinal among the clip's valid records.
inline std::vector<SegmentRecord> extract_single_sound_segments(
    std::span<const StrongLabelRecord> labels, double guard_margin,
    std::vector<std::string>* rejected = nullptr) {
    auto reject = [&](std::size_t i, const std::string& why) {
        if (rejected) rejected->push_back(fmt::format("label record {}: {}", i, why));
    };

    std::unordered_map<std::string, std::vector<std::size_t>> by_clip;
    std::vector<std::size_t> valid;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto& rec = labels[i];
        if (rec.clip_id.empty()) {
            reject(i, "empty clip_id");
        } else if (trim(rec.event_label).empty()) {
            reject(i, "empty event_label in clip " + rec.clip_id);
        } else if (!rec.interval.valid()) {
            reject(i, fmt::format("malformed interval [{}, {}] in clip {}", rec.interval.onset,
                                  rec.interval.offset, rec.clip_id));
        } else {
            by_clip[rec.clip_id].push_back(i);
            valid.push_back(i);
        }
    }

    std::unordered_map<std::size_t, std::size_t> ordinal;
    for (const auto& [clip, idx] : by_clip) {
        for (std::size_t k = 0; k < idx.size(); ++k) ordinal[idx[k]] = k;
    }

    std::vector<SegmentRecord> out;
    for (std::size_t i : valid) {
        const auto& rec = labels[i];
        bool isolated = true;
        for (std::size_t j : by_clip[rec.clip_id]) {
            if (j != i && overlaps_with_margin(rec.interval, labels[j].interval, guard_margin)) {
                isolated = false;
                break;
            }
        }
        if (!isolated) continue;
        SegmentRecord seg;
        seg.segment_id = fmt::format("{}_{}", rec.clip_id, ordinal[i]);
        seg.clip_id = rec.clip_id;
        seg.event_label = trim(rec.event_label);
        seg.source_interval = rec.interval;
        out.push_back(std::move(seg));
    }
    return out;
}

inline bool passes(const SegmentRecord& s, const CurationConfig& config) {
    return *s.clap_score >= config.clap_threshold && *s.grounding_score >= config.atg_threshold;
}

// Keeps segments whose scores both reach their thresholds (equality keeps).
inline FilterResult apply_filters(std::span<const SegmentRecord> segments, const CurationConfig& config) {
    config.validate();
    FilterResult result;
    for (const auto& s : segments) {
        if (!s.clap_score || !s.grounding_score) {
            throw SchemaError("segment " + s.segment_id + " is missing " +
                              (!s.clap_score ? "clap" : "grounding") + " score");
        }
        if (passes(s, config)) result.kept.push_back(s);
    }
    result.stats.segments_extracted = segments.size();
    result.stats.segments_kept = result.kept.size();
    result.stats.categories_extracted = count_categories(segments);
    result.stats.categories_kept = count_categories(result.kept);
    return result;
}

// Populates scores from a {segment_id: {"clap": x, "grounding": y}} document.
// Ids present in the document but not in `segments` are a schema error; ids
// missing from the document keep absent scores and are listed in `unmatched`.
inline std::vector<SegmentRecord> apply_scores(std::span<const SegmentRecord> segments, const json& doc,
                                               std::vector<std::string>* unmatched = nullptr) {
    if (!doc.is_object()) throw SchemaError("scores: expected a JSON object keyed by segment_id");
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < segments.size(); ++i) index.emplace(segments[i].segment_id, i);

    std::vector<SegmentRecord> out(segments.begin(), segments.end());
    std::vector<bool> seen(segments.size(), false);
    for (const auto& [key, entry] : doc.items()) {
        if (key == "schema_version") continue;
        auto it = index.find(key);
        if (it == index.end()) throw SchemaError("scores: unknown segment_id '" + key + "'");
        const std::string ctx = "scores[" + key + "]";
        const double clap = require_number(entry, "clap", ctx);
        const double grounding = require_number(entry, "grounding", ctx);
        if (clap < 0.0 || clap > 1.0 || grounding < 0.0 || grounding > 1.0) {
            throw SchemaError(ctx + ": scores must lie in [0,1]");
        }
        out[it->second].clap_score = clap;
        out[it->second].grounding_score = grounding;
        seen[it->second] = true;
    }
    if (unmatched) {
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (!seen[i]) unmatched->push_back(out[i].segment_id);
        }
    }
    return out;
}

inline std::vector<SegmentRecord> load_scores(std::span<const SegmentRecord> segments,
                                              const std::filesystem::path& scores_file,
                                              std::vector<std::string>* unmatched = nullptr) {
    return apply_scores(segments, read_json_file(scores_file), unmatched);
}

// One JSON object per line: {"clip_id", "event_label", "onset", "offset"}.
// Unparseable lines are skipped with a diagnostic; interval validity is left
// to extract_single_sound_segments.
inline std::vector<StrongLabelRecord> read_strong_labels(std::istream& in,
                                                         std::vector<std::string>* rejected = nullptr) {
    std::vector<StrongLabelRecord> out;
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        if (trim(line).empty()) continue;
        try {
            const auto j = json::parse(line);
            const std::string ctx = fmt::format("line {}", lineno);
            out.push_back({require_string(j, "clip_id", ctx), require_string(j, "event_label", ctx),
                           {require_number(j, "onset", ctx), require_number(j, "offset", ctx)}});
        } catch (const std::exception& e) {
            if (rejected) rejected->push_back(fmt::format("line {}: {}", lineno, e.what()));
        }
    }
    return out;
}

inline std::vector<StrongLabelRecord> read_strong_labels(const std::filesystem::path& path,
                                                         std::vector<std::string>* rejected = nullptr) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return read_strong_labels(in, rejected);
}

inline json to_json(const SegmentRecord& s) {
    json j;
    j["segment_id"] = s.segment_id;
    j["clip_id"] = s.clip_id;
    j["event_label"] = s.event_label;
    j["source_interval"] = interval_to_json(s.source_interval);
    j["audio_path"] = s.audio_path.empty() ? json(nullptr) : json(s.audio_path);
    j["clap"] = s.clap_score ? json(*s.clap_score) : json(nullptr);
    j["grounding"] = s.grounding_score ? json(*s.grounding_score) : json(nullptr);
    return j;
}

inline SegmentRecord segment_from_json(const json& j) {
    SegmentRecord s;
    s.segment_id = require_string(j, "segment_id", "segment");
    const std::string ctx = "segment " + s.segment_id;
    s.clip_id = require_string(j, "clip_id", ctx);
    s.event_label = require_string(j, "event_label", ctx);
    s.source_interval = interval_from_json(require(j, "source_interval", ctx), ctx);
    auto optional_number = [&](const char* key) -> std::optional<double> {
        auto it = j.find(key);
        if (it == j.end() || it->is_null()) return std::nullopt;
        if (!it->is_number()) throw SchemaError(ctx + ": '" + key + "' must be a number or null");
        return it->get<double>();
    };
    if (auto it = j.find("audio_path"); it != j.end() && it->is_string()) s.audio_path = it->get<std::string>();
    s.clap_score = optional_number("clap");
    s.grounding_score = optional_number("grounding");
    return s;
}

inline json bank_to_json(std::span<const SegmentRecord> segments) {
    json items = json::array();
    for (const auto& s : segments) items.push_back(to_json(s));
    return make_envelope("segments", std::move(items));
}

inline std::vector<SegmentRecord> bank_from_json(const json& doc) {
    std::vector<SegmentRecord> out;
    std::set<std::string> ids;
    for (const auto& j : envelope_items(doc, "segments", "bank")) {
        out.push_back(segment_from_json(j));
        if (!ids.insert(out.back().segment_id).second) {
            throw SchemaError("bank: duplicate segment_id " + out.back().segment_id);
        }
    }
    return out;
}

// Loads a bank file; relative audio paths resolve against the bank's directory.
inline std::vector<SegmentRecord> read_bank(const std::filesystem::path& path) {
    auto segments = bank_from_json(read_json_file(path));
    const auto base = path.parent_path();
    for (auto& s : segments) {
        if (!s.audio_path.empty() && std::filesystem::path(s.audio_path).is_relative()) {
            s.audio_path = (base / s.audio_path).lexically_normal().string();
        }
    }
    return segments;
}

inline json stats_to_json(const CurationStats& st, const CurationConfig& config) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["clap_threshold"] = config.clap_threshold;
    j["atg_threshold"] = config.atg_threshold;
    j["categories_extracted"] = st.categories_extracted;
    j["segments_extracted"] = st.segments_extracted;
    j["categories_kept"] = st.categories_kept;
    j["segments_kept"] = st.segments_kept;
    j["category_pct"] = std::round(st.category_pct() * 10.0) / 10.0;
    j["segment_pct"] = std::round(st.segment_pct() * 10.0) / 10.0;
    return j;
}

// "#C 309 -> 195 (63.1%), #S 7098 -> 3392 (47.8%)"
inline std::string format_stats(const CurationStats& st) {
    return fmt::format("#C {} -> {} ({:.1f}%), #S {} -> {} ({:.1f}%)", st.categories_extracted,
                       st.categories_kept, st.category_pct(), st.segments_extracted, st.segments_kept,
                       st.segment_pct());
}

// Cuts each segment out of <source_dir>/<clip_id>.wav and writes it as mono
// 16-bit PCM to <out_dir>/<segment_id>.wav. Returns segments with audio_path set.
inline std::vector<SegmentRecord> cut_segment_audio(std::span<const SegmentRecord> segments,
                                                    const std::filesystem::path& source_dir,
                                                    const std::filesystem::path& out_dir,
                                                    int sample_rate = kDefaultSampleRate,
                                                    std::size_t threads = default_thread_count()) {
    std::vector<SegmentRecord> out(segments.begin(), segments.end());
    std::map<std::string, std::vector<std::size_t>> by_clip;
    for (std::size_t i = 0; i < out.size(); ++i) by_clip[out[i].clip_id].push_back(i);
    std::vector<const std::vector<std::size_t>*> groups;
    for (const auto& [clip, idx] : by_clip) groups.push_back(&idx);

    std::filesystem::create_directories(out_dir);
    parallel_for(groups.size(), threads, [&](std::size_t g) {
        const auto& idx = *groups[g];
        const auto source = read_wav(source_dir / (out[idx.front()].clip_id + ".wav"), sample_rate);
        const auto total = static_cast<long long>(source.samples.size());
        for (std::size_t i : idx) {
            auto& seg = out[i];
            const auto begin = std::clamp(std::llround(seg.source_interval.onset * sample_rate), 0LL, total);
            const auto end = std::clamp(std::llround(seg.source_interval.offset * sample_rate), begin, total);
            if (end == begin) throw IoError("segment " + seg.segment_id + " lies outside its source audio");
            const auto path = out_dir / (seg.segment_id + ".wav");
            write_wav_pcm16(path, std::span(source.samples).subspan(begin, end - begin), sample_rate);
            seg.audio_path = path.string();
        }
    });
    return out;
}

} // namespace tempalign::bank
