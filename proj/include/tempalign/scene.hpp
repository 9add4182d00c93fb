#pragma once

// Plans and renders temporally structured clips from a segment bank. Plans
// are built on an integer-millisecond grid; rendering is additive mixing
// with an optional whole-mix rescale when the peak exceeds the ceiling.

#include "tempalign/error.hpp"
#include "tempalign/interval.hpp"
#include "tempalign/json_io.hpp"
#include "tempalign/metadata.hpp"
#include "tempalign/parallel.hpp"
#include "tempalign/rng.hpp"
#include "tempalign/segment_bank.hpp"
#include "tempalign/signal.hpp"
#include "tempalign/steam.hpp"
#include "tempalign/wav.hpp"

#include <fmt/format.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace tempalign::scene {

inline constexpr double kPeakCeiling = 0.9952; // -0.04 dBFS

struct EventPlacement {
    std::string event_label;
    std::string segment_id;
    Interval interval; // position within the clip
    double gain_db = 0.0;
};

struct SceneSpec {
    std::string clip_id;
    SignalType signal = SignalType::Ordering;
    double clip_length = kDefaultClipLength;
    std::uint64_t seed = 0;
    std::vector<EventPlacement> placements;
};

struct PlannerConfig {
    double clip_length = kDefaultClipLength;
    int max_events = 3;
    int max_occurrences = 4;
    // P(n) proportional to count_decay^n over 1..max
    double count_decay = 0.5;
    double min_gap = 0.3; // seconds between occurrences of one event
    double min_gain_db = -6.0;
    double max_gain_db = 0.0;
    // ordering split point as a fraction of the clip
    double split_lo = 0.35;
    double split_hi = 0.65;

    void validate() const {
        if (!(clip_length > 0.0)) throw PlanningError("clip length must be positive");
        if (max_events < 1 || max_occurrences < 1) throw PlanningError("max events/occurrences must be >= 1");
        if (!(count_decay > 0.0)) throw PlanningError("count decay must be positive");
        if (min_gap < 0.0) throw PlanningError("minimum gap must be non-negative");
        if (min_gain_db > max_gain_db) throw PlanningError("gain range is empty");
        if (!(0.0 < split_lo && split_lo <= split_hi && split_hi < 1.0)) {
            throw PlanningError("ordering split range must lie inside (0,1)");
        }
    }
};

namespace detail {

using Millis = std::int64_t;

inline Millis to_ms(double seconds) { return static_cast<Millis>(std::floor(seconds * 1000.0 + 1e-9)); }
inline double to_seconds(Millis ms) { return static_cast<double>(ms) / 1000.0; }

struct LabelPool {
    std::string label;
    std::vector<const bank::SegmentRecord*> segments;
};

inline std::vector<LabelPool> pools_by_label(std::span<const bank::SegmentRecord> segments) {
    std::map<std::string, std::vector<const bank::SegmentRecord*>> by_label;
    for (const auto& s : segments) {
        if (to_ms(s.duration()) >= 1) by_label[s.event_label].push_back(&s);
    }
    std::vector<LabelPool> out;
    for (auto& [label, segs] : by_label) out.push_back({label, std::move(segs)});
    return out;
}

class Planner {
public:
    Planner(const PlannerConfig& config, Rng& rng) : config_(config), rng_(rng) {}

    int draw_count(int max) {
        std::vector<double> weights;
        for (int n = 1; n <= max; ++n) weights.push_back(std::pow(config_.count_decay, n));
        return static_cast<int>(rng_.weighted(weights)) + 1;
    }

    double draw_gain() {
        return std::round(rng_.uniform(config_.min_gain_db, config_.max_gain_db) * 100.0) / 100.0;
    }

    // Places up to n non-overlapping occurrences of one label inside
    // [start, end) ms, separated by at least min_gap. Occurrences that do not
    // fit are dropped; a single occurrence longer than the region is truncated.
    void pack(const LabelPool& pool, int n, Millis start, Millis end, std::vector<EventPlacement>& out) {
        const Millis region = end - start;
        if (region <= 0) throw PlanningError("empty placement region for " + pool.label);
        const Millis gap = to_ms(config_.min_gap);

        std::vector<const bank::SegmentRecord*> chosen;
        std::vector<Millis> durations;
        for (int i = 0; i < n; ++i) {
            const auto* seg = pool.segments[static_cast<std::size_t>(
                rng_.integer(0, static_cast<std::int64_t>(pool.segments.size()) - 1))];
            chosen.push_back(seg);
            durations.push_back(to_ms(seg->duration()));
        }
        auto needed = [&] {
            Millis total = 0;
            for (auto d : durations) total += d;
            return total + gap * static_cast<Millis>(durations.size() - 1);
        };
        while (durations.size() > 1 && needed() > region) {
            durations.pop_back();
            chosen.pop_back();
        }
        if (needed() > region) durations.front() = region;

        // spread the slack over the n+1 gaps around the occurrences
        const Millis slack = region - needed();
        std::vector<double> weights(durations.size() + 1);
        double weight_sum = 0.0;
        for (auto& w : weights) weight_sum += (w = rng_.uniform());
        Millis t = start;
        for (std::size_t i = 0; i < durations.size(); ++i) {
            t += static_cast<Millis>(std::floor(static_cast<double>(slack) * weights[i] / weight_sum));
            EventPlacement p;
            p.event_label = pool.label;
            p.segment_id = chosen[i]->segment_id;
            p.interval = {to_seconds(t), to_seconds(t + durations[i])};
            p.gain_db = draw_gain();
            out.push_back(std::move(p));
            t += durations[i] + gap;
        }
    }

    std::vector<const LabelPool*> choose_labels(const std::vector<LabelPool>& pools, std::size_t k) {
        std::vector<const LabelPool*> all;
        for (const auto& p : pools) all.push_back(&p);
        rng_.shuffle(all.begin(), all.end());
        all.resize(k);
        return all;
    }

private:
    const PlannerConfig& config_;
    Rng& rng_;
};

inline void check_same_label_disjoint(const SceneSpec& spec) {
    for (std::size_t i = 0; i < spec.placements.size(); ++i) {
        for (std::size_t j = i + 1; j < spec.placements.size(); ++j) {
            const auto& a = spec.placements[i];
            const auto& b = spec.placements[j];
            if (a.event_label == b.event_label && overlaps(a.interval, b.interval)) {
                throw PlanningError(fmt::format("clip {}: overlapping occurrences of '{}'", spec.clip_id,
                                                a.event_label));
            }
        }
    }
}

inline std::vector<EventIntervals> group_by_label(const SceneSpec& spec) {
    std::vector<EventIntervals> events;
    std::unordered_map<std::string, std::size_t> index;
    for (const auto& p : spec.placements) {
        auto [it, inserted] = index.emplace(p.event_label, events.size());
        if (inserted) events.push_back({p.event_label, {}});
        events[it->second].intervals.push_back(p.interval);
    }
    for (auto& e : events) sort_by_onset(e.intervals);
    return events;
}

} // namespace detail

// Projects a plan onto the metadata its signal records.
inline ClipMetadata extract_metadata(const SceneSpec& spec) {
    const std::string ctx = "scene " + spec.clip_id;
    if (spec.placements.empty()) throw PlanningError(ctx + ": no placements");
    for (const auto& p : spec.placements) {
        if (!p.interval.valid() || p.interval.offset > spec.clip_length) {
            throw PlanningError(fmt::format("{}: placement of '{}' outside the clip", ctx, p.event_label));
        }
    }
    detail::check_same_label_disjoint(spec);
    auto events = detail::group_by_label(spec);

    ClipMetadata m;
    m.clip_id = spec.clip_id;
    m.clip_length = spec.clip_length;
    switch (spec.signal) {
    case SignalType::Ordering: {
        if (events.size() != 2) throw PlanningError(ctx + ": ordering needs exactly 2 distinct events");
        auto rel = steam::ordering_relation(events[0].intervals, events[1].intervals);
        if (rel == steam::OrderingRelation::BPrecedesA) {
            std::swap(events[0], events[1]);
        } else if (rel != steam::OrderingRelation::APrecedesB) {
            throw PlanningError(ctx + ": ordering events are simultaneous");
        }
        m.payload = OrderingPayload{std::move(events)};
        break;
    }
    case SignalType::Duration: {
        DurationPayload p;
        for (const auto& e : events) {
            if (e.intervals.size() != 1) throw PlanningError(ctx + ": duration event '" + e.label + "' repeats");
            p.events.push_back({e.label, e.intervals.front().duration()});
        }
        m.payload = std::move(p);
        break;
    }
    case SignalType::Frequency: {
        FrequencyPayload p;
        for (const auto& e : events) {
            EventOnsets o{e.label, {}};
            for (const auto& iv : e.intervals) o.onsets.push_back(iv.onset);
            p.events.push_back(std::move(o));
        }
        m.payload = std::move(p);
        break;
    }
    case SignalType::Timestamp: m.payload = TimestampPayload{std::move(events)}; break;
    }
    m.validate();
    return m;
}

// Deterministic in (bank, signal, seed, config).
inline SceneSpec plan_scene(std::span<const bank::SegmentRecord> bank, SignalType signal, std::uint64_t seed,
                            const PlannerConfig& config = {}, std::string clip_id = "clip") {
    config.validate();
    const auto pools = detail::pools_by_label(bank);
    if (pools.empty()) throw PlanningError("segment bank is empty");
    if (signal == SignalType::Ordering && pools.size() < 2) {
        throw PlanningError("ordering needs at least 2 distinct event labels in the bank");
    }

    Rng rng(seed);
    detail::Planner planner(config, rng);
    SceneSpec spec;
    spec.clip_id = std::move(clip_id);
    spec.signal = signal;
    spec.clip_length = config.clip_length;
    spec.seed = seed;
    const detail::Millis length = detail::to_ms(config.clip_length);

    switch (signal) {
    case SignalType::Ordering: {
        const auto labels = planner.choose_labels(pools, 2);
        const int n_first = planner.draw_count(config.max_occurrences);
        const int n_second = planner.draw_count(config.max_occurrences);
        const auto split = static_cast<detail::Millis>(
            std::llround(static_cast<double>(length) * rng.uniform(config.split_lo, config.split_hi)));
        planner.pack(*labels[0], n_first, 0, split, spec.placements);
        planner.pack(*labels[1], n_second, split, length, spec.placements);
        break;
    }
    case SignalType::Duration: {
        const int k = planner.draw_count(std::min<int>(config.max_events, static_cast<int>(pools.size())));
        for (const auto* pool : planner.choose_labels(pools, static_cast<std::size_t>(k))) {
            const auto* seg = pool->segments[static_cast<std::size_t>(
                rng.integer(0, static_cast<std::int64_t>(pool->segments.size()) - 1))];
            const auto dur = std::min(detail::to_ms(seg->duration()), length);
            const auto onset = rng.integer(0, length - dur);
            spec.placements.push_back({pool->label, seg->segment_id,
                                       {detail::to_seconds(onset), detail::to_seconds(onset + dur)},
                                       planner.draw_gain()});
        }
        break;
    }
    case SignalType::Frequency:
    case SignalType::Timestamp: {
        const int k = planner.draw_count(std::min<int>(config.max_events, static_cast<int>(pools.size())));
        for (const auto* pool : planner.choose_labels(pools, static_cast<std::size_t>(k))) {
            planner.pack(*pool, planner.draw_count(config.max_occurrences), 0, length, spec.placements);
        }
        break;
    }
    }

    std::stable_sort(spec.placements.begin(), spec.placements.end(),
                     [](const EventPlacement& a, const EventPlacement& b) { return a.interval.onset < b.interval.onset; });
    extract_metadata(spec); // throws if the plan broke its own shape
    return spec;
}

// Thread-safe cache of decoded segment audio keyed by path.
class AudioCache {
public:
    explicit AudioCache(int sample_rate = kDefaultSampleRate) : sample_rate_(sample_rate) {}

    int sample_rate() const { return sample_rate_; }

    std::shared_ptr<const AudioBuffer> get(const std::string& path) {
        {
            std::lock_guard lock(mutex_);
            if (auto it = entries_.find(path); it != entries_.end()) return it->second;
        }
        auto buf = std::make_shared<const AudioBuffer>(read_wav(path, sample_rate_));
        std::lock_guard lock(mutex_);
        return entries_.emplace(path, std::move(buf)).first->second;
    }

    // Registers in-memory audio under `path`; must already be at sample_rate().
    void insert(const std::string& path, AudioBuffer buffer) {
        if (buffer.sample_rate != sample_rate_) {
            buffer.samples = resample_linear(buffer.samples, buffer.sample_rate, sample_rate_);
            buffer.sample_rate = sample_rate_;
        }
        std::lock_guard lock(mutex_);
        entries_[path] = std::make_shared<const AudioBuffer>(std::move(buffer));
    }

private:
    int sample_rate_;
    std::mutex mutex_;
    std::unordered_map<std::string, std::shared_ptr<const AudioBuffer>> entries_;
};

struct RenderConfig {
    double peak_ceiling = kPeakCeiling;
    std::optional<double> noise_floor_db; // RMS of optional white noise bed
};

struct RenderedClip {
    AudioBuffer audio;
    ClipMetadata metadata;
    double applied_scale = 1.0; // < 1 when the mix was rescaled below the ceiling
};

inline RenderedClip render_scene(const SceneSpec& spec, std::span<const bank::SegmentRecord> bank,
                                 AudioCache& cache, const RenderConfig& config = {}) {
    std::unordered_map<std::string, const bank::SegmentRecord*> by_id;
    for (const auto& s : bank) by_id.emplace(s.segment_id, &s);

    RenderedClip out;
    out.metadata = extract_metadata(spec);
    const int rate = cache.sample_rate();
    const auto total = static_cast<std::size_t>(std::llround(spec.clip_length * rate));
    std::vector<double> mix(total, 0.0);

    for (const auto& p : spec.placements) {
        auto it = by_id.find(p.segment_id);
        if (it == by_id.end()) throw RenderError("segment " + p.segment_id + " is not in the bank");
        if (it->second->audio_path.empty()) throw RenderError("segment " + p.segment_id + " has no audio file");
        const auto audio = cache.get(it->second->audio_path);
        const auto begin = static_cast<std::size_t>(std::llround(p.interval.onset * rate));
        const auto end = std::min(total, static_cast<std::size_t>(std::llround(p.interval.offset * rate)));
        const std::size_t n = end - begin;
        const std::size_t avail = audio->samples.size();
        // tolerate up to 1 ms of rounding shortfall from cutting; pad with silence
        if (n > avail + static_cast<std::size_t>(rate / 1000)) {
            throw RenderError(fmt::format("placement of {} needs {} samples, segment has {}", p.segment_id, n, avail));
        }
        const double gain = std::pow(10.0, p.gain_db / 20.0);
        for (std::size_t i = 0; i < std::min(n, avail); ++i) mix[begin + i] += gain * audio->samples[i];
    }

    if (config.noise_floor_db) {
        Rng noise(mix_seed(spec.seed, 0x6e6f697365ULL));
        const double amplitude = std::pow(10.0, *config.noise_floor_db / 20.0) * std::sqrt(3.0);
        for (auto& x : mix) x += noise.uniform(-amplitude, amplitude);
    }

    double peak = 0.0;
    for (double x : mix) peak = std::max(peak, std::abs(x));
    if (peak > config.peak_ceiling) out.applied_scale = config.peak_ceiling / peak;

    out.audio.sample_rate = rate;
    out.audio.samples.resize(total);
    for (std::size_t i = 0; i < total; ++i) out.audio.samples[i] = static_cast<float>(mix[i] * out.applied_scale);
    return out;
}

// Per-clip seed; independent of which clips run first.
inline std::uint64_t clip_seed(std::uint64_t global_seed, SignalType signal, std::size_t index) {
    return mix_seed(mix_seed(global_seed, static_cast<std::uint64_t>(signal)), index);
}

inline std::string clip_id_for(SignalType signal, std::size_t index) {
    return fmt::format("{}_{:05d}", to_string(signal), index);
}

inline std::vector<SceneSpec> plan_corpus(std::span<const bank::SegmentRecord> bank, SignalType signal,
                                          std::size_t count, std::uint64_t global_seed,
                                          const PlannerConfig& config = {}) {
    std::vector<SceneSpec> specs;
    specs.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        specs.push_back(plan_scene(bank, signal, clip_seed(global_seed, signal, i), config, clip_id_for(signal, i)));
    }
    return specs;
}

// Renders `count` clips into <out_dir>/<signal>/<clip_id>.wav and writes
// <out_dir>/<signal>/metadata.json. Returns the metadata in clip order.
inline std::vector<ClipMetadata> simulate_corpus(std::span<const bank::SegmentRecord> bank, SignalType signal,
                                                 std::size_t count, std::uint64_t global_seed,
                                                 const std::filesystem::path& out_dir,
                                                 const PlannerConfig& planner = {}, const RenderConfig& render = {},
                                                 int sample_rate = kDefaultSampleRate,
                                                 std::size_t threads = default_thread_count()) {
    const auto specs = plan_corpus(bank, signal, count, global_seed, planner);
    const auto dir = out_dir / std::string(to_string(signal));
    std::filesystem::create_directories(dir);
    AudioCache cache(sample_rate);
    std::vector<ClipMetadata> metadata(count);
    parallel_for(count, threads, [&](std::size_t i) {
        auto clip = render_scene(specs[i], bank, cache, render);
        write_wav_pcm16(dir / (specs[i].clip_id + ".wav"), clip.audio.samples, clip.audio.sample_rate);
        metadata[i] = std::move(clip.metadata);
    });
    write_json_file(dir / "metadata.json", metadata_list_to_json(metadata));
    return metadata;
}

} // namespace tempalign::scene
