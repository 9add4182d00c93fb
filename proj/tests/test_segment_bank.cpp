#include "oracles.hpp"
#include "test_support.hpp"

#include "tempalign/rng.hpp"
#include "tempalign/segment_bank.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace tempalign;
using namespace tempalign::bank;

namespace {

StrongLabelRecord label(std::string clip, std::string event, double on, double off) {
    return {std::move(clip), std::move(event), {on, off}};
}

SegmentRecord scored(std::string id, std::string event, double clap, double grounding) {
    SegmentRecord s;
    s.segment_id = std::move(id);
    s.clip_id = "c";
    s.event_label = std::move(event);
    s.source_interval = {0.0, 1.0};
    s.clap_score = clap;
    s.grounding_score = grounding;
    return s;
}

} // namespace

TEST(ExtractSegments, DisjointIntervalsAreBothKept) {
    const std::vector labels = {label("c1", "A", 0, 2), label("c1", "B", 5, 7)};
    const auto segs = extract_single_sound_segments(labels, 0.0);
    ASSERT_EQ(segs.size(), 2u);
    EXPECT_EQ(segs[0].event_label, "A");
    EXPECT_EQ(segs[1].event_label, "B");
    EXPECT_EQ(segs[0].segment_id, "c1_0");
    EXPECT_TRUE(segs[0].audio_path.empty());
    EXPECT_FALSE(segs[0].clap_score.has_value());
}

TEST(ExtractSegments, MutualOverlapRemovesBoth) {
    const std::vector labels = {label("c1", "A", 0, 4), label("c1", "B", 3, 7)};
    EXPECT_TRUE(extract_single_sound_segments(labels, 0.0).empty());
}

TEST(ExtractSegments, GuardMarginInflationCausesOverlap) {
    // oracle: pairwise check on inflated raw endpoints
    ASSERT_TRUE(oracle::brute_overlap(0.0, 2.0, 2.05, 4.0, 0.1));
    ASSERT_FALSE(oracle::brute_overlap(0.0, 2.0, 2.05, 4.0, 0.0));
    const std::vector labels = {label("c1", "A", 0, 2), label("c1", "B", 2.05, 4)};
    EXPECT_TRUE(extract_single_sound_segments(labels, 0.1).empty());
    EXPECT_EQ(extract_single_sound_segments(labels, 0.0).size(), 2u);
}

TEST(ExtractSegments, AbuttingIntervalsDoNotOverlapWithoutMargin) {
    const std::vector labels = {label("c1", "A", 0, 2), label("c1", "B", 2, 4)};
    EXPECT_EQ(extract_single_sound_segments(labels, 0.0).size(), 2u);
}

TEST(ExtractSegments, OverlapOnlyCountsWithinTheSameClip) {
    const std::vector labels = {label("c1", "A", 0, 4), label("c2", "B", 3, 7)};
    EXPECT_EQ(extract_single_sound_segments(labels, 0.0).size(), 2u);
}

TEST(ExtractSegments, MalformedRecordsAreRejectedWithDiagnostics) {
    const std::vector labels = {label("c1", "A", 3, 3), label("c1", "B", 5, 4), label("", "C", 0, 1),
                                label("c2", "  ", 0, 1), label("c3", "D", 0, 1)};
    std::vector<std::string> rejected;
    const auto segs = extract_single_sound_segments(labels, 0.0, &rejected);
    ASSERT_EQ(segs.size(), 1u);
    EXPECT_EQ(segs[0].clip_id, "c3");
    EXPECT_EQ(rejected.size(), 4u);
    EXPECT_NE(rejected[0].find("malformed interval"), std::string::npos);
}

TEST(ExtractSegments, OutputIsPairwiseDisjointPerClipAfterInflation) {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<StrongLabelRecord> labels;
        for (int i = 0; i < 12; ++i) {
            const double on = rng.uniform(0.0, 9.0);
            labels.push_back(label("c" + std::to_string(rng.integer(0, 2)), "e" + std::to_string(i), on,
                                   on + rng.uniform(0.1, 2.0)));
        }
        const double margin = rng.uniform(0.0, 0.3);
        const auto segs = extract_single_sound_segments(labels, margin);
        for (std::size_t i = 0; i < segs.size(); ++i) {
            for (std::size_t j = 0; j < labels.size(); ++j) {
                const auto& l = labels[j];
                if (l.clip_id != segs[i].clip_id || l.event_label == segs[i].event_label) continue;
                EXPECT_FALSE(oracle::brute_overlap(segs[i].source_interval.onset, segs[i].source_interval.offset,
                                                   l.interval.onset, l.interval.offset, margin));
            }
        }
    }
}

TEST(ApplyFilters, BoundaryScoresAreKept) {
    const std::vector segs = {scored("s1", "dog", 0.3, 0.6)};
    EXPECT_EQ(apply_filters(segs, {}).kept.size(), 1u);
}

TEST(ApplyFilters, FirstGateFailureDrops) {
    const std::vector segs = {scored("s1", "dog", 0.29, 0.99)};
    EXPECT_TRUE(apply_filters(segs, {}).kept.empty());
}

TEST(ApplyFilters, MissingScoreIsAHardErrorNamingTheSegment) {
    auto s = scored("seg-42", "dog", 0.5, 0.5);
    s.grounding_score.reset();
    const std::vector segs = {s};
    try {
        apply_filters(segs, {});
        FAIL() << "expected SchemaError";
    } catch (const SchemaError& e) {
        EXPECT_NE(std::string(e.what()).find("seg-42"), std::string::npos);
    }
}

TEST(ApplyFilters, InvalidConfigIsRejected) {
    const std::vector segs = {scored("s1", "dog", 0.5, 0.5)};
    EXPECT_THROW(apply_filters(segs, {1.2, 0.6, 0.0}), Error);
    EXPECT_THROW(apply_filters(segs, {0.3, 0.6, -1.0}), Error);
}

TEST(ApplyFilters, IsAnIdempotentSetPredicate) {
    Rng rng(3);
    std::vector<SegmentRecord> segs;
    for (int i = 0; i < 200; ++i) {
        // scores on a 0.05 grid so boundary equality is exercised
        segs.push_back(scored("s" + std::to_string(i), "e" + std::to_string(i % 9),
                              0.05 * static_cast<double>(rng.integer(0, 20)),
                              0.05 * static_cast<double>(rng.integer(0, 20))));
    }
    const CurationConfig config;
    const auto once = apply_filters(segs, config);
    std::vector<std::string> expected;
    for (const auto& s : segs) {
        if (*s.clap_score >= 0.3 && *s.grounding_score >= 0.6) expected.push_back(s.segment_id);
    }
    std::vector<std::string> got;
    for (const auto& s : once.kept) got.push_back(s.segment_id);
    EXPECT_EQ(got, expected);
    const auto twice = apply_filters(once.kept, config);
    EXPECT_EQ(twice.kept.size(), once.kept.size());
    EXPECT_EQ(once.stats.segments_extracted, 200u);
    EXPECT_EQ(once.stats.categories_extracted, 9u);
}

TEST(CurationStats, PercentagesRecomputeFromCounts) {
    CurationStats st{309, 7098, 195, 3392};
    EXPECT_DOUBLE_EQ(st.segment_pct(), 100.0 * 3392 / 7098);
    EXPECT_EQ(fmt::format("{:.1f}", st.segment_pct()), "47.8");
    EXPECT_EQ(fmt::format("{:.1f}", st.category_pct()), "63.1");
    EXPECT_EQ(format_stats(st), "#C 309 -> 195 (63.1%), #S 7098 -> 3392 (47.8%)");
    const auto j = stats_to_json(st, {});
    EXPECT_DOUBLE_EQ(j["segment_pct"].get<double>(), 47.8);
    EXPECT_EQ(CurationStats{}.segment_pct(), 0.0);
}

TEST(CurationStats, CategoriesAreCountedAfterTrimming) {
    const std::vector segs = {scored("a", "dog", 1, 1), scored("b", " dog ", 1, 1), scored("c", "cat", 0, 0)};
    const auto r = apply_filters(segs, {});
    EXPECT_EQ(r.stats.categories_extracted, 2u);
    EXPECT_EQ(r.stats.categories_kept, 1u);
}

TEST(LoadScores, PopulatesEveryMatchedSegment) {
    const std::vector segs = {scored("a", "dog", 0, 0), scored("b", "cat", 0, 0)};
    const json doc = {{"a", {{"clap", 0.4}, {"grounding", 0.7}}}, {"b", {{"clap", 0.1}, {"grounding", 0.2}}}};
    std::vector<std::string> unmatched;
    const auto out = apply_scores(segs, doc, &unmatched);
    EXPECT_TRUE(unmatched.empty());
    EXPECT_DOUBLE_EQ(*out[0].clap_score, 0.4);
    EXPECT_DOUBLE_EQ(*out[1].grounding_score, 0.2);
}

TEST(LoadScores, MissingIdLeavesScoresAbsentAndIsReported) {
    auto a = scored("a", "dog", 0, 0);
    a.clap_score.reset();
    a.grounding_score.reset();
    auto b = a;
    b.segment_id = "b";
    const std::vector segs = {a, b};
    const json doc = {{"a", {{"clap", 0.4}, {"grounding", 0.7}}}};
    std::vector<std::string> unmatched;
    const auto out = apply_scores(segs, doc, &unmatched);
    EXPECT_EQ(unmatched, std::vector<std::string>{"b"});
    EXPECT_FALSE(out[1].clap_score.has_value());
    EXPECT_THROW(apply_filters(out, {}), SchemaError);
}

TEST(LoadScores, UnknownIdIsAnErrorNamingTheId) {
    const std::vector segs = {scored("a", "dog", 0, 0)};
    const json doc = {{"a", {{"clap", 0.4}, {"grounding", 0.7}}}, {"ghost", {{"clap", 0.4}, {"grounding", 0.7}}}};
    try {
        apply_scores(segs, doc);
        FAIL();
    } catch (const SchemaError& e) {
        EXPECT_NE(std::string(e.what()).find("ghost"), std::string::npos);
    }
}

TEST(LoadScores, FileErrors) {
    const std::vector segs = {scored("a", "dog", 0, 0)};
    EXPECT_THROW(load_scores(segs, "/nonexistent/scores.json"), IoError);
    test::ScratchDir dir;
    write_text_file(dir / "bad.json", "{not json");
    EXPECT_THROW(load_scores(segs, dir / "bad.json"), SchemaError);
    write_text_file(dir / "range.json", R"({"a": {"clap": 1.5, "grounding": 0.2}})");
    EXPECT_THROW(load_scores(segs, dir / "range.json"), SchemaError);
}

TEST(StrongLabels, JsonLinesReaderSkipsBrokenLines) {
    std::istringstream in(R"({"clip_id": "c1", "event_label": "Dog", "onset": 0.5, "offset": 1.5}

not json
{"clip_id": "c1", "event_label": "Cat"}
{"clip_id": "c2", "event_label": "Cat", "onset": 2, "offset": 1}
)");
    std::vector<std::string> rejected;
    const auto recs = read_strong_labels(in, &rejected);
    ASSERT_EQ(recs.size(), 2u);
    EXPECT_EQ(recs[0].event_label, "Dog");
    EXPECT_EQ(rejected.size(), 2u);
    // the inverted interval is parsed and left to extraction to reject
    EXPECT_FALSE(recs[1].interval.valid());
}

TEST(Bank, JsonRoundTripResolvesRelativeAudio) {
    test::ScratchDir dir;
    auto s = scored("a", "dog", 0.5, 0.7);
    s.audio_path = "segments/a.wav";
    auto t = scored("b", "cat", 0.5, 0.7);
    t.clap_score.reset();
    write_json_file(dir / "bank.json", bank_to_json(std::vector{s, t}));
    const auto back = read_bank(dir / "bank.json");
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].audio_path, (dir.path() / "segments/a.wav").string());
    EXPECT_EQ(back[0].source_interval, s.source_interval);
    EXPECT_FALSE(back[1].clap_score.has_value());
    EXPECT_EQ(read_json_file(dir / "bank.json")["schema_version"], "1");
}

TEST(Bank, CutSegmentAudioWritesMonoPcm) {
    test::ScratchDir dir;
    const auto src = test::tone(440.0, 4.0, 0.5);
    write_wav_pcm16(dir / "src" / "clipA.wav", src, kDefaultSampleRate);
    const std::vector labels = {label("clipA", "beep", 1.0, 2.5)};
    const auto segs = extract_single_sound_segments(labels, 0.0);
    const auto cut = cut_segment_audio(segs, dir / "src", dir / "out", kDefaultSampleRate, 1);
    const auto audio = read_wav(cut[0].audio_path);
    ASSERT_EQ(audio.samples.size(), 48000u);
    const auto original = read_wav(dir / "src" / "clipA.wav");
    for (std::size_t i = 0; i < audio.samples.size(); i += 997) {
        EXPECT_EQ(audio.samples[i], original.samples[32000 + i]);
    }
    EXPECT_THROW(cut_segment_audio(segs, dir / "missing", dir / "out", kDefaultSampleRate, 1), IoError);
}
