#include "random_metadata.hpp"

#include "tempalign/caption.hpp"
#include "tempalign/http_backend.hpp"

#include <gtest/gtest.h>

using namespace tempalign;
using namespace tempalign::caption;

namespace {

// Replays a fixed list of captions and records the feedback it was given.
class ScriptedGenerator : public Generator {
public:
    explicit ScriptedGenerator(std::vector<std::string> script) : script_(std::move(script)) {}

    std::string generate(const CaptionRequest&, const std::optional<Feedback>& feedback) override {
        seen.push_back(feedback);
        return script_.at(std::min(calls_++, script_.size() - 1));
    }
    std::string id() const override { return "scripted"; }

    std::vector<std::optional<Feedback>> seen;

private:
    std::vector<std::string> script_;
    std::size_t calls_ = 0;
};

// Accepts exactly one caption string.
class ExactDiscriminator : public Discriminator {
public:
    explicit ExactDiscriminator(std::string accepted) : accepted_(std::move(accepted)) {}

    Feedback discriminate(const CaptionRequest&, std::string_view caption) override {
        ++calls;
        if (caption == accepted_) return Feedback::success();
        return Feedback::revise("round " + std::to_string(calls) + " rejected");
    }
    std::string id() const override { return "exact"; }

    int calls = 0;

private:
    std::string accepted_;
};

ClipMetadata frequency_meta(std::size_t count) {
    ClipMetadata m;
    m.clip_id = "f";
    FrequencyPayload p;
    EventOnsets e{"Dog", {}};
    for (std::size_t i = 0; i < count; ++i) e.onsets.push_back(1.0 + 2.0 * static_cast<double>(i));
    p.events.push_back(e);
    m.payload = p;
    return m;
}

ClipMetadata ordering_meta() {
    ClipMetadata m;
    m.clip_id = "o";
    m.payload = OrderingPayload{{{"Dog", {{0.5, 1.5}}}, {"Car horn", {{6.0, 7.0}}}}};
    return m;
}

} // namespace

TEST(CaptionLoop, AcceptsOnFirstRound) {
    const CaptionRequest req(SignalType::Frequency, frequency_meta(3));
    ScriptedGenerator gen({"good"});
    ExactDiscriminator disc("good");
    const auto r = generate_caption(req, gen, disc);
    EXPECT_EQ(r.text, "good");
    EXPECT_EQ(r.rounds_used, 1);
    EXPECT_EQ(r.transcript.size(), 1u);
    EXPECT_EQ(r.backend_id, "scripted+exact");
}

TEST(CaptionLoop, ThreadsFeedbackIntoLaterRounds) {
    const CaptionRequest req(SignalType::Frequency, frequency_meta(3));
    ScriptedGenerator gen({"bad1", "bad2", "good"});
    ExactDiscriminator disc("good");
    const auto r = generate_caption(req, gen, disc);
    EXPECT_EQ(r.rounds_used, 3);
    EXPECT_EQ(disc.calls, 3);
    ASSERT_EQ(gen.seen.size(), 3u);
    EXPECT_FALSE(gen.seen[0].has_value());
    EXPECT_EQ(gen.seen[1]->message, "round 1 rejected");
    EXPECT_EQ(gen.seen[2]->message, "round 2 rejected");
    EXPECT_EQ(r.transcript[1].caption, "bad2");
}

TEST(CaptionLoop, RejectsAfterMaxRounds) {
    const CaptionRequest req(SignalType::Frequency, frequency_meta(3));
    ScriptedGenerator gen({"never"});
    ExactDiscriminator disc("good");
    try {
        generate_caption(req, gen, disc);
        FAIL() << "expected rejection";
    } catch (const CaptionRejected& e) {
        EXPECT_EQ(e.transcript().size(), 5u);
        EXPECT_EQ(disc.calls, 5);
        EXPECT_NE(std::string(e.what()).find("round 5 rejected"), std::string::npos);
    }
    ExactDiscriminator disc2("good");
    ScriptedGenerator gen2({"never"});
    EXPECT_THROW(generate_caption(req, gen2, disc2, 2), CaptionRejected);
    EXPECT_EQ(disc2.calls, 2);
    EXPECT_THROW(generate_caption(req, gen2, disc2, 0), Error);
}

TEST(CaptionLoop, RequestMustMatchMetadataSignal) {
    EXPECT_THROW(CaptionRequest(SignalType::Ordering, frequency_meta(2)), Error);
}

TEST(TemplateCaption, CanonicalForms) {
    EXPECT_EQ(template_generate({SignalType::Frequency, frequency_meta(3)}, 0), "A dog barks three times.");
    EXPECT_EQ(template_generate({SignalType::Frequency, frequency_meta(1)}, 0), "A dog barks once.");
    EXPECT_EQ(template_generate({SignalType::Frequency, frequency_meta(2)}, 1), "Twice, a dog barks.");
    EXPECT_EQ(template_generate({SignalType::Ordering, ordering_meta()}, 0), "A dog barks, followed by a car horn.");

    ClipMetadata d;
    d.payload = DurationPayload{{{"Car horn", 3.5}}};
    EXPECT_EQ(template_generate({SignalType::Duration, d}, 0), "A car horn sounds for 3.5 seconds.");

    ClipMetadata t;
    t.payload = TimestampPayload{{{"Dog", {{1.0, 2.5}, {4.0, 4.5}}}}};
    EXPECT_EQ(template_generate({SignalType::Timestamp, t}, 0),
              "A dog barks from 1.0 to 2.5 seconds and from 4.0 to 4.5 seconds.");
}

TEST(Lexicon, PhraseLookup) {
    EXPECT_EQ(phrase_for("Dog").keyword, "dog");
    EXPECT_EQ(phrase_for("Vehicle_horn, car horn, honking").keyword, "horn");
    EXPECT_EQ(phrase_for("Wind chime").clause, "the sound of wind chime is heard");
}

TEST(RuleDiscriminator, CatchesWrongCountAndMissingEvent) {
    const CaptionRequest req(SignalType::Frequency, frequency_meta(3));
    EXPECT_TRUE(rule_discriminate(req, "A dog barks three times.").ok());
    EXPECT_TRUE(rule_discriminate(req, "A dog barks 3 times.").ok());
    const auto wrong = rule_discriminate(req, "A dog barks twice.");
    EXPECT_FALSE(wrong.ok());
    EXPECT_NE(wrong.message.find("three times"), std::string::npos);
    const auto missing = rule_discriminate(req, "A cat meows three times.");
    EXPECT_FALSE(missing.ok());
    EXPECT_NE(missing.message.find("Dog"), std::string::npos);
}

TEST(RuleDiscriminator, OrderingNeedsConnectiveInTheRightOrder) {
    const CaptionRequest req(SignalType::Ordering, ordering_meta());
    EXPECT_TRUE(rule_discriminate(req, "A dog barks, then a car horn honks.").ok());
    EXPECT_TRUE(rule_discriminate(req, "A car horn honks after a dog barks.").ok());
    EXPECT_FALSE(rule_discriminate(req, "A dog barks and a car horn honks.").ok());
    EXPECT_FALSE(rule_discriminate(req, "A car horn honks, followed by a dog barking.").ok());
}

TEST(RuleDiscriminator, DurationAndTimestampNumbers) {
    ClipMetadata d;
    d.payload = DurationPayload{{{"Car horn", 3.5}}};
    const CaptionRequest dr(SignalType::Duration, d);
    EXPECT_TRUE(rule_discriminate(dr, "A horn for 3.5 seconds").ok());
    EXPECT_FALSE(rule_discriminate(dr, "A horn for 3 seconds").ok());

    ClipMetadata t;
    t.payload = TimestampPayload{{{"Dog", {{1.0, 2.5}}}}};
    const CaptionRequest tr(SignalType::Timestamp, t);
    EXPECT_TRUE(rule_discriminate(tr, "dog between 1 and 2.5 s").ok());
    EXPECT_FALSE(rule_discriminate(tr, "dog from 1.0 s").ok());
}

TEST(TemplateLoop, AcceptsRandomMetadataInOneRound) {
    Rng rng(2024);
    for (std::size_t i = 0; i < 500; ++i) {
        const auto signal = kAllSignals[i % kAllSignals.size()];
        const CaptionRequest req(signal, test::random_metadata(signal, rng, i));
        TemplateGenerator gen(i);
        RuleDiscriminator disc;
        const auto r = generate_caption(req, gen, disc);
        EXPECT_EQ(r.rounds_used, 1) << r.text;
        EXPECT_EQ(r.backend_id, "template");
    }
}

TEST(Verdict, Parsing) {
    EXPECT_TRUE(parse_verdict("SUCCESS").ok());
    EXPECT_TRUE(parse_verdict("  success.\n").ok());
    const auto r = parse_verdict("REVISE: mention the horn");
    EXPECT_FALSE(r.ok());
    EXPECT_EQ(r.message, "mention the horn");
    const auto other = parse_verdict("not sure");
    EXPECT_FALSE(other.ok());
    EXPECT_EQ(other.message, "not sure");
    EXPECT_FALSE(parse_verdict("REVISE").message.empty());
}

TEST(Prompts, RenderSubstitutesPlaceholders) {
    const auto prompts = PromptSet::load();
    const auto g = PromptSet::render(prompts.generator, SignalType::Duration);
    EXPECT_EQ(g.find("{task}"), std::string::npos);
    EXPECT_EQ(g.find("{requirements}"), std::string::npos);
    EXPECT_NE(g.find("duration"), std::string::npos);
    EXPECT_THROW(PromptSet::load("/nonexistent"), IoError);
}

TEST(Captions, JsonEnvelope) {
    const std::vector<CaptionRecord> recs = {{"c1", SignalType::Ordering, "A dog barks.", 2, "template"}};
    const auto j = captions_to_json(recs);
    EXPECT_EQ(j.at("schema_version"), "1");
    EXPECT_EQ(j.at("captions").at(0).at("rounds_used"), 2);
    EXPECT_EQ(j.at("captions").at(0).at("signal"), "ordering");
}
