#pragma once

// Iterative captioning: a generator proposes a caption for a clip's metadata,
// a discriminator accepts it or returns feedback, and the feedback is passed
// to the next generator call until acceptance or the round limit.

#include "tempalign/error.hpp"
#include "tempalign/json_io.hpp"
#include "tempalign/metadata.hpp"
#include "tempalign/signal.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace tempalign::caption {

inline constexpr int kDefaultMaxRounds = 5;

struct CaptionRequest {
    SignalType task_type;
    ClipMetadata metadata;

    CaptionRequest(SignalType task, ClipMetadata m) : task_type(task), metadata(std::move(m)) {
        if (metadata.signal() != task_type) {
            throw Error(fmt::format("caption request for {} carries {} metadata", to_string(task_type),
                                    to_string(metadata.signal())));
        }
    }
};

struct Feedback {
    enum class Verdict { Success, Revise };

    Verdict verdict = Verdict::Success;
    std::string message; // empty iff Success

    static Feedback success() { return {}; }
    static Feedback revise(std::string message) {
        if (message.empty()) message = "caption rejected";
        return {Verdict::Revise, std::move(message)};
    }
    bool ok() const { return verdict == Verdict::Success; }
};

struct TranscriptEntry {
    std::string caption;
    Feedback feedback;
};

struct CaptionResult {
    std::string text;
    int rounds_used = 0;
    std::string backend_id;
    std::vector<TranscriptEntry> transcript;
};

class CaptionRejected : public Error {
public:
    CaptionRejected(const std::string& clip_id, std::vector<TranscriptEntry> transcript)
        : Error(fmt::format("caption for {} rejected after {} rounds: {}", clip_id, transcript.size(),
                            transcript.empty() ? std::string() : transcript.back().feedback.message)),
          transcript_(std::move(transcript)) {}

    const std::vector<TranscriptEntry>& transcript() const { return transcript_; }

private:
    std::vector<TranscriptEntry> transcript_;
};

class Generator {
public:
    virtual ~Generator() = default;
    // `feedback` is empty on the first round, otherwise the previous verdict.
    virtual std::string generate(const CaptionRequest& request, const std::optional<Feedback>& feedback) = 0;
    virtual std::string id() const = 0;
};

class Discriminator {
public:
    virtual ~Discriminator() = default;
    virtual Feedback discriminate(const CaptionRequest& request, std::string_view caption) = 0;
    virtual std::string id() const = 0;
};

inline CaptionResult generate_caption(const CaptionRequest& request, Generator& generator,
                                      Discriminator& discriminator, int max_rounds = kDefaultMaxRounds) {
    if (max_rounds < 1) throw Error("max_rounds must be at least 1");
    CaptionResult result;
    result.backend_id = generator.id() == discriminator.id() ? generator.id()
                                                             : generator.id() + "+" + discriminator.id();
    std::optional<Feedback> feedback;
    for (int round = 1; round <= max_rounds; ++round) {
        std::string caption = generator.generate(request, feedback);
        feedback = discriminator.discriminate(request, caption);
        result.transcript.push_back({caption, *feedback});
        if (feedback->ok()) {
            result.text = std::move(caption);
            result.rounds_used = round;
            if (result.text.empty()) throw CaptionRejected(request.metadata.clip_id, std::move(result.transcript));
            return result;
        }
    }
    throw CaptionRejected(request.metadata.clip_id, std::move(result.transcript));
}

// --- surface forms ---------------------------------------------------------

struct EventPhrase {
    std::string keyword; // must appear in any caption mentioning the event
    std::string clause;  // "a dog barks"
    std::string noun;    // "a dog barking"
};

namespace detail {

struct LexiconEntry {
    std::vector<std::string_view> aliases;
    std::string_view keyword;
    std::string_view clause;
    std::string_view noun;
};

inline const std::vector<LexiconEntry>& lexicon() {
    static const std::vector<LexiconEntry> entries = {
        {{"dog", "dog bark", "dog barking", "bark", "barking", "bow wow", "yip"}, "dog", "a dog barks", "a dog barking"},
        {{"horn", "car horn", "vehicle horn", "honking", "honk", "air horn", "truck horn"}, "horn", "a car horn sounds", "a car horn"},
        {{"male speech", "man speaking"}, "man", "a man speaks", "a man speaking"},
        {{"female speech", "woman speaking"}, "woman", "a woman speaks", "a woman speaking"},
        {{"child speech", "kid speaking"}, "child", "a child speaks", "a child speaking"},
        {{"speech", "conversation", "narration"}, "person", "a person speaks", "a person speaking"},
        {{"cat", "meow", "purr"}, "cat", "a cat meows", "a cat meowing"},
        {{"baby cry", "baby crying", "infant cry", "crying baby"}, "baby", "a baby cries", "a baby crying"},
        {{"siren", "police car siren", "ambulance siren", "fire engine siren"}, "siren", "a siren wails", "a siren"},
        {{"doorbell", "ding dong"}, "doorbell", "a doorbell rings", "a doorbell ringing"},
        {{"knock"}, "knock", "someone knocks on a door", "a knock on a door"},
        {{"telephone", "telephone bell ringing", "ringtone", "phone ringing"}, "phone", "a phone rings", "a phone ringing"},
        {{"applause", "clapping"}, "applau", "an audience applauds", "applause"},
        {{"laughter", "laugh", "giggle", "chuckle"}, "laugh", "someone laughs", "laughter"},
        {{"whistle", "whistling"}, "whistl", "a whistle blows", "a whistle blowing"},
        {{"gunshot", "gunfire", "machine gun"}, "gun", "a gun fires", "a gunshot"},
        {{"engine", "idling", "engine starting"}, "engine", "an engine runs", "an engine running"},
        {{"bird", "bird vocalization", "chirp", "tweet", "bird song"}, "bird", "a bird chirps", "a bird chirping"},
        {{"rooster", "crowing", "cock a doodle doo"}, "rooster", "a rooster crows", "a rooster crowing"},
        {{"cough"}, "cough", "someone coughs", "a cough"},
        {{"sneeze"}, "sneeze", "someone sneezes", "a sneeze"},
        {{"footsteps", "walk", "run"}, "footsteps", "footsteps are heard", "footsteps"},
        {{"alarm", "alarm clock", "smoke detector", "buzzer"}, "alarm", "an alarm rings", "an alarm"},
        {{"explosion", "boom"}, "explosion", "an explosion goes off", "an explosion"},
        {{"thunder", "thunderstorm"}, "thunder", "thunder rumbles", "thunder"},
        {{"music", "musical instrument"}, "music", "music plays", "music"},
        {{"guitar"}, "guitar", "a guitar plays", "a guitar"},
        {{"piano"}, "piano", "a piano plays", "a piano"},
        {{"door", "slam"}, "door", "a door slams", "a door slamming"},
        {{"train", "train horn", "train whistle"}, "train", "a train passes", "a train passing"},
        {{"water", "stream", "water tap", "faucet"}, "water", "water runs", "running water"},
        {{"cow", "moo"}, "cow", "a cow moos", "a cow mooing"},
        {{"sheep", "bleat"}, "sheep", "a sheep bleats", "a sheep bleating"},
        {{"duck", "quack"}, "duck", "a duck quacks", "a duck quacking"},
        {{"typing", "keyboard", "computer keyboard"}, "typ", "someone types on a keyboard", "typing"},
        {{"bell", "church bell", "bicycle bell"}, "bell", "a bell rings", "a bell ringing"},
    };
    return entries;
}

// Lowercase; underscores, dashes and commas become spaces; whitespace collapsed.
inline std::string normalize_label(std::string_view label) {
    std::string out;
    bool pending_space = false;
    for (unsigned char c : label) {
        if (std::isalnum(c)) {
            if (pending_space && !out.empty()) out.push_back(' ');
            pending_space = false;
            out.push_back(static_cast<char>(std::tolower(c)));
        } else {
            pending_space = true;
        }
    }
    return out;
}

inline bool contains_words(std::string_view haystack, std::string_view needle) {
    for (std::size_t pos = haystack.find(needle); pos != std::string_view::npos;
         pos = haystack.find(needle, pos + 1)) {
        const bool left = pos == 0 || haystack[pos - 1] == ' ';
        const bool right = pos + needle.size() == haystack.size() || haystack[pos + needle.size()] == ' ';
        if (left && right) return true;
    }
    return false;
}

inline std::string capitalize(std::string s) {
    if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
}

inline std::string regex_escape(std::string_view s) {
    static const std::string special = R"(\^$.|?*+()[]{})";
    std::string out;
    for (char c : s) {
        if (special.find(c) != std::string::npos) out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

} // namespace detail

// Phrase for an event label: an exact alias match, else the longest alias
// appearing as whole words in the label, else a generic "sound of" phrase.
inline EventPhrase phrase_for(std::string_view label) {
    const auto norm = detail::normalize_label(label);
    const detail::LexiconEntry* best = nullptr;
    std::size_t best_len = 0;
    for (const auto& e : detail::lexicon()) {
        for (auto alias : e.aliases) {
            if (alias == norm) return {std::string(e.keyword), std::string(e.clause), std::string(e.noun)};
            if (alias.size() > best_len && detail::contains_words(norm, alias)) {
                best = &e;
                best_len = alias.size();
            }
        }
    }
    if (best) return {std::string(best->keyword), std::string(best->clause), std::string(best->noun)};
    const std::string name = norm.empty() ? std::string(label) : norm;
    return {name, "the sound of " + name + " is heard", "the sound of " + name};
}

// Counts up to ten are spelled out.
inline std::string count_word(std::size_t n) {
    static constexpr std::array<std::string_view, 11> words = {"zero", "one", "two", "three", "four", "five",
                                                               "six", "seven", "eight", "nine", "ten"};
    return n < words.size() ? std::string(words[n]) : std::to_string(n);
}

inline std::string count_phrase(std::size_t n) {
    if (n == 1) return "once";
    if (n == 2) return "twice";
    return count_word(n) + " times";
}

// Seconds with one decimal place.
inline std::string seconds_text(double seconds) { return fmt::format("{:.1f}", seconds); }

// --- template generator ----------------------------------------------------

// Deterministic offline caption. The seed only selects between phrasings.
inline std::string template_generate(const CaptionRequest& request, std::uint64_t seed) {
    using detail::capitalize;
    std::vector<std::string> sentences;
    auto variant = [&](std::size_t i) { return (seed + i) % 2; };

    switch (request.task_type) {
    case SignalType::Ordering: {
        const auto& p = std::get<OrderingPayload>(request.metadata.payload);
        const auto first = phrase_for(p.events[0].label);
        const auto second = phrase_for(p.events[1].label);
        if (variant(0) == 0) {
            sentences.push_back(capitalize(first.clause) + ", followed by " + second.noun + ".");
        } else {
            sentences.push_back(capitalize(first.clause) + ", and then " + second.clause + ".");
        }
        break;
    }
    case SignalType::Duration: {
        const auto& p = std::get<DurationPayload>(request.metadata.payload);
        for (std::size_t i = 0; i < p.events.size(); ++i) {
            const auto ph = phrase_for(p.events[i].label);
            const auto secs = seconds_text(p.events[i].duration);
            sentences.push_back(variant(i) == 0 ? capitalize(ph.clause) + " for " + secs + " seconds."
                                                : "For " + secs + " seconds, " + ph.clause + ".");
        }
        break;
    }
    case SignalType::Frequency: {
        const auto& p = std::get<FrequencyPayload>(request.metadata.payload);
        for (std::size_t i = 0; i < p.events.size(); ++i) {
            const auto ph = phrase_for(p.events[i].label);
            const auto count = count_phrase(p.events[i].frequency());
            sentences.push_back(variant(i) == 0 ? capitalize(ph.clause) + " " + count + "."
                                                : capitalize(count) + ", " + ph.clause + ".");
        }
        break;
    }
    case SignalType::Timestamp: {
        const auto& p = std::get<TimestampPayload>(request.metadata.payload);
        for (std::size_t i = 0; i < p.events.size(); ++i) {
            const auto ph = phrase_for(p.events[i].label);
            std::vector<std::string> spans;
            for (const auto& iv : p.events[i].intervals) {
                spans.push_back(variant(i) == 0
                                    ? "from " + seconds_text(iv.onset) + " to " + seconds_text(iv.offset) + " seconds"
                                    : "between " + seconds_text(iv.onset) + " and " + seconds_text(iv.offset) +
                                          " seconds");
            }
            const auto joined = fmt::format("{}", fmt::join(spans, " and "));
            sentences.push_back(variant(i) == 0 ? capitalize(ph.clause) + " " + joined + "."
                                                : capitalize(joined) + ", " + ph.clause + ".");
        }
        break;
    }
    }
    return fmt::format("{}", fmt::join(sentences, " "));
}

// --- rule discriminator ----------------------------------------------------

namespace detail {

inline std::string lowercase(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

// Position of the first mention of `keyword` at a word start, or npos.
inline std::size_t find_mention(const std::string& text, const std::string& keyword) {
    std::smatch m;
    if (std::regex_search(text, m, std::regex("\\b" + regex_escape(keyword)))) {
        return static_cast<std::size_t>(m.position(0));
    }
    return std::string::npos;
}

inline bool has_phrase(const std::string& text, const std::string& phrase) {
    return std::regex_search(text, std::regex("\\b" + regex_escape(phrase) + "\\b"));
}

// Every number in the text, normalised to one decimal place.
inline std::set<std::string> numbers_in(const std::string& text) {
    static const std::regex number(R"(\d+(?:\.\d+)?)");
    std::set<std::string> out;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), number); it != std::sregex_iterator(); ++it) {
        out.insert(seconds_text(std::stod(it->str())));
    }
    return out;
}

inline bool mentions_count(const std::string& text, std::size_t n) {
    std::vector<std::string> forms = {count_word(n) + " time", std::to_string(n) + " time"};
    if (n == 1) forms.push_back("once");
    if (n == 2) forms.push_back("twice");
    return std::any_of(forms.begin(), forms.end(), [&](const std::string& f) {
        return std::regex_search(text, std::regex("\\b" + regex_escape(f)));
    });
}

} // namespace detail

// Accepts a caption when it names every event and states every quantity its
// signal requires; otherwise names the first missing element.
inline Feedback rule_discriminate(const CaptionRequest& request, std::string_view caption) {
    const std::string text = detail::lowercase(caption);
    const auto labels = request.metadata.labels();
    for (const auto& label : labels) {
        if (detail::find_mention(text, phrase_for(label).keyword) == std::string::npos) {
            return Feedback::revise(fmt::format("missing event '{}' (expected a mention of \"{}\")", label,
                                                phrase_for(label).keyword));
        }
    }

    const auto numbers = detail::numbers_in(text);
    switch (request.task_type) {
    case SignalType::Ordering: {
        static constexpr std::array<std::string_view, 6> forward = {"followed by", "then", "before",
                                                                    "later", "afterwards", "subsequently"};
        static constexpr std::array<std::string_view, 3> backward = {"after", "preceded by", "precedes"};
        const auto present = [&](std::string_view c) { return detail::has_phrase(text, std::string(c)); };
        const bool has_forward = std::any_of(forward.begin(), forward.end(), present);
        const bool has_backward = std::any_of(backward.begin(), backward.end(), present);
        if (!has_forward && !has_backward) {
            return Feedback::revise("missing ordering connective (e.g. \"followed by\")");
        }
        const auto first = phrase_for(labels[0]).keyword;
        const auto second = phrase_for(labels[1]).keyword;
        if (has_forward && first != second &&
            detail::find_mention(text, first) > detail::find_mention(text, second)) {
            return Feedback::revise(fmt::format("order mismatch: '{}' should be described before '{}'",
                                                labels[0], labels[1]));
        }
        break;
    }
    case SignalType::Duration:
        for (const auto& e : std::get<DurationPayload>(request.metadata.payload).events) {
            if (!numbers.contains(seconds_text(e.duration))) {
                return Feedback::revise(fmt::format("duration mismatch for '{}': expected {} seconds", e.label,
                                                    seconds_text(e.duration)));
            }
        }
        break;
    case SignalType::Frequency:
        for (const auto& e : std::get<FrequencyPayload>(request.metadata.payload).events) {
            if (!detail::mentions_count(text, e.frequency())) {
                return Feedback::revise(fmt::format("frequency mismatch for '{}': expected it to occur {}", e.label,
                                                    count_phrase(e.frequency())));
            }
        }
        break;
    case SignalType::Timestamp:
        for (const auto& e : std::get<TimestampPayload>(request.metadata.payload).events) {
            for (const auto& iv : e.intervals) {
                for (double t : {iv.onset, iv.offset}) {
                    if (!numbers.contains(seconds_text(t))) {
                        return Feedback::revise(fmt::format("timestamp missing for '{}': expected {} seconds",
                                                            e.label, seconds_text(t)));
                    }
                }
            }
        }
        break;
    }
    return Feedback::success();
}

// Offline backend pair built from the same rules.
class TemplateGenerator : public Generator {
public:
    explicit TemplateGenerator(std::uint64_t seed = 0) : seed_(seed) {}

    std::string generate(const CaptionRequest& request, const std::optional<Feedback>& feedback) override {
        // a rejection moves to the other phrasing
        return template_generate(request, feedback ? seed_ + 1 : seed_);
    }
    std::string id() const override { return "template"; }

private:
    std::uint64_t seed_;
};

class RuleDiscriminator : public Discriminator {
public:
    Feedback discriminate(const CaptionRequest& request, std::string_view caption) override {
        return rule_discriminate(request, caption);
    }
    std::string id() const override { return "template"; }
};

// --- captions.json ---------------------------------------------------------

struct CaptionRecord {
    std::string clip_id;
    SignalType signal;
    std::string text;
    int rounds_used;
    std::string backend_id;
};

inline json captions_to_json(std::span<const CaptionRecord> records) {
    json items = json::array();
    for (const auto& r : records) {
        items.push_back({{"clip_id", r.clip_id},
                         {"signal", std::string(to_string(r.signal))},
                         {"text", r.text},
                         {"rounds_used", r.rounds_used},
                         {"backend_id", r.backend_id}});
    }
    return make_envelope("captions", std::move(items));
}

} // namespace tempalign::caption
