#pragma once

// Remote chat-completion backend for the captioning loop. Speaks the common
// {"model", "messages": [...]} -> {"choices": [{"message": {"content"}}]}
// protocol; the vendor is whatever the endpoint URL points at.

#include "tempalign/caption.hpp"
#include "tempalign/error.hpp"
#include "tempalign/json_io.hpp"
#include "tempalign/strings.hpp"

#include <httplib.h>

#include <fmt/format.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <semaphore>
#include <sstream>
#include <string>
#include <string_view>

#ifndef TEMPALIGN_PROMPT_DIR
#define TEMPALIGN_PROMPT_DIR "data/prompts"
#endif

namespace tempalign::caption {

// "prompted text completion": one system prompt, one user message, one reply.
class TextCompletion {
public:
    virtual ~TextCompletion() = default;
    virtual std::string complete(std::string_view system_prompt, std::string_view user_prompt) = 0;
    virtual std::string id() const = 0;
};

struct HttpBackendConfig {
    std::string endpoint = "https://api.openai.com/v1/chat/completions";
    std::string model = "gpt-4";
    std::string api_key; // sent as a bearer token when non-empty
    double timeout_seconds = 60.0;
    int max_in_flight = 4;
    double temperature = 0.0;
};

struct ParsedUrl {
    std::string scheme;
    std::string host;
    int port = 0;
    std::string path;
};

inline ParsedUrl parse_url(std::string_view url) {
    ParsedUrl out;
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string_view::npos) throw BackendError("endpoint URL needs a scheme: " + std::string(url));
    out.scheme = std::string(url.substr(0, scheme_end));
    if (out.scheme != "http" && out.scheme != "https") throw BackendError("unsupported URL scheme " + out.scheme);
    auto rest = url.substr(scheme_end + 3);
    auto authority = rest;
    out.path = "/";
    if (const auto slash = rest.find('/'); slash != std::string_view::npos) {
        authority = rest.substr(0, slash);
        out.path = std::string(rest.substr(slash));
    }
    out.port = out.scheme == "https" ? 443 : 80;
    if (const auto colon = authority.rfind(':'); colon != std::string_view::npos) {
        try {
            out.port = std::stoi(std::string(authority.substr(colon + 1)));
        } catch (const std::exception&) {
            throw BackendError("bad port in endpoint URL " + std::string(url));
        }
        authority = authority.substr(0, colon);
    }
    if (authority.empty()) throw BackendError("endpoint URL has no host: " + std::string(url));
    out.host = std::string(authority);
    return out;
}

// Bounded-concurrency client; safe to share between threads. Each call opens
// its own connection.
class ChatCompletionClient : public TextCompletion {
public:
    explicit ChatCompletionClient(HttpBackendConfig config)
        : config_(std::move(config)), url_(parse_url(config_.endpoint)),
          slots_(std::max(1, config_.max_in_flight)) {
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
        if (url_.scheme == "https") throw BackendError("this build has no TLS support; use an http:// endpoint");
#endif
    }

    std::string complete(std::string_view system_prompt, std::string_view user_prompt) override {
        json body = {{"model", config_.model},
                     {"temperature", config_.temperature},
                     {"messages",
                      json::array({{{"role", "system"}, {"content", std::string(system_prompt)}},
                                   {{"role", "user"}, {"content", std::string(user_prompt)}}})}};
        slots_.acquire();
        struct Release {
            std::counting_semaphore<>& s;
            ~Release() { s.release(); }
        } release{slots_};

        httplib::Client client(url_.scheme + "://" + url_.host + ":" + std::to_string(url_.port));
        const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
            std::chrono::duration<double>(config_.timeout_seconds));
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_write_timeout(timeout);
        httplib::Headers headers;
        if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

        auto res = client.Post(url_.path, headers, body.dump(), "application/json");
        if (!res) throw BackendError(fmt::format("request to {} failed: {}", config_.endpoint, httplib::to_string(res.error())));
        if (res->status != 200) {
            throw BackendError(fmt::format("{} returned HTTP {}: {}", config_.endpoint, res->status, res->body.substr(0, 200)));
        }
        try {
            const auto reply = json::parse(res->body);
            return reply.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const json::exception& e) {
            throw BackendError(fmt::format("unexpected reply from {}: {}", config_.endpoint, e.what()));
        }
    }

    std::string id() const override { return "http:" + config_.model; }

private:
    HttpBackendConfig config_;
    ParsedUrl url_;
    std::counting_semaphore<> slots_;
};

// Requirement text substituted for {requirements} in the role prompts.
inline std::string_view task_requirements(SignalType signal) {
    switch (signal) {
    case SignalType::Ordering:
        return "The caption must name both events and state that the first listed event happens before the "
               "second, using a connective such as \"followed by\" or \"then\".";
    case SignalType::Duration:
        return "The caption must name every event and state how long each lasts in seconds, with one decimal "
               "place (for example \"for 3.5 seconds\").";
    case SignalType::Frequency:
        return "The caption must name every event and state how many times each occurs, spelling out counts up "
               "to ten (\"once\", \"twice\", \"three times\").";
    case SignalType::Timestamp:
        return "The caption must name every event and give the start and end time in seconds of every "
               "occurrence, with one decimal place (for example \"from 1.0 to 2.5 seconds\").";
    }
    return "";
}

// System prompts for the two roles, loaded from text files and
// parameterised with {task} and {requirements}.
struct PromptSet {
    std::string generator;
    std::string discriminator;

    static PromptSet load(const std::filesystem::path& dir = TEMPALIGN_PROMPT_DIR) {
        auto slurp = [](const std::filesystem::path& p) {
            std::ifstream in(p);
            if (!in) throw IoError("cannot open prompt file " + p.string());
            std::ostringstream ss;
            ss << in.rdbuf();
            return ss.str();
        };
        return {slurp(dir / "generator.txt"), slurp(dir / "discriminator.txt")};
    }

    static std::string render(std::string text, SignalType signal) {
        auto replace_all = [&](std::string_view key, std::string_view value) {
            for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size())) {
                text.replace(pos, key.size(), value);
            }
        };
        replace_all("{task}", to_string(signal));
        replace_all("{requirements}", task_requirements(signal));
        return text;
    }
};

inline std::string describe_request(const CaptionRequest& request) {
    return fmt::format("Task type: {}\nMetadata:\n{}\n", to_string(request.task_type),
                       to_json(request.metadata).dump(2));
}

class LlmGenerator : public Generator {
public:
    LlmGenerator(TextCompletion& backend, PromptSet prompts) : backend_(backend), prompts_(std::move(prompts)) {}

    std::string generate(const CaptionRequest& request, const std::optional<Feedback>& feedback) override {
        std::string user = describe_request(request);
        if (feedback && !feedback->ok()) {
            user += "\nYour previous caption was rejected. Feedback:\n" + feedback->message + "\n";
        }
        user += "\nReply with the caption only.";
        auto reply = trim(backend_.complete(PromptSet::render(prompts_.generator, request.task_type), user));
        if (reply.size() >= 2 && reply.front() == '"' && reply.back() == '"') reply = reply.substr(1, reply.size() - 2);
        return reply;
    }

    std::string id() const override { return backend_.id(); }

private:
    TextCompletion& backend_;
    PromptSet prompts_;
};

// Parses "SUCCESS" or "REVISE: <feedback>" replies. Anything else counts as a
// revision with the whole reply as feedback.
inline Feedback parse_verdict(std::string_view reply) {
    const auto text = trim(reply);
    const auto upper = [&](std::size_t n) {
        std::string s = text.substr(0, std::min(n, text.size()));
        for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        return s;
    };
    if (upper(7) == "SUCCESS") return Feedback::success();
    if (upper(6) == "REVISE") {
        auto msg = text.substr(6);
        msg = trim(msg.empty() || msg.front() != ':' ? msg : msg.substr(1));
        return Feedback::revise(msg);
    }
    return Feedback::revise(text);
}

class LlmDiscriminator : public Discriminator {
public:
    LlmDiscriminator(TextCompletion& backend, PromptSet prompts) : backend_(backend), prompts_(std::move(prompts)) {}

    Feedback discriminate(const CaptionRequest& request, std::string_view caption) override {
        const std::string user = describe_request(request) + "\nCaption:\n" + std::string(caption) +
                                 "\n\nReply SUCCESS, or REVISE: followed by what must change.";
        return parse_verdict(backend_.complete(PromptSet::render(prompts_.discriminator, request.task_type), user));
    }

    std::string id() const override { return backend_.id(); }

private:
    TextCompletion& backend_;
    PromptSet prompts_;
};

} // namespace tempalign::caption
