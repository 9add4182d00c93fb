#pragma once

// Subcommand driver: curate -> simulate -> caption -> evaluate.

#include "tempalign/caption.hpp"
#include "tempalign/error.hpp"
#include "tempalign/http_backend.hpp"
#include "tempalign/json_io.hpp"
#include "tempalign/metadata.hpp"
#include "tempalign/parallel.hpp"
#include "tempalign/scene.hpp"
#include "tempalign/segment_bank.hpp"
#include "tempalign/signal.hpp"
#include "tempalign/steam.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

namespace tempalign::cli {

namespace fs = std::filesystem;

struct CurateOptions {
    fs::path labels;
    fs::path scores;
    fs::path bank;
    fs::path source_audio;
    fs::path out_dir;
    fs::path report;
    bank::CurationConfig config;
    std::size_t threads = default_thread_count();
};

struct SimulateOptions {
    fs::path bank;
    fs::path out_dir;
    std::string signal;
    std::size_t count = 0;
    std::uint64_t seed = 0;
    int sample_rate = kDefaultSampleRate;
    std::optional<double> noise_floor_db;
    scene::PlannerConfig planner;
    std::size_t threads = default_thread_count();
};

struct CaptionOptions {
    fs::path metadata;
    fs::path out_dir;
    std::string backend = "template";
    std::uint64_t seed = 0;
    int max_rounds = caption::kDefaultMaxRounds;
    std::string endpoint = caption::HttpBackendConfig{}.endpoint;
    std::string model = caption::HttpBackendConfig{}.model;
    std::string api_key_env = "OPENAI_API_KEY";
    double timeout = 60.0;
    int concurrency = 4;
    fs::path prompt_dir = TEMPALIGN_PROMPT_DIR;
};

struct EvaluateOptions {
    std::vector<fs::path> metadata;
    std::vector<fs::path> detections;
    double segment_length = steam::kDefaultSegmentLength;
    fs::path report;
    std::string name = "model";
};

inline int run_curate(const CurateOptions& opt, std::ostream& out, std::ostream& err) {
    std::vector<std::string> rejected;
    const auto labels = bank::read_strong_labels(opt.labels, &rejected);
    auto segments = bank::extract_single_sound_segments(labels, opt.config.guard_margin, &rejected);
    for (const auto& r : rejected) err << "warning: rejected " << r << "\n";

    const fs::path bank_dir = opt.bank.parent_path();
    if (!opt.source_audio.empty()) {
        const fs::path audio_dir = opt.out_dir.empty() ? bank_dir / "segments" : opt.out_dir;
        segments = bank::cut_segment_audio(segments, opt.source_audio, audio_dir, kDefaultSampleRate, opt.threads);
        for (auto& s : segments) s.audio_path = fs::path(s.audio_path).lexically_relative(bank_dir.empty() ? "." : bank_dir).string();
    }

    json report;
    if (opt.scores.empty()) {
        bank::CurationStats st;
        st.segments_extracted = segments.size();
        st.categories_extracted = bank::count_categories(segments);
        report = {{"schema_version", kSchemaVersion},
                  {"categories_extracted", st.categories_extracted},
                  {"segments_extracted", st.segments_extracted}};
        err << fmt::format("extracted #C {}, #S {} (no scores given, nothing filtered)\n", st.categories_extracted,
                           st.segments_extracted);
        write_json_file(opt.bank, bank::bank_to_json(segments));
    } else {
        std::vector<std::string> unmatched;
        segments = bank::load_scores(segments, opt.scores, &unmatched);
        for (const auto& id : unmatched) err << "warning: no scores for segment " << id << "\n";
        const auto result = bank::apply_filters(segments, opt.config);
        report = bank::stats_to_json(result.stats, opt.config);
        err << bank::format_stats(result.stats) << "\n";
        write_json_file(opt.bank, bank::bank_to_json(result.kept));
    }
    if (!opt.report.empty()) write_json_file(opt.report, report);
    out << "wrote " << opt.bank.string() << "\n";
    return 0;
}

inline int run_simulate(const SimulateOptions& opt, std::ostream& out, std::ostream&) {
    const auto segments = bank::read_bank(opt.bank);
    std::vector<SignalType> signals;
    if (opt.signal == "all") {
        signals.assign(kAllSignals.begin(), kAllSignals.end());
    } else {
        signals.push_back(parse_signal(opt.signal));
    }
    scene::RenderConfig render;
    render.noise_floor_db = opt.noise_floor_db;
    for (auto signal : signals) {
        const auto metadata = scene::simulate_corpus(segments, signal, opt.count, opt.seed, opt.out_dir, opt.planner,
                                                     render, opt.sample_rate, opt.threads);
        std::size_t events = 0, occurrences = 0;
        for (const auto& m : metadata) {
            events += m.event_count();
            occurrences += m.occurrence_count();
        }
        const double n = static_cast<double>(std::max<std::size_t>(metadata.size(), 1));
        out << fmt::format("{}: {} clips, {} events / {:.2f}, {} occurrences / {:.2f} -> {}\n", to_string(signal),
                           metadata.size(), events, events / n, occurrences, occurrences / n,
                           (opt.out_dir / std::string(to_string(signal))).string());
    }
    return 0;
}

inline int run_caption(const CaptionOptions& opt, std::ostream& out, std::ostream&) {
    const auto clips = read_metadata(opt.metadata);
    std::optional<caption::ChatCompletionClient> client;
    std::optional<caption::PromptSet> prompts;
    if (opt.backend == "http") {
        caption::HttpBackendConfig config;
        config.endpoint = opt.endpoint;
        config.model = opt.model;
        config.timeout_seconds = opt.timeout;
        config.max_in_flight = opt.concurrency;
        if (const char* key = std::getenv(opt.api_key_env.c_str())) config.api_key = key;
        client.emplace(config);
        prompts = caption::PromptSet::load(opt.prompt_dir);
    } else if (opt.backend != "template") {
        throw Error("unknown backend '" + opt.backend + "' (expected template or http)");
    }

    std::vector<caption::CaptionRecord> records(clips.size());
    parallel_for(clips.size(), static_cast<std::size_t>(std::max(1, opt.concurrency)), [&](std::size_t i) {
        const caption::CaptionRequest request(clips[i].signal(), clips[i]);
        caption::CaptionResult result;
        try {
            if (client) {
                caption::LlmGenerator gen(*client, *prompts);
                caption::LlmDiscriminator disc(*client, *prompts);
                result = caption::generate_caption(request, gen, disc, opt.max_rounds);
            } else {
                caption::TemplateGenerator gen(mix_seed(opt.seed, i));
                caption::RuleDiscriminator disc;
                result = caption::generate_caption(request, gen, disc, opt.max_rounds);
            }
        } catch (const caption::CaptionRejected& e) {
            std::string detail = e.what();
            for (const auto& t : e.transcript()) detail += "\n  caption: " + t.caption + "\n  feedback: " + t.feedback.message;
            throw Error(detail);
        }
        records[i] = {clips[i].clip_id, clips[i].signal(), result.text, result.rounds_used, result.backend_id};
    });

    const auto path = opt.out_dir / "captions.json";
    write_json_file(path, caption::captions_to_json(records));
    out << "wrote " << records.size() << " captions to " << path.string() << "\n";
    return 0;
}

inline int run_evaluate(const EvaluateOptions& opt, std::ostream& out, std::ostream&) {
    if (opt.metadata.size() != opt.detections.size()) {
        throw Error("--metadata and --detections must be given the same number of times");
    }
    std::vector<steam::MetricReport> reports;
    std::set<SignalType> seen;
    steam::EvaluationConfig config;
    config.segment_length = opt.segment_length;
    for (std::size_t i = 0; i < opt.metadata.size(); ++i) {
        const auto refs = read_metadata(opt.metadata[i]);
        if (refs.empty()) throw Error(opt.metadata[i].string() + " holds no clips");
        const auto signal = refs.front().signal();
        if (!seen.insert(signal).second) throw Error(fmt::format("{} metadata given twice", to_string(signal)));
        const auto dets = steam::read_detections(opt.detections[i]);
        reports.push_back(steam::evaluate(signal, refs, dets, config));
    }
    out << steam::format_table(reports, opt.name);
    if (!opt.report.empty()) write_json_file(opt.report, steam::reports_to_json(reports));
    return 0;
}

// Entry point shared by the binary and the tests. Returns the exit status.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Build temporally aligned audio-text corpora and score temporal control", "tempalign"};
    app.require_subcommand(1);

    CurateOptions curate;
    auto* cur = app.add_subcommand("curate", "extract single-sound segments and filter them by scores");
    cur->add_option("--labels", curate.labels, "strong labels, JSON lines")->required()->check(CLI::ExistingFile);
    cur->add_option("--scores", curate.scores, "per-segment clap/grounding scores JSON")->check(CLI::ExistingFile);
    cur->add_option("--bank", curate.bank, "output segment bank JSON")->required();
    cur->add_option("--source-audio", curate.source_audio, "directory of <clip_id>.wav sources to cut")
        ->check(CLI::ExistingDirectory);
    cur->add_option("--out-dir", curate.out_dir, "where cut segment audio goes (default: <bank dir>/segments)");
    cur->add_option("--report", curate.report, "curation statistics JSON");
    cur->add_option("--clap-threshold", curate.config.clap_threshold)->capture_default_str();
    cur->add_option("--atg-threshold", curate.config.atg_threshold)->capture_default_str();
    cur->add_option("--guard-margin", curate.config.guard_margin, "seconds")->capture_default_str();
    cur->add_option("--threads", curate.threads);

    SimulateOptions sim;
    auto* simc = app.add_subcommand("simulate", "plan and render clips for a control signal");
    simc->add_option("--bank", sim.bank)->required()->check(CLI::ExistingFile);
    simc->add_option("--out-dir", sim.out_dir)->required();
    simc->add_option("--signal", sim.signal, "ordering|duration|frequency|timestamp|all")->required();
    simc->add_option("--count", sim.count, "clips per signal")->required();
    simc->add_option("--seed", sim.seed)->capture_default_str();
    simc->add_option("--clip-length", sim.planner.clip_length, "seconds")->capture_default_str();
    simc->add_option("--max-events", sim.planner.max_events)->capture_default_str();
    simc->add_option("--max-occ", sim.planner.max_occurrences)->capture_default_str();
    simc->add_option("--sample-rate", sim.sample_rate)->capture_default_str();
    simc->add_option("--noise-floor-db", sim.noise_floor_db, "add a white noise bed at this RMS level");
    simc->add_option("--threads", sim.threads);

    CaptionOptions cap;
    auto* capc = app.add_subcommand("caption", "caption simulated clips from their metadata");
    capc->add_option("--metadata", cap.metadata)->required()->check(CLI::ExistingFile);
    capc->add_option("--out-dir", cap.out_dir)->required();
    capc->add_option("--backend", cap.backend, "template|http")->capture_default_str();
    capc->add_option("--seed", cap.seed)->capture_default_str();
    capc->add_option("--max-rounds", cap.max_rounds)->capture_default_str();
    capc->add_option("--endpoint", cap.endpoint)->capture_default_str();
    capc->add_option("--model", cap.model)->capture_default_str();
    capc->add_option("--api-key-env", cap.api_key_env, "environment variable holding the bearer token")
        ->capture_default_str();
    capc->add_option("--timeout", cap.timeout, "seconds")->capture_default_str();
    capc->add_option("--concurrency", cap.concurrency, "max in-flight requests")->capture_default_str();
    capc->add_option("--prompt-dir", cap.prompt_dir)->capture_default_str();

    EvaluateOptions ev;
    auto* evc = app.add_subcommand("evaluate", "score detections against reference metadata");
    evc->add_option("--metadata", ev.metadata, "reference metadata.json (repeatable)")->required();
    evc->add_option("--detections", ev.detections, "detections.json, paired by position (repeatable)")->required();
    evc->add_option("--segment-length", ev.segment_length, "seconds")->capture_default_str();
    evc->add_option("--report", ev.report, "report JSON");
    evc->add_option("--name", ev.name, "row label in the printed table")->capture_default_str();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (*cur) return run_curate(curate, out, err);
        if (*simc) return run_simulate(sim, out, err);
        if (*capc) return run_caption(cap, out, err);
        if (*evc) return run_evaluate(ev, out, err);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

} // namespace tempalign::cli
