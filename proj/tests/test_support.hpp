#pragma once

#include "tempalign/segment_bank.hpp"
#include "tempalign/wav.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#ifndef TEMPALIGN_FIXTURE_DIR
#define TEMPALIGN_FIXTURE_DIR "tests/fixtures"
#endif

namespace tempalign::test {

inline std::filesystem::path fixture(const std::string& name) {
    return std::filesystem::path(TEMPALIGN_FIXTURE_DIR) / name;
}

// Unique scratch directory removed on destruction.
class ScratchDir {
public:
    ScratchDir() {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("tempalign_test_" + std::to_string(rd()) + "_" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::vector<float> tone(double freq, double seconds, double amplitude, int rate = kDefaultSampleRate) {
    const auto n = static_cast<std::size_t>(std::llround(seconds * rate));
    std::vector<float> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = static_cast<float>(amplitude * std::sin(2.0 * M_PI * freq * static_cast<double>(i) / rate));
    }
    return out;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Bank of synthetic tone segments: `labels` x `per_label`, written to `dir`.
// Durations cycle through 0.6..2.4 s; each label gets its own pitch.
inline std::vector<bank::SegmentRecord> write_tone_bank(const std::filesystem::path& dir,
                                                        const std::vector<std::string>& labels,
                                                        int per_label = 3, double amplitude = 0.5) {
    std::vector<bank::SegmentRecord> bank;
    int k = 0;
    for (std::size_t l = 0; l < labels.size(); ++l) {
        for (int j = 0; j < per_label; ++j, ++k) {
            const double seconds = 0.6 + 0.6 * ((k * 7) % 4);
            bank::SegmentRecord s;
            s.segment_id = labels[l] + "_seg" + std::to_string(j);
            s.clip_id = "src_" + labels[l];
            s.event_label = labels[l];
            s.source_interval = {1.0, 1.0 + seconds};
            s.clap_score = 0.9;
            s.grounding_score = 0.9;
            const auto path = dir / (s.segment_id + ".wav");
            write_wav_pcm16(path, tone(220.0 * (l + 1), seconds, amplitude), kDefaultSampleRate);
            s.audio_path = path.string();
            bank.push_back(std::move(s));
        }
    }
    return bank;
}

inline const std::vector<std::string>& tone_labels() {
    static const std::vector<std::string> labels = {"dog", "horn", "cat", "siren", "bell"};
    return labels;
}

} // namespace tempalign::test
