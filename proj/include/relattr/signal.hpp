#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "relattr/tensor.hpp"

namespace relattr {

inline constexpr std::int64_t kRecordingSamples = 4096;
inline constexpr std::int64_t kRecordingLeads = 12;
inline constexpr double kRecordingRateHz = 400.0;
inline constexpr int kLeadII = 1;

extern const std::array<const char*, 12> kLeadNames;

/// Index of a standard lead name (I, II, ..., V6). Throws ConfigError.
int lead_index(const std::string& name);

enum class RhythmClass { Normal, AF, LBBB };

const char* rhythm_class_name(RhythmClass cls);
RhythmClass rhythm_class_from_name(const std::string& name);

struct EcgRecording {
    std::string id;
    Tensor samples;  // 4096 x 12, millivolt
    double sample_rate_hz = kRecordingRateHz;
    RhythmClass label = RhythmClass::Normal;

    double sample(std::int64_t j, std::int64_t k) const { return samples.at(j, k); }
};

/// Linear-interpolation resampling; output length round(n * to/from).
std::vector<double> resample(const std::vector<double>& signal, double from_hz, double to_hz);

/// Center-trims or zero-pads to exactly `target` samples; an odd remainder
/// goes to the end.
std::vector<double> fit_length(const std::vector<double>& signal, std::int64_t target = kRecordingSamples);

Tensor resample_grid(const Tensor& grid, double from_hz, double to_hz);
Tensor fit_length_grid(const Tensor& grid, std::int64_t target = kRecordingSamples);

/// Builds a valid recording from a grid at any rate/length by resampling
/// to 400 Hz and length-fitting to 4096.
EcgRecording make_recording(std::string id, Tensor grid, double rate_hz, RhythmClass label);

/// Energy-based R-peak detector (differentiate, square, moving-window
/// integrate, adaptive threshold) with a 200 ms refractory period.
/// Throws NoPeaksError on flat/degenerate signals.
std::vector<std::int64_t> detect_r_peaks(const EcgRecording& recording, int lead = kLeadII);

struct BeatSet {
    std::vector<std::int64_t> r_peaks;
    std::int64_t pre = 0;   // samples before each peak
    std::int64_t post = 0;  // samples after each peak
    // beats[lead][beat][offset]; every segment has length pre + post + 1,
    // out-of-range samples zero-filled.
    std::vector<std::vector<std::vector<double>>> beats;

    std::int64_t segment_length() const { return pre + post + 1; }
};

/// Window is (round(0.35*medianRR), round(0.55*medianRR)); a single peak
/// falls back to 0.35 s / 0.55 s. The same indices apply to all leads.
BeatSet segment_beats(const EcgRecording& recording, const std::vector<std::int64_t>& r_peaks);

/// Same segmentation over any (samples x leads) grid, so relevance grids
/// reuse the exact indices of the signal segmentation.
BeatSet segment_grid(const Tensor& grid, const std::vector<std::int64_t>& r_peaks, double sample_rate_hz);

/// Per-lead arithmetic mean across segments.
std::vector<std::vector<double>> average_beats(const BeatSet& beats);

enum Wave : int { kP = 0, kQ = 1, kR = 2, kS = 3, kT = 4 };

struct WaveSpec {
    double amplitude_mv;
    double offset_s;  // relative to the R peak
    double sigma_s;
};

struct SynthConfig {
    double bpm = 60.0;
    double duration_s = 10.24;
    double sample_rate_hz = kRecordingRateHz;
    double noise_mv = 0.0;
    RhythmClass mode = RhythmClass::Normal;
    std::uint64_t seed = 1;
    double rr_jitter = 0.25;  // relative RR spread in AF mode
    std::array<WaveSpec, 5> waves = {{
        {0.12, -0.16, 0.020},   // P
        {-0.10, -0.04, 0.010},  // Q
        {1.00, 0.00, 0.012},    // R
        {-0.20, 0.035, 0.010},  // S
        {0.30, 0.20, 0.045},    // T
    }};
};

/// Wave table with the mode applied: AF zeroes the P amplitude, LBBB
/// widens the QRS sigmas by 1.8x.
std::array<WaveSpec, 5> effective_waves(const SynthConfig& config);

/// Per-lead amplitude scale for one wave; LBBB flips the T scale so the
/// T-wave points against the QRS.
double lead_wave_scale(const SynthConfig& config, int lead, int wave);

struct SynthEcg {
    EcgRecording recording;
    std::vector<double> r_times_s;        // ground truth
    std::vector<std::int64_t> r_samples;  // ground truth, sample indices
};

std::vector<double> make_r_times(const SynthConfig& config);

/// Noise-free waveform for given R times; (round(duration*rate) x 12).
Tensor render_clean_ecg(const SynthConfig& config, const std::vector<double>& r_times);

/// Deterministic synthetic 12-lead ECG with ground-truth R positions.
SynthEcg synth_ecg(const SynthConfig& config);

}  // namespace relattr
