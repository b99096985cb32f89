#include "relattr/signal.hpp"

#include <algorithm>
#include <cmath>

#include "relattr/errors.hpp"
#include "relattr/rng.hpp"

namespace relattr {

const std::array<const char*, 12> kLeadNames = {"I",  "II", "III", "aVR", "aVL", "aVF",
                                                "V1", "V2", "V3",  "V4",  "V5",  "V6"};

int lead_index(const std::string& name) {
    for (std::size_t k = 0; k < kLeadNames.size(); ++k) {
        if (name == kLeadNames[k]) return static_cast<int>(k);
    }
    throw ConfigError("unknown lead name: " + name);
}

const char* rhythm_class_name(RhythmClass cls) {
    switch (cls) {
        case RhythmClass::Normal: return "Normal";
        case RhythmClass::AF: return "AF";
        case RhythmClass::LBBB: return "LBBB";
    }
    return "?";
}

RhythmClass rhythm_class_from_name(const std::string& name) {
    if (name == "Normal") return RhythmClass::Normal;
    if (name == "AF") return RhythmClass::AF;
    if (name == "LBBB") return RhythmClass::LBBB;
    throw ConfigError("unknown class label: " + name);
}

std::vector<double> resample(const std::vector<double>& signal, double from_hz, double to_hz) {
    if (signal.empty()) throw ConfigError("resample: empty signal");
    if (!(from_hz > 0.0) || !(to_hz > 0.0)) throw ConfigError("resample: rates must be positive");
    if (from_hz == to_hz) return signal;

    const auto n = static_cast<std::int64_t>(signal.size());
    const auto out_len = static_cast<std::int64_t>(std::llround(static_cast<double>(n) * to_hz / from_hz));
    std::vector<double> out(static_cast<std::size_t>(std::max<std::int64_t>(out_len, 1)));
    const double step = from_hz / to_hz;
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(out.size()); ++i) {
        const double pos = static_cast<double>(i) * step;
        std::int64_t lo = static_cast<std::int64_t>(std::floor(pos));
        if (lo >= n - 1) {
            out[static_cast<std::size_t>(i)] = signal[static_cast<std::size_t>(n - 1)];
            continue;
        }
        const double frac = pos - static_cast<double>(lo);
        const double a = signal[static_cast<std::size_t>(lo)];
        const double b = signal[static_cast<std::size_t>(lo + 1)];
        out[static_cast<std::size_t>(i)] = a + frac * (b - a);
    }
    return out;
}

std::vector<double> fit_length(const std::vector<double>& signal, std::int64_t target) {
    if (signal.empty()) throw ConfigError("fit_length: empty signal");
    const auto n = static_cast<std::int64_t>(signal.size());
    if (n == target) return signal;

    std::vector<double> out(static_cast<std::size_t>(target), 0.0);
    if (n > target) {
        const std::int64_t front = (n - target) / 2;
        std::copy_n(signal.begin() + front, target, out.begin());
    } else {
        const std::int64_t front = (target - n) / 2;
        std::copy(signal.begin(), signal.end(), out.begin() + front);
    }
    return out;
}

namespace {

std::vector<double> lead_column(const Tensor& grid, std::int64_t k) {
    std::vector<double> col(static_cast<std::size_t>(grid.dim(0)));
    for (std::int64_t j = 0; j < grid.dim(0); ++j) col[static_cast<std::size_t>(j)] = grid.at(j, k);
    return col;
}

Tensor from_columns(const std::vector<std::vector<double>>& cols) {
    const auto leads = static_cast<std::int64_t>(cols.size());
    const auto len = static_cast<std::int64_t>(cols[0].size());
    Tensor grid({len, leads});
    for (std::int64_t k = 0; k < leads; ++k) {
        for (std::int64_t j = 0; j < len; ++j) grid.at(j, k) = cols[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
    }
    return grid;
}

}  // namespace

Tensor resample_grid(const Tensor& grid, double from_hz, double to_hz) {
    if (grid.rank() != 2) throw ShapeError("resample_grid: rank-2 grid expected");
    std::vector<std::vector<double>> cols;
    cols.reserve(static_cast<std::size_t>(grid.dim(1)));
    for (std::int64_t k = 0; k < grid.dim(1); ++k) cols.push_back(resample(lead_column(grid, k), from_hz, to_hz));
    return from_columns(cols);
}

Tensor fit_length_grid(const Tensor& grid, std::int64_t target) {
    if (grid.rank() != 2) throw ShapeError("fit_length_grid: rank-2 grid expected");
    std::vector<std::vector<double>> cols;
    cols.reserve(static_cast<std::size_t>(grid.dim(1)));
    for (std::int64_t k = 0; k < grid.dim(1); ++k) cols.push_back(fit_length(lead_column(grid, k), target));
    return from_columns(cols);
}

EcgRecording make_recording(std::string id, Tensor grid, double rate_hz, RhythmClass label) {
    if (grid.rank() != 2 || grid.dim(1) != kRecordingLeads) {
        throw ShapeError("recording grid must be (samples x 12)");
    }
    if (rate_hz != kRecordingRateHz) grid = resample_grid(grid, rate_hz, kRecordingRateHz);
    if (grid.dim(0) != kRecordingSamples) grid = fit_length_grid(grid, kRecordingSamples);
    if (!grid.all_finite()) throw ValidationError("recording contains non-finite samples");
    EcgRecording rec;
    rec.id = std::move(id);
    rec.samples = std::move(grid);
    rec.sample_rate_hz = kRecordingRateHz;
    rec.label = label;
    return rec;
}

std::vector<std::int64_t> detect_r_peaks(const EcgRecording& recording, int lead) {
    if (lead < 0 || lead >= kRecordingLeads) throw ConfigError("detect_r_peaks: lead out of range");
    const double fs = recording.sample_rate_hz;
    const std::int64_t n = recording.samples.dim(0);
    if (static_cast<double>(n) < 2.0 * fs) throw ConfigError("detect_r_peaks: need at least 2 s of signal");

    std::vector<double> x(static_cast<std::size_t>(n));
    for (std::int64_t j = 0; j < n; ++j) x[static_cast<std::size_t>(j)] = recording.samples.at(j, lead);

    // differentiate -> square
    std::vector<double> energy(static_cast<std::size_t>(n), 0.0);
    for (std::int64_t j = 1; j + 1 < n; ++j) {
        const double d = 0.5 * (x[static_cast<std::size_t>(j + 1)] - x[static_cast<std::size_t>(j - 1)]);
        energy[static_cast<std::size_t>(j)] = d * d;
    }

    // centered moving-window integration, ~75 ms
    const std::int64_t half = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::llround(0.0375 * fs)));
    std::vector<double> mwi(static_cast<std::size_t>(n), 0.0);
    double acc = 0.0;
    std::int64_t left = 0, right = -1;
    for (std::int64_t j = 0; j < n; ++j) {
        const std::int64_t new_right = std::min<std::int64_t>(n - 1, j + half);
        while (right < new_right) acc += energy[static_cast<std::size_t>(++right)];
        const std::int64_t new_left = std::max<std::int64_t>(0, j - half);
        while (left < new_left) acc -= energy[static_cast<std::size_t>(left++)];
        mwi[static_cast<std::size_t>(j)] = acc / static_cast<double>(right - left + 1);
    }

    const double peak_energy = *std::max_element(mwi.begin(), mwi.end());
    if (!(peak_energy > 0.0)) throw NoPeaksError("detect_r_peaks: flat signal");
    const double threshold = 0.25 * peak_energy;

    // local maxima of the integrated energy above threshold
    std::vector<std::int64_t> candidates;
    for (std::int64_t j = 1; j + 1 < n; ++j) {
        const double v = mwi[static_cast<std::size_t>(j)];
        if (v < threshold) continue;
        if (v >= mwi[static_cast<std::size_t>(j - 1)] && v > mwi[static_cast<std::size_t>(j + 1)]) {
            candidates.push_back(j);
        }
    }
    if (candidates.empty()) throw NoPeaksError("detect_r_peaks: no energy peaks above threshold");

    // refine to the largest-magnitude sample nearby, then apply refractory
    const std::int64_t refine = static_cast<std::int64_t>(std::llround(0.06 * fs));
    const std::int64_t refractory = static_cast<std::int64_t>(std::llround(0.2 * fs));
    std::vector<std::int64_t> peaks;
    for (std::int64_t c : candidates) {
        std::int64_t best = std::max<std::int64_t>(0, c - refine);
        const std::int64_t hi = std::min<std::int64_t>(n - 1, c + refine);
        for (std::int64_t j = best + 1; j <= hi; ++j) {
            if (std::abs(x[static_cast<std::size_t>(j)]) > std::abs(x[static_cast<std::size_t>(best)])) best = j;
        }
        if (!peaks.empty()) {
            if (best == peaks.back()) continue;
            if (best - peaks.back() < refractory) {
                if (std::abs(x[static_cast<std::size_t>(best)]) > std::abs(x[static_cast<std::size_t>(peaks.back())])) {
                    peaks.back() = best;
                }
                continue;
            }
        }
        peaks.push_back(best);
    }
    if (peaks.empty()) throw NoPeaksError("detect_r_peaks: no peaks survived the refractory filter");
    return peaks;
}

BeatSet segment_grid(const Tensor& grid, const std::vector<std::int64_t>& r_peaks, double sample_rate_hz) {
    if (grid.rank() != 2) throw ShapeError("segment_grid: rank-2 grid expected");
    if (r_peaks.empty()) throw ConfigError("segment_grid: empty peak list");
    const std::int64_t n = grid.dim(0);
    for (std::size_t i = 0; i < r_peaks.size(); ++i) {
        if (r_peaks[i] < 0 || r_peaks[i] >= n) throw ConfigError("segment_grid: peak index out of range");
        if (i > 0 && r_peaks[i] <= r_peaks[i - 1]) throw ConfigError("segment_grid: peaks must be strictly increasing");
    }

    BeatSet set;
    set.r_peaks = r_peaks;
    if (r_peaks.size() == 1) {
        set.pre = static_cast<std::int64_t>(std::llround(0.35 * sample_rate_hz));
        set.post = static_cast<std::int64_t>(std::llround(0.55 * sample_rate_hz));
    } else {
        std::vector<std::int64_t> rr(r_peaks.size() - 1);
        for (std::size_t i = 0; i + 1 < r_peaks.size(); ++i) rr[i] = r_peaks[i + 1] - r_peaks[i];
        std::sort(rr.begin(), rr.end());
        const std::size_t m = rr.size();
        const double median_rr =
            m % 2 == 1 ? static_cast<double>(rr[m / 2]) : 0.5 * static_cast<double>(rr[m / 2 - 1] + rr[m / 2]);
        set.pre = static_cast<std::int64_t>(std::llround(0.35 * median_rr));
        set.post = static_cast<std::int64_t>(std::llround(0.55 * median_rr));
    }

    const std::int64_t leads = grid.dim(1);
    const std::int64_t seg_len = set.segment_length();
    set.beats.assign(static_cast<std::size_t>(leads), {});
    for (std::int64_t k = 0; k < leads; ++k) {
        auto& lead_beats = set.beats[static_cast<std::size_t>(k)];
        lead_beats.reserve(r_peaks.size());
        for (std::int64_t peak : r_peaks) {
            std::vector<double> seg(static_cast<std::size_t>(seg_len), 0.0);
            for (std::int64_t o = 0; o < seg_len; ++o) {
                const std::int64_t j = peak - set.pre + o;
                if (j >= 0 && j < n) seg[static_cast<std::size_t>(o)] = grid.at(j, k);
            }
            lead_beats.push_back(std::move(seg));
        }
    }
    return set;
}

BeatSet segment_beats(const EcgRecording& recording, const std::vector<std::int64_t>& r_peaks) {
    return segment_grid(recording.samples, r_peaks, recording.sample_rate_hz);
}

std::vector<std::vector<double>> average_beats(const BeatSet& beats) {
    if (beats.beats.empty() || beats.beats.front().empty()) throw ConfigError("average_beats: empty beat set");
    std::vector<std::vector<double>> avg(beats.beats.size());
    for (std::size_t k = 0; k < beats.beats.size(); ++k) {
        const auto& lead_beats = beats.beats[k];
        std::vector<double> mean(lead_beats.front().size(), 0.0);
        for (const auto& seg : lead_beats) {
            for (std::size_t o = 0; o < seg.size(); ++o) mean[o] += seg[o];
        }
        for (double& v : mean) v /= static_cast<double>(lead_beats.size());
        avg[k] = std::move(mean);
    }
    return avg;
}

namespace {

// [lead][wave], wave order P,Q,R,S,T. Lead II is the reference; aVR is
// inverted and V1 carries the dominant negative S.
constexpr double kLeadScales[12][5] = {
    {0.8, 0.6, 0.7, 0.5, 0.8},       // I
    {1.0, 1.0, 1.0, 1.0, 1.0},       // II
    {0.4, 0.5, 0.5, 0.6, 0.4},       // III
    {-0.8, -0.7, -0.9, -0.7, -0.8},  // aVR
    {0.5, 0.4, 0.4, 0.4, 0.5},       // aVL
    {0.7, 0.8, 0.8, 0.8, 0.7},       // aVF
    {0.3, 0.2, 0.3, 1.6, -0.4},      // V1
    {0.4, 0.3, 0.5, 1.4, 0.6},       // V2
    {0.5, 0.4, 0.7, 1.1, 0.8},       // V3
    {0.6, 0.6, 1.1, 0.8, 0.9},       // V4
    {0.7, 0.7, 1.2, 0.5, 0.9},       // V5
    {0.7, 0.6, 1.1, 0.3, 0.8},       // V6
};

void check_config(const SynthConfig& config) {
    if (!(config.bpm > 0.0) || !(config.duration_s > 0.0) || !(config.sample_rate_hz > 0.0)) {
        throw ConfigError("synth_ecg: bpm, duration and rate must be positive");
    }
    if (config.noise_mv < 0.0 || config.rr_jitter < 0.0 || config.rr_jitter >= 1.0) {
        throw ConfigError("synth_ecg: invalid noise or jitter");
    }
}

}  // namespace

std::array<WaveSpec, 5> effective_waves(const SynthConfig& config) {
    std::array<WaveSpec, 5> waves = config.waves;
    if (config.mode == RhythmClass::AF) {
        waves[kP].amplitude_mv = 0.0;
    } else if (config.mode == RhythmClass::LBBB) {
        waves[kQ].sigma_s *= 1.8;
        waves[kR].sigma_s *= 1.8;
        waves[kS].sigma_s *= 1.8;
    }
    return waves;
}

double lead_wave_scale(const SynthConfig& config, int lead, int wave) {
    double scale = kLeadScales[lead][wave];
    if (config.mode == RhythmClass::LBBB && wave == kT) scale = -scale;
    return scale;
}

std::vector<double> make_r_times(const SynthConfig& config) {
    check_config(config);
    Rng rng(config.seed);
    const double rr = 60.0 / config.bpm;
    auto next_rr = [&] {
        if (config.mode == RhythmClass::AF) return rr * (1.0 + config.rr_jitter * rng.uniform(-1.0, 1.0));
        return rr;
    };
    std::vector<double> times;
    double t = 0.5 * next_rr();
    while (t < config.duration_s) {
        times.push_back(t);
        t += next_rr();
    }
    return times;
}

Tensor render_clean_ecg(const SynthConfig& config, const std::vector<double>& r_times) {
    check_config(config);
    const double fs = config.sample_rate_hz;
    const auto n = static_cast<std::int64_t>(std::llround(config.duration_s * fs));
    Tensor grid({n, kRecordingLeads});
    const auto waves = effective_waves(config);

    for (double t_r : r_times) {
        for (int w = 0; w < 5; ++w) {
            const WaveSpec& spec = waves[static_cast<std::size_t>(w)];
            if (spec.amplitude_mv == 0.0) continue;
            const double center = t_r + spec.offset_s;
            const std::int64_t j0 =
                std::max<std::int64_t>(0, static_cast<std::int64_t>(std::llround((center - 4.0 * spec.sigma_s) * fs)));
            const std::int64_t j1 =
                std::min<std::int64_t>(n - 1, static_cast<std::int64_t>(std::llround((center + 4.0 * spec.sigma_s) * fs)));
            for (int k = 0; k < kRecordingLeads; ++k) {
                const double amp = spec.amplitude_mv * lead_wave_scale(config, k, w);
                if (amp == 0.0) continue;
                for (std::int64_t j = j0; j <= j1; ++j) {
                    const double dt = static_cast<double>(j) / fs - center;
                    grid.at(j, k) += amp * std::exp(-0.5 * dt * dt / (spec.sigma_s * spec.sigma_s));
                }
            }
        }
    }
    return grid;
}

SynthEcg synth_ecg(const SynthConfig& config) {
    check_config(config);
    const std::vector<double> r_times = make_r_times(config);
    Tensor grid = render_clean_ecg(config, r_times);

    if (config.noise_mv > 0.0) {
        // Continue the seed stream past the RR draws so noise is
        // independent of them but still fully determined by the seed.
        Rng rng(config.seed ^ 0xda3e39cb94b95bdbULL);
        for (std::int64_t j = 0; j < grid.dim(0); ++j) {
            for (std::int64_t k = 0; k < kRecordingLeads; ++k) {
                grid.at(j, k) += rng.normal(0.0, config.noise_mv);
            }
        }
    }

    SynthEcg out;
    out.recording = make_recording("synth", std::move(grid), config.sample_rate_hz, config.mode);
    out.r_times_s = r_times;
    out.r_samples.reserve(r_times.size());
    for (double t : r_times) {
        out.r_samples.push_back(static_cast<std::int64_t>(std::llround(t * config.sample_rate_hz)));
    }
    return out;
}

}  // namespace relattr
