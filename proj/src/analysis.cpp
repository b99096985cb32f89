#include "relattr/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "relattr/errors.hpp"

namespace relattr {

double mean_recording(const Tensor& relevance) {
    if (relevance.rank() != 2) throw ShapeError("mean_recording: rank-2 grid expected");
    const auto means = mean_lead(relevance);
    double sum = 0.0;
    for (double m : means) sum += m;
    return sum / static_cast<double>(means.size());
}

std::vector<double> mean_lead(const Tensor& relevance) {
    if (relevance.rank() != 2) throw ShapeError("mean_lead: rank-2 grid expected");
    const std::int64_t rows = relevance.dim(0), cols = relevance.dim(1);
    std::vector<double> sums(static_cast<std::size_t>(cols), 0.0);
    for (std::int64_t j = 0; j < rows; ++j) {
        for (std::int64_t k = 0; k < cols; ++k) sums[static_cast<std::size_t>(k)] += relevance.at(j, k);
    }
    for (double& s : sums) s /= static_cast<double>(rows);
    return sums;
}

std::vector<double> histogram_edges(double lo, double hi, int bins) {
    if (bins < 1) throw ConfigError("histogram_edges: bins must be >= 1");
    if (lo == hi) {
        lo -= 0.5;
        hi += 0.5;
    }
    std::vector<double> edges(static_cast<std::size_t>(bins) + 1);
    for (int i = 0; i <= bins; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(bins);
        // convex combination so edges[0] == lo and edges[bins] == hi exactly
        edges[static_cast<std::size_t>(i)] = lo * (1.0 - t) + hi * t;
    }
    return edges;
}

std::int64_t histogram_bin_index(const std::vector<double>& edges, double v) {
    const auto it = std::upper_bound(edges.begin(), edges.end(), v);
    const auto bin = static_cast<std::int64_t>(it - edges.begin()) - 1;
    return std::clamp<std::int64_t>(bin, 0, static_cast<std::int64_t>(edges.size()) - 2);
}

Histogram class_histogram(const std::vector<std::vector<const Tensor*>>& per_class, int bins) {
    if (bins < 1) throw ConfigError("class_histogram: bins must be >= 1");
    if (per_class.empty()) throw ConfigError("class_histogram: no classes");
    for (const auto& tensors : per_class) {
        if (tensors.empty()) throw ConfigError("class_histogram: a class has no tensors");
    }

    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& tensors : per_class) {
        for (const Tensor* t : tensors) {
            for (std::int64_t i = 0; i < t->numel(); ++i) {
                lo = std::min(lo, (*t)[i]);
                hi = std::max(hi, (*t)[i]);
            }
        }
    }

    Histogram h;
    h.edges = histogram_edges(lo, hi, bins);
    h.counts.assign(per_class.size(), std::vector<std::int64_t>(static_cast<std::size_t>(bins), 0));
    for (std::size_t c = 0; c < per_class.size(); ++c) {
        auto& counts = h.counts[c];
        for (const Tensor* t : per_class[c]) {
            for (std::int64_t i = 0; i < t->numel(); ++i) {
                counts[static_cast<std::size_t>(histogram_bin_index(h.edges, (*t)[i]))]++;
            }
        }
    }
    return h;
}

namespace {

double quantile_sorted(const std::vector<double>& sorted, double p) {
    const std::size_t n = sorted.size();
    if (n == 1) return sorted[0];
    const double h = p * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(h);
    if (lo + 1 >= n) return sorted[n - 1];
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

BoxplotStats boxplot_stats(std::vector<double> values) {
    if (values.empty()) throw ConfigError("boxplot_stats: empty input");
    std::sort(values.begin(), values.end());

    BoxplotStats s;
    s.q1 = quantile_sorted(values, 0.25);
    s.median = quantile_sorted(values, 0.50);
    s.q3 = quantile_sorted(values, 0.75);
    const double iqr = s.q3 - s.q1;
    const double lo_fence = s.q1 - 1.5 * iqr;
    const double hi_fence = s.q3 + 1.5 * iqr;

    s.whisker_low = s.q1;
    s.whisker_high = s.q3;
    for (double v : values) {
        if (v >= lo_fence) {
            s.whisker_low = v;
            break;
        }
    }
    for (auto it = values.rbegin(); it != values.rend(); ++it) {
        if (*it <= hi_fence) {
            s.whisker_high = *it;
            break;
        }
    }
    for (double v : values) {
        if (v < lo_fence || v > hi_fence) s.outliers.push_back(v);
    }
    return s;
}

namespace {

/// 2x the average ranks of the pooled sample, so ties stay exact integers.
std::vector<std::int64_t> double_ranks(const std::vector<double>& pooled_sorted, const std::vector<double>& values) {
    std::vector<std::int64_t> out;
    out.reserve(values.size());
    for (double v : values) {
        const auto lo = std::lower_bound(pooled_sorted.begin(), pooled_sorted.end(), v) - pooled_sorted.begin();
        const auto hi = std::upper_bound(pooled_sorted.begin(), pooled_sorted.end(), v) - pooled_sorted.begin();
        // ranks lo+1 .. hi averaged, doubled: (lo+1 + hi)
        out.push_back(static_cast<std::int64_t>(lo) + 1 + static_cast<std::int64_t>(hi));
    }
    return out;
}

double exact_two_sided_p(const std::vector<std::int64_t>& pooled_ranks2, std::size_t na, std::int64_t w2_obs) {
    const std::size_t n = pooled_ranks2.size();
    // iterate all C(n, na) index subsets
    std::vector<std::size_t> idx(na);
    for (std::size_t i = 0; i < na; ++i) idx[i] = i;

    double total = 0.0, count_le = 0.0, count_ge = 0.0;
    bool done = false;
    while (!done) {
        std::int64_t w2 = 0;
        for (std::size_t i : idx) w2 += pooled_ranks2[i];
        total += 1.0;
        if (w2 <= w2_obs) count_le += 1.0;
        if (w2 >= w2_obs) count_ge += 1.0;

        auto i = static_cast<std::int64_t>(na) - 1;
        while (i >= 0 && idx[static_cast<std::size_t>(i)] == static_cast<std::size_t>(i) + n - na) --i;
        if (i < 0) {
            done = true;
        } else {
            ++idx[static_cast<std::size_t>(i)];
            for (auto j = static_cast<std::size_t>(i) + 1; j < na; ++j) idx[j] = idx[j - 1] + 1;
        }
    }
    return std::min(1.0, 2.0 * std::min(count_le, count_ge) / total);
}

}  // namespace

RankSumResult wilcoxon_rank_sum(const std::vector<double>& a, const std::vector<double>& b,
                                bool force_approximation) {
    if (a.empty() || b.empty()) throw ConfigError("wilcoxon_rank_sum: empty input");
    const std::size_t na = a.size(), nb = b.size(), n = na + nb;

    std::vector<double> pooled;
    pooled.reserve(n);
    pooled.insert(pooled.end(), a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    std::vector<double> sorted = pooled;
    std::sort(sorted.begin(), sorted.end());

    const std::vector<std::int64_t> ranks2 = double_ranks(sorted, pooled);
    std::int64_t w2 = 0;
    for (std::size_t i = 0; i < na; ++i) w2 += ranks2[i];

    RankSumResult result;
    result.rank_sum_a = static_cast<double>(w2) / 2.0;
    result.u_a = result.rank_sum_a - static_cast<double>(na) * (static_cast<double>(na) + 1.0) / 2.0;

    if (n <= 20 && !force_approximation) {
        result.exact = true;
        result.p_value = exact_two_sided_p(ranks2, na, w2);
        return result;
    }

    // normal approximation with tie correction and continuity correction
    const double dn = static_cast<double>(n), dna = static_cast<double>(na), dnb = static_cast<double>(nb);
    double tie_term = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && sorted[j] == sorted[i]) ++j;
        const double t = static_cast<double>(j - i);
        tie_term += t * t * t - t;
        i = j;
    }
    const double mu = dna * (dn + 1.0) / 2.0;
    const double var = dna * dnb / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
    if (var <= 0.0) {
        result.p_value = 1.0;
        return result;
    }
    const double w = result.rank_sum_a;
    double z = 0.0;
    if (w > mu) {
        z = (w - 0.5 - mu) / std::sqrt(var);
    } else if (w < mu) {
        z = (w + 0.5 - mu) / std::sqrt(var);
    }
    result.p_value = std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0)));
    return result;
}

std::vector<double> resample_to_length(const std::vector<double>& trace, std::int64_t target) {
    if (trace.empty()) throw ConfigError("resample_to_length: empty trace");
    if (target < 1) throw ConfigError("resample_to_length: target must be >= 1");
    const auto n = static_cast<std::int64_t>(trace.size());
    if (n == target) return trace;
    std::vector<double> out(static_cast<std::size_t>(target));
    if (target == 1) {
        out[0] = trace[static_cast<std::size_t>((n - 1) / 2)];
        return out;
    }
    const double step = static_cast<double>(n - 1) / static_cast<double>(target - 1);
    for (std::int64_t i = 0; i < target; ++i) {
        const double pos = static_cast<double>(i) * step;
        auto lo = static_cast<std::int64_t>(pos);
        if (lo >= n - 1) {
            out[static_cast<std::size_t>(i)] = trace[static_cast<std::size_t>(n - 1)];
            continue;
        }
        const double frac = pos - static_cast<double>(lo);
        out[static_cast<std::size_t>(i)] =
            trace[static_cast<std::size_t>(lo)] + frac * (trace[static_cast<std::size_t>(lo + 1)] - trace[static_cast<std::size_t>(lo)]);
    }
    return out;
}

std::optional<BeatTracePair> recording_beat_traces(const EcgRecording& recording, const Tensor& relevance, int lead,
                                                   int detection_lead) {
    if (lead < 0 || lead >= kRecordingLeads) throw ConfigError("recording_beat_traces: lead out of range");
    if (!relevance.same_shape(recording.samples)) {
        throw ShapeError("recording_beat_traces: relevance shape does not match recording " + recording.id);
    }
    std::vector<std::int64_t> peaks;
    try {
        peaks = detect_r_peaks(recording, detection_lead);
    } catch (const NoPeaksError&) {
        return std::nullopt;
    }
    const BeatSet beats = segment_beats(recording, peaks);
    const BeatSet rel_beats = segment_grid(relevance, peaks, recording.sample_rate_hz);
    BeatTracePair pair;
    pair.beat = average_beats(beats)[static_cast<std::size_t>(lead)];
    pair.relevance = average_beats(rel_beats)[static_cast<std::size_t>(lead)];
    return pair;
}

AverageRelevanceBeat aggregate_beat_traces(const std::vector<BeatTracePair>& traces, int lead) {
    if (traces.empty()) throw NoPeaksError("aggregate_beat_traces: no beats detected in any recording");

    std::vector<std::int64_t> lengths;
    lengths.reserve(traces.size());
    for (const auto& t : traces) lengths.push_back(static_cast<std::int64_t>(t.beat.size()));
    std::sort(lengths.begin(), lengths.end());
    const std::int64_t target = lengths[(lengths.size() - 1) / 2];

    const auto n_rec = traces.size();
    AverageRelevanceBeat out;
    out.lead = lead;
    out.n_recordings = static_cast<std::int64_t>(n_rec);
    out.mean_beat.assign(static_cast<std::size_t>(target), 0.0);
    out.mean_relevance.assign(static_cast<std::size_t>(target), 0.0);
    out.relevance_variance.assign(static_cast<std::size_t>(target), 0.0);

    std::vector<std::vector<double>> rel_resampled;
    rel_resampled.reserve(n_rec);
    for (const auto& t : traces) {
        const auto beat = resample_to_length(t.beat, target);
        rel_resampled.push_back(resample_to_length(t.relevance, target));
        for (std::size_t o = 0; o < beat.size(); ++o) {
            out.mean_beat[o] += beat[o];
            out.mean_relevance[o] += rel_resampled.back()[o];
        }
    }
    for (std::size_t o = 0; o < out.mean_beat.size(); ++o) {
        out.mean_beat[o] /= static_cast<double>(n_rec);
        out.mean_relevance[o] /= static_cast<double>(n_rec);
    }
    for (const auto& trace : rel_resampled) {
        for (std::size_t o = 0; o < trace.size(); ++o) {
            const double d = trace[o] - out.mean_relevance[o];
            out.relevance_variance[o] += d * d;
        }
    }
    for (double& v : out.relevance_variance) v /= static_cast<double>(n_rec);
    return out;
}

AverageRelevanceBeat average_relevance_beats(const std::vector<EcgRecording>& recordings,
                                             const std::vector<RelevanceTensor>& relevances, RhythmClass class_filter,
                                             int lead, int detection_lead) {
    if (recordings.size() != relevances.size()) {
        throw ConfigError("average_relevance_beats: recording/relevance count mismatch");
    }
    std::vector<BeatTracePair> traces;
    for (std::size_t i = 0; i < recordings.size(); ++i) {
        const EcgRecording& rec = recordings[i];
        const RelevanceTensor& rel = relevances[i];
        if (rec.id != rel.recording_id) {
            throw ConfigError("average_relevance_beats: relevance id '" + rel.recording_id +
                              "' does not match recording '" + rec.id + "'");
        }
        if (rec.label != class_filter) continue;
        auto pair = recording_beat_traces(rec, rel.values, lead, detection_lead);
        if (pair) traces.push_back(std::move(*pair));
    }
    return aggregate_beat_traces(traces, lead);
}

bool classify_with_threshold(double c_n, const std::string& abnormality, const Thresholds& thresholds) {
    if (!(c_n >= 0.0 && c_n <= 1.0)) throw ConfigError("classify_with_threshold: probability outside [0,1]");
    double threshold;
    if (abnormality == "AF" || abnormality == "af") {
        threshold = thresholds.af;
    } else if (abnormality == "LBBB" || abnormality == "lbbb") {
        threshold = thresholds.lbbb;
    } else {
        throw ConfigError("classify_with_threshold: unknown abnormality '" + abnormality + "'");
    }
    return c_n > threshold;
}

std::vector<double> normalize_unit(const std::vector<double>& trace) {
    double max_abs = 0.0;
    for (double v : trace) max_abs = std::max(max_abs, std::abs(v));
    if (max_abs == 0.0) return trace;
    std::vector<double> out(trace.size());
    for (std::size_t i = 0; i < trace.size(); ++i) out[i] = trace[i] / max_abs;
    return out;
}

}  // namespace relattr
