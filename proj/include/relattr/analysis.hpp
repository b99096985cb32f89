#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "relattr/attribution.hpp"
#include "relattr/io.hpp"
#include "relattr/signal.hpp"
#include "relattr/tensor.hpp"

namespace relattr {

/// M_n: mean over all samples and leads of one relevance grid.
double mean_recording(const Tensor& relevance);

/// M_{n,k}: per-lead means (one value per column).
std::vector<double> mean_lead(const Tensor& relevance);

struct Histogram {
    std::vector<double> edges;                    // bins + 1 shared edges
    std::vector<std::vector<std::int64_t>> counts;  // per class
};

/// Shared-edge histogram over the global min/max of all classes. Counts
/// per class sum to that class's total sample count.
Histogram class_histogram(const std::vector<std::vector<const Tensor*>>& per_class, int bins);

/// Equally spaced edges over [lo, hi] (widened by 0.5 when lo == hi).
std::vector<double> histogram_edges(double lo, double hi, int bins);

/// Bin of v: [edges[b], edges[b+1]) with the last bin closed above.
std::int64_t histogram_bin_index(const std::vector<double>& edges, double v);

struct BoxplotStats {
    double median = 0.0, q1 = 0.0, q3 = 0.0;
    double whisker_low = 0.0, whisker_high = 0.0;
    std::vector<double> outliers;
};

/// Quartiles by linear interpolation between order statistics; whiskers at
/// the most extreme points within 1.5*IQR of the quartiles.
BoxplotStats boxplot_stats(std::vector<double> values);

struct RankSumResult {
    double rank_sum_a = 0.0;  // rank sum of the first sample (average ranks for ties)
    double u_a = 0.0;         // Mann-Whitney U of the first sample
    double p_value = 1.0;     // two-sided
    bool exact = false;
};

/// Wilcoxon rank-sum test. Exact by enumeration over all assignments when
/// |a|+|b| <= 20; otherwise normal approximation with tie and continuity
/// corrections. `force_approximation` selects the approximation below the
/// crossover (the exact path then serves as its oracle).
RankSumResult wilcoxon_rank_sum(const std::vector<double>& a, const std::vector<double>& b,
                                bool force_approximation = false);

struct AverageRelevanceBeat {
    std::vector<double> mean_beat;           // raw, pre-normalization
    std::vector<double> mean_relevance;      // raw, pre-normalization
    std::vector<double> relevance_variance;  // per offset, across recordings
    std::int64_t n_recordings = 0;
    int lead = kLeadII;
};

struct BeatTracePair {
    std::vector<double> beat;
    std::vector<double> relevance;
};

/// One recording's per-lead average beat and average relevance trace,
/// using identical segmentation indices; nullopt when peak detection
/// finds nothing.
std::optional<BeatTracePair> recording_beat_traces(const EcgRecording& recording, const Tensor& relevance, int lead,
                                                   int detection_lead = kLeadII);

/// Resamples per-recording traces to the median window length, then takes
/// mean and per-offset variance across recordings.
AverageRelevanceBeat aggregate_beat_traces(const std::vector<BeatTracePair>& traces, int lead);

/// Per class: segments each recording's chosen lead and its relevance grid
/// with the same R-peak indices, averages the beats per recording,
/// resamples the per-recording traces to the median window length, then
/// takes mean and per-offset variance across recordings. Recordings where
/// detection fails are skipped; throws NoPeaksError if none remain.
AverageRelevanceBeat average_relevance_beats(const std::vector<EcgRecording>& recordings,
                                             const std::vector<RelevanceTensor>& relevances, RhythmClass class_filter,
                                             int lead, int detection_lead = kLeadII);

/// Positive iff c_n is strictly above the class threshold.
bool classify_with_threshold(double c_n, const std::string& abnormality, const Thresholds& thresholds);

/// Scales a trace into [-1,1] by its own max magnitude; zero stays zero.
std::vector<double> normalize_unit(const std::vector<double>& trace);

/// Endpoint-preserving linear resampling of a trace to a target length.
std::vector<double> resample_to_length(const std::vector<double>& trace, std::int64_t target);

}  // namespace relattr
