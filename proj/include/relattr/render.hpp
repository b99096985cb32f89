#pragma once

#include <string>
#include <vector>

#include "relattr/analysis.hpp"
#include "relattr/attribution.hpp"
#include "relattr/signal.hpp"

namespace relattr {

enum class FigureKind { TraceHeatmap, ClassHistogram, RecordingBoxplots, LeadBoxplots, BeatAverage };

FigureKind figure_kind_from_name(const std::string& name);
const char* figure_kind_name(FigureKind kind);

struct RenderSpec {
    FigureKind kind = FigureKind::TraceHeatmap;
    int upsample = 5;          // scatter interpolation factor, rendering only
    bool per_lead_norm = true;  // normalize relevance to [-1,1] per lead
    std::string method = "IG";
};

struct Rgb {
    int r = 0, g = 0, b = 0;
    std::string hex() const;
};

/// Diverging blue -> grey -> red map on [-1,1]; exactly grey at 0 and
/// symmetric around it.
Rgb diverging_color(double t);

/// All 12 leads of one recording with relevance-colored sample markers.
std::string render_trace_heatmap(const EcgRecording& recording, const RelevanceTensor& relevance,
                                 const RenderSpec& spec);

std::string render_class_histogram(const Histogram& histogram, const std::vector<std::string>& class_names,
                                   const RenderSpec& spec);

struct RecordingBoxplotRow {
    std::string id;
    double c_n = 0.0;
    double linear_score = 0.0;
    BoxplotStats stats;
    bool predicted_positive = false;
    bool truth_positive = false;
};

/// One relevance-distribution boxplot per recording at x = C_n; sigmoid
/// axis below, linear-score axis above, false negatives crossed in red.
std::string render_recording_boxplots(const std::vector<RecordingBoxplotRow>& rows, const std::string& class_name,
                                      const RenderSpec& spec);

struct LeadBoxplotColumn {
    std::string lead;
    BoxplotStats abnormal;
    BoxplotStats normal;
    double p_value = 1.0;
};

std::string render_lead_boxplots(const std::vector<LeadBoxplotColumn>& columns, const std::string& class_name,
                                 const RenderSpec& spec);

/// Average beat with relevance scatter (left) and cross-recording
/// relevance variance (right), one row per class.
std::string render_beat_average(const AverageRelevanceBeat& abnormal, const AverageRelevanceBeat& normal,
                                const std::string& class_name, const std::string& lead_name, const RenderSpec& spec);

}  // namespace relattr
