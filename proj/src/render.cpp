#include "relattr/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "relattr/errors.hpp"

namespace relattr {

FigureKind figure_kind_from_name(const std::string& name) {
    if (name == "trace-heatmap") return FigureKind::TraceHeatmap;
    if (name == "class-histogram") return FigureKind::ClassHistogram;
    if (name == "recording-boxplots") return FigureKind::RecordingBoxplots;
    if (name == "lead-boxplots") return FigureKind::LeadBoxplots;
    if (name == "beat-average") return FigureKind::BeatAverage;
    throw ConfigError("unknown figure kind: " + name);
}

const char* figure_kind_name(FigureKind kind) {
    switch (kind) {
        case FigureKind::TraceHeatmap: return "trace-heatmap";
        case FigureKind::ClassHistogram: return "class-histogram";
        case FigureKind::RecordingBoxplots: return "recording-boxplots";
        case FigureKind::LeadBoxplots: return "lead-boxplots";
        case FigureKind::BeatAverage: return "beat-average";
    }
    return "?";
}

std::string Rgb::hex() const {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
    return buf;
}

Rgb diverging_color(double t) {
    t = std::clamp(t, -1.0, 1.0);
    const Rgb grey{128, 128, 128};
    const Rgb blue{59, 76, 192};
    const Rgb red{180, 4, 38};
    auto lerp = [](int a, int b, double f) { return static_cast<int>(std::lround(a + (b - a) * f)); };
    if (t < 0.0) {
        const double f = -t;
        return {lerp(grey.r, blue.r, f), lerp(grey.g, blue.g, f), lerp(grey.b, blue.b, f)};
    }
    return {lerp(grey.r, red.r, t), lerp(grey.g, red.g, t), lerp(grey.b, red.b, t)};
}

namespace {

constexpr const char* kClassColorAbnormal = "#c23b22";
constexpr const char* kClassColorNormal = "#2c6fbb";

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

class Svg {
  public:
    Svg(double width, double height) : width_(width), height_(height) {
        buf_ += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(width) + "\" height=\"" + fmt(height) +
                "\" viewBox=\"0 0 " + fmt(width) + " " + fmt(height) + "\">\n";
        buf_ += "<rect x=\"0\" y=\"0\" width=\"" + fmt(width) + "\" height=\"" + fmt(height) + "\" fill=\"white\"/>\n";
    }

    void line(double x1, double y1, double x2, double y2, const std::string& color, double w = 1.0) {
        buf_ += "<line x1=\"" + fmt(x1) + "\" y1=\"" + fmt(y1) + "\" x2=\"" + fmt(x2) + "\" y2=\"" + fmt(y2) +
                "\" stroke=\"" + color + "\" stroke-width=\"" + fmt(w) + "\"/>\n";
    }

    void rect(double x, double y, double w, double h, const std::string& fill, const std::string& stroke = "none",
              double opacity = 1.0) {
        buf_ += "<rect x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" width=\"" + fmt(w) + "\" height=\"" + fmt(h) +
                "\" fill=\"" + fill + "\" stroke=\"" + stroke + "\"";
        if (opacity != 1.0) buf_ += " fill-opacity=\"" + fmt(opacity) + "\"";
        buf_ += "/>\n";
    }

    void circle(double cx, double cy, double r, const std::string& fill) {
        buf_ += "<circle cx=\"" + fmt(cx) + "\" cy=\"" + fmt(cy) + "\" r=\"" + fmt(r) + "\" fill=\"" + fill + "\"/>\n";
    }

    void text(double x, double y, const std::string& s, double size = 11.0, const std::string& anchor = "start",
              const std::string& color = "#222222") {
        buf_ += "<text x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" font-family=\"sans-serif\" font-size=\"" + fmt(size) +
                "\" text-anchor=\"" + anchor + "\" fill=\"" + color + "\">" + s + "</text>\n";
    }

    void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& color, double w = 1.0) {
        buf_ += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"" + fmt(w) + "\" points=\"";
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (i) buf_ += ' ';
            buf_ += fmt(pts[i].first) + "," + fmt(pts[i].second);
        }
        buf_ += "\"/>\n";
    }

    std::string finish() {
        buf_ += "</svg>\n";
        return std::move(buf_);
    }

    double width() const { return width_; }
    double height() const { return height_; }

  private:
    double width_, height_;
    std::string buf_;
};

struct LinearScale {
    double lo = 0.0, hi = 1.0, out_lo = 0.0, out_hi = 1.0;
    double operator()(double v) const {
        if (hi == lo) return 0.5 * (out_lo + out_hi);
        return out_lo + (v - lo) / (hi - lo) * (out_hi - out_lo);
    }
};

void draw_box(Svg& svg, double cx, double half_width, const BoxplotStats& s, const LinearScale& y,
              const std::string& color) {
    svg.line(cx, y(s.whisker_low), cx, y(s.q1), color, 1.0);
    svg.line(cx, y(s.q3), cx, y(s.whisker_high), color, 1.0);
    svg.rect(cx - half_width, y(s.q3), 2.0 * half_width, y(s.q1) - y(s.q3), "none", color);
    svg.line(cx - half_width, y(s.median), cx + half_width, y(s.median), color, 1.6);
    for (double v : s.outliers) svg.circle(cx, y(v), 1.2, color);
}

}  // namespace

std::string render_trace_heatmap(const EcgRecording& recording, const RelevanceTensor& relevance,
                                 const RenderSpec& spec) {
    if (!relevance.values.same_shape(recording.samples)) {
        throw ShapeError("render_trace_heatmap: relevance shape does not match recording");
    }
    const double panel_h = 86.0, pad = 40.0, width = 1220.0;
    const double height = pad + 12.0 * panel_h + 16.0;
    Svg svg(width, height);
    svg.text(pad, 22.0, recording.id + "  [" + rhythm_class_name(recording.label) + "]  method " + relevance.method,
             13.0);

    // global relevance scale when per-lead normalization is off
    double global_max = relevance.values.max_abs();

    for (int k = 0; k < kRecordingLeads; ++k) {
        const double top = pad + k * panel_h;
        double sig_lo = recording.samples.at(0, k), sig_hi = sig_lo;
        double rel_max = 0.0;
        for (std::int64_t j = 0; j < kRecordingSamples; ++j) {
            sig_lo = std::min(sig_lo, recording.samples.at(j, k));
            sig_hi = std::max(sig_hi, recording.samples.at(j, k));
            rel_max = std::max(rel_max, std::abs(relevance.values.at(j, k)));
        }
        if (!spec.per_lead_norm) rel_max = global_max;
        const LinearScale x{0.0, static_cast<double>(kRecordingSamples - 1), pad, width - 10.0};
        const LinearScale y{sig_lo, sig_hi, top + panel_h - 8.0, top + 8.0};

        svg.text(6.0, top + panel_h / 2.0, kLeadNames[static_cast<std::size_t>(k)], 11.0);
        for (std::int64_t j = 0; j < kRecordingSamples; ++j) {
            const double rel = rel_max > 0.0 ? relevance.values.at(j, k) / rel_max : 0.0;
            svg.circle(x(static_cast<double>(j)), y(recording.samples.at(j, k)), 1.0, diverging_color(rel).hex());
        }
    }
    return svg.finish();
}

std::string render_class_histogram(const Histogram& histogram, const std::vector<std::string>& class_names,
                                   const RenderSpec&) {
    if (histogram.counts.size() != class_names.size()) {
        throw ConfigError("render_class_histogram: class name count mismatch");
    }
    const double width = 900.0, height = 420.0, pad = 56.0;
    Svg svg(width, height);

    double max_log = 0.0;
    for (const auto& counts : histogram.counts) {
        for (std::int64_t c : counts) max_log = std::max(max_log, std::log10(static_cast<double>(c) + 1.0));
    }
    const LinearScale x{histogram.edges.front(), histogram.edges.back(), pad, width - 20.0};
    const LinearScale y{0.0, std::max(max_log, 1e-12), height - pad, 24.0};

    const char* colors[] = {kClassColorAbnormal, kClassColorNormal, "#3d9970", "#b8860b"};
    for (std::size_t c = 0; c < histogram.counts.size(); ++c) {
        const auto& counts = histogram.counts[c];
        const std::string color = colors[c % 4];
        for (std::size_t b = 0; b < counts.size(); ++b) {
            const double v = std::log10(static_cast<double>(counts[b]) + 1.0);
            if (counts[b] == 0) continue;
            const double x0 = x(histogram.edges[b]), x1 = x(histogram.edges[b + 1]);
            svg.rect(x0, y(v), x1 - x0, y(0.0) - y(v), color, "none", 0.45);
        }
        svg.text(width - 180.0, 30.0 + 16.0 * static_cast<double>(c), class_names[c], 12.0, "start", color);
    }

    svg.line(pad, y(0.0), width - 20.0, y(0.0), "#222222", 1.0);
    for (int i = 0; i <= 4; ++i) {
        const double v = histogram.edges.front() +
                         (histogram.edges.back() - histogram.edges.front()) * static_cast<double>(i) / 4.0;
        svg.text(x(v), height - pad + 16.0, fmt(v), 10.0, "middle");
    }
    svg.text(width / 2.0, height - 14.0, "relevance score", 11.0, "middle");
    svg.text(16.0, 18.0, "log10(count+1)", 11.0);
    return svg.finish();
}

std::string render_recording_boxplots(const std::vector<RecordingBoxplotRow>& rows, const std::string& class_name,
                                      const RenderSpec&) {
    if (rows.empty()) throw ConfigError("render_recording_boxplots: no rows");
    const double width = 1100.0, height = 460.0, pad = 60.0;
    Svg svg(width, height);

    double lo = rows.front().stats.whisker_low, hi = rows.front().stats.whisker_high;
    for (const auto& r : rows) {
        lo = std::min({lo, r.stats.whisker_low, r.stats.outliers.empty() ? lo : r.stats.outliers.front()});
        hi = std::max({hi, r.stats.whisker_high, r.stats.outliers.empty() ? hi : r.stats.outliers.back()});
    }
    const LinearScale x{0.0, 1.0, pad, width - 30.0};
    const LinearScale y{lo, hi, height - pad, 40.0};

    // bottom axis: sigmoid probability
    svg.line(pad, height - pad, width - 30.0, height - pad, "#222222", 1.0);
    for (int i = 0; i <= 10; ++i) {
        const double c = static_cast<double>(i) / 10.0;
        svg.line(x(c), height - pad, x(c), height - pad + 4.0, "#222222", 1.0);
        svg.text(x(c), height - pad + 16.0, fmt(c), 10.0, "middle");
    }
    svg.text(width / 2.0, height - 16.0, "C_n (sigmoid output)", 11.0, "middle");

    // top axis: the same positions in linear-score units
    svg.line(pad, 40.0, width - 30.0, 40.0, "#222222", 1.0);
    for (const double z : {-4.0, -2.0, 0.0, 2.0, 4.0}) {
        const double c = 1.0 / (1.0 + std::exp(-z));
        svg.line(x(c), 40.0, x(c), 36.0, "#222222", 1.0);
        svg.text(x(c), 30.0, fmt(z), 10.0, "middle");
    }
    svg.text(width / 2.0, 16.0, "linear score", 11.0, "middle");

    for (const auto& r : rows) {
        const std::string color = r.predicted_positive ? kClassColorAbnormal : kClassColorNormal;
        draw_box(svg, x(r.c_n), 3.0, r.stats, y, color);
        if (r.truth_positive && !r.predicted_positive) {
            const double cx = x(r.c_n), cy = y(r.stats.median);
            svg.line(cx - 4.0, cy - 4.0, cx + 4.0, cy + 4.0, "#ff0000", 1.6);
            svg.line(cx - 4.0, cy + 4.0, cx + 4.0, cy - 4.0, "#ff0000", 1.6);
        }
    }
    svg.text(pad, height - 36.0, class_name + " classification, per-recording relevance distribution", 12.0);
    return svg.finish();
}

std::string render_lead_boxplots(const std::vector<LeadBoxplotColumn>& columns, const std::string& class_name,
                                 const RenderSpec&) {
    if (columns.empty()) throw ConfigError("render_lead_boxplots: no columns");
    const double width = 1100.0, height = 440.0, pad = 60.0;
    Svg svg(width, height);

    double lo = 0.0, hi = 0.0;
    for (const auto& c : columns) {
        for (const BoxplotStats* s : {&c.abnormal, &c.normal}) {
            lo = std::min(lo, s->outliers.empty() ? s->whisker_low : std::min(s->whisker_low, s->outliers.front()));
            hi = std::max(hi, s->outliers.empty() ? s->whisker_high : std::max(s->whisker_high, s->outliers.back()));
        }
    }
    const LinearScale y{lo, hi, height - pad, 50.0};
    const double group_w = (width - pad - 30.0) / static_cast<double>(columns.size());

    svg.line(pad, y(0.0), width - 30.0, y(0.0), "#bbbbbb", 0.8);
    for (std::size_t i = 0; i < columns.size(); ++i) {
        const double cx = pad + group_w * (static_cast<double>(i) + 0.5);
        draw_box(svg, cx - group_w * 0.18, group_w * 0.12, columns[i].abnormal, y, kClassColorAbnormal);
        draw_box(svg, cx + group_w * 0.18, group_w * 0.12, columns[i].normal, y, kClassColorNormal);
        svg.text(cx, height - pad + 16.0, columns[i].lead, 10.0, "middle");
        char p[32];
        std::snprintf(p, sizeof(p), "p=%.1e", columns[i].p_value);
        svg.text(cx, 40.0, p, 8.5, "middle");
    }
    svg.text(pad, 20.0, class_name + " vs Normal: per-lead mean relevance M_nk", 12.0);
    svg.text(width - 240.0, 20.0, class_name, 11.0, "start", kClassColorAbnormal);
    svg.text(width - 160.0, 20.0, "Normal", 11.0, "start", kClassColorNormal);
    return svg.finish();
}

namespace {

void beat_panel(Svg& svg, const AverageRelevanceBeat& beat, const std::string& label, double top, double left,
                double panel_w, double panel_h, int upsample, bool variance_panel) {
    const auto n = static_cast<std::int64_t>(beat.mean_beat.size());
    const LinearScale x{0.0, static_cast<double>(n - 1), left, left + panel_w};
    const LinearScale y{-1.1, 1.1, top + panel_h, top};

    const std::vector<double> wave = normalize_unit(beat.mean_beat);

    if (variance_panel) {
        const std::vector<double> var = normalize_unit(beat.relevance_variance);
        std::vector<std::pair<double, double>> pts;
        pts.reserve(var.size());
        for (std::int64_t i = 0; i < n; ++i) pts.emplace_back(x(static_cast<double>(i)), y(var[static_cast<std::size_t>(i)]));
        svg.polyline(pts, "#e08214", 1.4);
    } else {
        const std::vector<double> rel = normalize_unit(beat.mean_relevance);
        // scatter of relevance, upsampled by linear interpolation
        for (std::int64_t i = 0; i < n; ++i) {
            for (int s = 0; s < upsample; ++s) {
                if (i == n - 1 && s > 0) break;
                const double frac = static_cast<double>(s) / static_cast<double>(upsample);
                const auto idx = static_cast<std::size_t>(i);
                const double v = s == 0 ? rel[idx] : rel[idx] + frac * (rel[idx + 1] - rel[idx]);
                svg.circle(x(static_cast<double>(i) + frac), y(v), 1.2, diverging_color(v).hex());
            }
        }
        std::vector<std::pair<double, double>> pts;
        pts.reserve(static_cast<std::size_t>(n));
        for (std::int64_t i = 0; i < n; ++i) pts.emplace_back(x(static_cast<double>(i)), y(wave[static_cast<std::size_t>(i)]));
        svg.polyline(pts, "#111111", 1.2);
    }
    svg.line(left, y(0.0), left + panel_w, y(0.0), "#cccccc", 0.6);
    svg.text(left, top - 6.0, label, 10.5);
}

}  // namespace

std::string render_beat_average(const AverageRelevanceBeat& abnormal, const AverageRelevanceBeat& normal,
                                const std::string& class_name, const std::string& lead_name, const RenderSpec& spec) {
    const double panel_w = 480.0, panel_h = 170.0, pad = 50.0, gap = 60.0;
    const double width = pad * 2 + panel_w * 2 + gap;
    const double height = 70.0 + panel_h * 2 + 60.0;
    Svg svg(width, height);
    svg.text(pad, 24.0, class_name + " classification, lead " + lead_name + ": average beats and relevance", 13.0);

    char counts[96];
    std::snprintf(counts, sizeof(counts), "%s (n=%lld)", class_name.c_str(),
                  static_cast<long long>(abnormal.n_recordings));
    beat_panel(svg, abnormal, counts, 56.0, pad, panel_w, panel_h, spec.upsample, false);
    beat_panel(svg, abnormal, "relevance variance", 56.0, pad + panel_w + gap, panel_w, panel_h, spec.upsample, true);
    std::snprintf(counts, sizeof(counts), "Normal (n=%lld)", static_cast<long long>(normal.n_recordings));
    beat_panel(svg, normal, counts, 56.0 + panel_h + 40.0, pad, panel_w, panel_h, spec.upsample, false);
    beat_panel(svg, normal, "relevance variance", 56.0 + panel_h + 40.0, pad + panel_w + gap, panel_w, panel_h,
               spec.upsample, true);
    return svg.finish();
}

}  // namespace relattr
