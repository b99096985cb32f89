#include "relattr/commands.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>

#include "relattr/analysis.hpp"
#include "relattr/engine.hpp"
#include "relattr/errors.hpp"
#include "relattr/model_io.hpp"
#include "relattr/parallel.hpp"

namespace relattr {

namespace fs = std::filesystem;

int target_class_index(const Model& model, const std::string& target_class) {
    std::string wanted;
    if (target_class == "af" || target_class == "AF") {
        wanted = "AF";
    } else if (target_class == "lbbb" || target_class == "LBBB") {
        wanted = "LBBB";
    } else {
        throw ConfigError("unknown target class '" + target_class + "' (expected af or lbbb)");
    }
    for (std::size_t i = 0; i < model.class_names.size(); ++i) {
        if (model.class_names[i] == wanted) return static_cast<int>(i);
    }
    if (model.output_dim == 1) return 0;
    throw ConfigError("model does not declare a class named '" + wanted + "'");
}

std::string relevance_file_name(const std::string& recording_id, const std::string& method, int class_index) {
    return recording_id + "__" + method + "__c" + std::to_string(class_index) + ".rel";
}

namespace {

EcgRecording read_recording_checked(const ManifestEntry& entry) {
    try {
        EcgRecording rec = read_recording(entry.path);
        if (rec.id != entry.id) {
            throw ValidationError("recording id '" + rec.id + "' does not match manifest id '" + entry.id + "'");
        }
        return rec;
    } catch (const Error& e) {
        throw IoError("recording '" + entry.id + "': " + e.what());
    }
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

bool is_abnormal(RhythmClass label, const std::string& target_class) {
    return (target_class == "af" && label == RhythmClass::AF) ||
           (target_class == "lbbb" && label == RhythmClass::LBBB);
}

int has_class(const Model& model, const char* name) {
    return std::find(model.class_names.begin(), model.class_names.end(), name) != model.class_names.end();
}

}  // namespace

int cmd_classify(const ClassifyOptions& options) {
    DatasetManifest manifest;
    Model model;
    try {
        manifest = load_manifest(options.manifest);
        model = load_model(options.model);
        fs::create_directories(options.out);
    } catch (const Error& e) {
        std::cerr << "load error: " << e.what() << "\n";
        return kExitLoad;
    }

    struct Row {
        std::vector<double> probabilities;
        std::vector<double> linear_scores;
    };
    std::vector<Row> rows(manifest.entries.size());

    try {
        parallel_for(static_cast<std::int64_t>(manifest.entries.size()), [&](std::int64_t i) {
            const auto idx = static_cast<std::size_t>(i);
            const EcgRecording rec = read_recording_checked(manifest.entries[idx]);
            const ForwardTrace trace = forward(model, rec.samples);
            rows[idx] = {trace.probabilities, trace.linear_scores};
        });
    } catch (const IoError& e) {
        std::cerr << "load error: " << e.what() << "\n";
        return kExitLoad;
    } catch (const Error& e) {
        std::cerr << "compute error: " << e.what() << "\n";
        return kExitCompute;
    }

    try {
        auto out = open_out(options.out / "classify_report.txt");
        out << "# relattr-classify v1\n";
        out << "model: " << model.name << "\n";
        out << "classes:";
        for (std::size_t c = 0; c < static_cast<std::size_t>(model.output_dim); ++c) {
            out << (c ? "," : " ") << (c < model.class_names.size() ? model.class_names[c] : "c" + std::to_string(c));
        }
        out << "\n";
        out << "id,label";
        for (std::size_t c = 0; c < static_cast<std::size_t>(model.output_dim); ++c) out << ",c" << c;
        for (std::size_t c = 0; c < static_cast<std::size_t>(model.output_dim); ++c) out << ",z" << c;
        out << ",pred_af,pred_lbbb\n";

        const bool with_af = has_class(model, "AF"), with_lbbb = has_class(model, "LBBB");
        const int af_idx = with_af ? target_class_index(model, "af") : -1;
        const int lbbb_idx = with_lbbb ? target_class_index(model, "lbbb") : -1;
        for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
            const auto& entry = manifest.entries[i];
            out << entry.id << "," << rhythm_class_name(entry.label);
            for (double p : rows[i].probabilities) out << "," << format_exact(p);
            for (double z : rows[i].linear_scores) out << "," << format_exact(z);
            if (with_af) {
                out << ","
                    << (classify_with_threshold(rows[i].probabilities[static_cast<std::size_t>(af_idx)], "af",
                                                options.thresholds)
                            ? "positive"
                            : "negative");
            } else {
                out << ",-";
            }
            if (with_lbbb) {
                out << ","
                    << (classify_with_threshold(rows[i].probabilities[static_cast<std::size_t>(lbbb_idx)], "lbbb",
                                                options.thresholds)
                            ? "positive"
                            : "negative");
            } else {
                out << ",-";
            }
            out << "\n";
        }

        RunConfig rc;
        rc.model_path = options.model.string();
        rc.thresholds = options.thresholds;
        rc.output_dir = options.out.string();
        write_runconfig(rc, options.out / "runconfig.json");
    } catch (const Error& e) {
        std::cerr << "write error: " << e.what() << "\n";
        return kExitCompute;
    }
    return kExitOk;
}

int cmd_attribute(const AttributeOptions& options) {
    DatasetManifest manifest;
    Model model;
    try {
        manifest = load_manifest(options.manifest);
        model = load_model(options.model);
        fs::create_directories(options.out);
    } catch (const Error& e) {
        std::cerr << "load error: " << e.what() << "\n";
        return kExitLoad;
    }

    struct ReportLine {
        std::string method;
        double reference = 0.0;  // delta_f (IG) or f(x) (LRP)
        double relevance_sum = 0.0;
        double abs_gap = 0.0;
        double rel_gap = 0.0;
        bool completeness = false;
        bool pass = true;
    };
    std::vector<std::vector<ReportLine>> report(manifest.entries.size());

    try {
        std::vector<Method> methods;
        for (const auto& name : options.methods) methods.push_back(method_from_name(name));
        const int class_index = target_class_index(model, options.target_class);

        const bool any_lrp = std::any_of(methods.begin(), methods.end(),
                                         [](Method m) { return m != Method::IntegratedGradients; });
        Model folded;
        if (any_lrp) folded = has_batchnorm(model) ? fold_batchnorm(model) : model;

        std::mutex write_mutex;
        parallel_for(static_cast<std::int64_t>(manifest.entries.size()), [&](std::int64_t i) {
            const auto idx = static_cast<std::size_t>(i);
            const EcgRecording rec = read_recording_checked(manifest.entries[idx]);
            for (Method m : methods) {
                AttributionConfig config = options.attribution;
                config.method = m;
                config.class_index = class_index;

                RelevanceTensor rel;
                ReportLine line;
                line.method = method_name(m);
                if (m == Method::IntegratedGradients) {
                    rel = integrated_gradients(model, rec.samples, config);
                    const CompletenessReport cr = check_completeness(model, rec.samples, rel, config);
                    line.reference = cr.delta_f;
                    line.relevance_sum = cr.relevance_sum;
                    line.abs_gap = cr.abs_gap;
                    line.rel_gap = cr.rel_gap;
                    line.completeness = true;
                    line.pass = cr.pass;
                } else {
                    LrpResult lr = lrp(folded, rec.samples, config);
                    const ForwardTrace trace = forward(folded, rec.samples);
                    const ConservationReport cr = check_conservation(trace, lr);
                    line.reference = cr.initial_relevance;
                    line.relevance_sum = cr.input_sum;
                    line.abs_gap = std::abs(cr.total_leak);
                    line.rel_gap = cr.rel_leak;
                    rel = std::move(lr.relevance);
                }
                rel.recording_id = rec.id;
                report[idx].push_back(line);

                const fs::path path = options.out / relevance_file_name(rec.id, method_name(m), class_index);
                std::lock_guard<std::mutex> lock(write_mutex);
                write_relevance(rel, path);
            }
        });

        auto out = open_out(options.out / "attribution_report.txt");
        out << "# relattr-attribution v1\n";
        out << "model: " << model.name << "\n";
        out << "class_index: " << class_index << "\n";
        out << "id,method,check,relevance_sum,reference,abs_gap,rel_gap,pass\n";
        for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
            for (const ReportLine& line : report[i]) {
                out << manifest.entries[i].id << "," << line.method << ","
                    << (line.completeness ? "completeness" : "conservation") << ","
                    << format_exact(line.relevance_sum) << "," << format_exact(line.reference) << ","
                    << format_exact(line.abs_gap) << "," << format_exact(line.rel_gap) << ","
                    << (line.completeness ? (line.pass ? "1" : "0") : "-") << "\n";
            }
        }

        RunConfig rc;
        rc.model_path = options.model.string();
        rc.methods = options.methods;
        rc.target_class = options.target_class;
        rc.attribution = options.attribution;
        rc.attribution.class_index = class_index;
        rc.output_dir = options.out.string();
        write_runconfig(rc, options.out / "runconfig.json");
    } catch (const IoError& e) {
        std::cerr << "load error: " << e.what() << "\n";
        return kExitLoad;
    } catch (const Error& e) {
        std::cerr << "compute error: " << e.what() << "\n";
        return kExitCompute;
    }
    return kExitOk;
}

int cmd_analyze(const AnalyzeOptions& options) {
    DatasetManifest manifest;
    Model model;
    try {
        manifest = load_manifest(options.manifest);
        model = load_model(options.model);
        fs::create_directories(options.out);
    } catch (const Error& e) {
        std::cerr << "load error: " << e.what() << "\n";
        return kExitLoad;
    }

    struct PerRecording {
        double c_n = 0.0;
        double linear = 0.0;
        double m_n = 0.0;
        std::vector<double> m_lead;
        double min_rel = 0.0, max_rel = 0.0;
        bool in_comparison = false;  // abnormal-or-normal for the target class
        bool abnormal = false;
        std::optional<BeatTracePair> traces;
        std::vector<std::int64_t> bin_counts;
    };
    std::vector<PerRecording> rows(manifest.entries.size());

    try {
        const int class_index = target_class_index(model, options.target_class);
        const std::string method = method_name(method_from_name(options.method));
        auto rel_path = [&](const ManifestEntry& entry) {
            return options.relevance_dir / relevance_file_name(entry.id, method, class_index);
        };
        for (const auto& entry : manifest.entries) {
            if (!fs::exists(rel_path(entry))) {
                throw IoError("missing relevance file for '" + entry.id + "': " + rel_path(entry).string());
            }
        }

        // pass 1: per-recording scores, means, beat traces, relevance range
        parallel_for(static_cast<std::int64_t>(manifest.entries.size()), [&](std::int64_t i) {
            const auto idx = static_cast<std::size_t>(i);
            const auto& entry = manifest.entries[idx];
            const EcgRecording rec = read_recording_checked(entry);
            const RelevanceTensor rel = read_relevance(rel_path(entry));
            if (rel.recording_id != entry.id) {
                throw ValidationError("relevance file for '" + entry.id + "' carries id '" + rel.recording_id + "'");
            }

            PerRecording& row = rows[idx];
            const ForwardTrace trace = forward(model, rec.samples);
            row.c_n = trace.probabilities[static_cast<std::size_t>(class_index)];
            row.linear = trace.linear_scores[static_cast<std::size_t>(class_index)];
            row.m_n = mean_recording(rel.values);
            row.m_lead = mean_lead(rel.values);
            row.abnormal = is_abnormal(entry.label, options.target_class);
            row.in_comparison = row.abnormal || entry.label == RhythmClass::Normal;
            row.min_rel = rel.values[0];
            row.max_rel = rel.values[0];
            for (std::int64_t v = 0; v < rel.values.numel(); ++v) {
                row.min_rel = std::min(row.min_rel, rel.values[v]);
                row.max_rel = std::max(row.max_rel, rel.values[v]);
            }
            if (row.in_comparison) row.traces = recording_beat_traces(rec, rel.values, options.lead, options.detection_lead);
        });

        // shared histogram edges over both compared classes
        double lo = 0.0, hi = 0.0;
        bool first = true;
        for (const auto& row : rows) {
            if (!row.in_comparison) continue;
            lo = first ? row.min_rel : std::min(lo, row.min_rel);
            hi = first ? row.max_rel : std::max(hi, row.max_rel);
            first = false;
        }
        if (first) throw ComputeError("analyze: no recordings match the target/normal classes");
        Histogram hist;
        hist.edges = histogram_edges(lo, hi, options.bins);
        hist.counts.assign(2, std::vector<std::int64_t>(static_cast<std::size_t>(options.bins), 0));

        // pass 2: bin counts (re-reads relevance files, integer merge)
        parallel_for(static_cast<std::int64_t>(manifest.entries.size()), [&](std::int64_t i) {
            const auto idx = static_cast<std::size_t>(i);
            if (!rows[idx].in_comparison) return;
            const RelevanceTensor rel = read_relevance(rel_path(manifest.entries[idx]));
            auto& counts = rows[idx].bin_counts;
            counts.assign(static_cast<std::size_t>(options.bins), 0);
            for (std::int64_t v = 0; v < rel.values.numel(); ++v) {
                counts[static_cast<std::size_t>(histogram_bin_index(hist.edges, rel.values[v]))]++;
            }
        });
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (!rows[i].in_comparison) continue;
            auto& target = hist.counts[rows[i].abnormal ? 0 : 1];
            for (std::size_t b = 0; b < target.size(); ++b) target[b] += rows[i].bin_counts[b];
        }

        // per-lead rank-sum tests
        struct LeadRow {
            BoxplotStats abnormal, normal;
            double p = 1.0;
        };
        std::vector<LeadRow> leads(kRecordingLeads);
        for (int k = 0; k < kRecordingLeads; ++k) {
            std::vector<double> ab, no;
            for (const auto& row : rows) {
                if (!row.in_comparison) continue;
                (row.abnormal ? ab : no).push_back(row.m_lead[static_cast<std::size_t>(k)]);
            }
            if (ab.empty() || no.empty()) throw ComputeError("analyze: a comparison class is empty");
            auto& lr = leads[static_cast<std::size_t>(k)];
            lr.abnormal = boxplot_stats(ab);
            lr.normal = boxplot_stats(no);
            lr.p = wilcoxon_rank_sum(ab, no).p_value;
        }

        // beat averages per class
        std::vector<BeatTracePair> ab_traces, no_traces;
        for (auto& row : rows) {
            if (!row.in_comparison || !row.traces) continue;
            (row.abnormal ? ab_traces : no_traces).push_back(std::move(*row.traces));
        }
        const AverageRelevanceBeat ab_beat = aggregate_beat_traces(ab_traces, options.lead);
        const AverageRelevanceBeat no_beat = aggregate_beat_traces(no_traces, options.lead);

        // report
        auto out = open_out(options.out / "analysis_report.txt");
        out << "# relattr-analysis v1\n";
        out << "model: " << model.name << "\n";
        out << "method: " << method << "\n";
        out << "class: " << options.target_class << "\n";
        out << "class_index: " << class_index << "\n";
        out << "bins: " << options.bins << "\n";
        out << "lead: " << kLeadNames[static_cast<std::size_t>(options.lead)] << "\n";

        out << "[recordings]\n";
        out << "id,label,c_n,linear,m_n";
        for (int k = 0; k < kRecordingLeads; ++k) out << ",m_" << k;
        out << ",predicted\n";
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto& entry = manifest.entries[i];
            const auto& row = rows[i];
            out << entry.id << "," << rhythm_class_name(entry.label) << "," << format_exact(row.c_n) << ","
                << format_exact(row.linear) << "," << format_exact(row.m_n);
            for (double m : row.m_lead) out << "," << format_exact(m);
            out << ","
                << (classify_with_threshold(row.c_n, options.target_class, options.thresholds) ? "positive"
                                                                                               : "negative")
                << "\n";
        }

        out << "[leads]\n";
        out << "lead,median_abnormal,median_normal,q1_abnormal,q3_abnormal,q1_normal,q3_normal,p_value\n";
        for (int k = 0; k < kRecordingLeads; ++k) {
            const auto& lr = leads[static_cast<std::size_t>(k)];
            out << kLeadNames[static_cast<std::size_t>(k)] << "," << format_exact(lr.abnormal.median) << ","
                << format_exact(lr.normal.median) << "," << format_exact(lr.abnormal.q1) << ","
                << format_exact(lr.abnormal.q3) << "," << format_exact(lr.normal.q1) << ","
                << format_exact(lr.normal.q3) << "," << format_exact(lr.p) << "\n";
        }

        out << "[histogram]\n";
        out << "bin_lo,bin_hi,count_abnormal,count_normal\n";
        for (int b = 0; b < options.bins; ++b) {
            const auto bi = static_cast<std::size_t>(b);
            out << format_exact(hist.edges[bi]) << "," << format_exact(hist.edges[bi + 1]) << ","
                << hist.counts[0][bi] << "," << hist.counts[1][bi] << "\n";
        }

        auto write_beat = [&](const char* name, const AverageRelevanceBeat& beat) {
            out << "[" << name << "]\n";
            out << "n: " << beat.n_recordings << "\n";
            out << "offset,beat,relevance,variance,beat_norm,relevance_norm\n";
            const auto beat_n = normalize_unit(beat.mean_beat);
            const auto rel_n = normalize_unit(beat.mean_relevance);
            for (std::size_t o = 0; o < beat.mean_beat.size(); ++o) {
                out << o << "," << format_exact(beat.mean_beat[o]) << "," << format_exact(beat.mean_relevance[o])
                    << "," << format_exact(beat.relevance_variance[o]) << "," << format_exact(beat_n[o]) << ","
                    << format_exact(rel_n[o]) << "\n";
            }
        };
        write_beat("beat_average_abnormal", ab_beat);
        write_beat("beat_average_normal", no_beat);

        RunConfig rc;
        rc.model_path = options.model.string();
        rc.methods = {options.method};
        rc.target_class = options.target_class;
        rc.thresholds = options.thresholds;
        rc.bins = options.bins;
        rc.lead = options.lead;
        rc.detection_lead = options.detection_lead;
        rc.output_dir = options.out.string();
        write_runconfig(rc, options.out / "runconfig.json");
    } catch (const IoError& e) {
        std::cerr << "load error: " << e.what() << "\n";
        return kExitLoad;
    } catch (const Error& e) {
        std::cerr << "compute error: " << e.what() << "\n";
        return kExitCompute;
    }
    return kExitOk;
}

int cmd_render(const RenderOptions& options) {
    DatasetManifest manifest;
    Model model;
    FigureKind kind;
    const bool needs_model = options.kind == "recording-boxplots";
    try {
        kind = figure_kind_from_name(options.kind);
        manifest = load_manifest(options.manifest);
        if (needs_model) model = load_model(options.model);
        fs::create_directories(options.out);
    } catch (const Error& e) {
        std::cerr << "load error: " << e.what() << "\n";
        return kExitLoad;
    }

    try {
        RenderSpec spec = options.spec;
        spec.kind = kind;
        spec.method = method_name(method_from_name(options.method));
        // relevance files are named with the class index they were computed
        // for; discover it from any produced file of this method
        auto find_class_index = [&]() -> int {
            for (const auto& entry : manifest.entries) {
                for (int c = 0; c < 8; ++c) {
                    if (fs::exists(options.relevance_dir / relevance_file_name(entry.id, spec.method, c))) return c;
                }
            }
            throw IoError("no relevance files for method " + spec.method + " in " + options.relevance_dir.string());
        };
        const int class_index = find_class_index();
        auto rel_path = [&](const ManifestEntry& entry) {
            return options.relevance_dir / relevance_file_name(entry.id, spec.method, class_index);
        };
        auto entry_by_id = [&](const std::string& id) -> const ManifestEntry& {
            for (const auto& entry : manifest.entries) {
                if (entry.id == id) return entry;
            }
            throw IoError("recording id '" + id + "' not in manifest");
        };
        const std::string class_label = options.target_class == "af" ? "AF" : "LBBB";

        std::string svg;
        switch (kind) {
            case FigureKind::TraceHeatmap: {
                const ManifestEntry& entry =
                    options.recording_id.empty() ? manifest.entries.at(0) : entry_by_id(options.recording_id);
                const EcgRecording rec = read_recording_checked(entry);
                const RelevanceTensor rel = read_relevance(rel_path(entry));
                svg = render_trace_heatmap(rec, rel, spec);
                break;
            }
            case FigureKind::ClassHistogram: {
                double lo = 0.0, hi = 0.0;
                bool first = true;
                std::vector<const ManifestEntry*> compared;
                for (const auto& entry : manifest.entries) {
                    if (!is_abnormal(entry.label, options.target_class) && entry.label != RhythmClass::Normal) continue;
                    compared.push_back(&entry);
                    const RelevanceTensor rel = read_relevance(rel_path(entry));
                    for (std::int64_t v = 0; v < rel.values.numel(); ++v) {
                        lo = first ? rel.values[v] : std::min(lo, rel.values[v]);
                        hi = first ? rel.values[v] : std::max(hi, rel.values[v]);
                        first = false;
                    }
                }
                if (first) throw ComputeError("render: no recordings to compare");
                Histogram hist;
                hist.edges = histogram_edges(lo, hi, options.bins);
                hist.counts.assign(2, std::vector<std::int64_t>(static_cast<std::size_t>(options.bins), 0));
                for (const ManifestEntry* entry : compared) {
                    const RelevanceTensor rel = read_relevance(rel_path(*entry));
                    auto& counts = hist.counts[is_abnormal(entry->label, options.target_class) ? 0 : 1];
                    for (std::int64_t v = 0; v < rel.values.numel(); ++v) {
                        counts[static_cast<std::size_t>(histogram_bin_index(hist.edges, rel.values[v]))]++;
                    }
                }
                svg = render_class_histogram(hist, {class_label, "Normal"}, spec);
                break;
            }
            case FigureKind::RecordingBoxplots: {
                std::vector<RecordingBoxplotRow> brows;
                for (const auto& entry : manifest.entries) {
                    if (!is_abnormal(entry.label, options.target_class) && entry.label != RhythmClass::Normal) continue;
                    const EcgRecording rec = read_recording_checked(entry);
                    const RelevanceTensor rel = read_relevance(rel_path(entry));
                    const ForwardTrace trace = forward(model, rec.samples);
                    RecordingBoxplotRow row;
                    row.id = entry.id;
                    row.c_n = trace.probabilities[static_cast<std::size_t>(class_index)];
                    row.linear_score = trace.linear_scores[static_cast<std::size_t>(class_index)];
                    row.stats = boxplot_stats(rel.values.values());
                    row.truth_positive = is_abnormal(entry.label, options.target_class);
                    row.predicted_positive = classify_with_threshold(row.c_n, options.target_class, Thresholds{});
                    brows.push_back(std::move(row));
                }
                svg = render_recording_boxplots(brows, class_label, spec);
                break;
            }
            case FigureKind::LeadBoxplots: {
                std::vector<std::vector<double>> ab(static_cast<std::size_t>(kRecordingLeads)),
                    no(static_cast<std::size_t>(kRecordingLeads));
                for (const auto& entry : manifest.entries) {
                    const bool abnormal = is_abnormal(entry.label, options.target_class);
                    if (!abnormal && entry.label != RhythmClass::Normal) continue;
                    const RelevanceTensor rel = read_relevance(rel_path(entry));
                    const auto means = mean_lead(rel.values);
                    for (int k = 0; k < kRecordingLeads; ++k) {
                        (abnormal ? ab : no)[static_cast<std::size_t>(k)].push_back(means[static_cast<std::size_t>(k)]);
                    }
                }
                std::vector<LeadBoxplotColumn> columns;
                for (int k = 0; k < kRecordingLeads; ++k) {
                    const auto ki = static_cast<std::size_t>(k);
                    if (ab[ki].empty() || no[ki].empty()) throw ComputeError("render: a comparison class is empty");
                    LeadBoxplotColumn col;
                    col.lead = kLeadNames[ki];
                    col.abnormal = boxplot_stats(ab[ki]);
                    col.normal = boxplot_stats(no[ki]);
                    col.p_value = wilcoxon_rank_sum(ab[ki], no[ki]).p_value;
                    columns.push_back(std::move(col));
                }
                svg = render_lead_boxplots(columns, class_label, spec);
                break;
            }
            case FigureKind::BeatAverage: {
                std::vector<BeatTracePair> ab_traces, no_traces;
                for (const auto& entry : manifest.entries) {
                    const bool abnormal = is_abnormal(entry.label, options.target_class);
                    if (!abnormal && entry.label != RhythmClass::Normal) continue;
                    const EcgRecording rec = read_recording_checked(entry);
                    const RelevanceTensor rel = read_relevance(rel_path(entry));
                    auto pair = recording_beat_traces(rec, rel.values, options.lead, options.detection_lead);
                    if (pair) (abnormal ? ab_traces : no_traces).push_back(std::move(*pair));
                }
                svg = render_beat_average(aggregate_beat_traces(ab_traces, options.lead),
                                          aggregate_beat_traces(no_traces, options.lead), class_label,
                                          kLeadNames[static_cast<std::size_t>(options.lead)], spec);
                break;
            }
        }

        auto out = open_out(options.out / (options.kind + ".svg"));
        out << svg;
        if (!out) throw IoError("failed writing SVG");

        RunConfig rc;
        rc.model_path = options.model.string();
        rc.methods = {options.method};
        rc.target_class = options.target_class;
        rc.bins = options.bins;
        rc.lead = options.lead;
        rc.detection_lead = options.detection_lead;
        rc.output_dir = options.out.string();
        write_runconfig(rc, options.out / ("runconfig_render_" + options.kind + ".json"));
    } catch (const Error& e) {
        std::cerr << "render error: " << e.what() << "\n";
        return kExitRender;
    }
    return kExitOk;
}

}  // namespace relattr
