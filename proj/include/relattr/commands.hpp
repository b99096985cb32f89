#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "relattr/io.hpp"
#include "relattr/render.hpp"

namespace relattr {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitLoad = 2;
inline constexpr int kExitCompute = 3;
inline constexpr int kExitRender = 4;

struct ClassifyOptions {
    std::filesystem::path manifest;
    std::filesystem::path model;
    std::filesystem::path out;
    Thresholds thresholds;
};

struct AttributeOptions {
    std::filesystem::path manifest;
    std::filesystem::path model;
    std::filesystem::path out;
    std::vector<std::string> methods = {"IG"};
    AttributionConfig attribution;
    std::string target_class = "af";  // selects the class index when the model names classes
};

struct AnalyzeOptions {
    std::filesystem::path manifest;
    std::filesystem::path model;
    std::filesystem::path relevance_dir;
    std::filesystem::path out;
    std::string method = "IG";
    std::string target_class = "af";
    Thresholds thresholds;
    int bins = 100;
    int lead = 6;  // V1
    int detection_lead = kLeadII;
};

struct RenderOptions {
    std::filesystem::path manifest;
    std::filesystem::path model;  // required for recording-boxplots
    std::filesystem::path relevance_dir;
    std::filesystem::path out;
    std::string kind = "trace-heatmap";
    std::string method = "IG";
    std::string target_class = "af";
    std::string recording_id;  // trace-heatmap; defaults to the first entry
    int bins = 100;
    int lead = 6;  // V1
    int detection_lead = kLeadII;
    RenderSpec spec;
};

/// Commands print errors to stderr and return the exit codes above.
int cmd_classify(const ClassifyOptions& options);
int cmd_attribute(const AttributeOptions& options);
int cmd_analyze(const AnalyzeOptions& options);
int cmd_render(const RenderOptions& options);

/// Class index for "af"/"lbbb" in this model (by class_names lookup).
int target_class_index(const Model& model, const std::string& target_class);

/// Relevance file name for one (recording, method, class) triple.
std::string relevance_file_name(const std::string& recording_id, const std::string& method, int class_index);

}  // namespace relattr
