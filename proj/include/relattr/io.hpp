#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "relattr/attribution.hpp"
#include "relattr/signal.hpp"

namespace relattr {

/// Reads a recording interchange file (header lines, then one row of 12
/// comma-separated millivolt values per sample). Resamples/length-fits to
/// 400 Hz x 4096 when the header differs. Parse errors cite the line.
EcgRecording read_recording(const std::filesystem::path& path);

void write_recording(const EcgRecording& recording, const std::filesystem::path& path);

/// Relevance grid persistence; values at 17 significant digits, so
/// read(write(t)) reproduces doubles bit-for-bit.
void write_relevance(const RelevanceTensor& relevance, const std::filesystem::path& path);
RelevanceTensor read_relevance(const std::filesystem::path& path);

struct ManifestEntry {
    std::string id;
    std::filesystem::path path;  // resolved on load; as-given on write
    RhythmClass label = RhythmClass::Normal;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    int count(RhythmClass cls) const;
};

/// Loads and validates a manifest (unique ids, known labels, referenced
/// files exist). Relative paths resolve against the manifest directory.
DatasetManifest load_manifest(const std::filesystem::path& path);

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

struct Thresholds {
    double af = 0.39;
    double lbbb = 0.05;
};

/// Everything needed to reproduce a run; snapshot written next to outputs.
struct RunConfig {
    std::string model_path;
    std::vector<std::string> methods;
    std::string target_class;  // "af" | "lbbb"
    Thresholds thresholds;
    AttributionConfig attribution;
    int bins = 100;
    int lead = kLeadII;
    int detection_lead = kLeadII;
    std::string output_dir;

    std::string to_json() const;
};

void write_runconfig(const RunConfig& config, const std::filesystem::path& path);

/// Formats one double at 17 significant digits (lossless round-trip).
std::string format_exact(double v);

}  // namespace relattr
