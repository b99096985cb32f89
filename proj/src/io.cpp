#include "relattr/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "relattr/errors.hpp"

namespace relattr {

namespace {

[[noreturn]] void parse_fail(const std::filesystem::path& path, std::size_t line, const std::string& what) {
    throw ParseError(path.string() + ":" + std::to_string(line) + ": " + what);
}

std::string header_value(const std::string& line, const std::string& key, const std::filesystem::path& path,
                         std::size_t line_no) {
    if (line.rfind(key + ":", 0) != 0) parse_fail(path, line_no, "expected '" + key + ":' header");
    std::string value = line.substr(key.size() + 1);
    const auto start = value.find_first_not_of(" \t");
    return start == std::string::npos ? std::string() : value.substr(start);
}

std::vector<double> parse_row(const std::string& line, std::size_t expected, const std::filesystem::path& path,
                              std::size_t line_no) {
    std::vector<double> row;
    row.reserve(expected);
    const char* p = line.c_str();
    while (true) {
        char* end = nullptr;
        const double v = std::strtod(p, &end);
        if (end == p) parse_fail(path, line_no, "expected a number");
        row.push_back(v);
        p = end;
        while (*p == ' ' || *p == '\t') ++p;
        if (*p == ',') {
            ++p;
            continue;
        }
        if (*p == '\0' || *p == '\r') break;
        parse_fail(path, line_no, "unexpected character in row");
    }
    if (row.size() != expected) {
        parse_fail(path, line_no,
                   "expected " + std::to_string(expected) + " values, found " + std::to_string(row.size()));
    }
    return row;
}

}  // namespace

std::string format_exact(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

EcgRecording read_recording(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open recording: " + path.string());

    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&]() -> std::string& {
        if (!std::getline(in, line)) parse_fail(path, line_no + 1, "unexpected end of file");
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    };

    if (next_line() != "# relattr-recording v1") parse_fail(path, line_no, "missing recording format marker");
    const std::string id = header_value(next_line(), "id", path, line_no);
    if (id.empty()) parse_fail(path, line_no, "empty id");
    const RhythmClass label = rhythm_class_from_name(header_value(next_line(), "label", path, line_no));
    const double rate = std::stod(header_value(next_line(), "sample_rate_hz", path, line_no));
    if (!(rate > 0.0)) parse_fail(path, line_no, "sample rate must be positive");

    const std::string leads = header_value(next_line(), "leads", path, line_no);
    std::vector<std::string> lead_names;
    std::stringstream ss(leads);
    std::string name;
    while (std::getline(ss, name, ',')) lead_names.push_back(name);
    if (lead_names.size() != static_cast<std::size_t>(kRecordingLeads)) {
        parse_fail(path, line_no, "expected 12 leads, found " + std::to_string(lead_names.size()));
    }
    for (std::size_t k = 0; k < lead_names.size(); ++k) {
        if (lead_names[k] != kLeadNames[k]) parse_fail(path, line_no, "unexpected lead name '" + lead_names[k] + "'");
    }

    std::vector<double> data;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto row = parse_row(line, static_cast<std::size_t>(kRecordingLeads), path, line_no);
        for (double v : row) {
            if (!std::isfinite(v)) parse_fail(path, line_no, "non-finite sample value");
        }
        data.insert(data.end(), row.begin(), row.end());
    }
    if (data.empty()) parse_fail(path, line_no, "recording has no samples");

    const auto rows = static_cast<std::int64_t>(data.size()) / kRecordingLeads;
    Tensor grid({rows, kRecordingLeads}, std::move(data));
    return make_recording(id, std::move(grid), rate, label);
}

void write_recording(const EcgRecording& recording, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write recording: " + path.string());
    out << "# relattr-recording v1\n";
    out << "id: " << recording.id << "\n";
    out << "label: " << rhythm_class_name(recording.label) << "\n";
    out << "sample_rate_hz: " << recording.sample_rate_hz << "\n";
    out << "leads: ";
    for (int k = 0; k < kRecordingLeads; ++k) out << (k ? "," : "") << kLeadNames[static_cast<std::size_t>(k)];
    out << "\n";

    char buf[40];
    std::string row;
    for (std::int64_t j = 0; j < recording.samples.dim(0); ++j) {
        row.clear();
        for (std::int64_t k = 0; k < kRecordingLeads; ++k) {
            std::snprintf(buf, sizeof(buf), "%.9g", recording.samples.at(j, k));
            if (k) row += ',';
            row += buf;
        }
        row += '\n';
        out << row;
    }
    if (!out) throw IoError("failed writing recording: " + path.string());
}

void write_relevance(const RelevanceTensor& relevance, const std::filesystem::path& path) {
    if (relevance.values.rank() != 2) throw ShapeError("write_relevance: rank-2 grid expected");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write relevance file: " + path.string());
    out << "# relattr-relevance v1\n";
    out << "recording: " << relevance.recording_id << "\n";
    out << "method: " << relevance.method << "\n";
    out << "class_index: " << relevance.class_index << "\n";
    out << "config: " << (relevance.config_json.empty() ? "{}" : relevance.config_json) << "\n";
    out << "shape: " << relevance.values.dim(0) << " " << relevance.values.dim(1) << "\n";

    const std::int64_t cols = relevance.values.dim(1);
    std::string row;
    for (std::int64_t j = 0; j < relevance.values.dim(0); ++j) {
        row.clear();
        for (std::int64_t k = 0; k < cols; ++k) {
            if (k) row += ',';
            row += format_exact(relevance.values.at(j, k));
        }
        row += '\n';
        out << row;
    }
    if (!out) throw IoError("failed writing relevance file: " + path.string());
}

RelevanceTensor read_relevance(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open relevance file: " + path.string());

    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&]() -> std::string& {
        if (!std::getline(in, line)) parse_fail(path, line_no + 1, "unexpected end of file");
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    };

    if (next_line() != "# relattr-relevance v1") parse_fail(path, line_no, "missing relevance format marker");
    RelevanceTensor rel;
    rel.recording_id = header_value(next_line(), "recording", path, line_no);
    rel.method = header_value(next_line(), "method", path, line_no);
    rel.class_index = std::stoi(header_value(next_line(), "class_index", path, line_no));
    rel.config_json = header_value(next_line(), "config", path, line_no);

    std::int64_t rows = 0, cols = 0;
    {
        const std::string shape = header_value(next_line(), "shape", path, line_no);
        std::stringstream ss(shape);
        if (!(ss >> rows >> cols) || rows <= 0 || cols <= 0) parse_fail(path, line_no, "bad shape header");
    }

    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(rows * cols));
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto row = parse_row(line, static_cast<std::size_t>(cols), path, line_no);
        data.insert(data.end(), row.begin(), row.end());
    }
    if (static_cast<std::int64_t>(data.size()) != rows * cols) {
        throw ShapeError(path.string() + ": shape header declares " + std::to_string(rows) + "x" +
                         std::to_string(cols) + " but file holds " + std::to_string(data.size()) + " values");
    }
    rel.values = Tensor({rows, cols}, std::move(data));
    return rel;
}

int DatasetManifest::count(RhythmClass cls) const {
    return static_cast<int>(std::count_if(entries.begin(), entries.end(),
                                          [cls](const ManifestEntry& e) { return e.label == cls; }));
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path.string());

    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "# relattr-manifest v1") parse_fail(path, line_no, "missing manifest format marker");
    if (!std::getline(in, line)) parse_fail(path, line_no + 1, "missing column header");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "id,path,label") parse_fail(path, line_no, "expected 'id,path,label' header");

    DatasetManifest manifest;
    std::set<std::string> seen;
    const std::filesystem::path base = path.parent_path();
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto c1 = line.find(',');
        const auto c2 = line.rfind(',');
        if (c1 == std::string::npos || c2 == c1) parse_fail(path, line_no, "expected 'id,path,label'");
        ManifestEntry entry;
        entry.id = line.substr(0, c1);
        const std::string rel_path = line.substr(c1 + 1, c2 - c1 - 1);
        try {
            entry.label = rhythm_class_from_name(line.substr(c2 + 1));
        } catch (const ConfigError& e) {
            parse_fail(path, line_no, e.what());
        }
        if (!seen.insert(entry.id).second) parse_fail(path, line_no, "duplicate id '" + entry.id + "'");
        entry.path = std::filesystem::path(rel_path).is_absolute() ? std::filesystem::path(rel_path) : base / rel_path;
        if (!std::filesystem::exists(entry.path)) {
            parse_fail(path, line_no, "referenced file does not exist: " + entry.path.string());
        }
        manifest.entries.push_back(std::move(entry));
    }
    return manifest;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest: " + path.string());
    out << "# relattr-manifest v1\n";
    out << "id,path,label\n";
    for (const ManifestEntry& e : manifest.entries) {
        out << e.id << "," << e.path.generic_string() << "," << rhythm_class_name(e.label) << "\n";
    }
    if (!out) throw IoError("failed writing manifest: " + path.string());
}

std::string RunConfig::to_json() const {
    nlohmann::json j;
    j["model"] = model_path;
    j["methods"] = methods;
    j["class"] = target_class;
    j["threshold_af"] = thresholds.af;
    j["threshold_lbbb"] = thresholds.lbbb;
    j["attribution"] = nlohmann::json::parse(attribution.to_json());
    j["bins"] = bins;
    j["lead"] = lead;
    j["detection_lead"] = detection_lead;
    j["out"] = output_dir;
    return j.dump(1);
}

void write_runconfig(const RunConfig& config, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write run config: " + path.string());
    out << config.to_json() << "\n";
    if (!out) throw IoError("failed writing run config: " + path.string());
}

}  // namespace relattr
