#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "relattr/analysis.hpp"
#include "relattr/commands.hpp"
#include "relattr/engine.hpp"
#include "relattr/errors.hpp"
#include "relattr/fixtures.hpp"
#include "relattr/io.hpp"
#include "relattr/model_io.hpp"
#include "relattr/render.hpp"
#include "relattr/rng.hpp"

using namespace relattr;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "relattr_io_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::uint64_t bit_checksum(const Tensor& t) {
    std::uint64_t acc = 1469598103934665603ULL;
    for (std::int64_t i = 0; i < t.numel(); ++i) {
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(double));
        std::memcpy(&bits, &t.values()[static_cast<std::size_t>(i)], sizeof(bits));
        acc = (acc ^ bits) * 1099511628211ULL;
    }
    return acc;
}

RelevanceTensor random_relevance(const std::string& id, std::int64_t rows, std::int64_t cols, std::uint64_t seed) {
    Rng rng(seed);
    RelevanceTensor rel;
    rel.values = Tensor({rows, cols});
    for (std::int64_t i = 0; i < rel.values.numel(); ++i) rel.values[i] = rng.normal(0.0, 1.0) * 1e-3;
    rel.method = "IG";
    rel.class_index = 4;
    rel.recording_id = id;
    rel.config_json = AttributionConfig{}.to_json();
    return rel;
}

}  // namespace

TEST_CASE("recording write/read round trip") {
    const fs::path dir = fresh_dir("rec_roundtrip");
    SynthConfig config;
    config.noise_mv = 0.02;
    config.seed = 9;
    config.mode = RhythmClass::AF;
    EcgRecording rec = synth_ecg(config).recording;
    rec.id = "rt-1";
    write_recording(rec, dir / "r.ecg");

    const EcgRecording back = read_recording(dir / "r.ecg");
    CHECK(back.id == "rt-1");
    CHECK(back.label == RhythmClass::AF);
    CHECK(back.sample_rate_hz == kRecordingRateHz);
    REQUIRE(back.samples.shape() == rec.samples.shape());
    for (std::int64_t i = 0; i < rec.samples.numel(); ++i) {
        CHECK(back.samples[i] == doctest::Approx(rec.samples[i]).epsilon(1e-7));
    }
}

TEST_CASE("reading a 500 Hz file resamples and length-fits to 400 Hz x 4096") {
    const fs::path dir = fresh_dir("rec_500hz");
    {
        std::ofstream out(dir / "r.ecg");
        out << "# relattr-recording v1\n";
        out << "id: hz500\nlabel: Normal\nsample_rate_hz: 500\n";
        out << "leads: I,II,III,aVR,aVL,aVF,V1,V2,V3,V4,V5,V6\n";
        for (int j = 0; j < 5000; ++j) {
            for (int k = 0; k < 12; ++k) out << (k ? "," : "") << 0.001 * j;
            out << "\n";
        }
    }
    const EcgRecording rec = read_recording(dir / "r.ecg");
    CHECK(rec.samples.dim(0) == 4096);
    CHECK(rec.sample_rate_hz == 400.0);
}

TEST_CASE("row with 11 columns is a parse error citing the line") {
    const fs::path dir = fresh_dir("rec_badrow");
    {
        std::ofstream out(dir / "r.ecg");
        out << "# relattr-recording v1\n";
        out << "id: bad\nlabel: Normal\nsample_rate_hz: 400\n";
        out << "leads: I,II,III,aVR,aVL,aVF,V1,V2,V3,V4,V5,V6\n";
        out << "0,0,0,0,0,0,0,0,0,0,0,0\n";
        out << "0,0,0,0,0,0,0,0,0,0,0\n";  // line 7: 11 values
    }
    CHECK_THROWS_WITH_AS(read_recording(dir / "r.ecg"), doctest::Contains(":7"), ParseError);
}

TEST_CASE("non-finite sample values are rejected") {
    const fs::path dir = fresh_dir("rec_nan");
    {
        std::ofstream out(dir / "r.ecg");
        out << "# relattr-recording v1\n";
        out << "id: nan\nlabel: Normal\nsample_rate_hz: 400\n";
        out << "leads: I,II,III,aVR,aVL,aVF,V1,V2,V3,V4,V5,V6\n";
        out << "0,0,0,nan,0,0,0,0,0,0,0,0\n";
    }
    CHECK_THROWS_AS(read_recording(dir / "r.ecg"), ParseError);
}

TEST_CASE("relevance persistence is bit-for-bit lossless") {
    const fs::path dir = fresh_dir("rel_roundtrip");
    const RelevanceTensor rel = random_relevance("rt-2", 64, 12, 21);
    write_relevance(rel, dir / "t.rel");
    const RelevanceTensor back = read_relevance(dir / "t.rel");
    CHECK(back.values.values() == rel.values.values());
    CHECK(back.method == rel.method);
    CHECK(back.class_index == rel.class_index);
    CHECK(back.recording_id == rel.recording_id);
    CHECK(back.config_json == rel.config_json);
}

TEST_CASE("a 600-tensor batch round-trips with equal checksums") {
    const fs::path dir = fresh_dir("rel_batch");
    std::uint64_t before = 0, after = 0;
    for (int i = 0; i < 600; ++i) {
        const RelevanceTensor rel = random_relevance("b" + std::to_string(i), 64, 12, 1000 + i);
        before ^= bit_checksum(rel.values);
        const fs::path path = dir / (std::to_string(i) + ".rel");
        write_relevance(rel, path);
        after ^= bit_checksum(read_relevance(path).values);
    }
    CHECK(before == after);
}

TEST_CASE("tampered relevance shape header is rejected") {
    const fs::path dir = fresh_dir("rel_tamper");
    write_relevance(random_relevance("t", 8, 12, 3), dir / "t.rel");
    std::string content = slurp(dir / "t.rel");
    const auto pos = content.find("shape: 8 12");
    REQUIRE(pos != std::string::npos);
    content.replace(pos, 11, "shape: 9 12");
    {
        std::ofstream out(dir / "t.rel", std::ios::binary);
        out << content;
    }
    CHECK_THROWS_AS(read_relevance(dir / "t.rel"), ShapeError);
}

TEST_CASE("manifest load validates ids, labels and file existence") {
    const fs::path dir = fresh_dir("manifest");
    {
        std::ofstream out(dir / "a.ecg");
        out << "stub";
    }
    {
        std::ofstream out(dir / "manifest.csv");
        out << "# relattr-manifest v1\nid,path,label\n";
        out << "a,a.ecg,Normal\n";
        out << "a,a.ecg,AF\n";
    }
    CHECK_THROWS_WITH_AS(load_manifest(dir / "manifest.csv"), doctest::Contains("duplicate id 'a'"), ParseError);

    {
        std::ofstream out(dir / "manifest.csv");
        out << "# relattr-manifest v1\nid,path,label\n";
        out << "a,missing.ecg,Normal\n";
    }
    CHECK_THROWS_AS(load_manifest(dir / "manifest.csv"), ParseError);

    {
        std::ofstream out(dir / "manifest.csv");
        out << "# relattr-manifest v1\nid,path,label\n";
        out << "a,a.ecg,Strange\n";
    }
    CHECK_THROWS_AS(load_manifest(dir / "manifest.csv"), ParseError);

    {
        std::ofstream out(dir / "manifest.csv");
        out << "# relattr-manifest v1\nid,path,label\n";
    }
    const DatasetManifest empty = load_manifest(dir / "manifest.csv");
    CHECK(empty.entries.empty());
    CHECK(empty.count(RhythmClass::Normal) == 0);
}

TEST_CASE("synthetic dataset generation is deterministic and balanced") {
    const fs::path dir_a = fresh_dir("dataset_a");
    const fs::path dir_b = fresh_dir("dataset_b");
    const fs::path ma = write_synth_dataset(dir_a, 2, 31);
    const fs::path mb = write_synth_dataset(dir_b, 2, 31);

    const DatasetManifest manifest = load_manifest(ma);
    CHECK(manifest.entries.size() == 6);
    CHECK(manifest.count(RhythmClass::Normal) == 2);
    CHECK(manifest.count(RhythmClass::AF) == 2);
    CHECK(manifest.count(RhythmClass::LBBB) == 2);

    CHECK(slurp(ma) == slurp(mb));
    CHECK(slurp(manifest.entries[0].path) == slurp(load_manifest(mb).entries[0].path));
}

TEST_CASE("diverging colormap is grey at zero and symmetric around it") {
    CHECK(diverging_color(0.0).hex() == "#808080");
    for (double t : {0.25, 0.5, 1.0}) {
        const Rgb pos = diverging_color(t);
        const Rgb neg = diverging_color(-t);
        // equal distance from grey toward the respective pole
        CHECK(pos.r - 128 == doctest::Approx((180 - 128) * t).epsilon(0.02));
        CHECK(128 - neg.r == doctest::Approx((128 - 59) * t).epsilon(0.02));
    }
    CHECK(diverging_color(5.0).hex() == diverging_color(1.0).hex());
    CHECK(diverging_color(-5.0).hex() == diverging_color(-1.0).hex());
}

TEST_CASE("zero relevance renders every trace marker neutral grey") {
    SynthConfig config;
    config.seed = 50;
    EcgRecording rec = synth_ecg(config).recording;
    rec.id = "grey";
    RelevanceTensor rel;
    rel.values = Tensor({kRecordingSamples, kRecordingLeads});
    rel.recording_id = "grey";
    rel.method = "IG";

    RenderSpec spec;
    const std::string svg = render_trace_heatmap(rec, rel, spec);
    std::size_t circles = 0, grey = 0, pos = 0;
    for (pos = svg.find("<circle"); pos != std::string::npos; pos = svg.find("<circle", pos + 1)) ++circles;
    for (pos = svg.find("#808080"); pos != std::string::npos; pos = svg.find("#808080", pos + 1)) ++grey;
    CHECK(circles == static_cast<std::size_t>(kRecordingSamples * kRecordingLeads));
    CHECK(grey >= circles);
}

TEST_CASE("per-lead normalization maps half the lead maximum to the half-scale color") {
    SynthConfig config;
    config.seed = 51;
    EcgRecording rec = synth_ecg(config).recording;
    rec.id = "norm";
    RelevanceTensor rel;
    rel.values = Tensor({kRecordingSamples, kRecordingLeads});
    rel.values.at(0, 0) = 0.5;   // lead max
    rel.values.at(1, 0) = 0.25;  // half of it -> color position +0.5
    rel.recording_id = "norm";
    rel.method = "IG";

    const std::string svg = render_trace_heatmap(rec, rel, RenderSpec{});
    CHECK(svg.find(diverging_color(1.0).hex()) != std::string::npos);
    CHECK(svg.find(diverging_color(0.5).hex()) != std::string::npos);
}

TEST_CASE("rendering is byte-identical across calls") {
    SynthConfig config;
    config.seed = 52;
    config.noise_mv = 0.01;
    EcgRecording rec = synth_ecg(config).recording;
    rec.id = "det";
    RelevanceTensor rel = random_relevance("det", kRecordingSamples, kRecordingLeads, 99);

    const std::string a = render_trace_heatmap(rec, rel, RenderSpec{});
    const std::string b = render_trace_heatmap(rec, rel, RenderSpec{});
    CHECK(a == b);
}

TEST_CASE("figure kind names round-trip and unknown kinds are rejected") {
    for (const char* name : {"trace-heatmap", "class-histogram", "recording-boxplots", "lead-boxplots",
                             "beat-average"}) {
        CHECK(figure_kind_name(figure_kind_from_name(name)) == std::string(name));
    }
    CHECK_THROWS_AS(figure_kind_from_name("pie-chart"), ConfigError);
}

TEST_CASE("histogram, boxplot and beat figures render with expected annotations") {
    Histogram hist;
    hist.edges = histogram_edges(-1.0, 1.0, 4);
    hist.counts = {{5, 0, 3, 1}, {2, 2, 2, 2}};
    const std::string hist_svg = render_class_histogram(hist, {"AF", "Normal"}, RenderSpec{});
    CHECK(hist_svg.find("AF") != std::string::npos);
    CHECK(hist_svg.find("relevance score") != std::string::npos);

    std::vector<RecordingBoxplotRow> rows(3);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        rows[i].id = "r" + std::to_string(i);
        rows[i].c_n = 0.2 + 0.3 * static_cast<double>(i);
        rows[i].stats = boxplot_stats({-0.1, 0.0, 0.1, 0.2});
        rows[i].truth_positive = i == 0;
        rows[i].predicted_positive = false;
    }
    const std::string box_svg = render_recording_boxplots(rows, "AF", RenderSpec{});
    CHECK(box_svg.find("C_n (sigmoid output)") != std::string::npos);
    CHECK(box_svg.find("linear score") != std::string::npos);

    std::vector<LeadBoxplotColumn> columns(12);
    for (int k = 0; k < 12; ++k) {
        columns[static_cast<std::size_t>(k)].lead = kLeadNames[static_cast<std::size_t>(k)];
        columns[static_cast<std::size_t>(k)].abnormal = boxplot_stats({0.1, 0.2, 0.3});
        columns[static_cast<std::size_t>(k)].normal = boxplot_stats({-0.1, 0.0, 0.1});
        columns[static_cast<std::size_t>(k)].p_value = 0.004;
    }
    const std::string lead_svg = render_lead_boxplots(columns, "AF", RenderSpec{});
    CHECK(lead_svg.find("V1") != std::string::npos);
    CHECK(lead_svg.find("p=4.0e-03") != std::string::npos);

    AverageRelevanceBeat ab, no;
    ab.mean_beat = {0.0, 1.0, 0.0, -0.2};
    ab.mean_relevance = {0.0, 0.4, -0.4, 0.0};
    ab.relevance_variance = {0.0, 0.1, 0.1, 0.0};
    ab.n_recordings = 7;
    no = ab;
    no.n_recordings = 5;
    const std::string beat_svg = render_beat_average(ab, no, "AF", "V1", RenderSpec{});
    CHECK(beat_svg.find("AF (n=7)") != std::string::npos);
    CHECK(beat_svg.find("Normal (n=5)") != std::string::npos);
    CHECK(beat_svg.find("relevance variance") != std::string::npos);
}

TEST_CASE("beat-average figure matches the reviewed golden snapshot byte for byte") {
    AverageRelevanceBeat ab, no;
    ab.mean_beat = {0.0, 0.125, 1.0, -0.25, 0.0, 0.375, 0.0625, 0.0};
    ab.mean_relevance = {0.0, 0.5, 1.0, -0.5, -1.0, 0.25, 0.0, 0.125};
    ab.relevance_variance = {0.0, 0.0625, 0.25, 0.125, 0.0, 0.0, 0.03125, 0.0};
    ab.n_recordings = 3;
    ab.lead = 6;
    no.mean_beat = {0.0, -0.5, 0.75, 1.0, -0.125, 0.0, 0.25, 0.0};
    no.mean_relevance = {0.125, -0.25, -1.0, 0.5, 0.0, 1.0, -0.125, 0.0};
    no.relevance_variance = {0.25, 0.0, 0.125, 0.0625, 0.0, 0.03125, 0.0, 0.0};
    no.n_recordings = 2;
    no.lead = 6;

    const std::string svg = render_beat_average(ab, no, "AF", "V1", RenderSpec{});
    const std::string golden = slurp(fs::path(RELATTR_GOLDEN_DIR) / "beat_average_golden.svg");
    REQUIRE(!golden.empty());
    CHECK(svg == golden);
}

TEST_CASE("cmd_classify writes one row per recording and honors strict thresholds") {
    const fs::path dir = fresh_dir("cmd_classify");
    const fs::path manifest = write_synth_dataset(dir / "data", 1, 60);
    const fs::path model_path = dir / "model.json";
    save_model(make_resnet_mini(), model_path);

    // threshold equal to a recording's own probability -> negative
    const DatasetManifest m = load_manifest(manifest);
    const EcgRecording first = read_recording(m.entries[0].path);
    const Model model = load_model(model_path);
    const double c_af = forward(model, first.samples).probabilities[4];

    ClassifyOptions options;
    options.manifest = manifest;
    options.model = model_path;
    options.out = dir / "out";
    options.thresholds.af = c_af;
    REQUIRE(cmd_classify(options) == kExitOk);

    const std::string report = slurp(dir / "out" / "classify_report.txt");
    std::size_t data_rows = 0;
    std::stringstream ss(report);
    std::string line;
    bool first_row = true;
    while (std::getline(ss, line)) {
        if (line.rfind("rec-", 0) == 0) {
            ++data_rows;
            if (first_row) {
                CHECK(line.find("negative") != std::string::npos);  // == threshold is not positive
                first_row = false;
            }
        }
    }
    CHECK(data_rows == 3);
    CHECK(fs::exists(dir / "out" / "runconfig.json"));
}

TEST_CASE("cmd_classify returns the load exit code for a broken manifest") {
    ClassifyOptions options;
    options.manifest = "/nonexistent/manifest.csv";
    options.model = "/nonexistent/model.json";
    options.out = fresh_dir("cmd_classify_bad");
    CHECK(cmd_classify(options) == kExitLoad);
}

TEST_CASE("cmd_attribute on an empty manifest succeeds with zero relevance files") {
    const fs::path dir = fresh_dir("cmd_attr_empty");
    {
        std::ofstream out(dir / "manifest.csv");
        out << "# relattr-manifest v1\nid,path,label\n";
    }
    const fs::path model_path = dir / "model.json";
    save_model(make_resnet_mini(), model_path);

    AttributeOptions options;
    options.manifest = dir / "manifest.csv";
    options.model = model_path;
    options.out = dir / "out";
    REQUIRE(cmd_attribute(options) == kExitOk);
    std::size_t rel_files = 0;
    for (const auto& entry : fs::directory_iterator(dir / "out")) {
        if (entry.path().extension() == ".rel") ++rel_files;
    }
    CHECK(rel_files == 0);
}

TEST_CASE("attribute/analyze/render pipeline over a small synthetic set") {
    const fs::path dir = fresh_dir("cmd_pipeline");
    const fs::path manifest = write_synth_dataset(dir / "data", 2, 61);
    const fs::path model_path = dir / "model.json";
    save_model(make_resnet_mini(), model_path);

    AttributeOptions attr;
    attr.manifest = manifest;
    attr.model = model_path;
    attr.out = dir / "rel";
    attr.methods = {"IG", "LRP-eps", "LRP-ab", "LRP-w2", "LRP-composite"};
    attr.target_class = "af";
    attr.attribution.ig_steps = 8;  // keep the test quick
    REQUIRE(cmd_attribute(attr) == kExitOk);

    // one file per recording per method (Fig. 8's five methods)
    std::size_t rel_files = 0;
    for (const auto& entry : fs::directory_iterator(dir / "rel")) {
        if (entry.path().extension() == ".rel") ++rel_files;
    }
    CHECK(rel_files == 6 * 5);

    AnalyzeOptions an;
    an.manifest = manifest;
    an.model = model_path;
    an.relevance_dir = dir / "rel";
    an.out = dir / "analysis";
    an.method = "IG";
    an.target_class = "af";
    an.bins = 20;
    an.lead = 6;
    REQUIRE(cmd_analyze(an) == kExitOk);

    const std::string report = slurp(dir / "analysis" / "analysis_report.txt");
    CHECK(report.find("[recordings]") != std::string::npos);
    CHECK(report.find("[leads]") != std::string::npos);
    CHECK(report.find("[histogram]") != std::string::npos);
    CHECK(report.find("[beat_average_abnormal]") != std::string::npos);
    std::size_t lead_rows = 0;
    std::stringstream ss(report);
    std::string line;
    bool in_leads = false;
    while (std::getline(ss, line)) {
        if (line == "[leads]") {
            in_leads = true;
            continue;
        }
        if (in_leads && line.rfind("[", 0) == 0) in_leads = false;
        if (in_leads && line.find(",") != std::string::npos && line.rfind("lead,", 0) != 0) ++lead_rows;
    }
    CHECK(lead_rows == 12);  // one rank-sum row per lead

    // analysis M_n equals a recomputation from the tensor files
    const DatasetManifest m = load_manifest(manifest);
    const RelevanceTensor rel0 = read_relevance(dir / "rel" / relevance_file_name(m.entries[0].id, "IG", 4));
    const double m_n = mean_recording(rel0.values);
    CHECK(report.find(format_exact(m_n)) != std::string::npos);

    for (const char* kind : {"trace-heatmap", "class-histogram", "recording-boxplots", "lead-boxplots",
                             "beat-average"}) {
        RenderOptions ro;
        ro.manifest = manifest;
        ro.model = model_path;
        ro.relevance_dir = dir / "rel";
        ro.out = dir / "figs";
        ro.kind = kind;
        ro.method = "IG";
        ro.target_class = "af";
        ro.lead = 6;
        ro.bins = 20;
        REQUIRE(cmd_render(ro) == kExitOk);
        CHECK(fs::exists(dir / "figs" / (std::string(kind) + ".svg")));
    }

    // missing relevance file -> analyze refuses
    fs::remove(dir / "rel" / relevance_file_name(m.entries[0].id, "IG", 4));
    CHECK(cmd_analyze(an) == kExitLoad);
}
