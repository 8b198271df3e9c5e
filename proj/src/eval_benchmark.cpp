#include "qsr/eval/benchmark.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>

#include "qsr/error.hpp"
#include "qsr/eval/metrics.hpp"

namespace qsr::eval {

namespace {

// Published PSNR/SSIM constants for the twelve benchmark datasets, one row
// per method in presentation order.
constexpr std::array<const char*, 8> kRefMethods = {
    "nearest", "bilinear", "bicubic", "sparse-representation",
    "iterative-back-projection", "srcnn", "swin2sr", "quiet-sr"};

struct RefTable {
    const char* dataset;
    double vals[8][2]; // (psnr, ssim) per method
};

constexpr RefTable kRefTables[] = {
    {"bloodmnist",
     {{18.35, 0.748}, {19.87, 0.772}, {21.63, 0.812}, {22.15, 0.836},
      {22.68, 0.861}, {29.20, 0.896}, {30.42, 0.932}, {31.24, 0.950}}},
    {"breastmnist",
     {{16.46, 0.689}, {17.98, 0.712}, {19.71, 0.752}, {20.23, 0.776},
      {21.75, 0.799}, {26.27, 0.832}, {27.49, 0.872}, {28.35, 0.894}}},
    {"dermamnist",
     {{20.35, 0.812}, {21.97, 0.834}, {22.72, 0.867}, {22.84, 0.891},
      {22.96, 0.913}, {36.28, 0.941}, {37.55, 0.961}, {38.24, 0.973}}},
    {"octmnist",
     {{19.35, 0.792}, {20.83, 0.816}, {22.58, 0.848}, {22.81, 0.874},
      {22.94, 0.896}, {31.17, 0.928}, {32.44, 0.949}, {33.24, 0.963}}},
    {"organcmnist",
     {{12.95, 0.594}, {14.38, 0.625}, {16.14, 0.662}, {17.69, 0.683},
      {19.24, 0.709}, {20.79, 0.742}, {21.93, 0.768}, {22.80, 0.814}}},
    {"organsmnist",
     {{12.93, 0.611}, {14.35, 0.642}, {16.08, 0.683}, {17.63, 0.705},
      {19.18, 0.731}, {20.73, 0.764}, {21.89, 0.792}, {22.81, 0.811}}},
    {"pathmnist",
     {{16.87, 0.620}, {18.39, 0.651}, {20.15, 0.692}, {21.67, 0.721},
      {22.19, 0.751}, {26.71, 0.781}, {27.93, 0.805}, {28.82, 0.820}}},
    {"pneumoniamnist",
     {{18.82, 0.775}, {20.34, 0.806}, {21.11, 0.846}, {22.63, 0.876},
      {22.75, 0.906}, {30.67, 0.935}, {31.89, 0.954}, {32.73, 0.966}}},
    {"retinamnist",
     {{19.98, 0.777}, {21.50, 0.808}, {22.27, 0.848}, {22.79, 0.878},
      {22.86, 0.908}, {31.83, 0.937}, {33.05, 0.956}, {33.91, 0.967}}},
    {"fashionmnist",
     {{16.83, 0.776}, {18.35, 0.807}, {20.11, 0.847}, {21.63, 0.877},
      {22.15, 0.907}, {27.67, 0.936}, {28.89, 0.960}, {29.76, 0.976}}},
    {"mnist",
     {{17.32, 0.789}, {18.84, 0.820}, {20.60, 0.859}, {22.12, 0.889},
      {22.64, 0.919}, {28.16, 0.949}, {29.38, 0.972}, {30.24, 0.989}}},
    {"tissuemnist",
     {{21.18, 0.775}, {22.70, 0.806}, {22.86, 0.846}, {22.93, 0.876},
      {22.98, 0.906}, {35.02, 0.935}, {36.29, 0.954}, {37.12, 0.966}}},
};

std::string lower(std::string s) {
    for (char& c : s) c = char(std::tolower((unsigned char)c));
    return s;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

} // namespace

MetricRow benchmark_method(const std::string& name, const Upscaler& up,
                           const data::DatasetHandle& ds) {
    if (ds.items.empty()) throw ValidationError("benchmark needs a non-empty dataset");
    MetricRow row{name, 0.0, 0.0};
    for (const data::ImagePair& item : ds.items) {
        const Tensor sr = up(item.lr);
        row.psnr_db += psnr_capped(sr, item.hr);
        row.ssim += ssim(sr, item.hr);
    }
    row.psnr_db /= double(ds.items.size());
    row.ssim /= double(ds.items.size());
    return row;
}

std::vector<MetricRow> paper_rows(const std::string& dataset) {
    const std::string key = lower(dataset);
    for (const RefTable& t : kRefTables)
        if (key == t.dataset) {
            std::vector<MetricRow> rows;
            for (std::size_t m = 0; m < kRefMethods.size(); ++m)
                rows.push_back({kRefMethods[m], t.vals[m][0], t.vals[m][1]});
            return rows;
        }
    return {};
}

std::vector<std::string> paper_datasets() {
    std::vector<std::string> out;
    for (const RefTable& t : kRefTables) out.emplace_back(t.dataset);
    return out;
}

std::string to_csv(const std::vector<MetricsReport>& reports) {
    std::string csv = "dataset,method,psnr_db,ssim,source\n";
    for (const MetricsReport& r : reports) {
        for (const MetricRow& row : r.rows)
            csv += r.dataset + "," + row.method + "," + fmt(row.psnr_db) + "," + fmt(row.ssim) +
                   ",measured\n";
        for (const MetricRow& row : r.reference_rows)
            csv += r.dataset + "," + row.method + "," + fmt(row.psnr_db) + "," + fmt(row.ssim) +
                   ",paper\n";
    }
    return csv;
}

std::string to_text_table(const MetricsReport& report) {
    std::size_t name_w = 6;
    for (const MetricRow& r : report.rows) name_w = std::max(name_w, r.method.size());
    for (const MetricRow& r : report.reference_rows) name_w = std::max(name_w, r.method.size());

    std::string out = "dataset: " + report.dataset + "\n";
    char line[160];
    std::snprintf(line, sizeof line, "%-*s  %8s  %6s  %s\n", int(name_w), "method", "psnr_db",
                  "ssim", "source");
    out += line;
    for (const MetricRow& r : report.rows) {
        std::snprintf(line, sizeof line, "%-*s  %8.2f  %6.3f  measured\n", int(name_w),
                      r.method.c_str(), r.psnr_db, r.ssim);
        out += line;
    }
    for (const MetricRow& r : report.reference_rows) {
        std::snprintf(line, sizeof line, "%-*s  %8.2f  %6.3f  paper-reported\n", int(name_w),
                      r.method.c_str(), r.psnr_db, r.ssim);
        out += line;
    }
    if (!report.note.empty()) out += "note: " + report.note + "\n";
    return out;
}

} // namespace qsr::eval
