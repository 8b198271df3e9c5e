#pragma once

#include <functional>
#include <string>
#include <vector>

#include "qsr/data/dataset.hpp"
#include "qsr/tensor.hpp"

namespace qsr::eval {

struct MetricRow {
    std::string method;
    double psnr_db = 0.0; // aggregated with the 60 dB infinity cap
    double ssim = 0.0;
};

struct MetricsReport {
    std::string dataset;
    std::vector<MetricRow> rows;           // measured on this machine
    std::vector<MetricRow> reference_rows; // published constants, labeled "paper"
    std::string note; // aggregation conventions (infinity cap, window size, kernel)
};

using Upscaler = std::function<Tensor(const Tensor& lr)>;

// Mean capped PSNR and mean SSIM of `up` over every pair in the handle.
MetricRow benchmark_method(const std::string& name, const Upscaler& up,
                           const data::DatasetHandle& ds);

// Published reference rows for a dataset name (case-insensitive; empty
// when the dataset has no published counterpart).
std::vector<MetricRow> paper_rows(const std::string& dataset);

// Datasets with published rows, in table order.
std::vector<std::string> paper_datasets();

// CSV with header dataset,method,psnr_db,ssim,source; measured rows first,
// then reference rows marked source=paper.
std::string to_csv(const std::vector<MetricsReport>& reports);

// Fixed-width text table of one report, reference rows flagged
// "paper-reported".
std::string to_text_table(const MetricsReport& report);

} // namespace qsr::eval
