#pragma once

#include <string>
#include <vector>

#include "rtsf/common.hpp"

namespace rtsf::data {

using ConfusionMatrix = std::vector<std::vector<long long>>;  // [actual][predicted]

struct EvalReport {
    ConfusionMatrix confusion;
    double accuracy = 0.0;  // percent, trace/total * 100
    double macro_f1 = 0.0;
    double weighted_f1 = 0.0;
    std::vector<double> precision, recall, f1;
    std::vector<long long> support;
    long long total = 0;
};

// Accuracy, per-class precision/recall/F1, macro and support-weighted F1.
// Classes without any actual or predicted sample contribute F1 = 0 to the
// macro average.
EvalReport compute_metrics(const ConfusionMatrix& confusion);

std::string report_text(const EvalReport& report,
                        const std::vector<std::string>& class_names = {});

void write_confusion_csv(const std::string& path, const ConfusionMatrix& confusion);
ConfusionMatrix read_confusion_csv(const std::string& path);

}  // namespace rtsf::data
