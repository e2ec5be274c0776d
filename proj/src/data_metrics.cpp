#include "rtsf/data/metrics.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace rtsf::data {

EvalReport compute_metrics(const ConfusionMatrix& confusion) {
    const size_t k = confusion.size();
    if (k == 0) throw UsageError("confusion matrix is empty");
    for (const auto& row : confusion) {
        if (row.size() != k) throw UsageError("confusion matrix is not square");
        for (long long v : row)
            if (v < 0) throw UsageError("confusion matrix has negative counts");
    }
    EvalReport rep;
    rep.confusion = confusion;
    rep.precision.assign(k, 0.0);
    rep.recall.assign(k, 0.0);
    rep.f1.assign(k, 0.0);
    rep.support.assign(k, 0);

    long long total = 0, trace = 0;
    std::vector<long long> col_sum(k, 0);
    for (size_t i = 0; i < k; ++i) {
        for (size_t j = 0; j < k; ++j) {
            total += confusion[i][j];
            col_sum[j] += confusion[i][j];
            rep.support[i] += confusion[i][j];
        }
        trace += confusion[i][i];
    }
    if (total == 0) throw UsageError("confusion matrix has no samples");
    rep.total = total;
    rep.accuracy = 100.0 * static_cast<double>(trace) / static_cast<double>(total);

    double mf1 = 0.0, wf1 = 0.0;
    for (size_t i = 0; i < k; ++i) {
        const long long tp = confusion[i][i];
        const double p = col_sum[i] > 0 ? static_cast<double>(tp) / col_sum[i] : 0.0;
        const double r = rep.support[i] > 0 ? static_cast<double>(tp) / rep.support[i] : 0.0;
        rep.precision[i] = p;
        rep.recall[i] = r;
        rep.f1[i] = (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
        mf1 += rep.f1[i];
        wf1 += rep.f1[i] * static_cast<double>(rep.support[i]);
    }
    rep.macro_f1 = mf1 / static_cast<double>(k);
    rep.weighted_f1 = wf1 / static_cast<double>(total);
    return rep;
}

std::string report_text(const EvalReport& rep, const std::vector<std::string>& class_names) {
    std::ostringstream os;
    os << std::fixed;
    os << "samples: " << rep.total << "\n";
    os << "accuracy: " << std::setprecision(4) << rep.accuracy << "\n";
    os << "macro_f1: " << std::setprecision(6) << rep.macro_f1 << "\n";
    os << "weighted_f1: " << std::setprecision(6) << rep.weighted_f1 << "\n";
    for (size_t i = 0; i < rep.f1.size(); ++i) {
        os << "class " << i;
        if (i < class_names.size()) os << " (" << class_names[i] << ")";
        os << ": precision " << std::setprecision(6) << rep.precision[i] << " recall "
           << rep.recall[i] << " f1 " << rep.f1[i] << " support " << rep.support[i] << "\n";
    }
    return os.str();
}

void write_confusion_csv(const std::string& path, const ConfusionMatrix& confusion) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw InputError("cannot open confusion csv for writing: " + path);
    for (const auto& row : confusion) {
        for (size_t j = 0; j < row.size(); ++j) {
            if (j) out << ",";
            out << row[j];
        }
        out << "\n";
    }
}

ConfusionMatrix read_confusion_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open confusion csv: " + path);
    ConfusionMatrix m;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<long long> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stoll(cell));
            } catch (const std::exception&) {
                throw InputError("bad count at " + path + ":" + std::to_string(lineno));
            }
        }
        m.push_back(std::move(row));
    }
    if (m.empty()) throw InputError("confusion csv is empty: " + path);
    return m;
}

}  // namespace rtsf::data
