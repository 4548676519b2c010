#pragma once

#include <map>

#include "sclp/common.hpp"

namespace sclp {

/// n(i, j) = pixels of true class i predicted as class j, 1-based classes.
/// Pixels whose ground truth is unlabeled are never counted.
class ConfusionMatrix {
  public:
    ConfusionMatrix() = default;
    explicit ConfusionMatrix(int m) : m_(m), n_(static_cast<std::size_t>(m) * m, 0) {}

    int num_classes() const { return m_; }
    std::uint64_t at(ClassIndex truth, ClassIndex pred) const { return n_[static_cast<std::size_t>(truth - 1) * m_ + (pred - 1)]; }
    std::uint64_t& at(ClassIndex truth, ClassIndex pred) { return n_[static_cast<std::size_t>(truth - 1) * m_ + (pred - 1)]; }

    std::uint64_t total() const {
        std::uint64_t s = 0;
        for (auto v : n_) s += v;
        return s;
    }

    void accumulate(const LabelMap& pred, const LabelMap& gt) {
        if (pred.width != gt.width || pred.height != gt.height) throw ArgumentError("prediction and ground truth dimensions differ");
        for (std::size_t i = 0; i < gt.labels.size(); ++i) {
            const int t = gt.labels[i];
            if (t == kUnlabeled) continue;
            const int p = pred.labels[i];
            if (t > m_ || p < 1 || p > m_) throw ArgumentError("label index outside 1..M in metric accumulation");
            ++at(t, p);
        }
    }

    ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
        if (o.m_ != m_) throw ArgumentError("confusion matrix class count mismatch");
        for (std::size_t i = 0; i < n_.size(); ++i) n_[i] += o.n_[i];
        return *this;
    }

  private:
    int m_ = 0;
    std::vector<std::uint64_t> n_;
};

struct Metrics {
    double global_acc = 0.0;
    double class_acc = 0.0;
    double mean_iu = 0.0;
    double fw_iu = 0.0;

    std::map<std::string, double> as_record() const {
        return {{"global_acc", global_acc}, {"class_acc", class_acc}, {"mean_iu", mean_iu}, {"fw_iu", fw_iu}};
    }
};

/// Classes with t_i = 0 are left out of the class-accuracy average; classes
/// with a zero IU denominator are left out of the mean IU.
inline Metrics compute_metrics(const ConfusionMatrix& cm) {
    const int m = cm.num_classes();
    std::vector<double> t(static_cast<std::size_t>(m) + 1, 0.0), col(static_cast<std::size_t>(m) + 1, 0.0);
    double diag = 0.0, total = 0.0;
    for (ClassIndex i = 1; i <= m; ++i)
        for (ClassIndex j = 1; j <= m; ++j) {
            const double v = static_cast<double>(cm.at(i, j));
            t[i] += v;
            col[j] += v;
            total += v;
            if (i == j) diag += v;
        }
    if (total <= 0.0) throw ComputationError("no labeled pixels");
    Metrics r;
    r.global_acc = diag / total;
    double acc_sum = 0.0, iu_sum = 0.0, fw = 0.0;
    int acc_n = 0, iu_n = 0;
    for (ClassIndex i = 1; i <= m; ++i) {
        const double nii = static_cast<double>(cm.at(i, i));
        if (t[i] > 0.0) {
            acc_sum += nii / t[i];
            ++acc_n;
        }
        const double denom = t[i] + col[i] - nii;
        if (denom > 0.0) {
            const double iu = nii / denom;
            iu_sum += iu;
            ++iu_n;
            fw += t[i] * iu;
        }
    }
    r.class_acc = acc_sum / acc_n;
    r.mean_iu = iu_n > 0 ? iu_sum / iu_n : 0.0;
    r.fw_iu = fw / total;
    return r;
}

} // namespace sclp
