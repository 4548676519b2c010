#pragma once

// Human-readable and machine-readable renderings of metric records.

#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "sclp/pipeline.hpp"

namespace sclp {

inline nlohmann::json metrics_json(const Metrics& m) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : m.as_record()) j[k] = v;
    return j;
}

inline Metrics metrics_from_json(const nlohmann::json& j) {
    Metrics m;
    m.global_acc = j.at("global_acc").get<double>();
    m.class_acc = j.at("class_acc").get<double>();
    m.mean_iu = j.at("mean_iu").get<double>();
    m.fw_iu = j.at("fw_iu").get<double>();
    return m;
}

inline void write_metrics_json(const std::string& path, const Metrics& m) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw LoadError("cannot write report " + path);
    out << metrics_json(m).dump(2) << "\n";
}

inline std::string metrics_table(const Metrics& m, const std::string& title) {
    std::ostringstream os;
    os << title << "\n" << std::fixed << std::setprecision(4);
    os << "  global_acc  " << m.global_acc << "\n";
    os << "  class_acc   " << m.class_acc << "\n";
    os << "  mean_iu     " << m.mean_iu << "\n";
    os << "  fw_iu       " << m.fw_iu << "\n";
    return os.str();
}

inline std::string confusion_table(const ConfusionMatrix& cm, const ClassVocabulary& vocab) {
    std::ostringstream os;
    os << std::setw(12) << "truth\\pred";
    for (const auto& n : vocab.names()) os << std::setw(10) << n.substr(0, 9);
    os << "\n";
    for (ClassIndex i = 1; i <= cm.num_classes(); ++i) {
        os << std::setw(12) << vocab.names()[i - 1].substr(0, 11);
        for (ClassIndex j = 1; j <= cm.num_classes(); ++j) os << std::setw(10) << cm.at(i, j);
        os << "\n";
    }
    return os.str();
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    os << "axis,value,global_acc,class_acc,mean_iu,fw_iu\n" << std::setprecision(17);
    for (const auto& r : rows)
        os << r.axis << "," << r.value << "," << r.metrics.global_acc << "," << r.metrics.class_acc << ","
           << r.metrics.mean_iu << "," << r.metrics.fw_iu << "\n";
    return os.str();
}

} // namespace sclp
