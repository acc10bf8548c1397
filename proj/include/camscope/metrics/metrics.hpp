#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "camscope/core/error.hpp"

namespace camscope::metrics {

// Rows are true classes, columns are predicted classes.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(int n_classes)
        : n_(n_classes), counts_(static_cast<std::size_t>(n_classes) * n_classes, 0) {
        if (n_classes < 1) throw DataError("confusion matrix needs at least one class");
    }

    static ConfusionMatrix from_predictions(int n_classes, const std::vector<int>& truth,
                                            const std::vector<int>& pred) {
        if (truth.size() != pred.size())
            throw DataError("confusion matrix: label/prediction count mismatch");
        ConfusionMatrix m(n_classes);
        for (std::size_t i = 0; i < truth.size(); ++i) m.add(truth[i], pred[i]);
        return m;
    }

    void add(int true_class, int pred_class, long long weight = 1) {
        check(true_class);
        check(pred_class);
        counts_[static_cast<std::size_t>(true_class) * n_ + pred_class] += weight;
    }

    long long count(int true_class, int pred_class) const {
        check(true_class);
        check(pred_class);
        return counts_[static_cast<std::size_t>(true_class) * n_ + pred_class];
    }

    int n_classes() const { return n_; }

    long long row_total(int c) const {
        long long s = 0;
        for (int j = 0; j < n_; ++j) s += count(c, j);
        return s;
    }

    long long col_total(int c) const {
        long long s = 0;
        for (int i = 0; i < n_; ++i) s += count(i, c);
        return s;
    }

    long long total() const {
        long long s = 0;
        for (long long v : counts_) s += v;
        return s;
    }

    long long trace() const {
        long long s = 0;
        for (int i = 0; i < n_; ++i) s += count(i, i);
        return s;
    }

    double accuracy() const {
        const long long t = total();
        return t == 0 ? 0.0 : static_cast<double>(trace()) / static_cast<double>(t);
    }

    // header row "true\pred", then one row per true class
    std::string to_csv(const std::vector<std::string>& class_names) const {
        std::string out = "true\\pred";
        for (int j = 0; j < n_; ++j) out += "," + class_names[j];
        out += "\n";
        for (int i = 0; i < n_; ++i) {
            out += class_names[i];
            for (int j = 0; j < n_; ++j) out += "," + std::to_string(count(i, j));
            out += "\n";
        }
        return out;
    }

private:
    void check(int c) const {
        if (c < 0 || c >= n_) throw DataError("confusion matrix: class index out of range");
    }

    int n_;
    std::vector<long long> counts_;
};

enum class Averaging { micro, macro, weighted };

inline const char* averaging_name(Averaging a) {
    switch (a) {
        case Averaging::micro: return "micro";
        case Averaging::macro: return "macro";
        default: return "weighted";
    }
}

inline bool parse_averaging(const std::string& s, Averaging& out) {
    if (s == "micro") out = Averaging::micro;
    else if (s == "macro") out = Averaging::macro;
    else if (s == "weighted") out = Averaging::weighted;
    else return false;
    return true;
}

struct ClassMetrics {
    std::string name;
    long long support = 0;  // true instances of the class
    long long tp = 0, fp = 0, fn = 0;
    double precision = 0.0, recall = 0.0, f1 = 0.0, jaccard = 0.0;
    // set when the corresponding denominator was zero and the value was
    // defined to 0 instead of NaN
    bool degenerate_precision = false;
    bool degenerate_recall = false;
    bool degenerate_f1 = false;
    bool degenerate_jaccard = false;
};

struct MetricsReport {
    std::vector<std::string> class_names;
    double accuracy = 0.0;
    long long total = 0;
    std::vector<ClassMetrics> per_class;
    Averaging averaging = Averaging::weighted;
    double avg_precision = 0.0, avg_recall = 0.0, avg_f1 = 0.0, avg_jaccard = 0.0;
};

namespace detail {
inline double ratio0(double num, double den, bool& degenerate) {
    if (den == 0.0) {
        degenerate = true;
        return 0.0;
    }
    return num / den;
}
}  // namespace detail

inline MetricsReport compute_metrics(const ConfusionMatrix& m,
                                     const std::vector<std::string>& class_names,
                                     Averaging averaging = Averaging::weighted) {
    const int n = m.n_classes();
    if (static_cast<int>(class_names.size()) != n)
        throw DataError("metrics: class name count does not match matrix size");

    MetricsReport r;
    r.class_names = class_names;
    r.total = m.total();
    r.accuracy = m.accuracy();
    r.averaging = averaging;

    long long sum_tp = 0, sum_fp = 0, sum_fn = 0;
    for (int c = 0; c < n; ++c) {
        ClassMetrics cm;
        cm.name = class_names[c];
        cm.tp = m.count(c, c);
        cm.fn = m.row_total(c) - cm.tp;
        cm.fp = m.col_total(c) - cm.tp;
        cm.support = m.row_total(c);
        cm.precision = detail::ratio0(static_cast<double>(cm.tp),
                                      static_cast<double>(cm.tp + cm.fp),
                                      cm.degenerate_precision);
        cm.recall = detail::ratio0(static_cast<double>(cm.tp),
                                   static_cast<double>(cm.tp + cm.fn),
                                   cm.degenerate_recall);
        cm.f1 = detail::ratio0(2.0 * cm.precision * cm.recall, cm.precision + cm.recall,
                               cm.degenerate_f1);
        cm.jaccard = detail::ratio0(static_cast<double>(cm.tp),
                                    static_cast<double>(cm.tp + cm.fp + cm.fn),
                                    cm.degenerate_jaccard);
        sum_tp += cm.tp;
        sum_fp += cm.fp;
        sum_fn += cm.fn;
        r.per_class.push_back(cm);
    }

    if (averaging == Averaging::micro) {
        bool d = false;
        r.avg_precision = detail::ratio0(static_cast<double>(sum_tp),
                                         static_cast<double>(sum_tp + sum_fp), d);
        r.avg_recall = detail::ratio0(static_cast<double>(sum_tp),
                                      static_cast<double>(sum_tp + sum_fn), d);
        r.avg_f1 = detail::ratio0(2.0 * r.avg_precision * r.avg_recall,
                                  r.avg_precision + r.avg_recall, d);
        r.avg_jaccard = detail::ratio0(static_cast<double>(sum_tp),
                                       static_cast<double>(sum_tp + sum_fp + sum_fn), d);
    } else {
        double wp = 0.0, wr = 0.0, wf = 0.0, wj = 0.0, wsum = 0.0;
        for (const ClassMetrics& cm : r.per_class) {
            const double w = averaging == Averaging::macro
                                 ? 1.0
                                 : static_cast<double>(cm.support);
            wp += w * cm.precision;
            wr += w * cm.recall;
            wf += w * cm.f1;
            wj += w * cm.jaccard;
            wsum += w;
        }
        if (wsum > 0.0) {
            r.avg_precision = wp / wsum;
            r.avg_recall = wr / wsum;
            r.avg_f1 = wf / wsum;
            r.avg_jaccard = wj / wsum;
        }
    }
    return r;
}

inline nlohmann::json metrics_to_json(const MetricsReport& r) {
    nlohmann::json j;
    j["accuracy"] = r.accuracy;
    j["total"] = r.total;
    j["averaging"] = averaging_name(r.averaging);
    j["average"] = {{"precision", r.avg_precision},
                    {"recall", r.avg_recall},
                    {"f1", r.avg_f1},
                    {"jaccard", r.avg_jaccard}};
    nlohmann::json pc = nlohmann::json::array();
    for (const ClassMetrics& cm : r.per_class) {
        nlohmann::json e;
        e["class"] = cm.name;
        e["support"] = cm.support;
        e["tp"] = cm.tp;
        e["fp"] = cm.fp;
        e["fn"] = cm.fn;
        e["precision"] = cm.precision;
        e["recall"] = cm.recall;
        e["f1"] = cm.f1;
        e["jaccard"] = cm.jaccard;
        if (cm.degenerate_precision || cm.degenerate_recall || cm.degenerate_f1 ||
            cm.degenerate_jaccard) {
            e["degenerate"] = {{"precision", cm.degenerate_precision},
                               {"recall", cm.degenerate_recall},
                               {"f1", cm.degenerate_f1},
                               {"jaccard", cm.degenerate_jaccard}};
        }
        pc.push_back(e);
    }
    j["per_class"] = pc;
    return j;
}

inline MetricsReport metrics_from_json(const nlohmann::json& j) {
    MetricsReport r;
    try {
        r.accuracy = j.at("accuracy").get<double>();
        r.total = j.at("total").get<long long>();
        if (!parse_averaging(j.at("averaging").get<std::string>(), r.averaging))
            throw DataError("metrics: unknown averaging '" +
                            j.at("averaging").get<std::string>() + "'");
        const nlohmann::json& avg = j.at("average");
        r.avg_precision = avg.at("precision").get<double>();
        r.avg_recall = avg.at("recall").get<double>();
        r.avg_f1 = avg.at("f1").get<double>();
        r.avg_jaccard = avg.at("jaccard").get<double>();
        for (const nlohmann::json& e : j.at("per_class")) {
            ClassMetrics cm;
            cm.name = e.at("class").get<std::string>();
            cm.support = e.at("support").get<long long>();
            cm.tp = e.at("tp").get<long long>();
            cm.fp = e.at("fp").get<long long>();
            cm.fn = e.at("fn").get<long long>();
            cm.precision = e.at("precision").get<double>();
            cm.recall = e.at("recall").get<double>();
            cm.f1 = e.at("f1").get<double>();
            cm.jaccard = e.at("jaccard").get<double>();
            if (e.contains("degenerate")) {
                const nlohmann::json& d = e["degenerate"];
                cm.degenerate_precision = d.value("precision", false);
                cm.degenerate_recall = d.value("recall", false);
                cm.degenerate_f1 = d.value("f1", false);
                cm.degenerate_jaccard = d.value("jaccard", false);
            }
            r.class_names.push_back(cm.name);
            r.per_class.push_back(std::move(cm));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("metrics: malformed report json: ") + e.what());
    }
    return r;
}

}  // namespace camscope::metrics
