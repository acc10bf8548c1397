#pragma once
// Cross-run report artifacts: metric comparison tables, labeled 2x2
// explanation panels, grouped metric bar charts, and rendered confusion
// matrices. Everything here is a pure function of its inputs so regenerated
// artifacts are byte-identical.

#include <algorithm>
#include <array>
#include <cfenv>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include "camscope/cam/cam.hpp"
#include "camscope/core/error.hpp"
#include "camscope/core/image.hpp"
#include "camscope/metrics/metrics.hpp"
#include "camscope/training/train.hpp"

namespace camscope::reporting {

struct ExplanationRecord {
    std::string image_id;
    std::string method;
    std::string heatmap_path;
    std::string overlay_path;
};

struct RunArtifact {
    std::string model_name;
    std::string checkpoint_path;
    metrics::MetricsReport metrics;
    training::TrainLog trainlog;
    std::vector<ExplanationRecord> explanations;
};

struct TableDocument {
    std::string csv;
    std::string text;
    int best_row = -1;
};

// round half to even at 4 decimals (nearbyint under the default FE_TONEAREST)
inline double round4(double v) { return std::nearbyint(v * 10000.0) / 10000.0; }

inline std::string format4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", round4(v));
    return buf;
}

namespace detail {

inline std::array<std::string, 5> metric_row(const metrics::MetricsReport& r) {
    return {format4(r.accuracy), format4(r.avg_precision), format4(r.avg_recall),
            format4(r.avg_f1), format4(r.avg_jaccard)};
}

inline cv::Mat to_mat(const Image& img) {
    const Image rgb = replicate_to_rgb(img);
    cv::Mat m(rgb.h, rgb.w, CV_8UC3);
    for (int y = 0; y < rgb.h; ++y)
        for (int x = 0; x < rgb.w; ++x) {
            auto& px = m.at<cv::Vec3b>(y, x);
            for (int c = 0; c < 3; ++c)
                px[2 - c] = static_cast<unsigned char>(
                    std::lround(std::clamp(rgb.at(y, x, c), 0.0f, 1.0f) * 255.0f));
        }
    return m;
}

inline Image from_mat(const cv::Mat& m) {
    Image img(m.rows, m.cols, 3);
    for (int y = 0; y < m.rows; ++y)
        for (int x = 0; x < m.cols; ++x) {
            const auto& px = m.at<cv::Vec3b>(y, x);
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<float>(px[2 - c]) / 255.0f;
        }
    return img;
}

}  // namespace detail

// One row per model: Accuracy, Precision, Recall, F1-Score, Jaccard Score at
// 4 decimals. Best row by accuracy, ties broken by F1 then model name.
inline TableDocument comparison_table(const std::vector<RunArtifact>& artifacts) {
    if (artifacts.empty()) throw ConfigError("comparison table needs at least one run");

    int best = 0;
    for (int i = 1; i < static_cast<int>(artifacts.size()); ++i) {
        const auto& a = artifacts[i].metrics;
        const auto& b = artifacts[best].metrics;
        if (a.accuracy > b.accuracy ||
            (a.accuracy == b.accuracy &&
             (a.avg_f1 > b.avg_f1 ||
              (a.avg_f1 == b.avg_f1 && artifacts[i].model_name < artifacts[best].model_name))))
            best = i;
    }

    static const std::array<const char*, 5> kHeaders = {"Accuracy", "Precision", "Recall",
                                                        "F1-Score", "Jaccard Score"};
    TableDocument doc;
    doc.best_row = best;

    doc.csv = "Model";
    for (const char* h : kHeaders) doc.csv += std::string(",") + h;
    doc.csv += ",Best\n";
    for (int i = 0; i < static_cast<int>(artifacts.size()); ++i) {
        doc.csv += artifacts[i].model_name;
        for (const std::string& v : detail::metric_row(artifacts[i].metrics)) doc.csv += "," + v;
        doc.csv += i == best ? ",yes\n" : ",no\n";
    }

    std::size_t name_w = std::string("Model").size();
    for (const RunArtifact& a : artifacts)
        name_w = std::max(name_w, a.model_name.size() + 2);  // room for " *"
    std::string line = "Model" + std::string(name_w - 5, ' ');
    for (const char* h : kHeaders) line += "  " + std::string(h);
    doc.text = line + "\n";
    for (int i = 0; i < static_cast<int>(artifacts.size()); ++i) {
        std::string name = artifacts[i].model_name + (i == best ? " *" : "");
        line = name + std::string(name_w - name.size(), ' ');
        const auto row = detail::metric_row(artifacts[i].metrics);
        for (std::size_t c = 0; c < row.size(); ++c) {
            const std::size_t w = std::string(kHeaders[c]).size();
            line += "  " + std::string(w - row[c].size(), ' ') + row[c];
        }
        doc.text += line + "\n";
    }
    return doc;
}

inline constexpr int kPanelLabelBand = 18;

// 2x2 labeled grid of overlays for one image; panel is 2x the overlay side
// wide and 2x (side + label band) tall.
inline Image explanation_panel(const Image& img,
                               const std::map<std::string, cam::Heatmap>& heatmaps,
                               double alpha = 0.5) {
    static const std::array<std::pair<const char*, const char*>, 4> kMethods = {{
        {"gradcam", "GradCAM"},
        {"gradcampp", "GradCAM++"},
        {"layercam", "LayerCAM"},
        {"scorecam", "ScoreCAM"},
    }};
    for (const auto& [id, label] : kMethods)
        if (!heatmaps.count(id))
            throw ConfigError(std::string("explanation panel requires method '") + id + "'");

    const int side_w = img.w, side_h = img.h;
    const int cell_h = side_h + kPanelLabelBand;
    cv::Mat canvas(2 * cell_h, 2 * side_w, CV_8UC3, cv::Scalar(255, 255, 255));

    for (int q = 0; q < 4; ++q) {
        const int gx = (q % 2) * side_w, gy = (q / 2) * cell_h;
        const Image over = cam::overlay(img, heatmaps.at(kMethods[q].first), alpha);
        cv::Mat tile = detail::to_mat(over);
        tile.copyTo(canvas(cv::Rect(gx, gy + kPanelLabelBand, side_w, side_h)));
        cv::putText(canvas, kMethods[q].second, cv::Point(gx + 4, gy + kPanelLabelBand - 5),
                    cv::FONT_HERSHEY_SIMPLEX, 0.4, cv::Scalar(0, 0, 0), 1, cv::LINE_8);
    }
    return detail::from_mat(canvas);
}

// Grouped bars per model across the five table metrics, values clipped to the
// [0,1] rendering range.
inline Image performance_chart(const std::vector<RunArtifact>& artifacts) {
    if (artifacts.size() < 2) throw ConfigError("performance chart needs at least two runs");

    static const std::array<const char*, 5> kMetrics = {"Accuracy", "Precision", "Recall",
                                                        "F1-Score", "Jaccard"};
    static const std::array<cv::Scalar, 5> kColors = {
        cv::Scalar(180, 119, 31), cv::Scalar(14, 127, 255), cv::Scalar(44, 160, 44),
        cv::Scalar(40, 39, 214), cv::Scalar(189, 103, 148)};

    const int n = static_cast<int>(artifacts.size());
    const int bar_w = 16, bar_gap = 4, group_gap = 28;
    const int group_w = 5 * bar_w + 4 * bar_gap + group_gap;
    const int margin_l = 64, margin_r = 16, top = 56, bottom = 360, height = 420;
    const int width = margin_l + n * group_w + margin_r;

    cv::Mat canvas(height, width, CV_8UC3, cv::Scalar(255, 255, 255));

    for (int tick = 0; tick <= 4; ++tick) {
        const double v = tick * 0.25;
        const int y = bottom - static_cast<int>(std::lround(v * (bottom - top)));
        cv::line(canvas, cv::Point(margin_l, y), cv::Point(width - margin_r, y),
                 cv::Scalar(225, 225, 225), 1, cv::LINE_8);
        char lbl[8];
        std::snprintf(lbl, sizeof(lbl), "%.2f", v);
        cv::putText(canvas, lbl, cv::Point(16, y + 4), cv::FONT_HERSHEY_SIMPLEX, 0.38,
                    cv::Scalar(60, 60, 60), 1, cv::LINE_8);
    }

    int lx = margin_l;
    for (std::size_t m = 0; m < kMetrics.size(); ++m) {
        cv::rectangle(canvas, cv::Rect(lx, 14, 12, 12), kColors[m], cv::FILLED);
        cv::putText(canvas, kMetrics[m], cv::Point(lx + 16, 24), cv::FONT_HERSHEY_SIMPLEX, 0.38,
                    cv::Scalar(30, 30, 30), 1, cv::LINE_8);
        lx += 16 + 9 * static_cast<int>(std::string(kMetrics[m]).size()) + 14;
    }

    for (int i = 0; i < n; ++i) {
        const auto& r = artifacts[i].metrics;
        const std::array<double, 5> vals = {r.accuracy, r.avg_precision, r.avg_recall, r.avg_f1,
                                            r.avg_jaccard};
        const int gx = margin_l + i * group_w + group_gap / 2;
        for (int m = 0; m < 5; ++m) {
            const double v = std::clamp(vals[m], 0.0, 1.0);
            const int h = static_cast<int>(std::lround(v * (bottom - top)));
            const int x = gx + m * (bar_w + bar_gap);
            if (h > 0)
                cv::rectangle(canvas, cv::Rect(x, bottom - h, bar_w, h), kColors[m], cv::FILLED);
        }
        cv::putText(canvas, artifacts[i].model_name, cv::Point(gx, bottom + 22),
                    cv::FONT_HERSHEY_SIMPLEX, 0.42, cv::Scalar(30, 30, 30), 1, cv::LINE_8);
    }
    cv::line(canvas, cv::Point(margin_l, bottom), cv::Point(width - margin_r, bottom),
             cv::Scalar(90, 90, 90), 1, cv::LINE_8);

    return detail::from_mat(canvas);
}

// Cell-annotated confusion grid: rows are true classes, columns predictions,
// cells shaded by count relative to the largest cell.
inline Image confusion_image(const metrics::ConfusionMatrix& m,
                             const std::vector<std::string>& class_names) {
    const int n = m.n_classes();
    if (static_cast<int>(class_names.size()) != n)
        throw DataError("confusion image: class name count mismatch");

    const int cell = 72, margin_l = 110, margin_t = 72, margin_b = 16, margin_r = 16;
    const int width = margin_l + n * cell + margin_r;
    const int height = margin_t + n * cell + margin_b;
    cv::Mat canvas(height, width, CV_8UC3, cv::Scalar(255, 255, 255));

    long long max_count = 1;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) max_count = std::max(max_count, m.count(i, j));

    cv::putText(canvas, "predicted", cv::Point(margin_l, 22), cv::FONT_HERSHEY_SIMPLEX, 0.42,
                cv::Scalar(30, 30, 30), 1, cv::LINE_8);
    for (int j = 0; j < n; ++j)
        cv::putText(canvas, class_names[j], cv::Point(margin_l + j * cell + 6, margin_t - 10),
                    cv::FONT_HERSHEY_SIMPLEX, 0.42, cv::Scalar(30, 30, 30), 1, cv::LINE_8);
    for (int i = 0; i < n; ++i)
        cv::putText(canvas, class_names[i], cv::Point(8, margin_t + i * cell + cell / 2 + 4),
                    cv::FONT_HERSHEY_SIMPLEX, 0.42, cv::Scalar(30, 30, 30), 1, cv::LINE_8);

    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double frac = static_cast<double>(m.count(i, j)) / static_cast<double>(max_count);
            // white through a deep blue as the count grows
            const int r = static_cast<int>(std::lround(255 - 205 * frac));
            const int g = static_cast<int>(std::lround(255 - 155 * frac));
            const cv::Rect rect(margin_l + j * cell, margin_t + i * cell, cell, cell);
            cv::rectangle(canvas, rect, cv::Scalar(255, g, r), cv::FILLED);
            cv::rectangle(canvas, rect, cv::Scalar(140, 140, 140), 1);
            const std::string label = std::to_string(m.count(i, j));
            const cv::Scalar ink =
                frac > 0.55 ? cv::Scalar(255, 255, 255) : cv::Scalar(20, 20, 20);
            cv::putText(canvas, label,
                        cv::Point(rect.x + cell / 2 - 9 * static_cast<int>(label.size()) / 2,
                                  rect.y + cell / 2 + 5),
                        cv::FONT_HERSHEY_SIMPLEX, 0.45, ink, 1, cv::LINE_8);
        }
    }
    return detail::from_mat(canvas);
}

}  // namespace camscope::reporting
