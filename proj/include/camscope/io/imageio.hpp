#pragma once

#include <string>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "camscope/core/error.hpp"
#include "camscope/core/image.hpp"

namespace camscope::io {

// Decodes to RGB float pixels in [0,255]. Grayscale sources stay single
// channel; callers expand later if the model wants three.
inline Image load_image(const std::string& path) {
    cv::Mat m = cv::imread(path, cv::IMREAD_UNCHANGED);
    if (m.empty()) throw DataError("cannot decode image: " + path);
    if (m.depth() != CV_8U) {
        cv::Mat tmp;
        const double scale = m.depth() == CV_16U ? 1.0 / 257.0 : 1.0;
        m.convertTo(tmp, CV_8U, scale);
        m = tmp;
    }
    if (m.channels() == 4) cv::cvtColor(m, m, cv::COLOR_BGRA2BGR);
    if (m.channels() == 3) cv::cvtColor(m, m, cv::COLOR_BGR2RGB);

    Image img(m.rows, m.cols, m.channels() == 1 ? 1 : 3);
    for (int y = 0; y < m.rows; ++y) {
        const unsigned char* row = m.ptr<unsigned char>(y);
        for (int x = 0; x < m.cols; ++x)
            for (int c = 0; c < img.c; ++c)
                img.at(y, x, c) = static_cast<float>(row[x * img.c + c]);
    }
    return img;
}

// Writes an image whose pixels live in [0,1]; values are clamped first.
inline void save_image(const std::string& path, const Image& img) {
    if (img.c != 1 && img.c != 3) throw DataError("save_image: channels must be 1 or 3");
    cv::Mat m(img.h, img.w, img.c == 1 ? CV_8UC1 : CV_8UC3);
    for (int y = 0; y < img.h; ++y) {
        unsigned char* row = m.ptr<unsigned char>(y);
        for (int x = 0; x < img.w; ++x)
            for (int c = 0; c < img.c; ++c) {
                const float v = std::clamp(img.at(y, x, c), 0.0f, 1.0f);
                // RGB back to BGR for the codec
                const int dst = img.c == 3 ? 2 - c : 0;
                row[x * img.c + dst] = static_cast<unsigned char>(std::lround(v * 255.0f));
            }
    }
    if (!cv::imwrite(path, m)) throw DataError("cannot write image: " + path);
}

}  // namespace camscope::io
