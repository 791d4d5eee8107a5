#include "tlbench/image.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>

namespace tlbench {

std::vector<float> resize_bilinear(const std::vector<float>& src, int src_h, int src_w,
                                   int dst_h, int dst_w) {
    std::vector<float> dst(static_cast<std::size_t>(dst_h) * dst_w);
    const double scale_y = static_cast<double>(src_h) / dst_h;
    const double scale_x = static_cast<double>(src_w) / dst_w;
    for (int y = 0; y < dst_h; ++y) {
        double sy = (y + 0.5) * scale_y - 0.5;
        sy = std::clamp(sy, 0.0, static_cast<double>(src_h - 1));
        const int y0 = static_cast<int>(sy);
        const int y1 = std::min(y0 + 1, src_h - 1);
        const double wy = sy - y0;
        for (int x = 0; x < dst_w; ++x) {
            double sx = (x + 0.5) * scale_x - 0.5;
            sx = std::clamp(sx, 0.0, static_cast<double>(src_w - 1));
            const int x0 = static_cast<int>(sx);
            const int x1 = std::min(x0 + 1, src_w - 1);
            const double wx = sx - x0;
            const double top = src[y0 * src_w + x0] * (1.0 - wx) + src[y0 * src_w + x1] * wx;
            const double bot = src[y1 * src_w + x0] * (1.0 - wx) + src[y1 * src_w + x1] * wx;
            dst[static_cast<std::size_t>(y) * dst_w + x] =
                static_cast<float>(top * (1.0 - wy) + bot * wy);
        }
    }
    return dst;
}

namespace {

/// Rec.601 luminance, scaled to [0,1].
std::vector<float> decode_luminance(const std::string& image_ref, int& h, int& w) {
    cv::Mat img = cv::imread(image_ref, cv::IMREAD_COLOR);
    if (img.empty()) throw DecodeError("cannot decode image: " + image_ref);
    h = img.rows;
    w = img.cols;
    std::vector<float> gray(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y) {
        const cv::Vec3b* row = img.ptr<cv::Vec3b>(y); // BGR
        for (int x = 0; x < w; ++x) {
            const double lum = 0.114 * row[x][0] + 0.587 * row[x][1] + 0.299 * row[x][2];
            gray[static_cast<std::size_t>(y) * w + x] = static_cast<float>(lum / 255.0);
        }
    }
    return gray;
}

ImageTensor replicate3(std::vector<float>&& plane, int h, int w) {
    ImageTensor out;
    out.height = h;
    out.width = w;
    out.channels = 3;
    out.values.resize(plane.size() * 3);
    std::copy(plane.begin(), plane.end(), out.values.begin());
    std::copy(plane.begin(), plane.end(), out.values.begin() + plane.size());
    std::copy(plane.begin(), plane.end(), out.values.begin() + 2 * plane.size());
    return out;
}

} // namespace

ImageTensor decode_and_preprocess(const std::string& image_ref, int target_h, int target_w) {
    if (target_h < 1 || target_w < 1) throw ConfigError("target size must be positive");
    int h = 0, w = 0;
    std::vector<float> gray = decode_luminance(image_ref, h, w);
    if (h != target_h || w != target_w) gray = resize_bilinear(gray, h, w, target_h, target_w);
    for (float& v : gray) v = std::clamp(v, 0.0f, 1.0f);
    return replicate3(std::move(gray), target_h, target_w);
}

ImageTensor decode_grayscale(const std::string& image_ref) {
    int h = 0, w = 0;
    std::vector<float> gray = decode_luminance(image_ref, h, w);
    return replicate3(std::move(gray), h, w);
}

void encode_png(const ImageTensor& image, const std::string& path) {
    const int h = image.height, w = image.width;
    const bool mono =
        image.channels == 1 ||
        (image.channels == 3 &&
         std::equal(image.values.begin(), image.values.begin() + image.plane_size(),
                    image.values.begin() + image.plane_size()) &&
         std::equal(image.values.begin(), image.values.begin() + image.plane_size(),
                    image.values.begin() + 2 * image.plane_size()));

    cv::Mat out;
    if (mono) {
        out.create(h, w, CV_8UC1);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                out.at<std::uint8_t>(y, x) = static_cast<std::uint8_t>(
                    std::lround(std::clamp(image.at(0, y, x), 0.0f, 1.0f) * 255.0f));
    } else {
        out.create(h, w, CV_8UC3);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                auto& px = out.at<cv::Vec3b>(y, x); // BGR
                for (int c = 0; c < 3; ++c)
                    px[2 - c] = static_cast<std::uint8_t>(
                        std::lround(std::clamp(image.at(c, y, x), 0.0f, 1.0f) * 255.0f));
            }
    }
    if (!cv::imwrite(path, out)) throw IoError("cannot write image: " + path);
}

} // namespace tlbench
