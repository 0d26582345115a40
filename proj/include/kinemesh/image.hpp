#pragma once

#include <cstddef>
#include <vector>

namespace kinemesh {

// Row-major float32 image, origin top-left, interleaved channels.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<float> data;

    Image() = default;
    Image(int w, int h, int c, float fill = 0.0f)
        : width(w), height(h), channels(c), data(static_cast<size_t>(w) * h * c, fill) {}

    size_t pixel_count() const { return static_cast<size_t>(width) * static_cast<size_t>(height); }
    size_t index(int x, int y, int c = 0) const {
        return (static_cast<size_t>(y) * static_cast<size_t>(width) + static_cast<size_t>(x)) *
                   static_cast<size_t>(channels) + static_cast<size_t>(c);
    }
    float& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
    float at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }
    bool same_shape(const Image& o) const { return width == o.width && height == o.height && channels == o.channels; }
};

// Integer label map; -1 marks background.
struct LabelMap {
    int width = 0;
    int height = 0;
    std::vector<int> labels;

    LabelMap() = default;
    LabelMap(int w, int h, int fill = -1) : width(w), height(h), labels(static_cast<size_t>(w) * h, fill) {}
    int& at(int x, int y) { return labels[static_cast<size_t>(y) * static_cast<size_t>(width) + static_cast<size_t>(x)]; }
    int at(int x, int y) const { return labels[static_cast<size_t>(y) * static_cast<size_t>(width) + static_cast<size_t>(x)]; }
};

}  // namespace kinemesh
