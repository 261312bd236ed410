#pragma once

#include <vector>

namespace semcom {

// Row-major H x W x C raster with values in [0, 1].
struct Image {
    int h = 0;
    int w = 0;
    int c = 0;
    std::vector<double> px;

    Image() = default;
    Image(int h_, int w_, int c_) : h(h_), w(w_), c(c_), px(static_cast<size_t>(h_) * w_ * c_, 0.0) {}

    double& at(int y, int x, int ch) { return px[(static_cast<size_t>(y) * w + x) * c + ch]; }
    double at(int y, int x, int ch) const { return px[(static_cast<size_t>(y) * w + x) * c + ch]; }
};

}  // namespace semcom
