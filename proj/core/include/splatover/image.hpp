// Copyright Contributors to the splatover project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace splatover {

/// Row-major interleaved image: element (x, y, c) at ((y * width + x) * channels + c).
template <typename T>
struct Image {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<T> data;

    Image() = default;
    Image(int w, int h, int c, T fill = T{})
        : width(w), height(h), channels(c),
          data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * static_cast<std::size_t>(c), fill) {}

    [[nodiscard]] std::size_t index(int x, int y, int c = 0) const {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) *
                   static_cast<std::size_t>(channels) +
               static_cast<std::size_t>(c);
    }
    T &at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
    const T &at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }
    [[nodiscard]] bool empty() const noexcept { return data.empty(); }

    bool operator==(const Image &) const = default;
};

using ImageF = Image<float>;
using Image8 = Image<std::uint8_t>;

/// Rounds [0,1] floats to 8 bits (values outside are clamped).
Image8 to_8bit(const ImageF &image);
/// Binary {0,1} mask to 0/255 for display.
Image8 mask_to_display(const Image8 &binary_mask);

/// 8-bit PNG with 1 (gray) or 3 (RGB) channels. Throws IoError.
void write_png(const std::filesystem::path &path, const Image8 &image);
Image8 read_png(const std::filesystem::path &path);

} // namespace splatover
