#include "vton/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "vton/error.hpp"

namespace vton {

namespace {

std::uint8_t to_byte(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const void* data, std::size_t size) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
}

struct DecodedPng {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;
};

DecodedPng decode(const std::vector<std::uint8_t>& bytes, png_uint_32 format, int channels,
                  const std::string& what) {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
        throw InputError("invalid PNG " + what + ": " + image.message);
    }
    image.format = format;
    DecodedPng out;
    out.width = static_cast<int>(image.width);
    out.height = static_cast<int>(image.height);
    out.pixels.resize(static_cast<std::size_t>(out.width) * out.height * channels);
    if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
        png_image_free(&image);
        throw InputError("failed to decode PNG " + what + ": " + image.message);
    }
    return out;
}

std::vector<std::uint8_t> encode(const std::vector<std::uint8_t>& pixels, int width, int height,
                                 png_uint_32 format) {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(width);
    image.height = static_cast<png_uint_32>(height);
    image.format = format;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
        throw std::runtime_error(std::string("PNG encode failed: ") + image.message);
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels.data(), 0, nullptr)) {
        throw std::runtime_error(std::string("PNG encode failed: ") + image.message);
    }
    out.resize(size);
    return out;
}

}  // namespace

RgbImage decode_png(const std::vector<std::uint8_t>& bytes) {
    auto png = decode(bytes, PNG_FORMAT_RGB, 3, "image");
    RgbImage img(png.height, png.width);
    auto values = img.values();
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = png.pixels[i] / 255.0;
    return img;
}

RgbImage read_png(const std::filesystem::path& path) {
    try {
        return decode_png(read_file(path));
    } catch (const InputError& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

std::vector<std::uint8_t> encode_png(const RgbImage& image) {
    std::vector<std::uint8_t> pixels(image.values().size());
    std::transform(image.values().begin(), image.values().end(), pixels.begin(), to_byte);
    return encode(pixels, image.width(), image.height(), PNG_FORMAT_RGB);
}

void write_png(const std::filesystem::path& path, const RgbImage& image) {
    auto bytes = encode_png(image);
    write_file(path, bytes.data(), bytes.size());
}

GrayMask read_mask_png(const std::filesystem::path& path) {
    auto png = decode(read_file(path), PNG_FORMAT_GRAY, 1, path.string());
    GrayMask mask(png.height, png.width);
    for (int y = 0; y < png.height; ++y) {
        for (int x = 0; x < png.width; ++x) {
            mask.set(y, x, png.pixels[static_cast<std::size_t>(y) * png.width + x] >= 128);
        }
    }
    return mask;
}

void write_mask_png(const std::filesystem::path& path, const GrayMask& mask) {
    std::vector<std::uint8_t> pixels(mask.values().size());
    std::transform(mask.values().begin(), mask.values().end(), pixels.begin(),
                   [](std::uint8_t v) { return static_cast<std::uint8_t>(v ? 255 : 0); });
    auto bytes = encode(pixels, mask.width(), mask.height(), PNG_FORMAT_GRAY);
    write_file(path, bytes.data(), bytes.size());
}

}  // namespace vton
