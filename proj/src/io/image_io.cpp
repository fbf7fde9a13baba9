#include <gsopt/core/errors.hpp>
#include <gsopt/io/image_io.hpp>

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

namespace gsopt {

namespace {

struct FileCloser {
    void operator()(std::FILE *f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::uint8_t encode_byte(double linear) {
    return static_cast<std::uint8_t>(std::lround(linear_to_encoded(linear) * 255.0));
}

const std::vector<double> &decode_table() {
    static const std::vector<double> table = [] {
        std::vector<double> t(256);
        for (int i = 0; i < 256; ++i) {
            t[i] = encoded_to_linear(i / 255.0);
        }
        return t;
    }();
    return table;
}

} // namespace

double linear_to_encoded(double v) { return std::pow(std::clamp(v, 0.0, 1.0), 1.0 / kDisplayGamma); }

double encoded_to_linear(double v) { return std::pow(std::clamp(v, 0.0, 1.0), kDisplayGamma); }

void save_png(const Image &image, const std::string &path) {
    if (image.channels() != 3 || image.empty()) {
        throw InvalidParameter("save_png: expected a non-empty RGB image");
    }
    FilePtr file(std::fopen(path.c_str(), "wb"));
    if (!file) {
        throw FormatError("cannot open '" + path + "' for writing");
    }
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw FormatError("libpng initialization failed");
    }
    std::vector<std::uint8_t> rows(image.pixel_count() * 3);
    const auto d = image.data();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        rows[i] = encode_byte(d[i]);
    }
    std::vector<png_bytep> row_ptrs(static_cast<std::size_t>(image.height()));
    for (int y = 0; y < image.height(); ++y) {
        row_ptrs[y] = rows.data() + static_cast<std::size_t>(y) * image.width() * 3;
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw FormatError("failed writing PNG '" + path + "'");
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, image.width(), image.height(), 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, row_ptrs.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image load_png(const std::string &path) {
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) {
        throw FormatError("cannot open image '" + path + "'");
    }
    png_byte sig[8];
    if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        throw FormatError("'" + path + "' is not a PNG file");
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("libpng initialization failed");
    }
    std::vector<std::uint8_t> rows;
    std::vector<png_bytep> row_ptrs;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("corrupt PNG '" + path + "'");
    }
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    const int color = png_get_color_type(png, info);
    if (png_get_bit_depth(png, info) == 16) {
        png_set_strip_16(png);
    }
    if (color == PNG_COLOR_TYPE_PALETTE) {
        png_set_palette_to_rgb(png);
    }
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
        png_set_expand_gray_1_2_4_to_8(png);
        png_set_gray_to_rgb(png);
    }
    if (color & PNG_COLOR_MASK_ALPHA) {
        png_set_strip_alpha(png);
    }
    png_read_update_info(png, info);
    if (png_get_rowbytes(png, info) != static_cast<std::size_t>(width) * 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("unsupported PNG layout in '" + path + "'");
    }
    rows.resize(static_cast<std::size_t>(width) * height * 3);
    row_ptrs.resize(height);
    for (png_uint_32 y = 0; y < height; ++y) {
        row_ptrs[y] = rows.data() + static_cast<std::size_t>(y) * width * 3;
    }
    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Image image(static_cast<int>(width), static_cast<int>(height), 3);
    auto d = image.data();
    const auto &table = decode_table();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        d[i] = table[rows[i]];
    }
    return image;
}

Image png_round_trip(const Image &image) {
    Image out = image;
    const auto &table = decode_table();
    for (double &v : out.data()) {
        v = table[encode_byte(v)];
    }
    return out;
}

} // namespace gsopt
