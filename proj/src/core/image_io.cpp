#include "conncrack/image_io.hpp"

#include "conncrack/io_util.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cstring>

namespace conncrack::image_io {

std::string encode_pnm(const Image& img) {
    if (img.channels != 1 && img.channels != 3)
        throw ConfigError("PNM output needs 1 or 3 channels, got " + std::to_string(img.channels));
    std::string out = (img.channels == 1 ? "P5\n" : "P6\n") + std::to_string(img.width) + " " +
                      std::to_string(img.height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size());
    return out;
}

namespace {

class PnmHeaderReader {
public:
    explicit PnmHeaderReader(const std::string& b) : b_(b) {}

    void skip_space_and_comments() {
        while (pos_ < b_.size()) {
            if (std::isspace(static_cast<unsigned char>(b_[pos_]))) {
                ++pos_;
            } else if (b_[pos_] == '#') {
                while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    std::size_t number(const char* what) {
        skip_space_and_comments();
        const std::size_t start = pos_;
        std::size_t v = 0;
        while (pos_ < b_.size() && std::isdigit(static_cast<unsigned char>(b_[pos_]))) {
            v = v * 10 + static_cast<std::size_t>(b_[pos_] - '0');
            if (v > (1u << 30)) throw FormatError(std::string("PNM ") + what + " too large", static_cast<long long>(start));
            ++pos_;
        }
        if (pos_ == start) throw FormatError(std::string("PNM header: expected ") + what, static_cast<long long>(pos_));
        return v;
    }

    std::size_t pos_ = 0;

private:
    const std::string& b_;
};

} // namespace

Image decode_pnm(const std::string& bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P')
        throw FormatError("not a PNM file", 0);
    const char kind = bytes[1];
    if (kind != '2' && kind != '3' && kind != '5' && kind != '6')
        throw FormatError(std::string("unsupported PNM variant P") + kind, 1);
    const std::size_t channels = (kind == '3' || kind == '6') ? 3 : 1;
    PnmHeaderReader r(bytes);
    r.pos_ = 2;
    const std::size_t w = r.number("width");
    const std::size_t h = r.number("height");
    const std::size_t maxval = r.number("maxval");
    if (w == 0 || h == 0) throw FormatError("PNM image has zero extent", static_cast<long long>(r.pos_));
    if (maxval != 255) throw FormatError("only 8-bit PNM (maxval 255) is supported", static_cast<long long>(r.pos_));

    Image img(w, h, channels);
    if (kind == '5' || kind == '6') {
        if (r.pos_ >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[r.pos_])))
            throw FormatError("PNM header not terminated by whitespace", static_cast<long long>(r.pos_));
        const std::size_t start = r.pos_ + 1;
        const std::size_t need = img.pixels.size();
        if (bytes.size() < start + need)
            throw FormatError("PNM pixel data truncated: need " + std::to_string(need) + " bytes",
                              static_cast<long long>(bytes.size()));
        std::memcpy(img.pixels.data(), bytes.data() + start, need);
    } else {
        for (auto& p : img.pixels) {
            const std::size_t v = r.number("sample");
            if (v > 255) throw FormatError("PNM sample exceeds maxval", static_cast<long long>(r.pos_));
            p = static_cast<std::uint8_t>(v);
        }
    }
    return img;
}

namespace {

struct PngReadState {
    const std::string* data;
    std::size_t pos;
};

void png_read_from_string(png_structp png, png_bytep out, png_size_t len) {
    auto* st = static_cast<PngReadState*>(png_get_io_ptr(png));
    if (st->pos + len > st->data->size()) png_error(png, "truncated PNG stream");
    std::memcpy(out, st->data->data() + st->pos, len);
    st->pos += len;
}

void png_write_to_string(png_structp png, png_bytep in, png_size_t len) {
    auto* out = static_cast<std::string*>(png_get_io_ptr(png));
    out->append(reinterpret_cast<const char*>(in), len);
}

void png_flush_noop(png_structp) {}

[[noreturn]] void png_error_throw(png_structp png, png_const_charp msg) {
    // libpng requires this handler not to return; longjmp back to the caller.
    auto* buf = static_cast<std::string*>(png_get_error_ptr(png));
    if (buf) *buf = msg;
    png_longjmp(png, 1);
}

void png_warning_ignore(png_structp, png_const_charp) {}

} // namespace

Image decode_png(const std::string& bytes) {
    if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0)
        throw FormatError("not a PNG file", 0);
    std::string err;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_throw, png_warning_ignore);
    if (!png) throw FormatError("cannot allocate PNG decoder");
    png_infop info = png_create_info_struct(png);
    PngReadState st{&bytes, 0};
    Image img;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        const std::size_t at = st.pos;
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("PNG decode failed: " + err, static_cast<long long>(at));
    }
    png_set_read_fn(png, &st, png_read_from_string);
    png_read_info(png, info);

    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const png_byte out_color = png_get_color_type(png, info);
    img.width = png_get_image_width(png, info);
    img.height = png_get_image_height(png, info);
    img.channels = (out_color == PNG_COLOR_TYPE_GRAY) ? 1 : 3;
    if (png_get_rowbytes(png, info) != img.width * img.channels) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("unsupported PNG pixel layout");
    }
    img.pixels.resize(img.width * img.height * img.channels);
    rows.resize(img.height);
    for (std::size_t y = 0; y < img.height; ++y) rows[y] = img.pixels.data() + y * img.width * img.channels;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

std::string encode_png(const Image& img) {
    if (img.channels != 1 && img.channels != 3)
        throw ConfigError("PNG output needs 1 or 3 channels");
    std::string err;
    std::string out;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_throw, png_warning_ignore);
    if (!png) throw IoError("cannot allocate PNG encoder");
    png_infop info = png_create_info_struct(png);
    std::vector<png_bytep> rows(img.height);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG encode failed: " + err);
    }
    png_set_write_fn(png, &out, png_write_to_string, png_flush_noop);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
                 img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t y = 0; y < img.height; ++y)
        rows[y] = const_cast<png_bytep>(img.pixels.data() + y * img.width * img.channels);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

namespace {

std::string lower_ext(const std::filesystem::path& p) {
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return e;
}

} // namespace

Image load_image(const std::filesystem::path& path) {
    const std::string bytes = io::read_file(path);
    try {
        if (bytes.size() >= 8 && static_cast<unsigned char>(bytes[0]) == 0x89 && bytes.compare(1, 3, "PNG") == 0)
            return decode_png(bytes);
        return decode_pnm(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void save_image(const Image& img, const std::filesystem::path& path) {
    const std::string ext = lower_ext(path);
    if (ext == ".png") {
        io::write_file_atomic(path, encode_png(img));
    } else if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") {
        io::write_file_atomic(path, encode_pnm(img));
    } else {
        throw ConfigError("unsupported image extension '" + ext + "' (use .png, .pgm or .ppm)");
    }
}

BinaryMask load_mask(const std::filesystem::path& path) {
    return mask_from_image(load_image(path));
}

} // namespace conncrack::image_io
