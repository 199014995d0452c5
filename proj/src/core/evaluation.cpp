#include "conncrack/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

namespace conncrack::eval {

namespace {

constexpr double kFar = 1e20;

// Lower envelope of parabolas over one row or column (Felzenszwalb and
// Huttenlocher). f and d have length n; v and z are scratch.
void edt_1d(const double* f, double* d, std::size_t n, std::vector<std::size_t>& v, std::vector<double>& z) {
    v.resize(n);
    z.resize(n + 1);
    std::size_t k = 0;
    v[0] = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    for (std::size_t q = 1; q < n; ++q) {
        const double dq = static_cast<double>(q);
        double s;
        for (;;) {
            const double dv = static_cast<double>(v[k]);
            s = ((f[q] + dq * dq) - (f[v[k]] + dv * dv)) / (2.0 * dq - 2.0 * dv);
            if (s > z[k]) break;
            --k;  // z[0] is -inf, so this never runs past the first parabola
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (std::size_t q = 0; q < n; ++q) {
        while (z[k + 1] < static_cast<double>(q)) ++k;
        const double diff = static_cast<double>(q) - static_cast<double>(v[k]);
        d[q] = diff * diff + f[v[k]];
    }
}

void require_same_shape(const BinaryMask& a, const BinaryMask& b) {
    if (a.height() != b.height() || a.width() != b.width())
        throw DimensionError("mask shapes differ: " + std::to_string(a.height()) + "x" + std::to_string(a.width()) +
                             " vs " + std::to_string(b.height()) + "x" + std::to_string(b.width()));
}

std::string shortest(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

} // namespace

std::vector<double> squared_distance_transform(const BinaryMask& mask) {
    const std::size_t H = mask.height(), W = mask.width();
    std::vector<double> out(H * W);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = mask.values()[i] ? 0.0 : kFar;
    if (H == 0 || W == 0) return out;

    std::vector<std::size_t> v;
    std::vector<double> z;
    std::vector<double> f(std::max(H, W)), d(std::max(H, W));
    for (std::size_t x = 0; x < W; ++x) {
        for (std::size_t y = 0; y < H; ++y) f[y] = out[y * W + x];
        edt_1d(f.data(), d.data(), H, v, z);
        for (std::size_t y = 0; y < H; ++y) out[y * W + x] = d[y];
    }
    for (std::size_t y = 0; y < H; ++y) {
        std::copy_n(out.data() + y * W, W, f.data());
        edt_1d(f.data(), d.data(), W, v, z);
        std::copy_n(d.data(), W, out.data() + y * W);
    }
    for (auto& o : out) o = std::min(o, kFar);
    return out;
}

void MetricsReport::finalize() {
    const double p_den = static_cast<double>(tp + fp);
    const double r_den = static_cast<double>(tp + fn);
    if (tp + fp == 0 && fn == 0) {
        precision = recall = f1 = 1.0;
        return;
    }
    precision = p_den > 0.0 ? static_cast<double>(tp) / p_den : 0.0;
    // tp + fn == 0 only when the truth is empty and everything predicted is
    // a false positive; nothing was missed, so recall is 1.
    recall = r_den > 0.0 ? static_cast<double>(tp) / r_den : 1.0;
    f1 = (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

MetricsReport tolerance_metrics(const BinaryMask& pred, const BinaryMask& gt, double tol) {
    require_same_shape(pred, gt);
    if (!(tol >= 0.0)) throw ConfigError("tolerance must be non-negative");
    MetricsReport r;
    r.tolerance_px = tol;
    // Squared distances are integers, so the slack only absorbs rounding in tol * tol.
    const double limit = tol * tol + 1e-9;
    const std::size_t n_pred = pred.count(), n_gt = gt.count();
    if (n_pred > 0) {
        if (n_gt == 0) {
            r.fp = n_pred;
        } else {
            const auto to_gt = squared_distance_transform(gt);
            for (std::size_t i = 0; i < to_gt.size(); ++i)
                if (pred.values()[i]) (to_gt[i] <= limit ? r.tp : r.fp) += 1;
        }
    }
    if (n_gt > 0) {
        if (n_pred == 0) {
            r.fn = n_gt;
        } else {
            const auto to_pred = squared_distance_transform(pred);
            for (std::size_t i = 0; i < to_pred.size(); ++i)
                if (gt.values()[i] && to_pred[i] > limit) ++r.fn;
        }
    }
    r.finalize();
    return r;
}

MetricsReport accumulate(const std::vector<MetricsReport>& reports) {
    MetricsReport total;
    if (!reports.empty()) total.tolerance_px = reports.front().tolerance_px;
    for (const auto& r : reports) {
        total.tp += r.tp;
        total.fp += r.fp;
        total.fn += r.fn;
    }
    total.finalize();
    return total;
}

std::string RegionGrid::to_csv() const {
    std::ostringstream os;
    os << "row,col,y0,x0,height,width,tp,fp,fn,precision,recall,f1\n";
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
            const auto& cell = at(r, c);
            os << r << ',' << c << ',' << cell.y0 << ',' << cell.x0 << ',' << cell.height << ',' << cell.width;
            if (cell.metrics) {
                const auto& m = *cell.metrics;
                os << ',' << m.tp << ',' << m.fp << ',' << m.fn << ',' << shortest(m.precision) << ','
                   << shortest(m.recall) << ',' << shortest(m.f1);
            } else {
                os << ",,,,,,";
            }
            os << '\n';
        }
    return os.str();
}

RegionGrid region_grid(const BinaryMask& pred, const BinaryMask& gt, std::size_t rows, std::size_t cols, double tol) {
    require_same_shape(pred, gt);
    if (rows == 0 || cols == 0) throw ConfigError("region grid needs at least one row and column");
    if (rows > gt.height() || cols > gt.width())
        throw ConfigError("region grid " + std::to_string(rows) + "x" + std::to_string(cols) +
                          " is finer than the image");
    RegionGrid g;
    g.rows = rows;
    g.cols = cols;
    const std::size_t ch = gt.height() / rows, cw = gt.width() / cols;
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
            RegionCell cell;
            cell.y0 = r * ch;
            cell.x0 = c * cw;
            cell.height = r + 1 == rows ? gt.height() - cell.y0 : ch;
            cell.width = c + 1 == cols ? gt.width() - cell.x0 : cw;
            const BinaryMask p = pred.crop(cell.y0, cell.x0, cell.height, cell.width);
            const BinaryMask t = gt.crop(cell.y0, cell.x0, cell.height, cell.width);
            if (p.count() > 0 || t.count() > 0) cell.metrics = tolerance_metrics(p, t, tol);
            g.cells.push_back(std::move(cell));
        }
    return g;
}

// ---------------------------------------------------------------------------

namespace {

struct Plane {
    std::size_t h = 0, w = 0;
    std::vector<float> v;

    float clamped(long y, long x) const {
        y = std::clamp(y, 0L, static_cast<long>(h) - 1);
        x = std::clamp(x, 0L, static_cast<long>(w) - 1);
        return v[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)];
    }
};

Plane luminance_plane(const Image& image) {
    if (image.width == 0 || image.height == 0) throw DimensionError("empty image");
    return {image.height, image.width, to_luminance(image)};
}

void sobel(const Plane& p, std::vector<float>& gx, std::vector<float>& gy) {
    gx.assign(p.v.size(), 0.0f);
    gy.assign(p.v.size(), 0.0f);
    for (std::size_t y = 0; y < p.h; ++y)
        for (std::size_t x = 0; x < p.w; ++x) {
            const long yy = static_cast<long>(y), xx = static_cast<long>(x);
            auto a = [&](long dy, long dx) { return p.clamped(yy + dy, xx + dx); };
            gx[y * p.w + x] = (a(-1, 1) + 2.0f * a(0, 1) + a(1, 1)) - (a(-1, -1) + 2.0f * a(0, -1) + a(1, -1));
            gy[y * p.w + x] = (a(1, -1) + 2.0f * a(1, 0) + a(1, 1)) - (a(-1, -1) + 2.0f * a(-1, 0) + a(-1, 1));
        }
}

Plane gaussian_blur(const Plane& p, double sigma) {
    if (sigma <= 0.0) return p;
    const long radius = static_cast<long>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (long i = -radius; i <= radius; ++i) {
        const double v = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
        k[static_cast<std::size_t>(i + radius)] = v;
        sum += v;
    }
    for (auto& v : k) v /= sum;
    Plane tmp = p, out = p;
    for (std::size_t y = 0; y < p.h; ++y)
        for (std::size_t x = 0; x < p.w; ++x) {
            double acc = 0.0;
            for (long i = -radius; i <= radius; ++i)
                acc += k[static_cast<std::size_t>(i + radius)] * p.clamped(static_cast<long>(y), static_cast<long>(x) + i);
            tmp.v[y * p.w + x] = static_cast<float>(acc);
        }
    for (std::size_t y = 0; y < p.h; ++y)
        for (std::size_t x = 0; x < p.w; ++x) {
            double acc = 0.0;
            for (long i = -radius; i <= radius; ++i)
                acc += k[static_cast<std::size_t>(i + radius)] * tmp.clamped(static_cast<long>(y) + i, static_cast<long>(x));
            out.v[y * p.w + x] = static_cast<float>(acc);
        }
    return out;
}

} // namespace

std::vector<float> sobel_magnitude(const Image& image) {
    const Plane p = luminance_plane(image);
    std::vector<float> gx, gy;
    sobel(p, gx, gy);
    std::vector<float> m(p.v.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = std::sqrt(gx[i] * gx[i] + gy[i] * gy[i]);
    return m;
}

BinaryMask sobel_baseline(const Image& image, double threshold) {
    const auto m = sobel_magnitude(image);
    BinaryMask out(image.height, image.width);
    for (std::size_t y = 0; y < image.height; ++y)
        for (std::size_t x = 0; x < image.width; ++x)
            out.set(y, x, static_cast<double>(m[y * image.width + x]) >= threshold);
    return out;
}

BinaryMask canny_baseline(const Image& image, double low, double high, double sigma) {
    if (!(sigma >= 0.0)) throw ConfigError("canny sigma must be non-negative");
    if (!(low >= 0.0) || !(high >= low)) throw ConfigError("canny thresholds must satisfy 0 <= low <= high");
    const Plane p = gaussian_blur(luminance_plane(image), sigma);
    std::vector<float> gx, gy;
    sobel(p, gx, gy);
    const std::size_t H = p.h, W = p.w;
    std::vector<float> mag(H * W);
    for (std::size_t i = 0; i < mag.size(); ++i) mag[i] = std::sqrt(gx[i] * gx[i] + gy[i] * gy[i]);
    auto m_at = [&](long y, long x) -> float {
        if (y < 0 || x < 0 || y >= static_cast<long>(H) || x >= static_cast<long>(W)) return 0.0f;
        return mag[static_cast<std::size_t>(y) * W + static_cast<std::size_t>(x)];
    };

    // Non-maximum suppression. Ties keep the pixel on the lower-index side
    // of the pair, so a symmetric ridge stays one pixel wide.
    std::vector<float> thin(H * W, 0.0f);
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
            const float m = mag[y * W + x];
            if (m <= 0.0f) continue;
            double angle = std::atan2(static_cast<double>(gy[y * W + x]), static_cast<double>(gx[y * W + x])) * 180.0 / 3.141592653589793;
            if (angle < 0.0) angle += 180.0;
            int dy, dx;
            if (angle < 22.5 || angle >= 157.5) {
                dy = 0; dx = 1;
            } else if (angle < 67.5) {
                dy = 1; dx = 1;
            } else if (angle < 112.5) {
                dy = 1; dx = 0;
            } else {
                dy = 1; dx = -1;
            }
            const long yy = static_cast<long>(y), xx = static_cast<long>(x);
            const float before = m_at(yy - dy, xx - dx), after = m_at(yy + dy, xx + dx);
            if (m > before && m >= after) thin[y * W + x] = m;
        }

    BinaryMask out(H, W);
    std::vector<std::size_t> stack;
    for (std::size_t i = 0; i < thin.size(); ++i)
        if (thin[i] > 0.0f && static_cast<double>(thin[i]) >= high && !out.values()[i]) {
            out.set(i / W, i % W, true);
            stack.push_back(i);
            while (!stack.empty()) {
                const std::size_t j = stack.back();
                stack.pop_back();
                const long cy = static_cast<long>(j / W), cx = static_cast<long>(j % W);
                for (long dy = -1; dy <= 1; ++dy)
                    for (long dx = -1; dx <= 1; ++dx) {
                        const long ny = cy + dy, nx = cx + dx;
                        if (ny < 0 || nx < 0 || ny >= static_cast<long>(H) || nx >= static_cast<long>(W)) continue;
                        const std::size_t k = static_cast<std::size_t>(ny) * W + static_cast<std::size_t>(nx);
                        if (!out.values()[k] && thin[k] > 0.0f && static_cast<double>(thin[k]) >= low) {
                            out.set(static_cast<std::size_t>(ny), static_cast<std::size_t>(nx), true);
                            stack.push_back(k);
                        }
                    }
            }
        }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    if (quoted) throw FormatError("unterminated quote on report line " + std::to_string(line_no));
    fields.push_back(std::move(cur));
    return fields;
}

double parse_number(const std::string& s, std::size_t line_no) {
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw FormatError("bad number '" + s + "' on report line " + std::to_string(line_no));
    return v;
}

constexpr const char* kReportHeader = "name,precision,recall,f1,efficiency";

} // namespace

std::string report_table(const std::vector<ReportRow>& rows) {
    std::string out = std::string(kReportHeader) + "\n";
    for (const auto& r : rows)
        out += csv_field(r.name) + "," + shortest(r.metrics.precision) + "," + shortest(r.metrics.recall) + "," +
               shortest(r.metrics.f1) + "," + shortest(r.sec_per_image) + "\n";
    return out;
}

std::vector<ReportRow> parse_report_table(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line) || split_csv_line(line, 1) != split_csv_line(kReportHeader, 1))
        throw FormatError("report table header must be '" + std::string(kReportHeader) + "'");
    std::vector<ReportRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv_line(line, line_no);
        if (f.size() != 5) throw FormatError("report line " + std::to_string(line_no) + " needs 5 fields");
        ReportRow r;
        r.name = f[0];
        r.metrics.precision = parse_number(f[1], line_no);
        r.metrics.recall = parse_number(f[2], line_no);
        r.metrics.f1 = parse_number(f[3], line_no);
        r.sec_per_image = parse_number(f[4], line_no);
        rows.push_back(std::move(r));
    }
    return rows;
}

} // namespace conncrack::eval
