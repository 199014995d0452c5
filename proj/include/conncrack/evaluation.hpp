#pragma once

#include "conncrack/image.hpp"

#include <optional>
#include <string>
#include <vector>

namespace conncrack::eval {

/// Squared Euclidean distance from every pixel to the nearest crack pixel of
/// `mask` (exact, separable lower-envelope transform). Pixels are at
/// infinity (a large sentinel) when the mask is empty.
std::vector<double> squared_distance_transform(const BinaryMask& mask);

struct MetricsReport {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double tolerance_px = 5.0;

    /// Fill precision/recall/f1 from the counts. Both masks empty gives
    /// 1/1/1; no prediction against a nonempty truth gives 0/0/0.
    void finalize();
};

/// TP: predicted crack pixels within `tol` (Euclidean) of some truth pixel.
/// FP: the other predicted crack pixels. FN: truth crack pixels with no
/// predicted pixel within `tol`. Matching is many-to-one.
MetricsReport tolerance_metrics(const BinaryMask& pred, const BinaryMask& gt, double tol = 5.0);

/// Sum counts (then recompute ratios) over several images.
MetricsReport accumulate(const std::vector<MetricsReport>& reports);

struct RegionCell {
    std::size_t y0 = 0, x0 = 0, height = 0, width = 0;
    /// Empty when neither truth nor prediction has crack pixels in the cell.
    std::optional<MetricsReport> metrics;
};

struct RegionGrid {
    std::size_t rows = 0, cols = 0;
    std::vector<RegionCell> cells;  // row-major

    const RegionCell& at(std::size_t r, std::size_t c) const { return cells[r * cols + c]; }
    /// row,col,y0,x0,height,width,tp,fp,fn,precision,recall,f1 with empty
    /// metric fields for "no cracks" cells.
    std::string to_csv() const;
};

/// Cells of floor(H / rows) x floor(W / cols); the last row and column absorb
/// the remainder. Matching is restricted to each cell.
RegionGrid region_grid(const BinaryMask& pred, const BinaryMask& gt, std::size_t rows = 9,
                       std::size_t cols = 16, double tol = 5.0);

// ---------------------------------------------------------------------------
// Rule-based baselines

/// Sobel gradient magnitude of the luminance (replicate border).
std::vector<float> sobel_magnitude(const Image& image);
/// Crack where the magnitude reaches `threshold`.
BinaryMask sobel_baseline(const Image& image, double threshold);

/// Gaussian smoothing (sigma; no smoothing at sigma 0), Sobel gradient,
/// non-maximum suppression along the quantised gradient direction, then
/// hysteresis: pixels >= high seed, 8-connected pixels >= low grow.
BinaryMask canny_baseline(const Image& image, double low, double high, double sigma = 1.4);

// ---------------------------------------------------------------------------
// Comparison table

struct ReportRow {
    std::string name;
    MetricsReport metrics;
    double sec_per_image = 0.0;
};

/// name,precision,recall,f1,efficiency
std::string report_table(const std::vector<ReportRow>& rows);
/// Parses report_table output (counts are not stored and come back zero).
std::vector<ReportRow> parse_report_table(const std::string& csv);

} // namespace conncrack::eval
