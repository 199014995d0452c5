#include "doctest.h"

#include "support.hpp"

#include "conncrack/evaluation.hpp"

#include <cmath>
#include <limits>

using namespace conncrack;
using namespace conncrack::eval;

namespace {

void check_against_brute(const BinaryMask& pred, const BinaryMask& gt, double tol) {
    const auto r = tolerance_metrics(pred, gt, tol);
    const auto b = testsupport::brute_metrics(pred, gt, tol);
    REQUIRE(r.tp == b.tp);
    REQUIRE(r.fp == b.fp);
    REQUIRE(r.fn == b.fn);
}

Image step_image(std::size_t n, std::size_t edge_col) {
    Image img(n, n, 1);
    for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = edge_col; x < n; ++x) img.at(y, x, 0) = 255;
    return img;
}

} // namespace

TEST_CASE("distance transform equals the all-pairs minimum") {
    Rng rng(71);
    for (int t = 0; t < 300; ++t) {
        const auto m = testsupport::random_shaped_mask(rng, 12, 12);
        const auto d = squared_distance_transform(m);
        for (std::size_t y = 0; y < m.height(); ++y)
            for (std::size_t x = 0; x < m.width(); ++x) {
                double best = std::numeric_limits<double>::infinity();
                for (std::size_t v = 0; v < m.height(); ++v)
                    for (std::size_t u = 0; u < m.width(); ++u)
                        if (m.get(static_cast<long>(v), static_cast<long>(u))) {
                            const double dy = double(y) - double(v), dx = double(x) - double(u);
                            best = std::min(best, dy * dy + dx * dx);
                        }
                if (std::isinf(best))
                    CHECK(d[y * m.width() + x] > 1e12);
                else
                    REQUIRE(d[y * m.width() + x] == best);
            }
    }
}

TEST_CASE("tolerance metrics equal the all-pairs oracle") {
    Rng rng(72);
    for (int t = 0; t < 1000; ++t) {
        const auto gt = testsupport::random_shaped_mask(rng, 32, 32);
        auto pred = testsupport::random_mask(rng, gt.height(), gt.width(), rng.uniform(0.0, 0.4));
        for (double tol : {0.0, 3.0, 5.0}) check_against_brute(pred, gt, tol);
    }
}

TEST_CASE("identical masks score one at any tolerance") {
    Rng rng(73);
    const auto m = testsupport::random_mask(rng, 20, 20, 0.2);
    for (double tol : {0.0, 1.5, 5.0, 100.0}) {
        const auto r = tolerance_metrics(m, m, tol);
        CHECK(r.precision == 1.0);
        CHECK(r.recall == 1.0);
        CHECK(r.f1 == 1.0);
        CHECK(r.tolerance_px == tol);
    }
}

TEST_CASE("a line shifted by three pixels is fully matched at tolerance five") {
    BinaryMask gt(20, 20), pred(20, 20);
    for (std::size_t x = 2; x < 15; ++x) {
        gt.set(10, x, true);
        pred.set(10, x + 3, true);
    }
    const auto r = tolerance_metrics(pred, gt, 5.0);
    CHECK(r.tp == 13);
    CHECK(r.fp == 0);
    CHECK(r.fn == 0);
    check_against_brute(pred, gt, 5.0);
    const auto tight = tolerance_metrics(pred, gt, 2.0);
    CHECK(tight.tp == 12);
    CHECK(tight.fp == 1);
    CHECK(tight.fn == 1);
    check_against_brute(pred, gt, 2.0);
}

TEST_CASE("empty mask conventions") {
    BinaryMask empty(8, 8), some(8, 8);
    some.set(3, 3, true);
    const auto both = tolerance_metrics(empty, empty);
    CHECK(both.precision == 1.0);
    CHECK(both.recall == 1.0);
    CHECK(both.f1 == 1.0);
    const auto miss = tolerance_metrics(empty, some);
    CHECK(miss.precision == 0.0);
    CHECK(miss.recall == 0.0);
    CHECK(miss.f1 == 0.0);
    CHECK(miss.fn == 1);
    const auto spurious = tolerance_metrics(some, empty);
    CHECK(spurious.precision == 0.0);
    CHECK(spurious.f1 == 0.0);
    CHECK(spurious.fp == 1);
    CHECK_THROWS_AS(tolerance_metrics(BinaryMask(8, 9), empty), DimensionError);
    CHECK_THROWS_AS(tolerance_metrics(empty, empty, -1.0), ConfigError);
}

TEST_CASE("zero tolerance is exact set arithmetic and swaps roles") {
    Rng rng(74);
    for (int t = 0; t < 200; ++t) {
        const auto a = testsupport::random_mask(rng, 16, 16, 0.3);
        const auto b = testsupport::random_mask(rng, 16, 16, 0.3);
        std::size_t inter = 0;
        for (std::size_t i = 0; i < a.values().size(); ++i) inter += a.values()[i] && b.values()[i];
        const auto r = tolerance_metrics(a, b, 0.0);
        CHECK(r.tp == inter);
        CHECK(r.fp == a.count() - inter);
        CHECK(r.fn == b.count() - inter);
        const auto s = tolerance_metrics(b, a, 0.0);
        CHECK(s.fp == r.fn);
        CHECK(s.fn == r.fp);
        if (a.count() && b.count()) {
            CHECK(s.precision == doctest::Approx(r.recall));
            CHECK(s.recall == doctest::Approx(r.precision));
        }
    }
}

TEST_CASE("precision and recall do not decrease with tolerance") {
    Rng rng(75);
    for (int t = 0; t < 100; ++t) {
        const auto a = testsupport::random_mask(rng, 24, 24, 0.05);
        const auto b = testsupport::random_mask(rng, 24, 24, 0.05);
        double p = -1, r = -1;
        for (double tol : {0.0, 1.0, 1.5, 2.0, 3.0, 5.0, 8.0}) {
            const auto m = tolerance_metrics(a, b, tol);
            CHECK(m.precision >= p);
            CHECK(m.recall >= r);
            p = m.precision;
            r = m.recall;
        }
    }
}

TEST_CASE("f1 is the harmonic mean and accumulation sums counts") {
    MetricsReport m;
    m.tp = 6;
    m.fp = 2;
    m.fn = 4;
    m.finalize();
    CHECK(m.precision == doctest::Approx(0.75));
    CHECK(m.recall == doctest::Approx(0.6));
    CHECK(m.f1 == doctest::Approx(2 * 0.75 * 0.6 / 1.35));
    MetricsReport n;
    n.tp = 4;
    n.fp = 8;
    n.finalize();
    const auto sum = accumulate({m, n});
    CHECK(sum.tp == 10);
    CHECK(sum.fp == 10);
    CHECK(sum.fn == 4);
    CHECK(sum.precision == doctest::Approx(0.5));
}

TEST_CASE("region grid geometry") {
    const auto g = region_grid(BinaryMask(1080, 1920), BinaryMask(1080, 1920));
    CHECK(g.rows == 9);
    CHECK(g.cols == 16);
    REQUIRE(g.cells.size() == 144);
    for (const auto& c : g.cells) {
        CHECK(c.height == 120);
        CHECK(c.width == 120);
        CHECK_FALSE(c.metrics.has_value());
    }
    // Remainders go to the last row and column; cells tile the image exactly.
    const auto r = region_grid(BinaryMask(23, 37), BinaryMask(23, 37), 4, 5);
    std::vector<int> cover(23 * 37, 0);
    for (const auto& c : r.cells)
        for (std::size_t y = c.y0; y < c.y0 + c.height; ++y)
            for (std::size_t x = c.x0; x < c.x0 + c.width; ++x) ++cover[y * 37 + x];
    for (int v : cover) CHECK(v == 1);
    CHECK(r.at(3, 4).height == 23 - 3 * 5);
    CHECK(r.at(3, 4).width == 37 - 4 * 7);
    CHECK_THROWS_AS(region_grid(BinaryMask(4, 4), BinaryMask(4, 5)), DimensionError);
}

TEST_CASE("region grid cells match within their own bounds") {
    Rng rng(76);
    const auto gt = testsupport::random_mask(rng, 36, 48, 0.05);
    const auto perfect = region_grid(gt, gt, 3, 4);
    for (const auto& c : perfect.cells)
        if (c.metrics) CHECK(c.metrics->f1 == 1.0);

    const auto pred = testsupport::random_mask(rng, 36, 48, 0.05);
    const auto grid = region_grid(pred, gt, 3, 4, 2.0);
    for (const auto& c : grid.cells) {
        const auto p = pred.crop(c.y0, c.x0, c.height, c.width);
        const auto t = gt.crop(c.y0, c.x0, c.height, c.width);
        if (p.count() == 0 && t.count() == 0) {
            CHECK_FALSE(c.metrics.has_value());
            continue;
        }
        REQUIRE(c.metrics.has_value());
        const auto b = testsupport::brute_metrics(p, t, 2.0);
        CHECK(c.metrics->tp == b.tp);
        CHECK(c.metrics->fp == b.fp);
        CHECK(c.metrics->fn == b.fn);
    }
    const std::string csv = grid.to_csv();
    CHECK(csv.rfind("row,col,y0,x0,height,width,tp,fp,fn,precision,recall,f1\n", 0) == 0);
    std::size_t lines = 0;
    for (char ch : csv) lines += ch == '\n';
    CHECK(lines == 13);
}

TEST_CASE("edge baselines on constant and step images") {
    const Image flat(12, 12, 3, 90);
    CHECK(sobel_baseline(flat, 1.0).count() == 0);
    CHECK(canny_baseline(flat, 1.0, 2.0).count() == 0);
    CHECK(sobel_baseline(flat, 0.0).count() == 144);

    // Hand-computed: columns 3 and 4 see the step with |gx| = 4 * 255 and
    // every other column has zero gradient.
    const auto img = step_image(8, 4);
    const auto mag = sobel_magnitude(img);
    for (std::size_t y = 0; y < 8; ++y)
        for (std::size_t x = 0; x < 8; ++x) {
            const double expect = (x == 3 || x == 4) ? 1020.0 : 0.0;
            CHECK(mag[y * 8 + x] == doctest::Approx(expect).epsilon(1e-5));
        }
    const auto sob = sobel_baseline(img, 500.0);
    CHECK(sob.count() == 16);

    // After suppression one column survives: the tie keeps the left pixel.
    const auto canny = canny_baseline(img, 100.0, 500.0, 0.0);
    for (std::size_t y = 0; y < 8; ++y)
        for (std::size_t x = 0; x < 8; ++x) CHECK(canny.get(long(y), long(x)) == (x == 3 ? 1 : 0));

    const auto smooth = canny_baseline(img, 20.0, 100.0, 1.4);
    for (std::size_t y = 0; y < 8; ++y) {
        std::size_t row = 0;
        for (std::size_t x = 0; x < 8; ++x) row += smooth.get(long(y), long(x));
        CHECK(row == 1);
    }
    CHECK_THROWS_AS(canny_baseline(img, 5.0, 1.0), ConfigError);
    CHECK_THROWS_AS(canny_baseline(img, 1.0, 5.0, -1.0), ConfigError);
}

TEST_CASE("baseline masks shrink as thresholds rise") {
    Rng rng(77);
    Image img(30, 20, 3);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    std::size_t prev_s = img.width * img.height + 1, prev_c = prev_s;
    for (double t : {0.0, 50.0, 200.0, 600.0, 1500.0, 5000.0}) {
        const auto s = sobel_baseline(img, t).count();
        const auto c = canny_baseline(img, t, t * 2, 1.0).count();
        CHECK(s <= prev_s);
        CHECK(c <= prev_c);
        prev_s = s;
        prev_c = c;
    }
    CHECK(sobel_baseline(img, 0.0).count() == 600);
    CHECK(sobel_baseline(img, 1e9).count() == 0);
}

TEST_CASE("report table layout and round trip") {
    CHECK(report_table({}) == "name,precision,recall,f1,efficiency\n");
    MetricsReport perfect;
    perfect.tp = 3;
    perfect.finalize();
    const auto one = report_table({{"ours", perfect, 0.25}});
    CHECK(one == "name,precision,recall,f1,efficiency\nours,1,1,1,0.25\n");

    MetricsReport m;
    m.tp = 7;
    m.fp = 3;
    m.fn = 5;
    m.finalize();
    const std::vector<ReportRow> rows{{"ours", m, 0.125}, {"sobel", perfect, 0.0}};
    const auto back = parse_report_table(report_table(rows));
    REQUIRE(back.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(back[i].name == rows[i].name);
        CHECK(back[i].metrics.precision == rows[i].metrics.precision);
        CHECK(back[i].metrics.recall == rows[i].metrics.recall);
        CHECK(back[i].metrics.f1 == rows[i].metrics.f1);
        CHECK(back[i].sec_per_image == rows[i].sec_per_image);
    }
    CHECK_THROWS_AS(parse_report_table("bogus\n"), FormatError);
}
