#include <doctest.h>

#include <cmath>

#include "canvasrnn/psd.hpp"
#include "canvasrnn/util.hpp"

using namespace canvasrnn;

TEST_CASE("total spectral power equals total pixel energy") {
    Rng rng(41);
    const int h = 12, w = 9;
    std::vector<double> map(static_cast<std::size_t>(h) * w);
    for (double& v : map) v = rng.uniform(-2.0, 2.0);
    double energy = 0.0;
    for (double v : map) energy += v * v;
    const PsdResult r = power_spectral_density(map, h, w);
    CHECK(std::abs(r.total_power - energy) <= 1e-9 * energy);
    double binned = 0.0;
    for (double p : r.power) binned += p;
    CHECK(std::abs(binned - r.total_power) <= 1e-9 * energy);
    CHECK(r.cdf.back() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("constant input concentrates all power at frequency zero") {
    std::vector<double> map(64, 0.7);
    const PsdResult r = power_spectral_density(map, 8, 8);
    CHECK(r.cdf[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.power[0] == doctest::Approx(r.total_power).epsilon(1e-12));
}

TEST_CASE("all-zero input yields a unit CDF everywhere") {
    std::vector<double> map(64, 0.0);
    const PsdResult r = power_spectral_density(map, 8, 8);
    CHECK(r.total_power == 0.0);
    for (double c : r.cdf) CHECK(c == 1.0);
}

TEST_CASE("a checkerboard carries more high-frequency mass than a disk") {
    const int n = 16;
    IntMask checker(1, n, n), disk(1, n, n);
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            checker.at(0, y, x) = (x + y) % 2;
            const double dx = x - 7.5, dy = y - 7.5;
            disk.at(0, y, x) = (dx * dx + dy * dy <= 25.0) ? 1 : 0;
        }
    }
    const PsdResult rc = power_spectral_density(checker, 1);
    const PsdResult rd = power_spectral_density(disk, 1);
    // At a low-frequency bin the disk has already accumulated most of its
    // power while the checkerboard has almost none.
    CHECK(rd.cdf[2] > 0.8);
    CHECK(rc.cdf[2] <= 0.5);  // checkerboard: half DC (mean 0.5), half Nyquist
    CHECK(rd.cdf[2] > rc.cdf[2]);
}

TEST_CASE("input validation") {
    CHECK_THROWS_AS(power_spectral_density(std::vector<double>(3, 0.0), 1, 3), ConfigError);
    CHECK_THROWS_AS(power_spectral_density(std::vector<double>(5, 0.0), 2, 3), ConfigError);
}
