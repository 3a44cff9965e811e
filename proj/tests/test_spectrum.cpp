#include <doctest.h>

#include <cmath>
#include <numbers>

#include "xsdec/rng.hpp"
#include "xsdec/spectrum.hpp"

using namespace xsdec;

namespace {

// Independent evaluation of the step + white-line curve in extended precision.
long double step_oracle(double H, double E0, double G, double A, double dE, double w, double E) {
    long double pi = std::numbers::pi_v<long double>;
    long double edge = (long double)H * (0.5L + std::atan(((long double)E - E0) / ((long double)G / 2.0L)) / pi);
    long double t = ((long double)E - ((long double)E0 + dE)) / (long double)w;
    long double wl = (long double)A * std::exp(-4.0L * std::log(2.0L) * t * t);
    return edge + wl;
}

long double gauss_oracle(double F, double c, double W, double E) {
    long double t = ((long double)E - c) / (long double)W;
    return (long double)F * std::exp(-4.0L * std::log(2.0L) * t * t);
}

} // namespace

TEST_CASE("evaluate_step: arctangent midpoint and white-line center") {
    StepParams p{1.0, 543.1, 1.0, 0.0, 0.0, 2.0};
    CHECK(evaluate_step(p, 543.1) == doctest::Approx(0.5).epsilon(1e-14));

    StepParams q{0.0, 543.1, 1.0, 1.0, 0.0, 2.0};
    CHECK(evaluate_step(q, 543.1) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("evaluate_step matches an independent high-precision evaluation") {
    StepParams p{0.85, 543.1, 1.0, 1.2, 0.5, 3.0};
    double got = evaluate_step(p, 545.0);
    CHECK(got == doctest::Approx(1.4364483643075689).epsilon(1e-13));
    double oracle = (double)step_oracle(0.85, 543.1, 1.0, 1.2, 0.5, 3.0, 545.0);
    CHECK(got == doctest::Approx(oracle).epsilon(1e-13));
}

TEST_CASE("evaluate_step rejects non-finite input") {
    StepParams p{1.0, 543.1, 1.0, 0.0, 0.0, 2.0};
    CHECK_THROWS_AS(evaluate_step(p, std::nan("")), invalid_input);
    p.Gamma = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(evaluate_step(p, 540.0), invalid_input);
}

TEST_CASE("evaluate_peaks: empty sum, FWHM semantics, overlap oracle") {
    SpectralParams empty;
    empty.step = {0.0, 543.1, 1.0, 0.0, 0.0, 2.0};
    for (double e : {500.0, 543.1, 600.0}) CHECK(evaluate_peaks(empty, e) == 0.0);

    SpectralParams one = empty;
    one.below.push_back({2.0, -3.1, 3.0}); // center 540.0
    CHECK(evaluate_peaks(one, 540.0 + 1.5) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(evaluate_peaks(one, 540.0 - 1.5) == doctest::Approx(1.0).epsilon(1e-12));

    SpectralParams two = empty;
    two.below.push_back({1.0, 540.0 - 543.1, 2.0});
    two.below.push_back({0.5, 541.0 - 543.1, 3.0});
    double got = evaluate_peaks(two, 540.5);
    CHECK(got == doctest::Approx(1.3038337713973598).epsilon(1e-13));
    double oracle = (double)(gauss_oracle(1.0, 540.0, 2.0, 540.5) + gauss_oracle(0.5, 541.0, 3.0, 540.5));
    CHECK(got == doctest::Approx(oracle).epsilon(1e-13));
}

TEST_CASE("FWHM identity holds for random peaks") {
    CounterRng rng(42, 0);
    for (int trial = 0; trial < 200; ++trial) {
        double F = rng.uniform(0.05, 3.0);
        double W = rng.uniform(0.2, 12.0);
        double dE = rng.uniform(-15.0, 48.0);
        SpectralParams p;
        p.step = {0.0, 543.1, 1.0, 0.0, 0.0, 2.0};
        (dE < 0 ? p.below : p.above).push_back({F, dE, W});
        double center = p.step.E0 + dE;
        for (double side : {-0.5, 0.5}) {
            double v = evaluate_peaks(p, center + side * W);
            CHECK(std::abs(v - 0.5 * F) <= 1e-12 * (0.5 * F));
        }
    }
}

TEST_CASE("evaluate_model is the exact sum of its parts") {
    SpectralParams p;
    p.step = {0.7, 543.1, 0.9, 1.1, 0.4, 2.5};
    p.below = {{1.2, -5.0, 2.0}, {0.8, -2.5, 1.0}};
    p.above = {{0.3, 4.0, 8.0}};
    CounterRng rng(1, 0);
    for (int i = 0; i < 100; ++i) {
        double e = rng.uniform(520.0, 600.0);
        CHECK(evaluate_model(p, e) == evaluate_step(p.step, e) + evaluate_peaks(p, e));
    }

    SpectralParams zero;
    zero.step = {0.0, 543.1, 1.0, 0.0, 0.0, 2.0};
    CHECK(evaluate_model(zero, 550.0) == 0.0);

    SpectralParams step_only;
    step_only.step = {0.9, 543.1, 1.2, 1.3, 0.2, 3.0};
    CHECK(evaluate_model(step_only, 545.0) == evaluate_step(step_only.step, 545.0));
}

TEST_CASE("evaluate_model: ten-peak curve matches an independent summation") {
    SpectralParams p;
    p.step = {0.85, 543.1, 1.0, 1.2, 0.5, 3.0};
    CounterRng rng(11, 3);
    for (int k = 0; k < 5; ++k) p.below.push_back({rng.uniform(0.4, 2.0), rng.uniform(-14.0, -1.0), rng.uniform(1.0, 5.0)});
    for (int k = 0; k < 5; ++k) p.above.push_back({rng.uniform(0.1, 0.7), rng.uniform(1.0, 45.0), rng.uniform(5.0, 14.0)});
    long double oracle = step_oracle(0.85, 543.1, 1.0, 1.2, 0.5, 3.0, 540.0);
    for (const auto* pop : {&p.below, &p.above}) {
        for (const Peak& pk : *pop) oracle += gauss_oracle(pk.F, 543.1 + pk.dE, pk.W, 540.0);
    }
    CHECK(evaluate_model(p, 540.0) == doctest::Approx((double)oracle).epsilon(1e-13));
}

TEST_CASE("error_function: hand cases and invariants") {
    SpectralParams zero;
    zero.step = {0.0, 543.1, 1.0, 0.0, 0.0, 2.0};

    Dataset d;
    d.energy = {540.0, 545.0};
    d.intensity = {1.0, 2.0};
    CHECK(error_function(zero, d) == doctest::Approx(1.25).epsilon(1e-15));

    // Zero residuals iff the model interpolates the data.
    SpectralParams p;
    p.step = {0.85, 543.1, 1.0, 1.2, 0.5, 3.0};
    p.below = {{1.0, -4.0, 2.0}};
    Dataset fit;
    for (double e = 530.0; e <= 590.0; e += 7.0) {
        fit.energy.push_back(e);
        fit.intensity.push_back(evaluate_model(p, e));
    }
    CHECK(error_function(p, fit) == 0.0);

    Dataset empty;
    CHECK_THROWS_AS(error_function(zero, empty), invalid_input);
}

TEST_CASE("error_function is invariant under permutation within a population") {
    SpectralParams p;
    p.step = {0.85, 543.1, 1.0, 1.2, 0.5, 3.0};
    p.below = {{1.0, -4.0, 2.0}, {0.6, -9.0, 1.5}, {1.4, -2.0, 3.0}};
    p.above = {{0.2, 8.0, 9.0}, {0.4, 20.0, 7.0}};

    Dataset d;
    CounterRng rng(5, 0);
    for (int i = 0; i < 64; ++i) {
        d.energy.push_back(530.0 + i * (60.0 / 63.0));
        d.intensity.push_back(rng.uniform(0.0, 2.0));
    }
    double base = error_function(p, d);

    SpectralParams q = p;
    std::swap(q.below[0], q.below[2]);
    std::swap(q.above[0], q.above[1]);
    CHECK(error_function(q, d) == base);
}
