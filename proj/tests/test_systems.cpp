#include "geomfilter/systems.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace geomfilter;

TEST_CASE("registry lookups and parameters") {
    const ExampleSystem t = get_system("torus", {{"alpha", M_PI / 6.0}});
    CHECK(t.ref("bv_coefficient") == Catch::Approx(1.0 / 3.0).margin(1e-12));

    const ExampleSystem b = get_system("bessel", {{"n", 3}});
    CHECK(b.A.b(Vec::Constant(1, 2.0))(0) == Catch::Approx(0.5));
    CHECK(b.ref("drift_at_2") == Catch::Approx(0.5));

    const ExampleSystem s = get_system("sphere_gradient", {{"n", 3}});
    CHECK(s.ref("beta_scale") == Catch::Approx(-1.5));

    CHECK_THROWS_AS(get_system("nonexistent", {}), UnknownSystem);

    // every reference value carries provenance and a note
    for (const std::string& id :
         {"heisenberg", "torus", "bessel", "sphere_gradient", "linear_filter_1d",
          "planar_flow_redundant"}) {
        const ExampleSystem sys = get_system(id, {});
        for (const RefValue& r : sys.refs) {
            CHECK_FALSE(r.provenance.empty());
            CHECK_FALSE(r.note.empty());
        }
    }
}

TEST_CASE("registered systems pass their construction checks") {
    auto run = [](const ExampleSystem& sys, double lo, double hi) {
        const auto total = sample_box(sys.N, Vec::Constant(sys.N.dim, lo),
                                      Vec::Constant(sys.N.dim, hi), 10);
        const auto base = sample_box(sys.M, Vec::Constant(sys.M.dim, lo),
                                     Vec::Constant(sys.M.dim, hi), 10);
        for (const Report& rep : system_construction_checks(sys, total, base)) {
            INFO(sys.id << ": " << rep.check << " residual " << rep.residual_max);
            CHECK(rep.pass);
        }
    };
    run(get_system("torus", {}), 0.1, 2.0 * M_PI - 0.1);
    run(get_system("heisenberg", {}), -1.2, 1.2);
    run(get_system("linear_filter_1d", {}), -1.0, 1.0);
    run(get_system("planar_flow_redundant", {}), -1.5, 1.5);
    {
        const ExampleSystem bes = get_system("bessel", {{"n", 3}});
        const auto total = sample_box(bes.N, Vec::Constant(3, 0.4), Vec::Constant(3, 1.6), 10);
        const auto base = sample_box(bes.M, Vec::Constant(1, 0.5), Vec::Constant(1, 2.5), 10);
        for (const Report& rep : system_construction_checks(bes, total, base)) {
            INFO("bessel: " << rep.check);
            CHECK(rep.pass);
        }
    }
}

TEST_CASE("sphere gradient system is intertwined on the frame bundle chart") {
    const ExampleSystem s = get_system("sphere_gradient", {{"n", 2}});
    FrameBundleChart fb = frame_bundle(s.M, 2, gl_group(2));
    // sample frame points over retracted base points
    std::vector<Vec> total;
    for (const Vec& raw : sample_box(s.M, Vec::Constant(3, -1.0), Vec::Constant(3, 1.0), 6)) {
        const Vec x = raw / raw.norm();
        Mat U(3, 2);
        U.col(0) = Vec::Unit(3, (0) % 3);
        U.col(1) = Vec::Unit(3, (1) % 3);
        for (int c = 0; c < 2; ++c) {
            Vec col = U.col(c) - x * x.dot(U.col(c));
            for (int prev = 0; prev < c; ++prev) col -= U.col(prev) * U.col(prev).dot(col);
            if (col.norm() < 0.3) col = (Vec::Unit(3, 2) - x * x[2]);
            U.col(c) = col / col.norm();
        }
        total.push_back(fb.pack(x, U));
    }
    const Report over = is_over(s.B, s.A, s.p, total, 2e-6);
    INFO("residual " << over.residual_max);
    CHECK(over.pass);
    const auto base = sample_box(s.M, Vec::Constant(3, -1.0), Vec::Constant(3, 1.0), 10);
    CHECK(cohesive_check(s.A, base).pass);
}

TEST_CASE("linear filter riccati reference") {
    const ExampleSystem lf = get_system("linear_filter_1d", {});
    CHECK(lf.ref("stationary_posterior_variance") ==
          Catch::Approx(std::sqrt(2.0) - 1.0).margin(1e-12));
    // P solves the stationary equation
    const double P = lf.ref("stationary_posterior_variance");
    CHECK(1.0 - 2.0 * P - P * P == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("symmetric sphere data") {
    const SymmetricSphereData d = make_symmetric_sphere(3, 1);
    CHECK(d.lambda_scale == Catch::Approx(-0.5));
    CHECK(d.alpha.rows() == 3);
    CHECK_THROWS_AS(make_symmetric_sphere(3, 3), NumericalDomainError);
}

TEST_CASE("registered id list") {
    const auto ids = registered_systems();
    CHECK(ids.size() == 7);
}
