#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <vector>

#include "din/task_sdf.hpp"
#include "doctest.h"

using din::AnalyticSdf;
using din::Vec3;

namespace {

const AnalyticSdf kSphere = AnalyticSdf::sphere({0.5, 0.5, 0.5}, 0.25);
const AnalyticSdf kTorus = AnalyticSdf::torus({0.5, 0.5, 0.5}, 0.25, 0.1);

Vec3 random_point(din::Rng& rng) { return {din::uniform01(rng), din::uniform01(rng), din::uniform01(rng)}; }

din::SdfTaskConfig small_config() {
  din::SdfTaskConfig cfg;
  cfg.budget_bytes = 3 * 32 * 32 * 32 + 16 * 16 * 16;
  cfg.counts = {100000, 2000};
  cfg.epochs = 12;
  cfg.resample = true;
  cfg.train.batch_size = 2048;
  return cfg;
}

}  // namespace

TEST_CASE("analytic distances") {
  CHECK(din::sdf_reference(kSphere, {0.5, 0.5, 0.5}) == doctest::Approx(-0.25));
  CHECK(din::sdf_reference(kSphere, {0.5, 0.5, 1.0}) == doctest::Approx(0.25));
  const auto box = AnalyticSdf::box({0.5, 0.5, 0.5}, {0.1, 0.2, 0.3});
  CHECK(din::sdf_reference(box, {0.5, 0.5, 0.5}) == doctest::Approx(-0.1));
  CHECK(din::sdf_reference(box, {0.7, 0.5, 0.5}) == doctest::Approx(0.1));
  CHECK(din::sdf_reference(box, {0.7, 0.8, 0.5}) == doctest::Approx(std::hypot(0.1, 0.1)));
  CHECK(din::sdf_reference(kTorus, {0.75, 0.5, 0.5}) == doctest::Approx(-0.1));
  CHECK(din::sdf_reference(kTorus, {0.5, 0.5, 0.5}) == doctest::Approx(0.15));
  CHECK_THROWS_AS(AnalyticSdf::torus({0.5, 0.5, 0.5}, 0.1, 0.2), din::ArgumentError);
  CHECK(din::parse_shape_kind("torus") == din::ShapeKind::torus);
  CHECK_THROWS_AS(din::parse_shape_kind("cone"), din::ConfigError);
}

TEST_CASE("torus distance against a dense surface point cloud") {
  const double R = 0.25;
  const double r = 0.1;
  std::vector<Vec3> cloud;
  // worst-case error is half the diagonal spacing, about 8.5e-4 here
  const int nu = 1600;
  const int nv = 640;
  for (int i = 0; i < nu; ++i) {
    const double phi = 2.0 * std::numbers::pi * i / nu;
    for (int j = 0; j < nv; ++j) {
      const double th = 2.0 * std::numbers::pi * j / nv;
      const double ring = R + r * std::cos(th);
      cloud.push_back({0.5 + ring * std::cos(phi), 0.5 + ring * std::sin(phi), 0.5 + r * std::sin(th)});
    }
  }
  din::Rng rng(1);
  for (int q = 0; q < 40; ++q) {
    // query points within 0.05 of the surface, where the cloud is accurate
    const auto s = din::sample_surface(kTorus, rng);
    const double off = (din::uniform01(rng) - 0.5) * 0.1;
    const Vec3 p = {s.position[0] + off * s.normal[0], s.position[1] + off * s.normal[1],
                    s.position[2] + off * s.normal[2]};
    double best = 1e9;
    for (const auto& c : cloud) {
      best = std::min(best, std::hypot(p[0] - c[0], p[1] - c[1], p[2] - c[2]));
    }
    const double ring = std::hypot(p[0] - 0.5, p[1] - 0.5) - R;
    const bool inside = ring * ring + (p[2] - 0.5) * (p[2] - 0.5) < r * r;
    CHECK(std::abs(din::sdf_reference(kTorus, p) - (inside ? -best : best)) <= 1e-3);
  }
}

TEST_CASE("surface samples lie on the surface with unit normals") {
  din::Rng rng(2);
  for (const auto& shape : {kSphere, kTorus, AnalyticSdf::box({0.5, 0.4, 0.6}, {0.1, 0.2, 0.15})}) {
    for (int i = 0; i < 500; ++i) {
      const auto s = din::sample_surface(shape, rng);
      CHECK(std::abs(din::sdf_reference(shape, s.position)) <= 1e-9);
      CHECK(std::hypot(s.normal[0], s.normal[1], s.normal[2]) == doctest::Approx(1.0));
      const Vec3 out = {s.position[0] + 1e-4 * s.normal[0], s.position[1] + 1e-4 * s.normal[1],
                        s.position[2] + 1e-4 * s.normal[2]};
      CHECK(din::sdf_reference(shape, out) > 0.0);
    }
  }
}

TEST_CASE("training set") {
  din::Rng rng(3);
  const auto set = din::sample_sdf_training_set(kSphere, {50000, 1000}, 1e-6, rng);
  CHECK(set.size() == 51000u);
  CHECK(set.near_count == 50000u);
  CHECK(set.uniform_count == 1000u);
  CHECK(set.near_count / set.uniform_count == 50u);
  std::size_t inside = 0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    for (double c : set.positions[i]) CHECK_FALSE((c < 0.0 || c > 1.0));
    CHECK(set.targets[i] == din::tsdf_target(set.distances[i]));
    if (i < set.near_count) inside += set.targets[i] < 0.0f;
  }
  CHECK(static_cast<double>(inside) / 50000 == doctest::Approx(0.5).epsilon(0.03));
  CHECK(din::tsdf_target(0.0) == 1.0f);
  CHECK_THROWS_AS(din::sample_sdf_training_set(kSphere, {10, 1}, 0.0, rng), din::ArgumentError);
}

TEST_CASE("nearest sample lookup: bucket grid equals brute force") {
  din::Rng rng(4);
  std::vector<Vec3> pts(20000);
  for (auto& p : pts) p = random_point(rng);
  // duplicates exercise the tie rule
  pts[100] = pts[7];
  for (int buckets : {0, 1, 3, 17, 64}) {
    const din::NearestSampleIndex index(pts, buckets);
    for (int q = 0; q < 500; ++q) {
      const Vec3 p = random_point(rng);
      CHECK(index.nearest(p) == din::nearest_sample_brute(pts, p));
    }
    CHECK(index.nearest(pts[7]) == 7u);
    CHECK(index.nearest({-0.5, 2.0, 0.5}) == din::nearest_sample_brute(pts, {-0.5, 2.0, 0.5}));
  }
  CHECK_THROWS_AS(din::NearestSampleIndex(std::span<const Vec3>{}), din::ArgumentError);
}

TEST_CASE("cascaded pre-initialisation") {
  din::Rng rng(5);
  SUBCASE("all-inside samples") {
    din::SdfSampleSet set;
    for (int i = 0; i < 100; ++i) {
      set.positions.push_back(random_point(rng));
      set.distances.push_back(-1.0);
      set.targets.push_back(-1.0f);
    }
    din::GridArray c({5, 5, 5}, 1);
    din::init_cascaded_from_samples(c, set);
    for (float v : c.cells()) CHECK(v == -1.0f);
  }
  SUBCASE("sphere: center inside, corner outside, index equals brute force") {
    const auto set = din::sample_sdf_training_set(kSphere, {20000, 400}, 0.01, rng);
    din::GridArray a({9, 9, 9}, 1);
    din::GridArray b({9, 9, 9}, 1);
    din::init_cascaded_from_samples(a, set);
    din::init_cascaded_from_samples(b, set, true);
    CHECK(std::equal(a.cells().begin(), a.cells().end(), b.cells().begin()));
    const int center[3] = {4, 4, 4};
    const int corner[3] = {0, 0, 0};
    CHECK(a.at(center, 0) == -1.0f);
    CHECK(a.at(corner, 0) == 1.0f);
  }
  SUBCASE("errors") {
    din::GridArray c({3, 3, 3}, 1);
    CHECK_THROWS_AS(din::init_cascaded_from_samples(c, din::SdfSampleSet{}), din::ArgumentError);
  }
}

TEST_CASE("occupancy IoU") {
  const std::vector<bool> a = {true, true, false, false};
  const std::vector<bool> inv = {false, false, true, true};
  CHECK(*din::occupancy_iou(a, a) == 1.0);
  CHECK(*din::occupancy_iou(a, inv) == 0.0);
  const std::vector<bool> none(4, false);
  CHECK_FALSE(din::occupancy_iou(none, none).has_value());
  const std::vector<bool> b = {true, false, true, false};
  CHECK(*din::occupancy_iou(a, b) == *din::occupancy_iou(b, a));

  SUBCASE("concentric spheres") {
    const auto big = AnalyticSdf::sphere({0.5, 0.5, 0.5}, 0.25);
    const auto small = AnalyticSdf::sphere({0.5, 0.5, 0.5}, 0.20);
    din::Rng rng(6);
    std::vector<bool> ia;
    std::vector<bool> ib;
    while (ia.size() < 200000) {
      const Vec3 p = {0.25 + 0.5 * din::uniform01(rng), 0.25 + 0.5 * din::uniform01(rng),
                      0.25 + 0.5 * din::uniform01(rng)};
      if (din::sdf_reference(big, p) >= 0.0) continue;  // uniform in the union
      ia.push_back(true);
      ib.push_back(din::sdf_reference(small, p) < 0.0);
    }
    CHECK(*din::occupancy_iou(ia, ib) == doctest::Approx(0.512).epsilon(0.01));
  }
}

TEST_CASE("sdf network shape and training") {
  const auto cfg = small_config();
  const auto layout = din::solve_layout_sdf(cfg.budget_bytes, cfg.rho);
  CHECK(layout.primary_resolution == 32);
  CHECK(layout.cascaded_resolution == 16);
  const auto net = din::make_sdf_network(layout);
  CHECK(net.input_dims() == 3);
  CHECK(net.output_channels() == 1);

  din::Rng rng(7);
  const auto set = din::sample_sdf_training_set(kSphere, cfg.counts, cfg.sigma, rng);

  SUBCASE("pre-initialisation lowers the initial loss") {
    din::SampleBatch batch(3, 1);
    batch.resize(5000);
    for (std::size_t i = 0; i < 5000; ++i) {
      for (int j = 0; j < 3; ++j) batch.input(i)[j] = static_cast<float>(set.positions[i * 20][j]);
      batch.target(i)[0] = set.targets[i * 20];
    }
    auto pre = din::make_sdf_network(layout);
    din::init_cascaded_from_samples(pre.cascaded(), set);
    CHECK(din::evaluate_loss(pre, batch) < din::evaluate_loss(net, batch));
  }
  SUBCASE("trained sphere classifies near-surface points") {
    const auto model = din::train_sdf(kSphere, set, cfg);
    din::Rng trng(8);
    const auto pts = din::sample_sdf_test_points(kSphere, 20000, cfg.sigma, trng);
    const auto m = din::eval_sdf(model.net, kSphere, pts);
    REQUIRE(m.iou.has_value());
    CHECK(*m.iou > 0.95);
    CHECK(m.points == 20000u);
    const auto q = din::quantize_network(model.net);
    CHECK(din::sign_agreement(model.net, q, pts) >= 0.98);

    const auto path = std::filesystem::temp_directory_path() / "din_test_signs.raw";
    din::export_sign_grid(model.net, 9, path);
    std::ifstream in(path, std::ios::binary);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    REQUIRE(bytes.size() == 12u + 729u);
    CHECK(bytes[0] == 9);
    CHECK(bytes[12 + 4 + 4 * 9 + 4 * 81] == 1);  // center vertex
    CHECK(bytes[12] == 0);                        // corner vertex
    std::filesystem::remove(path);
  }
}
