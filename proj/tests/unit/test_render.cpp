#include <doctest.h>

#include "support/fixtures.hpp"
#include "vise/render.hpp"

#include <cmath>

using namespace vise;
using namespace vise::render;

TEST_CASE("straight arm centerline carries body intensity") {
  auto scene = testing::test_scene();
  const double lengths[] = {110.0, 110.0, 115.0};
  const auto arm = geometry::ArmConfiguration::straight(lengths);
  for (int cam = 0; cam < 2; ++cam) {
    const auto img = render_view(scene, cam, arm);
    const auto& model = scene.cameras[static_cast<std::size_t>(cam)];
    int checked = 0;
    for (const auto& p : geometry::sample_backbone(arm, 50)) {
      const Eigen::Vector2d px = camera::project(model, p);
      const int x = pixel_index(px.x()), y = pixel_index(px.y());
      if (!img.contains(x, y)) continue;
      CHECK(img.at(x, y) == scene.appearance.body_intensity);
      ++checked;
    }
    CHECK(checked > 100);
  }
}

TEST_CASE("silhouette covers every visible backbone sample") {
  auto scene = testing::test_scene(8);
  scene.appearance.stripes = even_stripes(3, 15.0, 0);
  const auto arm = testing::test_arm();
  const auto img = render_view(scene, 0, arm);
  for (const auto& p : geometry::sample_backbone(arm, 200)) {
    const Eigen::Vector2d px = camera::project(scene.cameras[0], p);
    const int x = pixel_index(px.x()), y = pixel_index(px.y());
    if (!img.contains(x, y)) continue;
    const auto v = img.at(x, y);
    CHECK((v == scene.appearance.body_intensity || v == 0));
  }
}

TEST_CASE("clutter-free binary scene has only the declared intensities") {
  auto scene = testing::test_scene();
  scene.appearance.background_intensity = 0;
  scene.appearance.body_intensity = 255;
  scene.appearance.stripes = even_stripes(4, 10.0, 90);
  const auto img = render_view(scene, 1, testing::test_arm());
  std::size_t other = 0;
  for (auto p : img.pixels()) other += (p != 0 && p != 255 && p != 90);
  CHECK(other == 0);
  CHECK(img.count_equal(90) > 0);
  CHECK(img.count_equal(255) > 0);
}

TEST_CASE("rendering is deterministic") {
  const auto scene = testing::test_scene(10);
  const auto arm = testing::test_arm();
  CHECK(render_view(scene, 0, arm) == render_view(scene, 0, arm));
  CHECK_FALSE(render_view(scene, 0, arm) == render_view(scene, 1, arm));
}

TEST_CASE("thicker arm never covers fewer pixels") {
  auto scene = testing::test_scene();
  const auto arm = testing::test_arm();
  const auto thin = render_view(scene, 0, arm).count_equal(scene.appearance.body_intensity);
  scene.appearance.radius_base *= 2;
  const auto thick = render_view(scene, 0, arm).count_equal(scene.appearance.body_intensity);
  CHECK(thick >= thin);
}

TEST_CASE("render errors") {
  auto scene = testing::test_scene();
  scene.appearance.body_intensity = 50;
  CHECK_THROWS_AS(render_view(scene, 0, testing::test_arm()), RenderError);
  scene = testing::test_scene();
  scene.cameras[0].extrinsics = camera::look_at(Eigen::Vector3d(0, 0, 200), Eigen::Vector3d(0, 0, 1000), Eigen::Vector3d::UnitX());
  CHECK_THROWS_WITH_AS(render_view(scene, 0, testing::test_arm()), "robot outside view frustum", RenderError);
}

TEST_CASE("brightness perturbation") {
  ImageBuffer img(3, 1, std::vector<std::uint8_t>{128, 200, 10});
  CHECK(perturb_brightness(img, 0) == img);
  const auto up = perturb_brightness(img, 40);
  CHECK(up.at(0, 0) == 168);
  CHECK(perturb_brightness(img, 100).at(1, 0) == 255);
  CHECK(perturb_brightness(img, -20).at(2, 0) == 0);
  ImageBuffer mid(2, 1, std::vector<std::uint8_t>{100, 150});
  CHECK(perturb_brightness(perturb_brightness(mid, 30), -30) == mid);
}

TEST_CASE("gaussian perturbation") {
  ImageBuffer flat(400, 400, 128);
  CHECK(perturb_gaussian(flat, 0.0, 1) == flat);
  const auto a = perturb_gaussian(flat, 10.0, 42);
  CHECK(a == perturb_gaussian(flat, 10.0, 42));
  double sum = 0.0, sq = 0.0;
  for (auto p : a.pixels()) {
    sum += p;
    sq += static_cast<double>(p) * p;
  }
  const double n = static_cast<double>(a.size());
  const double sd = std::sqrt(sq / n - (sum / n) * (sum / n));
  CHECK(std::abs(sd - 10.0) < 0.5);
  CHECK_THROWS_AS(perturb_gaussian(flat, -1.0, 1), RenderError);
}

TEST_CASE("occlusion strip") {
  const auto scene = testing::test_scene();
  const auto arm = testing::test_arm();
  const auto img = render_view(scene, 0, arm);
  CHECK(perturb_occlusion(img, scene.cameras[0], arm, 1, 0) == img);
  const auto occ = perturb_occlusion(img, scene.cameras[0], arm, 1, 20);
  const Eigen::Vector2d marker = camera::project(scene.cameras[0], geometry::fk_chain(arm)[1].translation);
  const int u = pixel_index(marker.x());
  for (int y = 0; y < occ.height(); ++y) {
    for (int x = 0; x < occ.width(); ++x) {
      if (x >= u - 10 && x < u + 10) {
        CHECK(occ.at(x, y) == 0);
      } else {
        CHECK(occ.at(x, y) == img.at(x, y));
      }
    }
  }
  // A strip outside the frame changes nothing.
  auto far = scene.cameras[0];
  far.intrinsics.cx = -500.0;
  CHECK(perturb_occlusion(img, far, arm, 1, 20) == img);
}
