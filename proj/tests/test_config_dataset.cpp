// Copyright (c) 2026 The segloop authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <doctest.h>
#include <Eigen/Geometry>

#include "segloop/cloud_io.hpp"
#include "segloop/config.hpp"
#include "segloop/dataset.hpp"

namespace {

using namespace segloop;

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("segloop_cfg_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out.good());
  out << text;
}

void write_bin_scan(const std::string& path, const std::vector<float>& raw) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out.good());
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size() * sizeof(float)));
}

std::string pose_row(const Eigen::Matrix3d& r, const Eigen::Vector3d& t) {
  std::ostringstream out;
  out.precision(17);
  for (int row = 0; row < 3; ++row) {
    out << r(row, 0) << ' ' << r(row, 1) << ' ' << r(row, 2) << ' ' << t(row);
    if (row != 2) out << ' ';
  }
  return out.str();
}

Pose make_pose(double yaw, const Eigen::Vector3d& t) {
  Pose pose;
  pose.rotation =
      Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  pose.translation = t;
  return pose;
}

}  // namespace

TEST_SUITE("config_dataset") {
  TEST_CASE("config: defaults serialize and parse back exactly") {
    const RunConfig defaults;
    const std::string text = config_to_string(defaults);
    const RunConfig reparsed = parse_config(text);
    CHECK(config_to_string(reparsed) == text);

    // An empty config is just the defaults.
    const RunConfig empty = parse_config("");
    CHECK(config_to_string(empty) == text);

    // Spot-check that the round trip carried real values.
    CHECK(reparsed.pipeline.radius == defaults.pipeline.radius);
    CHECK(reparsed.pipeline.knn == defaults.pipeline.knn);
    CHECK(reparsed.pipeline.classifier == defaults.pipeline.classifier);
    CHECK(reparsed.forest.n_trees == defaults.forest.n_trees);
  }

  TEST_CASE("config: every key kind assigns its field") {
    const std::string text =
        "# pipeline geometry\n"
        "radius = 42.5   # trailing comment\n"
        "\n"
        "boundary=1.25\n"
        "  min_segment_points\t=  123  \n"
        "ground_removal = none\n"
        "classifier = forest\n"
        "mode = localization\n"
        "seed = 18446744073709551615\n"
        "n_trees = 7\n"
        "radius = 17.0\n";  // later assignment wins
    const RunConfig c = parse_config(text);
    CHECK(c.pipeline.radius == 17.0);
    CHECK(c.pipeline.boundary == 1.25);
    CHECK(c.pipeline.segmentation.min_segment_points == 123);
    CHECK(c.pipeline.segmentation.ground_removal == GroundRemoval::kNone);
    CHECK(c.pipeline.classifier == ClassifierMode::kForest);
    CHECK(c.pipeline.mode == PipelineMode::kLocalization);
    CHECK(c.pipeline.seed == std::numeric_limits<std::uint64_t>::max());
    CHECK(c.forest.n_trees == 7);

    // Every enum spelling round-trips.
    for (const std::string name : {"min-height", "voxel-statistics", "none"}) {
      CHECK(to_string(ground_removal_from_string(name)) == name);
    }
    for (const std::string name : {"l2", "forest"}) {
      CHECK(to_string(classifier_mode_from_string(name)) == name);
    }
    for (const std::string name : {"loop-closure", "localization"}) {
      CHECK(to_string(pipeline_mode_from_string(name)) == name);
    }
    CHECK_THROWS_AS(ground_removal_from_string("plane"), std::invalid_argument);
    CHECK_THROWS_AS(classifier_mode_from_string("svm"), std::invalid_argument);
    CHECK_THROWS_AS(pipeline_mode_from_string("slam"), std::invalid_argument);
  }

  TEST_CASE("config: awkward doubles and extreme integers round-trip bit-exactly") {
    RunConfig c;
    c.pipeline.radius = 1.0 / 3.0;
    c.pipeline.voxel_leaf = std::nextafter(0.1, 0.0);
    c.pipeline.l2_threshold = 1e-300;
    c.pipeline.exclusion_window = std::numbers::pi * 50.0;
    c.pipeline.seed = std::numeric_limits<std::uint64_t>::max() - 1;
    c.pipeline.segmentation.max_segment_points = 1u << 30;

    const RunConfig back = parse_config(config_to_string(c));
    CHECK(back.pipeline.radius == c.pipeline.radius);
    CHECK(back.pipeline.voxel_leaf == c.pipeline.voxel_leaf);
    CHECK(back.pipeline.l2_threshold == c.pipeline.l2_threshold);
    CHECK(back.pipeline.exclusion_window == c.pipeline.exclusion_window);
    CHECK(back.pipeline.seed == c.pipeline.seed);
    CHECK(back.pipeline.segmentation.max_segment_points ==
          c.pipeline.segmentation.max_segment_points);
  }

  TEST_CASE("config: unknown keys and malformed lines report the line number") {
    CHECK_THROWS_WITH_AS(
        parse_config("radius = 60\nboundary = 3\n\ncluster_dist = 0.2\n"),
        doctest::Contains("line 4"), std::runtime_error);
    CHECK_THROWS_WITH_AS(
        parse_config("radius = 60\nboundary = 3\n\ncluster_dist = 0.2\n"),
        doctest::Contains("unknown key 'cluster_dist'"), std::runtime_error);

    // Comment and blank lines still count toward the line number.
    CHECK_THROWS_WITH_AS(parse_config("# header\n\nradius = abc\n"),
                         doctest::Contains("line 3"), std::runtime_error);

    CHECK_THROWS_WITH_AS(parse_config("radius 42\n"),
                         doctest::Contains("expected 'key = value'"),
                         std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_config("= 3\n"),
                         doctest::Contains("empty key or value"),
                         std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_config("radius =\n"),
                         doctest::Contains("empty key or value"),
                         std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_config("radius = 1.5x\n"),
                         doctest::Contains("key 'radius'"),
                         std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_config("radius = 1.5x\n"),
                         doctest::Contains("trailing characters"),
                         std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_config("knn = -3\n"),
                         doctest::Contains("non-negative"),
                         std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_config("mode = flying\n"),
                         doctest::Contains("unknown mode"),
                         std::runtime_error);
  }

  TEST_CASE("config: load_config reads files and reports missing ones") {
    TempDir dir;
    RunConfig c;
    c.pipeline.radius = 21.5;
    c.forest.max_depth = 11;
    write_text(dir.file("run.cfg"), config_to_string(c));

    const RunConfig loaded = load_config(dir.file("run.cfg"));
    CHECK(loaded.pipeline.radius == 21.5);
    CHECK(loaded.forest.max_depth == 11);
    CHECK(config_to_string(loaded) == config_to_string(c));

    CHECK_THROWS_WITH_AS(load_config(dir.file("absent.cfg")),
                         doctest::Contains("cannot open config file"),
                         std::runtime_error);
  }

  TEST_CASE("dataset: identity and clean pose rows parse bit-exactly") {
    const Pose identity = parse_pose_row("1 0 0 0 0 1 0 0 0 0 1 0");
    CHECK(identity.rotation == Eigen::Matrix3d::Identity());
    CHECK(identity.translation == Eigen::Vector3d::Zero());

    const Pose shifted = parse_pose_row("1 0 0 0.5 0 1 0 -2 0 0 1 3.25");
    CHECK(shifted.rotation == Eigen::Matrix3d::Identity());
    CHECK(shifted.translation == Eigen::Vector3d(0.5, -2.0, 3.25));

    // A numerically clean rotation written at full precision reads back
    // without any re-orthonormalization touching it.
    const Pose original = make_pose(0.7, {1.0 / 3.0, -2.75, 0.125});
    const Pose parsed =
        parse_pose_row(pose_row(original.rotation, original.translation));
    CHECK(parsed.bitwise_equal(original));
  }

  TEST_CASE("dataset: pose row errors") {
    CHECK_THROWS_WITH_AS(parse_pose_row("1 0 0 0 0 1 0 0 0 0 1"),
                         doctest::Contains("expected 12 reals"),
                         std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_pose_row("1 0 0 0 0 1 0 0 0 0 1 0 0"),
                         doctest::Contains("trailing fields"),
                         std::runtime_error);
    // Non-numeric/non-finite text is rejected (either at extraction or by
    // the finiteness guard, depending on the stream implementation).
    CHECK_THROWS_AS(parse_pose_row("nan 0 0 0 0 1 0 0 0 0 1 0"),
                    std::runtime_error);
    CHECK_THROWS_AS(parse_pose_row("1e400 0 0 0 0 1 0 0 0 0 1 0"),
                    std::runtime_error);
    // Scaled rotation: orthonormality error far above the 1e-6 bound.
    CHECK_THROWS_WITH_AS(parse_pose_row("1.001 0 0 0 0 1.001 0 0 0 0 1.001 0"),
                         doctest::Contains("not orthonormal"),
                         std::runtime_error);
    // Orthonormal but a reflection.
    CHECK_THROWS_WITH_AS(parse_pose_row("1 0 0 0 0 1 0 0 0 0 -1 0"),
                         doctest::Contains("reflection"), std::runtime_error);
  }

  TEST_CASE("dataset: dirty-but-close rotations are projected onto SO(3)") {
    Eigen::Matrix3d r = make_pose(0.9, Eigen::Vector3d::Zero()).rotation;
    r(0, 0) += 5e-8;  // error between the keep-exact and reject thresholds
    const Pose dirty = parse_pose_row(pose_row(r, {1.0, 2.0, 3.0}));
    CHECK(dirty.orthonormality_error() <= 1e-12);
    CHECK((dirty.rotation - r).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(dirty.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(dirty.translation == Eigen::Vector3d(1.0, 2.0, 3.0));
  }

  TEST_CASE("dataset: pose files round-trip and errors carry the line") {
    TempDir dir;
    Trajectory traj;
    for (int i = 0; i < 5; ++i) {
      traj.append(i, make_pose(0.3 * i, {1.0 * i, -0.5 * i, 0.25}));
    }
    save_pose_file(dir.file("poses.txt"), traj);
    const Trajectory loaded = load_pose_file(dir.file("poses.txt"));
    REQUIRE(loaded.size() == 5);
    for (int i = 0; i < 5; ++i) {
      CHECK(loaded.at(i).bitwise_equal(traj.at(i)));
    }

    // Blank lines are skipped but still counted for error reporting.
    write_text(dir.file("gappy.txt"),
               "1 0 0 0 0 1 0 0 0 0 1 0\n\n1 0 0 2 0 1 0 0 0 0 1 0\n");
    CHECK(load_pose_file(dir.file("gappy.txt")).size() == 2);

    write_text(dir.file("bad.txt"),
               "1 0 0 0 0 1 0 0 0 0 1 0\n\n1 0 0 0 0 1 0 0 0 0 1\n");
    CHECK_THROWS_WITH_AS(load_pose_file(dir.file("bad.txt")),
                         doctest::Contains("line 3"), std::runtime_error);
    CHECK_THROWS_WITH_AS(load_pose_file(dir.file("bad.txt")),
                         doctest::Contains("bad.txt"), std::runtime_error);

    CHECK_THROWS_WITH_AS(load_pose_file(dir.file("absent.txt")),
                         doctest::Contains("cannot open pose file"),
                         std::runtime_error);

    Trajectory gapped;
    gapped.append(0, make_pose(0.0, Eigen::Vector3d::Zero()));
    gapped.append(2, make_pose(0.1, Eigen::Vector3d::Zero()));
    CHECK_THROWS_WITH_AS(save_pose_file(dir.file("gap.txt"), gapped),
                         doctest::Contains("0..n-1"), std::invalid_argument);
  }

  TEST_CASE("dataset: .bin scans parse float32 x y z intensity records") {
    TempDir dir;
    write_bin_scan(dir.file("scan.bin"), {1.5f, -2.25f, 0.125f, 0.9f,  //
                                          10.0f, 20.0f, 30.0f, 0.1f,  //
                                          -0.5f, 0.0f, 7.75f, 0.0f});
    SequenceDataset dataset;
    dataset.scan_paths = {dir.file("scan.bin")};
    const PointCloud cloud = dataset.load_scan(0);
    REQUIRE(cloud.points.size() == 3);
    CHECK(cloud.points[0].x == 1.5);
    CHECK(cloud.points[0].y == -2.25);
    CHECK(cloud.points[0].z == 0.125);
    CHECK(cloud.points[1].x == 10.0);
    CHECK(cloud.points[2].z == 7.75);

    // Zero-length files are valid empty scans.
    write_bin_scan(dir.file("empty.bin"), {});
    dataset.scan_paths = {dir.file("empty.bin")};
    CHECK(dataset.load_scan(0).points.empty());

    // Size must be a whole number of 16-byte records.
    write_text(dir.file("short.bin"), "123456789012345");  // 15 bytes
    dataset.scan_paths = {dir.file("short.bin")};
    CHECK_THROWS_WITH_AS(dataset.load_scan(0),
                         doctest::Contains("multiple of 16"),
                         std::runtime_error);

    // Non-finite coordinates are rejected with the record index.
    write_bin_scan(dir.file("nan.bin"),
                   {0.0f, 0.0f, 0.0f, 0.0f,
                    std::numeric_limits<float>::quiet_NaN(), 0.0f, 0.0f, 0.0f});
    dataset.scan_paths = {dir.file("nan.bin")};
    CHECK_THROWS_WITH_AS(dataset.load_scan(0),
                         doctest::Contains("record 1"), std::runtime_error);

    CHECK_THROWS_AS(dataset.load_scan(5), std::invalid_argument);
  }

  TEST_CASE("dataset: load_sequence pairs sorted scans with poses") {
    TempDir dir;
    const auto scan_dir = dir.path / "scans";
    std::filesystem::create_directories(scan_dir);

    // Write deliberately out of creation order; loading must sort by name.
    PointCloud b;
    b.points = {{2.0, 0.0, 0.0}};
    save_cloud((scan_dir / "b.segpc").string(), b);
    PointCloud a;
    a.points = {{1.0, 0.0, 0.0}};
    save_cloud((scan_dir / "a.segpc").string(), a);
    write_bin_scan((scan_dir / "c.bin").string(), {3.0f, 0.0f, 0.0f, 1.0f});

    Trajectory traj;
    for (int i = 0; i < 3; ++i) {
      traj.append(i, make_pose(0.0, {2.0 * i, 0.0, 0.0}));
    }
    save_pose_file(dir.file("poses.txt"), traj);

    const SequenceDataset dataset =
        load_sequence(scan_dir.string(), dir.file("poses.txt"));
    REQUIRE(dataset.size() == 3);
    CHECK(dataset.scan_paths[0] == (scan_dir / "a.segpc").string());
    CHECK(dataset.scan_paths[1] == (scan_dir / "b.segpc").string());
    CHECK(dataset.scan_paths[2] == (scan_dir / "c.bin").string());
    CHECK(dataset.load_scan(0).points[0].x == 1.0);
    CHECK(dataset.load_scan(1).points[0].x == 2.0);
    CHECK(dataset.load_scan(2).points[0].x == 3.0);  // .bin path
    CHECK(dataset.poses.at(2).translation.x() == 4.0);

    // One pose too few.
    Trajectory two;
    two.append(0, make_pose(0.0, Eigen::Vector3d::Zero()));
    two.append(1, make_pose(0.0, Eigen::Vector3d::Zero()));
    save_pose_file(dir.file("two.txt"), two);
    CHECK_THROWS_WITH_AS(load_sequence(scan_dir.string(), dir.file("two.txt")),
                         doctest::Contains("scan/pose count mismatch"),
                         std::runtime_error);

    CHECK_THROWS_WITH_AS(
        load_sequence(dir.file("nope"), dir.file("poses.txt")),
        doctest::Contains("not a directory"), std::runtime_error);
  }
}
