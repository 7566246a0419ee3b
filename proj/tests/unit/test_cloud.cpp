// SPDX-License-Identifier: Apache-2.0

#include "afford/cloud/cloud_io.hpp"
#include "afford/cloud/point_cloud.hpp"
#include "afford/cloud/spatial_index.hpp"
#include "afford/cloud/voxel_grid.hpp"
#include "afford/core/random.hpp"
#include "support/temp_dir.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <set>

using namespace afford;
using afford::testing::TempDir;

namespace {

PointCloud random_cloud(std::size_t n, std::uint64_t seed, double extent = 1.0) {
  Rng rng(seed);
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i)
    c.points.emplace_back(rng.uniform(-extent, extent), rng.uniform(-extent, extent), rng.uniform(-extent, extent));
  return c;
}

// Linear-scan oracle: lowest index among minimal squared distances.
Neighbor brute_nearest(const std::vector<Vec3>& pts, const Vec3& q) {
  std::size_t best = 0;
  double d2 = squared_distance(pts[0], q);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double d = squared_distance(pts[i], q);
    if (d < d2) {
      d2 = d;
      best = i;
    }
  }
  return {best, std::sqrt(d2)};
}

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::binary);
  f << s;
}

}  // namespace

TEST(ParseCloud, AsciiPlyThreeVertices) {
  TempDir dir;
  write_text(dir / "tri.ply",
             "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\n"
             "property float z\nend_header\n0 0 0\n1 0 0\n0 1 0\n");
  const auto c = parse_cloud(dir / "tri.ply", CloudFormat::ply_ascii);
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c.points[0], Vec3(0, 0, 0));
  EXPECT_EQ(c.points[1], Vec3(1, 0, 0));
  EXPECT_EQ(c.points[2], Vec3(0, 1, 0));
  EXPECT_FALSE(c.has_normals());
}

TEST(ParseCloud, TruncatedAsciiPayloadReportsLine) {
  TempDir dir;
  write_text(dir / "short.ply",
             "ply\nformat ascii 1.0\nelement vertex 5\nproperty float x\nproperty float y\n"
             "property float z\nend_header\n0 0 0\n1 0 0\n0 1 0\n");
  try {
    parse_cloud(dir / "short.ply", CloudFormat::ply_ascii);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("truncated payload"), std::string::npos);
    EXPECT_EQ(e.line(), 11u);
  }
}

TEST(ParseCloud, TruncatedBinaryPayloadReportsByteOffset) {
  TempDir dir;
  PointCloud c = random_cloud(10, 3);
  write_cloud(c, dir / "b.ply", CloudFormat::ply_binary_le);
  const auto full = std::filesystem::file_size(dir / "b.ply");
  std::filesystem::resize_file(dir / "b.ply", full - 30);
  try {
    parse_cloud(dir / "b.ply", CloudFormat::ply_binary_le);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    // 210 payload bytes hold 8 complete 24-byte records.
    EXPECT_EQ(e.byte_offset(), full - 10 * 24 + 8 * 24);
  }
}

TEST(ParseCloud, RejectsMalformedHeaders) {
  TempDir dir;
  write_text(dir / "be.ply",
             "ply\nformat binary_big_endian 1.0\nelement vertex 0\nproperty float x\nend_header\n");
  EXPECT_THROW(parse_cloud(dir / "be.ply", CloudFormat::ply_binary_le), ParseError);

  write_text(dir / "noz.ply", "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nend_header\n0 0\n");
  EXPECT_THROW(parse_cloud(dir / "noz.ply", CloudFormat::ply_ascii), ParseError);

  write_text(dir / "face.ply",
             "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\n"
             "element face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n3 0 0 0\n");
  try {
    parse_cloud(dir / "face.ply", CloudFormat::ply_ascii);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 7u);
  }

  write_text(dir / "bad.pcd", "VERSION 0.7\nFIELDS x y z\nPOINTS 1\nDATA binary\n");
  EXPECT_THROW(parse_cloud(dir / "bad.pcd", CloudFormat::pcd_ascii), ParseError);

  write_text(dir / "nan.pcd", "VERSION 0.7\nFIELDS x y z\nPOINTS 1\nDATA ascii\nnan 0 0\n");
  EXPECT_THROW(parse_cloud(dir / "nan.pcd", CloudFormat::pcd_ascii), ParseError);
}

TEST(ParseCloud, IgnoresUnknownScalarPropertiesAndReadsNormals) {
  TempDir dir;
  write_text(dir / "c.ply",
             "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\n"
             "property uchar red\nproperty float nx\nproperty float ny\nproperty float nz\nend_header\n"
             "1 2 3 255 0 0 1\n4 5 6 0 1 0 0\n");
  const auto c = parse_cloud(dir / "c.ply", CloudFormat::ply_ascii);
  ASSERT_TRUE(c.has_normals());
  EXPECT_EQ(c.points[1], Vec3(4, 5, 6));
  EXPECT_EQ(c.normals[1], Vec3(1, 0, 0));
}

TEST(ParseCloud, PcdWithNormalsAndCounts) {
  TempDir dir;
  write_text(dir / "n.pcd",
             "# .PCD v0.7\nVERSION 0.7\nFIELDS x y z rgb normal_x normal_y normal_z\nSIZE 4 4 4 4 4 4 4\n"
             "TYPE F F F F F F F\nCOUNT 1 1 1 1 1 1 1\nWIDTH 1\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\nPOINTS 1\n"
             "DATA ascii\n0.5 0.25 -1 4.2e6 0 0 1\n");
  const auto c = parse_cloud(dir / "n.pcd", CloudFormat::pcd_ascii);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c.points[0], Vec3(0.5, 0.25, -1));
  EXPECT_EQ(c.normals[0], Vec3(0, 0, 1));
}

TEST(WriteCloud, RoundTripIsExactForAllFormats) {
  TempDir dir;
  PointCloud c = random_cloud(1000, 11, 5.0);
  for (auto& p : c.points) c.normals.push_back(p.normalized());
  for (auto fmt : {CloudFormat::ply_ascii, CloudFormat::ply_binary_le, CloudFormat::pcd_ascii}) {
    const auto path = dir / ("rt." + std::string(to_string(fmt)));
    write_cloud(c, path, fmt);
    EXPECT_EQ(detect_format(path), fmt);
    const auto back = parse_cloud(path, fmt);
    EXPECT_EQ(back, c) << to_string(fmt);
  }
}

TEST(WriteCloud, EmptyCloudAndNormalFields) {
  TempDir dir;
  PointCloud empty;
  write_cloud(empty, dir / "e.ply", CloudFormat::ply_ascii);
  EXPECT_TRUE(parse_cloud(dir / "e.ply", CloudFormat::ply_ascii).empty());
  write_cloud(empty, dir / "e.pcd", CloudFormat::pcd_ascii);
  EXPECT_TRUE(parse_cloud(dir / "e.pcd", CloudFormat::pcd_ascii).empty());

  PointCloud n;
  n.points = {Vec3(0, 0, 0)};
  n.normals = {Vec3(0, 0, 1)};
  write_cloud(n, dir / "n.ply", CloudFormat::ply_ascii);
  std::ifstream f(dir / "n.ply");
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  EXPECT_NE(text.find("property double nx"), std::string::npos);
  EXPECT_NE(text.find("property double nz"), std::string::npos);
}

TEST(WriteCloud, UnwritablePath) {
  PointCloud c = random_cloud(3, 1);
  try {
    write_cloud(c, "/nonexistent-dir/x.ply", CloudFormat::ply_ascii);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::io);
  }
}

TEST(VoxelDownsample, CubeCornersCollapseToCenter) {
  PointCloud c;
  for (int i = 0; i < 8; ++i) c.points.emplace_back(0.01 * (i & 1), 0.01 * ((i >> 1) & 1), 0.01 * ((i >> 2) & 1));
  const auto d = voxel_downsample(c, 0.02);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_NEAR((d.points[0] - Vec3(0.005, 0.005, 0.005)).norm(), 0.0, 1e-15);
}

TEST(VoxelDownsample, EmptyAndInvalid) {
  EXPECT_TRUE(voxel_downsample(PointCloud{}, 0.05).empty());
  EXPECT_THROW(voxel_downsample(random_cloud(3, 1), 0.0), Error);
  EXPECT_THROW(voxel_downsample(random_cloud(3, 1), -1.0), Error);
}

TEST(VoxelDownsample, CountMatchesBruteForceCellEnumeration) {
  const PointCloud c = random_cloud(1000, 5, 0.3);
  const double e = 0.05;
  const Vec3 origin = bounding_box(c.points).min;
  // Oracle: collect distinct floor-cells in a set.
  std::set<std::array<long long, 3>> cells;
  for (const auto& p : c.points) {
    cells.insert({static_cast<long long>(std::floor((p.x() - origin.x()) / e)),
                  static_cast<long long>(std::floor((p.y() - origin.y()) / e)),
                  static_cast<long long>(std::floor((p.z() - origin.z()) / e))});
  }
  EXPECT_EQ(voxel_downsample(c, e).size(), cells.size());
}

TEST(VoxelDownsample, CountNonIncreasingOnNestedGrids) {
  const PointCloud c = random_cloud(3000, 9, 0.5);
  const Vec3 origin = bounding_box(c.points).min;
  std::size_t prev = c.size();
  for (double e = 0.005; e < 1.0; e *= 2.0) {
    const auto n = voxel_downsample(c, e, origin).size();
    EXPECT_LE(n, prev);
    prev = n;
  }
}

TEST(VoxelGrid, EveryPointInExactlyOneCell) {
  const PointCloud c = random_cloud(500, 2, 0.2);
  const auto g = VoxelGrid::build(c, 0.03);
  std::vector<int> seen(c.size(), 0);
  for (const auto& [key, members] : g.cells) {
    EXPECT_FALSE(members.empty());
    for (auto i : members) {
      ++seen[i];
      EXPECT_EQ(cell_of(c.points[i], g.origin, g.cell_size), key);
    }
  }
  for (int s : seen) EXPECT_EQ(s, 1);
}

TEST(SpatialIndex, IdentityAndTwoPointCases) {
  const PointCloud c = random_cloud(50, 4);
  SpatialIndex idx(c.points);
  const auto n = nearest_neighbor(idx, c.points[17]);
  EXPECT_EQ(n.index, 17u);
  EXPECT_EQ(n.distance, 0.0);

  std::vector<Vec3> two{Vec3(0, 0, 0), Vec3(1, 0, 0)};
  SpatialIndex t(two);
  const auto m = t.nearest(Vec3(0.4, 0, 0));
  EXPECT_EQ(m.index, 0u);
  EXPECT_NEAR(m.distance, 0.4, 1e-15);
}

TEST(SpatialIndex, EmptyIndexThrows) {
  SpatialIndex idx;
  EXPECT_THROW(idx.nearest(Vec3::Zero()), Error);
}

TEST(SpatialIndex, TiesGoToLowestIndex) {
  // Duplicate points at several positions, plus a query equidistant to two.
  std::vector<Vec3> pts;
  for (int rep = 0; rep < 40; ++rep) {
    pts.emplace_back(1, 0, 0);
    pts.emplace_back(-1, 0, 0);
  }
  SpatialIndex idx(pts, 2);
  EXPECT_EQ(idx.nearest(Vec3(0, 0, 0)).index, 0u);
  EXPECT_EQ(idx.nearest(Vec3(-2, 0, 0)).index, 1u);
  const auto k = idx.knn(Vec3(0.9, 0, 0), 3);
  ASSERT_EQ(k.size(), 3u);
  EXPECT_EQ(k[0].index, 0u);
  EXPECT_EQ(k[1].index, 2u);
  EXPECT_EQ(k[2].index, 4u);
}

TEST(SpatialIndex, MatchesLinearScanOnRandomInstances) {
  Rng rng(123);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + rng.below(trial < 25 ? 2000 : 10000);
    PointCloud c = random_cloud(n, 1000 + trial);
    // Snap some coordinates to a coarse lattice so exact ties occur.
    if (trial % 3 == 0)
      for (auto& p : c.points) p = (p * 4.0).array().round() / 4.0;
    SpatialIndex idx(c.points, 1 + trial % 16);
    for (int q = 0; q < 100; ++q) {
      const Vec3 query(rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2));
      const auto expect = brute_nearest(c.points, query);
      const auto got = idx.nearest(query);
      ASSERT_EQ(got.index, expect.index);
      ASSERT_EQ(got.distance, expect.distance);

      const double r = rng.uniform(0.0, 0.5);
      std::vector<std::size_t> within;
      for (std::size_t i = 0; i < n; ++i)
        if (squared_distance(c.points[i], query) <= r * r) within.push_back(i);
      const auto rad = idx.radius(query, r);
      ASSERT_EQ(rad.size(), within.size());
      for (std::size_t i = 0; i < rad.size(); ++i) ASSERT_EQ(rad[i].index, within[i]);

      const std::size_t k = 1 + rng.below(8);
      std::vector<std::pair<double, std::size_t>> all;
      for (std::size_t i = 0; i < n; ++i) all.emplace_back(squared_distance(c.points[i], query), i);
      std::sort(all.begin(), all.end());
      const auto kn = idx.knn(query, k);
      ASSERT_EQ(kn.size(), std::min(k, n));
      for (std::size_t i = 0; i < kn.size(); ++i) ASSERT_EQ(kn[i].index, all[i].second);
    }
  }
}

TEST(ZeroMean, DirectMeanAndInverse) {
  PointCloud c;
  c.points = {Vec3(1, 1, 1), Vec3(3, 1, 1)};
  const auto [z, centroid] = zero_mean(c);
  EXPECT_EQ(centroid, Vec3(2, 1, 1));
  EXPECT_EQ(z.points[0], Vec3(-1, 0, 0));
  EXPECT_EQ(z.points[1], Vec3(1, 0, 0));

  const auto [z2, c2] = zero_mean(z);
  EXPECT_LT(c2.norm(), 1e-15);
  EXPECT_EQ(z2.points, z.points);

  const PointCloud r = random_cloud(777, 8, 3.0);
  const auto [zr, cr] = zero_mean(r);
  EXPECT_LT(mean_of(zr.points).norm(), 1e-9);
  for (std::size_t i = 0; i < r.size(); ++i) EXPECT_LT((zr.points[i] + cr - r.points[i]).norm(), 1e-9);

  EXPECT_THROW(zero_mean(PointCloud{}), Error);
}

TEST(PointCloudValidate, RejectsBadNormals) {
  PointCloud c;
  c.points = {Vec3(0, 0, 0)};
  c.normals = {Vec3(0, 0, 2)};
  EXPECT_THROW(c.validate(), Error);
  c.normals = {Vec3(0, 0, 1), Vec3(0, 0, 1)};
  EXPECT_THROW(c.validate(), Error);
  c.normals = {Vec3(0, 0, 1)};
  EXPECT_NO_THROW(c.validate());
}
