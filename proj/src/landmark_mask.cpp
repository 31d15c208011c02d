#include <algorithm>
#include <cmath>
#include <fstream>

#include "rppg/error.hpp"
#include "rppg/skinseg.hpp"

namespace rppg {
namespace {

double Cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

bool SegmentsCross(const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
  const double d1 = Cross(c, d, a);
  const double d2 = Cross(c, d, b);
  const double d3 = Cross(a, b, c);
  const double d4 = Cross(a, b, d);
  return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

void CheckSimplePolygon(const std::vector<Point2>& poly, const char* name) {
  if (std::abs(PolygonArea(poly)) <= 1e-9) {
    Fail(ErrorKind::kGeometry, std::string(name) + " polygon has zero area");
  }
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;
      if (SegmentsCross(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n])) {
        Fail(ErrorKind::kGeometry, std::string(name) + " polygon self-intersects");
      }
    }
  }
}

std::vector<Point2> Slice(const FaceLandmarks& pts, int begin, int end) {
  return {pts.begin() + begin, pts.begin() + end};
}

}  // namespace

double PolygonArea(const std::vector<Point2>& polygon) {
  double twice = 0.0;
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    const Point2& a = polygon[i];
    const Point2& b = polygon[(i + 1) % polygon.size()];
    twice += a.x * b.y - b.x * a.y;
  }
  return 0.5 * twice;
}

std::vector<Point2> ConvexHull(std::vector<Point2> points) {
  std::sort(points.begin(), points.end(),
            [](const Point2& a, const Point2& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  points.erase(std::unique(points.begin(), points.end()), points.end());
  if (points.size() < 3) return points;
  std::vector<Point2> hull(2 * points.size());
  std::size_t k = 0;
  for (const Point2& p : points) {
    while (k >= 2 && Cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = points.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && Cross(hull[k - 2], hull[k - 1], points[i]) <= 0) --k;
    hull[k++] = points[i];
  }
  hull.resize(k - 1);
  return hull;
}

std::vector<std::uint8_t> RasterizePolygon(const std::vector<Point2>& polygon, int width, int height) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(width) * height, 0);
  if (polygon.size() < 3) return out;
  double min_x = polygon[0].x, max_x = min_x, min_y = polygon[0].y, max_y = min_y;
  for (const Point2& p : polygon) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  const int x0 = std::max(0, static_cast<int>(std::floor(min_x)) - 1);
  const int x1 = std::min(width - 1, static_cast<int>(std::ceil(max_x)) + 1);
  const int y0 = std::max(0, static_cast<int>(std::floor(min_y)) - 1);
  const int y1 = std::min(height - 1, static_cast<int>(std::ceil(max_y)) + 1);
  const std::size_t n = polygon.size();
  for (int y = y0; y <= y1; ++y) {
    const double py = y + 0.5;
    for (int x = x0; x <= x1; ++x) {
      const double px = x + 0.5;
      bool inside = false;
      for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point2& a = polygon[i];
        const Point2& b = polygon[j];
        if ((a.y > py) != (b.y > py) && px < (b.x - a.x) * (py - a.y) / (b.y - a.y) + a.x) {
          inside = !inside;
        }
      }
      if (inside) out[static_cast<std::size_t>(y) * width + x] = 1;
    }
  }
  return out;
}

RoiMask LandmarkMask(const LandmarkTrack& track, int width, int height) {
  Require(width > 0 && height > 0, ErrorKind::kParameter, "mask dimensions must be positive");
  namespace li = landmark_index;
  RoiMask mask;
  mask.width = width;
  mask.height = height;
  for (const FaceLandmarks& pts : track.frames) {
    const std::vector<Point2> hull = ConvexHull({pts.begin(), pts.end()});
    if (hull.size() < 3 || std::abs(PolygonArea(hull)) <= 1e-9) {
      Fail(ErrorKind::kGeometry, "landmark hull is degenerate");
    }
    std::vector<std::uint8_t> face = RasterizePolygon(hull, width, height);
    const std::vector<Point2> holes[] = {
        Slice(pts, li::kLeftEyeBegin, li::kLeftEyeEnd),
        Slice(pts, li::kRightEyeBegin, li::kRightEyeEnd),
        Slice(pts, li::kOuterMouthBegin, li::kOuterMouthEnd),
    };
    const char* names[] = {"left eye", "right eye", "mouth"};
    for (int h = 0; h < 3; ++h) {
      CheckSimplePolygon(holes[h], names[h]);
      const std::vector<std::uint8_t> hole = RasterizePolygon(holes[h], width, height);
      for (std::size_t i = 0; i < face.size(); ++i) face[i] = face[i] && !hole[i];
    }
    const bool valid = std::any_of(face.begin(), face.end(), [](auto v) { return v != 0; });
    mask.frames.push_back(std::move(face));
    mask.valid.push_back(valid);
  }
  return mask;
}

void WriteMaskPbm(const RoiMask& mask, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream index(dir / "index.txt");
  if (!index) Fail(ErrorKind::kIo, "cannot write " + (dir / "index.txt").string());
  index << "file,valid,pixels\n";
  for (std::size_t t = 0; t < mask.frame_count(); ++t) {
    char name[32];
    std::snprintf(name, sizeof(name), "mask_%06zu.pbm", t);
    std::ofstream out(dir / name);
    if (!out) Fail(ErrorKind::kIo, "cannot write " + (dir / name).string());
    out << "P1\n" << mask.width << " " << mask.height << "\n";
    for (int y = 0; y < mask.height; ++y) {
      for (int x = 0; x < mask.width; ++x) {
        out << (mask.frames[t][static_cast<std::size_t>(y) * mask.width + x] ? '1' : '0')
            << (x + 1 < mask.width ? ' ' : '\n');
      }
    }
    index << name << ',' << (mask.valid[t] ? 1 : 0) << ',' << mask.Count(t) << '\n';
  }
}

}  // namespace rppg
