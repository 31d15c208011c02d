#include "rppg/videoio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "rppg/error.hpp"

namespace rppg {
namespace fs = std::filesystem;

namespace {

constexpr char kRvidMagic[4] = {'R', 'V', 'I', 'D'};
constexpr std::uint8_t kRvidVersion = 1;
constexpr std::size_t kRvidHeaderSize = 4 + 1 + 5 * 4;

void PutU32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t GetU32(const std::vector<std::uint8_t>& in, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[offset + i]) << (8 * i);
  return v;
}

std::ifstream OpenForRead(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot open " + path.string());
  return in;
}

std::ofstream OpenForWrite(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorKind::kIo, "cannot write " + path.string());
  return out;
}

std::uint8_t ClampToByte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

double CatmullRom(double p0, double p1, double p2, double p3, double u) {
  return 0.5 * (2.0 * p1 + (-p0 + p2) * u +
                (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * u * u +
                (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * u * u * u);
}

struct SourcePosition {
  long index;   // floor of the source position
  double frac;  // in [0, 1)
};

FrameSequence Interpolate(const FrameSequence& seq,
                          const std::vector<SourcePosition>& positions,
                          Rational out_fps) {
  if (seq.frame_count() < 4) {
    Fail(ErrorKind::kInsufficientData, "cubic resampling needs at least 4 frames");
  }
  const long last = static_cast<long>(seq.frame_count()) - 1;
  auto frame = [&](long i) -> const Image& {
    return seq.frames[static_cast<std::size_t>(std::clamp(i, 0L, last))];
  };

  FrameSequence out;
  out.width = seq.width;
  out.height = seq.height;
  out.fps = out_fps;
  out.frames.reserve(positions.size());
  for (const SourcePosition& pos : positions) {
    if (pos.frac == 0.0) {
      out.frames.push_back(frame(pos.index));
      continue;
    }
    const Image& f0 = frame(pos.index - 1);
    const Image& f1 = frame(pos.index);
    const Image& f2 = frame(pos.index + 1);
    const Image& f3 = frame(pos.index + 2);
    Image img(seq.width, seq.height);
    for (std::size_t k = 0; k < img.data.size(); ++k) {
      img.data[k] = ClampToByte(
          CatmullRom(f0.data[k], f1.data[k], f2.data[k], f3.data[k], pos.frac));
    }
    out.frames.push_back(std::move(img));
  }
  return out;
}

std::string Trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

long ParseLong(const std::string& text) {
  long value = 0;
  const std::string t = Trim(text);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    Fail(ErrorKind::kFormat, "not an integer: '" + text + "'");
  }
  return value;
}

}  // namespace

std::string ToString(DatabaseTag tag) { return tag == DatabaseTag::kA ? "A" : "B"; }

DatabaseTag ParseDatabaseTag(const std::string& text) {
  const std::string t = Trim(text);
  if (t == "A") return DatabaseTag::kA;
  if (t == "B") return DatabaseTag::kB;
  Fail(ErrorKind::kFormat, "unknown database tag '" + text + "'");
}

std::string FormatDouble(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

double ParseDouble(const std::string& text) {
  const std::string t = Trim(text);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    Fail(ErrorKind::kFormat, "not a number: '" + text + "'");
  }
  return value;
}

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(Trim(current));
      current.clear();
    } else if (ch != '\r' && ch != '\n') {
      current.push_back(ch);
    }
  }
  fields.push_back(Trim(current));
  return fields;
}

void FrameSequence::Validate() const {
  Require(width > 0 && height > 0, ErrorKind::kInvariant, "frame dimensions must be positive");
  Require(fps.num > 0 && fps.den > 0, ErrorKind::kInvariant, "fps must be positive");
  Require(!frames.empty(), ErrorKind::kInvariant, "clip has no frames");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const Image& f = frames[i];
    if (f.width != width || f.height != height ||
        f.data.size() != static_cast<std::size_t>(width) * height * 3) {
      Fail(ErrorKind::kInvariant, "frame " + std::to_string(i) + " has inconsistent size");
    }
  }
}

std::vector<std::uint8_t> EncodeRvid(const FrameSequence& seq) {
  seq.Validate();
  std::vector<std::uint8_t> out;
  const std::size_t frame_bytes = static_cast<std::size_t>(seq.width) * seq.height * 3;
  out.reserve(kRvidHeaderSize + frame_bytes * seq.frame_count());
  out.insert(out.end(), std::begin(kRvidMagic), std::end(kRvidMagic));
  out.push_back(kRvidVersion);
  PutU32(out, static_cast<std::uint32_t>(seq.width));
  PutU32(out, static_cast<std::uint32_t>(seq.height));
  PutU32(out, seq.fps.num);
  PutU32(out, seq.fps.den);
  PutU32(out, static_cast<std::uint32_t>(seq.frame_count()));
  for (const Image& f : seq.frames) out.insert(out.end(), f.data.begin(), f.data.end());
  return out;
}

FrameSequence DecodeRvid(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kRvidHeaderSize) Fail(ErrorKind::kFormat, "RVID header truncated");
  if (!std::equal(std::begin(kRvidMagic), std::end(kRvidMagic), bytes.begin())) {
    Fail(ErrorKind::kFormat, "bad RVID magic");
  }
  if (bytes[4] != kRvidVersion) {
    Fail(ErrorKind::kFormat, "unsupported RVID version " + std::to_string(bytes[4]));
  }
  FrameSequence seq;
  const std::uint32_t width = GetU32(bytes, 5);
  const std::uint32_t height = GetU32(bytes, 9);
  seq.fps = {GetU32(bytes, 13), GetU32(bytes, 17)};
  const std::uint32_t count = GetU32(bytes, 21);
  if (width == 0 || height == 0 || width > (1u << 16) || height > (1u << 16)) {
    Fail(ErrorKind::kFormat, "implausible RVID dimensions");
  }
  if (seq.fps.num == 0 || seq.fps.den == 0) Fail(ErrorKind::kFormat, "RVID fps must be positive");
  if (count == 0) Fail(ErrorKind::kFormat, "RVID clip has no frames");
  seq.width = static_cast<int>(width);
  seq.height = static_cast<int>(height);
  const std::size_t frame_bytes = static_cast<std::size_t>(width) * height * 3;
  if (bytes.size() != kRvidHeaderSize + frame_bytes * count) {
    Fail(ErrorKind::kFormat, "RVID payload size does not match header");
  }
  seq.frames.reserve(count);
  auto it = bytes.begin() + kRvidHeaderSize;
  for (std::uint32_t i = 0; i < count; ++i) {
    Image img;
    img.width = seq.width;
    img.height = seq.height;
    img.data.assign(it, it + static_cast<std::ptrdiff_t>(frame_bytes));
    it += static_cast<std::ptrdiff_t>(frame_bytes);
    seq.frames.push_back(std::move(img));
  }
  return seq;
}

namespace {

Image ReadPpm(const fs::path& path) {
  std::ifstream in = OpenForRead(path);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  auto next_token = [&](auto& value) {
    in >> std::ws;
    while (in.peek() == '#') {
      std::string comment;
      std::getline(in, comment);
      in >> std::ws;
    }
    in >> value;
  };
  next_token(magic);
  if (magic != "P6") Fail(ErrorKind::kFormat, path.string() + ": expected binary PPM (P6)");
  next_token(w);
  next_token(h);
  next_token(maxval);
  if (!in || w <= 0 || h <= 0 || maxval != 255) {
    Fail(ErrorKind::kFormat, path.string() + ": bad PPM header");
  }
  in.get();
  Image img(w, h);
  in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.data.size())) {
    Fail(ErrorKind::kFormat, path.string() + ": truncated PPM payload");
  }
  return img;
}

FrameSequence ReadPpmDirectory(const fs::path& dir) {
  const fs::path meta_path = dir / "meta.txt";
  if (!fs::exists(meta_path)) Fail(ErrorKind::kFormat, dir.string() + ": missing meta.txt");
  std::ifstream meta = OpenForRead(meta_path);
  FrameSequence seq;
  std::string line;
  bool have_fps = false;
  while (std::getline(meta, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = Trim(line.substr(0, eq));
    const std::string value = Trim(line.substr(eq + 1));
    if (key == "fps") {
      const auto slash = value.find('/');
      seq.fps.num = static_cast<std::uint32_t>(ParseLong(value.substr(0, slash)));
      seq.fps.den = slash == std::string::npos
                        ? 1u
                        : static_cast<std::uint32_t>(ParseLong(value.substr(slash + 1)));
      have_fps = true;
    }
  }
  if (!have_fps) Fail(ErrorKind::kFormat, meta_path.string() + ": no fps entry");

  std::vector<fs::path> frame_files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".ppm") frame_files.push_back(entry.path());
  }
  std::sort(frame_files.begin(), frame_files.end());
  if (frame_files.empty()) Fail(ErrorKind::kFormat, dir.string() + ": no .ppm frames");
  for (const auto& file : frame_files) seq.frames.push_back(ReadPpm(file));
  seq.width = seq.frames.front().width;
  seq.height = seq.frames.front().height;
  seq.Validate();
  return seq;
}

}  // namespace

FrameSequence ReadClip(const fs::path& path) {
  if (fs::is_directory(path)) return ReadPpmDirectory(path);
  std::ifstream in = OpenForRead(path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return DecodeRvid(bytes);
}

void WriteClip(const FrameSequence& seq, const fs::path& path) {
  const std::vector<std::uint8_t> bytes = EncodeRvid(seq);
  std::ofstream out = OpenForWrite(path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) Fail(ErrorKind::kIo, "short write to " + path.string());
}

void WritePpmDirectory(const FrameSequence& seq, const fs::path& dir) {
  seq.Validate();
  fs::create_directories(dir);
  {
    std::ofstream meta = OpenForWrite(dir / "meta.txt");
    meta << "fps=" << seq.fps.num << "/" << seq.fps.den << "\n";
  }
  for (std::size_t i = 0; i < seq.frame_count(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%06zu.ppm", i);
    std::ofstream out = OpenForWrite(dir / name);
    out << "P6\n" << seq.width << " " << seq.height << "\n255\n";
    const auto& data = seq.frames[i].data;
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  }
}

FrameSequence ResampleFps(const FrameSequence& seq, Rational target_fps) {
  seq.Validate();
  Require(target_fps.num > 0 && target_fps.den > 0, ErrorKind::kParameter,
          "target fps must be positive");
  // Source position of output frame j is j * a / b, kept in integers so that
  // equal rates reproduce the input exactly.
  const std::uint64_t a = static_cast<std::uint64_t>(seq.fps.num) * target_fps.den;
  const std::uint64_t b = static_cast<std::uint64_t>(seq.fps.den) * target_fps.num;
  const std::size_t out_frames = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(static_cast<double>(seq.frame_count()) * b / a)));
  std::vector<SourcePosition> positions(out_frames);
  for (std::size_t j = 0; j < out_frames; ++j) {
    const std::uint64_t scaled = j * a;
    positions[j] = {static_cast<long>(scaled / b), static_cast<double>(scaled % b) / b};
  }
  return Interpolate(seq, positions, target_fps);
}

FrameSequence ResampleByStep(const FrameSequence& seq, double step, std::size_t out_frames) {
  seq.Validate();
  Require(step > 0.0 && std::isfinite(step), ErrorKind::kParameter, "step must be positive");
  Require(out_frames >= 1, ErrorKind::kParameter, "need at least one output frame");
  std::vector<SourcePosition> positions(out_frames);
  for (std::size_t j = 0; j < out_frames; ++j) {
    const double s = static_cast<double>(j) * step;
    const double base = std::floor(s);
    positions[j] = {static_cast<long>(base), s - base};
  }
  return Interpolate(seq, positions, seq.fps);
}

LandmarkTrack ResampleTrack(const LandmarkTrack& track, double step, std::size_t out_frames) {
  Require(!track.frames.empty(), ErrorKind::kInsufficientData, "empty landmark track");
  const double last = static_cast<double>(track.frame_count() - 1);
  LandmarkTrack out;
  out.frames.reserve(out_frames);
  for (std::size_t j = 0; j < out_frames; ++j) {
    const double s = std::min(static_cast<double>(j) * step, last);
    const auto i0 = static_cast<std::size_t>(std::floor(s));
    const std::size_t i1 = std::min(i0 + 1, track.frame_count() - 1);
    const double u = s - static_cast<double>(i0);
    FaceLandmarks pts;
    for (int k = 0; k < kLandmarkCount; ++k) {
      const Point2& p = track.frames[i0][k];
      const Point2& q = track.frames[i1][k];
      pts[k] = {p.x + u * (q.x - p.x), p.y + u * (q.y - p.y)};
    }
    out.frames.push_back(pts);
  }
  return out;
}

Rect LandmarkBox(const FaceLandmarks& points, int frame_width, int frame_height, double margin) {
  double min_x = std::numeric_limits<double>::infinity(), max_x = -min_x;
  double min_y = min_x, max_y = -min_x;
  for (const Point2& p : points) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  const double w = max_x - min_x;
  const double h = max_y - min_y;
  if (!(w > 0.0) || !(h > 0.0)) Fail(ErrorKind::kGeometry, "degenerate landmark bounding box");
  const int x0 = std::max(0, static_cast<int>(std::floor(min_x - margin * w)));
  const int y0 = std::max(0, static_cast<int>(std::floor(min_y - margin * h)));
  const int x1 = std::min(frame_width, static_cast<int>(std::ceil(max_x + margin * w)));
  const int y1 = std::min(frame_height, static_cast<int>(std::ceil(max_y + margin * h)));
  if (x1 <= x0 || y1 <= y0) Fail(ErrorKind::kGeometry, "landmark box lies outside the frame");
  return {x0, y0, x1 - x0, y1 - y0};
}

FrameSequence CropRoiPool(const FrameSequence& seq, const LandmarkTrack& track, int out_w,
                          int out_h) {
  seq.Validate();
  Require(out_w > 0 && out_h > 0, ErrorKind::kParameter, "output size must be positive");
  Require(track.frame_count() == seq.frame_count(), ErrorKind::kInvariant,
          "landmark track length does not match clip");
  FrameSequence out;
  out.width = out_w;
  out.height = out_h;
  out.fps = seq.fps;
  out.frames.reserve(seq.frame_count());
  for (std::size_t t = 0; t < seq.frame_count(); ++t) {
    const Rect box = LandmarkBox(track.frames[t], seq.width, seq.height);
    const Image& src = seq.frames[t];
    Image img(out_w, out_h);
    for (int oy = 0; oy < out_h; ++oy) {
      const int ys = box.y + static_cast<int>(static_cast<long>(oy) * box.height / out_h);
      const int ye = std::max(ys + 1, box.y + static_cast<int>(static_cast<long>(oy + 1) * box.height / out_h));
      for (int ox = 0; ox < out_w; ++ox) {
        const int xs = box.x + static_cast<int>(static_cast<long>(ox) * box.width / out_w);
        const int xe = std::max(xs + 1, box.x + static_cast<int>(static_cast<long>(ox + 1) * box.width / out_w));
        const double n = static_cast<double>(ye - ys) * (xe - xs);
        for (int c = 0; c < 3; ++c) {
          double sum = 0.0;
          for (int y = ys; y < ye; ++y)
            for (int x = xs; x < xe; ++x) sum += src.at(x, y, c);
          img.at(ox, oy, c) = ClampToByte(sum / n);
        }
      }
    }
    out.frames.push_back(std::move(img));
  }
  return out;
}

LandmarkTrack ReadLandmarks(const fs::path& path, std::size_t frame_count) {
  std::ifstream in = OpenForRead(path);
  std::string line;
  if (!std::getline(in, line) || SplitCsvLine(line) != std::vector<std::string>{"frame", "point", "x", "y"}) {
    Fail(ErrorKind::kFormat, path.string() + ": expected header 'frame,point,x,y'");
  }
  LandmarkTrack track;
  track.frames.resize(frame_count);
  std::vector<std::set<int>> seen(frame_count);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    const auto fields = SplitCsvLine(line);
    if (fields.size() != 4) {
      Fail(ErrorKind::kFormat, path.string() + ":" + std::to_string(line_no) + ": expected 4 fields");
    }
    const long frame = ParseLong(fields[0]);
    const long point = ParseLong(fields[1]);
    if (frame < 0 || static_cast<std::size_t>(frame) >= frame_count) {
      Fail(ErrorKind::kFormat, path.string() + ": frame index " + fields[0] + " out of range");
    }
    if (point < 0 || point >= kLandmarkCount) {
      Fail(ErrorKind::kFormat, path.string() + ": point index " + fields[1] + " out of range");
    }
    const Point2 p{ParseDouble(fields[2]), ParseDouble(fields[3])};
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      Fail(ErrorKind::kFormat, path.string() + ": non-finite coordinate");
    }
    if (!seen[frame].insert(static_cast<int>(point)).second) {
      Fail(ErrorKind::kFormat, path.string() + ": duplicate point " + fields[1] + " in frame " + fields[0]);
    }
    track.frames[frame][point] = p;
  }
  for (std::size_t f = 0; f < frame_count; ++f) {
    if (seen[f].size() != kLandmarkCount) {
      Fail(ErrorKind::kFormat, path.string() + ": frame " + std::to_string(f) + " has " +
                                   std::to_string(seen[f].size()) + " points, expected 68");
    }
  }
  return track;
}

void WriteLandmarks(const LandmarkTrack& track, const fs::path& path) {
  std::ofstream out = OpenForWrite(path);
  out << "frame,point,x,y\n";
  for (std::size_t f = 0; f < track.frame_count(); ++f) {
    for (int k = 0; k < kLandmarkCount; ++k) {
      const Point2& p = track.frames[f][k];
      out << f << ',' << k << ',' << FormatDouble(p.x) << ',' << FormatDouble(p.y) << '\n';
    }
  }
  if (!out) Fail(ErrorKind::kIo, "short write to " + path.string());
}

std::vector<ClipRecord> ReadManifest(const fs::path& path) {
  std::ifstream in = OpenForRead(path);
  std::string line;
  const std::vector<std::string> header = {"sample_id", "path", "landmarks_path", "database_tag", "gt_hr"};
  if (!std::getline(in, line) || SplitCsvLine(line) != header) {
    Fail(ErrorKind::kFormat, path.string() + ": expected header 'sample_id,path,landmarks_path,database_tag,gt_hr'");
  }
  std::vector<ClipRecord> records;
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    if (Trim(line).empty()) continue;
    const auto fields = SplitCsvLine(line);
    if (fields.size() != header.size()) Fail(ErrorKind::kFormat, path.string() + ": bad row '" + line + "'");
    ClipRecord rec;
    rec.sample_id = fields[0];
    rec.path = fields[1];
    rec.landmarks_path = fields[2];
    rec.database_tag = ParseDatabaseTag(fields[3]);
    if (!fields[4].empty()) {
      const double hr = ParseDouble(fields[4]);
      if (!(hr > 0.0 && hr < 300.0)) {
        Fail(ErrorKind::kValidation, "ground truth HR out of (0, 300) for " + rec.sample_id);
      }
      rec.ground_truth_hr = hr;
    }
    if (rec.sample_id.empty()) Fail(ErrorKind::kFormat, path.string() + ": empty sample_id");
    if (!ids.insert(rec.sample_id).second) {
      Fail(ErrorKind::kValidation, "duplicate sample_id " + rec.sample_id);
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void WriteManifest(const std::vector<ClipRecord>& records, const fs::path& path) {
  std::ofstream out = OpenForWrite(path);
  out << "sample_id,path,landmarks_path,database_tag,gt_hr\n";
  for (const ClipRecord& r : records) {
    out << r.sample_id << ',' << r.path << ',' << r.landmarks_path << ',' << ToString(r.database_tag) << ',';
    if (r.ground_truth_hr) out << FormatDouble(*r.ground_truth_hr);
    out << '\n';
  }
  if (!out) Fail(ErrorKind::kIo, "short write to " + path.string());
}

}  // namespace rppg
