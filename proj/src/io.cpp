#include "spikedet/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "spikedet/errors.hpp"

namespace spikedet {

namespace fs = std::filesystem;
using nlohmann::json;

DatasetAdapter adapter_from_name(const std::string& name) {
  if (name == "csv") return DatasetAdapter::csv;
  if (name == "fred") return DatasetAdapter::fred;
  if (name == "evuav") return DatasetAdapter::evuav;
  throw UsageError("unknown adapter '" + name + "' (expected csv, fred, or evuav)");
}

namespace {

template <typename T>
T parse_field(std::string_view field, const std::string& file, std::size_t line,
              const char* what) {
  T value{};
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    throw ParseError(file, line, std::string("bad ") + what + " value '" +
                                     std::string(field) + "'");
  return value;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(s.substr(start));
      break;
    }
    parts.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return parts;
}

void validate_event(const Event& e, const SensorGeometry& g, const std::string& file,
                    std::size_t line) {
  if (e.x >= g.width)
    throw ParseError(file, line, "x=" + std::to_string(e.x) + " outside sensor width " +
                                     std::to_string(g.width));
  if (e.y >= g.height)
    throw ParseError(file, line, "y=" + std::to_string(e.y) + " outside sensor height " +
                                     std::to_string(g.height));
}

void finalize_stream(EventStream& stream, const std::string& file) {
  for (std::size_t i = 1; i < stream.events.size(); ++i) {
    if (stream.events[i].t_us < stream.events[i - 1].t_us) {
      // Source logs are usually sorted already; tolerate mild disorder.
      std::stable_sort(stream.events.begin(), stream.events.end(),
                       [](const Event& a, const Event& b) { return a.t_us < b.t_us; });
      break;
    }
  }
  if (!stream.events.empty() && stream.duration_us == 0)
    stream.duration_us = stream.events.back().t_us + 1;
  (void)file;
}

SensorGeometry load_geometry_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  json j = json::parse(in, nullptr, true, true);
  SensorGeometry g;
  g.width = j.at("width").get<int>();
  g.height = j.at("height").get<int>();
  g.name = j.value("name", std::string{});
  if (g.width <= 0 || g.height <= 0)
    throw DataError(path.string() + ": geometry must be positive");
  return g;
}

// events.csv with an extra per-event label column (0 = background, >0 = target
// id). Returns the labels alongside the stream, kept in event order.
EventStream load_events_csv_labeled(const fs::path& path, const SensorGeometry& g,
                                    std::vector<int>& labels) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::pair<Event, int>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto parts = split(line, ',');
    if (parts.size() != 5)
      throw ParseError(path.string(), lineno,
                       "expected 5 fields t,x,y,p,label, got " +
                           std::to_string(parts.size()));
    Event e;
    e.t_us = parse_field<uint64_t>(parts[0], path.string(), lineno, "t");
    e.x = parse_field<uint16_t>(parts[1], path.string(), lineno, "x");
    e.y = parse_field<uint16_t>(parts[2], path.string(), lineno, "y");
    e.polarity = parse_field<uint16_t>(parts[3], path.string(), lineno, "p") ? 1 : 0;
    validate_event(e, g, path.string(), lineno);
    rows.emplace_back(e, parse_field<int>(parts[4], path.string(), lineno, "label"));
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return a.first.t_us < b.first.t_us;
  });
  EventStream stream;
  stream.geometry = g;
  stream.events.reserve(rows.size());
  labels.reserve(rows.size());
  for (const auto& [e, label] : rows) {
    stream.events.push_back(e);
    labels.push_back(label);
  }
  if (!stream.events.empty()) stream.duration_us = stream.events.back().t_us + 1;
  return stream;
}

std::vector<GroundTruthBox> load_fred_coordinates(const fs::path& path,
                                                  const SensorGeometry& g) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<GroundTruthBox> gt;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    GroundTruthBox b;
    if (!(ss >> b.frame_index >> b.target_id >> b.x >> b.y >> b.w >> b.h))
      throw ParseError(path.string(), lineno, "expected `frame id x y w h`");
    if (b.w <= 0.0 || b.h <= 0.0)
      throw ParseError(path.string(), lineno, "box must have positive size");
    Box clipped = clip_to(b.box(), g);
    b.x = clipped.x;
    b.y = clipped.y;
    b.w = clipped.w;
    b.h = clipped.h;
    if (b.w <= 0.0 || b.h <= 0.0)
      throw ParseError(path.string(), lineno, "box lies outside sensor geometry");
    gt.push_back(b);
  }
  return gt;
}

constexpr char kBinMagic[8] = {'S', 'D', 'E', 'V', '0', '0', '0', '1'};

}  // namespace

void save_events_csv(const fs::path& path, const EventStream& stream) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const Event& e : stream.events) {
    out << e.t_us << ',' << e.x << ',' << e.y << ',' << int(e.polarity) << '\n';
  }
}

EventStream load_events_csv(const fs::path& path, const SensorGeometry* geometry) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  EventStream stream;
  std::string line;
  std::size_t lineno = 0;
  uint16_t max_x = 0, max_y = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto parts = split(line, ',');
    if (parts.size() != 4)
      throw ParseError(path.string(), lineno,
                       "expected 4 fields t,x,y,p, got " + std::to_string(parts.size()));
    Event e;
    e.t_us = parse_field<uint64_t>(parts[0], path.string(), lineno, "t");
    e.x = parse_field<uint16_t>(parts[1], path.string(), lineno, "x");
    e.y = parse_field<uint16_t>(parts[2], path.string(), lineno, "y");
    uint16_t p = parse_field<uint16_t>(parts[3], path.string(), lineno, "p");
    if (p > 1) throw ParseError(path.string(), lineno, "polarity must be 0 or 1");
    e.polarity = static_cast<uint8_t>(p);
    if (geometry) validate_event(e, *geometry, path.string(), lineno);
    max_x = std::max(max_x, e.x);
    max_y = std::max(max_y, e.y);
    stream.events.push_back(e);
  }
  if (geometry) {
    stream.geometry = *geometry;
  } else {
    stream.geometry = SensorGeometry{max_x + 1, max_y + 1, path.stem().string()};
  }
  finalize_stream(stream, path.string());
  return stream;
}

void save_events_binary(const fs::path& path, const EventStream& stream) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(kBinMagic, sizeof(kBinMagic));
  auto put16 = [&](uint16_t v) {
    char b[2] = {char(v & 0xff), char(v >> 8)};
    out.write(b, 2);
  };
  auto put64 = [&](uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = char((v >> (8 * i)) & 0xff);
    out.write(b, 8);
  };
  put16(static_cast<uint16_t>(stream.geometry.width));
  put16(static_cast<uint16_t>(stream.geometry.height));
  put64(stream.duration_us);
  put64(stream.events.size());
  for (const Event& e : stream.events) {
    put64(e.t_us);
    put16(e.x);
    put16(e.y);
    out.put(char(e.polarity));
  }
}

EventStream load_events_binary(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kBinMagic, 8) != 0)
    throw DataError(path.string() + ": not a spikedet binary event file");
  auto get16 = [&]() -> uint16_t {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
  };
  auto get64 = [&]() -> uint64_t {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(b[i]) << (8 * i);
    return v;
  };
  EventStream stream;
  stream.geometry.width = get16();
  stream.geometry.height = get16();
  stream.duration_us = get64();
  uint64_t count = get64();
  stream.events.resize(count);
  for (uint64_t i = 0; i < count; ++i) {
    stream.events[i].t_us = get64();
    stream.events[i].x = get16();
    stream.events[i].y = get16();
    stream.events[i].polarity = static_cast<uint8_t>(in.get());
  }
  if (!in) throw DataError(path.string() + ": truncated event file");
  return stream;
}

void save_gt_jsonl(const fs::path& path, const std::vector<GroundTruthBox>& gt) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const GroundTruthBox& b : gt) {
    json j{{"frame", b.frame_index}, {"id", b.target_id}, {"x", b.x},
           {"y", b.y},              {"w", b.w},           {"h", b.h}};
    out << j.dump() << '\n';
  }
}

std::vector<GroundTruthBox> load_gt_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<GroundTruthBox> gt;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(path.string(), lineno, e.what());
    }
    GroundTruthBox b;
    b.frame_index = j.at("frame").get<int>();
    b.target_id = j.at("id").get<int>();
    b.x = j.at("x").get<double>();
    b.y = j.at("y").get<double>();
    b.w = j.at("w").get<double>();
    b.h = j.at("h").get<double>();
    if (b.w <= 0.0 || b.h <= 0.0)
      throw ParseError(path.string(), lineno, "box must have positive size");
    gt.push_back(b);
  }
  return gt;
}

Dataset load_dataset(const fs::path& path, DatasetAdapter adapter) {
  if (!fs::exists(path)) throw DataError("no such path: " + path.string());
  const bool is_dir = fs::is_directory(path);
  const fs::path dir = is_dir ? path : path.parent_path();

  auto optional_geometry = [&](SensorGeometry fallback) -> SensorGeometry {
    fs::path gpath = dir / "geometry.json";
    if (fs::exists(gpath)) return load_geometry_json(gpath);
    return fallback;
  };

  Dataset ds;
  switch (adapter) {
    case DatasetAdapter::csv: {
      fs::path events = is_dir ? dir / "events.csv" : path;
      fs::path gpath = dir / "geometry.json";
      if (fs::exists(gpath)) {
        SensorGeometry g = load_geometry_json(gpath);
        ds.stream = load_events_csv(events, &g);
      } else {
        ds.stream = load_events_csv(events, nullptr);
      }
      fs::path gt = dir / "gt.jsonl";
      if (fs::exists(gt)) ds.gt = load_gt_jsonl(gt);
      break;
    }
    case DatasetAdapter::fred: {
      SensorGeometry g = optional_geometry({1280, 720, "fred"});
      ds.stream = load_events_csv(dir / "events.csv", &g);
      fs::path coords = dir / "coordinates.txt";
      if (fs::exists(coords)) ds.gt = load_fred_coordinates(coords, g);
      break;
    }
    case DatasetAdapter::evuav: {
      SensorGeometry g = optional_geometry({346, 260, "evuav"});
      std::vector<int> labels;
      ds.stream = load_events_csv_labeled(dir / "events.csv", g, labels);
      // Tight per-(window, label) boxes from the per-event segmentation labels.
      const uint64_t window = 20'000;
      std::map<std::pair<int, int>, Box> boxes;  // (frame, label) -> bounds
      for (std::size_t i = 0; i < ds.stream.events.size(); ++i) {
        if (labels[i] <= 0) continue;
        const Event& e = ds.stream.events[i];
        int frame = static_cast<int>(e.t_us / window);
        auto key = std::make_pair(frame, labels[i]);
        auto it = boxes.find(key);
        if (it == boxes.end()) {
          boxes.emplace(key, Box{double(e.x), double(e.y), 1.0, 1.0});
        } else {
          Box& b = it->second;
          double x2 = std::max(b.x2(), e.x + 1.0);
          double y2 = std::max(b.y2(), e.y + 1.0);
          b.x = std::min(b.x, double(e.x));
          b.y = std::min(b.y, double(e.y));
          b.w = x2 - b.x;
          b.h = y2 - b.y;
        }
      }
      for (const auto& [key, b] : boxes)
        ds.gt.push_back(GroundTruthBox{key.first, b.x, b.y, b.w, b.h, key.second});
      break;
    }
  }
  ds.geometry = ds.stream.geometry;
  return ds;
}

}  // namespace spikedet
