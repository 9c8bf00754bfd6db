#pragma once

#include <filesystem>
#include <string>
#include <tuple>
#include <vector>

#include "spikedet/events.hpp"

namespace spikedet {

enum class DatasetAdapter { csv, fred, evuav };

DatasetAdapter adapter_from_name(const std::string& name);

// Text format: one `t_us,x,y,p` row per event, p in {0,1}. No header.
void save_events_csv(const std::filesystem::path& path, const EventStream& stream);
EventStream load_events_csv(const std::filesystem::path& path,
                            const SensorGeometry* geometry = nullptr);

// Fixed-width little-endian records (u64 t, u16 x, u16 y, u8 p) behind a
// small header carrying geometry and duration.
void save_events_binary(const std::filesystem::path& path, const EventStream& stream);
EventStream load_events_binary(const std::filesystem::path& path);

// Ground truth as JSON-lines, one record per (frame, target):
// {"frame":k,"id":i,"x":..,"y":..,"w":..,"h":..}
void save_gt_jsonl(const std::filesystem::path& path,
                   const std::vector<GroundTruthBox>& gt);
std::vector<GroundTruthBox> load_gt_jsonl(const std::filesystem::path& path);

struct Dataset {
  EventStream stream;
  std::vector<GroundTruthBox> gt;
  SensorGeometry geometry;
};

// Adapters normalize every source layout into the same in-memory model:
//   csv:   events.csv [+ gt.jsonl] [+ geometry.json], or a bare .csv file
//   fred:  events.csv + coordinates.txt (`frame id x y w h` per drone per
//          frame), default geometry 1280x720
//   evuav: events.csv with a 5th per-event target-label column; boxes derived
//          per 20 ms window as tight boxes of labelled events, default
//          geometry 346x260
Dataset load_dataset(const std::filesystem::path& path, DatasetAdapter adapter);

}  // namespace spikedet
