#pragma once

#include <string>
#include <vector>

#include "imam/io.hpp"
#include "imam/synthdata.hpp"

namespace imam {

struct DatasetSpec {
  int classes = kNumClasses;
  int per_class_train = 64;
  int per_class_test = 16;
  int cloud_points = 2048;
  int occ_uniform = 512;
  int occ_near = 512;
  u64 seed = 1;
};

struct ShapeRecord {
  AnalyticShape shape;
  PointCloud cloud;     // canonical surface sample
  OccupancySample occ;  // canonical occupancy queries
};

// One split of the corpus; records are ordered class-major, seed-minor.
struct Dataset {
  DatasetSpec spec;
  std::string split;  // "train" | "test"
  std::vector<ShapeRecord> records;

  int size() const { return int(records.size()); }
};

// Per-shape generator seed. Train and test draw from disjoint ranges, so the
// splits can never share a shape.
u64 shape_seed(const DatasetSpec& spec, const std::string& split, int index);

Dataset make_dataset(const DatasetSpec& spec, const std::string& split);

json dataset_manifest(const Dataset& ds);

// Writes manifest.json plus data.imam under dir (created if needed).
void write_dataset(const Dataset& ds, const std::string& dir);
Dataset read_dataset(const std::string& dir);

// Content fingerprint of a written split, for cache keys.
std::string dataset_fingerprint(const std::string& dir);

// $IMAM_DATA_DIR when set, otherwise "data".
std::string default_data_dir();

}  // namespace imam
