#pragma once

#include "mmgpvae/common.hpp"
#include "mmgpvae/dataset.hpp"
#include "mmgpvae/train.hpp"

#include <map>
#include <string>
#include <vector>

namespace mmgpvae {

/// One named tensor of a container file: 64-bit little-endian floats,
/// row-major, rank 1..3.
struct TensorEntry {
  std::vector<std::uint64_t> dims;
  std::vector<double> data;
};

/// Container layout: magic, format version, JSON metadata, then a directory
/// of named tensors followed immediately by their payloads.
struct Archive {
  std::string meta;  // JSON text
  std::map<std::string, TensorEntry> tensors;

  bool has(const std::string& name) const { return tensors.count(name) > 0; }
};

void save_archive(const std::string& path, const Archive& archive);
Archive load_archive(const std::string& path);

/// Dataset container: observations, split lists, and any ground truth.
void write_dataset(const std::string& path, const Dataset& data);
Dataset read_dataset(const std::string& path);

/// Model checkpoint: config echo, epoch counter, optimizer moments, and all
/// learnable tensors. Loading reproduces the ELBO bit-for-bit.
void write_checkpoint(const std::string& path, const TrainState& state,
                      const TrainConfig& train_cfg, const std::string& extra_meta_json = "");
struct LoadedCheckpoint {
  TrainState state;
  TrainConfig train_cfg;
  std::string meta;  // full metadata JSON
};
LoadedCheckpoint read_checkpoint(const std::string& path);

std::string format_double(double v);
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

/// Exclusive lock file guarding an output directory; released on destruction.
class DirLock {
 public:
  explicit DirLock(const std::string& dir);
  ~DirLock();
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  std::string path_;
};

}  // namespace mmgpvae
