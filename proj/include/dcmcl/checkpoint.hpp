#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dcmcl/model.hpp"

namespace dcmcl {

struct NamedTensor {
  std::string name;
  Index rows = 0;
  Index cols = 0;
  std::vector<double> values;  // row-major

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

struct OptimizerState {
  std::int64_t step = 0;
  std::vector<NamedTensor> m;
  std::vector<NamedTensor> v;

  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

struct Checkpoint {
  ModelConfig config;
  std::string run_config;  // key=value text of the run that wrote it
  std::vector<NamedTensor> params;
  std::optional<OptimizerState> optimizer;
  std::string rng_state;
  double score = 0.0;  // validation score used for best-k tracking

  const NamedTensor* find(const std::string& name) const;
  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

// Layout, all little-endian:
//   "DCMCLCKP" | u32 version | config record | str run_config | f64 score
//   u64 n_params | n x tensor
//   u8 has_optimizer [ i64 step | n x tensor (m) | n x tensor (v) ]
//   str rng_state
// tensor = str name | u32 ndim (2) | u64 rows | u64 cols | rows*cols x f64
// str = u64 length | bytes
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

template <typename S>
NamedTensor to_named(const std::string& name, const Mat<S>& m);

template <typename S>
Mat<S> from_named(const NamedTensor& t);

template <typename S>
std::vector<NamedTensor> snapshot_parameters(const Model<S>& model);

// Copies every checkpoint tensor into the model; names and shapes must match.
template <typename S>
void restore_parameters(Model<S>& model, const Checkpoint& ckpt);

// Mean of every parameter; optimizer state dropped, RNG state and run config
// from the last path. Configs must agree.
Checkpoint average_checkpoints(std::span<const Checkpoint> ckpts);
Checkpoint average_checkpoints(std::span<const std::filesystem::path> paths);

}  // namespace dcmcl
