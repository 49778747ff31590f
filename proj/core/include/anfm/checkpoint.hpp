#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "anfm/model.hpp"
#include "anfm/optim.hpp"
#include "anfm/rng.hpp"

namespace anfm {

struct TensorRecord {
  std::string name;
  std::vector<std::uint64_t> dims;
  std::vector<double> data;
};

// Container layout: "ANFM", u32 version, u64 length + canonical JSON config,
// u32 tensor count, per tensor (u32 length + name, u8 rank, u64 dims, LE f64
// data), u64 length + RNG state text. Sections are name prefixes such as
// "generator/".
struct CheckpointData {
  std::string config = "{}";
  std::vector<TensorRecord> tensors;
  std::string rng_state;

  const TensorRecord* find(std::string_view name) const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const CheckpointData& data);
CheckpointData decode_checkpoint(std::string_view bytes);
void save_checkpoint(const std::string& path, const CheckpointData& data);
CheckpointData load_checkpoint(const std::string& path);

void export_parameters(const ParameterStore& store, const std::string& section, CheckpointData& out);
// Every store entry must be present with a matching shape and the section must
// hold no other parameters; otherwise DataError(kIncompatible).
void import_parameters(ParameterStore& store, const std::string& section, const CheckpointData& in);

void export_adam(const Adam& adam, const ParameterStore& store, const std::string& section, CheckpointData& out);
void import_adam(Adam& adam, const ParameterStore& store, const std::string& section, const CheckpointData& in);
bool has_adam(const std::string& section, const CheckpointData& in);

std::string rng_state(const Rng& rng);
void set_rng_state(Rng& rng, const std::string& state);

// Stage-I generator checkpoint: config {"model": ..., "step": ...} plus the
// "generator/" section and optional optimizer state.
void save_generator(const std::string& path, const Model& model, const Adam* adam, const Rng* rng, long step);

struct LoadedGenerator {
  std::unique_ptr<Model> model;
  CheckpointData data;
  long step = 0;
};

LoadedGenerator load_generator(const std::string& path);
LoadedGenerator load_generator(const CheckpointData& data);

}  // namespace anfm
