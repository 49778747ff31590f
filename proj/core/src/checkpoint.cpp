#include "anfm/checkpoint.hpp"

#include <sstream>

#include <json.hpp>

#include "anfm/errors.hpp"
#include "binary_io.hpp"

namespace anfm {

using detail::put;
using detail::put_f64;
using detail::Reader;
using K = DataError::Kind;

const TensorRecord* CheckpointData::find(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

std::string encode_checkpoint(const CheckpointData& data) {
  std::string out = "ANFM";
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, data.config.size());
  out += data.config;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(data.tensors.size()));
  for (const auto& t : data.tensors) {
    std::uint64_t count = 1;
    for (auto d : t.dims) count *= d;
    if (count != t.data.size()) throw std::invalid_argument("checkpoint tensor '" + t.name + "' has inconsistent dims");
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) put<std::uint64_t>(out, d);
    for (double x : t.data) put_f64(out, x);
  }
  put<std::uint64_t>(out, data.rng_state.size());
  out += data.rng_state;
  return out;
}

CheckpointData decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < 8) throw DataError(K::kHeader, "checkpoint: header too short");
  if (bytes.substr(0, 4) != "ANFM") throw DataError(K::kBadMagic, "checkpoint: bad magic");
  Reader r(bytes.substr(4), "checkpoint");
  const auto version = r.get<std::uint32_t>(K::kHeader, "version");
  if (version != kCheckpointVersion) throw DataError(K::kVersion, "checkpoint: unsupported version " + std::to_string(version));
  CheckpointData data;
  const auto clen = r.get<std::uint64_t>(K::kTruncated, "config length");
  data.config = std::string(r.bytes(clen, K::kTruncated, "config"));
  const auto count = r.get<std::uint32_t>(K::kTruncated, "tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    TensorRecord t;
    const auto nlen = r.get<std::uint32_t>(K::kTruncated, "tensor name");
    t.name = std::string(r.bytes(nlen, K::kTruncated, "tensor name"));
    const auto rank = r.get<std::uint8_t>(K::kTruncated, "tensor rank");
    std::uint64_t size = 1;
    for (int d = 0; d < rank; ++d) {
      t.dims.push_back(r.get<std::uint64_t>(K::kTruncated, "tensor dims"));
      size *= t.dims.back();
    }
    if (size > r.remaining() / 8) throw DataError(K::kTruncated, "checkpoint: truncated tensor '" + t.name + "'");
    t.data.resize(size);
    for (auto& x : t.data) x = r.get_f64(K::kTruncated, "tensor data");
    data.tensors.push_back(std::move(t));
  }
  const auto rlen = r.get<std::uint64_t>(K::kTruncated, "rng state length");
  data.rng_state = std::string(r.bytes(rlen, K::kTruncated, "rng state"));
  if (r.remaining() != 0) throw DataError(K::kMalformed, "checkpoint: trailing bytes");
  return data;
}

void save_checkpoint(const std::string& path, const CheckpointData& data) {
  detail::write_file(path, encode_checkpoint(data));
}

CheckpointData load_checkpoint(const std::string& path) { return decode_checkpoint(detail::read_file(path)); }

void export_parameters(const ParameterStore& store, const std::string& section, CheckpointData& out) {
  for (const auto& [name, t] : store.entries()) {
    out.tensors.push_back({section + name, {static_cast<std::uint64_t>(t.rows()), static_cast<std::uint64_t>(t.cols())}, t.data()});
  }
}

namespace {

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

void check_shape(const TensorRecord& rec, int rows, int cols) {
  if (rec.dims.size() != 2 || rec.dims[0] != static_cast<std::uint64_t>(rows) || rec.dims[1] != static_cast<std::uint64_t>(cols)) {
    throw DataError(K::kIncompatible, "incompatible checkpoint: shape mismatch for '" + rec.name + "'");
  }
}

}  // namespace

void import_parameters(ParameterStore& store, const std::string& section, const CheckpointData& in) {
  std::size_t matched = 0;
  for (const auto& t : in.tensors) {
    if (starts_with(t.name, section) && !starts_with(t.name, section + "adam/")) ++matched;
  }
  if (matched != store.size()) {
    throw DataError(K::kIncompatible, "incompatible checkpoint: section '" + section + "' holds " +
                                          std::to_string(matched) + " tensors, model expects " +
                                          std::to_string(store.size()));
  }
  for (const auto& [name, t] : store.entries()) {
    const TensorRecord* rec = in.find(section + name);
    if (!rec) throw DataError(K::kIncompatible, "incompatible checkpoint: missing '" + section + name + "'");
    check_shape(*rec, t.rows(), t.cols());
  }
  for (const auto& [name, t] : store.entries()) {
    Tensor handle = t;  // shares storage with the stored parameter
    handle.mutable_data() = in.find(section + name)->data;
  }
}

void export_adam(const Adam& adam, const ParameterStore& store, const std::string& section, CheckpointData& out) {
  const auto& entries = store.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto dims = std::vector<std::uint64_t>{static_cast<std::uint64_t>(entries[i].second.rows()),
                                                 static_cast<std::uint64_t>(entries[i].second.cols())};
    out.tensors.push_back({section + "adam/m/" + entries[i].first, dims, adam.state.m[i]});
    out.tensors.push_back({section + "adam/v/" + entries[i].first, dims, adam.state.v[i]});
  }
  out.tensors.push_back({section + "adam/step", {1}, {static_cast<double>(adam.state.step)}});
}

bool has_adam(const std::string& section, const CheckpointData& in) { return in.find(section + "adam/step") != nullptr; }

void import_adam(Adam& adam, const ParameterStore& store, const std::string& section, const CheckpointData& in) {
  const TensorRecord* step = in.find(section + "adam/step");
  if (!step || step->data.size() != 1) throw DataError(K::kIncompatible, "incompatible checkpoint: no optimizer state");
  const auto& entries = store.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const TensorRecord* m = in.find(section + "adam/m/" + entries[i].first);
    const TensorRecord* v = in.find(section + "adam/v/" + entries[i].first);
    if (!m || !v) throw DataError(K::kIncompatible, "incompatible checkpoint: missing optimizer moments for '" + entries[i].first + "'");
    check_shape(*m, entries[i].second.rows(), entries[i].second.cols());
    check_shape(*v, entries[i].second.rows(), entries[i].second.cols());
    adam.state.m[i] = m->data;
    adam.state.v[i] = v->data;
  }
  adam.state.step = static_cast<long>(step->data[0]);
}

std::string rng_state(const Rng& rng) {
  std::ostringstream ss;
  ss << rng;
  return ss.str();
}

void set_rng_state(Rng& rng, const std::string& state) {
  std::istringstream ss(state);
  ss >> rng;
  if (!ss) throw DataError(K::kMalformed, "checkpoint: unreadable RNG state");
}

void save_generator(const std::string& path, const Model& model, const Adam* adam, const Rng* rng, long step) {
  CheckpointData data;
  nlohmann::json cfg;
  cfg["model"] = nlohmann::json::parse(to_json(model.config()));
  cfg["step"] = step;
  data.config = cfg.dump();
  export_parameters(model.parameters(), "generator/", data);
  if (adam) export_adam(*adam, model.parameters(), "generator/", data);
  if (rng) data.rng_state = rng_state(*rng);
  save_checkpoint(path, data);
}

LoadedGenerator load_generator(const CheckpointData& data) {
  nlohmann::json cfg;
  try {
    cfg = nlohmann::json::parse(data.config);
  } catch (const nlohmann::json::exception&) {
    throw DataError(K::kMalformed, "checkpoint: config is not valid JSON");
  }
  if (!cfg.is_object() || !cfg.contains("model")) throw DataError(K::kIncompatible, "incompatible checkpoint: no model config");
  LoadedGenerator out;
  ModelConfig mc;
  try {
    mc = model_config_from_json(cfg["model"].dump());
  } catch (const ConfigError& e) {
    throw DataError(K::kIncompatible, std::string("incompatible checkpoint: ") + e.what());
  }
  out.model = std::make_unique<Model>(mc, 0);
  import_parameters(out.model->parameters(), "generator/", data);
  if (cfg.contains("step") && cfg["step"].is_number_integer()) out.step = cfg["step"].get<long>();
  out.data = data;
  return out;
}

LoadedGenerator load_generator(const std::string& path) { return load_generator(load_checkpoint(path)); }

}  // namespace anfm
