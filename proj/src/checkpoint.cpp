#include <cstring>
#include <fstream>

#include "json.hpp"

#include "morphnerf/trainer.hpp"

namespace mnrf {

namespace {
constexpr std::uint32_t kVersion = 1;

nlohmann::json model_config_json(const FieldModelConfig& c) {
  return {{"width_divisor", c.width_divisor},
          {"subjects", c.subjects},
          {"expressions", c.expressions},
          {"hypernetwork", c.hypernetwork},
          {"seed", c.seed}};
}

FieldModelConfig model_config_from_json(const nlohmann::json& j) {
  FieldModelConfig c;
  c.width_divisor = j.at("width_divisor").get<int>();
  c.subjects = j.at("subjects").get<int>();
  c.expressions = j.at("expressions").get<int>();
  c.hypernetwork = j.at("hypernetwork").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}
}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  nlohmann::json header;
  header["iteration"] = checkpoint.iteration;
  header["model"] = model_config_json(checkpoint.model_config);
  header["train"] = nlohmann::json::parse(train_config_to_json(checkpoint.train_config));
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& [name, tensor] : checkpoint.store.tensors()) {
    tensors.push_back({{"name", name},
                       {"rows", tensor.value.rows()},
                       {"cols", tensor.value.cols()},
                       {"dtype", "f64"},
                       {"trainable", tensor.trainable}});
  }
  header["tensors"] = tensors;
  const std::string header_text = header.dump();

  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("checkpoint: cannot open " + path + " for writing");
  f.write("HMFC", 4);
  const std::uint32_t version = kVersion;
  f.write(reinterpret_cast<const char*>(&version), 4);
  const std::uint64_t header_len = header_text.size();
  f.write(reinterpret_cast<const char*>(&header_len), 8);
  f.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  for (const auto& [name, tensor] : checkpoint.store.tensors()) {
    const ad::Mat& m = tensor.value;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const double v = m(r, c);
        f.write(reinterpret_cast<const char*>(&v), 8);
      }
  }
  if (!f) throw DataError("checkpoint: short write to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("checkpoint: cannot open " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "HMFC", 4) != 0)
    throw DataError("checkpoint: bad magic in " + path);
  std::uint32_t version = 0;
  f.read(reinterpret_cast<char*>(&version), 4);
  if (!f || version != kVersion)
    throw DataError("checkpoint: unsupported version in " + path);
  std::uint64_t header_len = 0;
  f.read(reinterpret_cast<char*>(&header_len), 8);
  if (!f || header_len == 0 || header_len > (1u << 26))
    throw DataError("checkpoint: bad header length in " + path);
  std::string header_text(header_len, '\0');
  f.read(header_text.data(), static_cast<std::streamsize>(header_len));
  if (!f) throw DataError("checkpoint: truncated header in " + path);

  nlohmann::json header = nlohmann::json::parse(header_text, nullptr, false);
  if (header.is_discarded()) throw DataError("checkpoint: malformed header in " + path);

  Checkpoint out;
  try {
    out.iteration = header.at("iteration").get<std::int64_t>();
    out.model_config = model_config_from_json(header.at("model"));
    out.train_config = train_config_from_json(header.at("train").dump());
    for (const auto& entry : header.at("tensors")) {
      const std::string name = entry.at("name").get<std::string>();
      const Eigen::Index rows = entry.at("rows").get<Eigen::Index>();
      const Eigen::Index cols = entry.at("cols").get<Eigen::Index>();
      if (entry.at("dtype").get<std::string>() != "f64")
        throw DataError("checkpoint: unsupported tensor dtype");
      ad::Mat m(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) {
          double v = 0.0;
          f.read(reinterpret_cast<char*>(&v), 8);
          if (!f) throw DataError("checkpoint: truncated tensor payload in " + path);
          m(r, c) = v;
        }
      out.store.add(name, std::move(m), entry.at("trainable").get<bool>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: header field: ") + e.what());
  }
  return out;
}

FieldModel model_from_checkpoint(const Checkpoint& checkpoint) {
  return FieldModel(checkpoint.model_config, checkpoint.store);
}

}  // namespace mnrf
