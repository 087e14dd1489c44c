#include <bit>
#include <cstring>

#include "tsvmorph/model.hpp"

namespace tsvmorph {

namespace {

constexpr char kMagic[8] = {'T', 'S', 'V', 'M', 'C', 'K', 'P', 'T'};

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{p[i]} << (8 * i);
  return v;
}

}  // namespace

Tensor<float> to_batch(std::span<const GrayImage* const> images) {
  const auto n = static_cast<Index>(images.size());
  Tensor<float> batch(Shape{n, kInputShape[0], kInputShape[1], kInputShape[2]});
  const Index plane = kInputShape[1] * kInputShape[2];
  for (Index i = 0; i < n; ++i) {
    const GrayImage& img = *images[static_cast<std::size_t>(i)];
    if (img.height() != kInputShape[1] || img.width() != kInputShape[2])
      throw Error(Errc::WrongSize, "network input must be 54x54");
    Eigen::Map<Eigen::ArrayXf>(batch.data() + i * plane, plane) =
        Eigen::Map<const Eigen::Array<std::uint8_t, Eigen::Dynamic, 1>>(img.pixels.data(), plane).cast<float>() /
            127.5f -
        1.0f;
  }
  return batch;
}

Tensor<float> predict(Model& model, const Tensor<float>& batch) {
  return model.net.forward(batch, Mode::Eval);
}

void save_checkpoint(const std::filesystem::path& path, Model& model, const CheckpointInfo& info) {
  nlohmann::json header;
  header["format"] = 1;
  header["arch"] = std::string(to_string(model.spec.id));
  header["layers"] = nlohmann::json::array();
  for (const LayerSpec& l : model.spec.layers) header["layers"].push_back(describe(l));
  header["dropout_slots"] = model.spec.dropout_slots;
  header["epoch"] = info.epoch;
  header["metrics"] = info.metrics;

  std::vector<std::uint8_t> payload;
  header["params"] = nlohmann::json::array();
  for (std::size_t li = 0; li < model.net.size(); ++li)
    for (Parameter<float>* p : model.net.layer(li).parameters()) {
      header["params"].push_back({{"layer", li},
                                  {"name", p->name},
                                  {"shape", p->value.shape()},
                                  {"offset", payload.size()},
                                  {"count", p->value.size()}});
      for (Index i = 0; i < p->value.size(); ++i) {
        const auto bits = std::bit_cast<std::uint32_t>(p->value[i]);
        for (int b = 0; b < 4; ++b) payload.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
      }
    }
  header["payload_bytes"] = payload.size();

  const std::string text = header.dump();
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u64(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), payload.begin(), payload.end());
  write_file_bytes(path, out);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw Error(Errc::BadCheckpoint, path.string() + " is not a checkpoint");
  const std::uint64_t len = get_u64(bytes.data() + 8);
  if (len > bytes.size() - 16) throw Error(Errc::BadCheckpoint, "header runs past end of file");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(len));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::BadCheckpoint, std::string("header: ") + e.what());
  }
  const std::uint8_t* payload = bytes.data() + 16 + len;
  const std::size_t payload_size = bytes.size() - 16 - len;

  try {
    const auto id = parse_arch(header.at("arch").get<std::string>());
    if (!id) throw Error(Errc::BadCheckpoint, "unknown architecture");
    ArchitectureSpec spec = build(*id);
    std::vector<LayerSpec> layers;
    for (const auto& l : header.at("layers")) layers.push_back(parse_layer_spec(l.get<std::string>()));
    if (layers.size() != spec.layers.size()) throw Error(Errc::BadCheckpoint, "layer list does not match architecture");
    spec.layers = std::move(layers);

    LoadedCheckpoint out{Model(spec, 0), CheckpointInfo{}};
    out.info.epoch = header.at("epoch").get<std::uint32_t>();
    out.info.metrics = header.at("metrics");

    std::size_t next = 0;
    const auto& entries = header.at("params");
    for (std::size_t li = 0; li < out.model.net.size(); ++li)
      for (Parameter<float>* p : out.model.net.layer(li).parameters()) {
        if (next >= entries.size()) throw Error(Errc::BadCheckpoint, "missing parameter entries");
        const auto& e = entries[next++];
        const auto offset = e.at("offset").get<std::size_t>();
        const auto count = e.at("count").get<std::size_t>();
        if (e.at("shape").get<Shape>() != p->value.shape() || count != static_cast<std::size_t>(p->value.size()))
          throw Error(Errc::BadCheckpoint, "parameter '" + p->name + "' has the wrong shape");
        if (offset + 4 * count > payload_size) throw Error(Errc::BadCheckpoint, "payload is truncated");
        for (std::size_t i = 0; i < count; ++i) {
          const std::uint8_t* q = payload + offset + 4 * i;
          const std::uint32_t bits = std::uint32_t{q[0]} | (std::uint32_t{q[1]} << 8) |
                                     (std::uint32_t{q[2]} << 16) | (std::uint32_t{q[3]} << 24);
          p->value[static_cast<Index>(i)] = std::bit_cast<float>(bits);
        }
      }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::BadCheckpoint, std::string("header: ") + e.what());
  }
}

}  // namespace tsvmorph
