#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "ccdt/error.hpp"
#include "ccdt/model.hpp"

namespace ccdt {

namespace {

constexpr char kMagic[8] = {'C', 'C', 'D', 'T', 'M', 'O', 'D', '1'};
constexpr std::uint32_t kTensorVersion = 1;
constexpr int kManifestVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_le(const std::string& in, std::size_t at, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

std::string module_file(std::size_t i) {
  std::ostringstream s;
  s << "module_" << std::setw(4) << std::setfill('0') << i << ".bin";
  return s.str();
}

void write_tensor(const std::vector<float>& params, const std::filesystem::path& path) {
  std::string buf(kMagic, sizeof kMagic);
  put_u32(buf, kTensorVersion);
  put_u64(buf, params.size());
  for (float f : params) put_u32(buf, std::bit_cast<std::uint32_t>(f));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw FormatError("write failed: " + path.string());
}

std::vector<float> read_tensor(const std::filesystem::path& path, std::size_t expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  constexpr std::size_t header = sizeof kMagic + 4 + 8;
  if (buf.size() < header) throw FormatError(path.string() + ": truncated header");
  if (std::memcmp(buf.data(), kMagic, sizeof kMagic) != 0) throw FormatError(path.string() + ": bad magic");
  auto version = get_le(buf, 8, 4);
  if (version != kTensorVersion)
    throw FormatError(path.string() + ": tensor format version " + std::to_string(version) + ", expected " +
                      std::to_string(kTensorVersion));
  auto count = get_le(buf, 12, 8);
  if (count != expected)
    throw FormatError(path.string() + ": holds " + std::to_string(count) + " parameters, architecture needs " +
                      std::to_string(expected));
  if (buf.size() != header + 4 * count) throw FormatError(path.string() + ": truncated tensor data");
  std::vector<float> out(count);
  for (std::size_t i = 0; i < count; ++i)
    out[i] = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(buf, header + 4 * i, 4)));
  return out;
}

}  // namespace

void save_model(const CCDT& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  Json manifest;
  manifest["format"] = "ccdt-model";
  manifest["format_version"] = kManifestVersion;
  manifest["version"] = model.version;
  manifest["seed"] = model.seed;
  manifest["arch"] = arch_to_json(model.arch);
  manifest["encoder"] = encoder_to_json(model.encoder);
  manifest["metadata"] = model.metadata;
  Json mods = Json::array();
  for (std::size_t i = 0; i < model.size(); ++i) {
    auto file = module_file(i);
    write_tensor(model.modules[i].params, dir / file);
    Json m;
    m["rule_id"] = model.rule_ids[i];
    m["file"] = file;
    m["parameters"] = model.modules[i].params.size();
    m["loss_curve"] = model.loss_curves.size() > i ? model.loss_curves[i] : std::vector<double>{};
    mods.push_back(std::move(m));
  }
  manifest["modules"] = std::move(mods);
  std::ofstream out(dir / "manifest.json");
  if (!out) throw FormatError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

CCDT load_model(const std::filesystem::path& dir, const MessageSchema* schema) {
  const auto path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  Json manifest;
  try {
    manifest = Json::parse(in);
  } catch (const Json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  CCDT model;
  try {
    if (manifest.at("format") != "ccdt-model") throw FormatError(path.string() + ": not a model manifest");
    int fv = manifest.at("format_version").get<int>();
    if (fv != kManifestVersion)
      throw FormatError(path.string() + ": format version " + std::to_string(fv) + ", expected " +
                        std::to_string(kManifestVersion));
    model.version = manifest.at("version").get<std::string>();
    model.seed = manifest.at("seed").get<std::uint64_t>();
    model.arch = arch_from_json(manifest.at("arch"));
    model.encoder = encoder_from_json(manifest.at("encoder"));
    model.metadata = manifest.value("metadata", Json::object());
    for (const auto& m : manifest.at("modules")) {
      auto id = m.at("rule_id").get<std::string>();
      Module<float> mod{model.arch,
                        ParamLayout::build(model.arch, model.encoder.branch1_length, model.encoder.branch2_length), {}};
      mod.params = read_tensor(dir / m.at("file").get<std::string>(), mod.layout.total);
      model.rule_ids.push_back(std::move(id));
      model.modules.push_back(std::move(mod));
      model.loss_curves.push_back(m.value("loss_curve", std::vector<double>{}));
    }
  } catch (const Json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  if (schema) check_encoder_schema(model.encoder, *schema);
  return model;
}

}  // namespace ccdt
