#include <filesystem>
#include <type_traits>

#include "consol/binary_io.hpp"
#include "consol/deeponet.hpp"
#include "consol/errors.hpp"

namespace consol {

using nlohmann::json;

namespace {

template <typename T>
constexpr DType native_dtype() {
  return std::is_same_v<T, float> ? DType::F32LE : DType::F64LE;
}

json file_entry(std::span<const std::uint8_t> bytes, std::size_t count) {
  return json{{"count", count}, {"bytes", bytes.size()}, {"crc32c", crc32c(bytes)}};
}

std::vector<double> load_checked(const std::filesystem::path& dir, const json& files, const char* name, DType dtype,
                                 std::size_t expected) {
  if (!files.contains(name)) throw FormatError(name, "missing from manifest");
  const json& entry = files.at(name);
  std::size_t count = 0, nbytes = 0;
  std::uint32_t crc = 0;
  try {
    count = entry.at("count").get<std::size_t>();
    nbytes = entry.at("bytes").get<std::size_t>();
    crc = entry.at("crc32c").get<std::uint32_t>();
  } catch (const json::exception& e) {
    throw FormatError(name, e.what());
  }
  if (count != expected) {
    throw FormatError(name, "manifest count " + std::to_string(count) + ", spec implies " + std::to_string(expected));
  }
  const auto bytes = read_file(dir / name);
  if (bytes.size() != nbytes) {
    throw FormatError(name, "truncated or oversized payload: " + std::to_string(bytes.size()) + " bytes, expected " +
                                std::to_string(nbytes));
  }
  if (crc32c(bytes) != crc) throw FormatError(name, "checksum mismatch");
  return decode_array(bytes, dtype, count, name);
}

}  // namespace

json read_model_manifest(const std::filesystem::path& dir) {
  json manifest;
  try {
    manifest = json::parse(read_text(dir / "model.json"));
  } catch (const json::exception& e) {
    throw FormatError("model.json", e.what());
  }
  if (!manifest.contains("magic") || manifest["magic"] != kModelMagic) {
    throw FormatError("magic", "not a DeepONet model manifest");
  }
  if (!manifest.contains("schema_version") || manifest["schema_version"] != kModelSchemaVersion) {
    throw FormatError("schema_version", "unsupported model schema version " +
                                            (manifest.contains("schema_version") ? manifest["schema_version"].dump()
                                                                                 : std::string("(missing)")));
  }
  return manifest;
}

template <typename T>
void save_model(const DeepOnet<T>& model, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const DType dtype = native_dtype<T>();
  const ModelState<T>& st = model.state();

  json manifest;
  manifest["magic"] = kModelMagic;
  manifest["schema_version"] = kModelSchemaVersion;
  manifest["dtype"] = to_string(dtype);
  manifest["spec"] = to_json(model.spec());
  manifest["param_count"] = st.params.size();
  manifest["seed"] = st.seed;
  manifest["train_config"] = st.train_config;
  manifest["provenance"] = st.provenance ? to_json(*st.provenance) : json(nullptr);
  json history = json::array();
  for (const auto& r : st.history) {
    history.push_back({{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"val_loss", r.val_loss}});
  }
  manifest["history"] = history;

  // weights.bin holds the arrays listed in "arrays", back to back.
  std::vector<T> flat(st.params.begin(), st.params.end());
  json arrays = json::array();
  std::size_t offset = 0;
  auto declare = [&](const std::string& name, std::size_t count, const std::string& layout) {
    arrays.push_back({{"name", name}, {"offset", offset}, {"count", count}, {"layout", layout}});
    offset += count;
  };
  const ModelSpec& spec = model.spec();
  declare("branch", spec.branch.param_count(), "per layer: W (out x in, column-major) then b");
  declare("trunk", spec.trunk.param_count(), "per layer: W (out x in, column-major) then b");
  if (spec.variant == Variant::M2_AUX_BRANCH_MERGE) {
    declare("aux", spec.aux.param_count(), "per layer: W (out x in, column-major) then b");
    declare("merge", spec.merge.param_count(), "per layer: W (out x in, column-major) then b");
  }
  if (spec.fourier) {
    declare("fourier_b", static_cast<std::size_t>(st.b_matrix.size()), "m_freq x 3, column-major, frozen");
    flat.insert(flat.end(), st.b_matrix.data(), st.b_matrix.data() + st.b_matrix.size());
  }
  manifest["arrays"] = arrays;
  json files = json::object();
  const auto weights = encode_array(std::span<const T>(flat), dtype);
  write_file(dir / "weights.bin", weights);
  files["weights.bin"] = file_entry(weights, flat.size());
  manifest["files"] = files;
  write_text(dir / "model.json", manifest.dump(2) + "\n");
}

template <typename T>
DeepOnet<T> load_model(const std::filesystem::path& dir) {
  const json manifest = read_model_manifest(dir);
  DType dtype;
  ModelSpec spec;
  ModelState<T> st;
  try {
    dtype = parse_dtype(manifest.at("dtype").get<std::string>());
    spec = model_spec_from_json(manifest.at("spec"));
    st.seed = manifest.value("seed", std::uint64_t{0});
    st.train_config = manifest.value("train_config", json::object());
    if (manifest.contains("provenance") && !manifest["provenance"].is_null()) {
      st.provenance = provenance_from_json(manifest["provenance"]);
    }
    for (const auto& r : manifest.value("history", json::array())) {
      st.history.push_back({r.at("epoch").get<std::size_t>(), r.at("train_loss").get<double>(),
                            r.at("val_loss").get<double>()});
    }
  } catch (const json::exception& e) {
    throw FormatError("model.json", e.what());
  }
  if (!manifest.contains("files") || !manifest["files"].is_object()) throw FormatError("files", "missing");
  const json& files = manifest["files"];
  const std::size_t n_params = spec.param_count();
  const std::size_t n_b = spec.fourier ? spec.fourier->m_freq * 3 : 0;
  const auto flat = load_checked(dir, files, "weights.bin", dtype, n_params + n_b);
  st.params.assign(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(n_params));
  if (spec.fourier) {
    st.b_matrix.resize(static_cast<Eigen::Index>(spec.fourier->m_freq), 3);
    for (std::size_t k = 0; k < n_b; ++k) st.b_matrix.data()[k] = static_cast<T>(flat[n_params + k]);
  }
  return DeepOnet<T>(std::move(spec), std::move(st));
}

template void save_model<float>(const DeepOnet<float>&, const std::filesystem::path&);
template void save_model<double>(const DeepOnet<double>&, const std::filesystem::path&);
template DeepOnet<float> load_model<float>(const std::filesystem::path&);
template DeepOnet<double> load_model<double>(const std::filesystem::path&);

}  // namespace consol
