#include "tdkps/error.hpp"
#include "tdkps/response_tensor.hpp"

#include <json.hpp>

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace tdkps {
namespace {

template <typename T>
void put_le(std::vector<unsigned char>& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                  std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
  auto bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<unsigned char>(bits & 0xFF));
    bits = static_cast<U>(bits >> 8);
  }
}

template <typename T>
T get_le(const unsigned char* p) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                  std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
  U bits = 0;
  for (std::size_t i = sizeof(T); i-- > 0;) bits = static_cast<U>((bits << 8) | p[i]);
  return std::bit_cast<T>(bits);
}

constexpr std::array<unsigned char, 4> kMagic{0x54, 0x44, 0x4B, 0x50};

nlohmann::json manifest_to_json(const TensorManifest& m) {
  nlohmann::json j;
  j["agent_ids"] = m.agent_ids;
  j["time_labels"] = m.time_labels;
  if (m.group_labels) j["group_labels"] = *m.group_labels;
  if (m.seed) j["seed"] = *m.seed;
  return j;
}

TensorManifest manifest_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("manifest: expected a JSON object");
  TensorManifest m;
  try {
    m.agent_ids = j.at("agent_ids").get<std::vector<std::string>>();
    m.time_labels = j.at("time_labels").get<std::vector<std::string>>();
    if (j.contains("group_labels")) m.group_labels = j["group_labels"].get<std::vector<int>>();
    if (j.contains("seed")) m.seed = j["seed"].get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  return m;
}

}  // namespace

std::filesystem::path manifest_path(const std::filesystem::path& tensor_path) {
  return std::filesystem::path(tensor_path.string() + ".manifest.json");
}

void save_tensor(const ResponseTensor& tensor, const TensorManifest& manifest,
                 const std::filesystem::path& path) {
  const auto& s = tensor.shape();
  manifest.validate(s);

  std::vector<unsigned char> bytes;
  const std::size_t width = tensor.precision() == Precision::float32 ? 4 : 8;
  bytes.reserve(kTensorHeaderBytes + static_cast<std::size_t>(s.size()) * width);
  bytes.insert(bytes.end(), kMagic.begin(), kMagic.end());
  put_le<std::uint16_t>(bytes, kTensorFormatVersion);
  put_le<std::uint8_t>(bytes, static_cast<std::uint8_t>(tensor.precision()));
  for (Index extent : {s.n_agents, s.n_times, s.n_queries, s.n_replicates, s.dim}) {
    put_le<std::uint64_t>(bytes, static_cast<std::uint64_t>(extent));
  }
  for (double v : tensor.values()) {
    if (tensor.precision() == Precision::float32) {
      put_le<float>(bytes, static_cast<float>(v));
    } else {
      put_le<double>(bytes, v);
    }
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());

  std::ofstream side(manifest_path(path), std::ios::trunc);
  if (!side) throw IoError("cannot open " + manifest_path(path).string() + " for writing");
  side << manifest_to_json(manifest).dump(2) << '\n';
  if (!side) throw IoError("write failed for " + manifest_path(path).string());
}

std::pair<ResponseTensor, TensorManifest> load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < 4 || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw FormatError(path.string() + ": bad magic, not a TDKP tensor file");
  }
  if (bytes.size() < kTensorHeaderBytes) throw LengthError(path.string() + ": truncated header");
  const auto version = get_le<std::uint16_t>(bytes.data() + 4);
  if (version != kTensorFormatVersion) {
    throw FormatError(path.string() + ": unsupported format version " + std::to_string(version));
  }
  const auto dtype = bytes[6];
  if (dtype > 1) throw FormatError(path.string() + ": unknown dtype flag " + std::to_string(dtype));
  const auto precision = static_cast<Precision>(dtype);

  std::array<std::uint64_t, 5> counts{};
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] = get_le<std::uint64_t>(bytes.data() + 7 + 8 * i);
  TensorShape shape{static_cast<Index>(counts[0]), static_cast<Index>(counts[1]), static_cast<Index>(counts[2]),
                    static_cast<Index>(counts[3]), static_cast<Index>(counts[4])};
  for (auto c : counts) {
    if (c == 0 || c > (std::uint64_t{1} << 40)) throw FormatError(path.string() + ": invalid extent");
  }

  const std::size_t width = precision == Precision::float32 ? 4 : 8;
  const auto n_values = static_cast<std::size_t>(shape.size());
  if (bytes.size() != kTensorHeaderBytes + n_values * width) {
    throw LengthError(path.string() + ": payload holds " + std::to_string(bytes.size() - kTensorHeaderBytes) +
                      " bytes, expected " + std::to_string(n_values * width));
  }
  std::vector<double> values(n_values);
  const unsigned char* p = bytes.data() + kTensorHeaderBytes;
  for (std::size_t i = 0; i < n_values; ++i, p += width) {
    values[i] = precision == Precision::float32 ? static_cast<double>(get_le<float>(p)) : get_le<double>(p);
  }
  ResponseTensor tensor(shape, std::move(values), precision);

  TensorManifest manifest;
  const auto side = manifest_path(path);
  if (std::filesystem::exists(side)) {
    std::ifstream js(side);
    nlohmann::json j;
    try {
      js >> j;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(side.string() + ": " + e.what());
    }
    manifest = manifest_from_json(j);
    manifest.validate(shape);
  } else {
    manifest = default_manifest(shape);
  }
  return {std::move(tensor), std::move(manifest)};
}

}  // namespace tdkps
