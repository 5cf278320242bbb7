#include "elp/matrix.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace elp {

static_assert(std::endian::native == std::endian::little,
              "matrix sidecar assumes a little-endian host");

void save_matrix(const std::string& base_path, const Matrix& m,
                 const std::map<std::string, std::string>& meta) {
  nlohmann::json header;
  header["dtype"] = "float64";
  header["byte_order"] = "little";
  header["order"] = "row-major";
  header["shape"] = {m.rows, m.cols};
  header["data_file"] = base_path.substr(base_path.find_last_of('/') + 1) + ".bin";
  header["content_hash"] = matrix_content_hash(m);
  for (const auto& [k, v] : meta) header["meta"][k] = v;

  std::ofstream js(base_path + ".json");
  if (!js) throw IoError("cannot write " + base_path + ".json");
  js << header.dump(2) << "\n";

  std::ofstream bin(base_path + ".bin", std::ios::binary);
  if (!bin) throw IoError("cannot write " + base_path + ".bin");
  bin.write(reinterpret_cast<const char*>(m.data.data()),
            static_cast<std::streamsize>(m.data.size() * sizeof(double)));
  if (!bin) throw IoError("short write to " + base_path + ".bin");
}

Matrix load_matrix(const std::string& base_path,
                   std::map<std::string, std::string>* meta) {
  std::ifstream js(base_path + ".json");
  if (!js) throw IoError("cannot read " + base_path + ".json");
  nlohmann::json header;
  js >> header;
  if (header.value("dtype", "") != "float64")
    throw ParseError("matrix header " + base_path + ".json: unsupported dtype");
  auto shape = header.at("shape");
  Matrix m(shape.at(0).get<std::size_t>(), shape.at(1).get<std::size_t>());

  std::ifstream bin(base_path + ".bin", std::ios::binary);
  if (!bin) throw IoError("cannot read " + base_path + ".bin");
  bin.read(reinterpret_cast<char*>(m.data.data()),
           static_cast<std::streamsize>(m.data.size() * sizeof(double)));
  if (static_cast<std::size_t>(bin.gcount()) != m.data.size() * sizeof(double))
    throw ParseError("matrix payload " + base_path + ".bin truncated");

  if (header.contains("content_hash") &&
      header["content_hash"].get<std::string>() != matrix_content_hash(m))
    throw ParseError("matrix payload hash mismatch for " + base_path);

  if (meta && header.contains("meta"))
    for (auto& [k, v] : header["meta"].items())
      (*meta)[k] = v.get<std::string>();
  return m;
}

std::string matrix_content_hash(const Matrix& m) {
  std::uint64_t h = fnv1a(&m.rows, sizeof(m.rows));
  h = fnv1a(&m.cols, sizeof(m.cols), h);
  h = fnv1a(m.data.data(), m.data.size() * sizeof(double), h);
  return hex64(h);
}

}  // namespace elp
