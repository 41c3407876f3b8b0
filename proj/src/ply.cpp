#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "refsplat/dataset.hpp"

namespace refsplat {

namespace {

std::vector<std::string> property_names() {
  std::vector<std::string> names = {"x", "y", "z", "nx", "ny", "nz"};
  for (int i = 0; i < 3; ++i) names.push_back("f_dc_" + std::to_string(i));
  for (int i = 0; i < 45; ++i) names.push_back("f_rest_" + std::to_string(i));
  names.push_back("opacity");
  for (int i = 0; i < 3; ++i) names.push_back("scale_" + std::to_string(i));
  for (int i = 0; i < 4; ++i) names.push_back("rot_" + std::to_string(i));
  for (int i = 0; i < 3; ++i) names.push_back("f_ref_dc_" + std::to_string(i));
  for (int i = 0; i < 45; ++i) names.push_back("f_ref_rest_" + std::to_string(i));
  names.push_back("ref_opacity");
  names.push_back("beta");
  return names;
}

// Row layout matching property_names(); SH blocks are channel-major
// (dc per channel, then 15 higher coefficients per channel) as in the
// de-facto splatting PLY convention.
void pack_row(const GaussianCloud& c, size_t i, double* row) {
  int k = 0;
  for (int d = 0; d < 3; ++d) row[k++] = c.means[i][d];
  for (int d = 0; d < 3; ++d) row[k++] = 0.0;  // normals
  for (int ch = 0; ch < 3; ++ch) row[k++] = c.sh_trans(i, ch);
  for (int ch = 0; ch < 3; ++ch)
    for (int co = 1; co < kShCoeffs; ++co) row[k++] = c.sh_trans(i, co * 3 + ch);
  row[k++] = c.opacity_logits[i];
  for (int d = 0; d < 3; ++d) row[k++] = c.log_scales[i][d];
  for (int d = 0; d < 4; ++d) row[k++] = c.rotations[i][d];
  for (int ch = 0; ch < 3; ++ch) row[k++] = c.sh_ref(i, ch);
  for (int ch = 0; ch < 3; ++ch)
    for (int co = 1; co < kShCoeffs; ++co) row[k++] = c.sh_ref(i, co * 3 + ch);
  row[k++] = c.ref_opacity_logits[i];
  row[k++] = c.beta_logits[i];
}

void unpack_row(GaussianCloud& c, size_t i, const double* row) {
  int k = 0;
  for (int d = 0; d < 3; ++d) c.means[i][d] = row[k++];
  k += 3;  // normals
  for (int ch = 0; ch < 3; ++ch) c.sh_trans(i, ch) = row[k++];
  for (int ch = 0; ch < 3; ++ch)
    for (int co = 1; co < kShCoeffs; ++co) c.sh_trans(i, co * 3 + ch) = row[k++];
  c.opacity_logits[i] = row[k++];
  for (int d = 0; d < 3; ++d) c.log_scales[i][d] = row[k++];
  for (int d = 0; d < 4; ++d) c.rotations[i][d] = row[k++];
  for (int ch = 0; ch < 3; ++ch) c.sh_ref(i, ch) = row[k++];
  for (int ch = 0; ch < 3; ++ch)
    for (int co = 1; co < kShCoeffs; ++co) c.sh_ref(i, co * 3 + ch) = row[k++];
  c.ref_opacity_logits[i] = row[k++];
  c.beta_logits[i] = row[k++];
}

}  // namespace

void export_ply(const GaussianCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  auto names = property_names();
  out << "ply\nformat binary_little_endian 1.0\n";
  out << "element vertex " << cloud.size() << "\n";
  for (const auto& n : names) out << "property double " << n << "\n";
  out << "end_header\n";
  std::vector<double> row(names.size());
  for (size_t i = 0; i < cloud.size(); ++i) {
    pack_row(cloud, i, row.data());
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(double)));
  }
}

GaussianCloud import_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "ply")
    throw std::runtime_error("malformed PLY header (missing magic) in " + path.string());
  size_t count = 0;
  bool little_endian = false;
  std::vector<std::pair<std::string, int>> props;  // name, byte size
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string tok;
    ss >> tok;
    if (tok == "format") {
      std::string fmt;
      ss >> fmt;
      little_endian = fmt == "binary_little_endian";
    } else if (tok == "element") {
      std::string what;
      ss >> what >> count;
      if (what != "vertex")
        throw std::runtime_error("unexpected PLY element '" + what + "' in " + path.string());
    } else if (tok == "property") {
      std::string type, name;
      ss >> type >> name;
      int size = type == "double" ? 8 : (type == "float" ? 4 : 0);
      if (size == 0)
        throw std::runtime_error("unsupported PLY property type '" + type + "' in " +
                                 path.string());
      props.emplace_back(name, size);
    } else if (tok == "end_header") {
      break;
    } else if (tok == "comment") {
      continue;
    }
  }
  if (!little_endian)
    throw std::runtime_error("PLY must be binary_little_endian: " + path.string());

  auto expected = property_names();
  if (props.size() != expected.size()) {
    // name the first missing property for the error
    for (const auto& name : expected) {
      bool found = false;
      for (const auto& p : props) found |= p.first == name;
      if (!found)
        throw std::runtime_error("PLY missing property '" + name + "' in " + path.string());
    }
    throw std::runtime_error("PLY property count mismatch in " + path.string());
  }
  for (size_t i = 0; i < props.size(); ++i)
    if (props[i].first != expected[i])
      throw std::runtime_error("PLY property '" + expected[i] + "' missing or misplaced (found '" +
                               props[i].first + "') in " + path.string());

  size_t row_bytes = 0;
  for (const auto& p : props) row_bytes += p.second;

  GaussianCloud cloud;
  cloud.resize(count);
  cloud.active_sh_degree = cloud.max_sh_degree;
  std::vector<char> buf(row_bytes);
  std::vector<double> row(props.size());
  for (size_t i = 0; i < count; ++i) {
    in.read(buf.data(), static_cast<std::streamsize>(row_bytes));
    if (!in)
      throw std::runtime_error("PLY truncated at vertex " + std::to_string(i) + " (offset " +
                               std::to_string(in.tellg()) + ") in " + path.string());
    size_t off = 0;
    for (size_t p = 0; p < props.size(); ++p) {
      if (props[p].second == 8) {
        double v;
        std::memcpy(&v, buf.data() + off, 8);
        row[p] = v;
      } else {
        float v;
        std::memcpy(&v, buf.data() + off, 4);
        row[p] = v;
      }
      off += props[p].second;
    }
    unpack_row(cloud, i, row.data());
  }
  return cloud;
}

}  // namespace refsplat
