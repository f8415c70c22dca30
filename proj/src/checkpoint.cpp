#include "sapp/checkpoint.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "sapp/error.hpp"
#include "sapp/tensor_io.hpp"

namespace sapp {

namespace {

Shape storage_shape(const std::vector<std::size_t>& dims) {
  Shape s{dims.empty() ? 1 : dims[0], dims.size() > 1 ? dims[1] : 1, 1};
  for (std::size_t i = 2; i < dims.size(); ++i) s.bins *= dims[i];
  return s;
}

}  // namespace

void save_checkpoint(ModelGraph& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.tsv", std::ios::trunc);
  if (!manifest) throw std::runtime_error(fmt::format("cannot write {}", (dir / "manifest.tsv").string()));
  manifest << "sapp-checkpoint\t" << kCheckpointVersion << "\n";
  std::size_t i = 0;
  for (const Parameter* p : model.parameters()) {
    const std::string file = fmt::format("p{:04d}.sapp", i++);
    std::vector<float> values(p->value.begin(), p->value.end());
    tensor_write(dir / file, FeatureTensor(storage_shape(p->dims), std::move(values)));
    manifest << fmt::format("{}\t{}\t{}\t{}\n", p->name, fmt::join(p->dims, ","), p->stage, file);
  }
}

void load_checkpoint(ModelGraph& model, const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.tsv");
  if (!in) throw std::runtime_error(fmt::format("cannot open {}", (dir / "manifest.tsv").string()));
  std::string line;
  std::getline(in, line);
  if (line != fmt::format("sapp-checkpoint\t{}", kCheckpointVersion)) {
    throw FormatError(fmt::format("{}: unsupported checkpoint header at line 1", dir.string()));
  }
  std::map<std::string, std::pair<std::string, std::string>> rows;  // name -> (dims, file)
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string name, dims, layer, file;
    if (!std::getline(ss, name, '\t') || !std::getline(ss, dims, '\t') ||
        !std::getline(ss, layer, '\t') || !std::getline(ss, file)) {
      throw FormatError(fmt::format("checkpoint manifest: malformed line {}", lineno));
    }
    rows[name] = {dims, file};
  }
  for (Parameter* p : model.parameters()) {
    auto it = rows.find(p->name);
    if (it == rows.end()) throw FormatError(fmt::format("checkpoint lacks parameter {}", p->name));
    if (it->second.first != fmt::format("{}", fmt::join(p->dims, ","))) {
      throw FormatError(fmt::format("checkpoint shape {} for {} does not match model",
                                    it->second.first, p->name));
    }
    const FeatureTensor t = tensor_read(dir / it->second.second);
    if (t.size() != p->size()) throw FormatError(fmt::format("size mismatch for {}", p->name));
    std::copy(t.data().begin(), t.data().end(), p->value.begin());
  }
}

}  // namespace sapp
