#include "snn/checkpoint.hpp"

#include <sstream>
#include <stdexcept>

#include "snn/io.hpp"

namespace snn {

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : arrays)
    if (n == name) return &t;
  return nullptr;
}

std::string serialize_checkpoint(const Checkpoint& ck) {
  std::ostringstream os;
  os << "snn-checkpoint v" << ck.version << '\n';
  os << "epoch " << ck.epoch << '\n';
  os << "rng " << ck.rng_state << '\n';
  os << "adam_step " << ck.adam_step << '\n';
  os << "config_begin\n" << ck.config_echo;
  if (!ck.config_echo.empty() && ck.config_echo.back() != '\n') os << '\n';
  os << "config_end\n";
  for (const auto& [name, t] : ck.arrays) {
    os << "array " << name << ' ' << t.rank();
    for (std::size_t d : t.shape()) os << ' ' << d;
    os << '\n';
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (i) os << ' ';
      os << format_real(t[i]);
    }
    os << '\n';
  }
  os << "end\n";
  return os.str();
}

Checkpoint parse_checkpoint(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  Checkpoint ck;

  auto next_line = [&](const char* what) {
    if (!std::getline(in, line)) throw std::runtime_error(std::string("checkpoint: truncated at ") + what);
    return line;
  };

  next_line("header");
  if (line != "snn-checkpoint v1")
    throw std::runtime_error("checkpoint: unrecognized header '" + line + "'");
  ck.version = 1;

  auto scalar_field = [&](const char* key) {
    next_line(key);
    std::istringstream ls(line);
    std::string k;
    long long v;
    if (!(ls >> k >> v) || k != key)
      throw std::runtime_error(std::string("checkpoint: expected '") + key + " <n>', got '" +
                               line + "'");
    return v;
  };
  ck.epoch = static_cast<std::size_t>(scalar_field("epoch"));
  {
    next_line("rng");
    std::istringstream ls(line);
    std::string k;
    std::uint64_t v;
    if (!(ls >> k >> v) || k != "rng")
      throw std::runtime_error("checkpoint: expected 'rng <u64>', got '" + line + "'");
    ck.rng_state = v;
  }
  ck.adam_step = static_cast<std::size_t>(scalar_field("adam_step"));

  next_line("config_begin");
  if (line != "config_begin") throw std::runtime_error("checkpoint: expected config_begin");
  std::ostringstream cfg;
  while (next_line("config") != "config_end") cfg << line << '\n';
  ck.config_echo = cfg.str();

  while (true) {
    next_line("array or end");
    if (line == "end") break;
    std::istringstream ls(line);
    std::string tag, name;
    std::size_t rank;
    if (!(ls >> tag >> name >> rank) || tag != "array")
      throw std::runtime_error("checkpoint: expected 'array <name> <rank> ...', got '" + line +
                               "'");
    std::vector<std::size_t> shape(rank);
    for (std::size_t d = 0; d < rank; ++d) {
      if (!(ls >> shape[d])) throw std::runtime_error("checkpoint: bad shape for " + name);
    }
    next_line("array values");
    std::istringstream vs(line);
    std::vector<real> values;
    values.reserve(shape_size(shape));
    std::string tok;
    while (vs >> tok) values.push_back(parse_real(tok, "checkpoint array " + name));
    if (values.size() != shape_size(shape))
      throw std::runtime_error("checkpoint: array " + name + " wants " +
                               std::to_string(shape_size(shape)) + " values, got " +
                               std::to_string(values.size()));
    ck.arrays.emplace_back(name, Tensor::from(shape, std::move(values)));
  }
  return ck;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  write_file_atomic(path, serialize_checkpoint(ck));
}

Checkpoint load_checkpoint(const std::string& path) {
  return parse_checkpoint(read_file(path));
}

}  // namespace snn
