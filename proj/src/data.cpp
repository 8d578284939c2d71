#include "snn/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>
#include <stdexcept>

#include "snn/io.hpp"

namespace snn {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_cells(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  cells.push_back(trim(cur));
  return cells;
}

std::map<std::string, std::string> parse_header(const std::string& line,
                                                const std::string& context) {
  std::map<std::string, std::string> kv;
  for (const std::string& cell : split_cells(line)) {
    const std::size_t eq = cell.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(context + ": line 1: header entry '" + cell +
                               "' is not key=value");
    kv[trim(cell.substr(0, eq))] = trim(cell.substr(eq + 1));
  }
  return kv;
}

std::size_t header_uint(const std::map<std::string, std::string>& kv, const std::string& key,
                        const std::string& context) {
  auto it = kv.find(key);
  if (it == kv.end())
    throw std::runtime_error(context + ": line 1: header missing '" + key + "'");
  const long long v = parse_int(it->second, context + " header " + key);
  if (v < 0) throw std::runtime_error(context + ": header " + key + " must be >= 0");
  return static_cast<std::size_t>(v);
}

}  // namespace

std::vector<std::size_t> Dataset::feature_shape() const {
  std::vector<std::size_t> fs;
  const std::size_t skip = temporal ? 2 : 1;
  for (std::size_t d = skip; d < inputs.rank(); ++d) fs.push_back(inputs.shape()[d]);
  return fs;
}

EventStream load_event_csv(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  const auto header = parse_header(line, path);
  EventStream ev;
  ev.width = header_uint(header, "width", path);
  ev.height = header_uint(header, "height", path);
  if (ev.width == 0 || ev.height == 0) throw std::runtime_error(path + ": zero sensor extents");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_cells(line);
    const std::string where = path + ": line " + std::to_string(line_no);
    if (cells.size() != 4) throw std::runtime_error(where + ": expected t,x,y,p");
    EventRecord r;
    r.t = parse_int(cells[0], where + " t");
    const long long x = parse_int(cells[1], where + " x");
    const long long y = parse_int(cells[2], where + " y");
    const long long p = parse_int(cells[3], where + " p");
    if (x < 0 || static_cast<std::size_t>(x) >= ev.width)
      throw std::runtime_error(where + ": x=" + std::to_string(x) + " outside width " +
                               std::to_string(ev.width));
    if (y < 0 || static_cast<std::size_t>(y) >= ev.height)
      throw std::runtime_error(where + ": y=" + std::to_string(y) + " outside height " +
                               std::to_string(ev.height));
    if (p != 0 && p != 1) throw std::runtime_error(where + ": polarity must be 0 or 1");
    r.x = static_cast<std::size_t>(x);
    r.y = static_cast<std::size_t>(y);
    r.polarity = static_cast<int>(p);
    ev.events.push_back(r);
  }
  std::stable_sort(ev.events.begin(), ev.events.end(),
                   [](const EventRecord& a, const EventRecord& b) { return a.t < b.t; });
  return ev;
}

Tensor bin_events(const EventStream& ev, std::size_t T, std::size_t out_h, std::size_t out_w) {
  if (T < 1) throw std::invalid_argument("bin_events: T must be >= 1");
  if (out_h == 0 || out_w == 0) throw std::invalid_argument("bin_events: zero output extents");
  if (ev.events.empty()) throw std::invalid_argument("bin_events: empty stream");
  const long long t_min = ev.events.front().t;
  const long long t_max = ev.events.back().t;
  const long long span = t_max - t_min;
  Tensor frames({T, 2, out_h, out_w});
  for (const EventRecord& r : ev.events) {
    // Block k covers [t_min + k*span/T, t_min + (k+1)*span/T); the final
    // block also takes t_max so every event lands exactly once.
    std::size_t k = 0;
    if (span > 0) {
      k = static_cast<std::size_t>(((r.t - t_min) * static_cast<long long>(T)) / span);
      if (k >= T) k = T - 1;
    }
    const std::size_t oy = r.y * out_h / ev.height;
    const std::size_t ox = r.x * out_w / ev.width;
    frames[((k * 2 + static_cast<std::size_t>(r.polarity)) * out_h + oy) * out_w + ox] += 1;
  }
  return frames;
}

Dataset load_csv_images(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || trim(line).empty())
    throw std::runtime_error(path + ": empty file");
  const auto header = parse_header(line, path);
  const std::size_t classes = header_uint(header, "classes", path);
  const std::size_t channels = header_uint(header, "channels", path);
  const std::size_t height = header_uint(header, "height", path);
  const std::size_t width = header_uint(header, "width", path);
  const bool temporal = header.count("temporal") && header.at("temporal") == "1";
  if (classes == 0 || channels == 0 || height == 0 || width == 0)
    throw std::runtime_error(path + ": zero header extents");
  const std::size_t pixels = channels * height * width;

  std::vector<real> values;
  std::vector<int> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string where = path + ": line " + std::to_string(line_no);
    const auto cells = split_cells(line);
    if (cells.size() != pixels + 1)
      throw std::runtime_error(where + ": expected " + std::to_string(pixels + 1) +
                               " cells, got " + std::to_string(cells.size()));
    const long long label = parse_int(cells[0], where + " label");
    if (label < 0 || static_cast<std::size_t>(label) >= classes)
      throw std::runtime_error(where + ": label " + std::to_string(label) +
                               " outside [0," + std::to_string(classes) + ")");
    labels.push_back(static_cast<int>(label));
    for (std::size_t i = 0; i < pixels; ++i) {
      const long long p = parse_int(cells[i + 1], where + " pixel");
      if (p < 0 || p > 255)
        throw std::runtime_error(where + ": pixel value " + std::to_string(p) +
                                 " outside [0,255]");
      values.push_back(static_cast<real>(p) / real(255));
    }
  }
  if (labels.empty()) throw std::runtime_error(path + ": no data rows");

  Dataset ds;
  ds.classes = classes;
  ds.temporal = temporal;
  ds.labels = std::move(labels);
  if (temporal) {
    ds.inputs = Tensor::from({ds.labels.size(), channels, height * width}, std::move(values));
  } else {
    ds.inputs = Tensor::from({ds.labels.size(), channels, height, width}, std::move(values));
  }
  return ds;
}

void save_csv_images(const std::string& path, const Dataset& data) {
  const auto fs = data.feature_shape();
  std::size_t channels, height, width;
  if (data.temporal) {
    if (fs.size() != 1)
      throw std::invalid_argument("save_csv_images: temporal data must have flat features");
    channels = data.inputs.shape()[1];
    height = 1;
    width = fs[0];
  } else {
    if (fs.size() != 3)
      throw std::invalid_argument("save_csv_images: static data must be [C,H,W]");
    channels = fs[0];
    height = fs[1];
    width = fs[2];
  }
  std::ostringstream os;
  os << "classes=" << data.classes << ",temporal=" << (data.temporal ? 1 : 0)
     << ",channels=" << channels << ",height=" << height << ",width=" << width << '\n';
  const std::size_t pixels = channels * height * width;
  for (std::size_t n = 0; n < data.count(); ++n) {
    os << data.labels[n];
    for (std::size_t i = 0; i < pixels; ++i) {
      const real v = data.inputs[n * pixels + i];
      const long long p = std::llround(static_cast<double>(v) * 255.0);
      if (p < 0 || p > 255)
        throw std::invalid_argument("save_csv_images: value outside [0,1]");
      os << ',' << p;
    }
    os << '\n';
  }
  write_file_atomic(path, os.str());
}

Tensor direct_encode(const Tensor& image, std::size_t T) {
  if (T < 1) throw std::invalid_argument("direct_encode: T must be >= 1");
  std::vector<std::size_t> shape = {T};
  for (std::size_t d : image.shape()) shape.push_back(d);
  Tensor out(shape);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < image.size(); ++i) out[t * image.size() + i] = image[i];
  return out;
}

void SyntheticTaskSpec::validate() const {
  if (classes == 0 || neurons == 0 || T == 0)
    throw std::invalid_argument("SyntheticTaskSpec: zero extents");
  if (window > T) throw std::invalid_argument("SyntheticTaskSpec: window longer than T");
  for (real r : {base_rate, peak_rate, noise_rate})
    if (r < 0 || r > 1)
      throw std::invalid_argument("SyntheticTaskSpec: rates must be in [0,1]");
}

real SyntheticTaskSpec::rate(std::size_t cls, std::size_t t, std::size_t neuron) const {
  const std::size_t group_lo = cls * neurons / classes;
  const std::size_t group_hi = (cls + 1) * neurons / classes;
  const std::size_t start =
      classes > 1 ? cls * (T - window) / (classes - 1) : std::size_t(0);
  const bool in_group = neuron >= group_lo && neuron < group_hi;
  const bool in_window = t >= start && t < start + window;
  real r = base_rate + (in_group && in_window ? peak_rate - base_rate : real(0)) + noise_rate;
  return std::min(r, real(1));
}

Dataset synth_generate(const SyntheticTaskSpec& spec, std::size_t count) {
  spec.validate();
  Rng rng(spec.seed);
  Dataset ds;
  ds.classes = spec.classes;
  ds.temporal = true;
  ds.inputs = Tensor({count, spec.T, spec.neurons});
  ds.labels.resize(count);
  for (std::size_t s = 0; s < count; ++s) {
    const std::size_t cls = s % spec.classes;
    ds.labels[s] = static_cast<int>(cls);
    for (std::size_t t = 0; t < spec.T; ++t)
      for (std::size_t n = 0; n < spec.neurons; ++n) {
        const real r = spec.rate(cls, t, n);
        ds.inputs[(s * spec.T + t) * spec.neurons + n] =
            (static_cast<real>(rng.uniform()) < r) ? real(1) : real(0);
      }
  }
  return ds;
}

namespace {

Dataset gather(const Dataset& data, const std::vector<std::size_t>& idx) {
  Dataset out;
  out.classes = data.classes;
  out.temporal = data.temporal;
  const std::size_t block = data.count() ? data.inputs.size() / data.count() : 0;
  std::vector<std::size_t> shape = data.inputs.shape();
  shape[0] = idx.size();
  out.inputs = Tensor(shape);
  out.labels.resize(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.labels[i] = data.labels[idx[i]];
    const real* src = data.inputs.data() + idx[i] * block;
    real* dst = out.inputs.data() + i * block;
    for (std::size_t e = 0; e < block; ++e) dst[e] = src[e];
  }
  return out;
}

}  // namespace

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

DatasetSplit split_dataset(const Dataset& data, real train_ratio, std::uint64_t seed) {
  const std::size_t n = data.count();
  if (n < 10) throw std::invalid_argument("split_dataset: need at least 10 samples");
  if (train_ratio <= 0 || train_ratio >= 1)
    throw std::invalid_argument("split_dataset: ratio must be in (0,1)");
  Rng rng(seed);
  const std::vector<std::size_t> idx = shuffled_indices(n, rng);
  const std::size_t train_n = static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * static_cast<double>(train_ratio)));
  std::vector<std::size_t> tr(idx.begin(), idx.begin() + train_n);
  std::vector<std::size_t> te(idx.begin() + train_n, idx.end());
  DatasetSplit split;
  split.train = gather(data, tr);
  split.test = gather(data, te);
  return split;
}

void inject_label_noise(Dataset& data, real fraction, Rng& rng) {
  if (fraction < 0 || fraction > 1)
    throw std::invalid_argument("inject_label_noise: fraction must be in [0,1]");
  if (data.classes < 2 || fraction == 0) return;
  const std::size_t n = data.count();
  const std::size_t k = static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * static_cast<double>(fraction)));
  const std::vector<std::size_t> idx = shuffled_indices(n, rng);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t s = idx[i];
    const int old = data.labels[s];
    int flipped = static_cast<int>(rng.below(data.classes - 1));
    if (flipped >= old) ++flipped;
    data.labels[s] = flipped;
  }
}

Dataset load_event_dataset(const std::string& index_path, std::size_t T, std::size_t out_h,
                           std::size_t out_w) {
  std::istringstream in(read_file(index_path));
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(index_path + ": empty file");
  const auto header = parse_header(line, index_path);
  const std::size_t classes = header_uint(header, "classes", index_path);
  if (classes == 0) throw std::runtime_error(index_path + ": classes must be positive");
  const std::filesystem::path dir = std::filesystem::path(index_path).parent_path();

  std::vector<Tensor> frames;
  std::vector<int> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string where = index_path + ": line " + std::to_string(line_no);
    const auto cells = split_cells(line);
    if (cells.size() != 2) throw std::runtime_error(where + ": expected path,label");
    const long long label = parse_int(cells[1], where + " label");
    if (label < 0 || static_cast<std::size_t>(label) >= classes)
      throw std::runtime_error(where + ": label outside [0," + std::to_string(classes) + ")");
    const EventStream ev = load_event_csv((dir / cells[0]).string());
    Tensor f = bin_events(ev, T, out_h, out_w);
    // Raw counts normalized by this sample's peak so inputs stay in [0,1].
    real peak = 0;
    for (std::size_t i = 0; i < f.size(); ++i) peak = std::max(peak, f[i]);
    if (peak > 0)
      for (std::size_t i = 0; i < f.size(); ++i) f[i] /= peak;
    frames.push_back(std::move(f));
    labels.push_back(static_cast<int>(label));
  }
  if (frames.empty()) throw std::runtime_error(index_path + ": no samples listed");

  Dataset ds;
  ds.classes = classes;
  ds.temporal = true;
  ds.labels = std::move(labels);
  ds.inputs = Tensor({frames.size(), T, 2, out_h, out_w});
  const std::size_t block = frames[0].size();
  for (std::size_t n = 0; n < frames.size(); ++n)
    for (std::size_t i = 0; i < block; ++i) ds.inputs[n * block + i] = frames[n][i];
  return ds;
}

}  // namespace snn
