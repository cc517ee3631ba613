#include "mmgpvae/io.hpp"

#include "mmgpvae/config.hpp"

#include <json.hpp>

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace mmgpvae {

namespace {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "container format assumes a little-endian host");

constexpr char kMagic[8] = {'M', 'M', 'G', 'P', 'V', 'A', 'E', '\0'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
std::uint32_t get_u32(std::istream& in, const std::string& path) {
  std::uint32_t v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
    throw IoError("'" + path + "': truncated container");
  return v;
}
std::uint64_t get_u64(std::istream& in, const std::string& path) {
  std::uint64_t v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
    throw IoError("'" + path + "': truncated container");
  return v;
}

std::uint64_t element_count(const TensorEntry& t) {
  std::uint64_t n = 1;
  for (std::uint64_t d : t.dims) n *= d;
  return n;
}

// Per-trial matrices are stored row-major; Eigen matrices are column-major.
void append_matrix(TensorEntry& entry, const Matrix& m) {
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) entry.data.push_back(m(r, c));
}

Matrix take_matrix(const TensorEntry& entry, std::size_t trial, Index rows, Index cols) {
  Matrix m(rows, cols);
  const std::size_t base = trial * static_cast<std::size_t>(rows * cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c)
      m(r, c) = entry.data[base + static_cast<std::size_t>(r * cols + c)];
  return m;
}

TensorEntry vector_entry(const Vector& v) {
  TensorEntry e;
  e.dims = {static_cast<std::uint64_t>(v.size())};
  e.data.assign(v.data(), v.data() + v.size());
  return e;
}

Vector entry_vector(const TensorEntry& e) {
  return Eigen::Map<const Vector>(e.data.data(), static_cast<Index>(e.data.size()));
}

}  // namespace

void save_archive(const std::string& path, const Archive& archive) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("'" + path + "': cannot open for writing");
  out.write(kMagic, sizeof kMagic);
  put_u32(out, kFormatVersion);
  put_u64(out, archive.meta.size());
  out.write(archive.meta.data(), static_cast<std::streamsize>(archive.meta.size()));
  put_u64(out, archive.tensors.size());
  for (const auto& [name, tensor] : archive.tensors) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, static_cast<std::uint32_t>(tensor.dims.size()));
    for (std::uint64_t d : tensor.dims) put_u64(out, d);
    if (tensor.data.size() != element_count(tensor))
      throw IoError("'" + path + "': tensor '" + name + "' dims do not match payload");
    out.write(reinterpret_cast<const char*>(tensor.data.data()),
              static_cast<std::streamsize>(tensor.data.size() * sizeof(double)));
  }
  if (!out) throw IoError("'" + path + "': write failed");
}

Archive load_archive(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("'" + path + "': cannot open");
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw IoError("'" + path + "': not a container file (bad magic)");
  const std::uint32_t version = get_u32(in, path);
  if (version != kFormatVersion)
    throw IoError("'" + path + "': unsupported container version " + std::to_string(version));
  Archive archive;
  const std::uint64_t meta_len = get_u64(in, path);
  archive.meta.resize(meta_len);
  if (!in.read(archive.meta.data(), static_cast<std::streamsize>(meta_len)))
    throw IoError("'" + path + "': truncated metadata");
  const std::uint64_t n_tensors = get_u64(in, path);
  for (std::uint64_t t = 0; t < n_tensors; ++t) {
    const std::uint32_t name_len = get_u32(in, path);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw IoError("'" + path + "': truncated name");
    TensorEntry entry;
    const std::uint32_t ndims = get_u32(in, path);
    if (ndims < 1 || ndims > 3)
      throw IoError("'" + path + "': tensor '" + name + "' has unsupported rank");
    for (std::uint32_t d = 0; d < ndims; ++d) entry.dims.push_back(get_u64(in, path));
    entry.data.resize(element_count(entry));
    if (!in.read(reinterpret_cast<char*>(entry.data.data()),
                 static_cast<std::streamsize>(entry.data.size() * sizeof(double))))
      throw IoError("'" + path + "': truncated payload for tensor '" + name + "'");
    archive.tensors.emplace(std::move(name), std::move(entry));
  }
  return archive;
}

void write_dataset(const std::string& path, const Dataset& data) {
  json meta;
  meta["schema"] = "mmgpvae.dataset";
  meta["version"] = 1;
  meta["m_dim"] = data.m_dim;
  meta["n_dim"] = data.n_dim;
  meta["time_bins"] = data.t_bins;
  meta["p_true"] = data.p_true;
  meta["trials"] = data.trials.size();
  meta["train_idx"] = data.train_idx;
  meta["test_idx"] = data.test_idx;
  meta["seed"] = data.seed;
  if (!data.sim_echo.empty()) meta["generator"] = json::parse(data.sim_echo);

  Archive archive;
  archive.meta = meta.dump();
  const auto n_trials = static_cast<std::uint64_t>(data.trials.size());

  TensorEntry y_a, y_b;
  y_a.dims = {n_trials, static_cast<std::uint64_t>(data.m_dim),
              static_cast<std::uint64_t>(data.t_bins)};
  y_b.dims = {n_trials, static_cast<std::uint64_t>(data.n_dim),
              static_cast<std::uint64_t>(data.t_bins)};
  for (const Trial& tr : data.trials) {
    append_matrix(y_a, tr.y_a);
    append_matrix(y_b, tr.y_b);
  }
  archive.tensors["y_a"] = std::move(y_a);
  archive.tensors["y_b"] = std::move(y_b);

  if (data.truth.has_latents()) {
    TensorEntry z;
    z.dims = {n_trials, static_cast<std::uint64_t>(data.p_true),
              static_cast<std::uint64_t>(data.t_bins)};
    for (const Matrix& m : data.truth.latents) append_matrix(z, m);
    archive.tensors["z_true"] = std::move(z);
  }
  if (data.truth.has_rates()) {
    TensorEntry r;
    r.dims = {n_trials, static_cast<std::uint64_t>(data.n_dim),
              static_cast<std::uint64_t>(data.t_bins)};
    for (const Matrix& m : data.truth.rates) append_matrix(r, m);
    archive.tensors["rates_true"] = std::move(r);
  }
  if (data.truth.has_clean_images()) {
    TensorEntry c;
    c.dims = {n_trials, static_cast<std::uint64_t>(data.m_dim),
              static_cast<std::uint64_t>(data.t_bins)};
    for (const Matrix& m : data.truth.clean_images) append_matrix(c, m);
    archive.tensors["images_clean"] = std::move(c);
  }
  if (data.truth.w_s2.size() > 0) {
    archive.tensors["w_s2_true"] = vector_entry(data.truth.w_s2);
    archive.tensors["w_b_true"] = vector_entry(data.truth.w_b);
    archive.tensors["d_true"] = vector_entry(data.truth.d);
  }
  save_archive(path, archive);
}

Dataset read_dataset(const std::string& path) {
  const Archive archive = load_archive(path);
  json meta;
  try {
    meta = json::parse(archive.meta);
  } catch (const json::parse_error& e) {
    throw IoError("'" + path + "': bad metadata JSON: " + e.what());
  }
  for (const char* field :
       {"schema", "version", "m_dim", "n_dim", "time_bins", "p_true", "trials", "train_idx",
        "test_idx", "seed"})
    if (!meta.contains(field))
      throw IoError("'" + path + "': dataset header missing field '" + field + "'");
  if (meta["schema"] != "mmgpvae.dataset")
    throw IoError("'" + path + "': not a dataset container (schema mismatch)");
  if (meta["version"] != 1)
    throw IoError("'" + path + "': unsupported dataset schema version");

  Dataset data;
  data.m_dim = meta["m_dim"].get<Index>();
  data.n_dim = meta["n_dim"].get<Index>();
  data.t_bins = meta["time_bins"].get<Index>();
  data.p_true = meta["p_true"].get<Index>();
  data.seed = meta["seed"].get<std::uint64_t>();
  data.train_idx = meta["train_idx"].get<std::vector<Index>>();
  data.test_idx = meta["test_idx"].get<std::vector<Index>>();
  if (meta.contains("generator")) data.sim_echo = meta["generator"].dump();
  const auto n_trials = meta["trials"].get<std::size_t>();

  if (!archive.has("y_a") || !archive.has("y_b"))
    throw IoError("'" + path + "': dataset requires tensors 'y_a' and 'y_b'");
  const TensorEntry& y_a = archive.tensors.at("y_a");
  const TensorEntry& y_b = archive.tensors.at("y_b");
  auto check_dims = [&](const TensorEntry& t, const char* name, Index rows) {
    if (t.dims.size() != 3 || t.dims[0] != n_trials ||
        t.dims[1] != static_cast<std::uint64_t>(rows) ||
        t.dims[2] != static_cast<std::uint64_t>(data.t_bins))
      throw IoError("'" + path + "': tensor '" + name + "' dims disagree with header");
  };
  check_dims(y_a, "y_a", data.m_dim);
  check_dims(y_b, "y_b", data.n_dim);
  for (Index i : data.train_idx)
    if (i < 0 || static_cast<std::size_t>(i) >= n_trials)
      throw IoError("'" + path + "': train index out of range");
  for (Index i : data.test_idx)
    if (i < 0 || static_cast<std::size_t>(i) >= n_trials)
      throw IoError("'" + path + "': test index out of range");

  data.trials.resize(n_trials);
  for (std::size_t i = 0; i < n_trials; ++i) {
    data.trials[i].y_a = take_matrix(y_a, i, data.m_dim, data.t_bins);
    data.trials[i].y_b = take_matrix(y_b, i, data.n_dim, data.t_bins);
  }
  if (archive.has("z_true")) {
    const TensorEntry& z = archive.tensors.at("z_true");
    check_dims(z, "z_true", data.p_true);
    for (std::size_t i = 0; i < n_trials; ++i)
      data.truth.latents.push_back(take_matrix(z, i, data.p_true, data.t_bins));
  }
  if (archive.has("rates_true")) {
    const TensorEntry& r = archive.tensors.at("rates_true");
    check_dims(r, "rates_true", data.n_dim);
    for (std::size_t i = 0; i < n_trials; ++i)
      data.truth.rates.push_back(take_matrix(r, i, data.n_dim, data.t_bins));
  }
  if (archive.has("images_clean")) {
    const TensorEntry& c = archive.tensors.at("images_clean");
    check_dims(c, "images_clean", data.m_dim);
    for (std::size_t i = 0; i < n_trials; ++i)
      data.truth.clean_images.push_back(take_matrix(c, i, data.m_dim, data.t_bins));
  }
  if (archive.has("w_s2_true")) {
    data.truth.w_s2 = entry_vector(archive.tensors.at("w_s2_true"));
    data.truth.w_b = entry_vector(archive.tensors.at("w_b_true"));
    data.truth.d = entry_vector(archive.tensors.at("d_true"));
  }
  return data;
}

namespace {

std::string git_describe() {
  std::FILE* pipe = popen("git describe --always --dirty 2>/dev/null", "r");
  if (!pipe) return "unknown";
  char buf[128];
  std::string out;
  while (std::fgets(buf, sizeof buf, pipe)) out += buf;
  pclose(pipe);
  while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
  return out.empty() ? "unknown" : out;
}

void add_param_tensors(Archive& archive, const Model& model, const std::string& prefix) {
  for (const ParamEntry& p : model.params()) {
    TensorEntry entry;
    entry.dims = {static_cast<std::uint64_t>(p.rows), static_cast<std::uint64_t>(p.cols)};
    entry.data.assign(p.data, p.data + p.size());
    archive.tensors[prefix + p.name] = std::move(entry);
  }
}

void load_param_tensors(const Archive& archive, Model& model, const std::string& prefix,
                        const std::string& path) {
  for (ParamEntry p : model.params()) {
    const auto it = archive.tensors.find(prefix + p.name);
    if (it == archive.tensors.end())
      throw IoError("'" + path + "': checkpoint missing tensor '" + prefix + p.name + "'");
    if (static_cast<Index>(it->second.data.size()) != p.size())
      throw IoError("'" + path + "': checkpoint tensor '" + prefix + p.name +
                    "' has wrong size");
    std::copy(it->second.data.begin(), it->second.data.end(), p.data);
  }
}

}  // namespace

void write_checkpoint(const std::string& path, const TrainState& state,
                      const TrainConfig& train_cfg, const std::string& extra_meta_json) {
  json meta;
  meta["schema"] = "mmgpvae.checkpoint";
  meta["version"] = 1;
  meta["model_config"] = json::parse(model_config_to_json(state.model.cfg));
  meta["train_config"] = json::parse(train_config_to_json(train_cfg));
  meta["epoch"] = state.epoch;
  meta["seed"] = state.seed;
  meta["adam_steps"] = state.adam.steps;
  meta["final_elbo"] =
      state.trace.empty() ? json() : json(state.trace.back().terms.total());
  meta["git_describe"] = git_describe();
  if (!extra_meta_json.empty()) meta["extra"] = json::parse(extra_meta_json);

  Archive archive;
  archive.meta = meta.dump();
  add_param_tensors(archive, state.model, "param/");
  add_param_tensors(archive, state.adam.m, "adam_m/");
  add_param_tensors(archive, state.adam.v, "adam_v/");
  save_archive(path, archive);
}

LoadedCheckpoint read_checkpoint(const std::string& path) {
  const Archive archive = load_archive(path);
  json meta;
  try {
    meta = json::parse(archive.meta);
  } catch (const json::parse_error& e) {
    throw IoError("'" + path + "': bad metadata JSON: " + e.what());
  }
  if (!meta.contains("schema") || meta["schema"] != "mmgpvae.checkpoint")
    throw IoError("'" + path + "': not a checkpoint container");
  const ModelConfig cfg = model_config_from_json(meta["model_config"].dump());
  Model model = make_model(cfg, DataStats{}, 0);
  LoadedCheckpoint out{TrainState(std::move(model)),
                       train_config_from_json(meta["train_config"].dump()), archive.meta};
  out.state.epoch = meta["epoch"].get<Index>();
  out.state.seed = meta["seed"].get<std::uint64_t>();
  out.state.adam.steps = meta["adam_steps"].get<Index>();
  load_param_tensors(archive, out.state.model, "param/", path);
  load_param_tensors(archive, out.state.adam.m, "adam_m/", path);
  load_param_tensors(archive, out.state.adam.v, "adam_v/", path);
  return out;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("'" + path + "': cannot open for writing");
  for (std::size_t i = 0; i < header.size(); ++i)
    out << header[i] << (i + 1 < header.size() ? "," : "");
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i)
      out << row[i] << (i + 1 < row.size() ? "," : "");
    out << "\n";
  }
  if (!out) throw IoError("'" + path + "': write failed");
}

DirLock::DirLock(const std::string& dir) : path_(dir + "/.mmgpvae.lock") {
  std::FILE* f = std::fopen(path_.c_str(), "wx");
  if (!f)
    throw IoError("'" + dir + "': output directory is locked by another run (" + path_ + ")");
  std::fclose(f);
}

DirLock::~DirLock() { std::remove(path_.c_str()); }

}  // namespace mmgpvae
