#include "hyre/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "hyre/errors.hpp"

namespace hyre::bench {

namespace {

constexpr char kMagic[8] = {'H', 'Y', 'R', 'E', 'C', 'K', 'P', '1'};
constexpr char kTrailer[8] = {'H', 'Y', 'R', 'E', 'E', 'N', 'D', '\0'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw io_error("checkpoint: cannot open for writing: " + path);
  }

  void raw(const void* data, std::size_t n) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out_) throw io_error("checkpoint: write failed");
  }
  void u8(std::uint8_t v) { raw(&v, 1); }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void f64(double v) { raw(&v, 8); }
  void doubles(const std::vector<double>& v) {
    u64(v.size());
    raw(v.data(), v.size() * sizeof(double));
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : in_(path, std::ios::binary) {
    if (!in_) throw io_error("checkpoint: cannot open: " + path);
  }

  void raw(void* data, std::size_t n) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw format_error("checkpoint: truncated file");
    }
  }
  std::uint8_t u8() {
    std::uint8_t v;
    raw(&v, 1);
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    raw(&v, 8);
    return v;
  }
  double f64() {
    double v;
    raw(&v, 8);
    return v;
  }
  std::vector<double> doubles(std::uint64_t cap = 1ULL << 28) {
    const std::uint64_t n = u64();
    if (n > cap) throw format_error("checkpoint: implausible block size");
    std::vector<double> v(n);
    raw(v.data(), n * sizeof(double));
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    if (n > (1U << 20)) throw format_error("checkpoint: implausible string size");
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }

 private:
  std::ifstream in_;
};

void write_params(Writer& w, const std::string& name, bool frozen,
                  const nn::MlpParams& params) {
  w.str(name);
  w.u8(frozen ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(params.layers.size()));
  for (const auto& layer : params.layers) {
    w.u32(static_cast<std::uint32_t>(layer.act));
    w.u64(layer.weight.rows);
    w.u64(layer.weight.cols);
    w.doubles(layer.weight.data);
    w.doubles(layer.bias);
  }
}

struct NamedParams {
  std::string name;
  bool frozen;
  nn::MlpParams params;
};

NamedParams read_params(Reader& r) {
  NamedParams np;
  np.name = r.str();
  np.frozen = r.u8() != 0;
  const std::uint32_t n_layers = r.u32();
  if (n_layers > 1024) throw format_error("checkpoint: implausible layer count");
  np.params.layers.resize(n_layers);
  for (auto& layer : np.params.layers) {
    const std::uint32_t act = r.u32();
    if (act > 2) throw format_error("checkpoint: bad activation tag");
    layer.act = static_cast<nn::Activation>(act);
    const std::uint64_t rows = r.u64();
    const std::uint64_t cols = r.u64();
    layer.weight = nn::Matrix(rows, cols, r.doubles());
    layer.bias = r.doubles();
    if (layer.bias.size() != rows) {
      throw format_error("checkpoint: bias size mismatch");
    }
  }
  return np;
}

}  // namespace

void checkpoint_save(const EnsembleModel& model, const BeliefState* belief,
                     const std::string& path) {
  Writer w(path);
  w.raw(kMagic, 8);
  w.u32(kVersion);

  const auto& c = model.config;
  w.u64(c.heads);
  w.u32(static_cast<std::uint32_t>(c.arch));
  w.f64(c.prior_scale);
  w.u64(c.index_dim);
  w.u64(c.input_dim);
  w.u64(c.hidden.size());
  for (std::size_t h : c.hidden) w.u64(h);
  w.u32(static_cast<std::uint32_t>(c.activation));
  w.u64(c.seed);

  std::vector<NamedParams> blocks;
  switch (c.arch) {
    case Architecture::vanilla:
      for (std::size_t k = 0; k < model.members.size(); ++k) {
        blocks.push_back({"member_" + std::to_string(k), false, model.members[k]});
      }
      break;
    case Architecture::shared_base:
      blocks.push_back({"prior_net", true, model.prior_net});
      blocks.push_back({"learn_net", false, model.learn_net});
      break;
    case Architecture::epinet:
      blocks.push_back({"base_trunk", false, model.base_trunk});
      blocks.push_back({"base_head", false, model.base_head});
      blocks.push_back({"epi_prior", true, model.epi_prior});
      blocks.push_back({"epi_learn", false, model.epi_learn});
      break;
  }
  w.u32(static_cast<std::uint32_t>(blocks.size()));
  for (const auto& b : blocks) write_params(w, b.name, b.frozen, b.params);

  if (c.arch == Architecture::epinet) {
    w.u64(model.indices.rows);
    w.u64(model.indices.cols);
    w.doubles(model.indices.data);
  }

  w.u8(belief ? 1 : 0);
  if (belief) {
    w.u64(belief->heads);
    w.f64(belief->temperature);
    w.doubles(belief->cumulative_losses);
    w.doubles(belief->log_prior);
  }
  w.raw(kTrailer, 8);
}

Checkpoint checkpoint_load(const std::string& path) {
  Reader r(path);
  char magic[8];
  r.raw(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0) {
    throw format_error("checkpoint: bad magic (not a checkpoint file)");
  }
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw format_error("checkpoint: unsupported version " + std::to_string(version));
  }

  Checkpoint ck;
  EnsembleConfig& c = ck.model.config;
  c.heads = r.u64();
  const std::uint32_t arch = r.u32();
  if (arch > 2) throw format_error("checkpoint: bad architecture tag");
  c.arch = static_cast<Architecture>(arch);
  c.prior_scale = r.f64();
  c.index_dim = r.u64();
  c.input_dim = r.u64();
  const std::uint64_t n_hidden = r.u64();
  if (n_hidden > 1024) throw format_error("checkpoint: implausible hidden count");
  c.hidden.resize(n_hidden);
  for (auto& h : c.hidden) h = r.u64();
  const std::uint32_t act = r.u32();
  if (act > 2) throw format_error("checkpoint: bad activation tag");
  c.activation = static_cast<nn::Activation>(act);
  c.seed = r.u64();
  c.validate();

  const std::uint32_t n_blocks = r.u32();
  if (n_blocks > 1U << 20) throw format_error("checkpoint: implausible block count");
  ck.model.members.clear();
  for (std::uint32_t i = 0; i < n_blocks; ++i) {
    NamedParams np = read_params(r);
    if (np.name.rfind("member_", 0) == 0) {
      ck.model.members.push_back(std::move(np.params));
    } else if (np.name == "prior_net") {
      ck.model.prior_net = std::move(np.params);
    } else if (np.name == "learn_net") {
      ck.model.learn_net = std::move(np.params);
    } else if (np.name == "base_trunk") {
      ck.model.base_trunk = std::move(np.params);
    } else if (np.name == "base_head") {
      ck.model.base_head = std::move(np.params);
    } else if (np.name == "epi_prior") {
      ck.model.epi_prior = std::move(np.params);
    } else if (np.name == "epi_learn") {
      ck.model.epi_learn = std::move(np.params);
    } else {
      throw format_error("checkpoint: unknown block '" + np.name + "'");
    }
  }
  switch (c.arch) {
    case Architecture::vanilla:
      if (ck.model.members.size() != c.heads) {
        throw format_error("checkpoint: member count != heads");
      }
      break;
    case Architecture::shared_base:
      if (ck.model.prior_net.layers.empty() || ck.model.learn_net.layers.empty()) {
        throw format_error("checkpoint: missing shared_base blocks");
      }
      break;
    case Architecture::epinet: {
      if (ck.model.base_trunk.layers.empty() || ck.model.base_head.layers.empty() ||
          ck.model.epi_prior.layers.empty() || ck.model.epi_learn.layers.empty()) {
        throw format_error("checkpoint: missing epinet blocks");
      }
      const std::uint64_t rows = r.u64();
      const std::uint64_t cols = r.u64();
      if (rows != c.heads || cols != c.index_dim) {
        throw format_error("checkpoint: index matrix shape mismatch");
      }
      ck.model.indices = nn::Matrix(rows, cols, r.doubles());
      break;
    }
  }

  if (r.u8() != 0) {
    BeliefState belief;
    belief.heads = r.u64();
    belief.temperature = r.f64();
    belief.cumulative_losses = r.doubles();
    belief.log_prior = r.doubles();
    if (belief.cumulative_losses.size() != belief.heads ||
        belief.log_prior.size() != belief.heads || belief.temperature <= 0.0) {
      throw format_error("checkpoint: inconsistent belief block");
    }
    ck.belief = std::move(belief);
  }
  char trailer[8];
  r.raw(trailer, 8);
  if (std::memcmp(trailer, kTrailer, 8) != 0) {
    throw format_error("checkpoint: missing trailer (corrupt file)");
  }
  return ck;
}

}  // namespace hyre::bench
